//! Central finite-difference verification of analytic gradients.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::params::ParamSet;

/// A scalar loss over one or more parameter sets.
pub trait Objective {
    fn value(&self, params: &[ParamSet]) -> f64;
    /// Loss and gradient, indexed `[set][tensor][element]`.
    fn value_and_grad(&self, params: &[ParamSet]) -> (f64, Vec<Vec<Vec<f64>>>);
}

#[derive(Debug, Clone)]
pub struct GradcheckOptions {
    pub step: f64,
    /// Check at most this many randomly chosen entries per tensor.
    pub max_entries_per_tensor: Option<usize>,
    pub seed: u64,
}

impl Default for GradcheckOptions {
    fn default() -> Self {
        Self {
            step: 1e-5,
            max_entries_per_tensor: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckReport {
    /// `max |g_a - g_fd| / max(1, |g_a|, |g_fd|)` over checked entries.
    pub max_rel_error: f64,
    pub worst: Option<String>,
    pub checked: usize,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / 1f64.max(analytic.abs()).max(numeric.abs())
}

pub fn gradcheck(params: &[ParamSet], objective: &dyn Objective, opts: &GradcheckOptions) -> Result<GradcheckReport> {
    let (loss, grads) = objective.value_and_grad(params);
    if !loss.is_finite() {
        return Err(Error::Evaluation(format!("loss is {loss}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut work: Vec<ParamSet> = params.to_vec();
    let mut report = GradcheckReport {
        max_rel_error: 0.0,
        worst: None,
        checked: 0,
    };
    for s in 0..params.len() {
        for t in 0..params[s].len() {
            let len = params[s].tensors()[t].data.len();
            let entries: Vec<usize> = match opts.max_entries_per_tensor {
                Some(k) if k < len => {
                    let mut v = sample(&mut rng, len, k).into_vec();
                    v.sort_unstable();
                    v
                }
                _ => (0..len).collect(),
            };
            for e in entries {
                let original = params[s].tensors()[t].data[e];
                let id = crate::params::ParamId(t);
                work[s].get_mut(id)[e] = original + opts.step;
                let plus = objective.value(&work);
                work[s].get_mut(id)[e] = original - opts.step;
                let minus = objective.value(&work);
                work[s].get_mut(id)[e] = original;
                if !(plus.is_finite() && minus.is_finite()) {
                    return Err(Error::Evaluation("non-finite loss under perturbation".into()));
                }
                let numeric = (plus - minus) / (2.0 * opts.step);
                let err = relative_error(grads[s][t][e], numeric);
                report.checked += 1;
                if err > report.max_rel_error || report.worst.is_none() {
                    report.max_rel_error = err;
                    report.worst = Some(format!("{}[{e}]", params[s].tensors()[t].name));
                }
            }
        }
    }
    Ok(report)
}
