//! Self-checks run by `adapter-check`: zero-init transparency of the
//! conditioned toy model and finite-difference verification of its
//! gradients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::adapter::{Branch, FilmHead, ObjectInput};
use crate::cfm::{data, init_model, BatchObjective, ToyConfig, ToyModel, TrainingPoint};
use crate::error::Result;
use crate::gradcheck::{gradcheck, GradcheckOptions};
use crate::trace::BinaryGrid;

pub const GRADCHECK_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransparencyReport {
    pub seed: u64,
    pub trials: usize,
    /// Trials whose outputs differed in any bit.
    pub mismatches: usize,
}

/// Fresh conditioned and unconditioned models sharing `seed` must produce
/// bit-identical fields for random `(t, x_t, condition)`, dropped or not.
pub fn transparency(config: &ToyConfig, seed: u64, trials: usize) -> Result<TransparencyReport> {
    let (cond, data) = init_model(config, seed, true)?;
    let (plain, _) = init_model(config, seed, false)?;
    let spec = config.dataset_spec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7A45);
    let mut mismatches = 0;
    for i in 0..trials {
        let s = &data[rng.random_range(0..data.len())];
        let input = spec.adapter_input(s);
        let t: f64 = rng.random();
        let x = data::standard_normal(&mut rng, config.latent_dim);
        let a = cond.field(t, &x, (i % 4 != 0).then_some(&input));
        let b = plain.field(t, &x, None);
        if a.iter().zip(&b).any(|(p, q)| p.to_bits() != q.to_bits()) {
            mismatches += 1;
        }
    }
    Ok(TransparencyReport { seed, trials, mismatches })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientReport {
    pub seed: u64,
    pub scope: String,
    pub parameters: usize,
    pub checked: usize,
    pub max_rel_error: f64,
    pub worst: Option<String>,
}

/// Small configuration for exhaustive checks.
pub fn reduced_config() -> ToyConfig {
    ToyConfig {
        latent_dim: 4,
        backbone_hidden: 6,
        context_dim: 3,
        frames: 4,
        patch_dim: 4,
        adapter_hidden: 4,
        film_head: FilmHead::Flattened,
        fourier_count: 2,
        samples: 6,
        batch: 3,
        ..ToyConfig::default()
    }
}

/// A batch touching every adapter path: two objects (so gate weights
/// matter), an empty mask (occlusion token), an undefined speed (velocity
/// occlusion token) and a dropped condition (empty tokens).
fn probe_batch(model: &ToyModel, data: &[data::SyntheticSample], rng: &mut ChaCha8Rng) -> Vec<TrainingPoint> {
    let spec = model.config.dataset_spec();
    let d = model.config.latent_dim;
    let mut points: Vec<TrainingPoint> = data
        .iter()
        .take(3)
        .enumerate()
        .map(|(i, s)| TrainingPoint {
            x0: data::standard_normal(rng, d),
            x1: s.x1.clone(),
            t: rng.random_range(0.05..0.95),
            condition: Some(spec.adapter_input(s)),
            dropped: i == 2,
        })
        .collect();
    if let Some(input) = points[0].condition.as_mut() {
        let frames = input.patches.len();
        let (rows, cols) = (spec.patch_rows, spec.patch_cols);
        let mut masks = vec![BinaryGrid::from_fn(rows, cols, |r, c| r == 0 && c < 2); frames];
        masks[1] = BinaryGrid::filled(rows, cols, false);
        let mut velocities: Vec<Option<f64>> = (0..frames).map(|l| Some(0.7 + 0.3 * l as f64)).collect();
        velocities[2] = None;
        input.objects.push(ObjectInput {
            masks,
            mass_kg: 1.7,
            velocities,
        });
    }
    points
}

fn checked_model(config: &ToyConfig, seed: u64) -> Result<(ToyModel, Vec<data::SyntheticSample>)> {
    let (mut model, data) = init_model(config, seed, true)?;
    let adapter = model.adapter_mut().expect("conditioned model");
    // zero mixers would block gradient flow into the rest of the adapter
    adapter.randomize_mixer_output(Branch::Mass, 0.3, seed ^ 1);
    adapter.randomize_mixer_output(Branch::Velocity, 0.3, seed ^ 2);
    Ok((model, data))
}

/// Gradcheck of the batch loss. `max_entries` limits the entries per tensor.
pub fn gradient(config: &ToyConfig, seed: u64, max_entries: Option<usize>) -> Result<GradientReport> {
    let (model, data) = checked_model(config, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6AD);
    let batch = probe_batch(&model, &data, &mut rng);
    let params = model.param_sets();
    let objective = BatchObjective { model: &model, batch: &batch };
    let opts = GradcheckOptions {
        max_entries_per_tensor: max_entries,
        seed,
        ..GradcheckOptions::default()
    };
    let r = gradcheck(&params, &objective, &opts)?;
    Ok(GradientReport {
        seed,
        scope: match max_entries {
            None => "all".into(),
            Some(k) => format!("{k} per tensor"),
        },
        parameters: params.iter().map(|p| p.scalar_count()).sum(),
        checked: r.checked,
        max_rel_error: r.max_rel_error,
        worst: r.worst,
    })
}
