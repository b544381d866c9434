//! Toy conditional flow matching over synthetic impact latents.
//!
//! The backbone is a small perceptron `(x_t, t) -> velocity` with a single
//! AdaLN site whose `(scale, shift)` come from a learned context vector and
//! the time embedding. When conditioning is enabled, the physics adapter
//! refines those parameters through its delta mixers, driven by the
//! frame-averaged mass and velocity conditions.

pub mod data;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::adapter::{draw_dropout, AdapterConfig, AdapterInput, AdapterState, AdapterStateFile, FilmHead};
use crate::error::{Error, Result};
use crate::nn::Linear;
use crate::params::{Adam, Init, ParamId, ParamSet};
use crate::tape::{Tape, Var};

pub use data::{DatasetSpec, SyntheticSample, CLASS_LABELS};

pub fn interpolate(x0: &[f64], x1: &[f64], t: f64) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::validation("t", format!("must be in [0, 1], got {t}")));
    }
    if x0.len() != x1.len() {
        return Err(Error::validation("x1", "length differs from x0"));
    }
    Ok(x0.iter().zip(x1).map(|(a, b)| (1.0 - t) * a + t * b).collect())
}

/// One term of the flow-matching objective.
#[derive(Debug, Clone, PartialEq)]
pub struct CfmPoint {
    pub x0: Vec<f64>,
    pub x1: Vec<f64>,
    pub t: f64,
}

/// Mean over the batch of `‖f(t, x_t) − (x1 − x0)‖²`.
pub fn cfm_loss<F>(points: &[CfmPoint], mut field: F) -> Result<f64>
where
    F: FnMut(usize, f64, &[f64]) -> Vec<f64>,
{
    if points.is_empty() {
        return Err(Error::validation("batch", "must not be empty"));
    }
    let mut total = 0.0;
    for (i, p) in points.iter().enumerate() {
        let xt = interpolate(&p.x0, &p.x1, p.t)?;
        let pred = field(i, p.t, &xt);
        if pred.len() != xt.len() {
            return Err(Error::validation("prediction", "wrong dimension"));
        }
        total += pred
            .iter()
            .zip(p.x1.iter().zip(&p.x0))
            .map(|(f, (a, b))| (f - (a - b)).powi(2))
            .sum::<f64>();
    }
    let loss = total / points.len() as f64;
    if !loss.is_finite() {
        return Err(Error::Evaluation(format!("loss is {loss}")));
    }
    Ok(loss)
}

/// Explicit Euler from `t = 0` to `t = 1`: `x_{k+1} = x_k + f(t_k, x_k)/n`,
/// `t_k = k/n`.
pub fn euler_integrate<F>(x0: &[f64], steps: usize, mut field: F) -> Result<Vec<f64>>
where
    F: FnMut(f64, &[f64]) -> Vec<f64>,
{
    if steps == 0 {
        return Err(Error::validation("n_steps", "must be >= 1"));
    }
    let mut x = x0.to_vec();
    for k in 0..steps {
        let t = k as f64 / steps as f64;
        // 1/n up to rounding; differencing the grid keeps constant fields exact
        let dt = (k + 1) as f64 / steps as f64 - t;
        let v = field(t, &x);
        for (xi, vi) in x.iter_mut().zip(&v) {
            *xi += dt * vi;
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Sampling(format!("state became non-finite at step {k}")));
        }
    }
    Ok(x)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToyConfig {
    pub latent_dim: usize,
    pub backbone_hidden: usize,
    pub context_dim: usize,
    pub frames: usize,
    pub patch_dim: usize,
    pub adapter_hidden: usize,
    pub film_head: FilmHead,
    pub fourier_count: usize,
    pub fourier_base: f64,
    pub samples: usize,
    pub steps: usize,
    pub batch: usize,
    pub lr: f64,
    pub dropout_p: f64,
    pub sampler_steps: usize,
}

impl Default for ToyConfig {
    fn default() -> Self {
        Self {
            latent_dim: 16,
            backbone_hidden: 128,
            context_dim: 8,
            frames: 8,
            patch_dim: 16,
            adapter_hidden: 32,
            film_head: FilmHead::Flattened,
            fourier_count: 8,
            fourier_base: 0.125,
            samples: 256,
            steps: 2000,
            batch: 16,
            lr: 1e-3,
            dropout_p: 0.1,
            sampler_steps: 25,
        }
    }
}

impl ToyConfig {
    pub fn dataset_spec(&self) -> DatasetSpec {
        DatasetSpec {
            latent_dim: self.latent_dim,
            frames: self.frames,
            impact_frame: self.frames / 2,
            patch_dim: self.patch_dim,
            ..DatasetSpec::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.latent_dim == 0 || self.backbone_hidden == 0 || self.context_dim == 0 {
            return Err(Error::validation("toy", "dimensions must be positive"));
        }
        if self.frames < 2 {
            return Err(Error::validation("toy.frames", "must be >= 2"));
        }
        if self.steps == 0 {
            return Err(Error::validation("toy.steps", "must be >= 1"));
        }
        if self.batch == 0 || self.samples == 0 {
            return Err(Error::validation("toy.batch", "batch and samples must be positive"));
        }
        if !(self.lr.is_finite() && self.lr >= 0.0) {
            return Err(Error::validation("toy.lr", "must be finite and >= 0"));
        }
        if !(0.0..=1.0).contains(&self.dropout_p) {
            return Err(Error::validation("toy.dropout_p", "must be in [0, 1]"));
        }
        if self.sampler_steps == 0 {
            return Err(Error::validation("toy.sampler_steps", "must be >= 1"));
        }
        Ok(())
    }
}

const TIME_FEATURES: usize = 7;

fn time_features(t: f64) -> Vec<f64> {
    let mut f = vec![t];
    for k in [1.0, 2.0, 4.0] {
        let (s, c) = (std::f64::consts::PI * k * t).sin_cos();
        f.push(s);
        f.push(c);
    }
    f
}

#[derive(Debug, Clone, PartialEq)]
struct Backbone {
    input: Linear,
    context: ParamId,
    ada: Linear,
    mid: Linear,
    out: Linear,
}

impl Backbone {
    fn register<R: Rng + ?Sized>(cfg: &ToyConfig, set: &mut ParamSet, rng: &mut R) -> Self {
        let h = cfg.backbone_hidden;
        Self {
            input: Linear::register(set, "backbone.input", cfg.latent_dim + TIME_FEATURES, h, rng),
            context: set.add("backbone.context", cfg.context_dim, Init::Normal(1.0), rng),
            ada: Linear::register(set, "backbone.adaln", cfg.context_dim + TIME_FEATURES, 2 * h, rng),
            mid: Linear::register(set, "backbone.mid", h, h, rng),
            out: Linear::register(set, "backbone.out", h, cfg.latent_dim, rng),
        }
    }
}

/// Backbone, optional physics adapter and the dataset statistics the adapter
/// normalizes with.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyModel {
    pub config: ToyConfig,
    pub seed: u64,
    backbone: Backbone,
    backbone_params: ParamSet,
    adapter: Option<AdapterState>,
}

/// Adapter inputs paired with a sample; `None` for unconditioned models.
pub type Condition<'a> = Option<&'a AdapterInput>;

impl ToyModel {
    /// Backbone initialization depends only on `seed`, so conditioned and
    /// unconditioned models with the same seed share backbone weights.
    pub fn new(config: ToyConfig, seed: u64, conditioned: bool, stats: crate::adapter::NormStats) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut backbone_params = ParamSet::new();
        let backbone = Backbone::register(&config, &mut backbone_params, &mut rng);
        let adapter = if conditioned {
            let ac = AdapterConfig {
                patch_dim: config.patch_dim,
                hidden_dim: config.adapter_hidden,
                frames: config.frames,
                fourier_count: config.fourier_count,
                fourier_base: config.fourier_base,
                omega_dim: 2 * config.backbone_hidden,
                film_head: config.film_head,
                stats,
            };
            Some(AdapterState::new(ac, seed ^ 0xADA9_7E55)?)
        } else {
            None
        };
        Ok(Self {
            config,
            seed,
            backbone,
            backbone_params,
            adapter,
        })
    }

    pub fn conditioned(&self) -> bool {
        self.adapter.is_some()
    }

    pub fn adapter(&self) -> Option<&AdapterState> {
        self.adapter.as_ref()
    }

    pub fn adapter_mut(&mut self) -> Option<&mut AdapterState> {
        self.adapter.as_mut()
    }

    pub fn backbone_params(&self) -> &ParamSet {
        &self.backbone_params
    }

    /// Parameter sets in optimizer order: backbone, then adapter.
    pub fn param_sets(&self) -> Vec<ParamSet> {
        let mut v = vec![self.backbone_params.clone()];
        if let Some(a) = &self.adapter {
            v.push(a.params().clone());
        }
        v
    }

    pub fn set_param_sets(&mut self, sets: &[ParamSet]) -> Result<()> {
        self.backbone_params.load(&sets[0])?;
        if let Some(a) = &mut self.adapter {
            let src = sets
                .get(1)
                .ok_or_else(|| Error::validation("params", "missing adapter parameters"))?;
            a.params_mut().load(src)?;
        }
        Ok(())
    }

    pub fn bind(&self, tape: &mut Tape) -> BoundModel {
        BoundModel {
            backbone: tape.bind(&self.backbone_params),
            adapter: self.adapter.as_ref().map(|a| tape.bind(a.params())),
        }
    }

    /// Pooled `(c_mass, c_vel)` for one sample, averaged over frames.
    pub fn physics_on_tape(
        &self,
        tape: &mut Tape,
        bound: &BoundModel,
        cond: Condition,
        dropped: bool,
    ) -> Option<(Var, Var)> {
        let (adapter, vars) = (self.adapter.as_ref()?, bound.adapter.as_ref()?);
        let input = cond?;
        let c = adapter.condition_on_tape(tape, vars, input, dropped);
        let inv = 1.0 / c.mass.len() as f64;
        let m = tape.sum(&c.mass);
        let m = tape.scale_const(m, inv);
        let v = tape.sum(&c.vel);
        let v = tape.scale_const(v, inv);
        Some((m, v))
    }

    /// Predicted velocity field at `(t, x_t)`.
    pub fn field_on_tape(&self, tape: &mut Tape, bound: &BoundModel, t: f64, xt: &[f64], physics: Option<(Var, Var)>) -> Var {
        let bb = &self.backbone;
        let vars = &bound.backbone;
        let tf = time_features(t);
        let mut inp = xt.to_vec();
        inp.extend_from_slice(&tf);
        let inp = tape.leaf(inp);
        let tfv = tape.leaf(tf);
        let ctx = tape.concat(&[vars[bb.context.0], tfv]);
        let mut omega = bb.ada.forward(tape, vars, ctx);
        if let (Some((cm, cv)), Some(adapter), Some(avars)) = (physics, &self.adapter, &bound.adapter) {
            omega = adapter.delta_on_tape(tape, avars, omega, cm, cv);
        }
        let h = self.config.backbone_hidden;
        let scale = tape.slice(omega, 0, h);
        let shift = tape.slice(omega, h, h);
        let pre = bb.input.forward(tape, vars, inp);
        let n = tape.normalize(pre);
        let factor = tape.add_const(scale, 1.0);
        let modded = tape.mul(n, factor);
        let modded = tape.add(modded, shift);
        let a = tape.gelu(modded);
        let m = bb.mid.forward(tape, vars, a);
        let h = tape.add(pre, m);
        bb.out.forward(tape, vars, h)
    }

    /// Field evaluation outside training.
    pub fn field(&self, t: f64, xt: &[f64], cond: Condition) -> Vec<f64> {
        let mut tape = Tape::new();
        let bound = self.bind(&mut tape);
        let phys = self.physics_on_tape(&mut tape, &bound, cond, false);
        let out = self.field_on_tape(&mut tape, &bound, t, xt, phys);
        tape.value(out).to_vec()
    }

    /// Euler sampling from `x0`. The adapter is evaluated once per sample.
    pub fn sample(&self, x0: &[f64], cond: Condition, steps: usize) -> Result<Vec<f64>> {
        if x0.len() != self.config.latent_dim {
            return Err(Error::validation("x0", "wrong latent dimension"));
        }
        let mut tape = Tape::new();
        let bound = self.bind(&mut tape);
        let phys = self.physics_on_tape(&mut tape, &bound, cond, false);
        let base = tape.len();
        euler_integrate(x0, steps, |t, x| {
            let out = self.field_on_tape(&mut tape, &bound, t, x, phys);
            let v = tape.value(out).to_vec();
            debug_assert!(tape.len() > base);
            v
        })
    }

    /// Batch objective `mean_b ‖f − (x1 − x0)‖²` on a fresh tape; returns the
    /// tape, the loss node and the bound parameters for backprop.
    pub fn loss_on_tape(&self, batch: &[TrainingPoint]) -> (Tape, Var, BoundModel) {
        let mut tape = Tape::new();
        let bound = self.bind(&mut tape);
        let mut terms = Vec::with_capacity(batch.len());
        for p in batch {
            let phys = self.physics_on_tape(&mut tape, &bound, p.condition.as_ref(), p.dropped);
            let xt: Vec<f64> = p.x0.iter().zip(&p.x1).map(|(a, b)| (1.0 - p.t) * a + p.t * b).collect();
            let pred = self.field_on_tape(&mut tape, &bound, p.t, &xt, phys);
            let target = tape.leaf(p.x1.iter().zip(&p.x0).map(|(a, b)| a - b).collect());
            let diff = tape.sub(pred, target);
            terms.push(tape.sum_squares(diff));
        }
        let total = tape.sum(&terms);
        let loss = tape.scale_const(total, 1.0 / batch.len() as f64);
        (tape, loss, bound)
    }

    pub fn loss_and_grads(&self, batch: &[TrainingPoint]) -> (f64, Vec<Vec<Vec<f64>>>) {
        let (mut tape, loss, bound) = self.loss_on_tape(batch);
        tape.backward(loss);
        let mut grads = vec![tape.param_grads(&bound.backbone)];
        if let Some(a) = &bound.adapter {
            grads.push(tape.param_grads(a));
        }
        (tape.value(loss)[0], grads)
    }

    pub fn to_file(&self, loss_curve: Vec<f64>) -> ToyModelFile {
        ToyModelFile {
            config: self.config.clone(),
            seed: self.seed,
            conditioned: self.conditioned(),
            backbone: self.backbone_params.clone(),
            adapter: self.adapter.as_ref().map(|a| a.to_file()),
            loss_curve,
        }
    }

    pub fn from_file(file: &ToyModelFile) -> Result<Self> {
        let stats = file
            .adapter
            .as_ref()
            .map(|a| a.config.stats)
            .unwrap_or_default();
        let mut model = Self::new(file.config.clone(), file.seed, file.conditioned, stats)?;
        model.backbone_params.load(&file.backbone)?;
        match (&mut model.adapter, &file.adapter) {
            (Some(a), Some(f)) => *a = AdapterState::from_file(f.clone())?,
            (None, None) => {}
            _ => return Err(Error::validation("adapter", "does not match the conditioned flag")),
        }
        Ok(model)
    }
}

#[derive(Debug, Clone)]
pub struct BoundModel {
    pub backbone: Vec<Var>,
    pub adapter: Option<Vec<Var>>,
}

#[derive(Debug, Clone)]
pub struct TrainingPoint {
    pub x0: Vec<f64>,
    pub x1: Vec<f64>,
    pub t: f64,
    pub condition: Option<AdapterInput>,
    pub dropped: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToyModelFile {
    pub config: ToyConfig,
    pub seed: u64,
    pub conditioned: bool,
    pub backbone: ParamSet,
    pub adapter: Option<AdapterStateFile>,
    pub loss_curve: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainingRun {
    pub model: ToyModel,
    pub losses: Vec<f64>,
}

/// Builds the synthetic dataset for `seed` and a freshly initialized model.
pub fn init_model(config: &ToyConfig, seed: u64, conditioned: bool) -> Result<(ToyModel, Vec<SyntheticSample>)> {
    config.validate()?;
    let spec = config.dataset_spec();
    let data = spec.generate(config.samples, seed);
    let stats = data::dataset_stats(&data);
    Ok((ToyModel::new(config.clone(), seed, conditioned, stats)?, data))
}

/// Draws one training batch. Consumes the generator in a fixed order so runs
/// are reproducible.
pub fn draw_batch<R: Rng + ?Sized>(model: &ToyModel, data: &[SyntheticSample], rng: &mut R) -> Result<Vec<TrainingPoint>> {
    let spec = model.config.dataset_spec();
    (0..model.config.batch)
        .map(|_| {
            let s = &data[rng.random_range(0..data.len())];
            let t: f64 = rng.random();
            let x0 = data::standard_normal(rng, model.config.latent_dim);
            let dropped = draw_dropout(model.config.dropout_p, rng)?;
            Ok(TrainingPoint {
                x0,
                x1: s.x1.clone(),
                t,
                condition: model.conditioned().then(|| spec.adapter_input(s)),
                dropped,
            })
        })
        .collect()
}

/// Adam training on the flow-matching objective.
pub fn train(mut model: ToyModel, data: &[SyntheticSample]) -> Result<TrainingRun> {
    if data.is_empty() {
        return Err(Error::validation("dataset", "must not be empty"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(model.seed ^ 0x7EA1_0000);
    let mut sets = model.param_sets();
    let mut opts: Vec<Adam> = sets.iter().map(|s| Adam::new(s, model.config.lr)).collect();
    let mut losses = Vec::with_capacity(model.config.steps);
    for step in 0..model.config.steps {
        let batch = draw_batch(&model, data, &mut rng)?;
        let (loss, grads) = model.loss_and_grads(&batch);
        if !loss.is_finite() {
            return Err(Error::Training(format!("loss {loss} at step {step}")));
        }
        losses.push(loss);
        for ((set, opt), g) in sets.iter_mut().zip(&mut opts).zip(&grads) {
            opt.update(set, g);
        }
        if sets.iter().any(|s| !s.all_finite()) {
            return Err(Error::Training(format!("non-finite parameters after step {step}")));
        }
        model.set_param_sets(&sets)?;
        if step % 500 == 0 {
            log::debug!("step {step}: loss {loss:.5}");
        }
    }
    Ok(TrainingRun { model, losses })
}

/// One evaluated grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct GridRow {
    pub class: usize,
    pub mass_kg: f64,
    pub v_pre: f64,
    pub v_post: f64,
    pub kinetic_energy: f64,
    pub delta_ke: f64,
    pub target_amplitude: f64,
    pub sampled_amplitude: f64,
}

/// Samples every point of the held-out grid from seeded noise.
pub fn evaluate_grid(model: &ToyModel, points_per_axis: usize) -> Result<Vec<GridRow>> {
    let spec = model.config.dataset_spec();
    let grid = spec.grid(points_per_axis);
    let mut rng = ChaCha8Rng::seed_from_u64(model.seed ^ 0xE7A1_5EED);
    grid.iter()
        .map(|s| {
            let x0 = data::standard_normal(&mut rng, model.config.latent_dim);
            let input = model.conditioned().then(|| spec.adapter_input(s));
            let x = model.sample(&x0, input.as_ref(), model.config.sampler_steps)?;
            Ok(GridRow {
                class: s.class,
                mass_kg: s.mass_kg,
                v_pre: s.v_pre,
                v_post: s.v_post,
                kinetic_energy: s.kinetic_energy(),
                delta_ke: 0.5 * s.mass_kg * (s.v_pre * s.v_pre - s.v_post * s.v_post).abs(),
                target_amplitude: s.amplitude,
                sampled_amplitude: x[0],
            })
        })
        .collect()
}

/// Batch loss as a function of `[backbone, adapter]` parameters.
pub struct BatchObjective<'a> {
    pub model: &'a ToyModel,
    pub batch: &'a [TrainingPoint],
}

impl BatchObjective<'_> {
    fn with(&self, params: &[ParamSet]) -> ToyModel {
        let mut m = self.model.clone();
        m.set_param_sets(params).expect("parameter shapes match the model");
        m
    }
}

impl crate::gradcheck::Objective for BatchObjective<'_> {
    fn value(&self, params: &[ParamSet]) -> f64 {
        let m = self.with(params);
        let (tape, loss, _) = m.loss_on_tape(self.batch);
        tape.value(loss)[0]
    }

    fn value_and_grad(&self, params: &[ParamSet]) -> (f64, Vec<Vec<Vec<f64>>>) {
        self.with(params).loss_and_grads(self.batch)
    }
}

/// Physics-responsiveness of sampled amplitudes over an evaluated grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToySummary {
    /// Spearman correlation of sampled amplitude with approach kinetic energy.
    pub energy_spearman: f64,
    pub classes: Vec<crate::apcc::ClassCorrelation>,
    /// Target amplitudes stand in for ground-truth onset strengths.
    pub apcc_delta: f64,
}

pub fn summarize(rows: &[GridRow], correlation: crate::apcc::Correlation) -> Result<ToySummary> {
    use crate::apcc::{apcc_delta, class_correlation, spearman, Aggregation, ClassCorrelation};
    let energy: Vec<f64> = rows.iter().map(|r| r.kinetic_energy).collect();
    let amp: Vec<f64> = rows.iter().map(|r| r.sampled_amplitude).collect();
    let mut classes = Vec::new();
    for (c, label) in CLASS_LABELS.iter().enumerate() {
        let of: Vec<&GridRow> = rows.iter().filter(|r| r.class == c).collect();
        if of.is_empty() {
            continue;
        }
        let gt: Vec<(f64, f64)> = of.iter().map(|r| (r.delta_ke, r.target_amplitude)).collect();
        let gen: Vec<(f64, f64)> = of.iter().map(|r| (r.delta_ke, r.sampled_amplitude)).collect();
        classes.push(ClassCorrelation::new(
            *label,
            class_correlation(&gt, correlation)?,
            class_correlation(&gen, correlation)?,
            of.len(),
        ));
    }
    Ok(ToySummary {
        energy_spearman: spearman(&energy, &amp)?,
        apcc_delta: apcc_delta(&classes, Aggregation::Mean)?,
        classes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolation_endpoints() {
        let x0 = [1.0, -2.0];
        let x1 = [3.0, 4.0];
        assert_eq!(interpolate(&x0, &x1, 0.0).unwrap(), x0);
        assert_eq!(interpolate(&x0, &x1, 1.0).unwrap(), x1);
        assert_eq!(interpolate(&[0.0], &[2.0], 0.5).unwrap(), vec![1.0]);
        assert!(interpolate(&x0, &x1, 1.5).is_err());
        assert!(interpolate(&x0, &x1, -0.1).is_err());
    }

    #[test]
    fn loss_cases() {
        let p = |x0: Vec<f64>, x1: Vec<f64>, t| CfmPoint { x0, x1, t };
        let batch = vec![p(vec![0.3, 1.0], vec![2.0, -1.0], 0.4)];
        let oracle = cfm_loss(&batch, |i, _, _| {
            batch[i].x1.iter().zip(&batch[i].x0).map(|(a, b)| a - b).collect()
        })
        .unwrap();
        assert_eq!(oracle, 0.0);
        let one = vec![p(vec![0.0], vec![1.0], 0.3)];
        assert_eq!(cfm_loss(&one, |_, _, _| vec![0.0]).unwrap(), 1.0);
        // two samples: (0 - 1)^2 = 1 and (0 - 3)^2 = 9, mean 5
        let two = vec![p(vec![0.0], vec![1.0], 0.2), p(vec![-1.0], vec![2.0], 0.9)];
        assert_eq!(cfm_loss(&two, |_, _, _| vec![0.0]).unwrap(), 5.0);
        assert!(cfm_loss(&[], |_, _, _: &[f64]| vec![]).is_err());
        assert!(matches!(cfm_loss(&one, |_, _, _| vec![f64::NAN]), Err(Error::Evaluation(_))));
    }

    #[test]
    fn euler_cases() {
        for n in [1, 3, 25] {
            assert_eq!(euler_integrate(&[0.0], n, |_, _| vec![1.0]).unwrap(), vec![1.0]);
        }
        assert_eq!(euler_integrate(&[0.7, -2.0], 10, |_, _| vec![0.0, 0.0]).unwrap(), vec![0.7, -2.0]);
        let e = euler_integrate(&[1.0], 200, |_, x| x.to_vec()).unwrap()[0];
        assert!((e - std::f64::consts::E).abs() / std::f64::consts::E < 0.02);
        assert!(euler_integrate(&[1.0], 0, |_, x| x.to_vec()).is_err());
        assert!(matches!(
            euler_integrate(&[1.0], 4, |_, _| vec![f64::INFINITY]),
            Err(Error::Sampling(_))
        ));
    }

    fn tiny_config() -> ToyConfig {
        ToyConfig {
            backbone_hidden: 8,
            adapter_hidden: 6,
            samples: 12,
            steps: 3,
            batch: 4,
            ..ToyConfig::default()
        }
    }

    #[test]
    fn zero_lr_leaves_parameters_unchanged() {
        let cfg = ToyConfig { lr: 0.0, steps: 1, ..tiny_config() };
        let (model, data) = init_model(&cfg, 3, true).unwrap();
        let before = model.param_sets();
        let run = train(model, &data).unwrap();
        assert_eq!(run.model.param_sets(), before);
        assert_eq!(run.losses.len(), 1);
    }

    #[test]
    fn training_is_deterministic() {
        let cfg = tiny_config();
        let (m1, d1) = init_model(&cfg, 9, true).unwrap();
        let (m2, d2) = init_model(&cfg, 9, true).unwrap();
        let a = train(m1, &d1).unwrap();
        let b = train(m2, &d2).unwrap();
        assert_eq!(a.losses, b.losses);
        assert_eq!(a.model, b.model);
    }

    #[test]
    fn model_file_round_trip() {
        let (model, _) = init_model(&tiny_config(), 4, true).unwrap();
        let file = model.to_file(vec![1.0, 0.5]);
        let json = serde_json::to_string(&file).unwrap();
        let back = ToyModel::from_file(&serde_json::from_str(&json).unwrap()).unwrap();
        assert_eq!(back, model);
    }
}
