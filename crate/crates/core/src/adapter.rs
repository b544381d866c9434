//! Physics adapter: turns per-object masks, patch embeddings, masses and
//! speeds into frame-aligned mass and velocity conditions, and folds those
//! conditions into AdaLN modulation parameters through zero-initialized,
//! gated residual mixers.
//!
//! Pipeline per object `i` and frame `l`:
//!
//! 1. `f = Σ M[h,w]·V[h,w,:]`, `h_i^l = LayerNorm(proj(f))`, or the
//!    object-occlusion token when the mask is empty.
//! 2. Mass and speed are normalized, expanded with Fourier features and
//!    embedded by separate MLPs. Frames without a speed use the
//!    velocity-occlusion token as their embedding.
//! 3. A FiLM head maps the (broadcast or flattened) embeddings to `(γ, β)`;
//!    `h' = (1 + ½tanh γ)⊙h + ½tanh β`.
//! 4. Objects are pooled per frame with sigmoid gates.
//! 5. `ω̃ = ω + α_m·g_m(c_mass) + α_v·g_v(c_vel)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Linear, Mlp};
use crate::params::{Init, ParamId, ParamSet};
use crate::tape::{Tape, Var};
use crate::trace::BinaryGrid;

/// Dataset statistics used to z-score mass (after `log1p`) and speed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormStats {
    pub mass_mean: f64,
    pub mass_std: f64,
    pub vel_mean: f64,
    pub vel_std: f64,
}

impl NormStats {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("mass_mean", self.mass_mean), ("vel_mean", self.vel_mean)] {
            if !v.is_finite() {
                return Err(Error::validation(format!("stats.{name}"), "must be finite"));
            }
        }
        for (name, v) in [("mass_std", self.mass_std), ("vel_std", self.vel_std)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::validation(format!("stats.{name}"), format!("must be > 0, got {v}")));
            }
        }
        Ok(())
    }

    /// Statistics estimated from raw masses and speeds.
    pub fn from_samples(masses: &[f64], speeds: &[f64]) -> Result<Self> {
        let logm: Vec<f64> = masses.iter().map(|m| m.ln_1p()).collect();
        let (mass_mean, mass_std) = mean_std(&logm);
        let (vel_mean, vel_std) = mean_std(speeds);
        let stats = Self {
            mass_mean,
            mass_std,
            vel_mean,
            vel_std,
        };
        stats.validate()?;
        Ok(stats)
    }
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

impl Default for NormStats {
    fn default() -> Self {
        Self {
            mass_mean: 0.0,
            mass_std: 1.0,
            vel_mean: 0.0,
            vel_std: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum FilmHead {
    /// One affine map over the flattened `L·D_h` embedding sequence.
    #[default]
    Flattened,
    /// One `D_h -> 2·D_h` map applied to every frame.
    TimeShared,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdapterConfig {
    pub patch_dim: usize,
    pub hidden_dim: usize,
    pub frames: usize,
    /// Number of Fourier frequencies `K`.
    pub fourier_count: usize,
    /// Frequencies are `fourier_base · 2^(k-1)` for `k = 1..K`.
    pub fourier_base: f64,
    /// Width of the AdaLN parameter vector the mixers write into.
    pub omega_dim: usize,
    pub film_head: FilmHead,
    pub stats: NormStats,
}

impl Default for AdapterConfig {
    fn default() -> Self {
        Self {
            patch_dim: 16,
            hidden_dim: 32,
            frames: 8,
            fourier_count: 8,
            fourier_base: 0.125,
            omega_dim: 64,
            film_head: FilmHead::Flattened,
            stats: NormStats::default(),
        }
    }
}

impl AdapterConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("patch_dim", self.patch_dim),
            ("hidden_dim", self.hidden_dim),
            ("frames", self.frames),
            ("fourier_count", self.fourier_count),
            ("omega_dim", self.omega_dim),
        ] {
            if v == 0 {
                return Err(Error::validation(format!("adapter.{name}"), "must be positive"));
            }
        }
        if !(self.fourier_base.is_finite() && self.fourier_base > 0.0) {
            return Err(Error::validation("adapter.fourier_base", "must be positive"));
        }
        self.stats.validate()
    }

    pub fn frequencies(&self) -> Vec<f64> {
        (0..self.fourier_count)
            .map(|k| self.fourier_base * 2f64.powi(k as i32))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Mass,
    Velocity,
}

#[derive(Debug, Clone, PartialEq)]
struct BranchLayout {
    embed: Mlp,
    film: Linear,
    gate: Mlp,
    mixer: Mlp,
    alpha: ParamId,
    empty_token: ParamId,
}

#[derive(Debug, Clone, PartialEq)]
struct Layout {
    proj: Linear,
    ln_gain: ParamId,
    ln_bias: ParamId,
    obj_occ: ParamId,
    vel_occ: ParamId,
    mass: BranchLayout,
    vel: BranchLayout,
}

impl Layout {
    fn branch(&self, b: Branch) -> &BranchLayout {
        match b {
            Branch::Mass => &self.mass,
            Branch::Velocity => &self.vel,
        }
    }
}

/// All adapter parameters plus the fixed configuration they were built for.
#[derive(Debug, Clone, PartialEq)]
pub struct AdapterState {
    config: AdapterConfig,
    params: ParamSet,
    layout: Layout,
}

fn build_layout<R: Rng + ?Sized>(cfg: &AdapterConfig, set: &mut ParamSet, rng: &mut R) -> Layout {
    let dh = cfg.hidden_dim;
    let proj = Linear::register(set, "proj", cfg.patch_dim, dh, rng);
    let ln_gain = set.add("layernorm.gain", dh, Init::Constant(1.0), rng);
    let ln_bias = set.add("layernorm.bias", dh, Init::Zeros, rng);
    let obj_occ = set.add("obj_occ_token", dh, Init::Normal(0.1), rng);
    let vel_occ = set.add("vel_occ_token", dh, Init::Normal(0.1), rng);
    let (film_in, film_out) = match cfg.film_head {
        FilmHead::Flattened => (cfg.frames * dh, 2 * cfg.frames * dh),
        FilmHead::TimeShared => (dh, 2 * dh),
    };
    let branch = |prefix: &str, set: &mut ParamSet, rng: &mut R| BranchLayout {
        embed: Mlp::register(set, &format!("{prefix}_mlp"), 2 * cfg.fourier_count, dh, dh, false, rng),
        film: Linear::register(set, &format!("{prefix}_film_head"), film_in, film_out, rng),
        gate: Mlp::register(set, &format!("{prefix}_gate_mlp"), dh, dh, 1, false, rng),
        mixer: Mlp::register(set, &format!("{prefix}_delta_mixer"), dh, dh, cfg.omega_dim, true, rng),
        alpha: set.add(&format!("alpha_{prefix}"), 1, Init::Constant(1.0), rng),
        empty_token: set.add(&format!("empty_{prefix}_token"), dh, Init::Normal(0.1), rng),
    };
    let mass = branch("mass", set, rng);
    let vel = branch("vel", set, rng);
    Layout {
        proj,
        ln_gain,
        ln_bias,
        obj_occ,
        vel_occ,
        mass,
        vel,
    }
}

/// Serialized form: the configuration plus a flat map of named arrays in
/// registration order (projection, layer norm, occlusion tokens, then the
/// mass branch and the velocity branch, each as embed MLP, FiLM head, gate
/// MLP, delta mixer, gate scalar, empty token).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdapterStateFile {
    pub config: AdapterConfig,
    pub params: ParamSet,
}

impl AdapterState {
    pub fn new(config: AdapterConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamSet::new();
        let layout = build_layout(&config, &mut params, &mut rng);
        Ok(Self { config, params, layout })
    }

    pub fn from_file(file: AdapterStateFile) -> Result<Self> {
        let mut state = Self::new(file.config, 0)?;
        state.params.load(&file.params)?;
        Ok(state)
    }

    pub fn to_file(&self) -> AdapterStateFile {
        AdapterStateFile {
            config: self.config.clone(),
            params: self.params.clone(),
        }
    }

    pub fn config(&self) -> &AdapterConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    pub fn frequencies(&self) -> Vec<f64> {
        self.config.frequencies()
    }

    /// Sets every weight and bias of a FiLM head to zero.
    pub fn zero_film_head(&mut self, branch: Branch) {
        let film = self.layout.branch(branch).film.clone();
        self.params.get_mut(film.weight).fill(0.0);
        self.params.get_mut(film.bias).fill(0.0);
    }

    /// Overwrites the final layer of a delta mixer with N(0, std²) values.
    pub fn randomize_mixer_output(&mut self, branch: Branch, std: f64, seed: u64) {
        use rand_distr::{Distribution, Normal};
        let last = self.layout.branch(branch).mixer.second.clone();
        let dist = Normal::new(0.0, std).expect("finite std");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for id in [last.weight, last.bias] {
            for v in self.params.get_mut(id) {
                *v = dist.sample(&mut rng);
            }
        }
    }

    pub fn set_alpha(&mut self, branch: Branch, value: f64) {
        let id = self.layout.branch(branch).alpha;
        self.params.get_mut(id)[0] = value;
    }

    /// `true` when both mixers' output layers are exactly zero.
    pub fn mixers_are_zero(&self) -> bool {
        [Branch::Mass, Branch::Velocity].iter().all(|b| {
            let last = &self.layout.branch(*b).mixer.second;
            self.params.get(last.weight).iter().all(|v| *v == 0.0)
                && self.params.get(last.bias).iter().all(|v| *v == 0.0)
        })
    }

    pub fn empty_condition(&self) -> PhysicsCondition {
        let frames = self.config.frames;
        PhysicsCondition {
            c_mass: vec![self.params.get(self.layout.mass.empty_token).to_vec(); frames],
            c_vel: vec![self.params.get(self.layout.vel.empty_token).to_vec(); frames],
            present: false,
        }
    }

    /// Full forward pass to per-frame conditions.
    pub fn condition(&self, input: &AdapterInput) -> Result<PhysicsCondition> {
        input.validate(&self.config)?;
        let mut tape = Tape::new();
        let vars = tape.bind(&self.params);
        let c = self.condition_on_tape(&mut tape, &vars, input, false);
        Ok(PhysicsCondition {
            c_mass: c.mass.iter().map(|v| tape.value(*v).to_vec()).collect(),
            c_vel: c.vel.iter().map(|v| tape.value(*v).to_vec()).collect(),
            present: c.present,
        })
    }
}

/// Patch embeddings for one frame, row-major `rows × cols × dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchEmbedding {
    pub frame: usize,
    pub rows: usize,
    pub cols: usize,
    pub dim: usize,
    pub data: Vec<f64>,
}

impl PatchEmbedding {
    pub fn new(frame: usize, rows: usize, cols: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols * dim {
            return Err(Error::validation(
                "patches",
                format!("{} values for {rows}x{cols}x{dim}", data.len()),
            ));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation("patches", "non-finite entry"));
        }
        Ok(Self { frame, rows, cols, dim, data })
    }

    pub fn patch(&self, row: usize, col: usize) -> &[f64] {
        let start = (row * self.cols + col) * self.dim;
        &self.data[start..start + self.dim]
    }

    /// Masked sum of patch vectors.
    pub fn masked_sum(&self, mask: &BinaryGrid) -> Result<Vec<f64>> {
        if mask.height() != self.rows || mask.width() != self.cols {
            return Err(Error::validation(
                "mask",
                format!(
                    "mask is {}x{}, patch grid is {}x{}",
                    mask.height(),
                    mask.width(),
                    self.rows,
                    self.cols
                ),
            ));
        }
        let mut f = vec![0.0; self.dim];
        for r in 0..self.rows {
            for c in 0..self.cols {
                if mask.get(r, c) {
                    for (a, b) in f.iter_mut().zip(self.patch(r, c)) {
                        *a += b;
                    }
                }
            }
        }
        Ok(f)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectInput {
    /// One mask per frame at patch resolution.
    pub masks: Vec<BinaryGrid>,
    pub mass_kg: f64,
    /// One speed per frame; `None` where undefined.
    pub velocities: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdapterInput {
    pub patches: Vec<PatchEmbedding>,
    pub objects: Vec<ObjectInput>,
}

impl AdapterInput {
    pub fn validate(&self, cfg: &AdapterConfig) -> Result<()> {
        if self.patches.len() != cfg.frames {
            return Err(Error::validation(
                "patches",
                format!("{} frames, adapter expects {}", self.patches.len(), cfg.frames),
            ));
        }
        let (rows, cols) = self
            .patches
            .first()
            .map(|p| (p.rows, p.cols))
            .unwrap_or((0, 0));
        for (l, p) in self.patches.iter().enumerate() {
            if p.dim != cfg.patch_dim {
                return Err(Error::validation(format!("patches[{l}]"), "patch dimension mismatch"));
            }
            if (p.rows, p.cols) != (rows, cols) {
                return Err(Error::validation(format!("patches[{l}]"), "patch grid changes across frames"));
            }
        }
        for (i, o) in self.objects.iter().enumerate() {
            if o.masks.len() != cfg.frames || o.velocities.len() != cfg.frames {
                return Err(Error::validation(
                    format!("objects[{i}]"),
                    format!("masks and velocities must have {} frames", cfg.frames),
                ));
            }
            if !(o.mass_kg.is_finite() && o.mass_kg >= 0.0) {
                return Err(Error::validation(format!("objects[{i}].mass_kg"), "must be finite and >= 0"));
            }
            if let Some(v) = o.velocities.iter().flatten().find(|v| !v.is_finite()) {
                return Err(Error::validation(format!("objects[{i}].velocities"), format!("non-finite speed {v}")));
            }
            for (l, m) in o.masks.iter().enumerate() {
                if (m.height(), m.width()) != (rows, cols) {
                    return Err(Error::validation(format!("objects[{i}].masks[{l}]"), "mask does not match patch grid"));
                }
            }
        }
        Ok(())
    }
}

/// Per-frame mass and velocity conditions (`L × D_h` each).
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicsCondition {
    pub c_mass: Vec<Vec<f64>>,
    pub c_vel: Vec<Vec<f64>>,
    pub present: bool,
}

/// Tape handles for a condition.
#[derive(Debug, Clone)]
pub struct ConditionVars {
    pub mass: Vec<Var>,
    pub vel: Vec<Var>,
    pub present: bool,
}

pub fn normalize_mass(mass_kg: f64, stats: &NormStats) -> Result<f64> {
    if !(stats.mass_std.is_finite() && stats.mass_std > 0.0) {
        return Err(Error::validation("stats.mass_std", "must be > 0"));
    }
    if !(mass_kg.is_finite() && mass_kg >= 0.0) {
        return Err(Error::validation("mass_kg", format!("must be finite and >= 0, got {mass_kg}")));
    }
    Ok((mass_kg.ln_1p() - stats.mass_mean) / stats.mass_std)
}

pub fn normalize_velocity(speed: f64, stats: &NormStats) -> Result<f64> {
    if !(stats.vel_std.is_finite() && stats.vel_std > 0.0) {
        return Err(Error::validation("stats.vel_std", "must be > 0"));
    }
    Ok((speed - stats.vel_mean) / stats.vel_std)
}

/// `[sin(2πω_k s), cos(2πω_k s)]` interleaved per frequency.
pub fn fourier_features(s: f64, freqs: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * freqs.len());
    for w in freqs {
        let (sin, cos) = (std::f64::consts::TAU * w * s).sin_cos();
        out.push(sin);
        out.push(cos);
    }
    out
}

/// `(1 + ½tanh γ)⊙h + ½tanh β`
pub fn film_modulate(h: &[f64], gamma: &[f64], beta: &[f64]) -> Result<Vec<f64>> {
    if gamma.len() != h.len() || beta.len() != h.len() {
        return Err(Error::validation(
            "film",
            format!("h has {} entries, gamma {}, beta {}", h.len(), gamma.len(), beta.len()),
        ));
    }
    Ok(h.iter()
        .zip(gamma)
        .zip(beta)
        .map(|((h, g), b)| (1.0 + 0.5 * g.tanh()) * h + 0.5 * b.tanh())
        .collect())
}

fn film_on_tape(tape: &mut Tape, h: Var, gamma: Var, beta: Var) -> Var {
    let tg = tape.tanh(gamma);
    let half = tape.scale_const(tg, 0.5);
    let factor = tape.add_const(half, 1.0);
    let scaled = tape.mul(factor, h);
    let tb = tape.tanh(beta);
    let shift = tape.scale_const(tb, 0.5);
    tape.add(scaled, shift)
}

impl AdapterState {
    fn film_coefficients(&self, tape: &mut Tape, vars: &[Var], branch: Branch, embeds: &[Var]) -> (Vec<Var>, Vec<Var>) {
        let dh = self.config.hidden_dim;
        let head = &self.layout.branch(branch).film;
        match self.config.film_head {
            FilmHead::Flattened => {
                let flat = tape.concat(embeds);
                let coeffs = head.forward(tape, vars, flat);
                let n = embeds.len() * dh;
                let gammas = (0..embeds.len()).map(|l| tape.slice(coeffs, l * dh, dh)).collect();
                let betas = (0..embeds.len()).map(|l| tape.slice(coeffs, n + l * dh, dh)).collect();
                (gammas, betas)
            }
            FilmHead::TimeShared => {
                let mut gammas = Vec::with_capacity(embeds.len());
                let mut betas = Vec::with_capacity(embeds.len());
                for e in embeds {
                    let coeffs = head.forward(tape, vars, *e);
                    gammas.push(tape.slice(coeffs, 0, dh));
                    betas.push(tape.slice(coeffs, dh, dh));
                }
                (gammas, betas)
            }
        }
    }

    fn object_feature_on_tape(&self, tape: &mut Tape, vars: &[Var], patches: &PatchEmbedding, mask: &BinaryGrid) -> Var {
        if mask.is_empty_mask() {
            return vars[self.layout.obj_occ.0];
        }
        let f = patches.masked_sum(mask).expect("validated input");
        let f = tape.leaf(f);
        let p = self.layout.proj.forward(tape, vars, f);
        tape.layer_norm(p, vars[self.layout.ln_gain.0], vars[self.layout.ln_bias.0])
    }

    fn embed_scalar(&self, tape: &mut Tape, vars: &[Var], branch: Branch, normalized: f64) -> Var {
        let ff = tape.leaf(fourier_features(normalized, &self.frequencies()));
        self.layout.branch(branch).embed.forward(tape, vars, ff)
    }

    /// Returns `(h_mass, h_vel)` per frame for one object.
    fn modulate_on_tape(
        &self,
        tape: &mut Tape,
        vars: &[Var],
        h: &[Var],
        mass_kg: f64,
        velocities: &[Option<f64>],
    ) -> (Vec<Var>, Vec<Var>) {
        let stats = &self.config.stats;
        let zm = normalize_mass(mass_kg, stats).expect("validated input");
        let e_mass = self.embed_scalar(tape, vars, Branch::Mass, zm);
        let mass_embeds = vec![e_mass; h.len()];
        let vel_embeds: Vec<Var> = velocities
            .iter()
            .map(|v| match v {
                Some(v) => {
                    let zv = normalize_velocity(*v, stats).expect("validated stats");
                    self.embed_scalar(tape, vars, Branch::Velocity, zv)
                }
                None => vars[self.layout.vel_occ.0],
            })
            .collect();
        let (gm, bm) = self.film_coefficients(tape, vars, Branch::Mass, &mass_embeds);
        let (gv, bv) = self.film_coefficients(tape, vars, Branch::Velocity, &vel_embeds);
        let h_mass = (0..h.len()).map(|l| film_on_tape(tape, h[l], gm[l], bm[l])).collect();
        let h_vel = (0..h.len()).map(|l| film_on_tape(tape, h[l], gv[l], bv[l])).collect();
        (h_mass, h_vel)
    }

    /// Gated pooling across objects for every frame. `features[i][l]`.
    fn pool_on_tape(&self, tape: &mut Tape, vars: &[Var], branch: Branch, features: &[Vec<Var>]) -> Vec<Var> {
        let frames = features[0].len();
        let gate = &self.layout.branch(branch).gate;
        (0..frames)
            .map(|l| {
                let gates: Vec<Var> = features
                    .iter()
                    .map(|f| {
                        let logit = gate.forward(tape, vars, f[l]);
                        tape.sigmoid(logit)
                    })
                    .collect();
                let total = tape.sum(&gates);
                let weighted: Vec<Var> = gates
                    .iter()
                    .zip(features)
                    .map(|(g, f)| {
                        let w = tape.div(*g, total);
                        tape.scale_by(w, f[l])
                    })
                    .collect();
                tape.sum(&weighted)
            })
            .collect()
    }

    /// Forward to per-frame conditions on an existing tape. With `dropped`
    /// set, both conditions are the learnable empty tokens.
    pub fn condition_on_tape(&self, tape: &mut Tape, vars: &[Var], input: &AdapterInput, dropped: bool) -> ConditionVars {
        let frames = self.config.frames;
        if dropped || input.objects.is_empty() {
            return ConditionVars {
                mass: vec![vars[self.layout.mass.empty_token.0]; frames],
                vel: vec![vars[self.layout.vel.empty_token.0]; frames],
                present: false,
            };
        }
        let mut mass_feats = Vec::with_capacity(input.objects.len());
        let mut vel_feats = Vec::with_capacity(input.objects.len());
        for obj in &input.objects {
            let h: Vec<Var> = input
                .patches
                .iter()
                .zip(&obj.masks)
                .map(|(p, m)| self.object_feature_on_tape(tape, vars, p, m))
                .collect();
            let (hm, hv) = self.modulate_on_tape(tape, vars, &h, obj.mass_kg, &obj.velocities);
            mass_feats.push(hm);
            vel_feats.push(hv);
        }
        ConditionVars {
            mass: self.pool_on_tape(tape, vars, Branch::Mass, &mass_feats),
            vel: self.pool_on_tape(tape, vars, Branch::Velocity, &vel_feats),
            present: true,
        }
    }

    /// `ω + α_m·g_m(c_mass) + α_v·g_v(c_vel)` on a tape.
    pub fn delta_on_tape(&self, tape: &mut Tape, vars: &[Var], omega: Var, c_mass: Var, c_vel: Var) -> Var {
        let gm = self.layout.mass.mixer.forward(tape, vars, c_mass);
        let gm = tape.scale_by(vars[self.layout.mass.alpha.0], gm);
        let gv = self.layout.vel.mixer.forward(tape, vars, c_vel);
        let gv = tape.scale_by(vars[self.layout.vel.alpha.0], gv);
        let partial = tape.add(omega, gm);
        tape.add(partial, gv)
    }

    fn check_hidden(&self, v: &[f64], what: &str) -> Result<()> {
        if v.len() != self.config.hidden_dim {
            return Err(Error::validation(
                what,
                format!("expected {} entries, got {}", self.config.hidden_dim, v.len()),
            ));
        }
        Ok(())
    }
}

/// Object feature for one frame: masked patch sum, projection and LayerNorm,
/// or the object-occlusion token for an empty mask.
pub fn object_feature(patches: &PatchEmbedding, mask: &BinaryGrid, state: &AdapterState) -> Result<Vec<f64>> {
    if patches.dim != state.config.patch_dim {
        return Err(Error::validation("patches", "patch dimension mismatch"));
    }
    // dimension check even for empty masks
    patches.masked_sum(mask)?;
    let mut tape = Tape::new();
    let vars = tape.bind(&state.params);
    let h = state.object_feature_on_tape(&mut tape, &vars, patches, mask);
    Ok(tape.value(h).to_vec())
}

/// Per-frame feature rows, `L × D_h`.
pub type Features = Vec<Vec<f64>>;

/// Mass- and velocity-modulated features for one object (`L × D_h` each).
pub fn modulate_object(
    h: &[Vec<f64>],
    mass_kg: f64,
    velocities: &[Option<f64>],
    state: &AdapterState,
) -> Result<(Features, Features)> {
    let frames = state.config.frames;
    if h.len() != frames || velocities.len() != frames {
        return Err(Error::validation(
            "modulate_object",
            format!("expected {frames} frames, got {} features and {} speeds", h.len(), velocities.len()),
        ));
    }
    for row in h {
        state.check_hidden(row, "h")?;
    }
    normalize_mass(mass_kg, &state.config.stats)?;
    if velocities.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::validation("velocities", "non-finite speed"));
    }
    let mut tape = Tape::new();
    let vars = tape.bind(&state.params);
    let hv: Vec<Var> = h.iter().map(|r| tape.leaf(r.clone())).collect();
    let (m, v) = state.modulate_on_tape(&mut tape, &vars, &hv, mass_kg, velocities);
    let read = |xs: &[Var]| xs.iter().map(|x| tape.value(*x).to_vec()).collect();
    Ok((read(&m), read(&v)))
}

/// Sigmoid-gated average over objects, per frame. `features[i][l]` is the
/// feature of object `i` at frame `l`. No objects yields the branch's empty
/// token on every frame.
pub fn gated_pool(features: &[Vec<Vec<f64>>], branch: Branch, state: &AdapterState) -> Result<Vec<Vec<f64>>> {
    if features.is_empty() {
        let c = state.empty_condition();
        return Ok(match branch {
            Branch::Mass => c.c_mass,
            Branch::Velocity => c.c_vel,
        });
    }
    let frames = features[0].len();
    for f in features {
        if f.len() != frames {
            return Err(Error::validation("features", "objects disagree on frame count"));
        }
        for row in f {
            state.check_hidden(row, "features")?;
        }
    }
    let mut tape = Tape::new();
    let vars = tape.bind(&state.params);
    let fv: Vec<Vec<Var>> = features
        .iter()
        .map(|f| f.iter().map(|r| tape.leaf(r.clone())).collect())
        .collect();
    let pooled = state.pool_on_tape(&mut tape, &vars, branch, &fv);
    Ok(pooled.iter().map(|v| tape.value(*v).to_vec()).collect())
}

/// Physics-refined AdaLN parameters `ω + α_m·g_m(c_mass) + α_v·g_v(c_vel)`.
pub fn delta_modulation(omega: &[f64], c_mass: &[f64], c_vel: &[f64], state: &AdapterState) -> Result<Vec<f64>> {
    if omega.len() != state.config.omega_dim {
        return Err(Error::validation(
            "omega",
            format!("mixers produce {} entries, omega has {}", state.config.omega_dim, omega.len()),
        ));
    }
    state.check_hidden(c_mass, "c_mass")?;
    state.check_hidden(c_vel, "c_vel")?;
    let mut tape = Tape::new();
    let vars = tape.bind(&state.params);
    let o = tape.leaf(omega.to_vec());
    let m = tape.leaf(c_mass.to_vec());
    let v = tape.leaf(c_vel.to_vec());
    let out = state.delta_on_tape(&mut tape, &vars, o, m, v);
    Ok(tape.value(out).to_vec())
}

/// One Bernoulli draw per sample.
pub fn draw_dropout<R: Rng + ?Sized>(p: f64, rng: &mut R) -> Result<bool> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::validation("dropout_p", format!("must be in [0, 1], got {p}")));
    }
    Ok(rng.random::<f64>() < p)
}

/// With probability `p`, replaces both conditions by the empty tokens.
pub fn physics_dropout<R: Rng + ?Sized>(
    cond: PhysicsCondition,
    p: f64,
    rng: &mut R,
    state: &AdapterState,
) -> Result<PhysicsCondition> {
    if draw_dropout(p, rng)? {
        Ok(state.empty_condition())
    } else {
        Ok(cond)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_state(head: FilmHead) -> AdapterState {
        let cfg = AdapterConfig {
            patch_dim: 4,
            hidden_dim: 3,
            frames: 2,
            fourier_count: 2,
            fourier_base: 1.0,
            omega_dim: 2,
            film_head: head,
            stats: NormStats::default(),
        };
        AdapterState::new(cfg, 7).unwrap()
    }

    #[test]
    fn mass_normalization() {
        let s = NormStats::default();
        assert_eq!(normalize_mass(0.0, &s).unwrap(), 0.0);
        let e1 = std::f64::consts::E - 1.0;
        assert!((normalize_mass(e1, &s).unwrap() - 1.0).abs() < 1e-15);
        let s2 = NormStats {
            mass_mean: 1.0,
            mass_std: 2.0,
            ..s
        };
        // (ln 11 - 1) / 2, ln 11 = 2.397895272798370544...
        assert!((normalize_mass(10.0, &s2).unwrap() - 0.698_947_636_399_185_3).abs() < 1e-15);
        assert!(normalize_mass(-1.0, &s).is_err());
        let bad = NormStats { mass_std: 0.0, ..s };
        assert!(normalize_mass(1.0, &bad).is_err());
    }

    #[test]
    fn velocity_normalization() {
        let s = NormStats {
            vel_mean: 1.0,
            vel_std: 0.5,
            ..NormStats::default()
        };
        assert_eq!(normalize_velocity(1.0, &s).unwrap(), 0.0);
        assert_eq!(normalize_velocity(1.5, &s).unwrap(), 1.0);
        assert_eq!(normalize_velocity(3.0, &s).unwrap(), 4.0);
        let bad = NormStats { vel_std: -1.0, ..s };
        assert!(normalize_velocity(1.0, &bad).is_err());
    }

    #[test]
    fn fourier_cases() {
        let freqs = AdapterConfig::default().frequencies();
        assert_eq!(freqs.len(), 8);
        assert_eq!(fourier_features(0.0, &freqs), [0.0, 1.0].repeat(8));
        let f = fourier_features(0.25, &[1.0]);
        assert!((f[0] - 1.0).abs() < 1e-15 && f[1].abs() < 1e-15);
    }

    #[test]
    fn film_cases() {
        assert_eq!(film_modulate(&[1.5, -2.0], &[0.0, 0.0], &[0.0, 0.0]).unwrap(), vec![1.5, -2.0]);
        let y = film_modulate(&[1.0], &[50.0], &[0.0]).unwrap();
        assert!((y[0] - 1.5).abs() < 1e-12);
        let y = film_modulate(&[2.0], &[0.0], &[50.0]).unwrap();
        assert!((y[0] - 2.5).abs() < 1e-12);
        assert!(film_modulate(&[1.0, 2.0], &[0.0], &[0.0, 0.0]).is_err());
    }

    #[test]
    fn empty_mask_returns_occlusion_token_verbatim() {
        let st = small_state(FilmHead::Flattened);
        let patches = PatchEmbedding::new(0, 2, 2, 4, (0..16).map(|v| v as f64).collect()).unwrap();
        let h = object_feature(&patches, &BinaryGrid::filled(2, 2, false), &st).unwrap();
        assert_eq!(h, st.params.get(st.layout.obj_occ));
        assert!(object_feature(&patches, &BinaryGrid::filled(3, 2, true), &st).is_err());
    }

    #[test]
    fn zero_heads_leave_features_unchanged() {
        let mut st = small_state(FilmHead::Flattened);
        st.zero_film_head(Branch::Mass);
        st.zero_film_head(Branch::Velocity);
        let h = vec![vec![0.3, -1.0, 2.0], vec![1.0, 0.5, -0.25]];
        let (hm, hv) = modulate_object(&h, 2.0, &[Some(1.0), None], &st).unwrap();
        assert_eq!(hm, h);
        assert_eq!(hv, h);
    }

    #[test]
    fn time_shared_rows_match_for_identical_frames() {
        let st = small_state(FilmHead::TimeShared);
        let row = vec![0.3, -1.0, 2.0];
        let (hm, hv) = modulate_object(&[row.clone(), row], 1.0, &[Some(2.0), Some(2.0)], &st).unwrap();
        assert_eq!(hm[0], hm[1]);
        assert_eq!(hv[0], hv[1]);
    }

    #[test]
    fn pooling_single_and_symmetric() {
        let st = small_state(FilmHead::Flattened);
        let a = vec![vec![0.1, 0.2, 0.3], vec![-1.0, 4.0, 2.5]];
        assert_eq!(gated_pool(std::slice::from_ref(&a), Branch::Mass, &st).unwrap(), a);
        let pooled = gated_pool(&[a.clone(), a.clone()], Branch::Velocity, &st).unwrap();
        assert_eq!(pooled, a);
        let empty = gated_pool(&[], Branch::Mass, &st).unwrap();
        assert_eq!(empty, st.empty_condition().c_mass);
    }

    #[test]
    fn zero_initialized_mixers_are_transparent() {
        let st = small_state(FilmHead::Flattened);
        assert!(st.mixers_are_zero());
        let omega = [0.7, -3.0];
        assert_eq!(delta_modulation(&omega, &[1.0, 2.0, 3.0], &[-1.0, 0.0, 9.0], &st).unwrap(), omega);
        assert!(delta_modulation(&[1.0], &[0.0; 3], &[0.0; 3], &st).is_err());
    }

    #[test]
    fn dropout_edges() {
        let st = small_state(FilmHead::Flattened);
        let cond = PhysicsCondition {
            c_mass: vec![vec![1.0; 3]; 2],
            c_vel: vec![vec![2.0; 3]; 2],
            present: true,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            assert_eq!(physics_dropout(cond.clone(), 0.0, &mut rng, &st).unwrap(), cond);
            assert_eq!(physics_dropout(cond.clone(), 1.0, &mut rng, &st).unwrap(), st.empty_condition());
        }
        assert!(physics_dropout(cond.clone(), 1.5, &mut rng, &st).is_err());
        assert!(physics_dropout(cond, -0.1, &mut rng, &st).is_err());
    }

    #[test]
    fn state_file_round_trip() {
        let st = small_state(FilmHead::TimeShared);
        let json = serde_json::to_string(&st.to_file()).unwrap();
        let back = AdapterState::from_file(serde_json::from_str(&json).unwrap()).unwrap();
        assert_eq!(back, st);
    }
}
