//! Synthetic impact dataset: each sample is one object striking a surface.
//! The object approaches at a constant speed, rebounds with a class-specific
//! restitution coefficient, and the target latent's first coordinate is the
//! approach kinetic energy `½·m·v²` min-max scaled over the generator's range.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::adapter::{AdapterInput, NormStats, ObjectInput, PatchEmbedding};
use crate::trace::BinaryGrid;

pub const CLASS_LABELS: [&str; 3] = ["wood", "metal", "glass"];
const RESTITUTION: [f64; 3] = [0.3, 0.55, 0.8];

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSpec {
    pub latent_dim: usize,
    pub frames: usize,
    /// Frame at which the impact happens; speeds before it are `v_pre`.
    pub impact_frame: usize,
    pub patch_rows: usize,
    pub patch_cols: usize,
    pub patch_dim: usize,
    pub mass_range: (f64, f64),
    pub speed_range: (f64, f64),
    /// Std of per-sample noise added to the class texture.
    pub appearance_noise: f64,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        Self {
            latent_dim: 16,
            frames: 8,
            impact_frame: 4,
            patch_rows: 4,
            patch_cols: 4,
            patch_dim: 16,
            mass_range: (0.5, 2.0),
            speed_range: (1.0, 3.0),
            appearance_noise: 0.1,
        }
    }
}

impl DatasetSpec {
    pub fn energy_range(&self) -> (f64, f64) {
        (
            0.5 * self.mass_range.0 * self.speed_range.0 * self.speed_range.0,
            0.5 * self.mass_range.1 * self.speed_range.1 * self.speed_range.1,
        )
    }

    /// `½·m·v²` mapped linearly so the generator's range becomes `[0, 1]`.
    pub fn amplitude(&self, mass_kg: f64, speed: f64) -> f64 {
        let (lo, hi) = self.energy_range();
        (0.5 * mass_kg * speed * speed - lo) / (hi - lo)
    }

    pub fn restitution(&self, class: usize) -> f64 {
        RESTITUTION[class]
    }

    /// Fixed per-class pattern for the non-amplitude latent coordinates.
    fn template(&self, class: usize) -> Vec<f64> {
        (1..self.latent_dim)
            .map(|j| 0.5 * ((j * (class + 1)) as f64 * 0.7).sin())
            .collect()
    }

    pub fn make_sample(&self, class: usize, mass_kg: f64, speed: f64, appearance_seed: u64) -> SyntheticSample {
        let e = self.restitution(class);
        let v_post = e * speed;
        let velocities = (0..self.frames)
            .map(|l| if l < self.impact_frame { speed } else { v_post })
            .collect();
        let amplitude = self.amplitude(mass_kg, speed);
        let mut x1 = Vec::with_capacity(self.latent_dim);
        x1.push(amplitude);
        x1.extend(self.template(class));
        SyntheticSample {
            class,
            mass_kg,
            v_pre: speed,
            v_post,
            velocities,
            amplitude,
            x1,
            appearance_seed,
        }
    }

    /// Patch embeddings and a fixed 2×2 object mask for every frame. Each
    /// class has its own texture; samples add small appearance noise on top.
    pub fn adapter_input(&self, sample: &SyntheticSample) -> AdapterInput {
        let n = self.patch_rows * self.patch_cols * self.patch_dim;
        let texture = standard_normal(&mut ChaCha8Rng::seed_from_u64(0x7E47 + sample.class as u64), n);
        let mut rng = ChaCha8Rng::seed_from_u64(sample.appearance_seed);
        let patches = (0..self.frames)
            .map(|l| {
                let data: Vec<f64> = texture
                    .iter()
                    .map(|t| t + self.appearance_noise * rng.sample::<f64, _>(StandardNormal))
                    .collect();
                PatchEmbedding::new(l, self.patch_rows, self.patch_cols, self.patch_dim, data)
                    .expect("shape matches")
            })
            .collect();
        let mask = BinaryGrid::from_fn(self.patch_rows, self.patch_cols, |r, c| {
            (1..3).contains(&r) && (1..3).contains(&c)
        });
        AdapterInput {
            patches,
            objects: vec![ObjectInput {
                masks: vec![mask; self.frames],
                mass_kg: sample.mass_kg,
                velocities: sample.velocities.iter().map(|v| Some(*v)).collect(),
            }],
        }
    }

    pub fn generate(&self, count: usize, seed: u64) -> Vec<SyntheticSample> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|i| {
                let class = i % CLASS_LABELS.len();
                let m = rng.random_range(self.mass_range.0..=self.mass_range.1);
                let v = rng.random_range(self.speed_range.0..=self.speed_range.1);
                self.make_sample(class, m, v, seed.wrapping_mul(1_000_003).wrapping_add(i as u64))
            })
            .collect()
    }

    /// Held-out evaluation grid: every class × `n` masses × `n` speeds, on
    /// an inset lattice of the generator's range.
    pub fn grid(&self, n: usize) -> Vec<SyntheticSample> {
        let lattice = |(lo, hi): (f64, f64)| -> Vec<f64> {
            let pad = 0.05 * (hi - lo);
            (0..n)
                .map(|k| lo + pad + (hi - lo - 2.0 * pad) * k as f64 / (n.max(2) - 1) as f64)
                .collect()
        };
        let masses = lattice(self.mass_range);
        let speeds = lattice(self.speed_range);
        let mut out = Vec::new();
        for class in 0..CLASS_LABELS.len() {
            for &m in &masses {
                for &v in &speeds {
                    let seed = 0xE7A1_0000 + out.len() as u64;
                    out.push(self.make_sample(class, m, v, seed));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSample {
    pub class: usize,
    pub mass_kg: f64,
    pub v_pre: f64,
    pub v_post: f64,
    /// One speed per frame.
    pub velocities: Vec<f64>,
    pub amplitude: f64,
    /// Target latent; `x1[0] == amplitude`.
    pub x1: Vec<f64>,
    pub appearance_seed: u64,
}

impl SyntheticSample {
    pub fn kinetic_energy(&self) -> f64 {
        0.5 * self.mass_kg * self.v_pre * self.v_pre
    }
}

pub fn dataset_stats(samples: &[SyntheticSample]) -> NormStats {
    let masses: Vec<f64> = samples.iter().map(|s| s.mass_kg).collect();
    let speeds: Vec<f64> = samples.iter().flat_map(|s| s.velocities.iter().copied()).collect();
    NormStats::from_samples(&masses, &speeds).unwrap_or_default()
}

pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}
