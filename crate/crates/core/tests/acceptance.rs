//! One line per acceptance criterion, then a single assertion over all of
//! them. Lines go straight to the stderr handle so they show without
//! `--nocapture`.

mod common;

use std::io::Write;
use std::time::{Duration, Instant};

use common::*;
use physfoley::adapter::{film_modulate, physics_dropout, AdapterConfig, AdapterState, FilmHead};
use physfoley::apcc::{
    apcc_delta, class_correlation, onset_curve, onset_envelope, pearson, stft_magnitude, Aggregation, AudioClip,
    ClassCorrelation, Correlation, OnsetParams, ANALYSIS_RATE,
};
use physfoley::cfm::{evaluate_grid, init_model, summarize, train, ToyConfig};
use physfoley::check::{gradient, reduced_config, transparency, GRADCHECK_TOLERANCE};
use physfoley::synth::{apply_isometry, rotation_from_euler};
use physfoley::velocity::{estimate_tracks, CentroidMode};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn velocity_oracle() -> Outcome {
    let start = Instant::now();
    let mut max_rel: f64 = 0.0;
    let mut max_iso: f64 = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for (fps, delta) in TRAJECTORIES {
        let trace = rigid_trace(fps, delta);
        let base = estimate_tracks(&trace, CentroidMode::Mean).unwrap();
        let expected = norm(delta) * fps;
        for v in &base[0].velocities {
            max_rel = max_rel.max((v.unwrap() - expected).abs() / expected);
        }
        for _ in 0..20 {
            let r = rotation_from_euler(rng.random_range(-3.0..3.0), rng.random_range(-1.5..1.5), rng.random_range(-3.0..3.0));
            let t = [rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)];
            let moved = estimate_tracks(&apply_isometry(&trace, r, t).unwrap(), CentroidMode::Mean).unwrap();
            for (a, b) in base[0].velocities.iter().zip(&moved[0].velocities) {
                max_iso = max_iso.max((a.unwrap() - b.unwrap()).abs());
            }
        }
    }
    let elapsed = start.elapsed();
    outcome(
        max_rel < 1e-6 && max_iso < 1e-9 && elapsed < Duration::from_secs(5),
        format!(
            "{} trajectories, max rel err {max_rel:.2e}, max isometry diff {max_iso:.2e}, {:.2?}",
            TRAJECTORIES.len(),
            elapsed
        ),
    )
}

fn zero_init_transparency() -> Outcome {
    let mut mismatches = 0;
    let mut trials = 0;
    for head in [FilmHead::Flattened, FilmHead::TimeShared] {
        let cfg = ToyConfig { film_head: head, ..ToyConfig::default() };
        let r = transparency(&cfg, 0, 100).unwrap();
        mismatches += r.mismatches;
        trials += r.trials;
    }
    outcome(mismatches == 0, format!("{trials} random inputs, {mismatches} differing outputs"))
}

fn film_identity_and_bounds() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let h: Vec<f64> = (0..1000).map(|_| rng.random_range(-100.0..100.0)).collect();
    let zeros = vec![0.0; h.len()];
    let identity = film_modulate(&h, &zeros, &zeros).unwrap() == h;
    let mut worst = (0.0f64, 0.0f64);
    let mut inside = true;
    for _ in 0..100_000 {
        let g: f64 = rng.random_range(-50.0..50.0);
        let b: f64 = rng.random_range(-50.0..50.0);
        let factor = film_modulate(&[1.0], &[g], &[0.0]).unwrap()[0];
        let shift = film_modulate(&[0.0], &[g], &[b]).unwrap()[0];
        inside &= (0.5..=1.5).contains(&factor) && (-0.5..=0.5).contains(&shift);
        worst = (worst.0.max((factor - 1.0).abs()), worst.1.max(shift.abs()));
    }
    let saturated = (film_modulate(&[1.0], &[50.0], &[0.0]).unwrap()[0] - 1.5).abs() < 1e-12;
    outcome(
        identity && inside && saturated,
        format!(
            "identity exact: {identity}; 1e5 draws, max |factor-1| {:.6}, max |shift| {:.6}",
            worst.0, worst.1
        ),
    )
}

fn gradient_verification() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for seed in 0..3 {
        for (cfg, limit) in [(reduced_config(), None), (ToyConfig::default(), Some(3))] {
            let r = gradient(&cfg, seed, limit).unwrap();
            worst = worst.max(r.max_rel_error);
            checked += r.checked;
        }
    }
    let reduced_shared = ToyConfig { film_head: FilmHead::TimeShared, ..reduced_config() };
    let r = gradient(&reduced_shared, 0, None).unwrap();
    worst = worst.max(r.max_rel_error);
    checked += r.checked;
    let elapsed = start.elapsed();
    outcome(
        worst < GRADCHECK_TOLERANCE && elapsed < Duration::from_secs(60),
        format!("3 seeds, {checked} entries, max rel err {worst:.2e}, {elapsed:.2?}"),
    )
}

fn apcc_exactness() -> Outcome {
    let ke = [0.2, 0.9, 1.7, 3.1, 4.4, 7.5];
    let up: Vec<(f64, f64)> = ke.iter().map(|k| (*k, 2.0 * k + 1.0)).collect();
    let down: Vec<(f64, f64)> = ke.iter().map(|k| (*k, -3.0 * k + 2.0)).collect();
    let r_up = class_correlation(&up, Correlation::Pearson).unwrap();
    let r_down = class_correlation(&down, Correlation::Pearson).unwrap();
    let (x, y) = ([1.0, 2.0, 3.0, 4.0, 5.0], [2.0, 4.0, 5.0, 4.0, 5.0]);
    let hand = pearson(&x, &y).unwrap();
    let hand_ok = (hand - 0.774_596_669_241_483_4).abs() < 1e-9 && (hand - pearson_oracle(&x, &y)).abs() < 1e-9;
    let matched = [ClassCorrelation::new("a", 0.4, 0.4, 5), ClassCorrelation::new("b", -0.2, -0.2, 4)];
    let d0 = apcc_delta(&matched, Aggregation::Mean).unwrap();
    let d1 = apcc_delta(&[ClassCorrelation::new("a", 1.0, 0.5, 3)], Aggregation::Mean).unwrap();
    outcome(
        (r_up - 1.0).abs() < 1e-9 && (r_down + 1.0).abs() < 1e-9 && hand_ok && d0 == 0.0 && d1 == 0.5,
        format!("affine {r_up:.12}, anti-affine {r_down:.12}, 5-point {hand:.12}, deltas {d0} / {d1}"),
    )
}

fn onset_localization() -> Outcome {
    let params = OnsetParams::default();
    let len = 2 * ANALYSIS_RATE as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0i64;
    for _ in 0..100 {
        let at = rng.random_range(params.window..len - params.window);
        let clip = AudioClip::new(click(len, at, rng.random_range(0.1..1.0)), ANALYSIS_RATE).unwrap();
        let env = onset_curve(&clip, &params).unwrap();
        let peak = env
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, v)| if *v > bv { (i, *v) } else { (bi, bv) })
            .0 as i64;
        worst = worst.max((peak - (at / params.hop) as i64).abs());
    }
    let sr = ANALYSIS_RATE as f64;
    let mut steady: f64 = 0.0;
    let silence = onset_envelope(&stft_magnitude(&vec![0.0; len], params.window, params.hop).unwrap());
    steady = silence.iter().skip(1).fold(steady, |m, v| m.max(*v));
    for k in [8, 64, 257, 900] {
        let f = k as f64 * sr / params.window as f64;
        let env = onset_envelope(&stft_magnitude(&tone(len, f, sr, 0.7), params.window, params.hop).unwrap());
        steady = env.iter().skip(1).fold(steady, |m, v| m.max(*v));
    }
    outcome(
        worst <= 1 && steady < 1e-6,
        format!("100 clicks, worst offset {worst} frames; silence/tone max envelope {steady:.2e}"),
    )
}

fn toy_reproduction() -> Outcome {
    let start = Instant::now();
    let cfg = ToyConfig::default();
    let mut wins = 0;
    let mut min_spearman = f64::INFINITY;
    let mut per_seed = Vec::new();
    for seed in 0..5 {
        let mut summary = Vec::new();
        for conditioned in [true, false] {
            let (model, data) = init_model(&cfg, seed, conditioned).unwrap();
            let run = train(model, &data).unwrap();
            let rows = evaluate_grid(&run.model, 6).unwrap();
            summary.push(summarize(&rows, Correlation::Pearson).unwrap());
        }
        let (c, u) = (&summary[0], &summary[1]);
        if c.apcc_delta < u.apcc_delta {
            wins += 1;
        }
        min_spearman = min_spearman.min(c.energy_spearman);
        per_seed.push(format!("{:.3}/{:.3}", c.apcc_delta, u.apcc_delta));
    }
    let elapsed = start.elapsed();
    outcome(
        wins >= 4 && min_spearman > 0.8 && elapsed < Duration::from_secs(300),
        format!(
            "conditioned lower in {wins}/5 seeds (APCC-delta cond/uncond {}), min conditioned Spearman {min_spearman:.3}, {elapsed:.2?}",
            per_seed.join(" ")
        ),
    )
}

fn determinism() -> Outcome {
    let results = determinism_battery();
    let failed: Vec<String> = results
        .iter()
        .filter_map(|(sub, r)| r.as_ref().err().map(|e| format!("{sub}: {e}")))
        .collect();
    let files: usize = results.iter().filter_map(|(_, r)| r.as_ref().ok()).sum();
    outcome(
        failed.is_empty() && files > 0,
        if failed.is_empty() {
            format!("{} subcommands, {files} output files byte-identical across repeat runs", results.len())
        } else {
            failed.join("; ")
        },
    )
}

fn dropout_rate() -> Outcome {
    let state = AdapterState::new(AdapterConfig::default(), 0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut cond = state.empty_condition();
    cond.present = true;
    let dropped = (0..10_000)
        .filter(|_| !physics_dropout(cond.clone(), 0.1, &mut rng, &state).unwrap().present)
        .count();
    let rate = dropped as f64 / 10_000.0;
    outcome((0.08..=0.12).contains(&rate), format!("10000 draws at p = 0.1, rate {rate:.4}"))
}

#[test]
fn acceptance_criteria() {
    let criteria: [Criterion; 9] = [
        ("velocity oracle", velocity_oracle),
        ("zero-init transparency", zero_init_transparency),
        ("FiLM identity and bounds", film_identity_and_bounds),
        ("gradient verification", gradient_verification),
        ("APCC exactness", apcc_exactness),
        ("onset localization", onset_localization),
        ("toy directional reproduction", toy_reproduction),
        ("CLI determinism", determinism),
        ("physics dropout rate", dropout_rate),
    ];
    let mut failed = Vec::new();
    let mut err = std::io::stderr();
    for (i, (name, f)) in criteria.iter().enumerate() {
        let o = f();
        let tag = if o.passed { "PASS" } else { "FAIL" };
        writeln!(err, "criterion {}: {tag} {name}: {}", i + 1, o.detail).unwrap();
        if !o.passed {
            failed.push(i + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
