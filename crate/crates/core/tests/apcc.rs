mod common;

use common::*;
use physfoley::apcc::{
    apcc_delta, class_correlation, encode_wav, evaluate, kinetic_energy_change, onset_curve, onset_envelope, pearson,
    stft_magnitude, Aggregation, ApccOptions, AudioClip, ClassCorrelation, Correlation, ImpactAnnotation, OnsetParams,
    WavDir, ANALYSIS_RATE,
};
use physfoley::cfm::{DatasetSpec, CLASS_LABELS};
use physfoley::velocity::TracksDocument;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn argmax(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, x)| if *x > bv { (i, *x) } else { (bi, bv) })
        .0
}

#[test]
fn five_point_pearson_matches_textbook() {
    let x = [1.0, 2.0, 3.0, 4.0, 5.0];
    let y = [2.0, 4.0, 5.0, 4.0, 5.0];
    let r = pearson(&x, &y).unwrap();
    // 6 / sqrt(10 · 6)
    assert!((r - 0.774_596_669_241_483_4).abs() < 1e-9);
    assert!((r - pearson_oracle(&x, &y)).abs() < 1e-9);
}

#[test]
fn affine_and_anti_affine_relations() {
    let ke = [0.1, 0.7, 1.3, 2.2, 5.0, 8.5];
    let up: Vec<(f64, f64)> = ke.iter().map(|k| (*k, 2.0 * k + 1.0)).collect();
    let down: Vec<(f64, f64)> = ke.iter().map(|k| (*k, -k)).collect();
    assert!((class_correlation(&up, Correlation::Pearson).unwrap() - 1.0).abs() < 1e-9);
    assert!((class_correlation(&down, Correlation::Pearson).unwrap() + 1.0).abs() < 1e-9);
}

#[test]
fn toy_ground_truth_is_perfectly_correlated() {
    let spec = DatasetSpec::default();
    let samples = spec.generate(256, 4);
    for class in 0..CLASS_LABELS.len() {
        let pairs: Vec<(f64, f64)> = samples
            .iter()
            .filter(|s| s.class == class)
            .map(|s| (kinetic_energy_change(s.mass_kg, s.v_pre, s.v_post).unwrap(), s.x1[0]))
            .collect();
        let rho = class_correlation(&pairs, Correlation::Pearson).unwrap();
        assert!((rho - 1.0).abs() < 1e-9, "class {class}: {rho}");
    }
}

#[test]
fn clicks_localize_within_one_frame() {
    let params = OnsetParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let len = 2 * ANALYSIS_RATE as usize;
    for _ in 0..100 {
        let at = rng.random_range(params.window..len - params.window);
        let amp = rng.random_range(0.2..1.0);
        let clip = AudioClip::new(click(len, at, amp), ANALYSIS_RATE).unwrap();
        let env = onset_curve(&clip, &params).unwrap();
        let found = argmax(&env) as i64;
        let expected = (at / params.hop) as i64;
        assert!((found - expected).abs() <= 1, "click at {at}: frame {found}, expected {expected}");
    }
}

#[test]
fn silence_and_steady_tones_have_no_onsets() {
    let (window, hop) = (2048, 512);
    let sr = ANALYSIS_RATE as f64;
    let silence = onset_envelope(&stft_magnitude(&vec![0.0; 16_000], window, hop).unwrap());
    assert!(silence.iter().all(|v| *v == 0.0));
    for k in [16, 64, 300] {
        let f = k as f64 * sr / window as f64;
        let env = onset_envelope(&stft_magnitude(&tone(16_000, f, sr, 0.8), window, hop).unwrap());
        assert!(env.iter().skip(1).all(|v| *v < 1e-6), "bin {k}: {env:?}");
    }
}

#[test]
fn bin_centred_sine_peaks_at_its_bin() {
    let (window, hop) = (1024, 256);
    let sr = ANALYSIS_RATE as f64;
    for k in [5, 40, 200, 511] {
        let mag = stft_magnitude(&tone(8192, k as f64 * sr / window as f64, sr, 0.5), window, hop).unwrap();
        for frame in &mag {
            assert_eq!(argmax(frame), k);
        }
    }
}

#[test]
fn impulse_spectrum_is_flat() {
    let (window, hop) = (256, 256);
    let x = click(3 * window, window + window / 2, 1.0);
    let mag = stft_magnitude(&x, window, hop).unwrap();
    assert!(mag[1].iter().all(|m| (m - 1.0).abs() < 1e-12));
    assert!(mag[0].iter().chain(&mag[2]).all(|m| *m < 1e-12));
}

#[test]
fn evaluate_end_to_end_on_wav_files() {
    let dir = tempfile::tempdir().unwrap();
    let (gt_dir, gen_dir) = (dir.path().join("gt"), dir.path().join("gen"));
    std::fs::create_dir_all(&gt_dir).unwrap();
    std::fs::create_dir_all(&gen_dir).unwrap();

    // (video, class, v_pre, v_post, gt amplitude, generated amplitude)
    let cases = [
        ("v0", "wood", 1.0, Some(0.5), 0.1, 0.8),
        ("v1", "wood", 2.0, Some(0.5), 0.3, 0.5),
        ("v2", "wood", 3.0, Some(0.5), 0.6, 0.3),
        ("v3", "wood", 4.0, Some(0.5), 0.9, 0.1),
        ("v4", "wood", 4.0, None, 0.9, 0.1),
        ("v5", "metal", 2.0, Some(1.0), 0.5, 0.5),
        ("v6", "metal", 3.0, Some(1.0), 0.7, 0.7),
    ];
    let sr = ANALYSIS_RATE as usize;
    let mut impacts = Vec::new();
    let mut tracks = Vec::new();
    for (video, class, pre, post, a_gt, a_gen) in cases {
        for (d, a) in [(&gt_dir, a_gt), (&gen_dir, a_gen)] {
            let clip = AudioClip::new(click(sr, sr / 2, a), ANALYSIS_RATE).unwrap();
            std::fs::write(d.join(format!("{video}.wav")), encode_wav(&clip)).unwrap();
        }
        impacts.push(ImpactAnnotation {
            video_id: video.into(),
            class_label: class.into(),
            time_s: 0.5,
            object_id: "ball".into(),
        });
        tracks.push(TracksDocument {
            video_id: video.into(),
            fps: 10.0,
            frames: 11,
            tracks: vec![step_track("ball", pre, post)],
        });
    }
    let options = ApccOptions {
        correlation: Correlation::Spearman,
        ..ApccOptions::default()
    };
    let report = evaluate(&impacts, &tracks, &WavDir(&gt_dir), &WavDir(&gen_dir), options).unwrap();

    assert_eq!(report.events.len(), 6);
    assert_eq!(report.excluded_events.len(), 1);
    assert_eq!(report.excluded_events[0].video_id, "v4");
    assert_eq!(report.excluded_classes.len(), 1);
    assert_eq!(report.excluded_classes[0].class_label, "metal");
    assert_eq!(report.classes.len(), 1);
    let wood = &report.classes[0];
    assert!((wood.rho_gt - 1.0).abs() < 1e-12);
    assert!((wood.rho_gen + 1.0).abs() < 1e-12);
    assert!((report.apcc_delta - 2.0).abs() < 1e-12);
    let e = &report.events[1];
    assert_eq!((e.v_pre, e.v_post), (2.0, 0.5));
    assert!((e.delta_ke - 0.5 * (4.0 - 0.25)).abs() < 1e-12);

    let missing = evaluate(&impacts, &tracks[1..], &WavDir(&gt_dir), &WavDir(&gen_dir), options);
    assert!(missing.is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn correlation_is_scale_invariant(
        pairs in prop::collection::vec((0.0f64..10.0, 0.0f64..10.0), 3..30),
        c in 1e-6f64..1e6,
    ) {
        let scaled: Vec<(f64, f64)> = pairs.iter().map(|(k, o)| (*k, c * o)).collect();
        for kind in [Correlation::Pearson, Correlation::Spearman] {
            match (class_correlation(&pairs, kind), class_correlation(&scaled, kind)) {
                (Ok(a), Ok(b)) => {
                    prop_assert!((a - b).abs() < 1e-12, "{a} vs {b}");
                    prop_assert!((-1.0..=1.0).contains(&a));
                }
                (Err(_), Err(_)) => {}
                (a, b) => prop_assert!(false, "{a:?} vs {b:?}"),
            }
        }
    }

    #[test]
    fn delta_is_symmetric_and_bounded(
        rhos in prop::collection::vec((-1.0f64..=1.0, -1.0f64..=1.0, 3usize..40), 1..10),
        weighted in any::<bool>(),
    ) {
        let agg = if weighted { Aggregation::EventWeighted } else { Aggregation::Mean };
        let fwd: Vec<ClassCorrelation> = rhos.iter().enumerate()
            .map(|(i, (g, n, e))| ClassCorrelation::new(format!("c{i}"), *g, *n, *e)).collect();
        let rev: Vec<ClassCorrelation> = rhos.iter().enumerate()
            .map(|(i, (g, n, e))| ClassCorrelation::new(format!("c{i}"), *n, *g, *e)).collect();
        let a = apcc_delta(&fwd, agg).unwrap();
        prop_assert_eq!(a, apcc_delta(&rev, agg).unwrap());
        prop_assert!((0.0..=2.0).contains(&a));
    }

    #[test]
    fn pearson_agrees_with_oracle(pairs in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 3..25)) {
        let (x, y): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        if let Ok(r) = pearson(&x, &y) {
            prop_assert!((r - pearson_oracle(&x, &y).clamp(-1.0, 1.0)).abs() < 1e-9);
        }
    }
}
