#![allow(dead_code)]

use physfoley::synth::{render_scene, RigidObject, SceneSpec};
use physfoley::trace::VideoTrace;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use physfoley::velocity::{TracksDocument, VelocityTrack};

/// Rigid translations at several frame rates: `(fps, per-frame delta)`.
pub const TRAJECTORIES: [(f64, [f64; 3]); 6] = [
    (10.0, [0.05, 0.0, 0.0]),
    (15.0, [0.0, -0.03, 0.01]),
    (24.0, [0.02, 0.02, -0.02]),
    (30.0, [-0.011, 0.004, 0.0]),
    (48.0, [0.0, 0.0, 0.035]),
    (60.0, [0.007, -0.009, 0.012]),
];

pub fn rigid_object(id: &str, delta_m: [f64; 3], shift_px: (isize, isize)) -> RigidObject {
    RigidObject {
        id: id.into(),
        mass_kg: Some(0.8),
        origin_px: (2, 2),
        size_px: (3, 4),
        shift_px,
        anchor_m: [0.4, -0.2, 3.0],
        delta_m,
        occluded: vec![],
    }
}

pub fn scene(fps: f64, frames: usize, objects: Vec<RigidObject>) -> SceneSpec {
    SceneSpec {
        video_id: "fixture".into(),
        fps,
        frames,
        height: 12,
        width: 16,
        pitch_m: 0.01,
        objects,
    }
}

pub fn rigid_trace(fps: f64, delta: [f64; 3]) -> VideoTrace {
    render_scene(&scene(fps, 6, vec![rigid_object("box", delta, (1, 1))])).unwrap()
}

pub fn norm(v: [f64; 3]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Textbook Pearson, written independently of the library.
pub fn pearson_oracle(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let sx: f64 = x.iter().sum();
    let sy: f64 = y.iter().sum();
    let sxx: f64 = x.iter().map(|a| a * a).sum();
    let syy: f64 = y.iter().map(|a| a * a).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    (n * sxy - sx * sy) / ((n * sxx - sx * sx).sqrt() * (n * syy - sy * sy).sqrt())
}

pub fn click(len: usize, at: usize, amplitude: f64) -> Vec<f64> {
    let mut v = vec![0.0; len];
    v[at] = amplitude;
    v
}

pub fn tone(len: usize, freq: f64, sr: f64, amplitude: f64) -> Vec<f64> {
    (0..len)
        .map(|i| amplitude * (2.0 * std::f64::consts::PI * freq * i as f64 / sr).sin())
        .collect()
}

/// Eleven frames at 10 fps: speed `pre` on the first five pairs, then `post`
/// (`None` for an occluded post-impact window).
pub fn step_track(id: &str, pre: f64, post: Option<f64>) -> VelocityTrack {
    let frames = 11;
    let velocities: Vec<Option<f64>> = (0..frames - 1).map(|l| if l < 5 { Some(pre) } else { post }).collect();
    VelocityTrack {
        object_id: id.into(),
        name: id.into(),
        mass_kg: Some(1.0),
        visible: vec![true; frames],
        centroids: vec![Some([0.0; 3]); frames],
        displacements: velocities.iter().map(|v| v.map(|v| v / 10.0)).collect(),
        velocities,
        velocity_vectors: vec![None; frames - 1],
    }
}

pub fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_physfoley"))
        .args(args)
        .env_remove("PHYSFOLEY_LOG")
        .output()
        .unwrap()
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

pub fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

pub struct ApccFixture {
    pub impacts: PathBuf,
    pub tracks: Vec<PathBuf>,
    pub gt: PathBuf,
    pub gen: PathBuf,
}

pub fn apcc_fixture(dir: &Path) -> ApccFixture {
    let (gt, gen) = (dir.join("gt"), dir.join("gen"));
    std::fs::create_dir_all(&gt).unwrap();
    std::fs::create_dir_all(&gen).unwrap();
    let mut impacts = Vec::new();
    let mut tracks = Vec::new();
    for (i, (pre, a_gt, a_gen)) in [(1.0, 0.1, 0.2), (2.0, 0.3, 0.25), (3.0, 0.6, 0.7), (4.0, 0.9, 0.5)]
        .into_iter()
        .enumerate()
    {
        let video = format!("v{i}");
        // 22.05 kHz stereo exercises the resampler and the channel mix
        for (d, a) in [(&gt, a_gt), (&gen, a_gen)] {
            let spec = hound::WavSpec {
                channels: 2,
                sample_rate: 22_050,
                bits_per_sample: 16,
                sample_format: hound::SampleFormat::Int,
            };
            let mut w = hound::WavWriter::create(d.join(format!("{video}.wav")), spec).unwrap();
            for n in 0..22_050 {
                let v = if n == 11_025 { (a * 32767.0) as i16 } else { 0 };
                w.write_sample(v).unwrap();
                w.write_sample(v).unwrap();
            }
            w.finalize().unwrap();
        }
        impacts.push(serde_json::json!({"video_id": video, "class": "wood", "time_s": 0.5, "object_id": "ball"}));
        let doc = TracksDocument {
            video_id: video.clone(),
            fps: 10.0,
            frames: 11,
            tracks: vec![step_track("ball", pre, Some(0.5))],
        };
        let p = dir.join(format!("tracks_{video}.json"));
        std::fs::write(&p, serde_json::to_vec(&doc).unwrap()).unwrap();
        tracks.push(p);
    }
    let p = dir.join("impacts.json");
    std::fs::write(&p, serde_json::to_vec(&impacts).unwrap()).unwrap();
    ApccFixture { impacts: p, tracks, gt, gen }
}

pub fn apcc_args<'a>(f: &'a ApccFixture, out: &'a Path, csv: &'a Path) -> Vec<&'a str> {
    let mut a = vec!["apcc", "--impacts", s(&f.impacts)];
    for t in &f.tracks {
        a.extend(["--tracks", s(t)]);
    }
    a.extend(["--gt-dir", s(&f.gt), "--gen-dir", s(&f.gen), "--out", s(out), "--csv", s(csv)]);
    a
}

/// Runs the command built by `make` twice, each in a fresh directory, and
/// compares stdout and every file written under `out/`. Returns the number
/// of files compared.
pub fn repeatable(make: impl Fn(&Path) -> Vec<String>) -> Result<usize, String> {
    let mut runs = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        std::fs::create_dir_all(dir.path().join("out")).map_err(|e| e.to_string())?;
        let args = make(dir.path());
        let o = run(&args.iter().map(String::as_str).collect::<Vec<_>>());
        if code(&o) != 0 {
            return Err(String::from_utf8_lossy(&o.stderr).into_owned());
        }
        let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir.path().join("out"))
            .map_err(|e| e.to_string())?
            .map(|e| {
                let e = e.unwrap();
                (e.file_name().into_string().unwrap(), std::fs::read(e.path()).unwrap())
            })
            .collect();
        files.sort();
        runs.push((files, o.stdout));
    }
    if runs[0] != runs[1] {
        return Err("outputs differ between runs".into());
    }
    Ok(runs[0].0.len())
}

fn out_file(d: &Path, name: &str) -> String {
    d.join("out").join(name).to_str().unwrap().to_string()
}

fn train_small(model: &Path) {
    let o = run(&["toy-train", "--seed", "4", "--steps", "5", "--samples", "20", "--out", s(model)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

/// Repeat-run comparison for every subcommand with small fixed-seed inputs.
pub fn determinism_battery() -> Vec<(&'static str, Result<usize, String>)> {
    let strings = |v: &[&str]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>();
    vec![
        (
            "velocity",
            repeatable(|d| {
                let trace = rigid_trace(30.0, [0.01, 0.0, 0.02]).write_to_dir(d, "clip").unwrap();
                strings(&["velocity", "--trace", s(&trace), "--out", &out_file(d, "t.json")])
            }),
        ),
        (
            "adapter-check",
            repeatable(|d| {
                strings(&["adapter-check", "--seeds", "3", "--trials", "5", "--sampled", "1", "--out", &out_file(d, "c.json")])
            }),
        ),
        (
            "toy-train",
            repeatable(|d| {
                strings(&[
                    "toy-train", "--seed", "2", "--steps", "5", "--samples", "20", "--out", &out_file(d, "m.json"),
                    "--loss-csv", &out_file(d, "l.csv"),
                ])
            }),
        ),
        (
            "toy-eval",
            repeatable(|d| {
                let model = d.join("m.json");
                train_small(&model);
                strings(&[
                    "toy-eval", "--model", s(&model), "--grid", "2", "--out", &out_file(d, "g.csv"), "--summary",
                    &out_file(d, "s.json"),
                ])
            }),
        ),
        (
            "apcc",
            repeatable(|d| {
                let f = apcc_fixture(d);
                let (out, csv) = (PathBuf::from(out_file(d, "r.json")), PathBuf::from(out_file(d, "e.csv")));
                apcc_args(&f, &out, &csv).into_iter().map(String::from).collect()
            }),
        ),
        (
            "report",
            repeatable(|d| {
                let model = d.join("m.json");
                train_small(&model);
                strings(&["report", "--input", s(&model), "--out", &out_file(d, "loss.csv")])
            }),
        ),
    ]
}
