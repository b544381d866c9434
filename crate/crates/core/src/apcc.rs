//! Audio–physics correlation: onset strength at annotated impacts, kinetic
//! energy released at those impacts, and their per-class correlation on
//! ground-truth versus generated audio.

use std::collections::{BTreeMap, HashMap};
use std::io::Cursor;
use std::path::Path;

use rubato::{FftFixedIn, Resampler};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::velocity::{TracksDocument, VelocityTrack};

pub const ANALYSIS_RATE: u32 = 16_000;
/// Longest clip analysed; longer input is truncated.
pub const MAX_CLIP_SECONDS: f64 = 8.0;

#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl AudioClip {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::validation("sample_rate", "must be > 0"));
        }
        if let Some(i) = samples.iter().position(|s| !(s.is_finite() && s.abs() <= 1.0)) {
            return Err(Error::validation(format!("samples[{i}]"), "must be finite and within [-1, 1]"));
        }
        if samples.len() as f64 > MAX_CLIP_SECONDS * sample_rate as f64 {
            return Err(Error::validation("samples", format!("clip longer than {MAX_CLIP_SECONDS} s")));
        }
        Ok(Self { samples, sample_rate })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

/// Decodes a PCM or float WAV, averages channels, truncates to 8 s and
/// resamples to the analysis rate.
pub fn decode_wav(bytes: &[u8]) -> Result<AudioClip> {
    let reader = hound::WavReader::new(Cursor::new(bytes)).map_err(|e| Error::validation("wav", e.to_string()))?;
    let spec = reader.spec();
    if spec.channels == 0 || spec.sample_rate == 0 {
        return Err(Error::validation("wav", "zero channels or sample rate"));
    }
    let channels = spec.channels as usize;
    let limit = (MAX_CLIP_SECONDS * spec.sample_rate as f64) as usize * channels;
    let wav_err = |e: hound::Error| Error::validation("wav", e.to_string());
    let interleaved: Vec<f64> = match spec.sample_format {
        hound::SampleFormat::Int => {
            if !(1..=32).contains(&spec.bits_per_sample) {
                return Err(Error::validation("wav", "unsupported bit depth"));
            }
            let scale = (1u64 << (spec.bits_per_sample - 1)) as f64;
            reader
                .into_samples::<i32>()
                .take(limit)
                .map(|s| s.map(|v| (v as f64 / scale).clamp(-1.0, 1.0)))
                .collect::<std::result::Result<_, _>>()
                .map_err(wav_err)?
        }
        hound::SampleFormat::Float => reader
            .into_samples::<f32>()
            .take(limit)
            .map(|s| s.map(|v| if v.is_finite() { (v as f64).clamp(-1.0, 1.0) } else { 0.0 }))
            .collect::<std::result::Result<_, _>>()
            .map_err(wav_err)?,
    };
    if !interleaved.len().is_multiple_of(channels) {
        return Err(Error::validation("wav", "truncated frame"));
    }
    let mono: Vec<f64> = interleaved
        .chunks_exact(channels)
        .map(|f| f.iter().sum::<f64>() / channels as f64)
        .collect();
    let mono = resample(&mono, spec.sample_rate, ANALYSIS_RATE)?;
    AudioClip::new(mono, ANALYSIS_RATE)
}

pub fn read_wav(path: &Path) -> Result<AudioClip> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_wav(&bytes)
}

/// 16-bit PCM mono encoding.
pub fn encode_wav(clip: &AudioClip) -> Vec<u8> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: clip.sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut buf = Cursor::new(Vec::new());
    {
        let mut w = hound::WavWriter::new(&mut buf, spec).expect("in-memory writer");
        for s in &clip.samples {
            w.write_sample((s * 32767.0).round() as i16).expect("in-memory write");
        }
        w.finalize().expect("in-memory finalize");
    }
    buf.into_inner()
}

/// Band-limited resampling; output length is `round(n · to / from)`.
pub fn resample(samples: &[f64], from: u32, to: u32) -> Result<Vec<f64>> {
    if from == to || samples.is_empty() {
        return Ok(samples.to_vec());
    }
    let target = (samples.len() as f64 * to as f64 / from as f64).round() as usize;
    let err = |e: &dyn std::fmt::Display| Error::validation("sample_rate", e.to_string());
    let mut rs = FftFixedIn::<f64>::new(from as usize, to as usize, 1024, 1, 1).map_err(|e| err(&e))?;
    let delay = rs.output_delay();
    let mut out = Vec::with_capacity(target + delay);
    let mut pos = 0;
    while samples.len() - pos >= rs.input_frames_next() {
        let n = rs.input_frames_next();
        let chunk = rs.process(&[&samples[pos..pos + n]], None).map_err(|e| err(&e))?;
        out.extend_from_slice(&chunk[0]);
        pos += n;
    }
    let chunk = rs.process_partial(Some(&[&samples[pos..]]), None).map_err(|e| err(&e))?;
    out.extend_from_slice(&chunk[0]);
    while out.len() < target + delay {
        let chunk = rs.process_partial::<&[f64]>(None, None).map_err(|e| err(&e))?;
        out.extend_from_slice(&chunk[0]);
    }
    Ok(out[delay..delay + target].iter().map(|s| s.clamp(-1.0, 1.0)).collect())
}

/// Frames × `window/2 + 1` magnitudes of the Hann-windowed DFT.
pub fn stft_magnitude(samples: &[f64], window: usize, hop: usize) -> Result<Vec<Vec<f64>>> {
    if window < 64 || !window.is_power_of_two() {
        return Err(Error::validation("window", "must be a power of two >= 64"));
    }
    if hop == 0 || hop > window {
        return Err(Error::validation("hop", "must be in 1..=window"));
    }
    if samples.len() < window {
        return Err(Error::validation(
            "clip",
            format!("{} samples is shorter than one window of {window}", samples.len()),
        ));
    }
    // periodic Hann
    let hann: Vec<f64> = (0..window)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / window as f64).cos())
        .collect();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(window);
    let frames = (samples.len() - window) / hop + 1;
    let mut buf = vec![Complex::new(0.0, 0.0); window];
    Ok((0..frames)
        .map(|n| {
            let seg = &samples[n * hop..n * hop + window];
            for ((b, s), w) in buf.iter_mut().zip(seg).zip(&hann) {
                *b = Complex::new(s * w, 0.0);
            }
            fft.process(&mut buf);
            buf[..=window / 2].iter().map(|c| c.norm()).collect()
        })
        .collect())
}

/// Rectified log spectral flux against a 3-bin maximum filter of the
/// previous frame. The first frame is 0.
pub fn onset_envelope(mag: &[Vec<f64>]) -> Vec<f64> {
    let mut env = vec![0.0; mag.len()];
    for n in 1..mag.len() {
        let prev: Vec<f64> = mag[n - 1].iter().map(|m| m.ln_1p()).collect();
        env[n] = mag[n]
            .iter()
            .enumerate()
            .map(|(f, m)| {
                let lo = f.saturating_sub(1);
                let hi = (f + 1).min(prev.len() - 1);
                let reference = prev[lo..=hi].iter().copied().fold(f64::NEG_INFINITY, f64::max);
                (m.ln_1p() - reference).max(0.0)
            })
            .sum();
    }
    env
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum OnsetStatistic {
    /// Maximum of the envelope inside the window.
    Peak,
    /// Sum of the envelope inside the window.
    Integral,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OnsetParams {
    pub window: usize,
    pub hop: usize,
    pub half_window_s: f64,
    pub statistic: OnsetStatistic,
}

impl Default for OnsetParams {
    fn default() -> Self {
        Self {
            window: 2048,
            hop: 512,
            half_window_s: 0.05,
            statistic: OnsetStatistic::Peak,
        }
    }
}

/// Envelope with frame `n` centred on sample `n · hop`: the clip is padded
/// with `window / 2` zeros on both sides before framing.
pub fn onset_curve(clip: &AudioClip, params: &OnsetParams) -> Result<Vec<f64>> {
    let pad = params.window / 2;
    let mut padded = vec![0.0; clip.samples.len() + 2 * pad];
    padded[pad..pad + clip.samples.len()].copy_from_slice(&clip.samples);
    Ok(onset_envelope(&stft_magnitude(&padded, params.window, params.hop)?))
}

/// Envelope statistic over frames whose centre lies within `half_window` of
/// the impact.
pub fn impact_onset_strength(
    env: &[f64],
    impact_time: f64,
    hop: usize,
    sample_rate: u32,
    half_window: f64,
    statistic: OnsetStatistic,
) -> Result<f64> {
    if !(impact_time.is_finite() && impact_time >= 0.0) {
        return Err(Error::validation("impact_time", "must be finite and >= 0"));
    }
    if !(half_window.is_finite() && half_window >= 0.0) {
        return Err(Error::validation("half_window", "must be finite and >= 0"));
    }
    let frame_dt = hop as f64 / sample_rate as f64;
    let inside: Vec<f64> = env
        .iter()
        .enumerate()
        .filter(|(n, _)| (*n as f64 * frame_dt - impact_time).abs() <= half_window)
        .map(|(_, v)| *v)
        .collect();
    if inside.is_empty() {
        return Err(Error::Evaluation(format!("no onset frames within {half_window} s of t = {impact_time}")));
    }
    Ok(match statistic {
        OnsetStatistic::Peak => inside.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        OnsetStatistic::Integral => inside.iter().sum(),
    })
}

pub fn kinetic_energy_change(mass_kg: f64, v_pre: f64, v_post: f64) -> Result<f64> {
    for (name, v) in [("mass", mass_kg), ("v_pre", v_pre), ("v_post", v_post)] {
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::validation(name, "must be finite and >= 0"));
        }
    }
    Ok(0.5 * mass_kg * (v_pre * v_pre - v_post * v_post).abs())
}

/// Mean defined speeds over the `k` frame pairs ending at the impact frame
/// and the `k` pairs starting at it. Windows are clipped at track bounds.
pub fn pre_post_velocities(track: &VelocityTrack, impact_time: f64, fps: f64, k: usize) -> Result<(f64, f64)> {
    if k == 0 {
        return Err(Error::validation("k", "must be >= 1"));
    }
    if !(fps.is_finite() && fps > 0.0) {
        return Err(Error::validation("fps", "must be finite and > 0"));
    }
    let frames = track.centroids.len();
    let f = (impact_time * fps).round();
    if !(impact_time.is_finite() && impact_time >= 0.0 && f < frames as f64) {
        return Err(Error::validation("impact_time", format!("outside the {frames}-frame track")));
    }
    let f = f as usize;
    let v = &track.velocities;
    let mean = |range: std::ops::Range<usize>, side: &str| -> Result<f64> {
        let defined: Vec<f64> = v[range.start.min(v.len())..range.end.min(v.len())]
            .iter()
            .flatten()
            .copied()
            .collect();
        if defined.is_empty() {
            return Err(Error::Evaluation(format!(
                "no defined {side}-impact velocity for object {}",
                track.object_id
            )));
        }
        Ok(defined.iter().sum::<f64>() / defined.len() as f64)
    };
    Ok((mean(f.saturating_sub(k)..f, "pre")?, mean(f..f + k, "post")?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Correlation {
    #[default]
    Pearson,
    Spearman,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Aggregation {
    /// Unweighted mean over classes.
    #[default]
    Mean,
    /// Classes weighted by their event count.
    EventWeighted,
}

pub const MIN_CLASS_EVENTS: usize = 3;

pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::validation("correlation", "sequences differ in length"));
    }
    if x.len() < MIN_CLASS_EVENTS {
        return Err(Error::Degenerate(format!("{} events, need {MIN_CLASS_EVENTS}", x.len())));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Degenerate("constant sequence".into()));
    }
    let r = sxy / (sxx.sqrt() * syy.sqrt());
    if !r.is_finite() {
        return Err(Error::Degenerate("non-finite correlation".into()));
    }
    Ok(r.clamp(-1.0, 1.0))
}

/// Average ranks, ties sharing the mean rank.
pub fn ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|a, b| x[*a].total_cmp(&x[*b]));
    let mut out = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0;
        for &k in &idx[i..=j] {
            out[k] = r;
        }
        i = j + 1;
    }
    out
}

pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    pearson(&ranks(x), &ranks(y))
}

/// Correlation between ΔKE and onset strength over `(delta_ke, onset)` pairs.
pub fn class_correlation(events: &[(f64, f64)], kind: Correlation) -> Result<f64> {
    let (x, y): (Vec<f64>, Vec<f64>) = events.iter().copied().unzip();
    match kind {
        Correlation::Pearson => pearson(&x, &y),
        Correlation::Spearman => spearman(&x, &y),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassCorrelation {
    pub class_label: String,
    pub rho_gt: f64,
    pub rho_gen: f64,
    pub abs_diff: f64,
    pub events: usize,
}

impl ClassCorrelation {
    pub fn new(class_label: impl Into<String>, rho_gt: f64, rho_gen: f64, events: usize) -> Self {
        Self {
            class_label: class_label.into(),
            rho_gt,
            rho_gen,
            abs_diff: (rho_gen - rho_gt).abs(),
            events,
        }
    }
}

pub fn apcc_delta(classes: &[ClassCorrelation], aggregation: Aggregation) -> Result<f64> {
    if classes.is_empty() {
        return Err(Error::Evaluation("no class has enough events".into()));
    }
    Ok(match aggregation {
        Aggregation::Mean => classes.iter().map(|c| c.abs_diff).sum::<f64>() / classes.len() as f64,
        Aggregation::EventWeighted => {
            let total: usize = classes.iter().map(|c| c.events).sum();
            classes.iter().map(|c| c.abs_diff * c.events as f64).sum::<f64>() / total as f64
        }
    })
}

/// One annotated impact from `impacts.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImpactAnnotation {
    pub video_id: String,
    #[serde(rename = "class")]
    pub class_label: String,
    pub time_s: f64,
    pub object_id: String,
}

pub fn parse_impacts(bytes: &[u8], source_name: &str) -> Result<Vec<ImpactAnnotation>> {
    let impacts: Vec<ImpactAnnotation> =
        serde_json::from_slice(bytes).map_err(|e| Error::from_json(source_name, &e))?;
    for (i, a) in impacts.iter().enumerate() {
        if !(a.time_s.is_finite() && a.time_s >= 0.0) {
            return Err(Error::validation(format!("[{i}].time_s"), "must be finite and >= 0"));
        }
        if a.video_id.is_empty() || a.class_label.is_empty() || a.object_id.is_empty() {
            return Err(Error::validation(format!("[{i}]"), "identifiers must be non-empty"));
        }
    }
    Ok(impacts)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImpactEvent {
    pub video_id: String,
    pub class_label: String,
    pub impact_time: f64,
    pub object_id: String,
    pub v_pre: f64,
    pub v_post: f64,
    pub mass: f64,
    pub delta_ke: f64,
    pub onset_strength_gt: f64,
    pub onset_strength_gen: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExcludedEvent {
    pub video_id: String,
    pub object_id: String,
    pub impact_time: f64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExcludedClass {
    pub class_label: String,
    pub events: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApccOptions {
    pub onset: OnsetParams,
    /// Frames on each side of the impact for pre/post speeds.
    pub velocity_window: usize,
    pub correlation: Correlation,
    pub aggregation: Aggregation,
}

impl Default for ApccOptions {
    fn default() -> Self {
        Self {
            onset: OnsetParams::default(),
            velocity_window: 3,
            correlation: Correlation::Pearson,
            aggregation: Aggregation::Mean,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApccReport {
    pub options: ApccOptions,
    pub apcc_delta: f64,
    pub classes: Vec<ClassCorrelation>,
    pub excluded_classes: Vec<ExcludedClass>,
    pub events: Vec<ImpactEvent>,
    pub excluded_events: Vec<ExcludedEvent>,
}

/// Per-class correlations and APCC-Δ from finished events. Classes are
/// reported in label order.
pub fn aggregate(events: Vec<ImpactEvent>, excluded_events: Vec<ExcludedEvent>, options: ApccOptions) -> Result<ApccReport> {
    let mut by_class: BTreeMap<&str, Vec<&ImpactEvent>> = BTreeMap::new();
    for e in &events {
        by_class.entry(&e.class_label).or_default().push(e);
    }
    let mut classes = Vec::new();
    let mut excluded_classes = Vec::new();
    for (label, evs) in by_class {
        let gt: Vec<(f64, f64)> = evs.iter().map(|e| (e.delta_ke, e.onset_strength_gt)).collect();
        let gen: Vec<(f64, f64)> = evs.iter().map(|e| (e.delta_ke, e.onset_strength_gen)).collect();
        let result = class_correlation(&gt, options.correlation)
            .and_then(|a| Ok((a, class_correlation(&gen, options.correlation)?)));
        match result {
            Ok((rho_gt, rho_gen)) => classes.push(ClassCorrelation::new(label, rho_gt, rho_gen, evs.len())),
            Err(e) => {
                log::info!("class {label} excluded: {e}");
                excluded_classes.push(ExcludedClass {
                    class_label: label.to_string(),
                    events: evs.len(),
                    reason: e.to_string(),
                });
            }
        }
    }
    Ok(ApccReport {
        options,
        apcc_delta: apcc_delta(&classes, options.aggregation)?,
        classes,
        excluded_classes,
        events,
        excluded_events,
    })
}

/// Source of analysis-rate audio by video id.
pub trait AudioSource {
    fn load(&self, video_id: &str) -> Result<AudioClip>;
}

/// `<dir>/<video_id>.wav`
pub struct WavDir<'a>(pub &'a Path);

impl AudioSource for WavDir<'_> {
    fn load(&self, video_id: &str) -> Result<AudioClip> {
        read_wav(&self.0.join(format!("{video_id}.wav")))
    }
}

struct OnsetCache<'a> {
    source: &'a dyn AudioSource,
    params: OnsetParams,
    curves: HashMap<String, (Vec<f64>, f64)>,
}

impl OnsetCache<'_> {
    fn strength(&mut self, video_id: &str, time: f64) -> Result<f64> {
        if !self.curves.contains_key(video_id) {
            let clip = self.source.load(video_id)?;
            let env = onset_curve(&clip, &self.params)?;
            self.curves.insert(video_id.to_string(), (env, clip.duration()));
        }
        let (env, duration) = &self.curves[video_id];
        if time > *duration {
            return Err(Error::Evaluation(format!("impact at {time} s is past the {duration} s clip")));
        }
        impact_onset_strength(
            env,
            time,
            self.params.hop,
            ANALYSIS_RATE,
            self.params.half_window_s,
            self.params.statistic,
        )
    }
}

/// Full protocol over annotated impacts. Events whose velocity windows are
/// undefined, whose object has no mass, or whose onset window is empty are
/// excluded and listed; missing audio or tracks are errors.
pub fn evaluate(
    impacts: &[ImpactAnnotation],
    tracks: &[TracksDocument],
    gt: &dyn AudioSource,
    generated: &dyn AudioSource,
    options: ApccOptions,
) -> Result<ApccReport> {
    let docs: HashMap<&str, &TracksDocument> = tracks.iter().map(|d| (d.video_id.as_str(), d)).collect();
    let mut gt_cache = OnsetCache {
        source: gt,
        params: options.onset,
        curves: HashMap::new(),
    };
    let mut gen_cache = OnsetCache {
        source: generated,
        params: options.onset,
        curves: HashMap::new(),
    };
    let mut events = Vec::new();
    let mut excluded = Vec::new();
    for (i, a) in impacts.iter().enumerate() {
        let doc = docs
            .get(a.video_id.as_str())
            .ok_or_else(|| Error::validation(format!("impacts[{i}].video_id"), format!("no tracks for {}", a.video_id)))?;
        let track = doc
            .tracks
            .iter()
            .find(|t| t.object_id == a.object_id)
            .ok_or_else(|| Error::validation(format!("impacts[{i}].object_id"), format!("no track for {}", a.object_id)))?;
        let event = (|| -> Result<ImpactEvent> {
            let mass = track
                .mass_kg
                .ok_or_else(|| Error::Evaluation(format!("object {} has no mass", a.object_id)))?;
            let (v_pre, v_post) = pre_post_velocities(track, a.time_s, doc.fps, options.velocity_window)?;
            Ok(ImpactEvent {
                video_id: a.video_id.clone(),
                class_label: a.class_label.clone(),
                impact_time: a.time_s,
                object_id: a.object_id.clone(),
                v_pre,
                v_post,
                mass,
                delta_ke: kinetic_energy_change(mass, v_pre, v_post)?,
                onset_strength_gt: gt_cache.strength(&a.video_id, a.time_s)?,
                onset_strength_gen: gen_cache.strength(&a.video_id, a.time_s)?,
            })
        })();
        match event {
            Ok(e) => events.push(e),
            Err(e @ (Error::Evaluation(_) | Error::Validation { .. })) => {
                log::info!("impact {i} excluded: {e}");
                excluded.push(ExcludedEvent {
                    video_id: a.video_id.clone(),
                    object_id: a.object_id.clone(),
                    impact_time: a.time_s,
                    reason: e.to_string(),
                });
            }
            Err(e) => return Err(e),
        }
    }
    aggregate(events, excluded, options)
}
