//! Metric centroid trajectories and instantaneous speeds from masks and
//! point maps.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trace::{BinaryGrid, PointMap, VideoTrace};

pub type Point3 = [f64; 3];

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum CentroidMode {
    #[default]
    Mean,
    /// Per-coordinate median, for noisy reconstructions.
    Median,
}

/// World points under the mask, skipping pixels the point map marks invalid.
pub fn inverse_project(mask: &BinaryGrid, pmap: &PointMap) -> Result<Vec<Point3>> {
    if mask.height() != pmap.height() || mask.width() != pmap.width() {
        return Err(Error::validation(
            "mask",
            format!(
                "mask is {}x{}, point map is {}x{}",
                mask.height(),
                mask.width(),
                pmap.height(),
                pmap.width()
            ),
        ));
    }
    let mut out = Vec::with_capacity(mask.count_ones());
    for r in 0..mask.height() {
        for c in 0..mask.width() {
            if mask.get(r, c) {
                if let Some(p) = pmap.point(r, c) {
                    out.push(p);
                }
            }
        }
    }
    Ok(out)
}

/// Arithmetic mean; `None` for an empty set (the object is occluded).
pub fn centroid(points: &[Point3]) -> Option<Point3> {
    if points.is_empty() {
        return None;
    }
    let mut acc = [0.0; 3];
    for p in points {
        for k in 0..3 {
            acc[k] += p[k];
        }
    }
    let n = points.len() as f64;
    Some(acc.map(|s| s / n))
}

pub fn centroid_median(points: &[Point3]) -> Option<Point3> {
    if points.is_empty() {
        return None;
    }
    let mut out = [0.0; 3];
    for (k, o) in out.iter_mut().enumerate() {
        let mut v: Vec<f64> = points.iter().map(|p| p[k]).collect();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        *o = if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) };
    }
    Some(out)
}

/// Frame-to-frame motion derived from a centroid sequence. Entry `l` covers
/// frames `l -> l+1` and is `None` whenever either centroid is absent.
#[derive(Debug, Clone, PartialEq)]
pub struct Motion {
    pub displacements: Vec<Option<f64>>,
    pub velocities: Vec<Option<f64>>,
    pub velocity_vectors: Vec<Option<Point3>>,
}

pub fn velocity_sequence(centroids: &[Option<Point3>], fps: f64) -> Result<Motion> {
    if !(fps.is_finite() && fps > 0.0) {
        return Err(Error::validation("fps", format!("must be finite and > 0, got {fps}")));
    }
    if centroids.len() < 2 {
        return Err(Error::validation("centroids", "need at least 2 frames"));
    }
    let n = centroids.len() - 1;
    let mut motion = Motion {
        displacements: Vec::with_capacity(n),
        velocities: Vec::with_capacity(n),
        velocity_vectors: Vec::with_capacity(n),
    };
    for pair in centroids.windows(2) {
        match (pair[0], pair[1]) {
            (Some(a), Some(b)) => {
                let delta = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
                let d = (delta[0] * delta[0] + delta[1] * delta[1] + delta[2] * delta[2]).sqrt();
                motion.displacements.push(Some(d));
                motion.velocities.push(Some(d * fps));
                motion.velocity_vectors.push(Some(delta.map(|c| c * fps)));
            }
            _ => {
                motion.displacements.push(None);
                motion.velocities.push(None);
                motion.velocity_vectors.push(None);
            }
        }
    }
    Ok(motion)
}

/// Per-object trajectory. Serialized with `null` for undefined entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VelocityTrack {
    pub object_id: String,
    pub name: String,
    pub mass_kg: Option<f64>,
    pub visible: Vec<bool>,
    pub centroids: Vec<Option<Point3>>,
    pub displacements: Vec<Option<f64>>,
    pub velocities: Vec<Option<f64>>,
    /// Directional velocity (m/s); informational only.
    pub velocity_vectors: Vec<Option<Point3>>,
}

impl VelocityTrack {
    /// One speed per frame: the forward difference `l -> l+1`, and the backward
    /// difference for the last frame.
    pub fn frame_velocities(&self) -> Vec<Option<f64>> {
        let mut out = self.velocities.clone();
        out.push(self.velocities.last().copied().flatten());
        out
    }
}

pub fn estimate_tracks(trace: &VideoTrace, mode: CentroidMode) -> Result<Vec<VelocityTrack>> {
    trace.validate()?;
    trace
        .objects
        .iter()
        .map(|obj| {
            let centroids = obj
                .masks
                .iter()
                .zip(&trace.point_maps)
                .map(|(mask, pm)| {
                    let pts = inverse_project(mask, pm)?;
                    Ok(match mode {
                        CentroidMode::Mean => centroid(&pts),
                        CentroidMode::Median => centroid_median(&pts),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let motion = velocity_sequence(&centroids, trace.fps)?;
            Ok(VelocityTrack {
                object_id: obj.object_id.clone(),
                name: obj.name.clone(),
                mass_kg: obj.mass_kg,
                visible: centroids.iter().map(Option::is_some).collect(),
                centroids,
                displacements: motion.displacements,
                velocities: motion.velocities,
                velocity_vectors: motion.velocity_vectors,
            })
        })
        .collect()
}

/// `tracks.json`: the velocity estimates for one video.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TracksDocument {
    pub video_id: String,
    pub fps: f64,
    pub frames: usize,
    pub tracks: Vec<VelocityTrack>,
}

impl TracksDocument {
    pub fn from_trace(trace: &VideoTrace, mode: CentroidMode) -> Result<Self> {
        Ok(Self {
            video_id: trace.video_id.clone(),
            fps: trace.fps,
            frames: trace.frame_count(),
            tracks: estimate_tracks(trace, mode)?,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return Err(Error::validation("fps", "must be finite and > 0"));
        }
        for (i, t) in self.tracks.iter().enumerate() {
            let f = |name: &str| format!("tracks[{i}].{name}");
            if t.visible.len() != self.frames || t.centroids.len() != self.frames {
                return Err(Error::validation(f("centroids"), format!("expected {} frames", self.frames)));
            }
            let pairs = self.frames.saturating_sub(1);
            if t.velocities.len() != pairs || t.displacements.len() != pairs {
                return Err(Error::validation(f("velocities"), format!("expected {pairs} entries")));
            }
            if let Some(bad) = t.velocities.iter().flatten().find(|v| !(v.is_finite() && **v >= 0.0)) {
                return Err(Error::validation(f("velocities"), format!("invalid speed {bad}")));
            }
            if let Some(m) = t.mass_kg {
                if !(m.is_finite() && m >= 0.0) {
                    return Err(Error::validation(f("mass_kg"), "must be finite and >= 0"));
                }
            }
        }
        Ok(())
    }
}
