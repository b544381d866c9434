//! File-based scene model: object masks, per-frame point maps and the
//! physical annotations that upstream perception would otherwise provide.
//!
//! A trace is a UTF-8 JSON document plus one binary point map per frame:
//!
//! ```json
//! {
//!   "video_id": "clip-001",
//!   "fps": 25.0,
//!   "frames": 2,
//!   "width": 2,
//!   "height": 2,
//!   "objects": [
//!     { "id": "ball", "name": "ball", "action": "falls", "mass_kg": 0.4,
//!       "masks": [[0, 1, 3], [4]] }
//!   ],
//!   "point_map_files": ["pm_0000.bin", "pm_0001.bin"]
//! }
//! ```
//!
//! `mass_kg` may be `null` (unknown). An optional `camera` array carries one
//! `{rotation, translation}` pose per frame; it is validated for shape and
//! passed through untouched.

mod pointmap;
mod rle;

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use pointmap::PointMap;
pub use rle::{rle_decode, rle_encode, BinaryGrid, RleMask};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraPose {
    pub rotation: [[f64; 3]; 3],
    pub translation: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectRecord {
    pub id: String,
    pub name: String,
    pub action: String,
    pub mass_kg: Option<f64>,
    pub masks: Vec<RleMask>,
}

/// The JSON half of a trace, validated but without point maps loaded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceDocument {
    pub video_id: String,
    pub fps: f64,
    pub frames: usize,
    pub width: usize,
    pub height: usize,
    pub objects: Vec<ObjectRecord>,
    pub point_map_files: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub camera: Option<Vec<CameraPose>>,
}

impl TraceDocument {
    pub fn from_json(bytes: &[u8], source_name: &str) -> Result<Self> {
        let doc: TraceDocument =
            serde_json::from_slice(bytes).map_err(|e| Error::from_json(source_name, &e))?;
        doc.validate()?;
        Ok(doc)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return Err(Error::validation("fps", format!("must be finite and > 0, got {}", self.fps)));
        }
        if self.frames < 2 {
            return Err(Error::validation("frames", format!("need at least 2, got {}", self.frames)));
        }
        if self.width == 0 {
            return Err(Error::validation("width", "must be positive"));
        }
        if self.height == 0 {
            return Err(Error::validation("height", "must be positive"));
        }
        let pixels = (self.width as u64)
            .checked_mul(self.height as u64)
            .ok_or_else(|| Error::validation("width", "frame size overflows"))?;
        if self.point_map_files.len() != self.frames {
            return Err(Error::validation(
                "point_map_files",
                format!("{} files for {} frames", self.point_map_files.len(), self.frames),
            ));
        }
        if let Some(cam) = &self.camera {
            if cam.len() != self.frames {
                return Err(Error::validation(
                    "camera",
                    format!("{} poses for {} frames", cam.len(), self.frames),
                ));
            }
            for (i, pose) in cam.iter().enumerate() {
                let finite = pose.rotation.iter().flatten().chain(&pose.translation).all(|v| v.is_finite());
                if !finite {
                    return Err(Error::validation(format!("camera[{i}]"), "non-finite pose"));
                }
            }
        }
        let mut seen = HashSet::new();
        for (i, obj) in self.objects.iter().enumerate() {
            if !seen.insert(obj.id.as_str()) {
                return Err(Error::validation(format!("objects[{i}].id"), format!("duplicate id {:?}", obj.id)));
            }
            if let Some(m) = obj.mass_kg {
                if !(m.is_finite() && m >= 0.0) {
                    return Err(Error::validation(
                        format!("objects[{i}].mass_kg"),
                        format!("must be finite and >= 0, got {m}"),
                    ));
                }
            }
            if obj.masks.len() != self.frames {
                return Err(Error::validation(
                    format!("objects[{i}].masks"),
                    format!("{} masks for {} frames", obj.masks.len(), self.frames),
                ));
            }
            for (l, mask) in obj.masks.iter().enumerate() {
                if mask.total() != Some(pixels) {
                    return Err(Error::validation(
                        format!("objects[{i}].masks[{l}]"),
                        format!(
                            "run lengths sum to {}, expected {pixels}",
                            mask.total().map_or_else(|| "overflow".into(), |t| t.to_string())
                        ),
                    ));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectTrack {
    pub object_id: String,
    pub name: String,
    pub action: String,
    /// `None` means the mass is unknown, distinct from zero.
    pub mass_kg: Option<f64>,
    pub masks: Vec<BinaryGrid>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VideoTrace {
    pub video_id: String,
    pub fps: f64,
    pub width: usize,
    pub height: usize,
    pub objects: Vec<ObjectTrack>,
    pub point_maps: Vec<PointMap>,
    pub camera: Option<Vec<CameraPose>>,
}

impl VideoTrace {
    pub fn frame_count(&self) -> usize {
        self.point_maps.len()
    }

    /// Checks every invariant of an in-memory trace.
    pub fn validate(&self) -> Result<()> {
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return Err(Error::validation("fps", "must be finite and > 0"));
        }
        let frames = self.point_maps.len();
        if frames < 2 {
            return Err(Error::validation("frames", format!("need at least 2, got {frames}")));
        }
        for (l, pm) in self.point_maps.iter().enumerate() {
            if pm.height() != self.height || pm.width() != self.width {
                return Err(Error::validation(
                    format!("point_map_files[{l}]"),
                    format!(
                        "map is {}x{}, frame is {}x{}",
                        pm.height(),
                        pm.width(),
                        self.height,
                        self.width
                    ),
                ));
            }
        }
        for (i, obj) in self.objects.iter().enumerate() {
            if let Some(m) = obj.mass_kg {
                if !(m.is_finite() && m >= 0.0) {
                    return Err(Error::validation(format!("objects[{i}].mass_kg"), "must be finite and >= 0"));
                }
            }
            if obj.masks.len() != frames {
                return Err(Error::validation(
                    format!("objects[{i}].masks"),
                    format!("{} masks for {frames} frames", obj.masks.len()),
                ));
            }
            for (l, m) in obj.masks.iter().enumerate() {
                if m.height() != self.height || m.width() != self.width {
                    return Err(Error::validation(format!("objects[{i}].masks[{l}]"), "mask dimensions differ from frame"));
                }
            }
        }
        Ok(())
    }

    /// Writes `<stem>.json` and one `<stem>_pm_NNNN.bin` per frame into `dir`
    /// and returns the JSON path.
    pub fn write_to_dir(&self, dir: &Path, stem: &str) -> Result<PathBuf> {
        self.validate()?;
        let mut files = Vec::with_capacity(self.frame_count());
        for (l, pm) in self.point_maps.iter().enumerate() {
            let name = format!("{stem}_pm_{l:04}.bin");
            let path = dir.join(&name);
            std::fs::write(&path, pm.encode()).map_err(|e| Error::io(&path, e))?;
            files.push(name);
        }
        let doc = TraceDocument {
            video_id: self.video_id.clone(),
            fps: self.fps,
            frames: self.frame_count(),
            width: self.width,
            height: self.height,
            objects: self
                .objects
                .iter()
                .map(|o| ObjectRecord {
                    id: o.object_id.clone(),
                    name: o.name.clone(),
                    action: o.action.clone(),
                    mass_kg: o.mass_kg,
                    masks: o.masks.iter().map(rle_encode).collect(),
                })
                .collect(),
            point_map_files: files,
            camera: self.camera.clone(),
        };
        let path = dir.join(format!("{stem}.json"));
        let json = serde_json::to_vec_pretty(&doc).expect("trace document serializes");
        std::fs::write(&path, json).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }
}

/// Reads a trace JSON file and the point maps it references (paths are
/// relative to the JSON file's directory).
pub fn parse_trace(path: &Path) -> Result<VideoTrace> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let doc = TraceDocument::from_json(&bytes, &path.display().to_string())?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let mut point_maps = Vec::with_capacity(doc.frames);
    for (l, name) in doc.point_map_files.iter().enumerate() {
        let pm_path = base.join(name);
        let raw = std::fs::read(&pm_path).map_err(|e| Error::io(&pm_path, e))?;
        let pm = PointMap::decode(&raw).map_err(|e| match e {
            Error::Validation { field, message } => {
                Error::validation(format!("point_map_files[{l}] ({field})"), message)
            }
            other => other,
        })?;
        point_maps.push(pm);
    }
    assemble(doc, point_maps)
}

/// Builds a [`VideoTrace`] from a validated document and decoded point maps.
pub fn assemble(doc: TraceDocument, point_maps: Vec<PointMap>) -> Result<VideoTrace> {
    doc.validate()?;
    let mut objects = Vec::with_capacity(doc.objects.len());
    for (i, obj) in doc.objects.into_iter().enumerate() {
        let masks = obj
            .masks
            .iter()
            .enumerate()
            .map(|(l, m)| {
                rle_decode(m, doc.height, doc.width)
                    .map_err(|e| Error::validation(format!("objects[{i}].masks[{l}]"), e.to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        objects.push(ObjectTrack {
            object_id: obj.id,
            name: obj.name,
            action: obj.action,
            mass_kg: obj.mass_kg,
            masks,
        });
    }
    let trace = VideoTrace {
        video_id: doc.video_id,
        fps: doc.fps,
        width: doc.width,
        height: doc.height,
        objects,
        point_maps,
        camera: doc.camera,
    };
    trace.validate()?;
    Ok(trace)
}
