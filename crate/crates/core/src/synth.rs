//! Synthetic scene generator for velocity fixtures.
//!
//! Objects are axis-aligned pixel rectangles whose world points translate
//! rigidly by a fixed vector every frame. The rectangle may also slide across
//! the image, in which case the same physical surface points stay under it.

use crate::error::{Error, Result};
use crate::trace::{BinaryGrid, ObjectTrack, PointMap, VideoTrace};

#[derive(Debug, Clone)]
pub struct RigidObject {
    pub id: String,
    pub mass_kg: Option<f64>,
    /// Top-left pixel at frame 0.
    pub origin_px: (usize, usize),
    /// Rectangle size in pixels (rows, cols).
    pub size_px: (usize, usize),
    /// Pixel shift of the rectangle per frame (rows, cols).
    pub shift_px: (isize, isize),
    /// World position of the rectangle's top-left surface point at frame 0.
    pub anchor_m: [f64; 3],
    /// World translation per frame.
    pub delta_m: [f64; 3],
    /// Frames in which the object is fully occluded (empty mask).
    pub occluded: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct SceneSpec {
    pub video_id: String,
    pub fps: f64,
    pub frames: usize,
    pub height: usize,
    pub width: usize,
    /// Spacing between neighbouring surface points, meters.
    pub pitch_m: f64,
    pub objects: Vec<RigidObject>,
}

pub fn render_scene(spec: &SceneSpec) -> Result<VideoTrace> {
    let (h, w) = (spec.height, spec.width);
    let mut maps: Vec<Vec<[f64; 3]>> = (0..spec.frames)
        .map(|_| {
            let mut v = Vec::with_capacity(h * w);
            for r in 0..h {
                for c in 0..w {
                    v.push([c as f64 * spec.pitch_m, r as f64 * spec.pitch_m, 8.0]);
                }
            }
            v
        })
        .collect();
    let mut objects = Vec::with_capacity(spec.objects.len());
    for obj in &spec.objects {
        let mut masks = Vec::with_capacity(spec.frames);
        for l in 0..spec.frames {
            let r0 = obj.origin_px.0 as isize + obj.shift_px.0 * l as isize;
            let c0 = obj.origin_px.1 as isize + obj.shift_px.1 * l as isize;
            let (rows, cols) = obj.size_px;
            if r0 < 0 || c0 < 0 || r0 as usize + rows > h || c0 as usize + cols > w {
                return Err(Error::validation(
                    format!("objects.{}", obj.id),
                    format!("rectangle leaves the frame at frame {l}"),
                ));
            }
            let (r0, c0) = (r0 as usize, c0 as usize);
            let hidden = obj.occluded.contains(&l);
            let mask = BinaryGrid::from_fn(h, w, |r, c| {
                !hidden && (r0..r0 + rows).contains(&r) && (c0..c0 + cols).contains(&c)
            });
            for i in 0..rows {
                for j in 0..cols {
                    let shift = l as f64;
                    maps[l][(r0 + i) * w + c0 + j] = [
                        obj.anchor_m[0] + j as f64 * spec.pitch_m + shift * obj.delta_m[0],
                        obj.anchor_m[1] + i as f64 * spec.pitch_m + shift * obj.delta_m[1],
                        obj.anchor_m[2] + shift * obj.delta_m[2],
                    ];
                }
            }
            masks.push(mask);
        }
        objects.push(ObjectTrack {
            object_id: obj.id.clone(),
            name: obj.id.clone(),
            action: "translates".into(),
            mass_kg: obj.mass_kg,
            masks,
        });
    }
    let point_maps = maps
        .into_iter()
        .map(|pts| PointMap::new(h, w, pts, vec![true; h * w]))
        .collect::<Result<Vec<_>>>()?;
    let trace = VideoTrace {
        video_id: spec.video_id.clone(),
        fps: spec.fps,
        width: w,
        height: h,
        objects,
        point_maps,
        camera: None,
    };
    trace.validate()?;
    Ok(trace)
}

/// Applies `x -> R x + t` to every valid point of every frame.
pub fn apply_isometry(trace: &VideoTrace, rotation: [[f64; 3]; 3], translation: [f64; 3]) -> Result<VideoTrace> {
    let mut out = trace.clone();
    out.point_maps = trace
        .point_maps
        .iter()
        .map(|pm| {
            pm.map_points(|p| {
                let mut q = translation;
                for (r, qr) in q.iter_mut().enumerate() {
                    *qr += rotation[r][0] * p[0] + rotation[r][1] * p[1] + rotation[r][2] * p[2];
                }
                q
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(out)
}

/// Rotation from Euler angles (radians), `Rz · Ry · Rx`.
pub fn rotation_from_euler(rx: f64, ry: f64, rz: f64) -> [[f64; 3]; 3] {
    let (sx, cx) = rx.sin_cos();
    let (sy, cy) = ry.sin_cos();
    let (sz, cz) = rz.sin_cos();
    [
        [cz * cy, cz * sy * sx - sz * cx, cz * sy * cx + sz * sx],
        [sz * cy, sz * sy * sx + cz * cx, sz * sy * cx - cz * sx],
        [-sy, cy * sx, cy * cx],
    ]
}
