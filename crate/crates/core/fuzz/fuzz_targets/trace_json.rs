#![no_main]

use libfuzzer_sys::fuzz_target;
use physfoley::trace::{assemble, PointMap, TraceDocument};
use physfoley::velocity::{estimate_tracks, CentroidMode};

fuzz_target!(|data: &[u8]| {
    let Ok(doc) = TraceDocument::from_json(data, "fuzz") else {
        return;
    };
    // small documents go through assembly and tracking with flat point maps
    if doc.frames > 16 || doc.width * doc.height > 4096 {
        return;
    }
    let maps: Vec<PointMap> = (0..doc.frames)
        .map(|f| PointMap::from_fn(doc.height, doc.width, |r, c| [c as f64, r as f64, f as f64]).unwrap())
        .collect();
    if let Ok(trace) = assemble(doc, maps) {
        let _ = estimate_tracks(&trace, CentroidMode::Median);
    }
});
