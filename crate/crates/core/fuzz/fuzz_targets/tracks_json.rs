#![no_main]

use libfuzzer_sys::fuzz_target;
use physfoley::apcc::pre_post_velocities;
use physfoley::velocity::TracksDocument;

fuzz_target!(|data: &[u8]| {
    let Ok(doc) = serde_json::from_slice::<TracksDocument>(data) else {
        return;
    };
    if doc.validate().is_err() {
        return;
    }
    for t in &doc.tracks {
        let _ = pre_post_velocities(t, 0.5, doc.fps, 3);
    }
});
