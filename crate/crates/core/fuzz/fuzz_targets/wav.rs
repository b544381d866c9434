#![no_main]

use libfuzzer_sys::fuzz_target;
use physfoley::apcc::{decode_wav, onset_curve, OnsetParams};

fuzz_target!(|data: &[u8]| {
    if let Ok(clip) = decode_wav(data) {
        assert!(clip.samples().iter().all(|s| s.is_finite() && s.abs() <= 1.0));
        let _ = onset_curve(&clip, &OnsetParams::default());
    }
});
