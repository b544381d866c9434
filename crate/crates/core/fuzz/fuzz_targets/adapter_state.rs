#![no_main]

use libfuzzer_sys::fuzz_target;
use physfoley::adapter::{AdapterState, AdapterStateFile};

fuzz_target!(|data: &[u8]| {
    let Ok(file) = serde_json::from_slice::<AdapterStateFile>(data) else {
        return;
    };
    let c = &file.config;
    // construction allocates every tensor up front
    let size = [c.patch_dim, c.hidden_dim, c.frames, c.fourier_count, c.omega_dim]
        .iter()
        .try_fold(1usize, |acc, d| acc.checked_mul(*d));
    if size.is_none_or(|n| n > 1 << 16) {
        return;
    }
    if let Ok(state) = AdapterState::from_file(file) {
        let again = AdapterState::from_file(state.to_file()).unwrap();
        assert_eq!(again, state);
    }
});
