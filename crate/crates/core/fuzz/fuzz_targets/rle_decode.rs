#![no_main]

use libfuzzer_sys::fuzz_target;
use physfoley::trace::{rle_decode, rle_encode, RleMask};

// byte 0: height, byte 1: width, then little-endian u16 run lengths
fuzz_target!(|data: &[u8]| {
    if data.len() < 2 {
        return;
    }
    let (h, w) = (data[0] as usize, data[1] as usize);
    let counts = data[2..]
        .chunks_exact(2)
        .map(|c| u16::from_le_bytes([c[0], c[1]]) as u64)
        .collect();
    if let Ok(grid) = rle_decode(&RleMask { counts }, h, w) {
        let again = rle_encode(&grid);
        assert_eq!(rle_decode(&again, h, w).unwrap(), grid);
    }
});
