#![no_main]

use libfuzzer_sys::fuzz_target;
use physfoley::report::{parse_report, to_json_bytes};

fuzz_target!(|data: &[u8]| {
    if let Ok(r) = parse_report(data, "fuzz") {
        // emission is stable once floats are rounded
        let once = to_json_bytes(&r).unwrap();
        let back = parse_report(&once, "fuzz").unwrap();
        assert_eq!(to_json_bytes(&back).unwrap(), once);
    }
});
