#![no_main]

use libfuzzer_sys::fuzz_target;
use physfoley::apcc::parse_impacts;

fuzz_target!(|data: &[u8]| {
    let _ = parse_impacts(data, "fuzz");
});
