#![no_main]

use libfuzzer_sys::fuzz_target;
use physfoley::trace::PointMap;

fuzz_target!(|data: &[u8]| {
    if let Ok(pm) = PointMap::decode(data) {
        let bytes = pm.encode();
        assert_eq!(PointMap::decode(&bytes).unwrap(), pm);
    }
});
