#![no_main]

use libfuzzer_sys::fuzz_target;
use physfoley::report::{classes_csv, loss_csv, parse_classes_csv, parse_loss_csv};

fuzz_target!(|data: &[u8]| {
    if let Ok(classes) = parse_classes_csv(data, "fuzz") {
        let once = classes_csv(&classes);
        assert_eq!(classes_csv(&parse_classes_csv(&once, "fuzz").unwrap()), once);
    }
    if let Ok(losses) = parse_loss_csv(data, "fuzz") {
        let once = loss_csv(&losses);
        assert_eq!(loss_csv(&parse_loss_csv(&once, "fuzz").unwrap()), once);
    }
});
