#![no_main]
use libfuzzer_sys::fuzz_target;
use shear_core::train::parse_prediction_csv;

fuzz_target!(|data: &[u8]| {
    if let Ok(rows) = parse_prediction_csv(data) {
        assert!(rows.iter().all(|(_, p)| p.is_finite()));
    }
});
