#![no_main]
use libfuzzer_sys::fuzz_target;
use shear_core::data::{CsvOptions, Dataset, FeatureSchema};

fuzz_target!(|data: &[u8]| {
    let Some((&flag, body)) = data.split_first() else {
        return;
    };
    let schema = FeatureSchema::default_msw();
    let options = CsvOptions {
        ignore_extra_columns: flag & 1 == 1,
    };
    let Ok(dataset) = Dataset::load_csv(body, &schema, options) else {
        return;
    };
    // Whatever loads must survive a write/read round trip unchanged.
    let mut out = Vec::new();
    dataset.write_csv(&mut out).unwrap();
    let back = Dataset::load_csv(out.as_slice(), &schema, CsvOptions::default()).unwrap();
    assert_eq!(back.samples, dataset.samples);
});
