#![no_main]
use libfuzzer_sys::fuzz_target;
use shear_core::data::FeatureSchema;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(schema) = FeatureSchema::from_toml_str(text) {
        let again = FeatureSchema::from_toml_str(&schema.to_toml_string()).unwrap();
        assert_eq!(again, schema);
    }
});
