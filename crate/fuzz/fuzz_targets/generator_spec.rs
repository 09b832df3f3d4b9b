#![no_main]
use libfuzzer_sys::fuzz_target;
use shear_core::data::FeatureSchema;
use shear_core::numeric::Rng;
use shear_core::synth::{generate, GeneratorSpec};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(spec) = GeneratorSpec::from_toml_str(text) else {
        return;
    };
    let schema = FeatureSchema::default_msw();
    if let Ok(synth) = generate(&spec, &schema, 4, &mut Rng::new(0)) {
        for (i, s) in synth.dataset.samples.iter().enumerate() {
            s.validate(&schema, i).unwrap();
        }
    }
});
