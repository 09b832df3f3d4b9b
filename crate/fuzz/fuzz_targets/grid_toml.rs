#![no_main]
use libfuzzer_sys::fuzz_target;
use shear_core::train::{enumerate_grid, HyperGrid};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(grid) = HyperGrid::from_toml_str(text) {
        let _ = enumerate_grid(&grid);
    }
});
