#![no_main]
use libfuzzer_sys::fuzz_target;
use sha2::{Digest, Sha256};
use shear_core::model::ModelBundle;

fuzz_target!(|data: &[u8]| {
    let _ = ModelBundle::from_bytes(data);

    // Re-seal with a valid trailer so the header and payload decoders are
    // reached instead of stopping at the checksum.
    let mut sealed = data.to_vec();
    sealed.extend_from_slice(&Sha256::digest(data));
    if let Ok(bundle) = ModelBundle::from_bytes(&sealed) {
        let bytes = bundle.to_bytes().unwrap();
        assert_eq!(ModelBundle::from_bytes(&bytes).unwrap(), bundle);
        let _ = bundle.predict(&vec![0.0; bundle.n_features()]);
    }
});
