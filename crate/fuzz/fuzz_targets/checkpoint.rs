#![no_main]

use gaide::model::Checkpoint;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(ckpt) = Checkpoint::from_bytes(data) {
        // Compare encodings: tensors may legitimately hold NaN.
        let bytes = ckpt.to_bytes();
        assert_eq!(Checkpoint::from_bytes(&bytes).expect("re-decode").to_bytes(), bytes);
        let _ = ckpt.to_model();
    }
});
