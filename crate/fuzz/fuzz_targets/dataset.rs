#![no_main]

use gaide::training::Dataset;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(ds) = Dataset::parse(text) {
        assert_eq!(Dataset::parse(&ds.to_text()).expect("re-parse"), ds);
        let _ = ds.samples(true);
    }
});
