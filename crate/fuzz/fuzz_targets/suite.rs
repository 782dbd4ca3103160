#![no_main]

use gaide::bench::{BenchmarkSuite, SuiteDocument};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(doc) = SuiteDocument::parse(text) {
        let again = SuiteDocument::parse(&doc.to_json_string()).expect("re-parse");
        assert_eq!(doc, again);
        let _ = BenchmarkSuite::from_document(doc);
    }
});
