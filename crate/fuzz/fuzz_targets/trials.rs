#![no_main]

use gaide::bench::report::{parse_trials, trials_jsonl};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(records) = parse_trials(text) {
        assert_eq!(parse_trials(&trials_jsonl(&records)).expect("re-parse"), records);
    }
});
