#![no_main]

use gaide::bench::report::{parse_costs, parse_metrics};
use libfuzzer_sys::fuzz_target;

// Input: results.csv, a NUL byte, timing.csv. The whole input is also
// tried as costs.csv.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let (results, timing) = text.split_once('\0').unwrap_or((text, ""));
    let _ = parse_metrics(results, timing);
    let _ = parse_costs(text);
});
