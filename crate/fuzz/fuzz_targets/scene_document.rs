#![no_main]

use gaide::kinematics::SceneDocument;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(doc) = SceneDocument::from_json_str(text) {
        // Whatever parses must survive a round trip.
        let again = SceneDocument::from_json_str(&doc.to_json_string()).expect("re-parse");
        assert_eq!(doc, again);
    }
    let _ = SceneDocument::parse(text);
});
