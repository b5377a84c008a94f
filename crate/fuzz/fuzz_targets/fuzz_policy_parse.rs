#![no_main]

use libfuzzer_sys::fuzz_target;

use ztiam_core::policy::{parse_policy_set, serialize_policy_set};

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        // Must not panic; accepted documents must survive a round trip.
        if let Ok(set) = parse_policy_set(text) {
            let again = serialize_policy_set(&set);
            let reparsed = parse_policy_set(&again).expect("serialized form must reparse");
            assert_eq!(reparsed, set);
        }
    }
});
