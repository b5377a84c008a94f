#![no_main]

use libfuzzer_sys::fuzz_target;

use ztiam_core::policy::parse_request_context;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        // Must not panic on any input.
        let _ = parse_request_context(text, 1_700_000_000);
    }
});
