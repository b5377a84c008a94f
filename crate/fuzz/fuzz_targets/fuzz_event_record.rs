#![no_main]

use libfuzzer_sys::fuzz_target;

use ztiam_core::events::{decode_record, encode_record};

fuzz_target!(|data: &[u8]| {
    // Must not panic; decoded records must re-encode to a decodable form.
    if let Some((event, used)) = decode_record(data) {
        assert!(used <= data.len());
        let bytes = encode_record(&event);
        let (back, _) = decode_record(&bytes).expect("re-encoded record must decode");
        assert_eq!(back, event);
    }
});
