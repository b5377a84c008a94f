#![no_main]

use libfuzzer_sys::fuzz_target;

use ztiam_core::config::ServiceConfig;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        // Must not panic; accepted configs must yield valid derived configs.
        if let Ok(cfg) = ServiceConfig::parse(text) {
            cfg.trust_config()
                .expect("accepted config has a valid trust section");
            cfg.pip_config()
                .validate()
                .expect("accepted config has a valid pip section");
        }
    }
});
