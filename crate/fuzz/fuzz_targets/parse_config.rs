#![no_main]

use libfuzzer_sys::fuzz_target;
use nonbark::config::ScenarioConfig;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(cfg) = ScenarioConfig::from_json(text) {
            // anything accepted must survive a round trip unchanged
            let again = ScenarioConfig::from_json(&cfg.to_json()).expect("re-parse of emitted config");
            assert_eq!(again, cfg);
        }
    }
});
