#![no_main]

use delayreg::config::ScenarioConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(cfg) = ScenarioConfig::parse(text) else {
        return;
    };
    // Validation must reject or accept without panicking.
    let _ = cfg.build();
    if let Ok(again) = cfg.to_toml_string() {
        let reparsed = ScenarioConfig::parse(&again).expect("serialized config parses");
        assert_eq!(reparsed.to_toml_string().ok(), Some(again));
    }
});
