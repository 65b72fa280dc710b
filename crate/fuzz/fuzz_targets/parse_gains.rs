#![no_main]

use delayreg::config::GainsFile;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(file) = GainsFile::parse(text) {
        let _ = file.to_gain_set();
    }
});
