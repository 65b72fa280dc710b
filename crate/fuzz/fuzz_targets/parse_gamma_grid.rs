#![no_main]

use delayreg::config::parse_gamma_grid;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(grid) = parse_gamma_grid(text) {
        assert!(!grid.is_empty());
        assert!(grid.iter().all(|g| *g > 0.0 && *g < 1.0));
    }
});
