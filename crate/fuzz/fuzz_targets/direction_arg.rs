//! `--mu` values and `--directions` files.

#![no_main]
use libfuzzer_sys::fuzz_target;
use sinr_region::cli::parse_directions;
use sinr_region::Direction;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(d) = Direction::parse(text) {
        assert!(!d.is_empty());
        assert!(d.weights().iter().all(|w| w.is_finite() && *w >= 0.0));
        assert!(d.weights().iter().any(|w| *w > 0.0));
    }
    if let Ok(ds) = parse_directions(text) {
        assert!(ds.iter().all(|d| !d.is_empty()));
    }
});
