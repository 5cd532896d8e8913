//! Spec parsing must reject bad input with an error, and anything it accepts
//! must survive a write/read round trip unchanged.

#![no_main]
use libfuzzer_sys::fuzz_target;
use sinr_region::parse_channel_spec;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(spec) = parse_channel_spec(text) {
        let again = parse_channel_spec(&spec.to_json_string()).expect("serialized spec parses");
        assert_eq!(again, spec);
    }
});
