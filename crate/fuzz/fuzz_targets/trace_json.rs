#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(t) = phmm::io::parse_trace_json(text) {
            phmm::io::parse_trace_json(&phmm::io::write_trace_json(&t, true).unwrap()).unwrap();
        }
    }
});
