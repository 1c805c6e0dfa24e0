#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(t) = phmm::io::parse_trace_csv(text) {
            let meta = phmm::io::Metadata::default();
            phmm::io::parse_trace_csv(&phmm::io::write_trace_csv(&t, &meta, true)).unwrap();
        }
    }
});
