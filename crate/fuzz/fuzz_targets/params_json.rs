#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(p) = phmm::io::parse_params_json(text) {
            phmm::io::parse_params_json(&phmm::io::write_params_json(&p).unwrap()).unwrap();
        }
    }
});
