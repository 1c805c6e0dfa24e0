#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(d) = phmm::io::parse_dataset_json(text) {
            let again = phmm::io::parse_dataset_json(&phmm::io::write_dataset_json(&d).unwrap()).unwrap();
            assert_eq!(d, again);
        }
    }
});
