#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(d) = phmm::io::parse_dataset_csv(text, None) {
            let meta = phmm::io::Metadata::default();
            let again = phmm::io::parse_dataset_csv(&phmm::io::write_dataset_csv(&d, &meta), None).unwrap();
            assert_eq!(d, again);
        }
    }
});
