#![no_main]

use cpwc::formats::DatasetHeader;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(header) = DatasetHeader::from_json_bytes(data) {
        let count = header.sample_count().expect("validated header has a sample count");
        assert_eq!(header.expected_bytes().unwrap(), 4 * count);
    }
});
