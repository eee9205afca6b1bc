#![no_main]

use cpwc::formats::{decode_dataset, DatasetHeader};
use libfuzzer_sys::fuzz_target;

// Input layout: u16 LE header length, header JSON, then sample bytes.
fuzz_target!(|data: &[u8]| {
    if data.len() < 2 {
        return;
    }
    let len = u16::from_le_bytes([data[0], data[1]]) as usize;
    let rest = &data[2..];
    if rest.len() < len {
        return;
    }
    let (json, bin) = rest.split_at(len);
    let Ok(header) = DatasetHeader::from_json_bytes(json) else {
        return;
    };
    if let Ok(dataset) = decode_dataset(&header, bin) {
        let (m, n, t) = dataset.dims();
        assert_eq!((m as u64, n as u64, t as u64), (header.m, header.n, header.t));
        assert!(dataset.samples().iter().all(|v| v.is_finite()));
    }
});
