#![no_main]

use cpwc::formats::PhantomDocument;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(doc) = PhantomDocument::from_json_bytes(data) {
        // Keep speckle generation cheap.
        if doc.speckle.map_or(true, |s| {
            let r = s.region;
            s.density * (r.x1 - r.x0).abs() * (r.z1 - r.z0).abs() < 1e5
        }) {
            let _ = doc.build();
        }
    }
});
