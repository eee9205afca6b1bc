#![no_main]

use cpwc::beamformers::{Method, MethodDefaults};
use cpwc::display::Region;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let _ = Region::parse(text);
    if let Ok(method) = Method::parse(text, &MethodDefaults::default()) {
        let _ = method.label();
        let _ = method.resolve(64);
    }
});
