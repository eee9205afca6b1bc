#![no_main]

use cpwc::formats::AcquisitionConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(cfg) = AcquisitionConfig::from_json_bytes(data) {
        if cfg.elements <= 4096 && cfg.angle_count <= 4096 {
            let _ = cfg.probe();
            let _ = cfg.sequence();
        }
        let _ = cfg.pulse();
        let _ = cfg.sample_rate();
    }
});
