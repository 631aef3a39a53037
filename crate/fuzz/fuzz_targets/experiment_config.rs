#![no_main]

use adaptive_conformal::harness::ExperimentConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let text = String::from_utf8_lossy(data);
    if let Ok(cfg) = ExperimentConfig::parse_kv(&text) {
        let _ = cfg.validate();
    }
});
