#![no_main]

use adavits::ModelConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = text.parse::<ModelConfig>() {
        let again: ModelConfig = cfg.to_config_string().parse().unwrap();
        assert_eq!(again, cfg);
    }
});
