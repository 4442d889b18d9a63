#![no_main]

use gridee::event_model::DataConfig;
use gridee::trainer::TrainConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(cfg) = TrainConfig::from_toml_str(text) {
        assert!(cfg.k >= 1 && cfg.batch_size >= 1);
    }
    if let Ok((schema, gen)) = DataConfig::from_toml_str(text) {
        assert!(gen.check(&schema).is_ok());
    }
});
