#![no_main]

use libfuzzer_sys::fuzz_target;
use sktk::config::parse_config;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(cfg) = parse_config(text) else {
        return;
    };
    let _ = cfg.macro_params();
    let _ = cfg.micro_params();
    let _ = cfg.grid_list();
    let _ = cfg.horizon();
    if let (Ok(m), Ok(init)) = (cfg.grid_m(), cfg.initial()) {
        // keep allocations bounded
        if m <= 1024 {
            let _ = init.check_positive(m, cfg.model.d.len());
        }
    }
});
