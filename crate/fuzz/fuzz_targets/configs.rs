#![no_main]

use libfuzzer_sys::fuzz_target;
use ringtheta::detfunc::GyConfig;
use ringtheta::dynamics::{prepare_initial_state, InitialState};
use ringtheta::labframe::LevelGraphSource;
use ringtheta::model::ModelParams;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(c) = serde_json::from_str::<GyConfig>(text) {
        let _ = c.validate();
    }
    let _ = serde_json::from_str::<LevelGraphSource>(text);
    if let Ok(init) = serde_json::from_str::<InitialState>(text) {
        let params = ModelParams::new(2, 16, 0.0, 2.0, 1.0).unwrap();
        if let Ok(psi) = prepare_initial_state(&init, &params) {
            let norm: f64 = psi.amplitudes().iter().map(|a| a.norm_sqr()).sum();
            assert!((norm - 1.0).abs() < 1e-9);
        }
    }
});
