#![no_main]

use libfuzzer_sys::fuzz_target;
use ringtheta::model::{build_ring_hamiltonian, extract_theta, ModelParams};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(p) = ModelParams::from_json_str(text) else { return };
    // Accepted params must round-trip and, when small, build a Hermitian ring.
    let back = ModelParams::from_json_str(&p.to_json_string()).expect("round trip");
    assert_eq!(back.n_sites, p.n_sites);
    if p.n_sites <= 256 {
        let h = build_ring_hamiltonian(&p).expect("validated params build");
        assert!(h.hermiticity_residual() < 1e-12);
        let _ = extract_theta(&h);
    }
});
