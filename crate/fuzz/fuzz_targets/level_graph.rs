#![no_main]

use libfuzzer_sys::fuzz_target;
use ringtheta::labframe::{DriveSet, LevelGraph};

// Input: a level graph and a drive set separated by a NUL byte.
fuzz_target!(|data: &[u8]| {
    let mut parts = data.splitn(2, |&b| b == 0);
    let graph = parts.next().and_then(|b| std::str::from_utf8(b).ok());
    let drives = parts.next().and_then(|b| std::str::from_utf8(b).ok());
    let graph = graph.and_then(|s| LevelGraph::from_json_str(s).ok());
    let drives = drives.and_then(|s| DriveSet::from_json_str(s).ok());
    if let (Some(g), Some(d)) = (graph, drives) {
        let _ = d.validate_against(&g);
    }
});
