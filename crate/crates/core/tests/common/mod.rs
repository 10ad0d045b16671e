#![allow(dead_code)]

pub mod gradcheck;
pub mod normal;
pub mod trees;

use std::path::PathBuf;

use quake_restore::grid::{load_network, load_network_file, Network};

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data")
}

pub fn synthetic13() -> Network {
    load_network_file(data_dir().join("synthetic13.json")).expect("fixture loads")
}

/// Radial feeder `B0 - B1 - ... - B{n-1}` along the x axis, 1 km apart,
/// substation at B0, constant loads, one line component per line.
pub fn feeder(loads: &[f64], capacity: f64) -> Network {
    let n = loads.len();
    let buses: Vec<String> = (0..n)
        .map(|i| {
            let extra = if i == 0 { r#", "is_substation": true"# } else { "" };
            let profile = if loads[i] > 0.0 {
                format!(r#", "load_profile_ref": "flat", "load_scale": {}"#, loads[i])
            } else {
                String::new()
            };
            format!(r#"{{"id": "B{i}", "coords": [{i}, 0]{extra}{profile}}}"#)
        })
        .collect();
    let lines: Vec<String> = (1..n)
        .map(|i| {
            format!(
                r#"{{"id": "L{i}", "from_bus": "B{}", "to_bus": "B{i}", "resistance": 0.01, "reactance": 0.01, "capacity_mva": {capacity}}}"#,
                i - 1
            )
        })
        .collect();
    let components: Vec<String> = (1..n)
        .map(|i| format!(r#"{{"id": "C{i}", "kind": "line", "ref": "L{i}"}}"#))
        .collect();
    let doc = format!(
        r#"{{"buses": [{}], "lines": [{}], "components": [{}],
            "depots": [{{"id": "D0", "coords": [0, 1], "crew_count": 1}}],
            "profiles": [{{"id": "flat", "hourly_p": [1.0]}}]}}"#,
        buses.join(","),
        lines.join(","),
        components.join(",")
    );
    load_network(&doc).expect("feeder is valid")
}
