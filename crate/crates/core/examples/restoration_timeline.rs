//! Damages the bundled feeder, repairs components one per hour in two
//! different orders and compares load shedding and resilience curves.
//! Writes `restoration.svg` to the working directory.
//!
//! cargo run --release --example restoration_timeline

use std::path::PathBuf;

use quake_restore::grid::load_network_file;
use quake_restore::powerflow::{ens_timeline, RepairSchedule};
use quake_restore::report::{resilience_csv, resilience_svg};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let net = load_network_file(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/synthetic13.json"))?;
    let failed = ["sub650", "f632_671", "f671_680", "g675"];
    let mut failures = vec![false; net.component_count()];
    let idx: Vec<usize> = failed
        .iter()
        .map(|id| net.component_index(id).ok_or_else(|| format!("no component {id}")))
        .collect::<Result<_, _>>()?;
    idx.iter().for_each(|&c| failures[c] = true);

    let schedule = |order: &[usize]| {
        let mut steps = vec![None; net.component_count()];
        for (k, &c) in order.iter().enumerate() {
            steps[c] = Some(k + 1);
        }
        RepairSchedule::new(steps)
    };
    let upstream_first = schedule(&idx);
    let reversed: Vec<usize> = idx.iter().rev().copied().collect();
    let downstream_first = schedule(&reversed);

    let start = net.peak_step();
    let a = ens_timeline(&net, &failures, &upstream_first, start)?;
    let b = ens_timeline(&net, &failures, &downstream_first, start)?;
    for (name, t) in [("upstream first", &a), ("downstream first", &b)] {
        let shed: Vec<String> = t.shed_mw().iter().map(|s| format!("{s:.2}")).collect();
        println!("{name:<17} ENS {:>6.3} MWh  shed per step [{}]", t.ens_mwh, shed.join(", "));
    }

    let series = vec![
        ("upstream first".to_string(), a.resilience()),
        ("downstream first".to_string(), b.resilience()),
    ];
    print!("{}", resilience_csv(&series)?);
    std::fs::write("restoration.svg", resilience_svg(&series, "repair order")?)?;
    println!("wrote restoration.svg");
    Ok(())
}
