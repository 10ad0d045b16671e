//! Samples damage scenarios, reads return-period losses off the empirical
//! distribution and reduces the set with forward selection.
//!
//! cargo run --release --example scenario_reduction -- [n_sce] [k]

use std::path::PathBuf;

use quake_restore::grid::{load_network_file, Point};
use quake_restore::scenario::{
    forward_reduce, generate_scenarios, reduction_distance, return_period_loss, select_representatives, EnsMode,
    LossWeights,
};
use quake_restore::seismic::SeismicEvent;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let n_sce: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(2000);
    let k: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(8);

    let net = load_network_file(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/synthetic13.json"))?;
    let event = SeismicEvent::new(Point::new(-12.0, -14.0), 10.0, 7.5);
    let set = generate_scenarios(&net, &event, n_sce, LossWeights::default(), EnsMode::Surrogate, 1)?;
    let dist = set.loss_distribution()?;
    let mean_fail = set.scenarios.iter().map(|s| s.failure_count() as f64).sum::<f64>() / n_sce as f64;
    println!("{n_sce} scenarios, mean failures {mean_fail:.2}, max loss {:.2}", dist.max_loss());

    let periods = [2.0, 10.0, 50.0, 100.0];
    for t in periods {
        println!("  L_T(T = {t:>3}) = {:.3}", return_period_loss(&dist, t)?);
    }
    let reps = select_representatives(&set, &periods)?;
    println!("representatives {reps:?}");

    let reduced = forward_reduce(&set, k.max(reps.len()), &reps)?;
    let ids: Vec<usize> = reduced.scenarios.iter().map(|s| s.id).collect();
    println!("reduced to {} scenarios, W1 = {:.4}", ids.len(), reduction_distance(&set, &ids)?);
    for s in &reduced.scenarios {
        println!(
            "  s{:<5} failures {:>2}  ens {:>7.3} MWh  loss {:>7.3}  weight {:.4}",
            s.id,
            s.failure_count(),
            s.ens_mwh,
            s.loss,
            s.weight
        );
    }
    Ok(())
}
