//! Builds a crew-dispatch instance from a damage scenario and compares the
//! exact solver, the greedy heuristic and the genetic algorithm.
//!
//! cargo run --release --example dispatch_solvers

use std::path::PathBuf;
use std::time::Instant;

use quake_restore::dispatch::{
    build_instance, exact_dispatch, greedy_dispatch, singleton_curtailment, ExactLimits, DEFAULT_GAMMA,
    DEFAULT_SPEED_KMH,
};
use quake_restore::ga::{ga_dispatch, GaConfig};
use quake_restore::grid::{load_network_file, Point};
use quake_restore::report::{emit_comparison, SolverPlan};
use quake_restore::scenario::{generate_scenarios, EnsMode, LossWeights};
use quake_restore::seismic::SeismicEvent;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let net = load_network_file(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/synthetic13.json"))?;
    let event = SeismicEvent::new(Point::new(-12.0, -14.0), 10.0, 8.0);
    let set = generate_scenarios(&net, &event, 200, LossWeights::default(), EnsMode::Surrogate, 3)?;
    let worst = set
        .scenarios
        .iter()
        .max_by(|a, b| a.failure_count().cmp(&b.failure_count()).then(b.id.cmp(&a.id)))
        .expect("non-empty set");
    let curtailment = singleton_curtailment(&net)?;
    let inst = build_instance(&net, worst, &curtailment, DEFAULT_GAMMA, DEFAULT_SPEED_KMH);
    println!("scenario {} with {} failed components", worst.id, inst.failed.len());

    let t = Instant::now();
    let exact = exact_dispatch(&inst, &ExactLimits::default())?;
    let exact_s = t.elapsed().as_secs_f64();
    let t = Instant::now();
    let (greedy, _) = greedy_dispatch(&inst)?;
    let greedy_s = t.elapsed().as_secs_f64();
    let t = Instant::now();
    let ga = ga_dispatch(&inst, &GaConfig::default())?;
    let ga_s = t.elapsed().as_secs_f64();

    let report = emit_comparison(
        worst.id,
        &inst,
        &[
            SolverPlan { solver: "exact", plan: &exact.plan, seconds: Some(exact_s) },
            SolverPlan { solver: "greedy", plan: &greedy, seconds: Some(greedy_s) },
            SolverPlan { solver: "ga", plan: &ga.plan, seconds: Some(ga_s) },
        ],
        Some("exact"),
    )?;
    print!("{}", report.to_text(true));

    for r in &exact.plan.routes {
        let jobs: Vec<&str> = r.jobs.iter().map(|&j| inst.failed[j].id.as_str()).collect();
        println!("{} crew {}: {}", inst.depots[r.depot].id, r.crew, jobs.join(" -> "));
    }
    Ok(())
}
