//! Trains the attention policy with PPO on random small instances, saves a
//! checkpoint and reports the gap to the exact solver on held-out
//! instances.
//!
//! cargo run --release --example train_policy -- [iterations] [checkpoint.json]

use std::path::PathBuf;
use std::time::Instant;

use quake_restore::dispatch::{exact_dispatch, ExactLimits, InstanceFamily};
use quake_restore::policy::{policy_dispatch, ppo_train_on, save_checkpoint, ModelConfig, PolicyModel, PpoConfig};

fn held_out_gaps(model: &PolicyModel, family: &InstanceFamily) -> Result<(f64, f64), Box<dyn std::error::Error>> {
    let mut gaps = Vec::new();
    for i in 0..50 {
        let inst = family.instance(2027, i);
        let exact = exact_dispatch(&inst, &ExactLimits::default())?.objective.value;
        let pol = policy_dispatch(model, &inst, 17, i)?;
        gaps.push((pol.objective.value - exact) / exact);
    }
    gaps.sort_by(f64::total_cmp);
    Ok((gaps[25], gaps[45]))
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let iterations: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(100);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "policy.json".into()));

    let family = InstanceFamily::default();
    let mut model = PolicyModel::new(ModelConfig::default())?;
    let (median, p90) = held_out_gaps(&model, &family)?;
    println!("untrained: median gap {:.2}%, p90 {:.2}%", 100.0 * median, 100.0 * p90);

    let cfg = PpoConfig { iterations, seed: 7, ..PpoConfig::default() };
    let t = Instant::now();
    let trace = ppo_train_on(&mut model, &family, &cfg, |i, tr| {
        if i % 25 == 0 {
            println!("iteration {i:>4}  mean reward {:.4}  {:.0} s", tr.mean_reward[i], t.elapsed().as_secs_f64());
        }
    })?;
    model.meta.gamma = Some(family.gamma);
    model.meta.family = Some(family.clone());
    println!("trained {} iterations in {:.0} s", trace.mean_reward.len(), t.elapsed().as_secs_f64());

    let (median, p90) = held_out_gaps(&model, &family)?;
    println!("trained:   median gap {:.2}%, p90 {:.2}%", 100.0 * median, 100.0 * p90);
    save_checkpoint(&model, &out)?;
    println!("wrote {}", out.display());
    Ok(())
}
