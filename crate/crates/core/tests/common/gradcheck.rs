use quake_restore::dispatch::InstanceFamily;
use quake_restore::policy::*;
use quake_restore::rng;
use rand::Rng as _;

pub fn small_batch(model: &PolicyModel, count: u64) -> Vec<EpisodeBuffer> {
    let fam = InstanceFamily {
        min_components: 3,
        max_components: 5,
        ..InstanceFamily::default()
    };
    (0..count)
        .map(|i| collect_episode(model, fam.instance(51, i), &mut rng::stream(51, i)).unwrap())
        .collect()
}

/// Largest relative error between the analytic loss gradient of a tiny
/// model and central differences, over `probes` random parameters, with
/// the name of the worst tensor.
pub fn max_gradient_error(
    cfg: &PpoConfig,
    targets_of: impl Fn(&[EpisodeBuffer]) -> Vec<Targets>,
    probes: usize,
    seed: u64,
) -> (f64, String) {
    let model = PolicyModel::new(ModelConfig::tiny()).unwrap();
    let mut batch = small_batch(&model, 3);
    let mut r = rng::stream(seed, 0);
    // move the behaviour log-probs off the current policy so ratios differ from 1
    for ep in &mut batch {
        ep.log_probs.iter_mut().for_each(|l| *l += r.random_range(-0.3..0.3));
    }
    let targets = targets_of(&batch);
    let (_, grads) = ppo_loss(&model, &batch, &targets, cfg, true).unwrap();
    let grads = grads.unwrap();
    let h = 1e-5;
    let mut worst = (0.0, String::new());
    for _ in 0..probes {
        let ti = r.random_range(0..model.params.len());
        let k = r.random_range(0..model.params.tensors[ti].data.len());
        let eval = |delta: f64| {
            let mut m = model.clone();
            m.params.tensors[ti].data[k] += delta;
            ppo_loss(&m, &batch, &targets, cfg, false).unwrap().0.total
        };
        let numeric = (eval(h) - eval(-h)) / (2.0 * h);
        let analytic = grads[ti].data[k];
        let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6);
        if rel > worst.0 {
            worst = (rel, format!("{}[{k}]", model.params.names[ti]));
        }
    }
    worst
}
