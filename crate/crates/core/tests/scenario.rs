mod common;

use proptest::prelude::*;
use quake_restore::grid::Point;
use quake_restore::scenario::*;
use quake_restore::seismic::SeismicEvent;

fn scenario(id: usize, loss: f64, weight: f64) -> DamageScenario {
    DamageScenario {
        id,
        failures: vec![],
        pga: None,
        loss,
        ens_mwh: 0.0,
        weight,
    }
}

fn set_of(points: &[(f64, f64)]) -> ScenarioSet {
    ScenarioSet {
        magnitude: 7.0,
        n_sce: points.len(),
        seed: 0,
        component_ids: vec![],
        reduced_from: None,
        scenarios: points.iter().enumerate().map(|(i, &(l, w))| scenario(i, l, w)).collect(),
    }
}

fn uniform(losses: &[f64]) -> ScenarioSet {
    let w = 1.0 / losses.len() as f64;
    set_of(&losses.iter().map(|&l| (l, w)).collect::<Vec<_>>())
}

fn with_failures(n: usize, failed: usize) -> DamageScenario {
    let mut s = scenario(0, 0.0, 1.0);
    s.failures = (0..n).map(|i| i < failed).collect();
    s
}

/// Reference Wasserstein for nearest-loss reassignment: Σ w_i |L_i − L_nearest|.
fn transport_cost(set: &ScenarioSet, retained: &[usize]) -> f64 {
    let total = set.total_weight();
    set.scenarios
        .iter()
        .map(|s| {
            let d = retained
                .iter()
                .map(|&r| (s.loss - set.get(r).unwrap().loss).abs())
                .fold(f64::INFINITY, f64::min);
            s.weight / total * d
        })
        .sum()
}

#[test]
fn system_loss_examples() {
    let w = |w1, w2| LossWeights { w1, w2 };
    assert_eq!(system_loss(&with_failures(5, 0), 0.0, w(1.0, 1.0)).unwrap(), 0.0);
    assert_eq!(system_loss(&with_failures(10, 7), 123.0, w(1.0, 0.0)).unwrap(), 7.0);
    assert_eq!(system_loss(&with_failures(4, 3), 6.0, w(2.0, 0.5)).unwrap(), 9.0);
    assert!(matches!(
        system_loss(&with_failures(4, 3), 6.0, w(-1.0, 0.5)),
        Err(ScenarioError::LossWeights { .. })
    ));
}

#[test]
fn return_period_examples() {
    let losses: Vec<f64> = (1..=100).map(f64::from).collect();
    let dist = uniform(&losses).loss_distribution().unwrap();
    assert_eq!(return_period_loss(&dist, 100.0).unwrap(), 100.0);
    assert_eq!(return_period_loss(&dist, 1.0).unwrap(), 1.0);
    // sort-and-scan: Pr[L ≥ l] = (101 − l)/100 ≤ 1/10 first at l = 91
    assert_eq!(return_period_loss(&dist, 10.0).unwrap(), 91.0);
    // granularity coarser than 1/T
    assert_eq!(return_period_loss(&dist, 1e6).unwrap(), 100.0);

    let flat = uniform(&[4.5; 7]).loss_distribution().unwrap();
    for t in [1.0, 2.0, 50.0, 1e4] {
        assert_eq!(return_period_loss(&flat, t).unwrap(), 4.5);
    }
    assert_eq!(return_period_loss(&flat, 0.5), Err(ScenarioError::ReturnPeriod(0.5)));
    assert_eq!(LossDistribution::new(Vec::<(f64, f64)>::new()), Err(ScenarioError::Empty));
}

#[test]
fn representative_examples() {
    let single = uniform(&[3.0]);
    assert_eq!(select_representatives(&single, &[2.0, 10.0, 100.0]).unwrap(), vec![0]);

    let set = uniform(&[10.0, 20.0, 30.0]);
    // T = 2: Pr[L ≥ 20] = 2/3 > 1/2, Pr[L ≥ 30] = 1/3, so L_T = 30
    assert_eq!(select_representatives(&set, &[2.0]).unwrap(), vec![2]);
    assert_eq!(select_representatives(&set, &[1.0]).unwrap(), vec![0]);

    // equal distance to L_T: heavier scenario wins, then lower id
    let tie = set_of(&[(5.0, 0.2), (5.0, 0.8), (9.0, 0.0)]);
    assert_eq!(select_representatives(&tie, &[1.0]).unwrap(), vec![1]);
    let same = set_of(&[(5.0, 0.5), (5.0, 0.5)]);
    assert_eq!(select_representatives(&same, &[2.0, 100.0]).unwrap(), vec![0]);
}

#[test]
fn representatives_use_nearest_loss() {
    // L_T for T = 4 on {10, 20, 30, 40}: Pr[L ≥ 40] = 1/4, so 40
    let set = uniform(&[10.0, 20.0, 30.0, 40.0]);
    assert_eq!(select_representatives(&set, &[4.0, 1.0]).unwrap(), vec![3, 0]);
}

#[test]
fn forward_reduce_identity_at_full_size() {
    let set = set_of(&[(1.0, 0.1), (4.0, 0.3), (2.0, 0.4), (9.0, 0.2)]);
    let out = forward_reduce(&set, 4, &[]).unwrap();
    assert_eq!(out.scenarios.len(), 4);
    for (a, b) in out.scenarios.iter().zip(&set.scenarios) {
        assert_eq!(a.id, b.id);
        assert!((a.weight - b.weight).abs() < 1e-12);
    }
    assert_eq!(out.reduced_from, Some(4));
    assert!(reduction_distance(&set, &[0, 1, 2, 3]).unwrap().abs() < 1e-12);
}

#[test]
fn forward_reduce_two_point_masses() {
    for (w0, expect) in [(0.3, 1), (0.7, 0), (0.55, 0)] {
        let set = set_of(&[(0.0, w0), (10.0, 1.0 - w0)]);
        // keeping id 0 costs (1 − w0)·10, keeping id 1 costs w0·10
        let cost = |keep: usize| transport_cost(&set, &[keep]);
        let oracle = if cost(0) <= cost(1) { 0 } else { 1 };
        assert_eq!(oracle, expect);
        let out = forward_reduce(&set, 1, &[]).unwrap();
        assert_eq!(out.scenarios.len(), 1);
        assert_eq!(out.scenarios[0].id, expect);
        assert!((out.scenarios[0].weight - 1.0).abs() < 1e-12);
    }
}

#[test]
fn forward_reduce_keeps_protected() {
    let set = uniform(&[0.0, 1.0, 2.0, 3.0, 50.0, 51.0]);
    let out = forward_reduce(&set, 2, &[4]).unwrap();
    let ids: Vec<usize> = out.scenarios.iter().map(|s| s.id).collect();
    assert!(ids.contains(&4));
    assert_eq!(ids.len(), 2);
    assert!(matches!(forward_reduce(&set, 1, &[0, 4]), Err(ScenarioError::TargetSize { .. })));
    assert!(matches!(forward_reduce(&set, 7, &[]), Err(ScenarioError::TargetSize { .. })));
    assert!(matches!(forward_reduce(&set, 0, &[]), Err(ScenarioError::TargetSize { .. })));
    assert_eq!(forward_reduce(&set, 2, &[99]).unwrap_err(), ScenarioError::UnknownScenario(99));
}

#[test]
fn wasserstein_matches_transport_cost() {
    let set = set_of(&[(0.0, 0.2), (3.0, 0.2), (4.0, 0.1), (10.0, 0.5)]);
    for retained in [vec![0], vec![3], vec![1, 3], vec![0, 2, 3]] {
        let d = reduction_distance(&set, &retained).unwrap();
        assert!((d - transport_cost(&set, &retained)).abs() < 1e-12, "{retained:?}");
    }
    let a = [(0.0, 1.0)];
    let b = [(2.5, 3.0)];
    assert!((wasserstein_1d(&a, &b) - 2.5).abs() < 1e-12);
}

#[test]
fn generation_is_deterministic() {
    let net = common::synthetic13();
    let event = SeismicEvent::new(Point::new(-12.0, -14.0), 10.0, 7.0);
    let gen = || generate_scenarios(&net, &event, 100, LossWeights::default(), EnsMode::Surrogate, 7).unwrap();
    let (a, b) = (gen(), gen());
    assert_eq!(a, b);
    assert_eq!(a.scenarios.len(), 100);
    assert!((a.total_weight() - 1.0).abs() < 1e-9);
    for s in &a.scenarios {
        assert_eq!(s.failures.len(), net.component_count());
        assert!((s.weight - 0.01).abs() < 1e-15);
        assert!(s.loss >= 0.0);
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
    assert_eq!(pool.install(gen), a);
}

#[test]
fn unbreakable_network_scores_zero() {
    let mut net = common::synthetic13();
    for c in &mut net.components {
        c.fragility.median = 1e12;
    }
    let event = SeismicEvent::new(Point::new(0.0, 0.0), 10.0, 7.0);
    for mode in [EnsMode::Surrogate, EnsMode::Exact] {
        let set = generate_scenarios(&net, &event, 1, LossWeights::default(), mode, 3).unwrap();
        assert_eq!(set.scenarios.len(), 1);
        let s = &set.scenarios[0];
        assert_eq!(s.failure_count(), 0);
        assert_eq!(s.ens_mwh, 0.0);
        assert_eq!(s.loss, 0.0);
        assert_eq!(s.weight, 1.0);
    }
    assert!(generate_scenarios(&net, &event, 0, LossWeights::default(), EnsMode::Surrogate, 3).is_err());
}

#[test]
fn larger_magnitude_breaks_more() {
    let net = common::synthetic13();
    let mean_failures = |m: f64| {
        let event = SeismicEvent::new(Point::new(-12.0, -14.0), 10.0, m);
        let set = generate_scenarios(&net, &event, 10_000, LossWeights::default(), EnsMode::Surrogate, 5).unwrap();
        set.scenarios.iter().map(|s| s.failure_count() as f64).sum::<f64>() / 10_000.0
    };
    let (low, high) = (mean_failures(6.5), mean_failures(8.5));
    assert!(high > low, "{high} vs {low}");
}

#[test]
fn exact_ens_mode_is_consistent() {
    let net = common::synthetic13();
    let event = SeismicEvent::new(Point::new(-12.0, -14.0), 10.0, 7.5);
    let surrogate = generate_scenarios(&net, &event, 30, LossWeights::default(), EnsMode::Surrogate, 9).unwrap();
    let exact = generate_scenarios(&net, &event, 30, LossWeights::default(), EnsMode::Exact, 9).unwrap();
    for (a, b) in surrogate.scenarios.iter().zip(&exact.scenarios) {
        // same damage draws, only the ENS estimate differs
        assert_eq!(a.failures, b.failures);
        assert!(b.ens_mwh >= 0.0);
        if b.failure_count() == 0 {
            assert_eq!(b.ens_mwh, 0.0);
        }
    }
}

#[test]
fn document_round_trip() {
    let net = common::synthetic13();
    let event = SeismicEvent::new(Point::new(-12.0, -14.0), 10.0, 7.5);
    let set = generate_scenarios(&net, &event, 20, LossWeights::default(), EnsMode::Surrogate, 2).unwrap();
    let back = parse_scenario_set(&set.to_json()).unwrap();
    assert_eq!(back.scenarios.len(), set.scenarios.len());
    for (a, b) in set.scenarios.iter().zip(&back.scenarios) {
        assert_eq!((a.id, &a.failures, a.loss, a.ens_mwh, a.weight), (b.id, &b.failures, b.loss, b.ens_mwh, b.weight));
    }
    back.check_network(&net).unwrap();
    let mut doc = set.to_document();
    doc.scenarios[0].failed.push("nope".into());
    assert_eq!(doc.into_set().unwrap_err(), ScenarioError::UnknownComponent("nope".into()));
}

fn weighted_points() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((0.0f64..100.0, 0.01f64..1.0), 1..40)
}

proptest! {
    #[test]
    fn loss_cdf_is_valid(points in weighted_points()) {
        let dist = LossDistribution::new(points.clone()).unwrap();
        let lo = dist.losses[0];
        prop_assert_eq!(dist.cdf(lo - 1.0), 0.0);
        prop_assert_eq!(dist.cdf(dist.max_loss()), 1.0);
        prop_assert!((dist.weights.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        let mut prev = 0.0;
        for x in (-10..=110).map(|i| i as f64) {
            let f = dist.cdf(x);
            prop_assert!(f + 1e-12 >= prev);
            prop_assert!((0.0..=1.0).contains(&f));
            prev = f;
        }
        // right-continuity at support points
        for &l in &dist.losses {
            prop_assert!((dist.cdf(l) - dist.cdf(l + 1e-9)).abs() < 1e-12);
        }
    }

    #[test]
    fn return_period_is_monotone(points in weighted_points(), mut ts in prop::collection::vec(1.0f64..1000.0, 2..8)) {
        let dist = LossDistribution::new(points).unwrap();
        ts.sort_by(f64::total_cmp);
        let levels: Vec<f64> = ts.iter().map(|&t| return_period_loss(&dist, t).unwrap()).collect();
        for w in levels.windows(2) {
            prop_assert!(w[0] <= w[1]);
        }
    }

    #[test]
    fn reduction_conserves_weight_and_improves_with_k(points in prop::collection::vec((0.0f64..100.0, 0.01f64..1.0), 2..30)) {
        let set = set_of(&points);
        let n = points.len();
        let mut prev = f64::INFINITY;
        for k in 1..=n {
            let out = forward_reduce(&set, k, &[]).unwrap();
            prop_assert_eq!(out.scenarios.len(), k);
            prop_assert!((out.total_weight() - 1.0).abs() < 1e-9);
            prop_assert!(out.scenarios.iter().all(|s| s.weight >= 0.0));
            let ids: Vec<usize> = out.scenarios.iter().map(|s| s.id).collect();
            let d = reduction_distance(&set, &ids).unwrap();
            prop_assert!(d <= prev + 1e-12, "k={} d={} prev={}", k, d, prev);
            prev = d;
        }
        prop_assert!(prev.abs() < 1e-9);
    }
}
