mod common;

use proptest::prelude::*;
use quake_restore::grid::{load_network, Network};
use quake_restore::powerflow::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::trees::{brute_force_shed, random_tree};

fn single_line(load: f64, capacity: f64) -> Network {
    common::feeder(&[0.0, load], capacity)
}

#[test]
fn all_operational_energizes_everything() {
    let net = common::synthetic13();
    let state = energization_state(&net, &vec![true; net.component_count()], 0).unwrap();
    assert!(state.bus.iter().all(|&b| b));
    assert!(state.line.iter().all(|&l| l));
    assert_eq!(state.operational_fraction(), 1.0);
}

#[test]
fn sourceless_island_is_dark() {
    let net = common::feeder(&[0.0, 1.0, 1.0, 1.0], 10.0);
    let mut status = vec![true; net.component_count()];
    status[1] = false; // C2: B1-B2
    let state = energization_state(&net, &status, 0).unwrap();
    assert_eq!(state.bus, vec![true, true, false, false]);
    assert_eq!(state.line, vec![true, false, false]);
}

#[test]
fn downstream_generator_keeps_island_live() {
    let doc = r#"{
        "buses": [
            {"id": "S", "coords": [0, 0], "is_substation": true},
            {"id": "A", "coords": [1, 0], "load_profile_ref": "flat", "load_scale": 1.0},
            {"id": "B", "coords": [2, 0], "load_profile_ref": "flat", "load_scale": 1.0},
            {"id": "C", "coords": [3, 0], "load_profile_ref": "flat", "load_scale": 1.0}
        ],
        "lines": [
            {"id": "SA", "from_bus": "S", "to_bus": "A", "resistance": 0.001, "reactance": 0.001, "capacity_mva": 5},
            {"id": "AB", "from_bus": "A", "to_bus": "B", "resistance": 0.001, "reactance": 0.001, "capacity_mva": 5},
            {"id": "BC", "from_bus": "B", "to_bus": "C", "resistance": 0.001, "reactance": 0.001, "capacity_mva": 5}
        ],
        "generators": [{"id": "G", "bus": "C", "p_min": 0, "p_max": 1.5, "q_min": -1, "q_max": 1}],
        "components": [
            {"id": "cSA", "kind": "line", "ref": "SA"},
            {"id": "cAB", "kind": "line", "ref": "AB"},
            {"id": "cBC", "kind": "line", "ref": "BC"},
            {"id": "cG", "kind": "generator", "ref": "G"}
        ],
        "depots": [{"id": "D", "coords": [0, 1], "crew_count": 1}],
        "profiles": [{"id": "flat", "hourly_p": [1.0]}]
    }"#;
    let net = load_network(doc).unwrap();
    let state = energization_state(&net, &[true, false, true, true], 0).unwrap();
    assert_eq!(state.bus, vec![true, true, true, true]);
    assert_eq!(state.line, vec![true, false, true]);
    // the island B-C carries 2 MW on a 1.5 MW generator
    let flow = solve_shedding_lp(&net, &state).unwrap();
    assert!((flow.total_shed_mw - 0.5).abs() < 1e-7, "{}", flow.total_shed_mw);
    // with the generator down too, B and C go dark
    let state = energization_state(&net, &[true, false, true, false], 0).unwrap();
    assert_eq!(state.bus, vec![true, true, false, false]);
    assert!(energization_state(&net, &[true, true], 0).is_err());
}

#[test]
fn uncongested_line_serves_everything() {
    let net = single_line(5.0, 10.0);
    let state = energization_state(&net, &[true], 0).unwrap();
    let flow = solve_shedding_lp(&net, &state).unwrap();
    assert!(flow.total_shed_mw.abs() < 1e-9);
    assert!((flow.p_line[0] - 5.0).abs() < 1e-9);
    assert!((flow.p_import[0] - 5.0).abs() < 1e-9);
}

#[test]
fn congested_line_sheds_the_excess() {
    let net = single_line(5.0, 3.0);
    let state = energization_state(&net, &[true], 0).unwrap();
    let flow = solve_shedding_lp(&net, &state).unwrap();
    assert!((flow.p_shed[1] - 2.0).abs() < 1e-9, "{:?}", flow.p_shed);
    assert!((flow.total_shed_mw - 2.0).abs() < 1e-9);
    assert!((flow.p_line[0] - 3.0).abs() < 1e-9);
}

#[test]
fn dark_bus_sheds_its_load() {
    let mut net = single_line(4.0, 10.0);
    net.buses[1].power_factor_angle = 0.4;
    let state = energization_state(&net, &[false], 0).unwrap();
    let flow = solve_shedding_lp(&net, &state).unwrap();
    assert_eq!(flow.p_shed[1], 4.0);
    assert!((flow.q_shed[1] - 4.0 * 0.4f64.tan()).abs() < 1e-12);
    assert_eq!(flow.v[1], None);
}

#[test]
fn triple_product_is_exact_on_all_inputs() {
    let lin = linearize_triple_product();
    for code in 0..8u8 {
        let (u1, u2, u3) = (code & 1, (code >> 1) & 1, (code >> 2) & 1);
        let feasible = lin.feasible_auxiliaries(u1, u2, u3);
        assert_eq!(feasible.len(), 1, "{u1}{u2}{u3}");
        assert_eq!(feasible[0], (u1 * u2, u1 * u2 * u3), "{u1}{u2}{u3}");
    }
}

#[test]
fn lp_matches_brute_force_on_small_trees() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let mut binding = 0;
    for case in 0..20 {
        let (net, parent) = random_tree(&mut rng, false);
        let status: Vec<bool> = (0..net.component_count()).map(|c| {
            // keep the substation up most of the time
            let p = if c + 1 == net.component_count() { 0.9 } else { 0.75 };
            rng.random_bool(p)
        }).collect();
        let state = energization_state(&net, &status, 0).unwrap();
        let lp = solve_shedding_lp(&net, &state).unwrap();
        let oracle = brute_force_shed(&net, &parent, &status);
        assert!(
            (lp.total_shed_mw - oracle).abs() <= 1e-4,
            "case {case}: lp {} oracle {oracle}",
            lp.total_shed_mw
        );
        if oracle > 0.0 {
            binding += 1;
        }
    }
    assert!(binding >= 5, "too few cases with shedding: {binding}");
}

#[test]
fn all_shed_point_keeps_lp_feasible() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let fixture = common::synthetic13();
    for i in 0..1000 {
        let owned;
        let net = if i % 2 == 0 {
            &fixture
        } else {
            owned = random_tree(&mut rng, true).0;
            &owned
        };
        let p_fail = rng.random_range(0.0..1.0);
        let status: Vec<bool> = (0..net.component_count()).map(|_| !rng.random_bool(p_fail)).collect();
        let step = rng.random_range(0..24);
        let state = energization_state(net, &status, step).unwrap();
        let flow = solve_shedding_lp(net, &state).unwrap_or_else(|e| panic!("state {i}: {e}"));
        for b in 0..net.buses.len() {
            let load = net.bus_load(b, step).0;
            assert!(flow.p_shed[b] >= -1e-9 && flow.p_shed[b] <= load + 1e-9);
        }
    }
}

#[test]
fn ens_of_one_repaired_line() {
    let net = common::feeder(&[0.0, 2.0], 10.0);
    assert_eq!(net.timestep_hours, 1.0);
    let schedule = RepairSchedule::new(vec![Some(3)]);
    let tl = ens_timeline(&net, &[true], &schedule, 0).unwrap();
    assert!((tl.ens_mwh - 6.0).abs() < 1e-9);
    assert_eq!(tl.shed_mw().len(), 4);
    assert!(tl.shed_mw()[3].abs() < 1e-9);
    assert_eq!(tl.resilience(), vec![0.0, 0.0, 0.0, 1.0]);
    assert_eq!(tl.first_full_restoration(), Some(3));
}

#[test]
fn undamaged_network_has_no_ens() {
    let net = common::synthetic13();
    let none = vec![false; net.component_count()];
    let tl = ens_timeline(&net, &none, &RepairSchedule::new(vec![None; net.component_count()]), 5).unwrap();
    assert!(tl.ens_mwh.abs() < 1e-9);
    assert!(tl.resilience().iter().all(|&r| r == 1.0));
    assert_eq!(resilience_curve(&tl), vec![(0, 1.0)]);
}

#[test]
fn resilience_counts_components() {
    let net = common::feeder(&[0.0; 11], 10.0);
    assert_eq!(net.component_count(), 10);
    let mut failures = vec![false; 10];
    let mut steps = vec![None; 10];
    for (k, c) in [2usize, 5, 7, 9].iter().enumerate() {
        failures[*c] = true;
        steps[*c] = Some(k + 1);
    }
    let tl = ens_timeline(&net, &failures, &RepairSchedule::new(steps), 0).unwrap();
    let curve: Vec<f64> = resilience_curve(&tl).into_iter().map(|p| p.1).collect();
    let expect = [0.6, 0.7, 0.8, 0.9, 1.0];
    assert_eq!(curve.len(), expect.len());
    for (a, b) in curve.iter().zip(expect) {
        assert!((a - b).abs() < 1e-12, "{curve:?}");
    }
    let mut csv = Vec::new();
    write_resilience_csv(&tl, &mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert_eq!(text.lines().next(), Some("t,resilience,shed_mw,ens_cum_mwh"));
    assert_eq!(text.lines().count(), 6);
}

#[test]
fn unscheduled_failure_is_an_error() {
    let net = common::feeder(&[0.0, 1.0], 10.0);
    let err = ens_timeline(&net, &[true], &RepairSchedule::new(vec![None]), 0).unwrap_err();
    assert!(matches!(err, PowerFlowError::Unscheduled(ref c) if c == "C1"));
}

#[test]
fn completion_times_round_up_to_steps() {
    let net = common::feeder(&[0.0, 1.0, 1.0], 10.0);
    let s = RepairSchedule::from_completions(&net, [(0, 2.3), (1, 3.0)]);
    assert_eq!(s.repair_step, vec![Some(3), Some(3)]);
    assert_eq!(s.horizon(), 4);
    assert_eq!(s.status_at(2), vec![false, false]);
    assert_eq!(s.status_at(3), vec![true, true]);
}

fn status_strategy() -> impl Strategy<Value = (Vec<bool>, usize, usize)> {
    (prop::collection::vec(any::<bool>(), 15), 0usize..15, 0usize..24)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn repairing_never_increases_shed((status, extra, step) in status_strategy()) {
        let net = common::synthetic13();
        prop_assert_eq!(net.component_count(), 15);
        let before = solve_shedding_lp(&net, &energization_state(&net, &status, step).unwrap()).unwrap();
        let mut repaired = status.clone();
        repaired[extra] = true;
        let after = solve_shedding_lp(&net, &energization_state(&net, &repaired, step).unwrap()).unwrap();
        prop_assert!(after.total_shed_mw <= before.total_shed_mw + 1e-7,
            "{} -> {}", before.total_shed_mw, after.total_shed_mw);
    }

    #[test]
    fn voltage_drop_holds_on_live_lines((status, _extra, step) in status_strategy()) {
        let net = common::synthetic13();
        let state = energization_state(&net, &status, step).unwrap();
        let flow = solve_shedding_lp(&net, &state).unwrap();
        for (l, line) in net.lines.iter().enumerate() {
            let (a, b) = net.line_ends(l);
            if state.line[l] {
                prop_assert!(state.bus[a] && state.bus[b]);
                let drop = flow.v[a].unwrap() - flow.v[b].unwrap();
                let model = line.resistance * flow.p_line[l] + line.reactance * flow.q_line[l];
                prop_assert!((drop - model).abs() <= 1e-9, "line {}: {} vs {}", l, drop, model);
                prop_assert!(flow.p_line[l].abs() <= line.capacity_mva + 1e-9);
            } else {
                prop_assert_eq!(flow.p_line[l], 0.0);
            }
        }
        for b in 0..net.buses.len() {
            let (p, _) = net.bus_load(b, step);
            prop_assert!(flow.p_shed[b] >= -1e-9 && flow.p_shed[b] <= p + 1e-9);
            prop_assert!((flow.q_shed[b] - flow.p_shed[b] * net.shed_ratio(b, step)).abs() < 1e-9);
            if !state.bus[b] {
                prop_assert_eq!(flow.p_shed[b], p);
            } else {
                let v = flow.v[b].unwrap();
                prop_assert!(v >= net.buses[b].v_min - 1e-9 && v <= net.buses[b].v_max + 1e-9);
            }
        }
    }

    #[test]
    fn restoration_curves_rise_to_one(steps in prop::collection::vec(prop::option::of(0usize..12), 15)) {
        let net = common::synthetic13();
        let failures: Vec<bool> = steps.iter().map(Option::is_some).collect();
        let tl = ens_timeline(&net, &failures, &RepairSchedule::new(steps), 0).unwrap();
        let r = tl.resilience();
        prop_assert!(r.windows(2).all(|w| w[0] <= w[1]));
        prop_assert_eq!(*r.last().unwrap(), 1.0);
        let total: f64 = tl.shed_mw().iter().sum::<f64>() * tl.timestep_hours;
        prop_assert!((tl.ens_mwh - total).abs() < 1e-9);
    }
}
