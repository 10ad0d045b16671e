mod common;

use proptest::prelude::*;
use quake_restore::grid::*;
use quake_restore::seismic::FragilityCurve;

const THREE_BUS: &str = r#"{
  "buses": [
    {"id": "B1", "coords": [0, 0], "is_substation": true},
    {"id": "B2", "coords": [1, 0], "load_profile_ref": "p"},
    {"id": "B3", "coords": [2, 0], "load_profile_ref": "p", "power_factor_angle": 0.4}
  ],
  "lines": [
    {"id": "L12", "from_bus": "B1", "to_bus": "B2", "resistance": 0.01, "reactance": 0.02, "capacity_mva": 5},
    {"id": "L23", "from_bus": "B2", "to_bus": "B3", "resistance": 0.01, "reactance": 0.02, "capacity_mva": 5}
  ],
  "profiles": [{"id": "p", "hourly_p": [1.0, 2.0, 0.0, 1.5]}]
}"#;

fn with_lines(extra: &str) -> String {
    THREE_BUS.replace(
        r#""capacity_mva": 5}
  ],"#,
        &format!(r#""capacity_mva": 5}}{extra}
  ],"#),
    )
}

#[test]
fn minimal_tree_loads() {
    let net = load_network(THREE_BUS).unwrap();
    assert_eq!(net.buses.len(), 3);
    assert_eq!(net.lines.len(), 2);
    assert!((net.lines[0].length_km - 1.0).abs() < 1e-12);
    assert_eq!(net.peak_step(), 1);
    assert!(validate_radiality(&net).is_empty());
}

#[test]
fn dangling_bus_reference_is_named() {
    let doc = with_lines(r#",
    {"id": "L29", "from_bus": "B2", "to_bus": "B9", "resistance": 0.01, "reactance": 0.02, "capacity_mva": 5}"#);
    match load_network(&doc) {
        Err(e @ GridError::DanglingReference { .. }) => assert!(e.to_string().contains("B9"), "{e}"),
        other => panic!("expected dangling reference, got {other:?}"),
    }
}

#[test]
fn cycle_is_reported_with_line_ids() {
    let doc = with_lines(r#",
    {"id": "L31", "from_bus": "B3", "to_bus": "B1", "resistance": 0.01, "reactance": 0.02, "capacity_mva": 5}"#);
    match load_network(&doc) {
        Err(GridError::NonRadial(report)) => {
            assert_eq!(report.cycles.len(), 1);
            let mut ids = report.cycles[0].clone();
            ids.sort();
            assert_eq!(ids, ["L12", "L23", "L31"]);
            assert!(report.sourceless_islands.is_empty());
        }
        other => panic!("expected non-radial, got {other:?}"),
    }
}

#[test]
fn sourceless_tree_is_reported() {
    let doc = THREE_BUS.replace(
        r#"{"id": "B3", "coords": [2, 0], "load_profile_ref": "p", "power_factor_angle": 0.4}"#,
        r#"{"id": "B3", "coords": [2, 0], "load_profile_ref": "p", "power_factor_angle": 0.4},
    {"id": "X1", "coords": [9, 0], "load_profile_ref": "p"},
    {"id": "X2", "coords": [9, 1]}"#,
    );
    let doc = doc.replace(
        r#""capacity_mva": 5}
  ],"#,
        r#""capacity_mva": 5},
    {"id": "LX", "from_bus": "X1", "to_bus": "X2", "resistance": 0.01, "reactance": 0.02, "capacity_mva": 5}
  ],"#,
    );
    match load_network(&doc) {
        Err(GridError::NonRadial(report)) => {
            assert!(report.cycles.is_empty());
            assert_eq!(report.sourceless_islands, vec![vec!["X1".to_string(), "X2".to_string()]]);
        }
        other => panic!("expected non-radial, got {other:?}"),
    }
}

#[test]
fn schema_violation_names_path() {
    let doc = THREE_BUS.replace(r#""resistance": 0.01, "reactance": 0.02, "capacity_mva": 5}
  ],"#, r#""resistance": "x", "reactance": 0.02, "capacity_mva": 5}
  ],"#);
    match load_network(&doc) {
        Err(GridError::Schema { path, .. }) => assert_eq!(path, "lines[1].resistance"),
        other => panic!("expected schema error, got {other:?}"),
    }
}

#[test]
fn invariant_violations_are_rejected() {
    let cases = [
        (r#""coords": [1, 0], "load_profile_ref""#, r#""coords": [1, 0], "v_min": 0, "load_profile_ref""#),
        (r#""coords": [1, 0], "load_profile_ref""#, r#""coords": [1, 0], "v_min": 1.2, "v_max": 1.0, "load_profile_ref""#),
        (r#""power_factor_angle": 0.4"#, r#""power_factor_angle": 1.6"#),
        (r#""to_bus": "B3""#, r#""to_bus": "B2""#),
        (r#"[1.0, 2.0, 0.0, 1.5]"#, r#"[1.0, -2.0, 0.0, 1.5]"#),
    ];
    for (from, to) in cases {
        let doc = THREE_BUS.replacen(from, to, 1);
        assert_ne!(doc, THREE_BUS, "pattern {from} not found");
        assert!(load_network(&doc).is_err(), "accepted {to}");
    }
}

#[test]
fn duplicate_ids_are_rejected() {
    let doc = with_lines(r#",
    {"id": "L12", "from_bus": "B1", "to_bus": "B3", "resistance": 0.01, "reactance": 0.02, "capacity_mva": 5}"#);
    assert!(matches!(load_network(&doc), Err(GridError::DuplicateId { .. })));
}

#[test]
fn fixture_uses_class_fragility_defaults() {
    let net = common::synthetic13();
    assert_eq!(net.buses.len(), 13);
    assert_eq!(net.depots.len(), 2);
    assert!(validate_radiality(&net).is_empty());
    let mut kinds = std::collections::BTreeSet::new();
    for c in &net.components {
        let (curve, hours) = match c.kind {
            ComponentKind::Generator => (FragilityCurve::DG, 2.0),
            ComponentKind::Substation => (FragilityCurve::SUBSTATION, 2.0),
            ComponentKind::Line => (FragilityCurve::FEEDER, 1.0),
        };
        assert_eq!(c.fragility, curve, "{}", c.id);
        assert_eq!(c.repair_duration, hours);
        kinds.insert(c.kind.to_string());
    }
    assert_eq!(kinds.len(), 3);
}

#[test]
fn fragility_override_is_kept() {
    let doc = THREE_BUS.replace(
        r#""profiles""#,
        r#""components": [{"id": "C1", "kind": "line", "ref": "L12", "fragility": {"median": 0.9, "beta": 0.3}, "repair_duration": 4}],
  "profiles""#,
    );
    let net = load_network(&doc).unwrap();
    assert_eq!(net.components[0].fragility, FragilityCurve { median: 0.9, beta: 0.3 });
    assert_eq!(net.components[0].repair_duration, 4.0);
}

#[test]
fn round_trip_is_field_exact() {
    let net = common::synthetic13();
    let again = load_network(&net.to_json()).unwrap();
    assert_eq!(net, again);
    let small = load_network(THREE_BUS).unwrap();
    assert_eq!(small, load_network(&small.to_json()).unwrap());
}

#[test]
fn every_load_bus_reaches_a_source() {
    let net = common::synthetic13();
    let report = validate_radiality(&net);
    assert!(report.sourceless_islands.is_empty());
}

#[test]
fn reactive_load_follows_power_factor() {
    let net = load_network(THREE_BUS).unwrap();
    let b3 = net.bus_index("B3").unwrap();
    for t in 0..4 {
        let (p, q) = net.bus_load(b3, t);
        if p > 0.0 {
            assert!((q / p - 0.4f64.tan()).abs() < 1e-12);
        } else {
            assert_eq!(q, 0.0);
        }
    }
}

#[test]
fn profile_csv() {
    let csv = "hour,p_mw\n1,2.0\n0,1.0\n2,3.5\n";
    let p = load_profile_csv("x", csv.as_bytes()).unwrap();
    assert_eq!(p.hourly_p, vec![1.0, 2.0, 3.5]);
    assert!(p.hourly_q.is_none());
    let pq = load_profile_csv("y", "hour,p_mw,q_mvar\n0,1,0.5\n".as_bytes()).unwrap();
    assert_eq!(pq.hourly_q, Some(vec![0.5]));
    assert!(load_profile_csv("z", "hour,p_mw\n0,1\n2,1\n".as_bytes()).is_err());
    assert!(load_profile_csv("z", "hour,p_mw\n0,-1\n".as_bytes()).is_err());
}

proptest! {
    #[test]
    fn q_derivation_is_exact(phi in 0.0f64..1.5, loads in proptest::collection::vec(0.0f64..10.0, 1..24), scale in 0.0f64..5.0) {
        let profile: Vec<String> = loads.iter().map(|v| v.to_string()).collect();
        let doc = format!(
            r#"{{"buses": [{{"id": "S", "coords": [0, 0], "is_substation": true}},
                {{"id": "B", "coords": [1, 1], "power_factor_angle": {phi}, "load_profile_ref": "p", "load_scale": {scale}}}],
               "lines": [{{"id": "L", "from_bus": "S", "to_bus": "B", "resistance": 0, "reactance": 0.1, "capacity_mva": 1}}],
               "profiles": [{{"id": "p", "hourly_p": [{}]}}]}}"#,
            profile.join(",")
        );
        let net = load_network(&doc).unwrap();
        for t in 0..loads.len() {
            let (p, q) = net.bus_load(1, t);
            if p > 0.0 {
                prop_assert!((q / p - phi.tan()).abs() <= 1e-12);
            }
        }
        prop_assert_eq!(&net, &load_network(&net.to_json()).unwrap());
    }

    #[test]
    fn random_trees_are_radial(parents in proptest::collection::vec(0usize..1000, 1..30)) {
        let n = parents.len() + 1;
        let buses: Vec<String> = (0..n)
            .map(|i| format!(r#"{{"id": "B{i}", "coords": [{i}, {}]{}}}"#, i % 3, if i == 0 { r#", "is_substation": true"# } else { "" }))
            .collect();
        let lines: Vec<String> = parents
            .iter()
            .enumerate()
            .map(|(k, &p)| {
                let child = k + 1;
                format!(r#"{{"id": "L{child}", "from_bus": "B{}", "to_bus": "B{child}", "resistance": 0.01, "reactance": 0.01, "capacity_mva": 1}}"#, p % child)
            })
            .collect();
        let doc = format!(r#"{{"buses": [{}], "lines": [{}]}}"#, buses.join(","), lines.join(","));
        let net = load_network(&doc).unwrap();
        prop_assert!(validate_radiality(&net).is_empty());
        prop_assert_eq!(net.lines.len(), net.buses.len() - 1);
    }
}
