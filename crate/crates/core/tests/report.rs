mod common;

use quake_restore::dispatch::{exact_dispatch, greedy_dispatch, ExactLimits, InstanceFamily};
use quake_restore::powerflow::{ens_timeline, RepairSchedule};
use quake_restore::report::*;

#[test]
fn gap_arithmetic() {
    assert_eq!(signed_gap(100.0, 100.0), Some(0.0));
    assert!((signed_gap(102.0, 100.0).unwrap() - 0.02).abs() < 1e-15);
    assert!((signed_gap(97.7, 100.0).unwrap() + 0.023).abs() < 1e-12);
    assert_eq!(signed_gap(0.0, 0.0), Some(0.0));
    assert_eq!(signed_gap(1.0, 0.0), None);
    assert_eq!(format_gap(0.0), "0.0%");
    assert_eq!(format_gap(0.02), "+2.0%");
    assert_eq!(format_gap(-0.023), "-2.3%");
    assert_eq!(format_gap(-0.0001), "0.0%");
}

#[test]
fn comparison_against_exact() {
    let inst = InstanceFamily::default().instance(5, 3);
    let exact = exact_dispatch(&inst, &ExactLimits::default()).unwrap();
    let (greedy, greedy_obj) = greedy_dispatch(&inst).unwrap();
    let plans = [
        SolverPlan { solver: "exact", plan: &exact.plan, seconds: Some(0.25) },
        SolverPlan { solver: "greedy", plan: &greedy, seconds: Some(0.0) },
    ];
    let report = emit_comparison(7, &inst, &plans, Some("exact")).unwrap();
    assert_eq!(report.rows.len(), 2);
    assert_eq!(report.rows[0].gap, Some(0.0));
    let expect = (greedy_obj.value - exact.objective.value) / exact.objective.value;
    assert!((report.rows[1].gap.unwrap() - expect).abs() < 1e-12);
    assert!(report.rows[1].gap.unwrap() >= 0.0);
    assert!(report.rows.iter().all(|r| r.scenario == 7));

    // a reference that is not optimal can be beaten: negative gaps survive
    let flipped = emit_comparison(7, &inst, &plans, Some("greedy")).unwrap();
    assert!(flipped.rows[0].gap.unwrap() <= 0.0);

    let csv = report.to_csv(false);
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("scenario,solver,objective,gap"));
    assert!(lines.next().unwrap().ends_with(",0.0%"));
    assert!(report.to_csv(true).starts_with("scenario,solver,objective,gap,seconds\n"));
    let text = report.to_text(true);
    assert_eq!(text.lines().count(), 3);
    assert!(text.contains("0.250"));

    // gaps only when the exact reference ran
    let no_ref = emit_comparison(7, &inst, &plans[1..], Some("exact")).unwrap();
    assert_eq!(no_ref.rows[0].gap, None);
    assert!(no_ref.to_csv(false).lines().nth(1).unwrap().ends_with(','));
}

#[test]
fn comparison_rejects_bad_input() {
    let inst = InstanceFamily::default().instance(5, 3);
    let other = InstanceFamily { min_components: 9, max_components: 9, ..InstanceFamily::default() }.instance(1, 1);
    let (plan, _) = greedy_dispatch(&inst).unwrap();
    assert!(matches!(emit_comparison(0, &inst, &[], None), Err(ReportError::Empty)));
    let bad = [SolverPlan { solver: "ga", plan: &plan, seconds: None }];
    assert!(matches!(emit_comparison(0, &other, &bad, None), Err(ReportError::Mismatch { .. })));
    let neg = [SolverPlan { solver: "ga", plan: &plan, seconds: Some(-1.0) }];
    assert!(matches!(emit_comparison(0, &inst, &neg, None), Err(ReportError::NegativeSeconds(_))));
}

#[test]
fn resilience_csv_contract() {
    let flat = resilience_csv(&[("exact".into(), vec![1.0])]).unwrap();
    assert_eq!(flat, "t,exact\n0,1\n");

    let series = vec![("exact".to_string(), vec![0.5, 0.75, 1.0]), ("ga".to_string(), vec![0.5, 1.0])];
    let csv = resilience_csv(&series).unwrap();
    assert_eq!(csv, "t,exact,ga\n0,0.5,0.5\n1,0.75,1\n2,1,1\n");
    assert_eq!(csv, resilience_csv(&series).unwrap());
    assert!(matches!(resilience_csv(&[]), Err(ReportError::Empty)));
    assert!(matches!(resilience_csv(&[("x".into(), vec![])]), Err(ReportError::Empty)));
}

#[test]
fn earlier_plan_reaches_full_service_first() {
    let net = common::feeder(&[0.0, 1.0, 1.0, 1.0], 10.0);
    let failures = vec![true, true, true];
    let fast = ens_timeline(&net, &failures, &RepairSchedule::new(vec![Some(1), Some(2), Some(3)]), 0).unwrap();
    let slow = ens_timeline(&net, &failures, &RepairSchedule::new(vec![Some(2), Some(4), Some(6)]), 0).unwrap();
    assert!(fast.first_full_restoration() < slow.first_full_restoration());
    let series = vec![("fast".to_string(), fast.resilience()), ("slow".to_string(), slow.resilience())];
    let csv = resilience_csv(&series).unwrap();
    let first_full = |col: usize| {
        csv.lines()
            .skip(1)
            .position(|l| l.split(',').nth(col) == Some("1"))
            .unwrap()
    };
    assert_eq!(first_full(1), 3);
    assert_eq!(first_full(2), 6);
    let svg = resilience_svg(&series, "a < b & c").unwrap();
    assert!(svg.starts_with("<svg"));
    assert!(svg.contains("a &lt; b &amp; c"));
    assert_eq!(svg.matches("stroke-width=\"2\"/>").count(), 4);
}
