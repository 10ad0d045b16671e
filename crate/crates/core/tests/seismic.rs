mod common;

use proptest::prelude::*;
use quake_restore::grid::Point;
use quake_restore::rng;
use quake_restore::seismic::*;

use common::normal::{oracle_cdf, CDF_TABLE};

#[test]
fn site_distance_examples() {
    let e = |x, y, d| SeismicEvent::new(Point::new(x, y), d, 7.0);
    assert!((e(0.0, 0.0, 0.0).site_distance(Point::new(3.0, 4.0)) - 5.0).abs() < 1e-12);
    assert!((e(0.0, 0.0, 12.0).site_distance(Point::new(5.0, 0.0)) - 13.0).abs() < 1e-12);
    assert!((e(2.0, 2.0, 10.0).site_distance(Point::new(2.0, 2.0)) - 10.0).abs() < 1e-12);
}

fn custom_event(a: f64, b1: f64, b2: f64, magnitude: f64) -> SeismicEvent {
    let mut e = SeismicEvent::new(Point::new(0.0, 0.0), 0.0, magnitude);
    e.gmpe.a = a;
    e.gmpe.b1 = b1;
    e.gmpe.b2 = b2;
    e
}

#[test]
fn gmpe_closed_form() {
    let e = custom_event(-1.0, 0.5, 1.0, 7.0);
    let site = Point::new(std::f64::consts::E, 0.0);
    let pga = e.ground_motion_pga(site, "rock", 0.0).unwrap();
    // exp(-1 + 3.5 - 1 + 0)
    assert!((pga - 1.5f64.exp()).abs() < 1e-12, "{pga}");
    assert!((pga - 4.481689070338065).abs() < 1e-12);
}

#[test]
fn attenuation_is_inert_at_one_km() {
    let site = Point::new(1.0, 0.0);
    let flat = custom_event(-1.0, 0.5, 0.0, 7.0).ground_motion_pga(site, "rock", 0.0).unwrap();
    let steep = custom_event(-1.0, 0.5, 2.0, 7.0).ground_motion_pga(site, "rock", 0.0).unwrap();
    assert_eq!(flat, steep);
    let far = Point::new(2.0, 0.0);
    let flat = custom_event(-1.0, 0.5, 0.0, 7.0).ground_motion_pga(far, "rock", 0.0).unwrap();
    let steep = custom_event(-1.0, 0.5, 2.0, 7.0).ground_motion_pga(far, "rock", 0.0).unwrap();
    assert!(steep < flat);
}

#[test]
fn residual_is_multiplicative() {
    let e = SeismicEvent::new(Point::new(0.0, 0.0), 8.0, 7.5);
    let site = Point::new(14.0, -3.0);
    let base = e.ground_motion_pga(site, "soil", 0.0).unwrap();
    let shifted = e.ground_motion_pga(site, "soil", e.sigma_eps).unwrap();
    assert!((shifted / base - e.sigma_eps.exp()).abs() < 1e-12);
}

#[test]
fn unknown_site_class_is_rejected() {
    let e = SeismicEvent::new(Point::new(0.0, 0.0), 8.0, 7.5);
    assert_eq!(
        e.ground_motion_pga(Point::new(1.0, 1.0), "clay", 0.0),
        Err(SeismicError::UnknownSiteClass("clay".into()))
    );
}

#[test]
fn distance_floor_caps_near_field() {
    let e = SeismicEvent::new(Point::new(0.0, 0.0), 0.0, 7.0);
    let at = e.ground_motion_pga(Point::new(0.0, 0.0), "rock", 0.0).unwrap();
    let near = e.ground_motion_pga(Point::new(0.5, 0.0), "rock", 0.0).unwrap();
    let one = e.ground_motion_pga(Point::new(1.0, 0.0), "rock", 0.0).unwrap();
    assert!(at.is_finite());
    assert_eq!(at, one);
    assert_eq!(near, one);
}

#[test]
fn fragility_medians_give_one_half() {
    for c in [FragilityCurve::DG, FragilityCurve::SUBSTATION, FragilityCurve::FEEDER] {
        let p = failure_probability(c.median, &c).unwrap();
        assert!((p - 0.5).abs() <= 1e-9, "{c:?}: {p}");
    }
    assert_eq!((FragilityCurve::DG.median, FragilityCurve::DG.beta), (0.4, 0.6));
    assert_eq!((FragilityCurve::SUBSTATION.median, FragilityCurve::SUBSTATION.beta), (0.5, 0.5));
    assert_eq!((FragilityCurve::FEEDER.median, FragilityCurve::FEEDER.beta), (0.3, 0.7));
}

#[test]
fn fragility_one_sigma_point() {
    let dg = FragilityCurve::DG;
    let p = failure_probability(0.4 * 0.6f64.exp(), &dg).unwrap();
    assert!((p - oracle_cdf(1.0)).abs() < 1e-9);
    assert!((p - 0.841344746068543).abs() < 1e-9);
}

#[test]
fn fragility_rejects_non_positive_pga() {
    let c = FragilityCurve::FEEDER;
    assert!(failure_probability(0.0, &c).is_err());
    assert!(failure_probability(-0.1, &c).is_err());
    assert!(failure_probability(1e-12, &c).unwrap() < 1e-9);
    assert!(FragilityCurve::new(0.0, 0.5).is_err());
    assert!(FragilityCurve::new(0.3, 0.0).is_err());
}

#[test]
fn normal_cdf_matches_frozen_table() {
    for &(median, beta, ratio, expected) in CDF_TABLE {
        let curve = FragilityCurve::new(median, beta).unwrap();
        let p = failure_probability(median * ratio, &curve).unwrap();
        assert!((p - expected).abs() <= 1e-12, "median {median} ratio {ratio}: {p} vs {expected}");
    }
}

#[test]
fn normal_cdf_matches_series_oracle() {
    // pga/median over [0.01, 100] for the three class curves.
    let mut worst: f64 = 0.0;
    for beta in [0.5, 0.6, 0.7] {
        for k in 0..=4000 {
            let ratio = 10f64.powf(-2.0 + 4.0 * k as f64 / 4000.0);
            let x = ratio.ln() / beta;
            worst = worst.max((normal_cdf(x) - oracle_cdf(x)).abs());
        }
    }
    assert!(worst <= 1e-12, "max abs error {worst}");
}

#[test]
fn sample_damage_extremes() {
    let mut r = rng::stream(3, 0);
    assert!(sample_failures(&[0.0; 20], &mut r).iter().all(|&f| !f));
    assert!(sample_failures(&[1.0; 20], &mut r).iter().all(|&f| f));
}

#[test]
fn sample_damage_binomial_concentration() {
    let n = 10_000;
    for p in [0.1, 0.5, 0.9] {
        let mut r = rng::stream(42, (p * 10.0) as u64);
        let hits = (0..n).filter(|_| sample_failures(&[p], &mut r)[0]).count();
        let freq = hits as f64 / n as f64;
        let band = 3.0 * (p * (1.0 - p) / n as f64).sqrt();
        assert!((freq - p).abs() <= band, "p {p}: {freq}");
    }
}

#[test]
fn sample_damage_is_deterministic_and_covers_network() {
    let net = common::synthetic13();
    let e = SeismicEvent::new(Point::new(-5.0, -5.0), 10.0, 7.5);
    let draw = |seed| {
        let mut r = rng::stream(seed, 1);
        let field = PgaField::sample(&net, &e, &mut r).unwrap();
        sample_damage(&net, &field, &mut r).unwrap()
    };
    let a = draw(9);
    assert_eq!(a, draw(9));
    assert_eq!(a.failures.len(), net.component_count());
    assert!(a.pga.as_ref().unwrap().iter().all(|&p| p > 0.0));
}

#[test]
fn missing_pga_entry_is_rejected() {
    let net = common::synthetic13();
    let field = PgaField { magnitude: 7.0, pga: vec![0.2; 3] };
    assert!(matches!(field.failure_probabilities(&net), Err(SeismicError::MissingPga(_))));
}

#[test]
fn magnitude_ordering_per_component() {
    let net = common::synthetic13();
    let e = SeismicEvent::new(Point::new(-12.0, -14.0), 10.0, 6.5);
    let mut prev: Option<Vec<f64>> = None;
    for m in [6.5, 7.5, 8.5] {
        let p = PgaField::median(&net, &e.with_magnitude(m)).unwrap().failure_probabilities(&net).unwrap();
        if let Some(q) = &prev {
            assert!(p.iter().zip(q).all(|(a, b)| a >= b));
        }
        prev = Some(p);
    }
}

#[test]
fn event_validation() {
    let ok = SeismicEvent::new(Point::new(0.0, 0.0), 5.0, 7.0);
    assert!(ok.validate().is_ok());
    assert!(SeismicEvent { focal_depth: -1.0, ..ok.clone() }.validate().is_err());
    assert!(ok.with_magnitude(3.9).validate().is_err());
    assert!(ok.with_magnitude(10.1).validate().is_err());
    assert!(SeismicEvent { sigma_eps: -0.1, ..ok.clone() }.validate().is_err());
    let mut neg = ok.clone();
    neg.gmpe.b2 = -0.5;
    assert!(neg.validate().is_err());
}

proptest! {
    #[test]
    fn pga_non_increasing_in_distance(d1 in 0.0f64..200.0, extra in 0.0f64..200.0, depth in 0.0f64..30.0, m in 4.0f64..10.0) {
        let e = SeismicEvent::new(Point::new(0.0, 0.0), depth, m);
        let near = e.ground_motion_pga(Point::new(d1, 0.0), "rock", 0.0).unwrap();
        let far = e.ground_motion_pga(Point::new(d1 + extra, 0.0), "rock", 0.0).unwrap();
        prop_assert!(far <= near);
    }

    #[test]
    fn fragility_monotone_in_pga(a in 1e-4f64..10.0, b in 1e-4f64..10.0, median in 0.05f64..2.0, beta in 0.05f64..2.0) {
        let c = FragilityCurve::new(median, beta).unwrap();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let (p_lo, p_hi) = (failure_probability(lo, &c).unwrap(), failure_probability(hi, &c).unwrap());
        prop_assert!(p_lo <= p_hi);
        prop_assert!((0.0..=1.0).contains(&p_lo) && (0.0..=1.0).contains(&p_hi));
    }

    #[test]
    fn failure_probability_non_decreasing_in_magnitude(x in -30.0f64..30.0, y in -30.0f64..30.0, m in 4.0f64..9.5, dm in 0.0f64..0.5) {
        let e = SeismicEvent::new(Point::new(0.0, 0.0), 10.0, m);
        let c = FragilityCurve::FEEDER;
        let site = Point::new(x, y);
        let lo = failure_probability(e.ground_motion_pga(site, "soil", 0.0).unwrap(), &c).unwrap();
        let hi = failure_probability(e.with_magnitude(m + dm).ground_motion_pga(site, "soil", 0.0).unwrap(), &c).unwrap();
        prop_assert!(lo <= hi);
    }
}
