use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use zoll_core::critical::{
    classify, find_through_point, levels, make_zigzag, multistart, refine, refine_chart, RefineMode,
};
use zoll_core::loopspace::ChartCoords;
use zoll_core::manifold::random_sphere_point;
use zoll_core::vecops::{dist_euclid, normalized};
use zoll_core::{CriticalPoint, Error, Kind, LoopSpace, MetricSpec, PrimeChart, SearchConfig};

fn ellipse_circumference(a: f64, b: f64) -> f64 {
    let n = 4096;
    let h = 2.0 * PI / n as f64;
    (0..n)
        .map(|i| {
            let t = i as f64 * h;
            (a * a * t.sin().powi(2) + b * b * t.cos().powi(2)).sqrt()
        })
        .sum::<f64>()
        * h
}

fn round2() -> LoopSpace {
    LoopSpace::new(MetricSpec::round(2).build().unwrap(), 0.1, 8).unwrap()
}

fn ellipsoid(k: usize) -> LoopSpace {
    LoopSpace::new(MetricSpec::ellipsoid(&[1.0, 1.1, 1.2]).build().unwrap(), 0.1, k).unwrap()
}

/// Chart moved by a random coordinate vector of Euclidean length `size`.
fn perturb(space: &LoopSpace, chart: &PrimeChart, size: f64, seed: u64) -> PrimeChart {
    let coords = ChartCoords::new(space, chart.clone(), false);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xi: Vec<f64> = (0..coords.dim()).map(|_| rng.gen::<f64>() - 0.5).collect();
    let n = xi.iter().map(|x| x * x).sum::<f64>().sqrt();
    coords.retract(&xi.iter().map(|x| size * x / n).collect::<Vec<_>>())
}

/// Kind-specific velocity pattern and constant speed.
fn check_pattern(space: &LoopSpace, cp: &CriticalPoint) {
    let geo = space.reconstruct(&cp.config).unwrap();
    let m = &space.model;
    for i in 2..space.k() {
        assert!(geo.relative_mismatch(m, i) < 1e-5, "joint {i}");
    }
    let (c0, c1) = (geo.joint_cosine(m, 0), geo.joint_cosine(m, 1));
    match cp.kind {
        Kind::SmoothGeodesic => assert!(c0 > 0.99999 && c1 > 0.99999),
        Kind::ZigZag | Kind::GlobalMinimum => assert!(c0 < -0.99999 && c1 < -0.99999),
    }
    if cp.kind == Kind::GlobalMinimum {
        assert!((cp.energy - 4.0 * space.delta().powi(2)).abs() < 1e-9);
    }
    assert!(cp.speed_spread < 1e-6, "speed spread {}", cp.speed_spread);
}

#[test]
fn perturbed_great_circle_refines_to_the_prime_level() {
    let s = round2();
    let chart = s.sample_geodesic_chart(&[0.0, 0.6, 0.8], &[1.0, 0.0, 0.0], 2.0 * PI).unwrap();
    for seed in 0..5 {
        let init = perturb(&s, &chart, 0.05, seed);
        let cp = refine_chart(&s, &init, &SearchConfig::default()).unwrap();
        assert_eq!(cp.kind, Kind::SmoothGeodesic);
        assert!((cp.energy - 4.0 * PI * PI).abs() < 1e-6, "{}", cp.energy);
        assert!((cp.period.unwrap() - 2.0 * PI).abs() < 1e-7);
        check_pattern(&s, &cp);
    }
}

#[test]
fn start_near_the_minimum_reaches_it() {
    for mode in [RefineMode::Critical, RefineMode::Minimize] {
        let s = ellipsoid(8);
        let q0 = normalized(&[0.2, -0.5, 0.7]);
        let v0: Vec<f64> = s.model.tangent_frame(&q0)[1].iter().map(|c| 0.1 * c).collect();
        let init = perturb(&s, &s.minimum_chart(&q0, &v0), 0.02, 11);
        let search = SearchConfig {
            mode,
            ..SearchConfig::default()
        };
        let cp = refine_chart(&s, &init, &search).unwrap();
        assert_eq!(cp.kind, Kind::GlobalMinimum);
        assert!(cp.period.is_none());
        check_pattern(&s, &cp);
        if mode == RefineMode::Minimize {
            // descent never increases the energy beyond line-search slack
            assert!(cp.trace.windows(2).all(|w| w[1] <= w[0] + 1e-12), "{:?}", cp.trace);
        }
    }
}

#[test]
fn perturbed_principal_ellipse_refines_to_its_quadrature_length() {
    let s = ellipsoid(24);
    let cases = [
        ([1.0, 0.0, 0.0], [0.0, 1.0, 0.0], ellipse_circumference(1.0, 1.1)),
        ([1.0, 0.0, 0.0], [0.0, 0.0, 1.0], ellipse_circumference(1.0, 1.2)),
        ([0.0, 1.1, 0.0], [0.0, 0.0, 1.0], ellipse_circumference(1.1, 1.2)),
    ];
    for (i, (q, u, l)) in cases.into_iter().enumerate() {
        let q = normalized(&q);
        let chart = s.sample_geodesic_chart(&q, &u, l).unwrap();
        let cp = refine_chart(&s, &perturb(&s, &chart, 0.02, i as u64), &SearchConfig::default()).unwrap();
        assert_eq!(cp.kind, Kind::SmoothGeodesic);
        assert!((cp.energy - l * l).abs() < 1e-5, "{} vs {}", cp.energy, l * l);
        check_pattern(&s, &cp);
    }
}

#[test]
fn classification_of_constructed_points() {
    let s = round2();
    let q = [1.0, 0.0, 0.0];
    let u = [0.0, 1.0, 0.0];
    let smooth = s.reconstruct(&s.sample_closed_geodesic(&q, &u, 2.0 * PI).unwrap()).unwrap();
    assert_eq!(classify(&s, &smooth, 1e-6).unwrap(), Kind::SmoothGeodesic);
    let zz = s.reconstruct_chart(&s.zigzag_chart(&q, &u, 2.0 * PI).unwrap()).unwrap();
    assert_eq!(classify(&s, &zz, 1e-6).unwrap(), Kind::ZigZag);
    let min = s.reconstruct(&s.minimum_config(&q, &[0.0, 0.1, 0.0]).unwrap()).unwrap();
    assert_eq!(classify(&s, &min, 1e-6).unwrap(), Kind::GlobalMinimum);
}

#[test]
fn mixed_joint_patterns_are_unclassifiable() {
    // out along the equator to angle 1 and straight back: reversed at q0
    // and at the turning point, aligned at q1
    let s = LoopSpace::new(MetricSpec::round(2).build().unwrap(), 0.1, 5).unwrap();
    let p = |a: f64| vec![a.cos(), a.sin(), 0.0];
    let c = s.config(vec![p(0.0), p(0.1), p(0.55), p(1.0), p(0.5)]).unwrap();
    let geo = s.reconstruct(&c).unwrap();
    assert!(matches!(classify(&s, &geo, 1e-6), Err(Error::UnclassifiableCritical(_))));
    // same loop with a single reversal at q1
    let c = s.config(vec![p(0.0), p(0.1), p(-0.3), p(-0.6), p(-0.3)]).unwrap();
    let geo = s.reconstruct(&c).unwrap();
    assert!(matches!(classify(&s, &geo, 1e-6), Err(Error::UnclassifiableCritical(_))));
}

#[test]
fn zigzag_partners_satisfy_the_energy_relation() {
    let search = SearchConfig::default();
    let s = round2();
    let q = normalized(&[0.3, -0.2, 0.9]);
    let u = s.model.tangent_frame(&q)[0].clone();
    let smooth = refine(&s, &s.sample_closed_geodesic(&q, &u, 2.0 * PI).unwrap(), &search).unwrap();
    let zz = make_zigzag(&s, &smooth, &search).unwrap();
    assert_eq!(zz.kind, Kind::ZigZag);
    assert!((zz.energy - (2.0 * PI + 0.2).powi(2)).abs() < 1e-6);
    assert!((zz.energy - 42.0317).abs() < 1e-4);
    assert!((zz.energy.sqrt() - smooth.energy.sqrt() - 0.2).abs() < 1e-8);
    assert!((zz.period.unwrap() - 2.0 * PI).abs() < 1e-8);
    // same first segment: q″_0 = q′_0, q″_1 = q′_1, so Ev agrees
    assert!(dist_euclid(&zz.config.points()[0], &smooth.config.points()[0]) < 1e-9);
    assert!(dist_euclid(&zz.config.points()[1], &smooth.config.points()[1]) < 1e-9);
    assert!(dist_euclid(&zz.ev, &smooth.ev) < 1e-8);
    // the zig-zag curve leaves q1 backwards, against the direction of travel
    let geo = s.reconstruct(&zz.config).unwrap();
    assert!(s.model.inner(&zz.config.points()[1], &geo.v_plus(1), &geo.v_minus(1)) < 0.0);
    check_pattern(&s, &zz);

    let e = ellipsoid(24);
    let l = ellipse_circumference(1.0, 1.1);
    let q = [1.0, 0.0, 0.0];
    let smooth = refine(&e, &e.sample_closed_geodesic(&q, &[0.0, 1.0, 0.0], l).unwrap(), &search).unwrap();
    let zz = make_zigzag(&e, &smooth, &search).unwrap();
    assert!((zz.energy - (l + 0.2).powi(2)).abs() < 1e-5);
    assert!((zz.energy.sqrt() - smooth.energy.sqrt() - 0.2).abs() < 1e-8);
    check_pattern(&e, &zz);
}

#[test]
fn make_zigzag_needs_room_for_the_detour() {
    let s = LoopSpace::new(MetricSpec::round(2).build().unwrap(), 0.1, 6).unwrap();
    let search = SearchConfig::default();
    let smooth = refine(&s, &s.sample_closed_geodesic(&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], 2.0 * PI).unwrap(), &search).unwrap();
    // k̄(2π + 0.2) ≈ 5.08 < 6 holds, so this one is admissible
    assert!(make_zigzag(&s, &smooth, &search).is_ok());
    let s5 = LoopSpace::new(MetricSpec::round(2).build().unwrap(), 0.1, 5).unwrap();
    let smooth5 = refine(&s5, &s5.sample_closed_geodesic(&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], 2.0 * PI).unwrap(), &search).unwrap();
    assert!(matches!(make_zigzag(&s5, &smooth5, &search), Err(Error::Domain(_))));
}

#[test]
fn round_survey_has_the_prime_and_zigzag_levels() {
    let s = round2();
    let search = SearchConfig {
        window: (1.0, 50.0),
        samples: 24,
        ..SearchConfig::default()
    };
    let pts = multistart(&s, &search);
    assert!(pts.windows(2).all(|w| w[0].energy <= w[1].energy));
    for cp in &pts {
        assert!(cp.grad_norm < search.grad_tol);
        check_pattern(&s, cp);
    }
    let lv = levels(&pts, 1e-6);
    let kinds: Vec<Kind> = lv.iter().map(|l| l.kind).collect();
    assert_eq!(kinds, vec![Kind::GlobalMinimum, Kind::SmoothGeodesic, Kind::ZigZag]);
    assert!((lv[0].energy - 0.04).abs() < 1e-9);
    assert!((lv[1].energy - 4.0 * PI * PI).abs() < 1e-6);
    assert!((lv[2].energy - (2.0 * PI + 0.2).powi(2)).abs() < 1e-6);
    // minima merge into one record
    assert_eq!(lv[0].count, 1);
}

#[test]
fn narrow_window_keeps_only_minima() {
    let s = round2();
    let search = SearchConfig {
        window: (0.04, 0.04 + 1e-3),
        samples: 12,
        ..SearchConfig::default()
    };
    let pts = multistart(&s, &search);
    assert!(!pts.is_empty());
    assert!(pts.iter().all(|c| c.kind == Kind::GlobalMinimum));
}

#[test]
fn survey_is_deterministic() {
    let s = round2();
    let search = SearchConfig {
        samples: 12,
        seed: 5,
        ..SearchConfig::default()
    };
    let a = multistart(&s, &search);
    let b = multistart(&s, &search);
    assert_eq!(a, b);
}

#[test]
fn shifted_samples_of_one_geodesic_share_the_energy() {
    let s = ellipsoid(24);
    let search = SearchConfig::default();
    let l = ellipse_circumference(1.0, 1.1);
    let u0 = [0.0, 1.0, 0.0];
    let states = s
        .model
        .shoot_to_times(&[1.0, 0.0, 0.0], &u0, &(0..10).map(|j| l * j as f64 / 10.0).collect::<Vec<_>>())
        .unwrap();
    let mut energies = Vec::new();
    for (q, v) in states {
        let cp = refine(&s, &s.sample_closed_geodesic(&q, &v, l).unwrap(), &search).unwrap();
        assert_eq!(cp.kind, Kind::SmoothGeodesic);
        energies.push(cp.energy);
    }
    let (lo, hi) = energies.iter().fold((f64::MAX, f64::MIN), |(a, b), e| (a.min(*e), b.max(*e)));
    assert!(hi - lo < 1e-9, "{energies:?}");
}

#[test]
fn through_point_on_round_sphere_grid() {
    let s = round2();
    let search = SearchConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..50 {
        let q = random_sphere_point(&mut rng, 3);
        let cp = find_through_point(&s, &q, 4.0 * PI * PI, &search).unwrap().expect("hit");
        assert!(dist_euclid(&cp.config.points()[0], &q) < 1e-12);
        assert!((cp.energy - 4.0 * PI * PI).abs() < 1e-6);
    }
}

#[test]
fn through_point_on_zoll_metric() {
    let s = LoopSpace::new(MetricSpec::zoll(0.3).build().unwrap(), 0.1, 10).unwrap();
    let search = SearchConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for _ in 0..6 {
        let q = random_sphere_point(&mut rng, 3);
        // the geodesics through q close at 2π
        let u = s.model.tangent_frame(&q)[0].clone();
        let p = s.model.detect_closure(&q, &u, 10.0, 1e-6).unwrap().unwrap();
        assert!((p - 2.0 * PI).abs() < 1e-6);
        let cp = find_through_point(&s, &q, p * p, &search).unwrap().expect("hit");
        assert!(dist_euclid(&cp.config.points()[0], &q) < 1e-12);
    }
}

#[test]
fn through_generic_point_of_ellipsoid_misses_the_shortest_level() {
    let s = ellipsoid(19);
    let l = ellipse_circumference(1.0, 1.1);
    let q = normalized(&[0.5, 0.6, 0.62]);
    let search = SearchConfig {
        directions: 4,
        ..SearchConfig::default()
    };
    assert!(find_through_point(&s, &q, l * l, &search).unwrap().is_none());
}

#[test]
fn through_point_rejects_energies_outside_the_range() {
    let s = round2();
    let q = [1.0, 0.0, 0.0];
    assert!(find_through_point(&s, &q, 0.01, &SearchConfig::default()).is_err());
    assert!(find_through_point(&s, &q, 1e6, &SearchConfig::default()).is_err());
}

#[test]
fn search_config_validation() {
    assert!(SearchConfig::default().validate().is_ok());
    let bad = SearchConfig {
        grad_tol: 0.0,
        ..SearchConfig::default()
    };
    assert!(bad.validate().is_err());
    let bad = SearchConfig {
        window: (5.0, 1.0),
        ..SearchConfig::default()
    };
    assert!(bad.validate().is_err());
}
