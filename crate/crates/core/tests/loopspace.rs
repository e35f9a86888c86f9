use std::f64::consts::PI;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use zoll_core::loopspace::{config_distance, sup_energy, ChartCoords};
use zoll_core::vecops::{dist_euclid, norm};
use zoll_core::{LoopSpace, MetricSpec};

fn spaces() -> Vec<LoopSpace> {
    vec![
        LoopSpace::new(MetricSpec::round(2).build().unwrap(), 0.1, 8).unwrap(),
        LoopSpace::new(MetricSpec::round(3).build().unwrap(), 0.15, 6).unwrap(),
        LoopSpace::new(MetricSpec::ellipsoid(&[1.0, 1.1, 1.2]).build().unwrap(), 0.1, 12).unwrap(),
        LoopSpace::new(MetricSpec::zoll(0.3).build().unwrap(), 0.1, 10).unwrap(),
    ]
}

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

#[test]
fn energy_identity_and_bounds_on_random_configs() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for s in spaces() {
        let sup = s.sup_energy();
        for _ in 0..100 {
            let c = s.random_config(&mut rng, 0.2).unwrap();
            let e = c.energy();
            assert!(((e - c.telescoped_energy()) / e).abs() < 1e-12);
            assert!(e >= 4.0 * s.delta() * s.delta());
            assert!(e < sup);
            assert!(c.sigma() > 0.0);
            let t = c.breakpoints();
            assert_eq!(t[0], 0.0);
            assert_eq!(t[s.k()], 1.0);
            assert!(t.windows(2).all(|w| w[0] < w[1]));
            let ev = s.ev_map(&c).unwrap();
            assert!((ev.norm - s.delta()).abs() < 1e-9);
        }
    }
}

#[test]
fn tau_one_minimizes_the_two_variable_functional() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let s = &spaces()[2];
    for _ in 0..100 {
        let c = s.random_config(&mut rng, 0.2).unwrap();
        let t1 = c.breakpoints()[1];
        let f1 = s.f_two_var(&c, t1).unwrap();
        assert!(((f1 - c.energy()) / f1).abs() < 1e-13);
        for j in 1..=50 {
            let t = j as f64 / 51.0;
            let f = s.f_two_var(&c, t).unwrap();
            if (t - t1).abs() > 1e-6 {
                assert!(f > f1);
            }
        }
        for dt in [-0.05, 0.05] {
            if t1 + dt > 0.0 && t1 + dt < 1.0 {
                assert!(s.f_two_var(&c, t1 + dt).unwrap() > f1);
            }
        }
    }
}

#[test]
fn analytic_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for s in spaces() {
        let mut worst: f64 = 0.0;
        for _ in 0..20 {
            let c = s.random_config(&mut rng, 0.2).unwrap();
            let coords = ChartCoords::new(&s, s.chart(&c).unwrap(), false);
            let d = coords.dim();
            assert_eq!(d, s.prime_dim());
            let (_, g) = coords.gradient(&vec![0.0; d]).unwrap();
            let h = 1e-5;
            let mut fd = vec![0.0; d];
            for a in 0..d {
                let mut xi = vec![0.0; d];
                xi[a] = h;
                let ep = coords.energy(&xi).unwrap();
                xi[a] = -h;
                let em = coords.energy(&xi).unwrap();
                fd[a] = (ep - em) / (2.0 * h);
            }
            let err = dist_euclid(&g, &fd) / norm(&g);
            worst = worst.max(err);
        }
        assert!(worst < 1e-5, "{}: {worst:e}", s.model.name());
    }
}

#[test]
fn sampled_great_circle_is_critical_and_smooth() {
    let s = &spaces()[0];
    let q = [0.0, 0.6, 0.8];
    let u = [1.0, 0.0, 0.0];
    let c = s.sample_closed_geodesic(&q, &u, 2.0 * PI).unwrap();
    assert!((c.energy() - 4.0 * PI * PI).abs() < 1e-8);
    let geo = s.reconstruct(&c).unwrap();
    for i in 0..s.k() {
        assert!(geo.relative_mismatch(&s.model, i) < 1e-7);
    }
    let ev = s.ev_map(&c).unwrap();
    assert!(dist_euclid(&ev.vector, &[0.1, 0.0, 0.0]) < 1e-7);
    let coords = ChartCoords::new(s, s.chart(&c).unwrap(), false);
    let (_, g) = coords.gradient(&vec![0.0; coords.dim()]).unwrap();
    assert!(norm(&g) < 1e-6);
    // the reconstruction retraces the circle
    for t in [0.13, 0.5, 0.77] {
        let p = geo.position(&s.model, t);
        assert!(p[0].mul_add(0.0, p[1] * 0.8 - p[2] * 0.6).abs() < 1e-9);
    }
}

#[test]
fn iterated_great_circle_sample() {
    let s = LoopSpace::new(MetricSpec::round(2).build().unwrap(), 0.1, 17).unwrap();
    let c = s.sample_closed_geodesic(&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], 4.0 * PI).unwrap();
    assert!((c.energy() - 16.0 * PI * PI).abs() < 1e-8);
}

#[test]
fn principal_ellipse_sample_has_quadrature_energy() {
    let s = LoopSpace::new(MetricSpec::ellipsoid(&[1.0, 1.1, 1.2]).build().unwrap(), 0.1, 24).unwrap();
    let l = ellipse_circumference(1.0, 1.1);
    let q = [1.0, 0.0, 0.0];
    let u = s.model.normalize(&q, &[0.0, 1.0, 0.0]);
    let c = s.sample_closed_geodesic(&q, &u, l).unwrap();
    assert!((c.energy() - l * l).abs() < 1e-8);
    let geo = s.reconstruct(&c).unwrap();
    for i in 0..s.k() {
        assert!(geo.relative_mismatch(&s.model, i) < 1e-7);
    }
    let coords = ChartCoords::new(&s, s.chart(&c).unwrap(), false);
    let (_, g) = coords.gradient(&vec![0.0; coords.dim()]).unwrap();
    assert!(norm(&g) < 1e-6, "{}", norm(&g));
}

#[test]
fn minimum_config_is_critical_with_full_reversal() {
    for s in spaces() {
        let q0 = zoll_core::vecops::normalized(&vec![0.3; s.model.ambient_dim()]);
        let u = s.model.tangent_frame(&q0)[0].clone();
        let v0: Vec<f64> = u.iter().map(|c| s.delta() * c).collect();
        let c = s.minimum_config(&q0, &v0).unwrap();
        assert!((c.energy() - 4.0 * s.delta().powi(2)).abs() < 1e-10);
        let geo = s.reconstruct(&c).unwrap();
        assert!(geo.joint_cosine(&s.model, 0) < -0.999999);
        assert!(geo.joint_cosine(&s.model, 1) < -0.999999);
        let ev = s.ev_map(&c).unwrap();
        assert!(dist_euclid(&ev.vector, &v0) < 1e-9);
        let coords = ChartCoords::new(&s, s.chart(&c).unwrap(), false);
        let (_, g) = coords.gradient(&vec![0.0; coords.dim()]).unwrap();
        assert!(norm(&g) < 1e-6, "{}: {}", s.model.name(), norm(&g));
    }
}

#[test]
fn reconstruction_is_continuous_at_breakpoints() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let s = &spaces()[3];
    let c = s.random_config(&mut rng, 0.3).unwrap();
    let geo = s.reconstruct(&c).unwrap();
    let tau = c.breakpoints();
    for i in 1..s.k() {
        let left = geo.position(&s.model, tau[i] - 1e-13);
        assert!(dist_euclid(&left, &c.points()[i]) < 1e-9);
        assert!(dist_euclid(&geo.position(&s.model, tau[i]), &c.points()[i]) < 1e-15);
    }
    let poly = geo.polyline(&s.model, 5);
    assert_eq!(poly.len(), 5 * s.k() + 1);
    for (i, seg) in geo.segments().iter().enumerate() {
        assert!((seg.length - c.dists()[i]).abs() < 1e-15);
    }
}

#[test]
fn chart_round_trip_and_record() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for s in spaces() {
        let c = s.random_config(&mut rng, 0.2).unwrap();
        let back = s.config_from_chart(&s.chart(&c).unwrap()).unwrap();
        assert!(config_distance(&c, &back) < 1e-12);
        let rec = s.record(&c);
        let json = serde_json::to_string(&rec).unwrap();
        let rec2 = serde_json::from_str(&json).unwrap();
        assert_eq!(rec, rec2);
        assert_eq!(s.from_record(&rec2).unwrap(), c);
    }
}

#[test]
fn invalid_configs_are_rejected() {
    let s = &spaces()[0];
    let q0 = vec![1.0, 0.0, 0.0];
    let q1 = vec![0.2f64.cos(), 0.2f64.sin(), 0.0];
    assert!(s.config(vec![q0.clone(); 8]).is_err());
    let mut pts = vec![q0.clone(), q1];
    pts.extend(std::iter::repeat(q0).take(6));
    assert!(s.config(pts).is_err());
}

#[test]
fn sup_energy_bounds_samples() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let s = LoopSpace::new(MetricSpec::round(2).build().unwrap(), 0.1, 5).unwrap();
    assert!((sup_energy(0.1, 5, PI) - (0.1 + 2.0 * PI).powi(2)).abs() < 1e-12);
    for _ in 0..1000 {
        let noise = rng.gen::<f64>() * 0.5;
        let c = s.random_config(&mut rng, noise).unwrap();
        assert!(c.energy() < s.sup_energy());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn energy_identity_holds(seed in any::<u64>(), noise in 0.0f64..0.5) {
        let s = &spaces()[2];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = s.random_config(&mut rng, noise).unwrap();
        let e = c.energy();
        prop_assert!(((e - c.telescoped_energy()) / e).abs() < 1e-12);
        prop_assert!(e >= 4.0 * s.delta() * s.delta());
    }
}
