use std::f64::consts::PI;

use nalgebra::DMatrix;
use proptest::prelude::*;
use zoll_core::critical::{make_zigzag, refine, refine_chart};
use zoll_core::morse::{
    geodesic_oracle, hessian, index_nullity, iterate_index_expected, iterate_nullity_expected, spectral_report,
    uniform_discretization_index, uniform_samples, DEFAULT_HESSIAN_STEP, DEFAULT_ZERO_TOL,
};
use zoll_core::vecops::normalized;
use zoll_core::{CriticalPoint, LoopSpace, MetricSpec, SearchConfig};

fn great_circle(n: usize, m: usize, k: usize) -> (LoopSpace, CriticalPoint) {
    let s = LoopSpace::new(MetricSpec::round(n).build().unwrap(), 0.1, k).unwrap();
    let mut q = vec![0.0; n + 1];
    q[0] = 0.6;
    q[n] = 0.8;
    let mut u = vec![0.0; n + 1];
    u[1] = 1.0;
    let c = s.sample_closed_geodesic(&q, &u, 2.0 * PI * m as f64).unwrap();
    let cp = refine(&s, &c, &SearchConfig::default()).unwrap();
    (s, cp)
}

fn minimum(n: usize) -> (LoopSpace, CriticalPoint) {
    let s = LoopSpace::new(MetricSpec::round(n).build().unwrap(), 0.1, 8).unwrap();
    let q = normalized(&vec![1.0; n + 1]);
    let v: Vec<f64> = s.model.tangent_frame(&q)[0].iter().map(|c| 0.1 * c).collect();
    let cp = refine(&s, &s.minimum_config(&q, &v).unwrap(), &SearchConfig::default()).unwrap();
    (s, cp)
}

#[test]
fn minimum_set_is_a_copy_of_the_unit_tangent_bundle() {
    for n in [2, 3] {
        let (s, cp) = minimum(n);
        let r = spectral_report(&s, &cp, DEFAULT_ZERO_TOL).unwrap();
        assert_eq!(r.index, 0);
        assert_eq!(r.kernel, 2 * n - 1);
        assert_eq!(r.dim(), s.prime_dim());
    }
}

#[test]
fn prime_great_circle_indices() {
    for (n, ind) in [(2, 1), (3, 2)] {
        let (s, cp) = great_circle(n, 1, 8);
        let r = spectral_report(&s, &cp, DEFAULT_ZERO_TOL).unwrap();
        assert_eq!((r.index, r.kernel), (ind, 2 * n - 1), "n = {n}");
        assert_eq!(r.index + r.kernel + r.positive, (2 * n - 1) + (s.k() - 2) * n);
        assert!(r.asymmetry.unwrap() < 1e-5);
        assert!(!r.gap_warning);
    }
}

#[test]
fn iterates_follow_the_bott_formula() {
    for n in [2, 3] {
        for (m, k) in [(1, 8), (2, 17), (3, 38)] {
            let (s, cp) = great_circle(n, m, k);
            let r = spectral_report(&s, &cp, DEFAULT_ZERO_TOL).unwrap();
            assert_eq!(r.index, iterate_index_expected(n - 1, m, n), "n = {n}, m = {m}");
            assert_eq!(r.kernel, iterate_nullity_expected(n) + 1);
        }
    }
}

#[test]
fn iterate_formula_values() {
    assert_eq!(iterate_index_expected(1, 3, 2), 5);
    assert_eq!(iterate_index_expected(7, 1, 4), 7);
    for n in 2..6 {
        for m in 1..5 {
            assert_eq!(iterate_index_expected(n - 1, m, n), (2 * m - 1) * (n - 1));
        }
    }
    assert_eq!(iterate_nullity_expected(3), 4);
}

#[test]
fn uniform_discretization_of_great_circles() {
    let m = MetricSpec::round(2).build().unwrap();
    let q = [1.0, 0.0, 0.0];
    let u = [0.0, 1.0, 0.0];
    for (iter, count, ind) in [(1usize, 8usize, 1usize), (2, 16, 3)] {
        let pts = uniform_samples(&m, &q, &u, 2.0 * PI * iter as f64, count).unwrap();
        let theta = (0..=count).map(|i| i as f64 / count as f64).collect();
        let r = uniform_discretization_index(&m, pts, theta, DEFAULT_ZERO_TOL).unwrap();
        assert_eq!((r.index, r.kernel), (ind, 3));
        assert_eq!(r.dim(), 2 * count);
    }
}

#[test]
fn loop_space_index_matches_the_discretization_oracle() {
    let search = SearchConfig::default();
    let e = LoopSpace::new(MetricSpec::ellipsoid(&[1.0, 1.1, 1.2]).build().unwrap(), 0.1, 24).unwrap();
    let starts = [
        ([1.0, 0.0, 0.0], [0.0, 1.0, 0.0]),
        ([1.0, 0.0, 0.0], [0.0, 0.0, 1.0]),
        ([0.0, 1.0, 0.0], [0.0, 0.0, 1.0]),
    ];
    for (i, (q, u)) in starts.into_iter().enumerate() {
        let u = e.model.normalize(&q, &u);
        let l = e.model.detect_closure(&q, &u, 9.0, 1e-8).unwrap().unwrap();
        let cp = refine_chart(&e, &e.sample_geodesic_chart(&q, &u, l).unwrap(), &search).unwrap();
        let r = spectral_report(&e, &cp, DEFAULT_ZERO_TOL).unwrap();
        let o = geodesic_oracle(&e, &cp, 24, DEFAULT_ZERO_TOL).unwrap();
        assert_eq!((r.index, r.kernel), (o.index, o.kernel), "ellipse {i}");
        // short, middle and long ellipse
        assert_eq!((r.index, r.kernel), (i + 1, 1));
    }
}

#[test]
fn zigzag_index_dominates_its_smooth_partner() {
    let search = SearchConfig::default();
    let mut pairs = Vec::new();
    for n in [2, 3] {
        let (s, cp) = great_circle(n, 1, 8);
        pairs.push((s, cp));
    }
    let e = LoopSpace::new(MetricSpec::ellipsoid(&[1.0, 1.1, 1.2]).build().unwrap(), 0.1, 24).unwrap();
    let q = [1.0, 0.0, 0.0];
    let u = [0.0, 1.0, 0.0];
    let l = e.model.detect_closure(&q, &u, 9.0, 1e-8).unwrap().unwrap();
    let cp = refine_chart(&e, &e.sample_geodesic_chart(&q, &u, l).unwrap(), &search).unwrap();
    pairs.push((e, cp));
    for (s, smooth) in &pairs {
        let zz = make_zigzag(s, smooth, &search).unwrap();
        let a = spectral_report(s, smooth, DEFAULT_ZERO_TOL).unwrap();
        let b = spectral_report(s, &zz, DEFAULT_ZERO_TOL).unwrap();
        assert!(a.index <= b.index);
        assert!(a.index + a.kernel <= b.index + b.kernel);
    }
}

#[test]
fn hessian_needs_a_critical_point() {
    let (s, mut cp) = great_circle(2, 1, 8);
    cp.grad_norm = 1e-3;
    assert!(hessian(&s, &cp, DEFAULT_HESSIAN_STEP).is_err());
}

#[test]
fn counts_of_a_diagonal_matrix() {
    let h = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![3.0, -1.0, 1e-9, 2.0, -0.5]));
    let r = index_nullity(&h, 1e-4);
    assert_eq!((r.index, r.kernel, r.positive), (2, 1, 2));
    assert_eq!(r.eigenvalues, vec![-1.0, -0.5, 1e-9, 2.0, 3.0]);
    assert!(!r.gap_warning);
    let h = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 5e-4, 0.0]));
    assert!(index_nullity(&h, 1e-4).gap_warning);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn spectral_counts_partition_the_dimension(vals in proptest::collection::vec(-10.0f64..10.0, 1..12), seed in 0u64..1000) {
        let d = vals.len();
        // random orthogonal conjugation
        let mut state = seed;
        let a = DMatrix::from_fn(d, d, |_, _| {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        });
        let q = a.qr().q();
        let h = &q * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vals.clone())) * q.transpose();
        let h = (&h + h.transpose()) * 0.5;
        let r = index_nullity(&h, 1e-4);
        prop_assert_eq!(r.index + r.kernel + r.positive, d);
        prop_assert!(r.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
        let scale = vals.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let neg = vals.iter().filter(|&&x| x < -1e-3 * scale).count();
        let pos = vals.iter().filter(|&&x| x > 1e-3 * scale).count();
        prop_assert!(r.index >= neg && r.positive >= pos);
    }
}
