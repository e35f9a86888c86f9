//! Small dense-vector helpers over [`Real`] slices.
//!
//! Points and tangent vectors live in the ambient Euclidean space of the
//! sphere and are short (`n + 1` entries), so plain slices beat a matrix
//! library here.

use crate::real::Real;

#[inline]
pub fn dot<R: Real>(a: &[R], b: &[R]) -> R {
    let mut s = R::zero();
    for (x, y) in a.iter().zip(b) {
        s += *x * *y;
    }
    s
}

#[inline]
pub fn norm<R: Real>(a: &[R]) -> R {
    dot(a, a).sqrt()
}

/// `a + s·b`
pub fn add_scaled<R: Real>(a: &[R], s: R, b: &[R]) -> Vec<R> {
    a.iter().zip(b).map(|(x, y)| *x + s * *y).collect()
}

pub fn sub<R: Real>(a: &[R], b: &[R]) -> Vec<R> {
    a.iter().zip(b).map(|(x, y)| *x - *y).collect()
}

pub fn scaled<R: Real>(s: R, a: &[R]) -> Vec<R> {
    a.iter().map(|x| s * *x).collect()
}

pub fn normalized<R: Real>(a: &[R]) -> Vec<R> {
    let n = norm(a);
    a.iter().map(|x| *x / n).collect()
}

/// Euclidean projection of `v` onto the tangent space of the unit sphere at `x`.
/// `x` need not be exactly unit length.
pub fn project_tangent<R: Real>(x: &[R], v: &[R]) -> Vec<R> {
    let c = dot(x, v) / dot(x, x);
    v.iter().zip(x).map(|(vi, xi)| *vi - c * *xi).collect()
}

pub fn lift(a: &[f64]) -> Vec<crate::real::Dual> {
    a.iter().map(|&x| crate::real::Dual::new(x, 0.0)).collect()
}

pub fn dist_euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| f64::max(m, (x - y).abs()))
}

/// Orthonormal (Euclidean) basis of the tangent space `x^⊥` of the unit sphere,
/// obtained from the Householder reflection that maps the last coordinate axis
/// onto `±x`.
pub fn sphere_tangent_basis(x: &[f64]) -> Vec<Vec<f64>> {
    let d = x.len();
    let last = d - 1;
    // reflect e_last to s·x, s chosen to avoid cancellation
    let s = if x[last] >= 0.0 { 1.0 } else { -1.0 };
    let mut w: Vec<f64> = x.iter().map(|xi| s * xi).collect();
    w[last] -= 1.0;
    let ww = dot(&w, &w);
    let mut basis = Vec::with_capacity(last);
    for j in 0..last {
        let mut col = vec![0.0; d];
        col[j] = 1.0;
        if ww > 1e-300 {
            let c = 2.0 * w[j] / ww;
            for i in 0..d {
                col[i] -= c * w[i];
            }
        }
        // re-project for round-off
        let col = project_tangent(x, &col);
        basis.push(normalized(&col));
    }
    basis
}
