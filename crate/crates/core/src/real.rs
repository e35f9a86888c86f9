//! Scalar abstraction shared by the geodesic integrator and the metric models.
//!
//! Everything that sits on the path `(q, v) -> exp_q(v)` is written once,
//! generically over [`Real`], and instantiated with `f64` for values and with
//! [`Dual`] for directional derivatives. Step-size control only ever looks at
//! the real part, so a dual evaluation differentiates the discrete map that
//! the `f64` evaluation computes.

use std::fmt::Debug;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

pub trait Real:
    Copy
    + Debug
    + PartialEq
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
    + 'static
{
    fn cst(x: f64) -> Self;
    /// Real part (the value itself for `f64`).
    fn re(self) -> f64;
    fn sqrt(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn atan2(self, x: Self) -> Self;

    #[inline]
    fn zero() -> Self {
        Self::cst(0.0)
    }
    #[inline]
    fn one() -> Self {
        Self::cst(1.0)
    }
    #[inline]
    fn scale(self, s: f64) -> Self {
        self * Self::cst(s)
    }
}

impl Real for f64 {
    #[inline]
    fn cst(x: f64) -> Self {
        x
    }
    #[inline]
    fn re(self) -> f64 {
        self
    }
    #[inline]
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    #[inline]
    fn sin(self) -> Self {
        f64::sin(self)
    }
    #[inline]
    fn cos(self) -> Self {
        f64::cos(self)
    }
    #[inline]
    fn atan2(self, x: Self) -> Self {
        f64::atan2(self, x)
    }
    #[inline]
    fn scale(self, s: f64) -> Self {
        self * s
    }
}

/// First-order forward-mode dual number `re + du·ε`, `ε² = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Dual {
    pub re: f64,
    pub du: f64,
}

impl Dual {
    #[inline]
    pub fn new(re: f64, du: f64) -> Self {
        Dual { re, du }
    }

    /// Lift a real vector with a tangent direction into dual numbers.
    pub fn seed(values: &[f64], direction: &[f64]) -> Vec<Dual> {
        values
            .iter()
            .zip(direction)
            .map(|(&re, &du)| Dual { re, du })
            .collect()
    }

    pub fn values(xs: &[Dual]) -> Vec<f64> {
        xs.iter().map(|d| d.re).collect()
    }

    pub fn tangents(xs: &[Dual]) -> Vec<f64> {
        xs.iter().map(|d| d.du).collect()
    }
}

impl Add for Dual {
    type Output = Dual;
    #[inline]
    fn add(self, o: Dual) -> Dual {
        Dual::new(self.re + o.re, self.du + o.du)
    }
}

impl Sub for Dual {
    type Output = Dual;
    #[inline]
    fn sub(self, o: Dual) -> Dual {
        Dual::new(self.re - o.re, self.du - o.du)
    }
}

impl Mul for Dual {
    type Output = Dual;
    #[inline]
    fn mul(self, o: Dual) -> Dual {
        Dual::new(self.re * o.re, self.du * o.re + self.re * o.du)
    }
}

impl Div for Dual {
    type Output = Dual;
    #[inline]
    fn div(self, o: Dual) -> Dual {
        let inv = 1.0 / o.re;
        Dual::new(self.re * inv, (self.du - self.re * inv * o.du) * inv)
    }
}

impl Neg for Dual {
    type Output = Dual;
    #[inline]
    fn neg(self) -> Dual {
        Dual::new(-self.re, -self.du)
    }
}

impl AddAssign for Dual {
    #[inline]
    fn add_assign(&mut self, o: Dual) {
        self.re += o.re;
        self.du += o.du;
    }
}

impl SubAssign for Dual {
    #[inline]
    fn sub_assign(&mut self, o: Dual) {
        self.re -= o.re;
        self.du -= o.du;
    }
}

impl MulAssign for Dual {
    #[inline]
    fn mul_assign(&mut self, o: Dual) {
        *self = *self * o;
    }
}

impl Real for Dual {
    #[inline]
    fn cst(x: f64) -> Self {
        Dual::new(x, 0.0)
    }
    #[inline]
    fn re(self) -> f64 {
        self.re
    }
    #[inline]
    fn sqrt(self) -> Self {
        let s = self.re.sqrt();
        Dual::new(s, if s > 0.0 { 0.5 * self.du / s } else { 0.0 })
    }
    #[inline]
    fn sin(self) -> Self {
        Dual::new(self.re.sin(), self.du * self.re.cos())
    }
    #[inline]
    fn cos(self) -> Self {
        Dual::new(self.re.cos(), -self.du * self.re.sin())
    }
    #[inline]
    fn atan2(self, x: Self) -> Self {
        let r2 = self.re * self.re + x.re * x.re;
        Dual::new(
            self.re.atan2(x.re),
            if r2 > 0.0 {
                (x.re * self.du - self.re * x.du) / r2
            } else {
                0.0
            },
        )
    }
    #[inline]
    fn scale(self, s: f64) -> Self {
        Dual::new(self.re * s, self.du * s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check<F: Fn(Dual) -> Dual, G: Fn(f64) -> f64>(f: F, g: G, x: f64) {
        let d = f(Dual::new(x, 1.0));
        let h = 1e-6;
        let fd = (g(x + h) - g(x - h)) / (2.0 * h);
        assert!((d.re - g(x)).abs() < 1e-14);
        assert!((d.du - fd).abs() < 1e-7, "{} vs {}", d.du, fd);
    }

    #[test]
    fn dual_derivatives_match_finite_differences() {
        check(|x| x.sin() * x.cos(), |x| x.sin() * x.cos(), 0.7);
        check(|x| (x * x + Dual::cst(1.0)).sqrt(), |x| (x * x + 1.0).sqrt(), 0.3);
        check(|x| Dual::cst(1.0) / (x + Dual::cst(2.0)), |x| 1.0 / (x + 2.0), 0.4);
        check(|x| x.sin().atan2(x.cos() + Dual::cst(0.5)), |x| x.sin().atan2(x.cos() + 0.5), 1.1);
    }
}
