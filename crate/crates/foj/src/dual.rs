//! Forward-mode automatic differentiation over a handful of variables.
//!
//! Refinement needs the gradient of each patch's local objective with respect
//! to that patch's own parameters (M angles plus two vertex coordinates, so
//! five or six variables).  At that width, forward mode with a fixed-size
//! partial vector is both simpler and faster than a tape: each arithmetic op
//! updates `N` partials alongside the value, and the whole objective
//! evaluation stays one generic function shared with the plain `f64` path.
//!
//! Non-smooth points follow subgradient conventions that the optimizer and
//! the scalar objective agree on: `min`/`max` propagate the attaining branch
//! (first argument on ties) and `abs` at zero takes slope +1.

use std::ops::{Add, Div, Mul, Neg, Sub};

/// Scalar abstraction implemented by `f64` and [`Dual`]; lets the objective
/// and geometry code run identically for evaluation and differentiation.
pub trait Real:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    /// Lifts a constant (zero derivative).
    fn constant(c: f64) -> Self;
    /// The underlying value.
    fn value(self) -> f64;
    /// Sine.
    fn sin(self) -> Self;
    /// Cosine.
    fn cos(self) -> Self;
    /// Inverse tangent.
    fn atan(self) -> Self;
    /// Absolute value; slope +1 at zero.
    fn abs(self) -> Self;
    /// Minimum, keeping the first argument's derivative on ties.
    fn min2(self, other: Self) -> Self;
    /// Maximum, keeping the first argument's derivative on ties.
    fn max2(self, other: Self) -> Self;
}

impl Real for f64 {
    #[inline]
    fn constant(c: f64) -> Self {
        c
    }
    #[inline]
    fn value(self) -> f64 {
        self
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
    fn atan(self) -> Self {
        f64::atan(self)
    }
    #[inline]
    fn abs(self) -> Self {
        f64::abs(self)
    }
    #[inline]
    fn min2(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }
    #[inline]
    fn max2(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }
}

/// Value plus partial derivatives with respect to `N` seed variables.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dual<const N: usize> {
    /// Function value.
    pub v: f64,
    /// Partial derivatives.
    pub d: [f64; N],
}

impl<const N: usize> Dual<N> {
    /// The `i`-th seed variable: value `v`, derivative 1 in slot `i`.
    #[inline]
    pub fn variable(v: f64, i: usize) -> Self {
        let mut d = [0.0; N];
        d[i] = 1.0;
        Self { v, d }
    }

    #[inline]
    fn map(self, v: f64, dv: f64) -> Self {
        let mut d = self.d;
        for x in &mut d {
            *x *= dv;
        }
        Self { v, d }
    }

    /// Multiplies by a plain scalar without lifting it to a dual.
    #[inline]
    pub(crate) fn scale(self, s: f64) -> Self {
        self.map(self.v * s, s)
    }
}

impl<const N: usize> Add for Dual<N> {
    type Output = Self;
    #[inline]
    fn add(self, rhs: Self) -> Self {
        let mut d = self.d;
        for (a, b) in d.iter_mut().zip(rhs.d) {
            *a += b;
        }
        Self {
            v: self.v + rhs.v,
            d,
        }
    }
}

impl<const N: usize> Sub for Dual<N> {
    type Output = Self;
    #[inline]
    fn sub(self, rhs: Self) -> Self {
        let mut d = self.d;
        for (a, b) in d.iter_mut().zip(rhs.d) {
            *a -= b;
        }
        Self {
            v: self.v - rhs.v,
            d,
        }
    }
}

impl<const N: usize> Mul for Dual<N> {
    type Output = Self;
    #[inline]
    fn mul(self, rhs: Self) -> Self {
        let mut d = self.d;
        for (a, b) in d.iter_mut().zip(rhs.d) {
            *a = *a * rhs.v + b * self.v;
        }
        Self {
            v: self.v * rhs.v,
            d,
        }
    }
}

impl<const N: usize> Div for Dual<N> {
    type Output = Self;
    #[inline]
    fn div(self, rhs: Self) -> Self {
        let inv = 1.0 / rhs.v;
        let mut d = self.d;
        for (a, b) in d.iter_mut().zip(rhs.d) {
            *a = (*a - b * self.v * inv) * inv;
        }
        Self {
            v: self.v * inv,
            d,
        }
    }
}

impl<const N: usize> Neg for Dual<N> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        let mut d = self.d;
        for a in &mut d {
            *a = -*a;
        }
        Self { v: -self.v, d }
    }
}

impl<const N: usize> Real for Dual<N> {
    #[inline]
    fn constant(c: f64) -> Self {
        Self { v: c, d: [0.0; N] }
    }
    #[inline]
    fn value(self) -> f64 {
        self.v
    }
    #[inline]
    fn sin(self) -> Self {
        self.map(self.v.sin(), self.v.cos())
    }
    #[inline]
    fn cos(self) -> Self {
        self.map(self.v.cos(), -self.v.sin())
    }
    #[inline]
    fn atan(self) -> Self {
        self.map(self.v.atan(), 1.0 / (1.0 + self.v * self.v))
    }
    #[inline]
    fn abs(self) -> Self {
        if self.v < 0.0 {
            -self
        } else {
            self
        }
    }
    #[inline]
    fn min2(self, other: Self) -> Self {
        if other.v < self.v {
            other
        } else {
            self
        }
    }
    #[inline]
    fn max2(self, other: Self) -> Self {
        if other.v > self.v {
            other
        } else {
            self
        }
    }
}
