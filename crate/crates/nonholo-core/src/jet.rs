//! Nestable forward-mode dual numbers.
//!
//! [`Dual<T, K>`] carries a value and `K` tangent slots over any inner
//! scalar `T: Scalar`, so nesting (`Dual<Dual<f64, 1>, 2>`, ...) yields
//! mixed derivatives of arbitrary order. Every vehicle model, transform,
//! and controller stage in this crate is written against the [`Scalar`]
//! trait and is therefore differentiable to whatever depth its caller
//! instantiates.
//!
//! Also here: the smooth squared-norm functions `tanh(γ|x|)/|x|` and
//! `sinh²(γ|x|)` expressed in `ρ = |x|²`, with a truncated-series branch
//! near `ρ = 0` so they stay differentiable at the origin.

use core::fmt;
use core::ops::{Add, Div, Mul, Neg, Sub};

use alloc::vec::Vec;

/// Errors raised by the differentiable-scalar layer.
#[derive(Debug, Clone, PartialEq)]
pub enum JetError {
    /// Evaluation produced a non-finite value or partial; `index` is the
    /// seeded input whose sensitivity blew up, `at` its coordinate.
    Singularity { index: usize, at: f64 },
    /// A squared norm argument was negative.
    NegativeSquaredNorm(f64),
}

impl fmt::Display for JetError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            JetError::Singularity { index, at } => {
                write!(f, "non-finite derivative for input {index} at {at}")
            }
            JetError::NegativeSquaredNorm(rho) => {
                write!(f, "squared norm must be non-negative, got {rho}")
            }
        }
    }
}

impl core::error::Error for JetError {}

/// The closed set of elementary operations every differentiable scalar
/// supports. Implemented by `f64` (the base case) and by [`Dual`] over any
/// implementor, which is what makes nesting compositional.
pub trait Scalar:
    Copy
    + fmt::Debug
    + PartialEq
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    /// Embed a constant (all derivatives zero).
    fn lift(value: f64) -> Self;
    /// The underlying plain value, stripping every tangent level.
    fn primal(self) -> f64;

    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn tan(self) -> Self;
    fn atan(self) -> Self;
    /// Two-argument arctangent, `self` is the ordinate.
    fn atan2(self, x: Self) -> Self;
    fn tanh(self) -> Self;
    fn sinh(self) -> Self;
    fn cosh(self) -> Self;
    fn sqrt(self) -> Self;

    fn zero() -> Self {
        Self::lift(0.0)
    }
    fn one() -> Self {
        Self::lift(1.0)
    }
    /// Scale by a plain constant.
    fn scale(self, c: f64) -> Self {
        self * Self::lift(c)
    }
    /// Secant, `1 / cos`.
    fn sec(self) -> Self {
        Self::one() / self.cos()
    }
    /// Small integer power by repeated multiplication.
    fn powi(self, n: u32) -> Self {
        let mut acc = Self::one();
        for _ in 0..n {
            acc = acc * self;
        }
        acc
    }
}

impl Scalar for f64 {
    fn lift(value: f64) -> Self {
        value
    }
    fn primal(self) -> f64 {
        self
    }
    fn sin(self) -> Self {
        libm::sin(self)
    }
    fn cos(self) -> Self {
        libm::cos(self)
    }
    fn tan(self) -> Self {
        libm::tan(self)
    }
    fn atan(self) -> Self {
        libm::atan(self)
    }
    fn atan2(self, x: Self) -> Self {
        libm::atan2(self, x)
    }
    fn tanh(self) -> Self {
        libm::tanh(self)
    }
    fn sinh(self) -> Self {
        libm::sinh(self)
    }
    fn cosh(self) -> Self {
        libm::cosh(self)
    }
    fn sqrt(self) -> Self {
        libm::sqrt(self)
    }
}

/// A forward-mode dual scalar: a value plus `K` tangent slots.
///
/// `T` may itself be a `Dual`, which is how higher and mixed derivatives
/// are obtained. A `Dual` with zero tangents reproduces plain arithmetic
/// bit for bit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dual<T, const K: usize> {
    /// Function value.
    pub re: T,
    /// Tangent slots, one per seeded direction.
    pub du: [T; K],
}

impl<T: Scalar, const K: usize> Dual<T, K> {
    /// A constant: value with all tangents zero.
    pub fn constant(re: T) -> Self {
        Dual { re, du: [T::zero(); K] }
    }

    /// A variable seeded with tangent 1 in slot `slot`.
    pub fn seeded(re: T, slot: usize) -> Self {
        let mut du = [T::zero(); K];
        du[slot] = T::one();
        Dual { re, du }
    }

    /// A value with explicit tangents.
    pub fn with_tangents(re: T, du: [T; K]) -> Self {
        Dual { re, du }
    }

    fn unary(self, value: T, slope: T) -> Self {
        let mut du = [T::zero(); K];
        for (out, d) in du.iter_mut().zip(self.du) {
            *out = slope * d;
        }
        Dual { re: value, du }
    }
}

impl<T: Scalar, const K: usize> Add for Dual<T, K> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        let mut du = [T::zero(); K];
        for (i, out) in du.iter_mut().enumerate() {
            *out = self.du[i] + rhs.du[i];
        }
        Dual { re: self.re + rhs.re, du }
    }
}

impl<T: Scalar, const K: usize> Sub for Dual<T, K> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        let mut du = [T::zero(); K];
        for (i, out) in du.iter_mut().enumerate() {
            *out = self.du[i] - rhs.du[i];
        }
        Dual { re: self.re - rhs.re, du }
    }
}

impl<T: Scalar, const K: usize> Mul for Dual<T, K> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let mut du = [T::zero(); K];
        for (i, out) in du.iter_mut().enumerate() {
            *out = self.du[i] * rhs.re + self.re * rhs.du[i];
        }
        Dual { re: self.re * rhs.re, du }
    }
}

impl<T: Scalar, const K: usize> Div for Dual<T, K> {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        let q = self.re / rhs.re;
        let mut du = [T::zero(); K];
        for (i, out) in du.iter_mut().enumerate() {
            *out = (self.du[i] - q * rhs.du[i]) / rhs.re;
        }
        Dual { re: q, du }
    }
}

impl<T: Scalar, const K: usize> Neg for Dual<T, K> {
    type Output = Self;
    fn neg(self) -> Self {
        let mut du = [T::zero(); K];
        for (i, out) in du.iter_mut().enumerate() {
            *out = -self.du[i];
        }
        Dual { re: -self.re, du }
    }
}

impl<T: Scalar, const K: usize> Scalar for Dual<T, K> {
    fn lift(value: f64) -> Self {
        Dual::constant(T::lift(value))
    }

    fn primal(self) -> f64 {
        self.re.primal()
    }

    fn sin(self) -> Self {
        self.unary(self.re.sin(), self.re.cos())
    }

    fn cos(self) -> Self {
        self.unary(self.re.cos(), -self.re.sin())
    }

    fn tan(self) -> Self {
        let c = self.re.cos();
        self.unary(self.re.tan(), T::one() / (c * c))
    }

    fn atan(self) -> Self {
        self.unary(self.re.atan(), T::one() / (T::one() + self.re * self.re))
    }

    fn atan2(self, x: Self) -> Self {
        // d atan2(y, x) = (x dy - y dx) / (x^2 + y^2)
        let denom = x.re * x.re + self.re * self.re;
        let mut du = [T::zero(); K];
        for (i, out) in du.iter_mut().enumerate() {
            *out = (x.re * self.du[i] - self.re * x.du[i]) / denom;
        }
        Dual { re: self.re.atan2(x.re), du }
    }

    fn tanh(self) -> Self {
        let t = self.re.tanh();
        self.unary(t, T::one() - t * t)
    }

    fn sinh(self) -> Self {
        self.unary(self.re.sinh(), self.re.cosh())
    }

    fn cosh(self) -> Self {
        self.unary(self.re.cosh(), self.re.sinh())
    }

    fn sqrt(self) -> Self {
        let r = self.re.sqrt();
        self.unary(r, T::one() / r.scale(2.0))
    }
}

/// Value and gradient of `f` at `point`, by per-variable forward seeding.
///
/// `f` must be built from [`Scalar`] operations only. A non-finite value or
/// partial is reported as a singularity naming the offending input.
pub fn seed_gradient<F>(f: F, point: &[f64]) -> Result<(f64, Vec<f64>), JetError>
where
    F: Fn(&[Dual<f64, 1>]) -> Dual<f64, 1>,
{
    let mut value = 0.0;
    let mut gradient = Vec::with_capacity(point.len());
    let mut args: Vec<Dual<f64, 1>> = point.iter().map(|&x| Dual::constant(x)).collect();
    for i in 0..point.len() {
        args[i].du[0] = 1.0;
        let out = f(&args);
        args[i].du[0] = 0.0;
        if !out.re.is_finite() || !out.du[0].is_finite() {
            return Err(JetError::Singularity { index: i, at: point[i] });
        }
        value = out.re;
        gradient.push(out.du[0]);
    }
    if point.is_empty() {
        let out = f(&args);
        value = out.re;
    }
    Ok((value, gradient))
}

/// Directional derivative of `f` at `at` along `dir`, generic over the
/// inner scalar so it can be nested.
pub fn directional<T, F>(f: F, at: &[T], dir: &[T]) -> Dual<T, 1>
where
    T: Scalar,
    F: Fn(&[Dual<T, 1>]) -> Dual<T, 1>,
{
    let args: Vec<Dual<T, 1>> = at
        .iter()
        .zip(dir)
        .map(|(&x, &d)| Dual::with_tangents(x, [d]))
        .collect();
    f(&args)
}

/// Below this squared norm the series branches of [`tanhc_sq`] and
/// [`sinh_sq_norm`] take over.
pub const SERIES_BRANCH_RHO: f64 = 1e-8;

/// `tanh(γ√ρ)/√ρ` as a smooth function of the squared norm `ρ`, with the
/// analytic limit `γ` at `ρ = 0`.
pub fn tanhc_sq<T: Scalar>(rho: T, gamma: f64) -> Result<T, JetError> {
    if rho.primal() < 0.0 {
        return Err(JetError::NegativeSquaredNorm(rho.primal()));
    }
    Ok(tanhc_sq_raw(rho, gamma))
}

/// `sinh²(γ√ρ)` as a smooth function of the squared norm `ρ`.
pub fn sinh_sq_norm<T: Scalar>(rho: T, gamma: f64) -> Result<T, JetError> {
    if rho.primal() < 0.0 {
        return Err(JetError::NegativeSquaredNorm(rho.primal()));
    }
    Ok(sinh_sq_norm_raw(rho, gamma))
}

/// Unchecked `tanh(γ√ρ)/√ρ`; callers guarantee `ρ ≥ 0`.
pub(crate) fn tanhc_sq_raw<T: Scalar>(rho: T, gamma: f64) -> T {
    if rho.primal() < SERIES_BRANCH_RHO {
        // tanh(γr)/r = γ - γ³ρ/3 + 2γ⁵ρ²/15 - 17γ⁷ρ³/315, ρ = r²
        let g2 = gamma * gamma;
        let c0 = T::lift(gamma);
        let c1 = rho.scale(-gamma * g2 / 3.0);
        let c2 = (rho * rho).scale(2.0 * gamma * g2 * g2 / 15.0);
        let c3 = (rho * rho * rho).scale(-17.0 * gamma * g2 * g2 * g2 / 315.0);
        c0 + c1 + c2 + c3
    } else {
        let r = rho.sqrt();
        r.scale(gamma).tanh() / r
    }
}

/// Unchecked `sinh²(γ√ρ)`; callers guarantee `ρ ≥ 0`.
pub(crate) fn sinh_sq_norm_raw<T: Scalar>(rho: T, gamma: f64) -> T {
    if rho.primal() < SERIES_BRANCH_RHO {
        // sinh²(γr) = γ²ρ + γ⁴ρ²/3 + 2γ⁶ρ³/45
        let g2 = gamma * gamma;
        rho.scale(g2)
            + (rho * rho).scale(g2 * g2 / 3.0)
            + (rho * rho * rho).scale(2.0 * g2 * g2 * g2 / 45.0)
    } else {
        let s = rho.sqrt().scale(gamma).sinh();
        s * s
    }
}
