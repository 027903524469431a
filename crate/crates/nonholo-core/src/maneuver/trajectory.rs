//! Catalog of desired planar curves with exact analytic derivatives.
//!
//! Every entry exposes `derivative(order, t)` in closed form, generic over
//! the scalar type, so curves can be consumed inside nested dual-number
//! towers without losing exactness. Sampled waypoints are deliberately not
//! supported: the downstream recursions need honest derivatives up to
//! order `n + 1`.

use core::fmt;

use alloc::vec::Vec;

use crate::jet::Scalar;

/// Speed below which a curve counts as stopping (inadmissible).
pub const SPEED_FLOOR: f64 = 1e-9;

/// Number of grid samples per unit horizon used by the sampling fallback.
const SAMPLES_PER_UNIT: usize = 256;
const MIN_SAMPLES: usize = 512;

/// A desired curve for the distinguished point to track.
#[derive(Debug, Clone, PartialEq)]
pub enum DesiredTrajectory {
    /// `xᴰ(t) = point + velocity·t`.
    Line { point: [f64; 2], velocity: [f64; 2] },
    /// `xᴰ(t) = center + radius·(cos(rate·t + phase), sin(rate·t + phase))`.
    Circle { center: [f64; 2], radius: f64, rate: f64, phase: f64 },
    /// `xᴰ(t) = (speed·t, amplitude·sin(2π·frequency·t))`.
    LaneChange { speed: f64, amplitude: f64, frequency: f64 },
    /// Component-wise polynomials in `t`, coefficients in ascending order.
    Polynomial { x_coeffs: Vec<f64>, y_coeffs: Vec<f64> },
}

fn poly_derivative<T: Scalar>(coeffs: &[f64], order: usize, t: T) -> T {
    // Horner evaluation of the order-th derivative; falling-factorial
    // weights folded into the coefficients.
    let mut acc = T::zero();
    for k in (order..coeffs.len()).rev() {
        let mut w = coeffs[k];
        for j in 0..order {
            w *= (k - j) as f64;
        }
        acc = acc * t + T::lift(w);
    }
    acc
}

impl DesiredTrajectory {
    /// The `order`-th time derivative of the curve at `t`, in closed form.
    pub fn derivative<T: Scalar>(&self, order: usize, t: T) -> [T; 2] {
        match self {
            DesiredTrajectory::Line { point, velocity } => match order {
                0 => [
                    t.scale(velocity[0]) + T::lift(point[0]),
                    t.scale(velocity[1]) + T::lift(point[1]),
                ],
                1 => [T::lift(velocity[0]), T::lift(velocity[1])],
                _ => [T::zero(), T::zero()],
            },
            DesiredTrajectory::Circle { center, radius, rate, phase } => {
                // d^k/dt^k cos(ωt+φ) = ω^k cos(ωt+φ+kπ/2)
                let shift = order as f64 * core::f64::consts::FRAC_PI_2;
                let amp = radius * libm::pow(*rate, order as f64);
                let arg = t.scale(*rate) + T::lift(*phase + shift);
                let mut out = [arg.cos().scale(amp), arg.sin().scale(amp)];
                if order == 0 {
                    out[0] = out[0] + T::lift(center[0]);
                    out[1] = out[1] + T::lift(center[1]);
                }
                out
            }
            DesiredTrajectory::LaneChange { speed, amplitude, frequency } => {
                let omega = 2.0 * core::f64::consts::PI * frequency;
                let shift = order as f64 * core::f64::consts::FRAC_PI_2;
                let amp = amplitude * libm::pow(omega, order as f64);
                let x2 = (t.scale(omega) + T::lift(shift)).sin().scale(amp);
                let x1 = match order {
                    0 => t.scale(*speed),
                    1 => T::lift(*speed),
                    _ => T::zero(),
                };
                [x1, x2]
            }
            DesiredTrajectory::Polynomial { x_coeffs, y_coeffs } => [
                poly_derivative(x_coeffs, order, t),
                poly_derivative(y_coeffs, order, t),
            ],
        }
    }

    /// Curve position `xᴰ(t)`.
    pub fn position<T: Scalar>(&self, t: T) -> [T; 2] {
        self.derivative(0, t)
    }

    /// Speed `|ẋᴰ(t)|`.
    pub fn speed(&self, t: f64) -> f64 {
        let v = self.derivative(1, t);
        libm::hypot(v[0], v[1])
    }

    /// Exact lower bound on the speed over all `t`, where the catalog
    /// entry admits one.
    pub fn analytic_min_speed(&self) -> Option<f64> {
        match self {
            DesiredTrajectory::Line { velocity, .. } => {
                Some(libm::hypot(velocity[0], velocity[1]))
            }
            DesiredTrajectory::Circle { radius, rate, .. } => {
                Some((radius * rate).abs())
            }
            DesiredTrajectory::LaneChange { speed, .. } => Some(speed.abs()),
            DesiredTrajectory::Polynomial { .. } => None,
        }
    }
}

/// Verdict of sampling a curve against the admissibility definitions.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmissibilityReport {
    /// Smallest sampled (or analytically bounded) speed on the horizon.
    pub min_speed: f64,
    /// Time at which the minimum was attained (sampling grid point).
    pub min_speed_at: f64,
    /// `sup |d^k xᴰ/dt^k|` for `k = 1…n+1`, sampled.
    pub derivative_bounds: Vec<f64>,
    /// `inf |ẋᴰ| > 0` on the horizon.
    pub admissible: bool,
    /// All derivative bounds up to order `n + 1` finite.
    pub strongly_admissible: bool,
}

/// Sample the curve over `[0, horizon]` and report the admissibility
/// quantities needed for a shape dimension `n` vehicle.
pub fn admissibility_report(
    trajectory: &DesiredTrajectory,
    n: usize,
    horizon: f64,
) -> AdmissibilityReport {
    let samples = MIN_SAMPLES.max((horizon * SAMPLES_PER_UNIT as f64) as usize);
    let mut min_speed = f64::INFINITY;
    let mut min_speed_at = 0.0;
    let mut bounds = alloc::vec![0.0f64; n + 1];
    for k in 0..=samples {
        let t = horizon * k as f64 / samples as f64;
        for (ord, bound) in bounds.iter_mut().enumerate() {
            let d = trajectory.derivative(ord + 1, t);
            let norm = libm::hypot(d[0], d[1]);
            if ord == 0 && norm < min_speed {
                min_speed = norm;
                min_speed_at = t;
            }
            if norm > *bound {
                *bound = norm;
            }
        }
    }
    if let Some(lb) = trajectory.analytic_min_speed() {
        // The analytic bound is global; prefer it when tighter information
        // exists (constant-speed catalog entries).
        if lb < min_speed {
            min_speed = lb;
        }
    }
    let admissible = min_speed > SPEED_FLOOR;
    let strongly_admissible = bounds.iter().all(|b| b.is_finite());
    AdmissibilityReport {
        min_speed,
        min_speed_at,
        derivative_bounds: bounds,
        admissible,
        strongly_admissible,
    }
}

impl fmt::Display for AdmissibilityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "min |x'| = {:.6e} at t = {:.4} ({}admissible, {}strongly admissible)",
            self.min_speed,
            self.min_speed_at,
            if self.admissible { "" } else { "not " },
            if self.strongly_admissible { "" } else { "not " },
        )
    }
}
