//! Repeated Lie derivatives of the heading along the shape fields, and the
//! maneuverability test built on them.
//!
//! `L_{h₁}^i y₁` is computed by nested directional differentiation: each
//! level lifts the shape state into one more dual layer seeded with `h₁(y)`.
//! Rust does not allow a function to recurse at a deeper generic type, so
//! the tower is written as a finite chain of named levels, one per
//! supported shape dimension.

use alloc::vec::Vec;

use crate::jet::{Dual, Scalar};
use crate::models::{ComponentIndex, ModelError, WheeledModel};
use crate::rng::SplitMix64;
use crate::MAX_SHAPE_DIM;

/// Magnitudes below this count as an exact zero in the maneuverability
/// conditions; magnitudes below it also fail the "nonzero" condition.
pub const MANEUVER_TOL: f64 = 1e-10;

fn d_along_h1<T: Scalar>(
    m: &WheeledModel,
    y: &[T],
    f: fn(&WheeledModel, &[Dual<T, 1>]) -> Result<Dual<T, 1>, ModelError>,
) -> Result<T, ModelError> {
    let h = m.h1(y)?;
    let seeded: Vec<Dual<T, 1>> = y
        .iter()
        .zip(h.iter())
        .map(|(&yi, &hi)| Dual { re: yi, du: [hi] })
        .collect();
    Ok(f(m, &seeded)?.du[0])
}

fn d_along_h2<T: Scalar>(
    m: &WheeledModel,
    y: &[T],
    f: fn(&WheeledModel, &[Dual<T, 1>]) -> Result<Dual<T, 1>, ModelError>,
) -> Result<T, ModelError> {
    let h = m.h2(y)?;
    let seeded: Vec<Dual<T, 1>> = y
        .iter()
        .zip(h.iter())
        .map(|(&yi, &hi)| Dual { re: yi, du: [hi] })
        .collect();
    Ok(f(m, &seeded)?.du[0])
}

fn lie0<T: Scalar>(_m: &WheeledModel, y: &[T]) -> Result<T, ModelError> {
    Ok(y[0])
}
fn lie1<T: Scalar>(m: &WheeledModel, y: &[T]) -> Result<T, ModelError> {
    d_along_h1(m, y, lie0)
}
fn lie2<T: Scalar>(m: &WheeledModel, y: &[T]) -> Result<T, ModelError> {
    d_along_h1(m, y, lie1)
}
fn lie3<T: Scalar>(m: &WheeledModel, y: &[T]) -> Result<T, ModelError> {
    d_along_h1(m, y, lie2)
}
fn lie4<T: Scalar>(m: &WheeledModel, y: &[T]) -> Result<T, ModelError> {
    d_along_h1(m, y, lie3)
}
fn lie5<T: Scalar>(m: &WheeledModel, y: &[T]) -> Result<T, ModelError> {
    d_along_h1(m, y, lie4)
}
fn lie6<T: Scalar>(m: &WheeledModel, y: &[T]) -> Result<T, ModelError> {
    d_along_h1(m, y, lie5)
}

/// `L_{h₁}^i y₁` at `y`, generic over the scalar so it can itself be
/// differentiated.
pub fn lie_h1<T: Scalar>(m: &WheeledModel, y: &[T], i: usize) -> Result<T, ModelError> {
    match i {
        0 => lie0(m, y),
        1 => lie1(m, y),
        2 => lie2(m, y),
        3 => lie3(m, y),
        4 => lie4(m, y),
        5 => lie5(m, y),
        6 => lie6(m, y),
        _ => Err(ModelError::ShapeDimTooLarge { n: i }),
    }
}

/// `L_{h₂} L_{h₁}^i y₁` at `y`.
pub fn lie_h2_h1<T: Scalar>(m: &WheeledModel, y: &[T], i: usize) -> Result<T, ModelError> {
    match i {
        0 => d_along_h2(m, y, lie0),
        1 => d_along_h2(m, y, lie1),
        2 => d_along_h2(m, y, lie2),
        3 => d_along_h2(m, y, lie3),
        4 => d_along_h2(m, y, lie4),
        5 => d_along_h2(m, y, lie5),
        6 => d_along_h2(m, y, lie6),
        _ => Err(ModelError::ShapeDimTooLarge { n: i }),
    }
}

/// The two derivative ladders evaluated at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct LieTower {
    /// `L_{h₁}^i y₁` for `i = 0…depth`.
    pub along_h1: Vec<f64>,
    /// `L_{h₂} L_{h₁}^i y₁` for `i = 0…depth`.
    pub mixed: Vec<f64>,
}

/// Evaluate both ladders up to `depth` at a concrete point.
pub fn lie_derivative_tower(
    m: &WheeledModel,
    y: &[f64],
    depth: usize,
) -> Result<LieTower, ModelError> {
    let mut along_h1 = Vec::with_capacity(depth + 1);
    let mut mixed = Vec::with_capacity(depth + 1);
    for i in 0..=depth {
        along_h1.push(lie_h1(m, y, i)?);
        mixed.push(lie_h2_h1(m, y, i)?);
    }
    Ok(LieTower { along_h1, mixed })
}

/// A point where a maneuverability condition fails.
#[derive(Debug, Clone, PartialEq)]
pub struct ManeuverabilityViolation {
    /// Index `i` of the failed condition on `L_{h₂} L_{h₁}^i y₁`.
    pub order: usize,
    /// The shape state at which it failed.
    pub y: Vec<f64>,
    /// The offending value.
    pub value: f64,
    /// Component manifold the sample came from.
    pub component: ComponentIndex,
}

/// Result of sampling the maneuverability conditions.
#[derive(Debug, Clone, PartialEq)]
pub struct ManeuverabilityReport {
    pub pass: bool,
    /// First violating condition, when the check failed.
    pub witness: Option<ManeuverabilityViolation>,
    pub samples_per_component: usize,
    pub components: usize,
}

/// Test `L_{h₂}L_{h₁}^i y₁ = 0` for `i < n-1` and `≠ 0` for `i = n-1` at
/// randomly sampled interior points of every component manifold.
pub fn check_maneuverability(
    m: &WheeledModel,
    sample_count: usize,
) -> Result<ManeuverabilityReport, ModelError> {
    let n = m.n();
    if n > MAX_SHAPE_DIM {
        return Err(ModelError::ShapeDimTooLarge { n });
    }
    let components = ComponentIndex::all(n);
    let mut rng = SplitMix64::new(0x6d616e65757665);
    // Stay a little off the chart boundary so secant factors remain finite.
    let margin = 0.05;
    for component in &components {
        for _ in 0..sample_count {
            let mut y = Vec::with_capacity(n);
            y.push(rng.in_range(-core::f64::consts::PI, core::f64::consts::PI));
            for joint in 2..=n {
                let mid = component.offset(joint);
                let half = core::f64::consts::FRAC_PI_2 - margin;
                y.push(rng.in_range(mid - half, mid + half));
            }
            for i in 0..n {
                let v = lie_h2_h1(m, &y, i)?;
                let ok = if i + 1 < n { v.abs() <= MANEUVER_TOL } else { v.abs() >= MANEUVER_TOL };
                if !ok {
                    return Ok(ManeuverabilityReport {
                        pass: false,
                        witness: Some(ManeuverabilityViolation {
                            order: i,
                            y,
                            value: v,
                            component: component.clone(),
                        }),
                        samples_per_component: sample_count,
                        components: components.len(),
                    });
                }
            }
        }
    }
    Ok(ManeuverabilityReport {
        pass: true,
        witness: None,
        samples_per_component: sample_count,
        components: components.len(),
    })
}
