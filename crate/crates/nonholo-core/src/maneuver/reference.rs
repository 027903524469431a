//! The maneuvering operator: lifts a planar curve to a feasible
//! state/input reference for a maneuverable vehicle.
//!
//! Only the heading chart variable `s₁ᴰ` carries integration state (the
//! scalar ODE `ṡ₁ = (ẍ₂ᴰ cos s₁ − ẍ₁ᴰ sin s₁)/v₁ᴰ`); every higher chained
//! coordinate is produced pointwise by repeatedly differentiating that
//! right-hand side through dual numbers and dividing by `v₁ᴰ`. The chain
//! is exact to machine precision, so the reference satisfies the plant
//! dynamics without interpolation error.

use core::fmt;

use alloc::vec::Vec;

use crate::jet::{Dual, Scalar};
use crate::maneuver::trajectory::{DesiredTrajectory, SPEED_FLOOR};
use crate::maneuver::transform::{
    build_transform_generic, build_transform_truck, TransformError, TransformPair,
};
use crate::models::{ComponentIndex, Configuration, ModelError, WheeledModel};
use crate::MAX_SHAPE_DIM;

/// Travel direction along the desired curve; fixes the constant sign of
/// `u₁ᴰ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

impl Direction {
    pub fn sign(self) -> f64 {
        match self {
            Direction::Forward => 1.0,
            Direction::Backward => -1.0,
        }
    }
}

/// Errors from reference generation.
#[derive(Debug, Clone, PartialEq)]
pub enum ManeuverError {
    Transform(TransformError),
    Model(ModelError),
    /// Speed fell to the admissibility floor at `t`.
    NotAdmissible { t: f64, speed: f64 },
    /// The reference shape state left the bound component manifold.
    LeftComponent { joint: usize, value: f64 },
}

impl From<TransformError> for ManeuverError {
    fn from(e: TransformError) -> Self {
        ManeuverError::Transform(e)
    }
}

impl From<ModelError> for ManeuverError {
    fn from(e: ModelError) -> Self {
        ManeuverError::Model(e)
    }
}

impl fmt::Display for ManeuverError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ManeuverError::Transform(e) => write!(f, "{e}"),
            ManeuverError::Model(e) => write!(f, "{e}"),
            ManeuverError::NotAdmissible { t, speed } => {
                write!(f, "curve speed {speed:.3e} at t = {t} is below the admissibility floor")
            }
            ManeuverError::LeftComponent { joint, value } => {
                write!(f, "reference joint y{joint} = {value} left the component chart")
            }
        }
    }
}

impl core::error::Error for ManeuverError {}

/// One sample of the reference: configuration, input, and their chained
/// images.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferencePoint {
    pub t: f64,
    pub qd: Configuration,
    pub ud: [f64; 2],
    /// Chained coordinates `s₁ᴰ…sₙᴰ`.
    pub sd: Vec<f64>,
    /// Transformed input `(v₁ᴰ, v₂ᴰ)`.
    pub vd: [f64; 2],
    pub direction: f64,
}

/// `v₁ᴰ(t) = ±|ẋᴰ(t)|`.
fn v1_signed<T: Scalar>(tr: &DesiredTrajectory, dir: f64, t: T) -> T {
    let v = tr.derivative(1, t);
    (v[0] * v[0] + v[1] * v[1]).sqrt().scale(dir)
}

/// Right-hand side of the heading chart ODE.
fn f1<T: Scalar>(tr: &DesiredTrajectory, dir: f64, t: T, s1: T) -> T {
    let a = tr.derivative(2, t);
    (a[1] * s1.cos() - a[0] * s1.sin()) / v1_signed(tr, dir, t)
}

/// Lift `(t, s₁)` one dual level, seeding `ṫ = 1` and `ṡ₁ = f₁(t, s₁)`,
/// so that `.du[0]` of anything evaluated on top is its total time
/// derivative along the reference.
fn lift_along<T: Scalar>(
    tr: &DesiredTrajectory,
    dir: f64,
    t: T,
    s1: T,
) -> (Dual<T, 1>, Dual<T, 1>) {
    (
        Dual { re: t, du: [T::one()] },
        Dual { re: s1, du: [f1(tr, dir, t, s1)] },
    )
}

// The chained coordinates sᵢᴰ as functions of (t, s₁), one named level per
// index: s_{i+1} = (d/dt sᵢ)/v₁. Named levels instead of recursion because
// each one runs at a deeper dual type.
fn s2<T: Scalar>(tr: &DesiredTrajectory, dir: f64, t: T, s1: T) -> T {
    f1(tr, dir, t, s1) / v1_signed(tr, dir, t)
}
fn s3<T: Scalar>(tr: &DesiredTrajectory, dir: f64, t: T, s1: T) -> T {
    let (td, sd) = lift_along(tr, dir, t, s1);
    s2(tr, dir, td, sd).du[0] / v1_signed(tr, dir, t)
}
fn s4<T: Scalar>(tr: &DesiredTrajectory, dir: f64, t: T, s1: T) -> T {
    let (td, sd) = lift_along(tr, dir, t, s1);
    s3(tr, dir, td, sd).du[0] / v1_signed(tr, dir, t)
}
fn s5<T: Scalar>(tr: &DesiredTrajectory, dir: f64, t: T, s1: T) -> T {
    let (td, sd) = lift_along(tr, dir, t, s1);
    s4(tr, dir, td, sd).du[0] / v1_signed(tr, dir, t)
}
fn s6<T: Scalar>(tr: &DesiredTrajectory, dir: f64, t: T, s1: T) -> T {
    let (td, sd) = lift_along(tr, dir, t, s1);
    s5(tr, dir, td, sd).du[0] / v1_signed(tr, dir, t)
}

fn s_at(tr: &DesiredTrajectory, dir: f64, i: usize, t: f64, s1: f64) -> f64 {
    match i {
        1 => s1,
        2 => s2(tr, dir, t, s1),
        3 => s3(tr, dir, t, s1),
        4 => s4(tr, dir, t, s1),
        5 => s5(tr, dir, t, s1),
        6 => s6(tr, dir, t, s1),
        _ => unreachable!("shape dimension bounded by MAX_SHAPE_DIM"),
    }
}

/// `ṡᵢᴰ` along the reference (used for `v₂ᴰ = ṡₙᴰ`).
fn s_dot_at(tr: &DesiredTrajectory, dir: f64, i: usize, t: f64, s1: f64) -> f64 {
    let (td, sd) = lift_along(tr, dir, t, s1);
    match i {
        1 => f1(tr, dir, t, s1),
        2 => s2(tr, dir, td, sd).du[0],
        3 => s3(tr, dir, td, sd).du[0],
        4 => s4(tr, dir, td, sd).du[0],
        5 => s5(tr, dir, td, sd).du[0],
        6 => s6(tr, dir, td, sd).du[0],
        _ => unreachable!("shape dimension bounded by MAX_SHAPE_DIM"),
    }
}

/// Generator of reference points along one curve, bound to a model,
/// component, and travel direction. Holds no mutable state: the caller
/// integrates `s₁ᴰ` (see [`ReferenceGenerator::s1_rate`]) and queries
/// points from `(t, s₁ᴰ)`.
#[derive(Debug, Clone)]
pub struct ReferenceGenerator {
    transform: TransformPair,
    trajectory: DesiredTrajectory,
    direction: f64,
    s1_init: f64,
}

/// Build the maneuvering operator for `model` on component `mu`.
///
/// `extra_turns` selects the `2π` branch of the initial heading beyond the
/// direction's default window (forward `(−π, π]`, backward `[0, 2π)`).
pub fn maneuvering_operator(
    model: &WheeledModel,
    mu: &ComponentIndex,
    trajectory: &DesiredTrajectory,
    direction: Direction,
    extra_turns: i32,
) -> Result<ReferenceGenerator, ManeuverError> {
    assert!(model.n() <= MAX_SHAPE_DIM);
    let transform = if model.is_truck_family() {
        build_transform_truck(model, mu)?
    } else {
        build_transform_generic(model, mu)?
    };
    let dir = direction.sign();
    let speed0 = trajectory.speed(0.0);
    if speed0 <= SPEED_FLOOR {
        return Err(ManeuverError::NotAdmissible { t: 0.0, speed: speed0 });
    }
    let v = trajectory.derivative(1, 0.0);
    // (cos s₁, sin s₁) = ẋᴰ(0)/v₁ᴰ(0); atan2 lands in (−π, π], which is the
    // forward window. Backward shifts negatives up into [0, 2π).
    let mut s1 = libm::atan2(dir * v[1], dir * v[0]);
    if matches!(direction, Direction::Backward) && s1 < 0.0 {
        s1 += 2.0 * core::f64::consts::PI;
    }
    s1 += 2.0 * core::f64::consts::PI * f64::from(extra_turns);
    Ok(ReferenceGenerator {
        transform: transform.clone(),
        trajectory: trajectory.clone(),
        direction: dir,
        s1_init: s1,
    })
}

impl ReferenceGenerator {
    pub fn model(&self) -> &WheeledModel {
        self.transform.model()
    }

    pub fn trajectory(&self) -> &DesiredTrajectory {
        &self.trajectory
    }

    pub fn direction(&self) -> f64 {
        self.direction
    }

    pub fn transform(&self) -> &TransformPair {
        &self.transform
    }

    /// Initial value `s₁ᴰ(0)` in the requested branch.
    pub fn initial_s1(&self) -> f64 {
        self.s1_init
    }

    /// ODE right-hand side `ṡ₁ᴰ(t, s₁)`; co-integrate this with the plant.
    pub fn s1_rate(&self, t: f64, s1: f64) -> Result<f64, ManeuverError> {
        self.check_admissible(t)?;
        Ok(f1(&self.trajectory, self.direction, t, s1))
    }

    fn check_admissible(&self, t: f64) -> Result<(), ManeuverError> {
        let speed = self.trajectory.speed(t);
        if speed <= SPEED_FLOOR {
            return Err(ManeuverError::NotAdmissible { t, speed });
        }
        Ok(())
    }

    /// Assemble the full reference point from the integrated `(t, s₁ᴰ)`.
    pub fn point_at(&self, t: f64, s1: f64) -> Result<ReferencePoint, ManeuverError> {
        self.check_admissible(t)?;
        let model = self.transform.model();
        let n = model.n();
        let tr = &self.trajectory;
        let dir = self.direction;
        let sd: Vec<f64> = (1..=n).map(|i| s_at(tr, dir, i, t, s1)).collect();
        let vd = [v1_signed(tr, dir, t), s_dot_at(tr, dir, n, t, s1)];
        let yd = self.transform.inverse(&sd)?;
        let mu = self.transform.component();
        for joint in 2..=n {
            let dev = yd[joint - 1] - mu.offset(joint);
            if !dev.is_finite() || dev.abs() >= core::f64::consts::FRAC_PI_2 {
                return Err(ManeuverError::LeftComponent { joint, value: yd[joint - 1] });
            }
        }
        let ud = self.transform.from_transformed_input(&yd, vd)?;
        let xd = tr.position(t);
        Ok(ReferencePoint {
            t,
            qd: Configuration::new(xd, yd),
            ud,
            sd,
            vd,
            direction: dir,
        })
    }

    /// Integrate `s₁ᴰ` with classical RK4 and sample the reference on a
    /// uniform grid (standalone use; the simulator co-integrates instead).
    pub fn sample(&self, horizon: f64, step: f64) -> Result<Vec<ReferencePoint>, ManeuverError> {
        let steps = libm::ceil(horizon / step - 1e-9) as usize;
        let mut out = Vec::with_capacity(steps + 1);
        let mut s1 = self.s1_init;
        let mut t = 0.0;
        out.push(self.point_at(t, s1)?);
        for k in 0..steps {
            let h = step.min(horizon - t);
            let k1 = self.s1_rate(t, s1)?;
            let k2 = self.s1_rate(t + 0.5 * h, s1 + 0.5 * h * k1)?;
            let k3 = self.s1_rate(t + 0.5 * h, s1 + 0.5 * h * k2)?;
            let k4 = self.s1_rate(t + h, s1 + h * k3)?;
            s1 += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            t = step * (k + 1) as f64;
            out.push(self.point_at(t, s1)?);
        }
        Ok(out)
    }
}

/// Mutually inverse maps between time and arc length along the curve.
#[derive(Debug, Clone)]
pub struct ArcLengthMaps {
    t_grid: Vec<f64>,
    tau_grid: Vec<f64>,
    trajectory: DesiredTrajectory,
}

/// Build `τ(t)` and `t(τ)` on `[0, horizon]` by per-interval Simpson
/// quadrature of the speed.
pub fn arc_length_maps(trajectory: &DesiredTrajectory, horizon: f64) -> ArcLengthMaps {
    let cells = 2048usize.max((horizon * 256.0) as usize);
    let h = horizon / cells as f64;
    let mut t_grid = Vec::with_capacity(cells + 1);
    let mut tau_grid = Vec::with_capacity(cells + 1);
    t_grid.push(0.0);
    tau_grid.push(0.0);
    let mut tau = 0.0;
    for k in 0..cells {
        let a = k as f64 * h;
        tau += h / 6.0
            * (trajectory.speed(a)
                + 4.0 * trajectory.speed(a + 0.5 * h)
                + trajectory.speed(a + h));
        t_grid.push(a + h);
        tau_grid.push(tau);
    }
    ArcLengthMaps { t_grid, tau_grid, trajectory: trajectory.clone() }
}

impl ArcLengthMaps {
    pub fn horizon(&self) -> f64 {
        *self.t_grid.last().unwrap()
    }

    pub fn total_length(&self) -> f64 {
        *self.tau_grid.last().unwrap()
    }

    /// Path length traveled by time `t`.
    pub fn tau_of_t(&self, t: f64) -> f64 {
        let (lo, hi, frac) = bracket(&self.t_grid, t);
        let tau_lin = self.tau_grid[lo] + frac * (self.tau_grid[hi] - self.tau_grid[lo]);
        if lo == hi {
            return tau_lin;
        }
        // Refine with Simpson over [t_lo, t].
        let a = self.t_grid[lo];
        let h = t - a;
        self.tau_grid[lo]
            + h / 6.0
                * (self.trajectory.speed(a)
                    + 4.0 * self.trajectory.speed(a + 0.5 * h)
                    + self.trajectory.speed(t))
    }

    /// Inverse map: the time at which path length `tau` is reached.
    pub fn t_of_tau(&self, tau: f64) -> f64 {
        let (lo, hi, frac) = bracket(&self.tau_grid, tau);
        let mut t = self.t_grid[lo] + frac * (self.t_grid[hi] - self.t_grid[lo]);
        // Newton on τ(t) − tau; dτ/dt = speed ≥ floor > 0.
        for _ in 0..30 {
            let r = self.tau_of_t(t) - tau;
            if r.abs() <= 1e-13 * (1.0 + tau.abs()) {
                break;
            }
            t -= r / self.trajectory.speed(t);
        }
        t
    }
}

/// Locate `v` in a sorted grid: returns `(lo, hi, fraction)`.
fn bracket(grid: &[f64], v: f64) -> (usize, usize, f64) {
    let last = grid.len() - 1;
    if v <= grid[0] {
        return (0, 0, 0.0);
    }
    if v >= grid[last] {
        return (last, last, 0.0);
    }
    let mut lo = 0;
    let mut hi = last;
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if grid[mid] <= v {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let w = grid[hi] - grid[lo];
    ((lo), (hi), if w > 0.0 { (v - grid[lo]) / w } else { 0.0 })
}
