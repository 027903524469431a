//! Chained-form coordinate transform `s = S(y)` and input transform
//! `v = F(y)u`, per component manifold.
//!
//! Two construction routes are provided and cross-checked in tests:
//!
//! - a generic route valid for any maneuverable model, with `S` built from
//!   the repeated Lie derivatives and the inverse solved by projected
//!   Newton iteration inside the component box;
//! - a closed-form route for the truck family, using the affine-in-tangent
//!   structure `Sᵢ = θᵢ·tan yᵢ + ξᵢ` and the explicit arctan inverse.
//!
//! The intercept `ξᵢ` depends only on `y₂…y_{i-1}`; it is recovered by
//! evaluating `Sᵢ` at `yᵢ = μ_{i-1}π`, the point of the chart where the
//! tangent term vanishes.

use core::fmt;

use alloc::vec::Vec;

use crate::jet::{Dual, Scalar};
use crate::maneuver::lie::{check_maneuverability, lie_h1, lie_h2_h1};
use crate::models::{ComponentIndex, ModelError, WheeledModel};

/// Newton parameters for the generic inverse.
const NEWTON_MAX_ITERS: usize = 50;
const NEWTON_TOL: f64 = 1e-12;
/// Clearance kept from the chart boundary when projecting Newton iterates.
const BOX_MARGIN: f64 = 1e-9;

/// Errors from transform construction and evaluation.
#[derive(Debug, Clone, PartialEq)]
pub enum TransformError {
    Model(ModelError),
    /// The model failed the maneuverability conditions.
    NotManeuverable { order: usize },
    /// Generic inversion did not reach tolerance.
    NewtonDiverged { residual: f64 },
    /// `F₂₂(y)` vanished, so the input transform cannot be inverted.
    SingularInputMatrix { value: f64 },
    /// The closed-form route needs truck-family geometry.
    NotTruckFamily,
}

impl From<ModelError> for TransformError {
    fn from(e: ModelError) -> Self {
        TransformError::Model(e)
    }
}

impl fmt::Display for TransformError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TransformError::Model(e) => write!(f, "{e}"),
            TransformError::NotManeuverable { order } => {
                write!(f, "maneuverability condition failed at order {order}")
            }
            TransformError::NewtonDiverged { residual } => {
                write!(f, "inverse iteration stalled with residual {residual:.3e}")
            }
            TransformError::SingularInputMatrix { value } => {
                write!(f, "input matrix singular: F22 = {value:.3e}")
            }
            TransformError::NotTruckFamily => {
                write!(f, "closed-form transform requires a truck-family model")
            }
        }
    }
}

impl core::error::Error for TransformError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Route {
    Generic,
    TruckClosedForm,
}

/// The pair `(S, F)` bound to one component manifold.
#[derive(Debug, Clone)]
pub struct TransformPair {
    model: WheeledModel,
    component: ComponentIndex,
    route: Route,
}

/// Build the transform from the Lie tower, inverse by projected Newton.
pub fn build_transform_generic(
    model: &WheeledModel,
    mu: &ComponentIndex,
) -> Result<TransformPair, TransformError> {
    let report = check_maneuverability(model, 16)?;
    if let Some(w) = report.witness {
        return Err(TransformError::NotManeuverable { order: w.order });
    }
    Ok(TransformPair {
        model: model.clone(),
        component: mu.clone(),
        route: Route::Generic,
    })
}

/// Build the closed-form transform for the truck family.
pub fn build_transform_truck(
    model: &WheeledModel,
    mu: &ComponentIndex,
) -> Result<TransformPair, TransformError> {
    if !model.is_truck_family() {
        return Err(TransformError::NotTruckFamily);
    }
    Ok(TransformPair {
        model: model.clone(),
        component: mu.clone(),
        route: Route::TruckClosedForm,
    })
}

impl TransformPair {
    pub fn model(&self) -> &WheeledModel {
        &self.model
    }

    pub fn component(&self) -> &ComponentIndex {
        &self.component
    }

    /// `σᵢ = Π_{k=2}^i sec yₖ` for `i = 1…upto`, 1-based in `σ[i-1]`.
    fn sigmas<T: Scalar>(y: &[T], upto: usize) -> Vec<T> {
        let mut out = Vec::with_capacity(upto);
        let mut acc = T::one();
        out.push(acc);
        for i in 2..=upto {
            acc = acc * y[i - 1].sec();
            out.push(acc);
        }
        out
    }

    /// Slope `θᵢ = σ_{i-1}² Π_{j=1}^{i-1} lⱼ⁻¹ σⱼ` of `Sᵢ` in `tan yᵢ`.
    fn theta<T: Scalar>(&self, sigmas: &[T], i: usize) -> T {
        let l = self.model.trailer_lengths().unwrap();
        let mut th = sigmas[i - 2] * sigmas[i - 2];
        for j in 1..i {
            th = (th * sigmas[j - 1]).scale(1.0 / l[j - 1]);
        }
        th
    }

    /// Intercept `ξᵢ`: `Sᵢ` with the chart's zero-tangent value in slot `i`.
    fn xi<T: Scalar>(&self, y: &[T], i: usize) -> Result<T, ModelError> {
        let mut at = y.to_vec();
        at[i - 1] = T::lift(self.component.offset(i));
        lie_h1(&self.model, &at, i - 1)
    }

    /// The chained coordinates `s = S(y)`.
    pub fn forward<T: Scalar>(&self, y: &[T]) -> Result<Vec<T>, TransformError> {
        let n = self.model.n();
        match self.route {
            Route::Generic => {
                let mut s = Vec::with_capacity(n);
                for i in 0..n {
                    s.push(lie_h1(&self.model, y, i)?);
                }
                Ok(s)
            }
            Route::TruckClosedForm => {
                let sigmas = Self::sigmas(y, n);
                let mut s = Vec::with_capacity(n);
                s.push(y[0]);
                for i in 2..=n {
                    let th = self.theta(&sigmas, i);
                    let xi = self.xi(y, i)?;
                    s.push(th * y[i - 1].tan() + xi);
                }
                Ok(s)
            }
        }
    }

    /// `∂Sₙ/∂yₙ`, which is also `F₂₂ = L_{h₂}L_{h₁}^{n-1}y₁`.
    fn dsn_dyn(&self, y: &[f64]) -> Result<f64, TransformError> {
        let n = self.model.n();
        match self.route {
            Route::Generic => Ok(lie_h2_h1(&self.model, y, n - 1)?),
            Route::TruckClosedForm => {
                if n == 1 {
                    return Ok(1.0);
                }
                let l = self.model.trailer_lengths().unwrap();
                let sigmas = Self::sigmas(y, n);
                let mut v = sigmas[n - 1] * sigmas[n - 1];
                for j in 1..n {
                    v = v * sigmas[j - 1] / l[j - 1];
                }
                Ok(v)
            }
        }
    }

    /// Input matrix `F(y)`: rows `(1, 0)` and `(L_{h₁}ⁿy₁, L_{h₂}L_{h₁}^{n-1}y₁)`.
    pub fn input_matrix(&self, y: &[f64]) -> Result<[[f64; 2]; 2], TransformError> {
        let n = self.model.n();
        let f21 = lie_h1(&self.model, y, n)?;
        let f22 = self.dsn_dyn(y)?;
        Ok([[1.0, 0.0], [f21, f22]])
    }

    /// `v = F(y)u`.
    pub fn to_transformed_input(&self, y: &[f64], u: [f64; 2]) -> Result<[f64; 2], TransformError> {
        let f = self.input_matrix(y)?;
        Ok([u[0], f[1][0] * u[0] + f[1][1] * u[1]])
    }

    /// `u = F(y)⁻¹v`.
    pub fn from_transformed_input(
        &self,
        y: &[f64],
        v: [f64; 2],
    ) -> Result<[f64; 2], TransformError> {
        let f = self.input_matrix(y)?;
        if f[1][1].abs() < 1e-300 {
            return Err(TransformError::SingularInputMatrix { value: f[1][1] });
        }
        Ok([v[0], (v[1] - f[1][0] * v[0]) / f[1][1]])
    }

    /// `y = S⁻¹(s)`, landing in the bound component.
    pub fn inverse(&self, s: &[f64]) -> Result<Vec<f64>, TransformError> {
        match self.route {
            Route::TruckClosedForm => self.inverse_closed_form(s),
            Route::Generic => self.inverse_newton(s),
        }
    }

    fn inverse_closed_form(&self, s: &[f64]) -> Result<Vec<f64>, TransformError> {
        let n = self.model.n();
        let mut y = Vec::with_capacity(n);
        y.push(s[0]);
        for i in 2..=n {
            // θᵢ and ξᵢ depend only on the already-recovered y₂…y_{i-1};
            // pad the tail with chart centers for the evaluation.
            let mut probe = y.clone();
            for joint in i..=n {
                probe.push(self.component.offset(joint));
            }
            let sigmas = Self::sigmas(&probe, i - 1);
            let th = self.theta(&sigmas, i);
            let xi = self.xi(&probe, i)?;
            y.push(libm::atan((s[i - 1] - xi) / th) + self.component.offset(i));
        }
        Ok(y)
    }

    fn clamp_to_box(&self, v: f64, joint: usize) -> f64 {
        let mid = self.component.offset(joint);
        let half = core::f64::consts::FRAC_PI_2 - BOX_MARGIN;
        v.max(mid - half).min(mid + half)
    }

    /// Damped Newton on the tail coordinates `y₂…yₙ` toward `target`
    /// (`target[i]` compared against `S_{i+2}`); `y` is updated in place.
    fn newton_core(&self, y: &mut [f64], target: &[f64]) -> Result<bool, TransformError> {
        let n = self.model.n();
        let m = n - 1;
        let residual = |y: &[f64]| -> Result<Vec<f64>, TransformError> {
            let sv = self.forward(y)?;
            Ok((1..n).map(|i| sv[i] - target[i - 1]).collect())
        };
        let norm = |r: &[f64]| libm::sqrt(r.iter().map(|v| v * v).sum::<f64>());
        let mut r = residual(y)?;
        for _ in 0..NEWTON_MAX_ITERS {
            if norm(&r) <= NEWTON_TOL {
                return Ok(true);
            }
            // Jacobian of the tail residual, one dual seed per column.
            let mut jac = alloc::vec![0.0f64; m * m];
            for col in 0..m {
                let yd: Vec<Dual<f64, 1>> = y
                    .iter()
                    .enumerate()
                    .map(|(k, &v)| if k == col + 1 { Dual::seeded(v, 0) } else { Dual::constant(v) })
                    .collect();
                let sd = self.forward(&yd)?;
                for row in 0..m {
                    jac[row * m + col] = sd[row + 1].du[0];
                }
            }
            let step = match solve_dense(m, &mut jac, &r) {
                Some(s) => s,
                None => return Ok(false),
            };
            let mut scale = 1.0;
            let mut accepted = false;
            for _ in 0..30 {
                let mut trial = y.to_vec();
                for (i, d) in step.iter().enumerate() {
                    trial[i + 1] = self.clamp_to_box(trial[i + 1] - scale * d, i + 2);
                }
                if let Ok(rt) = residual(&trial) {
                    if norm(&rt) < norm(&r) {
                        y.copy_from_slice(&trial);
                        r = rt;
                        accepted = true;
                        break;
                    }
                }
                scale *= 0.5;
            }
            if !accepted {
                return Ok(false);
            }
        }
        Ok(norm(&r) <= NEWTON_TOL)
    }

    fn inverse_newton(&self, s: &[f64]) -> Result<Vec<f64>, TransformError> {
        let n = self.model.n();
        let mut y = Vec::with_capacity(n);
        y.push(s[0]);
        for joint in 2..=n {
            y.push(self.component.offset(joint));
        }
        if n == 1 {
            return Ok(y);
        }
        let start = self.forward(&y)?;
        let target: Vec<f64> = s[1..].to_vec();
        if self.newton_core(&mut y, &target)? {
            return Ok(y);
        }
        // Direct solve stalled; follow the straight line from S(center) to
        // the target in chained space. Every intermediate point has a
        // solution in the box, so short enough hops keep Newton local.
        let base: Vec<f64> = start[1..].to_vec();
        let mut kappa = 0.0;
        let mut step = 0.25;
        y[1..].iter_mut().enumerate().for_each(|(i, v)| *v = self.component.offset(i + 2));
        while kappa < 1.0 {
            if step < 1e-6 {
                return Err(TransformError::NewtonDiverged { residual: 1.0 - kappa });
            }
            let k_next = (kappa + step).min(1.0);
            let mid: Vec<f64> = base
                .iter()
                .zip(target.iter())
                .map(|(&b, &t)| b + k_next * (t - b))
                .collect();
            let mut trial = y.clone();
            if self.newton_core(&mut trial, &mid)? {
                y = trial;
                kappa = k_next;
                step *= 1.5;
            } else {
                step *= 0.5;
            }
        }
        Ok(y)
    }

    /// Closed-form diagonal slopes `∂Sᵢ/∂yᵢ = σᵢ² Π_{j<i} lⱼ⁻¹σⱼ` for
    /// `i = 1…n` (the first entry is 1). Truck family only. Because `S` is
    /// lower triangular in the shape coordinates, their product is
    /// `det ∂S/∂y`.
    pub fn chain_diagonal(&self, y: &[f64]) -> Result<Vec<f64>, TransformError> {
        if !self.model.is_truck_family() {
            return Err(TransformError::NotTruckFamily);
        }
        let n = self.model.n();
        let l = self.model.trailer_lengths().unwrap();
        let sigmas = Self::sigmas(y, n);
        let mut out = Vec::with_capacity(n);
        out.push(1.0);
        for i in 2..=n {
            let mut v = sigmas[i - 1] * sigmas[i - 1];
            for j in 1..i {
                v = v * sigmas[j - 1] / l[j - 1];
            }
            out.push(v);
        }
        Ok(out)
    }

    /// Jacobian `∂S/∂y` (row-major n×n) from dual-number columns.
    pub fn jacobian(&self, y: &[f64]) -> Result<Vec<f64>, TransformError> {
        let n = self.model.n();
        let mut jac = alloc::vec![0.0f64; n * n];
        for col in 0..n {
            let yd: Vec<Dual<f64, 1>> = y
                .iter()
                .enumerate()
                .map(|(k, &v)| if k == col { Dual::seeded(v, 0) } else { Dual::constant(v) })
                .collect();
            let sd = self.forward(&yd)?;
            for row in 0..n {
                jac[row * n + col] = sd[row].du[0];
            }
        }
        Ok(jac)
    }

    /// `|det ∂S/∂y|`.
    pub fn jacobian_det_abs(&self, y: &[f64]) -> Result<f64, TransformError> {
        let n = self.model.n();
        let jac = self.jacobian(y)?;
        Ok(det_abs(n, jac))
    }
}

/// Solve `A x = b` by Gaussian elimination with partial pivoting; `a` is
/// row-major and is consumed.
fn solve_dense(n: usize, a: &mut [f64], b: &[f64]) -> Option<Vec<f64>> {
    let mut x = b.to_vec();
    for col in 0..n {
        let mut pivot = col;
        for row in col + 1..n {
            if a[row * n + col].abs() > a[pivot * n + col].abs() {
                pivot = row;
            }
        }
        if a[pivot * n + col].abs() < 1e-300 {
            return None;
        }
        if pivot != col {
            for k in 0..n {
                a.swap(col * n + k, pivot * n + k);
            }
            x.swap(col, pivot);
        }
        for row in col + 1..n {
            let f = a[row * n + col] / a[col * n + col];
            for k in col..n {
                a[row * n + k] -= f * a[col * n + k];
            }
            x[row] -= f * x[col];
        }
    }
    for col in (0..n).rev() {
        x[col] /= a[col * n + col];
        for row in 0..col {
            x[row] -= a[row * n + col] * x[col];
        }
    }
    Some(x)
}

fn det_abs(n: usize, mut a: Vec<f64>) -> f64 {
    let mut det = 1.0f64;
    for col in 0..n {
        let mut pivot = col;
        for row in col + 1..n {
            if a[row * n + col].abs() > a[pivot * n + col].abs() {
                pivot = row;
            }
        }
        if a[pivot * n + col] == 0.0 {
            return 0.0;
        }
        if pivot != col {
            for k in 0..n {
                a.swap(col * n + k, pivot * n + k);
            }
        }
        det *= a[col * n + col];
        for row in col + 1..n {
            let f = a[row * n + col] / a[col * n + col];
            for k in col..n {
                a[row * n + k] -= f * a[col * n + k];
            }
        }
    }
    det.abs()
}
