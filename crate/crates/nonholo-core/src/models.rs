//! Kinematic models of wheeled vehicles.
//!
//! Every model is of the planar form
//! `ẋ = u₁(cos y₁, sin y₁)`, `ẏ = u₁h₁(y) + u₂h₂(y)`, where `x` is the
//! distinguished point and `y` the shape coordinates (heading first).
//! The catalog covers the Chaplygin sled, the rear- and front-axle
//! automobile, and the truck with trailers; the truck family also carries
//! the axle-chain geometry and nonholonomic constraint residuals used for
//! cross-checking simulated trajectories.
//!
//! Angles are stored unwrapped; chart normalization happens only when a
//! configuration is classified into a component manifold.

use core::fmt;

use alloc::vec;
use alloc::vec::Vec;

use crate::jet::Scalar;
use crate::MAX_SHAPE_DIM;

/// Tolerance on `cos yᵢ` below which a state counts as sitting on a
/// component boundary.
pub const BOUNDARY_TOL: f64 = 1e-12;

/// Errors from model construction and evaluation.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelError {
    /// A trailer length was not strictly positive.
    NonPositiveLength { index: usize, value: f64 },
    /// Evaluation hit `cos yᵢ = 0` for some joint/steer angle.
    Singularity { joint: usize, angle: f64 },
    /// A state sits on a component-manifold boundary.
    Boundary { joint: usize, angle: f64 },
    /// Vector length does not match the model dimension.
    DimensionMismatch { expected: usize, got: usize },
    /// The operation needs trailer geometry this model does not have.
    UnsupportedModel(&'static str),
    /// Shape dimension beyond what the controller recursion supports.
    ShapeDimTooLarge { n: usize },
}

impl fmt::Display for ModelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelError::NonPositiveLength { index, value } => {
                write!(f, "trailer length l{} must be positive, got {value}", index + 1)
            }
            ModelError::Singularity { joint, angle } => {
                write!(f, "cos y{joint} vanishes at y{joint} = {angle}")
            }
            ModelError::Boundary { joint, angle } => {
                write!(f, "state on component boundary: y{joint} = {angle}")
            }
            ModelError::DimensionMismatch { expected, got } => {
                write!(f, "dimension mismatch: expected {expected}, got {got}")
            }
            ModelError::UnsupportedModel(what) => {
                write!(f, "operation requires a truck-family model: {what}")
            }
            ModelError::ShapeDimTooLarge { n } => {
                write!(f, "shape dimension {n} exceeds supported maximum {MAX_SHAPE_DIM}")
            }
        }
    }
}

impl core::error::Error for ModelError {}

/// Wrap an angle into `(-π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = 2.0 * core::f64::consts::PI;
    let mut w = libm::fmod(a + core::f64::consts::PI, two_pi);
    if w <= 0.0 {
        w += two_pi;
    }
    w - core::f64::consts::PI
}

/// Full vehicle state: planar position of the distinguished point plus the
/// shape coordinates `y = (y₁, …, yₙ)` with `y₁` the heading angle.
#[derive(Debug, Clone, PartialEq)]
pub struct Configuration {
    /// Position of the distinguished point (m).
    pub x: [f64; 2],
    /// Shape coordinates (rad), heading first, stored unwrapped.
    pub y: Vec<f64>,
}

impl Configuration {
    pub fn new(x: [f64; 2], y: Vec<f64>) -> Self {
        Configuration { x, y }
    }

    /// Flatten to `(x₁, x₂, y₁, …, yₙ)`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut q = Vec::with_capacity(self.y.len() + 2);
        q.extend_from_slice(&self.x);
        q.extend_from_slice(&self.y);
        q
    }

    pub fn from_slice(q: &[f64]) -> Self {
        Configuration { x: [q[0], q[1]], y: q[2..].to_vec() }
    }
}

/// Which component manifold a state lives in: one bit per joint angle,
/// `0` for the branch around `0`, `1` for the branch around `π`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComponentIndex {
    pub mu: Vec<u8>,
}

impl ComponentIndex {
    pub fn new(mu: Vec<u8>) -> Self {
        ComponentIndex { mu }
    }

    /// Chart offset `μ_{i-1}·π` for joint `i` (2-based, matching `yᵢ`).
    pub fn offset(&self, joint: usize) -> f64 {
        f64::from(self.mu[joint - 2]) * core::f64::consts::PI
    }

    /// All `2^(n-1)` components of an `n`-dimensional shape space.
    pub fn all(n: usize) -> Vec<ComponentIndex> {
        let bits = n.saturating_sub(1);
        (0..(1usize << bits))
            .map(|code| {
                ComponentIndex::new((0..bits).map(|b| ((code >> b) & 1) as u8).collect())
            })
            .collect()
    }
}

impl fmt::Display for ComponentIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, b) in self.mu.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{b}")?;
        }
        write!(f, ")")
    }
}

/// Reconstructed axle geometry of a truck-family vehicle.
#[derive(Debug, Clone, PartialEq)]
pub struct AxleChain {
    /// Axle midpoints χ₁…χₙ (m); χ₁ is the distinguished point.
    pub chi: Vec<[f64; 2]>,
    /// Cumulative headings ψᵢ = Σ_{k≤i} yₖ (rad).
    pub psi: Vec<f64>,
    /// Unit wheel directions τᵢ = (cos ψᵢ, sin ψᵢ).
    pub tau_vec: Vec<[f64; 2]>,
    /// Unit axle directions νᵢ = (-sin ψᵢ, cos ψᵢ).
    pub nu_vec: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ModelKind {
    ChaplyginSled,
    Automobile,
    AutomobileFrontAxle,
    Truck,
}

/// A wheeled vehicle model: shape dimension, the drift/steering fields
/// `h₁, h₂`, and (for the truck family) the trailer lengths.
#[derive(Debug, Clone, PartialEq)]
pub struct WheeledModel {
    kind: ModelKind,
    n: usize,
    trailer_lengths: Option<Vec<f64>>,
    name: &'static str,
}

/// The Chaplygin sled: one wheel plus sleeve bearings, `n = 1`,
/// `ẏ₁ = u₂`. Defined on the whole configuration manifold.
pub fn chaplygin_sled() -> WheeledModel {
    WheeledModel {
        kind: ModelKind::ChaplyginSled,
        n: 1,
        trailer_lengths: Some(Vec::new()),
        name: "chaplygin_sled",
    }
}

/// The rear-axle automobile with unit wheelbase: `n = 2`,
/// `h₁ = (tan y₂, 0)`, `h₂ = (0, 1)`.
pub fn automobile() -> WheeledModel {
    WheeledModel {
        kind: ModelKind::Automobile,
        n: 2,
        trailer_lengths: Some(vec![1.0]),
        name: "automobile",
    }
}

/// The automobile with the distinguished point on the front axle:
/// `h₁ = (sin y₂, 0)`, `h₂ = (1, 1)`. Defined everywhere but not
/// maneuverable.
pub fn automobile_front_axle() -> WheeledModel {
    WheeledModel {
        kind: ModelKind::AutomobileFrontAxle,
        n: 2,
        trailer_lengths: None,
        name: "automobile_front_axle",
    }
}

/// A truck with `lengths.len() - 1` trailers; `n = lengths.len() + 1`.
/// Trailers are enumerated from the tail end, `lᵢ` is the length of the
/// `i`th half-trailer.
pub fn truck_with_trailers(lengths: &[f64]) -> Result<WheeledModel, ModelError> {
    for (i, &l) in lengths.iter().enumerate() {
        if !(l > 0.0) {
            return Err(ModelError::NonPositiveLength { index: i, value: l });
        }
    }
    let n = lengths.len() + 1;
    if n > MAX_SHAPE_DIM {
        return Err(ModelError::ShapeDimTooLarge { n });
    }
    Ok(WheeledModel {
        kind: ModelKind::Truck,
        n,
        trailer_lengths: Some(lengths.to_vec()),
        name: "truck",
    })
}

impl WheeledModel {
    /// Shape dimension `n`.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn name(&self) -> &'static str {
        self.name
    }

    /// Trailer lengths, when the model has axle-chain geometry.
    pub fn trailer_lengths(&self) -> Option<&[f64]> {
        self.trailer_lengths.as_deref()
    }

    /// Whether the model is in the truck family (sled, automobile, truck),
    /// i.e. carries axle geometry and the closed-form chained transform.
    pub fn is_truck_family(&self) -> bool {
        self.trailer_lengths.is_some()
    }

    fn check_joint_domain<T: Scalar>(&self, y: &[T]) -> Result<(), ModelError> {
        if matches!(self.kind, ModelKind::AutomobileFrontAxle) {
            return Ok(());
        }
        for i in 2..=self.n {
            let angle = y[i - 1].primal();
            if libm::cos(angle).abs() <= BOUNDARY_TOL {
                return Err(ModelError::Singularity { joint: i, angle });
            }
        }
        Ok(())
    }

    fn check_y_len(&self, len: usize) -> Result<(), ModelError> {
        if len != self.n {
            return Err(ModelError::DimensionMismatch { expected: self.n, got: len });
        }
        Ok(())
    }

    /// The shape drift field `h₁(y)`.
    pub fn h1<T: Scalar>(&self, y: &[T]) -> Result<Vec<T>, ModelError> {
        self.check_y_len(y.len())?;
        self.check_joint_domain(y)?;
        Ok(match self.kind {
            ModelKind::ChaplyginSled => vec![T::zero()],
            ModelKind::Automobile => vec![y[1].tan(), T::zero()],
            ModelKind::AutomobileFrontAxle => vec![y[1].sin(), T::zero()],
            ModelKind::Truck => {
                let l = self.trailer_lengths.as_ref().unwrap();
                let n = self.n;
                let mut h = Vec::with_capacity(n);
                // η₁ = tan(y₂)/l₁
                if n >= 2 {
                    h.push(y[1].tan().scale(1.0 / l[0]));
                }
                // ηᵢ = (tan(y_{i+1})/lᵢ - sin(yᵢ)/l_{i-1}) Π_{k=2..i} sec yₖ
                let mut sec_prod = T::one();
                for i in 2..n {
                    sec_prod = sec_prod * y[i - 1].sec();
                    let eta = (y[i].tan().scale(1.0 / l[i - 1])
                        - y[i - 1].sin().scale(1.0 / l[i - 2]))
                        * sec_prod;
                    h.push(eta);
                }
                h.push(T::zero());
                h
            }
        })
    }

    /// The steering field `h₂(y)`.
    pub fn h2<T: Scalar>(&self, y: &[T]) -> Result<Vec<T>, ModelError> {
        self.check_y_len(y.len())?;
        Ok(match self.kind {
            ModelKind::ChaplyginSled => vec![T::one()],
            ModelKind::Automobile => vec![T::zero(), T::one()],
            ModelKind::AutomobileFrontAxle => vec![T::one(), T::one()],
            ModelKind::Truck => {
                let mut h = vec![T::zero(); self.n];
                h[self.n - 1] = T::one();
                h
            }
        })
    }

    /// Full right-hand side `(ẋ₁, ẋ₂, ẏ)` at `q = (x, y)` under input `u`.
    pub fn rhs<T: Scalar>(&self, q: &[T], u: [T; 2]) -> Result<Vec<T>, ModelError> {
        if q.len() != self.n + 2 {
            return Err(ModelError::DimensionMismatch { expected: self.n + 2, got: q.len() });
        }
        let y = &q[2..];
        let h1 = self.h1(y)?;
        let h2 = self.h2(y)?;
        let mut dq = Vec::with_capacity(self.n + 2);
        dq.push(u[0] * y[0].cos());
        dq.push(u[0] * y[0].sin());
        for i in 0..self.n {
            dq.push(u[0] * h1[i] + u[1] * h2[i]);
        }
        Ok(dq)
    }

    /// Classify the shape state into its component manifold.
    pub fn component_of(&self, y: &[f64]) -> Result<ComponentIndex, ModelError> {
        self.check_y_len(y.len())?;
        let mut mu = Vec::with_capacity(self.n.saturating_sub(1));
        for i in 2..=self.n {
            let angle = y[i - 1];
            if libm::cos(angle).abs() <= BOUNDARY_TOL {
                return Err(ModelError::Boundary { joint: i, angle });
            }
            let wrapped = wrap_angle(angle);
            mu.push(u8::from(wrapped.abs() > core::f64::consts::FRAC_PI_2));
        }
        Ok(ComponentIndex::new(mu))
    }

    /// Reconstruct axle midpoints and headings from the configuration.
    pub fn axle_chain(&self, q: &Configuration) -> Result<AxleChain, ModelError> {
        let lengths = self
            .trailer_lengths
            .as_ref()
            .ok_or(ModelError::UnsupportedModel("axle_chain"))?;
        self.check_y_len(q.y.len())?;
        let n = self.n;
        let mut psi = Vec::with_capacity(n);
        let mut acc = 0.0;
        for &yi in &q.y {
            acc += yi;
            psi.push(acc);
        }
        let tau_vec: Vec<[f64; 2]> =
            psi.iter().map(|&p| [libm::cos(p), libm::sin(p)]).collect();
        let nu_vec: Vec<[f64; 2]> =
            psi.iter().map(|&p| [-libm::sin(p), libm::cos(p)]).collect();
        let mut chi = Vec::with_capacity(n);
        chi.push(q.x);
        for i in 0..lengths.len() {
            let prev = chi[i];
            chi.push([
                prev[0] + lengths[i] * tau_vec[i][0],
                prev[1] + lengths[i] * tau_vec[i][1],
            ]);
        }
        Ok(AxleChain { chi, psi, tau_vec, nu_vec })
    }

    /// Left-hand sides of the `n` rolling constraints at `(q, q̇)`.
    ///
    /// Along any trajectory generated by [`WheeledModel::rhs`] these vanish
    /// to integration tolerance.
    pub fn constraint_residuals(
        &self,
        q: &Configuration,
        qdot: &[f64],
    ) -> Result<Vec<f64>, ModelError> {
        let lengths = self
            .trailer_lengths
            .as_ref()
            .ok_or(ModelError::UnsupportedModel("constraint_residuals"))?;
        if qdot.len() != self.n + 2 {
            return Err(ModelError::DimensionMismatch { expected: self.n + 2, got: qdot.len() });
        }
        let chain = self.axle_chain(q)?;
        let (xd1, xd2) = (qdot[0], qdot[1]);
        // ψ̇ⱼ = Σ_{k≤j} ẏₖ
        let mut psidot = Vec::with_capacity(self.n);
        let mut acc = 0.0;
        for k in 0..self.n {
            acc += qdot[2 + k];
            psidot.push(acc);
        }
        let mut res = Vec::with_capacity(self.n);
        for i in 0..self.n {
            let mut r = libm::sin(chain.psi[i]) * xd1 - libm::cos(chain.psi[i]) * xd2;
            for j in 0..i {
                r -= lengths[j] * libm::cos(chain.psi[j] - chain.psi[i]) * psidot[j];
            }
            res.push(r);
        }
        Ok(res)
    }

    /// Truck rear-axle speed `ũ₁ = u₁ Π_{k=2}^{n-1} sec yₖ` corresponding
    /// to tail-trailer speed `u₁`.
    pub fn alternative_input(&self, y: &[f64], u1: f64) -> Result<f64, ModelError> {
        if self.trailer_lengths.is_none() {
            return Err(ModelError::UnsupportedModel("alternative_input"));
        }
        self.check_y_len(y.len())?;
        let mut factor = 1.0;
        for k in 2..self.n {
            let c = libm::cos(y[k - 1]);
            if c.abs() <= BOUNDARY_TOL {
                return Err(ModelError::Singularity { joint: k, angle: y[k - 1] });
            }
            factor /= c;
        }
        Ok(u1 * factor)
    }
}
