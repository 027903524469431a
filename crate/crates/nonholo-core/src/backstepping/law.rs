//! Assembly of the tracking feedback: the stacked stabilizer Ψ, the error
//! coordinates, and the configuration-space law Φ/U dispatched over
//! component manifolds.

use core::fmt;

use alloc::vec::Vec;

use crate::backstepping::stage::{lambda, Gains, Stage, Step, XStage};
use crate::maneuver::reference::{
    maneuvering_operator, Direction, ManeuverError, ReferenceGenerator, ReferencePoint,
};
use crate::maneuver::trajectory::DesiredTrajectory;
use crate::maneuver::transform::{
    build_transform_generic, build_transform_truck, TransformError, TransformPair,
};
use crate::models::{ComponentIndex, Configuration, ModelError, WheeledModel};

/// Errors from feedback evaluation.
#[derive(Debug, Clone, PartialEq)]
pub enum LawError {
    Model(ModelError),
    Transform(TransformError),
    Maneuver(ManeuverError),
    /// The reference input has zero forward speed.
    ZeroReferenceSpeed,
    /// The plant state is not in the component the law was built for.
    WrongComponent { expected: ComponentIndex, found: ComponentIndex },
    InvalidGains,
}

impl From<ModelError> for LawError {
    fn from(e: ModelError) -> Self {
        LawError::Model(e)
    }
}

impl From<TransformError> for LawError {
    fn from(e: TransformError) -> Self {
        LawError::Transform(e)
    }
}

impl From<ManeuverError> for LawError {
    fn from(e: ManeuverError) -> Self {
        LawError::Maneuver(e)
    }
}

impl fmt::Display for LawError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LawError::Model(e) => write!(f, "{e}"),
            LawError::Transform(e) => write!(f, "{e}"),
            LawError::Maneuver(e) => write!(f, "{e}"),
            LawError::ZeroReferenceSpeed => write!(f, "reference input u₁ᴰ is zero"),
            LawError::WrongComponent { expected, found } => {
                write!(f, "state in component {found}, law built for {expected}")
            }
            LawError::InvalidGains => write!(f, "gains must be strictly positive"),
        }
    }
}

impl core::error::Error for LawError {}

/// Tracking error in arc-length time.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorState {
    /// Planar error x − xᴰ (m).
    pub x_tilde: [f64; 2],
    /// Chained error s − sᴰ.
    pub s_tilde: Vec<f64>,
    /// Arc length traveled by the reference (m).
    pub tau: f64,
}

/// Error coordinates plus the speed-normalized inputs
/// `w = v/|v̄₁|`; `scale_back` is `|v̄₁|`, the factor restoring `v`.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorFrame {
    pub error: ErrorState,
    pub w: [f64; 2],
    pub w_bar1: f64,
    pub scale_back: f64,
}

/// Map `(q, s, v)` against a reference point into the τ-domain error
/// coordinates and normalized inputs.
pub fn error_coordinates(
    q: &Configuration,
    s: &[f64],
    v: [f64; 2],
    reference: &ReferencePoint,
    tau: f64,
) -> Result<ErrorFrame, LawError> {
    let v1_bar = reference.vd[0];
    if v1_bar == 0.0 {
        return Err(LawError::ZeroReferenceSpeed);
    }
    let scale = v1_bar.abs();
    Ok(ErrorFrame {
        error: ErrorState {
            x_tilde: [q.x[0] - reference.qd.x[0], q.x[1] - reference.qd.x[1]],
            s_tilde: s.iter().zip(reference.sd.iter()).map(|(&a, &b)| a - b).collect(),
            tau,
        },
        w: [v[0] / scale, v[1] / scale],
        w_bar1: reference.direction,
        scale_back: scale,
    })
}

/// Restore transformed inputs from normalized ones: `v = |v̄₁| w`.
pub fn w_to_v(w: [f64; 2], scale_back: f64) -> [f64; 2] {
    [w[0] * scale_back, w[1] * scale_back]
}

// One concrete nesting per supported shape dimension.
type Psi1 = Step<XStage>;
type Psi2 = Step<Psi1>;
type Psi3 = Step<Psi2>;
type Psi4 = Step<Psi3>;
type Psi5 = Step<Psi4>;
type Psi6 = Step<Psi5>;

/// The stacked feedback `Ψ(x̃, s̃, s̄, v̄) = (λ, αₙ(zⁿ, pⁿ, w̄₁))` for a
/// shape dimension fixed at construction.
#[derive(Debug, Clone)]
pub enum Psi {
    N1(Psi1),
    N2(Psi2),
    N3(Psi3),
    N4(Psi4),
    N5(Psi5),
    N6(Psi6),
}

fn step<S: Stage>(inner: S, index: usize, n: usize, gains: &Gains) -> Step<S> {
    Step {
        inner,
        index,
        terminal: index == n,
        delta: gains.deltas[index - 1],
        gamma: gains.gamma,
    }
}

impl Psi {
    /// Compose the x-stage with `n` backstepping steps.
    pub fn build(n: usize, gains: &Gains) -> Result<Psi, LawError> {
        if !gains.is_valid() || gains.deltas.len() < n {
            return Err(LawError::InvalidGains);
        }
        let x = XStage { gamma: gains.gamma };
        Ok(match n {
            1 => Psi::N1(step(x, 1, n, gains)),
            2 => Psi::N2(step(step(x, 1, n, gains), 2, n, gains)),
            3 => Psi::N3(step(step(step(x, 1, n, gains), 2, n, gains), 3, n, gains)),
            4 => Psi::N4(step(
                step(step(step(x, 1, n, gains), 2, n, gains), 3, n, gains),
                4,
                n,
                gains,
            )),
            5 => Psi::N5(step(
                step(step(step(step(x, 1, n, gains), 2, n, gains), 3, n, gains), 4, n, gains),
                5,
                n,
                gains,
            )),
            6 => Psi::N6(step(
                step(
                    step(step(step(step(x, 1, n, gains), 2, n, gains), 3, n, gains), 4, n, gains),
                    5,
                    n,
                    gains,
                ),
                6,
                n,
                gains,
            )),
            n => return Err(LawError::Model(ModelError::ShapeDimTooLarge { n })),
        })
    }

    pub fn n(&self) -> usize {
        match self {
            Psi::N1(_) => 1,
            Psi::N2(_) => 2,
            Psi::N3(_) => 3,
            Psi::N4(_) => 4,
            Psi::N5(_) => 5,
            Psi::N6(_) => 6,
        }
    }

    pub fn gamma(&self) -> f64 {
        match self {
            Psi::N1(s) => s.gamma,
            Psi::N2(s) => s.gamma,
            Psi::N3(s) => s.gamma,
            Psi::N4(s) => s.gamma,
            Psi::N5(s) => s.gamma,
            Psi::N6(s) => s.gamma,
        }
    }

    fn pack(
        &self,
        x_tilde: [f64; 2],
        s_tilde: &[f64],
        s_bar: &[f64],
        v_bar: [f64; 2],
    ) -> Result<(Vec<f64>, Vec<f64>, f64), LawError> {
        let n = self.n();
        debug_assert_eq!(s_tilde.len(), n);
        debug_assert_eq!(s_bar.len(), n);
        if v_bar[0] == 0.0 {
            return Err(LawError::ZeroReferenceSpeed);
        }
        let w1 = if v_bar[0] > 0.0 { 1.0 } else { -1.0 };
        let mut z = Vec::with_capacity(n + 2);
        z.extend_from_slice(&x_tilde);
        z.extend_from_slice(s_tilde);
        let mut p = Vec::with_capacity(n + 2);
        p.push(libm::cos(s_bar[0]));
        p.push(libm::sin(s_bar[0]));
        p.extend_from_slice(&s_bar[1..]);
        p.push(v_bar[1] / v_bar[0]);
        Ok((z, p, w1))
    }

    /// `Ψ = (λ, w₂)`, the normalized feedback in arc-length time.
    pub fn evaluate(
        &self,
        x_tilde: [f64; 2],
        s_tilde: &[f64],
        s_bar: &[f64],
        v_bar: [f64; 2],
    ) -> Result<[f64; 2], LawError> {
        let (z, p, w1) = self.pack(x_tilde, s_tilde, s_bar, v_bar)?;
        let lam = lambda([z[0], z[1]], [p[0], p[1]], w1, self.gamma());
        let w2 = match self {
            Psi::N1(s) => s.alpha(&z, &p, w1),
            Psi::N2(s) => s.alpha(&z, &p, w1),
            Psi::N3(s) => s.alpha(&z, &p, w1),
            Psi::N4(s) => s.alpha(&z, &p, w1),
            Psi::N5(s) => s.alpha(&z, &p, w1),
            Psi::N6(s) => s.alpha(&z, &p, w1),
        };
        Ok([lam, w2])
    }

    /// The composite Lyapunov value `V̂ₙ` at the same arguments Ψ sees.
    pub fn lyapunov(
        &self,
        x_tilde: [f64; 2],
        s_tilde: &[f64],
        s_bar: &[f64],
        v_bar: [f64; 2],
    ) -> Result<f64, LawError> {
        let (z, p, w1) = self.pack(x_tilde, s_tilde, s_bar, v_bar)?;
        Ok(match self {
            Psi::N1(s) => s.lyap(&z, &p, w1),
            Psi::N2(s) => s.lyap(&z, &p, w1),
            Psi::N3(s) => s.lyap(&z, &p, w1),
            Psi::N4(s) => s.lyap(&z, &p, w1),
            Psi::N5(s) => s.lyap(&z, &p, w1),
            Psi::N6(s) => s.lyap(&z, &p, w1),
        })
    }
}

/// The configuration-space feedback Φ for one component manifold.
#[derive(Debug, Clone)]
pub struct FeedbackLaw {
    transform: TransformPair,
    psi: Psi,
}

impl FeedbackLaw {
    pub fn new(
        model: &WheeledModel,
        mu: &ComponentIndex,
        gains: &Gains,
    ) -> Result<Self, LawError> {
        let transform = if model.is_truck_family() {
            build_transform_truck(model, mu)?
        } else {
            build_transform_generic(model, mu)?
        };
        Ok(FeedbackLaw { transform, psi: Psi::build(model.n(), gains)? })
    }

    pub fn transform(&self) -> &TransformPair {
        &self.transform
    }

    pub fn psi(&self) -> &Psi {
        &self.psi
    }

    pub fn component(&self) -> &ComponentIndex {
        self.transform.component()
    }

    fn check_component(&self, y: &[f64]) -> Result<(), LawError> {
        let found = self.transform.model().component_of(y)?;
        if &found != self.transform.component() {
            return Err(LawError::WrongComponent {
                expected: self.transform.component().clone(),
                found,
            });
        }
        Ok(())
    }

    /// `Φ(q, qᴰ, uᴰ) = F(y)⁻¹{|u₁ᴰ|Ψ(x − xᴰ, S(y) − S(yᴰ), S(yᴰ), F(yᴰ)uᴰ)
    /// + F₂(yᴰ)uᴰ}` with `F₂ = diag(0, 1)F`.
    pub fn phi(
        &self,
        q: &Configuration,
        qd: &Configuration,
        ud: [f64; 2],
    ) -> Result<[f64; 2], LawError> {
        if ud[0] == 0.0 {
            return Err(LawError::ZeroReferenceSpeed);
        }
        self.check_component(&q.y)?;
        self.check_component(&qd.y)?;
        let s = self.transform.forward(&q.y)?;
        let sd = self.transform.forward(&qd.y)?;
        let vd = self.transform.to_transformed_input(&qd.y, ud)?;
        let x_tilde = [q.x[0] - qd.x[0], q.x[1] - qd.x[1]];
        let s_tilde: Vec<f64> = s.iter().zip(sd.iter()).map(|(&a, &b)| a - b).collect();
        let psi = self.psi.evaluate(x_tilde, &s_tilde, &sd, vd)?;
        let speed = ud[0].abs();
        let v = [speed * psi[0], speed * psi[1] + vd[1]];
        Ok(self.transform.from_transformed_input(&q.y, v)?)
    }

    /// `V̂ₙ` at the state Φ sees; the decay diagnostics call this.
    pub fn lyapunov(
        &self,
        q: &Configuration,
        qd: &Configuration,
        ud: [f64; 2],
    ) -> Result<f64, LawError> {
        let s = self.transform.forward(&q.y)?;
        let sd = self.transform.forward(&qd.y)?;
        let vd = self.transform.to_transformed_input(&qd.y, ud)?;
        let x_tilde = [q.x[0] - qd.x[0], q.x[1] - qd.x[1]];
        let s_tilde: Vec<f64> = s.iter().zip(sd.iter()).map(|(&a, &b)| a - b).collect();
        self.psi.lyapunov(x_tilde, &s_tilde, &sd, vd)
    }
}

/// One dispatch branch: component, its feedback law, and its reference
/// generator.
#[derive(Debug, Clone)]
pub struct LawBranch {
    pub component: ComponentIndex,
    pub law: FeedbackLaw,
    pub reference: ReferenceGenerator,
}

/// The piecewise control law `U(t, q, ·)`: one branch per component
/// manifold, dispatched on where the shape state lives.
#[derive(Debug, Clone)]
pub struct ControlLaw {
    model: WheeledModel,
    branches: Vec<LawBranch>,
}

/// Build all `2^(n-1)` branches for one trajectory and travel direction.
pub fn control_law(
    model: &WheeledModel,
    gains: &Gains,
    trajectory: &DesiredTrajectory,
    direction: Direction,
) -> Result<ControlLaw, LawError> {
    let mut branches = Vec::new();
    for mu in ComponentIndex::all(model.n()) {
        let law = FeedbackLaw::new(model, &mu, gains)?;
        let reference = maneuvering_operator(model, &mu, trajectory, direction, 0)?;
        branches.push(LawBranch { component: mu, law, reference });
    }
    Ok(ControlLaw { model: model.clone(), branches })
}

impl ControlLaw {
    pub fn model(&self) -> &WheeledModel {
        &self.model
    }

    pub fn branches(&self) -> &[LawBranch] {
        &self.branches
    }

    /// The branch whose component contains `y`.
    pub fn branch_for(&self, y: &[f64]) -> Result<&LawBranch, LawError> {
        let mu = self.model.component_of(y)?;
        Ok(self
            .branches
            .iter()
            .find(|b| b.component == mu)
            .expect("all components enumerated at construction"))
    }

    /// `U(t, q)` given the co-integrated reference chart state `s₁ᴰ`.
    pub fn input(&self, t: f64, q: &Configuration, s1_d: f64) -> Result<[f64; 2], LawError> {
        let branch = self.branch_for(&q.y)?;
        let rp = branch.reference.point_at(t, s1_d)?;
        branch.law.phi(q, &rp.qd, rp.ud)
    }
}
