//! Fixed-step closed-loop integration (plant + reference chart ODE + arc
//! length as one augmented state), trace recording, and run diagnostics.

use core::fmt;

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::backstepping::law::{control_law, ControlLaw, LawBranch, LawError};
use crate::backstepping::stage::Gains;
use crate::maneuver::reference::Direction;
use crate::maneuver::trajectory::DesiredTrajectory;
use crate::models::{ComponentIndex, Configuration, ModelError, WheeledModel};

/// Default integration step (s).
pub const DEFAULT_STEP: f64 = 1e-3;

/// Errors rejecting a scenario before integration starts.
#[derive(Debug, Clone, PartialEq)]
pub enum SimError {
    Law(LawError),
    Model(ModelError),
    InvalidScenario(&'static str),
}

impl From<LawError> for SimError {
    fn from(e: LawError) -> Self {
        SimError::Law(e)
    }
}

impl From<ModelError> for SimError {
    fn from(e: ModelError) -> Self {
        SimError::Model(e)
    }
}

impl fmt::Display for SimError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimError::Law(e) => write!(f, "{e}"),
            SimError::Model(e) => write!(f, "{e}"),
            SimError::InvalidScenario(msg) => write!(f, "invalid scenario: {msg}"),
        }
    }
}

impl core::error::Error for SimError {}

/// One closed-loop run specification.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub model: WheeledModel,
    pub trajectory: DesiredTrajectory,
    pub direction: Direction,
    pub gains: Gains,
    pub initial: Configuration,
    /// Horizon (s).
    pub horizon: f64,
    /// Integration step (s).
    pub step: f64,
    /// Record every `decimation`-th integrator step (plus the final one).
    pub decimation: usize,
}

impl Scenario {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.step > 0.0) {
            return Err(SimError::InvalidScenario("step must be positive"));
        }
        if !(self.horizon > 0.0) {
            return Err(SimError::InvalidScenario("horizon must be positive"));
        }
        if self.decimation == 0 {
            return Err(SimError::InvalidScenario("decimation must be at least 1"));
        }
        if !self.gains.is_valid() || self.gains.deltas.len() < self.model.n() {
            return Err(SimError::InvalidScenario("gains must be positive, one delta per stage"));
        }
        if self.initial.y.len() != self.model.n() {
            return Err(SimError::InvalidScenario("initial shape dimension mismatch"));
        }
        // Rejects boundary states (cos yᵢ = 0).
        self.model.component_of(&self.initial.y)?;
        Ok(())
    }
}

/// Why an integration stopped early.
#[derive(Debug, Clone, PartialEq)]
pub struct SimFault {
    /// Time of the failed evaluation (s).
    pub t: f64,
    /// Last good augmented state `(q, s₁ᴰ, τ)`.
    pub state: Vec<f64>,
    pub message: String,
}

/// Dense (decimated) output of a run. All series share one length; on a
/// fault the trace holds every sample up to the last good state.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    /// Time grid (s), strictly increasing.
    pub t: Vec<f64>,
    /// Reference arc length τ(t) (m).
    pub tau: Vec<f64>,
    /// Plant configuration per sample, flattened `(x₁, x₂, y₁…yₙ)`.
    pub q: Vec<Vec<f64>>,
    /// Applied input `(u₁, u₂)`.
    pub u: Vec<[f64; 2]>,
    /// Reference configuration, same layout as `q`.
    pub qd: Vec<Vec<f64>>,
    /// Reference input `(u₁ᴰ, u₂ᴰ)`.
    pub ud: Vec<[f64; 2]>,
    /// Planar error norm |x − xᴰ| (m).
    pub x_error: Vec<f64>,
    /// Shape distance Σᵢ |yᵢ − yᵢᴰ| (rad).
    pub shape_distance: Vec<f64>,
    /// Composite Lyapunov value, evaluated by the controller's own stages.
    pub lyapunov: Vec<f64>,
    /// Max |rolling-constraint residual| of the recorded (q, q̇).
    pub max_residual: Vec<f64>,
    /// Component manifold the run lives in.
    pub component: ComponentIndex,
    pub fault: Option<SimFault>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }
}

struct Loop<'a> {
    scenario: &'a Scenario,
    branch: &'a LawBranch,
    dim: usize,
}

struct Sample {
    u: [f64; 2],
    qd: Configuration,
    ud: [f64; 2],
    lyapunov: f64,
    qdot: Vec<f64>,
}

impl Loop<'_> {
    /// Time derivative of the augmented state `(q, s₁ᴰ, τ)`.
    fn deriv(&self, t: f64, z: &[f64]) -> Result<Vec<f64>, LawError> {
        let nq = self.dim;
        let q = Configuration::from_slice(&z[..nq]);
        let s1d = z[nq];
        let rp = self.branch.reference.point_at(t, s1d)?;
        let u = self.branch.law.phi(&q, &rp.qd, rp.ud)?;
        let mut dz = self.scenario.model.rhs(&z[..nq], u)?;
        dz.push(self.branch.reference.s1_rate(t, s1d)?);
        dz.push(self.scenario.trajectory.speed(t));
        Ok(dz)
    }

    /// Everything a trace row needs at `(t, z)`.
    fn sample(&self, t: f64, z: &[f64]) -> Result<Sample, LawError> {
        let nq = self.dim;
        let q = Configuration::from_slice(&z[..nq]);
        let rp = self.branch.reference.point_at(t, z[nq])?;
        let u = self.branch.law.phi(&q, &rp.qd, rp.ud)?;
        let lyapunov = self.branch.law.lyapunov(&q, &rp.qd, rp.ud)?;
        let qdot = self.scenario.model.rhs(&z[..nq], u)?;
        Ok(Sample { u, qd: rp.qd, ud: rp.ud, lyapunov, qdot })
    }
}

/// Integrate the closed loop with classical fourth-order Runge–Kutta,
/// re-evaluating the feedback at every integrator stage. A mid-run failure
/// (component exit, chart singularity, reference losing admissibility)
/// stops the run and returns the pre-fault trace with `fault` set.
pub fn integrate_closed_loop(scenario: &Scenario) -> Result<Trace, SimError> {
    scenario.validate()?;
    let model = &scenario.model;
    let law: ControlLaw =
        control_law(model, &scenario.gains, &scenario.trajectory, scenario.direction)?;
    let branch = law.branch_for(&scenario.initial.y)?;
    let dim = model.n() + 2;
    let lp = Loop { scenario, branch, dim };

    let h = scenario.step;
    let steps = libm::ceil(scenario.horizon / h - 1e-9) as usize;
    let mut z = scenario.initial.to_vec();
    z.push(branch.reference.initial_s1());
    z.push(0.0);

    let mut trace = Trace {
        t: Vec::new(),
        tau: Vec::new(),
        q: Vec::new(),
        u: Vec::new(),
        qd: Vec::new(),
        ud: Vec::new(),
        x_error: Vec::new(),
        shape_distance: Vec::new(),
        lyapunov: Vec::new(),
        max_residual: Vec::new(),
        component: branch.component.clone(),
        fault: None,
    };

    let record = |t: f64, z: &[f64], trace: &mut Trace| -> Result<(), LawError> {
        let s = lp.sample(t, z)?;
        let q = Configuration::from_slice(&z[..dim]);
        let residual = model
            .constraint_residuals(&q, &s.qdot[..dim])
            .map(|r| r.iter().fold(0.0f64, |m, &v| m.max(v.abs())))
            .unwrap_or(0.0);
        trace.t.push(t);
        trace.tau.push(z[dim + 1]);
        trace.q.push(z[..dim].to_vec());
        trace.u.push(s.u);
        trace.qd.push(s.qd.to_vec());
        trace.ud.push(s.ud);
        trace.x_error.push(libm::hypot(z[0] - s.qd.x[0], z[1] - s.qd.x[1]));
        trace.shape_distance.push(
            z[2..dim].iter().zip(s.qd.y.iter()).map(|(&a, &b)| (a - b).abs()).sum(),
        );
        trace.lyapunov.push(s.lyapunov);
        trace.max_residual.push(residual);
        Ok(())
    };

    let fault = |t: f64, z: &[f64], e: LawError, trace: &mut Trace| {
        trace.fault = Some(SimFault { t, state: z.to_vec(), message: format!("{e}") });
    };

    for k in 0..=steps {
        let t = k as f64 * h;
        if k % scenario.decimation == 0 || k == steps {
            if let Err(e) = record(t, &z, &mut trace) {
                fault(t, &z, e, &mut trace);
                return Ok(trace);
            }
        }
        if k == steps {
            break;
        }
        // One RK4 step; the loop derivative can fail at any stage.
        let stage = |tt: f64, zz: &[f64]| lp.deriv(tt, zz);
        let k1 = match stage(t, &z) {
            Ok(v) => v,
            Err(e) => {
                fault(t, &z, e, &mut trace);
                return Ok(trace);
            }
        };
        let z2: Vec<f64> = z.iter().zip(&k1).map(|(&a, &d)| a + 0.5 * h * d).collect();
        let k2 = match stage(t + 0.5 * h, &z2) {
            Ok(v) => v,
            Err(e) => {
                fault(t, &z, e, &mut trace);
                return Ok(trace);
            }
        };
        let z3: Vec<f64> = z.iter().zip(&k2).map(|(&a, &d)| a + 0.5 * h * d).collect();
        let k3 = match stage(t + 0.5 * h, &z3) {
            Ok(v) => v,
            Err(e) => {
                fault(t, &z, e, &mut trace);
                return Ok(trace);
            }
        };
        let z4: Vec<f64> = z.iter().zip(&k3).map(|(&a, &d)| a + h * d).collect();
        let k4 = match stage(t + h, &z4) {
            Ok(v) => v,
            Err(e) => {
                fault(t, &z, e, &mut trace);
                return Ok(trace);
            }
        };
        for i in 0..z.len() {
            z[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    Ok(trace)
}

/// Post-run verdicts over a trace.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsReport {
    /// `V̂(τₖ) ≤ V̂(τ₀)·e^{−2γ(τₖ−τ₀)}·(1 + 1e-3)` at every sample.
    pub envelope_pass: bool,
    /// First sample index violating the envelope.
    pub envelope_first_violation: Option<usize>,
    pub terminal_x_error: f64,
    pub terminal_shape_distance: f64,
    /// `|u − uᴰ|` at the last sample.
    pub terminal_input_error: f64,
    pub max_residual: f64,
    /// Max residual ≤ 1e-6.
    pub residual_pass: bool,
    pub input_sup: f64,
    pub input_ref_sup: f64,
    /// Input stays finite and within twice the reference bound plus the
    /// initial transient peak.
    pub input_bounded: bool,
    /// `u₁` keeps one sign throughout.
    pub u1_sign_constant: bool,
    /// First time |x − xᴰ| drops below 1% of its initial value (s).
    pub time_to_one_percent: Option<f64>,
    pub fault: Option<String>,
}

/// Residual bound a successful fixed-step run must satisfy.
pub const RESIDUAL_TOL: f64 = 1e-6;

/// Relative slack on the exponential Lyapunov envelope.
pub const ENVELOPE_SLACK: f64 = 1e-3;

/// Evaluate decay, convergence, residual, and boundedness verdicts.
pub fn diagnostics(trace: &Trace, gamma: f64) -> DiagnosticsReport {
    assert!(!trace.is_empty(), "diagnostics need a nonempty trace");
    let last = trace.len() - 1;
    let v0 = trace.lyapunov[0];
    let tau0 = trace.tau[0];
    let mut envelope_first_violation = None;
    for k in 0..trace.len() {
        let bound = v0 * libm::exp(-2.0 * gamma * (trace.tau[k] - tau0)) * (1.0 + ENVELOPE_SLACK);
        if trace.lyapunov[k] > bound {
            envelope_first_violation = Some(k);
            break;
        }
    }
    let norm = |u: &[f64; 2]| libm::hypot(u[0], u[1]);
    let input_sup = trace.u.iter().map(norm).fold(0.0f64, f64::max);
    let input_ref_sup = trace.ud.iter().map(norm).fold(0.0f64, f64::max);
    let transient = norm(&trace.u[0]);
    let max_residual = trace.max_residual.iter().fold(0.0f64, |m, &v| m.max(v));
    let u1_sign_constant = trace.u.iter().all(|u| u[0] > 0.0) || trace.u.iter().all(|u| u[0] < 0.0);
    let threshold = 0.01 * trace.x_error[0];
    let time_to_one_percent = if trace.x_error[0] > 0.0 {
        trace
            .x_error
            .iter()
            .position(|&e| e <= threshold)
            .map(|k| trace.t[k])
    } else {
        None
    };
    DiagnosticsReport {
        envelope_pass: envelope_first_violation.is_none(),
        envelope_first_violation,
        terminal_x_error: trace.x_error[last],
        terminal_shape_distance: trace.shape_distance[last],
        terminal_input_error: libm::hypot(
            trace.u[last][0] - trace.ud[last][0],
            trace.u[last][1] - trace.ud[last][1],
        ),
        max_residual,
        residual_pass: max_residual <= RESIDUAL_TOL,
        input_sup,
        input_ref_sup,
        input_bounded: input_sup.is_finite() && input_sup <= 2.0 * input_ref_sup + 1.5 * transient,
        u1_sign_constant,
        time_to_one_percent,
        fault: trace.fault.as_ref().map(|f| f.message.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maneuver::reference::maneuvering_operator;
    use crate::models::{automobile, chaplygin_sled, truck_with_trailers};
    use alloc::vec;

    fn scenario(
        model: WheeledModel,
        trajectory: DesiredTrajectory,
        direction: Direction,
        initial: Configuration,
        horizon: f64,
        step: f64,
        decimation: usize,
    ) -> Scenario {
        let n = model.n();
        Scenario {
            model,
            trajectory,
            direction,
            gains: Gains::uniform(n),
            initial,
            horizon,
            step,
            decimation,
        }
    }

    /// Reference configuration at t = 0, so runs can start with zero or a
    /// controlled initial error.
    fn reference_start(
        model: &WheeledModel,
        trajectory: &DesiredTrajectory,
        direction: Direction,
    ) -> Configuration {
        let mu = ComponentIndex::new(vec![0; model.n().saturating_sub(1)]);
        let gen = maneuvering_operator(model, &mu, trajectory, direction, 0).unwrap();
        gen.point_at(0.0, gen.initial_s1()).unwrap().qd
    }

    #[test]
    fn zero_initial_error_stays_exact() {
        let tr = DesiredTrajectory::Line { point: [0.0, 0.0], velocity: [1.0, 0.5] };
        for model in [chaplygin_sled(), automobile(), truck_with_trailers(&[1.0, 0.8]).unwrap()] {
            let q0 = reference_start(&model, &tr, Direction::Forward);
            let sc = scenario(model, tr.clone(), Direction::Forward, q0, 2.0, 1e-3, 10);
            let trace = integrate_closed_loop(&sc).unwrap();
            assert!(trace.fault.is_none());
            let max_err = trace.x_error.iter().fold(0.0f64, |m, &v| m.max(v));
            assert!(max_err <= 1e-8, "max planar error {max_err}");
        }
    }

    #[test]
    fn identical_scenarios_give_bit_identical_traces() {
        let tr = DesiredTrajectory::Circle { center: [0.0, 0.0], radius: 3.0, rate: 0.3, phase: 0.2 };
        let sc = scenario(
            automobile(),
            tr,
            Direction::Forward,
            Configuration::new([3.5, 0.4], vec![1.0, 0.2]),
            1.5,
            1e-3,
            25,
        );
        let a = integrate_closed_loop(&sc).unwrap();
        let b = integrate_closed_loop(&sc).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sled_lateral_offset_converges_on_line() {
        let tr = DesiredTrajectory::Line { point: [0.0, 0.0], velocity: [1.0, 0.0] };
        let sc = scenario(
            chaplygin_sled(),
            tr,
            Direction::Forward,
            Configuration::new([0.0, 1.0], vec![0.0]),
            20.0,
            1e-3,
            100,
        );
        let trace = integrate_closed_loop(&sc).unwrap();
        assert!(trace.fault.is_none());
        let rep = diagnostics(&trace, sc.gains.gamma);
        assert!(rep.terminal_x_error <= 1e-3, "terminal error {}", rep.terminal_x_error);
        assert!(rep.envelope_pass, "violation at {:?}", rep.envelope_first_violation);
        assert!(rep.residual_pass, "max residual {}", rep.max_residual);
        assert!(rep.u1_sign_constant);
        assert!(rep.time_to_one_percent.is_some());
    }

    #[test]
    fn step_halving_shows_fourth_order() {
        let tr = DesiredTrajectory::Circle { center: [0.0, 0.0], radius: 3.0, rate: 0.3, phase: 0.0 };
        let q0 = Configuration::new([3.3, 0.2], vec![1.2, 0.1]);
        let run = |h: f64| {
            let sc =
                scenario(automobile(), tr.clone(), Direction::Forward, q0.clone(), 2.0, h, usize::MAX);
            let trace = integrate_closed_loop(&sc).unwrap();
            trace.q.last().unwrap().clone()
        };
        // Step sizes large enough that truncation dominates the ~1e-11
        // roundoff floor of the accumulated closed-loop arithmetic.
        let fine = run(0.04 / 16.0);
        let err = |q: &[f64]| -> f64 {
            q.iter().zip(fine.iter()).map(|(&a, &b)| (a - b) * (a - b)).sum::<f64>().sqrt()
        };
        let e1 = err(&run(0.04));
        let e2 = err(&run(0.02));
        let ratio = e1 / e2;
        assert!((12.0..=20.0).contains(&ratio), "order ratio {ratio} (e1={e1:e}, e2={e2:e})");
    }

    #[test]
    fn trace_reference_positions_are_analytic() {
        let tr = DesiredTrajectory::LaneChange { speed: 1.0, amplitude: 0.5, frequency: 0.2 };
        let model = automobile();
        let q0 = reference_start(&model, &tr, Direction::Forward);
        let sc = scenario(
            model,
            tr.clone(),
            Direction::Forward,
            Configuration::new([q0.x[0] + 0.3, q0.x[1] - 0.2], q0.y.clone()),
            3.0,
            1e-3,
            50,
        );
        let trace = integrate_closed_loop(&sc).unwrap();
        for (k, row) in trace.qd.iter().enumerate() {
            let xd = tr.position(trace.t[k]);
            assert!((row[0] - xd[0]).abs() <= 1e-9 && (row[1] - xd[1]).abs() <= 1e-9);
        }
        // τ is co-integrated with the same RK4 machinery; the lane change
        // has nonconstant speed so this checks the quadrature too.
        let last = trace.len() - 1;
        let maps = crate::maneuver::reference::arc_length_maps(&tr, 3.0);
        assert!((trace.tau[last] - maps.tau_of_t(trace.t[last])).abs() <= 1e-9);
    }

    #[test]
    fn component_index_is_constant_and_matches_state() {
        let tr = DesiredTrajectory::Line { point: [0.0, 0.0], velocity: [-1.0, 0.0] };
        let model = truck_with_trailers(&[1.0, 1.0]).unwrap();
        let sc = scenario(
            model.clone(),
            tr,
            Direction::Backward,
            Configuration::new([0.2, 0.3], vec![0.1, -0.2, 0.15]),
            2.0,
            1e-3,
            20,
        );
        let trace = integrate_closed_loop(&sc).unwrap();
        assert!(trace.fault.is_none());
        for row in &trace.q {
            assert_eq!(model.component_of(&row[2..]).unwrap(), trace.component);
        }
    }

    #[test]
    fn reference_losing_admissibility_faults_with_partial_trace() {
        // ẋᴰ = (1 − t, 0) stalls at t = 1; the run must stop there and keep
        // every earlier sample.
        let tr = DesiredTrajectory::Polynomial {
            x_coeffs: vec![0.0, 1.0, -0.5],
            y_coeffs: vec![0.0],
        };
        let sc = scenario(
            chaplygin_sled(),
            tr,
            Direction::Forward,
            Configuration::new([0.1, 0.1], vec![0.0]),
            2.0,
            1e-3,
            10,
        );
        let trace = integrate_closed_loop(&sc).unwrap();
        let fault = trace.fault.as_ref().expect("run must fault");
        assert!(fault.t < 1.1 && fault.t > 0.5, "fault at t = {}", fault.t);
        assert!(trace.len() > 10);
        assert!(trace.t.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn injected_lyapunov_increase_fails_envelope() {
        let tr = DesiredTrajectory::Line { point: [0.0, 0.0], velocity: [1.0, 0.0] };
        let sc = scenario(
            chaplygin_sled(),
            tr,
            Direction::Forward,
            Configuration::new([0.0, 0.5], vec![0.2]),
            5.0,
            1e-3,
            50,
        );
        let mut trace = integrate_closed_loop(&sc).unwrap();
        assert!(diagnostics(&trace, sc.gains.gamma).envelope_pass);
        let mid = trace.len() / 2;
        trace.lyapunov[mid] = trace.lyapunov[0] * 2.0;
        let rep = diagnostics(&trace, sc.gains.gamma);
        assert!(!rep.envelope_pass);
        assert_eq!(rep.envelope_first_violation, Some(mid));
    }

    #[test]
    fn boundary_initial_state_is_rejected() {
        let tr = DesiredTrajectory::Line { point: [0.0, 0.0], velocity: [1.0, 0.0] };
        let sc = scenario(
            automobile(),
            tr,
            Direction::Forward,
            Configuration::new([0.0, 0.0], vec![0.0, core::f64::consts::FRAC_PI_2]),
            1.0,
            1e-3,
            10,
        );
        assert!(matches!(integrate_closed_loop(&sc), Err(SimError::Model(_))));
    }
}
