//! Recursive Lyapunov stages in arc-length time.
//!
//! The controller is built by stacking backstepping steps over a base
//! stabilizer for the planar error subsystem. Stage `i` works on
//! `zⁱ = (x̃, s̃₁…s̃ᵢ)` with reference signals
//! `pⁱ = (cos s̄₁, sin s̄₁, s̄₂…s̄_{i+1})` (the last entry of `pⁿ` is
//! `v̄₂/v̄₁`). Every stage function is generic over the scalar so the next
//! step can differentiate it with dual numbers; the recursion is composed
//! from concrete nested types because each level evaluates its inner stage
//! at a deeper dual type.

use alloc::vec::Vec;

use crate::jet::{sinh_sq_norm_raw, tanhc_sq_raw, Dual, Scalar};

/// Below this gap between the stabilized coordinate and its virtual
/// control, the divided difference switches to the analytic derivative.
pub const DIVIDED_DIFF_TOL: f64 = 1e-9;

/// Controller gains: one decay rate, one weight per backstepping step.
#[derive(Debug, Clone, PartialEq)]
pub struct Gains {
    /// Exponential decay rate γ > 0 of the composite Lyapunov function.
    pub gamma: f64,
    /// Backstepping weights δ₁…δₙ > 0.
    pub deltas: Vec<f64>,
}

impl Gains {
    pub fn uniform(n: usize) -> Self {
        Gains { gamma: 1.0, deltas: alloc::vec![1.0; n] }
    }

    pub fn is_valid(&self) -> bool {
        self.gamma > 0.0 && !self.deltas.is_empty() && self.deltas.iter().all(|&d| d > 0.0)
    }
}

/// `λ(x̃, s̄₁, w̄₁) = w̄₁|c|`, with
/// `c = −tanh(γ|x̃|)/|x̃| · G(s̄₁)⁻¹x̃ + w̄₁(1, 0)`.
///
/// `p0 = (cos s̄₁, sin s̄₁)`. Since `|tanh| < 1`, `c₁` keeps the sign of
/// `w̄₁` and `λ` never vanishes; at `x̃ = 0` it equals `w̄₁` exactly.
pub fn lambda<T: Scalar>(xt: [T; 2], p0: [T; 2], w1: f64, gamma: f64) -> T {
    let [c1, c2] = little_c(xt, p0, w1, gamma);
    (c1 * c1 + c2 * c2).sqrt().scale(w1)
}

fn little_c<T: Scalar>(xt: [T; 2], p0: [T; 2], w1: f64, gamma: f64) -> [T; 2] {
    let rho = xt[0] * xt[0] + xt[1] * xt[1];
    let th = tanhc_sq_raw(rho, gamma);
    // G(s̄₁)⁻¹ x̃ rotates the error into the reference frame.
    let g1 = p0[0] * xt[0] + p0[1] * xt[1];
    let g2 = p0[0] * xt[1] - p0[1] * xt[0];
    [T::lift(w1) - th * g1, -(th * g2)]
}

/// `sin(x)/x`, series below 1e-4 where the direct quotient loses digits.
fn sinc<T: Scalar>(x: T) -> T {
    if x.primal().abs() < 1e-4 {
        let x2 = x * x;
        T::one() - x2.scale(1.0 / 6.0) + (x2 * x2).scale(1.0 / 120.0)
    } else {
        x.sin() / x
    }
}

/// A stabilizer stage: virtual control and Lyapunov function of
/// `(z, r, w̄₁)`, where `r` is the stage's reference-signal vector.
pub trait Stage {
    /// Length of the stage's state vector `z`.
    fn z_len(&self) -> usize;
    fn alpha<T: Scalar>(&self, z: &[T], r: &[T], w1: f64) -> T;
    fn lyap<T: Scalar>(&self, z: &[T], r: &[T], w1: f64) -> T;
}

/// Base stage: stabilizes the planar error `x̃` through the heading error.
///
/// `α₀ = arctan(c₂/c₁)` (two-argument form on the `c₁`-sign-correct
/// half-plane, so the result stays inside (−π/2, π/2)) and
/// `V₀ = sinh²(γ|x̃|)`.
#[derive(Debug, Clone, Copy)]
pub struct XStage {
    pub gamma: f64,
}

impl Stage for XStage {
    fn z_len(&self) -> usize {
        2
    }

    fn alpha<T: Scalar>(&self, z: &[T], r: &[T], w1: f64) -> T {
        let [c1, c2] = little_c([z[0], z[1]], [r[0], r[1]], w1, self.gamma);
        c2.scale(w1).atan2(c1.scale(w1))
    }

    fn lyap<T: Scalar>(&self, z: &[T], _r: &[T], _w1: f64) -> T {
        let rho = z[0] * z[0] + z[1] * z[1];
        sinh_sq_norm_raw(rho, self.gamma)
    }
}

/// `(p^{i-1})′` in terms of `pⁱ`: the reference rotates at rate
/// `s̄₁′ = w̄₁s̄₂` and each chained coordinate slides up,
/// `s̄ₖ′ = w̄₁·pⁱ[k+1]`.
pub fn p_prime<T: Scalar>(p: &[T], w1: f64) -> Vec<T> {
    let m = p.len() - 1;
    let mut out = Vec::with_capacity(m);
    out.push(-(p[1] * p[2]).scale(w1));
    out.push((p[0] * p[2]).scale(w1));
    for k in 2..m {
        out.push(p[k + 1].scale(w1));
    }
    out
}

/// One backstepping step over an inner stage.
///
/// `index` is the chained coordinate this step stabilizes (1-based);
/// `terminal` marks the last step, whose cascade row is `b = 0, β = 1`
/// (there `s̄_{n+1}` is the input `w₂` itself).
#[derive(Debug, Clone)]
pub struct Step<S: Stage> {
    pub inner: S,
    pub index: usize,
    pub terminal: bool,
    pub delta: f64,
    pub gamma: f64,
}

impl<S: Stage> Step<S> {
    /// The stacked cascade field `B_{i-1}(z, ζ, pⁱ, w̄₁)`: planar error
    /// rate on top, then one row `bⱼ + βⱼs̃_{j+1}` per inner chained
    /// coordinate. `ζ` stands in for the first coordinate past `z`.
    pub fn cascade_field<T: Scalar>(&self, z: &[T], zeta: T, p: &[T], w1: f64) -> Vec<T> {
        let xt = [z[0], z[1]];
        let p0 = [p[0], p[1]];
        let lam = lambda(xt, p0, w1, self.gamma);
        let st1 = if z.len() > 2 { z[2] } else { zeta };
        let (cs, sn) = (st1.cos(), st1.sin());
        let mut out = Vec::with_capacity(z.len());
        // x̃′ = −w̄₁(cos s̄₁, sin s̄₁) + λ·G(s̄₁)(cos s̃₁, sin s̃₁)
        out.push(lam * (p[0] * cs - p[1] * sn) - p[0].scale(w1));
        out.push(lam * (p[1] * cs + p[0] * sn) - p[1].scale(w1));
        for j in 1..z.len() - 1 {
            // s̃ⱼ′ = (λ − w̄₁)s̄_{j+1} + λ·s̃_{j+1}
            let b = (lam - T::lift(w1)) * p[j + 1];
            let next = if j + 2 < z.len() { z[j + 2] } else { zeta };
            out.push(b + lam * next);
        }
        out
    }

    /// Own-row coefficients `(bᵢ, βᵢ)` of this step.
    fn own_row<T: Scalar>(&self, z: &[T], p: &[T], w1: f64) -> (T, T) {
        if self.terminal {
            (T::zero(), T::one())
        } else {
            let lam = lambda([z[0], z[1]], [p[0], p[1]], w1, self.gamma);
            ((lam - T::lift(w1)) * p[self.index + 1], lam)
        }
    }
}

impl<S: Stage> Stage for Step<S> {
    fn z_len(&self) -> usize {
        self.inner.z_len() + 1
    }

    fn alpha<T: Scalar>(&self, z: &[T], r: &[T], w1: f64) -> T {
        let kz = z.len() - 1;
        let (zin, zeta) = (&z[..kz], z[kz]);
        let rin = &r[..r.len() - 1];
        let r1 = p_prime(r, w1);
        let bvec = self.cascade_field(zin, zeta, r, w1);
        let eta = self.inner.alpha(zin, rin, w1);

        // ∂α/∂z·B and ∂α/∂r·r₁ in one two-slot dual pass.
        let zd: Vec<Dual<T, 2>> = zin
            .iter()
            .zip(bvec.iter())
            .map(|(&zv, &bv)| Dual { re: zv, du: [bv, T::zero()] })
            .collect();
        let rd: Vec<Dual<T, 2>> = rin
            .iter()
            .zip(r1.iter())
            .map(|(&rv, &dv)| Dual { re: rv, du: [T::zero(), dv] })
            .collect();
        let a = self.inner.alpha(&zd, &rd, w1);
        let transport = a.du[0] + a.du[1];

        // Divided difference of the cascade field between ζ and η. The
        // field depends on ζ only through cos/sin of the heading error
        // (base rows) or linearly with slope λ (last row), so the secant
        // has a closed form that stays stable as ζ → η — crucial, since
        // outer stages differentiate this quotient with duals and any
        // cancellation noise would be amplified by 1/(ζ−η) per level.
        let diff = zeta - eta;
        let d: Vec<T> = if diff.primal().abs() < DIVIDED_DIFF_TOL {
            let zc: Vec<Dual<T, 1>> = zin.iter().map(|&v| Dual::constant(v)).collect();
            let rc: Vec<Dual<T, 1>> = r.iter().map(|&v| Dual::constant(v)).collect();
            let zeta_d = Dual { re: zeta, du: [T::one()] };
            self.cascade_field(&zc, zeta_d, &rc, w1)
                .into_iter()
                .map(|row| row.du[0])
                .collect()
        } else if zin.len() > 2 {
            let lam = lambda([zin[0], zin[1]], [r[0], r[1]], w1, self.gamma);
            let mut rows = alloc::vec![T::zero(); zin.len()];
            rows[zin.len() - 1] = lam;
            rows
        } else {
            // (cos ζ − cos η)/(ζ − η) = −sin(m)·sinc(h),
            // (sin ζ − sin η)/(ζ − η) =  cos(m)·sinc(h),
            // with m = (ζ+η)/2, h = (ζ−η)/2.
            let lam = lambda([zin[0], zin[1]], [r[0], r[1]], w1, self.gamma);
            let mid = (zeta + eta).scale(0.5);
            let s = sinc(diff.scale(0.5));
            let dc = -(mid.sin() * s);
            let ds = mid.cos() * s;
            alloc::vec![lam * (r[0] * dc - r[1] * ds), lam * (r[1] * dc + r[0] * ds)]
        };

        // ∂V/∂z·D, one directional dual pass over the inner Lyapunov
        // function.
        let zv: Vec<Dual<T, 1>> = zin
            .iter()
            .zip(d.iter())
            .map(|(&zvl, &dv)| Dual { re: zvl, du: [dv] })
            .collect();
        let rc: Vec<Dual<T, 1>> = rin.iter().map(|&v| Dual::constant(v)).collect();
        let dissipation = self.inner.lyap(&zv, &rc, w1).du[0];

        let (b, beta) = self.own_row(zin, r, w1);
        (transport - dissipation.scale(1.0 / self.delta) - b - diff.scale(self.gamma)) / beta
    }

    fn lyap<T: Scalar>(&self, z: &[T], r: &[T], w1: f64) -> T {
        let kz = z.len() - 1;
        let (zin, zeta) = (&z[..kz], z[kz]);
        let rin = &r[..r.len() - 1];
        let eta = self.inner.alpha(zin, rin, w1);
        let gap = zeta - eta;
        self.inner.lyap(zin, rin, w1) + (gap * gap).scale(self.delta / 2.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    fn x_stage() -> XStage {
        XStage { gamma: 1.0 }
    }

    #[test]
    fn lambda_at_zero_error_is_direction() {
        for w1 in [1.0, -1.0] {
            for s1 in [0.0f64, 0.7, -2.1] {
                let p0 = [s1.cos(), s1.sin()];
                let v = lambda([0.0, 0.0], p0, w1, 1.3);
                assert_eq!(v, w1);
                let a = x_stage().alpha(&[0.0, 0.0], &p0, w1);
                assert_eq!(a, 0.0);
            }
        }
    }

    #[test]
    fn base_heading_error_stays_in_open_quarter_turn() {
        let mut rng = SplitMix64::new(3);
        for gamma in [0.5, 1.0, 2.0] {
            let st = XStage { gamma };
            for _ in 0..10_000 {
                let z = [rng.in_range(-20.0, 20.0), rng.in_range(-20.0, 20.0)];
                let s1 = rng.in_range(-4.0, 4.0);
                let w1 = if rng.next_f64() < 0.5 { 1.0 } else { -1.0 };
                let a = st.alpha(&z, &[s1.cos(), s1.sin()], w1);
                assert!(a.abs() < core::f64::consts::FRAC_PI_2, "α₀ = {a}");
            }
        }
    }

    #[test]
    fn base_lyapunov_decays_at_exact_rate() {
        // With the ideal planar input e, V₀′ = −2γV₀; check it through the
        // same dual machinery the controller uses.
        let gamma = 0.8;
        let st = XStage { gamma };
        let mut rng = SplitMix64::new(5);
        for _ in 0..200 {
            let xt = [rng.in_range(-3.0, 3.0), rng.in_range(-3.0, 3.0)];
            let rho = xt[0] * xt[0] + xt[1] * xt[1];
            let th = tanhc_sq_raw(rho, gamma);
            let e = [-th * xt[0], -th * xt[1]];
            let zd: [Dual<f64, 1>; 2] = [
                Dual { re: xt[0], du: [e[0]] },
                Dual { re: xt[1], du: [e[1]] },
            ];
            let v = st.lyap(&zd, &[], 1.0);
            assert!(
                (v.du[0] + 2.0 * gamma * v.re).abs() <= 1e-12 * (1.0 + v.re.abs()),
                "V₀′ = {} vs −2γV₀ = {}",
                v.du[0],
                -2.0 * gamma * v.re
            );
        }
    }

    #[test]
    fn cascade_rows_vanish_at_zero_error() {
        let step = Step { inner: x_stage(), index: 1, terminal: false, delta: 1.0, gamma: 1.0 };
        let mut rng = SplitMix64::new(9);
        for _ in 0..100 {
            let p = [rng.in_range(-1.0, 1.0), rng.in_range(-1.0, 1.0), rng.in_range(-2.0, 2.0)];
            let w1 = if rng.next_f64() < 0.5 { 1.0 } else { -1.0 };
            let (b, beta) = step.own_row(&[0.0, 0.0], &p, w1);
            assert_eq!(b, 0.0, "bᵢ(0, pⁱ, w̄₁) = 0");
            assert_eq!(beta, w1, "βᵢ = λ = w̄₁ at zero error");
        }
        // B₀(0, 0, p⁰, w̄₁) = 0 for honest direction vectors.
        for s1 in [0.0, 1.1, -2.4] {
            let p = [libm::cos(s1), libm::sin(s1), 0.3];
            let rows = step.cascade_field(&[0.0, 0.0], 0.0, &p, 1.0);
            assert!(rows[0].abs() < 1e-15 && rows[1].abs() < 1e-15);
        }
    }

    #[test]
    fn terminal_row_is_unit_gain() {
        let step = Step { inner: x_stage(), index: 1, terminal: true, delta: 1.0, gamma: 1.0 };
        let (b, beta) = step.own_row(&[0.4, -0.7], &[1.0, 0.0, 2.0], -1.0);
        assert_eq!(b, 0.0);
        assert_eq!(beta, 1.0);
    }

    #[test]
    fn virtual_control_fixed_point_at_zero() {
        // α̂(0, p, r, r₁) = 0 whenever B(0,0,p) = 0 and b(0,0,p) = 0.
        let step = Step { inner: x_stage(), index: 1, terminal: true, delta: 0.7, gamma: 1.2 };
        let mut rng = SplitMix64::new(13);
        for _ in 0..100 {
            let s1 = rng.in_range(-3.0, 3.0);
            let p = [libm::cos(s1), libm::sin(s1), rng.in_range(-2.0, 2.0)];
            let w1 = if rng.next_f64() < 0.5 { 1.0 } else { -1.0 };
            let a = step.alpha(&[0.0, 0.0, 0.0], &p, w1);
            assert!(a.abs() <= 1e-14, "α̂ at zero error: {a}");
        }
    }

    #[test]
    fn composite_lyapunov_collapses_on_virtual_manifold() {
        let step = Step { inner: x_stage(), index: 1, terminal: true, delta: 2.0, gamma: 1.0 };
        let mut rng = SplitMix64::new(17);
        for _ in 0..100 {
            let z0 = [rng.in_range(-2.0, 2.0), rng.in_range(-2.0, 2.0)];
            let s1 = rng.in_range(-3.0, 3.0);
            let p = [libm::cos(s1), libm::sin(s1), rng.in_range(-1.0, 1.0)];
            let w1 = 1.0;
            let eta = step.inner.alpha(&z0, &p[..2], w1);
            let v_inner = step.inner.lyap(&z0, &p[..2], w1);
            let v_hat = step.lyap(&[z0[0], z0[1], eta], &p, w1);
            assert_eq!(v_hat, v_inner);
        }
    }

    #[test]
    fn one_step_cascade_decays_within_envelope() {
        // Close the loop s̃₁′ = w₂ = α̂ around the planar subsystem and
        // verify V̂′ ≤ −2γV̂ numerically along an integrated run.
        let gamma = 1.0;
        let step = Step { inner: x_stage(), index: 1, terminal: true, delta: 1.0, gamma };
        let w1 = 1.0;
        // Reference: unit-speed straight line, s̄₁ = 0, v̄₂/v̄₁ = 0.
        let p = [1.0, 0.0, 0.0];
        let mut z = [0.5, -0.8, 0.3];
        let h = 1e-3;
        let rhs = |z: &[f64; 3]| {
            let ups = step.alpha(z, &p, w1);
            let b = step.cascade_field(&z[..2], z[2], &p, w1);
            [b[0], b[1], ups]
        };
        let mut v_prev = step.lyap(&z, &p, w1);
        let v0 = v_prev;
        for k in 0..4000 {
            let k1 = rhs(&z);
            let z2 = core::array::from_fn(|i| z[i] + 0.5 * h * k1[i]);
            let k2 = rhs(&z2);
            let z3 = core::array::from_fn(|i| z[i] + 0.5 * h * k2[i]);
            let k3 = rhs(&z3);
            let z4 = core::array::from_fn(|i| z[i] + h * k3[i]);
            let k4 = rhs(&z4);
            for i in 0..3 {
                z[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            let v = step.lyap(&z, &p, w1);
            let tau = h * (k + 1) as f64;
            assert!(
                v <= v0 * libm::exp(-2.0 * gamma * tau) * (1.0 + 1e-3) + 1e-300,
                "envelope broken at τ={tau}: V̂={v}"
            );
            assert!(v <= v_prev * (1.0 + 1e-12), "V̂ increased at τ={tau}");
            v_prev = v;
        }
        assert!(v_prev < 1e-3 * v0);
    }

    #[test]
    fn divided_difference_branches_agree_near_switch() {
        let step = Step { inner: x_stage(), index: 1, terminal: true, delta: 1.0, gamma: 1.0 };
        let p = [libm::cos(0.4), libm::sin(0.4), 0.2];
        let z0 = [0.3, -0.2];
        let eta = step.inner.alpha(&z0, &p[..2], 1.0);
        // Evaluate α̂ with ζ just below and just above the branch switch.
        let lo = step.alpha(&[z0[0], z0[1], eta + 0.5e-9], &p, 1.0);
        let hi = step.alpha(&[z0[0], z0[1], eta + 2e-9], &p, 1.0);
        assert!((lo - hi).abs() < 1e-6, "{lo} vs {hi}");
    }
}
