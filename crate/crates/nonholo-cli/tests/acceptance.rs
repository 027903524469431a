//! Acceptance gate: ten numbered criteria, one pass/fail line each
//! (visible with `--nocapture`). Criterion 02 checks a determinant
//! identity that is provably false as advertised; its line reports FAIL
//! and the test pins down the correct identity instead.

use std::path::{Path, PathBuf};
use std::sync::OnceLock;
use std::time::Instant;

use nonholo_cli::scenario::ScenarioFile;
use nonholo_core::backstepping::stage::{Gains, Stage, Step, XStage};
use nonholo_core::jet::Dual;
use nonholo_core::maneuver::lie::{check_maneuverability, lie_h2_h1};
use nonholo_core::maneuver::reference::{maneuvering_operator, Direction};
use nonholo_core::maneuver::trajectory::DesiredTrajectory;
use nonholo_core::maneuver::transform::build_transform_truck;
use nonholo_core::models::{
    automobile, automobile_front_axle, chaplygin_sled, truck_with_trailers, ComponentIndex,
    Configuration, WheeledModel,
};
use nonholo_core::sim::{diagnostics, integrate_closed_loop, Scenario, Trace};

// Small deterministic generator so the suite needs no extra dependencies.
struct Rng(u64);

impl Rng {
    fn next_f64(&mut self) -> f64 {
        self.0 = self.0.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        ((z ^ (z >> 31)) >> 11) as f64 / (1u64 << 53) as f64
    }

    fn in_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }
}

fn scenarios_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios")
}

fn load_scenario(name: &str) -> Scenario {
    ScenarioFile::load(&scenarios_dir().join(name)).unwrap().build().unwrap()
}

/// The four bundled closed-loop runs, integrated once and shared by the
/// criteria that inspect them.
fn bundled_runs() -> &'static Vec<(String, Scenario, Trace)> {
    static RUNS: OnceLock<Vec<(String, Scenario, Trace)>> = OnceLock::new();
    RUNS.get_or_init(|| {
        [
            "sled_line_offset.json",
            "auto_circle_forward.json",
            "auto_circle_backward.json",
            "uturn_truck_2trailers.json",
        ]
        .iter()
        .map(|name| {
            let sc = load_scenario(name);
            let trace = integrate_closed_loop(&sc).unwrap();
            assert!(trace.fault.is_none(), "{name} faulted");
            (name.to_string(), sc, trace)
        })
        .collect()
    })
}

fn random_component_point(rng: &mut Rng, mu: &ComponentIndex, n: usize, margin: f64) -> Vec<f64> {
    let mut y = vec![rng.in_range(-3.0, 3.0)];
    for joint in 2..=n {
        let c = mu.offset(joint);
        y.push(c + rng.in_range(-(std::f64::consts::FRAC_PI_2 - margin),
                                std::f64::consts::FRAC_PI_2 - margin));
    }
    y
}

#[test]
fn criterion_01_transform_round_trip() {
    let m = truck_with_trailers(&[1.0, 1.0, 1.0]).unwrap();
    let started = Instant::now();
    let mut rng = Rng(0xacce01);
    let mut worst = 0.0f64;
    for mu in ComponentIndex::all(4) {
        let tf = build_transform_truck(&m, &mu).unwrap();
        for _ in 0..1000 {
            let y = random_component_point(&mut rng, &mu, 4, 0.05);
            let s = tf.forward(&y).unwrap();
            let back = tf.inverse(&s).unwrap();
            for (a, b) in y.iter().zip(back.iter()) {
                worst = worst.max((a - b).abs());
            }
        }
    }
    let elapsed = started.elapsed().as_secs_f64();
    let pass = worst <= 1e-10 && elapsed < 5.0;
    println!(
        "criterion 01 (transform round-trip): {} (max err {worst:.2e}, {elapsed:.2}s)",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass);
}

#[test]
fn criterion_02_jacobian_determinant_identity() {
    // As advertised: |det Jac S| should equal |L_{h₂}L_{h₁}^{n−1}y₁|ⁿ.
    // That is false for every n ≥ 2: the transform is lower triangular in
    // the shape coordinates, so the determinant is the *product* of the n
    // diagonal chain factors, of which only the last equals the Lie
    // factor. Already the n = 2 automobile gives det = sec²y₂ while the
    // claimed form gives sec⁴y₂. The line below reports the literal check;
    // the assertions pin the falsehood and the correct product identity.
    let mut rng = Rng(0xacce02);
    let mut worst_claim = 0.0f64;
    let mut worst_product = 0.0f64;
    for m in [
        automobile(),
        truck_with_trailers(&[1.0, 1.0]).unwrap(),
        truck_with_trailers(&[1.0, 1.0, 1.0]).unwrap(),
    ] {
        let n = m.n();
        let mu = ComponentIndex::new(vec![0; n - 1]);
        let tf = build_transform_truck(&m, &mu).unwrap();
        for _ in 0..500 {
            let y = random_component_point(&mut rng, &mu, n, 0.3);
            let det = tf.jacobian_det_abs(&y).unwrap();
            let lie: f64 = lie_h2_h1(&m, &y, n - 1).unwrap();
            let claimed = lie.abs().powi(n as i32);
            worst_claim = worst_claim.max((det - claimed).abs() / claimed.abs().max(1e-300));
            let product: f64 = tf.chain_diagonal(&y).unwrap().iter().product();
            worst_product = worst_product.max((det - product.abs()).abs() / det.max(1e-300));
        }
    }
    let literal_pass = worst_claim <= 1e-8;
    println!(
        "criterion 02 (jacobian determinant identity): {} (rel err vs |L|ⁿ {worst_claim:.2e}; vs diagonal product {worst_product:.2e})",
        if literal_pass { "PASS" } else { "FAIL" }
    );
    // The identity as stated does not hold; the diagonal-product identity
    // is what the determinant actually satisfies.
    assert!(!literal_pass, "the |L|ⁿ form unexpectedly held");
    assert!(worst_product <= 1e-8, "diagonal-product identity broken: {worst_product:.2e}");
}

#[test]
fn criterion_03_maneuverability_gate() {
    let mut pass = true;
    for m in [
        automobile(),
        truck_with_trailers(&[1.0]).unwrap(),
        truck_with_trailers(&[1.0, 1.0]).unwrap(),
        truck_with_trailers(&[1.0, 1.0, 1.0]).unwrap(),
    ] {
        pass &= check_maneuverability(&m, 16).unwrap().pass;
    }
    let fa = check_maneuverability(&automobile_front_axle(), 16).unwrap();
    pass &= !fa.pass && fa.witness.as_ref().map(|w| w.order) == Some(0);
    println!(
        "criterion 03 (maneuverability gate): {}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass);
}

#[test]
fn criterion_04_reference_feasibility() {
    let h = 1e-4;
    let mut worst = 0.0f64;
    for model in [chaplygin_sled(), automobile(), truck_with_trailers(&[1.0, 1.0, 1.0]).unwrap()] {
        let n = model.n();
        let mu = ComponentIndex::new(vec![0; n.saturating_sub(1)]);
        for trajectory in [
            DesiredTrajectory::Line { point: [0.0, 0.5], velocity: [1.0, 0.3] },
            DesiredTrajectory::Circle { center: [0.0, 0.0], radius: 5.0, rate: 0.2, phase: 0.1 },
            DesiredTrajectory::LaneChange { speed: 1.0, amplitude: 0.4, frequency: 0.1 },
        ] {
            for direction in [Direction::Forward, Direction::Backward] {
                let gen = maneuvering_operator(&model, &mu, &trajectory, direction, 0).unwrap();
                let points = gen.sample(0.5, h).unwrap();
                for w in points.windows(3) {
                    let mid = &w[1];
                    let rhs = model.rhs(&mid.qd.to_vec(), mid.ud).unwrap();
                    let hi = w[2].qd.to_vec();
                    let lo = w[0].qd.to_vec();
                    for i in 0..rhs.len() {
                        worst = worst.max(((hi[i] - lo[i]) / (2.0 * h) - rhs[i]).abs());
                    }
                }
            }
        }
    }
    let pass = worst <= 1e-6;
    println!(
        "criterion 04 (reference feasibility): {} (max residual {worst:.2e})",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass);
}

#[test]
fn criterion_05_gradient_integrity() {
    // Every gradient the stacked virtual controls consume — seeded duals
    // through each stage's α and V — against central finite differences.
    let x = XStage { gamma: 1.0 };
    let s1 = Step { inner: x, index: 1, terminal: false, delta: 1.0, gamma: 1.0 };
    let s2 = Step { inner: s1.clone(), index: 2, terminal: false, delta: 1.0, gamma: 1.0 };
    let s3 = Step { inner: s2.clone(), index: 3, terminal: false, delta: 1.0, gamma: 1.0 };
    let s4 = Step { inner: s3.clone(), index: 4, terminal: true, delta: 1.0, gamma: 1.0 };

    let mut rng = Rng(0xacce05);
    let mut worst = 0.0f64;
    // Fourth-order central difference: the stacked sinh terms have third
    // derivatives large enough that the plain second-order stencil at any
    // step size stays above the 1e-5 band.
    let fd_step = 1e-4;
    let mut check = |stage: &dyn DynStage, zl: usize, rl: usize, rng: &mut Rng| {
        for _ in 0..100 {
            let z: Vec<f64> = (0..zl).map(|_| rng.in_range(-0.8, 0.8)).collect();
            let s1v = rng.in_range(-1.0, 1.0);
            let mut r = vec![s1v.cos(), s1v.sin()];
            for _ in 2..rl {
                r.push(rng.in_range(-0.8, 0.8));
            }
            let w1 = if rng.next_f64() < 0.5 { 1.0 } else { -1.0 };
            for (vec_idx, len) in [(0usize, zl), (1, rl)] {
                for j in 0..len {
                    let dual = stage.grad(&z, &r, w1, vec_idx, j);
                    let shifted = |offset: f64| -> [f64; 2] {
                        let mut z = z.clone();
                        let mut r = r.clone();
                        if vec_idx == 0 {
                            z[j] += offset;
                        } else {
                            r[j] += offset;
                        }
                        stage.values(&z, &r, w1)
                    };
                    let p1 = shifted(fd_step);
                    let m1 = shifted(-fd_step);
                    let p2 = shifted(2.0 * fd_step);
                    let m2 = shifted(-2.0 * fd_step);
                    for (k, d) in dual.iter().enumerate() {
                        let fd = (8.0 * (p1[k] - m1[k]) - (p2[k] - m2[k])) / (12.0 * fd_step);
                        worst = worst.max((d - fd).abs() / fd.abs().max(1.0));
                    }
                }
            }
        }
    };
    check(&s1, 3, 3, &mut rng);
    check(&s2, 4, 4, &mut rng);
    check(&s3, 5, 5, &mut rng);
    check(&s4, 6, 6, &mut rng);
    let pass = worst <= 1e-5;
    println!(
        "criterion 05 (gradient integrity): {} (max rel err {worst:.2e})",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass);
}

/// Object-safe adapter over the generic stage functions for criterion 05.
trait DynStage {
    /// `(α, V)` at a plain point.
    fn values(&self, z: &[f64], r: &[f64], w1: f64) -> [f64; 2];
    /// `(∂α, ∂V)` along coordinate `j` of `z` (`vec_idx` 0) or `r` (1).
    fn grad(&self, z: &[f64], r: &[f64], w1: f64, vec_idx: usize, j: usize) -> [f64; 2];
}

impl<S: Stage> DynStage for Step<S> {
    fn values(&self, z: &[f64], r: &[f64], w1: f64) -> [f64; 2] {
        [self.alpha(z, r, w1), self.lyap(z, r, w1)]
    }

    fn grad(&self, z: &[f64], r: &[f64], w1: f64, vec_idx: usize, j: usize) -> [f64; 2] {
        let zd: Vec<Dual<f64, 1>> = z
            .iter()
            .enumerate()
            .map(|(k, &v)| {
                if vec_idx == 0 && k == j { Dual::seeded(v, 0) } else { Dual::constant(v) }
            })
            .collect();
        let rd: Vec<Dual<f64, 1>> = r
            .iter()
            .enumerate()
            .map(|(k, &v)| {
                if vec_idx == 1 && k == j { Dual::seeded(v, 0) } else { Dual::constant(v) }
            })
            .collect();
        [self.alpha(&zd, &rd, w1).du[0], self.lyap(&zd, &rd, w1).du[0]]
    }
}

#[test]
fn criterion_06_lyapunov_decay_envelope() {
    let mut pass = true;
    let mut detail = String::new();
    for (name, sc, trace) in bundled_runs() {
        let v0 = trace.lyapunov[0];
        let tau0 = trace.tau[0];
        let mut worst = 0.0f64;
        for k in 0..trace.len() {
            let bound = v0 * (-2.0 * sc.gains.gamma * (trace.tau[k] - tau0)).exp();
            worst = worst.max(trace.lyapunov[k] / bound);
        }
        let ok = worst <= 1.0 + 1e-3;
        pass &= ok;
        detail.push_str(&format!(" {name}={worst:.5}"));
    }
    println!(
        "criterion 06 (lyapunov decay envelope): {} (worst V̂/bound{detail})",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass);
}

fn convergence_run(sc: &Scenario) -> (Trace, f64) {
    let started = Instant::now();
    let trace = integrate_closed_loop(sc).unwrap();
    (trace, started.elapsed().as_secs_f64())
}

fn converged(trace: &Trace, model: &WheeledModel) -> bool {
    let rep = diagnostics(trace, 1.0);
    let last = trace.len() - 1;
    trace.fault.is_none()
        && trace.x_error[last] <= 1e-3
        && trace.shape_distance[last] <= 1e-3
        && rep.terminal_input_error <= 1e-3
        && rep.u1_sign_constant
        && trace
            .q
            .iter()
            .all(|row| model.component_of(&row[2..]).unwrap() == trace.component)
}

#[test]
fn criterion_07_convergence_runs() {
    let mut pass = true;
    let mut detail = String::new();
    for name in [
        "sled_line_offset.json",
        "auto_circle_forward.json",
        "auto_circle_backward.json",
        "uturn_truck_2trailers.json",
    ] {
        let mut sc = load_scenario(name);
        sc.horizon = 30.0;
        sc.step = 1e-3;
        let (trace, elapsed) = convergence_run(&sc);
        let ok = converged(&trace, &sc.model) && elapsed < 10.0;
        pass &= ok;
        detail.push_str(&format!(
            " {name}:{}({elapsed:.1}s)",
            if ok { "ok" } else { "FAIL" }
        ));
    }
    println!(
        "criterion 07 (convergence runs): {} ({})",
        if pass { "PASS" } else { "FAIL" },
        detail.trim()
    );
    assert!(pass);
}

#[test]
fn criterion_08_sled_basin() {
    // Large initial offsets make the Lyapunov gradient steep, so the basin
    // sweep uses a gentler decay rate; the 30 s horizon still lands well
    // inside the 1e-3 terminal band.
    let gamma = 0.4;
    let mut rng = Rng(0xacce08);
    let starts: Vec<(f64, f64, f64)> = (0..100)
        .map(|_| {
            let radius = 10.0 * rng.next_f64().sqrt();
            let angle = rng.in_range(0.0, 2.0 * std::f64::consts::PI);
            (radius * angle.cos(), radius * angle.sin(),
             rng.in_range(-std::f64::consts::PI, std::f64::consts::PI))
        })
        .collect();
    let failures: Vec<usize> = std::thread::scope(|scope| {
        let handles: Vec<_> = starts
            .chunks(13)
            .enumerate()
            .map(|(chunk_idx, chunk)| {
                scope.spawn(move || {
                    let mut bad = Vec::new();
                    for (i, &(x1, x2, y1)) in chunk.iter().enumerate() {
                        let sc = Scenario {
                            model: chaplygin_sled(),
                            trajectory: DesiredTrajectory::Line {
                                point: [0.0, 0.0],
                                velocity: [1.0, 0.0],
                            },
                            direction: Direction::Forward,
                            gains: Gains { gamma, deltas: vec![1.0] },
                            initial: Configuration::new([x1, x2], vec![y1]),
                            horizon: 30.0,
                            step: 1e-3,
                            decimation: 100,
                        };
                        let trace = integrate_closed_loop(&sc).unwrap();
                        if !converged(&trace, &sc.model) {
                            bad.push(chunk_idx * 13 + i);
                        }
                    }
                    bad
                })
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().unwrap()).collect()
    });
    let pass = failures.is_empty();
    println!(
        "criterion 08 (sled basin, 100 starts): {}{}",
        if pass { "PASS" } else { "FAIL" },
        if pass { String::new() } else { format!(" (failed starts {failures:?})") }
    );
    assert!(pass);
}

#[test]
fn criterion_09_constraint_residuals() {
    let mut worst = 0.0f64;
    for (_, _, trace) in bundled_runs() {
        for &r in &trace.max_residual {
            worst = worst.max(r);
        }
    }
    let pass = worst <= 1e-6;
    println!(
        "criterion 09 (constraint residuals): {} (max {worst:.2e})",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass);
}

#[test]
fn criterion_10_integrator_order() {
    let base = load_scenario("auto_circle_forward.json");
    let run = |h: f64| {
        let mut sc = base.clone();
        sc.horizon = 2.0;
        sc.step = h;
        sc.decimation = usize::MAX;
        integrate_closed_loop(&sc).unwrap().q.last().unwrap().clone()
    };
    // Steps chosen so truncation dominates the ~1e-11 roundoff floor.
    let fine = run(0.04 / 16.0);
    let err = |q: &[f64]| -> f64 {
        q.iter().zip(fine.iter()).map(|(&a, &b)| (a - b) * (a - b)).sum::<f64>().sqrt()
    };
    let ratio = err(&run(0.04)) / err(&run(0.02));
    let pass = (12.0..=20.0).contains(&ratio);
    println!(
        "criterion 10 (integrator order): {} (step-halving ratio {ratio:.2})",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass);
}
