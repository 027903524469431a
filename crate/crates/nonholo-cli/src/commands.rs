//! Subcommand implementations shared by the binary and the integration
//! tests. Exit-code policy: 0 all verdicts pass, 1 a verdict or run fails,
//! 2 the input could not be read or parsed.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use nonholo_core::maneuver::lie::check_maneuverability;
use nonholo_core::maneuver::reference::maneuvering_operator;
use nonholo_core::maneuver::trajectory::admissibility_report;
use nonholo_core::sim::{diagnostics, integrate_closed_loop, Scenario};

use crate::csvio::{write_plan_csv, write_trace_csv};
use crate::scenario::ScenarioFile;
use crate::svg::{write_pose_plot, PlotStyle};
use crate::CliError;

/// Shape samples per component used by the maneuverability check.
const MANEUVER_SAMPLES: usize = 16;

/// Command-line overrides applied on top of the scenario file.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub step: Option<f64>,
    pub horizon: Option<f64>,
}

fn load(path: &Path, over: Overrides) -> Result<(ScenarioFile, Scenario), CliError> {
    let mut file = ScenarioFile::load(path)?;
    if let Some(step) = over.step {
        file.step = step;
    }
    if let Some(horizon) = over.horizon {
        file.horizon = horizon;
    }
    let scenario = file.build()?;
    Ok((file, scenario))
}

/// Admissibility + maneuverability verdicts; `pass` drives the exit code.
#[derive(Debug)]
pub struct CheckOutcome {
    pub report: String,
    pub pass: bool,
}

/// `check`: print admissibility, strong admissibility, and maneuverability
/// verdicts for a scenario.
pub fn cmd_check(path: &Path, over: Overrides) -> Result<CheckOutcome, CliError> {
    let file = ScenarioFile::load(path)?;
    let model = file.model.build()?;
    let trajectory = file.trajectory.build();
    let horizon = over.horizon.unwrap_or(file.horizon);
    let adm = admissibility_report(&trajectory, model.n(), horizon);
    let man = check_maneuverability(&model, MANEUVER_SAMPLES)
        .map_err(|e| CliError::Core(e.to_string()))?;
    let mut report = String::new();
    let _ = writeln!(report, "model: {} (n = {})", model.name(), model.n());
    let _ = writeln!(report, "trajectory: {adm}");
    let _ = writeln!(
        report,
        "maneuverability: {} ({} samples x {} components)",
        if man.pass { "pass" } else { "FAIL" },
        man.samples_per_component,
        man.components
    );
    if let Some(w) = &man.witness {
        let _ = writeln!(
            report,
            "  witness: order {} condition violated, value {:.3e} at y = {:?}",
            w.order, w.value, w.y
        );
    }
    let pass = adm.admissible && adm.strongly_admissible && man.pass;
    let _ = writeln!(report, "verdict: {}", if pass { "pass" } else { "FAIL" });
    Ok(CheckOutcome { report, pass })
}

/// `plan`: write the feedforward reference `(t, qᴰ, uᴰ, sᴰ, vᴰ)` as CSV on
/// the decimated grid.
pub fn cmd_plan(path: &Path, out_csv: &Path, over: Overrides) -> Result<(), CliError> {
    let check = cmd_check(path, over)?;
    if !check.pass {
        return Err(CliError::Verdict(check.report));
    }
    let (file, scenario) = load(path, over)?;
    let mu = scenario
        .model
        .component_of(&scenario.initial.y)
        .map_err(|e| CliError::Core(e.to_string()))?;
    let gen = maneuvering_operator(
        &scenario.model,
        &mu,
        &scenario.trajectory,
        scenario.direction,
        0,
    )
    .map_err(|e| CliError::Core(e.to_string()))?;
    let grid = scenario.step * file.outputs.decimation as f64;
    let points = gen
        .sample(scenario.horizon, grid)
        .map_err(|e| CliError::Core(e.to_string()))?;
    write_plan_csv(out_csv, &points, scenario.model.n())
}

/// Diagnostics document written next to each trace.
#[derive(Debug, Serialize)]
pub struct DiagnosticsJson {
    pub scenario: String,
    pub model: String,
    pub component: String,
    pub samples: usize,
    pub envelope_pass: bool,
    pub envelope_first_violation: Option<usize>,
    pub terminal_x_error: f64,
    pub terminal_shape_distance: f64,
    pub terminal_input_error: f64,
    pub max_residual: f64,
    pub residual_pass: bool,
    pub input_sup: f64,
    pub input_ref_sup: f64,
    pub input_bounded: bool,
    pub u1_sign_constant: bool,
    pub time_to_one_percent: Option<f64>,
    pub fault: Option<String>,
    pub runtime_s: f64,
}

/// Everything `simulate` produced.
pub struct SimulateOutcome {
    pub diagnostics: DiagnosticsJson,
    pub trace_csv: PathBuf,
    pub pose_svg: PathBuf,
    pub diagnostics_json: PathBuf,
    /// False iff the run faulted.
    pub pass: bool,
}

/// `simulate`: integrate the closed loop; write trace CSV, pose SVG, and a
/// diagnostics JSON into `out_dir`.
pub fn cmd_simulate(
    path: &Path,
    out_dir: &Path,
    over: Overrides,
    style: &PlotStyle,
) -> Result<SimulateOutcome, CliError> {
    let check = cmd_check(path, over)?;
    if !check.pass {
        return Err(CliError::Verdict(check.report));
    }
    let (file, scenario) = load(path, over)?;
    let started = Instant::now();
    let trace = integrate_closed_loop(&scenario).map_err(|e| CliError::Core(e.to_string()))?;
    let runtime_s = started.elapsed().as_secs_f64();
    let rep = diagnostics(&trace, scenario.gains.gamma);

    let trace_csv = out_dir.join(file.outputs.csv.as_deref().unwrap_or("trace.csv"));
    let pose_svg = out_dir.join(file.outputs.svg.as_deref().unwrap_or("poses.svg"));
    let diagnostics_json = out_dir.join("diagnostics.json");
    write_trace_csv(&trace_csv, &trace, scenario.model.n())?;
    write_pose_plot(&pose_svg, &trace, &scenario.model, style)?;

    let diag = DiagnosticsJson {
        scenario: path.display().to_string(),
        model: scenario.model.name().to_string(),
        component: format!("{}", trace.component),
        samples: trace.len(),
        envelope_pass: rep.envelope_pass,
        envelope_first_violation: rep.envelope_first_violation,
        terminal_x_error: rep.terminal_x_error,
        terminal_shape_distance: rep.terminal_shape_distance,
        terminal_input_error: rep.terminal_input_error,
        max_residual: rep.max_residual,
        residual_pass: rep.residual_pass,
        input_sup: rep.input_sup,
        input_ref_sup: rep.input_ref_sup,
        input_bounded: rep.input_bounded,
        u1_sign_constant: rep.u1_sign_constant,
        time_to_one_percent: rep.time_to_one_percent,
        fault: rep.fault.clone(),
        runtime_s,
    };
    let body = serde_json::to_string_pretty(&diag)
        .map_err(|e| CliError::Core(e.to_string()))?;
    std::fs::write(&diagnostics_json, body + "\n")
        .map_err(|e| CliError::Io(format!("{}: {e}", diagnostics_json.display())))?;
    let pass = trace.fault.is_none();
    Ok(SimulateOutcome { diagnostics: diag, trace_csv, pose_svg, diagnostics_json, pass })
}

/// `batch`: simulate every scenario into `out_dir/<file-stem>/`, one worker
/// thread each; the worst outcome wins the exit code.
pub fn cmd_batch(
    paths: &[PathBuf],
    out_dir: &Path,
    over: Overrides,
    style: &PlotStyle,
) -> Vec<(PathBuf, Result<SimulateOutcome, CliError>)> {
    std::thread::scope(|scope| {
        let handles: Vec<_> = paths
            .iter()
            .map(|p| {
                let style = style.clone();
                let sub = out_dir.join(
                    p.file_stem()
                        .map(|s| s.to_string_lossy().into_owned())
                        .unwrap_or_else(|| "scenario".to_string()),
                );
                scope.spawn(move || cmd_simulate(p, &sub, over, &style))
            })
            .collect();
        paths
            .iter()
            .cloned()
            .zip(handles.into_iter().map(|h| h.join().expect("worker panicked")))
            .collect()
    })
}
