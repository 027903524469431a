use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use nonholo_cli::commands::{cmd_batch, cmd_check, cmd_plan, cmd_simulate, Overrides};
use nonholo_cli::svg::PlotStyle;
use nonholo_cli::{CliError, EXIT_FAIL, EXIT_OK, OUT_DIR_ENV};

/// Control synthesis and simulation for nonholonomic wheeled vehicles.
#[derive(Parser)]
#[command(name = "nonholo", version, about)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Verify trajectory admissibility and model maneuverability.
    Check {
        /// Scenario JSON file.
        #[arg(long)]
        scenario: PathBuf,
        /// Override the horizon (s).
        #[arg(long)]
        horizon: Option<f64>,
    },
    /// Write the feedforward reference (t, qᴰ, uᴰ, sᴰ, vᴰ) as CSV.
    Plan {
        #[arg(long)]
        scenario: PathBuf,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
        /// Override the integration step (s).
        #[arg(long)]
        step: Option<f64>,
        #[arg(long)]
        horizon: Option<f64>,
    },
    /// Run the closed loop; write trace CSV, pose SVG, diagnostics JSON.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        step: Option<f64>,
        #[arg(long)]
        horizon: Option<f64>,
        /// Rotate the pose-plot color palette.
        #[arg(long)]
        seed_style: Option<u64>,
    },
    /// Simulate many scenarios concurrently into per-scenario directories.
    Batch {
        #[arg(long, num_args = 1.., required = true)]
        scenarios: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        step: Option<f64>,
        #[arg(long)]
        horizon: Option<f64>,
        #[arg(long)]
        seed_style: Option<u64>,
    },
}

/// `NONHOLO_OUT_DIR` redirects outputs: directories are replaced, file
/// paths keep their name inside the override directory.
fn out_dir(requested: PathBuf) -> PathBuf {
    match std::env::var_os(OUT_DIR_ENV) {
        Some(dir) => PathBuf::from(dir),
        None => requested,
    }
}

fn out_file(requested: PathBuf) -> PathBuf {
    match std::env::var_os(OUT_DIR_ENV) {
        Some(dir) => {
            let name = requested.file_name().map(ToOwned::to_owned);
            let mut p = PathBuf::from(dir);
            if let Some(name) = name {
                p.push(name);
            }
            p
        }
        None => requested,
    }
}

fn style(seed: Option<u64>) -> PlotStyle {
    PlotStyle { seed: seed.unwrap_or(0), ..PlotStyle::default() }
}

fn fail(e: &CliError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(e.exit_code())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.cmd {
        Cmd::Check { scenario, horizon } => {
            match cmd_check(&scenario, Overrides { step: None, horizon }) {
                Ok(out) => {
                    print!("{}", out.report);
                    ExitCode::from(if out.pass { EXIT_OK } else { EXIT_FAIL })
                }
                Err(e) => fail(&e),
            }
        }
        Cmd::Plan { scenario, out, step, horizon } => {
            let out = out_file(out);
            match cmd_plan(&scenario, &out, Overrides { step, horizon }) {
                Ok(()) => {
                    println!("wrote {}", out.display());
                    ExitCode::from(EXIT_OK)
                }
                Err(e) => fail(&e),
            }
        }
        Cmd::Simulate { scenario, out, step, horizon, seed_style } => {
            let out = out_dir(out);
            match cmd_simulate(&scenario, &out, Overrides { step, horizon }, &style(seed_style)) {
                Ok(res) => {
                    println!(
                        "wrote {}, {}, {}",
                        res.trace_csv.display(),
                        res.pose_svg.display(),
                        res.diagnostics_json.display()
                    );
                    if let Some(fault) = &res.diagnostics.fault {
                        eprintln!("simulation fault: {fault}");
                    }
                    ExitCode::from(if res.pass { EXIT_OK } else { EXIT_FAIL })
                }
                Err(e) => fail(&e),
            }
        }
        Cmd::Batch { scenarios, out, step, horizon, seed_style } => {
            let out = out_dir(out);
            let results = cmd_batch(&scenarios, &out, Overrides { step, horizon }, &style(seed_style));
            let mut worst = EXIT_OK;
            for (path, res) in &results {
                match res {
                    Ok(r) if r.pass => println!("{}: ok", path.display()),
                    Ok(r) => {
                        println!(
                            "{}: fault ({})",
                            path.display(),
                            r.diagnostics.fault.as_deref().unwrap_or("unknown")
                        );
                        worst = worst.max(EXIT_FAIL);
                    }
                    Err(e) => {
                        eprintln!("{}: {e}", path.display());
                        worst = worst.max(e.exit_code());
                    }
                }
            }
            ExitCode::from(worst)
        }
    }
}
