//! CSV emission and re-parsing. Every column carries its unit in the
//! header; numbers use shortest round-trip formatting, so files are
//! byte-stable and re-parse to the exact binary values.

use std::io::Write;
use std::path::Path;

use nonholo_core::maneuver::reference::ReferencePoint;
use nonholo_core::sim::Trace;

use crate::CliError;

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn join(values: impl IntoIterator<Item = f64>) -> String {
    values.into_iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

/// Header for a feedforward plan with `n` shape angles.
fn plan_header(n: usize) -> String {
    let mut cols = vec!["t[s]".to_string(), "xd1[m]".to_string(), "xd2[m]".to_string()];
    cols.extend((1..=n).map(|i| format!("yd{i}[rad]")));
    cols.push("ud1[m/s]".to_string());
    cols.push("ud2[rad/s]".to_string());
    cols.extend((1..=n).map(|i| format!("sd{i}[-]")));
    cols.push("vd1[m/s]".to_string());
    cols.push("vd2[-]".to_string());
    cols.join(",")
}

/// Write the reference plan `(t, qᴰ, uᴰ, sᴰ, vᴰ)`.
pub fn write_plan_csv(path: &Path, points: &[ReferencePoint], n: usize) -> Result<(), CliError> {
    let mut out = String::new();
    out.push_str(&plan_header(n));
    out.push('\n');
    for p in points {
        let row = [p.t, p.qd.x[0], p.qd.x[1]]
            .into_iter()
            .chain(p.qd.y.iter().copied())
            .chain(p.ud)
            .chain(p.sd.iter().copied())
            .chain(p.vd);
        out.push_str(&join(row));
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())
}

/// One re-parsed plan row: time, configuration `(x, y)`, and input.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanRow {
    pub t: f64,
    pub q: Vec<f64>,
    pub ud: [f64; 2],
}

/// Re-parse a plan written by [`write_plan_csv`].
pub fn read_plan_csv(path: &Path) -> Result<Vec<PlanRow>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| CliError::Schema("empty plan CSV".into()))?;
    let n = header.split(',').filter(|c| c.starts_with("yd")).count();
    if n == 0 {
        return Err(CliError::Schema(format!("{}: not a plan CSV", path.display())));
    }
    let mut rows = Vec::new();
    for (k, line) in lines.enumerate() {
        let vals: Vec<f64> = line
            .split(',')
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|e| CliError::Schema(format!("{}: row {}: {e}", path.display(), k + 1)))
            })
            .collect::<Result<_, _>>()?;
        if vals.len() != 2 * n + 7 {
            return Err(CliError::Schema(format!(
                "{}: row {} has {} fields, expected {}",
                path.display(),
                k + 1,
                vals.len(),
                2 * n + 7
            )));
        }
        rows.push(PlanRow {
            t: vals[0],
            q: vals[1..n + 3].to_vec(),
            ud: [vals[n + 3], vals[n + 4]],
        });
    }
    Ok(rows)
}

/// Write a closed-loop trace with `n` shape angles.
pub fn write_trace_csv(path: &Path, trace: &Trace, n: usize) -> Result<(), CliError> {
    let mut cols = vec!["t[s]".to_string(), "tau[m]".to_string()];
    cols.push("x1[m]".to_string());
    cols.push("x2[m]".to_string());
    cols.extend((1..=n).map(|i| format!("y{i}[rad]")));
    cols.push("u1[m/s]".to_string());
    cols.push("u2[rad/s]".to_string());
    cols.push("xd1[m]".to_string());
    cols.push("xd2[m]".to_string());
    cols.extend((1..=n).map(|i| format!("yd{i}[rad]")));
    cols.push("ud1[m/s]".to_string());
    cols.push("ud2[rad/s]".to_string());
    cols.push("x_err[m]".to_string());
    cols.push("shape_dist[rad]".to_string());
    cols.push("lyapunov[-]".to_string());
    cols.push("max_residual[-]".to_string());
    let mut out = cols.join(",");
    out.push('\n');
    for k in 0..trace.len() {
        let row = [trace.t[k], trace.tau[k]]
            .into_iter()
            .chain(trace.q[k].iter().copied())
            .chain(trace.u[k])
            .chain(trace.qd[k].iter().copied())
            .chain(trace.ud[k])
            .chain([
                trace.x_error[k],
                trace.shape_distance[k],
                trace.lyapunov[k],
                trace.max_residual[k],
            ]);
        out.push_str(&join(row));
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
        }
    }
    let mut f = std::fs::File::create(path).map_err(|e| io_err(path, e))?;
    f.write_all(bytes).map_err(|e| io_err(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nonholo_core::maneuver::reference::{maneuvering_operator, Direction};
    use nonholo_core::maneuver::trajectory::DesiredTrajectory;
    use nonholo_core::models::{automobile, ComponentIndex};

    #[test]
    fn plan_round_trips_exactly() {
        let m = automobile();
        let tr = DesiredTrajectory::Circle { center: [0.0, 0.0], radius: 4.0, rate: 0.3, phase: 0.1 };
        let gen = maneuvering_operator(&m, &ComponentIndex::new(vec![0]), &tr, Direction::Forward, 0)
            .unwrap();
        let points = gen.sample(1.0, 0.01).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("plan.csv");
        write_plan_csv(&path, &points, m.n()).unwrap();
        let rows = read_plan_csv(&path).unwrap();
        assert_eq!(rows.len(), points.len());
        for (row, p) in rows.iter().zip(points.iter()) {
            assert_eq!(row.t, p.t);
            assert_eq!(row.q, p.qd.to_vec());
            assert_eq!(row.ud, p.ud);
        }
    }

    #[test]
    fn identical_inputs_give_identical_bytes() {
        let m = automobile();
        let tr = DesiredTrajectory::Line { point: [0.0, 0.0], velocity: [1.0, 0.2] };
        let gen = maneuvering_operator(&m, &ComponentIndex::new(vec![0]), &tr, Direction::Forward, 0)
            .unwrap();
        let points = gen.sample(0.5, 0.05).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.csv");
        let b = dir.path().join("b.csv");
        write_plan_csv(&a, &points, m.n()).unwrap();
        write_plan_csv(&b, &points, m.n()).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    }
}
