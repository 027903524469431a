//! Scenario files: a JSON document describing one closed-loop run.
//! Unknown keys are rejected; units are meters, radians, seconds.

use std::path::Path;

use serde::{Deserialize, Serialize};

use nonholo_core::backstepping::stage::Gains;
use nonholo_core::maneuver::reference::Direction;
use nonholo_core::maneuver::trajectory::DesiredTrajectory;
use nonholo_core::models::{
    automobile, automobile_front_axle, chaplygin_sled, truck_with_trailers, Configuration,
    WheeledModel,
};
use nonholo_core::sim::{Scenario, DEFAULT_STEP};

use crate::CliError;

/// Vehicle selection: `kind` ∈ {sled, automobile, automobile_front_axle,
/// truck}; `lengths` (m) are required for trucks only.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub lengths: Vec<f64>,
}

impl ModelSpec {
    pub fn build(&self) -> Result<WheeledModel, CliError> {
        match self.kind.as_str() {
            "sled" => Ok(chaplygin_sled()),
            "automobile" => Ok(automobile()),
            "automobile_front_axle" => Ok(automobile_front_axle()),
            "truck" => truck_with_trailers(&self.lengths)
                .map_err(|e| CliError::Schema(format!("model: {e}"))),
            other => Err(CliError::Schema(format!(
                "model.kind must be sled|automobile|automobile_front_axle|truck, got {other:?}"
            ))),
        }
    }
}

/// Desired planar curve for the distinguished point.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TrajectorySpec {
    /// `xᴰ(t) = point + t·velocity` (m, m/s).
    Line { point: [f64; 2], velocity: [f64; 2] },
    /// Circle of `radius` (m) about `center`, angular `rate` (rad/s),
    /// starting at angle `phase` (rad).
    Circle {
        center: [f64; 2],
        radius: f64,
        rate: f64,
        #[serde(default)]
        phase: f64,
    },
    /// Straight run at `speed` (m/s) with a sinusoidal lateral offset of
    /// `amplitude` (m) and `frequency` (Hz).
    LaneChange { speed: f64, amplitude: f64, frequency: f64 },
    /// Componentwise polynomials in `t`, coefficients in ascending order.
    Polynomial { x_coeffs: Vec<f64>, y_coeffs: Vec<f64> },
}

impl TrajectorySpec {
    pub fn build(&self) -> DesiredTrajectory {
        match self.clone() {
            TrajectorySpec::Line { point, velocity } => {
                DesiredTrajectory::Line { point, velocity }
            }
            TrajectorySpec::Circle { center, radius, rate, phase } => {
                DesiredTrajectory::Circle { center, radius, rate, phase }
            }
            TrajectorySpec::LaneChange { speed, amplitude, frequency } => {
                DesiredTrajectory::LaneChange { speed, amplitude, frequency }
            }
            TrajectorySpec::Polynomial { x_coeffs, y_coeffs } => {
                DesiredTrajectory::Polynomial { x_coeffs, y_coeffs }
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainsSpec {
    pub gamma: f64,
    pub deltas: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialState {
    /// Distinguished point (m).
    pub x: [f64; 2],
    /// Shape angles y₁…yₙ (rad).
    pub y: Vec<f64>,
}

fn default_decimation() -> usize {
    10
}

/// Output file names (relative to the output directory) and trace
/// decimation.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub svg: Option<String>,
    #[serde(default = "default_decimation")]
    pub decimation: usize,
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec { csv: None, svg: None, decimation: default_decimation() }
    }
}

fn default_step() -> f64 {
    DEFAULT_STEP
}

/// The on-disk scenario document.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub model: ModelSpec,
    pub trajectory: TrajectorySpec,
    /// +1 forward, −1 backward.
    pub direction: i8,
    pub gains: GainsSpec,
    pub initial_state: InitialState,
    /// Horizon (s).
    pub horizon: f64,
    /// Integration step (s).
    #[serde(default = "default_step")]
    pub step: f64,
    #[serde(default)]
    pub outputs: OutputSpec,
}

impl ScenarioFile {
    pub fn load(path: &Path) -> Result<ScenarioFile, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Schema(format!("{}: {e}", path.display())))
    }

    pub fn direction(&self) -> Result<Direction, CliError> {
        match self.direction {
            1 => Ok(Direction::Forward),
            -1 => Ok(Direction::Backward),
            d => Err(CliError::Schema(format!("direction must be 1 or -1, got {d}"))),
        }
    }

    /// Validate and assemble the simulator scenario.
    pub fn build(&self) -> Result<Scenario, CliError> {
        let model = self.model.build()?;
        if self.initial_state.y.len() != model.n() {
            return Err(CliError::Schema(format!(
                "initial_state.y has {} angles, model {} needs {}",
                self.initial_state.y.len(),
                model.name(),
                model.n()
            )));
        }
        let scenario = Scenario {
            model,
            trajectory: self.trajectory.build(),
            direction: self.direction()?,
            gains: Gains { gamma: self.gains.gamma, deltas: self.gains.deltas.clone() },
            initial: Configuration::new(self.initial_state.x, self.initial_state.y.clone()),
            horizon: self.horizon,
            step: self.step,
            decimation: self.outputs.decimation,
        };
        scenario.validate().map_err(|e| CliError::Schema(e.to_string()))?;
        Ok(scenario)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> &'static str {
        r#"{
            "model": {"kind": "automobile"},
            "trajectory": {"kind": "circle", "center": [0, 0], "radius": 5, "rate": 0.2},
            "direction": 1,
            "gains": {"gamma": 1.0, "deltas": [1.0, 1.0]},
            "initial_state": {"x": [5.2, 0.0], "y": [1.7, 0.1]},
            "horizon": 10.0
        }"#
    }

    #[test]
    fn minimal_document_parses_with_defaults() {
        let sf: ScenarioFile = serde_json::from_str(minimal()).unwrap();
        assert_eq!(sf.step, DEFAULT_STEP);
        assert_eq!(sf.outputs.decimation, 10);
        let sc = sf.build().unwrap();
        assert_eq!(sc.model.n(), 2);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let doc = minimal().replace("\"horizon\": 10.0", "\"horizon\": 10.0, \"extra\": 1");
        assert!(serde_json::from_str::<ScenarioFile>(&doc).is_err());
    }

    #[test]
    fn wrong_shape_dimension_is_a_schema_error() {
        let doc = minimal().replace("[1.7, 0.1]", "[1.7]");
        let sf: ScenarioFile = serde_json::from_str(&doc).unwrap();
        assert!(matches!(sf.build(), Err(CliError::Schema(_))));
    }

    #[test]
    fn direction_must_be_unit() {
        let doc = minimal().replace("\"direction\": 1", "\"direction\": 2");
        let sf: ScenarioFile = serde_json::from_str(&doc).unwrap();
        assert!(sf.build().is_err());
    }
}
