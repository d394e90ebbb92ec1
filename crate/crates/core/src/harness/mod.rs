//! JSON run configuration, sweep specs and the drivers behind the `qoc` CLI.

pub mod ops;
pub mod run;

use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::cost::CostSpec;
use crate::error::{QocError, Result};
use crate::gradient::{ControlProblem, Strategy, StrategyKind};
use crate::model::{ControlGrid, HamiltonianModel, TimeGrid};
use crate::optimizer::{initial_controls, GrapeConfig};

pub use ops::{NamedOp, OperatorSpec, Scalar, StateSpec};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub qubits: u32,
    pub drift: OperatorSpec,
    pub controls: Vec<OperatorSpec>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub n_steps: usize,
    pub dt: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostWeights {
    #[serde(rename = "F0", default)]
    pub f0: f64,
    #[serde(rename = "F1", default)]
    pub f1: f64,
    #[serde(rename = "F2", default)]
    pub f2: f64,
    #[serde(rename = "G3", default)]
    pub g3: f64,
    #[serde(rename = "G4", default)]
    pub g4: f64,
    #[serde(rename = "G5", default)]
    pub g5: f64,
    #[serde(rename = "G6", default)]
    pub g6: f64,
}

impl CostWeights {
    pub fn to_array(self) -> [f64; 7] {
        [self.f0, self.f1, self.f2, self.g3, self.g4, self.g5, self.g6]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostConfig {
    pub weights: CostWeights,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_gate: Option<OperatorSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_states: Option<StateSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub forbidden_states: Option<StateSpec>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PeriodRule {
    /// `round(√N)`, at least 1.
    Sqrt,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PeriodSpec {
    Fixed(usize),
    Rule(PeriodRule),
}

impl PeriodSpec {
    pub fn resolve(self, n_steps: usize) -> usize {
        match self {
            PeriodSpec::Fixed(c) => c,
            PeriodSpec::Rule(PeriodRule::Sqrt) => ((n_steps as f64).sqrt().round() as usize).max(1),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategyConfig {
    pub kind: StrategyKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period: Option<PeriodSpec>,
}

impl Default for StrategyConfig {
    fn default() -> Self {
        Self {
            kind: StrategyKind::StoreAll,
            period: None,
        }
    }
}

impl StrategyConfig {
    pub fn all_sqrt() -> Vec<Self> {
        StrategyKind::ALL
            .into_iter()
            .map(|kind| Self {
                kind,
                period: kind.needs_period().then_some(PeriodSpec::Rule(PeriodRule::Sqrt)),
            })
            .collect()
    }

    pub fn resolve(&self, n_steps: usize) -> Result<Strategy> {
        Strategy::new(self.kind, self.period.map(|p| p.resolve(n_steps)))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerConfig {
    pub step_size: f64,
    pub max_iters: usize,
    pub fidelity_threshold: f64,
    pub seed: u64,
    pub initial_amplitude: f64,
    pub backtrack: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            step_size: 1.0,
            max_iters: 5000,
            fidelity_threshold: 1e-3,
            seed: 0,
            initial_amplitude: 0.5,
            backtrack: false,
        }
    }
}

/// Control amplitudes for a run. Absent from the config means random knots
/// drawn from the optimizer seed and amplitude.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ControlsSpec {
    Zeros,
    /// One constant amplitude per channel.
    Constant {
        values: Vec<f64>,
    },
    /// `m` rows of `N+1` knot values.
    Knots {
        values: Vec<Vec<f64>>,
    },
    /// A `controls.json` written by `optimize`.
    File {
        path: PathBuf,
    },
    Random {
        amplitude: f64,
        seed: u64,
    },
}

/// On-disk control amplitudes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlsFile {
    pub knot_times: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

impl ControlsFile {
    pub fn from_grid(controls: &ControlGrid) -> Self {
        Self {
            knot_times: controls.knot_times().to_vec(),
            values: controls.values().outer_iter().map(|r| r.to_vec()).collect(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }

    pub fn to_grid(&self, grid: &TimeGrid) -> Result<ControlGrid> {
        if self.knot_times.len() != grid.n_knots()
            || self
                .knot_times
                .iter()
                .zip(grid.knot_times())
                .any(|(a, b)| (a - b).abs() > 1e-9 * (1.0 + b.abs()))
        {
            return Err(QocError::Config(
                "controls file knot times do not match the time grid".into(),
            ));
        }
        knots_to_grid(&self.values, grid)
    }
}

fn knots_to_grid(rows: &[Vec<f64>], grid: &TimeGrid) -> Result<ControlGrid> {
    let m = rows.len();
    let k = grid.n_knots();
    if rows.iter().any(|r| r.len() != k) {
        return Err(QocError::Config(format!("every control row needs {k} knot values")));
    }
    let values = Array2::from_shape_fn((m, k), |(i, j)| rows[i][j]);
    ControlGrid::new(values, grid)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSpec,
    pub grid: GridSpec,
    #[serde(default)]
    pub initial_states: StateSpec,
    pub cost: CostConfig,
    #[serde(default)]
    pub strategy: StrategyConfig,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub controls: Option<ControlsSpec>,
    /// Output directory; the CLI `--out` flag takes precedence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

/// Everything a command needs, built and validated from a [`RunConfig`].
#[derive(Clone, Debug)]
pub struct Setup {
    pub problem: ControlProblem,
    pub strategy: Strategy,
    pub grape: GrapeConfig,
    pub controls: ControlGrid,
    pub qubits: u32,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| QocError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| QocError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn build_problem(&self) -> Result<ControlProblem> {
        let q = self.model.qubits;
        if !(1..=12).contains(&q) {
            return Err(QocError::Config(format!("qubits = {q} outside 1..=12")));
        }
        let drift = self.model.drift.build(q)?;
        let controls = self
            .model
            .controls
            .iter()
            .map(|c| c.build(q))
            .collect::<Result<Vec<_>>>()?;
        let model = HamiltonianModel::new(drift, controls)?;
        let grid = TimeGrid::new(self.grid.n_steps, self.grid.dt)?;
        let psi0 = self.initial_states.build(q)?;
        let c = &self.cost;
        let cost = CostSpec::new(
            c.weights.to_array(),
            c.target_gate.as_ref().map(|g| g.build(q)).transpose()?,
            c.target_states.as_ref().map(|s| s.build(q)).transpose()?,
            c.forbidden_states.as_ref().map(|s| s.build(q)).transpose()?,
        )?;
        ControlProblem::new(model, grid, psi0, cost)
    }

    pub fn build_controls(&self, problem: &ControlProblem) -> Result<ControlGrid> {
        let m = problem.n_controls();
        let grid = &problem.grid;
        match &self.controls {
            None => initial_controls(m, grid, self.optimizer.initial_amplitude, self.optimizer.seed),
            Some(ControlsSpec::Zeros) => Ok(ControlGrid::zeros(m, grid)),
            Some(ControlsSpec::Constant { values }) => {
                if values.len() != m {
                    return Err(QocError::Config(format!(
                        "{} constants for {m} control channels",
                        values.len()
                    )));
                }
                let rows: Vec<Vec<f64>> = values.iter().map(|&v| vec![v; grid.n_knots()]).collect();
                knots_to_grid(&rows, grid)
            }
            Some(ControlsSpec::Knots { values }) => {
                if values.len() != m {
                    return Err(QocError::Config(format!(
                        "{} control rows for {m} channels",
                        values.len()
                    )));
                }
                knots_to_grid(values, grid)
            }
            Some(ControlsSpec::File { path }) => {
                let g = ControlsFile::load(path)?.to_grid(grid)?;
                if g.n_controls() != m {
                    return Err(QocError::Config(format!(
                        "controls file has {} rows for {m} channels",
                        g.n_controls()
                    )));
                }
                Ok(g)
            }
            Some(ControlsSpec::Random { amplitude, seed }) => initial_controls(m, grid, *amplitude, *seed),
        }
    }

    pub fn setup(&self) -> Result<Setup> {
        let problem = self.build_problem()?;
        let strategy = self.strategy.resolve(problem.grid.n_steps())?;
        strategy.validate(problem.grid.n_steps())?;
        let o = &self.optimizer;
        let grape = GrapeConfig::new(o.step_size, o.max_iters, o.fidelity_threshold, strategy, o.seed)?
            .with_initial_amplitude(o.initial_amplitude)
            .with_backtrack(o.backtrack);
        let controls = self.build_controls(&problem)?;
        Ok(Setup {
            problem,
            strategy,
            grape,
            controls,
            qubits: self.model.qubits,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Qubits,
    Steps,
    CheckpointPeriod,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Qubits => "qubits",
            SweepAxis::Steps => "steps",
            SweepAxis::CheckpointPeriod => "checkpoint_period",
        }
    }
}

fn one() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub values: Vec<usize>,
    pub base: RunConfig,
    #[serde(default = "one")]
    pub repetitions: usize,
    #[serde(default = "StrategyConfig::all_sqrt")]
    pub strategies: Vec<StrategyConfig>,
}

impl SweepSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text).map_err(|e| QocError::Config(format!("sweep spec: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| QocError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(QocError::Config("sweep values must be non-empty".into()));
        }
        if self.values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(QocError::Config("sweep values must be strictly increasing".into()));
        }
        if self.values[0] == 0 {
            return Err(QocError::Config("sweep values must be positive".into()));
        }
        if self.repetitions == 0 {
            return Err(QocError::Config("repetitions must be at least 1".into()));
        }
        if self.strategies.is_empty() {
            return Err(QocError::Config("at least one strategy is required".into()));
        }
        Ok(())
    }

    /// The run config and strategy at one sweep point. On the period axis,
    /// strategies without a period are left unchanged.
    pub fn point(&self, value: usize, strategy: &StrategyConfig) -> RunConfig {
        let mut cfg = self.base.clone();
        let mut s = *strategy;
        match self.axis {
            SweepAxis::Qubits => cfg.model.qubits = value as u32,
            SweepAxis::Steps => cfg.grid.n_steps = value,
            SweepAxis::CheckpointPeriod => {
                if s.kind.needs_period() {
                    s.period = Some(PeriodSpec::Fixed(value));
                }
            }
        }
        cfg.strategy = s;
        cfg
    }
}
