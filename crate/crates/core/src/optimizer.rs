//! Fixed-step gradient descent over the control knots.

use std::io::Write;
use std::time::Instant;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{QocError, Result};
use crate::gradient::{ControlProblem, GradientOptions, Strategy};
use crate::model::{ControlGrid, TimeGrid};

/// Maximum number of step halvings per update when backtracking.
pub const MAX_HALVINGS: u32 = 20;

#[derive(Clone, Debug, PartialEq)]
pub struct GrapeConfig {
    pub step_size: f64,
    pub max_iters: usize,
    /// Stop once `F0` (or the total when `F0` is inactive) is at or below this.
    pub fidelity_threshold: f64,
    pub strategy: Strategy,
    pub seed: u64,
    /// Half-width of the uniform distribution for random initial knots.
    pub initial_amplitude: f64,
    /// Halve the step while it increases the total cost.
    pub backtrack: bool,
}

impl GrapeConfig {
    pub fn new(
        step_size: f64,
        max_iters: usize,
        fidelity_threshold: f64,
        strategy: Strategy,
        seed: u64,
    ) -> Result<Self> {
        let cfg = Self {
            step_size,
            max_iters,
            fidelity_threshold,
            strategy,
            seed,
            initial_amplitude: 0.0,
            backtrack: false,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_initial_amplitude(mut self, amplitude: f64) -> Self {
        self.initial_amplitude = amplitude;
        self
    }

    pub fn with_backtrack(mut self, backtrack: bool) -> Self {
        self.backtrack = backtrack;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !self.step_size.is_finite() || self.step_size < 0.0 {
            return Err(QocError::OutOfRange {
                what: "step_size",
                detail: format!("{} is not a finite non-negative number", self.step_size),
            });
        }
        if !self.fidelity_threshold.is_finite() || !(0.0..1.0).contains(&self.fidelity_threshold) {
            return Err(QocError::OutOfRange {
                what: "fidelity_threshold",
                detail: format!("{} is outside [0, 1)", self.fidelity_threshold),
            });
        }
        if !self.initial_amplitude.is_finite() || self.initial_amplitude < 0.0 {
            return Err(QocError::OutOfRange {
                what: "initial_amplitude",
                detail: format!("{} is not a finite non-negative number", self.initial_amplitude),
            });
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    /// Number of control updates applied before this evaluation.
    pub iteration: usize,
    pub total: f64,
    pub f0: Option<f64>,
    pub grad_inf_norm: f64,
    /// Seconds since the optimization started.
    pub wall_time_s: f64,
    pub step_size: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OptimizationTrace {
    pub records: Vec<TraceRecord>,
    pub converged: bool,
    /// Index into `records` of the returned controls.
    pub best: usize,
}

impl OptimizationTrace {
    pub fn iterations(&self) -> usize {
        self.records.last().map_or(0, |r| r.iteration)
    }

    pub fn best_record(&self) -> Option<&TraceRecord> {
        self.records.get(self.best)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = TraceWriter::new(out)?;
        for r in &self.records {
            w.write(r)?;
        }
        w.flush()
    }
}

/// Incremental trace CSV writer.
pub struct TraceWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> TraceWriter<W> {
    pub fn new(out: W) -> Result<Self> {
        let mut inner = csv::Writer::from_writer(out);
        inner.write_record(["iteration", "total", "F0", "grad_inf_norm", "wall_time_s", "step_size"])?;
        Ok(Self { inner })
    }

    pub fn write(&mut self, r: &TraceRecord) -> Result<()> {
        self.inner.write_record([
            r.iteration.to_string(),
            format!("{:e}", r.total),
            r.f0.map(|v| format!("{v:e}")).unwrap_or_default(),
            format!("{:e}", r.grad_inf_norm),
            format!("{:.6}", r.wall_time_s),
            format!("{:e}", r.step_size),
        ])?;
        self.inner.flush()?;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<()> {
        self.inner.flush()?;
        Ok(())
    }
}

/// Uniform random knots in `[−amplitude, amplitude]`, reproducible per seed.
pub fn initial_controls(n_controls: usize, grid: &TimeGrid, amplitude: f64, seed: u64) -> Result<ControlGrid> {
    if !amplitude.is_finite() || amplitude < 0.0 {
        return Err(QocError::OutOfRange {
            what: "amplitude",
            detail: format!("{amplitude} is not a finite non-negative number"),
        });
    }
    if amplitude == 0.0 {
        return Ok(ControlGrid::zeros(n_controls, grid));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = Array2::from_shape_simple_fn((n_controls, grid.n_knots()), || {
        rng.random_range(-amplitude..=amplitude)
    });
    ControlGrid::new(values, grid)
}

#[derive(Clone, Debug)]
pub struct GrapeOutcome {
    pub controls: ControlGrid,
    pub trace: OptimizationTrace,
}

/// Runs descent from random initial controls drawn with `config.seed`.
pub fn grape(problem: &ControlProblem, config: &GrapeConfig) -> Result<GrapeOutcome> {
    let init = initial_controls(
        problem.n_controls(),
        &problem.grid,
        config.initial_amplitude,
        config.seed,
    )?;
    grape_from(problem, config, init, |_| Ok(()))
}

/// Runs descent from `init`, calling `on_record` after every evaluation.
pub fn grape_from<F>(
    problem: &ControlProblem,
    config: &GrapeConfig,
    init: ControlGrid,
    mut on_record: F,
) -> Result<GrapeOutcome>
where
    F: FnMut(&TraceRecord) -> Result<()>,
{
    config.validate()?;
    config.strategy.validate(problem.grid.n_steps())?;
    let options = GradientOptions::quiet();
    let start = Instant::now();
    let mut trace = OptimizationTrace::default();
    let mut u = init;
    let mut best: Option<(f64, ControlGrid)> = None;
    let mut eps = config.step_size;
    let mut iteration = 0;
    loop {
        let res = problem.gradient_with(&u, &config.strategy, &options)?;
        let total = res.cost.total;
        if !total.is_finite() {
            return Err(QocError::Numerical(format!("non-finite cost at iteration {iteration}")));
        }
        let record = TraceRecord {
            iteration,
            total,
            f0: res.cost.f0(),
            grad_inf_norm: res.grad.iter().fold(0.0_f64, |m, g| m.max(g.abs())),
            wall_time_s: start.elapsed().as_secs_f64(),
            step_size: eps,
        };
        on_record(&record)?;
        trace.records.push(record);
        if best.as_ref().is_none_or(|(b, _)| total < *b) {
            best = Some((total, u.clone()));
            trace.best = trace.records.len() - 1;
        }
        if res.cost.f0().unwrap_or(total) <= config.fidelity_threshold {
            trace.converged = true;
            break;
        }
        if iteration == config.max_iters {
            break;
        }
        let mut next = u.with_values(u.values() - &(&res.grad * eps))?;
        if config.backtrack {
            let mut halvings = 0;
            while problem.evaluate(&next)?.1.total > total && halvings < MAX_HALVINGS {
                eps *= 0.5;
                halvings += 1;
                next = u.with_values(u.values() - &(&res.grad * eps))?;
            }
        }
        u = next;
        iteration += 1;
    }
    let (_, controls) = best.expect("at least one evaluation");
    Ok(GrapeOutcome { controls, trace })
}
