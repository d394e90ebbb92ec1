//! Command implementations and their CSV/JSON outputs.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use ndarray::Array2;
use rayon::prelude::*;
use serde::Serialize;

use super::{RunConfig, Setup, SweepSpec};
use crate::cost::CostReport;
use crate::error::{QocError, Result};
use crate::evolution::EvolutionState;
use crate::gradient::{ControlProblem, GradientOptions, GradientResult, Strategy};
use crate::linalg::ComplexMatrix;
use crate::memtrace::{expected_peak, ObjectRow};
use crate::model::ControlGrid;
use crate::optimizer::{grape_from, GrapeOutcome, TraceWriter};

/// Denominator floor for relative gradient errors, as a fraction of the
/// largest finite-difference component.
pub const REL_FLOOR: f64 = 1e-3;

/// `|a − f| / max(|f|, REL_FLOOR·scale)`
pub fn relative_error(analytic: f64, fd: f64, scale: f64) -> f64 {
    let denom = fd.abs().max(REL_FLOOR * scale);
    if denom == 0.0 {
        (analytic - fd).abs()
    } else {
        (analytic - fd).abs() / denom
    }
}

/// Fourth-order central differences of the total cost, one knot at a time.
pub fn finite_difference_gradient(problem: &ControlProblem, controls: &ControlGrid, h: f64) -> Result<Array2<f64>> {
    if !(h.is_finite() && h > 0.0) {
        return Err(QocError::OutOfRange {
            what: "h",
            detail: format!("{h} is not a positive finite step"),
        });
    }
    let (m, k) = controls.values().dim();
    let cost_at = |i: usize, j: usize, delta: f64| -> Result<f64> {
        let mut v = controls.values().clone();
        v[[i, j]] += delta;
        Ok(problem.evaluate(&controls.with_values(v)?)?.1.total)
    };
    let entries: Vec<f64> = (0..m * k)
        .into_par_iter()
        .map(|idx| {
            let (i, j) = (idx / k, idx % k);
            let f = |d| cost_at(i, j, d);
            Ok((-f(2.0 * h)? + 8.0 * f(h)? - 8.0 * f(-h)? + f(-2.0 * h)?) / (12.0 * h))
        })
        .collect::<Result<_>>()?;
    Ok(Array2::from_shape_vec((m, k), entries).expect("m*k entries"))
}

fn inf_norm(a: &Array2<f64>) -> f64 {
    a.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

/// `‖a − b‖_∞ / ‖b‖_∞` (absolute when `b` is zero).
pub fn relative_inf_distance(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    let diff = inf_norm(&(a - b));
    let scale = inf_norm(b);
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    fs::create_dir_all(dir)?;
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

/// One row of `results.csv`.
#[derive(Clone, Debug, Serialize)]
pub struct ResultRow {
    pub command: &'static str,
    pub qubits: u32,
    pub n_steps: usize,
    pub dt: f64,
    pub strategy: String,
    pub total: f64,
    #[serde(rename = "F0")]
    pub f0: Option<f64>,
    #[serde(rename = "F1")]
    pub f1: Option<f64>,
    #[serde(rename = "F2")]
    pub f2: Option<f64>,
    #[serde(rename = "G3")]
    pub g3: Option<f64>,
    #[serde(rename = "G4")]
    pub g4: Option<f64>,
    #[serde(rename = "G5")]
    pub g5: Option<f64>,
    #[serde(rename = "G6")]
    pub g6: Option<f64>,
    pub unitarity_error: f64,
    pub iterations: Option<usize>,
    pub converged: Option<bool>,
}

impl ResultRow {
    fn new(command: &'static str, setup: &Setup, strategy: &Strategy, cost: &CostReport, k: &ComplexMatrix) -> Self {
        let t = cost.terms;
        Self {
            command,
            qubits: setup.qubits,
            n_steps: setup.problem.grid.n_steps(),
            dt: setup.problem.grid.dt(),
            strategy: strategy.to_string(),
            total: cost.total,
            f0: t[0],
            f1: t[1],
            f2: t[2],
            g3: t[3],
            g4: t[4],
            g5: t[5],
            g6: t[6],
            unitarity_error: k.unitarity_error(),
            iterations: None,
            converged: None,
        }
    }
}

fn write_rows<T: Serialize>(dir: &Path, name: &str, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(dir, name)?);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Debug, Serialize)]
pub struct ComplexJson {
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl ComplexJson {
    fn from_rows(rows: usize, cols: usize, get: impl Fn(usize, usize) -> crate::linalg::C64) -> Self {
        Self {
            re: (0..rows).map(|i| (0..cols).map(|j| get(i, j).re).collect()).collect(),
            im: (0..rows).map(|i| (0..cols).map(|j| get(i, j).im).collect()).collect(),
        }
    }
}

/// Final propagator and states of a forward run.
#[derive(Clone, Debug, Serialize)]
pub struct FinalStateJson {
    pub k: ComplexJson,
    /// Row `i`, column `c` is `ψ_c[i]`.
    pub states: ComplexJson,
    /// `|ψ_c[i]|²` per column `c`.
    pub populations: Vec<Vec<f64>>,
}

impl FinalStateJson {
    pub fn new(state: &EvolutionState) -> Self {
        let d = state.k.dim();
        let s = state.states.count();
        Self {
            k: ComplexJson::from_rows(d, d, |i, j| state.k.get(i, j)),
            states: ComplexJson::from_rows(d, s, |i, j| state.states.get(i, j)),
            populations: (0..s)
                .map(|c| (0..d).map(|i| state.states.get(i, c).norm_sqr()).collect())
                .collect(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SimulateReport {
    pub final_state: EvolutionState,
    pub cost: CostReport,
    pub row: ResultRow,
}

/// Forward run at the configured controls; writes `results.csv` and
/// `final_state.json` when `out` is given.
pub fn simulate(setup: &Setup, out: Option<&Path>) -> Result<SimulateReport> {
    let (fin, cost) = setup.problem.evaluate(&setup.controls)?;
    let row = ResultRow::new("simulate", setup, &setup.strategy, &cost, &fin.k);
    if let Some(dir) = out {
        write_rows(dir, "results.csv", std::slice::from_ref(&row))?;
        let mut f = create(dir, "final_state.json")?;
        serde_json::to_writer_pretty(&mut f, &FinalStateJson::new(&fin))?;
        writeln!(f)?;
    }
    Ok(SimulateReport {
        final_state: fin,
        cost,
        row,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct GradcheckEntry {
    pub strategy: String,
    pub control: usize,
    pub knot: usize,
    pub analytic: f64,
    pub finite_difference: f64,
    pub rel_error: f64,
    pub pass: bool,
}

#[derive(Clone, Debug)]
pub struct GradcheckReport {
    pub entries: Vec<GradcheckEntry>,
    pub strategies: Vec<Strategy>,
    /// Largest relative error per strategy.
    pub max_rel_error: Vec<f64>,
    /// `comparison[a][b] = ‖g_a − g_b‖_∞ / ‖g_b‖_∞`.
    pub comparison: Vec<Vec<f64>>,
    pub passed: bool,
}

/// Compares each strategy's gradient with finite differences of step `h`.
pub fn gradcheck(
    setup: &Setup,
    strategies: &[Strategy],
    h: f64,
    tolerance: f64,
    out: Option<&Path>,
) -> Result<GradcheckReport> {
    if !(tolerance.is_finite() && tolerance >= 0.0) {
        return Err(QocError::OutOfRange {
            what: "tolerance",
            detail: format!("{tolerance} is not a finite non-negative number"),
        });
    }
    let p = &setup.problem;
    let fd = finite_difference_gradient(p, &setup.controls, h)?;
    let scale = inf_norm(&fd);
    let mut entries = Vec::new();
    let mut max_rel_error = Vec::new();
    let mut grads = Vec::new();
    for s in strategies {
        let res = p.gradient(&setup.controls, s)?;
        let mut worst = 0.0_f64;
        for ((i, j), &a) in res.grad.indexed_iter() {
            let f = fd[[i, j]];
            let rel = relative_error(a, f, scale);
            worst = worst.max(rel);
            entries.push(GradcheckEntry {
                strategy: s.to_string(),
                control: i,
                knot: j,
                analytic: a,
                finite_difference: f,
                rel_error: rel,
                pass: rel <= tolerance,
            });
        }
        if let Some(dir) = out {
            let pred = expected_peak(s, p.grid.n_steps(), setup.qubits, p.n_controls(), p.psi0.count());
            let name = format!("ledger_{}.csv", s.kind().name());
            res.ledger
                .write_csv(create(dir, &name)?, p.model.dim(), p.psi0.count(), &pred)?;
        }
        max_rel_error.push(worst);
        grads.push(res.grad);
    }
    let comparison = grads
        .iter()
        .map(|a| grads.iter().map(|b| relative_inf_distance(a, b)).collect())
        .collect();
    let passed = entries.iter().all(|e| e.pass);
    if let Some(dir) = out {
        write_rows(dir, "gradcheck.csv", &entries)?;
    }
    Ok(GradcheckReport {
        entries,
        strategies: strategies.to_vec(),
        max_rel_error,
        comparison,
        passed,
    })
}

/// Runs descent, streaming `trace.csv` and writing `controls.json` and
/// `results.csv` when `out` is given.
pub fn optimize(setup: &Setup, out: Option<&Path>) -> Result<GrapeOutcome> {
    let mut trace = match out {
        Some(dir) => Some(TraceWriter::new(create(dir, "trace.csv")?)?),
        None => None,
    };
    let outcome = grape_from(&setup.problem, &setup.grape, setup.controls.clone(), |r| {
        match trace.as_mut() {
            Some(w) => w.write(r),
            None => Ok(()),
        }
    })?;
    if let Some(dir) = out {
        super::ControlsFile::from_grid(&outcome.controls).save(&dir.join("controls.json"))?;
        let (fin, cost) = setup.problem.evaluate(&outcome.controls)?;
        let mut row = ResultRow::new("optimize", setup, &setup.strategy, &cost, &fin.k);
        row.iterations = Some(outcome.trace.iterations());
        row.converged = Some(outcome.trace.converged);
        write_rows(dir, "results.csv", &[row])?;
    }
    Ok(outcome)
}

/// One `bench` CSV row: measured and predicted additional storage for one
/// sweep point and strategy.
#[derive(Clone, Debug, Serialize)]
pub struct BenchRow {
    pub axis: &'static str,
    pub value: usize,
    pub strategy: String,
    pub period: Option<usize>,
    pub qubits: u32,
    pub n_steps: usize,
    pub wall_time_s: f64,
    pub peak_u: usize,
    pub peak_k: usize,
    pub peak_psi: usize,
    pub peak_objects: usize,
    pub peak_bytes: usize,
    pub predicted_u: f64,
    pub predicted_k: f64,
    pub predicted_psi: f64,
    pub predicted_bytes: f64,
    pub reconstruction_error: Option<f64>,
}

/// Median of a non-empty sample.
pub fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Gradient at the configured controls, timed `repetitions` times without
/// diagnostics. Returns the median wall time and the last result.
pub fn timed_gradient(setup: &Setup, strategy: &Strategy, repetitions: usize) -> Result<(f64, GradientResult)> {
    let options = GradientOptions::quiet();
    let mut times = Vec::with_capacity(repetitions);
    let mut last = None;
    for _ in 0..repetitions.max(1) {
        let t = Instant::now();
        let res = setup.problem.gradient_with(&setup.controls, strategy, &options)?;
        times.push(t.elapsed().as_secs_f64());
        last = Some(res);
    }
    Ok((median(times), last.expect("at least one repetition")))
}

fn bench_point(spec: &SweepSpec, value: usize, cfg: &RunConfig) -> Result<BenchRow> {
    let setup = cfg.setup()?;
    let strategy = setup.strategy;
    let (wall, res) = timed_gradient(&setup, &strategy, spec.repetitions)?;
    let p = &setup.problem;
    let n = p.grid.n_steps();
    let pred = expected_peak(&strategy, n, setup.qubits, p.n_controls(), p.psi0.count());
    let l = &res.ledger;
    Ok(BenchRow {
        axis: spec.axis.name(),
        value,
        strategy: strategy.kind().name().to_string(),
        period: strategy.period(),
        qubits: setup.qubits,
        n_steps: n,
        wall_time_s: wall,
        peak_u: l.row_peak(ObjectRow::U),
        peak_k: l.row_peak(ObjectRow::K),
        peak_psi: l.row_peak(ObjectRow::Psi),
        peak_objects: l.peak_objects(),
        peak_bytes: l.peak_bytes(),
        predicted_u: pred.u,
        predicted_k: pred.k,
        predicted_psi: pred.psi,
        predicted_bytes: pred.bytes,
        reconstruction_error: res.reconstruction_error,
    })
}

/// Runs every (value, strategy) point of the sweep on `workers` threads.
/// Rows come back in sweep order.
pub fn bench(spec: &SweepSpec, workers: usize) -> Result<Vec<BenchRow>> {
    spec.validate()?;
    let points: Vec<(usize, RunConfig)> = spec
        .values
        .iter()
        .flat_map(|&v| spec.strategies.iter().map(move |s| (v, spec.point(v, s))))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| QocError::Invalid(format!("worker pool: {e}")))?;
    pool.install(|| points.par_iter().map(|(v, cfg)| bench_point(spec, *v, cfg)).collect())
}

type Column = fn(&BenchRow) -> f64;

/// Writes `results.csv` plus two-column plot data per strategy:
/// `peak_bytes_<s>.dat`, `predicted_bytes_<s>.dat`, `wall_time_<s>.dat`.
pub fn write_bench(dir: &Path, rows: &[BenchRow]) -> Result<()> {
    write_rows(dir, "results.csv", rows)?;
    let mut names: Vec<&str> = Vec::new();
    for r in rows {
        if !names.contains(&r.strategy.as_str()) {
            names.push(&r.strategy);
        }
    }
    for name in names {
        let mine: Vec<&BenchRow> = rows.iter().filter(|r| r.strategy == name).collect();
        let axis = mine[0].axis;
        let curves: [(&str, Column); 3] = [
            ("peak_bytes", |r| r.peak_bytes as f64),
            ("predicted_bytes", |r| r.predicted_bytes),
            ("wall_time", |r| r.wall_time_s),
        ];
        for (curve, get) in curves {
            let mut f = create(dir, &format!("{curve}_{name}.dat"))?;
            writeln!(f, "# {axis} {curve}")?;
            for r in &mine {
                writeln!(f, "{} {:e}", r.value, get(r))?;
            }
            f.flush()?;
        }
    }
    Ok(())
}

/// Least-squares slope of `ln y` against `ln x`. A constant series has slope
/// 0; any non-positive `y` yields `None` unless the whole series is zero.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    if ys.iter().all(|&y| y == ys[0]) {
        return Some(0.0);
    }
    if xs.iter().chain(ys).any(|&v| v <= 0.0) {
        return None;
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    Some(sxy / sxx)
}
