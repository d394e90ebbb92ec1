//! Controllable Hamiltonian, uniform time grid and piecewise-linear controls.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{QocError, Result};
use crate::linalg::{expm, ComplexMatrix, C64, TAU_HERM};

/// Offset of the control evaluation point inside a step, as a fraction of `dt`
/// (first-order Magnus midpoint).
pub const MIDPOINT: f64 = 0.5;

/// `ℍ(u) = H_0 + Σ_k u_k H_k` with Hermitian drift and control operators.
#[derive(Clone, Debug)]
pub struct HamiltonianModel {
    h0: ComplexMatrix,
    controls: Vec<ComplexMatrix>,
}

impl HamiltonianModel {
    pub fn new(h0: ComplexMatrix, controls: Vec<ComplexMatrix>) -> Result<Self> {
        let d = h0.dim();
        if !h0.is_hermitian(TAU_HERM) {
            return Err(QocError::Invalid(format!(
                "drift Hamiltonian is not Hermitian (error {:.3e})",
                h0.hermiticity_error()
            )));
        }
        for (k, hk) in controls.iter().enumerate() {
            if hk.dim() != d {
                return Err(QocError::dims(
                    "HamiltonianModel",
                    format!("control operator {k} has dim {} but drift has {d}", hk.dim()),
                ));
            }
            if !hk.is_hermitian(TAU_HERM) {
                return Err(QocError::Invalid(format!(
                    "control operator {k} is not Hermitian (error {:.3e})",
                    hk.hermiticity_error()
                )));
            }
        }
        Ok(Self { h0, controls })
    }

    pub fn dim(&self) -> usize {
        self.h0.dim()
    }

    /// Number of control channels `m`.
    pub fn n_controls(&self) -> usize {
        self.controls.len()
    }

    pub fn drift(&self) -> &ComplexMatrix {
        &self.h0
    }

    pub fn control_ops(&self) -> &[ComplexMatrix] {
        &self.controls
    }
}

/// Uniform grid `t_j = j·dt`, `j = 0..=N`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    n_steps: usize,
    dt: f64,
    knot_times: Vec<f64>,
}

impl TimeGrid {
    /// A grid with zero steps is accepted and describes the identity evolution.
    pub fn new(n_steps: usize, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(QocError::Invalid(format!(
                "time step must be positive and finite, got {dt}"
            )));
        }
        let knot_times = (0..=n_steps).map(|j| j as f64 * dt).collect();
        Ok(Self {
            n_steps,
            dt,
            knot_times,
        })
    }

    /// Builds a grid from explicit knot times; non-uniform spacing is rejected.
    pub fn from_knots(knots: &[f64]) -> Result<Self> {
        if knots.len() < 2 {
            return Err(QocError::Invalid("need at least two knot times".into()));
        }
        let dt = knots[1] - knots[0];
        let tol = 1e-9 * dt.abs().max(f64::MIN_POSITIVE);
        for w in knots.windows(2) {
            let h = w[1] - w[0];
            if h.is_nan() || h <= 0.0 {
                return Err(QocError::Invalid("knot times must be strictly increasing".into()));
            }
            if (h - dt).abs() > tol {
                return Err(QocError::Invalid("knot times must be uniformly spaced".into()));
            }
        }
        Ok(Self {
            n_steps: knots.len() - 1,
            dt,
            knot_times: knots.to_vec(),
        })
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn n_knots(&self) -> usize {
        self.n_steps + 1
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn knot_times(&self) -> &[f64] {
        &self.knot_times
    }

    pub fn duration(&self) -> f64 {
        self.knot_times[self.n_steps] - self.knot_times[0]
    }

    /// Control evaluation time of step `j`: `t_j + dt/2`.
    pub fn eval_time(&self, step: usize) -> f64 {
        self.knot_times[step] + self.dt * MIDPOINT
    }
}

/// `m × (N+1)` real control amplitudes at the knot times.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlGrid {
    values: Array2<f64>,
    knot_times: Vec<f64>,
}

impl ControlGrid {
    pub fn new(values: Array2<f64>, grid: &TimeGrid) -> Result<Self> {
        if values.ncols() != grid.n_knots() {
            return Err(QocError::dims(
                "ControlGrid",
                format!("{} knot columns for {} knot times", values.ncols(), grid.n_knots()),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(QocError::NonFinite("control values"));
        }
        Ok(Self {
            values,
            knot_times: grid.knot_times().to_vec(),
        })
    }

    pub fn zeros(n_controls: usize, grid: &TimeGrid) -> Self {
        Self {
            values: Array2::zeros((n_controls, grid.n_knots())),
            knot_times: grid.knot_times().to_vec(),
        }
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn n_controls(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_knots(&self) -> usize {
        self.values.ncols()
    }

    pub fn knot_times(&self) -> &[f64] {
        &self.knot_times
    }

    /// Replaces the amplitudes, keeping the knot times.
    pub fn with_values(&self, values: Array2<f64>) -> Result<Self> {
        if values.dim() != self.values.dim() {
            return Err(QocError::dims("ControlGrid::with_values", "shape changed"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(QocError::NonFinite("control values"));
        }
        Ok(Self {
            values,
            knot_times: self.knot_times.clone(),
        })
    }
}

/// Location of an evaluation time between two knots: `y = y[index-1] +
/// (y[index] − y[index-1])·weight`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bracket {
    pub index: usize,
    pub weight: f64,
}

/// Finds the first knot with `t ≤ x_i`, clamped to `index ≥ 1`.
pub fn bracket(t: f64, knots: &[f64]) -> Result<Bracket> {
    let n = knots.len();
    if n < 2 || !(t >= knots[0] && t <= knots[n - 1]) {
        return Err(QocError::OutOfRange {
            what: "interpolation time",
            detail: format!(
                "t = {t} outside [{}, {}]",
                knots.first().copied().unwrap_or(f64::NAN),
                knots.last().copied().unwrap_or(f64::NAN)
            ),
        });
    }
    let index = knots.iter().position(|&x| t <= x).unwrap_or(n - 1).max(1);
    let (x0, x1) = (knots[index - 1], knots[index]);
    Ok(Bracket {
        index,
        weight: (t - x0) / (x1 - x0),
    })
}

/// Piecewise-linear interpolation of every control channel at time `t`.
pub fn interpolate_controls(t: f64, controls: &ControlGrid) -> Result<Vec<f64>> {
    let b = bracket(t, &controls.knot_times)?;
    Ok(interpolate_at(&b, t, controls))
}

fn interpolate_at(b: &Bracket, t: f64, controls: &ControlGrid) -> Vec<f64> {
    let xs = &controls.knot_times;
    let (x0, x1) = (xs[b.index - 1], xs[b.index]);
    controls
        .values
        .rows()
        .into_iter()
        .map(|ys| {
            let (y0, y1) = (ys[b.index - 1], ys[b.index]);
            y0 + ((y1 - y0) / (x1 - x0)) * (t - x0)
        })
        .collect()
}

/// `H_0 + Σ_k u_k H_k`.
pub fn assemble_hamiltonian(model: &HamiltonianModel, u: &[f64]) -> Result<ComplexMatrix> {
    if u.len() != model.n_controls() {
        return Err(QocError::dims(
            "assemble_hamiltonian",
            format!("{} amplitudes for {} controls", u.len(), model.n_controls()),
        ));
    }
    let mut h = model.h0.as_array().clone();
    for (hk, &uk) in model.controls.iter().zip(u) {
        h.scaled_add(C64::from(uk), hk.as_array());
    }
    Ok(ComplexMatrix::from_array_unchecked(h))
}

/// Everything needed to rebuild or differentiate step `j`.
#[derive(Clone, Debug)]
pub struct StepGenerator {
    pub bracket: Bracket,
    /// Magnus exponent `A = −i·dt·ℍ_j`.
    pub magnus: ComplexMatrix,
}

pub fn step_generator(
    model: &HamiltonianModel,
    grid: &TimeGrid,
    controls: &ControlGrid,
    step: usize,
) -> Result<StepGenerator> {
    if step >= grid.n_steps() {
        return Err(QocError::OutOfRange {
            what: "step index",
            detail: format!("{step} >= {}", grid.n_steps()),
        });
    }
    if controls.n_knots() != grid.n_knots() || controls.n_controls() != model.n_controls() {
        return Err(QocError::dims(
            "step_generator",
            format!(
                "controls {}x{} for {} channels and {} knots",
                controls.n_controls(),
                controls.n_knots(),
                model.n_controls(),
                grid.n_knots()
            ),
        ));
    }
    let t = grid.eval_time(step);
    let b = bracket(t, &controls.knot_times)?;
    let u = interpolate_at(&b, t, controls);
    let h = assemble_hamiltonian(model, &u)?;
    Ok(StepGenerator {
        bracket: b,
        magnus: h.scale(C64::new(0.0, -grid.dt())),
    })
}

/// `U_j = exp(−i·dt·ℍ(u(t_j + dt/2)))`.
pub fn step_unitary(
    model: &HamiltonianModel,
    grid: &TimeGrid,
    controls: &ControlGrid,
    step: usize,
) -> Result<ComplexMatrix> {
    let g = step_generator(model, grid, controls, step)?;
    expm(&g.magnus)
}
