//! Cost terms, their weighted sum and their adjoint seeds.
//!
//! Terms, with `τ_j = Tr(K_T† K_j)`, `D` the dimension, `N` the step count and
//! overlaps averaged over the `s` state columns:
//!
//! | term | value |
//! |------|-------|
//! | F0 | `1 − |τ_N/D|²` |
//! | F1 | `1 − (1/N) Σ_{j=1..N} |τ_j/D|²` |
//! | F2 | `1 − (1/N) Σ_j mean_c |⟨ψ_T,c|ψ_j,c⟩|²` |
//! | G3 | `1 − mean_c |⟨ψ_T,c|ψ_N,c⟩|²` |
//! | G4 | `Σ_{k,j} u_{k,j}²` |
//! | G5 | `Σ_k Σ_{j=1..N} (u_{k,j} − u_{k,j−1})²` |
//! | G6 | `Σ_{j=1..N} mean_c |⟨ψ_F,c|ψ_j,c⟩|²` |
//!
//! Per-step terms are accumulated as the sweep visits each step, and their
//! seeds are emitted step by step, so no strategy needs the whole trajectory.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{QocError, Result};
use crate::evolution::EvolutionState;
use crate::linalg::{frob_inner_array, tau_unit, ComplexMatrix, StateBlock, C64};

pub const N_TERMS: usize = 7;
pub const TERM_NAMES: [&str; N_TERMS] = ["F0", "F1", "F2", "G3", "G4", "G5", "G6"];

/// Weights and targets of the objective.
#[derive(Clone, Debug)]
pub struct CostSpec {
    weights: [f64; N_TERMS],
    target_gate: Option<ComplexMatrix>,
    target_states: Option<StateBlock>,
    forbidden_states: Option<StateBlock>,
}

impl CostSpec {
    pub fn new(
        weights: [f64; N_TERMS],
        target_gate: Option<ComplexMatrix>,
        target_states: Option<StateBlock>,
        forbidden_states: Option<StateBlock>,
    ) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(QocError::Invalid(format!(
                "cost weights must be finite and non-negative: {weights:?}"
            )));
        }
        if let Some(kt) = &target_gate {
            if !kt.is_unitary(tau_unit(kt.dim())) {
                return Err(QocError::Invalid(format!(
                    "target gate is not unitary (error {:.3e})",
                    kt.unitarity_error()
                )));
            }
        }
        let need = |w: f64, present: bool, what: &str| -> Result<()> {
            if w > 0.0 && !present {
                return Err(QocError::Invalid(format!("positive weight needs {what}")));
            }
            Ok(())
        };
        need(weights[0] + weights[1], target_gate.is_some(), "a target gate")?;
        need(weights[2] + weights[3], target_states.is_some(), "target states")?;
        need(weights[6], forbidden_states.is_some(), "forbidden states")?;
        Ok(Self {
            weights,
            target_gate,
            target_states,
            forbidden_states,
        })
    }

    /// Gate-infidelity-only objective (`w_0 = 1`).
    pub fn gate(target: ComplexMatrix) -> Result<Self> {
        Self::new([1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0], Some(target), None, None)
    }

    pub fn weights(&self) -> &[f64; N_TERMS] {
        &self.weights
    }

    pub fn target_gate(&self) -> Option<&ComplexMatrix> {
        self.target_gate.as_ref()
    }

    pub fn target_states(&self) -> Option<&StateBlock> {
        self.target_states.as_ref()
    }

    pub fn forbidden_states(&self) -> Option<&StateBlock> {
        self.forbidden_states.as_ref()
    }

    pub fn with_weights(&self, weights: [f64; N_TERMS]) -> Result<Self> {
        Self::new(
            weights,
            self.target_gate.clone(),
            self.target_states.clone(),
            self.forbidden_states.clone(),
        )
    }

    /// Checks that targets are compatible with a model of dimension `dim`
    /// evolving `count` states.
    pub fn check_dims(&self, dim: usize, count: usize) -> Result<()> {
        if let Some(kt) = &self.target_gate {
            if kt.dim() != dim {
                return Err(QocError::dims(
                    "CostSpec",
                    format!("target gate dim {} vs model dim {dim}", kt.dim()),
                ));
            }
        }
        if let Some(t) = &self.target_states {
            if t.dim() != dim || t.count() != count {
                return Err(QocError::dims(
                    "CostSpec",
                    format!("target states {}x{} vs evolved {dim}x{count}", t.dim(), t.count()),
                ));
            }
        }
        if let Some(f) = &self.forbidden_states {
            if f.dim() != dim || (f.count() != count && f.count() != 1) {
                return Err(QocError::dims(
                    "CostSpec",
                    format!("forbidden states {}x{} vs evolved {dim}x{count}", f.dim(), f.count()),
                ));
            }
        }
        Ok(())
    }

    fn active(&self, term: usize) -> bool {
        self.weights[term] > 0.0
    }

    /// True when any term depends on the trajectory (everything but G4, G5).
    pub fn touches_evolution(&self) -> bool {
        [0, 1, 2, 3, 6].iter().any(|&t| self.active(t))
    }
}

/// Per-term values and the weighted total. Terms whose inputs are missing are
/// `None`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub terms: [Option<f64>; N_TERMS],
    pub total: f64,
}

impl CostReport {
    pub fn f0(&self) -> Option<f64> {
        self.terms[0]
    }

    pub fn term(&self, i: usize) -> Option<f64> {
        self.terms[i]
    }
}

// ---- individual terms ------------------------------------------------------

fn gate_overlap(k: &ComplexMatrix, kt: &ComplexMatrix) -> C64 {
    frob_inner_array(kt.as_array().view(), k.as_array().view())
}

fn gate_fidelity(k: &ComplexMatrix, kt: &ComplexMatrix) -> f64 {
    let d = k.dim() as f64;
    (gate_overlap(k, kt) / d).norm_sqr()
}

fn check_gate(op: &'static str, k: &ComplexMatrix, kt: &ComplexMatrix) -> Result<()> {
    if k.dim() != kt.dim() {
        return Err(QocError::dims(op, format!("{} vs {}", k.dim(), kt.dim())));
    }
    Ok(())
}

/// Mean over columns of `|⟨target_c|psi_c⟩|²`.
fn mean_overlap_sq(target: &StateBlock, psi: &StateBlock) -> Result<f64> {
    let ov = target.column_overlaps(psi)?;
    Ok(ov.iter().map(|z| z.norm_sqr()).sum::<f64>() / ov.len() as f64)
}

/// `1 − |Tr(K_T† K_N)/D|²`
pub fn f0_gate_infidelity(k_final: &ComplexMatrix, target: &ComplexMatrix) -> Result<f64> {
    check_gate("f0_gate_infidelity", k_final, target)?;
    Ok(1.0 - gate_fidelity(k_final, target))
}

/// `1 − (1/n) Σ_j |Tr(K_T† K_j)/D|²` over the given propagators.
pub fn f1_running_gate_infidelity(ks: &[ComplexMatrix], target: &ComplexMatrix) -> Result<f64> {
    if ks.is_empty() {
        return Err(QocError::Invalid(
            "running gate infidelity of an empty trajectory".into(),
        ));
    }
    let mut acc = 0.0;
    for k in ks {
        check_gate("f1_running_gate_infidelity", k, target)?;
        acc += gate_fidelity(k, target);
    }
    Ok(1.0 - acc / ks.len() as f64)
}

/// `1 − (1/n) Σ_j mean_c |⟨ψ_T,c|ψ_j,c⟩|²`
pub fn f2_running_state_infidelity(psis: &[StateBlock], target: &StateBlock) -> Result<f64> {
    if psis.is_empty() {
        return Err(QocError::Invalid(
            "running state infidelity of an empty trajectory".into(),
        ));
    }
    let mut acc = 0.0;
    for p in psis {
        acc += mean_overlap_sq(target, p)?;
    }
    Ok(1.0 - acc / psis.len() as f64)
}

/// `1 − mean_c |⟨ψ_T,c|ψ_N,c⟩|²`
pub fn g3_final_state_infidelity(psi_final: &StateBlock, target: &StateBlock) -> Result<f64> {
    Ok(1.0 - mean_overlap_sq(target, psi_final)?)
}

/// `Σ u²`
pub fn g4_control_energy(controls: &Array2<f64>) -> f64 {
    controls.iter().map(|u| u * u).sum()
}

/// Sum of squared first differences along time, per channel.
pub fn g5_control_smoothness(controls: &Array2<f64>) -> f64 {
    controls
        .rows()
        .into_iter()
        .map(|r| r.windows(2).into_iter().map(|w| (w[1] - w[0]).powi(2)).sum::<f64>())
        .sum()
}

/// `Σ_j mean_c |⟨ψ_F,c|ψ_j,c⟩|²`
pub fn g6_forbidden_occupation(psis: &[StateBlock], forbidden: &StateBlock) -> Result<f64> {
    psis.iter().map(|p| mean_overlap_sq(forbidden, p)).sum()
}

// ---- step-wise accumulation --------------------------------------------------

/// Running sums of the per-step terms, fed one step at a time.
#[derive(Clone, Debug, Default)]
pub struct TrajectorySummary {
    steps: usize,
    gate_fidelity_sum: f64,
    state_fidelity_sum: f64,
    forbidden_sum: f64,
}

impl TrajectorySummary {
    pub fn observe(&mut self, spec: &CostSpec, state: &EvolutionState) -> Result<()> {
        self.steps += 1;
        if let Some(kt) = &spec.target_gate {
            self.gate_fidelity_sum += gate_fidelity(&state.k, kt);
        }
        if let Some(t) = &spec.target_states {
            self.state_fidelity_sum += mean_overlap_sq(t, &state.states)?;
        }
        if let Some(f) = &spec.forbidden_states {
            self.forbidden_sum += mean_overlap_sq(f, &state.states)?;
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        self.steps
    }
}

/// Evaluates every term from the final state, the step-wise summary and the
/// controls.
pub fn total_cost(
    spec: &CostSpec,
    summary: &TrajectorySummary,
    final_state: &EvolutionState,
    controls: &Array2<f64>,
) -> Result<CostReport> {
    let n = summary.steps;
    let running = |sum: f64| if n == 0 { None } else { Some(1.0 - sum / n as f64) };
    let mut terms = [None; N_TERMS];
    if let Some(kt) = &spec.target_gate {
        terms[0] = Some(f0_gate_infidelity(&final_state.k, kt)?);
        terms[1] = running(summary.gate_fidelity_sum);
    }
    if let Some(t) = &spec.target_states {
        terms[2] = running(summary.state_fidelity_sum);
        terms[3] = Some(g3_final_state_infidelity(&final_state.states, t)?);
    }
    terms[4] = Some(g4_control_energy(controls));
    terms[5] = Some(g5_control_smoothness(controls));
    if spec.forbidden_states.is_some() {
        terms[6] = Some(summary.forbidden_sum);
    }
    let mut total = 0.0;
    for (i, t) in terms.iter().enumerate() {
        if spec.weights[i] > 0.0 {
            match t {
                Some(v) => total += spec.weights[i] * v,
                None => {
                    return Err(QocError::Invalid(format!(
                        "term {} is weighted but undefined for a {n}-step trajectory",
                        TERM_NAMES[i]
                    )))
                }
            }
        }
    }
    Ok(CostReport { terms, total })
}

// ---- adjoint seeds --------------------------------------------------------------

/// Cotangents `(K̄, ψ̄)` contributed by cost terms at one step; `None` means zero.
#[derive(Clone, Debug, Default)]
pub struct StepSeed {
    pub k: Option<ComplexMatrix>,
    pub states: Option<StateBlock>,
}

fn add_gate_seed(acc: &mut Option<ComplexMatrix>, k: &ComplexMatrix, kt: &ComplexMatrix, factor: f64) {
    // ∂|τ|²: K̄ = 2τ K_T
    let tau = gate_overlap(k, kt);
    let mut g = kt.as_array() * (tau * (2.0 * factor));
    if let Some(prev) = acc.take() {
        g += prev.as_array();
    }
    *acc = Some(ComplexMatrix::from_array_unchecked(g));
}

fn add_state_seed(acc: &mut Option<StateBlock>, psi: &StateBlock, target: &StateBlock, factor: f64) -> Result<()> {
    let ov = target.column_overlaps(psi)?;
    let mut g = match acc.take() {
        Some(p) => p.into_array(),
        None => Array2::zeros((psi.dim(), psi.count())),
    };
    let ta = target.as_array();
    for (c, o) in ov.iter().enumerate() {
        let tc = if target.count() == 1 { 0 } else { c };
        let coef = o * (2.0 * factor);
        for r in 0..psi.dim() {
            g[[r, c]] += coef * ta[[r, tc]];
        }
    }
    *acc = Some(StateBlock::from_array_unchecked(g));
    Ok(())
}

impl CostSpec {
    /// Seeds of the per-step terms (F1, F2, G6) at step `j ∈ 1..=N`.
    pub fn step_seed(&self, n_steps: usize, state: &EvolutionState) -> Result<StepSeed> {
        let mut seed = StepSeed::default();
        if n_steps == 0 {
            return Ok(seed);
        }
        let n = n_steps as f64;
        let d2 = (state.k.dim() * state.k.dim()) as f64;
        let s = state.states.count() as f64;
        if let (true, Some(kt)) = (self.active(1), &self.target_gate) {
            add_gate_seed(&mut seed.k, &state.k, kt, -self.weights[1] / (n * d2));
        }
        if let (true, Some(t)) = (self.active(2), &self.target_states) {
            add_state_seed(&mut seed.states, &state.states, t, -self.weights[2] / (n * s))?;
        }
        if let (true, Some(f)) = (self.active(6), &self.forbidden_states) {
            add_state_seed(&mut seed.states, &state.states, f, self.weights[6] / s)?;
        }
        Ok(seed)
    }

    /// Seeds of the terms evaluated on the final state (F0, G3).
    pub fn final_seed(&self, state: &EvolutionState) -> Result<StepSeed> {
        let mut seed = StepSeed::default();
        let d2 = (state.k.dim() * state.k.dim()) as f64;
        let s = state.states.count() as f64;
        if let (true, Some(kt)) = (self.active(0), &self.target_gate) {
            add_gate_seed(&mut seed.k, &state.k, kt, -self.weights[0] / d2);
        }
        if let (true, Some(t)) = (self.active(3), &self.target_states) {
            add_state_seed(&mut seed.states, &state.states, t, -self.weights[3] / s)?;
        }
        Ok(seed)
    }

    /// Direct gradient of the control penalties (G4, G5).
    pub fn control_seed(&self, controls: &Array2<f64>) -> Array2<f64> {
        let mut g = Array2::zeros(controls.dim());
        if self.active(4) {
            g.scaled_add(2.0 * self.weights[4], controls);
        }
        if self.active(5) {
            let w = self.weights[5];
            for (mut gr, ur) in g.rows_mut().into_iter().zip(controls.rows()) {
                for j in 1..ur.len() {
                    let d = 2.0 * w * (ur[j] - ur[j - 1]);
                    gr[j] += d;
                    gr[j - 1] -= d;
                }
            }
        }
        g
    }
}

/// All adjoint seeds for a fully materialized trajectory, `states[j-1]` being
/// the state at step `j`. Mostly useful for checking the step-wise seeds.
#[derive(Clone, Debug)]
pub struct CostSeeds {
    pub final_seed: StepSeed,
    pub step_seeds: Vec<StepSeed>,
    pub controls: Array2<f64>,
}

pub fn cost_vjp_seeds(spec: &CostSpec, trajectory: &[EvolutionState], controls: &Array2<f64>) -> Result<CostSeeds> {
    let n = trajectory.len();
    let step_seeds = trajectory
        .iter()
        .map(|s| spec.step_seed(n, s))
        .collect::<Result<Vec<_>>>()?;
    let final_seed = match trajectory.last() {
        Some(s) => spec.final_seed(s)?,
        None => StepSeed::default(),
    };
    Ok(CostSeeds {
        final_seed,
        step_seeds,
        controls: spec.control_seed(controls),
    })
}
