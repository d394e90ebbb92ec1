//! Forward propagation `K_{j+1} = U_j K_j`, `ψ_{j+1} = U_j ψ_j` with
//! strategy-controlled retention of intermediate objects.

use std::collections::BTreeMap;

use crate::error::{QocError, Result};
use crate::linalg::{ComplexMatrix, StateBlock};
use crate::memtrace::{MemoryLedger, ObjectKind};
use crate::model::{step_unitary, ControlGrid, HamiltonianModel, TimeGrid};

/// Propagator and states after `step` steps.
#[derive(Clone, Debug, PartialEq)]
pub struct EvolutionState {
    pub step: usize,
    pub k: ComplexMatrix,
    pub states: StateBlock,
}

impl EvolutionState {
    /// `K_0 = I` and the given initial states.
    pub fn initial(states: StateBlock) -> Self {
        Self {
            step: 0,
            k: ComplexMatrix::identity(states.dim()),
            states,
        }
    }

    /// Applies a step unitary, advancing the step counter.
    pub fn advance(&self, u: &ComplexMatrix) -> Self {
        Self {
            step: self.step + 1,
            k: ComplexMatrix::from_array_unchecked(u.as_array().dot(self.k.as_array())),
            states: StateBlock::from_array_unchecked(u.as_array().dot(self.states.as_array())),
        }
    }
}

/// Which objects the forward sweep keeps.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RecordMode {
    None,
    /// `K` and `ψ` at steps `C, 2C, …` (up to and including `N`).
    Checkpoints {
        period: usize,
    },
    /// `U_j` for every step and `K_j`, `ψ_j` for `j = 1..=N`.
    All,
}

/// Objects retained by a forward sweep, keyed by step index. `stored_u[j]` is
/// the unitary of step `j` (mapping index `j` to `j+1`); `stored_k[j]` and
/// `stored_states[j]` are the values at index `j`.
#[derive(Debug)]
pub struct TrajectoryRecord {
    mode: RecordMode,
    stored_k: BTreeMap<usize, ComplexMatrix>,
    stored_states: BTreeMap<usize, StateBlock>,
    stored_u: BTreeMap<usize, ComplexMatrix>,
}

impl TrajectoryRecord {
    pub fn new(mode: RecordMode) -> Self {
        Self {
            mode,
            stored_k: BTreeMap::new(),
            stored_states: BTreeMap::new(),
            stored_u: BTreeMap::new(),
        }
    }

    pub fn mode(&self) -> RecordMode {
        self.mode
    }

    pub fn is_empty(&self) -> bool {
        self.stored_k.is_empty() && self.stored_states.is_empty() && self.stored_u.is_empty()
    }

    pub fn stored_k(&self) -> &BTreeMap<usize, ComplexMatrix> {
        &self.stored_k
    }

    pub fn stored_states(&self) -> &BTreeMap<usize, StateBlock> {
        &self.stored_states
    }

    pub fn stored_u(&self) -> &BTreeMap<usize, ComplexMatrix> {
        &self.stored_u
    }

    fn kinds(&self) -> (ObjectKind, ObjectKind) {
        match self.mode {
            RecordMode::Checkpoints { .. } => (ObjectKind::CheckpointK, ObjectKind::CheckpointPsi),
            _ => (ObjectKind::TapeK, ObjectKind::TapePsi),
        }
    }

    pub(crate) fn put_u(&mut self, step: usize, u: ComplexMatrix, ledger: &mut MemoryLedger) {
        ledger.record_store(ObjectKind::TapeU, u.dim(), u.dim());
        if let Some(old) = self.stored_u.insert(step, u) {
            let _ = ledger.record_free(ObjectKind::TapeU, old.dim(), old.dim());
        }
    }

    pub(crate) fn put_state(&mut self, state: &EvolutionState, ledger: &mut MemoryLedger) {
        let (kk, pk) = self.kinds();
        let d = state.k.dim();
        ledger.record_store(kk, d, d);
        ledger.record_store(pk, d, state.states.count());
        if let Some(old) = self.stored_k.insert(state.step, state.k.clone()) {
            let _ = ledger.record_free(kk, old.dim(), old.dim());
        }
        if let Some(old) = self.stored_states.insert(state.step, state.states.clone()) {
            let _ = ledger.record_free(pk, old.dim(), old.count());
        }
    }

    /// Removes and returns `U_step`, releasing it in the ledger.
    pub fn take_u(&mut self, step: usize, ledger: &mut MemoryLedger) -> Result<ComplexMatrix> {
        let u = self.stored_u.remove(&step).ok_or_else(|| missing("U", step))?;
        ledger.record_free(ObjectKind::TapeU, u.dim(), u.dim())?;
        Ok(u)
    }

    /// Removes and returns `(K_step, ψ_step)`, releasing both in the ledger.
    pub fn take_state(&mut self, step: usize, ledger: &mut MemoryLedger) -> Result<EvolutionState> {
        let (kk, pk) = self.kinds();
        let k = self.stored_k.remove(&step).ok_or_else(|| missing("K", step))?;
        let states = self.stored_states.remove(&step).ok_or_else(|| missing("psi", step))?;
        ledger.record_free(kk, k.dim(), k.dim())?;
        ledger.record_free(pk, states.dim(), states.count())?;
        Ok(EvolutionState { step, k, states })
    }

    pub fn has_state(&self, step: usize) -> bool {
        self.stored_k.contains_key(&step)
    }

    /// Frees everything still held.
    pub fn release_all(&mut self, ledger: &mut MemoryLedger) -> Result<()> {
        let steps: Vec<usize> = self.stored_u.keys().copied().collect();
        for s in steps {
            self.take_u(s, ledger)?;
        }
        let steps: Vec<usize> = self.stored_k.keys().copied().collect();
        for s in steps {
            self.take_state(s, ledger)?;
        }
        Ok(())
    }
}

fn missing(what: &str, step: usize) -> QocError {
    QocError::Invalid(format!("no recorded {what} at step {step}"))
}

/// One step of the evolution.
pub fn evolve_step(
    state: &EvolutionState,
    model: &HamiltonianModel,
    grid: &TimeGrid,
    controls: &ControlGrid,
) -> Result<EvolutionState> {
    check_step(state, grid)?;
    let u = step_unitary(model, grid, controls, state.step)?;
    Ok(state.advance(&u))
}

fn check_step(state: &EvolutionState, grid: &TimeGrid) -> Result<()> {
    if state.step >= grid.n_steps() {
        return Err(QocError::OutOfRange {
            what: "evolution step",
            detail: format!("{} >= {}", state.step, grid.n_steps()),
        });
    }
    Ok(())
}

/// Runs all `N` steps from `K_0 = I`, filling `record` according to its mode.
pub fn evolve_forward(
    model: &HamiltonianModel,
    grid: &TimeGrid,
    controls: &ControlGrid,
    psi0: &StateBlock,
    record: TrajectoryRecord,
    ledger: &mut MemoryLedger,
) -> Result<(EvolutionState, TrajectoryRecord)> {
    evolve_forward_with(model, grid, controls, psi0, record, ledger, |_| Ok(()))
}

/// As [`evolve_forward`], calling `observe` with the state after every step.
pub fn evolve_forward_with<F>(
    model: &HamiltonianModel,
    grid: &TimeGrid,
    controls: &ControlGrid,
    psi0: &StateBlock,
    mut record: TrajectoryRecord,
    ledger: &mut MemoryLedger,
    mut observe: F,
) -> Result<(EvolutionState, TrajectoryRecord)>
where
    F: FnMut(&EvolutionState) -> Result<()>,
{
    if !record.is_empty() {
        return Err(QocError::Invalid("trajectory record must start empty".into()));
    }
    if psi0.dim() != model.dim() {
        return Err(QocError::dims(
            "evolve_forward",
            format!("states of dim {} for a dim-{} model", psi0.dim(), model.dim()),
        ));
    }
    let mut state = EvolutionState::initial(psi0.clone());
    for j in 0..grid.n_steps() {
        let u = step_unitary(model, grid, controls, j)?;
        state = state.advance(&u);
        if !state.k.is_finite() || !state.states.is_finite() {
            return Err(QocError::NonFinite("forward propagation"));
        }
        observe(&state)?;
        match record.mode {
            RecordMode::None => {}
            RecordMode::All => {
                record.put_u(j, u, ledger);
                record.put_state(&state, ledger);
            }
            RecordMode::Checkpoints { period } => {
                if period > 0 && state.step.is_multiple_of(period) {
                    record.put_state(&state, ledger);
                }
            }
        }
    }
    Ok((state, record))
}
