//! Reverse-mode gradient of the total cost with respect to every control knot.
//!
//! Four adjoint-memory strategies share the same forward sweep and per-step
//! adjoint and differ only in how the reverse sweep obtains `K_j`, `ψ_j`:
//!
//! * **StoreAll** tapes `U_j`, `K_j`, `ψ_j` for every step.
//! * **PeriodicCheckpoint** keeps `(K, ψ)` every `C` steps; each segment is
//!   re-run forward onto a short tape and then reversed, last segment first.
//! * **FullReversibility** keeps nothing and walks back with `K_{j-1} = U_j† K_j`.
//! * **CheckpointPlusReversibility** keeps `(K, ψ)` every `C` steps and walks
//!   back from each checkpoint, so reconstruction roundoff spans at most `C`
//!   steps.
//!
//! The per-step adjoint of `K_{j+1} = U K_j`, `ψ_{j+1} = U ψ_j`,
//! `U = exp(A)`, `A = −i·dt·ℍ(u)` is
//!
//! ```text
//! Ū   = K̄_{j+1} K_j† + ψ̄_{j+1} ψ_j†        K̄_j = U† K̄_{j+1},  ψ̄_j = U† ψ̄_{j+1}
//! Ā   = L(A†, Ū)                          ℍ̄ = i·dt·Ā
//! ȳ_k = Re⟨H_k, ℍ̄⟩                         split onto the two bracketing knots
//! ```
//!
//! When walking backwards with reversibility, `K_j† = K_{j+1}† U` gives
//! `Ū = M U` with `M = K̄_{j+1} K_{j+1}† + ψ̄_{j+1} ψ_{j+1}†`, and for unitary
//! `U` the adjoint becomes `Ā = L(A†, M) U`. One exponential of the block
//! `[[A†, M], [0, A†]]` then yields both `U†` (for the reconstruction) and the
//! adjoint, so the reverse sweep needs no separate forward recomputation.

use ndarray::{Array2, Zip};
use serde::{Deserialize, Serialize};

use crate::cost::{total_cost, CostReport, CostSpec, StepSeed, TrajectorySummary};
use crate::error::{QocError, Result};
use crate::evolution::{evolve_forward_with, EvolutionState, RecordMode, TrajectoryRecord};
use crate::linalg::{
    dagger_array, expm, expm_array, expm_with_frechet_array, frob_inner_array, ComplexMatrix, StateBlock, C64,
};
use crate::memtrace::MemoryLedger;
use crate::model::{step_generator, step_unitary, Bracket, ControlGrid, HamiltonianModel, TimeGrid};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StrategyKind {
    #[serde(rename = "store-all")]
    StoreAll,
    #[serde(rename = "checkpoint")]
    PeriodicCheckpoint,
    #[serde(rename = "revert")]
    FullReversibility,
    #[serde(rename = "revert-checkpoint")]
    CheckpointPlusReversibility,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 4] = [
        StrategyKind::StoreAll,
        StrategyKind::PeriodicCheckpoint,
        StrategyKind::FullReversibility,
        StrategyKind::CheckpointPlusReversibility,
    ];

    /// CLI spelling.
    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::StoreAll => "store-all",
            StrategyKind::PeriodicCheckpoint => "checkpoint",
            StrategyKind::FullReversibility => "revert",
            StrategyKind::CheckpointPlusReversibility => "revert-checkpoint",
        }
    }

    pub fn needs_period(self) -> bool {
        matches!(
            self,
            StrategyKind::PeriodicCheckpoint | StrategyKind::CheckpointPlusReversibility
        )
    }
}

impl std::str::FromStr for StrategyKind {
    type Err = QocError;

    fn from_str(s: &str) -> Result<Self> {
        StrategyKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| QocError::Invalid(format!("unknown strategy '{s}'")))
    }
}

impl std::fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Adjoint-memory scheme with its checkpoint period where applicable.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Strategy {
    kind: StrategyKind,
    period: Option<usize>,
}

impl Strategy {
    pub fn new(kind: StrategyKind, period: Option<usize>) -> Result<Self> {
        match (kind.needs_period(), period) {
            (true, Some(c)) if c >= 1 => Ok(Self { kind, period }),
            (true, _) => Err(QocError::Invalid(format!("strategy {kind} needs a period C >= 1"))),
            (false, None) => Ok(Self { kind, period }),
            (false, Some(_)) => Err(QocError::Invalid(format!("strategy {kind} takes no period"))),
        }
    }

    pub fn store_all() -> Self {
        Self {
            kind: StrategyKind::StoreAll,
            period: None,
        }
    }

    pub fn full_reversibility() -> Self {
        Self {
            kind: StrategyKind::FullReversibility,
            period: None,
        }
    }

    pub fn periodic_checkpoint(period: usize) -> Self {
        Self {
            kind: StrategyKind::PeriodicCheckpoint,
            period: Some(period),
        }
    }

    pub fn checkpoint_plus_reversibility(period: usize) -> Self {
        Self {
            kind: StrategyKind::CheckpointPlusReversibility,
            period: Some(period),
        }
    }

    pub fn kind(&self) -> StrategyKind {
        self.kind
    }

    pub fn period(&self) -> Option<usize> {
        self.period
    }

    /// Checks `1 ≤ C ≤ N` for the checkpointing kinds.
    pub fn validate(&self, n_steps: usize) -> Result<()> {
        if let Some(c) = self.period {
            if c == 0 || c > n_steps {
                return Err(QocError::Invalid(format!(
                    "checkpoint period {c} must lie in [1, {n_steps}]"
                )));
            }
        }
        Ok(())
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.period {
            Some(c) => write!(f, "{}(C={c})", self.kind),
            None => write!(f, "{}", self.kind),
        }
    }
}

#[derive(Clone, Debug)]
pub struct GradientOptions {
    /// Stride at which full reversibility compares reconstructed propagators
    /// with recomputed forward values, at a cost of `O(N²/stride)` extra
    /// steps. With `None` only the free comparison against `K_0 = I` is made.
    pub reversibility_probe_stride: Option<usize>,
}

impl Default for GradientOptions {
    fn default() -> Self {
        Self {
            reversibility_probe_stride: Some(64),
        }
    }
}

impl GradientOptions {
    /// No diagnostics; used for timing.
    pub fn quiet() -> Self {
        Self {
            reversibility_probe_stride: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct GradientResult {
    /// `∂(total cost)/∂u_{k,j}`, shaped like the control grid.
    pub grad: Array2<f64>,
    pub cost: CostReport,
    pub ledger: MemoryLedger,
    /// Largest `‖K_reconstructed − K_forward‖_F` observed; reversibility kinds only.
    pub reconstruction_error: Option<f64>,
    pub final_state: EvolutionState,
}

/// Cotangents of `(K_j, ψ_j)`; `None` stands for zero.
#[derive(Clone, Debug, Default)]
pub struct Adjoint {
    pub k: Option<ComplexMatrix>,
    pub states: Option<StateBlock>,
}

impl Adjoint {
    pub fn is_zero(&self) -> bool {
        self.k.is_none() && self.states.is_none()
    }

    pub fn add_seed(&mut self, seed: StepSeed) {
        if let Some(g) = seed.k {
            self.k = Some(match self.k.take() {
                Some(k) => ComplexMatrix::from_array_unchecked(k.into_array() + g.as_array()),
                None => g,
            });
        }
        if let Some(g) = seed.states {
            self.states = Some(match self.states.take() {
                Some(s) => StateBlock::from_array_unchecked(s.into_array() + g.as_array()),
                None => g,
            });
        }
    }
}

/// Output of one step's adjoint.
#[derive(Clone, Debug)]
pub struct StepVjp {
    /// Cotangents at the step's input index `j`.
    pub adjoint: Adjoint,
    /// Per-channel cotangent of the interpolated control amplitude.
    pub channel_bar: Vec<f64>,
    pub bracket: Bracket,
}

impl StepVjp {
    /// Adds the knot contributions `(1 − w)·ȳ` at `index − 1` and `w·ȳ` at `index`.
    pub fn scatter(&self, grad: &mut Array2<f64>) {
        let (i, w) = (self.bracket.index, self.bracket.weight);
        for (k, &yb) in self.channel_bar.iter().enumerate() {
            let temp = w * yb;
            grad[[k, i - 1]] += yb - temp;
            grad[[k, i]] += temp;
        }
    }
}

fn channel_bars(model: &HamiltonianModel, magnus_bar: &Array2<C64>, dt: f64) -> Vec<f64> {
    // ℍ̄ = conj(−i)·dt·Ā
    let h_bar = magnus_bar * C64::new(0.0, dt);
    model
        .control_ops()
        .iter()
        .map(|hk| frob_inner_array(hk.as_array().view(), h_bar.view()).re)
        .collect()
}

fn zero_vjp(model: &HamiltonianModel, bracket: Bracket) -> StepVjp {
    StepVjp {
        adjoint: Adjoint::default(),
        channel_bar: vec![0.0; model.n_controls()],
        bracket,
    }
}

/// Adjoint of step `j` given its input values `(K_j, ψ_j)` and the incoming
/// cotangents at `j+1`. `U_j` is recomputed from the controls unless supplied.
pub fn step_vjp(
    model: &HamiltonianModel,
    grid: &TimeGrid,
    controls: &ControlGrid,
    step: usize,
    incoming: &Adjoint,
    values: &EvolutionState,
    unitary: Option<&ComplexMatrix>,
) -> Result<StepVjp> {
    let gen = step_generator(model, grid, controls, step)?;
    if values.k.dim() != model.dim() || values.states.dim() != model.dim() {
        return Err(QocError::dims(
            "step_vjp",
            "step values do not match the model dimension",
        ));
    }
    if incoming.is_zero() {
        return Ok(zero_vjp(model, gen.bracket));
    }
    let owned;
    let u = match unitary {
        Some(u) => u.as_array(),
        None => {
            owned = expm(&gen.magnus)?;
            owned.as_array()
        }
    };
    let u_dag = dagger_array(u.view());
    let d = model.dim();
    let mut u_bar = Array2::<C64>::zeros((d, d));
    let mut adjoint = Adjoint::default();
    if let Some(kb) = &incoming.k {
        u_bar += &kb.as_array().dot(&dagger_array(values.k.as_array().view()));
        adjoint.k = Some(ComplexMatrix::from_array_unchecked(u_dag.dot(kb.as_array())));
    }
    if let Some(sb) = &incoming.states {
        if sb.count() != values.states.count() {
            return Err(QocError::dims(
                "step_vjp",
                "state cotangent and state block differ in width",
            ));
        }
        u_bar += &sb.as_array().dot(&dagger_array(values.states.as_array().view()));
        adjoint.states = Some(StateBlock::from_array_unchecked(u_dag.dot(sb.as_array())));
    }
    let a_dag = dagger_array(gen.magnus.as_array().view());
    let (_, a_bar) = expm_with_frechet_array(a_dag.view(), u_bar.view())?;
    Ok(StepVjp {
        adjoint,
        channel_bar: channel_bars(model, &a_bar, grid.dt()),
        bracket: gen.bracket,
    })
}

/// `K_{j-1} = U_j† K_j`, `ψ_{j-1} = U_j† ψ_j`.
pub fn reverse_reconstruct(
    unitary: &ComplexMatrix,
    k: &ComplexMatrix,
    states: &StateBlock,
) -> Result<(ComplexMatrix, StateBlock)> {
    let ud = unitary.dagger();
    Ok((ud.matmul(k)?, ud.apply(states)?))
}

/// Reconstructs `(K_j, ψ_j)` from `(K_{j+1}, ψ_{j+1})` and returns the adjoint
/// of step `j`, using a single block exponential for both.
pub fn reverse_step_vjp(
    model: &HamiltonianModel,
    grid: &TimeGrid,
    controls: &ControlGrid,
    step: usize,
    incoming: &Adjoint,
    next: &EvolutionState,
) -> Result<(EvolutionState, StepVjp)> {
    let gen = step_generator(model, grid, controls, step)?;
    if next.step != step + 1 {
        return Err(QocError::Invalid(format!(
            "reverse step {step} needs values at index {}, got {}",
            step + 1,
            next.step
        )));
    }
    let d = model.dim();
    let a_dag = dagger_array(gen.magnus.as_array().view());
    let mut m = Array2::<C64>::zeros((d, d));
    if let Some(kb) = &incoming.k {
        m += &kb.as_array().dot(&dagger_array(next.k.as_array().view()));
    }
    if let Some(sb) = &incoming.states {
        m += &sb.as_array().dot(&dagger_array(next.states.as_array().view()));
    }
    let (u_dag, a_bar) = if incoming.is_zero() {
        (expm_array(a_dag.view())?, None)
    } else {
        let (ud, l) = expm_with_frechet_array(a_dag.view(), m.view())?;
        let a_bar = l.dot(&dagger_array(ud.view()));
        (ud, Some(a_bar))
    };
    let prev = EvolutionState {
        step,
        k: ComplexMatrix::from_array_unchecked(u_dag.dot(next.k.as_array())),
        states: StateBlock::from_array_unchecked(u_dag.dot(next.states.as_array())),
    };
    let vjp = match a_bar {
        None => zero_vjp(model, gen.bracket),
        Some(a_bar) => StepVjp {
            adjoint: Adjoint {
                k: incoming
                    .k
                    .as_ref()
                    .map(|kb| ComplexMatrix::from_array_unchecked(u_dag.dot(kb.as_array()))),
                states: incoming
                    .states
                    .as_ref()
                    .map(|sb| StateBlock::from_array_unchecked(u_dag.dot(sb.as_array()))),
            },
            channel_bar: channel_bars(model, &a_bar, grid.dt()),
            bracket: gen.bracket,
        },
    };
    Ok((prev, vjp))
}

/// Inputs shared by every gradient evaluation of one control problem.
#[derive(Clone, Debug)]
pub struct ControlProblem {
    pub model: HamiltonianModel,
    pub grid: TimeGrid,
    pub psi0: StateBlock,
    pub cost: CostSpec,
}

impl ControlProblem {
    pub fn new(model: HamiltonianModel, grid: TimeGrid, psi0: StateBlock, cost: CostSpec) -> Result<Self> {
        if psi0.dim() != model.dim() {
            return Err(QocError::dims(
                "ControlProblem",
                format!("initial states of dim {} for model dim {}", psi0.dim(), model.dim()),
            ));
        }
        if !psi0.is_finite() {
            return Err(QocError::NonFinite("initial states"));
        }
        cost.check_dims(model.dim(), psi0.count())?;
        Ok(Self {
            model,
            grid,
            psi0,
            cost,
        })
    }

    pub fn n_controls(&self) -> usize {
        self.model.n_controls()
    }

    pub fn zero_controls(&self) -> ControlGrid {
        ControlGrid::zeros(self.model.n_controls(), &self.grid)
    }

    pub fn evaluate(&self, controls: &ControlGrid) -> Result<(EvolutionState, CostReport)> {
        evaluate_cost(&self.model, &self.grid, controls, &self.cost, &self.psi0)
    }

    pub fn gradient(&self, controls: &ControlGrid, strategy: &Strategy) -> Result<GradientResult> {
        gradient_with(
            &self.model,
            &self.grid,
            controls,
            &self.cost,
            &self.psi0,
            strategy,
            &GradientOptions::default(),
        )
    }

    pub fn gradient_with(
        &self,
        controls: &ControlGrid,
        strategy: &Strategy,
        options: &GradientOptions,
    ) -> Result<GradientResult> {
        gradient_with(
            &self.model,
            &self.grid,
            controls,
            &self.cost,
            &self.psi0,
            strategy,
            options,
        )
    }
}

/// Forward sweep only: final state and cost report.
pub fn evaluate_cost(
    model: &HamiltonianModel,
    grid: &TimeGrid,
    controls: &ControlGrid,
    spec: &CostSpec,
    psi0: &StateBlock,
) -> Result<(EvolutionState, CostReport)> {
    let mut ledger = MemoryLedger::new();
    let mut summary = TrajectorySummary::default();
    let (fin, _) = evolve_forward_with(
        model,
        grid,
        controls,
        psi0,
        TrajectoryRecord::new(RecordMode::None),
        &mut ledger,
        |s| summary.observe(spec, s),
    )?;
    let report = total_cost(spec, &summary, &fin, controls.values())?;
    Ok((fin, report))
}

pub fn gradient(
    model: &HamiltonianModel,
    grid: &TimeGrid,
    controls: &ControlGrid,
    spec: &CostSpec,
    psi0: &StateBlock,
    strategy: &Strategy,
) -> Result<GradientResult> {
    gradient_with(model, grid, controls, spec, psi0, strategy, &GradientOptions::default())
}

pub fn gradient_with(
    model: &HamiltonianModel,
    grid: &TimeGrid,
    controls: &ControlGrid,
    spec: &CostSpec,
    psi0: &StateBlock,
    strategy: &Strategy,
    options: &GradientOptions,
) -> Result<GradientResult> {
    strategy.validate(grid.n_steps())?;
    if controls.n_controls() != model.n_controls() || controls.n_knots() != grid.n_knots() {
        return Err(QocError::dims(
            "gradient",
            format!(
                "controls {}x{} for {} channels and {} knots",
                controls.n_controls(),
                controls.n_knots(),
                model.n_controls(),
                grid.n_knots()
            ),
        ));
    }
    spec.check_dims(model.dim(), psi0.count())?;

    let n = grid.n_steps();
    let reverse_needed = spec.touches_evolution() && n > 0;
    let mode = match (reverse_needed, strategy.kind(), strategy.period()) {
        (false, _, _) => RecordMode::None,
        (true, StrategyKind::StoreAll, _) => RecordMode::All,
        (true, StrategyKind::FullReversibility, _) => RecordMode::None,
        (true, _, Some(c)) => RecordMode::Checkpoints { period: c },
        (true, _, None) => unreachable!("validated strategy"),
    };

    let mut ledger = MemoryLedger::new();
    let mut summary = TrajectorySummary::default();
    let (final_state, record) = evolve_forward_with(
        model,
        grid,
        controls,
        psi0,
        TrajectoryRecord::new(mode),
        &mut ledger,
        |s| summary.observe(spec, s),
    )?;
    let cost = total_cost(spec, &summary, &final_state, controls.values())?;

    let mut sweep = ReverseSweep {
        model,
        grid,
        controls,
        spec,
        psi0,
        options,
        n,
        grad: spec.control_seed(controls.values()),
        ledger,
        recon_err: None,
    };
    if reverse_needed {
        match strategy.kind() {
            StrategyKind::StoreAll => sweep.store_all(&final_state, record)?,
            StrategyKind::PeriodicCheckpoint => sweep.checkpointed(&final_state, record, strategy.period().unwrap())?,
            StrategyKind::FullReversibility => sweep.reversible(&final_state)?,
            StrategyKind::CheckpointPlusReversibility => {
                sweep.reversible_checkpointed(&final_state, record, strategy.period().unwrap())?
            }
        }
    }
    if sweep.grad.iter().any(|g| !g.is_finite()) {
        return Err(QocError::NonFinite("gradient"));
    }
    let reconstruction_error = match strategy.kind() {
        StrategyKind::FullReversibility | StrategyKind::CheckpointPlusReversibility => {
            Some(sweep.recon_err.unwrap_or(0.0))
        }
        _ => None,
    };
    Ok(GradientResult {
        grad: sweep.grad,
        cost,
        ledger: sweep.ledger,
        reconstruction_error,
        final_state,
    })
}

struct ReverseSweep<'a> {
    model: &'a HamiltonianModel,
    grid: &'a TimeGrid,
    controls: &'a ControlGrid,
    spec: &'a CostSpec,
    psi0: &'a StateBlock,
    options: &'a GradientOptions,
    n: usize,
    grad: Array2<f64>,
    ledger: MemoryLedger,
    recon_err: Option<f64>,
}

impl ReverseSweep<'_> {
    fn initial(&self) -> EvolutionState {
        EvolutionState::initial(self.psi0.clone())
    }

    /// Cotangent at index `N`: final-state terms plus the last per-step terms.
    fn final_adjoint(&self, fin: &EvolutionState) -> Result<Adjoint> {
        let mut adj = Adjoint::default();
        adj.add_seed(self.spec.final_seed(fin)?);
        adj.add_seed(self.spec.step_seed(self.n, fin)?);
        Ok(adj)
    }

    fn seed_at(&self, adj: &mut Adjoint, state: &EvolutionState) -> Result<()> {
        if state.step >= 1 {
            adj.add_seed(self.spec.step_seed(self.n, state)?);
        }
        Ok(())
    }

    fn note_error(&mut self, reconstructed: &ComplexMatrix, reference: &ComplexMatrix) {
        let mut e = 0.0;
        Zip::from(reconstructed.as_array())
            .and(reference.as_array())
            .for_each(|a, b| e += (a - b).norm_sqr());
        let e = e.sqrt();
        self.recon_err = Some(self.recon_err.map_or(e, |prev| prev.max(e)));
    }

    fn apply(&mut self, vjp: StepVjp) -> Adjoint {
        vjp.scatter(&mut self.grad);
        vjp.adjoint
    }

    /// Reverses steps `start..end` from a tape holding `U_j` and `(K_j, ψ_j)`
    /// for every `j` in the range.
    fn reverse_taped(
        &mut self,
        tape: &mut TrajectoryRecord,
        start: usize,
        end: usize,
        mut adj: Adjoint,
    ) -> Result<Adjoint> {
        for j in (start..end).rev() {
            let u = tape.take_u(j, &mut self.ledger)?;
            let prev = if j == 0 && !tape.has_state(0) {
                self.initial()
            } else {
                tape.take_state(j, &mut self.ledger)?
            };
            let vjp = step_vjp(self.model, self.grid, self.controls, j, &adj, &prev, Some(&u))?;
            adj = self.apply(vjp);
            self.seed_at(&mut adj, &prev)?;
        }
        Ok(adj)
    }

    fn store_all(&mut self, fin: &EvolutionState, mut tape: TrajectoryRecord) -> Result<()> {
        // The taped value at N duplicates the final state.
        tape.take_state(self.n, &mut self.ledger)?;
        let adj = self.final_adjoint(fin)?;
        self.reverse_taped(&mut tape, 0, self.n, adj)?;
        tape.release_all(&mut self.ledger)
    }

    fn checkpointed(&mut self, fin: &EvolutionState, mut ckpts: TrajectoryRecord, period: usize) -> Result<()> {
        if ckpts.has_state(self.n) {
            ckpts.take_state(self.n, &mut self.ledger)?;
        }
        let mut adj = self.final_adjoint(fin)?;
        let mut end = self.n;
        while end > 0 {
            let start = ((end - 1) / period) * period;
            let mut cur = if start == 0 {
                self.initial()
            } else {
                ckpts.take_state(start, &mut self.ledger)?
            };
            // tape + reverse: re-run the segment recording U_j and (K_j, ψ_j)
            let mut tape = TrajectoryRecord::new(RecordMode::All);
            tape.put_state(&cur, &mut self.ledger);
            for j in start..end {
                let u = step_unitary(self.model, self.grid, self.controls, j)?;
                let next = cur.advance(&u);
                tape.put_u(j, u, &mut self.ledger);
                if j + 1 < end {
                    tape.put_state(&next, &mut self.ledger);
                }
                cur = next;
            }
            adj = self.reverse_taped(&mut tape, start, end, adj)?;
            end = start;
        }
        ckpts.release_all(&mut self.ledger)
    }

    fn reversible(&mut self, fin: &EvolutionState) -> Result<()> {
        let mut adj = self.final_adjoint(fin)?;
        let mut cur = fin.clone();
        let stride = self.options.reversibility_probe_stride;
        for j in (0..self.n).rev() {
            let (prev, vjp) = reverse_step_vjp(self.model, self.grid, self.controls, j, &adj, &cur)?;
            adj = self.apply(vjp);
            if j == 0 {
                self.note_error(&prev.k, &ComplexMatrix::identity(self.model.dim()));
            } else if stride.is_some_and(|s| j % s.max(1) == 0) {
                let reference = self.recompute_forward(j)?;
                self.note_error(&prev.k, &reference);
            }
            self.seed_at(&mut adj, &prev)?;
            cur = prev;
        }
        Ok(())
    }

    fn reversible_checkpointed(
        &mut self,
        fin: &EvolutionState,
        mut ckpts: TrajectoryRecord,
        period: usize,
    ) -> Result<()> {
        if ckpts.has_state(self.n) {
            ckpts.take_state(self.n, &mut self.ledger)?;
        }
        let mut adj = self.final_adjoint(fin)?;
        let mut cur = fin.clone();
        let mut end = self.n;
        while end > 0 {
            let start = ((end - 1) / period) * period;
            for j in (start..end).rev() {
                let (mut prev, vjp) = reverse_step_vjp(self.model, self.grid, self.controls, j, &adj, &cur)?;
                adj = self.apply(vjp);
                if j == start {
                    let exact = if start == 0 {
                        self.initial()
                    } else {
                        ckpts.take_state(start, &mut self.ledger)?
                    };
                    self.note_error(&prev.k, &exact.k);
                    prev = exact;
                }
                self.seed_at(&mut adj, &prev)?;
                cur = prev;
            }
            end = start;
        }
        ckpts.release_all(&mut self.ledger)
    }

    /// `K_j` by a fresh forward run from `K_0 = I`.
    fn recompute_forward(&self, j: usize) -> Result<ComplexMatrix> {
        let mut k = ComplexMatrix::identity(self.model.dim());
        for i in 0..j {
            let u = step_unitary(self.model, self.grid, self.controls, i)?;
            k = ComplexMatrix::from_array_unchecked(u.as_array().dot(k.as_array()));
        }
        Ok(k)
    }
}
