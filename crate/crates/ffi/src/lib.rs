//! C ABI over `qoc-core`.
//!
//! A problem is created from the same JSON accepted by the `qoc` CLI and is
//! referenced through an opaque `QocProblem` pointer. Every fallible call
//! returns a [`QocStatus`]; on failure [`qoc_last_error`] describes the cause.
//! Control arrays are row-major `n_controls × n_knots` doubles.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use qoc_core::harness::{RunConfig, Setup};
use qoc_core::memtrace::ObjectRow;
use qoc_core::optimizer::grape_from;
use qoc_core::{ControlGrid, GradientOptions, QocError, Strategy, StrategyKind};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QocStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    DimensionMismatch = 4,
    Numerical = 5,
    Io = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QocStrategyKind {
    StoreAll = 0,
    Checkpoint = 1,
    Revert = 2,
    RevertCheckpoint = 3,
}

impl From<QocStrategyKind> for StrategyKind {
    fn from(k: QocStrategyKind) -> Self {
        match k {
            QocStrategyKind::StoreAll => StrategyKind::StoreAll,
            QocStrategyKind::Checkpoint => StrategyKind::PeriodicCheckpoint,
            QocStrategyKind::Revert => StrategyKind::FullReversibility,
            QocStrategyKind::RevertCheckpoint => StrategyKind::CheckpointPlusReversibility,
        }
    }
}

/// Peak additional storage of one gradient evaluation.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct QocMemoryStats {
    pub peak_u: usize,
    pub peak_k: usize,
    pub peak_psi: usize,
    pub peak_bytes: usize,
    /// NaN for strategies that do not reconstruct states.
    pub reconstruction_error: f64,
}

/// Opaque problem handle.
pub struct QocProblem {
    setup: Setup,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &QocError) -> QocStatus {
    match e {
        QocError::DimensionMismatch { .. } => QocStatus::DimensionMismatch,
        QocError::NonFinite(_) | QocError::Numerical(_) => QocStatus::Numerical,
        QocError::Config(_) | QocError::Json(_) | QocError::Csv(_) => QocStatus::Config,
        QocError::Io(_) => QocStatus::Io,
        _ => QocStatus::InvalidArgument,
    }
}

enum Failure {
    Null(&'static str),
    Arg(String),
    Core(QocError),
}

impl From<QocError> for Failure {
    fn from(e: QocError) -> Self {
        Failure::Core(e)
    }
}

fn guard<F>(f: F) -> QocStatus
where
    F: FnOnce() -> Result<(), Failure>,
{
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => QocStatus::Ok,
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            QocStatus::NullPointer
        }
        Ok(Err(Failure::Arg(msg))) => {
            set_error(msg);
            QocStatus::InvalidArgument
        }
        Ok(Err(Failure::Core(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic".to_string());
            QocStatus::Panic
        }
    }
}

unsafe fn problem_ref<'a>(p: *const QocProblem) -> Result<&'a QocProblem, Failure> {
    // SAFETY: non-null handles come from qoc_problem_from_json.
    unsafe { p.as_ref() }.ok_or(Failure::Null("problem"))
}

unsafe fn slice<'a>(data: *const f64, len: usize, what: &'static str) -> Result<&'a [f64], Failure> {
    if data.is_null() {
        return Err(Failure::Null(what));
    }
    // SAFETY: caller guarantees `len` readable doubles.
    Ok(unsafe { std::slice::from_raw_parts(data, len) })
}

unsafe fn slice_mut<'a>(data: *mut f64, len: usize, what: &'static str) -> Result<&'a mut [f64], Failure> {
    if data.is_null() {
        return Err(Failure::Null(what));
    }
    // SAFETY: caller guarantees `len` writable doubles.
    Ok(unsafe { std::slice::from_raw_parts_mut(data, len) })
}

impl QocProblem {
    fn knot_len(&self) -> usize {
        self.setup.problem.n_controls() * self.setup.problem.grid.n_knots()
    }

    fn controls_from(&self, data: &[f64]) -> Result<ControlGrid, Failure> {
        if data.len() != self.knot_len() {
            return Err(Failure::Arg(format!(
                "expected {} control values, got {}",
                self.knot_len(),
                data.len()
            )));
        }
        let shape = (self.setup.problem.n_controls(), self.setup.problem.grid.n_knots());
        let values = ndarray::Array2::from_shape_vec(shape, data.to_vec()).expect("length checked");
        Ok(ControlGrid::new(values, &self.setup.problem.grid)?)
    }

    fn check_out(&self, len: usize, what: &str) -> Result<(), Failure> {
        if len != self.knot_len() {
            return Err(Failure::Arg(format!(
                "{what} holds {len} values, need {}",
                self.knot_len()
            )));
        }
        Ok(())
    }
}

/// Message for the most recent failure on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn qoc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Parses a JSON run config and builds a problem.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn qoc_problem_from_json(json: *const c_char, out: *mut *mut QocProblem) -> QocStatus {
    guard(|| {
        if json.is_null() {
            return Err(Failure::Null("json"));
        }
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        // SAFETY: checked non-null; caller guarantees NUL termination.
        let text = unsafe { CStr::from_ptr(json) }
            .to_str()
            .map_err(|e| Failure::Arg(format!("json is not UTF-8: {e}")))?;
        let setup = RunConfig::from_json(text)?.setup()?;
        let handle = Box::into_raw(Box::new(QocProblem { setup }));
        // SAFETY: checked non-null.
        unsafe { *out = handle };
        Ok(())
    })
}

/// Releases a problem. NULL is ignored.
///
/// # Safety
/// `problem` must come from `qoc_problem_from_json` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn qoc_problem_free(problem: *mut QocProblem) {
    if !problem.is_null() {
        // SAFETY: allocated by Box::into_raw in qoc_problem_from_json.
        drop(unsafe { Box::from_raw(problem) });
    }
}

/// Number of control channels, or 0 for NULL.
///
/// # Safety
/// `problem` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qoc_problem_n_controls(problem: *const QocProblem) -> usize {
    // SAFETY: forwarded caller contract.
    unsafe { problem.as_ref() }.map_or(0, |p| p.setup.problem.n_controls())
}

/// Number of knots `N + 1`, or 0 for NULL.
///
/// # Safety
/// `problem` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qoc_problem_n_knots(problem: *const QocProblem) -> usize {
    // SAFETY: forwarded caller contract.
    unsafe { problem.as_ref() }.map_or(0, |p| p.setup.problem.grid.n_knots())
}

/// Copies the configured initial controls into `out` (`len` values).
///
/// # Safety
/// `problem` must be a live handle and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn qoc_problem_initial_controls(
    problem: *const QocProblem,
    out: *mut f64,
    len: usize,
) -> QocStatus {
    guard(|| {
        // SAFETY: forwarded caller contract.
        let p = unsafe { problem_ref(problem) }?;
        p.check_out(len, "out")?;
        let out = unsafe { slice_mut(out, len, "out") }?;
        for (o, v) in out.iter_mut().zip(p.setup.controls.values().iter()) {
            *o = *v;
        }
        Ok(())
    })
}

/// Selects the adjoint strategy. `period` is ignored for kinds without one.
///
/// # Safety
/// `problem` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn qoc_problem_set_strategy(
    problem: *mut QocProblem,
    kind: QocStrategyKind,
    period: usize,
) -> QocStatus {
    guard(|| {
        // SAFETY: forwarded caller contract.
        let p = unsafe { problem.as_mut() }.ok_or(Failure::Null("problem"))?;
        let kind = StrategyKind::from(kind);
        let strategy = Strategy::new(kind, kind.needs_period().then_some(period))?;
        strategy.validate(p.setup.problem.grid.n_steps())?;
        p.setup.strategy = strategy;
        p.setup.grape.strategy = strategy;
        Ok(())
    })
}

/// Total cost at `controls`.
///
/// # Safety
/// `problem` must be a live handle, `controls` must hold `len` doubles and
/// `out_total` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qoc_cost(
    problem: *const QocProblem,
    controls: *const f64,
    len: usize,
    out_total: *mut f64,
) -> QocStatus {
    guard(|| {
        // SAFETY: forwarded caller contract.
        let p = unsafe { problem_ref(problem) }?;
        let c = p.controls_from(unsafe { slice(controls, len, "controls") }?)?;
        let out = unsafe { out_total.as_mut() }.ok_or(Failure::Null("out_total"))?;
        *out = p.setup.problem.evaluate(&c)?.1.total;
        Ok(())
    })
}

/// Gradient of the total cost with the selected strategy. `out_total` and
/// `out_stats` may be NULL.
///
/// # Safety
/// `problem` must be a live handle, `controls` and `out_grad` must hold
/// `len` doubles, and non-NULL outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn qoc_gradient(
    problem: *const QocProblem,
    controls: *const f64,
    len: usize,
    out_grad: *mut f64,
    out_total: *mut f64,
    out_stats: *mut QocMemoryStats,
) -> QocStatus {
    guard(|| {
        // SAFETY: forwarded caller contract.
        let p = unsafe { problem_ref(problem) }?;
        let c = p.controls_from(unsafe { slice(controls, len, "controls") }?)?;
        let grad = unsafe { slice_mut(out_grad, len, "out_grad") }?;
        let res = p
            .setup
            .problem
            .gradient_with(&c, &p.setup.strategy, &GradientOptions::default())?;
        for (o, g) in grad.iter_mut().zip(res.grad.iter()) {
            *o = *g;
        }
        if let Some(t) = unsafe { out_total.as_mut() } {
            *t = res.cost.total;
        }
        if let Some(s) = unsafe { out_stats.as_mut() } {
            *s = QocMemoryStats {
                peak_u: res.ledger.row_peak(ObjectRow::U),
                peak_k: res.ledger.row_peak(ObjectRow::K),
                peak_psi: res.ledger.row_peak(ObjectRow::Psi),
                peak_bytes: res.ledger.peak_bytes(),
                reconstruction_error: res.reconstruction_error.unwrap_or(f64::NAN),
            };
        }
        Ok(())
    })
}

/// Runs gradient descent from `init` (or the configured initial controls
/// when `init` is NULL) and writes the best controls to `out_controls`.
/// `out_iterations`, `out_f0` and `out_converged` may be NULL.
///
/// # Safety
/// `problem` must be a live handle, `init` (when non-NULL) and
/// `out_controls` must hold `len` doubles, and non-NULL outputs must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn qoc_optimize(
    problem: *const QocProblem,
    init: *const f64,
    len: usize,
    out_controls: *mut f64,
    out_iterations: *mut usize,
    out_f0: *mut f64,
    out_converged: *mut bool,
) -> QocStatus {
    guard(|| {
        // SAFETY: forwarded caller contract.
        let p = unsafe { problem_ref(problem) }?;
        p.check_out(len, "out_controls")?;
        let start = if init.is_null() {
            p.setup.controls.clone()
        } else {
            p.controls_from(unsafe { slice(init, len, "init") }?)?
        };
        let out = unsafe { slice_mut(out_controls, len, "out_controls") }?;
        let outcome = grape_from(&p.setup.problem, &p.setup.grape, start, |_| Ok(()))?;
        for (o, v) in out.iter_mut().zip(outcome.controls.values().iter()) {
            *o = *v;
        }
        let best = outcome.trace.best_record().expect("one record");
        if let Some(i) = unsafe { out_iterations.as_mut() } {
            *i = outcome.trace.iterations();
        }
        if let Some(f) = unsafe { out_f0.as_mut() } {
            *f = best.f0.unwrap_or(f64::NAN);
        }
        if let Some(c) = unsafe { out_converged.as_mut() } {
            *c = outcome.trace.converged;
        }
        Ok(())
    })
}
