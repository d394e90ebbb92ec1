//! GRAPE gradients for time-stepped Schrödinger evolution with interchangeable
//! adjoint-memory strategies and a memory ledger that records what each
//! strategy retains.

pub mod cost;
pub mod error;
pub mod evolution;
pub mod gradient;
pub mod harness;
pub mod linalg;
pub mod memtrace;
pub mod model;
pub mod optimizer;

pub use cost::{CostReport, CostSpec};
pub use error::{QocError, Result};
pub use evolution::{evolve_forward, evolve_step, EvolutionState, RecordMode, TrajectoryRecord};
pub use gradient::{gradient, ControlProblem, GradientOptions, GradientResult, Strategy, StrategyKind};
pub use linalg::{ComplexMatrix, StateBlock, C64};
pub use memtrace::{expected_peak, MemoryLedger, ObjectKind, ObjectRow, PeakPrediction};
pub use model::{ControlGrid, HamiltonianModel, TimeGrid};
pub use optimizer::{grape, initial_controls, GrapeConfig, GrapeOutcome, OptimizationTrace};
