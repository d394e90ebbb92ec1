//! Object-count memory ledger.
//!
//! Counts the large objects an adjoint strategy retains beyond the forward
//! sweep's working set (tapes and checkpoints) and the bytes they occupy at 16
//! bytes per complex entry. Transient per-step temporaries are not recorded.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{QocError, Result};
use crate::gradient::{Strategy, StrategyKind};

/// Bytes per double-precision complex entry.
pub const COMPLEX_BYTES: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ObjectKind {
    /// Step unitary `U_j` held on a tape.
    TapeU,
    /// Propagator `K_j` held on a tape.
    TapeK,
    /// State block `ψ_j` held on a tape.
    TapePsi,
    CheckpointK,
    CheckpointPsi,
}

impl ObjectKind {
    pub const ALL: [ObjectKind; 5] = [
        ObjectKind::TapeU,
        ObjectKind::TapeK,
        ObjectKind::TapePsi,
        ObjectKind::CheckpointK,
        ObjectKind::CheckpointPsi,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ObjectKind::TapeU => "tape-U",
            ObjectKind::TapeK => "tape-K",
            ObjectKind::TapePsi => "tape-psi",
            ObjectKind::CheckpointK => "checkpoint-K",
            ObjectKind::CheckpointPsi => "checkpoint-psi",
        }
    }

    /// The memory-model row (U, K or ψ) this kind is accounted under.
    pub fn row(self) -> ObjectRow {
        match self {
            ObjectKind::TapeU => ObjectRow::U,
            ObjectKind::TapeK | ObjectKind::CheckpointK => ObjectRow::K,
            ObjectKind::TapePsi | ObjectKind::CheckpointPsi => ObjectRow::Psi,
        }
    }

    fn slot(self) -> usize {
        self as usize
    }
}

/// Aggregated rows of the memory model: all retained copies of `U`, `K`, `ψ`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ObjectRow {
    U,
    K,
    Psi,
}

impl ObjectRow {
    pub const ALL: [ObjectRow; 3] = [ObjectRow::U, ObjectRow::K, ObjectRow::Psi];

    pub fn name(self) -> &'static str {
        match self {
            ObjectRow::U => "U",
            ObjectRow::K => "K",
            ObjectRow::Psi => "psi",
        }
    }

    fn slot(self) -> usize {
        self as usize
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MemoryLedger {
    live: [usize; 5],
    peak: [usize; 5],
    row_live: [usize; 3],
    row_peak: [usize; 3],
    live_bytes: usize,
    peak_bytes: usize,
    stores: u64,
}

impl MemoryLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record_store(&mut self, kind: ObjectKind, rows: usize, cols: usize) {
        let (k, r) = (kind.slot(), kind.row().slot());
        self.live[k] += 1;
        self.peak[k] = self.peak[k].max(self.live[k]);
        self.row_live[r] += 1;
        self.row_peak[r] = self.row_peak[r].max(self.row_live[r]);
        self.live_bytes += COMPLEX_BYTES * rows * cols;
        self.peak_bytes = self.peak_bytes.max(self.live_bytes);
        self.stores += 1;
    }

    pub fn record_free(&mut self, kind: ObjectKind, rows: usize, cols: usize) -> Result<()> {
        let (k, r) = (kind.slot(), kind.row().slot());
        let bytes = COMPLEX_BYTES * rows * cols;
        if self.live[k] == 0 || self.live_bytes < bytes {
            return Err(QocError::Ledger(format!(
                "free of {} ({rows}x{cols}) without a matching store",
                kind.name()
            )));
        }
        self.live[k] -= 1;
        self.row_live[r] -= 1;
        self.live_bytes -= bytes;
        Ok(())
    }

    pub fn live(&self, kind: ObjectKind) -> usize {
        self.live[kind.slot()]
    }

    pub fn peak(&self, kind: ObjectKind) -> usize {
        self.peak[kind.slot()]
    }

    /// Peak number of simultaneously retained objects of one row.
    pub fn row_peak(&self, row: ObjectRow) -> usize {
        self.row_peak[row.slot()]
    }

    pub fn row_live(&self, row: ObjectRow) -> usize {
        self.row_live[row.slot()]
    }

    pub fn live_bytes(&self) -> usize {
        self.live_bytes
    }

    pub fn peak_bytes(&self) -> usize {
        self.peak_bytes
    }

    pub fn total_stores(&self) -> u64 {
        self.stores
    }

    /// Sum of the per-row peaks.
    pub fn peak_objects(&self) -> usize {
        self.row_peak.iter().sum()
    }

    /// Writes `kind,live_peak,bytes_peak,predicted` rows for the three model
    /// rows and a `total` row.
    pub fn write_csv<W: Write>(&self, out: W, dim: usize, states: usize, predicted: &PeakPrediction) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["kind", "live_peak", "bytes_peak", "predicted"])?;
        for row in ObjectRow::ALL {
            let size = object_bytes(row, dim, states);
            let peak = self.row_peak(row);
            w.write_record([
                row.name().to_string(),
                peak.to_string(),
                (peak * size).to_string(),
                format!("{}", predicted.count(row)),
            ])?;
        }
        w.write_record([
            "total".to_string(),
            self.peak_objects().to_string(),
            self.peak_bytes.to_string(),
            format!("{}", predicted.bytes),
        ])?;
        w.flush()?;
        Ok(())
    }
}

/// Size in bytes of one object of the given row.
pub fn object_bytes(row: ObjectRow, dim: usize, states: usize) -> usize {
    match row {
        ObjectRow::U | ObjectRow::K => COMPLEX_BYTES * dim * dim,
        ObjectRow::Psi => COMPLEX_BYTES * dim * states,
    }
}

/// Closed-form additional storage per row and in bytes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeakPrediction {
    pub u: f64,
    pub k: f64,
    pub psi: f64,
    pub bytes: f64,
}

impl PeakPrediction {
    pub fn count(&self, row: ObjectRow) -> f64 {
        match row {
            ObjectRow::U => self.u,
            ObjectRow::K => self.k,
            ObjectRow::Psi => self.psi,
        }
    }

    pub fn objects(&self) -> f64 {
        self.u + self.k + self.psi
    }
}

/// Predicted additional objects for `N` steps, period `C`, `q` qubits and `s`
/// states: store-all `+N` per row; checkpointing `+(N/C + C)` for K and ψ and
/// `+C` for U; reversibility `+0`; checkpointing with reversibility `+N/C` for
/// K and ψ.
pub fn expected_peak(
    strategy: &Strategy,
    n_steps: usize,
    qubits: u32,
    _n_controls: usize,
    states: usize,
) -> PeakPrediction {
    let n = n_steps as f64;
    let (u, k, psi) = match (strategy.kind(), strategy.period()) {
        (StrategyKind::StoreAll, _) => (n, n, n),
        (StrategyKind::PeriodicCheckpoint, Some(c)) => {
            let c = c as f64;
            (c, n / c + c, n / c + c)
        }
        (StrategyKind::CheckpointPlusReversibility, Some(c)) => {
            let c = c as f64;
            (0.0, n / c, n / c)
        }
        _ => (0.0, 0.0, 0.0),
    };
    let dim = 1usize << qubits;
    let mat = (COMPLEX_BYTES * dim * dim) as f64;
    let vec = (COMPLEX_BYTES * dim * states) as f64;
    PeakPrediction {
        u,
        k,
        psi,
        bytes: (u + k) * mat + psi * vec,
    }
}
