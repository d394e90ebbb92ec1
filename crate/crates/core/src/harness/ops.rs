//! Named operator and state constructions for multi-qubit configs.
//!
//! Qubit 0 is the leftmost Kronecker factor, so basis index bits read
//! most-significant first.

use serde::{Deserialize, Serialize};

use crate::error::{QocError, Result};
use crate::linalg::{ComplexMatrix, StateBlock, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NamedOp {
    #[serde(alias = "identity")]
    I,
    #[serde(alias = "pauli_x")]
    X,
    #[serde(alias = "pauli_y")]
    Y,
    #[serde(alias = "pauli_z")]
    Z,
    /// `|1⟩⟨1|`
    Number,
    /// `|0⟩⟨1|`
    #[serde(alias = "sigma_minus")]
    Lower,
    /// `|1⟩⟨0|`
    #[serde(alias = "sigma_plus")]
    Raise,
    Hadamard,
}

impl NamedOp {
    pub fn matrix(self) -> ComplexMatrix {
        let c = |re: f64, im: f64| C64::new(re, im);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let rows = match self {
            NamedOp::I => [[c(1., 0.), c(0., 0.)], [c(0., 0.), c(1., 0.)]],
            NamedOp::X => [[c(0., 0.), c(1., 0.)], [c(1., 0.), c(0., 0.)]],
            NamedOp::Y => [[c(0., 0.), c(0., -1.)], [c(0., 1.), c(0., 0.)]],
            NamedOp::Z => [[c(1., 0.), c(0., 0.)], [c(0., 0.), c(-1., 0.)]],
            NamedOp::Number => [[c(0., 0.), c(0., 0.)], [c(0., 0.), c(1., 0.)]],
            NamedOp::Lower => [[c(0., 0.), c(1., 0.)], [c(0., 0.), c(0., 0.)]],
            NamedOp::Raise => [[c(0., 0.), c(0., 0.)], [c(1., 0.), c(0., 0.)]],
            NamedOp::Hadamard => [[c(h, 0.), c(h, 0.)], [c(h, 0.), c(-h, 0.)]],
        };
        ComplexMatrix::from_array_unchecked(ndarray::arr2(&rows))
    }
}

/// A real number or a `[re, im]` pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Real(f64),
    Complex([f64; 2]),
}

impl Scalar {
    pub fn value(self) -> C64 {
        match self {
            Scalar::Real(r) => C64::new(r, 0.0),
            Scalar::Complex([re, im]) => C64::new(re, im),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
pub enum OperatorSpec {
    Identity,
    Zero,
    /// `name` on one qubit, identity elsewhere.
    Single {
        name: NamedOp,
        qubit: usize,
    },
    /// `Σ_k name_k`
    SumSingle {
        name: NamedOp,
    },
    /// `Σ_k name_k name_{k+1}` along an open chain.
    SumNeighbors {
        name: NamedOp,
    },
    /// One factor per qubit.
    Tensor {
        factors: Vec<NamedOp>,
    },
    /// `name ⊗ name ⊗ …`
    TensorAll {
        name: NamedOp,
    },
    Scale {
        factor: Scalar,
        of: Box<OperatorSpec>,
    },
    Sum {
        terms: Vec<OperatorSpec>,
    },
    /// Matrix product, leftmost factor applied last.
    Product {
        factors: Vec<OperatorSpec>,
    },
    Dagger {
        of: Box<OperatorSpec>,
    },
    /// Explicit rows; `im` defaults to zero.
    Matrix {
        re: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        im: Option<Vec<Vec<f64>>>,
    },
}

fn embed(factors: &[ComplexMatrix]) -> ComplexMatrix {
    factors.iter().skip(1).fold(factors[0].clone(), |acc, f| acc.kron(f))
}

fn on_qubit(name: NamedOp, qubit: usize, qubits: usize) -> ComplexMatrix {
    let factors: Vec<_> = (0..qubits)
        .map(|k| if k == qubit { name.matrix() } else { NamedOp::I.matrix() })
        .collect();
    embed(&factors)
}

fn complex_rows(what: &'static str, re: &[Vec<f64>], im: Option<&Vec<Vec<f64>>>) -> Result<Vec<Vec<C64>>> {
    if let Some(im) = im {
        if im.len() != re.len() || im.iter().zip(re).any(|(a, b)| a.len() != b.len()) {
            return Err(QocError::dims(what, "re and im parts differ in shape"));
        }
    }
    Ok(re
        .iter()
        .enumerate()
        .map(|(i, row)| {
            row.iter()
                .enumerate()
                .map(|(j, &r)| C64::new(r, im.map_or(0.0, |m| m[i][j])))
                .collect()
        })
        .collect())
}

impl OperatorSpec {
    /// Builds the `2^q × 2^q` matrix.
    pub fn build(&self, qubits: u32) -> Result<ComplexMatrix> {
        let q = qubits as usize;
        let dim = 1usize << q;
        if q == 0 {
            return Err(QocError::Config("at least one qubit is required".into()));
        }
        let m = match self {
            OperatorSpec::Identity => ComplexMatrix::identity(dim),
            OperatorSpec::Zero => ComplexMatrix::zeros(dim),
            OperatorSpec::Single { name, qubit } => {
                if *qubit >= q {
                    return Err(QocError::Config(format!("qubit {qubit} out of range for {q} qubits")));
                }
                on_qubit(*name, *qubit, q)
            }
            OperatorSpec::SumSingle { name } => (1..q).fold(on_qubit(*name, 0, q), |acc, k| {
                acc.add(&on_qubit(*name, k, q)).expect("equal dims")
            }),
            OperatorSpec::SumNeighbors { name } => {
                let mut acc = ComplexMatrix::zeros(dim);
                for k in 0..q.saturating_sub(1) {
                    let pair = on_qubit(*name, k, q).matmul(&on_qubit(*name, k + 1, q))?;
                    acc = acc.add(&pair)?;
                }
                acc
            }
            OperatorSpec::Tensor { factors } => {
                if factors.len() != q {
                    return Err(QocError::Config(format!(
                        "tensor has {} factors for {q} qubits",
                        factors.len()
                    )));
                }
                embed(&factors.iter().map(|f| f.matrix()).collect::<Vec<_>>())
            }
            OperatorSpec::TensorAll { name } => embed(&vec![name.matrix(); q]),
            OperatorSpec::Scale { factor, of } => of.build(qubits)?.scale(factor.value()),
            OperatorSpec::Sum { terms } => {
                let mut acc = ComplexMatrix::zeros(dim);
                for t in terms {
                    acc = acc.add(&t.build(qubits)?)?;
                }
                acc
            }
            OperatorSpec::Product { factors } => {
                let mut acc = ComplexMatrix::identity(dim);
                for f in factors {
                    acc = acc.matmul(&f.build(qubits)?)?;
                }
                acc
            }
            OperatorSpec::Dagger { of } => of.build(qubits)?.dagger(),
            OperatorSpec::Matrix { re, im } => {
                let m = ComplexMatrix::from_rows(&complex_rows("matrix", re, im.as_ref())?)?;
                if m.dim() != dim {
                    return Err(QocError::Config(format!(
                        "explicit matrix of dim {} for {q} qubits",
                        m.dim()
                    )));
                }
                m
            }
        };
        Ok(m)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StateSpec {
    /// Computational basis states `|i⟩`, one column each.
    Basis { indices: Vec<usize> },
    /// The whole computational basis, `s = 2^q` columns.
    AllBasis,
    /// Explicit column vectors, normalized on build.
    Vectors {
        re: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        im: Option<Vec<Vec<f64>>>,
    },
    /// `gate` applied to each column of `of`.
    GateImage { gate: OperatorSpec, of: Box<StateSpec> },
}

impl Default for StateSpec {
    fn default() -> Self {
        StateSpec::Basis { indices: vec![0] }
    }
}

impl StateSpec {
    pub fn build(&self, qubits: u32) -> Result<StateBlock> {
        let dim = 1usize << qubits;
        match self {
            StateSpec::Basis { indices } => StateBlock::basis(dim, indices),
            StateSpec::AllBasis => StateBlock::basis(dim, &(0..dim).collect::<Vec<_>>()),
            StateSpec::Vectors { re, im } => {
                let cols = complex_rows("vectors", re, im.as_ref())?;
                let block = StateBlock::from_columns(&cols)?;
                if block.dim() != dim {
                    return Err(QocError::Config(format!(
                        "state vectors of dim {} for {qubits} qubits",
                        block.dim()
                    )));
                }
                block.normalized()
            }
            StateSpec::GateImage { gate, of } => gate.build(qubits)?.apply(&of.build(qubits)?),
        }
    }
}
