//! Shared instance builders and oracles for integration tests.
#![allow(dead_code)]

use ndarray::Array2;
use qoc_core::harness::NamedOp;
use qoc_core::linalg::expm;
use qoc_core::{ComplexMatrix, ControlGrid, ControlProblem, CostSpec, HamiltonianModel, StateBlock, TimeGrid, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn c(rng: &mut ChaCha8Rng) -> C64 {
    C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
}

/// `(X + X†)/2` with uniform entries, scaled to unit Frobenius norm.
pub fn random_hermitian(rng: &mut ChaCha8Rng, dim: usize) -> ComplexMatrix {
    let x = Array2::from_shape_simple_fn((dim, dim), || c(rng));
    let h = (&x + &x.t().mapv(|z| z.conj())).mapv(|z| z * 0.5);
    let m = ComplexMatrix::from_array(h).unwrap();
    let n = m.frobenius_norm();
    m.scale(C64::new(1.0 / n, 0.0))
}

pub fn random_unitary(rng: &mut ChaCha8Rng, dim: usize) -> ComplexMatrix {
    let h = random_hermitian(rng, dim).scale(C64::new(0.0, -3.0));
    expm(&h).unwrap()
}

pub fn random_states(rng: &mut ChaCha8Rng, dim: usize, count: usize) -> StateBlock {
    let cols: Vec<Vec<C64>> = (0..count).map(|_| (0..dim).map(|_| c(rng)).collect()).collect();
    StateBlock::from_columns(&cols).unwrap().normalized().unwrap()
}

pub struct Instance {
    pub problem: ControlProblem,
    pub controls: ControlGrid,
    pub qubits: u32,
}

/// Random drift and two random control operators on `q` qubits over unit
/// duration. With `all_terms` every cost term gets a random positive weight,
/// otherwise only gate infidelity is active.
pub fn random_instance(seed: u64, qubits: u32, n_steps: usize, states: usize, all_terms: bool) -> Instance {
    let mut r = rng(seed);
    let d = 1usize << qubits;
    let model = HamiltonianModel::new(
        random_hermitian(&mut r, d).scale(C64::new(2.0, 0.0)),
        vec![random_hermitian(&mut r, d), random_hermitian(&mut r, d)],
    )
    .unwrap();
    let grid = TimeGrid::new(n_steps, 1.0 / n_steps as f64).unwrap();
    let psi0 = random_states(&mut r, d, states);
    let gate = random_unitary(&mut r, d);
    let cost = if all_terms {
        let w: [f64; 7] = std::array::from_fn(|_| r.random_range(0.2..1.0));
        let targets = random_states(&mut r, d, states);
        let forbidden = random_states(&mut r, d, 1);
        CostSpec::new(w, Some(gate), Some(targets), Some(forbidden)).unwrap()
    } else {
        CostSpec::gate(gate).unwrap()
    };
    let problem = ControlProblem::new(model, grid, psi0, cost).unwrap();
    let values = Array2::from_shape_simple_fn((2, n_steps + 1), || r.random_range(-1.0..1.0));
    let controls = ControlGrid::new(values, &problem.grid).unwrap();
    Instance {
        problem,
        controls,
        qubits,
    }
}

/// Embeds a single-qubit operator on `qubit` of `q` (qubit 0 leftmost).
pub fn on_qubit(op: NamedOp, qubit: usize, q: usize) -> ComplexMatrix {
    (0..q)
        .map(|k| if k == qubit { op.matrix() } else { NamedOp::I.matrix() })
        .reduce(|a, b| a.kron(&b))
        .unwrap()
}

/// `q` uncoupled qubits with `Σ_k 0.5 Z_k` drift and collective X and Y
/// drives, evolving `states` initial basis states toward the all-X gate.
pub fn qubit_register(qubits: u32, n_steps: usize, states: usize, seed: u64) -> Instance {
    let q = qubits as usize;
    let d = 1usize << q;
    let sum = |op| {
        (0..q)
            .map(|k| on_qubit(op, k, q))
            .reduce(|a, b| a.add(&b).unwrap())
            .unwrap()
    };
    let model = HamiltonianModel::new(
        sum(NamedOp::Z).scale(C64::new(0.5, 0.0)),
        vec![sum(NamedOp::X), sum(NamedOp::Y)],
    )
    .unwrap();
    let grid = TimeGrid::new(n_steps, 2.0 / n_steps as f64).unwrap();
    let gate = (0..q).map(|_| NamedOp::X.matrix()).reduce(|a, b| a.kron(&b)).unwrap();
    let psi0 = StateBlock::basis(d, &(0..states).collect::<Vec<_>>()).unwrap();
    let problem = ControlProblem::new(model, grid, psi0, CostSpec::gate(gate).unwrap()).unwrap();
    let mut r = rng(seed);
    let values = Array2::from_shape_simple_fn((2, n_steps + 1), || r.random_range(-0.5..0.5));
    let controls = ControlGrid::new(values, &problem.grid).unwrap();
    Instance {
        problem,
        controls,
        qubits,
    }
}

/// The single-qubit GRAPE instance: `H_0 = 0.5σ_z`, drives `σ_x`, `σ_y`,
/// target `σ_x`, `N = 100`, `dt = 0.05`.
pub fn grape_instance() -> ControlProblem {
    let model = HamiltonianModel::new(
        NamedOp::Z.matrix().scale(C64::new(0.5, 0.0)),
        vec![NamedOp::X.matrix(), NamedOp::Y.matrix()],
    )
    .unwrap();
    let grid = TimeGrid::new(100, 0.05).unwrap();
    let psi0 = StateBlock::basis(2, &[0]).unwrap();
    ControlProblem::new(model, grid, psi0, CostSpec::gate(NamedOp::X.matrix()).unwrap()).unwrap()
}

/// Fourth-order central differences of the forward-only total cost.
pub fn fd_gradient(problem: &ControlProblem, controls: &ControlGrid, h: f64) -> Array2<f64> {
    let base = controls.values();
    let cost = |i: usize, j: usize, delta: f64| {
        let mut v = base.clone();
        v[[i, j]] += delta;
        problem.evaluate(&controls.with_values(v).unwrap()).unwrap().1.total
    };
    Array2::from_shape_fn(base.dim(), |(i, j)| {
        (-cost(i, j, 2.0 * h) + 8.0 * cost(i, j, h) - 8.0 * cost(i, j, -h) + cost(i, j, -2.0 * h)) / (12.0 * h)
    })
}

pub fn inf_norm(a: &Array2<f64>) -> f64 {
    a.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

/// Largest `|a − f| / max(|f|, 1e-3·‖f‖_∞)`.
pub fn max_rel_error(analytic: &Array2<f64>, fd: &Array2<f64>) -> f64 {
    let floor = 1e-3 * inf_norm(fd);
    analytic
        .iter()
        .zip(fd.iter())
        .map(|(a, f)| (a - f).abs() / f.abs().max(floor))
        .fold(0.0, f64::max)
}

pub fn rel_inf(a: &Array2<f64>, reference: &Array2<f64>) -> f64 {
    inf_norm(&(a - reference)) / inf_norm(reference)
}
