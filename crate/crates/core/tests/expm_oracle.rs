//! Exponential, Fréchet derivative and VJP against independent oracles.

mod common;

use approx::assert_relative_eq;
use common::*;
use nalgebra::DMatrix;
use ndarray::Array2;
use proptest::prelude::*;
use qoc_core::linalg::{expm, expm_frechet, expm_vjp, frobenius_inner};
use qoc_core::{ComplexMatrix, C64};

fn to_na(m: &ComplexMatrix) -> DMatrix<C64> {
    let d = m.dim();
    DMatrix::from_fn(d, d, |i, j| m.get(i, j))
}

fn from_na(m: &DMatrix<C64>) -> ComplexMatrix {
    ComplexMatrix::from_array(Array2::from_shape_fn((m.nrows(), m.ncols()), |(i, j)| m[(i, j)])).unwrap()
}

fn max_abs_diff(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    a.sub(b).unwrap().as_array().iter().fold(0.0, |m, z| m.max(z.norm()))
}

fn random_general(seed: u64, dim: usize, scale: f64) -> ComplexMatrix {
    let mut r = rng(seed);
    let h1 = random_hermitian(&mut r, dim);
    let h2 = random_hermitian(&mut r, dim);
    h1.add(&h2.scale(C64::new(0.0, 1.0)))
        .unwrap()
        .scale(C64::new(scale, 0.0))
}

#[test]
fn expm_matches_nalgebra_on_general_matrices() {
    for (seed, dim, scale) in [(1, 2, 0.1), (2, 4, 1.0), (3, 8, 3.0), (4, 16, 10.0), (5, 8, 40.0)] {
        let a = random_general(seed, dim, scale);
        let ours = expm(&a).unwrap();
        let oracle = from_na(&to_na(&a).exp());
        let rel = max_abs_diff(&ours, &oracle) / oracle.one_norm();
        assert!(rel < 1e-12, "dim {dim} scale {scale}: {rel:e}");
    }
}

#[test]
fn expm_of_anti_hermitian_is_unitary() {
    let mut r = rng(11);
    for dim in [2, 4, 8, 16, 32] {
        let h = random_hermitian(&mut r, dim).scale(C64::new(0.0, -5.0));
        let u = expm(&h).unwrap();
        assert!(u.unitarity_error() < 1e-12, "dim {dim}: {:e}", u.unitarity_error());
    }
}

/// `L(A, E)` for Hermitian `A = V diag(λ) V†` is `V (Ẽ ∘ Γ) V†` with
/// `Ẽ = V† E V` and `Γ_ij = (e^λi − e^λj)/(λi − λj)`, `e^λi` on ties.
fn daleckii_krein(a: &ComplexMatrix, e: &ComplexMatrix, t: C64) -> ComplexMatrix {
    let eig = to_na(a).symmetric_eigen();
    let v = eig.eigenvectors;
    let lam: Vec<C64> = eig.eigenvalues.iter().map(|&l| t * l).collect();
    let et = v.adjoint() * to_na(e) * &v;
    let d = lam.len();
    let g = DMatrix::from_fn(d, d, |i, j| {
        let (li, lj) = (lam[i], lam[j]);
        let gamma = if (li - lj).norm() < 1e-12 {
            li.exp()
        } else {
            (li.exp() - lj.exp()) / (li - lj)
        };
        et[(i, j)] * gamma
    });
    from_na(&(&v * g * v.adjoint()))
}

#[test]
fn frechet_matches_daleckii_krein() {
    let mut r = rng(21);
    for dim in [2, 4, 8] {
        let h = random_hermitian(&mut r, dim).scale(C64::new(3.0, 0.0));
        let e = random_general(100 + dim as u64, dim, 1.0);
        for t in [C64::new(1.0, 0.0), C64::new(0.0, -1.0)] {
            let a = h.scale(t);
            let ours = expm_frechet(&a, &e).unwrap();
            let oracle = daleckii_krein(&h, &e, t);
            let rel = max_abs_diff(&ours, &oracle) / oracle.frobenius_norm();
            assert!(rel < 1e-11, "dim {dim} t {t}: {rel:e}");
        }
    }
}

#[test]
fn frechet_matches_central_difference() {
    let a = random_general(31, 4, 1.5);
    let e = random_general(32, 4, 1.0);
    let h = 1e-4;
    let plus = expm(&a.add(&e.scale(C64::new(h, 0.0))).unwrap()).unwrap();
    let minus = expm(&a.sub(&e.scale(C64::new(h, 0.0))).unwrap()).unwrap();
    let fd = plus.sub(&minus).unwrap().scale(C64::new(0.5 / h, 0.0));
    let ours = expm_frechet(&a, &e).unwrap();
    assert!(max_abs_diff(&ours, &fd) / fd.frobenius_norm() < 1e-7);
}

#[test]
fn frechet_is_exact_for_large_directions() {
    let a = random_general(41, 4, 0.5);
    let e = random_general(42, 4, 1.0);
    let small = expm_frechet(&a, &e).unwrap();
    let big = expm_frechet(&a, &e.scale(C64::new(1e6, 0.0))).unwrap();
    let rel = max_abs_diff(&big.scale(C64::new(1e-6, 0.0)), &small) / small.frobenius_norm();
    assert!(rel < 1e-13, "{rel:e}");
}

#[test]
fn vjp_pairs_with_frechet() {
    let a = random_general(51, 4, 2.0);
    let e = random_general(52, 4, 1.0);
    let g = random_general(53, 4, 1.0);
    let lhs = frobenius_inner(&g, &expm_frechet(&a, &e).unwrap()).unwrap().re;
    let rhs = frobenius_inner(&expm_vjp(&a, &g).unwrap(), &e).unwrap().re;
    assert_relative_eq!(lhs, rhs, max_relative = 1e-10);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn exp_of_negation_is_inverse(seed in 0u64..1_000_000, dim_log in 1u32..4, scale in 0.01f64..20.0) {
        let a = random_general(seed, 1 << dim_log, scale);
        let neg = a.scale(C64::new(-1.0, 0.0));
        let product = expm(&a).unwrap().matmul(&expm(&neg).unwrap()).unwrap();
        let id = ComplexMatrix::identity(a.dim());
        let cond = expm(&a).unwrap().one_norm() * expm(&neg).unwrap().one_norm();
        prop_assert!(max_abs_diff(&product, &id) <= 1e-13 * cond.max(1.0));
    }

    #[test]
    fn commuting_arguments_add(seed in 0u64..1_000_000, s in -3.0f64..3.0, t in -3.0f64..3.0) {
        let mut r = rng(seed);
        let h = random_hermitian(&mut r, 4).scale(C64::new(0.0, 2.0));
        let lhs = expm(&h.scale(C64::new(s + t, 0.0))).unwrap();
        let rhs = expm(&h.scale(C64::new(s, 0.0))).unwrap().matmul(&expm(&h.scale(C64::new(t, 0.0))).unwrap()).unwrap();
        prop_assert!(max_abs_diff(&lhs, &rhs) < 1e-12);
    }
}
