//! Dense complex linear algebra for propagators and state blocks.
//!
//! The matrix exponential is a fixed degree-13 diagonal Padé approximant with
//! scaling and squaring. Its Fréchet derivative comes from exponentiating the
//! 2D×2D block `[[A, E], [0, A]]`, whose upper-right block is `L(A, E)`, so the
//! derivative is consistent with [`expm`] to machine precision. The adjoint of
//! `E ↦ L(A, E)` under the real Frobenius pairing is `G ↦ L(A†, G)`.

use ndarray::{s, Array2, ArrayView2, Zip};
use num_complex::Complex64;

use crate::error::{QocError, Result};

pub type C64 = Complex64;

/// Hermiticity tolerance (absolute, max-entry).
pub const TAU_HERM: f64 = 1e-12;
/// Column-norm tolerance for physical states.
pub const TAU_NORM: f64 = 1e-10;

/// Unitarity tolerance `1e-10·D` on `‖U†U − I‖_F`.
pub fn tau_unit(dim: usize) -> f64 {
    1e-10 * dim as f64
}

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);
#[cfg(test)]
pub(crate) const I: C64 = C64::new(0.0, 1.0);

/// Dense square complex matrix (Hamiltonians, step unitaries, propagators).
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix {
    data: Array2<C64>,
}

/// `D × s` block of state vectors stored column-wise.
#[derive(Clone, Debug, PartialEq)]
pub struct StateBlock {
    data: Array2<C64>,
}

impl ComplexMatrix {
    pub fn from_array(data: Array2<C64>) -> Result<Self> {
        let (r, c) = data.dim();
        if r == 0 || r != c {
            return Err(QocError::dims(
                "ComplexMatrix",
                format!("expected non-empty square matrix, got {r}x{c}"),
            ));
        }
        Ok(Self { data })
    }

    /// Builds a matrix from row-major entries.
    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let d = rows.len();
        if rows.iter().any(|r| r.len() != d) {
            return Err(QocError::dims("ComplexMatrix::from_rows", "ragged or non-square rows"));
        }
        let flat: Vec<C64> = rows.iter().flatten().copied().collect();
        let data = Array2::from_shape_vec((d, d), flat)
            .map_err(|e| QocError::dims("ComplexMatrix::from_rows", e.to_string()))?;
        Self::from_array(data)
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim > 0, "matrix dimension must be positive");
        Self {
            data: Array2::zeros((dim, dim)),
        }
    }

    pub fn identity(dim: usize) -> Self {
        assert!(dim > 0, "matrix dimension must be positive");
        Self { data: Array2::eye(dim) }
    }

    pub fn diag(entries: &[C64]) -> Self {
        let mut m = Self::zeros(entries.len());
        for (i, &e) in entries.iter().enumerate() {
            m.data[[i, i]] = e;
        }
        m
    }

    pub(crate) fn from_array_unchecked(data: Array2<C64>) -> Self {
        debug_assert_eq!(data.nrows(), data.ncols());
        Self { data }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    #[inline]
    pub fn as_array(&self) -> &Array2<C64> {
        &self.data
    }

    pub fn into_array(self) -> Array2<C64> {
        self.data
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.data[[row, col]]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Conjugate transpose.
    pub fn dagger(&self) -> Self {
        Self {
            data: dagger_array(self.data.view()),
        }
    }

    pub fn scale(&self, factor: C64) -> Self {
        Self {
            data: &self.data * factor,
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same("add", other)?;
        Ok(Self {
            data: &self.data + &other.data,
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same("sub", other)?;
        Ok(Self {
            data: &self.data - &other.data,
        })
    }

    /// `self += factor · other`
    pub fn add_scaled(&mut self, factor: C64, other: &Self) -> Result<()> {
        self.check_same("add_scaled", other)?;
        self.data.scaled_add(factor, &other.data);
        Ok(())
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        self.check_same("matmul", other)?;
        Ok(Self {
            data: self.data.dot(&other.data),
        })
    }

    /// Applies the matrix to every column of a state block.
    pub fn apply(&self, states: &StateBlock) -> Result<StateBlock> {
        if states.dim() != self.dim() {
            return Err(QocError::dims(
                "matmul",
                format!(
                    "{}x{} times {}x{}",
                    self.dim(),
                    self.dim(),
                    states.dim(),
                    states.count()
                ),
            ));
        }
        Ok(StateBlock {
            data: self.data.dot(&states.data),
        })
    }

    pub fn trace(&self) -> C64 {
        self.data.diag().sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        frob_norm_array(self.data.view())
    }

    /// Maximum absolute column sum.
    pub fn one_norm(&self) -> f64 {
        one_norm_array(self.data.view())
    }

    /// `‖M†M − I‖_F`
    pub fn unitarity_error(&self) -> f64 {
        let prod = dagger_array(self.data.view()).dot(&self.data);
        let eye = Array2::<C64>::eye(self.dim());
        frob_norm_array((&prod - &eye).view())
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.unitarity_error() <= tol
    }

    /// Largest entry of `|M − M†|`.
    pub fn hermiticity_error(&self) -> f64 {
        let d = self.dim();
        let mut worst = 0.0f64;
        for i in 0..d {
            for j in i..d {
                worst = worst.max((self.data[[i, j]] - self.data[[j, i]].conj()).norm());
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_error() <= tol
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &Self) -> Self {
        let (a, b) = (self.dim(), other.dim());
        let mut out = Array2::zeros((a * b, a * b));
        for i in 0..a {
            for j in 0..a {
                let aij = self.data[[i, j]];
                if aij == ZERO {
                    continue;
                }
                let mut blk = out.slice_mut(s![i * b..(i + 1) * b, j * b..(j + 1) * b]);
                Zip::from(&mut blk).and(&other.data).for_each(|o, &x| *o = aij * x);
            }
        }
        Self { data: out }
    }

    fn check_same(&self, op: &'static str, other: &Self) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(QocError::dims(op, format!("{} vs {}", self.dim(), other.dim())));
        }
        Ok(())
    }
}

impl StateBlock {
    pub fn from_array(data: Array2<C64>) -> Result<Self> {
        let (r, c) = data.dim();
        if r == 0 || c == 0 {
            return Err(QocError::dims("StateBlock", format!("empty block {r}x{c}")));
        }
        Ok(Self { data })
    }

    /// Builds a block from column vectors of equal length.
    pub fn from_columns(cols: &[Vec<C64>]) -> Result<Self> {
        let s = cols.len();
        let d = cols.first().map_or(0, Vec::len);
        if s == 0 || d == 0 || cols.iter().any(|c| c.len() != d) {
            return Err(QocError::dims("StateBlock::from_columns", "empty or ragged columns"));
        }
        let mut data = Array2::zeros((d, s));
        for (c, col) in cols.iter().enumerate() {
            for (r, &z) in col.iter().enumerate() {
                data[[r, c]] = z;
            }
        }
        Ok(Self { data })
    }

    /// Computational basis states `|i⟩` as columns.
    pub fn basis(dim: usize, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(QocError::Invalid("basis state list is empty".into()));
        }
        let mut data = Array2::zeros((dim, indices.len()));
        for (c, &i) in indices.iter().enumerate() {
            if i >= dim {
                return Err(QocError::OutOfRange {
                    what: "basis index",
                    detail: format!("{i} >= {dim}"),
                });
            }
            data[[i, c]] = ONE;
        }
        Self::from_array(data)
    }

    pub(crate) fn from_array_unchecked(data: Array2<C64>) -> Self {
        Self { data }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    /// Number of states `s`.
    #[inline]
    pub fn count(&self) -> usize {
        self.data.ncols()
    }

    #[inline]
    pub fn as_array(&self) -> &Array2<C64> {
        &self.data
    }

    pub fn into_array(self) -> Array2<C64> {
        self.data
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.data[[row, col]]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn column_norms(&self) -> Vec<f64> {
        self.data
            .columns()
            .into_iter()
            .map(|c| c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt())
            .collect()
    }

    /// Every column has unit norm within [`TAU_NORM`].
    pub fn is_normalized(&self) -> bool {
        self.column_norms().iter().all(|n| (n - 1.0).abs() <= TAU_NORM)
    }

    /// Rescales each column to unit norm.
    pub fn normalized(&self) -> Result<Self> {
        let mut data = self.data.clone();
        for (mut col, n) in data.columns_mut().into_iter().zip(self.column_norms()) {
            if !(n > 0.0 && n.is_finite()) {
                return Err(QocError::Invalid("cannot normalize a zero or non-finite state".into()));
            }
            col.mapv_inplace(|z| z / n);
        }
        Ok(Self { data })
    }

    /// Per-column overlaps `⟨self_c | other_c⟩`. A single-column `self` is
    /// broadcast against every column of `other`.
    pub fn column_overlaps(&self, other: &StateBlock) -> Result<Vec<C64>> {
        if self.dim() != other.dim() || (self.count() != other.count() && self.count() != 1) {
            return Err(QocError::dims(
                "column_overlaps",
                format!(
                    "{}x{} against {}x{}",
                    self.dim(),
                    self.count(),
                    other.dim(),
                    other.count()
                ),
            ));
        }
        Ok((0..other.count())
            .map(|c| {
                let a = self.data.column(if self.count() == 1 { 0 } else { c });
                let b = other.data.column(c);
                a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
            })
            .collect())
    }

    pub fn frobenius_norm(&self) -> f64 {
        frob_norm_array(self.data.view())
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        if self.data.dim() != other.data.dim() {
            return Err(QocError::dims("StateBlock::sub", "shape mismatch"));
        }
        Ok(Self {
            data: &self.data - &other.data,
        })
    }
}

/// Matrix product of two square matrices.
pub fn matmul(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    a.matmul(b)
}

pub fn dagger(m: &ComplexMatrix) -> ComplexMatrix {
    m.dagger()
}

pub fn trace(m: &ComplexMatrix) -> C64 {
    m.trace()
}

pub fn frobenius_norm(m: &ComplexMatrix) -> f64 {
    m.frobenius_norm()
}

/// `⟨A, B⟩_F = Σ conj(A_ij)·B_ij`
pub fn frobenius_inner(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<C64> {
    a.check_same("frobenius_inner", b)?;
    Ok(frob_inner_array(a.data.view(), b.data.view()))
}

/// Matrix exponential by scaling and squaring with a degree-13 Padé approximant.
pub fn expm(a: &ComplexMatrix) -> Result<ComplexMatrix> {
    if !a.is_finite() {
        return Err(QocError::NonFinite("expm input"));
    }
    Ok(ComplexMatrix {
        data: expm_array(a.data.view())?,
    })
}

/// Fréchet derivative `L(A, E)` of the exponential at `A` in direction `E`.
pub fn expm_frechet(a: &ComplexMatrix, e: &ComplexMatrix) -> Result<ComplexMatrix> {
    a.check_same("expm_frechet", e)?;
    if !a.is_finite() || !e.is_finite() {
        return Err(QocError::NonFinite("expm_frechet input"));
    }
    let (_, l) = expm_with_frechet_array(a.data.view(), e.data.view())?;
    Ok(ComplexMatrix { data: l })
}

/// Vector-Jacobian product of `expm` at `A`: returns `Ā = L(A†, Ḡ)`, the
/// adjoint of `E ↦ L(A, E)` with respect to `Re⟨·,·⟩_F`.
pub fn expm_vjp(a: &ComplexMatrix, cotangent: &ComplexMatrix) -> Result<ComplexMatrix> {
    a.check_same("expm_vjp", cotangent)?;
    expm_frechet(&a.dagger(), cotangent)
}

// ---- array-level kernels -------------------------------------------------

pub(crate) fn dagger_array(a: ArrayView2<C64>) -> Array2<C64> {
    a.t().mapv(|z| z.conj())
}

pub(crate) fn frob_inner_array(a: ArrayView2<C64>, b: ArrayView2<C64>) -> C64 {
    let mut acc = ZERO;
    Zip::from(a).and(b).for_each(|x, y| acc += x.conj() * y);
    acc
}

pub(crate) fn frob_norm_array(a: ArrayView2<C64>) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn one_norm_array(a: ArrayView2<C64>) -> f64 {
    a.columns()
        .into_iter()
        .map(|c| c.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

const THETA_13: f64 = 5.371_920_351_148_152;

const PADE_13: [f64; 14] = [
    64_764_752_532_480_000.0,
    32_382_376_266_240_000.0,
    7_771_770_303_897_600.0,
    1_187_353_796_428_800.0,
    129_060_195_264_000.0,
    10_559_470_521_600.0,
    670_442_572_800.0,
    33_522_128_640.0,
    1_323_241_920.0,
    40_840_800.0,
    960_960.0,
    16_380.0,
    182.0,
    1.0,
];

/// Number of squarings `max(0, ⌈log₂(‖A‖₁/θ₁₃)⌉)`.
fn squarings(norm1: f64) -> i32 {
    if norm1 <= THETA_13 {
        0
    } else {
        (norm1 / THETA_13).log2().ceil().max(0.0) as i32
    }
}

pub(crate) fn expm_array(a: ArrayView2<C64>) -> Result<Array2<C64>> {
    let n = a.nrows();
    let s = squarings(one_norm_array(a));
    let scaled = a.mapv(|z| z * 0.5f64.powi(s));
    let mut r = pade13(&scaled)?;
    for _ in 0..s {
        r = r.dot(&r);
    }
    debug_assert_eq!(r.nrows(), n);
    if !r.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        return Err(QocError::NonFinite("expm result"));
    }
    Ok(r)
}

/// Returns `(e^A, L(A, E))` from the exponential of `[[A, E], [0, A]]`.
///
/// `E` enters scaled by a power of two `α` with `α‖E‖₁ ≤ ‖A‖₁`, so the block
/// norm, and with it the squaring count and the roundoff in the `e^A` block,
/// stays that of `A`. `L` is linear in `E` and the rescaling is exact.
pub(crate) fn expm_with_frechet_array(a: ArrayView2<C64>, e: ArrayView2<C64>) -> Result<(Array2<C64>, Array2<C64>)> {
    let n = a.nrows();
    let (na, ne) = (one_norm_array(a), one_norm_array(e));
    let k = if na > 0.0 && ne > na {
        (ne / na).log2().ceil() as i32
    } else {
        0
    };
    let mut block = Array2::zeros((2 * n, 2 * n));
    block.slice_mut(s![..n, ..n]).assign(&a);
    block.slice_mut(s![n.., n..]).assign(&a);
    block.slice_mut(s![..n, n..]).assign(&e.mapv(|z| z * 2f64.powi(-k)));
    let big = expm_array(block.view())?;
    Ok((
        big.slice(s![..n, ..n]).to_owned(),
        big.slice(s![..n, n..]).mapv(|z| z * 2f64.powi(k)),
    ))
}

fn pade13(a: &Array2<C64>) -> Result<Array2<C64>> {
    let n = a.nrows();
    let b = &PADE_13;
    let eye = Array2::<C64>::eye(n);
    let a2 = a.dot(a);
    let a4 = a2.dot(&a2);
    let a6 = a4.dot(&a2);

    let lin = |c6: f64, c4: f64, c2: f64, c0: f64| -> Array2<C64> {
        let mut m = &a6 * C64::from(c6);
        m.scaled_add(C64::from(c4), &a4);
        m.scaled_add(C64::from(c2), &a2);
        if c0 != 0.0 {
            m.scaled_add(C64::from(c0), &eye);
        }
        m
    };

    let mut u_inner = a6.dot(&lin(b[13], b[11], b[9], 0.0));
    u_inner += &lin(b[7], b[5], b[3], b[1]);
    let u = a.dot(&u_inner);

    let mut v = a6.dot(&lin(b[12], b[10], b[8], 0.0));
    v += &lin(b[6], b[4], b[2], b[0]);

    let p = &v + &u;
    let q = &v - &u;
    lu_solve(q, p)
}

/// Solves `A X = B` by LU factorization with partial pivoting. Consumes both.
pub(crate) fn lu_solve(a: Array2<C64>, b: Array2<C64>) -> Result<Array2<C64>> {
    let n = a.nrows();
    let m = b.ncols();
    let mut a = a.as_standard_layout().into_owned();
    let mut b = b.as_standard_layout().into_owned();
    let a = a.as_slice_mut().expect("standard layout");
    let bs = b.as_slice_mut().expect("standard layout");
    for k in 0..n {
        let (piv, pmax) =
            (k..n)
                .map(|i| (i, a[i * n + k].norm_sqr()))
                .fold((k, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if !pmax.is_finite() || pmax <= 0.0 {
            return Err(QocError::Numerical("singular Padé denominator".into()));
        }
        if piv != k {
            for j in 0..n {
                a.swap(k * n + j, piv * n + j);
            }
            for j in 0..m {
                bs.swap(k * m + j, piv * m + j);
            }
        }
        let pivot = a[k * n + k];
        let (top, rest) = a.split_at_mut((k + 1) * n);
        let arow = &top[k * n..];
        let (btop, brest) = bs.split_at_mut((k + 1) * m);
        let brow = &btop[k * m..];
        for i in 0..(n - k - 1) {
            let row = &mut rest[i * n..(i + 1) * n];
            let f = row[k] / pivot;
            if f == ZERO {
                continue;
            }
            row[k] = f;
            for (x, &t) in row[k + 1..].iter_mut().zip(&arow[k + 1..]) {
                *x -= f * t;
            }
            for (x, &t) in brest[i * m..(i + 1) * m].iter_mut().zip(brow) {
                *x -= f * t;
            }
        }
    }
    for k in (0..n).rev() {
        let pivot = a[k * n + k];
        let (head, tail) = bs.split_at_mut((k + 1) * m);
        let bk = &mut head[k * m..];
        for i in (k + 1)..n {
            let aki = a[k * n + i];
            let bi = &tail[(i - k - 1) * m..(i - k) * m];
            for (x, &t) in bk.iter_mut().zip(bi) {
                *x -= aki * t;
            }
        }
        for x in bk.iter_mut() {
            *x /= pivot;
        }
    }
    Ok(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{LN_2, PI};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn sigma_x() -> ComplexMatrix {
        ComplexMatrix::from_rows(&[vec![ZERO, ONE], vec![ONE, ZERO]]).unwrap()
    }

    fn sigma_y() -> ComplexMatrix {
        ComplexMatrix::from_rows(&[vec![ZERO, -I], vec![I, ZERO]]).unwrap()
    }

    fn max_abs_diff(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
        a.sub(b)
            .unwrap()
            .as_array()
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    #[test]
    fn matmul_examples() {
        let m = sigma_y();
        assert_eq!(ComplexMatrix::identity(2).matmul(&m).unwrap(), m);

        let ix = sigma_x().scale(I);
        let sq = ix.matmul(&ix).unwrap();
        assert_eq!(sq, ComplexMatrix::identity(2).scale(c(-1.0, 0.0)));

        let a = ComplexMatrix::diag(&[c(2.0, 0.0), c(3.0, 0.0)]);
        let v = StateBlock::from_columns(&[vec![ONE, ONE]]).unwrap();
        let out = a.apply(&v).unwrap();
        assert_eq!(out.get(0, 0), c(2.0, 0.0));
        assert_eq!(out.get(1, 0), c(3.0, 0.0));
    }

    #[test]
    fn matmul_rejects_mismatch() {
        let a = ComplexMatrix::identity(2);
        let b = ComplexMatrix::identity(3);
        assert!(matches!(a.matmul(&b), Err(QocError::DimensionMismatch { .. })));
        let v = StateBlock::basis(3, &[0]).unwrap();
        assert!(a.apply(&v).is_err());
    }

    #[test]
    fn dagger_examples() {
        assert_eq!(dagger(&ComplexMatrix::identity(3)), ComplexMatrix::identity(3));
        assert_eq!(dagger(&sigma_y()), sigma_y());
        let n = ComplexMatrix::from_rows(&[vec![ZERO, ONE], vec![ZERO, ZERO]]).unwrap();
        let nd = ComplexMatrix::from_rows(&[vec![ZERO, ZERO], vec![ONE, ZERO]]).unwrap();
        assert_eq!(dagger(&n), nd);
        assert_eq!(dagger(&dagger(&n)), n);
    }

    #[test]
    fn expm_examples() {
        assert_eq!(expm(&ComplexMatrix::zeros(3)).unwrap(), ComplexMatrix::identity(3));

        let a = sigma_x().scale(c(0.0, -PI));
        let e = expm(&a).unwrap();
        assert!(max_abs_diff(&e, &ComplexMatrix::identity(2).scale(c(-1.0, 0.0))) < 1e-14);

        let d = ComplexMatrix::diag(&[c(LN_2, 0.0), ZERO]);
        let e = expm(&d).unwrap();
        assert!(max_abs_diff(&e, &ComplexMatrix::diag(&[c(2.0, 0.0), ONE])) < 1e-14);
    }

    #[test]
    fn expm_rejects_non_finite() {
        let mut a = ComplexMatrix::zeros(2);
        a.data[[0, 1]] = c(f64::NAN, 0.0);
        assert!(matches!(expm(&a), Err(QocError::NonFinite(_))));
    }

    #[test]
    fn expm_large_norm_uses_squaring() {
        // e^{-i 40 σ_x} = cos(40) I - i sin(40) σ_x
        let a = sigma_x().scale(c(0.0, -40.0));
        let e = expm(&a).unwrap();
        let expect = ComplexMatrix::identity(2)
            .scale(c(40f64.cos(), 0.0))
            .add(&sigma_x().scale(c(0.0, -(40f64.sin()))))
            .unwrap();
        assert!(max_abs_diff(&e, &expect) < 1e-12);
    }

    #[test]
    fn frechet_examples() {
        let e = sigma_y().add(&sigma_x().scale(c(0.3, 0.7))).unwrap();
        let l = expm_frechet(&ComplexMatrix::zeros(2), &e).unwrap();
        assert!(max_abs_diff(&l, &e) < 1e-15);

        let a = sigma_x().scale(c(0.2, 0.5));
        let l = expm_frechet(&a, &ComplexMatrix::zeros(2)).unwrap();
        assert_eq!(l.frobenius_norm(), 0.0);

        // Daleckii–Krein on diagonal A: L_12 = E_12 (e^a − e^b)/(a − b)
        let (ea, eb) = (c(0.4, -0.3), c(-1.1, 0.2));
        let a = ComplexMatrix::diag(&[ea, eb]);
        let e12 = c(0.7, -0.2);
        let e = ComplexMatrix::from_rows(&[vec![c(0.1, 0.0), e12], vec![c(0.5, 0.5), ZERO]]).unwrap();
        let l = expm_frechet(&a, &e).unwrap();
        let expect = e12 * (ea.exp() - eb.exp()) / (ea - eb);
        assert!((l.get(0, 1) - expect).norm() < 1e-14);
    }

    #[test]
    fn vjp_examples() {
        let g = sigma_y().scale(c(0.5, 0.25));
        let v = expm_vjp(&ComplexMatrix::zeros(2), &g).unwrap();
        assert!(max_abs_diff(&v, &g) < 1e-15);
        let v = expm_vjp(&sigma_x(), &ComplexMatrix::zeros(2)).unwrap();
        assert_eq!(v.frobenius_norm(), 0.0);
    }

    #[test]
    fn trace_and_norms() {
        assert_eq!(trace(&ComplexMatrix::identity(4)), c(4.0, 0.0));
        assert_eq!(trace(&sigma_x()), ZERO);
        let a = sigma_y().scale(c(1.0, 2.0));
        let ip = frobenius_inner(&a, &a).unwrap();
        assert!(ip.im.abs() < 1e-15 && ip.re >= 0.0);
        assert!((ip.re - a.frobenius_norm().powi(2)).abs() < 1e-13);
        assert!(frobenius_inner(&a, &ComplexMatrix::identity(3)).is_err());
    }

    #[test]
    fn kron_of_paulis() {
        let zz = sigma_x().kron(&ComplexMatrix::identity(2));
        assert_eq!(zz.dim(), 4);
        assert_eq!(zz.get(0, 2), ONE);
        assert_eq!(zz.get(1, 3), ONE);
        assert_eq!(zz.get(0, 1), ZERO);
    }

    #[test]
    fn lu_solve_recovers_rhs() {
        let a = Array2::from_shape_vec(
            (3, 3),
            vec![
                c(0.0, 0.0),
                c(2.0, 1.0),
                c(1.0, 0.0),
                c(1.0, -1.0),
                c(0.5, 0.0),
                c(0.0, 3.0),
                c(4.0, 0.0),
                c(0.0, 0.0),
                c(1.0, 1.0),
            ],
        )
        .unwrap();
        let x = Array2::from_shape_fn((3, 2), |(i, j)| c(i as f64 - j as f64, 0.5 * j as f64));
        let b = a.dot(&x);
        let solved = lu_solve(a, b).unwrap();
        for (p, q) in solved.iter().zip(x.iter()) {
            assert!((p - q).norm() < 1e-13);
        }
    }

    #[test]
    fn state_block_helpers() {
        let b = StateBlock::basis(4, &[0, 3]).unwrap();
        assert!(b.is_normalized());
        assert_eq!(b.count(), 2);
        assert!(StateBlock::basis(4, &[4]).is_err());
        let t = StateBlock::basis(4, &[3]).unwrap();
        let ov = t.column_overlaps(&b).unwrap();
        assert_eq!(ov, vec![ZERO, ONE]);
    }
}
