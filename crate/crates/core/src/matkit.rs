//! Dense complex linear algebra for small operators.
//!
//! Everything here works on [`Matrix`], a `DMatrix<Complex<f64>>`. Hermitian
//! spectra come back sorted in descending order with each eigenvector's
//! first non-negligible component rotated onto the positive real axis, so
//! decompositions are reproducible run to run.

use std::cmp::Ordering;

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{dim_mismatch, Error, Result};
use crate::tol::Tolerance;

pub type C64 = Complex<f64>;
pub type Matrix = DMatrix<C64>;

/// Entries below this magnitude are skipped when picking the phase reference.
const PHASE_REF_CUTOFF: f64 = 1e-10;

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    Complex::new(re, im)
}

#[inline]
pub fn cr(re: f64) -> C64 {
    Complex::new(re, 0.0)
}

pub fn identity(dim: usize) -> Matrix {
    Matrix::identity(dim, dim)
}

pub fn zeros(rows: usize, cols: usize) -> Matrix {
    Matrix::zeros(rows, cols)
}

/// Builds a matrix from real row-major data.
pub fn real_matrix(rows: usize, cols: usize, data: &[f64]) -> Matrix {
    assert_eq!(data.len(), rows * cols);
    Matrix::from_fn(rows, cols, |i, j| cr(data[i * cols + j]))
}

pub fn diag(values: &[f64]) -> Matrix {
    let d = values.len();
    Matrix::from_fn(d, d, |i, j| if i == j { cr(values[i]) } else { C64::default() })
}

/// Column vector from complex amplitudes.
pub fn ket(amplitudes: &[C64]) -> DVector<C64> {
    DVector::from_column_slice(amplitudes)
}

/// Computational basis vector |index⟩ in dimension `dim`.
pub fn basis(dim: usize, index: usize) -> DVector<C64> {
    let mut v = DVector::zeros(dim);
    v[index] = cr(1.0);
    v
}

/// |u⟩⟨v|
pub fn outer(u: &DVector<C64>, v: &DVector<C64>) -> Matrix {
    u * v.adjoint()
}

/// |v⟩⟨v|
pub fn projector(v: &DVector<C64>) -> Matrix {
    outer(v, v)
}

/// Matrix unit |i⟩⟨j| in dimension `dim`.
pub fn matrix_unit(dim: usize, i: usize, j: usize) -> Matrix {
    let mut m = zeros(dim, dim);
    m[(i, j)] = cr(1.0);
    m
}

pub fn pauli_x() -> Matrix {
    real_matrix(2, 2, &[0.0, 1.0, 1.0, 0.0])
}

pub fn pauli_y() -> Matrix {
    Matrix::from_row_slice(2, 2, &[cr(0.0), c(0.0, -1.0), c(0.0, 1.0), cr(0.0)])
}

pub fn pauli_z() -> Matrix {
    diag(&[1.0, -1.0])
}

pub fn trace(m: &Matrix) -> C64 {
    m.trace()
}

/// tr(a·b) without forming the product.
pub fn trace_product(a: &Matrix, b: &Matrix) -> C64 {
    assert_eq!(a.ncols(), b.nrows());
    assert_eq!(a.nrows(), b.ncols());
    let mut acc = C64::default();
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

pub fn frobenius_norm(m: &Matrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Largest entry magnitude.
pub fn max_abs(m: &Matrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Schatten-1 norm (sum of singular values).
pub fn trace_norm(m: &Matrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().singular_values().iter().sum()
}

pub fn is_finite(m: &Matrix) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

pub fn ensure_finite(m: &Matrix) -> Result<()> {
    if is_finite(m) {
        Ok(())
    } else {
        Err(Error::NotFinite)
    }
}

pub fn ensure_square(m: &Matrix, dim: usize) -> Result<()> {
    if m.nrows() != dim || m.ncols() != dim {
        return Err(dim_mismatch(
            format!("{dim}x{dim}"),
            format!("{}x{}", m.nrows(), m.ncols()),
        ));
    }
    Ok(())
}

/// max |A − A†| entrywise.
pub fn hermitian_residual(m: &Matrix) -> f64 {
    max_abs(&(m - m.adjoint()))
}

/// (A + A†)/2
pub fn hermitize(m: &Matrix) -> Matrix {
    (m + m.adjoint()).scale(0.5)
}

/// Checks Hermiticity relative to the matrix scale (absolute below unit scale).
pub fn ensure_hermitian(m: &Matrix, tol: &Tolerance) -> Result<()> {
    ensure_finite(m)?;
    if m.nrows() != m.ncols() {
        return Err(dim_mismatch(
            "square matrix",
            format!("{}x{}", m.nrows(), m.ncols()),
        ));
    }
    let residual = hermitian_residual(m);
    if residual > tol.eps * max_abs(m).max(1.0) {
        return Err(Error::NotHermitian { residual });
    }
    Ok(())
}

/// Spectral decomposition A = V Λ V† of a Hermitian matrix.
#[derive(Debug, Clone)]
pub struct HermitianDecomposition {
    /// Sorted descending.
    pub eigenvalues: Vec<f64>,
    /// Orthonormal eigenvectors as columns, in eigenvalue order.
    pub eigenvectors: Matrix,
}

impl HermitianDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvector(&self, k: usize) -> DVector<C64> {
        self.eigenvectors.column(k).into_owned()
    }

    /// Tie groups may be reordered by eigenvector, so extremes are folded rather than indexed.
    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues.iter().copied().reduce(f64::max).unwrap_or(0.0)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues.iter().copied().reduce(f64::min).unwrap_or(0.0)
    }

    /// Σ f(λ_k) |v_k⟩⟨v_k|
    pub fn map_spectrum(&self, f: impl Fn(f64) -> f64) -> Matrix {
        let d = self.dim();
        let mut out = zeros(d, d);
        for (k, &lambda) in self.eigenvalues.iter().enumerate() {
            let w = f(lambda);
            if w == 0.0 {
                continue;
            }
            let v = self.eigenvectors.column(k);
            out += (v * v.adjoint()).scale(w);
        }
        out
    }

    pub fn reconstruct(&self) -> Matrix {
        self.map_spectrum(|l| l)
    }
}

/// Hermitian eigendecomposition with descending eigenvalues.
///
/// Eigenvectors are phase-normalized (first component above 1e-10 made
/// positive real); eigenvalues within `tol.eps` of each other are ordered by
/// the lexicographic order of their eigenvectors' entries.
pub fn hermitian_eigen(a: &Matrix, tol: &Tolerance) -> Result<HermitianDecomposition> {
    ensure_hermitian(a, tol)?;
    let d = a.nrows();
    if d == 0 {
        return Ok(HermitianDecomposition {
            eigenvalues: Vec::new(),
            eigenvectors: zeros(0, 0),
        });
    }
    let eig = hermitize(a).symmetric_eigen();
    let mut pairs: Vec<(f64, DVector<C64>)> = (0..d)
        .map(|k| {
            let mut v = eig.eigenvectors.column(k).into_owned();
            let norm = v.norm();
            if norm > 0.0 {
                v /= cr(norm);
            }
            normalize_phase(&mut v);
            (eig.eigenvalues[k], v)
        })
        .collect();

    pairs.sort_by(|x, y| y.0.total_cmp(&x.0));
    let mut start = 0;
    while start < pairs.len() {
        let mut end = start + 1;
        while end < pairs.len() && (pairs[end - 1].0 - pairs[end].0).abs() <= tol.eps {
            end += 1;
        }
        if end - start > 1 {
            pairs[start..end].sort_by(|x, y| lexicographic(&x.1, &y.1));
        }
        start = end;
    }

    let mut eigenvectors = zeros(d, d);
    let mut eigenvalues = Vec::with_capacity(d);
    for (k, (lambda, v)) in pairs.into_iter().enumerate() {
        eigenvalues.push(lambda);
        eigenvectors.set_column(k, &v);
    }
    Ok(HermitianDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

fn normalize_phase(v: &mut DVector<C64>) {
    if let Some(z) = v.iter().find(|z| z.norm() > PHASE_REF_CUTOFF).copied() {
        let phase = z.conj() / z.norm();
        *v *= phase;
    }
}

fn lexicographic(a: &DVector<C64>, b: &DVector<C64>) -> Ordering {
    for (x, y) in a.iter().zip(b.iter()) {
        let ord = x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im));
        if ord != Ordering::Equal {
            return ord.reverse();
        }
    }
    Ordering::Equal
}

/// Eigenvalues of a Hermitian matrix, descending.
pub fn eigenvalues(a: &Matrix, tol: &Tolerance) -> Result<Vec<f64>> {
    Ok(hermitian_eigen(a, tol)?.eigenvalues)
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn min_eigenvalue(a: &Matrix, tol: &Tolerance) -> Result<f64> {
    Ok(hermitian_eigen(a, tol)?.min_eigenvalue())
}

/// Kronecker product, index convention i_a·dim_b + i_b.
pub fn tensor_product(a: &Matrix, b: &Matrix) -> Matrix {
    a.kronecker(b)
}

pub fn tensor_vec(a: &DVector<C64>, b: &DVector<C64>) -> DVector<C64> {
    a.kronecker(b)
}

/// Which factor of a bipartite space A⊗B.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Subsystem {
    A,
    B,
}

impl Subsystem {
    pub fn other(self) -> Subsystem {
        match self {
            Subsystem::A => Subsystem::B,
            Subsystem::B => Subsystem::A,
        }
    }
}

/// Traces out the factor not named by `keep` from an operator on A⊗B.
pub fn partial_trace(m: &Matrix, dims: (usize, usize), keep: Subsystem) -> Result<Matrix> {
    let (da, db) = dims;
    ensure_square(m, da * db)?;
    let out = match keep {
        Subsystem::A => Matrix::from_fn(da, da, |i, j| {
            (0..db).map(|k| m[(i * db + k, j * db + k)]).sum()
        }),
        Subsystem::B => Matrix::from_fn(db, db, |i, j| {
            (0..da).map(|k| m[(k * db + i, k * db + j)]).sum()
        }),
    };
    Ok(out)
}

/// Principal square root of a PSD matrix.
///
/// Eigenvalues in [−ε, 0) are clamped to zero; anything below −ε is rejected.
pub fn psd_sqrt(a: &Matrix, tol: &Tolerance) -> Result<Matrix> {
    let eig = hermitian_eigen(a, tol)?;
    ensure_psd_spectrum(&eig, tol)?;
    Ok(eig.map_spectrum(|l| l.max(0.0).sqrt()))
}

fn ensure_psd_spectrum(eig: &HermitianDecomposition, tol: &Tolerance) -> Result<()> {
    let min = eig.min_eigenvalue();
    if min < -tol.eps {
        return Err(Error::NotPsd {
            min_eigenvalue: min,
        });
    }
    Ok(())
}

/// Support/kernel split of a PSD operator together with √(F⁻¹) on the support.
#[derive(Debug, Clone)]
pub struct PsdSupport {
    /// Projector onto eigenvalues above the rank threshold.
    pub support: Matrix,
    /// I − support.
    pub kernel: Matrix,
    /// λ^{-1/2} on the support, zero on the kernel.
    pub pinv_sqrt: Matrix,
    pub rank: usize,
    pub rank_tol: f64,
    pub eigenvalues: Vec<f64>,
    pub decomposition: HermitianDecomposition,
}

impl PsdSupport {
    /// Eigenvalues within a factor of ten of the rank threshold, on either side.
    pub fn borderline_eigenvalues(&self) -> Vec<f64> {
        self.eigenvalues
            .iter()
            .copied()
            .filter(|&l| l > self.rank_tol / 10.0 && l <= self.rank_tol * 10.0)
            .collect()
    }
}

pub fn psd_support(a: &Matrix, tol: &Tolerance) -> Result<PsdSupport> {
    let eig = hermitian_eigen(a, tol)?;
    ensure_psd_spectrum(&eig, tol)?;
    let rank_tol = rank_threshold(&eig, tol);
    let d = eig.dim();
    let support = eig.map_spectrum(|l| if l > rank_tol { 1.0 } else { 0.0 });
    let pinv_sqrt = eig.map_spectrum(|l| if l > rank_tol { 1.0 / l.sqrt() } else { 0.0 });
    let rank = eig.eigenvalues.iter().filter(|&&l| l > rank_tol).count();
    Ok(PsdSupport {
        kernel: identity(d) - &support,
        support,
        pinv_sqrt,
        rank,
        rank_tol,
        eigenvalues: eig.eigenvalues.clone(),
        decomposition: eig,
    })
}

/// rank_rel·λ_max, floored at 1e-15 so a zero operator has rank zero.
pub fn rank_threshold(eig: &HermitianDecomposition, tol: &Tolerance) -> f64 {
    tol.rank_tol(eig.max_eigenvalue()).max(1e-15)
}

/// Number of eigenvalues above the rank threshold.
pub fn psd_rank(a: &Matrix, tol: &Tolerance) -> Result<usize> {
    Ok(psd_support(a, tol)?.rank)
}

/// m = V·P with V unitary and P = √(m†m).
#[derive(Debug, Clone)]
pub struct Polar {
    pub unitary: Matrix,
    pub positive: Matrix,
}

/// Polar decomposition through the full SVD m = U Σ W†: V = U W†, P = W Σ W†.
///
/// Left and right singular vectors are paired index by index, including those
/// belonging to zero singular values, so V maps ker(m) onto ker(m†).
pub fn polar_decompose(m: &Matrix) -> Result<Polar> {
    ensure_finite(m)?;
    let d = m.nrows();
    ensure_square(m, d)?;
    if d == 0 {
        return Ok(Polar {
            unitary: zeros(0, 0),
            positive: zeros(0, 0),
        });
    }
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("left singular vectors requested");
    let w_adj = svd.v_t.expect("right singular vectors requested");
    let sigma = Matrix::from_diagonal(&svd.singular_values.map(cr));
    let positive = hermitize(&(w_adj.adjoint() * sigma * &w_adj));
    Ok(Polar {
        unitary: u * w_adj,
        positive,
    })
}

/// max |U†U − I|
pub fn unitarity_residual(u: &Matrix) -> f64 {
    max_abs(&(u.adjoint() * u - identity(u.ncols())))
}

/// Matrix exponential of i·H for Hermitian H.
pub fn unitary_from_hermitian(h: &Matrix, tol: &Tolerance) -> Result<Matrix> {
    let eig = hermitian_eigen(h, tol)?;
    let d = eig.dim();
    let mut out = zeros(d, d);
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        let v = eig.eigenvectors.column(k);
        out += (v * v.adjoint()) * C64::from_polar(1.0, lambda);
    }
    Ok(out)
}

/// Column-stacking vectorization: vec(X)[col·rows + row] = X[row, col].
pub fn vectorize(m: &Matrix) -> DVector<C64> {
    DVector::from_column_slice(m.as_slice())
}

pub fn unvectorize(v: &DVector<C64>, rows: usize, cols: usize) -> Matrix {
    assert_eq!(v.len(), rows * cols);
    Matrix::from_column_slice(rows, cols, v.as_slice())
}

/// Row-major `[re, im]` pairs, the layout used in reports.
pub fn to_rows(m: &Matrix) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

pub fn from_rows(rows: &[Vec<[f64; 2]>]) -> Result<Matrix> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(dim_mismatch(format!("{ncols} columns in every row"), "ragged rows"));
    }
    let m = Matrix::from_fn(nrows, ncols, |i, j| c(rows[i][j][0], rows[i][j][1]));
    ensure_finite(&m)?;
    Ok(m)
}
