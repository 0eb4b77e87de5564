//! Linear maps on operators in Kraus, superoperator and Choi form.
//!
//! Conventions:
//! * vectorization stacks columns, so `vec(A X B) = (Bᵀ ⊗ A) vec(X)`;
//! * the Choi matrix is `C = Σ_ij |i⟩⟨j| ⊗ E(|i⟩⟨j|)`, input factor first;
//! * [`adjoint`] is the dual under the trace pairing
//!   `tr(E(ρ)·F) = tr(ρ·E*(F))`, which for `ρ ↦ Σ N_i ρ M_i` is `F ↦ Σ M_i F N_i`.
//!
//! Kraus form is reserved for completely positive maps. Anything else
//! (transpose, general bilinear forms) lives in [`Superoperator`].

use crate::error::{dim_mismatch, Error, Result};
use crate::matkit::{
    self, cr, ensure_finite, ensure_square, hermitian_eigen, hermitize, identity, matrix_unit,
    max_abs, tensor_product, unvectorize, vectorize, Matrix, Subsystem,
};
use crate::measure::{Effect, Povm};
use crate::tol::Tolerance;

/// Kraus operators whose Frobenius norm falls below this are dropped after products.
const ZERO_KRAUS_NORM: f64 = 1e-14;

pub trait LinearMap {
    fn d_in(&self) -> usize;
    fn d_out(&self) -> usize;

    /// Applies the map to a `d_in × d_in` operator.
    fn apply(&self, rho: &Matrix) -> Result<Matrix>;

    fn to_superoperator(&self) -> Superoperator;

    /// Borrowed Kraus form, when the map is stored that way.
    fn as_kraus(&self) -> Option<&KrausChannel> {
        None
    }

    fn choi(&self) -> ChoiMatrix {
        choi_from_map(self)
    }

    fn check_input(&self, rho: &Matrix) -> Result<()> {
        ensure_square(rho, self.d_in())
    }
}

/// ρ ↦ Σ_k K_k ρ K_k†
#[derive(Debug, Clone, PartialEq)]
pub struct KrausChannel {
    d_in: usize,
    d_out: usize,
    kraus: Vec<Matrix>,
}

impl KrausChannel {
    /// A completely positive map with no trace condition imposed.
    ///
    /// An empty Kraus list is the zero map.
    pub fn new(d_in: usize, d_out: usize, kraus: Vec<Matrix>) -> Result<Self> {
        if d_in == 0 || d_out == 0 {
            return Err(dim_mismatch("positive dimensions", format!("{d_in}->{d_out}")));
        }
        for k in &kraus {
            ensure_finite(k)?;
            if k.nrows() != d_out || k.ncols() != d_in {
                return Err(dim_mismatch(
                    format!("{d_out}x{d_in}"),
                    format!("{}x{}", k.nrows(), k.ncols()),
                ));
            }
        }
        Ok(KrausChannel { d_in, d_out, kraus })
    }

    /// Infers dimensions from the first operator.
    pub fn from_ops(kraus: Vec<Matrix>) -> Result<Self> {
        let first = kraus.first().ok_or(Error::Empty("Kraus list"))?;
        let (d_out, d_in) = first.shape();
        Self::new(d_in, d_out, kraus)
    }

    /// Validated CPTP channel: Σ K†K = I within `tol.eps`.
    pub fn cptp(kraus: Vec<Matrix>, tol: &Tolerance) -> Result<Self> {
        let ch = Self::from_ops(kraus)?;
        ch.ensure_trace_preserving(tol)?;
        Ok(ch)
    }

    /// Validated trace non-increasing CP map: Σ K†K ≤ I within `tol.eps`.
    pub fn trace_nonincreasing(kraus: Vec<Matrix>, tol: &Tolerance) -> Result<Self> {
        let ch = Self::from_ops(kraus)?;
        ch.ensure_trace_nonincreasing(tol)?;
        Ok(ch)
    }

    pub fn identity(dim: usize) -> Self {
        KrausChannel {
            d_in: dim,
            d_out: dim,
            kraus: vec![identity(dim)],
        }
    }

    /// ρ ↦ M ρ M†
    pub fn conjugation(m: Matrix) -> Self {
        let (d_out, d_in) = m.shape();
        KrausChannel {
            d_in,
            d_out,
            kraus: vec![m],
        }
    }

    /// Amplitude damping with decay probability γ on a qubit.
    pub fn amplitude_damping(gamma: f64) -> Self {
        let k0 = matkit::real_matrix(2, 2, &[1.0, 0.0, 0.0, (1.0 - gamma).sqrt()]);
        let k1 = matkit::real_matrix(2, 2, &[0.0, gamma.sqrt(), 0.0, 0.0]);
        KrausChannel {
            d_in: 2,
            d_out: 2,
            kraus: vec![k0, k1],
        }
    }

    /// ρ ↦ tr(ρ)·I/d_out
    pub fn completely_depolarizing(d_in: usize, d_out: usize) -> Self {
        let w = cr(1.0 / (d_out as f64).sqrt());
        let mut kraus = Vec::with_capacity(d_in * d_out);
        for b in 0..d_in {
            for a in 0..d_out {
                let mut k = Matrix::zeros(d_out, d_in);
                k[(a, b)] = w;
                kraus.push(k);
            }
        }
        KrausChannel { d_in, d_out, kraus }
    }

    pub fn kraus(&self) -> &[Matrix] {
        &self.kraus
    }

    pub fn into_kraus(self) -> Vec<Matrix> {
        self.kraus
    }

    /// Σ K†K, the Heisenberg image of the identity.
    pub fn completeness(&self) -> Matrix {
        let mut acc = Matrix::zeros(self.d_in, self.d_in);
        for k in &self.kraus {
            acc += k.adjoint() * k;
        }
        acc
    }

    pub fn trace_preservation_residual(&self) -> f64 {
        max_abs(&(self.completeness() - identity(self.d_in)))
    }

    pub fn is_trace_preserving(&self, tol: &Tolerance) -> bool {
        self.trace_preservation_residual() <= tol.eps
    }

    pub fn ensure_trace_preserving(&self, tol: &Tolerance) -> Result<()> {
        let residual = self.trace_preservation_residual();
        if residual > tol.eps {
            return Err(Error::NotTracePreserving { residual });
        }
        Ok(())
    }

    pub fn ensure_trace_nonincreasing(&self, tol: &Tolerance) -> Result<()> {
        let deficit = identity(self.d_in) - self.completeness();
        let min = matkit::min_eigenvalue(&hermitize(&deficit), tol)?;
        if min < -tol.eps {
            return Err(Error::TraceIncreasing { excess: -min });
        }
        Ok(())
    }

    /// Kraus-level composition: `self ∘ inner`, operators multiplied pairwise.
    pub fn after(&self, inner: &KrausChannel) -> Result<KrausChannel> {
        if inner.d_out != self.d_in {
            return Err(dim_mismatch(
                format!("inner output dim {}", self.d_in),
                inner.d_out,
            ));
        }
        let kraus = self
            .kraus
            .iter()
            .flat_map(|f| inner.kraus.iter().map(move |g| f * g))
            .filter(|k| matkit::frobenius_norm(k) > ZERO_KRAUS_NORM)
            .collect();
        Ok(KrausChannel {
            d_in: inner.d_in,
            d_out: self.d_out,
            kraus,
        })
    }

    /// Heisenberg-picture map F ↦ Σ K† F K, itself in Kraus form {K†}.
    pub fn adjoint(&self) -> KrausChannel {
        KrausChannel {
            d_in: self.d_out,
            d_out: self.d_in,
            kraus: self.kraus.iter().map(|k| k.adjoint()).collect(),
        }
    }

    /// Sum of two CP maps: concatenated Kraus lists.
    pub fn sum(&self, other: &KrausChannel) -> Result<KrausChannel> {
        if (self.d_in, self.d_out) != (other.d_in, other.d_out) {
            return Err(dim_mismatch(
                format!("{}->{}", self.d_in, self.d_out),
                format!("{}->{}", other.d_in, other.d_out),
            ));
        }
        let mut kraus = self.kraus.clone();
        kraus.extend(other.kraus.iter().cloned());
        Ok(KrausChannel {
            d_in: self.d_in,
            d_out: self.d_out,
            kraus,
        })
    }

    /// K ↦ K ⊗ I_anc
    pub fn tensor_identity(&self, d_anc: usize) -> KrausChannel {
        let id = identity(d_anc);
        KrausChannel {
            d_in: self.d_in * d_anc,
            d_out: self.d_out * d_anc,
            kraus: self.kraus.iter().map(|k| tensor_product(k, &id)).collect(),
        }
    }
}

impl LinearMap for KrausChannel {
    fn d_in(&self) -> usize {
        self.d_in
    }

    fn d_out(&self) -> usize {
        self.d_out
    }

    fn apply(&self, rho: &Matrix) -> Result<Matrix> {
        self.check_input(rho)?;
        let mut out = Matrix::zeros(self.d_out, self.d_out);
        for k in &self.kraus {
            out += k * rho * k.adjoint();
        }
        Ok(out)
    }

    fn to_superoperator(&self) -> Superoperator {
        let mut mat = Matrix::zeros(self.d_out * self.d_out, self.d_in * self.d_in);
        for k in &self.kraus {
            mat += tensor_product(&k.conjugate(), k);
        }
        Superoperator {
            d_in: self.d_in,
            d_out: self.d_out,
            mat,
        }
    }

    fn as_kraus(&self) -> Option<&KrausChannel> {
        Some(self)
    }
}

/// Matrix acting on column-stacked operators: vec(E(ρ)) = S·vec(ρ).
#[derive(Debug, Clone, PartialEq)]
pub struct Superoperator {
    d_in: usize,
    d_out: usize,
    mat: Matrix,
}

impl Superoperator {
    pub fn new(d_in: usize, d_out: usize, mat: Matrix) -> Result<Self> {
        ensure_finite(&mat)?;
        if mat.shape() != (d_out * d_out, d_in * d_in) {
            return Err(dim_mismatch(
                format!("{}x{}", d_out * d_out, d_in * d_in),
                format!("{}x{}", mat.nrows(), mat.ncols()),
            ));
        }
        Ok(Superoperator { d_in, d_out, mat })
    }

    /// ρ ↦ Σ_i N_i ρ M_i, the general linear form.
    pub fn from_bilinear(pairs: &[(Matrix, Matrix)]) -> Result<Self> {
        let (n0, _) = pairs.first().ok_or(Error::Empty("bilinear form"))?;
        let d_out = n0.nrows();
        let d_in = n0.ncols();
        let mut mat = Matrix::zeros(d_out * d_out, d_in * d_in);
        for (n, m) in pairs {
            if n.shape() != (d_out, d_in) || m.shape() != (d_in, d_out) {
                return Err(dim_mismatch(
                    format!("N {d_out}x{d_in}, M {d_in}x{d_out}"),
                    format!("N {:?}, M {:?}", n.shape(), m.shape()),
                ));
            }
            mat += tensor_product(&m.transpose(), n);
        }
        Self::new(d_in, d_out, mat)
    }

    /// ρ ↦ ρᵀ on dimension `dim`.
    pub fn transpose(dim: usize) -> Self {
        Superoperator {
            d_in: dim,
            d_out: dim,
            mat: vec_transpose_permutation(dim),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Superoperator {
            d_in: dim,
            d_out: dim,
            mat: identity(dim * dim),
        }
    }

    pub fn matrix(&self) -> &Matrix {
        &self.mat
    }

    /// self ∘ inner
    pub fn after(&self, inner: &Superoperator) -> Result<Superoperator> {
        if inner.d_out != self.d_in {
            return Err(dim_mismatch(
                format!("inner output dim {}", self.d_in),
                inner.d_out,
            ));
        }
        Ok(Superoperator {
            d_in: inner.d_in,
            d_out: self.d_out,
            mat: &self.mat * &inner.mat,
        })
    }

    /// Trace-pairing dual: T_in · Sᵀ · T_out.
    pub fn adjoint(&self) -> Superoperator {
        let t_in = vec_transpose_permutation(self.d_in);
        let t_out = vec_transpose_permutation(self.d_out);
        Superoperator {
            d_in: self.d_out,
            d_out: self.d_in,
            mat: t_in * self.mat.transpose() * t_out,
        }
    }

    pub fn trace_preservation_residual(&self) -> Result<f64> {
        let id_img = self.adjoint().apply(&identity(self.d_out))?;
        Ok(max_abs(&(id_img - identity(self.d_in))))
    }
}

impl LinearMap for Superoperator {
    fn d_in(&self) -> usize {
        self.d_in
    }

    fn d_out(&self) -> usize {
        self.d_out
    }

    fn apply(&self, rho: &Matrix) -> Result<Matrix> {
        self.check_input(rho)?;
        let v = &self.mat * vectorize(rho);
        Ok(unvectorize(&v, self.d_out, self.d_out))
    }

    fn to_superoperator(&self) -> Superoperator {
        self.clone()
    }
}

/// Permutation T with vec(Xᵀ) = T·vec(X).
fn vec_transpose_permutation(dim: usize) -> Matrix {
    let mut t = Matrix::zeros(dim * dim, dim * dim);
    for r in 0..dim {
        for c in 0..dim {
            t[(c * dim + r, r * dim + c)] = cr(1.0);
        }
    }
    t
}

/// C = Σ_ij |i⟩⟨j| ⊗ E(|i⟩⟨j|) on C^{d_in} ⊗ C^{d_out}.
#[derive(Debug, Clone, PartialEq)]
pub struct ChoiMatrix {
    d_in: usize,
    d_out: usize,
    mat: Matrix,
}

impl ChoiMatrix {
    pub fn new(d_in: usize, d_out: usize, mat: Matrix) -> Result<Self> {
        ensure_finite(&mat)?;
        ensure_square(&mat, d_in * d_out)?;
        Ok(ChoiMatrix { d_in, d_out, mat })
    }

    pub fn matrix(&self) -> &Matrix {
        &self.mat
    }

    /// Spectrum of the Hermitian part, descending.
    pub fn eigenvalues(&self, tol: &Tolerance) -> Result<Vec<f64>> {
        matkit::eigenvalues(&hermitize(&self.mat), tol)
    }

    pub fn min_eigenvalue(&self, tol: &Tolerance) -> Result<f64> {
        Ok(self.eigenvalues(tol)?.into_iter().reduce(f64::min).unwrap_or(0.0))
    }

    pub fn is_hermitian(&self, tol: &Tolerance) -> bool {
        matkit::hermitian_residual(&self.mat) <= tol.eps * max_abs(&self.mat).max(1.0)
    }

    /// Hermitian and PSD within `tol.eps`.
    pub fn is_cp(&self, tol: &Tolerance) -> bool {
        self.is_hermitian(tol) && self.min_eigenvalue(tol).is_ok_and(|m| m >= -tol.eps)
    }
}

impl LinearMap for ChoiMatrix {
    fn d_in(&self) -> usize {
        self.d_in
    }

    fn d_out(&self) -> usize {
        self.d_out
    }

    fn apply(&self, rho: &Matrix) -> Result<Matrix> {
        self.to_superoperator().apply(rho)
    }

    /// S[(b·d_out + a), (j·d_in + i)] = ⟨a|E(|i⟩⟨j|)|b⟩ = C[i·d_out + a, j·d_out + b]
    fn to_superoperator(&self) -> Superoperator {
        let (di, dout) = (self.d_in, self.d_out);
        let mut mat = Matrix::zeros(dout * dout, di * di);
        for i in 0..di {
            for j in 0..di {
                for a in 0..dout {
                    for b in 0..dout {
                        mat[(b * dout + a, j * di + i)] = self.mat[(i * dout + a, j * dout + b)];
                    }
                }
            }
        }
        Superoperator {
            d_in: di,
            d_out: dout,
            mat,
        }
    }

    fn choi(&self) -> ChoiMatrix {
        self.clone()
    }
}

/// Any of the three representations.
#[derive(Debug, Clone, PartialEq)]
pub enum QuantumMap {
    Kraus(KrausChannel),
    Superoperator(Superoperator),
    Choi(ChoiMatrix),
}

impl From<KrausChannel> for QuantumMap {
    fn from(k: KrausChannel) -> Self {
        QuantumMap::Kraus(k)
    }
}

impl From<Superoperator> for QuantumMap {
    fn from(s: Superoperator) -> Self {
        QuantumMap::Superoperator(s)
    }
}

impl From<ChoiMatrix> for QuantumMap {
    fn from(c: ChoiMatrix) -> Self {
        QuantumMap::Choi(c)
    }
}

impl QuantumMap {
    fn inner(&self) -> &dyn LinearMap {
        match self {
            QuantumMap::Kraus(k) => k,
            QuantumMap::Superoperator(s) => s,
            QuantumMap::Choi(c) => c,
        }
    }
}

impl LinearMap for QuantumMap {
    fn d_in(&self) -> usize {
        self.inner().d_in()
    }

    fn d_out(&self) -> usize {
        self.inner().d_out()
    }

    fn apply(&self, rho: &Matrix) -> Result<Matrix> {
        self.inner().apply(rho)
    }

    fn to_superoperator(&self) -> Superoperator {
        self.inner().to_superoperator()
    }

    fn as_kraus(&self) -> Option<&KrausChannel> {
        self.inner().as_kraus()
    }

    fn choi(&self) -> ChoiMatrix {
        self.inner().choi()
    }
}

/// Assembles the Choi matrix block by block from the map's action on matrix units.
pub fn choi_from_map<M: LinearMap + ?Sized>(map: &M) -> ChoiMatrix {
    let (di, dout) = (map.d_in(), map.d_out());
    let mut mat = Matrix::zeros(di * dout, di * dout);
    for i in 0..di {
        for j in 0..di {
            let block = map
                .apply(&matrix_unit(di, i, j))
                .expect("matrix unit has the input dimension");
            mat.view_mut((i * dout, j * dout), (dout, dout))
                .copy_from(&block);
        }
    }
    ChoiMatrix {
        d_in: di,
        d_out: dout,
        mat,
    }
}

/// Kraus operators from the Choi spectrum, ordered by descending eigenvalue.
///
/// K[a, i] = √λ · v[i·d_out + a] for each eigenpair with λ above the rank threshold.
pub fn kraus_from_choi(choi: &ChoiMatrix, tol: &Tolerance) -> Result<KrausChannel> {
    if !choi.is_hermitian(tol) {
        return Err(Error::NotCp {
            min_eigenvalue: f64::NAN,
        });
    }
    let eig = hermitian_eigen(&hermitize(&choi.mat), tol)?;
    let min = eig.min_eigenvalue();
    if min < -tol.eps {
        return Err(Error::NotCp {
            min_eigenvalue: min,
        });
    }
    let rank_tol = matkit::rank_threshold(&eig, tol);
    let (di, dout) = (choi.d_in, choi.d_out);
    let kraus = eig
        .eigenvalues
        .iter()
        .enumerate()
        .filter(|(_, &l)| l > rank_tol)
        .map(|(k, &l)| {
            let v = eig.eigenvectors.column(k);
            let s = l.sqrt();
            Matrix::from_fn(dout, di, |a, i| v[i * dout + a] * s)
        })
        .collect();
    KrausChannel::new(di, dout, kraus)
}

pub fn apply<M: LinearMap + ?Sized>(map: &M, rho: &Matrix) -> Result<Matrix> {
    map.apply(rho)
}

/// `f ∘ g`; stays in Kraus form when both inputs are Kraus.
pub fn compose(f: &QuantumMap, g: &QuantumMap) -> Result<QuantumMap> {
    if g.d_out() != f.d_in() {
        return Err(dim_mismatch(
            format!("g output dim {}", f.d_in()),
            g.d_out(),
        ));
    }
    match (f.as_kraus(), g.as_kraus()) {
        (Some(fk), Some(gk)) => Ok(fk.after(gk)?.into()),
        _ => Ok(f.to_superoperator().after(&g.to_superoperator())?.into()),
    }
}

/// Trace-pairing dual map.
pub fn adjoint(map: &QuantumMap) -> QuantumMap {
    match map.as_kraus() {
        Some(k) => k.adjoint().into(),
        None => map.to_superoperator().adjoint().into(),
    }
}

/// Heisenberg image of a single operator: E*(F).
pub fn heisenberg<M: LinearMap + ?Sized>(map: &M, f: &Matrix) -> Result<Matrix> {
    ensure_square(f, map.d_out())?;
    match map.as_kraus() {
        Some(k) => k.adjoint().apply(f),
        None => map.to_superoperator().adjoint().apply(f),
    }
}

/// Residual of E*(I) = I.
pub fn trace_preservation_residual<M: LinearMap + ?Sized>(map: &M) -> f64 {
    let img = heisenberg(map, &identity(map.d_out())).expect("identity has output dimension");
    max_abs(&(img - identity(map.d_in())))
}

/// F'_μ = E*(F_μ): the measurement obtained by running `map` before `povm`.
///
/// Every pulled-back effect must be positive; a map that breaks this cannot
/// precede a measurement and yields [`Error::NonPositiveEffect`].
pub fn pullback_povm<M: LinearMap + ?Sized>(map: &M, povm: &Povm, tol: &Tolerance) -> Result<Povm> {
    if povm.dim() != map.d_out() {
        return Err(dim_mismatch(format!("POVM dim {}", map.d_out()), povm.dim()));
    }
    let residual = trace_preservation_residual(map);
    if residual > tol.eps {
        return Err(Error::NotTracePreserving { residual });
    }
    let mut outcomes = Vec::with_capacity(povm.len());
    for (label, effect) in povm.outcomes() {
        let pulled = heisenberg(map, effect.matrix())?;
        matkit::ensure_hermitian(&pulled, tol)?;
        let pulled = hermitize(&pulled);
        let min = matkit::min_eigenvalue(&pulled, tol)?;
        if min < -tol.eps {
            return Err(Error::NonPositiveEffect {
                label: label.clone(),
                min_eigenvalue: min,
            });
        }
        outcomes.push((label.clone(), Effect::new(pulled, tol)?));
    }
    Povm::new(outcomes, tol)
}

/// Applies `map` to one factor of an operator on A⊗B, identity on the other.
///
/// `dims` are the input dimensions; the mapped factor changes from
/// `map.d_in()` to `map.d_out()`.
pub fn apply_local<M: LinearMap + ?Sized>(
    map: &M,
    rho: &Matrix,
    dims: (usize, usize),
    on: Subsystem,
) -> Result<Matrix> {
    let (da, db) = dims;
    ensure_square(rho, da * db)?;
    let acted = match on {
        Subsystem::A => da,
        Subsystem::B => db,
    };
    if acted != map.d_in() {
        return Err(dim_mismatch(format!("subsystem dim {}", map.d_in()), acted));
    }
    match on {
        Subsystem::A => {
            let dout = map.d_out();
            let mut out = Matrix::zeros(dout * db, dout * db);
            for b in 0..db {
                for b2 in 0..db {
                    let block = Matrix::from_fn(da, da, |i, j| rho[(i * db + b, j * db + b2)]);
                    let img = map.apply(&block)?;
                    for i in 0..dout {
                        for j in 0..dout {
                            out[(i * db + b, j * db + b2)] += img[(i, j)];
                        }
                    }
                }
            }
            Ok(out)
        }
        Subsystem::B => {
            let dout = map.d_out();
            let mut out = Matrix::zeros(da * dout, da * dout);
            for a in 0..da {
                for a2 in 0..da {
                    let block = Matrix::from_fn(db, db, |i, j| rho[(a * db + i, a2 * db + j)]);
                    let img = map.apply(&block)?;
                    out.view_mut((a * dout, a2 * dout), (dout, dout))
                        .copy_from(&img);
                }
            }
            Ok(out)
        }
    }
}
