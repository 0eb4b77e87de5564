//! Density operators, ensembles, purifications and remote preparation of
//! ensembles by measuring one half of a pure bipartite state.

use nalgebra::DVector;

use crate::error::{dim_mismatch, Error, Result};
use crate::matkit::{
    self, cr, ensure_square, hermitize, identity, max_abs, partial_trace, psd_sqrt, psd_support,
    Matrix, Subsystem, C64,
};
use crate::measure::{Effect, Povm};
use crate::tol::Tolerance;

/// Hermitian, positive semidefinite, unit-trace operator.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOperator {
    mat: Matrix,
}

impl DensityOperator {
    pub fn new(mat: Matrix, tol: &Tolerance) -> Result<Self> {
        matkit::ensure_hermitian(&mat, tol).map_err(|e| Error::InvalidState(e.to_string()))?;
        let tr = mat.trace();
        if (tr.re - 1.0).abs() > tol.eps || tr.im.abs() > tol.eps {
            return Err(Error::InvalidState(format!("trace {:.12} ≠ 1", tr.re)));
        }
        let min = matkit::min_eigenvalue(&mat, tol)?;
        if min < -tol.eps {
            return Err(Error::InvalidState(format!(
                "negative eigenvalue {min:.3e}"
            )));
        }
        Ok(DensityOperator {
            mat: hermitize(&mat),
        })
    }

    /// |ψ⟩⟨ψ|/⟨ψ|ψ⟩
    pub fn from_pure(psi: &DVector<C64>) -> Result<Self> {
        let norm = psi.norm();
        if !norm.is_finite() || norm == 0.0 {
            return Err(Error::InvalidState("zero or non-finite state vector".into()));
        }
        Ok(DensityOperator {
            mat: matkit::projector(&(psi / cr(norm))),
        })
    }

    /// Hermitian part of `m` divided by its trace, without spectral checks.
    ///
    /// Used for outputs of CP maps, which are positive by construction.
    pub fn from_unnormalized(m: &Matrix) -> Self {
        let h = hermitize(m);
        let tr = h.trace().re;
        DensityOperator { mat: h / cr(tr) }
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        DensityOperator {
            mat: identity(dim) / cr(dim as f64),
        }
    }

    pub fn basis_state(dim: usize, index: usize) -> Self {
        DensityOperator {
            mat: matkit::matrix_unit(dim, index, index),
        }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.mat
    }

    pub fn into_matrix(self) -> Matrix {
        self.mat
    }

    /// tr(ρ²)
    pub fn purity(&self) -> f64 {
        matkit::trace_product(&self.mat, &self.mat).re
    }

    pub fn is_pure(&self, tol: &Tolerance) -> bool {
        (self.purity() - 1.0).abs() <= tol.eps
    }

    /// Leading eigenvector, phase-normalized. Meaningful for pure states.
    pub fn dominant_vector(&self, tol: &Tolerance) -> Result<DVector<C64>> {
        Ok(matkit::hermitian_eigen(&self.mat, tol)?.eigenvector(0))
    }
}

/// Weighted collection of states {(p_i, ρ_i)} with Σ p_i = 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    members: Vec<(f64, DensityOperator)>,
}

impl Ensemble {
    pub fn new(members: Vec<(f64, DensityOperator)>, tol: &Tolerance) -> Result<Self> {
        let dim = members.first().ok_or(Error::Empty("ensemble"))?.1.dim();
        let mut total = 0.0;
        for (w, rho) in &members {
            if !w.is_finite() || *w < -tol.eps {
                return Err(Error::InvalidWeights(format!("weight {w} is negative")));
            }
            if rho.dim() != dim {
                return Err(dim_mismatch(dim, rho.dim()));
            }
            total += w;
        }
        if (total - 1.0).abs() > tol.eps {
            return Err(Error::InvalidWeights(format!("weights sum to {total}")));
        }
        Ok(Ensemble { members })
    }

    /// Pure members given as (weight, state vector); vectors are normalized.
    pub fn from_pure(members: Vec<(f64, DVector<C64>)>, tol: &Tolerance) -> Result<Self> {
        let members = members
            .into_iter()
            .map(|(w, psi)| Ok((w, DensityOperator::from_pure(&psi)?)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(members, tol)
    }

    pub fn members(&self) -> &[(f64, DensityOperator)] {
        &self.members
    }

    pub fn dim(&self) -> usize {
        self.members[0].1.dim()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Σ_i p_i ρ_i
pub fn mix(ensemble: &Ensemble) -> DensityOperator {
    let d = ensemble.dim();
    let mut acc = Matrix::zeros(d, d);
    for (w, rho) in ensemble.members() {
        acc += rho.matrix() * cr(*w);
    }
    DensityOperator {
        mat: hermitize(&acc),
    }
}

/// A density operator on C^{d_A} ⊗ C^{d_B}.
#[derive(Debug, Clone, PartialEq)]
pub struct BipartiteState {
    dims: (usize, usize),
    state: DensityOperator,
}

impl BipartiteState {
    pub fn new(state: DensityOperator, dims: (usize, usize)) -> Result<Self> {
        if state.dim() != dims.0 * dims.1 {
            return Err(dim_mismatch(dims.0 * dims.1, state.dim()));
        }
        Ok(BipartiteState { dims, state })
    }

    pub fn from_matrix(mat: Matrix, dims: (usize, usize), tol: &Tolerance) -> Result<Self> {
        ensure_square(&mat, dims.0 * dims.1)?;
        Self::new(DensityOperator::new(mat, tol)?, dims)
    }

    pub fn from_pure(psi: &DVector<C64>, dims: (usize, usize)) -> Result<Self> {
        Self::new(DensityOperator::from_pure(psi)?, dims)
    }

    pub fn product(a: &DensityOperator, b: &DensityOperator) -> Self {
        BipartiteState {
            dims: (a.dim(), b.dim()),
            state: DensityOperator {
                mat: matkit::tensor_product(a.matrix(), b.matrix()),
            },
        }
    }

    /// (|00⟩ + |11⟩)/√2
    pub fn bell() -> Self {
        let s = 0.5f64.sqrt();
        Self::from_pure(&matkit::ket(&[cr(s), cr(0.0), cr(0.0), cr(s)]), (2, 2))
            .expect("bell vector is valid")
    }

    pub fn dims(&self) -> (usize, usize) {
        self.dims
    }

    pub fn state(&self) -> &DensityOperator {
        &self.state
    }

    pub fn matrix(&self) -> &Matrix {
        self.state.matrix()
    }

    pub fn reduced(&self, keep: Subsystem) -> DensityOperator {
        let m = partial_trace(self.state.matrix(), self.dims, keep)
            .expect("state dimension matches dims");
        DensityOperator { mat: hermitize(&m) }
    }
}

/// Canonical purification |Ψ⟩ = Σ_i |i⟩_A ⊗ √ρ|i⟩_B.
///
/// The ancilla is the first factor; tracing it out returns ρ.
pub fn purify(rho: &DensityOperator, tol: &Tolerance) -> Result<BipartiteState> {
    let d = rho.dim();
    let root = psd_sqrt(rho.matrix(), tol)?;
    let mut psi = DVector::zeros(d * d);
    for i in 0..d {
        for j in 0..d {
            psi[i * d + j] = root[(j, i)];
        }
    }
    BipartiteState::from_pure(&psi, (d, d))
}

/// Measurement on A that steers B of the pure state `psi` into `target`.
///
/// Outcome i occurs with probability q_i and leaves B in the i-th target
/// member: Tr_A((A_i ⊗ I)|Ψ⟩⟨Ψ|) = q_i ρ_i. Writing the amplitudes as a
/// d_A × d_B matrix C, ρ_B = Cᵀ C̄ and Cᵀ = √ρ_B W with W = ρ_B^{-½} Cᵀ.
/// Then A_i = (W† ρ_B^{-½} q_i ρ_i ρ_B^{-½} W)ᵀ, and the projector onto the
/// part of A's space that |Ψ⟩ never touches joins the heaviest outcome.
pub fn steering_povm(psi: &BipartiteState, target: &Ensemble, tol: &Tolerance) -> Result<Povm> {
    let purity = psi.state().purity();
    if (purity - 1.0).abs() > tol.eps {
        return Err(Error::NotPure { purity });
    }
    let (da, db) = psi.dims();
    if target.dim() != db {
        return Err(dim_mismatch(db, target.dim()));
    }
    let vec = psi.state().dominant_vector(tol)?;
    let amp = Matrix::from_fn(da, db, |i, j| vec[i * db + j]);
    let rho_b = hermitize(&(amp.transpose() * amp.conjugate()));

    let residual = max_abs(&(mix(target).matrix() - &rho_b));
    if residual > tol.eps {
        return Err(Error::TargetMismatch { residual });
    }

    let support = psd_support(&rho_b, tol)?;
    let parts: Vec<Matrix> = target
        .members()
        .iter()
        .map(|(q, rho)| rho.matrix() * cr(*q))
        .collect();
    for (index, (q, rho)) in target.members().iter().enumerate() {
        if *q > 0.0 && max_abs(&(&support.kernel * rho.matrix())) > tol.eps {
            return Err(Error::UnsupportedMember { index });
        }
    }

    let w = &support.pinv_sqrt * amp.transpose();
    let mut elements: Vec<Matrix> = parts
        .iter()
        .map(|t| hermitize(&(w.adjoint() * &support.pinv_sqrt * t * &support.pinv_sqrt * &w).transpose()))
        .collect();
    let unused = identity(da) - (w.adjoint() * &w).transpose();
    let heaviest = target
        .members()
        .iter()
        .enumerate()
        .fold(0, |best, (i, (q, _))| if *q > target.members()[best].0 { i } else { best });
    elements[heaviest] += hermitize(&unused);

    for (a, t) in elements.iter().zip(&parts) {
        let residual = max_abs(&(steered_part(psi, a)? - t));
        if residual > tol.eps * db as f64 {
            return Err(Error::TargetMismatch { residual });
        }
    }

    let outcomes = elements
        .into_iter()
        .enumerate()
        .map(|(i, a)| Ok((i.to_string(), Effect::new(a, tol)?)))
        .collect::<Result<Vec<_>>>()?;
    Povm::new(outcomes, tol)
}

/// Unnormalized state of B after outcome `effect` on A: Tr_A((F ⊗ I)ρ).
pub fn steered_part(state: &BipartiteState, effect: &Matrix) -> Result<Matrix> {
    let (da, db) = state.dims();
    ensure_square(effect, da)?;
    let lifted = matkit::tensor_product(effect, &identity(db)) * state.matrix();
    partial_trace(&lifted, (da, db), Subsystem::B)
}
