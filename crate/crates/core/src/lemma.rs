//! Every measurement outcome is an ideal measurement followed by a channel.
//!
//! Given a CP map B and an effect F with tr(B(ρ)) = tr(ρF) for all ρ,
//! [`decompose`] builds a CPTP map E with B(ρ) = E(√F ρ √F):
//!
//! ```text
//! E(ρ) = B(√F⁻¹ P_I ρ P_I √F⁻¹) + E'(P_II ρ P_II)
//! ```
//!
//! where P_I projects onto the support of F, P_II = I − P_I and E' is the
//! completely depolarizing map. The construction relies on B vanishing on
//! the kernel block and on the off-diagonal blocks; [`premise_diagnostics`]
//! measures both.

use serde::Serialize;

use crate::channels::{kraus_from_choi, KrausChannel, LinearMap};
use crate::error::{dim_mismatch, Error, Result};
use crate::matkit::{self, cr, frobenius_norm, hermitian_eigen, matrix_unit, psd_support, Matrix};
use crate::measure::Effect;
use crate::tol::Tolerance;

/// Residuals of the lemma's premise and of its two vanishing-term steps.
#[derive(Debug, Clone, Serialize)]
pub struct PremiseReport {
    /// max_ij |tr(B(|i⟩⟨j|)) − ⟨j|F|i⟩|
    pub trace_residual: f64,
    /// max_ij ‖B(P_II |i⟩⟨j| P_II)‖_F
    pub kernel_residual: f64,
    /// max_ij ‖B(P_I |i⟩⟨j| P_II + P_II |i⟩⟨j| P_I)‖_F
    pub cross_residual: f64,
    pub rank: usize,
    pub rank_tol: f64,
    pub effect_eigenvalues: Vec<f64>,
    pub warnings: Vec<String>,
    pub passed: bool,
}

fn kraus_form<M: LinearMap + ?Sized>(b: &M, tol: &Tolerance) -> Result<KrausChannel> {
    match b.as_kraus() {
        Some(k) => Ok(k.clone()),
        None => kraus_from_choi(&b.choi(), tol),
    }
}

/// Computes the premise residuals without failing on them.
pub fn premise_diagnostics<M: LinearMap + ?Sized>(
    b: &M,
    f: &Effect,
    tol: &Tolerance,
) -> Result<PremiseReport> {
    let d = f.dim();
    if b.d_in() != d {
        return Err(dim_mismatch(format!("map input dim {d}"), b.d_in()));
    }
    let support = psd_support(f.matrix(), tol)?;
    let (p1, p2) = (&support.support, &support.kernel);

    let mut trace_residual: f64 = 0.0;
    let mut kernel_residual: f64 = 0.0;
    let mut cross_residual: f64 = 0.0;
    for i in 0..d {
        for j in 0..d {
            let unit = matrix_unit(d, i, j);
            let img = b.apply(&unit)?;
            trace_residual = trace_residual.max((img.trace() - f.matrix()[(j, i)]).norm());
            let kernel = b.apply(&(p2 * &unit * p2))?;
            kernel_residual = kernel_residual.max(frobenius_norm(&kernel));
            let cross = b.apply(&(p1 * &unit * p2 + p2 * &unit * p1))?;
            cross_residual = cross_residual.max(frobenius_norm(&cross));
        }
    }

    let mut warnings = Vec::new();
    for l in support.borderline_eigenvalues() {
        warnings.push(format!(
            "effect eigenvalue {l:.3e} is within a factor 10 of the rank threshold {:.3e}",
            support.rank_tol
        ));
    }
    let bound = tol.premise();
    if kernel_residual > bound {
        warnings.push(format!("kernel term {kernel_residual:.3e} exceeds {bound:.1e}"));
    }
    if cross_residual > bound {
        warnings.push(format!("cross term {cross_residual:.3e} exceeds {bound:.1e}"));
    }

    Ok(PremiseReport {
        trace_residual,
        kernel_residual,
        cross_residual,
        rank: support.rank,
        rank_tol: support.rank_tol,
        effect_eigenvalues: support.eigenvalues,
        warnings,
        passed: trace_residual <= bound,
    })
}

/// Checks tr(B(ρ)) = tr(ρF) on the matrix-unit basis, within 10·ε.
pub fn verify_premise<M: LinearMap + ?Sized>(
    b: &M,
    f: &Effect,
    tol: &Tolerance,
) -> Result<PremiseReport> {
    let report = premise_diagnostics(b, f, tol)?;
    if !report.passed {
        return Err(Error::PremiseViolated {
            residual: report.trace_residual,
        });
    }
    Ok(report)
}

/// A CPTP channel E with B(ρ) = E(√F ρ √F), plus the premise report.
#[derive(Debug, Clone)]
pub struct Decomposition {
    pub channel: KrausChannel,
    pub premise: PremiseReport,
}

/// Builds E from the Kraus operators K_j of B:
/// {K_j √F⁻¹} on the support of F and {|a⟩⟨k|/√d_out} for kernel vectors |k⟩.
pub fn decompose_with_report<M: LinearMap + ?Sized>(
    b: &M,
    f: &Effect,
    tol: &Tolerance,
) -> Result<Decomposition> {
    let premise = verify_premise(b, f, tol)?;
    let b = kraus_form(b, tol)?;
    let support = psd_support(f.matrix(), tol)?;
    let (d_in, d_out) = (b.d_in(), b.d_out());

    let mut kraus: Vec<Matrix> = b.kraus().iter().map(|k| k * &support.pinv_sqrt).collect();
    let w = cr(1.0 / (d_out as f64).sqrt());
    for (idx, &lambda) in support.eigenvalues.iter().enumerate() {
        if lambda > support.rank_tol {
            continue;
        }
        let bra = support.decomposition.eigenvector(idx).adjoint();
        for a in 0..d_out {
            let mut k = Matrix::zeros(d_out, d_in);
            k.row_mut(a).copy_from(&(&bra * w));
            kraus.push(k);
        }
    }
    let channel = KrausChannel::new(d_in, d_out, kraus)?;
    let residual = channel.trace_preservation_residual();
    if residual > tol.premise() {
        return Err(Error::NotTracePreserving { residual });
    }
    Ok(Decomposition { channel, premise })
}

pub fn decompose<M: LinearMap + ?Sized>(b: &M, f: &Effect, tol: &Tolerance) -> Result<KrausChannel> {
    Ok(decompose_with_report(b, f, tol)?.channel)
}

/// max over `states` of ‖B(ρ) − E(√F ρ √F)‖₁
pub fn reconstruction_residual<B: LinearMap + ?Sized, E: LinearMap + ?Sized>(
    b: &B,
    e: &E,
    f: &Effect,
    states: &[Matrix],
    tol: &Tolerance,
) -> Result<f64> {
    let root = matkit::psd_sqrt(f.matrix(), tol)?;
    let mut worst: f64 = 0.0;
    for rho in states {
        let direct = b.apply(rho)?;
        let via = e.apply(&(&root * rho * &root))?;
        worst = worst.max(matkit::trace_norm(&(direct - via)));
    }
    Ok(worst)
}

/// Number of Choi eigenvalues above the rank threshold; 1 iff B(ρ) = MρM†.
pub fn kraus_rank<M: LinearMap + ?Sized>(b: &M, tol: &Tolerance) -> Result<usize> {
    let choi = b.choi();
    let eig = hermitian_eigen(&matkit::hermitize(choi.matrix()), tol)?;
    if eig.min_eigenvalue() < -tol.eps {
        return Err(Error::NotCp {
            min_eigenvalue: eig.min_eigenvalue(),
        });
    }
    let threshold = matkit::rank_threshold(&eig, tol);
    Ok(eig.eigenvalues.iter().filter(|&&l| l > threshold).count())
}
