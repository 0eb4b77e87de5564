//! No-signaling and ensemble-indistinguishability checks.
//!
//! Both checks enumerate every outcome branch exactly; nothing is sampled.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::channels::{apply_local, LinearMap};
use crate::error::{dim_mismatch, Error, Result};
use crate::matkit::{self, hermitize, max_abs, partial_trace, to_rows, Matrix, Subsystem};
use crate::measure::{apply_instrument, Instrument};
use crate::states::{mix, BipartiteState, DensityOperator, Ensemble};
use crate::tol::Tolerance;

#[derive(Debug, Clone, Serialize)]
pub struct NoSignalingReport {
    /// ‖ρ_B − Σ_μ Tr_A((B_μ ⊗ id)ρ)‖₁
    pub residual: f64,
    pub passed: bool,
    pub bob_before: Vec<Vec<[f64; 2]>>,
    pub bob_after: Vec<Vec<[f64; 2]>>,
}

/// Bob's reduced state before and after Alice applies `alice` to subsystem A,
/// averaged over her outcomes.
pub fn check_no_signaling(
    state: &BipartiteState,
    alice: &Instrument,
    tol: &Tolerance,
) -> Result<NoSignalingReport> {
    let (da, db) = state.dims();
    if alice.d_in() != da {
        return Err(dim_mismatch(format!("instrument input dim {da}"), alice.d_in()));
    }
    let before = state.reduced(Subsystem::B).into_matrix();
    let mut after = Matrix::zeros(db, db);
    for (_, b) in alice.outcomes() {
        let out = apply_local(b, state.matrix(), (da, db), Subsystem::A)?;
        after += partial_trace(&out, (b.d_out(), db), Subsystem::B)?;
    }
    let residual = matkit::trace_norm(&(&before - &after));
    Ok(NoSignalingReport {
        residual,
        passed: residual <= tol.eps,
        bob_before: to_rows(&before),
        bob_after: to_rows(&hermitize(&after)),
    })
}

pub type Transform = Arc<dyn Fn(&DensityOperator) -> DensityOperator + Send + Sync>;

/// One step of a program run on every member of an ensemble.
#[derive(Clone)]
pub enum Step {
    Measure(Instrument),
    /// An opaque state-to-state map, applied to each normalized branch state.
    Transform { name: String, f: Transform },
}

impl Step {
    pub fn transform(name: impl Into<String>, f: impl Fn(&DensityOperator) -> DensityOperator + Send + Sync + 'static) -> Self {
        Step::Transform {
            name: name.into(),
            f: Arc::new(f),
        }
    }
}

impl fmt::Debug for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Step::Measure(inst) => f
                .debug_tuple("Measure")
                .field(&inst.labels().collect::<Vec<_>>())
                .finish(),
            Step::Transform { name, .. } => f.debug_tuple("Transform").field(name).finish(),
        }
    }
}

/// ρ ↦ ρ²/tr(ρ²). Nonlinear in ρ; fixes every pure state.
pub fn squaring_transform() -> Step {
    Step::transform("rho^2/tr(rho^2)", |rho: &DensityOperator| {
        DensityOperator::from_unnormalized(&(rho.matrix() * rho.matrix()))
    })
}

pub type JointDistribution = BTreeMap<Vec<String>, f64>;

fn run_branches(
    program: &[Step],
    weight: f64,
    rho: DensityOperator,
    prefix: &mut Vec<String>,
    out: &mut JointDistribution,
) -> Result<()> {
    let Some((step, rest)) = program.split_first() else {
        *out.entry(prefix.clone()).or_insert(0.0) += weight;
        return Ok(());
    };
    match step {
        Step::Transform { f, .. } => run_branches(rest, weight, f(&rho), prefix, out),
        Step::Measure(inst) => {
            if inst.d_in() != rho.dim() {
                return Err(dim_mismatch(format!("state dim {}", rho.dim()), inst.d_in()));
            }
            for branch in apply_instrument(inst, &rho)? {
                prefix.push(branch.label);
                if let Some(next) = branch.state {
                    run_branches(rest, weight * branch.probability, next, prefix, out)?;
                }
                prefix.pop();
            }
            Ok(())
        }
    }
}

/// p(μ₁, …, μ_n) over the program, averaged over the ensemble members.
pub fn joint_distribution(ensemble: &Ensemble, program: &[Step]) -> Result<JointDistribution> {
    let mut out = JointDistribution::new();
    for (q, rho) in ensemble.members() {
        run_branches(program, *q, rho.clone(), &mut Vec::new(), &mut out)?;
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct SignalingWitness {
    pub outcomes: Vec<String>,
    pub p1: f64,
    pub p2: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EnsembleReport {
    pub max_discrepancy: f64,
    pub passed: bool,
    pub witnesses: Vec<SignalingWitness>,
}

fn lookup(dist: &JointDistribution, key: &[String]) -> f64 {
    dist.get(key).copied().unwrap_or(0.0)
}

/// Runs `program` on both ensembles of the same mixture and compares the
/// joint outcome distributions; any difference is a signaling witness.
pub fn check_ensemble_program(
    e1: &Ensemble,
    e2: &Ensemble,
    program: &[Step],
    tol: &Tolerance,
) -> Result<EnsembleReport> {
    if e1.dim() != e2.dim() {
        return Err(dim_mismatch(e1.dim(), e2.dim()));
    }
    let residual = max_abs(&(mix(e1).matrix() - mix(e2).matrix()));
    if residual > tol.eps {
        return Err(Error::MixMismatch { residual });
    }
    let d1 = joint_distribution(e1, program)?;
    let d2 = joint_distribution(e2, program)?;
    let mut max_discrepancy: f64 = 0.0;
    let mut witnesses = Vec::new();
    let keys: std::collections::BTreeSet<&Vec<String>> = d1.keys().chain(d2.keys()).collect();
    for key in keys {
        let (p1, p2) = (lookup(&d1, key), lookup(&d2, key));
        let gap = (p1 - p2).abs();
        max_discrepancy = max_discrepancy.max(gap);
        if gap > tol.eps {
            witnesses.push(SignalingWitness {
                outcomes: key.clone(),
                p1,
                p2,
            });
        }
    }
    Ok(EnsembleReport {
        max_discrepancy,
        passed: witnesses.is_empty(),
        witnesses,
    })
}

/// [`check_ensemble_program`] for a program made only of instruments.
pub fn check_ensemble_equivalence(
    e1: &Ensemble,
    e2: &Ensemble,
    program: &[Instrument],
    tol: &Tolerance,
) -> Result<EnsembleReport> {
    let steps: Vec<Step> = program.iter().cloned().map(Step::Measure).collect();
    check_ensemble_program(e1, e2, &steps, tol)
}
