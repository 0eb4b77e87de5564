//! Worked examples: correlated environment, Stern–Gerlach, three-level atom.

use serde::Serialize;

use crate::channels::KrausChannel;
use crate::error::Result;
use crate::lemma;
use crate::matkit::{
    self, basis, c, cr, ket, matrix_unit, outer, partial_trace, to_rows, trace_norm, Matrix,
    Subsystem,
};
use crate::measure::{apply_instrument, from_effect_channel_pairs, induced_povm, Effect, Instrument};
use crate::states::DensityOperator;
use crate::tol::Tolerance;

type Rows = Vec<Vec<[f64; 2]>>;

#[derive(Debug, Clone, Serialize)]
pub struct CorrelatedCase {
    pub name: String,
    pub sys_before: Rows,
    pub env_before: Rows,
    pub sys_after: Rows,
}

#[derive(Debug, Clone, Serialize)]
pub struct CorrelatedEnvReport {
    pub cases: Vec<CorrelatedCase>,
    pub unitarity_residual: f64,
    /// ‖ρ_sys(ψ1) − ρ_sys(ψ2)‖₁ before and after U.
    pub distance_before: f64,
    pub distance_after: f64,
    pub note: String,
}

/// |s⟩_sys|e⟩_env with the system as first factor.
fn sys_env(s: usize, e: usize) -> nalgebra::DVector<matkit::C64> {
    basis(4, 2 * s + e)
}

/// The two correlated states (|1⟩|0⟩ ± |0⟩|1⟩)/√2 and the completed U.
pub fn correlated_env_setup() -> ([nalgebra::DVector<matkit::C64>; 2], Matrix) {
    let s = cr(0.5f64.sqrt());
    let psi1 = (sys_env(1, 0) + sys_env(0, 1)) * s;
    let psi2 = (sys_env(1, 0) - sys_env(0, 1)) * s;
    let u = outer(&sys_env(1, 0), &psi1)
        + outer(&sys_env(0, 0), &psi2)
        + outer(&sys_env(0, 1), &sys_env(0, 0))
        + outer(&sys_env(1, 1), &sys_env(1, 1));
    ([psi1, psi2], u)
}

pub fn correlated_env_demo() -> CorrelatedEnvReport {
    let (states, u) = correlated_env_setup();
    let reduce = |m: &Matrix, keep| partial_trace(m, (2, 2), keep).expect("4 = 2·2");
    let mut cases = Vec::new();
    let mut before = Vec::new();
    let mut after = Vec::new();
    for (name, psi) in ["psi1", "psi2"].iter().zip(&states) {
        let rho = matkit::projector(psi);
        let out = &u * &rho * u.adjoint();
        let sys_before = reduce(&rho, Subsystem::A);
        let sys_after = reduce(&out, Subsystem::A);
        cases.push(CorrelatedCase {
            name: name.to_string(),
            sys_before: to_rows(&sys_before),
            env_before: to_rows(&reduce(&rho, Subsystem::B)),
            sys_after: to_rows(&sys_after),
        });
        before.push(sys_before);
        after.push(sys_after);
    }
    CorrelatedEnvReport {
        cases,
        unitarity_residual: matkit::unitarity_residual(&u),
        distance_before: trace_norm(&(&before[0] - &before[1])),
        distance_after: trace_norm(&(&after[0] - &after[1])),
        note: "system states follow the displayed action U|psi1> = |1>|0>, U|psi2> = |0>|0>; \
               the accompanying prose assigns |0><0| to psi1 and |1><1| to psi2, the reverse"
            .to_string(),
    }
}

/// Ideal σ_z measurement followed by the spin precession diag(e^{iθ}, e^{-iθ})
/// with θ = `theta_plus` on outcome "+" and `theta_minus` on outcome "−".
pub fn stern_gerlach_instrument(theta_plus: f64, theta_minus: f64, tol: &Tolerance) -> Result<Instrument> {
    let phase = |t: f64| Matrix::from_diagonal(&ket(&[c(t.cos(), t.sin()), c(t.cos(), -t.sin())]));
    let pairs = vec![
        (
            "+".to_string(),
            Effect::new(matrix_unit(2, 0, 0), tol)?,
            KrausChannel::conjugation(phase(theta_plus)),
        ),
        (
            "−".to_string(),
            Effect::new(matrix_unit(2, 1, 1), tol)?,
            KrausChannel::conjugation(phase(theta_minus)),
        ),
    ];
    from_effect_channel_pairs(pairs, tol)
}

pub fn stern_gerlach_demo() -> Instrument {
    stern_gerlach_instrument(0.3, -0.7, &Tolerance::default()).expect("fixed instrument is valid")
}

/// Energy measurement on {|g⟩, |e1⟩, |e2⟩}: outcome "0" finds the ground state
/// and leaves it alone, outcome "1" finds the degenerate excited level and the
/// atom decays to |g⟩.
pub fn atom_demo() -> Instrument {
    let g = basis(3, 0);
    let ground = KrausChannel::conjugation(matkit::projector(&g));
    let decay = KrausChannel::new(3, 3, vec![outer(&g, &basis(3, 1)), outer(&g, &basis(3, 2))])
        .expect("3×3 operators");
    Instrument::new(
        vec![("0".to_string(), ground), ("1".to_string(), decay)],
        &Tolerance::default(),
    )
    .expect("Σ K†K = I")
}

#[derive(Debug, Clone, Serialize)]
pub struct OutcomeSummary {
    pub label: String,
    pub effect: Rows,
    pub kraus_rank: usize,
    /// max over matrix units of ‖B(ρ) − E(√F ρ √F)‖₁ for the decomposed E.
    pub reconstruction_residual: f64,
    pub probability: f64,
    pub post_state: Option<Rows>,
}

#[derive(Debug, Clone, Serialize)]
pub struct InstrumentSummary {
    pub probe: Rows,
    pub outcomes: Vec<OutcomeSummary>,
}

/// Effects, Kraus ranks, decomposition residuals and the branches on `probe`.
pub fn summarize(inst: &Instrument, probe: &DensityOperator, tol: &Tolerance) -> Result<InstrumentSummary> {
    let povm = induced_povm(inst, tol)?;
    let d = inst.d_in();
    let units: Vec<Matrix> = (0..d)
        .flat_map(|i| (0..d).map(move |j| matrix_unit(d, i, j)))
        .collect();
    let branches = apply_instrument(inst, probe)?;
    let mut outcomes = Vec::new();
    for (((label, b), (_, f)), branch) in inst.outcomes().iter().zip(povm.outcomes()).zip(branches) {
        let e = lemma::decompose(b, f, tol)?;
        outcomes.push(OutcomeSummary {
            label: label.clone(),
            effect: to_rows(f.matrix()),
            kraus_rank: lemma::kraus_rank(b, tol)?,
            reconstruction_residual: lemma::reconstruction_residual(b, &e, f, &units, tol)?,
            probability: branch.probability,
            post_state: branch.state.map(|s| to_rows(s.matrix())),
        });
    }
    Ok(InstrumentSummary {
        probe: to_rows(probe.matrix()),
        outcomes,
    })
}

/// |+x⟩⟨+x|
pub fn plus_x() -> DensityOperator {
    DensityOperator::new(matkit::real_matrix(2, 2, &[0.5, 0.5, 0.5, 0.5]), &Tolerance::default())
        .expect("valid state")
}

/// Uniform superposition of the three atomic levels.
pub fn atom_probe() -> DensityOperator {
    let a = cr(1.0 / 3f64.sqrt());
    DensityOperator::from_pure(&ket(&[a, a, a])).expect("unit vector")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::LinearMap;
    use crate::matkit::{diag, from_rows, max_abs};

    fn tol() -> Tolerance {
        Tolerance::default()
    }

    #[test]
    fn correlated_env_matches_displayed_action() {
        let (states, u) = correlated_env_setup();
        assert!(matkit::unitarity_residual(&u) <= 1e-15);
        assert!((&u * &states[0] - sys_env(1, 0)).norm() <= 1e-15);
        assert!((&u * &states[1] - sys_env(0, 0)).norm() <= 1e-15);
        let r = correlated_env_demo();
        for case in &r.cases {
            let half = diag(&[0.5, 0.5]);
            assert!(max_abs(&(from_rows(&case.sys_before).unwrap() - &half)) <= 1e-15);
            assert!(max_abs(&(from_rows(&case.env_before).unwrap() - &half)) <= 1e-15);
        }
        let after1 = from_rows(&r.cases[0].sys_after).unwrap();
        let after2 = from_rows(&r.cases[1].sys_after).unwrap();
        assert!(max_abs(&(after1 - diag(&[0.0, 1.0]))) <= 1e-15);
        assert!(max_abs(&(after2 - diag(&[1.0, 0.0]))) <= 1e-15);
        assert!(r.distance_before <= 1e-15);
        assert!((r.distance_after - 2.0).abs() <= 1e-12);
        assert!(r.note.contains("reverse"));
    }

    #[test]
    fn stern_gerlach_on_plus_x() {
        let inst = stern_gerlach_demo();
        let s = summarize(&inst, &plus_x(), &tol()).unwrap();
        let expected = [diag(&[1.0, 0.0]), diag(&[0.0, 1.0])];
        for (o, e) in s.outcomes.iter().zip(&expected) {
            assert!((o.probability - 0.5).abs() <= 1e-12);
            assert_eq!(o.kraus_rank, 1);
            assert!(o.reconstruction_residual <= 1e-12);
            assert!(max_abs(&(from_rows(o.post_state.as_ref().unwrap()).unwrap() - e)) <= 1e-12);
            assert!(max_abs(&(from_rows(&o.effect).unwrap() - e)) <= 1e-12);
        }
    }

    #[test]
    fn stern_gerlach_decomposition_is_unitary_on_support() {
        let inst = stern_gerlach_demo();
        let povm = induced_povm(&inst, &tol()).unwrap();
        for ((_, b), (_, f)) in inst.outcomes().iter().zip(povm.outcomes()) {
            let e = lemma::decompose(b, f, &tol()).unwrap();
            assert!(e.trace_preservation_residual() <= 1e-12);
            // on the support vector the recovered E acts as the phase conjugation
            let support = matkit::psd_support(f.matrix(), &tol()).unwrap();
            let probe = &support.support * matkit::real_matrix(2, 2, &[0.5, 0.5, 0.5, 0.5]) * &support.support;
            let direct = b.apply(&probe).unwrap();
            assert!(max_abs(&(e.apply(&probe).unwrap() - direct)) <= 1e-12);
        }
    }

    #[test]
    fn atom_outcome_one_resets() {
        let inst = atom_demo();
        let s = summarize(&inst, &atom_probe(), &tol()).unwrap();
        assert_eq!(s.outcomes[0].kraus_rank, 1);
        assert_eq!(s.outcomes[1].kraus_rank, 2);
        assert!((s.outcomes[1].probability - 2.0 / 3.0).abs() <= 1e-12);
        let post = from_rows(s.outcomes[1].post_state.as_ref().unwrap()).unwrap();
        assert!(max_abs(&(post - diag(&[1.0, 0.0, 0.0]))) <= 1e-12);
        assert!(s.outcomes[1].reconstruction_residual <= 1e-10);
    }
}
