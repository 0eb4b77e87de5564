//! Effects, POVMs and instruments.
//!
//! An [`Instrument`] stores one completely positive map per outcome; the
//! probability of outcome μ is `tr(B_μ(ρ))` and the post-measurement state is
//! `B_μ(ρ)/tr(B_μ(ρ))`. The effect/channel pair view (`B_μ = E_μ ∘ Ad_√F_μ`)
//! is only a constructor; [`crate::lemma::decompose`] recovers it.

use std::collections::HashSet;

use crate::channels::{KrausChannel, LinearMap};
use crate::error::{dim_mismatch, Error, Result};
use crate::matkit::{self, hermitize, identity, max_abs, psd_sqrt, trace_product, Matrix};
use crate::states::DensityOperator;
use crate::tol::Tolerance;

/// Outcomes with probability at or below this carry no post-measurement state.
pub const PROBABILITY_FLOOR: f64 = 1e-12;

/// Separator used to join outcome labels of fused instruments.
pub const LABEL_SEPARATOR: &str = "·";

/// A positive operator 0 ≤ F ≤ I.
#[derive(Debug, Clone, PartialEq)]
pub struct Effect {
    mat: Matrix,
}

impl Effect {
    pub fn new(mat: Matrix, tol: &Tolerance) -> Result<Self> {
        matkit::ensure_hermitian(&mat, tol)?;
        let eig = matkit::hermitian_eigen(&mat, tol)?;
        let (max, min) = (eig.max_eigenvalue(), eig.min_eigenvalue());
        if min < -tol.eps || max > 1.0 + tol.eps {
            return Err(Error::InvalidEffect(format!(
                "spectrum [{min:.3e}, {max:.3e}] outside [0, 1]"
            )));
        }
        Ok(Effect {
            mat: hermitize(&mat),
        })
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
}

fn default_labels(n: usize) -> impl Iterator<Item = String> {
    (0..n).map(|i| i.to_string())
}

fn ensure_unique<'a>(labels: impl Iterator<Item = &'a String>) -> Result<()> {
    let mut seen = HashSet::new();
    for l in labels {
        if !seen.insert(l.as_str()) {
            return Err(Error::DuplicateLabel(l.clone()));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Povm {
    dim: usize,
    outcomes: Vec<(String, Effect)>,
}

impl Povm {
    /// Labels must be unique and effects must sum to I within `eps·dim`.
    pub fn new(outcomes: Vec<(String, Effect)>, tol: &Tolerance) -> Result<Self> {
        let dim = outcomes.first().ok_or(Error::Empty("POVM"))?.1.dim();
        for (_, e) in &outcomes {
            if e.dim() != dim {
                return Err(dim_mismatch(dim, e.dim()));
            }
        }
        ensure_unique(outcomes.iter().map(|(l, _)| l))?;
        let povm = Povm { dim, outcomes };
        let residual = povm.completeness_residual();
        if residual > tol.eps * dim as f64 {
            return Err(Error::Incomplete { residual });
        }
        Ok(povm)
    }

    /// Effects labelled "0", "1", ...
    pub fn from_matrices(mats: Vec<Matrix>, tol: &Tolerance) -> Result<Self> {
        let outcomes = default_labels(mats.len())
            .zip(mats)
            .map(|(l, m)| Ok((l, Effect::new(m, tol)?)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(outcomes, tol)
    }

    /// Projective measurement in the computational basis.
    pub fn computational(dim: usize, tol: &Tolerance) -> Result<Self> {
        Self::from_matrices((0..dim).map(|k| matkit::matrix_unit(dim, k, k)).collect(), tol)
    }

    /// The trivial single-outcome measurement {I}.
    pub fn trivial(dim: usize) -> Self {
        Povm {
            dim,
            outcomes: vec![("0".to_string(), Effect { mat: identity(dim) })],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    pub fn outcomes(&self) -> &[(String, Effect)] {
        &self.outcomes
    }

    pub fn effect(&self, label: &str) -> Option<&Effect> {
        self.outcomes.iter().find(|(l, _)| l == label).map(|(_, e)| e)
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.outcomes.iter().map(|(l, _)| l.as_str())
    }

    /// max |Σ F_μ − I|
    pub fn completeness_residual(&self) -> f64 {
        let mut sum = Matrix::zeros(self.dim, self.dim);
        for (_, e) in &self.outcomes {
            sum += &e.mat;
        }
        max_abs(&(sum - identity(self.dim)))
    }
}

/// Outcome-labelled CP maps whose sum is trace preserving.
#[derive(Debug, Clone, PartialEq)]
pub struct Instrument {
    d_in: usize,
    d_out: usize,
    outcomes: Vec<(String, KrausChannel)>,
}

impl Instrument {
    pub fn new(outcomes: Vec<(String, KrausChannel)>, tol: &Tolerance) -> Result<Self> {
        let first = &outcomes.first().ok_or(Error::Empty("instrument"))?.1;
        let (d_in, d_out) = (first.d_in(), first.d_out());
        for (_, b) in &outcomes {
            if (b.d_in(), b.d_out()) != (d_in, d_out) {
                return Err(dim_mismatch(
                    format!("{d_in}->{d_out}"),
                    format!("{}->{}", b.d_in(), b.d_out()),
                ));
            }
        }
        ensure_unique(outcomes.iter().map(|(l, _)| l))?;
        let inst = Instrument {
            d_in,
            d_out,
            outcomes,
        };
        let residual = inst.trace_preservation_residual();
        if residual > tol.eps {
            return Err(Error::NotTracePreserving { residual });
        }
        Ok(inst)
    }

    /// Outcomes labelled "0", "1", ...
    pub fn from_maps(maps: Vec<KrausChannel>, tol: &Tolerance) -> Result<Self> {
        Self::new(default_labels(maps.len()).zip(maps).collect(), tol)
    }

    /// A channel viewed as a one-outcome instrument.
    pub fn from_channel(channel: KrausChannel, tol: &Tolerance) -> Result<Self> {
        Self::new(vec![("0".to_string(), channel)], tol)
    }

    pub fn d_in(&self) -> usize {
        self.d_in
    }

    pub fn d_out(&self) -> usize {
        self.d_out
    }

    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    pub fn outcomes(&self) -> &[(String, KrausChannel)] {
        &self.outcomes
    }

    pub fn outcome(&self, label: &str) -> Result<&KrausChannel> {
        self.outcomes
            .iter()
            .find(|(l, _)| l == label)
            .map(|(_, b)| b)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.outcomes.iter().map(|(l, _)| l.as_str())
    }

    /// max |Σ_μ B_μ*(I) − I|
    pub fn trace_preservation_residual(&self) -> f64 {
        let mut sum = Matrix::zeros(self.d_in, self.d_in);
        for (_, b) in &self.outcomes {
            sum += b.completeness();
        }
        max_abs(&(sum - identity(self.d_in)))
    }

    /// Σ_μ B_μ, the channel obtained by discarding the outcome.
    pub fn total_channel(&self) -> KrausChannel {
        let kraus = self
            .outcomes
            .iter()
            .flat_map(|(_, b)| b.kraus().iter().cloned())
            .collect();
        KrausChannel::new(self.d_in, self.d_out, kraus).expect("outcome maps share dimensions")
    }
}

/// p(μ) = tr(ρ F_μ), clamped to [0, 1].
pub fn probabilities(rho: &DensityOperator, povm: &Povm) -> Result<Vec<(String, f64)>> {
    if rho.dim() != povm.dim() {
        return Err(dim_mismatch(povm.dim(), rho.dim()));
    }
    Ok(povm
        .outcomes()
        .iter()
        .map(|(l, e)| (l.clone(), clamp_probability(trace_product(rho.matrix(), e.matrix()).re)))
        .collect())
}

fn clamp_probability(p: f64) -> f64 {
    p.clamp(0.0, 1.0)
}

/// F_μ = B_μ*(I)
pub fn induced_povm(inst: &Instrument, tol: &Tolerance) -> Result<Povm> {
    let outcomes = inst
        .outcomes()
        .iter()
        .map(|(l, b)| Ok((l.clone(), Effect::new(hermitize(&b.completeness()), tol)?)))
        .collect::<Result<Vec<_>>>()?;
    Povm::new(outcomes, tol)
}

/// Ideal measurement: B_μ(ρ) = √F_μ ρ √F_μ.
pub fn luders_from_povm(povm: &Povm, tol: &Tolerance) -> Result<Instrument> {
    let outcomes = povm
        .outcomes()
        .iter()
        .map(|(l, e)| Ok((l.clone(), KrausChannel::conjugation(psd_sqrt(e.matrix(), tol)?))))
        .collect::<Result<Vec<_>>>()?;
    Instrument::new(outcomes, tol)
}

/// Generalized measurement: B_μ(ρ) = M_μ ρ M_μ†, requiring Σ M†M = I.
pub fn from_generalized(ms: Vec<Matrix>, tol: &Tolerance) -> Result<Instrument> {
    if ms.is_empty() {
        return Err(Error::Empty("measurement operators"));
    }
    let maps = ms
        .into_iter()
        .map(|m| {
            matkit::ensure_finite(&m)?;
            Ok(KrausChannel::conjugation(m))
        })
        .collect::<Result<Vec<_>>>()?;
    Instrument::from_maps(maps, tol).map_err(|e| match e {
        Error::NotTracePreserving { residual } => Error::Incomplete { residual },
        other => other,
    })
}

/// The same measurement as [`from_generalized`], built as an ideal
/// measurement of F_μ = M_μ†M_μ followed by conjugation with the polar
/// unitary V_μ of M_μ = V_μ √(M_μ†M_μ).
pub fn polar_split(ms: &[Matrix], tol: &Tolerance) -> Result<Instrument> {
    let pairs = ms
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let polar = matkit::polar_decompose(m)?;
            let effect = Effect::new(hermitize(&(m.adjoint() * m)), tol)?;
            Ok((i.to_string(), effect, KrausChannel::conjugation(polar.unitary)))
        })
        .collect::<Result<Vec<_>>>()?;
    from_effect_channel_pairs(pairs, tol)
}

/// B_μ = E_μ ∘ Ad_√F_μ for an effect F_μ and a CPTP channel E_μ per outcome.
pub fn from_effect_channel_pairs(
    pairs: Vec<(String, Effect, KrausChannel)>,
    tol: &Tolerance,
) -> Result<Instrument> {
    let povm = Povm::new(
        pairs.iter().map(|(l, e, _)| (l.clone(), e.clone())).collect(),
        tol,
    )?;
    let mut outcomes = Vec::with_capacity(pairs.len());
    for ((label, effect), (_, _, channel)) in povm.outcomes().iter().zip(&pairs) {
        if channel.d_in() != effect.dim() {
            return Err(dim_mismatch(
                format!("channel input dim {}", effect.dim()),
                channel.d_in(),
            ));
        }
        channel.ensure_trace_preserving(tol)?;
        let root = KrausChannel::conjugation(psd_sqrt(effect.matrix(), tol)?);
        outcomes.push((label.clone(), channel.after(&root)?));
    }
    Instrument::new(outcomes, tol)
}

/// One branch of an instrument applied to a state.
#[derive(Debug, Clone)]
pub struct Branch {
    pub label: String,
    pub probability: f64,
    /// `None` when the probability is at or below [`PROBABILITY_FLOOR`].
    pub state: Option<DensityOperator>,
}

/// All outcome branches: probability tr(B_μ(ρ)) and state B_μ(ρ)/probability.
pub fn apply_instrument(inst: &Instrument, rho: &DensityOperator) -> Result<Vec<Branch>> {
    if rho.dim() != inst.d_in() {
        return Err(dim_mismatch(inst.d_in(), rho.dim()));
    }
    inst.outcomes()
        .iter()
        .map(|(label, b)| {
            let out = b.apply(rho.matrix())?;
            let raw = out.trace().re;
            let probability = clamp_probability(raw);
            let state = (raw > PROBABILITY_FLOOR)
                .then(|| DensityOperator::from_unnormalized(&out));
            Ok(Branch {
                label: label.clone(),
                probability,
                state,
            })
        })
        .collect()
}

/// The two-step measurement "first, then second" as a single instrument.
///
/// Outcome (μ, ν) is labelled `μ·ν` and carries B_ν ∘ B_μ.
pub fn fuse_sequential(first: &Instrument, second: &Instrument, tol: &Tolerance) -> Result<Instrument> {
    if first.d_out() != second.d_in() {
        return Err(dim_mismatch(
            format!("second instrument input dim {}", first.d_out()),
            second.d_in(),
        ));
    }
    let mut outcomes = Vec::with_capacity(first.len() * second.len());
    for (mu, b_mu) in first.outcomes() {
        for (nu, b_nu) in second.outcomes() {
            let fused = b_nu.after(b_mu)?;
            outcomes.push((format!("{mu}{LABEL_SEPARATOR}{nu}"), fused));
        }
    }
    Instrument::new(outcomes, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matkit::{c, cr, diag, ket, pauli_x, projector, real_matrix};

    fn tol() -> Tolerance {
        Tolerance::default()
    }

    fn close(a: &Matrix, b: &Matrix, eps: f64) -> bool {
        a.shape() == b.shape() && max_abs(&(a - b)) <= eps
    }

    fn plus() -> DensityOperator {
        DensityOperator::new(real_matrix(2, 2, &[0.5, 0.5, 0.5, 0.5]), &tol()).unwrap()
    }

    fn trine() -> Povm {
        let mats = (0..3)
            .map(|k| {
                let theta = 2.0 * std::f64::consts::PI * k as f64 / 3.0;
                let v = ket(&[cr(theta.cos()), cr(theta.sin())]);
                projector(&v).scale(2.0 / 3.0)
            })
            .collect();
        Povm::from_matrices(mats, &tol()).unwrap()
    }

    /// Three-level atom: |g⟩ = 0, |e1⟩ = 1, |e2⟩ = 2.
    fn atom() -> Instrument {
        let t = tol();
        let f0 = Effect::new(diag(&[1.0, 0.0, 0.0]), &t).unwrap();
        let f1 = Effect::new(diag(&[0.0, 1.0, 1.0]), &t).unwrap();
        let reset = KrausChannel::cptp(
            (0..3).map(|k| matkit::matrix_unit(3, 0, k)).collect(),
            &t,
        )
        .unwrap();
        from_effect_channel_pairs(
            vec![
                ("0".into(), f0, KrausChannel::identity(3)),
                ("1".into(), f1, reset),
            ],
            &t,
        )
        .unwrap()
    }

    #[test]
    fn effect_rejects_out_of_range_spectrum() {
        assert!(Effect::new(diag(&[1.2, 0.0]), &tol()).is_err());
        assert!(Effect::new(diag(&[0.5, -0.1]), &tol()).is_err());
        assert!(Effect::new(diag(&[1.0, 0.0]), &tol()).is_ok());
    }

    #[test]
    fn povm_requires_completeness_and_unique_labels() {
        let err = Povm::from_matrices(vec![identity(2).scale(0.9)], &tol()).unwrap_err();
        assert!(matches!(err, Error::Incomplete { residual } if (residual - 0.1).abs() < 1e-12));
        let e = Effect::new(identity(2).scale(0.5), &tol()).unwrap();
        let err = Povm::new(vec![("a".into(), e.clone()), ("a".into(), e)], &tol()).unwrap_err();
        assert_eq!(err, Error::DuplicateLabel("a".into()));
    }

    #[test]
    fn trace_rule_on_plus_state() {
        let p = probabilities(&plus(), &Povm::computational(2, &tol()).unwrap()).unwrap();
        assert!((p[0].1 - 0.5).abs() < 1e-15 && (p[1].1 - 0.5).abs() < 1e-15);
    }

    #[test]
    fn trivial_povm_gives_certainty() {
        let rho = DensityOperator::new(real_matrix(2, 2, &[0.8, 0.1, 0.1, 0.2]), &tol()).unwrap();
        let p = probabilities(&rho, &Povm::trivial(2)).unwrap();
        assert_eq!(p.len(), 1);
        assert!((p[0].1 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn trine_on_maximally_mixed() {
        // tr(I/2 · ⅔|e⟩⟨e|) = ⅓ for unit |e⟩
        let p = probabilities(&DensityOperator::maximally_mixed(2), &trine()).unwrap();
        for (_, x) in p {
            assert!((x - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn probabilities_check_dimension() {
        assert!(probabilities(&DensityOperator::maximally_mixed(3), &trine()).is_err());
    }

    #[test]
    fn luders_of_projective_round_trips() {
        let p = Povm::computational(3, &tol()).unwrap();
        let inst = luders_from_povm(&p, &tol()).unwrap();
        let back = induced_povm(&inst, &tol()).unwrap();
        for ((_, a), (_, b)) in p.outcomes().iter().zip(back.outcomes()) {
            assert!(close(a.matrix(), b.matrix(), 1e-14));
        }
    }

    #[test]
    fn luders_of_trivial_is_identity_channel() {
        let inst = luders_from_povm(&Povm::trivial(2), &tol()).unwrap();
        assert_eq!(inst.len(), 1);
        let rho = plus();
        let out = inst.outcomes()[0].1.apply(rho.matrix()).unwrap();
        assert!(close(&out, rho.matrix(), 1e-15));
    }

    #[test]
    fn luders_of_half_identities_leaves_state() {
        let e = identity(2).scale(0.5);
        let p = Povm::from_matrices(vec![e.clone(), e], &tol()).unwrap();
        let inst = luders_from_povm(&p, &tol()).unwrap();
        let rho = plus();
        for br in apply_instrument(&inst, &rho).unwrap() {
            assert!((br.probability - 0.5).abs() < 1e-15);
            assert!(close(br.state.unwrap().matrix(), rho.matrix(), 1e-14));
        }
    }

    #[test]
    fn generalized_measurement_with_flip() {
        let s = 0.5f64.sqrt();
        let inst = from_generalized(vec![identity(2).scale(s), pauli_x().scale(s)], &tol()).unwrap();
        let rho = DensityOperator::new(real_matrix(2, 2, &[0.9, 0.2, 0.2, 0.1]), &tol()).unwrap();
        let br = apply_instrument(&inst, &rho).unwrap();
        assert!((br[0].probability - 0.5).abs() < 1e-15);
        assert!((br[1].probability - 0.5).abs() < 1e-15);
        assert!(close(br[0].state.as_ref().unwrap().matrix(), rho.matrix(), 1e-14));
        let flipped = pauli_x() * rho.matrix() * pauli_x();
        assert!(close(br[1].state.as_ref().unwrap().matrix(), &flipped, 1e-14));
    }

    #[test]
    fn generalized_requires_completeness() {
        let err = from_generalized(vec![diag(&[1.0, 0.5])], &tol()).unwrap_err();
        assert!(matches!(err, Error::Incomplete { .. }));
    }

    #[test]
    fn generalized_induced_povm_is_m_dagger_m() {
        let m0 = Matrix::from_row_slice(2, 2, &[cr(0.6), c(0.0, 0.2), cr(0.0), cr(0.3)]);
        // complete with M1 = √(I − M0†M0)
        let rest = psd_sqrt(&(identity(2) - m0.adjoint() * &m0), &tol()).unwrap();
        let inst = from_generalized(vec![m0.clone(), rest.clone()], &tol()).unwrap();
        let p = induced_povm(&inst, &tol()).unwrap();
        assert!(close(p.outcomes()[0].1.matrix(), &(m0.adjoint() * &m0), 1e-14));
        assert!(close(p.outcomes()[1].1.matrix(), &(&rest * &rest), 1e-14));
    }

    #[test]
    fn polar_split_matches_generalized() {
        let m0 = Matrix::from_row_slice(2, 2, &[cr(0.0), cr(0.7), c(0.1, 0.1), cr(0.2)]);
        let rest = psd_sqrt(&(identity(2) - m0.adjoint() * &m0), &tol()).unwrap();
        let ms = vec![m0, rest];
        let a = from_generalized(ms.clone(), &tol()).unwrap();
        let b = polar_split(&ms, &tol()).unwrap();
        let rho = real_matrix(2, 2, &[0.3, 0.1, 0.1, 0.7]);
        for ((_, x), (_, y)) in a.outcomes().iter().zip(b.outcomes()) {
            assert!(close(&x.apply(&rho).unwrap(), &y.apply(&rho).unwrap(), 1e-13));
        }
    }

    #[test]
    fn effect_channel_pairs_with_identity_channels_is_luders() {
        let p = trine();
        let pairs = p
            .outcomes()
            .iter()
            .map(|(l, e)| (l.clone(), e.clone(), KrausChannel::identity(2)))
            .collect();
        let a = from_effect_channel_pairs(pairs, &tol()).unwrap();
        let b = luders_from_povm(&p, &tol()).unwrap();
        let rho = real_matrix(2, 2, &[0.25, 0.4, 0.4, 0.75]);
        for ((_, x), (_, y)) in a.outcomes().iter().zip(b.outcomes()) {
            assert!(close(&x.apply(&rho).unwrap(), &y.apply(&rho).unwrap(), 1e-15));
        }
    }

    #[test]
    fn effect_channel_pairs_reject_non_tp_channel() {
        let e = Effect::new(identity(2), &tol()).unwrap();
        let k = KrausChannel::conjugation(identity(2).scale(0.5));
        let err = from_effect_channel_pairs(vec![("0".into(), e, k)], &tol()).unwrap_err();
        assert!(matches!(err, Error::NotTracePreserving { .. }));
    }

    #[test]
    fn effect_channel_pairs_reject_incomplete_effects() {
        let e = Effect::new(diag(&[1.0, 0.0]), &tol()).unwrap();
        let err =
            from_effect_channel_pairs(vec![("0".into(), e, KrausChannel::identity(2))], &tol())
                .unwrap_err();
        assert!(matches!(err, Error::Incomplete { .. }));
    }

    #[test]
    fn atom_excited_outcome_resets_to_ground() {
        let inst = atom();
        let ground = diag(&[1.0, 0.0, 0.0]);
        for rho in [
            diag(&[0.0, 1.0, 0.0]),
            diag(&[0.0, 0.0, 1.0]),
            real_matrix(3, 3, &[0.2, 0.1, 0.0, 0.1, 0.4, 0.2, 0.0, 0.2, 0.4]),
        ] {
            let rho = DensityOperator::new(rho, &tol()).unwrap();
            let br = apply_instrument(&inst, &rho).unwrap();
            assert!(close(br[1].state.as_ref().unwrap().matrix(), &ground, 1e-14));
        }
    }

    #[test]
    fn atom_on_half_excited_half_ground() {
        let rho = DensityOperator::new(diag(&[0.5, 0.5, 0.0]), &tol()).unwrap();
        let br = apply_instrument(&atom(), &rho).unwrap();
        assert!((br[1].probability - 0.5).abs() < 1e-15);
        assert!(close(br[1].state.as_ref().unwrap().matrix(), &diag(&[1.0, 0.0, 0.0]), 1e-15));
        assert!((br[0].probability - 0.5).abs() < 1e-15);
    }

    #[test]
    fn unitary_channels_give_rotated_post_states() {
        let t = tol();
        let h = real_matrix(2, 2, &[0.0, 0.8, 0.8, 0.0]);
        let u = matkit::unitary_from_hermitian(&h, &t).unwrap();
        let p = Povm::computational(2, &t).unwrap();
        let pairs = p
            .outcomes()
            .iter()
            .map(|(l, e)| (l.clone(), e.clone(), KrausChannel::conjugation(u.clone())))
            .collect();
        let inst = from_effect_channel_pairs(pairs, &t).unwrap();
        let br = apply_instrument(&inst, &plus()).unwrap();
        let expected = &u * diag(&[1.0, 0.0]) * u.adjoint();
        assert!(close(br[0].state.as_ref().unwrap().matrix(), &expected, 1e-14));
    }

    #[test]
    fn z_measurement_on_plus() {
        let inst = luders_from_povm(&Povm::computational(2, &tol()).unwrap(), &tol()).unwrap();
        let br = apply_instrument(&inst, &plus()).unwrap();
        assert_eq!(br[0].label, "0");
        assert!((br[0].probability - 0.5).abs() < 1e-15);
        assert!(close(br[0].state.as_ref().unwrap().matrix(), &diag(&[1.0, 0.0]), 1e-15));
        assert!(close(br[1].state.as_ref().unwrap().matrix(), &diag(&[0.0, 1.0]), 1e-15));
    }

    #[test]
    fn eigen_input_is_undisturbed() {
        let inst = luders_from_povm(&Povm::computational(2, &tol()).unwrap(), &tol()).unwrap();
        let rho = DensityOperator::new(diag(&[0.0, 1.0]), &tol()).unwrap();
        let br = apply_instrument(&inst, &rho).unwrap();
        assert_eq!(br[0].probability, 0.0);
        assert!(br[0].state.is_none());
        assert!((br[1].probability - 1.0).abs() < 1e-15);
        assert!(close(br[1].state.as_ref().unwrap().matrix(), rho.matrix(), 1e-15));
    }

    #[test]
    fn fuse_with_trivial_second_relabels_first() {
        let first = luders_from_povm(&trine(), &tol()).unwrap();
        let second = luders_from_povm(&Povm::trivial(2), &tol()).unwrap();
        let fused = fuse_sequential(&first, &second, &tol()).unwrap();
        let labels: Vec<_> = fused.labels().collect();
        assert_eq!(labels, vec!["0·0", "1·0", "2·0"]);
        let rho = real_matrix(2, 2, &[0.6, 0.3, 0.3, 0.4]);
        for ((_, a), (_, b)) in first.outcomes().iter().zip(fused.outcomes()) {
            assert!(close(&a.apply(&rho).unwrap(), &b.apply(&rho).unwrap(), 1e-15));
        }
    }

    #[test]
    fn z_then_x_on_zero() {
        // two-step oracle: p(0) = 1, then X on |0⟩ gives ½, ½
        let t = tol();
        let z = luders_from_povm(&Povm::computational(2, &t).unwrap(), &t).unwrap();
        let s = 0.5f64.sqrt();
        let xp = projector(&ket(&[cr(s), cr(s)]));
        let xm = projector(&ket(&[cr(s), cr(-s)]));
        let x = luders_from_povm(
            &Povm::new(
                vec![
                    ("+".into(), Effect::new(xp, &t).unwrap()),
                    ("-".into(), Effect::new(xm, &t).unwrap()),
                ],
                &t,
            )
            .unwrap(),
            &t,
        )
        .unwrap();
        let fused = fuse_sequential(&z, &x, &t).unwrap();
        let rho = DensityOperator::new(diag(&[1.0, 0.0]), &t).unwrap();
        let p = probabilities(&rho, &induced_povm(&fused, &t).unwrap()).unwrap();
        let got: Vec<(&str, f64)> = p.iter().map(|(l, x)| (l.as_str(), *x)).collect();
        let expected = [("0·+", 0.5), ("0·-", 0.5), ("1·+", 0.0), ("1·-", 0.0)];
        for ((l, x), (el, ex)) in got.iter().zip(expected) {
            assert_eq!(*l, el);
            assert!((x - ex).abs() < 1e-15);
        }
    }

    #[test]
    fn fuse_checks_dimension_chain() {
        let a = luders_from_povm(&Povm::computational(2, &tol()).unwrap(), &tol()).unwrap();
        let b = luders_from_povm(&Povm::computational(3, &tol()).unwrap(), &tol()).unwrap();
        assert!(matches!(
            fuse_sequential(&a, &b, &tol()),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn instrument_rejects_incomplete_maps() {
        let err = Instrument::from_maps(vec![KrausChannel::conjugation(diag(&[1.0, 0.0]))], &tol())
            .unwrap_err();
        assert!(matches!(err, Error::NotTracePreserving { .. }));
    }
}
