//! Seeded random states, channels, effects and instruments.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::channels::KrausChannel;
use crate::matkit::{self, c, cr, Matrix, C64};
use crate::measure::{Effect, Instrument, Povm};
use crate::states::{purify, steered_part, DensityOperator, Ensemble};
use crate::tol::Tolerance;

pub type TrialRng = ChaCha8Rng;

/// Seed of trial `index` in a run started from `base`.
pub fn trial_seed(base: u64, index: usize) -> u64 {
    base.wrapping_add(index as u64)
}

pub fn rng_for(seed: u64) -> TrialRng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    c(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

pub fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| gaussian(rng))
}

/// Haar-random unit vector.
pub fn haar_vector<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> DVector<C64> {
    let v = DVector::from_fn(dim, |_, _| gaussian(rng));
    let n = v.norm();
    v / cr(n)
}

pub fn pure_state<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> DensityOperator {
    DensityOperator::from_pure(&haar_vector(rng, dim)).expect("gaussian vector is nonzero")
}

/// G G†/tr(G G†) for a dim × rank Ginibre matrix G.
pub fn density_with_rank<R: Rng + ?Sized>(rng: &mut R, dim: usize, rank: usize) -> DensityOperator {
    let g = gaussian_matrix(rng, dim, rank.max(1));
    DensityOperator::from_unnormalized(&(&g * g.adjoint()))
}

/// Full-rank random mixed state.
pub fn density<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> DensityOperator {
    density_with_rank(rng, dim, dim)
}

/// Isometry C^{cols} → C^{rows} with orthonormal columns.
pub fn isometry<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> Matrix {
    assert!(rows >= cols);
    let g = gaussian_matrix(rng, rows, cols);
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    // fix column phases so the distribution is Haar
    for j in 0..cols {
        let d = r[(j, j)];
        if d.norm() > 0.0 {
            let phase = d / d.norm();
            let mut col = q.column_mut(j);
            col *= phase;
        }
    }
    q
}

pub fn unitary<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Matrix {
    isometry(rng, dim, dim)
}

/// Kraus operators sliced from an isometry C^{d_in} → C^{d_out}⊗C^{n}.
fn sliced_kraus<R: Rng + ?Sized>(rng: &mut R, d_in: usize, d_out: usize, n: usize) -> Vec<Matrix> {
    let v = isometry(rng, d_out * n, d_in);
    (0..n)
        .map(|e| v.view((e * d_out, 0), (d_out, d_in)).into_owned())
        .collect()
}

/// Fewest Kraus operators a trace-preserving map C^{d_in} → C^{d_out} can have.
pub fn min_kraus(d_in: usize, d_out: usize) -> usize {
    d_in.div_ceil(d_out)
}

/// Random CPTP map with `n_kraus` Kraus operators (Stinespring isometry),
/// raised to [`min_kraus`] when that is larger.
pub fn cptp<R: Rng + ?Sized>(rng: &mut R, d_in: usize, d_out: usize, n_kraus: usize) -> KrausChannel {
    let n = n_kraus.max(min_kraus(d_in, d_out));
    KrausChannel::new(d_in, d_out, sliced_kraus(rng, d_in, d_out, n))
        .expect("slices have the declared shape")
}

/// Random instrument: one isometry split into `outcomes` groups of `kraus_per_outcome`
/// (raised as needed so the isometry exists).
pub fn instrument<R: Rng + ?Sized>(
    rng: &mut R,
    d_in: usize,
    d_out: usize,
    outcomes: usize,
    kraus_per_outcome: usize,
    tol: &Tolerance,
) -> Instrument {
    let kraus_per_outcome = kraus_per_outcome.max(min_kraus(d_in, d_out * outcomes));
    let mut ops = sliced_kraus(rng, d_in, d_out, outcomes * kraus_per_outcome).into_iter();
    let maps = (0..outcomes)
        .map(|_| {
            let kraus = ops.by_ref().take(kraus_per_outcome).collect();
            KrausChannel::new(d_in, d_out, kraus).expect("slices have the declared shape")
        })
        .collect();
    Instrument::from_maps(maps, tol).expect("isometry slices are complete")
}

/// Random generalized-measurement operators {M_μ} with Σ M†M = I.
pub fn measurement_operators<R: Rng + ?Sized>(rng: &mut R, dim: usize, outcomes: usize) -> Vec<Matrix> {
    sliced_kraus(rng, dim, dim, outcomes)
}

pub fn povm<R: Rng + ?Sized>(rng: &mut R, dim: usize, outcomes: usize, tol: &Tolerance) -> Povm {
    let mats = measurement_operators(rng, dim, outcomes)
        .into_iter()
        .map(|m| matkit::hermitize(&(m.adjoint() * m)))
        .collect();
    Povm::from_matrices(mats, tol).expect("isometry slices are complete")
}

/// Effect V diag(λ) V† with `rank` eigenvalues drawn from [0.05, 1] and the rest zero.
pub fn effect<R: Rng + ?Sized>(rng: &mut R, dim: usize, rank: usize, tol: &Tolerance) -> Effect {
    effect_with_root(rng, dim, rank, tol).0
}

/// [`effect`] together with its square root V diag(√λ) V†, exact on the kernel.
///
/// Taking the root of the assembled matrix instead turns the ~1e-17 rounding
/// in its zero eigenvalues into ~1e-9 entries off the support.
pub fn effect_with_root<R: Rng + ?Sized>(
    rng: &mut R,
    dim: usize,
    rank: usize,
    tol: &Tolerance,
) -> (Effect, Matrix) {
    let v = unitary(rng, dim);
    let lambdas: Vec<f64> = (0..dim)
        .map(|k| if k < rank { rng.random_range(0.05..=1.0) } else { 0.0 })
        .collect();
    let roots: Vec<f64> = lambdas.iter().map(|l| l.sqrt()).collect();
    let f = &v * matkit::diag(&lambdas) * v.adjoint();
    let root = &v * matkit::diag(&roots) * v.adjoint();
    let effect = Effect::new(matkit::hermitize(&f), tol).expect("spectrum lies in [0, 1]");
    (effect, matkit::hermitize(&root))
}

/// Two ensembles of the same random state, prepared by two random measurements
/// on the ancilla of its purification. Members are generally mixed.
pub fn steered_pair<R: Rng + ?Sized>(
    rng: &mut R,
    dim: usize,
    tol: &Tolerance,
) -> (Ensemble, Ensemble) {
    let rho = density(rng, dim);
    let psi = purify(&rho, tol).expect("random state is PSD");
    let prepare = |rng: &mut R| {
        let outcomes = rng.random_range(2..=3);
        let alice = povm(rng, dim, outcomes, tol);
        let members = alice
            .outcomes()
            .iter()
            .map(|(_, a)| {
                let part = steered_part(&psi, a.matrix()).expect("effect has ancilla dimension");
                let q = part.trace().re;
                (q, DensityOperator::from_unnormalized(&part))
            })
            .collect();
        Ensemble::new(members, tol).expect("steered weights sum to one")
    };
    let first = prepare(rng);
    let second = prepare(rng);
    (first, second)
}
