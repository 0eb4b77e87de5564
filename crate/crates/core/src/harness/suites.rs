//! Seeded property suites run over many random trials.
//!
//! Trial `i` draws everything from its own generator seeded with
//! `seed + i`, so any failing trial can be replayed alone.

use rand::seq::IndexedRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::checks::{check_ensemble_program, check_no_signaling, squaring_transform, SignalingWitness, Step};
use super::random::{self, rng_for, trial_seed, TrialRng};
use crate::channels::{KrausChannel, LinearMap};
use crate::error::Result;
use crate::lemma;
use crate::matkit::{cr, matrix_unit, max_abs, Matrix};
use crate::measure::{luders_from_povm, Povm};
use crate::states::BipartiteState;
use crate::tol::Tolerance;

/// Bound on the exact-linearity residual of Kraus-form maps.
pub const LINEARITY_BOUND: f64 = 1e-12;
/// Bound on the lemma's kernel and cross terms.
pub const VANISHING_BOUND: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SuiteName {
    NoSignal,
    Linearity,
    Lemma,
    All,
}

impl SuiteName {
    pub fn as_str(self) -> &'static str {
        match self {
            SuiteName::NoSignal => "nosignal",
            SuiteName::Linearity => "linearity",
            SuiteName::Lemma => "lemma",
            SuiteName::All => "all",
        }
    }

    fn default_dims(self) -> Vec<usize> {
        match self {
            SuiteName::NoSignal => vec![2, 3],
            SuiteName::Linearity => vec![2, 3, 4],
            SuiteName::Lemma | SuiteName::All => vec![2, 3, 4, 5],
        }
    }
}

impl std::str::FromStr for SuiteName {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "nosignal" => Ok(SuiteName::NoSignal),
            "linearity" => Ok(SuiteName::Linearity),
            "lemma" => Ok(SuiteName::Lemma),
            "all" => Ok(SuiteName::All),
            other => Err(format!("unknown suite '{other}'")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SuiteConfig {
    /// Trials per dimension for the lemma suite, in total otherwise.
    pub trials: usize,
    pub seed: u64,
    /// `None` uses each suite's own default.
    pub dims: Option<Vec<usize>>,
    /// Prepend ρ ↦ ρ²/tr(ρ²) to the linearity suite's ensemble program.
    pub demo_nonlinear: bool,
    pub tol: Tolerance,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            trials: 200,
            seed: 42,
            dims: None,
            demo_nonlinear: false,
            tol: Tolerance::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Witness {
    pub trial: usize,
    pub seed: u64,
    pub residual: f64,
    pub detail: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub signaling: Option<SignalingWitness>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub trials: usize,
    pub seed: u64,
    pub dims: Vec<usize>,
    pub max_residual: f64,
    pub threshold: f64,
    pub passed: bool,
    pub witnesses: Vec<Witness>,
    pub trial_seeds: Vec<u64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub suites: Vec<SuiteReport>,
}

struct TrialResult {
    residual: f64,
    failure: Option<(String, Option<SignalingWitness>)>,
}

impl TrialResult {
    fn from_error(e: crate::error::Error) -> Self {
        TrialResult {
            residual: f64::INFINITY,
            failure: Some((format!("error: {e}"), None)),
        }
    }
}

fn run_trials(
    name: SuiteName,
    cfg: &SuiteConfig,
    dims: Vec<usize>,
    count: usize,
    threshold: f64,
    trial: impl Fn(usize, &mut TrialRng) -> Result<TrialResult> + Sync,
) -> SuiteReport {
    let seeds: Vec<u64> = (0..count).map(|i| trial_seed(cfg.seed, i)).collect();
    let results: Vec<TrialResult> = seeds
        .par_iter()
        .enumerate()
        .map(|(i, &s)| trial(i, &mut rng_for(s)).unwrap_or_else(TrialResult::from_error))
        .collect();
    let mut max_residual: f64 = 0.0;
    let mut witnesses = Vec::new();
    for (i, r) in results.into_iter().enumerate() {
        max_residual = max_residual.max(r.residual);
        if let Some((detail, signaling)) = r.failure {
            witnesses.push(Witness {
                trial: i,
                seed: seeds[i],
                residual: r.residual,
                detail,
                signaling,
            });
        }
    }
    SuiteReport {
        suite: name.as_str().to_string(),
        trials: count,
        seed: cfg.seed,
        dims,
        max_residual,
        threshold,
        passed: witnesses.is_empty(),
        witnesses,
        trial_seeds: seeds,
        suites: Vec::new(),
    }
}

fn pick(rng: &mut TrialRng, dims: &[usize]) -> usize {
    *dims.choose(rng).expect("dims is non-empty")
}

/// Random bipartite state and instrument on A; Bob's state must not move.
pub fn no_signal_suite(cfg: &SuiteConfig) -> SuiteReport {
    let dims = cfg.dims.clone().unwrap_or_else(|| SuiteName::NoSignal.default_dims());
    let tol = cfg.tol;
    let d = dims.clone();
    run_trials(SuiteName::NoSignal, cfg, dims, cfg.trials, tol.eps, move |_, rng| {
        let (da, db, d_out) = (pick(rng, &d), pick(rng, &d), pick(rng, &d));
        let rank = rng.random_range(1..=da * db);
        let state = BipartiteState::new(random::density_with_rank(rng, da * db, rank), (da, db))?;
        let outcomes = rng.random_range(2..=3);
        let per = rng.random_range(1..=2);
        let alice = random::instrument(rng, da, d_out, outcomes, per, &tol);
        let report = check_no_signaling(&state, &alice, &tol)?;
        Ok(TrialResult {
            residual: report.residual,
            failure: (!report.passed).then(|| {
                (format!("{da}x{db} state, instrument {da}->{d_out}: Bob's state moved"), None)
            }),
        })
    })
}

fn linearity_residual<M: LinearMap>(map: &M, a: &Matrix, b: &Matrix, p: f64) -> Result<f64> {
    let mixed = map.apply(&(a * cr(p) + b * cr(1.0 - p)))?;
    let separate = map.apply(a)? * cr(p) + map.apply(b)? * cr(1.0 - p);
    Ok(max_abs(&(mixed - separate)))
}

/// Maps respect mixtures; steered ensembles of one state are indistinguishable.
pub fn linearity_suite(cfg: &SuiteConfig) -> SuiteReport {
    let dims = cfg.dims.clone().unwrap_or_else(|| SuiteName::Linearity.default_dims());
    let tol = cfg.tol;
    let nonlinear = cfg.demo_nonlinear;
    let d = dims.clone();
    run_trials(SuiteName::Linearity, cfg, dims, cfg.trials, tol.eps, move |_, rng| {
        let dim = pick(rng, &d);
        let n_kraus = rng.random_range(1..=dim * dim);
        let map = random::cptp(rng, dim, dim, n_kraus);
        let (a, b) = (random::density(rng, dim), random::density(rng, dim));
        let p = rng.random_range(0.0..=1.0);
        let kraus_res = linearity_residual(&map, a.matrix(), b.matrix(), p)?;
        let super_res = linearity_residual(&map.to_superoperator(), a.matrix(), b.matrix(), p)?;
        let lin = kraus_res.max(super_res);

        let (e1, e2) = random::steered_pair(rng, dim, &tol);
        let outcomes = rng.random_range(2..=3);
        let mut program = vec![
            Step::Measure(random::instrument(rng, dim, dim, outcomes, 2, &tol)),
            Step::Measure(luders_from_povm(&Povm::computational(dim, &tol)?, &tol)?),
        ];
        if nonlinear {
            program.insert(0, squaring_transform());
        }
        let ens = check_ensemble_program(&e1, &e2, &program, &tol)?;

        let failure = if lin > LINEARITY_BOUND {
            Some((format!("d={dim}: linearity residual {lin:.3e} exceeds {LINEARITY_BOUND:.0e}"), None))
        } else {
            ens.witnesses.first().map(|w| {
                (
                    format!(
                        "d={dim}: ensembles of one state give p={:.6} vs {:.6} for outcomes {:?}",
                        w.p1, w.p2, w.outcomes
                    ),
                    Some(w.clone()),
                )
            })
        };
        Ok(TrialResult {
            residual: lin.max(ens.max_discrepancy),
            failure,
        })
    })
}

/// Per-trial numbers of the lemma suite, exposed for the acceptance tests.
#[derive(Debug, Clone, Serialize)]
pub struct LemmaTrial {
    pub dim: usize,
    pub effect_rank: usize,
    pub reconstruction: f64,
    pub trace_preservation: f64,
    pub kernel: f64,
    pub cross: f64,
}

/// One random (E₀, F) pair: B = E₀ ∘ Ad_√F, decomposed and checked.
pub fn lemma_trial(rng: &mut TrialRng, dim: usize, tol: &Tolerance) -> Result<LemmaTrial> {
    let d_out = dim;
    let n_kraus = rng.random_range(1..=dim);
    let e0 = random::cptp(rng, dim, d_out, n_kraus);
    let effect_rank = rng.random_range(1..=dim);
    let (f, root) = random::effect_with_root(rng, dim, effect_rank, tol);
    let root = KrausChannel::conjugation(root);
    let b = e0.after(&root)?;
    let dec = lemma::decompose_with_report(&b, &f, tol)?;
    let mut probes: Vec<Matrix> = (0..dim)
        .flat_map(|i| (0..dim).map(move |j| matrix_unit(dim, i, j)))
        .collect();
    probes.push(random::density(rng, dim).into_matrix());
    Ok(LemmaTrial {
        dim,
        effect_rank,
        reconstruction: lemma::reconstruction_residual(&b, &dec.channel, &f, &probes, tol)?,
        trace_preservation: dec.channel.trace_preservation_residual(),
        kernel: dec.premise.kernel_residual,
        cross: dec.premise.cross_residual,
    })
}

/// Decomposition round trip over random channels and (often rank-deficient) effects.
pub fn lemma_suite(cfg: &SuiteConfig) -> SuiteReport {
    let dims = cfg.dims.clone().unwrap_or_else(|| SuiteName::Lemma.default_dims());
    let tol = cfg.tol;
    let per_dim = cfg.trials;
    let d = dims.clone();
    run_trials(SuiteName::Lemma, cfg, dims.clone(), per_dim * dims.len(), tol.eps, move |i, rng| {
        let dim = d[i / per_dim.max(1)];
        let t = lemma_trial(rng, dim, &tol)?;
        let residual = t.reconstruction.max(t.trace_preservation);
        let failure = if residual > tol.eps {
            Some(format!(
                "d={dim}, rank F={}: reconstruction {:.3e}, trace preservation {:.3e}",
                t.effect_rank, t.reconstruction, t.trace_preservation
            ))
        } else if t.kernel.max(t.cross) > VANISHING_BOUND {
            Some(format!(
                "d={dim}, rank F={}: kernel term {:.3e}, cross term {:.3e}",
                t.effect_rank, t.kernel, t.cross
            ))
        } else {
            None
        };
        Ok(TrialResult {
            residual,
            failure: failure.map(|f| (f, None)),
        })
    })
}

pub fn run_suite(name: SuiteName, cfg: &SuiteConfig) -> SuiteReport {
    match name {
        SuiteName::NoSignal => no_signal_suite(cfg),
        SuiteName::Linearity => linearity_suite(cfg),
        SuiteName::Lemma => lemma_suite(cfg),
        SuiteName::All => {
            let suites = vec![no_signal_suite(cfg), linearity_suite(cfg), lemma_suite(cfg)];
            SuiteReport {
                suite: name.as_str().to_string(),
                trials: suites.iter().map(|s| s.trials).sum(),
                seed: cfg.seed,
                dims: cfg.dims.clone().unwrap_or_default(),
                max_residual: suites.iter().map(|s| s.max_residual).fold(0.0, f64::max),
                threshold: cfg.tol.eps,
                passed: suites.iter().all(|s| s.passed),
                witnesses: suites.iter().flat_map(|s| s.witnesses.clone()).collect(),
                trial_seeds: Vec::new(),
                suites,
            }
        }
    }
}

/// First steered pair, out of `max_pairs`, on which `transform` followed by a
/// computational-basis measurement tells the two ensembles apart.
#[derive(Debug, Clone, Serialize)]
pub struct NonlinearWitness {
    pub pair: usize,
    pub seed: u64,
    pub witness: SignalingWitness,
}

pub fn hunt_signaling(
    transform: &Step,
    dim: usize,
    max_pairs: usize,
    seed: u64,
    tol: &Tolerance,
) -> Result<Option<NonlinearWitness>> {
    let measure = Step::Measure(luders_from_povm(&Povm::computational(dim, tol)?, tol)?);
    let program = [transform.clone(), measure];
    for pair in 0..max_pairs {
        let s = trial_seed(seed, pair);
        let (e1, e2) = random::steered_pair(&mut rng_for(s), dim, tol);
        let report = check_ensemble_program(&e1, &e2, &program, tol)?;
        if let Some(w) = report.witnesses.into_iter().next() {
            return Ok(Some(NonlinearWitness { pair, seed: s, witness: w }));
        }
    }
    Ok(None)
}
