//! Subcommands. Each returns an [`Outcome`]; nothing here prints or exits.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use qinstrument::channels::{choi_from_map, QuantumMap};
use qinstrument::harness::demos::{self, summarize};
use qinstrument::harness::suites::{run_suite, SuiteConfig, SuiteName};
use qinstrument::lemma;
use qinstrument::matkit::{self, identity, matrix_unit, max_abs, to_rows, Matrix};
use qinstrument::measure::{apply_instrument, fuse_sequential, induced_povm, probabilities};
use qinstrument::{DensityOperator, LinearMap, Tolerance};

use crate::format::{FormatError, Object};

pub const EXIT_OK: i32 = 0;
pub const EXIT_PARSE: i32 = 1;
pub const EXIT_INVARIANT: i32 = 2;
pub const EXIT_SUITE: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "qinst", version, about = "Quantum instruments, channels and their decomposition")]
pub struct Cli {
    /// Absolute tolerance for invariant checks.
    #[arg(long, global = true, default_value_t = 1e-9)]
    pub tol: f64,
    /// Relative eigenvalue threshold for rank decisions.
    #[arg(long, global = true, default_value_t = 1e-9)]
    pub rank_tol: f64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a file against the invariants of its declared kind.
    Verify { path: PathBuf },
    /// Fuse two instruments into the single instrument "first, then second".
    Fuse {
        first: PathBuf,
        second: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Split one outcome into an ideal measurement followed by a channel.
    Decompose {
        instrument: PathBuf,
        label: String,
        /// Write the recovered channel here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Outcome probabilities of a POVM or instrument on a state.
    Probs { state: PathBuf, measurement: PathBuf },
    /// Apply a channel to a state.
    Evolve {
        state: PathBuf,
        channel: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a randomized property suite.
    Suite {
        name: SuiteName,
        #[arg(long, default_value_t = 200)]
        trials: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Comma-separated dimensions, e.g. 2,3,4.
        #[arg(long, value_delimiter = ',')]
        dims: Option<Vec<usize>>,
        /// Feed a nonlinear state transformation to the linearity suite.
        #[arg(long)]
        demo_nonlinear: bool,
    },
    /// Run a worked example.
    Demo {
        which: DemoName,
        /// Write the demo's instrument here (stern-gerlach and atom).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum DemoName {
    SternGerlach,
    Atom,
    CorrelatedEnv,
}

/// Exit code, JSON report for stdout and a human summary for stderr.
#[derive(Debug)]
pub struct Outcome {
    pub code: i32,
    pub report: Option<Value>,
    pub human: String,
}

impl Outcome {
    fn ok(report: Value, human: impl Into<String>) -> Self {
        Outcome {
            code: EXIT_OK,
            report: Some(report),
            human: human.into(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Parse(String),
    #[error("{0}")]
    Invariant(#[from] qinstrument::Error),
    #[error("{0}")]
    Io(String),
}

impl From<FormatError> for CliError {
    fn from(e: FormatError) -> Self {
        CliError::Parse(e.to_string())
    }
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Parse(_) | CliError::Io(_) => EXIT_PARSE,
            CliError::Invariant(_) => EXIT_INVARIANT,
        }
    }
}

type CliResult = Result<Outcome, CliError>;

fn load(path: &Path) -> Result<Object, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Object::parse(&text).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
}

fn save(path: &Path, obj: &Object) -> Result<(), CliError> {
    fs::write(path, obj.to_json()).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub fn run<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_PARSE } else { EXIT_OK };
            return Outcome {
                code,
                report: None,
                human: e.to_string(),
            };
        }
    };
    let tol = Tolerance::new(cli.tol, cli.rank_tol);
    let result = match cli.command {
        Command::Verify { path } => verify(&path, &tol),
        Command::Fuse { first, second, out } => fuse(&first, &second, out.as_deref(), &tol),
        Command::Decompose { instrument, label, out } => decompose(&instrument, &label, out.as_deref(), &tol),
        Command::Probs { state, measurement } => probs(&state, &measurement, &tol),
        Command::Evolve { state, channel, out } => evolve(&state, &channel, out.as_deref(), &tol),
        Command::Suite {
            name,
            trials,
            seed,
            dims,
            demo_nonlinear,
        } => Ok(suite(
            name,
            SuiteConfig {
                trials,
                seed,
                dims,
                demo_nonlinear,
                tol,
            },
        )),
        Command::Demo { which, out } => demo(which, out.as_deref(), &tol),
    };
    result.unwrap_or_else(|e| Outcome {
        code: e.code(),
        report: Some(json!({ "error": e.to_string() })),
        human: format!("error: {e}"),
    })
}

fn verdict(kind: &str, checks: Value, result: qinstrument::Result<()>) -> Outcome {
    let valid = result.is_ok();
    let mut report = json!({ "kind": kind, "valid": valid, "checks": checks });
    let human = match &result {
        Ok(()) => format!("{kind}: valid"),
        Err(e) => {
            report["error"] = json!(e.to_string());
            format!("{kind}: INVALID ({e})")
        }
    };
    Outcome {
        code: if valid { EXIT_OK } else { EXIT_INVARIANT },
        report: Some(report),
        human,
    }
}

fn spectrum_bounds(m: &Matrix, tol: &Tolerance) -> Value {
    match matkit::eigenvalues(&matkit::hermitize(m), tol) {
        Ok(ev) => json!({
            "min_eigenvalue": ev.iter().copied().fold(f64::INFINITY, f64::min),
            "max_eigenvalue": ev.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }),
        Err(e) => json!({ "error": e.to_string() }),
    }
}

fn verify(path: &Path, tol: &Tolerance) -> CliResult {
    let obj = load(path)?;
    let kind = obj.kind();
    Ok(match &obj {
        Object::Density(m) => {
            let mut checks = spectrum_bounds(m, tol);
            checks["trace"] = json!(matkit::trace(m).re);
            checks["hermitian_residual"] = json!(matkit::hermitian_residual(m));
            verdict(kind, checks, obj.to_density(tol).map(|_| ()))
        }
        Object::Povm { dim, effects } => {
            let sum = effects.iter().fold(Matrix::zeros(*dim, *dim), |acc, (_, e)| acc + e);
            let per: Vec<Value> = effects
                .iter()
                .map(|(l, e)| {
                    let mut v = spectrum_bounds(e, tol);
                    v["label"] = json!(l);
                    v
                })
                .collect();
            let checks = json!({
                "completeness_residual": max_abs(&(sum - identity(*dim))),
                "effects": per,
            });
            verdict(kind, checks, obj.to_povm(tol).map(|_| ()))
        }
        Object::KrausChannel { .. } => {
            let channel = obj.to_kraus()?;
            let choi = channel.choi();
            let checks = json!({
                "cp": true,
                "choi_min_eigenvalue": choi.min_eigenvalue(tol)?,
                "trace_preservation_residual": channel.trace_preservation_residual(),
            });
            verdict(kind, checks, channel.ensure_trace_preserving(tol))
        }
        Object::Superoperator { .. } => {
            let s = obj.to_superoperator()?;
            let choi = choi_from_map(&s);
            let tp = s.trace_preservation_residual()?;
            let cp = choi.is_cp(tol);
            let checks = json!({
                "cp": cp,
                "choi_min_eigenvalue": choi.min_eigenvalue(tol)?,
                "trace_preserving": tp <= tol.eps,
                "trace_preservation_residual": tp,
            });
            let mut out = verdict(kind, checks, Ok(()));
            out.human = format!("superoperator: parsed (cp: {cp}, trace preserving: {})", tp <= tol.eps);
            out
        }
        Object::Instrument { d_in, outcomes, .. } => {
            let mut total = Matrix::zeros(*d_in, *d_in);
            for (_, ks) in outcomes {
                for k in ks {
                    total += k.adjoint() * k;
                }
            }
            let checks = json!({
                "outcomes": outcomes.len(),
                "trace_preservation_residual": max_abs(&(total - identity(*d_in))),
            });
            verdict(kind, checks, obj.to_instrument(tol).map(|_| ()))
        }
    })
}

fn fuse(first: &Path, second: &Path, out: Option<&Path>, tol: &Tolerance) -> CliResult {
    let a = load(first)?.to_instrument(tol)?;
    let b = load(second)?.to_instrument(tol)?;
    let fused = fuse_sequential(&a, &b, tol)?;
    if let Some(path) = out {
        save(path, &Object::from_instrument(&fused))?;
    }
    let povm = induced_povm(&fused, tol)?;
    let effects: Vec<Value> = povm
        .outcomes()
        .iter()
        .map(|(l, e)| json!({ "label": l, "effect": to_rows(e.matrix()) }))
        .collect();
    let report = json!({
        "dims": [fused.d_in(), fused.d_out()],
        "outcomes": effects,
        "written": out.map(|p| p.display().to_string()),
    });
    Ok(Outcome::ok(report, format!("fused {} x {} outcomes", a.len(), b.len())))
}

fn decompose(path: &Path, label: &str, out: Option<&Path>, tol: &Tolerance) -> CliResult {
    let inst = load(path)?.to_instrument(tol)?;
    let b = inst.outcome(label)?;
    let povm = induced_povm(&inst, tol)?;
    let f = povm.effect(label).expect("induced POVM keeps the instrument's labels");
    let dec = lemma::decompose_with_report(b, f, tol)?;
    let d = inst.d_in();
    let units: Vec<Matrix> = (0..d).flat_map(|i| (0..d).map(move |j| matrix_unit(d, i, j))).collect();
    let residual = lemma::reconstruction_residual(b, &dec.channel, f, &units, tol)?;
    let rank = lemma::kraus_rank(b, tol)?;
    if let Some(path) = out {
        save(path, &Object::from_kraus(&dec.channel))?;
    }
    let report = json!({
        "label": label,
        "effect": to_rows(f.matrix()),
        "channel": dec.channel.kraus().iter().map(to_rows).collect::<Vec<_>>(),
        "trace_preservation_residual": dec.channel.trace_preservation_residual(),
        "premise": dec.premise,
        "reconstruction_residual": residual,
        "kraus_rank": rank,
    });
    let human = format!(
        "outcome '{label}': Kraus rank {rank}, recovered channel has {} Kraus operators, reconstruction {residual:.2e}",
        dec.channel.kraus().len()
    );
    Ok(Outcome::ok(report, human))
}

fn probs(state: &Path, measurement: &Path, tol: &Tolerance) -> CliResult {
    let rho = load(state)?.to_density(tol)?;
    let m = load(measurement)?;
    let (report, lines) = match &m {
        Object::Povm { .. } => {
            let p = probabilities(&rho, &m.to_povm(tol)?)?;
            let lines: Vec<String> = p.iter().map(|(l, p)| format!("{l}: {p:.6}")).collect();
            let items: Vec<Value> = p.iter().map(|(l, p)| json!({ "label": l, "probability": p })).collect();
            (json!({ "probabilities": items }), lines)
        }
        Object::Instrument { .. } => {
            let branches = apply_instrument(&m.to_instrument(tol)?, &rho)?;
            let lines = branches.iter().map(|b| format!("{}: {:.6}", b.label, b.probability)).collect();
            let items: Vec<Value> = branches
                .iter()
                .map(|b| {
                    json!({
                        "label": b.label,
                        "probability": b.probability,
                        "post_state": b.state.as_ref().map(|s| to_rows(s.matrix())),
                    })
                })
                .collect();
            (json!({ "branches": items }), lines)
        }
        other => {
            return Err(CliError::Parse(format!(
                "{}: expected a povm or instrument file, found {}",
                measurement.display(),
                other.kind()
            )))
        }
    };
    Ok(Outcome::ok(report, lines.join("\n")))
}

fn evolve(state: &Path, channel: &Path, out: Option<&Path>, tol: &Tolerance) -> CliResult {
    let rho = load(state)?.to_density(tol)?;
    let c = load(channel)?;
    let map: QuantumMap = match &c {
        Object::KrausChannel { .. } => c.to_kraus()?.into(),
        Object::Superoperator { .. } => c.to_superoperator()?.into(),
        other => {
            return Err(CliError::Parse(format!(
                "{}: expected a kraus_channel or superoperator file, found {}",
                channel.display(),
                other.kind()
            )))
        }
    };
    let image = map.apply(rho.matrix())?;
    let evolved = DensityOperator::new(image, tol)?;
    if let Some(path) = out {
        save(path, &Object::from_density(&evolved))?;
    }
    let report = json!({
        "dim": evolved.dim(),
        "state": to_rows(evolved.matrix()),
        "purity": evolved.purity(),
    });
    Ok(Outcome::ok(report, format!("evolved to dimension {}, purity {:.6}", evolved.dim(), evolved.purity())))
}

fn suite(name: SuiteName, cfg: SuiteConfig) -> Outcome {
    let report = run_suite(name, &cfg);
    let mut human = format!(
        "suite {}: {} over {} trials (seed {}), max residual {:.3e}",
        report.suite,
        if report.passed { "PASS" } else { "FAIL" },
        report.trials,
        report.seed,
        report.max_residual
    );
    for w in report.witnesses.iter().take(5) {
        human.push_str(&format!("\n  trial {} (seed {}): {}", w.trial, w.seed, w.detail));
    }
    Outcome {
        code: if report.passed { EXIT_OK } else { EXIT_SUITE },
        report: Some(serde_json::to_value(&report).expect("report serializes")),
        human,
    }
}

fn demo(which: DemoName, out: Option<&Path>, tol: &Tolerance) -> CliResult {
    let (inst, probe) = match which {
        DemoName::CorrelatedEnv => {
            let r = demos::correlated_env_demo();
            let human = format!(
                "system states start {:.1e} apart and end {:.3} apart in trace norm\nnote: {}",
                r.distance_before, r.distance_after, r.note
            );
            return Ok(Outcome::ok(serde_json::to_value(&r).expect("report serializes"), human));
        }
        DemoName::SternGerlach => (demos::stern_gerlach_demo(), demos::plus_x()),
        DemoName::Atom => (demos::atom_demo(), demos::atom_probe()),
    };
    if let Some(path) = out {
        save(path, &Object::from_instrument(&inst))?;
    }
    let summary = summarize(&inst, &probe, tol)?;
    let human = summary
        .outcomes
        .iter()
        .map(|o| {
            format!(
                "outcome '{}': p = {:.6}, Kraus rank {}, decomposition residual {:.2e}",
                o.label, o.probability, o.kraus_rank, o.reconstruction_residual
            )
        })
        .collect::<Vec<_>>()
        .join("\n");
    Ok(Outcome::ok(serde_json::to_value(&summary).expect("report serializes"), human))
}
