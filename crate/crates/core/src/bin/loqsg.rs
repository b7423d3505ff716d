use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use loqsg::circuit::decompose;
use loqsg::dilation::{extend_rescaled, extend_to_unitary, UNIT_TOL};
use loqsg::inverse::{ClassRepresentative, ClassRepresentativeJson};
use loqsg::io::{read_json, to_json_string};
use loqsg::pipeline::{pipeline, simulate, solve_report, verify, BudgetJson, ProblemFile, ReportFile, SimulateFile, SolveReport};
use loqsg::scalingopt::optimize_class;
use loqsg::{Convention, Error, ModeMatrix, Result};

/// Synthesize and verify linear-optical heralded state generators.
///
/// Budgets can also be set with LOQSG_MAX_BASIS, LOQSG_MAX_PAIRS,
/// LOQSG_MAX_TERMS, LOQSG_MAX_QUOTIENT and LOQSG_TIMEOUT_SECS.
#[derive(Parser)]
#[command(name = "loqsg", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Clone)]
struct Common {
    /// Singular values within this distance of 1 need no ancilla.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Optimizer seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Solver caps, e.g. `max_basis=2000,timeout_secs=60`.
    #[arg(long, global = true, value_parser = parse_budget)]
    budget: Option<BudgetJson>,
    /// Write JSON here instead of stdout.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    /// How detected photon numbers enter amplitudes.
    #[arg(long, global = true, value_enum)]
    convention: Option<ConventionArg>,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum ConventionArg {
    Amplitude,
    Coefficient,
}

impl From<ConventionArg> for Convention {
    fn from(c: ConventionArg) -> Self {
        match c {
            ConventionArg::Amplitude => Convention::Amplitude,
            ConventionArg::Coefficient => Convention::Coefficient,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Herald a matrix, input and detection pattern.
    Simulate { file: PathBuf },
    /// Enumerate solution classes of a synthesis problem.
    Solve { problem: PathBuf },
    /// Embed a contraction in a unitary.
    Dilate {
        matrix: PathBuf,
        /// Divide by the operator norm first when it exceeds 1.
        #[arg(long)]
        rescale: bool,
    },
    /// Maximize the success probability of one class.
    Optimize {
        problem: PathBuf,
        /// A representative, or the output of `solve`.
        representative: PathBuf,
        /// Class to pick from a `solve` output.
        #[arg(long, default_value_t = 0)]
        class: usize,
    },
    /// Write a unitary as a beam-splitter mesh.
    Decompose {
        unitary: PathBuf,
        /// Print a table instead of JSON.
        #[arg(long)]
        table: bool,
    },
    /// Solve, optimize, dilate, decompose and verify.
    Pipeline { problem: PathBuf },
    /// Re-check a report by independent simulation.
    Verify { report: PathBuf },
}

fn parse_budget(s: &str) -> std::result::Result<BudgetJson, String> {
    let mut b = BudgetJson::default();
    for item in s.split(',').filter(|i| !i.is_empty()) {
        let (k, v) = item.split_once('=').ok_or_else(|| format!("expected key=value, got `{item}`"))?;
        let n = |v: &str| v.parse::<usize>().map_err(|e| format!("{k}: {e}"));
        match k.trim() {
            "max_basis" => b.max_basis = Some(n(v)?),
            "max_pairs" => b.max_pairs = Some(n(v)?),
            "max_terms" => b.max_terms = Some(n(v)?),
            "max_quotient_dim" => b.max_quotient_dim = Some(n(v)?),
            "timeout_secs" => b.timeout_secs = Some(n(v)? as u64),
            other => return Err(format!("unknown budget key `{other}`")),
        }
    }
    Ok(b)
}

#[derive(Deserialize)]
#[serde(untagged)]
enum MatrixFile {
    Matrix { matrix: ModeMatrix },
    Unitary { unitary: ModeMatrix },
    Bare(ModeMatrix),
}

impl MatrixFile {
    fn into_matrix(self) -> ModeMatrix {
        match self {
            MatrixFile::Matrix { matrix } | MatrixFile::Unitary { unitary: matrix } | MatrixFile::Bare(matrix) => matrix,
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RepresentativeFile {
    Solve(SolveReport),
    Single(ClassRepresentativeJson),
}

#[derive(Serialize)]
struct ErrorJson<'a> {
    error: &'a str,
    message: String,
}

fn apply_common(mut file: ProblemFile, common: &Common) -> ProblemFile {
    if let Some(b) = &common.budget {
        let merged = BudgetJson {
            max_basis: b.max_basis.or(file.budget.max_basis),
            max_pairs: b.max_pairs.or(file.budget.max_pairs),
            max_terms: b.max_terms.or(file.budget.max_terms),
            max_quotient_dim: b.max_quotient_dim.or(file.budget.max_quotient_dim),
            timeout_secs: b.timeout_secs.or(file.budget.timeout_secs),
        };
        file.budget = merged;
    }
    if let Some(s) = common.seed {
        file.seed = s;
        if let Some(o) = &mut file.optimizer {
            o.seed = s;
        }
    }
    if let Some(t) = common.tol {
        file.tolerances.dilation = t;
    }
    if let Some(c) = common.convention {
        file.convention = c.into();
    }
    file
}

fn emit(text: &str, output: Option<&Path>) -> Result<()> {
    match output {
        Some(p) => std::fs::write(p, format!("{text}\n")).map_err(|e| Error::Io(format!("{}: {e}", p.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            writeln!(out, "{text}").map_err(|e| Error::Io(e.to_string()))
        }
    }
}

/// Runs a subcommand; `Ok(false)` means a verification verdict of fail.
fn run(cli: &Cli) -> Result<bool> {
    let common = &cli.common;
    let out = common.output.as_deref();
    let tol = common.tol.unwrap_or(UNIT_TOL);
    match &cli.command {
        Command::Simulate { file } => {
            let mut f: SimulateFile = read_json(file)?;
            if let Some(c) = common.convention {
                f.convention = c.into();
            }
            emit(&to_json_string(&simulate(&f)?)?, out)?;
        }
        Command::Solve { problem } => {
            let f = apply_common(read_json(problem)?, common);
            emit(&to_json_string(&solve_report(&f)?)?, out)?;
        }
        Command::Dilate { matrix, rescale } => {
            let m = read_json::<MatrixFile>(matrix)?.into_matrix();
            let r = if *rescale { extend_rescaled(&m, tol)? } else { extend_to_unitary(&m, tol)? };
            emit(&to_json_string(&r)?, out)?;
        }
        Command::Optimize { problem, representative, class } => {
            let f = apply_common(read_json(problem)?, common);
            let rep = match read_json::<RepresentativeFile>(representative)? {
                RepresentativeFile::Single(r) => r,
                RepresentativeFile::Solve(s) => s.representatives.get(*class).cloned().ok_or_else(|| {
                    Error::InvalidProblem(format!("class {class} out of range ({} classes)", s.representatives.len()))
                })?,
            };
            let r = optimize_class(&ClassRepresentative::from_wire(&rep), &f.to_problem()?, &f.opt_config())?;
            emit(&to_json_string(&r)?, out)?;
        }
        Command::Decompose { unitary, table } => {
            let u = read_json::<MatrixFile>(unitary)?.into_matrix();
            let c = decompose(&u)?;
            if *table {
                emit(c.table().trim_end(), out)?;
            } else {
                emit(&to_json_string(&c)?, out)?;
            }
        }
        Command::Pipeline { problem } => {
            let f = apply_common(read_json(problem)?, common);
            emit(&to_json_string(&pipeline(&f)?)?, out)?;
        }
        Command::Verify { report } => {
            let r: ReportFile = read_json(report)?;
            let v = verify(&r)?;
            emit(&to_json_string(&v)?, out)?;
            return Ok(v.passed);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(4),
        Err(e) => {
            let msg = ErrorJson { error: e.code(), message: e.to_string() };
            eprintln!("{}", serde_json::to_string(&msg).unwrap_or_else(|_| e.to_string()));
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
