//! Problem and report files, the end-to-end chain, and report verification.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::circuit::{decompose, replay, Circuit};
use crate::dilation::{extend_to_unitary, UNIT_TOL};
use crate::error::{Error, Result};
use crate::fockpoly::FockState;
use crate::forward::{fidelity, herald, herald_via_permanent, Convention, MeasurementPattern, ModeMatrix};
use crate::inverse::groebner::Budget;
use crate::inverse::{solve_problem, ClassRepresentativeJson, Gauge, SolveOptions, SolveOutcome, SynthesisProblem};
use crate::io::{state_from_wire, AmplitudeJson, ComplexJson};
use crate::scalingopt::{optimize_all, OptConfig, ScalingPoint};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MeasurementJson {
    pub modes: Vec<usize>,
    pub counts: Vec<u32>,
}

/// Optional overrides of the solver caps; unset fields keep their defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetJson {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_basis: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_pairs: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_terms: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_quotient_dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timeout_secs: Option<u64>,
}

impl BudgetJson {
    pub fn apply(&self, mut b: Budget) -> Budget {
        if let Some(v) = self.max_basis {
            b.max_basis = v;
        }
        if let Some(v) = self.max_pairs {
            b.max_pairs = v;
        }
        if let Some(v) = self.max_terms {
            b.max_terms = v;
        }
        if let Some(v) = self.max_quotient_dim {
            b.max_quotient_dim = v;
        }
        if let Some(v) = self.timeout_secs {
            b.timeout = Some(std::time::Duration::from_secs(v));
        }
        b
    }
}

/// Acceptance thresholds used by the pipeline and by [`verify`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// Singular values this close to 1 need no ancilla.
    pub dilation: f64,
    /// Largest allowed entry of `U†U − 1`.
    pub unitarity: f64,
    /// Required fidelity is `1 − fidelity`.
    pub fidelity: f64,
    /// Relative agreement of recomputed success probabilities.
    pub probability: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { dilation: UNIT_TOL, unitarity: 1e-9, fidelity: 1e-8, probability: 1e-6 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemFile {
    pub modes: usize,
    pub input: Vec<u32>,
    pub measurement: MeasurementJson,
    pub target: Vec<AmplitudeJson>,
    #[serde(default)]
    pub budget: BudgetJson,
    #[serde(default)]
    pub optimizer: Option<OptConfig>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub convention: Convention,
    #[serde(default)]
    pub seed: u64,
}

impl ProblemFile {
    pub fn to_problem(&self) -> Result<SynthesisProblem> {
        let meas = MeasurementPattern::new(self.measurement.modes.clone(), self.measurement.counts.clone())?;
        SynthesisProblem::new(self.modes, FockState(self.input.clone()), meas, state_from_wire(&self.target)?)
    }

    pub fn solve_options(&self) -> SolveOptions {
        SolveOptions {
            budget: self.budget.apply(Budget::from_env()),
            convention: self.convention,
            specialize_free: true,
            enforce_bound: true,
        }
    }

    pub fn opt_config(&self) -> OptConfig {
        let mut c = self.optimizer.clone().unwrap_or_default();
        if self.optimizer.is_none() {
            c.seed = self.seed;
        }
        c
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationJson {
    pub fidelity: f64,
    pub success_probability: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolutionJson {
    /// Position in the solver's class list.
    pub class: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub representative: Option<ClassRepresentativeJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<ComplexJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scalings: Option<ScalingPoint>,
    pub p_success: f64,
    pub d: usize,
    pub total_modes: usize,
    pub unitary: ModeMatrix,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub circuit: Option<Circuit>,
    pub verification: VerificationJson,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverSummary {
    pub gauge: Gauge,
    pub rejected_gauges: Vec<Gauge>,
    pub variables: Vec<String>,
    pub generators: usize,
    pub basis_size: usize,
    pub classes: usize,
    /// Free variables pinned to pick points of a positive-dimensional set.
    pub specializations: BTreeMap<String, String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub tool: String,
    pub version: String,
    pub problem: ProblemFile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverSummary>,
    pub solutions: Vec<SolutionJson>,
    /// Index into `solutions`.
    pub best: usize,
    /// Solutions dropped because their forward check failed.
    #[serde(default)]
    pub rejected: usize,
}

fn summarize(solved: &SolveOutcome) -> SolverSummary {
    let system = &solved.system;
    SolverSummary {
        gauge: system.gauge.clone(),
        rejected_gauges: solved.rejected_gauges.clone(),
        variables: system.variables.clone(),
        generators: system.generators.len(),
        basis_size: solved.basis.len(),
        classes: solved.representatives.len(),
        specializations: system
            .specializations
            .iter()
            .map(|(v, val)| (system.variables[*v].clone(), val.re.to_string()))
            .collect(),
    }
}

fn padded_scenario(problem: &SynthesisProblem, ancillas: usize) -> (FockState, MeasurementPattern) {
    (problem.input.padded(ancillas), problem.measurement.with_vacuum_modes(problem.modes, ancillas))
}

/// Heralds `unitary` with vacuum on the ancillas and compares with the target.
fn forward_check(
    unitary: &ModeMatrix,
    problem: &SynthesisProblem,
    convention: Convention,
) -> Result<VerificationJson> {
    let (input, meas) = padded_scenario(problem, unitary.dim() - problem.modes);
    let out = herald(unitary, &input, &meas, convention)?;
    let fid = fidelity(&out.state, &problem.target).unwrap_or(0.0);
    Ok(VerificationJson { fidelity: fid, success_probability: out.success_probability })
}

/// Solve, optimize every class, dilate, decompose and re-simulate.
pub fn pipeline(file: &ProblemFile) -> Result<ReportFile> {
    let problem = file.to_problem()?;
    let solved = solve_problem(&problem, &file.solve_options())?;
    let ranked = optimize_all(&solved.representatives, &problem, &file.opt_config())?;
    let tol = &file.tolerances;

    let mut solutions = Vec::new();
    let mut rejected = 0;
    for (class, opt) in ranked {
        let rep = &solved.representatives[class];
        let Ok(dil) = extend_to_unitary(&opt.scaled_matrix, tol.dilation) else {
            rejected += 1;
            continue;
        };
        let circuit = decompose(&dil.unitary)?;
        let check = forward_check(&dil.unitary, &problem, file.convention)?;
        let replay_ok = replay(&circuit)?.max_abs_diff(&dil.unitary) <= 1e-9;
        let p_ok = (check.success_probability - opt.p_success).abs() <= tol.probability * opt.p_success;
        if check.fidelity < 1.0 - tol.fidelity || !replay_ok || !p_ok {
            rejected += 1;
            continue;
        }
        solutions.push(SolutionJson {
            class,
            representative: Some(rep.to_wire()),
            alpha: Some(rep.alpha.into()),
            scalings: Some(opt.point.clone()),
            p_success: check.success_probability,
            d: dil.d,
            total_modes: dil.total_modes(),
            unitary: dil.unitary,
            circuit: Some(circuit),
            verification: check,
        });
    }
    if solutions.is_empty() {
        return Err(Error::VerificationFailed(format!("all {rejected} candidate solutions failed the forward check")));
    }
    Ok(ReportFile {
        tool: "loqsg".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        problem: file.clone(),
        solver: Some(summarize(&solved)),
        solutions,
        best: 0,
        rejected,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckJson {
    pub solution: usize,
    pub check: String,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyOutcome {
    pub passed: bool,
    pub checks: Vec<CheckJson>,
}

/// Re-simulates every solution through permanents alone and re-checks
/// unitarity, fidelity, the reported success probability, the circuit and,
/// if present, the embedded representative.
pub fn verify(report: &ReportFile) -> Result<VerifyOutcome> {
    if report.solutions.is_empty() {
        return Err(Error::InvalidProblem("report contains no solutions".into()));
    }
    let problem = report.problem.to_problem()?;
    let tol = &report.problem.tolerances;
    let mut checks = Vec::new();
    let mut push = |solution: usize, check: &str, value: f64, threshold: f64, passed: bool| {
        checks.push(CheckJson { solution, check: check.into(), value, threshold, passed });
    };
    for (k, s) in report.solutions.iter().enumerate() {
        let u = &s.unitary;
        let dev = u.unitarity_deviation();
        push(k, "unitarity", dev, tol.unitarity, dev <= tol.unitarity);
        if u.dim() < problem.modes || u.dim() != s.total_modes {
            push(k, "mode_count", u.dim() as f64, s.total_modes as f64, false);
            continue;
        }
        let (input, meas) = padded_scenario(&problem, u.dim() - problem.modes);
        let out = herald_via_permanent(u, &input, &meas, report.problem.convention)?;
        let fid = fidelity(&out.state, &problem.target).unwrap_or(0.0);
        push(k, "fidelity", fid, 1.0 - tol.fidelity, fid >= 1.0 - tol.fidelity);
        let rel = (out.success_probability - s.p_success).abs() / s.p_success.abs().max(1e-300);
        push(k, "success_probability", rel, tol.probability, rel <= tol.probability);
        if let Some(c) = &s.circuit {
            let err = replay(c).map(|m| m.max_abs_diff(u)).unwrap_or(f64::INFINITY);
            push(k, "circuit_replay", err, 1e-9, err <= 1e-9);
        }
        if let (Some(rep), Some(x)) = (&s.representative, &s.scalings) {
            // the leading block must be X·A·Y for the reported representative
            let scaled =
                crate::scalingopt::scaled_matrix(&rep.matrix, x, &problem.measurement.modes);
            let err = u.leading_block(problem.modes).max_abs_diff(&scaled);
            push(k, "embedding", err, 1e-8, err <= 1e-8);
        }
    }
    let passed = checks.iter().all(|c| c.passed);
    Ok(VerifyOutcome { passed, checks })
}

/// Report for an externally supplied unitary, for use with [`verify`].
pub fn report_for_unitary(problem: ProblemFile, unitary: ModeMatrix) -> Result<ReportFile> {
    let p = problem.to_problem()?;
    let check = forward_check(&unitary, &p, problem.convention)?;
    Ok(ReportFile {
        tool: "loqsg".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        solutions: vec![SolutionJson {
            class: 0,
            representative: None,
            alpha: None,
            scalings: None,
            p_success: check.success_probability,
            d: unitary.dim() - p.modes,
            total_modes: unitary.dim(),
            circuit: decompose(&unitary).ok(),
            unitary,
            verification: check,
        }],
        problem,
        solver: None,
        best: 0,
        rejected: 0,
    })
}

/// Output of the `solve` stage alone.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub solver: SolverSummary,
    pub representatives: Vec<ClassRepresentativeJson>,
}

pub fn solve_report(file: &ProblemFile) -> Result<SolveReport> {
    let problem = file.to_problem()?;
    let solved = solve_problem(&problem, &file.solve_options())?;
    Ok(SolveReport {
        solver: summarize(&solved),
        representatives: solved.representatives.iter().map(|r| r.to_wire()).collect(),
    })
}

/// Input of the `simulate` stage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulateFile {
    pub matrix: ModeMatrix,
    pub input: Vec<u32>,
    pub measurement: MeasurementJson,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<Vec<AmplitudeJson>>,
    #[serde(default)]
    pub convention: Convention,
}

pub fn simulate(file: &SimulateFile) -> Result<crate::forward::HeraldedOutputJson> {
    let meas = MeasurementPattern::new(file.measurement.modes.clone(), file.measurement.counts.clone())?;
    let out = herald(&file.matrix, &FockState(file.input.clone()), &meas, file.convention)?;
    let target = file.target.as_deref().map(state_from_wire).transpose()?;
    Ok(out.to_wire(target.as_ref()))
}
