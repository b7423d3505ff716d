mod common;

use std::sync::OnceLock;

use common::*;
use loqsg::io::{to_json_string, AmplitudeJson};
use loqsg::pipeline::{pipeline, report_for_unitary, simulate, solve_report, verify, ProblemFile, ReportFile, SimulateFile};
use loqsg::scalingopt::OptConfig;
use loqsg::{Convention, Error};
use num_complex::Complex64;

fn noon5_report() -> &'static ReportFile {
    static CELL: OnceLock<ReportFile> = OnceLock::new();
    CELL.get_or_init(|| pipeline(&noon5_file()).unwrap())
}

fn single_photon() -> ProblemFile {
    problem_file(2, vec![1, 1], (vec![1], vec![1]), vec![AmplitudeJson { occupations: vec![1], re: 1.0, im: 0.0 }])
}

#[test]
fn noon5_best_solution() {
    let r = noon5_report();
    let best = &r.solutions[r.best];
    assert!((best.p_success - 0.05639).abs() < 5e-4);
    assert_eq!((best.d, best.total_modes), (1, 4));
    for s in &r.solutions {
        assert!(s.verification.fidelity >= 1.0 - 1e-8);
        assert!(s.p_success <= best.p_success * (1.0 + 1e-9));
    }
    let solver = r.solver.as_ref().unwrap();
    assert_eq!(solver.classes, r.solutions.len() + r.rejected);
    assert!(solver.specializations.is_empty());
}

#[test]
fn noon5_report_verifies() {
    let v = verify(noon5_report()).unwrap();
    assert!(v.passed, "{:?}", v.checks.iter().filter(|c| !c.passed).collect::<Vec<_>>());
    let kinds: std::collections::BTreeSet<&str> = v.checks.iter().map(|c| c.check.as_str()).collect();
    for k in ["unitarity", "fidelity", "success_probability", "circuit_replay", "embedding"] {
        assert!(kinds.contains(k), "{k}");
    }
}

#[test]
fn corrupted_unitary_fails_verification() {
    let mut r = noon5_report().clone();
    let best = r.best;
    let u = &mut r.solutions[best].unitary;
    let z = u.get(1, 2);
    u.set(1, 2, z + Complex64::new(1e-3, 0.0));
    let v = verify(&r).unwrap();
    assert!(!v.passed);
    let failed: Vec<&str> = v.checks.iter().filter(|c| !c.passed && c.solution == best).map(|c| c.check.as_str()).collect();
    assert!(failed.contains(&"unitarity"));
}

#[test]
fn report_survives_json_roundtrip() {
    let text = to_json_string(noon5_report()).unwrap();
    let back: ReportFile = serde_json::from_str(&text).unwrap();
    assert_eq!(&back, noon5_report());
    assert!(verify(&back).unwrap().passed);
}

#[test]
fn identical_inputs_give_identical_reports() {
    let mut f = noon5_file();
    f.optimizer = Some(OptConfig { restarts: 12, ..OptConfig::default() });
    let a = to_json_string(&pipeline(&f).unwrap()).unwrap();
    let b = to_json_string(&pipeline(&f).unwrap()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn four_digit_reference_unitary_report() {
    let mut f = noon5_file();
    f.tolerances.unitarity = 5e-4;
    f.tolerances.fidelity = 1e-3;
    let r = report_for_unitary(f, reference_unitary()).unwrap();
    assert_eq!(r.solutions[0].d, 1);
    assert!((r.solutions[0].p_success - 0.0564).abs() < 1e-3);
    assert!(verify(&r).unwrap().passed);
}

#[test]
fn heralded_single_photon_pipeline() {
    let r = pipeline(&single_photon()).unwrap();
    assert!(!r.solutions.is_empty());
    assert!((r.solutions[r.best].verification.fidelity - 1.0).abs() < 1e-12);
    assert!(!r.solver.as_ref().unwrap().specializations.is_empty());
    assert!(verify(&r).unwrap().passed);
}

#[test]
fn infeasible_request() {
    let f = problem_file(2, vec![2, 1], (vec![], vec![]), noon_wire(3));
    let e = pipeline(&f).unwrap_err();
    assert!(matches!(e, Error::InfeasibleBound(_)));
    assert_eq!(e.code(), "INFEASIBLE_BOUND");
    assert_eq!(e.exit_code(), 2);
}

#[test]
fn seed_sweep_verifies() {
    let problems = [
        single_photon(),
        problem_file(2, vec![1, 1], (vec![], vec![]), noon_wire(2)),
        problem_file(3, vec![1, 1, 1], (vec![2], vec![1]), noon_wire(2)),
        problem_file(3, vec![1, 1, 1], (vec![2], vec![0]), vec![AmplitudeJson { occupations: vec![1, 2], re: 1.0, im: 0.0 }]),
    ];
    for seed in 0..20u64 {
        let mut f = problems[seed as usize % problems.len()].clone();
        f.seed = seed;
        f.optimizer = Some(OptConfig { restarts: 8, seed, ..OptConfig::default() });
        let r = pipeline(&f).unwrap_or_else(|e| panic!("seed {seed}: {e}"));
        assert!(verify(&r).unwrap().passed, "seed {seed}");
    }
}

#[test]
fn solve_stage_wire_format() {
    let s = solve_report(&noon5_file()).unwrap();
    assert_eq!(s.representatives.len(), s.solver.classes);
    let r = &s.representatives[0];
    assert_eq!(r.fixed_entries.len(), 4);
    assert!(r.fixed_entries.iter().all(|e| e.value == "1"));
}

#[test]
fn simulate_reports_fidelity() {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let bs = loqsg::ModeMatrix::from_rows(&[vec![c(h, 0.0), c(h, 0.0)], vec![c(h, 0.0), c(-h, 0.0)]]).unwrap();
    let f = SimulateFile {
        matrix: bs,
        input: vec![1, 1],
        measurement: Default::default(),
        target: Some(vec![
            AmplitudeJson { occupations: vec![2, 0], re: h, im: 0.0 },
            AmplitudeJson { occupations: vec![0, 2], re: -h, im: 0.0 },
        ]),
        convention: Convention::Amplitude,
    };
    let out = simulate(&f).unwrap();
    assert!((out.fidelity.unwrap() - 1.0).abs() < 1e-12);
    assert!((out.success_probability - 1.0).abs() < 1e-12);
}
