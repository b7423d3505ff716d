//! Acceptance criteria, one line each. Exits non-zero if any criterion fails.

mod common;

use std::process::ExitCode;

use loqsg::circuit::{decompose, replay};
use loqsg::dilation::{extend_to_unitary, vacuum_consistency_check, UNIT_TOL};
use loqsg::fockpoly::{gaussian, state_from_poly, Poly};
use loqsg::forward::{
    amplitude_via_permanent, build_output_poly, compositions, fidelity, herald, herald_all_outcomes,
};
use loqsg::inverse::groebner::Budget;
use loqsg::inverse::{noon_bound, solve_problem, solve_triangular, GroebnerBasis, SolveOptions};
use loqsg::pipeline::{pipeline, verify, ReportFile};
use loqsg::scalingopt::{feasibility_direct, feasibility_schur, ScalingPoint};
use loqsg::{Convention, Error, FockState, MeasurementPattern, ModeMatrix, Monomial, SymbolicPoly};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;

enum Status {
    Pass,
    Fail,
    /// Passes everything but a clause that is false as written.
    Deviation,
}

struct Line {
    id: u32,
    name: &'static str,
    status: Status,
    detail: String,
}

fn line(id: u32, name: &'static str, ok: bool, detail: String) -> Line {
    Line { id, name, status: if ok { Status::Pass } else { Status::Fail }, detail }
}

fn noon_end_to_end(report: &ReportFile) -> Line {
    let best = &report.solutions[report.best];
    let p = best.p_success;
    let fid = best.verification.fidelity;
    let verified = verify(report).map(|v| v.passed).unwrap_or(false);
    let ok = (p - 0.05639).abs() <= 5e-4 && best.d == 1 && best.total_modes == 4 && fid >= 1.0 - 1e-8 && verified;
    line(
        1,
        "five-photon NOON end to end",
        ok,
        format!("p={p:.6} d={} modes={} 1-F={:.1e} verify={verified}", best.d, best.total_modes, 1.0 - fid),
    )
}

fn class_recovery() -> Line {
    let file = noon5_file();
    let problem = file.to_problem().unwrap();
    let solved = match solve_problem(&problem, &SolveOptions::default()) {
        Ok(s) => s,
        Err(e) => return line(2, "golden-ratio class recovery", false, format!("solver error: {e}")),
    };
    let golden = golden_representative();
    let mut swapped = golden.clone();
    for j in 0..3 {
        swapped.set(1, j, golden.get(2, j));
        swapped.set(2, j, golden.get(1, j));
    }
    let found = solved
        .representatives
        .iter()
        .map(|r| (r, r.matrix.max_abs_diff(&golden).min(r.matrix.max_abs_diff(&swapped))))
        .min_by(|a, b| a.1.total_cmp(&b.1));
    let Some((rep, diff)) = found else {
        return line(2, "golden-ratio class recovery", false, "no representatives".into());
    };
    let meas = MeasurementPattern::new(vec![2], vec![1]).unwrap();
    let out = herald(&golden, &FockState::new([2, 2, 2]), &meas, Convention::Amplitude).unwrap();
    let a50 = out.state.get(&FockState::new([5, 0])).copied().unwrap_or_default();
    let a05 = out.state.get(&FockState::new([0, 5])).copied().unwrap_or_default();
    let ratio = a50 / a05;
    let expect = 30f64.sqrt() * (3.0 + 5f64.sqrt());
    let alpha_rep = rep.alpha.norm();
    let alpha_fwd = out.overlap(&noon(5, 0.0)).norm();
    let ok = diff <= 1e-8
        && (ratio - Complex64::new(1.0, 0.0)).norm() <= 1e-9
        && (alpha_rep - expect).abs() <= 1e-8 * expect
        && (alpha_fwd - expect).abs() <= 1e-8 * expect;
    line(
        2,
        "golden-ratio class recovery",
        ok,
        format!(
            "classes={} entry diff={diff:.1e} |ratio-1|={:.1e} |alpha|={alpha_rep:.9} (expect {expect:.9}, forward {alpha_fwd:.9})",
            solved.representatives.len(),
            (ratio - 1.0).norm()
        ),
    )
}

fn reference_device() -> Line {
    let u = reference_unitary();
    let dev = u.unitarity_deviation();
    let meas = MeasurementPattern::new(vec![2, 3], vec![1, 0]).unwrap();
    let out = herald(&u, &FockState::new([2, 2, 2, 0]), &meas, Convention::Amplitude).unwrap();
    let fid = fidelity(&out.state, &noon(5, 0.0)).unwrap_or(0.0);
    let p = out.success_probability;
    let ok = u.is_unitary(5e-4) && fid >= 0.999 && (p - 0.0564).abs() <= 1e-3;
    line(3, "four-digit 4-mode device", ok, format!("unitarity dev={dev:.1e} F={fid:.6} p={p:.5}"))
}

fn noon_problem(input: Vec<u32>, meas: (Vec<usize>, Vec<u32>), n: u32) -> loqsg::inverse::SynthesisProblem {
    problem_file(input.len(), input, meas, noon_wire(n)).to_problem().unwrap()
}

fn bounds() -> Line {
    let formula = noon_bound(3, 1) == 5 && noon_bound(2, 0) == 2 && noon_bound(4, 2) == 10;
    let violating = [
        noon_problem(vec![2, 1], (vec![], vec![]), 3),
        noon_problem(vec![2, 2], (vec![], vec![]), 4),
        noon_problem(vec![3, 2], (vec![], vec![]), 5),
        noon_problem(vec![3, 1, 0], (vec![2], vec![1]), 3),
    ];
    let enforce = SolveOptions { specialize_free: true, ..SolveOptions::default() };
    let bypass = SolveOptions { enforce_bound: false, ..enforce.clone() };
    let mut infeasible = 0;
    let mut empty = 0;
    for p in &violating {
        if matches!(solve_problem(p, &enforce), Err(Error::InfeasibleBound(_))) {
            infeasible += 1;
        }
        if matches!(solve_problem(p, &bypass), Err(Error::EmptyIntersection)) {
            empty += 1;
        }
    }
    // two photons from |1,1⟩ with no detection
    let hom = pipeline(&problem_file(2, vec![1, 1], (vec![], vec![]), noon_wire(2)));
    let hom_fid = hom.as_ref().map(|r| r.solutions[r.best].verification.fidelity).unwrap_or(0.0);
    let rest = formula && infeasible == violating.len() && empty == violating.len();
    let detail = format!(
        "bound formula={formula} infeasible={infeasible}/{n} empty with bound off={empty}/{n}; \
         n=2 |1,1> is solvable (F={hom_fid:.12}), so the empty-intersection clause holds for n>=3 only",
        n = violating.len()
    );
    let status = match (rest, hom_fid >= 1.0 - 1e-8) {
        (true, true) => Status::Deviation,
        _ => Status::Fail,
    };
    Line { id: 4, name: "feasibility bound", status, detail }
}

fn oracle_equivalence() -> Line {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut worst_amp, mut worst_sum) = (0.0f64, 0.0f64);
    for _ in 0..200 {
        let dim = rng.gen_range(2..=4);
        let n = rng.gen_range(1..=5);
        let u = random_unitary(&mut rng, dim);
        let input = random_input(&mut rng, dim, n);
        let state = state_from_poly(&build_output_poly(&u, &input).unwrap());
        for occ in compositions(n, dim) {
            let out = FockState(occ);
            let a = state.get(&out).copied().unwrap_or_default();
            let b = amplitude_via_permanent(&u, &input, &out).unwrap();
            worst_amp = worst_amp.max((a - b).norm());
        }
        let k = rng.gen_range(1..dim);
        let modes: Vec<usize> = (dim - k..dim).collect();
        let total: f64 = herald_all_outcomes(&u, &input, &modes, Convention::Amplitude)
            .unwrap()
            .iter()
            .map(|(_, h)| h.success_probability)
            .sum();
        worst_sum = worst_sum.max((total - 1.0).abs());
    }
    line(
        5,
        "polynomial and permanent oracles agree",
        worst_amp <= 1e-10 && worst_sum <= 1e-9,
        format!("200 pairs, max amplitude diff={worst_amp:.1e} max |sum p - 1|={worst_sum:.1e}"),
    )
}

fn dilation() -> Line {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut worst_u, mut worst_block, mut wrong_d) = (0.0f64, 0.0f64, 0);
    for _ in 0..1000 {
        let n = rng.gen_range(1..=6);
        let s: Vec<f64> = (0..n).map(|_| if rng.gen_bool(0.25) { 1.0 } else { rng.gen_range(0.0..0.999) }).collect();
        let a = contraction_with(&mut rng, &s);
        let expect_d = s.iter().filter(|&&v| v < 1.0).count();
        let r = extend_to_unitary(&a, UNIT_TOL).unwrap();
        worst_u = worst_u.max(r.unitary.unitarity_deviation());
        worst_block = worst_block.max(r.unitary.leading_block(n).max_abs_diff(&a));
        if r.d != expect_d {
            wrong_d += 1;
        }
    }
    let mut worst_fid = 0.0f64;
    let mut checks = 0;
    while checks < 100 {
        let n = rng.gen_range(1..=3);
        let s: Vec<f64> = (0..n).map(|_| rng.gen_range(0.2..1.0)).collect();
        let a = contraction_with(&mut rng, &s);
        let photons = rng.gen_range(1..=4);
        let input = random_input(&mut rng, n, photons);
        let meas = if n > 1 {
            MeasurementPattern::new(vec![n - 1], vec![rng.gen_range(0..=photons)]).unwrap()
        } else {
            MeasurementPattern::none()
        };
        let r = extend_to_unitary(&a, UNIT_TOL).unwrap();
        let Ok(v) = vacuum_consistency_check(&r, &input, &meas, Convention::Amplitude) else { continue };
        if v.success_probability < 1e-12 {
            continue;
        }
        worst_fid = worst_fid.max(1.0 - v.fidelity);
        checks += 1;
    }
    line(
        6,
        "minimal unitary dilation",
        worst_u <= 1e-10 && worst_block <= 1e-10 && wrong_d == 0 && worst_fid <= 1e-9,
        format!(
            "1000 contractions: unitarity={worst_u:.1e} block={worst_block:.1e} wrong d={wrong_d}; 100 vacuum checks: max 1-F={worst_fid:.1e}"
        ),
    )
}

fn schur() -> Line {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut done, mut disagree, mut feasible) = (0, 0, 0);
    while done < 500 {
        let n = rng.gen_range(1..=4);
        let k = rng.gen_range(0..n);
        let measured: Vec<usize> = (n - k..n).collect();
        let a = ModeMatrix::new(gaussian_matrix(&mut rng, n)).unwrap();
        let mut point = ScalingPoint {
            x: (0..n).map(|_| rng.gen_range(0.2..2.0)).collect(),
            y: (0..k).map(|_| rng.gen_range(0.2..2.0)).collect(),
        };
        let top = loqsg::scalingopt::scaled_matrix(&a, &point, &measured).singular_values()[0];
        let target = rng.gen_range(0.5..1.5);
        point.x.iter_mut().for_each(|x| *x *= target / top);
        let top = loqsg::scalingopt::scaled_matrix(&a, &point, &measured).singular_values()[0];
        if (top - 1.0).abs() < 1e-6 {
            continue;
        }
        let direct = feasibility_direct(&a, &point, &measured, 0.0);
        if direct != feasibility_schur(&a, &point, &measured) {
            disagree += 1;
        }
        feasible += direct as usize;
        done += 1;
    }
    line(7, "Schur-complement feasibility", disagree == 0, format!("500 triples ({feasible} feasible), disagreements={disagree}"))
}

fn sp(nvars: usize, terms: &[(&[u32], i64, i64)]) -> SymbolicPoly {
    Poly::from_terms(nvars, terms.iter().map(|(e, re, im)| (Monomial(e.to_vec()), gaussian(*re, *im)))).unwrap()
}

/// Systems with their expected number of distinct solutions.
fn groebner_systems() -> Vec<(&'static str, usize, Vec<SymbolicPoly>, usize)> {
    vec![
        ("linear chain", 2, vec![sp(2, &[(&[1, 0], 1, 0), (&[0, 0], -1, 0)]), sp(2, &[(&[0, 1], 1, 0), (&[1, 0], -1, 0)])], 1),
        ("x^2-1, xy-1", 2, vec![sp(2, &[(&[2, 0], 1, 0), (&[0, 0], -1, 0)]), sp(2, &[(&[1, 1], 1, 0), (&[0, 0], -1, 0)])], 2),
        ("circle and line", 2, vec![
            sp(2, &[(&[2, 0], 1, 0), (&[0, 2], 1, 0), (&[0, 0], -5, 0)]),
            sp(2, &[(&[1, 0], 1, 0), (&[0, 1], -1, 0), (&[0, 0], -1, 0)]),
        ], 2),
        ("gaussian coefficients", 2, vec![sp(2, &[(&[2, 0], 1, 0), (&[0, 0], 1, 0)]), sp(2, &[(&[0, 1], 1, 0), (&[1, 0], 0, -1)])], 2),
        ("irrational tower", 2, vec![sp(2, &[(&[2, 0], 1, 0), (&[0, 0], -2, 0)]), sp(2, &[(&[0, 2], 1, 0), (&[1, 0], -1, 0)])], 4),
        ("triangular quadratics", 3, vec![
            sp(3, &[(&[0, 0, 2], 1, 0), (&[0, 0, 0], -3, 0)]),
            sp(3, &[(&[0, 2, 0], 1, 0), (&[0, 0, 1], -1, 0), (&[0, 0, 0], -1, 0)]),
            sp(3, &[(&[2, 0, 0], 1, 0), (&[0, 1, 0], -1, 0), (&[0, 0, 0], -2, 0)]),
        ], 8),
        ("cyclic-3", 3, vec![
            sp(3, &[(&[1, 0, 0], 1, 0), (&[0, 1, 0], 1, 0), (&[0, 0, 1], 1, 0)]),
            sp(3, &[(&[1, 1, 0], 1, 0), (&[0, 1, 1], 1, 0), (&[1, 0, 1], 1, 0)]),
            sp(3, &[(&[1, 1, 1], 1, 0), (&[0, 0, 0], -1, 0)]),
        ], 6),
        ("mixed cubic", 2, vec![
            sp(2, &[(&[3, 0], 1, 0), (&[0, 1], -1, 0)]),
            sp(2, &[(&[0, 2], 1, 0), (&[1, 0], -2, 1)]),
        ], 6),
        ("two-photon interference", 2, vec![
            sp(2, &[(&[1, 0], 1, 0), (&[0, 1], 1, 0)]),
            sp(2, &[(&[1, 1], 1, 0), (&[0, 0], -1, 0)]),
        ], 2),
        ("inconsistent", 1, vec![sp(1, &[(&[1], 1, 0), (&[0], -1, 0)]), sp(1, &[(&[1], 1, 0), (&[0], -2, 0)])], 0),
    ]
}

fn groebner_suite() -> Line {
    let budget = Budget::default();
    let mut failures = Vec::new();
    let mut undetected = 0;
    let mut controls = 0;
    for (name, nvars, gens, count) in groebner_systems() {
        let vars: Vec<String> = (0..nvars).map(|i| format!("x{i}")).collect();
        let b = GroebnerBasis::of_generators(&gens, vars.clone(), &budget).unwrap();
        let exact = GroebnerBasis::of_generators_exact(&gens, vars, &budget).unwrap();
        let same = b.polys == exact.polys;
        let sound = b.reduces_to_zero(&gens) && b.satisfies_buchberger_criterion();
        let sols = if b.is_unit() { Ok(Vec::new()) } else { solve_triangular(&b, &gens) };
        let solved = match &sols {
            Ok(s) => s.len() == count,
            Err(Error::EmptyIntersection) => count == 0,
            Err(_) => false,
        };
        if !(same && sound && solved) {
            failures.push(name);
        }
        if b.is_unit() {
            continue;
        }
        // drop an element, then shift a constant term
        let mut dropped = b.clone();
        dropped.polys.remove(0);
        let mut shifted = b.clone();
        let mut first = shifted.polys[0].clone();
        first.add_term(Monomial::one(nvars), gaussian(1, 0));
        shifted.polys[0] = first;
        for bad in [dropped, shifted] {
            controls += 1;
            if bad.reduces_to_zero(&gens) && bad.satisfies_buchberger_criterion() {
                undetected += 1;
            }
        }
    }
    line(
        8,
        "Groebner basis suite",
        failures.is_empty() && undetected == 0,
        format!("10 systems, failing={failures:?}; {controls} corrupted controls, undetected={undetected}"),
    )
}

fn circuits(report: &ReportFile) -> Line {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let n = rng.gen_range(1..=8);
        let u = random_unitary(&mut rng, n);
        let c = decompose(&u).unwrap();
        worst = worst.max(replay(&c).unwrap().max_abs_diff(&u));
    }
    let best = &report.solutions[report.best];
    let bs = best.circuit.as_ref().map(|c| c.beam_splitter_count()).unwrap_or(usize::MAX);
    line(
        9,
        "beam-splitter mesh",
        worst <= 1e-10 && bs <= 6,
        format!("100 unitaries, max replay error={worst:.1e}; NOON device uses {bs} beam splitters"),
    )
}

fn main() -> ExitCode {
    let report = pipeline(&noon5_file()).expect("NOON pipeline");
    let lines = vec![
        noon_end_to_end(&report),
        class_recovery(),
        reference_device(),
        bounds(),
        oracle_equivalence(),
        dilation(),
        schur(),
        groebner_suite(),
        circuits(&report),
    ];
    let mut failed = false;
    for l in &lines {
        let tag = match l.status {
            Status::Pass => "PASS",
            Status::Fail => {
                failed = true;
                "FAIL"
            }
            Status::Deviation => "DEVIATION",
        };
        println!("[{tag}] {} {}: {}", l.id, l.name, l.detail);
    }
    if failed {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
