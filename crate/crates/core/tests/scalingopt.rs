mod common;

use std::sync::OnceLock;

use common::*;
use loqsg::dilation::{extend_to_unitary, UNIT_TOL};
use loqsg::forward::herald;
use loqsg::inverse::{solve_problem, ClassRepresentative, Gauge, SolveOptions, SolveOutcome, SynthesisProblem};
use loqsg::io::AmplitudeJson;
use loqsg::scalingopt::{
    feasibility_direct, optimize_all, optimize_class, scaled_matrix, success_probability, OptConfig, ScalingPoint,
};
use loqsg::{Convention, ModeMatrix};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn noon5() -> &'static (SynthesisProblem, SolveOutcome) {
    static CELL: OnceLock<(SynthesisProblem, SolveOutcome)> = OnceLock::new();
    CELL.get_or_init(|| {
        let p = noon5_file().to_problem().unwrap();
        let s = solve_problem(&p, &SolveOptions::default()).unwrap();
        (p, s)
    })
}

fn rep(matrix: ModeMatrix, alpha: Complex64) -> ClassRepresentative {
    let matrix_dim = matrix.dim();
    ClassRepresentative {
        matrix,
        beta: alpha,
        alpha,
        residual: 0.0,
        gauge: Gauge::uniform(matrix_dim, 0, 0, 0),
        fixed_entries: vec![],
        values: vec![],
    }
}

fn quick() -> OptConfig {
    OptConfig { restarts: 16, ..OptConfig::default() }
}

#[test]
fn unit_scalings_give_alpha_squared() {
    let a = Complex64::new(0.3, -0.4);
    let p = success_probability(a, &ScalingPoint::ones(3, 1), &[2, 2, 2], &[1]);
    assert!((p - 0.25).abs() < 1e-15);
}

#[test]
fn identity_is_already_optimal() {
    let target = vec![AmplitudeJson { occupations: vec![1, 1], re: 1.0, im: 0.0 }];
    let problem = problem_file(2, vec![1, 1], (vec![], vec![]), target).to_problem().unwrap();
    let r = optimize_class(&rep(ModeMatrix::identity(2), Complex64::new(1.0, 0.0)), &problem, &quick()).unwrap();
    assert!((r.p_success - 1.0).abs() < 1e-12);
    assert!(r.on_boundary);
    assert_eq!(r.d, 0);
}

/// `p(y) = |α|² y² / σ(A·diag(1, y))⁴` for |2,0⟩ with one photon detected in mode 1.
fn grid_optimum(a: &ModeMatrix, alpha: Complex64) -> f64 {
    let p = |t: f64| {
        let y = t.exp();
        let s = scaled_matrix(a, &ScalingPoint { x: vec![1.0, 1.0], y: vec![y] }, &[1]).singular_values()[0];
        alpha.norm_sqr() * y * y / s.powi(4)
    };
    let n = 200_000;
    (0..=n).map(|k| p(-8.0 + 16.0 * k as f64 / n as f64)).fold(0.0, f64::max)
}

#[test]
fn single_variable_class_matches_grid() {
    let target = vec![AmplitudeJson { occupations: vec![1], re: 1.0, im: 0.0 }];
    let problem = problem_file(2, vec![2, 0], (vec![1], vec![1]), target).to_problem().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..5 {
        let mut a = gaussian_matrix(&mut rng, 2);
        a[(0, 0)] = Complex64::new(1.0, 0.0);
        a[(0, 1)] *= rng.gen_range(0.2..3.0);
        let a = ModeMatrix::new(a).unwrap();
        let out = herald(&a, &problem.input, &problem.measurement, Convention::Amplitude).unwrap();
        let alpha = out.overlap(&problem.target);
        let r = optimize_class(&rep(a.clone(), alpha), &problem, &quick()).unwrap();
        let grid = grid_optimum(&a, alpha);
        assert!((r.p_success - grid).abs() <= 1e-6 * grid, "{} vs {grid}", r.p_success);
        assert!(r.p_success >= grid * (1.0 - 1e-9));
    }
}

#[test]
fn ranking_ignores_input_order() {
    let (p, s) = noon5();
    let reps: Vec<ClassRepresentative> = s.representatives.iter().take(8).cloned().collect();
    let forward = optimize_all(&reps, p, &quick()).unwrap();
    let reversed: Vec<ClassRepresentative> = reps.iter().rev().cloned().collect();
    let backward = optimize_all(&reversed, p, &quick()).unwrap();
    assert_eq!(forward.len(), backward.len());
    for ((_, a), (_, b)) in forward.iter().zip(&backward) {
        assert_eq!(a, b);
    }
    for ((i, _), (j, _)) in forward.iter().zip(&backward) {
        assert_eq!(*i, reps.len() - 1 - j);
    }
}

#[test]
fn optimum_is_on_boundary_and_consistent() {
    let (p, s) = noon5();
    for r in s.representatives.iter().take(4) {
        let o = optimize_class(r, p, &quick()).unwrap();
        assert!(o.on_boundary);
        assert!(feasibility_direct(&r.matrix, &o.point, &p.measurement.modes, 1e-9));
        let expect = success_probability(r.alpha, &o.point, &p.input.0, &p.measurement.counts);
        assert!((expect - o.p_success).abs() <= 1e-12 * o.p_success);
        let dil = extend_to_unitary(&o.scaled_matrix, UNIT_TOL).unwrap();
        assert_eq!(dil.d, o.d);
        let input = p.input.padded(dil.d);
        let meas = p.measurement.with_vacuum_modes(p.modes, dil.d);
        let h = herald(&dil.unitary, &input, &meas, Convention::Amplitude).unwrap();
        assert!((h.success_probability - o.p_success).abs() <= 1e-8);
    }
}

#[test]
fn same_seed_same_result() {
    let (p, s) = noon5();
    let a = optimize_class(&s.representatives[0], p, &quick()).unwrap();
    let b = optimize_class(&s.representatives[0], p, &quick()).unwrap();
    assert_eq!(a, b);
}

proptest! {
    #[test]
    fn scale_covariance(t in 0.1f64..5.0, x in proptest::collection::vec(0.1f64..3.0, 3), y in 0.1f64..3.0, k in 0usize..3) {
        let alpha = Complex64::new(1.3, 0.2);
        let n = [2, 1, 3];
        let base = ScalingPoint { x: x.clone(), y: vec![y] };
        let p0 = success_probability(alpha, &base, &n, &[1]);
        let all = ScalingPoint { x: x.iter().map(|v| v * t).collect(), y: vec![y] };
        let total: u32 = n.iter().sum();
        prop_assert!((success_probability(alpha, &all, &n, &[1]) / p0 - t.powi(2 * total as i32)).abs() <= 1e-9 * t.powi(2 * total as i32));
        let mut one = base.clone();
        one.x[k] *= t;
        prop_assert!((success_probability(alpha, &one, &n, &[1]) / p0 - t.powi(2 * n[k] as i32)).abs() <= 1e-9 * t.powi(2 * n[k] as i32));
    }
}

