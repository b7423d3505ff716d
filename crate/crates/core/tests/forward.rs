mod common;

use common::*;
use loqsg::dilation::operator_norm;
use loqsg::fockpoly::{coefficient_extract, norm_sqr};
use loqsg::forward::{
    amplitude_via_permanent, build_output_poly, compositions, fidelity, herald, herald_all_outcomes,
    herald_via_permanent,
};
use loqsg::{Convention, FockState, MeasurementPattern, Monomial};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn golden_class_output_polynomial() {
    let a = golden_representative();
    let f = build_output_poly(&a, &FockState::new([2, 2, 2])).unwrap();
    assert!(f.is_homogeneous());
    assert_eq!(f.degree(), Some(6));
    // first column is all ones, so a†₁⁶ carries just the 1/√8 prefactor
    let c = f.coefficient(&Monomial(vec![6, 0, 0]));
    assert!((c - Complex64::new(8f64.sqrt().recip(), 0.0)).norm() < 1e-14);

    let g = coefficient_extract(&f, &[(2, 1)]);
    let peak = g.terms().map(|(_, c)| c.norm()).fold(0.0, f64::max);
    for (m, c) in g.terms() {
        if m.0 != [5, 0] && m.0 != [0, 5] {
            assert!(c.norm() < 1e-12 * peak, "stray term {m:?} = {c}");
        }
    }
    let ratio = g.coefficient(&Monomial(vec![5, 0])) / g.coefficient(&Monomial(vec![0, 5]));
    assert!((ratio - 1.0).norm() < 1e-12);
}

#[test]
fn golden_class_is_not_a_contraction() {
    assert!(operator_norm(&golden_representative()) > 1.0);
}

#[test]
fn reference_unitary_heralds_noon() {
    let u = reference_unitary();
    let meas = MeasurementPattern::new(vec![2, 3], vec![1, 0]).unwrap();
    let input = FockState::new([2, 2, 2, 0]);
    let out = herald(&u, &input, &meas, Convention::Amplitude).unwrap();
    assert!(fidelity(&out.state, &noon(5, 0.0)).unwrap() > 0.999);
    assert!((out.success_probability - 0.05639).abs() < 1e-3);
    let oracle = herald_via_permanent(&u, &input, &meas, Convention::Amplitude).unwrap();
    assert!((oracle.success_probability - out.success_probability).abs() < 1e-12);
}

#[test]
fn three_photon_outcomes_sum_to_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let u = random_unitary(&mut rng, 3);
    let all = herald_all_outcomes(&u, &FockState::new([1, 1, 1]), &[2], Convention::Amplitude).unwrap();
    assert_eq!(all.iter().map(|(c, _)| c[0]).collect::<Vec<_>>(), vec![0, 1, 2, 3]);
    let total: f64 = all.iter().map(|(_, h)| h.success_probability).sum();
    assert!((total - 1.0).abs() < 1e-12);
}

#[test]
fn convention_factor_only_matters_above_one_photon() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let u = random_unitary(&mut rng, 3);
    let input = FockState::new([2, 1, 1]);
    for (k, factor) in [(1u32, 1.0), (2, 2f64.sqrt())] {
        let meas = MeasurementPattern::new(vec![2], vec![k]).unwrap();
        let amp = herald(&u, &input, &meas, Convention::Amplitude).unwrap();
        let raw = herald(&u, &input, &meas, Convention::Coefficient).unwrap();
        for (s, a) in &amp.state {
            assert!((a - raw.state[s] * factor).norm() < 1e-12);
        }
    }
}

fn unitary_and_input() -> impl Strategy<Value = (loqsg::ModeMatrix, FockState)> {
    (2usize..=4, 1u32..=5, any::<u64>()).prop_map(|(dim, n, seed)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (random_unitary(&mut rng, dim), random_input(&mut rng, dim, n))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn output_is_homogeneous_and_normalized((u, input) in unitary_and_input()) {
        let f = build_output_poly(&u, &input).unwrap();
        prop_assert!(f.is_homogeneous());
        prop_assert_eq!(f.degree(), Some(input.total()));
        let state = loqsg::fockpoly::state_from_poly(&f);
        prop_assert!((norm_sqr(&state) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn permanent_amplitudes_match((u, input) in unitary_and_input()) {
        let state = loqsg::fockpoly::state_from_poly(&build_output_poly(&u, &input).unwrap());
        for occ in compositions(input.total(), u.dim()) {
            let out = FockState(occ);
            let a = state.get(&out).copied().unwrap_or_default();
            prop_assert!((a - amplitude_via_permanent(&u, &input, &out).unwrap()).norm() < 1e-10);
        }
    }

    #[test]
    fn photon_number_is_conserved((u, input) in unitary_and_input()) {
        let mut out = vec![0u32; u.dim()];
        out[0] = input.total() + 1;
        prop_assert_eq!(amplitude_via_permanent(&u, &input, &FockState(out)).unwrap(), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn heralding_paths_agree((u, input) in unitary_and_input(), k in 0u32..=3) {
        let meas = MeasurementPattern::new(vec![u.dim() - 1], vec![k]).unwrap();
        let a = herald(&u, &input, &meas, Convention::Amplitude).unwrap();
        let b = herald_via_permanent(&u, &input, &meas, Convention::Amplitude).unwrap();
        prop_assert!((a.success_probability - b.success_probability).abs() < 1e-10);
        for (s, amp) in &a.state {
            prop_assert!((amp - b.state.get(s).copied().unwrap_or_default()).norm() < 1e-10);
        }
    }
}
