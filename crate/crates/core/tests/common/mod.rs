#![allow(dead_code)]

use std::collections::BTreeMap;

use loqsg::fockpoly::{FockState, StateVector};
use loqsg::io::AmplitudeJson;
use loqsg::pipeline::{MeasurementJson, ProblemFile};
use loqsg::ModeMatrix;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn gaussian_matrix<R: Rng>(rng: &mut R, n: usize) -> DMatrix<Complex64> {
    DMatrix::from_fn(n, n, |_, _| {
        c(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal))
    })
}

/// Haar-random unitary: QR of a Ginibre matrix with the phase fix on R's diagonal.
pub fn random_unitary<R: Rng>(rng: &mut R, n: usize) -> ModeMatrix {
    let qr = gaussian_matrix(rng, n).qr();
    let (q, r) = (qr.q(), qr.r());
    let mut u = q;
    for j in 0..n {
        let d = r[(j, j)];
        let ph = if d.norm() > 0.0 { d / d.norm() } else { c(1.0, 0.0) };
        for i in 0..n {
            u[(i, j)] *= ph;
        }
    }
    ModeMatrix::new(u).unwrap()
}

/// `V·diag(s)·W` with the given singular values.
pub fn contraction_with<R: Rng>(rng: &mut R, s: &[f64]) -> ModeMatrix {
    let n = s.len();
    let v = random_unitary(rng, n).into_matrix();
    let w = random_unitary(rng, n).into_matrix();
    let d = DMatrix::from_fn(n, n, |i, j| if i == j { c(s[i], 0.0) } else { c(0.0, 0.0) });
    ModeMatrix::new(v * d * w).unwrap()
}

pub fn random_input<R: Rng>(rng: &mut R, modes: usize, photons: u32) -> FockState {
    let mut occ = vec![0u32; modes];
    for _ in 0..photons {
        occ[rng.gen_range(0..modes)] += 1;
    }
    FockState(occ)
}

pub fn noon(n: u32, phase: f64) -> StateVector {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    BTreeMap::from([
        (FockState(vec![n, 0]), c(h, 0.0)),
        (FockState(vec![0, n]), Complex64::from_polar(h, phase)),
    ])
}

pub fn noon_wire(n: u32) -> Vec<AmplitudeJson> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    vec![
        AmplitudeJson { occupations: vec![n, 0], re: h, im: 0.0 },
        AmplitudeJson { occupations: vec![0, n], re: h, im: 0.0 },
    ]
}

pub fn problem_file(modes: usize, input: Vec<u32>, meas: (Vec<usize>, Vec<u32>), target: Vec<AmplitudeJson>) -> ProblemFile {
    ProblemFile {
        modes,
        input,
        measurement: MeasurementJson { modes: meas.0, counts: meas.1 },
        target,
        budget: Default::default(),
        optimizer: None,
        tolerances: Default::default(),
        convention: Default::default(),
        seed: 7,
    }
}

/// Five-photon NOON from |2,2,2⟩ with one photon detected in the last mode.
pub fn noon5_file() -> ProblemFile {
    problem_file(3, vec![2, 2, 2], (vec![2], vec![1]), noon_wire(5))
}

/// Four-mode unitary printed to four digits, realizing the five-photon NOON state.
pub fn reference_unitary() -> ModeMatrix {
    use std::f64::consts::PI;
    let p = |r: f64, t: f64| Complex64::from_polar(r, t);
    ModeMatrix::from_rows(&[
        vec![p(0.5722, 0.0), p(0.5722, 0.0), p(0.1894, 0.0), p(0.5561, 0.0)],
        vec![p(0.5257, 0.0), p(0.5257, -4.0 * PI / 5.0), p(0.4556, -2.0 * PI / 5.0), p(0.4895, 3.0 * PI / 5.0)],
        vec![p(0.5257, 0.0), p(0.5257, 4.0 * PI / 5.0), p(0.4556, 2.0 * PI / 5.0), p(0.4895, -3.0 * PI / 5.0)],
        vec![p(0.3461, PI), p(0.3461, PI), p(0.7409, 0.0), p(0.4599, 0.0)],
    ])
    .unwrap()
}

/// Class representative with fifth-root-of-unity entries and `φ² = (3+√5)/2`.
pub fn golden_representative() -> ModeMatrix {
    use std::f64::consts::PI;
    let phi2 = (3.0 + 5f64.sqrt()) / 2.0;
    let p = |r: f64, t: f64| Complex64::from_polar(r, t);
    ModeMatrix::from_rows(&[
        vec![c(1.0, 0.0), c(1.0, 0.0), c(1.0, 0.0)],
        vec![c(1.0, 0.0), p(1.0, -4.0 * PI / 5.0), p(phi2, -2.0 * PI / 5.0)],
        vec![c(1.0, 0.0), p(1.0, 4.0 * PI / 5.0), p(phi2, 2.0 * PI / 5.0)],
    ])
    .unwrap()
}
