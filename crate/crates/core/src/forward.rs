//! Forward simulation: output state of a linear-optical network, heralding by
//! photon counting, and a permanent-based amplitude oracle.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fockpoly::{
    coefficient_extract, inner, norm_sqr, state_from_poly, FockState, Monomial, OperatorPoly, Poly,
    StateVector,
};
use crate::io::{state_from_wire, state_to_wire, AmplitudeJson, ComplexJson};

/// Square complex mode-transformation matrix: `a†_i ↦ Σ_j M[i,j] a†_{j,out}`.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeMatrix(DMatrix<Complex64>);

impl ModeMatrix {
    pub fn new(m: DMatrix<Complex64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch { expected: m.nrows(), got: m.ncols() });
        }
        Ok(ModeMatrix(m))
    }

    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        let n = rows.len();
        for r in rows {
            if r.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: r.len() });
            }
        }
        Ok(ModeMatrix(DMatrix::from_fn(n, n, |i, j| rows[i][j])))
    }

    pub fn identity(n: usize) -> Self {
        ModeMatrix(DMatrix::identity(n, n))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.0[(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.0[(i, j)] = v;
    }

    pub fn as_matrix(&self) -> &DMatrix<Complex64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.0
    }

    pub fn rows(&self) -> Vec<Vec<Complex64>> {
        (0..self.dim())
            .map(|i| (0..self.dim()).map(|j| self.0[(i, j)]).collect())
            .collect()
    }

    /// `max |(M†M − 1)_{ij}|`.
    pub fn unitarity_deviation(&self) -> f64 {
        let g = self.0.adjoint() * &self.0 - DMatrix::<Complex64>::identity(self.dim(), self.dim());
        g.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.unitarity_deviation() <= tol
    }

    /// Singular values in descending order.
    pub fn singular_values(&self) -> Vec<f64> {
        crate::linalg::singular_values(&self.0)
    }

    pub fn is_contraction(&self, tol: f64) -> bool {
        self.singular_values().first().is_none_or(|&s| s <= 1.0 + tol)
    }

    /// Top-left `n × n` block.
    pub fn leading_block(&self, n: usize) -> ModeMatrix {
        ModeMatrix(self.0.view((0, 0), (n, n)).into_owned())
    }

    /// Largest entrywise difference.
    pub fn max_abs_diff(&self, other: &ModeMatrix) -> f64 {
        (&self.0 - &other.0).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

impl Serialize for ModeMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<Vec<ComplexJson>> = self
            .rows()
            .into_iter()
            .map(|r| r.into_iter().map(ComplexJson::from).collect())
            .collect();
        rows.serialize(s)
    }
}

impl<'de> Deserialize<'de> for ModeMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows: Vec<Vec<ComplexJson>> = Vec::deserialize(d)?;
        let rows: Vec<Vec<Complex64>> = rows
            .into_iter()
            .map(|r| r.into_iter().map(Complex64::from).collect())
            .collect();
        ModeMatrix::from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

/// Photon numbers registered on a set of detected modes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeasurementPattern {
    pub modes: Vec<usize>,
    pub counts: Vec<u32>,
}

impl MeasurementPattern {
    pub fn new(modes: Vec<usize>, counts: Vec<u32>) -> Result<Self> {
        let p = MeasurementPattern { modes, counts };
        p.validate()?;
        Ok(p)
    }

    pub fn none() -> Self {
        MeasurementPattern { modes: vec![], counts: vec![] }
    }

    pub fn validate(&self) -> Result<()> {
        if self.modes.len() != self.counts.len() {
            return Err(Error::InvalidProblem("measurement modes and counts differ in length".into()));
        }
        let mut seen = self.modes.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != self.modes.len() {
            return Err(Error::InvalidProblem("measured modes must be distinct".into()));
        }
        Ok(())
    }

    pub fn total(&self) -> u32 {
        self.counts.iter().sum()
    }

    /// Same pattern extended by vacuum detection on `extra` modes starting at `first`.
    pub fn with_vacuum_modes(&self, first: usize, extra: usize) -> Self {
        let mut p = self.clone();
        for k in 0..extra {
            p.modes.push(first + k);
            p.counts.push(0);
        }
        p
    }

    fn pairs(&self) -> Vec<(usize, u32)> {
        self.modes.iter().copied().zip(self.counts.iter().copied()).collect()
    }

    fn factorial_product(&self) -> f64 {
        FockState(self.counts.clone()).factorial_product()
    }
}

/// How a detected photon number converts the extracted coefficient into an amplitude.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Convention {
    /// `⟨m|(a†)^m|0⟩ = √(m!)` is included.
    #[default]
    Amplitude,
    /// Creation operators replaced by 1 with no factorial factor.
    Coefficient,
}

impl Convention {
    /// Factor multiplying the raw extracted coefficient.
    pub fn measurement_factor(self, meas: &MeasurementPattern) -> f64 {
        match self {
            Convention::Amplitude => meas.factorial_product().sqrt(),
            Convention::Coefficient => 1.0,
        }
    }
}

/// State left on the undetected modes after a heralding event.
#[derive(Clone, Debug, PartialEq)]
pub struct HeraldedOutput {
    /// Unnormalized conditional state.
    pub state: StateVector,
    pub success_probability: f64,
    /// `√p`; the modulus of α for a target-proportional output.
    pub raw_amplitude: Complex64,
}

impl HeraldedOutput {
    fn from_state(state: StateVector) -> Self {
        let p = norm_sqr(&state);
        HeraldedOutput { state, success_probability: p, raw_amplitude: Complex64::new(p.sqrt(), 0.0) }
    }

    /// `⟨target|Φ⟩`; equals α when the output is α·target for a normalized target.
    pub fn overlap(&self, target: &StateVector) -> Complex64 {
        inner(target, &self.state)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HeraldedOutputJson {
    pub state: Vec<AmplitudeJson>,
    pub success_probability: f64,
    pub raw_amplitude: ComplexJson,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub fidelity: Option<f64>,
}

impl HeraldedOutput {
    pub fn to_wire(&self, target: Option<&StateVector>) -> HeraldedOutputJson {
        HeraldedOutputJson {
            state: state_to_wire(&self.state),
            success_probability: self.success_probability,
            raw_amplitude: self.raw_amplitude.into(),
            fidelity: target.and_then(|t| fidelity(&self.state, t).ok()),
        }
    }

    pub fn from_wire(w: &HeraldedOutputJson) -> Result<Self> {
        Ok(HeraldedOutput {
            state: state_from_wire(&w.state)?,
            success_probability: w.success_probability,
            raw_amplitude: w.raw_amplitude.into(),
        })
    }
}

fn check_input(matrix: &ModeMatrix, input: &FockState) -> Result<()> {
    if matrix.dim() != input.modes() {
        return Err(Error::DimensionMismatch { expected: matrix.dim(), got: input.modes() });
    }
    Ok(())
}

/// Expands `∏_i (1/√(n_i!)) (Σ_j M[i,j] a†_j)^{n_i}`, optionally dropping
/// terms for which `keep` is false after every multiplication.
fn expand_output(
    matrix: &ModeMatrix,
    input: &FockState,
    keep: impl Fn(&Monomial) -> bool,
) -> Result<OperatorPoly> {
    check_input(matrix, input)?;
    let n = matrix.dim();
    let mut f = Poly::one(n);
    for (i, &ni) in input.0.iter().enumerate() {
        if ni == 0 {
            continue;
        }
        let row: Vec<Complex64> = (0..n).map(|j| matrix.get(i, j)).collect();
        let form = Poly::linear(&row);
        for _ in 0..ni {
            f = f.mul_filtered(&form, &keep)?;
        }
        f = f.scale(&Complex64::new(1.0 / crate::fockpoly::factorial(ni).sqrt(), 0.0));
    }
    Ok(f)
}

/// The output polynomial `F` of a network fed with a Fock product state.
pub fn build_output_poly(matrix: &ModeMatrix, input: &FockState) -> Result<OperatorPoly> {
    expand_output(matrix, input, |_| true)
}

/// Conditional state after detecting `meas`, with its success probability.
pub fn herald(
    matrix: &ModeMatrix,
    input: &FockState,
    meas: &MeasurementPattern,
    convention: Convention,
) -> Result<HeraldedOutput> {
    check_input(matrix, input)?;
    meas.validate()?;
    if let Some(&bad) = meas.modes.iter().find(|&&m| m >= matrix.dim()) {
        return Err(Error::DimensionMismatch { expected: matrix.dim(), got: bad + 1 });
    }
    let pairs = meas.pairs();
    let f = expand_output(matrix, input, |m| pairs.iter().all(|&(v, k)| m.0[v] <= k))?;
    let g = coefficient_extract(&f, &pairs);
    let g = g.scale(&Complex64::new(convention.measurement_factor(meas), 0.0));
    Ok(HeraldedOutput::from_state(state_from_poly(&g)))
}

/// Heralds every detection pattern on `modes` with total count at most `n`,
/// in canonical (lexicographic) order of the pattern.
pub fn herald_all_outcomes(
    matrix: &ModeMatrix,
    input: &FockState,
    modes: &[usize],
    convention: Convention,
) -> Result<Vec<(Vec<u32>, HeraldedOutput)>> {
    let n = input.total();
    let mut patterns = Vec::new();
    for total in 0..=n {
        patterns.extend(compositions(total, modes.len()));
    }
    patterns.sort();
    patterns
        .into_par_iter()
        .map(|counts| {
            let meas = MeasurementPattern::new(modes.to_vec(), counts.clone())?;
            Ok((counts, herald(matrix, input, &meas, convention)?))
        })
        .collect()
}

/// All vectors of `parts` non-negative integers summing to `total`.
pub fn compositions(total: u32, parts: usize) -> Vec<Vec<u32>> {
    fn rec(left: u32, parts: usize, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if parts == 1 {
            cur.push(left);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for k in 0..=left {
            cur.push(k);
            rec(left - k, parts - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if parts == 0 {
        if total == 0 {
            out.push(vec![]);
        }
        return out;
    }
    rec(total, parts, &mut Vec::new(), &mut out);
    out
}

/// Ryser's formula with Gray-code subset enumeration.
pub fn permanent(m: &DMatrix<Complex64>) -> Complex64 {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "permanent of a non-square matrix");
    if n == 0 {
        return Complex64::new(1.0, 0.0);
    }
    let mut row_sums = vec![Complex64::new(0.0, 0.0); n];
    let mut total = Complex64::new(0.0, 0.0);
    let mut gray: u64 = 0;
    for k in 1u64..(1u64 << n) {
        let next = k ^ (k >> 1);
        let flipped = (next ^ gray).trailing_zeros() as usize;
        let added = next & (1 << flipped) != 0;
        gray = next;
        for (i, s) in row_sums.iter_mut().enumerate() {
            if added {
                *s += m[(i, flipped)];
            } else {
                *s -= m[(i, flipped)];
            }
        }
        let prod: Complex64 = row_sums.iter().product();
        if gray.count_ones().is_multiple_of(2) {
            total += prod;
        } else {
            total -= prod;
        }
    }
    if n % 2 == 1 {
        -total
    } else {
        total
    }
}

/// `⟨output|𝒰(M)|input⟩` from the permanent of the row/column-repeated matrix.
pub fn amplitude_via_permanent(matrix: &ModeMatrix, input: &FockState, output: &FockState) -> Result<Complex64> {
    check_input(matrix, input)?;
    if output.modes() != matrix.dim() {
        return Err(Error::DimensionMismatch { expected: matrix.dim(), got: output.modes() });
    }
    if input.total() != output.total() {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let rows: Vec<usize> = repeat_indices(input);
    let cols: Vec<usize> = repeat_indices(output);
    let sub = DMatrix::from_fn(rows.len(), cols.len(), |r, c| matrix.get(rows[r], cols[c]));
    let norm = (input.factorial_product() * output.factorial_product()).sqrt();
    Ok(permanent(&sub) / norm)
}

fn repeat_indices(s: &FockState) -> Vec<usize> {
    s.0.iter()
        .enumerate()
        .flat_map(|(i, &k)| std::iter::repeat_n(i, k as usize))
        .collect()
}

/// Heralded state computed through permanents only.
///
/// Every occupation pattern of the undetected modes carrying the remaining
/// photons is enumerated and its amplitude taken from
/// [`amplitude_via_permanent`].
pub fn herald_via_permanent(
    matrix: &ModeMatrix,
    input: &FockState,
    meas: &MeasurementPattern,
    convention: Convention,
) -> Result<HeraldedOutput> {
    check_input(matrix, input)?;
    meas.validate()?;
    let n = matrix.dim();
    let free: Vec<usize> = (0..n).filter(|i| !meas.modes.contains(i)).collect();
    let mut state = StateVector::new();
    let Some(rest) = input.total().checked_sub(meas.total()) else {
        return Ok(HeraldedOutput::from_state(state));
    };
    // Relative to the polynomial route, the permanent amplitude already includes
    // √(m!) for the detected modes; the coefficient convention divides it out.
    let undo = match convention {
        Convention::Amplitude => 1.0,
        Convention::Coefficient => 1.0 / meas.factorial_product().sqrt(),
    };
    for occ in compositions(rest, free.len()) {
        let mut full = vec![0u32; n];
        for (&f, &k) in free.iter().zip(&occ) {
            full[f] = k;
        }
        for (&m, &k) in meas.modes.iter().zip(&meas.counts) {
            full[m] = k;
        }
        let amp = amplitude_via_permanent(matrix, input, &FockState(full))? * undo;
        if amp.norm() > 0.0 {
            state.insert(FockState(occ), amp);
        }
    }
    Ok(HeraldedOutput::from_state(state))
}

/// `|⟨t|s⟩|² / (⟨s|s⟩⟨t|t⟩)`.
pub fn fidelity(state: &StateVector, target: &StateVector) -> Result<f64> {
    let ns = norm_sqr(state);
    let nt = norm_sqr(target);
    if ns == 0.0 || nt == 0.0 {
        return Err(Error::ZeroNorm);
    }
    if let (Some(a), Some(b)) = (state.keys().next(), target.keys().next()) {
        if a.modes() != b.modes() {
            return Err(Error::DimensionMismatch { expected: b.modes(), got: a.modes() });
        }
    }
    Ok((inner(target, state).norm_sqr() / (ns * nt)).min(1.0))
}
