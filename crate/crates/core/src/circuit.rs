//! Triangular beam-splitter mesh for a unitary.
//!
//! Entries below the diagonal are nulled column by column, bottom up,
//! by left-multiplying with `T(θ,φ)†` on neighbouring modes `(j−1, j)`,
//! where
//!
//! ```text
//! T(θ,φ) = [[e^{iφ} sin θ, e^{iφ} cos θ],
//!           [cos θ,        −sin θ      ]]
//! ```
//!
//! What remains is a diagonal of phases, so
//! `U = T_1 · T_2 ⋯ T_K · diag(e^{iδ})` with `T_1` the first rotation found.
//! [`replay`] multiplies the elements in list order and then applies the
//! trailing phases.

use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::ModeMatrix;

/// Entries smaller than this count as already nulled.
const NULL_TOL: f64 = 1e-14;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CircuitElement {
    /// `T(θ,φ)` on modes `i < j`.
    BeamSplitter { i: usize, j: usize, theta: f64, phi: f64 },
    /// `e^{iφ}` on one mode.
    PhaseShifter { mode: usize, phi: f64 },
}

impl CircuitElement {
    fn apply_left(&self, m: &mut DMatrix<Complex64>) {
        match *self {
            CircuitElement::BeamSplitter { i, j, theta, phi } => {
                let e = Complex64::from_polar(1.0, phi);
                let (s, c) = theta.sin_cos();
                for col in 0..m.ncols() {
                    let (a, b) = (m[(i, col)], m[(j, col)]);
                    m[(i, col)] = e * (a * s + b * c);
                    m[(j, col)] = a * c - b * s;
                }
            }
            CircuitElement::PhaseShifter { mode, phi } => {
                let e = Complex64::from_polar(1.0, phi);
                for col in 0..m.ncols() {
                    m[(mode, col)] *= e;
                }
            }
        }
    }

    fn modes(&self) -> Vec<usize> {
        match *self {
            CircuitElement::BeamSplitter { i, j, .. } => vec![i, j],
            CircuitElement::PhaseShifter { mode, .. } => vec![mode],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Circuit {
    pub dim: usize,
    pub elements: Vec<CircuitElement>,
    pub trailing_phases: Vec<f64>,
}

impl Circuit {
    pub fn beam_splitter_count(&self) -> usize {
        self.elements.iter().filter(|e| matches!(e, CircuitElement::BeamSplitter { .. })).count()
    }

    pub fn validate(&self) -> Result<()> {
        if self.trailing_phases.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: self.trailing_phases.len() });
        }
        for e in &self.elements {
            let modes = e.modes();
            if modes.iter().any(|&k| k >= self.dim) {
                return Err(Error::InvalidProblem(format!("element {e:?} acts outside {} modes", self.dim)));
            }
            if modes.len() == 2 && modes[0] >= modes[1] {
                return Err(Error::InvalidProblem(format!("beam splitter modes must satisfy i < j: {e:?}")));
            }
        }
        Ok(())
    }

    /// Fixed-width listing, one element per line.
    pub fn table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:>4}  {:<14} {:>8} {:>12} {:>12}", "#", "element", "modes", "theta", "phi");
        for (k, e) in self.elements.iter().enumerate() {
            let _ = match *e {
                CircuitElement::BeamSplitter { i, j, theta, phi } => {
                    writeln!(out, "{:>4}  {:<14} {:>8} {:>12.6} {:>12.6}", k + 1, "beam splitter", format!("{i},{j}"), theta, phi)
                }
                CircuitElement::PhaseShifter { mode, phi } => {
                    writeln!(out, "{:>4}  {:<14} {:>8} {:>12} {:>12.6}", k + 1, "phase shifter", mode, "-", phi)
                }
            };
        }
        let phases: Vec<String> = self.trailing_phases.iter().map(|p| format!("{p:.6}")).collect();
        let _ = writeln!(out, "trailing phases: [{}]", phases.join(", "));
        out
    }
}

/// Maps an angle to (−π, π].
fn wrap(phi: f64) -> f64 {
    let mut p = phi % (2.0 * PI);
    if p <= -PI {
        p += 2.0 * PI;
    } else if p > PI {
        p -= 2.0 * PI;
    }
    p
}

/// Mesh factorization of a unitary (deviation at most 1e−9).
pub fn decompose(u: &ModeMatrix) -> Result<Circuit> {
    let deviation = u.unitarity_deviation();
    if deviation > 1e-9 {
        return Err(Error::NotUnitary { deviation });
    }
    let n = u.dim();
    let mut w = u.as_matrix().clone();
    let mut elements = Vec::new();
    for c in 0..n {
        for q in ((c + 1)..n).rev() {
            let p = q - 1;
            let (up, uq) = (w[(p, c)], w[(q, c)]);
            if uq.norm() < NULL_TOL {
                continue;
            }
            let theta = up.norm().atan2(uq.norm());
            let phi = wrap(up.arg() - uq.arg());
            // w ← T† w
            let e = Complex64::from_polar(1.0, -phi);
            let (s, co) = theta.sin_cos();
            for col in 0..n {
                let (a, b) = (w[(p, col)], w[(q, col)]);
                w[(p, col)] = e * a * s + b * co;
                w[(q, col)] = e * a * co - b * s;
            }
            w[(q, c)] = Complex64::new(0.0, 0.0);
            elements.push(CircuitElement::BeamSplitter { i: p, j: q, theta, phi });
        }
    }
    let trailing_phases = (0..n).map(|i| wrap(w[(i, i)].arg())).collect();
    Ok(Circuit { dim: n, elements, trailing_phases })
}

/// `T_1 ⋯ T_K · diag(e^{iδ})`.
pub fn replay(c: &Circuit) -> Result<ModeMatrix> {
    c.validate()?;
    let mut m = DMatrix::<Complex64>::from_diagonal(&nalgebra::DVector::from_iterator(
        c.dim,
        c.trailing_phases.iter().map(|&p| Complex64::from_polar(1.0, p)),
    ));
    for e in c.elements.iter().rev() {
        e.apply_left(&mut m);
    }
    ModeMatrix::new(m)
}
