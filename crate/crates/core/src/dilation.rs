//! Embedding a contraction as the leading block of a unitary.
//!
//! With `A = V·D·W` (SVD), every singular value `d_i < 1` is paired with
//! one ancilla mode through the real orthogonal block
//! `[[d_i, √(1−d_i²)], [√(1−d_i²), −d_i]]`, giving
//! `U' = diag(V, 1)·M·diag(W, 1)` on `N + d` modes.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fockpoly::FockState;
use crate::linalg::{svd, Svd};
use crate::forward::{fidelity, herald, Convention, MeasurementPattern, ModeMatrix};

/// Singular values within this distance of 1 need no ancilla.
pub const UNIT_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DilationResult {
    pub unitary: ModeMatrix,
    /// Number of ancilla modes added.
    pub d: usize,
    /// `λ` the input was divided by before embedding (1 when embedded as given).
    pub scale: f64,
    /// Modes of the unitary hosting the original rows and columns.
    pub embedding: Vec<usize>,
}

impl DilationResult {
    pub fn total_modes(&self) -> usize {
        self.unitary.dim()
    }
}

/// Largest singular value.
pub fn operator_norm(a: &ModeMatrix) -> f64 {
    a.singular_values().first().copied().unwrap_or(0.0)
}

/// Minimal unitary dilation of `a`, which must satisfy `‖a‖ ≤ 1 + tol`.
/// Singular values above `1 − tol` count as 1.
pub fn extend_to_unitary(a: &ModeMatrix, tol: f64) -> Result<DilationResult> {
    let n = a.dim();
    let Svd { u, s, v_t } = svd(a.as_matrix()).ok_or_else(|| Error::Numerical("SVD did not converge".into()))?;
    let norm = s.first().copied().unwrap_or(0.0);
    if norm > 1.0 + tol {
        return Err(Error::NotAContraction { norm, tol });
    }
    let deficient: Vec<usize> = (0..n).filter(|&i| s[i] < 1.0 - tol).collect();
    let d = deficient.len();
    let dim = n + d;

    let one = Complex64::new(1.0, 0.0);
    let mut left = DMatrix::<Complex64>::identity(dim, dim);
    left.view_mut((0, 0), (n, n)).copy_from(&u);
    let mut right = DMatrix::<Complex64>::identity(dim, dim);
    right.view_mut((0, 0), (n, n)).copy_from(&v_t);
    let mut mid = DMatrix::<Complex64>::zeros(dim, dim);
    for i in 0..n {
        mid[(i, i)] = one;
    }
    for (k, &i) in deficient.iter().enumerate() {
        let si = s[i].max(0.0);
        let c = (1.0 - si * si).max(0.0).sqrt();
        let anc = n + k;
        mid[(i, i)] = Complex64::new(si, 0.0);
        mid[(i, anc)] = Complex64::new(c, 0.0);
        mid[(anc, i)] = Complex64::new(c, 0.0);
        mid[(anc, anc)] = Complex64::new(-si, 0.0);
    }
    let unitary = ModeMatrix::new(left * mid * right)?;
    Ok(DilationResult { unitary, d, scale: 1.0, embedding: (0..n).collect() })
}

/// Divides by `λ = ‖a‖` when it exceeds 1, then dilates.
pub fn extend_rescaled(a: &ModeMatrix, tol: f64) -> Result<DilationResult> {
    let lambda = operator_norm(a);
    if lambda == 0.0 {
        return Err(Error::ZeroNorm);
    }
    let lambda = lambda.max(1.0);
    let scaled = ModeMatrix::new(a.as_matrix() / Complex64::new(lambda, 0.0))?;
    let mut r = extend_to_unitary(&scaled, tol)?;
    r.scale = lambda;
    Ok(r)
}

/// Outcome of comparing the dilated device against its leading block.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VacuumCheck {
    pub fidelity: f64,
    /// Heralding probability of the dilated unitary.
    pub success_probability: f64,
    /// Largest amplitude difference between the two heralded states.
    pub max_deviation: f64,
}

/// Heralds on the unitary with vacuum fed into and detected on the ancillas,
/// and compares with heralding on the leading block alone.
pub fn vacuum_consistency_check(
    result: &DilationResult,
    input: &FockState,
    meas: &MeasurementPattern,
    convention: Convention,
) -> Result<VacuumCheck> {
    let n = result.embedding.len();
    let block = result.unitary.leading_block(n);
    let direct = herald(&block, input, meas, convention)?;
    let padded = input.padded(result.d);
    let full_meas = meas.with_vacuum_modes(n, result.d);
    let full = herald(&result.unitary, &padded, &full_meas, convention)?;
    let fid = fidelity(&full.state, &direct.state)?;
    let mut dev: f64 = 0.0;
    for (s, a) in full.state.iter() {
        dev = dev.max((a - direct.state.get(s).copied().unwrap_or_default()).norm());
    }
    for (s, a) in direct.state.iter() {
        if !full.state.contains_key(s) {
            dev = dev.max(a.norm());
        }
    }
    Ok(VacuumCheck { fidelity: fid, success_probability: full.success_probability, max_deviation: dev })
}
