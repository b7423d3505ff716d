//! Roots of univariate complex polynomials via companion-matrix eigenvalues.

use nalgebra::{DMatrix, Schur};
use num_complex::Complex64;

/// Evaluates `Σ c_k x^k` by Horner's rule.
pub fn horner(coeffs: &[Complex64], x: Complex64) -> Complex64 {
    coeffs.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &c| acc * x + c)
}

/// `Σ |c_k| |x|^k`, the natural scale for judging `|p(x)|`.
pub fn horner_scale(coeffs: &[Complex64], x: Complex64) -> f64 {
    let r = x.norm();
    coeffs.iter().rev().fold(0.0, |acc, c| acc * r + c.norm())
}

/// Drops leading coefficients that are negligible relative to the largest one.
pub fn trim(coeffs: &[Complex64], rel_tol: f64) -> Vec<Complex64> {
    let max = coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let mut v = coeffs.to_vec();
    while let Some(c) = v.last() {
        if c.norm() <= rel_tol * max || c.norm() == 0.0 {
            v.pop();
        } else {
            break;
        }
    }
    v
}

fn derivative(coeffs: &[Complex64]) -> Vec<Complex64> {
    coeffs.iter().enumerate().skip(1).map(|(k, c)| c * k as f64).collect()
}

/// Newton refinement; keeps the best iterate seen.
pub fn polish(coeffs: &[Complex64], x0: Complex64, iters: usize) -> Complex64 {
    let d = derivative(coeffs);
    let mut x = x0;
    let mut best = (horner(coeffs, x).norm(), x);
    for _ in 0..iters {
        let fx = horner(coeffs, x);
        let dx = horner(&d, x);
        if dx.norm() == 0.0 || fx.norm() == 0.0 {
            break;
        }
        x -= fx / dx;
        let r = horner(coeffs, x).norm();
        if !r.is_finite() {
            break;
        }
        if r < best.0 {
            best = (r, x);
        } else if r > 2.0 * best.0 {
            break;
        }
    }
    best.1
}

/// All complex roots (with multiplicity) of `Σ c_k x^k`, coefficients in
/// ascending degree. Exact-zero leading coefficients are ignored.
pub fn roots(coeffs: &[Complex64]) -> Vec<Complex64> {
    let c = trim(coeffs, 0.0);
    if c.len() <= 1 {
        return Vec::new();
    }
    // zero roots
    let zeros = c.iter().take_while(|z| z.norm() == 0.0).count();
    let c = &c[zeros..];
    let mut out = vec![Complex64::new(0.0, 0.0); zeros];
    let deg = c.len() - 1;
    if deg == 0 {
        return out;
    }
    if deg == 1 {
        out.push(-c[0] / c[1]);
        return out;
    }
    // rescale x = s·y so the constant and leading coefficients match in size
    let s = (c[0].norm() / c[deg].norm()).powf(1.0 / deg as f64);
    let s = if s.is_finite() && s > 0.0 { s } else { 1.0 };
    let scaled: Vec<Complex64> = c.iter().enumerate().map(|(k, z)| z * s.powi(k as i32)).collect();
    let lead = scaled[deg];
    let mut comp = DMatrix::<Complex64>::zeros(deg, deg);
    for j in 0..deg {
        comp[(0, j)] = -scaled[deg - 1 - j] / lead;
    }
    for i in 1..deg {
        comp[(i, i - 1)] = Complex64::new(1.0, 0.0);
    }
    let eig: Vec<Complex64> = match Schur::try_new(comp.clone(), 1e-15, 10_000) {
        Some(schur) => {
            let (_, t) = schur.unpack();
            (0..deg).map(|i| t[(i, i)]).collect()
        }
        None => comp.eigenvalues().map(|v| v.iter().copied().collect()).unwrap_or_default(),
    };
    for y in eig {
        out.push(polish(c, y * s, 8));
    }
    out
}
