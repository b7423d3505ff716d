//! Success-probability maximization over the row and detected-column
//! scalings that map a solution class onto itself.
//!
//! For `S = X·A·Y` the heralding probability is
//! `|α|² ∏ x_k^{2n_k} ∏ y_l^{2m_l}`, and `S` is embeddable in a unitary
//! exactly when `‖S‖ ≤ 1`. The probability grows with a common factor on
//! `x`, so the optimum lies on `‖S‖ = 1`; the search runs over directions in
//! log space and rescales each candidate onto that boundary.

use argmin::core::{CostFunction, Executor, State};
use argmin::solver::neldermead::NelderMead;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dilation::{extend_to_unitary, UNIT_TOL};
use crate::error::{Error, Result};
use crate::forward::ModeMatrix;
use crate::inverse::{ClassRepresentative, SynthesisProblem};

/// Row multipliers `x` (one per mode) and detected-column multipliers `y`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl ScalingPoint {
    pub fn ones(rows: usize, measured: usize) -> Self {
        ScalingPoint { x: vec![1.0; rows], y: vec![1.0; measured] }
    }

    pub fn validate(&self) -> Result<()> {
        if self.x.iter().chain(&self.y).all(|v| v.is_finite() && *v > 0.0) {
            Ok(())
        } else {
            Err(Error::InvalidProblem("scalings must be finite and positive".into()))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptResult {
    pub point: ScalingPoint,
    pub p_success: f64,
    pub scaled_matrix: ModeMatrix,
    pub on_boundary: bool,
    /// Ancilla modes needed to dilate `scaled_matrix`.
    pub d: usize,
    pub restarts: usize,
    /// `(best − worst) / best` over the restart optima.
    pub spread: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptConfig {
    pub restarts: usize,
    pub seed: u64,
    pub y_min: f64,
    pub y_max: f64,
    /// Stop refining once the relative gain of a local run drops below this.
    pub rel_tol: f64,
    pub max_iters: u64,
}

impl Default for OptConfig {
    fn default() -> Self {
        OptConfig { restarts: 64, seed: 0, y_min: 1e-2, y_max: 1e2, rel_tol: 1e-10, max_iters: 4000 }
    }
}

/// `|α|² ∏ x_k^{2n_k} ∏ y_l^{2m_l}`.
pub fn success_probability(alpha: Complex64, point: &ScalingPoint, n: &[u32], m: &[u32]) -> f64 {
    let mut log_p = 2.0 * alpha.norm().ln();
    for (x, &k) in point.x.iter().zip(n) {
        log_p += 2.0 * k as f64 * x.ln();
    }
    for (y, &k) in point.y.iter().zip(m) {
        log_p += 2.0 * k as f64 * y.ln();
    }
    log_p.exp()
}

/// `X·A·Y` with `y` applied to the columns `measured`.
pub fn scaled_matrix(a: &ModeMatrix, point: &ScalingPoint, measured: &[usize]) -> ModeMatrix {
    let mut col = vec![1.0; a.dim()];
    for (&c, &y) in measured.iter().zip(&point.y) {
        col[c] = y;
    }
    let m = DMatrix::from_fn(a.dim(), a.dim(), |i, j| a.get(i, j) * point.x[i] * col[j]);
    ModeMatrix::new(m).expect("square")
}

/// `‖XAY‖ ≤ 1 + tol`.
pub fn feasibility_direct(a: &ModeMatrix, point: &ScalingPoint, measured: &[usize], tol: f64) -> bool {
    let s = scaled_matrix(a, point, measured).singular_values();
    s.first().copied().unwrap_or(0.0) <= 1.0 + tol
}

/// Semidefiniteness of `[[1, X], [X, (A·Y²·A†)⁻¹]]`, tested by its smallest
/// eigenvalue at −1e−10. Falls back to the singular-value test when
/// `A·Y²·A†` is singular or too ill-conditioned to invert.
pub fn feasibility_schur(a: &ModeMatrix, point: &ScalingPoint, measured: &[usize]) -> bool {
    let n = a.dim();
    let ones = ScalingPoint { x: vec![1.0; n], y: point.y.clone() };
    let ay = scaled_matrix(a, &ones, measured).into_matrix();
    let h = &ay * ay.adjoint();
    let ev = h.clone().symmetric_eigen().eigenvalues;
    let (lo, hi) = ev.iter().fold((f64::INFINITY, 0.0f64), |(l, u), &e| (l.min(e), u.max(e)));
    if lo <= 0.0 || hi / lo > 1e10 {
        return feasibility_direct(a, point, measured, 1e-10);
    }
    let Some(hinv) = h.try_inverse() else {
        return feasibility_direct(a, point, measured, 1e-10);
    };
    let mut block = DMatrix::<Complex64>::zeros(2 * n, 2 * n);
    for i in 0..n {
        block[(i, i)] = Complex64::new(1.0, 0.0);
        block[(i, n + i)] = Complex64::new(point.x[i], 0.0);
        block[(n + i, i)] = Complex64::new(point.x[i], 0.0);
    }
    block.view_mut((n, n), (n, n)).copy_from(&hinv);
    // symmetrize against rounding in the inverse
    let block = (&block + block.adjoint()) * Complex64::new(0.5, 0.0);
    let min = block.symmetric_eigen().eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    min >= -1e-10
}

/// Which multipliers act on the probability.
#[derive(Clone, Debug)]
struct Layout {
    n: Vec<u32>,
    m: Vec<u32>,
    measured: Vec<usize>,
    /// Rows with photons; the first one is pinned.
    rows: Vec<usize>,
    /// Detected columns expecting photons.
    cols: Vec<usize>,
}

impl Layout {
    fn new(problem: &SynthesisProblem) -> Self {
        let n = problem.input.0.clone();
        let m = problem.measurement.counts.clone();
        let rows = (0..n.len()).filter(|&i| n[i] > 0).collect();
        let cols = (0..m.len()).filter(|&l| m[l] > 0).collect();
        Layout { n, m, measured: problem.measurement.modes.clone(), rows, cols }
    }

    fn dim(&self) -> usize {
        self.rows.len().saturating_sub(1) + self.cols.len()
    }

    fn point(&self, theta: &[f64]) -> ScalingPoint {
        let mut p = ScalingPoint::ones(self.n.len(), self.m.len());
        let k = self.rows.len().saturating_sub(1);
        for (t, &r) in theta[..k].iter().zip(self.rows.iter().skip(1)) {
            p.x[r] = t.exp();
        }
        for (t, &c) in theta[k..].iter().zip(&self.cols) {
            p.y[c] = t.exp();
        }
        p
    }

    /// Point rescaled onto `‖XAY‖ = 1`, with its success probability.
    fn boundary(&self, a: &ModeMatrix, alpha: Complex64, theta: &[f64]) -> (ScalingPoint, f64) {
        let mut p = self.point(theta);
        let sigma = scaled_matrix(a, &p, &self.measured).singular_values()[0];
        for x in &mut p.x {
            *x /= sigma;
        }
        let prob = success_probability(alpha, &p, &self.n, &self.m);
        (p, prob)
    }

    fn neg_log_p(&self, a: &ModeMatrix, alpha: Complex64, theta: &[f64]) -> f64 {
        let p = self.point(theta);
        let sigma = scaled_matrix(a, &p, &self.measured).singular_values()[0];
        let total: f64 = self.n.iter().map(|&k| k as f64).sum();
        let mut v = 2.0 * alpha.norm().ln() - 2.0 * total * sigma.ln();
        for (x, &k) in p.x.iter().zip(&self.n) {
            v += 2.0 * k as f64 * x.ln();
        }
        for (y, &k) in p.y.iter().zip(&self.m) {
            v += 2.0 * k as f64 * y.ln();
        }
        if v.is_finite() {
            -v
        } else {
            f64::INFINITY
        }
    }
}

struct Objective<'a> {
    layout: &'a Layout,
    a: &'a ModeMatrix,
    alpha: Complex64,
}

impl CostFunction for Objective<'_> {
    type Param = Vec<f64>;
    type Output = f64;
    fn cost(&self, theta: &Self::Param) -> std::result::Result<f64, argmin::core::Error> {
        Ok(self.layout.neg_log_p(self.a, self.alpha, theta))
    }
}

fn nelder_mead(obj: &Objective, start: Vec<f64>, step: f64, cfg: &OptConfig) -> (Vec<f64>, f64) {
    let dim = start.len();
    let mut best = (start.clone(), obj.cost(&start).unwrap_or(f64::INFINITY));
    // restart from the incumbent until a run stops paying off
    for _ in 0..20 {
        let mut simplex = vec![best.0.clone()];
        for i in 0..dim {
            let mut v = best.0.clone();
            v[i] += step;
            simplex.push(v);
        }
        let Ok(solver) = NelderMead::new(simplex).with_sd_tolerance(1e-14) else { break };
        let run = Executor::new(Objective { layout: obj.layout, a: obj.a, alpha: obj.alpha }, solver)
            .configure(|s| s.max_iters(cfg.max_iters))
            .run();
        let Ok(run) = run else { break };
        let state = run.state();
        let (Some(p), c) = (state.get_best_param().cloned(), state.get_best_cost()) else { break };
        let gain = best.1 - c;
        if c < best.1 {
            best = (p, c);
        }
        if !(gain > cfg.rel_tol * best.1.abs().max(1.0)) {
            break;
        }
    }
    best
}

/// Trace-free part of `Q0†·H·Q0` as real residuals, `H = S·S†`.
fn cluster_residual(layout: &Layout, a: &ModeMatrix, theta: &[f64], q0: &DMatrix<Complex64>) -> Vec<f64> {
    let s = scaled_matrix(a, &layout.point(theta), &layout.measured).into_matrix();
    let h = &s * s.adjoint();
    let e = q0.adjoint() * h * q0;
    let k = e.nrows();
    let scale = e[(0, 0)].re.abs().max(1e-300);
    let mut out = Vec::new();
    for i in 1..k {
        out.push((e[(i, i)].re - e[(0, 0)].re) / scale);
    }
    for i in 0..k {
        for j in (i + 1)..k {
            out.push(e[(i, j)].re / scale);
            out.push(e[(i, j)].im / scale);
        }
    }
    out
}

fn top_eigvecs(layout: &Layout, a: &ModeMatrix, theta: &[f64], k: usize) -> (DMatrix<Complex64>, Vec<f64>) {
    let s = scaled_matrix(a, &layout.point(theta), &layout.measured).into_matrix();
    let h = &s * s.adjoint();
    let eig = h.symmetric_eigen();
    let mut idx: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    idx.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let q = DMatrix::from_fn(s.nrows(), k, |r, c| eig.eigenvectors[(r, idx[c])]);
    let vals = idx.iter().map(|&i| eig.eigenvalues[i].max(0.0).sqrt()).collect();
    (q, vals)
}

/// Moves a nonsmooth optimum onto the exact coalescence of its top `k`
/// singular values.
fn polish_cluster(layout: &Layout, a: &ModeMatrix, theta: &[f64], k: usize) -> Option<Vec<f64>> {
    let mut t = theta.to_vec();
    let h = 1e-7;
    for _ in 0..200 {
        let (q0, vals) = top_eigvecs(layout, a, &t, k);
        if (vals[0] - vals[k - 1]) / vals[0] < 1e-14 {
            return Some(t);
        }
        let r = cluster_residual(layout, a, &t, &q0);
        let mut jac = DMatrix::<f64>::zeros(r.len(), t.len());
        for j in 0..t.len() {
            let (mut tp, mut tm) = (t.clone(), t.clone());
            tp[j] += h;
            tm[j] -= h;
            let (rp, rm) = (cluster_residual(layout, a, &tp, &q0), cluster_residual(layout, a, &tm, &q0));
            for i in 0..r.len() {
                jac[(i, j)] = (rp[i] - rm[i]) / (2.0 * h);
            }
        }
        let rhs = nalgebra::DVector::from_iterator(r.len(), r.iter().map(|v| -v));
        let step = jac.svd(true, true).solve(&rhs, 1e-12).ok()?;
        if step.iter().any(|v| !v.is_finite()) {
            return None;
        }
        t.iter_mut().zip(step.iter()).for_each(|(x, d)| *x += d);
    }
    None
}

fn count_clustered(s: &[f64]) -> usize {
    s.iter().take_while(|&&v| v >= s[0] * (1.0 - 1e-4)).count()
}

/// Maximizes the success probability of one class over its scalings.
pub fn optimize_class(rep: &ClassRepresentative, problem: &SynthesisProblem, cfg: &OptConfig) -> Result<OptResult> {
    let a = &rep.matrix;
    if a.dim() != problem.modes {
        return Err(Error::DimensionMismatch { expected: problem.modes, got: a.dim() });
    }
    let layout = Layout::new(problem);
    let dim = layout.dim();
    let obj = Objective { layout: &layout, a, alpha: rep.alpha };

    let restarts = cfg.restarts.max(1);
    let mut runs: Vec<(Vec<f64>, f64)> = if dim == 0 {
        vec![(Vec::new(), obj.cost(&Vec::new()).unwrap_or(f64::INFINITY))]
    } else {
        let k = layout.rows.len().saturating_sub(1);
        (0..restarts)
            .into_par_iter()
            .map(|r| {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(r as u64));
                let frac = if restarts > 1 { r as f64 / (restarts - 1) as f64 } else { 0.5 };
                let y0 = cfg.y_min.ln() + frac * (cfg.y_max.ln() - cfg.y_min.ln());
                let start: Vec<f64> = (0..dim)
                    .map(|i| if i < k { rng.gen_range(-1.0..1.0) } else { y0 + rng.gen_range(-0.1..0.1) })
                    .collect();
                nelder_mead(&Objective { layout: &layout, a, alpha: rep.alpha }, start, 0.3, cfg)
            })
            .collect()
    };
    runs.retain(|(_, c)| c.is_finite());
    if runs.is_empty() {
        return Err(Error::InvalidProblem("success probability is zero for every scaling".into()));
    }
    // deterministic choice: lowest cost, then lowest restart index
    let (best_idx, _) = runs
        .iter()
        .enumerate()
        .min_by(|(_, x), (_, y)| x.1.total_cmp(&y.1))
        .expect("nonempty");
    let worst = runs.iter().map(|r| r.1).fold(f64::NEG_INFINITY, f64::max);
    let (mut theta, best_cost) = runs[best_idx].clone();

    let (_, p_nm) = layout.boundary(a, rep.alpha, &theta);
    let s = scaled_matrix(a, &layout.point(&theta), &layout.measured).singular_values();
    let k = count_clustered(&s);
    if k > 1 && dim > 0 {
        if let Some(t) = polish_cluster(&layout, a, &theta, k) {
            let (_, p) = layout.boundary(a, rep.alpha, &t);
            if p >= p_nm * (1.0 - 1e-7) {
                theta = t;
            }
        }
    }
    let (point, p_success) = layout.boundary(a, rep.alpha, &theta);
    let scaled = scaled_matrix(a, &point, &layout.measured);
    let top = scaled.singular_values()[0];
    let d = extend_to_unitary(&scaled, UNIT_TOL).map(|r| r.d).unwrap_or(a.dim());
    let spread = {
        let (pb, pw) = ((-best_cost).exp(), (-worst).exp());
        if pb > 0.0 { (pb - pw) / pb } else { 0.0 }
    };
    Ok(OptResult {
        point,
        p_success,
        scaled_matrix: scaled,
        on_boundary: (top - 1.0).abs() <= 1e-8,
        d,
        restarts: if dim == 0 { 1 } else { restarts },
        spread,
    })
}

fn canonical_key(m: &ModeMatrix) -> Vec<(i64, i64)> {
    m.rows()
        .iter()
        .flatten()
        .map(|z| ((z.re * 1e8).round() as i64, (z.im * 1e8).round() as i64))
        .collect()
}

/// Optimizes every class, best first. Ties in probability (9 significant
/// digits) go to the smaller dilation, then to the canonical matrix order.
pub fn optimize_all(
    reps: &[ClassRepresentative],
    problem: &SynthesisProblem,
    cfg: &OptConfig,
) -> Result<Vec<(usize, OptResult)>> {
    if reps.is_empty() {
        return Err(Error::InvalidProblem("no class representatives to optimize".into()));
    }
    let mut out: Vec<(usize, OptResult)> = reps
        .iter()
        .enumerate()
        .map(|(i, r)| optimize_class(r, problem, cfg).map(|o| (i, o)))
        .collect::<Result<_>>()?;
    // probabilities compared at 9 significant digits so the order is total
    let rank = |p: f64| -> i64 {
        if p <= 0.0 {
            return 0;
        }
        let e = p.log10().floor() as i32 - 8;
        ((p / 10f64.powi(e)).round() as i64) + 1_000_000_000 * (e as i64 + 400)
    };
    out.sort_by(|(_, a), (_, b)| {
        rank(b.p_success)
            .cmp(&rank(a.p_success))
            .then_with(|| a.d.cmp(&b.d))
            .then_with(|| canonical_key(&a.scaled_matrix).cmp(&canonical_key(&b.scaled_matrix)))
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn probability_exponents() {
        let a = Complex64::new(0.5, 0.0);
        let base = success_probability(a, &ScalingPoint::ones(2, 1), &[2, 1], &[1]);
        assert!((base - 0.25).abs() < 1e-15);
        let p = ScalingPoint { x: vec![2.0, 1.0], y: vec![1.0] };
        let doubled = success_probability(a, &p, &[2, 1], &[1]);
        assert!((doubled / base - 16.0).abs() < 1e-12);
    }

    #[test]
    fn schur_on_unitary() {
        let u = ModeMatrix::identity(2);
        let one = ScalingPoint::ones(2, 1);
        assert!(feasibility_schur(&u, &one, &[1]));
        let two = ScalingPoint { x: vec![2.0, 2.0], y: vec![1.0] };
        assert!(!feasibility_schur(&u, &two, &[1]));
        assert!(!feasibility_direct(&u, &two, &[1], 1e-10));
    }
}
