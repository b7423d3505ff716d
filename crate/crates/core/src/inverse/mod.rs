//! The inverse problem: find a (generally non-unitary) mode matrix whose
//! heralded output is proportional to a target state.
//!
//! The heralded polynomial `G` is expanded symbolically with the entries of
//! the matrix as unknowns, and the coefficients of `G − β·Q` become a
//! polynomial system over Q(i). Row scalings and scalings of detected columns
//! map solutions to solutions, so one entry per row and one per detected
//! column is fixed to 1 before solving. The system is triangularized by a
//! lexicographic Gröbner basis and the finitely many class representatives
//! are recovered by back-substitution through univariate root finding.

pub mod groebner;
pub mod modular;
pub mod roots;

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use num_bigint::BigInt;
use num_complex::{Complex, Complex64};
use num_rational::BigRational;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fockpoly::{
    coefficient_extract, gaussian, gaussian_to_complex, norm_sqr, split_by_vars, FockState,
    GaussianRational, Monomial, Poly, StateVector, SymbolicPoly,
};
use crate::forward::{Convention, MeasurementPattern, ModeMatrix};
use crate::io::ComplexJson;

use groebner::{Budget, Field, MonomialOrder, Mpoly};

/// Tolerance on `|generator(solution)|` for accepting a representative.
pub const RESIDUAL_TOL: f64 = 1e-8;
/// Solutions closer than this (max-norm) are merged.
pub const DEDUPE_RADIUS: f64 = 1e-8;

/// Input state, heralding pattern on the last modes, and target on the rest.
#[derive(Clone, Debug, PartialEq)]
pub struct SynthesisProblem {
    pub modes: usize,
    pub input: FockState,
    pub measurement: MeasurementPattern,
    pub target: StateVector,
}

impl SynthesisProblem {
    pub fn new(modes: usize, input: FockState, measurement: MeasurementPattern, target: StateVector) -> Result<Self> {
        let p = SynthesisProblem { modes, input, measurement, target };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input.modes() != self.modes {
            return Err(Error::DimensionMismatch { expected: self.modes, got: self.input.modes() });
        }
        self.measurement.validate()?;
        let m = self.measurement.modes.len();
        if m >= self.modes {
            return Err(Error::InvalidProblem("at least one mode must stay undetected".into()));
        }
        let expected: Vec<usize> = (self.modes - m..self.modes).collect();
        if self.measurement.modes != expected {
            return Err(Error::InvalidProblem(format!(
                "detected modes must be the last {m} modes in increasing order, got {:?}",
                self.measurement.modes
            )));
        }
        if self.target.is_empty() || norm_sqr(&self.target) == 0.0 {
            return Err(Error::InvalidProblem("target state is zero".into()));
        }
        let rest = self.input.total().checked_sub(self.measurement.total()).ok_or_else(|| {
            Error::InvalidProblem("more photons detected than injected".into())
        })?;
        for (s, a) in &self.target {
            if s.modes() != self.unmeasured() {
                return Err(Error::DimensionMismatch { expected: self.unmeasured(), got: s.modes() });
            }
            if a.norm() > 0.0 && s.total() != rest {
                return Err(Error::InvalidProblem(format!(
                    "target component {s} carries {} photons, expected n - m = {rest}",
                    s.total()
                )));
            }
        }
        if (norm_sqr(&self.target) - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidProblem(format!(
                "target norm² is {}, expected 1",
                norm_sqr(&self.target)
            )));
        }
        Ok(())
    }

    /// Number of undetected modes `N − M`.
    pub fn unmeasured(&self) -> usize {
        self.modes - self.measurement.modes.len()
    }

    /// Size of the NOON state if the target is `(|k,0⟩ + e^{iφ}|0,k⟩)/√2` on two modes.
    pub fn noon_size(&self) -> Option<u32> {
        let comps: Vec<(&FockState, &Complex64)> = self.target.iter().filter(|(_, a)| a.norm() > 0.0).collect();
        if comps.len() != 2 || (comps[0].1.norm() - comps[1].1.norm()).abs() > 1e-9 {
            return None;
        }
        let single = |s: &FockState| -> Option<usize> {
            let nz: Vec<usize> = s.0.iter().enumerate().filter(|(_, &k)| k > 0).map(|(i, _)| i).collect();
            (nz.len() == 1).then(|| nz[0])
        };
        let (a, b) = (single(comps[0].0)?, single(comps[1].0)?);
        (a != b).then(|| comps[0].0.total())
    }
}

/// `N(m+1) − m`: the largest NOON state reachable from `N` modes with `m`
/// heralded photons.
pub fn noon_bound(modes: u32, measured: u32) -> u32 {
    modes * (measured + 1) - measured
}

/// Refuses NOON requests ruled out by the unique-factorization argument.
pub fn check_noon_feasibility(problem: &SynthesisProblem) -> Result<()> {
    let Some(size) = problem.noon_size() else {
        return Ok(());
    };
    let m = problem.measurement.total();
    if let Some((i, &ni)) = problem.input.0.iter().enumerate().find(|(_, &k)| k > m + 1) {
        return Err(Error::InfeasibleBound(format!(
            "input mode {i} carries {ni} photons, more than m + 1 = {}",
            m + 1
        )));
    }
    let bound = noon_bound(problem.modes as u32, m);
    if size > bound {
        return Err(Error::InfeasibleBound(format!(
            "NOON size {size} exceeds N(m+1) - m = {bound}"
        )));
    }
    Ok(())
}

/// Choice of fixed entries: in every active row `i` the undetected column
/// `columns[i]`, and in the `l`-th detected column the row `rows[l]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Gauge {
    pub columns: Vec<usize>,
    pub rows: Vec<usize>,
}

impl Gauge {
    /// The same column in every row and the same row in every detected column.
    pub fn uniform(modes: usize, detected: usize, column: usize, row: usize) -> Self {
        Gauge { columns: vec![column; modes], rows: vec![row; detected] }
    }
}

/// Role of a matrix entry in the system.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Entry {
    /// Row without input photons, or detected column expecting no photons.
    Zero,
    /// Fixed by the gauge.
    One,
    Var(usize),
}

/// The coefficients of `G − β·Q`, with `β` the last variable.
#[derive(Clone, Debug)]
pub struct PolynomialSystem {
    pub generators: Vec<SymbolicPoly>,
    pub variables: Vec<String>,
    pub entries: Vec<Vec<Entry>>,
    pub gauge: Gauge,
    /// Physical amplitude `α = conversion · β`.
    pub conversion: Complex64,
    /// Extra constraints `x_v = value` used to pick points on positive-dimensional sets.
    pub specializations: Vec<(usize, GaussianRational)>,
}

impl PolynomialSystem {
    pub fn beta_index(&self) -> usize {
        self.variables.len() - 1
    }

    pub fn nvars(&self) -> usize {
        self.variables.len()
    }

    /// Generators plus any specialization constraints.
    pub fn all_generators(&self) -> Vec<SymbolicPoly> {
        let n = self.nvars();
        let mut g = self.generators.clone();
        for (v, val) in &self.specializations {
            g.push(Poly::var(n, *v).try_sub(&Poly::constant(n, val.clone())).expect("same ring"));
        }
        g
    }

    /// Gauge-fixed entries `(row, column)`.
    pub fn fixed_entries(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (i, row) in self.entries.iter().enumerate() {
            for (j, e) in row.iter().enumerate() {
                if *e == Entry::One {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn matrix_at(&self, point: &[Complex64]) -> ModeMatrix {
        let n = self.entries.len();
        let m = DMatrix::from_fn(n, n, |i, j| match self.entries[i][j] {
            Entry::Zero => Complex64::new(0.0, 0.0),
            Entry::One => Complex64::new(1.0, 0.0),
            Entry::Var(k) => point[k],
        });
        ModeMatrix::new(m).expect("square")
    }
}

/// Rational with denominator at most 10^6 within 1e-14 relative of `x`.
/// Irrational ratios are rejected, since their convergents stay far off
/// at that size.
pub fn rationalize(x: f64) -> Option<BigRational> {
    if !x.is_finite() {
        return None;
    }
    if x == 0.0 {
        return Some(BigRational::zero());
    }
    let tol = 1e-14 * x.abs().max(1.0);
    let (mut h0, mut h1): (i128, i128) = (0, 1);
    let (mut k0, mut k1): (i128, i128) = (1, 0);
    let mut r = x;
    for _ in 0..64 {
        let a = r.floor();
        if a.abs() > 1e15 {
            return None;
        }
        let ai = a as i128;
        let (h2, k2) = (ai * h1 + h0, ai * k1 + k0);
        if k2 > 1_000_000 {
            return None;
        }
        if (x - h2 as f64 / k2 as f64).abs() <= tol {
            return Some(BigRational::new(BigInt::from(h2), BigInt::from(k2)));
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        let frac = r - a;
        if frac == 0.0 {
            return None;
        }
        r = 1.0 / frac;
    }
    None
}

/// Target polynomial `Q = c_Q · Q_raw` with exact `Q_raw` normalized to a
/// unit reference coefficient.
fn exact_target(problem: &SynthesisProblem) -> Result<(Vec<(Monomial, GaussianRational)>, Complex64)> {
    let coeffs: Vec<(Monomial, Complex64)> = problem
        .target
        .iter()
        .filter(|(_, a)| a.norm() > 0.0)
        .map(|(s, a)| (Monomial(s.0.clone()), a / s.factorial_product().sqrt()))
        .collect();
    let max = coeffs.iter().map(|(_, q)| q.norm()).fold(0.0, f64::max);
    let reference = coeffs
        .iter()
        .find(|(_, q)| q.norm() >= max * (1.0 - 1e-12))
        .map(|(_, q)| *q)
        .expect("nonempty target");
    let mut out = Vec::new();
    for (m, q) in coeffs {
        let r = q / reference;
        let re = rationalize(r.re);
        let im = rationalize(r.im);
        match (re, im) {
            (Some(re), Some(im)) => out.push((m, Complex::new(re, im))),
            _ => {
                return Err(Error::InvalidProblem(format!(
                    "target coefficient ratio {r} is not an exact Gaussian rational"
                )))
            }
        }
    }
    Ok((out, reference))
}

/// Builds the system for `gauge`, refusing NOON targets ruled out by the bound.
pub fn build_system(problem: &SynthesisProblem, gauge: Gauge, convention: Convention) -> Result<PolynomialSystem> {
    problem.validate()?;
    check_noon_feasibility(problem)?;
    build_system_unchecked(problem, gauge, convention)
}

/// [`build_system`] without the NOON feasibility shortcut.
pub fn build_system_unchecked(problem: &SynthesisProblem, gauge: Gauge, convention: Convention) -> Result<PolynomialSystem> {
    problem.validate()?;
    let n_modes = problem.modes;
    let free_modes = problem.unmeasured();
    let meas = &problem.measurement;
    let detected: Vec<(usize, u32)> = meas.modes.iter().copied().zip(meas.counts.iter().copied()).collect();
    let active_cols: Vec<usize> = (0..free_modes)
        .chain(detected.iter().filter(|(_, k)| *k > 0).map(|(c, _)| *c))
        .collect();
    let active_rows: Vec<usize> = (0..n_modes).filter(|&i| problem.input.0[i] > 0).collect();
    if gauge.columns.len() != n_modes || gauge.rows.len() != detected.len() {
        return Err(Error::InvalidProblem("gauge does not match the mode layout".into()));
    }
    if let Some(&c) = active_rows.iter().map(|&i| &gauge.columns[i]).find(|&&c| c >= free_modes) {
        return Err(Error::InvalidProblem(format!("gauge column {c} is detected")));
    }

    let mut entries = vec![vec![Entry::Zero; n_modes]; n_modes];
    let mut variables = Vec::new();
    for &i in &active_rows {
        for &j in &active_cols {
            let fixed = if j < free_modes {
                j == gauge.columns[i]
            } else {
                let l = meas.modes.iter().position(|&m| m == j).expect("detected column");
                i == gauge.rows[l]
            };
            entries[i][j] = if fixed {
                Entry::One
            } else {
                variables.push(format!("A[{i},{j}]"));
                Entry::Var(variables.len() - 1)
            };
        }
    }
    let n_free = variables.len();
    variables.push("beta".to_string());
    let nv = variables.len();

    // combined ring: operator variables for active columns, then unknowns
    let k = active_cols.len();
    let ring = k + nv;
    let op_index = |col: usize| active_cols.iter().position(|&c| c == col).unwrap();
    let limits: Vec<(usize, u32)> = detected
        .iter()
        .filter(|(_, cnt)| *cnt > 0)
        .map(|&(c, cnt)| (op_index(c), cnt))
        .collect();
    let keep = |m: &Monomial| limits.iter().all(|&(v, cnt)| m.0[v] <= cnt);

    let mut f: SymbolicPoly = Poly::one(ring);
    for &i in &active_rows {
        let mut form: SymbolicPoly = Poly::zero(ring);
        for &j in &active_cols {
            let a = Poly::var(ring, op_index(j));
            let term = match entries[i][j] {
                Entry::One => a,
                Entry::Var(v) => a.try_mul(&Poly::var(ring, k + v))?,
                Entry::Zero => continue,
            };
            form = form.try_add(&term)?;
        }
        for _ in 0..problem.input.0[i] {
            f = f.mul_filtered(&form, keep)?;
        }
    }
    let g = coefficient_extract(&f, &limits);
    // g lives in [free operator vars..., unknowns...]
    let free_ops: Vec<usize> = (0..free_modes).collect();
    let parts = split_by_vars(&g, &free_ops);

    let (q_raw, reference) = exact_target(problem)?;
    let beta = Poly::var(nv, nv - 1);
    let mut keys: BTreeSet<Monomial> = parts.keys().cloned().collect();
    keys.extend(q_raw.iter().map(|(m, _)| m.clone()));
    let mut generators = Vec::new();
    for key in keys {
        let lhs = parts.get(&key).cloned().unwrap_or_else(|| Poly::zero(nv));
        let q = q_raw
            .iter()
            .find(|(m, _)| *m == key)
            .map(|(_, c)| c.clone())
            .unwrap_or_else(|| gaussian(0, 0));
        let gen = lhs.try_sub(&beta.scale(&q))?;
        if !gen.is_zero() {
            generators.push(gen);
        }
    }
    debug_assert!(n_free + 1 == nv);

    let n_fact: f64 = problem.input.factorial_product();
    let kappa = convention.measurement_factor(meas) / n_fact.sqrt();
    let conversion = Complex64::new(kappa, 0.0) / reference;

    Ok(PolynomialSystem { generators, variables, entries, gauge: gauge.clone(), conversion, specializations: Vec::new() })
}

/// Lexicographic basis, increasing leading monomial first.
#[derive(Clone, Debug)]
pub struct GroebnerBasis {
    pub polys: Vec<SymbolicPoly>,
    pub variables: Vec<String>,
    /// Variable whose vanishing was removed by saturation.
    pub saturated_by: Option<usize>,
}

fn as_real(polys: &[SymbolicPoly]) -> Option<Vec<Poly<BigRational>>> {
    if polys.iter().all(|p| p.terms().all(|(_, c)| c.im.is_zero())) {
        Some(polys.iter().map(|p| p.map(|c| c.re.clone())).collect())
    } else {
        None
    }
}

fn from_real(polys: Vec<Poly<BigRational>>) -> Vec<SymbolicPoly> {
    polys
        .into_iter()
        .map(|p| p.map(|c| Complex::new(c.clone(), BigRational::zero())))
        .collect()
}

fn to_mpolys<F: Field>(polys: &[Poly<F>], order: MonomialOrder) -> Vec<Mpoly<F>> {
    polys.iter().map(|p| Mpoly::from_poly(p, order)).collect()
}

/// Lex basis of `(gens) : x_sat^∞` (or of `(gens)` when `sat` is `None`).
fn lex_basis_generic<F: Field>(gens: &[Poly<F>], nvars: usize, sat: Option<usize>, budget: &Budget) -> Result<Vec<Poly<F>>> {
    let Some(s) = sat else {
        let grev = groebner::buchberger(&to_mpolys(gens, MonomialOrder::GrevLex), MonomialOrder::GrevLex, budget)?;
        let lex = if groebner::is_unit_ideal(&grev) {
            grev
        } else if groebner::missing_pure_powers(&grev, nvars).is_empty() {
            groebner::fglm(&grev, nvars, MonomialOrder::GrevLex, MonomialOrder::Lex, budget)?
        } else {
            groebner::buchberger(&to_mpolys(gens, MonomialOrder::Lex), MonomialOrder::Lex, budget)?
        };
        return Ok(lex.iter().map(|p| p.to_poly(nvars)).collect());
    };
    // extra variable t (index 0, the largest) with t·x_sat − 1
    let ext = nvars + 1;
    let shift: Vec<usize> = (1..=nvars).collect();
    let mut ext_gens: Vec<Poly<F>> = gens.iter().map(|g| g.remap(ext, &shift)).collect();
    let t_x = Poly::var(ext, 0).try_mul(&Poly::var(ext, s + 1))?;
    ext_gens.push(t_x.try_sub(&Poly::one(ext))?);
    let grev = groebner::buchberger(&to_mpolys(&ext_gens, MonomialOrder::GrevLex), MonomialOrder::GrevLex, budget)?;
    if groebner::is_unit_ideal(&grev) {
        return Ok(vec![Poly::one(nvars)]);
    }
    let lex = if groebner::missing_pure_powers(&grev, ext).is_empty() {
        groebner::fglm(&grev, ext, MonomialOrder::GrevLex, MonomialOrder::Lex, budget)?
    } else {
        groebner::buchberger(&to_mpolys(&ext_gens, MonomialOrder::Lex), MonomialOrder::Lex, budget)?
    };
    Ok(lex
        .iter()
        .filter(|p| p.terms().iter().all(|(e, _)| e.get(0) == 0))
        .map(|p| coefficient_extract(&p.to_poly(ext), &[(0, 0)]))
        .collect())
}

/// Lex basis lifted from prime fields; accepted once every generator
/// reduces to zero over the rationals and the S-pairs close.
fn lex_basis(gens: &[SymbolicPoly], nvars: usize, sat: Option<usize>, budget: &Budget) -> Result<Vec<SymbolicPoly>> {
    let gaussian = as_real(gens).is_none();
    modular::lift_basis(
        gens,
        nvars,
        gaussian,
        budget.max_primes,
        |img| lex_basis_generic(img, nvars, sat, budget),
        |cand| {
            let b = GroebnerBasis { polys: cand.to_vec(), variables: vec![String::new(); nvars], saturated_by: sat };
            b.is_unit() || (b.reduces_to_zero(gens) && b.satisfies_buchberger_criterion())
        },
    )
}

/// Lex basis computed directly over the rationals.
fn lex_basis_exact(gens: &[SymbolicPoly], nvars: usize, sat: Option<usize>, budget: &Budget) -> Result<Vec<SymbolicPoly>> {
    match as_real(gens) {
        Some(real) => Ok(from_real(lex_basis_generic(&real, nvars, sat, budget)?)),
        None => lex_basis_generic(gens, nvars, sat, budget),
    }
}

impl GroebnerBasis {
    /// Lex basis of the ideal generated by `gens`.
    pub fn of_generators(gens: &[SymbolicPoly], variables: Vec<String>, budget: &Budget) -> Result<Self> {
        let polys = lex_basis(gens, variables.len(), None, budget)?;
        Ok(GroebnerBasis { polys, variables, saturated_by: None })
    }

    /// Same basis, computed without modular lifting.
    pub fn of_generators_exact(gens: &[SymbolicPoly], variables: Vec<String>, budget: &Budget) -> Result<Self> {
        let polys = lex_basis_exact(gens, variables.len(), None, budget)?;
        Ok(GroebnerBasis { polys, variables, saturated_by: None })
    }

    pub fn nvars(&self) -> usize {
        self.variables.len()
    }

    pub fn len(&self) -> usize {
        self.polys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.polys.is_empty()
    }

    /// The basis is `{1}`.
    pub fn is_unit(&self) -> bool {
        self.polys.iter().any(|p| p.degree() == Some(0))
    }

    fn with_engine<R>(
        &self,
        extra: &[SymbolicPoly],
        real: impl FnOnce(&[Mpoly<BigRational>], &[Mpoly<BigRational>]) -> R,
        complex: impl FnOnce(&[Mpoly<GaussianRational>], &[Mpoly<GaussianRational>]) -> R,
    ) -> R {
        let mut all = self.polys.clone();
        all.extend_from_slice(extra);
        let lex = MonomialOrder::Lex;
        match as_real(&all) {
            Some(r) => {
                let (b, e) = r.split_at(self.polys.len());
                real(&to_mpolys(b, lex), &to_mpolys(e, lex))
            }
            None => complex(&to_mpolys(&self.polys, lex), &to_mpolys(extra, lex)),
        }
    }

    /// Ideal membership of every polynomial in `polys`.
    pub fn reduces_to_zero(&self, polys: &[SymbolicPoly]) -> bool {
        let lex = MonomialOrder::Lex;
        self.with_engine(
            polys,
            |b, e| groebner::reduces_to_zero(e, &monic_all(b), lex),
            |b, e| groebner::reduces_to_zero(e, &monic_all(b), lex),
        )
    }

    /// Every S-polynomial of the basis reduces to zero.
    pub fn satisfies_buchberger_criterion(&self) -> bool {
        let lex = MonomialOrder::Lex;
        self.with_engine(
            &[],
            |b, _| groebner::satisfies_buchberger_criterion(b, lex),
            |b, _| groebner::satisfies_buchberger_criterion(b, lex),
        )
    }

    /// Variables lacking a pure-power leading monomial.
    pub fn missing_pure_powers(&self) -> Vec<usize> {
        let lex = MonomialOrder::Lex;
        let n = self.nvars();
        self.with_engine(
            &[],
            |b, _| groebner::missing_pure_powers(b, n),
            |b, _| groebner::missing_pure_powers(b, n),
        )
        .into_iter()
        .filter(|_| lex == MonomialOrder::Lex)
        .collect()
    }

    /// Leading monomial of each element.
    pub fn leading_monomials(&self) -> Vec<Vec<u32>> {
        self.polys
            .iter()
            .map(|p| Mpoly::from_poly(p, MonomialOrder::Lex).leading().map(|e| e.exponents()).unwrap_or_default())
            .collect()
    }
}

fn monic_all<F: Field>(b: &[Mpoly<F>]) -> Vec<Mpoly<F>> {
    b.iter().map(|p| p.clone().monic()).collect()
}

/// Lex Gröbner basis of the system, saturated by `β` so that the
/// non-generating `β = 0` components are removed.
pub fn buchberger(system: &PolynomialSystem, budget: &Budget) -> Result<GroebnerBasis> {
    let gens = system.all_generators();
    let polys = lex_basis(&gens, system.nvars(), Some(system.beta_index()), budget)?;
    Ok(GroebnerBasis { polys, variables: system.variables.clone(), saturated_by: Some(system.beta_index()) })
}

/// [`buchberger`] computed entirely over the rationals, without modular lifting.
pub fn buchberger_exact(system: &PolynomialSystem, budget: &Budget) -> Result<GroebnerBasis> {
    let gens = system.all_generators();
    let polys = lex_basis_exact(&gens, system.nvars(), Some(system.beta_index()), budget)?;
    Ok(GroebnerBasis { polys, variables: system.variables.clone(), saturated_by: Some(system.beta_index()) })
}

fn derivative(p: &Poly<Complex64>, v: usize) -> Poly<Complex64> {
    let mut out = Poly::zero(p.nvars());
    for (m, c) in p.terms() {
        if m.0[v] > 0 {
            let mut e = m.0.clone();
            e[v] -= 1;
            out.add_term(Monomial(e), c * m.0[v] as f64);
        }
    }
    out
}

fn eval_c(p: &Poly<Complex64>, x: &[Complex64]) -> Complex64 {
    p.evaluate(x, |c| *c)
}

/// Numeric copies of exact polynomials for evaluation and Newton steps.
struct NumericSystem {
    polys: Vec<Poly<Complex64>>,
    jac: Vec<Vec<Poly<Complex64>>>,
}

impl NumericSystem {
    fn new(polys: &[SymbolicPoly], nvars: usize) -> Self {
        let polys: Vec<Poly<Complex64>> = polys.iter().map(|p| p.map(gaussian_to_complex)).collect();
        let jac = polys.iter().map(|p| (0..nvars).map(|v| derivative(p, v)).collect()).collect();
        NumericSystem { polys, jac }
    }

    fn residual(&self, x: &[Complex64]) -> f64 {
        self.polys.iter().map(|p| eval_c(p, x).norm()).fold(0.0, f64::max)
    }

    /// Gauss–Newton refinement with pseudo-inverse steps.
    fn polish(&self, x: &mut [Complex64], iters: usize) {
        let n = x.len();
        let mut best = self.residual(x);
        for _ in 0..iters {
            if best < 1e-15 || self.polys.is_empty() {
                break;
            }
            let r = DVector::from_iterator(self.polys.len(), self.polys.iter().map(|p| -eval_c(p, x)));
            let j = DMatrix::from_fn(self.polys.len(), n, |i, v| eval_c(&self.jac[i][v], x));
            let Some(step) = crate::linalg::lstsq(&j, &r, 1e-13) else { break };
            let trial: Vec<Complex64> = x.iter().zip(step.iter()).map(|(a, d)| a + d).collect();
            let res = self.residual(&trial);
            if res.is_finite() && res < best {
                x.copy_from_slice(&trial);
                best = res;
            } else {
                break;
            }
        }
    }
}

/// Polynomial coefficients in `x_v` after substituting known values for
/// the smaller variables.
fn univariate_at(p: &Poly<Complex64>, v: usize, partial: &[Option<Complex64>]) -> Vec<Complex64> {
    let mut out: Vec<Complex64> = Vec::new();
    for (m, c) in p.terms() {
        let mut t = *c;
        for (u, &k) in m.0.iter().enumerate() {
            if u == v || k == 0 {
                continue;
            }
            let val = partial[u].expect("smaller variables assigned");
            t *= val.powu(k);
        }
        let d = m.0[v] as usize;
        if out.len() <= d {
            out.resize(d + 1, Complex64::new(0.0, 0.0));
        }
        out[d] += t;
    }
    out
}

fn max_dist(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn canonical_cmp(a: &[Complex64], b: &[Complex64]) -> std::cmp::Ordering {
    let key = |z: &Complex64| ((z.re * 1e8).round() as i64, (z.im * 1e8).round() as i64);
    a.iter().map(key).cmp(b.iter().map(key))
}

/// All solutions of a zero-dimensional lex basis, found by extending roots
/// from the smallest variable upward.
///
/// Each solution is refined by Newton's method on `check` and kept only if
/// its residual there is at most [`RESIDUAL_TOL`]. Solutions are merged
/// within [`DEDUPE_RADIUS`] and returned in canonical numeric order.
pub fn solve_triangular(basis: &GroebnerBasis, check: &[SymbolicPoly]) -> Result<Vec<Vec<Complex64>>> {
    if basis.is_unit() {
        return Err(Error::EmptyIntersection);
    }
    let nv = basis.nvars();
    if let Some(&v) = basis.missing_pure_powers().last() {
        return Err(Error::NotZeroDimensional { variable: basis.variables[v].clone() });
    }
    let numeric: Vec<(usize, Poly<Complex64>)> = basis
        .polys
        .iter()
        .map(|p| {
            let main = Mpoly::from_poly(p, MonomialOrder::Lex).leading().and_then(|e| e.first_var()).unwrap_or(nv);
            (main, p.map(gaussian_to_complex))
        })
        .collect();

    let mut partials: Vec<Vec<Option<Complex64>>> = vec![vec![None; nv]];
    for v in (0..nv).rev() {
        let here: Vec<&Poly<Complex64>> = numeric.iter().filter(|(m, _)| *m == v).map(|(_, p)| p).collect();
        let mut next: Vec<Vec<Option<Complex64>>> = Vec::new();
        for partial in &partials {
            let unis: Vec<Vec<Complex64>> = here.iter().map(|p| roots::trim(&univariate_at(p, v, partial), 1e-10)).collect();
            if unis.iter().any(|u| u.len() == 1) {
                // nonzero constant: inconsistent branch
                continue;
            }
            let Some(pivot) = unis.iter().filter(|u| u.len() >= 2).min_by_key(|u| u.len()) else {
                continue;
            };
            for r in roots::roots(pivot) {
                let r = roots::polish(pivot, r, 4);
                let ok = unis.iter().all(|u| u.len() < 2 || roots::horner(u, r).norm() <= 1e-6 * roots::horner_scale(u, r).max(1e-300));
                if !ok {
                    continue;
                }
                let mut p = partial.clone();
                p[v] = Some(r);
                let vals: Vec<Complex64> = p[v..].iter().map(|z| z.unwrap()).collect();
                let dup = next.iter().any(|q| {
                    let qv: Vec<Complex64> = q[v..].iter().map(|z| z.unwrap()).collect();
                    max_dist(&qv, &vals) <= 1e-7 * (1.0 + vals.iter().map(|z| z.norm()).fold(0.0, f64::max))
                });
                if !dup {
                    next.push(p);
                }
            }
        }
        partials = next;
    }

    let check = NumericSystem::new(if check.is_empty() { &basis.polys } else { check }, nv);
    let mut sols: Vec<Vec<Complex64>> = Vec::new();
    for p in partials {
        let mut x: Vec<Complex64> = p.into_iter().map(|z| z.unwrap()).collect();
        check.polish(&mut x, 8);
        if check.residual(&x) > RESIDUAL_TOL {
            continue;
        }
        if sols.iter().any(|s| max_dist(s, &x) <= DEDUPE_RADIUS) {
            continue;
        }
        sols.push(x);
    }
    sols.sort_by(|a, b| canonical_cmp(a, b));
    Ok(sols)
}

/// Gauge-fixed solution matrix with its amplitudes.
#[derive(Clone, Debug)]
pub struct ClassRepresentative {
    pub matrix: ModeMatrix,
    /// Value of the system amplitude variable.
    pub beta: Complex64,
    /// Physical heralding amplitude, `conversion · β`.
    pub alpha: Complex64,
    pub residual: f64,
    pub gauge: Gauge,
    pub fixed_entries: Vec<(usize, usize)>,
    pub values: Vec<Complex64>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct FixedEntryJson {
    pub row: usize,
    pub column: usize,
    /// Exact value as a rational string.
    pub value: String,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ClassRepresentativeJson {
    pub matrix: ModeMatrix,
    pub alpha: ComplexJson,
    pub beta: ComplexJson,
    pub residual: f64,
    pub gauge: Gauge,
    pub fixed_entries: Vec<FixedEntryJson>,
}

impl ClassRepresentative {
    pub fn to_wire(&self) -> ClassRepresentativeJson {
        ClassRepresentativeJson {
            matrix: self.matrix.clone(),
            alpha: self.alpha.into(),
            beta: self.beta.into(),
            residual: self.residual,
            gauge: self.gauge.clone(),
            fixed_entries: self
                .fixed_entries
                .iter()
                .map(|&(row, column)| FixedEntryJson { row, column, value: "1".into() })
                .collect(),
        }
    }

    pub fn from_wire(w: &ClassRepresentativeJson) -> Self {
        ClassRepresentative {
            matrix: w.matrix.clone(),
            beta: w.beta.into(),
            alpha: w.alpha.into(),
            residual: w.residual,
            gauge: w.gauge.clone(),
            fixed_entries: w.fixed_entries.iter().map(|e| (e.row, e.column)).collect(),
            values: Vec::new(),
        }
    }
}

/// Representatives from the basis of `system`; `β = 0` points are discarded.
pub fn class_representatives(system: &PolynomialSystem, basis: &GroebnerBasis) -> Result<Vec<ClassRepresentative>> {
    let sols = solve_triangular(basis, &system.all_generators())?;
    let check = NumericSystem::new(&system.all_generators(), system.nvars());
    let b = system.beta_index();
    Ok(sols
        .into_iter()
        .filter(|x| x[b].norm() > 1e-10)
        .map(|x| ClassRepresentative {
            matrix: system.matrix_at(&x),
            beta: x[b],
            alpha: system.conversion * x[b],
            residual: check.residual(&x),
            gauge: system.gauge.clone(),
            fixed_entries: system.fixed_entries(),
            values: x,
        })
        .collect())
}

#[derive(Clone, Debug)]
pub struct SolveOptions {
    pub budget: Budget,
    pub convention: Convention,
    /// Pin free variables of positive-dimensional solution sets to small integers.
    pub specialize_free: bool,
    /// Apply the NOON feasibility bound before solving.
    pub enforce_bound: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { budget: Budget::from_env(), convention: Convention::Amplitude, specialize_free: false, enforce_bound: true }
    }
}

#[derive(Clone, Debug)]
pub struct SolveOutcome {
    pub system: PolynomialSystem,
    pub basis: GroebnerBasis,
    pub representatives: Vec<ClassRepresentative>,
    /// Gauges tried before `system.gauge` succeeded.
    pub rejected_gauges: Vec<Gauge>,
}

/// Most gauges tried before giving up.
const MAX_GAUGES: usize = 512;

/// Gauges in trial order: uniform choices first (the first undetected
/// column with the first active row leading), then per-row and
/// per-column mixtures.
pub fn candidate_gauges(problem: &SynthesisProblem) -> Vec<Gauge> {
    let n = problem.modes;
    let rows: Vec<usize> = (0..n).filter(|&i| problem.input.0[i] > 0).collect();
    let counts = &problem.measurement.counts;
    let detected = counts.len();
    // only detected columns expecting photons carry a fixed entry
    let lit: Vec<usize> = (0..detected).filter(|&l| counts[l] > 0).collect();
    let first_row = rows.first().copied().unwrap_or(0);
    let row_choices: Vec<usize> = if lit.is_empty() { vec![first_row] } else { rows.clone() };

    let mut out = Vec::new();
    for column in 0..problem.unmeasured() {
        for &row in &row_choices {
            out.push(Gauge::uniform(n, detected, column, row));
        }
    }
    // mixed radix over the per-row columns, then the per-column rows
    let free = problem.unmeasured();
    let digits: Vec<usize> = rows.iter().map(|_| free).chain(lit.iter().map(|_| row_choices.len())).collect();
    let mut idx = vec![0usize; digits.len()];
    'outer: loop {
        let mut g = Gauge::uniform(n, detected, 0, first_row);
        for (k, &i) in rows.iter().enumerate() {
            g.columns[i] = idx[k];
        }
        for (k, &l) in lit.iter().enumerate() {
            g.rows[l] = row_choices[idx[rows.len() + k]];
        }
        if !out.contains(&g) {
            if out.len() >= MAX_GAUGES {
                break;
            }
            out.push(g);
        }
        for k in (0..digits.len()).rev() {
            idx[k] += 1;
            if idx[k] < digits[k] {
                continue 'outer;
            }
            idx[k] = 0;
        }
        break;
    }
    out
}

const SPECIALIZATION_VALUES: [i64; 5] = [1, 2, -1, 3, -2];

fn solve_with_gauge(problem: &SynthesisProblem, gauge: Gauge, opts: &SolveOptions) -> Result<SolveOutcome> {
    let mut system = if opts.enforce_bound {
        build_system(problem, gauge, opts.convention)?
    } else {
        build_system_unchecked(problem, gauge, opts.convention)?
    };
    loop {
        let basis = buchberger(&system, &opts.budget)?;
        match class_representatives(&system, &basis) {
            Ok(reps) if reps.is_empty() => return Err(Error::EmptyIntersection),
            Ok(reps) => {
                return Ok(SolveOutcome { system, basis, representatives: reps, rejected_gauges: Vec::new() })
            }
            Err(Error::NotZeroDimensional { variable }) if opts.specialize_free => {
                let v = system.variables.iter().position(|n| *n == variable).expect("known variable");
                let mut solved = None;
                for val in SPECIALIZATION_VALUES {
                    let mut trial = system.clone();
                    trial.specializations.push((v, gaussian(val, 0)));
                    let b = buchberger(&trial, &opts.budget)?;
                    if !b.is_unit() {
                        solved = Some(trial);
                        break;
                    }
                }
                match solved {
                    Some(s) => system = s,
                    None => return Err(Error::EmptyIntersection),
                }
            }
            Err(e) => return Err(e),
        }
    }
}

/// Solves the inverse problem, retrying alternate gauges when the fixed
/// entries vanish on every solution of the current one.
pub fn solve_problem(problem: &SynthesisProblem, opts: &SolveOptions) -> Result<SolveOutcome> {
    problem.validate()?;
    if opts.enforce_bound {
        check_noon_feasibility(problem)?;
    }
    let mut rejected = Vec::new();
    for gauge in candidate_gauges(problem) {
        match solve_with_gauge(problem, gauge.clone(), opts) {
            Ok(mut out) => {
                out.rejected_gauges = rejected;
                return Ok(out);
            }
            Err(Error::EmptyIntersection) => rejected.push(gauge),
            Err(e) => return Err(e),
        }
    }
    Err(Error::EmptyIntersection)
}
