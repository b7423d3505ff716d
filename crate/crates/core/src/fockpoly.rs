//! Sparse multivariate polynomials over an arbitrary coefficient ring.
//!
//! The same container carries two roles: polynomials in creation operators
//! with floating complex coefficients (states), and polynomials in the entries
//! of a mode matrix with exact Gaussian-rational coefficients (the algebraic
//! system handed to the Gröbner engine).
//!
//! Terms are stored in a `BTreeMap` keyed by exponent vector, so iteration is
//! always in ascending lexicographic order of exponents and serialization is
//! deterministic.

use std::collections::BTreeMap;
use std::fmt::{self, Debug, Display};
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_complex::{Complex, Complex64};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ring operations required from a polynomial coefficient.
pub trait Coefficient:
    Clone
    + PartialEq
    + Debug
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
{
}

impl<T> Coefficient for T where
    T: Clone
        + PartialEq
        + Debug
        + Zero
        + One
        + Add<Output = T>
        + Sub<Output = T>
        + Mul<Output = T>
        + Neg<Output = T>
{
}

/// Exact element of Q(i).
pub type GaussianRational = Complex<BigRational>;

/// Gaussian rational from integer parts.
pub fn gaussian(re: i64, im: i64) -> GaussianRational {
    Complex::new(
        BigRational::from_integer(BigInt::from(re)),
        BigRational::from_integer(BigInt::from(im)),
    )
}

/// Gaussian rational `re_num/re_den + i im_num/im_den`.
pub fn gaussian_ratio(re_num: i64, re_den: i64, im_num: i64, im_den: i64) -> GaussianRational {
    Complex::new(
        BigRational::new(BigInt::from(re_num), BigInt::from(re_den)),
        BigRational::new(BigInt::from(im_num), BigInt::from(im_den)),
    )
}

/// Nearest double-precision value.
pub fn gaussian_to_complex(z: &GaussianRational) -> Complex64 {
    Complex64::new(
        z.re.to_f64().unwrap_or(f64::NAN),
        z.im.to_f64().unwrap_or(f64::NAN),
    )
}

/// Exponent vector over a declared variable set.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub struct Monomial(pub Vec<u32>);

impl Monomial {
    pub fn one(nvars: usize) -> Self {
        Monomial(vec![0; nvars])
    }

    pub fn var(nvars: usize, index: usize) -> Self {
        let mut e = vec![0; nvars];
        e[index] = 1;
        Monomial(e)
    }

    pub fn nvars(&self) -> usize {
        self.0.len()
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        Monomial(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }
}

/// Occupation-number vector of a bosonic state.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FockState(pub Vec<u32>);

impl FockState {
    pub fn new(occupations: impl Into<Vec<u32>>) -> Self {
        FockState(occupations.into())
    }

    pub fn vacuum(modes: usize) -> Self {
        FockState(vec![0; modes])
    }

    pub fn modes(&self) -> usize {
        self.0.len()
    }

    /// Total photon number.
    pub fn total(&self) -> u32 {
        self.0.iter().sum()
    }

    /// `∏ k_j!` as a float.
    pub fn factorial_product(&self) -> f64 {
        self.0.iter().map(|&k| factorial(k)).product()
    }

    /// Same state followed by `extra` vacuum modes.
    pub fn padded(&self, extra: usize) -> Self {
        let mut v = self.0.clone();
        v.extend(std::iter::repeat_n(0, extra));
        FockState(v)
    }
}

impl Display for FockState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "|")?;
        for (i, k) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{k}")?;
        }
        write!(f, "⟩")
    }
}

pub fn factorial(k: u32) -> f64 {
    (1..=k).map(f64::from).product()
}

/// State vector in the occupation-number basis.
pub type StateVector = BTreeMap<FockState, Complex64>;

/// Sparse polynomial; zero coefficients are never stored.
#[derive(Clone, PartialEq, Debug)]
pub struct Poly<C> {
    nvars: usize,
    terms: BTreeMap<Monomial, C>,
}

impl<C: Coefficient> Poly<C> {
    pub fn zero(nvars: usize) -> Self {
        Poly { nvars, terms: BTreeMap::new() }
    }

    pub fn constant(nvars: usize, c: C) -> Self {
        let mut p = Self::zero(nvars);
        p.add_term(Monomial::one(nvars), c);
        p
    }

    pub fn one(nvars: usize) -> Self {
        Self::constant(nvars, C::one())
    }

    /// The polynomial `x_index`.
    pub fn var(nvars: usize, index: usize) -> Self {
        let mut p = Self::zero(nvars);
        p.add_term(Monomial::var(nvars, index), C::one());
        p
    }

    /// Linear form `Σ c_j x_j`.
    pub fn linear(coeffs: &[C]) -> Self {
        let n = coeffs.len();
        let mut p = Self::zero(n);
        for (j, c) in coeffs.iter().enumerate() {
            p.add_term(Monomial::var(n, j), c.clone());
        }
        p
    }

    pub fn from_terms(nvars: usize, terms: impl IntoIterator<Item = (Monomial, C)>) -> Result<Self> {
        let mut p = Self::zero(nvars);
        for (m, c) in terms {
            if m.nvars() != nvars {
                return Err(Error::VariableMismatch { left: nvars, right: m.nvars() });
            }
            p.add_term(m, c);
        }
        Ok(p)
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Terms in ascending lexicographic exponent order.
    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &C)> {
        self.terms.iter()
    }

    pub fn coefficient(&self, m: &Monomial) -> C {
        self.terms.get(m).cloned().unwrap_or_else(C::zero)
    }

    /// Adds `c·m`, dropping the term if it cancels.
    pub fn add_term(&mut self, m: Monomial, c: C) {
        debug_assert_eq!(m.nvars(), self.nvars);
        if c.is_zero() {
            return;
        }
        match self.terms.remove(&m) {
            Some(old) => {
                let s = old + c;
                if !s.is_zero() {
                    self.terms.insert(m, s);
                }
            }
            None => {
                self.terms.insert(m, c);
            }
        }
    }

    /// Total degree; `None` for the zero polynomial.
    pub fn degree(&self) -> Option<u32> {
        self.terms.keys().map(Monomial::degree).max()
    }

    pub fn is_homogeneous(&self) -> bool {
        let mut degs = self.terms.keys().map(Monomial::degree);
        match degs.next() {
            None => true,
            Some(d) => degs.all(|e| e == d),
        }
    }

    pub fn scale(&self, c: &C) -> Self {
        let mut p = Self::zero(self.nvars);
        for (m, a) in &self.terms {
            p.add_term(m.clone(), a.clone() * c.clone());
        }
        p
    }

    pub fn try_add(&self, other: &Self) -> Result<Self> {
        self.check_vars(other)?;
        let mut p = self.clone();
        for (m, c) in &other.terms {
            p.add_term(m.clone(), c.clone());
        }
        Ok(p)
    }

    pub fn try_sub(&self, other: &Self) -> Result<Self> {
        self.check_vars(other)?;
        let mut p = self.clone();
        for (m, c) in &other.terms {
            p.add_term(m.clone(), -c.clone());
        }
        Ok(p)
    }

    pub fn try_mul(&self, other: &Self) -> Result<Self> {
        self.check_vars(other)?;
        let mut p = Self::zero(self.nvars);
        for (m1, c1) in &self.terms {
            for (m2, c2) in &other.terms {
                p.add_term(m1.mul(m2), c1.clone() * c2.clone());
            }
        }
        Ok(p)
    }

    /// Product that keeps only terms accepted by `keep`.
    pub fn mul_filtered(&self, other: &Self, keep: impl Fn(&Monomial) -> bool) -> Result<Self> {
        self.check_vars(other)?;
        let mut p = Self::zero(self.nvars);
        for (m1, c1) in &self.terms {
            for (m2, c2) in &other.terms {
                let m = m1.mul(m2);
                if keep(&m) {
                    p.add_term(m, c1.clone() * c2.clone());
                }
            }
        }
        Ok(p)
    }

    pub fn pow(&self, k: u32) -> Self {
        let mut acc = Self::one(self.nvars);
        for _ in 0..k {
            acc = acc.try_mul(self).expect("same variable set");
        }
        acc
    }

    pub fn map<D: Coefficient>(&self, f: impl Fn(&C) -> D) -> Poly<D> {
        let mut p = Poly::zero(self.nvars);
        for (m, c) in &self.terms {
            p.add_term(m.clone(), f(c));
        }
        p
    }

    /// Re-embeds the polynomial into `nvars` variables; variable `i` becomes `index_map[i]`.
    pub fn remap(&self, nvars: usize, index_map: &[usize]) -> Self {
        let mut p = Self::zero(nvars);
        for (m, c) in &self.terms {
            let mut e = vec![0; nvars];
            for (i, &k) in m.0.iter().enumerate() {
                e[index_map[i]] += k;
            }
            p.add_term(Monomial(e), c.clone());
        }
        p
    }

    fn check_vars(&self, other: &Self) -> Result<()> {
        if self.nvars != other.nvars {
            return Err(Error::VariableMismatch { left: self.nvars, right: other.nvars });
        }
        Ok(())
    }
}

impl<C: Coefficient> Poly<C> {
    /// Evaluates at a point given in a target ring.
    pub fn evaluate<T>(&self, point: &[T], lift: impl Fn(&C) -> T) -> T
    where
        T: Coefficient,
    {
        let mut acc = T::zero();
        for (m, c) in &self.terms {
            let mut t = lift(c);
            for (x, &k) in point.iter().zip(&m.0) {
                for _ in 0..k {
                    t = t * x.clone();
                }
            }
            acc = acc + t;
        }
        acc
    }
}

/// Product of two polynomials over the same variables.
pub fn poly_mul<C: Coefficient>(p: &Poly<C>, q: &Poly<C>) -> Result<Poly<C>> {
    p.try_mul(q)
}

/// Selects the terms whose exponents match `pattern` exactly on the assigned
/// variables, then drops those variables.
///
/// The result lives in the remaining variables, in their original order.
pub fn coefficient_extract<C: Coefficient>(p: &Poly<C>, pattern: &[(usize, u32)]) -> Poly<C> {
    let assigned: Vec<Option<u32>> = {
        let mut a = vec![None; p.nvars()];
        for &(v, e) in pattern {
            a[v] = Some(e);
        }
        a
    };
    let remaining = assigned.iter().filter(|a| a.is_none()).count();
    let mut out = Poly::zero(remaining);
    'terms: for (m, c) in p.terms() {
        let mut e = Vec::with_capacity(remaining);
        for (k, a) in m.0.iter().zip(&assigned) {
            match a {
                Some(want) if want != k => continue 'terms,
                Some(_) => {}
                None => e.push(*k),
            }
        }
        out.add_term(Monomial(e), c.clone());
    }
    out
}

/// Groups terms by their exponents on `vars`; each group is a polynomial in
/// the remaining variables.
pub fn split_by_vars<C: Coefficient>(p: &Poly<C>, vars: &[usize]) -> BTreeMap<Monomial, Poly<C>> {
    let selected: Vec<bool> = (0..p.nvars()).map(|i| vars.contains(&i)).collect();
    let remaining = p.nvars() - vars.len();
    let mut out: BTreeMap<Monomial, Poly<C>> = BTreeMap::new();
    for (m, c) in p.terms() {
        let key = Monomial(vars.iter().map(|&v| m.0[v]).collect());
        let rest = Monomial(
            m.0.iter()
                .zip(&selected)
                .filter(|(_, s)| !**s)
                .map(|(k, _)| *k)
                .collect(),
        );
        out.entry(key)
            .or_insert_with(|| Poly::zero(remaining))
            .add_term(rest, c.clone());
    }
    out
}

/// Polynomial in creation operators with complex coefficients.
pub type OperatorPoly = Poly<Complex64>;

/// Polynomial in matrix-entry variables with exact coefficients.
pub type SymbolicPoly = Poly<GaussianRational>;

/// Maps `∏ (a†_j)^{k_j}` to `|k⟩` with amplitude `coefficient · √(∏ k_j!)`.
pub fn state_from_poly(p: &OperatorPoly) -> StateVector {
    p.terms()
        .map(|(m, c)| {
            let s = FockState(m.0.clone());
            let amp = c * s.factorial_product().sqrt();
            (s, amp)
        })
        .collect()
}

/// Inverse of [`state_from_poly`].
pub fn poly_from_state(state: &StateVector, modes: usize) -> Result<OperatorPoly> {
    let mut p = Poly::zero(modes);
    for (s, a) in state {
        if s.modes() != modes {
            return Err(Error::DimensionMismatch { expected: modes, got: s.modes() });
        }
        p.add_term(Monomial(s.0.clone()), a / s.factorial_product().sqrt());
    }
    Ok(p)
}

pub fn norm_sqr(state: &StateVector) -> f64 {
    state.values().map(|a| a.norm_sqr()).sum()
}

/// `⟨left|right⟩`.
pub fn inner(left: &StateVector, right: &StateVector) -> Complex64 {
    left.iter()
        .filter_map(|(s, a)| right.get(s).map(|b| a.conj() * b))
        .sum()
}

// ---------------------------------------------------------------------------
// JSON wire format

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct FloatTerm {
    pub exponents: Vec<u32>,
    pub re: f64,
    pub im: f64,
}

/// Exact term; integers are decimal strings so they never lose precision.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ExactTerm {
    pub exponents: Vec<u32>,
    pub re_num: String,
    pub re_den: String,
    pub im_num: String,
    pub im_den: String,
}

impl OperatorPoly {
    pub fn to_wire(&self) -> Vec<FloatTerm> {
        self.terms()
            .map(|(m, c)| FloatTerm { exponents: m.0.clone(), re: c.re, im: c.im })
            .collect()
    }

    pub fn from_wire(nvars: usize, terms: &[FloatTerm]) -> Result<Self> {
        Poly::from_terms(
            nvars,
            terms
                .iter()
                .map(|t| (Monomial(t.exponents.clone()), Complex64::new(t.re, t.im))),
        )
    }
}

fn parse_int(s: &str) -> Result<BigInt> {
    s.parse::<BigInt>()
        .map_err(|e| Error::Io(format!("bad integer `{s}`: {e}")))
}

fn parse_ratio(num: &str, den: &str) -> Result<BigRational> {
    let d = parse_int(den)?;
    if d.is_zero() {
        return Err(Error::Io("zero denominator".into()));
    }
    Ok(BigRational::new(parse_int(num)?, d))
}

impl SymbolicPoly {
    pub fn to_wire(&self) -> Vec<ExactTerm> {
        self.terms()
            .map(|(m, c)| ExactTerm {
                exponents: m.0.clone(),
                re_num: c.re.numer().to_string(),
                re_den: c.re.denom().to_string(),
                im_num: c.im.numer().to_string(),
                im_den: c.im.denom().to_string(),
            })
            .collect()
    }

    pub fn from_wire(nvars: usize, terms: &[ExactTerm]) -> Result<Self> {
        let mut out = Vec::with_capacity(terms.len());
        for t in terms {
            let c = Complex::new(parse_ratio(&t.re_num, &t.re_den)?, parse_ratio(&t.im_num, &t.im_den)?);
            out.push((Monomial(t.exponents.clone()), c));
        }
        Poly::from_terms(nvars, out)
    }
}
