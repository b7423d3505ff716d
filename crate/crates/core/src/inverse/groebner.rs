//! Gröbner bases over an exact coefficient field.
//!
//! [`buchberger`] runs the classical pair-completion algorithm with the
//! Gebauer–Möller installation of Buchberger's criteria and the sugar pair
//! selection strategy. [`fglm`] converts a zero-dimensional basis between
//! monomial orders by linear algebra in the quotient ring.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt::Debug;
use std::ops::Div;
use std::time::{Duration, Instant};

use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::fockpoly::{Coefficient, Monomial, Poly};

/// Coefficient field usable by the engine.
pub trait Field: Coefficient + Div<Output = Self> + Send + Sync {}

impl<T: Coefficient + Div<Output = T> + Send + Sync> Field for T {}

/// Exponent vector with cached total degree.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Exp {
    deg: u32,
    e: SmallVec<[u16; 8]>,
}

impl Exp {
    pub fn one(nvars: usize) -> Self {
        Exp { deg: 0, e: SmallVec::from_elem(0, nvars) }
    }

    pub fn from_slice(e: &[u32]) -> Self {
        let e: SmallVec<[u16; 8]> = e.iter().map(|&k| k as u16).collect();
        Exp { deg: e.iter().map(|&k| k as u32).sum(), e }
    }

    pub fn var(nvars: usize, i: usize) -> Self {
        let mut m = Self::one(nvars);
        m.e[i] = 1;
        m.deg = 1;
        m
    }

    pub fn exponents(&self) -> Vec<u32> {
        self.e.iter().map(|&k| k as u32).collect()
    }

    pub fn degree(&self) -> u32 {
        self.deg
    }

    pub fn divides(&self, other: &Exp) -> bool {
        self.deg <= other.deg && self.e.iter().zip(&other.e).all(|(a, b)| a <= b)
    }

    pub fn mul(&self, other: &Exp) -> Exp {
        Exp { deg: self.deg + other.deg, e: self.e.iter().zip(&other.e).map(|(a, b)| a + b).collect() }
    }

    /// `self / other`; caller guarantees divisibility.
    pub fn div(&self, other: &Exp) -> Exp {
        Exp { deg: self.deg - other.deg, e: self.e.iter().zip(&other.e).map(|(a, b)| a - b).collect() }
    }

    pub fn lcm(&self, other: &Exp) -> Exp {
        let e: SmallVec<[u16; 8]> = self.e.iter().zip(&other.e).map(|(a, b)| *a.max(b)).collect();
        Exp { deg: e.iter().map(|&k| k as u32).sum(), e }
    }

    pub fn coprime(&self, other: &Exp) -> bool {
        self.e.iter().zip(&other.e).all(|(a, b)| *a == 0 || *b == 0)
    }

    /// `Some(i)` if the monomial is `x_i^k` with `k ≥ 1`.
    pub fn pure_power_of(&self) -> Option<usize> {
        let mut found = None;
        for (i, &k) in self.e.iter().enumerate() {
            if k > 0 {
                if found.is_some() {
                    return None;
                }
                found = Some(i);
            }
        }
        found
    }

    /// Index of the largest (first) variable occurring.
    pub fn first_var(&self) -> Option<usize> {
        self.e.iter().position(|&k| k > 0)
    }

    pub fn get(&self, i: usize) -> u32 {
        self.e[i] as u32
    }
}

/// Admissible monomial orders; variable 0 is the largest.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MonomialOrder {
    Lex,
    GrevLex,
}

impl MonomialOrder {
    pub fn cmp(self, a: &Exp, b: &Exp) -> Ordering {
        match self {
            MonomialOrder::Lex => a.e.cmp(&b.e),
            MonomialOrder::GrevLex => a.deg.cmp(&b.deg).then_with(|| {
                for (x, y) in a.e.iter().zip(&b.e).rev() {
                    if x != y {
                        return y.cmp(x);
                    }
                }
                Ordering::Equal
            }),
        }
    }
}

/// Polynomial with terms sorted in decreasing monomial order.
#[derive(Clone, Debug, PartialEq)]
pub struct Mpoly<F> {
    terms: Vec<(Exp, F)>,
}

impl<F: Field> Mpoly<F> {
    pub fn zero() -> Self {
        Mpoly { terms: Vec::new() }
    }

    pub fn from_poly(p: &Poly<F>, order: MonomialOrder) -> Self {
        let mut terms: Vec<(Exp, F)> = p.terms().map(|(m, c)| (Exp::from_slice(&m.0), c.clone())).collect();
        terms.sort_by(|a, b| order.cmp(&b.0, &a.0));
        Mpoly { terms }
    }

    fn from_sorted(terms: Vec<(Exp, F)>) -> Self {
        Mpoly { terms }
    }

    pub fn to_poly(&self, nvars: usize) -> Poly<F> {
        Poly::from_terms(nvars, self.terms.iter().map(|(e, c)| (Monomial(e.exponents()), c.clone())))
            .expect("consistent variable count")
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[(Exp, F)] {
        &self.terms
    }

    pub fn leading(&self) -> Option<&Exp> {
        self.terms.first().map(|t| &t.0)
    }

    fn lm(&self) -> &Exp {
        &self.terms[0].0
    }

    pub fn total_degree(&self) -> u32 {
        self.terms.iter().map(|t| t.0.deg).max().unwrap_or(0)
    }

    pub fn monic(mut self) -> Self {
        if let Some((_, lc)) = self.terms.first() {
            if !lc.is_one() {
                let inv = F::one() / lc.clone();
                for t in &mut self.terms {
                    t.1 = t.1.clone() * inv.clone();
                }
            }
        }
        self
    }

    pub fn resort(&mut self, order: MonomialOrder) {
        self.terms.sort_by(|a, b| order.cmp(&b.0, &a.0));
    }
}

/// `a − c·m·b` where every term of `b` times `m` is merged into `a`.
fn sub_scaled<F: Field>(a: &[(Exp, F)], c: &F, m: &Exp, b: &[(Exp, F)], order: MonomialOrder) -> Vec<(Exp, F)> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    let mut bj: Option<Exp> = b.first().map(|t| t.0.mul(m));
    while i < a.len() || j < b.len() {
        match (a.get(i), &bj) {
            (Some(ta), Some(eb)) => match order.cmp(&ta.0, eb) {
                Ordering::Greater => {
                    out.push(ta.clone());
                    i += 1;
                }
                Ordering::Less => {
                    out.push((eb.clone(), -(c.clone() * b[j].1.clone())));
                    j += 1;
                    bj = b.get(j).map(|t| t.0.mul(m));
                }
                Ordering::Equal => {
                    let v = ta.1.clone() - c.clone() * b[j].1.clone();
                    if !v.is_zero() {
                        out.push((ta.0.clone(), v));
                    }
                    i += 1;
                    j += 1;
                    bj = b.get(j).map(|t| t.0.mul(m));
                }
            },
            (Some(ta), None) => {
                out.push(ta.clone());
                i += 1;
            }
            (None, Some(eb)) => {
                out.push((eb.clone(), -(c.clone() * b[j].1.clone())));
                j += 1;
                bj = b.get(j).map(|t| t.0.mul(m));
            }
            (None, None) => break,
        }
    }
    out
}

/// Full normal form of `f` modulo monic `divisors`.
pub fn normal_form<F: Field>(f: &Mpoly<F>, divisors: &[&Mpoly<F>], order: MonomialOrder) -> Mpoly<F> {
    let mut rem: Vec<(Exp, F)> = Vec::new();
    let mut p: Vec<(Exp, F)> = f.terms.clone();
    let mut start = 0;
    while start < p.len() {
        let (lm, lc) = (&p[start].0, &p[start].1);
        match divisors.iter().find(|g| g.lm().divides(lm)) {
            Some(g) => {
                let q = lm.div(g.lm());
                let c = lc.clone() / g.terms[0].1.clone();
                p = sub_scaled(&p[start + 1..], &c, &q, &g.terms[1..], order);
                start = 0;
            }
            None => {
                rem.push(p[start].clone());
                start += 1;
            }
        }
    }
    Mpoly::from_sorted(rem)
}

/// S-polynomial of two monic polynomials.
pub fn s_polynomial<F: Field>(f: &Mpoly<F>, g: &Mpoly<F>, order: MonomialOrder) -> Mpoly<F> {
    let l = f.lm().lcm(g.lm());
    let mf = l.div(f.lm());
    let mg = l.div(g.lm());
    let cf = f.terms[0].1.clone();
    let cg = g.terms[0].1.clone();
    // cg·mf·f − cf·mg·g, leading terms cancel
    let left: Vec<(Exp, F)> = f.terms[1..].iter().map(|(e, c)| (e.mul(&mf), c.clone() * cg.clone())).collect();
    Mpoly::from_sorted(sub_scaled(&left, &cf, &mg, &g.terms[1..], order))
}

/// Caps on the completion; exceeding any of them is a [`Error::ResourceCap`].
#[derive(Clone, Debug)]
pub struct Budget {
    pub max_basis: usize,
    pub max_pairs: usize,
    pub max_terms: usize,
    pub max_quotient_dim: usize,
    pub timeout: Option<Duration>,
    /// Primes tried when lifting modular bases to the rationals.
    pub max_primes: usize,
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            max_basis: 5_000,
            max_pairs: 500_000,
            max_terms: 200_000,
            max_quotient_dim: 5_000,
            timeout: Some(Duration::from_secs(600)),
            max_primes: 512,
        }
    }
}

impl Budget {
    /// Defaults overridden by `LOQSG_MAX_BASIS`, `LOQSG_MAX_PAIRS`, `LOQSG_MAX_TERMS`,
    /// `LOQSG_MAX_QUOTIENT` and `LOQSG_TIMEOUT_SECS`.
    pub fn from_env() -> Self {
        fn var<T: std::str::FromStr>(name: &str) -> Option<T> {
            std::env::var(name).ok().and_then(|v| v.parse().ok())
        }
        let mut b = Budget::default();
        if let Some(v) = var("LOQSG_MAX_BASIS") {
            b.max_basis = v;
        }
        if let Some(v) = var("LOQSG_MAX_PAIRS") {
            b.max_pairs = v;
        }
        if let Some(v) = var("LOQSG_MAX_TERMS") {
            b.max_terms = v;
        }
        if let Some(v) = var("LOQSG_MAX_QUOTIENT") {
            b.max_quotient_dim = v;
        }
        if let Some(v) = var::<u64>("LOQSG_TIMEOUT_SECS") {
            b.timeout = Some(Duration::from_secs(v));
        }
        b
    }
}

struct Pair {
    i: usize,
    j: usize,
    lcm: Exp,
    sugar: u32,
}

struct Completion<F> {
    order: MonomialOrder,
    polys: Vec<Mpoly<F>>,
    sugar: Vec<u32>,
    active: Vec<usize>,
    pairs: Vec<Pair>,
}

impl<F: Field> Completion<F> {
    fn pair(&self, i: usize, j: usize) -> Pair {
        let (li, lj) = (self.polys[i].lm(), self.polys[j].lm());
        let lcm = li.lcm(lj);
        let sugar = (self.sugar[i] + lcm.deg - li.deg).max(self.sugar[j] + lcm.deg - lj.deg);
        Pair { i, j, lcm, sugar }
    }

    /// Gebauer–Möller update after adding polynomial `h`.
    fn update(&mut self, h: usize) {
        let lh = self.polys[h].lm().clone();
        let mut c: Vec<Pair> = self.active.iter().map(|&g| self.pair(h, g)).collect();
        let mut d: Vec<Pair> = Vec::new();
        while let Some(p) = c.pop() {
            let coprime = lh.coprime(self.polys[p.j].lm());
            let dominated = c.iter().chain(d.iter()).any(|q| q.lcm.divides(&p.lcm));
            if coprime || !dominated {
                d.push(p);
            }
        }
        let e: Vec<Pair> = d.into_iter().filter(|p| !lh.coprime(self.polys[p.j].lm())).collect();
        let old = std::mem::take(&mut self.pairs);
        for p in old {
            let drop = lh.divides(&p.lcm)
                && lh.lcm(self.polys[p.i].lm()) != p.lcm
                && lh.lcm(self.polys[p.j].lm()) != p.lcm;
            if !drop {
                self.pairs.push(p);
            }
        }
        self.pairs.extend(e);
        let polys = &self.polys;
        self.active.retain(|&g| !lh.divides(polys[g].lm()));
        self.active.push(h);
    }

    fn select(&mut self) -> Option<Pair> {
        let order = self.order;
        let best = (0..self.pairs.len()).min_by(|&a, &b| {
            let (p, q) = (&self.pairs[a], &self.pairs[b]);
            p.sugar.cmp(&q.sugar).then_with(|| order.cmp(&p.lcm, &q.lcm))
        })?;
        Some(self.pairs.swap_remove(best))
    }

    fn reduce(&self, f: &Mpoly<F>) -> Mpoly<F> {
        let divisors: Vec<&Mpoly<F>> = self.active.iter().map(|&g| &self.polys[g]).collect();
        normal_form(f, &divisors, self.order)
    }

    fn insert(&mut self, p: Mpoly<F>, sugar: u32) -> usize {
        self.polys.push(p.monic());
        self.sugar.push(sugar);
        self.polys.len() - 1
    }
}

/// Reduced Gröbner basis of the ideal generated by `gens`, sorted by
/// increasing leading monomial.
pub fn buchberger<F: Field>(gens: &[Mpoly<F>], order: MonomialOrder, budget: &Budget) -> Result<Vec<Mpoly<F>>> {
    let started = Instant::now();
    let mut st = Completion { order, polys: Vec::new(), sugar: Vec::new(), active: Vec::new(), pairs: Vec::new() };
    for g in gens {
        let mut g = g.clone();
        g.resort(order);
        let r = st.reduce(&g);
        if r.is_zero() {
            continue;
        }
        let s = g.total_degree();
        let h = st.insert(r, s);
        st.update(h);
    }
    let mut processed = 0usize;
    while let Some(p) = st.select() {
        processed += 1;
        if processed > budget.max_pairs {
            return Err(Error::ResourceCap(format!("more than {} S-pairs", budget.max_pairs)));
        }
        if let Some(t) = budget.timeout {
            if started.elapsed() > t {
                return Err(Error::ResourceCap(format!("Gröbner completion exceeded {t:?}")));
            }
        }
        let s = s_polynomial(&st.polys[p.i], &st.polys[p.j], order);
        let r = st.reduce(&s);
        if r.is_zero() {
            continue;
        }
        if r.len() > budget.max_terms {
            return Err(Error::ResourceCap(format!("polynomial with {} terms", r.len())));
        }
        if r.leading().is_some_and(|e| e.deg == 0) {
            return Ok(vec![Mpoly::from_sorted(vec![(r.lm().clone(), F::one())])]);
        }
        let h = st.insert(r, p.sugar);
        st.update(h);
        if st.active.len() > budget.max_basis {
            return Err(Error::ResourceCap(format!("basis larger than {}", budget.max_basis)));
        }
    }
    Ok(interreduce(st.active.iter().map(|&i| st.polys[i].clone()).collect(), order))
}

/// Minimal, tail-reduced, monic basis sorted by increasing leading monomial.
pub fn interreduce<F: Field>(polys: Vec<Mpoly<F>>, order: MonomialOrder) -> Vec<Mpoly<F>> {
    let mut polys: Vec<Mpoly<F>> = polys.into_iter().filter(|p| !p.is_zero()).map(Mpoly::monic).collect();
    polys.sort_by(|a, b| order.cmp(a.lm(), b.lm()));
    let mut minimal: Vec<Mpoly<F>> = Vec::new();
    for p in polys {
        if !minimal.iter().any(|q| q.lm().divides(p.lm())) {
            minimal.push(p);
        }
    }
    let mut out = Vec::with_capacity(minimal.len());
    for k in 0..minimal.len() {
        let others: Vec<&Mpoly<F>> = minimal.iter().enumerate().filter(|(j, _)| *j != k).map(|(_, q)| q).collect();
        let head = minimal[k].terms[0].clone();
        let tail = Mpoly::from_sorted(minimal[k].terms[1..].to_vec());
        let mut terms = vec![head];
        terms.extend(normal_form(&tail, &others, order).terms);
        out.push(Mpoly::from_sorted(terms));
    }
    out
}

/// Every element of `polys` reduces to zero modulo `basis`.
pub fn reduces_to_zero<F: Field>(polys: &[Mpoly<F>], basis: &[Mpoly<F>], order: MonomialOrder) -> bool {
    let divs: Vec<&Mpoly<F>> = basis.iter().collect();
    polys.iter().all(|p| {
        let mut p = p.clone();
        p.resort(order);
        normal_form(&p, &divs, order).is_zero()
    })
}

/// Buchberger's criterion: all S-polynomials reduce to zero.
/// Pairs with coprime leading monomials are skipped (they always reduce to zero).
pub fn satisfies_buchberger_criterion<F: Field>(basis: &[Mpoly<F>], order: MonomialOrder) -> bool {
    let basis: Vec<Mpoly<F>> = basis.iter().map(|p| p.clone().monic()).collect();
    let divs: Vec<&Mpoly<F>> = basis.iter().collect();
    for i in 0..basis.len() {
        for j in (i + 1)..basis.len() {
            if basis[i].lm().coprime(basis[j].lm()) {
                continue;
            }
            let s = s_polynomial(&basis[i], &basis[j], order);
            if !normal_form(&s, &divs, order).is_zero() {
                return false;
            }
        }
    }
    true
}

/// Variables with no pure power among the leading monomials.
pub fn missing_pure_powers<F: Field>(basis: &[Mpoly<F>], nvars: usize) -> Vec<usize> {
    let mut have = vec![false; nvars];
    for p in basis {
        if let Some(i) = p.leading().and_then(Exp::pure_power_of) {
            have[i] = true;
        }
    }
    (0..nvars).filter(|&i| !have[i]).collect()
}

pub fn is_unit_ideal<F: Field>(basis: &[Mpoly<F>]) -> bool {
    basis.iter().any(|p| p.leading().is_some_and(|e| e.deg == 0))
}

/// Monomials outside the initial ideal, in increasing order.
pub fn standard_monomials<F: Field>(
    basis: &[Mpoly<F>],
    nvars: usize,
    order: MonomialOrder,
    limit: usize,
) -> Result<Vec<Exp>> {
    if is_unit_ideal(basis) {
        return Ok(Vec::new());
    }
    let leads: Vec<&Exp> = basis.iter().filter_map(|p| p.leading()).collect();
    let mut seen: HashMap<Exp, ()> = HashMap::new();
    let mut frontier = vec![Exp::one(nvars)];
    seen.insert(Exp::one(nvars), ());
    let mut out = Vec::new();
    while let Some(m) = frontier.pop() {
        out.push(m.clone());
        if out.len() > limit {
            return Err(Error::ResourceCap(format!("quotient ring dimension above {limit}")));
        }
        for i in 0..nvars {
            let next = m.mul(&Exp::var(nvars, i));
            if seen.contains_key(&next) || leads.iter().any(|l| l.divides(&next)) {
                continue;
            }
            seen.insert(next.clone(), ());
            frontier.push(next);
        }
    }
    out.sort_by(|a, b| order.cmp(a, b));
    Ok(out)
}

/// Converts a reduced Gröbner basis of a zero-dimensional ideal from
/// `from` to `to` order.
pub fn fglm<F: Field>(
    basis: &[Mpoly<F>],
    nvars: usize,
    from: MonomialOrder,
    to: MonomialOrder,
    budget: &Budget,
) -> Result<Vec<Mpoly<F>>> {
    if is_unit_ideal(basis) {
        return Ok(basis.to_vec());
    }
    let std_monos = standard_monomials(basis, nvars, from, budget.max_quotient_dim)?;
    let dim = std_monos.len();
    let index: HashMap<Exp, usize> = std_monos.iter().cloned().enumerate().map(|(i, e)| (e, i)).collect();
    let divs: Vec<&Mpoly<F>> = basis.iter().collect();

    // nf_of_shift[v][k] = coordinates of NF(x_v · s_k)
    let mut mult: Vec<Vec<Vec<F>>> = vec![Vec::with_capacity(dim); nvars];
    for (v, row) in mult.iter_mut().enumerate() {
        for s in &std_monos {
            let m = s.mul(&Exp::var(nvars, v));
            let mut vec = vec![F::zero(); dim];
            if let Some(&k) = index.get(&m) {
                vec[k] = F::one();
            } else {
                let nf = normal_form(&Mpoly::from_sorted(vec![(m, F::one())]), &divs, from);
                for (e, c) in nf.terms {
                    vec[index[&e]] = c;
                }
            }
            row.push(vec);
        }
    }

    struct Row<F> {
        pivot: usize,
        w: Vec<F>,
        combo: Vec<F>,
    }
    let mut staircase: Vec<(Exp, Vec<F>)> = Vec::new();
    let mut rows: Vec<Row<F>> = Vec::new();
    let mut new_basis: Vec<Mpoly<F>> = Vec::new();
    // candidates carry the vector of their normal form
    let mut candidates: Vec<(Exp, Vec<F>)> = Vec::new();
    let mut one = vec![F::zero(); dim];
    one[index[&Exp::one(nvars)]] = F::one();
    candidates.push((Exp::one(nvars), one));

    while !candidates.is_empty() {
        let best = (0..candidates.len())
            .min_by(|&a, &b| to.cmp(&candidates[a].0, &candidates[b].0))
            .unwrap();
        let (m, v) = candidates.swap_remove(best);
        candidates.retain(|c| c.0 != m);
        if new_basis.iter().any(|g| g.lm().divides(&m)) || staircase.iter().any(|s| s.0 == m) {
            continue;
        }
        let nf_m = v.clone();
        let mut v = v;
        let mut combo = vec![F::zero(); staircase.len()];
        for r in &rows {
            if v[r.pivot].is_zero() {
                continue;
            }
            let lambda = v[r.pivot].clone() / r.w[r.pivot].clone();
            for (x, y) in v.iter_mut().zip(&r.w) {
                if !y.is_zero() {
                    *x = x.clone() - lambda.clone() * y.clone();
                }
            }
            for (x, y) in combo.iter_mut().zip(&r.combo) {
                if !y.is_zero() {
                    *x = x.clone() + lambda.clone() * y.clone();
                }
            }
        }
        match v.iter().position(|x| !x.is_zero()) {
            None => {
                let mut terms = vec![(m.clone(), F::one())];
                for (k, c) in combo.into_iter().enumerate() {
                    if !c.is_zero() {
                        terms.push((staircase[k].0.clone(), -c));
                    }
                }
                let mut p = Mpoly::from_sorted(terms);
                p.resort(to);
                new_basis.push(p);
            }
            Some(pivot) => {
                let mut c: Vec<F> = combo.into_iter().map(|x| -x).collect();
                c.push(F::one());
                for r in &mut rows {
                    r.combo.push(F::zero());
                }
                rows.push(Row { pivot, w: v, combo: c });
                staircase.push((m.clone(), nf_m.clone()));
                for var in 0..nvars {
                    let next = m.mul(&Exp::var(nvars, var));
                    let mut w = vec![F::zero(); dim];
                    for (k, coef) in nf_m.iter().enumerate() {
                        if coef.is_zero() {
                            continue;
                        }
                        for (x, y) in w.iter_mut().zip(&mult[var][k]) {
                            if !y.is_zero() {
                                *x = x.clone() + coef.clone() * y.clone();
                            }
                        }
                    }
                    candidates.push((next, w));
                }
                if staircase.len() > dim {
                    return Err(Error::ResourceCap("FGLM staircase exceeded quotient dimension".into()));
                }
            }
        }
    }
    new_basis.sort_by(|a, b| to.cmp(a.lm(), b.lm()));
    Ok(new_basis)
}

