//! Multi-modular lifting of Gröbner bases over Q and Q(i).
//!
//! The basis is computed over several word-sized prime fields, combined by
//! the Chinese remainder theorem, and mapped back to rationals by rational
//! reconstruction. Gaussian coefficients use primes `p ≡ 1 (mod 4)`: the
//! two square roots of −1 give two images whose sum and difference separate
//! real and imaginary parts.

use std::cell::Cell;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_complex::Complex;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fockpoly::{GaussianRational, Monomial, Poly, SymbolicPoly};

thread_local! {
    static MODULUS: Cell<u64> = const { Cell::new(0) };
}

/// Element of the prime field selected by [`with_modulus`] on this thread.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct Zp(u64);

fn modulus() -> u64 {
    MODULUS.with(|m| m.get())
}

fn mul_mod(a: u64, b: u64, p: u64) -> u64 {
    ((a as u128 * b as u128) % p as u128) as u64
}

fn pow_mod(mut a: u64, mut e: u64, p: u64) -> u64 {
    let mut r = 1 % p;
    while e > 0 {
        if e & 1 == 1 {
            r = mul_mod(r, a, p);
        }
        a = mul_mod(a, a, p);
        e >>= 1;
    }
    r
}

impl Zp {
    pub fn new(v: u64) -> Self {
        Zp(v % modulus())
    }

    pub fn value(self) -> u64 {
        self.0
    }

    pub fn inv(self) -> Self {
        let p = modulus();
        assert!(self.0 != 0, "division by zero in Z/{p}");
        Zp(pow_mod(self.0, p - 2, p))
    }
}

impl Add for Zp {
    type Output = Zp;
    fn add(self, o: Zp) -> Zp {
        let p = modulus();
        let s = self.0 + o.0;
        Zp(if s >= p { s - p } else { s })
    }
}

impl Sub for Zp {
    type Output = Zp;
    fn sub(self, o: Zp) -> Zp {
        let p = modulus();
        Zp(if self.0 >= o.0 { self.0 - o.0 } else { self.0 + p - o.0 })
    }
}

impl Mul for Zp {
    type Output = Zp;
    fn mul(self, o: Zp) -> Zp {
        Zp(mul_mod(self.0, o.0, modulus()))
    }
}

impl Div for Zp {
    type Output = Zp;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, o: Zp) -> Zp {
        self * o.inv()
    }
}

impl Neg for Zp {
    type Output = Zp;
    fn neg(self) -> Zp {
        if self.0 == 0 {
            self
        } else {
            Zp(modulus() - self.0)
        }
    }
}

impl Zero for Zp {
    fn zero() -> Zp {
        Zp(0)
    }
    fn is_zero(&self) -> bool {
        self.0 == 0
    }
}

impl One for Zp {
    fn one() -> Zp {
        Zp(1 % modulus())
    }
}

/// Runs `f` with arithmetic in `Z/p` on the current thread.
pub fn with_modulus<R>(p: u64, f: impl FnOnce() -> R) -> R {
    let old = MODULUS.with(|m| m.replace(p));
    let r = f();
    MODULUS.with(|m| m.set(old));
    r
}

fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for q in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n.is_multiple_of(q) {
            return n == q;
        }
    }
    let s = (n - 1).trailing_zeros();
    let d = (n - 1) >> s;
    'witness: for a in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Primes `p ≡ 1 (mod 4)` below 2^62, descending.
pub fn primes() -> impl Iterator<Item = u64> {
    let start = (1u64 << 62) - 3; // ≡ 1 mod 4
    (0u64..).map(move |k| start - 4 * k).filter(|&n| is_prime(n))
}

/// A square root of −1 modulo `p ≡ 1 (mod 4)`.
fn sqrt_minus_one(p: u64) -> u64 {
    for c in 2..p {
        let r = pow_mod(c, (p - 1) / 4, p);
        if mul_mod(r, r, p) == p - 1 {
            return r;
        }
    }
    unreachable!("p ≡ 1 mod 4 has a square root of -1")
}

fn big_mod(x: &BigInt, p: u64) -> u64 {
    let r = x.mod_floor(&BigInt::from(p));
    r.to_u64().expect("reduced residue")
}

fn rational_mod(x: &BigRational, p: u64) -> Option<u64> {
    let d = big_mod(x.denom(), p);
    if d == 0 {
        return None;
    }
    Some(mul_mod(big_mod(x.numer(), p), pow_mod(d, p - 2, p), p))
}

/// Image of a Gaussian rational with `i ↦ root`.
fn gaussian_mod(z: &GaussianRational, p: u64, root: u64) -> Option<u64> {
    let a = rational_mod(&z.re, p)?;
    let b = rational_mod(&z.im, p)?;
    Some((a as u128 + mul_mod(b, root, p) as u128).rem_euclid(p as u128) as u64)
}

fn image(gens: &[SymbolicPoly], p: u64, root: u64) -> Option<Vec<Poly<Zp>>> {
    let mut out = Vec::with_capacity(gens.len());
    for g in gens {
        let mut terms = Vec::with_capacity(g.len());
        for (m, c) in g.terms() {
            terms.push((m.clone(), Zp(gaussian_mod(c, p, root)?)));
        }
        out.push(Poly::from_terms(g.nvars(), terms).expect("same ring"));
    }
    Some(out)
}

/// Basis in a prime field as supports with residues.
type ModBasis = Vec<Vec<(Monomial, u64)>>;

fn shape(b: &ModBasis) -> Vec<Vec<&Monomial>> {
    b.iter().map(|p| p.iter().map(|(m, _)| m).collect()).collect()
}

/// Residues of the reduced basis modulo `p`, or `None` for a prime that
/// divides an input denominator.
fn basis_mod_p<B>(gens: &[SymbolicPoly], p: u64, root: u64, solve: &B) -> Option<Result<ModBasis>>
where
    B: Fn(&[Poly<Zp>]) -> Result<Vec<Poly<Zp>>> + Sync,
{
    let img = image(gens, p, root)?;
    Some(with_modulus(p, || {
        solve(&img).map(|basis| {
            basis
                .into_iter()
                .map(|q| q.terms().map(|(m, c)| (m.clone(), c.0)).collect())
                .collect()
        })
    }))
}

/// Smallest `a/b ≡ u (mod m)` with `|a|, b ≤ √(m/2)`.
pub fn rational_reconstruction(u: &BigInt, m: &BigInt) -> Option<BigRational> {
    let bound = (m / BigInt::from(2)).sqrt();
    let (mut r0, mut r1) = (m.clone(), u.mod_floor(m));
    let (mut t0, mut t1) = (BigInt::zero(), BigInt::one());
    while r1 > bound {
        let q = &r0 / &r1;
        let r2 = &r0 - &q * &r1;
        let t2 = &t0 - &q * &t1;
        (r0, r1, t0, t1) = (r1, r2, t1, t2);
    }
    if t1.is_zero() || t1.abs() > bound {
        return None;
    }
    let g = r1.gcd(&t1);
    if !g.is_one() {
        return None;
    }
    Some(BigRational::new(r1, t1))
}

/// Running CRT images of every coefficient.
struct Lift {
    shape: Vec<Vec<Monomial>>,
    modulus: BigInt,
    re: Vec<Vec<BigInt>>,
    im: Vec<Vec<BigInt>>,
    primes: usize,
}

impl Lift {
    fn new(shape: Vec<Vec<Monomial>>) -> Self {
        let zeros: Vec<Vec<BigInt>> = shape.iter().map(|p| vec![BigInt::zero(); p.len()]).collect();
        Lift { shape, modulus: BigInt::one(), re: zeros.clone(), im: zeros, primes: 0 }
    }

    fn absorb(&mut self, p: u64, re: &[Vec<u64>], im: &[Vec<u64>]) {
        let pb = BigInt::from(p);
        // x ≡ old (mod M), x ≡ r (mod p): x = old + M·((r − old)·M⁻¹ mod p)
        let m_inv = pow_mod(big_mod(&self.modulus, p), p - 2, p);
        let step = |old: &mut BigInt, r: u64| {
            let diff = (r as u128 + p as u128 - big_mod(old, p) as u128) as u64 % p;
            let k = mul_mod(diff, m_inv, p);
            *old += &self.modulus * BigInt::from(k);
        };
        for (olds, rs) in self.re.iter_mut().zip(re) {
            for (o, &r) in olds.iter_mut().zip(rs) {
                step(o, r);
            }
        }
        for (olds, rs) in self.im.iter_mut().zip(im) {
            for (o, &r) in olds.iter_mut().zip(rs) {
                step(o, r);
            }
        }
        self.modulus *= pb;
        self.primes += 1;
    }

    fn reconstruct(&self, nvars: usize) -> Option<Vec<SymbolicPoly>> {
        let mut out = Vec::with_capacity(self.shape.len());
        for ((mons, re), im) in self.shape.iter().zip(&self.re).zip(&self.im) {
            let mut terms = Vec::with_capacity(mons.len());
            for ((m, a), b) in mons.iter().zip(re).zip(im) {
                let a = rational_reconstruction(a, &self.modulus)?;
                let b = rational_reconstruction(b, &self.modulus)?;
                terms.push((m.clone(), Complex::new(a, b)));
            }
            out.push(Poly::from_terms(nvars, terms).ok()?);
        }
        Some(out)
    }
}

fn half(x: u64, p: u64) -> u64 {
    mul_mod(x, p.div_ceil(2), p)
}

/// Lifts a basis computed by `solve` in prime fields to Q(i).
///
/// The lift is accepted once rational reconstruction returns the same basis
/// for two consecutive prime counts and `accept` agrees; `accept` is the
/// exact check (for instance, that the inputs reduce to zero).
pub fn lift_basis<B, A>(
    gens: &[SymbolicPoly],
    nvars: usize,
    gaussian: bool,
    max_primes: usize,
    solve: B,
    accept: A,
) -> Result<Vec<SymbolicPoly>>
where
    B: Fn(&[Poly<Zp>]) -> Result<Vec<Poly<Zp>>> + Sync,
    A: Fn(&[SymbolicPoly]) -> bool,
{
    let threads = rayon::current_num_threads().clamp(1, 8);
    let mut primes = primes();
    let mut lift: Option<Lift> = None;
    let mut last: Option<Vec<SymbolicPoly>> = None;
    let mut tried = 0usize;
    let mut rejected = 0usize;

    while tried < max_primes {
        let batch: Vec<u64> = primes.by_ref().take(threads).collect();
        tried += batch.len();
        let images: Vec<Option<Result<(ModBasis, Option<ModBasis>)>>> = batch
            .par_iter()
            .map(|&p| {
                let root = if gaussian { sqrt_minus_one(p) } else { 0 };
                let first = basis_mod_p(gens, p, root, &solve)?;
                Some(first.and_then(|b1| {
                    if gaussian {
                        match basis_mod_p(gens, p, p - root, &solve) {
                            Some(r) => r.map(|b2| (b1, Some(b2))),
                            None => unreachable!("same denominators"),
                        }
                    } else {
                        Ok((b1, None))
                    }
                }))
            })
            .collect();
        for (p, img) in batch.into_iter().zip(images) {
            let Some(img) = img else { continue };
            let (b1, b2) = img?;
            if let Some(b2) = &b2 {
                if shape(&b1) != shape(b2) {
                    rejected += 1;
                    continue;
                }
            }
            let sh: Vec<Vec<Monomial>> = b1.iter().map(|q| q.iter().map(|(m, _)| m.clone()).collect()).collect();
            let (re, im): (Vec<Vec<u64>>, Vec<Vec<u64>>) = match &b2 {
                None => (
                    b1.iter().map(|q| q.iter().map(|(_, c)| *c).collect()).collect(),
                    b1.iter().map(|q| vec![0; q.len()]).collect(),
                ),
                Some(b2) => {
                    let root = sqrt_minus_one(p);
                    let inv2r = pow_mod(mul_mod(2, root, p), p - 2, p);
                    b1.iter()
                        .zip(b2)
                        .map(|(q1, q2)| {
                            q1.iter()
                                .zip(q2)
                                .map(|((_, v1), (_, v2))| {
                                    let s = (*v1 as u128 + *v2 as u128) % p as u128;
                                    let d = (*v1 as u128 + p as u128 - *v2 as u128) % p as u128;
                                    (half(s as u64, p), mul_mod(d as u64, inv2r, p))
                                })
                                .unzip()
                        })
                        .unzip()
                }
            };
            match &mut lift {
                Some(l) if l.shape == sh => l.absorb(p, &re, &im),
                Some(l) => {
                    // disagreeing shapes: keep the better supported one
                    rejected += 1;
                    if rejected > l.primes {
                        let mut fresh = Lift::new(sh);
                        fresh.absorb(p, &re, &im);
                        *l = fresh;
                        last = None;
                        rejected = 0;
                    }
                }
                None => {
                    let mut l = Lift::new(sh);
                    l.absorb(p, &re, &im);
                    lift = Some(l);
                }
            }
        }
        let Some(l) = &lift else { continue };
        let candidate = l.reconstruct(nvars);
        if let (Some(c), Some(prev)) = (&candidate, &last) {
            if c == prev && accept(c) {
                return Ok(c.clone());
            }
        }
        last = candidate;
    }
    Err(Error::ResourceCap(format!("coefficient lifting did not stabilize within {max_primes} primes")))
}

/// Bit size of the largest numerator or denominator, for diagnostics.
pub fn coefficient_bits(polys: &[SymbolicPoly]) -> u64 {
    let bits = |r: &BigRational| r.numer().bits().max(r.denom().bits());
    polys
        .iter()
        .flat_map(|p| p.terms().map(|(_, c)| bits(&c.re).max(bits(&c.im))).collect::<Vec<_>>())
        .max()
        .unwrap_or(0)
}
