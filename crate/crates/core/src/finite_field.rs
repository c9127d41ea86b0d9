//! Exact arithmetic in F_q for q = p^l, p an odd prime.
//!
//! An element with coefficient vector (c_0, ..., c_{l-1}) in the polynomial
//! basis 1, x, ..., x^{l-1} is stored as its index
//! c_0 + c_1 p + ... + c_{l-1} p^{l-1}. Increasing index is lexicographic
//! order on (c_{l-1}, ..., c_0); this is the canonical enumeration every
//! downstream table and bit-set position refers to. The prime subfield
//! occupies indices 0..p.
//!
//! Multiplication goes through discrete log tables built from a primitive
//! element found at construction time.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest field order accepted by [`FieldSpec::new`].
pub const MAX_ORDER: u64 = 1 << 16;

// q*q u16 addition table below this order.
const ADD_TABLE_MAX: u32 = 1024;

#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct FieldElement(u32);

impl FieldElement {
    #[inline]
    pub fn index(self) -> u32 {
        self.0
    }

    #[inline]
    pub fn is_zero(self) -> bool {
        self.0 == 0
    }

    #[inline]
    pub(crate) fn from_index_unchecked(index: u32) -> Self {
        FieldElement(index)
    }
}

impl fmt::Display for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

struct Tables {
    p: u32,
    l: u32,
    q: u32,
    modulus: Vec<u32>,
    // exp has length 2(q-1) so that log a + log b never needs a reduction.
    exp: Vec<u32>,
    log: Vec<u32>,
    trace: Vec<u32>,
    neg: Vec<u32>,
    add: Option<Vec<u16>>,
    generator: u32,
}

/// A finite field of odd characteristic. Cloning is cheap (shared tables).
#[derive(Clone)]
pub struct FieldSpec {
    inner: Arc<Tables>,
}

impl fmt::Debug for FieldSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FieldSpec")
            .field("p", &self.inner.p)
            .field("l", &self.inner.l)
            .field("modulus", &self.inner.modulus)
            .finish()
    }
}

impl PartialEq for FieldSpec {
    fn eq(&self, other: &Self) -> bool {
        self.inner.p == other.inner.p && self.inner.modulus == other.inner.modulus
    }
}

impl Eq for FieldSpec {}

/// Builds F_{p^l} with the lexicographically smallest monic irreducible modulus.
pub fn make_field(p: u64, l: i64) -> Result<FieldSpec> {
    FieldSpec::new(p, l)
}

impl FieldSpec {
    pub fn new(p: u64, l: i64) -> Result<Self> {
        if p == 2 || !is_prime(p) {
            return Err(Error::BadCharacteristic(p));
        }
        if l < 1 {
            return Err(Error::BadDegree(l));
        }
        let l = l as u32;
        let order = (p as u128).checked_pow(l).unwrap_or(u128::MAX);
        if order > MAX_ORDER as u128 {
            return Err(Error::FieldTooLarge {
                order: order.min(u64::MAX as u128) as u64,
                limit: MAX_ORDER,
            });
        }
        let p = p as u32;
        let q = order as u32;
        let modulus = smallest_irreducible(p, l);
        Ok(Self::with_modulus(p, l, q, modulus))
    }

    /// Parses `"p^l"` (e.g. `"3^2"`) or a bare prime power (e.g. `"9"`).
    pub fn parse(text: &str) -> Result<Self> {
        let t = text.trim();
        let bad = || Error::FieldParse(text.to_string());
        if let Some((base, exp)) = t.split_once('^') {
            let p: u64 = base.trim().parse().map_err(|_| bad())?;
            let l: i64 = exp.trim().parse().map_err(|_| bad())?;
            return Self::new(p, l);
        }
        let q: u64 = t.parse().map_err(|_| bad())?;
        match prime_power_decomposition(q) {
            Some((p, l)) => Self::new(p, l as i64),
            None => Err(bad()),
        }
    }

    fn with_modulus(p: u32, l: u32, q: u32, modulus: Vec<u32>) -> Self {
        let n = (q - 1) as usize;
        let generator = find_generator(p, l, q, &modulus);
        let g_coeffs = index_to_coeffs(generator, p, l);
        let mut exp = vec![0u32; 2 * n];
        let mut log = vec![0u32; q as usize];
        let mut cur = vec![0u32; l as usize];
        cur[0] = 1;
        for k in 0..n {
            let idx = coeffs_to_index(&cur, p);
            exp[k] = idx;
            exp[k + n] = idx;
            log[idx as usize] = k as u32;
            cur = poly::mul_mod(&cur, &g_coeffs, &modulus, p);
            cur.resize(l as usize, 0);
        }
        let neg = (0..q)
            .map(|a| {
                let c: Vec<u32> = index_to_coeffs(a, p, l)
                    .into_iter()
                    .map(|c| (p - c) % p)
                    .collect();
                coeffs_to_index(&c, p)
            })
            .collect();
        let mut tables = Tables {
            p,
            l,
            q,
            modulus,
            exp,
            log,
            trace: Vec::new(),
            neg,
            add: None,
            generator,
        };
        if q <= ADD_TABLE_MAX {
            let mut add = vec![0u16; (q * q) as usize];
            for a in 0..q {
                for b in 0..q {
                    add[(a * q + b) as usize] = add_digits(a, b, p, l) as u16;
                }
            }
            tables.add = Some(add);
        }
        let mut spec = FieldSpec {
            inner: Arc::new(tables),
        };
        let trace: Vec<u32> = (0..q).map(|a| spec.trace_slow(FieldElement(a))).collect();
        Arc::get_mut(&mut spec.inner)
            .expect("tables are not shared during construction")
            .trace = trace;
        spec
    }

    #[inline]
    pub fn p(&self) -> u32 {
        self.inner.p
    }

    #[inline]
    pub fn l(&self) -> u32 {
        self.inner.l
    }

    #[inline]
    pub fn q(&self) -> u32 {
        self.inner.q
    }

    /// Modulus coefficients in ascending degree order; the last entry is 1.
    pub fn modulus(&self) -> &[u32] {
        &self.inner.modulus
    }

    /// `"p^l"`
    pub fn label(&self) -> String {
        format!("{}^{}", self.p(), self.l())
    }

    /// The primitive element behind the log tables.
    pub fn generator(&self) -> FieldElement {
        FieldElement(self.inner.generator)
    }

    #[inline]
    pub fn zero(&self) -> FieldElement {
        FieldElement(0)
    }

    #[inline]
    pub fn one(&self) -> FieldElement {
        FieldElement(1)
    }

    pub fn element(&self, index: u32) -> Option<FieldElement> {
        (index < self.q()).then_some(FieldElement(index))
    }

    /// All q elements in canonical order.
    pub fn elements(&self) -> impl Iterator<Item = FieldElement> + '_ {
        (0..self.q()).map(FieldElement)
    }

    pub fn nonzero_elements(&self) -> impl Iterator<Item = FieldElement> + '_ {
        (1..self.q()).map(FieldElement)
    }

    /// Image of an integer in the prime subfield.
    pub fn from_int(&self, n: i64) -> FieldElement {
        FieldElement(n.rem_euclid(self.p() as i64) as u32)
    }

    /// Coefficients in ascending degree order, length l.
    pub fn coefficients(&self, a: FieldElement) -> Vec<u32> {
        index_to_coeffs(a.0, self.p(), self.l())
    }

    pub fn from_coefficients(&self, coeffs: &[u32]) -> Result<FieldElement> {
        if coeffs.len() != self.l() as usize {
            return Err(Error::LengthMismatch {
                expected: self.l() as usize,
                got: coeffs.len(),
            });
        }
        if coeffs.iter().any(|&c| c >= self.p()) {
            return Err(Error::Malformed("coefficient not reduced mod p".into()));
        }
        Ok(FieldElement(coeffs_to_index(coeffs, self.p())))
    }

    #[inline]
    pub fn add(&self, a: FieldElement, b: FieldElement) -> FieldElement {
        let t = &*self.inner;
        match &t.add {
            Some(table) => FieldElement(table[(a.0 * t.q + b.0) as usize] as u32),
            None => FieldElement(add_digits(a.0, b.0, t.p, t.l)),
        }
    }

    #[inline]
    pub fn neg(&self, a: FieldElement) -> FieldElement {
        FieldElement(self.inner.neg[a.0 as usize])
    }

    #[inline]
    pub fn sub(&self, a: FieldElement, b: FieldElement) -> FieldElement {
        self.add(a, self.neg(b))
    }

    #[inline]
    pub fn mul(&self, a: FieldElement, b: FieldElement) -> FieldElement {
        if a.0 == 0 || b.0 == 0 {
            return FieldElement(0);
        }
        let t = &*self.inner;
        FieldElement(t.exp[(t.log[a.0 as usize] + t.log[b.0 as usize]) as usize])
    }

    #[inline]
    pub fn square(&self, a: FieldElement) -> FieldElement {
        self.mul(a, a)
    }

    pub fn inv(&self, a: FieldElement) -> Result<FieldElement> {
        if a.0 == 0 {
            return Err(Error::DivisionByZero);
        }
        let t = &*self.inner;
        let n = t.q - 1;
        Ok(FieldElement(t.exp[((n - t.log[a.0 as usize]) % n) as usize]))
    }

    pub fn div(&self, a: FieldElement, b: FieldElement) -> Result<FieldElement> {
        Ok(self.mul(a, self.inv(b)?))
    }

    pub fn pow(&self, a: FieldElement, e: u64) -> FieldElement {
        if e == 0 {
            return self.one();
        }
        if a.0 == 0 {
            return self.zero();
        }
        let t = &*self.inner;
        let n = (t.q - 1) as u64;
        let k = (t.log[a.0 as usize] as u64 * (e % n)) % n;
        FieldElement(t.exp[k as usize])
    }

    /// Absolute trace to the prime field, returned as a residue in 0..p.
    #[inline]
    pub fn trace(&self, a: FieldElement) -> u32 {
        self.inner.trace[a.0 as usize]
    }

    fn trace_slow(&self, a: FieldElement) -> u32 {
        let mut acc = self.zero();
        let mut power = a;
        for _ in 0..self.l() {
            acc = self.add(acc, power);
            power = self.pow(power, self.p() as u64);
        }
        debug_assert!(acc.0 < self.p(), "trace left the prime subfield");
        acc.0
    }

    /// True for nonzero squares.
    #[inline]
    pub fn is_square(&self, a: FieldElement) -> bool {
        a.0 != 0 && self.inner.log[a.0 as usize].is_multiple_of(2)
    }

    /// First square root of -1 in canonical order, if -1 is a square.
    pub fn sqrt_of_minus_one(&self) -> Option<FieldElement> {
        let minus_one = self.neg(self.one());
        self.elements().find(|&a| self.square(a) == minus_one)
    }

    pub fn multiplicative_order(&self, a: FieldElement) -> Option<u64> {
        if a.0 == 0 {
            return None;
        }
        let n = (self.q() - 1) as u64;
        let k = self.inner.log[a.0 as usize] as u64;
        Some(n / gcd(n, k))
    }

    #[inline]
    pub fn dot(&self, a: &[FieldElement], b: &[FieldElement]) -> FieldElement {
        debug_assert_eq!(a.len(), b.len());
        a.iter()
            .zip(b)
            .fold(self.zero(), |acc, (&x, &y)| self.add(acc, self.mul(x, y)))
    }
}

fn index_to_coeffs(mut idx: u32, p: u32, l: u32) -> Vec<u32> {
    let mut out = Vec::with_capacity(l as usize);
    for _ in 0..l {
        out.push(idx % p);
        idx /= p;
    }
    out
}

fn coeffs_to_index(coeffs: &[u32], p: u32) -> u32 {
    coeffs.iter().rev().fold(0, |acc, &c| acc * p + c)
}

#[inline]
fn add_digits(mut a: u32, mut b: u32, p: u32, l: u32) -> u32 {
    if l == 1 {
        let s = a + b;
        return if s >= p { s - p } else { s };
    }
    let mut out = 0;
    let mut place = 1;
    for _ in 0..l {
        let mut s = a % p + b % p;
        if s >= p {
            s -= p;
        }
        out += s * place;
        place *= p;
        a /= p;
        b /= p;
    }
    out
}

fn smallest_irreducible(p: u32, l: u32) -> Vec<u32> {
    let lower_count = (p as u64).pow(l);
    for k in 0..lower_count {
        let mut f = index_to_coeffs(k as u32, p, l);
        f.push(1);
        if poly::is_irreducible(&f, p) {
            return f;
        }
    }
    unreachable!("an irreducible polynomial exists in every degree")
}

fn find_generator(p: u32, l: u32, q: u32, modulus: &[u32]) -> u32 {
    let n = (q - 1) as u64;
    let factors = prime_factors(n);
    let mut one = vec![0u32; l as usize];
    one[0] = 1;
    for cand in 1..q {
        let c = index_to_coeffs(cand, p, l);
        let primitive = factors.iter().all(|&r| {
            let mut v = poly::pow_mod(&c, n / r, modulus, p);
            v.resize(l as usize, 0);
            v != one
        });
        if primitive {
            return cand;
        }
    }
    unreachable!("the multiplicative group of a finite field is cyclic")
}

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

pub fn prime_factors(mut n: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut d = 2;
    while d * d <= n {
        if n.is_multiple_of(d) {
            out.push(d);
            while n.is_multiple_of(d) {
                n /= d;
            }
        }
        d += 1;
    }
    if n > 1 {
        out.push(n);
    }
    out
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// `Some((p, l))` when q = p^l with p prime.
pub fn prime_power_decomposition(q: u64) -> Option<(u64, u32)> {
    let factors = prime_factors(q);
    if factors.len() != 1 {
        return None;
    }
    let p = factors[0];
    let mut l = 0;
    let mut n = q;
    while n > 1 {
        n /= p;
        l += 1;
    }
    Some((p, l))
}

/// Odd prime powers 3 ≤ q ≤ limit, ascending.
pub fn odd_prime_powers_up_to(limit: u64) -> Vec<u64> {
    (3..=limit)
        .filter(|&q| matches!(prime_power_decomposition(q), Some((p, _)) if p != 2))
        .collect()
}

/// Dense polynomials over Z/p, ascending coefficients. Only used while
/// building field tables.
mod poly {
    fn trim(v: &mut Vec<u32>) {
        while v.last() == Some(&0) {
            v.pop();
        }
    }

    fn inv_mod(a: u32, p: u32) -> u32 {
        let mut result = 1u64;
        let mut base = a as u64 % p as u64;
        let mut e = p - 2;
        while e > 0 {
            if e & 1 == 1 {
                result = result * base % p as u64;
            }
            base = base * base % p as u64;
            e >>= 1;
        }
        result as u32
    }

    /// Remainder of `a` modulo `f` (f need not be monic).
    fn rem(a: &[u32], f: &[u32], p: u32) -> Vec<u32> {
        let mut r = a.to_vec();
        trim(&mut r);
        let mut f = f.to_vec();
        trim(&mut f);
        let df = f.len() - 1;
        let lead_inv = inv_mod(f[df], p) as u64;
        while r.len() > df {
            let top = r.len() - 1;
            let factor = r[top] as u64 * lead_inv % p as u64;
            let shift = top - df;
            for (i, &c) in f.iter().enumerate() {
                let sub = factor * c as u64 % p as u64;
                r[shift + i] = ((r[shift + i] as u64 + p as u64 - sub) % p as u64) as u32;
            }
            trim(&mut r);
        }
        r
    }

    pub fn mul_mod(a: &[u32], b: &[u32], f: &[u32], p: u32) -> Vec<u32> {
        if a.is_empty() || b.is_empty() {
            return Vec::new();
        }
        let mut prod = vec![0u64; a.len() + b.len() - 1];
        for (i, &x) in a.iter().enumerate() {
            if x == 0 {
                continue;
            }
            for (j, &y) in b.iter().enumerate() {
                prod[i + j] = (prod[i + j] + x as u64 * y as u64) % p as u64;
            }
        }
        let prod: Vec<u32> = prod.into_iter().map(|c| c as u32).collect();
        rem(&prod, f, p)
    }

    pub fn pow_mod(base: &[u32], mut e: u64, f: &[u32], p: u32) -> Vec<u32> {
        let mut result = vec![1u32];
        let mut b = rem(base, f, p);
        while e > 0 {
            if e & 1 == 1 {
                result = mul_mod(&result, &b, f, p);
            }
            b = mul_mod(&b, &b, f, p);
            e >>= 1;
        }
        result
    }

    fn gcd(a: &[u32], b: &[u32], p: u32) -> Vec<u32> {
        let mut a = a.to_vec();
        let mut b = b.to_vec();
        trim(&mut a);
        trim(&mut b);
        while !b.is_empty() {
            let r = rem(&a, &b, p);
            a = b;
            b = r;
        }
        a
    }

    /// gcd(x^{p^k} - x, f) = 1 for every 1 ≤ k ≤ deg(f)/2.
    pub fn is_irreducible(f: &[u32], p: u32) -> bool {
        let deg = f.len() - 1;
        if deg == 0 {
            return false;
        }
        let x = vec![0u32, 1];
        let mut h = rem(&x, f, p);
        for _ in 1..=deg / 2 {
            h = pow_mod(&h, p as u64, f, p);
            let mut diff = h.clone();
            diff.resize(diff.len().max(2), 0);
            diff[1] = (diff[1] + p - 1) % p;
            if gcd(f, &diff, p).len() > 1 {
                return false;
            }
        }
        true
    }

    #[cfg(test)]
    mod tests {
        use super::*;

        #[test]
        fn quadratics_over_f3_match_root_scan() {
            // A monic quadratic is irreducible iff it has no root in F_3.
            for a in 0..3u32 {
                for b in 0..3u32 {
                    let f = vec![b, a, 1];
                    let has_root = (0..3u32).any(|x| (x * x + a * x + b) % 3 == 0);
                    assert_eq!(is_irreducible(&f, 3), !has_root, "x^2+{a}x+{b}");
                }
            }
        }

        #[test]
        fn product_of_quadratics_is_reducible() {
            // (x^2+1)(x^2+x+2) over F_3
            let f = mul_mod(&[1, 0, 1], &[2, 1, 1], &[0, 0, 0, 0, 0, 1], 3);
            assert_eq!(f.len(), 5);
            assert!(!is_irreducible(&f, 3));
        }
    }
}
