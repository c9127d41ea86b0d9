//! The canonical additive character χ(x) = exp(2πi·Tr(x)/p), the quadratic
//! character η, Gauss sums, and the two quadratic character-sum identities
//! built on them.
//!
//! Sums of χ over field elements are accumulated as integer counts per trace
//! value and only converted to a complex number at the end, so a direct sum
//! over n terms costs n table lookups and p complex multiplications.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::finite_field::{FieldElement, FieldSpec};

pub type ComplexValue = Complex64;

const TRACE_PRODUCT_TABLE_MAX: u32 = 1024;

pub struct CharacterTable {
    field: FieldSpec,
    roots: Vec<Complex64>,
    eta: Vec<i8>,
    trace_product: Option<Vec<u16>>,
    g1: Complex64,
}

impl CharacterTable {
    pub fn new(field: &FieldSpec) -> Self {
        let p = field.p();
        let roots = (0..p)
            .map(|k| Complex64::from_polar(1.0, 2.0 * PI * k as f64 / p as f64))
            .collect();
        let eta = field
            .elements()
            .map(|a| match (a.is_zero(), field.is_square(a)) {
                (true, _) => 0,
                (false, true) => 1,
                (false, false) => -1,
            })
            .collect();
        let q = field.q();
        let trace_product = (q <= TRACE_PRODUCT_TABLE_MAX).then(|| {
            let mut t = vec![0u16; (q * q) as usize];
            for a in field.elements() {
                for b in field.elements() {
                    t[(a.index() * q + b.index()) as usize] = field.trace(field.mul(a, b)) as u16;
                }
            }
            t
        });
        let mut table = CharacterTable {
            field: field.clone(),
            roots,
            eta,
            trace_product,
            g1: Complex64::new(0.0, 0.0),
        };
        table.g1 = table.gauss_sum(field.one());
        table
    }

    pub fn field(&self) -> &FieldSpec {
        &self.field
    }

    /// exp(2πik/p) for k in 0..p.
    pub fn roots(&self) -> &[Complex64] {
        &self.roots
    }

    #[inline]
    pub fn root(&self, k: u32) -> Complex64 {
        self.roots[(k % self.field.p()) as usize]
    }

    #[inline]
    pub fn chi(&self, a: FieldElement) -> Complex64 {
        self.roots[self.field.trace(a) as usize]
    }

    /// +1 on nonzero squares, -1 on nonsquares, 0 at zero.
    #[inline]
    pub fn eta(&self, a: FieldElement) -> i8 {
        self.eta[a.index() as usize]
    }

    /// Tr(a·b) in 0..p, i.e. the exponent of χ(a·b) as a p-th root of unity.
    #[inline]
    pub fn phase_of_product(&self, a: FieldElement, b: FieldElement) -> u32 {
        match &self.trace_product {
            Some(t) => t[(a.index() * self.field.q() + b.index()) as usize] as u32,
            None => self.field.trace(self.field.mul(a, b)),
        }
    }

    /// Σ_k counts[k]·exp(2πik/p).
    pub fn combine(&self, counts: &[i64]) -> Complex64 {
        counts
            .iter()
            .zip(&self.roots)
            .map(|(&c, &w)| w * c as f64)
            .sum()
    }

    /// G_a(η, χ) = Σ_{s≠0} η(s)χ(as), summed directly.
    pub fn gauss_sum(&self, a: FieldElement) -> Complex64 {
        let mut counts = vec![0i64; self.field.p() as usize];
        for s in self.field.nonzero_elements() {
            counts[self.phase_of_product(a, s) as usize] += self.eta(s) as i64;
        }
        self.combine(&counts)
    }

    /// G_1(η, χ), summed directly once at construction.
    pub fn g1(&self) -> Complex64 {
        self.g1
    }

    /// Σ_{s∈F_q} χ(a s²) by direct summation. Zero `a` is rejected: the sum
    /// is then q and the Gauss-sum identity does not apply.
    pub fn square_sum(&self, a: FieldElement) -> Result<Complex64> {
        if a.is_zero() {
            return Err(Error::Degenerate("square_sum needs a ≠ 0".into()));
        }
        let mut counts = vec![0i64; self.field.p() as usize];
        for s in self.field.elements() {
            counts[self.phase_of_product(a, self.field.square(s)) as usize] += 1;
        }
        Ok(self.combine(&counts))
    }

    /// Σ_{α∈F_q^k} χ(t α·α + β·α), both by direct summation over all q^k
    /// vectors α and by the completed-square closed form
    /// χ(β·β/(−4t)) η(t)^k G_1^k.
    pub fn completed_square_sum(
        &self,
        t: FieldElement,
        beta: &[FieldElement],
    ) -> Result<CompletedSquareSum> {
        if t.is_zero() {
            return Err(Error::Degenerate("completed_square_sum needs t ≠ 0".into()));
        }
        Ok(CompletedSquareSum {
            direct: self.completed_square_direct(t, beta),
            closed: self.completed_square_closed(t, beta)?,
        })
    }

    pub fn completed_square_direct(&self, t: FieldElement, beta: &[FieldElement]) -> Complex64 {
        let f = &self.field;
        let k = beta.len();
        let mut counts = vec![0i64; f.p() as usize];
        let mut alpha = vec![f.zero(); k];
        loop {
            let quad = f.mul(t, f.dot(&alpha, &alpha));
            let lin = f.dot(beta, &alpha);
            counts[f.trace(f.add(quad, lin)) as usize] += 1;
            if !advance(&mut alpha, f.q()) {
                break;
            }
        }
        self.combine(&counts)
    }

    pub fn completed_square_closed(
        &self,
        t: FieldElement,
        beta: &[FieldElement],
    ) -> Result<Complex64> {
        let f = &self.field;
        let minus_four_t = f.neg(f.mul(f.from_int(4), t));
        let arg = f.div(f.dot(beta, beta), minus_four_t)?;
        let k = beta.len() as i32;
        let eta_k = (self.eta(t) as f64).powi(k);
        Ok(self.chi(arg) * eta_k * self.g1().powi(k))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CompletedSquareSum {
    pub direct: Complex64,
    pub closed: Complex64,
}

impl CompletedSquareSum {
    pub fn discrepancy(&self) -> f64 {
        (self.direct - self.closed).norm()
    }
}

/// Closed-form G_1(η, χ) for the canonical character:
/// (−1)^{l−1} √q when p ≡ 1 (mod 4), (−1)^{l−1} i^l √q when p ≡ 3 (mod 4).
pub fn explicit_gauss_value(field: &FieldSpec) -> Complex64 {
    let l = field.l();
    let sign = if (l - 1).is_multiple_of(2) { 1.0 } else { -1.0 };
    let root_q = (field.q() as f64).sqrt();
    let unit = if field.p() % 4 == 1 {
        Complex64::new(1.0, 0.0)
    } else {
        match l % 4 {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        }
    };
    unit * (sign * root_q)
}

/// Odometer over F_q^k in canonical (first coordinate most significant)
/// order. Returns false after the last vector.
pub(crate) fn advance(v: &mut [FieldElement], q: u32) -> bool {
    for slot in v.iter_mut().rev() {
        let next = slot.index() + 1;
        if next < q {
            *slot = FieldElement::from_index_unchecked(next);
            return true;
        }
        *slot = FieldElement::from_index_unchecked(0);
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::finite_field::make_field;

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() < tol
    }

    #[test]
    fn chi_basics() {
        let f3 = make_field(3, 1).unwrap();
        let t = CharacterTable::new(&f3);
        assert!(close(t.chi(f3.zero()), Complex64::new(1.0, 0.0), 1e-15));
        let omega = Complex64::from_polar(1.0, 2.0 * PI / 3.0);
        assert!(close(t.chi(f3.one()), omega, 1e-15));
    }

    #[test]
    fn chi_is_additive_and_nontrivial() {
        for (p, l) in [(3, 1), (3, 2), (5, 1), (3, 3), (5, 2)] {
            let f = make_field(p, l).unwrap();
            let t = CharacterTable::new(&f);
            let total: Complex64 = f.elements().map(|a| t.chi(a)).sum();
            assert!(total.norm() < 1e-10, "{p}^{l}");
            for a in f.elements() {
                assert!((t.chi(a).norm() - 1.0).abs() < 1e-12);
                for b in f.elements() {
                    assert!(close(t.chi(f.add(a, b)), t.chi(a) * t.chi(b), 1e-12));
                }
            }
        }
    }

    #[test]
    fn eta_examples_and_multiplicativity() {
        let f5 = make_field(5, 1).unwrap();
        assert_eq!(CharacterTable::new(&f5).eta(f5.from_int(4)), 1);
        let f3 = make_field(3, 1).unwrap();
        let t3 = CharacterTable::new(&f3);
        assert_eq!(t3.eta(f3.from_int(2)), -1);
        assert_eq!(t3.eta(f3.zero()), 0);
        for (p, l) in [(3, 2), (7, 1), (3, 3), (5, 2)] {
            let f = make_field(p, l).unwrap();
            let t = CharacterTable::new(&f);
            let plus = f.nonzero_elements().filter(|&a| t.eta(a) == 1).count();
            assert_eq!(plus as u32, (f.q() - 1) / 2);
            for a in f.nonzero_elements() {
                for b in f.nonzero_elements() {
                    assert_eq!(t.eta(f.mul(a, b)), t.eta(a) * t.eta(b));
                }
            }
        }
    }

    #[test]
    fn gauss_sum_small_values() {
        let f3 = make_field(3, 1).unwrap();
        let t3 = CharacterTable::new(&f3);
        assert!(close(t3.gauss_sum(f3.zero()), Complex64::new(0.0, 0.0), 1e-12));
        assert!(close(t3.g1(), Complex64::new(0.0, 3f64.sqrt()), 1e-12));
        let f5 = make_field(5, 1).unwrap();
        assert!(close(
            CharacterTable::new(&f5).g1(),
            Complex64::new(5f64.sqrt(), 0.0),
            1e-12
        ));
    }

    #[test]
    fn explicit_values_by_substitution() {
        let v9 = explicit_gauss_value(&make_field(3, 2).unwrap());
        assert!(close(v9, Complex64::new(3.0, 0.0), 1e-12));
        let v7 = explicit_gauss_value(&make_field(7, 1).unwrap());
        assert!(close(v7, Complex64::new(0.0, 7f64.sqrt()), 1e-12));
        let v13 = explicit_gauss_value(&make_field(13, 1).unwrap());
        assert!(close(v13, Complex64::new(13f64.sqrt(), 0.0), 1e-12));
    }

    #[test]
    fn gauss_sum_modulus_and_twist() {
        for (p, l) in [(3, 2), (7, 1), (5, 2), (3, 3), (7, 2)] {
            let f = make_field(p, l).unwrap();
            let t = CharacterTable::new(&f);
            let g1 = t.g1();
            for a in f.nonzero_elements() {
                let ga = t.gauss_sum(a);
                assert!((ga.norm() - (f.q() as f64).sqrt()).abs() < 1e-9);
                assert!(close(ga, g1 * t.eta(a) as f64, 1e-9));
            }
        }
    }

    #[test]
    fn square_sum_f3_by_hand() {
        let f3 = make_field(3, 1).unwrap();
        let t = CharacterTable::new(&f3);
        let omega = Complex64::from_polar(1.0, 2.0 * PI / 3.0);
        let by_hand = Complex64::new(1.0, 0.0) + omega * 2.0;
        assert!(close(by_hand, Complex64::new(0.0, 3f64.sqrt()), 1e-12));
        assert!(close(t.square_sum(f3.one()).unwrap(), by_hand, 1e-12));
        assert!(matches!(t.square_sum(f3.zero()), Err(Error::Degenerate(_))));
    }

    #[test]
    fn completed_square_examples() {
        let f3 = make_field(3, 1).unwrap();
        let t3 = CharacterTable::new(&f3);
        let s = t3.completed_square_sum(f3.one(), &[f3.zero()]).unwrap();
        assert!(close(s.direct, t3.square_sum(f3.one()).unwrap(), 1e-12));
        assert!(s.discrepancy() < 1e-12);

        let s2 = t3
            .completed_square_sum(f3.one(), &[f3.one(), f3.zero()])
            .unwrap();
        // 9-term oracle written out independently of the odometer.
        let mut oracle = Complex64::new(0.0, 0.0);
        for a0 in 0..3i64 {
            for a1 in 0..3i64 {
                let v = (a0 * a0 + a1 * a1 + a0).rem_euclid(3);
                oracle += Complex64::from_polar(1.0, 2.0 * PI * v as f64 / 3.0);
            }
        }
        assert!(close(s2.direct, oracle, 1e-12));
        assert!(s2.discrepancy() < 1e-9);

        assert!(matches!(
            t3.completed_square_sum(f3.zero(), &[f3.one()]),
            Err(Error::Degenerate(_))
        ));
    }
}
