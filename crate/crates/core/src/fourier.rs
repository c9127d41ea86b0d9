//! Fourier transforms and normalized norms on F_q^d and on the paraboloid.
//!
//! Conventions:
//! * space side (F_q^d, dx), dx = q^{-d}·counting:
//!   f̂(m) = q^{-d} Σ_x χ(−x·m) f(x)
//! * frequency side (F_q^d, dm), dm = counting; a function g there is
//!   transformed back with the unnormalized sum ǧ(x) = Σ_m χ(−x·m) g(m).
//!   This is the restriction map g ↦ ĝ|_S dual to the extension operator.
//! * (f dσ)^∨(m) = |S|^{-1} Σ_{x∈S} χ(x·m) f(x)
//!
//! Every transform is a direct sum over the character table. Inner sums are
//! bucketed by the trace value of x·m, so each term costs d table lookups
//! and a complex addition.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::characters::{advance, CharacterTable};
use crate::error::{Error, Result};
use crate::finite_field::{FieldElement, FieldSpec};
use crate::geometry::{build_paraboloid, check_cap, SubsetOfS, Variety};

/// Largest |S|·q^d for which the extension operator keeps a dense phase matrix.
pub const DENSE_PHASE_LIMIT: usize = 1 << 25;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Measure {
    /// Normalized counting measure, mass q^{-d} per point.
    Dx,
    /// Counting measure.
    Dm,
}

/// Complex function on F_q^d in canonical point order.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    pub q: u64,
    pub d: usize,
    pub values: Vec<Complex64>,
}

impl GridFunction {
    pub fn new(q: u64, d: usize, values: Vec<Complex64>) -> Result<Self> {
        let expected = q.pow(d as u32) as usize;
        if values.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                got: values.len(),
            });
        }
        Ok(GridFunction { q, d, values })
    }

    pub fn zeros(q: u64, d: usize) -> Self {
        GridFunction {
            q,
            d,
            values: vec![Complex64::new(0.0, 0.0); q.pow(d as u32) as usize],
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&FunctionRecord::from_values(
            "grid",
            self.q,
            self.d,
            &self.values,
        ))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let rec: FunctionRecord = serde_json::from_str(text)?;
        rec.expect_kind("grid")?;
        Self::new(rec.q, rec.d, rec.values())
    }
}

/// Complex function on S in the paraboloid's canonical order.
#[derive(Clone, Debug, PartialEq)]
pub struct SurfaceFunction {
    pub q: u64,
    pub d: usize,
    pub values: Vec<Complex64>,
}

impl SurfaceFunction {
    pub fn new(q: u64, d: usize, values: Vec<Complex64>) -> Result<Self> {
        let expected = q.pow(d as u32 - 1) as usize;
        if values.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                got: values.len(),
            });
        }
        Ok(SurfaceFunction { q, d, values })
    }

    pub fn constant(q: u64, d: usize, c: Complex64) -> Self {
        SurfaceFunction {
            q,
            d,
            values: vec![c; q.pow(d as u32 - 1) as usize],
        }
    }

    pub fn indicator(q: u64, d: usize, subset: &SubsetOfS) -> Self {
        let mut f = Self::constant(q, d, Complex64::new(0.0, 0.0));
        for &m in subset.members() {
            f.values[m as usize] = Complex64::new(1.0, 0.0);
        }
        f
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&FunctionRecord::from_values(
            "surface",
            self.q,
            self.d,
            &self.values,
        ))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let rec: FunctionRecord = serde_json::from_str(text)?;
        rec.expect_kind("surface")?;
        Self::new(rec.q, rec.d, rec.values())
    }
}

/// On-disk layout: `{"kind": "grid"|"surface", "q": .., "d": .., "values": [[re, im], ..]}`.
#[derive(Debug, Serialize, Deserialize)]
struct FunctionRecord {
    kind: String,
    q: u64,
    d: usize,
    values: Vec<[f64; 2]>,
}

impl FunctionRecord {
    fn from_values(kind: &str, q: u64, d: usize, values: &[Complex64]) -> Self {
        FunctionRecord {
            kind: kind.into(),
            q,
            d,
            values: values.iter().map(|z| [z.re, z.im]).collect(),
        }
    }

    fn expect_kind(&self, kind: &str) -> Result<()> {
        if self.kind != kind {
            return Err(Error::Malformed(format!(
                "expected a {kind} function, found {}",
                self.kind
            )));
        }
        Ok(())
    }

    fn values(&self) -> Vec<Complex64> {
        self.values
            .iter()
            .map(|&[re, im]| Complex64::new(re, im))
            .collect()
    }
}

/// Exponents (p, r) of an L^p(S, dσ) → L^r(dm) estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentPair {
    pub p: f64,
    pub r: f64,
}

impl ExponentPair {
    pub fn new(p: f64, r: f64) -> Result<Self> {
        check_exponent(p)?;
        check_exponent(r)?;
        Ok(ExponentPair { p, r })
    }

    pub fn p_dual(&self) -> f64 {
        dual_exponent(self.p)
    }

    pub fn r_dual(&self) -> f64 {
        dual_exponent(self.r)
    }
}

/// s/(s−1), with 1 ↔ ∞.
pub fn dual_exponent(s: f64) -> f64 {
    if s == 1.0 {
        f64::INFINITY
    } else if s.is_infinite() {
        1.0
    } else {
        s / (s - 1.0)
    }
}

fn check_exponent(p: f64) -> Result<()> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::BadExponent(p));
    }
    Ok(())
}

/// (weight · Σ|v|^p)^{1/p}, or max |v| for p = ∞.
pub fn weighted_norm(values: &[Complex64], p: f64, weight: f64) -> Result<f64> {
    check_exponent(p)?;
    if p.is_infinite() {
        return Ok(values.iter().map(|z| z.norm()).fold(0.0, f64::max));
    }
    let sum: f64 = if p == 2.0 {
        values.iter().map(|z| z.norm_sqr()).sum()
    } else if p == 4.0 {
        values.iter().map(|z| z.norm_sqr() * z.norm_sqr()).sum()
    } else {
        values.iter().map(|z| z.norm().powf(p)).sum()
    };
    Ok((weight * sum).powf(1.0 / p))
}

pub fn norm_grid(f: &GridFunction, p: f64, measure: Measure) -> Result<f64> {
    let weight = match measure {
        Measure::Dx => (f.q as f64).powi(-(f.d as i32)),
        Measure::Dm => 1.0,
    };
    weighted_norm(&f.values, p, weight)
}

/// ‖f‖_{L^p(S,dσ)} with dσ the normalized counting measure on S.
pub fn norm_surface(f: &SurfaceFunction, p: f64) -> Result<f64> {
    weighted_norm(&f.values, p, 1.0 / f.values.len() as f64)
}

/// Field, character table, enumerated S and enumerated F_q^d for one (q, d).
#[derive(Clone)]
pub struct FourierSpace {
    chars: Arc<CharacterTable>,
    variety: Arc<Variety>,
    grid: Vec<FieldElement>,
    d: usize,
}

impl std::fmt::Debug for FourierSpace {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "FourierSpace(F_{}^{})", self.q(), self.d)
    }
}

impl FourierSpace {
    pub fn new(field: &FieldSpec, d: usize, cap: u128) -> Result<Self> {
        check_cap(field, d, cap)?;
        let variety = build_paraboloid(field, d, cap)?;
        let n = (field.q() as usize).pow(d as u32);
        let mut grid = Vec::with_capacity(n * d);
        let mut v = vec![field.zero(); d];
        loop {
            grid.extend_from_slice(&v);
            if !advance(&mut v, field.q()) {
                break;
            }
        }
        Ok(FourierSpace {
            chars: Arc::new(CharacterTable::new(field)),
            variety: Arc::new(variety),
            grid,
            d,
        })
    }

    pub fn chars(&self) -> &CharacterTable {
        &self.chars
    }

    pub fn field(&self) -> &FieldSpec {
        self.chars.field()
    }

    pub fn variety(&self) -> &Variety {
        &self.variety
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn q(&self) -> u64 {
        self.field().q() as u64
    }

    pub fn grid_len(&self) -> usize {
        self.grid.len() / self.d
    }

    pub fn surface_len(&self) -> usize {
        self.variety.len()
    }

    pub fn grid_point(&self, idx: usize) -> &[FieldElement] {
        &self.grid[idx * self.d..(idx + 1) * self.d]
    }

    pub fn grid_index(&self, m: &[FieldElement]) -> usize {
        let q = self.q() as usize;
        m.iter().fold(0, |acc, a| acc * q + a.index() as usize)
    }

    /// Tr(x·m) mod p.
    #[inline]
    pub fn phase(&self, x: &[FieldElement], m: &[FieldElement]) -> u32 {
        let p = self.field().p();
        let s: u32 = x
            .iter()
            .zip(m)
            .map(|(&a, &b)| self.chars.phase_of_product(a, b))
            .sum();
        s % p
    }

    fn bucket_sum(
        &self,
        points: &[FieldElement],
        weights: impl Iterator<Item = (usize, Complex64)>,
        m: &[FieldElement],
        negate: bool,
    ) -> Complex64 {
        let p = self.field().p();
        let mut buckets = vec![Complex64::new(0.0, 0.0); p as usize];
        for (i, w) in weights {
            let x = &points[i * self.d..(i + 1) * self.d];
            let ph = self.phase(x, m);
            let ph = if negate { (p - ph) % p } else { ph };
            buckets[ph as usize] += w;
        }
        buckets
            .iter()
            .zip(self.chars.roots())
            .map(|(&b, &w)| b * w)
            .sum()
    }

    /// f̂(m) = q^{-d} Σ_x χ(−x·m) f(x) at every m.
    pub fn hat(&self, f: &GridFunction) -> Result<GridFunction> {
        self.expect_grid(f)?;
        let scale = (self.q() as f64).powi(-(self.d as i32));
        let values = self.transform_grid(&f.values, true, scale);
        GridFunction::new(self.q(), self.d, values)
    }

    /// ǧ(x) = Σ_m χ(−x·m) g(m) at every x: the counting-measure transform
    /// of a function on the frequency side.
    pub fn hat_counting(&self, g: &GridFunction) -> Result<GridFunction> {
        self.expect_grid(g)?;
        let values = self.transform_grid(&g.values, true, 1.0);
        GridFunction::new(self.q(), self.d, values)
    }

    fn transform_grid(&self, values: &[Complex64], negate: bool, scale: f64) -> Vec<Complex64> {
        let support: Vec<(usize, Complex64)> = values
            .iter()
            .enumerate()
            .filter(|(_, z)| z.re != 0.0 || z.im != 0.0)
            .map(|(i, &z)| (i, z))
            .collect();
        (0..self.grid_len())
            .into_par_iter()
            .map(|mi| {
                let m = self.grid_point(mi);
                self.bucket_sum(&self.grid, support.iter().copied(), m, negate) * scale
            })
            .collect()
    }

    fn expect_grid(&self, f: &GridFunction) -> Result<()> {
        if f.values.len() != self.grid_len() {
            return Err(Error::LengthMismatch {
                expected: self.grid_len(),
                got: f.values.len(),
            });
        }
        Ok(())
    }

    fn expect_surface(&self, f: &SurfaceFunction) -> Result<()> {
        if f.values.len() != self.surface_len() {
            return Err(Error::LengthMismatch {
                expected: self.surface_len(),
                got: f.values.len(),
            });
        }
        Ok(())
    }

    /// (f dσ)^∨(m) = |S|^{-1} Σ_{x∈S} χ(x·m) f(x) at every m ∈ F_q^d.
    pub fn extend(&self, f: &SurfaceFunction) -> Result<GridFunction> {
        self.expect_surface(f)?;
        let support: Vec<(usize, Complex64)> = f
            .values
            .iter()
            .enumerate()
            .filter(|(_, z)| z.re != 0.0 || z.im != 0.0)
            .map(|(i, &z)| (i, z))
            .collect();
        Ok(self.extend_support(&support))
    }

    /// Extension of the indicator of E, touching only the members of E.
    pub fn extend_subset(&self, subset: &SubsetOfS) -> GridFunction {
        let support: Vec<(usize, Complex64)> = subset
            .members()
            .iter()
            .map(|&m| (m as usize, Complex64::new(1.0, 0.0)))
            .collect();
        self.extend_support(&support)
    }

    fn extend_support(&self, support: &[(usize, Complex64)]) -> GridFunction {
        let scale = 1.0 / self.surface_len() as f64;
        let coords = self.variety.coords();
        let values = (0..self.grid_len())
            .into_par_iter()
            .map(|mi| {
                self.bucket_sum(coords, support.iter().copied(), self.grid_point(mi), false)
                    * scale
            })
            .collect();
        GridFunction {
            q: self.q(),
            d: self.d,
            values,
        }
    }

    /// ĝ|_S(x) = Σ_m χ(−x·m) g(m) for x ∈ S.
    pub fn restrict(&self, g: &GridFunction) -> Result<SurfaceFunction> {
        self.expect_grid(g)?;
        let support: Vec<(usize, Complex64)> = g
            .values
            .iter()
            .enumerate()
            .filter(|(_, z)| z.re != 0.0 || z.im != 0.0)
            .map(|(i, &z)| (i, z))
            .collect();
        let values = (0..self.surface_len())
            .into_par_iter()
            .map(|xi| {
                self.bucket_sum(&self.grid, support.iter().copied(), self.variety.point(xi), true)
            })
            .collect();
        SurfaceFunction::new(self.q(), self.d, values)
    }

    /// The closed form of (dσ)^∨(m):
    /// 1 at m = 0; 0 when m_d = 0, m̄ ≠ 0; otherwise
    /// q^{−(d−1)} χ(m̄·m̄/(−4m_d)) η^{d−1}(m_d) G_1^{d−1}.
    pub fn sigma_inverse_closed_form(&self, m: &[FieldElement]) -> Complex64 {
        sigma_inverse_closed_form(&self.chars, m)
    }

    /// (Σ_m |(f dσ)^∨(m)|², (q^d/|S|)·‖f‖²_{L²(S,dσ)}).
    pub fn l2_identity_check(&self, f: &SurfaceFunction) -> Result<(f64, f64)> {
        let ext = self.extend(f)?;
        let lhs: f64 = ext.values.iter().map(|z| z.norm_sqr()).sum();
        let n2 = norm_surface(f, 2.0)?;
        let rhs = self.grid_len() as f64 / self.surface_len() as f64 * n2 * n2;
        Ok((lhs, rhs))
    }

    /// Extension operator with a precomputed phase matrix when it fits.
    pub fn operator(&self) -> ExtensionOperator<'_> {
        ExtensionOperator::new(self)
    }
}

pub fn sigma_inverse_closed_form(chars: &CharacterTable, m: &[FieldElement]) -> Complex64 {
    let f = chars.field();
    let d = m.len();
    let (bar, md) = (&m[..d - 1], m[d - 1]);
    if md.is_zero() {
        return if bar.iter().all(|a| a.is_zero()) {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        };
    }
    let minus_four_md = f.neg(f.mul(f.from_int(4), md));
    let arg = f
        .div(f.dot(bar, bar), minus_four_md)
        .expect("m_d ≠ 0 and the characteristic is odd");
    let k = (d - 1) as i32;
    let eta = (chars.eta(md) as f64).powi(k);
    let q = f.q() as f64;
    chars.chi(arg) * chars.g1().powi(k) * (eta * q.powi(-k))
}

/// The extension map A: f ↦ (f dσ)^∨ and its conjugate transpose A*.
pub struct ExtensionOperator<'a> {
    space: &'a FourierSpace,
    // phases[m * |S| + x] = Tr(x·m); only when |S|·q^d ≤ DENSE_PHASE_LIMIT.
    phases: Option<Vec<u16>>,
}

impl<'a> ExtensionOperator<'a> {
    fn new(space: &'a FourierSpace) -> Self {
        let (ns, ng) = (space.surface_len(), space.grid_len());
        let phases = (ns.saturating_mul(ng) <= DENSE_PHASE_LIMIT).then(|| {
            let rows: Vec<Vec<u16>> = (0..ng)
                .into_par_iter()
                .map(|mi| {
                    let m = space.grid_point(mi);
                    (0..ns)
                        .map(|xi| space.phase(space.variety.point(xi), m) as u16)
                        .collect()
                })
                .collect();
            rows.concat()
        });
        ExtensionOperator { space, phases }
    }

    pub fn space(&self) -> &FourierSpace {
        self.space
    }

    /// A f as a plain vector over the grid.
    pub fn apply(&self, f: &[Complex64]) -> Vec<Complex64> {
        let sp = self.space;
        let Some(phases) = &self.phases else {
            let surface = SurfaceFunction {
                q: sp.q(),
                d: sp.d,
                values: f.to_vec(),
            };
            return sp.extend(&surface).expect("length checked by caller").values;
        };
        let ns = sp.surface_len();
        let p = sp.field().p() as usize;
        let roots = sp.chars.roots();
        let scale = 1.0 / ns as f64;
        (0..sp.grid_len())
            .into_par_iter()
            .map(|mi| {
                let row = &phases[mi * ns..(mi + 1) * ns];
                let mut buckets = vec![Complex64::new(0.0, 0.0); p];
                for (&ph, &v) in row.iter().zip(f) {
                    buckets[ph as usize] += v;
                }
                buckets.iter().zip(roots).map(|(&b, &w)| b * w).sum::<Complex64>() * scale
            })
            .collect()
    }

    /// A* g(x) = |S|^{-1} Σ_m χ(−x·m) g(m).
    pub fn adjoint(&self, g: &[Complex64]) -> Vec<Complex64> {
        let sp = self.space;
        let ns = sp.surface_len();
        let scale = 1.0 / ns as f64;
        let Some(phases) = &self.phases else {
            let grid = GridFunction {
                q: sp.q(),
                d: sp.d,
                values: g.to_vec(),
            };
            return sp
                .restrict(&grid)
                .expect("length checked by caller")
                .values
                .into_iter()
                .map(|z| z * scale)
                .collect();
        };
        let p = sp.field().p();
        let roots = sp.chars.roots();
        (0..ns)
            .into_par_iter()
            .map(|xi| {
                let mut buckets = vec![Complex64::new(0.0, 0.0); p as usize];
                for (mi, &v) in g.iter().enumerate() {
                    let ph = phases[mi * ns + xi] as u32;
                    buckets[((p - ph) % p) as usize] += v;
                }
                buckets.iter().zip(roots).map(|(&b, &w)| b * w).sum::<Complex64>() * scale
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::finite_field::make_field;
    use crate::geometry::DEFAULT_ENUMERATION_CAP;

    fn space(p: u64, l: i64, d: usize) -> FourierSpace {
        FourierSpace::new(&make_field(p, l).unwrap(), d, DEFAULT_ENUMERATION_CAP).unwrap()
    }

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn hat_of_constant_and_of_delta() {
        let sp = space(3, 1, 2);
        let one = GridFunction::new(3, 2, vec![c(1.0); 9]).unwrap();
        let h = sp.hat(&one).unwrap();
        for (i, z) in h.values.iter().enumerate() {
            let want = if i == 0 { 1.0 } else { 0.0 };
            assert!((z - c(want)).norm() < 1e-12);
        }
        let mut delta = GridFunction::zeros(3, 2);
        delta.values[0] = c(9.0);
        let h = sp.hat(&delta).unwrap();
        assert!(h.values.iter().all(|z| (z - c(1.0)).norm() < 1e-12));
    }

    #[test]
    fn extension_values() {
        let sp = space(3, 1, 2);
        let one = SurfaceFunction::constant(3, 2, c(1.0));
        let ext = sp.extend(&one).unwrap();
        assert!((ext.values[0] - c(1.0)).norm() < 1e-12);
        // m = (1, 0): m̄ ≠ 0, m_d = 0
        assert!(ext.values[sp.grid_index(&[make_field(3, 1).unwrap().one(), FieldElement::default()])]
            .norm()
            < 1e-12);
        // m = (0, 1): (1 + 2ω)/3 has modulus 3^{-1/2}
        let z = ext.values[1];
        assert!((z.norm() - 3f64.powf(-0.5)).abs() < 1e-12);
    }

    #[test]
    fn closed_form_matches_direct_f3_cubed() {
        let sp = space(3, 1, 3);
        let ext = sp
            .extend(&SurfaceFunction::constant(3, 3, c(1.0)))
            .unwrap();
        for mi in 0..sp.grid_len() {
            let m = sp.grid_point(mi);
            let closed = sp.sigma_inverse_closed_form(m);
            assert!((closed - ext.values[mi]).norm() < 1e-9, "m = {m:?}");
            if !m[2].is_zero() {
                assert!((closed.norm() - 3f64.powf(-1.0)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn norms_of_constants() {
        let one = GridFunction::new(3, 2, vec![c(1.0); 9]).unwrap();
        for p in [1.0, 1.5, 2.0, 4.0, f64::INFINITY] {
            assert!((norm_grid(&one, p, Measure::Dx).unwrap() - 1.0).abs() < 1e-12);
            let want = if p.is_infinite() { 1.0 } else { 9f64.powf(1.0 / p) };
            assert!((norm_grid(&one, p, Measure::Dm).unwrap() - want).abs() < 1e-12);
        }
        assert!(matches!(norm_grid(&one, 0.5, Measure::Dx), Err(Error::BadExponent(_))));
        let s = SurfaceFunction::constant(3, 2, c(1.0));
        assert!((norm_surface(&s, 3.0).unwrap() - 1.0).abs() < 1e-12);
        assert!(norm_surface(&s, 0.0).is_err());
    }

    #[test]
    fn surface_norm_of_indicator() {
        let e = SubsetOfS::new(3, [1]).unwrap();
        let f = SurfaceFunction::indicator(3, 2, &e);
        assert!((norm_surface(&f, 2.0).unwrap() - (1.0f64 / 3.0).sqrt()).abs() < 1e-12);
        let e = SubsetOfS::new(9, [0, 4, 5, 7]).unwrap();
        let f = SurfaceFunction::indicator(3, 3, &e);
        for p in [1.0, 1.6, 4.0] {
            let want = (4.0f64 / 9.0).powf(1.0 / p);
            assert!((norm_surface(&f, p).unwrap() - want).abs() < 1e-12);
        }
    }

    #[test]
    fn l2_identity_small() {
        let sp = space(3, 1, 2);
        let (l, r) = sp
            .l2_identity_check(&SurfaceFunction::constant(3, 2, c(1.0)))
            .unwrap();
        assert!((l - 3.0).abs() < 1e-12 && (r - 3.0).abs() < 1e-12);
        let (l, r) = sp
            .l2_identity_check(&SurfaceFunction::constant(3, 2, c(0.0)))
            .unwrap();
        assert_eq!((l, r), (0.0, 0.0));
    }

    #[test]
    fn operator_matches_extend_and_is_adjoint() {
        let sp = space(5, 1, 3);
        let op = sp.operator();
        let f: Vec<Complex64> = (0..sp.surface_len())
            .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
            .collect();
        let g: Vec<Complex64> = (0..sp.grid_len())
            .map(|i| Complex64::new((i as f64 * 0.23).cos(), (i as f64 * 0.71).sin()))
            .collect();
        let af = op.apply(&f);
        let direct = sp
            .extend(&SurfaceFunction::new(5, 3, f.clone()).unwrap())
            .unwrap();
        for (a, b) in af.iter().zip(&direct.values) {
            assert!((a - b).norm() < 1e-12);
        }
        // ⟨Af, g⟩ = ⟨f, A*g⟩
        let ag = op.adjoint(&g);
        let lhs: Complex64 = af.iter().zip(&g).map(|(a, b)| a * b.conj()).sum();
        let rhs: Complex64 = f.iter().zip(&ag).map(|(a, b)| a * b.conj()).sum();
        assert!((lhs - rhs).norm() < 1e-10);
        let restricted = sp
            .restrict(&GridFunction::new(5, 3, g.clone()).unwrap())
            .unwrap();
        let ns = sp.surface_len() as f64;
        for (a, b) in ag.iter().zip(&restricted.values) {
            assert!((a * ns - b).norm() < 1e-9);
        }
    }

    #[test]
    fn json_round_trip() {
        let f = SurfaceFunction::new(3, 2, vec![c(1.0), Complex64::new(0.5, -2.0), c(0.0)]).unwrap();
        let back = SurfaceFunction::from_json(&f.to_json().unwrap()).unwrap();
        assert_eq!(back, f);
        assert!(GridFunction::from_json(&f.to_json().unwrap()).is_err());
        assert!(SurfaceFunction::from_json(r#"{"kind":"surface","q":3,"d":2,"values":[[1,0]]}"#).is_err());
    }

    #[test]
    fn exponent_duals() {
        let e = ExponentPair::new(1.6, 4.0).unwrap();
        assert!((1.0 / e.p + 1.0 / e.p_dual() - 1.0).abs() < 1e-12);
        assert!((1.0 / e.r + 1.0 / e.r_dual() - 1.0).abs() < 1e-12);
        assert_eq!(dual_exponent(1.0), f64::INFINITY);
        assert!(ExponentPair::new(0.9, 2.0).is_err());
    }
}
