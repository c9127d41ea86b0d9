//! The paraboloid S = {(x̄, x̄·x̄)} ⊂ F_q^d, subsets of it, and the isotropic
//! subspaces H it contains when −1 is a square.
//!
//! Points of S are numbered by x̄ in lexicographic order (first coordinate
//! most significant). That position is the only handle a [`SubsetOfS`]
//! stores, so subsets of very large paraboloids can be sampled without
//! enumerating S.

use serde::{Deserialize, Serialize};

use crate::characters::advance;
use crate::error::{Error, Result};
use crate::finite_field::{FieldElement, FieldSpec};

/// Default cap on q^d for anything that enumerates F_q^d or S.
pub const DEFAULT_ENUMERATION_CAP: u128 = 100_000_000;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Point(pub Vec<FieldElement>);

impl Point {
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// The first d − 1 coordinates.
    pub fn bar(&self) -> &[FieldElement] {
        &self.0[..self.0.len() - 1]
    }

    pub fn last(&self) -> FieldElement {
        self.0[self.0.len() - 1]
    }
}

/// Coordinates of the paraboloid in F_q^d; no enumeration happens here.
#[derive(Clone, Debug)]
pub struct Paraboloid {
    field: FieldSpec,
    d: usize,
}

impl Paraboloid {
    pub fn new(field: &FieldSpec, d: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::BadDimension {
                d,
                reason: "the paraboloid needs d ≥ 2".into(),
            });
        }
        let q = field.q() as u128;
        if q.checked_pow(d as u32).is_none_or(|n| n > u64::MAX as u128) {
            return Err(Error::CapExceeded {
                what: "F_q^d index space".into(),
                size: u128::MAX,
                cap: u64::MAX as u128,
            });
        }
        Ok(Paraboloid {
            field: field.clone(),
            d,
        })
    }

    pub fn field(&self) -> &FieldSpec {
        &self.field
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn q(&self) -> u64 {
        self.field.q() as u64
    }

    /// |S| = q^{d−1}
    pub fn size(&self) -> u64 {
        self.q().pow(self.d as u32 - 1)
    }

    /// q^d
    pub fn grid_size(&self) -> u64 {
        self.q().pow(self.d as u32)
    }

    /// Writes x̄ for the point at `pos` into `bar` (length d − 1).
    pub fn bar_at(&self, mut pos: u64, bar: &mut [FieldElement]) {
        debug_assert_eq!(bar.len(), self.d - 1);
        let q = self.q();
        for slot in bar.iter_mut().rev() {
            *slot = FieldElement::from_index_unchecked((pos % q) as u32);
            pos /= q;
        }
    }

    pub fn lift(&self, bar: &[FieldElement]) -> Point {
        let mut coords = bar.to_vec();
        coords.push(self.field.dot(bar, bar));
        Point(coords)
    }

    pub fn point(&self, pos: u64) -> Point {
        let mut bar = vec![self.field.zero(); self.d - 1];
        self.bar_at(pos, &mut bar);
        self.lift(&bar)
    }

    pub fn position_of_bar(&self, bar: &[FieldElement]) -> u64 {
        let q = self.q();
        bar.iter().fold(0, |acc, a| acc * q + a.index() as u64)
    }

    pub fn contains(&self, x: &Point) -> bool {
        x.dim() == self.d && self.field.dot(x.bar(), x.bar()) == x.last()
    }

    /// Position of `x` in the canonical order of S, or `None` if x ∉ S.
    pub fn position(&self, x: &Point) -> Option<u64> {
        self.contains(x).then(|| self.position_of_bar(x.bar()))
    }
}

/// An enumerated paraboloid: all q^{d−1} points in canonical order.
#[derive(Clone, Debug)]
pub struct Variety {
    paraboloid: Paraboloid,
    coords: Vec<FieldElement>,
}

impl Variety {
    pub fn paraboloid(&self) -> &Paraboloid {
        &self.paraboloid
    }

    pub fn field(&self) -> &FieldSpec {
        &self.paraboloid.field
    }

    pub fn d(&self) -> usize {
        self.paraboloid.d
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.paraboloid.d
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    /// Full coordinates of the point at `pos`.
    pub fn point(&self, pos: usize) -> &[FieldElement] {
        let d = self.paraboloid.d;
        &self.coords[pos * d..(pos + 1) * d]
    }

    /// All coordinates, point after point.
    pub fn coords(&self) -> &[FieldElement] {
        &self.coords
    }

    pub fn points(&self) -> impl Iterator<Item = &[FieldElement]> {
        self.coords.chunks_exact(self.paraboloid.d)
    }

    pub fn position(&self, x: &Point) -> Option<usize> {
        self.paraboloid.position(x).map(|p| p as usize)
    }
}

/// Checks q^d against `cap`.
pub fn check_cap(field: &FieldSpec, d: usize, cap: u128) -> Result<()> {
    let size = (field.q() as u128).saturating_pow(d as u32);
    if size > cap {
        return Err(Error::CapExceeded {
            what: format!("F_{}^{}", field.q(), d),
            size,
            cap,
        });
    }
    Ok(())
}

/// Enumerates S ⊂ F_q^d, ordered lexicographically by x̄. Refuses when
/// q^d exceeds `cap`.
pub fn build_paraboloid(field: &FieldSpec, d: usize, cap: u128) -> Result<Variety> {
    let paraboloid = Paraboloid::new(field, d)?;
    check_cap(field, d, cap)?;
    let n = paraboloid.size() as usize;
    let mut coords = Vec::with_capacity(n * d);
    let mut bar = vec![field.zero(); d - 1];
    loop {
        coords.extend_from_slice(&bar);
        coords.push(field.dot(&bar, &bar));
        if !advance(&mut bar, field.q()) {
            break;
        }
    }
    debug_assert_eq!(coords.len(), n * d);
    Ok(Variety { paraboloid, coords })
}

/// A subset of S, stored as sorted positions in the canonical order.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SubsetOfS {
    universe: u64,
    members: Vec<u64>,
}

impl SubsetOfS {
    pub fn new(universe: u64, positions: impl IntoIterator<Item = u64>) -> Result<Self> {
        let mut members: Vec<u64> = positions.into_iter().collect();
        members.sort_unstable();
        members.dedup();
        if let Some(&last) = members.last() {
            if last >= universe {
                return Err(Error::Malformed(format!(
                    "position {last} outside a paraboloid of {universe} points"
                )));
            }
        }
        Ok(SubsetOfS { universe, members })
    }

    pub fn empty(universe: u64) -> Self {
        SubsetOfS {
            universe,
            members: Vec::new(),
        }
    }

    pub fn full(universe: u64) -> Self {
        SubsetOfS {
            universe,
            members: (0..universe).collect(),
        }
    }

    pub fn singleton(universe: u64, pos: u64) -> Result<Self> {
        Self::new(universe, [pos])
    }

    /// Subset from a bit mask over the first 64 positions.
    pub fn from_mask(universe: u64, mask: u64) -> Result<Self> {
        Self::new(universe, (0..64).filter(|i| mask >> i & 1 == 1))
    }

    pub fn universe(&self) -> u64 {
        self.universe
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn members(&self) -> &[u64] {
        &self.members
    }

    pub fn contains(&self, pos: u64) -> bool {
        self.members.binary_search(&pos).is_ok()
    }

    /// Bit string over the canonical order: byte k holds positions
    /// 8k..8k+8, least significant bit first, bytes hex-encoded in order.
    pub fn to_hex(&self) -> String {
        let nbytes = self.universe.div_ceil(8) as usize;
        let mut bytes = vec![0u8; nbytes];
        for &m in &self.members {
            bytes[(m / 8) as usize] |= 1 << (m % 8);
        }
        bytes.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn from_hex(universe: u64, hex: &str) -> Result<Self> {
        let nbytes = universe.div_ceil(8) as usize;
        if hex.len() != 2 * nbytes {
            return Err(Error::LengthMismatch {
                expected: 2 * nbytes,
                got: hex.len(),
            });
        }
        let mut members = Vec::new();
        for k in 0..nbytes {
            let byte = u8::from_str_radix(&hex[2 * k..2 * k + 2], 16)
                .map_err(|_| Error::Malformed(format!("bad hex byte at {k}")))?;
            for bit in 0..8 {
                if byte >> bit & 1 == 1 {
                    members.push(8 * k as u64 + bit);
                }
            }
        }
        Self::new(universe, members)
    }

    pub fn to_record(&self, paraboloid: &Paraboloid) -> SubsetRecord {
        SubsetRecord {
            q: paraboloid.q(),
            d: paraboloid.d(),
            field: paraboloid.field().label(),
            size: self.len() as u64,
            bits: self.to_hex(),
        }
    }
}

/// Serialized form of a subset: (q, d) header plus the hex bit string.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsetRecord {
    pub q: u64,
    pub d: usize,
    pub field: String,
    pub size: u64,
    pub bits: String,
}

impl SubsetRecord {
    pub fn to_subset(&self) -> Result<SubsetOfS> {
        let universe = self
            .q
            .checked_pow(self.d as u32 - 1)
            .ok_or_else(|| Error::Malformed("header (q, d) overflows".into()))?;
        let s = SubsetOfS::from_hex(universe, &self.bits)?;
        if s.len() as u64 != self.size {
            return Err(Error::Malformed(format!(
                "header says {} members, bits hold {}",
                self.size,
                s.len()
            )));
        }
        Ok(s)
    }
}

/// The isotropic subspace H ⊂ S: points (s₁, i s₁, …, s_k, i s_k, 0, …, 0)
/// with k = (d−2)/2 for even d and k = (d−1)/2 for odd d. `None` when −1 is
/// not a square in F_q.
pub fn build_subspace_h(field: &FieldSpec, d: usize) -> Result<Option<SubsetOfS>> {
    match field.sqrt_of_minus_one() {
        Some(i) => subspace_h_with_root(field, d, i).map(Some),
        None => {
            subspace_dimension(d)?;
            Ok(None)
        }
    }
}

/// Dimension of H for the given d.
pub fn subspace_dimension(d: usize) -> Result<usize> {
    if d < 3 {
        return Err(Error::BadDimension {
            d,
            reason: "the subspace H needs d ≥ 3".into(),
        });
    }
    Ok(if d.is_multiple_of(2) { (d - 2) / 2 } else { (d - 1) / 2 })
}

/// H built from a chosen square root `i` of −1.
pub fn subspace_h_with_root(field: &FieldSpec, d: usize, i: FieldElement) -> Result<SubsetOfS> {
    let k = subspace_dimension(d)?;
    if field.square(i) != field.neg(field.one()) {
        return Err(Error::Precondition("i² ≠ −1".into()));
    }
    let paraboloid = Paraboloid::new(field, d)?;
    let mut s = vec![field.zero(); k];
    let mut bar = vec![field.zero(); d - 1];
    let mut positions = Vec::new();
    loop {
        for (j, &sj) in s.iter().enumerate() {
            bar[2 * j] = sj;
            bar[2 * j + 1] = field.mul(i, sj);
        }
        debug_assert!(field.dot(&bar, &bar).is_zero());
        positions.push(paraboloid.position_of_bar(&bar));
        if !advance(&mut s, field.q()) {
            break;
        }
    }
    SubsetOfS::new(paraboloid.size(), positions)
}

/// Image of E under the paraboloid symmetry x̄ ↦ x̄ + t̄ (an affine map of
/// F_q^d that preserves S).
pub fn translate(paraboloid: &Paraboloid, subset: &SubsetOfS, shift: &[FieldElement]) -> SubsetOfS {
    let f = paraboloid.field();
    let mut bar = vec![f.zero(); paraboloid.d() - 1];
    let moved = subset.members().iter().map(|&pos| {
        paraboloid.bar_at(pos, &mut bar);
        for (b, &t) in bar.iter_mut().zip(shift) {
            *b = f.add(*b, t);
        }
        paraboloid.position_of_bar(&bar)
    });
    let members: Vec<u64> = moved.collect();
    SubsetOfS::new(subset.universe(), members).expect("translation stays inside S")
}

/// Both sides of |H||S|^{−1} q^{(d−n)/r} ≲ (|H||S|^{−1})^{1/p}, with
/// n = log_q |H|.
pub fn necessary_condition_sides(
    paraboloid: &Paraboloid,
    h: &SubsetOfS,
    p: f64,
    r: f64,
) -> Result<(f64, f64)> {
    if h.is_empty() {
        return Err(Error::Degenerate("H must be nonempty".into()));
    }
    let q = paraboloid.q() as f64;
    let d = paraboloid.d() as f64;
    let density = h.len() as f64 / paraboloid.size() as f64;
    let n = (h.len() as f64).ln() / q.ln();
    let left = density * q.powf((d - n) / r);
    let right = density.powf(1.0 / p);
    Ok((left, right))
}

/// Smallest r allowed by the subspace test for a dimension-n subspace:
/// p(d−n)/((p−1)(d−n−1)).
pub fn subspace_r_threshold(d: usize, n: usize, p: f64) -> f64 {
    let (d, n) = (d as f64, n as f64);
    p * (d - n) / ((p - 1.0) * (d - n - 1.0))
}

/// The same threshold solved for p at fixed r: r(d−n−1)/(r(d−n−1) − (d−n)).
pub fn subspace_p_threshold(d: usize, n: usize, r: f64) -> f64 {
    let (d, n) = (d as f64, n as f64);
    r * (d - n - 1.0) / (r * (d - n - 1.0) - (d - n))
}
