//! Additive energy Λ₄(E) of subsets of the paraboloid, the piecewise energy
//! bounds for even and odd d, and the intermediate character sums of the
//! energy argument (R, M, I, II) evaluated term by term.
//!
//! Throughout, Q_x̄(ȳ, z̄) = x̄·ȳ − ȳ·z̄ − x̄·z̄ + z̄·z̄, which vanishes exactly
//! when x + y − z lies on S.

use std::fmt;

use num_complex::Complex64;
use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::characters::{advance, CharacterTable};
use crate::error::{Error, Result};
use crate::finite_field::{FieldElement, FieldSpec};
use crate::geometry::{build_subspace_h, subspace_h_with_root, translate, Paraboloid, SubsetOfS};
use crate::seeding::{rng_for, tag};

/// Largest q^d for which pair sums are counted in a dense array.
pub const DENSE_SUM_LIMIT: u64 = 1 << 22;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn of(d: usize) -> Self {
        if d.is_multiple_of(2) {
            Parity::Even
        } else {
            Parity::Odd
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "even" => Ok(Parity::Even),
            "odd" => Ok(Parity::Odd),
            _ => Err(Error::Config {
                field: "parity".into(),
                reason: format!("expected even or odd, got {s:?}"),
            }),
        }
    }
}

impl fmt::Display for Parity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Parity::Even => "even",
            Parity::Odd => "odd",
        })
    }
}

fn member_points(par: &Paraboloid, e: &SubsetOfS) -> Vec<FieldElement> {
    let d = par.d();
    let f = par.field();
    let mut out = Vec::with_capacity(e.len() * d);
    let mut bar = vec![f.zero(); d - 1];
    for &pos in e.members() {
        par.bar_at(pos, &mut bar);
        out.extend_from_slice(&bar);
        out.push(f.dot(&bar, &bar));
    }
    out
}

fn member_bars(par: &Paraboloid, e: &SubsetOfS) -> Vec<Vec<FieldElement>> {
    let f = par.field();
    e.members()
        .iter()
        .map(|&pos| {
            let mut bar = vec![f.zero(); par.d() - 1];
            par.bar_at(pos, &mut bar);
            bar
        })
        .collect()
}

#[inline]
fn sum_key(f: &FieldSpec, x: &[FieldElement], y: &[FieldElement]) -> u64 {
    let q = f.q() as u64;
    x.iter()
        .zip(y)
        .fold(0, |acc, (&a, &b)| acc * q + f.add(a, b).index() as u64)
}

/// r_E(v) = #{(x, y) ∈ E² : x + y = v}, stored sparsely as (index of v, r_E(v))
/// sorted by the canonical index of v in F_q^d.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RepresentationFunction {
    entries: Vec<(u64, u64)>,
}

impl RepresentationFunction {
    pub fn new(par: &Paraboloid, e: &SubsetOfS) -> Self {
        let d = par.d();
        let f = par.field();
        let pts = member_points(par, e);
        let n = e.len();
        let mut keys = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                keys.push(sum_key(f, &pts[i * d..(i + 1) * d], &pts[j * d..(j + 1) * d]));
            }
        }
        keys.sort_unstable();
        let mut entries: Vec<(u64, u64)> = Vec::new();
        for k in keys {
            match entries.last_mut() {
                Some((last, c)) if *last == k => *c += 1,
                _ => entries.push((k, 1)),
            }
        }
        RepresentationFunction { entries }
    }

    pub fn entries(&self) -> &[(u64, u64)] {
        &self.entries
    }

    pub fn get(&self, v: u64) -> u64 {
        self.entries
            .binary_search_by_key(&v, |&(k, _)| k)
            .map_or(0, |i| self.entries[i].1)
    }

    /// Σ_v r_E(v) = |E|².
    pub fn total(&self) -> u64 {
        self.entries.iter().map(|&(_, c)| c).sum()
    }

    /// Σ_v r_E(v)² = Λ₄(E).
    pub fn energy(&self) -> u128 {
        self.entries.iter().map(|&(_, c)| (c as u128) * (c as u128)).sum()
    }
}

/// Λ₄(E) = #{(x, y, z, w) ∈ E⁴ : x + y = z + w}, as Σ_v r_E(v)².
pub fn lambda4(par: &Paraboloid, e: &SubsetOfS) -> u128 {
    let n = e.len();
    if n == 0 {
        return 0;
    }
    let d = par.d();
    let f = par.field();
    let pts = member_points(par, e);
    let pt = |i: usize| &pts[i * d..(i + 1) * d];
    let grid = par.grid_size();
    let pairs = (n * (n + 1) / 2) as u64;
    if grid <= DENSE_SUM_LIMIT && pairs >= grid / 32 {
        let mut counts = vec![0u32; grid as usize];
        for i in 0..n {
            counts[sum_key(f, pt(i), pt(i)) as usize] += 1;
            for j in i + 1..n {
                counts[sum_key(f, pt(i), pt(j)) as usize] += 2;
            }
        }
        return counts.iter().map(|&c| (c as u128) * (c as u128)).sum();
    }
    // Unordered pairs, low bit marks the diagonal (weight 1 instead of 2).
    let mut keys = Vec::with_capacity(pairs as usize);
    for i in 0..n {
        keys.push(sum_key(f, pt(i), pt(i)) << 1 | 1);
        for j in i + 1..n {
            keys.push(sum_key(f, pt(i), pt(j)) << 1);
        }
    }
    keys.sort_unstable();
    let mut total = 0u128;
    let mut run = 0u128;
    let mut current = u64::MAX;
    for k in keys {
        if k >> 1 != current {
            total += run * run;
            run = 0;
            current = k >> 1;
        }
        run += if k & 1 == 1 { 1 } else { 2 };
    }
    total + run * run
}

/// Λ₄(E) by enumerating all |E|⁴ quadruples.
pub fn lambda4_bruteforce(par: &Paraboloid, e: &SubsetOfS) -> u128 {
    let d = par.d();
    let f = par.field();
    let pts = member_points(par, e);
    let n = e.len();
    let pt = |i: usize| &pts[i * d..(i + 1) * d];
    let mut count = 0u128;
    for x in 0..n {
        for y in 0..n {
            for z in 0..n {
                for w in 0..n {
                    let equal = (0..d).all(|k| {
                        f.add(pt(x)[k], pt(y)[k]) == f.add(pt(z)[k], pt(w)[k])
                    });
                    count += equal as u128;
                }
            }
        }
    }
    count
}

/// ‖(E dσ)^∨‖_{L⁴(dm)} = q^{d/4} Λ₄(E)^{1/4} / |S|.
pub fn l4_norm_via_energy(par: &Paraboloid, e: &SubsetOfS) -> f64 {
    let q = par.q() as f64;
    q.powf(par.d() as f64 / 4.0) * (lambda4(par, e) as f64).powf(0.25) / par.size() as f64
}

fn q_form(f: &FieldSpec, x: &[FieldElement], y: &[FieldElement], z: &[FieldElement]) -> FieldElement {
    let xy = f.dot(x, y);
    let yz = f.dot(y, z);
    let xz = f.dot(x, z);
    let zz = f.dot(z, z);
    f.add(f.sub(f.sub(xy, yz), xz), zz)
}

/// N = #{(x̄, ȳ, z̄) ∈ Ē³ : Q_x̄(ȳ, z̄) = 0}, which dominates Λ₄(E), and
/// R(Ē) = N − |E|³/q.
pub fn reduction_terms(par: &Paraboloid, e: &SubsetOfS) -> (u128, f64) {
    let f = par.field();
    let bars = member_bars(par, e);
    let mut n = 0u128;
    for x in &bars {
        for y in &bars {
            for z in &bars {
                n += q_form(f, x, y, z).is_zero() as u128;
            }
        }
    }
    let cube = (e.len() as f64).powi(3);
    (n, n as f64 - cube / par.q() as f64)
}

/// Which term of the energy bound is in force.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// |E|³
    Trivial,
    /// q^{−1}|E|³
    CubicOverQ,
    /// q^{(d−2)/4}|E|^{5/2}, or q^{(d−3)/4}|E|^{5/2} for odd d
    FiveHalves,
    /// q^{(d−2)/2}|E|²
    Quadratic,
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Branch::Trivial => "trivial",
            Branch::CubicOverQ => "cubic_over_q",
            Branch::FiveHalves => "five_halves",
            Branch::Quadratic => "quadratic",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnergyBoundReport {
    pub q: u64,
    pub d: usize,
    pub parity: Parity,
    pub size: usize,
    pub lambda4: u128,
    pub cubic_over_q: f64,
    pub five_halves: f64,
    pub quadratic: f64,
    pub trivial: f64,
    /// min{|E|³, sum of the three terms}
    pub bound: f64,
    pub ratio: f64,
    /// Largest of the competing terms.
    pub branch: Branch,
    /// Branch predicted by the size thresholds alone.
    pub regime: Branch,
    pub warnings: Vec<String>,
}

/// Reasons the energy bound's hypotheses fail for (field, d, parity).
pub fn lemma_preconditions(field: &FieldSpec, d: usize, parity: Parity) -> Vec<String> {
    let mut w = Vec::new();
    match parity {
        Parity::Even => {
            if d < 4 || d % 2 == 1 {
                w.push(format!("even bound needs even d ≥ 4, got d = {d}"));
            }
        }
        Parity::Odd => {
            if d.is_multiple_of(2) {
                w.push(format!("odd bound needs odd d, got d = {d}"));
            }
            if field.p() % 4 != 3 {
                w.push(format!("odd bound needs p ≡ 3 mod 4, got p = {}", field.p()));
            }
            if (field.l() as usize * (d.saturating_sub(1))).is_multiple_of(4) {
                w.push(format!(
                    "odd bound needs l(d−1) ≢ 0 mod 4, got l(d−1) = {}",
                    field.l() as usize * (d.saturating_sub(1))
                ));
            }
        }
    }
    w
}

/// Branch from the size thresholds, compared exactly through |E|² against
/// integer powers of q.
pub fn regime(q: u64, d: usize, parity: Parity, size: usize) -> Branch {
    let q = q as u128;
    let s2 = (size as u128) * (size as u128);
    let pw = |k: usize| q.saturating_pow(k as u32);
    if s2 <= pw(d - 2) {
        return Branch::Trivial;
    }
    match parity {
        Parity::Even => {
            if s2 >= pw(d + 2) {
                Branch::CubicOverQ
            } else {
                Branch::FiveHalves
            }
        }
        Parity::Odd => {
            if s2 >= pw(d + 1) {
                Branch::CubicOverQ
            } else if s2 >= pw(d - 1) {
                Branch::FiveHalves
            } else {
                Branch::Quadratic
            }
        }
    }
}

pub fn bound_report(
    field: &FieldSpec,
    d: usize,
    parity: Parity,
    size: usize,
    lambda4: u128,
) -> EnergyBoundReport {
    let q = field.q() as f64;
    let n = size as f64;
    let mid_exp = match parity {
        Parity::Even => (d as f64 - 2.0) / 4.0,
        Parity::Odd => (d as f64 - 3.0) / 4.0,
    };
    let cubic_over_q = n.powi(3) / q;
    let five_halves = q.powf(mid_exp) * n.powf(2.5);
    let quadratic = q.powf((d as f64 - 2.0) / 2.0) * n * n;
    let trivial = n.powi(3);
    let bound = trivial.min(cubic_over_q + five_halves + quadratic);
    let ratio = if lambda4 == 0 { 0.0 } else { lambda4 as f64 / bound };
    let mut dominant = (Branch::CubicOverQ, cubic_over_q);
    for cand in [(Branch::FiveHalves, five_halves), (Branch::Quadratic, quadratic)] {
        if cand.1 > dominant.1 {
            dominant = cand;
        }
    }
    let branch = if trivial <= dominant.1 {
        Branch::Trivial
    } else {
        dominant.0
    };
    EnergyBoundReport {
        q: field.q() as u64,
        d,
        parity,
        size,
        lambda4,
        cubic_over_q,
        five_halves,
        quadratic,
        trivial,
        bound,
        ratio,
        branch,
        regime: regime(field.q() as u64, d, parity, size),
        warnings: lemma_preconditions(field, d, parity),
    }
}

/// Λ₄(E) against the piecewise bound for the given parity. Failed
/// hypotheses are reported as warnings.
pub fn check_lemma_key(par: &Paraboloid, e: &SubsetOfS, parity: Parity) -> EnergyBoundReport {
    bound_report(par.field(), par.d(), parity, e.len(), lambda4(par, e))
}

/// The terms of M(x̄) = I + II for one x̄ ∈ Ē.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProofTrace {
    pub size: usize,
    /// The s = s′ part of M(x̄), summed over z̄, ȳ, ȳ′, s.
    pub i_direct: i128,
    /// q^{d−1}(q−1)|Ē|
    pub i_formula: i128,
    /// The s ≠ s′ part of M(x̄), summed over z̄, ȳ, ȳ′, s, s′.
    pub ii_direct: i128,
    /// II with each z̄-sum replaced by the completed-square closed form.
    pub ii_closed: Complex64,
    /// II in the variables a = s, b = s′/s, with the a-sum taken over χ(Γ a).
    pub ii_gamma: Complex64,
    /// M(x̄) = Σ_z̄ |Σ_{ȳ, s≠0} χ(s Q_x̄(ȳ, z̄))|².
    pub m_direct: i128,
    /// G_1^{d−1}
    pub g1_power: Complex64,
    /// −q^{(d−1)/2} when the odd-d hypotheses hold.
    pub odd_expected: Option<f64>,
}

impl ProofTrace {
    pub fn i_exact(&self) -> bool {
        self.i_direct == self.i_formula
    }

    pub fn split_exact(&self) -> bool {
        self.m_direct == self.i_direct + self.ii_direct
    }

    pub fn ii_closed_error(&self) -> f64 {
        (self.ii_closed - Complex64::new(self.ii_direct as f64, 0.0)).norm()
    }

    pub fn ii_gamma_error(&self) -> f64 {
        (self.ii_gamma - Complex64::new(self.ii_direct as f64, 0.0)).norm()
    }

    pub fn odd_sign_error(&self) -> Option<f64> {
        self.odd_expected
            .map(|v| (self.g1_power - Complex64::new(v, 0.0)).norm())
    }
}

/// Value of Σ_k c_k ω^k when it is rational, i.e. when c_1 = … = c_{p−1}.
fn rational_value(counts: &[i64]) -> Option<i128> {
    counts[1..]
        .iter()
        .all(|&c| c == counts[1])
        .then(|| counts[0] as i128 - counts[1] as i128)
}

/// I, II (three ways) and M for the base point x̄ at position `x_pos`.
pub fn proof_trace_terms(
    chars: &CharacterTable,
    par: &Paraboloid,
    e: &SubsetOfS,
    x_pos: u64,
) -> Result<ProofTrace> {
    if !e.contains(x_pos) {
        return Err(Error::Precondition("x̄ must lie in Ē".into()));
    }
    let f = par.field();
    let p = f.p() as usize;
    let q = f.q() as i128;
    let k = par.d() - 1;
    let bars = member_bars(par, e);
    let mut x = vec![f.zero(); k];
    par.bar_at(x_pos, &mut x);
    let units: Vec<FieldElement> = f.nonzero_elements().collect();
    let phase = |a: FieldElement| chars.phase_of_product(f.one(), a) as usize;

    // I and II, both straight from the z̄-sum.
    let mut i_counts = vec![0i64; p];
    let mut ii_counts = vec![0i64; p];
    let mut m_direct = 0i128;
    let mut z = vec![f.zero(); k];
    let mut tr = vec![0usize; bars.len() * units.len()];
    loop {
        let mut zeros = 0i128;
        for (yi, y) in bars.iter().enumerate() {
            let qv = q_form(f, &x, y, &z);
            zeros += qv.is_zero() as i128;
            for (si, &s) in units.iter().enumerate() {
                tr[yi * units.len() + si] = chars.phase_of_product(s, qv) as usize;
            }
        }
        let inner = q * zeros - bars.len() as i128;
        m_direct += inner * inner;
        for yi in 0..bars.len() {
            for yj in 0..bars.len() {
                for si in 0..units.len() {
                    let a = tr[yi * units.len() + si];
                    for sj in 0..units.len() {
                        let b = tr[yj * units.len() + sj];
                        let ph = (a + p - b) % p;
                        if si == sj {
                            i_counts[ph] += 1;
                        } else {
                            ii_counts[ph] += 1;
                        }
                    }
                }
            }
        }
        if !advance(&mut z, f.q()) {
            break;
        }
    }
    let i_direct = rational_value(&i_counts)
        .ok_or_else(|| Error::Precondition("I did not evaluate to an integer".into()))?;
    let ii_direct = rational_value(&ii_counts)
        .ok_or_else(|| Error::Precondition("II did not evaluate to an integer".into()))?;

    // II through the completed square in z̄, with t = s − s′.
    let mut ii_closed = Complex64::new(0.0, 0.0);
    let mut beta = vec![f.zero(); k];
    for y in &bars {
        for y2 in &bars {
            for &s in &units {
                for &s2 in &units {
                    if s == s2 {
                        continue;
                    }
                    let t = f.sub(s, s2);
                    for j in 0..k {
                        let left = f.mul(s, f.neg(f.add(y[j], x[j])));
                        let right = f.mul(s2, f.add(y2[j], x[j]));
                        beta[j] = f.add(left, right);
                    }
                    let lin: Vec<FieldElement> = (0..k)
                        .map(|j| f.sub(f.mul(s, y[j]), f.mul(s2, y2[j])))
                        .collect();
                    let outer = chars.chi(f.dot(&lin, &x));
                    ii_closed += chars.completed_square_closed(t, &beta)? * outer;
                }
            }
        }
    }

    // II in the variables a = s, b = s′/s, summing χ(Γ a) over a.
    let mut gamma_counts = vec![0i64; p];
    let four = f.from_int(4);
    for y in &bars {
        for y2 in &bars {
            for &b in &units {
                if b == f.one() {
                    continue;
                }
                let one_minus_b = f.sub(f.one(), b);
                for j in 0..k {
                    beta[j] = f.add(f.neg(f.add(y[j], x[j])), f.mul(b, f.add(y2[j], x[j])));
                }
                let lin: Vec<FieldElement> = (0..k).map(|j| f.sub(y[j], f.mul(b, y2[j]))).collect();
                let gamma = f.add(
                    f.div(f.dot(&beta, &beta), f.neg(f.mul(four, one_minus_b)))?,
                    f.dot(&lin, &x),
                );
                for &a in &units {
                    let eta = chars.eta(f.mul(a, one_minus_b)) as i64;
                    let w = if k.is_multiple_of(2) { 1 } else { eta };
                    gamma_counts[phase(f.mul(gamma, a))] += w;
                }
            }
        }
    }
    let g1_power = chars.g1().powi(k as i32);
    let ii_gamma = g1_power * chars.combine(&gamma_counts);

    let odd_expected = (par.d() % 2 == 1 && lemma_preconditions(f, par.d(), Parity::Odd).is_empty())
        .then(|| -(f.q() as f64).powf(k as f64 / 2.0));

    Ok(ProofTrace {
        size: bars.len(),
        i_direct,
        i_formula: (q.pow(k as u32)) * (q - 1) * bars.len() as i128,
        ii_direct,
        ii_closed,
        ii_gamma,
        m_direct,
        g1_power,
        odd_expected,
    })
}

/// Target sizes round(q^{j/2}) for j = 0, …, 2(d−1), clipped to
/// [1, min(|S|, max_size)], duplicates removed. These straddle every
/// threshold of the piecewise bound.
pub fn regime_sizes(par: &Paraboloid, max_size: u64) -> Vec<u64> {
    let q = par.q() as f64;
    let limit = par.size().min(max_size).max(1);
    let mut out: Vec<u64> = Vec::new();
    for j in 0..=2 * (par.d() - 1) {
        let s = (q.powf(j as f64 / 2.0).round() as u64).clamp(1, limit);
        if !out.contains(&s) {
            out.push(s);
        }
    }
    out
}

/// A uniformly random subset of S of the given size.
pub fn sample_subset<R: Rng + ?Sized>(par: &Paraboloid, size: u64, rng: &mut R) -> Result<SubsetOfS> {
    let universe = par.size();
    if size > universe {
        return Err(Error::Precondition(format!(
            "cannot draw {size} points from |S| = {universe}"
        )));
    }
    let picked = index::sample(rng, universe as usize, size as usize);
    SubsetOfS::new(universe, picked.into_iter().map(|i| i as u64))
}

/// Named structured subsets of S with at most `max_size` points: the full
/// paraboloid, a singleton, an axis line, H for both roots of −1, and a
/// translate of H.
pub fn structured_subsets(par: &Paraboloid, max_size: u64) -> Result<Vec<(String, SubsetOfS)>> {
    let f = par.field();
    let universe = par.size();
    let mut out = vec![("singleton".to_string(), SubsetOfS::singleton(universe, 0)?)];
    let stride = universe / par.q();
    let line = SubsetOfS::new(universe, (0..par.q()).map(|a| a * stride))?;
    out.push(("axis_line".into(), line));
    if par.d() >= 3 {
        if let Some(h) = build_subspace_h(f, par.d())? {
            let i = f.sqrt_of_minus_one().expect("H exists");
            let h2 = subspace_h_with_root(f, par.d(), f.neg(i))?;
            let mut shift = vec![f.zero(); par.d() - 1];
            shift[par.d() - 2] = f.one();
            let moved = translate(par, &h, &shift);
            out.push(("H".into(), h));
            out.push(("H_conjugate".into(), h2));
            out.push(("H_translate".into(), moved));
        }
    }
    if universe <= max_size {
        out.push(("full".into(), SubsetOfS::full(universe)));
    }
    out.retain(|(_, s)| s.len() as u64 <= max_size);
    Ok(out)
}

/// One row of an energy survey.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SurveyRow {
    pub family: String,
    pub report: EnergyBoundReport,
}

/// Λ₄ against the bound over `samples` seeded random subsets, cycling
/// through `sizes`, followed by the structured families.
pub fn energy_survey(
    par: &Paraboloid,
    parity: Parity,
    sizes: &[u64],
    samples: usize,
    seed: u64,
    max_size: u64,
) -> Result<Vec<SurveyRow>> {
    if sizes.is_empty() {
        return Err(Error::Config {
            field: "densities".into(),
            reason: "no subset sizes to sample".into(),
        });
    }
    let (q, d) = (par.q(), par.d() as u64);
    let mut rows: Vec<SurveyRow> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let size = sizes[i % sizes.len()];
            let mut rng = rng_for(seed, &[q, d, tag("energy"), i as u64]);
            let e = sample_subset(par, size, &mut rng)?;
            Ok(SurveyRow {
                family: "random".into(),
                report: check_lemma_key(par, &e, parity),
            })
        })
        .collect::<Result<_>>()?;
    for (name, e) in structured_subsets(par, max_size)? {
        rows.push(SurveyRow {
            family: name,
            report: check_lemma_key(par, &e, parity),
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::finite_field::make_field;

    fn par(p: u64, l: i64, d: usize) -> Paraboloid {
        Paraboloid::new(&make_field(p, l).unwrap(), d).unwrap()
    }

    #[test]
    fn small_energies() {
        let s = par(3, 1, 2);
        assert_eq!(lambda4(&s, &SubsetOfS::singleton(3, 1).unwrap()), 1);
        assert_eq!(lambda4(&s, &SubsetOfS::new(3, [0, 2]).unwrap()), 6);
        assert_eq!(lambda4(&s, &SubsetOfS::full(3)), 15);
        assert_eq!(lambda4(&s, &SubsetOfS::empty(3)), 0);
    }

    #[test]
    fn subgroup_energy_is_cubic() {
        let s = par(5, 1, 4);
        let h = build_subspace_h(s.field(), 4).unwrap().unwrap();
        assert_eq!(lambda4(&s, &h), 125);
        let rep = check_lemma_key(&s, &h, Parity::Even);
        assert_eq!(rep.branch, Branch::Trivial);
        assert_eq!(rep.regime, Branch::Trivial);
        assert!((rep.ratio - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dense_and_sparse_paths_agree_with_bruteforce() {
        let s = par(5, 1, 3);
        let mut rng = rng_for(1, &[]);
        for size in [1u64, 2, 5, 9, 12] {
            let e = sample_subset(&s, size, &mut rng).unwrap();
            let brute = lambda4_bruteforce(&s, &e);
            assert_eq!(lambda4(&s, &e), brute);
            let r = RepresentationFunction::new(&s, &e);
            assert_eq!(r.total(), size * size);
            assert_eq!(r.energy(), brute);
        }
        let full = SubsetOfS::full(25);
        assert_eq!(lambda4(&s, &full), RepresentationFunction::new(&s, &full).energy());
    }

    #[test]
    fn representation_lookup() {
        let s = par(3, 1, 2);
        let r = RepresentationFunction::new(&s, &SubsetOfS::full(3));
        // (0,0) + (0,0) is the only way to reach the origin.
        assert_eq!(r.get(0), 1);
        assert_eq!(r.total(), 9);
    }

    #[test]
    fn regimes_match_dominant_terms() {
        for (q, d, parity) in [(5u64, 4usize, Parity::Even), (3, 6, Parity::Even), (3, 7, Parity::Odd), (7, 5, Parity::Odd)] {
            let f = make_field(q, 1).unwrap();
            let top = q.pow(d as u32 - 1);
            for size in 1..=top.min(5000) as usize {
                let rep = bound_report(&f, d, parity, size, 0);
                let terms = [rep.cubic_over_q, rep.five_halves, rep.quadratic, rep.trivial];
                let near_tie = terms.iter().enumerate().any(|(i, a)| {
                    terms[i + 1..].iter().any(|b| (a - b).abs() <= 1e-9 * a.max(*b))
                });
                if !near_tie {
                    assert_eq!(rep.branch, rep.regime, "q={q} d={d} |E|={size}");
                }
            }
        }
    }

    #[test]
    fn preconditions() {
        let f3 = make_field(3, 1).unwrap();
        assert!(lemma_preconditions(&f3, 7, Parity::Odd).is_empty());
        assert!(lemma_preconditions(&make_field(3, 3).unwrap(), 7, Parity::Odd).is_empty());
        assert_eq!(lemma_preconditions(&f3, 5, Parity::Odd).len(), 1);
        assert_eq!(lemma_preconditions(&make_field(5, 1).unwrap(), 4, Parity::Odd).len(), 2);
        assert_eq!(lemma_preconditions(&make_field(5, 1).unwrap(), 5, Parity::Odd).len(), 2);
        assert!(lemma_preconditions(&f3, 4, Parity::Even).is_empty());
        assert_eq!(lemma_preconditions(&f3, 3, Parity::Even).len(), 1);
    }

    #[test]
    fn reduction_dominates_energy() {
        let s = par(3, 1, 4);
        let mut rng = rng_for(2, &[]);
        for size in [1u64, 4, 9, 27] {
            let e = sample_subset(&s, size, &mut rng).unwrap();
            let (n, r) = reduction_terms(&s, &e);
            assert!(lambda4(&s, &e) <= n);
            assert!((n as f64 - (size as f64).powi(3) / 3.0 - r).abs() < 1e-9);
        }
    }

    #[test]
    fn proof_trace_q3_d2() {
        let f = make_field(3, 1).unwrap();
        let chars = CharacterTable::new(&f);
        let s = par(3, 1, 2);
        for x in 0..3 {
            let t = proof_trace_terms(&chars, &s, &SubsetOfS::full(3), x).unwrap();
            assert_eq!(t.i_formula, 18);
            assert!(t.i_exact());
            assert!(t.split_exact());
            assert!(t.ii_closed_error() < 1e-8);
            assert!(t.ii_gamma_error() < 1e-8);
        }
        assert!(proof_trace_terms(&chars, &s, &SubsetOfS::singleton(3, 0).unwrap(), 1).is_err());
    }

    #[test]
    fn proof_trace_odd_sign() {
        let f = make_field(3, 1).unwrap();
        let chars = CharacterTable::new(&f);
        let s = par(3, 1, 7);
        let e = SubsetOfS::new(s.size(), [0, 5, 100, 333]).unwrap();
        let t = proof_trace_terms(&chars, &s, &e, 100).unwrap();
        assert_eq!(t.odd_expected, Some(-27.0));
        assert!(t.odd_sign_error().unwrap() < 1e-9);
        assert!(t.i_exact() && t.split_exact());
        assert!(t.ii_closed_error() < 1e-8 && t.ii_gamma_error() < 1e-8);
    }

    #[test]
    fn regime_sizes_cover_thresholds() {
        let s = par(3, 1, 4);
        assert_eq!(regime_sizes(&s, 1000), vec![1, 2, 3, 5, 9, 16, 27]);
        assert_eq!(regime_sizes(&s, 4), vec![1, 2, 3, 4]);
    }

    #[test]
    fn structured_families() {
        let s = par(5, 1, 4);
        let fams = structured_subsets(&s, 1000).unwrap();
        let names: Vec<&str> = fams.iter().map(|(n, _)| n.as_str()).collect();
        assert_eq!(names, ["singleton", "axis_line", "H", "H_conjugate", "H_translate", "full"]);
        for (_, e) in &fams {
            assert!(lambda4(&s, e) <= (e.len() as u128).pow(3));
        }
    }
}
