//! Lower bounds for the extension constant R*(p→r) of the paraboloid, the
//! theorem endpoint sweeps built on them, and the kernel estimates for
//! K = (dσ)^∨ − δ₀.
//!
//! R*(p→r) is the best constant in ‖(f dσ)^∨‖_{L^r(dm)} ≤ R* ‖f‖_{L^p(S,dσ)}.
//! Every witness f gives a lower bound; the search maximizes over three
//! pools: characteristic functions, structured families, and gradient ascent
//! on log ratio followed by the nonlinear power iteration
//! f ← |u|^{p′−2}u, u = A*(|Af|^{r−2}Af).

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::{regime_sizes, sample_subset, structured_subsets};
use crate::error::{Error, Result};
use crate::finite_field::FieldSpec;
use crate::fourier::{
    dual_exponent, norm_grid, weighted_norm, ExtensionOperator, FourierSpace, GridFunction,
    Measure,
};
use crate::geometry::{build_subspace_h, check_cap, subspace_dimension, subspace_r_threshold, translate, SubsetOfS};
use crate::seeding::{rng_for, tag};

const SMOOTHING: f64 = 1e-9;
const FD_STEP: f64 = 1e-6;

/// p₀ = 4d/(3d−2)
pub fn p4_endpoint(d: usize) -> f64 {
    let d = d as f64;
    4.0 * d / (3.0 * d - 2.0)
}

/// r₀ = 2d²/(d²−2d+2)
pub fn r2_endpoint(d: usize) -> f64 {
    let d = d as f64;
    2.0 * d * d / (d * d - 2.0 * d + 2.0)
}

/// Least-squares slope of ln y against ln x.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() < 2 || xs.len() != ys.len() {
        return None;
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

fn surface_norm(f: &[Complex64], p: f64) -> Result<f64> {
    weighted_norm(f, p, 1.0 / f.len() as f64)
}

/// ‖(f dσ)^∨‖_{L^r(dm)} / ‖f‖_{L^p(S,dσ)} for f given as values on S.
pub fn ratio_values(op: &ExtensionOperator, f: &[Complex64], p: f64, r: f64) -> Result<f64> {
    let n = op.space().surface_len();
    if f.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: f.len(),
        });
    }
    let nf = surface_norm(f, p)?;
    if nf == 0.0 {
        return Err(Error::Degenerate("the zero function has no extension ratio".into()));
    }
    let w = op.apply(f);
    Ok(weighted_norm(&w, r, 1.0)? / nf)
}

pub fn ratio(op: &ExtensionOperator, f: &crate::fourier::SurfaceFunction, p: f64, r: f64) -> Result<f64> {
    ratio_values(op, &f.values, p, r)
}

fn indicator(n: usize, subset: &SubsetOfS) -> Vec<Complex64> {
    let mut v = vec![Complex64::new(0.0, 0.0); n];
    for &m in subset.members() {
        v[m as usize] = Complex64::new(1.0, 0.0);
    }
    v
}

/// Extension ratio of the indicator of `subset`, touching only its members.
pub fn subset_ratio(space: &FourierSpace, subset: &SubsetOfS, p: f64, r: f64) -> Result<f64> {
    if subset.is_empty() {
        return Err(Error::Degenerate("the empty set has no extension ratio".into()));
    }
    let ext = space.extend_subset(subset);
    let density = subset.len() as f64 / space.surface_len() as f64;
    let denom = if p.is_infinite() { 1.0 } else { density.powf(1.0 / p) };
    Ok(norm_grid(&ext, r, Measure::Dm)? / denom)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    /// Maximum number of operator applications.
    pub budget: u64,
    pub restarts: usize,
    pub random_subsets: usize,
    pub max_iterations: usize,
    /// Exhaust all characteristic functions when |S| is at most this.
    pub exhaustive_limit: usize,
    pub h_translates: usize,
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            budget: 200_000,
            restarts: 50,
            random_subsets: 200,
            max_iterations: 300,
            exhaustive_limit: 20,
            h_translates: 4,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchMethod {
    Exhaustive,
    RandomSubsets,
    Structured,
    GradientAscent,
}

impl SearchMethod {
    pub fn name(self) -> &'static str {
        match self {
            SearchMethod::Exhaustive => "exhaustive",
            SearchMethod::RandomSubsets => "random_subsets",
            SearchMethod::Structured => "structured",
            SearchMethod::GradientAscent => "gradient_ascent",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Witness {
    Subset { family: String, subset: SubsetOfS },
    Vector { values: Vec<Complex64> },
}

impl Witness {
    pub fn values(&self, n: usize) -> Vec<Complex64> {
        match self {
            Witness::Subset { subset, .. } => indicator(n, subset),
            Witness::Vector { values } => values.clone(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Witness::Subset { .. } => "characteristic",
            Witness::Vector { .. } => "vector",
        }
    }

    pub fn family(&self) -> String {
        match self {
            Witness::Subset { family, subset } => format!("{family}[{}]", subset.len()),
            Witness::Vector { .. } => "ascent".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NormEstimate {
    pub q: u64,
    pub d: usize,
    pub p: f64,
    pub r: f64,
    /// Ratio of `witness`, recomputed from scratch.
    pub estimate: f64,
    pub witness: Witness,
    pub method: SearchMethod,
    /// Best ratio over characteristic functions only.
    pub characteristic_best: f64,
    pub evaluations: u64,
    pub budget_exhausted: bool,
}

impl NormEstimate {
    pub fn recompute(&self, op: &ExtensionOperator) -> Result<f64> {
        let f = self.witness.values(op.space().surface_len());
        ratio_values(op, &f, self.p, self.r)
    }
}

struct Budget {
    limit: u64,
    used: u64,
    exhausted: bool,
}

impl Budget {
    fn new(limit: u64) -> Self {
        Budget {
            limit,
            used: 0,
            exhausted: false,
        }
    }

    fn take(&mut self, n: u64) -> bool {
        if self.used + n > self.limit {
            self.exhausted = true;
            return false;
        }
        self.used += n;
        true
    }

    fn remaining(&self) -> u64 {
        self.limit - self.used
    }
}

struct Best {
    ratio: f64,
    witness: Option<(Witness, SearchMethod)>,
    characteristic: f64,
}

impl Best {
    fn offer(&mut self, ratio: f64, method: SearchMethod, witness: impl FnOnce() -> Witness) {
        if ratio > self.ratio {
            self.ratio = ratio;
            self.witness = Some((witness(), method));
        }
    }

    fn offer_subset(&mut self, ratio: f64, method: SearchMethod, family: &str, subset: &SubsetOfS) {
        self.characteristic = self.characteristic.max(ratio);
        self.offer(ratio, method, || Witness::Subset {
            family: family.into(),
            subset: subset.clone(),
        });
    }
}

fn lr_norm(w: &[Complex64], r: f64) -> f64 {
    weighted_norm(w, r, 1.0).expect("exponent validated")
}

/// Every nonempty characteristic function, visited in Gray-code order so
/// each step adds or removes one column of the operator.
fn exhaustive_pool(op: &ExtensionOperator, p: f64, r: f64, budget: &mut Budget, best: &mut Best) {
    let n = op.space().surface_len();
    let mut unit = vec![Complex64::new(0.0, 0.0); n];
    let cols: Vec<Vec<Complex64>> = (0..n)
        .map(|x| {
            unit[x] = Complex64::new(1.0, 0.0);
            let c = op.apply(&unit);
            unit[x] = Complex64::new(0.0, 0.0);
            c
        })
        .collect();
    if !budget.take(n as u64) {
        return;
    }
    let mut w = vec![Complex64::new(0.0, 0.0); cols[0].len()];
    let (mut mask, mut size) = (0u64, 0usize);
    let (mut best_ratio, mut best_mask) = (f64::NEG_INFINITY, 0u64);
    for k in 1..(1u64 << n) {
        if !budget.take(1) {
            break;
        }
        let bit = k.trailing_zeros() as usize;
        mask ^= 1 << bit;
        if mask >> bit & 1 == 1 {
            w.iter_mut().zip(&cols[bit]).for_each(|(a, b)| *a += b);
            size += 1;
        } else {
            w.iter_mut().zip(&cols[bit]).for_each(|(a, b)| *a -= b);
            size -= 1;
        }
        let ratio = lr_norm(&w, r) / (size as f64 / n as f64).powf(1.0 / p);
        if ratio > best_ratio {
            best_ratio = ratio;
            best_mask = mask;
        }
    }
    if best_mask != 0 {
        let s = SubsetOfS::from_mask(n as u64, best_mask).expect("mask within |S|");
        let exact = ratio_values(op, &indicator(n, &s), p, r).expect("nonempty");
        best.offer_subset(exact, SearchMethod::Exhaustive, "exhaustive", &s);
    }
}

fn structured_pool(
    op: &ExtensionOperator,
    p: f64,
    r: f64,
    cfg: &SearchConfig,
    budget: &mut Budget,
    best: &mut Best,
) -> Result<()> {
    let space = op.space();
    let par = space.variety().paraboloid();
    let n = space.surface_len();
    let mut family = structured_subsets(par, n as u64)?;
    if let Some(h) = family.iter().find(|(name, _)| name == "H").map(|(_, h)| h.clone()) {
        let f = par.field();
        let mut rng = rng_for(cfg.seed, &[par.q(), par.d() as u64, tag("h_translates")]);
        for k in 0..cfg.h_translates {
            let shift: Vec<_> = (0..par.d() - 1)
                .map(|_| f.element(rng.gen_range(0..f.q())).expect("index below q"))
                .collect();
            family.push((format!("H_shift{k}"), translate(par, &h, &shift)));
        }
    }
    for (name, s) in family {
        if !budget.take(1) {
            break;
        }
        let v = ratio_values(op, &indicator(n, &s), p, r)?;
        best.offer_subset(v, SearchMethod::Structured, &name, &s);
    }
    Ok(())
}

fn random_pool(
    op: &ExtensionOperator,
    p: f64,
    r: f64,
    cfg: &SearchConfig,
    budget: &mut Budget,
    best: &mut Best,
) -> Result<()> {
    let space = op.space();
    let par = space.variety().paraboloid();
    let n = space.surface_len();
    let sizes = regime_sizes(par, n as u64);
    for i in 0..cfg.random_subsets {
        if !budget.take(1) {
            break;
        }
        let mut rng = rng_for(
            cfg.seed,
            &[par.q(), par.d() as u64, tag("rstar_subsets"), p.to_bits(), r.to_bits(), i as u64],
        );
        let s = sample_subset(par, sizes[i % sizes.len()], &mut rng)?;
        let v = ratio_values(op, &indicator(n, &s), p, r)?;
        best.offer_subset(v, SearchMethod::RandomSubsets, "random", &s);
    }
    Ok(())
}

fn normalize(f: &mut [Complex64], p: f64) {
    let nf = surface_norm(f, p).expect("exponent validated");
    if nf > 0.0 {
        f.iter_mut().for_each(|z| *z /= nf);
    }
}

/// ln ratio and the extension w = Af.
fn objective(op: &ExtensionOperator, f: &[Complex64], p: f64, r: f64) -> (f64, Vec<Complex64>) {
    let w = op.apply(f);
    let value = lr_norm(&w, r).ln() - surface_norm(f, p).expect("validated").ln();
    (value, w)
}

fn smoothed_power(z: Complex64, e: f64) -> f64 {
    (z.norm_sqr() + SMOOTHING * SMOOTHING).powf(e / 2.0)
}

/// Steepest-ascent direction of ln ratio in the real coordinates of f.
fn gradient(op: &ExtensionOperator, f: &[Complex64], w: &[Complex64], p: f64, r: f64) -> Vec<Complex64> {
    let sw: f64 = w.iter().map(|&z| smoothed_power(z, r)).sum();
    let h: Vec<Complex64> = w.iter().map(|&z| z * smoothed_power(z, r - 2.0) / sw).collect();
    let u = op.adjoint(&h);
    let sf: f64 = f.iter().map(|&z| smoothed_power(z, p)).sum();
    u.iter()
        .zip(f)
        .map(|(&a, &z)| a - z * smoothed_power(z, p - 2.0) / sf)
        .collect()
}

/// One step of f ← |u|^{p′−2}u with u = A*(|w|^{r−2}w).
fn power_step(op: &ExtensionOperator, w: &[Complex64], p: f64, r: f64) -> Vec<Complex64> {
    let h: Vec<Complex64> = w.iter().map(|&z| z * z.norm().powf(r - 2.0)).collect();
    let u = op.adjoint(&h);
    let e = dual_exponent(p) - 2.0;
    u.iter().map(|&z| if z.norm() == 0.0 { z } else { z * z.norm().powf(e) }).collect()
}

fn l2(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Power iteration from f until the ratio stops improving.
fn polish(
    op: &ExtensionOperator,
    mut f: Vec<Complex64>,
    p: f64,
    r: f64,
    max_iterations: usize,
    budget: &mut Budget,
) -> (f64, Vec<Complex64>) {
    let (mut value, mut w) = objective(op, &f, p, r);
    if p <= 1.0 || r < 1.0 {
        return (value, f);
    }
    for _ in 0..max_iterations {
        if !budget.take(2) {
            break;
        }
        let mut next = power_step(op, &w, p, r);
        if l2(&next) == 0.0 {
            break;
        }
        normalize(&mut next, p);
        let (v, nw) = objective(op, &next, p, r);
        if v <= value {
            break;
        }
        let gain = v - value;
        f = next;
        w = nw;
        value = v;
        if gain < 1e-15 {
            break;
        }
    }
    (value, f)
}

/// Projected gradient ascent with step halving, then power-iteration polish.
fn ascend(
    op: &ExtensionOperator,
    mut f: Vec<Complex64>,
    p: f64,
    r: f64,
    max_iterations: usize,
    budget: &mut Budget,
) -> (f64, Vec<Complex64>) {
    normalize(&mut f, p);
    let (mut value, mut w) = objective(op, &f, p, r);
    let mut step = 0.5;
    'outer: for _ in 0..max_iterations {
        if !budget.take(1) {
            break;
        }
        let g = gradient(op, &f, &w, p, r);
        let gn = l2(&g);
        if gn == 0.0 {
            break;
        }
        let scale = l2(&f) / gn;
        loop {
            if !budget.take(1) {
                break 'outer;
            }
            let mut cand: Vec<Complex64> = f.iter().zip(&g).map(|(&a, &b)| a + b * (step * scale)).collect();
            normalize(&mut cand, p);
            let (v, nw) = objective(op, &cand, p, r);
            if v > value {
                let gain = v - value;
                f = cand;
                w = nw;
                value = v;
                step = (step * 2.0).min(1.0);
                if gain < 1e-6 {
                    break 'outer;
                }
                break;
            }
            step /= 2.0;
            if step < 1e-12 {
                break 'outer;
            }
        }
    }
    polish(op, f, p, r, max_iterations, budget)
}

fn ascent_pool(
    op: &ExtensionOperator,
    p: f64,
    r: f64,
    cfg: &SearchConfig,
    budget: &mut Budget,
    best: &mut Best,
) {
    let restarts = cfg.restarts.max(1);
    let share = budget.remaining() / restarts as u64;
    let n = op.space().surface_len();
    let (q, d) = (op.space().q(), op.space().d() as u64);
    let runs: Vec<(f64, Vec<Complex64>, u64, bool)> = (0..restarts)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_for(cfg.seed, &[q, d, tag("ascent"), p.to_bits(), r.to_bits(), i as u64]);
            let f: Vec<Complex64> = (0..n)
                .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            let mut local = Budget::new(share);
            let (v, f) = ascend(op, f, p, r, cfg.max_iterations, &mut local);
            (v, f, local.used, local.exhausted)
        })
        .collect();
    for (v, f, used, exhausted) in runs {
        budget.used += used;
        budget.exhausted |= exhausted;
        best.offer(v.exp(), SearchMethod::GradientAscent, || Witness::Vector { values: f });
    }
}

/// Lower bound for R*(p→r) from the best witness over all pools. The best
/// witness is finally run through the power iteration, so the result is
/// close to a critical point of the ratio.
pub fn estimate_rstar(op: &ExtensionOperator, p: f64, r: f64, cfg: &SearchConfig) -> Result<NormEstimate> {
    if cfg.budget == 0 {
        return Err(Error::Config {
            field: "budget".into(),
            reason: "must be positive".into(),
        });
    }
    crate::fourier::ExponentPair::new(p, r)?;
    let space = op.space();
    let n = space.surface_len();
    let mut budget = Budget::new(cfg.budget);
    let mut best = Best {
        ratio: f64::NEG_INFINITY,
        witness: None,
        characteristic: f64::NEG_INFINITY,
    };
    structured_pool(op, p, r, cfg, &mut budget, &mut best)?;
    if n <= cfg.exhaustive_limit {
        exhaustive_pool(op, p, r, &mut budget, &mut best);
    } else {
        random_pool(op, p, r, cfg, &mut budget, &mut best)?;
    }
    ascent_pool(op, p, r, cfg, &mut budget, &mut best);

    let (witness, mut method) = best
        .witness
        .clone()
        .ok_or_else(|| Error::Precondition("budget too small to evaluate any witness".into()))?;
    let (pv, pf) = polish(op, witness.values(n), p, r, cfg.max_iterations, &mut budget);
    let mut witness = witness;
    if pv.exp() > best.ratio {
        witness = Witness::Vector { values: pf };
        method = SearchMethod::GradientAscent;
    }
    let estimate = ratio_values(op, &witness.values(n), p, r)?;
    Ok(NormEstimate {
        q: space.q(),
        d: space.d(),
        p,
        r,
        estimate,
        witness,
        method,
        characteristic_best: best.characteristic,
        evaluations: budget.used,
        budget_exhausted: budget.exhausted,
    })
}

/// Norm of the central finite-difference gradient of ln ratio at f, after
/// removing the directions f and i·f along which the ratio is constant.
pub fn stationarity_residual(op: &ExtensionOperator, f: &[Complex64], p: f64, r: f64) -> Result<f64> {
    ratio_values(op, f, p, r)?;
    let mut base = f.to_vec();
    normalize(&mut base, p);
    let n = base.len();
    let units = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)];
    let grad: Vec<Complex64> = (0..n)
        .into_par_iter()
        .map(|x| {
            let mut g = [0.0; 2];
            let mut probe = base.clone();
            for (k, u) in units.iter().enumerate() {
                probe[x] = base[x] + u * FD_STEP;
                let plus = objective(op, &probe, p, r).0;
                probe[x] = base[x] - u * FD_STEP;
                let minus = objective(op, &probe, p, r).0;
                probe[x] = base[x];
                g[k] = (plus - minus) / (2.0 * FD_STEP);
            }
            Complex64::new(g[0], g[1])
        })
        .collect();
    let dot = |a: &[Complex64], b: &[Complex64]| -> f64 { a.iter().zip(b).map(|(x, y)| (x * y.conj()).re).sum() };
    let rot: Vec<Complex64> = base.iter().map(|z| z * Complex64::new(0.0, 1.0)).collect();
    let ff = dot(&base, &base);
    let (cf, ci) = (dot(&grad, &base) / ff, dot(&grad, &rot) / ff);
    let residual: f64 = grad
        .iter()
        .zip(base.iter().zip(&rot))
        .map(|(g, (b, i))| (g - b * cf - i * ci).norm_sqr())
        .sum();
    Ok(residual.sqrt())
}

/// ‖ĝ‖_{L^{p′}(S,dσ)} / ‖g‖_{L^{r′}(dm)} with ĝ(x) = Σ_m χ(−x·m) g(m).
pub fn dual_ratio(op: &ExtensionOperator, g: &[Complex64], p: f64, r: f64) -> Result<f64> {
    let ng = weighted_norm(g, dual_exponent(r), 1.0)?;
    if ng == 0.0 {
        return Err(Error::Degenerate("the zero function has no restriction ratio".into()));
    }
    let ns = op.space().surface_len() as f64;
    let restricted: Vec<Complex64> = op.adjoint(g).into_iter().map(|z| z * ns).collect();
    Ok(surface_norm(&restricted, dual_exponent(p))? / ng)
}

/// The dual witness g = |Af|^{r−2}Af of a primal witness f.
pub fn dual_witness(op: &ExtensionOperator, f: &[Complex64], r: f64) -> Vec<Complex64> {
    op.apply(f)
        .into_iter()
        .map(|z| z * z.norm().powf(r - 2.0))
        .collect()
}

/// (dual ratio of the estimate's dual witness, the estimate).
pub fn duality_spot_check(op: &ExtensionOperator, est: &NormEstimate) -> Result<(f64, f64)> {
    let f = est.witness.values(op.space().surface_len());
    let g = dual_witness(op, &f, est.r);
    Ok((dual_ratio(op, &g, est.p, est.r)?, est.estimate))
}

/// sup over a fixed pool of witnesses of the ratio at (p, r).
pub fn pool_supremum(op: &ExtensionOperator, pool: &[Vec<Complex64>], p: f64, r: f64) -> Result<f64> {
    pool.iter()
        .map(|f| ratio_values(op, f, p, r))
        .try_fold(f64::NEG_INFINITY, |acc, v| Ok(acc.max(v?)))
}

/// Ratio of the indicator of H, or `None` when −1 is not a square.
pub fn h_witness_ratio(space: &FourierSpace, p: f64, r: f64) -> Result<Option<f64>> {
    match build_subspace_h(space.field(), space.d())? {
        Some(h) => subset_ratio(space, &h, p, r).map(Some),
        None => Ok(None),
    }
}

/// K = (dσ)^∨ − δ₀ on the frequency side.
pub fn kernel(space: &FourierSpace) -> GridFunction {
    let one = crate::fourier::SurfaceFunction::constant(space.q(), space.d(), Complex64::new(1.0, 0.0));
    let mut k = space.extend(&one).expect("constant has length |S|");
    k.values[0] = Complex64::new(0.0, 0.0);
    k
}

/// (g ∗ K)(m) = Σ_n g(n) K(m − n) under the counting measure.
pub fn convolve(space: &FourierSpace, g: &GridFunction, k: &GridFunction) -> Result<GridFunction> {
    let n = space.grid_len();
    if g.values.len() != n || k.values.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: g.values.len().min(k.values.len()),
        });
    }
    let f = space.field();
    let support: Vec<usize> = (0..n).filter(|&i| g.values[i].norm_sqr() > 0.0).collect();
    let values = (0..n)
        .into_par_iter()
        .map(|mi| {
            let m = space.grid_point(mi);
            let mut acc = Complex64::new(0.0, 0.0);
            let mut diff = vec![f.zero(); space.d()];
            for &ni in &support {
                let nn = space.grid_point(ni);
                for j in 0..space.d() {
                    diff[j] = f.sub(m[j], nn[j]);
                }
                acc += g.values[ni] * k.values[space.grid_index(&diff)];
            }
            acc
        })
        .collect();
    GridFunction::new(space.q(), space.d(), values)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SteinTomasCheck {
    /// ‖g ∗ K‖_{L²(dm)}
    pub e1_lhs: f64,
    /// q ‖g‖_{L²(dm)}
    pub e1_rhs: f64,
    pub e1_holds: bool,
    /// ‖g ∗ K‖_{L⁴(dm)} / (q^{(4−d)/4} ‖g‖_{L^{4d/(3d−2)}(dm)}), for even d ≥ 4.
    pub e2_ratio: Option<f64>,
}

pub fn stein_tomas_checks(space: &FourierSpace, k: &GridFunction, g: &GridFunction) -> Result<SteinTomasCheck> {
    let conv = convolve(space, g, k)?;
    let q = space.q() as f64;
    let d = space.d();
    let e1_lhs = norm_grid(&conv, 2.0, Measure::Dm)?;
    let e1_rhs = q * norm_grid(g, 2.0, Measure::Dm)?;
    let e2_ratio = if d >= 4 && d.is_multiple_of(2) {
        let denom = q.powf((4.0 - d as f64) / 4.0) * norm_grid(g, p4_endpoint(d), Measure::Dm)?;
        Some(norm_grid(&conv, 4.0, Measure::Dm)? / denom)
    } else {
        None
    };
    Ok(SteinTomasCheck {
        e1_lhs,
        e1_rhs,
        e1_holds: e1_lhs <= e1_rhs,
        e2_ratio,
    })
}

/// Largest pointwise distance from qS(x) − 1 of three transforms of K:
/// Σ_m χ(−x·m)K(m), Σ_m χ(x·m)K(m), and q^{−d}Σ_m χ(−x·m)K(m).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct KernelTransformCheck {
    pub counting: f64,
    pub counting_plus: f64,
    pub normalized: f64,
}

pub fn kernel_transform_identity(space: &FourierSpace, k: &GridFunction) -> Result<KernelTransformCheck> {
    let t = space.hat_counting(k)?;
    let f = space.field();
    let q = space.q() as f64;
    let scale = q.powi(-(space.d() as i32));
    let mut out = KernelTransformCheck {
        counting: 0.0,
        counting_plus: 0.0,
        normalized: 0.0,
    };
    for xi in 0..space.grid_len() {
        let x = space.grid_point(xi);
        let on_s = f.dot(&x[..x.len() - 1], &x[..x.len() - 1]) == x[x.len() - 1];
        let want = Complex64::new(if on_s { q - 1.0 } else { -1.0 }, 0.0);
        let neg: Vec<_> = x.iter().map(|&a| f.neg(a)).collect();
        let plus = t.values[space.grid_index(&neg)];
        out.counting = out.counting.max((t.values[xi] - want).norm());
        out.counting_plus = out.counting_plus.max((plus - want).norm());
        out.normalized = out.normalized.max((t.values[xi] * scale - want).norm());
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Theorem {
    #[serde(rename = "p4")]
    P4,
    #[serde(rename = "2r")]
    TwoR,
    #[serde(rename = "odd")]
    Odd,
}

impl Theorem {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "p4" => Ok(Theorem::P4),
            "2r" => Ok(Theorem::TwoR),
            "odd" => Ok(Theorem::Odd),
            _ => Err(Error::Config {
                field: "theorem".into(),
                reason: format!("expected p4, 2r or odd, got {s:?}"),
            }),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Theorem::P4 => "p4",
            Theorem::TwoR => "2r",
            Theorem::Odd => "odd",
        }
    }

    /// Endpoint exponent pairs (p, r).
    pub fn endpoints(self, d: usize) -> Vec<(f64, f64)> {
        match self {
            Theorem::P4 => vec![(p4_endpoint(d), 4.0)],
            Theorem::TwoR => vec![(2.0, r2_endpoint(d))],
            Theorem::Odd => vec![(p4_endpoint(d), 4.0), (2.0, r2_endpoint(d))],
        }
    }

    pub fn check(self, field: &FieldSpec, d: usize) -> Result<()> {
        let fail = |reason: String| Err(Error::Precondition(reason));
        match self {
            Theorem::P4 | Theorem::TwoR => {
                if d < 4 || d % 2 == 1 {
                    return fail(format!("theorem {} needs even d ≥ 4, got d = {d}", self.name()));
                }
            }
            Theorem::Odd => {
                if d < 7 || d.is_multiple_of(2) {
                    return fail(format!("theorem odd needs odd d ≥ 7, got d = {d}"));
                }
                if field.p() % 4 != 3 {
                    return fail(format!("theorem odd needs p ≡ 3 mod 4, got q = {}", field.q()));
                }
                if (field.l() as usize * (d - 1)).is_multiple_of(4) {
                    return fail(format!(
                        "theorem odd needs l(d−1) ≢ 0 mod 4, got q = {}, d = {d}",
                        field.q()
                    ));
                }
            }
        }
        Ok(())
    }

    /// (sub-endpoint, endpoint) pairs at which the H witness is probed.
    pub fn h_probe(self, d: usize, delta: f64) -> Option<((f64, f64), (f64, f64))> {
        let n = subspace_dimension(d).ok()?;
        match self {
            Theorem::P4 => {
                let p0 = p4_endpoint(d);
                Some(((p0 - delta, 4.0), (p0, 4.0)))
            }
            Theorem::TwoR => {
                let r_nec = subspace_r_threshold(d, n, 2.0);
                Some(((2.0, r_nec - delta), (2.0, r2_endpoint(d))))
            }
            Theorem::Odd => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub q: u64,
    pub d: usize,
    pub p: f64,
    pub r: f64,
    pub estimate: f64,
    pub witness_kind: String,
    pub witness_family: String,
    pub method: String,
    pub characteristic_best: f64,
    pub evaluations: u64,
    pub budget_exhausted: bool,
    pub slope_so_far: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HProbeRow {
    pub q: u64,
    pub sub_p: f64,
    pub sub_r: f64,
    pub sub_ratio: f64,
    pub endpoint_p: f64,
    pub endpoint_r: f64,
    pub endpoint_ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepOutcome {
    pub theorem: Theorem,
    pub d: usize,
    pub rows: Vec<SweepRow>,
    pub probes: Vec<HProbeRow>,
    /// Largest log-log slope of the estimate against q over the endpoint pairs.
    pub endpoint_slope: Option<f64>,
    pub max_estimate: f64,
    pub probe_sub_slope: Option<f64>,
    /// max/min of the H ratio at the endpoint across q.
    pub probe_endpoint_spread: Option<f64>,
    pub warnings: Vec<String>,
}

/// Endpoint estimates for each field, plus the H-witness probe below and at
/// the endpoint. Preconditions and the enumeration cap are checked for
/// every field before any work starts.
pub fn theorem_endpoint_sweep(
    theorem: Theorem,
    fields: &[FieldSpec],
    d: usize,
    cfg: &SearchConfig,
    delta: f64,
    cap: u128,
) -> Result<SweepOutcome> {
    for f in fields {
        theorem.check(f, d)?;
        check_cap(f, d, cap)?;
    }
    let mut fields = fields.to_vec();
    fields.sort_by_key(|f| f.q());
    let pairs = theorem.endpoints(d);
    let mut rows = Vec::new();
    let mut probes = Vec::new();
    let mut warnings = Vec::new();
    let probe = theorem.h_probe(d, delta);
    for f in &fields {
        let space = FourierSpace::new(f, d, cap)?;
        let op = space.operator();
        for &(p, r) in &pairs {
            let est = estimate_rstar(&op, p, r, cfg)?;
            if est.budget_exhausted {
                warnings.push(format!("q = {}: budget exhausted at (p, r) = ({p}, {r})", f.q()));
            }
            let (xs, ys): (Vec<f64>, Vec<f64>) = rows
                .iter()
                .filter(|row: &&SweepRow| row.p == p && row.r == r)
                .map(|row| (row.q as f64, row.estimate))
                .chain(std::iter::once((f.q() as f64, est.estimate)))
                .unzip();
            rows.push(SweepRow {
                q: f.q() as u64,
                d,
                p,
                r,
                estimate: est.estimate,
                witness_kind: est.witness.kind().into(),
                witness_family: est.witness.family(),
                method: est.method.name().into(),
                characteristic_best: est.characteristic_best,
                evaluations: est.evaluations,
                budget_exhausted: est.budget_exhausted,
                slope_so_far: loglog_slope(&xs, &ys),
            });
        }
        match probe {
            Some(((sp, sr), (ep, er))) => match (h_witness_ratio(&space, sp, sr)?, h_witness_ratio(&space, ep, er)?) {
                (Some(sub), Some(end)) => probes.push(HProbeRow {
                    q: f.q() as u64,
                    sub_p: sp,
                    sub_r: sr,
                    sub_ratio: sub,
                    endpoint_p: ep,
                    endpoint_r: er,
                    endpoint_ratio: end,
                }),
                _ => warnings.push(format!("q = {}: −1 is not a square, no H witness", f.q())),
            },
            None => warnings.push(format!("q = {}: sharpness probe not available for theorem {}", f.q(), theorem.name())),
        }
    }
    let endpoint_slope = pairs
        .iter()
        .filter_map(|&(p, r)| {
            let (xs, ys): (Vec<f64>, Vec<f64>) = rows
                .iter()
                .filter(|row| row.p == p && row.r == r)
                .map(|row| (row.q as f64, row.estimate))
                .unzip();
            loglog_slope(&xs, &ys)
        })
        .reduce(f64::max);
    let max_estimate = rows.iter().map(|r| r.estimate).fold(f64::NEG_INFINITY, f64::max);
    let qs: Vec<f64> = probes.iter().map(|p| p.q as f64).collect();
    let subs: Vec<f64> = probes.iter().map(|p| p.sub_ratio).collect();
    let ends: Vec<f64> = probes.iter().map(|p| p.endpoint_ratio).collect();
    let probe_endpoint_spread = (!ends.is_empty()).then(|| {
        ends.iter().cloned().fold(f64::NEG_INFINITY, f64::max) / ends.iter().cloned().fold(f64::INFINITY, f64::min)
    });
    Ok(SweepOutcome {
        theorem,
        d,
        rows,
        probes,
        endpoint_slope,
        max_estimate,
        probe_sub_slope: loglog_slope(&qs, &subs),
        probe_endpoint_spread,
        warnings,
    })
}
