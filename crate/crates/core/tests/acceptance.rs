//! Acceptance suite. Each test prints one `criterion N ...: PASS|FAIL` line
//! to the real stdout, so the lines appear even when output is captured.

use std::io::Write;
use std::process::Command;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

use fqlab::characters::{explicit_gauss_value, CharacterTable};
use fqlab::energy::{
    energy_survey, lambda4, lambda4_bruteforce, l4_norm_via_energy, proof_trace_terms, regime_sizes,
    sample_subset, Branch, Parity, SurveyRow,
};
use fqlab::finite_field::{odd_prime_powers_up_to, FieldElement, FieldSpec};
use fqlab::fourier::{norm_grid, FourierSpace, GridFunction, Measure, SurfaceFunction};
use fqlab::geometry::{build_subspace_h, Paraboloid, SubsetOfS, DEFAULT_ENUMERATION_CAP};
use fqlab::norms_lab::{h_witness_ratio, kernel, kernel_transform_identity, loglog_slope, p4_endpoint, ratio, stein_tomas_checks};
use fqlab::seeding::{rng_for, tag};

const SEED: u64 = 20_240_601;

fn report(n: u32, name: &str, ok: bool, detail: String) {
    let line = format!(
        "criterion {n:>2} {name}: {} ({detail})\n",
        if ok { "PASS" } else { "FAIL" }
    );
    let mut out = std::io::stdout().lock();
    out.write_all(line.as_bytes()).unwrap();
    out.flush().unwrap();
    assert!(ok, "{}", line.trim_end());
}

fn field(q: u64) -> FieldSpec {
    FieldSpec::parse(&q.to_string()).unwrap()
}

fn space(q: u64, d: usize) -> FourierSpace {
    FourierSpace::new(&field(q), d, DEFAULT_ENUMERATION_CAP).unwrap()
}

fn random_values<R: Rng>(rng: &mut R, n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect()
}

fn random_vector<R: Rng>(f: &FieldSpec, rng: &mut R, k: usize) -> Vec<FieldElement> {
    (0..k).map(|_| f.element(rng.gen_range(0..f.q())).unwrap()).collect()
}

fn all_vectors(f: &FieldSpec, k: usize) -> Vec<Vec<FieldElement>> {
    let q = f.q() as usize;
    (0..q.pow(k as u32))
        .map(|mut i| {
            (0..k)
                .map(|_| {
                    let e = f.element((i % q) as u32).unwrap();
                    i /= q;
                    e
                })
                .collect()
        })
        .collect()
}

#[test]
fn criterion_01_gauss_sums() {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let qs = odd_prime_powers_up_to(121);
    let expected: Vec<u64> = (3..=121u64)
        .filter(|&n| {
            let p = (2..=n).find(|p| n % p == 0).unwrap();
            let mut m = n;
            while m % p == 0 {
                m /= p;
            }
            p != 2 && m == 1
        })
        .collect();
    for &q in &qs {
        let f = field(q);
        let chars = CharacterTable::new(&f);
        worst = worst.max((chars.gauss_sum(f.one()) - explicit_gauss_value(&f)).norm());
    }
    let elapsed = start.elapsed();
    report(
        1,
        "gauss sums match explicit values",
        worst < 1e-9 && elapsed < Duration::from_secs(1) && qs == expected,
        format!("{} fields, max diff {worst:.2e}, {elapsed:?}", qs.len()),
    );
}

#[test]
fn criterion_02_sigma_inverse_closed_form() {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut points = 0;
    for q in [3u64, 5, 7, 9] {
        for d in [2usize, 3, 4] {
            if q.pow(d as u32) > 1_000_000 {
                continue;
            }
            let sp = space(q, d);
            let one = SurfaceFunction::constant(q, d, Complex64::new(1.0, 0.0));
            let ext = sp.extend(&one).unwrap();
            for i in 0..sp.grid_len() {
                let closed = sp.sigma_inverse_closed_form(sp.grid_point(i));
                worst = worst.max((closed - ext.values[i]).norm());
                points += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    report(
        2,
        "extension of the constant matches its closed form",
        worst < 1e-8 && elapsed < Duration::from_secs(60),
        format!("{points} points, max diff {worst:.2e}, {elapsed:?}"),
    );
}

#[test]
fn criterion_03_completed_square_sums() {
    let mut worst: f64 = 0.0;
    let (mut exhaustive, mut sampled) = (0usize, 0usize);
    for q in [3u64, 5, 7, 9, 11, 13, 25, 27] {
        let f = field(q);
        let chars = CharacterTable::new(&f);
        let ts: Vec<FieldElement> = f.nonzero_elements().collect();
        for k in 1..=4usize {
            if q.pow(k as u32) <= 10_000 {
                let betas = all_vectors(&f, k);
                let w = betas
                    .par_iter()
                    .map(|beta| {
                        ts.iter()
                            .map(|&t| chars.completed_square_sum(t, beta).unwrap().discrepancy())
                            .fold(0.0, f64::max)
                    })
                    .reduce(|| 0.0, f64::max);
                worst = worst.max(w);
                exhaustive += betas.len() * ts.len();
            } else {
                let w = (0..1000u64)
                    .into_par_iter()
                    .map(|i| {
                        let mut rng = rng_for(SEED, &[q, k as u64, tag("completed_square"), i]);
                        let t = ts[rng.gen_range(0..ts.len())];
                        let beta = random_vector(&f, &mut rng, k);
                        chars.completed_square_sum(t, &beta).unwrap().discrepancy()
                    })
                    .reduce(|| 0.0, f64::max);
                worst = worst.max(w);
                sampled += 1000;
            }
        }
    }
    report(
        3,
        "completed-square sums match the closed form",
        worst < 1e-9,
        format!("{exhaustive} exhaustive + {sampled} random cases, max diff {worst:.2e}"),
    );
}

#[test]
fn criterion_04_l2_identity_and_plancherel() {
    let mut worst: f64 = 0.0;
    let mut configs = 0;
    for q in [3u64, 5, 7, 9] {
        for d in [2usize, 3, 4] {
            if q.pow(2 * d as u32) > 1_000_000 {
                continue;
            }
            configs += 1;
            let sp = space(q, d);
            let op = sp.operator();
            let w = (0..100u64)
                .into_par_iter()
                .map(|i| {
                    let mut rng = rng_for(SEED, &[q, d as u64, tag("l2"), i]);
                    let f = SurfaceFunction::new(q, d, random_values(&mut rng, sp.surface_len())).unwrap();
                    let (lhs, rhs) = sp.l2_identity_check(&f).unwrap();
                    let ratio_err = (ratio(&op, &f, 2.0, 2.0).unwrap() - (q as f64).sqrt()).abs();
                    let g = GridFunction::new(q, d, random_values(&mut rng, sp.grid_len())).unwrap();
                    let ghat = sp.hat(&g).unwrap();
                    let plancherel = norm_grid(&ghat, 2.0, Measure::Dm).unwrap() / norm_grid(&g, 2.0, Measure::Dx).unwrap();
                    ((lhs - rhs).abs() / rhs).max(ratio_err).max((plancherel - 1.0).abs())
                })
                .reduce(|| 0.0, f64::max);
            worst = worst.max(w);
        }
    }
    report(
        4,
        "L2 identity, Plancherel and ratio(f, 2, 2) = sqrt q",
        worst < 1e-9,
        format!("{configs} configurations x 100 functions, max error {worst:.2e}"),
    );
}

#[test]
fn criterion_05_energy_oracle() {
    let mut checked = 0usize;
    let mut mismatches = 0usize;
    for q in [3u64, 5] {
        for d in [2usize, 3, 4] {
            let par = Paraboloid::new(&field(q), d).unwrap();
            let n = par.size();
            let subsets: Vec<SubsetOfS> = if n <= 12 {
                (1..1u64 << n).map(|m| SubsetOfS::from_mask(n, m).unwrap()).collect()
            } else {
                let mut v: Vec<SubsetOfS> = (0..n).map(|a| SubsetOfS::singleton(n, a).unwrap()).collect();
                for a in 0..n {
                    for b in a + 1..n {
                        v.push(SubsetOfS::new(n, [a, b]).unwrap());
                    }
                }
                for size in 3..=12u64 {
                    for i in 0..100u64 {
                        let mut rng = rng_for(SEED, &[q, d as u64, tag("energy_oracle"), size, i]);
                        v.push(sample_subset(&par, size, &mut rng).unwrap());
                    }
                }
                v
            };
            checked += subsets.len();
            mismatches += subsets
                .par_iter()
                .filter(|e| lambda4(&par, e) != lambda4_bruteforce(&par, e))
                .count();
        }
    }
    let par = Paraboloid::new(&field(3), 2).unwrap();
    let frozen = lambda4(&par, &SubsetOfS::full(3));

    let mut worst: f64 = 0.0;
    for i in 0..500u64 {
        let (q, d) = [(3u64, 2usize), (3, 3), (3, 4), (5, 2), (5, 3), (5, 4)][i as usize % 6];
        let sp = space(q, d);
        let par = sp.variety().paraboloid();
        let mut rng = rng_for(SEED, &[q, d as u64, tag("l4"), i]);
        let size = rng.gen_range(1..=par.size());
        let e = sample_subset(par, size, &mut rng).unwrap();
        let direct = norm_grid(&sp.extend_subset(&e), 4.0, Measure::Dm).unwrap();
        worst = worst.max((direct - l4_norm_via_energy(par, &e)).abs());
    }
    report(
        5,
        "energy against brute force and the L4 norm",
        mismatches == 0 && frozen == 15 && worst < 1e-9,
        format!("{checked} subsets, {mismatches} mismatches, full S at q=3 d=2 gives {frozen}, L4 max diff {worst:.2e}"),
    );
}

struct Monitor {
    qs: Vec<f64>,
    maxima: Vec<f64>,
    /// Largest ratio among subsets whose bound is not |E|³.
    nontrivial: Vec<f64>,
    rows: usize,
    warnings: usize,
}

fn monitor(d: usize, qs: &[u64], samples: usize, max_size: u64, structured: bool) -> Monitor {
    let parity = Parity::of(d);
    let mut m = Monitor {
        qs: Vec::new(),
        maxima: Vec::new(),
        nontrivial: Vec::new(),
        rows: 0,
        warnings: 0,
    };
    for &q in qs {
        let par = Paraboloid::new(&field(q), d).unwrap();
        let sizes = regime_sizes(&par, max_size);
        let mut rows: Vec<SurveyRow> = energy_survey(&par, parity, &sizes, samples, SEED, max_size).unwrap();
        if !structured {
            rows.retain(|r| r.family == "random");
        }
        m.rows += rows.len();
        m.warnings += rows.iter().map(|r| r.report.warnings.len()).sum::<usize>();
        m.qs.push(q as f64);
        m.maxima.push(rows.iter().map(|r| r.report.ratio).fold(0.0, f64::max));
        m.nontrivial.push(
            rows.iter()
                .filter(|r| r.report.branch != Branch::Trivial)
                .map(|r| r.report.ratio)
                .fold(0.0, f64::max),
        );
    }
    m
}

#[test]
fn criterion_06_even_energy_constant() {
    let qs = [3, 5, 7, 9, 13];
    let m = monitor(4, &qs, 1000, u64::MAX, true);
    let max = m.maxima.iter().cloned().fold(0.0, f64::max);
    let slope = loglog_slope(&m.qs, &m.maxima).unwrap();
    report(
        6,
        "even-d energy bound constant",
        max <= 16.0 && slope <= 0.1 && m.warnings == 0 && m.rows >= 1000 * qs.len(),
        format!(
            "{} subsets, max ratios {:?}, non-trivial branch {:.4?}, slope {slope:.4}",
            m.rows, m.maxima, m.nontrivial
        ),
    );
}

#[test]
fn criterion_07_odd_energy_constant() {
    let qs = [3, 27];
    let m = monitor(7, &qs, 1000, 2048, false);
    let max = m.maxima.iter().cloned().fold(0.0, f64::max);
    let slope = loglog_slope(&m.qs, &m.maxima).unwrap();
    report(
        7,
        "odd-d energy bound constant",
        max <= 16.0 && slope <= 0.1 && m.warnings == 0 && m.rows >= 1000 * qs.len(),
        format!(
            "{} subsets, max ratios {:?}, non-trivial branch {:.4?}, slope {slope:.4}",
            m.rows, m.maxima, m.nontrivial
        ),
    );
}

#[test]
fn criterion_08_sharpness_of_the_p_endpoint() {
    let d = 4;
    let p0 = p4_endpoint(d);
    let qs = [5u64, 13, 17];
    let (mut below, mut at) = (Vec::new(), Vec::new());
    for &q in &qs {
        let sp = space(q, d);
        below.push(h_witness_ratio(&sp, p0 - 0.1, 4.0).unwrap().unwrap());
        at.push(h_witness_ratio(&sp, p0, 4.0).unwrap().unwrap());
    }
    let xs: Vec<f64> = qs.iter().map(|&q| q as f64).collect();
    let slope = loglog_slope(&xs, &below).unwrap();
    let increasing = below.windows(2).all(|w| w[1] > w[0]);
    let spread = at.iter().cloned().fold(0.0, f64::max) / at.iter().cloned().fold(f64::INFINITY, f64::min);
    let h_sizes: Vec<usize> = qs
        .iter()
        .map(|&q| build_subspace_h(&field(q), d).unwrap().unwrap().len())
        .collect();
    report(
        8,
        "subspace witness grows below the p endpoint",
        increasing && slope >= 0.05 && spread <= 4.0,
        format!("|H| {h_sizes:?}, below {below:?}, slope {slope:.4}, endpoint spread {spread:.4}"),
    );
}

#[test]
fn criterion_09_kernel_estimates() {
    let mut e1_ok = true;
    let mut worst_ratio: f64 = 0.0;
    let mut khat: f64 = 0.0;
    for q in [3u64, 5] {
        let d = 4;
        let sp = space(q, d);
        let k = kernel(&sp);
        khat = khat.max(kernel_transform_identity(&sp, &k).unwrap().counting);
        for i in 0..200u64 {
            let mut rng = rng_for(SEED, &[q, d as u64, tag("e1"), i]);
            let g = GridFunction::new(q, d, random_values(&mut rng, sp.grid_len())).unwrap();
            let c = stein_tomas_checks(&sp, &k, &g).unwrap();
            e1_ok &= c.e1_holds;
            worst_ratio = worst_ratio.max(c.e1_lhs / c.e1_rhs);
        }
    }
    report(
        9,
        "kernel L2 estimate and transform identity",
        e1_ok && khat < 1e-9,
        format!("400 functions, max |g*K|/(q|g|) {worst_ratio:.4}, transform max diff {khat:.2e}"),
    );
}

#[test]
fn criterion_10_proof_trace() {
    let mut i_ok = 0;
    let mut worst: f64 = 0.0;
    let mut sign: f64 = 0.0;
    let mut cases = 0;
    for (q, d, size) in [(3u64, 4usize, 5u64), (5, 4, 5), (3, 7, 4)] {
        let sp = space(q, d);
        let par = sp.variety().paraboloid();
        let results: Vec<_> = (0..100u64)
            .into_par_iter()
            .map(|i| {
                let mut rng = rng_for(SEED, &[q, d as u64, tag("trace"), i]);
                let e = sample_subset(par, size, &mut rng).unwrap();
                let x = e.members()[rng.gen_range(0..e.len())];
                proof_trace_terms(sp.chars(), par, &e, x).unwrap()
            })
            .collect();
        for t in results {
            cases += 1;
            i_ok += (t.i_exact() && t.split_exact()) as usize;
            worst = worst.max(t.ii_closed_error()).max(t.ii_gamma_error());
            if d == 7 {
                sign = sign.max(t.odd_sign_error().expect("odd hypotheses hold at q=3, d=7"));
            }
        }
    }
    report(
        10,
        "energy argument terms",
        i_ok == cases && worst < 1e-8 && sign < 1e-8,
        format!("{cases} cases, {i_ok} exact, II max diff {worst:.2e}, sign check diff {sign:.2e}"),
    );
}

#[test]
fn criterion_11_sweep_is_reproducible() {
    let exe = env!("CARGO_BIN_EXE_fqlab");
    let run = || {
        let start = Instant::now();
        let out = Command::new(exe)
            .args(["sweep", "--q", "3,5", "--d", "4", "--seed", "7"])
            .env_remove("FQLAB_OUT_DIR")
            .output()
            .unwrap();
        (out, start.elapsed())
    };
    let strip = |s: &[u8]| -> String {
        String::from_utf8_lossy(s)
            .lines()
            .filter(|l| !l.starts_with("# timestamp:"))
            .collect::<Vec<_>>()
            .join("\n")
    };
    let (a, ta) = run();
    let (b, tb) = run();
    let same = strip(&a.stdout) == strip(&b.stdout);
    let limit = Duration::from_secs(600);
    report(
        11,
        "sweep determinism and runtime",
        a.status.success() && b.status.success() && same && !a.stdout.is_empty() && ta < limit && tb < limit,
        format!("exit {:?}/{:?}, identical {same}, {ta:?} and {tb:?}", a.status.code(), b.status.code()),
    );
}
