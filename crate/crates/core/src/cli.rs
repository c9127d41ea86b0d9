//! Experiment runner: configuration, dispatch to the numerical modules, and
//! self-describing CSV/JSON reports with per-row verdicts.

use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::characters::{explicit_gauss_value, CharacterTable};
use crate::energy::{energy_survey, lemma_preconditions, proof_trace_terms, regime_sizes, sample_subset, Parity};
use crate::error::{Error, Result};
use crate::finite_field::FieldSpec;
use crate::fourier::{FourierSpace, GridFunction, SurfaceFunction};
use crate::geometry::{check_cap, Paraboloid, DEFAULT_ENUMERATION_CAP};
use crate::norms_lab::{
    kernel, kernel_transform_identity, loglog_slope, ratio, stein_tomas_checks, theorem_endpoint_sweep,
    SearchConfig, SweepOutcome, Theorem,
};
use crate::seeding::{rng_for, tag};

pub const OUT_DIR_VAR: &str = "FQLAB_OUT_DIR";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Subcommand {
    Gauss,
    #[serde(rename = "sigma-check")]
    SigmaCheck,
    Energy,
    Norms,
    Sweep,
}

impl Subcommand {
    pub fn name(self) -> &'static str {
        match self {
            Subcommand::Gauss => "gauss",
            Subcommand::SigmaCheck => "sigma-check",
            Subcommand::Energy => "energy",
            Subcommand::Norms => "norms",
            Subcommand::Sweep => "sweep",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }

    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()? {
            "csv" => Some(Format::Csv),
            "json" => Some(Format::Json),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Fields as "p^l" or prime-power strings.
    pub fields: Vec<String>,
    pub dims: Vec<usize>,
    pub seed: u64,
    pub format: Format,
    /// Largest q^d any subcommand may enumerate.
    pub cap: u128,
    /// Energy bound parity; defaults to the parity of d.
    pub parity: Option<Parity>,
    /// Random subsets per (q, d) for the energy survey.
    pub samples: usize,
    /// Subset sizes |E| = round(q^e) for each listed e; empty means the
    /// regime-boundary sizes.
    pub densities: Vec<f64>,
    pub max_subset: u64,
    pub theorem: Option<Theorem>,
    pub search: SearchConfig,
    /// Offset below the endpoint for the sharpness probe.
    pub delta: f64,
    /// Random functions per (q, d) for the L² and kernel checks.
    pub functions: usize,
    pub trace_cases: usize,
    pub tolerance: f64,
    pub sigma_tolerance: f64,
    pub desk_constant: f64,
    pub slope_limit: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            fields: vec!["3".into()],
            dims: vec![4],
            seed: 0,
            format: Format::Csv,
            cap: DEFAULT_ENUMERATION_CAP,
            parity: None,
            samples: 200,
            densities: Vec::new(),
            max_subset: 2048,
            theorem: None,
            search: SearchConfig::default(),
            delta: 0.1,
            functions: 20,
            trace_cases: 4,
            tolerance: 1e-9,
            sigma_tolerance: 1e-8,
            desk_constant: 16.0,
            slope_limit: 0.1,
        }
    }
}

fn config_error(field: &str, reason: impl Into<String>) -> Error {
    Error::Config {
        field: field.into(),
        reason: reason.into(),
    }
}

impl ExperimentConfig {
    /// Parses the field list and checks every (q, d) against the cap.
    pub fn validate(&self, sub: Subcommand) -> Result<Vec<FieldSpec>> {
        if self.fields.is_empty() {
            return Err(config_error("q", "no fields given"));
        }
        let mut fields = Vec::new();
        for text in &self.fields {
            let f = FieldSpec::parse(text).map_err(|e| config_error("q", e.to_string()))?;
            if f.p() == 2 {
                return Err(config_error("q", format!("{text}: characteristic must be odd")));
            }
            fields.push(f);
        }
        fields.sort_by_key(|f| f.q());
        fields.dedup_by_key(|f| f.q());
        if sub != Subcommand::Gauss {
            if self.dims.is_empty() {
                return Err(config_error("d", "no dimensions given"));
            }
            if let Some(&d) = self.dims.iter().find(|&&d| d < 2) {
                return Err(config_error("d", format!("d = {d}, need d ≥ 2")));
            }
            for f in &fields {
                for &d in &self.dims {
                    check_cap(f, d, self.cap)?;
                }
            }
        }
        for (name, v) in [
            ("tolerance", self.tolerance),
            ("sigma-tolerance", self.sigma_tolerance),
            ("desk-constant", self.desk_constant),
            ("delta", self.delta),
        ] {
            if v.is_nan() || v <= 0.0 {
                return Err(config_error(name, format!("must be positive, got {v}")));
            }
        }
        if self.search.budget == 0 {
            return Err(config_error("budget", "must be positive"));
        }
        if sub == Subcommand::Norms {
            let theorem = self
                .theorem
                .ok_or_else(|| config_error("theorem", "norms needs --theorem p4, 2r or odd"))?;
            for f in &fields {
                for &d in &self.dims {
                    theorem.check(f, d).map_err(|e| config_error("theorem", e.to_string()))?;
                }
            }
        }
        Ok(fields)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Warn,
    Fail,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "pass",
            Verdict::Warn => "warn",
            Verdict::Fail => "fail",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Cell {
    Int(i128),
    Float(f64),
    Text(String),
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Int(v) => write!(f, "{v}"),
            Cell::Float(v) => write!(f, "{v:e}"),
            Cell::Text(s) => f.write_str(s),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v as i128)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i128)
    }
}

impl From<u128> for Cell {
    fn from(v: u128) -> Self {
        Cell::Int(v as i128)
    }
}

impl From<i128> for Cell {
    fn from(v: i128) -> Self {
        Cell::Int(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.into())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Text(String::new()), Cell::Float)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Row {
    pub cells: Vec<Cell>,
    pub verdict: Verdict,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Row>,
}

impl Table {
    fn new(name: &str, columns: &[&str]) -> Self {
        Table {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, cells: Vec<Cell>, verdict: Verdict) {
        debug_assert_eq!(cells.len(), self.columns.len());
        self.rows.push(Row { cells, verdict });
    }

    /// Index of a named column.
    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FieldModulus {
    pub field: String,
    pub q: u32,
    /// Coefficients c_0, …, c_l of the defining polynomial.
    pub modulus: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Header {
    pub tool: String,
    pub version: String,
    pub subcommand: Subcommand,
    pub timestamp: u64,
    pub seed: u64,
    pub config: ExperimentConfig,
    pub moduli: Vec<FieldModulus>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub header: Header,
    pub tables: Vec<Table>,
    pub notes: Vec<String>,
}

impl Report {
    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn worst(&self) -> Verdict {
        self.tables
            .iter()
            .flat_map(|t| t.rows.iter().map(|r| r.verdict))
            .max()
            .unwrap_or(Verdict::Pass)
    }

    pub fn count(&self, verdict: Verdict) -> usize {
        self.tables
            .iter()
            .flat_map(|t| &t.rows)
            .filter(|r| r.verdict == verdict)
            .count()
    }

    pub fn exit_code(&self) -> i32 {
        if self.worst() == Verdict::Fail {
            1
        } else {
            0
        }
    }

    pub fn to_csv(&self) -> Result<String> {
        let h = &self.header;
        let mut out = String::new();
        let mut line = |k: &str, v: String| out.push_str(&format!("# {k}: {v}\n"));
        line("tool", h.tool.clone());
        line("version", h.version.clone());
        line("subcommand", h.subcommand.name().into());
        line("timestamp", h.timestamp.to_string());
        line("seed", h.seed.to_string());
        line("config", serde_json::to_string(&h.config)?);
        for m in &h.moduli {
            line(&format!("modulus {}", m.field), format!("{:?}", m.modulus));
        }
        for n in &self.notes {
            line("note", n.clone());
        }
        for t in &self.tables {
            out.push_str(&format!("\n# table: {}\n", t.name));
            let mut w = csv::Writer::from_writer(Vec::new());
            let mut head = t.columns.clone();
            head.push("verdict".into());
            w.write_record(&head)?;
            for r in &t.rows {
                let mut rec: Vec<String> = r.cells.iter().map(|c| c.to_string()).collect();
                rec.push(r.verdict.to_string());
                w.write_record(&rec)?;
            }
            let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
            out.push_str(&String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))?);
        }
        Ok(out)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn render(&self, format: Format) -> Result<String> {
        match format {
            Format::Csv => self.to_csv(),
            Format::Json => self.to_json(),
        }
    }

    pub fn summary(&self) -> String {
        format!(
            "{}: {} pass, {} warn, {} fail",
            self.header.subcommand.name(),
            self.count(Verdict::Pass),
            self.count(Verdict::Warn),
            self.count(Verdict::Fail)
        )
    }
}

/// First free path `<sub>-seed<seed>[-k].<ext>` in `dir`.
pub fn default_output_path(dir: &Path, sub: Subcommand, seed: u64, format: Format) -> PathBuf {
    let stem = format!("{}-seed{seed}", sub.name());
    let mut path = dir.join(format!("{stem}.{}", format.extension()));
    let mut k = 1;
    while path.exists() {
        path = dir.join(format!("{stem}-{k}.{}", format.extension()));
        k += 1;
    }
    path
}

pub fn write_report(report: &Report, path: &Path, format: Format) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    let mut file = fs::File::create(path)?;
    file.write_all(report.render(format)?.as_bytes())?;
    Ok(())
}

fn pass_if(ok: bool) -> Verdict {
    if ok {
        Verdict::Pass
    } else {
        Verdict::Fail
    }
}

fn random_complex<R: Rng>(rng: &mut R, n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect()
}

fn gauss_table(fields: &[FieldSpec], tol: f64) -> Table {
    let mut t = Table::new(
        "gauss",
        &["q", "direct_re", "direct_im", "closed_re", "closed_im", "abs_diff"],
    );
    for f in fields {
        let chars = CharacterTable::new(f);
        let direct = chars.gauss_sum(f.one());
        let closed = explicit_gauss_value(f);
        let diff = (direct - closed).norm();
        t.push(
            vec![
                (f.q() as u64).into(),
                direct.re.into(),
                direct.im.into(),
                closed.re.into(),
                closed.im.into(),
                diff.into(),
            ],
            pass_if(diff < tol),
        );
    }
    t
}

/// max over m of |closed form − direct extension of 𝟙| for one space.
fn sigma_errors(space: &FourierSpace) -> Result<Vec<(usize, Complex64, Complex64)>> {
    let one = SurfaceFunction::constant(space.q(), space.d(), Complex64::new(1.0, 0.0));
    let ext = space.extend(&one)?;
    Ok((0..space.grid_len())
        .map(|i| (i, ext.values[i], space.sigma_inverse_closed_form(space.grid_point(i))))
        .collect())
}

fn grid_label(space: &FourierSpace, idx: usize) -> String {
    let m: Vec<String> = space.grid_point(idx).iter().map(|e| e.index().to_string()).collect();
    m.join(" ")
}

fn sigma_table(spaces: &[FourierSpace], tol: f64) -> Result<Table> {
    let mut t = Table::new(
        "sigma_check",
        &["q", "d", "m", "direct_re", "direct_im", "closed_re", "closed_im", "abs_diff"],
    );
    for space in spaces {
        for (i, direct, closed) in sigma_errors(space)? {
            let diff = (direct - closed).norm();
            t.push(
                vec![
                    space.q().into(),
                    space.d().into(),
                    grid_label(space, i).into(),
                    direct.re.into(),
                    direct.im.into(),
                    closed.re.into(),
                    closed.im.into(),
                    diff.into(),
                ],
                pass_if(diff < tol),
            );
        }
    }
    Ok(t)
}

fn survey_sizes(par: &Paraboloid, cfg: &ExperimentConfig) -> Vec<u64> {
    let limit = par.size().min(cfg.max_subset).max(1);
    if cfg.densities.is_empty() {
        return regime_sizes(par, limit);
    }
    let q = par.q() as f64;
    let mut sizes: Vec<u64> = cfg
        .densities
        .iter()
        .map(|e| (q.powf(*e).round() as u64).clamp(1, limit))
        .collect();
    sizes.dedup();
    sizes
}

struct EnergyTables {
    rows: Table,
    trend: Table,
}

fn energy_tables(fields: &[FieldSpec], cfg: &ExperimentConfig, notes: &mut Vec<String>) -> Result<EnergyTables> {
    let mut rows = Table::new(
        "energy",
        &["q", "d", "family", "size", "lambda4", "bound", "ratio", "branch", "regime"],
    );
    let mut trend = Table::new("energy_trend", &["d", "parity", "qs", "max_ratios", "slope"]);
    for &d in &cfg.dims {
        let parity = cfg.parity.unwrap_or(Parity::of(d));
        let (mut qs, mut maxima) = (Vec::new(), Vec::new());
        let mut admissible = true;
        for f in fields {
            let par = Paraboloid::new(f, d)?;
            let warnings = lemma_preconditions(f, d, parity);
            for w in &warnings {
                notes.push(format!("energy q = {}, d = {d}: {w}", f.q()));
            }
            admissible &= warnings.is_empty();
            let sizes = survey_sizes(&par, cfg);
            let survey = energy_survey(&par, parity, &sizes, cfg.samples, cfg.seed, cfg.max_subset)?;
            let mut best: f64 = 0.0;
            for row in survey {
                let r = &row.report;
                best = best.max(r.ratio);
                let verdict = if r.ratio <= cfg.desk_constant {
                    Verdict::Pass
                } else if warnings.is_empty() {
                    Verdict::Fail
                } else {
                    Verdict::Warn
                };
                rows.push(
                    vec![
                        (f.q() as u64).into(),
                        d.into(),
                        row.family.into(),
                        r.size.into(),
                        r.lambda4.into(),
                        r.bound.into(),
                        r.ratio.into(),
                        r.branch.to_string().into(),
                        r.regime.to_string().into(),
                    ],
                    verdict,
                );
            }
            qs.push(f.q() as f64);
            maxima.push(best);
        }
        let slope = loglog_slope(&qs, &maxima);
        let verdict = match slope {
            Some(s) if s > cfg.slope_limit => {
                if admissible {
                    Verdict::Fail
                } else {
                    Verdict::Warn
                }
            }
            _ => Verdict::Pass,
        };
        let join = |v: &[f64]| v.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(" ");
        trend.push(
            vec![d.into(), parity.to_string().into(), join(&qs).into(), join(&maxima).into(), slope.into()],
            verdict,
        );
    }
    Ok(EnergyTables { rows, trend })
}

struct NormTables {
    rows: Table,
    probes: Table,
    trend: Table,
}

impl NormTables {
    fn new() -> Self {
        NormTables {
            rows: Table::new(
                "norms",
                &[
                    "theorem",
                    "q",
                    "d",
                    "p",
                    "r",
                    "estimate",
                    "witness_kind",
                    "witness_family",
                    "method",
                    "restricted_type_best",
                    "evaluations",
                    "budget_exhausted",
                    "slope_so_far",
                ],
            ),
            probes: Table::new(
                "h_probe",
                &["theorem", "q", "d", "sub_p", "sub_r", "sub_ratio", "endpoint_p", "endpoint_r", "endpoint_ratio"],
            ),
            trend: Table::new(
                "norms_trend",
                &["theorem", "d", "endpoint_slope", "max_estimate", "probe_sub_slope", "probe_endpoint_spread"],
            ),
        }
    }

    fn add(&mut self, out: &SweepOutcome, cfg: &ExperimentConfig, notes: &mut Vec<String>) {
        let name = out.theorem.name();
        for r in &out.rows {
            let verdict = if r.budget_exhausted { Verdict::Warn } else { Verdict::Pass };
            self.rows.push(
                vec![
                    name.into(),
                    r.q.into(),
                    r.d.into(),
                    r.p.into(),
                    r.r.into(),
                    r.estimate.into(),
                    r.witness_kind.clone().into(),
                    r.witness_family.clone().into(),
                    r.method.clone().into(),
                    r.characteristic_best.into(),
                    r.evaluations.into(),
                    r.budget_exhausted.to_string().into(),
                    r.slope_so_far.into(),
                ],
                verdict,
            );
        }
        for p in &out.probes {
            self.probes.push(
                vec![
                    name.into(),
                    p.q.into(),
                    out.d.into(),
                    p.sub_p.into(),
                    p.sub_r.into(),
                    p.sub_ratio.into(),
                    p.endpoint_p.into(),
                    p.endpoint_r.into(),
                    p.endpoint_ratio.into(),
                ],
                Verdict::Pass,
            );
        }
        notes.extend(out.warnings.iter().map(|w| format!("{name}: {w}")));
        let growth = out.endpoint_slope.is_some_and(|s| s > cfg.slope_limit);
        let not_sharp = out.probe_sub_slope.is_some_and(|s| s <= 0.0);
        let verdict = if growth || not_sharp { Verdict::Warn } else { Verdict::Pass };
        self.trend.push(
            vec![
                name.into(),
                out.d.into(),
                out.endpoint_slope.into(),
                out.max_estimate.into(),
                out.probe_sub_slope.into(),
                out.probe_endpoint_spread.into(),
            ],
            verdict,
        );
    }
}

fn l2_table(spaces: &[FourierSpace], cfg: &ExperimentConfig) -> Result<Table> {
    let mut t = Table::new("l2_identity", &["q", "d", "functions", "max_rel_error", "max_ratio_error"]);
    for space in spaces {
        let (q, d) = (space.q(), space.d());
        let op = space.operator();
        let (mut rel, mut rat): (f64, f64) = (0.0, 0.0);
        for i in 0..cfg.functions {
            let mut rng = rng_for(cfg.seed, &[q, d as u64, tag("l2"), i as u64]);
            let f = SurfaceFunction::new(q, d, random_complex(&mut rng, space.surface_len()))?;
            let (lhs, rhs) = space.l2_identity_check(&f)?;
            rel = rel.max((lhs - rhs).abs() / rhs);
            rat = rat.max((ratio(&op, &f, 2.0, 2.0)? - (q as f64).sqrt()).abs());
        }
        t.push(
            vec![q.into(), d.into(), cfg.functions.into(), rel.into(), rat.into()],
            pass_if(rel < cfg.tolerance && rat < cfg.tolerance),
        );
    }
    Ok(t)
}

fn kernel_table(spaces: &[FourierSpace], cfg: &ExperimentConfig) -> Result<Table> {
    let mut t = Table::new(
        "kernel",
        &["q", "d", "functions", "khat_error", "e1_max_ratio", "e2_max_ratio"],
    );
    for space in spaces {
        let (q, d) = (space.q(), space.d());
        let k = kernel(space);
        let id = kernel_transform_identity(space, &k)?;
        let (mut e1, mut e2): (f64, Option<f64>) = (0.0, None);
        let mut holds = true;
        for i in 0..cfg.functions {
            let mut rng = rng_for(cfg.seed, &[q, d as u64, tag("kernel"), i as u64]);
            let g = GridFunction::new(q, d, random_complex(&mut rng, space.grid_len()))?;
            let c = stein_tomas_checks(space, &k, &g)?;
            holds &= c.e1_holds;
            e1 = e1.max(c.e1_lhs / c.e1_rhs);
            e2 = match (e2, c.e2_ratio) {
                (Some(a), Some(b)) => Some(a.max(b)),
                (a, b) => a.or(b),
            };
        }
        t.push(
            vec![q.into(), d.into(), cfg.functions.into(), id.counting.into(), e1.into(), e2.into()],
            pass_if(holds && id.counting < cfg.tolerance * space.grid_len() as f64),
        );
    }
    Ok(t)
}

fn trace_table(spaces: &[FourierSpace], cfg: &ExperimentConfig) -> Result<Table> {
    let mut t = Table::new(
        "proof_trace",
        &["q", "d", "case", "size", "i_direct", "i_formula", "ii_direct", "ii_closed_error", "ii_gamma_error", "odd_sign_error"],
    );
    for space in spaces {
        let par = space.variety().paraboloid();
        let (q, d) = (space.q(), space.d());
        let size = par.size().min(4);
        for i in 0..cfg.trace_cases {
            let mut rng = rng_for(cfg.seed, &[q, d as u64, tag("trace"), i as u64]);
            let e = sample_subset(par, size, &mut rng)?;
            let x = e.members()[rng.gen_range(0..e.len())];
            let tr = proof_trace_terms(space.chars(), par, &e, x)?;
            let tol = cfg.sigma_tolerance * (q as f64).powi(d as i32);
            let ok = tr.i_exact()
                && tr.split_exact()
                && tr.ii_closed_error() < tol
                && tr.ii_gamma_error() < tol
                && tr.odd_sign_error().is_none_or(|v| v < cfg.sigma_tolerance);
            t.push(
                vec![
                    q.into(),
                    d.into(),
                    i.into(),
                    tr.size.into(),
                    tr.i_direct.into(),
                    tr.i_formula.into(),
                    tr.ii_direct.into(),
                    tr.ii_closed_error().into(),
                    tr.ii_gamma_error().into(),
                    tr.odd_sign_error().into(),
                ],
                pass_if(ok),
            );
        }
    }
    Ok(t)
}

fn spaces(fields: &[FieldSpec], dims: &[usize], cap: u128) -> Result<Vec<FourierSpace>> {
    let mut out = Vec::new();
    for &d in dims {
        for f in fields {
            out.push(FourierSpace::new(f, d, cap)?);
        }
    }
    Ok(out)
}

fn search_config(cfg: &ExperimentConfig) -> SearchConfig {
    SearchConfig {
        seed: cfg.seed,
        ..cfg.search.clone()
    }
}

/// Runs one subcommand. Configuration problems, including cap violations,
/// are reported before any computation starts.
pub fn run(sub: Subcommand, cfg: &ExperimentConfig) -> Result<Report> {
    run_at(sub, cfg, unix_time())
}

/// `run` with an explicit timestamp.
pub fn run_at(sub: Subcommand, cfg: &ExperimentConfig, timestamp: u64) -> Result<Report> {
    let fields = cfg.validate(sub)?;
    let mut notes = Vec::new();
    let mut tables = Vec::new();
    match sub {
        Subcommand::Gauss => tables.push(gauss_table(&fields, cfg.tolerance)),
        Subcommand::SigmaCheck => {
            tables.push(sigma_table(&spaces(&fields, &cfg.dims, cfg.cap)?, cfg.sigma_tolerance)?)
        }
        Subcommand::Energy => {
            let e = energy_tables(&fields, cfg, &mut notes)?;
            tables.push(e.rows);
            tables.push(e.trend);
        }
        Subcommand::Norms => {
            let theorem = cfg.theorem.expect("validated");
            let mut nt = NormTables::new();
            for &d in &cfg.dims {
                let out = theorem_endpoint_sweep(theorem, &fields, d, &search_config(cfg), cfg.delta, cfg.cap)?;
                nt.add(&out, cfg, &mut notes);
            }
            tables.extend([nt.rows, nt.probes, nt.trend]);
        }
        Subcommand::Sweep => {
            let sp = spaces(&fields, &cfg.dims, cfg.cap)?;
            tables.push(gauss_table(&fields, cfg.tolerance));
            let sigma = sigma_table(&sp, cfg.sigma_tolerance)?;
            tables.push(summarize_sigma(&sigma));
            tables.push(l2_table(&sp, cfg)?);
            let e = energy_tables(&fields, cfg, &mut notes)?;
            tables.push(e.rows);
            tables.push(e.trend);
            tables.push(trace_table(&sp, cfg)?);
            tables.push(kernel_table(&sp, cfg)?);
            let mut nt = NormTables::new();
            for &d in &cfg.dims {
                for theorem in [Theorem::P4, Theorem::TwoR, Theorem::Odd] {
                    let admitted: Vec<FieldSpec> =
                        fields.iter().filter(|f| theorem.check(f, d).is_ok()).cloned().collect();
                    if admitted.is_empty() {
                        continue;
                    }
                    let out = theorem_endpoint_sweep(theorem, &admitted, d, &search_config(cfg), cfg.delta, cfg.cap)?;
                    nt.add(&out, cfg, &mut notes);
                }
            }
            tables.extend([nt.rows, nt.probes, nt.trend]);
        }
    }
    let moduli = fields
        .iter()
        .map(|f| FieldModulus {
            field: f.label(),
            q: f.q(),
            modulus: f.modulus().to_vec(),
        })
        .collect();
    Ok(Report {
        header: Header {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            subcommand: sub,
            timestamp,
            seed: cfg.seed,
            config: cfg.clone(),
            moduli,
        },
        tables,
        notes,
    })
}

/// One row per (q, d) with the largest pointwise error.
fn summarize_sigma(full: &Table) -> Table {
    let mut t = Table::new("sigma_summary", &["q", "d", "points", "max_abs_diff"]);
    let diff_col = full.column("abs_diff").expect("column exists");
    let mut i = 0;
    while i < full.rows.len() {
        let key = (&full.rows[i].cells[0], &full.rows[i].cells[1]);
        let mut j = i;
        let mut worst: f64 = 0.0;
        let mut verdict = Verdict::Pass;
        while j < full.rows.len() && (&full.rows[j].cells[0], &full.rows[j].cells[1]) == key {
            if let Cell::Float(v) = full.rows[j].cells[diff_col] {
                worst = worst.max(v);
            }
            verdict = verdict.max(full.rows[j].verdict);
            j += 1;
        }
        t.push(vec![key.0.clone(), key.1.clone(), (j - i).into(), worst.into()], verdict);
        i = j;
    }
    t
}

fn unix_time() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(fields: &[&str], dims: &[usize]) -> ExperimentConfig {
        ExperimentConfig {
            fields: fields.iter().map(|s| s.to_string()).collect(),
            dims: dims.to_vec(),
            seed: 7,
            samples: 10,
            functions: 3,
            trace_cases: 2,
            search: SearchConfig {
                restarts: 3,
                ..SearchConfig::default()
            },
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn gauss_rows_pass() {
        let r = run_at(Subcommand::Gauss, &cfg(&["3", "5", "7", "9", "11", "13"], &[4]), 0).unwrap();
        let t = r.table("gauss").unwrap();
        assert_eq!(t.rows.len(), 6);
        assert_eq!(r.worst(), Verdict::Pass);
    }

    #[test]
    fn sigma_check_has_one_row_per_point() {
        let r = run_at(Subcommand::SigmaCheck, &cfg(&["3"], &[3]), 0).unwrap();
        assert_eq!(r.table("sigma_check").unwrap().rows.len(), 27);
        assert_eq!(r.exit_code(), 0);
    }

    #[test]
    fn config_errors_name_the_field() {
        let c = cfg(&["6"], &[4]);
        match run(Subcommand::Gauss, &c) {
            Err(Error::Config { field, .. }) => assert_eq!(field, "q"),
            other => panic!("{other:?}"),
        }
        let c = ExperimentConfig {
            cap: 100,
            ..cfg(&["5"], &[4])
        };
        assert!(matches!(run(Subcommand::Energy, &c), Err(Error::CapExceeded { .. })));
        let c = cfg(&["3"], &[5]);
        match run(Subcommand::Norms, &ExperimentConfig { theorem: Some(Theorem::P4), ..c }) {
            Err(Error::Config { field, .. }) => assert_eq!(field, "theorem"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn reports_render_and_reproduce() {
        let c = cfg(&["3"], &[4]);
        let a = run_at(Subcommand::Energy, &c, 1).unwrap();
        let b = run_at(Subcommand::Energy, &c, 1).unwrap();
        assert_eq!(a.to_csv().unwrap(), b.to_csv().unwrap());
        let csv = a.to_csv().unwrap();
        assert!(csv.starts_with("# tool: fqlab\n"));
        assert!(csv.contains("# table: energy\nq,d,family,size,lambda4,bound,ratio,branch,regime,verdict\n"));
        let json: serde_json::Value = serde_json::from_str(&a.to_json().unwrap()).unwrap();
        assert_eq!(json["header"]["seed"], 7);
    }

    #[test]
    fn output_paths_do_not_clobber() {
        let dir = std::env::temp_dir().join(format!("fqlab-paths-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let a = default_output_path(&dir, Subcommand::Gauss, 3, Format::Csv);
        fs::write(&a, "x").unwrap();
        let b = default_output_path(&dir, Subcommand::Gauss, 3, Format::Csv);
        assert_ne!(a, b);
        assert!(b.to_str().unwrap().ends_with("gauss-seed3-1.csv"));
        fs::remove_dir_all(&dir).unwrap();
    }
}
