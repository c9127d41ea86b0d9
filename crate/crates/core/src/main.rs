use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand as ClapSubcommand};

use fqlab::cli::{default_output_path, run, write_report, ExperimentConfig, Format, Subcommand, OUT_DIR_VAR};
use fqlab::energy::Parity;
use fqlab::norms_lab::Theorem;
use fqlab::Error;

#[derive(Parser)]
#[command(name = "fqlab", version, about = "Finite-field extension estimates laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(ClapSubcommand)]
enum Command {
    /// Gauss sums against their explicit values.
    Gauss(Common),
    /// Extension of the constant function against its closed form.
    SigmaCheck(Common),
    /// Additive energy of sampled subsets against the piecewise bound.
    Energy {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        energy: EnergyArgs,
    },
    /// Lower bounds for R*(p→r) at a theorem's endpoint exponents.
    Norms {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        theorem: String,
        #[command(flatten)]
        search: SearchArgs,
    },
    /// Every verification over the (q, d) grid in one report.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        energy: EnergyArgs,
        #[command(flatten)]
        search: SearchArgs,
    },
}

#[derive(Args)]
struct Common {
    /// Fields as p^l or prime powers, comma separated.
    #[arg(long = "q", alias = "q-list", value_delimiter = ',', default_value = "3")]
    fields: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "4")]
    d: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Report path; the extension picks the format. Overwrites.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    format: Option<String>,
    /// Largest q^d to enumerate.
    #[arg(long)]
    cap: Option<u128>,
    #[arg(long)]
    tolerance: Option<f64>,
    #[arg(long)]
    sigma_tolerance: Option<f64>,
    #[arg(long)]
    desk_constant: Option<f64>,
    #[arg(long)]
    slope_limit: Option<f64>,
}

#[derive(Args)]
struct EnergyArgs {
    #[arg(long)]
    parity: Option<String>,
    #[arg(long)]
    samples: Option<usize>,
    /// Subset sizes as exponents e of |E| = q^e.
    #[arg(long, value_delimiter = ',')]
    densities: Vec<f64>,
    #[arg(long)]
    max_subset: Option<u64>,
}

#[derive(Args)]
struct SearchArgs {
    #[arg(long)]
    budget: Option<u64>,
    #[arg(long)]
    restarts: Option<usize>,
    #[arg(long)]
    delta: Option<f64>,
}

fn apply_common(cfg: &mut ExperimentConfig, c: &Common) -> Result<(), Error> {
    cfg.fields = c.fields.clone();
    cfg.dims = c.d.clone();
    cfg.seed = c.seed;
    cfg.format = match (&c.format, &c.out) {
        (Some(f), _) => match f.as_str() {
            "csv" => Format::Csv,
            "json" => Format::Json,
            _ => {
                return Err(Error::Config {
                    field: "format".into(),
                    reason: format!("expected csv or json, got {f:?}"),
                })
            }
        },
        (None, Some(path)) => Format::from_path(path).unwrap_or(Format::Csv),
        (None, None) => Format::Csv,
    };
    if let Some(v) = c.cap {
        cfg.cap = v;
    }
    if let Some(v) = c.tolerance {
        cfg.tolerance = v;
    }
    if let Some(v) = c.sigma_tolerance {
        cfg.sigma_tolerance = v;
    }
    if let Some(v) = c.desk_constant {
        cfg.desk_constant = v;
    }
    if let Some(v) = c.slope_limit {
        cfg.slope_limit = v;
    }
    Ok(())
}

fn apply_energy(cfg: &mut ExperimentConfig, e: &EnergyArgs) -> Result<(), Error> {
    if let Some(p) = &e.parity {
        cfg.parity = Some(Parity::parse(p)?);
    }
    if let Some(v) = e.samples {
        cfg.samples = v;
    }
    cfg.densities = e.densities.clone();
    if let Some(v) = e.max_subset {
        cfg.max_subset = v;
    }
    Ok(())
}

fn apply_search(cfg: &mut ExperimentConfig, s: &SearchArgs) {
    if let Some(v) = s.budget {
        cfg.search.budget = v;
    }
    if let Some(v) = s.restarts {
        cfg.search.restarts = v;
    }
    if let Some(v) = s.delta {
        cfg.delta = v;
    }
}

fn configure(cli: &Cli) -> Result<(Subcommand, ExperimentConfig, Option<PathBuf>), Error> {
    let mut cfg = ExperimentConfig::default();
    let (sub, common) = match &cli.command {
        Command::Gauss(c) => (Subcommand::Gauss, c),
        Command::SigmaCheck(c) => (Subcommand::SigmaCheck, c),
        Command::Energy { common, energy } => {
            apply_energy(&mut cfg, energy)?;
            (Subcommand::Energy, common)
        }
        Command::Norms { common, theorem, search } => {
            cfg.theorem = Some(Theorem::parse(theorem)?);
            apply_search(&mut cfg, search);
            (Subcommand::Norms, common)
        }
        Command::Sweep { common, energy, search } => {
            apply_energy(&mut cfg, energy)?;
            apply_search(&mut cfg, search);
            (Subcommand::Sweep, common)
        }
    };
    apply_common(&mut cfg, common)?;
    Ok((sub, cfg, common.out.clone()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (sub, cfg, out) = match configure(&cli) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("fqlab: {e}");
            return ExitCode::from(2);
        }
    };
    let report = match run(sub, &cfg) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("fqlab: {e}");
            return ExitCode::from(2);
        }
    };
    let target = out.or_else(|| {
        std::env::var_os(OUT_DIR_VAR).map(|dir| default_output_path(&PathBuf::from(dir), sub, cfg.seed, cfg.format))
    });
    let written = match &target {
        Some(path) => write_report(&report, path, cfg.format).map(|_| eprintln!("wrote {}", path.display())),
        None => report.render(cfg.format).map(|s| print!("{s}")),
    };
    if let Err(e) = written {
        eprintln!("fqlab: {e}");
        return ExitCode::from(2);
    }
    eprintln!("{}", report.summary());
    ExitCode::from(report.exit_code() as u8)
}
