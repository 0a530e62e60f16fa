//! Command-line interface: `fit`, `simulate`, `replicate` and `compare`.

mod io;

pub use io::{kde_grid, read_selection_csv, write_dataset_csv, write_density_csv, write_draws_csv, ColumnSpec};

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{summarize, FitReport};
use crate::model::{ModelFamily, PriorSpec};
use crate::nuts::{run_chains, Init, Progress, SamplerConfig};
use crate::sim::{generate_dataset, run_replication, SimConfig, DEFAULT_SLASH_NU};
use crate::smn::ErrorFamily;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_SAMPLER: i32 = 3;
pub const EXIT_MISMATCH: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "heckbayes", version, about = "Bayesian sample-selection models fitted by NUTS")]
pub struct Cli {
    /// Caps the number of worker threads.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit one model to a CSV dataset.
    Fit(FitArgs),
    /// Generate a synthetic dataset.
    Simulate(SimulateArgs),
    /// Run a Monte Carlo replication study.
    Replicate(ReplicateArgs),
    /// Compare the criteria of two or more fitted models.
    Compare(CompareArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    Normal,
    T,
    Cn,
}

impl From<FamilyArg> for ModelFamily {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Normal => ModelFamily::Normal,
            FamilyArg::T => ModelFamily::StudentT,
            FamilyArg::Cn => ModelFamily::ContaminatedNormal,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ErrorArg {
    Normal,
    T,
    Cn,
    Slash,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InitArg {
    TwoStep,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Table,
}

#[derive(Debug, Clone, Args)]
pub struct SamplerArgs {
    #[arg(long, default_value_t = 1000)]
    pub warmup: usize,
    #[arg(long, default_value_t = 20000)]
    pub draws: usize,
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(1..))]
    pub thin: u64,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub chains: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.85)]
    pub target_accept: f64,
    #[arg(long, default_value_t = 10)]
    pub max_treedepth: usize,
    #[arg(long, value_enum, default_value_t = InitArg::TwoStep)]
    pub init: InitArg,
    /// Half-width of the random initialization box.
    #[arg(long, default_value_t = 2.0)]
    pub init_radius: f64,
}

impl SamplerArgs {
    pub fn config(&self) -> SamplerConfig {
        SamplerConfig {
            warmup: self.warmup,
            draws: self.draws,
            thin: self.thin as usize,
            chains: self.chains as usize,
            max_treedepth: self.max_treedepth,
            target_accept: self.target_accept,
            seed: self.seed,
            init: match self.init {
                InitArg::TwoStep => Init::TwoStep,
                InitArg::Random => Init::Random { radius: self.init_radius },
            },
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value = "y")]
    pub outcome: String,
    /// Selection-indicator column; inferred from outcome missingness if omitted.
    #[arg(long)]
    pub selection: Option<String>,
    /// Outcome-equation covariates.
    #[arg(long, value_delimiter = ',', required = true)]
    pub x: Vec<String>,
    /// Selection-equation covariates.
    #[arg(long, value_delimiter = ',', required = true)]
    pub w: Vec<String>,
    /// Selection covariate excluded from the outcome equation, if any.
    #[arg(long)]
    pub exclusion: Option<String>,
    #[arg(long, value_enum, default_value_t = FamilyArg::Normal)]
    pub family: FamilyArg,
    #[arg(long)]
    pub no_intercept: bool,
    #[arg(long, default_value = "fit-output")]
    pub out: PathBuf,
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [Format::Json, Format::Csv, Format::Table])]
    pub format: Vec<Format>,
    #[command(flatten)]
    pub sampler: SamplerArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ErrorLawArgs {
    /// Error law of the generated data.
    #[arg(long = "errors", value_enum, default_value_t = ErrorArg::Normal)]
    pub errors: ErrorArg,
    /// Degrees of freedom for t errors.
    #[arg(long, default_value_t = 3.0)]
    pub nu: f64,
    #[arg(long, default_value_t = 0.25)]
    pub nu1: f64,
    #[arg(long, default_value_t = 0.1)]
    pub nu2: f64,
    /// Shape of slash errors.
    #[arg(long, default_value_t = DEFAULT_SLASH_NU)]
    pub slash_nu: f64,
}

impl ErrorLawArgs {
    pub fn family(&self) -> ErrorFamily {
        match self.errors {
            ErrorArg::Normal => ErrorFamily::Normal,
            ErrorArg::T => ErrorFamily::StudentT { nu: self.nu },
            ErrorArg::Cn => ErrorFamily::ContaminatedNormal { nu1: self.nu1, nu2: self.nu2 },
            ErrorArg::Slash => ErrorFamily::Slash { nu: self.slash_nu },
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 400, value_parser = clap::value_parser!(u64).range(50..))]
    pub n: u64,
    #[command(flatten)]
    pub law: ErrorLawArgs,
    #[arg(long, default_value_t = 2024)]
    pub seed: u64,
    /// Output directory; receives data.csv, truth.json and manifest.json.
    #[arg(long, default_value = "sim-output")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ReplicateArgs {
    #[arg(long, default_value_t = 400, value_parser = clap::value_parser!(u64).range(50..))]
    pub n: u64,
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
    pub replicates: u64,
    #[command(flatten)]
    pub law: ErrorLawArgs,
    /// Models to fit to every replicate.
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [FamilyArg::Normal, FamilyArg::T, FamilyArg::Cn])]
    pub models: Vec<FamilyArg>,
    #[arg(long, default_value_t = 1000)]
    pub warmup: usize,
    #[arg(long, default_value_t = 3000)]
    pub draws: usize,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub thin: u64,
    #[arg(long, default_value_t = 2024)]
    pub seed: u64,
    #[arg(long, default_value = "replication-output")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    /// report.json files written by `fit`.
    #[arg(required = true, num_args = 2..)]
    pub reports: Vec<PathBuf>,
}

/// Everything needed to rerun a command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub software: String,
    pub version: String,
    pub command: String,
    pub args: Vec<String>,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampler: Option<SamplerConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior: Option<PriorSpec>,
}

impl Manifest {
    fn new(command: &str, args: &[String], seed: u64) -> Self {
        Self {
            software: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            args: args.to_vec(),
            seed,
            sampler: None,
            prior: None,
        }
    }
}

/// Layout of `report.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportFile {
    #[serde(flatten)]
    pub report: FitReport,
    pub manifest: Manifest,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut f, value)?;
    std::io::Write::write_all(&mut f, b"\n")?;
    Ok(())
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Parse { .. } | Error::Csv(_) | Error::Json(_) => EXIT_PARSE,
        Error::Sampler(_) | Error::InsufficientDraws(_) => EXIT_SAMPLER,
        _ => EXIT_FAILURE,
    }
}

fn cmd_fit(args: &FitArgs, argv: &[String]) -> Result<()> {
    if let Some(ex) = &args.exclusion {
        if !args.w.contains(ex) {
            return Err(Error::Data(format!("exclusion variable '{ex}' is not a selection covariate")));
        }
        if args.x.contains(ex) {
            return Err(Error::Data(format!("exclusion variable '{ex}' also enters the outcome equation")));
        }
    }
    let spec = ColumnSpec {
        outcome: args.outcome.clone(),
        selection: args.selection.clone(),
        x: args.x.clone(),
        w: args.w.clone(),
        intercept: !args.no_intercept,
    };
    let data = read_selection_csv(File::open(&args.input)?, &spec)?;
    let config = args.sampler.config();
    let family = ModelFamily::from(args.family);
    let prior = PriorSpec::default();
    log::info!(
        "fitting {} to {} units ({} observed), {} chain(s)",
        family.model_name(),
        data.n(),
        data.n_selected(),
        config.chains
    );
    let total = config.warmup + config.draws;
    let report_every = (total / 10).max(1);
    let progress = move |p: Progress| {
        if (p.iteration + 1) % report_every == 0 {
            log::info!("chain {}: iteration {}/{total}, {} divergences", p.chain, p.iteration + 1, p.divergences);
        }
    };
    let draws = run_chains(&data, &prior, family, &config, Some(&progress))?;
    let report = summarize(&draws, &data)?;

    fs::create_dir_all(&args.out)?;
    let mut manifest = Manifest::new("fit", argv, config.seed);
    manifest.sampler = Some(config);
    manifest.prior = Some(prior);
    if args.format.contains(&Format::Csv) {
        write_draws_csv(BufWriter::new(File::create(args.out.join("draws.csv"))?), &draws)?;
        write_density_csv(BufWriter::new(File::create(args.out.join("density.csv"))?), &draws)?;
    }
    if args.format.contains(&Format::Json) {
        write_json(&args.out.join("report.json"), &ReportFile { report: report.clone(), manifest: manifest.clone() })?;
    }
    if args.format.contains(&Format::Table) {
        fs::write(args.out.join("report.txt"), report.to_table())?;
    }
    write_json(&args.out.join("manifest.json"), &manifest)?;
    print!("{}", report.to_table());
    Ok(())
}

#[derive(Serialize)]
struct Truth<'a> {
    n: usize,
    error_family: ErrorFamily,
    beta: &'a [f64],
    gamma: &'a [f64],
    sigma2: f64,
    rho: f64,
    seed: u64,
}

fn cmd_simulate(args: &SimulateArgs, argv: &[String]) -> Result<()> {
    let cfg = SimConfig { n: args.n as usize, error_family: args.law.family(), seed: args.seed, ..SimConfig::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let data = generate_dataset(&cfg, &mut rng)?;
    fs::create_dir_all(&args.out)?;
    write_dataset_csv(BufWriter::new(File::create(args.out.join("data.csv"))?), &data)?;
    let t = &cfg.true_params;
    write_json(
        &args.out.join("truth.json"),
        &Truth {
            n: cfg.n,
            error_family: cfg.error_family,
            beta: &t.beta,
            gamma: &t.gamma,
            sigma2: t.sigma2,
            rho: t.rho,
            seed: cfg.seed,
        },
    )?;
    write_json(&args.out.join("manifest.json"), &Manifest::new("simulate", argv, cfg.seed))?;
    println!("wrote {} units ({:.1}% missing) to {}", data.n(), 100.0 * data.missing_fraction(), args.out.display());
    Ok(())
}

fn cmd_replicate(args: &ReplicateArgs, argv: &[String]) -> Result<()> {
    let cfg = SimConfig {
        n: args.n as usize,
        error_family: args.law.family(),
        replicates: args.replicates as usize,
        seed: args.seed,
        ..SimConfig::default()
    };
    let sampler = SamplerConfig {
        warmup: args.warmup,
        draws: args.draws,
        thin: args.thin as usize,
        seed: args.seed,
        ..SamplerConfig::default()
    };
    let models: Vec<ModelFamily> = args.models.iter().map(|&m| m.into()).collect();
    let prior = PriorSpec::default();
    let report = run_replication(&cfg, &models, &sampler, &prior)?;
    fs::create_dir_all(&args.out)?;
    write_json(&args.out.join("replication.json"), &report)?;
    report.write_csv(BufWriter::new(File::create(args.out.join("replication.csv"))?))?;
    let mut manifest = Manifest::new("replicate", argv, args.seed);
    manifest.sampler = Some(sampler);
    manifest.prior = Some(prior);
    write_json(&args.out.join("manifest.json"), &manifest)?;

    let mut out = String::new();
    for m in &report.models {
        let _ = writeln!(out, "{} ({} fits)", m.model, m.fits);
        for p in &m.params {
            let _ = writeln!(out, "  {:<8} ME {:>8.3}  SD {:>7.3}  HPD [{:>7.3}, {:>7.3}]", p.name, p.me, p.sd, p.hpd_lower, p.hpd_upper);
        }
    }
    for row in &report.selection {
        let cells: Vec<String> =
            row.models.iter().zip(&row.percentages).map(|(m, p)| format!("{m} {p:.0}%")).collect();
        let _ = writeln!(out, "{:<11} {}", row.criterion, cells.join("  "));
    }
    if report.failures > 0 {
        let _ = writeln!(out, "{} fits failed", report.failures);
    }
    print!("{out}");
    Ok(())
}

/// Criterion table for already-loaded reports, with winners starred.
pub fn comparison_table(reports: &[FitReport]) -> Result<String> {
    let n = reports[0].diagnostics.n_units;
    if let Some(bad) = reports.iter().find(|r| r.diagnostics.n_units != n) {
        return Err(Error::Dimension(format!(
            "reports cover different datasets: {} has {} units, expected {n}",
            bad.model, bad.diagnostics.n_units
        )));
    }
    let crits = reports
        .iter()
        .map(|r| r.criteria.clone().ok_or_else(|| Error::InsufficientDraws(format!("{} has no criteria", r.model))))
        .collect::<Result<Vec<_>>>()?;
    let best = |key: fn(&crate::inference::Criteria) -> f64, sign: f64| {
        (0..crits.len()).min_by(|&a, &b| (sign * key(&crits[a])).total_cmp(&(sign * key(&crits[b])))).unwrap_or(0)
    };
    let winners = [best(|c| c.looic, 1.0), best(|c| c.waic, 1.0), best(|c| c.lpml, -1.0)];
    let mut out = String::new();
    let _ = writeln!(out, "{:<8} {:>13} {:>13} {:>13}", "Model", "LOOIC", "WAIC", "CPO (LPML)");
    for (i, (r, c)) in reports.iter().zip(&crits).enumerate() {
        let star = |k: usize| if winners[k] == i { "*" } else { " " };
        let _ = writeln!(
            out,
            "{:<8} {:>12.3}{} {:>12.3}{} {:>12.3}{}",
            r.model,
            c.looic,
            star(0),
            c.waic,
            star(1),
            c.lpml,
            star(2)
        );
    }
    let _ = writeln!(out, "* best: lowest LOOIC and WAIC, highest LPML");
    Ok(out)
}

fn cmd_compare(args: &CompareArgs) -> std::result::Result<(), (i32, String)> {
    let reports = args
        .reports
        .iter()
        .map(|p| {
            let file = File::open(p).map_err(|e| (EXIT_FAILURE, format!("{}: {e}", p.display())))?;
            serde_json::from_reader::<_, ReportFile>(std::io::BufReader::new(file))
                .map(|f| f.report)
                .map_err(|e| (EXIT_PARSE, format!("{}: {e}", p.display())))
        })
        .collect::<std::result::Result<Vec<_>, _>>()?;
    match comparison_table(&reports) {
        Ok(table) => {
            print!("{table}");
            Ok(())
        }
        Err(e @ Error::Dimension(_)) => Err((EXIT_MISMATCH, e.to_string())),
        Err(e) => Err((exit_code(&e), e.to_string())),
    }
}

/// Parses `argv` (including the program name), runs the command and
/// returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let args: Vec<String> = argv.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads.max(1)).build_global() {
            log::warn!("could not configure the thread pool: {e}");
        }
    }
    let result = match &cli.command {
        Command::Fit(a) => cmd_fit(a, &args).map_err(|e| (exit_code(&e), e.to_string())),
        Command::Simulate(a) => cmd_simulate(a, &args).map_err(|e| (exit_code(&e), e.to_string())),
        Command::Replicate(a) => cmd_replicate(a, &args).map_err(|e| (exit_code(&e), e.to_string())),
        Command::Compare(a) => cmd_compare(a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err((code, msg)) => {
            eprintln!("error: {msg}");
            code
        }
    }
}
