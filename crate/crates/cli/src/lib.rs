//! Command-line driver: argument parsing, dispatch and CSV reports.

use std::fs::{self, File};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use accel_msm::additive::{fit_aalen, martingale_residuals, residual_group_means};
use accel_msm::cohort::{read_cohort_dir, write_cohort_dir};
use accel_msm::estimators::{bootstrap_with_floor, estimate_detailed};
use accel_msm::reweighting::DEFAULT_FLOOR;
use accel_msm::simulation::{oracle_survival, simulate_hypothetical};
use accel_msm::time_change::{blank_subject, mc_check_intensity};
use accel_msm::{AccelerationSpec, Cohort, CumulativeCoefficients, DesignSpec, DgpConfig, SurvivalCurve, Term};
use anyhow::{bail, ensure, Context, Result};
use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "accel-msm", version, about = "Survival under accelerated treatment intensities")]
pub struct RunConfig {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a cohort from the synthetic generator.
    Simulate(SimulateArgs),
    /// Fit the additive treatment-intensity model.
    FitTreatment(FitArgs),
    /// Per-subject likelihood-ratio weights.
    Weights(WeightsArgs),
    /// Weighted survival curve, optionally with a bootstrap band.
    Estimate(EstimateArgs),
    /// Oracle survival curve from a large simulated hypothetical cohort.
    Oracle(OracleArgs),
    /// Monte Carlo check of the accelerated treatment intensity.
    ValidateTimechange(ValidateArgs),
    /// Martingale residual means by stratum.
    Residuals(ResidualArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::FitTreatment(_) => "fit-treatment",
            Command::Weights(_) => "weights",
            Command::Estimate(_) => "estimate",
            Command::Oracle(_) => "oracle",
            Command::ValidateTimechange(_) => "validate-timechange",
            Command::Residuals(_) => "residuals",
        }
    }
}

#[derive(Debug, Args)]
pub struct CohortInput {
    /// Cohort directory with baseline.csv, events.csv and optionally schema.csv.
    #[arg(long)]
    pub input: PathBuf,
    /// Administrative horizon (default: last observed time).
    #[arg(long)]
    pub horizon: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Generator config (TOML); defaults when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long)]
    pub seed: u64,
    /// Simulate the hypothetical world under this acceleration config.
    #[arg(long)]
    pub accel: Option<PathBuf>,
    /// Output cohort directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub cohort: CohortInput,
    /// Design file, one term per line.
    #[arg(long)]
    pub design: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write cumulative martingale residual paths.
    #[arg(long)]
    pub residuals: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct WeightsArgs {
    #[command(flatten)]
    pub cohort: CohortInput,
    #[arg(long)]
    pub design: PathBuf,
    #[arg(long)]
    pub accel: PathBuf,
    #[arg(long, default_value_t = DEFAULT_FLOOR)]
    pub floor: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub cohort: CohortInput,
    #[arg(long)]
    pub design: PathBuf,
    #[arg(long)]
    pub accel: PathBuf,
    /// Evaluation grid as start:end:step.
    #[arg(long, default_value = "0:10:0.25")]
    pub grid: String,
    /// Bootstrap replicates; 0 disables the band.
    #[arg(long, default_value_t = 0)]
    pub bootstrap: usize,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    /// Required with --bootstrap.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = DEFAULT_FLOOR)]
    pub floor: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Acceleration config; observational world when omitted.
    #[arg(long)]
    pub accel: Option<PathBuf>,
    #[arg(long, default_value_t = 200_000)]
    pub n: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value = "0:10:0.25")]
    pub grid: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    /// Acceleration config; must be evaluable without covariates.
    #[arg(long)]
    pub accel: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    pub horizon: f64,
    #[arg(long, default_value_t = 10_000)]
    pub paths: usize,
    #[arg(long)]
    pub seed: u64,
    /// Report path; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ResidualArgs {
    #[command(flatten)]
    pub cohort: CohortInput,
    #[arg(long)]
    pub design: PathBuf,
    /// Stratifying term evaluated at baseline, e.g. "I(x_lci > 6)".
    #[arg(long)]
    pub by: String,
    #[arg(long, default_value = "0:10:0.25")]
    pub grid: String,
    #[arg(long)]
    pub out: PathBuf,
}

/// Parses `start:end:step` into an inclusive grid.
pub fn parse_grid(src: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = src.split(':').collect();
    ensure!(parts.len() == 3, "grid `{src}` is not start:end:step");
    let num = |s: &str| s.trim().parse::<f64>().with_context(|| format!("grid `{src}`: bad number `{s}`"));
    let (start, end, step) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
    ensure!(start.is_finite() && end.is_finite() && start >= 0.0, "grid `{src}`: bad bounds");
    ensure!(step > 0.0 && end >= start, "grid `{src}`: step must be positive and end >= start");
    let count = ((end - start) / step + 1e-9).floor() as usize;
    Ok((0..=count).map(|k| start + k as f64 * step).collect())
}

/// Formats with 12 significant digits, dropping trailing zeros.
pub fn fmt_float(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let rounded: f64 = format!("{x:.11e}").parse().unwrap_or(x);
    rounded.to_string()
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn load_cohort(input: &CohortInput) -> Result<Cohort> {
    read_cohort_dir(&input.input, input.horizon).with_context(|| format!("reading cohort {}", input.input.display()))
}

fn load_design(path: &Path) -> Result<DesignSpec> {
    DesignSpec::parse(&read_text(path)?).with_context(|| format!("design {}", path.display()))
}

fn load_accel(path: &Path) -> Result<AccelerationSpec> {
    AccelerationSpec::parse(&read_text(path)?).with_context(|| format!("accel {}", path.display()))
}

fn load_config(path: Option<&Path>) -> Result<DgpConfig> {
    match path {
        Some(p) => DgpConfig::load(p).with_context(|| format!("config {}", p.display())),
        None => Ok(DgpConfig::default()),
    }
}

fn csv_writer(path: &Path) -> Result<csv::Writer<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("cannot create {}", parent.display()))?;
    }
    let file = File::create(path).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(csv::Writer::from_writer(file))
}

pub fn write_coefficients(path: &Path, fit: &CumulativeCoefficients) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["time", "term", "increment", "cumulative", "rank_skipped"])?;
    let cumulative = fit.cumulative();
    for (k, &t) in fit.times().iter().enumerate() {
        for (j, term) in fit.terms().iter().enumerate() {
            w.write_record([
                fmt_float(t),
                term.clone(),
                fmt_float(fit.increments()[k][j]),
                fmt_float(cumulative[k][j]),
                fit.rank_skipped()[k].to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_survival(path: &Path, curve: &SurvivalCurve) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["time", "estimate", "lower", "upper", "scenario"])?;
    let band = |b: &Option<Vec<f64>>, j: usize| b.as_ref().map(|v| fmt_float(v[j])).unwrap_or_default();
    for (j, &t) in curve.grid.iter().enumerate() {
        w.write_record([
            fmt_float(t),
            fmt_float(curve.estimate[j]),
            band(&curve.lower, j),
            band(&curve.upper, j),
            curve.scenario.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn simulate(args: &SimulateArgs) -> Result<()> {
    let cfg = load_config(args.config.as_deref())?;
    let accel = match &args.accel {
        Some(p) => load_accel(p)?,
        None => AccelerationSpec::identity(),
    };
    let cohort = simulate_hypothetical(&cfg, &accel, args.n, args.seed)?;
    write_cohort_dir(&cohort, &args.out).with_context(|| format!("writing cohort {}", args.out.display()))?;
    Ok(())
}

fn fit_treatment(args: &FitArgs) -> Result<()> {
    let cohort = load_cohort(&args.cohort)?;
    let design = load_design(&args.design)?;
    let fit = fit_aalen(&cohort, &design)?;
    write_coefficients(&args.out, &fit)?;
    if let Some(path) = &args.residuals {
        let residuals = martingale_residuals(&cohort, &fit, &design)?;
        let mut w = csv_writer(path)?;
        w.write_record(["subject_id", "time", "residual"])?;
        for (s, m) in cohort.subjects().iter().zip(&residuals) {
            for (&t, &v) in m.times().iter().zip(m.values()) {
                w.write_record([s.id().to_string(), fmt_float(t), fmt_float(v)])?;
            }
        }
        w.flush()?;
    }
    Ok(())
}

fn weights(args: &WeightsArgs) -> Result<()> {
    let cohort = load_cohort(&args.cohort)?;
    let design = load_design(&args.design)?;
    let accel = load_accel(&args.accel)?;
    accel.validate(cohort.schema())?;
    let est = estimate_detailed(&cohort, &design, &accel, &[0.0], args.floor)?;
    let mut times: Vec<f64> = cohort.subjects().iter().filter_map(|s| s.treatment_time()).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let mut w = csv_writer(&args.out)?;
    w.write_record(["subject_id", "time", "weight"])?;
    for (s, r) in cohort.subjects().iter().zip(&est.weights) {
        for &t in &times {
            w.write_record([s.id().to_string(), fmt_float(t), fmt_float(r.value_at(t))])?;
        }
    }
    w.flush()?;
    let floor_hits: usize = est.weights.iter().map(|r| r.floor_hits).sum();
    if floor_hits > 0 {
        eprintln!("warning: {floor_hits} weight factors hit the floor {}", args.floor);
    }
    Ok(())
}

fn estimate(args: &EstimateArgs) -> Result<()> {
    let cohort = load_cohort(&args.cohort)?;
    let design = load_design(&args.design)?;
    let accel = load_accel(&args.accel)?;
    accel.validate(cohort.schema())?;
    let grid = parse_grid(&args.grid)?;
    ensure!(args.level > 0.0 && args.level < 1.0, "--level must lie in (0, 1), got {}", args.level);
    let curve = if args.bootstrap > 0 {
        let Some(seed) = args.seed else {
            bail!("--seed is required with --bootstrap");
        };
        bootstrap_with_floor(&cohort, &design, &accel, &grid, args.bootstrap, args.level, seed, args.floor)?
    } else {
        estimate_detailed(&cohort, &design, &accel, &grid, args.floor)?.curve
    };
    write_survival(&args.out, &curve)
}

fn oracle(args: &OracleArgs) -> Result<()> {
    let cfg = load_config(args.config.as_deref())?;
    let accel = match &args.accel {
        Some(p) => load_accel(p)?,
        None => AccelerationSpec::identity(),
    };
    let grid = parse_grid(&args.grid)?;
    let cohort = simulate_hypothetical(&cfg, &accel, args.n, args.seed)?;
    write_survival(&args.out, &oracle_survival(&cohort, &grid))
}

fn validate_timechange(args: &ValidateArgs) -> Result<()> {
    let accel = load_accel(&args.accel)?;
    let check = mc_check_intensity(args.lambda, &accel, &blank_subject(), args.horizon, args.paths, args.seed)?;
    let sink: Box<dyn Write> = match &args.out {
        Some(p) => Box::new(csv_writer(p)?.into_inner().map_err(|e| e.into_error())?),
        None => Box::new(io::stdout().lock()),
    };
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["lambda", "horizon", "paths", "empirical_mean", "predicted", "std_error", "z", "passed"])?;
    w.write_record([
        fmt_float(check.lambda),
        fmt_float(check.horizon),
        check.paths.to_string(),
        fmt_float(check.empirical_mean),
        fmt_float(check.predicted),
        fmt_float(check.std_error),
        fmt_float(check.z),
        check.passed().to_string(),
    ])?;
    w.flush()?;
    Ok(())
}

fn residuals(args: &ResidualArgs) -> Result<()> {
    let cohort = load_cohort(&args.cohort)?;
    let design = load_design(&args.design)?;
    let by = Term::parse(&args.by).with_context(|| format!("--by `{}`", args.by))?;
    let grid = parse_grid(&args.grid)?;
    let fit = fit_aalen(&cohort, &design)?;
    let paths = martingale_residuals(&cohort, &fit, &design)?;
    let means = residual_group_means(&cohort, &paths, &by, &grid)?;
    for s in &means.empty_strata {
        eprintln!("warning: stratum {} of `{}` is empty", fmt_float(*s), args.by);
    }
    let mut w = csv_writer(&args.out)?;
    w.write_record(["time", "stratum", "mean"])?;
    for row in &means.rows {
        w.write_record([fmt_float(row.time), fmt_float(row.stratum), fmt_float(row.mean)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn run(config: &RunConfig) -> Result<()> {
    if let Some(n) = config.threads {
        ensure!(n > 0, "--threads must be positive");
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    match &config.command {
        Command::Simulate(a) => simulate(a),
        Command::FitTreatment(a) => fit_treatment(a),
        Command::Weights(a) => weights(a),
        Command::Estimate(a) => estimate(a),
        Command::Oracle(a) => oracle(a),
        Command::ValidateTimechange(a) => validate_timechange(a),
        Command::Residuals(a) => residuals(a),
    }
}

/// Single-line form of an error chain.
pub fn error_line(subcommand: &str, err: &anyhow::Error) -> String {
    let msg = format!("{err:#}").replace(['\n', '\r'], " ");
    format!("error subcommand={subcommand}: {msg}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_is_inclusive() {
        assert_eq!(parse_grid("0:1:0.25").unwrap(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(parse_grid("0:10:0.25").unwrap().len(), 41);
        assert_eq!(parse_grid("2:2:1").unwrap(), vec![2.0]);
        assert!(parse_grid("0:1").is_err());
        assert!(parse_grid("0:1:0").is_err());
        assert!(parse_grid("1:0:0.1").is_err());
    }

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(fmt_float(1.0 / 3.0), "0.333333333333");
        assert_eq!(fmt_float(0.5), "0.5");
        assert_eq!(fmt_float(2.0), "2");
        assert_eq!(fmt_float(123456.7890123456), "123456.789012");
        assert_eq!(fmt_float(1e-7 / 3.0), "0.0000000333333333333");
    }

    #[test]
    fn error_is_one_line() {
        let err = anyhow::anyhow!("inner\nmore").context("outer");
        assert_eq!(error_line("estimate", &err), "error subcommand=estimate: outer: inner more");
    }
}
