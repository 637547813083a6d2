//! Command-line front end. Every computation and study is reachable through
//! a subcommand, with reproducible configuration: flags override an optional
//! `key = value` config file, and `RUINLAB_SEED` overrides the seed only.
//!
//! Exit codes: 0 success, 1 validation error, 2 numerical failure.

use crate::asymptotics::{predict_p321, predict_third_first};
use crate::conformal::ConformalContext;
use crate::exact::{self, Quantity};
use crate::model::{to_wedge, GamblerConfig, StepSet};
use crate::montecarlo::{estimate, McOptions, SecondStage};
use crate::studies::{
    self, lazy_equivalence_report, rate_report, sweep, theorem1_report, theorem2_report,
    truncation_profile, Method, SweepConfig, SweepRecord,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use std::collections::HashMap;
use std::fmt::Display;
use std::path::PathBuf;
use std::str::FromStr;

const DEFAULT_TOL: f64 = exact::DEFAULT_TOL;
const DEFAULT_RHO: f64 = exact::DEFAULT_RHO;
const DEFAULT_QUAD_TOL: f64 = 1e-10;
const SEED_ENV: &str = "RUINLAB_SEED";

#[derive(Debug, Parser)]
#[command(
    name = "ruinlab",
    version,
    about = "Exit probabilities, Green functions and harmonic measure for the three-player gambler's ruin",
    after_help = "Defaults: --tol 1e-12, --rho 0.2, --quad-tol 1e-10; a seed is required for `mc` \
                  (flag, RUINLAB_SEED, or config file). Config file lines are `key = value` with \
                  `#` comments; keys are the lowercase long flag names. Flags override the config \
                  file; RUINLAB_SEED overrides the config seed."
)]
struct Cli {
    /// Plain-text config file (`key = value`, `#` comments).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// One quantity by the exact linear-solve route; prints the value.
    Exact(ScalarArgs),
    /// Seeded Monte Carlo estimate; prints `mean stderr`.
    Mc(McArgs),
    /// Brownian value via the conformal Poisson solver; prints the value.
    Bm(BmArgs),
    /// Closed-form asymptotic prediction; prints the value.
    Asym(ScalarArgs),
    /// Verify the step-law moment identities; prints one line per identity.
    Moments(MomentsArgs),
    /// Compute quantities over capital sizes, starts and methods.
    Sweep(SweepArgs),
    /// Fit the decay order of |exact - brownian| over capital sizes.
    Rate(RateArgs),
    /// Green-function scaling report: layer masses and ray profiles.
    Theorem1(Theorem1Args),
    /// Harmonic-measure report: exit identity and scaled profiles.
    Theorem2(Theorem2Args),
    /// Exit-law equivalence of the standard and lazy walks.
    LazyCheck(LazyArgs),
    /// Truncation-error profile of the continuum solution.
    Truncation(TruncationArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Args)]
struct OutArgs {
    /// Record format for stdout and --output (scalar commands print a bare
    /// value when omitted).
    #[arg(long, value_enum)]
    format: Option<OutputFormat>,
    /// Also write the records/report to this path.
    #[arg(long, value_name = "PATH")]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ScalarArgs {
    /// Total capital (>= 3).
    #[arg(long = "N")]
    n: Option<i64>,
    /// Start capitals of players 1 and 2, e.g. 1,1.
    #[arg(long, value_parser = parse_start)]
    start: Option<(i64, i64)>,
    /// third-first | p321 | first-wins
    #[arg(long, value_parser = parse_quantity)]
    quantity: Option<Quantity>,
    /// Relative residual tolerance of the linear solver.
    #[arg(long)]
    tol: Option<f64>,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Debug, Args)]
struct McArgs {
    #[arg(long = "N")]
    n: Option<i64>,
    #[arg(long, value_parser = parse_start)]
    start: Option<(i64, i64)>,
    #[arg(long, value_parser = parse_quantity)]
    quantity: Option<Quantity>,
    /// Number of trials.
    #[arg(long)]
    trials: Option<u64>,
    /// RNG seed (required; see RUINLAB_SEED).
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; affects wall time only, never results (0 = all cores).
    #[arg(long)]
    workers: Option<usize>,
    /// analytic | simulated endgame settlement.
    #[arg(long, value_parser = parse_second_stage)]
    second_stage: Option<SecondStage>,
    /// Use the lazy (holding) step law instead of the standard one.
    #[arg(long, default_value_t = false)]
    lazy: bool,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Debug, Args)]
struct BmArgs {
    #[arg(long = "N")]
    n: Option<i64>,
    #[arg(long, value_parser = parse_start)]
    start: Option<(i64, i64)>,
    #[arg(long, value_parser = parse_quantity)]
    quantity: Option<Quantity>,
    /// Quadrature tolerance of the Poisson integral.
    #[arg(long)]
    quad_tol: Option<f64>,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Debug, Args)]
struct MomentsArgs {
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// Capital sizes, e.g. 50,100,150.
    #[arg(long = "N-list", value_delimiter = ',')]
    n_list: Vec<i64>,
    /// Start states, semicolon-separated pairs: 1,1;2,3.
    #[arg(long, value_parser = parse_start, value_delimiter = ';')]
    starts: Vec<(i64, i64)>,
    /// Quantities to compute.
    #[arg(long, value_parser = parse_quantity, value_delimiter = ',')]
    quantities: Vec<Quantity>,
    /// Methods to run: exact,mc,bm,asym.
    #[arg(long, value_parser = parse_method, value_delimiter = ',')]
    methods: Vec<Method>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    quad_tol: Option<f64>,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Debug, Args)]
struct RateArgs {
    #[arg(long = "N-list", value_delimiter = ',')]
    n_list: Vec<i64>,
    #[arg(long, value_parser = parse_start)]
    start: Option<(i64, i64)>,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Debug, Args)]
struct Theorem1Args {
    #[arg(long = "N-list", value_delimiter = ',')]
    n_list: Vec<i64>,
    #[arg(long, value_parser = parse_start)]
    start: Option<(i64, i64)>,
    /// Layer offsets j (layer = N - j).
    #[arg(long, value_delimiter = ',')]
    j_list: Vec<i64>,
    /// Central sub-cone restriction for layer masses.
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Debug, Args)]
struct Theorem2Args {
    #[arg(long = "N")]
    n: Option<i64>,
    #[arg(long, value_parser = parse_start)]
    start: Option<(i64, i64)>,
    /// Far-edge points verified with their own Dirichlet solve (0 = all).
    #[arg(long)]
    identity_checks: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Debug, Args)]
struct LazyArgs {
    #[arg(long = "N-list", value_delimiter = ',')]
    n_list: Vec<i64>,
    #[arg(long)]
    tol: Option<f64>,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Debug, Args)]
struct TruncationArgs {
    #[arg(long = "N")]
    n: Option<i64>,
    #[arg(long)]
    quad_tol: Option<f64>,
    #[command(flatten)]
    out: OutArgs,
}

fn parse_start(s: &str) -> Result<(i64, i64), String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        return Err(format!("expected A,B got '{s}'"));
    }
    let a = parts[0]
        .trim()
        .parse()
        .map_err(|e| format!("bad capital '{}': {e}", parts[0]))?;
    let b = parts[1]
        .trim()
        .parse()
        .map_err(|e| format!("bad capital '{}': {e}", parts[1]))?;
    Ok((a, b))
}

fn parse_quantity(s: &str) -> Result<Quantity, String> {
    s.parse()
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse()
}

fn parse_second_stage(s: &str) -> Result<SecondStage, String> {
    match s {
        "analytic" => Ok(SecondStage::Analytic),
        "simulated" => Ok(SecondStage::Simulated),
        other => Err(format!(
            "unknown second stage '{other}' (analytic | simulated)"
        )),
    }
}

enum CliError {
    Validation(String),
    Numerical(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Numerical(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Validation(m) | CliError::Numerical(m) => m,
        }
    }
}

fn validation<E: Display>(e: E) -> CliError {
    CliError::Validation(e.to_string())
}

fn numerical<E: Display>(e: E) -> CliError {
    CliError::Numerical(e.to_string())
}

fn classify(e: studies::StudiesError) -> CliError {
    use studies::StudiesError::*;
    match &e {
        Exact(exact::ExactError::Model(_))
        | Exact(exact::ExactError::BadTolerance(_))
        | Exact(exact::ExactError::BadLayer { .. })
        | Exact(exact::ExactError::BoundaryDataMismatch { .. })
        | Model(_)
        | TooFewSizes(_)
        | ProfileTooSmall(_) => validation(e),
        _ => numerical(e),
    }
}

/// `key = value` config file; `#` starts a comment.
fn load_config(path: Option<&PathBuf>) -> Result<HashMap<String, String>, CliError> {
    let mut map = HashMap::new();
    let Some(path) = path else { return Ok(map) };
    let text = std::fs::read_to_string(path)
        .map_err(|e| validation(format!("config {}: {e}", path.display())))?;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(validation(format!(
                "config {}:{}: expected `key = value`, got '{raw}'",
                path.display(),
                lineno + 1
            )));
        };
        map.insert(key.trim().to_lowercase(), value.trim().to_string());
    }
    Ok(map)
}

struct Resolver {
    cfg: HashMap<String, String>,
}

impl Resolver {
    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: Display,
    {
        match self.cfg.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|e| validation(format!("config key '{key}': {e}"))),
        }
    }

    fn get_with<T>(
        &self,
        key: &str,
        parse: impl Fn(&str) -> Result<T, String>,
    ) -> Result<Option<T>, CliError> {
        match self.cfg.get(key) {
            None => Ok(None),
            Some(raw) => parse(raw)
                .map(Some)
                .map_err(|e| validation(format!("config key '{key}': {e}"))),
        }
    }

    fn get_list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>, CliError>
    where
        T::Err: Display,
    {
        match self.cfg.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .split(',')
                .map(|p| p.trim().parse::<T>())
                .collect::<Result<Vec<_>, _>>()
                .map(Some)
                .map_err(|e| validation(format!("config key '{key}': {e}"))),
        }
    }

    fn get_starts(&self, key: &str) -> Result<Option<Vec<(i64, i64)>>, CliError> {
        match self.cfg.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .split(';')
                .map(|p| parse_start(p.trim()))
                .collect::<Result<Vec<_>, _>>()
                .map(Some)
                .map_err(|e| validation(format!("config key '{key}': {e}"))),
        }
    }
}

fn require<T>(value: Option<T>, what: &str) -> Result<T, CliError> {
    value.ok_or_else(|| validation(format!("missing required value: {what}")))
}

fn env_seed() -> Result<Option<u64>, CliError> {
    match std::env::var(SEED_ENV) {
        Ok(raw) => raw
            .parse()
            .map(Some)
            .map_err(|e| validation(format!("{SEED_ENV}: {e}"))),
        Err(_) => Ok(None),
    }
}

fn validated_config(n: i64, start: (i64, i64)) -> Result<GamblerConfig, CliError> {
    GamblerConfig::new(n, start.0, start.1).map_err(validation)
}

fn check_tol(tol: f64) -> Result<f64, CliError> {
    if tol > 0.0 && tol.is_finite() {
        Ok(tol)
    } else {
        Err(validation(format!("tolerance must be positive, got {tol}")))
    }
}

/// Emit a scalar result: bare value without --format, one record otherwise.
fn emit_scalar(
    record: SweepRecord,
    out: &OutArgs,
    stdout: &mut impl std::io::Write,
) -> Result<(), CliError> {
    match out.format {
        None => {
            writeln!(
                stdout,
                "{}",
                record.value.expect("scalar emit carries a value")
            )
            .map_err(numerical)?;
        }
        Some(format) => emit_records(std::slice::from_ref(&record), format, stdout)?,
    }
    if let Some(path) = &out.output {
        let file = std::fs::File::create(path).map_err(validation)?;
        let format = out.format.unwrap_or(OutputFormat::Csv);
        match format {
            OutputFormat::Csv => studies::write_csv(std::slice::from_ref(&record), file),
            OutputFormat::Json => studies::write_json(std::slice::from_ref(&record), file),
        }
        .map_err(numerical)?;
    }
    Ok(())
}

fn emit_records(
    records: &[SweepRecord],
    format: OutputFormat,
    stdout: &mut impl std::io::Write,
) -> Result<(), CliError> {
    match format {
        OutputFormat::Csv => studies::write_csv(records, stdout).map_err(numerical),
        OutputFormat::Json => studies::write_json(records, stdout).map_err(numerical),
    }
}

fn emit_report<T: serde::Serialize>(
    report: &T,
    out: &OutArgs,
    stdout: &mut impl std::io::Write,
) -> Result<(), CliError> {
    if out.format == Some(OutputFormat::Csv) {
        return Err(validation("this report is structured; use --format json"));
    }
    let text = serde_json::to_string_pretty(report).map_err(numerical)?;
    writeln!(stdout, "{text}").map_err(numerical)?;
    if let Some(path) = &out.output {
        std::fs::write(path, format!("{text}\n")).map_err(validation)?;
    }
    Ok(())
}

fn scalar_record(
    n: i64,
    start: (i64, i64),
    q: Quantity,
    method: Method,
    value: f64,
    stderr: Option<f64>,
    seconds: f64,
) -> SweepRecord {
    SweepRecord {
        n,
        start_a: start.0,
        start_b: start.1,
        quantity: q,
        method,
        value: Some(value),
        stderr,
        residual: None,
        iterations: None,
        seconds,
    }
}

fn run_command(cli: Cli, stdout: &mut impl std::io::Write) -> Result<(), CliError> {
    let resolver = Resolver {
        cfg: load_config(cli.config.as_ref())?,
    };
    match cli.command {
        Command::Exact(args) => {
            let n = require(args.n.or(resolver.get("n")?), "--N")?;
            let start = require(
                args.start.or(resolver.get_with("start", parse_start)?),
                "--start",
            )?;
            let q = require(
                args.quantity
                    .or(resolver.get_with("quantity", parse_quantity)?),
                "--quantity",
            )?;
            let tol = check_tol(args.tol.or(resolver.get("tol")?).unwrap_or(DEFAULT_TOL))?;
            validated_config(n, start)?;
            let clock = std::time::Instant::now();
            let value = exact::exact_value(q, n, start, tol).map_err(numerical)?;
            let record = scalar_record(
                n,
                start,
                q,
                Method::Exact,
                value,
                None,
                clock.elapsed().as_secs_f64(),
            );
            emit_scalar(record, &args.out, stdout)
        }
        Command::Mc(args) => {
            let n = require(args.n.or(resolver.get("n")?), "--N")?;
            let start = require(
                args.start.or(resolver.get_with("start", parse_start)?),
                "--start",
            )?;
            let q = require(
                args.quantity
                    .or(resolver.get_with("quantity", parse_quantity)?),
                "--quantity",
            )?;
            let trials = require(args.trials.or(resolver.get("trials")?), "--trials")?;
            let seed = require(
                args.seed.or(env_seed()?).or(resolver.get("seed")?),
                "--seed (or RUINLAB_SEED)",
            )?;
            let workers = args.workers.or(resolver.get("workers")?).unwrap_or(0);
            let second_stage = args
                .second_stage
                .or(resolver.get_with("second-stage", parse_second_stage)?)
                .unwrap_or_default();
            validated_config(n, start)?;
            let steps = if args.lazy {
                StepSet::lazy()
            } else {
                StepSet::standard()
            };
            let opts = McOptions {
                trials,
                seed,
                workers,
                second_stage,
            };
            let clock = std::time::Instant::now();
            let est = estimate(q, n, start, &steps, &opts).map_err(numerical)?;
            match args.out.format {
                None => writeln!(stdout, "{} {}", est.mean, est.stderr).map_err(numerical)?,
                Some(_) => {
                    let record = scalar_record(
                        n,
                        start,
                        q,
                        Method::Mc,
                        est.mean,
                        Some(est.stderr),
                        clock.elapsed().as_secs_f64(),
                    );
                    emit_scalar(record, &args.out, stdout)?;
                }
            }
            Ok(())
        }
        Command::Bm(args) => {
            let n = require(args.n.or(resolver.get("n")?), "--N")?;
            let start = require(
                args.start.or(resolver.get_with("start", parse_start)?),
                "--start",
            )?;
            let q = require(
                args.quantity
                    .or(resolver.get_with("quantity", parse_quantity)?),
                "--quantity",
            )?;
            let quad_tol = check_tol(
                args.quad_tol
                    .or(resolver.get("quad-tol")?)
                    .unwrap_or(DEFAULT_QUAD_TOL),
            )?;
            validated_config(n, start)?;
            let ctx = ConformalContext::new().with_quad_tol(quad_tol);
            let (x1, x2) = to_wedge(start.0 as f64, start.1 as f64);
            let clock = std::time::Instant::now();
            let value =
                match q {
                    Quantity::P321 => ctx.bm_p321(x1, x2, n as f64),
                    Quantity::ThirdFirst => ctx.bm_third_first(x1, x2, n as f64),
                    Quantity::FirstWins => return Err(validation(
                        "first-wins has no closed Brownian route (boundary data spans two edges)",
                    )),
                }
                .map_err(numerical)?;
            let record = scalar_record(
                n,
                start,
                q,
                Method::Bm,
                value,
                None,
                clock.elapsed().as_secs_f64(),
            );
            emit_scalar(record, &args.out, stdout)
        }
        Command::Asym(args) => {
            let n = require(args.n.or(resolver.get("n")?), "--N")?;
            let start = require(
                args.start.or(resolver.get_with("start", parse_start)?),
                "--start",
            )?;
            let q = require(
                args.quantity
                    .or(resolver.get_with("quantity", parse_quantity)?),
                "--quantity",
            )?;
            validated_config(n, start)?;
            let (a, b) = (start.0 as f64, start.1 as f64);
            let value = match q {
                Quantity::P321 => predict_p321(a, b, n as f64),
                Quantity::ThirdFirst => predict_third_first(a, b, n as f64),
                Quantity::FirstWins => {
                    return Err(validation(
                        "first-wins has no closed asymptotic constant; use the exact route",
                    ))
                }
            };
            let record = scalar_record(n, start, q, Method::Asym, value, None, 0.0);
            emit_scalar(record, &args.out, stdout)
        }
        Command::Moments(args) => {
            let report = crate::moments::verify_moment_table();
            if args.out.format == Some(OutputFormat::Json) {
                emit_report(&report, &args.out, stdout)?;
            } else {
                for check in &report.checks {
                    writeln!(
                        stdout,
                        "{} {} (expected {}, got {})",
                        if check.pass { "PASS" } else { "FAIL" },
                        check.name,
                        check.expected,
                        check.got
                    )
                    .map_err(numerical)?;
                }
            }
            if report.all_pass() {
                Ok(())
            } else {
                Err(numerical("moment identities failed"))
            }
        }
        Command::Sweep(args) => {
            let ns = non_empty(args.n_list, resolver.get_list("n-list")?, "--N-list")?;
            let starts = non_empty(args.starts, resolver.get_starts("starts")?, "--starts")?;
            let quantities = non_empty(
                args.quantities,
                resolver.get_with("quantities", |raw| {
                    raw.split(',').map(|p| parse_quantity(p.trim())).collect()
                })?,
                "--quantities",
            )?;
            let methods = non_empty(
                args.methods,
                resolver.get_with("methods", |raw| {
                    raw.split(',').map(|p| parse_method(p.trim())).collect()
                })?,
                "--methods",
            )?;
            for &n in &ns {
                for &s in &starts {
                    validated_config(n, s)?;
                }
            }
            let cfg = SweepConfig {
                tol: check_tol(args.tol.or(resolver.get("tol")?).unwrap_or(DEFAULT_TOL))?,
                trials: args.trials.or(resolver.get("trials")?).unwrap_or(100_000),
                seed: require(
                    args.seed.or(env_seed()?).or(resolver.get("seed")?).or(
                        if methods.contains(&Method::Mc) {
                            None
                        } else {
                            Some(1)
                        },
                    ),
                    "--seed (methods include mc)",
                )?,
                workers: args.workers.or(resolver.get("workers")?).unwrap_or(0),
                quad_tol: check_tol(
                    args.quad_tol
                        .or(resolver.get("quad-tol")?)
                        .unwrap_or(DEFAULT_QUAD_TOL),
                )?,
            };
            let records = sweep(&quantities, &ns, &starts, &methods, &cfg);
            let format = args.out.format.unwrap_or(OutputFormat::Csv);
            emit_records(&records, format, stdout)?;
            if let Some(path) = &args.out.output {
                let file = std::fs::File::create(path).map_err(validation)?;
                match format {
                    OutputFormat::Csv => studies::write_csv(&records, file),
                    OutputFormat::Json => studies::write_json(&records, file),
                }
                .map_err(numerical)?;
            }
            Ok(())
        }
        Command::Rate(args) => {
            let ns = non_empty(args.n_list, resolver.get_list("n-list")?, "--N-list")?;
            let start = require(
                args.start.or(resolver.get_with("start", parse_start)?),
                "--start",
            )?;
            let report = rate_report(&ns, start).map_err(classify)?;
            emit_report(&report, &args.out, stdout)
        }
        Command::Theorem1(args) => {
            let ns = non_empty(args.n_list, resolver.get_list("n-list")?, "--N-list")?;
            let start = require(
                args.start.or(resolver.get_with("start", parse_start)?),
                "--start",
            )?;
            let js = non_empty(args.j_list, resolver.get_list("j-list")?, "--j-list")?;
            let rho = args.rho.or(resolver.get("rho")?).unwrap_or(DEFAULT_RHO);
            let tol = check_tol(args.tol.or(resolver.get("tol")?).unwrap_or(DEFAULT_TOL))?;
            let report = theorem1_report(&ns, start, &js, rho, tol).map_err(classify)?;
            emit_report(&report, &args.out, stdout)
        }
        Command::Theorem2(args) => {
            let n = require(args.n.or(resolver.get("n")?), "--N")?;
            let start = require(
                args.start.or(resolver.get_with("start", parse_start)?),
                "--start",
            )?;
            let checks = args
                .identity_checks
                .or(resolver.get("identity-checks")?)
                .unwrap_or(0);
            let tol = check_tol(args.tol.or(resolver.get("tol")?).unwrap_or(DEFAULT_TOL))?;
            validated_config(n, start)?;
            let report = theorem2_report(n, start, checks, tol).map_err(classify)?;
            emit_report(&report, &args.out, stdout)
        }
        Command::LazyCheck(args) => {
            let ns = non_empty(args.n_list, resolver.get_list("n-list")?, "--N-list")?;
            let tol = check_tol(args.tol.or(resolver.get("tol")?).unwrap_or(DEFAULT_TOL))?;
            let report = lazy_equivalence_report(&ns, tol).map_err(classify)?;
            emit_report(&report, &args.out, stdout)?;
            if report.pass {
                Ok(())
            } else {
                Err(numerical("exit laws differ beyond tolerance"))
            }
        }
        Command::Truncation(args) => {
            let n = require(args.n.or(resolver.get("n")?), "--N")?;
            let quad_tol = check_tol(args.quad_tol.or(resolver.get("quad-tol")?).unwrap_or(1e-12))?;
            let ctx = ConformalContext::new().with_quad_tol(quad_tol);
            let report = truncation_profile(n, &ctx).map_err(classify)?;
            emit_report(&report, &args.out, stdout)
        }
    }
}

fn non_empty<T>(flag: Vec<T>, cfg: Option<Vec<T>>, what: &str) -> Result<Vec<T>, CliError> {
    if !flag.is_empty() {
        return Ok(flag);
    }
    match cfg {
        Some(v) if !v.is_empty() => Ok(v),
        _ => Err(validation(format!("missing required value: {what}"))),
    }
}

/// Entry point: parse, dispatch, and map errors to exit codes.
pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            // help/version are not errors
            if e.use_stderr() {
                eprint!("{e}");
                return 1;
            }
            print!("{e}");
            return 0;
        }
    };
    let mut stdout = std::io::stdout();
    match run_command(cli, &mut stdout) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_capture(args: &[&str]) -> (i32, String) {
        let cli = match Cli::try_parse_from(args) {
            Ok(cli) => cli,
            Err(e) => return (if e.use_stderr() { 1 } else { 0 }, e.to_string()),
        };
        let mut buf = Vec::new();
        let code = match run_command(cli, &mut buf) {
            Ok(()) => 0,
            Err(e) => e.code(),
        };
        (code, String::from_utf8(buf).unwrap())
    }

    #[test]
    fn exact_prints_bare_value() {
        let (code, out) = run_capture(&[
            "ruinlab",
            "exact",
            "--N",
            "3",
            "--start",
            "1,1",
            "--quantity",
            "p321",
        ]);
        assert_eq!(code, 0);
        assert!(out.starts_with("0.16666666666666"), "got {out}");
    }

    #[test]
    fn asym_prints_prediction() {
        let (code, out) = run_capture(&[
            "ruinlab",
            "asym",
            "--quantity",
            "third-first",
            "--start",
            "1,1",
            "--N",
            "100",
        ]);
        assert_eq!(code, 0);
        let value: f64 = out.trim().parse().unwrap();
        let expect = 2.0 * 4.559794499959846 / 1e6;
        assert!((value - expect).abs() < 1e-12 * expect);
    }

    #[test]
    fn mc_is_deterministic() {
        let args = [
            "ruinlab",
            "mc",
            "--N",
            "10",
            "--start",
            "1,1",
            "--quantity",
            "third-first",
            "--trials",
            "5000",
            "--seed",
            "7",
        ];
        let (code_a, out_a) = run_capture(&args);
        let (code_b, out_b) = run_capture(&args);
        assert_eq!(code_a, 0);
        assert_eq!(code_b, 0);
        assert_eq!(out_a, out_b);
    }

    #[test]
    fn validation_failures_exit_one() {
        let (code, _) = run_capture(&[
            "ruinlab",
            "exact",
            "--N",
            "2",
            "--start",
            "1,1",
            "--quantity",
            "p321",
        ]);
        assert_eq!(code, 1);
        let (code, _) = run_capture(&[
            "ruinlab",
            "mc",
            "--N",
            "10",
            "--start",
            "1,1",
            "--quantity",
            "p321",
            "--trials",
            "100",
        ]);
        assert_eq!(code, 1, "seed is required for mc");
        let (code, _) = run_capture(&[
            "ruinlab",
            "bm",
            "--N",
            "10",
            "--start",
            "1,1",
            "--quantity",
            "first-wins",
        ]);
        assert_eq!(code, 1);
    }

    #[test]
    fn config_file_provides_defaults_and_flags_override() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("lab.conf");
        std::fs::write(
            &path,
            "n = 3\nstart = 1,1\nquantity = p321 # comment\ntol = 1e-12\n",
        )
        .unwrap();
        let (code, out) = run_capture(&["ruinlab", "exact", "--config", path.to_str().unwrap()]);
        assert_eq!(code, 0);
        assert!(out.starts_with("0.1666"), "config-driven run: {out}");
        // flag wins over config
        let (code, out) = run_capture(&[
            "ruinlab",
            "exact",
            "--config",
            path.to_str().unwrap(),
            "--quantity",
            "third-first",
        ]);
        assert_eq!(code, 0);
        assert!(out.starts_with("0.3333"), "flag-override run: {out}");
    }

    #[test]
    fn moments_subcommand_prints_pass_lines() {
        let (code, out) = run_capture(&["ruinlab", "moments"]);
        assert_eq!(code, 0);
        assert!(out.lines().count() >= 10);
        assert!(out.lines().all(|l| l.starts_with("PASS")));
    }

    #[test]
    fn sweep_csv_has_mandatory_header() {
        let (code, out) = run_capture(&[
            "ruinlab",
            "sweep",
            "--N-list",
            "5,8",
            "--starts",
            "1,1",
            "--quantities",
            "p321",
            "--methods",
            "exact,asym",
        ]);
        assert_eq!(code, 0);
        assert!(out.starts_with(
            "N,start_a,start_b,quantity,method,value,stderr,residual,iterations,seconds"
        ));
        assert_eq!(out.lines().count(), 1 + 4);
    }

    #[test]
    fn scalar_record_formats() {
        let (code, out) = run_capture(&[
            "ruinlab",
            "exact",
            "--N",
            "4",
            "--start",
            "1,1",
            "--quantity",
            "p321",
            "--format",
            "json",
        ]);
        assert_eq!(code, 0);
        assert!(out.contains("\"schema_version\""));
        assert!(out.contains("\"N\": 4"));
    }
}
