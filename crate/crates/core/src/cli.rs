//! Command-line front end. Every command reads a long-format rate CSV,
//! runs one stage of the pipeline and writes a CSV report to `--output` or
//! stdout.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::data::{load_rates, split_by_fraction, write_rates, AgeRateSurface, LoadOptions, SampleSplit};
use crate::decomposition::ComponentRule;
use crate::error::{Error, Result};
use crate::forecast::{forecast_surface, ForecastOptions};
use crate::lambda_opt::{compare_lambdas, optimize_lambda, Criterion, Method, SelectionOptions, DEFAULT_TOLERANCE};
use crate::normal::normal_quantile;
use crate::simulate::{simulate_surface, SimulationConfig};
use crate::transform::BoxCoxLambda;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "fertcast", version, about = "Box-Cox / principal-component forecasting of age-specific rates")]
pub struct Cli {
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    pub verbose: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Choose lambda by rolling-origin accuracy on the validation years.
    SelectLambda(SelectArgs),
    /// Fit through the validation years and forecast ages 1..H years ahead.
    Forecast(ForecastArgs),
    /// Rolling-origin accuracy on the test years for one or more lambdas.
    Evaluate(EvaluateArgs),
    /// Mean profile, components, scores and score forecasts.
    Decompose(DecomposeArgs),
    /// Synthetic surface with a known lambda.
    #[command(hide = true)]
    Simulate(SimulateArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Long-format CSV with columns year,age,rate.
    #[arg(short, long)]
    pub input: PathBuf,

    /// Output CSV; stdout when absent.
    #[arg(short, long)]
    pub output: Option<PathBuf>,

    /// Fraction of years held out for testing; the validation sample has the
    /// same length.
    #[arg(long, default_value_t = 0.2)]
    pub test_fraction: f64,

    /// Interval miscoverage: intervals have nominal coverage 1 - alpha.
    #[arg(long, default_value_t = 0.2)]
    pub alpha: f64,

    /// Rates at or below zero are replaced by this value.
    #[arg(long)]
    pub floor: Option<f64>,

    /// Fixed number of components instead of the eigenvalue-ratio rule.
    #[arg(long)]
    pub components: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    #[command(flatten)]
    pub common: CommonArgs,

    #[arg(long, default_value = "brent")]
    pub method: Method,

    #[arg(long, default_value = "point")]
    pub criterion: Criterion,

    /// Brent tolerance on lambda.
    #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
    pub tolerance: f64,
}

#[derive(Debug, Args)]
pub struct ForecastArgs {
    #[command(flatten)]
    pub common: CommonArgs,

    #[arg(long)]
    pub lambda: f64,

    /// Years ahead; defaults to the length of the test sample.
    #[arg(long)]
    pub horizon: Option<usize>,

    /// Last year used for fitting; defaults to the end of the validation
    /// sample.
    #[arg(long)]
    pub fit_end_year: Option<i32>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub common: CommonArgs,

    /// Single lambda; shorthand for `--lambdas <value>`.
    #[arg(long, conflicts_with = "lambdas")]
    pub lambda: Option<f64>,

    /// Comma-separated lambdas to compare.
    #[arg(long, value_delimiter = ',')]
    pub lambdas: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct DecomposeArgs {
    #[command(flatten)]
    pub common: CommonArgs,

    #[arg(long)]
    pub lambda: f64,

    /// Score forecast horizon; defaults to the length of the test sample.
    #[arg(long)]
    pub horizon: Option<usize>,

    /// Last year used for fitting; defaults to the end of the validation
    /// sample.
    #[arg(long)]
    pub fit_end_year: Option<i32>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    #[arg(long, default_value_t = 0.5)]
    pub lambda: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 1950)]
    pub first_year: i32,
    #[arg(long, default_value_t = 60)]
    pub n_years: usize,
    #[arg(long, default_value_t = 15)]
    pub first_age: i32,
    #[arg(long, default_value_t = 35)]
    pub n_ages: usize,
    #[arg(long, default_value_t = -0.8, allow_negative_numbers = true)]
    pub start_level: f64,
    #[arg(long, default_value_t = 0.027, allow_negative_numbers = true)]
    pub drift: f64,
    #[arg(long, default_value_t = 0.01)]
    pub walk_sd: f64,
    #[arg(long, default_value_t = 0.01)]
    pub noise_sd: f64,
}

/// Exit status for a failed command.
pub fn exit_code(error: &Error) -> i32 {
    match error.root() {
        Error::InvalidArgument(_) => EXIT_VALIDATION,
        Error::Data { .. } | Error::Domain(_) | Error::Io { .. } => EXIT_DATA,
        Error::Numerical(_) => EXIT_NUMERICAL,
        Error::Origin { .. } => unreachable!("root skips origin wrappers"),
    }
}

/// Parses `args`, runs the command and returns the process exit status.
/// Diagnostics go to stderr.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
        }
    };
    let level = if cli.verbose { "info" } else { "warn" };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    match run(&cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("fertcast {}: {e}", stage(&cli.command));
            exit_code(&e)
        }
    }
}

fn stage(command: &Command) -> &'static str {
    match command {
        Command::SelectLambda(_) => "select-lambda",
        Command::Forecast(_) => "forecast",
        Command::Evaluate(_) => "evaluate",
        Command::Decompose(_) => "decompose",
        Command::Simulate(_) => "simulate",
    }
}

pub fn run(command: &Command) -> Result<()> {
    match command {
        Command::SelectLambda(a) => cmd_select_lambda(a),
        Command::Forecast(a) => cmd_forecast(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Decompose(a) => cmd_decompose(a),
        Command::Simulate(a) => cmd_simulate(a),
    }
}

fn check_common(c: &CommonArgs) -> Result<()> {
    if !(c.test_fraction > 0.0 && c.test_fraction < 0.5) {
        return Err(Error::invalid(format!("--test-fraction must lie in (0, 0.5), got {}", c.test_fraction)));
    }
    if !(c.alpha > 0.0 && c.alpha < 1.0) {
        return Err(Error::invalid(format!("--alpha must lie in (0, 1), got {}", c.alpha)));
    }
    if let Some(f) = c.floor {
        if !(f > 0.0 && f.is_finite()) {
            return Err(Error::invalid(format!("--floor must be positive, got {f}")));
        }
    }
    if c.components == Some(0) {
        return Err(Error::invalid("--components must be at least 1"));
    }
    Ok(())
}

fn component_rule(c: &CommonArgs) -> ComponentRule {
    c.components.map_or_else(ComponentRule::default, ComponentRule::Fixed)
}

fn load(c: &CommonArgs) -> Result<(AgeRateSurface, SampleSplit)> {
    let file = File::open(&c.input).map_err(|e| io_error(&c.input, e))?;
    let options = c.floor.map_or_else(LoadOptions::default, LoadOptions::with_floor);
    let surface = load_rates(io::BufReader::new(file), &options)?;
    let split = split_by_fraction(&surface, c.test_fraction)?;
    log::info!(
        "{} years x {} ages; training through {}, validation through {}, test through {}",
        surface.n_years(),
        surface.n_ages(),
        split.training_end_year,
        split.validation_end_year,
        split.test_end_year
    );
    Ok((surface, split))
}

fn io_error(path: &Path, source: io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

fn sink(output: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match output {
        Some(path) => Box::new(BufWriter::new(File::create(path).map_err(|e| io_error(path, e))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_lines(output: Option<&Path>, lines: &[String]) -> Result<()> {
    let mut out = sink(output)?;
    let name = output.map_or_else(|| "<stdout>".to_string(), |p| p.display().to_string());
    let fail = |e: io::Error| Error::Io { path: name.clone(), source: e };
    for line in lines {
        writeln!(out, "{line}").map_err(fail)?;
    }
    out.flush().map_err(fail)
}

fn lambda_arg(value: f64) -> Result<BoxCoxLambda> {
    BoxCoxLambda::new(value).map_err(|_| Error::invalid(format!("--lambda must lie in [0, 1], got {value}")))
}

/// Fit end year and horizon for commands that fit once and forecast.
fn fit_window(surface: &AgeRateSurface, split: &SampleSplit, fit_end: Option<i32>, horizon: Option<usize>) -> Result<(i32, usize)> {
    let fit_end = fit_end.unwrap_or(split.validation_end_year);
    if surface.year_index(fit_end).is_none() {
        return Err(Error::invalid(format!(
            "--fit-end-year {fit_end} is outside {}..={}",
            surface.first_year(),
            surface.last_year()
        )));
    }
    let horizon = horizon.unwrap_or(split.test_years());
    if horizon == 0 {
        return Err(Error::invalid("--horizon must be at least 1"));
    }
    Ok((fit_end, horizon))
}

pub fn cmd_select_lambda(a: &SelectArgs) -> Result<()> {
    check_common(&a.common)?;
    if !(a.tolerance > 0.0) {
        return Err(Error::invalid(format!("--tolerance must be positive, got {}", a.tolerance)));
    }
    let (surface, split) = load(&a.common)?;
    let selection = optimize_lambda(
        &surface,
        &split,
        &SelectionOptions {
            criterion: a.criterion,
            alpha: a.common.alpha,
            method: a.method,
            tolerance: a.tolerance,
            components: component_rule(&a.common),
        },
    )?;
    log::info!("selected lambda {} ({} evaluations)", selection.lambda_star, selection.evaluations.len());
    let mut lines = vec!["kind,lambda,objective".to_string()];
    lines.push(format!("selected,{},{}", selection.lambda_star.value(), selection.objective_value));
    lines.extend(selection.evaluations.iter().map(|(l, v)| format!("eval,{l},{v}")));
    write_lines(a.common.output.as_deref(), &lines)
}

pub fn cmd_forecast(a: &ForecastArgs) -> Result<()> {
    check_common(&a.common)?;
    let lambda = lambda_arg(a.lambda)?;
    let (surface, split) = load(&a.common)?;
    let (fit_end, horizon) = fit_window(&surface, &split, a.fit_end_year, a.horizon)?;
    let run = forecast_surface(
        &surface.years_through(fit_end)?,
        &ForecastOptions {
            lambda,
            horizon,
            alpha: a.common.alpha,
            components: component_rule(&a.common),
        },
    )?;
    let r = &run.rates;
    let mut lines = vec!["horizon,age,point,lower,upper,clamped".to_string()];
    for h in 0..r.horizon() {
        for i in 0..r.n_ages() {
            lines.push(format!(
                "{},{},{},{},{},{}",
                h + 1,
                r.first_age + i as i32,
                r.rate_point[(h, i)],
                r.rate_lower[(h, i)],
                r.rate_upper[(h, i)],
                r.clamped[(h, i)]
            ));
        }
    }
    write_lines(a.common.output.as_deref(), &lines)
}

pub fn cmd_evaluate(a: &EvaluateArgs) -> Result<()> {
    check_common(&a.common)?;
    let values: Vec<f64> = match a.lambda {
        Some(l) => vec![l],
        None => a.lambdas.clone(),
    };
    if values.is_empty() {
        return Err(Error::invalid("supply --lambda or a nonempty --lambdas list"));
    }
    let lambdas = values.iter().map(|&l| lambda_arg(l)).collect::<Result<Vec<_>>>()?;
    let (surface, split) = load(&a.common)?;
    let cmp = compare_lambdas(&surface, &lambdas, &split, a.common.alpha, component_rule(&a.common))?;

    let single = lambdas.len() == 1;
    let mut header = vec!["h".to_string()];
    if single {
        header.extend(["mafe".to_string(), "interval_score".to_string()]);
    } else {
        header.extend(lambdas.iter().map(|l| format!("mafe_{l}")));
        header.extend(lambdas.iter().map(|l| format!("score_{l}")));
    }
    let mut lines = vec![header.join(",")];
    let row = |label: String, mafe: Vec<f64>, score: Vec<f64>| {
        let cells: Vec<String> = mafe.iter().chain(&score).map(|v| v.to_string()).collect();
        format!("{label},{}", cells.join(","))
    };
    let n_h = cmp.tables[0].rows.len();
    for h in 0..n_h {
        lines.push(row(
            (h + 1).to_string(),
            cmp.tables.iter().map(|t| t.rows[h].mafe).collect(),
            cmp.tables.iter().map(|t| t.rows[h].interval_score).collect(),
        ));
    }
    lines.push(row(
        "mean".into(),
        cmp.tables.iter().map(|t| t.mean_mafe()).collect(),
        cmp.tables.iter().map(|t| t.mean_interval_score()).collect(),
    ));
    lines.push(row(
        "median".into(),
        cmp.tables.iter().map(|t| t.median_mafe()).collect(),
        cmp.tables.iter().map(|t| t.median_interval_score()).collect(),
    ));
    write_lines(a.common.output.as_deref(), &lines)
}

/// Long format: `kind,component,key,value,lower,upper` where `key` is an age
/// for `mean`/`loading` rows, a year for `score`/`score_forecast` rows and
/// the component rank for `singular_value` rows.
pub fn cmd_decompose(a: &DecomposeArgs) -> Result<()> {
    check_common(&a.common)?;
    let lambda = lambda_arg(a.lambda)?;
    let (surface, split) = load(&a.common)?;
    let (fit_end, horizon) = fit_window(&surface, &split, a.fit_end_year, a.horizon)?;
    let run = forecast_surface(
        &surface.years_through(fit_end)?,
        &ForecastOptions {
            lambda,
            horizon,
            alpha: a.common.alpha,
            components: component_rule(&a.common),
        },
    )?;
    let d = &run.decomposition;
    let q = normal_quantile(1.0 - a.common.alpha / 2.0);

    let mut lines = vec!["kind,component,key,value,lower,upper".to_string()];
    for (i, m) in d.mean.iter().enumerate() {
        lines.push(format!("mean,,{},{m},,", d.first_age + i as i32));
    }
    for (k, s) in d.singular_values.iter().enumerate() {
        lines.push(format!("singular_value,{},{},{s},,", k + 1, k + 1));
    }
    for k in 0..d.k() {
        for i in 0..d.components.nrows() {
            lines.push(format!("loading,{},{},{},,", k + 1, d.first_age + i as i32, d.components[(i, k)]));
        }
        for t in 0..d.scores.nrows() {
            lines.push(format!("score,{},{},{},,", k + 1, d.first_year + t as i32, d.scores[(t, k)]));
        }
        for h in 0..run.scores.horizon() {
            let p = run.scores.points[(h, k)];
            let half = q * run.scores.variances[(h, k)].max(0.0).sqrt();
            lines.push(format!(
                "score_forecast,{},{},{p},{},{}",
                k + 1,
                fit_end + 1 + h as i32,
                p - half,
                p + half
            ));
        }
    }
    write_lines(a.common.output.as_deref(), &lines)
}

pub fn cmd_simulate(a: &SimulateArgs) -> Result<()> {
    let surface = simulate_surface(&SimulationConfig {
        first_year: a.first_year,
        n_years: a.n_years,
        first_age: a.first_age,
        n_ages: a.n_ages,
        lambda: a.lambda,
        start_level: a.start_level,
        drift: a.drift,
        walk_sd: a.walk_sd,
        noise_sd: a.noise_sd,
        seed: a.seed,
    })?;
    let out = sink(a.output.as_deref())?;
    write_rates(&surface, out)
}
