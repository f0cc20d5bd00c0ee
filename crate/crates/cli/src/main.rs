//! `argap`: sample stable filters, build reference curves, fit AR mixtures and
//! select the number of modes from the command line.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use argap::gapstat::{reference_curve, select_number_of_modes, EmpiricalMeasure, GapResult, ReferenceConfig};
use argap::io;
use argap::mixture_em::{aic, bic, fit_em, EmConfig, FitResult, TimeSeries};
use argap::sampler::{
    default_volume_samples, load_or_estimate_volumes, sample_uniform_stable_filters, ConfigurationWeights,
    DEFAULT_VOLUME_SEED, MAX_LAG,
};
use argap::simgen::{generate_tvar, make_scenario, run_experiment, scenario_spec, ExperimentConfig};
use argap::{Error, Result};

const CACHE_ENV: &str = "ARGAP_CACHE_DIR";

#[derive(Parser)]
#[command(name = "argap", version, about = "Estimate the number of AR modes with the Gap statistic")]
struct Cli {
    /// Output format.
    #[arg(long, value_enum, global = true, default_value_t = Format::Csv)]
    format: Format,
    /// Maximum number of worker threads (default: available parallelism).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output file (default: standard output).
    #[arg(long, short, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Measure {
    MinOverModes,
    NoiseVariance,
}

impl From<Measure> for EmpiricalMeasure {
    fn from(m: Measure) -> Self {
        match m {
            Measure::MinOverModes => EmpiricalMeasure::MinOverModes,
            Measure::NoiseVariance => EmpiricalMeasure::NoiseVariance,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Draw filters uniformly from the stable region.
    Sample(SampleArgs),
    /// Build the reference curve log W_M for M = 1..=mmax.
    Refcurve(RefcurveArgs),
    /// Fit an M-mode AR mixture to a series.
    Fit(FitArgs),
    /// Select the number of modes of a series.
    Select(SelectArgs),
    /// Run a benchmark scenario repeatedly and tabulate the selections.
    Experiment(ExperimentArgs),
    /// Generate a series from a benchmark scenario or from given filters.
    Simulate(SimulateArgs),
}

#[derive(Args)]
struct VolumeArgs {
    /// Monte Carlo samples for the configuration volumes (default depends on the lag).
    #[arg(long)]
    volume_samples: Option<u64>,
}

impl VolumeArgs {
    fn weights(&self, lag: usize) -> Result<ConfigurationWeights> {
        let n = self.volume_samples.unwrap_or_else(|| default_volume_samples(lag));
        let dir = std::env::var_os(CACHE_ENV).map(PathBuf::from);
        load_or_estimate_volumes(dir.as_deref(), lag, n, DEFAULT_VOLUME_SEED)
    }
}

#[derive(Args)]
struct EmArgs {
    /// EM restarts per number of modes.
    #[arg(long, default_value_t = 50)]
    em_restarts: usize,
    /// Iteration cap per EM run.
    #[arg(long, default_value_t = 500)]
    max_iter: usize,
    /// Convergence threshold on the log-likelihood change.
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
}

impl EmArgs {
    fn config(&self) -> Result<EmConfig> {
        if self.em_restarts == 0 || self.max_iter == 0 || self.tol.is_nan() || self.tol <= 0.0 {
            return Err(Error::InvalidInput("EM restarts, iterations and tolerance must be positive".into()));
        }
        Ok(EmConfig { max_iter: self.max_iter, tol: self.tol, n_restarts: self.em_restarts })
    }
}

#[derive(Args)]
struct SeriesArgs {
    /// Series CSV with header `x`.
    #[arg(long)]
    series: PathBuf,
    /// Presample CSV (header `x`, oldest first). Without it the first `lag`
    /// observations of the series are used as presample.
    #[arg(long)]
    presample: Option<PathBuf>,
    /// AR order.
    #[arg(long)]
    lag: usize,
}

impl SeriesArgs {
    fn load(&self) -> Result<(TimeSeries, PresampleSource)> {
        check_lag(self.lag)?;
        let values = io::read_series_csv(open(&self.series)?)?;
        match &self.presample {
            None => Ok((TimeSeries::from_leading_presample(values, self.lag)?, PresampleSource::LeadingObservations)),
            Some(path) => {
                let pre = io::read_series_csv(open(path)?)?;
                if pre.len() != self.lag {
                    return Err(Error::InvalidInput(format!(
                        "presample must hold exactly {} values, found {}",
                        self.lag,
                        pre.len()
                    )));
                }
                if values.is_empty() {
                    return Err(Error::InvalidInput("series too short: no observations".into()));
                }
                // TimeSeries wants the most recent presample value first.
                let presample = pre.into_iter().rev().collect();
                Ok((TimeSeries::new(presample, values)?, PresampleSource::File))
            }
        }
    }
}

#[derive(Clone, Copy, Serialize)]
#[serde(rename_all = "snake_case")]
enum PresampleSource {
    LeadingObservations,
    File,
}

impl PresampleSource {
    fn name(self) -> &'static str {
        match self {
            PresampleSource::LeadingObservations => "leading_observations",
            PresampleSource::File => "file",
        }
    }
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long)]
    lag: usize,
    #[arg(long)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    volumes: VolumeArgs,
}

#[derive(Args)]
struct ReferenceArgs {
    /// Filters per reference instance.
    #[arg(long, default_value_t = 1000)]
    filters: usize,
    /// Independent reference instances averaged into the curve.
    #[arg(long, default_value_t = 20)]
    instances: usize,
    /// k-medoids restarts per instance.
    #[arg(long, default_value_t = 20)]
    kmedoids_restarts: usize,
    #[command(flatten)]
    volumes: VolumeArgs,
}

#[derive(Args)]
struct RefcurveArgs {
    #[arg(long)]
    lag: usize,
    #[arg(long)]
    mmax: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    reference: ReferenceArgs,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    series: SeriesArgs,
    /// Number of modes.
    #[arg(long)]
    modes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    em: EmArgs,
}

#[derive(Args)]
struct SelectArgs {
    #[command(flatten)]
    series: SeriesArgs,
    #[arg(long)]
    mmax: usize,
    /// Reference curve CSV written by `refcurve`.
    #[arg(long)]
    refcurve: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Error measure behind the empirical curve.
    #[arg(long, value_enum, default_value_t = Measure::MinOverModes)]
    measure: Measure,
    #[command(flatten)]
    em: EmArgs,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Scenario 1, 2 or 3.
    #[arg(long)]
    scenario: u8,
    #[arg(long, default_value_t = 20)]
    replications: usize,
    /// Largest M considered (default 8 for scenario 3, otherwise 6).
    #[arg(long)]
    mmax: Option<usize>,
    /// Reference curve CSV; built on the fly when omitted.
    #[arg(long)]
    refcurve: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Error measure behind the empirical curve.
    #[arg(long, value_enum, default_value_t = Measure::MinOverModes)]
    measure: Measure,
    #[command(flatten)]
    em: EmArgs,
    #[command(flatten)]
    reference: ReferenceArgs,
}

#[derive(Args)]
struct SimulateArgs {
    /// Benchmark scenario whose filters are drawn at random.
    #[arg(long, conflicts_with = "filters")]
    scenario: Option<u8>,
    /// Filters CSV (`psi_1..psi_L`), one mode per row.
    #[arg(long, required_unless_present = "scenario")]
    filters: Option<PathBuf>,
    /// Per-step mode probabilities, comma separated (iid switching).
    #[arg(long, value_delimiter = ',', conflicts_with = "segments")]
    probabilities: Vec<f64>,
    /// Number of equal consecutive segments, one per mode.
    #[arg(long)]
    segments: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    sigma2: f64,
    #[arg(long, default_value_t = 1400)]
    length: usize,
    #[arg(long, default_value_t = 100)]
    burn_in: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    volumes: VolumeArgs,
}

fn check_lag(lag: usize) -> Result<()> {
    if lag == 0 || lag > MAX_LAG {
        return Err(Error::InvalidInput(format!("lag must be between 1 and {MAX_LAG}, got {lag}")));
    }
    Ok(())
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::InvalidInput(format!("cannot open {}: {e}", path.display())))
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    })
}

fn reference_from(args: &ReferenceArgs, lag: usize, m_max: usize, seed: u64) -> Result<argap::gapstat::ReferenceCurve> {
    let weights = args.volumes.weights(lag)?;
    let config = ReferenceConfig {
        lag,
        m_max,
        n_filters: args.filters,
        n_instances: args.instances,
        kmedoids_restarts: args.kmedoids_restarts.max(1),
    };
    reference_curve(&config, &weights, seed)
}

fn cmd_sample(args: &SampleArgs, format: Format, out: &mut dyn Write) -> Result<()> {
    check_lag(args.lag)?;
    let weights = args.volumes.weights(args.lag)?;
    let filters = sample_uniform_stable_filters(&weights, args.count, args.seed)?;
    match format {
        Format::Csv => io::write_filters_csv(out, args.lag, &filters),
        Format::Json => io::write_json(out, &filters),
    }
}

fn cmd_refcurve(args: &RefcurveArgs, format: Format, out: &mut dyn Write) -> Result<()> {
    check_lag(args.lag)?;
    let curve = reference_from(&args.reference, args.lag, args.mmax, args.seed)?;
    match format {
        Format::Csv => io::write_reference_curve_csv(out, &curve),
        Format::Json => io::write_json(out, &curve),
    }
}

#[derive(Serialize)]
struct FitReport<'a> {
    presample: PresampleSource,
    n_observations: usize,
    weights: &'a [f64],
    modes: Vec<&'a [f64]>,
    sigma2: f64,
    log_likelihood: f64,
    aic: f64,
    bic: f64,
    n_iterations: usize,
    converged: bool,
}

fn cmd_fit(args: &FitArgs, format: Format, out: &mut dyn Write) -> Result<()> {
    let (series, presample) = args.series.load()?;
    let fit: FitResult = fit_em(&series, args.modes, &args.em.config()?, args.seed)?;
    let model = &fit.model;
    match format {
        Format::Csv => {
            let mut text = format!("# presample={} n={}\n", presample.name(), series.len());
            text.push_str("mode,weight");
            for l in 1..=series.lag() {
                text.push_str(&format!(",psi_{l}"));
            }
            text.push('\n');
            for (m, (w, f)) in model.weights.iter().zip(&model.modes).enumerate() {
                text.push_str(&format!("{},{}", m + 1, w));
                for c in f.coefficients() {
                    text.push_str(&format!(",{c}"));
                }
                text.push('\n');
            }
            out.write_all(text.as_bytes())?;
            out.flush()?;
            Ok(())
        }
        Format::Json => io::write_json(
            out,
            &FitReport {
                presample,
                n_observations: series.len(),
                weights: &model.weights,
                modes: model.modes.iter().map(|f| f.coefficients()).collect(),
                sigma2: model.sigma2,
                log_likelihood: fit.log_likelihood,
                aic: aic(&fit),
                bic: bic(&fit, series.len()),
                n_iterations: fit.n_iterations,
                converged: fit.converged,
            },
        ),
    }
}

#[derive(Serialize)]
struct SelectReport<'a> {
    presample: PresampleSource,
    n_observations: usize,
    #[serde(flatten)]
    result: &'a GapResult,
}

fn cmd_select(args: &SelectArgs, format: Format, out: &mut dyn Write) -> Result<()> {
    let (series, presample) = args.series.load()?;
    let reference = io::read_reference_curve_csv(open(&args.refcurve)?)?;
    let result =
        select_number_of_modes(&series, &reference, args.mmax, &args.em.config()?, args.measure.into(), args.seed)?;
    match format {
        Format::Csv => {
            writeln!(
                out,
                "# presample={} n={} measure={} selected_m={} aic_m={} bic_m={}",
                presample.name(),
                series.len(),
                result.measure.name(),
                result.selected_m,
                result.aic_m,
                result.bic_m
            )?;
            io::write_gap_csv(out, &result)
        }
        Format::Json => io::write_json(out, &SelectReport { presample, n_observations: series.len(), result: &result }),
    }
}

fn cmd_experiment(args: &ExperimentArgs, format: Format, out: &mut dyn Write) -> Result<()> {
    let spec = scenario_spec(args.scenario)?;
    let default_m_max = if spec.true_m >= 6 { 8 } else { 6 };
    let reference = match &args.refcurve {
        Some(path) => {
            let curve = io::read_reference_curve_csv(open(path)?)?;
            curve.truncated(args.mmax.unwrap_or(curve.m_max))?
        }
        None => reference_from(&args.reference, spec.lag, args.mmax.unwrap_or(default_m_max), args.seed)?,
    };
    let weights = args.reference.volumes.weights(spec.lag)?;
    let config =
        ExperimentConfig { n_replications: args.replications, em: args.em.config()?, measure: args.measure.into() };
    let table = run_experiment(args.scenario, &config, &reference, &weights, args.seed)?;
    match format {
        Format::Csv => io::write_experiment_csv(out, &table),
        Format::Json => io::write_json(out, &table),
    }
}

fn cmd_simulate(args: &SimulateArgs, format: Format, out: &mut dyn Write) -> Result<()> {
    let truth = match (args.scenario, &args.filters) {
        (Some(id), _) => {
            let spec = scenario_spec(id)?;
            make_scenario(id, &args.volumes.weights(spec.lag)?, args.seed)?
        }
        (None, Some(path)) => {
            let filters = io::read_filters_csv(open(path)?)?;
            let lag = filters.first().map(|f| f.lag()).ok_or_else(|| Error::InvalidInput("no filters given".into()))?;
            let switching = match args.segments {
                Some(n_segments) => argap::simgen::SwitchingSpec::Segmented { n_segments },
                None if args.probabilities.is_empty() => argap::simgen::SwitchingSpec::IidMultinomial {
                    mode_probabilities: vec![1.0 / filters.len() as f64; filters.len()],
                },
                None => argap::simgen::SwitchingSpec::IidMultinomial { mode_probabilities: args.probabilities.clone() },
            };
            argap::simgen::ScenarioTruth {
                true_m: filters.len(),
                lag,
                filters,
                switching,
                sigma2: args.sigma2,
                n: args.length,
                burn_in: args.burn_in,
            }
        }
        (None, None) => return Err(Error::InvalidInput("either --scenario or --filters is required".into())),
    };
    truth.validate()?;
    if !argap::simgen::has_bounded_variance(&truth)? {
        eprintln!("warning: switching between these filters has unbounded variance; the series may overflow");
    }
    let generated = generate_tvar(&truth, derive_simulation_seed(args.seed))?;
    let series = &generated.series;
    match format {
        Format::Csv => {
            let mut values: Vec<f64> = series.presample().into_iter().rev().collect();
            values.extend_from_slice(series.observations());
            io::write_series_csv(out, &values)
        }
        Format::Json => io::write_json(
            out,
            &SimulationReport {
                truth: &truth,
                presample: series.presample().into_iter().rev().collect(),
                observations: series.observations(),
                modes: &generated.modes,
            },
        ),
    }
}

/// The scenario draw and the series draw must not share a stream.
fn derive_simulation_seed(seed: u64) -> u64 {
    argap::seed::derive_seed(seed, 1)
}

#[derive(Serialize)]
struct SimulationReport<'a> {
    truth: &'a argap::simgen::ScenarioTruth,
    /// Oldest first.
    presample: Vec<f64>,
    observations: &'a [f64],
    modes: &'a [usize],
}

fn run(cli: &Cli) -> Result<()> {
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return Err(Error::InvalidInput("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Error::InvalidInput(format!("cannot configure thread pool: {e}")))?;
    }
    let mut out = output(&cli.out)?;
    let out = out.as_mut();
    match &cli.command {
        Command::Sample(a) => cmd_sample(a, cli.format, out),
        Command::Refcurve(a) => cmd_refcurve(a, cli.format, out),
        Command::Fit(a) => cmd_fit(a, cli.format, out),
        Command::Select(a) => cmd_select(a, cli.format, out),
        Command::Experiment(a) => cmd_experiment(a, cli.format, out),
        Command::Simulate(a) => cmd_simulate(a, cli.format, out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_user_error() { 2 } else { 1 })
        }
    }
}
