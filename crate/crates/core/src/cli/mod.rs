//! The `factor-demand` command line.
//!
//! Every subcommand reads an optional declarative config file (JSON, or
//! TOML when the file ends in `.toml`); flags given on the command line
//! override the file, which overrides the built-in defaults. Outputs go to
//! `--out`, or to `$FACTOR_DEMAND_OUT/<command>` (default root `runs`) when
//! `--out` is absent. Each output directory gets one `manifest.json`.
//!
//! Exit codes: 0 success, 2 invalid configuration or data, 3 I/O failure,
//! 4 numerical failure, 5 every replication of some experiment setting
//! failed.

pub mod manifest;

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::data::{validate_dataset, Dataset, Dims};
use crate::dgp::{repurchase_diagnostics, simulate, InitialState, SimConfig};
use crate::error::{Error, Result};
use crate::eval::elasticity::own_price_elasticities;
use crate::eval::experiment::{run_experiment, write_rows, ExperimentConfig, ModelChoice};
use crate::eval::metrics::{accuracy_draw, predict_draw, rmse_draw, score_posterior, score_predictions, MetricsReport};
use crate::eval::split::{split_dataset, SplitSpec, SplitUnit};
use crate::io::{load_dataset, read_draws, read_json, save_dataset, write_draws_binary, write_json, TruthSidecar};
use crate::mixedlogit::{fit_all_categories, predict_dataset, MixedLogitFit, MixedLogitSpec};
use crate::numeric::mean;
use crate::params::{ModelKind, ParamDraw};
use crate::vi::{fit, posterior_sampler, FitConfig, FitResult};

pub use manifest::{RunManifest, MANIFEST_FILE};

/// Environment variable naming the default output root.
pub const OUT_ENV: &str = "FACTOR_DEMAND_OUT";

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;
pub const EXIT_EXPERIMENT_FAILED: i32 = 5;

#[derive(Debug, Parser)]
#[command(name = "factor-demand", version, about = "Dynamic latent-factor demand models: simulate, fit, evaluate")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a purchase panel.
    Simulate(SimulateArgs),
    /// Fit a dynamic or static factor model, or the mixed logit benchmark.
    Fit(FitArgs),
    /// Score a fit on (held-out) data against ground-truth probabilities.
    Evaluate(EvaluateArgs),
    /// Own-price elasticities with posterior credible intervals.
    Elasticity(ElasticityArgs),
    /// Run a replication grid.
    Experiment(ExperimentArgs),
    /// Repurchase vs. switching shares per category.
    DiagnoseInertia(DiagnoseArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// JSON or TOML simulation config.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub consumers: Option<usize>,
    #[arg(long)]
    pub products: Option<usize>,
    #[arg(long)]
    pub trips: Option<usize>,
    #[arg(long)]
    pub categories: Option<usize>,
    #[arg(long)]
    pub factors: Option<usize>,
    /// Switch the inertia term off.
    #[arg(long)]
    pub no_inertia: bool,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Dataset CSV.
    #[arg(long)]
    pub data: PathBuf,
    /// Sidecar JSON (defaults to the CSV path with a `.json` extension).
    #[arg(long)]
    pub truth: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// JSON or TOML fit config.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<ModelChoice>,
    /// Write this many posterior draws (4000 when given without a value).
    #[arg(long, num_args = 0..=1, default_missing_value = "4000")]
    pub draws: Option<usize>,
    /// Write draws as JSON instead of the binary format.
    #[arg(long)]
    pub draws_json: bool,
    #[arg(long)]
    pub prior_scale: Option<f64>,
    #[arg(long)]
    pub factors: Option<usize>,
    #[arg(long)]
    pub max_iterations: Option<usize>,
    #[arg(long)]
    pub mc_samples: Option<usize>,
    #[arg(long)]
    pub minibatch: Option<usize>,
    /// Fit only the first share of each consumer's trips.
    #[arg(long)]
    pub split_fraction: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// `fit.json` written by the `fit` command.
    #[arg(long)]
    pub fit: PathBuf,
    /// Posterior draws file; sampled from the fit when absent.
    #[arg(long)]
    pub draws_file: Option<PathBuf>,
    #[arg(long, default_value_t = 4000)]
    pub n_draws: usize,
    /// Score only the trailing share `1 - f` of each consumer's trips.
    #[arg(long)]
    pub split_fraction: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ElasticityArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub fit: PathBuf,
    #[arg(long)]
    pub draws_file: Option<PathBuf>,
    #[arg(long, default_value_t = 4000)]
    pub n_draws: usize,
    /// Use only the leading share of each consumer's trips.
    #[arg(long)]
    pub split_fraction: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// JSON or TOML grid config.
    #[arg(long)]
    pub grid: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub parallel: usize,
    /// Overrides the grid's base seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub replications: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Simulation config file contents.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    #[serde(rename = "I")]
    pub n_consumers: usize,
    #[serde(rename = "J")]
    pub n_products: usize,
    #[serde(rename = "T")]
    pub n_trips: usize,
    #[serde(rename = "C")]
    pub n_categories: usize,
    #[serde(rename = "K")]
    pub n_factors: usize,
    pub inertia: bool,
    pub initial_state: InitialState,
    pub price_shock_scale: f64,
    pub seed: u64,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        SimulateConfig {
            n_consumers: 40,
            n_products: 10,
            n_trips: 5,
            n_categories: 10,
            n_factors: 5,
            inertia: true,
            initial_state: InitialState::Uniform,
            price_shock_scale: 0.2,
            seed: 0,
        }
    }
}

impl SimulateConfig {
    pub fn to_sim_config(&self) -> Result<SimConfig> {
        let dims = Dims::uniform(
            self.n_consumers,
            self.n_categories,
            self.n_products,
            self.n_trips,
            self.n_factors,
        )?;
        let mut config = SimConfig::new(dims, self.seed);
        if !self.inertia {
            config = config.without_inertia();
        }
        config.initial_state = self.initial_state;
        config.price_shock_scale = self.price_shock_scale;
        config.validate()?;
        Ok(config)
    }
}

/// Fit config file contents: the variational settings at top level, plus
/// the model choice and a `mixed_logit` table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitCommandConfig {
    pub model: ModelChoice,
    #[serde(flatten)]
    pub vi: FitConfig,
    pub mixed_logit: MixedLogitSpec,
    pub draws: Option<usize>,
    pub split_fraction: Option<f64>,
}

impl Default for FitCommandConfig {
    fn default() -> Self {
        FitCommandConfig {
            model: ModelChoice::Dynamic,
            vi: FitConfig::default(),
            mixed_logit: MixedLogitSpec::default(),
            draws: None,
            split_fraction: None,
        }
    }
}

/// The `fit.json` document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitOutput {
    pub model: ModelChoice,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub factor: Option<FitResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mixed_logit: Option<Vec<MixedLogitFit>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_sim_draws: Option<usize>,
}

/// Maps an error to the process exit code.
pub fn exit_code(error: &Error) -> i32 {
    match error {
        Error::Io(_) => EXIT_IO,
        Error::Json(e) if e.is_io() => EXIT_IO,
        Error::Csv(e) if e.is_io_error() => EXIT_IO,
        Error::NonFiniteElbo { .. } => EXIT_NUMERIC,
        _ => EXIT_CONFIG,
    }
}

/// Parses `args` (including the program name) and runs the command,
/// returning the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if let Error::NonFiniteElbo { trace_tail, .. } = &e {
                eprintln!("ELBO trace tail: {trace_tail:?}");
            }
            exit_code(&e)
        }
    }
}

fn dispatch(command: Command) -> Result<i32> {
    match command {
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Fit(a) => cmd_fit(&a),
        Command::Evaluate(a) => cmd_evaluate(&a),
        Command::Elasticity(a) => cmd_elasticity(&a),
        Command::Experiment(a) => cmd_experiment(&a),
        Command::DiagnoseInertia(a) => cmd_diagnose(&a),
    }
}

/// Loads a JSON or TOML config file, reporting the line of a syntax error.
pub fn load_config<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    let is_toml = path.extension().is_some_and(|e| e == "toml");
    if is_toml {
        toml::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
    } else {
        serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
    }
}

fn config_or_default<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    path.map_or_else(|| Ok(T::default()), load_config)
}

/// `--out`, else `$FACTOR_DEMAND_OUT/<command>`, else `runs/<command>`.
pub fn resolve_out(out: Option<&Path>, command: &str) -> PathBuf {
    match out {
        Some(p) => p.to_path_buf(),
        None => {
            let root = std::env::var_os(OUT_ENV).map_or_else(|| PathBuf::from("runs"), PathBuf::from);
            root.join(command)
        }
    }
}

fn load_validated(data: &DataArgs) -> Result<(Dataset, TruthSidecar, Vec<PathBuf>)> {
    let (dataset, sidecar) = load_dataset(&data.data, data.truth.as_deref())?;
    validate_dataset(&dataset).into_result()?;
    let sidecar_path = data.truth.clone().unwrap_or_else(|| data.data.with_extension("json"));
    Ok((dataset, sidecar, vec![data.data.clone(), sidecar_path]))
}

fn by_trip(fraction: f64) -> SplitSpec {
    SplitSpec {
        train_fraction: fraction,
        unit: SplitUnit::ByTrip,
    }
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<i32> {
    let started = manifest::unix_now();
    let mut cfg: SimulateConfig = config_or_default(args.config.as_deref())?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    let overrides = [
        (&mut cfg.n_consumers, args.consumers),
        (&mut cfg.n_products, args.products),
        (&mut cfg.n_trips, args.trips),
        (&mut cfg.n_categories, args.categories),
        (&mut cfg.n_factors, args.factors),
    ];
    for (slot, flag) in overrides {
        if let Some(v) = flag {
            *slot = v;
        }
    }
    if args.no_inertia {
        cfg.inertia = false;
    }
    let sim_config = cfg.to_sim_config()?;
    let sim = simulate(&sim_config)?;
    let out = resolve_out(args.out.as_deref(), "simulate");
    save_dataset(&sim.dataset, Some(cfg.seed), Some(&sim.params), &out, "dataset")?;
    let outputs = vec![out.join("dataset.csv"), out.join("dataset.json")];
    let inputs: Vec<PathBuf> = args.config.iter().cloned().collect();
    RunManifest::new("simulate", &cfg, cfg.seed, started)?.finish(&out, &inputs, &outputs)?;
    println!("wrote {} observations to {}", sim.dataset.len(), out.display());
    Ok(EXIT_OK)
}

pub fn cmd_fit(args: &FitArgs) -> Result<i32> {
    let started = manifest::unix_now();
    let mut cfg: FitCommandConfig = config_or_default(args.config.as_deref())?;
    if let Some(m) = args.model {
        cfg.model = m;
    }
    if let Some(s) = args.prior_scale {
        cfg.vi.prior = crate::model::PriorSpec::new(s)?;
    }
    if let Some(k) = args.factors {
        cfg.vi.n_factors = k;
    }
    if let Some(n) = args.max_iterations {
        cfg.vi.max_iterations = n;
    }
    if let Some(m) = args.mc_samples {
        cfg.vi.mc_samples = m;
    }
    if args.minibatch.is_some() {
        cfg.vi.minibatch = args.minibatch;
    }
    if args.draws.is_some() {
        cfg.draws = args.draws;
    }
    if args.split_fraction.is_some() {
        cfg.split_fraction = args.split_fraction;
    }
    if let Some(s) = args.seed {
        cfg.vi.seed = s;
    }
    if let Some(kind) = cfg.model.factor_kind() {
        cfg.vi.kind = kind;
    }
    cfg.vi.validate()?;
    cfg.mixed_logit.validate()?;

    let (dataset, _, inputs) = load_validated(&args.data)?;
    let train = match cfg.split_fraction {
        Some(f) => split_dataset(&dataset, &by_trip(f), cfg.vi.seed)?.0,
        None => dataset,
    };
    let out = resolve_out(args.out.as_deref(), "fit");
    std::fs::create_dir_all(&out)?;
    let mut outputs = Vec::new();
    let start = Instant::now();

    let document = match cfg.model.factor_kind() {
        Some(_) => {
            let result = fit(&train, &cfg.vi)?;
            if !result.converged {
                eprintln!(
                    "warning: not converged after {} iterations (statistic {:?})",
                    result.iterations_run, result.convergence_statistic
                );
            }
            if let Some(s) = cfg.draws {
                let name = if args.draws_json { "draws.json" } else { "draws.bin" };
                let path = out.join(name);
                let sampler = posterior_sampler(&result.state, cfg.vi.seed);
                if args.draws_json {
                    let draws: Vec<ParamDraw> = sampler.take(s).collect();
                    write_json(&path, &draws)?;
                } else {
                    write_draws_binary(&path, &result.state.layout, s, sampler)?;
                }
                outputs.push(path);
            }
            FitOutput {
                model: cfg.model,
                seed: cfg.vi.seed,
                factor: Some(result),
                mixed_logit: None,
                n_sim_draws: None,
            }
        }
        None => {
            let fits = fit_all_categories(&train, &cfg.mixed_logit)
                .into_iter()
                .collect::<Result<Vec<_>>>()?;
            for f in &fits {
                if !f.converged {
                    eprintln!(
                        "warning: category {} not converged (gradient norm {:.3e})",
                        f.category + 1,
                        f.grad_norm
                    );
                }
                if f.is_penalized() {
                    eprintln!(
                        "warning: category {} has never-chosen products {:?}; their fixed effects are penalized",
                        f.category + 1,
                        f.penalized_products.iter().map(|p| p + 1).collect::<Vec<_>>()
                    );
                }
                let path = out.join(format!("category_{:03}.json", f.category + 1));
                write_json(&path, f)?;
                outputs.push(path);
            }
            let metrics = MixedLogitMetrics::new(&fits, &train, cfg.mixed_logit.n_sim_draws)?;
            let path = out.join("metrics.json");
            write_json(&path, &metrics)?;
            outputs.push(path);
            FitOutput {
                model: cfg.model,
                seed: cfg.vi.seed,
                factor: None,
                mixed_logit: Some(fits),
                n_sim_draws: Some(cfg.mixed_logit.n_sim_draws),
            }
        }
    };
    let path = out.join("fit.json");
    write_json(&path, &document)?;
    outputs.insert(0, path);
    let timing = out.join("timing.json");
    write_json(&timing, &serde_json::json!({ "fit_seconds": start.elapsed().as_secs_f64() }))?;
    RunManifest::new("fit", &cfg, cfg.vi.seed, started)?.finish(&out, &inputs, &outputs)?;
    println!("wrote {} fit to {}", cfg.model, out.display());
    Ok(EXIT_OK)
}

/// Combined per-category summary of a mixed logit run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixedLogitMetrics {
    pub total_loglik: f64,
    pub all_converged: bool,
    pub categories: Vec<MixedLogitCategoryRow>,
    /// In-sample scores when the data carry ground-truth probabilities.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub in_sample: Option<MetricsReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixedLogitCategoryRow {
    pub category: usize,
    pub loglik: f64,
    pub converged: bool,
    pub iterations: usize,
    pub grad_norm: f64,
    pub penalized: bool,
    pub n_obs: usize,
}

impl MixedLogitMetrics {
    pub fn new(fits: &[MixedLogitFit], data: &Dataset, n_sim_draws: usize) -> Result<Self> {
        let in_sample = match data.true_probs {
            Some(_) => Some(score_predictions(&predict_dataset(fits, data, n_sim_draws)?, data)?),
            None => None,
        };
        Ok(MixedLogitMetrics {
            total_loglik: fits.iter().map(|f| f.loglik).sum(),
            all_converged: fits.iter().all(|f| f.converged),
            categories: fits
                .iter()
                .map(|f| MixedLogitCategoryRow {
                    category: f.category + 1,
                    loglik: f.loglik,
                    converged: f.converged,
                    iterations: f.iterations,
                    grad_norm: f.grad_norm,
                    penalized: f.is_penalized(),
                    n_obs: f.n_obs,
                })
                .collect(),
            in_sample,
        })
    }
}

fn load_fit(path: &Path) -> Result<FitOutput> {
    read_json(path)
}

fn factor_state(doc: &FitOutput) -> Result<(&FitResult, ModelKind)> {
    match (doc.factor.as_ref(), doc.model.factor_kind()) {
        (Some(r), Some(kind)) => Ok((r, kind)),
        _ => Err(Error::config("fit", format!("{} fits carry no factor-model posterior", doc.model))),
    }
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> Result<i32> {
    let started = manifest::unix_now();
    let doc = load_fit(&args.fit)?;
    let seed = args.seed.unwrap_or(doc.seed);
    let (dataset, _, mut inputs) = load_validated(&args.data)?;
    inputs.push(args.fit.clone());
    let test = match args.split_fraction {
        Some(f) => split_dataset(&dataset, &by_trip(f), seed)?.1,
        None => dataset,
    };
    let report = match doc.model.factor_kind() {
        Some(_) => {
            let (result, kind) = factor_state(&doc)?;
            match &args.draws_file {
                Some(path) => {
                    inputs.push(path.clone());
                    let draws = read_draws(path, &result.state.layout)?;
                    score_draws(&draws, &test, kind)?
                }
                None => score_posterior(&result.state, &test, kind, args.n_draws, seed)?,
            }
        }
        None => {
            let fits = doc.mixed_logit.as_deref().unwrap_or(&[]);
            let pred = predict_dataset(fits, &test, doc.n_sim_draws.unwrap_or(MixedLogitSpec::default().n_sim_draws))?;
            score_predictions(&pred, &test)?
        }
    };
    let out = resolve_out(args.out.as_deref(), "evaluate");
    std::fs::create_dir_all(&out)?;
    let path = out.join("metrics.json");
    write_json(&path, &report)?;
    let config = serde_json::json!({
        "fit": args.fit, "n_draws": args.n_draws, "split_fraction": args.split_fraction,
        "draws_file": args.draws_file, "seed": seed,
    });
    RunManifest::new("evaluate", &config, seed, started)?.finish(&out, &inputs, &[path])?;
    println!("rmse {:.6} accuracy {:.6} on {} observations", report.rmse_mean, report.accuracy, report.n_test);
    Ok(EXIT_OK)
}

fn score_draws(draws: &[ParamDraw], test: &Dataset, kind: ModelKind) -> Result<MetricsReport> {
    let truth = test
        .true_probs
        .as_ref()
        .ok_or_else(|| Error::InvalidDataset("test data carry no ground-truth probabilities".into()))?;
    if draws.is_empty() {
        return Err(Error::config("draws", "need at least one posterior draw"));
    }
    let chosen = test.chosen();
    let mut rmse = Vec::with_capacity(draws.len());
    let mut acc = Vec::with_capacity(draws.len());
    for d in draws {
        let pred = predict_draw(d, test, kind)?;
        rmse.push(rmse_draw(&pred, truth)?);
        acc.push(accuracy_draw(&pred, &chosen)?);
    }
    Ok(MetricsReport {
        rmse_mean: mean(&rmse),
        rmse_per_draw: rmse,
        accuracy: mean(&acc),
        n_test: test.len(),
        wall_time_seconds: 0.0,
    })
}

pub fn cmd_elasticity(args: &ElasticityArgs) -> Result<i32> {
    let started = manifest::unix_now();
    let doc = load_fit(&args.fit)?;
    let seed = args.seed.unwrap_or(doc.seed);
    let (result, kind) = factor_state(&doc)?;
    let (dataset, _, mut inputs) = load_validated(&args.data)?;
    inputs.push(args.fit.clone());
    let data = match args.split_fraction {
        Some(f) => split_dataset(&dataset, &by_trip(f), seed)?.0,
        None => dataset,
    };
    let report = match &args.draws_file {
        Some(path) => {
            inputs.push(path.clone());
            own_price_elasticities(read_draws(path, &result.state.layout)?, &data, kind)?
        }
        None => own_price_elasticities(posterior_sampler(&result.state, seed).take(args.n_draws), &data, kind)?,
    };
    let out = resolve_out(args.out.as_deref(), "elasticity");
    std::fs::create_dir_all(&out)?;
    let path = out.join("elasticities.csv");
    std::fs::write(&path, report.to_csv())?;
    let config = serde_json::json!({
        "fit": args.fit, "n_draws": args.n_draws, "split_fraction": args.split_fraction,
        "draws_file": args.draws_file, "seed": seed,
    });
    RunManifest::new("elasticity", &config, seed, started)?.finish(&out, &inputs, &[path])?;
    println!(
        "{} product-category pairs, mean 95% interval width {:.6}",
        report.rows.len(),
        report.mean_interval_width()
    );
    Ok(EXIT_OK)
}

pub fn cmd_experiment(args: &ExperimentArgs) -> Result<i32> {
    let started = manifest::unix_now();
    let mut cfg: ExperimentConfig = load_config(&args.grid)?;
    if let Some(s) = args.seed {
        cfg.base_seed = s;
    }
    if let Some(r) = args.replications {
        cfg.replications = r;
    }
    let output = run_experiment(&cfg, args.parallel)?;
    let out = resolve_out(args.out.as_deref(), "experiment");
    let written = output.write(&out)?;
    for w in &output.warnings {
        eprintln!("warning: {w}");
    }
    RunManifest::new("experiment", &cfg, cfg.base_seed, started)?.finish(&out, std::slice::from_ref(&args.grid), &written)?;
    let failed = output.failed_settings();
    if !failed.is_empty() {
        eprintln!("error: every replication failed for settings {failed:?}");
        return Ok(EXIT_EXPERIMENT_FAILED);
    }
    println!("wrote {} summary rows to {}", output.summary.len(), out.display());
    Ok(EXIT_OK)
}

pub fn cmd_diagnose(args: &DiagnoseArgs) -> Result<i32> {
    let started = manifest::unix_now();
    let (dataset, _, inputs) = load_validated(&args.data)?;
    let rows = repurchase_diagnostics(&dataset);
    let out = resolve_out(args.out.as_deref(), "diagnose-inertia");
    std::fs::create_dir_all(&out)?;
    let path = out.join("repurchase.csv");
    let one_based: Vec<_> = rows
        .into_iter()
        .map(|mut r| {
            r.category += 1;
            r
        })
        .collect();
    write_rows(&path, &one_based)?;
    let seed = args.seed.unwrap_or(0);
    let config = serde_json::json!({ "data": args.data.data, "seed": seed });
    RunManifest::new("diagnose-inertia", &config, seed, started)?.finish(&out, &inputs, &[path])?;
    for r in &one_based {
        match r.repurchase {
            Some(p) => println!("category {:>3}: repurchase {:.3} over {} pairs", r.category, p, r.n_pairs),
            None => println!("category {:>3}: no repeat purchases", r.category),
        }
    }
    Ok(EXIT_OK)
}
