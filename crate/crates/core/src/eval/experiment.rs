//! Replication grids: simulate, split, fit, score, summarize.
//!
//! Replication `r` of every setting uses the seed
//! `derive_seed(base_seed, Replication, r)` for its simulation, its split,
//! each model fit and the posterior draws used for scoring. Jobs run on a
//! pool of the requested size and their results are collected in grid
//! order, so every output except the timing tables is independent of the
//! pool size.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Dims};
use crate::dgp::{repurchase_diagnostics, simulate, SimConfig};
use crate::error::{Error, Result};
use crate::eval::elasticity::own_price_elasticities;
use crate::eval::metrics::{score_posterior, score_predictions, MetricsReport};
use crate::eval::split::{split_dataset, SplitSpec};
use crate::mixedlogit::{fit_all_categories, predict_dataset, MixedLogitSpec};
use crate::numeric::{mean, std_dev};
use crate::params::ModelKind;
use crate::rng::{derive_seed, Domain};
use crate::vi::{fit, posterior_sampler, FitConfig};

/// A model compared in the grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelChoice {
    Dynamic,
    Static,
    MixedLogit,
}

impl ModelChoice {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelChoice::Dynamic => "dynamic",
            ModelChoice::Static => "static",
            ModelChoice::MixedLogit => "mixed-logit",
        }
    }

    /// The factor-model kind, if this is a factor model.
    pub fn factor_kind(self) -> Option<ModelKind> {
        match self {
            ModelChoice::Dynamic => Some(ModelKind::Dynamic),
            ModelChoice::Static => Some(ModelKind::Static),
            ModelChoice::MixedLogit => None,
        }
    }
}

impl std::fmt::Display for ModelChoice {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ModelChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dynamic" => Ok(ModelChoice::Dynamic),
            "static" => Ok(ModelChoice::Static),
            "mixed-logit" | "mixed_logit" => Ok(ModelChoice::MixedLogit),
            other => Err(Error::config(
                "model",
                format!("unknown model `{other}` (expected dynamic, static or mixed-logit)"),
            )),
        }
    }
}

fn default_models() -> Vec<ModelChoice> {
    vec![ModelChoice::Dynamic, ModelChoice::Static]
}

fn default_true() -> bool {
    true
}

/// One grid point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Setting {
    #[serde(default)]
    pub name: String,
    pub n_consumers: usize,
    pub n_products: usize,
    pub n_trips: usize,
    pub n_categories: usize,
    #[serde(default = "default_factors")]
    pub n_factors: usize,
    #[serde(default = "default_models")]
    pub models: Vec<ModelChoice>,
    /// Simulate with inertia (`rho` drawn from its range) or without.
    #[serde(default = "default_true")]
    pub inertia: bool,
    /// Also compute own-price elasticities on the training data.
    #[serde(default)]
    pub elasticities: bool,
}

fn default_factors() -> usize {
    5
}

impl Setting {
    pub fn new(i: usize, j: usize, t: usize, c: usize, k: usize) -> Self {
        Setting {
            name: String::new(),
            n_consumers: i,
            n_products: j,
            n_trips: t,
            n_categories: c,
            n_factors: k,
            models: default_models(),
            inertia: true,
            elasticities: false,
        }
    }

    pub fn with_models(mut self, models: &[ModelChoice]) -> Self {
        self.models = models.to_vec();
        self
    }

    pub fn dims(&self) -> Result<Dims> {
        Dims::uniform(
            self.n_consumers,
            self.n_categories,
            self.n_products,
            self.n_trips,
            self.n_factors,
        )
    }

    pub fn sim_config(&self, seed: u64) -> Result<SimConfig> {
        let config = SimConfig::new(self.dims()?, seed);
        Ok(if self.inertia { config } else { config.without_inertia() })
    }
}

fn default_replications() -> usize {
    1
}

fn default_posterior_draws() -> usize {
    4000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub settings: Vec<Setting>,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default)]
    pub base_seed: u64,
    /// Posterior draws used for scoring and elasticities.
    #[serde(default = "default_posterior_draws")]
    pub posterior_draws: usize,
    #[serde(default)]
    pub split: SplitSpec,
    /// Template for factor-model fits; `kind`, `n_factors` and `seed` are
    /// set per job.
    #[serde(default)]
    pub fit: FitConfig,
    #[serde(default)]
    pub mixed_logit: MixedLogitSpec,
}

impl ExperimentConfig {
    pub fn new(settings: Vec<Setting>, replications: usize, base_seed: u64) -> Self {
        ExperimentConfig {
            settings,
            replications,
            base_seed,
            posterior_draws: default_posterior_draws(),
            split: SplitSpec::default(),
            fit: FitConfig::default(),
            mixed_logit: MixedLogitSpec::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.settings.is_empty() {
            return Err(Error::config("settings", "grid has no settings"));
        }
        if self.replications == 0 {
            return Err(Error::config("replications", "must be at least 1"));
        }
        if self.posterior_draws == 0 {
            return Err(Error::config("posterior_draws", "must be at least 1"));
        }
        for s in &self.settings {
            s.dims()?;
            if s.models.is_empty() {
                return Err(Error::config("models", "each setting needs at least one model"));
            }
        }
        self.split.validate()?;
        self.fit.validate()?;
        self.mixed_logit.validate()
    }

    pub fn replication_seed(&self, replication: usize) -> u64 {
        derive_seed(self.base_seed, Domain::Replication, replication as u64)
    }
}

/// Outcome of one model on one replication.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetailRow {
    pub setting: usize,
    pub name: String,
    pub replication: usize,
    pub seed: u64,
    pub model: ModelChoice,
    /// `ok`, or the error message of a failed job.
    pub status: String,
    pub n_train: usize,
    pub n_test: usize,
    pub rmse: Option<f64>,
    pub accuracy: Option<f64>,
    pub iterations: Option<usize>,
    pub converged: Option<bool>,
}

impl DetailRow {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

/// Per setting and model means over the successful replications.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub setting: usize,
    pub name: String,
    pub n_consumers: usize,
    pub n_products: usize,
    pub n_trips: usize,
    pub n_categories: usize,
    pub n_factors: usize,
    pub model: ModelChoice,
    pub n_ok: usize,
    pub n_failed: usize,
    pub rmse_mean: Option<f64>,
    pub rmse_sd: Option<f64>,
    pub accuracy_mean: Option<f64>,
    /// Mean training observation count (the usual "observations" column).
    pub n_train_mean: Option<f64>,
    pub n_test_mean: Option<f64>,
}

/// Wall time of one model on one replication.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RuntimeRow {
    pub setting: usize,
    pub n_categories: usize,
    pub replication: usize,
    pub model: ModelChoice,
    pub fit_seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepurchasePlotRow {
    pub setting: usize,
    pub category: usize,
    pub n_pairs: usize,
    pub repurchase: Option<f64>,
    pub switch_each: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RmsePlotRow {
    pub setting: usize,
    pub n_categories: usize,
    pub model: ModelChoice,
    pub rmse_mean: Option<f64>,
    pub rmse_sd: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RuntimePlotRow {
    pub setting: usize,
    pub n_categories: usize,
    pub model: ModelChoice,
    pub seconds_mean: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElasticityPlotRow {
    pub setting: usize,
    pub replication: usize,
    pub model: ModelChoice,
    pub category: usize,
    pub product: usize,
    pub mean: f64,
    pub q025: f64,
    pub q975: f64,
    pub n_obs: usize,
}

/// Everything one replication of one setting produces.
#[derive(Clone, Debug)]
pub struct ReplicationOutcome {
    pub detail: Vec<DetailRow>,
    pub runtime: Vec<RuntimeRow>,
    pub repurchase: Vec<RepurchasePlotRow>,
    pub elasticities: Vec<ElasticityPlotRow>,
}

#[derive(Clone, Debug, Default)]
pub struct ExperimentOutput {
    pub detail: Vec<DetailRow>,
    pub summary: Vec<SummaryRow>,
    pub runtime: Vec<RuntimeRow>,
    pub repurchase: Vec<RepurchasePlotRow>,
    pub elasticities: Vec<ElasticityPlotRow>,
    pub warnings: Vec<String>,
}

impl ExperimentOutput {
    /// Settings none of whose jobs succeeded.
    pub fn failed_settings(&self) -> Vec<usize> {
        self.summary
            .iter()
            .map(|r| r.setting)
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .filter(|&s| !self.detail.iter().any(|d| d.setting == s && d.is_ok()))
            .collect()
    }

    pub fn rmse_plot(&self) -> Vec<RmsePlotRow> {
        self.summary
            .iter()
            .map(|s| RmsePlotRow {
                setting: s.setting,
                n_categories: s.n_categories,
                model: s.model,
                rmse_mean: s.rmse_mean,
                rmse_sd: s.rmse_sd,
            })
            .collect()
    }

    pub fn runtime_plot(&self) -> Vec<RuntimePlotRow> {
        self.summary
            .iter()
            .filter_map(|s| {
                let secs: Vec<f64> = self
                    .runtime
                    .iter()
                    .filter(|r| r.setting == s.setting && r.model == s.model)
                    .map(|r| r.fit_seconds)
                    .collect();
                (!secs.is_empty()).then(|| RuntimePlotRow {
                    setting: s.setting,
                    n_categories: s.n_categories,
                    model: s.model,
                    seconds_mean: mean(&secs),
                })
            })
            .collect()
    }

    /// Writes the tables into `dir` and returns the paths written.
    /// `runtime.csv` and `fig2_runtime.csv` hold wall times; every other file
    /// is a deterministic function of the configuration.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        let mut put = |name: &str, f: &dyn Fn(&Path) -> Result<()>| -> Result<()> {
            let path = dir.join(name);
            f(&path)?;
            written.push(path);
            Ok(())
        };
        put("summary.csv", &|p| write_rows(p, &self.summary))?;
        put("detail.csv", &|p| write_rows(p, &self.detail))?;
        put("fig1_repurchase.csv", &|p| write_rows(p, &self.repurchase))?;
        put("fig2_rmse.csv", &|p| write_rows(p, &self.rmse_plot()))?;
        put("fig3_elasticity.csv", &|p| write_rows(p, &self.elasticities))?;
        put("runtime.csv", &|p| write_rows(p, &self.runtime))?;
        put("fig2_runtime.csv", &|p| write_rows(p, &self.runtime_plot()))?;
        Ok(written)
    }
}

/// Serializes rows to CSV with a header row; an empty table yields an
/// empty file.
pub fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Factor-model fit plus posterior scoring.
pub struct FactorRun {
    pub metrics: MetricsReport,
    pub iterations: usize,
    pub converged: bool,
    pub fit_seconds: f64,
    pub state: crate::vi::VariationalState,
}

pub fn run_factor_model(
    kind: ModelKind,
    train: &Dataset,
    test: &Dataset,
    template: &FitConfig,
    n_factors: usize,
    n_draws: usize,
    seed: u64,
) -> Result<FactorRun> {
    let config = FitConfig {
        kind,
        n_factors,
        seed,
        ..template.clone()
    };
    let result = fit(train, &config)?;
    let metrics = score_posterior(&result.state, test, kind, n_draws, seed)?;
    Ok(FactorRun {
        metrics,
        iterations: result.iterations_run,
        converged: result.converged,
        fit_seconds: result.wall_time_seconds,
        state: result.state,
    })
}

/// Mixed logit fits for every category plus scoring. Returns the metrics,
/// whether every category converged, and the total fit time.
pub fn run_mixed_logit(
    train: &Dataset,
    test: &Dataset,
    spec: &MixedLogitSpec,
) -> Result<(MetricsReport, bool, usize, f64)> {
    let start = Instant::now();
    let fits = fit_all_categories(train, spec)
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let seconds = start.elapsed().as_secs_f64();
    let pred = predict_dataset(&fits, test, spec.n_sim_draws)?;
    let metrics = score_predictions(&pred, test)?;
    let converged = fits.iter().all(|f| f.converged);
    let iterations = fits.iter().map(|f| f.iterations).max().unwrap_or(0);
    Ok((metrics, converged, iterations, seconds))
}

/// One replication of one setting.
pub fn run_replication(
    config: &ExperimentConfig,
    setting_index: usize,
    replication: usize,
) -> Result<ReplicationOutcome> {
    let setting = &config.settings[setting_index];
    let seed = config.replication_seed(replication);
    let sim = simulate(&setting.sim_config(seed)?)?;
    let (train, test) = split_dataset(&sim.dataset, &config.split, seed)?;

    let mut out = ReplicationOutcome {
        detail: Vec::new(),
        runtime: Vec::new(),
        repurchase: Vec::new(),
        elasticities: Vec::new(),
    };
    if replication == 0 {
        out.repurchase = repurchase_diagnostics(&sim.dataset)
            .into_iter()
            .map(|r| RepurchasePlotRow {
                setting: setting_index,
                category: r.category + 1,
                n_pairs: r.n_pairs,
                repurchase: r.repurchase,
                switch_each: r.switch_each,
            })
            .collect();
    }

    for &model in &setting.models {
        let mut row = DetailRow {
            setting: setting_index,
            name: setting.name.clone(),
            replication,
            seed,
            model,
            status: "ok".into(),
            n_train: train.len(),
            n_test: test.len(),
            rmse: None,
            accuracy: None,
            iterations: None,
            converged: None,
        };
        let outcome: Result<(MetricsReport, bool, usize, f64)> = match model.factor_kind() {
            Some(kind) => run_factor_model(
                kind,
                &train,
                &test,
                &config.fit,
                setting.n_factors,
                config.posterior_draws,
                seed,
            )
            .and_then(|run| {
                if setting.elasticities {
                    let draws = posterior_sampler(&run.state, seed).take(config.posterior_draws);
                    let report = own_price_elasticities(draws, &train, kind)?;
                    out.elasticities.extend(report.rows.into_iter().map(|r| ElasticityPlotRow {
                        setting: setting_index,
                        replication,
                        model,
                        category: r.category + 1,
                        product: r.product + 1,
                        mean: r.mean,
                        q025: r.q025,
                        q975: r.q975,
                        n_obs: r.n_obs,
                    }));
                }
                Ok((run.metrics, run.converged, run.iterations, run.fit_seconds))
            }),
            None => run_mixed_logit(&train, &test, &config.mixed_logit),
        };
        match outcome {
            Ok((metrics, converged, iterations, seconds)) => {
                row.rmse = Some(metrics.rmse_mean);
                row.accuracy = Some(metrics.accuracy);
                row.iterations = Some(iterations);
                row.converged = Some(converged);
                out.runtime.push(RuntimeRow {
                    setting: setting_index,
                    n_categories: setting.n_categories,
                    replication,
                    model,
                    fit_seconds: seconds,
                });
            }
            Err(e) => row.status = e.to_string(),
        }
        out.detail.push(row);
    }
    Ok(out)
}

/// Runs the whole grid on a pool of `parallel` workers.
pub fn run_experiment(config: &ExperimentConfig, parallel: usize) -> Result<ExperimentOutput> {
    config.validate()?;
    if parallel == 0 {
        return Err(Error::config("parallel", "must be at least 1"));
    }
    let jobs: Vec<(usize, usize)> = (0..config.settings.len())
        .flat_map(|s| (0..config.replications).map(move |r| (s, r)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallel)
        .build()
        .map_err(|e| Error::config("parallel", e.to_string()))?;
    let results: Vec<Result<ReplicationOutcome>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(s, r)| run_replication(config, s, r))
            .collect()
    });

    let mut output = ExperimentOutput::default();
    for (&(s, r), res) in jobs.iter().zip(results) {
        match res {
            Ok(o) => {
                output.detail.extend(o.detail);
                output.runtime.extend(o.runtime);
                output.repurchase.extend(o.repurchase);
                output.elasticities.extend(o.elasticities);
            }
            Err(e) => {
                let setting = &config.settings[s];
                for &model in &setting.models {
                    output.detail.push(DetailRow {
                        setting: s,
                        name: setting.name.clone(),
                        replication: r,
                        seed: config.replication_seed(r),
                        model,
                        status: e.to_string(),
                        n_train: 0,
                        n_test: 0,
                        rmse: None,
                        accuracy: None,
                        iterations: None,
                        converged: None,
                    });
                }
            }
        }
    }
    for d in output.detail.iter().filter(|d| !d.is_ok()) {
        output.warnings.push(format!(
            "setting {} replication {} model {} failed and is excluded: {}",
            d.setting, d.replication, d.model, d.status
        ));
    }
    output.summary = summarize(config, &output.detail);
    Ok(output)
}

fn summarize(config: &ExperimentConfig, detail: &[DetailRow]) -> Vec<SummaryRow> {
    let mut rows = Vec::new();
    for (s, setting) in config.settings.iter().enumerate() {
        for &model in &setting.models {
            let mine: Vec<&DetailRow> = detail
                .iter()
                .filter(|d| d.setting == s && d.model == model)
                .collect();
            let ok: Vec<&&DetailRow> = mine.iter().filter(|d| d.is_ok()).collect();
            let collect = |f: &dyn Fn(&DetailRow) -> Option<f64>| -> Vec<f64> {
                ok.iter().filter_map(|d| f(d)).collect()
            };
            let rmse = collect(&|d| d.rmse);
            let acc = collect(&|d| d.accuracy);
            let n_train = collect(&|d| Some(d.n_train as f64));
            let n_test = collect(&|d| Some(d.n_test as f64));
            let some_mean = |v: &[f64]| (!v.is_empty()).then(|| mean(v));
            rows.push(SummaryRow {
                setting: s,
                name: setting.name.clone(),
                n_consumers: setting.n_consumers,
                n_products: setting.n_products,
                n_trips: setting.n_trips,
                n_categories: setting.n_categories,
                n_factors: setting.n_factors,
                model,
                n_ok: ok.len(),
                n_failed: mine.len() - ok.len(),
                rmse_mean: some_mean(&rmse),
                rmse_sd: (rmse.len() > 1).then(|| std_dev(&rmse)),
                accuracy_mean: some_mean(&acc),
                n_train_mean: some_mean(&n_train),
                n_test_mean: some_mean(&n_test),
            });
        }
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_choice_round_trips() {
        for m in [ModelChoice::Dynamic, ModelChoice::Static, ModelChoice::MixedLogit] {
            assert_eq!(m.as_str().parse::<ModelChoice>().unwrap(), m);
            let json = serde_json::to_string(&m).unwrap();
            assert_eq!(json, format!("\"{}\"", m.as_str()));
        }
        assert!("probit".parse::<ModelChoice>().is_err());
    }

    #[test]
    fn config_defaults_from_minimal_json() {
        let cfg: ExperimentConfig = serde_json::from_str(
            r#"{"settings":[{"n_consumers":4,"n_products":3,"n_trips":4,"n_categories":2}]}"#,
        )
        .unwrap();
        assert_eq!(cfg.replications, 1);
        assert_eq!(cfg.posterior_draws, 4000);
        assert_eq!(cfg.settings[0].n_factors, 5);
        assert_eq!(cfg.settings[0].models, default_models());
        assert!(cfg.settings[0].inertia);
        cfg.validate().unwrap();
    }

    #[test]
    fn failed_jobs_are_recorded_not_averaged() {
        // J = 1 makes the mixed logit fail while the factor model succeeds.
        let mut cfg = ExperimentConfig::new(
            vec![Setting::new(4, 1, 4, 2, 2).with_models(&[ModelChoice::Static, ModelChoice::MixedLogit])],
            1,
            3,
        );
        cfg.posterior_draws = 5;
        cfg.fit.max_iterations = 50;
        let out = run_experiment(&cfg, 1).unwrap();
        assert_eq!(out.detail.len(), 2);
        assert!(out.detail[0].is_ok());
        assert!(!out.detail[1].is_ok());
        assert_eq!(out.warnings.len(), 1);
        let ml = &out.summary[1];
        assert_eq!((ml.n_ok, ml.n_failed), (0, 1));
        assert_eq!(ml.rmse_mean, None);
        assert!(out.failed_settings().is_empty());
    }
}
