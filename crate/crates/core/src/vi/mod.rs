//! Mean-field Gaussian variational inference.
//!
//! Every latent coordinate `z` gets an independent `N(mu, sigma^2)` factor
//! with `sigma = exp(log_sigma)`. Draws are reparameterized as
//! `z = mu + sigma * eps`, so the ELBO gradient is estimated by
//!
//! ```text
//! d/dmu        = mean_m g(z_m)
//! d/dlog_sigma = mean_m g(z_m) * eps_m * sigma + 1
//! ```
//!
//! with `g` the gradient of the log joint. The `+ 1` is the analytic
//! entropy term.

mod adam;

use std::time::Instant;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Dims, Observation};
use crate::error::{Error, Result};
use crate::model::{likelihood_and_grad, log_likelihood, log_prior, PriorSpec};
use crate::numeric::mean;
use crate::params::{Layout, ModelKind, ParamDraw};
use crate::rng::{stream, Domain, StreamRng};

pub use adam::Adam;

/// `0.5 * ln(2 * pi * e)`, the per-coordinate entropy offset of a Gaussian.
const HALF_LN_2PI_E: f64 = 1.418_938_533_204_672_7;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariationalState {
    /// Maps coordinates to `(block, unit, factor)`.
    pub layout: Layout,
    pub mu: Vec<f64>,
    pub log_sigma: Vec<f64>,
}

impl VariationalState {
    pub fn len(&self) -> usize {
        self.mu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu.is_empty()
    }

    pub fn sigma(&self) -> Vec<f64> {
        self.log_sigma.iter().map(|s| s.exp()).collect()
    }

    /// Closed-form entropy of q.
    pub fn entropy(&self) -> f64 {
        self.log_sigma.iter().sum::<f64>() + self.len() as f64 * HALF_LN_2PI_E
    }

    /// The posterior-mean parameter draw.
    pub fn mean_draw(&self) -> ParamDraw {
        ParamDraw {
            layout: self.layout,
            values: self.mu.clone(),
        }
    }

    /// Closed-form `KL(q || N(0, scale^2 I))`.
    pub fn kl_to_prior(&self, prior: PriorSpec) -> f64 {
        let s2 = prior.scale * prior.scale;
        self.mu
            .iter()
            .zip(&self.log_sigma)
            .map(|(m, ls)| {
                let var = (2.0 * ls).exp();
                0.5 * ((var + m * m) / s2 - 1.0) + prior.scale.ln() - ls
            })
            .sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub kind: ModelKind,
    pub prior: PriorSpec,
    pub n_factors: usize,
    /// Monte Carlo draws per gradient step.
    pub mc_samples: usize,
    pub learning_rate: f64,
    pub max_iterations: usize,
    pub convergence_tol: f64,
    pub convergence_window: usize,
    /// Observations per gradient step; `None` uses the full dataset.
    pub minibatch: Option<usize>,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            kind: ModelKind::Dynamic,
            prior: PriorSpec::default(),
            n_factors: 5,
            mc_samples: 8,
            learning_rate: 0.05,
            max_iterations: 20_000,
            convergence_tol: 1e-4,
            convergence_window: 100,
            minibatch: None,
            seed: 0,
        }
    }
}

impl FitConfig {
    pub fn new(kind: ModelKind, n_factors: usize, seed: u64) -> Self {
        FitConfig {
            kind,
            n_factors,
            seed,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("n_factors", self.n_factors),
            ("mc_samples", self.mc_samples),
            ("max_iterations", self.max_iterations),
            ("convergence_window", self.convergence_window),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::config(name, "must be positive"));
            }
        }
        if self.minibatch == Some(0) {
            return Err(Error::config("minibatch", "must be positive"));
        }
        for (name, v) in [
            ("learning_rate", self.learning_rate),
            ("convergence_tol", self.convergence_tol),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(name, "must be a positive number"));
            }
        }
        PriorSpec::new(self.prior.scale).map(|_| ())
    }

    /// Dimensions of the fitted model: the data's, with this config's K.
    pub fn model_dims(&self, data: &Dims) -> Dims {
        Dims {
            n_factors: self.n_factors,
            ..data.clone()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub state: VariationalState,
    pub elbo_trace: Vec<f64>,
    pub iterations_run: usize,
    pub converged: bool,
    /// Last value of the relative mean-change statistic.
    pub convergence_statistic: Option<f64>,
    #[serde(skip)]
    pub wall_time_seconds: f64,
}

/// Means i.i.d. `N(0, 0.1^2)`, log standard deviations `-2`.
pub fn init_variational(dims: &Dims, kind: ModelKind, rng: &mut impl Rng) -> VariationalState {
    let layout = Layout::new(dims, kind);
    let mu = (0..layout.len())
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            0.1 * z
        })
        .collect();
    VariationalState {
        layout,
        mu,
        log_sigma: vec![-2.0; layout.len()],
    }
}

/// `mu + exp(log_sigma) * eps`, reassembled into parameter blocks.
pub fn sample_reparam(state: &VariationalState, eps: &[f64]) -> Result<ParamDraw> {
    if eps.len() != state.len() {
        return Err(Error::dimension("noise vector", state.len(), eps.len()));
    }
    let values = state
        .mu
        .iter()
        .zip(&state.log_sigma)
        .zip(eps)
        .map(|((m, ls), e)| m + ls.exp() * e)
        .collect();
    Ok(ParamDraw {
        layout: state.layout,
        values,
    })
}

fn standard_normals(n: usize, rng: &mut impl Rng) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

fn check_state(state: &VariationalState, dataset: &Dataset, config: &FitConfig) -> Result<()> {
    let expected = Layout::new(&config.model_dims(&dataset.dims), config.kind);
    if state.layout != expected || state.mu.len() != expected.len() || state.log_sigma.len() != expected.len() {
        return Err(Error::dimension("variational state", expected.len(), state.len()));
    }
    Ok(())
}

/// Monte Carlo ELBO: mean over `mc_samples` draws of the log joint plus
/// the analytic entropy.
pub fn elbo_estimate(
    state: &VariationalState,
    dataset: &Dataset,
    config: &FitConfig,
    rng: &mut impl Rng,
) -> Result<f64> {
    check_state(state, dataset, config)?;
    let mut total = 0.0;
    for _ in 0..config.mc_samples {
        let eps = standard_normals(state.len(), rng);
        let z = sample_reparam(state, &eps)?;
        total += log_likelihood(&z, dataset, config.kind)? + log_prior(&z, config.prior);
    }
    Ok(total / config.mc_samples as f64 + state.entropy())
}

/// Reparameterized ELBO gradient with the ELBO estimate from the same draws.
#[derive(Clone, Debug, PartialEq)]
pub struct ElboGradient {
    pub mu: Vec<f64>,
    pub log_sigma: Vec<f64>,
    pub elbo: f64,
}

pub fn elbo_gradient(
    state: &VariationalState,
    dataset: &Dataset,
    config: &FitConfig,
    rng: &mut impl Rng,
) -> Result<ElboGradient> {
    check_state(state, dataset, config)?;
    let refs: Vec<&Observation> = dataset.observations.iter().collect();
    Ok(gradient_on(state, &dataset.dims, &refs, 1.0, config, rng))
}

fn gradient_on(
    state: &VariationalState,
    dims: &Dims,
    observations: &[&Observation],
    scale: f64,
    config: &FitConfig,
    rng: &mut impl Rng,
) -> ElboGradient {
    let inv_var = 1.0 / (config.prior.scale * config.prior.scale);
    reparam_gradient(&state.mu, &state.log_sigma, config.mc_samples, rng, |values| {
        let z = ParamDraw {
            layout: state.layout,
            values: values.to_vec(),
        };
        let (ll, mut g) = likelihood_and_grad(&z, dims, observations, config.kind, scale);
        for (gc, zc) in g.values.iter_mut().zip(values) {
            *gc -= zc * inv_var;
        }
        (ll + log_prior(&z, config.prior), g.values)
    })
}

/// Reparameterization-trick ELBO gradient of an arbitrary log density
/// `log_joint(z) -> (value, gradient)` under `N(mu, exp(log_sigma)^2)`,
/// with the analytic entropy added.
pub fn reparam_gradient<F>(
    mu: &[f64],
    log_sigma: &[f64],
    mc_samples: usize,
    rng: &mut impl Rng,
    mut log_joint: F,
) -> ElboGradient
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let n = mu.len();
    let m = mc_samples as f64;
    let sigma: Vec<f64> = log_sigma.iter().map(|v| v.exp()).collect();
    let mut grad_mu = vec![0.0; n];
    let mut grad_ls = vec![0.0; n];
    let mut elbo = 0.0;
    let mut z = vec![0.0; n];
    for _ in 0..mc_samples {
        let eps = standard_normals(n, rng);
        for c in 0..n {
            z[c] = mu[c] + sigma[c] * eps[c];
        }
        let (value, g) = log_joint(&z);
        elbo += value;
        for c in 0..n {
            grad_mu[c] += g[c];
            grad_ls[c] += g[c] * eps[c] * sigma[c];
        }
    }
    for c in 0..n {
        grad_mu[c] /= m;
        grad_ls[c] = grad_ls[c] / m + 1.0;
    }
    let entropy = log_sigma.iter().sum::<f64>() + n as f64 * HALF_LN_2PI_E;
    ElboGradient {
        mu: grad_mu,
        log_sigma: grad_ls,
        elbo: elbo / m + entropy,
    }
}

/// Relative mean per-iteration ELBO change between the last two windows
/// of `trace`: `|mean(last W) - mean(previous W)| / (W * mean|last W|)`.
pub fn convergence_statistic(trace: &[f64], window: usize) -> Option<f64> {
    if window == 0 || trace.len() < 2 * window {
        return None;
    }
    let n = trace.len();
    let last = &trace[n - window..];
    let prev = &trace[n - 2 * window..n - window];
    let scale = last.iter().map(|v| v.abs()).sum::<f64>() / window as f64;
    let change = (mean(last) - mean(prev)).abs() / window as f64;
    Some(if scale > 0.0 { change / scale } else { change })
}

/// Adam step size: constant for the first half of the budget, then decayed
/// as `1/sqrt(iteration)`.
fn step_size(config: &FitConfig, iteration: usize) -> f64 {
    let half = (config.max_iterations / 2).max(1);
    if iteration <= half {
        config.learning_rate
    } else {
        config.learning_rate * (half as f64 / iteration as f64).sqrt()
    }
}

/// Outcome of an ELBO ascent run.
#[derive(Clone, Debug, PartialEq)]
pub struct AscentTrace {
    pub elbo_trace: Vec<f64>,
    pub converged: bool,
    pub convergence_statistic: Option<f64>,
}

/// Adam ascent on `(mu, log_sigma)` driven by `gradient(iteration)`, with
/// the step-size schedule and stopping rule of `config`. Convergence is
/// checked after every iteration once the trace holds two full windows.
fn ascend<G>(mu: &mut [f64], log_sigma: &mut [f64], config: &FitConfig, mut gradient: G) -> Result<AscentTrace>
where
    G: FnMut(usize, &[f64], &[f64]) -> ElboGradient,
{
    let n = mu.len();
    let mut adam_mu = Adam::new(n);
    let mut adam_ls = Adam::new(n);
    let mut trace = Vec::new();
    let mut converged = false;
    let mut stat = None;
    for it in 1..=config.max_iterations {
        let grad = gradient(it, mu, log_sigma);
        if !grad.elbo.is_finite() {
            let coordinate = grad
                .mu
                .iter()
                .chain(&grad.log_sigma)
                .position(|g| !g.is_finite())
                .map(|c| c % n);
            let tail = trace[trace.len().saturating_sub(10)..].to_vec();
            return Err(Error::NonFiniteElbo {
                iteration: it,
                coordinate,
                trace_tail: tail,
            });
        }
        trace.push(grad.elbo);
        let lr = step_size(config, it);
        adam_mu.step(mu, &grad.mu, lr);
        adam_ls.step(log_sigma, &grad.log_sigma, lr);

        if let Some(s) = convergence_statistic(&trace, config.convergence_window) {
            stat = Some(s);
            if s < config.convergence_tol {
                converged = true;
                break;
            }
        }
    }
    Ok(AscentTrace {
        elbo_trace: trace,
        converged,
        convergence_statistic: stat,
    })
}

/// Fits a mean-field Gaussian to an arbitrary differentiable log density,
/// starting from `(mu, log_sigma)`. Iteration `t` draws its noise from
/// stream `(Gradient, t)`. Only the optimizer fields of `config` are used.
pub fn fit_log_density<F>(
    mut log_joint: F,
    mut mu: Vec<f64>,
    mut log_sigma: Vec<f64>,
    config: &FitConfig,
) -> Result<(Vec<f64>, Vec<f64>, AscentTrace)>
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    config.validate()?;
    if mu.len() != log_sigma.len() {
        return Err(Error::dimension("log_sigma", mu.len(), log_sigma.len()));
    }
    let trace = ascend(&mut mu, &mut log_sigma, config, |it, m, ls| {
        let mut rng = stream(config.seed, Domain::Gradient, it as u64);
        reparam_gradient(m, ls, config.mc_samples, &mut rng, &mut log_joint)
    })?;
    Ok((mu, log_sigma, trace))
}

/// Stochastic gradient ascent on the ELBO.
///
/// Iteration `t` (1-based) draws its reparameterization noise from stream
/// `(Gradient, t)` and, in minibatch mode, its batch from `(Minibatch, t)`.
/// Convergence is checked after every iteration once the trace holds two
/// full windows.
pub fn fit(dataset: &Dataset, config: &FitConfig) -> Result<FitResult> {
    config.validate()?;
    crate::data::validate_dataset(dataset).into_result()?;
    let start = Instant::now();
    let dims = config.model_dims(&dataset.dims);
    let mut init_rng = stream(config.seed, Domain::VariationalInit, 0);
    let mut state = init_variational(&dims, config.kind, &mut init_rng);
    let layout = state.layout;
    let all: Vec<&Observation> = dataset.observations.iter().collect();

    let ascent = ascend(&mut state.mu, &mut state.log_sigma, config, |it, mu, log_sigma| {
        let current = VariationalState {
            layout,
            mu: mu.to_vec(),
            log_sigma: log_sigma.to_vec(),
        };
        let mut rng = stream(config.seed, Domain::Gradient, it as u64);
        match config.minibatch {
            Some(b) if b < all.len() => {
                let mut brng = stream(config.seed, Domain::Minibatch, it as u64);
                let mut idx = rand::seq::index::sample(&mut brng, all.len(), b).into_vec();
                idx.sort_unstable();
                let batch: Vec<&Observation> = idx.iter().map(|&i| all[i]).collect();
                let scale = all.len() as f64 / b as f64;
                gradient_on(&current, &dataset.dims, &batch, scale, config, &mut rng)
            }
            _ => gradient_on(&current, &dataset.dims, &all, 1.0, config, &mut rng),
        }
    })?;
    Ok(FitResult {
        iterations_run: ascent.elbo_trace.len(),
        elbo_trace: ascent.elbo_trace,
        state,
        converged: ascent.converged,
        convergence_statistic: ascent.convergence_statistic,
        wall_time_seconds: start.elapsed().as_secs_f64(),
    })
}

/// `S` independent draws from q.
pub fn posterior_draws(state: &VariationalState, s: usize, rng: &mut impl Rng) -> Vec<ParamDraw> {
    PosteriorSampler::new(state, rng).take(s).collect()
}

/// Lazily yields draws from q, for scoring posteriors too large to hold
/// in memory at once.
pub struct PosteriorSampler<'a, R> {
    state: &'a VariationalState,
    sigma: Vec<f64>,
    rng: R,
}

impl<'a, R: Rng> PosteriorSampler<'a, R> {
    pub fn new(state: &'a VariationalState, rng: R) -> Self {
        PosteriorSampler {
            sigma: state.sigma(),
            state,
            rng,
        }
    }
}

impl<R: Rng> Iterator for PosteriorSampler<'_, R> {
    type Item = ParamDraw;

    fn next(&mut self) -> Option<ParamDraw> {
        let values = self
            .state
            .mu
            .iter()
            .zip(&self.sigma)
            .map(|(m, s)| {
                let e: f64 = StandardNormal.sample(&mut self.rng);
                m + s * e
            })
            .collect();
        Some(ParamDraw {
            layout: self.state.layout,
            values,
        })
    }
}

/// Posterior draws from the fixed stream `(seed, Posterior, 0)`.
pub fn posterior_sampler(state: &VariationalState, seed: u64) -> PosteriorSampler<'_, StreamRng> {
    PosteriorSampler::new(state, stream(seed, Domain::Posterior, 0))
}
