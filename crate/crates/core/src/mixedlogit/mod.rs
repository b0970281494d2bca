//! Per-category mixed logit benchmark, estimated by maximum simulated
//! likelihood.
//!
//! Within one category, consumer `i` values product `j` at
//!
//! ```text
//! u_ij = alpha_j - eta_i * price_j + xi_i * delta_j + e_ij
//! eta_i ~ N(eta_mean, eta_sd^2),   xi_i ~ N(xi_mean, xi_sd^2)
//! ```
//!
//! with `alpha_0 = 0`. Coefficients are held fixed across a consumer's
//! trips, so the simulated likelihood of consumer `i` is the average over
//! `R` quasi-random draws of the product of that consumer's logit
//! probabilities.

mod bfgs;
mod halton;

use std::time::Instant;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Dims, Observation};
use crate::error::{Error, Result};
use crate::eval::metrics::DrawPredictions;
use crate::numeric::{log_sum_exp, pairwise_reduce_vecs, pairwise_sum};
use crate::rng::{stream, uniform, Domain};

pub use bfgs::{minimize, BfgsOutcome};
pub use halton::{radical_inverse, HaltonDraws, DEFAULT_BURN_IN};

/// Ridge weight on the fixed effects of never-chosen products, whose
/// unpenalized maximum lies at minus infinity.
const NEVER_CHOSEN_PENALTY: f64 = 0.01;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoefficientDistribution {
    #[default]
    Normal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MixedLogitSpec {
    /// Halton draws per consumer.
    pub n_sim_draws: usize,
    pub coefficient_distribution: CoefficientDistribution,
    /// Max-abs gradient of the per-observation objective at which BFGS stops.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for MixedLogitSpec {
    fn default() -> Self {
        MixedLogitSpec {
            n_sim_draws: 200,
            coefficient_distribution: CoefficientDistribution::Normal,
            tolerance: 1e-6,
            max_iterations: 500,
        }
    }
}

impl MixedLogitSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_sim_draws == 0 {
            return Err(Error::config("n_sim_draws", "must be at least 1"));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::config("tolerance", "must be positive"));
        }
        if self.max_iterations == 0 {
            return Err(Error::config("max_iterations", "must be at least 1"));
        }
        Ok(())
    }
}

/// Structural parameters of one category's mixed logit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixedLogitParams {
    /// Product fixed effects; `alpha[0] = 0`.
    pub alpha: Vec<f64>,
    pub eta_mean: f64,
    pub eta_sd: f64,
    pub xi_mean: f64,
    pub xi_sd: f64,
}

impl MixedLogitParams {
    /// Plain logit at the given coefficients (both sds zero).
    pub fn plain(alpha: Vec<f64>, eta: f64, xi: f64) -> Self {
        MixedLogitParams {
            alpha,
            eta_mean: eta,
            eta_sd: 0.0,
            xi_mean: xi,
            xi_sd: 0.0,
        }
    }

    /// Coefficients `(eta, xi)` implied by one standard-normal pair.
    #[inline]
    pub fn coefficients(&self, z: [f64; 2]) -> (f64, f64) {
        (self.eta_mean + self.eta_sd * z[0], self.xi_mean + self.xi_sd * z[1])
    }

    fn check(&self) -> Result<()> {
        if self.alpha.is_empty() {
            return Err(Error::config("alpha", "needs at least one product"));
        }
        if !(self.eta_sd >= 0.0 && self.xi_sd >= 0.0) {
            return Err(Error::config("eta_sd/xi_sd", "standard deviations must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixedLogitFit {
    /// Original index of the fitted category.
    pub category: usize,
    #[serde(flatten)]
    pub params: MixedLogitParams,
    /// Simulated log-likelihood at the estimate, excluding any penalty.
    pub loglik: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Final max-abs gradient of the per-observation objective.
    pub grad_norm: f64,
    /// Never-chosen products whose fixed effects are only identified
    /// through the ridge penalty. Non-empty means the fit is penalized.
    pub penalized_products: Vec<usize>,
    pub n_obs: usize,
    #[serde(skip)]
    pub wall_time_seconds: f64,
}

impl MixedLogitFit {
    pub fn is_penalized(&self) -> bool {
        !self.penalized_products.is_empty()
    }
}

fn check_single_category(dataset: &Dataset) -> Result<usize> {
    if dataset.dims.n_categories != 1 {
        return Err(Error::config(
            "dataset",
            format!("mixed logit needs single-category data, got {} categories", dataset.dims.n_categories),
        ));
    }
    Ok(dataset.dims.n_products(0))
}

fn check_draws(dataset: &Dataset, draws: &HaltonDraws) -> Result<()> {
    if draws.n_consumers < dataset.dims.n_consumers {
        return Err(Error::dimension("draw consumers", dataset.dims.n_consumers, draws.n_consumers));
    }
    if draws.per_consumer == 0 {
        return Err(Error::config("draws", "need at least one draw per consumer"));
    }
    Ok(())
}

/// Contiguous observation ranges of each consumer (data are sorted by
/// consumer).
fn consumer_runs(observations: &[Observation]) -> Vec<(usize, usize, usize)> {
    let mut runs = Vec::new();
    let mut start = 0;
    for n in 1..=observations.len() {
        if n == observations.len() || observations[n].consumer != observations[start].consumer {
            runs.push((observations[start].consumer, start, n));
            start = n;
        }
    }
    runs
}

/// Logit probabilities at fixed `(eta, xi)`.
fn probabilities_at(alpha: &[f64], eta: f64, xi: f64, obs: &Observation, out: &mut [f64]) {
    let mut max = f64::NEG_INFINITY;
    for (j, u) in out.iter_mut().enumerate() {
        *u = alpha[j] - eta * obs.prices[j] + xi * obs.delta(j);
        max = max.max(*u);
    }
    let mut total = 0.0;
    for u in out.iter_mut() {
        *u = (*u - max).exp();
        total += *u;
    }
    out.iter_mut().for_each(|u| *u /= total);
}

/// Per-consumer log simulated likelihood and, optionally, its gradient
/// w.r.t. `[alpha_1.., eta_mean, eta_sd, xi_mean, xi_sd]`.
fn consumer_term(
    params: &MixedLogitParams,
    obs: &[Observation],
    draws: &[[f64; 2]],
    want_grad: bool,
) -> (f64, Vec<f64>) {
    let j = params.alpha.len();
    let n_grad = if want_grad { j - 1 + 4 } else { 0 };
    let mut ll = Vec::with_capacity(draws.len());
    let mut grads: Vec<Vec<f64>> = Vec::with_capacity(if want_grad { draws.len() } else { 0 });
    let mut p = vec![0.0; j];
    for &z in draws {
        let (eta, xi) = params.coefficients(z);
        let mut l = 0.0;
        let mut g = vec![0.0; n_grad];
        for o in obs {
            probabilities_at(&params.alpha, eta, xi, o, &mut p);
            l += p[o.chosen].ln();
            if want_grad {
                for k in 1..j {
                    g[k - 1] += if k == o.chosen { 1.0 } else { 0.0 } - p[k];
                }
                let mean_price: f64 = p.iter().zip(&o.prices).map(|(a, b)| a * b).sum();
                let mean_delta = o.lag.map_or(0.0, |l| if l < j { p[l] } else { 0.0 });
                let d_eta = -(o.prices[o.chosen] - mean_price);
                let d_xi = o.delta(o.chosen) - mean_delta;
                g[j - 1] += d_eta;
                g[j] += d_eta * z[0];
                g[j + 1] += d_xi;
                g[j + 2] += d_xi * z[1];
            }
        }
        ll.push(l);
        if want_grad {
            grads.push(g);
        }
    }
    let lse = log_sum_exp(&ll);
    let value = lse - (draws.len() as f64).ln();
    let mut grad = vec![0.0; n_grad];
    if want_grad {
        for (l, g) in ll.iter().zip(&grads) {
            let w = (l - lse).exp();
            for (acc, gi) in grad.iter_mut().zip(g) {
                *acc += w * gi;
            }
        }
    }
    (value, grad)
}

fn simulated_loglik_and_grad(
    params: &MixedLogitParams,
    dataset: &Dataset,
    draws: &HaltonDraws,
    want_grad: bool,
) -> (f64, Vec<f64>) {
    let runs = consumer_runs(&dataset.observations);
    let terms: Vec<(f64, Vec<f64>)> = runs
        .par_iter()
        .map(|&(i, a, b)| consumer_term(params, &dataset.observations[a..b], draws.consumer(i), want_grad))
        .collect();
    let values: Vec<f64> = terms.iter().map(|t| t.0).collect();
    let value = pairwise_sum(&values);
    let mut grad = vec![0.0; if want_grad { params.alpha.len() + 3 } else { 0 }];
    if want_grad {
        let mut gs: Vec<Vec<f64>> = terms.into_iter().map(|t| t.1).collect();
        if !gs.is_empty() {
            pairwise_reduce_vecs(&mut gs);
            grad = std::mem::take(&mut gs[0]);
        }
    }
    (value, grad)
}

/// Panel simulated log-likelihood
/// `sum_i log( (1/R) sum_r prod_t P_it(eta_ir, xi_ir) )`.
pub fn simulated_loglik(params: &MixedLogitParams, dataset: &Dataset, draws: &HaltonDraws) -> Result<f64> {
    let j = check_single_category(dataset)?;
    params.check()?;
    if params.alpha.len() != j {
        return Err(Error::dimension("alpha", j, params.alpha.len()));
    }
    check_draws(dataset, draws)?;
    Ok(simulated_loglik_and_grad(params, dataset, draws, false).0)
}

/// Maps the unconstrained optimizer vector to parameters.
fn unpack(x: &[f64], j: usize) -> MixedLogitParams {
    let mut alpha = vec![0.0; j];
    alpha[1..].copy_from_slice(&x[..j - 1]);
    MixedLogitParams {
        alpha,
        eta_mean: x[j - 1],
        eta_sd: x[j].exp(),
        xi_mean: x[j + 1],
        xi_sd: x[j + 2].exp(),
    }
}

/// Products never chosen in the data. If the reference product is among
/// them, every fixed effect is penalized.
fn never_chosen(dataset: &Dataset, j: usize) -> Vec<usize> {
    let mut seen = vec![false; j];
    for o in &dataset.observations {
        seen[o.chosen] = true;
    }
    (0..j).filter(|&k| !seen[k]).collect()
}

/// Maximum simulated likelihood for one single-category dataset.
pub fn fit_mixed_logit(dataset: &Dataset, spec: &MixedLogitSpec) -> Result<MixedLogitFit> {
    spec.validate()?;
    let j = check_single_category(dataset)?;
    if j < 2 {
        return Err(Error::NoVariation("no within-category variation".into()));
    }
    if dataset.is_empty() {
        return Err(Error::InvalidDataset("no observations to fit".into()));
    }
    let start = Instant::now();
    let draws = HaltonDraws::new(dataset.dims.n_consumers, spec.n_sim_draws, DEFAULT_BURN_IN);
    let penalized = never_chosen(dataset, j);
    let ridge: Vec<bool> = if penalized.contains(&0) {
        vec![true; j]
    } else {
        (0..j).map(|k| penalized.contains(&k)).collect()
    };
    let scale = 1.0 / dataset.len() as f64;

    let objective = |x: &[f64]| {
        let params = unpack(x, j);
        let (ll, g) = simulated_loglik_and_grad(&params, dataset, &draws, true);
        let mut value = -ll;
        let mut grad = vec![0.0; x.len()];
        for k in 1..j {
            grad[k - 1] = -g[k - 1];
            if ridge[k] {
                value += 0.5 * NEVER_CHOSEN_PENALTY * x[k - 1] * x[k - 1];
                grad[k - 1] += NEVER_CHOSEN_PENALTY * x[k - 1];
            }
        }
        grad[j - 1] = -g[j - 1];
        grad[j] = -g[j] * params.eta_sd;
        grad[j + 1] = -g[j + 1];
        grad[j + 2] = -g[j + 2] * params.xi_sd;
        (value * scale, grad.into_iter().map(|v| v * scale).collect())
    };

    let mut x0 = vec![0.0; j - 1 + 4];
    x0[j] = 0.5f64.ln();
    x0[j + 2] = 0.5f64.ln();
    let out = minimize(objective, x0, spec.tolerance, spec.max_iterations);
    let params = unpack(&out.x, j);
    let loglik = simulated_loglik_and_grad(&params, dataset, &draws, false).0;
    Ok(MixedLogitFit {
        category: 0,
        params,
        loglik,
        converged: out.converged,
        iterations: out.iterations,
        grad_norm: out.grad_norm,
        penalized_products: penalized,
        n_obs: dataset.len(),
        wall_time_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Fits every category independently (in parallel); `fits[c]` belongs to
/// category `c`.
pub fn fit_all_categories(dataset: &Dataset, spec: &MixedLogitSpec) -> Vec<Result<MixedLogitFit>> {
    (0..dataset.dims.n_categories)
        .into_par_iter()
        .map(|c| {
            let sub = dataset.single_category(c)?;
            let mut fit = fit_mixed_logit(&sub, spec)?;
            fit.category = c;
            Ok(fit)
        })
        .collect()
}

/// Simulated-average choice probabilities of one observation over the
/// given coefficient draws.
pub fn predict_mixed_logit(params: &MixedLogitParams, obs: &Observation, draws: &[[f64; 2]]) -> Result<Vec<f64>> {
    params.check()?;
    if obs.prices.len() != params.alpha.len() {
        return Err(Error::dimension("observation products", params.alpha.len(), obs.prices.len()));
    }
    if draws.is_empty() {
        return Err(Error::config("draws", "need at least one coefficient draw"));
    }
    let j = params.alpha.len();
    let mut acc = vec![0.0; j];
    let mut p = vec![0.0; j];
    for &z in draws {
        let (eta, xi) = params.coefficients(z);
        probabilities_at(&params.alpha, eta, xi, obs, &mut p);
        for (a, v) in acc.iter_mut().zip(&p) {
            *a += v;
        }
    }
    let r = draws.len() as f64;
    acc.iter_mut().for_each(|a| *a /= r);
    Ok(acc)
}

/// Predicts every observation of a multi-category dataset from per-category
/// fits, using each consumer's own Halton draws from the population
/// distribution.
pub fn predict_dataset(
    fits: &[MixedLogitFit],
    dataset: &Dataset,
    n_sim_draws: usize,
) -> Result<DrawPredictions> {
    let mut by_category: Vec<Option<&MixedLogitParams>> = vec![None; dataset.dims.n_categories];
    for f in fits {
        if f.category < by_category.len() {
            by_category[f.category] = Some(&f.params);
        }
    }
    let draws = HaltonDraws::new(dataset.dims.n_consumers, n_sim_draws, DEFAULT_BURN_IN);
    dataset
        .observations
        .par_iter()
        .map(|o| {
            let params = by_category[o.category].ok_or_else(|| {
                Error::config("fits", format!("no mixed logit fit for category {}", o.category + 1))
            })?;
            predict_mixed_logit(params, o, draws.consumer(o.consumer))
        })
        .collect()
}

/// Simulates a single-category panel from the mixed logit itself, for
/// parameter-recovery checks. Every consumer buys on every trip; prices are
/// i.i.d. `U(price_range)` per product and trip; the initial state is a
/// uniform random product. Streams: `(MixedLogitDgp, 0)` for prices and
/// `(MixedLogitDgp, 1 + i)` for consumer `i`.
pub fn simulate_mixed_logit(
    truth: &MixedLogitParams,
    n_consumers: usize,
    n_trips: usize,
    price_range: (f64, f64),
    seed: u64,
) -> Result<Dataset> {
    truth.check()?;
    let j = truth.alpha.len();
    let dims = Dims::uniform(n_consumers, 1, j, n_trips, 1)?;
    let mut price_rng = stream(seed, Domain::MixedLogitDgp, 0);
    let prices: Vec<Vec<f64>> = (0..n_trips)
        .map(|_| (0..j).map(|_| uniform(&mut price_rng, price_range.0, price_range.1)).collect())
        .collect();
    let per_consumer: Vec<(Vec<Observation>, Vec<Vec<f64>>)> = (0..n_consumers)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, Domain::MixedLogitDgp, 1 + i as u64);
            let normal = Normal::new(0.0, 1.0).expect("unit normal");
            let z = [normal.sample(&mut rng), normal.sample(&mut rng)];
            let (eta, xi) = truth.coefficients(z);
            let mut lag = Some(rng.random_range(0..j));
            let mut obs_out = Vec::with_capacity(n_trips);
            let mut probs_out = Vec::with_capacity(n_trips);
            let mut p = vec![0.0; j];
            for (t, trip_prices) in prices.iter().enumerate() {
                let mut obs = Observation {
                    consumer: i,
                    trip: t,
                    category: 0,
                    prices: trip_prices.clone(),
                    lag,
                    chosen: 0,
                };
                probabilities_at(&truth.alpha, eta, xi, &obs, &mut p);
                let u: f64 = rng.random();
                let mut cum = 0.0;
                obs.chosen = j - 1;
                for (k, pk) in p.iter().enumerate() {
                    cum += pk;
                    if u < cum {
                        obs.chosen = k;
                        break;
                    }
                }
                lag = Some(obs.chosen);
                obs_out.push(obs);
                probs_out.push(p.clone());
            }
            (obs_out, probs_out)
        })
        .collect();
    let mut observations = Vec::new();
    let mut true_probs = Vec::new();
    for (o, p) in per_consumer {
        observations.extend(o);
        true_probs.extend(p);
    }
    Ok(Dataset {
        dims,
        observations,
        true_probs: Some(true_probs),
    })
}
