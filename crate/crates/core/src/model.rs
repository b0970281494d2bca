//! Deterministic utilities, logit probabilities, the conditional
//! log-likelihood, the Gaussian log-prior and their analytic gradients.
//!
//! The utility of product `j` of category `c` for consumer `i` is
//!
//! ```text
//! u = theta_i . gamma_j - (theta_i . lambda_j) * price_j + (theta_i . rho_j) * delta_j
//! ```
//!
//! where `delta_j` is 1 iff `j` was bought on the consumer's previous
//! purchase occasion in `c`. The static model drops the last term.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Dims, Observation};
use crate::error::{Error, Result};
use crate::numeric::{dot, log_sum_exp, pairwise_reduce_vecs, pairwise_sum, softmax_into};
use crate::params::{Block, Layout, ModelKind, ParamDraw};

/// Observations per work unit in likelihood/gradient sums. Chunk results
/// are reduced with a fixed binary tree, so sums are bit-identical for any
/// thread count.
pub const CHUNK: usize = 512;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// Independent `N(0, scale^2)` prior on every latent coordinate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub scale: f64,
}

impl Default for PriorSpec {
    fn default() -> Self {
        PriorSpec { scale: 1.0 }
    }
}

impl PriorSpec {
    pub fn new(scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::config("prior_scale", "must be a positive finite number"));
        }
        Ok(PriorSpec { scale })
    }
}

/// Utility of one product. `rho` must be given iff the model is dynamic.
pub fn utility(
    theta: &[f64],
    gamma: &[f64],
    lambda: &[f64],
    rho: Option<&[f64]>,
    price: f64,
    delta: f64,
) -> Result<f64> {
    let k = theta.len();
    for v in [gamma, lambda] {
        if v.len() != k {
            return Err(Error::dimension("loading vector length", k, v.len()));
        }
    }
    let mut u = dot(theta, gamma) - dot(theta, lambda) * price;
    if let Some(rho) = rho {
        if rho.len() != k {
            return Err(Error::dimension("loading vector length", k, rho.len()));
        }
        u += dot(theta, rho) * delta;
    }
    Ok(u)
}

/// Logit choice probabilities (max-subtracted softmax).
pub fn choice_probabilities(utilities: &[f64]) -> Vec<f64> {
    crate::numeric::softmax(utilities)
}

/// Writes the deterministic utilities of every product of `obs`'s category.
/// With `kind == Static` the inertia term is skipped even when `params`
/// carries a rho block.
#[inline]
pub fn observation_utilities(
    params: &ParamDraw,
    offsets: &[usize],
    obs: &Observation,
    kind: ModelKind,
    out: &mut [f64],
) {
    let theta = params.theta(obs.consumer);
    let base = offsets[obs.category];
    for (j, (u, &price)) in out.iter_mut().zip(&obs.prices).enumerate() {
        let p = base + j;
        *u = dot(theta, params.gamma(p)) - dot(theta, params.lambda(p)) * price;
    }
    if kind.has_inertia() {
        if let (Some(lag), Some(_)) = (obs.lag, params.rho(0)) {
            out[lag] += dot(theta, params.rho(base + lag).expect("rho block"));
        }
    }
}

/// Logit probabilities of every product of `obs`'s category.
pub fn observation_probabilities(
    params: &ParamDraw,
    offsets: &[usize],
    obs: &Observation,
    kind: ModelKind,
) -> Vec<f64> {
    let mut u = vec![0.0; obs.prices.len()];
    observation_utilities(params, offsets, obs, kind, &mut u);
    let mut p = vec![0.0; u.len()];
    softmax_into(&u, &mut p);
    p
}

fn check_params(params: &ParamDraw, dims: &Dims, kind: ModelKind) -> Result<()> {
    if kind.has_inertia() && !params.kind().has_inertia() {
        return Err(Error::config("model", "dynamic likelihood needs a rho block"));
    }
    let expected = Layout {
        n_factors: params.layout.n_factors,
        ..Layout::new(dims, params.kind())
    };
    if params.layout != expected {
        return Err(Error::dimension("parameter vector", expected.len(), params.values.len()));
    }
    Ok(())
}

/// Conditional log-likelihood summed over observations.
pub fn log_likelihood(params: &ParamDraw, dataset: &Dataset, kind: ModelKind) -> Result<f64> {
    check_params(params, &dataset.dims, kind)?;
    let offsets = dataset.dims.category_offsets();
    let chunks: Vec<f64> = dataset
        .observations
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut u = vec![0.0; dataset.dims.max_products()];
            let terms: Vec<f64> = chunk
                .iter()
                .map(|obs| {
                    let u = &mut u[..obs.prices.len()];
                    observation_utilities(params, &offsets, obs, kind, u);
                    u[obs.chosen] - log_sum_exp(u)
                })
                .collect();
            pairwise_sum(&terms)
        })
        .collect();
    Ok(pairwise_sum(&chunks))
}

/// Sum of Gaussian log-densities over every coordinate of `params`.
pub fn log_prior(params: &ParamDraw, prior: PriorSpec) -> f64 {
    let s = prior.scale;
    let quad: Vec<f64> = params.values.iter().map(|z| (z / s).powi(2)).collect();
    -0.5 * pairwise_sum(&quad) - params.values.len() as f64 * (s.ln() + HALF_LN_2PI)
}

pub fn log_joint(
    params: &ParamDraw,
    dataset: &Dataset,
    prior: PriorSpec,
    kind: ModelKind,
) -> Result<f64> {
    Ok(log_likelihood(params, dataset, kind)? + log_prior(params, prior))
}

/// Accumulates `scale` times the log-likelihood gradient of `obs` into
/// `grad` and returns the observation's log-likelihood term.
fn accumulate_observation(
    params: &ParamDraw,
    offsets: &[usize],
    obs: &Observation,
    kind: ModelKind,
    scale: f64,
    u: &mut [f64],
    prob: &mut [f64],
    grad: &mut ParamDraw,
) -> f64 {
    observation_utilities(params, offsets, obs, kind, u);
    let ll = u[obs.chosen] - log_sum_exp(u);
    softmax_into(u, prob);

    let k = params.layout.n_factors;
    let theta = params.theta(obs.consumer);
    let base = offsets[obs.category];
    let inertia = kind.has_inertia() && obs.lag.is_some();

    let theta_off = grad.layout.offset(Block::Theta, obs.consumer);
    for j in 0..prob.len() {
        let r = scale * ((j == obs.chosen) as u8 as f64 - prob[j]);
        if r == 0.0 {
            continue;
        }
        let p = base + j;
        let price = obs.prices[j];
        let gamma = params.gamma(p);
        let lambda = params.lambda(p);
        let g_off = grad.layout.offset(Block::Gamma, p);
        let l_off = grad.layout.offset(Block::Lambda, p);
        for f in 0..k {
            grad.values[g_off + f] += r * theta[f];
            grad.values[l_off + f] -= r * price * theta[f];
            grad.values[theta_off + f] += r * (gamma[f] - lambda[f] * price);
        }
        if inertia && obs.lag == Some(j) {
            let rho = params.rho(p).expect("rho block");
            let r_off = grad.layout.offset(Block::Rho, p);
            for f in 0..k {
                grad.values[r_off + f] += r * theta[f];
                grad.values[theta_off + f] += r * rho[f];
            }
        }
    }
    ll
}

/// Log-likelihood and its gradient over `observations`, each term scaled by
/// `scale` (1 for full batch, N/|batch| for minibatches).
pub(crate) fn likelihood_and_grad(
    params: &ParamDraw,
    dims: &Dims,
    observations: &[&Observation],
    kind: ModelKind,
    scale: f64,
) -> (f64, ParamDraw) {
    let offsets = dims.category_offsets();
    let max_j = dims.max_products();
    let mut parts: Vec<(f64, ParamDraw)> = observations
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut grad = ParamDraw::zeros(params.layout);
            let mut u = vec![0.0; max_j];
            let mut prob = vec![0.0; max_j];
            let terms: Vec<f64> = chunk
                .iter()
                .map(|obs| {
                    let j = obs.prices.len();
                    accumulate_observation(
                        params, &offsets, obs, kind, scale, &mut u[..j], &mut prob[..j], &mut grad,
                    )
                })
                .collect();
            (scale * pairwise_sum(&terms), grad)
        })
        .collect();
    if parts.is_empty() {
        return (0.0, ParamDraw::zeros(params.layout));
    }
    let lls: Vec<f64> = parts.iter().map(|(ll, _)| *ll).collect();
    let mut grads: Vec<Vec<f64>> = parts.iter_mut().map(|(_, g)| std::mem::take(&mut g.values)).collect();
    pairwise_reduce_vecs(&mut grads);
    let values = std::mem::take(&mut grads[0]);
    (pairwise_sum(&lls), ParamDraw { layout: params.layout, values })
}

fn add_prior_grad(params: &ParamDraw, prior: PriorSpec, grad: &mut ParamDraw) {
    let inv_var = 1.0 / (prior.scale * prior.scale);
    for (g, z) in grad.values.iter_mut().zip(&params.values) {
        *g -= z * inv_var;
    }
}

/// Log joint (likelihood plus prior) and its exact gradient.
pub fn log_joint_and_grad(
    params: &ParamDraw,
    dataset: &Dataset,
    prior: PriorSpec,
    kind: ModelKind,
) -> Result<(f64, ParamDraw)> {
    if params.kind() != kind {
        return Err(Error::config("model", "gradient requires matching parameter blocks"));
    }
    check_params(params, &dataset.dims, kind)?;
    let refs: Vec<&Observation> = dataset.observations.iter().collect();
    let (ll, mut grad) = likelihood_and_grad(params, &dataset.dims, &refs, kind, 1.0);
    add_prior_grad(params, prior, &mut grad);
    Ok((ll + log_prior(params, prior), grad))
}

/// Gradient of `log_likelihood + log_prior` with respect to every
/// coordinate of `params`.
pub fn grad_log_joint(
    params: &ParamDraw,
    dataset: &Dataset,
    prior: PriorSpec,
    kind: ModelKind,
) -> Result<ParamDraw> {
    log_joint_and_grad(params, dataset, prior, kind).map(|(_, g)| g)
}
