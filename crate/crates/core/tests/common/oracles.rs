//! Independent reference computations shared by the oracle tests and the
//! acceptance run.

use factor_demand::mixedlogit::MixedLogitParams;
use factor_demand::model::observation_probabilities;
use factor_demand::{Block, Dataset, Dims, Layout, ModelKind, Observation, ParamDraw};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{compensated_sum, gauss_hermite, gaussian_draw, panel, rng};

/// Log-likelihood by explicit triple loops, unshifted exponentials and
/// compensated sums.
pub fn direct_log_likelihood(p: &ParamDraw, d: &Dataset, kind: ModelKind) -> f64 {
    let k = p.layout.n_factors;
    let offsets = d.dims.category_offsets();
    let terms = d.observations.iter().map(|o| {
        let theta = p.theta(o.consumer);
        let utils: Vec<f64> = (0..o.prices.len())
            .map(|j| {
                let g = offsets[o.category] + j;
                let mut u = 0.0;
                for f in 0..k {
                    u += theta[f] * p.gamma(g)[f];
                    u -= theta[f] * p.lambda(g)[f] * o.prices[j];
                    if kind == ModelKind::Dynamic && o.lag == Some(j) {
                        u += theta[f] * p.rho(g).unwrap()[f];
                    }
                }
                u
            })
            .collect();
        let expu: Vec<f64> = utils.iter().map(|u| u.exp()).collect();
        let z = compensated_sum(expu.iter().copied());
        (expu[o.chosen] / z).ln()
    });
    compensated_sum(terms)
}

pub fn loading_blocks(kind: ModelKind) -> Vec<Block> {
    match kind {
        ModelKind::Dynamic => vec![Block::Gamma, Block::Lambda, Block::Rho],
        ModelKind::Static => vec![Block::Gamma, Block::Lambda],
    }
}

/// Applies `theta_i <- A theta_i` and `loading <- B loading` for every unit.
pub fn transform(p: &ParamDraw, a: &[Vec<f64>], b: &[Vec<f64>]) -> ParamDraw {
    let mut out = p.clone();
    let apply = |m: &[Vec<f64>], v: &[f64]| -> Vec<f64> {
        m.iter().map(|row| row.iter().zip(v).map(|(x, y)| x * y).sum()).collect()
    };
    for i in 0..p.layout.n_consumers {
        let v = apply(a, p.theta(i));
        out.slice_mut(Block::Theta, i).copy_from_slice(&v);
    }
    for block in loading_blocks(p.kind()) {
        for prod in 0..p.layout.n_products {
            let v = apply(b, p.slice(block, prod));
            out.slice_mut(block, prod).copy_from_slice(&v);
        }
    }
    out
}

pub fn diag(k: usize, v: f64) -> Vec<Vec<f64>> {
    (0..k).map(|i| (0..k).map(|j| if i == j { v } else { 0.0 }).collect()).collect()
}

/// Random orthogonal matrix by Gram-Schmidt on Gaussian columns.
pub fn random_orthogonal(k: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    let mut q: Vec<Vec<f64>> = Vec::new();
    while q.len() < k {
        let mut v: Vec<f64> = (0..k).map(|_| StandardNormal.sample(rng)).collect();
        for u in &q {
            let d: f64 = u.iter().zip(&v).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(u).for_each(|(x, y)| *x -= d * y);
        }
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-6 {
            q.push(v.into_iter().map(|x| x / n).collect());
        }
    }
    q
}

pub fn small_instance(seed: u64) -> (Dataset, ParamDraw, ModelKind) {
    let mut r = rng(seed);
    let dims = Dims::new(
        r.random_range(1..5),
        (0..r.random_range(1..4)).map(|_| r.random_range(1..5)).collect(),
        r.random_range(1..5),
        r.random_range(1..4),
    )
    .unwrap();
    let kind = if r.random_bool(0.5) { ModelKind::Dynamic } else { ModelKind::Static };
    let d = panel(dims, seed);
    let p = gaussian_draw(Layout::new(&d.dims, kind), seed ^ 0xABCD, 1.0);
    (d, p, kind)
}

pub fn naive_rmse(pred: &[Vec<f64>], truth: &[Vec<f64>]) -> f64 {
    let mut total = 0.0;
    let mut cells = 0.0;
    for n in 0..truth.len() {
        for j in 0..truth[n].len() {
            total += (pred[n][j] - truth[n][j]).powi(2);
            cells += 1.0;
        }
    }
    (total / cells).sqrt()
}

/// Observation-averaged `p * d log P_j / d p_j` by central differences.
pub fn fd_elasticities(draw: &ParamDraw, d: &factor_demand::Dataset, kind: ModelKind) -> Vec<f64> {
    let offsets = d.dims.category_offsets();
    let mut sums = vec![0.0; d.dims.total_products()];
    let mut counts = vec![0usize; d.dims.n_categories];
    let h = 1e-4;
    for o in &d.observations {
        counts[o.category] += 1;
        for j in 0..o.prices.len() {
            let mut up = o.clone();
            let mut down = o.clone();
            up.prices[j] += h;
            down.prices[j] -= h;
            let lp = observation_probabilities(draw, &offsets, &up, kind)[j].ln();
            let lm = observation_probabilities(draw, &offsets, &down, kind)[j].ln();
            sums[offsets[o.category] + j] += o.prices[j] * (lp - lm) / (2.0 * h);
        }
    }
    for c in 0..d.dims.n_categories {
        for j in 0..d.dims.n_products(c) {
            sums[offsets[c] + j] /= counts[c] as f64;
        }
    }
    sums
}

pub fn logit(alpha: &[f64], eta: f64, xi: f64, o: &Observation) -> Vec<f64> {
    let u: Vec<f64> = (0..alpha.len())
        .map(|j| alpha[j] - eta * o.prices[j] + if o.lag == Some(j) { xi } else { 0.0 })
        .collect();
    let z: f64 = u.iter().map(|v| v.exp()).sum();
    u.iter().map(|v| v.exp() / z).collect()
}

/// `E[f(eta, xi)]` over the mixing distribution by a 64 x 64 product rule.
pub fn mixing_expectation(p: &MixedLogitParams, f: impl Fn(f64, f64) -> f64) -> f64 {
    let (x, w) = gauss_hermite(64);
    let mut total = 0.0;
    for (xa, wa) in x.iter().zip(&w) {
        for (xb, wb) in x.iter().zip(&w) {
            let eta = p.eta_mean + p.eta_sd * std::f64::consts::SQRT_2 * xa;
            let xi = p.xi_mean + p.xi_sd * std::f64::consts::SQRT_2 * xb;
            total += wa * wb * f(eta, xi);
        }
    }
    total / std::f64::consts::PI
}

pub fn quadrature_loglik(p: &MixedLogitParams, d: &Dataset) -> f64 {
    (0..d.dims.n_consumers)
        .map(|i| {
            let obs: Vec<&Observation> = d.observations.iter().filter(|o| o.consumer == i).collect();
            mixing_expectation(p, |eta, xi| obs.iter().map(|o| logit(&p.alpha, eta, xi, o)[o.chosen]).product())
                .ln()
        })
        .sum()
}

