//! Own-price elasticities of logit demand from posterior draws.
//!
//! For draw `s`, observation `n` and product `j`,
//! `E = -(theta_i . lambda_j) * price_j * (1 - P_j)`. Each draw's
//! elasticities are averaged over the observations of the product's
//! category (equal weights); the posterior mean and the 2.5% / 97.5%
//! empirical quantiles are then taken across draws.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::observation_utilities;
use crate::numeric::{dot, mean, quantile_sorted, softmax_into};
use crate::params::{ModelKind, ParamDraw};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElasticityRow {
    pub category: usize,
    /// Product index within the category.
    pub product: usize,
    pub mean: f64,
    pub q025: f64,
    pub q975: f64,
    pub n_obs: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ElasticityReport {
    pub rows: Vec<ElasticityRow>,
}

impl ElasticityReport {
    pub fn mean_interval_width(&self) -> f64 {
        let w: Vec<f64> = self.rows.iter().map(|r| r.q975 - r.q025).collect();
        mean(&w)
    }

    /// CSV with columns `category,product,mean,q025,q975,n_obs` (1-based
    /// indices).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("category,product,mean,q025,q975,n_obs\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{:.10},{:.10},{:.10},{}\n",
                r.category + 1,
                r.product + 1,
                r.mean,
                r.q025,
                r.q975,
                r.n_obs
            ));
        }
        out
    }
}

/// Observation-averaged own-price elasticity of every global product under
/// one draw; `NaN` for products whose category has no observations.
pub fn draw_elasticities(draw: &ParamDraw, dataset: &Dataset, kind: ModelKind) -> Result<Vec<f64>> {
    let dims = &dataset.dims;
    if draw.layout.n_products != dims.total_products() || draw.layout.n_consumers != dims.n_consumers {
        return Err(Error::dimension("draw vs. dataset products", dims.total_products(), draw.layout.n_products));
    }
    if kind.has_inertia() && !draw.kind().has_inertia() {
        return Err(Error::config("model", "dynamic elasticities need a rho block"));
    }
    let offsets = dims.category_offsets();
    let mut sums = vec![0.0; dims.total_products()];
    let mut counts = vec![0usize; dims.n_categories];
    let mut u = vec![0.0; dims.max_products()];
    let mut p = vec![0.0; dims.max_products()];
    for obs in &dataset.observations {
        let j_c = obs.prices.len();
        observation_utilities(draw, &offsets, obs, kind, &mut u[..j_c]);
        softmax_into(&u[..j_c], &mut p[..j_c]);
        let theta = draw.theta(obs.consumer);
        let base = offsets[obs.category];
        for j in 0..j_c {
            let sensitivity = dot(theta, draw.lambda(base + j));
            sums[base + j] += -sensitivity * obs.prices[j] * (1.0 - p[j]);
        }
        counts[obs.category] += 1;
    }
    for c in 0..dims.n_categories {
        for j in 0..dims.n_products(c) {
            let idx = offsets[c] + j;
            sums[idx] = if counts[c] > 0 {
                sums[idx] / counts[c] as f64
            } else {
                f64::NAN
            };
        }
    }
    Ok(sums)
}

/// Summarizes posterior elasticities over any stream of draws.
pub fn own_price_elasticities<I>(draws: I, dataset: &Dataset, kind: ModelKind) -> Result<ElasticityReport>
where
    I: IntoIterator,
    I::Item: std::borrow::Borrow<ParamDraw>,
{
    use std::borrow::Borrow;
    let dims = &dataset.dims;
    let n_products = dims.total_products();
    let mut per_product: Vec<Vec<f64>> = vec![Vec::new(); n_products];
    for draw in draws {
        let e = draw_elasticities(draw.borrow(), dataset, kind)?;
        for (acc, v) in per_product.iter_mut().zip(e) {
            acc.push(v);
        }
    }
    if per_product.first().is_some_and(|v| v.is_empty()) {
        return Err(Error::config("draws", "need at least one posterior draw"));
    }
    let mut counts = vec![0usize; dims.n_categories];
    for obs in &dataset.observations {
        counts[obs.category] += 1;
    }
    let offsets = dims.category_offsets();
    let mut rows = Vec::with_capacity(n_products);
    for c in 0..dims.n_categories {
        if counts[c] == 0 {
            continue;
        }
        for j in 0..dims.n_products(c) {
            let mut v = per_product[offsets[c] + j].clone();
            v.sort_by(|a, b| a.total_cmp(b));
            rows.push(ElasticityRow {
                category: c,
                product: j,
                mean: mean(&v),
                q025: quantile_sorted(&v, 0.025),
                q975: quantile_sorted(&v, 0.975),
                n_obs: counts[c],
            });
        }
    }
    Ok(ElasticityReport { rows })
}
