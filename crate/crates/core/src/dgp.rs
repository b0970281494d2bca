//! Purchase-panel simulator for the dynamic factor model.
//!
//! Latent factors and loadings are uniform draws, prices follow a
//! category-level / trip-shock process floored at `price_floor`, category
//! incidence picks a uniformly random subset of `C_it ~ U{floor(C/2)..C}`
//! categories on each trip, and products are chosen by utility maximization
//! under standard Gumbel shocks with one-lag inertia.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Dims, Observation};
use crate::error::{Error, Result};
use crate::model::observation_utilities;
use crate::numeric::softmax_into;
use crate::params::{Block, Layout, ModelKind, ParamDraw};
use crate::rng::{gumbel, stream, uniform, Domain};

/// Ground-truth simulator parameters (always carries the rho block).
pub type TrueParams = ParamDraw;

/// Closed real interval, serialized as `[lo, hi]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Interval { lo, hi }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

impl From<[f64; 2]> for Interval {
    fn from(v: [f64; 2]) -> Self {
        Interval { lo: v[0], hi: v[1] }
    }
}

impl From<Interval> for [f64; 2] {
    fn from(i: Interval) -> Self {
        [i.lo, i.hi]
    }
}

/// How the lag state of each (consumer, category) is set before trip 1.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialState {
    /// A uniformly random product, independent of preferences.
    #[default]
    Uniform,
    /// No initial state: the first lag indicator is all zeros.
    Disabled,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub dims: Dims,
    pub theta_range: Interval,
    pub gamma_range: Interval,
    pub lambda_range: Interval,
    pub rho_range: Interval,
    pub price_level_range: Interval,
    pub price_dispersion_range: Interval,
    /// Standard deviation of the per-trip price shock.
    pub price_shock_scale: f64,
    pub price_floor: f64,
    pub initial_state: InitialState,
    pub seed: u64,
}

/// Prices are stored at this resolution so that a dataset written with six
/// fractional digits reproduces the simulated prices exactly.
const PRICE_QUANTUM: f64 = 1e6;

fn quantize(p: f64) -> f64 {
    (p * PRICE_QUANTUM).round() / PRICE_QUANTUM
}

impl SimConfig {
    pub fn new(dims: Dims, seed: u64) -> Self {
        SimConfig {
            dims,
            theta_range: Interval::new(0.0, 1.0),
            gamma_range: Interval::new(0.3, 0.4),
            lambda_range: Interval::new(0.3, 0.4),
            rho_range: Interval::new(0.0, 2.0),
            price_level_range: Interval::new(1.0, 10.0),
            price_dispersion_range: Interval::new(0.0, 1.0),
            price_shock_scale: 0.2,
            price_floor: 0.1,
            initial_state: InitialState::Uniform,
            seed,
        }
    }

    /// Same configuration with inertia switched off.
    pub fn without_inertia(mut self) -> Self {
        self.rho_range = Interval::new(0.0, 0.0);
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.dims.check()?;
        let ranges = [
            ("theta_range", self.theta_range),
            ("gamma_range", self.gamma_range),
            ("lambda_range", self.lambda_range),
            ("rho_range", self.rho_range),
            ("price_level_range", self.price_level_range),
            ("price_dispersion_range", self.price_dispersion_range),
        ];
        for (name, r) in ranges {
            if !(r.lo.is_finite() && r.hi.is_finite()) || r.lo > r.hi {
                return Err(Error::config(name, "need finite bounds with lower <= upper"));
            }
        }
        if !(self.price_floor > 0.0) {
            return Err(Error::config("price_floor", "must be positive"));
        }
        if !(self.price_shock_scale >= 0.0) {
            return Err(Error::config("price_shock_scale", "must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PricePaths {
    /// Base price per global product.
    pub base_prices: Vec<f64>,
    /// Row-major `T x P` realized prices.
    pub prices: Vec<f64>,
    pub n_products: usize,
}

impl PricePaths {
    pub fn price(&self, trip: usize, product: usize) -> f64 {
        self.prices[trip * self.n_products + product]
    }

    pub fn trip(&self, trip: usize) -> &[f64] {
        &self.prices[trip * self.n_products..(trip + 1) * self.n_products]
    }
}

/// Draws theta, gamma, lambda and rho. Consumer `i` uses stream
/// `(Theta, i)`; product `p` draws its gamma, lambda, rho K-vectors in that
/// order from stream `(Loading, p)`.
pub fn draw_true_params(config: &SimConfig) -> Result<TrueParams> {
    config.validate()?;
    let dims = &config.dims;
    let layout = Layout::new(dims, ModelKind::Dynamic);
    let mut params = ParamDraw::zeros(layout);
    for i in 0..dims.n_consumers {
        let mut rng = stream(config.seed, Domain::Theta, i as u64);
        for v in params.slice_mut(Block::Theta, i) {
            *v = uniform(&mut rng, config.theta_range.lo, config.theta_range.hi);
        }
    }
    for p in 0..dims.total_products() {
        let mut rng = stream(config.seed, Domain::Loading, p as u64);
        for (block, range) in [
            (Block::Gamma, config.gamma_range),
            (Block::Lambda, config.lambda_range),
            (Block::Rho, config.rho_range),
        ] {
            for v in params.slice_mut(block, p) {
                *v = uniform(&mut rng, range.lo, range.hi);
            }
        }
    }
    Ok(params)
}

/// Category `c` draws `m_c`, `r_c` and its base prices from stream
/// `(PriceLevel, c)` and its trip shocks (trip-major) from `(PriceShock, c)`.
pub fn draw_price_paths(config: &SimConfig) -> Result<PricePaths> {
    config.validate()?;
    let dims = &config.dims;
    let n_products = dims.total_products();
    let mut base_prices = vec![0.0; n_products];
    let mut prices = vec![0.0; dims.n_trips * n_products];
    for (c, offset) in dims.category_offsets().into_iter().enumerate() {
        let j_c = dims.n_products(c);
        let mut rng = stream(config.seed, Domain::PriceLevel, c as u64);
        let level = uniform(&mut rng, config.price_level_range.lo, config.price_level_range.hi);
        let dispersion = uniform(
            &mut rng,
            config.price_dispersion_range.lo,
            config.price_dispersion_range.hi,
        );
        for base in &mut base_prices[offset..offset + j_c] {
            *base = quantize(uniform(&mut rng, level, level + dispersion));
        }
        let mut rng = stream(config.seed, Domain::PriceShock, c as u64);
        for t in 0..dims.n_trips {
            for j in 0..j_c {
                let shock: f64 = if config.price_shock_scale > 0.0 {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    config.price_shock_scale * z
                } else {
                    0.0
                };
                let p = offset + j;
                prices[t * n_products + p] =
                    quantize((base_prices[p] + shock).max(config.price_floor));
            }
        }
    }
    Ok(PricePaths {
        base_prices,
        prices,
        n_products,
    })
}

/// Simulates the purchase panel. Consumers are independent: consumer `i`
/// draws its initial states, incidence subsets and Gumbel shocks from
/// stream `(Choice, i)`, so the result does not depend on scheduling.
pub fn simulate_choices(
    params: &TrueParams,
    prices: &PricePaths,
    config: &SimConfig,
) -> Result<Dataset> {
    config.validate()?;
    let dims = &config.dims;
    let layout = Layout::new(dims, ModelKind::Dynamic);
    if params.layout != layout {
        return Err(Error::dimension("true parameters", layout.len(), params.values.len()));
    }
    if prices.n_products != dims.total_products()
        || prices.prices.len() != dims.n_trips * dims.total_products()
    {
        return Err(Error::dimension(
            "price paths",
            dims.n_trips * dims.total_products(),
            prices.prices.len(),
        ));
    }
    let offsets = dims.category_offsets();
    let per_consumer: Vec<(Vec<Observation>, Vec<Vec<f64>>)> = (0..dims.n_consumers)
        .into_par_iter()
        .map(|i| simulate_consumer(i, params, prices, config, &offsets))
        .collect();

    let mut observations = Vec::new();
    let mut true_probs = Vec::new();
    for (obs, probs) in per_consumer {
        observations.extend(obs);
        true_probs.extend(probs);
    }
    Ok(Dataset {
        dims: dims.clone(),
        observations,
        true_probs: Some(true_probs),
    })
}

fn simulate_consumer(
    consumer: usize,
    params: &TrueParams,
    prices: &PricePaths,
    config: &SimConfig,
    offsets: &[usize],
) -> (Vec<Observation>, Vec<Vec<f64>>) {
    let dims = &config.dims;
    let n_cat = dims.n_categories;
    let mut rng = stream(config.seed, Domain::Choice, consumer as u64);

    let mut state: Vec<Option<usize>> = (0..n_cat)
        .map(|c| match config.initial_state {
            InitialState::Uniform => Some(rng.random_range(0..dims.n_products(c))),
            InitialState::Disabled => None,
        })
        .collect();

    let mut observations = Vec::new();
    let mut true_probs = Vec::new();
    let mut categories: Vec<usize> = Vec::with_capacity(n_cat);
    let mut u = vec![0.0; dims.max_products()];
    for t in 0..dims.n_trips {
        let n_buy = rng.random_range(n_cat / 2..=n_cat);
        categories.clear();
        categories.extend(0..n_cat);
        for k in 0..n_buy {
            let pick = rng.random_range(k..n_cat);
            categories.swap(k, pick);
        }
        categories.truncate(n_buy);
        categories.sort_unstable();

        let trip_prices = prices.trip(t);
        for &c in &categories {
            let j_c = dims.n_products(c);
            let mut obs = Observation {
                consumer,
                trip: t,
                category: c,
                prices: trip_prices[offsets[c]..offsets[c] + j_c].to_vec(),
                lag: state[c],
                chosen: 0,
            };
            let u = &mut u[..j_c];
            observation_utilities(params, offsets, &obs, ModelKind::Dynamic, u);
            let mut probs = vec![0.0; j_c];
            softmax_into(u, &mut probs);

            let mut best = f64::NEG_INFINITY;
            for (j, &uj) in u.iter().enumerate() {
                let total = uj + gumbel(&mut rng);
                if total > best {
                    best = total;
                    obs.chosen = j;
                }
            }
            state[c] = Some(obs.chosen);
            observations.push(obs);
            true_probs.push(probs);
        }
    }
    (observations, true_probs)
}

/// Everything one simulator run produces.
#[derive(Clone, Debug)]
pub struct Simulation {
    pub params: TrueParams,
    pub prices: PricePaths,
    pub dataset: Dataset,
}

pub fn simulate(config: &SimConfig) -> Result<Simulation> {
    let params = draw_true_params(config)?;
    let prices = draw_price_paths(config)?;
    let dataset = simulate_choices(&params, &prices, config)?;
    Ok(Simulation {
        params,
        prices,
        dataset,
    })
}

/// Per-category persistence summary.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RepurchaseRow {
    pub category: usize,
    pub n_pairs: usize,
    /// Share of consecutive purchase pairs with an identical product.
    pub repurchase: Option<f64>,
    /// Complementary mass spread evenly over the `J_c - 1` alternatives.
    pub switch_each: Option<f64>,
}

/// Repurchase vs. switching probabilities over consecutive observed
/// purchases within each (consumer, category).
pub fn repurchase_diagnostics(dataset: &Dataset) -> Vec<RepurchaseRow> {
    let dims = &dataset.dims;
    let mut last: std::collections::HashMap<(usize, usize), usize> = Default::default();
    let mut pairs = vec![0usize; dims.n_categories];
    let mut same = vec![0usize; dims.n_categories];
    for obs in &dataset.observations {
        if let Some(prev) = last.insert((obs.consumer, obs.category), obs.chosen) {
            pairs[obs.category] += 1;
            if prev == obs.chosen {
                same[obs.category] += 1;
            }
        }
    }
    (0..dims.n_categories)
        .map(|c| {
            let repurchase = (pairs[c] > 0).then(|| same[c] as f64 / pairs[c] as f64);
            let j_c = dims.n_products(c);
            RepurchaseRow {
                category: c,
                n_pairs: pairs[c],
                repurchase,
                switch_each: repurchase
                    .filter(|_| j_c > 1)
                    .map(|r| (1.0 - r) / (j_c - 1) as f64),
            }
        })
        .collect()
}
