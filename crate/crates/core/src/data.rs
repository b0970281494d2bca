//! Panel dimensions, purchase observations and dataset validation.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lower truncation point of simulated prices.
pub const PRICE_FLOOR: f64 = 0.1;

/// Panel dimensions. Products are addressed globally by concatenating the
/// category blocks in category order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub n_consumers: usize,
    pub n_categories: usize,
    pub products_per_category: Vec<usize>,
    pub n_trips: usize,
    pub n_factors: usize,
}

impl Dims {
    pub fn new(
        n_consumers: usize,
        products_per_category: Vec<usize>,
        n_trips: usize,
        n_factors: usize,
    ) -> Result<Self> {
        let dims = Dims {
            n_consumers,
            n_categories: products_per_category.len(),
            products_per_category,
            n_trips,
            n_factors,
        };
        dims.check()?;
        Ok(dims)
    }

    /// Every category has `n_products` products.
    pub fn uniform(
        n_consumers: usize,
        n_categories: usize,
        n_products: usize,
        n_trips: usize,
        n_factors: usize,
    ) -> Result<Self> {
        Self::new(
            n_consumers,
            vec![n_products; n_categories],
            n_trips,
            n_factors,
        )
    }

    /// Checks positivity of every dimension. Field names follow the usual
    /// panel notation so configuration diagnostics can name them.
    pub fn check(&self) -> Result<()> {
        if self.n_consumers == 0 {
            return Err(Error::config("I", "number of consumers must be positive"));
        }
        if self.n_categories == 0 {
            return Err(Error::config("C", "number of categories must be positive"));
        }
        if self.products_per_category.len() != self.n_categories {
            return Err(Error::config(
                "J",
                format!(
                    "{} product counts given for {} categories",
                    self.products_per_category.len(),
                    self.n_categories
                ),
            ));
        }
        if let Some(c) = self.products_per_category.iter().position(|&j| j == 0) {
            return Err(Error::config(
                "J",
                format!("category {} has no products", c + 1),
            ));
        }
        if self.n_trips == 0 {
            return Err(Error::config("T", "number of trips must be positive"));
        }
        if self.n_factors == 0 {
            return Err(Error::config("K", "number of factors must be positive"));
        }
        Ok(())
    }

    pub fn n_products(&self, category: usize) -> usize {
        self.products_per_category[category]
    }

    /// Global index of the first product of `category`.
    pub fn category_offset(&self, category: usize) -> usize {
        self.products_per_category[..category].iter().sum()
    }

    pub fn category_offsets(&self) -> Vec<usize> {
        let mut offsets = Vec::with_capacity(self.n_categories);
        let mut acc = 0;
        for &j in &self.products_per_category {
            offsets.push(acc);
            acc += j;
        }
        offsets
    }

    pub fn total_products(&self) -> usize {
        self.products_per_category.iter().sum()
    }

    pub fn max_products(&self) -> usize {
        self.products_per_category.iter().copied().max().unwrap_or(0)
    }
}

/// One category purchase: consumer `consumer` bought product `chosen` of
/// `category` on trip `trip`. All indices are 0-based.
#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    pub consumer: usize,
    pub trip: usize,
    pub category: usize,
    pub prices: Vec<f64>,
    /// Product chosen on the most recent earlier purchase occasion in this
    /// category; `None` encodes the all-zero lag indicator.
    pub lag: Option<usize>,
    pub chosen: usize,
}

impl Observation {
    /// The 0/1 lag indicator vector over the category's products.
    pub fn lag_indicator(&self) -> Vec<u8> {
        let mut v = vec![0u8; self.prices.len()];
        if let Some(l) = self.lag {
            if l < v.len() {
                v[l] = 1;
            }
        }
        v
    }

    #[inline]
    pub fn delta(&self, product: usize) -> f64 {
        if self.lag == Some(product) {
            1.0
        } else {
            0.0
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub dims: Dims,
    /// Sorted by (consumer, trip, category).
    pub observations: Vec<Observation>,
    /// Ground-truth choice probabilities, one row per observation
    /// (simulator output only).
    pub true_probs: Option<Vec<Vec<f64>>>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn chosen(&self) -> Vec<usize> {
        self.observations.iter().map(|o| o.chosen).collect()
    }

    /// Keeps the observations whose index satisfies `keep`, carrying the
    /// matching ground-truth rows along.
    pub fn select(&self, mut keep: impl FnMut(usize, &Observation) -> bool) -> Dataset {
        let mut observations = Vec::new();
        let mut probs = self.true_probs.as_ref().map(|_| Vec::new());
        for (n, obs) in self.observations.iter().enumerate() {
            if keep(n, obs) {
                observations.push(obs.clone());
                if let (Some(out), Some(src)) = (probs.as_mut(), self.true_probs.as_ref()) {
                    out.push(src[n].clone());
                }
            }
        }
        Dataset {
            dims: self.dims.clone(),
            observations,
            true_probs: probs,
        }
    }

    /// Restricts to one category, re-indexed as the only category of a
    /// single-category dataset.
    pub fn single_category(&self, category: usize) -> Result<Dataset> {
        if category >= self.dims.n_categories {
            return Err(Error::dimension(
                "category index",
                self.dims.n_categories,
                category,
            ));
        }
        let mut sub = self.select(|_, o| o.category == category);
        for obs in &mut sub.observations {
            obs.category = 0;
        }
        sub.dims = Dims {
            n_categories: 1,
            products_per_category: vec![self.dims.n_products(category)],
            ..self.dims.clone()
        };
        Ok(sub)
    }
}

/// Which dataset invariant an observation violates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Rule {
    ConsumerOutOfRange,
    TripOutOfRange,
    CategoryOutOfRange,
    PriceCount,
    NonFinitePrice,
    PriceBelowFloor,
    ChosenOutOfRange,
    LagOutOfRange,
    Unsorted,
    TripNotIncreasing,
    LagMismatch,
    TrueProbShape,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Rule::ConsumerOutOfRange => "consumer out of range",
            Rule::TripOutOfRange => "trip out of range",
            Rule::CategoryOutOfRange => "category out of range",
            Rule::PriceCount => "price count differs from category size",
            Rule::NonFinitePrice => "non-finite price",
            Rule::PriceBelowFloor => "price below truncation floor",
            Rule::ChosenOutOfRange => "chosen product out of range",
            Rule::LagOutOfRange => "lag product out of range",
            Rule::Unsorted => "observations not sorted by (consumer, trip, category)",
            Rule::TripNotIncreasing => "trips not strictly increasing within consumer and category",
            Rule::LagMismatch => "lag mismatch",
            Rule::TrueProbShape => "true probability row has wrong length",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    /// Index of the first offending observation.
    pub index: usize,
    pub rule: Rule,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "observation {}: {}", self.index, self.rule)
    }
}

/// Outcome of [`validate_dataset`]: one entry per violated rule, pointing
/// at the first observation that breaks it.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, rule: Rule) -> bool {
        self.violations.iter().any(|v| v.rule == rule)
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_ok() {
            Ok(())
        } else {
            let msg: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
            Err(Error::InvalidDataset(msg.join("; ")))
        }
    }
}

pub fn validate_dataset(dataset: &Dataset) -> ValidationReport {
    validate_dataset_with_floor(dataset, PRICE_FLOOR)
}

pub fn validate_dataset_with_floor(dataset: &Dataset, price_floor: f64) -> ValidationReport {
    let dims = &dataset.dims;
    let mut first: Vec<Violation> = Vec::new();
    let mut flag = |index: usize, rule: Rule| {
        if !first.iter().any(|v| v.rule == rule) {
            first.push(Violation { index, rule });
        }
    };

    // (consumer, category) -> (last trip, last chosen)
    let mut history: HashMap<(usize, usize), (usize, usize)> = HashMap::new();
    let mut prev_key: Option<(usize, usize, usize)> = None;

    for (n, obs) in dataset.observations.iter().enumerate() {
        if obs.consumer >= dims.n_consumers {
            flag(n, Rule::ConsumerOutOfRange);
        }
        if obs.trip >= dims.n_trips {
            flag(n, Rule::TripOutOfRange);
        }
        if obs.category >= dims.n_categories {
            flag(n, Rule::CategoryOutOfRange);
            continue;
        }
        let n_products = dims.n_products(obs.category);
        if obs.prices.len() != n_products {
            flag(n, Rule::PriceCount);
        }
        if obs.prices.iter().any(|p| !p.is_finite()) {
            flag(n, Rule::NonFinitePrice);
        } else if obs.prices.iter().any(|&p| p < price_floor) {
            flag(n, Rule::PriceBelowFloor);
        }
        if obs.chosen >= n_products {
            flag(n, Rule::ChosenOutOfRange);
        }
        if matches!(obs.lag, Some(l) if l >= n_products) {
            flag(n, Rule::LagOutOfRange);
        }

        let key = (obs.consumer, obs.trip, obs.category);
        if let Some(prev) = prev_key {
            if key <= prev {
                flag(n, Rule::Unsorted);
            }
        }
        prev_key = Some(key);

        match history.get(&(obs.consumer, obs.category)) {
            Some(&(last_trip, last_chosen)) => {
                if obs.trip <= last_trip {
                    flag(n, Rule::TripNotIncreasing);
                }
                if obs.lag != Some(last_chosen) {
                    flag(n, Rule::LagMismatch);
                }
            }
            // First observation: the lag is the exogenous initial choice
            // (or absent).
            None => {}
        }
        history.insert((obs.consumer, obs.category), (obs.trip, obs.chosen));

        if let Some(probs) = &dataset.true_probs {
            match probs.get(n) {
                Some(row) if row.len() == n_products => {}
                _ => flag(n, Rule::TrueProbShape),
            }
        }
    }
    if let Some(probs) = &dataset.true_probs {
        if probs.len() != dataset.observations.len() {
            flag(dataset.observations.len().min(probs.len()), Rule::TrueProbShape);
        }
    }
    first.sort_by_key(|v| v.index);
    ValidationReport { violations: first }
}
