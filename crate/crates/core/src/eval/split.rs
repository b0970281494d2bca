use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::rng::{stream, Domain};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitUnit {
    /// Each consumer's chronologically last trips form the test set.
    #[default]
    ByTrip,
    /// Uniformly sampled observations form the test set.
    ByObservation,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub unit: SplitUnit,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_fraction: 0.8,
            unit: SplitUnit::ByTrip,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::config("train_fraction", "must lie strictly between 0 and 1"));
        }
        Ok(())
    }

    /// Number of trailing trips held out: `ceil((1 - f) * T)`.
    pub fn test_trips(&self, n_trips: usize) -> usize {
        // The epsilon keeps e.g. (1 - 0.8) * 20 = 4.000000000000001 at 4.
        let raw = (1.0 - self.train_fraction) * n_trips as f64;
        ((raw - 1e-9).ceil().max(0.0) as usize).min(n_trips)
    }
}

/// Splits into (train, test). Lag indicators are data, so test
/// observations keep the state implied by the full purchase history.
pub fn split_dataset(dataset: &Dataset, spec: &SplitSpec, seed: u64) -> Result<(Dataset, Dataset)> {
    spec.validate()?;
    let (train, test) = match spec.unit {
        SplitUnit::ByTrip => {
            let t = dataset.dims.n_trips;
            if t < 2 {
                return Err(Error::EmptySplit("by-trip split needs at least two trips".into()));
            }
            let first_test = t - spec.test_trips(t);
            (
                dataset.select(|_, o| o.trip < first_test),
                dataset.select(|_, o| o.trip >= first_test),
            )
        }
        SplitUnit::ByObservation => {
            let n = dataset.len();
            let n_test = ((1.0 - spec.train_fraction) * n as f64).round() as usize;
            let mut rng = stream(seed, Domain::Split, 0);
            let mut is_test = vec![false; n];
            for i in rand::seq::index::sample(&mut rng, n, n_test.min(n)) {
                is_test[i] = true;
            }
            (
                dataset.select(|i, _| !is_test[i]),
                dataset.select(|i, _| is_test[i]),
            )
        }
    };
    if train.is_empty() {
        return Err(Error::EmptySplit("training set is empty".into()));
    }
    if test.is_empty() {
        return Err(Error::EmptySplit("test set is empty".into()));
    }
    Ok((train, test))
}
