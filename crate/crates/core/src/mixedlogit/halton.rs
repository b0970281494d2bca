//! Halton low-discrepancy sequences and the normal draws built from them.

use statrs::distribution::{ContinuousCDF, Normal};

/// Radical-inverse value of `index` in `base` (0-based index; index 0 maps
/// to 0, so callers skip it via the burn-in).
pub fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut out = 0.0;
    while index > 0 {
        out += f * (index % base) as f64;
        index /= base;
        f *= inv;
    }
    out
}

/// Quasi-random standard normal pairs for simulated likelihood.
///
/// Consumer `i` uses Halton points `burn_in + i * per_consumer + r` for
/// `r < per_consumer`, in bases 2 (price coefficient) and 3 (inertia
/// coefficient), mapped through the normal quantile function.
#[derive(Clone, Debug, PartialEq)]
pub struct HaltonDraws {
    pub per_consumer: usize,
    pub n_consumers: usize,
    /// `n_consumers * per_consumer` pairs, consumer-major.
    pub pairs: Vec<[f64; 2]>,
}

pub const DEFAULT_BURN_IN: u64 = 50;

impl HaltonDraws {
    pub fn new(n_consumers: usize, per_consumer: usize, burn_in: u64) -> Self {
        let normal = Normal::standard();
        let total = n_consumers * per_consumer;
        let pairs = (0..total as u64)
            .map(|k| {
                let idx = burn_in + k + 1;
                [
                    normal.inverse_cdf(radical_inverse(idx, 2)),
                    normal.inverse_cdf(radical_inverse(idx, 3)),
                ]
            })
            .collect();
        HaltonDraws {
            per_consumer,
            n_consumers,
            pairs,
        }
    }

    pub fn consumer(&self, i: usize) -> &[[f64; 2]] {
        &self.pairs[i * self.per_consumer..(i + 1) * self.per_consumer]
    }
}
