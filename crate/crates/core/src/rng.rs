//! Named, counter-based random streams.
//!
//! Every random quantity is drawn from a ChaCha8 stream addressed by
//! `(seed, domain, index)`. The 256-bit key is derived from `seed` and the
//! domain tag with SplitMix64; `index` selects the ChaCha stream within the
//! key. Streams never overlap, so work split across threads by `index`
//! (consumer, category, replication, ...) is order-independent.
//!
//! | domain            | index              | used for                          |
//! |-------------------|--------------------|-----------------------------------|
//! | `Theta`           | consumer           | true consumer factors             |
//! | `Loading`         | global product     | true gamma / lambda / rho         |
//! | `PriceLevel`      | category           | m_c, r_c and base prices          |
//! | `PriceShock`      | category           | per-trip price shocks             |
//! | `Choice`          | consumer           | incidence, initial state, Gumbel  |
//! | `VariationalInit` | 0                  | initial variational means         |
//! | `Gradient`        | iteration          | reparameterization noise          |
//! | `ElboEval`        | evaluation counter | ELBO-only evaluations             |
//! | `Posterior`       | 0                  | posterior draws                   |
//! | `Split`           | 0                  | by-observation split              |
//! | `Minibatch`       | iteration          | observation subsampling           |
//! | `Replication`     | replication        | seeds of experiment replications  |
//! | `MixedLogitDgp`   | 0 / 1 + consumer   | mixed logit recovery panels       |

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    Theta = 1,
    Loading = 2,
    PriceLevel = 3,
    PriceShock = 4,
    Choice = 5,
    VariationalInit = 6,
    Gradient = 7,
    ElboEval = 8,
    Posterior = 9,
    Split = 10,
    Minibatch = 11,
    Replication = 12,
    MixedLogitDgp = 13,
}

#[inline]
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Opens the stream `(seed, domain, index)`.
pub fn stream(seed: u64, domain: Domain, index: u64) -> StreamRng {
    let mut state = seed ^ (domain as u64).wrapping_mul(0xD1B5_4A32_D192_ED03);
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(index);
    rng
}

/// Derives a child seed, e.g. the simulation seed of replication `index`.
pub fn derive_seed(seed: u64, domain: Domain, index: u64) -> u64 {
    stream(seed, domain, index).next_u64()
}

/// Uniform on `[lo, hi]`; returns `lo` exactly for a degenerate interval.
#[inline]
pub fn uniform(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        return lo;
    }
    lo + (hi - lo) * rng.random::<f64>()
}

/// Standard Gumbel draw by inverse CDF, with `u` kept inside `(0, 1)`.
#[inline]
pub fn gumbel(rng: &mut impl Rng) -> f64 {
    let u: f64 = rng.random::<f64>().clamp(f64::EPSILON, 1.0 - f64::EPSILON);
    -(-u.ln()).ln()
}
