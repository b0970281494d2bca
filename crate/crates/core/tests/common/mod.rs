//! Shared fixtures for the integration tests.
#![allow(dead_code)]

pub mod oracles;

use factor_demand::dgp::simulate;
use factor_demand::{Dataset, Dims, Layout, ModelKind, ParamDraw, SimConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A simulated panel with the default ranges.
pub fn panel(dims: Dims, seed: u64) -> Dataset {
    simulate(&SimConfig::new(dims, seed)).unwrap().dataset
}

/// Parameters with i.i.d. `N(0, scale^2)` entries.
pub fn gaussian_draw(layout: Layout, seed: u64, scale: f64) -> ParamDraw {
    let mut r = rng(seed);
    let values = (0..layout.len())
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut r);
            scale * z
        })
        .collect();
    ParamDraw::from_values(layout, values).unwrap()
}

pub fn layout_for(dataset: &Dataset, kind: ModelKind) -> Layout {
    Layout::new(&dataset.dims, kind)
}

/// Neumaier-compensated sum.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut c = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}

/// `|a - b| <= tol * max(1, |b|)`.
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

/// Nodes and weights of `n`-point Gauss-Hermite quadrature for the weight
/// `exp(-x^2)`, by Newton iteration on the orthonormal Hermite recurrence.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let pim4 = std::f64::consts::PI.powf(-0.25);
    let m = n.div_ceil(2);
    let mut z = 0.0f64;
    for i in 0..m {
        z = match i {
            0 => (2.0 * n as f64 + 1.0).sqrt() - 1.85575 * (2.0 * n as f64 + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * (n as f64).powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = z * (2.0 / (j as f64 + 1.0)).sqrt() * p2 - (j as f64 / (j as f64 + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * n as f64).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() < 1e-15 {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Expectation of `f(Z)` for `Z ~ N(0, 1)` by `n`-point Gauss-Hermite.
pub fn normal_expectation(n: usize, f: impl Fn(f64) -> f64) -> f64 {
    let (x, w) = gauss_hermite(n);
    let s = std::f64::consts::PI.sqrt();
    x.iter().zip(&w).map(|(xi, wi)| wi * f(std::f64::consts::SQRT_2 * xi)).sum::<f64>() / s
}
