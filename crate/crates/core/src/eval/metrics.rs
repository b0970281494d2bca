use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::observation_probabilities;
use crate::numeric::{mean, pairwise_sum};
use crate::params::{ModelKind, ParamDraw};
use crate::vi::{posterior_sampler, VariationalState};

/// Per-observation probability rows of one draw (`N x J_c`).
pub type DrawPredictions = Vec<Vec<f64>>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub rmse_mean: f64,
    pub rmse_per_draw: Vec<f64>,
    pub accuracy: f64,
    pub n_test: usize,
    #[serde(skip)]
    pub wall_time_seconds: f64,
}

/// Logit probabilities of every test observation under one draw.
pub fn predict_draw(draw: &ParamDraw, test: &Dataset, kind: ModelKind) -> Result<DrawPredictions> {
    if draw.layout.n_consumers != test.dims.n_consumers
        || draw.layout.n_products != test.dims.total_products()
    {
        return Err(Error::dimension(
            "draw vs. dataset products",
            test.dims.total_products(),
            draw.layout.n_products,
        ));
    }
    if kind.has_inertia() && !draw.kind().has_inertia() {
        return Err(Error::config("model", "dynamic predictions need a rho block"));
    }
    let offsets = test.dims.category_offsets();
    Ok(test
        .observations
        .iter()
        .map(|o| observation_probabilities(draw, &offsets, o, kind))
        .collect())
}

/// `S x N x J_c` predicted probabilities.
pub fn predicted_probabilities(
    draws: &[ParamDraw],
    test: &Dataset,
    kind: ModelKind,
) -> Result<Vec<DrawPredictions>> {
    if draws.is_empty() {
        return Err(Error::config("draws", "need at least one posterior draw"));
    }
    draws.iter().map(|d| predict_draw(d, test, kind)).collect()
}

/// RMSE of one draw over all `N * J` cells.
pub fn rmse_draw(pred: &DrawPredictions, truth: &[Vec<f64>]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::dimension("prediction rows", truth.len(), pred.len()));
    }
    let mut sq = Vec::with_capacity(pred.len());
    let mut cells = 0usize;
    for (p, t) in pred.iter().zip(truth) {
        if p.len() != t.len() {
            return Err(Error::dimension("prediction row length", t.len(), p.len()));
        }
        cells += p.len();
        sq.push(p.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum::<f64>());
    }
    if cells == 0 {
        return Err(Error::EmptySplit("no test cells".into()));
    }
    Ok((pairwise_sum(&sq) / cells as f64).sqrt())
}

/// Per-draw RMSE and its mean.
pub fn rmse(pred: &[DrawPredictions], truth: &[Vec<f64>]) -> Result<(Vec<f64>, f64)> {
    let per: Vec<f64> = pred.iter().map(|p| rmse_draw(p, truth)).collect::<Result<_>>()?;
    let m = mean(&per);
    Ok((per, m))
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (j, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = j;
        }
    }
    best
}

/// Share of observations whose most probable product was chosen.
pub fn accuracy_draw(pred: &DrawPredictions, chosen: &[usize]) -> Result<f64> {
    if pred.len() != chosen.len() {
        return Err(Error::dimension("prediction rows", chosen.len(), pred.len()));
    }
    if chosen.is_empty() {
        return Err(Error::EmptySplit("no test observations".into()));
    }
    let hits = pred
        .iter()
        .zip(chosen)
        .filter(|(p, &c)| argmax(p) == c)
        .count();
    Ok(hits as f64 / chosen.len() as f64)
}

/// Per-draw accuracy averaged over draws.
pub fn accuracy(pred: &[DrawPredictions], chosen: &[usize]) -> Result<f64> {
    let per: Vec<f64> = pred.iter().map(|p| accuracy_draw(p, chosen)).collect::<Result<_>>()?;
    Ok(mean(&per))
}

fn truth_of(test: &Dataset) -> Result<&Vec<Vec<f64>>> {
    test.true_probs
        .as_ref()
        .ok_or_else(|| Error::InvalidDataset("test data carry no ground-truth probabilities".into()))
}

/// Scores `n_draws` posterior draws (stream `(seed, Posterior, 0)`) one at a
/// time, so memory stays at one draw's predictions.
pub fn score_posterior(
    state: &VariationalState,
    test: &Dataset,
    kind: ModelKind,
    n_draws: usize,
    seed: u64,
) -> Result<MetricsReport> {
    let start = Instant::now();
    let truth = truth_of(test)?;
    let chosen = test.chosen();
    let mut rmse_per_draw = Vec::with_capacity(n_draws);
    let mut acc = Vec::with_capacity(n_draws);
    for draw in posterior_sampler(state, seed).take(n_draws) {
        let pred = predict_draw(&draw, test, kind)?;
        rmse_per_draw.push(rmse_draw(&pred, truth)?);
        acc.push(accuracy_draw(&pred, &chosen)?);
    }
    Ok(MetricsReport {
        rmse_mean: mean(&rmse_per_draw),
        rmse_per_draw,
        accuracy: mean(&acc),
        n_test: test.len(),
        wall_time_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Scores a single prediction matrix (e.g. simulated mixed logit
/// probabilities) as a one-draw report.
pub fn score_predictions(pred: &DrawPredictions, test: &Dataset) -> Result<MetricsReport> {
    let truth = truth_of(test)?;
    let r = rmse_draw(pred, truth)?;
    Ok(MetricsReport {
        rmse_mean: r,
        rmse_per_draw: vec![r],
        accuracy: accuracy_draw(pred, &test.chosen())?,
        n_test: test.len(),
        wall_time_seconds: 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_predictions_have_zero_rmse() {
        let truth = vec![vec![0.2, 0.8], vec![0.5, 0.5]];
        let pred = vec![truth.clone(), truth.clone()];
        let (per, m) = rmse(&pred, &truth).unwrap();
        assert_eq!(per, vec![0.0, 0.0]);
        assert_eq!(m, 0.0);
    }

    #[test]
    fn single_cell_error() {
        let truth = vec![vec![0.1; 10]; 10];
        let mut pred = truth.clone();
        pred[3][4] += 0.1;
        let r = rmse_draw(&pred, &truth).unwrap();
        assert!((r - 0.01).abs() < 1e-15);
    }

    #[test]
    fn accuracy_rules() {
        let chosen = vec![0, 2, 1];
        let sure: DrawPredictions = chosen
            .iter()
            .map(|&c| {
                let mut r = vec![0.0; 3];
                r[c] = 1.0;
                r
            })
            .collect();
        assert_eq!(accuracy(&[sure], &chosen).unwrap(), 1.0);
        // uniform rows tie-break to product 0
        let uniform = vec![vec![1.0 / 3.0; 3]; 3];
        assert!((accuracy_draw(&uniform, &chosen).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!(accuracy_draw(&uniform, &chosen[..2]).is_err());
    }

    #[test]
    fn shape_mismatches_are_errors() {
        let truth = vec![vec![0.5, 0.5]];
        assert!(rmse_draw(&vec![vec![1.0]], &truth).is_err());
        assert!(rmse_draw(&vec![], &truth).is_err());
    }
}
