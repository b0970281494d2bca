//! Fits the dynamic factor model by variational inference on a simulated
//! panel and scores the held-out trips.

use factor_demand::eval::metrics::score_posterior;
use factor_demand::eval::{split_dataset, SplitSpec};
use factor_demand::vi::{fit, FitConfig};
use factor_demand::{simulate, Dims, ModelKind, SimConfig};

fn main() -> factor_demand::Result<()> {
    let sim = simulate(&SimConfig::new(Dims::uniform(40, 10, 10, 5, 5)?, 3))?;
    let (train, test) = split_dataset(&sim.dataset, &SplitSpec::default(), 3)?;
    println!("{} training and {} test observations", train.len(), test.len());

    let config = FitConfig::new(ModelKind::Dynamic, 5, 3);
    let result = fit(&train, &config)?;
    println!(
        "{} iterations, converged {}, final ELBO {:.1}, {:.1}s",
        result.iterations_run,
        result.converged,
        result.elbo_trace.last().copied().unwrap_or(f64::NAN),
        result.wall_time_seconds
    );

    let metrics = score_posterior(&result.state, &test, ModelKind::Dynamic, 1000, 3)?;
    println!("test RMSE {:.4}, accuracy {:.4}", metrics.rmse_mean, metrics.accuracy);
    Ok(())
}
