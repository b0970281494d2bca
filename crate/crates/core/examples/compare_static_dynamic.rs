//! Fits the static and the dynamic factor model to the same inertia data
//! and compares their held-out probability error over a few replications.

use factor_demand::eval::experiment::run_factor_model;
use factor_demand::eval::{split_dataset, SplitSpec};
use factor_demand::vi::FitConfig;
use factor_demand::{simulate, Dims, ModelKind, SimConfig};

fn main() -> factor_demand::Result<()> {
    let template = FitConfig::new(ModelKind::Dynamic, 5, 0);
    println!("seed  dynamic  static");
    for seed in 1..=3 {
        let sim = simulate(&SimConfig::new(Dims::uniform(40, 10, 10, 20, 5)?, seed))?;
        let (train, test) = split_dataset(&sim.dataset, &SplitSpec::default(), seed)?;
        let dynamic = run_factor_model(ModelKind::Dynamic, &train, &test, &template, 5, 1000, seed)?;
        let stat = run_factor_model(ModelKind::Static, &train, &test, &template, 5, 1000, seed)?;
        println!("{seed:>4}  {:.4}   {:.4}", dynamic.metrics.rmse_mean, stat.metrics.rmse_mean);
    }
    Ok(())
}
