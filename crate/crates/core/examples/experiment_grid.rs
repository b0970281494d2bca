//! Runs a simulation grid from a TOML file and prints the summary table.
//! The bundled `grid.toml` compares all three models at two category counts.
//!
//! ```text
//! cargo run --release --example experiment_grid -- [grid.toml] [parallel]
//! ```

use std::path::PathBuf;

use factor_demand::eval::{run_experiment, ExperimentConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let path = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("examples/grid.toml"));
    let parallel: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(2);
    let config: ExperimentConfig = toml::from_str(&std::fs::read_to_string(&path)?)?;
    let out = run_experiment(&config, parallel)?;

    println!("{:<10} {:>4} {:<12} {:>8} {:>8} {:>9}", "setting", "C", "model", "rmse", "acc", "obs");
    for row in &out.summary {
        println!(
            "{:<10} {:>4} {:<12} {:>8.4} {:>8.4} {:>9.0}",
            row.name,
            row.n_categories,
            row.model.as_str(),
            row.rmse_mean.unwrap_or(f64::NAN),
            row.accuracy_mean.unwrap_or(f64::NAN),
            row.n_train_mean.unwrap_or(f64::NAN)
        );
    }
    for w in &out.warnings {
        eprintln!("warning: {w}");
    }
    Ok(())
}
