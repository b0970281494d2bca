//! Simulates a small shopping panel with inertia and writes it to disk as
//! CSV plus a JSON sidecar holding the dimensions and true parameters.
//!
//! ```text
//! cargo run --example simulate_panel -- [out_dir]
//! ```

use std::path::PathBuf;

use factor_demand::io::save_dataset;
use factor_demand::{simulate, validate_dataset, Dims, SimConfig};

fn main() -> factor_demand::Result<()> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("factor-demand-panel"));
    let dims = Dims::uniform(40, 10, 10, 5, 5)?;
    let sim = simulate(&SimConfig::new(dims, 1))?;
    let report = validate_dataset(&sim.dataset);
    println!("{} observations, valid: {}", sim.dataset.len(), report.is_ok());

    let first = &sim.dataset.observations[0];
    println!(
        "first row: consumer {} trip {} category {} chose {} of {} at prices {:?}",
        first.consumer,
        first.trip,
        first.category,
        first.chosen,
        first.prices.len(),
        first.prices.iter().map(|p| (p * 100.0).round() / 100.0).collect::<Vec<_>>()
    );

    save_dataset(&sim.dataset, Some(1), Some(&sim.params), &out, "dataset")?;
    println!("wrote {}", out.join("dataset.csv").display());
    Ok(())
}
