//! Repurchase versus switching rates by category, with and without inertia
//! in the data-generating process.

use factor_demand::dgp::repurchase_diagnostics;
use factor_demand::{simulate, Dims, SimConfig};

fn main() -> factor_demand::Result<()> {
    let dims = Dims::uniform(200, 5, 10, 20, 5)?;
    let with = simulate(&SimConfig::new(dims.clone(), 9))?;
    let without = simulate(&SimConfig::new(dims, 9).without_inertia())?;
    println!("category  repurchase (inertia)  repurchase (none)  switch to each other (inertia)");
    for (a, b) in repurchase_diagnostics(&with.dataset).iter().zip(repurchase_diagnostics(&without.dataset)) {
        println!(
            "{:>8}  {:>20.3}  {:>17.3}  {:>30.3}",
            a.category + 1,
            a.repurchase.unwrap_or(f64::NAN),
            b.repurchase.unwrap_or(f64::NAN),
            a.switch_each.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
