//! Posterior own-price elasticities with 95% credible intervals, set against
//! the elasticities implied by the true parameters.

use factor_demand::eval::own_price_elasticities;
use factor_demand::vi::{fit, posterior_sampler, FitConfig};
use factor_demand::{simulate, Dims, ModelKind, SimConfig};

fn main() -> factor_demand::Result<()> {
    let sim = simulate(&SimConfig::new(Dims::uniform(40, 2, 5, 20, 5)?, 5))?;
    let result = fit(&sim.dataset, &FitConfig::new(ModelKind::Dynamic, 5, 5))?;
    let posterior = own_price_elasticities(posterior_sampler(&result.state, 5).take(2000), &sim.dataset, ModelKind::Dynamic)?;
    let truth = own_price_elasticities([&sim.params], &sim.dataset, ModelKind::Dynamic)?;

    println!("category product     truth      mean   [2.5%, 97.5%]");
    for (row, t) in posterior.rows.iter().zip(&truth.rows) {
        println!(
            "{:>8} {:>7} {:>9.3} {:>9.3}   [{:.3}, {:.3}]",
            row.category + 1,
            row.product + 1,
            t.mean,
            row.mean,
            row.q025,
            row.q975
        );
    }
    Ok(())
}
