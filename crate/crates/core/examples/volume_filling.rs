//! Volume-filling models: a weighted multi-species mixture and tumor growth.
//!
//! Both live on the simplex `{ρᵢ > 0, Σρᵢ < 1}`. Each run starts from a
//! perturbed constant state on the unit square and reports entropy, mass and
//! the extreme densities, which stay strictly inside the simplex.
//!
//! ```text
//! cargo run --release --example volume_filling
//! ```

use entropy_ldg::experiments::{mixture_demo_config, simulate, standard_checks, tumor_demo_config, Setup};

fn main() -> entropy_ldg::Result<()> {
    for cfg in [mixture_demo_config(), tumor_demo_config()] {
        let setup = Setup::new(&cfg)?;
        let outcome = simulate(&setup, &mut |_, _| {})?;
        let last = outcome.rows.last().expect("initial row");
        println!("{} ({} species, gamma = {:.3})", setup.model.name(), setup.model.species, setup.model.gamma);
        println!("  entropy {:.6} -> {:.6}", setup.init.entropy, last.entropy);
        println!("  mass    {:?} -> {:?}", setup.init.mass, last.mass);
        let lo = outcome.rows.iter().flat_map(|r| r.min_u.iter().copied()).fold(f64::INFINITY, f64::min);
        let hi = outcome.rows.iter().flat_map(|r| r.max_u.iter().copied()).fold(0.0, f64::max);
        println!("  densities within [{lo:.4}, {hi:.4}] over {} steps", outcome.steps().len());
        for c in standard_checks(setup.model.name(), &setup, &outcome) {
            println!("  {c}");
        }
    }
    Ok(())
}
