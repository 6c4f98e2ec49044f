//! Waiting time of the porous-medium equation and mass drift under regularization.
//!
//! The datum `sin²(x)` on `[0, π]`, zero elsewhere in `(−π/4, 5π/4)`, meets
//! the vacuum at `x = 0` with zero slope. The support should not move there
//! before `t* = 1/12` (for `m = 2`). The example prints `u_h(0, t)` and
//! when it first leaves zero.
//!
//! ```text
//! cargo run --release --example waiting_time
//! ```

use entropy_ldg::experiments::{
    mass_drift_study, waiting_time, waiting_time_checks, waiting_time_config, waiting_time_series, Setup,
};

fn main() -> entropy_ldg::Result<()> {
    let t_star = waiting_time(2.0);
    let setup = Setup::new(&waiting_time_config(1e-6))?;
    let (outcome, series) = waiting_time_series(&setup)?;
    println!("t* = {t_star:.6}, {} steps", outcome.steps().len());
    println!("     t      u_h(0,t)");
    for (t, u) in series.iter().step_by(10) {
        println!("{t:>6.3}  {u:>12.4e}");
    }
    for c in waiting_time_checks(&series, t_star) {
        println!("{c}");
    }

    println!("\nmass drift against the regularization weight");
    let (rows, checks, _) = mass_drift_study(&[1e-3, 1e-4, 1e-5], None)?;
    for r in &rows {
        println!("eps {:>7.0e}  max drift {:.3e}  bound {:.3e}", r.eps, r.drift, r.bound);
    }
    for c in checks.iter().filter(|c| c.name.contains("drift")) {
        println!("{c}");
    }
    Ok(())
}
