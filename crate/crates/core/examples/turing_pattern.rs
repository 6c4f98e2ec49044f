//! Turing pattern formation in the SKT system.
//!
//! Starts from the equilibrium (2, 0.5) perturbed by two bumps in ρ₁ and runs
//! the adaptive stepper to `T` (default 10). Progress goes to stderr; snapshots
//! and per-step rows go to `output/turing/`.
//!
//! ```text
//! cargo run --release --example turing_pattern [T]
//! ```

use std::path::Path;
use std::time::Instant;

use entropy_ldg::experiments::{simulate, turing_config, write_outputs, Setup};
use entropy_ldg::stepper::RunState;

fn main() -> entropy_ldg::Result<()> {
    let t_end: f64 = std::env::args()
        .nth(1)
        .map(|s| s.parse().expect("T must be a number"))
        .unwrap_or(10.0);
    let mut cfg = turing_config();
    cfg.time.t_end = t_end;
    cfg.output.snapshots.retain(|&t| t <= t_end);
    let setup = Setup::new(&cfg)?;
    let w0 = RunState::initial(&setup.disc()?, &setup.init)?.w;
    let (_, var0) = setup.density_statistics(&w0, 0);
    println!("dofs {}  C_f = {:.1}  initial var(rho_1) = {var0:.3e}", setup.space.len(), setup.model.c_f);

    let start = Instant::now();
    let mut next_report = 0.0;
    let outcome = simulate(&setup, &mut |s, r| {
        if s.t >= next_report {
            eprintln!(
                "t = {:>8.4}  tau = {:.2e}  newton {:>2}  min rho = {:.4} {:.4}  [{:.0?}]",
                s.t,
                r.tau,
                r.newton_iters,
                r.min_u[0],
                r.min_u[1],
                start.elapsed()
            );
            next_report = s.t + t_end / 50.0;
        }
    })?;

    let (mean, var) = setup.density_statistics(&outcome.state.w, 0);
    let steps = outcome.steps();
    let min_rho = steps.iter().map(|r| r.min_u[0]).fold(f64::INFINITY, f64::min);
    println!(
        "reached t = {}  in {} steps ({:.1?})",
        outcome.state.t,
        steps.len(),
        start.elapsed()
    );
    println!("rho_1: mean {mean:.4}  variance {var:.3e}  ({:.1}x initial)  min {min_rho:.4}", var / var0);

    let dir = Path::new("output/turing");
    std::fs::create_dir_all(dir)?;
    for f in write_outputs(&setup, &outcome, dir)? {
        println!("wrote {}", f.display());
    }
    Ok(())
}
