//! Porous-medium h-convergence against the exact self-similar solution.
//!
//! Degrees 1 and 2 on 8 to 64 cells, `τ = h^{p+1}`, `T = 1`, Neumann data taken
//! from the exact solution. Prints the error table with observed rates and
//! writes it, plus per-run diagnostics, to `output/pm-convergence/`.
//!
//! ```text
//! cargo run --release --example pm_convergence
//! ```

use std::path::Path;

use entropy_ldg::experiments::pm_convergence;

fn main() -> entropy_ldg::Result<()> {
    let dir = Path::new("output/pm-convergence");
    std::fs::create_dir_all(dir)?;
    let report = pm_convergence(Some(dir))?;
    println!("{report}");
    std::process::exit(if report.passed() { 0 } else { 1 });
}
