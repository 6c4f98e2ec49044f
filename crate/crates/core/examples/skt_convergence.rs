//! SKT cross-diffusion on the unit square with a manufactured solution.
//!
//! Linear elements on structured meshes with 4, 8 and 16 cells per side,
//! `τ = h²`, `T = 0.5`. The source is the residual of the exact solution.
//! Prints errors and rates for both species.
//!
//! ```text
//! cargo run --release --example skt_convergence
//! ```

use std::path::Path;

use entropy_ldg::experiments::skt_convergence;

fn main() -> entropy_ldg::Result<()> {
    let dir = Path::new("output/skt-convergence");
    std::fs::create_dir_all(dir)?;
    let report = skt_convergence(Some(dir))?;
    println!("{report}");
    std::process::exit(if report.passed() { 0 } else { 1 });
}
