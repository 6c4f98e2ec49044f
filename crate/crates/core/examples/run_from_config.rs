//! A complete run from a TOML description.
//!
//! Reads the file given on the command line, or an inline porous-medium
//! example when none is given, then simulates, writes the CSV artifacts and
//! prints the per-run checks. This is what `entropy-ldg run --config` does.
//!
//! ```text
//! cargo run --release --example run_from_config [-- path/to/run.toml]
//! ```

use entropy_ldg::config::RunConfig;
use entropy_ldg::experiments::run_config;

const INLINE: &str = r#"
[model]
name = "porous-medium"
m = 2.0

[mesh]
kind = "interval"
a = 0.0
b = 1.0
cells = 16

[scheme]
degree = 2

[initial]
datum = "pm-exact"

[time]
mode = "adaptive"
tau1 = 1e-3
t_end = 0.5

[output]
dir = "output/run-from-config"
name = "pm"
snapshots = [0.25]
"#;

fn main() -> entropy_ldg::Result<()> {
    let cfg = match std::env::args().nth(1) {
        Some(path) => RunConfig::from_file(path.as_ref())?,
        None => RunConfig::parse(INLINE)?,
    };
    std::fs::create_dir_all(&cfg.output.dir)?;
    let report = run_config(&cfg)?;
    println!("{report}");
    Ok(())
}
