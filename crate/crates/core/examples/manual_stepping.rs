//! Driving the stepper directly, without a run configuration.
//!
//! Builds mesh, space, operators and discretization by hand for a porous-medium
//! problem with exponent 3/2 and a compactly supported datum, then advances it
//! with the adaptive backward-Euler driver. Diagnostics go to stdout as CSV.
//!
//! ```text
//! cargo run --release --example manual_stepping
//! ```

use entropy_ldg::assembly::{OperatorSet, RegularizationKind};
use entropy_ldg::dgspace::DgSpace;
use entropy_ldg::diagnostics::{CsvSink, InitialData};
use entropy_ldg::mesh::{orient_facets, FluxRule, Mesh};
use entropy_ldg::models::ModelSpec;
use entropy_ldg::stepper::{run_adaptive, AdaptiveConfig, JacobianRefresh, NewtonConfig, Problem, RunState};
use entropy_ldg::system::Discretization;

fn main() -> entropy_ldg::Result<()> {
    let model = ModelSpec::porous_medium(1.5)?;
    let space = DgSpace::new(Mesh::interval(-1.0, 1.0, 40)?, 2, 1)?;
    let orient = orient_facets(space.mesh(), FluxRule::Directional, 1.0)?;
    let ops = OperatorSet::new(&space, &model, &orient, RegularizationKind::H1)?;
    let disc = Discretization::new(&space, &ops, &model)?;

    // a plateau of height 0.8 on |x| < 0.3, zero outside
    let init = InitialData::new(&space, &model, |x, o| {
        o[0] = if x[0].abs() < 0.3 { 0.8 } else { 0.0 };
    })?;
    let problem = Problem {
        disc,
        eps: 1e-5,
        // the datum touches the vacuum, so the Jacobian is rebuilt at every iterate
        newton: NewtonConfig {
            tol: 1e-8,
            s_max: 100,
            refresh: JacobianRefresh::PerIteration,
            ..NewtonConfig::default()
        },
        forcing: None,
    };
    let mut state = RunState::initial(&problem.disc, &init)?;

    let mut sink = CsvSink::new(std::io::stdout().lock(), 1)?;
    let mut every = 0usize;
    let (rows, summary) = run_adaptive(&problem, &mut state, &AdaptiveConfig::new(1e-4), 0.05, &mut |_, r| {
        every += 1;
        if every % 10 == 1 {
            sink.write(r).expect("stdout");
        }
    })?;
    eprintln!(
        "{} accepted, {} rejected steps; entropy {:.6} -> {:.6}; mass {:.12} -> {:.12}",
        summary.accepted.len(),
        summary.rejected.len(),
        init.entropy,
        state.entropy,
        init.mass[0],
        rows.last().map_or(f64::NAN, |r| r.mass[0]),
    );
    Ok(())
}
