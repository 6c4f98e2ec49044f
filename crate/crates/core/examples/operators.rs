//! The linear building blocks on the smallest interesting mesh.
//!
//! Two cells `[0, 0.5]`, `[0.5, 1]`, piecewise constants, upwind-type flux
//! (`α = 1`). Prints the mass, gradient, stability and regularization matrices,
//! which are small enough to check by hand, and then the lifted DG gradient of
//! a step function.
//!
//! ```text
//! cargo run --example operators
//! ```

use entropy_ldg::assembly::{
    assemble_gradient, assemble_mass, assemble_regularization, assemble_stability, RegularizationKind,
};
use entropy_ldg::dgspace::{dg_gradient, CoeffVec, DgSpace};
use entropy_ldg::linalg::sparse::to_dense;
use entropy_ldg::mesh::{orient_facets, FluxRule, Mesh};
use entropy_ldg::models::ModelSpec;

fn main() -> entropy_ldg::Result<()> {
    let space = DgSpace::new(Mesh::interval(0.0, 1.0, 2)?, 0, 1)?;
    let orient = orient_facets(space.mesh(), FluxRule::Directional, 1.0)?;
    let model = ModelSpec::porous_medium(2.0)?;

    println!("M (mass) ={}", to_dense(&assemble_mass(&space)));
    println!("B (gradient) ={}", to_dense(&assemble_gradient(&space, &orient)));
    let (s, eta) = assemble_stability(&space, model.a_sup)?;
    println!("eta_F = {eta:?}");
    println!("S (jump stabilization) ={}", to_dense(&s));
    let c = assemble_regularization(&space, &orient, RegularizationKind::H1)?;
    println!("C (H1-type regularization) ={}", to_dense(&c));

    // A unit step: the broken gradient vanishes, so ∇_DG = −L is carried by the jump.
    let w = CoeffVec::new(vec![1.0, 0.0], 1)?;
    let g = dg_gradient(&space, &w, &orient);
    println!("step (1, 0): DG gradient {:?}, lifting {:?}", g.gradient, g.lifting);
    Ok(())
}
