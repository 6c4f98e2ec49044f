//! Sampling and exporting the density field.
//!
//! Projects a smooth entropy variable onto a triangular mesh, writes `u(w_h)`
//! at the quadrature points and on a uniform sub-lattice, and reads one file
//! back to compare with direct evaluation.
//!
//! ```text
//! cargo run --example field_export
//! ```

use std::path::Path;

use entropy_ldg::dgspace::DgSpace;
use entropy_ldg::mesh::Mesh;
use entropy_ldg::models::ModelSpec;
use entropy_ldg::output::{emit_field, read_field, sample_field, Sampling};

fn main() -> entropy_ldg::Result<()> {
    let model = ModelSpec::mixture(&[1.0, 2.0])?;
    let space = DgSpace::new(Mesh::structured_triangles(4, 4, [0.0, 1.0, 0.0, 1.0])?, 2, 2)?;
    let w = space.l2_project(|x, o| {
        o[0] = (6.0 * x[0]).sin() - 1.0;
        o[1] = 2.0 * x[0] * x[1] - 1.5;
    })?;

    let dir = Path::new("output/field-export");
    std::fs::create_dir_all(dir)?;
    for (name, sampling) in [("quadrature.csv", Sampling::Quadrature), ("lattice.csv", Sampling::Uniform(4))] {
        let path = dir.join(name);
        emit_field(&space, &model, &w, &path, sampling)?;
        println!("wrote {} ({} rows)", path.display(), read_field(&path)?.len());
    }

    let back = read_field(&dir.join("quadrature.csv"))?;
    let direct = sample_field(&space, &model, &w, Sampling::Quadrature)?;
    let err = back.iter().zip(&direct).map(|(a, b)| (a.value - b.value).abs()).fold(0.0, f64::max);
    println!("max |file − direct| = {err:.2e}");
    Ok(())
}
