//! CSV artifacts: sampled density fields, per-step rows and small tables.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::dgspace::{CoeffVec, DgSpace};
use crate::diagnostics::StepDiagnostics;
use crate::error::{invalid, Error, Result};
use crate::mesh::Point;
use crate::models::ModelSpec;

/// Where a field is sampled inside each element.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sampling {
    /// The volume quadrature points of the scheme.
    Quadrature,
    /// The equispaced lattice with `k` subdivisions per reference edge.
    Uniform(usize),
}

/// One sampled value `u_i(w_h(x))`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FieldSample {
    pub element: usize,
    pub x: Point,
    /// Zero-based species index (the file stores it one-based).
    pub species: usize,
    pub value: f64,
}

fn reference_points(space: &DgSpace, sampling: Sampling) -> Result<Vec<Point>> {
    match sampling {
        Sampling::Quadrature => Ok((0..space.num_volume_points())
            .map(|q| space.volume_ref_point(q))
            .collect()),
        Sampling::Uniform(0) => Err(invalid("uniform sampling needs at least one subdivision")),
        Sampling::Uniform(k) => {
            let s = 1.0 / k as f64;
            Ok(if space.dim() == 1 {
                (0..=k).map(|i| [i as f64 * s, 0.0]).collect()
            } else {
                (0..=k)
                    .flat_map(|j| (0..=k - j).map(move |i| [i as f64 * s, j as f64 * s]))
                    .collect()
            })
        }
    }
}

/// Densities `u(w_h)` at the sample points, element by element.
pub fn sample_field(
    space: &DgSpace,
    model: &ModelSpec,
    w: &[f64],
    sampling: Sampling,
) -> Result<Vec<FieldSample>> {
    let nsp = space.species();
    let cv = CoeffVec::new(w.to_vec(), nsp)?;
    if cv.len() != space.len() {
        return Err(invalid("coefficient vector does not match the space"));
    }
    let refs = reference_points(space, sampling)?;
    let mut rho = vec![0.0; nsp];
    let mut out = Vec::with_capacity(space.num_elements() * refs.len() * nsp);
    for e in 0..space.num_elements() {
        let g = space.geometry(e);
        for xi in &refs {
            let wv = space.eval_field(&cv, e, *xi)?;
            model.u(&wv, &mut rho);
            let x = g.to_physical(*xi);
            for (i, v) in rho.iter().enumerate() {
                out.push(FieldSample {
                    element: e,
                    x,
                    species: i,
                    value: *v,
                });
            }
        }
    }
    Ok(out)
}

/// Write `u(w_h)` as `element,x[,y],species,value` rows in a fixed order.
pub fn emit_field(
    space: &DgSpace,
    model: &ModelSpec,
    w: &[f64],
    path: &Path,
    sampling: Sampling,
) -> Result<()> {
    let samples = sample_field(space, model, w, sampling)?;
    let mut f = BufWriter::new(File::create(path)?);
    let two_d = space.dim() == 2;
    writeln!(
        f,
        "{}",
        if two_d {
            "element,x,y,species,value"
        } else {
            "element,x,species,value"
        }
    )?;
    for s in &samples {
        if two_d {
            writeln!(
                f,
                "{},{:.16e},{:.16e},{},{:.16e}",
                s.element,
                s.x[0],
                s.x[1],
                s.species + 1,
                s.value
            )?;
        } else {
            writeln!(
                f,
                "{},{:.16e},{},{:.16e}",
                s.element,
                s.x[0],
                s.species + 1,
                s.value
            )?;
        }
    }
    f.flush()?;
    Ok(())
}

/// Read a file written by [`emit_field`].
pub fn read_field(path: &Path) -> Result<Vec<FieldSample>> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines();
    let header = lines
        .next()
        .ok_or_else(|| invalid(format!("{} is empty", path.display())))??;
    let two_d = match header.trim() {
        "element,x,y,species,value" => true,
        "element,x,species,value" => false,
        other => return Err(invalid(format!("unexpected field header {other:?}"))),
    };
    let bad = |n: usize| Error::InvalidArgument(format!("malformed line {n} in {}", path.display()));
    let mut out = Vec::new();
    for (n, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != if two_d { 5 } else { 4 } {
            return Err(bad(n + 2));
        }
        let num = |k: usize| cols[k].trim().parse::<f64>().map_err(|_| bad(n + 2));
        let int = |k: usize| cols[k].trim().parse::<usize>().map_err(|_| bad(n + 2));
        let (x, s, v) = if two_d {
            ([num(1)?, num(2)?], int(3)?, num(4)?)
        } else {
            ([num(1)?, 0.0], int(2)?, num(3)?)
        };
        if s == 0 {
            return Err(bad(n + 2));
        }
        out.push(FieldSample {
            element: int(0)?,
            x,
            species: s - 1,
            value: v,
        });
    }
    Ok(out)
}

/// Per-step diagnostics with the fixed header.
pub fn write_steps(path: &Path, species: usize, rows: &[StepDiagnostics]) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    writeln!(f, "{}", StepDiagnostics::csv_header(species))?;
    for r in rows {
        writeln!(f, "{}", r.csv_row())?;
    }
    f.flush()?;
    Ok(())
}

/// A small CSV table; floats are written by the caller.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    writeln!(f, "{}", header.join(","))?;
    for r in rows {
        if r.len() != header.len() {
            return Err(invalid(format!(
                "row has {} columns, header {}",
                r.len(),
                header.len()
            )));
        }
        writeln!(f, "{}", r.join(","))?;
    }
    f.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Mesh;

    fn tmp(name: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join(format!("entropy-ldg-output-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        dir.join(name)
    }

    #[test]
    fn constant_field_gives_constant_column() {
        let model = ModelSpec::porous_medium(2.0).unwrap();
        let space = DgSpace::new(Mesh::interval(0.0, 1.0, 3).unwrap(), 2, 1).unwrap();
        let w = space.constant(&[0.0]);
        let path = tmp("const.csv");
        emit_field(&space, &model, &w, &path, Sampling::Uniform(3)).unwrap();
        let back = read_field(&path).unwrap();
        assert_eq!(back.len(), 3 * 4);
        assert!(back.iter().all(|s| (s.value - 0.5).abs() < 1e-15));
    }

    #[test]
    fn round_trip_matches_pointwise_evaluation() {
        let model = ModelSpec::mixture(&[1.0, 2.0]).unwrap();
        let space =
            DgSpace::new(Mesh::structured_triangles(2, 2, [0.0, 1.0, 0.0, 1.0]).unwrap(), 2, 2).unwrap();
        let w = space
            .l2_project(|x, out| {
                out[0] = (3.0 * x[0]).sin() - 1.0;
                out[1] = x[1] * x[0] - 2.0;
            })
            .unwrap();
        let path = tmp("tri.csv");
        emit_field(&space, &model, &w, &path, Sampling::Quadrature).unwrap();
        let back = read_field(&path).unwrap();
        let mut rho = [0.0; 2];
        for s in back {
            let g = space.geometry(s.element);
            let xi = crate::mesh::reference_coords(g.origin, g.jac, s.x);
            let wv = space.eval_field(&w, s.element, xi).unwrap();
            model.u(&wv, &mut rho);
            assert!((rho[s.species] - s.value).abs() < 1e-12);
        }
    }

    #[test]
    fn output_is_deterministic() {
        let model = ModelSpec::porous_medium(1.5).unwrap();
        let space = DgSpace::new(Mesh::interval(-1.0, 1.0, 4).unwrap(), 1, 1).unwrap();
        let w = space.l2_project(|x, o| o[0] = x[0]).unwrap();
        let (a, b) = (tmp("d1.csv"), tmp("d2.csv"));
        emit_field(&space, &model, &w, &a, Sampling::Uniform(5)).unwrap();
        emit_field(&space, &model, &w, &b, Sampling::Uniform(5)).unwrap();
        assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
    }
}
