//! Interval meshes and structured triangulations of rectangles, together with
//! the facet data (normals, adjacency, facet size function) the LDG operators need.
//!
//! Points are stored as `[f64; 2]`; in one dimension the second coordinate is zero.

use std::collections::HashMap;
use std::fmt;

use crate::error::{invalid, Result};

pub type Point = [f64; 2];

/// A facet shared by two elements. `normal` is the unit normal pointing out of
/// `elements[0]`, and `elements[0] < elements[1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct InteriorFacet {
    pub elements: [usize; 2],
    pub normal: Point,
    pub vertices: [Point; 2],
    /// Length of the facet (1 for a point facet in 1D).
    pub measure: f64,
    /// Facet size `η⁻¹ min(h_K1, h_K2)`.
    pub size: f64,
}

/// A facet on the domain boundary with its outward unit normal.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryFacet {
    pub element: usize,
    pub normal: Point,
    pub vertices: [Point; 2],
    pub measure: f64,
}

#[derive(Clone, Debug)]
pub struct Mesh {
    dim: usize,
    cells: Vec<[Point; 3]>,
    diameters: Vec<f64>,
    measures: Vec<f64>,
    interior: Vec<InteriorFacet>,
    boundary: Vec<BoundaryFacet>,
    eta: f64,
    domain_measure: f64,
}

fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

fn norm(a: Point) -> f64 {
    a[0].hypot(a[1])
}

impl Mesh {
    /// Uniform partition of `[a, b]` into `m` intervals.
    pub fn interval(a: f64, b: f64, m: usize) -> Result<Mesh> {
        if m == 0 {
            return Err(invalid("interval mesh needs at least one element"));
        }
        if !(a < b) || !a.is_finite() || !b.is_finite() {
            return Err(invalid(format!(
                "interval mesh needs a < b, got a = {a}, b = {b}"
            )));
        }
        let h = (b - a) / m as f64;
        let node = |i: usize| if i == m { b } else { a + h * i as f64 };
        let cells: Vec<[Point; 3]> = (0..m)
            .map(|k| [[node(k), 0.0], [node(k + 1), 0.0], [0.0; 2]])
            .collect();
        let interior = (1..m)
            .map(|i| {
                let x = [node(i), 0.0];
                InteriorFacet {
                    elements: [i - 1, i],
                    normal: [1.0, 0.0],
                    vertices: [x, x],
                    measure: 1.0,
                    size: 0.0,
                }
            })
            .collect();
        let boundary = vec![
            BoundaryFacet {
                element: 0,
                normal: [-1.0, 0.0],
                vertices: [[a, 0.0]; 2],
                measure: 1.0,
            },
            BoundaryFacet {
                element: m - 1,
                normal: [1.0, 0.0],
                vertices: [[b, 0.0]; 2],
                measure: 1.0,
            },
        ];
        let measures: Vec<f64> = cells.iter().map(|c| c[1][0] - c[0][0]).collect();
        let mut mesh = Mesh {
            dim: 1,
            diameters: measures.clone(),
            measures,
            cells,
            interior,
            boundary,
            eta: 1.0,
            domain_measure: b - a,
        };
        mesh.set_eta(1.0)?;
        Ok(mesh)
    }

    /// Structured triangulation of the rectangle `[x0, x1] × [y0, y1]` with
    /// `nx × ny` cells, each split along its bottom-left to top-right diagonal.
    ///
    /// Cell `(i, j)` yields elements `2 (j nx + i)` (lower triangle) and
    /// `2 (j nx + i) + 1` (upper triangle).
    pub fn structured_triangles(nx: usize, ny: usize, rect: [f64; 4]) -> Result<Mesh> {
        if nx == 0 || ny == 0 {
            return Err(invalid("structured mesh needs nx, ny >= 1"));
        }
        let [x0, x1, y0, y1] = rect;
        if !(x0 < x1 && y0 < y1) {
            return Err(invalid(format!("degenerate rectangle {rect:?}")));
        }
        let hx = (x1 - x0) / nx as f64;
        let hy = (y1 - y0) / ny as f64;
        let coord = |i: usize, j: usize| -> Point {
            let x = if i == nx { x1 } else { x0 + hx * i as f64 };
            let y = if j == ny { y1 } else { y0 + hy * j as f64 };
            [x, y]
        };
        let vid = |i: usize, j: usize| j * (nx + 1) + i;

        let mut cells = Vec::with_capacity(2 * nx * ny);
        let mut cell_ids = Vec::with_capacity(2 * nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let (a, b, c, d) = ((i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1));
                cells.push([coord(a.0, a.1), coord(b.0, b.1), coord(c.0, c.1)]);
                cell_ids.push([vid(a.0, a.1), vid(b.0, b.1), vid(c.0, c.1)]);
                cells.push([coord(a.0, a.1), coord(c.0, c.1), coord(d.0, d.1)]);
                cell_ids.push([vid(a.0, a.1), vid(c.0, c.1), vid(d.0, d.1)]);
            }
        }

        let mut edges: HashMap<(usize, usize), Vec<(usize, usize)>> = HashMap::new();
        for (e, ids) in cell_ids.iter().enumerate() {
            for k in 0..3 {
                let (p, q) = (ids[k], ids[(k + 1) % 3]);
                edges.entry((p.min(q), p.max(q))).or_default().push((e, k));
            }
        }
        let mut keys: Vec<_> = edges.keys().copied().collect();
        keys.sort_unstable();

        let outward = |e: usize, k: usize| -> (Point, [Point; 2], f64) {
            let c = &cells[e];
            let (p, q, r) = (c[k], c[(k + 1) % 3], c[(k + 2) % 3]);
            let t = sub(q, p);
            let len = norm(t);
            let mut n = [t[1] / len, -t[0] / len];
            let to_r = sub(r, p);
            if n[0] * to_r[0] + n[1] * to_r[1] > 0.0 {
                n = [-n[0], -n[1]];
            }
            (n, [p, q], len)
        };

        let mut interior = Vec::new();
        let mut boundary = Vec::new();
        for key in keys {
            let adj = &edges[&key];
            match adj.as_slice() {
                [(e, k)] => {
                    let (normal, vertices, measure) = outward(*e, *k);
                    boundary.push(BoundaryFacet {
                        element: *e,
                        normal,
                        vertices,
                        measure,
                    });
                }
                [(ea, ka), (eb, kb)] => {
                    let (e0, k0, e1) = if ea < eb {
                        (*ea, *ka, *eb)
                    } else {
                        (*eb, *kb, *ea)
                    };
                    let _ = kb;
                    let (normal, vertices, measure) = outward(e0, k0);
                    interior.push(InteriorFacet {
                        elements: [e0, e1],
                        normal,
                        vertices,
                        measure,
                        size: 0.0,
                    });
                }
                _ => {
                    unreachable!("an edge of a conforming triangulation has one or two neighbours")
                }
            }
        }

        let measures: Vec<f64> = cells
            .iter()
            .map(|c| {
                let (u, v) = (sub(c[1], c[0]), sub(c[2], c[0]));
                0.5 * (u[0] * v[1] - u[1] * v[0]).abs()
            })
            .collect();
        let diameters = cells
            .iter()
            .map(|c| {
                norm(sub(c[1], c[0]))
                    .max(norm(sub(c[2], c[1])))
                    .max(norm(sub(c[0], c[2])))
            })
            .collect();
        let mut mesh = Mesh {
            dim: 2,
            cells,
            diameters,
            measures,
            interior,
            boundary,
            eta: 1.0,
            domain_measure: (x1 - x0) * (y1 - y0),
        };
        mesh.set_eta(1.0)?;
        Ok(mesh)
    }

    /// Set the constant `η > 0` in the facet size `𝗁_F = η⁻¹ min(h_K1, h_K2)`.
    pub fn set_eta(&mut self, eta: f64) -> Result<()> {
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(invalid(format!(
                "facet size constant must be positive, got {eta}"
            )));
        }
        self.eta = eta;
        for f in &mut self.interior {
            let [a, b] = f.elements;
            f.size = self.diameters[a].min(self.diameters[b]) / eta;
        }
        Ok(())
    }

    pub fn with_eta(mut self, eta: f64) -> Result<Mesh> {
        self.set_eta(eta)?;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_elements(&self) -> usize {
        self.cells.len()
    }

    /// The `dim + 1` vertices of element `e`.
    pub fn vertices(&self, e: usize) -> &[Point] {
        &self.cells[e][..=self.dim]
    }

    pub fn diameter(&self, e: usize) -> f64 {
        self.diameters[e]
    }

    pub fn measure(&self, e: usize) -> f64 {
        self.measures[e]
    }

    pub fn interior_facets(&self) -> &[InteriorFacet] {
        &self.interior
    }

    pub fn boundary_facets(&self) -> &[BoundaryFacet] {
        &self.boundary
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// Global mesh size `h = max h_K`.
    pub fn h(&self) -> f64 {
        self.diameters.iter().copied().fold(0.0, f64::max)
    }

    /// Measure of the domain computed from its bounding geometry.
    pub fn domain_measure(&self) -> f64 {
        self.domain_measure
    }

    /// Facet size used on a boundary facet: `η⁻¹ h_K`.
    pub fn boundary_facet_size(&self, f: &BoundaryFacet) -> f64 {
        self.diameters[f.element] / self.eta
    }

    /// Shape-regularity constant `min_K ϱ_K / h_K` with `ϱ_K` the inradius.
    pub fn shape_regularity(&self) -> f64 {
        (0..self.num_elements())
            .map(|e| {
                let rho = if self.dim == 1 {
                    0.5 * self.measures[e]
                } else {
                    let c = &self.cells[e];
                    let per = norm(sub(c[1], c[0])) + norm(sub(c[2], c[1])) + norm(sub(c[0], c[2]));
                    2.0 * self.measures[e] / per
                };
                rho / self.diameters[e]
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Affine map `x = origin + J ξ` from the reference simplex onto element `e`.
    /// In 1D the second row and column of `J` are those of the identity.
    pub fn affine_map(&self, e: usize) -> (Point, [[f64; 2]; 2]) {
        let c = &self.cells[e];
        if self.dim == 1 {
            (c[0], [[c[1][0] - c[0][0], 0.0], [0.0, 1.0]])
        } else {
            let (u, v) = (sub(c[1], c[0]), sub(c[2], c[0]));
            (c[0], [[u[0], v[0]], [u[1], v[1]]])
        }
    }

    /// Element containing `x` (the lowest id when `x` lies on a shared facet).
    pub fn locate(&self, x: Point) -> Option<usize> {
        const TOL: f64 = 1e-12;
        (0..self.num_elements()).find(|&e| {
            let (o, j) = self.affine_map(e);
            let xi = reference_coords(o, j, x);
            if self.dim == 1 {
                xi[0] >= -TOL && xi[0] <= 1.0 + TOL
            } else {
                xi[0] >= -TOL && xi[1] >= -TOL && xi[0] + xi[1] <= 1.0 + TOL
            }
        })
    }
}

/// Inverse of the affine map `x = o + J ξ`.
pub fn reference_coords(o: Point, j: [[f64; 2]; 2], x: Point) -> Point {
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    let d = sub(x, o);
    [
        (j[1][1] * d[0] - j[0][1] * d[1]) / det,
        (-j[1][0] * d[0] + j[0][0] * d[1]) / det,
    ]
}

impl fmt::Display for Mesh {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}D mesh: {} elements, {} interior facets, {} boundary facets, h = {:.4e}, shape regularity = {:.4}",
            self.dim,
            self.num_elements(),
            self.interior.len(),
            self.boundary.len(),
            self.h(),
            self.shape_regularity()
        )
    }
}

/// How the first element `K1` (and hence `n_F`) of each interior facet is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Deserialize, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FluxRule {
    /// Keep the mesh ordering (`K1` is the element with the smaller id) and use the given weight.
    Standard,
    /// `n_F = +1` in 1D and `(1,1)·n_K1 ≤ 0` in 2D, with weight 1.
    Directional,
}

/// Orientation data of one interior facet.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OrientedFacet {
    pub k1: usize,
    pub k2: usize,
    /// Unit normal pointing out of `k1`.
    pub normal: Point,
    /// Weight of the average `⟨v⟩_α = (1 − α) v|K1 + α v|K2`.
    pub alpha: f64,
}

/// Per-facet orientation, indexed like [`Mesh::interior_facets`].
#[derive(Clone, Debug)]
pub struct FluxOrientation {
    pub rule: FluxRule,
    pub facets: Vec<OrientedFacet>,
}

pub fn orient_facets(mesh: &Mesh, rule: FluxRule, alpha: f64) -> Result<FluxOrientation> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(invalid(format!(
            "facet weight must lie in [0, 1], got {alpha}"
        )));
    }
    const TIE: f64 = 1e-12;
    let facets = mesh
        .interior_facets()
        .iter()
        .map(|f| {
            let [a, b] = f.elements;
            let n = f.normal;
            match rule {
                FluxRule::Standard => OrientedFacet {
                    k1: a,
                    k2: b,
                    normal: n,
                    alpha,
                },
                FluxRule::Directional if mesh.dim() == 1 => {
                    // `a` is the left element, so n = +1 already.
                    OrientedFacet {
                        k1: a,
                        k2: b,
                        normal: n,
                        alpha: 1.0,
                    }
                }
                FluxRule::Directional => {
                    // n is the outward normal of `a`; `a < b`, so ties keep `a`.
                    let dot = n[0] + n[1];
                    if dot > TIE {
                        OrientedFacet {
                            k1: b,
                            k2: a,
                            normal: [-n[0], -n[1]],
                            alpha: 1.0,
                        }
                    } else {
                        OrientedFacet {
                            k1: a,
                            k2: b,
                            normal: n,
                            alpha: 1.0,
                        }
                    }
                }
            }
        })
        .collect();
    Ok(FluxOrientation { rule, facets })
}
