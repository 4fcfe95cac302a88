//! Triangulated 2-D chart domains carrying a Riemannian metric.

pub mod clip;
mod generate;
mod io;
pub mod metric;

use std::collections::HashMap;
use std::sync::Arc;

pub use generate::{generate_domain, DomainKind};
pub use io::{load_mesh, save_mesh, FieldFile, MeshFile};
pub use metric::{Geometry, WarpProfile};

use crate::error::{Error, Result};
use metric::{det2, inverse2, quad_form, STEREOGRAPHIC_CHART_CAP};

/// A conforming P1 triangulation of a chart domain with its metric.
///
/// Densities are stored per vertex; every integral over a triangle uses the
/// centroid value of their linear interpolant, and every integral over a
/// boundary edge uses the mean of its two endpoint length densities.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasuredMesh {
    vertices: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    boundary_edges: Vec<[usize; 2]>,
    density: Vec<f64>,
    boundary_density: Vec<[f64; 2]>,
    geometry: Geometry,
    tri_area: Vec<f64>,
    tri_density: Vec<f64>,
}

impl MeasuredMesh {
    /// Builds and validates a mesh. Missing densities are computed from the
    /// geometry; missing boundary edges are extracted from the triangles.
    pub fn new(
        vertices: Vec<[f64; 2]>,
        triangles: Vec<[usize; 3]>,
        geometry: Geometry,
        density: Option<Vec<f64>>,
        boundary_edges: Option<Vec<[usize; 2]>>,
    ) -> Result<Self> {
        if let Geometry::Warped(w) = &geometry {
            w.validate()?;
        }
        let nv = vertices.len();
        for (i, v) in vertices.iter().enumerate() {
            if !(v[0].is_finite() && v[1].is_finite()) {
                return Err(Error::Invariant {
                    check: "vertex_finite",
                    index: i,
                    detail: format!("{v:?}"),
                });
            }
            if geometry == Geometry::SphereStereographic && v[0].hypot(v[1]) > STEREOGRAPHIC_CHART_CAP {
                return Err(Error::Invariant {
                    check: "stereographic_chart_cap",
                    index: i,
                    detail: format!("chart radius exceeds {STEREOGRAPHIC_CHART_CAP}"),
                });
            }
        }
        if triangles.is_empty() {
            return Err(Error::DegenerateGeometry("mesh has no triangles".into()));
        }
        let mut tri_area = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&i| i >= nv) || tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(Error::Invariant {
                    check: "triangle_indices",
                    index: t,
                    detail: format!("{tri:?}"),
                });
            }
            let a = clip::triangle_area(vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]);
            if !(a > 0.0) {
                return Err(Error::Invariant {
                    check: "triangle_orientation",
                    index: t,
                    detail: format!("chart area {a} is not positive (triangles must be counterclockwise)"),
                });
            }
            tri_area.push(a);
        }
        let density = match density {
            Some(d) => {
                if d.len() != nv {
                    return Err(Error::Invariant {
                        check: "density_length",
                        index: d.len(),
                        detail: format!("expected {nv} densities"),
                    });
                }
                d
            }
            None => vertices.iter().map(|&p| geometry.area_density(p)).collect(),
        };
        for (i, &d) in density.iter().enumerate() {
            if !(d > 0.0 && d.is_finite()) {
                return Err(Error::Invariant {
                    check: "density_positive",
                    index: i,
                    detail: format!("density {d}"),
                });
            }
        }
        let extracted = extract_boundary(&triangles);
        let boundary_edges = match boundary_edges {
            None => extracted,
            Some(given) => {
                check_boundary(&given, &extracted)?;
                given
            }
        };
        check_closed(&boundary_edges, nv)?;
        let tri_density = triangles
            .iter()
            .map(|t| (density[t[0]] + density[t[1]] + density[t[2]]) / 3.0)
            .collect();
        let boundary_density = boundary_edges
            .iter()
            .map(|e| {
                let (a, b) = (vertices[e[0]], vertices[e[1]]);
                let dir = [b[0] - a[0], b[1] - a[1]];
                let len = dir[0].hypot(dir[1]);
                let unit = [dir[0] / len, dir[1] / len];
                [
                    length_density(&geometry, a, density[e[0]], unit),
                    length_density(&geometry, b, density[e[1]], unit),
                ]
            })
            .collect();
        Ok(MeasuredMesh {
            vertices,
            triangles,
            boundary_edges,
            density,
            boundary_density,
            geometry,
            tri_area,
            tri_density,
        })
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary_edges(&self) -> &[[usize; 2]] {
        &self.boundary_edges
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    pub fn boundary_density(&self) -> &[[f64; 2]] {
        &self.boundary_density
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    /// Chart area of triangle `t`.
    pub fn triangle_area(&self, t: usize) -> f64 {
        self.tri_area[t]
    }

    /// Area density used on triangle `t` (centroid value).
    pub fn triangle_density(&self, t: usize) -> f64 {
        self.tri_density[t]
    }

    /// Metric measure of triangle `t`.
    pub fn triangle_measure(&self, t: usize) -> f64 {
        self.tri_area[t] * self.tri_density[t]
    }

    pub fn centroid(&self, t: usize) -> [f64; 2] {
        let [a, b, c] = self.triangles[t].map(|i| self.vertices[i]);
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }

    /// `|Ω|_g`.
    pub fn total_measure(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.triangle_measure(t)).sum()
    }

    pub fn edge_chart_length(&self, e: usize) -> f64 {
        let [a, b] = self.boundary_edges[e].map(|i| self.vertices[i]);
        (b[0] - a[0]).hypot(b[1] - a[1])
    }

    /// Length density used on boundary edge `e` (mean of its endpoint values).
    pub fn edge_density(&self, e: usize) -> f64 {
        let d = self.boundary_density[e];
        0.5 * (d[0] + d[1])
    }

    /// Metric length of boundary edge `e`.
    pub fn edge_measure(&self, e: usize) -> f64 {
        self.edge_chart_length(e) * self.edge_density(e)
    }

    /// `|∂Ω|_g`.
    pub fn boundary_measure(&self) -> f64 {
        (0..self.boundary_edges.len()).map(|e| self.edge_measure(e)).sum()
    }

    /// Longest triangle edge in chart coordinates.
    pub fn max_edge_length(&self) -> f64 {
        self.triangles
            .iter()
            .flat_map(|t| {
                (0..3).map(move |k| {
                    let (a, b) = (self.vertices[t[k]], self.vertices[t[(k + 1) % 3]]);
                    (b[0] - a[0]).hypot(b[1] - a[1])
                })
            })
            .fold(0.0, f64::max)
    }

    /// Longest triangle edge in the metric; the `h` of every tolerance.
    pub fn mesh_size(&self) -> f64 {
        let mut h = 0.0f64;
        for (t, tri) in self.triangles.iter().enumerate() {
            for k in 0..3 {
                let (a, b) = (self.vertices[tri[k]], self.vertices[tri[(k + 1) % 3]]);
                h = h.max(self.segment_length(t, a, b));
            }
        }
        h
    }

    /// Metric tensor used on triangle `t`: `ρ_T I` for conformal charts, the
    /// exact warped tensor at the centroid otherwise.
    pub fn triangle_metric(&self, t: usize) -> [[f64; 2]; 2] {
        if self.geometry.is_conformal() {
            let d = self.tri_density[t];
            [[d, 0.0], [0.0, d]]
        } else {
            self.geometry.tensor(self.centroid(t))
        }
    }

    /// `√det g · g⁻¹` on triangle `t`; the identity for conformal charts.
    pub fn stiffness_tensor(&self, t: usize) -> [[f64; 2]; 2] {
        if self.geometry.is_conformal() {
            return [[1.0, 0.0], [0.0, 1.0]];
        }
        let g = self.triangle_metric(t);
        let s = det2(&g).sqrt();
        let inv = inverse2(&g);
        [[s * inv[0][0], s * inv[0][1]], [s * inv[1][0], s * inv[1][1]]]
    }

    /// Chart gradients of the three barycentric basis functions on `t`.
    pub fn basis_gradients(&self, t: usize) -> [[f64; 2]; 3] {
        let [a, b, c] = self.triangles[t].map(|i| self.vertices[i]);
        let two_a = 2.0 * self.tri_area[t];
        [
            [(b[1] - c[1]) / two_a, (c[0] - b[0]) / two_a],
            [(c[1] - a[1]) / two_a, (a[0] - c[0]) / two_a],
            [(a[1] - b[1]) / two_a, (b[0] - a[0]) / two_a],
        ]
    }

    /// Chart gradient of a P1 field on triangle `t`.
    pub fn gradient(&self, t: usize, values: &[f64]) -> [f64; 2] {
        let g = self.basis_gradients(t);
        let tri = self.triangles[t];
        let mut out = [0.0; 2];
        for k in 0..3 {
            out[0] += values[tri[k]] * g[k][0];
            out[1] += values[tri[k]] * g[k][1];
        }
        out
    }

    /// Metric norm `|∇u|_g` of a chart gradient on triangle `t`.
    pub fn gradient_norm(&self, t: usize, grad: [f64; 2]) -> f64 {
        quad_form(&inverse2(&self.triangle_metric(t)), grad).max(0.0).sqrt()
    }

    /// Metric length of the chart segment `a → b` inside triangle `t`.
    pub fn segment_length(&self, t: usize, a: [f64; 2], b: [f64; 2]) -> f64 {
        quad_form(&self.triangle_metric(t), [b[0] - a[0], b[1] - a[1]]).max(0.0).sqrt()
    }

    /// Flags for vertices lying on the boundary.
    pub fn boundary_vertex_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.vertices.len()];
        for e in &self.boundary_edges {
            mask[e[0]] = true;
            mask[e[1]] = true;
        }
        mask
    }

    /// Triangles touching the boundary (sharing at least one vertex with it).
    pub fn boundary_triangle_mask(&self) -> Vec<bool> {
        let vmask = self.boundary_vertex_mask();
        self.triangles.iter().map(|t| t.iter().any(|&i| vmask[i])).collect()
    }

    /// Splits every triangle into four at its chart edge midpoints. Each
    /// nodal array in `fields` is carried over by linear interpolation, so a
    /// P1 field is reproduced exactly. Densities are recomputed from the
    /// geometry when the current ones agree with it, and interpolated like
    /// the fields otherwise. Curved boundaries are not re-projected.
    pub fn refine_uniform(&self, fields: &[&[f64]]) -> Result<(MeasuredMesh, Vec<Vec<f64>>)> {
        let nv = self.vertices.len();
        for f in fields {
            if f.len() != nv {
                return Err(Error::Mismatch(format!("field has {} values, mesh has {nv} vertices", f.len())));
            }
        }
        let custom_density = self.vertices.iter().zip(&self.density).any(|(&p, &d)| {
            let g = self.geometry.area_density(p);
            (d - g).abs() > 1e-12 * g
        });
        let mut vertices = self.vertices.clone();
        let mut out: Vec<Vec<f64>> = fields.iter().map(|f| f.to_vec()).collect();
        out.push(self.density.clone());
        let mut mid: HashMap<(usize, usize), usize> = HashMap::with_capacity(self.triangles.len() * 2);
        let mut midpoint = |a: usize, b: usize, vertices: &mut Vec<[f64; 2]>, out: &mut Vec<Vec<f64>>| -> usize {
            *mid.entry((a.min(b), a.max(b))).or_insert_with(|| {
                let (p, q) = (vertices[a], vertices[b]);
                vertices.push([0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])]);
                for f in out.iter_mut() {
                    let v = 0.5 * (f[a] + f[b]);
                    f.push(v);
                }
                vertices.len() - 1
            })
        };
        let mut triangles = Vec::with_capacity(4 * self.triangles.len());
        for t in &self.triangles {
            let m = [
                midpoint(t[0], t[1], &mut vertices, &mut out),
                midpoint(t[1], t[2], &mut vertices, &mut out),
                midpoint(t[2], t[0], &mut vertices, &mut out),
            ];
            triangles.push([t[0], m[0], m[2]]);
            triangles.push([m[0], t[1], m[1]]);
            triangles.push([m[2], m[1], t[2]]);
            triangles.push([m[0], m[1], m[2]]);
        }
        let density = out.pop().filter(|_| custom_density);
        let mesh = MeasuredMesh::new(vertices, triangles, self.geometry, density, None)?;
        Ok((mesh, out))
    }
}

fn length_density(geometry: &Geometry, p: [f64; 2], area_density: f64, unit: [f64; 2]) -> f64 {
    if geometry.is_conformal() {
        area_density.sqrt()
    } else {
        quad_form(&geometry.tensor(p), unit).sqrt()
    }
}

fn extract_boundary(triangles: &[[usize; 3]]) -> Vec<[usize; 2]> {
    let mut count: HashMap<(usize, usize), u32> = HashMap::with_capacity(triangles.len() * 3);
    for t in triangles {
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            *count.entry((a.min(b), a.max(b))).or_insert(0) += 1;
        }
    }
    let mut out = Vec::new();
    for t in triangles {
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            if count[&(a.min(b), a.max(b))] == 1 {
                out.push([a, b]);
            }
        }
    }
    out
}

fn check_boundary(given: &[[usize; 2]], extracted: &[[usize; 2]]) -> Result<()> {
    let owned: HashMap<[usize; 2], ()> = extracted.iter().map(|&e| (e, ())).collect();
    let mut seen = HashMap::new();
    for (i, e) in given.iter().enumerate() {
        if !owned.contains_key(e) {
            return Err(Error::Invariant {
                check: "boundary_edge_ownership",
                index: i,
                detail: format!("edge {e:?} is not a consistently oriented edge of exactly one triangle"),
            });
        }
        if seen.insert(*e, ()).is_some() {
            return Err(Error::Invariant {
                check: "boundary_edge_ownership",
                index: i,
                detail: format!("edge {e:?} listed twice"),
            });
        }
    }
    if given.len() != extracted.len() {
        return Err(Error::Invariant {
            check: "boundary_edge_ownership",
            index: given.len(),
            detail: format!("expected {} boundary edges, got {}", extracted.len(), given.len()),
        });
    }
    Ok(())
}

fn check_closed(edges: &[[usize; 2]], nv: usize) -> Result<()> {
    let mut degree = vec![0i64; nv];
    for e in edges {
        degree[e[0]] += 1;
        degree[e[1]] -= 1;
    }
    if let Some(i) = degree.iter().position(|&d| d != 0) {
        return Err(Error::Invariant {
            check: "boundary_closed",
            index: i,
            detail: "boundary edges do not form closed loops".into(),
        });
    }
    if edges.is_empty() {
        return Err(Error::Invariant {
            check: "boundary_closed",
            index: 0,
            detail: "mesh has no boundary".into(),
        });
    }
    Ok(())
}

/// A piecewise-linear field given by its vertex values.
#[derive(Debug, Clone)]
pub struct ScalarField {
    mesh: Arc<MeasuredMesh>,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(mesh: Arc<MeasuredMesh>, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.num_vertices() {
            return Err(Error::Mismatch(format!(
                "field has {} values but the mesh has {} vertices",
                values.len(),
                mesh.num_vertices()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Invariant {
                check: "field_finite",
                index: i,
                detail: format!("value {}", values[i]),
            });
        }
        Ok(ScalarField { mesh, values })
    }

    /// Samples `f(x, y)` at the vertices.
    pub fn from_fn(mesh: Arc<MeasuredMesh>, f: impl Fn([f64; 2]) -> f64) -> Result<Self> {
        let values = mesh.vertices().iter().map(|&p| f(p)).collect();
        ScalarField::new(mesh, values)
    }

    pub fn constant(mesh: Arc<MeasuredMesh>, c: f64) -> Self {
        let n = mesh.num_vertices();
        ScalarField { mesh, values: vec![c; n] }
    }

    pub fn mesh(&self) -> &Arc<MeasuredMesh> {
        &self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn same_mesh(&self, other: &ScalarField) -> bool {
        Arc::ptr_eq(&self.mesh, &other.mesh) || *self.mesh == *other.mesh
    }

    /// `∫ f dV_g`.
    pub fn integral(&self) -> f64 {
        let m = &self.mesh;
        (0..m.triangles().len())
            .map(|t| {
                let tri = m.triangles()[t];
                m.triangle_measure(t) * (self.values[tri[0]] + self.values[tri[1]] + self.values[tri[2]]) / 3.0
            })
            .sum()
    }

    /// `∫ |f|^p dV_g` for integer `p`, exact for the P1 field.
    pub fn power_integral(&self, p: u32) -> f64 {
        let m = &self.mesh;
        let mut total = 0.0;
        for (t, tri) in m.triangles().iter().enumerate() {
            let poly: Vec<clip::ClipVertex<1>> = tri
                .iter()
                .map(|&i| clip::ClipVertex { p: m.vertices()[i], a: [self.values[i]] })
                .collect();
            let s: f64 = clip::split_by_sign(poly, 0)
                .iter()
                .map(|piece| clip::polygon_power_integral(piece, 0, p))
                .sum();
            total += m.triangle_density(t) * s;
        }
        total
    }

    /// `‖f‖_{L^p}` for integer `p ≥ 1`.
    pub fn lp_norm(&self, p: u32) -> f64 {
        self.power_integral(p).powf(1.0 / p as f64)
    }

    /// `∫_{∂Ω} f dμ_g`.
    pub fn boundary_integral(&self) -> f64 {
        let m = &self.mesh;
        m.boundary_edges()
            .iter()
            .enumerate()
            .map(|(e, ed)| m.edge_measure(e) * 0.5 * (self.values[ed[0]] + self.values[ed[1]]))
            .sum()
    }

    /// Linear interpolation at a chart point (None outside the mesh).
    pub fn interpolate(&self, p: [f64; 2]) -> Option<f64> {
        let m = &self.mesh;
        for (t, tri) in m.triangles().iter().enumerate() {
            let [a, b, c] = tri.map(|i| m.vertices()[i]);
            let area = m.triangle_area(t);
            let l0 = clip::triangle_area(p, b, c) / area;
            let l1 = clip::triangle_area(a, p, c) / area;
            let l2 = 1.0 - l0 - l1;
            if l0 >= -1e-12 && l1 >= -1e-12 && l2 >= -1e-12 {
                return Some(l0 * self.values[tri[0]] + l1 * self.values[tri[1]] + l2 * self.values[tri[2]]);
            }
        }
        None
    }
}
