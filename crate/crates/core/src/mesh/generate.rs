//! Structured and ear-clipping triangulations of the test domains.

use std::collections::HashMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::clip::triangle_area;
use super::metric::Geometry;
use super::MeasuredMesh;
use crate::error::{Error, Result};

/// Domain catalog. All domains are centred at the chart origin except
/// polygons, which are used as given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DomainKind {
    /// Disk of chart radius `radius`.
    Disk { radius: f64 },
    /// Axis-aligned square of side `side`.
    Square { side: f64 },
    /// Simple polygon, vertices in either orientation.
    Polygon { points: Vec<[f64; 2]> },
    /// Geodesic cap of angular radius `theta` on the unit sphere
    /// (a chart disk of radius `tan(theta/2)`).
    SphericalCap { theta: f64 },
    /// `{r_inner < r < r_outer, 0 < φ < angle}` with `angle < 2π`.
    AnnulusSector { r_inner: f64, r_outer: f64, angle: f64 },
}

/// Triangulates a catalog domain with chart edge lengths at most `target_h`.
pub fn generate_domain(kind: &DomainKind, target_h: f64, geometry: Geometry) -> Result<MeasuredMesh> {
    if !(target_h > 0.0 && target_h.is_finite()) {
        return Err(Error::DegenerateGeometry(format!("target_h must be positive, got {target_h}")));
    }
    let (vertices, triangles) = match kind {
        DomainKind::Disk { radius } => {
            positive("disk radius", *radius)?;
            disk(*radius, target_h)
        }
        DomainKind::Square { side } => {
            positive("square side", *side)?;
            square(*side, target_h)
        }
        DomainKind::SphericalCap { theta } => {
            if !(*theta > 0.0 && *theta < PI) {
                return Err(Error::DegenerateGeometry(format!("cap angle {theta} outside (0, π)")));
            }
            if geometry != Geometry::SphereStereographic {
                return Err(Error::DegenerateGeometry(
                    "spherical caps require the sphere_stereographic geometry".into(),
                ));
            }
            // the metric stretches chart lengths by up to 2 near the pole, so rings are denser
            disk((0.5 * theta).tan(), target_h / 1.4)
        }
        DomainKind::AnnulusSector { r_inner, r_outer, angle } => {
            if !(*r_inner > 0.0 && r_outer > r_inner && *angle > 0.0 && *angle < 2.0 * PI) {
                return Err(Error::DegenerateGeometry(format!(
                    "annulus sector needs 0 < r_inner < r_outer and 0 < angle < 2π, got ({r_inner}, {r_outer}, {angle})"
                )));
            }
            annulus_sector(*r_inner, *r_outer, *angle, target_h)
        }
        DomainKind::Polygon { points } => polygon(points, target_h)?,
    };
    MeasuredMesh::new(vertices, triangles, geometry, None, None)
}

fn positive(what: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::DegenerateGeometry(format!("{what} must be positive, got {v}")));
    }
    Ok(())
}

type Tri = (Vec<[f64; 2]>, Vec<[usize; 3]>);

/// Concentric rings: ring `k` of radius `kR/m` carries `6k` points; adjacent
/// rings are zipped by angle.
fn disk(radius: f64, h: f64) -> Tri {
    let m = ((1.6 * radius / h).ceil() as usize).max(2);
    let mut vertices = vec![[0.0, 0.0]];
    let mut ring_start = vec![0usize];
    let mut ring_len = vec![1usize];
    for k in 1..=m {
        let r = radius * k as f64 / m as f64;
        let n = 6 * k;
        ring_start.push(vertices.len());
        ring_len.push(n);
        for j in 0..n {
            let th = 2.0 * PI * j as f64 / n as f64;
            vertices.push([r * th.cos(), r * th.sin()]);
        }
    }
    let mut triangles = Vec::new();
    for j in 0..6 {
        triangles.push([0, 1 + j, 1 + (j + 1) % 6]);
    }
    for k in 2..=m {
        let (ia, na) = (ring_start[k - 1], ring_len[k - 1]);
        let (ib, nb) = (ring_start[k], ring_len[k]);
        let (mut i, mut j) = (0usize, 0usize);
        let dist = |p: usize, q: usize| {
            let (u, v): ([f64; 2], [f64; 2]) = (vertices[p], vertices[q]);
            (u[0] - v[0]).hypot(u[1] - v[1])
        };
        // advance on whichever ring gives the shorter new diagonal
        while i < na || j < nb {
            let a = ia + i % na;
            let b = ib + j % nb;
            let a_next = ia + (i + 1) % na;
            let b_next = ib + (j + 1) % nb;
            if j < nb && (i >= na || dist(a, b_next) <= dist(a_next, b)) {
                triangles.push([a, b, b_next]);
                j += 1;
            } else {
                triangles.push([a, b, a_next]);
                i += 1;
            }
        }
    }
    (vertices, triangles)
}

/// Structured grid with alternating diagonals.
fn square(side: f64, h: f64) -> Tri {
    let n = ((std::f64::consts::SQRT_2 * side / h).ceil() as usize).max(1);
    let step = side / n as f64;
    let half = 0.5 * side;
    let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            let x = if i == n { half } else { -half + i as f64 * step };
            let y = if j == n { half } else { -half + j as f64 * step };
            vertices.push([x, y]);
        }
    }
    let idx = |i: usize, j: usize| j * (n + 1) + i;
    let mut triangles = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            if (i + j) % 2 == 0 {
                triangles.push([a, b, c]);
                triangles.push([a, c, d]);
            } else {
                triangles.push([a, b, d]);
                triangles.push([b, c, d]);
            }
        }
    }
    (vertices, triangles)
}

fn annulus_sector(r0: f64, r1: f64, angle: f64, h: f64) -> Tri {
    let step = h / std::f64::consts::SQRT_2;
    let nr = ((r1 - r0) / step).ceil().max(1.0) as usize;
    let nt = (angle * r1 / step).ceil().max(1.0) as usize;
    let mut vertices = Vec::with_capacity((nr + 1) * (nt + 1));
    for j in 0..=nt {
        let th = angle * j as f64 / nt as f64;
        for i in 0..=nr {
            let r = r0 + (r1 - r0) * i as f64 / nr as f64;
            vertices.push([r * th.cos(), r * th.sin()]);
        }
    }
    let idx = |i: usize, j: usize| j * (nr + 1) + i;
    let mut triangles = Vec::with_capacity(2 * nr * nt);
    for j in 0..nt {
        for i in 0..nr {
            let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            if (i + j) % 2 == 0 {
                triangles.push([a, b, c]);
                triangles.push([a, c, d]);
            } else {
                triangles.push([a, b, d]);
                triangles.push([b, c, d]);
            }
        }
    }
    (vertices, triangles)
}

fn segments_cross(p1: [f64; 2], p2: [f64; 2], q1: [f64; 2], q2: [f64; 2]) -> bool {
    let d1 = triangle_area(q1, q2, p1);
    let d2 = triangle_area(q1, q2, p2);
    let d3 = triangle_area(p1, p2, q1);
    let d4 = triangle_area(p1, p2, q2);
    (d1 > 0.0) != (d2 > 0.0) && (d3 > 0.0) != (d4 > 0.0) && d1 != 0.0 && d2 != 0.0 && d3 != 0.0 && d4 != 0.0
}

fn point_in_triangle(p: [f64; 2], a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> bool {
    triangle_area(a, b, p) >= 0.0 && triangle_area(b, c, p) >= 0.0 && triangle_area(c, a, p) >= 0.0
}

fn min_angle(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    let ang = |p: [f64; 2], q: [f64; 2], r: [f64; 2]| {
        let u = [q[0] - p[0], q[1] - p[1]];
        let v = [r[0] - p[0], r[1] - p[1]];
        (u[0] * v[1] - u[1] * v[0]).abs().atan2(u[0] * v[0] + u[1] * v[1])
    };
    ang(a, b, c).min(ang(b, c, a)).min(ang(c, a, b))
}

/// Ear clipping (best minimum angle first) followed by uniform 1→4 refinement.
fn polygon(points: &[[f64; 2]], h: f64) -> Result<Tri> {
    let n = points.len();
    if n < 3 {
        return Err(Error::DegenerateGeometry("polygon needs at least 3 points".into()));
    }
    for i in 0..n {
        for j in i + 1..n {
            if points[i] == points[j] {
                return Err(Error::DegenerateGeometry(format!("polygon repeats vertex {i}")));
            }
            let (a1, a2) = (points[i], points[(i + 1) % n]);
            let (b1, b2) = (points[j], points[(j + 1) % n]);
            if j != i + 1 && (i + n - j) % n != 1 && segments_cross(a1, a2, b1, b2) {
                return Err(Error::DegenerateGeometry(format!(
                    "polygon edges {i} and {j} intersect"
                )));
            }
        }
    }
    let signed: f64 = (0..n)
        .map(|i| {
            let (a, b) = (points[i], points[(i + 1) % n]);
            0.5 * (a[0] * b[1] - b[0] * a[1])
        })
        .sum();
    if signed.abs() < 1e-14 {
        return Err(Error::DegenerateGeometry("polygon has zero area".into()));
    }
    let mut vertices: Vec<[f64; 2]> = points.to_vec();
    if signed < 0.0 {
        vertices.reverse();
    }
    let mut remaining: Vec<usize> = (0..n).collect();
    let mut triangles = Vec::with_capacity(n - 2);
    while remaining.len() > 3 {
        let m = remaining.len();
        let mut best: Option<(usize, f64)> = None;
        for k in 0..m {
            let (ip, ic, inx) = (remaining[(k + m - 1) % m], remaining[k], remaining[(k + 1) % m]);
            let (a, b, c) = (vertices[ip], vertices[ic], vertices[inx]);
            if triangle_area(a, b, c) <= 0.0 {
                continue;
            }
            let blocked = remaining
                .iter()
                .any(|&q| q != ip && q != ic && q != inx && point_in_triangle(vertices[q], a, b, c));
            if blocked {
                continue;
            }
            let quality = min_angle(a, b, c);
            if best.map_or(true, |(_, q)| quality > q) {
                best = Some((k, quality));
            }
        }
        let Some((k, _)) = best else {
            return Err(Error::DegenerateGeometry("ear clipping failed (self-intersecting polygon?)".into()));
        };
        let m = remaining.len();
        triangles.push([remaining[(k + m - 1) % m], remaining[k], remaining[(k + 1) % m]]);
        remaining.remove(k);
    }
    triangles.push([remaining[0], remaining[1], remaining[2]]);

    let longest = |v: &Vec<[f64; 2]>, t: &Vec<[usize; 3]>| {
        t.iter()
            .flat_map(|tri| (0..3).map(move |k| (tri[k], tri[(k + 1) % 3])))
            .map(|(a, b)| (v[b][0] - v[a][0]).hypot(v[b][1] - v[a][1]))
            .fold(0.0, f64::max)
    };
    while longest(&vertices, &triangles) > h {
        let mut mids: HashMap<(usize, usize), usize> = HashMap::new();
        let mut refined = Vec::with_capacity(4 * triangles.len());
        for tri in &triangles {
            let mut m = [0usize; 3];
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                let key = (a.min(b), a.max(b));
                m[k] = *mids.entry(key).or_insert_with(|| {
                    let (pa, pb) = (vertices[a], vertices[b]);
                    vertices.push([0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]);
                    vertices.len() - 1
                });
            }
            refined.push([tri[0], m[0], m[2]]);
            refined.push([m[0], tri[1], m[1]]);
            refined.push([m[2], m[1], tri[2]]);
            refined.push([m[0], m[1], m[2]]);
        }
        triangles = refined;
    }
    Ok((vertices, triangles))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::WarpProfile;

    #[test]
    fn square_measure_and_edges() {
        let m = generate_domain(&DomainKind::Square { side: 1.0 }, 0.05, Geometry::Flat).unwrap();
        assert!((m.total_measure() - 1.0).abs() < 1e-12);
        assert!((m.boundary_measure() - 4.0).abs() < 1e-12);
        assert!(m.max_edge_length() <= 0.05 + 1e-12);
    }

    #[test]
    fn disk_measure_converges() {
        let exact = PI;
        let mut errs = Vec::new();
        for h in [0.08, 0.04, 0.02] {
            let m = generate_domain(&DomainKind::Disk { radius: 1.0 }, h, Geometry::Flat).unwrap();
            assert!(m.max_edge_length() <= h + 1e-12, "h={h} max={}", m.max_edge_length());
            errs.push((m.total_measure() - exact).abs());
        }
        assert!(errs[2] < 2e-3);
        assert!(errs[0] / errs[1] >= 3.0 && errs[1] / errs[2] >= 3.0, "{errs:?}");
        let m = generate_domain(&DomainKind::Disk { radius: 1.0 }, 0.02, Geometry::Flat).unwrap();
        assert!((m.boundary_measure() - 2.0 * PI).abs() < 5e-3);
    }

    #[test]
    fn hemisphere_cap() {
        let mut errs = Vec::new();
        for h in [0.1, 0.05] {
            let m = generate_domain(&DomainKind::SphericalCap { theta: PI / 2.0 }, h, Geometry::SphereStereographic)
                .unwrap();
            errs.push((m.total_measure() - 2.0 * PI).abs());
            if h == 0.05 {
                assert!(errs[1] < 1e-3, "{errs:?}");
                assert!((m.boundary_measure() - 2.0 * PI).abs() < 5e-3);
            }
        }
        assert!(errs[0] / errs[1] >= 3.0, "{errs:?}");
    }

    #[test]
    fn cone_disk_measure() {
        let g = Geometry::Warped(WarpProfile::Cone { c: 0.5 });
        let m = generate_domain(&DomainKind::Disk { radius: 1.0 }, 0.02, g).unwrap();
        assert!((m.total_measure() - PI / 2.0).abs() < 1e-3);
        // circumference 2π c
        assert!((m.boundary_measure() - PI).abs() < 5e-3);
    }

    #[test]
    fn l_shape_polygon() {
        let pts = vec![[0.0, 0.0], [2.0, 0.0], [2.0, 1.0], [1.0, 1.0], [1.0, 2.0], [0.0, 2.0]];
        let m = generate_domain(&DomainKind::Polygon { points: pts.clone() }, 0.1, Geometry::Flat).unwrap();
        assert!((m.total_measure() - 3.0).abs() < 1e-12);
        assert!((m.boundary_measure() - 8.0).abs() < 1e-12);
        assert!(m.max_edge_length() <= 0.1);
        // clockwise input is accepted
        let mut rev = pts;
        rev.reverse();
        let m2 = generate_domain(&DomainKind::Polygon { points: rev }, 0.1, Geometry::Flat).unwrap();
        assert!((m2.total_measure() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_polygons_rejected() {
        let bow = vec![[0.0, 0.0], [1.0, 1.0], [1.0, 0.0], [0.0, 1.0]];
        assert!(matches!(
            generate_domain(&DomainKind::Polygon { points: bow }, 0.1, Geometry::Flat),
            Err(Error::DegenerateGeometry(_))
        ));
        let flat = vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]];
        assert!(generate_domain(&DomainKind::Polygon { points: flat }, 0.1, Geometry::Flat).is_err());
        assert!(generate_domain(&DomainKind::Square { side: 1.0 }, 0.0, Geometry::Flat).is_err());
        assert!(generate_domain(&DomainKind::SphericalCap { theta: 4.0 }, 0.1, Geometry::SphereStereographic).is_err());
    }

    #[test]
    fn annulus_sector_area() {
        let m = generate_domain(
            &DomainKind::AnnulusSector { r_inner: 0.5, r_outer: 1.0, angle: PI / 2.0 },
            0.02,
            Geometry::Flat,
        )
        .unwrap();
        let exact = 0.5 * (PI / 2.0) * (1.0 - 0.25);
        assert!((m.total_measure() - exact).abs() < 1e-3, "{} vs {exact}", m.total_measure());
    }
}
