//! Clipping of triangles by level sets of linear fields, and exact integrals
//! of linear fields over the resulting convex polygons.

/// Polygon vertex carrying `K` linearly interpolated attributes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClipVertex<const K: usize> {
    pub p: [f64; 2],
    pub a: [f64; K],
}

fn lerp<const K: usize>(u: &ClipVertex<K>, v: &ClipVertex<K>, s: f64) -> ClipVertex<K> {
    let mut a = [0.0; K];
    for k in 0..K {
        a[k] = u.a[k] + s * (v.a[k] - u.a[k]);
    }
    ClipVertex {
        p: [u.p[0] + s * (v.p[0] - u.p[0]), u.p[1] + s * (v.p[1] - u.p[1])],
        a,
    }
}

/// Keep the part of a convex polygon where attribute `key` is `> level`
/// (`above = true`) or `<= level` (`above = false`).
pub fn clip<const K: usize>(poly: &[ClipVertex<K>], key: usize, level: f64, above: bool) -> Vec<ClipVertex<K>> {
    let inside = |v: &ClipVertex<K>| if above { v.a[key] > level } else { v.a[key] <= level };
    let mut out = Vec::with_capacity(poly.len() + 2);
    let n = poly.len();
    for i in 0..n {
        let cur = &poly[i];
        let nxt = &poly[(i + 1) % n];
        let (ci, ni) = (inside(cur), inside(nxt));
        if ci {
            out.push(*cur);
        }
        if ci != ni {
            let s = (level - cur.a[key]) / (nxt.a[key] - cur.a[key]);
            let mut v = lerp(cur, nxt, s.clamp(0.0, 1.0));
            v.a[key] = level;
            out.push(v);
        }
    }
    if out.len() < 3 {
        out.clear();
    }
    out
}

/// Split a convex polygon into pieces on which attribute `key` has a single sign.
pub fn split_by_sign<const K: usize>(poly: Vec<ClipVertex<K>>, key: usize) -> Vec<Vec<ClipVertex<K>>> {
    let has_pos = poly.iter().any(|v| v.a[key] > 0.0);
    let has_neg = poly.iter().any(|v| v.a[key] < 0.0);
    if !(has_pos && has_neg) {
        return vec![poly];
    }
    let mut pieces = Vec::with_capacity(2);
    for above in [true, false] {
        let piece = clip(&poly, key, 0.0, above);
        if !piece.is_empty() {
            pieces.push(piece);
        }
    }
    pieces
}

/// Signed chart area of a triangle.
pub fn triangle_area(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

/// Chart area of a polygon.
pub fn polygon_area<const K: usize>(poly: &[ClipVertex<K>]) -> f64 {
    fan(poly).map(|(a, b, c)| triangle_area(a.p, b.p, c.p)).sum()
}

fn fan<const K: usize>(
    poly: &[ClipVertex<K>],
) -> impl Iterator<Item = (&ClipVertex<K>, &ClipVertex<K>, &ClipVertex<K>)> {
    (1..poly.len().saturating_sub(1)).map(move |i| (&poly[0], &poly[i], &poly[i + 1]))
}

/// `∫ |f|^p` over a triangle for a linear `f` that does not change sign,
/// integer `p ≥ 0`: `2A p!/(p+2)! · h_p(|f_1|, |f_2|, |f_3|)` with `h_p` the
/// complete homogeneous symmetric polynomial.
pub fn triangle_power_integral(area: f64, v: [f64; 3], p: u32) -> f64 {
    let (a, b, c) = (v[0].abs(), v[1].abs(), v[2].abs());
    let mut h = 0.0;
    for i in 0..=p {
        for j in 0..=(p - i) {
            let k = p - i - j;
            h += a.powi(i as i32) * b.powi(j as i32) * c.powi(k as i32);
        }
    }
    let pf = p as f64;
    2.0 * area * h / ((pf + 1.0) * (pf + 2.0))
}

/// `∫ f g` over a triangle for linear `f`, `g`.
pub fn triangle_product_integral(area: f64, f: [f64; 3], g: [f64; 3]) -> f64 {
    let sf: f64 = f.iter().sum();
    let sg: f64 = g.iter().sum();
    let dot: f64 = f.iter().zip(g.iter()).map(|(x, y)| x * y).sum();
    area * (dot + sf * sg) / 12.0
}

/// `∫ |attr_key|^p` over a polygon on which the attribute keeps its sign.
pub fn polygon_power_integral<const K: usize>(poly: &[ClipVertex<K>], key: usize, p: u32) -> f64 {
    fan(poly)
        .map(|(a, b, c)| triangle_power_integral(triangle_area(a.p, b.p, c.p), [a.a[key], b.a[key], c.a[key]], p))
        .sum()
}

/// `∫ attr_i attr_j` over a polygon.
pub fn polygon_product_integral<const K: usize>(poly: &[ClipVertex<K>], i: usize, j: usize) -> f64 {
    fan(poly)
        .map(|(a, b, c)| {
            triangle_product_integral(
                triangle_area(a.p, b.p, c.p),
                [a.a[i], b.a[i], c.a[i]],
                [a.a[j], b.a[j], c.a[j]],
            )
        })
        .sum()
}

/// Degree-5 seven-point rule on the reference triangle (barycentric, weight).
pub const DUNAVANT5: [([f64; 3], f64); 7] = [
    ([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], 0.225),
    ([0.059_715_871_789_769_8, 0.470_142_064_105_115_1, 0.470_142_064_105_115_1], 0.132_394_152_788_506_2),
    ([0.470_142_064_105_115_1, 0.059_715_871_789_769_8, 0.470_142_064_105_115_1], 0.132_394_152_788_506_2),
    ([0.470_142_064_105_115_1, 0.470_142_064_105_115_1, 0.059_715_871_789_769_8], 0.132_394_152_788_506_2),
    ([0.797_426_985_353_087_3, 0.101_286_507_323_456_3, 0.101_286_507_323_456_3], 0.125_939_180_544_827_2),
    ([0.101_286_507_323_456_3, 0.797_426_985_353_087_3, 0.101_286_507_323_456_3], 0.125_939_180_544_827_2),
    ([0.101_286_507_323_456_3, 0.101_286_507_323_456_3, 0.797_426_985_353_087_3], 0.125_939_180_544_827_2),
];

/// Integrate `f(attrs)` over a polygon with the seven-point rule on each fan triangle.
pub fn polygon_quadrature<const K: usize, F: Fn(&[f64; K]) -> f64>(poly: &[ClipVertex<K>], f: F) -> f64 {
    let mut total = 0.0;
    for (a, b, c) in fan(poly) {
        let area = triangle_area(a.p, b.p, c.p);
        let mut s = 0.0;
        for (bary, w) in DUNAVANT5.iter() {
            let mut at = [0.0; K];
            for k in 0..K {
                at[k] = bary[0] * a.a[k] + bary[1] * b.a[k] + bary[2] * c.a[k];
            }
            s += w * f(&at);
        }
        total += area * s;
    }
    total
}
