//! Distribution functions, decreasing and Schwarz rearrangements, and Lorentz
//! norms of P1 fields, computed exactly per triangle.

use std::io::Write;

use crate::error::{Error, Result};
use crate::geometry::{GeodesicBall, ModelSpace};
use crate::mesh::clip::{self, ClipVertex};
use crate::mesh::ScalarField;
use crate::quadrature;
use crate::radial::{RadialProfile, DEFAULT_INTERVALS};

/// Breakpoints closer than this (relative to `max(1, |t|)`) are merged.
pub const LEVEL_TOLERANCE: f64 = 1e-14;

/// `μ(t) = |{|h| > t}|_g` as a right-continuous piecewise quadratic.
///
/// `levels` are the breakpoints in increasing order. On `[levels[j],
/// levels[j+1])` the function is `c0 + c1 s + c2 s²` with `s = t - levels[j]`;
/// below the first breakpoint it equals `total` and from the last one on it is 0.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionData {
    levels: Vec<f64>,
    pieces: Vec<[f64; 3]>,
    total: f64,
    // tails[j] = ∫_{levels[j]}^∞ μ
    tails: Vec<f64>,
}

impl DistributionData {
    fn build(levels: Vec<f64>, pieces: Vec<[f64; 3]>, total: f64) -> Self {
        let mut tails = vec![0.0; levels.len()];
        for j in (0..pieces.len()).rev() {
            let w = levels[j + 1] - levels[j];
            let [c0, c1, c2] = pieces[j];
            tails[j] = tails[j + 1] + w * (c0 + w * (c1 / 2.0 + w * c2 / 3.0));
        }
        DistributionData { levels, pieces, total, tails }
    }

    pub(crate) fn from_parts(levels: Vec<f64>, pieces: Vec<[f64; 3]>, total: f64) -> Result<Self> {
        if levels.is_empty() || pieces.len() + 1 != levels.len() {
            return Err(Error::Invariant {
                check: "distribution_shape",
                index: levels.len(),
                detail: format!("{} levels and {} pieces", levels.len(), pieces.len()),
            });
        }
        if let Some(i) = levels.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::Invariant {
                check: "distribution_levels_increasing",
                index: i,
                detail: format!("{} then {}", levels[i], levels[i + 1]),
            });
        }
        if levels[0] < 0.0 {
            return Err(Error::Invariant {
                check: "distribution_levels_nonnegative",
                index: 0,
                detail: format!("lowest level {}", levels[0]),
            });
        }
        Ok(DistributionData::build(levels, pieces, total))
    }

    /// Distribution of the constant `c > 0` on a set of measure `total`.
    pub fn constant(c: f64, total: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite() && total > 0.0 && total.is_finite()) {
            return Err(Error::Domain(format!("constant distribution needs c > 0 and total > 0, got {c}, {total}")));
        }
        DistributionData::from_parts(vec![c], Vec::new(), total)
    }

    /// Breakpoints in increasing order.
    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    /// Per-interval coefficients `(c0, c1, c2)`.
    pub fn pieces(&self) -> &[[f64; 3]] {
        &self.pieces
    }

    /// `|Ω|_g`.
    pub fn total(&self) -> f64 {
        self.total
    }

    /// Essential infimum of `|h|`.
    pub fn min_level(&self) -> f64 {
        self.levels[0]
    }

    /// Essential supremum of `|h|`.
    pub fn max_level(&self) -> f64 {
        *self.levels.last().unwrap()
    }

    fn interval(&self, t: f64) -> Option<usize> {
        if t < self.levels[0] || t >= self.max_level() {
            return None;
        }
        Some(self.levels.partition_point(|&l| l <= t) - 1)
    }

    fn piece_at(&self, j: usize, s: f64) -> f64 {
        let [c0, c1, c2] = self.pieces[j];
        c0 + s * (c1 + s * c2)
    }

    /// `μ(t)`.
    pub fn eval(&self, t: f64) -> f64 {
        if t < self.levels[0] {
            return self.total;
        }
        match self.interval(t) {
            Some(j) => self.piece_at(j, t - self.levels[j]),
            None => 0.0,
        }
    }

    /// `μ(t⁻)`.
    pub fn left_limit(&self, t: f64) -> f64 {
        if t <= self.levels[0] {
            return self.total;
        }
        if t > self.max_level() {
            return 0.0;
        }
        let j = self.levels.partition_point(|&l| l < t) - 1;
        self.piece_at(j, t - self.levels[j])
    }

    /// Whether `t` lies within `tol` of a breakpoint.
    pub fn near_breakpoint(&self, t: f64, tol: f64) -> bool {
        let k = self.levels.partition_point(|&l| l < t);
        (k < self.levels.len() && (self.levels[k] - t).abs() <= tol) || (k > 0 && (t - self.levels[k - 1]).abs() <= tol)
    }

    /// `μ'(t)`, the analytic derivative of the stored quadratic; `None` at
    /// breakpoints, where it is undefined.
    pub fn derivative(&self, t: f64) -> Option<f64> {
        if self.near_breakpoint(t, LEVEL_TOLERANCE * t.abs().max(1.0)) {
            return None;
        }
        if t < self.levels[0] || t > self.max_level() {
            return Some(0.0);
        }
        let j = self.interval(t)?;
        let [_, c1, c2] = self.pieces[j];
        Some(c1 + 2.0 * c2 * (t - self.levels[j]))
    }

    /// Decreasing rearrangement `h*(s) = inf{t ≥ 0 : μ(t) ≤ s}` on `[0, |Ω|_g]`.
    /// At `s = |Ω|_g` the left limit (the essential infimum) is returned.
    pub fn hstar(&self, s: f64) -> Result<f64> {
        let slack = 1e-12 * self.total;
        if !(s >= -slack && s <= self.total + slack) {
            return Err(Error::Domain(format!("s = {s} outside [0, {}]", self.total)));
        }
        let s = s.clamp(0.0, self.total);
        if s >= self.total {
            return Ok(self.levels[0]);
        }
        let k = self.pieces.len();
        // first breakpoint with μ(t_j) <= s
        let (mut lo, mut hi) = (0usize, k);
        while lo < hi {
            let mid = (lo + hi) / 2;
            if self.pieces[mid][0] > s {
                lo = mid + 1;
            } else {
                hi = mid;
            }
        }
        let j = lo;
        if j == 0 {
            return Ok(self.levels[0]);
        }
        let i = j - 1;
        let width = self.levels[j] - self.levels[i];
        if self.piece_at(i, width) > s {
            return Ok(self.levels[j]);
        }
        Ok(self.levels[i] + solve_piece(self.pieces[i], s, width))
    }

    /// `∫_t^∞ μ(τ) dτ`.
    pub fn tail_integral(&self, t: f64) -> f64 {
        if t < self.levels[0] {
            return self.total * (self.levels[0] - t.max(0.0)) + self.tails[0];
        }
        let Some(j) = self.interval(t) else {
            return 0.0;
        };
        let [c0, c1, c2] = self.pieces[j];
        let prim = |s: f64| s * (c0 + s * (c1 / 2.0 + s * c2 / 3.0));
        let w = self.levels[j + 1] - self.levels[j];
        prim(w) - prim(t - self.levels[j]) + self.tails[j + 1]
    }

    /// `∫_0^m h*(s) ds = m h*(m) + ∫_{h*(m)}^∞ μ`.
    pub fn hstar_integral(&self, m: f64) -> Result<f64> {
        if m <= 0.0 {
            return Ok(0.0);
        }
        let m = m.min(self.total);
        let t = self.hstar(m)?;
        Ok(m * t + self.tail_integral(t))
    }

    /// `∫_0^{|Ω|} h*(s)^p ds = p ∫_0^∞ t^{p-1} μ(t) dt`, exact for integer `p ≤ 14`.
    pub fn moment(&self, p: f64) -> Result<f64> {
        if !(p > 0.0) {
            return Err(Error::Domain(format!("moment order must be positive, got {p}")));
        }
        let head = self.total * self.levels[0].powf(p);
        let integer = p.fract() == 0.0 && p <= 14.0;
        let mut sum = 0.0;
        for j in 0..self.pieces.len() {
            let a = self.levels[j];
            let f = |t: f64| t.powf(p - 1.0) * self.piece_at(j, t - a);
            sum += if integer {
                quadrature::gauss8(f, a, self.levels[j + 1])
            } else {
                quadrature::adaptive_smoothstep(f, a, self.levels[j + 1], 1e-12)?
            };
        }
        Ok(head + p * sum)
    }

    /// Schwarz rearrangement evaluated exactly: `h♯(r) = h*(I(r))`.
    pub fn schwarz_value(&self, space: &ModelSpace, r: f64) -> Result<f64> {
        let s = space.volume_profile(r)?;
        self.hstar(s.min(self.total))
    }

    /// CSV `(t, mu)` at the breakpoints.
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "t,mu")?;
        for &t in &self.levels {
            writeln!(w, "{t},{}", self.eval(t))?;
        }
        Ok(())
    }
}

/// Smallest root in `[0, width]` of `c0 + c1 x + c2 x² = s` for a
/// non-increasing piece with `c0 > s ≥ value(width)`.
fn solve_piece(c: [f64; 3], s: f64, width: f64) -> f64 {
    let [c0, c1, c2] = c;
    let g = |x: f64| c0 + x * (c1 + x * c2) - s;
    let d = c0 - s;
    let mut x = if c2.abs() * width <= 1e-14 * c1.abs() {
        -d / c1
    } else {
        let disc = (c1 * c1 - 4.0 * c2 * d).max(0.0).sqrt();
        // stable roots of c2 x² + c1 x + d
        let q = -0.5 * (c1 + c1.signum() * disc);
        let r1 = if q != 0.0 { d / q } else { f64::NAN };
        let r2 = q / c2;
        let ok = |r: f64| r.is_finite() && r >= -1e-12 * width && r <= width * (1.0 + 1e-12);
        match (ok(r1), ok(r2)) {
            (true, true) => r1.min(r2),
            (true, false) => r1,
            (false, true) => r2,
            _ => f64::NAN,
        }
    };
    if !x.is_finite() {
        // fall back to bisection
        let (mut lo, mut hi) = (0.0, width);
        for _ in 0..200 {
            let m = 0.5 * (lo + hi);
            if g(m) > 0.0 {
                lo = m;
            } else {
                hi = m;
            }
        }
        x = hi;
    }
    x.clamp(0.0, width)
}

/// Merges sorted values closer than the level tolerance.
fn dedup_levels(mut vals: Vec<f64>) -> Vec<f64> {
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut out: Vec<f64> = Vec::with_capacity(vals.len());
    for v in vals {
        match out.last() {
            Some(&l) if v - l <= LEVEL_TOLERANCE * l.abs().max(1.0) => {}
            _ => out.push(v),
        }
    }
    out
}

fn nearest_level(levels: &[f64], v: f64) -> usize {
    let k = levels.partition_point(|&l| l < v);
    if k == 0 {
        0
    } else if k == levels.len() || (v - levels[k - 1]) <= (levels[k] - v) {
        k - 1
    } else {
        k
    }
}

/// Sub-triangles on which `|h|` is linear: `(measure, |h| at the corners)`.
fn abs_pieces(field: &ScalarField) -> Vec<(f64, [f64; 3])> {
    let m = field.mesh();
    let vals = field.values();
    let mut out = Vec::with_capacity(m.triangles().len());
    for (t, tri) in m.triangles().iter().enumerate() {
        let v = tri.map(|i| vals[i]);
        let rho = m.triangle_density(t);
        if v.iter().all(|&x| x >= 0.0) || v.iter().all(|&x| x <= 0.0) {
            out.push((m.triangle_measure(t), v.map(f64::abs)));
            continue;
        }
        let poly: Vec<ClipVertex<1>> = tri.iter().map(|&i| ClipVertex { p: m.vertices()[i], a: [vals[i]] }).collect();
        for piece in clip::split_by_sign(poly, 0) {
            for k in 1..piece.len() - 1 {
                let (a, b, c) = (&piece[0], &piece[k], &piece[k + 1]);
                let area = clip::triangle_area(a.p, b.p, c.p);
                if area > 0.0 {
                    out.push((rho * area, [a.a[0].abs(), b.a[0].abs(), c.a[0].abs()]));
                }
            }
        }
    }
    out
}

/// Exact distribution function of a P1 field with per-triangle constant density.
pub fn distribution_function(field: &ScalarField) -> DistributionData {
    let pieces = abs_pieces(field);
    let levels = dedup_levels(pieces.iter().flat_map(|(_, v)| v.iter().copied()).collect());
    let k = levels.len() - 1;
    let mut coef = vec![[0.0f64; 3]; k];
    // constant contributions below a triangle's minimum, as a difference array
    let mut below = vec![0.0f64; k + 1];
    let mut total = 0.0;
    for (w, v) in pieces {
        total += w;
        let mut idx = v.map(|x| nearest_level(&levels, x));
        idx.sort_unstable();
        let [ia, ib, ic] = idx;
        let [a, b, c] = idx.map(|i| levels[i]);
        below[0] += w;
        below[ia] -= w;
        if ia < ib {
            // W (1 - (t-a)² / ((b-a)(c-a)))
            let d1 = (b - a) * (c - a);
            for j in ia..ib {
                let d = levels[j] - a;
                coef[j][0] += w * (1.0 - d * d / d1);
                coef[j][1] -= 2.0 * w * d / d1;
                coef[j][2] -= w / d1;
            }
        }
        if ib < ic {
            // W (c-t)² / ((c-a)(c-b))
            let d2 = (c - a) * (c - b);
            for j in ib..ic {
                let e = c - levels[j];
                coef[j][0] += w * e * e / d2;
                coef[j][1] -= 2.0 * w * e / d2;
                coef[j][2] += w / d2;
            }
        }
    }
    let mut run = 0.0;
    for j in 0..k {
        run += below[j];
        coef[j][0] += run;
    }
    DistributionData::build(levels, coef, total)
}

/// The decreasing rearrangement as a function handle `s ↦ h*(s)`.
pub fn decreasing_rearrangement(dist: &DistributionData) -> impl Fn(f64) -> Result<f64> + '_ {
    move |s| dist.hstar(s)
}

/// `h♯` sampled on the matched ball `I(R) = |Ω|_g` at `intervals + 1` radii.
pub fn schwarz_rearrangement_with(dist: &DistributionData, space: &ModelSpace, intervals: usize) -> Result<RadialProfile> {
    if dist.total() > space.max_volume() * (1.0 + 1e-12) {
        return Err(Error::OutOfRange(format!(
            "measure {} exceeds the full model sphere {}",
            dist.total(),
            space.max_volume()
        )));
    }
    let ball = GeodesicBall::with_weighted_volume(*space, dist.total())?;
    let r_max = ball.radius;
    let grid: Vec<f64> = (0..=intervals).map(|i| r_max * i as f64 / intervals as f64).collect();
    let values = grid
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            if i == intervals {
                Ok(dist.min_level())
            } else {
                dist.hstar(space.volume_profile(r)?.min(dist.total()))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    RadialProfile::new(ball, grid, values)
}

/// `h♯` on the default radial grid.
pub fn schwarz_rearrangement(dist: &DistributionData, space: &ModelSpace) -> Result<RadialProfile> {
    schwarz_rearrangement_with(dist, space, DEFAULT_INTERVALS)
}

/// Lorentz exponents; `q = ∞` is `f64::INFINITY`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LorentzParams {
    pub p: f64,
    pub q: f64,
}

impl LorentzParams {
    pub fn new(p: f64, q: f64) -> Result<Self> {
        if !(p > 0.0 && p.is_finite() && q > 0.0) {
            return Err(Error::Domain(format!("Lorentz exponents must be positive, got p={p}, q={q}")));
        }
        Ok(LorentzParams { p, q })
    }
}

/// `‖h‖_{L^{p,q}} = p^{1/q} (∫_0^∞ t^q μ(t)^{q/p} dt/t)^{1/q}`; for `q = ∞`
/// the value `sup_t t^p μ(t)`.
pub fn lorentz_norm(dist: &DistributionData, params: LorentzParams) -> Result<f64> {
    let LorentzParams { p, q } = params;
    if q.is_infinite() {
        return Ok(lorentz_sup(dist, p));
    }
    let r = q / p;
    let t0 = dist.levels[0];
    let mut sum = t0.powf(q) / q * dist.total.powf(r);
    let exact = q.fract() == 0.0 && q <= 12.0 && (r == 1.0 || r == 2.0);
    let piece = |j: usize| {
        let a = dist.levels[j];
        move |t: f64| t.powf(q - 1.0) * dist.piece_at(j, t - a).max(0.0).powf(r)
    };
    let cells = dist.pieces.len();
    if exact {
        sum += (0..cells).map(|j| quadrature::gauss8(piece(j), dist.levels[j], dist.levels[j + 1])).sum::<f64>();
    } else {
        // shared absolute floor keeps round-off in thin cells from stalling refinement
        let rough: f64 = (0..cells).map(|j| quadrature::gauss8(piece(j), dist.levels[j], dist.levels[j + 1])).sum();
        let floor = 1e-13 * (rough + sum) / cells.max(1) as f64;
        for j in 0..cells {
            sum += quadrature::adaptive_smoothstep_with_floor(piece(j), dist.levels[j], dist.levels[j + 1], 1e-10, floor)?;
        }
    }
    if !sum.is_finite() {
        return Err(Error::Divergence(format!("Lorentz integral for p={p}, q={q} is not finite")));
    }
    Ok(p.powf(1.0 / q) * sum.powf(1.0 / q))
}

fn lorentz_sup(dist: &DistributionData, p: f64) -> f64 {
    let mut best = dist.levels[0].powf(p) * dist.total;
    for j in 0..dist.pieces.len() {
        let a = dist.levels[j];
        let width = dist.levels[j + 1] - a;
        let val = |s: f64| (a + s).powf(p) * dist.piece_at(j, s);
        best = best.max(val(0.0)).max(val(width));
        // stationary points of t^p μ: p μ + t μ' = 0
        let [c0, c1, c2] = dist.pieces[j];
        let qa = (p + 2.0) * c2;
        let qb = (p + 1.0) * c1 + 2.0 * c2 * a;
        let qc = p * c0 + a * c1;
        let mut roots = Vec::new();
        if qa.abs() > 1e-300 {
            let disc = qb * qb - 4.0 * qa * qc;
            if disc >= 0.0 {
                let sd = disc.sqrt();
                roots.push((-qb + sd) / (2.0 * qa));
                roots.push((-qb - sd) / (2.0 * qa));
            }
        } else if qb != 0.0 {
            roots.push(-qc / qb);
        }
        for s in roots {
            if s > 0.0 && s < width {
                best = best.max(val(s));
            }
        }
    }
    best
}

/// `(∫|f1 f2| dV_g, ∫_0^{|Ω|} f1* f2* ds)`.
pub fn hardy_littlewood_check(f1: &ScalarField, f2: &ScalarField) -> Result<(f64, f64)> {
    if !f1.same_mesh(f2) {
        return Err(Error::Mismatch("Hardy-Littlewood fields live on different meshes".into()));
    }
    let m = f1.mesh();
    let (v1, v2) = (f1.values(), f2.values());
    let mut lhs = 0.0;
    for (t, tri) in m.triangles().iter().enumerate() {
        let poly: Vec<ClipVertex<2>> =
            tri.iter().map(|&i| ClipVertex { p: m.vertices()[i], a: [v1[i], v2[i]] }).collect();
        let mut s = 0.0;
        for piece in clip::split_by_sign(poly, 0) {
            for sub in clip::split_by_sign(piece, 1) {
                s += clip::polygon_product_integral(&sub, 0, 1).abs();
            }
        }
        lhs += m.triangle_density(t) * s;
    }
    let d1 = distribution_function(f1);
    let d2 = distribution_function(f2);
    let rhs = rearrangement_product(&d1, &d2)?;
    Ok((lhs, rhs))
}

/// `∫_0^{|Ω|} h1*(s) h2*(s) ds`, integrated between the measure breakpoints
/// of both distributions.
pub fn rearrangement_product(d1: &DistributionData, d2: &DistributionData) -> Result<f64> {
    let total = d1.total.min(d2.total);
    let mut cuts: Vec<f64> = vec![0.0, total];
    for d in [d1, d2] {
        for &t in &d.levels {
            cuts.push(d.eval(t));
            cuts.push(d.left_limit(t));
        }
    }
    cuts.retain(|&s| s >= 0.0 && s <= total);
    let cuts = dedup_levels(cuts);
    let f = |s: f64| d1.hstar(s).unwrap_or(0.0) * d2.hstar(s).unwrap_or(0.0);
    // absolute budget shared across pieces so tiny cells do not chase round-off
    let rough: f64 = cuts.windows(2).map(|w| quadrature::gauss8(&f, w[0], w[1]).abs()).sum();
    let floor = 1e-13 * rough / cuts.len() as f64;
    let mut sum = 0.0;
    for w in cuts.windows(2) {
        sum += quadrature::adaptive_smoothstep_with_floor(&f, w[0], w[1], 1e-12, floor)?;
    }
    Ok(sum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_domain, DomainKind, Geometry, MeasuredMesh};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use std::sync::Arc;

    fn square(h: f64) -> Arc<MeasuredMesh> {
        Arc::new(generate_domain(&DomainKind::Square { side: 1.0 }, h, Geometry::Flat).unwrap())
    }

    fn disk(h: f64, g: Geometry) -> Arc<MeasuredMesh> {
        Arc::new(generate_domain(&DomainKind::Disk { radius: 1.0 }, h, g).unwrap())
    }

    /// Brute force: clip every triangle against `|h| > t`.
    fn clipped_measure(field: &ScalarField, t: f64) -> f64 {
        let m = field.mesh();
        let mut total = 0.0;
        for (k, tri) in m.triangles().iter().enumerate() {
            let poly: Vec<ClipVertex<1>> =
                tri.iter().map(|&i| ClipVertex { p: m.vertices()[i], a: [field.values()[i]] }).collect();
            for piece in clip::split_by_sign(poly, 0) {
                let abs: Vec<ClipVertex<1>> = piece.iter().map(|v| ClipVertex { p: v.p, a: [v.a[0].abs()] }).collect();
                let up = clip::clip(&abs, 0, t, true);
                total += m.triangle_density(k) * clip::polygon_area(&up);
            }
        }
        total
    }

    fn random_field(mesh: &Arc<MeasuredMesh>, seed: u64, signed: bool) -> ScalarField {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let lo = if signed { -1.0 } else { 0.0 };
        let vals = (0..mesh.num_vertices()).map(|_| rng.gen_range(lo..1.0)).collect();
        ScalarField::new(mesh.clone(), vals).unwrap()
    }

    #[test]
    fn strip_distribution() {
        let mesh = square(0.1);
        let u = ScalarField::from_fn(mesh, |p| p[0] + 0.5).unwrap();
        let d = distribution_function(&u);
        for i in 0..=100 {
            let t = i as f64 / 100.0;
            assert!((d.eval(t) - (1.0 - t)).abs() < 1e-13, "t={t}");
        }
        let hs = decreasing_rearrangement(&d);
        for i in 0..=50 {
            let s = i as f64 / 50.0;
            assert!((hs(s).unwrap() - (1.0 - s)).abs() < 1e-12);
        }
        assert!(hs(1.5).is_err());
        // h♯(r) = 1 - πr²
        let sharp = schwarz_rearrangement(&d, &ModelSpace::euclidean_plane()).unwrap();
        for (r, v) in sharp.grid().iter().zip(sharp.values()) {
            assert!((v - (1.0 - std::f64::consts::PI * r * r)).abs() < 1e-11);
        }
    }

    #[test]
    fn constant_and_plateau() {
        let mesh = square(0.1);
        let c = ScalarField::constant(mesh.clone(), 2.0);
        let d = distribution_function(&c);
        assert!((d.eval(1.999) - 1.0).abs() < 1e-14);
        assert_eq!(d.eval(2.0), 0.0);
        // Lorentz: q = 1 → p c A^{1/p}; q = ∞ → c^p A
        let a = d.total();
        let l = lorentz_norm(&d, LorentzParams::new(3.0, 1.0).unwrap()).unwrap();
        assert!((l - 3.0 * 2.0 * a.powf(1.0 / 3.0)).abs() < 1e-12);
        let l = lorentz_norm(&d, LorentzParams::new(2.0, f64::INFINITY).unwrap()).unwrap();
        assert!((l - 4.0 * a).abs() < 1e-12);
        // plateau at height 1 on the left half, decreasing on the right half
        let x0 = mesh.vertices().iter().map(|p| p[0]).filter(|&x| x <= 0.0).fold(f64::MIN, f64::max);
        let h = ScalarField::from_fn(mesh, |p| if p[0] <= x0 { 1.0 } else { 1.0 - (p[0] - x0) }).unwrap();
        let d = distribution_function(&h);
        let hs = decreasing_rearrangement(&d);
        let a0 = x0 + 0.5;
        for s in [0.0, 0.1, 0.3, a0 - 1e-4] {
            assert_eq!(hs(s).unwrap(), 1.0);
        }
        assert!((hs(0.75).unwrap() - (1.0 - (0.75 - a0))).abs() < 1e-12);
    }

    #[test]
    fn matches_clipping_oracle() {
        let mesh = disk(0.08, Geometry::SphereStereographic);
        assert!(mesh.triangles().len() >= 1000);
        for (seed, signed) in [(1, false), (2, true)] {
            let f = random_field(&mesh, seed, signed);
            let d = distribution_function(&f);
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed + 10);
            for _ in 0..1000 {
                let t: f64 = rng.gen_range(0.0..1.0);
                let oracle = clipped_measure(&f, t);
                assert!((d.eval(t) - oracle).abs() <= 1e-12 * d.total(), "t={t}: {} vs {oracle}", d.eval(t));
            }
        }
    }

    #[test]
    fn matches_monte_carlo() {
        let mesh = disk(0.15, Geometry::Flat);
        let f = random_field(&mesh, 5, false);
        let d = distribution_function(&f);
        let weights: Vec<f64> = (0..mesh.triangles().len()).map(|t| mesh.triangle_measure(t)).collect();
        let dist = rand::distributions::WeightedIndex::new(&weights).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        let n = 1_000_000;
        let samples: Vec<f64> = (0..n)
            .map(|_| {
                let t = rng.sample(&dist);
                let (mut a, mut b): (f64, f64) = (rng.gen(), rng.gen());
                if a + b > 1.0 {
                    a = 1.0 - a;
                    b = 1.0 - b;
                }
                let tri = mesh.triangles()[t];
                let v = f.values();
                (1.0 - a - b) * v[tri[0]] + a * v[tri[1]] + b * v[tri[2]]
            })
            .collect();
        for k in 1..=20 {
            let t = k as f64 / 21.0;
            let frac = samples.iter().filter(|&&x| x > t).count() as f64 / n as f64;
            let se = (frac * (1.0 - frac) / n as f64).sqrt() * d.total();
            assert!((d.eval(t) - frac * d.total()).abs() <= 3.0 * se + 1e-12, "t={t}");
        }
    }

    #[test]
    fn equimeasurable_moments_and_layer_cake() {
        let mesh = disk(0.1, Geometry::SphereStereographic);
        let f = random_field(&mesh, 3, true);
        let d = distribution_function(&f);
        for p in [1u32, 2, 3, 4] {
            let direct = f.power_integral(p);
            assert!((d.moment(p as f64).unwrap() / direct - 1.0).abs() < 1e-10, "p={p}");
        }
        let pos = random_field(&mesh, 4, false);
        let dp = distribution_function(&pos);
        assert!((dp.tail_integral(0.0) / pos.integral() - 1.0).abs() < 1e-9);
        assert!((dp.hstar_integral(dp.total()).unwrap() / pos.integral() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn schwarz_preserves_lp_norms() {
        let mesh = disk(0.1, Geometry::SphereStereographic);
        let f = random_field(&mesh, 8, false);
        let d = distribution_function(&f);
        let space = ModelSpace::round_sphere();
        let big_r = space.radius_for_volume(d.total()).unwrap();
        for p in [1u32, 2, 4] {
            // ∫ (h♯)^p dV over the weighted ball, integrated in r
            let cuts: Vec<f64> = d
                .levels()
                .iter()
                .map(|&t| space.radius_for_volume(d.eval(t)).unwrap())
                .chain([0.0, big_r])
                .collect();
            let cuts = dedup_levels(cuts);
            let mut sharp = 0.0;
            for w in cuts.windows(2) {
                sharp += quadrature::adaptive_smoothstep(
                    |r| d.schwarz_value(&space, r).unwrap().powi(p as i32) * space.volume_derivative(r),
                    w[0],
                    w[1],
                    1e-12,
                )
                .unwrap();
            }
            assert!((sharp / f.power_integral(p) - 1.0).abs() < 1e-8, "p={p}");
        }
    }

    #[test]
    fn lorentz_p_equals_q_is_lp() {
        let mesh = disk(0.1, Geometry::Flat);
        let f = random_field(&mesh, 12, true);
        let d = distribution_function(&f);
        for p in [1u32, 2, 3] {
            let l = lorentz_norm(&d, LorentzParams::new(p as f64, p as f64).unwrap()).unwrap();
            assert!((l / f.lp_norm(p) - 1.0).abs() < 1e-8);
        }
        // generic exponents go through adaptive quadrature; q = p still gives L^p
        let l = lorentz_norm(&d, LorentzParams::new(1.5, 1.5).unwrap()).unwrap();
        let direct = d.moment(1.5).unwrap().powf(1.0 / 1.5);
        assert!((l / direct - 1.0).abs() < 1e-8);
    }

    #[test]
    fn hardy_littlewood_examples() {
        let mesh = disk(0.15, Geometry::Flat);
        let f = random_field(&mesh, 21, false);
        let (lhs, rhs) = hardy_littlewood_check(&f, &f).unwrap();
        assert!((lhs / rhs - 1.0).abs() < 1e-8);
        // a steep ramp approximating the indicator of {u > t}
        let u = ScalarField::from_fn(mesh.clone(), |p| 1.0 - p[0] * p[0] - p[1] * p[1] + 0.3 * p[0]).unwrap();
        let t = 0.6;
        let ind = ScalarField::from_fn(mesh.clone(), |p| {
            let v = 1.0 - p[0] * p[0] - p[1] * p[1] + 0.3 * p[0];
            ((v - t) * 50.0).clamp(0.0, 1.0)
        })
        .unwrap();
        let (lhs, rhs) = hardy_littlewood_check(&f, &ind).unwrap();
        assert!(rhs - lhs >= -1e-9);
        let other = disk(0.2, Geometry::Flat);
        let g = ScalarField::constant(other, 1.0);
        assert!(hardy_littlewood_check(&u, &g).is_err());
    }

    #[test]
    fn hardy_littlewood_monte_carlo_cross_check() {
        let mesh = disk(0.2, Geometry::Flat);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(77);
        for seed in 0..5 {
            let f = random_field(&mesh, 100 + seed, false);
            let g = random_field(&mesh, 200 + seed, false);
            let (lhs, _) = hardy_littlewood_check(&f, &g).unwrap();
            let weights: Vec<f64> = (0..mesh.triangles().len()).map(|t| mesh.triangle_measure(t)).collect();
            let dist = rand::distributions::WeightedIndex::new(&weights).unwrap();
            let n = 200_000;
            let mut acc = 0.0;
            let mut acc2 = 0.0;
            for _ in 0..n {
                let t = rng.sample(&dist);
                let (mut a, mut b): (f64, f64) = (rng.gen(), rng.gen());
                if a + b > 1.0 {
                    a = 1.0 - a;
                    b = 1.0 - b;
                }
                let tri = mesh.triangles()[t];
                let at = |v: &[f64]| (1.0 - a - b) * v[tri[0]] + a * v[tri[1]] + b * v[tri[2]];
                let x = at(f.values()) * at(g.values());
                acc += x;
                acc2 += x * x;
            }
            let mean = acc / n as f64;
            let se = ((acc2 / n as f64 - mean * mean) / n as f64).sqrt();
            let total = mesh.total_measure();
            assert!((lhs - mean * total).abs() <= 4.0 * se * total, "seed {seed}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn hardy_littlewood_holds(seed in 0u64..1_000_000) {
            let mesh = disk(0.3, Geometry::Flat);
            let f = random_field(&mesh, seed, true);
            let g = random_field(&mesh, seed ^ 0xabcdef, false);
            let (lhs, rhs) = hardy_littlewood_check(&f, &g).unwrap();
            prop_assert!(lhs <= rhs + 1e-9);
        }

        #[test]
        fn distribution_is_monotone(seed in 0u64..1_000_000) {
            let mesh = square(0.25);
            let f = random_field(&mesh, seed, true);
            let d = distribution_function(&f);
            let mut prev = d.total();
            for k in 0..=200 {
                let t = k as f64 / 200.0;
                let v = d.eval(t);
                prop_assert!(v <= prev + 1e-12 * d.total());
                prev = v;
            }
            prop_assert_eq!(d.eval(1.0), 0.0);
        }

        #[test]
        fn lorentz_norm_is_monotone(seed in 0u64..1_000_000, p in 0.3f64..3.0, q in prop::sample::select(vec![1.0, 2.0, 3.0])) {
            let mesh = square(0.25);
            let f = random_field(&mesh, seed, false);
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed + 1);
            let g = ScalarField::new(mesh.clone(), f.values().iter().map(|v| v + rng.gen_range(0.0..0.3)).collect()).unwrap();
            let params = LorentzParams::new(p, q).unwrap();
            let lf = lorentz_norm(&distribution_function(&f), params).unwrap();
            let lg = lorentz_norm(&distribution_function(&g), params).unwrap();
            prop_assert!(lf <= lg + 1e-9);
        }
    }
}
