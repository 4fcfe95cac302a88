//! Radial problems on geodesic balls: the symmetrized Robin Poisson problem
//! and the radial Robin eigenvalue problem, in any dimension.

use std::io::Write;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::{Curvature, GeodesicBall};
use crate::quadrature;
use crate::rearrange::DistributionData;

/// Default number of grid intervals on `[0, R]`.
pub const DEFAULT_INTERVALS: usize = 4096;

/// A function of the geodesic radius sampled on `0 = r_0 < … < r_m = R`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialProfile {
    ball: GeodesicBall,
    grid: Vec<f64>,
    values: Vec<f64>,
}

impl RadialProfile {
    pub fn new(ball: GeodesicBall, grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if grid.len() < 65 || grid.len() != values.len() {
            return Err(Error::Invariant {
                check: "radial_grid_size",
                index: grid.len(),
                detail: format!("need >= 65 grid points and matching values, got {} / {}", grid.len(), values.len()),
            });
        }
        if grid[0] != 0.0 || (grid[grid.len() - 1] - ball.radius).abs() > 1e-12 * ball.radius {
            return Err(Error::Invariant {
                check: "radial_grid_span",
                index: 0,
                detail: format!("grid must span [0, {}]", ball.radius),
            });
        }
        if let Some(i) = grid.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::Invariant {
                check: "radial_grid_increasing",
                index: i,
                detail: format!("{} then {}", grid[i], grid[i + 1]),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Invariant {
                check: "radial_values_finite",
                index: i,
                detail: format!("{}", values[i]),
            });
        }
        Ok(RadialProfile { ball, grid, values })
    }

    pub fn ball(&self) -> &GeodesicBall {
        &self.ball
    }

    pub fn radius(&self) -> f64 {
        self.ball.radius
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Value at `r = R`.
    pub fn boundary_value(&self) -> f64 {
        *self.values.last().unwrap()
    }

    /// Linear interpolation, clamped to `[0, R]`.
    pub fn eval(&self, r: f64) -> f64 {
        let n = self.grid.len();
        if r <= 0.0 {
            return self.values[0];
        }
        if r >= self.grid[n - 1] {
            return self.values[n - 1];
        }
        let i = self.grid.partition_point(|&g| g <= r) - 1;
        let s = (r - self.grid[i]) / (self.grid[i + 1] - self.grid[i]);
        self.values[i] + s * (self.values[i + 1] - self.values[i])
    }

    /// Whether the values never increase by more than `slack` relative to the peak.
    pub fn is_non_increasing(&self, slack: f64) -> bool {
        let scale = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        self.values.windows(2).all(|w| w[1] <= w[0] + slack * scale)
    }

    /// `∫_{B_R} v dV` with the α-weighted volume element, by composite Simpson.
    pub fn weighted_integral(&self) -> f64 {
        let space = &self.ball.space;
        let f: Vec<f64> = self.grid.iter().zip(&self.values).map(|(&r, &v)| v * space.volume_derivative(r)).collect();
        let mut sum = 0.0;
        let n = self.grid.len() - 1;
        let mut i = 0;
        while i + 2 <= n {
            let h = self.grid[i + 2] - self.grid[i];
            sum += h / 6.0 * (f[i] + 4.0 * f[i + 1] + f[i + 2]);
            i += 2;
        }
        if i < n {
            sum += 0.5 * (self.grid[n] - self.grid[i]) * (f[i] + f[n]);
        }
        sum
    }

    /// CSV with columns `(r, value)`.
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "r,value")?;
        for (r, v) in self.grid.iter().zip(&self.values) {
            writeln!(w, "{r},{v}")?;
        }
        Ok(())
    }
}

fn uniform_grid(radius: f64, intervals: usize) -> Vec<f64> {
    (0..=intervals)
        .map(|i| if i == intervals { radius } else { radius * i as f64 / intervals as f64 })
        .collect()
}

/// The symmetrized source `f♯ ≥ 0`, non-increasing in `r`.
#[derive(Debug, Clone)]
pub enum RadialSource {
    Constant(f64),
    /// Linear interpolation of samples `(r_i, f_i)` starting at `r = 0`.
    Samples { grid: Vec<f64>, values: Vec<f64> },
    /// `f♯(r) = f*(I(r))` for a rearranged mesh field.
    Rearranged(Arc<DistributionData>),
}

impl RadialSource {
    pub fn constant(c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::Domain(format!("constant source must be positive, got {c}")));
        }
        Ok(RadialSource::Constant(c))
    }

    pub fn samples(grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if grid.len() < 2 || grid.len() != values.len() || grid[0] != 0.0 {
            return Err(Error::Domain("radial source samples must start at r = 0 with matching lengths".into()));
        }
        if let Some(i) = grid.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::Invariant {
                check: "source_grid_increasing",
                index: i,
                detail: format!("{} then {}", grid[i], grid[i + 1]),
            });
        }
        if let Some(i) = values.iter().position(|&v| !(v >= 0.0 && v.is_finite())) {
            return Err(Error::Invariant {
                check: "source_nonnegative",
                index: i,
                detail: format!("{}", values[i]),
            });
        }
        if let Some(i) = values.windows(2).position(|w| w[1] > w[0] * (1.0 + 1e-12)) {
            return Err(Error::Invariant {
                check: "source_non_increasing",
                index: i + 1,
                detail: format!("{} then {}", values[i], values[i + 1]),
            });
        }
        Ok(RadialSource::Samples { grid, values })
    }

    pub fn rearranged(dist: DistributionData) -> Self {
        RadialSource::Rearranged(Arc::new(dist))
    }

    /// `f♯(r)`.
    pub fn eval(&self, ball: &GeodesicBall, r: f64) -> f64 {
        match self {
            RadialSource::Constant(c) => *c,
            RadialSource::Samples { grid, values } => interp(grid, values, r),
            RadialSource::Rearranged(d) => {
                let s = ball.space.volume_profile(r.clamp(0.0, ball.radius)).unwrap_or(d.total());
                d.hstar(s.min(d.total())).unwrap_or(0.0)
            }
        }
    }

    /// `∫_0^r f♯(s) A(s) ds` with `A` the un-weighted sphere area.
    fn cumulative(&self, ball: &GeodesicBall, r: f64, prefix: &[f64]) -> f64 {
        let space = &ball.space;
        match self {
            RadialSource::Constant(c) => c * space.volume_profile(r).unwrap_or(0.0) / space.alpha(),
            RadialSource::Rearranged(d) => {
                let s = space.volume_profile(r).unwrap_or(d.total()).min(d.total());
                d.hstar_integral(s).unwrap_or(0.0) / space.alpha()
            }
            RadialSource::Samples { grid, values } => {
                let n = grid.len();
                let k = grid.partition_point(|&g| g <= r).clamp(1, n) - 1;
                let end = r.min(grid[n - 1]);
                let mut acc = prefix[k];
                if end > grid[k] {
                    acc += quadrature::gauss8(|s| interp(grid, values, s) * space.sphere_area(s), grid[k], end);
                }
                if r > grid[n - 1] {
                    acc += quadrature::gauss8(|s| values[n - 1] * space.sphere_area(s), grid[n - 1], r);
                }
                acc
            }
        }
    }

    fn prefix(&self, ball: &GeodesicBall) -> Vec<f64> {
        match self {
            RadialSource::Samples { grid, values } => {
                let mut acc = vec![0.0; grid.len()];
                for i in 1..grid.len() {
                    acc[i] = acc[i - 1]
                        + quadrature::gauss8(|s| interp(grid, values, s) * ball.space.sphere_area(s), grid[i - 1], grid[i]);
                }
                acc
            }
            _ => Vec::new(),
        }
    }
}

fn interp(grid: &[f64], values: &[f64], r: f64) -> f64 {
    let n = grid.len();
    if r <= grid[0] {
        return values[0];
    }
    if r >= grid[n - 1] {
        return values[n - 1];
    }
    let i = grid.partition_point(|&g| g <= r) - 1;
    let s = (r - grid[i]) / (grid[i + 1] - grid[i]);
    values[i] + s * (values[i + 1] - values[i])
}

/// Solves `-Δ v = f♯` on the ball with `v' + βv = 0` at `r = R` on the default grid.
pub fn solve_symmetrized_poisson(ball: &GeodesicBall, beta: f64, source: &RadialSource) -> Result<RadialProfile> {
    solve_symmetrized_poisson_with(ball, beta, source, DEFAULT_INTERVALS)
}

/// As [`solve_symmetrized_poisson`] with `intervals` grid cells.
///
/// `v'(r) = -F(r)/A(r)` with `F(r) = ∫_0^r f♯ A`, `v(R) = F(R)/(βA(R))`, and
/// `v(r) = v(R) + ∫_r^R F/A` by composite Simpson, doubling the sub-cells per
/// grid cell until successive results agree to 1e-10 relative.
pub fn solve_symmetrized_poisson_with(
    ball: &GeodesicBall,
    beta: f64,
    source: &RadialSource,
    intervals: usize,
) -> Result<RadialProfile> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::Domain(format!("beta must be positive, got {beta}")));
    }
    let space = ball.space;
    let big_r = ball.radius;
    let a_r = space.sphere_area(big_r);
    if !(a_r > 1e-300) {
        return Err(Error::DegenerateGeometry("the ball boundary has zero area".into()));
    }
    let prefix = source.prefix(ball);
    let flux = |r: f64| -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        source.cumulative(ball, r, &prefix) / space.sphere_area(r)
    };
    let v_r = source.cumulative(ball, big_r, &prefix) / (beta * a_r);
    let mut intervals = intervals.max(64);
    for _attempt in 0..4 {
        let grid = uniform_grid(big_r, intervals);
        let nodes: Vec<f64> = grid.iter().map(|&r| flux(r)).collect();
        let mut previous: Option<Vec<f64>> = None;
        let mut sub = 1usize;
        let values = loop {
            let cells: Vec<f64> = (0..intervals)
                .map(|i| {
                    let (a, b) = (grid[i], grid[i + 1]);
                    let h = (b - a) / sub as f64;
                    let mut s = 0.0;
                    for k in 0..sub {
                        let x0 = a + k as f64 * h;
                        let f0 = if k == 0 { nodes[i] } else { flux(x0) };
                        let f1 = if k + 1 == sub { nodes[i + 1] } else { flux(x0 + h) };
                        s += h / 6.0 * (f0 + 4.0 * flux(x0 + 0.5 * h) + f1);
                    }
                    s
                })
                .collect();
            let mut v = vec![0.0; intervals + 1];
            v[intervals] = v_r;
            for i in (0..intervals).rev() {
                v[i] = v[i + 1] + cells[i];
            }
            if let Some(prev) = &previous {
                let scale = v[0].abs().max(f64::MIN_POSITIVE);
                let change = v.iter().zip(prev).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                if change <= 1e-10 * scale {
                    break v;
                }
            }
            if sub >= 1 << 12 {
                return Err(Error::NonConvergence(
                    "Simpson refinement of the radial solution did not settle".into(),
                ));
            }
            previous = Some(v);
            sub *= 2;
        };
        let profile = RadialProfile::new(*ball, grid, values)?;
        if profile.is_non_increasing(1e-12) {
            return Ok(profile);
        }
        log::warn!("radial solution not monotone on {intervals} intervals; refining");
        intervals *= 2;
    }
    Err(Error::Invariant {
        check: "radial_non_increasing",
        index: intervals,
        detail: "symmetrized solution is not non-increasing after grid refinement".into(),
    })
}

/// Bisection tolerance on the radial eigenvalue.
pub const EIGEN_BISECTION_TOLERANCE: f64 = 1e-10;

struct Shot {
    crossed: bool,
    boundary: f64,
    u: Vec<f64>,
}

fn shoot(ball: &GeodesicBall, lambda: f64, beta: f64, intervals: usize, keep: bool) -> Shot {
    let n = ball.space.dim() as f64;
    let big_r = ball.radius;
    let sphere = ball.space.curvature() == Curvature::Sphere;
    let coef = |r: f64| if sphere { (n - 1.0) / r.tan() } else { (n - 1.0) / r };
    let rhs = |r: f64, u: f64, w: f64| (w, -coef(r) * w - lambda * u);
    let rk4 = |r: f64, u: f64, w: f64, h: f64| {
        let (k1u, k1w) = rhs(r, u, w);
        let (k2u, k2w) = rhs(r + 0.5 * h, u + 0.5 * h * k1u, w + 0.5 * h * k1w);
        let (k3u, k3w) = rhs(r + 0.5 * h, u + 0.5 * h * k2u, w + 0.5 * h * k2w);
        let (k4u, k4w) = rhs(r + h, u + h * k3u, w + h * k3w);
        (
            u + h / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u),
            w + h / 6.0 * (k1w + 2.0 * k2w + 2.0 * k3w + k4w),
        )
    };
    let h = big_r / intervals as f64;
    let eps = big_r * 1e-8;
    // series start u ≈ 1 - λr²/(2n)
    let mut u = 1.0 - lambda * eps * eps / (2.0 * n);
    let mut w = -lambda * eps / n;
    let mut values = if keep { Vec::with_capacity(intervals + 1) } else { Vec::new() };
    if keep {
        values.push(1.0);
    }
    (u, w) = rk4(eps, u, w, h - eps);
    let mut crossed = u <= 0.0;
    if keep {
        values.push(u);
    }
    for i in 1..intervals {
        (u, w) = rk4(i as f64 * h, u, w, h);
        crossed |= u <= 0.0;
        if keep {
            values.push(u);
        }
    }
    Shot { crossed, boundary: w + beta * u, u: values }
}

/// First Robin eigenpair on a geodesic ball by shooting: returns `λ` and `u₀`
/// with `u₀(0) = 1`.
pub fn solve_radial_eigen(ball: &GeodesicBall, beta: f64) -> Result<(f64, RadialProfile)> {
    solve_radial_eigen_with(ball, beta, DEFAULT_INTERVALS)
}

pub fn solve_radial_eigen_with(ball: &GeodesicBall, beta: f64, intervals: usize) -> Result<(f64, RadialProfile)> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::Domain(format!("beta must be positive, got {beta}")));
    }
    if ball.space.curvature() == Curvature::Sphere && ball.radius >= std::f64::consts::PI - 1e-3 {
        return Err(Error::Domain(format!(
            "spherical caps with radius >= π - 1e-3 are not supported, got {}",
            ball.radius
        )));
    }
    let above = |lambda: f64| {
        let s = shoot(ball, lambda, beta, intervals, false);
        s.crossed || s.boundary < 0.0
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    while !above(hi) {
        lo = hi;
        hi *= 2.0;
        if hi > (1u64 << 20) as f64 {
            return Err(Error::Bracket(format!("no sign change of the boundary functional below {hi}")));
        }
    }
    while hi - lo > EIGEN_BISECTION_TOLERANCE.max(1e-15 * hi) {
        let mid = 0.5 * (lo + hi);
        if above(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let lambda = 0.5 * (lo + hi);
    let shot = shoot(ball, lo, beta, intervals, true);
    if shot.u.iter().any(|&v| v <= 0.0) {
        return Err(Error::SignChange("radial ground state is not positive".into()));
    }
    let profile = RadialProfile::new(*ball, uniform_grid(ball.radius, intervals), shot.u)?;
    Ok((lambda, profile))
}

/// `(ln u₀)'` on the profile grid by second-order finite differences.
pub fn log_derivative_profile(profile: &RadialProfile) -> Result<RadialProfile> {
    let u = profile.values();
    let r = profile.grid();
    if let Some(i) = u.iter().position(|&v| !(v > 0.0)) {
        return Err(Error::Domain(format!("profile is not positive at r = {}", r[i])));
    }
    let n = u.len();
    let mut d = vec![0.0; n];
    let (h0, h1) = (r[1] - r[0], r[n - 1] - r[n - 2]);
    d[0] = (-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * h0);
    d[n - 1] = (3.0 * u[n - 1] - 4.0 * u[n - 2] + u[n - 3]) / (2.0 * h1);
    for i in 1..n - 1 {
        d[i] = (u[i + 1] - u[i - 1]) / (r[i + 1] - r[i - 1]);
    }
    let values: Vec<f64> = d.iter().zip(u).map(|(d, u)| d / u).collect();
    if values.windows(2).skip(1).any(|w| w[1] >= w[0]) {
        log::warn!("log-derivative profile is not strictly decreasing");
    }
    RadialProfile::new(*profile.ball(), r.to_vec(), values)
}

/// Weighted distribution `I(v⁻¹(t))` of a non-increasing, non-negative profile.
///
/// Between grid values the profile is linear in `r`; each interval of the
/// distribution is the quadratic through the endpoint and midpoint values.
pub fn radial_distribution(profile: &RadialProfile) -> Result<DistributionData> {
    let v = profile.values();
    let r = profile.grid();
    let space = profile.ball().space;
    let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if let Some(i) = v.windows(2).position(|w| w[1] > w[0] + 1e-12 * scale) {
        return Err(Error::Invariant {
            check: "profile_non_increasing",
            index: i + 1,
            detail: format!("{} then {}", v[i], v[i + 1]),
        });
    }
    if v[v.len() - 1] < 0.0 {
        return Err(Error::Domain("radial distribution needs a non-negative profile".into()));
    }
    let vol = |x: f64| space.volume_profile(x.clamp(0.0, space.max_radius()));
    let mut levels = vec![v[v.len() - 1]];
    let mut pieces = Vec::new();
    for i in (0..v.len() - 1).rev() {
        let (hi, lo) = (v[i], v[i + 1]);
        let last = *levels.last().unwrap();
        if hi <= last {
            continue;
        }
        // t ∈ [last, hi): radius on the segment where v = t
        let width = hi - last;
        let radius_at = |t: f64| {
            if hi > lo {
                r[i] + (hi - t) / (hi - lo) * (r[i + 1] - r[i])
            } else {
                r[i]
            }
        };
        let y0 = vol(radius_at(last))?;
        let y1 = vol(radius_at(last + 0.5 * width))?;
        let y2 = vol(r[i])?;
        let c2 = 2.0 * (y0 - 2.0 * y1 + y2) / (width * width);
        let c1 = (4.0 * y1 - 3.0 * y0 - y2) / width;
        pieces.push([y0, c1, c2]);
        levels.push(hi);
    }
    let total = vol(profile.radius())?;
    DistributionData::from_parts(levels, pieces, total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ModelSpace;
    use std::f64::consts::PI;

    fn ball(k: Curvature, n: u32, r: f64) -> GeodesicBall {
        GeodesicBall::new(ModelSpace::new(k, n, 1.0).unwrap(), r).unwrap()
    }

    fn bessel_j(order: u32, x: f64) -> f64 {
        let mut term = (0.5 * x).powi(order as i32) / (1..=order).map(|k| k as f64).product::<f64>();
        let mut sum = 0.0;
        for k in 0..60 {
            sum += term;
            term *= -(0.25 * x * x) / ((k + 1) as f64 * (k + 1 + order) as f64);
        }
        sum
    }

    fn bisect(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if (f(a) > 0.0) == (f(m) > 0.0) {
                a = m;
            } else {
                b = m;
            }
        }
        0.5 * (a + b)
    }

    #[test]
    fn torsion_closed_form_any_dimension() {
        for n in 2..=5u32 {
            for beta in [0.5, 1.0, 7.0] {
                let b = ball(Curvature::Flat, n, 1.3);
                let v = solve_symmetrized_poisson(&b, beta, &RadialSource::constant(1.0).unwrap()).unwrap();
                let nf = n as f64;
                for (r, val) in v.grid().iter().zip(v.values()) {
                    let exact = (1.3 * 1.3 - r * r) / (2.0 * nf) + 1.3 / (nf * beta);
                    assert!((val - exact).abs() < 1e-12, "n={n} r={r}");
                }
            }
        }
        let b = ball(Curvature::Flat, 2, 1.0);
        let v = solve_symmetrized_poisson(&b, 1.0, &RadialSource::constant(1.0).unwrap()).unwrap();
        assert!((v.values()[0] - 0.75).abs() < 1e-13 && (v.boundary_value() - 0.5).abs() < 1e-13);
    }

    #[test]
    fn cap_torsion_residuals() {
        let b = ball(Curvature::Sphere, 2, PI / 2.0);
        let beta = 1.0;
        let v = solve_symmetrized_poisson(&b, beta, &RadialSource::constant(1.0).unwrap()).unwrap();
        let (r, u) = (v.grid(), v.values());
        let a = |x: f64| b.space.sphere_area(x);
        let h = r[1] - r[0];
        for i in 1..r.len() - 1 {
            let flux_r = a(r[i] + 0.5 * h) * (u[i + 1] - u[i]) / h;
            let flux_l = a(r[i] - 0.5 * h) * (u[i] - u[i - 1]) / h;
            let res = (flux_r - flux_l) / (h * a(r[i])) + 1.0;
            assert!(res.abs() < 1e-8, "r={} residual {res}", r[i]);
        }
        // exact boundary slope: v'(R) = -tan(R/2)
        let n = r.len() - 1;
        let slope = (3.0 * u[n] - 4.0 * u[n - 1] + u[n - 2]) / (2.0 * h);
        assert!((slope + beta * u[n]).abs() < 1e-6);
        assert!((-(PI / 4.0).tan() + beta * u[n]).abs() < 1e-12);
    }

    #[test]
    fn sampled_source_matches_rearranged_constant() {
        let b = ball(Curvature::Flat, 2, 1.0);
        let grid: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
        let vals: Vec<f64> = grid.iter().map(|r| 2.0 - r).collect();
        let src = RadialSource::samples(grid, vals).unwrap();
        let v = solve_symmetrized_poisson(&b, 2.0, &src).unwrap();
        // F(r) = 2π(r² - r³/3), v' = -(r - r²/3), v(1) = 2π(2/3)/(2·2π)
        for (r, val) in v.grid().iter().zip(v.values()) {
            let exact = 1.0 / 3.0 + (0.5 - 1.0 / 9.0) - (r * r / 2.0 - r * r * r / 9.0);
            assert!((val - exact).abs() < 1e-12, "r={r}");
        }
        assert!(RadialSource::samples(vec![0.0, 1.0], vec![1.0, 2.0]).is_err());
        assert!(RadialSource::samples(vec![0.0, 1.0], vec![1.0, -1.0]).is_err());
    }

    #[test]
    fn dirichlet_and_robin_disk_eigenvalues() {
        let j0 = bisect(|x| bessel_j(0, x), 2.0, 3.0);
        let b = ball(Curvature::Flat, 2, 1.0);
        let (l, _) = solve_radial_eigen(&b, 1e6).unwrap();
        assert!((l - j0 * j0).abs() < 1e-3, "{l}");
        let k = bisect(|x| x * bessel_j(1, x) - bessel_j(0, x), 0.5, 2.0);
        let (l, prof) = solve_radial_eigen(&b, 1.0).unwrap();
        assert!((l - k * k).abs() < 1e-8, "{l} vs {}", k * k);
        assert_eq!(prof.values()[0], 1.0);
        let (l2, _) = solve_radial_eigen(&ball(Curvature::Flat, 2, 2.0), 1.0).unwrap();
        assert!(l > l2);
    }

    #[test]
    fn three_dimensional_robin_ball() {
        // n = 3: u = sin(kr)/(kr); Robin condition k cot k - 1 + β = 0 on the unit ball
        let beta = 2.0;
        let k = bisect(|x| x / x.tan() - 1.0 + beta, 0.1, 3.1);
        let (l, _) = solve_radial_eigen(&ball(Curvature::Flat, 3, 1.0), beta).unwrap();
        assert!((l - k * k).abs() < 1e-8);
    }

    #[test]
    fn log_derivative_claims() {
        let beta = 1.5;
        let (_, u) = solve_radial_eigen(&ball(Curvature::Flat, 2, 1.0), beta).unwrap();
        let v = log_derivative_profile(&u).unwrap();
        assert!(v.values()[0].abs() < 1e-6);
        let vals = v.values();
        assert!(vals.windows(2).all(|w| w[1] < w[0]));
        let n = vals.len();
        assert!(vals[..n - 1].iter().all(|&x| -x < beta));
        assert!((-vals[n - 1] - beta).abs() < 1e-6);
        let (_, uc) = solve_radial_eigen(&ball(Curvature::Sphere, 2, 1.2), beta).unwrap();
        let vc = log_derivative_profile(&uc).unwrap();
        assert!(vc.values().windows(2).all(|w| w[1] < w[0]));
        assert!(solve_radial_eigen(&ball(Curvature::Sphere, 2, PI - 1e-4), 1.0).is_err());
    }

    #[test]
    fn radial_distribution_of_torsion() {
        let b = ball(Curvature::Flat, 2, 1.0);
        let v = solve_symmetrized_poisson(&b, 1.0, &RadialSource::constant(1.0).unwrap()).unwrap();
        let d = radial_distribution(&v).unwrap();
        for (r, val) in v.grid().iter().zip(v.values()).skip(1) {
            assert!((d.eval(*val) - PI * r * r).abs() < 1e-9, "r={r}");
        }
        assert!((d.eval(0.4999) - PI).abs() < 1e-12);
        assert_eq!(d.eval(0.75), 0.0);
        assert_eq!(d.eval(0.8), 0.0);
        // linear interpolation in r makes each piece exact for n = 2, κ = 0
        let t: f64 = 0.6123;
        let r = (1.0 - 4.0 * (t - 0.5)).sqrt();
        assert!((d.eval(t) - PI * r * r).abs() < 1e-7);
    }

    #[test]
    fn radial_distribution_rejects_increasing_profile() {
        let b = ball(Curvature::Flat, 2, 1.0);
        let grid = uniform_grid(1.0, 64);
        let vals: Vec<f64> = grid.iter().map(|r| r * r).collect();
        let p = RadialProfile::new(b, grid, vals).unwrap();
        assert!(radial_distribution(&p).is_err());
    }
}
