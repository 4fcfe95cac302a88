//! Model spaces (Euclidean space and the round sphere, scaled by an
//! isoperimetric constant) and their radial profile functions.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature;

/// Sign of the lower Ricci bound of the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Curvature {
    /// Euclidean space, κ = 0.
    Flat,
    /// Unit sphere, κ = 1.
    Sphere,
}

impl Curvature {
    pub fn kappa(self) -> u8 {
        match self {
            Curvature::Flat => 0,
            Curvature::Sphere => 1,
        }
    }
}

#[derive(Deserialize, Serialize)]
struct RawSpace {
    kappa: u8,
    n: u32,
    alpha: f64,
}

/// Model geometry: curvature, dimension and isoperimetric constant α.
///
/// All model-side volumes are reported α-weighted, so a domain of measure
/// `|Ω|` is matched by the ball whose radius solves `I(R) = |Ω|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpace", into = "RawSpace")]
pub struct ModelSpace {
    curvature: Curvature,
    n: u32,
    alpha: f64,
    omega_n: f64,
}

impl TryFrom<RawSpace> for ModelSpace {
    type Error = Error;
    fn try_from(raw: RawSpace) -> Result<Self> {
        let curvature = match raw.kappa {
            0 => Curvature::Flat,
            1 => Curvature::Sphere,
            k => return Err(Error::Domain(format!("kappa must be 0 or 1, got {k}"))),
        };
        ModelSpace::new(curvature, raw.n, raw.alpha)
    }
}

impl From<ModelSpace> for RawSpace {
    fn from(s: ModelSpace) -> Self {
        RawSpace {
            kappa: s.curvature.kappa(),
            n: s.n,
            alpha: s.alpha,
        }
    }
}

/// Volume of the Euclidean unit ball in dimension `n`.
pub fn unit_ball_volume(n: u32) -> f64 {
    // ω_n = ω_{n-2} · 2π / n, with ω_0 = 1 and ω_1 = 2
    let mut w = if n % 2 == 0 { 1.0 } else { 2.0 };
    let mut k = if n % 2 == 0 { 2 } else { 3 };
    while k <= n {
        w *= 2.0 * PI / k as f64;
        k += 2;
    }
    w
}

impl ModelSpace {
    pub fn new(curvature: Curvature, n: u32, alpha: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::Domain(format!("dimension must be >= 2, got {n}")));
        }
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::Domain(format!("alpha must lie in (0, 1], got {alpha}")));
        }
        Ok(ModelSpace {
            curvature,
            n,
            alpha,
            omega_n: unit_ball_volume(n),
        })
    }

    /// The Euclidean plane with α = 1.
    pub fn euclidean_plane() -> Self {
        ModelSpace::new(Curvature::Flat, 2, 1.0).unwrap()
    }

    /// The round 2-sphere with α = 1.
    pub fn round_sphere() -> Self {
        ModelSpace::new(Curvature::Sphere, 2, 1.0).unwrap()
    }

    pub fn curvature(&self) -> Curvature {
        self.curvature
    }

    pub fn kappa(&self) -> u8 {
        self.curvature.kappa()
    }

    pub fn dim(&self) -> u32 {
        self.n
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn omega_n(&self) -> f64 {
        self.omega_n
    }

    /// Largest admissible geodesic radius (∞ for the flat model).
    pub fn max_radius(&self) -> f64 {
        match self.curvature {
            Curvature::Flat => f64::INFINITY,
            Curvature::Sphere => PI,
        }
    }

    /// Largest admissible weighted volume, `I(π)` on the sphere.
    pub fn max_volume(&self) -> f64 {
        match self.curvature {
            Curvature::Flat => f64::INFINITY,
            Curvature::Sphere => self.volume_profile_unchecked(PI),
        }
    }

    fn check_radius(&self, r: f64) -> Result<()> {
        if !(r >= 0.0) || r > self.max_radius() {
            return Err(Error::Domain(format!(
                "radius {r} outside [0, {}] for kappa={}",
                self.max_radius(),
                self.kappa()
            )));
        }
        Ok(())
    }

    /// `sn_κ(r)`: `r` on the flat model and `sin r` on the sphere.
    pub fn sn(&self, r: f64) -> Result<f64> {
        self.check_radius(r)?;
        Ok(self.sn_unchecked(r))
    }

    fn sn_unchecked(&self, r: f64) -> f64 {
        match self.curvature {
            Curvature::Flat => r,
            Curvature::Sphere => r.sin(),
        }
    }

    fn cs_unchecked(&self, r: f64) -> f64 {
        match self.curvature {
            Curvature::Flat => 1.0,
            Curvature::Sphere => r.cos(),
        }
    }

    /// Un-weighted area of the geodesic sphere of radius `r`, `nω_n sn^{n-1}(r)`.
    pub fn sphere_area(&self, r: f64) -> f64 {
        self.n as f64 * self.omega_n * self.sn_unchecked(r).powi(self.n as i32 - 1)
    }

    /// Weighted volume profile `I(r) = nω_n α ∫_0^r sn^{n-1}(s) ds`.
    pub fn volume_profile(&self, r: f64) -> Result<f64> {
        self.check_radius(r)?;
        Ok(self.volume_profile_unchecked(r))
    }

    fn volume_profile_unchecked(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        let c = self.n as f64 * self.omega_n * self.alpha;
        match (self.curvature, self.n) {
            (Curvature::Flat, n) => self.alpha * self.omega_n * r.powi(n as i32),
            (Curvature::Sphere, 2) => 2.0 * c * (0.5 * r).sin().powi(2),
            (Curvature::Sphere, 3) => 0.25 * c * x_minus_sin(2.0 * r),
            (Curvature::Sphere, n) => {
                let k = n as i32 - 1;
                c * quadrature::adaptive(|s: f64| s.sin().powi(k), 0.0, r, 1e-13)
                    .expect("smooth bounded integrand")
            }
        }
    }

    /// `I'(r) = nω_n α sn^{n-1}(r)`.
    pub fn volume_derivative(&self, r: f64) -> f64 {
        self.alpha * self.sphere_area(r)
    }

    /// `I''(r) = nω_n α (n-1) sn^{n-2}(r) cs(r)`.
    pub fn volume_second_derivative(&self, r: f64) -> f64 {
        let n = self.n as f64;
        n * self.omega_n
            * self.alpha
            * (n - 1.0)
            * self.sn_unchecked(r).powi(self.n as i32 - 2)
            * self.cs_unchecked(r)
    }

    /// Inverse of the volume profile: the radius whose weighted ball volume is `vol`.
    pub fn radius_for_volume(&self, vol: f64) -> Result<f64> {
        if !(vol >= 0.0) {
            return Err(Error::OutOfRange(format!("volume {vol} must be non-negative")));
        }
        if vol == 0.0 {
            return Ok(0.0);
        }
        match self.curvature {
            Curvature::Flat => Ok((vol / (self.alpha * self.omega_n)).powf(1.0 / self.n as f64)),
            Curvature::Sphere => {
                let vmax = self.max_volume();
                if vol > vmax * (1.0 + 1e-14) {
                    return Err(Error::OutOfRange(format!(
                        "volume {vol} exceeds the full-sphere volume {vmax}"
                    )));
                }
                if vol >= vmax {
                    return Ok(PI);
                }
                if self.n == 2 {
                    let s = (vol / (4.0 * PI * self.alpha)).sqrt();
                    return Ok(2.0 * s.min(1.0).asin());
                }
                self.invert_sphere_volume(vol, vmax)
            }
        }
    }

    fn invert_sphere_volume(&self, vol: f64, vmax: f64) -> Result<f64> {
        let near_end = vmax - vol <= 1e-6 * vmax;
        let (mut lo, mut hi) = (0.0_f64, PI);
        // initial guess from the small-ball asymptotics
        let mut r = (vol / (self.alpha * self.omega_n)).powf(1.0 / self.n as f64).min(PI * 0.5);
        if near_end {
            r = 0.5 * (lo + hi);
        }
        for _ in 0..200 {
            let g = self.volume_profile_unchecked(r) - vol;
            if g == 0.0 {
                return Ok(r);
            }
            if g > 0.0 {
                hi = r;
            } else {
                lo = r;
            }
            let d = self.volume_derivative(r);
            let newton = r - g / d;
            if !near_end && (g / d).abs() <= 1e-15 * r {
                return Ok(newton);
            }
            r = if !near_end && d > 0.0 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if hi - lo <= 1e-15 {
                return Ok(r);
            }
        }
        Ok(r)
    }

    /// Isoperimetric profile `G(l) = I'(I^{-1}(l))`: the weighted boundary
    /// measure of the model ball of weighted volume `l`.
    pub fn isoperimetric_profile(&self, l: f64) -> Result<f64> {
        if !(l >= 0.0) || l > self.max_volume() * (1.0 + 1e-14) {
            return Err(Error::Domain(format!("volume {l} outside the profile range")));
        }
        let r = self.radius_for_volume(l.min(self.max_volume()))?;
        Ok(self.volume_derivative(r))
    }
}

/// `x - sin x` without cancellation for small `x`.
fn x_minus_sin(x: f64) -> f64 {
    if x.abs() > 1.0 {
        return x - x.sin();
    }
    let x2 = x * x;
    let mut term = x * x2 / 6.0;
    let mut sum = 0.0_f64;
    let mut k = 3.0;
    while term.abs() > 1e-18 * sum.abs() || sum == 0.0 {
        sum += term;
        term *= -x2 / ((k + 1.0) * (k + 2.0));
        k += 2.0;
        if term == 0.0 {
            break;
        }
    }
    sum
}

/// A geodesic ball in a model space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeodesicBall {
    pub space: ModelSpace,
    pub radius: f64,
}

impl GeodesicBall {
    pub fn new(space: ModelSpace, radius: f64) -> Result<Self> {
        if !(radius > 0.0) || radius > space.max_radius() {
            return Err(Error::Domain(format!("ball radius {radius} is not admissible")));
        }
        Ok(GeodesicBall { space, radius })
    }

    /// Ball whose weighted volume equals `measure`.
    pub fn with_weighted_volume(space: ModelSpace, measure: f64) -> Result<Self> {
        let r = space.radius_for_volume(measure)?;
        GeodesicBall::new(space, r)
    }

    /// Un-weighted model volume `I(R)/α`.
    pub fn volume(&self) -> f64 {
        self.weighted_volume() / self.space.alpha()
    }

    /// Weighted volume `I(R)`.
    pub fn weighted_volume(&self) -> f64 {
        self.space.volume_profile_unchecked(self.radius)
    }

    /// Un-weighted boundary area.
    pub fn boundary_area(&self) -> f64 {
        self.space.sphere_area(self.radius)
    }
}
