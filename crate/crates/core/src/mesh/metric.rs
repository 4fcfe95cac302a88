//! Surface metrics carried by a chart triangulation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Curvature, ModelSpace};

/// Warping profiles for surfaces `dr² + ψ(r)² dθ²` with nonnegative Gauss
/// curvature and closed-form asymptotic volume ratio `lim ψ(r)/r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", content = "params", rename_all = "snake_case")]
pub enum WarpProfile {
    /// `ψ(r) = c r`, a flat cone with its tip at the chart origin.
    Cone { c: f64 },
    /// `ψ(r) = c r + (1 - c) tanh r`, smooth at the origin and asymptotic to the cone.
    SmoothCone { c: f64 },
}

impl WarpProfile {
    pub fn validate(&self) -> Result<()> {
        let c = match *self {
            WarpProfile::Cone { c } | WarpProfile::SmoothCone { c } => c,
        };
        if !(c > 0.0 && c <= 1.0) {
            return Err(Error::Domain(format!("warp parameter c must be in (0, 1], got {c}")));
        }
        Ok(())
    }

    pub fn psi(&self, r: f64) -> f64 {
        match *self {
            WarpProfile::Cone { c } => c * r,
            WarpProfile::SmoothCone { c } => c * r + (1.0 - c) * r.tanh(),
        }
    }

    pub fn dpsi(&self, r: f64) -> f64 {
        match *self {
            WarpProfile::Cone { c } => c,
            WarpProfile::SmoothCone { c } => {
                let s = 1.0 / r.cosh();
                c + (1.0 - c) * s * s
            }
        }
    }

    pub fn d2psi(&self, r: f64) -> f64 {
        match *self {
            WarpProfile::Cone { .. } => 0.0,
            WarpProfile::SmoothCone { c } => {
                let s = 1.0 / r.cosh();
                -2.0 * (1.0 - c) * s * s * r.tanh()
            }
        }
    }

    /// `ψ(r)/r`, with its limit at the origin.
    pub fn ratio(&self, r: f64) -> f64 {
        if r < 1e-8 {
            self.dpsi(0.0)
        } else {
            self.psi(r) / r
        }
    }

    /// Asymptotic volume ratio `lim_{r→∞} ψ(r)/r`.
    pub fn avr(&self) -> f64 {
        match *self {
            WarpProfile::Cone { c } | WarpProfile::SmoothCone { c } => c,
        }
    }

    /// Gauss curvature `-ψ''/ψ` away from the origin.
    pub fn gauss_curvature(&self, r: f64) -> f64 {
        -self.d2psi(r) / self.psi(r)
    }
}

/// Geometry tag of a chart mesh.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Geometry {
    Flat,
    /// Round unit sphere in the stereographic chart, area density `4/(1+|x|²)²`.
    SphereStereographic,
    /// Warped product in a polar chart, area density `ψ(r)/r`.
    Warped(WarpProfile),
}

/// Chart-radius cap for stereographic domains (keeps away from the antipode).
pub const STEREOGRAPHIC_CHART_CAP: f64 = 10.0;

impl Geometry {
    pub fn tag(&self) -> &'static str {
        match self {
            Geometry::Flat => "flat",
            Geometry::SphereStereographic => "sphere_stereographic",
            Geometry::Warped(_) => "warped",
        }
    }

    /// The model space the isoperimetric comparison refers to.
    pub fn model_space(&self) -> ModelSpace {
        match self {
            Geometry::Flat => ModelSpace::euclidean_plane(),
            Geometry::SphereStereographic => ModelSpace::round_sphere(),
            Geometry::Warped(w) => ModelSpace::new(Curvature::Flat, 2, w.avr()).expect("validated warp"),
        }
    }

    /// Area density `√det g` at a chart point.
    pub fn area_density(&self, p: [f64; 2]) -> f64 {
        match self {
            Geometry::Flat => 1.0,
            Geometry::SphereStereographic => {
                let q = 1.0 + p[0] * p[0] + p[1] * p[1];
                4.0 / (q * q)
            }
            Geometry::Warped(w) => w.ratio(p[0].hypot(p[1])),
        }
    }

    /// Metric tensor at a chart point.
    pub fn tensor(&self, p: [f64; 2]) -> [[f64; 2]; 2] {
        match self {
            Geometry::Flat => [[1.0, 0.0], [0.0, 1.0]],
            Geometry::SphereStereographic => {
                let l = self.area_density(p);
                [[l, 0.0], [0.0, l]]
            }
            Geometry::Warped(w) => {
                let r = p[0].hypot(p[1]);
                if r < 1e-12 {
                    let s = w.dpsi(0.0).powi(2);
                    return [[s, 0.0], [0.0, s]];
                }
                let (c, s) = (p[0] / r, p[1] / r);
                let t = w.ratio(r).powi(2);
                // r̂ r̂ᵀ + (ψ/r)² θ̂ θ̂ᵀ with θ̂ = (-s, c)
                [[c * c + t * s * s, c * s * (1.0 - t)], [c * s * (1.0 - t), s * s + t * c * c]]
            }
        }
    }

    pub fn is_conformal(&self) -> bool {
        !matches!(self, Geometry::Warped(_))
    }
}

/// Symmetric 2×2 tensor helpers.
pub(crate) fn quad_form(g: &[[f64; 2]; 2], v: [f64; 2]) -> f64 {
    g[0][0] * v[0] * v[0] + 2.0 * g[0][1] * v[0] * v[1] + g[1][1] * v[1] * v[1]
}

pub(crate) fn det2(g: &[[f64; 2]; 2]) -> f64 {
    g[0][0] * g[1][1] - g[0][1] * g[1][0]
}

pub(crate) fn inverse2(g: &[[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let d = det2(g);
    [[g[1][1] / d, -g[0][1] / d], [-g[1][0] / d, g[0][0] / d]]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_profiles_have_nonnegative_curvature() {
        for w in [
            WarpProfile::Cone { c: 0.3 },
            WarpProfile::Cone { c: 1.0 },
            WarpProfile::SmoothCone { c: 0.5 },
            WarpProfile::SmoothCone { c: 0.8 },
        ] {
            w.validate().unwrap();
            assert_eq!(w.psi(0.0), 0.0);
            for i in 1..=4000 {
                let r = i as f64 * 0.005;
                assert!(w.gauss_curvature(r) >= -1e-9);
            }
            // the catalog asymptote is exact; check the ratio approaches it
            assert!((w.psi(1e3) / 1e3 - w.avr()).abs() < 1e-3);
        }
        assert_eq!(WarpProfile::SmoothCone { c: 0.5 }.dpsi(0.0), 1.0);
        assert!(WarpProfile::Cone { c: 1.5 }.validate().is_err());
    }

    #[test]
    fn warped_tensor_determinant_matches_density() {
        let g = Geometry::Warped(WarpProfile::SmoothCone { c: 0.6 });
        for p in [[0.3, 0.4], [-1.2, 0.5], [2.0, -3.0]] {
            let t = g.tensor(p);
            assert!((det2(&t).sqrt() - g.area_density(p)).abs() < 1e-14);
        }
    }

    #[test]
    fn warp_serde_shape() {
        let w: WarpProfile = serde_json::from_str(r#"{"name":"cone","params":{"c":0.8}}"#).unwrap();
        assert_eq!(w, WarpProfile::Cone { c: 0.8 });
    }
}
