//! WebAssembly bindings for the demo page in `www/`.
//!
//! Every export takes plain numbers and a shape name and returns a JSON
//! string, so the same functions are exercised by host tests.

use std::sync::Arc;

use robincmp::fem::{self, RobinProblem};
use robincmp::geometry::GeodesicBall;
use robincmp::mesh::{generate_domain, DomainKind, Geometry, MeasuredMesh};
use robincmp::{radial, rearrange, verify, ModelSpace};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Coarsest and finest chart edge lengths the page may request.
const H_RANGE: (f64, f64) = (0.02, 0.25);
const MAX_POINTS: usize = 400;

fn domain(shape: &str) -> Result<DomainKind, String> {
    Ok(match shape {
        "disk" => DomainKind::Disk { radius: (1.0 / std::f64::consts::PI).sqrt() },
        "square" => DomainKind::Square { side: 1.0 },
        "l-shape" => DomainKind::Polygon {
            points: vec![[0.0, 0.0], [1.0, 0.0], [1.0, 0.5], [0.5, 0.5], [0.5, 1.0], [0.0, 1.0]],
        },
        "triangle" => DomainKind::Polygon { points: vec![[0.0, 0.0], [1.5, 0.0], [0.3, 1.2]] },
        other => return Err(format!("unknown shape \"{other}\"")),
    })
}

fn build_mesh(shape: &str, h: f64) -> Result<Arc<MeasuredMesh>, String> {
    if !(H_RANGE.0..=H_RANGE.1).contains(&h) {
        return Err(format!("h = {h} outside [{}, {}]", H_RANGE.0, H_RANGE.1));
    }
    let mesh = generate_domain(&domain(shape)?, h, Geometry::Flat).map_err(|e| e.to_string())?;
    Ok(Arc::new(mesh))
}

fn positive_beta(beta: f64) -> Result<f64, String> {
    if beta.is_finite() && beta > 0.0 {
        Ok(beta)
    } else {
        Err(format!("β = {beta} must be positive"))
    }
}

/// Every `k`-th index so that at most `MAX_POINTS` remain, keeping the last.
fn thin(len: usize) -> Vec<usize> {
    let step = len.div_ceil(MAX_POINTS).max(1);
    let mut idx: Vec<usize> = (0..len).step_by(step).collect();
    if idx.last() != Some(&(len - 1)) {
        idx.push(len - 1);
    }
    idx
}

#[derive(Debug, Serialize)]
pub struct TorsionCurves {
    pub r: Vec<f64>,
    pub u_sharp: Vec<f64>,
    pub v: Vec<f64>,
    pub rigidity: f64,
    pub rigidity_ball: f64,
    pub max_excess: f64,
    pub h: f64,
}

/// `u♯` of the discrete torsion function against the radial torsion `v` on
/// the equal-area disk.
pub fn torsion_curves(shape: &str, beta: f64, h: f64) -> Result<TorsionCurves, String> {
    let beta = positive_beta(beta)?;
    let mesh = build_mesh(shape, h)?;
    let problem = RobinProblem::torsion(mesh.clone(), beta).map_err(|e| e.to_string())?;
    let u = fem::solve_robin_poisson(&problem).map_err(|e| e.to_string())?;
    let twin = verify::symmetrize(&problem, &ModelSpace::euclidean_plane()).map_err(|e| e.to_string())?;
    let sharp = verify::schwarz_on_grid(&u, &twin.solution).map_err(|e| e.to_string())?;
    let v = &twin.solution;
    let idx = thin(v.grid().len());
    let max_excess = sharp.values().iter().zip(v.values()).map(|(a, b)| a - b).fold(f64::NEG_INFINITY, f64::max);
    Ok(TorsionCurves {
        r: idx.iter().map(|&i| v.grid()[i]).collect(),
        u_sharp: idx.iter().map(|&i| sharp.values()[i]).collect(),
        v: idx.iter().map(|&i| v.values()[i]).collect(),
        rigidity: u.integral(),
        rigidity_ball: v.weighted_integral(),
        max_excess,
        h: mesh.mesh_size(),
    })
}

#[derive(Debug, Serialize)]
pub struct EigenRow {
    pub beta: f64,
    pub lambda: f64,
    pub lambda_ball: f64,
}

/// First Robin eigenvalue of the shape and of the equal-area disk over a
/// log-spaced sweep of β.
pub fn eigen_sweep(shape: &str, beta_min: f64, beta_max: f64, count: usize, h: f64) -> Result<Vec<EigenRow>, String> {
    let (lo, hi) = (positive_beta(beta_min)?, positive_beta(beta_max)?);
    if hi < lo || !(1..=40).contains(&count) {
        return Err("need β_min ≤ β_max and 1 to 40 samples".into());
    }
    let mesh = build_mesh(shape, h)?;
    let ball = GeodesicBall::with_weighted_volume(ModelSpace::euclidean_plane(), mesh.total_measure())
        .map_err(|e| e.to_string())?;
    (0..count)
        .map(|k| {
            let s = if count == 1 { 0.0 } else { k as f64 / (count - 1) as f64 };
            let beta = lo * (hi / lo).powf(s);
            let pair = fem::solve_robin_eigen(&mesh, beta).map_err(|e| e.to_string())?;
            let (lambda_ball, _) = radial::solve_radial_eigen(&ball, beta).map_err(|e| e.to_string())?;
            Ok(EigenRow { beta, lambda: pair.lambda, lambda_ball })
        })
        .collect()
}

#[derive(Debug, Serialize)]
pub struct DistributionCurve {
    pub t: Vec<f64>,
    pub mu: Vec<f64>,
    pub t_ball: Vec<f64>,
    pub mu_ball: Vec<f64>,
}

/// Distribution functions of the discrete and radial torsion functions.
pub fn distribution_curve(shape: &str, beta: f64, h: f64, samples: usize) -> Result<DistributionCurve, String> {
    let beta = positive_beta(beta)?;
    let samples = samples.clamp(2, MAX_POINTS);
    let mesh = build_mesh(shape, h)?;
    let problem = RobinProblem::torsion(mesh, beta).map_err(|e| e.to_string())?;
    let u = fem::solve_robin_poisson(&problem).map_err(|e| e.to_string())?;
    let twin = verify::symmetrize(&problem, &ModelSpace::euclidean_plane()).map_err(|e| e.to_string())?;
    let dist = rearrange::distribution_function(&u);
    let dist_ball = radial::radial_distribution(&twin.solution).map_err(|e| e.to_string())?;
    let sample = |d: &rearrange::DistributionData, top: f64| {
        let t: Vec<f64> = (0..samples).map(|k| top * k as f64 / (samples - 1) as f64).collect();
        let mu = t.iter().map(|&x| d.eval(x)).collect();
        (t, mu)
    };
    let (t, mu) = sample(&dist, u.max());
    let top = twin.solution.values().iter().copied().fold(0.0, f64::max);
    let (t_ball, mu_ball) = sample(&dist_ball, top);
    Ok(DistributionCurve { t, mu, t_ball, mu_ball })
}

fn to_js<T: Serialize>(r: Result<T, String>) -> Result<String, JsError> {
    let value = r.map_err(|e| JsError::new(&e))?;
    serde_json::to_string(&value).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen(js_name = torsionCurves)]
pub fn torsion_curves_js(shape: &str, beta: f64, h: f64) -> Result<String, JsError> {
    to_js(torsion_curves(shape, beta, h))
}

#[wasm_bindgen(js_name = eigenSweep)]
pub fn eigen_sweep_js(shape: &str, beta_min: f64, beta_max: f64, count: usize, h: f64) -> Result<String, JsError> {
    to_js(eigen_sweep(shape, beta_min, beta_max, count, h))
}

#[wasm_bindgen(js_name = distributionCurve)]
pub fn distribution_curve_js(shape: &str, beta: f64, h: f64, samples: usize) -> Result<String, JsError> {
    to_js(distribution_curve(shape, beta, h, samples))
}
