//! P1 finite elements for the Robin Poisson problem and the first Robin eigenpair.

use std::sync::Arc;

use sprs::{CsMat, TriMat};

use crate::error::{Error, Result};
use crate::mesh::{MeasuredMesh, ScalarField};

/// Right-hand side of the Poisson problem.
#[derive(Debug, Clone)]
pub enum Source {
    /// `f ≡ 1`.
    Torsion,
    Field(ScalarField),
}

/// `-Δ_g u = f` in Ω, `∂u/∂N + βu = 0` on ∂Ω.
#[derive(Debug, Clone)]
pub struct RobinProblem {
    mesh: Arc<MeasuredMesh>,
    beta: f64,
    source: Source,
}

impl RobinProblem {
    pub fn new(mesh: Arc<MeasuredMesh>, beta: f64, source: Source) -> Result<Self> {
        check_beta(beta)?;
        if let Source::Field(f) = &source {
            if *f.mesh() != mesh && **f.mesh() != *mesh {
                return Err(Error::Mismatch("source field lives on a different mesh".into()));
            }
            if let Some(i) = f.values().iter().position(|&v| v < 0.0) {
                return Err(Error::Invariant {
                    check: "source_nonnegative",
                    index: i,
                    detail: format!("f = {}", f.values()[i]),
                });
            }
            if !f.values().iter().any(|&v| v > 0.0) {
                return Err(Error::Domain("source vanishes identically".into()));
            }
        }
        Ok(RobinProblem { mesh, beta, source })
    }

    pub fn torsion(mesh: Arc<MeasuredMesh>, beta: f64) -> Result<Self> {
        RobinProblem::new(mesh, beta, Source::Torsion)
    }

    pub fn mesh(&self) -> &Arc<MeasuredMesh> {
        &self.mesh
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn source(&self) -> &Source {
        &self.source
    }

    /// The source as a vertex field.
    pub fn source_field(&self) -> ScalarField {
        match &self.source {
            Source::Torsion => ScalarField::constant(self.mesh.clone(), 1.0),
            Source::Field(f) => f.clone(),
        }
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::Domain(format!("beta must be positive, got {beta}")));
    }
    Ok(())
}

/// Discrete operators of the weak form
/// `∫ ∇u·∇φ dV_g + β ∫_∂Ω uφ dμ_g = ∫ fφ dV_g`.
#[derive(Debug, Clone)]
pub struct AssembledSystem {
    pub stiffness: CsMat<f64>,
    pub mass: CsMat<f64>,
    pub boundary_mass: CsMat<f64>,
    pub load: Vec<f64>,
}

impl AssembledSystem {
    /// `K + βB`.
    pub fn robin_operator(&self, beta: f64) -> CsMat<f64> {
        let b = self.boundary_mass.map(|v| beta * v);
        &self.stiffness + &b
    }
}

/// Stiffness, mass and boundary mass of a mesh (no load).
pub fn assemble_operators(mesh: &MeasuredMesh) -> Result<(CsMat<f64>, CsMat<f64>, CsMat<f64>)> {
    let n = mesh.num_vertices();
    let nt = mesh.triangles().len();
    let mut k = TriMat::with_capacity((n, n), 9 * nt);
    let mut m = TriMat::with_capacity((n, n), 9 * nt);
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let s = mesh.stiffness_tensor(t);
        let det = s[0][0] * s[1][1] - s[0][1] * s[1][0];
        if !(det > f64::MIN_POSITIVE) || !det.is_finite() {
            return Err(Error::DegenerateGeometry(format!("metric determinant underflows on triangle {t}")));
        }
        let g = mesh.basis_gradients(t);
        let area = mesh.triangle_area(t);
        let mu = mesh.triangle_measure(t);
        for a in 0..3 {
            let sg = [s[0][0] * g[a][0] + s[0][1] * g[a][1], s[1][0] * g[a][0] + s[1][1] * g[a][1]];
            for b in 0..3 {
                k.add_triplet(tri[a], tri[b], area * (sg[0] * g[b][0] + sg[1] * g[b][1]));
                let w = if a == b { 2.0 } else { 1.0 };
                m.add_triplet(tri[a], tri[b], mu * w / 12.0);
            }
        }
    }
    let mut bm = TriMat::with_capacity((n, n), 4 * mesh.boundary_edges().len());
    for (e, ed) in mesh.boundary_edges().iter().enumerate() {
        let l = mesh.edge_measure(e);
        for a in 0..2 {
            for b in 0..2 {
                let w = if a == b { 2.0 } else { 1.0 };
                bm.add_triplet(ed[a], ed[b], l * w / 6.0);
            }
        }
    }
    Ok((k.to_csr(), m.to_csr(), bm.to_csr()))
}

/// Assembles all operators and the load `∫ f φ_i dV_g` (exact for P1 `f`).
pub fn assemble(problem: &RobinProblem) -> Result<AssembledSystem> {
    let (stiffness, mass, boundary_mass) = assemble_operators(&problem.mesh)?;
    let load = mat_vec(&mass, problem.source_field().values());
    Ok(AssembledSystem { stiffness, mass, boundary_mass, load })
}

pub fn mat_vec(a: &CsMat<f64>, x: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; a.rows()];
    mat_vec_into(a, x, &mut y);
    y
}

fn mat_vec_into(a: &CsMat<f64>, x: &[f64], y: &mut [f64]) {
    for (i, row) in a.outer_iterator().enumerate() {
        y[i] = row.iter().map(|(j, v)| v * x[j]).sum();
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `xᵀ A y`.
pub fn bilinear(a: &CsMat<f64>, x: &[f64], y: &[f64]) -> f64 {
    dot(x, &mat_vec(a, y))
}

/// Relative residual targeted by the linear solver.
pub const CG_TOLERANCE: f64 = 1e-12;

/// Jacobi-preconditioned conjugate gradients for SPD `a`, warm-started from `x`.
pub fn conjugate_gradient(a: &CsMat<f64>, b: &[f64], x: &mut [f64], rel_tol: f64) -> Result<usize> {
    let n = b.len();
    let diag: Vec<f64> = (0..n).map(|i| *a.get(i, i).unwrap_or(&0.0)).collect();
    if let Some(i) = diag.iter().position(|&d| !(d > 0.0)) {
        return Err(Error::NonConvergence(format!("non-positive diagonal entry at row {i}")));
    }
    let bnorm = dot(b, b).sqrt();
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(0);
    }
    let cap = ((50.0 * (n as f64).sqrt()).ceil() as usize).max(100);
    let mut r = mat_vec(a, x);
    r.iter_mut().zip(b).for_each(|(ri, bi)| *ri = bi - *ri);
    let mut z: Vec<f64> = r.iter().zip(&diag).map(|(ri, d)| ri / d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    for it in 0..=cap {
        let rnorm = dot(&r, &r).sqrt();
        if rnorm <= rel_tol * bnorm {
            return Ok(it);
        }
        if it == cap {
            break;
        }
        mat_vec_into(a, &p, &mut ap);
        let alpha = rz / dot(&p, &ap);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
            z[i] = r[i] / diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::NonConvergence(format!(
        "conjugate gradients did not reach relative residual {rel_tol} within {cap} iterations"
    )))
}

/// Solves the Robin Poisson problem.
pub fn solve_robin_poisson(problem: &RobinProblem) -> Result<ScalarField> {
    let sys = assemble(problem)?;
    let a = sys.robin_operator(problem.beta);
    let mut u = vec![0.0; sys.load.len()];
    let iters = conjugate_gradient(&a, &sys.load, &mut u, CG_TOLERANCE)?;
    log::debug!("poisson solve: {} dof, {iters} CG iterations", u.len());
    let field = ScalarField::new(problem.mesh.clone(), u)?;
    if field.min() <= 0.0 {
        log::warn!("discrete solution has min {} <= 0; the mesh is likely too coarse", field.min());
    }
    Ok(field)
}

/// First eigenpair of `(K + βB) x = λ M x`.
#[derive(Debug, Clone)]
pub struct EigenPair {
    pub lambda: f64,
    /// Positive ground state normalized to `max = 1`.
    pub field: ScalarField,
}

/// Relative eigenvalue tolerance of the inverse iteration.
pub const EIGEN_TOLERANCE: f64 = 1e-9;

/// Inverse power iteration (zero shift) for the smallest Robin eigenvalue.
pub fn solve_robin_eigen(mesh: &Arc<MeasuredMesh>, beta: f64) -> Result<EigenPair> {
    check_beta(beta)?;
    let (k, m, bm) = assemble_operators(mesh)?;
    let a = &k + &bm.map(|v| beta * v);
    let n = mesh.num_vertices();
    let mut x = vec![1.0; n];
    let mut y = vec![0.0; n];
    let mut lambda = f64::INFINITY;
    let mut converged = false;
    for _ in 0..500 {
        let rhs = mat_vec(&m, &x);
        y.copy_from_slice(&x);
        let scale = if lambda.is_finite() { 1.0 / lambda } else { 0.0 };
        y.iter_mut().for_each(|v| *v *= scale);
        conjugate_gradient(&a, &rhs, &mut y, CG_TOLERANCE)?;
        let norm = bilinear(&m, &y, &y).sqrt();
        y.iter_mut().for_each(|v| *v /= norm);
        let next = bilinear(&a, &y, &y);
        std::mem::swap(&mut x, &mut y);
        if (next - lambda).abs() <= EIGEN_TOLERANCE * next.abs() {
            lambda = next;
            converged = true;
            break;
        }
        lambda = next;
    }
    if !converged {
        return Err(Error::NonConvergence(format!("inverse iteration stalled at λ ≈ {lambda}")));
    }
    let (lo, hi) = x.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    let peak = if hi.abs() >= lo.abs() { hi } else { lo };
    x.iter_mut().for_each(|v| *v /= peak);
    // consistent boundary mass is not an M-matrix once βL is large, so corner
    // values may dip below zero by a discretization-size amount
    let min = x.iter().copied().fold(f64::INFINITY, f64::min);
    let h = mesh.mesh_size();
    if min < -(1e-8 + h * h) {
        return Err(Error::SignChange(format!("normalized ground state reaches {min}")));
    }
    // a ground state is strictly positive in the continuum; clamp rounding noise
    x.iter_mut().for_each(|v| *v = v.max(0.0));
    Ok(EigenPair { lambda, field: ScalarField::new(mesh.clone(), x)? })
}

/// Rayleigh quotient `(∫|∇u|² + β∫_∂Ω u²) / ∫u²`.
pub fn rayleigh_quotient(field: &ScalarField, beta: f64) -> Result<f64> {
    let (k, m, bm) = assemble_operators(field.mesh())?;
    let u = field.values();
    Ok((bilinear(&k, u, u) + beta * bilinear(&bm, u, u)) / bilinear(&m, u, u))
}
