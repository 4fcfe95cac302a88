//! Experiment configuration, the check catalog, and the runner behind the
//! `run` command.

use std::cell::OnceCell;
use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use log::{debug, info};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::expr::Expr;
use crate::fem::{self, EigenPair, RobinProblem, Source};
use crate::geometry::{GeodesicBall, ModelSpace};
use crate::mesh::{generate_domain, load_mesh, DomainKind, FieldFile, Geometry, MeasuredMesh, ScalarField, WarpProfile};
use crate::radial;
use crate::rearrange::{self, DistributionData};
use crate::verify::{self, ComparisonReport, Main2Mode, ProfileClaim, SymmetrizedProblem, Theorem};

// ---------------------------------------------------------------------------
// configuration

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DomainSpec {
    File { mesh_file: PathBuf },
    Generated(DomainKind),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceSpec {
    Torsion,
    Expr(String),
    FieldFile(PathBuf),
}

impl Default for SourceSpec {
    fn default() -> Self {
        SourceSpec::Torsion
    }
}

/// One requested check. `p`/`q` feed the norm and profile checks, `t` the
/// single-threshold flux check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckSpec {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
}

fn default_geometry() -> String {
    "flat".into()
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_thresholds() -> usize {
    20
}
fn default_radial_intervals() -> usize {
    radial::DEFAULT_INTERVALS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Model space of the comparison; defaults to the one matching the geometry.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub space: Option<ModelSpace>,
    #[serde(default = "default_geometry")]
    pub geometry: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warp: Option<WarpProfile>,
    pub domain: DomainSpec,
    #[serde(default)]
    pub source: SourceSpec,
    pub beta: Vec<f64>,
    pub checks: Vec<CheckSpec>,
    pub h: f64,
    #[serde(default)]
    pub refine_levels: u32,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Threshold count for the multi-threshold checks.
    #[serde(default = "default_thresholds")]
    pub thresholds: usize,
    #[serde(default = "default_radial_intervals")]
    pub radial_intervals: usize,
}

// ---------------------------------------------------------------------------
// check catalog

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum CheckKind {
    Isoperimetric,
    MinComparison,
    MeasureBound,
    Lemma31,
    Lemma32,
    Profile(ProfileClaimKey),
    ProfileK,
    Main1,
    Main2,
    Main2Pointwise,
    SaintVenant,
    BosselDaners,
    BosselFunctional,
}

/// Orderable stand-in for [`ProfileClaim`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ProfileClaimKey {
    A,
    B,
    C,
    D,
}

impl ProfileClaimKey {
    fn claim(self) -> ProfileClaim {
        match self {
            ProfileClaimKey::A => ProfileClaim::A,
            ProfileClaimKey::B => ProfileClaim::B,
            ProfileClaimKey::C => ProfileClaim::C,
            ProfileClaimKey::D => ProfileClaim::D,
        }
    }
}

/// One entry of `list-checks`.
#[derive(Debug, Clone, Serialize)]
pub struct CheckInfo {
    pub id: &'static str,
    pub statement: &'static str,
    pub parameters: &'static [&'static str],
    pub ranges: &'static str,
    pub tolerance: &'static str,
}

pub const CATALOG: &[CheckInfo] = &[
    CheckInfo {
        id: "isoperimetric",
        statement: "|∂Ω|_g ≥ G_κ(|Ω|_g)",
        parameters: &[],
        ranges: "any mesh whose measure fits in the model space",
        tolerance: "5h·rhs",
    },
    CheckInfo {
        id: "min-comparison",
        statement: "min_Ω u ≤ v(R) for the symmetrized problem",
        parameters: &["beta"],
        ranges: "beta > 0, f ≥ 0",
        tolerance: "10h",
    },
    CheckInfo {
        id: "measure-bound",
        statement: "μ_u(t) ≤ |Ω|_g = α·φ_v(t) for t < v(R)",
        parameters: &["beta"],
        ranges: "beta > 0, f ≥ 0",
        tolerance: "1e-9 relative",
    },
    CheckInfo {
        id: "lemma3.1",
        statement: "G(μ(t))² ≤ ∫_0^μ(t) f* · (−μ'(t) + β⁻¹∫_{∂U_t^e} u⁻¹) at generic t",
        parameters: &["beta", "thresholds"],
        ranges: "t in (min u, max u), away from breakpoints of μ",
        tolerance: "1e-6 relative + 10h",
    },
    CheckInfo {
        id: "lemma3.2",
        statement: "∫_0^t τ ∫_{∂U_τ^e} u⁻¹ dτ ≤ (2β)⁻¹ ∫ f",
        parameters: &["beta", "t (default max u)"],
        ranges: "t > 0",
        tolerance: "1e-8 relative",
    },
    CheckInfo {
        id: "profile-A",
        statement: "l^{1/p} G_κ(l)^{-2} non-decreasing",
        parameters: &["p"],
        ranges: "0 < p ≤ n/(2n−2)",
        tolerance: "slack 1e-9 on 2048 points",
    },
    CheckInfo {
        id: "profile-B",
        statement: "F_κ(l) G_κ(l)^{-2} non-decreasing",
        parameters: &["p"],
        ranges: "κ=0: 0 < p ≤ n/(3n−4); κ=1: 0 < p ≤ 1 (n=2), n/(3n−3) (n>2)",
        tolerance: "slack 1e-9 on 2048 points",
    },
    CheckInfo {
        id: "profile-C",
        statement: "l^{1/p+1} G_κ(l)^{-2} non-decreasing",
        parameters: &["p"],
        ranges: "0 < p ≤ n/(n−2) (any p for n=2)",
        tolerance: "slack 1e-9 on 2048 points",
    },
    CheckInfo {
        id: "profile-D",
        statement: "l F_0(l) G_0(l)^{-2} non-decreasing",
        parameters: &["p"],
        ranges: "κ=0 only, 0 < p ≤ n/(n−2)",
        tolerance: "slack 1e-9 on 2048 points",
    },
    CheckInfo {
        id: "profile-k",
        statement: "k(r) = I'(r)² − 2p I(r) I''(r) ≥ 0",
        parameters: &["p"],
        ranges: "0 < p ≤ n/(2n−2)",
        tolerance: "−1e-9 relative to I'²",
    },
    CheckInfo {
        id: "thm1.1",
        statement: "‖u‖_{L^{p,q}(Ω)} ≤ α^{1/p} ‖v‖_{L^{p,q}(Ω♯)}; for q=2 the Lorentz exponent is 2p",
        parameters: &["beta", "p", "q ∈ {1,2}"],
        ranges: "q=1: 0 < p ≤ n/(2n−2); q=2, κ=0: 0 < p ≤ n/(3n−4); q=2, κ=1: 0 < p ≤ 1 (n=2), n/(3n−3) (n>2)",
        tolerance: "5h relative",
    },
    CheckInfo {
        id: "thm1.2",
        statement: "torsion: ‖u‖_{L^{p,q}(Ω)} ≤ α^{1/p} ‖v‖_{L^{p,q}(Ω♯)}; for q=2 the Lorentz exponent is 2p",
        parameters: &["beta", "p", "q ∈ {1,2}"],
        ranges: "f ≡ 1; q=1: 0 < p ≤ n/(n−2) (any p for n=2); q=2: κ=0 only, 0 < p ≤ n/(n−2)",
        tolerance: "5h relative",
    },
    CheckInfo {
        id: "thm1.2-pointwise",
        statement: "torsion: u♯(r) ≤ v(r) for every radius",
        parameters: &["beta"],
        ranges: "f ≡ 1, n = 2, κ = 0",
        tolerance: "10h",
    },
    CheckInfo {
        id: "saint-venant",
        statement: "T_β(Ω) ≤ α T_β(Ω♯)",
        parameters: &["beta"],
        ranges: "beta > 0",
        tolerance: "5h relative",
    },
    CheckInfo {
        id: "bossel-daners",
        statement: "λ_{1,β}(Ω) ≥ λ_{1,β}(Ω♯)",
        parameters: &["beta"],
        ranges: "beta > 0",
        tolerance: "5h relative",
    },
    CheckInfo {
        id: "bossel-functional",
        statement: "H_Ω(U_t, |∇u|/u) = λ_{1,β}(Ω) for the eigenfield at generic t",
        parameters: &["beta", "thresholds"],
        ranges: "t in (min u, 1)",
        tolerance: "10h",
    },
];

pub fn check_kind(id: &str) -> Option<CheckKind> {
    Some(match id {
        "isoperimetric" => CheckKind::Isoperimetric,
        "min-comparison" => CheckKind::MinComparison,
        "measure-bound" => CheckKind::MeasureBound,
        "lemma3.1" => CheckKind::Lemma31,
        "lemma3.2" => CheckKind::Lemma32,
        "profile-A" => CheckKind::Profile(ProfileClaimKey::A),
        "profile-B" => CheckKind::Profile(ProfileClaimKey::B),
        "profile-C" => CheckKind::Profile(ProfileClaimKey::C),
        "profile-D" => CheckKind::Profile(ProfileClaimKey::D),
        "profile-k" => CheckKind::ProfileK,
        "thm1.1" => CheckKind::Main1,
        "thm1.2" => CheckKind::Main2,
        "thm1.2-pointwise" => CheckKind::Main2Pointwise,
        "saint-venant" => CheckKind::SaintVenant,
        "bossel-daners" => CheckKind::BosselDaners,
        "bossel-functional" => CheckKind::BosselFunctional,
        _ => return None,
    })
}

impl CheckKind {
    /// Profile checks depend only on the model space, not on a mesh.
    fn needs_mesh(self) -> bool {
        !matches!(self, CheckKind::Profile(_) | CheckKind::ProfileK)
    }

    fn needs_beta(self) -> bool {
        self.needs_mesh() && self != CheckKind::Isoperimetric
    }
}

/// Human-readable catalog for `list-checks`.
pub fn catalog_text() -> String {
    let mut s = String::new();
    for c in CATALOG {
        s.push_str(&format!("{}\n  {}\n  parameters: {}\n  range: {}\n  tolerance: {}\n", c.id, c.statement,
            if c.parameters.is_empty() { "none".to_string() } else { c.parameters.join(", ") },
            c.ranges, c.tolerance));
    }
    s
}

// ---------------------------------------------------------------------------
// errors and exit codes

/// Failure of a run, tagged with the pipeline stage that raised it.
#[derive(Debug, Clone, PartialEq)]
pub enum RunError {
    Config { stage: String, message: String },
    Solver { stage: String, message: String },
}

impl RunError {
    fn config(stage: impl Into<String>, message: impl fmt::Display) -> Self {
        RunError::Config { stage: stage.into(), message: message.to_string() }
    }

    fn solver(stage: impl Into<String>, message: impl fmt::Display) -> Self {
        RunError::Solver { stage: stage.into(), message: message.to_string() }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config { .. } => 2,
            RunError::Solver { .. } => 3,
        }
    }
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Config { stage, message } => write!(f, "config error [{stage}]: {message}"),
            RunError::Solver { stage, message } => write!(f, "solver error [{stage}]: {message}"),
        }
    }
}

impl std::error::Error for RunError {}

// ---------------------------------------------------------------------------
// loading and validation

#[derive(Debug, Clone)]
enum ResolvedDomain {
    Generated { kind: DomainKind, geometry: Geometry },
    File(Arc<MeasuredMesh>),
}

#[derive(Debug, Clone)]
enum ResolvedSource {
    Torsion,
    Expr(Expr),
    /// Nodal values on the file mesh.
    Field(Vec<f64>),
}

#[derive(Debug, Clone)]
struct ResolvedCheck {
    kind: CheckKind,
    spec: CheckSpec,
}

/// A validated configuration ready to run.
#[derive(Debug, Clone)]
pub struct Experiment {
    config: ExperimentConfig,
    space: ModelSpace,
    domain: ResolvedDomain,
    source: ResolvedSource,
    checks: Vec<ResolvedCheck>,
    output_dir: PathBuf,
}

fn parse_geometry(name: &str, warp: Option<WarpProfile>) -> Result<Geometry, RunError> {
    match (name, warp) {
        ("flat", None) => Ok(Geometry::Flat),
        ("sphere_stereographic", None) => Ok(Geometry::SphereStereographic),
        ("warped", Some(w)) => {
            w.validate().map_err(|e| RunError::config("geometry", e))?;
            Ok(Geometry::Warped(w))
        }
        ("warped", None) => Err(RunError::config("geometry", "\"warped\" needs a \"warp\" entry")),
        (g, Some(_)) if g != "warped" => Err(RunError::config("geometry", format!("\"warp\" given for geometry \"{g}\""))),
        (g, _) => Err(RunError::config(
            "geometry",
            format!("unknown geometry \"{g}\" (expected flat, sphere_stereographic or warped)"),
        )),
    }
}

fn same_space(a: &ModelSpace, b: &ModelSpace) -> bool {
    a.kappa() == b.kappa() && a.dim() == b.dim() && (a.alpha() - b.alpha()).abs() <= 1e-9 * b.alpha()
}

fn resolve_path(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

impl Experiment {
    /// Reads and validates a configuration file. Relative paths inside the
    /// file are resolved against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Experiment, RunError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| RunError::config("read", format!("{}: {e}", path.display())))?;
        let config: ExperimentConfig =
            serde_json::from_str(&text).map_err(|e| RunError::config("parse", format!("{}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Experiment::from_config(config, &base)
    }

    pub fn from_config(mut config: ExperimentConfig, base: &Path) -> Result<Experiment, RunError> {
        if !(config.h > 0.0 && config.h.is_finite()) {
            return Err(RunError::config("validate", format!("h must be positive, got {}", config.h)));
        }
        if config.refine_levels > 6 {
            return Err(RunError::config("validate", format!("refine_levels {} exceeds 6", config.refine_levels)));
        }
        if config.thresholds == 0 {
            return Err(RunError::config("validate", "thresholds must be at least 1"));
        }
        if config.radial_intervals < 64 {
            return Err(RunError::config("validate", "radial_intervals must be at least 64"));
        }
        if config.checks.is_empty() {
            return Err(RunError::config("validate", "no checks requested"));
        }

        let mut checks = Vec::with_capacity(config.checks.len());
        for spec in &config.checks {
            let kind = check_kind(&spec.id)
                .ok_or_else(|| RunError::config("validate", format!("unknown check id \"{}\" (see list-checks)", spec.id)))?;
            checks.push(ResolvedCheck { kind, spec: spec.clone() });
        }
        let any_mesh = checks.iter().any(|c| c.kind.needs_mesh());
        let any_beta = checks.iter().any(|c| c.kind.needs_beta());
        if any_beta && config.beta.is_empty() {
            return Err(RunError::config("validate", "beta list is empty"));
        }
        if let Some(b) = config.beta.iter().find(|b| !(**b > 0.0 && b.is_finite())) {
            return Err(RunError::config("validate", format!("beta must be positive and finite, got {b}")));
        }

        // domain and geometry
        let domain = match &config.domain {
            DomainSpec::Generated(kind) => {
                let geometry = parse_geometry(&config.geometry, config.warp)?;
                ResolvedDomain::Generated { kind: kind.clone(), geometry }
            }
            DomainSpec::File { mesh_file } => {
                let p = resolve_path(base, mesh_file);
                let mesh = load_mesh(&p).map_err(|e| RunError::config("mesh", format!("{}: {e}", p.display())))?;
                // the file decides the geometry; echo it
                config.geometry = mesh.geometry().tag().to_string();
                config.warp = match mesh.geometry() {
                    Geometry::Warped(w) => Some(w),
                    _ => None,
                };
                ResolvedDomain::File(Arc::new(mesh))
            }
        };
        let geometry = match &domain {
            ResolvedDomain::Generated { geometry, .. } => *geometry,
            ResolvedDomain::File(m) => m.geometry(),
        };
        let mesh_space = geometry.model_space();
        let space = config.space.unwrap_or(mesh_space);
        // hypothesis ranges first, so a range violation is reported as such
        let torsion = matches!(config.source, SourceSpec::Torsion);
        for c in &mut checks {
            validate_check(c, &space, torsion)?;
        }
        config.checks = checks.iter().map(|c| c.spec.clone()).collect();
        if any_mesh && !same_space(&space, &mesh_space) {
            return Err(RunError::config(
                "validate",
                format!(
                    "mesh checks compare in the model space of the geometry (κ = {}, n = {}, α = {}), but the config asks for κ = {}, n = {}, α = {}",
                    mesh_space.kappa(),
                    mesh_space.dim(),
                    mesh_space.alpha(),
                    space.kappa(),
                    space.dim(),
                    space.alpha()
                ),
            ));
        }
        config.space = Some(space);

        // source
        let source = match &config.source {
            SourceSpec::Torsion => ResolvedSource::Torsion,
            SourceSpec::Expr(s) => ResolvedSource::Expr(Expr::parse(s).map_err(|e| RunError::config("source", e))?),
            SourceSpec::FieldFile(p) => {
                let file_mesh = match &domain {
                    ResolvedDomain::File(m) => m.clone(),
                    ResolvedDomain::Generated { .. } => {
                        return Err(RunError::config("source", "a field file source needs a mesh_file domain"))
                    }
                };
                let p = resolve_path(base, p);
                let text =
                    fs::read_to_string(&p).map_err(|e| RunError::config("source", format!("{}: {e}", p.display())))?;
                let field: FieldFile =
                    serde_json::from_str(&text).map_err(|e| RunError::config("source", format!("{}: {e}", p.display())))?;
                let mesh_ref = resolve_path(p.parent().unwrap_or(Path::new("")), Path::new(&field.mesh_ref));
                let ref_mesh = load_mesh(&mesh_ref)
                    .map_err(|e| RunError::config("source", format!("{}: {e}", mesh_ref.display())))?;
                if ref_mesh != *file_mesh {
                    return Err(RunError::config("source", "the field's mesh_ref differs from the domain mesh"));
                }
                if field.values.len() != file_mesh.num_vertices() {
                    return Err(RunError::config(
                        "source",
                        format!("field has {} values, mesh has {} vertices", field.values.len(), file_mesh.num_vertices()),
                    ));
                }
                if let Some(i) = field.values.iter().position(|v| !(*v >= 0.0 && v.is_finite())) {
                    return Err(RunError::config(
                        "source",
                        format!("source must be finite and non-negative, got {} at vertex {i}", field.values[i]),
                    ));
                }
                ResolvedSource::Field(field.values)
            }
        };

        let output_dir = resolve_path(base, &config.output_dir);
        let exp = Experiment { config, space, domain, source, checks, output_dir };
        // sample the source on every mesh the run will touch
        if let ResolvedSource::Expr(e) = &exp.source {
            if any_mesh {
                for level in 0..=exp.config.refine_levels + 1 {
                    let mesh = exp.mesh_at(level).map_err(|e| RunError::config("mesh", e))?;
                    check_expr_on_mesh(e, &mesh)?;
                }
            }
        }
        Ok(exp)
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn space(&self) -> &ModelSpace {
        &self.space
    }

    pub fn output_dir(&self) -> &Path {
        &self.output_dir
    }

    pub fn set_output_dir(&mut self, dir: PathBuf) {
        self.config.output_dir = dir.clone();
        self.output_dir = dir;
    }

    /// Mesh at refinement step `k` (target size `h / 2^k`).
    fn mesh_at(&self, k: u32) -> crate::Result<MeasuredMesh> {
        match &self.domain {
            ResolvedDomain::Generated { kind, geometry } => {
                generate_domain(kind, self.config.h / 2f64.powi(k as i32), *geometry)
            }
            ResolvedDomain::File(m) => {
                let mut mesh = (**m).clone();
                for _ in 0..k {
                    mesh = mesh.refine_uniform(&[])?.0;
                }
                Ok(mesh)
            }
        }
    }

    fn source_on(&self, mesh: &Arc<MeasuredMesh>, k: u32) -> crate::Result<Source> {
        Ok(match &self.source {
            ResolvedSource::Torsion => Source::Torsion,
            ResolvedSource::Expr(e) => Source::Field(ScalarField::from_fn(mesh.clone(), |p| e.eval(p[0], p[1]))?),
            ResolvedSource::Field(values) => {
                let mut vals = values.clone();
                let ResolvedDomain::File(base) = &self.domain else {
                    return Err(Error::Config("field source without a mesh file".into()));
                };
                let mut cur = (**base).clone();
                for _ in 0..k {
                    let (next, mut f) = cur.refine_uniform(&[&vals])?;
                    vals = f.pop().unwrap_or_default();
                    cur = next;
                }
                Source::Field(ScalarField::new(mesh.clone(), vals)?)
            }
        })
    }
}

fn check_expr_on_mesh(e: &Expr, mesh: &MeasuredMesh) -> Result<(), RunError> {
    for (i, p) in mesh.vertices().iter().enumerate() {
        let v = e.eval(p[0], p[1]);
        if !(v >= 0.0 && v.is_finite()) {
            return Err(RunError::config(
                "source",
                format!("source expression evaluates to {v} at vertex {i} ({}, {}); f must be finite and non-negative", p[0], p[1]),
            ));
        }
    }
    Ok(())
}

fn validate_check(c: &mut ResolvedCheck, space: &ModelSpace, torsion: bool) -> Result<(), RunError> {
    let id = c.spec.id.clone();
    let stage = format!("validate {id}");
    let range = |e: Error| RunError::config(stage.clone(), e);
    let need_p = |spec: &CheckSpec| -> Result<f64, RunError> {
        spec.p.ok_or_else(|| RunError::config(format!("validate {id}"), "parameter p is required"))
    };
    match c.kind {
        CheckKind::Main1 | CheckKind::Main2 => {
            let p = need_p(&c.spec)?;
            let q = *c.spec.q.get_or_insert(1);
            let theorem = if c.kind == CheckKind::Main1 { Theorem::Main1 } else { Theorem::Main2 };
            verify::check_theorem_range(theorem, space, p, q).map_err(range)?;
            if c.kind == CheckKind::Main2 && !torsion {
                return Err(RunError::config(stage, "this comparison needs the torsion source f ≡ 1"));
            }
        }
        CheckKind::Main2Pointwise => {
            verify::check_pointwise_range(space).map_err(range)?;
            if !torsion {
                return Err(RunError::config(stage, "this comparison needs the torsion source f ≡ 1"));
            }
        }
        CheckKind::Profile(key) => {
            let p = need_p(&c.spec)?;
            let p_max = key.claim().p_max(space.curvature(), space.dim()).map_err(range)?;
            if !(p > 0.0) || p > p_max * (1.0 + 1e-12) {
                return Err(RunError::config(
                    stage,
                    format!("p = {p} outside 0 < p <= {p_max} (κ = {}, n = {})", space.kappa(), space.dim()),
                ));
            }
        }
        CheckKind::ProfileK => {
            let p = need_p(&c.spec)?;
            let n = space.dim() as f64;
            let p_max = if space.dim() == 1 { f64::INFINITY } else { n / (2.0 * n - 2.0) };
            if !(p > 0.0) || p > p_max * (1.0 + 1e-12) {
                return Err(RunError::config(stage, format!("p = {p} outside 0 < p <= {p_max}")));
            }
        }
        CheckKind::Lemma32 => {
            if let Some(t) = c.spec.t {
                if !(t > 0.0 && t.is_finite()) {
                    return Err(RunError::config(stage, format!("t must be positive, got {t}")));
                }
            }
        }
        _ => {}
    }
    if c.kind.needs_mesh() && space.dim() != 2 {
        return Err(RunError::config(stage, "mesh checks need n = 2"));
    }
    if c.spec.q.is_some() && !matches!(c.kind, CheckKind::Main1 | CheckKind::Main2) {
        return Err(RunError::config(format!("validate {id}"), "parameter q does not apply"));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// running

/// One line of `reports.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRecord {
    /// Refinement level of the cell (mesh target `h / 2^level`).
    pub level: u32,
    /// True when the first attempt failed and this report comes from the
    /// retry at half the mesh size.
    pub retried: bool,
    #[serde(flatten)]
    pub report: ComparisonReport,
}

/// Sort key of a cell: (level, β index, check index, sub-index).
type CellKey = (u32, usize, usize, usize);

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub records: Vec<ReportRecord>,
    pub output_dir: PathBuf,
    pub finest_level: u32,
}

impl RunOutcome {
    /// Non-skipped reports at the finest level (profile checks always count).
    pub fn failures(&self) -> Vec<&ReportRecord> {
        self.records
            .iter()
            .filter(|r| r.report.skipped.is_none() && !r.report.passed)
            .filter(|r| r.level == self.finest_level || r.report.context.h == 0.0)
            .collect()
    }

    pub fn exit_code(&self) -> i32 {
        if self.failures().is_empty() {
            0
        } else {
            1
        }
    }
}

/// Lazily solved problems shared by the checks of one (level, β) cell.
struct Cell<'a> {
    exp: &'a Experiment,
    step: u32,
    beta: f64,
    mesh: Arc<MeasuredMesh>,
    torsion: OnceCell<crate::Result<(RobinProblem, ScalarField, SymmetrizedProblem)>>,
    source: OnceCell<crate::Result<(RobinProblem, ScalarField, SymmetrizedProblem)>>,
    eigen: OnceCell<crate::Result<(EigenPair, f64)>>,
}

impl<'a> Cell<'a> {
    fn new(exp: &'a Experiment, step: u32, beta: f64) -> crate::Result<Self> {
        Ok(Cell {
            exp,
            step,
            beta,
            mesh: Arc::new(exp.mesh_at(step)?),
            torsion: OnceCell::new(),
            source: OnceCell::new(),
            eigen: OnceCell::new(),
        })
    }

    fn solve(&self, source: Source) -> crate::Result<(RobinProblem, ScalarField, SymmetrizedProblem)> {
        let problem = RobinProblem::new(self.mesh.clone(), self.beta, source)?;
        let u = fem::solve_robin_poisson(&problem)?;
        let twin = symmetrize_with(&problem, &self.exp.space, self.exp.config.radial_intervals)?;
        Ok((problem, u, twin))
    }

    fn torsion(&self) -> crate::Result<&(RobinProblem, ScalarField, SymmetrizedProblem)> {
        self.torsion.get_or_init(|| self.solve(Source::Torsion)).as_ref().map_err(Clone::clone)
    }

    fn source(&self) -> crate::Result<&(RobinProblem, ScalarField, SymmetrizedProblem)> {
        if matches!(self.exp.source, ResolvedSource::Torsion) {
            return self.torsion();
        }
        self.source
            .get_or_init(|| self.solve(self.exp.source_on(&self.mesh, self.step)?))
            .as_ref()
            .map_err(Clone::clone)
    }

    fn eigen(&self) -> crate::Result<&(EigenPair, f64)> {
        self.eigen
            .get_or_init(|| {
                let pair = fem::solve_robin_eigen(&self.mesh, self.beta)?;
                let ball = GeodesicBall::with_weighted_volume(self.exp.space, self.mesh.total_measure())?;
                let (lambda_ball, _) = radial::solve_radial_eigen_with(&ball, self.beta, self.exp.config.radial_intervals)?;
                Ok((pair, lambda_ball))
            })
            .as_ref()
            .map_err(Clone::clone)
    }

    fn run_check(&self, check: &ResolvedCheck) -> crate::Result<Vec<ComparisonReport>> {
        let count = self.exp.config.thresholds;
        Ok(match check.kind {
            CheckKind::Isoperimetric => vec![verify::check_isoperimetric(&self.mesh, &self.exp.space)?],
            CheckKind::MinComparison => {
                let (_, u, twin) = self.source()?;
                vec![verify::check_min_comparison(u, &twin.solution, self.beta)?]
            }
            CheckKind::MeasureBound => {
                let (_, u, twin) = self.source()?;
                vec![verify::check_measure_bound(u, &twin.solution, self.beta)?]
            }
            CheckKind::Lemma31 => {
                let (problem, u, _) = self.source()?;
                let ts = verify::generic_thresholds(u, count);
                verify::check_lemma_31(u, problem, &self.exp.space, &ts)?
            }
            CheckKind::Lemma32 => {
                let (problem, u, _) = self.source()?;
                vec![verify::check_lemma_32(u, problem, check.spec.t.unwrap_or_else(|| u.max()))?]
            }
            CheckKind::Main1 => {
                let (problem, u, twin) = self.source()?;
                let (p, q) = (check.spec.p.unwrap_or(1.0), check.spec.q.unwrap_or(1));
                vec![verify::check_theorem_main1(u, problem, &twin.solution, p, q)?]
            }
            CheckKind::Main2 => {
                let (problem, u, twin) = self.torsion()?;
                let mode = Main2Mode::Norm { p: check.spec.p.unwrap_or(1.0), q: check.spec.q.unwrap_or(1) };
                vec![verify::check_theorem_main2(u, problem, &twin.solution, mode)?]
            }
            CheckKind::Main2Pointwise => {
                let (problem, u, twin) = self.torsion()?;
                vec![verify::check_theorem_main2(u, problem, &twin.solution, Main2Mode::Pointwise)?]
            }
            CheckKind::SaintVenant => {
                let (_, u, twin) = self.torsion()?;
                vec![verify::saint_venant_report(u, &twin.solution, self.beta)?]
            }
            CheckKind::BosselDaners => {
                let (pair, lambda_ball) = self.eigen()?;
                vec![verify::bossel_daners_report(pair.lambda, *lambda_ball, &self.exp.space, self.mesh.mesh_size(), self.beta)]
            }
            CheckKind::BosselFunctional => {
                let (pair, _) = self.eigen()?;
                let ts = verify::generic_thresholds(&pair.field, count);
                verify::check_bossel_functional(&pair.field, pair.lambda, self.beta, &ts)?
            }
            CheckKind::Profile(_) | CheckKind::ProfileK => unreachable!("profile checks run outside mesh cells"),
        })
    }

    /// Plot tables for this cell: the distribution of the primary solution
    /// and its Schwarz rearrangement against the radial solution.
    fn plots(&self) -> crate::Result<Option<(DistributionData, Vec<[f64; 3]>)>> {
        let solved = match (self.source.get(), self.torsion.get()) {
            (Some(Ok(s)), _) => s,
            (_, Some(Ok(s))) => s,
            _ => return Ok(None),
        };
        let (_, u, twin) = solved;
        let dist = rearrange::distribution_function(u);
        let sharp = verify::schwarz_on_grid(u, &twin.solution)?;
        let v = &twin.solution;
        // thin the 4096-interval grid to at most ~512 rows
        let stride = (v.grid().len() / 512).max(1);
        let mut rows: Vec<[f64; 3]> = (0..v.grid().len())
            .step_by(stride)
            .map(|i| [v.grid()[i], sharp.values()[i], v.values()[i]])
            .collect();
        let last = v.grid().len() - 1;
        if last % stride != 0 {
            rows.push([v.grid()[last], sharp.values()[last], v.values()[last]]);
        }
        Ok(Some((dist, rows)))
    }
}

fn symmetrize_with(problem: &RobinProblem, space: &ModelSpace, intervals: usize) -> crate::Result<SymmetrizedProblem> {
    if intervals == radial::DEFAULT_INTERVALS {
        return verify::symmetrize(problem, space);
    }
    let twin = verify::symmetrize(problem, space)?;
    let solution = radial::solve_symmetrized_poisson_with(&twin.ball, problem.beta(), &twin.source, intervals)?;
    Ok(SymmetrizedProblem { solution, ..twin })
}

fn failed(reports: &[ComparisonReport]) -> bool {
    reports.iter().any(|r| r.skipped.is_none() && !r.passed)
}

struct CellOutput {
    level: u32,
    beta_index: usize,
    records: Vec<(CellKey, ReportRecord)>,
    distribution: Option<DistributionData>,
    profile_rows: Option<Vec<[f64; 3]>>,
}

fn run_cell(exp: &Experiment, level: u32, beta_index: usize) -> Result<CellOutput, RunError> {
    let beta = exp.config.beta.get(beta_index).copied().unwrap_or(1.0);
    let label = |id: &str, stage: &str| format!("level {level}, beta {beta}, {id}: {stage}");
    let cell = Cell::new(exp, level, beta).map_err(|e| RunError::solver(label("-", "mesh"), e))?;
    let mut retry_cell: Option<Cell> = None;
    let mut records = Vec::new();
    for (ci, check) in exp.checks.iter().enumerate() {
        if !check.kind.needs_mesh() || (!check.kind.needs_beta() && beta_index > 0) {
            continue;
        }
        let id = &check.spec.id;
        let mut reports = cell.run_check(check).map_err(|e| RunError::solver(label(id, "solve/check"), e))?;
        let mut retried = false;
        if failed(&reports) {
            info!("{}: failed at h = {}, retrying at h/2", id, cell.mesh.mesh_size());
            if retry_cell.is_none() {
                retry_cell = Some(Cell::new(exp, level + 1, beta).map_err(|e| RunError::solver(label(id, "retry mesh"), e))?);
            }
            let rc = retry_cell.as_ref().unwrap();
            reports = rc.run_check(check).map_err(|e| RunError::solver(label(id, "retry solve/check"), e))?;
            retried = true;
        }
        for (si, report) in reports.into_iter().enumerate() {
            records.push(((level, beta_index, ci, si), ReportRecord { level, retried, report }));
        }
    }
    let plots = cell.plots().map_err(|e| RunError::solver(label("-", "plots"), e))?;
    let (distribution, profile_rows) = match plots {
        Some((d, rows)) => (Some(d), Some(rows)),
        None => (None, None),
    };
    debug!("cell level {level} beta {beta}: {} reports", records.len());
    Ok(CellOutput { level, beta_index, records, distribution, profile_rows })
}

fn run_profile_checks(exp: &Experiment) -> Result<Vec<(CellKey, ReportRecord)>, RunError> {
    let space = exp.space;
    // f* ≡ 1 on a unit measure (or on the whole sphere, capped inside the check)
    let total = if space.kappa() == 0 { 1.0 } else { space.max_volume() };
    let fstar = DistributionData::constant(1.0, total).map_err(|e| RunError::solver("profile", e))?;
    let mut out = Vec::new();
    for (ci, check) in exp.checks.iter().enumerate() {
        let p = check.spec.p.unwrap_or(1.0);
        let report = match check.kind {
            CheckKind::Profile(key) => verify::check_profile_monotonicity(&space, p, key.claim(), &fstar),
            CheckKind::ProfileK => verify::check_inner_k(&space, p),
            _ => continue,
        }
        .map_err(|e| RunError::solver(format!("{}: check", check.spec.id), e))?;
        out.push(((0, 0, ci, 0), ReportRecord { level: 0, retried: false, report }));
    }
    Ok(out)
}

/// Runs every cell, writes the output files, and returns the reports.
pub fn run(exp: &Experiment, jobs: Option<usize>) -> Result<RunOutcome, RunError> {
    let levels = exp.config.refine_levels;
    let any_mesh = exp.checks.iter().any(|c| c.kind.needs_mesh());
    let betas = if exp.checks.iter().any(|c| c.kind.needs_beta()) { exp.config.beta.len() } else { 1 };
    let cells: Vec<(u32, usize)> = if any_mesh {
        (0..=levels).flat_map(|l| (0..betas).map(move |b| (l, b))).collect()
    } else {
        Vec::new()
    };

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = jobs {
        builder = builder.num_threads(n.max(1));
    }
    let pool = builder.build().map_err(|e| RunError::config("jobs", e))?;
    let (profile, outputs) = pool.install(|| {
        rayon::join(
            || run_profile_checks(exp),
            || cells.par_iter().map(|&(l, b)| run_cell(exp, l, b)).collect::<Vec<_>>(),
        )
    });
    let mut keyed = profile?;
    let mut cell_outputs = Vec::with_capacity(outputs.len());
    for o in outputs {
        cell_outputs.push(o?);
    }
    for o in &mut cell_outputs {
        keyed.append(&mut o.records);
    }
    keyed.sort_by(|a, b| a.0.cmp(&b.0));
    let records: Vec<ReportRecord> = keyed.into_iter().map(|(_, r)| r).collect();

    let outcome = RunOutcome { records, output_dir: exp.output_dir.clone(), finest_level: levels };
    write_outputs(exp, &outcome, &cell_outputs).map_err(|e| RunError::solver("write outputs", e))?;
    Ok(outcome)
}

fn write_outputs(exp: &Experiment, outcome: &RunOutcome, cells: &[CellOutput]) -> crate::Result<()> {
    let dir = &outcome.output_dir;
    let plots = dir.join("plots");
    fs::create_dir_all(&plots)?;

    let mut echo = serde_json::to_string_pretty(&exp.config)?;
    echo.push('\n');
    fs::write(dir.join("config.resolved.json"), echo)?;

    let mut summary = BufWriter::new(fs::File::create(dir.join("summary.csv"))?);
    writeln!(summary, "{}", ComparisonReport::CSV_HEADER)?;
    for r in outcome.records.iter().filter(|r| r.report.skipped.is_none()) {
        writeln!(summary, "{}", r.report.csv_row())?;
    }
    summary.flush()?;

    let mut jsonl = BufWriter::new(fs::File::create(dir.join("reports.jsonl"))?);
    for r in &outcome.records {
        serde_json::to_writer(&mut jsonl, r)?;
        writeln!(jsonl)?;
    }
    jsonl.flush()?;

    for c in cells {
        if let Some(d) = &c.distribution {
            let f = fs::File::create(plots.join(format!("mu_L{}_b{}.csv", c.level, c.beta_index)))?;
            let mut w = BufWriter::new(f);
            d.write_csv(&mut w)?;
            w.flush()?;
        }
        if let Some(rows) = &c.profile_rows {
            let f = fs::File::create(plots.join(format!("profile_L{}_b{}.csv", c.level, c.beta_index)))?;
            let mut w = BufWriter::new(f);
            writeln!(w, "r,u_sharp,v")?;
            for row in rows {
                writeln!(w, "{},{},{}", row[0], row[1], row[2])?;
            }
            w.flush()?;
        }
    }

    // gap against h per (check, β): worst gap over a check's sub-reports
    let mut gaps: BTreeMap<(String, usize), BTreeMap<u32, (f64, f64)>> = BTreeMap::new();
    for r in outcome.records.iter().filter(|r| r.report.skipped.is_none() && r.report.context.h > 0.0) {
        let b = r
            .report
            .context
            .beta
            .and_then(|beta| exp.config.beta.iter().position(|&x| x == beta))
            .unwrap_or(0);
        let entry = gaps.entry((r.report.check_id.clone(), b)).or_default();
        let slot = entry.entry(r.level).or_insert((r.report.context.h, f64::INFINITY));
        slot.1 = slot.1.min(r.report.gap);
    }
    for ((id, b), rows) in &gaps {
        let f = fs::File::create(plots.join(format!("gap_{id}_b{b}.csv")))?;
        let mut w = BufWriter::new(f);
        writeln!(w, "h,gap")?;
        for (h, gap) in rows.values() {
            writeln!(w, "{h},{gap}")?;
        }
        w.flush()?;
    }
    Ok(())
}
