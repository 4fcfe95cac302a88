//! JSON mesh and field files.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::metric::{Geometry, WarpProfile};
use super::MeasuredMesh;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WarpSpec {
    #[serde(flatten)]
    pub profile: WarpProfile,
    pub avr: f64,
}

/// On-disk mesh layout. Indices are 0-based; densities may be omitted and
/// are then computed from the geometry tag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshFile {
    pub geometry: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warp: Option<WarpSpec>,
    pub vertices: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    pub boundary_edges: Vec<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density: Option<Vec<f64>>,
}

impl MeshFile {
    pub fn from_mesh(mesh: &MeasuredMesh) -> Self {
        let warp = match mesh.geometry() {
            Geometry::Warped(w) => Some(WarpSpec { profile: w, avr: w.avr() }),
            _ => None,
        };
        MeshFile {
            geometry: mesh.geometry().tag().to_string(),
            warp,
            vertices: mesh.vertices().to_vec(),
            triangles: mesh.triangles().to_vec(),
            boundary_edges: mesh.boundary_edges().to_vec(),
            density: Some(mesh.density().to_vec()),
        }
    }

    pub fn into_mesh(self) -> Result<MeasuredMesh> {
        let geometry = match (self.geometry.as_str(), self.warp) {
            ("flat", None) => Geometry::Flat,
            ("sphere_stereographic", None) => Geometry::SphereStereographic,
            ("warped", Some(spec)) => {
                spec.profile.validate()?;
                if (spec.avr - spec.profile.avr()).abs() > 1e-3 {
                    return Err(Error::Parse(format!(
                        "warp avr {} does not match the profile asymptote {}",
                        spec.avr,
                        spec.profile.avr()
                    )));
                }
                Geometry::Warped(spec.profile)
            }
            ("warped", None) => return Err(Error::Parse("warped geometry requires a \"warp\" entry".into())),
            (g, _) => return Err(Error::Parse(format!("unknown or inconsistent geometry \"{g}\""))),
        };
        MeasuredMesh::new(self.vertices, self.triangles, geometry, self.density, Some(self.boundary_edges))
    }
}

pub fn save_mesh(mesh: &MeasuredMesh, path: impl AsRef<Path>) -> Result<()> {
    let text = serde_json::to_string(&MeshFile::from_mesh(mesh))?;
    std::fs::write(path, text)?;
    Ok(())
}

pub fn load_mesh(path: impl AsRef<Path>) -> Result<MeasuredMesh> {
    let text = std::fs::read_to_string(path)?;
    let file: MeshFile = serde_json::from_str(&text)?;
    file.into_mesh()
}

/// Scalar field file `{ "mesh_ref": path, "values": [...] }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldFile {
    pub mesh_ref: String,
    pub values: Vec<f64>,
}
