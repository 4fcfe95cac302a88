use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use robincmp::mesh::{generate_domain, DomainKind, FieldFile, Geometry, MeshFile};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_robincmp"))
}

fn run_config(dir: &Path, name: &str, json: &str, extra: &[&str]) -> Output {
    let path = dir.join(name);
    fs::write(&path, json).unwrap();
    bin().arg("run").arg(&path).args(extra).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn write_mesh_file(path: &Path, file: &MeshFile) {
    fs::write(path, serde_json::to_string(file).unwrap()).unwrap();
}

#[test]
fn list_checks_text_and_json() {
    let out = bin().arg("list-checks").output().unwrap();
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    for id in ["thm1.1", "thm1.2-pointwise", "saint-venant", "bossel-daners", "lemma3.1", "profile-D"] {
        assert!(text.contains(id), "{id}");
    }
    assert!(text.contains("n/(2n−2)"));

    let out = bin().args(["list-checks", "--json"]).output().unwrap();
    assert_eq!(code(&out), 0);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let entries = v.as_array().unwrap();
    assert_eq!(entries.len(), 16);
    for e in entries {
        assert!(e["ranges"].as_str().is_some_and(|s| !s.is_empty()), "{e}");
        assert!(text.contains(e["id"].as_str().unwrap()));
    }
}

#[test]
fn mesh_gen_then_validate() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("sq.json");
    let out = bin()
        .args(["mesh", "gen", "square", "--side", "1", "--h", "0.1", "--out"])
        .arg(&file)
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let out = bin().args(["mesh", "validate"]).arg(&file).output().unwrap();
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    let perimeter: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("perimeter"))
        .unwrap()
        .trim()
        .parse()
        .unwrap();
    assert!((perimeter - 4.0).abs() < 1e-12, "{text}");

    let hex = dir.path().join("hex.json");
    let out = bin()
        .args(["mesh", "gen", "polygon", "--points", "0,0;2,0;2,1;1,1;1,2;0,2", "--h", "0.2", "--out"])
        .arg(&hex)
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"geometry": "flat", "vertices": [[0,0],[1,0],[0,1]], "triangles": [[0,2,1]], "boundary_edges": []}"#)
        .unwrap();
    let out = bin().args(["mesh", "validate"]).arg(&bad).output().unwrap();
    assert_eq!(code(&out), 2);
}

const SQUARE_RUN: &str = r#"{
    "domain": {"kind": "square", "side": 1.0},
    "source": {"expr": "1 + exp(-10*(x^2 + y^2))"},
    "beta": [0.5, 2.0],
    "checks": [{"id": "thm1.1", "p": 1, "q": 1}, {"id": "saint-venant"}, {"id": "lemma3.1"}, {"id": "isoperimetric"}],
    "h": 0.1,
    "refine_levels": 1,
    "thresholds": 8
}"#;

#[test]
fn run_succeeds_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let out = run_config(dir.path(), "c.json", SQUARE_RUN, &["--output-dir", a.to_str().unwrap(), "--jobs", "1"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let out = run_config(dir.path(), "c.json", SQUARE_RUN, &["--output-dir", b.to_str().unwrap(), "--jobs", "4"]);
    assert_eq!(code(&out), 0);
    // config.resolved.json echoes the output directory, so it is left out
    for f in ["summary.csv", "reports.jsonl", "plots/gap_thm1.1_b1.csv", "plots/mu_L1_b0.csv", "plots/profile_L0_b1.csv"] {
        let (x, y) = (fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap());
        assert!(x == y, "{f} differs between runs");
    }
    let summary = fs::read_to_string(a.join("summary.csv")).unwrap();
    let mut lines = summary.lines();
    assert_eq!(lines.next().unwrap(), "check_id,lhs,rhs,gap,tol,passed,h,beta,p,q,kappa,n");
    assert!(lines.all(|l| l.split(',').count() == 12 && l.contains(",true,")));
    let echo: serde_json::Value = serde_json::from_slice(&fs::read(a.join("config.resolved.json")).unwrap()).unwrap();
    assert_eq!(echo["geometry"], "flat");
    assert_eq!(echo["radial_intervals"], 4096);
    for entry in fs::read_dir(a.join("plots")).unwrap() {
        let text = fs::read_to_string(entry.unwrap().path()).unwrap();
        let mut rows = text.lines();
        let header = rows.next().unwrap();
        let cols = header.split(',').count();
        assert!(cols == 2 || cols == 3);
        for row in rows {
            let vals: Vec<f64> = row.split(',').map(|x| x.parse().unwrap()).collect();
            assert_eq!(vals.len(), cols);
        }
    }
}

#[test]
fn out_of_range_request_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let json = r#"{"space": {"kappa": 0, "n": 3, "alpha": 1.0}, "domain": {"kind": "disk", "radius": 1.0},
                   "beta": [1.0], "checks": [{"id": "thm1.1", "p": 2.0, "q": 1}], "h": 0.1}"#;
    let out = run_config(dir.path(), "c.json", json, &[]);
    assert_eq!(code(&out), 2);
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("thm1.1") && err.contains("0.75"), "{err}");
    assert!(!dir.path().join("out").exists(), "nothing is written on a config error");

    let out = run_config(dir.path(), "bad.json", "{ not json", &[]);
    assert_eq!(code(&out), 2);
    let out = bin().args(["run", "/nonexistent/config.json"]).output().unwrap();
    assert_eq!(code(&out), 2);
}

/// A flat-chart disk whose density piles up at the centre is a conformal
/// metric with negative curvature where the density drops off, and the isoperimetric
/// comparison genuinely fails; the retry at h/2 keeps the density.
#[test]
fn genuine_violation_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = generate_domain(&DomainKind::Disk { radius: 1.0 }, 0.02, Geometry::Flat).unwrap();
    let mut file = MeshFile::from_mesh(&mesh);
    file.density = Some(mesh.vertices().iter().map(|p| 1.0 + 3.0 * (-(p[0].hypot(p[1]) / 0.6).powi(8)).exp()).collect());
    write_mesh_file(&dir.path().join("heavy.json"), &file);
    let json = r#"{"domain": {"mesh_file": "heavy.json"}, "beta": [1.0], "checks": [{"id": "isoperimetric"}], "h": 0.02}"#;
    let out = run_config(dir.path(), "c.json", json, &[]);
    assert_eq!(code(&out), 1, "{}", String::from_utf8_lossy(&out.stderr));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("check failure [isoperimetric"), "{err}");
    let jsonl = fs::read_to_string(dir.path().join("out/reports.jsonl")).unwrap();
    assert!(jsonl.contains("\"retried\":true"));
}

/// Measure larger than the whole sphere cannot be symmetrized: the failure
/// surfaces in the solve stage.
#[test]
fn solver_stage_failure_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = generate_domain(&DomainKind::Square { side: 1.0 }, 0.2, Geometry::SphereStereographic).unwrap();
    let mut file = MeshFile::from_mesh(&mesh);
    file.density = Some(vec![100.0; mesh.num_vertices()]);
    write_mesh_file(&dir.path().join("huge.json"), &file);
    let json = r#"{"domain": {"mesh_file": "huge.json"}, "beta": [1.0], "checks": [{"id": "saint-venant"}], "h": 0.2}"#;
    let out = run_config(dir.path(), "c.json", json, &[]);
    assert_eq!(code(&out), 3);
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("solver error") && err.contains("saint-venant"), "{err}");
}

#[test]
fn field_file_source_runs_with_refinement() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = generate_domain(&DomainKind::Square { side: 1.0 }, 0.1, Geometry::Flat).unwrap();
    write_mesh_file(&dir.path().join("sq.json"), &MeshFile::from_mesh(&mesh));
    let values: Vec<f64> = mesh.vertices().iter().map(|p| 1.0 + p[0].max(0.0)).collect();
    let field = FieldFile { mesh_ref: "sq.json".into(), values };
    fs::write(dir.path().join("f.json"), serde_json::to_string(&field).unwrap()).unwrap();
    let json = r#"{"domain": {"mesh_file": "sq.json"}, "source": {"field_file": "f.json"}, "beta": [1.0],
                   "checks": [{"id": "thm1.1", "p": 1.0}, {"id": "min-comparison"}], "h": 0.1, "refine_levels": 1}"#;
    let out = run_config(dir.path(), "c.json", json, &[]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let summary = fs::read_to_string(dir.path().join("out/summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 5);

    // negative field values are rejected at load
    let field = FieldFile { mesh_ref: "sq.json".into(), values: vec![-1.0; mesh.num_vertices()] };
    fs::write(dir.path().join("neg.json"), serde_json::to_string(&field).unwrap()).unwrap();
    let out = run_config(dir.path(), "c2.json", &json.replace("f.json", "neg.json"), &[]);
    assert_eq!(code(&out), 2);
}
