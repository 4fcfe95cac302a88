use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use robincmp::experiment::{self, Experiment};
use robincmp::mesh::{generate_domain, load_mesh, save_mesh, DomainKind, Geometry, WarpProfile};

#[derive(Parser)]
#[command(name = "robincmp", version, about = "Robin comparison experiments on 2-D Riemannian domains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment configuration.
    Run {
        config: PathBuf,
        /// Overrides the configured output directory.
        #[arg(long)]
        output_dir: Option<PathBuf>,
        /// Worker threads (default: all cores).
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// List every check id with its statement and parameter ranges.
    ListChecks {
        #[arg(long)]
        json: bool,
    },
    /// Generate or validate mesh files.
    Mesh {
        #[command(subcommand)]
        command: MeshCommand,
    },
}

#[derive(Subcommand)]
enum MeshCommand {
    /// Triangulate a catalog domain.
    Gen(GenArgs),
    /// Load a mesh file and report its measures.
    Validate { file: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Disk,
    Square,
    Polygon,
    SphericalCap,
    AnnulusSector,
}

#[derive(Clone, Copy, ValueEnum)]
enum GeometryArg {
    Flat,
    SphereStereographic,
    Warped,
}

#[derive(Clone, Copy, ValueEnum)]
enum WarpArg {
    Cone,
    SmoothCone,
}

#[derive(Args)]
struct GenArgs {
    kind: Kind,
    /// Target chart edge length.
    #[arg(long)]
    h: f64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    radius: f64,
    #[arg(long, default_value_t = 1.0)]
    side: f64,
    /// Cap angular radius.
    #[arg(long, default_value_t = std::f64::consts::FRAC_PI_3)]
    theta: f64,
    /// Polygon vertices as "x,y;x,y;...".
    #[arg(long)]
    points: Option<String>,
    #[arg(long, default_value_t = 0.5)]
    r_inner: f64,
    #[arg(long, default_value_t = 1.0)]
    r_outer: f64,
    #[arg(long, default_value_t = std::f64::consts::PI)]
    angle: f64,
    #[arg(long, value_enum, default_value_t = GeometryArg::Flat)]
    geometry: GeometryArg,
    #[arg(long, value_enum, default_value_t = WarpArg::SmoothCone)]
    warp: WarpArg,
    /// Warp asymptotic slope.
    #[arg(long, default_value_t = 0.8)]
    c: f64,
}

fn parse_points(s: &str) -> Result<Vec<[f64; 2]>, String> {
    s.split(';')
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            let xy: Vec<&str> = p.split(',').collect();
            if xy.len() != 2 {
                return Err(format!("bad point \"{p}\""));
            }
            let x = xy[0].trim().parse::<f64>().map_err(|e| format!("bad point \"{p}\": {e}"))?;
            let y = xy[1].trim().parse::<f64>().map_err(|e| format!("bad point \"{p}\": {e}"))?;
            Ok([x, y])
        })
        .collect()
}

fn mesh_gen(a: &GenArgs) -> Result<(), String> {
    let kind = match a.kind {
        Kind::Disk => DomainKind::Disk { radius: a.radius },
        Kind::Square => DomainKind::Square { side: a.side },
        Kind::Polygon => {
            let pts = a.points.as_deref().ok_or("polygon needs --points")?;
            DomainKind::Polygon { points: parse_points(pts)? }
        }
        Kind::SphericalCap => DomainKind::SphericalCap { theta: a.theta },
        Kind::AnnulusSector => DomainKind::AnnulusSector { r_inner: a.r_inner, r_outer: a.r_outer, angle: a.angle },
    };
    let geometry = match a.geometry {
        GeometryArg::Flat => Geometry::Flat,
        GeometryArg::SphereStereographic => Geometry::SphereStereographic,
        GeometryArg::Warped => Geometry::Warped(match a.warp {
            WarpArg::Cone => WarpProfile::Cone { c: a.c },
            WarpArg::SmoothCone => WarpProfile::SmoothCone { c: a.c },
        }),
    };
    let mesh = generate_domain(&kind, a.h, geometry).map_err(|e| e.to_string())?;
    save_mesh(&mesh, &a.out).map_err(|e| e.to_string())?;
    println!(
        "wrote {} ({} vertices, {} triangles)",
        a.out.display(),
        mesh.num_vertices(),
        mesh.triangles().len()
    );
    Ok(())
}

fn mesh_validate(file: &PathBuf) -> Result<(), String> {
    let mesh = load_mesh(file).map_err(|e| format!("{}: {e}", file.display()))?;
    println!("geometry        {}", mesh.geometry().tag());
    println!("vertices        {}", mesh.num_vertices());
    println!("triangles       {}", mesh.triangles().len());
    println!("boundary edges  {}", mesh.boundary_edges().len());
    println!("measure         {}", mesh.total_measure());
    println!("perimeter       {}", mesh.boundary_measure());
    println!("mesh size h     {}", mesh.mesh_size());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let code = match cli.command {
        Command::ListChecks { json } => {
            if json {
                println!("{}", serde_json::to_string_pretty(experiment::CATALOG).expect("catalog serializes"));
            } else {
                print!("{}", experiment::catalog_text());
            }
            0
        }
        Command::Mesh { command: MeshCommand::Gen(a) } => match mesh_gen(&a) {
            Ok(()) => 0,
            Err(e) => {
                eprintln!("mesh gen: {e}");
                2
            }
        },
        Command::Mesh { command: MeshCommand::Validate { file } } => match mesh_validate(&file) {
            Ok(()) => 0,
            Err(e) => {
                eprintln!("mesh validate: {e}");
                2
            }
        },
        Command::Run { config, output_dir, jobs } => run(&config, output_dir, jobs),
    };
    ExitCode::from(code as u8)
}

fn run(config: &PathBuf, output_dir: Option<PathBuf>, jobs: Option<usize>) -> i32 {
    let mut exp = match Experiment::load(config) {
        Ok(e) => e,
        Err(e) => {
            eprintln!("{e}");
            return e.exit_code();
        }
    };
    if let Some(d) = output_dir {
        exp.set_output_dir(d);
    }
    match experiment::run(&exp, jobs) {
        Ok(outcome) => {
            let failures = outcome.failures();
            let total = outcome.records.iter().filter(|r| r.report.skipped.is_none()).count();
            println!(
                "{} reports, {} failed at the finest level; output in {}",
                total,
                failures.len(),
                outcome.output_dir.display()
            );
            for f in &failures {
                eprintln!(
                    "check failure [{} at h = {}]: lhs = {}, rhs = {}, gap = {}, tol = {}",
                    f.report.check_id, f.report.context.h, f.report.lhs, f.report.rhs, f.report.gap, f.report.tolerance
                );
            }
            outcome.exit_code()
        }
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}
