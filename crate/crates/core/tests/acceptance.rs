//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any
//! failure. Oracles here are written independently of the library code they
//! check (closed forms, a separate polygon clipper, a separate Bessel
//! bisection).

use std::f64::consts::PI;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use robincmp::experiment::{self, Experiment, ExperimentConfig};
use robincmp::fem::{self, RobinProblem, Source};
use robincmp::geometry::GeodesicBall;
use robincmp::mesh::{generate_domain, load_mesh, save_mesh, DomainKind, Geometry, MeasuredMesh, ScalarField, WarpProfile};
use robincmp::quadrature;
use robincmp::radial;
use robincmp::rearrange::{self, DistributionData};
use robincmp::verify::{self, Main2Mode, ProfileClaim, TestFunction};
use robincmp::{Curvature, ModelSpace};

type Outcome = Result<String, String>;

fn mesh(kind: DomainKind, h: f64, g: Geometry) -> Arc<MeasuredMesh> {
    Arc::new(generate_domain(&kind, h, g).expect("mesh generation"))
}

fn disk(h: f64) -> Arc<MeasuredMesh> {
    mesh(DomainKind::Disk { radius: 1.0 }, h, Geometry::Flat)
}

fn square(h: f64) -> Arc<MeasuredMesh> {
    mesh(DomainKind::Square { side: 1.0 }, h, Geometry::Flat)
}

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn e<E: std::fmt::Display>(err: E) -> String {
    err.to_string()
}

// --- independent oracles ---------------------------------------------------

/// Power series of `J_0` and `J_1`; accurate to rounding for `x < 10`.
fn bessel_j(order: u32, x: f64) -> f64 {
    let mut term = (0.5 * x).powi(order as i32) / if order == 0 { 1.0 } else { 1.0 };
    let mut sum = term;
    for k in 1..60 {
        term *= -(0.25 * x * x) / (k as f64 * (k + order as usize) as f64);
        sum += term;
    }
    sum
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (f(mid) > 0.0) == (flo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Measure of `{u > t}` by clipping each triangle against the level line.
fn brute_force_measure(m: &MeasuredMesh, values: &[f64], t: f64) -> f64 {
    let mut total = 0.0;
    for (ti, tri) in m.triangles().iter().enumerate() {
        let pts: Vec<([f64; 2], f64)> = tri.iter().map(|&i| (m.vertices()[i], values[i])).collect();
        let mut poly: Vec<[f64; 2]> = Vec::new();
        for k in 0..3 {
            let (p, a) = pts[k];
            let (q, b) = pts[(k + 1) % 3];
            if a > t {
                poly.push(p);
            }
            if (a > t) != (b > t) {
                let s = (t - a) / (b - a);
                poly.push([p[0] + s * (q[0] - p[0]), p[1] + s * (q[1] - p[1])]);
            }
        }
        let mut area = 0.0;
        for k in 0..poly.len() {
            let (p, q) = (poly[k], poly[(k + 1) % poly.len()]);
            area += p[0] * q[1] - q[0] * p[1];
        }
        total += 0.5 * area.abs() * m.triangle_density(ti);
    }
    total
}

// --- criteria ----------------------------------------------------------------

fn torsion_disk_error(h: f64) -> Result<f64, String> {
    let m = disk(h);
    let u = fem::solve_robin_poisson(&RobinProblem::torsion(m, 1.0).map_err(e)?).map_err(e)?;
    let mut worst: f64 = 0.0;
    for i in 0..=40 {
        let r = 0.95 * i as f64 / 40.0;
        for k in 0..8 {
            let a = 2.0 * PI * (k as f64 + 0.3) / 8.0;
            let x = [r * a.cos(), r * a.sin()];
            let uh = u.interpolate(x).ok_or("sample point outside mesh")?;
            let exact = (1.0 - r * r) / 4.0 + 0.5;
            worst = worst.max((uh - exact).abs());
        }
    }
    Ok(worst)
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let e1 = torsion_disk_error(0.02)?;
    let e2 = torsion_disk_error(0.01)?;
    let secs = start.elapsed().as_secs_f64();
    let ratio = e1 / e2;
    let msg = format!("max error {e1:.3e} at h=0.02, {e2:.3e} at h=0.01, ratio {ratio:.2}, {secs:.1} s");
    ensure(e1 <= 5e-3 && ratio >= 3.0 && secs < 10.0, msg.clone())?;
    Ok(msg)
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let space = ModelSpace::euclidean_plane();
    let big_r = 1.0 / PI.sqrt();
    let mut parts = Vec::new();
    for beta in [0.1, 1.0, 10.0] {
        let mut gaps = Vec::new();
        for h in [0.04, 0.02, 0.01] {
            let m = square(h);
            let r = verify::check_saint_venant(&m, &space, beta).map_err(e)?;
            let closed = PI * big_r.powi(4) / 8.0 + PI * big_r.powi(3) / (2.0 * beta);
            ensure((r.rhs - closed).abs() <= 1e-8 * closed, format!("β={beta}: rhs {} vs closed form {closed}", r.rhs))?;
            ensure(r.lhs < r.rhs, format!("β={beta}, h={h}: lhs {} ≥ rhs {}", r.lhs, r.rhs))?;
            gaps.push(r.gap);
        }
        let fine = gaps[2];
        let spread = gaps.iter().map(|g| (g - fine).abs() / fine).fold(0.0, f64::max);
        ensure(spread <= 0.2, format!("β={beta}: gaps {gaps:?} vary by {spread:.3}"))?;
        parts.push(format!("β={beta} gap {fine:.4e} (spread {:.1}%)", 100.0 * spread));
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 30.0, format!("took {secs:.1} s"))?;
    Ok(format!("{}; {secs:.1} s", parts.join(", ")))
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let space = ModelSpace::euclidean_plane();
    let m = square(0.02);
    let mut parts = Vec::new();
    for beta in [0.1, 1.0, 10.0, 1e3] {
        let r = verify::check_bossel_daners(&m, &space, beta).map_err(e)?;
        ensure(r.lhs >= r.rhs, format!("β={beta}: λ(square) {} < λ(disk) {}", r.lhs, r.rhs))?;
        parts.push(format!("β={beta}: {:.4} ≥ {:.4}", r.lhs, r.rhs));
    }
    // the radial rhs itself against the Bessel condition k J1(k) = β J0(k)
    let ball = GeodesicBall::with_weighted_volume(space, 1.0).map_err(e)?;
    let (lam, _) = radial::solve_radial_eigen(&ball, 1.0).map_err(e)?;
    let rad = ball.radius;
    let k = bisect(|k| k * bessel_j(1, k * rad) - bessel_j(0, k * rad), 1e-6, 2.404 / rad);
    ensure((lam - k * k).abs() <= 1e-8 * lam, format!("radial λ {lam} vs Bessel {}", k * k))?;
    let j0 = bisect(|x| bessel_j(0, x), 2.0, 3.0);
    let pair = fem::solve_robin_eigen(&disk(0.02), 1e6).map_err(e)?;
    ensure((pair.lambda - j0 * j0).abs() <= 0.05, format!("Dirichlet-limit λ {} vs j0² {}", pair.lambda, j0 * j0))?;
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 60.0, format!("took {secs:.1} s"))?;
    Ok(format!(
        "{}; β=1e6 disk λ {:.4} vs j0² {:.4}; bisection tol {:e}; {secs:.1} s",
        parts.join(", "),
        pair.lambda,
        j0 * j0,
        radial::EIGEN_BISECTION_TOLERANCE
    ))
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let m = square(0.02);
    let f = ScalarField::from_fn(m.clone(), |p| 1.0 + 2.0 * (-20.0 * ((p[0] - 0.2).powi(2) + (p[1] + 0.1).powi(2))).exp())
        .map_err(e)?;
    let problem = RobinProblem::new(m.clone(), 1.0, Source::Field(f)).map_err(e)?;
    let u = fem::solve_robin_poisson(&problem).map_err(e)?;
    let twin = verify::symmetrize(&problem, &ModelSpace::euclidean_plane()).map_err(e)?;
    let r1 = verify::check_theorem_main1(&u, &problem, &twin.solution, 1.0, 1).map_err(e)?;
    ensure(r1.passed, format!("square L^(1,1): lhs {} rhs {} tol {}", r1.lhs, r1.rhs, r1.tolerance))?;

    let poly = vec![[-0.4, -0.3], [0.5, -0.35], [0.45, 0.4], [0.05, 0.1], [-0.35, 0.45]];
    let s = mesh(DomainKind::Polygon { points: poly }, 0.02, Geometry::SphereStereographic);
    let f = ScalarField::from_fn(s.clone(), |p| 1.0 + p[0] * p[0]).map_err(e)?;
    let problem = RobinProblem::new(s.clone(), 1.0, Source::Field(f)).map_err(e)?;
    let u = fem::solve_robin_poisson(&problem).map_err(e)?;
    let twin = verify::symmetrize(&problem, &ModelSpace::round_sphere()).map_err(e)?;
    let r2 = verify::check_theorem_main1(&u, &problem, &twin.solution, 0.5, 2).map_err(e)?;
    ensure(r2.passed, format!("sphere q=2: lhs {} rhs {} tol {}", r2.lhs, r2.rhs, r2.tolerance))?;
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 60.0, format!("took {secs:.1} s"))?;
    Ok(format!(
        "square p=1 q=1: {:.5} ≤ {:.5}; sphere chart p=1/2 q=2: {:.5} ≤ {:.5}; {secs:.1} s",
        r1.lhs, r1.rhs, r2.lhs, r2.rhs
    ))
}

fn pointwise(m: &Arc<MeasuredMesh>) -> Result<verify::ComparisonReport, String> {
    let problem = RobinProblem::torsion(m.clone(), 1.0).map_err(e)?;
    let u = fem::solve_robin_poisson(&problem).map_err(e)?;
    let twin = verify::symmetrize(&problem, &ModelSpace::euclidean_plane()).map_err(e)?;
    verify::check_theorem_main2(&u, &problem, &twin.solution, Main2Mode::Pointwise).map_err(e)
}

fn criterion_5() -> Outcome {
    let sq = pointwise(&square(0.02))?;
    ensure(sq.passed, format!("square: max u♯−v = {} > tol {}", -sq.gap, sq.tolerance))?;
    let l_shape = vec![[0.0, 0.0], [2.0, 0.0], [2.0, 1.0], [1.0, 1.0], [1.0, 2.0], [0.0, 2.0]];
    let ls = pointwise(&mesh(DomainKind::Polygon { points: l_shape }, 0.04, Geometry::Flat))?;
    ensure(ls.passed, format!("L-shape: max u♯−v = {} > tol {}", -ls.gap, ls.tolerance))?;

    let mut errs = Vec::new();
    let mut hs = Vec::new();
    for h in [0.1, 0.05, 0.025] {
        let m = disk(h);
        let problem = RobinProblem::torsion(m.clone(), 1.0).map_err(e)?;
        let u = fem::solve_robin_poisson(&problem).map_err(e)?;
        let twin = verify::symmetrize(&problem, &ModelSpace::euclidean_plane()).map_err(e)?;
        let sharp = verify::schwarz_on_grid(&u, &twin.solution).map_err(e)?;
        let err = sharp.values().iter().zip(twin.solution.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        errs.push(err);
        hs.push(m.mesh_size());
    }
    let orders: Vec<f64> = (0..2).map(|i| (errs[i] / errs[i + 1]).ln() / (hs[i] / hs[i + 1]).ln()).collect();
    ensure(orders.iter().all(|&o| o >= 1.0), format!("disk |u♯−v| {errs:?} orders {orders:?}"))?;
    Ok(format!(
        "square max u♯−v {:.2e} (tol {:.2}), L-shape {:.2e} (tol {:.2}); disk |u♯−v| {:.2e} → {:.2e}, orders {:.2}, {:.2}",
        -sq.gap, sq.tolerance, -ls.gap, ls.tolerance, errs[0], errs[2], orders[0], orders[1]
    ))
}

fn criterion_6() -> Outcome {
    let m = square(0.02);
    let beta = 1.0;
    let problem = RobinProblem::torsion(m.clone(), beta).map_err(e)?;
    let u = fem::solve_robin_poisson(&problem).map_err(e)?;
    let lhs = verify::lemma_32_lhs(&u, u.max()).map_err(e)?;
    let rhs = m.total_measure() / (2.0 * beta);
    let rel = (lhs - rhs).abs() / rhs;
    ensure(rel <= 1e-8, format!("flux identity off by {rel:e}"))?;
    let ts = verify::generic_thresholds(&u, 20);
    let reports = verify::check_lemma_31(&u, &problem, &ModelSpace::euclidean_plane(), &ts).map_err(e)?;
    let evaluated = reports.iter().filter(|r| !r.is_skipped()).count();
    let failed: Vec<_> = reports.iter().filter(|r| !r.is_skipped() && !r.passed).collect();
    ensure(failed.is_empty(), format!("{} of {evaluated} thresholds fail", failed.len()))?;
    ensure(evaluated == 20, format!("only {evaluated} of 20 thresholds evaluated"))?;
    let tightest = reports.iter().map(|r| r.gap / r.rhs).fold(f64::INFINITY, f64::min);
    Ok(format!("flux identity rel. error {rel:.1e}; 20/20 thresholds pass, smallest relative gap {tightest:.3e}"))
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    // at least 10³ triangles on a warped-cone disk (α = 0.8)
    let warp = Geometry::Warped(WarpProfile::SmoothCone { c: 0.8 });
    let m = mesh(DomainKind::Disk { radius: 1.0 }, 0.1, warp);
    let ntri = m.triangles().len();
    ensure(ntri >= 1000, format!("mesh has {ntri} triangles"))?;
    let field = ScalarField::from_fn(m.clone(), |p| {
        (3.0 * p[0]).sin() * (2.0 * p[1]).cos() + 0.5 * p[0] * p[1] + 1.5
    })
    .map_err(e)?;
    let dist = rearrange::distribution_function(&field);
    let (lo, hi) = (field.min(), field.max());
    let mut worst: f64 = 0.0;
    for k in 0..1000 {
        let t = lo - 0.05 + (hi - lo + 0.1) * (k as f64 + 0.5) / 1000.0;
        let oracle = brute_force_measure(&m, field.values(), t);
        worst = worst.max((dist.eval(t) - oracle).abs());
    }
    ensure(worst <= 1e-12, format!("distribution vs clipping oracle: {worst:e}"))?;

    // ‖h‖_p against α^{1/p}‖h♯‖_p, the latter integrated radially over the
    // un-weighted ball between the breakpoint radii
    let space = warp.model_space();
    let alpha = space.alpha();
    let mut radii: Vec<f64> = dist
        .levels()
        .iter()
        .map(|&t| space.radius_for_volume(dist.eval(t).min(dist.total())))
        .collect::<robincmp::Result<_>>()
        .map_err(e)?;
    radii.push(0.0);
    radii.push(space.radius_for_volume(dist.total()).map_err(e)?);
    radii.sort_by(f64::total_cmp);
    radii.dedup();
    let mut worst_eq: f64 = 0.0;
    for p in [1u32, 2, 4] {
        let direct = field.lp_norm(p);
        let mut sharp = 0.0;
        for w in radii.windows(2) {
            let g = |r: f64| {
                let v = dist.schwarz_value(&space, r).unwrap_or(f64::NAN);
                v.powi(p as i32) * space.volume_derivative(r) / alpha
            };
            sharp += quadrature::adaptive_smoothstep(g, w[0], w[1], 1e-13).map_err(e)?;
        }
        let rhs = alpha.powf(1.0 / p as f64) * sharp.powf(1.0 / p as f64);
        worst_eq = worst_eq.max((direct - rhs).abs() / direct);
    }
    ensure(worst_eq <= 1e-8, format!("equimeasurability off by {worst_eq:e}"))?;

    let mut worst_hl = f64::INFINITY;
    for _ in 0..100 {
        let a: Vec<f64> = (0..m.num_vertices()).map(|_| rng.gen_range(0.0..2.0)).collect();
        let b: Vec<f64> = (0..m.num_vertices()).map(|_| rng.gen_range(0.0..2.0)).collect();
        let fa = ScalarField::new(m.clone(), a).map_err(e)?;
        let fb = ScalarField::new(m.clone(), b).map_err(e)?;
        let (lhs, rhs) = rearrange::hardy_littlewood_check(&fa, &fb).map_err(e)?;
        worst_hl = worst_hl.min(rhs - lhs);
    }
    ensure(worst_hl >= -1e-9, format!("Hardy-Littlewood slack {worst_hl:e}"))?;
    Ok(format!(
        "{ntri} triangles: μ vs clipping max {worst:.1e}; equimeasurability {worst_eq:.1e}; Hardy-Littlewood min slack {worst_hl:.3e}"
    ))
}

fn criterion_8() -> Outcome {
    let cases: &[(Curvature, u32, f64, ProfileClaim)] = &[
        (Curvature::Sphere, 3, 0.75, ProfileClaim::A),
        (Curvature::Flat, 2, 1.0, ProfileClaim::A),
        (Curvature::Flat, 4, 2.0 / 3.0, ProfileClaim::A),
        (Curvature::Sphere, 2, 1.0, ProfileClaim::B),
        (Curvature::Flat, 3, 0.6, ProfileClaim::B),
        (Curvature::Sphere, 3, 0.5, ProfileClaim::B),
        (Curvature::Flat, 3, 3.0, ProfileClaim::C),
        (Curvature::Sphere, 4, 2.0, ProfileClaim::C),
        (Curvature::Flat, 3, 3.0, ProfileClaim::D),
        (Curvature::Flat, 4, 2.0, ProfileClaim::D),
    ];
    let mut n_pass = 0;
    for &(c, n, p, claim) in cases {
        let space = ModelSpace::new(c, n, 1.0).map_err(e)?;
        let total = if c == Curvature::Flat { 1.0 } else { space.max_volume() };
        let fstar = DistributionData::constant(1.0, total).map_err(e)?;
        let r = verify::check_profile_monotonicity(&space, p, claim, &fstar).map_err(e)?;
        ensure(r.passed, format!("{} κ={} n={n} p={p}: worst relative drop {}", claim.id(), c.kappa(), r.lhs))?;
        n_pass += 1;
    }
    let mut worst_k = f64::INFINITY;
    for c in [Curvature::Flat, Curvature::Sphere] {
        for n in 2..=5u32 {
            let space = ModelSpace::new(c, n, 1.0).map_err(e)?;
            let p = n as f64 / (2.0 * n as f64 - 2.0);
            let r = verify::check_inner_k(&space, p).map_err(e)?;
            ensure(r.passed, format!("k(r) κ={} n={n}: min {}", c.kappa(), r.lhs))?;
            worst_k = worst_k.min(r.lhs);
        }
    }
    Ok(format!("{n_pass} claim/endpoint cases pass on 2048-point grids; min k/I'² = {worst_k:.3e}"))
}

fn criterion_9() -> Outcome {
    let m = disk(0.03);
    let beta = 1.0;
    let pair = fem::solve_robin_eigen(&m, beta).map_err(e)?;
    let ts = verify::generic_thresholds(&pair.field, 10);
    let reports = verify::check_bossel_functional(&pair.field, pair.lambda, beta, &ts).map_err(e)?;
    let worst = reports.iter().map(|r| r.gap.abs()).fold(0.0, f64::max);
    ensure(reports.iter().all(|r| r.passed), format!("|λ − H| up to {worst} > 10h"))?;
    let too_big = ScalarField::constant(m.clone(), 2.0 * beta);
    let negative = ScalarField::constant(m.clone(), -0.5);
    for (name, phi) in [("φ = 2β", &too_big), ("φ < 0", &negative)] {
        match verify::bossel_functional(&pair.field, TestFunction::Nodal(phi), beta, ts[3]) {
            Err(robincmp::Error::Admissibility(_)) => {}
            other => return Err(format!("{name} not rejected: {other:?}")),
        }
    }
    Ok(format!(
        "λ = {:.5}, max |λ − H| over 10 thresholds {worst:.2e} (tol {:.2}); inadmissible φ rejected",
        pair.lambda,
        10.0 * m.mesh_size()
    ))
}

fn criterion_10() -> Outcome {
    let dir = tempfile::tempdir().map_err(e)?;
    let config: ExperimentConfig = serde_json::from_str(
        r#"{"domain": {"kind": "square", "side": 1.0}, "source": {"expr": "2 - r^2"}, "beta": [1.0, 4.0],
            "checks": [{"id": "thm1.1", "p": 1}, {"id": "saint-venant"}, {"id": "bossel-daners"}, {"id": "lemma3.1"}],
            "h": 0.08, "refine_levels": 1, "thresholds": 6}"#,
    )
    .map_err(e)?;
    let mut summaries = Vec::new();
    for (i, jobs) in [1usize, 3].into_iter().enumerate() {
        let mut exp = Experiment::from_config(config.clone(), dir.path()).map_err(e)?;
        let out = dir.path().join(format!("run{i}"));
        exp.set_output_dir(out.clone());
        let outcome = experiment::run(&exp, Some(jobs)).map_err(e)?;
        ensure(outcome.exit_code() == 0, "run reported failures")?;
        summaries.push(std::fs::read(out.join("summary.csv")).map_err(e)?);
    }
    ensure(summaries[0] == summaries[1], "summaries differ between runs")?;

    let meshes = [
        generate_domain(&DomainKind::Disk { radius: 0.8 }, 0.1, Geometry::SphereStereographic).map_err(e)?,
        generate_domain(&DomainKind::Square { side: 1.3 }, 0.1, Geometry::Warped(WarpProfile::Cone { c: 0.7 })).map_err(e)?,
        generate_domain(&DomainKind::AnnulusSector { r_inner: 0.3, r_outer: 1.0, angle: 4.0 }, 0.1, Geometry::Flat).map_err(e)?,
    ];
    for (i, m) in meshes.iter().enumerate() {
        let path = dir.path().join(format!("mesh{i}.json"));
        save_mesh(m, &path).map_err(e)?;
        let back = load_mesh(&path).map_err(e)?;
        ensure(back == *m, format!("mesh {i} changed on round-trip"))?;
    }
    Ok(format!("{} summary bytes identical across runs; {} meshes round-trip exactly", summaries[0].len(), meshes.len()))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("radial oracle agreement", criterion_1),
        ("Saint-Venant comparison", criterion_2),
        ("Bossel-Daners comparison", criterion_3),
        ("Lorentz norm comparison at n=2", criterion_4),
        ("pointwise torsion comparison", criterion_5),
        ("level-set flux identity and inequality", criterion_6),
        ("rearrangement exactness", criterion_7),
        ("profile monotonicity", criterion_8),
        ("Bossel functional self-consistency", criterion_9),
        ("determinism and round-trip", criterion_10),
    ];
    let mut failures = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = f();
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} [{secs:.1} s]", i + 1),
            Err(detail) => {
                failures += 1;
                println!("FAIL {:>2} {name}: {detail} [{secs:.1} s]", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
