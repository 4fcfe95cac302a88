//! One-dimensional quadrature, root bracketing and monotone interpolation.

use crate::error::{Error, Result};

/// 5-point Gauss-Legendre nodes and weights on [-1, 1].
const GL5: [(f64, f64); 5] = [
    (0.0, 0.568_888_888_888_888_9),
    (-0.538_469_310_105_683_1, 0.478_628_670_499_366_47),
    (0.538_469_310_105_683_1, 0.478_628_670_499_366_47),
    (-0.906_179_845_938_664, 0.236_926_885_056_189_08),
    (0.906_179_845_938_664, 0.236_926_885_056_189_08),
];

/// 8-point Gauss-Legendre nodes and weights on [-1, 1] (exact through degree 15).
const GL8: [(f64, f64); 8] = [
    (-0.183_434_642_495_649_8, 0.362_683_783_378_362),
    (0.183_434_642_495_649_8, 0.362_683_783_378_362),
    (-0.525_532_409_916_329, 0.313_706_645_877_887_3),
    (0.525_532_409_916_329, 0.313_706_645_877_887_3),
    (-0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
    (0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
    (-0.960_289_856_497_536_3, 0.101_228_536_290_376_26),
    (0.960_289_856_497_536_3, 0.101_228_536_290_376_26),
];

// Kronrod 15-point extension of the 7-point Gauss rule.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_47,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_225,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gauss_fixed<F: Fn(f64) -> f64>(rule: &[(f64, f64)], f: &F, a: f64, b: f64) -> f64 {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    rule.iter().map(|&(x, w)| w * f(mid + half * x)).sum::<f64>() * half
}

/// 5-point Gauss-Legendre on [a, b].
pub fn gauss5<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    gauss_fixed(&GL5, &f, a, b)
}

/// 8-point Gauss-Legendre on [a, b].
pub fn gauss8<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    gauss_fixed(&GL8, &f, a, b)
}

fn kronrod15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let fc = f(mid);
    let mut resk = fc * WGK[7];
    let mut resg = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let s = f(mid - dx) + f(mid + dx);
        resk += WGK[j] * s;
        if j % 2 == 1 {
            resg += WG[j / 2] * s;
        }
    }
    (resk * half, ((resk - resg) * half).abs())
}

/// Adaptive Gauss-Kronrod (G7/K15) integration on [a, b] to the requested
/// relative tolerance (with a tiny absolute floor).
pub fn adaptive<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64) -> Result<f64> {
    adaptive_with_floor(f, a, b, rel_tol, 0.0)
}

/// As [`adaptive`], accepting any error estimate below `abs_tol`.
pub fn adaptive_with_floor<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64, abs_tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let (whole, err) = kronrod15(&f, a, b);
    let abs_floor = 1e-300_f64.max(whole.abs() * 1e-15).max(abs_tol);
    let tol = (rel_tol * whole.abs()).max(abs_floor);
    if err <= tol {
        return Ok(whole);
    }
    let mut stack = vec![(a, b, whole, err, 0usize)];
    let mut total = 0.0;
    let mut steps = 0usize;
    while let Some((lo, hi, val, e, depth)) = stack.pop() {
        steps += 1;
        let local_tol = tol * (hi - lo) / (b - a);
        if e <= local_tol.max(abs_floor) || depth >= 60 || hi - lo <= 8.0 * f64::EPSILON * lo.abs().max(1e-300) {
            total += val;
            continue;
        }
        if steps > 200_000 {
            return Err(Error::Divergence(format!(
                "adaptive quadrature on [{a}, {b}] exceeded its subdivision budget"
            )));
        }
        let m = 0.5 * (lo + hi);
        let (v1, e1) = kronrod15(&f, lo, m);
        let (v2, e2) = kronrod15(&f, m, hi);
        stack.push((lo, m, v1, e1, depth + 1));
        stack.push((m, hi, v2, e2, depth + 1));
    }
    if !total.is_finite() {
        return Err(Error::Divergence(format!("non-finite integral on [{a}, {b}]")));
    }
    Ok(total)
}

/// Adaptive integration after the smoothstep substitution
/// `x = a + (b - a)(3s^2 - 2s^3)`, which tames square-root endpoint behaviour.
pub fn adaptive_smoothstep<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64) -> Result<f64> {
    adaptive_smoothstep_with_floor(f, a, b, rel_tol, 0.0)
}

/// As [`adaptive_smoothstep`] with an absolute error floor.
pub fn adaptive_smoothstep_with_floor<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    rel_tol: f64,
    abs_tol: f64,
) -> Result<f64> {
    let w = b - a;
    adaptive_with_floor(
        |s| {
            let x = a + w * s * s * (3.0 - 2.0 * s);
            f(x) * 6.0 * w * s * (1.0 - s)
        },
        0.0,
        1.0,
        rel_tol,
        abs_tol,
    )
}

/// Bisection for a sign change of `f` on `[lo, hi]` until the bracket width
/// drops below `tol`.
pub fn bisect<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64> {
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::Bracket(format!("no sign change on [{lo}, {hi}]")));
    }
    for _ in 0..400 {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Piecewise cubic Hermite interpolant with Fritsch-Carlson slopes; preserves
/// monotonicity of the data.
#[derive(Debug, Clone)]
pub struct MonotoneCubic {
    xs: Vec<f64>,
    ys: Vec<f64>,
    slopes: Vec<f64>,
}

impl MonotoneCubic {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Self {
        assert_eq!(xs.len(), ys.len());
        assert!(xs.len() >= 2);
        let n = xs.len();
        let secants: Vec<f64> = (0..n - 1)
            .map(|i| (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]))
            .collect();
        let mut slopes = vec![0.0; n];
        slopes[0] = secants[0];
        slopes[n - 1] = secants[n - 2];
        for i in 1..n - 1 {
            let (d0, d1) = (secants[i - 1], secants[i]);
            if d0 * d1 <= 0.0 {
                slopes[i] = 0.0;
            } else {
                let h0 = xs[i] - xs[i - 1];
                let h1 = xs[i + 1] - xs[i];
                let w1 = 2.0 * h1 + h0;
                let w2 = h1 + 2.0 * h0;
                slopes[i] = (w1 + w2) / (w1 / d0 + w2 / d1);
            }
        }
        MonotoneCubic { xs, ys, slopes }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return self.ys[0];
        }
        if x >= self.xs[n - 1] {
            return self.ys[n - 1];
        }
        let i = self.xs.partition_point(|&v| v <= x) - 1;
        let h = self.xs[i + 1] - self.xs[i];
        let s = (x - self.xs[i]) / h;
        let (y0, y1) = (self.ys[i], self.ys[i + 1]);
        let (m0, m1) = (self.slopes[i] * h, self.slopes[i + 1] * h);
        let s2 = s * s;
        let s3 = s2 * s;
        (2.0 * s3 - 3.0 * s2 + 1.0) * y0 + (s3 - 2.0 * s2 + s) * m0 + (-2.0 * s3 + 3.0 * s2) * y1 + (s3 - s2) * m1
    }

    pub fn nodes(&self) -> (&[f64], &[f64]) {
        (&self.xs, &self.ys)
    }
}
