//! Adaptive Gauss-Kronrod quadrature.
//!
//! A 7-point Gauss / 15-point Kronrod pair is applied per segment; the
//! segment with the largest error estimate is bisected until the summed
//! estimate meets the requested tolerance. All nodes are interior, so
//! integrands may be singular exactly at an endpoint as long as the
//! integral converges fast enough for the subdivision budget.

use crate::error::{Error, Result};

/// Kronrod abscissae for `[-1, 1]`, positive half, descending.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_2,
    0.949_107_912_342_758_524_5,
    0.864_864_423_359_769_072_8,
    0.741_531_185_599_394_439_9,
    0.586_087_235_467_691_130_3,
    0.405_845_151_377_397_166_9,
    0.207_784_955_007_898_467_6,
    0.0,
];

/// Kronrod weights matching `XGK`.
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_964,
    0.063_092_092_629_978_553_291,
    0.104_790_010_322_250_183_84,
    0.140_653_259_715_525_918_75,
    0.169_004_726_639_267_902_83,
    0.190_350_578_064_785_409_91,
    0.204_432_940_075_298_892_41,
    0.209_482_141_084_727_828_01,
];

/// Gauss weights for the embedded 7-point rule (nodes `XGK[1,3,5,7]`).
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_27,
    0.279_705_391_489_276_667_90,
    0.381_830_050_505_118_944_95,
    0.417_959_183_673_469_387_76,
];

#[derive(Clone, Copy, Debug)]
pub struct QuadOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_evals: u64,
    /// Uniform samples used when scanning for sign changes.
    pub scan_points: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions {
            rel_tol: 1e-10,
            abs_tol: 1e-15,
            max_evals: 2_000_000,
            scan_points: 257,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct QuadResult {
    pub value: f64,
    /// Conservative estimate of the absolute error.
    pub error_bound: f64,
    pub evals: u64,
}

#[derive(Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

/// One Gauss-Kronrod 7-15 application on `[a, b]`.
fn qk15(f: &mut dyn FnMut(f64) -> f64, a: f64, b: f64) -> Result<Segment> {
    let centre = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(centre);
    if !fc.is_finite() {
        return Err(Error::NonFinite(format!("integrand at {centre}")));
    }
    let mut resg = WG[3] * fc;
    let mut resk = WGK[7] * fc;
    let mut resabs = WGK[7] * fc.abs();
    let mut fv = [0.0f64; 15];
    fv[7] = fc;
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(centre - dx);
        let f2 = f(centre + dx);
        if !f1.is_finite() || !f2.is_finite() {
            return Err(Error::NonFinite(format!(
                "integrand near [{a}, {b}]"
            )));
        }
        fv[j] = f1;
        fv[14 - j] = f2;
        resk += WGK[j] * (f1 + f2);
        resabs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            resg += WG[j / 2] * (f1 + f2);
        }
    }
    let reskh = 0.5 * resk;
    let mut resasc = WGK[7] * (fc - reskh).abs();
    for (j, &v) in fv.iter().enumerate() {
        if j != 7 {
            resasc += WGK[j.min(14 - j)] * (v - reskh).abs();
        }
    }
    let value = resk * half;
    resasc *= half.abs();
    resabs *= half.abs();
    let mut err = ((resk - resg) * half).abs();
    if resasc != 0.0 && err != 0.0 {
        err = resasc * (1.0f64).min((200.0 * err / resasc).powf(1.5));
    }
    let tiny = f64::MIN_POSITIVE / (50.0 * f64::EPSILON);
    if resabs > tiny {
        err = err.max(50.0 * f64::EPSILON * resabs);
    }
    Ok(Segment {
        a,
        b,
        value,
        error: err,
    })
}

/// Integrates `f` over `[a, b]` to the requested tolerance.
pub fn integrate(
    mut f: impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    opts: &QuadOptions,
) -> Result<QuadResult> {
    integrate_dyn(&mut f, a, b, opts)
}

fn integrate_dyn(
    f: &mut dyn FnMut(f64) -> f64,
    a: f64,
    b: f64,
    opts: &QuadOptions,
) -> Result<QuadResult> {
    if !a.is_finite() || !b.is_finite() {
        return Err(Error::InvalidArgument(
            "integration endpoints must be finite".into(),
        ));
    }
    if a > b {
        return Err(Error::InvalidArgument(format!(
            "integration interval [{a}, {b}] is reversed"
        )));
    }
    if a == b {
        return Ok(QuadResult {
            value: 0.0,
            error_bound: 0.0,
            evals: 0,
        });
    }
    let mut evals: u64 = 15;
    let mut segs = vec![qk15(f, a, b)?];
    loop {
        let value: f64 = segs.iter().map(|s| s.value).sum();
        let error: f64 = segs.iter().map(|s| s.error).sum();
        let tol = opts.abs_tol.max(opts.rel_tol * value.abs());
        if error <= tol {
            return Ok(QuadResult {
                value,
                error_bound: error,
                evals,
            });
        }
        if evals + 30 > opts.max_evals {
            return Err(Error::QuadratureAccuracy {
                value,
                error_estimate: error,
            });
        }
        let mut worst = 0;
        for (i, s) in segs.iter().enumerate() {
            if s.error > segs[worst].error {
                worst = i;
            }
        }
        let Segment { a: sa, b: sb, .. } = segs[worst];
        let mid = 0.5 * (sa + sb);
        if mid <= sa || mid >= sb {
            // Interval cannot be subdivided further in f64.
            return Err(Error::QuadratureAccuracy {
                value,
                error_estimate: error,
            });
        }
        let left = qk15(f, sa, mid)?;
        let right = qk15(f, mid, sb)?;
        evals += 30;
        segs[worst] = left;
        segs.push(right);
    }
}

/// Locates sign changes of `f` on `[a, b]` by uniform scan plus bisection.
/// Returned points are strictly inside `(a, b)`, ascending.
pub fn find_sign_changes(
    mut f: impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    scan_points: usize,
) -> Vec<f64> {
    let n = scan_points.max(3);
    let mut roots = Vec::new();
    if !(a < b) {
        return roots;
    }
    let mut x_prev = a;
    let mut s_prev = f(a).signum();
    for i in 1..n {
        let x = if i == n - 1 {
            b
        } else {
            a + (b - a) * i as f64 / (n - 1) as f64
        };
        let s = f(x).signum();
        if s == 0.0 {
            // Landed exactly on a zero; that sample is itself a split point.
            if x > a && x < b {
                roots.push(x);
            }
        } else if s_prev != 0.0 && s_prev.is_finite() && s.is_finite() && s != s_prev {
            let (mut lo, mut hi) = (x_prev, x);
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if f(mid).signum() == s_prev {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let root = 0.5 * (lo + hi);
            if root > a && root < b {
                roots.push(root);
            }
        }
        if s != 0.0 {
            s_prev = s;
        }
        x_prev = x;
    }
    roots.sort_by(f64::total_cmp);
    roots.dedup();
    roots
}

/// Integrates `|f|` over `[a, b]`: the interval is pre-split at detected
/// sign changes of `f` so each piece presents a smooth integrand.
pub fn integrate_abs(
    mut f: impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    opts: &QuadOptions,
) -> Result<QuadResult> {
    let roots = find_sign_changes(&mut f, a, b, opts.scan_points);
    let mut cuts = Vec::with_capacity(roots.len() + 2);
    cuts.push(a);
    cuts.extend(roots);
    cuts.push(b);
    let mut value = 0.0;
    let mut error = 0.0;
    let mut evals = 0;
    let piece_opts = QuadOptions {
        // Split the budget but keep per-piece tolerances; the summed error
        // is re-checked against the caller's target below.
        max_evals: opts.max_evals / (cuts.len() as u64 - 1).max(1),
        ..*opts
    };
    for w in cuts.windows(2) {
        let mut g = |x: f64| f(x).abs();
        let r = integrate_dyn(&mut g, w[0], w[1], &piece_opts)?;
        value += r.value;
        error += r.error_bound;
        evals += r.evals;
    }
    if error > opts.abs_tol.max(opts.rel_tol * value.abs()) {
        return Err(Error::QuadratureAccuracy {
            value,
            error_estimate: error,
        });
    }
    Ok(QuadResult {
        value,
        error_bound: error,
        evals,
    })
}
