//! Families of smooth test functions with certified high-order
//! derivatives, L1-norm quadrature, scaled bumps, and Gevrey-constant
//! fitting.
//!
//! Derivatives of the exponential-composite families are evaluated through
//! exact rational prefactor recurrences (see `prefactor`), never by
//! repeated numerical differentiation: high-order bump derivatives are
//! hopelessly ill-conditioned for finite differences.

mod prefactor;

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use num_rational::BigRational;

use crate::error::{Error, Result};
use crate::quadrature::{integrate_abs, QuadOptions};
use prefactor::{dd_mul_f64, dd_sign_ln, dd_sub, Dd, Poly, PrefactorCache, Recurrence};

/// Largest derivative order for the exponential-composite families; the
/// exact prefactor polynomials grow quickly beyond this.
pub const MAX_EXP_ORDER: u32 = 60;

/// Order cap for the oscillatory family.
pub const MAX_COS_ORDER: u32 = 512;

/// Degree cap for the polynomial family.
pub const MAX_POLY_DEGREE: usize = 64;

/// Largest uniform Gevrey constant the fitter will accept.
pub const GEVREY_CONSTANT_CAP: f64 = 1e6;

enum Kind {
    /// `sum c_i x^i` with exact rational coefficients.
    Polynomial { coeffs: Poly, coeffs_f64: Vec<f64> },
    /// `cos(freq (x - center))`.
    CosWave { freq: f64 },
    /// `exp(-u^2)`.
    Gaussian,
    /// `exp(rate u)`.
    ExpLinear { rate: f64 },
    /// `exp(1 - (1 - u^2)^{-b})` on `|u| < 1`, zero outside; `b = 1` is
    /// the classic bump, and the family has Gevrey index `1 + 1/b`.
    GevreyBump { b: u32 },
}

struct Inner {
    kind: Kind,
    center: f64,
    width: f64,
    cache: Option<PrefactorCache>,
    norm_cache: Mutex<HashMap<(u32, u64, u64), f64>>,
    label: String,
}

/// A smooth test function; cheap to clone, safe to share across threads.
#[derive(Clone)]
pub struct SmoothFunction {
    inner: Arc<Inner>,
}

impl std::fmt::Debug for SmoothFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.inner.label)
    }
}

fn check_param(name: &str, v: f64) -> Result<()> {
    if !v.is_finite() {
        return Err(Error::NonFinite(format!("parameter {name}")));
    }
    Ok(())
}

impl SmoothFunction {
    fn build(kind: Kind, center: f64, width: f64, label: String) -> Self {
        let cache = match &kind {
            Kind::Gaussian => Some(PrefactorCache::new(Recurrence {
                base: Poly::one(),
                base_step: 0,
                qnum: Poly::new(vec![rat_i(0), rat_i(-2)]),
            })),
            Kind::ExpLinear { rate } => Some(PrefactorCache::new(Recurrence {
                base: Poly::one(),
                base_step: 0,
                qnum: Poly::constant(BigRational::from_float(*rate).expect("finite rate")),
            })),
            Kind::GevreyBump { b } => Some(PrefactorCache::new(Recurrence {
                base: Poly::new(vec![rat_i(1), rat_i(0), rat_i(-1)]),
                base_step: b + 1,
                qnum: Poly::new(vec![rat_i(0), rat_i(-2 * *b as i64)]),
            })),
            _ => None,
        };
        SmoothFunction {
            inner: Arc::new(Inner {
                kind,
                center,
                width,
                cache,
                norm_cache: Mutex::new(HashMap::new()),
                label,
            }),
        }
    }

    /// `exp(-((x - center)/width)^2)`.
    pub fn gaussian(center: f64, width: f64) -> Result<Self> {
        check_param("center", center)?;
        check_param("width", width)?;
        if width <= 0.0 {
            return Err(Error::InvalidArgument("gaussian width must be > 0".into()));
        }
        Ok(Self::build(
            Kind::Gaussian,
            center,
            width,
            format!("gaussian(center={center},width={width})"),
        ))
    }

    /// `exp(1 - 1/(1 - x^2))` on `(-1, 1)`, zero outside; maximum 1 at 0.
    pub fn bump() -> Self {
        Self::gevrey_bump(1).expect("b = 1 is valid")
    }

    /// The bump transplanted onto `(center - hw, center + hw)`.
    pub fn bump_scaled(center: f64, half_width: f64) -> Result<Self> {
        Self::gevrey_bump_scaled(1, center, half_width)
    }

    /// `exp(1 - (1 - x^2)^{-b})` on `(-1, 1)`: flatter at the edge as `b`
    /// grows, with Gevrey index `1 + 1/b`.
    pub fn gevrey_bump(b: u32) -> Result<Self> {
        Self::gevrey_bump_scaled(b, 0.0, 1.0)
    }

    pub fn gevrey_bump_scaled(b: u32, center: f64, half_width: f64) -> Result<Self> {
        if b == 0 || b > 8 {
            return Err(Error::InvalidArgument(
                "bump exponent must satisfy 1 <= b <= 8".into(),
            ));
        }
        check_param("center", center)?;
        check_param("half_width", half_width)?;
        if half_width <= 0.0 {
            return Err(Error::InvalidArgument("bump half-width must be > 0".into()));
        }
        let label = if b == 1 {
            format!("bump(center={center},half_width={half_width})")
        } else {
            format!("gevrey_bump(b={b},center={center},half_width={half_width})")
        };
        Ok(Self::build(Kind::GevreyBump { b }, center, half_width, label))
    }

    /// Polynomial with the given coefficients, ascending powers of `x`.
    pub fn polynomial(coeffs: &[f64]) -> Result<Self> {
        if coeffs.len() > MAX_POLY_DEGREE + 1 {
            return Err(Error::InvalidArgument(format!(
                "polynomial degree is capped at {MAX_POLY_DEGREE}"
            )));
        }
        let mut exact = Vec::with_capacity(coeffs.len());
        for (i, &c) in coeffs.iter().enumerate() {
            check_param(&format!("coefficient {i}"), c)?;
            exact.push(BigRational::from_float(c).expect("finite"));
        }
        let p = Poly::new(exact);
        let c64 = p.coeffs_f64().expect("came from f64");
        Ok(Self::build(
            Kind::Polynomial {
                coeffs: p,
                coeffs_f64: c64,
            },
            0.0,
            1.0,
            format!("polynomial(coeffs={coeffs:?})"),
        ))
    }

    /// `cos(freq (x - center))`.
    pub fn cosine_window(freq: f64, center: f64) -> Result<Self> {
        check_param("freq", freq)?;
        check_param("center", center)?;
        if freq <= 0.0 {
            return Err(Error::InvalidArgument("frequency must be > 0".into()));
        }
        Ok(Self::build(
            Kind::CosWave { freq },
            center,
            1.0,
            format!("cosine_window(freq={freq},center={center})"),
        ))
    }

    /// `exp(rate x)`.
    pub fn exponential(rate: f64) -> Result<Self> {
        check_param("rate", rate)?;
        if rate == 0.0 {
            return Err(Error::InvalidArgument(
                "use polynomial(&[1.0]) for a constant".into(),
            ));
        }
        Ok(Self::build(
            Kind::ExpLinear { rate },
            0.0,
            1.0,
            format!("exponential(rate={rate})"),
        ))
    }

    /// Human-readable family identifier (stable; used in reports).
    pub fn label(&self) -> &str {
        &self.inner.label
    }

    /// Open support interval for compactly supported families.
    pub fn support(&self) -> Option<(f64, f64)> {
        match self.inner.kind {
            Kind::GevreyBump { .. } => Some((
                self.inner.center - self.inner.width,
                self.inner.center + self.inner.width,
            )),
            _ => None,
        }
    }

    /// True when `f(-x) = f(x)` identically, so restricting to `[0, inf)`
    /// and extending evenly reproduces `f` (smooth across 0).
    pub fn even_symmetric(&self) -> bool {
        let inner = &self.inner;
        match &inner.kind {
            Kind::Gaussian | Kind::GevreyBump { .. } | Kind::CosWave { .. } => {
                inner.center == 0.0
            }
            Kind::Polynomial { coeffs_f64, .. } => {
                coeffs_f64.iter().skip(1).step_by(2).all(|&c| c == 0.0)
            }
            Kind::ExpLinear { .. } => false,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let inner = &self.inner;
        let u = (x - inner.center) / inner.width;
        match &inner.kind {
            Kind::Polynomial { coeffs_f64, .. } => horner(coeffs_f64, x),
            Kind::CosWave { freq } => (freq * (x - inner.center)).cos(),
            Kind::Gaussian => (-u * u).exp(),
            Kind::ExpLinear { rate } => (rate * u).exp(),
            Kind::GevreyBump { b } => {
                if u.abs() >= 1.0 {
                    return 0.0;
                }
                let ln_b = ((1.0 - u) * (1.0 + u)).ln();
                let t = -(*b as f64) * ln_b;
                if t > 705.0 {
                    0.0
                } else {
                    (1.0 - t.exp()).exp()
                }
            }
        }
    }

    /// `f^(n)(x)` by exact prefactor recurrence (exponential families),
    /// exact coefficient differentiation (polynomials), or phase shifting
    /// (cosine). Order caps: 60 for exponential families, 512 for cosine.
    pub fn derivative(&self, n: u32, x: f64) -> Result<f64> {
        if !x.is_finite() {
            return Err(Error::NonFinite("abscissa".into()));
        }
        if n == 0 {
            return Ok(self.eval(x));
        }
        match &self.inner.kind {
            Kind::Polynomial { coeffs, .. } => {
                if n as usize > coeffs.degree() || coeffs.is_zero() {
                    return Ok(0.0);
                }
                Ok(horner(&self.poly_deriv_coeffs(n), x))
            }
            Kind::CosWave { freq } => {
                if n > MAX_COS_ORDER {
                    return Err(Error::InvalidArgument(format!(
                        "cosine derivative order {n} exceeds cap {MAX_COS_ORDER}"
                    )));
                }
                let theta = freq * (x - self.inner.center);
                let trig = match n % 4 {
                    0 => theta.cos(),
                    1 => -theta.sin(),
                    2 => -theta.cos(),
                    _ => theta.sin(),
                };
                if trig == 0.0 {
                    return Ok(0.0);
                }
                let ln_total = n as f64 * freq.ln() + trig.abs().ln();
                assemble(trig.signum(), ln_total)
            }
            _ => self.exp_derivative(n, x, false),
        }
    }

    /// Slow reference path: prefactor polynomials evaluated in exact
    /// rational arithmetic before taking logs. Exists for cross-checking
    /// the fast float path.
    pub fn derivative_reference(&self, n: u32, x: f64) -> Result<f64> {
        match &self.inner.kind {
            Kind::Gaussian | Kind::ExpLinear { .. } | Kind::GevreyBump { .. } if n > 0 => {
                self.exp_derivative(n, x, true)
            }
            _ => self.derivative(n, x),
        }
    }

    fn exp_derivative(&self, n: u32, x: f64, exact: bool) -> Result<f64> {
        if n > MAX_EXP_ORDER {
            return Err(Error::InvalidArgument(format!(
                "derivative order {n} exceeds cap {MAX_EXP_ORDER} for {}",
                self.inner.label
            )));
        }
        let inner = &self.inner;
        let u = (x - inner.center) / inner.width;
        let pref = inner.cache.as_ref().expect("exp family has cache").get(n);
        if !u.is_finite() {
            return Err(Error::NonFinite("abscissa".into()));
        }
        let (sign, ln_q) = if exact {
            pref.eval_exact_sign_ln(u)
        } else {
            match &inner.kind {
                // The gaussian prefactor is (-1)^n H_n; the Hermite value
                // recurrence is stable at any u, unlike coefficient forms.
                Kind::Gaussian => {
                    hermite_sign_ln(n, u).unwrap_or_else(|| pref.eval_exact_sign_ln(u))
                }
                Kind::ExpLinear { rate } => {
                    let s = if *rate < 0.0 && n % 2 == 1 { -1.0 } else { 1.0 };
                    (s, n as f64 * rate.abs().ln())
                }
                _ => pref.eval_sign_ln(u),
            }
        };
        let (p_val, ln_b) = match &inner.kind {
            Kind::Gaussian => (-u * u, 0.0),
            Kind::ExpLinear { rate } => (rate * u, 0.0),
            Kind::GevreyBump { b } => {
                if u.abs() >= 1.0 {
                    return Ok(0.0);
                }
                let ln_b = ((1.0 - u) * (1.0 + u)).ln();
                let t = -(*b as f64) * ln_b;
                if t > 705.0 {
                    return Ok(0.0);
                }
                (1.0 - t.exp(), ln_b)
            }
            _ => unreachable!("exp_derivative is only called for exp families"),
        };
        if sign == 0.0 {
            return Ok(0.0);
        }
        let ln_total =
            ln_q - pref.k as f64 * ln_b + p_val - n as f64 * inner.width.ln();
        assemble(sign, ln_total)
    }

    fn poly_deriv_coeffs(&self, n: u32) -> Vec<f64> {
        let Kind::Polynomial { coeffs, .. } = &self.inner.kind else {
            unreachable!("polynomial family expected");
        };
        let mut p = coeffs.clone();
        for _ in 0..n {
            p = p.derivative();
        }
        p.coeffs_f64().unwrap_or_default()
    }

    /// `sup |f|` over a closed interval. Exact for the radially monotone
    /// families (gaussian, bumps) and the monotone exponential; a dense
    /// grid estimate for polynomials and cosines.
    pub fn sup_abs(&self, a: f64, b: f64) -> Result<f64> {
        if a > b {
            return Err(Error::InvalidArgument("empty interval".into()));
        }
        match &self.inner.kind {
            Kind::Gaussian | Kind::GevreyBump { .. } => {
                Ok(self.eval(self.inner.center.clamp(a, b)))
            }
            Kind::ExpLinear { .. } => {
                if !a.is_finite() || !b.is_finite() {
                    return Ok(f64::INFINITY);
                }
                Ok(self.eval(a).abs().max(self.eval(b).abs()))
            }
            Kind::Polynomial { .. } | Kind::CosWave { .. } => {
                if !a.is_finite() || !b.is_finite() {
                    return Err(Error::NonIntegrable(
                        "sup over an unbounded interval for a non-decaying family".into(),
                    ));
                }
                let mut m = 0.0f64;
                const GRID: usize = 4096;
                for i in 0..=GRID {
                    let x = a + (b - a) * i as f64 / GRID as f64;
                    m = m.max(self.eval(x).abs());
                }
                Ok(m)
            }
        }
    }

    /// A point beyond which `|f^(j)|`, `j <= n`, is numerically negligible
    /// (below 1e-16 of its peak, with the radius then doubled). Only the
    /// decaying families have one.
    pub fn negligible_beyond(&self, n: u32) -> Result<f64> {
        match &self.inner.kind {
            Kind::GevreyBump { .. } => Ok(self.inner.center + self.inner.width),
            Kind::Gaussian => {
                let mut radius = 4.0f64;
                for j in 0..=n {
                    radius = radius.max(self.gaussian_tail_radius(j));
                }
                Ok(self.inner.center + self.inner.width * radius)
            }
            _ => Err(Error::NonIntegrable(format!(
                "{} has no certified decay radius",
                self.inner.label
            ))),
        }
    }

    /// Scaled radius `u*` with `|Q_n(u) e^{-u^2}|` below 1e-16 of any
    /// attainable peak for `|u| > u*`, already doubled.
    fn gaussian_tail_radius(&self, n: u32) -> f64 {
        let pref = self.inner.cache.as_ref().expect("gaussian cache").get(n);
        let ln_s = pref.q.coeff_abs_sum_ln().max(0.0);
        let mut u = (ln_s + 60.0).sqrt().max(4.0);
        for _ in 0..40 {
            u = (ln_s + 60.0 + n as f64 * u.max(1.0).ln()).sqrt().max(4.0);
        }
        2.0 * u
    }

    /// `int_a^b |f^(n)|`, by adaptive quadrature with the interval
    /// pre-split at sign changes of `f^(n)`. Endpoints may be infinite for
    /// families with certified decay (gaussian) or compact support; the
    /// integration window is then truncated at the negligible-tail radius.
    pub fn l1_norm(&self, n: u32, a: f64, b: f64) -> Result<f64> {
        if a.is_nan() || b.is_nan() {
            return Err(Error::NonFinite("interval endpoint".into()));
        }
        if a > b {
            return Err(Error::InvalidArgument(format!(
                "interval [{a}, {b}] is reversed"
            )));
        }
        let key = (n, a.to_bits(), b.to_bits());
        if let Some(&v) = self
            .inner
            .norm_cache
            .lock()
            .expect("norm cache poisoned")
            .get(&key)
        {
            return Ok(v);
        }
        let value = self.l1_norm_uncached(n, a, b)?;
        self.inner
            .norm_cache
            .lock()
            .expect("norm cache poisoned")
            .insert(key, value);
        Ok(value)
    }

    fn l1_norm_uncached(&self, n: u32, a: f64, b: f64) -> Result<f64> {
        let inner = &self.inner;
        let cap = match &inner.kind {
            Kind::Polynomial { .. } => u32::MAX,
            Kind::CosWave { .. } => MAX_COS_ORDER,
            _ => MAX_EXP_ORDER,
        };
        if n > cap {
            return Err(Error::InvalidArgument(format!(
                "derivative order {n} exceeds cap {cap} for {}",
                inner.label
            )));
        }
        let (lo, hi) = match &inner.kind {
            Kind::Polynomial { coeffs, .. } => {
                if n as usize > coeffs.degree() || coeffs.is_zero() {
                    return Ok(0.0);
                }
                require_finite(a, b)?;
                (a, b)
            }
            Kind::CosWave { .. } | Kind::ExpLinear { .. } => {
                require_finite(a, b)?;
                (a, b)
            }
            Kind::GevreyBump { .. } => {
                let (sl, sh) = self.support().expect("bump has support");
                let lo = a.max(sl);
                let hi = b.min(sh);
                if lo >= hi {
                    return Ok(0.0);
                }
                (lo, hi)
            }
            Kind::Gaussian => {
                let r = self.gaussian_tail_radius(n);
                let lo = a.max(inner.center - inner.width * r);
                let hi = b.min(inner.center + inner.width * r);
                if lo >= hi {
                    // The requested window lies beyond the certified decay
                    // radius; the mass there is below float significance.
                    return Ok(0.0);
                }
                (lo, hi)
            }
        };
        let hint = self.sign_scan_hint(n, lo, hi);
        let opts = QuadOptions {
            rel_tol: 1e-9,
            abs_tol: 1e-260,
            max_evals: 6_000_000,
            scan_points: hint,
        };
        let r = integrate_abs(
            |x| self.derivative(n, x).unwrap_or(f64::NAN),
            lo,
            hi,
            &opts,
        )?;
        Ok(r.value)
    }

    /// Enough scan samples to bracket every sign change of `f^(n)`.
    fn sign_scan_hint(&self, n: u32, lo: f64, hi: f64) -> usize {
        let roots = match &self.inner.kind {
            Kind::Polynomial { coeffs, .. } => coeffs.degree(),
            Kind::CosWave { freq } => {
                (freq * (hi - lo) / std::f64::consts::PI).ceil() as usize + 2
            }
            _ => {
                let pref = self
                    .inner
                    .cache
                    .as_ref()
                    .expect("exp family cache")
                    .get(n);
                pref.q.degree() + 2
            }
        };
        (4 * roots + 65).min(20_001) | 1
    }
}

fn rat_i(v: i64) -> BigRational {
    BigRational::from_integer(v.into())
}

/// `(sign, ln |Q_n(u)|)` for the gaussian prefactor `Q_n = (-1)^n H_n`,
/// via the Hermite three-term value recurrence in double-double
/// arithmetic; `None` on overflow or heavy cancellation (caller goes
/// exact).
fn hermite_sign_ln(n: u32, u: f64) -> Option<(f64, f64)> {
    if n == 0 {
        return Some((1.0, 0.0));
    }
    let two_u = 2.0 * u;
    // H_0 = 1, H_1 = 2u, H_{k+1} = 2u H_k - 2k H_{k-1}.
    let mut prev = Dd { hi: 1.0, lo: 0.0 };
    let mut cur = Dd { hi: two_u, lo: 0.0 };
    let mut peak = cur.hi.abs().max(1.0);
    for k in 1..n {
        let next = dd_sub(dd_mul_f64(cur, two_u), dd_mul_f64(prev, 2.0 * k as f64));
        prev = cur;
        cur = next;
        peak = peak.max(cur.hi.abs());
    }
    if !cur.hi.is_finite() || cur.hi == 0.0 || cur.hi.abs() <= peak * 1e-20 {
        return None;
    }
    let (s, ln) = dd_sign_ln(cur);
    Some((if n % 2 == 1 { -s } else { s }, ln))
}

fn horner(coeffs: &[f64], x: f64) -> f64 {
    let mut acc = 0.0;
    for c in coeffs.iter().rev() {
        acc = acc * x + c;
    }
    acc
}

fn assemble(sign: f64, ln_total: f64) -> Result<f64> {
    if ln_total > 709.0 {
        return Err(Error::NonFinite("derivative overflows f64".into()));
    }
    Ok(sign * ln_total.exp())
}

fn require_finite(a: f64, b: f64) -> Result<()> {
    if !a.is_finite() || !b.is_finite() {
        return Err(Error::NonIntegrable(
            "unbounded interval for a family without certified decay".into(),
        ));
    }
    Ok(())
}

/// How a bump is scaled onto the spectral axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScaleVariant {
    /// `f((lambda - lambda0) / eps)`.
    Shift,
    /// `f((sqrt(lambda) - sqrt(lambda0)) / eps)`, for operators bounded
    /// below by 0.
    SqrtShift,
}

/// A test function recentered at `lambda0` and narrowed to width `eps`.
#[derive(Clone, Debug)]
pub struct ScaledBump {
    base: SmoothFunction,
    lambda0: f64,
    epsilon: f64,
    variant: ScaleVariant,
}

impl ScaledBump {
    pub fn new(
        base: SmoothFunction,
        lambda0: f64,
        epsilon: f64,
        variant: ScaleVariant,
    ) -> Result<Self> {
        check_param("lambda0", lambda0)?;
        check_param("epsilon", epsilon)?;
        if epsilon <= 0.0 {
            return Err(Error::InvalidArgument("epsilon must be > 0".into()));
        }
        if variant == ScaleVariant::SqrtShift && lambda0 < 0.0 {
            return Err(Error::InvalidArgument(
                "square-root scaling needs lambda0 >= 0".into(),
            ));
        }
        Ok(ScaledBump {
            base,
            lambda0,
            epsilon,
            variant,
        })
    }

    pub fn base(&self) -> &SmoothFunction {
        &self.base
    }

    pub fn lambda0(&self) -> f64 {
        self.lambda0
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn variant(&self) -> ScaleVariant {
        self.variant
    }

    pub fn eval(&self, lambda: f64) -> f64 {
        match self.variant {
            ScaleVariant::Shift => self.base.eval((lambda - self.lambda0) / self.epsilon),
            ScaleVariant::SqrtShift => {
                if lambda < 0.0 {
                    return 0.0;
                }
                self.base
                    .eval((lambda.sqrt() - self.lambda0.sqrt()) / self.epsilon)
            }
        }
    }

    /// Derivatives of the shift variant only:
    /// `f_eps^(n)(lambda) = eps^{-n} f^(n)((lambda - lambda0)/eps)`.
    pub fn derivative(&self, n: u32, lambda: f64) -> Result<f64> {
        match self.variant {
            ScaleVariant::Shift => {
                let u = (lambda - self.lambda0) / self.epsilon;
                let d = self.base.derivative(n, u)?;
                if d == 0.0 {
                    return Ok(0.0);
                }
                let ln_total = d.abs().ln() - n as f64 * self.epsilon.ln();
                assemble(d.signum(), ln_total)
            }
            ScaleVariant::SqrtShift => Err(Error::InvalidArgument(
                "square-root scaled derivatives go through the chain-rule \
                 coefficient table, not direct evaluation"
                    .into(),
            )),
        }
    }

    /// Support in the spectral variable, when the base is compactly
    /// supported.
    pub fn support(&self) -> Option<(f64, f64)> {
        let (l, u) = self.base.support()?;
        match self.variant {
            ScaleVariant::Shift => Some((
                self.lambda0 + self.epsilon * l,
                self.lambda0 + self.epsilon * u,
            )),
            ScaleVariant::SqrtShift => {
                let root0 = self.lambda0.sqrt();
                let hi = root0 + self.epsilon * u;
                if hi <= 0.0 {
                    return Some((0.0, 0.0));
                }
                let lo = (root0 + self.epsilon * l).max(0.0);
                Some((lo * lo, hi * hi))
            }
        }
    }

    /// Direct quadrature of `|f_eps^(n)|` (shift variant); deliberately
    /// does not shortcut through the scaling law so the law stays testable.
    pub fn l1_norm(&self, n: u32, a: f64, b: f64) -> Result<f64> {
        if self.variant != ScaleVariant::Shift {
            return Err(Error::InvalidArgument(
                "L1 norms implemented for the shift variant".into(),
            ));
        }
        let (lo, hi) = match self.support() {
            Some((sl, sh)) => (a.max(sl), b.min(sh)),
            None => (a, b),
        };
        if lo >= hi {
            return Ok(0.0);
        }
        require_finite(lo, hi)?;
        let hint = self.base.sign_scan_hint(n, lo, hi);
        let opts = QuadOptions {
            rel_tol: 1e-9,
            abs_tol: 1e-260,
            max_evals: 6_000_000,
            scan_points: hint,
        };
        let r = integrate_abs(
            |x| self.derivative(n, x).unwrap_or(f64::NAN),
            lo,
            hi,
            &opts,
        )?;
        Ok(r.value)
    }

    pub fn sup_abs(&self) -> Result<f64> {
        self.base.sup_abs(f64::NEG_INFINITY, f64::INFINITY).or_else(|_| {
            // Non-decaying base: fall back to the support-mapped window.
            match self.support() {
                Some((l, u)) => self.base.sup_abs(l, u),
                None => Err(Error::NonIntegrable(
                    "sup of an unbounded, non-decaying profile".into(),
                )),
            }
        })
    }
}

/// Result of fitting the smallest uniform derivative-growth constant:
/// `||f^(n)||_1 <= C^{n+1} n^{sn}` for all `n <= n_max` (the factor
/// `n^{sn}` reads as 1 at `n = 0`).
#[derive(Clone, Debug)]
pub struct GevreyFit {
    pub s: f64,
    pub n_max: u32,
    pub interval: (f64, f64),
    /// `||f^(n)||_1` for `n = 0..=n_max`.
    pub norms: Vec<f64>,
    /// Smallest admissible constant per order.
    pub implied_c: Vec<f64>,
    /// `max_n implied_c[n]`: the smallest uniform constant.
    pub c_star: f64,
    /// `c_star` rounded up to a 1% logarithmic grid, or `None` when it
    /// exceeds the cap (the function is not in the class up to `n_max`).
    pub c: Option<f64>,
    /// True when the per-order constants are still climbing at `n_max`,
    /// the numerical signature of a function outside the class.
    pub growing: bool,
}

impl GevreyFit {
    pub fn admitted(&self) -> bool {
        self.c.is_some()
    }
}

/// Fits the growth constant of Gevrey index `s` over `n <= n_max`.
pub fn gevrey_constant_fit(
    f: &SmoothFunction,
    s: f64,
    n_max: u32,
    a: f64,
    b: f64,
) -> Result<GevreyFit> {
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::InvalidArgument("Gevrey index must be positive".into()));
    }
    if n_max < 2 {
        return Err(Error::InvalidArgument("need n_max >= 2 to fit".into()));
    }
    let mut norms = Vec::with_capacity(n_max as usize + 1);
    for n in 0..=n_max {
        norms.push(f.l1_norm(n, a, b)?);
    }
    let mut implied = Vec::with_capacity(norms.len());
    for (n, &norm) in norms.iter().enumerate() {
        if norm <= 0.0 {
            implied.push(0.0);
            continue;
        }
        let ln_c = if n == 0 {
            norm.ln()
        } else {
            (norm.ln() - s * n as f64 * (n as f64).ln()) / (n as f64 + 1.0)
        };
        implied.push(ln_c.exp());
    }
    let c_star = implied.iter().cloned().fold(0.0f64, f64::max);
    let c = if c_star <= GEVREY_CONSTANT_CAP {
        Some(round_up_percent_grid(c_star))
    } else {
        None
    };
    let last = implied[n_max as usize];
    let mid = implied[(n_max / 2) as usize];
    let growing = last > 0.0 && last >= c_star * (1.0 - 1e-9) && last > mid * 1.05;
    if let Some(cv) = c {
        for (n, &norm) in norms.iter().enumerate() {
            if norm <= 0.0 {
                continue;
            }
            let ln_rhs = (n as f64 + 1.0) * cv.ln()
                + if n == 0 {
                    0.0
                } else {
                    s * n as f64 * (n as f64).ln()
                };
            if norm.ln() > ln_rhs + 1e-9 {
                return Err(Error::DegenerateFit(format!(
                    "rounded constant fails at order {n}"
                )));
            }
        }
    }
    Ok(GevreyFit {
        s,
        n_max,
        interval: (a, b),
        norms,
        implied_c: implied,
        c_star,
        c,
        growing,
    })
}

fn round_up_percent_grid(c_star: f64) -> f64 {
    if c_star <= 0.0 {
        return 0.0;
    }
    let step = 1.01f64.ln();
    let k = (c_star.ln() / step).ceil();
    let mut c = (k * step).exp();
    if c < c_star {
        c *= 1.01;
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Richardson-extrapolated central difference of f^(n-1).
    fn finite_difference(f: &SmoothFunction, n: u32, x: f64, h: f64) -> f64 {
        let d = |hh: f64| {
            (f.derivative(n - 1, x + hh).unwrap() - f.derivative(n - 1, x - hh).unwrap())
                / (2.0 * hh)
        };
        (4.0 * d(h / 2.0) - d(h)) / 3.0
    }

    #[test]
    fn gaussian_second_derivative_at_zero() {
        let f = SmoothFunction::gaussian(0.0, 1.0).unwrap();
        assert!((f.derivative(2, 0.0).unwrap() + 2.0).abs() < 1e-14);
        // Hermite values: f'''(x) = -(8x^3 - 12x) e^{-x^2}.
        let x = 0.7f64;
        let want = -(8.0 * x.powi(3) - 12.0 * x) * (-x * x).exp();
        assert!((f.derivative(3, x).unwrap() - want).abs() < 1e-13);
    }

    #[test]
    fn order_zero_is_the_function() {
        let fs = [
            SmoothFunction::gaussian(0.5, 2.0).unwrap(),
            SmoothFunction::bump(),
            SmoothFunction::gevrey_bump(3).unwrap(),
            SmoothFunction::polynomial(&[1.0, -2.0, 0.5]).unwrap(),
            SmoothFunction::cosine_window(3.0, 0.1).unwrap(),
            SmoothFunction::exponential(1.0).unwrap(),
        ];
        for f in &fs {
            for x in [-0.9, -0.25, 0.0, 0.4, 0.8] {
                assert_eq!(f.derivative(0, x).unwrap(), f.eval(x), "{}", f.label());
            }
        }
    }

    #[test]
    fn recurrence_matches_finite_differences() {
        let fs = [
            SmoothFunction::gaussian(0.0, 1.0).unwrap(),
            SmoothFunction::bump(),
            SmoothFunction::gevrey_bump(2).unwrap(),
            SmoothFunction::polynomial(&[0.3, 1.0, -0.7, 0.2, 0.05]).unwrap(),
            SmoothFunction::cosine_window(2.5, 0.0).unwrap(),
            SmoothFunction::exponential(1.0).unwrap(),
        ];
        for f in &fs {
            for n in 1..=8u32 {
                for &x in &[-0.62, -0.21, 0.13, 0.55] {
                    let exact = f.derivative(n, x).unwrap();
                    let approx = finite_difference(f, n, x, 1e-3);
                    let scale = exact.abs().max(f.derivative(n - 1, x).unwrap().abs() / 0.1);
                    if scale > 1e-8 {
                        assert!(
                            (exact - approx).abs() <= 1e-6 * scale.max(approx.abs()),
                            "{} n={n} x={x}: exact {exact} vs fd {approx}",
                            f.label()
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn bump_is_flat_at_the_edge() {
        let f = SmoothFunction::bump();
        for n in 0..=8u32 {
            for x in [-(1.0 - 1e-3), 1.0 - 1e-3] {
                assert!(
                    f.derivative(n, x).unwrap().abs() < 1e-12,
                    "n={n} x={x}"
                );
            }
            assert_eq!(f.derivative(n, 1.0).unwrap(), 0.0);
            assert_eq!(f.derivative(n, -1.5).unwrap(), 0.0);
        }
    }

    #[test]
    fn fast_and_reference_paths_agree() {
        let fs = [
            SmoothFunction::gaussian(0.2, 1.5).unwrap(),
            SmoothFunction::bump(),
            SmoothFunction::gevrey_bump(3).unwrap(),
        ];
        for f in &fs {
            for n in [1u32, 4, 9, 16] {
                for &x in &[-0.8125, -0.25, 0.375, 0.9375] {
                    let fast = f.derivative(n, x).unwrap();
                    let slow = f.derivative_reference(n, x).unwrap();
                    let scale = fast.abs().max(slow.abs());
                    if scale > 0.0 {
                        assert!(
                            (fast - slow).abs() < 1e-9 * scale,
                            "{} n={n} x={x}: fast {fast:e} vs slow {slow:e}",
                            f.label()
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn derivative_order_caps() {
        let f = SmoothFunction::bump();
        assert!(f.derivative(MAX_EXP_ORDER, 0.3).is_ok());
        assert!(f.derivative(MAX_EXP_ORDER + 1, 0.3).is_err());
        let p = SmoothFunction::polynomial(&[1.0, 1.0]).unwrap();
        assert_eq!(p.derivative(100, 0.3).unwrap(), 0.0);
    }

    #[test]
    fn bump_l1_norm_is_twice_the_max() {
        // The bump rises 0 -> 1 and falls back: total variation 2.
        let f = SmoothFunction::bump();
        let n1 = f.l1_norm(1, -1.0, 1.0).unwrap();
        assert!((n1 - 2.0).abs() < 1e-8, "got {n1}");
        // Same through infinite endpoints (support clipping).
        let n1b = f.l1_norm(1, f64::NEG_INFINITY, f64::INFINITY).unwrap();
        assert!((n1 - n1b).abs() < 1e-12);
    }

    #[test]
    fn gaussian_l1_norm_closed_forms() {
        let f = SmoothFunction::gaussian(0.0, 1.0).unwrap();
        // int |f| = sqrt(pi); int |f'| = 2.
        let n0 = f.l1_norm(0, f64::NEG_INFINITY, f64::INFINITY).unwrap();
        assert!((n0 - std::f64::consts::PI.sqrt()).abs() < 1e-8);
        let n1 = f.l1_norm(1, f64::NEG_INFINITY, f64::INFINITY).unwrap();
        assert!((n1 - 2.0).abs() < 1e-8);
    }

    #[test]
    fn polynomial_high_derivative_norm_is_zero() {
        let f = SmoothFunction::polynomial(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(f.l1_norm(3, f64::NEG_INFINITY, f64::INFINITY).unwrap(), 0.0);
        assert!(f.l1_norm(1, f64::NEG_INFINITY, f64::INFINITY).is_err());
        assert!(f.l1_norm(1, -1.0, 1.0).unwrap() > 0.0);
    }

    #[test]
    fn l1_norm_is_monotone_in_the_interval() {
        let f = SmoothFunction::gaussian(0.0, 1.0).unwrap();
        for n in 0..6u32 {
            let inner = f.l1_norm(n, -1.0, 1.0).unwrap();
            let outer = f.l1_norm(n, -3.0, 2.0).unwrap();
            assert!(inner <= outer * (1.0 + 1e-12), "n={n}");
        }
    }

    #[test]
    fn scaled_bump_support_and_sup() {
        let f = ScaledBump::new(SmoothFunction::bump(), 2.0, 0.25, ScaleVariant::Shift).unwrap();
        assert_eq!(f.support(), Some((1.75, 2.25)));
        assert_eq!(f.eval(2.0), 1.0);
        assert_eq!(f.eval(1.7), 0.0);
        assert!((f.sup_abs().unwrap() - 1.0).abs() < 1e-15);
        // Scaling law: ||f_eps^(n)|| = eps^{1-n} ||f^(n)||.
        let base = SmoothFunction::bump();
        for n in [0u32, 1, 2, 3] {
            let scaled = f.l1_norm(n, 0.0, 4.0).unwrap();
            let unscaled = base.l1_norm(n, -1.0, 1.0).unwrap();
            let predicted = 0.25f64.powi(1 - n as i32) * unscaled;
            assert!(
                (scaled - predicted).abs() < 1e-7 * predicted.max(1.0),
                "n={n}: {scaled} vs {predicted}"
            );
        }
    }

    #[test]
    fn sqrt_scaled_bump_lives_on_the_right_interval() {
        let f = ScaledBump::new(SmoothFunction::bump(), 1.0, 0.5, ScaleVariant::SqrtShift)
            .unwrap();
        // sqrt(lambda) in (0.5, 1.5) -> lambda in (0.25, 2.25).
        let (lo, hi) = f.support().unwrap();
        assert!((lo - 0.25).abs() < 1e-12 && (hi - 2.25).abs() < 1e-12);
        assert_eq!(f.eval(1.0), 1.0);
        assert_eq!(f.eval(0.2), 0.0);
        assert_eq!(f.eval(-1.0), 0.0);
        assert!(f.derivative(1, 1.0).is_err());
    }

    #[test]
    fn gevrey_fit_admits_polynomials_trivially() {
        let f = SmoothFunction::polynomial(&[0.0, 1.0, 0.0, -0.5]).unwrap();
        let fit = gevrey_constant_fit(&f, 1.0, 8, -1.0, 1.0).unwrap();
        assert!(fit.admitted());
        assert!(!fit.growing);
        // Norms vanish beyond the degree.
        assert_eq!(fit.norms[4], 0.0);
        assert_eq!(fit.norms[8], 0.0);
    }

    #[test]
    fn gevrey_fit_separates_bump_indices() {
        let f = SmoothFunction::bump();
        // The bump has index 2 = 1 + 1/1: at s = 2.5 the per-order
        // constants stabilize; at s = 1 they keep climbing.
        let good = gevrey_constant_fit(&f, 2.5, 24, -1.0, 1.0).unwrap();
        assert!(good.admitted());
        assert!(!good.growing, "implied {:?}", good.implied_c);
        let bad = gevrey_constant_fit(&f, 1.0, 24, -1.0, 1.0).unwrap();
        assert!(bad.growing, "implied {:?}", bad.implied_c);
        assert!(bad.c_star > good.c_star);
    }

    #[test]
    fn gevrey_fit_accepts_gaussian_as_analytic() {
        let g = SmoothFunction::gaussian(0.0, 1.0).unwrap();
        let fit = gevrey_constant_fit(&g, 1.0, 20, 0.0, f64::INFINITY).unwrap();
        assert!(fit.admitted(), "c_star = {}", fit.c_star);
        assert!(!fit.growing, "implied {:?}", fit.implied_c);
    }

    #[test]
    fn fit_constant_dominates_all_norms() {
        let f = SmoothFunction::gevrey_bump(2).unwrap();
        let s = 1.6;
        let fit = gevrey_constant_fit(&f, s, 20, -1.0, 1.0).unwrap();
        let c = fit.c.expect("admitted");
        for (n, &norm) in fit.norms.iter().enumerate() {
            if norm > 0.0 {
                let ln_rhs = (n as f64 + 1.0) * c.ln()
                    + if n == 0 {
                        0.0
                    } else {
                        s * n as f64 * (n as f64).ln()
                    };
                assert!(norm.ln() <= ln_rhs + 1e-9, "order {n}");
            }
        }
    }

    #[test]
    fn sup_abs_families() {
        let g = SmoothFunction::gaussian(0.5, 1.0).unwrap();
        assert_eq!(g.sup_abs(-4.0, 4.0).unwrap(), 1.0);
        assert!((g.sup_abs(1.5, 9.0).unwrap() - (-1.0f64).exp()).abs() < 1e-15);
        let c = SmoothFunction::cosine_window(7.0, 0.0).unwrap();
        let s = c.sup_abs(-1.0, 1.0).unwrap();
        assert!((s - 1.0).abs() < 1e-4);
    }
}
