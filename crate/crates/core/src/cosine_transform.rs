//! Cosine-transform coefficients of spectral profiles `f(lambda) =
//! g(sqrt(lambda))`.
//!
//! Writing `f(H) = int_0^inf f~(t) cos(t sqrt(H)) dt` moves questions
//! about `f(H)` onto the wave propagator, whose range grows linearly in
//! `t`; everything then hinges on how fast the coefficient
//! `f~(t) = (2/pi) int_0^inf g(k) cos(tk) dk` decays. This module
//! computes `f~` by adaptive quadrature, certifies the decay bound
//! `|f~(t)| <= (2/(pi t^{n+1})) |g^{(n+1)}|_{L1(0,inf)}` and its
//! integrated tail version, handles windows scaled in the `sqrt(lambda)`
//! variable, and minimizes the bound across orders when the derivative
//! norms grow at a controlled (Gevrey) rate.

use std::f64::consts::{E, PI};

use crate::error::{Error, Result};
use crate::poly_calculus::line_fit;
use crate::quadrature::{integrate, integrate_abs, QuadOptions};
use crate::smoothfn::{GevreyFit, ScaleVariant, ScaledBump, SmoothFunction};

/// A profile `g` on `[0, inf)` whose even extension to the line is
/// smooth, defining `f(lambda) = g(sqrt(lambda))` on the spectral axis.
#[derive(Clone, Debug)]
pub struct CosineProfile {
    g: SmoothFunction,
}

impl CosineProfile {
    /// Accepts `g` whose restriction to `[0, inf)` extends evenly to a
    /// smooth integrable function: either `g` is even about 0, or it is
    /// compactly supported in `(0, inf)`. The family must also certify a
    /// tail radius for quadrature truncation.
    pub fn new(g: SmoothFunction) -> Result<Self> {
        g.negligible_beyond(0)?;
        let shifted_ok = g.support().is_some_and(|(lo, _)| lo >= 0.0);
        if !g.even_symmetric() && !shifted_ok {
            return Err(Error::InvalidArgument(format!(
                "{}: even extension across 0 is not smooth",
                g.label()
            )));
        }
        Ok(CosineProfile { g })
    }

    pub fn g(&self) -> &SmoothFunction {
        &self.g
    }

    pub fn label(&self) -> &str {
        self.g.label()
    }

    /// `f(lambda) = g(sqrt(lambda))`, the profile on the spectral axis.
    pub fn profile_value(&self, lambda: f64) -> f64 {
        debug_assert!(lambda >= 0.0);
        self.g.eval(lambda.max(0.0).sqrt())
    }

    /// Integration window `[k0, K]` outside which `g` is numerically zero.
    fn k_window(&self) -> Result<(f64, f64)> {
        let hi = self.g.negligible_beyond(0)?;
        let lo = self.g.support().map_or(0.0, |(l, _)| l.max(0.0));
        Ok((lo, hi))
    }

    /// `f~(t) = (2/pi) int_0^inf g(k) cos(tk) dk`.
    pub fn coefficient(&self, t: f64) -> Result<f64> {
        if !t.is_finite() || t < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "transform argument t = {t} must be finite and >= 0"
            )));
        }
        let (lo, hi) = self.k_window()?;
        let opts = QuadOptions {
            rel_tol: 1e-11,
            abs_tol: 1e-13,
            max_evals: 4_000_000,
            scan_points: 257,
        };
        let r = integrate(|k| self.g.eval(k) * (t * k).cos(), lo, hi, &opts)?;
        Ok(2.0 / PI * r.value)
    }

    /// The same coefficient computed in the spectral variable,
    /// `(1/pi) int_0^inf f(lambda) cos(t sqrt(lambda)) / sqrt(lambda)
    /// dlambda`, without substituting `k = sqrt(lambda)`. Exists to check
    /// the change of variables numerically; [`Self::coefficient`] is the
    /// well-conditioned form.
    pub fn coefficient_via_lambda(&self, t: f64) -> Result<f64> {
        if !t.is_finite() || t < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "transform argument t = {t} must be finite and >= 0"
            )));
        }
        let (lo, hi) = self.k_window()?;
        let opts = QuadOptions {
            rel_tol: 1e-9,
            abs_tol: 1e-12,
            max_evals: 6_000_000,
            scan_points: 257,
        };
        // The integrand has an integrable 1/sqrt(lambda) endpoint
        // singularity when g(0) != 0; the rule never samples endpoints,
        // so plain adaptive bisection converges.
        let r = integrate(
            |lam| {
                let root = lam.sqrt();
                self.g.eval(root) * (t * root).cos() / root
            },
            lo * lo,
            hi * hi,
            &opts,
        )?;
        Ok(r.value / PI)
    }

    /// `(2/(pi t^{n+1})) |g^{(n+1)}|_{L1(0,inf)}`: integrating the
    /// transform by parts `n+1` times against `cos(tk)`.
    pub fn coefficient_bound(&self, n: u32, t: f64) -> Result<f64> {
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "decay bound needs t > 0, got {t}"
            )));
        }
        let norm = self.g.l1_norm(n + 1, 0.0, f64::INFINITY)?;
        Ok(2.0 * norm / (PI * t.powi(n as i32 + 1)))
    }

    /// `int_R^inf |f~(t)| dt <= (2/(pi n R^n)) |g^{(n+1)}|_{L1(0,inf)}`,
    /// the coefficient bound integrated over the tail.
    pub fn tail_bound(&self, n: u32, r: f64) -> Result<f64> {
        if n < 1 {
            return Err(Error::InvalidArgument(
                "tail bound needs derivative order n >= 1".into(),
            ));
        }
        if !(r > 0.0) || !r.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "tail radius R = {r} must be positive"
            )));
        }
        let norm = self.g.l1_norm(n + 1, 0.0, f64::INFINITY)?;
        Ok(2.0 * norm / (PI * n as f64 * r.powi(n as i32)))
    }

    /// The tail bound minimized over the derivative order (truncated at
    /// the family's order cap); ties go to the smallest order.
    pub fn best_tail_bound(&self, r: f64) -> Result<(u32, f64)> {
        let mut best: Option<(u32, f64)> = None;
        for n in 1.. {
            match self.tail_bound(n, r) {
                Ok(b) => {
                    match best {
                        Some((_, bb)) if b >= bb => {
                            // The norms of the admissible families grow
                            // super-geometrically, so the bound sequence
                            // is log-convex: once clearly past the
                            // minimum it cannot dip again.
                            if b > bb * 1e6 {
                                break;
                            }
                        }
                        _ => best = Some((n, b)),
                    }
                    if b == 0.0 {
                        break;
                    }
                }
                Err(Error::InvalidArgument(_)) if best.is_some() => break,
                Err(e) => return Err(e),
            }
        }
        best.ok_or_else(|| Error::InvalidArgument("no admissible order".into()))
    }

    /// Kernel bound for vectors of the given norms:
    /// `|phi1| |phi2| * tail_bound(n, R)` once the propagation outside
    /// radius `R` is discarded.
    pub fn kernel_bound(&self, n: u32, r: f64, norm1: f64, norm2: f64) -> Result<f64> {
        if !(norm1 >= 0.0) || !(norm2 >= 0.0) {
            return Err(Error::InvalidArgument("vector norms must be >= 0".into()));
        }
        Ok(norm1 * norm2 * self.tail_bound(n, r)?)
    }

    /// Quadrature of `int_R^T |f~(t)| dt`, extending `T` in growing
    /// chunks until a chunk stops contributing (relative 1e-12). Always a
    /// lower estimate of the infinite tail, so comparing it against
    /// [`Self::tail_bound`] never over-reports. Returns the value and the
    /// truncation point.
    pub fn tail_quadrature(&self, r: f64) -> Result<(f64, f64)> {
        if !(r > 0.0) || !r.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "tail radius R = {r} must be positive"
            )));
        }
        let mut total = 0.0f64;
        let mut t0 = r;
        let mut w = 4.0f64.max(r);
        for _ in 0..60 {
            let t1 = t0 + w;
            let opts = QuadOptions {
                rel_tol: 1e-9,
                // Each coefficient evaluation carries ~1e-13 of absolute
                // noise, so the chunk integral cannot be resolved finer.
                abs_tol: 1e-12,
                max_evals: 4_000_000,
                scan_points: ((2.0 * w).ceil() as usize + 33).min(20_001) | 1,
            };
            let chunk = integrate_abs(
                |t| self.coefficient(t).unwrap_or(f64::NAN),
                t0,
                t1,
                &opts,
            )?
            .value;
            total += chunk;
            t0 = t1;
            // |noise| integrates to something positive that grows with the
            // chunk width, so the stop threshold needs an absolute floor.
            if chunk <= 1e-9 * total + 1e-12 {
                break;
            }
            w *= 1.5;
        }
        Ok((total, t0))
    }

    /// The tail bound at order `n` next to the measured tail integral.
    pub fn tail_comparison(&self, n: u32, r: f64) -> Result<TailComparison> {
        let bound = self.tail_bound(n, r)?;
        let (quadrature, truncated_at) = self.tail_quadrature(r)?;
        Ok(TailComparison {
            bound,
            quadrature,
            truncated_at,
        })
    }

    /// Partial reconstruction `int_0^T f~(t) cos(t sqrt(lambda)) dt`; as
    /// `T` grows this converges to `f(lambda)`, with the truncation error
    /// controlled by [`Self::tail_bound`] at `R = T`.
    pub fn reconstruct(&self, lambda: f64, t_max: f64) -> Result<f64> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "spectral point {lambda} must be finite and >= 0"
            )));
        }
        if !(t_max > 0.0) || !t_max.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "reconstruction horizon {t_max} must be positive"
            )));
        }
        let root = lambda.sqrt();
        let opts = QuadOptions {
            rel_tol: 1e-8,
            abs_tol: 1e-10,
            max_evals: 2_000_000,
            scan_points: 257,
        };
        let r = integrate(
            |t| self.coefficient(t).unwrap_or(f64::NAN) * (t * root).cos(),
            0.0,
            t_max,
            &opts,
        )?;
        Ok(r.value)
    }
}

/// Measured tail integral next to its certified bound.
#[derive(Clone, Copy, Debug)]
pub struct TailComparison {
    pub bound: f64,
    pub quadrature: f64,
    pub truncated_at: f64,
}

/// Shared validation for windows scaled in the square-root variable:
/// `g(k) = f((k - sqrt(lambda0))/eps)` must be a compactly supported
/// profile living entirely in `k >= 0`.
fn sqrt_window_checks(window: &ScaledBump) -> Result<(f64, f64)> {
    if window.variant() != ScaleVariant::SqrtShift {
        return Err(Error::InvalidArgument(
            "expects a window scaled in the square-root variable".into(),
        ));
    }
    let (lo, hi) = window.base().support().ok_or_else(|| {
        Error::InvalidArgument("window profile must be compactly supported".into())
    })?;
    if lo < -1.0 || hi > 1.0 {
        return Err(Error::InvalidArgument(format!(
            "window support [{lo}, {hi}] must sit inside [-1, 1]"
        )));
    }
    if window.lambda0().sqrt() < window.epsilon() {
        return Err(Error::InvalidArgument(
            "window reaches below k = 0: need sqrt(lambda0) >= eps".into(),
        ));
    }
    Ok((lo, hi))
}

/// Coefficient of a scaled window, in the substituted form
/// `f~_eps(t) = (2 eps / pi) int f(s) cos(eps t s + t sqrt(lambda0)) ds`.
pub fn scaled_coefficient(window: &ScaledBump, t: f64) -> Result<f64> {
    let (lo, hi) = sqrt_window_checks(window)?;
    if !t.is_finite() || t < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "transform argument t = {t} must be finite and >= 0"
        )));
    }
    let eps = window.epsilon();
    let root0 = window.lambda0().sqrt();
    let opts = QuadOptions {
        rel_tol: 1e-11,
        abs_tol: 1e-14,
        max_evals: 4_000_000,
        scan_points: 257,
    };
    let r = integrate(
        |s| window.base().eval(s) * (eps * t * s + t * root0).cos(),
        lo,
        hi,
        &opts,
    )?;
    Ok(2.0 * eps / PI * r.value)
}

/// `|f~_eps(t)| <= 2 eps |f^{(n+1)}|_1 / (pi (eps t)^{n+1})`: each
/// integration by parts now costs a factor `eps t` instead of `t`. The
/// bound does not depend on `lambda0`.
pub fn scaled_coefficient_bound(window: &ScaledBump, n: u32, t: f64) -> Result<f64> {
    sqrt_window_checks(window)?;
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "decay bound needs t > 0, got {t}"
        )));
    }
    let norm = window
        .base()
        .l1_norm(n + 1, f64::NEG_INFINITY, f64::INFINITY)?;
    let eps = window.epsilon();
    Ok(2.0 * eps * norm / (PI * (eps * t).powi(n as i32 + 1)))
}

/// Locality bound for the scaled window against a state of squared norm
/// `phi_norm_sqr`: `4 |phi|^2 |f^{(n+1)}|_1 / (n pi (2 eps R)^n)`.
pub fn scaled_locality_bound(
    window: &ScaledBump,
    phi_norm_sqr: f64,
    n: u32,
    r: f64,
) -> Result<f64> {
    sqrt_window_checks(window)?;
    if n < 1 {
        return Err(Error::InvalidArgument(
            "locality bound needs derivative order n >= 1".into(),
        ));
    }
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "separation R = {r} must be positive"
        )));
    }
    if !(phi_norm_sqr >= 0.0) || !phi_norm_sqr.is_finite() {
        return Err(Error::InvalidArgument("squared norm must be >= 0".into()));
    }
    let norm = window
        .base()
        .l1_norm(n + 1, f64::NEG_INFINITY, f64::INFINITY)?;
    let eps = window.epsilon();
    Ok(4.0 * phi_norm_sqr * norm / (n as f64 * PI * (2.0 * eps * r).powi(n as i32)))
}

/// One point of the Gevrey kernel bound: the minimizing order and the
/// bound value (also in logs, which stay finite when the value
/// underflows).
#[derive(Clone, Copy, Debug)]
pub struct GevreyKernelBound {
    pub order: u32,
    pub bound: f64,
    pub ln_bound: f64,
}

fn admitted_constant(fit: &GevreyFit) -> Result<f64> {
    fit.c.ok_or_else(|| {
        Error::DegenerateFit("derivative growth constant exceeded the admission cap".into())
    })
}

/// `ln` of `(2/(pi n)) C^{n+2} (n+1)^{s(n+1)} / R^n`: the tail bound with
/// the norm `|g^{(n+1)}|_1` replaced by its Gevrey envelope.
fn ln_order_bound(c: f64, s: f64, n: u32, r: f64) -> f64 {
    let nf = n as f64;
    (2.0 / (PI * nf)).ln() + (nf + 2.0) * c.ln() + s * (nf + 1.0) * (nf + 1.0).ln()
        - nf * r.ln()
}

fn check_radius(r: f64) -> Result<()> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "separation R = {r} must be positive"
        )));
    }
    Ok(())
}

/// The Gevrey-envelope tail bound at a fixed order `n` (valid for
/// `n + 1 <= fit.n_max`, where the envelope was verified).
pub fn gevrey_order_bound(fit: &GevreyFit, n: u32, r: f64) -> Result<f64> {
    let c = admitted_constant(fit)?;
    check_radius(r)?;
    if n < 1 || n + 1 > fit.n_max {
        return Err(Error::InvalidArgument(format!(
            "order {n} outside 1..={} covered by the fit",
            fit.n_max.saturating_sub(1)
        )));
    }
    Ok(ln_order_bound(c, fit.s, n, r).exp())
}

/// Minimizes the Gevrey-envelope bound over the order; the result decays
/// like `exp(-gamma R^{1/s})` as the separation grows.
pub fn gevrey_kernel_bound(fit: &GevreyFit, r: f64) -> Result<GevreyKernelBound> {
    let c = admitted_constant(fit)?;
    check_radius(r)?;
    if fit.n_max < 2 {
        return Err(Error::InvalidArgument(
            "fit must cover at least two orders".into(),
        ));
    }
    let mut best = (1u32, ln_order_bound(c, fit.s, 1, r));
    for n in 2..fit.n_max {
        let ln_b = ln_order_bound(c, fit.s, n, r);
        if ln_b < best.1 {
            best = (n, ln_b);
        }
    }
    Ok(GevreyKernelBound {
        order: best.0,
        bound: best.1.exp(),
        ln_bound: best.1,
    })
}

/// The minimized bound over a separation grid, with the stretched
/// exponential `C' exp(-gamma R^{1/s})` fitted to it in log space.
#[derive(Clone, Debug)]
pub struct BoundCurve {
    pub points: Vec<(u64, GevreyKernelBound)>,
    pub c: f64,
    pub gamma: f64,
    /// RMS residual of `ln bound` about the fitted line.
    pub residual: f64,
}

pub fn gevrey_bound_curve(fit: &GevreyFit, grid: &[u64]) -> Result<BoundCurve> {
    let distinct: std::collections::BTreeSet<u64> = grid.iter().copied().collect();
    if distinct.len() < 4 {
        return Err(Error::DegenerateFit(format!(
            "{} distinct separations; need 4 to fit the decay curve",
            distinct.len()
        )));
    }
    let mut points = Vec::with_capacity(grid.len());
    let mut xs = Vec::with_capacity(grid.len());
    let mut ys = Vec::with_capacity(grid.len());
    for &r in grid {
        let b = gevrey_kernel_bound(fit, r as f64)?;
        xs.push((r as f64).powf(1.0 / fit.s));
        ys.push(b.ln_bound);
        points.push((r, b));
    }
    let (intercept, slope, residual) = line_fit(&xs, &ys);
    Ok(BoundCurve {
        points,
        c: intercept.exp(),
        gamma: -slope,
        residual,
    })
}

/// Order selection that turns the per-order bound `(B n^s / R)^n` into a
/// stretched exponential: any integer with
/// `R/(2eB) <= n^s <= R/(eB)` gives `bound <= e^{-n}`, and such an `n`
/// exists once `R` is large. Returns the smallest one, or `None` when the
/// window contains no integer.
pub fn gevrey_recipe_order(s: f64, b: f64, r: f64) -> Result<Option<u32>> {
    if !(s >= 1.0) || !s.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "smoothness index s = {s} must be >= 1"
        )));
    }
    let floor_b = 2.0 / E;
    if !(b >= floor_b) || !b.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "rate constant B = {b} must be at least 2/e"
        )));
    }
    check_radius(r)?;
    let lo = (r / (2.0 * E * b)).powf(1.0 / s);
    let hi = (r / (E * b)).powf(1.0 / s);
    let n0 = lo.ceil().max(1.0);
    if n0 <= hi.floor() && n0 <= u32::MAX as f64 {
        Ok(Some(n0 as u32))
    } else {
        Ok(None)
    }
}

/// The smallest `B >= 2/e` with
/// `gevrey_order_bound(n, R) <= (B n^s / R)^n` for every covered order
/// and every `R`; feeds [`gevrey_recipe_order`].
pub fn recipe_constant(fit: &GevreyFit) -> Result<f64> {
    let c = admitted_constant(fit)?;
    if fit.n_max < 2 {
        return Err(Error::InvalidArgument(
            "fit must cover at least two orders".into(),
        ));
    }
    let s = fit.s;
    let mut b = 2.0 / E;
    for n in 1..fit.n_max {
        let nf = n as f64;
        let ln_b = ((2.0 / (PI * nf)).ln()
            + (nf + 2.0) * c.ln()
            + s * (nf + 1.0) * (nf + 1.0).ln()
            - s * nf * nf.ln())
            / nf;
        b = b.max(ln_b.exp());
    }
    Ok(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian_profile() -> CosineProfile {
        CosineProfile::new(SmoothFunction::gaussian(0.0, 1.0).unwrap()).unwrap()
    }

    fn bump_profile() -> CosineProfile {
        CosineProfile::new(SmoothFunction::bump()).unwrap()
    }

    /// Bump carried onto (1, 3): not even, but supported away from 0.
    fn shifted_profile() -> CosineProfile {
        CosineProfile::new(SmoothFunction::bump_scaled(2.0, 1.0).unwrap()).unwrap()
    }

    fn synthetic_fit(c: f64, s: f64, n_max: u32) -> GevreyFit {
        let norms = (0..=n_max)
            .map(|n| {
                let nf = n as f64;
                if n == 0 {
                    c
                } else {
                    ((nf + 1.0) * c.ln() + s * nf * nf.ln()).exp()
                }
            })
            .collect();
        GevreyFit {
            s,
            n_max,
            interval: (0.0, 1.0),
            norms,
            implied_c: Vec::new(),
            c_star: c,
            c: Some(c),
            growing: false,
        }
    }

    #[test]
    fn profiles_that_kink_at_zero_are_rejected() {
        let off_center = SmoothFunction::gaussian(0.3, 1.0).unwrap();
        assert!(matches!(
            CosineProfile::new(off_center).unwrap_err(),
            Error::InvalidArgument(_)
        ));
        // Support dips below 0 and the function is not even about 0.
        let straddling = SmoothFunction::bump_scaled(0.5, 1.0).unwrap();
        assert!(CosineProfile::new(straddling).is_err());
        // No certified tail decay at all.
        let poly = SmoothFunction::polynomial(&[1.0, 0.0, 1.0]).unwrap();
        assert!(CosineProfile::new(poly).is_err());
    }

    #[test]
    fn gaussian_transform_matches_the_closed_form() {
        let p = gaussian_profile();
        for t in [0.0, 1.0, 2.0, 5.0, 10.0, 20.0] {
            let got = p.coefficient(t).unwrap();
            let want = (-t * t / 4.0).exp() / PI.sqrt();
            assert!(
                (got - want).abs() <= 1e-9,
                "t = {t}: {got} vs {want}"
            );
        }
    }

    #[test]
    fn zero_frequency_gives_the_scaled_mean() {
        let p = bump_profile();
        let mean = p.g().l1_norm(0, 0.0, 1.0).unwrap();
        let got = p.coefficient(0.0).unwrap();
        assert!((got - 2.0 / PI * mean).abs() <= 1e-10 * mean);
    }

    #[test]
    fn both_variable_forms_agree() {
        for p in [gaussian_profile(), bump_profile(), shifted_profile()] {
            for t in [0.5, 2.0, 5.0] {
                let k_form = p.coefficient(t).unwrap();
                let l_form = p.coefficient_via_lambda(t).unwrap();
                assert!(
                    (k_form - l_form).abs() <= 1e-8,
                    "{} t = {t}: {k_form} vs {l_form}",
                    p.label()
                );
            }
        }
    }

    #[test]
    fn decay_bound_dominates_the_coefficient() {
        for p in [gaussian_profile(), bump_profile()] {
            for n in 0..=6u32 {
                for t in [1.0, 2.0, 5.0, 10.0, 20.0] {
                    let value = p.coefficient(t).unwrap().abs();
                    let bound = p.coefficient_bound(n, t).unwrap();
                    assert!(
                        value <= bound + 1e-9,
                        "{} n = {n} t = {t}: {value} vs {bound}",
                        p.label()
                    );
                }
            }
        }
    }

    #[test]
    fn doubling_t_costs_a_factor_per_order() {
        let p = bump_profile();
        for n in [0u32, 2, 5] {
            let ratio =
                p.coefficient_bound(n, 6.0).unwrap() / p.coefficient_bound(n, 3.0).unwrap();
            let want = 0.5f64.powi(n as i32 + 1);
            assert!((ratio - want).abs() <= 1e-12 * want, "n = {n}: {ratio}");
        }
    }

    #[test]
    fn bump_bounds_stay_finite_through_order_twenty() {
        let p = bump_profile();
        for n in 0..=20u32 {
            let b = p.coefficient_bound(n, 3.0).unwrap();
            assert!(b.is_finite() && b > 0.0, "n = {n}: {b}");
        }
    }

    #[test]
    fn measured_tail_sits_below_the_bound() {
        let p = gaussian_profile();
        let cmp = p.tail_comparison(3, 5.0).unwrap();
        assert!(
            cmp.quadrature <= cmp.bound * (1.0 + 1e-9) + 1e-12,
            "{} vs {}",
            cmp.quadrature,
            cmp.bound
        );
        let (n_star, best) = p.best_tail_bound(5.0).unwrap();
        assert!(n_star >= 1);
        assert!(
            cmp.quadrature <= best * (1.0 + 1e-9) + 1e-12,
            "{} vs best {best}",
            cmp.quadrature
        );
    }

    #[test]
    fn bump_tail_respects_the_minimized_bound() {
        let p = bump_profile();
        let (quad, stopped) = p.tail_quadrature(2.0).unwrap();
        let (_, best) = p.best_tail_bound(2.0).unwrap();
        assert!(stopped > 2.0);
        assert!(
            quad <= best * (1.0 + 1e-9) + 1e-12,
            "{quad} vs best {best}"
        );
    }

    #[test]
    fn minimized_tail_bound_no_worse_than_first_order() {
        let p = gaussian_profile();
        let (_, best) = p.best_tail_bound(6.0).unwrap();
        assert!(best <= p.tail_bound(1, 6.0).unwrap());
    }

    #[test]
    fn kernel_bound_scales_with_the_vector_norms() {
        let p = gaussian_profile();
        let unit = p.tail_bound(4, 7.0).unwrap();
        let scaled = p.kernel_bound(4, 7.0, 2.0, 3.0).unwrap();
        assert!((scaled - 6.0 * unit).abs() <= 1e-15 * scaled);
    }

    #[test]
    fn reconstruction_recovers_the_gaussian_profile() {
        let p = gaussian_profile();
        for lambda in [0.0, 1.3, 4.0] {
            let got = p.reconstruct(lambda, 40.0).unwrap();
            let want = p.profile_value(lambda);
            assert!(
                (got - want).abs() <= 1e-6,
                "lambda = {lambda}: {got} vs {want}"
            );
        }
    }

    #[test]
    fn truncated_reconstruction_error_obeys_the_tail_bound() {
        let p = gaussian_profile();
        let r = 6.0;
        let cap = p.tail_bound(3, r).unwrap();
        for lambda in [0.0, 1.0, 2.5, 4.0] {
            let err = (p.profile_value(lambda) - p.reconstruct(lambda, r).unwrap()).abs();
            assert!(
                err <= cap * (1.0 + 1e-9) + 1e-12,
                "lambda = {lambda}: error {err} vs {cap}"
            );
        }
    }

    fn sqrt_window(lambda0: f64, eps: f64) -> ScaledBump {
        ScaledBump::new(SmoothFunction::bump(), lambda0, eps, ScaleVariant::SqrtShift)
            .unwrap()
    }

    #[test]
    fn scaled_coefficient_respects_its_bound() {
        let w = sqrt_window(1.0, 0.25);
        let value = scaled_coefficient(&w, 20.0).unwrap().abs();
        let bound = scaled_coefficient_bound(&w, 3, 20.0).unwrap();
        assert!(value <= bound + 1e-12, "{value} vs {bound}");
    }

    #[test]
    fn scaled_bound_ignores_the_center() {
        let a = scaled_coefficient_bound(&sqrt_window(1.0, 0.25), 3, 20.0).unwrap();
        let b = scaled_coefficient_bound(&sqrt_window(2.0, 0.25), 3, 20.0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn windows_crossing_zero_are_rejected() {
        // sqrt(lambda0) = 0.2 < eps = 0.25: the window pokes below k = 0.
        let w = sqrt_window(0.04, 0.25);
        assert!(scaled_coefficient(&w, 3.0).is_err());
        let shift =
            ScaledBump::new(SmoothFunction::bump(), 1.0, 0.25, ScaleVariant::Shift).unwrap();
        assert!(scaled_coefficient(&shift, 3.0).is_err());
    }

    #[test]
    fn scaled_locality_bound_halves_per_order_when_r_doubles() {
        let w = sqrt_window(1.0, 0.25);
        for n in [1u32, 3, 6] {
            let ratio = scaled_locality_bound(&w, 1.0, n, 16.0).unwrap()
                / scaled_locality_bound(&w, 1.0, n, 8.0).unwrap();
            let want = 0.5f64.powi(n as i32);
            assert!((ratio - want).abs() <= 1e-12 * want, "n = {n}: {ratio}");
        }
        assert!(scaled_locality_bound(&w, 1.0, 0, 8.0).is_err());
    }

    #[test]
    fn analytic_envelope_decays_exponentially() {
        let fit = synthetic_fit(1.5, 1.0, 200);
        let grid: Vec<u64> = (1..=10).map(|i| 10 * i).collect();
        let curve = gevrey_bound_curve(&fit, &grid).unwrap();
        assert!(curve.gamma > 0.0, "gamma {}", curve.gamma);
        let mean_ln = curve
            .points
            .iter()
            .map(|(_, b)| b.ln_bound.abs())
            .sum::<f64>()
            / curve.points.len() as f64;
        assert!(
            curve.residual <= 0.05 * mean_ln,
            "residual {} vs scale {mean_ln}",
            curve.residual
        );
        for pair in curve.points.windows(2) {
            assert!(pair[1].1.ln_bound < pair[0].1.ln_bound, "bounds must fall");
        }
    }

    #[test]
    fn gevrey_two_envelope_decays_in_sqrt_r() {
        let fit = synthetic_fit(1.2, 2.0, 400);
        let grid = [100u64, 200, 400, 800, 1600, 3200, 6400, 10000];
        let curve = gevrey_bound_curve(&fit, &grid).unwrap();
        assert!(curve.gamma > 0.0);
        let mean_ln = curve
            .points
            .iter()
            .map(|(_, b)| b.ln_bound.abs())
            .sum::<f64>()
            / curve.points.len() as f64;
        assert!(
            curve.residual <= 0.05 * mean_ln,
            "residual {} vs scale {mean_ln}",
            curve.residual
        );
    }

    #[test]
    fn doubling_r_at_fixed_order_halves_per_order() {
        let fit = synthetic_fit(1.5, 1.0, 60);
        for n in [1u32, 4, 9] {
            let ratio = gevrey_order_bound(&fit, n, 40.0).unwrap()
                / gevrey_order_bound(&fit, n, 20.0).unwrap();
            let want = 0.5f64.powi(n as i32);
            assert!((ratio - want).abs() <= 1e-12 * want, "n = {n}: {ratio}");
        }
    }

    #[test]
    fn minimizer_beats_the_first_order() {
        let fit = synthetic_fit(1.5, 1.0, 120);
        let b = gevrey_kernel_bound(&fit, 50.0).unwrap();
        assert!(b.ln_bound <= ln_order_bound(1.5, 1.0, 1, 50.0));
        assert!(b.order > 1, "large separations favor higher orders");
        assert!((b.bound.ln() - b.ln_bound).abs() <= 1e-12 * b.ln_bound.abs());
    }

    #[test]
    fn recipe_order_certifies_e_to_minus_n() {
        let fit = crate::smoothfn::gevrey_constant_fit(
            &SmoothFunction::bump(),
            2.0,
            24,
            -1.0,
            1.0,
        )
        .unwrap();
        assert!(fit.admitted());
        let b = recipe_constant(&fit).unwrap();
        assert!(b >= 2.0 / E);
        let mut seen = 0;
        for r in [200.0, 500.0, 1000.0] {
            if let Some(n) = gevrey_recipe_order(fit.s, b, r).unwrap() {
                seen += 1;
                assert!(n >= 1 && n + 1 <= fit.n_max, "recipe order {n}");
                let nf = n as f64;
                assert!(
                    nf.powf(fit.s) >= r / (2.0 * E * b) - 1e-9
                        && nf.powf(fit.s) <= r / (E * b) + 1e-9
                );
                let bound = gevrey_order_bound(&fit, n, r).unwrap();
                assert!(
                    bound <= (-nf).exp() * (1.0 + 1e-9),
                    "R = {r}: {bound} vs e^-{n}"
                );
            }
        }
        assert!(seen >= 2, "the recipe window must contain integers for large R");
        assert!(gevrey_recipe_order(2.0, b, 0.5).unwrap().is_none());
        assert!(gevrey_recipe_order(2.0, 0.1, 100.0).is_err());
    }
}
