//! Finite propagation speed of the discrete Schrodinger operator.
//!
//! Powers of `H` move amplitude at most one l1 step per application, so
//! `<phi1, H^n phi2>` vanishes whenever `n` is smaller than the l1 distance
//! between the supports, and two operators whose potentials agree near
//! `supp phi` produce identical quadratic moments up to twice the distance
//! to the nearest disagreement site.

use num_bigint::BigUint;
use num_traits::One;

use crate::error::{Error, Result};
use crate::lattice::{l1_dist, Hamiltonian, SiteVector};
use crate::scalar::Scalar;

/// Exact arithmetic aborts (instead of thrashing) once any single
/// amplitude outgrows this many bits.
const MAX_AMPLITUDE_BITS: u64 = 1 << 20;

/// Minimal l1 distance between the supports of two vectors.
pub fn separation<S: Scalar>(phi1: &SiteVector<S>, phi2: &SiteVector<S>) -> Result<u64> {
    if phi1.lattice() != phi2.lattice() {
        return Err(Error::BoxMismatch);
    }
    let a = phi1.support();
    let b = phi2.support();
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySupport);
    }
    Ok(set_distance(&a, &b))
}

/// Minimal l1 distance between two nonempty site sets.
pub fn set_distance(a: &[Vec<i64>], b: &[Vec<i64>]) -> u64 {
    let mut best = i64::MAX;
    for x in a {
        for y in b {
            best = best.min(l1_dist(x, y));
        }
    }
    best as u64
}

/// The sequence `m_n = <phi1, H^n phi2>` for `n = 0..=n_max`, together with
/// provenance of the operator that produced it.
#[derive(Clone, Debug)]
pub struct MomentSequence<S> {
    values: Vec<S>,
    separation: Option<u64>,
    fingerprint: u64,
}

impl<S: Scalar> MomentSequence<S> {
    pub fn values(&self) -> &[S] {
        &self.values
    }

    pub fn value(&self, n: u32) -> &S {
        &self.values[n as usize]
    }

    pub fn order(&self) -> u32 {
        (self.values.len() - 1) as u32
    }

    /// l1 distance between the supports of the two vectors, when both were
    /// nonempty.
    pub fn separation(&self) -> Option<u64> {
        self.separation
    }

    /// Fingerprint of the operator the moments were taken against.
    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }
}

/// Computes `<phi1, H^n phi2>` for `n = 0..=n_max` by repeated operator
/// application.
///
/// The box must satisfy `half_width >= support_radius + n_max` (support
/// radius is the larger l1 radius of the two vectors), which keeps every
/// vector `H^n phi2` away from the Dirichlet boundary so the reported
/// moments equal their full-lattice counterparts.
pub fn moments<S: Scalar>(
    h: &Hamiltonian<S>,
    phi1: &SiteVector<S>,
    phi2: &SiteVector<S>,
    n_max: u32,
) -> Result<MomentSequence<S>> {
    if phi1.lattice() != h.lattice() || phi2.lattice() != h.lattice() {
        return Err(Error::BoxMismatch);
    }
    let radius = phi1.support_radius_l1().max(phi2.support_radius_l1());
    let required = radius + n_max as i64;
    if h.lattice().half_width() < required {
        return Err(Error::BoxTooSmall {
            actual: h.lattice().half_width(),
            required,
            support_radius: radius,
            order: n_max,
        });
    }
    let sep = match (phi1.is_zero(), phi2.is_zero()) {
        (false, false) => Some(separation(phi1, phi2)?),
        _ => None,
    };
    let mut values = Vec::with_capacity(n_max as usize + 1);
    let mut psi = phi2.clone();
    values.push(phi1.inner(&psi)?);
    for _ in 0..n_max {
        psi = h.apply(&psi)?;
        if S::EXACT && psi.max_bit_size() > MAX_AMPLITUDE_BITS {
            return Err(Error::ResourceLimit(format!(
                "exact amplitude exceeded {MAX_AMPLITUDE_BITS} bits"
            )));
        }
        values.push(phi1.inner(&psi)?);
    }
    Ok(MomentSequence {
        values,
        separation: sep,
        fingerprint: h.fingerprint(),
    })
}

/// Outcome of checking that moments vanish below the support separation.
#[derive(Clone, Debug)]
pub struct VanishingReport<S> {
    pub separation: u64,
    pub moments: MomentSequence<S>,
    /// True when every `m_n` with `n < separation` is exactly zero.
    pub all_zero_below: bool,
    /// Largest `|m_n|` over `n < separation` (zero when there are none).
    pub max_abs_below: S,
    /// `m_R` at `R = separation`, the first order that may be nonzero.
    pub boundary_moment: S,
}

/// Checks `m_n = 0` for all `n` below the support separation `R`, and
/// reports `m_R`.
pub fn check_vanishing<S: Scalar>(
    h: &Hamiltonian<S>,
    phi1: &SiteVector<S>,
    phi2: &SiteVector<S>,
) -> Result<VanishingReport<S>> {
    let sep = separation(phi1, phi2)?;
    let seq = moments(h, phi1, phi2, sep as u32)?;
    let mut max_abs = S::zero();
    let mut all_zero = true;
    for n in 0..sep {
        let a = seq.value(n as u32).abs();
        if !a.is_zero() {
            all_zero = false;
        }
        if a > max_abs {
            max_abs = a;
        }
    }
    Ok(VanishingReport {
        separation: sep,
        boundary_moment: seq.value(sep as u32).clone(),
        moments: seq,
        all_zero_below: all_zero,
        max_abs_below: max_abs,
    })
}

/// Outcome of comparing quadratic moments of two operators on one box.
#[derive(Clone, Debug)]
pub struct AgreementReport<S> {
    /// l1 distance from `supp phi` to the nearest site where the
    /// potentials differ; `None` when they are identical.
    pub separation: Option<u64>,
    /// Largest order at which agreement is asserted:
    /// `min(n_max, 2 * separation)`, or `n_max` for identical potentials.
    pub horizon: u32,
    /// `<phi, H1^n phi> - <phi, H2^n phi>` for `n = 0..=n_max`.
    pub diffs: Vec<S>,
    /// True when every difference up to the horizon is exactly zero.
    pub agree_within_horizon: bool,
    /// Largest `|diff|` at orders within the horizon.
    pub max_abs_within: S,
    /// First order (any order, also beyond the horizon) with a nonzero
    /// difference, and that difference.
    pub first_disagreement: Option<(u32, S)>,
}

/// Compares `<phi, H1^n phi>` against `<phi, H2^n phi>` for
/// `n = 0..=n_max`. Both operators must live on the same box.
pub fn moment_agreement<S: Scalar>(
    h1: &Hamiltonian<S>,
    h2: &Hamiltonian<S>,
    phi: &SiteVector<S>,
    n_max: u32,
) -> Result<AgreementReport<S>> {
    if h1.lattice() != h2.lattice() {
        return Err(Error::BoxMismatch);
    }
    if phi.is_zero() {
        return Err(Error::EmptySupport);
    }
    let disagreement = h1.potential().disagreement_sites(h2.potential())?;
    let sep = if disagreement.is_empty() {
        None
    } else {
        Some(set_distance(&phi.support(), &disagreement))
    };
    let m1 = moments(h1, phi, phi, n_max)?;
    let m2 = moments(h2, phi, phi, n_max)?;
    let horizon = match sep {
        Some(r) => n_max.min((2 * r).min(u32::MAX as u64) as u32),
        None => n_max,
    };
    let mut diffs = Vec::with_capacity(n_max as usize + 1);
    let mut first = None;
    let mut max_abs = S::zero();
    let mut agree = true;
    for n in 0..=n_max {
        let d = m1.value(n).clone() - m2.value(n).clone();
        if !d.is_zero() && first.is_none() {
            first = Some((n, d.clone()));
        }
        if n <= horizon {
            let a = d.abs();
            if !a.is_zero() {
                agree = false;
            }
            if a > max_abs {
                max_abs = a;
            }
        }
        diffs.push(d);
    }
    Ok(AgreementReport {
        separation: sep,
        horizon,
        diffs,
        agree_within_horizon: agree,
        max_abs_within: max_abs,
        first_disagreement: first,
    })
}

/// Number of shortest lattice walks between two sites,
/// `R! / prod_i |x_i - y_i|!` with `R` the l1 distance.
pub fn shortest_walk_count(x: &[i64], y: &[i64]) -> Result<BigUint> {
    if x.len() != y.len() {
        return Err(Error::InvalidArgument(
            "sites have different dimensions".into(),
        ));
    }
    let r = l1_dist(x, y);
    if r > 10_000 {
        return Err(Error::ResourceLimit(format!(
            "walk count for separation {r} would be astronomically large"
        )));
    }
    let mut count = factorial(r as u64);
    for (a, b) in x.iter().zip(y) {
        count /= factorial((a - b).unsigned_abs());
    }
    Ok(count)
}

fn factorial(n: u64) -> BigUint {
    let mut acc = BigUint::one();
    for k in 2..=n {
        acc *= BigUint::from(k);
    }
    acc
}
