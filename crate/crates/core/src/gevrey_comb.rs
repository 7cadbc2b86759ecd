//! Exact combinatorics of the derivatives of `g(k) = f(k^2)`.
//!
//! Repeated chain/product rule gives
//! `g^(n)(k) = sum a_ij(n) k^i f^(j)(k^2)` where nonzero coefficients
//! sit on `i = 2j - n`, `n/2 <= j <= n`, and obey
//! `a_ij(n) = (i+1) a_{i+1,j}(n-1) + 2 a_{i-1,j-1}(n-1)`. Indexed by the
//! depth `d = n - j` off the pure-power diagonal, the table collapses to
//! one row `C_d(n) = a_{n-2d,n-d}(n)` per order, with
//! `C_d(n) = (n-2d+1) C_{d-1}(n-1) + 2 C_d(n-1)` and `C_0(n) = 2^n`.
//! All arithmetic is arbitrary-precision and exact, including the bound
//! checks `d! C_d(n) <= 2^{n-2d} n^{2d}` and the iterated-sum estimate
//! behind them.

use std::collections::BTreeMap;

use num_bigint::{BigInt, BigUint};
use num_rational::Ratio;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Largest order the table builder accepts; rows stay ~megabytes here.
pub const MAX_TABLE_ORDER: u32 = 10_000;

/// Order cap for the symbolic differentiation oracle (term growth).
pub const MAX_SYMBOLIC_ORDER: u32 = 14;

/// The coefficients of `g^(n)(k) = sum_j a_ij(n) k^i f^(j)(k^2)`, stored
/// as the single diagonal `C_d(n) = a_{n-2d,n-d}(n)`, `0 <= d <= n/2`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoefficientTable {
    n: u32,
    diag: Vec<BigUint>,
}

impl CoefficientTable {
    pub fn order(&self) -> u32 {
        self.n
    }

    /// `C_d(n)`; zero once `2d > n`.
    pub fn diagonal(&self, d: u32) -> BigUint {
        self.diag
            .get(d as usize)
            .cloned()
            .unwrap_or_else(BigUint::zero)
    }

    /// `a_ij(n)`: nonzero only on `i = 2j - n` with `n/2 <= j <= n`.
    pub fn entry(&self, i: u32, j: u32) -> BigUint {
        if j > self.n || j < self.n - self.n / 2 || 2 * j < self.n || 2 * j - self.n != i {
            return BigUint::zero();
        }
        self.diagonal(self.n - j)
    }

    /// The nonzero entries as `(i, j, a_ij)`, shallowest diagonal first.
    pub fn entries(&self) -> impl Iterator<Item = (u32, u32, &BigUint)> + '_ {
        self.diag
            .iter()
            .enumerate()
            .map(move |(d, c)| (self.n - 2 * d as u32, self.n - d as u32, c))
    }
}

/// Builds the coefficient table of order `n` by the row recursion from
/// `a_00(0) = 1`. Exact; supported up to [`MAX_TABLE_ORDER`].
pub fn coefficient_table(n: u32) -> CoefficientTable {
    assert!(
        n <= MAX_TABLE_ORDER,
        "table order {n} exceeds the supported cap {MAX_TABLE_ORDER}"
    );
    let mut diag = vec![BigUint::one()];
    for m in 1..=n {
        let width = (m / 2 + 1) as usize;
        let mut next = Vec::with_capacity(width);
        for d in 0..width as u32 {
            let mut c = BigUint::zero();
            if d >= 1 {
                // (m - 2d + 1) C_{d-1}(m-1); the factor is >= 1 here.
                c += diag[(d - 1) as usize].clone() * (m - 2 * d + 1);
            }
            if let Some(prev) = diag.get(d as usize) {
                c += prev * 2u32;
            }
            next.push(c);
        }
        diag = next;
    }
    CoefficientTable { n, diag }
}

/// `C_d(n)` without keeping the table around.
pub fn diagonal_coefficient(n: u32, d: u32) -> BigUint {
    coefficient_table(n).diagonal(d)
}

/// Outcome of an exact inequality sweep over the table.
#[derive(Clone, Debug)]
pub struct DiagonalBoundReport {
    pub pass: bool,
    /// Largest `lhs/rhs` attained (1 means the bound is tight somewhere).
    pub max_ratio: f64,
    pub worst_order: u32,
    pub worst_diagonal: u32,
    pub entries_checked: u64,
}

fn ratio_to_f64(lhs: &BigUint, rhs: &BigUint) -> f64 {
    Ratio::new(BigInt::from(lhs.clone()), BigInt::from(rhs.clone()))
        .to_f64()
        .unwrap_or(f64::INFINITY)
}

/// Verifies `d! C_d(n) <= 2^{n-2d} n^{2d}` in exact integer arithmetic
/// for every `0 <= d <= n/2`, `n <= n_max`; `d = 0` is the equality
/// `2^n = 2^n`.
pub fn check_diagonal_bound(n_max: u32) -> Result<DiagonalBoundReport> {
    if n_max < 1 {
        return Err(Error::InvalidArgument("need n_max >= 1".into()));
    }
    let mut report = DiagonalBoundReport {
        pass: true,
        max_ratio: 0.0,
        worst_order: 0,
        worst_diagonal: 0,
        entries_checked: 0,
    };
    let mut table = coefficient_table(0);
    for n in 0..=n_max {
        if n > 0 {
            table = coefficient_table(n);
        }
        let mut factorial = BigUint::one();
        for d in 0..=n / 2 {
            if d > 0 {
                factorial *= d;
            }
            let lhs = table.diagonal(d) * &factorial;
            let rhs = BigUint::from(2u32).pow(n - 2 * d) * BigUint::from(n).pow(2 * d);
            report.entries_checked += 1;
            if lhs > rhs {
                report.pass = false;
            }
            let ratio = ratio_to_f64(&lhs, &rhs);
            if ratio > report.max_ratio {
                report.max_ratio = ratio;
                report.worst_order = n;
                report.worst_diagonal = d;
            }
        }
    }
    Ok(report)
}

/// Verifies the iterated-sum estimate the diagonal bound is distilled
/// from: `(d-1)! C_d(n) <= 2^{n-2d+1} sum_{j=1}^{n-1} j^{2d-1}` for
/// `1 <= d <= n/2`, exactly.
pub fn check_iterated_sum_bound(n_max: u32) -> Result<DiagonalBoundReport> {
    if n_max < 2 {
        return Err(Error::InvalidArgument("need n_max >= 2".into()));
    }
    let mut report = DiagonalBoundReport {
        pass: true,
        max_ratio: 0.0,
        worst_order: 0,
        worst_diagonal: 0,
        entries_checked: 0,
    };
    for n in 2..=n_max {
        let table = coefficient_table(n);
        let mut factorial = BigUint::one();
        for d in 1..=n / 2 {
            if d > 1 {
                factorial *= d - 1;
            }
            let lhs = table.diagonal(d) * &factorial;
            let mut sum = BigUint::zero();
            for j in 1..n {
                sum += BigUint::from(j).pow(2 * d - 1);
            }
            let rhs = BigUint::from(2u32).pow(n - 2 * d + 1) * sum;
            report.entries_checked += 1;
            if lhs > rhs {
                report.pass = false;
            }
            let ratio = ratio_to_f64(&lhs, &rhs);
            if ratio > report.max_ratio {
                report.max_ratio = ratio;
                report.worst_order = n;
                report.worst_diagonal = d;
            }
        }
    }
    Ok(report)
}

/// One symbolic term `coeff * k^i * f^(j)(k^2)` with `f` opaque, keyed
/// `(i, j)`.
type TermMap = BTreeMap<(u32, u32), BigUint>;

/// One derivative step by chain and product rule:
/// `d/dk [c k^i f^(j)(k^2)] = c i k^{i-1} f^(j) + 2 c k^{i+1} f^(j+1)`.
fn differentiate(terms: &TermMap) -> TermMap {
    let mut out = TermMap::new();
    for (&(i, j), c) in terms {
        if i >= 1 {
            *out.entry((i - 1, j)).or_insert_with(BigUint::zero) += c * i;
        }
        *out.entry((i + 1, j + 1)).or_insert_with(BigUint::zero) += c * 2u32;
    }
    out
}

/// Result of comparing the table against brute symbolic differentiation.
#[derive(Clone, Debug)]
pub struct SymbolicCheckReport {
    pub pass: bool,
    pub orders_checked: u32,
    /// Term count at each order; grows by one every two orders.
    pub term_counts: Vec<usize>,
    /// First disagreement `(n, i, j)`, if any.
    pub first_mismatch: Option<(u32, u32, u32)>,
}

/// Differentiates `g(k) = f(k^2)` symbolically `n_max` times (with `f`
/// an opaque symbol) and compares every collected coefficient to the
/// recursion-built table, exactly. Also re-checks the index law
/// `i = 2j - n`, `n/2 <= j <= n` on the symbolic side, where it is not
/// baked into the storage.
pub fn symbolic_derivative_check(n_max: u32) -> Result<SymbolicCheckReport> {
    if n_max > MAX_SYMBOLIC_ORDER {
        return Err(Error::InvalidArgument(format!(
            "symbolic check capped at order {MAX_SYMBOLIC_ORDER}, got {n_max}"
        )));
    }
    let mut report = SymbolicCheckReport {
        pass: true,
        orders_checked: n_max,
        term_counts: Vec::with_capacity(n_max as usize + 1),
        first_mismatch: None,
    };
    let mut terms = TermMap::from([((0u32, 0u32), BigUint::one())]);
    for n in 0..=n_max {
        if n > 0 {
            terms = differentiate(&terms);
        }
        report.term_counts.push(terms.len());
        let table = coefficient_table(n);
        let fail = |i: u32, j: u32, r: &mut SymbolicCheckReport| {
            r.pass = false;
            if r.first_mismatch.is_none() {
                r.first_mismatch = Some((n, i, j));
            }
        };
        for (&(i, j), c) in &terms {
            let index_law = 2 * j >= n && 2 * j - n == i && j <= n;
            if !index_law || *c != table.diagonal(n - j) {
                fail(i, j, &mut report);
            }
        }
        // Same support: the table must not contain terms the symbolic
        // derivative lacks.
        if terms.len() != (n / 2 + 1) as usize {
            fail(0, 0, &mut report);
        }
    }
    Ok(report)
}

/// `sum_ij a_ij(n) k^i f_j` for caller-supplied derivative values
/// `f_j = f^(j)(k^2)`: evaluates the symbolic identity numerically.
pub fn derivative_from_table(table: &CoefficientTable, k: f64, f_derivs: &[f64]) -> Result<f64> {
    let n = table.order();
    if f_derivs.len() <= n as usize {
        return Err(Error::InvalidArgument(format!(
            "need derivative values up to order {n}, got {}",
            f_derivs.len()
        )));
    }
    let mut sum = 0.0;
    for (i, j, c) in table.entries() {
        let c = c.to_f64().ok_or_else(|| {
            Error::NonFinite(format!("coefficient a_{i}{j} exceeds f64 range"))
        })?;
        sum += c * k.powi(i as i32) * f_derivs[j as usize];
    }
    if !sum.is_finite() {
        return Err(Error::NonFinite("table evaluation".into()));
    }
    Ok(sum)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn big(v: u64) -> BigUint {
        BigUint::from(v)
    }

    #[test]
    fn first_orders_match_hand_differentiation() {
        // g' = 2k f'(k^2)
        let t1 = coefficient_table(1);
        assert_eq!(t1.entry(1, 1), big(2));
        assert_eq!(t1.entries().count(), 1);
        // g'' = 2 f'(k^2) + 4k^2 f''(k^2)
        let t2 = coefficient_table(2);
        assert_eq!(t2.entry(0, 1), big(2));
        assert_eq!(t2.entry(2, 2), big(4));
        // g''' = 12k f''(k^2) + 8k^3 f'''(k^2)
        let t3 = coefficient_table(3);
        assert_eq!(t3.entry(1, 2), big(12));
        assert_eq!(t3.entry(3, 3), big(8));
        // g'''' picks up the constant term 12 f''(k^2).
        let t4 = coefficient_table(4);
        assert_eq!(t4.entry(0, 2), big(12));
        assert_eq!(t4.diagonal(2), big(12));
    }

    #[test]
    fn pure_power_diagonal_is_two_to_the_n() {
        for n in 0..=64u32 {
            assert_eq!(
                coefficient_table(n).diagonal(0),
                BigUint::from(2u32).pow(n),
                "n = {n}"
            );
        }
    }

    #[test]
    fn depth_exceeding_half_the_order_vanishes() {
        assert_eq!(diagonal_coefficient(3, 2), BigUint::zero());
        assert_eq!(diagonal_coefficient(5, 3), BigUint::zero());
        assert_eq!(diagonal_coefficient(2, 1), big(2));
    }

    #[test]
    fn off_diagonal_queries_return_zero() {
        let t = coefficient_table(6);
        assert_eq!(t.entry(1, 3), BigUint::zero(), "i != 2j - n");
        assert_eq!(t.entry(0, 2), BigUint::zero(), "j below n/2");
        assert_eq!(t.entry(8, 7), BigUint::zero(), "j above n");
    }

    #[test]
    fn entries_sit_on_the_index_diagonal() {
        let t = coefficient_table(7);
        let got: Vec<(u32, u32)> = t.entries().map(|(i, j, _)| (i, j)).collect();
        assert_eq!(got, vec![(7, 7), (5, 6), (3, 5), (1, 4)]);
        for (i, j, c) in t.entries() {
            assert_eq!(i, 2 * j - 7);
            assert!(!c.is_zero());
        }
    }

    #[test]
    fn symbolic_differentiation_agrees_through_order_fourteen() {
        let report = symbolic_derivative_check(MAX_SYMBOLIC_ORDER).unwrap();
        assert!(report.pass, "first mismatch {:?}", report.first_mismatch);
        assert_eq!(report.term_counts[0], 1);
        assert_eq!(*report.term_counts.last().unwrap(), 8);
        assert!(symbolic_derivative_check(15).is_err());
    }

    #[test]
    fn numeric_table_sum_matches_finite_differences() {
        // Sixth derivative of exp(k^2) at k = 0.7 via the table with
        // f = exp, against a Richardson-extrapolated central difference.
        let n = 6u32;
        let k = 0.7f64;
        let table = coefficient_table(n);
        let e = (k * k).exp();
        let f_derivs = vec![e; n as usize + 1];
        let via_table = derivative_from_table(&table, k, &f_derivs).unwrap();

        let g = |x: f64| (x * x).exp();
        let stencil = [1.0, -6.0, 15.0, -20.0, 15.0, -6.0, 1.0];
        let diff6 = |h: f64| {
            stencil
                .iter()
                .enumerate()
                .map(|(m, w)| w * g(k + (m as f64 - 3.0) * h))
                .sum::<f64>()
                / h.powi(6)
        };
        let h = 0.08;
        let r = |a: f64, b: f64| (4.0 * b - a) / 3.0;
        let r1 = r(diff6(h), diff6(h / 2.0));
        let r2 = r(diff6(h / 2.0), diff6(h / 4.0));
        let fd = (16.0 * r2 - r1) / 15.0;
        assert!(
            (via_table - fd).abs() <= 1e-5 * fd.abs(),
            "{via_table} vs {fd}"
        );

        // Stronger independent oracle: differentiate the power series of
        // exp(k^2) term by term (no chain rule involved).
        let mut series = 0.0f64;
        // Running m!, entering the loop at m = 3 with 2! accumulated.
        let mut m_fact = 2.0f64;
        for m in 3..30u64 {
            m_fact *= m as f64;
            let mut falling = 1.0f64;
            for step in 0..6u64 {
                falling *= (2 * m - step) as f64;
            }
            series += falling * k.powi(2 * m as i32 - 6) / m_fact;
        }
        assert!(
            (via_table - series).abs() <= 1e-10 * series.abs(),
            "{via_table} vs series {series}"
        );
    }

    #[test]
    fn diagonal_bound_holds_exactly_to_sixty() {
        let report = check_diagonal_bound(60).unwrap();
        assert!(report.pass);
        assert!(report.max_ratio <= 1.0);
        // d = 0 gives 2^n <= 2^n: the bound is attained exactly.
        assert_eq!(report.max_ratio, 1.0);
        assert_eq!(report.entries_checked, (0..=60u64).map(|n| n / 2 + 1).sum::<u64>());
    }

    #[test]
    fn iterated_sum_bound_holds_exactly_to_forty() {
        let report = check_iterated_sum_bound(40).unwrap();
        assert!(report.pass, "worst at n = {}, d = {}", report.worst_order, report.worst_diagonal);
        assert!(report.max_ratio <= 1.0);
        assert!(report.max_ratio > 0.0);
    }

    #[test]
    fn zeroth_order_is_the_identity() {
        let t = coefficient_table(0);
        assert_eq!(t.entry(0, 0), BigUint::one());
        assert_eq!(t.entries().count(), 1);
        let report = symbolic_derivative_check(0).unwrap();
        assert!(report.pass);
    }
}
