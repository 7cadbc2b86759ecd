//! Exact prefactor recurrences for high-order derivatives.
//!
//! For a profile `F(u) = exp(P(u))` whose log-derivative is rational,
//! `P'(u) = q(u) / B(u)^m`, every derivative has the closed form
//! `F^(n)(u) = Q_n(u) / B(u)^{k_n} * F(u)` with polynomial `Q_n`:
//! differentiating `R_n = Q_n / B^{k_n}` and using `R_{n+1} = R_n' + R_n P'`
//! gives
//! `Q_{n+1} = (Q_n' B - k_n Q_n B') B^{m-1} + Q_n q`, `k_{n+1} = k_n + m`
//! for `m >= 1`, and `Q_{n+1} = Q_n' + Q_n q` when `P'` is a polynomial
//! (`B = 1`, `m = 0`). Coefficients are exact rationals; numerical
//! evaluation goes through a float image of the coefficients in log scale.

use std::sync::{Arc, Mutex};

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};

/// Dense univariate polynomial with exact rational coefficients,
/// ascending order, no trailing zeros.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Poly {
    coeffs: Vec<BigRational>,
}

impl Poly {
    pub fn new(mut coeffs: Vec<BigRational>) -> Self {
        while coeffs.last().is_some_and(|c| c.is_zero()) {
            coeffs.pop();
        }
        Poly { coeffs }
    }

    pub fn zero() -> Self {
        Poly { coeffs: vec![] }
    }

    pub fn constant(c: BigRational) -> Self {
        Poly::new(vec![c])
    }

    pub fn one() -> Self {
        Poly::constant(BigRational::from_integer(1.into()))
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn coeffs(&self) -> &[BigRational] {
        &self.coeffs
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let n = self.coeffs.len().max(other.coeffs.len());
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let a = self.coeffs.get(i).cloned().unwrap_or_else(BigRational::zero);
            let b = other
                .coeffs
                .get(i)
                .cloned()
                .unwrap_or_else(BigRational::zero);
            out.push(a + b);
        }
        Poly::new(out)
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        if self.is_zero() || other.is_zero() {
            return Poly::zero();
        }
        let mut out = vec![BigRational::zero(); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly::new(out)
    }

    pub fn scale(&self, c: &BigRational) -> Poly {
        Poly::new(self.coeffs.iter().map(|a| a * c).collect())
    }

    pub fn derivative(&self) -> Poly {
        if self.coeffs.len() <= 1 {
            return Poly::zero();
        }
        Poly::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, a)| a * BigRational::from_integer(i.into()))
                .collect(),
        )
    }

    pub fn eval(&self, x: &BigRational) -> BigRational {
        let mut acc = BigRational::zero();
        for c in self.coeffs.iter().rev() {
            acc = acc * x + c;
        }
        acc
    }

    /// Float image of the coefficients; `None` when any coefficient
    /// overflows f64.
    pub fn coeffs_f64(&self) -> Option<Vec<f64>> {
        let mut out = Vec::with_capacity(self.coeffs.len());
        for c in &self.coeffs {
            let v = c.to_f64()?;
            if !v.is_finite() {
                return None;
            }
            out.push(v);
        }
        Some(out)
    }

    /// Exact Chebyshev-basis coefficients on `[-1, 1]`:
    /// `p(x) = sum a_k T_k(x)`.
    pub fn to_chebyshev(&self) -> Vec<BigRational> {
        let half = BigRational::new(1.into(), 2.into());
        let mut t: Vec<BigRational> = Vec::new();
        for c in self.coeffs.iter().rev() {
            // t <- x * t + c, all in the Chebyshev basis.
            let mut next = vec![BigRational::zero(); t.len() + 1];
            for (k, v) in t.iter().enumerate() {
                if v.is_zero() {
                    continue;
                }
                if k == 0 {
                    next[1] += v;
                } else {
                    let h = v * &half;
                    next[k + 1] += &h;
                    next[k - 1] += h;
                }
            }
            if next.is_empty() {
                next.push(BigRational::zero());
            }
            next[0] += c;
            t = next;
        }
        while t.last().is_some_and(|c| c.is_zero()) {
            t.pop();
        }
        t
    }

    /// `sum |c_i|`, exactly, then rounded to f64.
    pub fn coeff_abs_sum_ln(&self) -> f64 {
        let mut acc = BigRational::zero();
        for c in &self.coeffs {
            acc += c.abs();
        }
        ln_abs_rational(&acc)
    }
}

/// Natural log of a positive big integer, accurate to ~1e-15 relative.
pub(crate) fn ln_biguint(x: &BigUint) -> f64 {
    let bits = x.bits();
    if bits == 0 {
        return f64::NEG_INFINITY;
    }
    if bits <= 53 {
        return x.to_f64().expect("fits f64").ln();
    }
    let shift = bits - 53;
    let top = (x >> shift).to_f64().expect("53 bits fit");
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

/// `ln |r|`; negative infinity at zero.
pub(crate) fn ln_abs_rational(r: &BigRational) -> f64 {
    if r.is_zero() {
        return f64::NEG_INFINITY;
    }
    ln_biguint(r.numer().abs().to_biguint().as_ref().expect("abs >= 0"))
        - ln_biguint(r.denom().abs().to_biguint().as_ref().expect("denom > 0"))
}

/// The rational structure of `P'`: `P'(u) = q(u) / B(u)^m`.
#[derive(Clone, Debug)]
pub(crate) struct Recurrence {
    pub base: Poly,
    pub base_step: u32,
    pub qnum: Poly,
}

/// One cached derivative prefactor `Q_n / B^{k}`.
#[derive(Clone, Debug)]
pub(crate) struct Prefactor {
    pub q: Poly,
    pub k: u32,
    /// Fast evaluator for the compactly supported families (whose scaled
    /// variable lives in `[-1, 1]`); `None` for polynomial log-derivative
    /// families or when coefficients overflow f64.
    pub cheb: Option<ChebEval>,
    /// Fast exact evaluator; `None` only for non-dyadic coefficients.
    pub dyadic: Option<DyadicPoly>,
}

/// Unevaluated sum `hi + lo` with `|lo| <= ulp(hi)/2`: a ~106-bit float.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Dd {
    pub hi: f64,
    pub lo: f64,
}

pub(crate) const DD_ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };

/// `a * b` as an exact sum of two floats.
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

/// `a + b` as an exact sum of two floats (Knuth).
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

/// Renormalizes `a + b` assuming `|a| >= |b|` roughly holds.
fn quick_two_sum(a: f64, b: f64) -> Dd {
    let s = a + b;
    Dd { hi: s, lo: b - (s - a) }
}

pub(crate) fn dd_mul_f64(a: Dd, b: f64) -> Dd {
    let (p, e) = two_prod(a.hi, b);
    quick_two_sum(p, a.lo.mul_add(b, e))
}

pub(crate) fn dd_add(a: Dd, b: Dd) -> Dd {
    let (s, e) = two_sum(a.hi, b.hi);
    quick_two_sum(s, e + a.lo + b.lo)
}

pub(crate) fn dd_sub(a: Dd, b: Dd) -> Dd {
    dd_add(
        a,
        Dd {
            hi: -b.hi,
            lo: -b.lo,
        },
    )
}

/// `(sign, ln |hi + lo|)` of a nonzero double-double.
pub(crate) fn dd_sign_ln(v: Dd) -> (f64, f64) {
    (v.hi.signum(), v.hi.abs().ln() + (v.lo / v.hi).ln_1p())
}

fn rational_to_dd(c: &BigRational) -> Option<Dd> {
    let hi = c.to_f64()?;
    if !hi.is_finite() {
        return None;
    }
    let rest = c - BigRational::from_float(hi).expect("finite");
    let lo = rest.to_f64()?;
    Some(Dd { hi, lo })
}

/// Chebyshev-basis double-double image of a prefactor polynomial, for
/// evaluation on `[-1, 1]`.
///
/// The monomial basis is useless here: near the interval ends its
/// envelope `sum |c_i|` exceeds `max |Q|` by many orders of magnitude, so
/// coefficient rounding alone costs ~10 digits regardless of evaluation
/// scheme. Chebyshev coefficients are bounded by `2 max |Q|`, which keeps
/// the evaluation condition number tame everywhere on the interval.
#[derive(Clone, Debug)]
pub(crate) struct ChebEval {
    a: Vec<Dd>,
    /// `sum |a_k|`: envelope for the cancellation test.
    env: f64,
}

impl ChebEval {
    fn build(q: &Poly) -> Option<ChebEval> {
        let cheb = q.to_chebyshev();
        let mut a = Vec::with_capacity(cheb.len());
        let mut env = 0.0f64;
        for c in &cheb {
            let dd = rational_to_dd(c)?;
            env += dd.hi.abs();
            a.push(dd);
        }
        env.is_finite().then_some(ChebEval { a, env })
    }

    /// Clenshaw in double-double; `None` when cancellation leaves fewer
    /// than ~10 trustworthy digits (caller falls back to exact).
    fn sign_ln(&self, u: f64) -> Option<(f64, f64)> {
        if self.a.is_empty() {
            return Some((0.0, f64::NEG_INFINITY));
        }
        let two_u = 2.0 * u;
        let mut b1 = DD_ZERO;
        let mut b2 = DD_ZERO;
        for k in (1..self.a.len()).rev() {
            let t = dd_add(dd_sub(dd_mul_f64(b1, two_u), b2), self.a[k]);
            b2 = b1;
            b1 = t;
        }
        let v = dd_add(dd_sub(dd_mul_f64(b1, u), b2), self.a[0]);
        if !v.hi.is_finite() || v.hi.abs() <= self.env * 1e-20 {
            return None;
        }
        Some(dd_sign_ln(v))
    }
}

/// `(sign, ln |v|)` of an exact rational.
pub(crate) fn rational_sign_ln(val: &BigRational) -> (f64, f64) {
    let sign = if val.is_zero() {
        0.0
    } else if val.is_negative() {
        -1.0
    } else {
        1.0
    };
    (sign, ln_abs_rational(val))
}

/// Integer image `p(x) = 2^{-scale} sum c_i x^i` of a polynomial whose
/// coefficients are all dyadic rationals (every family here qualifies).
/// Exact evaluation at a dyadic abscissa is then shift-and-add integer
/// Horner, hundreds of times faster than rational arithmetic, which
/// gcd-reduces after every step.
#[derive(Clone, Debug)]
pub(crate) struct DyadicPoly {
    coeffs: Vec<BigInt>,
    scale: u64,
}

impl DyadicPoly {
    pub fn build(q: &Poly) -> Option<DyadicPoly> {
        let mut shifts = Vec::with_capacity(q.coeffs().len());
        let mut scale = 0u64;
        for c in q.coeffs() {
            let d = c.denom().magnitude();
            if d.count_ones() != 1 {
                return None;
            }
            let s = d.trailing_zeros().unwrap_or(0);
            scale = scale.max(s);
            shifts.push(s);
        }
        let coeffs = q
            .coeffs()
            .iter()
            .zip(&shifts)
            .map(|(c, s)| c.numer() << (scale - s))
            .collect();
        Some(DyadicPoly { coeffs, scale })
    }

    /// Exact `(sign, ln |p(u)|)` at a finite `u`.
    pub fn eval_sign_ln(&self, u: f64) -> (f64, f64) {
        if self.coeffs.is_empty() {
            return (0.0, f64::NEG_INFINITY);
        }
        // u = m * 2^exp exactly.
        let (mant, exp, msign) = num_traits::Float::integer_decode(u);
        let mut m = BigInt::from(mant);
        if msign < 0 {
            m = -m;
        }
        let e: u64 = if exp >= 0 {
            m <<= exp as u64;
            0
        } else {
            (-exp) as u64
        };
        let d = self.coeffs.len() - 1;
        let mut acc = self.coeffs[d].clone();
        for i in (0..d).rev() {
            acc = acc * &m + (&self.coeffs[i] << (e * (d - i) as u64));
        }
        if acc.is_zero() {
            return (0.0, f64::NEG_INFINITY);
        }
        let sign = if acc.is_negative() { -1.0 } else { 1.0 };
        let ln = ln_biguint(acc.magnitude())
            - (e as f64 * d as f64 + self.scale as f64) * std::f64::consts::LN_2;
        (sign, ln)
    }
}

impl Prefactor {
    /// `(sign, ln |Q_n(u)|)` for `u` in `[-1, 1]`: double-double Clenshaw
    /// when the Chebyshev image exists and survives the cancellation test,
    /// exact evaluation otherwise.
    pub fn eval_sign_ln(&self, u: f64) -> (f64, f64) {
        if let Some(cheb) = &self.cheb {
            if let Some(r) = cheb.sign_ln(u) {
                return r;
            }
        }
        self.eval_exact_sign_ln(u)
    }

    /// Exact `(sign, ln |Q_n(u)|)`, independent of the float evaluators.
    pub fn eval_exact_sign_ln(&self, u: f64) -> (f64, f64) {
        debug_assert!(u.is_finite());
        if let Some(dy) = &self.dyadic {
            return dy.eval_sign_ln(u);
        }
        let ur = BigRational::from_float(u).expect("finite abscissa");
        rational_sign_ln(&self.q.eval(&ur))
    }
}

/// Lazily grown, thread-safe table of `Q_n, k_n`.
pub(crate) struct PrefactorCache {
    rec: Recurrence,
    entries: Mutex<Vec<Arc<Prefactor>>>,
}

impl PrefactorCache {
    pub fn new(rec: Recurrence) -> Self {
        let first = Arc::new(Self::finish(&rec, Poly::one(), 0));
        PrefactorCache {
            rec,
            entries: Mutex::new(vec![first]),
        }
    }

    fn finish(rec: &Recurrence, q: Poly, k: u32) -> Prefactor {
        Prefactor {
            cheb: (rec.base_step >= 1).then(|| ChebEval::build(&q)).flatten(),
            dyadic: DyadicPoly::build(&q),
            q,
            k,
        }
    }

    pub fn get(&self, n: u32) -> Arc<Prefactor> {
        let mut entries = self.entries.lock().expect("prefactor cache poisoned");
        while entries.len() <= n as usize {
            let prev = entries.last().expect("seeded with n=0").clone();
            let next = if self.rec.base_step == 0 {
                Self::finish(
                    &self.rec,
                    prev.q.derivative().add(&prev.q.mul(&self.rec.qnum)),
                    0,
                )
            } else {
                let kq = prev
                    .q
                    .scale(&BigRational::from_integer((prev.k as i64).into()));
                let core = prev
                    .q
                    .derivative()
                    .mul(&self.rec.base)
                    .add(&kq.mul(&self.rec.base.derivative()).scale(
                        &BigRational::from_integer((-1i64).into()),
                    ));
                let mut shifted = core;
                for _ in 1..self.rec.base_step {
                    shifted = shifted.mul(&self.rec.base);
                }
                Self::finish(
                    &self.rec,
                    shifted.add(&prev.q.mul(&self.rec.qnum)),
                    prev.k + self.rec.base_step,
                )
            };
            entries.push(Arc::new(next));
        }
        entries[n as usize].clone()
    }
}
