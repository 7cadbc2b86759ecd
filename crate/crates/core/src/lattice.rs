//! Finite lattice boxes, site vectors, potentials, and the discrete
//! Schrodinger operator with Dirichlet truncation.
//!
//! A box is `{-L, ..., L}^d`. The operator acts by
//! `(H u)(n) = sum_{|m-n|_1 = 1, m in box} u(m) + V(n) u(n)`;
//! neighbors outside the box contribute nothing.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Dense matrices larger than this are refused outright; the dense path is
/// an oracle for small boxes, not a production solver.
pub const MAX_DENSE_SITES: usize = 8192;

/// Largest site count a box may have; guards allocation of dense site data.
pub const MAX_BOX_SITES: usize = 1 << 27;

/// l1 norm of a lattice site.
pub fn l1_norm(site: &[i64]) -> i64 {
    site.iter().map(|c| c.abs()).sum()
}

/// l1 distance between two sites of equal dimension.
pub fn l1_dist(x: &[i64], y: &[i64]) -> i64 {
    debug_assert_eq!(x.len(), y.len());
    x.iter().zip(y).map(|(a, b)| (a - b).abs()).sum()
}

/// The box `{-L, ..., L}^d` with row-major site ordinals (first coordinate
/// slowest, coordinates shifted by `+L` into `[0, 2L]`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct LatticeBox {
    dim: usize,
    half_width: i64,
    side: i64,
    count: usize,
}

impl LatticeBox {
    pub fn new(dim: usize, half_width: i64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidLattice("dimension must be positive".into()));
        }
        if half_width < 1 {
            return Err(Error::InvalidLattice(format!(
                "half-width must be >= 1, got {half_width}"
            )));
        }
        let side = 2 * half_width as u128 + 1;
        let mut count: u128 = 1;
        for _ in 0..dim {
            count = count.saturating_mul(side);
            if count > MAX_BOX_SITES as u128 {
                return Err(Error::InvalidLattice(format!(
                    "box (2*{half_width}+1)^{dim} exceeds {MAX_BOX_SITES} sites"
                )));
            }
        }
        Ok(LatticeBox {
            dim,
            half_width,
            side: side as i64,
            count: count as usize,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn half_width(&self) -> i64 {
        self.half_width
    }

    /// Number of sites along one axis, `2L + 1`.
    pub fn side(&self) -> i64 {
        self.side
    }

    pub fn site_count(&self) -> usize {
        self.count
    }

    pub fn contains(&self, site: &[i64]) -> bool {
        site.len() == self.dim && site.iter().all(|c| c.abs() <= self.half_width)
    }

    /// Row-major ordinal of a site, or `None` outside the box.
    pub fn index_of(&self, site: &[i64]) -> Option<usize> {
        if !self.contains(site) {
            return None;
        }
        let mut idx: usize = 0;
        for &c in site {
            idx = idx * self.side as usize + (c + self.half_width) as usize;
        }
        Some(idx)
    }

    /// Inverse of `index_of`.
    pub fn site_of(&self, mut idx: usize) -> Vec<i64> {
        assert!(idx < self.count, "ordinal out of range");
        let mut site = vec![0i64; self.dim];
        for axis in (0..self.dim).rev() {
            site[axis] = (idx % self.side as usize) as i64 - self.half_width;
            idx /= self.side as usize;
        }
        site
    }

    /// All sites in ordinal order.
    pub fn sites(&self) -> impl Iterator<Item = Vec<i64>> + '_ {
        (0..self.count).map(move |i| self.site_of(i))
    }

    fn stride(&self, axis: usize) -> usize {
        (self.side as usize).pow((self.dim - 1 - axis) as u32)
    }
}

/// Iterates sites of the axis-aligned window `[lo, hi]` in row-major order.
fn for_each_in_window(lo: &[i64], hi: &[i64], mut visit: impl FnMut(&[i64])) {
    debug_assert_eq!(lo.len(), hi.len());
    if lo.iter().zip(hi).any(|(a, b)| a > b) {
        return;
    }
    let mut site = lo.to_vec();
    loop {
        visit(&site);
        let mut axis = site.len();
        loop {
            if axis == 0 {
                return;
            }
            axis -= 1;
            if site[axis] < hi[axis] {
                site[axis] += 1;
                break;
            }
            site[axis] = lo[axis];
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
struct Window {
    lo: Vec<i64>,
    hi: Vec<i64>,
}

/// A vector in `l^2` of the box, stored dense with a cached bounding box of
/// its support so that operator application only visits a small window.
#[derive(Clone, Debug, PartialEq)]
pub struct SiteVector<S> {
    lattice: LatticeBox,
    amps: Vec<S>,
    window: Option<Window>,
}

impl<S: Scalar> SiteVector<S> {
    pub fn zero(lattice: LatticeBox) -> Self {
        SiteVector {
            lattice,
            amps: vec![S::zero(); lattice.site_count()],
            window: None,
        }
    }

    /// Unit vector supported on one site.
    pub fn delta(lattice: LatticeBox, site: &[i64]) -> Result<Self> {
        Self::from_entries(lattice, &[(site.to_vec(), S::one())])
    }

    /// Builds from `(site, amplitude)` pairs; repeated sites accumulate.
    pub fn from_entries(lattice: LatticeBox, entries: &[(Vec<i64>, S)]) -> Result<Self> {
        let mut amps = vec![S::zero(); lattice.site_count()];
        for (site, amp) in entries {
            if !amp.is_valid() {
                return Err(Error::NonFinite(format!("amplitude at {site:?}")));
            }
            let idx = lattice.index_of(site).ok_or_else(|| {
                Error::InvalidArgument(format!("site {site:?} outside the box"))
            })?;
            amps[idx] = amps[idx].clone() + amp.clone();
        }
        let mut v = SiteVector {
            lattice,
            amps,
            window: None,
        };
        let mut lo = vec![lattice.half_width; lattice.dim];
        let mut hi = vec![-lattice.half_width; lattice.dim];
        let mut seen = false;
        for (site, _) in entries {
            let idx = lattice.index_of(site).expect("validated above");
            if !v.amps[idx].is_zero() {
                seen = true;
                for axis in 0..lattice.dim {
                    lo[axis] = lo[axis].min(site[axis]);
                    hi[axis] = hi[axis].max(site[axis]);
                }
            }
        }
        if seen {
            v.window = Some(Window { lo, hi });
        }
        Ok(v)
    }

    /// Wraps a dense amplitude slab whose nonzeros all lie in `[lo, hi]`;
    /// rescans that window for the tight support bounding box.
    fn from_dense_window(lattice: LatticeBox, amps: Vec<S>, lo: &[i64], hi: &[i64]) -> Self {
        let mut tight_lo = vec![lattice.half_width; lattice.dim];
        let mut tight_hi = vec![-lattice.half_width; lattice.dim];
        let mut seen = false;
        for_each_in_window(lo, hi, |site| {
            let idx = lattice.index_of(site).expect("window inside box");
            if !amps[idx].is_zero() {
                seen = true;
                for axis in 0..lattice.dim {
                    tight_lo[axis] = tight_lo[axis].min(site[axis]);
                    tight_hi[axis] = tight_hi[axis].max(site[axis]);
                }
            }
        });
        SiteVector {
            lattice,
            amps,
            window: seen.then_some(Window {
                lo: tight_lo,
                hi: tight_hi,
            }),
        }
    }

    pub fn lattice(&self) -> LatticeBox {
        self.lattice
    }

    pub fn is_zero(&self) -> bool {
        self.window.is_none()
    }

    /// Amplitude at a site; sites outside the box read as zero.
    pub fn amplitude(&self, site: &[i64]) -> S {
        match self.lattice.index_of(site) {
            Some(idx) => self.amps[idx].clone(),
            None => S::zero(),
        }
    }

    /// `(ordinal, amplitude)` over the support, ordinals ascending.
    pub fn iter_support(&self) -> Vec<(usize, S)> {
        let mut out = Vec::new();
        if let Some(win) = &self.window {
            for_each_in_window(&win.lo, &win.hi, |site| {
                let idx = self.lattice.index_of(site).expect("window inside box");
                if !self.amps[idx].is_zero() {
                    out.push((idx, self.amps[idx].clone()));
                }
            });
            out.sort_by_key(|(i, _)| *i);
        }
        out
    }

    /// Sites carrying nonzero amplitude.
    pub fn support(&self) -> Vec<Vec<i64>> {
        self.iter_support()
            .into_iter()
            .map(|(i, _)| self.lattice.site_of(i))
            .collect()
    }

    /// Largest l1 norm over the support; zero for the zero vector.
    pub fn support_radius_l1(&self) -> i64 {
        self.support().iter().map(|s| l1_norm(s)).max().unwrap_or(0)
    }

    /// Inner product; both vectors are real so no conjugation happens.
    /// Summation runs in ascending ordinal order over the window overlap,
    /// which keeps float results reproducible.
    pub fn inner(&self, other: &Self) -> Result<S> {
        if self.lattice != other.lattice {
            return Err(Error::BoxMismatch);
        }
        let (Some(a), Some(b)) = (&self.window, &other.window) else {
            return Ok(S::zero());
        };
        let lo: Vec<i64> = a.lo.iter().zip(&b.lo).map(|(x, y)| *x.max(y)).collect();
        let hi: Vec<i64> = a.hi.iter().zip(&b.hi).map(|(x, y)| *x.min(y)).collect();
        let mut acc = S::zero();
        for_each_in_window(&lo, &hi, |site| {
            let idx = self.lattice.index_of(site).expect("window inside box");
            acc = acc.clone() + self.amps[idx].clone() * other.amps[idx].clone();
        });
        Ok(acc)
    }

    pub fn norm_sqr(&self) -> S {
        self.inner(self).expect("same box")
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().to_f64().sqrt()
    }

    /// `c * self`.
    pub fn scale(&self, c: &S) -> Result<Self> {
        if !c.is_valid() {
            return Err(Error::NonFinite("scale factor".into()));
        }
        let mut amps = vec![S::zero(); self.lattice.site_count()];
        let Some(win) = &self.window else {
            return Ok(Self::zero(self.lattice));
        };
        for_each_in_window(&win.lo, &win.hi, |site| {
            let idx = self.lattice.index_of(site).expect("window inside box");
            amps[idx] = c.clone() * self.amps[idx].clone();
        });
        Ok(Self::from_dense_window(self.lattice, amps, &win.lo, &win.hi))
    }

    /// `c1 * v1 + c2 * v2`.
    pub fn combine(c1: &S, v1: &Self, c2: &S, v2: &Self) -> Result<Self> {
        if v1.lattice != v2.lattice {
            return Err(Error::BoxMismatch);
        }
        if !c1.is_valid() || !c2.is_valid() {
            return Err(Error::NonFinite("combination coefficient".into()));
        }
        let lattice = v1.lattice;
        let union = match (&v1.window, &v2.window) {
            (None, None) => return Ok(Self::zero(lattice)),
            (Some(w), None) | (None, Some(w)) => w.clone(),
            (Some(a), Some(b)) => Window {
                lo: a.lo.iter().zip(&b.lo).map(|(x, y)| *x.min(y)).collect(),
                hi: a.hi.iter().zip(&b.hi).map(|(x, y)| *x.max(y)).collect(),
            },
        };
        let mut amps = vec![S::zero(); lattice.site_count()];
        for_each_in_window(&union.lo, &union.hi, |site| {
            let idx = lattice.index_of(site).expect("window inside box");
            amps[idx] =
                c1.clone() * v1.amps[idx].clone() + c2.clone() * v2.amps[idx].clone();
        });
        Ok(Self::from_dense_window(lattice, amps, &union.lo, &union.hi))
    }

    /// Largest amplitude growth guard for exact arithmetic; the largest
    /// bit size over the support (0 for the zero vector).
    pub fn max_bit_size(&self) -> u64 {
        self.iter_support()
            .iter()
            .map(|(_, a)| a.bit_size())
            .max()
            .unwrap_or(0)
    }
}

impl SiteVector<num_rational::BigRational> {
    /// Nearest-float image, entry by entry.
    pub fn to_float(&self) -> SiteVector<f64> {
        let amps: Vec<f64> = self.amps.iter().map(|a| a.to_f64()).collect();
        match &self.window {
            Some(w) => SiteVector::from_dense_window(self.lattice, amps, &w.lo, &w.hi),
            None => SiteVector::zero(self.lattice),
        }
    }
}

/// A bounded potential on the box, stored per ordinal.
#[derive(Clone, Debug, PartialEq)]
pub struct Potential<S> {
    lattice: LatticeBox,
    values: Vec<S>,
    v_min: S,
    v_max: S,
}

impl<S: Scalar> Potential<S> {
    pub fn zero(lattice: LatticeBox) -> Self {
        Potential {
            lattice,
            values: vec![S::zero(); lattice.site_count()],
            v_min: S::zero(),
            v_max: S::zero(),
        }
    }

    pub fn constant(lattice: LatticeBox, value: S) -> Result<Self> {
        Self::from_fn(lattice, |_| value.clone())
    }

    pub fn from_fn(lattice: LatticeBox, mut f: impl FnMut(&[i64]) -> S) -> Result<Self> {
        let values: Vec<S> = lattice.sites().map(|s| f(&s)).collect();
        Self::from_values(lattice, values)
    }

    pub fn from_values(lattice: LatticeBox, values: Vec<S>) -> Result<Self> {
        if values.len() != lattice.site_count() {
            return Err(Error::InvalidArgument(format!(
                "potential has {} values, box has {} sites",
                values.len(),
                lattice.site_count()
            )));
        }
        let mut v_min = values[0].clone();
        let mut v_max = values[0].clone();
        for v in &values {
            if !v.is_valid() {
                return Err(Error::NonFinite("potential value".into()));
            }
            if *v < v_min {
                v_min = v.clone();
            }
            if *v > v_max {
                v_max = v.clone();
            }
        }
        Ok(Potential {
            lattice,
            values,
            v_min,
            v_max,
        })
    }

    /// Copy with one site's value replaced.
    pub fn with_site_value(&self, site: &[i64], value: S) -> Result<Self> {
        let idx = self
            .lattice
            .index_of(site)
            .ok_or_else(|| Error::InvalidArgument(format!("site {site:?} outside the box")))?;
        let mut values = self.values.clone();
        values[idx] = value;
        Self::from_values(self.lattice, values)
    }

    pub fn lattice(&self) -> LatticeBox {
        self.lattice
    }

    pub fn value_at(&self, idx: usize) -> &S {
        &self.values[idx]
    }

    pub fn value(&self, site: &[i64]) -> Result<S> {
        let idx = self
            .lattice
            .index_of(site)
            .ok_or_else(|| Error::InvalidArgument(format!("site {site:?} outside the box")))?;
        Ok(self.values[idx].clone())
    }

    /// `(min, max)` of the values.
    pub fn bounds(&self) -> (S, S) {
        (self.v_min.clone(), self.v_max.clone())
    }

    /// Sites where two potentials differ.
    pub fn disagreement_sites(&self, other: &Self) -> Result<Vec<Vec<i64>>> {
        if self.lattice != other.lattice {
            return Err(Error::BoxMismatch);
        }
        Ok((0..self.values.len())
            .filter(|&i| self.values[i] != other.values[i])
            .map(|i| self.lattice.site_of(i))
            .collect())
    }
}

impl Potential<num_rational::BigRational> {
    pub fn to_float(&self) -> Potential<f64> {
        let values: Vec<f64> = self.values.iter().map(|v| v.to_f64()).collect();
        Potential::from_values(self.lattice, values).expect("finite image of rationals")
    }
}

/// Closed interval `[a, b]` guaranteed to contain the spectrum, plus the
/// affine map onto `[-1, 1]` used by polynomial methods.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectralInterval {
    a: f64,
    b: f64,
}

impl SpectralInterval {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !a.is_finite() || !b.is_finite() {
            return Err(Error::NonFinite("interval endpoint".into()));
        }
        if a >= b {
            return Err(Error::InvalidArgument(format!(
                "interval [{a}, {b}] must have a < b"
            )));
        }
        Ok(SpectralInterval { a, b })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn width(&self) -> f64 {
        self.b - self.a
    }

    /// `(2x - a - b) / (b - a)`, mapping `[a, b]` onto `[-1, 1]`.
    pub fn scale(&self, x: f64) -> f64 {
        (2.0 * x - self.a - self.b) / (self.b - self.a)
    }

    pub fn unscale(&self, s: f64) -> f64 {
        ((self.b - self.a) * s + self.a + self.b) / 2.0
    }

    pub fn contains(&self, x: f64) -> bool {
        self.a <= x && x <= self.b
    }

    pub fn union(&self, other: &Self) -> Self {
        SpectralInterval {
            a: self.a.min(other.a),
            b: self.b.max(other.b),
        }
    }
}

/// The truncated operator `H = adjacency + V` on a box.
#[derive(Clone, Debug, PartialEq)]
pub struct Hamiltonian<S> {
    lattice: LatticeBox,
    potential: Potential<S>,
}

impl<S: Scalar> Hamiltonian<S> {
    pub fn new(potential: Potential<S>) -> Self {
        Hamiltonian {
            lattice: potential.lattice(),
            potential,
        }
    }

    pub fn free(lattice: LatticeBox) -> Self {
        Self::new(Potential::zero(lattice))
    }

    pub fn lattice(&self) -> LatticeBox {
        self.lattice
    }

    pub fn potential(&self) -> &Potential<S> {
        &self.potential
    }

    /// Applies `H`. Work is proportional to the support window of `psi`
    /// grown by one layer, not to the box volume. For each output site the
    /// neighbor terms accumulate axis by axis (negative side first), then
    /// the diagonal term; the fixed order keeps float output reproducible.
    pub fn apply(&self, psi: &SiteVector<S>) -> Result<SiteVector<S>> {
        if psi.lattice != self.lattice {
            return Err(Error::BoxMismatch);
        }
        let lat = self.lattice;
        let Some(win) = &psi.window else {
            return Ok(SiteVector::zero(lat));
        };
        let l = lat.half_width();
        let lo: Vec<i64> = win.lo.iter().map(|c| (c - 1).max(-l)).collect();
        let hi: Vec<i64> = win.hi.iter().map(|c| (c + 1).min(l)).collect();
        let mut amps = vec![S::zero(); lat.site_count()];
        for_each_in_window(&lo, &hi, |site| {
            let idx = lat.index_of(site).expect("window inside box");
            let mut acc = S::zero();
            for axis in 0..lat.dim() {
                let stride = lat.stride(axis);
                if site[axis] > -l {
                    acc = acc + psi.amps[idx - stride].clone();
                }
                if site[axis] < l {
                    acc = acc + psi.amps[idx + stride].clone();
                }
            }
            acc = acc + self.potential.values[idx].clone() * psi.amps[idx].clone();
            amps[idx] = acc;
        });
        Ok(SiteVector::from_dense_window(lat, amps, &lo, &hi))
    }

    /// Stable identifier of (box, potential, arithmetic mode); lets outputs
    /// record which operator produced them.
    pub fn fingerprint(&self) -> u64 {
        let mut h = DefaultHasher::new();
        self.lattice.dim.hash(&mut h);
        self.lattice.half_width.hash(&mut h);
        S::mode_name().hash(&mut h);
        for v in &self.potential.values {
            format!("{v}").hash(&mut h);
        }
        h.finish()
    }

    /// Gershgorin enclosure `[v_min - 2d, v_max + 2d]`, nudged outward by
    /// one ulp so float rounding cannot push a true eigenvalue outside.
    pub fn spectral_interval(&self) -> SpectralInterval {
        let d = S::from_i64(2 * self.lattice.dim() as i64);
        let a = (self.potential.v_min.clone() - d.clone()).to_f64().next_down();
        let b = (self.potential.v_max.clone() + d).to_f64().next_up();
        SpectralInterval::new(a, b).expect("finite potential bounds")
    }
}

impl Hamiltonian<num_rational::BigRational> {
    pub fn to_float(&self) -> Hamiltonian<f64> {
        Hamiltonian::new(self.potential.to_float())
    }
}

/// Full eigendecomposition of a small box, validated at construction:
/// eigenvalues are sorted ascending, eigenvector signs are fixed so the
/// entry of largest magnitude (lowest ordinal wins ties) is positive.
#[derive(Clone, Debug)]
pub struct EigenSystem {
    lattice: LatticeBox,
    eigenvalues: Vec<f64>,
    /// Column `k` is the eigenvector for `eigenvalues[k]`.
    vectors: DMatrix<f64>,
    residual: f64,
    orthogonality_defect: f64,
    interval: SpectralInterval,
}

impl Hamiltonian<f64> {
    pub fn dense_matrix(&self) -> Result<DMatrix<f64>> {
        let n = self.lattice.site_count();
        if n > MAX_DENSE_SITES {
            return Err(Error::ResourceLimit(format!(
                "dense matrix for {n} sites exceeds cap {MAX_DENSE_SITES}"
            )));
        }
        let lat = self.lattice;
        let l = lat.half_width();
        let mut m = DMatrix::zeros(n, n);
        for idx in 0..n {
            let site = lat.site_of(idx);
            m[(idx, idx)] = self.potential.values[idx];
            for axis in 0..lat.dim() {
                let stride = lat.stride(axis);
                if site[axis] > -l {
                    m[(idx, idx - stride)] = 1.0;
                }
                if site[axis] < l {
                    m[(idx, idx + stride)] = 1.0;
                }
            }
        }
        Ok(m)
    }

    /// Dense diagonalization oracle. Refuses boxes above `limit` sites.
    pub fn eigendecomposition(&self, limit: usize) -> Result<EigenSystem> {
        let n = self.lattice.site_count();
        if n > limit {
            return Err(Error::OracleLimit {
                sites: n,
                limit,
            });
        }
        let m = self.dense_matrix()?;
        let eig = nalgebra::SymmetricEigen::new(m.clone());
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
        let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let mut vectors = DMatrix::zeros(n, n);
        for (k, &src) in order.iter().enumerate() {
            let col = eig.eigenvectors.column(src);
            let mut best = 0usize;
            for i in 1..n {
                if col[i].abs() > col[best].abs() {
                    best = i;
                }
            }
            let flip = if col[best] < 0.0 { -1.0 } else { 1.0 };
            for i in 0..n {
                vectors[(i, k)] = flip * col[i];
            }
        }
        for lam in &eigenvalues {
            if !lam.is_finite() {
                return Err(Error::EigenValidation("non-finite eigenvalue".into()));
            }
        }
        let interval = self.spectral_interval();
        if eigenvalues[0] < interval.a() || eigenvalues[n - 1] > interval.b() {
            return Err(Error::EigenValidation(format!(
                "eigenvalues [{}, {}] escape enclosure [{}, {}]",
                eigenvalues[0],
                eigenvalues[n - 1],
                interval.a(),
                interval.b()
            )));
        }
        let scale = eigenvalues[0].abs().max(eigenvalues[n - 1].abs()).max(1.0);
        let mv = &m * &vectors;
        let mut residual = 0.0f64;
        for k in 0..n {
            let mut sq = 0.0;
            for i in 0..n {
                let r = mv[(i, k)] - eigenvalues[k] * vectors[(i, k)];
                sq += r * r;
            }
            residual = residual.max(sq.sqrt());
        }
        if residual > 1e-7 * scale {
            return Err(Error::EigenValidation(format!(
                "residual {residual:.3e} exceeds tolerance"
            )));
        }
        // Gram spot check: every diagonal entry, plus all pairs among a
        // deterministic subset of columns (full n^3 Gram would double the
        // oracle cost for no extra assurance).
        let mut defect = 0.0f64;
        for k in 0..n {
            let d: f64 = (0..n).map(|i| vectors[(i, k)] * vectors[(i, k)]).sum();
            defect = defect.max((d - 1.0).abs());
        }
        let probes: Vec<usize> = (0..n).step_by((n / 48).max(1)).collect();
        for (pi, &p) in probes.iter().enumerate() {
            for &q in &probes[pi + 1..] {
                let d: f64 = (0..n).map(|i| vectors[(i, p)] * vectors[(i, q)]).sum();
                defect = defect.max(d.abs());
            }
        }
        if defect > 1e-8 {
            return Err(Error::EigenValidation(format!(
                "orthonormality defect {defect:.3e} exceeds tolerance"
            )));
        }
        Ok(EigenSystem {
            lattice: self.lattice,
            eigenvalues,
            vectors,
            residual,
            orthogonality_defect: defect,
            interval,
        })
    }
}

impl EigenSystem {
    pub fn lattice(&self) -> LatticeBox {
        self.lattice
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn orthogonality_defect(&self) -> f64 {
        self.orthogonality_defect
    }

    pub fn interval(&self) -> SpectralInterval {
        self.interval
    }

    /// `<delta_x, f(H) delta_y> = sum_k f(lambda_k) v_k(x) v_k(y)`,
    /// summed in ascending eigenvalue order.
    pub fn kernel_entry(&self, f: impl Fn(f64) -> f64, x: &[i64], y: &[i64]) -> Result<f64> {
        let ix = self
            .lattice
            .index_of(x)
            .ok_or_else(|| Error::InvalidArgument(format!("site {x:?} outside the box")))?;
        let iy = self
            .lattice
            .index_of(y)
            .ok_or_else(|| Error::InvalidArgument(format!("site {y:?} outside the box")))?;
        let mut acc = 0.0;
        for (k, &lam) in self.eigenvalues.iter().enumerate() {
            let fv = f(lam);
            if !fv.is_finite() {
                return Err(Error::NonFinite(format!("f({lam})")));
            }
            acc += fv * self.vectors[(ix, k)] * self.vectors[(iy, k)];
        }
        Ok(acc)
    }

    /// Spectral weights `<v_k, phi>` in ascending eigenvalue order.
    pub fn weights(&self, phi: &SiteVector<f64>) -> Result<Vec<f64>> {
        if phi.lattice() != self.lattice {
            return Err(Error::BoxMismatch);
        }
        let support = phi.iter_support();
        let n = self.eigenvalues.len();
        let mut w = vec![0.0; n];
        for k in 0..n {
            let mut acc = 0.0;
            for (idx, amp) in &support {
                acc += self.vectors[(*idx, k)] * amp;
            }
            w[k] = acc;
        }
        Ok(w)
    }

    /// `<phi, f(H) phi> = sum_k f(lambda_k) <v_k, phi>^2`.
    pub fn quadratic_form(
        &self,
        f: impl Fn(f64) -> f64,
        phi: &SiteVector<f64>,
    ) -> Result<f64> {
        let w = self.weights(phi)?;
        let mut acc = 0.0;
        for (k, &lam) in self.eigenvalues.iter().enumerate() {
            let fv = f(lam);
            if !fv.is_finite() {
                return Err(Error::NonFinite(format!("f({lam})")));
            }
            acc += fv * w[k] * w[k];
        }
        Ok(acc)
    }

    /// Spectral measure `mu_phi([alpha, beta])`, endpoints included.
    pub fn measure_of_interval(
        &self,
        phi: &SiteVector<f64>,
        alpha: f64,
        beta: f64,
    ) -> Result<f64> {
        if !(alpha <= beta) {
            return Err(Error::InvalidArgument(format!(
                "interval [{alpha}, {beta}] is empty"
            )));
        }
        self.quadratic_form(|lam| if alpha <= lam && lam <= beta { 1.0 } else { 0.0 }, phi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;
    use num_rational::BigRational;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn box_indexing_round_trips() {
        let lat = LatticeBox::new(2, 1).unwrap();
        assert_eq!(lat.site_count(), 9);
        assert_eq!(lat.index_of(&[-1, -1]), Some(0));
        assert_eq!(lat.index_of(&[0, 0]), Some(4));
        assert_eq!(lat.index_of(&[1, 1]), Some(8));
        assert_eq!(lat.index_of(&[2, 0]), None);
        for idx in 0..lat.site_count() {
            assert_eq!(lat.index_of(&lat.site_of(idx)), Some(idx));
        }
    }

    #[test]
    fn box_rejects_bad_geometry() {
        assert!(LatticeBox::new(0, 3).is_err());
        assert!(LatticeBox::new(1, 0).is_err());
        assert!(LatticeBox::new(4, 200).is_err());
    }

    #[test]
    fn delta_and_support() {
        let lat = LatticeBox::new(3, 4).unwrap();
        let v: SiteVector<f64> = SiteVector::delta(lat, &[1, -2, 0]).unwrap();
        assert_eq!(v.amplitude(&[1, -2, 0]), 1.0);
        assert_eq!(v.amplitude(&[0, 0, 0]), 0.0);
        assert_eq!(v.support(), vec![vec![1, -2, 0]]);
        assert_eq!(v.support_radius_l1(), 3);
        assert!(SiteVector::<f64>::delta(lat, &[5, 0, 0]).is_err());
    }

    #[test]
    fn entries_accumulate_and_cancel() {
        let lat = LatticeBox::new(1, 3).unwrap();
        let v: SiteVector<f64> = SiteVector::from_entries(
            lat,
            &[
                (vec![2], 1.0),
                (vec![2], -1.0),
                (vec![-1], 0.5),
            ],
        )
        .unwrap();
        assert_eq!(v.support(), vec![vec![-1]]);
    }

    #[test]
    fn free_operator_on_path_graph() {
        // 3-site path: H delta_0 = delta_{-1} + delta_1.
        let lat = LatticeBox::new(1, 1).unwrap();
        let h: Hamiltonian<f64> = Hamiltonian::free(lat);
        let d0 = SiteVector::delta(lat, &[0]).unwrap();
        let hd0 = h.apply(&d0).unwrap();
        assert_eq!(hd0.amplitude(&[-1]), 1.0);
        assert_eq!(hd0.amplitude(&[0]), 0.0);
        assert_eq!(hd0.amplitude(&[1]), 1.0);
        // Dirichlet edge: H delta_1 = delta_0 only.
        let d1 = SiteVector::delta(lat, &[1]).unwrap();
        let hd1 = h.apply(&d1).unwrap();
        assert_eq!(hd1.amplitude(&[0]), 1.0);
        assert_eq!(hd1.amplitude(&[1]), 0.0);
    }

    #[test]
    fn apply_matches_dense_matrix() {
        let lat = LatticeBox::new(2, 2).unwrap();
        let pot = Potential::from_fn(lat, |s| 0.25 * s[0] as f64 - 0.5 * s[1] as f64).unwrap();
        let h = Hamiltonian::new(pot);
        let m = h.dense_matrix().unwrap();
        let v = SiteVector::from_entries(
            lat,
            &[(vec![0, 0], 1.0), (vec![1, -1], -2.0), (vec![-2, 2], 0.125)],
        )
        .unwrap();
        let hv = h.apply(&v).unwrap();
        let dense: Vec<f64> = lat.sites().map(|s| v.amplitude(&s)).collect();
        for idx in 0..lat.site_count() {
            let want: f64 = (0..lat.site_count()).map(|j| m[(idx, j)] * dense[j]).sum();
            let got = hv.amplitude(&lat.site_of(idx));
            assert!((want - got).abs() < 1e-14, "site {idx}: {want} vs {got}");
        }
    }

    #[test]
    fn apply_is_symmetric_in_exact_arithmetic() {
        let lat = LatticeBox::new(2, 3).unwrap();
        let pot = Potential::from_fn(lat, |s| rat(s[0] - 2 * s[1], 8)).unwrap();
        let h = Hamiltonian::new(pot);
        let u = SiteVector::from_entries(lat, &[(vec![0, 1], rat(3, 8)), (vec![2, -1], rat(-1, 2))])
            .unwrap();
        let w = SiteVector::from_entries(lat, &[(vec![-1, 0], rat(5, 8)), (vec![1, 1], rat(7, 8))])
            .unwrap();
        let lhs = h.apply(&u).unwrap().inner(&w).unwrap();
        let rhs = u.inner(&h.apply(&w).unwrap()).unwrap();
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn combine_and_scale() {
        let lat = LatticeBox::new(1, 5).unwrap();
        let a: SiteVector<f64> = SiteVector::delta(lat, &[-3]).unwrap();
        let b: SiteVector<f64> = SiteVector::delta(lat, &[4]).unwrap();
        let c = SiteVector::combine(&2.0, &a, &-0.5, &b).unwrap();
        assert_eq!(c.amplitude(&[-3]), 2.0);
        assert_eq!(c.amplitude(&[4]), -0.5);
        let z = SiteVector::combine(&1.0, &c, &-1.0, &c).unwrap();
        assert!(z.is_zero());
        assert!(c.scale(&f64::NAN).is_err());
    }

    #[test]
    fn gershgorin_interval_bounds_path_spectrum() {
        // Free 3-site path has eigenvalues -sqrt(2), 0, sqrt(2).
        let lat = LatticeBox::new(1, 1).unwrap();
        let h: Hamiltonian<f64> = Hamiltonian::free(lat);
        let iv = h.spectral_interval();
        assert!(iv.a() <= -2.0 && iv.b() >= 2.0);
        let eig = h.eigendecomposition(64).unwrap();
        let lams = eig.eigenvalues();
        assert!((lams[0] + 2f64.sqrt()).abs() < 1e-12);
        assert!(lams[1].abs() < 1e-12);
        assert!((lams[2] - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn eigensystem_validates_and_reconstructs() {
        let lat = LatticeBox::new(2, 2).unwrap();
        let pot = Potential::from_fn(lat, |s| ((s[0] + 3 * s[1]) % 3) as f64 * 0.5).unwrap();
        let h = Hamiltonian::new(pot);
        let eig = h.eigendecomposition(64).unwrap();
        assert!(eig.residual() < 1e-10);
        assert!(eig.orthogonality_defect() < 1e-10);
        // f = identity reconstructs matrix entries.
        let m = h.dense_matrix().unwrap();
        let x = [1, 0];
        let y = [1, 1];
        let ix = lat.index_of(&x).unwrap();
        let iy = lat.index_of(&y).unwrap();
        let got = eig.kernel_entry(|l| l, &x, &y).unwrap();
        assert!((got - m[(ix, iy)]).abs() < 1e-10);
        // Total measure of phi equals its squared norm.
        let phi = SiteVector::from_entries(lat, &[(vec![0, 0], 0.6), (vec![1, -1], 0.8)]).unwrap();
        let total = eig
            .measure_of_interval(&phi, eig.interval().a(), eig.interval().b())
            .unwrap();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn oracle_refuses_large_boxes() {
        let lat = LatticeBox::new(2, 10).unwrap();
        let h: Hamiltonian<f64> = Hamiltonian::free(lat);
        match h.eigendecomposition(100) {
            Err(Error::OracleLimit { sites, limit }) => {
                assert_eq!(sites, 441);
                assert_eq!(limit, 100);
            }
            other => panic!("expected OracleLimit, got {other:?}"),
        }
    }

    #[test]
    fn spectral_interval_scaling_round_trips() {
        let iv = SpectralInterval::new(-3.0, 5.0).unwrap();
        assert_eq!(iv.scale(-3.0), -1.0);
        assert_eq!(iv.scale(5.0), 1.0);
        assert_eq!(iv.scale(1.0), 0.0);
        for x in [-3.0, -1.2, 0.0, 2.5, 5.0] {
            assert!((iv.unscale(iv.scale(x)) - x).abs() < 1e-12);
        }
        assert!(SpectralInterval::new(2.0, 2.0).is_err());
    }

    #[test]
    fn fingerprint_distinguishes_potentials() {
        let lat = LatticeBox::new(1, 4).unwrap();
        let h1: Hamiltonian<f64> = Hamiltonian::free(lat);
        let h2 = Hamiltonian::new(Potential::constant(lat, 0.5).unwrap());
        assert_ne!(h1.fingerprint(), h2.fingerprint());
        assert_eq!(h1.fingerprint(), Hamiltonian::<f64>::free(lat).fingerprint());
    }

    #[test]
    fn disagreement_sites_and_perturbation() {
        let lat = LatticeBox::new(2, 3).unwrap();
        let v1: Potential<f64> = Potential::zero(lat);
        let v2 = v1.with_site_value(&[2, -1], 1.0).unwrap();
        assert_eq!(v1.disagreement_sites(&v2).unwrap(), vec![vec![2, -1]]);
        assert_eq!(v2.bounds(), (0.0, 1.0));
    }
}
