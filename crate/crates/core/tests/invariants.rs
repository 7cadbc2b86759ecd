//! Cross-module property checks. Each property ties one module's output
//! to an independent mechanism from another: polynomial applies against
//! the eigenvalue oracle, the rational path against the float path,
//! analytic bounds against measured quantities.

use num_rational::BigRational;
use num_traits::ToPrimitive;
use proptest::prelude::*;

use propspeed_core::cosine_transform::CosineProfile;
use propspeed_core::lattice::{Hamiltonian, LatticeBox, Potential, SiteVector};
use propspeed_core::poly_calculus::best_kernel_decay_bound;
use propspeed_core::propagation::{check_vanishing, moments, shortest_walk_count};
use propspeed_core::smoothfn::SmoothFunction;
use propspeed_core::spectral_locality::LocalityExperiment;

/// SplitMix64, so a single drawn seed expands into a whole potential.
struct Rng64(u64);

impl Rng64 {
    fn next(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    fn int(&mut self, bound: i64) -> i64 {
        (self.next() % (2 * bound as u64 + 1)) as i64 - bound
    }
}

/// Numerators over denominator 8: dyadic, so both scalar modes hold the
/// exact same values.
fn dyadic_potential(lat: LatticeBox, seed: u64) -> Potential<BigRational> {
    let mut rng = Rng64(seed);
    Potential::from_fn(lat, |_| BigRational::new(rng.int(16).into(), 8.into())).unwrap()
}

fn float_potential(lat: LatticeBox, seed: u64) -> Potential<f64> {
    let mut rng = Rng64(seed);
    Potential::from_fn(lat, |_| rng.int(16) as f64 / 8.0).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn eigenvalues_stay_inside_the_gershgorin_enclosure(
        seed in any::<u64>(),
        dim in 1usize..=2,
        hw in 2i64..=3,
    ) {
        let lat = LatticeBox::new(dim, hw).unwrap();
        let h = Hamiltonian::new(float_potential(lat, seed));
        let interval = h.spectral_interval();
        let eig = h.eigendecomposition(64).unwrap();
        for &lam in eig.eigenvalues() {
            prop_assert!(
                interval.a() - 1e-9 <= lam && lam <= interval.b() + 1e-9,
                "eigenvalue {lam} escapes [{}, {}]",
                interval.a(),
                interval.b()
            );
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn polynomial_moments_match_the_eigenvalue_oracle(
        seed in any::<u64>(),
        hw in 6i64..=10,
    ) {
        let lat = LatticeBox::new(1, hw).unwrap();
        let h = Hamiltonian::new(float_potential(lat, seed));
        let phi = SiteVector::from_entries(lat, &[(vec![0], 1.0), (vec![1], -0.5)]).unwrap();
        let n_max = (hw - 1) as u32;
        let seq = moments(&h, &phi, &phi, n_max).unwrap();
        let eig = h.eigendecomposition(64).unwrap();
        for (n, m) in seq.values().iter().enumerate() {
            let oracle = eig.quadratic_form(|lam| lam.powi(n as i32), &phi).unwrap();
            let scale = eig
                .quadratic_form(|lam| lam.abs().powi(n as i32), &phi)
                .unwrap();
            prop_assert!(
                (m - oracle).abs() <= 1e-9 * scale.max(1.0),
                "order {n}: applies give {m}, eigensum gives {oracle}"
            );
        }
    }

    #[test]
    fn total_spectral_measure_is_the_vector_norm(
        seed in any::<u64>(),
        hw in 2i64..=5,
        dim in 1usize..=2,
    ) {
        let lat = LatticeBox::new(dim, hw).unwrap();
        let h = Hamiltonian::new(float_potential(lat, seed));
        let interval = h.spectral_interval();
        let eig = h.eigendecomposition(256).unwrap();
        let mut e1 = vec![0i64; dim];
        e1[0] = 1;
        let phi = SiteVector::from_entries(lat, &[(vec![0; dim], 0.8), (e1, 0.6)]).unwrap();
        let total = eig
            .measure_of_interval(&phi, interval.a(), interval.b())
            .unwrap();
        prop_assert!((total - phi.norm_sqr()).abs() <= 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn rational_and_float_moments_agree_bitwise_on_dyadic_potentials(
        seed in any::<u64>(),
        dim in 1usize..=2,
    ) {
        // Every value is dyadic with denominator 2^3 and every moment up
        // to order 8 stays under 53 mantissa bits, so the float path
        // commits no rounding at all: equality is exact, not approximate.
        let n_max = 8u32;
        let lat = LatticeBox::new(dim, n_max as i64).unwrap();
        let exact = Hamiltonian::new(dyadic_potential(lat, seed));
        let float = Hamiltonian::new(float_potential(lat, seed));
        let phi_q = SiteVector::delta(lat, &vec![0; dim]).unwrap();
        let phi_f = SiteVector::delta(lat, &vec![0; dim]).unwrap();
        let mq = moments(&exact, &phi_q, &phi_q, n_max).unwrap();
        let mf = moments(&float, &phi_f, &phi_f, n_max).unwrap();
        for (q, f) in mq.values().iter().zip(mf.values()) {
            prop_assert_eq!(q.to_f64().unwrap(), *f);
        }
    }

    #[test]
    fn boundary_moment_ignores_the_potential(
        seed1 in any::<u64>(),
        seed2 in any::<u64>(),
        dim in 1usize..=2,
        r in 1u64..=5,
    ) {
        let lat = LatticeBox::new(dim, 2 * r as i64).unwrap();
        let x = vec![0i64; dim];
        let mut y = vec![0i64; dim];
        y[dim - 1] = r as i64;
        let dx = SiteVector::delta(lat, &x).unwrap();
        let dy = SiteVector::delta(lat, &y).unwrap();
        let rep1 = check_vanishing(&Hamiltonian::new(dyadic_potential(lat, seed1)), &dx, &dy).unwrap();
        let rep2 = check_vanishing(&Hamiltonian::new(dyadic_potential(lat, seed2)), &dx, &dy).unwrap();
        prop_assert!(rep1.all_zero_below && rep2.all_zero_below);
        let walks = BigRational::from_integer(shortest_walk_count(&x, &y).unwrap().into());
        prop_assert_eq!(&rep1.boundary_moment, &walks);
        prop_assert_eq!(&rep2.boundary_moment, &walks);
    }

    #[test]
    fn cosine_coefficients_respect_the_derivative_bounds(
        t in 0.5f64..12.0,
        n in 1u32..=4,
    ) {
        let profile = CosineProfile::new(SmoothFunction::gaussian(0.0, 1.0).unwrap()).unwrap();
        let value = profile.coefficient(t).unwrap().abs();
        let bound = profile.coefficient_bound(n, t).unwrap();
        prop_assert!(
            value <= bound + 1e-9,
            "coefficient {value} at t {t} exceeds order-{n} bound {bound}"
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn kernel_entries_respect_the_decay_bound(
        seed in any::<u64>(),
        hw in 8i64..=14,
        r in 2u64..=6,
        bump in any::<bool>(),
    ) {
        let lat = LatticeBox::new(1, hw).unwrap();
        let h = Hamiltonian::new(float_potential(lat, seed));
        let f = if bump {
            SmoothFunction::bump()
        } else {
            SmoothFunction::gaussian(0.0, 1.0).unwrap()
        };
        let (_, bound) = best_kernel_decay_bound(&f, h.spectral_interval(), r).unwrap();
        let eig = h.eigendecomposition(64).unwrap();
        let x = vec![-((r / 2) as i64)];
        let y = vec![(r - r / 2) as i64];
        let entry = eig.kernel_entry(|lam| f.eval(lam), &x, &y).unwrap().abs();
        prop_assert!(
            entry <= bound * (1.0 + 1e-8) + 1e-13,
            "entry {entry} at separation {r} exceeds bound {bound}"
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn measured_locality_difference_respects_its_bound(
        seed in any::<u64>(),
        r in 2i64..=4,
        eps_half in any::<bool>(),
        strength_step in 1i64..=4,
    ) {
        let lat = LatticeBox::new(1, 10).unwrap();
        let v1 = float_potential(lat, seed);
        let strength = strength_step as f64 / 4.0;
        let v2 = Potential::from_fn(lat, |s| {
            v1.value(s).unwrap() + if s[0].abs() >= r { strength } else { 0.0 }
        })
        .unwrap();
        let phi = SiteVector::delta(lat, &[0]).unwrap();
        let eps = if eps_half { 0.5 } else { 1.0 };
        let experiment = LocalityExperiment::new(
            phi,
            v1,
            v2,
            SmoothFunction::bump(),
            0.1,
            eps,
        )
        .unwrap();
        let report = experiment.run(64).unwrap();
        prop_assert_eq!(report.separation, Some(r as u64));
        prop_assert!(
            report.difference <= report.best_bound * (1.0 + 1e-8) + 1e-12,
            "difference {} exceeds bound {}",
            report.difference,
            report.best_bound
        );
    }
}
