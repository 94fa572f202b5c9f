use approx::assert_relative_eq;
use emchan::capacity::{precoder_matrix, Precoder};
use emchan::geom::Vec3;
use emchan::green::{dyadic_green, Part};
use emchan::optim::{solve_p1, water_fill};
use emchan::specfun::spherical_j_array;
use emchan::swf::SphIndex;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use proptest::prelude::*;

fn complex_matrix(rows: usize, cols: usize) -> impl Strategy<Value = DMatrix<Complex64>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), rows * cols)
        .prop_map(move |v| DMatrix::from_iterator(rows, cols, v.into_iter().map(|(a, b)| Complex64::new(a, b))))
}

fn unit_symbols(k: usize) -> impl Strategy<Value = DVector<Complex64>> {
    prop::collection::vec(0.0f64..std::f64::consts::TAU, k)
        .prop_map(|v| DVector::from_iterator(v.len(), v.into_iter().map(|p| Complex64::from_polar(1.0, p))))
}

fn point() -> impl Strategy<Value = Vec3> {
    (-3.0f64..3.0, -3.0f64..3.0, -3.0f64..3.0).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn water_fill_spends_exactly_the_budget(
        sigma in prop::collection::vec(0.01f64..10.0, 1..12),
        p_t in 0.0f64..100.0,
        noise in 0.1f64..10.0,
    ) {
        let a = water_fill(&sigma, p_t, noise).unwrap();
        let total: f64 = a.power.iter().sum();
        prop_assert!((total - p_t).abs() <= 1e-9 * (1.0 + p_t));
        prop_assert!(a.power.iter().all(|p| *p >= 0.0));
        prop_assert_eq!(a.dof, a.power.iter().filter(|p| **p > 0.0).count());
        // never worse than equal allocation
        let n = sigma.len() as f64;
        let equal: f64 = sigma.iter().map(|s| (1.0 + s * s * p_t / n / noise).log2()).sum();
        prop_assert!(a.capacity(&sigma, noise) >= equal - 1e-9);
    }

    #[test]
    fn water_fill_capacity_grows_with_power(
        sigma in prop::collection::vec(0.01f64..10.0, 1..8),
        p in 0.0f64..50.0,
        extra in 0.001f64..50.0,
    ) {
        let lo = water_fill(&sigma, p, 1.0).unwrap().capacity(&sigma, 1.0);
        let hi = water_fill(&sigma, p + extra, 1.0).unwrap().capacity(&sigma, 1.0);
        prop_assert!(hi > lo);
    }

    #[test]
    fn p1_respects_power_and_improves_with_it(
        (b, s) in (1usize..5, 1usize..10).prop_flat_map(|(k, p)| (complex_matrix(k, p), unit_symbols(k))),
        p_t in 0.001f64..10.0,
    ) {
        let lo = solve_p1(&b, &s, p_t).unwrap();
        let hi = solve_p1(&b, &s, 4.0 * p_t).unwrap();
        prop_assert!(lo.power <= p_t * (1.0 + 1e-9));
        prop_assert!(lo.lambda >= 0.0);
        prop_assert!(lo.err >= 0.0 && lo.err <= 1.0 + 1e-12);
        prop_assert!(hi.err <= lo.err + 1e-12);
    }

    #[test]
    fn dyadic_green_is_reciprocal(r in point(), rp in point(), k in 0.5f64..5.0) {
        prop_assume!((r - rp).norm() > 0.05);
        let a = dyadic_green(&r, &rp, k, Part::Full).unwrap().0;
        let b = dyadic_green(&rp, &r, k, Part::Full).unwrap().0;
        for (x, y) in a.iter().zip(b.transpose().iter()) {
            prop_assert!((x - y).norm() <= 1e-12 * (1.0 + x.norm()));
        }
        for (x, y) in a.iter().zip(a.transpose().iter()) {
            prop_assert!((x - y).norm() <= 1e-12 * (1.0 + x.norm()));
        }
    }

    #[test]
    fn spherical_bessel_recurrence(x in 0.1f64..100.0, n in 1usize..30) {
        let j = spherical_j_array(n + 1, x).unwrap();
        let lhs = (2 * n + 1) as f64 * j[n];
        let rhs = x * (j[n - 1] + j[n + 1]);
        let scale = lhs.abs().max(x * j[n - 1].abs()).max(1e-300);
        prop_assert!((lhs - rhs).abs() / scale < 1e-10);
    }

    #[test]
    fn mode_index_round_trips(p in 1usize..5000) {
        let idx = SphIndex::unflatten(p).unwrap();
        prop_assert_eq!(idx.flatten(), p);
        prop_assert!(idx.m.unsigned_abs() <= idx.n);
    }

    #[test]
    fn precoders_spend_the_budget(
        h in (1usize..5).prop_flat_map(|k| complex_matrix(k, k + 3)),
        p_t in 0.01f64..100.0,
    ) {
        let k = h.nrows() as f64;
        let mmse = precoder_matrix(&h, Precoder::Mmse, p_t, 1.0).unwrap();
        assert_relative_eq!(mmse.norm_squared(), p_t, max_relative = 1e-9);
        let slnr = precoder_matrix(&h, Precoder::Slnr, p_t, 1.0).unwrap();
        for c in slnr.column_iter() {
            assert_relative_eq!(c.norm_squared(), p_t / k, max_relative = 1e-9);
        }
    }
}
