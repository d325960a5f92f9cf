use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use secopt_core::channels::{sample_disk_point, steering_vector};
use secopt_core::linalg::{CMat, CVec, C64};
use secopt_core::surrogates::{
    log_tangent_bound, matrix_fractional, matrix_fractional_linearization, quadratic_minorant,
    rate_minorant,
};

fn c64() -> impl Strategy<Value = C64> {
    (-3.0f64..3.0, -3.0f64..3.0).prop_map(|(re, im)| C64::new(re, im))
}

fn random_mat(rng: &mut ChaCha8Rng, r: usize, c: usize) -> CMat {
    CMat::from_fn(r, c, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> CVec {
    CVec::from_fn(n, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
}

/// `X Xᴴ + ridge·I`.
fn random_psd(rng: &mut ChaCha8Rng, n: usize, ridge: f64) -> CMat {
    let x = random_mat(rng, n, n);
    &x * x.adjoint() + CMat::identity(n, n) * C64::from(ridge)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn log_tangent_is_an_upper_bound(x in 1e-6f64..1e3, x_t in 1e-6f64..1e3) {
        prop_assert!(x.ln() <= log_tangent_bound(x, x_t) + 1e-12 * (1.0 + x.ln().abs()));
        prop_assert!((log_tangent_bound(x_t, x_t) - x_t.ln()).abs() < 1e-12 * (1.0 + x_t.ln().abs()));
    }

    #[test]
    fn rate_minorant_is_tight_and_below(
        alpha in c64(), alpha_t in c64(), beta in 0.05f64..20.0, beta_t in 0.05f64..20.0,
    ) {
        let exact = (alpha.norm_sqr() / beta).ln_1p();
        prop_assert!(rate_minorant(alpha, beta, alpha_t, beta_t) <= exact + 1e-10);
        let at = (alpha_t.norm_sqr() / beta_t).ln_1p();
        prop_assert!((rate_minorant(alpha_t, beta_t, alpha_t, beta_t) - at).abs() < 1e-10);
    }

    #[test]
    fn quadratic_minorant_is_below_psd_form(seed in any::<u64>(), n in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = random_psd(&mut rng, n, 0.0);
        let (w, w_t) = (random_vec(&mut rng, n), random_vec(&mut rng, n));
        let exact = w.dotc(&(&h * &w)).re;
        prop_assert!(quadratic_minorant(&h, &w, &w_t) <= exact + 1e-10);
        let tight = w_t.dotc(&(&h * &w_t)).re;
        prop_assert!((quadratic_minorant(&h, &w_t, &w_t) - tight).abs() < 1e-10);
    }

    #[test]
    fn matrix_fractional_linearization_is_below(seed in any::<u64>(), n in 1usize..5, p in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_psd(&mut rng, n, 0.0);
        let (c, c_t) = (random_mat(&mut rng, n, p), random_mat(&mut rng, n, p));
        let (b, b_t) = (random_psd(&mut rng, p, 0.1), random_psd(&mut rng, p, 0.1));
        let exact = matrix_fractional(&a, &c, &b);
        let lin = matrix_fractional_linearization(&a, &c, &b, &c_t, &b_t);
        prop_assert!(lin <= exact + 1e-8 * (1.0 + exact.abs()));
        let at = matrix_fractional(&a, &c_t, &b_t);
        let lin_t = matrix_fractional_linearization(&a, &c_t, &b_t, &c_t, &b_t);
        prop_assert!((lin_t - at).abs() < 1e-8 * (1.0 + at.abs()));
    }

    #[test]
    fn steering_vectors_have_unit_entries(angle in -3.2f64..3.2, count in 1usize..40) {
        let a = steering_vector(angle, count, 0.5);
        prop_assert_eq!(a.len(), count);
        prop_assert!(a.iter().all(|x| (x.norm() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn disk_samples_stay_inside(seed in any::<u64>(), radius in 0.1f64..50.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let center = [rng.random::<f64>() * 100.0, rng.random::<f64>() * 100.0];
        let p = sample_disk_point(center, radius, &mut rng);
        prop_assert!((p[0] - center[0]).hypot(p[1] - center[1]) <= radius * (1.0 + 1e-12));
    }
}
