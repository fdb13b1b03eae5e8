use misofade::bounds::{lower_bound_gaussian, lower_bracket, McConfig, OptimizerConfig, Past};
use misofade::fading_number::{chi_memoryless_gauss, d_star, d_star_quotient, gauss_upper_report};
use misofade::linalg::{self, CMatrix};
use misofade::oracles::{random_covariance, random_gaussian_model, random_mean, random_spatially_iid_model};
use misofade::prediction::{levinson_error_sequence, szego_prediction_error};
use misofade::process_models::{project_with_lags, FadingProcess};
use misofade::seeds::substream;
use misofade::special_functions::{exp_integral_ei_neg, noncentral_log_magnitude_sq_mean};
use proptest::prelude::*;

fn quick() -> ProptestConfig {
    ProptestConfig::with_cases(32)
}

proptest! {
    #![proptest_config(quick())]

    #[test]
    fn d_star_dominates_every_direction(seed in any::<u64>(), nt in 1usize..5) {
        let mut rng = substream(seed, 0);
        let mean = random_mean(nt, 1.0, &mut rng);
        let cov = random_covariance(nt, 0.1, &mut rng);
        let (d, x) = d_star(&mean, &cov).unwrap();
        prop_assert!((d_star_quotient(&mean, &cov, &x).unwrap() - d).abs() <= 1e-9 * (1.0 + d));
        for _ in 0..20 {
            let y = linalg::random_unit_vector(nt, &mut rng);
            prop_assert!(d_star_quotient(&mean, &cov, &y).unwrap() <= d * (1.0 + 1e-12));
        }
    }

    #[test]
    fn d_star_is_unitarily_invariant_and_scale_free(seed in any::<u64>(), nt in 1usize..5, c in 0.1f64..10.0) {
        let mut rng = substream(seed, 1);
        let mean = random_mean(nt, 1.0, &mut rng);
        let cov = random_covariance(nt, 0.1, &mut rng);
        let u = linalg::random_unitary(nt, &mut rng);
        let (d, _) = d_star(&mean, &cov).unwrap();
        let rotated = linalg::symmetrize(&(&u * &cov * u.adjoint()));
        let (dr, _) = d_star(&(&u * &mean), &rotated).unwrap();
        let (ds, _) = d_star(&mean.scale(c), &cov.scale(c * c)).unwrap();
        prop_assert!((d - dr).abs() <= 1e-9 * (1.0 + d));
        prop_assert!((d - ds).abs() <= 1e-9 * (1.0 + d));
    }

    #[test]
    fn memoryless_chi_increases_with_d_star(a in 0.0f64..8.0, b in 0.0f64..8.0) {
        prop_assume!((a - b).abs() > 1e-6);
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(chi_memoryless_gauss(lo).unwrap() < chi_memoryless_gauss(hi).unwrap());
    }

    #[test]
    fn ei_is_negative_and_increasing(s in 1e-6f64..50.0, ds in 1e-3f64..5.0) {
        let a = exp_integral_ei_neg(s).unwrap();
        let b = exp_integral_ei_neg(s + ds).unwrap();
        prop_assert!(a < 0.0 && b < 0.0 && a < b);
    }

    #[test]
    fn log_moment_is_jensen_bounded(mean_sq in 0.0f64..20.0, variance in 0.05f64..5.0) {
        // E[log |G|^2] <= log E[|G|^2]
        let m = noncentral_log_magnitude_sq_mean(mean_sq, variance).unwrap();
        prop_assert!(m <= (mean_sq + variance).ln() + 1e-12);
    }

    #[test]
    fn prediction_errors_decrease_to_szego(seed in any::<u64>(), nt in 1usize..4) {
        let p = random_gaussian_model(nt, 0.8, seed).unwrap();
        let mut rng = substream(seed, 2);
        let x = linalg::random_unit_vector(nt, &mut rng);
        let proj = project_with_lags(&p, &x, 256).unwrap();
        let seq = levinson_error_sequence(&proj.autocovariance).unwrap();
        for w in seq.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-12));
        }
        let limit = szego_prediction_error(|l| proj.spectral_density(l)).unwrap();
        prop_assert!(*seq.last().unwrap() >= limit * (1.0 - 1e-8));
        prop_assert!((seq.last().unwrap() - limit).abs() <= 1e-8 * limit);
    }

    #[test]
    fn lower_bracket_grows_with_past(seed in any::<u64>(), nt in 1usize..4) {
        let g = random_gaussian_model(nt, 0.8, seed).unwrap();
        let mut rng = substream(seed, 3);
        let x = linalg::random_unit_vector(nt, &mut rng);
        let p = FadingProcess::from(g);
        let mc = McConfig::default();
        let mut prev = f64::NEG_INFINITY;
        for past in [Past::Finite(0), Past::Finite(1), Past::Finite(3), Past::Finite(8), Past::Infinite] {
            let v = lower_bracket(&p, &x, past, &mc).unwrap().bracket_value;
            prop_assert!(v >= prev - 1e-10, "{past}: {v} < {prev}");
            prev = v;
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn lower_bound_below_gaussian_upper_bound(seed in any::<u64>(), nt in 1usize..4) {
        let p = random_gaussian_model(nt, 0.8, seed).unwrap();
        let lower = lower_bound_gaussian(&p, Past::Infinite, &OptimizerConfig::default()).unwrap();
        let upper = gauss_upper_report(&p).unwrap();
        prop_assert!(lower.value <= upper.value + 1e-6);
    }

    #[test]
    fn spatially_iid_bounds_are_tight(seed in any::<u64>(), nt in 1usize..4) {
        let p = random_spatially_iid_model(nt, seed).unwrap();
        let lower = lower_bound_gaussian(&p, Past::Infinite, &OptimizerConfig::default()).unwrap();
        let upper = gauss_upper_report(&p).unwrap();
        prop_assert!((upper.value - lower.value).abs() <= 1e-8);
    }

    #[test]
    fn fading_number_is_invariant_to_rotation_and_scaling(seed in any::<u64>(), nt in 1usize..4, c in 0.2f64..5.0) {
        let p = random_gaussian_model(nt, 0.8, seed).unwrap();
        let mut rng = substream(seed, 4);
        let u: CMatrix = linalg::random_unitary(nt, &mut rng);
        let opt = OptimizerConfig::default();
        let base = lower_bound_gaussian(&p, Past::Infinite, &opt).unwrap().value;
        let rotated = lower_bound_gaussian(&p.rotated(&u).unwrap(), Past::Infinite, &opt).unwrap().value;
        let scaled = lower_bound_gaussian(&p.scaled(c).unwrap(), Past::Infinite, &opt).unwrap().value;
        prop_assert!((base - rotated).abs() <= 1e-6, "{base} vs {rotated}");
        prop_assert!((base - scaled).abs() <= 1e-6, "{base} vs {scaled}");
    }
}
