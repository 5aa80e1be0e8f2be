mod common;

use std::collections::HashMap;
use std::sync::OnceLock;

use needlet_core::coeffs::{correlation_decay, spectral_weights};
use needlet_core::field::synthesize_replication;
use needlet_core::stats::{brute, estimated_variances, studentized_report, theoretical_variances};
use needlet_core::{
    beta_exact, corr_beta, delta, replication_rng, sigma2_n, synthesize, GProfile, NeedletScale,
    PowerSpectrum, TestStatistics,
};
use proptest::prelude::*;

use common::*;

fn spectrum_strategy() -> impl Strategy<Value = PowerSpectrum> {
    prop_oneof![
        (1.5f64..6.0).prop_map(|a| PowerSpectrum::power_law(a).unwrap()),
        (1.5f64..6.0, 1.5f64..4.0, -1.0f64..1.0, 0.1f64..3.0).prop_map(|(a, b0, b1, w)| {
            PowerSpectrum::new(a, GProfile::Cosine { b0, b1, omega: w }).unwrap()
        }),
    ]
}

#[test]
fn diagram_oracle_at_small_n() {
    for (seed, alpha) in [(1u64, 2.5), (2, 4.0)] {
        let spec = random_spectrum(seed, alpha, 16);
        for n in [8usize, 16, 32] {
            let scale = NeedletScale::from_n(n).unwrap();
            let fast = theoretical_variances(&spec, &scale).unwrap();
            let (u1, u2) = diagram_var_kurt(&spec, &scale);
            assert!(relative(fast.var_s, diagram_var_skew(&spec, &scale)) < 1e-9);
            assert!(relative(fast.var_u1, u1) < 1e-9);
            assert!(relative(fast.var_u2, u2) < 1e-9);
        }
    }
}

#[test]
fn diagram_oracle_at_moderate_n() {
    let spec = PowerSpectrum::power_law(4.0).unwrap();
    for j in [5u32, 7, 9] {
        let scale = NeedletScale::new(j).unwrap();
        let fast = theoretical_variances(&spec, &scale).unwrap();
        let (u1, u2) = diagram_var_kurt(&spec, &scale);
        assert!(relative(fast.var_s, diagram_var_skew(&spec, &scale)) < 1e-9, "j = {j}");
        assert!(relative(fast.var_u, u1 + u2) < 1e-9, "j = {j}");
    }
}

#[test]
fn variances_bounded_across_scales() {
    let spec = PowerSpectrum::power_law(4.0).unwrap();
    let values: Vec<_> = (3u32..=10)
        .map(|j| theoretical_variances(&spec, &NeedletScale::new(j).unwrap()).unwrap())
        .collect();
    for v in &values {
        assert!(v.var_s > 0.1 && v.var_s < 10.0, "{v:?}");
        assert!(v.var_u1 > 1.0 && v.var_u1 < 1e3, "{v:?}");
        assert!(v.var_u2 > 1.0 && v.var_u2 < 1e3, "{v:?}");
    }
    // Under a pure power law the normalized weights are scale free.
    let last = values.last().unwrap();
    let prev = &values[values.len() - 2];
    assert!(relative(last.var_s, prev.var_s) < 1e-6);
}

#[test]
fn delta_weighted_estimates_match_literal_sums() {
    let spec = random_spectrum(9, 3.0, 16);
    for n in [8usize, 16, 32] {
        let scale = NeedletScale::from_n(n).unwrap();
        let field = synthesize(&spec, scale.l_max(), &mut replication_rng(n as u64, 1)).unwrap();
        let c = beta_exact(&field, &scale).unwrap();
        let est = estimated_variances(&c.weighted_power, &scale).unwrap();
        let u = &c.weighted_power;
        assert!(relative(est.var_s, brute::var_skew(u, c.sigma2_hat, n, true)) < 1e-9);
        assert!(relative(est.var_u1, brute::var_kurt1(u, c.sigma2_hat, n, true)) < 1e-9);
        assert!(relative(est.var_u2, brute::var_kurt2(u, c.sigma2_hat, n, true)) < 1e-9);
    }
}

/// `|w_l|^2 / C_l` for `l = 1..=4`, from one million synthesized fields.
fn exponential_pool() -> &'static Vec<[f64; 4]> {
    static POOL: OnceLock<Vec<[f64; 4]>> = OnceLock::new();
    POOL.get_or_init(|| {
        let spec = PowerSpectrum::power_law(2.0).unwrap();
        let c = spec.table(4).unwrap();
        let mut rng = replication_rng(2718, 0);
        (0..1_000_000)
            .map(|_| {
                let f = synthesize(&spec, 4, &mut rng).unwrap();
                std::array::from_fn(|i| f.coeff(i as i64 + 1).norm_sqr() / c[i + 1])
            })
            .collect()
    })
}

#[test]
fn delta_matches_exponential_moments() {
    let pool = exponential_pool();
    let mut cache: HashMap<Vec<usize>, f64> = HashMap::new();
    let mut rng = replication_rng(3141, 0);
    use rand::Rng;
    for _ in 0..1000 {
        let size = rng.random_range(1..=4usize);
        let values: Vec<u64> = (0..size).map(|_| rng.random_range(1..=6u64)).collect();
        // Equal |l| share one exponential; distinct ones use distinct columns.
        let mut groups: Vec<usize> = {
            let mut sorted = values.clone();
            sorted.sort_unstable();
            sorted.chunk_by(|a, b| a == b).map(|g| g.len()).collect()
        };
        groups.sort_unstable();
        let estimate = *cache.entry(groups.clone()).or_insert_with(|| {
            pool.iter()
                .map(|row| groups.iter().enumerate().map(|(c, &g)| row[c].powi(g as i32)).product::<f64>())
                .sum::<f64>()
                / pool.len() as f64
        });
        let exact = delta(&values) as f64;
        assert!(relative(estimate, exact) < 0.05, "{values:?}: {estimate} vs {exact}");
    }
}

#[test]
fn correlation_decays_polynomially() {
    let spec = PowerSpectrum::power_law(4.0).unwrap();
    for j in [4u32, 6, 8] {
        let scale = NeedletScale::new(j).unwrap();
        let r = correlation_decay(&spec, &scale, 3).unwrap();
        assert!(r.constant.is_finite());
        assert!((r.correlations[0] - 1.0).abs() < 1e-14);
        for (dk, c) in r.correlations.iter().enumerate() {
            assert!((c - corr_beta(&spec, &scale, dk as i64).unwrap()).abs() < 1e-14);
        }
    }
}

#[test]
fn sample_means_are_centred() {
    let spec = PowerSpectrum::power_law(4.0).unwrap();
    let scale = NeedletScale::from_n(256).unwrap();
    let sigma2 = sigma2_n(&spec, &scale).unwrap();
    let (mut s, mut u) = (Vec::new(), Vec::new());
    for rep in 0..2000 {
        let field = synthesize_replication(&spec, scale.l_max(), 17, rep).unwrap();
        let c = beta_exact(&field, &scale).unwrap();
        let t = TestStatistics::from_beta(&c.beta, sigma2).unwrap();
        s.push(t.skewness);
        u.push(t.kurtosis);
    }
    for x in [&s, &u] {
        let se = (sample_variance(x) / x.len() as f64).sqrt();
        assert!(mean(x).abs() < 3.0 * se, "mean {} se {se}", mean(x));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn scale_invariance(spec in spectrum_strategy(), factor in 1e-3f64..1e3, seed in 0u64..1000) {
        let scale = NeedletScale::new(5).unwrap();
        let scaled = spec.scaled(factor).unwrap();
        let a = synthesize_replication(&spec, scale.l_max(), seed, 0).unwrap();
        let b = synthesize_replication(&scaled, scale.l_max(), seed, 0).unwrap();
        let ca = beta_exact(&a, &scale).unwrap();
        let cb = beta_exact(&b, &scale).unwrap();
        for dk in [1i64, 7, 40] {
            let x = corr_beta(&spec, &scale, dk).unwrap();
            let y = corr_beta(&scaled, &scale, dk).unwrap();
            prop_assert!((x - y).abs() < 1e-10);
        }
        let sa = TestStatistics::from_beta(&ca.beta, ca.sigma2.unwrap()).unwrap();
        let sb = TestStatistics::from_beta(&cb.beta, cb.sigma2.unwrap()).unwrap();
        prop_assert!((sa.skewness - sb.skewness).abs() < 1e-10);
        prop_assert!((sa.kurtosis - sb.kurtosis).abs() < 1e-10);
        let ra = studentized_report(&ca).unwrap();
        let rb = studentized_report(&cb).unwrap();
        prop_assert!((ra.z_s - rb.z_s).abs() < 1e-10);
        prop_assert!((ra.z_u - rb.z_u).abs() < 1e-10);
        let ta = theoretical_variances(&spec, &scale).unwrap();
        let tb = theoretical_variances(&scaled, &scale).unwrap();
        prop_assert!(relative(ta.var_s, tb.var_s) < 1e-10);
        prop_assert!(relative(ta.var_u, tb.var_u) < 1e-10);
    }

    #[test]
    fn parity_under_negation(spec in spectrum_strategy(), seed in 0u64..1000) {
        let scale = NeedletScale::new(5).unwrap();
        let field = synthesize_replication(&spec, scale.l_max(), seed, 3).unwrap();
        let a = beta_exact(&field, &scale).unwrap();
        let b = beta_exact(&field.negated(), &scale).unwrap();
        let sa = TestStatistics::from_beta(&a.beta, a.sigma2_hat).unwrap();
        let sb = TestStatistics::from_beta(&b.beta, b.sigma2_hat).unwrap();
        prop_assert_eq!(sa.skewness, -sb.skewness);
        prop_assert_eq!(sa.kurtosis, sb.kurtosis);
    }

    #[test]
    fn oracle_triangle_random_spectra(seed in 0u64..10_000, alpha in 1.5f64..5.0, j in 1u32..=3) {
        let spec = random_spectrum(seed, alpha, 16);
        let scale = NeedletScale::new(j).unwrap();
        let n = scale.n();
        let fast = theoretical_variances(&spec, &scale).unwrap();
        let v = spectral_weights(&spec, &scale).unwrap();
        let s2 = sigma2_n(&spec, &scale).unwrap();
        let (u1, u2) = diagram_var_kurt(&spec, &scale);
        prop_assert!(relative(fast.var_s, brute::var_skew(&v, s2, n, false)) < 1e-9);
        prop_assert!(relative(fast.var_s, diagram_var_skew(&spec, &scale)) < 1e-9);
        prop_assert!(relative(fast.var_u1, brute::var_kurt1(&v, s2, n, false)) < 1e-9);
        prop_assert!(relative(fast.var_u1, u1) < 1e-9);
        prop_assert!(relative(fast.var_u2, u2) < 1e-9);
        prop_assert!(fast.var_s > 0.0 && fast.var_u1 > 0.0 && fast.var_u2 > 0.0);
    }

    #[test]
    fn mean_statistic_vanishes(spec in spectrum_strategy(), seed in 0u64..1000, j in 2u32..9) {
        let scale = NeedletScale::new(j).unwrap();
        let field = synthesize_replication(&spec, scale.l_max(), seed, 0).unwrap();
        let c = beta_exact(&field, &scale).unwrap();
        let t = TestStatistics::from_beta(&c.beta, c.sigma2.unwrap()).unwrap();
        prop_assert!(t.mean.abs() <= 1e-10);
    }
}
