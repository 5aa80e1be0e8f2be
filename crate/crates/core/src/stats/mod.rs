//! Skewness and kurtosis of needlet coefficients, their variances and tests.
//!
//! With `hat beta_k = beta_k / sigma_N`,
//!
//! ```text
//! M_N = N^-1 sum hat beta_k,   S_N = N^-1/2 sum hat beta_k^3,   U_N = N^-1/2 sum (hat beta_k^4 - 3)
//! ```
//!
//! Under Gaussianity `M_N` vanishes identically and `S_N`, `U_N` are centred
//! with variances given by Fejér-kernel sums over the spectral weights
//! `v(l) = C_l a^2(4l/N)`; see [`residue`] for how those sums are evaluated.

pub mod brute;
pub mod residue;

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use statrs::function::erf::erfc;

use crate::coeffs::{spectral_weights, WaveletCoefficients};
use crate::error::{Error, Result};
use crate::frame::NeedletScale;
use crate::spectrum::PowerSpectrum;

/// Fejér's kernel `K_N(t) = sin^2(N t / 2) / (2 pi N sin^2(t / 2))`, equal to
/// `N / 2 pi` at multiples of `2 pi`.
pub fn fejer(n: usize, t: f64) -> f64 {
    let nf = n as f64;
    let s = (0.5 * t).sin();
    if s.abs() < 1e-9 {
        return nf / (2.0 * PI);
    }
    let num = (0.5 * nf * t).sin();
    num * num / (s * s) / (2.0 * PI * nf)
}

/// `E prod |w_l|^2 / C_l` for Gaussian coefficients: the product over groups of
/// equal values of `(group size)!`. The empty multiset gives 1.
pub fn delta(values: &[u64]) -> u64 {
    let mut sorted = values.to_vec();
    sorted.sort_unstable();
    sorted
        .chunk_by(|a, b| a == b)
        .map(|g| (1..=g.len() as u64).product::<u64>())
        .product()
}

/// `(M_N, S_N, U_N)` of one set of coefficients.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TestStatistics {
    pub n: usize,
    pub mean: f64,
    pub skewness: f64,
    pub kurtosis: f64,
}

impl TestStatistics {
    /// Statistics of `beta / sqrt(sigma2)`.
    pub fn from_beta(beta: &[f64], sigma2: f64) -> Result<Self> {
        if !(sigma2 > 0.0) || !sigma2.is_finite() {
            return Err(Error::DegenerateVariance);
        }
        if beta.is_empty() {
            return Err(Error::EmptyInput("no coefficients"));
        }
        let sd = sigma2.sqrt();
        let normalized: Vec<f64> = beta.iter().map(|b| b / sd).collect();
        Ok(Self::from_normalized(&normalized))
    }

    pub fn from_normalized(beta_hat: &[f64]) -> Self {
        Self {
            n: beta_hat.len(),
            mean: sample_mean(beta_hat),
            skewness: skewness_stat(beta_hat),
            kurtosis: kurtosis_stat(beta_hat),
        }
    }
}

pub fn sample_mean(beta_hat: &[f64]) -> f64 {
    beta_hat.iter().sum::<f64>() / beta_hat.len() as f64
}

pub fn skewness_stat(beta_hat: &[f64]) -> f64 {
    beta_hat.iter().map(|b| b * b * b).sum::<f64>() / (beta_hat.len() as f64).sqrt()
}

pub fn kurtosis_stat(beta_hat: &[f64]) -> f64 {
    beta_hat
        .iter()
        .map(|b| {
            let b2 = b * b;
            b2 * b2 - 3.0
        })
        .sum::<f64>()
        / (beta_hat.len() as f64).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum VarianceMode {
    Theoretical,
    Estimated,
}

/// Variances of `S_N` and `U_N = (U1) + (U2)` components.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct VarianceSet {
    pub var_s: f64,
    pub var_u1: f64,
    pub var_u2: f64,
    pub var_u: f64,
    pub mode: VarianceMode,
}

impl VarianceSet {
    fn new(var_s: f64, var_u1: f64, var_u2: f64, mode: VarianceMode) -> Self {
        Self {
            var_s,
            var_u1,
            var_u2,
            var_u: var_u1 + var_u2,
            mode,
        }
    }

    /// Variance of `U_N` under the normalization this set belongs to.
    ///
    /// With plug-in normalization `sum_k hat beta_k^2 = N` holds exactly (it is
    /// Parseval's identity for `hat sigma_N^2`), so `sum_k (hat beta_k^2 - 1)`
    /// vanishes and `U_N = N^-1/2 sum_k H_4(hat beta_k)`. The second-order
    /// component behind `sigma^2_{1U_N}` is gone and only `sigma^2_{2U_N}`
    /// remains.
    pub fn kurtosis_variance(&self) -> f64 {
        match self.mode {
            VarianceMode::Theoretical => self.var_u,
            VarianceMode::Estimated => self.var_u2,
        }
    }
}

/// Variances from weights `w(l)`, `l = 0..=N/2`, already divided by the
/// normalizing variance. `with_delta` selects the plug-in (`1/delta`) form.
///
/// `var_S = 6/N^2 R_3`, `var_U1 = 72/N R_2`, `var_U2 = 24/N^3 R_4`, where `R_p`
/// are the residue sums of [`residue`]; `R_2` reduces to the single sum over
/// `l_2 = -l_1`.
pub fn variances_from_normalized_weights(
    weights: &[f64],
    n: usize,
    with_delta: bool,
) -> (f64, f64, f64) {
    let nf = n as f64;
    let (r3, r4) = if with_delta {
        (
            residue::residue_sum_delta(weights, n, 3),
            residue::residue_sum_delta(weights, n, 4),
        )
    } else {
        (
            residue::residue_sum_plain(weights, n, 3),
            residue::residue_sum_plain(weights, n, 4),
        )
    };
    // Pairs l_1 + l_2 = 0 mod N with |l| < N/2 force l_2 = -l_1, where
    // delta = 2 halves the signed double count.
    let squares: f64 = weights.iter().skip(1).map(|w| w * w).sum();
    let r2 = if with_delta { squares } else { 2.0 * squares };
    (6.0 / (nf * nf) * r3, 72.0 / nf * r2, 24.0 / nf.powi(3) * r4)
}

fn normalize(weights: &[f64], n: usize) -> Result<Vec<f64>> {
    let sigma2 = 2.0 / n as f64 * weights.iter().skip(1).sum::<f64>();
    if !(sigma2 > 0.0) || !sigma2.is_finite() {
        return Err(Error::DegenerateVariance);
    }
    Ok(weights.iter().map(|w| w / sigma2).collect())
}

/// Exact `sigma^2_{S_N}, sigma^2_{1U_N}, sigma^2_{2U_N}` under the spectrum.
pub fn theoretical_variances(spectrum: &PowerSpectrum, scale: &NeedletScale) -> Result<VarianceSet> {
    let v = normalize(&spectral_weights(spectrum, scale)?, scale.n())?;
    let (s, u1, u2) = variances_from_normalized_weights(&v, scale.n(), false);
    Ok(VarianceSet::new(s, u1, u2, VarianceMode::Theoretical))
}

pub fn var_skew_theoretical(spectrum: &PowerSpectrum, scale: &NeedletScale) -> Result<f64> {
    let v = normalize(&spectral_weights(spectrum, scale)?, scale.n())?;
    Ok(6.0 / (scale.n() as f64).powi(2) * residue::residue_sum_plain(&v, scale.n(), 3))
}

pub fn var_kurt_theoretical(spectrum: &PowerSpectrum, scale: &NeedletScale) -> Result<(f64, f64)> {
    let set = theoretical_variances(spectrum, scale)?;
    Ok((set.var_u1, set.var_u2))
}

/// Plug-in variances from `|w_l|^2 a^2(4l/N)`, `l = 0..=N/2`, normalized by
/// `hat sigma_N^2` computed from the same values.
pub fn estimated_variances(weighted_power: &[f64], scale: &NeedletScale) -> Result<VarianceSet> {
    if weighted_power.len() != scale.l_max() + 1 {
        return Err(Error::invalid(
            "weighted_power",
            format!("expected {} values, got {}", scale.l_max() + 1, weighted_power.len()),
        ));
    }
    let u = normalize(weighted_power, scale.n())?;
    let (s, u1, u2) = variances_from_normalized_weights(&u, scale.n(), true);
    Ok(VarianceSet::new(s, u1, u2, VarianceMode::Estimated))
}

pub fn var_skew_estimated(weighted_power: &[f64], scale: &NeedletScale) -> Result<f64> {
    let u = normalize(weighted_power, scale.n())?;
    Ok(6.0 / (scale.n() as f64).powi(2) * residue::residue_sum_delta(&u, scale.n(), 3))
}

pub fn var_kurt_estimated(weighted_power: &[f64], scale: &NeedletScale) -> Result<(f64, f64)> {
    let set = estimated_variances(weighted_power, scale)?;
    Ok((set.var_u1, set.var_u2))
}

/// How coefficients and statistics are normalized.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TestMode {
    /// Theoretical `sigma_N` and variances from the known spectrum.
    Exact,
    /// Plug-in `hat sigma_N` and variances from the same data.
    Studentized,
}

impl fmt::Display for TestMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TestMode::Exact => "exact",
            TestMode::Studentized => "studentized",
        })
    }
}

impl FromStr for TestMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(TestMode::Exact),
            "studentized" => Ok(TestMode::Studentized),
            other => Err(Error::invalid(
                "mode",
                format!("`{other}` (expected exact or studentized)"),
            )),
        }
    }
}

/// Two-sided p-value of `z` under the standard normal law.
pub fn two_sided_p(z: f64) -> f64 {
    erfc(z.abs() / std::f64::consts::SQRT_2).clamp(0.0, 1.0)
}

/// `z` scores, p-values and the inputs they came from.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StudentizedReport {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "M_N")]
    pub m_n: f64,
    #[serde(rename = "S_N")]
    pub s_n: f64,
    #[serde(rename = "U_N")]
    pub u_n: f64,
    #[serde(rename = "var_S")]
    pub var_s: f64,
    #[serde(rename = "var_U1")]
    pub var_u1: f64,
    #[serde(rename = "var_U2")]
    pub var_u2: f64,
    #[serde(rename = "z_S")]
    pub z_s: f64,
    #[serde(rename = "z_U")]
    pub z_u: f64,
    #[serde(rename = "p_S")]
    pub p_s: f64,
    #[serde(rename = "p_U")]
    pub p_u: f64,
    /// Šidák-corrected p-value of `max(|z_S|, |z_U|)`.
    pub p_joint: f64,
    pub mode: TestMode,
    pub seed: Option<u64>,
}

/// Divides the statistics by the standard deviations in `variances`.
pub fn studentize(stats: &TestStatistics, variances: &VarianceSet) -> StudentizedReport {
    let z_s = stats.skewness / variances.var_s.sqrt();
    let z_u = stats.kurtosis / variances.kurtosis_variance().sqrt();
    let p_s = two_sided_p(z_s);
    let p_u = two_sided_p(z_u);
    let p_min = p_s.min(p_u);
    StudentizedReport {
        n: stats.n,
        m_n: stats.mean,
        s_n: stats.skewness,
        u_n: stats.kurtosis,
        var_s: variances.var_s,
        var_u1: variances.var_u1,
        var_u2: variances.var_u2,
        z_s,
        z_u,
        p_s,
        p_u,
        p_joint: 1.0 - (1.0 - p_min).powi(2),
        mode: match variances.mode {
            VarianceMode::Theoretical => TestMode::Exact,
            VarianceMode::Estimated => TestMode::Studentized,
        },
        seed: None,
    }
}

/// Exact-mode report: `beta / sigma_N` against the theoretical variances.
pub fn exact_report(beta: &[f64], sigma2: f64, theoretical: &VarianceSet) -> Result<StudentizedReport> {
    let stats = TestStatistics::from_beta(beta, sigma2)?;
    Ok(studentize(&stats, theoretical))
}

/// Studentized report: `beta / hat sigma_N` against the plug-in variances;
/// see [`VarianceSet::kurtosis_variance`] for the kurtosis denominator.
pub fn studentized_report(coeffs: &WaveletCoefficients) -> Result<StudentizedReport> {
    let stats = TestStatistics::from_beta(&coeffs.beta, coeffs.sigma2_hat)?;
    let variances = estimated_variances(&coeffs.weighted_power, &coeffs.scale)?;
    Ok(studentize(&stats, &variances))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::{beta_exact, sigma2_n};
    use crate::field::{replication_rng, synthesize};

    #[test]
    fn fejer_at_fourier_frequencies() {
        for n in [8usize, 16, 256] {
            let tau = 2.0 * PI / n as f64;
            assert!((fejer(n, 0.0) - n as f64 / (2.0 * PI)).abs() < 1e-12);
            assert!((fejer(n, n as f64 * tau) - n as f64 / (2.0 * PI)).abs() < 1e-6);
            for l in 1..n {
                assert!(fejer(n, l as f64 * tau).abs() < 1e-12, "n {n} l {l}");
            }
        }
    }

    #[test]
    fn fejer_matches_definition() {
        for &(n, t) in &[(8usize, 0.3), (16, 1.7), (33, -2.9), (100, 0.01)] {
            let (re, im) = (1..=n).fold((0.0, 0.0), |(re, im), k| {
                (re + (t * k as f64).cos(), im + (t * k as f64).sin())
            });
            let direct = (re * re + im * im) / (2.0 * PI * n as f64);
            assert!((fejer(n, t) - direct).abs() < 1e-12 * direct.max(1.0));
            assert!(fejer(n, t) >= 0.0);
        }
    }

    #[test]
    fn delta_examples() {
        assert_eq!(delta(&[3, 5]), 1);
        assert_eq!(delta(&[4, 4]), 2);
        assert_eq!(delta(&[7, 7, 7]), 6);
        assert_eq!(delta(&[2, 2, 2, 2]), 24);
        assert_eq!(delta(&[2, 9, 2]), 2);
        assert_eq!(delta(&[1, 1, 3, 3]), 4);
    }

    #[test]
    fn statistics_of_constant_coefficients() {
        let zeros = vec![0.0; 64];
        let s = TestStatistics::from_normalized(&zeros);
        assert_eq!(s.skewness, 0.0);
        assert_eq!(s.kurtosis, -3.0 * 8.0);
        let c = TestStatistics::from_normalized(&[1.5; 16]);
        assert_eq!(c.mean, 1.5);
        assert!(matches!(
            TestStatistics::from_beta(&zeros, 0.0),
            Err(Error::DegenerateVariance)
        ));
    }

    #[test]
    fn parity_under_sign_flip() {
        let beta: Vec<f64> = (0..50).map(|i| ((i * 37) % 11) as f64 / 5.0 - 1.0).collect();
        let flipped: Vec<f64> = beta.iter().map(|b| -b).collect();
        let a = TestStatistics::from_normalized(&beta);
        let b = TestStatistics::from_normalized(&flipped);
        assert_eq!(a.skewness, -b.skewness);
        assert_eq!(a.kurtosis, b.kurtosis);
    }

    #[test]
    fn zero_skewness_gives_unit_p() {
        let stats = TestStatistics { n: 16, mean: 0.0, skewness: 0.0, kurtosis: 0.4 };
        let vars = VarianceSet::new(2.0, 3.0, 1.0, VarianceMode::Theoretical);
        let r = studentize(&stats, &vars);
        assert_eq!(r.z_s, 0.0);
        assert_eq!(r.p_s, 1.0);
        assert!((r.z_u - 0.2).abs() < 1e-15);
        assert!(r.p_joint >= r.p_u.min(r.p_s) && r.p_joint <= 1.0);
        assert_eq!(r.mode, TestMode::Exact);
    }

    #[test]
    fn plug_in_normalization_removes_second_order_term() {
        let spec = PowerSpectrum::power_law(4.0).unwrap();
        let scale = NeedletScale::new(6).unwrap();
        let field = synthesize(&spec, scale.l_max(), &mut replication_rng(31, 0)).unwrap();
        let coeffs = beta_exact(&field, &scale).unwrap();
        let sd = coeffs.sigma2_hat.sqrt();
        let hat: Vec<f64> = coeffs.beta.iter().map(|b| b / sd).collect();
        let squares: f64 = hat.iter().map(|b| b * b).sum();
        assert!((squares / hat.len() as f64 - 1.0).abs() < 1e-12);
        let h4: f64 = hat.iter().map(|b| b.powi(4) - 6.0 * b * b + 3.0).sum::<f64>()
            / (hat.len() as f64).sqrt();
        let stats = TestStatistics::from_normalized(&hat);
        assert!((stats.kurtosis - h4).abs() < 1e-10);
        let report = studentized_report(&coeffs).unwrap();
        assert!((report.z_u - stats.kurtosis / report.var_u2.sqrt()).abs() < 1e-12);
        assert_eq!(report.mode, TestMode::Studentized);
    }

    #[test]
    fn fast_variances_match_literal_fejer_sums() {
        let spec = PowerSpectrum::power_law(4.0).unwrap();
        for n in [8usize, 16, 32] {
            let scale = NeedletScale::from_n(n).unwrap();
            let v = spectral_weights(&spec, &scale).unwrap();
            let sigma2 = sigma2_n(&spec, &scale).unwrap();
            let fast = theoretical_variances(&spec, &scale).unwrap();
            let rel = |a: f64, b: f64| ((a - b) / b).abs();
            assert!(rel(fast.var_s, brute::var_skew(&v, sigma2, n, false)) < 1e-9);
            assert!(rel(fast.var_u1, brute::var_kurt1(&v, sigma2, n, false)) < 1e-9);
            assert!(rel(fast.var_u2, brute::var_kurt2(&v, sigma2, n, false)) < 1e-9);
            assert_eq!(fast.var_u, fast.var_u1 + fast.var_u2);
            assert!(fast.var_s > 0.0 && fast.var_u1 > 0.0 && fast.var_u2 > 0.0);
        }
    }

    #[test]
    fn fast_estimates_match_literal_delta_sums() {
        let spec = PowerSpectrum::new(3.0, "cosine".parse().unwrap()).unwrap();
        let scale = NeedletScale::from_n(16).unwrap();
        let field = synthesize(&spec, 8, &mut replication_rng(12, 0)).unwrap();
        let coeffs = beta_exact(&field, &scale).unwrap();
        let u = &coeffs.weighted_power;
        let s2 = coeffs.sigma2_hat;
        let est = estimated_variances(u, &scale).unwrap();
        let rel = |a: f64, b: f64| ((a - b) / b).abs();
        assert!(rel(est.var_s, brute::var_skew(u, s2, 16, true)) < 1e-9);
        assert!(rel(est.var_u1, brute::var_kurt1(u, s2, 16, true)) < 1e-9);
        assert!(rel(est.var_u2, brute::var_kurt2(u, s2, 16, true)) < 1e-9);
        assert!(rel(var_skew_estimated(u, &scale).unwrap(), est.var_s) < 1e-14);
    }

    #[test]
    fn theoretical_power_plugged_into_estimator() {
        // |w_l|^2 = C_l: only the 1/delta corrections separate the two.
        let spec = PowerSpectrum::power_law(4.0).unwrap();
        let mut prev_gap = f64::INFINITY;
        for j in [4u32, 6, 8, 10] {
            let scale = NeedletScale::new(j).unwrap();
            let v = spectral_weights(&spec, &scale).unwrap();
            let theo = theoretical_variances(&spec, &scale).unwrap();
            let est = estimated_variances(&v, &scale).unwrap();
            let gap = (est.var_s / theo.var_s - 1.0).abs();
            assert!(gap < prev_gap, "j = {j}: {gap}");
            prev_gap = gap;
            // With deterministic power the 1/delta weights halve the U1 sum.
            assert!((est.var_u1 / theo.var_u1 - 0.5).abs() < 1e-12);
        }
        assert!(prev_gap < 0.01);
    }

    #[test]
    fn zero_power_is_degenerate() {
        let scale = NeedletScale::from_n(16).unwrap();
        assert!(matches!(
            estimated_variances(&[0.0; 9], &scale),
            Err(Error::DegenerateVariance)
        ));
        assert!(estimated_variances(&[1.0; 4], &scale).is_err());
    }
}
