//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use needlet_core::{window_a, GProfile, NeedletScale, PowerSpectrum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `r(d) = E beta_k beta_{k+d}` for `d = 0..N`, summed term by term over the
/// signed multipoles.
pub fn covariance(spec: &PowerSpectrum, scale: &NeedletScale) -> Vec<f64> {
    let n = scale.n() as i64;
    let terms: Vec<(f64, f64)> = (-(n / 2)..=n / 2)
        .filter(|&l| l != 0)
        .map(|l| {
            let a = window_a(4.0 * l as f64 / n as f64);
            (l as f64, spec.c_l(l).unwrap() * a * a)
        })
        .collect();
    (0..n)
        .map(|d| {
            let t = 2.0 * PI * d as f64 / n as f64;
            terms.iter().map(|&(l, v)| v * (l * t).cos()).sum::<f64>() / n as f64
        })
        .collect()
}

/// Gaussian moment expansion: `E S_N^2 = 6 sum_d rho(d)^3`.
pub fn diagram_var_skew(spec: &PowerSpectrum, scale: &NeedletScale) -> f64 {
    let r = covariance(spec, scale);
    r.iter().map(|x| 6.0 * (x / r[0]).powi(3)).sum()
}

/// `E U_N^2 = sum_d [72 rho(d)^2 + 24 rho(d)^4]`, split into the two terms.
pub fn diagram_var_kurt(spec: &PowerSpectrum, scale: &NeedletScale) -> (f64, f64) {
    let r = covariance(spec, scale);
    let rho: Vec<f64> = r.iter().map(|x| x / r[0]).collect();
    (
        rho.iter().map(|x| 72.0 * x * x).sum(),
        rho.iter().map(|x| 24.0 * x.powi(4)).sum(),
    )
}

/// `C_l = g(l) l^-alpha` with a tabulated `g` drawn uniformly from `[0.5, 2]`.
pub fn random_spectrum(seed: u64, alpha: f64, l_max: usize) -> PowerSpectrum {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..l_max).map(|_| rng.random_range(0.5..2.0)).collect();
    PowerSpectrum::new(alpha, GProfile::Tabulated { values }).unwrap()
}

pub fn relative(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

pub fn sample_variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() - 1) as f64
}

/// Standard error of the sample variance, from the sample fourth moment.
pub fn variance_standard_error(x: &[f64]) -> f64 {
    let m = mean(x);
    let n = x.len() as f64;
    let m2 = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
    let m4 = x.iter().map(|v| (v - m).powi(4)).sum::<f64>() / n;
    ((m4 - m2 * m2) / n).sqrt()
}

pub fn median(mut x: Vec<f64>) -> f64 {
    x.sort_by(f64::total_cmp);
    let n = x.len();
    if n % 2 == 1 {
        x[n / 2]
    } else {
        0.5 * (x[n / 2 - 1] + x[n / 2])
    }
}

pub fn workers() -> usize {
    std::thread::available_parallelism().map_or(4, |n| n.get())
}
