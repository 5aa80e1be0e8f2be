//! Literal evaluation of the Fejér-kernel variance sums.
//!
//! Every signed tuple of multipoles is visited and Fejér's kernel is evaluated
//! through its closed form, so the cost is `O(N^p)`. Kept as a reference for the
//! residue-class fast path; usable up to `N = 32` or so.

use std::f64::consts::PI;

use super::{delta, fejer};

/// Visits every tuple of nonzero signed multipoles `|l| <= l_max`.
fn for_each_tuple(l_max: i64, order: usize, mut f: impl FnMut(&[i64])) {
    let signed: Vec<i64> = (-l_max..=l_max).filter(|&l| l != 0).collect();
    let mut idx = vec![0usize; order];
    let mut tuple = vec![0i64; order];
    loop {
        for (t, &i) in tuple.iter_mut().zip(&idx) {
            *t = signed[i];
        }
        f(&tuple);
        let mut k = 0;
        loop {
            if k == order {
                return;
            }
            idx[k] += 1;
            if idx[k] < signed.len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

/// `sum_{l_1..l_p} prod w(l_i) K_N((l_1 + ... + l_p) 2pi/N) / delta^{[with_delta]}`
/// with `w` given on `0..=L` and extended evenly.
pub fn fejer_sum(weights: &[f64], n: usize, order: usize, with_delta: bool) -> f64 {
    let tau = 2.0 * PI / n as f64;
    let mut total = 0.0;
    let mut abs = vec![0u64; order];
    for_each_tuple(weights.len() as i64 - 1, order, |ls| {
        let prod: f64 = ls.iter().map(|l| weights[l.unsigned_abs() as usize]).product();
        if prod == 0.0 {
            return;
        }
        let d = if with_delta {
            for (a, l) in abs.iter_mut().zip(ls) {
                *a = l.unsigned_abs();
            }
            delta(&abs) as f64
        } else {
            1.0
        };
        total += prod / d * fejer(n, ls.iter().sum::<i64>() as f64 * tau);
    });
    total
}

/// `sigma^2_{S_N} = 12 pi / (sigma^6 N^3) sum C a^2 C a^2 C a^2 K_N`.
pub fn var_skew(weights: &[f64], sigma2: f64, n: usize, with_delta: bool) -> f64 {
    12.0 * PI / (sigma2.powi(3) * (n as f64).powi(3)) * fejer_sum(weights, n, 3, with_delta)
}

/// `sigma^2_{1U_N} = 72 / sigma^4 * 2 pi / N^2 sum C a^2 C a^2 K_N`.
pub fn var_kurt1(weights: &[f64], sigma2: f64, n: usize, with_delta: bool) -> f64 {
    72.0 / sigma2.powi(2) * 2.0 * PI / (n as f64).powi(2) * fejer_sum(weights, n, 2, with_delta)
}

/// `sigma^2_{2U_N} = 24 / sigma^8 * 2 pi / N^4 sum (C a^2)^4 K_N`.
pub fn var_kurt2(weights: &[f64], sigma2: f64, n: usize, with_delta: bool) -> f64 {
    24.0 / sigma2.powi(4) * 2.0 * PI / (n as f64).powi(4) * fejer_sum(weights, n, 4, with_delta)
}
