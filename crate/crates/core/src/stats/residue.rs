//! Fejér-kernel sums reduced to residue classes.
//!
//! For a weight sequence `v` on the signed multipoles (even in `l`) the sums
//! appearing in the variance formulas have the form
//!
//! ```text
//! T_p(v) = sum_{l_1..l_p} v(l_1) ... v(l_p) K_N((l_1 + ... + l_p) tau)
//! ```
//!
//! and Fejér's kernel vanishes at every Fourier frequency except the multiples
//! of `2 pi`, where it equals `N / 2 pi`. Hence
//! `T_p = (N / 2 pi) * R_p` with `R_p` the sum over tuples whose total is
//! `0 mod N`, i.e. the `p`-fold self-convolution of `v` read off at `0, +-N, ...`.
//!
//! The plug-in estimators weight each tuple by `1 / delta`, where `delta`
//! depends on which `|l_i|` coincide. The sum is split over the lattice of set
//! partitions of the positions: for a partition `sigma`, let `A(sigma)` be the
//! residue sum restricted to tuples with `|l_i| = |l_j|` whenever `i, j` share a
//! block (and no constraint otherwise). Möbius inversion on the partition
//! lattice turns these "at least" sums into the "exactly" sums that `1/delta`
//! needs, giving `sum_sigma c(sigma) A(sigma)` with
//! `c(sigma) = sum_{pi <= sigma} mu(pi, sigma) / delta(pi)`. The finest partition
//! is the plain convolution bulk with `c = 1`; the coarser ones are the
//! coincidence corrections. Each `A(sigma)` is itself a residue sum of the
//! convolution of one sequence per block.

use std::collections::BTreeMap;

use crate::fft;

/// A real sequence indexed by signed integers, `data[i]` at `offset + i`.
#[derive(Clone, Debug)]
struct SignedSeq {
    offset: i64,
    data: Vec<f64>,
}

impl SignedSeq {
    fn end(&self) -> i64 {
        self.offset + self.data.len() as i64
    }

    fn convolve(&self, other: &SignedSeq) -> SignedSeq {
        SignedSeq {
            offset: self.offset + other.offset,
            data: fft::convolve(&self.data, &other.data),
        }
    }

    /// `sum_s self(s) other(t - s)`.
    fn dot_at(&self, other: &SignedSeq, t: i64) -> f64 {
        // Need other.offset <= t - s < other.end().
        let lo = self.offset.max(t - other.end() + 1);
        let hi = self.end().min(t - other.offset + 1);
        (lo..hi)
            .map(|s| self.data[(s - self.offset) as usize] * other.data[(t - s - other.offset) as usize])
            .sum()
    }
}

/// The sequence of `sum_{eps in {+-1}^m} L (eps_1 + ... + eps_m)` weighted by
/// `w(L)^m`, i.e. the law of the sum of `m` signed copies of one shared `|l| = L`.
fn block_sequence(weights: &[f64], m: usize) -> SignedSeq {
    let l_max = weights.len() as i64 - 1;
    let half = m as i64 * l_max;
    let mut data = vec![0.0; (2 * half + 1) as usize];
    let binom = binomials(m);
    for (l, &w) in weights.iter().enumerate().skip(1) {
        if w == 0.0 {
            continue;
        }
        let wm = w.powi(m as i32);
        for (j, &b) in binom.iter().enumerate() {
            let s = l as i64 * (m as i64 - 2 * j as i64);
            data[(s + half) as usize] += b * wm;
        }
    }
    SignedSeq { offset: -half, data }
}

fn binomials(m: usize) -> Vec<f64> {
    let mut row = vec![1.0];
    for _ in 0..m {
        let mut next = vec![1.0; row.len() + 1];
        for i in 1..row.len() {
            next[i] = row[i - 1] + row[i];
        }
        row = next;
    }
    row
}

/// Sum over `t = 0 mod modulus` of the convolution of all `blocks`.
fn residue_sum(blocks: &[SignedSeq], modulus: usize) -> f64 {
    let (last, rest) = blocks.split_last().expect("at least one block");
    let modulus = modulus as i64;
    match rest.split_first() {
        None => (last.offset..last.end())
            .filter(|t| t.rem_euclid(modulus) == 0)
            .map(|t| last.data[(t - last.offset) as usize])
            .sum(),
        Some((first, middle)) => {
            let head = middle.iter().fold(first.clone(), |acc, b| acc.convolve(b));
            let lo = head.offset + last.offset;
            let hi = head.end() + last.end() - 2;
            let first_target = lo.div_euclid(modulus) * modulus;
            (0..)
                .map(|q| first_target + q * modulus)
                .skip_while(|&t| t < lo)
                .take_while(|&t| t <= hi)
                .map(|t| head.dot_at(last, t))
                .sum()
        }
    }
}

/// `R_p(w) = sum over signed tuples with l_1 + ... + l_p = 0 mod N of prod w(l_i)`,
/// for `w` given on `l = 0..=L` and extended evenly (`w(0)` is ignored).
pub fn residue_sum_plain(weights: &[f64], n: usize, order: usize) -> f64 {
    let v = block_sequence(weights, 1);
    let blocks = vec![v; order];
    residue_sum(&blocks, n)
}

/// As [`residue_sum_plain`] with every tuple divided by its multiplicity
/// `delta(|l_1|, ..., |l_p|)`.
pub fn residue_sum_delta(weights: &[f64], n: usize, order: usize) -> f64 {
    let mut cache: BTreeMap<usize, SignedSeq> = BTreeMap::new();
    partition_coefficients(order)
        .into_iter()
        .filter(|(_, c)| *c != 0.0)
        .map(|(sizes, c)| {
            let blocks: Vec<SignedSeq> = sizes
                .iter()
                .map(|&m| {
                    cache
                        .entry(m)
                        .or_insert_with(|| block_sequence(weights, m))
                        .clone()
                })
                .collect();
            c * residue_sum(&blocks, n)
        })
        .sum()
}

/// `c(sigma)` aggregated by block-size type (sizes sorted decreasingly).
pub(crate) fn partition_coefficients(p: usize) -> BTreeMap<Vec<usize>, f64> {
    let parts = set_partitions(p);
    let mut out = BTreeMap::new();
    for sigma in &parts {
        let c: f64 = parts
            .iter()
            .filter(|pi| refines(pi, sigma))
            .map(|pi| mobius(pi, sigma) / multiplicity(pi))
            .sum();
        *out.entry(block_sizes(sigma)).or_insert(0.0) += c;
    }
    out
}

/// All set partitions of `0..p` as restricted growth strings.
fn set_partitions(p: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut labels = vec![0usize; p];
    fn rec(i: usize, max_label: usize, labels: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if i == labels.len() {
            out.push(labels.clone());
            return;
        }
        for lab in 0..=max_label + 1 {
            labels[i] = lab;
            rec(i + 1, max_label.max(lab), labels, out);
        }
    }
    if p == 0 {
        return vec![vec![]];
    }
    // Position 0 always opens block 0.
    rec(1, 0, &mut labels, &mut out);
    out
}

/// `pi <= sigma`: every block of `pi` sits inside a block of `sigma`.
fn refines(pi: &[usize], sigma: &[usize]) -> bool {
    (0..pi.len()).all(|i| (0..pi.len()).all(|j| pi[i] != pi[j] || sigma[i] == sigma[j]))
}

fn block_count(labels: &[usize]) -> usize {
    labels.iter().max().map_or(0, |m| m + 1)
}

fn block_sizes(labels: &[usize]) -> Vec<usize> {
    let mut sizes = vec![0usize; block_count(labels)];
    for &l in labels {
        sizes[l] += 1;
    }
    sizes.sort_unstable_by(|a, b| b.cmp(a));
    sizes
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

fn multiplicity(labels: &[usize]) -> f64 {
    block_sizes(labels).into_iter().map(factorial).product()
}

/// Möbius function of the partition lattice on an interval `[pi, sigma]`.
fn mobius(pi: &[usize], sigma: &[usize]) -> f64 {
    (0..block_count(sigma))
        .map(|b| {
            let mut inner: Vec<usize> = (0..pi.len())
                .filter(|&i| sigma[i] == b)
                .map(|i| pi[i])
                .collect();
            inner.sort_unstable();
            inner.dedup();
            let k = inner.len();
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            sign * factorial(k - 1)
        })
        .product()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bell_numbers() {
        let counts: Vec<usize> = (1..=5).map(|p| set_partitions(p).len()).collect();
        assert_eq!(counts, vec![1, 2, 5, 15, 52]);
    }

    #[test]
    fn coefficient_values() {
        let c2 = partition_coefficients(2);
        assert_eq!(c2[&vec![1, 1]], 1.0);
        assert_eq!(c2[&vec![2]], -0.5);
        let c3 = partition_coefficients(3);
        assert_eq!(c3[&vec![1, 1, 1]], 1.0);
        assert!((c3[&vec![2, 1]] + 1.5).abs() < 1e-15);
        assert!((c3[&vec![3]] - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn coefficients_reproduce_inverse_multiplicity() {
        // A tuple with equality pattern pi meets the constraints of every sigma
        // finer than pi, so those c(sigma) must add up to 1 / delta(pi).
        for p in 1..=4 {
            let parts = set_partitions(p);
            for pi in &parts {
                let total: f64 = parts
                    .iter()
                    .filter(|sigma| refines(sigma, pi))
                    .map(|sigma| {
                        parts
                            .iter()
                            .filter(|rho| refines(rho, sigma))
                            .map(|rho| mobius(rho, sigma) / multiplicity(rho))
                            .sum::<f64>()
                    })
                    .sum();
                assert!((total - 1.0 / multiplicity(pi)).abs() < 1e-12, "{pi:?}");
            }
        }
    }

    fn brute_residue(weights: &[f64], n: usize, order: usize, with_delta: bool) -> f64 {
        let l_max = weights.len() as i64 - 1;
        let signed: Vec<i64> = (-l_max..=l_max).filter(|&l| l != 0).collect();
        let mut idx = vec![0usize; order];
        let mut total = 0.0;
        loop {
            let ls: Vec<i64> = idx.iter().map(|&i| signed[i]).collect();
            if ls.iter().sum::<i64>().rem_euclid(n as i64) == 0 {
                let prod: f64 = ls.iter().map(|l| weights[l.unsigned_abs() as usize]).product();
                let abs: Vec<u64> = ls.iter().map(|l| l.unsigned_abs()).collect();
                let d = if with_delta { crate::stats::delta(&abs) as f64 } else { 1.0 };
                total += prod / d;
            }
            let mut k = 0;
            loop {
                if k == order {
                    return total;
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

    #[test]
    fn residue_sums_match_enumeration() {
        let weights = [0.0, 0.3, 1.2, 0.7, 0.05, 0.9];
        for n in [4usize, 8, 16] {
            for order in 1..=4 {
                let fast = residue_sum_plain(&weights, n, order);
                let slow = brute_residue(&weights, n, order, false);
                assert!((fast - slow).abs() <= 1e-12 * slow.abs().max(1.0), "n {n} p {order}");
                let fast = residue_sum_delta(&weights, n, order);
                let slow = brute_residue(&weights, n, order, true);
                assert!((fast - slow).abs() <= 1e-12 * slow.abs().max(1.0), "delta n {n} p {order}");
            }
        }
    }
}
