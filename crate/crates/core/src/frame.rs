//! Littlewood–Paley window, trigonometric needlets and quadrature on the torus.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fft;

/// Slack allowed on `phi(xi/2) - phi(xi)` before the window is declared broken.
pub const WINDOW_TOLERANCE: f64 = 1e-12;

/// Number of grid points used by [`localization_profile`].
pub const LOCALIZATION_GRID: usize = 1 << 14;

/// The C-infinity bump `exp(-1/t)` for `t > 0`, zero otherwise.
pub fn exp_bump(t: f64) -> f64 {
    if t > 0.0 {
        (-1.0 / t).exp()
    } else {
        0.0
    }
}

/// A smooth cut-off `phi` and the derived dyadic window `a`.
///
/// `phi(xi) = s(2 - 2|xi|) / (s(2 - 2|xi|) + s(2|xi| - 1))`, so `phi` equals one
/// on `|xi| <= 1/2`, vanishes for `|xi| >= 1` and interpolates smoothly in between.
/// The transition profile `s` defaults to [`exp_bump`].
#[derive(Clone, Copy, Debug)]
pub struct WindowFunction {
    transition: fn(f64) -> f64,
}

impl Default for WindowFunction {
    fn default() -> Self {
        Self {
            transition: exp_bump,
        }
    }
}

impl WindowFunction {
    /// Builds a window from a custom transition profile. Only profiles that are
    /// non-negative and vanish on `t <= 0` produce an admissible window;
    /// [`WindowFunction::try_a`] reports the ones that do not.
    pub fn with_transition(transition: fn(f64) -> f64) -> Self {
        Self { transition }
    }

    pub fn phi(&self, xi: f64) -> f64 {
        let r = xi.abs();
        if r <= 0.5 {
            return 1.0;
        }
        if r >= 1.0 {
            return 0.0;
        }
        let s = self.transition;
        let up = s(2.0 - 2.0 * r);
        let down = s(2.0 * r - 1.0);
        up / (up + down)
    }

    /// `a(xi) = sqrt(phi(xi/2) - phi(xi))`, failing if the difference is
    /// materially negative.
    pub fn try_a(&self, xi: f64) -> Result<f64> {
        let r = xi.abs();
        if !(0.5..=2.0).contains(&r) {
            return Ok(0.0);
        }
        let sq = self.phi(r / 2.0) - self.phi(r);
        if sq < -WINDOW_TOLERANCE || !sq.is_finite() {
            return Err(Error::Consistency(format!(
                "window a^2({xi}) = {sq} is negative: the cut-off profile is not admissible"
            )));
        }
        Ok(sq.max(0.0).sqrt())
    }

    /// Like [`WindowFunction::try_a`] with negative rounding residue clamped to zero.
    pub fn a(&self, xi: f64) -> f64 {
        self.try_a(xi).unwrap_or(0.0)
    }
}

/// The standard cut-off function.
pub fn phi(xi: f64) -> f64 {
    WindowFunction::default().phi(xi)
}

/// The standard dyadic window `a`, even and supported in `1/2 <= |xi| <= 2`.
pub fn window_a(xi: f64) -> f64 {
    WindowFunction::default().a(xi)
}

/// One resolution level: `N = 2^(j+2)` coefficients on a grid of step `2 pi / N`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct NeedletScale {
    j: u32,
    n: usize,
}

impl NeedletScale {
    pub fn new(j: u32) -> Result<Self> {
        if j > 28 {
            return Err(Error::invalid("j", format!("level {j} is too large (max 28)")));
        }
        Ok(Self { j, n: 1usize << (j + 2) })
    }

    /// The scale with `N` coefficients; `N` must be a power of two, at least 4.
    pub fn from_n(n: usize) -> Result<Self> {
        if n < 4 || !n.is_power_of_two() {
            return Err(Error::invalid(
                "N",
                format!("{n} is not a power of two >= 4"),
            ));
        }
        Self::new(n.trailing_zeros() - 2)
    }

    pub fn j(&self) -> u32 {
        self.j
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn tau(&self) -> f64 {
        2.0 * PI / self.n as f64
    }

    /// Highest multipole that can carry weight (`N/2`, where the weight is zero).
    pub fn l_max(&self) -> usize {
        self.n / 2
    }

    /// Lowest multipole of the nominal band (`N/8`, where the weight is zero).
    pub fn l_min(&self) -> usize {
        self.n / 8
    }

    /// The spectral weight `a(4l/N)`, even in `l`.
    pub fn weight(&self, l: i64) -> f64 {
        window_a(4.0 * l as f64 / self.n as f64)
    }

    /// Weights `a(4l/N)` for `l = 0..=N/2`.
    pub fn weights(&self) -> Vec<f64> {
        (0..=self.l_max() as i64).map(|l| self.weight(l)).collect()
    }
}

/// The needlet `psi_N(x) = N^{-1/2} sum_{l != 0} a(4l/N) e^{ilx}`, which is real.
pub fn psi_eval(scale: &NeedletScale, x: f64) -> f64 {
    let sum: f64 = (scale.l_min()..=scale.l_max())
        .map(|l| scale.weight(l as i64) * (l as f64 * x).cos())
        .sum();
    2.0 * sum / (scale.n() as f64).sqrt()
}

/// The translated needlet `psi_{N,k}(x) = psi_N(x - k tau)`.
pub fn needlet(scale: &NeedletScale, k: usize, x: f64) -> f64 {
    psi_eval(scale, x - k as f64 * scale.tau())
}

/// Equal-weight rule on `m + 1` equispaced nodes, exact for trigonometric
/// polynomials of degree `<= m` against `dx / 2 pi`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureRule {
    pub degree: usize,
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

pub fn quadrature(m: usize) -> QuadratureRule {
    let count = m + 1;
    QuadratureRule {
        degree: m,
        points: (0..count)
            .map(|l| 2.0 * PI * l as f64 / count as f64)
            .collect(),
        weights: vec![1.0 / count as f64; count],
    }
}

impl QuadratureRule {
    pub fn integrate<F: Fn(f64) -> Complex64>(&self, f: F) -> Complex64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| f(x) * w)
            .sum()
    }
}

/// `sum_{|k| <= d} c_k e^{ikx}`, coefficients stored from `k = -d` upwards.
#[derive(Clone, Debug, PartialEq)]
pub struct TrigPolynomial {
    coeffs: Vec<Complex64>,
}

impl TrigPolynomial {
    /// From `2d + 1` coefficients ordered `c_{-d}, ..., c_d`.
    pub fn new(coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len().is_multiple_of(2) {
            return Err(Error::invalid(
                "coeffs",
                "expected an odd number of coefficients (c_{-d}..c_d)",
            ));
        }
        Ok(Self { coeffs })
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() / 2
    }

    pub fn coeff(&self, k: i64) -> Complex64 {
        let d = self.degree() as i64;
        if k.abs() > d {
            Complex64::new(0.0, 0.0)
        } else {
            self.coeffs[(k + d) as usize]
        }
    }

    pub fn eval(&self, x: f64) -> Complex64 {
        let d = self.degree() as i64;
        (-d..=d)
            .map(|k| self.coeff(k) * Complex64::from_polar(1.0, k as f64 * x))
            .sum()
    }

    /// `(1/2pi) int |f|^2`.
    pub fn energy(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }

    /// Highest `|k|` with a nonzero coefficient.
    pub fn effective_degree(&self) -> usize {
        let d = self.degree() as i64;
        (0..=d)
            .rev()
            .find(|&k| self.coeff(k) != Complex64::new(0.0, 0.0) || self.coeff(-k) != Complex64::new(0.0, 0.0))
            .unwrap_or(0) as usize
    }
}

/// Frame coefficients `<f, psi_{j,eta}>` for all `eta = 2 pi k / 2^(j+2)`,
/// using the level-`j` needlet `2^{-(j/2+1)} sum_l a(l/2^j) e^{il(x - eta)}`.
pub fn frame_coefficients(f: &TrigPolynomial, j: u32) -> Vec<Complex64> {
    let points = 1usize << (j + 2);
    let dyadic = (1u64 << j) as f64;
    let mut bins = vec![Complex64::new(0.0, 0.0); points];
    let d = f.degree() as i64;
    for l in -d..=d {
        let w = window_a(l as f64 / dyadic);
        if w == 0.0 {
            continue;
        }
        bins[l.rem_euclid(points as i64) as usize] += f.coeff(l) * w;
    }
    // <f, psi> = 2^{-(j/2+1)} sum_l f_l a(l/2^j) e^{il eta}
    fft::inverse(&mut bins);
    let norm = 1.0 / (points as f64).sqrt();
    bins.iter().map(|z| z * norm).collect()
}

/// Outcome of [`tight_frame_check`].
#[derive(Clone, Debug, Serialize)]
pub struct FrameCheck {
    pub energy: f64,
    pub frame_energy: f64,
    pub discrepancy: f64,
}

impl FrameCheck {
    pub fn relative(&self) -> f64 {
        if self.energy == 0.0 {
            self.discrepancy
        } else {
            self.discrepancy / self.energy
        }
    }
}

/// Compares `||f||^2` against `|<f, psi_0>|^2 + sum_{j <= J, eta} |<f, psi_{j,eta}>|^2`.
pub fn tight_frame_check(f: &TrigPolynomial, levels: u32) -> Result<FrameCheck> {
    let limit = 1usize << levels;
    let degree = f.effective_degree();
    if degree > limit {
        return Err(Error::BandLimitExceeded { degree, limit });
    }
    let energy = f.energy();
    let mut frame_energy = f.coeff(0).norm_sqr();
    for j in 0..=levels {
        frame_energy += frame_coefficients(f, j)
            .iter()
            .map(|c| c.norm_sqr())
            .sum::<f64>();
    }
    Ok(FrameCheck {
        energy,
        frame_energy,
        discrepancy: (energy - frame_energy).abs(),
    })
}

/// `|psi_N|` on a grid over `[-pi, pi]` against the fitted decay envelope
/// `c 2^j / (sqrt(N) (1 + 2^j |x|)^k)`.
#[derive(Clone, Debug, Serialize)]
pub struct LocalizationProfile {
    pub j: u32,
    pub k_decay: u32,
    /// Smallest `c` with `|sqrt(N) psi_N(x)| <= c 2^j / (1 + 2^j |x|)^k` on the grid.
    pub constant: f64,
    pub x: Vec<f64>,
    pub abs_psi: Vec<f64>,
    pub bound: Vec<f64>,
}

pub fn localization_profile(scale: &NeedletScale, k_decay: u32) -> Result<LocalizationProfile> {
    if k_decay < 2 {
        return Err(Error::invalid("k_decay", "decay order must be at least 2"));
    }
    let dyadic = (1u64 << scale.j()) as f64;
    let root_n = (scale.n() as f64).sqrt();
    let step = 2.0 * PI / (LOCALIZATION_GRID - 1) as f64;
    let x: Vec<f64> = (0..LOCALIZATION_GRID)
        .map(|i| -PI + i as f64 * step)
        .collect();
    let abs_psi: Vec<f64> = x.iter().map(|&t| psi_eval(scale, t).abs()).collect();
    let envelope = |t: f64| dyadic / (1.0 + dyadic * t.abs()).powi(k_decay as i32);
    let constant = x
        .iter()
        .zip(&abs_psi)
        .map(|(&t, &p)| p * root_n / envelope(t))
        .fold(0.0, f64::max);
    let bound = x
        .iter()
        .map(|&t| constant * envelope(t) / root_n)
        .collect();
    Ok(LocalizationProfile {
        j: scale.j(),
        k_decay,
        constant,
        x,
        abs_psi,
        bound,
    })
}
