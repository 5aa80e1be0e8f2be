//! Needlet coefficients of a field, their normalization and correlation.
//!
//! With the weights `b_l = a(4|l|/N) / sqrt(N)` the coefficients are
//!
//! ```text
//! beta_k = sum_{N/8 <= |l| <= N/2} w_l b_l e^{-i l k tau},   k = 0..N
//! ```
//!
//! i.e. the integral of `X` against the needlet centred at `-k tau`. All `N`
//! values come out of one length-`N` transform of the weighted coefficients.

use rustfft::num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fft;
use crate::field::{GridSample, SpectralField};
use crate::frame::NeedletScale;
use crate::spectrum::PowerSpectrum;

/// Largest tolerated imaginary residue (relative to the coefficient scale)
/// when transforming Hermitian-symmetric input.
pub const IMAGINARY_TOLERANCE: f64 = 1e-10;

/// Read access to the positive-frequency Fourier coefficients of a real field.
pub trait FourierCoefficients {
    /// Largest available `l`.
    fn bandwidth(&self) -> usize;
    /// `w_l` for `1 <= l <= bandwidth()`.
    fn coefficient(&self, l: usize) -> Complex64;
}

impl FourierCoefficients for SpectralField {
    fn bandwidth(&self) -> usize {
        self.l_max()
    }

    fn coefficient(&self, l: usize) -> Complex64 {
        self.coeff(l as i64)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CoefficientSource {
    ExactSpectral,
    GridAliased,
    /// Read back from a coefficient file.
    Imported,
}

#[derive(Clone, Debug)]
pub struct WaveletCoefficients {
    pub scale: NeedletScale,
    pub beta: Vec<f64>,
    /// `sigma_N^2` of the generating spectrum, when it is known.
    pub sigma2: Option<f64>,
    /// Plug-in `hat sigma_N^2` from the coefficients that produced `beta`.
    pub sigma2_hat: f64,
    /// `|w_l|^2 a^2(4l/N)` for `l = 0..=N/2`, the input of the variance estimators.
    pub weighted_power: Vec<f64>,
    pub source: CoefficientSource,
    pub imag_residue: f64,
}

impl WaveletCoefficients {
    pub fn n(&self) -> usize {
        self.scale.n()
    }

    /// Rebuilds the weighted power from the coefficients alone: inverting the
    /// transform gives `w_l a(4l/N) = N^-1/2 sum_k beta_k e^{ilk tau}`.
    pub fn from_beta(beta: Vec<f64>) -> Result<Self> {
        let scale = NeedletScale::from_n(beta.len())?;
        let n = scale.n();
        let mut bins: Vec<Complex64> = beta.iter().map(|&b| Complex64::new(b, 0.0)).collect();
        fft::inverse(&mut bins);
        let mut power = vec![0.0; scale.l_max() + 1];
        for (l, slot) in power.iter_mut().enumerate().skip(1) {
            *slot = bins[l].norm_sqr() / n as f64;
        }
        // beta cannot carry the l = N/2 mode, where the window vanishes.
        power[scale.l_max()] = 0.0;
        let sigma2_hat = 2.0 / n as f64 * power.iter().sum::<f64>();
        Ok(Self {
            scale,
            beta,
            sigma2: None,
            sigma2_hat,
            weighted_power: power,
            source: CoefficientSource::Imported,
            imag_residue: 0.0,
        })
    }

    /// The theoretical normalization when known, otherwise the plug-in one.
    pub fn sigma2_or_hat(&self) -> f64 {
        self.sigma2.unwrap_or(self.sigma2_hat)
    }
}

/// Fourier coefficients `tilde w_l` estimated from `M` grid samples.
#[derive(Clone, Debug)]
pub struct EmpiricalSpectrum {
    m: usize,
    /// `w[l]` for `l = 0..=l_max_used`; `w[0]` is the sample mean.
    w: Vec<Complex64>,
}

impl EmpiricalSpectrum {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn w_tilde(&self, l: i64) -> Complex64 {
        let m = l.unsigned_abs() as usize;
        if m >= self.w.len() {
            return Complex64::new(0.0, 0.0);
        }
        if l < 0 {
            self.w[m].conj()
        } else {
            self.w[m]
        }
    }

    /// The band-limited field with coefficients `tilde w_1..`.
    pub fn to_field(&self) -> Result<SpectralField> {
        SpectralField::from_coefficients(self.w[1..].to_vec())
    }
}

impl FourierCoefficients for EmpiricalSpectrum {
    fn bandwidth(&self) -> usize {
        self.w.len() - 1
    }

    fn coefficient(&self, l: usize) -> Complex64 {
        self.w_tilde(l as i64)
    }
}

fn check_bandwidth<F: FourierCoefficients + ?Sized>(field: &F, scale: &NeedletScale) -> Result<()> {
    if field.bandwidth() < scale.l_max() {
        return Err(Error::InsufficientBandwidth {
            required: scale.l_max(),
            available: field.bandwidth(),
        });
    }
    Ok(())
}

/// `|w_l|^2 a^2(4l/N)` for `l = 0..=N/2`.
pub fn weighted_power<F: FourierCoefficients + ?Sized>(
    field: &F,
    scale: &NeedletScale,
) -> Result<Vec<f64>> {
    check_bandwidth(field, scale)?;
    let mut out = vec![0.0; scale.l_max() + 1];
    for (l, slot) in out.iter_mut().enumerate().skip(scale.l_min()) {
        let a = scale.weight(l as i64);
        *slot = field.coefficient(l).norm_sqr() * a * a;
    }
    Ok(out)
}

fn transform<F: FourierCoefficients + ?Sized>(
    field: &F,
    scale: &NeedletScale,
    source: CoefficientSource,
) -> Result<WaveletCoefficients> {
    check_bandwidth(field, scale)?;
    let n = scale.n();
    let norm = 1.0 / (n as f64).sqrt();
    let mut bins = vec![Complex64::new(0.0, 0.0); n];
    let mut magnitude = 0.0;
    for l in scale.l_min()..=scale.l_max() {
        let b = scale.weight(l as i64) * norm;
        if b == 0.0 {
            continue;
        }
        let w = field.coefficient(l) * b;
        magnitude += w.norm();
        bins[l] += w;
        bins[n - l] += w.conj();
    }
    fft::forward(&mut bins);
    let imag_residue = bins.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    if imag_residue > IMAGINARY_TOLERANCE * magnitude.max(f64::MIN_POSITIVE) {
        return Err(Error::Consistency(format!(
            "needlet transform left an imaginary residue of {imag_residue:e}"
        )));
    }
    let power = weighted_power(field, scale)?;
    let sigma2_hat = 2.0 / n as f64 * power.iter().sum::<f64>();
    Ok(WaveletCoefficients {
        scale: *scale,
        beta: bins.into_iter().map(|z| z.re).collect(),
        sigma2: None,
        sigma2_hat,
        weighted_power: power,
        source,
        imag_residue,
    })
}

/// Needlet coefficients computed exactly from the field's spectral coefficients.
pub fn beta_exact(field: &SpectralField, scale: &NeedletScale) -> Result<WaveletCoefficients> {
    let mut out = transform(field, scale, CoefficientSource::ExactSpectral)?;
    if let Some(spec) = field.spectrum() {
        out.sigma2 = Some(sigma2_n(spec, scale)?);
    }
    Ok(out)
}

/// `tilde w_l = (1/M) sum_m X(2 pi m / M) e^{-2 pi i m l / M}` for `l = 0..=l_max_used`.
pub fn w_discrete(samples: &GridSample, l_max_used: usize) -> Result<EmpiricalSpectrum> {
    let m = samples.m();
    if l_max_used == 0 || l_max_used > m / 2 {
        return Err(Error::invalid(
            "l_max_used",
            format!("must lie in 1..={} for M = {m}", m / 2),
        ));
    }
    let mut bins: Vec<Complex64> = samples
        .values()
        .iter()
        .map(|&x| Complex64::new(x, 0.0))
        .collect();
    fft::forward(&mut bins);
    let scale = 1.0 / m as f64;
    Ok(EmpiricalSpectrum {
        m,
        w: bins[..=l_max_used].iter().map(|z| z * scale).collect(),
    })
}

/// Needlet coefficients from grid samples: the interpolation sums
/// `(1/M) sum_m X(2 pi m/M) psi(2 pi m/M)`, evaluated through `tilde w`.
pub fn beta_discrete(samples: &GridSample, scale: &NeedletScale) -> Result<WaveletCoefficients> {
    if samples.m() < scale.n() {
        return Err(Error::GridTooCoarse {
            samples: samples.m(),
            coefficients: scale.n(),
        });
    }
    let spectrum = w_discrete(samples, scale.l_max())?;
    transform(&spectrum, scale, CoefficientSource::GridAliased)
}

/// `sigma_N^2 = (2/N) sum_{N/8 <= l <= N/2} C_l a^2(4l/N)`, the variance of each `beta_k`.
pub fn sigma2_n(spectrum: &PowerSpectrum, scale: &NeedletScale) -> Result<f64> {
    Ok(2.0 / scale.n() as f64 * spectral_weights(spectrum, scale)?.iter().sum::<f64>())
}

/// `hat sigma_N^2 = (2/N) sum |w_l|^2 a^2(4l/N)`, unbiased for `sigma_N^2`.
pub fn sigma2_hat_n<F: FourierCoefficients + ?Sized>(field: &F, scale: &NeedletScale) -> Result<f64> {
    Ok(2.0 / scale.n() as f64 * weighted_power(field, scale)?.iter().sum::<f64>())
}

/// `C_l a^2(4l/N)` for `l = 0..=N/2`.
pub fn spectral_weights(spectrum: &PowerSpectrum, scale: &NeedletScale) -> Result<Vec<f64>> {
    let mut out = vec![0.0; scale.l_max() + 1];
    for (l, slot) in out.iter_mut().enumerate().skip(scale.l_min().max(1)) {
        let a = scale.weight(l as i64);
        if a > 0.0 {
            *slot = spectrum.c_l(l as i64)? * a * a;
        }
    }
    Ok(out)
}

/// `Corr(beta_{k+dk}, beta_k)`.
pub fn corr_beta(spectrum: &PowerSpectrum, scale: &NeedletScale, dk: i64) -> Result<f64> {
    let v = spectral_weights(spectrum, scale)?;
    Ok(correlation_from_weights(&v, scale, dk))
}

fn correlation_from_weights(v: &[f64], scale: &NeedletScale, dk: i64) -> f64 {
    let phase = scale.tau() * dk.rem_euclid(scale.n() as i64) as f64;
    let num: f64 = v
        .iter()
        .enumerate()
        .map(|(l, &x)| x * (l as f64 * phase).cos())
        .sum();
    num / v.iter().sum::<f64>()
}

/// Circular lag distance on the `N`-point lattice, in `0..=N/2`.
pub fn circular_distance(dk: i64, n: usize) -> usize {
    let d = dk.rem_euclid(n as i64) as usize;
    d.min(n - d)
}

#[derive(Clone, Debug, Serialize)]
pub struct DecayReport {
    pub exponent: u32,
    /// `max_dk |Corr(dk)| (1 + dist(dk))^exponent`.
    pub constant: f64,
    pub worst_lag: usize,
    pub correlations: Vec<f64>,
}

/// Scans all lags for the polynomial decay of the coefficient correlation.
pub fn correlation_decay(
    spectrum: &PowerSpectrum,
    scale: &NeedletScale,
    exponent: u32,
) -> Result<DecayReport> {
    let v = spectral_weights(spectrum, scale)?;
    let n = scale.n();
    let correlations: Vec<f64> = (0..n as i64)
        .map(|dk| correlation_from_weights(&v, scale, dk))
        .collect();
    let (worst_lag, constant) = correlations
        .iter()
        .enumerate()
        .map(|(dk, c)| {
            let d = circular_distance(dk as i64, n) as f64;
            (dk, c.abs() * (1.0 + d).powi(exponent as i32))
        })
        .fold((0, 0.0), |best, cur| if cur.1 > best.1 { cur } else { best });
    Ok(DecayReport {
        exponent,
        constant,
        worst_lag,
        correlations,
    })
}
