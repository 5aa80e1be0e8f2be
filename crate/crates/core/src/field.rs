//! Spectral synthesis of real stationary Gaussian fields on the circle.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fft;
use crate::spectrum::PowerSpectrum;

/// Where the coefficients of a [`SpectralField`] came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct SeedRecord {
    pub root: u64,
    pub replication: u64,
}

/// The random stream of one replication.
///
/// ChaCha20 keyed by `seed_from_u64(root)`, with the 64-bit stream id set to
/// the replication index, so replications are independent streams of one key
/// and any replication can be regenerated on its own.
pub fn replication_rng(root: u64, replication: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(root);
    rng.set_stream(replication);
    rng
}

/// Fourier coefficients `w_l`, `l = 1..=l_max`, of a real field
/// `X(t) = sum_{0 < |l| <= l_max} w_l e^{ilt}` with `w_{-l} = conj(w_l)`, `w_0 = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField {
    /// `w[l]`; `w[0]` is always zero.
    w: Vec<Complex64>,
    spectrum: Option<PowerSpectrum>,
    seed: Option<SeedRecord>,
}

impl SpectralField {
    /// From `w_1, ..., w_L`.
    pub fn from_coefficients(positive: Vec<Complex64>) -> Result<Self> {
        if positive.is_empty() {
            return Err(Error::EmptyInput("a field needs at least one coefficient"));
        }
        let mut w = Vec::with_capacity(positive.len() + 1);
        w.push(Complex64::new(0.0, 0.0));
        w.extend(positive);
        Ok(Self {
            w,
            spectrum: None,
            seed: None,
        })
    }

    pub fn l_max(&self) -> usize {
        self.w.len() - 1
    }

    /// `w_l` for any integer `l` (zero beyond the bandwidth).
    pub fn coeff(&self, l: i64) -> Complex64 {
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

    /// `w_1..=w_{l_max}`.
    pub fn positive(&self) -> &[Complex64] {
        &self.w[1..]
    }

    pub fn spectrum(&self) -> Option<&PowerSpectrum> {
        self.spectrum.as_ref()
    }

    pub fn seed(&self) -> Option<SeedRecord> {
        self.seed
    }

    /// `X(t)` by direct summation.
    pub fn eval(&self, t: f64) -> f64 {
        self.w
            .iter()
            .enumerate()
            .skip(1)
            .map(|(l, w)| 2.0 * (w * Complex64::from_polar(1.0, l as f64 * t)).re)
            .sum()
    }

    /// Attaches the spectrum the coefficients are assumed to follow.
    pub fn with_spectrum(mut self, spectrum: PowerSpectrum) -> Self {
        self.spectrum = Some(spectrum);
        self
    }

    pub fn with_seed(mut self, seed: SeedRecord) -> Self {
        self.seed = Some(seed);
        self
    }

    /// The field `-X`.
    pub fn negated(&self) -> Self {
        Self {
            w: self.w.iter().map(|z| -z).collect(),
            ..self.clone()
        }
    }
}

/// Draws `Re w_l, Im w_l` independently from `N(0, C_l / 2)` for `l = 1..=l_max`,
/// real part first.
pub fn synthesize<R: Rng + ?Sized>(
    spectrum: &PowerSpectrum,
    l_max: usize,
    rng: &mut R,
) -> Result<SpectralField> {
    if l_max == 0 {
        return Err(Error::invalid("l_max", "bandwidth must be at least 1"));
    }
    let c = spectrum.table(l_max)?;
    let mut w = Vec::with_capacity(l_max + 1);
    w.push(Complex64::new(0.0, 0.0));
    for &c_l in &c[1..] {
        let sd = (c_l / 2.0).sqrt();
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        w.push(Complex64::new(sd * re, sd * im));
    }
    Ok(SpectralField {
        w,
        spectrum: Some(spectrum.clone()),
        seed: None,
    })
}

/// [`synthesize`] on the stream of [`replication_rng`], recording the seed.
pub fn synthesize_replication(
    spectrum: &PowerSpectrum,
    l_max: usize,
    root: u64,
    replication: u64,
) -> Result<SpectralField> {
    let mut rng = replication_rng(root, replication);
    let mut field = synthesize(spectrum, l_max, &mut rng)?;
    field.seed = Some(SeedRecord { root, replication });
    Ok(field)
}

/// Real field values `X(2 pi m / M)`, `m = 0..M`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSample {
    values: Vec<f64>,
}

impl GridSample {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyInput("grid sample has no values"));
        }
        Ok(Self { values })
    }

    pub fn m(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            values: self.values.iter().map(|&x| f(x)).collect(),
        }
    }
}

/// Samples the field on `M` equispaced points by folding `l mod M` and one
/// inverse transform of length `M`. Frequencies above `M/2` alias exactly as
/// they do for the continuous field.
pub fn evaluate_grid(field: &SpectralField, m: usize) -> Result<GridSample> {
    if m == 0 {
        return Err(Error::invalid("M", "grid needs at least one point"));
    }
    let mut bins = vec![Complex64::new(0.0, 0.0); m];
    for (l, w) in field.w.iter().enumerate().skip(1) {
        bins[l % m] += w;
        bins[(m - l % m) % m] += w.conj();
    }
    fft::inverse(&mut bins);
    let scale: f64 = field.w.iter().map(|w| w.norm()).sum::<f64>().max(f64::MIN_POSITIVE);
    let residue = bins.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    if residue > 1e-10 * scale.max(1.0) {
        return Err(Error::Consistency(format!(
            "grid evaluation left an imaginary residue of {residue:e}"
        )));
    }
    GridSample::new(bins.into_iter().map(|z| z.re).collect())
}
