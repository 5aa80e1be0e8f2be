//! Monte Carlo experiments: null replications, aliasing rates and a
//! non-Gaussian alternative, with normality diagnostics of the z scores.
//!
//! Replication `r` of an experiment with root seed `s` draws from
//! [`replication_rng`](crate::field::replication_rng)`(s, r)`, so every
//! replication is a pure function of `(config, r)`. Workers only change which
//! thread evaluates it; results are collected in replication order and all
//! summaries are computed sequentially afterwards, which makes the output
//! independent of the worker count.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::coeffs::{beta_discrete, beta_exact, sigma2_n};
use crate::error::{Error, Result};
use crate::field::{evaluate_grid, synthesize_replication, GridSample};
use crate::frame::NeedletScale;
use crate::spectrum::PowerSpectrum;
use crate::stats::{exact_report, studentized_report, theoretical_variances, TestMode, VarianceSet};

pub const DEFAULT_BINS: usize = 30;
/// Histogram range; values outside are counted in the end bins.
pub const HISTOGRAM_RANGE: (f64, f64) = (-4.0, 4.0);
pub const NOMINAL_LEVEL: f64 = 0.05;

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub replications: usize,
    pub j: u32,
    pub spectrum: PowerSpectrum,
    pub mode: TestMode,
    /// Sample the field on `M` points and use the aliased coefficients.
    pub grid: Option<usize>,
    pub seed: u64,
    pub workers: usize,
    /// Synthesis bandwidth; defaults to `N/2`, or `4M` on a grid.
    pub l_max: Option<usize>,
    /// Mixing weight of the chi-squared alternative, see [`chi_squared_alternative`].
    pub nonlinearity: Option<f64>,
    pub bins: usize,
}

impl ExperimentConfig {
    pub fn new(spectrum: PowerSpectrum, j: u32, replications: usize, seed: u64) -> Self {
        Self {
            replications,
            j,
            spectrum,
            mode: TestMode::Exact,
            grid: None,
            seed,
            workers: 1,
            l_max: None,
            nonlinearity: None,
            bins: DEFAULT_BINS,
        }
    }

    /// Grid size actually used: the alternative acts on samples, so it
    /// defaults to `M = 4N`.
    pub fn grid_points(&self, scale: &NeedletScale) -> Option<usize> {
        match (self.grid, self.nonlinearity) {
            (Some(m), _) => Some(m),
            (None, Some(_)) => Some(4 * scale.n()),
            (None, None) => None,
        }
    }

    pub fn bandwidth(&self, scale: &NeedletScale) -> usize {
        self.l_max.unwrap_or(match self.grid_points(scale) {
            Some(m) => 4 * m,
            None => scale.l_max(),
        })
    }

    pub fn validate(&self) -> Result<NeedletScale> {
        let scale = NeedletScale::new(self.j)?;
        if self.replications == 0 {
            return Err(Error::invalid("reps", "need at least one replication"));
        }
        if self.workers == 0 {
            return Err(Error::invalid("workers", "need at least one worker"));
        }
        if self.bins < 2 {
            return Err(Error::invalid("bins", "need at least two bins"));
        }
        if let Some(m) = self.grid_points(&scale) {
            if m < scale.n() {
                return Err(Error::invalid(
                    "grid",
                    format!("M = {m} is below N = {}", scale.n()),
                ));
            }
        }
        if let Some(lambda) = self.nonlinearity {
            if !(0.0..=1.0).contains(&lambda) {
                return Err(Error::invalid("nonlinearity", format!("{lambda} is outside [0, 1]")));
            }
        }
        if self.bandwidth(&scale) < scale.l_max() {
            return Err(Error::invalid(
                "lmax",
                format!("must be at least N/2 = {}", scale.l_max()),
            ));
        }
        Ok(scale)
    }

    /// Every setting that determines the output, as `key = value` pairs.
    pub fn describe(&self) -> Vec<(&'static str, String)> {
        let scale = NeedletScale::new(self.j).ok();
        let mut out = vec![
            ("reps", self.replications.to_string()),
            ("j", self.j.to_string()),
            ("alpha", self.spectrum.alpha().to_string()),
            ("g", self.spectrum.profile().to_string()),
            ("mode", self.mode.to_string()),
            ("seed", self.seed.to_string()),
            ("workers", self.workers.to_string()),
            ("bins", self.bins.to_string()),
        ];
        if let Some(scale) = scale {
            if let Some(m) = self.grid_points(&scale) {
                out.push(("grid", m.to_string()));
            }
            out.push(("lmax", self.bandwidth(&scale).to_string()));
        }
        if let Some(lambda) = self.nonlinearity {
            out.push(("nonlinearity", lambda.to_string()));
        }
        out
    }
}

/// `Y = (1 - lambda) X + lambda s (X^2 - s^2) / (sqrt 2 s^2)` with
/// `s^2 = Var X`: a Gaussian field blended with its standardized square,
/// rescaled to the field's own units. `lambda = 0` returns `X` unchanged.
pub fn chi_squared_alternative(grid: &GridSample, lambda: f64, variance: f64) -> GridSample {
    if lambda == 0.0 {
        return grid.clone();
    }
    let s = variance.sqrt();
    let norm = std::f64::consts::SQRT_2 * variance;
    grid.map(|x| (1.0 - lambda) * x + lambda * s * (x * x - variance) / norm)
}

/// One replication's statistics.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ReplicationRecord {
    pub rep: usize,
    pub m_n: f64,
    pub s_n: f64,
    pub u_n: f64,
    pub z_s: f64,
    pub z_u: f64,
    pub p_s: f64,
    pub p_u: f64,
    pub p_joint: f64,
    pub sigma2_hat: f64,
}

struct Shared {
    scale: NeedletScale,
    bandwidth: usize,
    grid: Option<usize>,
    sigma2: f64,
    theoretical: VarianceSet,
    field_variance: f64,
}

impl Shared {
    fn new(config: &ExperimentConfig, scale: NeedletScale) -> Result<Self> {
        let bandwidth = config.bandwidth(&scale);
        let field_variance = 2.0 * config.spectrum.table(bandwidth)?.iter().sum::<f64>();
        Ok(Self {
            scale,
            bandwidth,
            grid: config.grid_points(&scale),
            sigma2: sigma2_n(&config.spectrum, &scale)?,
            theoretical: theoretical_variances(&config.spectrum, &scale)?,
            field_variance,
        })
    }
}

fn replicate(config: &ExperimentConfig, shared: &Shared, rep: usize) -> Result<ReplicationRecord> {
    let field = synthesize_replication(&config.spectrum, shared.bandwidth, config.seed, rep as u64)?;
    let coeffs = match shared.grid {
        None => beta_exact(&field, &shared.scale)?,
        Some(m) => {
            let mut grid = evaluate_grid(&field, m)?;
            if let Some(lambda) = config.nonlinearity {
                grid = chi_squared_alternative(&grid, lambda, shared.field_variance);
            }
            beta_discrete(&grid, &shared.scale)?
        }
    };
    let report = match config.mode {
        TestMode::Exact => exact_report(&coeffs.beta, shared.sigma2, &shared.theoretical)?,
        TestMode::Studentized => studentized_report(&coeffs)?,
    };
    Ok(ReplicationRecord {
        rep,
        m_n: report.m_n,
        s_n: report.s_n,
        u_n: report.u_n,
        z_s: report.z_s,
        z_u: report.z_u,
        p_s: report.p_s,
        p_u: report.p_u,
        p_joint: report.p_joint,
        sigma2_hat: coeffs.sigma2_hat,
    })
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::invalid("workers", e.to_string()))
}

/// Histogram of a sample over `[left, right)`; outliers land in the end bins.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Histogram {
    pub left: f64,
    pub right: f64,
    pub counts: Vec<usize>,
    pub clipped_low: usize,
    pub clipped_high: usize,
}

impl Histogram {
    pub fn new(values: &[f64], bins: usize, left: f64, right: f64) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyInput("histogram of no values"));
        }
        if bins < 2 {
            return Err(Error::invalid("bins", "need at least two bins"));
        }
        if !(right > left) {
            return Err(Error::invalid("range", format!("[{left}, {right}) is empty")));
        }
        let width = (right - left) / bins as f64;
        let mut h = Self {
            left,
            right,
            counts: vec![0; bins],
            clipped_low: 0,
            clipped_high: 0,
        };
        for &v in values {
            if v.is_nan() {
                return Err(Error::Consistency("histogram input contains NaN".into()));
            }
            let bin = if v < left {
                h.clipped_low += 1;
                0
            } else if v >= right {
                h.clipped_high += 1;
                bins - 1
            } else {
                (((v - left) / width) as usize).min(bins - 1)
            };
            h.counts[bin] += 1;
        }
        Ok(h)
    }

    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn edges(&self, bin: usize) -> (f64, f64) {
        let width = (self.right - self.left) / self.bins() as f64;
        (self.left + bin as f64 * width, self.left + (bin + 1) as f64 * width)
    }

    /// `bin_left,bin_right,count,normal_density` with the standard normal
    /// density at each bin midpoint.
    pub fn to_csv(&self) -> String {
        let normal = Normal::standard();
        let mut out = String::from("bin_left,bin_right,count,normal_density\n");
        for (i, c) in self.counts.iter().enumerate() {
            let (lo, hi) = self.edges(i);
            let _ = writeln!(out, "{lo},{hi},{c},{}", normal.pdf(0.5 * (lo + hi)));
        }
        out
    }
}

/// Writes the default-range histogram of `values` to `path`.
pub fn emit_histogram(values: &[f64], bins: usize, path: &Path) -> Result<Histogram> {
    let h = Histogram::new(values, bins, HISTOGRAM_RANGE.0, HISTOGRAM_RANGE.1)?;
    fs::write(path, h.to_csv()).map_err(|e| Error::io(path, e))?;
    Ok(h)
}

/// `P(sqrt(n) D_n > d)` for the one-sample Kolmogorov–Smirnov statistic,
/// from the limiting distribution with Stephens' finite-`n` correction.
pub fn kolmogorov_p_value(d: f64, n: usize) -> f64 {
    if n == 0 || d.is_nan() {
        return f64::NAN;
    }
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    if lambda <= 0.0 {
        return 1.0;
    }
    let p = if lambda < 1.18 {
        // Jacobi theta form, fast for small lambda.
        let y = -std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda);
        let s: f64 = (0..50)
            .map(|k| ((2 * k + 1) as f64).powi(2) * y)
            .map(f64::exp)
            .sum();
        1.0 - (2.0 * std::f64::consts::PI).sqrt() / lambda * s
    } else {
        let s: f64 = (1..=100)
            .map(|k| {
                let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
                sign * (-2.0 * (k * k) as f64 * lambda * lambda).exp()
            })
            .sum();
        2.0 * s
    };
    p.clamp(0.0, 1.0)
}

/// `sup |F_n - Phi|` of the sample against the standard normal law.
pub fn ks_statistic_normal(values: &[f64]) -> f64 {
    let normal = Normal::standard();
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = normal.cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NormalityDiagnostics {
    pub n: usize,
    pub mean: f64,
    pub variance: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    pub ks_statistic: f64,
    pub ks_p_value: f64,
    pub histogram: Histogram,
}

impl NormalityDiagnostics {
    pub fn from_sample(values: &[f64], bins: usize) -> Result<Self> {
        let histogram = Histogram::new(values, bins, HISTOGRAM_RANGE.0, HISTOGRAM_RANGE.1)?;
        let n = values.len();
        let nf = n as f64;
        let mean = values.iter().sum::<f64>() / nf;
        let central = |p: i32| values.iter().map(|x| (x - mean).powi(p)).sum::<f64>() / nf;
        let (m2, m3, m4) = (central(2), central(3), central(4));
        let ks_statistic = ks_statistic_normal(values);
        Ok(Self {
            n,
            mean,
            variance: if n > 1 { m2 * nf / (nf - 1.0) } else { 0.0 },
            skewness: m3 / m2.powf(1.5),
            excess_kurtosis: m4 / (m2 * m2) - 3.0,
            ks_statistic,
            ks_p_value: kolmogorov_p_value(ks_statistic, n),
            histogram,
        })
    }
}

/// Pearson correlation; zero when either sample is constant.
pub fn correlation(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len().min(y.len()) as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    sxy / (sxx * syy).sqrt()
}

/// Fraction of replications rejected at the nominal level.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RejectionRates {
    pub level: f64,
    pub skewness: f64,
    pub kurtosis: f64,
    pub joint: f64,
}

impl RejectionRates {
    pub fn from_records(records: &[ReplicationRecord], level: f64) -> Self {
        let n = records.len() as f64;
        let rate = |f: fn(&ReplicationRecord) -> f64| {
            records.iter().filter(|r| f(r) < level).count() as f64 / n
        };
        Self {
            level,
            skewness: rate(|r| r.p_s),
            kurtosis: rate(|r| r.p_u),
            joint: rate(|r| r.p_joint),
        }
    }
}

#[derive(Clone, Debug)]
pub struct McOutput {
    pub config: ExperimentConfig,
    pub records: Vec<ReplicationRecord>,
    pub z_s: NormalityDiagnostics,
    pub z_u: NormalityDiagnostics,
    pub correlation: f64,
    pub rejection: RejectionRates,
}

#[derive(Serialize)]
struct DiagnosticsDocument<'a> {
    config: BTreeMap<&'static str, String>,
    #[serde(rename = "z_S")]
    z_s: &'a NormalityDiagnostics,
    #[serde(rename = "z_U")]
    z_u: &'a NormalityDiagnostics,
    corr_z_s_z_u: f64,
    rejection: RejectionRates,
}

impl McOutput {
    pub fn z_scores(&self) -> (Vec<f64>, Vec<f64>) {
        self.records.iter().map(|r| (r.z_s, r.z_u)).unzip()
    }

    pub fn zscores_csv(&self) -> String {
        let mut out = String::from("rep,M_N,S_N,U_N,z_S,z_U,p_S,p_U\n");
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.rep, r.m_n, r.s_n, r.u_n, r.z_s, r.z_u, r.p_s, r.p_u
            );
        }
        out
    }

    pub fn diagnostics_json(&self) -> Result<String> {
        let doc = DiagnosticsDocument {
            config: self.config.describe().into_iter().collect(),
            z_s: &self.z_s,
            z_u: &self.z_u,
            corr_z_s_z_u: self.correlation,
            rejection: self.rejection,
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    /// Writes `zscores.csv`, `hist_s.csv`, `hist_u.csv` and `diagnostics.json`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let put = |name: &str, contents: String| {
            let path = dir.join(name);
            fs::write(&path, contents).map_err(|e| Error::io(path, e))
        };
        put("zscores.csv", self.zscores_csv())?;
        put("hist_s.csv", self.z_s.histogram.to_csv())?;
        put("hist_u.csv", self.z_u.histogram.to_csv())?;
        put("diagnostics.json", self.diagnostics_json()?)
    }
}

/// Runs `R` replications of synthesize, transform, normalize and studentize.
pub fn run_mc(config: &ExperimentConfig) -> Result<McOutput> {
    let scale = config.validate()?;
    let shared = Shared::new(config, scale)?;
    let records = pool(config.workers)?.install(|| {
        (0..config.replications)
            .into_par_iter()
            .map(|rep| replicate(config, &shared, rep))
            .collect::<Result<Vec<_>>>()
    })?;
    let (z_s, z_u): (Vec<f64>, Vec<f64>) = records.iter().map(|r| (r.z_s, r.z_u)).unzip();
    if z_s.iter().chain(&z_u).any(|z| !z.is_finite()) {
        return Err(Error::Consistency("non-finite z score".into()));
    }
    Ok(McOutput {
        z_s: NormalityDiagnostics::from_sample(&z_s, config.bins)?,
        z_u: NormalityDiagnostics::from_sample(&z_u, config.bins)?,
        correlation: correlation(&z_s, &z_u),
        rejection: RejectionRates::from_records(&records, NOMINAL_LEVEL),
        records,
        config: config.clone(),
    })
}

/// [`run_mc`] on the chi-squared alternative with mixing weight `lambda`.
pub fn run_alternative(config: &ExperimentConfig, lambda: f64) -> Result<McOutput> {
    let config = ExperimentConfig {
        nonlinearity: Some(lambda),
        ..config.clone()
    };
    run_mc(&config)
}

#[derive(Clone, Debug)]
pub struct AliasConfig {
    pub j: u32,
    pub spectrum: PowerSpectrum,
    pub grids: Vec<usize>,
    pub replications: usize,
    pub seed: u64,
    pub workers: usize,
    /// Synthesis bandwidth; defaults to `4 max(M)`.
    pub l_max: Option<usize>,
}

impl AliasConfig {
    pub fn describe(&self) -> Vec<(&'static str, String)> {
        let grids: Vec<String> = self.grids.iter().map(|m| m.to_string()).collect();
        let mut out = vec![
            ("j", self.j.to_string()),
            ("alpha", self.spectrum.alpha().to_string()),
            ("g", self.spectrum.profile().to_string()),
            ("grids", grids.join(",")),
            ("reps", self.replications.to_string()),
            ("seed", self.seed.to_string()),
            ("workers", self.workers.to_string()),
        ];
        if let Some(l) = self.bandwidth() {
            out.push(("lmax", l.to_string()));
        }
        out
    }

    pub fn bandwidth(&self) -> Option<usize> {
        self.l_max.or_else(|| self.grids.iter().max().map(|m| 4 * m))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AliasRow {
    #[serde(rename = "M")]
    pub m: usize,
    pub m_over_n: f64,
    /// `sum |beta - tilde beta|^2 / sum |beta|^2`, pooled over replications.
    pub rel_error: f64,
    /// Mean over replications of the per-replication ratio.
    pub mean_rel_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AliasingReport {
    #[serde(rename = "N")]
    pub n: usize,
    pub l_max: usize,
    pub rows: Vec<AliasRow>,
    /// Least-squares slope of `log rel_error` against `log(M/N)`.
    pub exponent: Option<f64>,
}

impl AliasingReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("M,M_over_N,rel_error,mean_rel_error\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{},{}", r.m, r.m_over_n, r.rel_error, r.mean_rel_error);
        }
        out
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let csv = dir.join("alias.csv");
        fs::write(&csv, self.to_csv()).map_err(|e| Error::io(csv, e))?;
        let json = dir.join("alias.json");
        fs::write(&json, serde_json::to_string_pretty(self)?).map_err(|e| Error::io(json, e))
    }
}

/// Slope of the least-squares line through `(x, y)`.
pub fn fit_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Relative error of grid-based coefficients against the exact ones, per `M`.
pub fn run_aliasing(config: &AliasConfig) -> Result<AliasingReport> {
    let scale = NeedletScale::new(config.j)?;
    if config.grids.is_empty() {
        return Err(Error::invalid("grids", "need at least one grid size"));
    }
    if config.replications == 0 {
        return Err(Error::invalid("reps", "need at least one replication"));
    }
    if let Some(&m) = config.grids.iter().find(|&&m| m < scale.n()) {
        return Err(Error::invalid("grids", format!("M = {m} is below N = {}", scale.n())));
    }
    let l_max = config.bandwidth().unwrap_or(scale.l_max()).max(scale.l_max());
    // Per replication: (error energy, coefficient energy) per grid.
    let per_rep: Vec<Vec<(f64, f64)>> = pool(config.workers.max(1))?.install(|| {
        (0..config.replications)
            .into_par_iter()
            .map(|rep| {
                let field = synthesize_replication(&config.spectrum, l_max, config.seed, rep as u64)?;
                let exact = beta_exact(&field, &scale)?;
                let energy: f64 = exact.beta.iter().map(|b| b * b).sum();
                config
                    .grids
                    .iter()
                    .map(|&m| {
                        let approx = beta_discrete(&evaluate_grid(&field, m)?, &scale)?;
                        let err: f64 = exact
                            .beta
                            .iter()
                            .zip(&approx.beta)
                            .map(|(a, b)| (a - b) * (a - b))
                            .sum();
                        Ok((err, energy))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let reps = config.replications as f64;
    let rows: Vec<AliasRow> = config
        .grids
        .iter()
        .enumerate()
        .map(|(i, &m)| {
            let (err, energy) = per_rep
                .iter()
                .fold((0.0, 0.0), |(e, s), r| (e + r[i].0, s + r[i].1));
            AliasRow {
                m,
                m_over_n: m as f64 / scale.n() as f64,
                rel_error: err / energy,
                mean_rel_error: per_rep.iter().map(|r| r[i].0 / r[i].1).sum::<f64>() / reps,
            }
        })
        .collect();
    let points: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.rel_error > 0.0)
        .map(|r| (r.m_over_n.ln(), r.rel_error.ln()))
        .collect();
    Ok(AliasingReport {
        n: scale.n(),
        l_max,
        exponent: fit_slope(&points),
        rows,
    })
}
