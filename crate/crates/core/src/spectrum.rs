//! Angular power spectra `C_l = g(l) |l|^-alpha`.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};

/// The bounded multiplicative profile `g`.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GProfile {
    /// `g(l) = c`.
    Constant { value: f64 },
    /// `g(l) = b0 + b1 cos(omega l)`; admissible when `b0 > |b1|`.
    Cosine { b0: f64, b1: f64, omega: f64 },
    /// `g(l)` read from a table; `values[i]` is `g(i + 1)`.
    Tabulated { values: Vec<f64> },
}

impl GProfile {
    pub fn eval(&self, l: usize) -> Result<f64> {
        debug_assert!(l >= 1);
        let value = match self {
            GProfile::Constant { value } => *value,
            GProfile::Cosine { b0, b1, omega } => b0 + b1 * (omega * l as f64).cos(),
            GProfile::Tabulated { values } => *values.get(l - 1).ok_or(Error::ProfileOutOfRange {
                index: l,
                len: values.len(),
            })?,
        };
        Ok(value)
    }

    /// Reads a table of `l,value` lines. Blank lines, `#` comments and a
    /// non-numeric header line are skipped; the indices must cover `1..=L`.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut entries: Vec<(usize, f64)> = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parse_err = |message: String| Error::Parse {
                path: path.to_path_buf(),
                line: lineno + 1,
                message,
            };
            let (l, v) = line
                .split_once(',')
                .ok_or_else(|| parse_err(format!("expected `l,value`, got `{line}`")))?;
            let l = match l.trim().parse::<usize>() {
                Ok(l) => l,
                Err(_) if entries.is_empty() && lineno == 0 => continue,
                Err(e) => return Err(parse_err(format!("bad index `{l}`: {e}"))),
            };
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|e| parse_err(format!("bad value `{}`: {e}", v.trim())))?;
            entries.push((l, v));
        }
        entries.sort_by_key(|e| e.0);
        for (i, (l, _)) in entries.iter().enumerate() {
            if *l != i + 1 {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: 0,
                    message: format!("indices must run 1..=L without gaps; missing or repeated l = {}", i + 1),
                });
            }
        }
        if entries.is_empty() {
            return Err(Error::EmptyInput("tabulated profile has no rows"));
        }
        Ok(GProfile::Tabulated {
            values: entries.into_iter().map(|e| e.1).collect(),
        })
    }
}

impl fmt::Display for GProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GProfile::Constant { value } => write!(f, "const:{value}"),
            GProfile::Cosine { b0, b1, omega } => write!(f, "cosine:{b0},{b1},{omega}"),
            GProfile::Tabulated { values } => write!(f, "table[{}]", values.len()),
        }
    }
}

/// Parses `const[:c]` and `cosine[:b0,b1,omega]`. Tables come from
/// [`GProfile::from_file`].
impl FromStr for GProfile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, args) = match s.split_once(':') {
            Some((k, a)) => (k, Some(a)),
            None => (s, None),
        };
        let nums = |a: &str| -> Result<Vec<f64>> {
            a.split(',')
                .map(|x| {
                    x.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::invalid("g", format!("bad number `{x}`: {e}")))
                })
                .collect()
        };
        match kind {
            "const" => {
                let value = match args {
                    None => 1.0,
                    Some(a) => match nums(a)?.as_slice() {
                        [c] => *c,
                        _ => return Err(Error::invalid("g", "const takes one value")),
                    },
                };
                Ok(GProfile::Constant { value })
            }
            "cosine" => {
                let (b0, b1, omega) = match args {
                    None => (2.0, 1.0, 1.0),
                    Some(a) => match nums(a)?.as_slice() {
                        [b0, b1, omega] => (*b0, *b1, *omega),
                        _ => return Err(Error::invalid("g", "cosine takes b0,b1,omega")),
                    },
                };
                Ok(GProfile::Cosine { b0, b1, omega })
            }
            "file" => Err(Error::invalid("g", "tabulated profiles are loaded with GProfile::from_file")),
            other => Err(Error::invalid(
                "g",
                format!("unknown profile `{other}` (expected const, cosine or file:<path>)"),
            )),
        }
    }
}

/// A power spectrum `C_l = g(|l|) |l|^-alpha` with `C_0 = 0`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PowerSpectrum {
    alpha: f64,
    g: GProfile,
}

impl PowerSpectrum {
    pub fn new(alpha: f64, g: GProfile) -> Result<Self> {
        if !(alpha > 1.0) || !alpha.is_finite() {
            return Err(Error::invalid(
                "alpha",
                format!("decay exponent must be finite and > 1 (got {alpha})"),
            ));
        }
        match &g {
            GProfile::Constant { value } if !(*value > 0.0) || !value.is_finite() => {
                return Err(Error::invalid("g", "constant profile must be positive"));
            }
            GProfile::Cosine { b0, b1, omega } if !(*b0 > b1.abs()) || !omega.is_finite() => {
                return Err(Error::invalid("g", "cosine profile needs b0 > |b1|"));
            }
            _ => {}
        }
        Ok(Self { alpha, g })
    }

    /// `g = 1`, `C_l = |l|^-alpha`.
    pub fn power_law(alpha: f64) -> Result<Self> {
        Self::new(alpha, GProfile::Constant { value: 1.0 })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn profile(&self) -> &GProfile {
        &self.g
    }

    pub fn c_l(&self, l: i64) -> Result<f64> {
        if l == 0 {
            return Err(Error::ZeroMultipole(0));
        }
        let m = l.unsigned_abs() as usize;
        let g = self.g.eval(m)?;
        if !(g > 0.0) || !g.is_finite() {
            return Err(Error::NonPositiveProfile { index: m, value: g });
        }
        Ok(g * (m as f64).powf(-self.alpha))
    }

    /// `[C_0 = 0, C_1, ..., C_{l_max}]`.
    pub fn table(&self, l_max: usize) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(l_max + 1);
        out.push(0.0);
        for l in 1..=l_max {
            out.push(self.c_l(l as i64)?);
        }
        Ok(out)
    }

    /// Returns a copy with every `C_l` multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let g = match &self.g {
            GProfile::Constant { value } => GProfile::Constant { value: value * factor },
            GProfile::Cosine { b0, b1, omega } => GProfile::Cosine {
                b0: b0 * factor,
                b1: b1 * factor,
                omega: *omega,
            },
            GProfile::Tabulated { values } => GProfile::Tabulated {
                values: values.iter().map(|v| v * factor).collect(),
            },
        };
        Self::new(self.alpha, g)
    }

    /// Scans `g(1..=l_max)` for the bounds required of an admissible profile.
    pub fn validate_a1(&self, l_max: usize) -> Result<A1Report> {
        if l_max < 8 {
            return Err(Error::invalid("l_max", "scan needs l_max >= 8"));
        }
        let mut values = Vec::with_capacity(l_max);
        for l in 1..=l_max {
            let g = self.g.eval(l)?;
            if !(g > 0.0) || !g.is_finite() {
                return Err(Error::NonPositiveProfile { index: l, value: g });
            }
            values.push(g);
        }
        let c1_hat = values.iter().copied().fold(f64::INFINITY, f64::min);
        let c2_hat = values.iter().copied().fold(0.0, f64::max);
        // Mean over the top octave against the octave two steps below. A bounded
        // profile shows no systematic drift; g ~ l^p drifts with exponent p.
        let octave_mean = |lo: usize, hi: usize| {
            values[lo - 1..hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        };
        let top = octave_mean(l_max / 2 + 1, l_max);
        let low = octave_mean(l_max / 8 + 1, l_max / 4);
        let drift_exponent = (top / low).log2() / 2.0;
        Ok(A1Report {
            c1_hat,
            c2_hat,
            drift_exponent,
            ok: drift_exponent.abs() <= A1_DRIFT_LIMIT,
        })
    }
}

/// Largest tolerated octave drift exponent of `g` in [`PowerSpectrum::validate_a1`].
pub const A1_DRIFT_LIMIT: f64 = 0.25;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct A1Report {
    pub c1_hat: f64,
    pub c2_hat: f64,
    pub drift_exponent: f64,
    pub ok: bool,
}
