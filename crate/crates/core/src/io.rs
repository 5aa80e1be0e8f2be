//! Plain-text field, sample and coefficient files.
//!
//! A field file starts with `# key=value` metadata lines, followed by a header
//! row and comma-separated data rows. The header selects the content:
//!
//! * `l,re,im`: Fourier coefficients `w_l`, `l = 1..=L`;
//! * `m,value`: samples `X(2 pi m / M)`, `m = 0..M`;
//! * `k,beta`: needlet coefficients, `k = 0..N`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rustfft::num_complex::Complex64;

use crate::coeffs::WaveletCoefficients;
use crate::error::{Error, Result};
use crate::field::{GridSample, SpectralField};

/// `# key=value` header lines, kept in key order.
pub type Metadata = BTreeMap<String, String>;

#[derive(Clone, Debug)]
pub enum FieldFile {
    Coefficients { field: SpectralField, meta: Metadata },
    Samples { grid: GridSample, meta: Metadata },
    Beta { beta: Vec<f64>, meta: Metadata },
}

impl FieldFile {
    pub fn meta(&self) -> &Metadata {
        match self {
            FieldFile::Coefficients { meta, .. }
            | FieldFile::Samples { meta, .. }
            | FieldFile::Beta { meta, .. } => meta,
        }
    }
}

fn render(meta: &Metadata, header: &str, rows: impl Iterator<Item = String>) -> String {
    let mut out = String::new();
    for (k, v) in meta {
        let _ = writeln!(out, "# {k}={v}");
    }
    out.push_str(header);
    out.push('\n');
    for row in rows {
        out.push_str(&row);
        out.push('\n');
    }
    out
}

fn write(path: &Path, contents: String) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

pub fn write_coefficients(path: &Path, field: &SpectralField, meta: &Metadata) -> Result<()> {
    let rows = field
        .positive()
        .iter()
        .enumerate()
        .map(|(i, w)| format!("{},{},{}", i + 1, w.re, w.im));
    write(path, render(meta, "l,re,im", rows))
}

pub fn write_samples(path: &Path, grid: &GridSample, meta: &Metadata) -> Result<()> {
    let rows = grid.values().iter().enumerate().map(|(m, x)| format!("{m},{x}"));
    write(path, render(meta, "m,value", rows))
}

pub fn write_beta(path: &Path, coeffs: &WaveletCoefficients, meta: &Metadata) -> Result<()> {
    let rows = coeffs.beta.iter().enumerate().map(|(k, b)| format!("{k},{b}"));
    write(path, render(meta, "k,beta", rows))
}

struct Parser {
    path: PathBuf,
}

impl Parser {
    fn err(&self, line: usize, message: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.clone(),
            line,
            message: message.into(),
        }
    }

    fn number<T: std::str::FromStr>(&self, line: usize, field: &str) -> Result<T> {
        field
            .trim()
            .parse()
            .map_err(|_| self.err(line, format!("cannot parse `{}` as a number", field.trim())))
    }

    /// Data rows with their 1-based line numbers; checks the column count and
    /// that the first column enumerates `start, start + 1, ...`.
    fn rows<'a>(
        &self,
        lines: impl Iterator<Item = (usize, &'a str)>,
        columns: usize,
        start: usize,
    ) -> Result<Vec<(usize, Vec<&'a str>)>> {
        let mut out = Vec::new();
        for (no, line) in lines {
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != columns {
                return Err(self.err(no, format!("expected {columns} columns, found {}", fields.len())));
            }
            let index: usize = self.number(no, fields[0])?;
            let expected = start + out.len();
            if index != expected {
                return Err(self.err(no, format!("expected index {expected}, found {index}")));
            }
            out.push((no, fields));
        }
        Ok(out)
    }
}

/// Reads any of the three layouts.
pub fn read_field_file(path: &Path) -> Result<FieldFile> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let parser = Parser { path: path.to_path_buf() };
    let mut meta = Metadata::new();
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (header_line, header) = loop {
        let Some((no, line)) = lines.next() else {
            return Err(parser.err(0, "no header row"));
        };
        let trimmed = line.trim();
        if let Some(comment) = trimmed.strip_prefix('#') {
            if let Some((k, v)) = comment.trim().split_once('=') {
                meta.insert(k.trim().to_string(), v.trim().to_string());
            }
            continue;
        }
        if !trimmed.is_empty() {
            break (no, trimmed.replace(' ', ""));
        }
    };
    match header.as_str() {
        "l,re,im" => {
            let rows = parser.rows(lines, 3, 1)?;
            let w = rows
                .iter()
                .map(|(no, f)| Ok(Complex64::new(parser.number(*no, f[1])?, parser.number(*no, f[2])?)))
                .collect::<Result<Vec<_>>>()?;
            let field = SpectralField::from_coefficients(w)
                .map_err(|_| parser.err(header_line, "no coefficient rows"))?;
            Ok(FieldFile::Coefficients { field, meta })
        }
        "m,value" => {
            let values = read_values(&parser, lines)?;
            let grid = GridSample::new(values).map_err(|_| parser.err(header_line, "no sample rows"))?;
            Ok(FieldFile::Samples { grid, meta })
        }
        "k,beta" => {
            let rows = parser.rows(lines, 2, 0)?;
            let beta = rows
                .iter()
                .map(|(no, f)| parser.number(*no, f[1]))
                .collect::<Result<Vec<f64>>>()?;
            if beta.is_empty() {
                return Err(parser.err(header_line, "no coefficient rows"));
            }
            Ok(FieldFile::Beta { beta, meta })
        }
        other => Err(parser.err(
            header_line,
            format!("unknown header `{other}` (expected l,re,im or m,value or k,beta)"),
        )),
    }
}

fn read_values<'a>(parser: &Parser, lines: impl Iterator<Item = (usize, &'a str)>) -> Result<Vec<f64>> {
    parser
        .rows(lines, 2, 0)?
        .iter()
        .map(|(no, f)| parser.number(*no, f[1]))
        .collect()
}

/// Reads a `m,value` sample table; the header row is optional.
pub fn read_samples(path: &Path) -> Result<GridSample> {
    match read_field_file(path) {
        Ok(FieldFile::Samples { grid, .. }) => Ok(grid),
        Ok(_) => Err(Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            message: "expected `m,value` rows".into(),
        }),
        Err(Error::Parse { line, .. }) if line > 0 => {
            // Headerless table: every line is data.
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let parser = Parser { path: path.to_path_buf() };
            let values = read_values(&parser, text.lines().enumerate().map(|(i, l)| (i + 1, l)))?;
            GridSample::new(values).map_err(|_| parser.err(0, "no sample rows"))
        }
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{evaluate_grid, replication_rng, synthesize};
    use crate::spectrum::PowerSpectrum;

    #[test]
    fn coefficient_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("field.csv");
        let spec = PowerSpectrum::power_law(3.0).unwrap();
        let field = synthesize(&spec, 20, &mut replication_rng(1, 2)).unwrap();
        let mut meta = Metadata::new();
        meta.insert("alpha".into(), "3".into());
        write_coefficients(&path, &field, &meta).unwrap();
        match read_field_file(&path).unwrap() {
            FieldFile::Coefficients { field: back, meta: m } => {
                assert_eq!(back.positive(), field.positive());
                assert_eq!(m["alpha"], "3");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn sample_round_trip_and_headerless() {
        let dir = tempfile::tempdir().unwrap();
        let spec = PowerSpectrum::power_law(3.0).unwrap();
        let field = synthesize(&spec, 20, &mut replication_rng(1, 3)).unwrap();
        let grid = evaluate_grid(&field, 64).unwrap();
        let path = dir.path().join("samples.csv");
        write_samples(&path, &grid, &Metadata::new()).unwrap();
        assert_eq!(read_samples(&path).unwrap(), grid);
        let bare = dir.path().join("bare.csv");
        fs::write(&bare, "0,1.5\n1,-2\n2,0.25\n").unwrap();
        assert_eq!(read_samples(&bare).unwrap().values(), &[1.5, -2.0, 0.25]);
    }

    #[test]
    fn malformed_rows_name_the_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        fs::write(&path, "# x=1\nm,value\n0,1.0\n2,3.0\n").unwrap();
        match read_field_file(&path) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
        fs::write(&path, "m,value\n0,abc\n").unwrap();
        assert!(matches!(read_field_file(&path), Err(Error::Parse { line: 2, .. })));
        let missing = dir.path().join("missing.csv");
        let err = read_samples(&missing).unwrap_err();
        assert!(err.to_string().contains("missing.csv"));
    }
}
