//! `needlet`: needlet Gaussianity tests for stationary fields on the circle.
//!
//! Exit codes: 0 on success, 1 on bad input, 2 when an internal numerical
//! identity fails.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use needlet_core::coeffs::correlation_decay;
use needlet_core::frame::{localization_profile, tight_frame_check, TrigPolynomial};
use needlet_core::harness::{run_aliasing, run_mc, AliasConfig, ExperimentConfig};
use needlet_core::io::{self, FieldFile, Metadata};
use needlet_core::stats::{exact_report, studentized_report, theoretical_variances, TestMode};
use needlet_core::{
    beta_discrete, beta_exact, evaluate_grid, sigma2_n, window_a, Complex64, GProfile,
    NeedletScale, PowerSpectrum, WaveletCoefficients,
};

/// Relative tolerance of the tight-frame self-check.
const FRAME_TOLERANCE: f64 = 1e-10;

#[derive(Parser, Debug)]
#[command(name = "needlet", version, about = "Needlet skewness and kurtosis tests for random fields on the circle")]
struct Cli {
    /// File of `key = value` lines supplying flags; explicit flags win.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check the tight-frame identity and report the localization profile at level j.
    FrameCheck(FrameCheckArgs),
    /// Synthesize a Gaussian field and write its coefficients or grid samples.
    Simulate(SimulateArgs),
    /// Compute needlet coefficients from a field file.
    Coeffs(CoeffsArgs),
    /// Run the skewness and kurtosis tests on one field.
    Test(TestArgs),
    /// Monte Carlo calibration of the tests.
    Mc(McArgs),
    /// Aliasing error of grid-sampled coefficients against grid size.
    Alias(AliasArgs),
}

#[derive(Args, Debug, Clone)]
struct SpectrumArgs {
    /// Decay exponent of C_l = g(l) l^-alpha.
    #[arg(long)]
    alpha: Option<f64>,
    /// Profile g: const[:c], cosine[:b0,b1,omega] or file:<path>.
    #[arg(long, default_value = "const")]
    g: String,
}

impl SpectrumArgs {
    fn build(&self) -> Result<PowerSpectrum> {
        let Some(alpha) = self.alpha else {
            bail!("--alpha is required");
        };
        spectrum(alpha, &self.g)
    }
}

fn spectrum(alpha: f64, g: &str) -> Result<PowerSpectrum> {
    let profile = match g.strip_prefix("file:") {
        Some(path) => GProfile::from_file(Path::new(path)).with_context(|| format!("--g {g}"))?,
        None => g.parse().with_context(|| format!("--g {g}"))?,
    };
    PowerSpectrum::new(alpha, profile).context("--alpha/--g")
}

#[derive(Args, Debug)]
struct FrameCheckArgs {
    #[arg(long)]
    j: u32,
    /// Decay order k of the localization envelope.
    #[arg(long, default_value_t = 3)]
    k_decay: u32,
    /// CSV of the localization profile (`x,abs_psi,bound`).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Emit {
    Coeffs,
    Samples,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    spectrum: SpectrumArgs,
    /// Synthesis bandwidth L.
    #[arg(long)]
    lmax: usize,
    #[arg(long)]
    seed: u64,
    /// Replication index within the seed's stream family.
    #[arg(long, default_value_t = 0)]
    rep: u64,
    /// Number of grid samples M, required with `--emit samples`.
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long, value_enum, default_value_t = Emit::Coeffs)]
    emit: Emit,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum CoeffMode {
    /// From Fourier coefficients.
    Exact,
    /// From grid samples, with aliasing.
    Grid,
}

#[derive(Args, Debug)]
struct CoeffsArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    j: u32,
    #[arg(long, value_enum, default_value_t = CoeffMode::Exact)]
    mode: CoeffMode,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct TestArgs {
    /// Field, sample or coefficient file.
    #[arg(long = "in", conflicts_with = "samples", required_unless_present = "samples")]
    input: Option<PathBuf>,
    /// Table of `m,value` grid samples.
    #[arg(long)]
    samples: Option<PathBuf>,
    #[arg(long)]
    j: u32,
    #[arg(long, default_value_t = TestMode::Studentized)]
    mode: TestMode,
    /// Spectrum for exact mode; read from the file header when omitted.
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    g: Option<String>,
    /// JSON report path; printed to stdout when omitted.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct McArgs {
    #[command(flatten)]
    spectrum: SpectrumArgs,
    #[arg(long)]
    j: u32,
    #[arg(long)]
    reps: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = TestMode::Exact)]
    mode: TestMode,
    /// Sample on M grid points and use the aliased coefficients.
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Synthesis bandwidth; N/2 by default, 4M on a grid.
    #[arg(long)]
    lmax: Option<usize>,
    /// Blend weight in [0, 1] of the chi-squared alternative.
    #[arg(long)]
    nonlinearity: Option<f64>,
    #[arg(long, default_value_t = needlet_core::harness::DEFAULT_BINS)]
    bins: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct AliasArgs {
    #[command(flatten)]
    spectrum: SpectrumArgs,
    #[arg(long)]
    j: u32,
    /// Grid sizes, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    grids: Vec<usize>,
    #[arg(long)]
    reps: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Synthesis bandwidth; 4 max(M) by default.
    #[arg(long)]
    lmax: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

/// Appends `--key value` for each config-file entry not given on the command line.
fn merge_config(mut argv: Vec<OsString>) -> Result<Vec<OsString>> {
    let strings: Vec<String> = argv.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let path = strings.iter().enumerate().find_map(|(i, a)| {
        if a == "--config" {
            strings.get(i + 1).cloned()
        } else {
            a.strip_prefix("--config=").map(str::to_string)
        }
    });
    let Some(path) = path else {
        return Ok(argv);
    };
    let text = fs::read_to_string(&path).with_context(|| format!("--config: cannot read {path}"))?;
    let given = |key: &str| {
        let flag = format!("--{key}");
        strings.iter().any(|a| *a == flag || a.starts_with(&format!("{flag}=")))
    };
    for (no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("--config: {path}:{}: expected `key = value`", no + 1);
        };
        let key = key.trim().replace('_', "-");
        if key == "config" {
            bail!("--config: {path}:{}: config files cannot nest", no + 1);
        }
        if !given(&key) {
            argv.push(format!("--{key}").into());
            argv.push(value.trim().into());
        }
    }
    Ok(argv)
}

/// Writes the resolved settings as `key = value` lines, readable by `--config`.
fn echo_config(path: &Path, command: &str, pairs: &[(&str, String)]) -> Result<()> {
    let mut text = format!("# needlet {command}\n");
    for (k, v) in pairs {
        let _ = writeln!(text, "{k} = {v}");
    }
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

/// Sibling `<file>.config.txt` for commands whose output is a single file.
fn config_beside(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".config.txt");
    out.with_file_name(name)
}

fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => {
            fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))
        }
        _ => Ok(()),
    }
}

fn with_g(mut pairs: Vec<(&'static str, String)>, g: &str) -> Vec<(&'static str, String)> {
    for (k, v) in &mut pairs {
        if *k == "g" {
            *v = g.to_string();
        }
    }
    pairs
}

/// Deterministic test polynomial of degree `d` with slowly decaying coefficients.
fn probe_polynomial(d: usize) -> Result<TrigPolynomial> {
    let coeffs = (-(d as i64)..=d as i64)
        .map(|k| Complex64::from_polar(1.0 / (1.0 + k.abs() as f64).sqrt(), 0.7 * k as f64 + 0.3))
        .collect();
    Ok(TrigPolynomial::new(coeffs)?)
}

fn frame_check(args: &FrameCheckArgs) -> Result<()> {
    let scale = NeedletScale::new(args.j).context("--j")?;
    let profile = localization_profile(&scale, args.k_decay).context("--k-decay")?;
    let mut worst: f64 = 0.0;
    for d in [1usize, (1 << args.j) / 2, 1 << args.j] {
        let check = tight_frame_check(&probe_polynomial(d.max(1))?, args.j)?;
        worst = worst.max(check.relative());
    }
    let unity = (0..=400)
        .map(|i| {
            let xi = 10f64.powf(i as f64 / 100.0);
            let sum: f64 = (0..64).map(|j| window_a(xi / 2f64.powi(j)).powi(2)).sum();
            (sum - 1.0).abs()
        })
        .fold(0.0, f64::max);
    let decay = correlation_decay(&PowerSpectrum::power_law(4.0)?, &scale, args.k_decay)?;
    println!("level j = {}, N = {}", args.j, scale.n());
    println!("tight frame: max relative discrepancy {worst:.3e} (tolerance {FRAME_TOLERANCE:.0e})");
    println!("partition of unity: max |sum a^2 - 1| = {unity:.3e}");
    println!(
        "localization: |psi_N(x)| <= {:.4} 2^j / (sqrt(N) (1 + 2^j |x|)^{})",
        profile.constant, args.k_decay
    );
    println!(
        "correlation decay (alpha = 4): constant {:.4} at lag {}",
        decay.constant, decay.worst_lag
    );
    if let Some(out) = &args.out {
        ensure_parent(out)?;
        let mut csv = String::from("x,abs_psi,bound\n");
        for ((x, p), b) in profile.x.iter().zip(&profile.abs_psi).zip(&profile.bound) {
            let _ = writeln!(csv, "{x},{p},{b}");
        }
        fs::write(out, csv).with_context(|| format!("cannot write {}", out.display()))?;
        echo_config(
            &config_beside(out),
            "frame-check",
            &[("j", args.j.to_string()), ("k-decay", args.k_decay.to_string())],
        )?;
    }
    if worst > FRAME_TOLERANCE || unity > FRAME_TOLERANCE {
        return Err(needlet_core::Error::Consistency(format!(
            "tight frame discrepancy {worst:.3e}, partition of unity error {unity:.3e}"
        ))
        .into());
    }
    Ok(())
}

fn simulate(args: &SimulateArgs) -> Result<()> {
    let spec = args.spectrum.build()?;
    if args.lmax == 0 {
        bail!("--lmax must be positive");
    }
    let field = needlet_core::field::synthesize_replication(&spec, args.lmax, args.seed, args.rep)?;
    let mut meta = Metadata::new();
    meta.insert("alpha".into(), spec.alpha().to_string());
    meta.insert("g".into(), args.spectrum.g.clone());
    meta.insert("lmax".into(), args.lmax.to_string());
    meta.insert("seed".into(), args.seed.to_string());
    meta.insert("rep".into(), args.rep.to_string());
    ensure_parent(&args.out)?;
    match args.emit {
        Emit::Coeffs => io::write_coefficients(&args.out, &field, &meta)?,
        Emit::Samples => {
            let Some(m) = args.grid else {
                bail!("--grid is required with --emit samples");
            };
            meta.insert("grid".into(), m.to_string());
            let grid = evaluate_grid(&field, m).context("--grid")?;
            io::write_samples(&args.out, &grid, &meta)?;
        }
    }
    let mut pairs: Vec<(&str, String)> = meta.iter().map(|(k, v)| (k.as_str(), v.clone())).collect();
    pairs.push((
        "emit",
        match args.emit {
            Emit::Coeffs => "coeffs",
            Emit::Samples => "samples",
        }
        .into(),
    ));
    echo_config(&config_beside(&args.out), "simulate", &pairs)?;
    info!("wrote {}", args.out.display());
    Ok(())
}

fn coefficients(file: &FieldFile, scale: &NeedletScale, path: &Path) -> Result<WaveletCoefficients> {
    Ok(match file {
        FieldFile::Coefficients { field, .. } => beta_exact(field, scale)?,
        FieldFile::Samples { grid, .. } => beta_discrete(grid, scale)?,
        FieldFile::Beta { beta, .. } => {
            if beta.len() != scale.n() {
                bail!(
                    "{}: holds {} coefficients but --j {} needs N = {}",
                    path.display(),
                    beta.len(),
                    scale.j(),
                    scale.n()
                );
            }
            WaveletCoefficients::from_beta(beta.clone())?
        }
    })
}

fn coeffs(args: &CoeffsArgs) -> Result<()> {
    let scale = NeedletScale::new(args.j).context("--j")?;
    let file = io::read_field_file(&args.input)?;
    let c = match (&file, args.mode) {
        (FieldFile::Coefficients { .. }, CoeffMode::Exact) | (FieldFile::Samples { .. }, CoeffMode::Grid) => {
            coefficients(&file, &scale, &args.input)?
        }
        (_, CoeffMode::Exact) => bail!("--mode exact needs an `l,re,im` file, {} is not one", args.input.display()),
        (_, CoeffMode::Grid) => bail!("--mode grid needs an `m,value` file, {} is not one", args.input.display()),
    };
    let mut meta = file.meta().clone();
    meta.insert("j".into(), args.j.to_string());
    ensure_parent(&args.out)?;
    io::write_beta(&args.out, &c, &meta)?;
    let mode = match args.mode {
        CoeffMode::Exact => "exact",
        CoeffMode::Grid => "grid",
    };
    echo_config(
        &config_beside(&args.out),
        "coeffs",
        &[
            ("in", args.input.display().to_string()),
            ("j", args.j.to_string()),
            ("mode", mode.into()),
        ],
    )?;
    info!("wrote {} coefficients to {}", c.n(), args.out.display());
    Ok(())
}

fn test(args: &TestArgs) -> Result<()> {
    let scale = NeedletScale::new(args.j).context("--j")?;
    let (path, file) = match (&args.input, &args.samples) {
        (Some(p), _) => (p, io::read_field_file(p)?),
        (None, Some(p)) => (
            p,
            FieldFile::Samples {
                grid: io::read_samples(p)?,
                meta: Metadata::new(),
            },
        ),
        (None, None) => bail!("one of --in or --samples is required"),
    };
    let c = coefficients(&file, &scale, path)?;
    let meta = file.meta();
    let mut report = match args.mode {
        TestMode::Studentized => studentized_report(&c)?,
        TestMode::Exact => {
            let alpha = match (args.alpha, meta.get("alpha")) {
                (Some(a), _) => a,
                (None, Some(a)) => a
                    .parse()
                    .with_context(|| format!("{}: bad alpha `{a}` in header", path.display()))?,
                (None, None) => bail!("--mode exact needs --alpha (no alpha in {})", path.display()),
            };
            let g = args.g.as_deref().or(meta.get("g").map(String::as_str)).unwrap_or("const");
            let spec = spectrum(alpha, g)?;
            let variances = theoretical_variances(&spec, &scale)?;
            exact_report(&c.beta, sigma2_n(&spec, &scale)?, &variances)?
        }
    };
    report.seed = meta.get("seed").and_then(|s| s.parse().ok());
    let json = serde_json::to_string_pretty(&report)?;
    match &args.report {
        Some(out) => {
            ensure_parent(out)?;
            fs::write(out, &json).with_context(|| format!("cannot write {}", out.display()))?;
            let mut pairs = vec![
                ("j", args.j.to_string()),
                ("mode", args.mode.to_string()),
            ];
            match (&args.input, &args.samples) {
                (Some(p), _) => pairs.push(("in", p.display().to_string())),
                (_, Some(p)) => pairs.push(("samples", p.display().to_string())),
                _ => {}
            }
            if let Some(a) = args.alpha {
                pairs.push(("alpha", a.to_string()));
            }
            if let Some(g) = &args.g {
                pairs.push(("g", g.clone()));
            }
            echo_config(&config_beside(out), "test", &pairs)?;
            println!(
                "z_S = {:.4} (p = {:.4}), z_U = {:.4} (p = {:.4}), joint p = {:.4}",
                report.z_s, report.p_s, report.z_u, report.p_u, report.p_joint
            );
        }
        None => println!("{json}"),
    }
    Ok(())
}

fn mc(args: &McArgs) -> Result<()> {
    let mut cfg = ExperimentConfig::new(args.spectrum.build()?, args.j, args.reps, args.seed);
    cfg.mode = args.mode;
    cfg.grid = args.grid;
    cfg.workers = args.workers;
    cfg.l_max = args.lmax;
    cfg.nonlinearity = args.nonlinearity;
    cfg.bins = args.bins;
    cfg.validate()?;
    info!("running {} replications on {} workers", args.reps, args.workers);
    let start = Instant::now();
    let out = run_mc(&cfg)?;
    out.write(&args.out)?;
    echo_config(
        &args.out.join("config.txt"),
        "mc",
        &with_g(cfg.describe(), &args.spectrum.g),
    )?;
    info!("finished in {:.1?}", start.elapsed());
    for (name, d) in [("z_S", &out.z_s), ("z_U", &out.z_u)] {
        println!(
            "{name}: mean {:.4}, variance {:.4}, KS p {:.4}",
            d.mean, d.variance, d.ks_p_value
        );
    }
    println!(
        "rejection at {}: S {:.4}, U {:.4}, joint {:.4}; corr(z_S, z_U) = {:.4}",
        out.rejection.level, out.rejection.skewness, out.rejection.kurtosis, out.rejection.joint, out.correlation
    );
    Ok(())
}

fn alias(args: &AliasArgs) -> Result<()> {
    let cfg = AliasConfig {
        j: args.j,
        spectrum: args.spectrum.build()?,
        grids: args.grids.clone(),
        replications: args.reps,
        seed: args.seed,
        workers: args.workers,
        l_max: args.lmax,
    };
    let report = run_aliasing(&cfg)?;
    report.write(&args.out)?;
    echo_config(
        &args.out.join("config.txt"),
        "alias",
        &with_g(cfg.describe(), &args.spectrum.g),
    )?;
    for row in &report.rows {
        println!("M = {:>7}: relative error {:.3e}", row.m, row.rel_error);
    }
    match report.exponent {
        Some(e) => println!("fitted exponent {e:.3}"),
        None => println!("fitted exponent unavailable (need two positive errors)"),
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::FrameCheck(a) => frame_check(a),
        Command::Simulate(a) => simulate(a),
        Command::Coeffs(a) => coeffs(a),
        Command::Test(a) => test(a),
        Command::Mc(a) => mc(a),
        Command::Alias(a) => alias(a),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let consistency = err
        .chain()
        .filter_map(|e| e.downcast_ref::<needlet_core::Error>())
        .any(|e| e.is_consistency_failure());
    if consistency {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_target(false)
        .init();
    let argv = match merge_config(std::env::args_os().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(1);
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_the_error_kind() {
        let consistency = anyhow::Error::from(needlet_core::Error::Consistency("x".into())).context("frame check");
        assert_eq!(exit_code(&consistency), 2);
        let input = anyhow::Error::from(needlet_core::Error::DegenerateVariance).context("test");
        assert_eq!(exit_code(&input), 1);
        assert_eq!(exit_code(&anyhow::anyhow!("--alpha is required")), 1);
    }
}
