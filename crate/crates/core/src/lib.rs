//! Needlet (wavelet-frame) analysis of stationary random fields on the circle.
//!
//! The crate covers the whole pipeline:
//!
//! * [`frame`]: the smooth Littlewood–Paley window, trigonometric needlets,
//!   the exact quadrature rule on the torus and checks of the tight-frame
//!   and localization properties;
//! * [`spectrum`]: angular power spectra `C_l = g(l) l^-alpha`;
//! * [`field`]: spectral synthesis of Gaussian fields and grid evaluation;
//! * [`coeffs`]: needlet coefficients, exact or from grid samples, with their
//!   normalizing variance and correlation structure;
//! * [`stats`]: skewness/kurtosis statistics, their exact variances through
//!   Fejér-kernel sums, plug-in estimators and studentized reports;
//! * [`harness`]: reproducible Monte Carlo experiments and diagnostics.
//!
//! All public computations are pure functions of immutable inputs.

// `!(x > 0.0)` style guards reject NaN along with the out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coeffs;
pub mod error;
pub mod field;
pub mod frame;
pub mod harness;
pub mod io;
pub mod spectrum;
pub mod stats;

mod fft;

pub use coeffs::{
    beta_discrete, beta_exact, corr_beta, sigma2_hat_n, sigma2_n, w_discrete, CoefficientSource,
    EmpiricalSpectrum, WaveletCoefficients,
};
pub use error::{Error, Result};
pub use rustfft::num_complex::Complex64;
pub use field::{evaluate_grid, replication_rng, synthesize, GridSample, SpectralField};
pub use frame::{phi, psi_eval, quadrature, window_a, NeedletScale, QuadratureRule};
pub use spectrum::{GProfile, PowerSpectrum};
pub use stats::{
    delta, fejer, studentize, StudentizedReport, TestStatistics, VarianceMode, VarianceSet,
};
