use std::fmt;

use thiserror::Error;

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A wavelength left the validity window of the dispersion formula.
    #[error("wavelength {value_um:.6} µm is outside the valid range [{min_um}, {max_um}] µm")]
    WavelengthOutOfRange {
        value_um: f64,
        min_um: f64,
        max_um: f64,
    },

    /// A longitudinal coordinate outside the crystal.
    #[error("position z = {z_mm} mm is outside the crystal [0, {length_mm}] mm")]
    OutsideCrystal { z_mm: f64, length_mm: f64 },

    #[error("invalid {field}: {reason}")]
    Invalid { field: String, reason: String },

    #[error("amplification coefficient is undefined for a grating with zero K span; specify the coupling directly")]
    ZeroSpan,

    /// The adaptive step collapsed before reaching the end of the crystal.
    #[error(
        "step size underflow at z = {z_mm:.6} mm for detuning {detuning_thz:.4} THz \
         (max |Δ−K| = {max_mismatch:.3} rad/mm, step = {step_mm:.3e} mm)"
    )]
    StepUnderflow {
        detuning_thz: f64,
        z_mm: f64,
        step_mm: f64,
        max_mismatch: f64,
    },

    /// One or more grid points failed.
    #[error("{} grid point(s) failed: {}", .0.len(), GridFailures(.0))]
    GridFailures(Vec<(f64, Box<Error>)>),

    #[error("bandwidth is undefined for a spectrum without a positive maximum")]
    UndefinedBandwidth,

    #[error("detuning grid is not closed under Ω → −Ω (no conjugate for {detuning_thz:.6} THz)")]
    AsymmetricGrid { detuning_thz: f64 },

    #[error(
        "conjugate modes disagree: |B(Ω)| = {plus}, |B(−Ω)| = {minus} at {detuning_thz:.6} THz"
    )]
    ConjugateMismatch {
        detuning_thz: f64,
        plus: f64,
        minus: f64,
    },

    #[error("at least {needed} samples are required, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error(
        "delay {tau_fs} fs exceeds the alias-free limit {limit_fs:.3} fs of the frequency grid"
    )]
    Aliasing { tau_fs: f64, limit_fs: f64 },

    #[error("no resolvable peak: {0}")]
    NoPeak(String),

    #[error("fit did not converge after {iterations} iterations (best residual {best_residual:.4e} at A = {best_a:.4e}, B = {best_b:.4e})")]
    FitNotConverged {
        iterations: usize,
        best_a: f64,
        best_b: f64,
        best_residual: f64,
    },

    #[error("operation requires a {expected} fit, got {got}")]
    WrongModel { expected: String, got: String },

    #[error("gain band [{lo_thz:.4}, {hi_thz:.4}] THz (detuning) contains no grid points")]
    BandOutsideGrid { lo_thz: f64, hi_thz: f64 },

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Invalid {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// True for errors caused by bad input rather than by the numerics.
    pub fn is_validation(&self) -> bool {
        if let Error::GridFailures(failures) = self {
            return failures.iter().all(|(_, e)| e.is_validation());
        }
        matches!(
            self,
            Error::Invalid { .. }
                | Error::Config { .. }
                | Error::ZeroSpan
                | Error::AsymmetricGrid { .. }
                | Error::BandOutsideGrid { .. }
                | Error::WrongModel { .. }
                | Error::Aliasing { .. }
                | Error::WavelengthOutOfRange { .. }
                | Error::OutsideCrystal { .. }
        )
    }
}

struct GridFailures<'a>(&'a [(f64, Box<Error>)]);

impl fmt::Display for GridFailures<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (thz, err)) in self.0.iter().take(5).enumerate() {
            if i > 0 {
                write!(f, "; ")?;
            }
            write!(f, "[{thz:.4} THz] {err}")?;
        }
        if self.0.len() > 5 {
            write!(f, "; … and {} more", self.0.len() - 5)?;
        }
        Ok(())
    }
}
