use serde::{Deserialize, Serialize};

use crate::bogolyubov::BogoliubovField;
use crate::dispersion::{omega_to_wavelength_um, rad_per_s_to_thz};
use crate::error::{Error, Result};

/// 2√(2 ln 2): FWHM of a Gaussian in units of its standard deviation.
pub const GAUSSIAN_FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949_3;

/// Photons per mode |B(Ω)|² over the detuning grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    /// rad/s, sorted ascending.
    pub detunings: Vec<f64>,
    pub values: Vec<f64>,
    pub omega0: f64,
}

impl Spectrum {
    pub fn from_field(field: &BogoliubovField) -> Self {
        let mut idx: Vec<usize> = (0..field.len()).collect();
        idx.sort_by(|&i, &j| field.detunings[i].total_cmp(&field.detunings[j]));
        Self {
            detunings: idx.iter().map(|&i| field.detunings[i]).collect(),
            values: idx.iter().map(|&i| field.b[i].norm_sqr()).collect(),
            omega0: field.crystal.freqs.omega0,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn detuning_thz(&self) -> Vec<f64> {
        self.detunings
            .iter()
            .map(|&d| rad_per_s_to_thz(d))
            .collect()
    }

    /// Vacuum wavelength (nm) of the mode at ω₀ + Ω.
    pub fn wavelength_nm(&self) -> Vec<f64> {
        self.detunings
            .iter()
            .map(|&d| omega_to_wavelength_um(self.omega0 + d) * 1e3)
            .collect()
    }

    /// Modes with Ω > 0 (the signal beam).
    pub fn signal_branch(&self) -> Spectrum {
        let (detunings, values) = self
            .detunings
            .iter()
            .zip(&self.values)
            .filter(|(d, _)| **d > 0.0)
            .map(|(d, v)| (*d, *v))
            .unzip();
        Spectrum {
            detunings,
            values,
            omega0: self.omega0,
        }
    }
}

/// Pointwise |B|² of a solved field.
pub fn spectrum(field: &BogoliubovField) -> Spectrum {
    Spectrum::from_field(field)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandwidthMethod {
    /// Distance between the outermost half-maximum crossings.
    FwhmOuter,
    /// 2√(2 ln 2)·σ of the normalised spectral density.
    #[default]
    Rms,
}

/// Spectral width in THz.
pub fn bandwidth(spec: &Spectrum, method: BandwidthMethod) -> Result<f64> {
    let x = spec.detuning_thz();
    width(&x, &spec.values, method)
}

/// Width of a sampled non-negative profile y(x), in the units of x.
pub fn width(x: &[f64], y: &[f64], method: BandwidthMethod) -> Result<f64> {
    if x.len() != y.len() || x.is_empty() {
        return Err(Error::UndefinedBandwidth);
    }
    let max = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(max > 0.0) {
        return Err(Error::UndefinedBandwidth);
    }
    match method {
        BandwidthMethod::FwhmOuter => {
            let (lo, hi) = outer_crossings(x, y, 0.5 * max);
            Ok(hi - lo)
        }
        BandwidthMethod::Rms => {
            let w = trapezoid_weights(x);
            let norm: f64 = w.iter().zip(y).map(|(w, y)| w * y).sum();
            if !(norm > 0.0) {
                return Err(Error::UndefinedBandwidth);
            }
            let mean = w
                .iter()
                .zip(y)
                .zip(x)
                .map(|((w, y), x)| w * y * x)
                .sum::<f64>()
                / norm;
            let var = w
                .iter()
                .zip(y)
                .zip(x)
                .map(|((w, y), x)| w * y * (x - mean) * (x - mean))
                .sum::<f64>()
                / norm;
            Ok(GAUSSIAN_FWHM_PER_SIGMA * var.sqrt())
        }
    }
}

/// Trapezoid quadrature weights for sorted abscissae. A single point gets
/// unit weight.
pub(crate) fn trapezoid_weights(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n == 1 {
        return vec![1.0];
    }
    (0..n)
        .map(|i| {
            let left = if i > 0 { x[i] - x[i - 1] } else { 0.0 };
            let right = if i + 1 < n { x[i + 1] - x[i] } else { 0.0 };
            0.5 * (left + right)
        })
        .collect()
}

fn interpolate_crossing(x0: f64, y0: f64, x1: f64, y1: f64, level: f64) -> f64 {
    if y1 == y0 {
        0.5 * (x0 + x1)
    } else {
        x0 + (level - y0) * (x1 - x0) / (y1 - y0)
    }
}

/// Outermost positions where y crosses `level`, linearly interpolated.
/// Falls back to the grid ends when the profile is still above the level
/// there.
pub(crate) fn outer_crossings(x: &[f64], y: &[f64], level: f64) -> (f64, f64) {
    let first = y.iter().position(|&v| v >= level).unwrap_or(0);
    let last = y.iter().rposition(|&v| v >= level).unwrap_or(y.len() - 1);
    let lo = if first > 0 {
        interpolate_crossing(x[first - 1], y[first - 1], x[first], y[first], level)
    } else {
        x[0]
    };
    let hi = if last + 1 < y.len() {
        interpolate_crossing(x[last], y[last], x[last + 1], y[last + 1], level)
    } else {
        x[last]
    };
    (lo, hi)
}

/// Crossings of `level` nearest to index `peak` on either side; `None` if
/// the profile never drops below the level on that side.
pub(crate) fn nearest_crossings(
    x: &[f64],
    y: &[f64],
    peak: usize,
    level: f64,
) -> (Option<f64>, Option<f64>) {
    let left = (0..peak)
        .rev()
        .find(|&i| y[i] < level)
        .map(|i| interpolate_crossing(x[i], y[i], x[i + 1], y[i + 1], level));
    let right = (peak + 1..y.len())
        .find(|&i| y[i] < level)
        .map(|i| interpolate_crossing(x[i - 1], y[i - 1], x[i], y[i], level));
    (left, right)
}
