//! Run configuration: one TOML document, optionally patched by `key=value`
//! overrides, validated in full before any computation starts.

use std::path::{Path, PathBuf};

use pdc_core::bogolyubov::{CouplingSpec, Crystal, DetuningGrid, SolverConfig};
use pdc_core::dispersion::{DispersionModel, InteractionFrequencies};
use pdc_core::grating::GratingProfile;
use pdc_core::observables::{BandwidthMethod, SamplingEngine, SpectrometerBins};
use pdc_core::{Error, Result};
use serde::{Deserialize, Serialize};

/// The configuration shipped with the repository; also the built-in default.
pub const DEFAULT_TOML: &str = include_str!("../../../configs/reference.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub crystal: CrystalSection,
    #[serde(default)]
    pub dispersion: DispersionModel,
    #[serde(default = "GratingProfile::reference_design")]
    pub grating: GratingProfile,
    pub solver: SolverConfig,
    #[serde(default)]
    pub design: DesignSection,
    pub observables: ObservablesSection,
    pub gain: GainSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrystalSection {
    pub pump_wavelength_nm: f64,
}

impl Default for CrystalSection {
    fn default() -> Self {
        Self {
            pump_wavelength_nm: 532.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignSection {
    /// Samples of K(z) and φ(z) along the crystal.
    pub points: usize,
}

impl Default for DesignSection {
    fn default() -> Self {
        Self { points: 501 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservablesSection {
    #[serde(default)]
    pub bandwidth_method: BandwidthMethod,
    pub ensemble: EnsembleSection,
    pub spectrometer: SpectrometerSection,
    pub sfg: SfgSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSection {
    pub pulses: usize,
    pub efficiency: f64,
    pub seed: u64,
    #[serde(default)]
    pub engine: SamplingEngine,
    /// Covariance entries below this many standard errors are left out of
    /// the stripe-mass fraction.
    #[serde(default = "default_noise_sigmas")]
    pub stripe_noise_sigmas: f64,
}

fn default_noise_sigmas() -> f64 {
    3.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrometerSection {
    /// Detuning range |Ω|/2π covered by the bins, THz.
    pub min_thz: f64,
    pub max_thz: f64,
    pub bin_width_thz: f64,
}

impl SpectrometerSection {
    pub fn bins(&self) -> Result<SpectrometerBins> {
        SpectrometerBins::uniform(self.min_thz, self.max_thz, self.bin_width_thz).map_err(|e| {
            match e {
                Error::Invalid { reason, .. } => Error::Invalid {
                    field: "observables.spectrometer".into(),
                    reason,
                },
                other => other,
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DelayRange {
    pub min_fs: f64,
    pub max_fs: f64,
    pub step_fs: f64,
}

impl DelayRange {
    fn validate(&self, field: &str) -> Result<()> {
        if !(self.step_fs > 0.0 && self.min_fs.is_finite() && self.max_fs > self.min_fs) {
            return Err(invalid(
                field,
                "need min_fs < max_fs and a positive step_fs",
            ));
        }
        Ok(())
    }

    pub fn delays(&self) -> Vec<f64> {
        let n = ((self.max_fs - self.min_fs) / self.step_fs + 1e-9).floor() as usize;
        (0..=n)
            .map(|k| self.min_fs + self.step_fs * k as f64)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SfgSection {
    /// Overrides the solver coupling for the SFG run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling: Option<CouplingSpec>,
    /// Signal-side detuning grid; fine enough that π/δΩ covers the delays.
    pub grid: DetuningGrid,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub peak_search: Option<DetuningGrid>,
    pub delays: DelayRange,
    /// Pump pulse FWHM; omit for a CW background.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pulse_fwhm_ps: Option<f64>,
    /// Length of the FFT cross-check.
    pub fft_points: usize,
    /// Optional wide scan showing the pulsed pedestal.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coarse: Option<CoarseSfg>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoarseSfg {
    pub grid: DetuningGrid,
    pub delays: DelayRange,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainSection {
    pub powers_mw: Vec<f64>,
    /// Collection band in vacuum wavelength, nm.
    pub band_nm: [f64; 2],
    pub band_points: usize,
    /// |g|²/P in mm⁻² mW⁻¹; calibrated from the target below when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling_sq_per_mw: Option<f64>,
    pub target_peak_exponent: f64,
    pub reference_power_mw: f64,
    pub peak_search: DetuningGrid,
    /// Peak-exponent window used for the log-linear regression.
    pub exponent_window: [f64; 2],
    /// Samples of the fitted curves between the smallest and largest power.
    pub curve_points: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directory: Option<PathBuf>,
}

fn invalid(field: &str, reason: &str) -> Error {
    Error::Invalid {
        field: field.into(),
        reason: reason.into(),
    }
}

fn config_error(path: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Config {
        path: path.into(),
        message: message.into(),
    }
}

impl RunConfig {
    /// Parses `text`, applies the overrides in order and validates.
    pub fn from_toml(text: &str, overrides: &[String]) -> Result<Self> {
        let mut doc: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| config_error("<document>", e.to_string()))?;
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        let de = toml::Value::Table(doc);
        let config: RunConfig = serde_path_to_error::deserialize(de)
            .map_err(|e| config_error(e.path().to_string(), e.inner().to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        match path {
            None => Self::from_toml(DEFAULT_TOML, overrides),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| {
                    config_error(p.display().to_string(), format!("cannot read config: {e}"))
                })?;
                Self::from_toml(&text, overrides)
            }
        }
    }

    pub fn crystal(&self) -> Result<Crystal> {
        Ok(Crystal::new(
            self.grating,
            self.dispersion.clone(),
            InteractionFrequencies::from_pump_wavelength_nm(self.crystal.pump_wavelength_nm)?,
        ))
    }

    pub fn validate(&self) -> Result<()> {
        self.crystal()?;
        self.dispersion.validate()?;
        self.grating.validate()?;
        self.solver.validate()?;
        if self.design.points < 2 {
            return Err(invalid("design.points", "need at least 2 points"));
        }

        let obs = &self.observables;
        let e = &obs.ensemble;
        if e.pulses < 2 {
            return Err(invalid(
                "observables.ensemble.pulses",
                "need at least 2 pulses",
            ));
        }
        if !(e.efficiency > 0.0 && e.efficiency <= 1.0) {
            return Err(invalid(
                "observables.ensemble.efficiency",
                "must lie in (0, 1]",
            ));
        }
        if !(e.stripe_noise_sigmas >= 0.0 && e.stripe_noise_sigmas.is_finite()) {
            return Err(invalid(
                "observables.ensemble.stripe_noise_sigmas",
                "must be non-negative",
            ));
        }
        obs.spectrometer.bins()?;

        let s = &obs.sfg;
        if let Some(c) = &s.coupling {
            c.validate()?;
        }
        s.grid.validate("observables.sfg.grid")?;
        if let Some(g) = &s.peak_search {
            g.validate("observables.sfg.peak_search")?;
        }
        s.delays.validate("observables.sfg.delays")?;
        if let Some(t) = s.pulse_fwhm_ps {
            if !(t > 0.0 && t.is_finite()) {
                return Err(invalid("observables.sfg.pulse_fwhm_ps", "must be positive"));
            }
        }
        if s.fft_points < 2 {
            return Err(invalid(
                "observables.sfg.fft_points",
                "need at least 2 points",
            ));
        }
        if let Some(c) = &s.coarse {
            c.grid.validate("observables.sfg.coarse.grid")?;
            c.delays.validate("observables.sfg.coarse.delays")?;
        }

        let g = &self.gain;
        if g.powers_mw.is_empty() || g.powers_mw.iter().any(|p| !(*p >= 0.0 && p.is_finite())) {
            return Err(invalid(
                "gain.powers_mw",
                "need a non-empty list of non-negative powers",
            ));
        }
        if !(g.band_nm[0] > 0.0 && g.band_nm[1] > g.band_nm[0]) {
            return Err(invalid("gain.band_nm", "need 0 < lower < upper"));
        }
        if g.band_points < 2 {
            return Err(invalid("gain.band_points", "need at least 2 points"));
        }
        if let Some(c) = g.coupling_sq_per_mw {
            if !(c > 0.0 && c.is_finite()) {
                return Err(invalid("gain.coupling_sq_per_mw", "must be positive"));
            }
        }
        if !(g.target_peak_exponent > 0.0 && g.reference_power_mw > 0.0) {
            return Err(invalid(
                "gain",
                "target_peak_exponent and reference_power_mw must be positive",
            ));
        }
        g.peak_search.validate("gain.peak_search")?;
        if !(g.exponent_window[1] > g.exponent_window[0]) {
            return Err(invalid("gain.exponent_window", "need lower < upper"));
        }
        if g.curve_points < 2 {
            return Err(invalid("gain.curve_points", "need at least 2 points"));
        }
        Ok(())
    }
}

/// Sets `a.b.c = value`, creating intermediate tables. The value is read as
/// a TOML expression and falls back to a bare string.
pub fn apply_override(doc: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| config_error(assignment, "override must look like key=value"))?;
    let key = key.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(config_error(key, "empty key segment in override"));
    }
    let value = match format!("v = {}", raw.trim()).parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(raw.trim().to_string()),
    };
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().expect("non-empty key");
    let mut table = doc;
    let mut path = String::new();
    for part in parts {
        if !path.is_empty() {
            path.push('.');
        }
        path.push_str(part);
        let entry = table
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry.as_table_mut().ok_or_else(|| {
            config_error(path.clone(), "cannot override inside a non-table value")
        })?;
    }
    table.insert(last.to_string(), value);
    Ok(())
}
