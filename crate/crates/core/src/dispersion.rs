//! Extraordinary-wave dispersion of MgO-doped congruent lithium niobate and
//! the collinear type-0 phase mismatch.
//!
//! Units: angular frequencies in rad/s, wavevectors in rad/mm, wavelengths in
//! µm at the Sellmeier interface and nm at the reporting interface.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

const SPEED_OF_LIGHT_MM_PER_S: f64 = SPEED_OF_LIGHT * 1e3;

/// Converts an angular frequency (rad/s) to a vacuum wavelength in µm.
pub fn omega_to_wavelength_um(omega: f64) -> f64 {
    2.0 * PI * SPEED_OF_LIGHT / omega * 1e6
}

/// Converts a vacuum wavelength in µm to an angular frequency (rad/s).
pub fn wavelength_um_to_omega(wavelength_um: f64) -> f64 {
    2.0 * PI * SPEED_OF_LIGHT / (wavelength_um * 1e-6)
}

/// Angular frequency (rad/s) to ordinary frequency in THz.
pub fn rad_per_s_to_thz(omega: f64) -> f64 {
    omega / (2.0 * PI * 1e12)
}

/// Ordinary frequency in THz to angular frequency (rad/s).
pub fn thz_to_rad_per_s(thz: f64) -> f64 {
    thz * 2.0 * PI * 1e12
}

/// Published Sellmeier forms understood by [`DispersionModel`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SellmeierForm {
    /// Temperature-dependent form of Gayer et al., Appl. Phys. B 91, 343
    /// (2008), ten coefficients `a1..a6, b1..b4`:
    ///
    /// n² = a1 + b1·f + (a2 + b2·f)/(λ² − (a3 + b3·f)²) + (a4 + b4·f)/(λ² − a5²) − a6·λ²
    ///
    /// with f = (T − 24.5)(T + 570.82), T in °C and λ in µm.
    Gayer2008,
}

impl SellmeierForm {
    fn coefficient_count(self) -> usize {
        match self {
            SellmeierForm::Gayer2008 => 10,
        }
    }
}

/// Extraordinary refractive index model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DispersionModel {
    pub formula: SellmeierForm,
    /// Citation of the coefficient set, carried into run metadata.
    #[serde(default)]
    pub source: String,
    pub coefficients: Vec<f64>,
    #[serde(default = "default_temperature_k")]
    pub temperature_k: f64,
    pub valid_range_um: [f64; 2],
}

fn default_temperature_k() -> f64 {
    298.15
}

impl Default for DispersionModel {
    /// 5 mol% MgO-doped congruent LiNbO₃, extraordinary index, 298.15 K.
    fn default() -> Self {
        Self {
            formula: SellmeierForm::Gayer2008,
            source: "Gayer et al., Appl. Phys. B 91, 343 (2008), 5% MgO:CLN, n_e".into(),
            coefficients: vec![
                5.756, 0.0983, 0.2020, 189.32, 12.52, 1.32e-2, 2.860e-6, 4.700e-8, 6.113e-8,
                1.516e-4,
            ],
            temperature_k: default_temperature_k(),
            valid_range_um: [0.5, 4.0],
        }
    }
}

impl DispersionModel {
    pub fn validate(&self) -> Result<()> {
        let expected = self.formula.coefficient_count();
        if self.coefficients.len() != expected {
            return Err(Error::invalid(
                "dispersion.coefficients",
                format!(
                    "expected {expected} values, got {}",
                    self.coefficients.len()
                ),
            ));
        }
        if self.coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid(
                "dispersion.coefficients",
                "all values must be finite",
            ));
        }
        if !(self.temperature_k.is_finite() && self.temperature_k > 0.0) {
            return Err(Error::invalid(
                "dispersion.temperature_k",
                "must be positive",
            ));
        }
        let [lo, hi] = self.valid_range_um;
        if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && lo < hi) {
            return Err(Error::invalid(
                "dispersion.valid_range_um",
                "must be an increasing pair of positive wavelengths",
            ));
        }
        Ok(())
    }

    fn temperature_c(&self) -> f64 {
        self.temperature_k - 273.15
    }

    /// Extraordinary index n_e(λ, T) for a wavelength in µm.
    pub fn refractive_index(&self, wavelength_um: f64) -> Result<f64> {
        let [lo, hi] = self.valid_range_um;
        if !(wavelength_um >= lo && wavelength_um <= hi) {
            return Err(Error::WavelengthOutOfRange {
                value_um: wavelength_um,
                min_um: lo,
                max_um: hi,
            });
        }
        Ok(self.index_unchecked(wavelength_um))
    }

    fn index_unchecked(&self, wavelength_um: f64) -> f64 {
        match self.formula {
            SellmeierForm::Gayer2008 => {
                let c = &self.coefficients;
                let t = self.temperature_c();
                let f = (t - 24.5) * (t + 570.82);
                let l2 = wavelength_um * wavelength_um;
                let uv_pole = c[2] + c[8] * f;
                let n2 = c[0]
                    + c[6] * f
                    + (c[1] + c[7] * f) / (l2 - uv_pole * uv_pole)
                    + (c[3] + c[9] * f) / (l2 - c[4] * c[4])
                    - c[5] * l2;
                n2.sqrt()
            }
        }
    }

    /// Wavenumber k(ω) = n_e(λ)·ω/c in rad/mm.
    pub fn wavenumber(&self, omega: f64) -> Result<f64> {
        let n = self.refractive_index(omega_to_wavelength_um(omega))?;
        Ok(n * omega / SPEED_OF_LIGHT_MM_PER_S)
    }

    /// Phase mismatch Δ(Ω) = k_p − k(ω₀+Ω) − k(ω₀−Ω) in rad/mm.
    ///
    /// Even in Ω bit for bit: both sidebands are formed symmetrically and
    /// their sum is commutative.
    pub fn mismatch(&self, detuning: f64, freqs: &InteractionFrequencies) -> Result<f64> {
        let kp = self.wavenumber(freqs.pump_omega())?;
        let ks = self.wavenumber(freqs.omega0 + detuning)?;
        let ki = self.wavenumber(freqs.omega0 - detuning)?;
        Ok(kp - (ks + ki))
    }
}

/// Pump and degenerate frequencies of the interaction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InteractionFrequencies {
    pub pump_wavelength_nm: f64,
    /// Half the pump angular frequency, rad/s.
    pub omega0: f64,
}

impl InteractionFrequencies {
    pub fn from_pump_wavelength_nm(pump_wavelength_nm: f64) -> Result<Self> {
        if !(pump_wavelength_nm.is_finite() && pump_wavelength_nm > 0.0) {
            return Err(Error::invalid("pump_wavelength_nm", "must be positive"));
        }
        Ok(Self {
            pump_wavelength_nm,
            omega0: PI * SPEED_OF_LIGHT / (pump_wavelength_nm * 1e-9),
        })
    }

    pub fn pump_omega(&self) -> f64 {
        2.0 * self.omega0
    }

    /// Vacuum wavelength in nm of the mode at ω₀ + Ω.
    pub fn wavelength_nm(&self, detuning: f64) -> f64 {
        omega_to_wavelength_um(self.omega0 + detuning) * 1e3
    }

    /// Detuning Ω for a mode of the given vacuum wavelength.
    pub fn detuning_for_wavelength_nm(&self, wavelength_nm: f64) -> f64 {
        wavelength_um_to_omega(wavelength_nm * 1e-3) - self.omega0
    }
}

impl Default for InteractionFrequencies {
    fn default() -> Self {
        Self::from_pump_wavelength_nm(532.0).expect("532 nm is valid")
    }
}
