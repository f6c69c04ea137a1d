//! Poling profiles: the squared-hyperbolic chirp and a constant-K reference.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GratingKind {
    /// K(z) = −α / [4(2 − z/L)²] + β
    Hyperbolic,
    /// K(z) = constant_k
    Constant,
}

/// Effective grating vector along the crystal. All wavevectors in rad/mm,
/// lengths in mm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GratingProfile {
    pub kind: GratingKind,
    #[serde(default)]
    pub alpha: f64,
    #[serde(default)]
    pub beta: f64,
    #[serde(default)]
    pub constant_k: f64,
    pub length: f64,
}

impl GratingProfile {
    /// The 5 mm chirped design with α = 735 rad/mm, β = 901 rad/mm. Its
    /// `constant_k` holds the periodic reference value, unused unless the
    /// kind is switched to constant.
    pub fn reference_design() -> Self {
        Self {
            constant_k: 774.0,
            ..Self::hyperbolic(735.0, 901.0, 5.0)
        }
    }

    /// The 5 mm periodically poled reference with K = 774 rad/mm.
    pub fn periodic_reference() -> Self {
        Self::constant(774.0, 5.0)
    }

    pub fn hyperbolic(alpha: f64, beta: f64, length: f64) -> Self {
        Self {
            kind: GratingKind::Hyperbolic,
            alpha,
            beta,
            constant_k: 0.0,
            length,
        }
    }

    pub fn constant(constant_k: f64, length: f64) -> Self {
        Self {
            kind: GratingKind::Constant,
            alpha: 0.0,
            beta: 0.0,
            constant_k,
            length,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.length.is_finite() && self.length > 0.0) {
            return Err(Error::invalid("grating.length", "must be positive"));
        }
        let finite = match self.kind {
            GratingKind::Hyperbolic => self.alpha.is_finite() && self.beta.is_finite(),
            GratingKind::Constant => self.constant_k.is_finite(),
        };
        if !finite {
            return Err(Error::invalid("grating", "parameters must be finite"));
        }
        if self.kind == GratingKind::Hyperbolic && self.alpha <= 0.0 {
            return Err(Error::invalid(
                "grating.alpha",
                "must be positive for a decreasing hyperbolic profile",
            ));
        }
        Ok(())
    }

    fn check_z(&self, z: f64) -> Result<()> {
        if z >= 0.0 && z <= self.length {
            Ok(())
        } else {
            Err(Error::OutsideCrystal {
                z_mm: z,
                length_mm: self.length,
            })
        }
    }

    /// K(z) in rad/mm.
    pub fn k_profile(&self, z: f64) -> Result<f64> {
        self.check_z(z)?;
        Ok(self.k_at(z))
    }

    /// Accumulated grating phase φ(z) = ∫₀ᶻ K(z′) dz′ in rad.
    pub fn phase_integral(&self, z: f64) -> Result<f64> {
        self.check_z(z)?;
        Ok(self.phase_at(z))
    }

    /// |K(0) − K(L)| in rad/mm.
    pub fn k_span(&self) -> f64 {
        (self.k_at(0.0) - self.k_at(self.length)).abs()
    }

    pub(crate) fn k_at(&self, z: f64) -> f64 {
        match self.kind {
            GratingKind::Hyperbolic => {
                let u = 2.0 - z / self.length;
                -self.alpha / (4.0 * u * u) + self.beta
            }
            GratingKind::Constant => self.constant_k,
        }
    }

    pub(crate) fn phase_at(&self, z: f64) -> f64 {
        match self.kind {
            GratingKind::Hyperbolic => {
                let u = 2.0 - z / self.length;
                // 1/u − 1/2 written as (2 − u)/(2u) to stay exact at z = 0.
                self.beta * z - 0.25 * self.alpha * self.length * (2.0 - u) / (2.0 * u)
            }
            GratingKind::Constant => self.constant_k * z,
        }
    }

    /// Largest |Δ − K(z)| over the crystal; K is monotonic so the ends bound it.
    pub fn max_mismatch(&self, delta: f64) -> f64 {
        (delta - self.k_at(0.0))
            .abs()
            .max((delta - self.k_at(self.length)).abs())
    }

    /// Samples (z, K, φ) on `points` evenly spaced positions including both ends.
    pub fn design_table(&self, points: usize) -> Result<Vec<[f64; 3]>> {
        if points < 2 {
            return Err(Error::invalid("design.points", "need at least 2 points"));
        }
        let step = self.length / (points - 1) as f64;
        Ok((0..points)
            .map(|i| {
                let z = if i + 1 == points {
                    self.length
                } else {
                    step * i as f64
                };
                [z, self.k_at(z), self.phase_at(z)]
            })
            .collect())
    }
}
