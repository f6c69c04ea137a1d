//! Sum-frequency signal of the twin beams against the delay τ between them.
//!
//! With ∫ running over the signal half Ω ∈ (0, ω₀) in rad/fs,
//!
//!   I(τ) = 8 (∫|B|²)² · E(τ) + 4 |∫ A B e^{i(Ωτ − ΔL)}|²
//!
//! The first term is the incoherent background; E(τ) = 1 for a CW pump and
//! the Gaussian overlap of two pump-length pulses otherwise. The second is
//! the coherent peak, nonzero only where the phases are compensated.

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;

use super::spectrum::{nearest_crossings, trapezoid_weights};
use crate::bogolyubov::BogoliubovField;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SfgTrace {
    pub delays_fs: Vec<f64>,
    pub intensity: Vec<f64>,
    pub background: Vec<f64>,
    pub coherent: Vec<f64>,
    /// 8(∫|B|²dΩ)², the background at zero delay.
    pub background_level: f64,
}

/// Signal-half quadrature data: Ω (rad/fs), trapezoid weights and
/// F(Ω) = A B e^{−iΔL}.
struct Integrand {
    omega: Vec<f64>,
    weights: Vec<f64>,
    amplitude: Vec<Complex64>,
    photons: Vec<f64>,
}

fn integrand(field: &BogoliubovField) -> Result<Integrand> {
    if let Ok(conj) = field.conjugate_indices() {
        for (i, &j) in conj.iter().enumerate() {
            let (p, m) = (field.b[i].norm_sqr(), field.b[j].norm_sqr());
            if (p - m).abs() > 1e-6 * p.max(m) + 1e-12 {
                return Err(Error::ConjugateMismatch {
                    detuning_thz: crate::dispersion::rad_per_s_to_thz(field.detunings[i]),
                    plus: p,
                    minus: m,
                });
            }
        }
    }
    let half = field.signal_half();
    if half.is_empty() {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    let length = field.crystal.profile.length;
    let omega: Vec<f64> = half.detunings.iter().map(|w| w * 1e-15).collect();
    Ok(Integrand {
        weights: trapezoid_weights(&omega),
        amplitude: (0..half.len())
            .map(|k| half.a[k] * half.b[k] * Complex64::from_polar(1.0, -half.mismatch[k] * length))
            .collect(),
        photons: half.b.iter().map(|b| b.norm_sqr()).collect(),
        omega,
    })
}

impl Integrand {
    /// Largest |τ| (fs) the grid spacing resolves without aliasing.
    /// A single mode has no grid spacing and no limit.
    fn alias_limit(&self) -> f64 {
        let step = self
            .omega
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max);
        if step > 0.0 {
            std::f64::consts::PI / step
        } else {
            f64::INFINITY
        }
    }

    fn background_level(&self) -> f64 {
        let n: f64 = self
            .weights
            .iter()
            .zip(&self.photons)
            .map(|(w, p)| w * p)
            .sum();
        8.0 * n * n
    }
}

/// E(τ) for two Gaussian pulses of intensity FWHM `pulse_fwhm_ps`: their
/// overlap is Gaussian with √2 times the pulse width.
pub fn pulse_overlap(tau_fs: f64, pulse_fwhm_ps: Option<f64>) -> f64 {
    match pulse_fwhm_ps {
        None => 1.0,
        Some(t) => {
            let t = t * 1e3;
            (-2.0 * std::f64::consts::LN_2 * tau_fs * tau_fs / (t * t)).exp()
        }
    }
}

/// SFG intensity at the requested delays by direct quadrature.
pub fn sfg_trace(
    field: &BogoliubovField,
    delays_fs: &[f64],
    pulse_fwhm_ps: Option<f64>,
) -> Result<SfgTrace> {
    if let Some(t) = pulse_fwhm_ps {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::invalid("sfg.pulse_fwhm_ps", "must be positive"));
        }
    }
    let f = integrand(field)?;
    let limit = f.alias_limit();
    if let Some(&tau) = delays_fs.iter().find(|t| t.abs() > limit) {
        return Err(Error::Aliasing {
            tau_fs: tau,
            limit_fs: limit,
        });
    }
    let level = f.background_level();
    let coherent: Vec<f64> = delays_fs
        .par_iter()
        .map(|&tau| {
            let s: Complex64 = f
                .omega
                .iter()
                .zip(&f.weights)
                .zip(&f.amplitude)
                .map(|((w, q), a)| a * Complex64::from_polar(*q, w * tau))
                .sum();
            4.0 * s.norm_sqr()
        })
        .collect();
    Ok(assemble(delays_fs.to_vec(), coherent, level, pulse_fwhm_ps))
}

fn assemble(
    delays_fs: Vec<f64>,
    coherent: Vec<f64>,
    level: f64,
    pulse_fwhm_ps: Option<f64>,
) -> SfgTrace {
    let background: Vec<f64> = delays_fs
        .iter()
        .map(|&t| level * pulse_overlap(t, pulse_fwhm_ps))
        .collect();
    SfgTrace {
        intensity: background
            .iter()
            .zip(&coherent)
            .map(|(b, c)| b + c)
            .collect(),
        delays_fs,
        background,
        coherent,
        background_level: level,
    }
}

/// The same trace on the FFT delay grid τ_m = 2πm/(n·δΩ), |m| < n/2.
/// Requires a uniform detuning grid; `n` is padded up from the grid size.
pub fn sfg_trace_fft(
    field: &BogoliubovField,
    n: usize,
    pulse_fwhm_ps: Option<f64>,
) -> Result<SfgTrace> {
    let f = integrand(field)?;
    let len = f.omega.len();
    if len < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: len,
        });
    }
    let step = (f.omega[len - 1] - f.omega[0]) / (len - 1) as f64;
    if f.omega
        .windows(2)
        .any(|w| ((w[1] - w[0]) - step).abs() > 1e-9 * step)
    {
        return Err(Error::invalid(
            "sfg",
            "the FFT path needs a uniform detuning grid",
        ));
    }
    let n = n.max(len);
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for k in 0..len {
        buf[k] = f.amplitude[k] * f.weights[k];
    }
    FftPlanner::new().plan_fft_inverse(n).process(&mut buf);

    let half = n.div_ceil(2);
    let ms: Vec<i64> = (-(half as i64) + 1..half as i64).collect();
    let delays: Vec<f64> = ms
        .iter()
        .map(|&m| 2.0 * std::f64::consts::PI * m as f64 / (n as f64 * step))
        .collect();
    let coherent = ms
        .iter()
        .map(|&m| 4.0 * buf[m.rem_euclid(n as i64) as usize].norm_sqr())
        .collect();
    Ok(assemble(
        delays,
        coherent,
        f.background_level(),
        pulse_fwhm_ps,
    ))
}

/// Shape of the coherent peak.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakMetrics {
    pub peak_delay_fs: f64,
    pub peak_value: f64,
    pub fwhm_fs: f64,
    /// (right − left)/(right + left) half widths at half maximum.
    pub asymmetry: f64,
    /// Coherent maximum over the background at zero delay.
    pub peak_to_background: f64,
}

/// Metrics of the coherent component of a trace.
pub fn peak_metrics(trace: &SfgTrace) -> Result<PeakMetrics> {
    let mut m = profile_metrics(&trace.delays_fs, &trace.coherent)?;
    m.peak_to_background = if trace.background_level > 0.0 {
        m.peak_value / trace.background_level
    } else {
        f64::INFINITY
    };
    Ok(m)
}

/// Peak position (parabolic refinement), FWHM and asymmetry of a sampled
/// profile on increasing abscissae.
pub fn profile_metrics(x: &[f64], y: &[f64]) -> Result<PeakMetrics> {
    if x.len() != y.len() || x.len() < 3 {
        return Err(Error::NoPeak("profile needs at least three samples".into()));
    }
    let k = (0..y.len())
        .max_by(|&a, &b| y[a].total_cmp(&y[b]))
        .expect("non-empty");
    let max = y[k];
    if !(max > 0.0) {
        return Err(Error::NoPeak("profile has no positive maximum".into()));
    }
    let centre = if k > 0 && k + 1 < y.len() {
        let (y0, y1, y2) = (y[k - 1], y[k], y[k + 1]);
        let denom = y0 - 2.0 * y1 + y2;
        if denom < 0.0 {
            let shift = 0.5 * (y0 - y2) / denom;
            x[k] + shift * 0.5 * (x[k + 1] - x[k - 1])
        } else {
            x[k]
        }
    } else {
        x[k]
    };
    let (l, r) = nearest_crossings(x, y, k, 0.5 * max);
    let (Some(l), Some(r)) = (l, r) else {
        return Err(Error::NoPeak(format!(
            "maximum at {:.1} does not fall to half height inside the window",
            x[k]
        )));
    };
    let (lw, rw) = (centre - l, r - centre);
    Ok(PeakMetrics {
        peak_delay_fs: centre,
        peak_value: max,
        fwhm_fs: r - l,
        asymmetry: (rw - lw) / (rw + lw),
        peak_to_background: f64::NAN,
    })
}
