//! Gain curves: band-integrated flux against pump power, and least-squares
//! discrimination between exponential and sinh² growth laws.
//!
//! Pump power enters only through |g|² = c·P. Fits minimise the squared log
//! residuals ln model − ln data over (ln A, ln B) by multi-start
//! Nelder–Mead.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::bogolyubov::{
    calibrate_peak_exponent, peak_gain, solve_detunings, Crystal, IntegrationOptions,
};
use crate::dispersion::{rad_per_s_to_thz, wavelength_um_to_omega};
use crate::error::{Error, Result};

/// Flux collected in a wavelength band at a series of pump powers.
#[derive(Debug, Clone, PartialEq)]
pub struct GainCurve {
    pub powers_mw: Vec<f64>,
    /// ∫|B|² dν over the band, photons per pulse-length per THz × THz.
    pub flux: Vec<f64>,
    /// ln max|A|² at each power, if a peak search grid was given.
    pub peak_exponents: Option<Vec<f64>>,
    /// |g|²/P, mm⁻² mW⁻¹.
    pub coupling_sq_per_mw: f64,
    pub band_nm: [f64; 2],
}

impl GainCurve {
    /// Points whose peak exponent lies in [lo, hi].
    pub fn window(&self, lo: f64, hi: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        let g = self
            .peak_exponents
            .as_ref()
            .ok_or_else(|| Error::invalid("gain", "curve has no peak exponents"))?;
        Ok(self
            .powers_mw
            .iter()
            .zip(&self.flux)
            .zip(g)
            .filter(|(_, g)| **g >= lo && **g <= hi)
            .map(|((p, f), _)| (*p, *f))
            .unzip())
    }
}

/// Detunings (rad/s) of `points` modes evenly spaced in frequency across a
/// wavelength band on the idler side of degeneracy.
pub fn band_detunings(crystal: &Crystal, band_nm: [f64; 2], points: usize) -> Result<Vec<f64>> {
    let [lo, hi] = band_nm;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::invalid("gain.band_nm", "need 0 < lower < upper"));
    }
    if points < 2 {
        return Err(Error::invalid("gain.band_points", "need at least 2 points"));
    }
    let omega0 = crystal.freqs.omega0;
    let a = wavelength_um_to_omega(hi * 1e-3) - omega0;
    let b = wavelength_um_to_omega(lo * 1e-3) - omega0;
    let n = (points - 1) as f64;
    Ok((0..points)
        .map(|k| (a * (n - k as f64) + b * k as f64) / n)
        .collect())
}

/// Trapezoid ∫|B|² dν (ν in THz) over the band.
pub fn band_flux(detunings: &[f64], photons: &[f64]) -> f64 {
    let x: Vec<f64> = detunings.iter().map(|&d| rad_per_s_to_thz(d)).collect();
    x.windows(2)
        .zip(photons.windows(2))
        .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
        .sum()
}

/// Solves the band at every power.
pub fn simulate_gain_curve(
    powers_mw: &[f64],
    coupling_sq_per_mw: f64,
    band_nm: [f64; 2],
    band_points: usize,
    options: &IntegrationOptions,
    crystal: &Crystal,
    peak_search: Option<&[f64]>,
) -> Result<GainCurve> {
    if !(coupling_sq_per_mw > 0.0 && coupling_sq_per_mw.is_finite()) {
        return Err(Error::invalid(
            "gain.coupling_sq_per_mw",
            "must be positive",
        ));
    }
    if powers_mw.is_empty() || powers_mw.iter().any(|p| !(*p >= 0.0 && p.is_finite())) {
        return Err(Error::invalid("gain.powers_mw", "need non-negative powers"));
    }
    let detunings = band_detunings(crystal, band_nm, band_points)?;
    let mut flux = Vec::with_capacity(powers_mw.len());
    let mut exponents = Vec::with_capacity(powers_mw.len());
    for &p in powers_mw {
        let g = Complex64::new((coupling_sq_per_mw * p).sqrt(), 0.0);
        let field = solve_detunings(&detunings, g, options, crystal)?;
        let photons: Vec<f64> = field.b.iter().map(|b| b.norm_sqr()).collect();
        flux.push(band_flux(&field.detunings, &photons));
        if let Some(search) = peak_search {
            exponents.push(peak_gain(g, options, crystal, search)?.exponent);
        }
    }
    Ok(GainCurve {
        powers_mw: powers_mw.to_vec(),
        flux,
        peak_exponents: peak_search.map(|_| exponents),
        coupling_sq_per_mw,
        band_nm,
    })
}

/// c = |g|²/P such that the per-mode peak exponent is `target` at
/// `reference_power_mw`.
pub fn calibrate_power_coupling(
    target: f64,
    reference_power_mw: f64,
    options: &IntegrationOptions,
    crystal: &Crystal,
    search: &[f64],
) -> Result<f64> {
    if !(reference_power_mw > 0.0) {
        return Err(Error::invalid(
            "gain.reference_power_mw",
            "must be positive",
        ));
    }
    let cal = calibrate_peak_exponent(target, options, crystal, search)?;
    Ok(cal.coupling * cal.coupling / reference_power_mw)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GainModel {
    /// N = A(e^{BP} − 1)
    Rosenbluth,
    /// N = A sinh²(B√P)
    Homogeneous,
}

fn ln_expm1(x: f64) -> f64 {
    if x > 30.0 {
        x + (-(-x).exp()).ln_1p()
    } else {
        x.exp_m1().ln()
    }
}

fn ln_sinh(x: f64) -> f64 {
    if x > 20.0 {
        x - std::f64::consts::LN_2 + (-(-2.0 * x).exp()).ln_1p()
    } else {
        x.sinh().ln()
    }
}

impl GainModel {
    pub fn value(self, a: f64, b: f64, power: f64) -> f64 {
        match self {
            GainModel::Rosenbluth => a * (b * power).exp_m1(),
            GainModel::Homogeneous => a * (b * power.sqrt()).sinh().powi(2),
        }
    }

    fn ln_value(self, a: f64, b: f64, power: f64) -> f64 {
        a.ln()
            + match self {
                GainModel::Rosenbluth => ln_expm1(b * power),
                GainModel::Homogeneous => 2.0 * ln_sinh(b * power.sqrt()),
            }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitResult {
    pub model: GainModel,
    pub a: f64,
    /// mW⁻¹ (Rosenbluth) or mW^{−1/2} (homogeneous).
    pub b: f64,
    /// RMS of the log residuals.
    pub residual_norm: f64,
    /// Covariance of (A, B) from the residual Jacobian.
    pub covariance: [[f64; 2]; 2],
    /// A within [0.01, 100]: a fitted prefactor outside that range signals a
    /// law that does not describe the data.
    pub physical: bool,
}

/// Exponent G = B·P of a Rosenbluth fit.
pub fn gain_exponent(fit: &FitResult, power_mw: f64) -> Result<f64> {
    match fit.model {
        GainModel::Rosenbluth => Ok(fit.b * power_mw),
        other => Err(Error::WrongModel {
            expected: "rosenbluth".into(),
            got: format!("{other:?}").to_lowercase(),
        }),
    }
}

struct Simplex {
    points: [[f64; 2]; 3],
    values: [f64; 3],
}

/// Nelder–Mead in two dimensions. Returns the best vertex, its value and
/// whether the simplex collapsed before `max_iter`.
fn nelder_mead(
    f: &dyn Fn([f64; 2]) -> f64,
    start: [f64; 2],
    step: f64,
    max_iter: usize,
) -> ([f64; 2], f64, bool) {
    let p = [
        start,
        [start[0] + step, start[1]],
        [start[0], start[1] + step],
    ];
    let mut s = Simplex {
        values: p.map(f),
        points: p,
    };
    let lerp =
        |a: [f64; 2], b: [f64; 2], t: f64| [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
    for _ in 0..max_iter {
        let mut order = [0, 1, 2];
        order.sort_by(|&i, &j| s.values[i].total_cmp(&s.values[j]));
        let (b, m, w) = (order[0], order[1], order[2]);
        let spread_f = s.values[w] - s.values[b];
        let spread_x = (0..3)
            .flat_map(|i| (0..2).map(move |k| (i, k)))
            .map(|(i, k)| (s.points[i][k] - s.points[b][k]).abs())
            .fold(0.0, f64::max);
        if spread_f <= 1e-14 * (1.0 + s.values[b].abs()) && spread_x <= 1e-10 {
            return (s.points[b], s.values[b], true);
        }
        let centroid = lerp(s.points[b], s.points[m], 0.5);
        let reflected = lerp(centroid, s.points[w], -1.0);
        let fr = f(reflected);
        if fr < s.values[b] {
            let expanded = lerp(centroid, s.points[w], -2.0);
            let fe = f(expanded);
            if fe < fr {
                s.points[w] = expanded;
                s.values[w] = fe;
            } else {
                s.points[w] = reflected;
                s.values[w] = fr;
            }
        } else if fr < s.values[m] {
            s.points[w] = reflected;
            s.values[w] = fr;
        } else {
            let (target, ft) = if fr < s.values[w] {
                (reflected, fr)
            } else {
                (s.points[w], s.values[w])
            };
            let contracted = lerp(centroid, target, 0.5);
            let fc = f(contracted);
            if fc < ft {
                s.points[w] = contracted;
                s.values[w] = fc;
            } else {
                for i in [m, w] {
                    s.points[i] = lerp(s.points[b], s.points[i], 0.5);
                    s.values[i] = f(s.points[i]);
                }
            }
        }
    }
    let b = (0..3)
        .min_by(|&i, &j| s.values[i].total_cmp(&s.values[j]))
        .expect("three vertices");
    (s.points[b], s.values[b], false)
}

/// Least-squares fit of `model` to positive flux data.
pub fn fit_gain_model(powers_mw: &[f64], flux: &[f64], model: GainModel) -> Result<FitResult> {
    if powers_mw.len() != flux.len() {
        return Err(Error::invalid("fit", "powers and flux differ in length"));
    }
    let data: Vec<(f64, f64)> = powers_mw
        .iter()
        .zip(flux)
        .filter(|(p, f)| **p > 0.0 && **f > 0.0 && f.is_finite())
        .map(|(p, f)| (*p, f.ln()))
        .collect();
    if data.len() < 4 {
        return Err(Error::TooFewSamples {
            needed: 4,
            got: data.len(),
        });
    }
    let residuals = |a: f64, b: f64| -> Vec<f64> {
        data.iter()
            .map(|(p, y)| model.ln_value(a, b, *p) - y)
            .collect()
    };
    let cost = |t: [f64; 2]| -> f64 {
        let r = residuals(t[0].exp(), t[1].exp());
        let s: f64 = r.iter().map(|x| x * x).sum();
        if s.is_finite() {
            s
        } else {
            f64::MAX
        }
    };

    let p_max = data.iter().map(|d| d.0).fold(0.0, f64::max);
    let b_scale = match model {
        GainModel::Rosenbluth => 1.0 / p_max,
        GainModel::Homogeneous => 1.0 / p_max.sqrt(),
    };
    let mut best: Option<([f64; 2], f64, bool)> = None;
    for a0 in [1e-4, 1e-2, 1.0, 1e2] {
        for b0 in [0.3, 1.0, 3.0, 10.0, 30.0] {
            let start = [f64::ln(a0), f64::ln(b0 * b_scale)];
            // Restart once from the end point to shake off a collapsed simplex.
            let (x, _, _) = nelder_mead(&cost, start, 0.5, 4000);
            let run = nelder_mead(&cost, x, 0.1, 4000);
            if best.map_or(true, |b| run.1 < b.1) {
                best = Some(run);
            }
        }
    }
    let (theta, ssr, converged) = best.expect("at least one start");
    let (a, b) = (theta[0].exp(), theta[1].exp());
    if !converged {
        return Err(Error::FitNotConverged {
            iterations: 8000,
            best_a: a,
            best_b: b,
            best_residual: (ssr / data.len() as f64).sqrt(),
        });
    }

    // Jacobian of the residuals in (A, B) by central differences.
    let n = data.len();
    let (ha, hb) = (1e-6 * a, 1e-6 * b);
    let (ra_p, ra_m) = (residuals(a + ha, b), residuals(a - ha, b));
    let (rb_p, rb_m) = (residuals(a, b + hb), residuals(a, b - hb));
    let mut jtj = [[0.0; 2]; 2];
    for k in 0..n {
        let j = [
            (ra_p[k] - ra_m[k]) / (2.0 * ha),
            (rb_p[k] - rb_m[k]) / (2.0 * hb),
        ];
        for r in 0..2 {
            for c in 0..2 {
                jtj[r][c] += j[r] * j[c];
            }
        }
    }
    let det = jtj[0][0] * jtj[1][1] - jtj[0][1] * jtj[1][0];
    let s2 = ssr / (n - 2) as f64;
    let covariance = [
        [s2 * jtj[1][1] / det, -s2 * jtj[0][1] / det],
        [-s2 * jtj[1][0] / det, s2 * jtj[0][0] / det],
    ];
    Ok(FitResult {
        model,
        a,
        b,
        residual_norm: (ssr / n as f64).sqrt(),
        covariance,
        physical: (0.01..=100.0).contains(&a),
    })
}

/// Ordinary least squares of ln(flux) on power.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn log_linear_fit(powers_mw: &[f64], flux: &[f64]) -> Result<LinearFit> {
    let pts: Vec<(f64, f64)> = powers_mw
        .iter()
        .zip(flux)
        .filter(|(_, f)| **f > 0.0)
        .map(|(p, f)| (*p, f.ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::TooFewSamples {
            needed: 3,
            got: pts.len(),
        });
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    Ok(LinearFit {
        slope,
        intercept: my - slope * mx,
        r_squared: sxy * sxy / (sxx * syy),
    })
}

/// Model values with multiplicative Gaussian noise of relative size
/// `rel_noise`, reproducible from `seed`.
pub fn synthetic_flux(
    model: GainModel,
    a: f64,
    b: f64,
    powers_mw: &[f64],
    rel_noise: f64,
    seed: u64,
) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    powers_mw
        .iter()
        .map(|&p| {
            let e: f64 = StandardNormal.sample(&mut rng);
            model.value(a, b, p) * (1.0 + rel_noise * e)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn log_helpers_are_stable() {
        for x in [1e-3f64, 0.5, 5.0, 25.0, 29.9, 30.1, 100.0, 700.0] {
            let want = if x < 300.0 { x.exp_m1().ln() } else { x };
            assert_relative_eq!(ln_expm1(x), want, max_relative = 1e-12);
        }
        for x in [1e-3f64, 1.0, 19.9, 20.1, 50.0] {
            assert_relative_eq!(ln_sinh(x), x.sinh().ln(), max_relative = 1e-12);
        }
        assert!(ln_sinh(1000.0).is_finite());
    }

    #[test]
    fn nelder_mead_finds_rosenbrock_minimum() {
        let f = |x: [f64; 2]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let (x, v, ok) = nelder_mead(&f, [-1.2, 1.0], 0.5, 20_000);
        assert!(ok);
        assert!(v < 1e-12);
        assert!((x[0] - 1.0).abs() < 1e-5 && (x[1] - 1.0).abs() < 1e-5);
    }

    #[test]
    fn exact_rosenbluth_data_recovered() {
        let p: Vec<f64> = (1..=10).map(|k| 1.5 * k as f64).collect();
        let y: Vec<f64> = p
            .iter()
            .map(|&p| GainModel::Rosenbluth.value(0.76, 1.2, p))
            .collect();
        let fit = fit_gain_model(&p, &y, GainModel::Rosenbluth).unwrap();
        assert_relative_eq!(fit.a, 0.76, max_relative = 1e-6);
        assert_relative_eq!(fit.b, 1.2, max_relative = 1e-7);
        assert!(fit.residual_norm < 1e-8);
        assert!(fit.physical);
        assert_relative_eq!(
            gain_exponent(&fit, 15.0).unwrap(),
            18.0,
            max_relative = 1e-7
        );
    }

    #[test]
    fn homogeneous_fit_has_no_exponent() {
        let p: Vec<f64> = (1..=6).map(f64::from).collect();
        let y: Vec<f64> = p
            .iter()
            .map(|&p| GainModel::Homogeneous.value(1.0, 2.0, p))
            .collect();
        let fit = fit_gain_model(&p, &y, GainModel::Homogeneous).unwrap();
        assert_relative_eq!(fit.b, 2.0, max_relative = 1e-6);
        assert!(matches!(
            gain_exponent(&fit, 1.0),
            Err(Error::WrongModel { .. })
        ));
    }

    #[test]
    fn too_few_points() {
        let r = fit_gain_model(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0], GainModel::Rosenbluth);
        assert!(matches!(r, Err(Error::TooFewSamples { needed: 4, got: 3 })));
    }

    #[test]
    fn log_linear_fit_of_exact_exponential() {
        let p = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = p.iter().map(|&p: &f64| 2.0 * (0.5 * p).exp()).collect();
        let l = log_linear_fit(&p, &y).unwrap();
        assert_relative_eq!(l.slope, 0.5, max_relative = 1e-12);
        assert_relative_eq!(l.intercept, 2f64.ln(), max_relative = 1e-12);
        assert_relative_eq!(l.r_squared, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn band_flux_of_constant() {
        let d: Vec<f64> = (0..11)
            .map(|k| crate::dispersion::thz_to_rad_per_s(k as f64))
            .collect();
        assert_relative_eq!(band_flux(&d, &[2.0; 11]), 20.0, max_relative = 1e-12);
    }
}
