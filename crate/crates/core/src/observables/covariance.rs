use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::ensemble::PulseEnsemble;
use super::spectrum::{nearest_crossings, width, BandwidthMethod};
use crate::error::{Error, Result};

/// Signal × idler covariance of the binned counts.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMap {
    /// Bin centres, THz of detuning |Ω|.
    pub centres_thz: Vec<f64>,
    pub bin_widths_thz: Vec<f64>,
    /// Row-major: cov[i * n + j] = Cov(N_s[i], N_i[j]).
    pub cov: Vec<f64>,
    pub mean_signal: Vec<f64>,
    pub mean_idler: Vec<f64>,
    pub var_signal: Vec<f64>,
    pub var_idler: Vec<f64>,
    pub n_pulses: usize,
}

impl CovarianceMap {
    pub fn n_bins(&self) -> usize {
        self.centres_thz.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.cov[i * self.n_bins() + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.n_bins();
        &self.cov[i * n..(i + 1) * n]
    }

    pub fn pearson(&self, i: usize, j: usize) -> f64 {
        self.get(i, j) / (self.var_signal[i] * self.var_idler[j]).sqrt()
    }

    /// Fraction of Σ|cov| within `half_width` bins of the anti-diagonal
    /// stripe ω_s + ω_i = 2ω₀, i.e. of the diagonal in bin-index space.
    ///
    /// Entries smaller than `noise_sigmas` times their sampling error
    /// √(Var_s Var_i / n) are treated as zero; with `noise_sigmas = 0` every
    /// entry counts.
    pub fn stripe_mass_fraction(&self, half_width: usize, noise_sigmas: f64) -> f64 {
        let n = self.n_bins();
        let scale = (self.n_pulses as f64).sqrt();
        let mut inside = 0.0;
        let mut total = 0.0;
        for i in 0..n {
            for j in 0..n {
                let c = self.get(i, j).abs();
                let noise = (self.var_signal[i] * self.var_idler[j]).sqrt() / scale;
                if c < noise_sigmas * noise {
                    continue;
                }
                total += c;
                if i.abs_diff(j) <= half_width {
                    inside += c;
                }
            }
        }
        inside / total
    }
}

fn column_means(data: &[f64], n_pulses: usize, n_bins: usize) -> Vec<f64> {
    let mut m = vec![0.0; n_bins];
    for p in 0..n_pulses {
        for (k, v) in data[p * n_bins..(p + 1) * n_bins].iter().enumerate() {
            m[k] += v;
        }
    }
    m.iter_mut().for_each(|v| *v /= n_pulses as f64);
    m
}

/// Unbiased sample covariance, two-pass. Rows are computed in parallel but
/// each entry is a fixed-order sum, so the map is bit-reproducible.
pub fn covariance_map(ensemble: &PulseEnsemble) -> Result<CovarianceMap> {
    let (np, nb) = (ensemble.n_pulses, ensemble.n_bins());
    if np < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: np });
    }
    let ms = column_means(&ensemble.signal, np, nb);
    let mi = column_means(&ensemble.idler, np, nb);
    let denom = (np - 1) as f64;

    let rows: Vec<Vec<f64>> = (0..nb)
        .into_par_iter()
        .map(|i| {
            let mut row = vec![0.0; nb];
            for p in 0..np {
                let ds = ensemble.signal[p * nb + i] - ms[i];
                for (j, r) in row.iter_mut().enumerate() {
                    *r += ds * (ensemble.idler[p * nb + j] - mi[j]);
                }
            }
            row.iter_mut().for_each(|v| *v /= denom);
            row
        })
        .collect();

    let variance = |data: &[f64], mean: &[f64]| -> Vec<f64> {
        (0..nb)
            .map(|k| {
                (0..np)
                    .map(|p| (data[p * nb + k] - mean[k]).powi(2))
                    .sum::<f64>()
                    / denom
            })
            .collect()
    };
    Ok(CovarianceMap {
        centres_thz: ensemble.bins.centres_thz(),
        bin_widths_thz: ensemble.bins.widths_thz(),
        cov: rows.concat(),
        var_signal: variance(&ensemble.signal, &ms),
        var_idler: variance(&ensemble.idler, &mi),
        mean_signal: ms,
        mean_idler: mi,
        n_pulses: np,
    })
}

/// Bootstrap standard error of Cov(N_s[i], N_i[j]) from `resamples`
/// resamplings of the pulses.
pub fn bootstrap_covariance_se(
    ensemble: &PulseEnsemble,
    i: usize,
    j: usize,
    resamples: usize,
    seed: u64,
) -> Result<f64> {
    let np = ensemble.n_pulses;
    if np < 2 || resamples < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: np.min(resamples),
        });
    }
    let s: Vec<f64> = (0..np).map(|p| ensemble.signal_counts(p)[i]).collect();
    let d: Vec<f64> = (0..np).map(|p| ensemble.idler_counts(p)[j]).collect();
    let estimates: Vec<f64> = (0..resamples)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(r as u64);
            let idx: Vec<usize> = (0..np).map(|_| rng.random_range(0..np)).collect();
            let ms = idx.iter().map(|&k| s[k]).sum::<f64>() / np as f64;
            let md = idx.iter().map(|&k| d[k]).sum::<f64>() / np as f64;
            idx.iter().map(|&k| (s[k] - ms) * (d[k] - md)).sum::<f64>() / (np - 1) as f64
        })
        .collect();
    let mean = estimates.iter().sum::<f64>() / resamples as f64;
    let var = estimates.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (resamples - 1) as f64;
    Ok(var.sqrt())
}

/// Total bandwidth over correlation width, an estimate of the number of
/// independent spectral modes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeRatio {
    pub ratio: f64,
    pub total_width_thz: f64,
    pub correlation_width_thz: f64,
    /// The correlation width is not resolved by the bins, so the ratio is a
    /// lower bound on the true value.
    pub lower_bound: bool,
}

/// Δω from the mean signal counts (by `method`); δω as the FWHM of the
/// covariance row through the brightest signal bin.
pub fn mode_ratio(map: &CovarianceMap, method: BandwidthMethod) -> Result<ModeRatio> {
    let n = map.n_bins();
    // Mean counts per THz, so unequal bins do not distort the profile.
    let density: Vec<f64> = map
        .mean_signal
        .iter()
        .zip(&map.bin_widths_thz)
        .map(|(m, w)| m / w)
        .collect();
    let total = width(&map.centres_thz, &density, method)?;

    let peak = (0..n)
        .max_by(|&a, &b| density[a].total_cmp(&density[b]))
        .ok_or(Error::UndefinedBandwidth)?;
    let row = map.row(peak);
    let row_peak = (0..n)
        .max_by(|&a, &b| row[a].total_cmp(&row[b]))
        .ok_or(Error::UndefinedBandwidth)?;
    if !(row[row_peak] > 0.0) {
        return Err(Error::NoPeak(
            "covariance row has no positive maximum".into(),
        ));
    }
    let half = 0.5 * row[row_peak];
    let x = &map.centres_thz;
    let (l, r) = nearest_crossings(x, row, row_peak, half);
    let bin = map.bin_widths_thz[row_peak];
    let lo = l.unwrap_or(x[0]);
    let hi = r.unwrap_or(x[n - 1]);
    // Both neighbours below half maximum: the stripe is one bin wide and the
    // interpolated width only reflects the bin grid.
    let unresolved = (row_peak == 0 || row[row_peak - 1] < half)
        && (row_peak + 1 == n || row[row_peak + 1] < half);
    let (corr, lower_bound) = if unresolved {
        (bin, true)
    } else {
        (hi - lo, false)
    };
    Ok(ModeRatio {
        ratio: total / corr,
        total_width_thz: total,
        correlation_width_thz: corr,
        lower_bound,
    })
}
