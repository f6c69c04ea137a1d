//! Per-pulse photon counts in spectrometer bins.
//!
//! Every conjugate pair (Ω, −Ω) of a CW-pumped field is an independent
//! two-mode squeezed vacuum. Its joint photon-number distribution is known
//! exactly: both modes carry the same n with P(n) = N̄ⁿ/(N̄+1)ⁿ⁺¹. Detector
//! loss is binomial thinning of each arm. The phase-space engine samples the
//! Wigner function instead and keeps the continuous estimator |β|² − ½.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Geometric, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bogolyubov::BogoliubovField;
use crate::dispersion::{rad_per_s_to_thz, thz_to_rad_per_s};
use crate::error::{Error, Result};

/// Signal-side spectrometer bins, given as increasing detuning edges in THz.
/// Idler counts are binned at the mirror position −Ω, so bin k of either
/// arm covers |Ω| ∈ [edges[k], edges[k+1]).
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrometerBins {
    edges_thz: Vec<f64>,
}

impl SpectrometerBins {
    pub fn from_edges(edges_thz: Vec<f64>) -> Result<Self> {
        if edges_thz.len() < 2 {
            return Err(Error::invalid("spectrometer", "need at least one bin"));
        }
        if edges_thz.iter().any(|e| !e.is_finite() || *e < 0.0) {
            return Err(Error::invalid(
                "spectrometer",
                "edges must be finite and non-negative",
            ));
        }
        if edges_thz.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("spectrometer", "edges must increase"));
        }
        Ok(Self { edges_thz })
    }

    /// Bins of equal width covering [min_thz, max_thz]; the last bin is
    /// stretched to the upper limit if the width does not divide the span.
    pub fn uniform(min_thz: f64, max_thz: f64, width_thz: f64) -> Result<Self> {
        if !(width_thz > 0.0 && max_thz > min_thz) {
            return Err(Error::invalid(
                "spectrometer",
                "need min < max and a positive bin width",
            ));
        }
        let n = ((max_thz - min_thz) / width_thz).round().max(1.0) as usize;
        let edges = (0..=n)
            .map(|k| {
                if k == n {
                    max_thz
                } else {
                    min_thz + width_thz * k as f64
                }
            })
            .collect();
        Self::from_edges(edges)
    }

    pub fn len(&self) -> usize {
        self.edges_thz.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn edges_thz(&self) -> &[f64] {
        &self.edges_thz
    }

    pub fn centres_thz(&self) -> Vec<f64> {
        self.edges_thz
            .windows(2)
            .map(|w| 0.5 * (w[0] + w[1]))
            .collect()
    }

    pub fn widths_thz(&self) -> Vec<f64> {
        self.edges_thz.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Bin containing |Ω| (rad/s).
    pub fn bin_of(&self, detuning: f64) -> Option<usize> {
        let f = rad_per_s_to_thz(detuning.abs());
        let last = *self.edges_thz.last().expect("non-empty");
        if f < self.edges_thz[0] || f > last {
            return None;
        }
        let k = self.edges_thz.partition_point(|&e| e <= f);
        Some(k.saturating_sub(1).min(self.len() - 1))
    }

    /// Bin range in rad/s.
    pub fn span(&self) -> (f64, f64) {
        (
            thz_to_rad_per_s(self.edges_thz[0]),
            thz_to_rad_per_s(*self.edges_thz.last().expect("non-empty")),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingEngine {
    /// Exact joint photon-number statistics of each conjugate pair.
    #[default]
    PhotonNumber,
    /// Gaussian Wigner sampling with the symmetric-ordering correction.
    PhaseSpace,
}

/// Counts of `n_pulses` pulses, stored pulse-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseEnsemble {
    pub bins: SpectrometerBins,
    pub n_pulses: usize,
    pub efficiency: f64,
    pub seed: u64,
    pub engine: SamplingEngine,
    pub signal: Vec<f64>,
    pub idler: Vec<f64>,
}

impl PulseEnsemble {
    pub fn n_bins(&self) -> usize {
        self.bins.len()
    }

    pub fn signal_counts(&self, pulse: usize) -> &[f64] {
        let n = self.n_bins();
        &self.signal[pulse * n..(pulse + 1) * n]
    }

    pub fn idler_counts(&self, pulse: usize) -> &[f64] {
        let n = self.n_bins();
        &self.idler[pulse * n..(pulse + 1) * n]
    }

    /// Sample Pearson correlation between signal bin `i` and idler bin `j`.
    pub fn pearson(&self, i: usize, j: usize) -> f64 {
        let s: Vec<f64> = (0..self.n_pulses)
            .map(|p| self.signal_counts(p)[i])
            .collect();
        let d: Vec<f64> = (0..self.n_pulses)
            .map(|p| self.idler_counts(p)[j])
            .collect();
        pearson(&s, &d)
    }
}

pub(crate) fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx * syy).sqrt()
}

#[derive(Debug, Clone, Copy)]
struct Pair {
    bin: usize,
    a_s: Complex64,
    b_s: Complex64,
    a_i: Complex64,
    b_i: Complex64,
}

fn collect_pairs(field: &BogoliubovField, bins: &SpectrometerBins) -> Result<Vec<Pair>> {
    let conj = field.conjugate_indices()?;
    let mut pairs = Vec::new();
    for i in 0..field.len() {
        let omega = field.detunings[i];
        if omega <= 0.0 {
            continue;
        }
        let Some(bin) = bins.bin_of(omega) else {
            continue;
        };
        let j = conj[i];
        let (plus, minus) = (field.b[i].norm_sqr(), field.b[j].norm_sqr());
        if (plus - minus).abs() > 1e-6 * plus.max(minus) + 1e-12 {
            return Err(Error::ConjugateMismatch {
                detuning_thz: rad_per_s_to_thz(omega),
                plus,
                minus,
            });
        }
        pairs.push(Pair {
            bin,
            a_s: field.a[i],
            b_s: field.b[i],
            a_i: field.a[j],
            b_i: field.b[j],
        });
    }
    if pairs.is_empty() {
        return Err(Error::invalid(
            "spectrometer",
            "no conjugate pair falls inside the bins",
        ));
    }
    Ok(pairs)
}

/// Draws `n_pulses` independent pulses. Pulse p uses its own ChaCha8 stream
/// (seed, p), so the result does not depend on the thread count.
pub fn sample_pulse_ensemble(
    field: &BogoliubovField,
    bins: &SpectrometerBins,
    n_pulses: usize,
    efficiency: f64,
    seed: u64,
    engine: SamplingEngine,
) -> Result<PulseEnsemble> {
    if n_pulses < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: n_pulses,
        });
    }
    if !(efficiency > 0.0 && efficiency <= 1.0) {
        return Err(Error::invalid("ensemble.efficiency", "must lie in (0, 1]"));
    }
    let pairs = collect_pairs(field, bins)?;
    let n_bins = bins.len();

    let pulses: Vec<(Vec<f64>, Vec<f64>)> = (0..n_pulses)
        .into_par_iter()
        .map(|p| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(p as u64);
            let mut s = vec![0.0; n_bins];
            let mut d = vec![0.0; n_bins];
            for pair in &pairs {
                let (ns, ni) = match engine {
                    SamplingEngine::PhotonNumber => photon_number_pair(&mut rng, pair, efficiency),
                    SamplingEngine::PhaseSpace => phase_space_pair(&mut rng, pair, efficiency),
                };
                s[pair.bin] += ns;
                d[pair.bin] += ni;
            }
            (s, d)
        })
        .collect();

    let mut signal = Vec::with_capacity(n_pulses * n_bins);
    let mut idler = Vec::with_capacity(n_pulses * n_bins);
    for (s, d) in pulses {
        signal.extend(s);
        idler.extend(d);
    }
    Ok(PulseEnsemble {
        bins: bins.clone(),
        n_pulses,
        efficiency,
        seed,
        engine,
        signal,
        idler,
    })
}

fn thin<R: Rng>(rng: &mut R, n: u64, efficiency: f64) -> u64 {
    if efficiency >= 1.0 || n == 0 {
        n
    } else {
        Binomial::new(n, efficiency)
            .expect("valid probability")
            .sample(rng)
    }
}

fn photon_number_pair<R: Rng>(rng: &mut R, pair: &Pair, efficiency: f64) -> (f64, f64) {
    let mean = pair.b_s.norm_sqr();
    if mean == 0.0 {
        return (0.0, 0.0);
    }
    let n = Geometric::new(1.0 / (mean + 1.0))
        .expect("valid probability")
        .sample(rng);
    (
        thin(rng, n, efficiency) as f64,
        thin(rng, n, efficiency) as f64,
    )
}

fn vacuum<R: Rng>(rng: &mut R) -> Complex64 {
    let normal = Normal::new(0.0, 0.5).expect("valid sigma");
    Complex64::new(normal.sample(rng), normal.sample(rng))
}

fn phase_space_pair<R: Rng>(rng: &mut R, pair: &Pair, efficiency: f64) -> (f64, f64) {
    let (x, y) = (vacuum(rng), vacuum(rng));
    let mut s = pair.a_s * x + pair.b_s * y.conj();
    let mut i = pair.a_i * y + pair.b_i * x.conj();
    if efficiency < 1.0 {
        let (t, r) = (efficiency.sqrt(), (1.0 - efficiency).sqrt());
        s = s * t + vacuum(rng) * r;
        i = i * t + vacuum(rng) * r;
    }
    (s.norm_sqr() - 0.5, i.norm_sqr() - 0.5)
}
