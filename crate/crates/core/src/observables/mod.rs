//! Quantities derived from a solved field: the spectrum, binned pulse
//! statistics and their covariance, and the SFG delay trace.

mod covariance;
mod ensemble;
mod sfg;
mod spectrum;

pub use covariance::{
    bootstrap_covariance_se, covariance_map, mode_ratio, CovarianceMap, ModeRatio,
};
pub use ensemble::{sample_pulse_ensemble, PulseEnsemble, SamplingEngine, SpectrometerBins};
pub use sfg::{
    peak_metrics, profile_metrics, pulse_overlap, sfg_trace, sfg_trace_fft, PeakMetrics, SfgTrace,
};
pub use spectrum::{
    bandwidth, spectrum, width, BandwidthMethod, Spectrum, GAUSSIAN_FWHM_PER_SIGMA,
};
