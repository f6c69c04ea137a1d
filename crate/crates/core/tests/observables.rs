//! Observables against a truncated Fock-space calculation and closed forms.

use approx::assert_relative_eq;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use pdc_core::bogolyubov::coupling_from_nu0;
use pdc_core::dispersion::thz_to_rad_per_s;
use pdc_core::observables::{
    bandwidth, covariance_map, mode_ratio, peak_metrics, sample_pulse_ensemble, sfg_trace,
    sfg_trace_fft, spectrum, BandwidthMethod, SamplingEngine, SpectrometerBins,
};
use pdc_core::{
    solve_detunings, BogoliubovField, Crystal, DetuningGrid, Error, GratingProfile,
    IntegrationOptions,
};

/// A field made of independent conjugate pairs (Ω_k, N̄_k), with B carrying
/// an arbitrary phase.
fn pairs_field(pairs: &[(f64, f64)]) -> BogoliubovField {
    let crystal = Crystal::reference_design();
    let mut field = BogoliubovField {
        detunings: Vec::new(),
        a: Vec::new(),
        b: Vec::new(),
        mismatch: Vec::new(),
        coupling: Complex64::new(0.0, 0.0),
        crystal: crystal.clone(),
        options: IntegrationOptions::default(),
    };
    for (k, &(thz, n)) in pairs.iter().enumerate() {
        let omega = thz_to_rad_per_s(thz);
        let b = Complex64::from_polar(n.sqrt(), 0.7 + k as f64);
        for w in [omega, -omega] {
            field.detunings.push(w);
            field.a.push(Complex64::new((1.0 + n).sqrt(), 0.0));
            field.b.push(b);
            field.mismatch.push(crystal.mismatch(w).unwrap());
        }
    }
    field
}

/// ⟨n_s⟩, Var n_s and Cov(n_s, n_i) of exp(r(a b − a†b†))|0,0⟩, with the
/// squeezing operator exponentiated on a truncated two-mode Fock space.
fn fock_moments(mean: f64, cutoff: usize) -> (f64, f64, f64) {
    let r = mean.sqrt().asinh();
    let dim = cutoff * cutoff;
    let idx = |n: usize, m: usize| n * cutoff + m;
    let mut gen = DMatrix::<f64>::zeros(dim, dim);
    for n in 0..cutoff - 1 {
        for m in 0..cutoff - 1 {
            // a†b† |n,m⟩ = √((n+1)(m+1)) |n+1,m+1⟩
            let c = ((n + 1) as f64 * (m + 1) as f64).sqrt();
            gen[(idx(n + 1, m + 1), idx(n, m))] -= r * c;
            gen[(idx(n, m), idx(n + 1, m + 1))] += r * c;
        }
    }
    let mut vacuum = DVector::<f64>::zeros(dim);
    vacuum[0] = 1.0;
    let psi = gen.exp() * vacuum;
    let (mut ns, mut ns2, mut nsni) = (0.0, 0.0, 0.0);
    for n in 0..cutoff {
        for m in 0..cutoff {
            let p = psi[idx(n, m)].powi(2);
            ns += p * n as f64;
            ns2 += p * (n * n) as f64;
            nsni += p * (n * m) as f64;
        }
    }
    (ns, ns2 - ns * ns, nsni - ns * ns)
}

fn moments(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let vx = x.iter().map(|a| (a - mx).powi(2)).sum::<f64>() / (n - 1.0);
    let c = x
        .iter()
        .zip(y)
        .map(|(a, b)| (a - mx) * (b - my))
        .sum::<f64>()
        / (n - 1.0);
    (mx, vx, c)
}

fn single_bin_counts(
    field: &BogoliubovField,
    pulses: usize,
    eff: f64,
    engine: SamplingEngine,
) -> (Vec<f64>, Vec<f64>) {
    let bins = SpectrometerBins::uniform(99.5, 100.5, 1.0).unwrap();
    let e = sample_pulse_ensemble(field, &bins, pulses, eff, 7, engine).unwrap();
    (e.signal, e.idler)
}

#[test]
fn fock_space_reference_is_thermal() {
    let (m, v, c) = fock_moments(0.5, 24);
    assert_relative_eq!(m, 0.5, max_relative = 1e-8);
    assert_relative_eq!(v, 0.5 * 1.5, max_relative = 1e-7);
    assert_relative_eq!(c, 0.5 * 1.5, max_relative = 1e-7);
}

#[test]
fn photon_number_sampler_matches_fock_moments() {
    for mean in [0.1, 1.0] {
        let (m, v, c) = fock_moments(mean, 24);
        let field = pairs_field(&[(100.0, mean)]);
        let n = 40_000;
        let (s, i) = single_bin_counts(&field, n, 1.0, SamplingEngine::PhotonNumber);
        let (ms, vs, cs) = moments(&s, &i);
        // Thermal statistics: standard errors from the fourth moments.
        let se_mean = (v / n as f64).sqrt();
        let se_var = ((2.0 * m + 1.0) * v * 3.0 / n as f64).sqrt() * (v + 1.0).sqrt();
        assert!((ms - m).abs() < 4.0 * se_mean, "mean {ms} vs {m}");
        assert!((vs - v).abs() < 4.0 * se_var, "var {vs} vs {v}");
        assert!((cs - c).abs() < 4.0 * se_var, "cov {cs} vs {c}");
        assert_eq!(s, i, "lossless pairs are perfectly matched");
    }
}

#[test]
fn loss_thins_counts() {
    let mean = 2.0;
    let eff = 0.4;
    let field = pairs_field(&[(100.0, mean)]);
    let n = 40_000;
    let (s, i) = single_bin_counts(&field, n, eff, SamplingEngine::PhotonNumber);
    let (ms, vs, cs) = moments(&s, &i);
    let m = eff * mean;
    let scale = (m * (m + 1.0) / n as f64).sqrt();
    assert!((ms - m).abs() < 4.0 * scale);
    assert!((vs - m * (1.0 + m)).abs() < 40.0 * scale);
    assert!((cs - eff * eff * mean * (mean + 1.0)).abs() < 40.0 * scale);
}

#[test]
fn phase_space_sampler_reproduces_mean_and_covariance() {
    let mean = 1.0;
    let (m, _, c) = fock_moments(mean, 24);
    let field = pairs_field(&[(100.0, mean)]);
    let n = 40_000;
    let (s, i) = single_bin_counts(&field, n, 1.0, SamplingEngine::PhaseSpace);
    let (ms, _, cs) = moments(&s, &i);
    let scale = (m * (m + 1.0) / n as f64).sqrt();
    assert!((ms - m).abs() < 4.0 * scale, "mean {ms}");
    assert!((cs - c).abs() < 40.0 * scale, "cov {cs} vs {c}");
}

#[test]
fn vacuum_gives_no_counts() {
    let field = pairs_field(&[(100.0, 0.0)]);
    let (s, i) = single_bin_counts(&field, 100, 1.0, SamplingEngine::PhotonNumber);
    assert!(s.iter().chain(&i).all(|&x| x == 0.0));
}

#[test]
fn distinct_pairs_are_uncorrelated() {
    let field = pairs_field(&[(100.0, 1.0), (110.0, 1.0)]);
    let bins = SpectrometerBins::uniform(99.5, 110.5, 1.0).unwrap();
    let e =
        sample_pulse_ensemble(&field, &bins, 20_000, 1.0, 3, SamplingEngine::PhotonNumber).unwrap();
    let map = covariance_map(&e).unwrap();
    let scale = (2.0 * 2.0 / 20_000f64).sqrt();
    assert!(map.get(0, 10).abs() < 4.0 * scale);
    assert!(map.get(10, 0).abs() < 4.0 * scale);
    assert!((map.get(0, 0) - 2.0).abs() < 20.0 * scale);
    assert!(map.pearson(0, 0) > 0.999);
}

#[test]
fn one_pair_per_bin_gives_unresolved_stripe() {
    let pairs: Vec<(f64, f64)> = (0..9).map(|k| (100.0 + k as f64, 0.5)).collect();
    let field = pairs_field(&pairs);
    let bins = SpectrometerBins::uniform(99.5, 108.5, 1.0).unwrap();
    let e =
        sample_pulse_ensemble(&field, &bins, 4_000, 1.0, 11, SamplingEngine::PhotonNumber).unwrap();
    let r = mode_ratio(&covariance_map(&e).unwrap(), BandwidthMethod::FwhmOuter).unwrap();
    assert!(r.lower_bound);
    assert_eq!(r.correlation_width_thz, 1.0);
    assert!(r.total_width_thz > 7.0 && r.total_width_thz < 10.0, "{r:?}");
}

#[test]
fn mismatched_conjugates_are_rejected() {
    let mut field = pairs_field(&[(100.0, 1.0)]);
    field.b[1] *= 1.01;
    let bins = SpectrometerBins::uniform(99.5, 100.5, 1.0).unwrap();
    let err =
        sample_pulse_ensemble(&field, &bins, 10, 1.0, 0, SamplingEngine::PhotonNumber).unwrap_err();
    assert!(matches!(err, Error::ConjugateMismatch { .. }));
    assert!(matches!(
        sfg_trace(&field, &[0.0], None),
        Err(Error::ConjugateMismatch { .. })
    ));
}

/// One mode: the coherent term 4|A B|² is delay independent and the
/// background is 8|B|⁴.
#[test]
fn single_mode_sfg_is_flat() {
    let n = 3.0;
    let field = pairs_field(&[(100.0, n)]);
    let delays: Vec<f64> = (-5..=5).map(|k| k as f64 * 1e4).collect();
    let t = sfg_trace(&field, &delays, None).unwrap();
    assert_relative_eq!(t.background_level, 8.0 * n * n, max_relative = 1e-12);
    for k in 0..delays.len() {
        assert_relative_eq!(t.coherent[k], 4.0 * n * (n + 1.0), max_relative = 1e-12);
        assert_relative_eq!(
            t.intensity[k],
            t.coherent[k] + t.background[k],
            max_relative = 1e-15
        );
    }
}

#[test]
fn finite_pulse_shrinks_background() {
    let field = pairs_field(&[(100.0, 1.0)]);
    let fwhm_ps = 1.0;
    let t = sfg_trace(&field, &[0.0, 500.0, 1000.0], Some(fwhm_ps)).unwrap();
    assert_relative_eq!(t.background[0], t.background_level, max_relative = 1e-15);
    // Overlap FWHM is √2·T: half maximum at τ = T/√2.
    let at = |tau: f64| (-2.0 * std::f64::consts::LN_2 * (tau / 1000.0f64).powi(2)).exp();
    assert_relative_eq!(
        t.background[1] / t.background_level,
        at(500.0),
        max_relative = 1e-12
    );
    assert_relative_eq!(
        t.background[2] / t.background_level,
        0.25,
        max_relative = 1e-12
    );
}

fn chirped_field(points: usize) -> BogoliubovField {
    let crystal = Crystal::reference_design();
    let g = coupling_from_nu0(0.1, &GratingProfile::reference_design()).unwrap();
    let grid = DetuningGrid::new(40.0, 160.0, points).detunings();
    solve_detunings(
        &grid,
        Complex64::new(g, 0.0),
        &IntegrationOptions::default(),
        &crystal,
    )
    .unwrap()
}

#[test]
fn delays_beyond_grid_resolution_are_rejected() {
    let field = chirped_field(121); // δν = 1 THz, limit 500 fs
    assert!(sfg_trace(&field, &[-499.0, 499.0], None).is_ok());
    match sfg_trace(&field, &[0.0, 501.0], None) {
        Err(Error::Aliasing { tau_fs, limit_fs }) => {
            assert_eq!(tau_fs, 501.0);
            assert_relative_eq!(limit_fs, 500.0, max_relative = 1e-9);
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn fft_and_quadrature_traces_agree() {
    let field = chirped_field(481);
    let fft = sfg_trace_fft(&field, 2048, None).unwrap();
    let direct = sfg_trace(&field, &fft.delays_fs, None).unwrap();
    let peak = direct.coherent.iter().cloned().fold(0.0, f64::max);
    for (a, b) in fft.coherent.iter().zip(&direct.coherent) {
        assert!((a - b).abs() < 1e-9 * peak);
    }
    assert_eq!(fft.background_level, direct.background_level);
    let m = peak_metrics(&direct).unwrap();
    assert!(m.peak_delay_fs < 0.0, "{m:?}");
}

#[test]
fn spectrum_is_mirror_symmetric() {
    let crystal = Crystal::reference_design();
    let g = coupling_from_nu0(0.1, &GratingProfile::reference_design()).unwrap();
    let grid = DetuningGrid::new(-160.0, 160.0, 161).detunings();
    let field = solve_detunings(
        &grid,
        Complex64::new(g, 0.0),
        &IntegrationOptions::default(),
        &crystal,
    )
    .unwrap();
    let s = spectrum(&field);
    let n = s.len();
    for k in 0..n {
        assert_eq!(s.values[k], s.values[n - 1 - k]);
    }
    let full = bandwidth(&s.signal_branch(), BandwidthMethod::Rms).unwrap();
    assert!(full > 30.0 && full < 50.0, "{full}");
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| {
                let field = chirped_field(61);
                let mirrored = {
                    let mut f = field.clone();
                    for k in 0..field.len() {
                        f.detunings.push(-field.detunings[k]);
                        f.a.push(field.a[k]);
                        f.b.push(field.b[k]);
                        f.mismatch.push(field.mismatch[k]);
                    }
                    f
                };
                let bins = SpectrometerBins::uniform(40.0, 160.0, 2.0).unwrap();
                let e = sample_pulse_ensemble(
                    &mirrored,
                    &bins,
                    500,
                    0.8,
                    5,
                    SamplingEngine::PhotonNumber,
                )
                .unwrap();
                let t = sfg_trace(&field, &[-100.0, 0.0, 100.0], None).unwrap();
                let cov = covariance_map(&e).unwrap().cov;
                (field.b, e.signal, e.idler, cov, t.intensity)
            })
    };
    assert_eq!(run(1), run(4));
}
