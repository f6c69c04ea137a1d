//! The subcommands. Each computes everything in memory and returns the
//! tables, sidecar results and summary pairs; nothing touches disk here.

use std::path::Path;

use num_complex::Complex64;
use pdc_core::bogolyubov::{
    nu0_from_coupling, peak_gain, solve_detunings, solve_grid, solve_one_traced, BogoliubovField,
    Crystal,
};
use pdc_core::dispersion::thz_to_rad_per_s;
use pdc_core::gainfit::{
    calibrate_power_coupling, fit_gain_model, log_linear_fit, simulate_gain_curve, FitResult,
    GainModel,
};
use pdc_core::observables::{
    bandwidth, covariance_map, mode_ratio, peak_metrics, sample_pulse_ensemble, sfg_trace,
    sfg_trace_fft, spectrum, BandwidthMethod,
};
use pdc_core::{Error, Result};
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::output::{format_number, Table};

pub struct Outcome {
    pub tables: Vec<Table>,
    pub results: Value,
    pub summary: Vec<(&'static str, String)>,
}

fn num(v: f64) -> String {
    format_number(v)
}

pub fn design(config: &RunConfig) -> Result<Outcome> {
    let rows = config.grating.design_table(config.design.points)?;
    let (first, last) = (rows[0], rows[rows.len() - 1]);
    let table = Table::new(
        "design.csv",
        &["z_mm", "K_rad_per_mm", "phi_rad"],
        rows.iter().map(|r| r.to_vec()),
    )?;
    Ok(Outcome {
        tables: vec![table],
        results: json!({ "k_start": first[1], "k_end": last[1], "phase_end": last[2] }),
        summary: vec![
            ("points", rows.len().to_string()),
            ("k_start_rad_per_mm", num(first[1])),
            ("k_end_rad_per_mm", num(last[1])),
            ("phase_end_rad", num(last[2])),
        ],
    })
}

fn coupling_summary(g: Complex64, crystal: &Crystal) -> (f64, Option<f64>) {
    (g.norm(), nu0_from_coupling(g.norm(), &crystal.profile).ok())
}

pub fn spectrum_cmd(config: &RunConfig, trajectory_thz: Option<f64>) -> Result<Outcome> {
    let crystal = config.crystal()?;
    let field = solve_grid(&config.solver, &crystal)?;
    let spec = spectrum(&field);
    // Widths and the peak refer to the signal beam; the idler mirrors it.
    let signal = spec.signal_branch();
    let rms = bandwidth(&signal, BandwidthMethod::Rms)?;
    let fwhm = bandwidth(&signal, BandwidthMethod::FwhmOuter)?;
    let chosen = match config.observables.bandwidth_method {
        BandwidthMethod::Rms => rms,
        BandwidthMethod::FwhmOuter => fwhm,
    };
    let (peak_i, peak) = signal
        .values
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
    let peak_thz = signal.detuning_thz()[peak_i];
    let thz = spec.detuning_thz();
    let nm = spec.wavelength_nm();
    let mut tables = vec![Table::new(
        "spectrum.csv",
        &["detuning_THz", "wavelength_nm", "photons_per_mode"],
        (0..spec.len()).map(|i| vec![thz[i], nm[i], spec.values[i]]),
    )?];

    if let Some(f) = trajectory_thz {
        let mut rows = Vec::new();
        solve_one_traced(
            thz_to_rad_per_s(f),
            field.coupling,
            &config.solver.options(),
            &crystal,
            &mut |z, amp| {
                rows.push(vec![z, amp.a.re, amp.a.im, amp.b.re, amp.b.im]);
            },
        )?;
        tables.push(Table::new(
            "trajectory.csv",
            &["z_mm", "re_A", "im_A", "re_B", "im_B"],
            rows,
        )?);
    }

    let (g, nu0) = coupling_summary(field.coupling, &crystal);
    let dev = field.max_invariant_deviation();
    Ok(Outcome {
        tables,
        results: json!({
            "coupling_g_per_mm": g,
            "nu0": nu0,
            "bandwidth_thz": chosen,
            "bandwidth_method": config.observables.bandwidth_method,
            "bandwidth_rms_thz": rms,
            "bandwidth_fwhm_outer_thz": fwhm,
            "peak_photons_per_mode": peak,
            "peak_detuning_thz": peak_thz,
            "peak_gain_exponent": field.peak_gain_exponent(),
            "max_invariant_deviation": dev,
        }),
        summary: vec![
            ("points", spec.len().to_string()),
            ("g_per_mm", num(g)),
            ("nu0", nu0.map_or("nan".into(), num)),
            ("bandwidth_thz", num(chosen)),
            ("bandwidth_rms_thz", num(rms)),
            ("bandwidth_fwhm_outer_thz", num(fwhm)),
            ("peak_photons", num(peak)),
            ("peak_detuning_thz", num(peak_thz)),
            ("max_invariant_deviation", num(dev)),
        ],
    })
}

pub fn covariance_cmd(config: &RunConfig) -> Result<Outcome> {
    let crystal = config.crystal()?;
    let field = solve_grid(&config.solver, &crystal)?;
    let e = &config.observables.ensemble;
    let bins = config.observables.spectrometer.bins()?;
    let ensemble = sample_pulse_ensemble(&field, &bins, e.pulses, e.efficiency, e.seed, e.engine)?;
    let map = covariance_map(&ensemble)?;
    let ratio = mode_ratio(&map, config.observables.bandwidth_method)?;
    let stripe = map.stripe_mass_fraction(0, e.stripe_noise_sigmas);
    let n = map.n_bins();
    let peak = (0..n)
        .max_by(|&a, &b| map.mean_signal[a].total_cmp(&map.mean_signal[b]))
        .expect("bins present");
    let pearson = map.pearson(peak, peak);

    let table = Table::new(
        "covariance.csv",
        &["signal_THz", "idler_THz", "cov", "mean_s", "mean_i"],
        (0..n).flat_map(|i| {
            let map = &map;
            (0..n).map(move |j| {
                vec![
                    map.centres_thz[i],
                    -map.centres_thz[j],
                    map.get(i, j),
                    map.mean_signal[i],
                    map.mean_idler[j],
                ]
            })
        }),
    )?;
    let r_text = if ratio.lower_bound {
        format!(">={}", num(ratio.ratio))
    } else {
        num(ratio.ratio)
    };
    Ok(Outcome {
        tables: vec![table],
        results: json!({
            "mode_ratio": ratio.ratio,
            "mode_ratio_lower_bound": ratio.lower_bound,
            "total_width_thz": ratio.total_width_thz,
            "correlation_width_thz": ratio.correlation_width_thz,
            "bandwidth_method": config.observables.bandwidth_method,
            "stripe_mass_fraction": stripe,
            "peak_bin_thz": map.centres_thz[peak],
            "peak_bin_pearson": pearson,
            "bins": n,
            "engine": e.engine,
            "efficiency": e.efficiency,
        }),
        summary: vec![
            ("pulses", e.pulses.to_string()),
            ("bins", n.to_string()),
            ("R", r_text),
            ("lower_bound", ratio.lower_bound.to_string()),
            ("total_width_thz", num(ratio.total_width_thz)),
            ("correlation_width_thz", num(ratio.correlation_width_thz)),
            ("stripe_mass_fraction", num(stripe)),
            ("peak_bin_pearson", num(pearson)),
        ],
    })
}

fn sfg_field(config: &RunConfig, crystal: &Crystal) -> Result<(BogoliubovField, Complex64)> {
    let s = &config.observables.sfg;
    let spec = s.coupling.unwrap_or(config.solver.coupling);
    let search = match &s.peak_search {
        Some(g) => g.detunings(),
        None => s
            .grid
            .detunings()
            .into_iter()
            .filter(|&x| x > 0.0)
            .collect(),
    };
    let options = config.solver.options();
    let g = spec.resolve(crystal, &options, &search)?;
    let field = solve_detunings(&s.grid.detunings(), g, &options, crystal)?;
    Ok((field, g))
}

pub fn sfg_cmd(config: &RunConfig) -> Result<Outcome> {
    let crystal = config.crystal()?;
    let s = &config.observables.sfg;
    let (field, g) = sfg_field(config, &crystal)?;
    let delays = s.delays.delays();
    let trace = sfg_trace(&field, &delays, s.pulse_fwhm_ps)?;
    let metrics = peak_metrics(&trace)?;
    let edge = trace.coherent[0].max(trace.coherent[trace.coherent.len() - 1]) / metrics.peak_value;

    // Cross-check the quadrature against the FFT on the FFT's own delays.
    let fft = sfg_trace_fft(&field, s.fft_points, s.pulse_fwhm_ps)?;
    let (lo, hi) = (delays[0], delays[delays.len() - 1]);
    let (fd, fc): (Vec<f64>, Vec<f64>) = fft
        .delays_fs
        .iter()
        .zip(&fft.coherent)
        .filter(|(t, _)| **t >= lo && **t <= hi)
        .map(|(t, c)| (*t, *c))
        .unzip();
    let quad = sfg_trace(&field, &fd, s.pulse_fwhm_ps)?;
    let fft_diff = quad
        .coherent
        .iter()
        .zip(&fc)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
        / metrics.peak_value;

    let peak_exponent = peak_gain(
        g,
        &config.solver.options(),
        &crystal,
        &s.peak_search.map_or_else(
            || {
                s.grid
                    .detunings()
                    .into_iter()
                    .filter(|&x| x > 0.0)
                    .collect()
            },
            |p| p.detunings(),
        ),
    )?
    .exponent;

    let columns = ["tau_fs", "intensity", "background"];
    let mut tables = vec![Table::new(
        "sfg.csv",
        &columns,
        (0..trace.delays_fs.len())
            .map(|i| vec![trace.delays_fs[i], trace.intensity[i], trace.background[i]]),
    )?];
    if let Some(c) = &s.coarse {
        let coarse_field =
            solve_detunings(&c.grid.detunings(), g, &config.solver.options(), &crystal)?;
        let t = sfg_trace(&coarse_field, &c.delays.delays(), s.pulse_fwhm_ps)?;
        tables.push(Table::new(
            "sfg_coarse.csv",
            &columns,
            (0..t.delays_fs.len()).map(|i| vec![t.delays_fs[i], t.intensity[i], t.background[i]]),
        )?);
    }

    let (gm, nu0) = coupling_summary(g, &crystal);
    Ok(Outcome {
        tables,
        results: json!({
            "coupling_g_per_mm": gm,
            "nu0": nu0,
            "peak_gain_exponent": peak_exponent,
            "peak_delay_fs": metrics.peak_delay_fs,
            "fwhm_fs": metrics.fwhm_fs,
            "asymmetry": metrics.asymmetry,
            "peak_to_background": metrics.peak_to_background,
            "edge_to_peak": edge,
            "fft_max_relative_difference": fft_diff,
            "background_level": trace.background_level,
        }),
        summary: vec![
            ("g_per_mm", num(gm)),
            ("peak_gain_exponent", num(peak_exponent)),
            ("peak_delay_fs", num(metrics.peak_delay_fs)),
            ("fwhm_fs", num(metrics.fwhm_fs)),
            ("asymmetry", num(metrics.asymmetry)),
            ("peak_to_background", num(metrics.peak_to_background)),
            ("edge_to_peak", num(edge)),
            ("fft_max_rel_diff", num(fft_diff)),
        ],
    })
}

fn fit_json(f: &FitResult) -> Value {
    json!({
        "model": f.model,
        "a": f.a,
        "b": f.b,
        "residual_norm": f.residual_norm,
        "covariance": f.covariance,
        "physical": f.physical,
    })
}

/// Both fits and their curves sampled between the extreme powers.
fn fit_both(
    powers: &[f64],
    flux: &[f64],
    points: usize,
    name: &str,
) -> Result<(FitResult, FitResult, Table)> {
    let r = fit_gain_model(powers, flux, GainModel::Rosenbluth)?;
    let h = fit_gain_model(powers, flux, GainModel::Homogeneous)?;
    let lo = powers.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = powers.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let n = (points - 1) as f64;
    let table = Table::new(
        name,
        &["power_mW", "rosenbluth", "homogeneous"],
        (0..points).map(|k| {
            let p = lo + (hi - lo) * k as f64 / n;
            vec![p, r.model.value(r.a, r.b, p), h.model.value(h.a, h.b, p)]
        }),
    )?;
    Ok((r, h, table))
}

fn preferred(r: &FitResult, h: &FitResult) -> &'static str {
    if r.residual_norm <= h.residual_norm {
        "rosenbluth"
    } else {
        "homogeneous"
    }
}

pub fn gain_scan(config: &RunConfig) -> Result<Outcome> {
    let crystal = config.crystal()?;
    let gcfg = &config.gain;
    let options = config.solver.options();
    let search = gcfg.peak_search.detunings();
    let c = match gcfg.coupling_sq_per_mw {
        Some(c) => c,
        None => calibrate_power_coupling(
            gcfg.target_peak_exponent,
            gcfg.reference_power_mw,
            &options,
            &crystal,
            &search,
        )?,
    };
    let curve = simulate_gain_curve(
        &gcfg.powers_mw,
        c,
        gcfg.band_nm,
        gcfg.band_points,
        &options,
        &crystal,
        Some(&search),
    )?;
    let exps = curve.peak_exponents.clone().expect("search grid given");
    let [wlo, whi] = gcfg.exponent_window;
    let (wp, wf) = curve.window(wlo, whi)?;
    let regression = log_linear_fit(&wp, &wf)?;
    let (r, h, curves) = fit_both(
        &curve.powers_mw,
        &curve.flux,
        gcfg.curve_points,
        "gain_fit_curves.csv",
    )?;

    let table = Table::new(
        "gain_scan.csv",
        &["power_mW", "flux", "peak_exponent"],
        (0..curve.powers_mw.len()).map(|i| vec![curve.powers_mw[i], curve.flux[i], exps[i]]),
    )?;
    let g_ref = r.b * gcfg.reference_power_mw;
    Ok(Outcome {
        tables: vec![table, curves],
        results: json!({
            "coupling_sq_per_mw": c,
            "band_nm": gcfg.band_nm,
            "window": { "exponents": gcfg.exponent_window, "points": wp.len(),
                        "slope": regression.slope, "intercept": regression.intercept,
                        "r_squared": regression.r_squared },
            "rosenbluth": fit_json(&r),
            "homogeneous": fit_json(&h),
            "fitted_exponent_at_reference": g_ref,
            "preferred": preferred(&r, &h),
        }),
        summary: vec![
            ("coupling_sq_per_mw", num(c)),
            ("window_points", wp.len().to_string()),
            ("r_squared", num(regression.r_squared)),
            ("rosenbluth_b", num(r.b)),
            ("rosenbluth_residual", num(r.residual_norm)),
            ("homogeneous_a", num(h.a)),
            ("homogeneous_residual", num(h.residual_norm)),
            ("preferred", preferred(&r, &h).into()),
        ],
    })
}

/// Reads (power, flux) pairs: the `power_mW` and `flux` columns if present,
/// otherwise the first two columns.
pub fn read_gain_csv(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    let bad = |msg: String| Error::Config {
        path: path.display().to_string(),
        message: msg,
    };
    let mut rdr = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let headers = rdr.headers().map_err(|e| bad(e.to_string()))?.clone();
    let find = |name: &str, fallback: usize| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .unwrap_or(fallback)
    };
    let (pi, fi) = (find("power_mW", 0), find("flux", 1));
    if headers.len() < 2 {
        return Err(bad("need at least two columns".into()));
    }
    let mut powers = Vec::new();
    let mut flux = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let parse = |i: usize| -> Result<f64> {
            rec.get(i)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| {
                    bad(format!(
                        "row {}: column {} is not a number",
                        line + 2,
                        i + 1
                    ))
                })
        };
        powers.push(parse(pi)?);
        flux.push(parse(fi)?);
    }
    Ok((powers, flux))
}

pub fn fit_cmd(config: &RunConfig, input: &Path) -> Result<Outcome> {
    let (powers, flux) = read_gain_csv(input)?;
    let (r, h, curves) = fit_both(&powers, &flux, config.gain.curve_points, "fit_curves.csv")?;
    Ok(Outcome {
        tables: vec![curves],
        results: json!({
            "input": input.display().to_string(),
            "points": powers.len(),
            "rosenbluth": fit_json(&r),
            "homogeneous": fit_json(&h),
            "preferred": preferred(&r, &h),
        }),
        summary: vec![
            ("points", powers.len().to_string()),
            ("rosenbluth_a", num(r.a)),
            ("rosenbluth_b", num(r.b)),
            ("rosenbluth_residual", num(r.residual_norm)),
            ("homogeneous_a", num(h.a)),
            ("homogeneous_b", num(h.b)),
            ("homogeneous_residual", num(h.residual_norm)),
            ("preferred", preferred(&r, &h).into()),
        ],
    })
}
