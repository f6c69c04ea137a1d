//! Bogolyubov coefficients A(Ω, L), B(Ω, L) from the coupled-mode system
//!
//! ```text
//! dA/dz  =  i g  B* e^{ iθ(z)}
//! dB*/dz = −i g* A  e^{−iθ(z)},     θ(z) = Δ(Ω) z − ∫₀ᶻ K(z′) dz′
//! ```
//!
//! integrated from the vacuum input A = 1, B = 0 at z = 0. Each detuning is
//! an independent 2×2 problem; grids are solved point by point in parallel
//! and the result does not depend on the worker count.

mod compensated;
mod magnus;
mod runge_kutta;

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dispersion::{
    rad_per_s_to_thz, thz_to_rad_per_s, DispersionModel, InteractionFrequencies,
};
use crate::error::{Error, Result};
use crate::grating::GratingProfile;

/// The physical setup shared by every solve: grating, material, pump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Crystal {
    pub profile: GratingProfile,
    pub dispersion: DispersionModel,
    pub freqs: InteractionFrequencies,
}

impl Crystal {
    pub fn new(
        profile: GratingProfile,
        dispersion: DispersionModel,
        freqs: InteractionFrequencies,
    ) -> Self {
        Self {
            profile,
            dispersion,
            freqs,
        }
    }

    /// Chirped 5 mm design, 5% MgO:CLN at 298.15 K, 532 nm pump.
    pub fn reference_design() -> Self {
        Self::new(
            GratingProfile::reference_design(),
            DispersionModel::default(),
            InteractionFrequencies::default(),
        )
    }

    pub fn with_profile(&self, profile: GratingProfile) -> Self {
        Self {
            profile,
            ..self.clone()
        }
    }

    pub fn mismatch(&self, detuning: f64) -> Result<f64> {
        self.dispersion.mismatch(detuning, &self.freqs)
    }
}

/// Bogolyubov coefficients at the crystal output for one detuning.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Amplitudes {
    pub a: Complex64,
    pub b: Complex64,
}

impl Amplitudes {
    fn from_state(a: Complex64, b_conj: Complex64) -> Self {
        Self {
            a,
            b: b_conj.conj(),
        }
    }

    /// |A|² − |B|² − 1, zero for an exact Bogolyubov transformation.
    pub fn invariant_deviation(&self) -> f64 {
        self.a.norm_sqr() - self.b.norm_sqr() - 1.0
    }

    /// Mean photon number per mode, |B|².
    pub fn photons(&self) -> f64 {
        self.b.norm_sqr()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerance {
    pub relative: f64,
    pub absolute: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            relative: 1e-10,
            absolute: 1e-12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    /// Adaptive sixth-order Magnus with exact SU(1,1) steps.
    #[default]
    Magnus6,
    /// Adaptive Dormand–Prince 5(4) in the original frame.
    DormandPrince45,
    /// Classic RK4 with a fixed number of steps.
    FixedRk4 { steps: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegrationOptions {
    #[serde(default)]
    pub integrator: Integrator,
    #[serde(default)]
    pub tolerance: Tolerance,
    /// Overrides the default 2π/(10·max|Δ−K|) step cap, mm.
    #[serde(default)]
    pub max_step_mm: Option<f64>,
}

impl IntegrationOptions {
    pub fn validate(&self) -> Result<()> {
        let t = self.tolerance;
        if !(t.relative > 0.0
            && t.relative.is_finite()
            && t.absolute > 0.0
            && t.absolute.is_finite())
        {
            return Err(Error::invalid(
                "solver.tolerance",
                "tolerances must be positive",
            ));
        }
        if let Some(s) = self.max_step_mm {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::invalid("solver.max_step_mm", "must be positive"));
            }
        }
        if let Integrator::FixedRk4 { steps: 0 } = self.integrator {
            return Err(Error::invalid(
                "solver.integrator.fixed_rk4.steps",
                "must be positive",
            ));
        }
        Ok(())
    }

    pub fn with_integrator(self, integrator: Integrator) -> Self {
        Self { integrator, ..self }
    }

    pub fn with_relative_tolerance(self, relative: f64) -> Self {
        Self {
            tolerance: Tolerance {
                relative,
                ..self.tolerance
            },
            ..self
        }
    }
}

/// One detuning's ODE: coupling, mismatch and the grating phase.
pub(crate) struct Problem<'a> {
    coupling: Complex64,
    delta: f64,
    profile: &'a GratingProfile,
    length: f64,
    detuning: f64,
    max_mismatch: f64,
}

impl Problem<'_> {
    /// m(z) = i g e^{iθ(z)}.
    #[inline]
    fn generator(&self, z: f64) -> Complex64 {
        let theta = self.delta * z - self.profile.phase_at(z);
        let (s, c) = theta.sin_cos();
        Complex64::new(0.0, 1.0) * self.coupling * Complex64::new(c, s)
    }
}

pub(crate) struct StepControl {
    relative: f64,
    absolute: f64,
    max_step: f64,
    min_step: f64,
}

impl StepControl {
    fn new(options: &IntegrationOptions, problem: &Problem<'_>) -> Self {
        let length = problem.length;
        let max_step = options.max_step_mm.unwrap_or_else(|| {
            if problem.max_mismatch > 0.0 {
                (2.0 * PI / (10.0 * problem.max_mismatch)).max(length * 1e-6)
            } else {
                length
            }
        });
        Self {
            relative: options.tolerance.relative,
            absolute: options.tolerance.absolute,
            max_step: max_step.min(length),
            min_step: length * 1e-13,
        }
    }

    fn initial_step(&self, length: f64) -> f64 {
        self.max_step.min(length * 1e-3)
    }

    fn error_norm(&self, err: &[Complex64], old: &[Complex64], new: &[Complex64]) -> f64 {
        err.iter()
            .zip(old.iter().zip(new))
            .map(|(e, (o, n))| e.norm() / (self.absolute + self.relative * o.norm().max(n.norm())))
            .fold(0.0, f64::max)
    }

    fn next_step(
        &self,
        h: f64,
        err: f64,
        order: i32,
        z: f64,
        problem: &Problem<'_>,
    ) -> Result<f64> {
        let factor = if err == 0.0 {
            5.0
        } else {
            (0.9 * err.powf(-1.0 / f64::from(order + 1))).clamp(0.2, 5.0)
        };
        let next = (h * factor).min(self.max_step);
        if next < self.min_step && z < problem.length {
            return Err(Error::StepUnderflow {
                detuning_thz: rad_per_s_to_thz(problem.detuning),
                z_mm: z,
                step_mm: next,
                max_mismatch: problem.max_mismatch,
            });
        }
        Ok(next)
    }
}

/// Propagates one detuning through the crystal.
pub fn solve_one(
    detuning: f64,
    coupling: Complex64,
    options: &IntegrationOptions,
    crystal: &Crystal,
) -> Result<Amplitudes> {
    solve_one_traced(detuning, coupling, options, crystal, &mut |_, _| {})
}

/// Like [`solve_one`], reporting every accepted step as (z, A(z), B(z)).
pub fn solve_one_traced(
    detuning: f64,
    coupling: Complex64,
    options: &IntegrationOptions,
    crystal: &Crystal,
    observer: &mut dyn FnMut(f64, Amplitudes),
) -> Result<Amplitudes> {
    let delta = crystal.mismatch(detuning)?;
    solve_with_mismatch(
        detuning,
        delta,
        coupling,
        options,
        &crystal.profile,
        observer,
    )
}

fn solve_with_mismatch(
    detuning: f64,
    delta: f64,
    coupling: Complex64,
    options: &IntegrationOptions,
    profile: &GratingProfile,
    observer: &mut dyn FnMut(f64, Amplitudes),
) -> Result<Amplitudes> {
    if coupling == Complex64::new(0.0, 0.0) {
        let out = Amplitudes {
            a: Complex64::new(1.0, 0.0),
            b: Complex64::new(0.0, 0.0),
        };
        observer(0.0, out);
        observer(profile.length, out);
        return Ok(out);
    }
    let problem = Problem {
        coupling,
        delta,
        profile,
        length: profile.length,
        detuning,
        max_mismatch: profile.max_mismatch(delta),
    };
    let control = StepControl::new(options, &problem);
    match options.integrator {
        Integrator::Magnus6 => magnus::integrate(&problem, &control, observer),
        Integrator::DormandPrince45 => runge_kutta::dormand_prince(&problem, &control, observer),
        Integrator::FixedRk4 { steps } => runge_kutta::fixed_rk4(&problem, steps, observer),
    }
}

/// Coefficients over a detuning grid together with the run's provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct BogoliubovField {
    /// Detunings Ω, rad/s.
    pub detunings: Vec<f64>,
    pub a: Vec<Complex64>,
    pub b: Vec<Complex64>,
    /// Δ(Ω) at each detuning, rad/mm.
    pub mismatch: Vec<f64>,
    pub coupling: Complex64,
    pub crystal: Crystal,
    pub options: IntegrationOptions,
}

impl BogoliubovField {
    pub fn len(&self) -> usize {
        self.detunings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.detunings.is_empty()
    }

    pub fn amplitudes(&self, i: usize) -> Amplitudes {
        Amplitudes {
            a: self.a[i],
            b: self.b[i],
        }
    }

    /// max over the grid of ||A|² − |B|² − 1|.
    pub fn max_invariant_deviation(&self) -> f64 {
        (0..self.len())
            .map(|i| self.amplitudes(i).invariant_deviation().abs())
            .fold(0.0, f64::max)
    }

    /// ln max |A|² over the grid: the per-mode gain exponent at the peak.
    pub fn peak_gain_exponent(&self) -> f64 {
        self.a.iter().map(|a| a.norm_sqr()).fold(1.0, f64::max).ln()
    }

    /// Positive-detuning half, sorted by Ω.
    pub fn signal_half(&self) -> BogoliubovField {
        let mut idx: Vec<usize> = (0..self.len())
            .filter(|&i| self.detunings[i] > 0.0)
            .collect();
        idx.sort_by(|&i, &j| self.detunings[i].total_cmp(&self.detunings[j]));
        self.select(&idx)
    }

    pub(crate) fn select(&self, idx: &[usize]) -> BogoliubovField {
        BogoliubovField {
            detunings: idx.iter().map(|&i| self.detunings[i]).collect(),
            a: idx.iter().map(|&i| self.a[i]).collect(),
            b: idx.iter().map(|&i| self.b[i]).collect(),
            mismatch: idx.iter().map(|&i| self.mismatch[i]).collect(),
            coupling: self.coupling,
            crystal: self.crystal.clone(),
            options: self.options,
        }
    }

    /// Index of the −Ω partner of every grid point.
    pub fn conjugate_indices(&self) -> Result<Vec<usize>> {
        let scale = self.detunings.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let tol = scale * 1e-12;
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&i, &j| self.detunings[i].total_cmp(&self.detunings[j]));
        let sorted: Vec<f64> = order.iter().map(|&i| self.detunings[i]).collect();
        (0..self.len())
            .map(|i| {
                let target = -self.detunings[i];
                let pos = sorted.partition_point(|&x| x < target - tol);
                match sorted.get(pos) {
                    Some(&x) if (x - target).abs() <= tol => Ok(order[pos]),
                    _ => Err(Error::AsymmetricGrid {
                        detuning_thz: rad_per_s_to_thz(self.detunings[i]),
                    }),
                }
            })
            .collect()
    }
}

/// Solves every detuning independently. Failures are collected and reported
/// together with the offending detunings.
pub fn solve_detunings(
    detunings: &[f64],
    coupling: Complex64,
    options: &IntegrationOptions,
    crystal: &Crystal,
) -> Result<BogoliubovField> {
    options.validate()?;
    crystal.profile.validate()?;
    let results: Vec<Result<(f64, Amplitudes)>> = detunings
        .par_iter()
        .map(|&omega| {
            let delta = crystal.mismatch(omega)?;
            let amp = solve_with_mismatch(
                omega,
                delta,
                coupling,
                options,
                &crystal.profile,
                &mut |_, _| {},
            )?;
            Ok((delta, amp))
        })
        .collect();

    let mut failures = Vec::new();
    let mut field = BogoliubovField {
        detunings: detunings.to_vec(),
        a: Vec::with_capacity(detunings.len()),
        b: Vec::with_capacity(detunings.len()),
        mismatch: Vec::with_capacity(detunings.len()),
        coupling,
        crystal: crystal.clone(),
        options: *options,
    };
    for (omega, r) in detunings.iter().zip(results) {
        match r {
            Ok((delta, amp)) => {
                field.mismatch.push(delta);
                field.a.push(amp.a);
                field.b.push(amp.b);
            }
            Err(e) => failures.push((rad_per_s_to_thz(*omega), Box::new(e))),
        }
    }
    if failures.is_empty() {
        Ok(field)
    } else {
        Err(Error::GridFailures(failures))
    }
}

/// |g| = √(ν₀·|K(0) − K(L)| / L), real and non-negative.
pub fn coupling_from_nu0(nu0: f64, profile: &GratingProfile) -> Result<f64> {
    if !(nu0 >= 0.0 && nu0.is_finite()) {
        return Err(Error::invalid(
            "solver.coupling.nu0",
            "must be non-negative",
        ));
    }
    let span = profile.k_span();
    if span == 0.0 {
        return Err(Error::ZeroSpan);
    }
    Ok((nu0 * span / profile.length).sqrt())
}

/// ν₀ = |g|²L/|K(0) − K(L)|.
pub fn nu0_from_coupling(coupling: f64, profile: &GratingProfile) -> Result<f64> {
    let span = profile.k_span();
    if span == 0.0 {
        return Err(Error::ZeroSpan);
    }
    Ok(coupling * coupling * profile.length / span)
}

/// Evenly spaced detunings, specified in THz of ordinary frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetuningGrid {
    pub min_thz: f64,
    pub max_thz: f64,
    pub points: usize,
}

impl DetuningGrid {
    pub fn new(min_thz: f64, max_thz: f64, points: usize) -> Self {
        Self {
            min_thz,
            max_thz,
            points,
        }
    }

    pub fn validate(&self, field: &str) -> Result<()> {
        if self.points == 0 {
            return Err(Error::invalid(
                format!("{field}.points"),
                "must be positive",
            ));
        }
        if !(self.min_thz.is_finite() && self.max_thz.is_finite()) {
            return Err(Error::invalid(field, "bounds must be finite"));
        }
        if self.points > 1 && self.min_thz >= self.max_thz {
            return Err(Error::invalid(field, "min_thz must be below max_thz"));
        }
        if self.points == 1 && self.min_thz != self.max_thz {
            return Err(Error::invalid(
                field,
                "a single-point grid needs min_thz == max_thz",
            ));
        }
        Ok(())
    }

    /// Detunings in rad/s. A grid with min = −max is exactly antisymmetric.
    pub fn detunings(&self) -> Vec<f64> {
        let lo = thz_to_rad_per_s(self.min_thz);
        let hi = thz_to_rad_per_s(self.max_thz);
        if self.points == 1 {
            return vec![lo];
        }
        let n = (self.points - 1) as f64;
        (0..self.points)
            .map(|i| {
                let t = i as f64;
                (lo * (n - t) + hi * t) / n
            })
            .collect()
    }
}

/// How the coupling g is fixed for a run. Exactly one source must be set.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingSpec {
    /// Amplification coefficient ν₀ = |g|²L/|K(0) − K(L)|.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu0: Option<f64>,
    /// |g| in mm⁻¹.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<f64>,
    /// Target per-mode peak gain exponent ln max|A|².
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub peak_gain_exponent: Option<f64>,
    /// arg g, rad.
    #[serde(default)]
    pub phase: f64,
}

impl CouplingSpec {
    pub fn nu0(nu0: f64) -> Self {
        Self {
            nu0: Some(nu0),
            ..Self::default()
        }
    }

    pub fn magnitude(g: f64) -> Self {
        Self {
            g: Some(g),
            ..Self::default()
        }
    }

    pub fn peak_gain_exponent(target: f64) -> Self {
        Self {
            peak_gain_exponent: Some(target),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let set = [
            self.nu0.is_some(),
            self.g.is_some(),
            self.peak_gain_exponent.is_some(),
        ]
        .iter()
        .filter(|&&s| s)
        .count();
        if set != 1 {
            return Err(Error::invalid(
                "solver.coupling",
                "exactly one of nu0, g, peak_gain_exponent must be given",
            ));
        }
        if !self.phase.is_finite() {
            return Err(Error::invalid("solver.coupling.phase", "must be finite"));
        }
        if let Some(g) = self.g {
            if !(g >= 0.0 && g.is_finite()) {
                return Err(Error::invalid("solver.coupling.g", "must be non-negative"));
            }
        }
        if let Some(t) = self.peak_gain_exponent {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::invalid(
                    "solver.coupling.peak_gain_exponent",
                    "must be positive",
                ));
            }
        }
        Ok(())
    }

    /// Resolves the complex coupling g. Calibrating to a peak exponent
    /// searches `peak_search` for the maximum gain.
    pub fn resolve(
        &self,
        crystal: &Crystal,
        options: &IntegrationOptions,
        peak_search: &[f64],
    ) -> Result<Complex64> {
        self.validate()?;
        let magnitude = if let Some(nu0) = self.nu0 {
            coupling_from_nu0(nu0, &crystal.profile)?
        } else if let Some(g) = self.g {
            g
        } else {
            let target = self.peak_gain_exponent.expect("validated");
            calibrate_peak_exponent(target, options, crystal, peak_search)?.coupling
        };
        Ok(Complex64::from_polar(magnitude, self.phase))
    }
}

/// Solver section of a run: coupling, detuning grid, integration options.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub coupling: CouplingSpec,
    pub grid: DetuningGrid,
    #[serde(default)]
    pub integrator: Integrator,
    #[serde(default)]
    pub tolerance: Tolerance,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_step_mm: Option<f64>,
    /// Grid searched for the gain maximum when calibrating to a peak
    /// exponent; defaults to the positive half of `grid`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub peak_search: Option<DetuningGrid>,
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        self.coupling.validate()?;
        self.grid.validate("solver.grid")?;
        if let Some(g) = &self.peak_search {
            g.validate("solver.peak_search")?;
        }
        self.options().validate()
    }

    pub fn options(&self) -> IntegrationOptions {
        IntegrationOptions {
            integrator: self.integrator,
            tolerance: self.tolerance,
            max_step_mm: self.max_step_mm,
        }
    }

    pub fn peak_search_detunings(&self) -> Vec<f64> {
        match &self.peak_search {
            Some(g) => g.detunings(),
            None => self
                .grid
                .detunings()
                .into_iter()
                .filter(|&x| x > 0.0)
                .collect(),
        }
    }

    pub fn resolve_coupling(&self, crystal: &Crystal) -> Result<Complex64> {
        self.coupling
            .resolve(crystal, &self.options(), &self.peak_search_detunings())
    }
}

/// Resolves the coupling and solves the configured grid.
pub fn solve_grid(config: &SolverConfig, crystal: &Crystal) -> Result<BogoliubovField> {
    config.validate()?;
    let g = config.resolve_coupling(crystal)?;
    solve_detunings(&config.grid.detunings(), g, &config.options(), crystal)
}

/// Location and value of the gain maximum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainPeak {
    pub detuning: f64,
    /// ln |A|² at the maximum.
    pub exponent: f64,
}

/// Maximises ln|A(Ω)|² over `search`, refining the best grid cell by
/// golden-section search.
pub fn peak_gain(
    coupling: Complex64,
    options: &IntegrationOptions,
    crystal: &Crystal,
    search: &[f64],
) -> Result<GainPeak> {
    if search.is_empty() {
        return Err(Error::invalid("peak_search", "empty search grid"));
    }
    let mut sorted = search.to_vec();
    sorted.sort_by(f64::total_cmp);
    let field = solve_detunings(&sorted, coupling, options, crystal)?;
    let gain = |a: Complex64| a.norm_sqr().ln();
    let (best, _) = field.a.iter().enumerate().map(|(i, a)| (i, gain(*a))).fold(
        (0, f64::NEG_INFINITY),
        |acc, x| if x.1 > acc.1 { x } else { acc },
    );

    let eval =
        |omega: f64| -> Result<f64> { Ok(gain(solve_one(omega, coupling, options, crystal)?.a)) };
    let mut lo = sorted[best.saturating_sub(1)];
    let mut hi = sorted[(best + 1).min(sorted.len() - 1)];
    let mut best_point = GainPeak {
        detuning: sorted[best],
        exponent: gain(field.a[best]),
    };
    if hi > lo {
        const INV_PHI: f64 = 0.618_033_988_749_894_8;
        let mut x1 = hi - INV_PHI * (hi - lo);
        let mut x2 = lo + INV_PHI * (hi - lo);
        let mut f1 = eval(x1)?;
        let mut f2 = eval(x2)?;
        for _ in 0..30 {
            if f1 > f2 {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - INV_PHI * (hi - lo);
                f1 = eval(x1)?;
            } else {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + INV_PHI * (hi - lo);
                f2 = eval(x2)?;
            }
        }
        for (x, f) in [(x1, f1), (x2, f2)] {
            if f > best_point.exponent {
                best_point = GainPeak {
                    detuning: x,
                    exponent: f,
                };
            }
        }
    }
    Ok(best_point)
}

/// Result of calibrating |g| to a target peak exponent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration {
    pub coupling: f64,
    pub peak: GainPeak,
}

/// Finds |g| such that the per-mode peak exponent equals `target`.
pub fn calibrate_peak_exponent(
    target: f64,
    options: &IntegrationOptions,
    crystal: &Crystal,
    search: &[f64],
) -> Result<Calibration> {
    if !(target > 0.0 && target.is_finite()) {
        return Err(Error::invalid("peak_gain_exponent", "must be positive"));
    }
    let exponent_at = |g2: f64| -> Result<GainPeak> {
        peak_gain(Complex64::new(g2.sqrt(), 0.0), options, crystal, search)
    };
    // The exponent grows roughly in proportion to |g|²; iterate on |g|² with
    // a secant seeded by that proportionality.
    let mut x0 = 1.0;
    let mut p0 = exponent_at(x0)?;
    if p0.exponent <= 0.0 {
        return Err(Error::Calibration("no gain on the search grid".into()));
    }
    let mut x1 = x0 * target / p0.exponent;
    let mut p1 = exponent_at(x1)?;
    for _ in 0..40 {
        if (p1.exponent - target).abs() <= 1e-9 * target {
            return Ok(Calibration {
                coupling: x1.sqrt(),
                peak: p1,
            });
        }
        let slope = (p1.exponent - p0.exponent) / (x1 - x0);
        let next = if slope > 0.0 && slope.is_finite() {
            x1 + (target - p1.exponent) / slope
        } else {
            x1 * target / p1.exponent
        };
        let next = next.clamp(0.25 * x1, 4.0 * x1);
        x0 = x1;
        p0 = p1;
        x1 = next;
        p1 = exponent_at(x1)?;
    }
    Err(Error::Calibration(format!(
        "peak exponent {} did not converge to {target}",
        p1.exponent
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn nu0_to_coupling() {
        let p = GratingProfile::reference_design();
        let g = coupling_from_nu0(0.1, &p).unwrap();
        assert_relative_eq!(g * g, 2.75625, max_relative = 1e-14);
        assert_relative_eq!(g, 1.660_20, max_relative = 1e-5);
        assert_eq!(coupling_from_nu0(0.0, &p).unwrap(), 0.0);
        assert_relative_eq!(
            coupling_from_nu0(0.4, &p).unwrap(),
            2.0 * g,
            max_relative = 1e-15
        );
        assert_relative_eq!(nu0_from_coupling(g, &p).unwrap(), 0.1, max_relative = 1e-14);
    }

    #[test]
    fn nu0_needs_a_chirp() {
        let p = GratingProfile::periodic_reference();
        assert!(matches!(coupling_from_nu0(0.1, &p), Err(Error::ZeroSpan)));
    }

    #[test]
    fn zero_coupling_is_identity() {
        let crystal = Crystal::reference_design();
        let amp = solve_one(
            thz_to_rad_per_s(100.0),
            Complex64::new(0.0, 0.0),
            &Default::default(),
            &crystal,
        )
        .unwrap();
        assert_eq!(amp.a, Complex64::new(1.0, 0.0));
        assert_eq!(amp.b, Complex64::new(0.0, 0.0));
    }

    #[test]
    fn symmetric_grid_is_exactly_antisymmetric() {
        let grid = DetuningGrid::new(-160.0, 160.0, 321);
        let d = grid.detunings();
        for i in 0..d.len() {
            assert_eq!(d[i], -d[d.len() - 1 - i]);
        }
        assert_eq!(d[160], 0.0);
    }

    #[test]
    fn coupling_spec_requires_exactly_one_source() {
        assert!(CouplingSpec::default().validate().is_err());
        let both = CouplingSpec {
            nu0: Some(0.1),
            g: Some(1.0),
            ..Default::default()
        };
        assert!(both.validate().is_err());
        assert!(CouplingSpec::nu0(0.1).validate().is_ok());
    }

    #[test]
    fn conjugate_lookup() {
        let crystal = Crystal::reference_design();
        let grid = DetuningGrid::new(-120.0, 120.0, 5).detunings();
        let field = solve_detunings(
            &grid,
            Complex64::new(0.5, 0.0),
            &Default::default(),
            &crystal,
        )
        .unwrap();
        assert_eq!(field.conjugate_indices().unwrap(), vec![4, 3, 2, 1, 0]);

        let lopsided = DetuningGrid::new(-120.0, 130.0, 5).detunings();
        let field = solve_detunings(
            &lopsided,
            Complex64::new(0.5, 0.0),
            &Default::default(),
            &crystal,
        )
        .unwrap();
        assert!(matches!(
            field.conjugate_indices(),
            Err(Error::AsymmetricGrid { .. })
        ));
    }

    #[test]
    fn out_of_range_detunings_are_reported_together() {
        let crystal = Crystal::reference_design();
        let grid = [
            thz_to_rad_per_s(100.0),
            thz_to_rad_per_s(250.0),
            thz_to_rad_per_s(260.0),
        ];
        match solve_detunings(
            &grid,
            Complex64::new(1.0, 0.0),
            &Default::default(),
            &crystal,
        ) {
            Err(Error::GridFailures(f)) => {
                assert_eq!(f.len(), 2);
                assert_relative_eq!(f[0].0, 250.0, max_relative = 1e-12);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn tiny_step_cap_underflows_with_diagnostic() {
        let crystal = Crystal::reference_design();
        let options = IntegrationOptions {
            max_step_mm: Some(1e-14),
            ..Default::default()
        };
        let err = solve_one(
            thz_to_rad_per_s(100.0),
            Complex64::new(1.0, 0.0),
            &options,
            &crystal,
        )
        .unwrap_err();
        assert!(matches!(err, Error::StepUnderflow { .. }));
        assert!(err.to_string().contains("max |Δ−K|"));
    }
}
