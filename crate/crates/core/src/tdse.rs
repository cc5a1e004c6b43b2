//! Real-time evolution of a single particle in the driven lattice, band and
//! diffraction-peak readouts and the double-quench protocol.
//!
//! Stroboscopic samples reuse the one-period propagator of
//! [`crate::floquet`], built from the same substeps, so `psi(nu T)` equals
//! `U(T)^nu psi0` up to rounding. Intra-period samples step through the same
//! substep grid.

use nalgebra::DVector;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::floquet::{column_weights, IntegratorSettings};
use crate::lattice::{bloch_bands, BlochSpectrum, PlaneWaveBasis};
use crate::propagate::{SplitComplex, SubstepIntegrator};
use crate::units::{DriveParams, PhysicalUnits};

/// Which times a trajectory is sampled at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum SampleSpec {
    /// `t = nu T` for every whole period up to `t_final`.
    Stroboscopic,
    /// `count` equally spaced times from `0` to `t_final` inclusive.
    Uniform { count: usize },
    /// Every substep boundary up to `t_final`.
    PerSubstep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleMode {
    Stroboscopic,
    Uniform,
    PerSubstep,
    /// Produced by boxcar averaging.
    Binned,
    /// Read from an external file.
    External,
}

/// Which readouts are recorded at each sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservableSpec {
    /// Bands `0 ..= b_max` are recorded as `f0, band_1, ...`.
    pub b_max: usize,
    /// Diffraction orders `|m| = 0 ..= peak_max` are recorded as `peak_k`.
    pub peak_max: usize,
}

impl Default for ObservableSpec {
    fn default() -> Self {
        Self { b_max: 12, peak_max: 4 }
    }
}

impl ObservableSpec {
    pub fn band_names(&self) -> Vec<String> {
        (0..=self.b_max).map(band_channel).collect()
    }

    pub fn peak_names(&self) -> Vec<String> {
        (0..=self.peak_max).map(|k| format!("peak_{k}")).collect()
    }
}

/// Channel name of band `b`: `f0` for the ground band, `band_b` otherwise.
pub fn band_channel(b: usize) -> String {
    if b == 0 {
        "f0".into()
    } else {
        format!("band_{b}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesChannel {
    pub name: String,
    pub values: Vec<f64>,
}

/// Sampled times with named real channels of equal length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    /// Sample times in ħ/E_R.
    pub times: Vec<f64>,
    pub mode: SampleMode,
    pub channels: Vec<SeriesChannel>,
    /// Samples per point after binning.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bin_counts: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drive: Option<DriveParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basis: Option<PlaneWaveBasis>,
}

impl TimeSeries {
    pub fn new(times: Vec<f64>, mode: SampleMode) -> Self {
        Self { times, mode, channels: Vec::new(), bin_counts: None, drive: None, basis: None }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn channel(&self, name: &str) -> Option<&[f64]> {
        self.channels.iter().find(|c| c.name == name).map(|c| c.values.as_slice())
    }

    pub fn channel_names(&self) -> Vec<&str> {
        self.channels.iter().map(|c| c.name.as_str()).collect()
    }

    pub fn push_channel(&mut self, name: impl Into<String>, values: Vec<f64>) -> Result<()> {
        if values.len() != self.times.len() {
            return Err(Error::DimensionMismatch { expected: self.times.len(), actual: values.len() });
        }
        self.channels.push(SeriesChannel { name: name.into(), values });
        Ok(())
    }

    pub fn times_us(&self, units: &PhysicalUnits) -> Vec<f64> {
        self.times.iter().map(|&t| units.to_microseconds(t)).collect()
    }
}

/// `|<phi_b|psi>|^2` for `b = 0 ..= b_max`.
pub fn band_populations(psi: &DVector<Complex64>, bands: &BlochSpectrum, b_max: usize) -> Result<Vec<f64>> {
    if psi.len() != bands.dim() {
        return Err(Error::DimensionMismatch { expected: bands.dim(), actual: psi.len() });
    }
    if b_max >= bands.dim() {
        return Err(Error::TruncationTooSmall { band: b_max, dim: bands.dim() });
    }
    Ok(column_weights(&bands.states.columns(0, b_max + 1).into_owned(), psi))
}

/// Plane-wave weight grouped by diffraction order `|m|`, for `|m| = 0 ..= peak_max`.
///
/// A sudden lattice switch-off leaves the momentum distribution unchanged,
/// so the peak populations are read directly from the plane-wave amplitudes.
pub fn momentum_peak_populations(psi: &DVector<Complex64>, basis: &PlaneWaveBasis, peak_max: usize) -> Result<Vec<f64>> {
    if psi.len() != basis.dim() {
        return Err(Error::DimensionMismatch { expected: basis.dim(), actual: psi.len() });
    }
    let mut peaks = vec![0.0; peak_max + 1];
    for (i, z) in psi.iter().enumerate() {
        let k = basis.m_of(i).unsigned_abs() as usize;
        if k <= peak_max {
            peaks[k] += z.norm_sqr();
        }
    }
    Ok(peaks)
}

/// Position on the substep grid: period index, substep index and offset
/// into the substep.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Clock {
    period: u64,
    substep: usize,
    offset: f64,
}

/// State vector carried forward through the drive.
pub struct Evolver {
    integ: SubstepIntegrator,
    period_blocks: Vec<SplitComplex>,
    state: Vec<SplitComplex>,
    clock: Clock,
}

impl Evolver {
    pub fn new(
        psi0: &DVector<Complex64>,
        drive: &DriveParams,
        basis: &PlaneWaveBasis,
        settings: &IntegratorSettings,
    ) -> Result<Self> {
        if psi0.len() != basis.dim() {
            return Err(Error::DimensionMismatch { expected: basis.dim(), actual: psi0.len() });
        }
        let norm = psi0.norm();
        if !norm.is_finite() || (norm - 1.0).abs() > 1e-8 {
            return Err(Error::invalid(format!("initial state must be normalized, |psi0| = {norm}")));
        }
        let steps = settings.steps_for(drive, basis);
        if steps == 0 {
            return Err(Error::invalid("need at least one substep per period"));
        }
        if let Some(tol) = settings.convergence_tol {
            // Fails early with the same diagnostics as the Floquet engine.
            crate::floquet::checked_propagator(drive, basis, &IntegratorSettings { convergence_tol: Some(tol), ..*settings })?;
        }
        let integ = SubstepIntegrator::new(*drive, *basis, steps, settings.scheme);
        let period_blocks = integ.period_sector_unitaries();
        let state = integ.split_state(psi0);
        Ok(Self { integ, period_blocks, state, clock: Clock { period: 0, substep: 0, offset: 0.0 } })
    }

    pub fn steps_per_period(&self) -> usize {
        self.integ.steps
    }

    pub fn substep_length(&self) -> f64 {
        self.integ.dt()
    }

    pub fn time(&self) -> f64 {
        let c = self.clock;
        c.period as f64 * self.integ.drive.period() + c.substep as f64 * self.integ.dt() + c.offset
    }

    pub fn state(&self) -> DVector<Complex64> {
        self.integ.join_state(&self.state)
    }

    fn clock_at(&self, t: f64) -> Clock {
        let period = self.integ.drive.period();
        let dt = self.integ.dt();
        let snap = 1e-9 * dt;
        let mut nu = (t / period).floor().max(0.0) as u64;
        let mut r = t - nu as f64 * period;
        if r < 0.0 {
            r = 0.0;
        }
        let mut k = (r / dt).floor() as usize;
        let mut offset = r - k as f64 * dt;
        if offset < snap {
            offset = 0.0;
        } else if dt - offset < snap {
            offset = 0.0;
            k += 1;
        }
        if k >= self.integ.steps {
            nu += 1;
            k = 0;
            offset = 0.0;
        }
        Clock { period: nu, substep: k, offset }
    }

    fn partial(&mut self, substep: usize, from: f64, to: f64) {
        let t0 = substep as f64 * self.integ.dt();
        for (s, part) in self.state.iter_mut().enumerate() {
            self.integ.substep(s, t0 + from, to - from, part);
        }
    }

    fn full_substep(&mut self) {
        let k = self.clock.substep;
        self.partial(k, 0.0, self.integ.dt());
        self.clock.substep += 1;
        if self.clock.substep == self.integ.steps {
            self.clock.substep = 0;
            self.clock.period += 1;
        }
    }

    /// Applies the cached one-period propagator `n` times. Must be called
    /// on a period boundary.
    fn jump_periods(&mut self, n: u64) {
        debug_assert!(self.clock.substep == 0 && self.clock.offset == 0.0);
        for _ in 0..n {
            for (u, part) in self.period_blocks.iter().zip(self.state.iter_mut()) {
                *part = u.mul(part);
            }
        }
        self.clock.period += n;
    }

    /// Moves forward to time `t` (no-op if `t` is not ahead of the clock).
    pub fn advance_to(&mut self, t: f64) {
        let target = self.clock_at(t);
        let key = |c: &Clock| (c.period, c.substep);
        if key(&target) < key(&self.clock) || (key(&target) == key(&self.clock) && target.offset <= self.clock.offset) {
            return;
        }
        let dt = self.integ.dt();
        if self.clock.offset > 0.0 {
            if key(&target) == key(&self.clock) {
                let k = self.clock.substep;
                self.partial(k, self.clock.offset, target.offset);
                self.clock.offset = target.offset;
                return;
            }
            let k = self.clock.substep;
            self.partial(k, self.clock.offset, dt);
            self.clock.offset = 0.0;
            self.clock.substep += 1;
            if self.clock.substep == self.integ.steps {
                self.clock.substep = 0;
                self.clock.period += 1;
            }
        }
        while key(&self.clock) < key(&target) {
            if self.clock.substep == 0 && self.clock.period < target.period {
                self.jump_periods(target.period - self.clock.period);
            } else {
                self.full_substep();
            }
        }
        if target.offset > 0.0 {
            let k = self.clock.substep;
            self.partial(k, 0.0, target.offset);
            self.clock.offset = target.offset;
        }
    }

    /// Advances `n` whole periods substep by substep, without the cached
    /// propagator. Must be called on a period boundary.
    pub fn step_periods(&mut self, n: u64) {
        for _ in 0..n * self.integ.steps as u64 {
            self.full_substep();
        }
    }
}

/// Evolves `psi` from `t0` to `t1` (either direction) with substeps no
/// longer than the default substep. Integrating backwards applies the
/// adjoint of each forward substep, so a forward and backward pass over the
/// same window cancel to rounding.
pub fn propagate(
    psi: &DVector<Complex64>,
    drive: &DriveParams,
    basis: &PlaneWaveBasis,
    t0: f64,
    t1: f64,
    settings: &IntegratorSettings,
) -> Result<DVector<Complex64>> {
    if psi.len() != basis.dim() {
        return Err(Error::DimensionMismatch { expected: basis.dim(), actual: psi.len() });
    }
    let integ = SubstepIntegrator::new(*drive, *basis, settings.steps_for(drive, basis), settings.scheme);
    let mut parts = integ.split_state(psi);
    for (s, part) in parts.iter_mut().enumerate() {
        integ.advance_interval(s, t0, t1, part);
    }
    Ok(integ.join_state(&parts))
}

fn sample_times(spec: SampleSpec, t_final: f64, period: f64, dt: f64) -> Result<(Vec<f64>, SampleMode)> {
    let last = |step: f64| (t_final / step + 1e-9).floor() as u64;
    Ok(match spec {
        SampleSpec::Stroboscopic => ((0..=last(period)).map(|n| n as f64 * period).collect(), SampleMode::Stroboscopic),
        SampleSpec::PerSubstep => ((0..=last(dt)).map(|n| n as f64 * dt).collect(), SampleMode::PerSubstep),
        SampleSpec::Uniform { count } => {
            if count < 2 {
                return Err(Error::invalid("uniform sampling needs at least two samples"));
            }
            let times = (0..count).map(|i| t_final * i as f64 / (count - 1) as f64).collect();
            (times, SampleMode::Uniform)
        }
    })
}

/// Evolves `psi0` under `drive` and records band populations, diffraction
/// peaks and the norm at the requested times.
pub fn evolve(
    psi0: &DVector<Complex64>,
    drive: &DriveParams,
    basis: &PlaneWaveBasis,
    t_final: f64,
    sample: SampleSpec,
    observables: &ObservableSpec,
    settings: &IntegratorSettings,
) -> Result<TimeSeries> {
    if !(t_final.is_finite() && t_final >= 0.0) {
        return Err(Error::invalid(format!("final time must be >= 0, got {t_final}")));
    }
    let bands = bloch_bands(drive.v0, basis);
    if observables.b_max >= bands.dim() {
        return Err(Error::TruncationTooSmall { band: observables.b_max, dim: bands.dim() });
    }
    let mut ev = Evolver::new(psi0, drive, basis, settings)?;
    let (times, mode) = sample_times(sample, t_final, drive.period(), ev.substep_length())?;

    let band_names = observables.band_names();
    let peak_names = observables.peak_names();
    let mut band_cols = vec![Vec::with_capacity(times.len()); band_names.len()];
    let mut peak_cols = vec![Vec::with_capacity(times.len()); peak_names.len()];
    let mut norms = Vec::with_capacity(times.len());
    for &t in &times {
        ev.advance_to(t);
        let psi = ev.state();
        for (col, v) in band_cols.iter_mut().zip(band_populations(&psi, &bands, observables.b_max)?) {
            col.push(v);
        }
        for (col, v) in peak_cols.iter_mut().zip(momentum_peak_populations(&psi, basis, observables.peak_max)?) {
            col.push(v);
        }
        norms.push(psi.norm());
    }

    let mut series = TimeSeries::new(times, mode);
    series.drive = Some(*drive);
    series.basis = Some(*basis);
    for (name, values) in band_names.into_iter().zip(band_cols).chain(peak_names.into_iter().zip(peak_cols)) {
        series.push_channel(name, values)?;
    }
    series.push_channel("norm", norms)?;
    Ok(series)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Readout {
    /// Ideal band mapping: populations of the static bands.
    BandMap,
    /// Sudden switch-off: diffraction-peak populations.
    SnapOff,
}

/// Drive for a while, quench back to the static lattice, read out.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuenchProtocol {
    /// Modulation time in ħ/E_R.
    pub hold_duration: f64,
    /// Round the hold up to a whole number of periods.
    pub complete_final_cycle: bool,
    pub readout: Readout,
    /// Half-width of the quasimomentum window, in units of k_L; `1.0` is the
    /// full zone and `0.4` its central 40%.
    pub bz_window: f64,
}

impl QuenchProtocol {
    pub fn validate(&self) -> Result<()> {
        if !(self.hold_duration.is_finite() && self.hold_duration >= 0.0) {
            return Err(Error::invalid(format!("hold duration must be >= 0, got {}", self.hold_duration)));
        }
        if !(self.bz_window > 0.0 && self.bz_window <= 1.0) {
            return Err(Error::invalid(format!("zone window must lie in (0, 1], got {}", self.bz_window)));
        }
        Ok(())
    }

    /// Actual hold time for a drive of the given period.
    pub fn effective_hold(&self, period: f64) -> f64 {
        if self.complete_final_cycle {
            (self.hold_duration / period - 1e-9).ceil().max(0.0) * period
        } else {
            self.hold_duration
        }
    }
}

/// Readout fractions after one double quench.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuenchResult {
    pub hold: f64,
    pub readout: Readout,
    /// Band fractions `0 ..= b_max` or peak fractions `0 ..= peak_max`.
    pub fractions: Vec<f64>,
}

pub fn double_quench(
    psi0: &DVector<Complex64>,
    drive: &DriveParams,
    basis: &PlaneWaveBasis,
    protocol: &QuenchProtocol,
    observables: &ObservableSpec,
    settings: &IntegratorSettings,
) -> Result<QuenchResult> {
    protocol.validate()?;
    let hold = protocol.effective_hold(drive.period());
    let mut ev = Evolver::new(psi0, drive, basis, settings)?;
    ev.advance_to(hold);
    let psi = ev.state();
    let fractions = match protocol.readout {
        Readout::BandMap => band_populations(&psi, &bloch_bands(drive.v0, basis), observables.b_max)?,
        Readout::SnapOff => momentum_peak_populations(&psi, basis, observables.peak_max)?,
    };
    Ok(QuenchResult { hold, readout: protocol.readout, fractions })
}

/// Quasimomentum samples `(q, weight)` over the first zone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuasimomentumWeights {
    pub points: Vec<(f64, f64)>,
}

impl QuasimomentumWeights {
    pub fn delta(q: f64) -> Self {
        Self { points: vec![(q, 1.0)] }
    }

    /// `n` equally spaced points on `[-1, 1]`.
    fn grid(n: usize) -> Vec<f64> {
        if n == 1 {
            return vec![0.0];
        }
        (0..n).map(|i| -1.0 + 2.0 * i as f64 / (n - 1) as f64).collect()
    }

    pub fn uniform(n: usize) -> Self {
        Self { points: Self::grid(n).into_iter().map(|q| (q, 1.0)).collect() }
    }

    pub fn gaussian(sigma: f64, n: usize) -> Self {
        Self { points: Self::grid(n).into_iter().map(|q| (q, (-0.5 * (q / sigma).powi(2)).exp())).collect() }
    }
}

/// Weighted average of per-quasimomentum double-quench readouts, using only
/// points with `|q| <= bz_window`. Each `q` starts from its own static
/// ground state.
pub fn bz_averaged_observable(
    drive: &DriveParams,
    protocol: &QuenchProtocol,
    weights: &QuasimomentumWeights,
    m_max: usize,
    observables: &ObservableSpec,
    settings: &IntegratorSettings,
) -> Result<Vec<f64>> {
    protocol.validate()?;
    let selected = window_weights(weights, protocol.bz_window)?;
    let per_q: Vec<Result<Vec<f64>>> = selected
        .par_iter()
        .map(|&(q, _)| {
            let basis = PlaneWaveBasis::new(m_max, q)?;
            let psi0 = bloch_bands(drive.v0, &basis).ground_state();
            Ok(double_quench(&psi0, drive, &basis, protocol, observables, settings)?.fractions)
        })
        .collect();
    let mut acc: Option<Vec<f64>> = None;
    for (&(_, w), r) in selected.iter().zip(per_q) {
        let f = r?;
        let acc = acc.get_or_insert_with(|| vec![0.0; f.len()]);
        for (a, v) in acc.iter_mut().zip(f) {
            *a += w * v;
        }
    }
    Ok(acc.unwrap_or_default())
}

/// Weighted average over quasimomentum of the series from [`evolve`], each
/// `q` starting in its own static ground state. Only points with
/// `|q| <= bz_window` contribute.
#[allow(clippy::too_many_arguments)]
pub fn bz_averaged_series(
    drive: &DriveParams,
    m_max: usize,
    weights: &QuasimomentumWeights,
    bz_window: f64,
    t_final: f64,
    sample: SampleSpec,
    observables: &ObservableSpec,
    settings: &IntegratorSettings,
) -> Result<TimeSeries> {
    let selected = window_weights(weights, bz_window)?;
    let runs: Vec<Result<TimeSeries>> = selected
        .par_iter()
        .map(|&(q, _)| {
            let basis = PlaneWaveBasis::new(m_max, q)?;
            let psi0 = bloch_bands(drive.v0, &basis).ground_state();
            evolve(&psi0, drive, &basis, t_final, sample, observables, settings)
        })
        .collect();
    let mut out: Option<TimeSeries> = None;
    for (&(_, w), run) in selected.iter().zip(runs) {
        let run = run?;
        let acc = out.get_or_insert_with(|| {
            let mut s = TimeSeries::new(run.times.clone(), run.mode);
            s.channels = run.channels.iter().map(|c| SeriesChannel { name: c.name.clone(), values: vec![0.0; c.values.len()] }).collect();
            s.drive = Some(*drive);
            s
        });
        for (a, c) in acc.channels.iter_mut().zip(&run.channels) {
            for (x, v) in a.values.iter_mut().zip(&c.values) {
                *x += w * v;
            }
        }
    }
    out.ok_or_else(|| Error::InsufficientData("no quasimomentum inside the zone window".into()))
}

/// Points with `|q| <= bz_window` and positive weight, renormalized.
fn window_weights(weights: &QuasimomentumWeights, bz_window: f64) -> Result<Vec<(f64, f64)>> {
    if !(bz_window > 0.0 && bz_window <= 1.0) {
        return Err(Error::invalid(format!("zone window must lie in (0, 1], got {bz_window}")));
    }
    let selected: Vec<(f64, f64)> = weights
        .points
        .iter()
        .copied()
        .filter(|&(q, w)| q.abs() <= bz_window + 1e-12 && w > 0.0)
        .collect();
    let total: f64 = selected.iter().map(|p| p.1).sum();
    if selected.is_empty() || !(total > 0.0 && total.is_finite()) {
        return Err(Error::InsufficientData("no positive quasimomentum weight inside the zone window".into()));
    }
    Ok(selected.into_iter().map(|(q, w)| (q, w / total)).collect())
}
