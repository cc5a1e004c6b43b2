use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use prethermal_core::analysis::{boxcar, fit_power_law, stroboscopic_average};
use prethermal_core::classical::{stability_map, Boundary};
use prethermal_core::ensembles::{
    pge_coefficients, stroboscopic_band_occupations, pge_map, MapSettings, DEFAULT_ATOM_NUMBER,
};
use prethermal_core::floquet::{floquet_spectrum, ipr, overlaps, participation_ratio};
use prethermal_core::io::{self, Provenance};
use prethermal_core::lattice::{bloch_bands, tunneling_energy, Parity, PlaneWaveBasis};
use prethermal_core::map::{CellFlag, ParameterMap};
use prethermal_core::tdse::{
    bz_averaged_series, evolve as evolve_series, ObservableSpec, QuasimomentumWeights, SampleMode, SampleSpec, TimeSeries,
};
use prethermal_core::units::DriveParams;
use serde_json::{json, Map};
use thiserror::Error;

use crate::config::{RunConfig, Sampling};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] prethermal_core::Error),
    #[error("{failed} cell(s) failed, see {}", manifest.display())]
    Partial { failed: usize, manifest: PathBuf },
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(e.into())
    }
}

impl CliError {
    /// 2 bad input, 3 numerical failure, 4 partial map, 1 I/O.
    pub fn exit_code(&self) -> u8 {
        use prethermal_core::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Partial { .. } => 4,
            CliError::Core(e) if e.is_numerical() => 3,
            CliError::Core(E::InsufficientData(_)) => 3,
            CliError::Core(E::Io(_) | E::Csv(_) | E::Json(_)) => 1,
            CliError::Core(_) => 2,
        }
    }
}

type CmdResult = Result<(), CliError>;

fn provenance(config: &RunConfig, command: &str) -> Provenance {
    Provenance {
        config_hash: Some(config.hash()),
        command: Some(command.into()),
        ..Provenance::default()
    }
}

/// Sidecar provenance additionally carries the wall-clock time.
fn stamped(p: &Provenance) -> Provenance {
    let now = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).ok();
    Provenance { created_unix: now, ..p.clone() }
}

fn out_dir(config: &RunConfig) -> Result<&Path, CliError> {
    let dir = config.output.dir.as_path();
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("config.toml"), config.to_toml())?;
    Ok(dir)
}

fn drive(config: &RunConfig) -> Result<DriveParams, CliError> {
    let d = &config.drive;
    Ok(DriveParams::new(d.v0, d.alpha, d.omega)?.with_phase(d.phase)?)
}

fn basis(config: &RunConfig) -> Result<PlaneWaveBasis, CliError> {
    Ok(PlaneWaveBasis::new(config.basis.m_max, config.basis.q)?)
}

fn write_partial_manifest(dir: &Path, command: &str, flags: Vec<&CellFlag>, files: &[PathBuf]) -> CmdResult {
    if flags.is_empty() {
        return Ok(());
    }
    let manifest = dir.join(format!("{command}_manifest.json"));
    let doc = json!({
        "command": command,
        "failed_cells": flags,
        "files": files.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
    });
    io::write_json(&manifest, &doc)?;
    Err(CliError::Partial { failed: flags.len(), manifest })
}

fn heatmaps(map: &ParameterMap, dir: &Path, stem: &str, overlay: &[Boundary]) {
    for c in &map.channels {
        let path = dir.join(format!("{stem}_{}.svg", c.name));
        if let Err(e) = io::write_heatmap(map, &c.name, &c.name, overlay, &path) {
            eprintln!("warning: {}: {e}", path.display());
        }
    }
}

pub fn bands(config: &RunConfig) -> CmdResult {
    let dir = out_dir(config)?;
    let prov = provenance(config, "bands");
    let (v0, m_max, b_max, n) = (config.drive.v0, config.basis.m_max, config.bands.b_max, config.bands.q_points);
    let units = config.units();

    let mut rows = Vec::with_capacity(n);
    for i in 0..n {
        let q = -1.0 + 2.0 * i as f64 / (n - 1) as f64;
        let spec = bloch_bands(v0, &PlaneWaveBasis::new(m_max, q)?);
        spec.check_band(b_max)?;
        let mut row = vec![q];
        row.extend(&spec.energies[..=b_max]);
        rows.push(row);
    }
    let mut header = vec!["q".to_string()];
    header.extend((0..=b_max).map(|b| format!("band_{b}")));
    io::write_table(&dir.join("bands.csv"), &prov, &header, &rows)?;

    let widths: Vec<f64> = (1..=b_max + 1)
        .map(|k| {
            let col = rows.iter().map(|r| r[k]);
            col.clone().fold(f64::NEG_INFINITY, f64::max) - col.fold(f64::INFINITY, f64::min)
        })
        .collect();
    let tunneling = tunneling_energy(v0, m_max)?;
    let omega0 = 2.0 * v0.sqrt();
    let summary = json!({
        "provenance": stamped(&prov),
        "v0": v0,
        "m_max": m_max,
        "recoil_frequency_hz": units.recoil_frequency_hz,
        "bandwidths": widths,
        "tunneling": tunneling,
        "tunneling_hz": units.energy_to_hz(tunneling),
        "omega0": omega0,
        "trap_frequency_hz": units.angular_to_hz(omega0),
    });
    io::write_json(&dir.join("bands.json"), &summary)?;
    println!("tunneling J = {:.6e} E_R = {:.2} Hz", tunneling, units.energy_to_hz(tunneling));
    println!("on-site frequency = {:.3} kHz", units.angular_to_hz(omega0) / 1e3);
    Ok(())
}

pub fn floquet(config: &RunConfig) -> CmdResult {
    let dir = out_dir(config)?;
    let prov = provenance(config, "floquet");
    let drive = drive(config)?;
    let basis = basis(config)?;
    let bands = bloch_bands(drive.v0, &basis);
    let spec = floquet_spectrum(&drive, &basis, &config.integrator_settings())?;
    let c = overlaps(&bands.ground_state(), &spec)?;
    let top = config.map.top_band.min(basis.dim() - 1);
    let occ = stroboscopic_band_occupations(&c, &spec, &bands, top)?;
    let pge = pge_coefficients(&c, DEFAULT_ATOM_NUMBER)?;

    let weights = c.weights();
    let rows: Vec<Vec<f64>> = (0..spec.dim())
        .map(|n| {
            let parity = match spec.parity[n] {
                Some(Parity::Even) => 1.0,
                Some(Parity::Odd) => -1.0,
                None => 0.0,
            };
            vec![n as f64, spec.quasienergies[n], parity, weights[n], pge.eta[n]]
        })
        .collect();
    let header: Vec<String> = ["mode", "quasienergy", "parity", "weight", "eta"].iter().map(|s| s.to_string()).collect();
    io::write_table(&dir.join("floquet.csv"), &prov, &header, &rows)?;

    let value = ipr(&c);
    let summary = json!({
        "provenance": stamped(&prov),
        "drive": drive,
        "basis": basis,
        "integrator": config.integrator_settings(),
        "steps": config.integrator_settings().steps_for(&drive, &basis),
        "ipr": value,
        "participation_ratio": participation_ratio(&c),
        "band_occupations": occ.fractions,
        "odd_total": occ.odd_total(),
        "min_phase_gap": spec.min_phase_gap,
        "degenerate": spec.degenerate,
        "atom_number": pge.atom_number,
    });
    io::write_json(&dir.join("floquet.json"), &summary)?;
    println!("IPR = {value:.10}");
    println!("participation ratio = {:.6}", participation_ratio(&c));
    Ok(())
}

pub fn map(config: &RunConfig) -> CmdResult {
    let dir = out_dir(config)?;
    let prov = provenance(config, "map");
    let grid = config.parameter_grid().map_err(CliError::Config)?;
    let settings = MapSettings {
        v0: config.drive.v0,
        m_max: config.basis.m_max,
        top_band: config.map.top_band,
        phase: config.drive.phase,
        integrator: config.integrator_settings(),
    };
    let mut result = pge_map(&grid, &settings)?;
    result.metadata.extra.insert("phase".into(), settings.phase.into());
    result.metadata.extra.insert("provenance".into(), serde_json::to_value(stamped(&prov)).map_err(prethermal_core::Error::from)?);
    let files = io::write_map(&result, dir, "pge", &prov)?;

    if config.output.svg {
        let overlay = match stability_map(&grid, settings.v0, settings.phase) {
            Ok(s) => s.boundary,
            Err(e) => {
                eprintln!("warning: stability overlay skipped: {e}");
                Vec::new()
            }
        };
        heatmaps(&result, dir, "pge", &overlay);
    }
    let (na, nw) = grid.shape();
    println!("wrote {} channels on a {na}x{nw} grid to {}", result.channels.len(), dir.display());
    write_partial_manifest(dir, "map", result.metadata.failed_cells().collect(), &files)
}

pub fn stability(config: &RunConfig) -> CmdResult {
    let dir = out_dir(config)?;
    let prov = provenance(config, "stability");
    let grid = config.parameter_grid().map_err(CliError::Config)?;
    let mut result = stability_map(&grid, config.drive.v0, config.drive.phase)?;
    result.map.metadata.extra.insert("provenance".into(), serde_json::to_value(stamped(&prov)).map_err(prethermal_core::Error::from)?);
    let mut files = io::write_map(&result.map, dir, "stability", &prov)?;
    let boundary = dir.join("stability_boundary.csv");
    io::write_boundary(&result.boundary, &boundary, &prov)?;
    files.push(boundary);
    if config.output.svg {
        let path = dir.join("stability_stable.svg");
        if let Err(e) = io::write_heatmap(&result.map, "stable", "classically stable", &result.boundary, &path) {
            eprintln!("warning: {}: {e}", path.display());
        }
    }
    println!("boundary: {} polyline(s)", result.boundary.len());
    write_partial_manifest(dir, "stability", result.map.metadata.failed_cells().collect(), &files)
}

pub fn evolve(config: &RunConfig) -> CmdResult {
    let dir = out_dir(config)?;
    let prov = provenance(config, "evolve");
    let units = config.units();
    let drive = drive(config)?;
    let e = &config.evolve;
    let t_final = match (e.periods, e.duration_us) {
        (Some(p), _) => p * drive.period(),
        (None, Some(us)) => units.from_microseconds(us),
        (None, None) => units.from_microseconds(150.0),
    };
    let sample = match e.sampling {
        Sampling::Stroboscopic => SampleSpec::Stroboscopic,
        Sampling::Uniform => SampleSpec::Uniform { count: e.samples },
        Sampling::PerSubstep => SampleSpec::PerSubstep,
    };
    let observables = ObservableSpec { b_max: e.b_max, peak_max: e.peak_max };
    let settings = config.integrator_settings();

    let series = if e.q_points > 1 {
        let weights = match e.q_sigma {
            Some(sigma) => QuasimomentumWeights::gaussian(sigma, e.q_points),
            None => QuasimomentumWeights::uniform(e.q_points),
        };
        bz_averaged_series(&drive, config.basis.m_max, &weights, e.bz_window, t_final, sample, &observables, &settings)?
    } else {
        let basis = basis(config)?;
        let psi0 = bloch_bands(drive.v0, &basis).ground_state();
        evolve_series(&psi0, &drive, &basis, t_final, sample, &observables, &settings)?
    };

    let mut extra = Map::new();
    extra.insert("t_final".into(), t_final.into());
    extra.insert("integrator".into(), json!(settings));
    extra.insert("q_points".into(), e.q_points.into());
    extra.insert("q_sigma".into(), json!(e.q_sigma));
    extra.insert("bz_window".into(), e.bz_window.into());
    io::write_series(&series, &dir.join("series.csv"), &units, &stamped(&prov), extra.clone())?;

    if series.mode == SampleMode::Stroboscopic {
        let burn_in = (series.len() / 10).min(50);
        if let Ok(avg) = stroboscopic_average(&series, burn_in) {
            if let Some(f0) = avg.iter().find(|a| a.name == "f0") {
                println!("stroboscopic f0 mean = {:.6} +- {:.1e} over {} periods", f0.mean, f0.std_error, f0.samples);
            }
        }
    }
    if let Some(bin) = e.bin_us {
        let binned = boxcar(&series, units.from_microseconds(bin))?;
        extra.insert("bin_us".into(), bin.into());
        io::write_series(&binned, &dir.join("series_binned.csv"), &units, &stamped(&prov), extra)?;
    }
    if let Some(f0) = series.channel("f0") {
        let min = f0.iter().copied().fold(f64::INFINITY, f64::min);
        println!("{} samples, min f0 = {min:.6}", series.len());
    }
    Ok(())
}

/// Pulls an endpoint that matches the data range up to rounding onto it.
fn snap_to(value: f64, target: f64) -> f64 {
    if (value - target).abs() <= 1e-9 * target.abs() {
        target
    } else {
        value
    }
}

pub fn fit(config: &RunConfig) -> CmdResult {
    let f = &config.fit;
    let input = f.input.as_ref().ok_or_else(|| CliError::Config("fit needs --input".into()))?;
    let (t_min_us, t_max_us) = match (f.t_min_us, f.t_max_us) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(CliError::Config("fit needs an explicit window: --t-min-us and --t-max-us".into())),
    };
    let dir = out_dir(config)?;
    let prov = provenance(config, "fit");
    let units = config.units();
    let mut series: TimeSeries = io::read_series(input, &units)?;
    let mut channel = f.channel.clone();
    if f.reciprocal {
        let values = series
            .channel(&channel)
            .ok_or_else(|| CliError::Config(format!("{} has no channel '{channel}'", input.display())))?
            .iter()
            .map(|v| 1.0 / v)
            .collect();
        channel = format!("inv_{channel}");
        series.push_channel(channel.clone(), values)?;
    }
    let (first, last) = (series.times.first().copied().unwrap_or(0.0), series.times.last().copied().unwrap_or(0.0));
    let window = (
        snap_to(units.from_microseconds(t_min_us), first),
        snap_to(units.from_microseconds(t_max_us), last),
    );
    let result = fit_power_law(&series, &channel, window)?;
    let doc = json!({
        "provenance": stamped(&prov),
        "input": input.display().to_string(),
        "fit": result,
        "window_us": [t_min_us, t_max_us],
    });
    io::write_json(&dir.join("fit.json"), &doc)?;
    println!("exponent p = {:.6} (rms residual {:.3e}, {} samples)", result.exponent, result.residual, result.samples);
    Ok(())
}
