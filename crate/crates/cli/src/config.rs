use std::path::{Path, PathBuf};

use prethermal_core::floquet::{IntegratorSettings, Scheme};
use prethermal_core::grid::{LogAxis, ParameterGrid};
use prethermal_core::units::PhysicalUnits;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DriveSection {
    /// Static depth in E_R.
    pub v0: f64,
    pub alpha: f64,
    /// Drive frequency relative to the on-site frequency.
    pub omega: f64,
    /// Phase of the sine at t = 0, in radians.
    pub phase: f64,
}

impl Default for DriveSection {
    fn default() -> Self {
        Self { v0: 10.0, alpha: 3.0, omega: 2.6, phase: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BasisSection {
    pub m_max: usize,
    pub q: f64,
}

impl Default for BasisSection {
    fn default() -> Self {
        Self { m_max: 16, q: 0.0 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorSection {
    pub steps: Option<usize>,
    pub convergence_tol: Option<f64>,
    pub scheme: Scheme,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    /// `min:max:points`, log-spaced.
    pub alpha: String,
    pub omega: String,
    /// Prepend an undriven row.
    pub zero_alpha: bool,
}

impl Default for GridSection {
    fn default() -> Self {
        Self { alpha: "0.1:10:20".into(), omega: "0.1:10:20".into(), zero_alpha: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MapSection {
    pub top_band: usize,
}

impl Default for MapSection {
    fn default() -> Self {
        Self { top_band: 12 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BandsSection {
    pub q_points: usize,
    pub b_max: usize,
}

impl Default for BandsSection {
    fn default() -> Self {
        Self { q_points: 101, b_max: 5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    Stroboscopic,
    Uniform,
    PerSubstep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolveSection {
    /// Duration in µs; exclusive with `periods`.
    pub duration_us: Option<f64>,
    pub periods: Option<f64>,
    pub sampling: Sampling,
    /// Sample count for uniform sampling.
    pub samples: usize,
    pub b_max: usize,
    pub peak_max: usize,
    /// Half-width of the quasimomentum window in k_L.
    pub bz_window: f64,
    /// Quasimomentum points across the zone; 1 evolves only `basis.q`.
    pub q_points: usize,
    /// Gaussian width of the quasimomentum distribution; uniform if unset.
    pub q_sigma: Option<f64>,
    /// Boxcar bin width in µs for an additional binned output.
    pub bin_us: Option<f64>,
}

impl Default for EvolveSection {
    fn default() -> Self {
        Self {
            duration_us: None,
            periods: None,
            sampling: Sampling::Stroboscopic,
            samples: 401,
            b_max: 12,
            peak_max: 4,
            bz_window: 1.0,
            q_points: 1,
            q_sigma: None,
            bin_us: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitSection {
    pub input: Option<PathBuf>,
    pub channel: String,
    pub t_min_us: Option<f64>,
    pub t_max_us: Option<f64>,
    /// Fit `1 / value` instead of the value.
    pub reciprocal: bool,
}

impl Default for FitSection {
    fn default() -> Self {
        Self { input: None, channel: "value".into(), t_min_us: None, t_max_us: None, reciprocal: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UnitsSection {
    pub recoil_frequency_hz: f64,
}

impl Default for UnitsSection {
    fn default() -> Self {
        Self { recoil_frequency_hz: PhysicalUnits::lithium7_1064nm().recoil_frequency_hz }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub svg: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: "out".into(), svg: false }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub drive: DriveSection,
    pub basis: BasisSection,
    pub integrator: IntegratorSection,
    pub grid: GridSection,
    pub map: MapSection,
    pub bands: BandsSection,
    pub evolve: EvolveSection,
    pub fit: FitSection,
    pub units: UnitsSection,
    pub output: OutputSection,
    /// Worker threads; all cores if unset.
    pub workers: Option<usize>,
    /// Seed for synthetic data.
    pub seed: u64,
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Self::parse(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let config: Self = toml::from_str(text).map_err(|e| e.to_string())?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), String> {
        let d = &self.drive;
        check(d.v0.is_finite() && d.v0 >= 0.0, || format!("drive.v0 must be >= 0, got {}", d.v0))?;
        check(d.alpha.is_finite() && d.alpha >= 0.0, || format!("drive.alpha must be >= 0, got {}", d.alpha))?;
        check(d.omega.is_finite() && d.omega > 0.0, || format!("drive.omega must be > 0, got {}", d.omega))?;
        check(d.phase.is_finite(), || "drive.phase must be finite".into())?;
        check((1..=256).contains(&self.basis.m_max), || format!("basis.m_max must lie in 1..=256, got {}", self.basis.m_max))?;
        check(self.basis.q.abs() <= 1.0, || format!("basis.q must lie in [-1, 1], got {}", self.basis.q))?;
        if let Some(s) = self.integrator.steps {
            check(s >= 1, || "integrator.steps must be >= 1".into())?;
        }
        if let Some(t) = self.integrator.convergence_tol {
            check(t > 0.0, || format!("integrator.convergence_tol must be > 0, got {t}"))?;
        }
        self.parameter_grid()?;
        check(self.bands.q_points >= 2, || "bands.q_points must be >= 2".into())?;
        let e = &self.evolve;
        check(!(e.duration_us.is_some() && e.periods.is_some()), || "evolve.duration_us and evolve.periods are exclusive".into())?;
        for (name, v) in [("evolve.duration_us", e.duration_us), ("evolve.periods", e.periods)] {
            if let Some(v) = v {
                check(v.is_finite() && v >= 0.0, || format!("{name} must be >= 0, got {v}"))?;
            }
        }
        check(e.samples >= 2, || "evolve.samples must be >= 2".into())?;
        check(e.bz_window > 0.0 && e.bz_window <= 1.0, || format!("evolve.bz_window must lie in (0, 1], got {}", e.bz_window))?;
        check(e.q_points >= 1, || "evolve.q_points must be >= 1".into())?;
        if let Some(s) = e.q_sigma {
            check(s > 0.0, || format!("evolve.q_sigma must be > 0, got {s}"))?;
        }
        if let Some(b) = e.bin_us {
            check(b > 0.0, || format!("evolve.bin_us must be > 0, got {b}"))?;
        }
        check(self.units.recoil_frequency_hz > 0.0, || "units.recoil_frequency_hz must be > 0".into())?;
        if let Some(w) = self.workers {
            check(w >= 1, || "workers must be >= 1".into())?;
        }
        Ok(())
    }

    pub fn parameter_grid(&self) -> Result<ParameterGrid, String> {
        let alpha: LogAxis = self.grid.alpha.parse().map_err(|e| format!("grid.alpha: {e}"))?;
        let omega: LogAxis = self.grid.omega.parse().map_err(|e| format!("grid.omega: {e}"))?;
        let grid = ParameterGrid::log(alpha, omega);
        Ok(if self.grid.zero_alpha { grid.with_zero_alpha() } else { grid })
    }

    pub fn integrator_settings(&self) -> IntegratorSettings {
        IntegratorSettings {
            steps: self.integrator.steps,
            convergence_tol: self.integrator.convergence_tol,
            scheme: self.integrator.scheme,
        }
    }

    pub fn units(&self) -> PhysicalUnits {
        PhysicalUnits { recoil_frequency_hz: self.units.recoil_frequency_hz }
    }

    /// SHA-256 of the configuration without the settings that cannot change
    /// results (worker count, output directory).
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.workers = None;
        canonical.output = OutputSection::default();
        let json = serde_json::to_string(&canonical).expect("config serializes");
        Sha256::digest(json.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}
