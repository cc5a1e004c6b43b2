//! Recoil units and drive parameterization.
//!
//! Everything inside the crate works in recoil units: energies in E_R,
//! times in ħ/E_R, momenta in k_L. [`PhysicalUnits`] converts at the edges.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const PLANCK_J_S: f64 = 6.626_070_15e-34;
const ATOMIC_MASS_KG: f64 = 1.660_539_066_60e-27;
const LITHIUM7_MASS_AMU: f64 = 7.016_003_436_6;

/// Periodically modulated lattice depth `v0 * (1 + alpha * sin(omega * t + phase))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveParams {
    /// Static depth in E_R.
    pub v0: f64,
    /// Relative modulation amplitude.
    pub alpha: f64,
    /// Drive frequency in units of the on-site harmonic frequency.
    pub omega_rel: f64,
    /// Drive phase at `t = 0`; `0` starts on a sine, `pi/2` on a cosine.
    #[serde(default)]
    pub phase: f64,
}

impl DriveParams {
    pub fn new(v0: f64, alpha: f64, omega_rel: f64) -> Result<Self> {
        if !(v0.is_finite() && v0 > 0.0) {
            return Err(Error::invalid(format!("lattice depth must be > 0, got {v0}")));
        }
        if !(alpha.is_finite() && alpha >= 0.0) {
            return Err(Error::invalid(format!("modulation amplitude must be >= 0, got {alpha}")));
        }
        if !(omega_rel.is_finite() && omega_rel > 0.0) {
            return Err(Error::invalid(format!("drive frequency must be > 0, got {omega_rel}")));
        }
        Ok(Self { v0, alpha, omega_rel, phase: 0.0 })
    }

    pub fn with_phase(self, phase: f64) -> Result<Self> {
        if !phase.is_finite() {
            return Err(Error::invalid(format!("drive phase must be finite, got {phase}")));
        }
        Ok(Self { phase, ..self })
    }

    /// Harmonic frequency of a lattice site, `2 sqrt(v0)` in E_R/ħ.
    pub fn omega0(&self) -> f64 {
        2.0 * self.v0.sqrt()
    }

    /// Angular drive frequency in E_R/ħ.
    pub fn omega(&self) -> f64 {
        self.omega_rel * self.omega0()
    }

    /// Drive period in ħ/E_R.
    pub fn period(&self) -> f64 {
        TAU / self.omega()
    }

    /// Instantaneous lattice depth. Goes negative for `alpha > 1`.
    pub fn depth(&self, t: f64) -> f64 {
        drive_depth(self, t)
    }

    /// Same drive with the amplitude switched off.
    pub fn undriven(&self) -> Self {
        Self { alpha: 0.0, ..*self }
    }
}

/// `V(t) = v0 (1 + alpha sin(omega t + phase))` in E_R.
pub fn drive_depth(params: &DriveParams, t: f64) -> f64 {
    params.v0 * (1.0 + params.alpha * (params.omega() * t + params.phase).sin())
}

/// Conversion constants between recoil units and SI.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalUnits {
    /// E_R / h in Hz.
    pub recoil_frequency_hz: f64,
}

impl Default for PhysicalUnits {
    fn default() -> Self {
        Self::lithium7_1064nm()
    }
}

impl PhysicalUnits {
    pub fn new(recoil_frequency_hz: f64) -> Result<Self> {
        if !(recoil_frequency_hz.is_finite() && recoil_frequency_hz > 0.0) {
            return Err(Error::invalid(format!(
                "recoil frequency must be > 0, got {recoil_frequency_hz}"
            )));
        }
        Ok(Self { recoil_frequency_hz })
    }

    /// E_R/h = h / (2 m lambda^2) for an atom of the given mass in a
    /// retro-reflected lattice of the given laser wavelength.
    pub fn from_mass_and_wavelength(mass_amu: f64, wavelength_m: f64) -> Result<Self> {
        let mass = mass_amu * ATOMIC_MASS_KG;
        Self::new(PLANCK_J_S / (2.0 * mass * wavelength_m * wavelength_m))
    }

    /// ⁷Li in a 1064 nm lattice, E_R/h ≈ 25.1 kHz.
    pub fn lithium7_1064nm() -> Self {
        Self::from_mass_and_wavelength(LITHIUM7_MASS_AMU, 1064e-9)
            .expect("constants are positive")
    }

    /// ħ/E_R in seconds.
    pub fn time_unit_s(&self) -> f64 {
        1.0 / (2.0 * PI * self.recoil_frequency_hz)
    }

    pub fn to_seconds(&self, t: f64) -> f64 {
        t * self.time_unit_s()
    }

    pub fn from_seconds(&self, seconds: f64) -> f64 {
        seconds / self.time_unit_s()
    }

    pub fn to_microseconds(&self, t: f64) -> f64 {
        self.to_seconds(t) * 1e6
    }

    pub fn from_microseconds(&self, us: f64) -> f64 {
        self.from_seconds(us * 1e-6)
    }

    /// An energy in E_R expressed as a frequency (energy / h) in Hz.
    pub fn energy_to_hz(&self, energy: f64) -> f64 {
        energy * self.recoil_frequency_hz
    }

    /// An angular frequency in E_R/ħ expressed as an ordinary frequency in Hz.
    pub fn angular_to_hz(&self, omega: f64) -> f64 {
        omega * self.recoil_frequency_hz
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn depth_examples() {
        let p = DriveParams::new(10.0, 0.0, 1.3).unwrap();
        assert_eq!(drive_depth(&p, 0.77), 10.0);

        // sin(omega t) = -1 at t = 3T/4
        let p = DriveParams::new(10.0, 1.0, 1.3).unwrap();
        assert!(drive_depth(&p, 0.75 * p.period()).abs() < 1e-12);
        let p = DriveParams::new(10.0, 10.0, 1.3).unwrap();
        assert_relative_eq!(drive_depth(&p, 0.75 * p.period()), -90.0, epsilon = 1e-11);
    }

    #[test]
    fn period_times_omega_is_two_pi() {
        for &w in &[0.1, 0.37, 1.0, 2.6, 10.0] {
            let p = DriveParams::new(10.0, 3.0, w).unwrap();
            assert_relative_eq!(p.period() * p.omega(), TAU, max_relative = 1e-15);
        }
    }

    #[test]
    fn rejects_bad_params() {
        assert!(DriveParams::new(0.0, 1.0, 1.0).is_err());
        assert!(DriveParams::new(10.0, -0.1, 1.0).is_err());
        assert!(DriveParams::new(10.0, 1.0, 0.0).is_err());
        assert!(PhysicalUnits::new(-1.0).is_err());
    }

    #[test]
    fn lithium_recoil() {
        let u = PhysicalUnits::lithium7_1064nm();
        assert!((u.recoil_frequency_hz - 2.52e4).abs() < 0.01e4);
        assert_relative_eq!(u.time_unit_s() * 2.0 * PI * u.recoil_frequency_hz, 1.0);
        assert_relative_eq!(u.from_microseconds(u.to_microseconds(3.5)), 3.5, max_relative = 1e-14);
    }
}
