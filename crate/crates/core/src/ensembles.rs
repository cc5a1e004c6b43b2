//! Diagonal-ensemble band occupations and periodic-Gibbs-ensemble
//! coefficients.

use nalgebra::DVector;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::floquet::{floquet_spectrum, inner, overlaps, FloquetSpectrum, IntegratorSettings, OverlapVector};
use crate::grid::ParameterGrid;
use crate::lattice::{bloch_bands, BlochSpectrum, PlaneWaveBasis};
use crate::map::{CellFlag, FlagKind, MapMetadata, ParameterMap};
use crate::units::DriveParams;

/// Default atom number entering the PGE coefficients.
pub const DEFAULT_ATOM_NUMBER: f64 = 1e5;

/// Mode populations `|c_n|^2` at or below this count as absent.
pub const ABSENT_WEIGHT: f64 = 1e-24;

/// Long-time stroboscopic occupations of the static bands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandOccupations {
    /// `f_b` for `b = 0 ..= b_max`.
    pub fractions: Vec<f64>,
    pub drive: DriveParams,
    pub basis: PlaneWaveBasis,
}

impl BandOccupations {
    pub fn band(&self, b: usize) -> f64 {
        self.fractions.get(b).copied().unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.fractions.iter().sum()
    }

    pub fn odd_total(&self) -> f64 {
        self.fractions.iter().skip(1).step_by(2).sum()
    }

    /// Sum over bands strictly above `b`.
    pub fn above(&self, b: usize) -> f64 {
        self.fractions.iter().skip(b + 1).sum()
    }
}

/// `f_b = sum_n |c_n|^2 |<phi_b|n(0)>|^2` for `b = 0 ..= b_max`.
///
/// When `c` are the overlaps of the ground band state, `f_0` is bit-for-bit
/// [`crate::floquet::ipr`] of `c`.
pub fn stroboscopic_band_occupations(
    c: &OverlapVector,
    spec: &FloquetSpectrum,
    bands: &BlochSpectrum,
    b_max: usize,
) -> Result<BandOccupations> {
    let dim = spec.dim();
    if c.c.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, actual: c.c.len() });
    }
    if bands.dim() != dim {
        return Err(Error::DimensionMismatch { expected: dim, actual: bands.dim() });
    }
    if b_max >= dim {
        return Err(Error::TruncationTooSmall { band: b_max, dim });
    }
    let weights = c.weights();
    let modes: Vec<DVector<Complex64>> = (0..dim).map(|n| spec.mode(n)).collect();
    let fractions = (0..=b_max)
        .map(|b| {
            let phi = bands.states.column(b).into_owned();
            weights.iter().zip(&modes).map(|(w, mode)| w * inner(mode, &phi).norm_sqr()).sum()
        })
        .collect();
    Ok(BandOccupations { fractions, drive: spec.drive, basis: spec.basis })
}

/// PGE Lagrange multipliers of the single-particle Floquet modes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PgeCoefficients {
    /// `eta_i = ln(1 + 1/<n_i>)`; `+inf` marks an absent mode.
    pub eta: Vec<f64>,
    /// `<n_i> = N |<0|i(0)>|^2`.
    pub mean_occupations: Vec<f64>,
    pub atom_number: f64,
}

impl PgeCoefficients {
    pub fn is_absent(&self, i: usize) -> bool {
        self.eta[i].is_infinite()
    }

    /// Indices of modes that carry population.
    pub fn present(&self) -> Vec<usize> {
        (0..self.eta.len()).filter(|&i| !self.is_absent(i)).collect()
    }
}

/// `eta = ln(1 + 1/n)` for a mean occupation `n > 0`.
pub fn pge_eta(mean_occupation: f64) -> f64 {
    (1.0 / mean_occupation).ln_1p()
}

pub fn pge_coefficients(c: &OverlapVector, atom_number: f64) -> Result<PgeCoefficients> {
    if !(atom_number.is_finite() && atom_number > 0.0) {
        return Err(Error::invalid(format!("atom number must be > 0, got {atom_number}")));
    }
    let weights = c.weights();
    let mean_occupations: Vec<f64> = weights.iter().map(|w| atom_number * w).collect();
    let eta = weights
        .iter()
        .zip(&mean_occupations)
        .map(|(&w, &n)| if w <= ABSENT_WEIGHT { f64::INFINITY } else { pge_eta(n) })
        .collect();
    Ok(PgeCoefficients { eta, mean_occupations, atom_number })
}

/// Inputs shared by every cell of a band-occupation map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapSettings {
    pub v0: f64,
    pub m_max: usize,
    /// Highest even band given its own channel.
    pub top_band: usize,
    /// Drive phase at `t = 0`, see [`DriveParams::phase`].
    #[serde(default)]
    pub phase: f64,
    pub integrator: IntegratorSettings,
}

impl Default for MapSettings {
    fn default() -> Self {
        Self { v0: 10.0, m_max: 16, top_band: 12, phase: 0.0, integrator: IntegratorSettings::default() }
    }
}

impl MapSettings {
    /// Channel names in output order: `f0, f2, ..., f{top_band}`, then the
    /// `odd_total` and `above_{top_band}` diagnostics.
    pub fn channel_names(&self) -> Vec<String> {
        let mut names: Vec<String> = (0..=self.top_band).step_by(2).map(|b| format!("f{b}")).collect();
        names.push("odd_total".into());
        names.push(format!("above_{}", self.top_band));
        names
    }
}

/// Band occupations of the static ground state at one drive.
pub fn ground_state_occupations(
    drive: &DriveParams,
    bands: &BlochSpectrum,
    settings: &IntegratorSettings,
) -> Result<(BandOccupations, FloquetSpectrum)> {
    let spec = floquet_spectrum(drive, &bands.basis, settings)?;
    let c = overlaps(&bands.ground_state(), &spec)?;
    let occ = stroboscopic_band_occupations(&c, &spec, bands, bands.dim() - 1)?;
    Ok((occ, spec))
}

/// Diagonal-ensemble band-occupation maps over an `(alpha, Omega)` grid.
///
/// Cells run in parallel on the current rayon pool and are gathered in grid
/// order. A failed cell is filled with NaN and listed in the flags.
pub fn pge_map(grid: &ParameterGrid, settings: &MapSettings) -> Result<ParameterMap> {
    let basis = PlaneWaveBasis::new(settings.m_max, 0.0)?;
    let bands = bloch_bands(settings.v0, &basis);
    bands.check_band(settings.top_band)?;
    let names = settings.channel_names();
    let top = settings.top_band;

    let cells: Vec<(usize, usize)> = grid.cells().collect();
    let results: Vec<(Vec<f64>, Option<CellFlag>)> = cells
        .par_iter()
        .map(|&(i, j)| {
            let (alpha, omega) = (grid.alpha[i], grid.omega[j]);
            let outcome = DriveParams::new(settings.v0, alpha, omega)
                .and_then(|d| d.with_phase(settings.phase))
                .and_then(|drive| ground_state_occupations(&drive, &bands, &settings.integrator));
            match outcome {
                Ok((occ, spec)) => {
                    let mut values: Vec<f64> = (0..=top).step_by(2).map(|b| occ.band(b)).collect();
                    values.push(occ.odd_total());
                    values.push(occ.above(top));
                    let flag = spec.degenerate.then(|| CellFlag {
                        alpha_index: i,
                        omega_index: j,
                        kind: FlagKind::Degenerate,
                        message: format!("eigenphase gap {:.3e} rad", spec.min_phase_gap),
                    });
                    (values, flag)
                }
                Err(e) => (
                    vec![f64::NAN; names.len()],
                    Some(CellFlag { alpha_index: i, omega_index: j, kind: FlagKind::Failed, message: e.to_string() }),
                ),
            }
        })
        .collect();

    let mut map = ParameterMap::new(grid.clone(), &names, MapMetadata::new(settings.v0).with_basis(&basis));
    map.metadata.integrator = Some(settings.integrator);
    for (&(i, j), (values, flag)) in cells.iter().zip(results) {
        for (k, v) in values.into_iter().enumerate() {
            map.channels[k].values[i][j] = v;
        }
        map.metadata.flags.extend(flag);
    }
    Ok(map)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::floquet::ipr;

    fn occupations(alpha: f64, omega: f64, m_max: usize) -> (BandOccupations, OverlapVector) {
        let basis = PlaneWaveBasis::new(m_max, 0.0).unwrap();
        let bands = bloch_bands(10.0, &basis);
        let drive = DriveParams::new(10.0, alpha, omega).unwrap();
        let spec = floquet_spectrum(&drive, &basis, &IntegratorSettings::default()).unwrap();
        let c = overlaps(&bands.ground_state(), &spec).unwrap();
        (stroboscopic_band_occupations(&c, &spec, &bands, basis.dim() - 1).unwrap(), c)
    }

    #[test]
    fn undriven_occupies_ground_band_only() {
        let (occ, _) = occupations(0.0, 1.3, 8);
        assert!((occ.band(0) - 1.0).abs() < 1e-12);
        assert!(occ.above(0) < 1e-12);
    }

    #[test]
    fn ground_fraction_is_ipr_bitwise() {
        for &(a, w) in &[(3.0, 2.6), (1.0, 1.0), (0.4, 0.7)] {
            let (occ, c) = occupations(a, w, 8);
            assert_eq!(occ.band(0).to_bits(), ipr(&c).to_bits());
            assert!((occ.total() - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn odd_bands_empty_at_zone_centre() {
        let (occ, _) = occupations(3.0, 2.6, 16);
        assert!(occ.odd_total() < 1e-8, "odd {}", occ.odd_total());
        assert!(occ.band(2) > 1e-3);
    }

    #[test]
    fn eta_examples() {
        assert!((pge_eta(1.0) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(pge_eta(1e12) < 1.1e-12);
        assert!(pge_eta(2.0) < pge_eta(1.0));
    }

    #[test]
    fn undriven_pge_is_condensed() {
        let (_, c) = occupations(0.0, 0.9, 8);
        let pge = pge_coefficients(&c, DEFAULT_ATOM_NUMBER).unwrap();
        let present = pge.present();
        assert_eq!(present.len(), 1);
        let i = present[0];
        assert!((pge.mean_occupations[i] - 1e5).abs() < 1e-6);
        assert!((pge.eta[i] - 1e-5).abs() < 1e-9);
        assert!(pge_coefficients(&c, 0.0).is_err());
    }

    #[test]
    fn rejects_mismatched_inputs() {
        let basis = PlaneWaveBasis::new(4, 0.0).unwrap();
        let drive = DriveParams::new(10.0, 1.0, 1.0).unwrap();
        let spec = floquet_spectrum(&drive, &basis, &IntegratorSettings::default()).unwrap();
        let bands = bloch_bands(10.0, &PlaneWaveBasis::new(5, 0.0).unwrap());
        let c = overlaps(&spec.mode(0), &spec).unwrap();
        assert!(stroboscopic_band_occupations(&c, &spec, &bands, 2).is_err());
        let bands = bloch_bands(10.0, &basis);
        assert!(stroboscopic_band_occupations(&c, &spec, &bands, 9).is_err());
    }
}
