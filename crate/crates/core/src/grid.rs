//! Rectangular `(alpha, Omega)` parameter grids.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Log-spaced axis with both endpoints included.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogAxis {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl LogAxis {
    pub fn new(min: f64, max: f64, points: usize) -> Result<Self> {
        if !(min.is_finite() && max.is_finite() && min > 0.0) {
            return Err(Error::invalid(format!("log axis needs finite positive bounds, got {min}..{max}")));
        }
        if points == 0 || (points == 1 && min != max) || (points > 1 && max <= min) {
            return Err(Error::invalid(format!("log axis {min}..{max} with {points} points is not increasing")));
        }
        Ok(Self { min, max, points })
    }

    /// Axis spanning `min..max` with `per_decade` points per factor of ten.
    pub fn per_decade(min: f64, max: f64, per_decade: usize) -> Result<Self> {
        let decades = (max / min).log10();
        if !(decades.is_finite() && decades > 0.0) || per_decade == 0 {
            return Err(Error::invalid(format!("cannot place {per_decade} points per decade on {min}..{max}")));
        }
        Self::new(min, max, (decades * per_decade as f64).round() as usize + 1)
    }

    pub fn values(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.min];
        }
        let ratio = (self.max / self.min).ln();
        let last = self.points - 1;
        (0..self.points)
            .map(|i| match i {
                0 => self.min,
                i if i == last => self.max,
                i => self.min * (ratio * i as f64 / last as f64).exp(),
            })
            .collect()
    }
}

impl FromStr for LogAxis {
    type Err = Error;

    /// Parses `min:max:points`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(Error::invalid(format!("axis '{s}' must look like min:max:points")));
        }
        let num = |p: &str| p.parse::<f64>().map_err(|_| Error::invalid(format!("'{p}' in axis '{s}' is not a number")));
        let points = parts[2]
            .parse::<usize>()
            .map_err(|_| Error::invalid(format!("'{}' in axis '{s}' is not a point count", parts[2])))?;
        Self::new(num(parts[0])?, num(parts[1])?, points)
    }
}

/// Grid of drive amplitudes (rows) and relative frequencies (columns).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterGrid {
    pub alpha: Vec<f64>,
    pub omega: Vec<f64>,
}

impl Default for ParameterGrid {
    /// 20 x 20 log grid over `[0.1, 10]` in both directions.
    fn default() -> Self {
        Self::log(LogAxis { min: 0.1, max: 10.0, points: 20 }, LogAxis { min: 0.1, max: 10.0, points: 20 })
    }
}

impl ParameterGrid {
    pub fn log(alpha: LogAxis, omega: LogAxis) -> Self {
        Self { alpha: alpha.values(), omega: omega.values() }
    }

    /// Grid from explicit axis values; both must be strictly increasing,
    /// `alpha >= 0` and `Omega > 0`.
    pub fn from_axes(alpha: Vec<f64>, omega: Vec<f64>) -> Result<Self> {
        let grid = Self { alpha, omega };
        grid.validate()?;
        Ok(grid)
    }

    /// Prepends an undriven `alpha = 0` row if it is not already present.
    pub fn with_zero_alpha(mut self) -> Self {
        if self.alpha.first() != Some(&0.0) {
            self.alpha.insert(0, 0.0);
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        let increasing = |v: &[f64]| v.windows(2).all(|w| w[0] < w[1]);
        if self.alpha.is_empty() || self.omega.is_empty() {
            return Err(Error::invalid("grid axes must not be empty"));
        }
        if !increasing(&self.alpha) || !increasing(&self.omega) {
            return Err(Error::invalid("grid axes must be strictly increasing"));
        }
        if !self.alpha.iter().all(|a| a.is_finite() && *a >= 0.0) {
            return Err(Error::invalid("grid amplitudes must be finite and >= 0"));
        }
        if !self.omega.iter().all(|w| w.is_finite() && *w > 0.0) {
            return Err(Error::invalid("grid frequencies must be finite and > 0"));
        }
        Ok(())
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.alpha.len(), self.omega.len())
    }

    pub fn len(&self) -> usize {
        self.alpha.len() * self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(alpha_index, omega_index)` pairs in row-major order.
    pub fn cells(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.alpha.len()).flat_map(move |i| (0..self.omega.len()).map(move |j| (i, j)))
    }
}

impl FromStr for ParameterGrid {
    type Err = Error;

    /// Parses `a0:a1:na,w0:w1:nw`.
    fn from_str(s: &str) -> Result<Self> {
        let (a, w) = s
            .split_once(',')
            .ok_or_else(|| Error::invalid(format!("grid '{s}' must look like a0:a1:na,w0:w1:nw")))?;
        Ok(Self::log(a.parse()?, w.parse()?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_spans_four_square_decades() {
        let g = ParameterGrid::default();
        assert_eq!(g.shape(), (20, 20));
        assert_eq!(g.alpha[0], 0.1);
        assert_eq!(g.alpha[19], 10.0);
        let ratio = g.omega[1] / g.omega[0];
        assert!((g.omega[11] / g.omega[10] - ratio).abs() < 1e-12);
        g.validate().unwrap();
    }

    #[test]
    fn parses_cli_grid() {
        let g: ParameterGrid = "0.1:10:5,0.5:2:3".parse().unwrap();
        assert_eq!(g.shape(), (5, 3));
        assert!((g.alpha[2] - 1.0).abs() < 1e-14);
        assert!((g.omega[1] - 1.0).abs() < 1e-14);
        assert!("0.1:10,1:2:3".parse::<ParameterGrid>().is_err());
        assert!("10:0.1:5,1:2:3".parse::<ParameterGrid>().is_err());
        assert!("0:1:5,1:2:3".parse::<ParameterGrid>().is_err());
    }

    #[test]
    fn zero_row_and_points_per_decade() {
        let g = ParameterGrid::default().with_zero_alpha();
        assert_eq!(g.alpha[0], 0.0);
        assert_eq!(g.clone().with_zero_alpha(), g);
        g.validate().unwrap();
        assert_eq!(LogAxis::per_decade(0.1, 10.0, 5).unwrap().points, 11);
        assert_eq!(g.cells().nth(21), Some((1, 1)));
    }
}
