//! Classical driven pendulum: monodromy of the linearized equation,
//! stability maps and nonlinear trajectories.
//!
//! A lattice site is a pendulum of small-angle frequency `omega0` whose
//! restoring strength follows the lattice depth:
//! `theta'' = -omega0^2 (1 + alpha sin(omega t + phase)) sin(theta)`.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::contour::{axis_position, level_set};
use crate::error::{Error, Result};
use crate::grid::ParameterGrid;
use crate::map::{CellFlag, FlagKind, MapMetadata, ParameterMap};
use crate::units::DriveParams;

pub type Mat2 = [[f64; 2]; 2];

/// Fundamental-solution matrix over one drive period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonodromyResult {
    pub matrix: Mat2,
    pub trace: f64,
    pub det: f64,
    /// `|trace| <= 2`.
    pub stable: bool,
    /// `ln max |eigenvalue|`, zero on stable cells.
    pub log_multiplier: f64,
    /// Integration length in the equation's own time unit.
    pub period: f64,
    pub steps: usize,
    pub drive: Option<DriveParams>,
}

impl MonodromyResult {
    /// Exponential growth rate `ln max|lambda| / period`.
    pub fn growth_rate(&self) -> f64 {
        self.log_multiplier / self.period
    }
}

fn mat_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    [
        [a[0][0] * b[0][0] + a[0][1] * b[1][0], a[0][0] * b[0][1] + a[0][1] * b[1][1]],
        [a[1][0] * b[0][0] + a[1][1] * b[1][0], a[1][0] * b[0][1] + a[1][1] * b[1][1]],
    ]
}

/// Monodromy of `x'' = -k(t) x` over `[0, period]` with fixed-step RK4.
///
/// The fundamental matrix is kept as `Q R` with `Q` re-orthonormalized
/// every step, so the determinant is the product of the `R` diagonals and
/// stays meaningful when the solutions grow by many orders of magnitude.
fn hill_monodromy<F: Fn(f64) -> f64>(stiffness: F, period: f64, steps: usize) -> (Mat2, f64, f64) {
    let h = period / steps as f64;
    let rhs = |t: f64, y: [f64; 2]| [y[1], -stiffness(t) * y[0]];
    let rk4 = |t: f64, y: [f64; 2]| {
        let k1 = rhs(t, y);
        let k2 = rhs(t + 0.5 * h, [y[0] + 0.5 * h * k1[0], y[1] + 0.5 * h * k1[1]]);
        let k3 = rhs(t + 0.5 * h, [y[0] + 0.5 * h * k2[0], y[1] + 0.5 * h * k2[1]]);
        let k4 = rhs(t + h, [y[0] + h * k3[0], y[1] + h * k3[1]]);
        [
            y[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
            y[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        ]
    };

    // Columns of q are the propagated initial conditions.
    let mut q: Mat2 = [[1.0, 0.0], [0.0, 1.0]];
    let mut r: Mat2 = [[1.0, 0.0], [0.0, 1.0]];
    let mut log_det = 0.0;
    let mut det_sign = 1.0;
    for k in 0..steps {
        let t = k as f64 * h;
        let c0 = rk4(t, [q[0][0], q[1][0]]);
        let c1 = rk4(t, [q[0][1], q[1][1]]);
        // Gram-Schmidt on the two columns.
        let n0 = c0[0].hypot(c0[1]);
        let e0 = [c0[0] / n0, c0[1] / n0];
        let r01 = e0[0] * c1[0] + e0[1] * c1[1];
        let w = [c1[0] - r01 * e0[0], c1[1] - r01 * e0[1]];
        let n1 = w[0].hypot(w[1]);
        let e1 = [w[0] / n1, w[1] / n1];
        q = [[e0[0], e1[0]], [e0[1], e1[1]]];
        r = mat_mul(&[[n0, r01], [0.0, n1]], &r);
        log_det += n0.ln() + n1.ln();
        det_sign *= (n0 * n1).signum();
    }
    let det = det_sign * log_det.exp();
    let q_det = q[0][0] * q[1][1] - q[0][1] * q[1][0];
    (mat_mul(&q, &r), det * q_det, log_det)
}

fn summarize(matrix: Mat2, det: f64, period: f64, steps: usize, drive: Option<DriveParams>) -> MonodromyResult {
    let trace = matrix[0][0] + matrix[1][1];
    let half = 0.5 * trace.abs();
    let stable = trace.abs() <= 2.0;
    let log_multiplier = if stable { 0.0 } else { (half + (half * half - det).max(0.0).sqrt()).ln() };
    MonodromyResult { matrix, trace, det, stable, log_multiplier, period, steps, drive }
}

/// Default RK4 steps per period: 128 steps per radian of the fastest local
/// oscillation, at least 1024.
pub fn default_classical_steps(drive: &DriveParams) -> usize {
    let fastest = drive.omega0() * (1.0 + drive.alpha).sqrt();
    ((128.0 * fastest * drive.period()).ceil() as usize).max(1024)
}

/// Monodromy of `theta'' + omega0^2 (1 + alpha sin(omega t + phase)) theta = 0`.
pub fn linearized_monodromy(drive: &DriveParams, steps: usize) -> Result<MonodromyResult> {
    if steps < 64 {
        return Err(Error::invalid(format!("monodromy needs at least 64 steps, got {steps}")));
    }
    let w0sq = drive.omega0().powi(2);
    let (w, a, phase) = (drive.omega(), drive.alpha, drive.phase);
    let (m, det, _) = hill_monodromy(|t| w0sq * (1.0 + a * (w * t + phase).sin()), drive.period(), steps);
    let result = summarize(m, det, drive.period(), steps, Some(*drive));
    if !result.trace.is_finite() {
        return Err(Error::NonConvergence(format!(
            "monodromy overflowed at alpha={}, Omega={}",
            drive.alpha, drive.omega_rel
        )));
    }
    Ok(result)
}

/// Like [`linearized_monodromy`] at the default steps, failing when
/// doubling the steps flips the stability verdict.
pub fn checked_monodromy(drive: &DriveParams) -> Result<MonodromyResult> {
    let steps = default_classical_steps(drive);
    let coarse = linearized_monodromy(drive, steps)?;
    let fine = linearized_monodromy(drive, 2 * steps)?;
    if coarse.stable != fine.stable {
        return Err(Error::NonConvergence(format!(
            "stability changes under step doubling at alpha={}, Omega={} (|trace| {} vs {})",
            drive.alpha,
            drive.omega_rel,
            coarse.trace.abs(),
            fine.trace.abs()
        )));
    }
    Ok(fine)
}

/// Mathieu parameters `(a, q)` of a drive: `a = 4/Omega^2`, `q = 2 alpha/Omega^2`.
pub fn mathieu_parameters(drive: &DriveParams) -> (f64, f64) {
    let w2 = drive.omega_rel * drive.omega_rel;
    (4.0 / w2, 2.0 * drive.alpha / w2)
}

/// Monodromy of `y'' + (a - 2 q cos 2 tau) y = 0` over `tau in [0, pi]`.
pub fn mathieu_monodromy(a: f64, q: f64, steps: usize) -> Result<MonodromyResult> {
    if !(a.is_finite() && q.is_finite()) {
        return Err(Error::invalid(format!("Mathieu parameters must be finite, got a={a}, q={q}")));
    }
    if steps < 64 {
        return Err(Error::invalid(format!("monodromy needs at least 64 steps, got {steps}")));
    }
    let (m, det, _) = hill_monodromy(|tau| a - 2.0 * q * (2.0 * tau).cos(), PI, steps);
    Ok(summarize(m, det, PI, steps, None))
}

/// Level-set curve of `|trace| = 2` in `(alpha, Omega)` coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Boundary {
    /// `(alpha, Omega)` vertices.
    pub points: Vec<(f64, f64)>,
    pub closed: bool,
}

/// Stability channels over a grid plus the `|trace| = 2` boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityMap {
    /// Channels `stable` (1 or 0), `abs_trace` and `growth_rate`.
    pub map: ParameterMap,
    pub boundary: Vec<Boundary>,
}

impl StabilityMap {
    pub fn is_stable(&self, alpha_index: usize, omega_index: usize) -> Option<bool> {
        self.map.value("stable", alpha_index, omega_index).filter(|v| v.is_finite()).map(|v| v == 1.0)
    }
}

/// Classical stability of every cell, computed in parallel.
pub fn stability_map(grid: &ParameterGrid, v0: f64, phase: f64) -> Result<StabilityMap> {
    grid.validate()?;
    let names: Vec<String> = ["stable", "abs_trace", "growth_rate"].iter().map(|s| s.to_string()).collect();
    let cells: Vec<(usize, usize)> = grid.cells().collect();
    let results: Vec<Result<MonodromyResult>> = cells
        .par_iter()
        .map(|&(i, j)| {
            let drive = DriveParams::new(v0, grid.alpha[i], grid.omega[j])?.with_phase(phase)?;
            checked_monodromy(&drive)
        })
        .collect();

    let mut map = ParameterMap::new(grid.clone(), &names, MapMetadata::new(v0));
    map.metadata.extra.insert("model".into(), "linearized pendulum".into());
    map.metadata.extra.insert("phase".into(), phase.into());
    // log(|trace|/2) changes sign on the boundary and stays finite.
    let mut level = vec![vec![f64::NAN; grid.omega.len()]; grid.alpha.len()];
    for (&(i, j), result) in cells.iter().zip(results) {
        match result {
            Ok(m) => {
                map.channels[0].values[i][j] = if m.stable { 1.0 } else { 0.0 };
                map.channels[1].values[i][j] = m.trace.abs();
                map.channels[2].values[i][j] = m.growth_rate();
                level[i][j] = (0.5 * m.trace.abs()).ln();
            }
            Err(e) => map.metadata.flags.push(CellFlag {
                alpha_index: i,
                omega_index: j,
                kind: FlagKind::Failed,
                message: e.to_string(),
            }),
        }
    }
    let boundary = level_set(&level, 0.0)
        .into_iter()
        .map(|line| Boundary {
            points: line
                .points
                .iter()
                .map(|&(i, j)| (axis_position(&grid.alpha, i), axis_position(&grid.omega, j)))
                .collect(),
            closed: line.closed,
        })
        .collect();
    Ok(StabilityMap { map, boundary })
}

/// Angle and angular velocity sampled once per step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub theta: Vec<f64>,
    pub theta_dot: Vec<f64>,
}

/// Velocity-Verlet integration of the full pendulum with `steps` equal
/// steps from `0` to `t_final`.
pub fn nonlinear_trajectory(
    drive: &DriveParams,
    theta0: f64,
    theta_dot0: f64,
    t_final: f64,
    steps: usize,
) -> Result<Trajectory> {
    if !(theta0.is_finite() && theta_dot0.is_finite()) {
        return Err(Error::invalid("initial conditions must be finite"));
    }
    if !(t_final.is_finite() && t_final > 0.0) || steps == 0 {
        return Err(Error::invalid("need t_final > 0 and at least one step"));
    }
    let h = t_final / steps as f64;
    let fastest = drive.omega0() * (1.0 + drive.alpha).sqrt();
    if h * fastest > 0.5 {
        return Err(Error::NonConvergence(format!(
            "step {h:.3e} too coarse for local frequency {fastest:.3e} (need h*omega <= 0.5)"
        )));
    }
    let w0sq = drive.omega0().powi(2);
    let force = |t: f64, th: f64| -w0sq * (1.0 + drive.alpha * (drive.omega() * t + drive.phase).sin()) * th.sin();

    let mut out = Trajectory {
        times: Vec::with_capacity(steps + 1),
        theta: Vec::with_capacity(steps + 1),
        theta_dot: Vec::with_capacity(steps + 1),
    };
    let (mut th, mut v) = (theta0, theta_dot0);
    out.times.push(0.0);
    out.theta.push(th);
    out.theta_dot.push(v);
    for k in 0..steps {
        let t = k as f64 * h;
        v += 0.5 * h * force(t, th);
        th += h * v;
        v += 0.5 * h * force(t + h, th);
        if !th.is_finite() || !v.is_finite() {
            return Err(Error::NonConvergence(format!("trajectory diverged at t = {}", t + h)));
        }
        out.times.push(t + h);
        out.theta.push(th);
        out.theta_dot.push(v);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    #[test]
    fn undriven_trace_is_harmonic() {
        for &w in &[0.3, 0.9, 1.7, 2.0, 5.0] {
            let d = DriveParams::new(10.0, 0.0, w).unwrap();
            let m = linearized_monodromy(&d, default_classical_steps(&d)).unwrap();
            assert!((m.trace - 2.0 * (TAU / w).cos()).abs() < 1e-8, "Omega {w}");
            assert!(m.stable);
            assert!((m.det - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn drive_and_mathieu_forms_agree() {
        let d = DriveParams::new(10.0, 0.7, 1.6).unwrap();
        let (a, q) = mathieu_parameters(&d);
        let m1 = linearized_monodromy(&d, 4096).unwrap();
        let m2 = mathieu_monodromy(a, q, 4096).unwrap();
        assert!((m1.trace - m2.trace).abs() < 1e-8 * m1.trace.abs().max(1.0));
    }

    #[test]
    fn principal_tongue() {
        assert!(!mathieu_monodromy(1.0, 0.1, 2048).unwrap().stable);
        assert!(mathieu_monodromy(1.3, 0.1, 2048).unwrap().stable);
        assert!(mathieu_monodromy(1.0, 0.1, 10).is_err());
    }

    #[test]
    fn determinant_survives_strong_instability() {
        let d = DriveParams::new(10.0, 10.0, 0.1).unwrap();
        let m = checked_monodromy(&d).unwrap();
        assert!(!m.stable);
        assert!(m.log_multiplier > 10.0);
        assert!((m.det - 1.0).abs() < 1e-8, "det {}", m.det);
    }

    #[test]
    fn trajectory_fixed_point_and_period() {
        let d = DriveParams::new(10.0, 0.0, 1.0).unwrap();
        let t = nonlinear_trajectory(&d, 0.0, 0.0, 5.0, 2000).unwrap();
        assert!(t.theta.iter().all(|x| *x == 0.0));

        let period = TAU / d.omega0();
        let t = nonlinear_trajectory(&d, 1e-3, 0.0, 3.0 * period, 30_000).unwrap();
        // Downward zero crossings of theta_dot mark returns to the start.
        let mut crossings = Vec::new();
        for k in 1..t.times.len() {
            let (a, b) = (t.theta_dot[k - 1], t.theta_dot[k]);
            if a > 0.0 && b <= 0.0 {
                crossings.push(t.times[k - 1] + (t.times[k] - t.times[k - 1]) * a / (a - b));
            }
        }
        let measured = crossings[1] - crossings[0];
        assert!((measured / period - 1.0).abs() < 1e-4, "{measured} vs {period}");
        assert!(nonlinear_trajectory(&d, 0.1, 0.0, 10.0, 10).is_err());
    }

    #[test]
    fn undriven_row_stable_on_map() {
        let grid = ParameterGrid::from_axes(vec![0.0, 0.5], vec![0.3, 1.0, 2.0, 4.0]).unwrap();
        let s = stability_map(&grid, 10.0, 0.0).unwrap();
        assert!((0..4).all(|j| s.is_stable(0, j) == Some(true)));
        assert_eq!(s.is_stable(1, 2), Some(false));
    }
}
