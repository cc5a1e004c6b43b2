//! One-period propagator, Floquet modes, quasienergies and the inverse
//! participation ratio of an initial state in the Floquet basis.

use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{pivot_index, Parity, PlaneWaveBasis};
pub use crate::propagate::Scheme;
use crate::propagate::{SplitComplex, SubstepIntegrator};
use crate::units::DriveParams;

/// Eigenphases closer than this (radians) are treated as one cluster.
pub const DEGENERACY_THRESHOLD_RAD: f64 = 1e-10;

/// Default substeps per period, `max(512, ceil(160 (alpha T^3 m_max^2)^(1/4)))`.
///
/// Calibrated against step doubling at `v0 = 10` so that doubling changes
/// `U(T)` by well under `1e-8` over `alpha, Omega` in `[0.1, 10]`.
pub fn default_steps(drive: &DriveParams, basis: &PlaneWaveBasis) -> usize {
    let m = basis.m_max as f64;
    let scale = drive.alpha * drive.period().powi(3) * m * m;
    ((160.0 * scale.powf(0.25)).ceil() as usize).max(512)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorSettings {
    /// Substeps per period; `None` uses [`default_steps`].
    pub steps: Option<usize>,
    /// When set, the propagator is recomputed with twice the substeps and
    /// the run fails if the two differ by more than this in max-norm.
    pub convergence_tol: Option<f64>,
    pub scheme: Scheme,
}

impl Default for IntegratorSettings {
    fn default() -> Self {
        Self { steps: None, convergence_tol: None, scheme: Scheme::default() }
    }
}

impl IntegratorSettings {
    pub fn with_steps(steps: usize) -> Self {
        Self { steps: Some(steps), ..Self::default() }
    }

    pub fn steps_for(&self, drive: &DriveParams, basis: &PlaneWaveBasis) -> usize {
        self.steps.unwrap_or_else(|| default_steps(drive, basis))
    }
}

/// `U(T)` as a time-ordered product over `steps` substeps of the default scheme.
pub fn one_period_propagator(drive: &DriveParams, basis: &PlaneWaveBasis, steps: usize) -> Result<DMatrix<Complex64>> {
    propagator_with_scheme(drive, basis, steps, Scheme::default())
}

pub fn propagator_with_scheme(
    drive: &DriveParams,
    basis: &PlaneWaveBasis,
    steps: usize,
    scheme: Scheme,
) -> Result<DMatrix<Complex64>> {
    if steps == 0 {
        return Err(Error::invalid("need at least one substep per period"));
    }
    let integ = SubstepIntegrator::new(*drive, *basis, steps, scheme);
    Ok(integ.embed(&integ.period_sector_unitaries()))
}

/// Like [`one_period_propagator`] but honours the step-doubling check.
pub fn checked_propagator(
    drive: &DriveParams,
    basis: &PlaneWaveBasis,
    settings: &IntegratorSettings,
) -> Result<DMatrix<Complex64>> {
    let steps = settings.steps_for(drive, basis);
    let u = propagator_with_scheme(drive, basis, steps, settings.scheme)?;
    if let Some(tol) = settings.convergence_tol {
        let fine = propagator_with_scheme(drive, basis, 2 * steps, settings.scheme)?;
        let diff = max_abs(&(&fine - &u));
        if diff > tol {
            return Err(Error::NonConvergence(format!(
                "doubling {steps} substeps changed U(T) by {diff:.3e} > {tol:.1e} \
                 (alpha={}, Omega={})",
                drive.alpha, drive.omega_rel
            )));
        }
    }
    Ok(u)
}

/// Quasienergies and Floquet modes at `t = 0`, sorted by quasienergy.
#[derive(Debug, Clone)]
pub struct FloquetSpectrum {
    /// Quasienergies in E_R, folded into `[-omega/2, omega/2)`.
    pub quasienergies: Vec<f64>,
    /// Modes `|n(0)>` as columns in the plane-wave basis.
    pub modes: DMatrix<Complex64>,
    /// Parity of each mode at `q = 0`.
    pub parity: Vec<Option<Parity>>,
    pub drive: DriveParams,
    pub basis: PlaneWaveBasis,
    /// Smallest separation between eigenphases within one symmetry sector.
    pub min_phase_gap: f64,
    /// Set when some eigenphases were closer than [`DEGENERACY_THRESHOLD_RAD`].
    pub degenerate: bool,
}

impl FloquetSpectrum {
    pub fn dim(&self) -> usize {
        self.quasienergies.len()
    }

    pub fn mode(&self, n: usize) -> DVector<Complex64> {
        self.modes.column(n).into_owned()
    }

    /// `sum_n exp(-i eps_n T) |n(0)><n(0)|`.
    pub fn reconstruct(&self) -> DMatrix<Complex64> {
        let t = self.drive.period();
        let phases = DVector::from_iterator(
            self.dim(),
            self.quasienergies.iter().map(|e| Complex64::from_polar(1.0, -e * t)),
        );
        let scaled = DMatrix::from_fn(self.dim(), self.dim(), |i, j| self.modes[(i, j)] * phases[j]);
        scaled * self.modes.adjoint()
    }
}

/// Largest entry modulus of a real or complex matrix.
pub fn max_abs<T, R, C, S>(m: &nalgebra::Matrix<T, R, C, S>) -> f64
where
    T: nalgebra::ComplexField<RealField = f64>,
    R: nalgebra::Dim,
    C: nalgebra::Dim,
    S: nalgebra::RawStorage<T, R, C>,
{
    m.iter().map(|z| z.clone().modulus()).fold(0.0, f64::max)
}

/// Folds a quasienergy into `[-omega/2, omega/2)`.
pub fn fold_quasienergy(eps: f64, omega: f64) -> f64 {
    let folded = eps - omega * ((eps + 0.5 * omega) / omega).floor();
    if folded >= 0.5 * omega {
        folded - omega
    } else {
        folded
    }
}

/// Diagonalizes a one-period propagator.
///
/// `u` must be the propagator of `drive` in `basis`. At `q = 0` each parity
/// block is diagonalized on its own, so modes carry a definite parity.
pub fn floquet_modes(u: &DMatrix<Complex64>, drive: &DriveParams, basis: &PlaneWaveBasis) -> Result<FloquetSpectrum> {
    let dim = basis.dim();
    if u.nrows() != dim || u.ncols() != dim {
        return Err(Error::DimensionMismatch { expected: dim, actual: u.nrows() });
    }
    let integ = SubstepIntegrator::new(*drive, *basis, 1, Scheme::default());
    let full = SplitComplex::from_complex(u);
    let period = drive.period();
    let omega = drive.omega();

    let mut entries: Vec<(f64, DVector<Complex64>, Option<Parity>)> = Vec::with_capacity(dim);
    let mut min_gap = f64::INFINITY;
    for sector in &integ.sectors {
        let block = full.left_real(&sector.embed.transpose()).right_real(&sector.embed).to_complex();
        let (phases, vectors, gap) = unitary_eigh(block)?;
        min_gap = min_gap.min(gap);
        let embedded = SplitComplex::from_complex(&vectors).left_real(&sector.embed).to_complex();
        for (j, phase) in phases.iter().enumerate() {
            let mut v = embedded.column(j).into_owned();
            let p = pivot_index(v.iter().map(|z| z.norm()));
            let rot = v[p].conj() / v[p].norm();
            v *= rot;
            entries.push((fold_quasienergy(-phase / period, omega), v, sector.parity));
        }
    }
    entries.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut modes = DMatrix::zeros(dim, dim);
    for (j, (_, v, _)) in entries.iter().enumerate() {
        modes.set_column(j, v);
    }
    Ok(FloquetSpectrum {
        quasienergies: entries.iter().map(|e| e.0).collect(),
        parity: entries.iter().map(|e| e.2).collect(),
        modes,
        drive: *drive,
        basis: *basis,
        min_phase_gap: min_gap,
        degenerate: min_gap < DEGENERACY_THRESHOLD_RAD,
    })
}

/// Builds and diagonalizes `U(T)` in one go.
pub fn floquet_spectrum(drive: &DriveParams, basis: &PlaneWaveBasis, settings: &IntegratorSettings) -> Result<FloquetSpectrum> {
    let u = checked_propagator(drive, basis, settings)?;
    floquet_modes(&u, drive, basis)
}

/// Eigenphases in `(-pi, pi]`, orthonormal eigenvectors and the smallest
/// circular gap between eigenphases of a unitary matrix.
///
/// Uses the complex Schur form, which is diagonal for a normal matrix; its
/// Schur vectors are orthonormal even inside degenerate clusters.
fn unitary_eigh(u: DMatrix<Complex64>) -> Result<(Vec<f64>, DMatrix<Complex64>, f64)> {
    let n = u.nrows();
    let schur = nalgebra::Schur::try_new(u.clone(), 1e-15, 10_000)
        .ok_or_else(|| Error::NonConvergence("Schur decomposition of U(T) did not converge".into()))?;
    let (mut q, _) = schur.unpack();

    // Rayleigh quotients are more accurate than the triangular diagonal.
    let uq = &u * &q;
    let mut phases: Vec<f64> = (0..n).map(|j| q.column(j).dotc(&uq.column(j)).arg()).collect();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| phases[a].total_cmp(&phases[b]));
    phases = order.iter().map(|&i| phases[i]).collect();
    q = DMatrix::from_fn(n, n, |r, c| q[(r, order[c])]);

    let mut min_gap = f64::INFINITY;
    if n > 1 {
        for j in 0..n {
            let next = if j + 1 < n { phases[j + 1] } else { phases[0] + TAU };
            min_gap = min_gap.min((next - phases[j]).abs());
        }
    }

    // Re-orthonormalize within near-degenerate clusters.
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && phases[end] - phases[end - 1] < DEGENERACY_THRESHOLD_RAD {
            end += 1;
        }
        if end - start > 1 {
            gram_schmidt(&mut q, start, end);
        }
        start = end;
    }
    debug_assert!(phases.iter().all(|p| p.abs() <= PI + 1e-12));
    Ok((phases, q, min_gap))
}

fn gram_schmidt(q: &mut DMatrix<Complex64>, start: usize, end: usize) {
    for j in start..end {
        let mut v = q.column(j).into_owned();
        for i in start..j {
            let prev = q.column(i).into_owned();
            let proj = prev.dotc(&v);
            v -= prev * proj;
        }
        let norm = v.norm();
        q.set_column(j, &(v / Complex64::new(norm, 0.0)));
    }
}

/// Amplitudes `c_n = <n(0)|psi0>` of an initial state in the Floquet basis.
#[derive(Debug, Clone)]
pub struct OverlapVector {
    pub c: DVector<Complex64>,
}

impl OverlapVector {
    /// Populations `|c_n|^2`.
    pub fn weights(&self) -> Vec<f64> {
        self.c.iter().map(|z| z.norm_sqr()).collect()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.weights().iter().sum()
    }
}

/// `<a|b>` with the same summation order everywhere it is used.
pub(crate) fn inner(a: &DVector<Complex64>, b: &DVector<Complex64>) -> Complex64 {
    a.iter().zip(b.iter()).fold(Complex64::new(0.0, 0.0), |acc, (x, y)| acc + x.conj() * y)
}

/// `|<a_j|b>|^2` for each column `a_j` of `cols`.
pub(crate) fn column_weights(cols: &DMatrix<Complex64>, b: &DVector<Complex64>) -> Vec<f64> {
    (0..cols.ncols()).map(|j| inner(&cols.column(j).into_owned(), b).norm_sqr()).collect()
}

pub fn overlaps(psi0: &DVector<Complex64>, spec: &FloquetSpectrum) -> Result<OverlapVector> {
    if psi0.len() != spec.dim() {
        return Err(Error::DimensionMismatch { expected: spec.dim(), actual: psi0.len() });
    }
    let c = DVector::from_iterator(spec.dim(), (0..spec.dim()).map(|n| inner(&spec.mode(n), psi0)));
    Ok(OverlapVector { c })
}

/// Inverse participation ratio `sum_n |c_n|^4`.
pub fn ipr(c: &OverlapVector) -> f64 {
    c.weights().iter().map(|w| w * w).sum()
}

/// Participation ratio, the effective number of Floquet modes.
pub fn participation_ratio(c: &OverlapVector) -> f64 {
    1.0 / ipr(c)
}
