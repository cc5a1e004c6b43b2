//! Exponential substep integrator shared by the Floquet and real-time
//! modules.
//!
//! A time window is split into equal substeps. Each substep is a product of
//! exact exponentials `exp(-i H dt)` of the real symmetric, tridiagonal
//! sector Hamiltonian at fixed depths, so every step is unitary to rounding.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use serde::{Deserialize, Serialize};

use crate::lattice::{sectors, PlaneWaveBasis, Sector};
use crate::units::DriveParams;

/// Complex `n x k` matrix stored as the real `n x 2k` block `[re | im]`, so
/// a real left factor costs one product.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct SplitComplex {
    data: DMatrix<f64>,
    cols: usize,
}

impl SplitComplex {
    fn from_parts(re: &DMatrix<f64>, im: &DMatrix<f64>) -> Self {
        let (n, k) = re.shape();
        let mut data = DMatrix::zeros(n, 2 * k);
        data.columns_mut(0, k).copy_from(re);
        data.columns_mut(k, k).copy_from(im);
        Self { data, cols: k }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_parts(&DMatrix::identity(n, n), &DMatrix::zeros(n, n))
    }

    pub fn from_complex(m: &DMatrix<Complex64>) -> Self {
        Self::from_parts(&m.map(|z| z.re), &m.map(|z| z.im))
    }

    pub fn from_vector(v: &DVector<Complex64>) -> Self {
        let re = DMatrix::from_fn(v.len(), 1, |i, _| v[i].re);
        let im = DMatrix::from_fn(v.len(), 1, |i, _| v[i].im);
        Self::from_parts(&re, &im)
    }

    pub fn re(&self) -> DMatrix<f64> {
        self.data.columns(0, self.cols).into_owned()
    }

    pub fn im(&self) -> DMatrix<f64> {
        self.data.columns(self.cols, self.cols).into_owned()
    }

    pub fn to_complex(&self) -> DMatrix<Complex64> {
        self.re().zip_map(&self.im(), Complex64::new)
    }

    /// First column as a complex vector.
    pub fn to_vector(&self) -> DVector<Complex64> {
        DVector::from_fn(self.data.nrows(), |i, _| Complex64::new(self.data[(i, 0)], self.data[(i, self.cols)]))
    }

    /// `A * self` for a real matrix `A`.
    pub fn left_real(&self, a: &DMatrix<f64>) -> Self {
        Self { data: a * &self.data, cols: self.cols }
    }

    /// `self * B` for a real matrix `B`.
    pub fn right_real(&self, b: &DMatrix<f64>) -> Self {
        Self::from_parts(&(self.re() * b), &(self.im() * b))
    }

    /// Complex product `self * other`.
    pub fn mul(&self, other: &Self) -> Self {
        let (ar, ai) = (self.re(), self.im());
        let prod = Self { data: &ar * &other.data, cols: other.cols };
        let cross = &ai * &other.data;
        // (ar + i ai)(br + i bi) = ar br - ai bi + i (ar bi + ai br)
        let k = other.cols;
        let mut data = prod.data;
        {
            let (mut re, mut im) = data.columns_range_pair_mut(0..k, k..2 * k);
            re -= cross.columns(k, k);
            im += cross.columns(0, k);
        }
        Self { data, cols: k }
    }
}

/// Applies `exp(-i H dt)` to `state` given the eigen-decomposition of `H`.
pub(crate) fn apply_exponential(values: &[f64], vectors: &DMatrix<f64>, dt: f64, state: &mut SplitComplex) {
    let mut w = vectors.tr_mul(&state.data);
    let k = state.cols;
    for (row, &lambda) in values.iter().enumerate() {
        let (s, c) = (lambda * dt).sin_cos();
        for j in 0..k {
            let (a, b) = (w[(row, j)], w[(row, j + k)]);
            w[(row, j)] = c * a + s * b;
            w[(row, j + k)] = c * b - s * a;
        }
    }
    state.data = vectors * w;
}

/// Time-stepping rule inside one substep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// One exponential with the depth frozen at the substep midpoint
    /// (second order).
    Midpoint,
    /// Fourth-order commutator-free Magnus: two half-length exponentials
    /// whose depths are weighted combinations of the two Gauss-Legendre
    /// nodes.
    #[default]
    Magnus4,
}

/// Drive, basis and substep count; knows how to advance sector states.
#[derive(Debug, Clone)]
pub(crate) struct SubstepIntegrator {
    pub drive: DriveParams,
    pub basis: PlaneWaveBasis,
    /// Substeps per drive period.
    pub steps: usize,
    pub scheme: Scheme,
    pub sectors: Vec<Sector>,
}

impl SubstepIntegrator {
    pub fn new(drive: DriveParams, basis: PlaneWaveBasis, steps: usize, scheme: Scheme) -> Self {
        Self { drive, basis, steps: steps.max(1), scheme, sectors: sectors(&basis) }
    }

    pub fn dt(&self) -> f64 {
        self.drive.period() / self.steps as f64
    }

    /// Advances a sector state over substeps `first..last` of one period.
    pub fn advance_substeps(&self, sector: usize, first: usize, last: usize, state: &mut SplitComplex) {
        let dt = self.dt();
        for k in first..last {
            self.substep(sector, k as f64 * dt, dt, state);
        }
    }

    /// One substep of length `h` (negative to go backwards) starting at `t`.
    pub fn substep(&self, sector: usize, t: f64, h: f64, state: &mut SplitComplex) {
        let s = &self.sectors[sector];
        match self.scheme {
            Scheme::Midpoint => {
                let (values, vectors) = s.eigh(self.drive.depth(t + 0.5 * h));
                apply_exponential(&values, &vectors, h, state);
            }
            Scheme::Magnus4 => {
                // H is affine in the depth, so each exponent is H at an
                // effective depth applied for half the substep.
                let c = 3f64.sqrt() / 6.0;
                let (w_near, w_far) = (0.25 + c, 0.25 - c);
                let f1 = self.drive.depth(t + (0.5 - c) * h);
                let f2 = self.drive.depth(t + (0.5 + c) * h);
                for depth in [2.0 * (w_near * f1 + w_far * f2), 2.0 * (w_far * f1 + w_near * f2)] {
                    let (values, vectors) = s.eigh(depth);
                    apply_exponential(&values, &vectors, 0.5 * h, state);
                }
            }
        }
    }

    /// Advances from `t0` to `t1` (either direction) with midpoint substeps of
    /// at most `dt()`. Windows that are not a whole number of substeps end
    /// with one shorter substep.
    pub fn advance_interval(&self, sector: usize, t0: f64, t1: f64, state: &mut SplitComplex) {
        let span = t1 - t0;
        if span == 0.0 {
            return;
        }
        let n = (span.abs() / self.dt() - 1e-9).ceil().max(1.0) as usize;
        let h = span / n as f64;
        for k in 0..n {
            self.substep(sector, t0 + k as f64 * h, h, state);
        }
    }

    /// One-period propagator of each sector, in sector coordinates.
    pub fn period_sector_unitaries(&self) -> Vec<SplitComplex> {
        (0..self.sectors.len())
            .map(|s| {
                let mut u = SplitComplex::identity(self.sectors[s].dim());
                self.advance_substeps(s, 0, self.steps, &mut u);
                u
            })
            .collect()
    }

    /// Assembles sector blocks back into the plane-wave basis.
    pub fn embed(&self, blocks: &[SplitComplex]) -> DMatrix<Complex64> {
        let n = self.basis.dim();
        let mut out = DMatrix::zeros(n, n);
        for (sector, block) in self.sectors.iter().zip(blocks) {
            let e = &sector.embed;
            out += block.left_real(e).right_real(&e.transpose()).to_complex();
        }
        out
    }

    /// Splits a plane-wave state into sector coordinates.
    pub fn split_state(&self, psi: &DVector<Complex64>) -> Vec<SplitComplex> {
        let full = SplitComplex::from_vector(psi);
        self.sectors.iter().map(|s| full.left_real(&s.embed.transpose())).collect()
    }

    pub fn join_state(&self, parts: &[SplitComplex]) -> DVector<Complex64> {
        let mut out = DVector::zeros(self.basis.dim());
        for (sector, part) in self.sectors.iter().zip(parts) {
            out += part.left_real(&sector.embed).to_vector();
        }
        out
    }
}
