//! Plane-wave representation of the 1D lattice and its static Bloch bands.
//!
//! In the basis `|m>` with momentum `(2m + q) k_L` the Hamiltonian is
//! `(2m + q)^2` on the diagonal and `V/4` between neighbouring `m`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Truncated set of plane waves `m = -m_max ..= m_max` at quasimomentum `q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlaneWaveBasis {
    pub m_max: usize,
    /// Quasimomentum in units of k_L, within `[-1, 1]`.
    pub q: f64,
}

impl PlaneWaveBasis {
    pub fn new(m_max: usize, q: f64) -> Result<Self> {
        if m_max < 1 {
            return Err(Error::invalid("m_max must be at least 1 (three plane waves)"));
        }
        if !(q.is_finite() && (-1.0..=1.0).contains(&q)) {
            return Err(Error::invalid(format!("quasimomentum {q} outside [-1, 1]")));
        }
        Ok(Self { m_max, q })
    }

    pub fn dim(&self) -> usize {
        2 * self.m_max + 1
    }

    /// Row index of plane wave `m`.
    pub fn index(&self, m: i64) -> usize {
        (m + self.m_max as i64) as usize
    }

    /// Plane-wave label of row `i`.
    pub fn m_of(&self, i: usize) -> i64 {
        i as i64 - self.m_max as i64
    }

    /// Kinetic energy `(2m + q)^2` of each plane wave.
    pub fn kinetic(&self) -> DVector<f64> {
        DVector::from_fn(self.dim(), |i, _| {
            let k = 2.0 * self.m_of(i) as f64 + self.q;
            k * k
        })
    }

    /// Mirror symmetry `m -> -m` is exact only at zero quasimomentum.
    pub fn has_parity(&self) -> bool {
        self.q == 0.0
    }

    /// Plane-wave state `|m>`.
    pub fn plane_wave(&self, m: i64) -> DVector<Complex64> {
        let mut v = DVector::zeros(self.dim());
        v[self.index(m)] = Complex64::new(1.0, 0.0);
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
}

/// Static plus driven parts of the Hamiltonian, `H = diag(kinetic) + depth * coupling`.
pub fn hamiltonian_matrix(basis: &PlaneWaveBasis, depth: f64) -> DMatrix<f64> {
    let mut h = DMatrix::from_diagonal(&basis.kinetic());
    for i in 0..basis.dim() - 1 {
        h[(i, i + 1)] = depth / 4.0;
        h[(i + 1, i)] = depth / 4.0;
    }
    h
}

/// An invariant subspace of the Hamiltonian for every depth.
///
/// At `q = 0` the basis splits into even and odd combinations of `|±m>`;
/// otherwise there is a single sector spanning the full basis. In every
/// case the sector Hamiltonian is tridiagonal.
#[derive(Debug, Clone)]
pub(crate) struct Sector {
    /// Orthonormal columns spanning the sector, `dim x sector_dim`.
    pub embed: DMatrix<f64>,
    pub kinetic: DVector<f64>,
    /// Off-diagonal couplings per unit depth, `sector_dim - 1` entries.
    pub offdiag: DVector<f64>,
    pub parity: Option<Parity>,
}

impl Sector {
    pub fn dim(&self) -> usize {
        self.kinetic.len()
    }

    #[cfg(test)]
    pub fn hamiltonian(&self, depth: f64) -> DMatrix<f64> {
        let mut h = DMatrix::from_diagonal(&self.kinetic);
        for (i, c) in self.offdiag.iter().enumerate() {
            h[(i, i + 1)] = c * depth;
            h[(i + 1, i)] = c * depth;
        }
        h
    }

    /// Eigenvalues (unsorted) and eigenvectors of the sector Hamiltonian.
    pub fn eigh(&self, depth: f64) -> (Vec<f64>, DMatrix<f64>) {
        let off: Vec<f64> = self.offdiag.iter().map(|c| c * depth).collect();
        tridiagonal_eigh(self.kinetic.as_slice(), &off)
    }

    /// Eigen-decomposition with ascending eigenvalues.
    pub fn sorted_eigh(&self, depth: f64) -> (Vec<f64>, DMatrix<f64>) {
        let (values, vectors) = self.eigh(depth);
        let n = values.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let sorted = order.iter().map(|&i| values[i]).collect();
        let vectors = DMatrix::from_fn(n, n, |r, c| vectors[(r, order[c])]);
        (sorted, vectors)
    }
}

pub(crate) fn sectors(basis: &PlaneWaveBasis) -> Vec<Sector> {
    let dim = basis.dim();
    let full_coupling = hamiltonian_matrix(basis, 1.0) - DMatrix::from_diagonal(&basis.kinetic());
    let kinetic_full = basis.kinetic();

    let build = |embed: DMatrix<f64>, parity: Option<Parity>| {
        let n = embed.ncols();
        let kinetic = DVector::from_fn(n, |j, _| {
            embed.column(j).iter().zip(kinetic_full.iter()).map(|(e, k)| e * e * k).sum()
        });
        let coupling = embed.transpose() * &full_coupling * &embed;
        debug_assert!((0..n).all(|i| (0..n).all(|j| i.abs_diff(j) == 1 || coupling[(i, j)].abs() < 1e-14)));
        let offdiag = DVector::from_fn(n.saturating_sub(1), |i, _| coupling[(i, i + 1)]);
        Sector { embed, kinetic, offdiag, parity }
    };

    if !basis.has_parity() {
        return vec![build(DMatrix::identity(dim, dim), None)];
    }

    let m_max = basis.m_max;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut even = DMatrix::zeros(dim, m_max + 1);
    even[(basis.index(0), 0)] = 1.0;
    let mut odd = DMatrix::zeros(dim, m_max);
    for k in 1..=m_max {
        let (p, n) = (basis.index(k as i64), basis.index(-(k as i64)));
        even[(p, k)] = s;
        even[(n, k)] = s;
        odd[(p, k - 1)] = s;
        odd[(n, k - 1)] = -s;
    }
    vec![build(even, Some(Parity::Even)), build(odd, Some(Parity::Odd))]
}

/// Symmetric tridiagonal eigensolver (implicit QL with Wilkinson shifts).
///
/// `diag` has `n` entries and `off` has `n - 1`. Returns unsorted
/// eigenvalues and the matching orthonormal eigenvectors as columns.
pub fn tridiagonal_eigh(diag: &[f64], off: &[f64]) -> (Vec<f64>, DMatrix<f64>) {
    let n = diag.len();
    let mut d = diag.to_vec();
    let mut e = vec![0.0; n];
    let n_off = n.saturating_sub(1);
    e[..n_off].copy_from_slice(&off[..n_off]);
    let mut z = DMatrix::<f64>::identity(n, n);

    for l in 0..n {
        let mut iterations = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let scale = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * scale {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iterations += 1;
            assert!(iterations < 200, "tridiagonal QL failed to converge");

            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = (g * g + 1.0).sqrt();
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;
            for i in (l..m).rev() {
                let f = s * e[i];
                let b = c * e[i];
                r = (f * f + g * g).sqrt();
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                let (head, tail) = z.as_mut_slice().split_at_mut((i + 1) * n);
                for (zi, zj) in head[i * n..].iter_mut().zip(&mut tail[..n]) {
                    let f = *zj;
                    *zj = s * *zi + c * f;
                    *zi = c * *zi - s * f;
                }
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    (d, z)
}

/// Index of the first component whose magnitude is within rounding of the maximum.
pub(crate) fn pivot_index<I: IntoIterator<Item = f64>>(magnitudes: I) -> usize {
    let mags: Vec<f64> = magnitudes.into_iter().collect();
    let max = mags.iter().cloned().fold(0.0, f64::max);
    mags.iter().position(|&m| m >= max * (1.0 - 1e-9)).unwrap_or(0)
}

/// Static Bloch bands at one quasimomentum.
#[derive(Debug, Clone)]
pub struct BlochSpectrum {
    /// Band energies in E_R, ascending.
    pub energies: Vec<f64>,
    /// Band states as columns, in the plane-wave basis.
    pub states: DMatrix<Complex64>,
    /// Parity of each band at `q = 0`, `None` elsewhere.
    pub parity: Vec<Option<Parity>>,
    pub basis: PlaneWaveBasis,
    pub v0: f64,
}

impl BlochSpectrum {
    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    /// Largest band index that is trusted at this truncation.
    pub fn max_converged_band(&self) -> usize {
        self.dim() - 3
    }

    /// Errors when the top of the truncated spectrum would be requested.
    pub fn check_band(&self, band: usize) -> Result<()> {
        if band + 2 >= self.dim() {
            return Err(Error::TruncationTooSmall { band, dim: self.dim() });
        }
        Ok(())
    }

    pub fn energy(&self, band: usize) -> Result<f64> {
        self.check_band(band)?;
        Ok(self.energies[band])
    }

    pub fn state(&self, band: usize) -> Result<DVector<Complex64>> {
        self.check_band(band)?;
        Ok(self.states.column(band).into_owned())
    }

    /// Ground band state.
    pub fn ground_state(&self) -> DVector<Complex64> {
        self.states.column(0).into_owned()
    }
}

/// Diagonalizes the static lattice of depth `v0` (E_R) in `basis`.
///
/// At `q = 0` the even and odd sectors are diagonalized separately so every
/// band has a definite parity even where bands are nearly degenerate. Each
/// state is fixed so its largest component is real and positive.
pub fn bloch_bands(v0: f64, basis: &PlaneWaveBasis) -> BlochSpectrum {
    let dim = basis.dim();
    let mut entries: Vec<(f64, DVector<f64>, Option<Parity>)> = Vec::with_capacity(dim);
    for sector in sectors(basis) {
        let (values, vectors) = sector.sorted_eigh(v0);
        let full = &sector.embed * vectors;
        for (j, &e) in values.iter().enumerate() {
            let mut v = full.column(j).into_owned();
            let p = pivot_index(v.iter().map(|x| x.abs()));
            if v[p] < 0.0 {
                v.neg_mut();
            }
            entries.push((e, v, sector.parity));
        }
    }
    entries.sort_by(|a, b| a.0.total_cmp(&b.0));
    let energies: Vec<f64> = entries.iter().map(|e| e.0).collect();
    // Zone-centre pairs above the lowest few bands are split by less than
    // rounding; order them odd-then-even as for the resolvable pairs while
    // keeping the energy list ascending.
    for i in 0..dim.saturating_sub(1) {
        let close = (entries[i + 1].0 - entries[i].0).abs() <= 1e-10 * entries[i].0.abs().max(1.0);
        if close && entries[i].2 == Some(Parity::Even) && entries[i + 1].2 == Some(Parity::Odd) {
            entries.swap(i, i + 1);
        }
    }

    let mut states = DMatrix::zeros(dim, dim);
    for (j, (_, v, _)) in entries.iter().enumerate() {
        for i in 0..dim {
            states[(i, j)] = Complex64::new(v[i], 0.0);
        }
    }
    BlochSpectrum {
        energies,
        parity: entries.iter().map(|e| e.2).collect(),
        states,
        basis: *basis,
        v0,
    }
}

/// `max_q E_b(q) - min_q E_b(q)` sampled on `q_points` values of `[0, 1]`.
///
/// Bands are symmetric in `q`, so half the zone suffices.
pub fn band_width(v0: f64, band: usize, m_max: usize, q_points: usize) -> Result<f64> {
    if q_points < 2 {
        return Err(Error::invalid("need at least two quasimomentum samples"));
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..q_points {
        let q = i as f64 / (q_points - 1) as f64;
        let spec = bloch_bands(v0, &PlaneWaveBasis::new(m_max, q)?);
        let e = spec.energy(band)?;
        lo = lo.min(e);
        hi = hi.max(e);
    }
    Ok(hi - lo)
}

/// Nearest-neighbour tunneling of the ground band in E_R (bandwidth / 4).
pub fn tunneling_energy(v0: f64, m_max: usize) -> Result<f64> {
    Ok(band_width(v0, 0, m_max, 65)? / 4.0)
}
