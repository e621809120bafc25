//! Brute-force references: the truncated lattice model as a dense `d^L` problem,
//! and a finite-difference position-grid solver for the single-site Hamiltonian.

use faer::{Mat, MatRef};

use crate::error::{Error, Result};
use crate::linalg::{self, C64, ZERO};
use crate::local_solver::{LocalHamiltonianSpec, SiteOperators};
use crate::model::{self, LatticeHamiltonian, LatticeSpec, QuenchSchedule};

/// Largest Hilbert-space dimension the dense oracle accepts.
pub const DENSE_CAP: usize = 1 << 20;
/// Largest dimension for which a full matrix is built and diagonalized.
pub const MATRIX_CAP: usize = 4096;

#[derive(Clone, Debug, PartialEq)]
pub struct DenseState {
    /// Site 0 is the slowest index.
    pub amplitudes: Vec<C64>,
    pub length: usize,
    pub d: usize,
}

impl DenseState {
    pub fn norm(&self) -> f64 {
        linalg::norm(&self.amplitudes)
    }

    pub fn overlap(&self, other: &DenseState) -> C64 {
        linalg::dot(&self.amplitudes, &other.amplitudes)
    }

    pub fn fidelity(&self, other: &DenseState) -> f64 {
        self.overlap(other).norm() / (self.norm() * other.norm())
    }
}

/// Matrix-free action of a truncated lattice Hamiltonian.
#[derive(Clone, Debug)]
pub struct DenseHamiltonian {
    pub length: usize,
    pub d: usize,
    pub dim: usize,
    site_terms: Vec<Mat<f64>>,
    bond_terms: Vec<Mat<f64>>,
}

pub fn dense_hamiltonian(h: &LatticeHamiltonian) -> Result<DenseHamiltonian> {
    DenseHamiltonian::from_terms(h.d, h.site_terms.clone(), h.bond_terms.clone())
}

impl DenseHamiltonian {
    /// Sum of one-site terms on every site plus two-site terms on bonds
    /// `(j, j + 1)`; `bond_terms[j]` has row index `s * d + t`.
    pub fn from_terms(d: usize, site_terms: Vec<Mat<f64>>, bond_terms: Vec<Mat<f64>>) -> Result<Self> {
        let length = site_terms.len();
        if length < 2 || bond_terms.len() != length - 1 {
            return Err(Error::Assembly(format!(
                "{} site terms need {} bond terms, got {}",
                length,
                length.saturating_sub(1),
                bond_terms.len()
            )));
        }
        for m in &site_terms {
            if m.nrows() != d || m.ncols() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: m.nrows(),
                });
            }
        }
        for m in &bond_terms {
            if m.nrows() != d * d || m.ncols() != d * d {
                return Err(Error::DimensionMismatch {
                    expected: d * d,
                    found: m.nrows(),
                });
            }
        }
        let dim = dense_dim(d, length)?;
        Ok(Self {
            length,
            d,
            dim,
            site_terms,
            bond_terms,
        })
    }

    pub fn apply(&self, x: &[C64], y: &mut [C64]) {
        y.iter_mut().for_each(|v| *v = ZERO);
        for (j, m) in self.site_terms.iter().enumerate() {
            accumulate_site_op(x, y, m.as_ref(), j, self.length, self.d);
        }
        for (j, m) in self.bond_terms.iter().enumerate() {
            accumulate_bond_op(x, y, m.as_ref(), j, self.length, self.d);
        }
    }

    pub fn to_matrix(&self) -> Result<Mat<f64>> {
        if self.dim > MATRIX_CAP {
            return Err(Error::OracleCap {
                dim: self.dim,
                cap: MATRIX_CAP,
            });
        }
        let mut m = Mat::zeros(self.dim, self.dim);
        let mut e = vec![ZERO; self.dim];
        let mut col = vec![ZERO; self.dim];
        for k in 0..self.dim {
            e[k] = C64::new(1.0, 0.0);
            self.apply(&e, &mut col);
            for i in 0..self.dim {
                m[(i, k)] = col[i].re;
            }
            e[k] = ZERO;
        }
        Ok(m)
    }

    pub fn expectation(&self, psi: &DenseState) -> f64 {
        let mut hx = vec![ZERO; self.dim];
        self.apply(&psi.amplitudes, &mut hx);
        linalg::dot(&psi.amplitudes, &hx).re / linalg::dot(&psi.amplitudes, &psi.amplitudes).re
    }

    /// Upper bound on the spectral radius from the Frobenius norms of the terms.
    pub fn norm_bound(&self) -> f64 {
        let fro = |m: &Mat<f64>| {
            let mut acc = 0.0;
            for j in 0..m.ncols() {
                for i in 0..m.nrows() {
                    acc += m[(i, j)] * m[(i, j)];
                }
            }
            acc.sqrt()
        };
        self.site_terms.iter().map(fro).sum::<f64>() + self.bond_terms.iter().map(fro).sum::<f64>()
    }
}

fn dense_dim(d: usize, length: usize) -> Result<usize> {
    let mut dim: usize = 1;
    for _ in 0..length {
        dim = match dim.checked_mul(d) {
            Some(v) if v <= DENSE_CAP => v,
            _ => {
                return Err(Error::OracleCap {
                    dim: dim.saturating_mul(d),
                    cap: DENSE_CAP,
                })
            }
        };
    }
    Ok(dim)
}

fn accumulate_site_op(x: &[C64], y: &mut [C64], m: MatRef<'_, f64>, site: usize, length: usize, d: usize) {
    let inner = d.pow((length - 1 - site) as u32);
    let outer = x.len() / (inner * d);
    for o in 0..outer {
        for i in 0..inner {
            let base = o * d * inner + i;
            for s in 0..d {
                let mut acc = ZERO;
                for t in 0..d {
                    let c = m[(s, t)];
                    if c != 0.0 {
                        acc += x[base + t * inner] * c;
                    }
                }
                y[base + s * inner] += acc;
            }
        }
    }
}

fn accumulate_bond_op(x: &[C64], y: &mut [C64], m: MatRef<'_, f64>, site: usize, length: usize, d: usize) {
    let inner = d.pow((length - 2 - site) as u32);
    let outer = x.len() / (inner * d * d);
    for o in 0..outer {
        for i in 0..inner {
            let base = o * d * d * inner + i;
            for st in 0..d * d {
                let mut acc = ZERO;
                for uv in 0..d * d {
                    let c = m[(st, uv)];
                    if c != 0.0 {
                        acc += x[base + uv * inner] * c;
                    }
                }
                y[base + st * inner] += acc;
            }
        }
    }
}

/// Apply a single-site operator, returning a new vector.
pub fn apply_site_op(psi: &DenseState, op: MatRef<'_, f64>, site: usize) -> DenseState {
    let mut out = vec![ZERO; psi.amplitudes.len()];
    accumulate_site_op(&psi.amplitudes, &mut out, op, site, psi.length, psi.d);
    DenseState {
        amplitudes: out,
        ..*psi
    }
}

/// Ground energy and state. Small problems are diagonalized in full; larger ones
/// use Lanczos on the matrix-free action.
pub fn dense_ground(h: &LatticeHamiltonian) -> Result<(f64, DenseState)> {
    let dh = dense_hamiltonian(h)?;
    ground_of(&dh)
}

pub fn ground_of(dh: &DenseHamiltonian) -> Result<(f64, DenseState)> {
    if dh.dim <= MATRIX_CAP {
        let (vals, vecs) = linalg::sym_eigen(dh.to_matrix()?.as_ref())?;
        let amplitudes = (0..dh.dim).map(|i| C64::new(vecs[(i, 0)], 0.0)).collect();
        return Ok((
            vals[0],
            DenseState {
                amplitudes,
                length: dh.length,
                d: dh.d,
            },
        ));
    }
    let x0: Vec<C64> = (0..dh.dim)
        .map(|i| C64::new(1.0 + 1e-3 * ((i * 7919) % 101) as f64, 0.0))
        .collect();
    let settings = linalg::LanczosSettings {
        tol: 1e-12,
        krylov: 60,
        max_restarts: 200,
    };
    let res = linalg::lanczos_lowest(|x, y| dh.apply(x, y), &x0, settings);
    if !res.converged {
        return Err(Error::NumericalConsistency(format!(
            "dense Lanczos did not converge (residual {:.2e})",
            res.residual
        )));
    }
    Ok((
        res.value,
        DenseState {
            amplitudes: res.vector,
            length: dh.length,
            d: dh.d,
        },
    ))
}

/// The `count` lowest eigenvalues by full diagonalization.
pub fn dense_lowest(h: &LatticeHamiltonian, count: usize) -> Result<Vec<f64>> {
    let dh = dense_hamiltonian(h)?;
    let vals = linalg::sym_eigenvalues(dh.to_matrix()?.as_ref())?;
    Ok(vals.into_iter().take(count).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EvolveMethod {
    /// Full eigendecomposition of the dense matrix.
    Exact,
    /// Taylor series of `exp(-i H dt / hbar)` on short substeps, matrix-free.
    Taylor,
}

/// `exp(-i H t / hbar) |psi>`.
pub fn dense_evolve(
    psi: &DenseState,
    h: &LatticeHamiltonian,
    t: f64,
    method: EvolveMethod,
) -> Result<DenseState> {
    let dh = dense_hamiltonian(h)?;
    evolve_with(&dh, psi, t, h.hbar, method)
}

pub fn evolve_with(
    dh: &DenseHamiltonian,
    psi: &DenseState,
    t: f64,
    hbar: f64,
    method: EvolveMethod,
) -> Result<DenseState> {
    if psi.amplitudes.len() != dh.dim {
        return Err(Error::DimensionMismatch {
            expected: dh.dim,
            found: psi.amplitudes.len(),
        });
    }
    if t == 0.0 {
        return Ok(psi.clone());
    }
    let amplitudes = match method {
        EvolveMethod::Exact => {
            let (vals, vecs) = linalg::sym_eigen(dh.to_matrix()?.as_ref())?;
            let n = dh.dim;
            let mut coeff = vec![ZERO; n];
            for k in 0..n {
                let mut acc = ZERO;
                for i in 0..n {
                    acc += psi.amplitudes[i] * vecs[(i, k)];
                }
                coeff[k] = acc * C64::new(0.0, -vals[k] * t / hbar).exp();
            }
            (0..n)
                .map(|i| (0..n).map(|k| coeff[k] * vecs[(i, k)]).sum())
                .collect()
        }
        EvolveMethod::Taylor => {
            let scale = dh.norm_bound() * t.abs() / hbar;
            let steps = (scale / 0.5).ceil().max(1.0) as usize;
            let factor = C64::new(0.0, -t / (hbar * steps as f64));
            let mut v = psi.amplitudes.clone();
            let mut term = vec![ZERO; dh.dim];
            let mut next = vec![ZERO; dh.dim];
            for _ in 0..steps {
                term.copy_from_slice(&v);
                for k in 1..60 {
                    dh.apply(&term, &mut next);
                    let f = factor / k as f64;
                    for (a, b) in term.iter_mut().zip(&next) {
                        *a = b * f;
                    }
                    v.iter_mut().zip(&term).for_each(|(a, b)| *a += b);
                    if linalg::norm(&term) < 1e-17 {
                        break;
                    }
                }
            }
            v
        }
    };
    Ok(DenseState {
        amplitudes,
        length: psi.length,
        d: psi.d,
    })
}

/// The plateau protocol of the MPS quench with exact evolution on every plateau:
/// ground state on the first plateau, then evolve and apply `u[k]` to every
/// site. The returned state is not renormalized, so its squared norm is the
/// norm ledger.
pub fn dense_quench(
    lattice: &LatticeSpec,
    ops: &[SiteOperators],
    u: &[Mat<f64>],
    schedule: &QuenchSchedule,
    method: EvolveMethod,
) -> Result<DenseState> {
    if ops.len() != schedule.plateaus.len() || u.len() + 1 != ops.len() {
        return Err(Error::DimensionMismatch {
            expected: schedule.plateaus.len(),
            found: ops.len(),
        });
    }
    let hamiltonian = |k: usize| model::assemble(lattice, &ops[k], schedule.plateaus[k].eps_tilde);
    let (_, mut psi) = dense_ground(&hamiltonian(0)?)?;
    for (k, p) in schedule.plateaus.iter().enumerate() {
        let h = hamiltonian(k)?;
        psi = dense_evolve(&psi, &h, p.interval, method)?;
        if let Some(uk) = u.get(k) {
            for site in 0..lattice.length {
                psi = apply_site_op(&psi, uk.as_ref(), site);
            }
        }
    }
    Ok(psi)
}

/// `<y_j y_{j+l}>`, or `<y_j^2>` at `l = 0`, with `y` given in the local basis.
pub fn dense_correlator(psi: &DenseState, y: MatRef<'_, f64>, j: usize, l: usize) -> Result<f64> {
    if j + l >= psi.length {
        return Err(Error::OutOfRange {
            index: j + l,
            limit: psi.length,
        });
    }
    let a = apply_site_op(psi, y, j + l);
    let b = apply_site_op(&a, y, j);
    Ok(linalg::dot(&psi.amplitudes, &b.amplitudes).re / linalg::dot(&psi.amplitudes, &psi.amplitudes).re)
}

/// Product of single-site parities, as a diagonal in the local eigenbasis.
pub fn dense_parity(psi: &DenseState, signs: &[f64]) -> f64 {
    let d = psi.d;
    let mut acc = 0.0;
    for (idx, a) in psi.amplitudes.iter().enumerate() {
        let mut sign = 1.0;
        let mut rest = idx;
        for _ in 0..psi.length {
            sign *= signs[rest % d];
            rest /= d;
        }
        acc += sign * a.norm_sqr();
    }
    acc / linalg::dot(&psi.amplitudes, &psi.amplitudes).re
}

#[derive(Clone, Debug)]
pub struct GridSpectrum {
    pub energies: Vec<f64>,
    /// Largest density on the outermost grid points relative to the peak,
    /// over the returned levels.
    pub boundary_density: f64,
    pub spacing: f64,
}

/// Eigenvalues of `-hbar^2/2 d^2/dy^2 + Omega0 eps_tilde y^2 / 2 + g y^4` on
/// `[-half_width, half_width]` with Dirichlet walls and an eighth-order stencil.
pub fn grid_local_solver(
    spec: &LocalHamiltonianSpec,
    half_width: f64,
    points: usize,
    levels: usize,
) -> Result<GridSpectrum> {
    const STENCIL: [f64; 5] = [-205.0 / 72.0, 8.0 / 5.0, -1.0 / 5.0, 8.0 / 315.0, -1.0 / 560.0];
    if points < 16 || levels == 0 || levels > points {
        return Err(Error::Config(format!("grid of {points} points for {levels} levels")));
    }
    let h = 2.0 * half_width / (points + 1) as f64;
    let kin = -0.5 * spec.hbar * spec.hbar / (h * h);
    let r = spec.quadratic();
    let mat = Mat::from_fn(points, points, |i, j| {
        let off = i.abs_diff(j);
        let mut v = if off < STENCIL.len() { kin * STENCIL[off] } else { 0.0 };
        if i == j {
            let y = -half_width + (i + 1) as f64 * h;
            v += 0.5 * r * y * y + spec.g * y.powi(4);
        }
        v
    });
    let (vals, vecs) = linalg::sym_eigen(mat.as_ref())?;
    let mut boundary = 0.0_f64;
    for k in 0..levels {
        let peak = (0..points).map(|i| vecs[(i, k)].powi(2)).fold(0.0, f64::max);
        let edge = [0, 1, points - 2, points - 1]
            .iter()
            .map(|&i| vecs[(i, k)].powi(2))
            .fold(0.0, f64::max);
        boundary = boundary.max(edge / peak);
    }
    if boundary > 1e-12 {
        return Err(Error::Config(format!(
            "grid box half-width {half_width} too small: boundary density {boundary:.2e}"
        )));
    }
    Ok(GridSpectrum {
        energies: vals[..levels].to_vec(),
        boundary_density: boundary,
        spacing: h,
    })
}
