//! Single-site quartic oscillator `H_loc = (pi^2 + omega0*eps_tilde*y^2 + 2g y^4) / 2`
//! with `[y, pi] = i hbar`, solved in a fixed harmonic-oscillator number basis.
//!
//! The number basis never changes along a ramp, so overlaps between eigenbases
//! at different control values are exact inside the representation. `H_loc` is
//! even in `y`, which makes it block diagonal in even/odd number states; the
//! blocks are diagonalized separately and every eigenvector has exact parity.

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, C64};

/// Tolerance below which two levels of opposite parity count as degenerate.
const DEGENERACY_TOL: f64 = 1e-12;
/// Doubling the representation may move a retained level by at most this much.
pub const CONVERGENCE_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalHamiltonianSpec {
    pub hbar: f64,
    pub g: f64,
    pub omega0: f64,
    pub eps_tilde: f64,
    /// Number of harmonic-oscillator states in the representation.
    pub n_rep: usize,
    pub omega_ref: f64,
}

impl LocalHamiltonianSpec {
    /// Spec with the default representation for truncation `d`:
    /// `n_rep = max(8d, 64)` and `omega_ref` from [`default_omega_ref`].
    pub fn new(hbar: f64, g: f64, omega0: f64, eps_tilde: f64, d: usize) -> Self {
        Self {
            hbar,
            g,
            omega0,
            eps_tilde,
            n_rep: default_n_rep(d),
            omega_ref: default_omega_ref(hbar, g),
        }
    }

    pub fn with_eps_tilde(&self, eps_tilde: f64) -> Self {
        Self { eps_tilde, ..*self }
    }

    /// Coefficient of `y^2 / 2` in the local Hamiltonian.
    pub fn quadratic(&self) -> f64 {
        self.omega0 * self.eps_tilde
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("hbar", self.hbar),
            ("g", self.g),
            ("omega0", self.omega0),
            ("omega_ref", self.omega_ref),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !self.eps_tilde.is_finite() {
            return Err(Error::Config("eps_tilde must be finite".into()));
        }
        if self.n_rep < 2 {
            return Err(Error::Config("representation needs at least 2 states".into()));
        }
        Ok(())
    }

    pub fn validate_for(&self, d: usize) -> Result<()> {
        self.validate()?;
        if d < 2 {
            return Err(Error::Config(format!("truncation d must be >= 2, got {d}")));
        }
        if self.n_rep < 4 * d {
            return Err(Error::Config(format!(
                "n_rep = {} is below 4*d = {}",
                self.n_rep,
                4 * d
            )));
        }
        Ok(())
    }
}

pub fn default_n_rep(d: usize) -> usize {
    (8 * d).max(64)
}

/// Number-basis frequency: the variational frequency `(6 g hbar)^(1/3)` of the
/// pure quartic oscillator, but never below 1.
pub fn default_omega_ref(hbar: f64, g: f64) -> f64 {
    (6.0 * g * hbar).cbrt().max(1.0)
}

/// Position, momentum and their powers in the truncated number basis.
#[derive(Clone, Debug)]
pub struct Representation {
    pub y: Mat<f64>,
    pub pi: Mat<C64>,
    pub y2: Mat<f64>,
    pub y4: Mat<f64>,
    /// `pi * pi`, real symmetric.
    pub pi2: Mat<f64>,
}

/// Ladder-operator matrices for `[y, pi] = i hbar` at frequency `omega_ref`.
///
/// Powers are products of the truncated matrices, so they are exact except in
/// the last rows and columns of the representation.
pub fn build_representation(spec: &LocalHamiltonianSpec) -> Result<Representation> {
    spec.validate()?;
    let n = spec.n_rep;
    let ly = (spec.hbar / (2.0 * spec.omega_ref)).sqrt();
    let lp = (spec.hbar * spec.omega_ref / 2.0).sqrt();
    // a|k> = sqrt(k)|k-1>; y = ly (a + a^dag); pi = i lp (a^dag - a) = i P
    let y = Mat::from_fn(n, n, |i, j| {
        if i + 1 == j {
            ly * (j as f64).sqrt()
        } else if j + 1 == i {
            ly * (i as f64).sqrt()
        } else {
            0.0
        }
    });
    let p = Mat::from_fn(n, n, |i, j| {
        if j + 1 == i {
            lp * (i as f64).sqrt()
        } else if i + 1 == j {
            -lp * (j as f64).sqrt()
        } else {
            0.0
        }
    });
    let pi = Mat::from_fn(n, n, |i, j| C64::new(0.0, p[(i, j)]));
    let y2 = &y * &y;
    let y4 = &y2 * &y2;
    let pi2 = -(&p * &p);
    Ok(Representation {
        y,
        pi,
        y2,
        y4,
        pi2,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn sign(self) -> f64 {
        match self {
            Parity::Even => 1.0,
            Parity::Odd => -1.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct LocalEigensystem {
    pub eps_tilde: f64,
    pub energies: Vec<f64>,
    /// Columns are eigenvectors in the number basis (`n_rep x d`).
    pub vectors: Mat<f64>,
    pub parities: Vec<Parity>,
    pub residuals: Vec<f64>,
    pub hbar: f64,
    pub omega_ref: f64,
}

impl LocalEigensystem {
    pub fn d(&self) -> usize {
        self.energies.len()
    }

    pub fn n_rep(&self) -> usize {
        self.vectors.nrows()
    }

    /// Flip eigenvector signs so that `<psi_q(self)|psi_q(reference)> >= 0`.
    pub fn align_to(&mut self, reference: &LocalEigensystem) -> Result<()> {
        check_compatible(reference, self)?;
        for q in 0..self.d() {
            let overlap: f64 = (0..self.n_rep())
                .map(|k| self.vectors[(k, q)] * reference.vectors[(k, q)])
                .sum();
            if overlap < 0.0 {
                for k in 0..self.n_rep() {
                    self.vectors[(k, q)] = -self.vectors[(k, q)];
                }
            }
        }
        Ok(())
    }
}

/// Solver bound to fixed couplings and representation; reusable along a ramp.
#[derive(Clone, Debug)]
pub struct LocalSolver {
    spec: LocalHamiltonianSpec,
    kinetic_plus_quartic: Mat<f64>,
    y2: Mat<f64>,
}

impl LocalSolver {
    pub fn new(spec: &LocalHamiltonianSpec) -> Result<Self> {
        let rep = build_representation(spec)?;
        let kinetic_plus_quartic =
            Mat::from_fn(spec.n_rep, spec.n_rep, |i, j| {
                0.5 * (rep.pi2[(i, j)] + 2.0 * spec.g * rep.y4[(i, j)])
            });
        Ok(Self {
            spec: *spec,
            kinetic_plus_quartic,
            y2: rep.y2,
        })
    }

    pub fn spec(&self) -> &LocalHamiltonianSpec {
        &self.spec
    }

    fn hamiltonian(&self, eps_tilde: f64) -> Mat<f64> {
        let r = 0.5 * self.spec.omega0 * eps_tilde;
        let n = self.spec.n_rep;
        Mat::from_fn(n, n, |i, j| self.kinetic_plus_quartic[(i, j)] + r * self.y2[(i, j)])
    }

    /// The `d` lowest eigenpairs at `eps_tilde`, without the doubling check.
    /// `d == n_rep` returns the complete spectrum of the representation.
    pub fn solve(&self, eps_tilde: f64, d: usize) -> Result<LocalEigensystem> {
        let n = self.spec.n_rep;
        if d < 1 || d > n {
            return Err(Error::Config(format!("d = {d} outside 1..={n}")));
        }
        let h = self.hamiltonian(eps_tilde);
        let mut pairs: Vec<(f64, Parity, Vec<f64>)> = Vec::with_capacity(n);
        for parity in [Parity::Even, Parity::Odd] {
            let idx: Vec<usize> = (0..n)
                .filter(|k| (k % 2 == 0) == (parity == Parity::Even))
                .collect();
            if idx.is_empty() {
                continue;
            }
            let block = Mat::from_fn(idx.len(), idx.len(), |a, b| h[(idx[a], idx[b])]);
            let (vals, vecs) = linalg::sym_eigen(block.as_ref())?;
            for (c, &e) in vals.iter().enumerate() {
                let mut v = vec![0.0; n];
                for (a, &k) in idx.iter().enumerate() {
                    v[k] = vecs[(a, c)];
                }
                pairs.push((e, parity, v));
            }
        }
        pairs.sort_by(|a, b| {
            if (a.0 - b.0).abs() < DEGENERACY_TOL {
                (a.1 == Parity::Odd).cmp(&(b.1 == Parity::Odd))
            } else {
                a.0.total_cmp(&b.0)
            }
        });
        pairs.truncate(d);

        let mut vectors = Mat::<f64>::zeros(n, d);
        let mut energies = Vec::with_capacity(d);
        let mut parities = Vec::with_capacity(d);
        let mut residuals = Vec::with_capacity(d);
        for (q, (e, parity, mut v)) in pairs.into_iter().enumerate() {
            // largest-magnitude coefficient positive
            let pivot = v
                .iter()
                .copied()
                .max_by(|a, b| a.abs().total_cmp(&b.abs()))
                .unwrap_or(1.0);
            if pivot < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
            let nrm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.iter_mut().for_each(|x| *x /= nrm);
            let mut res = 0.0;
            for i in 0..n {
                let hv: f64 = (0..n).map(|k| h[(i, k)] * v[k]).sum();
                res += (hv - e * v[i]).powi(2);
            }
            for (i, x) in v.iter().enumerate() {
                vectors[(i, q)] = *x;
            }
            energies.push(e);
            parities.push(parity);
            residuals.push(res.sqrt());
        }
        Ok(LocalEigensystem {
            eps_tilde,
            energies,
            vectors,
            parities,
            residuals,
            hbar: self.spec.hbar,
            omega_ref: self.spec.omega_ref,
        })
    }

    /// Compare the `d` lowest levels against a representation twice as large.
    pub fn check_convergence(&self, eps_tilde: f64, d: usize) -> Result<f64> {
        let here = self.solve(eps_tilde, d)?;
        let doubled = LocalSolver::new(&LocalHamiltonianSpec {
            n_rep: 2 * self.spec.n_rep,
            ..self.spec
        })?
        .solve(eps_tilde, d)?;
        let shift = here
            .energies
            .iter()
            .zip(&doubled.energies)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if shift >= CONVERGENCE_TOL {
            return Err(Error::Truncation(format!(
                "doubling n_rep from {} moved a retained level by {shift:.3e} at eps_tilde = {eps_tilde} \
                 (d = {d}, omega_ref = {}); increase n_rep or adjust omega_ref",
                self.spec.n_rep, self.spec.omega_ref
            )));
        }
        Ok(shift)
    }
}

/// The `d` lowest eigenpairs of the local Hamiltonian, checked for convergence
/// in the representation size.
pub fn solve_local(spec: &LocalHamiltonianSpec, d: usize) -> Result<LocalEigensystem> {
    spec.validate_for(d)?;
    let solver = LocalSolver::new(spec)?;
    solver.check_convergence(spec.eps_tilde, d)?;
    solver.solve(spec.eps_tilde, d)
}

/// All `n_rep` eigenpairs of the representation (`d = N`, no truncation). No
/// convergence claim is made for the upper part of this spectrum.
pub fn solve_local_complete(spec: &LocalHamiltonianSpec) -> Result<LocalEigensystem> {
    LocalSolver::new(spec)?.solve(spec.eps_tilde, spec.n_rep)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SiteOperators {
    pub q_diag: Vec<f64>,
    pub y_mat: Vec<Vec<f64>>,
    pub w_mat: Vec<Vec<f64>>,
    pub parities: Vec<Parity>,
    pub eps_tilde: f64,
}

impl SiteOperators {
    pub fn d(&self) -> usize {
        self.q_diag.len()
    }

    pub fn y(&self) -> Mat<f64> {
        let d = self.d();
        Mat::from_fn(d, d, |i, j| self.y_mat[i][j])
    }

    pub fn w(&self) -> Mat<f64> {
        let d = self.d();
        Mat::from_fn(d, d, |i, j| self.w_mat[i][j])
    }

    pub fn q(&self) -> Mat<f64> {
        let d = self.d();
        Mat::from_fn(d, d, |i, j| if i == j { self.q_diag[i] } else { 0.0 })
    }

    /// Diagonal single-site parity operator.
    pub fn parity(&self) -> Mat<f64> {
        let d = self.d();
        Mat::from_fn(d, d, |i, j| if i == j { self.parities[i].sign() } else { 0.0 })
    }
}

/// Apply the truncated `y` of the representation to a number-basis vector.
fn apply_y(v: &[f64], hbar: f64, omega_ref: f64) -> Vec<f64> {
    let n = v.len();
    let ly = (hbar / (2.0 * omega_ref)).sqrt();
    (0..n)
        .map(|i| {
            let mut acc = 0.0;
            if i > 0 {
                acc += (i as f64).sqrt() * v[i - 1];
            }
            if i + 1 < n {
                acc += ((i + 1) as f64).sqrt() * v[i + 1];
            }
            ly * acc
        })
        .collect()
}

/// `Q`, `Y` and `W` of the truncated eigenbasis.
pub fn site_operators(eig: &LocalEigensystem) -> SiteOperators {
    let d = eig.d();
    let n = eig.n_rep();
    let cols: Vec<Vec<f64>> = (0..d)
        .map(|q| (0..n).map(|k| eig.vectors[(k, q)]).collect())
        .collect();
    let y_cols: Vec<Vec<f64>> = cols
        .iter()
        .map(|c| apply_y(c, eig.hbar, eig.omega_ref))
        .collect();
    let y2_cols: Vec<Vec<f64>> = y_cols
        .iter()
        .map(|c| apply_y(c, eig.hbar, eig.omega_ref))
        .collect();
    let inner = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let mut y_mat = vec![vec![0.0; d]; d];
    let mut w_mat = vec![vec![0.0; d]; d];
    for a in 0..d {
        for b in a..d {
            let y = 0.5 * (inner(&cols[a], &y_cols[b]) + inner(&cols[b], &y_cols[a]));
            let w = 0.5 * (inner(&cols[a], &y2_cols[b]) + inner(&cols[b], &y2_cols[a]));
            y_mat[a][b] = y;
            y_mat[b][a] = y;
            w_mat[a][b] = w;
            w_mat[b][a] = w;
        }
    }
    SiteOperators {
        q_diag: eig.energies.clone(),
        y_mat,
        w_mat,
        parities: eig.parities.clone(),
        eps_tilde: eig.eps_tilde,
    }
}

#[derive(Clone, Debug)]
pub struct BasisChangeMatrix {
    /// `u[(q, q')] = <psi_q(eps_out)|psi_q'(eps_in)>`.
    pub u: Mat<f64>,
    pub eps_in: f64,
    pub eps_out: f64,
    /// Largest singular value.
    pub norm_bound: f64,
    /// Smallest singular value.
    pub min_singular: f64,
}

fn check_compatible(a: &LocalEigensystem, b: &LocalEigensystem) -> Result<()> {
    if a.d() != b.d() {
        return Err(Error::DimensionMismatch {
            expected: a.d(),
            found: b.d(),
        });
    }
    if a.n_rep() != b.n_rep() {
        return Err(Error::DimensionMismatch {
            expected: a.n_rep(),
            found: b.n_rep(),
        });
    }
    if a.omega_ref != b.omega_ref || a.hbar != b.hbar {
        return Err(Error::Config(
            "eigensystems built on different representations".into(),
        ));
    }
    Ok(())
}

/// Overlap matrix carrying amplitudes from the basis at `eig_in` into the basis
/// at `eig_out`. `eig_out` must already be gauge-aligned to `eig_in`.
pub fn basis_change_matrix(
    eig_in: &LocalEigensystem,
    eig_out: &LocalEigensystem,
) -> Result<BasisChangeMatrix> {
    check_compatible(eig_in, eig_out)?;
    let u = eig_out.vectors.transpose() * &eig_in.vectors;
    let d = eig_in.d();
    for q in 0..d {
        if u[(q, q)] < 0.0 {
            return Err(Error::Gauge(format!(
                "diagonal overlap {} at level {q} is negative ({} -> {})",
                u[(q, q)],
                eig_in.eps_tilde,
                eig_out.eps_tilde
            )));
        }
    }
    let sv = linalg::singular_values_real(u.as_ref())?;
    let norm_bound = sv.iter().copied().fold(0.0, f64::max);
    let min_singular = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if norm_bound > 1.0 + 1e-10 {
        return Err(Error::NumericalConsistency(format!(
            "basis change has norm {norm_bound} > 1"
        )));
    }
    Ok(BasisChangeMatrix {
        u,
        eps_in: eig_in.eps_tilde,
        eps_out: eig_out.eps_tilde,
        norm_bound,
        min_singular,
    })
}

/// `g = 93 zeta(5) / (16 ln 2)`, the quartic coupling of the ion-chain mapping.
pub fn ion_chain_g() -> f64 {
    const ZETA5: f64 = 1.036_927_755_143_37;
    93.0 * ZETA5 / (16.0 * std::f64::consts::LN_2)
}
