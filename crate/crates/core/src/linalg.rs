//! Thin wrappers over `faer` for the handful of dense kernels the simulator needs,
//! plus a restarted Lanczos solver for matrix-free ground states.

use faer::{Mat, MatRef, Side};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// Eigen-decomposition of a real symmetric matrix, eigenvalues ascending.
pub fn sym_eigen(m: MatRef<'_, f64>) -> Result<(Vec<f64>, Mat<f64>)> {
    let evd = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Linalg(format!("symmetric eigensolver: {e:?}")))?;
    let s = evd.S().column_vector();
    let vals = (0..s.nrows()).map(|i| s[i]).collect();
    Ok((vals, evd.U().to_owned()))
}

pub fn sym_eigenvalues(m: MatRef<'_, f64>) -> Result<Vec<f64>> {
    m.self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Linalg(format!("symmetric eigensolver: {e:?}")))
}

/// Eigen-decomposition of a complex Hermitian matrix, eigenvalues ascending.
pub fn herm_eigen(m: MatRef<'_, C64>) -> Result<(Vec<f64>, Mat<C64>)> {
    let evd = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Linalg(format!("hermitian eigensolver: {e:?}")))?;
    let s = evd.S().column_vector();
    let vals = (0..s.nrows()).map(|i| s[i].re).collect();
    Ok((vals, evd.U().to_owned()))
}

/// Thin SVD `m = U diag(s) V^H`, singular values non-increasing.
pub fn svd(m: MatRef<'_, C64>) -> Result<(Mat<C64>, Vec<f64>, Mat<C64>)> {
    let dec = m
        .thin_svd()
        .map_err(|e| Error::Linalg(format!("svd: {e:?}")))?;
    let s = dec.S().column_vector();
    let vals = (0..s.nrows()).map(|i| s[i].re).collect();
    Ok((dec.U().to_owned(), vals, dec.V().to_owned()))
}

pub fn singular_values_real(m: MatRef<'_, f64>) -> Result<Vec<f64>> {
    m.singular_values()
        .map_err(|e| Error::Linalg(format!("singular values: {e:?}")))
}

/// Thin QR, `m = Q R` with `Q` having orthonormal columns.
pub fn qr_thin(m: MatRef<'_, C64>) -> (Mat<C64>, Mat<C64>) {
    let qr = m.qr();
    (qr.compute_thin_Q(), qr.thin_R().to_owned())
}

pub fn to_complex(m: MatRef<'_, f64>) -> Mat<C64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| C64::new(m[(i, j)], 0.0))
}

pub fn kron<T: Copy + std::ops::Mul<Output = T>>(a: MatRef<'_, T>, b: MatRef<'_, T>) -> Mat<T> {
    let (ar, ac, br, bc) = (a.nrows(), a.ncols(), b.nrows(), b.ncols());
    Mat::from_fn(ar * br, ac * bc, |i, j| {
        a[(i / br, j / bc)] * b[(i % br, j % bc)]
    })
}

pub fn identity(n: usize) -> Mat<f64> {
    Mat::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 })
}

/// `exp(factor * h)` for real symmetric `h`, through its eigenbasis.
pub fn expm_symmetric(h: MatRef<'_, f64>, factor: C64) -> Result<Mat<C64>> {
    let (vals, vecs) = sym_eigen(h)?;
    Ok(expm_from_eigen(&vals, vecs.as_ref(), factor))
}

/// Rebuild `V diag(exp(factor * lambda)) V^T` from a real eigensystem.
pub fn expm_from_eigen(vals: &[f64], vecs: MatRef<'_, f64>, factor: C64) -> Mat<C64> {
    let n = vals.len();
    let phases: Vec<C64> = vals.iter().map(|&l| (factor * l).exp()).collect();
    let scaled = Mat::from_fn(n, n, |i, k| phases[k] * vecs[(i, k)]);
    let vt = Mat::from_fn(n, n, |k, j| C64::new(vecs[(j, k)], 0.0));
    &scaled * &vt
}

pub fn max_abs_diff<T>(a: MatRef<'_, T>, b: MatRef<'_, T>) -> f64
where
    T: Copy + std::ops::Sub<Output = T> + Abs,
{
    let mut worst = 0.0_f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            worst = worst.max((a[(i, j)] - b[(i, j)]).abs_val());
        }
    }
    worst
}

pub fn hermiticity_defect(m: MatRef<'_, C64>) -> f64 {
    let mut worst = 0.0_f64;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub trait Abs {
    fn abs_val(self) -> f64;
}

impl Abs for f64 {
    fn abs_val(self) -> f64 {
        self.abs()
    }
}

impl Abs for C64 {
    fn abs_val(self) -> f64 {
        self.norm()
    }
}

pub fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

#[derive(Clone, Copy, Debug)]
pub struct LanczosSettings {
    pub tol: f64,
    pub krylov: usize,
    pub max_restarts: usize,
}

impl Default for LanczosSettings {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            krylov: 32,
            max_restarts: 60,
        }
    }
}

#[derive(Clone, Debug)]
pub struct LanczosResult {
    pub value: f64,
    pub vector: Vec<C64>,
    pub residual: f64,
    pub converged: bool,
}

/// Lowest eigenpair of a Hermitian operator given only its action, by explicitly
/// restarted Lanczos with full reorthogonalization. `x0` seeds the Krylov space.
pub fn lanczos_lowest<F>(apply: F, x0: &[C64], settings: LanczosSettings) -> LanczosResult
where
    F: Fn(&[C64], &mut [C64]),
{
    let dim = x0.len();
    let mut x: Vec<C64> = x0.to_vec();
    let n0 = norm(&x);
    if n0 < 1e-300 {
        x.iter_mut().for_each(|v| *v = ONE);
    }
    let n0 = norm(&x);
    x.iter_mut().for_each(|v| *v /= n0);

    let krylov = settings.krylov.min(dim).max(1);
    let mut best = LanczosResult {
        value: f64::INFINITY,
        vector: x.clone(),
        residual: f64::INFINITY,
        converged: false,
    };
    let mut w = vec![ZERO; dim];

    for _ in 0..=settings.max_restarts {
        let mut basis: Vec<Vec<C64>> = vec![x.clone()];
        let mut alpha: Vec<f64> = Vec::with_capacity(krylov);
        let mut beta: Vec<f64> = Vec::with_capacity(krylov);
        for j in 0..krylov {
            apply(&basis[j], &mut w);
            let a = dot(&basis[j], &w).re;
            alpha.push(a);
            // two passes of Gram-Schmidt against the whole basis
            for _ in 0..2 {
                for v in &basis {
                    let c = dot(v, &w);
                    w.iter_mut().zip(v).for_each(|(wi, vi)| *wi -= c * vi);
                }
            }
            let b = norm(&w);
            if j + 1 == krylov || b < 1e-13 * a.abs().max(1.0) {
                beta.push(b);
                break;
            }
            beta.push(b);
            basis.push(w.iter().map(|v| v / b).collect());
        }
        let m = alpha.len();
        let t = Mat::from_fn(m, m, |i, j| {
            if i == j {
                alpha[i]
            } else if i + 1 == j {
                beta[i]
            } else if j + 1 == i {
                beta[j]
            } else {
                0.0
            }
        });
        let Ok((vals, vecs)) = sym_eigen(t.as_ref()) else {
            break;
        };
        let theta = vals[0];
        let mut ritz = vec![ZERO; dim];
        for (k, v) in basis.iter().take(m).enumerate() {
            let s = vecs[(k, 0)];
            ritz.iter_mut().zip(v).for_each(|(r, vi)| *r += s * vi);
        }
        let rn = norm(&ritz);
        ritz.iter_mut().for_each(|v| *v /= rn);
        apply(&ritz, &mut w);
        let residual = w
            .iter()
            .zip(&ritz)
            .map(|(hv, v)| (hv - theta * v).norm_sqr())
            .sum::<f64>()
            .sqrt();
        let value = dot(&ritz, &w).re;
        if value <= best.value || residual < best.residual {
            best = LanczosResult {
                value,
                vector: ritz.clone(),
                residual,
                converged: false,
            };
        }
        if residual < settings.tol * value.abs().max(1.0) || m == dim {
            best.converged = true;
            return best;
        }
        x = ritz;
    }
    best
}
