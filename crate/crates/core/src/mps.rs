//! Open-boundary matrix product states with a single orthogonality center.
//!
//! Site tensors are stored left-grouped: a `(left * d) x right` matrix whose row
//! index is `a * d + s`.

pub mod checkpoint;

use faer::{Mat, MatRef};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, C64, ONE, ZERO};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncationPolicy {
    pub m_max: usize,
    /// Largest relative weight that may be dropped at a single truncation.
    pub weight_tol: f64,
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        Self {
            m_max: 50,
            weight_tol: 1e-10,
        }
    }
}

impl TruncationPolicy {
    pub fn new(m_max: usize, weight_tol: f64) -> Result<Self> {
        let p = Self { m_max, weight_tol };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m_max < 2 {
            return Err(Error::Config(format!("m_max must be >= 2, got {}", self.m_max)));
        }
        if !(self.weight_tol > 0.0 && self.weight_tol <= 1e-4) {
            return Err(Error::Config(format!(
                "weight_tol must lie in (0, 1e-4], got {}",
                self.weight_tol
            )));
        }
        Ok(())
    }

    /// Number of singular values to keep and the relative weight dropped.
    ///
    /// The smallest values are discarded while their cumulative weight stays
    /// within `weight_tol`; the result is then capped at `m_max`.
    pub fn rank(&self, singular: &[f64]) -> (usize, f64) {
        let total: f64 = singular.iter().map(|s| s * s).sum();
        if singular.is_empty() || total <= 0.0 {
            return (1, 0.0);
        }
        let mut keep = singular.len();
        let mut dropped = 0.0;
        while keep > 1 {
            let w = singular[keep - 1] * singular[keep - 1];
            if dropped + w > self.weight_tol * total {
                break;
            }
            dropped += w;
            keep -= 1;
        }
        while keep > self.m_max {
            dropped += singular[keep - 1] * singular[keep - 1];
            keep -= 1;
        }
        (keep, dropped / total)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    /// Leave the center on the right site of the bond.
    Right,
    /// Leave the center on the left site of the bond.
    Left,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SplitInfo {
    pub kept: usize,
    pub discarded_weight: f64,
    /// Squared norm of the two-site block before renormalization.
    pub norm_sq: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SiteTensor {
    pub left: usize,
    pub phys: usize,
    pub right: usize,
    /// `(left * phys) x right`.
    pub data: Mat<C64>,
}

impl SiteTensor {
    pub fn zeros(left: usize, phys: usize, right: usize) -> Self {
        Self {
            left,
            phys,
            right,
            data: Mat::zeros(left * phys, right),
        }
    }

    pub fn from_left_grouped(data: Mat<C64>, left: usize, phys: usize) -> Self {
        let right = data.ncols();
        debug_assert_eq!(data.nrows(), left * phys);
        Self {
            left,
            phys,
            right,
            data,
        }
    }

    pub fn from_right_grouped(m: MatRef<'_, C64>, phys: usize) -> Self {
        let left = m.nrows();
        let right = m.ncols() / phys;
        let data = Mat::from_fn(left * phys, right, |row, b| m[(row / phys, (row % phys) * right + b)]);
        Self {
            left,
            phys,
            right,
            data,
        }
    }

    #[inline]
    pub fn get(&self, a: usize, s: usize, b: usize) -> C64 {
        self.data[(a * self.phys + s, b)]
    }

    /// `left x (phys * right)` view with column index `s * right + b`.
    pub fn right_grouped(&self) -> Mat<C64> {
        let (d, r) = (self.phys, self.right);
        Mat::from_fn(self.left, d * r, |a, col| self.data[(a * d + col / r, col % r)])
    }

    /// Contract `op` (`d x d`) into the physical leg.
    pub fn apply_op(&self, op: MatRef<'_, C64>) -> SiteTensor {
        let d = self.phys;
        let data = Mat::from_fn(self.left * d, self.right, |row, b| {
            let (a, s) = (row / d, row % d);
            let mut acc = ZERO;
            for t in 0..d {
                acc += op[(s, t)] * self.data[(a * d + t, b)];
            }
            acc
        });
        SiteTensor { data, ..*self }
    }

    pub fn norm_sq(&self) -> f64 {
        let mut acc = 0.0;
        for j in 0..self.data.ncols() {
            for i in 0..self.data.nrows() {
                acc += self.data[(i, j)].norm_sqr();
            }
        }
        acc
    }

    fn scale(&mut self, f: f64) {
        for j in 0..self.data.ncols() {
            for i in 0..self.data.nrows() {
                self.data[(i, j)] *= f;
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct MatrixProductState {
    tensors: Vec<SiteTensor>,
    d: usize,
    ortho_center: Option<usize>,
    pub policy: TruncationPolicy,
    /// Product of squared-norm ratios from every non-unitary operation.
    pub norm_ledger: f64,
    /// Sum of relative weights dropped by SVD truncations.
    pub discarded_weight: f64,
    /// Control value of the local basis the physical legs refer to.
    pub eps_tilde: f64,
    pub time: f64,
}

/// `|k k ... k>` in the local eigenbasis.
pub fn product_state(
    length: usize,
    d: usize,
    local_index: usize,
    policy: TruncationPolicy,
) -> Result<MatrixProductState> {
    if local_index >= d {
        return Err(Error::OutOfRange {
            index: local_index,
            limit: d,
        });
    }
    let mut v = vec![ZERO; d];
    v[local_index] = ONE;
    MatrixProductState::from_site_vectors(&vec![v; length], policy)
}

impl MatrixProductState {
    pub fn from_site_vectors(vectors: &[Vec<C64>], policy: TruncationPolicy) -> Result<Self> {
        if vectors.is_empty() {
            return Err(Error::Config("empty chain".into()));
        }
        let d = vectors[0].len();
        let mut tensors = Vec::with_capacity(vectors.len());
        for v in vectors {
            if v.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: v.len(),
                });
            }
            let n = linalg::norm(v);
            if n == 0.0 {
                return Err(Error::Degenerate("zero site vector".into()));
            }
            tensors.push(SiteTensor::from_left_grouped(
                Mat::from_fn(d, 1, |s, _| v[s] / n),
                1,
                d,
            ));
        }
        Ok(Self {
            tensors,
            d,
            ortho_center: Some(0),
            policy,
            norm_ledger: 1.0,
            discarded_weight: 0.0,
            eps_tilde: 0.0,
            time: 0.0,
        })
    }

    /// Normalized state with Gaussian random tensors of bond dimension up to `chi`,
    /// right-canonical with center at site 0.
    pub fn random<R: Rng + ?Sized>(
        length: usize,
        d: usize,
        chi: usize,
        policy: TruncationPolicy,
        rng: &mut R,
    ) -> Result<Self> {
        if length == 0 || d == 0 || chi == 0 {
            return Err(Error::Config("random state needs positive sizes".into()));
        }
        let dims = capped_bond_dims(length, d, chi);
        let tensors = (0..length)
            .map(|j| {
                let (l, r) = (dims[j], dims[j + 1]);
                let data = Mat::from_fn(l * d, r, |_, _| {
                    C64::new(StandardNormal.sample(rng), StandardNormal.sample(rng))
                });
                SiteTensor::from_left_grouped(data, l, d)
            })
            .collect();
        let mut psi = Self {
            tensors,
            d,
            ortho_center: None,
            policy,
            norm_ledger: 1.0,
            discarded_weight: 0.0,
            eps_tilde: 0.0,
            time: 0.0,
        };
        psi.canonicalize(0)?;
        psi.normalize();
        Ok(psi)
    }

    /// Exact MPS of a dense vector (site 0 slowest index), by successive SVDs.
    pub fn from_dense(vector: &[C64], length: usize, d: usize, policy: TruncationPolicy) -> Result<Self> {
        let dim = checked_dim(d, length)?;
        if vector.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: vector.len(),
            });
        }
        let mut tensors = Vec::with_capacity(length);
        let mut rest = Mat::from_fn(1, dim, |_, k| vector[k]);
        for _ in 0..length - 1 {
            let l = rest.nrows();
            let cols = rest.ncols() / d;
            let m = Mat::from_fn(l * d, cols, |row, c| rest[(row / d, (row % d) * cols + c)]);
            let (u, s, v) = linalg::svd(m.as_ref())?;
            let keep = s.iter().take_while(|&&x| x > 1e-14 * s[0]).count().max(1);
            tensors.push(SiteTensor::from_left_grouped(
                u.subcols(0, keep).to_owned(),
                l,
                d,
            ));
            rest = Mat::from_fn(keep, cols, |k, c| s[k] * v[(c, k)].conj());
        }
        tensors.push(SiteTensor::from_right_grouped(rest.as_ref(), d));
        let mut psi = Self {
            tensors,
            d,
            ortho_center: Some(length - 1),
            policy,
            norm_ledger: 1.0,
            discarded_weight: 0.0,
            eps_tilde: 0.0,
            time: 0.0,
        };
        psi.normalize();
        Ok(psi)
    }

    pub fn from_parts(
        tensors: Vec<SiteTensor>,
        ortho_center: Option<usize>,
        policy: TruncationPolicy,
    ) -> Result<Self> {
        if tensors.is_empty() {
            return Err(Error::Config("empty chain".into()));
        }
        let d = tensors[0].phys;
        for (j, t) in tensors.iter().enumerate() {
            if t.phys != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: t.phys,
                });
            }
            let expect_left = if j == 0 { 1 } else { tensors[j - 1].right };
            if t.left != expect_left {
                return Err(Error::DimensionMismatch {
                    expected: expect_left,
                    found: t.left,
                });
            }
        }
        if tensors.last().map(|t| t.right) != Some(1) {
            return Err(Error::Config("right boundary bond must be 1".into()));
        }
        if let Some(c) = ortho_center {
            if c >= tensors.len() {
                return Err(Error::OutOfRange {
                    index: c,
                    limit: tensors.len(),
                });
            }
        }
        Ok(Self {
            tensors,
            d,
            ortho_center,
            policy,
            norm_ledger: 1.0,
            discarded_weight: 0.0,
            eps_tilde: 0.0,
            time: 0.0,
        })
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn ortho_center(&self) -> Option<usize> {
        self.ortho_center
    }

    pub fn tensor(&self, site: usize) -> &SiteTensor {
        &self.tensors[site]
    }

    pub fn tensors(&self) -> &[SiteTensor] {
        &self.tensors
    }

    /// Internal bond dimensions, `len() - 1` entries.
    pub fn bond_dims(&self) -> Vec<usize> {
        self.tensors[..self.len() - 1].iter().map(|t| t.right).collect()
    }

    pub fn max_bond(&self) -> usize {
        self.bond_dims().into_iter().max().unwrap_or(1)
    }

    /// Replace the site tensors, e.g. after a basis change applied in another
    /// representation. Drops the canonical form.
    pub fn replace_tensor(&mut self, site: usize, t: SiteTensor) -> Result<()> {
        let old = &self.tensors[site];
        if t.left != old.left || t.right != old.right || t.phys != old.phys {
            return Err(Error::DimensionMismatch {
                expected: old.left * old.phys * old.right,
                found: t.left * t.phys * t.right,
            });
        }
        self.tensors[site] = t;
        if self.ortho_center != Some(site) {
            self.ortho_center = None;
        }
        Ok(())
    }

    fn check_site(&self, site: usize) -> Result<()> {
        if site >= self.len() {
            return Err(Error::OutOfRange {
                index: site,
                limit: self.len(),
            });
        }
        Ok(())
    }

    fn check_op(&self, op: MatRef<'_, C64>) -> Result<()> {
        if op.nrows() != self.d || op.ncols() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                found: op.nrows().max(op.ncols()),
            });
        }
        Ok(())
    }

    fn shift_right(&mut self, j: usize) {
        let (q, r) = linalg::qr_thin(self.tensors[j].data.as_ref());
        let left = self.tensors[j].left;
        self.tensors[j] = SiteTensor::from_left_grouped(q, left, self.d);
        let next = self.tensors[j + 1].right_grouped();
        let merged = &r * &next;
        self.tensors[j + 1] = SiteTensor::from_right_grouped(merged.as_ref(), self.d);
    }

    fn shift_left(&mut self, j: usize) {
        let m = self.tensors[j].right_grouped();
        let (q, r) = linalg::qr_thin(m.adjoint().to_owned().as_ref());
        self.tensors[j] = SiteTensor::from_right_grouped(q.adjoint().to_owned().as_ref(), self.d);
        let left = self.tensors[j - 1].left;
        let merged = &self.tensors[j - 1].data * r.adjoint();
        self.tensors[j - 1] = SiteTensor::from_left_grouped(merged, left, self.d);
    }

    /// Bring the state into mixed canonical form with center `site`.
    pub fn canonicalize(&mut self, site: usize) -> Result<()> {
        self.check_site(site)?;
        for j in 0..site {
            self.shift_right(j);
        }
        for j in (site + 1..self.len()).rev() {
            self.shift_left(j);
        }
        self.ortho_center = Some(site);
        Ok(())
    }

    pub fn move_center(&mut self, site: usize) -> Result<()> {
        self.check_site(site)?;
        let Some(c) = self.ortho_center else {
            return self.canonicalize(site);
        };
        for j in c..site {
            self.shift_right(j);
        }
        for j in (site + 1..=c).rev() {
            self.shift_left(j);
        }
        self.ortho_center = Some(site);
        Ok(())
    }

    pub fn norm_sq(&self) -> f64 {
        match self.ortho_center {
            Some(c) => self.tensors[c].norm_sq(),
            None => overlap(self, self).re,
        }
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// Rescale to unit norm without touching the ledgers; returns the old squared norm.
    pub fn normalize(&mut self) -> f64 {
        if self.ortho_center.is_none() {
            // canonicalize cannot fail for a site inside the chain
            let _ = self.canonicalize(0);
        }
        let c = self.ortho_center.unwrap_or(0);
        let n2 = self.tensors[c].norm_sq();
        if n2 > 0.0 {
            self.tensors[c].scale(1.0 / n2.sqrt());
        }
        n2
    }

    /// Two-site block on `(bond, bond + 1)` as an `(l * d) x (d * r)` matrix.
    /// Moves the center onto the bond first.
    pub fn theta(&mut self, bond: usize) -> Result<Mat<C64>> {
        if bond + 1 >= self.len() {
            return Err(Error::OutOfRange {
                index: bond,
                limit: self.len().saturating_sub(1),
            });
        }
        match self.ortho_center {
            Some(c) if c == bond || c == bond + 1 => {}
            Some(c) if c > bond + 1 => self.move_center(bond + 1)?,
            _ => self.move_center(bond)?,
        }
        let right = self.tensors[bond + 1].right_grouped();
        Ok(&self.tensors[bond].data * &right)
    }

    /// Factor a two-site block back into the chain with SVD truncation under the
    /// state's policy, renormalizing. The squared norm of `theta` is folded into
    /// the norm ledger and the dropped weight into the discarded-weight ledger.
    pub fn split_theta(&mut self, bond: usize, theta: MatRef<'_, C64>, dir: Direction) -> Result<SplitInfo> {
        let (l, r) = (self.tensors[bond].left, self.tensors[bond + 1].right);
        let d = self.d;
        if theta.nrows() != l * d || theta.ncols() != d * r {
            return Err(Error::DimensionMismatch {
                expected: l * d * d * r,
                found: theta.nrows() * theta.ncols(),
            });
        }
        let (u, s, v) = linalg::svd(theta)?;
        let norm_sq: f64 = s.iter().map(|x| x * x).sum();
        if !(norm_sq > 0.0) {
            return Err(Error::Degenerate("two-site block vanished".into()));
        }
        let (keep, dropped) = self.policy.rank(&s);
        let kept_norm = s[..keep].iter().map(|x| x * x).sum::<f64>().sqrt();
        let scaled: Vec<f64> = s[..keep].iter().map(|x| x / kept_norm).collect();
        let (a, b) = match dir {
            Direction::Right => (
                u.subcols(0, keep).to_owned(),
                Mat::from_fn(keep, d * r, |k, c| scaled[k] * v[(c, k)].conj()),
            ),
            Direction::Left => (
                Mat::from_fn(l * d, keep, |row, k| u[(row, k)] * scaled[k]),
                Mat::from_fn(keep, d * r, |k, c| v[(c, k)].conj()),
            ),
        };
        self.tensors[bond] = SiteTensor::from_left_grouped(a, l, d);
        self.tensors[bond + 1] = SiteTensor::from_right_grouped(b.as_ref(), d);
        self.ortho_center = Some(match dir {
            Direction::Right => bond + 1,
            Direction::Left => bond,
        });
        self.norm_ledger *= norm_sq;
        self.discarded_weight += dropped;
        Ok(SplitInfo {
            kept: keep,
            discarded_weight: dropped,
            norm_sq,
        })
    }

    /// Apply a `d^2 x d^2` gate (row index `s * d + t`) to sites `(bond, bond + 1)`.
    pub fn apply_two_site_gate(&mut self, gate: MatRef<'_, C64>, bond: usize, dir: Direction) -> Result<SplitInfo> {
        let d = self.d;
        if gate.nrows() != d * d || gate.ncols() != d * d {
            return Err(Error::DimensionMismatch {
                expected: d * d,
                found: gate.nrows(),
            });
        }
        let theta = self.theta(bond)?;
        let out = apply_gate_to_theta(gate, theta.as_ref(), d);
        self.split_theta(bond, out.as_ref(), dir)
    }

    /// Contract `matrix` into the physical leg of `site`, record the squared-norm
    /// change, and renormalize.
    pub fn apply_single_site(&mut self, matrix: MatRef<'_, C64>, site: usize) -> Result<f64> {
        self.check_site(site)?;
        self.check_op(matrix)?;
        self.move_center(site)?;
        let before = self.tensors[site].norm_sq();
        self.tensors[site] = self.tensors[site].apply_op(matrix);
        let after = self.tensors[site].norm_sq();
        if !(after > 0.0) {
            return Err(Error::Degenerate("state annihilated by single-site operator".into()));
        }
        self.tensors[site].scale(1.0 / after.sqrt());
        let ratio = after / before;
        self.norm_ledger *= ratio;
        Ok(ratio)
    }

    /// Apply the same operator to every site, sweeping the center left to right.
    /// Returns the overall squared-norm ratio.
    pub fn apply_all_sites(&mut self, matrix: MatRef<'_, C64>) -> Result<f64> {
        self.check_op(matrix)?;
        self.move_center(0)?;
        let mut ratio = 1.0;
        for j in 0..self.len() {
            ratio *= self.apply_single_site(matrix, j)?;
        }
        Ok(ratio)
    }

    /// `<psi| O_{s1} O_{s2} ... |psi> / <psi|psi>` for operators on distinct sites.
    pub fn expect_product(&self, ops: &[(usize, MatRef<'_, C64>)]) -> Result<C64> {
        for &(site, op) in ops {
            self.check_site(site)?;
            self.check_op(op)?;
        }
        let (lo, hi, norm_sq) = match self.ortho_center {
            Some(c) => {
                let lo = ops.iter().map(|o| o.0).min().unwrap_or(c).min(c);
                let hi = ops.iter().map(|o| o.0).max().unwrap_or(c).max(c);
                (lo, hi, self.tensors[c].norm_sq())
            }
            None => (0, self.len() - 1, overlap(self, self).re),
        };
        let left = self.tensors[lo].left;
        let mut env = identity_c(left);
        for j in lo..=hi {
            let op = ops.iter().find(|o| o.0 == j).map(|o| o.1);
            env = transfer(env.as_ref(), &self.tensors[j], &self.tensors[j], op);
        }
        Ok(trace(env.as_ref()) / norm_sq)
    }

    pub fn expect_one(&self, op: MatRef<'_, C64>, site: usize) -> Result<C64> {
        self.expect_product(&[(site, op)])
    }

    /// `<O_a O_b>`; when both act on one site their product is taken there.
    pub fn expect_two(
        &self,
        op_a: MatRef<'_, C64>,
        site_a: usize,
        op_b: MatRef<'_, C64>,
        site_b: usize,
    ) -> Result<C64> {
        if site_a == site_b {
            self.check_op(op_a)?;
            self.check_op(op_b)?;
            let prod = op_a * op_b;
            return self.expect_one(prod.as_ref(), site_a);
        }
        self.expect_product(&[(site_a, op_a), (site_b, op_b)])
    }

    /// `<A_j B_k>` for every `k` in `j+1..=k_max`, in one pass.
    pub fn correlation_row(
        &self,
        op_a: MatRef<'_, C64>,
        j: usize,
        op_b: MatRef<'_, C64>,
        k_max: usize,
    ) -> Result<Vec<C64>> {
        self.check_site(j)?;
        self.check_site(k_max)?;
        self.check_op(op_a)?;
        self.check_op(op_b)?;
        let (c, norm_sq) = match self.ortho_center {
            Some(c) => (c, self.tensors[c].norm_sq()),
            None => (0, overlap(self, self).re),
        };
        let full = self.ortho_center.is_none();
        let lo = if full { 0 } else { j.min(c) };
        let mut env = identity_c(self.tensors[lo].left);
        for s in lo..j {
            env = transfer(env.as_ref(), &self.tensors[s], &self.tensors[s], None);
        }
        env = transfer(env.as_ref(), &self.tensors[j], &self.tensors[j], Some(op_a));
        let mut out = Vec::with_capacity(k_max.saturating_sub(j));
        for k in j + 1..=k_max {
            let mut closed = transfer(env.as_ref(), &self.tensors[k], &self.tensors[k], Some(op_b));
            let stop = if full { self.len() - 1 } else { c.max(k) };
            for s in k + 1..=stop {
                closed = transfer(closed.as_ref(), &self.tensors[s], &self.tensors[s], None);
            }
            out.push(trace(closed.as_ref()) / norm_sq);
            env = transfer(env.as_ref(), &self.tensors[k], &self.tensors[k], None);
        }
        Ok(out)
    }

    /// Dense coefficient vector, site 0 slowest.
    pub fn to_dense(&self) -> Result<Vec<C64>> {
        let dim = checked_dim(self.d, self.len())?;
        let mut acc = Mat::from_fn(1, 1, |_, _| ONE);
        for t in &self.tensors {
            let rg = t.right_grouped();
            // acc: (prefix) x left  ->  (prefix * d) x right
            let prod = &acc * &rg;
            let prefix = acc.nrows();
            acc = Mat::from_fn(prefix * self.d, t.right, |row, b| {
                prod[(row / self.d, (row % self.d) * t.right + b)]
            });
        }
        debug_assert_eq!(acc.nrows(), dim);
        Ok((0..dim).map(|k| acc[(k, 0)]).collect())
    }

    /// Largest deviation from the isometry conditions implied by the center.
    pub fn canonical_defect(&self) -> f64 {
        let Some(c) = self.ortho_center else {
            return f64::INFINITY;
        };
        let mut worst = 0.0_f64;
        for j in 0..c {
            let a = &self.tensors[j].data;
            let g = a.adjoint() * a;
            worst = worst.max(linalg::max_abs_diff(g.as_ref(), identity_c(g.nrows()).as_ref()));
        }
        for j in c + 1..self.len() {
            let b = self.tensors[j].right_grouped();
            let g = &b * b.adjoint();
            worst = worst.max(linalg::max_abs_diff(g.as_ref(), identity_c(g.nrows()).as_ref()));
        }
        worst
    }
}

/// `<a|b>` by full transfer-matrix contraction.
pub fn overlap(a: &MatrixProductState, b: &MatrixProductState) -> C64 {
    assert_eq!(a.len(), b.len(), "overlap of chains with different lengths");
    let mut env = identity_c(1);
    for (ta, tb) in a.tensors.iter().zip(&b.tensors) {
        env = transfer(env.as_ref(), ta, tb, None);
    }
    env[(0, 0)]
}

/// Row-major `(l d) x (d r)` two-site block with the gate acting on `(s, t)`.
pub fn apply_gate_to_theta(gate: MatRef<'_, C64>, theta: MatRef<'_, C64>, d: usize) -> Mat<C64> {
    let l = theta.nrows() / d;
    let r = theta.ncols() / d;
    let phi = Mat::from_fn(d * d, l * r, |st, ab| {
        let (s, t) = (st / d, st % d);
        let (a, b) = (ab / r, ab % r);
        theta[(a * d + s, t * r + b)]
    });
    let out = gate * &phi;
    Mat::from_fn(l * d, d * r, |row, col| {
        let (a, s) = (row / d, row % d);
        let (t, b) = (col / r, col % r);
        out[(s * d + t, a * r + b)]
    })
}

/// `E'[b, b'] = sum conj(A[a,s,b]) O[s,s'] E[a,a'] B[a',s',b']`.
pub fn transfer(
    env: MatRef<'_, C64>,
    bra: &SiteTensor,
    ket: &SiteTensor,
    op: Option<MatRef<'_, C64>>,
) -> Mat<C64> {
    let d = ket.phys;
    let x = env * ket.right_grouped();
    let rk = ket.right;
    let la = env.nrows();
    let y = Mat::from_fn(la * d, rk, |row, b| {
        let (a, s) = (row / d, row % d);
        match op {
            None => x[(a, s * rk + b)],
            Some(o) => {
                let mut acc = ZERO;
                for t in 0..d {
                    acc += o[(s, t)] * x[(a, t * rk + b)];
                }
                acc
            }
        }
    });
    bra.data.adjoint() * &y
}

fn trace(m: MatRef<'_, C64>) -> C64 {
    (0..m.nrows().min(m.ncols())).map(|i| m[(i, i)]).sum()
}

pub(crate) fn identity_c(n: usize) -> Mat<C64> {
    Mat::from_fn(n, n, |i, j| if i == j { ONE } else { ZERO })
}

fn checked_dim(d: usize, length: usize) -> Result<usize> {
    let mut dim: usize = 1;
    for _ in 0..length {
        dim = dim.checked_mul(d).ok_or(Error::OracleCap {
            dim: usize::MAX,
            cap: crate::oracle::DENSE_CAP,
        })?;
    }
    if dim > crate::oracle::DENSE_CAP {
        return Err(Error::OracleCap {
            dim,
            cap: crate::oracle::DENSE_CAP,
        });
    }
    Ok(dim)
}

/// Bond dimensions `[1, ..., 1]` limited by `chi` and by the exact Schmidt rank.
fn capped_bond_dims(length: usize, d: usize, chi: usize) -> Vec<usize> {
    (0..=length)
        .map(|j| {
            let from_left = (d as f64).powi(j as i32);
            let from_right = (d as f64).powi((length - j) as i32);
            from_left.min(from_right).min(chi as f64) as usize
        })
        .collect()
}
