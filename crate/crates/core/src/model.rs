//! Truncated lattice Hamiltonian on an open chain, its even/odd bond split, and
//! the piecewise-flat discretization of the linear ramp.

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::local_solver::SiteOperators;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub hbar: f64,
    pub g: f64,
    pub omega0: f64,
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("hbar", self.hbar), ("g", self.g), ("omega0", self.omega0)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// Critical control value `3 g hbar (ln hbar - c') / (pi Omega0)`.
    /// At `hbar = 0.1, g = 8.695` this puts `Omega0 * eps_tilde_c` at `-4.09`.
    pub fn critical_field(&self, c_prime: f64) -> f64 {
        3.0 * self.g * self.hbar * (self.hbar.ln() - c_prime) / (std::f64::consts::PI * self.omega0)
    }
}

/// Non-universal constant of the logarithmic critical-field shift.
pub const C_PRIME: f64 = 2.63;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// Couplings on bonds `1..L-1` only; edge sites carry half a `W` term.
    #[default]
    Open,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub length: usize,
    pub model: ModelParams,
    #[serde(default)]
    pub boundary: Boundary,
}

impl LatticeSpec {
    /// Even-length open chain. Two sites are accepted so the smallest
    /// hand-checkable instance can be built.
    pub fn new(length: usize, model: ModelParams) -> Result<Self> {
        let spec = Self {
            length,
            model,
            boundary: Boundary::Open,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.length < 2 || !self.length.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "lattice length must be even and >= 2, got {}",
                self.length
            )));
        }
        Ok(())
    }

    /// Coefficient of `W_j` after distributing the bond energies `(y_j - y_{j+1})^2 / 2`.
    pub fn w_coefficient(&self, site: usize) -> f64 {
        if site == 0 || site + 1 == self.length {
            0.5
        } else {
            1.0
        }
    }
}

#[derive(Clone, Debug)]
pub struct LatticeHamiltonian {
    pub length: usize,
    pub d: usize,
    pub hbar: f64,
    pub eps_tilde: f64,
    /// `Q_j + c_j W_j`, one per site.
    pub site_terms: Vec<Mat<f64>>,
    /// `-Y_j (x) Y_{j+1}` on bond `(j, j+1)`, row index `s * d + t`.
    pub bond_terms: Vec<Mat<f64>>,
    pub w_coefficients: Vec<f64>,
    pub ops: SiteOperators,
}

/// Truncated-basis Hamiltonian at control value `eps_tilde`.
pub fn assemble(
    lattice: &LatticeSpec,
    ops: &SiteOperators,
    eps_tilde: f64,
) -> Result<LatticeHamiltonian> {
    lattice.validate()?;
    let d = ops.d();
    if ops.y_mat.len() != d || ops.w_mat.len() != d {
        return Err(Error::Assembly("site operator shapes disagree".into()));
    }
    if ops.y_mat.iter().chain(&ops.w_mat).any(|row| row.len() != d) {
        return Err(Error::Assembly("site operators are not square".into()));
    }
    if ops.eps_tilde.to_bits() != eps_tilde.to_bits() {
        return Err(Error::Assembly(format!(
            "site operators built at eps_tilde = {} but assembling at {eps_tilde}",
            ops.eps_tilde
        )));
    }
    let q = ops.q();
    let w = ops.w();
    let y = ops.y();
    let w_coefficients: Vec<f64> = (0..lattice.length).map(|j| lattice.w_coefficient(j)).collect();
    let site_terms = w_coefficients
        .iter()
        .map(|&c| Mat::from_fn(d, d, |a, b| q[(a, b)] + c * w[(a, b)]))
        .collect();
    let yy = linalg::kron(y.as_ref(), y.as_ref());
    let bond = Mat::from_fn(d * d, d * d, |a, b| -yy[(a, b)]);
    Ok(LatticeHamiltonian {
        length: lattice.length,
        d,
        hbar: lattice.model.hbar,
        eps_tilde,
        site_terms,
        bond_terms: vec![bond; lattice.length - 1],
        w_coefficients,
        ops: ops.clone(),
    })
}

/// Position of a bond along the chain; bonds of the same class have identical
/// folded Hamiltonians.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BondClass {
    LeftEdge,
    Bulk,
    RightEdge,
    /// The only bond of a two-site chain.
    Whole,
}

#[derive(Clone, Debug)]
pub struct BondTerm {
    /// Left site of the bond.
    pub site: usize,
    pub class: BondClass,
    /// `d^2 x d^2`, row index `s * d + t`.
    pub matrix: Mat<f64>,
}

#[derive(Clone, Debug)]
pub struct BondSplit {
    /// Bonds `(0,1), (2,3), ...` (the `A` group).
    pub odd_even: Vec<BondTerm>,
    /// Bonds `(1,2), (3,4), ...` (the `B` group).
    pub even_odd: Vec<BondTerm>,
}

impl LatticeHamiltonian {
    pub fn bond_class(&self, site: usize) -> BondClass {
        let last = self.length - 2;
        match (site == 0, site == last) {
            (true, true) => BondClass::Whole,
            (true, false) => BondClass::LeftEdge,
            (false, true) => BondClass::RightEdge,
            (false, false) => BondClass::Bulk,
        }
    }

    /// Bond Hamiltonian with the neighbouring single-site terms folded in: half
    /// of each site term goes to each adjacent bond, all of it at the chain ends.
    pub fn folded_bond(&self, site: usize) -> Mat<f64> {
        let d = self.d;
        let wl = if site == 0 { 1.0 } else { 0.5 };
        let wr = if site + 2 == self.length { 1.0 } else { 0.5 };
        let id = linalg::identity(d);
        let left = linalg::kron(self.site_terms[site].as_ref(), id.as_ref());
        let right = linalg::kron(id.as_ref(), self.site_terms[site + 1].as_ref());
        let bond = &self.bond_terms[site];
        Mat::from_fn(d * d, d * d, |a, b| {
            wl * left[(a, b)] + wr * right[(a, b)] + bond[(a, b)]
        })
    }
}

pub fn bond_split(h: &LatticeHamiltonian) -> BondSplit {
    let mut odd_even = Vec::new();
    let mut even_odd = Vec::new();
    for site in 0..h.length - 1 {
        let term = BondTerm {
            site,
            class: h.bond_class(site),
            matrix: h.folded_bond(site),
        };
        if site % 2 == 0 {
            odd_even.push(term);
        } else {
            even_odd.push(term);
        }
    }
    BondSplit { odd_even, even_odd }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Plateau {
    /// Shifted field `eps = eps_tilde_c - eps_tilde` held on this plateau.
    pub eps: f64,
    pub eps_tilde: f64,
    /// Evolution time spent on this plateau.
    pub interval: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuenchSchedule {
    pub tau_q: f64,
    /// Timestep actually used (`tau_q / steps`).
    pub dt: f64,
    pub requested_dt: f64,
    pub eps_start: f64,
    pub eps_end: f64,
    pub eps_tilde_c: f64,
    /// Number of basis changes; there are `steps + 1` plateaus.
    pub steps: usize,
    pub plateaus: Vec<Plateau>,
}

impl QuenchSchedule {
    /// Constant control jump between consecutive plateaus.
    pub fn delta_eps_tilde(&self) -> f64 {
        -self.dt / self.tau_q
    }

    pub fn total_time(&self) -> f64 {
        self.plateaus.iter().map(|p| p.interval).sum()
    }

    /// Index of the plateau whose field is closest to `eps`.
    pub fn nearest_plateau(&self, eps: f64) -> usize {
        let k = ((eps - self.eps_start) * self.tau_q / self.dt).round();
        k.clamp(0.0, self.steps as f64) as usize
    }
}

/// Piecewise-flat version of `eps(t) = t / tau_q` on `[-tau_q/2, tau_q/2]`.
///
/// The time grid is anchored at the ramp start, `t_k = -tau_q/2 + k dt`. Plateau
/// `k` holds `eps_k = t_k / tau_q` over `[t_k - dt/2, t_k + dt/2]` clipped to the
/// ramp, so the first and last plateaus last `dt / 2`. When `tau_q / dt` is not
/// an integer the step is shrunk to `tau_q / ceil(tau_q / dt)`.
pub fn schedule(tau_q: f64, dt: f64, eps_tilde_c: f64) -> Result<QuenchSchedule> {
    if !(tau_q > 0.0 && tau_q.is_finite()) {
        return Err(Error::Schedule(format!("tau_q must be positive, got {tau_q}")));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Schedule(format!("dt must be positive, got {dt}")));
    }
    if dt > tau_q * (1.0 + 1e-12) {
        return Err(Error::Schedule(format!("dt = {dt} exceeds tau_q = {tau_q}")));
    }
    let steps = ((tau_q / dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    let h = tau_q / steps as f64;
    let eps_start = -0.5;
    let plateaus = (0..=steps)
        .map(|k| {
            let eps = eps_start + k as f64 / steps as f64;
            let interval = if k == 0 || k == steps { 0.5 * h } else { h };
            Plateau {
                eps,
                eps_tilde: eps_tilde_c - eps,
                interval,
            }
        })
        .collect();
    Ok(QuenchSchedule {
        tau_q,
        dt: h,
        requested_dt: dt,
        eps_start,
        eps_end: 0.5,
        eps_tilde_c,
        steps,
        plateaus,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::local_solver::{self, LocalHamiltonianSpec};

    fn ops(d: usize, eps_tilde: f64) -> SiteOperators {
        let spec = LocalHamiltonianSpec::new(0.1, local_solver::ion_chain_g(), 9.0, eps_tilde, d);
        local_solver::site_operators(&local_solver::solve_local(&spec, d).unwrap())
    }

    fn params() -> ModelParams {
        ModelParams {
            hbar: 0.1,
            g: local_solver::ion_chain_g(),
            omega0: 9.0,
        }
    }

    #[test]
    fn schedule_quarter_steps() {
        let s = schedule(1.0, 0.25, 0.0).unwrap();
        let eps: Vec<f64> = s.plateaus.iter().map(|p| p.eps).collect();
        let iv: Vec<f64> = s.plateaus.iter().map(|p| p.interval).collect();
        assert_eq!(eps, vec![-0.5, -0.25, 0.0, 0.25, 0.5]);
        assert_eq!(iv, vec![0.125, 0.25, 0.25, 0.25, 0.125]);
    }

    #[test]
    fn schedule_jumps_are_constant() {
        let s = schedule(3.0, 0.1, 0.2).unwrap();
        for w in s.plateaus.windows(2) {
            let jump = w[1].eps_tilde - w[0].eps_tilde;
            assert!((jump - s.delta_eps_tilde()).abs() < 1e-14);
        }
        assert!((s.plateaus[0].eps_tilde - 0.7).abs() < 1e-15);
    }

    #[test]
    fn long_schedule_sums_exactly() {
        let s = schedule(10.0, 1e-3, 0.0).unwrap();
        assert_eq!(s.plateaus.len(), 10001);
        assert!((s.total_time() - 10.0).abs() < 1e-12);
    }

    #[test]
    fn schedule_rejects_oversized_step() {
        assert!(matches!(schedule(1.0, 2.0, 0.0), Err(Error::Schedule(_))));
        assert!(matches!(schedule(1.0, 0.0, 0.0), Err(Error::Schedule(_))));
        // a single jump is the sudden quench
        let s = schedule(0.5, 0.5, 0.0).unwrap();
        assert_eq!(s.plateaus.len(), 2);
        assert_eq!(s.plateaus[0].interval, 0.25);
    }

    #[test]
    fn non_commensurate_step_is_shrunk() {
        let s = schedule(1.0, 0.3, 0.0).unwrap();
        assert_eq!(s.steps, 4);
        assert!((s.dt - 0.25).abs() < 1e-15);
        assert_eq!(s.requested_dt, 0.3);
    }

    #[test]
    fn edge_and_bulk_terms() {
        let o = ops(3, 0.1);
        let lat = LatticeSpec::new(6, params()).unwrap();
        let h = assemble(&lat, &o, 0.1).unwrap();
        assert_eq!(h.bond_terms.len(), 5);
        assert_eq!(h.w_coefficients, vec![0.5, 1.0, 1.0, 1.0, 1.0, 0.5]);
        for j in 2..5 {
            assert_eq!(
                linalg::max_abs_diff(h.site_terms[1].as_ref(), h.site_terms[j].as_ref()),
                0.0
            );
        }
    }

    #[test]
    fn assemble_rejects_foreign_operators() {
        let o = ops(3, 0.1);
        let lat = LatticeSpec::new(4, params()).unwrap();
        assert!(matches!(assemble(&lat, &o, 0.2), Err(Error::Assembly(_))));
        assert!(LatticeSpec::new(5, params()).is_err());
    }

    #[test]
    fn split_partitions_bonds() {
        let o = ops(3, 0.1);
        let h = assemble(&LatticeSpec::new(4, params()).unwrap(), &o, 0.1).unwrap();
        let split = bond_split(&h);
        let a: Vec<usize> = split.odd_even.iter().map(|b| b.site).collect();
        let b: Vec<usize> = split.even_odd.iter().map(|b| b.site).collect();
        assert_eq!(a, vec![0, 2]);
        assert_eq!(b, vec![1]);
        assert_eq!(split.odd_even[0].class, BondClass::LeftEdge);
        assert_eq!(split.odd_even[1].class, BondClass::RightEdge);
        assert_eq!(split.even_odd[0].class, BondClass::Bulk);
    }

    #[test]
    fn edge_site_is_folded_entirely_into_its_bond() {
        let o = ops(3, 0.1);
        let h = assemble(&LatticeSpec::new(4, params()).unwrap(), &o, 0.1).unwrap();
        let folded = h.folded_bond(0);
        let id = linalg::identity(3);
        let expect_left = linalg::kron(h.site_terms[0].as_ref(), id.as_ref());
        let expect_right = linalg::kron(id.as_ref(), h.site_terms[1].as_ref());
        let want = Mat::from_fn(9, 9, |a, b| {
            expect_left[(a, b)] + 0.5 * expect_right[(a, b)] + h.bond_terms[0][(a, b)]
        });
        assert!(linalg::max_abs_diff(folded.as_ref(), want.as_ref()) < 1e-15);
    }
}
