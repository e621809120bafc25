//! Bulk correlators, correlation length, excitation energy and the per-bond
//! deviation map of a post-quench state.

use serde::{Deserialize, Serialize};

use crate::dmrg;
use crate::error::{Error, Result};
use crate::linalg::{self, C64};
use crate::local_solver::SiteOperators;
use crate::model::{LatticeHamiltonian, LatticeSpec};
use crate::mps::MatrixProductState;

/// Below this magnitude a negative correlator counts as noise.
pub const NEGATIVE_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelatorProfile {
    /// `c[l - 1]` is `C_l = C_{-l}` for `l = 1..=l_max`.
    pub c_by_distance: Vec<f64>,
    /// Spread (max - min) of the site-resolved values entering each `C_l`.
    pub site_spread: Vec<f64>,
    /// Retained sites `start..end`.
    pub bulk_window: (usize, usize),
    pub eps_tilde: f64,
}

impl CorrelatorProfile {
    pub fn l_max(&self) -> usize {
        self.c_by_distance.len()
    }

    /// `C_l` for signed `l != 0`.
    pub fn get(&self, l: i64) -> Option<f64> {
        let a = l.unsigned_abs() as usize;
        if a == 0 {
            return None;
        }
        self.c_by_distance.get(a - 1).copied()
    }

    /// Rows `(l, C_l)` for `l` in `-l_max..=l_max`, zero excluded.
    pub fn table(&self) -> Vec<(i64, f64)> {
        let m = self.l_max() as i64;
        (-m..=m)
            .filter(|&l| l != 0)
            .map(|l| (l, self.get(l).unwrap_or(0.0)))
            .collect()
    }
}

pub fn bulk_window(length: usize) -> Result<(usize, usize)> {
    if length < 8 {
        return Err(Error::Config(format!(
            "bulk window needs at least 8 sites, chain has {length}"
        )));
    }
    let cut = length / 4;
    Ok((cut, length - cut))
}

fn check_tag(psi: &MatrixProductState, ops: &SiteOperators) -> Result<()> {
    if psi.eps_tilde.to_bits() != ops.eps_tilde.to_bits() {
        return Err(Error::Assembly(format!(
            "state basis eps_tilde={} but operators built at {}",
            psi.eps_tilde, ops.eps_tilde
        )));
    }
    if psi.d() != ops.d() {
        return Err(Error::DimensionMismatch {
            expected: ops.d(),
            found: psi.d(),
        });
    }
    Ok(())
}

/// Bulk-averaged `Re<Y_j Y_{j+l}>` with both sites inside the window.
pub fn correlator_profile(
    psi: &MatrixProductState,
    ops: &SiteOperators,
    lattice: &LatticeSpec,
) -> Result<CorrelatorProfile> {
    check_tag(psi, ops)?;
    if psi.len() != lattice.length {
        return Err(Error::DimensionMismatch {
            expected: lattice.length,
            found: psi.len(),
        });
    }
    let (start, end) = bulk_window(lattice.length)?;
    let l_max = end - start - 1;
    let y = linalg::to_complex(ops.y().as_ref());
    let mut sum = vec![0.0; l_max];
    let mut lo = vec![f64::INFINITY; l_max];
    let mut hi = vec![f64::NEG_INFINITY; l_max];
    let mut count = vec![0usize; l_max];
    for j in start..end - 1 {
        let row = psi.correlation_row(y.as_ref(), j, y.as_ref(), end - 1)?;
        for (k, v) in row.iter().enumerate() {
            let v = v.re;
            sum[k] += v;
            lo[k] = lo[k].min(v);
            hi[k] = hi[k].max(v);
            count[k] += 1;
        }
    }
    Ok(CorrelatorProfile {
        c_by_distance: sum.iter().zip(&count).map(|(s, &n)| s / n as f64).collect(),
        site_spread: hi.iter().zip(&lo).map(|(h, l)| h - l).collect(),
        bulk_window: (start, end),
        eps_tilde: psi.eps_tilde,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationLength {
    pub xi: f64,
    /// Some `C_l` was negative beyond the noise floor and `|C_l|` was used.
    pub abs_fallback: bool,
}

/// `xi^2 = sum_{l != 0} (|l| - 1)^2 C_l / sum_{l != 0} C_l`.
pub fn correlation_length(profile: &CorrelatorProfile) -> Result<CorrelationLength> {
    let c = &profile.c_by_distance;
    if c.is_empty() {
        return Err(Error::Degenerate("empty correlator profile".into()));
    }
    let abs_fallback = c.iter().any(|&v| v < -NEGATIVE_FLOOR);
    let val = |v: f64| if abs_fallback { v.abs() } else { v };
    let den: f64 = c.iter().map(|&v| val(v)).sum();
    let num: f64 = c
        .iter()
        .enumerate()
        .map(|(k, &v)| (k as f64).powi(2) * val(v))
        .sum();
    if !(den > 0.0) {
        return Err(Error::Degenerate(format!("correlator sum {den:e} is not positive")));
    }
    if num < 0.0 {
        return Err(Error::Degenerate(format!("negative radicand {:e}", num / den)));
    }
    Ok(CorrelationLength {
        xi: (num / den).sqrt(),
        abs_fallback,
    })
}

/// `<psi|H|psi> - e_ground`, rejecting values below `-10 * energy_tol`.
pub fn excitation_energy(
    psi: &MatrixProductState,
    h_final: &LatticeHamiltonian,
    e_ground: f64,
    energy_tol: f64,
) -> Result<f64> {
    if psi.eps_tilde.to_bits() != h_final.eps_tilde.to_bits() {
        return Err(Error::Assembly(format!(
            "state basis eps_tilde={} but Hamiltonian at {}",
            psi.eps_tilde, h_final.eps_tilde
        )));
    }
    let e = dmrg::energy(h_final, psi)? - e_ground;
    if e < -10.0 * energy_tol {
        return Err(Error::NumericalConsistency(format!(
            "excitation energy {e:e} below zero: ground energy is not variational"
        )));
    }
    Ok(e)
}

/// `|<Y_j Y_{j+1}>_psi - <Y_j Y_{j+1}>_ground|` for every bond.
pub fn deviation_map(
    psi: &MatrixProductState,
    ground: &MatrixProductState,
    ops: &SiteOperators,
    lattice: &LatticeSpec,
) -> Result<Vec<f64>> {
    check_tag(psi, ops)?;
    check_tag(ground, ops)?;
    for s in [psi, ground] {
        if s.len() != lattice.length {
            return Err(Error::DimensionMismatch {
                expected: lattice.length,
                found: s.len(),
            });
        }
    }
    let y = linalg::to_complex(ops.y().as_ref());
    let nn = |s: &MatrixProductState| -> Result<Vec<C64>> {
        (0..lattice.length - 1)
            .map(|j| s.expect_two(y.as_ref(), j, y.as_ref(), j + 1))
            .collect()
    };
    let a = nn(psi)?;
    let b = nn(ground)?;
    Ok(a.iter().zip(&b).map(|(x, y)| (x.re - y.re).abs()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn profile(c: Vec<f64>) -> CorrelatorProfile {
        let n = c.len();
        CorrelatorProfile {
            site_spread: vec![0.0; n],
            c_by_distance: c,
            bulk_window: (0, n + 1),
            eps_tilde: 0.0,
        }
    }

    #[test]
    fn trivial_lengths() {
        assert_eq!(correlation_length(&profile(vec![0.3, 0.0, 0.0])).unwrap().xi, 0.0);
        let x = correlation_length(&profile(vec![0.0, 0.7, 0.0])).unwrap();
        assert!((x.xi - 1.0).abs() < 1e-15);
        assert!(!x.abs_fallback);
    }

    #[test]
    fn exponential_profile_matches_direct_sum() {
        let xi0 = 3.0_f64;
        let c: Vec<f64> = (1..=30).map(|l| (-(l as f64) / xi0).exp()).collect();
        let q = (-1.0 / xi0).exp();
        // sum_{l=1}^{30} q^l and sum (l-1)^2 q^l in closed form via the finite series
        let n = 30;
        let den = q * (1.0 - q.powi(n)) / (1.0 - q);
        let mut num = 0.0;
        for m in 0..n {
            num += (m as f64).powi(2) * q.powi(m + 1);
        }
        let got = correlation_length(&profile(c)).unwrap().xi;
        assert!((got - (num / den).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn negative_entries_trigger_fallback() {
        let x = correlation_length(&profile(vec![0.5, -0.1, 0.05])).unwrap();
        assert!(x.abs_fallback);
        let y = correlation_length(&profile(vec![0.5, 0.1, 0.05])).unwrap();
        assert!((x.xi - y.xi).abs() < 1e-15);
        assert!(correlation_length(&profile(vec![0.0, 0.0])).is_err());
    }

    #[test]
    fn symmetric_table() {
        let p = profile(vec![1.0, 0.5]);
        assert_eq!(p.table(), vec![(-2, 0.5), (-1, 1.0), (1, 1.0), (2, 0.5)]);
        assert_eq!(p.get(-2), p.get(2));
        assert_eq!(p.get(0), None);
        assert!(bulk_window(6).is_err());
        assert_eq!(bulk_window(20).unwrap(), (5, 15));
    }
}
