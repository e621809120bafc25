//! Two-site DMRG for the nearest-neighbour chain, with a penalty term for the
//! first excited state.
//!
//! Block operators are kept explicitly: for the left block the accumulated
//! Hamiltonian and the position operator of its last site, and likewise on the
//! right. This is the bond-dimension-3 MPO `[[1,0,0],[Y,0,0],[h,-Y,1]]`
//! contracted into environments.

use faer::linalg::matmul::matmul;
use faer::{Accum, Mat, MatMut, MatRef, Par};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, LanczosSettings, C64, ONE, ZERO};
use crate::model::LatticeHamiltonian;
use crate::mps::{self, Direction, MatrixProductState, SiteTensor, TruncationPolicy};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "index")]
pub enum InitialState {
    Random,
    Product(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DmrgSettings {
    pub max_sweeps: usize,
    /// Stop once a full sweep changes the energy by less than this.
    pub energy_tol: f64,
    pub trunc: TruncationPolicy,
    pub seed: u64,
    /// Weight of `|ground><ground|` for excited states; `None` picks 1.0.
    pub penalty_weight: Option<f64>,
    pub initial: InitialState,
    /// Bond dimension of the first sweep; doubled each sweep up to `trunc.m_max`.
    pub initial_bond: usize,
    pub lanczos_tol: f64,
    pub lanczos_krylov: usize,
    pub lanczos_restarts: usize,
}

impl Default for DmrgSettings {
    fn default() -> Self {
        Self {
            max_sweeps: 30,
            energy_tol: 1e-10,
            trunc: TruncationPolicy::default(),
            seed: 0x5eed,
            penalty_weight: None,
            initial: InitialState::Random,
            initial_bond: 8,
            lanczos_tol: 1e-10,
            lanczos_krylov: 24,
            lanczos_restarts: 4,
        }
    }
}

impl DmrgSettings {
    pub fn validate(&self) -> Result<()> {
        self.trunc.validate()?;
        if self.max_sweeps < 2 {
            return Err(Error::Config("max_sweeps must be >= 2".into()));
        }
        if !(self.energy_tol > 0.0) {
            return Err(Error::Config("energy_tol must be positive".into()));
        }
        if let Some(w) = self.penalty_weight {
            if !(w > 0.0) {
                return Err(Error::Config("penalty_weight must be positive".into()));
            }
        }
        if self.initial_bond == 0 || self.lanczos_krylov < 2 {
            return Err(Error::Config("initial_bond and lanczos_krylov must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct DmrgResult {
    pub psi: MatrixProductState,
    pub energy: f64,
    pub converged: bool,
    pub sweeps: usize,
    /// Energy at the end of every sweep.
    pub history: Vec<f64>,
    /// Largest weight dropped at a single bond during the last sweep.
    pub max_discarded: f64,
}

#[derive(Clone, Debug)]
pub struct GapResult {
    pub gap: f64,
    pub excited_energy: f64,
    pub ground_energy: f64,
    /// `|<excited|ground>|` of the returned state.
    pub overlap: f64,
    pub penalty_weight: f64,
    pub converged: bool,
    pub excited: MatrixProductState,
}

/// Left or right block: accumulated Hamiltonian and `Y` on the site touching the
/// open bond.
#[derive(Clone, Debug)]
struct Block {
    h: Mat<C64>,
    y: Mat<C64>,
}

impl Block {
    fn boundary() -> Self {
        Self {
            h: Mat::zeros(1, 1),
            y: Mat::zeros(1, 1),
        }
    }
}

struct Terms {
    site: Vec<Mat<C64>>,
    y: Mat<C64>,
    /// `h_j (x) 1 + 1 (x) h_{j+1} - Y (x) Y` for every bond.
    pair: Vec<Mat<C64>>,
}

impl Terms {
    fn new(h: &LatticeHamiltonian) -> Self {
        let d = h.d;
        let site: Vec<Mat<C64>> = h.site_terms.iter().map(|m| linalg::to_complex(m.as_ref())).collect();
        let y = linalg::to_complex(h.ops.y().as_ref());
        let id = linalg::identity(d);
        let pair = (0..h.length - 1)
            .map(|j| {
                let a = linalg::kron(h.site_terms[j].as_ref(), id.as_ref());
                let b = linalg::kron(id.as_ref(), h.site_terms[j + 1].as_ref());
                let bond = &h.bond_terms[j];
                Mat::from_fn(d * d, d * d, |r, c| C64::new(a[(r, c)] + b[(r, c)] + bond[(r, c)], 0.0))
            })
            .collect();
        Self { site, y, pair }
    }
}

/// Left environment transfer with identity on the left bond of `t`, i.e.
/// `sum conj(t) op t` summed over the left index as well.
fn left_extend(block: &Block, t: &SiteTensor, site_h: MatRef<'_, C64>, y: MatRef<'_, C64>) -> Block {
    let id = mps::identity_c(t.left);
    let mut h = mps::transfer(block.h.as_ref(), t, t, None);
    h += mps::transfer(id.as_ref(), t, t, Some(site_h));
    h -= mps::transfer(block.y.as_ref(), t, t, Some(y));
    let yb = mps::transfer(id.as_ref(), t, t, Some(y));
    Block { h, y: yb }
}

/// `E'[a, a'] = sum conj(bra[a,s,b]) op[s,s'] E[b,b'] ket[a',s',b']`.
fn transfer_right(env: MatRef<'_, C64>, bra: &SiteTensor, ket: &SiteTensor, op: Option<MatRef<'_, C64>>) -> Mat<C64> {
    let d = ket.phys;
    // ket (l' d) x r'  times  env^T (r' x r)  ->  (l' d) x r
    let x = &ket.data * env.transpose();
    let lk = ket.left;
    let rb = bra.right;
    let y = Mat::from_fn(lk, d * rb, |a2, col| {
        let (s, b) = (col / rb, col % rb);
        match op {
            None => x[(a2 * d + s, b)],
            Some(o) => {
                let mut acc = ZERO;
                for t in 0..d {
                    acc += o[(s, t)] * x[(a2 * d + t, b)];
                }
                acc
            }
        }
    });
    // result[a, a'] = sum_{s,b} conj(bra[a,(s,b)]) y[a', (s,b)]
    let bra_rg = bra.right_grouped();
    bra_rg.conjugate() * y.transpose()
}

fn right_extend(block: &Block, t: &SiteTensor, site_h: MatRef<'_, C64>, y: MatRef<'_, C64>) -> Block {
    let id = mps::identity_c(t.right);
    let mut h = transfer_right(block.h.as_ref(), t, t, None);
    h += transfer_right(id.as_ref(), t, t, Some(site_h));
    h -= transfer_right(block.y.as_ref(), t, t, Some(y));
    let yb = transfer_right(id.as_ref(), t, t, Some(y));
    Block { h, y: yb }
}

/// Effective two-site problem on a flat row-major `(a, s, t, b)` vector.
struct TwoSite<'a> {
    la: usize,
    rb: usize,
    d: usize,
    left: &'a Block,
    right: &'a Block,
    pair: MatRef<'a, C64>,
    y: MatRef<'a, C64>,
    /// Penalty projector `w |p><p|`.
    penalty: Option<(f64, Vec<C64>)>,
}

fn rm<'a>(x: &'a [C64], rows: usize, cols: usize) -> MatRef<'a, C64> {
    MatRef::from_row_major_slice(x, rows, cols)
}

fn rm_mut<'a>(x: &'a mut [C64], rows: usize, cols: usize) -> MatMut<'a, C64> {
    MatMut::from_row_major_slice_mut(x, rows, cols)
}

impl TwoSite<'_> {
    fn apply(&self, x: &[C64], out: &mut [C64], tmp: &mut Vec<C64>) {
        let (la, rb, d) = (self.la, self.rb, self.d);
        let inner = d * d * rb;
        // left block Hamiltonian
        matmul(rm_mut(out, la, inner), Accum::Replace, self.left.h.as_ref(), rm(x, la, inner), ONE, Par::Seq);
        // right block Hamiltonian, acting on b
        matmul(
            rm_mut(out, la * d * d, rb),
            Accum::Add,
            rm(x, la * d * d, rb),
            self.right.h.transpose(),
            ONE,
            Par::Seq,
        );
        // the two explicit sites
        for a in 0..la {
            let off = a * inner;
            matmul(
                rm_mut(&mut out[off..off + inner], d * d, rb),
                Accum::Add,
                self.pair,
                rm(&x[off..off + inner], d * d, rb),
                ONE,
                Par::Seq,
            );
        }
        // -Y_last(left) Y_s
        tmp.clear();
        tmp.resize(x.len(), ZERO);
        matmul(rm_mut(tmp, la, inner), Accum::Replace, self.left.y.as_ref(), rm(x, la, inner), ONE, Par::Seq);
        for a in 0..la {
            let off = a * inner;
            matmul(
                rm_mut(&mut out[off..off + inner], d, d * rb),
                Accum::Add,
                self.y,
                rm(&tmp[off..off + inner], d, d * rb),
                -ONE,
                Par::Seq,
            );
        }
        // -Y_t Y_first(right)
        matmul(
            rm_mut(tmp, la * d * d, rb),
            Accum::Replace,
            rm(x, la * d * d, rb),
            self.right.y.transpose(),
            ONE,
            Par::Seq,
        );
        for as_ in 0..la * d {
            let off = as_ * d * rb;
            matmul(
                rm_mut(&mut out[off..off + d * rb], d, rb),
                Accum::Add,
                self.y,
                rm(&tmp[off..off + d * rb], d, rb),
                -ONE,
                Par::Seq,
            );
        }
        if let Some((w, p)) = &self.penalty {
            let c = linalg::dot(p, x) * *w;
            out.iter_mut().zip(p).for_each(|(o, pi)| *o += c * pi);
        }
    }
}

fn theta_to_flat(theta: MatRef<'_, C64>) -> Vec<C64> {
    let (rows, cols) = (theta.nrows(), theta.ncols());
    let mut v = Vec::with_capacity(rows * cols);
    for i in 0..rows {
        for j in 0..cols {
            v.push(theta[(i, j)]);
        }
    }
    v
}

fn flat_to_theta(v: &[C64], rows: usize, cols: usize) -> Mat<C64> {
    Mat::from_fn(rows, cols, |i, j| v[i * cols + j])
}

/// Overlap environments between the state being optimized (bra) and a fixed
/// reference state (ket).
struct Projector<'a> {
    reference: &'a MatrixProductState,
    weight: f64,
    left: Vec<Mat<C64>>,
    right: Vec<Mat<C64>>,
}

impl<'a> Projector<'a> {
    fn new(reference: &'a MatrixProductState, weight: f64, length: usize) -> Self {
        Self {
            reference,
            weight,
            left: vec![Mat::from_fn(1, 1, |_, _| ONE); length + 1],
            right: vec![Mat::from_fn(1, 1, |_, _| ONE); length + 1],
        }
    }

    fn vector(&self, bond: usize) -> Vec<C64> {
        let g = self.reference;
        let d = g.d();
        let ga = g.tensor(bond);
        let gb = g.tensor(bond + 1);
        let theta = &ga.data * gb.right_grouped();
        // (l_g d) x (d r_g) -> apply left env on l_g and right env on r_g
        let lenv = &self.left[bond];
        let renv = &self.right[bond + 2];
        let (lg, rg) = (ga.left, gb.right);
        let la = lenv.nrows();
        let rb = renv.nrows();
        let t1 = Mat::from_fn(lg, d * d * rg, |a, col| {
            let (s, rest) = (col / (d * rg), col % (d * rg));
            theta[(a * d + s, rest)]
        });
        let t2 = lenv * &t1; // la x (d d rg)
        let t3 = Mat::from_fn(la * d * d, rg, |row, b| t2[(row / (d * d), (row % (d * d)) * rg + b)]);
        let t4 = &t3 * renv.transpose(); // (la d d) x rb
        let mut v = Vec::with_capacity(la * d * d * rb);
        for row in 0..la * d * d {
            for b in 0..rb {
                v.push(t4[(row, b)]);
            }
        }
        v
    }

    fn extend_left(&mut self, psi: &MatrixProductState, site: usize) {
        self.left[site + 1] = mps::transfer(
            self.left[site].as_ref(),
            psi.tensor(site),
            self.reference.tensor(site),
            None,
        );
    }

    fn extend_right(&mut self, psi: &MatrixProductState, site: usize) {
        self.right[site] = transfer_right(
            self.right[site + 1].as_ref(),
            psi.tensor(site),
            self.reference.tensor(site),
            None,
        );
    }
}

struct Engine<'a> {
    h: &'a LatticeHamiltonian,
    terms: Terms,
    settings: DmrgSettings,
    left: Vec<Block>,
    right: Vec<Block>,
    projector: Option<Projector<'a>>,
}

impl<'a> Engine<'a> {
    fn new(h: &'a LatticeHamiltonian, settings: DmrgSettings, projector: Option<Projector<'a>>) -> Self {
        let l = h.length;
        Self {
            h,
            terms: Terms::new(h),
            settings,
            left: vec![Block::boundary(); l + 1],
            right: vec![Block::boundary(); l + 1],
            projector,
        }
    }

    fn extend_left(&mut self, psi: &MatrixProductState, site: usize) {
        self.left[site + 1] = left_extend(
            &self.left[site],
            psi.tensor(site),
            self.terms.site[site].as_ref(),
            self.terms.y.as_ref(),
        );
        if let Some(p) = self.projector.as_mut() {
            p.extend_left(psi, site);
        }
    }

    fn extend_right(&mut self, psi: &MatrixProductState, site: usize) {
        self.right[site] = right_extend(
            &self.right[site + 1],
            psi.tensor(site),
            self.terms.site[site].as_ref(),
            self.terms.y.as_ref(),
        );
        if let Some(p) = self.projector.as_mut() {
            p.extend_right(psi, site);
        }
    }

    /// Optimize bond `(j, j+1)`; returns the local eigenvalue and dropped weight.
    fn optimize(&mut self, psi: &mut MatrixProductState, j: usize, dir: Direction) -> Result<(f64, f64)> {
        let theta = psi.theta(j)?;
        let d = self.h.d;
        let la = psi.tensor(j).left;
        let rb = psi.tensor(j + 1).right;
        let x0 = theta_to_flat(theta.as_ref());
        let penalty = self.projector.as_ref().map(|p| (p.weight, p.vector(j)));
        let op = TwoSite {
            la,
            rb,
            d,
            left: &self.left[j],
            right: &self.right[j + 2],
            pair: self.terms.pair[j].as_ref(),
            y: self.terms.y.as_ref(),
            penalty,
        };
        let settings = LanczosSettings {
            tol: self.settings.lanczos_tol,
            krylov: self.settings.lanczos_krylov,
            max_restarts: self.settings.lanczos_restarts,
        };
        let tmp = std::cell::RefCell::new(Vec::new());
        let res = linalg::lanczos_lowest(|x, y| op.apply(x, y, &mut tmp.borrow_mut()), &x0, settings);
        let opt = flat_to_theta(&res.vector, la * d, d * rb);
        let info = psi.split_theta(j, opt.as_ref(), dir)?;
        Ok((res.value, info.discarded_weight))
    }

    fn run(&mut self, mut psi: MatrixProductState) -> Result<DmrgResult> {
        let l = self.h.length;
        psi.canonicalize(0)?;
        for site in (1..l).rev() {
            self.extend_right(&psi, site);
        }
        let mut history = Vec::new();
        let mut converged = false;
        let mut energy = f64::INFINITY;
        let mut max_discarded = 0.0;
        let full = self.settings.trunc;
        let mut m = self.settings.initial_bond.min(full.m_max).max(2);
        let mut sweeps = 0;
        while sweeps < self.settings.max_sweeps {
            sweeps += 1;
            psi.policy = TruncationPolicy { m_max: m, ..full };
            let mut sweep_discarded: f64 = 0.0;
            let mut e = f64::INFINITY;
            for j in 0..l - 1 {
                let (val, w) = self.optimize(&mut psi, j, Direction::Right)?;
                e = val;
                sweep_discarded = sweep_discarded.max(w);
                self.extend_left(&psi, j);
            }
            for j in (0..l - 1).rev() {
                let (val, w) = self.optimize(&mut psi, j, Direction::Left)?;
                e = val;
                sweep_discarded = sweep_discarded.max(w);
                self.extend_right(&psi, j + 1);
            }
            history.push(e);
            max_discarded = sweep_discarded;
            let at_full = m == full.m_max;
            if at_full && sweeps >= 2 && (energy - e).abs() < self.settings.energy_tol {
                energy = e;
                converged = true;
                break;
            }
            energy = e;
            m = (2 * m).min(full.m_max);
        }
        psi.policy = full;
        psi.norm_ledger = 1.0;
        psi.discarded_weight = 0.0;
        psi.eps_tilde = self.h.eps_tilde;
        psi.time = 0.0;
        Ok(DmrgResult {
            psi,
            energy,
            converged,
            sweeps,
            history,
            max_discarded,
        })
    }
}

fn initial_state(h: &LatticeHamiltonian, settings: &DmrgSettings) -> Result<MatrixProductState> {
    match settings.initial {
        InitialState::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
            MatrixProductState::random(
                h.length,
                h.d,
                settings.initial_bond.min(settings.trunc.m_max),
                settings.trunc,
                &mut rng,
            )
        }
        InitialState::Product(k) => mps::product_state(h.length, h.d, k, settings.trunc),
    }
}

/// Variational ground state of the truncated lattice Hamiltonian.
pub fn ground_state(h: &LatticeHamiltonian, settings: &DmrgSettings) -> Result<DmrgResult> {
    settings.validate()?;
    let psi = initial_state(h, settings)?;
    Engine::new(h, *settings, None).run(psi)
}

/// `<psi|H|psi> / <psi|psi>` by block contraction.
pub fn energy(h: &LatticeHamiltonian, psi: &MatrixProductState) -> Result<f64> {
    if psi.len() != h.length || psi.d() != h.d {
        return Err(Error::DimensionMismatch {
            expected: h.length * h.d,
            found: psi.len() * psi.d(),
        });
    }
    let terms = Terms::new(h);
    let one = || Mat::from_fn(1, 1, |_, _| ONE);
    let (mut e_id, mut e_y, mut e_h) = (one(), Mat::<C64>::zeros(1, 1), Mat::<C64>::zeros(1, 1));
    for j in 0..h.length {
        let t = psi.tensor(j);
        let mut next_h = mps::transfer(e_h.as_ref(), t, t, None);
        next_h += mps::transfer(e_id.as_ref(), t, t, Some(terms.site[j].as_ref()));
        next_h -= mps::transfer(e_y.as_ref(), t, t, Some(terms.y.as_ref()));
        e_y = mps::transfer(e_id.as_ref(), t, t, Some(terms.y.as_ref()));
        e_id = mps::transfer(e_id.as_ref(), t, t, None);
        e_h = next_h;
    }
    Ok(e_h[(0, 0)].re / e_id[(0, 0)].re)
}

/// First excitation energy above `ground` from the penalized problem
/// `H + w |ground><ground|`. A candidate overlapping the ground state by more
/// than 0.1 triggers one retry with ten times the weight.
pub fn first_gap(h: &LatticeHamiltonian, ground: &DmrgResult, settings: &DmrgSettings) -> Result<GapResult> {
    settings.validate()?;
    let mut weight = settings.penalty_weight.unwrap_or(1.0);
    let mut g = ground.psi.clone();
    g.normalize();
    for attempt in 0..2 {
        let mut s = *settings;
        s.initial = InitialState::Random;
        s.seed = settings.seed.wrapping_add(0x9e37_79b9 + attempt);
        let psi = initial_state(h, &s)?;
        let projector = Projector::new(&g, weight, h.length);
        let res = Engine::new(h, s, Some(projector)).run(psi)?;
        let ov = mps::overlap(&res.psi, &g).norm() / res.psi.norm();
        let e1 = energy(h, &res.psi)?;
        if ov <= 0.1 {
            return Ok(GapResult {
                gap: e1 - ground.energy,
                excited_energy: e1,
                ground_energy: ground.energy,
                overlap: ov,
                penalty_weight: weight,
                converged: res.converged,
                excited: res.psi,
            });
        }
        weight *= 10.0;
    }
    Err(Error::NumericalConsistency(format!(
        "excited state keeps overlapping the ground state (penalty up to {weight})"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::local_solver::{self, ion_chain_g, LocalHamiltonianSpec};
    use crate::model::{assemble, LatticeSpec, ModelParams};
    use crate::oracle;

    fn lattice_h(length: usize, d: usize, omega0: f64, eps: f64) -> LatticeHamiltonian {
        let spec = LocalHamiltonianSpec::new(0.1, ion_chain_g(), omega0, eps, d);
        let ops = local_solver::site_operators(&local_solver::solve_local(&spec, d).unwrap());
        let lat = LatticeSpec::new(
            length,
            ModelParams {
                hbar: 0.1,
                g: ion_chain_g(),
                omega0,
            },
        )
        .unwrap();
        assemble(&lat, &ops, eps).unwrap()
    }

    fn exact_settings() -> DmrgSettings {
        DmrgSettings {
            trunc: TruncationPolicy::new(64, 1e-14).unwrap(),
            energy_tol: 1e-12,
            lanczos_tol: 1e-12,
            ..Default::default()
        }
    }

    #[test]
    fn energy_helper_matches_dense_expectation() {
        let h = lattice_h(4, 3, 9.0, 0.2);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let psi = MatrixProductState::random(4, 3, 9, TruncationPolicy::default(), &mut rng).unwrap();
        let dense = oracle::DenseState {
            amplitudes: psi.to_dense().unwrap(),
            length: 4,
            d: 3,
        };
        let e_dense = oracle::dense_hamiltonian(&h).unwrap().expectation(&dense);
        assert!((energy(&h, &psi).unwrap() - e_dense).abs() < 1e-12);
    }

    #[test]
    fn ground_energy_matches_dense() {
        for eps_tilde in [0.05, -0.05] {
            let h = lattice_h(4, 3, 9.0, eps_tilde);
            let (e_ref, _) = oracle::dense_ground(&h).unwrap();
            let res = ground_state(&h, &exact_settings()).unwrap();
            assert!(res.converged);
            assert!((res.energy - e_ref).abs() < 1e-9, "{} vs {}", res.energy, e_ref);
            assert!(res.energy >= e_ref - 1e-12);
        }
    }

    #[test]
    fn gap_matches_dense() {
        let h = lattice_h(4, 3, 9.0, 0.1);
        let levels = oracle::dense_lowest(&h, 2).unwrap();
        let g = ground_state(&h, &exact_settings()).unwrap();
        let gap = first_gap(&h, &g, &exact_settings()).unwrap();
        assert!((gap.gap - (levels[1] - levels[0])).abs() < 1e-7, "{} vs {}", gap.gap, levels[1] - levels[0]);
    }
}
