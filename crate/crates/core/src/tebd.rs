//! Real-time evolution at fixed control field by a fourth-order Suzuki-Trotter
//! product of even/odd bond layers.

use std::collections::HashMap;

use faer::{Mat, MatRef};

use crate::error::{Error, Result};
use crate::linalg::{self, C64};
use crate::model::{BondClass, LatticeHamiltonian};
use crate::mps::{Direction, MatrixProductState};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct St4Coefficients {
    pub c1: f64,
    pub c2: f64,
    pub d1: f64,
    pub d2: f64,
}

pub fn st4_coefficients() -> St4Coefficients {
    let k = 2f64.cbrt();
    let den = 2.0 - k;
    St4Coefficients {
        c1: 1.0 / (2.0 * den),
        c2: (1.0 - k) / (2.0 * den),
        d1: 1.0 / den,
        d2: -k / den,
    }
}

/// Bonds `(0,1), (2,3), ...` are group `A`; `(1,2), (3,4), ...` are group `B`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Group {
    A,
    B,
}

impl Group {
    pub fn bonds(self, length: usize) -> impl DoubleEndedIterator<Item = usize> {
        let start = match self {
            Group::A => 0,
            Group::B => 1,
        };
        (start..length.saturating_sub(1)).step_by(2)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct St4Schedule {
    pub layers: [(Group, f64); 7],
    pub dt: f64,
}

impl St4Schedule {
    pub fn new(dt: f64) -> Self {
        let St4Coefficients { c1, c2, d1, d2 } = st4_coefficients();
        Self {
            layers: [
                (Group::A, c1),
                (Group::B, d1),
                (Group::A, c2),
                (Group::B, d2),
                (Group::A, c2),
                (Group::B, d1),
                (Group::A, c1),
            ],
            dt,
        }
    }
}

/// One gate per bond class present in a group.
#[derive(Clone, Debug)]
pub struct GateLayer {
    pub group: Group,
    pub gates: Vec<(BondClass, Mat<C64>)>,
}

impl GateLayer {
    pub fn gate(&self, class: BondClass) -> Result<MatRef<'_, C64>> {
        self.gates
            .iter()
            .find(|(c, _)| *c == class)
            .map(|(_, g)| g.as_ref())
            .ok_or_else(|| Error::Config(format!("no gate for bond class {class:?}")))
    }

    /// The layer `other * self` (apply `self` first). Both must share the group.
    pub fn then(&self, other: &GateLayer) -> Result<GateLayer> {
        if self.group != other.group {
            return Err(Error::Config("cannot fuse layers of different groups".into()));
        }
        let gates = self
            .gates
            .iter()
            .map(|(c, g)| other.gate(*c).map(|o| (*c, o * g)))
            .collect::<Result<_>>()?;
        Ok(GateLayer {
            group: self.group,
            gates,
        })
    }

    /// Follow every gate with the same single-site map on both of its sites.
    pub fn then_sites(&self, u: MatRef<'_, C64>) -> GateLayer {
        let uu = linalg::kron(u, u);
        GateLayer {
            group: self.group,
            gates: self.gates.iter().map(|(c, g)| (*c, &uu * g)).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.gates.first().map_or(0, |(_, g)| g.nrows())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LayerStats {
    pub discarded_weight: f64,
    /// Product of squared-norm changes over the layer's gates.
    pub norm_ratio: f64,
    pub max_bond: usize,
}

/// Eigendecompositions of the folded bond Hamiltonians of one lattice
/// Hamiltonian, with a memo of exponentials keyed by `(class, tau)`.
#[derive(Clone, Debug)]
pub struct BondPropagator {
    pub length: usize,
    pub d: usize,
    pub hbar: f64,
    pub eps_tilde: f64,
    classes: Vec<(BondClass, Vec<f64>, Mat<f64>)>,
    memo: HashMap<(BondClass, u64), Mat<C64>>,
}

impl BondPropagator {
    pub fn new(h: &LatticeHamiltonian) -> Result<Self> {
        let mut classes: Vec<(BondClass, Vec<f64>, Mat<f64>)> = Vec::new();
        for site in 0..h.length - 1 {
            let class = h.bond_class(site);
            if classes.iter().any(|(c, _, _)| *c == class) {
                continue;
            }
            let (vals, vecs) = linalg::sym_eigen(h.folded_bond(site).as_ref())?;
            classes.push((class, vals, vecs));
        }
        Ok(Self {
            length: h.length,
            d: h.d,
            hbar: h.hbar,
            eps_tilde: h.eps_tilde,
            classes,
            memo: HashMap::new(),
        })
    }

    /// `exp(-i tau h_bond / hbar)` for the bond class.
    pub fn gate(&mut self, class: BondClass, tau: f64) -> Result<Mat<C64>> {
        if let Some(g) = self.memo.get(&(class, tau.to_bits())) {
            return Ok(g.clone());
        }
        let (_, vals, vecs) = self
            .classes
            .iter()
            .find(|(c, _, _)| *c == class)
            .ok_or_else(|| Error::Config(format!("no bond of class {class:?}")))?;
        let g = linalg::expm_from_eigen(vals, vecs.as_ref(), C64::new(0.0, -tau / self.hbar));
        self.memo.insert((class, tau.to_bits()), g.clone());
        Ok(g)
    }

    pub fn layer(&mut self, group: Group, tau: f64) -> Result<GateLayer> {
        let mut gates: Vec<(BondClass, Mat<C64>)> = Vec::new();
        for bond in group.bonds(self.length) {
            let class = bond_class(self.length, bond);
            if gates.iter().all(|(c, _)| *c != class) {
                gates.push((class, self.gate(class, tau)?));
            }
        }
        Ok(GateLayer { group, gates })
    }

    /// The seven layers of one fourth-order step of length `dt`.
    pub fn st4_layers(&mut self, dt: f64) -> Result<Vec<GateLayer>> {
        St4Schedule::new(dt)
            .layers
            .iter()
            .map(|&(g, c)| self.layer(g, c * dt))
            .collect()
    }

    pub fn clear_memo(&mut self) {
        self.memo.clear();
    }
}

pub fn bond_class(length: usize, site: usize) -> BondClass {
    let last = length - 2;
    match (site == 0, site == last) {
        (true, true) => BondClass::Whole,
        (true, false) => BondClass::LeftEdge,
        (false, true) => BondClass::RightEdge,
        (false, false) => BondClass::Bulk,
    }
}

/// Sweep direction that moves the center the shorter way to the first bond.
pub fn natural_direction(psi: &MatrixProductState) -> Direction {
    match psi.ortho_center() {
        Some(c) if 2 * c >= psi.len() => Direction::Left,
        _ => Direction::Right,
    }
}

pub fn apply_layer(psi: &mut MatrixProductState, layer: &GateLayer, dir: Direction) -> Result<LayerStats> {
    let d = psi.d();
    if layer.dim() != d * d {
        return Err(Error::DimensionMismatch {
            expected: d * d,
            found: layer.dim(),
        });
    }
    let length = psi.len();
    let mut stats = LayerStats {
        norm_ratio: 1.0,
        ..Default::default()
    };
    let mut run = |bond: usize| -> Result<()> {
        let gate = layer.gate(bond_class(length, bond))?;
        let info = psi.apply_two_site_gate(gate, bond, dir)?;
        stats.discarded_weight += info.discarded_weight;
        stats.norm_ratio *= info.norm_sq;
        stats.max_bond = stats.max_bond.max(info.kept);
        Ok(())
    };
    match dir {
        Direction::Right => layer.group.bonds(length).try_for_each(&mut run)?,
        Direction::Left => layer.group.bonds(length).rev().try_for_each(&mut run)?,
    }
    Ok(stats)
}

/// Apply a list of layers, alternating the sweep direction.
pub fn apply_layers(psi: &mut MatrixProductState, layers: &[GateLayer]) -> Result<LayerStats> {
    let mut total = LayerStats {
        norm_ratio: 1.0,
        ..Default::default()
    };
    for layer in layers {
        let s = apply_layer(psi, layer, natural_direction(psi))?;
        total.discarded_weight += s.discarded_weight;
        total.norm_ratio *= s.norm_ratio;
        total.max_bond = total.max_bond.max(s.max_bond);
    }
    Ok(total)
}

fn check_shapes(psi: &MatrixProductState, prop: &BondPropagator) -> Result<()> {
    if psi.d() != prop.d {
        return Err(Error::DimensionMismatch {
            expected: prop.d,
            found: psi.d(),
        });
    }
    if psi.len() != prop.length {
        return Err(Error::DimensionMismatch {
            expected: prop.length,
            found: psi.len(),
        });
    }
    Ok(())
}

/// One fourth-order step of length `dt` at the propagator's control field.
pub fn evolve_fixed(psi: &mut MatrixProductState, prop: &mut BondPropagator, dt: f64) -> Result<LayerStats> {
    check_shapes(psi, prop)?;
    if dt == 0.0 {
        return Ok(LayerStats {
            norm_ratio: 1.0,
            ..Default::default()
        });
    }
    let layers = prop.st4_layers(dt)?;
    let stats = apply_layers(psi, &layers)?;
    psi.time += dt;
    Ok(stats)
}

/// `steps` consecutive fourth-order steps with the touching half-layers merged.
pub fn evolve_steps(
    psi: &mut MatrixProductState,
    prop: &mut BondPropagator,
    dt: f64,
    steps: usize,
) -> Result<LayerStats> {
    check_shapes(psi, prop)?;
    let mut total = LayerStats {
        norm_ratio: 1.0,
        ..Default::default()
    };
    if steps == 0 || dt == 0.0 {
        return Ok(total);
    }
    let layers = prop.st4_layers(dt)?;
    let c1 = st4_coefficients().c1;
    let joint = prop.layer(Group::A, 2.0 * c1 * dt)?;
    let mut program: Vec<&GateLayer> = Vec::with_capacity(6 * steps + 1);
    program.push(&layers[0]);
    for n in 0..steps {
        program.extend(&layers[1..6]);
        program.push(if n + 1 == steps { &layers[6] } else { &joint });
    }
    for layer in program {
        let s = apply_layer(psi, layer, natural_direction(psi))?;
        total.discarded_weight += s.discarded_weight;
        total.norm_ratio *= s.norm_ratio;
        total.max_bond = total.max_bond.max(s.max_bond);
    }
    psi.time += dt * steps as f64;
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coefficient_values_and_sums() {
        let c = st4_coefficients();
        assert!((c.c1 - 0.675_603_595_979_828_8).abs() < 1e-15);
        assert!((c.d1 - 1.351_207_191_959_657_6).abs() < 1e-15);
        assert!((2.0 * c.c1 + 2.0 * c.c2 - 1.0).abs() < 1e-15);
        assert!((2.0 * c.d1 + c.d2 - 1.0).abs() < 1e-15);
        assert!(c.d2 < 0.0);
        let s = St4Schedule::new(0.1);
        let sum = |g: Group| s.layers.iter().filter(|l| l.0 == g).map(|l| l.1).sum::<f64>();
        assert!((sum(Group::A) - 1.0).abs() < 1e-14);
        assert!((sum(Group::B) - 1.0).abs() < 1e-14);
        let pattern: Vec<Group> = s.layers.iter().map(|l| l.0).collect();
        use Group::*;
        assert_eq!(pattern, vec![A, B, A, B, A, B, A]);
    }

    #[test]
    fn groups_partition_bonds() {
        let a: Vec<usize> = Group::A.bonds(6).collect();
        let b: Vec<usize> = Group::B.bonds(6).collect();
        assert_eq!(a, vec![0, 2, 4]);
        assert_eq!(b, vec![1, 3]);
        assert_eq!(Group::B.bonds(2).count(), 0);
    }
}
