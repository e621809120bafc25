use kz_phi4::dmrg;
use kz_phi4::linalg::C64;
use kz_phi4::local_solver::{ion_chain_g, site_operators, solve_local, LocalHamiltonianSpec};
use kz_phi4::model::{self, LatticeHamiltonian, LatticeSpec, ModelParams};
use kz_phi4::mps::{MatrixProductState, TruncationPolicy};
use kz_phi4::oracle::{self, DenseState, EvolveMethod};
use kz_phi4::tebd::{evolve_steps, BondPropagator};

const L: usize = 4;
const D: usize = 4;

fn hamiltonian(eps_tilde: f64) -> LatticeHamiltonian {
    let model = ModelParams {
        hbar: 0.1,
        g: ion_chain_g(),
        omega0: 9.0,
    };
    let lattice = LatticeSpec::new(L, model).unwrap();
    let spec = LocalHamiltonianSpec::new(0.1, ion_chain_g(), 9.0, eps_tilde, D);
    let ops = site_operators(&solve_local(&spec, D).unwrap());
    model::assemble(&lattice, &ops, eps_tilde).unwrap()
}

fn exact_policy() -> TruncationPolicy {
    TruncationPolicy::new(256, 1e-15).unwrap()
}

fn start_state(eps_tilde: f64) -> MatrixProductState {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let v = vec![C64::new(s, 0.0), C64::new(0.0, s), C64::new(0.0, 0.0), C64::new(0.0, 0.0)];
    let mut psi = MatrixProductState::from_site_vectors(&vec![v; L], exact_policy()).unwrap();
    psi.eps_tilde = eps_tilde;
    psi
}

fn dense(psi: &MatrixProductState) -> DenseState {
    DenseState {
        amplitudes: psi.to_dense().unwrap(),
        length: psi.len(),
        d: psi.d(),
    }
}

fn evolve(h: &LatticeHamiltonian, dt: f64, t: f64) -> MatrixProductState {
    let mut psi = start_state(h.eps_tilde);
    let mut prop = BondPropagator::new(h).unwrap();
    evolve_steps(&mut psi, &mut prop, dt, (t / dt).round() as usize).unwrap();
    psi
}

fn error_norm(a: &DenseState, b: &DenseState) -> f64 {
    a.amplitudes
        .iter()
        .zip(&b.amplitudes)
        .map(|(x, y)| (x - y).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

#[test]
fn matches_dense_evolution() {
    let h = hamiltonian(-0.3);
    let reference = oracle::dense_evolve(&dense(&start_state(h.eps_tilde)), &h, 1.0, EvolveMethod::Exact).unwrap();
    let psi = evolve(&h, 1e-3, 1.0);
    assert!(dense(&psi).fidelity(&reference) >= 1.0 - 1e-6);
    // roundoff budget of 1e-12 per step
    assert!((psi.norm_ledger - 1.0).abs() < 1e-12 * 1000.0, "{}", psi.norm_ledger - 1.0);
    let one = evolve(&h, 1e-3, 1e-3);
    assert!((one.norm_ledger - 1.0).abs() < 1e-12);
    assert!(psi.discarded_weight < 1e-12);
}

#[test]
fn error_is_fourth_order() {
    let h = hamiltonian(-0.3);
    let reference = oracle::dense_evolve(&dense(&start_state(h.eps_tilde)), &h, 1.0, EvolveMethod::Exact).unwrap();
    let coarse = error_norm(&dense(&evolve(&h, 0.1, 1.0)), &reference);
    let fine = error_norm(&dense(&evolve(&h, 0.05, 1.0)), &reference);
    let ratio = coarse / fine;
    assert!((16.0 * 0.7..=16.0 * 1.3).contains(&ratio), "ratio {ratio}");
}

#[test]
fn energy_is_conserved() {
    let h = hamiltonian(0.2);
    let before = dmrg::energy(&h, &start_state(h.eps_tilde)).unwrap();
    let after = dmrg::energy(&h, &evolve(&h, 1e-3, 1.0)).unwrap();
    assert!((after - before).abs() < 1e-8, "{before} -> {after}");
}

#[test]
fn phase_scales_as_one_over_hbar() {
    let h = hamiltonian(-0.3);
    let (e0, g) = oracle::dense_ground(&h).unwrap();
    let phase_for = |hbar: f64| {
        let mut hh = h.clone();
        hh.hbar = hbar;
        let mut psi = MatrixProductState::from_dense(&g.amplitudes, L, D, exact_policy()).unwrap();
        psi.eps_tilde = h.eps_tilde;
        let start = psi.clone();
        let mut prop = BondPropagator::new(&hh).unwrap();
        evolve_steps(&mut psi, &mut prop, 0.01, 10).unwrap();
        kz_phi4::mps::overlap(&start, &psi).arg()
    };
    let p1 = phase_for(0.1);
    let p2 = phase_for(0.2);
    // t = hbar = 0.1, so the phase is -E0
    assert!((p1 + e0).abs() < 1e-9, "{p1} vs {}", -e0);
    assert!((p2 - 0.5 * p1).abs() < 1e-9, "{p2} vs {p1}");
}
