use kz_phi4::dmrg::{self, DmrgSettings, InitialState};
use kz_phi4::linalg;
use kz_phi4::local_solver::{ion_chain_g, site_operators, solve_local, LocalHamiltonianSpec};
use kz_phi4::model::{self, LatticeHamiltonian, LatticeSpec, ModelParams};
use kz_phi4::mps::TruncationPolicy;
use kz_phi4::oracle;

fn hamiltonian(length: usize, d: usize, omega0: f64, eps: f64) -> LatticeHamiltonian {
    let model = ModelParams {
        hbar: 0.1,
        g: ion_chain_g(),
        omega0,
    };
    let eps_tilde = model.critical_field(model::C_PRIME) - eps;
    let lattice = LatticeSpec::new(length, model).unwrap();
    let spec = LocalHamiltonianSpec::new(0.1, ion_chain_g(), omega0, eps_tilde, d);
    let ops = site_operators(&solve_local(&spec, d).unwrap());
    model::assemble(&lattice, &ops, eps_tilde).unwrap()
}

fn settings(m: usize) -> DmrgSettings {
    DmrgSettings {
        trunc: TruncationPolicy::new(m, 1e-12).unwrap(),
        energy_tol: 1e-11,
        lanczos_tol: 1e-12,
        initial: InitialState::Random,
        seed: 7,
        ..Default::default()
    }
}

#[test]
fn matches_dense_ground_energy_on_both_sides() {
    for eps in [-0.5, 0.5] {
        let h = hamiltonian(4, 4, 9.0, eps);
        let (e_ref, _) = oracle::dense_ground(&h).unwrap();
        let res = dmrg::ground_state(&h, &settings(64)).unwrap();
        assert!((res.energy - e_ref).abs() < 1e-8, "eps={eps}: {} vs {e_ref}", res.energy);
    }
}

#[test]
fn sweeps_never_raise_the_energy() {
    let h = hamiltonian(12, 6, 9.0, 0.3);
    let res = dmrg::ground_state(&h, &settings(24)).unwrap();
    assert!(res.history.len() >= 2);
    for w in res.history.windows(2) {
        assert!(w[1] <= w[0] + 1e-12, "{w:?}");
    }
}

#[test]
fn disordered_ground_state_has_definite_parity() {
    let h = hamiltonian(12, 6, 9.0, -0.5);
    let res = dmrg::ground_state(&h, &settings(24)).unwrap();
    let p = linalg::to_complex(h.ops.parity().as_ref());
    let ops: Vec<_> = (0..12).map(|j| (j, p.as_ref())).collect();
    let parity = res.psi.expect_product(&ops).unwrap();
    assert!((parity.norm() - 1.0).abs() < 1e-6, "{parity}");
}

#[test]
fn doubling_the_bond_leaves_the_energy() {
    let h = hamiltonian(12, 6, 9.0, -0.2);
    let a = dmrg::ground_state(&h, &settings(16)).unwrap();
    let b = dmrg::ground_state(&h, &settings(32)).unwrap();
    assert!(a.converged && b.converged);
    assert!((a.energy - b.energy).abs() < 10.0 * 1e-11, "{} vs {}", a.energy, b.energy);
}
