use faer::Mat;
use kz_phi4::linalg::{self, kron};
use kz_phi4::local_solver::{
    build_representation, ion_chain_g, site_operators, solve_local, solve_local_complete, LocalHamiltonianSpec,
};
use kz_phi4::model::{self, LatticeSpec, ModelParams};
use kz_phi4::oracle;
use proptest::prelude::*;

fn params(omega0: f64) -> ModelParams {
    ModelParams {
        hbar: 0.1,
        g: ion_chain_g(),
        omega0,
    }
}

fn hamiltonian(length: usize, omega0: f64, eps_tilde: f64, d: usize) -> model::LatticeHamiltonian {
    let lattice = LatticeSpec::new(length, params(omega0)).unwrap();
    let spec = LocalHamiltonianSpec::new(0.1, ion_chain_g(), omega0, eps_tilde, d);
    let ops = site_operators(&solve_local(&spec, d).unwrap());
    model::assemble(&lattice, &ops, eps_tilde).unwrap()
}

#[test]
fn every_term_is_hermitian() {
    let h = hamiltonian(6, 9.0, -0.2, 6);
    for m in h.site_terms.iter().chain(&h.bond_terms) {
        assert!(linalg::max_abs_diff(m.as_ref(), m.transpose()) < 1e-12);
    }
}

#[test]
fn commutes_with_global_parity() {
    let h = hamiltonian(4, 9.0, -0.4, 4);
    let dense = oracle::dense_hamiltonian(&h).unwrap().to_matrix().unwrap();
    let p1 = h.ops.parity();
    let p2 = kron(p1.as_ref(), p1.as_ref());
    let p = kron(p2.as_ref(), p2.as_ref());
    let comm = &dense * &p - &p * &dense;
    let worst = (0..comm.nrows())
        .flat_map(|i| (0..comm.ncols()).map(move |j| (i, j)))
        .map(|(i, j)| comm[(i, j)].abs())
        .fold(0.0, f64::max);
    assert!(worst < 1e-12, "{worst}");
}

#[test]
fn untruncated_two_site_spectrum_matches_direct_construction() {
    let (omega0, eps_tilde, n) = (9.0, -0.3, 12);
    let mut spec = LocalHamiltonianSpec::new(0.1, ion_chain_g(), omega0, eps_tilde, 3);
    spec.n_rep = n;
    let ops = site_operators(&solve_local_complete(&spec).unwrap());
    let lattice = LatticeSpec::new(2, params(omega0)).unwrap();
    let h = model::assemble(&lattice, &ops, eps_tilde).unwrap();
    let assembled = oracle::dense_hamiltonian(&h).unwrap().to_matrix().unwrap();

    let rep = build_representation(&spec).unwrap();
    let r = omega0 * eps_tilde;
    let local = Mat::from_fn(n, n, |i, j| {
        0.5 * (rep.pi2[(i, j)] + r * rep.y2[(i, j)] + 2.0 * spec.g * rep.y4[(i, j)]) + 0.5 * rep.y2[(i, j)]
    });
    let id = linalg::identity(n);
    let direct = kron(local.as_ref(), id.as_ref()) + kron(id.as_ref(), local.as_ref())
        - kron(rep.y.as_ref(), rep.y.as_ref());
    let a = linalg::sym_eigenvalues(assembled.as_ref()).unwrap();
    let b = linalg::sym_eigenvalues(direct.as_ref()).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() < 1e-10, "{x} vs {y}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn schedule_covers_the_interval(tau in 0.05f64..200.0, frac in 0.001f64..1.0, omega0 in 0.5f64..40.0) {
        let centre = params(omega0).critical_field(model::C_PRIME);
        let s = model::schedule(tau, tau * frac, centre).unwrap();
        let total: f64 = s.plateaus.iter().map(|p| p.interval).sum();
        prop_assert!((total - tau).abs() <= 1e-9 * tau);
        prop_assert_eq!(s.plateaus.len(), s.steps + 1);
        prop_assert_eq!(s.plateaus[0].eps, -0.5);
        prop_assert_eq!(s.plateaus[s.steps].eps, 0.5);
        prop_assert!(s.dt <= tau * frac * (1.0 + 1e-12));
        let first = s.plateaus[0].eps_tilde;
        let last = s.plateaus[s.steps].eps_tilde;
        // the physical sweep of Omega0 * eps_tilde spans exactly Omega0
        prop_assert!((omega0 * (first - last) - omega0).abs() < 1e-9 * omega0);
    }
}
