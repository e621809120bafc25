use kz_phi4::dmrg::{self, DmrgSettings};
use kz_phi4::linalg;
use kz_phi4::local_solver::{ion_chain_g, site_operators, solve_local, LocalHamiltonianSpec};
use kz_phi4::model::{self, LatticeSpec, ModelParams};
use kz_phi4::mps::TruncationPolicy;
use kz_phi4::observables::{correlation_length, correlator_profile, CorrelatorProfile};
use proptest::prelude::*;

fn profile(c: Vec<f64>) -> CorrelatorProfile {
    CorrelatorProfile {
        site_spread: vec![0.0; c.len()],
        c_by_distance: c,
        bulk_window: (0, 0),
        eps_tilde: 0.0,
    }
}

#[test]
fn trivial_profiles() {
    assert_eq!(correlation_length(&profile(vec![0.3, 0.0, 0.0])).unwrap().xi, 0.0);
    assert_eq!(correlation_length(&profile(vec![0.0, 0.3, 0.0])).unwrap().xi, 1.0);
    assert!(correlation_length(&profile(vec![0.0, 0.0])).is_err());
}

proptest! {
    #[test]
    fn xi_ignores_overall_scale(c in prop::collection::vec(1e-6f64..1.0, 1..20), k in 1e-3f64..1e3) {
        let a = correlation_length(&profile(c.clone())).unwrap().xi;
        let b = correlation_length(&profile(c.iter().map(|v| v * k).collect())).unwrap().xi;
        prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
    }
}

#[test]
fn ground_state_profile() {
    let (length, d) = (24, 6);
    let model = ModelParams {
        hbar: 0.1,
        g: ion_chain_g(),
        omega0: 9.0,
    };
    let eps_tilde = model.critical_field(model::C_PRIME) + 0.3;
    let lattice = LatticeSpec::new(length, model).unwrap();
    let spec = LocalHamiltonianSpec::new(0.1, ion_chain_g(), 9.0, eps_tilde, d);
    let ops = site_operators(&solve_local(&spec, d).unwrap());
    let h = model::assemble(&lattice, &ops, eps_tilde).unwrap();
    let settings = DmrgSettings {
        trunc: TruncationPolicy::new(32, 1e-12).unwrap(),
        energy_tol: 1e-11,
        ..Default::default()
    };
    let mut psi = dmrg::ground_state(&h, &settings).unwrap().psi;
    psi.eps_tilde = eps_tilde;
    let p = correlator_profile(&psi, &ops, &lattice).unwrap();
    assert_eq!(p.bulk_window, (6, 18));
    assert!(p.c_by_distance[0] > 0.0);

    // same profile with the window moved one site to the right
    let y = linalg::to_complex(ops.y().as_ref());
    let (start, end) = (7, 19);
    let mut shifted = vec![0.0; p.l_max()];
    let mut count = vec![0usize; p.l_max()];
    for j in start..end - 1 {
        for (k, v) in psi.correlation_row(y.as_ref(), j, y.as_ref(), end - 1).unwrap().iter().enumerate() {
            shifted[k] += v.re;
            count[k] += 1;
        }
    }
    for l in 0..p.l_max() {
        let moved = shifted[l] / count[l] as f64;
        assert!((moved - p.c_by_distance[l]).abs() <= p.site_spread[l] + 1e-10, "l={}: {moved} vs {} spread {}", l + 1, p.c_by_distance[l], p.site_spread[l]);
    }
}
