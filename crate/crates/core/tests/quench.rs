use kz_phi4::local_solver::ion_chain_g;
use kz_phi4::model::{self, LatticeSpec, ModelParams};
use kz_phi4::mps::{checkpoint, TruncationPolicy};
use kz_phi4::oracle::{self, DenseState, EvolveMethod};
use kz_phi4::quench::{self, BasisChain, QuenchRun, RunStatus};

fn lattice(length: usize, omega0: f64) -> LatticeSpec {
    LatticeSpec::new(
        length,
        ModelParams {
            hbar: 0.1,
            g: ion_chain_g(),
            omega0,
        },
    )
    .unwrap()
}

fn tight(mut run: QuenchRun) -> QuenchRun {
    run.trunc = TruncationPolicy::new(256, 1e-14).unwrap();
    run.dmrg.trunc = run.trunc;
    run.dmrg.energy_tol = 1e-13;
    run.dmrg.lanczos_tol = 1e-13;
    run
}

fn dense_of(psi: &kz_phi4::mps::MatrixProductState) -> DenseState {
    DenseState {
        amplitudes: psi.to_dense().unwrap(),
        length: psi.len(),
        d: psi.d(),
    }
}

#[test]
fn matches_dense_plateau_protocol() {
    let run = tight(QuenchRun::new(lattice(4, 9.0), 2.0, 0.05, 4));
    let res = quench::run(&run).unwrap();
    let sched = run.schedule().unwrap();
    let chain = BasisChain::build(&run.lattice.model, 4, None, &sched).unwrap();
    let dense = oracle::dense_quench(&run.lattice, &chain.ops, &chain.u, &sched, EvolveMethod::Exact).unwrap();
    let fid = dense_of(&res.final_state).fidelity(&dense);
    assert!(fid > 1.0 - 1e-8, "fidelity {fid}");
    let dense_loss = 1.0 - dense.norm().powi(2);
    assert!((res.summary.norm_loss_total - dense_loss).abs() < 1e-6 * dense_loss);
}

#[test]
fn sudden_quench_energy_matches_dense() {
    let run = tight(QuenchRun::new(lattice(4, 9.0), 0.02, 0.02, 4));
    let res = quench::run(&run).unwrap();
    assert_eq!(res.summary.steps, 1);
    let sched = run.schedule().unwrap();
    let chain = BasisChain::build(&run.lattice.model, 4, None, &sched).unwrap();
    let mut dense = oracle::dense_quench(&run.lattice, &chain.ops, &chain.u, &sched, EvolveMethod::Exact).unwrap();
    let n = dense.norm();
    dense.amplitudes.iter_mut().for_each(|a| *a /= n);
    let h_final = model::assemble(&run.lattice, &chain.ops[1], sched.plateaus[1].eps_tilde).unwrap();
    let (e0, _) = oracle::dense_ground(&h_final).unwrap();
    let e = oracle::dense_hamiltonian(&h_final).unwrap().expectation(&dense);
    assert!((res.summary.e_exc - (e - e0)).abs() < 1e-8);
    assert!(res.summary.e_exc > 1e-3);
}

#[test]
fn slow_ramp_is_adiabatic() {
    let run = tight(QuenchRun::new(lattice(4, 9.0), 200.0, 0.2, 4));
    let res = quench::run(&run).unwrap();
    let sched = run.schedule().unwrap();
    let chain = BasisChain::build(&run.lattice.model, 4, None, &sched).unwrap();
    let h_final = model::assemble(&run.lattice, &chain.ops[sched.steps], sched.plateaus[sched.steps].eps_tilde).unwrap();
    let (_, g) = oracle::dense_ground(&h_final).unwrap();
    let fid = dense_of(&res.final_state).fidelity(&g).powi(2);
    assert!(fid >= 0.99, "fidelity {fid}");
    assert!(res.summary.e_exc < 1e-2);
}

#[test]
fn complete_basis_has_no_norm_loss() {
    let mut run = tight(QuenchRun::new(lattice(4, 9.0), 1.0, 0.1, 6));
    run.n_rep = Some(6);
    let res = quench::run(&run).unwrap();
    assert!(res.summary.norm_loss_total < 1e-12, "{}", res.summary.norm_loss_total);
    assert_eq!(res.summary.status, RunStatus::Valid);
}

fn small_run(length: usize, tau_q: f64) -> QuenchRun {
    let mut run = QuenchRun::new(lattice(length, 1.15), tau_q, 0.1, 8);
    run.trunc = TruncationPolicy::new(16, 1e-10).unwrap();
    run.dmrg.trunc = run.trunc;
    run
}

#[test]
fn identical_runs_are_bit_identical() {
    let a = quench::run(&small_run(8, 1.0)).unwrap().summary;
    let b = quench::run(&small_run(8, 1.0)).unwrap().summary;
    assert_eq!(a.without_timings(), b.without_timings());
    assert!(a.xi.unwrap() >= 0.0);
    assert!(a.deviation.iter().all(|&x| x >= 0.0));
    let p = a.profile.as_ref().unwrap();
    assert_eq!(p.bulk_window, (2, 6));
    assert_eq!(p.l_max(), 3);
}

#[test]
fn checkpoints_carry_their_basis_tag() {
    let dir = std::env::temp_dir().join(format!("kz_ckpt_{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let mut run = small_run(8, 1.0);
    run.checkpoint_dir = Some(dir.clone());
    let res = quench::run(&run).unwrap();
    let sched = run.schedule().unwrap();
    let mut wanted: Vec<usize> = run.checkpoints.iter().map(|&e| sched.nearest_plateau(e)).collect();
    wanted.dedup();
    let got: Vec<usize> = res.summary.checkpoints.iter().map(|c| c.plateau).collect();
    assert_eq!(got, wanted);
    for c in &res.summary.checkpoints {
        let psi = checkpoint::load(c.file.as_ref().unwrap()).unwrap();
        assert_eq!(psi.eps_tilde.to_bits(), sched.plateaus[c.plateau].eps_tilde.to_bits());
        assert!((psi.time - c.time).abs() < 1e-12);
    }
    let last = res.summary.checkpoints.last().unwrap();
    assert_eq!(last.plateau, sched.steps);
    assert!((last.energy - res.summary.e_final).abs() < 1e-10);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn plain_and_fused_stepping_agree() {
    let mut a = tight(QuenchRun::new(lattice(8, 1.15), 1.0, 0.1, 4));
    a.checkpoints = vec![];
    let mut b = a.clone();
    b.checkpoint_every = 1;
    let ra = quench::run(&a).unwrap().summary;
    let rb = quench::run(&b).unwrap().summary;
    assert!((ra.e_final - rb.e_final).abs() < 1e-9);
    assert!((ra.xi.unwrap() - rb.xi.unwrap()).abs() < 1e-8);
    assert_eq!(rb.checkpoints.len(), rb.steps);
}

#[test]
fn sweep_records_and_size_average() {
    let runs = vec![small_run(8, 1.0), small_run(8, 2.0), small_run(10, 1.0), small_run(10, 2.0)];
    let out = quench::sweep(&runs, 1);
    assert_eq!(out.results.len(), 4);
    let sums: Vec<_> = out.results.iter().map(|r| r.as_ref().unwrap().summary.clone()).collect();
    assert_eq!(out.averaged.len(), 2);
    let p = &out.averaged[0];
    assert_eq!(p.tau_q, 1.0);
    assert_eq!(p.lengths, vec![8, 10]);
    assert!((p.xi - 0.5 * (sums[0].xi.unwrap() + sums[2].xi.unwrap())).abs() < 1e-15);
    let solo = quench::run(&runs[3]).unwrap().summary;
    assert_eq!(solo.without_timings(), sums[3].without_timings());
}

#[test]
fn failing_run_does_not_stop_sweep() {
    let mut bad = small_run(8, 1.0);
    bad.dt = 5.0;
    let out = quench::sweep(&[bad, small_run(8, 0.5)], 1);
    assert!(out.results[0].is_err());
    assert!(out.results[1].is_ok());
}

#[test]
fn excitation_energy_falls_with_tau() {
    let e: Vec<f64> = [1.0, 4.0, 16.0]
        .iter()
        .map(|&t| quench::run(&tight(QuenchRun::new(lattice(4, 9.0), t, 0.1, 4))).unwrap().summary.e_exc)
        .collect();
    assert!(e[0] > e[1] && e[1] > e[2], "{e:?}");
}
