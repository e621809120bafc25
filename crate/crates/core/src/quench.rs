//! Linear-ramp quench: DMRG ground state on the first plateau, then fourth-order
//! Trotter evolution on each plateau followed by the per-site basis change to
//! the next one.
//!
//! The last half-layer of a plateau, the basis change and the first half-layer
//! of the next plateau act on the same bonds and are applied as one gate,
//! except at checkpoints where the state is materialized in between.

use std::collections::{BTreeMap, HashMap};
use std::path::PathBuf;
use std::sync::Arc;
use web_time::Instant;

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::analysis;
use crate::dmrg::{self, DmrgSettings, InitialState};
use crate::error::{Error, Result};
use crate::linalg::{self, C64};
use crate::local_solver::{self, LocalEigensystem, LocalHamiltonianSpec, LocalSolver, SiteOperators};
use crate::model::{self, LatticeHamiltonian, LatticeSpec, ModelParams, QuenchSchedule};
use crate::mps::{checkpoint, MatrixProductState, TruncationPolicy};
use crate::observables::{self, CorrelatorProfile};
use crate::tebd::{self, BondPropagator, GateLayer, LayerStats};

pub const NORM_LOSS_ACCEPT: f64 = 1e-6;
pub const NORM_LOSS_INVALID: f64 = 1e-3;
pub const DISCARD_ACCEPT: f64 = 1e-4;

fn local_spec(model: &ModelParams, eps_tilde: f64, d: usize, n_rep: Option<usize>) -> LocalHamiltonianSpec {
    let mut spec = LocalHamiltonianSpec::new(model.hbar, model.g, model.omega0, eps_tilde, d);
    if let Some(n) = n_rep {
        spec.n_rep = n;
    }
    spec
}

/// Site operators on every plateau and the basis changes between them.
#[derive(Clone, Debug)]
pub struct BasisChain {
    pub model: ModelParams,
    pub d: usize,
    pub schedule: QuenchSchedule,
    pub ops: Vec<SiteOperators>,
    /// `u[k]` maps plateau `k` amplitudes to plateau `k + 1`.
    pub u: Vec<Mat<f64>>,
    pub max_norm_bound: f64,
    pub min_singular: f64,
    /// Largest level shift seen by the representation-doubling check.
    pub convergence_shift: f64,
}

impl BasisChain {
    /// `n_rep = Some(d)` keeps the complete spectrum of the representation and
    /// skips the doubling check.
    pub fn build(model: &ModelParams, d: usize, n_rep: Option<usize>, schedule: &QuenchSchedule) -> Result<Self> {
        model.validate()?;
        let first = schedule.plateaus[0].eps_tilde;
        let spec = local_spec(model, first, d, n_rep);
        let complete = n_rep == Some(d);
        if !complete {
            spec.validate_for(d)?;
        }
        let solver = LocalSolver::new(&spec)?;
        let convergence_shift = if complete {
            0.0
        } else {
            check_points(schedule)
                .iter()
                .map(|&e| solver.check_convergence(e, d))
                .try_fold(0.0_f64, |m, s| s.map(|s| m.max(s)))?
        };
        let mut prev = solver.solve(first, d)?;
        let mut ops = Vec::with_capacity(schedule.plateaus.len());
        let mut u = Vec::with_capacity(schedule.steps);
        ops.push(local_solver::site_operators(&prev));
        let (mut max_norm_bound, mut min_singular) = (0.0_f64, f64::INFINITY);
        for p in &schedule.plateaus[1..] {
            let mut next = solver.solve(p.eps_tilde, d)?;
            next.align_to(&prev)?;
            let b = local_solver::basis_change_matrix(&prev, &next)?;
            max_norm_bound = max_norm_bound.max(b.norm_bound);
            min_singular = min_singular.min(b.min_singular);
            u.push(b.u);
            ops.push(local_solver::site_operators(&next));
            prev = next;
        }
        Ok(Self {
            model: *model,
            d,
            schedule: schedule.clone(),
            ops,
            u,
            max_norm_bound,
            min_singular,
            convergence_shift,
        })
    }
}

fn check_points(schedule: &QuenchSchedule) -> Vec<f64> {
    let p = &schedule.plateaus;
    vec![p[0].eps_tilde, p[p.len() / 2].eps_tilde, p[p.len() - 1].eps_tilde]
}

/// Streaming pass over the basis changes of a ramp for a single oscillator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainScan {
    pub plateaus: usize,
    pub max_norm_bound: f64,
    pub min_singular: f64,
    /// `1 - |v|^2` for one site started in its local ground state and carried
    /// through every plateau (phases) and basis change.
    pub single_site_norm_loss: f64,
    /// `1 - prod sigma_min^2`, the loss of the worst possible state.
    pub worst_case_norm_loss: f64,
    pub convergence_shift: f64,
}

pub fn scan_chain(model: &ModelParams, d: usize, schedule: &QuenchSchedule) -> Result<ChainScan> {
    model.validate()?;
    let first = schedule.plateaus[0].eps_tilde;
    let spec = local_spec(model, first, d, None);
    spec.validate_for(d)?;
    let solver = LocalSolver::new(&spec)?;
    let convergence_shift = check_points(schedule)
        .iter()
        .map(|&e| solver.check_convergence(e, d))
        .try_fold(0.0_f64, |m, s| s.map(|s| m.max(s)))?;
    let mut prev: LocalEigensystem = solver.solve(first, d)?;
    let mut v: Vec<C64> = (0..d).map(|q| if q == 0 { linalg::ONE } else { linalg::ZERO }).collect();
    let (mut max_norm_bound, mut min_singular) = (0.0_f64, f64::INFINITY);
    let mut log_worst = 0.0_f64;
    let hbar = model.hbar;
    for (k, p) in schedule.plateaus.iter().enumerate() {
        for (q, x) in v.iter_mut().enumerate() {
            *x *= C64::from_polar(1.0, -prev.energies[q] * p.interval / hbar);
        }
        let Some(next_p) = schedule.plateaus.get(k + 1) else {
            break;
        };
        let mut next = solver.solve(next_p.eps_tilde, d)?;
        next.align_to(&prev)?;
        let b = local_solver::basis_change_matrix(&prev, &next)?;
        max_norm_bound = max_norm_bound.max(b.norm_bound);
        min_singular = min_singular.min(b.min_singular);
        log_worst += 2.0 * b.min_singular.ln();
        v = (0..d)
            .map(|i| (0..d).map(|j| v[j] * b.u[(i, j)]).sum())
            .collect();
        prev = next;
    }
    let n2: f64 = v.iter().map(|x| x.norm_sqr()).sum();
    Ok(ChainScan {
        plateaus: schedule.plateaus.len(),
        max_norm_bound,
        min_singular,
        single_site_norm_loss: 1.0 - n2,
        worst_case_norm_loss: -log_worst.exp_m1(),
        convergence_shift,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuenchRun {
    pub lattice: LatticeSpec,
    pub tau_q: f64,
    pub dt: f64,
    pub eps_tilde_c: f64,
    pub d: usize,
    /// Representation size override; `Some(d)` runs without local truncation.
    pub n_rep: Option<usize>,
    pub trunc: TruncationPolicy,
    /// Control values `eps` at which snapshots are taken.
    pub checkpoints: Vec<f64>,
    pub seed: u64,
    pub dmrg: DmrgSettings,
    /// Directory for state files written at checkpoints.
    pub checkpoint_dir: Option<PathBuf>,
    /// Additional snapshot every this many plateaus (0 disables).
    pub checkpoint_every: usize,
}

impl QuenchRun {
    pub fn new(lattice: LatticeSpec, tau_q: f64, dt: f64, d: usize) -> Self {
        let trunc = TruncationPolicy::default();
        Self {
            eps_tilde_c: lattice.model.critical_field(model::C_PRIME),
            checkpoints: default_checkpoints(&lattice.model),
            lattice,
            tau_q,
            dt,
            d,
            n_rep: None,
            trunc,
            seed: 0,
            dmrg: DmrgSettings {
                trunc,
                initial: InitialState::Product(0),
                initial_bond: 4,
                ..Default::default()
            },
            checkpoint_dir: None,
            checkpoint_every: 0,
        }
    }

    pub fn schedule(&self) -> Result<QuenchSchedule> {
        model::schedule(self.tau_q, self.dt, self.eps_tilde_c)
    }

    pub fn validate(&self) -> Result<()> {
        self.lattice.validate()?;
        self.trunc.validate()?;
        self.dmrg.validate()?;
        if self.d < 2 {
            return Err(Error::Config(format!("local dimension must be >= 2, got {}", self.d)));
        }
        if let Some(e) = self.checkpoints.iter().find(|e| !(-0.5..=0.5).contains(*e)) {
            return Err(Error::Config(format!("checkpoint eps = {e} outside the ramp")));
        }
        self.schedule().map(|_| ())
    }

    fn chain_key(&self) -> ChainKey {
        let m = &self.lattice.model;
        ChainKey([
            m.hbar.to_bits(),
            m.g.to_bits(),
            m.omega0.to_bits(),
            self.tau_q.to_bits(),
            self.dt.to_bits(),
            self.eps_tilde_c.to_bits(),
            self.d as u64,
            self.n_rep.map_or(u64::MAX, |n| n as u64),
        ])
    }
}

/// Snapshots at the ramp start, the crossover width, the critical point and the end.
pub fn default_checkpoints(model: &ModelParams) -> Vec<f64> {
    let w = analysis::ginzburg_width_rg(model.hbar, model.g, model.omega0);
    let mut v = vec![-0.5, 0.0, 0.5];
    if w < 0.5 {
        v.insert(1, -w);
    }
    v
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
struct ChainKey([u64; 8]);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    /// Within the acceptance gates.
    Valid,
    /// Completed but outside the acceptance gates; excluded from fits.
    Flagged,
    /// Norm loss beyond the hard limit.
    Invalid,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointRecord {
    pub plateau: usize,
    pub eps: f64,
    pub eps_tilde: f64,
    pub time: f64,
    pub energy: f64,
    pub nn_correlator: f64,
    pub xi: Option<f64>,
    pub norm_loss: f64,
    pub discarded_weight: f64,
    pub max_bond: usize,
    pub file: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub basis_seconds: f64,
    pub dmrg_seconds: f64,
    pub evolve_seconds: f64,
    pub total_seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuenchSummary {
    pub length: usize,
    pub model: ModelParams,
    pub d: usize,
    pub m_max: usize,
    pub weight_tol: f64,
    pub tau_q: f64,
    pub dt: f64,
    pub steps: usize,
    pub eps_tilde_c: f64,
    pub seed: u64,
    /// Absent for chains shorter than the bulk window allows.
    pub xi: Option<f64>,
    pub xi_abs_fallback: bool,
    pub e_exc: f64,
    pub e_final: f64,
    pub e_ground_final: f64,
    pub e_ground_initial: f64,
    pub profile: Option<CorrelatorProfile>,
    pub deviation: Vec<f64>,
    pub norm_loss_total: f64,
    pub discarded_weight_total: f64,
    pub max_bond: usize,
    pub status: RunStatus,
    pub flags: Vec<String>,
    pub checkpoints: Vec<CheckpointRecord>,
    pub timings: Timings,
}

impl QuenchSummary {
    /// Copy with timings zeroed, for reproducibility comparisons.
    pub fn without_timings(&self) -> Self {
        Self {
            timings: Timings::default(),
            ..self.clone()
        }
    }
}

#[derive(Clone, Debug)]
pub struct QuenchResult {
    pub summary: QuenchSummary,
    pub final_state: MatrixProductState,
    pub final_ground: MatrixProductState,
}

fn merge(total: &mut LayerStats, s: LayerStats) {
    total.discarded_weight += s.discarded_weight;
    total.norm_ratio *= s.norm_ratio;
    total.max_bond = total.max_bond.max(s.max_bond);
}

fn apply(psi: &mut MatrixProductState, layers: &[&GateLayer], stats: &mut LayerStats) -> Result<()> {
    for layer in layers {
        let s = tebd::apply_layer(psi, layer, tebd::natural_direction(psi))?;
        merge(stats, s);
    }
    Ok(())
}

struct Plateau {
    h: LatticeHamiltonian,
    layers: Vec<GateLayer>,
}

fn plateau(run: &QuenchRun, chain: &BasisChain, k: usize) -> Result<Plateau> {
    let p = &chain.schedule.plateaus[k];
    let h = model::assemble(&run.lattice, &chain.ops[k], p.eps_tilde)?;
    let layers = BondPropagator::new(&h)?.st4_layers(p.interval)?;
    Ok(Plateau { h, layers })
}

/// Run one quench on a fresh basis chain.
pub fn run(run: &QuenchRun) -> Result<QuenchResult> {
    run.validate()?;
    let t0 = Instant::now();
    let chain = BasisChain::build(&run.lattice.model, run.d, run.n_rep, &run.schedule()?)?;
    let basis_seconds = t0.elapsed().as_secs_f64();
    let mut res = run_on_chain(run, &chain)?;
    res.summary.timings.basis_seconds = basis_seconds;
    res.summary.timings.total_seconds += basis_seconds;
    Ok(res)
}

/// Run one quench on a precomputed chain matching the run's ramp.
pub fn run_on_chain(run: &QuenchRun, chain: &BasisChain) -> Result<QuenchResult> {
    run.validate()?;
    let t0 = Instant::now();
    let schedule = &chain.schedule;
    if chain.d != run.d
        || chain.model != run.lattice.model
        || schedule.tau_q.to_bits() != run.tau_q.to_bits()
        || schedule.requested_dt.to_bits() != run.dt.to_bits()
        || schedule.eps_tilde_c.to_bits() != run.eps_tilde_c.to_bits()
    {
        return Err(Error::Config("basis chain was built for a different ramp".into()));
    }
    let n = schedule.steps;
    let mut stops: BTreeMap<usize, bool> = run
        .checkpoints
        .iter()
        .map(|&e| (schedule.nearest_plateau(e), true))
        .collect();
    if run.checkpoint_every > 0 {
        for k in (run.checkpoint_every..=n).step_by(run.checkpoint_every) {
            stops.entry(k).or_insert(false);
        }
    }
    let mut settings = run.dmrg;
    settings.seed = run.seed;

    let mut current = plateau(run, chain, 0)?;
    let ground0 = dmrg::ground_state(&current.h, &settings)?;
    if !ground0.converged {
        return Err(Error::NumericalConsistency(format!(
            "initial DMRG not converged after {} sweeps",
            ground0.sweeps
        )));
    }
    let e_ground_initial = ground0.energy;
    let mut psi = ground0.psi;
    psi.policy = run.trunc;
    psi.time = -0.5 * schedule.tau_q;
    let dmrg_start = t0.elapsed().as_secs_f64();

    let mut stats = LayerStats {
        norm_ratio: 1.0,
        ..Default::default()
    };
    let mut records = Vec::new();
    let mut pending: GateLayer = current.layers[0].clone();
    for k in 0..=n {
        let p = schedule.plateaus[k];
        apply(&mut psi, &[&pending], &mut stats)?;
        psi.eps_tilde = p.eps_tilde;
        let mid: Vec<&GateLayer> = current.layers[1..6].iter().collect();
        apply(&mut psi, &mid, &mut stats)?;
        let tail = &current.layers[6];
        psi.time += p.interval;
        let stop = stops.get(&k).copied();
        if k == n || stop.is_some() {
            apply(&mut psi, &[tail], &mut stats)?;
            if let Some(is_named) = stop {
                records.push(snapshot(run, chain, &current.h, &psi, k, is_named)?);
            }
            if k == n {
                break;
            }
            let next = plateau(run, chain, k + 1)?;
            let u = linalg::to_complex(chain.u[k].as_ref());
            psi.apply_all_sites(u.as_ref())?;
            psi.eps_tilde = schedule.plateaus[k + 1].eps_tilde;
            pending = next.layers[0].clone();
            current = next;
        } else {
            let next = plateau(run, chain, k + 1)?;
            let u = linalg::to_complex(chain.u[k].as_ref());
            pending = tail.then_sites(u.as_ref()).then(&next.layers[0])?;
            current = next;
        }
    }
    let evolve_end = t0.elapsed().as_secs_f64();

    let h_final = current.h;
    let ops_final = &chain.ops[n];
    let ground = dmrg::ground_state(&h_final, &settings)?;
    let profile = if run.lattice.length >= 8 {
        Some(observables::correlator_profile(&psi, ops_final, &run.lattice)?)
    } else {
        None
    };
    let xi = profile.as_ref().map(observables::correlation_length).transpose()?;
    let e_final = dmrg::energy(&h_final, &psi)?;
    let mut flags = Vec::new();
    if !ground.converged {
        flags.push("final DMRG not converged".to_string());
    }
    let e_exc = match observables::excitation_energy(&psi, &h_final, ground.energy, settings.energy_tol) {
        Ok(e) => e,
        Err(e) => {
            flags.push(e.to_string());
            e_final - ground.energy
        }
    };
    let deviation = observables::deviation_map(&psi, &ground.psi, ops_final, &run.lattice)?;
    let norm_loss_total = (1.0 - psi.norm_ledger).max(0.0);
    let discarded = psi.discarded_weight;
    let xi_abs_fallback = xi.is_some_and(|x| x.abs_fallback);
    if xi_abs_fallback {
        flags.push("negative correlators, |C_l| used".to_string());
    }
    let status = if norm_loss_total > NORM_LOSS_INVALID {
        flags.push(format!("norm loss {norm_loss_total:.3e} above {NORM_LOSS_INVALID:e}"));
        RunStatus::Invalid
    } else if norm_loss_total >= NORM_LOSS_ACCEPT || discarded >= DISCARD_ACCEPT {
        flags.push(format!(
            "outside acceptance gates: norm loss {norm_loss_total:.3e}, discarded {discarded:.3e}"
        ));
        RunStatus::Flagged
    } else {
        RunStatus::Valid
    };
    let total = t0.elapsed().as_secs_f64();
    let summary = QuenchSummary {
        length: run.lattice.length,
        model: run.lattice.model,
        d: run.d,
        m_max: run.trunc.m_max,
        weight_tol: run.trunc.weight_tol,
        tau_q: run.tau_q,
        dt: schedule.dt,
        steps: n,
        eps_tilde_c: run.eps_tilde_c,
        seed: run.seed,
        xi: xi.map(|x| x.xi),
        xi_abs_fallback,
        e_exc,
        e_final,
        e_ground_final: ground.energy,
        e_ground_initial,
        profile,
        deviation,
        norm_loss_total,
        discarded_weight_total: discarded,
        max_bond: stats.max_bond.max(psi.max_bond()),
        status,
        flags,
        checkpoints: records,
        timings: Timings {
            basis_seconds: 0.0,
            dmrg_seconds: dmrg_start + (total - evolve_end),
            evolve_seconds: evolve_end - dmrg_start,
            total_seconds: total,
        },
    };
    Ok(QuenchResult {
        summary,
        final_state: psi,
        final_ground: ground.psi,
    })
}

fn snapshot(
    run: &QuenchRun,
    chain: &BasisChain,
    h: &LatticeHamiltonian,
    psi: &MatrixProductState,
    k: usize,
    named: bool,
) -> Result<CheckpointRecord> {
    let p = chain.schedule.plateaus[k];
    let ops = &chain.ops[k];
    let y = linalg::to_complex(ops.y().as_ref());
    let mid = run.lattice.length / 2 - 1;
    let nn = psi.expect_two(y.as_ref(), mid, y.as_ref(), mid + 1)?.re;
    let xi = (run.lattice.length >= 8)
        .then(|| observables::correlator_profile(psi, ops, &run.lattice))
        .transpose()
        .ok()
        .flatten()
        .and_then(|pr| observables::correlation_length(&pr).ok())
        .map(|x| x.xi);
    let file = match &run.checkpoint_dir {
        Some(dir) => {
            let tag = if named { "ckpt" } else { "step" };
            let path = dir.join(format!(
                "L{}_tau{}_{}_{:07}.mps",
                run.lattice.length, run.tau_q, tag, k
            ));
            checkpoint::save(psi, &path)?;
            Some(path)
        }
        None => None,
    };
    Ok(CheckpointRecord {
        plateau: k,
        eps: p.eps,
        eps_tilde: p.eps_tilde,
        time: psi.time,
        energy: dmrg::energy(h, psi)?,
        nn_correlator: nn,
        xi,
        norm_loss: 1.0 - psi.norm_ledger,
        discarded_weight: psi.discarded_weight,
        max_bond: psi.max_bond(),
        file,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AveragedPoint {
    pub omega0: f64,
    pub tau_q: f64,
    pub lengths: Vec<usize>,
    pub xi: f64,
    /// Excitation energy per site.
    pub e_exc_density: f64,
}

pub struct SweepOutcome {
    /// One entry per run, in input order.
    pub results: Vec<Result<QuenchResult>>,
    pub averaged: Vec<AveragedPoint>,
}

/// Mean of `xi` and `E_exc / L` over lengths at fixed `(Omega0, tau_q)`,
/// valid runs only.
pub fn size_average(summaries: &[&QuenchSummary]) -> Vec<AveragedPoint> {
    let mut groups: BTreeMap<(u64, u64), Vec<&QuenchSummary>> = BTreeMap::new();
    for s in summaries.iter().filter(|s| s.status == RunStatus::Valid && s.xi.is_some()) {
        groups
            .entry((s.model.omega0.to_bits(), s.tau_q.to_bits()))
            .or_default()
            .push(s);
    }
    let mut out: Vec<AveragedPoint> = groups
        .into_values()
        .map(|g| {
            let n = g.len() as f64;
            AveragedPoint {
                omega0: g[0].model.omega0,
                tau_q: g[0].tau_q,
                lengths: g.iter().map(|s| s.length).collect(),
                xi: g.iter().filter_map(|s| s.xi).sum::<f64>() / n,
                e_exc_density: g.iter().map(|s| s.e_exc / s.length as f64).sum::<f64>() / n,
            }
        })
        .collect();
    out.sort_by(|a, b| a.omega0.total_cmp(&b.omega0).then(a.tau_q.total_cmp(&b.tau_q)));
    out
}

fn build_chains(runs: &[QuenchRun]) -> HashMap<ChainKey, Result<Arc<BasisChain>, String>> {
    let mut firsts: Vec<&QuenchRun> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for r in runs {
        if seen.insert(r.chain_key()) {
            firsts.push(r);
        }
    }
    let build = |r: &&QuenchRun| {
        let chain = r
            .schedule()
            .and_then(|s| BasisChain::build(&r.lattice.model, r.d, r.n_rep, &s))
            .map(Arc::new)
            .map_err(|e| e.to_string());
        (r.chain_key(), chain)
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        firsts.par_iter().map(build).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        firsts.iter().map(build).collect()
    }
}

/// Execute independent runs on `workers` threads (0 = all cores), sharing
/// basis chains between runs on the same ramp. Failed runs are reported in
/// place and do not stop the sweep.
pub fn sweep(runs: &[QuenchRun], workers: usize) -> SweepOutcome {
    sweep_with(runs, workers, |_, _| {})
}

/// [`sweep`] that hands every finished run to `on_done` with its index, in
/// completion order.
pub fn sweep_with<F>(runs: &[QuenchRun], workers: usize, on_done: F) -> SweepOutcome
where
    F: Fn(usize, &Result<QuenchResult>) + Sync,
{
    let exec = || {
        let chains = build_chains(runs);
        let one = |(i, r): (usize, &QuenchRun)| -> Result<QuenchResult> {
            let res = match &chains[&r.chain_key()] {
                Ok(c) => run_on_chain(r, c),
                Err(msg) => Err(Error::InvalidRun(msg.clone())),
            };
            on_done(i, &res);
            res
        };
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            runs.par_iter().enumerate().map(one).collect::<Vec<_>>()
        }
        #[cfg(not(feature = "parallel"))]
        {
            runs.iter().enumerate().map(one).collect::<Vec<_>>()
        }
    };
    #[cfg(feature = "parallel")]
    let results = match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(exec),
        Err(_) => exec(),
    };
    #[cfg(not(feature = "parallel"))]
    let results = {
        let _ = workers;
        exec()
    };
    let summaries: Vec<&QuenchSummary> = results.iter().filter_map(|r| r.as_ref().ok()).map(|r| &r.summary).collect();
    let averaged = size_average(&summaries);
    SweepOutcome { results, averaged }
}
