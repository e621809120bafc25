use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Mutex;

use clap::{Args, Parser, Subcommand, ValueEnum};
use kz_phi4::analysis::FitWindow;
use kz_phi4::io::{
    self, AnalyzeMode, ErrorRecord, GroundRecord, Manifest, QuenchRecord, RecordWriter, SCHEMA_VERSION,
};
use kz_phi4::local_solver::{site_operators, solve_local, LocalHamiltonianSpec};
use kz_phi4::mps::product_state;
use kz_phi4::oracle::{self, DenseState, EvolveMethod};
use kz_phi4::{dmrg, model, quench, tebd, Error, Result};

#[derive(Parser)]
#[command(name = "kzphi4", version, about = "Kibble-Zurek quenches in the 1+1D phi^4 chain")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Run manifest (TOML).
    #[arg(long)]
    manifest: PathBuf,
    /// Output directory; overrides the manifest.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Replace existing output files.
    #[arg(long)]
    overwrite: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Single-site spectra at the probe fields.
    SolveLocal(Common),
    /// DMRG ground states (and gaps) at the probe fields.
    Ground(Common),
    /// Ramps of the manifest grid, one after another.
    Quench {
        #[command(flatten)]
        common: Common,
        /// Extra snapshot every this many plateaus.
        #[arg(long)]
        checkpoint_every: Option<usize>,
    },
    /// Ramps of the manifest grid on a worker pool, plus size-averaged curves.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        checkpoint_every: Option<usize>,
    },
    /// Fits over record files.
    Analyze {
        /// Quench or sweep record files (JSONL).
        #[arg(required = true)]
        records: Vec<PathBuf>,
        #[arg(long, value_enum, default_value = "powerlaw")]
        mode: Mode,
        /// Ground records carrying gaps, for the crossover prediction.
        #[arg(long)]
        gaps: Vec<PathBuf>,
        /// `default`, `all` or `LOW:HIGH` points dropped at each end.
        #[arg(long, default_value = "default")]
        window: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        overwrite: bool,
    },
    /// MPS against dense references on small chains.
    OracleCompare(Common),
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Powerlaw,
    Crossover,
    Criteria,
}

impl From<Mode> for AnalyzeMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Powerlaw => AnalyzeMode::Powerlaw,
            Mode::Crossover => AnalyzeMode::Crossover,
            Mode::Criteria => AnalyzeMode::Criteria,
        }
    }
}

fn parse_window(s: &str) -> Result<FitWindow> {
    match s {
        "default" => Ok(FitWindow::Default),
        "all" => Ok(FitWindow::All),
        _ => {
            let bad = || Error::Config(format!("bad --window {s:?}"));
            let (lo, hi) = s.split_once(':').ok_or_else(bad)?;
            Ok(FitWindow::Trim {
                low: lo.parse().map_err(|_| bad())?,
                high: hi.parse().map_err(|_| bad())?,
            })
        }
    }
}

struct Ctx {
    manifest: Manifest,
    hash: String,
    out: PathBuf,
    overwrite: bool,
}

impl Ctx {
    fn load(c: &Common) -> Result<Self> {
        let mut manifest = Manifest::load(&c.manifest)?;
        if let Some(o) = &c.out {
            manifest.output = o.clone();
        }
        let hash = manifest.hash();
        Ok(Self {
            out: manifest.output.clone(),
            manifest,
            hash,
            overwrite: c.overwrite,
        })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn eps_tilde(&self, omega0: f64, eps: f64) -> f64 {
        self.manifest.eps_tilde_c(omega0) - eps
    }

    fn local_spec(&self, omega0: f64, eps: f64) -> LocalHamiltonianSpec {
        let m = &self.manifest.model;
        LocalHamiltonianSpec::new(m.hbar, m.g, omega0, self.eps_tilde(omega0, eps), self.manifest.truncation.d)
    }

    fn hamiltonian(&self, omega0: f64, length: usize, eps: f64) -> Result<model::LatticeHamiltonian> {
        let lattice = model::LatticeSpec::new(length, self.manifest.model_params(omega0))?;
        let spec = self.local_spec(omega0, eps);
        let ops = site_operators(&solve_local(&spec, self.manifest.truncation.d)?);
        model::assemble(&lattice, &ops, spec.eps_tilde)
    }
}

fn solve_local_cmd(ctx: &Ctx) -> Result<()> {
    let mut rows = Vec::new();
    for &omega0 in &ctx.manifest.model.omega0 {
        for &eps in &ctx.manifest.probe.eps {
            let spec = ctx.local_spec(omega0, eps);
            let eig = solve_local(&spec, ctx.manifest.truncation.d)?;
            for (q, (e, p)) in eig.energies.iter().zip(&eig.parities).enumerate() {
                rows.push(vec![omega0, eps, spec.eps_tilde, q as f64, *e, p.sign()]);
            }
        }
    }
    let path = ctx.path("local_spectrum.tsv");
    io::write_table(&path, &["omega0", "eps", "eps_tilde", "q", "energy", "parity"], &rows, ctx.overwrite)?;
    println!("{}", serde_json::json!({ "table": path, "rows": rows.len(), "manifest_hash": ctx.hash }));
    Ok(())
}

fn ground_cmd(ctx: &Ctx) -> Result<()> {
    let m = &ctx.manifest;
    let mut writer = RecordWriter::create(&ctx.path("ground.jsonl"), ctx.overwrite)?;
    let mut gaps = Vec::new();
    let settings = m.dmrg_settings(m.seeds[0]);
    for &omega0 in &m.model.omega0 {
        for &length in &m.lattice.lengths {
            for &eps in &m.probe.eps {
                let mut rec = GroundRecord {
                    schema_version: SCHEMA_VERSION,
                    manifest_hash: ctx.hash.clone(),
                    omega0,
                    length,
                    eps,
                    eps_tilde: ctx.eps_tilde(omega0, eps),
                    energy: None,
                    converged: false,
                    sweeps: 0,
                    max_discarded: 0.0,
                    max_bond: 0,
                    gap: None,
                    gap_converged: None,
                    error: None,
                };
                let outcome = ctx.hamiltonian(omega0, length, eps).and_then(|h| {
                    let g = dmrg::ground_state(&h, &settings)?;
                    rec.energy = Some(g.energy);
                    rec.converged = g.converged;
                    rec.sweeps = g.sweeps;
                    rec.max_discarded = g.max_discarded;
                    rec.max_bond = g.psi.max_bond();
                    if m.probe.gap {
                        let gap = dmrg::first_gap(&h, &g, &settings)?;
                        rec.gap = Some(gap.gap);
                        rec.gap_converged = Some(gap.converged);
                        gaps.push(vec![omega0, length as f64, eps, gap.gap]);
                    }
                    Ok(())
                });
                if let Err(e) = outcome {
                    rec.error = Some(ErrorRecord::from(&e));
                }
                eprintln!("ground omega0={omega0} L={length} eps={eps}: {:?}", rec.energy);
                writer.append(&rec)?;
            }
        }
    }
    if m.probe.gap {
        io::write_table(&ctx.path("ground_gap.tsv"), &["omega0", "L", "eps", "gap"], &gaps, ctx.overwrite)?;
    }
    Ok(())
}

fn with_checkpoints(ctx: &Ctx, every: Option<usize>) -> Result<Vec<quench::QuenchRun>> {
    let mut runs = ctx.manifest.runs()?;
    if let Some(n) = every {
        for r in &mut runs {
            r.checkpoint_every = n;
        }
    }
    for r in &mut runs {
        if let Some(dir) = &mut r.checkpoint_dir {
            *dir = ctx.path("states");
        }
    }
    Ok(runs)
}

fn run_grid(ctx: &Ctx, runs: &[quench::QuenchRun], workers: usize, name: &str) -> Result<quench::SweepOutcome> {
    let writer = Mutex::new(RecordWriter::create(&ctx.path(name), ctx.overwrite)?);
    let failure = Mutex::new(None);
    let outcome = quench::sweep_with(runs, workers, |i, res| {
        let run = &runs[i];
        let rec = QuenchRecord::new(&ctx.hash, i, run, res.as_ref().map(|r| &r.summary));
        match res {
            Ok(r) => eprintln!(
                "run {i}: omega0={} L={} tau_q={} {:?} xi={:?} e_exc={:.4e}",
                run.lattice.model.omega0, run.lattice.length, run.tau_q, r.summary.status, r.summary.xi, r.summary.e_exc
            ),
            Err(e) => eprintln!("run {i}: failed: {e}"),
        }
        let mut w = writer.lock().unwrap_or_else(|p| p.into_inner());
        if let Err(e) = w.append(&rec) {
            failure.lock().unwrap_or_else(|p| p.into_inner()).get_or_insert(e);
        }
    });
    if let Some(e) = failure.into_inner().unwrap_or_else(|p| p.into_inner()) {
        return Err(e);
    }
    Ok(outcome)
}

fn sweep_cmd(ctx: &Ctx, workers: usize, every: Option<usize>) -> Result<()> {
    let runs = with_checkpoints(ctx, every)?;
    let outcome = run_grid(ctx, &runs, workers, "sweep.jsonl")?;
    let rows: Vec<Vec<f64>> = outcome
        .averaged
        .iter()
        .map(|p| vec![p.omega0, p.tau_q, p.xi, p.e_exc_density, p.lengths.len() as f64])
        .collect();
    io::write_table(
        &ctx.path("averaged.tsv"),
        &["omega0", "tau_q", "xi", "e_exc_density", "n_lengths"],
        &rows,
        ctx.overwrite,
    )?;
    write_run_tables(ctx, "sweep.jsonl")?;
    summarize(&outcome);
    Ok(())
}

fn quench_cmd(ctx: &Ctx, every: Option<usize>) -> Result<()> {
    let runs = with_checkpoints(ctx, every)?;
    let outcome = run_grid(ctx, &runs, 1, "quench.jsonl")?;
    write_run_tables(ctx, "quench.jsonl")?;
    summarize(&outcome);
    Ok(())
}

fn write_run_tables(ctx: &Ctx, name: &str) -> Result<()> {
    let records: Vec<QuenchRecord> = io::read_records(&ctx.path(name))?;
    io::write_table(
        &ctx.path("correlators.tsv"),
        &["omega0", "L", "tau_q", "l", "c_l"],
        &io::correlator_rows(&records),
        ctx.overwrite,
    )?;
    io::write_table(
        &ctx.path("deviation.tsv"),
        &["omega0", "L", "tau_q", "bond", "delta_c"],
        &io::deviation_rows(&records),
        ctx.overwrite,
    )
}

fn summarize(outcome: &quench::SweepOutcome) {
    let failed = outcome.results.iter().filter(|r| r.is_err()).count();
    println!(
        "{}",
        serde_json::json!({ "runs": outcome.results.len(), "failed": failed, "averaged_points": outcome.averaged.len() })
    );
}

fn analyze_cmd(
    records: &[PathBuf],
    gaps: &[PathBuf],
    mode: Mode,
    window: &str,
    out: &Path,
    overwrite: bool,
) -> Result<()> {
    let window = parse_window(window)?;
    let mut all: Vec<QuenchRecord> = Vec::new();
    for p in records {
        all.extend(io::read_records::<QuenchRecord>(p)?);
    }
    if all.is_empty() {
        return Err(Error::Config("no records in the given files".into()));
    }
    let mut gap_records: Vec<GroundRecord> = Vec::new();
    for p in gaps {
        gap_records.extend(io::read_records::<GroundRecord>(p)?);
    }
    let report = io::analyze_with_gaps(&all, &gap_records, mode.into(), window);
    let mut w = io::create_exclusive(&out.join("analysis.json"), overwrite)?;
    serde_json::to_writer_pretty(&mut w, &report)?;
    std::io::Write::flush(&mut w)?;
    let mut bands = Vec::new();
    for fit in &report.fits {
        let rows = io::fit_line_rows(&report.averaged, fit);
        if rows.is_empty() {
            continue;
        }
        let name = format!("fit_omega{}_{}.tsv", fit.omega0, fit.observable);
        io::write_table(&out.join(name), &["ln_tau_q", "ln_value", "ln_fit"], &rows, overwrite)?;
        if let Some(c) = fit.fit.and_then(|f| f.crossover) {
            if let (Some(b), Some(e)) = (c.breakpoint, c.log_breakpoint_err) {
                bands.push(vec![fit.omega0, b.ln(), b.ln() - e, b.ln() + e]);
            }
        }
    }
    if !bands.is_empty() {
        io::write_table(
            &out.join("breakpoint_band.tsv"),
            &["omega0", "ln_breakpoint", "ln_low", "ln_high"],
            &bands,
            overwrite,
        )?;
    }
    for c in &report.criteria {
        println!(
            "criterion {} [{}] {}: measured {:?} band [{}, {}]; {}",
            c.id,
            if c.pass { "PASS" } else { "FAIL" },
            c.label,
            c.measured,
            c.band.0,
            c.band.1,
            c.note
        );
    }
    println!(
        "{}",
        serde_json::json!({ "records": report.records, "excluded": report.excluded, "fits": report.fits.len() })
    );
    Ok(())
}

fn oracle_compare_cmd(ctx: &Ctx) -> Result<()> {
    let m = &ctx.manifest;
    let settings = m.dmrg_settings(m.seeds[0]);
    let steps = (m.probe.t_total / m.probe.dt).round().max(1.0) as usize;
    let dt = m.probe.t_total / steps as f64;
    let mut rows = Vec::new();
    for &omega0 in &m.model.omega0 {
        for &length in &m.lattice.lengths {
            for &eps in &m.probe.eps {
                let h = ctx.hamiltonian(omega0, length, eps)?;
                let (e_dense, _) = oracle::dense_ground(&h)?;
                let g = dmrg::ground_state(&h, &settings)?;
                let mut psi = product_state(length, m.truncation.d, 0, m.truncation_policy())?;
                psi.eps_tilde = h.eps_tilde;
                let start = DenseState {
                    amplitudes: psi.to_dense()?,
                    length,
                    d: m.truncation.d,
                };
                let mut prop = tebd::BondPropagator::new(&h)?;
                tebd::evolve_steps(&mut psi, &mut prop, dt, steps)?;
                let reference = oracle::dense_evolve(&start, &h, m.probe.t_total, EvolveMethod::Exact)?;
                let evolved = DenseState {
                    amplitudes: psi.to_dense()?,
                    length,
                    d: m.truncation.d,
                };
                let infidelity = 1.0 - evolved.fidelity(&reference);
                rows.push(vec![omega0, length as f64, eps, e_dense, g.energy - e_dense, infidelity]);
                println!(
                    "{}",
                    serde_json::json!({
                        "omega0": omega0, "length": length, "eps": eps,
                        "e_dense": e_dense, "e_dmrg_minus_dense": g.energy - e_dense,
                        "evolution_infidelity": infidelity,
                    })
                );
            }
        }
    }
    io::write_table(
        &ctx.path("oracle_compare.tsv"),
        &["omega0", "L", "eps", "e_dense", "delta_e", "infidelity"],
        &rows,
        ctx.overwrite,
    )
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::SolveLocal(c) => solve_local_cmd(&Ctx::load(&c)?),
        Command::Ground(c) => ground_cmd(&Ctx::load(&c)?),
        Command::Quench { common, checkpoint_every } => quench_cmd(&Ctx::load(&common)?, checkpoint_every),
        Command::Sweep {
            common,
            workers,
            checkpoint_every,
        } => {
            let workers = workers
                .or_else(|| std::thread::available_parallelism().ok().map(|n| n.get()))
                .unwrap_or(1);
            if workers == 0 {
                return Err(Error::Config("--workers must be >= 1".into()));
            }
            sweep_cmd(&Ctx::load(&common)?, workers, checkpoint_every)
        }
        Command::Analyze {
            records,
            mode,
            gaps,
            window,
            out,
            overwrite,
        } => analyze_cmd(&records, &gaps, mode, &window, &out, overwrite),
        Command::OracleCompare(c) => oracle_compare_cmd(&Ctx::load(&c)?),
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", serde_json::json!({ "error": ErrorRecord::from(&e) }));
            match e {
                Error::Config(_) | Error::Serde(_) | Error::Format(_) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
