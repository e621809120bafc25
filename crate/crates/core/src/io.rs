//! Run manifests (TOML), line-delimited JSON result records and whitespace
//! separated tables.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{self, CrossoverFit, FitResult, FitWindow};
use crate::dmrg::{DmrgSettings, InitialState};
use crate::error::{Error, Result};
use crate::local_solver::ion_chain_g;
use crate::model::{LatticeSpec, ModelParams, C_PRIME};
use crate::mps::TruncationPolicy;
use crate::quench::{self, AveragedPoint, QuenchRun, QuenchSummary, RunStatus};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub hbar: f64,
    #[serde(default = "ion_chain_g")]
    pub g: f64,
    /// Every value spawns its own ramp.
    pub omega0: Vec<f64>,
    #[serde(default = "default_c_prime")]
    pub c_prime: f64,
    /// Explicit `Omega0 * eps_tilde_c`, replacing the shift law.
    #[serde(default)]
    pub critical_r: Option<f64>,
}

fn default_c_prime() -> f64 {
    C_PRIME
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSection {
    pub lengths: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruncationSection {
    pub d: usize,
    pub m_max: usize,
    #[serde(default = "default_weight_tol")]
    pub weight_tol: f64,
}

fn default_weight_tol() -> f64 {
    1e-10
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "policy")]
pub enum DtPolicy {
    FixedDt { dt: f64 },
    /// `dt = ratio * tau_q`.
    FixedRatio { ratio: f64 },
}

impl DtPolicy {
    pub fn dt(&self, tau_q: f64) -> f64 {
        match *self {
            DtPolicy::FixedDt { dt } => dt.min(tau_q),
            DtPolicy::FixedRatio { ratio } => ratio * tau_q,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSection {
    /// Explicit quench times.
    #[serde(default)]
    pub tau_q: Vec<f64>,
    /// `[min, max, count]`, log-spaced, appended to `tau_q`.
    #[serde(default)]
    pub tau_q_log: Option<(f64, f64, usize)>,
    pub dt: DtPolicy,
}

impl ScheduleSection {
    pub fn tau_values(&self) -> Vec<f64> {
        let mut v = self.tau_q.clone();
        if let Some((lo, hi, n)) = self.tau_q_log {
            if n == 1 {
                v.push(lo);
            } else {
                let (a, b) = (lo.ln(), hi.ln());
                v.extend((0..n).map(|k| (a + (b - a) * k as f64 / (n - 1) as f64).exp()));
            }
        }
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointSection {
    /// Control values `eps`; the ramp start, crossover width, zero and end when absent.
    #[serde(default)]
    pub eps: Option<Vec<f64>>,
    /// Extra snapshot every this many plateaus.
    #[serde(default)]
    pub every: usize,
    /// Write state files for the snapshots.
    #[serde(default)]
    pub save_states: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DmrgSection {
    #[serde(default = "default_sweeps")]
    pub max_sweeps: usize,
    #[serde(default = "default_energy_tol")]
    pub energy_tol: f64,
}

fn default_sweeps() -> usize {
    30
}

fn default_energy_tol() -> f64 {
    1e-10
}

impl Default for DmrgSection {
    fn default() -> Self {
        Self {
            max_sweeps: default_sweeps(),
            energy_tol: default_energy_tol(),
        }
    }
}

/// Static points for `solve-local`, `ground` and `oracle-compare`, as shifted
/// fields `eps`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSection {
    #[serde(default = "default_probe_eps")]
    pub eps: Vec<f64>,
    #[serde(default)]
    pub gap: bool,
    /// Total time of the static evolution in `oracle-compare`.
    #[serde(default = "default_t_total")]
    pub t_total: f64,
    #[serde(default = "default_probe_dt")]
    pub dt: f64,
}

fn default_probe_eps() -> Vec<f64> {
    vec![-0.5, 0.0, 0.5]
}

fn default_t_total() -> f64 {
    1.0
}

fn default_probe_dt() -> f64 {
    1e-2
}

impl Default for ProbeSection {
    fn default() -> Self {
        Self {
            eps: default_probe_eps(),
            gap: false,
            t_total: default_t_total(),
            dt: default_probe_dt(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub schema_version: u32,
    pub model: ModelSection,
    pub lattice: LatticeSection,
    pub truncation: TruncationSection,
    pub schedule: ScheduleSection,
    #[serde(default)]
    pub checkpoints: CheckpointSection,
    #[serde(default)]
    pub dmrg: DmrgSection,
    #[serde(default)]
    pub probe: ProbeSection,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    pub output: PathBuf,
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be positive, got {v}")))
    }
}

impl Manifest {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let m: Manifest = toml::from_str(s)?;
        m.validate()?;
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Serde(e.to_string()))
    }

    /// Ramp at `hbar = 0.1, Omega0 = 9` with `d = 20`, `m = 50`.
    pub fn crossover_defaults() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            model: ModelSection {
                hbar: 0.1,
                g: ion_chain_g(),
                omega0: vec![9.0],
                c_prime: C_PRIME,
                critical_r: None,
            },
            lattice: LatticeSection { lengths: vec![20, 40] },
            truncation: TruncationSection {
                d: 20,
                m_max: 50,
                weight_tol: 1e-10,
            },
            schedule: ScheduleSection {
                tau_q: vec![],
                tau_q_log: Some((2.0, 30.0, 8)),
                dt: DtPolicy::FixedDt { dt: 0.05 },
            },
            checkpoints: CheckpointSection::default(),
            dmrg: DmrgSection::default(),
            probe: ProbeSection::default(),
            seeds: vec![0],
            output: PathBuf::from("out"),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        positive("model.hbar", self.model.hbar)?;
        positive("model.g", self.model.g)?;
        if self.model.omega0.is_empty() {
            return Err(Error::Config("model.omega0 is empty".into()));
        }
        for &o in &self.model.omega0 {
            positive("model.omega0", o)?;
        }
        if !self.model.c_prime.is_finite() || self.model.critical_r.is_some_and(|r| !r.is_finite()) {
            return Err(Error::Config("critical-field parameters must be finite".into()));
        }
        if self.lattice.lengths.is_empty() {
            return Err(Error::Config("lattice.lengths is empty".into()));
        }
        for &l in &self.lattice.lengths {
            LatticeSpec::new(l, self.model_params(self.model.omega0[0]))?;
        }
        if self.truncation.d < 2 {
            return Err(Error::Config("truncation.d must be >= 2".into()));
        }
        TruncationPolicy::new(self.truncation.m_max, self.truncation.weight_tol)?;
        let taus = self.schedule.tau_values();
        if taus.is_empty() {
            return Err(Error::Config("schedule has no tau_q values".into()));
        }
        if let Some((lo, hi, n)) = self.schedule.tau_q_log {
            positive("tau_q_log min", lo)?;
            positive("tau_q_log max", hi)?;
            if n == 0 || hi < lo {
                return Err(Error::Config("tau_q_log needs min <= max and count >= 1".into()));
            }
        }
        for &t in &taus {
            positive("tau_q", t)?;
        }
        match self.schedule.dt {
            DtPolicy::FixedDt { dt } => positive("schedule.dt", dt)?,
            DtPolicy::FixedRatio { ratio } => {
                positive("schedule.ratio", ratio)?;
                if ratio > 1.0 {
                    return Err(Error::Config("schedule.ratio must be <= 1".into()));
                }
            }
        }
        if let Some(e) = self.checkpoints.eps.iter().flatten().find(|e| !(-0.5..=0.5).contains(*e)) {
            return Err(Error::Config(format!("checkpoint eps = {e} outside [-0.5, 0.5]")));
        }
        if self.dmrg.max_sweeps < 2 {
            return Err(Error::Config("dmrg.max_sweeps must be >= 2".into()));
        }
        positive("dmrg.energy_tol", self.dmrg.energy_tol)?;
        positive("probe.t_total", self.probe.t_total)?;
        positive("probe.dt", self.probe.dt)?;
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds is empty".into()));
        }
        Ok(())
    }

    pub fn model_params(&self, omega0: f64) -> ModelParams {
        ModelParams {
            hbar: self.model.hbar,
            g: self.model.g,
            omega0,
        }
    }

    pub fn eps_tilde_c(&self, omega0: f64) -> f64 {
        match self.model.critical_r {
            Some(r) => r / omega0,
            None => self.model_params(omega0).critical_field(self.model.c_prime),
        }
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).unwrap_or_default();
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }

    pub fn truncation_policy(&self) -> TruncationPolicy {
        TruncationPolicy {
            m_max: self.truncation.m_max,
            weight_tol: self.truncation.weight_tol,
        }
    }

    pub fn dmrg_settings(&self, seed: u64) -> DmrgSettings {
        DmrgSettings {
            max_sweeps: self.dmrg.max_sweeps,
            energy_tol: self.dmrg.energy_tol,
            trunc: self.truncation_policy(),
            seed,
            initial: InitialState::Product(0),
            initial_bond: 4,
            ..Default::default()
        }
    }

    /// Cartesian grid `Omega0 x tau_q x L x seed`, in that nesting order.
    pub fn runs(&self) -> Result<Vec<QuenchRun>> {
        let mut out = Vec::new();
        for &omega0 in &self.model.omega0 {
            let params = self.model_params(omega0);
            for tau in self.schedule.tau_values() {
                for &length in &self.lattice.lengths {
                    for &seed in &self.seeds {
                        let lattice = LatticeSpec::new(length, params)?;
                        let mut run = QuenchRun::new(lattice, tau, self.schedule.dt.dt(tau), self.truncation.d);
                        run.eps_tilde_c = self.eps_tilde_c(omega0);
                        run.trunc = self.truncation_policy();
                        run.seed = seed;
                        run.dmrg = self.dmrg_settings(seed);
                        if let Some(eps) = &self.checkpoints.eps {
                            run.checkpoints = eps.clone();
                        }
                        run.checkpoint_every = self.checkpoints.every;
                        if self.checkpoints.save_states {
                            run.checkpoint_dir = Some(self.output.join("states"));
                        }
                        out.push(run);
                    }
                }
            }
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub kind: String,
    pub message: String,
}

impl From<&Error> for ErrorRecord {
    fn from(e: &Error) -> Self {
        Self {
            kind: e.kind().to_string(),
            message: e.to_string(),
        }
    }
}

/// One line of a quench record file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuenchRecord {
    pub schema_version: u32,
    pub manifest_hash: String,
    pub run_index: usize,
    pub omega0: f64,
    pub length: usize,
    pub tau_q: f64,
    pub seed: u64,
    pub summary: Option<QuenchSummary>,
    pub error: Option<ErrorRecord>,
}

impl QuenchRecord {
    pub fn new(hash: &str, run_index: usize, run: &QuenchRun, outcome: std::result::Result<&QuenchSummary, &Error>) -> Self {
        let (summary, error) = match outcome {
            Ok(s) => (Some(s.clone()), None),
            Err(e) => (None, Some(ErrorRecord::from(e))),
        };
        Self {
            schema_version: SCHEMA_VERSION,
            manifest_hash: hash.to_string(),
            run_index,
            omega0: run.lattice.model.omega0,
            length: run.lattice.length,
            tau_q: run.tau_q,
            seed: run.seed,
            summary,
            error,
        }
    }

    pub fn valid_summary(&self) -> Option<&QuenchSummary> {
        self.summary.as_ref().filter(|s| s.status == RunStatus::Valid)
    }
}

/// Open `path` for writing; an existing file is an error unless `overwrite`.
pub fn create_exclusive(path: &Path, overwrite: bool) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut opts = OpenOptions::new();
    opts.write(true);
    if overwrite {
        opts.create(true).truncate(true);
    } else {
        opts.create_new(true);
    }
    opts.open(path).map(BufWriter::new).map_err(|e| {
        if e.kind() == std::io::ErrorKind::AlreadyExists {
            Error::Config(format!("{} exists; pass --overwrite to replace it", path.display()))
        } else {
            Error::Io(e)
        }
    })
}

/// Line-delimited JSON writer; every line is flushed as it is written.
pub struct RecordWriter {
    out: BufWriter<File>,
}

impl RecordWriter {
    pub fn create(path: &Path, overwrite: bool) -> Result<Self> {
        Ok(Self {
            out: create_exclusive(path, overwrite)?,
        })
    }

    pub fn append<T: Serialize>(&mut self, record: &T) -> Result<()> {
        serde_json::to_writer(&mut self.out, record)?;
        self.out.write_all(b"\n")?;
        self.out.flush()?;
        Ok(())
    }
}

pub fn read_records<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|e| Error::Serde(format!("{}:{}: {e}", path.display(), n + 1)))?,
        );
    }
    Ok(out)
}

/// Whitespace-separated table with a `#`-prefixed header line.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<f64>], overwrite: bool) -> Result<()> {
    let mut out = create_exclusive(path, overwrite)?;
    writeln!(out, "# {}", header.join(" "))?;
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.17e}")).collect();
        writeln!(out, "{}", cells.join(" "))?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_table(path: &Path) -> Result<Vec<Vec<f64>>> {
    let reader = BufReader::new(File::open(path)?);
    let mut rows = Vec::new();
    for line in reader.lines() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        rows.push(
            t.split_whitespace()
                .map(|c| c.parse::<f64>().map_err(|e| Error::Format(format!("bad cell {c:?}: {e}"))))
                .collect::<Result<Vec<f64>>>()?,
        );
    }
    Ok(rows)
}

/// Rows `(Omega0, L, tau_q, l, C_l)` for every record with a profile.
pub fn correlator_rows(records: &[QuenchRecord]) -> Vec<Vec<f64>> {
    let mut rows = Vec::new();
    for r in records {
        let Some(s) = &r.summary else { continue };
        let Some(p) = &s.profile else { continue };
        for (l, c) in p.table() {
            rows.push(vec![r.omega0, r.length as f64, r.tau_q, l as f64, c]);
        }
    }
    rows
}

/// Rows `(Omega0, L, tau_q, j, dC_j)`.
pub fn deviation_rows(records: &[QuenchRecord]) -> Vec<Vec<f64>> {
    let mut rows = Vec::new();
    for r in records {
        let Some(s) = &r.summary else { continue };
        for (j, v) in s.deviation.iter().enumerate() {
            rows.push(vec![r.omega0, r.length as f64, r.tau_q, j as f64, *v]);
        }
    }
    rows
}

/// One static point of the `ground` command.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundRecord {
    pub schema_version: u32,
    pub manifest_hash: String,
    pub omega0: f64,
    pub length: usize,
    pub eps: f64,
    pub eps_tilde: f64,
    pub energy: Option<f64>,
    pub converged: bool,
    pub sweeps: usize,
    pub max_discarded: f64,
    pub max_bond: usize,
    pub gap: Option<f64>,
    pub gap_converged: Option<bool>,
    pub error: Option<ErrorRecord>,
}

/// `(|eps|, gap)` on the disordered side (`eps < 0`) for one `Omega0`, averaged
/// over lengths.
pub fn gap_points(records: &[GroundRecord], omega0: f64) -> Vec<(f64, f64)> {
    let mut by_eps: Vec<(f64, Vec<f64>)> = Vec::new();
    for r in records.iter().filter(|r| r.omega0 == omega0 && r.eps < 0.0) {
        let Some(g) = r.gap.filter(|g| *g > 0.0) else { continue };
        match by_eps.iter_mut().find(|(e, _)| *e == r.eps) {
            Some((_, v)) => v.push(g),
            None => by_eps.push((r.eps, vec![g])),
        }
    }
    by_eps.sort_by(|a, b| a.0.total_cmp(&b.0));
    by_eps
        .into_iter()
        .map(|(e, v)| (e.abs(), v.iter().sum::<f64>() / v.len() as f64))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnalyzeMode {
    Powerlaw,
    Crossover,
    Criteria,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesFit {
    pub omega0: f64,
    pub observable: String,
    pub fit: Option<FitResult>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub mode: AnalyzeMode,
    pub manifest_hashes: Vec<String>,
    pub records: usize,
    /// Records left out of the fits: failed or outside the validity gates.
    pub excluded: usize,
    pub averaged: Vec<AveragedPoint>,
    pub fits: Vec<SeriesFit>,
    /// Filled in `criteria` mode.
    pub criteria: Vec<CriterionCheck>,
}

impl AnalysisReport {
    pub fn fit(&self, omega0: f64, observable: &str) -> Option<&FitResult> {
        self.fits
            .iter()
            .find(|f| f.omega0 == omega0 && f.observable == observable)
            .and_then(|f| f.fit.as_ref())
    }
}

/// Quantum-regime sweep field.
pub const OMEGA0_QUANTUM: f64 = 1.15;
/// Classical-regime sweep field.
pub const OMEGA0_CLASSICAL: f64 = 30.0;
/// Field whose ramp window holds the crossover.
pub const OMEGA0_CROSSOVER: f64 = 9.0;
pub const W_QUANTUM_BAND: (f64, f64) = (0.42, 0.62);
pub const W_CLASSICAL_BAND: (f64, f64) = (0.25, 0.41);
pub const W_EXC_BAND: (f64, f64) = (0.4, 0.6);
/// Allowed ratio of fitted to predicted crossover time.
pub const BREAKPOINT_RATIO_BAND: (f64, f64) = (0.5, 2.0);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriterionCheck {
    pub id: u32,
    pub label: String,
    pub measured: Option<f64>,
    pub band: (f64, f64),
    pub pass: bool,
    pub note: String,
}

fn check(id: u32, label: &str, measured: Option<f64>, band: (f64, f64), note: String) -> CriterionCheck {
    CriterionCheck {
        id,
        label: label.to_string(),
        measured,
        band,
        pass: measured.is_some_and(|m| m >= band.0 && m <= band.1),
        note,
    }
}

fn describe(fit: Option<&FitResult>, err: Option<&str>) -> String {
    match (fit, err) {
        (Some(f), _) => format!(
            "exponent {:.4} +- {:.4} over tau_q in [{:.3}, {:.3}] ({} points)",
            f.exponent, f.uncertainty, f.window.0, f.window.1, f.points
        ),
        (None, Some(e)) => e.to_string(),
        (None, None) => "no valid records".to_string(),
    }
}

/// Scaling checks on the sweeps at the three reference fields. `gaps` supplies
/// the measured gap prefactor for the crossover prediction.
pub fn criteria_checks(
    records: &[QuenchRecord],
    gaps: &[GroundRecord],
    window: FitWindow,
) -> Vec<CriterionCheck> {
    let power = analyze(records, AnalyzeMode::Powerlaw, window);
    let err_of = |omega0: f64, obs: &str| {
        power
            .fits
            .iter()
            .find(|f| f.omega0 == omega0 && f.observable == obs)
            .and_then(|f| f.error.clone())
    };
    let mut out = Vec::new();

    let q = power.fit(OMEGA0_QUANTUM, "xi");
    out.push(check(
        5,
        "quantum KZ exponent of xi",
        q.map(|f| f.exponent),
        W_QUANTUM_BAND,
        describe(q, err_of(OMEGA0_QUANTUM, "xi").as_deref()),
    ));

    let c = power.fit(OMEGA0_CLASSICAL, "xi");
    out.push(check(
        6,
        "classical KZ exponent of xi",
        c.map(|f| f.exponent),
        W_CLASSICAL_BAND,
        describe(c, err_of(OMEGA0_CLASSICAL, "xi").as_deref()),
    ));

    let pts: Vec<(f64, f64)> = power
        .averaged
        .iter()
        .filter(|p| p.omega0 == OMEGA0_CROSSOVER)
        .map(|p| (p.tau_q, p.xi))
        .collect();
    let hbar = records
        .iter()
        .find_map(|r| r.summary.as_ref().map(|s| s.model))
        .map(|m| (m.hbar, m.g));
    let cross = analysis::fit_crossover(&pts, None);
    let predicted = hbar.and_then(|(hbar, g)| {
        let gp = gap_points(gaps, OMEGA0_CROSSOVER);
        let law = analysis::fit_gap_law(&gp, Some(1.0)).ok()?;
        let eps_x = analysis::ginzburg_width_rg(hbar, g, OMEGA0_CROSSOVER);
        analysis::crossover_time(&analysis::CriticalExponents::quantum(), hbar, eps_x, law.phi).ok()
    });
    let (measured, note) = match (&cross, predicted) {
        (Ok(f), Some(tp)) => match f.crossover {
            Some(CrossoverFit {
                breakpoint: Some(b),
                w_fast,
                w_slow,
                ..
            }) if w_fast < w_slow => (
                Some(b / tp),
                format!("w_fast {w_fast:.3}, w_slow {w_slow:.3}, breakpoint {b:.3}, predicted {tp:.3}"),
            ),
            Some(c) => (
                None,
                format!(
                    "segments not ordered or indistinguishable: w_fast {:.3}, w_slow {:.3}, breakpoint {}, predicted {tp:.3}",
                    c.w_fast,
                    c.w_slow,
                    c.breakpoint.map_or("none".to_string(), |b| format!("{b:.3}"))
                ),
            ),
            None => (None, "no segment fit".into()),
        },
        (Err(e), _) => (None, e.to_string()),
        (Ok(_), None) => (None, "no disordered-side gap records for the prediction".into()),
    };
    out.push(check(7, "crossover breakpoint / prediction", measured, BREAKPOINT_RATIO_BAND, note));

    let e = power.fit(OMEGA0_QUANTUM, "e_exc_density");
    out.push(check(
        8,
        "excitation-energy exponent w'",
        e.map(|f| -f.exponent),
        W_EXC_BAND,
        describe(e, err_of(OMEGA0_QUANTUM, "e_exc_density").as_deref()),
    ));
    out
}

/// Size-average the valid records and fit `xi` and `E_exc / L` against `tau_q`
/// for every `Omega0`.
pub fn analyze(records: &[QuenchRecord], mode: AnalyzeMode, window: FitWindow) -> AnalysisReport {
    analyze_with_gaps(records, &[], mode, window)
}

pub fn analyze_with_gaps(
    records: &[QuenchRecord],
    gaps: &[GroundRecord],
    mode: AnalyzeMode,
    window: FitWindow,
) -> AnalysisReport {
    let valid: Vec<&QuenchSummary> = records.iter().filter_map(|r| r.valid_summary()).collect();
    let averaged = quench::size_average(&valid);
    let mut hashes: Vec<String> = records.iter().map(|r| r.manifest_hash.clone()).collect();
    hashes.sort();
    hashes.dedup();
    let mut omegas: Vec<f64> = averaged.iter().map(|p| p.omega0).collect();
    omegas.dedup();
    let mut fits = Vec::new();
    for omega0 in omegas {
        let series: Vec<&AveragedPoint> = averaged.iter().filter(|p| p.omega0 == omega0).collect();
        let xi: Vec<(f64, f64)> = series.iter().map(|p| (p.tau_q, p.xi)).collect();
        let ee: Vec<(f64, f64)> = series.iter().map(|p| (p.tau_q, p.e_exc_density)).collect();
        for (name, pts) in [("xi", xi), ("e_exc_density", ee)] {
            let res = match mode {
                AnalyzeMode::Crossover if name == "xi" => analysis::fit_crossover(&pts, None),
                _ => analysis::fit_powerlaw(&pts, window),
            };
            let (fit, error) = match res {
                Ok(f) => (Some(f), None),
                Err(e) => (None, Some(e.to_string())),
            };
            fits.push(SeriesFit {
                omega0,
                observable: name.to_string(),
                fit,
                error,
            });
        }
    }
    AnalysisReport {
        mode,
        manifest_hashes: hashes,
        records: records.len(),
        excluded: records.len() - valid.len(),
        criteria: if mode == AnalyzeMode::Criteria {
            criteria_checks(records, gaps, window)
        } else {
            Vec::new()
        },
        averaged,
        fits,
    }
}

/// Rows `(ln tau_q, ln value, ln fitted)` for plotting one series.
pub fn fit_line_rows(points: &[AveragedPoint], fit: &SeriesFit) -> Vec<Vec<f64>> {
    let Some(f) = &fit.fit else { return Vec::new() };
    points
        .iter()
        .filter(|p| p.omega0 == fit.omega0)
        .map(|p| {
            let v = if fit.observable == "xi" { p.xi } else { p.e_exc_density };
            let lt = p.tau_q.ln();
            let slow = f.prefactor.ln() + f.exponent * lt;
            let model = match f.crossover {
                Some(CrossoverFit {
                    breakpoint: Some(b),
                    w_fast,
                    ..
                }) if lt < b.ln() => f.prefactor.ln() + f.exponent * b.ln() + w_fast * (lt - b.ln()),
                _ => slow,
            };
            vec![lt, v.ln(), model]
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
schema_version = 1
output = "out"
[model]
hbar = 0.1
omega0 = [9.0]
[lattice]
lengths = [20, 40]
[truncation]
d = 20
m_max = 50
[schedule]
tau_q_log = [1.0, 100.0, 5]
dt = { policy = "fixed_dt", dt = 0.05 }
"#;

    #[test]
    fn minimal_manifest_parses_with_defaults() {
        let m = Manifest::from_toml_str(MINIMAL).unwrap();
        assert!((m.model.g - ion_chain_g()).abs() < 1e-15);
        assert_eq!(m.model.c_prime, C_PRIME);
        let taus = m.schedule.tau_values();
        assert_eq!(taus.len(), 5);
        assert!((taus[2] - 10.0).abs() < 1e-12);
        assert_eq!(m.runs().unwrap().len(), 10);
    }

    #[test]
    fn defaults_round_trip_and_validate() {
        let m = Manifest::crossover_defaults();
        m.validate().unwrap();
        let back = Manifest::from_toml_str(&m.to_toml_string().unwrap()).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.hash(), m.hash());
        assert_eq!(m.hash().len(), 64);
    }

    #[test]
    fn validation_errors() {
        let mut m = Manifest::crossover_defaults();
        m.schedule.tau_q_log = None;
        assert!(m.validate().is_err());
        let mut m = Manifest::crossover_defaults();
        m.schema_version = 2;
        assert!(m.validate().is_err());
        let mut m = Manifest::crossover_defaults();
        m.lattice.lengths = vec![7];
        assert!(m.validate().is_err());
        assert!(Manifest::from_toml_str(&MINIMAL.replace("hbar = 0.1", "hbar = 0.1\nbogus = 1")).is_err());
    }

    #[test]
    fn critical_override() {
        let mut m = Manifest::crossover_defaults();
        assert!((9.0 * m.eps_tilde_c(9.0) + 4.09).abs() < 0.01);
        m.model.critical_r = Some(-3.9);
        assert!((m.eps_tilde_c(1.15) * 1.15 + 3.9).abs() < 1e-15);
    }

    #[test]
    fn no_silent_overwrite() {
        let dir = std::env::temp_dir().join(format!("kz_io_{}", std::process::id()));
        let path = dir.join("t.tsv");
        let _ = std::fs::remove_dir_all(&dir);
        write_table(&path, &["a", "b"], &[vec![1.0, 0.1]], false).unwrap();
        assert!(write_table(&path, &["a", "b"], &[vec![2.0, 0.2]], false).is_err());
        write_table(&path, &["a", "b"], &[vec![3.0, 1.0 / 3.0]], true).unwrap();
        assert_eq!(read_table(&path).unwrap(), vec![vec![3.0, 1.0 / 3.0]]);
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
