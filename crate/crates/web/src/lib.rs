//! wasm-bindgen front end for the static demo page in `www/`.
//!
//! Every export takes plain numbers and returns a JSON string. The `*_json`
//! functions hold the logic so they can be tested natively.

use kz_phi4::analysis::{self, Regime};
use kz_phi4::local_solver::{ion_chain_g, solve_local, LocalHamiltonianSpec, Parity};
use kz_phi4::model::{LatticeSpec, ModelParams, C_PRIME};
use kz_phi4::quench::{self, QuenchRun};
use kz_phi4::Error;
use serde::Serialize;
use wasm_bindgen::prelude::*;

const HBAR: f64 = 0.1;
const MAX_LENGTH: usize = 10;
const MAX_D: usize = 8;
const MAX_STEPS: usize = 4000;

fn model(hbar: f64, omega0: f64) -> ModelParams {
    ModelParams {
        hbar,
        g: ion_chain_g(),
        omega0,
    }
}

#[derive(Serialize)]
pub struct Spectrum {
    pub eps_tilde: f64,
    pub energies: Vec<f64>,
    pub even: Vec<bool>,
    /// `(y, V(y))` samples of the on-site potential.
    pub potential: Vec<(f64, f64)>,
}

pub fn local_spectrum_json(omega0: f64, eps: f64, d: usize) -> Result<Spectrum, Error> {
    let m = model(HBAR, omega0);
    m.validate()?;
    let eps_tilde = m.critical_field(C_PRIME) - eps;
    let spec = LocalHamiltonianSpec::new(HBAR, m.g, omega0, eps_tilde, d);
    let eig = solve_local(&spec, d)?;
    let r = omega0 * eps_tilde;
    let top = eig.energies[d - 1];
    // widest |y| where V stays below the highest retained level
    let mut reach = 0.05;
    while 0.5 * (r * reach * reach + 2.0 * m.g * reach.powi(4)) < top.max(0.0) && reach < 10.0 {
        reach *= 1.05;
    }
    let potential = (0..=200)
        .map(|k| {
            let y = reach * (2.0 * k as f64 / 200.0 - 1.0);
            (y, 0.5 * (r * y * y + 2.0 * m.g * y.powi(4)))
        })
        .collect();
    Ok(Spectrum {
        eps_tilde,
        even: eig.parities.iter().map(|p| *p == Parity::Even).collect(),
        energies: eig.energies,
        potential,
    })
}

#[derive(Serialize)]
pub struct DiagramRow {
    pub omega0: f64,
    pub width_rg: f64,
    pub width_criterion: f64,
    pub in_window: bool,
}

#[derive(Serialize)]
pub struct Diagram {
    pub hbar: f64,
    pub rg_valid: bool,
    pub rows: Vec<DiagramRow>,
}

/// Ginzburg widths on a log grid of `Omega0`.
pub fn crossover_diagram_json(hbar: f64, omega0_min: f64, omega0_max: f64, n: usize) -> Result<Diagram, Error> {
    if !(omega0_min > 0.0 && omega0_max > omega0_min && n >= 2) {
        return Err(Error::Config("need 0 < omega0_min < omega0_max and n >= 2".into()));
    }
    model(hbar, omega0_min).validate()?;
    let g = ion_chain_g();
    let step = (omega0_max / omega0_min).ln() / (n - 1) as f64;
    let mut rows = Vec::with_capacity(n);
    for k in 0..n {
        let omega0 = omega0_min * (step * k as f64).exp();
        rows.push(DiagramRow {
            omega0,
            width_rg: analysis::ginzburg_width_rg(hbar, g, omega0),
            width_criterion: analysis::ginzburg_width_criterion(hbar, g, omega0, 2)?,
            in_window: analysis::crossover_in_window(hbar, g, omega0),
        });
    }
    Ok(Diagram {
        hbar,
        rg_valid: analysis::rg_width_valid(hbar),
        rows,
    })
}

#[derive(Serialize)]
pub struct TracePoint {
    pub eps: f64,
    pub energy: f64,
    pub nn_correlator: f64,
    pub ginzburg: f64,
    pub regime: Regime,
}

#[derive(Serialize)]
pub struct SmallQuench {
    pub trace: Vec<TracePoint>,
    pub xi: Option<f64>,
    pub e_exc: f64,
    pub deviation: Vec<f64>,
    pub status: String,
}

pub fn small_quench_json(omega0: f64, length: usize, d: usize, tau_q: f64, dt: f64) -> Result<SmallQuench, Error> {
    if length > MAX_LENGTH || d > MAX_D {
        return Err(Error::Config(format!("demo is limited to L <= {MAX_LENGTH}, d <= {MAX_D}")));
    }
    if !(dt > 0.0) || tau_q / dt > MAX_STEPS as f64 {
        return Err(Error::Config(format!("demo is limited to {MAX_STEPS} steps")));
    }
    let m = model(HBAR, omega0);
    let lattice = LatticeSpec::new(length, m)?;
    let mut run = QuenchRun::new(lattice, tau_q, dt, d);
    run.checkpoint_every = ((tau_q / dt) as usize / 40).max(1);
    let out = quench::run(&run)?.summary;
    let trace = out
        .checkpoints
        .iter()
        .map(|c| -> Result<TracePoint, Error> {
            let ginzburg = analysis::ginzburg_number(omega0, c.eps_tilde, out.eps_tilde_c, m.hbar, m.g, 2)?;
            Ok(TracePoint {
                eps: c.eps,
                energy: c.energy,
                nn_correlator: c.nn_correlator,
                ginzburg,
                regime: analysis::classify(ginzburg),
            })
        })
        .collect::<Result<_, _>>()?;
    Ok(SmallQuench {
        trace,
        xi: out.xi,
        e_exc: out.e_exc,
        deviation: out.deviation,
        status: serde_json::to_value(out.status)?.as_str().unwrap_or("unknown").to_string(),
    })
}

fn to_js<T: Serialize>(r: Result<T, Error>) -> Result<String, JsError> {
    let v = r.map_err(|e| JsError::new(&e.to_string()))?;
    serde_json::to_string(&v).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen]
pub fn local_spectrum(omega0: f64, eps: f64, d: usize) -> Result<String, JsError> {
    to_js(local_spectrum_json(omega0, eps, d))
}

#[wasm_bindgen]
pub fn crossover_diagram(hbar: f64, omega0_min: f64, omega0_max: f64, n: usize) -> Result<String, JsError> {
    to_js(crossover_diagram_json(hbar, omega0_min, omega0_max, n))
}

#[wasm_bindgen]
pub fn small_quench(omega0: f64, length: usize, d: usize, tau_q: f64, dt: f64) -> Result<String, JsError> {
    to_js(small_quench_json(omega0, length, d, tau_q, dt))
}
