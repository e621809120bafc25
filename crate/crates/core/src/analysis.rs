//! Kibble-Zurek bookkeeping: Ginzburg widths and number, freeze-out, crossover
//! quench time, and power-law / two-segment fits of observables against `tau_q`.
//!
//! Widths are reported as magnitudes; the crossover sits on the disordered
//! side, `eps < 0`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::C_PRIME;

/// `3 g hbar |ln hbar + c'| / (pi Omega0)` with the default `c'`.
pub fn ginzburg_width_rg(hbar: f64, g: f64, omega0: f64) -> f64 {
    ginzburg_width_rg_with(hbar, g, omega0, C_PRIME)
}

pub fn ginzburg_width_rg_with(hbar: f64, g: f64, omega0: f64, c_prime: f64) -> f64 {
    3.0 * g * hbar * (hbar.ln() + c_prime).abs() / (PI * omega0)
}

/// The logarithmic width formula is only meaningful for `0 < hbar < 1`.
pub fn rg_width_valid(hbar: f64) -> bool {
    hbar > 0.0 && hbar < 1.0
}

fn ginzburg_scale(hbar: f64, g: f64, dims: u32) -> Result<f64> {
    if dims >= 4 {
        return Err(Error::Config(format!("Ginzburg criterion needs D < 4, got {dims}")));
    }
    Ok((2.0 * g * hbar).powf(2.0 / (4.0 - dims as f64)))
}

/// `(2 g hbar)^(2 / (4 - D)) / Omega0`.
pub fn ginzburg_width_criterion(hbar: f64, g: f64, omega0: f64, dims: u32) -> Result<f64> {
    Ok(ginzburg_scale(hbar, g, dims)? / omega0)
}

/// `Omega0 (eps_tilde - eps_tilde_c) / (2 g hbar)^(2 / (4 - D))`.
pub fn ginzburg_number(
    omega0: f64,
    eps_tilde: f64,
    eps_tilde_c: f64,
    hbar: f64,
    g: f64,
    dims: u32,
) -> Result<f64> {
    Ok(omega0 * (eps_tilde - eps_tilde_c) / ginzburg_scale(hbar, g, dims)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Quantum,
    Classical,
}

/// `|G| > 1` is classical, otherwise quantum critical.
pub fn classify(ginzburg: f64) -> Regime {
    if ginzburg.abs() > 1.0 {
        Regime::Classical
    } else {
        Regime::Quantum
    }
}

/// `Omega0 > 4 g hbar`, equivalent to the criterion width fitting inside the
/// half-unit ramp on the disordered side (two dimensions).
pub fn crossover_in_window(hbar: f64, g: f64, omega0: f64) -> bool {
    omega0 > 4.0 * g * hbar
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalExponents {
    pub nu: f64,
    pub z: f64,
    pub regime: Regime,
}

impl CriticalExponents {
    pub fn quantum() -> Self {
        Self {
            nu: 1.0,
            z: 1.0,
            regime: Regime::Quantum,
        }
    }

    pub fn classical() -> Self {
        Self {
            nu: 0.5,
            z: 1.0,
            regime: Regime::Classical,
        }
    }

    pub fn znu(&self) -> f64 {
        self.z * self.nu
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictedExponents {
    /// `xi ~ tau_q^w_xi`.
    pub w_xi: f64,
    /// Freeze-out time `t_hat ~ tau_q^p`.
    pub p: f64,
}

pub fn predict_exponents(e: &CriticalExponents) -> PredictedExponents {
    let znu = e.znu();
    PredictedExponents {
        w_xi: e.nu / (1.0 + znu),
        p: znu / (1.0 + znu),
    }
}

/// `gap = phi |eps|^znu` on the critical side.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapLaw {
    pub phi: f64,
    pub znu: f64,
    pub fit_window: (f64, f64),
    pub residual: f64,
}

/// Fit `ln gap = ln phi + znu ln|eps|`; a given `znu` fixes the slope.
pub fn fit_gap_law(points: &[(f64, f64)], znu: Option<f64>) -> Result<GapLaw> {
    if points.len() < 2 {
        return Err(Error::Fit("gap law needs at least two points".into()));
    }
    if points.iter().any(|&(e, g)| !(e != 0.0 && g > 0.0)) {
        return Err(Error::Fit("gap law needs nonzero eps and positive gaps".into()));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.abs().ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let (slope, intercept) = match znu {
        Some(s) => {
            let c = ys.iter().zip(&xs).map(|(y, x)| y - s * x).sum::<f64>() / xs.len() as f64;
            (s, c)
        }
        None => {
            let l = line_fit(&xs, &ys)?;
            (l.slope, l.intercept)
        }
    };
    let residual = rms(&xs, &ys, |x| intercept + slope * x);
    let lo = points.iter().map(|p| p.0.abs()).fold(f64::INFINITY, f64::min);
    let hi = points.iter().map(|p| p.0.abs()).fold(0.0, f64::max);
    Ok(GapLaw {
        phi: intercept.exp(),
        znu: slope,
        fit_window: (lo, hi),
        residual,
    })
}

/// `tau_x = znu hbar |eps_x|^(-1 - znu) / phi`.
pub fn crossover_time(exponents: &CriticalExponents, hbar: f64, eps_cross: f64, phi: f64) -> Result<f64> {
    if !(phi > 0.0) {
        return Err(Error::Config(format!("gap prefactor must be positive, got {phi}")));
    }
    let znu = exponents.znu();
    Ok(znu * hbar * eps_cross.abs().powf(-1.0 - znu) / phi)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FreezeOut {
    pub t_hat: f64,
    pub eps_hat: f64,
}

/// Solve `hbar / (phi |eps|^znu) = |eps| tau_q` for the freeze-out point.
pub fn freeze_out(tau_q: f64, gap_law: &GapLaw, hbar: f64) -> FreezeOut {
    let eps_hat = (hbar / (gap_law.phi * tau_q)).powf(1.0 / (1.0 + gap_law.znu));
    FreezeOut {
        t_hat: eps_hat * tau_q,
        eps_hat,
    }
}

/// Regime the freeze-out point falls into for a crossover width `eps_cross`.
pub fn predicted_regime(freeze: &FreezeOut, eps_cross: f64) -> Regime {
    if freeze.eps_hat > eps_cross.abs() {
        Regime::Classical
    } else {
        Regime::Quantum
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum FitWindow {
    /// Drop the two smallest and the two largest `tau_q`.
    Default,
    All,
    /// Drop `low` points at the small end and `high` at the large end.
    Trim { low: usize, high: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossoverFit {
    pub w_fast: f64,
    pub w_fast_err: f64,
    pub w_slow: f64,
    pub w_slow_err: f64,
    /// `None` when the fit fell back to a single power law.
    pub breakpoint: Option<f64>,
    /// Uncertainty of `ln breakpoint`; `None` when the profile has no curvature.
    pub log_breakpoint_err: Option<f64>,
    /// Segments were indistinguishable and a single power law was returned.
    pub fallback: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub exponent: f64,
    pub uncertainty: f64,
    pub prefactor: f64,
    /// `tau_q` range of the points used.
    pub window: (f64, f64),
    /// Root-mean-square residual in `ln value`.
    pub residual: f64,
    pub points: usize,
    pub crossover: Option<CrossoverFit>,
}

struct Line {
    slope: f64,
    intercept: f64,
    slope_err: f64,
}

fn line_fit(xs: &[f64], ys: &[f64]) -> Result<Line> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::Fit("abscissae are all equal".into()));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let dof = (xs.len() as f64 - 2.0).max(1.0);
    Ok(Line {
        slope,
        intercept,
        slope_err: (ssr / dof / sxx).sqrt(),
    })
}

fn rms(xs: &[f64], ys: &[f64], f: impl Fn(f64) -> f64) -> f64 {
    (xs.iter().zip(ys).map(|(x, y)| (y - f(*x)).powi(2)).sum::<f64>() / xs.len() as f64).sqrt()
}

fn sorted_logs(points: &[(f64, f64)]) -> Result<Vec<(f64, f64)>> {
    if points.iter().any(|&(t, v)| !(t > 0.0 && v > 0.0 && t.is_finite() && v.is_finite())) {
        return Err(Error::Fit("power-law fits need positive finite data".into()));
    }
    let mut p: Vec<(f64, f64)> = points.iter().map(|&(t, v)| (t.ln(), v.ln())).collect();
    p.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(p)
}

/// Floor for reported uncertainties on noiseless data.
const MIN_UNCERTAINTY: f64 = 1e-15;

/// Least-squares line through `(ln tau_q, ln value)`.
pub fn fit_powerlaw(points: &[(f64, f64)], window: FitWindow) -> Result<FitResult> {
    let all = sorted_logs(points)?;
    let (low, high) = match window {
        FitWindow::Default => (2, 2),
        FitWindow::All => (0, 0),
        FitWindow::Trim { low, high } => (low, high),
    };
    if all.len() < low + high + 4 {
        return Err(Error::Fit(format!(
            "{} points leave fewer than 4 inside the window",
            all.len()
        )));
    }
    let used = &all[low..all.len() - high];
    let xs: Vec<f64> = used.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = used.iter().map(|p| p.1).collect();
    let l = line_fit(&xs, &ys)?;
    Ok(FitResult {
        exponent: l.slope,
        uncertainty: l.slope_err.max(MIN_UNCERTAINTY),
        prefactor: l.intercept.exp(),
        window: (xs[0].exp(), xs[xs.len() - 1].exp()),
        residual: rms(&xs, &ys, |x| l.intercept + l.slope * x),
        points: xs.len(),
        crossover: None,
    })
}

struct Hinge {
    a: f64,
    w1: f64,
    w2: f64,
    ssr: f64,
    cov_w1: f64,
    cov_w2: f64,
}

/// Continuous two-segment line with the kink at `b`, fitted by solving the
/// 3x3 normal equations for `(a, w1, w2)` in `y = a + w1 min(x-b,0) + w2 max(x-b,0)`.
fn hinge_at(xs: &[f64], ys: &[f64], b: f64) -> Option<Hinge> {
    let basis = |x: f64| [1.0, (x - b).min(0.0), (x - b).max(0.0)];
    let mut m = [[0.0; 3]; 3];
    let mut r = [0.0; 3];
    for (&x, &y) in xs.iter().zip(ys) {
        let f = basis(x);
        for i in 0..3 {
            r[i] += f[i] * y;
            for j in 0..3 {
                m[i][j] += f[i] * f[j];
            }
        }
    }
    let inv = invert3(m)?;
    let c: Vec<f64> = (0..3).map(|i| (0..3).map(|j| inv[i][j] * r[j]).sum()).collect();
    let ssr: f64 = xs
        .iter()
        .zip(ys)
        .map(|(&x, &y)| {
            let f = basis(x);
            (y - c[0] * f[0] - c[1] * f[1] - c[2] * f[2]).powi(2)
        })
        .sum();
    let s2 = ssr / (xs.len() as f64 - 4.0).max(1.0);
    Some(Hinge {
        a: c[0],
        w1: c[1],
        w2: c[2],
        ssr,
        cov_w1: s2 * inv[1][1],
        cov_w2: s2 * inv[2][2],
    })
}

fn invert3(m: [[f64; 3]; 3]) -> Option<[[f64; 3]; 3]> {
    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    let scale = m.iter().flatten().map(|v| v.abs()).fold(0.0, f64::max).powi(3);
    if !(det.abs() > 1e-13 * scale) {
        return None;
    }
    let mut inv = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let (r0, r1) = ((j + 1) % 3, (j + 2) % 3);
            let (c0, c1) = ((i + 1) % 3, (i + 2) % 3);
            inv[i][j] = (m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0]) / det;
        }
    }
    Some(inv)
}

/// Continuous two-segment power law in log-log space with the breakpoint found
/// by a deterministic grid search between the second and the second-to-last
/// point, then refined by golden-section search. `init_break` only adds one
/// more starting candidate.
pub fn fit_crossover(points: &[(f64, f64)], init_break: Option<f64>) -> Result<FitResult> {
    let all = sorted_logs(points)?;
    if all.len() < 8 {
        return Err(Error::Fit(format!("crossover fit needs at least 8 points, got {}", all.len())));
    }
    let xs: Vec<f64> = all.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = all.iter().map(|p| p.1).collect();
    let n = xs.len();
    let (lo, hi) = (xs[1], xs[n - 2]);
    let ssr_at = |b: f64| hinge_at(&xs, &ys, b).map_or(f64::INFINITY, |h| h.ssr);
    const GRID: usize = 400;
    let mut candidates: Vec<f64> = (0..=GRID).map(|k| lo + (hi - lo) * k as f64 / GRID as f64).collect();
    if let Some(b) = init_break.filter(|b| *b > 0.0).map(f64::ln) {
        if b > lo && b < hi {
            candidates.push(b);
        }
    }
    let mut best = candidates[0];
    let mut best_ssr = ssr_at(best);
    for &b in &candidates[1..] {
        let s = ssr_at(b);
        if s < best_ssr {
            best = b;
            best_ssr = s;
        }
    }
    let step = (hi - lo) / GRID as f64;
    let (mut a, mut c) = ((best - step).max(lo), (best + step).min(hi));
    let gr = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..80 {
        let x1 = c - gr * (c - a);
        let x2 = a + gr * (c - a);
        if ssr_at(x1) <= ssr_at(x2) {
            c = x2;
        } else {
            a = x1;
        }
    }
    let refined = 0.5 * (a + c);
    if ssr_at(refined) < best_ssr {
        best = refined;
    }
    let h = hinge_at(&xs, &ys, best).ok_or_else(|| Error::Fit("singular hinge fit".into()))?;
    let single = fit_powerlaw(points, FitWindow::All)?;
    let err1 = h.cov_w1.max(0.0).sqrt().max(MIN_UNCERTAINTY);
    let err2 = h.cov_w2.max(0.0).sqrt().max(MIN_UNCERTAINTY);
    let combined = (err1 * err1 + err2 * err2).sqrt();
    let degenerate = (h.w1 - h.w2).abs() <= (2.0 * combined).max(1e-6);
    // curvature of the profile SSR gives the breakpoint spread
    let hstep = (hi - lo) * 1e-3;
    let s2 = (h.ssr / (n as f64 - 4.0).max(1.0)).max(f64::MIN_POSITIVE);
    let curv = (ssr_at((best + hstep).min(hi)) - 2.0 * h.ssr + ssr_at((best - hstep).max(lo))) / (hstep * hstep);
    let log_breakpoint_err = (curv > 0.0).then(|| (2.0 * s2 / curv).sqrt());
    let residual = (h.ssr / n as f64).sqrt();
    if degenerate {
        return Ok(FitResult {
            crossover: Some(CrossoverFit {
                w_fast: single.exponent,
                w_fast_err: single.uncertainty,
                w_slow: single.exponent,
                w_slow_err: single.uncertainty,
                breakpoint: None,
                log_breakpoint_err: None,
                fallback: true,
            }),
            ..single
        });
    }
    Ok(FitResult {
        exponent: h.w2,
        uncertainty: err2,
        prefactor: (h.a - h.w2 * best).exp(),
        window: (xs[0].exp(), xs[n - 1].exp()),
        residual,
        points: n,
        crossover: Some(CrossoverFit {
            w_fast: h.w1,
            w_fast_err: err1,
            w_slow: h.w2,
            w_slow_err: err2,
            breakpoint: Some(best.exp()),
            log_breakpoint_err,
            fallback: false,
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::local_solver::ion_chain_g;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn width_values() {
        let g = ion_chain_g();
        assert!((ginzburg_width_rg(0.1, g, 9.0) - 0.030_2).abs() < 5e-5);
        assert!(ginzburg_width_rg((-C_PRIME).exp(), g, 9.0).abs() < 1e-14);
        let c = ginzburg_width_criterion(0.1, g, 9.0, 2).unwrap();
        assert!((c - 2.0 * g * 0.1 / 9.0).abs() < 1e-15);
        assert!((c - 0.1932).abs() < 1e-4);
        assert!(ginzburg_width_criterion(0.1, g, 9.0, 4).is_err());
        let r = ginzburg_width_rg(0.1, g, 9.0);
        assert!((ginzburg_width_rg(0.1, 2.0 * g, 9.0) - 2.0 * r).abs() < 1e-15);
        assert!((ginzburg_width_rg(0.1, g, 18.0) - 0.5 * r).abs() < 1e-15);
    }

    #[test]
    fn ginzburg_number_unity_at_width() {
        let g = ion_chain_g();
        let w = ginzburg_width_criterion(0.1, g, 9.0, 2).unwrap();
        let n = ginzburg_number(9.0, -0.3 + w, -0.3, 0.1, g, 2).unwrap();
        assert!((n - 1.0).abs() < 1e-14);
        assert_eq!(classify(10.0), Regime::Classical);
        assert_eq!(classify(0.5), Regime::Quantum);
        assert_eq!(ginzburg_number(9.0, -0.3, -0.3, 0.1, g, 2).unwrap(), 0.0);
    }

    #[test]
    fn threshold_identity() {
        let g = ion_chain_g();
        assert!((4.0 * g * 0.1 - 3.478).abs() < 1e-3);
        for omega0 in [1.0, 3.0, 3.47, 3.49, 5.0, 9.0, 30.0] {
            let inside = ginzburg_width_criterion(0.1, g, omega0, 2).unwrap() < 0.5;
            assert_eq!(inside, crossover_in_window(0.1, g, omega0));
        }
    }

    #[test]
    fn exponent_presets() {
        let q = predict_exponents(&CriticalExponents::quantum());
        assert_eq!((q.w_xi, q.p), (0.5, 0.5));
        let c = predict_exponents(&CriticalExponents::classical());
        assert!((c.w_xi - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn crossover_time_examples() {
        let q = CriticalExponents::quantum();
        let t = crossover_time(&q, 0.1, 0.0302, 1.0).unwrap();
        assert!((t - 109.64).abs() < 0.01);
        assert_eq!(crossover_time(&q, 1.0, 1.0, 1.0).unwrap(), 1.0);
        let t2 = crossover_time(&q, 0.2, 0.0302, 1.0).unwrap();
        assert!((t2 - 2.0 * t).abs() < 1e-12);
        assert!(crossover_time(&q, 0.1, 0.03, 0.0).is_err());
    }

    #[test]
    fn freeze_out_closed_form() {
        let law = GapLaw {
            phi: 1.0,
            znu: 1.0,
            fit_window: (0.0, 1.0),
            residual: 0.0,
        };
        let f = freeze_out(100.0, &law, 1.0);
        assert!((f.eps_hat - 0.1).abs() < 1e-15);
        assert!((f.t_hat - 10.0).abs() < 1e-13);
        let pts: Vec<(f64, f64)> = [10.0, 100.0, 1e3, 1e4, 1e5]
            .iter()
            .map(|&t| (t, freeze_out(t, &law, 1.0).t_hat))
            .collect();
        let fit = fit_powerlaw(&pts, FitWindow::All).unwrap();
        assert!((fit.exponent - 0.5).abs() < 1e-6);
    }

    #[test]
    fn gap_law_recovers_prefactor() {
        let pts: Vec<(f64, f64)> = [-0.1, -0.2, -0.3].iter().map(|&e: &f64| (e, 2.5 * e.abs())).collect();
        let free = fit_gap_law(&pts, None).unwrap();
        assert!((free.phi - 2.5).abs() < 1e-12 && (free.znu - 1.0).abs() < 1e-12);
        let fixed = fit_gap_law(&pts, Some(1.0)).unwrap();
        assert!((fixed.phi - 2.5).abs() < 1e-12);
    }

    #[test]
    fn powerlaw_exact_and_noisy() {
        let pts: Vec<(f64, f64)> = (0..8).map(|k| 10f64.powf(k as f64 / 3.0)).map(|t| (t, 3.0 * t.sqrt())).collect();
        let f = fit_powerlaw(&pts, FitWindow::Default).unwrap();
        assert!((f.exponent - 0.5).abs() < 1e-10);
        assert!((f.prefactor - 3.0).abs() < 1e-9);
        assert_eq!(f.points, 4);
        assert!(f.uncertainty > 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let noise = Normal::new(0.0, 0.05).unwrap();
        let noisy: Vec<(f64, f64)> = (0..10)
            .map(|k| 10f64.powf(k as f64 / 3.0))
            .map(|t| (t, 3.0 * t.sqrt() * (1.0 + noise.sample(&mut rng))))
            .collect();
        let f = fit_powerlaw(&noisy, FitWindow::All).unwrap();
        assert!((f.exponent - 0.5).abs() < 0.05);
        assert!(fit_powerlaw(&pts[..5], FitWindow::Default).is_err());
        assert!(fit_powerlaw(&[(1.0, 1.0), (2.0, -1.0), (3.0, 1.0), (4.0, 1.0)], FitWindow::All).is_err());
    }

    fn kinked(t: f64) -> f64 {
        let tb: f64 = 7.0;
        if t < tb {
            tb.powf(0.5) * (t / tb).powf(1.0 / 3.0)
        } else {
            t.powf(0.5)
        }
    }

    #[test]
    fn crossover_recovers_kink() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let noise = Normal::new(0.0, 0.005).unwrap();
        let pts: Vec<(f64, f64)> = (0..16)
            .map(|k| 0.5 * 10f64.powf(k as f64 * 3.0 / 15.0))
            .map(|t| (t, kinked(t) * (1.0 + noise.sample(&mut rng))))
            .collect();
        let f = fit_crossover(&pts, None).unwrap();
        let c = f.crossover.unwrap();
        assert!(!c.fallback);
        let b = c.breakpoint.unwrap();
        assert!((b / 7.0 - 1.0).abs() < 0.05, "{b}");
        assert!(c.w_fast < c.w_slow);
    }

    #[test]
    fn pure_power_law_falls_back() {
        let pts: Vec<(f64, f64)> = (0..10).map(|k| 2f64.powi(k)).map(|t| (t, t.powf(0.4))).collect();
        let f = fit_crossover(&pts, Some(8.0)).unwrap();
        assert!(f.crossover.unwrap().fallback);
        assert!((f.exponent - 0.4).abs() < 1e-10);
    }
}
