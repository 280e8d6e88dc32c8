//! One table builder per command.

use anyhow::{Context, Result};
use inopo::criteria::{
    analytic_criteria, power_budget, simulated_criteria, theta_sweep_analytic,
    theta_sweep_simulated, CriteriaResult,
};
use inopo::estimator::{simulate_spectra, SegmentPlan, SimulatedSpectra};
use inopo::linear_spectra::{coefficients, intracavity_value, output_matrix, Quadrature};
use inopo::stability::{drift_matrices, eigenvalues, hurwitz_report};
use inopo::steady_state::{
    approx_above, approx_at_threshold, approx_below, approximate_steady_state,
    fixed_point_polynomial,
};
use inopo::{steady_state, ScaledParams};
use serde_json::Value;

use crate::config::{Command, Curve, Method, RunConfig, SteadyChoice};
use crate::output::Table;

/// Band around μ0 = 1 treated as "at threshold" by the approximations.
const THRESHOLD_BAND: f64 = 0.05;

fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

fn scaled(cfg: &RunConfig, mu0: f64, mu1: f64) -> Result<ScaledParams> {
    let p = &cfg.params;
    ScaledParams::new(mu0, mu1, p.gamma_r, p.g, p.phi).context("params")
}

/// Every (μ0, μ1) pair of the two grids, μ1 varying fastest.
fn pairs(cfg: &RunConfig) -> Vec<(f64, f64)> {
    let p = &cfg.params;
    p.mu0
        .values()
        .iter()
        .flat_map(|&a| p.mu1.values().iter().map(move |&b| (a, b)))
        .collect()
}

pub fn run_command(cfg: &RunConfig) -> Result<Table> {
    match cfg.command {
        Command::SteadySweep => match cfg.params.curve {
            Curve::FixedPoint => steady_sweep(cfg),
            Curve::Polynomial => polynomial_curves(cfg),
        },
        Command::StabilityMap => stability_map(cfg),
        Command::LinearSpectra => linear_spectra(cfg),
        Command::Simulate => simulate(cfg),
        Command::Criteria => criteria(cfg),
        Command::ThetaSweep => theta_sweep(cfg),
        Command::Power => power(cfg),
    }
}

fn steady_sweep(cfg: &RunConfig) -> Result<Table> {
    let mut t = Table::new(&[
        "mu0",
        "mu1",
        "x0s",
        "x1s",
        "x2s",
        "stable",
        "x0s_linear",
        "x0s_quadratic",
        "x0s_quartic",
    ]);
    for (mu0, mu1) in pairs(cfg) {
        let ss = steady_state(&scaled(cfg, mu0, mu1)?);
        let (x0, x1, x2, stable) = match &ss {
            Ok(s) => (s.x0s, s.x1s, s.x2s, flag(s.stable)),
            Err(e) => {
                log::warn!("mu0 = {mu0}, mu1 = {mu1}: {e}");
                (f64::NAN, f64::NAN, f64::NAN, f64::NAN)
            }
        };
        let linear = if mu0 < 1.0 {
            approx_below(mu0, mu1)
        } else {
            f64::NAN
        };
        let quadratic = approx_above(mu0, mu1).unwrap_or(f64::NAN);
        let quartic = if mu1 > 0.0 {
            approx_at_threshold(mu1)
        } else {
            2.0
        };
        t.push(vec![
            mu0, mu1, x0, x1, x2, stable, linear, quadratic, quartic,
        ]);
    }
    Ok(t)
}

/// Local approximation of the fixed-point quintic used in each regime:
/// the tangent line at 2μ0 below threshold, the tangent parabola at 2
/// above it, and the fourth-order expansion at 2 on threshold.
fn local_approximation(mu0: f64, x: f64) -> f64 {
    if (mu0 - 1.0).abs() < THRESHOLD_BAND {
        let e = x - 2.0;
        -e.powi(3) - e.powi(4) / 2.0
    } else if mu0 < 1.0 {
        -(1.0 - mu0 * mu0).powi(2) * (x - 2.0 * mu0)
    } else {
        2.0 * (mu0 - 1.0) * (2.0 - x).powi(2)
    }
}

fn polynomial_curves(cfg: &RunConfig) -> Result<Table> {
    let mut t = Table::new(&["mu0", "mu1", "x", "p5", "injection_line", "approximation"]);
    for (mu0, mu1) in pairs(cfg) {
        let quintic = fixed_point_polynomial(mu0, 0.0);
        for &x in cfg.params.x.values() {
            t.push(vec![
                mu0,
                mu1,
                x,
                quintic.eval(x),
                2.0 * mu1 * mu1 * x,
                local_approximation(mu0, x),
            ]);
        }
    }
    Ok(t)
}

fn stability_map(cfg: &RunConfig) -> Result<Table> {
    let mut t = Table::new(&[
        "mu0",
        "mu1",
        "x0s",
        "reduced_condition",
        "stable",
        "marginal",
        "max_re_eigenvalue",
    ]);
    let gamma_r = cfg.params.gamma_r;
    for (mu0, mu1) in pairs(cfg) {
        let row = match steady_state(&scaled(cfg, mu0, mu1)?) {
            Ok(ss) => {
                let h = hurwitz_report(&ss, gamma_r);
                let dm = drift_matrices(&ss, gamma_r);
                let max_re = eigenvalues(&dm.mx)
                    .iter()
                    .chain(eigenvalues(&dm.my).iter())
                    .map(|z| z.re)
                    .fold(f64::NEG_INFINITY, f64::max);
                vec![
                    mu0,
                    mu1,
                    ss.x0s,
                    h.reduced_condition_value,
                    flag(h.stable),
                    flag(h.marginal),
                    max_re,
                ]
            }
            Err(e) => {
                log::warn!("mu0 = {mu0}, mu1 = {mu1}: {e}");
                vec![mu0, mu1, f64::NAN, f64::NAN, f64::NAN, f64::NAN, f64::NAN]
            }
        };
        t.push(row);
    }
    Ok(t)
}

fn linear_spectra(cfg: &RunConfig) -> Result<Table> {
    let mut t = Table::new(&[
        "mu0",
        "mu1",
        "omega",
        "s_xminus",
        "s_yplus",
        "s_xplus",
        "s_yminus",
        "s_x_cross",
        "s_y_cross",
    ]);
    let mut extrapolated = false;
    for (mu0, mu1) in pairs(cfg) {
        let ss = steady_state(&scaled(cfg, mu0, mu1)?)
            .with_context(|| format!("mu0 = {mu0}, mu1 = {mu1}"))?;
        extrapolated |= mu0 > 1.0;
        let co = coefficients(&ss);
        for &w in cfg.params.omega.values() {
            let m = output_matrix(&co, ss.x0s, w);
            t.push(vec![
                mu0, mu1, w, m[1][1], m[2][2], m[0][0], m[3][3], m[0][1], m[2][3],
            ]);
        }
    }
    t.stats
        .insert("extrapolated".into(), Value::Bool(extrapolated));
    Ok(t)
}

fn run_simulation(cfg: &RunConfig, mu0: f64, mu1: f64) -> Result<SimulatedSpectra> {
    let sim = simulate_spectra(&scaled(cfg, mu0, mu1)?, &cfg.sim, &cfg.psd)?;
    log::info!(
        "mu0 = {mu0}, mu1 = {mu1}: {} trajectories, {} diverged",
        sim.n_total,
        sim.diverged.len()
    );
    Ok(sim)
}

struct Counts {
    trajectories: usize,
    diverged: usize,
}

impl Counts {
    fn new() -> Self {
        Self {
            trajectories: 0,
            diverged: 0,
        }
    }

    fn add(&mut self, s: &SimulatedSpectra) {
        self.trajectories += s.n_total;
        self.diverged += s.diverged.len();
    }

    fn store(&self, t: &mut Table) {
        t.stats
            .insert("trajectories".into(), self.trajectories.into());
        t.stats.insert("diverged".into(), self.diverged.into());
    }
}

fn simulate(cfg: &RunConfig) -> Result<Table> {
    let mut t = Table::new(&[
        "mu0",
        "mu1",
        "omega",
        "s_xminus",
        "s_xminus_se",
        "s_yplus",
        "s_yplus_se",
        "s_xplus",
        "s_xplus_se",
        "s_yminus",
        "s_yminus_se",
        "linear_xminus",
        "linear_yplus",
        "windowed_xminus",
        "windowed_yplus",
    ]);
    let plan = SegmentPlan::new(&cfg.psd, cfg.sim.dt * cfg.psd.sample_stride as f64)?;
    let mut counts = Counts::new();
    for (mu0, mu1) in pairs(cfg) {
        let sim = run_simulation(cfg, mu0, mu1)?;
        counts.add(&sim);
        let ss = steady_state(&scaled(cfg, mu0, mu1)?)?;
        let co = coefficients(&ss);
        let linear = |q: Quadrature, w: f64| 1.0 + 2.0 * intracavity_value(q, &co, ss.x0s, w);
        let windowed = |q: Quadrature| -> Vec<f64> {
            plan.expected_estimate(|w| intracavity_value(q, &co, ss.x0s, w))
                .iter()
                .map(|v| 1.0 + 2.0 * v)
                .collect()
        };
        let (wx, wy) = (windowed(Quadrature::XMinus), windowed(Quadrature::YPlus));
        let order = [
            Quadrature::XMinus,
            Quadrature::YPlus,
            Quadrature::XPlus,
            Quadrature::YMinus,
        ];
        let spectra = order.map(|q| sim.output_spectrum(q, q));
        for (k, &w) in sim.omega().iter().enumerate() {
            let mut row = vec![mu0, mu1, w];
            for s in &spectra {
                row.push(s.values[k]);
                row.push(s.std_err.as_ref().map_or(f64::NAN, |e| e[k]));
            }
            row.extend([
                linear(Quadrature::XMinus, w),
                linear(Quadrature::YPlus, w),
                wx[k],
                wy[k],
            ]);
            t.push(row);
        }
    }
    counts.store(&mut t);
    Ok(t)
}

const CRITERIA_COLUMNS: [&str; 7] = [
    "duan",
    "epr",
    "epr_mode2",
    "duan_violated",
    "epr_violated",
    "duan_se",
    "epr_se",
];

fn criteria_rows(t: &mut Table, prefix: &[f64], r: &CriteriaResult) {
    for k in 0..r.axis.len() {
        let se = |e: &Option<Vec<f64>>| e.as_ref().map_or(f64::NAN, |v| v[k]);
        let mut row = prefix.to_vec();
        row.extend([
            r.axis[k],
            r.duan.values[k],
            r.epr.values[k],
            r.epr_mode2.values[k],
            flag(r.duan.violated[k]),
            flag(r.epr.violated[k]),
            se(&r.duan_std_err),
            se(&r.epr_std_err),
        ]);
        t.push(row);
    }
}

fn criteria_table(lead: &[&str]) -> Table {
    let cols: Vec<&str> = lead.iter().copied().chain(CRITERIA_COLUMNS).collect();
    Table::new(&cols)
}

fn criteria(cfg: &RunConfig) -> Result<Table> {
    let mut t = criteria_table(&["mu0", "mu1", "theta", "omega"]);
    let mut counts = Counts::new();
    let mut extrapolated = false;
    for (mu0, mu1) in pairs(cfg) {
        match cfg.params.method {
            Method::Analytic => {
                let ss = steady_state(&scaled(cfg, mu0, mu1)?)
                    .with_context(|| format!("mu0 = {mu0}, mu1 = {mu1}"))?;
                extrapolated |= mu0 > 1.0;
                for &theta in cfg.params.theta.values() {
                    let r = analytic_criteria(&ss, cfg.params.omega.values(), theta);
                    criteria_rows(&mut t, &[mu0, mu1, theta], &r);
                }
            }
            Method::Simulated => {
                let sim = run_simulation(cfg, mu0, mu1)?;
                counts.add(&sim);
                for &theta in cfg.params.theta.values() {
                    let r = simulated_criteria(&sim, theta, cfg.params.blocks);
                    criteria_rows(&mut t, &[mu0, mu1, theta], &r);
                }
            }
        }
    }
    match cfg.params.method {
        Method::Analytic => {
            t.stats
                .insert("extrapolated".into(), Value::Bool(extrapolated));
        }
        Method::Simulated => counts.store(&mut t),
    }
    Ok(t)
}

fn theta_sweep(cfg: &RunConfig) -> Result<Table> {
    let mut t = criteria_table(&["mu0", "mu1", "theta"]);
    let mut counts = Counts::new();
    let mut extrapolated = false;
    let thetas = cfg.params.theta.values();
    for (mu0, mu1) in pairs(cfg) {
        let r = match cfg.params.method {
            Method::Analytic => {
                let r = theta_sweep_analytic(&scaled(cfg, mu0, mu1)?, thetas)
                    .with_context(|| format!("mu0 = {mu0}, mu1 = {mu1}"))?;
                extrapolated |= r.extrapolated;
                r
            }
            Method::Simulated => {
                let sim = run_simulation(cfg, mu0, mu1)?;
                counts.add(&sim);
                theta_sweep_simulated(&sim, thetas, cfg.params.blocks)
            }
        };
        criteria_rows(&mut t, &[mu0, mu1], &r);
    }
    match cfg.params.method {
        Method::Analytic => {
            t.stats
                .insert("extrapolated".into(), Value::Bool(extrapolated));
        }
        Method::Simulated => counts.store(&mut t),
    }
    Ok(t)
}

fn power(cfg: &RunConfig) -> Result<Table> {
    let mut t = Table::new(&[
        "mu0",
        "mu1",
        "x0s",
        "x1s",
        "x2s",
        "p0_mw",
        "p1_mw",
        "p1_out_mw",
        "p2_out_mw",
    ]);
    let pw = &cfg.power;
    for (mu0, mu1) in pairs(cfg) {
        let params = scaled(cfg, mu0, mu1)?;
        let ss = match pw.steady_state {
            SteadyChoice::Approximate => approximate_steady_state(&params),
            SteadyChoice::Exact => steady_state(&params),
        }
        .with_context(|| format!("mu0 = {mu0}, mu1 = {mu1}"))?;
        let b = power_budget(pw.pth_mw, mu0, mu1, &ss, pw.w1_over_w0, pw.w2_over_w0)?;
        t.push(vec![
            mu0, mu1, ss.x0s, ss.x1s, ss.x2s, b.p0, b.p1, b.p1_out, b.p2_out,
        ]);
    }
    Ok(t)
}
