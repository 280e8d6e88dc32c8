//! Integration of the full scaled positive-P quadrature equations.
//!
//! Each trajectory owns a ChaCha stream selected by its index, so ensembles
//! are reproducible and independent of scheduling. Trajectories whose
//! components escape past the divergence threshold are flagged and excluded
//! from statistics.

use std::io::Write;
use std::ops::Range;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::{QuadratureState, ScaledParams};
use crate::steady_state::steady_state;

/// Time-stepping scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Explicit Euler–Maruyama.
    Euler,
    /// Drift evaluated at the midpoint by fixed-point iteration, noise at the
    /// start of the step (keeps the Itô interpretation).
    SemiImplicit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub dt: f64,
    pub t_total: f64,
    pub burn_in: f64,
    pub n_trajectories: usize,
    pub seed: u64,
    pub divergence_threshold: f64,
    pub scheme: Scheme,
    /// Steps between recorded samples in trajectory series and ensemble
    /// means.
    pub record_stride: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 0.005,
            t_total: 200.0,
            burn_in: 20.0,
            n_trajectories: 1000,
            seed: 1,
            divergence_threshold: 1e3,
            scheme: Scheme::Euler,
            record_stride: 100,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(invalid("dt", format!("must be > 0, got {}", self.dt)));
        }
        if !(self.t_total > 0.0 && self.t_total.is_finite()) {
            return Err(invalid(
                "t_total",
                format!("must be > 0, got {}", self.t_total),
            ));
        }
        if !(self.burn_in >= 0.0 && self.burn_in < self.t_total) {
            return Err(invalid(
                "burn_in",
                format!("must lie in [0, t_total), got {}", self.burn_in),
            ));
        }
        if !(self.divergence_threshold > 10.0) {
            return Err(invalid(
                "divergence_threshold",
                format!("must exceed 10, got {}", self.divergence_threshold),
            ));
        }
        if self.record_stride == 0 {
            return Err(invalid("record_stride", "must be >= 1"));
        }
        Ok(())
    }

    pub fn n_steps(&self) -> usize {
        (self.t_total / self.dt).round() as usize
    }

    pub fn burn_in_steps(&self) -> usize {
        (self.burn_in / self.dt).round() as usize
    }
}

/// Independent random stream for one trajectory.
pub fn trajectory_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Complex Wiener increments for one step, with `⟨dw_x1 dw_x2⟩ =
/// ⟨dw_y1 dw_y2⟩ = dt` and every other second moment zero.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NoiseIncrement {
    pub dw_x1: Complex64,
    pub dw_y1: Complex64,
    pub dw_x2: Complex64,
    pub dw_y2: Complex64,
}

impl NoiseIncrement {
    /// Per-mode increments `(dw1, dw1⁺, dw2, dw2⁺)` with
    /// `dw_k = (dw_xk + dw_yk)/√2` and `dw_k⁺ = (dw_xk − dw_yk)/√2`.
    pub fn mode_increments(&self) -> [Complex64; 4] {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        [
            (self.dw_x1 + self.dw_y1) * r,
            (self.dw_x1 - self.dw_y1) * r,
            (self.dw_x2 + self.dw_y2) * r,
            (self.dw_x2 - self.dw_y2) * r,
        ]
    }
}

pub fn draw_noise<R: Rng + ?Sized>(rng: &mut R, dt: f64) -> NoiseIncrement {
    let s = (0.5 * dt).sqrt();
    let mut pair = || {
        let a: f64 = rng.sample(StandardNormal);
        let b: f64 = rng.sample(StandardNormal);
        (Complex64::new(s * a, s * b), Complex64::new(s * a, -s * b))
    };
    let (dw_x1, dw_x2) = pair();
    let (dw_y1, dw_y2) = pair();
    NoiseIncrement {
        dw_x1,
        dw_y1,
        dw_x2,
        dw_y2,
    }
}

/// Deterministic part of the scaled quadrature equations.
pub fn drift(s: &QuadratureState, p: &ScaledParams) -> QuadratureState {
    let QuadratureState {
        x0,
        y0,
        x1,
        y1,
        x2,
        y2,
    } = *s;
    let gr = p.gamma_r;
    QuadratureState {
        x0: -(x0 - 2.0 * p.mu0 + (x1 * x2 - y1 * y2)) * gr,
        y0: -(y0 + (x1 * y2 + y1 * x2)) * gr,
        x1: -x1 + 2.0 * p.mu1 + (x0 * x2 + y0 * y2) * 0.5,
        y1: -y1 + (x2 * y0 - y2 * x0) * 0.5,
        x2: -x2 + (x0 * x1 + y0 * y1) * 0.5,
        y2: -y2 + (x1 * y0 - y1 * x0) * 0.5,
    }
}

/// Noise factors `(g/√2)·√(x0 + iy0)` and `(g/√2)·√(x0 − iy0)`,
/// principal branch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diffusion {
    pub plus: Complex64,
    pub minus: Complex64,
}

pub fn diffusion_amplitudes(s: &QuadratureState, g: f64) -> Diffusion {
    let i = Complex64::i();
    let k = g * std::f64::consts::FRAC_1_SQRT_2;
    Diffusion {
        plus: (s.x0 + i * s.y0).sqrt() * k,
        minus: (s.x0 - i * s.y0).sqrt() * k,
    }
}

/// Stochastic increment of the state for one step.
pub fn noise_term(d: &Diffusion, n: &NoiseIncrement) -> QuadratureState {
    let [w1, w1p, w2, w2p] = n.mode_increments();
    let mi = Complex64::new(0.0, -1.0);
    QuadratureState {
        x0: Complex64::default(),
        y0: Complex64::default(),
        x1: d.plus * w1 + d.minus * w1p,
        y1: mi * (d.plus * w1 - d.minus * w1p),
        x2: d.plus * w2 + d.minus * w2p,
        y2: mi * (d.plus * w2 - d.minus * w2p),
    }
}

pub fn step(
    s: &QuadratureState,
    p: &ScaledParams,
    scheme: Scheme,
    dt: f64,
    noise: &NoiseIncrement,
) -> QuadratureState {
    let kick = if p.g == 0.0 {
        QuadratureState::default()
    } else {
        noise_term(&diffusion_amplitudes(s, p.g), noise)
    };
    match scheme {
        Scheme::Euler => *s + drift(s, p) * dt + kick,
        Scheme::SemiImplicit => {
            let base = *s + kick;
            let mut next = base + drift(s, p) * dt;
            for _ in 0..3 {
                let mid = (*s + next) * 0.5;
                next = base + drift(&mid, p) * dt;
            }
            next
        }
    }
}

/// Steps one trajectory from `start`, calling `visit(step, t, state)` for the
/// initial state and after every step. Returns the divergence time, if any;
/// no further visits happen after divergence.
pub fn integrate<F>(
    params: &ScaledParams,
    cfg: &SimConfig,
    index: u64,
    start: QuadratureState,
    mut visit: F,
) -> Option<f64>
where
    F: FnMut(usize, f64, &QuadratureState),
{
    let mut rng = trajectory_rng(cfg.seed, index);
    let mut s = start;
    visit(0, 0.0, &s);
    for n in 1..=cfg.n_steps() {
        let noise = draw_noise(&mut rng, cfg.dt);
        s = step(&s, params, cfg.scheme, cfg.dt, &noise);
        let t = n as f64 * cfg.dt;
        if !s.is_finite() || s.max_norm() > cfg.divergence_threshold {
            return Some(t);
        }
        visit(n, t, &s);
    }
    None
}

/// Classical steady state as a starting point; the uninjected oscillator
/// above threshold starts from its degenerate fixed point.
pub fn initial_state(params: &ScaledParams) -> Result<QuadratureState> {
    Ok(steady_state(params)?.as_state())
}

/// Recorded samples of one trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySeries {
    pub index: u64,
    pub times: Vec<f64>,
    pub states: Vec<QuadratureState>,
    pub diverged_at: Option<f64>,
}

impl TrajectorySeries {
    pub fn diverged(&self) -> bool {
        self.diverged_at.is_some()
    }
}

pub fn simulate_trajectory(
    params: &ScaledParams,
    cfg: &SimConfig,
    index: u64,
) -> Result<TrajectorySeries> {
    simulate_trajectory_from(params, cfg, index, initial_state(params)?)
}

pub fn simulate_trajectory_from(
    params: &ScaledParams,
    cfg: &SimConfig,
    index: u64,
    start: QuadratureState,
) -> Result<TrajectorySeries> {
    params.validate()?;
    cfg.validate()?;
    let cap = cfg.n_steps() / cfg.record_stride + 1;
    let mut times = Vec::with_capacity(cap);
    let mut states = Vec::with_capacity(cap);
    let diverged_at = integrate(params, cfg, index, start, |n, t, s| {
        if n % cfg.record_stride == 0 {
            times.push(t);
            states.push(*s);
        }
    });
    Ok(TrajectorySeries {
        index,
        times,
        states,
        diverged_at,
    })
}

/// Runs `f` on every trajectory index in `range` in parallel and returns the
/// results in index order.
pub fn map_trajectories<T, F>(range: Range<u64>, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    range.into_par_iter().map(f).collect()
}

/// Order-independent sum of floats: values are rounded to multiples of
/// 2⁻⁶⁰ and added as integers, so any split of an ensemble pools to
/// bit-identical totals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ExactSum(i128);

impl ExactSum {
    const SCALE: f64 = (1u64 << 60) as f64;

    pub fn add(&mut self, v: f64) {
        self.0 += (v * Self::SCALE).round() as i128;
    }

    pub fn merge(&mut self, other: ExactSum) {
        self.0 += other.0;
    }

    pub fn value(&self) -> f64 {
        self.0 as f64 / Self::SCALE
    }
}

/// Per-sample sums of one quadrature component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
struct ComponentSums {
    re: ExactSum,
    im: ExactSum,
    re_sq: ExactSum,
    im_sq: ExactSum,
}

impl ComponentSums {
    fn add(&mut self, c: Complex64) {
        self.re.add(c.re);
        self.im.add(c.im);
        self.re_sq.add(c.re * c.re);
        self.im_sq.add(c.im * c.im);
    }

    fn merge(&mut self, o: &ComponentSums) {
        self.re.merge(o.re);
        self.im.merge(o.im);
        self.re_sq.merge(o.re_sq);
        self.im_sq.merge(o.im_sq);
    }
}

/// Ensemble statistics of the recorded samples, over non-diverged
/// trajectories.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EnsembleSummary {
    pub times: Vec<f64>,
    pub n_total: usize,
    pub n_used: usize,
    pub diverged: Vec<(u64, f64)>,
    sums: Vec<[ComponentSums; 6]>,
}

impl EnsembleSummary {
    fn add(&mut self, series: &TrajectorySeries) {
        self.n_total += 1;
        if let Some(t) = series.diverged_at {
            self.diverged.push((series.index, t));
            return;
        }
        if self.sums.is_empty() {
            self.times = series.times.clone();
            self.sums = vec![[ComponentSums::default(); 6]; series.times.len()];
        }
        for (i, s) in series.states.iter().enumerate() {
            for (k, c) in s.to_array().into_iter().enumerate() {
                self.sums[i][k].add(c);
            }
        }
        self.n_used += 1;
    }

    /// Pools another summary into this one.
    pub fn merge(&mut self, other: &EnsembleSummary) {
        self.n_total += other.n_total;
        self.n_used += other.n_used;
        self.diverged.extend(other.diverged.iter().copied());
        self.diverged.sort_by_key(|d| d.0);
        if self.sums.is_empty() {
            self.times = other.times.clone();
            self.sums = other.sums.clone();
            return;
        }
        for (mine, theirs) in self.sums.iter_mut().zip(&other.sums) {
            for k in 0..6 {
                mine[k].merge(&theirs[k]);
            }
        }
    }

    pub fn n_diverged(&self) -> usize {
        self.diverged.len()
    }

    pub fn diverged_fraction(&self) -> f64 {
        if self.n_total == 0 {
            0.0
        } else {
            self.diverged.len() as f64 / self.n_total as f64
        }
    }

    /// Ensemble mean at sample `i`.
    pub fn mean(&self, i: usize) -> QuadratureState {
        let n = self.n_used.max(1) as f64;
        QuadratureState::from_array(
            self.sums[i].map(|c| Complex64::new(c.re.value() / n, c.im.value() / n)),
        )
    }

    /// Standard error of the mean at sample `i`, real and imaginary parts
    /// separately, in `[x0, y0, x1, y1, x2, y2]` order.
    pub fn std_err(&self, i: usize) -> [Complex64; 6] {
        let n = self.n_used as f64;
        if self.n_used < 2 {
            return [Complex64::new(f64::NAN, f64::NAN); 6];
        }
        self.sums[i].map(|c| {
            let (m_re, m_im) = (c.re.value() / n, c.im.value() / n);
            let var_re = ((c.re_sq.value() - n * m_re * m_re) / (n - 1.0)).max(0.0);
            let var_im = ((c.im_sq.value() - n * m_im * m_im) / (n - 1.0)).max(0.0);
            Complex64::new((var_re / n).sqrt(), (var_im / n).sqrt())
        })
    }
}

/// Runs the trajectories with indices in `range` without the divergence
/// policy check.
pub fn run_ensemble_range(
    params: &ScaledParams,
    cfg: &SimConfig,
    range: Range<u64>,
) -> Result<EnsembleSummary> {
    params.validate()?;
    cfg.validate()?;
    let start = initial_state(params)?;
    let runs = map_trajectories(range, |i| simulate_trajectory_from(params, cfg, i, start));
    let mut summary = EnsembleSummary::default();
    for run in runs {
        summary.add(&run?);
    }
    Ok(summary)
}

/// Runs `cfg.n_trajectories` trajectories and enforces the divergence
/// policy: more than 1% diverged is a sampling breakdown.
pub fn run_ensemble(params: &ScaledParams, cfg: &SimConfig) -> Result<EnsembleSummary> {
    let summary = run_ensemble_range(params, cfg, 0..cfg.n_trajectories as u64)?;
    check_divergence(params, cfg, summary.n_diverged(), summary.n_total)?;
    Ok(summary)
}

pub fn check_divergence(
    params: &ScaledParams,
    cfg: &SimConfig,
    diverged: usize,
    total: usize,
) -> Result<()> {
    if diverged > 0 {
        log::warn!("{diverged} of {total} trajectories diverged");
    }
    if total > 0 && diverged as f64 > 0.01 * total as f64 {
        return Err(Error::SamplingBreakdown {
            diverged,
            total,
            mu0: params.mu0,
            mu1: params.mu1,
            gamma_r: params.gamma_r,
            g: params.g,
            dt: cfg.dt,
        });
    }
    Ok(())
}

/// Writes one trajectory as `t` plus real and imaginary parts of the six
/// quadratures, preceded by `#` header lines with the parameters.
pub fn write_trajectory<W: Write>(
    mut w: W,
    series: &TrajectorySeries,
    params: &ScaledParams,
    cfg: &SimConfig,
) -> std::io::Result<()> {
    writeln!(
        w,
        "# mu0 = {}, mu1 = {}, gamma_r = {}, g = {}, phi = {}",
        params.mu0, params.mu1, params.gamma_r, params.g, params.phi
    )?;
    writeln!(
        w,
        "# dt = {}, t_total = {}, seed = {}, trajectory = {}, scheme = {:?}, record_stride = {}",
        cfg.dt, cfg.t_total, cfg.seed, series.index, cfg.scheme, cfg.record_stride
    )?;
    if let Some(t) = series.diverged_at {
        writeln!(w, "# diverged at t = {t}")?;
    }
    let mut header = vec!["t".to_string()];
    for l in QuadratureState::LABELS {
        header.push(format!("re_{l}"));
        header.push(format!("im_{l}"));
    }
    writeln!(w, "{}", header.join(","))?;
    for (t, s) in series.times.iter().zip(&series.states) {
        let mut row = vec![format!("{t:.9e}")];
        for c in s.to_array() {
            row.push(format!("{:.9e}", c.re));
            row.push(format!("{:.9e}", c.im));
        }
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{amplitudes_from_quadratures, quadratures_from_amplitudes, ModeAmplitudes};

    fn params(mu0: f64, mu1: f64, g: f64) -> ScaledParams {
        ScaledParams::new(mu0, mu1, 1.0, g, 0.0).unwrap()
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn zero_dt_gives_zero_noise() {
        let mut rng = trajectory_rng(1, 0);
        assert_eq!(draw_noise(&mut rng, 0.0), NoiseIncrement::default());
    }

    /// Sample moment within `k` standard errors of `want`.
    fn within(samples: &[Complex64], want: Complex64, k: f64) -> bool {
        let n = samples.len() as f64;
        let mean: Complex64 = samples.iter().sum::<Complex64>() / n;
        let var_re = samples
            .iter()
            .map(|z| (z.re - mean.re).powi(2))
            .sum::<f64>()
            / (n - 1.0);
        let var_im = samples
            .iter()
            .map(|z| (z.im - mean.im).powi(2))
            .sum::<f64>()
            / (n - 1.0);
        let se_re = (var_re / n).sqrt().max(1e-300);
        let se_im = (var_im / n).sqrt().max(1e-300);
        (mean.re - want.re).abs() <= k * se_re + 1e-15
            && (mean.im - want.im).abs() <= k * se_im + 1e-15
    }

    #[test]
    fn noise_moment_table() {
        let dt = 0.01;
        let n = 1_000_000;
        let mut rng = trajectory_rng(42, 7);
        let draws: Vec<NoiseIncrement> = (0..n).map(|_| draw_noise(&mut rng, dt)).collect();
        let pick =
            |f: &dyn Fn(&NoiseIncrement) -> Complex64| draws.iter().map(f).collect::<Vec<_>>();
        let zero = c(0.0, 0.0);
        assert!(within(&pick(&|d| d.dw_x1), zero, 5.0));
        assert!(within(&pick(&|d| d.dw_y2), zero, 5.0));
        assert!(within(&pick(&|d| d.dw_x1 * d.dw_x2), c(dt, 0.0), 5.0));
        assert!(within(&pick(&|d| d.dw_y1 * d.dw_y2), c(dt, 0.0), 5.0));
        for f in [
            (|d: &NoiseIncrement| d.dw_x1 * d.dw_x1) as fn(&NoiseIncrement) -> Complex64,
            |d| d.dw_x2 * d.dw_x2,
            |d| d.dw_y1 * d.dw_y1,
            |d| d.dw_y2 * d.dw_y2,
            |d| d.dw_x1 * d.dw_y1,
            |d| d.dw_x1 * d.dw_y2,
            |d| d.dw_x2 * d.dw_y1,
            |d| d.dw_x2 * d.dw_y2,
        ] {
            assert!(within(&pick(&f), zero, 5.0));
        }
        // Mode increments: ⟨dw1 dw2⟩ = ⟨dw1⁺ dw2⁺⟩ = dt, cross terms vanish.
        let modes: Vec<[Complex64; 4]> = draws.iter().map(|d| d.mode_increments()).collect();
        let mp = |i: usize, j: usize| modes.iter().map(|m| m[i] * m[j]).collect::<Vec<_>>();
        assert!(within(&mp(0, 2), c(dt, 0.0), 5.0));
        assert!(within(&mp(1, 3), c(dt, 0.0), 5.0));
        assert!(within(&mp(0, 3), zero, 5.0));
        assert!(within(&mp(0, 1), zero, 5.0));
    }

    #[test]
    fn drift_examples() {
        let p = params(0.6, 0.2, 0.01);
        let d = drift(&QuadratureState::default(), &p);
        assert_eq!(d, QuadratureState::from_real(1.2, 0.0, 0.4, 0.0, 0.0, 0.0));
        let ss = steady_state(&p).unwrap().as_state();
        assert!(drift(&ss, &p).max_norm() < 1e-10);
    }

    #[test]
    fn diffusion_examples() {
        let s = QuadratureState::from_real(4.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        let d = diffusion_amplitudes(&s, 2f64.sqrt());
        assert!((d.plus - c(2.0, 0.0)).norm() < 1e-15 && (d.minus - c(2.0, 0.0)).norm() < 1e-15);
        let s = QuadratureState::from_real(0.0, 2.0, 0.0, 0.0, 0.0, 0.0);
        let d = diffusion_amplitudes(&s, 2f64.sqrt());
        // √(0 + i·2) = 1 + i, √(0 − i·2) = 1 − i
        assert!((d.plus - c(1.0, 1.0)).norm() < 1e-15);
        assert!((d.minus - c(1.0, -1.0)).norm() < 1e-15);
        let d = diffusion_amplitudes(&s, 0.0);
        assert_eq!((d.plus, d.minus), (c(0.0, 0.0), c(0.0, 0.0)));
    }

    /// Amplitude-form drift with physical constants, the oracle for the
    /// quadrature drift.
    fn amplitude_drift(
        a: &ModeAmplitudes,
        e0: f64,
        e1: Complex64,
        chi: f64,
        g0: f64,
        g: f64,
    ) -> ModeAmplitudes {
        let [a0, a1, a2] = a.alpha;
        let [p0, p1, p2] = a.alpha_plus;
        ModeAmplitudes {
            alpha: [
                e0 - g0 * a0 - chi * a1 * a2,
                e1 - g * a1 + chi * p2 * a0,
                -g * a2 + chi * p1 * a0,
            ],
            alpha_plus: [
                e0 - g0 * p0 - chi * p1 * p2,
                e1.conj() - g * p1 + chi * a2 * p0,
                -g * p2 + chi * a1 * p0,
            ],
        }
    }

    #[test]
    fn drift_matches_amplitude_form() {
        let mut rng = trajectory_rng(5, 0);
        for _ in 0..200 {
            let gamma: f64 = rng.random_range(0.5..2.0);
            let gamma0: f64 = rng.random_range(0.2..5.0);
            let chi: f64 = rng.random_range(0.001..0.1);
            let e0: f64 = rng.random_range(0.0..50.0);
            let e1: f64 = rng.random_range(0.0..20.0);
            let phi: f64 = rng.random_range(-3.0..3.0);
            let gamma_r = gamma0 / gamma;
            let p = ScaledParams::new(
                e0 * chi / (gamma * gamma0),
                e1 * chi / (gamma * (2.0 * gamma * gamma0).sqrt()),
                gamma_r,
                chi / (gamma * (2.0 * gamma_r).sqrt()),
                phi,
            )
            .unwrap();
            let s = QuadratureState::from_array(std::array::from_fn(|_| {
                c(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0))
            }));
            let amps = amplitudes_from_quadratures(&s, &p).unwrap();
            let da = amplitude_drift(
                &amps,
                e0,
                Complex64::from_polar(e1, phi),
                chi,
                gamma0,
                gamma,
            );
            // d/dτ = (1/γ) d/dt, and the quadrature map is linear.
            let want = quadratures_from_amplitudes(&da, &p) * (1.0 / gamma);
            let got = drift(&s, &p);
            assert!(
                (want - got).max_norm() < 1e-10 * (1.0 + want.max_norm()),
                "{want:?} vs {got:?}"
            );
        }
    }

    #[test]
    fn noiseless_run_converges_to_fixed_point() {
        // Slowest decay rates are ~0.50 at (0.6, 0.2) and ~0.14 at (2, 0.2).
        for &(mu0, mu1, t_total) in &[(0.6, 0.2, 30.0), (0.3, 0.05, 30.0), (2.0, 0.2, 150.0)] {
            let p = params(mu0, mu1, 0.0);
            let cfg = SimConfig {
                t_total,
                burn_in: 0.0,
                record_stride: 1000,
                ..Default::default()
            };
            let start = QuadratureState::from_real(0.3, 0.1, 0.2, -0.1, 0.0, 0.05);
            let series = simulate_trajectory_from(&p, &cfg, 0, start).unwrap();
            let last = series.states.last().unwrap();
            let ss = steady_state(&p).unwrap().as_state();
            assert!((*last - ss).max_norm() < 1e-6, "mu0 = {mu0}: {last:?}");
            for s in &series.states {
                assert!(s.to_array().iter().all(|z| z.im == 0.0));
            }
        }
    }

    #[test]
    fn semi_implicit_converges_too() {
        let p = params(0.6, 0.2, 0.0);
        let cfg = SimConfig {
            t_total: 40.0,
            burn_in: 0.0,
            scheme: Scheme::SemiImplicit,
            record_stride: 8000,
            ..Default::default()
        };
        let start = QuadratureState::from_real(0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        let series = simulate_trajectory_from(&p, &cfg, 0, start).unwrap();
        let ss = steady_state(&p).unwrap().as_state();
        assert!((*series.states.last().unwrap() - ss).max_norm() < 1e-6);
    }

    #[test]
    fn same_seed_and_index_is_bit_identical() {
        let p = params(0.6, 0.2, 0.01);
        let cfg = SimConfig {
            t_total: 5.0,
            burn_in: 0.0,
            record_stride: 1,
            ..Default::default()
        };
        let a = simulate_trajectory(&p, &cfg, 3).unwrap();
        let b = simulate_trajectory(&p, &cfg, 3).unwrap();
        assert_eq!(a, b);
        let other = simulate_trajectory(&p, &cfg, 4).unwrap();
        assert_ne!(a.states, other.states);
    }

    #[test]
    fn divergence_is_flagged() {
        let p = params(0.6, 0.2, 0.01);
        let cfg = SimConfig {
            t_total: 5.0,
            burn_in: 0.0,
            divergence_threshold: 11.0,
            ..Default::default()
        };
        let start = QuadratureState::from_real(0.0, 0.0, 12.0, 0.0, 0.0, 0.0);
        let series = simulate_trajectory_from(&p, &cfg, 0, start).unwrap();
        assert_eq!(series.diverged_at, Some(cfg.dt));
        assert_eq!(series.states.len(), 1);
    }

    #[test]
    fn empty_ensemble() {
        let p = params(0.6, 0.2, 0.01);
        let cfg = SimConfig {
            n_trajectories: 0,
            ..Default::default()
        };
        let s = run_ensemble(&p, &cfg).unwrap();
        assert_eq!((s.n_total, s.n_used, s.n_diverged()), (0, 0, 0));
    }

    #[test]
    fn split_runs_pool_identically() {
        let p = params(0.6, 0.2, 0.01);
        let cfg = SimConfig {
            t_total: 4.0,
            burn_in: 0.0,
            n_trajectories: 40,
            record_stride: 50,
            ..Default::default()
        };
        let whole = run_ensemble(&p, &cfg).unwrap();
        let mut pooled = run_ensemble_range(&p, &cfg, 0..20).unwrap();
        pooled.merge(&run_ensemble_range(&p, &cfg, 20..40).unwrap());
        assert_eq!(whole, pooled);
    }

    #[test]
    fn ensemble_means_match_steady_state() {
        let p = params(0.6, 0.2, 0.01);
        let cfg = SimConfig {
            t_total: 30.0,
            burn_in: 10.0,
            n_trajectories: 1000,
            record_stride: 1000,
            ..Default::default()
        };
        let s = run_ensemble(&p, &cfg).unwrap();
        assert_eq!(s.n_diverged(), 0);
        let ss = steady_state(&p).unwrap();
        for i in 1..s.times.len() {
            let m = s.mean(i);
            let se = s.std_err(i);
            assert!(
                (m.x1.re - ss.x1s).abs() < 3.0 * se[2].re + 1e-4,
                "x1 at {}",
                s.times[i]
            );
            for k in [1, 3, 5] {
                assert!(
                    m.to_array()[k].re.abs() < 4.0 * se[k].re,
                    "y at {}",
                    s.times[i]
                );
            }
        }
    }

    #[test]
    fn excess_divergence_is_an_error() {
        let p = params(0.6, 0.2, 0.01);
        let cfg = SimConfig::default();
        assert!(check_divergence(&p, &cfg, 10, 1000).is_ok());
        let err = check_divergence(&p, &cfg, 11, 1000).unwrap_err();
        assert!(matches!(err, Error::SamplingBreakdown { diverged: 11, .. }));
        assert!(err.to_string().contains("mu0 = 0.6"));
    }

    #[test]
    fn dump_has_header_and_rows() {
        let p = params(0.6, 0.2, 0.01);
        let cfg = SimConfig {
            t_total: 1.0,
            burn_in: 0.0,
            record_stride: 50,
            ..Default::default()
        };
        let series = simulate_trajectory(&p, &cfg, 0).unwrap();
        let mut buf = Vec::new();
        write_trajectory(&mut buf, &series, &p, &cfg).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].starts_with("# mu0 = 0.6"));
        assert!(lines[2].starts_with("t,re_x0,im_x0"));
        assert_eq!(lines.len(), 3 + series.times.len());
        assert_eq!(lines[3].split(',').count(), 13);
    }
}
