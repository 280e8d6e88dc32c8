//! Welch-style spectral estimation for positive-P trajectory ensembles.
//!
//! Positive-P variables are complex and not conjugate pairs, so the
//! spectral density of a pair of series is estimated from the bilinear
//! product `X_a(Ω)·X_b(−Ω)` rather than `X_a(Ω)·X_b(Ω)*`. For real series
//! the two coincide. Normalisation follows the transform convention with
//! kernel `e^{−iΩτ}`: a continuous white noise of intensity q has flat
//! density q, and an Ornstein–Uhlenbeck process `dX = −kX dτ + √q dW` has
//! density `q/(Ω² + k²)`.
//!
//! Per-trajectory accumulators keep the raw windowed transforms summed over
//! segments, together with the plain sums needed to remove a mean computed
//! afterwards. This lets the ensemble mean be subtracted exactly without a
//! second pass and without biasing the zero-frequency bin, which
//! per-segment mean removal would do.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linear_spectra::{Quadrature, Spectrum, SpectrumKind};
use crate::model::ScaledParams;
use crate::stochastic::{self, SimConfig, TrajectorySeries};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Window {
    Rectangular,
    Hann,
}

/// Which mean is removed before transforming.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Detrend {
    None,
    /// Each segment's own mean.
    SegmentMean,
    /// One mean over the whole series, or over the whole ensemble.
    GlobalMean,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PsdConfig {
    /// Segment length in samples.
    pub segment: usize,
    pub overlap: f64,
    pub window: Window,
    pub detrend: Detrend,
    /// Integration steps between spectral samples.
    pub sample_stride: usize,
    /// Highest angular frequency kept; `None` keeps every bin up to Nyquist.
    pub omega_max: Option<f64>,
}

impl Default for PsdConfig {
    fn default() -> Self {
        Self {
            segment: 2048,
            overlap: 0.5,
            window: Window::Hann,
            detrend: Detrend::GlobalMean,
            sample_stride: 1,
            omega_max: None,
        }
    }
}

impl PsdConfig {
    pub fn validate(&self) -> Result<()> {
        if self.segment < 4 {
            return Err(invalid(
                "segment",
                format!("must be >= 4, got {}", self.segment),
            ));
        }
        if !(0.0..=0.9).contains(&self.overlap) {
            return Err(invalid(
                "overlap",
                format!("must lie in [0, 0.9], got {}", self.overlap),
            ));
        }
        if self.sample_stride == 0 {
            return Err(invalid("sample_stride", "must be >= 1"));
        }
        if let Some(w) = self.omega_max {
            if !(w >= 0.0) {
                return Err(invalid("omega_max", format!("must be >= 0, got {w}")));
            }
        }
        Ok(())
    }

    pub fn hop(&self) -> usize {
        ((self.segment as f64 * (1.0 - self.overlap)).round() as usize).max(1)
    }

    pub fn n_segments(&self, len: usize) -> usize {
        if len < self.segment {
            0
        } else {
            (len - self.segment) / self.hop() + 1
        }
    }
}

pub fn window_values(window: Window, n: usize) -> Vec<f64> {
    match window {
        Window::Rectangular => vec![1.0; n],
        Window::Hann => (0..n)
            .map(|i| {
                let s = (std::f64::consts::PI * i as f64 / n as f64).sin();
                s * s
            })
            .collect(),
    }
}

/// FFT plan, window and frequency bins shared by every series of a run.
pub struct SegmentPlan {
    cfg: PsdConfig,
    /// Sample spacing.
    dt: f64,
    window: Vec<f64>,
    window_power: f64,
    fft: Arc<dyn Fft<f64>>,
    bins: usize,
    w_pos: Vec<Complex64>,
    w_neg: Vec<Complex64>,
}

impl SegmentPlan {
    pub fn new(cfg: &PsdConfig, dt: f64) -> Result<Self> {
        cfg.validate()?;
        if !(dt > 0.0) {
            return Err(invalid(
                "dt",
                format!("sample spacing must be > 0, got {dt}"),
            ));
        }
        let l = cfg.segment;
        let window = window_values(cfg.window, l);
        let window_power = window.iter().map(|w| w * w).sum();
        let fft = FftPlanner::new().plan_fft_forward(l);
        let d_omega = 2.0 * std::f64::consts::PI / (l as f64 * dt);
        let nyquist_bins = l / 2 + 1;
        let bins = match cfg.omega_max {
            Some(w) => ((w / d_omega + 1e-9).floor() as usize + 1).min(nyquist_bins),
            None => nyquist_bins,
        };
        let mut wdft: Vec<Complex64> = window.iter().map(|&w| Complex64::new(w, 0.0)).collect();
        fft.process(&mut wdft);
        let w_pos = (0..bins).map(|k| wdft[k]).collect();
        let w_neg = (0..bins).map(|k| wdft[(l - k) % l]).collect();
        Ok(Self {
            cfg: *cfg,
            dt,
            window,
            window_power,
            fft,
            bins,
            w_pos,
            w_neg,
        })
    }

    pub fn config(&self) -> &PsdConfig {
        &self.cfg
    }

    pub fn n_bins(&self) -> usize {
        self.bins
    }

    pub fn d_omega(&self) -> f64 {
        2.0 * std::f64::consts::PI / (self.cfg.segment as f64 * self.dt)
    }

    pub fn omega(&self) -> Vec<f64> {
        let d = self.d_omega();
        (0..self.bins).map(|k| k as f64 * d).collect()
    }

    /// Windowed transform of one segment; returns `(X(Ω_k), X(−Ω_k))` for
    /// the kept bins.
    fn transform(
        &self,
        seg: &[Complex64],
        buf: &mut Vec<Complex64>,
    ) -> (Vec<Complex64>, Vec<Complex64>) {
        let l = self.cfg.segment;
        let offset = match self.cfg.detrend {
            Detrend::SegmentMean => seg.iter().sum::<Complex64>() / l as f64,
            _ => Complex64::default(),
        };
        buf.clear();
        buf.extend(
            seg.iter()
                .zip(&self.window)
                .map(|(&x, &w)| (x - offset) * w),
        );
        self.fft.process(buf);
        let pos = (0..self.bins).map(|k| buf[k]).collect();
        let neg = (0..self.bins).map(|k| buf[(l - k) % l]).collect();
        (pos, neg)
    }
}

impl SegmentPlan {
    /// Transform of the window at angular frequency `u`,
    /// `Σ w_n e^{−i u n Δ}`.
    pub fn window_transform(&self, u: f64) -> Complex64 {
        let l = self.cfg.segment;
        let dirichlet = |u: f64| -> Complex64 {
            let h = 0.5 * u * self.dt;
            let s = h.sin();
            let phase = Complex64::from_polar(1.0, -h * (l as f64 - 1.0));
            if s.abs() < 1e-12 {
                // u is a multiple of the sampling frequency.
                phase * (l as f64) * (h * l as f64).cos().signum() * h.cos().signum()
            } else {
                phase * ((h * l as f64).sin() / s)
            }
        };
        match self.cfg.window {
            Window::Rectangular => dirichlet(u),
            Window::Hann => {
                let w1 = self.d_omega();
                dirichlet(u) * 0.5 - (dirichlet(u - w1) + dirichlet(u + w1)) * 0.25
            }
        }
    }

    /// Expected estimate at each kept bin for a stationary continuous-time
    /// process with even spectral density `density`, i.e. the density
    /// smoothed by the window's spectral kernel. Densities should decay at
    /// least as `1/Ω²`.
    pub fn expected_estimate<F: Fn(f64) -> f64>(&self, density: F) -> Vec<f64> {
        let w1 = self.d_omega();
        let span = (std::f64::consts::PI / self.dt).min(60.0 * w1.max(1.0));
        let h = w1 / 16.0;
        let n = (span / h).ceil() as i64;
        let norm = self.dt / (2.0 * std::f64::consts::PI * self.window_power);
        let sampling = 2.0 * std::f64::consts::PI / self.dt;
        self.omega()
            .iter()
            .map(|&w| {
                let mut acc = 0.0;
                for j in -n..=n {
                    let u = j as f64 * h;
                    let weight = if j.abs() == n { 0.5 } else { 1.0 };
                    // Sampling folds in the images of the density.
                    let folded: f64 = (-ALIAS_IMAGES..=ALIAS_IMAGES)
                        .map(|m| density(w - u + m as f64 * sampling))
                        .sum();
                    acc += weight * folded * self.window_transform(u).norm_sqr();
                }
                acc * h * norm
            })
            .collect()
    }
}

const ALIAS_IMAGES: i64 = 20;

/// Number of unordered channel pairs `(a, b)`, `a <= b`.
pub fn n_pairs(channels: usize) -> usize {
    channels * (channels + 1) / 2
}

/// Index of the unordered pair `(a, b)` in row-major upper-triangle order.
pub fn pair_index(a: usize, b: usize, channels: usize) -> usize {
    let (a, b) = if a <= b { (a, b) } else { (b, a) };
    a * channels + b - a * (a + 1) / 2
}

/// Segment-summed transforms of a set of aligned channels.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossAccumulator {
    channels: usize,
    bins: usize,
    n_segments: usize,
    n_samples: usize,
    sum: Vec<Complex64>,
    f: Vec<Complex64>,
    g: Vec<Complex64>,
    q: Vec<Complex64>,
}

impl CrossAccumulator {
    pub fn new(channels: usize, bins: usize) -> Self {
        let zero = Complex64::default();
        Self {
            channels,
            bins,
            n_segments: 0,
            n_samples: 0,
            sum: vec![zero; channels],
            f: vec![zero; channels * bins],
            g: vec![zero; channels * bins],
            q: vec![zero; n_pairs(channels) * bins],
        }
    }

    pub fn n_segments(&self) -> usize {
        self.n_segments
    }

    fn add_samples(&mut self, series: &[&[Complex64]]) {
        for (c, s) in series.iter().enumerate() {
            self.sum[c] += s.iter().sum::<Complex64>();
        }
        self.n_samples += series[0].len();
    }

    fn add_segment(
        &mut self,
        plan: &SegmentPlan,
        series: &[&[Complex64]],
        start: usize,
        buf: &mut Vec<Complex64>,
    ) {
        let l = plan.cfg.segment;
        let xs: Vec<(Vec<Complex64>, Vec<Complex64>)> = series
            .iter()
            .map(|s| plan.transform(&s[start..start + l], buf))
            .collect();
        let bins = self.bins;
        for (c, (pos, neg)) in xs.iter().enumerate() {
            for k in 0..bins {
                self.f[c * bins + k] += pos[k];
                self.g[c * bins + k] += neg[k];
            }
        }
        for a in 0..self.channels {
            for b in a..self.channels {
                let p = pair_index(a, b, self.channels);
                for k in 0..bins {
                    let v = 0.5 * (xs[a].0[k] * xs[b].1[k] + xs[b].0[k] * xs[a].1[k]);
                    self.q[p * bins + k] += v;
                }
            }
        }
        self.n_segments += 1;
    }

    /// Adds every segment of the aligned `series` plus their sample sums.
    pub fn add_series(&mut self, plan: &SegmentPlan, series: &[&[Complex64]]) -> Result<()> {
        check_aligned(series, self.channels)?;
        let len = series[0].len();
        let nseg = plan.cfg.n_segments(len);
        if nseg == 0 {
            return Err(Error::SeriesTooShort {
                len,
                segment: plan.cfg.segment,
            });
        }
        let mut buf = Vec::with_capacity(plan.cfg.segment);
        for s in 0..nseg {
            self.add_segment(plan, series, s * plan.cfg.hop(), &mut buf);
        }
        self.add_samples(series);
        Ok(())
    }

    pub fn merge(&mut self, other: &CrossAccumulator) {
        self.n_segments += other.n_segments;
        self.n_samples += other.n_samples;
        for (a, b) in self.sum.iter_mut().zip(&other.sum) {
            *a += b;
        }
        for (a, b) in self.f.iter_mut().zip(&other.f) {
            *a += b;
        }
        for (a, b) in self.g.iter_mut().zip(&other.g) {
            *a += b;
        }
        for (a, b) in self.q.iter_mut().zip(&other.q) {
            *a += b;
        }
    }

    /// Sample mean of each channel.
    pub fn mean(&self) -> Vec<Complex64> {
        let n = self.n_samples.max(1) as f64;
        self.sum.iter().map(|s| s / n).collect()
    }

    /// Spectral densities `[pair][bin]` after removing the channel means
    /// `c` from every segment.
    pub fn estimate(&self, plan: &SegmentPlan, c: &[Complex64]) -> Vec<f64> {
        let bins = self.bins;
        let n = self.n_segments as f64;
        let norm = plan.dt / (n * plan.window_power);
        let mut out = vec![0.0; self.q.len()];
        for a in 0..self.channels {
            for b in a..self.channels {
                let p = pair_index(a, b, self.channels);
                for k in 0..bins {
                    let (wp, wn) = (plan.w_pos[k], plan.w_neg[k]);
                    let (fa, fb) = (self.f[a * bins + k], self.f[b * bins + k]);
                    let (ga, gb) = (self.g[a * bins + k], self.g[b * bins + k]);
                    let correction = 0.5
                        * (c[b] * wn * fa + c[a] * wp * gb + c[a] * wn * fb + c[b] * wp * ga)
                        - c[a] * c[b] * wp * wn * n;
                    out[p * bins + k] = (self.q[p * bins + k] - correction).re * norm;
                }
            }
        }
        out
    }
}

fn check_aligned(series: &[&[Complex64]], channels: usize) -> Result<()> {
    if series.len() != channels {
        return Err(Error::LengthMismatch {
            left: series.len(),
            right: channels,
        });
    }
    let len = series[0].len();
    for s in series {
        if s.len() != len {
            return Err(Error::LengthMismatch {
                left: len,
                right: s.len(),
            });
        }
    }
    Ok(())
}

/// Mean spectral density of one series with its segment-to-segment
/// standard error.
pub fn psd(series: &[Complex64], cfg: &PsdConfig, dt: f64) -> Result<Spectrum> {
    let est = segment_estimates(&[series], cfg, dt)?;
    Ok(est.spectrum(0, 0, SpectrumKind::Intracavity, "psd"))
}

/// Symmetrised real cross-spectral density of two aligned series.
pub fn cross_psd(a: &[Complex64], b: &[Complex64], cfg: &PsdConfig, dt: f64) -> Result<Spectrum> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let est = segment_estimates(&[a, b], cfg, dt)?;
    Ok(est.spectrum(0, 1, SpectrumKind::IntracavityCross, "cross_psd"))
}

/// `|S_ab|² / (S_aa S_bb)` from one series pair.
pub fn coherence(a: &[Complex64], b: &[Complex64], cfg: &PsdConfig, dt: f64) -> Result<Vec<f64>> {
    let est = segment_estimates(&[a, b], cfg, dt)?;
    let (aa, bb, ab) = (est.mean_of(0, 0), est.mean_of(1, 1), est.mean_of(0, 1));
    Ok((0..aa.len())
        .map(|k| ab[k] * ab[k] / (aa[k] * bb[k]))
        .collect())
}

/// Treats each segment of a single record as an independent sample.
fn segment_estimates(series: &[&[Complex64]], cfg: &PsdConfig, dt: f64) -> Result<SampleSpectra> {
    let plan = SegmentPlan::new(cfg, dt)?;
    let channels = series.len();
    check_aligned(series, channels)?;
    let len = series[0].len();
    let nseg = cfg.n_segments(len);
    if nseg == 0 {
        return Err(Error::SeriesTooShort {
            len,
            segment: cfg.segment,
        });
    }
    let mut whole = CrossAccumulator::new(channels, plan.bins);
    whole.add_samples(series);
    let c = match cfg.detrend {
        Detrend::GlobalMean => whole.mean(),
        _ => vec![Complex64::default(); channels],
    };
    let mut buf = Vec::with_capacity(cfg.segment);
    let samples = (0..nseg)
        .map(|s| {
            let mut acc = CrossAccumulator::new(channels, plan.bins);
            acc.add_segment(&plan, series, s * cfg.hop(), &mut buf);
            acc.estimate(&plan, &c)
        })
        .collect();
    Ok(SampleSpectra::new(plan.omega(), channels, samples))
}

/// Independent spectral estimates (one per trajectory, or per segment)
/// with their mean and standard error.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSpectra {
    pub omega: Vec<f64>,
    pub channels: usize,
    /// `samples[i][pair * bins + bin]`.
    pub samples: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
    pub std_err: Vec<f64>,
}

impl SampleSpectra {
    pub fn new(omega: Vec<f64>, channels: usize, samples: Vec<Vec<f64>>) -> Self {
        let width = n_pairs(channels) * omega.len();
        let (mean, std_err) = mean_and_se(&samples, width);
        Self {
            omega,
            channels,
            samples,
            mean,
            std_err,
        }
    }

    pub fn bins(&self) -> usize {
        self.omega.len()
    }

    pub fn mean_of(&self, a: usize, b: usize) -> &[f64] {
        let p = pair_index(a, b, self.channels);
        &self.mean[p * self.bins()..(p + 1) * self.bins()]
    }

    pub fn std_err_of(&self, a: usize, b: usize) -> &[f64] {
        let p = pair_index(a, b, self.channels);
        &self.std_err[p * self.bins()..(p + 1) * self.bins()]
    }

    pub fn spectrum(&self, a: usize, b: usize, kind: SpectrumKind, label: &str) -> Spectrum {
        Spectrum {
            kind,
            label: label.to_string(),
            omega: self.omega.clone(),
            values: self.mean_of(a, b).to_vec(),
            std_err: Some(self.std_err_of(a, b).to_vec()),
        }
    }

    /// Delete-a-block jackknife for a statistic of the mean spectra.
    ///
    /// `stat` receives a mean `[pair * bins + bin]` vector and returns any
    /// number of outputs. Returns the full-sample statistic and the
    /// jackknife standard error of each output.
    pub fn jackknife<F>(&self, blocks: usize, stat: F) -> (Vec<f64>, Vec<f64>)
    where
        F: Fn(&[f64]) -> Vec<f64>,
    {
        let full = stat(&self.mean);
        let n = self.samples.len();
        let blocks = blocks.min(n);
        if blocks < 2 {
            return (full.clone(), vec![f64::NAN; full.len()]);
        }
        let width = self.mean.len();
        let mut total = vec![0.0; width];
        for s in &self.samples {
            for (t, v) in total.iter_mut().zip(s) {
                *t += v;
            }
        }
        let mut leave_out = Vec::with_capacity(blocks);
        for b in 0..blocks {
            let (lo, hi) = (b * n / blocks, (b + 1) * n / blocks);
            let mut part = total.clone();
            for s in &self.samples[lo..hi] {
                for (t, v) in part.iter_mut().zip(s) {
                    *t -= v;
                }
            }
            let m = (n - (hi - lo)) as f64;
            part.iter_mut().for_each(|v| *v /= m);
            leave_out.push(stat(&part));
        }
        let bf = blocks as f64;
        let se = (0..full.len())
            .map(|j| {
                let mean = leave_out.iter().map(|v| v[j]).sum::<f64>() / bf;
                let ss = leave_out.iter().map(|v| (v[j] - mean).powi(2)).sum::<f64>();
                ((bf - 1.0) / bf * ss).sqrt()
            })
            .collect();
        (full, se)
    }
}

fn mean_and_se(samples: &[Vec<f64>], width: usize) -> (Vec<f64>, Vec<f64>) {
    let n = samples.len() as f64;
    let mut mean = vec![0.0; width];
    for s in samples {
        for (m, v) in mean.iter_mut().zip(s) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n.max(1.0));
    let mut var = vec![0.0; width];
    for s in samples {
        for ((acc, v), m) in var.iter_mut().zip(s).zip(&mean) {
            *acc += (v - m).powi(2);
        }
    }
    let se = var
        .iter()
        .map(|v| {
            if n > 1.0 {
                (v / (n - 1.0) / n).sqrt()
            } else {
                f64::NAN
            }
        })
        .collect();
    (mean, se)
}

/// Estimates from one accumulator per trajectory, with the channel means
/// taken over the whole ensemble when the config asks for a global mean.
pub fn ensemble_estimates(
    plan: &SegmentPlan,
    accs: &[CrossAccumulator],
    channels: usize,
) -> SampleSpectra {
    let c = match plan.cfg.detrend {
        Detrend::GlobalMean if !accs.is_empty() => {
            let mut pooled = CrossAccumulator::new(channels, plan.bins);
            for a in accs {
                pooled.merge(a);
            }
            pooled.mean()
        }
        _ => vec![Complex64::default(); channels],
    };
    let samples = accs.iter().map(|a| a.estimate(plan, &c)).collect();
    SampleSpectra::new(plan.omega(), channels, samples)
}

/// Per-quadrature fluctuations of one trajectory after burn-in.
#[derive(Debug, Clone, PartialEq)]
pub struct Fluctuations {
    pub times: Vec<f64>,
    /// `[x0, y0, x1, y1, x2, y2]`.
    pub quadratures: [Vec<Complex64>; 6],
    /// `[x+, x−, y+, y−]`.
    pub combined: [Vec<Complex64>; 4],
}

/// Drops samples before `burn_in`, subtracts each quadrature's time mean
/// and divides by `g`, then forms the combined quadratures.
pub fn fluctuation_series(traj: &TrajectorySeries, burn_in: f64, g: f64) -> Result<Fluctuations> {
    if let Some(t) = traj.diverged_at {
        return Err(Error::Diverged { time: t });
    }
    if !(g > 0.0) {
        return Err(invalid("g", "fluctuation rescaling needs g > 0"));
    }
    let start = traj
        .times
        .iter()
        .position(|&t| t >= burn_in - 1e-12)
        .unwrap_or(traj.times.len());
    if start >= traj.times.len() {
        return Err(Error::SeriesTooShort { len: 0, segment: 1 });
    }
    let states = &traj.states[start..];
    let n = states.len() as f64;
    let mut mean = [Complex64::default(); 6];
    for s in states {
        for (m, c) in mean.iter_mut().zip(s.to_array()) {
            *m += c;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let quadratures: [Vec<Complex64>; 6] = std::array::from_fn(|k| {
        states
            .iter()
            .map(|s| (s.to_array()[k] - mean[k]) / g)
            .collect()
    });
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let comb = |a: usize, b: usize, sign: f64| -> Vec<Complex64> {
        quadratures[a]
            .iter()
            .zip(&quadratures[b])
            .map(|(&u, &v)| (u + v * sign) * r)
            .collect()
    };
    let combined = [
        comb(2, 4, 1.0),
        comb(2, 4, -1.0),
        comb(3, 5, 1.0),
        comb(3, 5, -1.0),
    ];
    Ok(Fluctuations {
        times: traj.times[start..].to_vec(),
        quadratures,
        combined,
    })
}

/// Output spectrum from an intracavity density: `δ + 2·S`, with δ = 1 for
/// self-spectra and 0 for cross-spectra.
pub fn to_output_spectrum(s: &Spectrum) -> Spectrum {
    let (kind, offset) = match s.kind {
        SpectrumKind::Intracavity => (SpectrumKind::Output, 1.0),
        SpectrumKind::IntracavityCross => (SpectrumKind::OutputCross, 0.0),
        other => (other, 0.0),
    };
    if kind == s.kind {
        return s.clone();
    }
    Spectrum {
        kind,
        label: s.label.clone(),
        omega: s.omega.clone(),
        values: s.values.iter().map(|v| offset + 2.0 * v).collect(),
        std_err: s
            .std_err
            .as_ref()
            .map(|e| e.iter().map(|v| 2.0 * v).collect()),
    }
}

/// Simulated first-order spectra of the combined quadratures
/// `[x+, x−, y+, y−]` over an ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedSpectra {
    /// Intracavity densities in first-order units.
    pub intracavity: SampleSpectra,
    pub n_total: usize,
    pub diverged: Vec<(u64, f64)>,
}

impl SimulatedSpectra {
    pub fn omega(&self) -> &[f64] {
        &self.intracavity.omega
    }

    pub fn intracavity_spectrum(&self, a: Quadrature, b: Quadrature) -> Spectrum {
        let kind = if a == b {
            SpectrumKind::Intracavity
        } else {
            SpectrumKind::IntracavityCross
        };
        let label = pair_label(a, b);
        self.intracavity
            .spectrum(a.index(), b.index(), kind, &label)
    }

    pub fn output_spectrum(&self, a: Quadrature, b: Quadrature) -> Spectrum {
        to_output_spectrum(&self.intracavity_spectrum(a, b))
    }

    /// Output densities `δ_ab + 2·S_ab` as a mean vector, the form
    /// expected by jackknife statistics.
    pub fn output_means(means: &[f64], bins: usize) -> Vec<f64> {
        let mut out: Vec<f64> = means.iter().map(|v| 2.0 * v).collect();
        for c in 0..4 {
            let p = pair_index(c, c, 4);
            for k in 0..bins {
                out[p * bins + k] += 1.0;
            }
        }
        out
    }
}

pub fn pair_label(a: Quadrature, b: Quadrature) -> String {
    if a == b {
        a.label().to_string()
    } else {
        format!("{},{}", a.label(), b.label())
    }
}

/// Runs the full nonlinear equations and estimates the combined-quadrature
/// spectra in first-order units, `(value − classical steady state)/g`.
pub fn simulate_spectra(
    params: &ScaledParams,
    sim: &SimConfig,
    psd_cfg: &PsdConfig,
) -> Result<SimulatedSpectra> {
    params.validate()?;
    sim.validate()?;
    if !(params.g > 0.0) {
        return Err(invalid("g", "spectral estimation needs g > 0"));
    }
    let start = stochastic::initial_state(params)?;
    let reference = start.combined();
    let inv_g = 1.0 / params.g;
    let record = move |s: &crate::model::QuadratureState| -> [Complex64; 4] {
        let c = s.combined();
        std::array::from_fn(|k| (c[k] - reference[k]) * inv_g)
    };
    let run = |i: u64| -> Result<std::result::Result<CrossAccumulator, f64>> {
        record_channels(params, sim, psd_cfg, i, start, record)
    };
    collect_spectra(params, sim, psd_cfg, run)
}

/// Integrates one trajectory with `integrate_one`, recording the four
/// channels produced by `record` every `sample_stride` steps after burn-in,
/// and folds them into an accumulator. `Err(t)` inside marks divergence.
pub(crate) fn record_channels<R>(
    params: &ScaledParams,
    sim: &SimConfig,
    psd_cfg: &PsdConfig,
    index: u64,
    start: crate::model::QuadratureState,
    record: R,
) -> Result<std::result::Result<CrossAccumulator, f64>>
where
    R: Fn(&crate::model::QuadratureState) -> [Complex64; 4],
{
    let plan = SegmentPlan::new(psd_cfg, sim.dt * psd_cfg.sample_stride as f64)?;
    let burn = sim.burn_in_steps();
    let cap = (sim.n_steps().saturating_sub(burn)) / psd_cfg.sample_stride + 1;
    let mut ch: [Vec<Complex64>; 4] = std::array::from_fn(|_| Vec::with_capacity(cap));
    let diverged = stochastic::integrate(params, sim, index, start, |n, _, s| {
        if n > burn && (n - burn).is_multiple_of(psd_cfg.sample_stride) {
            for (buf, v) in ch.iter_mut().zip(record(s)) {
                buf.push(v);
            }
        }
    });
    if let Some(t) = diverged {
        return Ok(Err(t));
    }
    let mut acc = CrossAccumulator::new(4, plan.n_bins());
    let refs: Vec<&[Complex64]> = ch.iter().map(|v| v.as_slice()).collect();
    acc.add_series(&plan, &refs)?;
    Ok(Ok(acc))
}

pub(crate) fn collect_spectra<F>(
    params: &ScaledParams,
    sim: &SimConfig,
    psd_cfg: &PsdConfig,
    run: F,
) -> Result<SimulatedSpectra>
where
    F: Fn(u64) -> Result<std::result::Result<CrossAccumulator, f64>> + Sync + Send,
{
    let plan = SegmentPlan::new(psd_cfg, sim.dt * psd_cfg.sample_stride as f64)?;
    let results = stochastic::map_trajectories(0..sim.n_trajectories as u64, run);
    let mut accs = Vec::with_capacity(results.len());
    let mut diverged = Vec::new();
    for (i, r) in results.into_iter().enumerate() {
        match r? {
            Ok(acc) => accs.push(acc),
            Err(t) => diverged.push((i as u64, t)),
        }
    }
    stochastic::check_divergence(params, sim, diverged.len(), sim.n_trajectories)?;
    Ok(SimulatedSpectra {
        intracavity: ensemble_estimates(&plan, &accs, 4),
        n_total: sim.n_trajectories,
        diverged,
    })
}
