//! First-order fluctuation spectra.
//!
//! With the pump fluctuation slaved to the signal and idler, the combined
//! quadratures obey two decoupled 2×2 linear systems,
//!
//! ```text
//! d(x+, x−) = −[[A, −E], [−E, B]]·(x+, x−) dτ + noise with ⟨⟩ = diag(x0s, −x0s)
//! d(y+, y−) = −[[C, −E], [−E, D]]·(y+, y−) dτ + noise with ⟨⟩ = diag(−x0s, x0s)
//! ```
//!
//! whose spectra are the rational functions evaluated here. The module also
//! keeps the full six-variable first-order system, with the pump
//! fluctuation as a dynamical variable, both in closed form and as a
//! stochastic integrator. The two descriptions agree at zero frequency for
//! every pump damping and at all frequencies when the pump damping is large
//! or the injection vanishes.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::estimator::{self, CrossAccumulator, PsdConfig, SegmentPlan, SimulatedSpectra};
use crate::stability::{drift_matrices, hurwitz_report, Matrix3};
use crate::steady_state::SteadyState;
use crate::stochastic::{self, draw_noise, trajectory_rng, SimConfig};

/// Denominators below this are treated as a singular point.
const SINGULAR: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumKind {
    /// Intracavity first-order correlation density.
    Intracavity,
    /// Output spectrum normalised to shot noise.
    Output,
    /// Symmetrised intracavity cross-correlation.
    IntracavityCross,
    /// Output cross-spectrum.
    OutputCross,
}

/// Frequency-indexed spectral densities. `NaN` marks undefined points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub kind: SpectrumKind,
    pub label: String,
    pub omega: Vec<f64>,
    pub values: Vec<f64>,
    pub std_err: Option<Vec<f64>>,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Errors unless both spectra share the same frequency grid.
    pub fn check_grid(&self, other: &Spectrum) -> Result<()> {
        if self.omega.len() != other.omega.len() {
            return Err(Error::LengthMismatch {
                left: self.omega.len(),
                right: other.omega.len(),
            });
        }
        let same = self
            .omega
            .iter()
            .zip(&other.omega)
            .all(|(a, b)| (a - b).abs() <= 1e-12 * (1.0 + a.abs()));
        if same {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }
}

/// Combined two-mode quadratures, in the order used for every 4×4 spectral
/// matrix in the crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Quadrature {
    XPlus,
    XMinus,
    YPlus,
    YMinus,
}

impl Quadrature {
    pub const ALL: [Quadrature; 4] = [Self::XPlus, Self::XMinus, Self::YPlus, Self::YMinus];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::XPlus => "x+",
            Self::XMinus => "x-",
            Self::YPlus => "y+",
            Self::YMinus => "y-",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearCoefficients {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub e: f64,
}

pub fn coefficients(ss: &SteadyState) -> LinearCoefficients {
    coefficients_from(ss.x0s, ss.x1s, ss.x2s)
}

pub fn coefficients_from(x0s: f64, x1s: f64, x2s: f64) -> LinearCoefficients {
    let sum = 0.25 * (x1s + x2s) * (x1s + x2s);
    let diff = 0.25 * (x1s - x2s) * (x1s - x2s);
    let h = 0.5 * x0s;
    LinearCoefficients {
        a: 1.0 - h + sum,
        b: 1.0 + h + diff,
        c: 1.0 + h + sum,
        d: 1.0 - h + diff,
        e: 0.25 * (x1s * x1s - x2s * x2s),
    }
}

/// `Ω ∈ [0, 5]` with 1001 points.
pub fn default_grid() -> Vec<f64> {
    linear_grid(0.0, 5.0, 1001)
}

pub fn linear_grid(start: f64, stop: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![start],
        _ => (0..n)
            .map(|i| start + (stop - start) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

impl LinearCoefficients {
    /// `Ω²(Ω² + p² + q² + 2E²) + (pq − E²)²`.
    fn denominator(&self, p: f64, q: f64, omega: f64) -> f64 {
        let w2 = omega * omega;
        let e2 = self.e * self.e;
        w2 * (w2 + p * p + q * q + 2.0 * e2) + (p * q - e2).powi(2)
    }

    pub fn x_denominator(&self, omega: f64) -> f64 {
        self.denominator(self.a, self.b, omega)
    }

    pub fn y_denominator(&self, omega: f64) -> f64 {
        self.denominator(self.c, self.d, omega)
    }
}

fn ratio(num: f64, den: f64) -> f64 {
    if den.abs() < SINGULAR || !den.is_finite() {
        f64::NAN
    } else {
        num / den
    }
}

/// Intracavity first-order density of one combined quadrature.
pub fn intracavity_value(q: Quadrature, co: &LinearCoefficients, x0s: f64, omega: f64) -> f64 {
    let w2 = omega * omega;
    let e2 = co.e * co.e;
    match q {
        Quadrature::YPlus => ratio(-x0s * (w2 + co.d * co.d - e2), co.y_denominator(omega)),
        Quadrature::XMinus => ratio(-x0s * (w2 + co.a * co.a - e2), co.x_denominator(omega)),
        Quadrature::XPlus => ratio(x0s * (w2 + co.b * co.b - e2), co.x_denominator(omega)),
        Quadrature::YMinus => ratio(x0s * (w2 + co.c * co.c - e2), co.y_denominator(omega)),
    }
}

/// `⟨x+x−⟩ + ⟨x−x+⟩` density.
pub fn cross_x_value(co: &LinearCoefficients, x0s: f64, omega: f64) -> f64 {
    ratio(2.0 * x0s * co.e * (co.b - co.a), co.x_denominator(omega))
}

/// `⟨y+y−⟩ + ⟨y−y+⟩` density.
pub fn cross_y_value(co: &LinearCoefficients, x0s: f64, omega: f64) -> f64 {
    ratio(-2.0 * x0s * co.e * (co.d - co.c), co.y_denominator(omega))
}

/// Squeezed y+ output spectrum written out directly.
pub fn output_y_plus(co: &LinearCoefficients, x0s: f64, omega: f64) -> f64 {
    let w2 = omega * omega;
    let e2 = co.e * co.e;
    let den = w2 * (w2 + co.c * co.c + co.d * co.d + 2.0 * e2) + (co.c * co.d - e2).powi(2);
    1.0 - ratio(2.0 * x0s * (w2 + co.d * co.d - e2), den)
}

/// Squeezed x− output spectrum written out directly.
pub fn output_x_minus(co: &LinearCoefficients, x0s: f64, omega: f64) -> f64 {
    let w2 = omega * omega;
    let e2 = co.e * co.e;
    let den = w2 * (w2 + co.a * co.a + co.b * co.b + 2.0 * e2) + (co.a * co.b - e2).powi(2);
    1.0 - ratio(2.0 * x0s * (w2 + co.a * co.a - e2), den)
}

fn build(kind: SpectrumKind, label: &str, grid: &[f64], f: impl Fn(f64) -> f64) -> Spectrum {
    Spectrum {
        kind,
        label: label.to_string(),
        omega: grid.to_vec(),
        values: grid.iter().map(|&w| f(w)).collect(),
        std_err: None,
    }
}

/// Intracavity densities of `[x+, x−, y+, y−]`.
pub fn intracavity_spectra(co: &LinearCoefficients, x0s: f64, grid: &[f64]) -> [Spectrum; 4] {
    Quadrature::ALL.map(|q| {
        build(SpectrumKind::Intracavity, q.label(), grid, |w| {
            intracavity_value(q, co, x0s, w)
        })
    })
}

/// Output spectra `1 + 2·⟨…⟩` of `[x+, x−, y+, y−]`.
pub fn output_spectra(co: &LinearCoefficients, x0s: f64, grid: &[f64]) -> [Spectrum; 4] {
    Quadrature::ALL.map(|q| {
        build(SpectrumKind::Output, q.label(), grid, |w| {
            1.0 + 2.0 * intracavity_value(q, co, x0s, w)
        })
    })
}

/// Symmetrised intracavity cross densities `[x+x−, y+y−]`, each the sum of
/// both orderings.
pub fn cross_spectra(co: &LinearCoefficients, x0s: f64, grid: &[f64]) -> [Spectrum; 2] {
    [
        build(SpectrumKind::IntracavityCross, "x+,x-", grid, |w| {
            cross_x_value(co, x0s, w)
        }),
        build(SpectrumKind::IntracavityCross, "y+,y-", grid, |w| {
            cross_y_value(co, x0s, w)
        }),
    ]
}

/// Real 4×4 output spectral matrix over `[x+, x−, y+, y−]` at one frequency.
///
/// Diagonal entries are the output spectra; off-diagonal entries are output
/// cross-spectra for one ordering (`2·Re⟨a b⟩`), which equals the
/// symmetrised sum of both intracavity orderings. The x and y blocks do not
/// couple at first order.
pub fn output_matrix(co: &LinearCoefficients, x0s: f64, omega: f64) -> [[f64; 4]; 4] {
    let mut m = [[0.0; 4]; 4];
    for q in Quadrature::ALL {
        m[q.index()][q.index()] = 1.0 + 2.0 * intracavity_value(q, co, x0s, omega);
    }
    let cx = cross_x_value(co, x0s, omega);
    let cy = cross_y_value(co, x0s, omega);
    m[0][1] = cx;
    m[1][0] = cx;
    m[2][3] = cy;
    m[3][2] = cy;
    m
}

fn inverse3(m: &[[Complex64; 3]; 3]) -> Option<[[Complex64; 3]; 3]> {
    let cof = |r: usize, c: usize| {
        let (r1, r2) = ((r + 1) % 3, (r + 2) % 3);
        let (c1, c2) = ((c + 1) % 3, (c + 2) % 3);
        m[r1][c1] * m[r2][c2] - m[r1][c2] * m[r2][c1]
    };
    let det = m[0][0] * cof(0, 0) + m[0][1] * cof(0, 1) + m[0][2] * cof(0, 2);
    if det.norm() < SINGULAR {
        return None;
    }
    let mut inv = [[Complex64::default(); 3]; 3];
    for (r, row) in inv.iter_mut().enumerate() {
        for (c, v) in row.iter_mut().enumerate() {
            *v = cof(c, r) / det;
        }
    }
    Some(inv)
}

/// Spectral matrix `G(Ω) Q G(−Ω)ᵀ` of `dX = J X dτ + noise` with
/// `G(Ω) = (iΩ − J)⁻¹`, projected onto `(X1 ± X2)/√2`.
fn block_spectrum(j: &Matrix3, q: &[[f64; 3]; 3], omega: f64) -> Option<[[Complex64; 2]; 2]> {
    let resolvent = |w: f64| {
        let mut m = [[Complex64::default(); 3]; 3];
        for r in 0..3 {
            for c in 0..3 {
                m[r][c] = Complex64::new(-j[r][c], if r == c { w } else { 0.0 });
            }
        }
        inverse3(&m)
    };
    let gp = resolvent(omega)?;
    let gm = resolvent(-omega)?;
    let mut s = [[Complex64::default(); 3]; 3];
    for r in 0..3 {
        for c in 0..3 {
            let mut acc = Complex64::default();
            for k in 0..3 {
                for l in 0..3 {
                    acc += gp[r][k] * q[k][l] * gm[c][l];
                }
            }
            s[r][c] = acc;
        }
    }
    let h = 0.5;
    let (p1, p2) = (1, 2);
    Some([
        [
            (s[p1][p1] + s[p1][p2] + s[p2][p1] + s[p2][p2]) * h,
            (s[p1][p1] - s[p1][p2] + s[p2][p1] - s[p2][p2]) * h,
        ],
        [
            (s[p1][p1] + s[p1][p2] - s[p2][p1] - s[p2][p2]) * h,
            (s[p1][p1] - s[p1][p2] - s[p2][p1] + s[p2][p2]) * h,
        ],
    ])
}

/// Output spectral matrix of the six-variable first-order system that
/// keeps the pump fluctuation dynamical. Same layout as [`output_matrix`];
/// cross entries are real parts.
pub fn full_output_matrix(ss: &SteadyState, gamma_r: f64, omega: f64) -> [[f64; 4]; 4] {
    let dm = drift_matrices(ss, gamma_r);
    let x0 = ss.x0s;
    let qx = [[0.0, 0.0, 0.0], [0.0, 0.0, x0], [0.0, x0, 0.0]];
    let qy = [[0.0, 0.0, 0.0], [0.0, 0.0, -x0], [0.0, -x0, 0.0]];
    let mut m = [[f64::NAN; 4]; 4];
    for (off, j, q) in [(0, &dm.mx, &qx), (2, &dm.my, &qy)] {
        if let Some(s) = block_spectrum(j, q, omega) {
            for r in 0..2 {
                for c in 0..2 {
                    let v = 2.0 * s[r][c].re;
                    m[off + r][off + c] = if r == c { 1.0 + v } else { v };
                }
            }
        }
    }
    for (r, c) in [(0, 2), (0, 3), (1, 2), (1, 3)] {
        m[r][c] = 0.0;
        m[c][r] = 0.0;
    }
    m
}

/// Integrates the six-variable first-order system by Euler–Maruyama and
/// estimates the combined-quadrature spectra. `noise_scale` multiplies the
/// noise (1 for the physical system, 0 for a deterministic relaxation).
///
/// The suggested configuration is `dt = 1e-3` with spectra sampled every 5
/// steps; see [`linear_sde_defaults`].
pub fn linear_sde_spectra(
    ss: &SteadyState,
    gamma_r: f64,
    sim: &SimConfig,
    psd_cfg: &PsdConfig,
    noise_scale: f64,
) -> Result<SimulatedSpectra> {
    sim.validate()?;
    if !(gamma_r > 0.0) {
        return Err(invalid("gamma_r", format!("must be > 0, got {gamma_r}")));
    }
    let report = hurwitz_report(ss, gamma_r);
    if !report.stable {
        return Err(Error::UnstableSteadyState {
            mu0: f64::NAN,
            mu1: ss.implied_mu1(),
        });
    }
    let plan = SegmentPlan::new(psd_cfg, sim.dt * psd_cfg.sample_stride as f64)?;
    let runs = stochastic::map_trajectories(0..sim.n_trajectories as u64, |i| {
        let series = linear_trajectory(ss, gamma_r, sim, psd_cfg.sample_stride, i, noise_scale);
        let refs: Vec<&[Complex64]> = series.iter().map(|v| v.as_slice()).collect();
        let mut acc = CrossAccumulator::new(4, plan.n_bins());
        acc.add_series(&plan, &refs).map(|_| acc)
    });
    let accs = runs.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(SimulatedSpectra {
        intracavity: estimator::ensemble_estimates(&plan, &accs, 4),
        n_total: sim.n_trajectories,
        diverged: Vec::new(),
    })
}

/// Simulation and estimator settings for the linear oracle.
pub fn linear_sde_defaults() -> (SimConfig, PsdConfig) {
    let sim = SimConfig {
        dt: 1e-3,
        t_total: 200.0,
        burn_in: 20.0,
        n_trajectories: 200,
        ..SimConfig::default()
    };
    let psd = PsdConfig {
        segment: 8192,
        sample_stride: 5,
        omega_max: Some(5.0),
        ..PsdConfig::default()
    };
    (sim, psd)
}

/// One trajectory of the six-variable first-order system started at zero
/// deviation; returns `[x+, x−, y+, y−]` sampled after burn-in.
pub fn linear_trajectory(
    ss: &SteadyState,
    gamma_r: f64,
    sim: &SimConfig,
    stride: usize,
    index: u64,
    noise_scale: f64,
) -> [Vec<Complex64>; 4] {
    let dm = drift_matrices(ss, gamma_r);
    let amp = noise_scale * ss.x0s.max(0.0).sqrt();
    let mi = Complex64::new(0.0, -1.0);
    let mut rng = trajectory_rng(sim.seed, index);
    let (burn, steps) = (sim.burn_in_steps(), sim.n_steps());
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let mut x = [Complex64::default(); 3];
    let mut y = [Complex64::default(); 3];
    let mut out: [Vec<Complex64>; 4] =
        std::array::from_fn(|_| Vec::with_capacity((steps - burn) / stride + 1));
    for n in 1..=steps {
        let w = draw_noise(&mut rng, sim.dt);
        let mut nx = x;
        let mut ny = y;
        for k in 0..3 {
            let mut fx = Complex64::default();
            let mut fy = Complex64::default();
            for l in 0..3 {
                fx += x[l] * dm.mx[k][l];
                fy += y[l] * dm.my[k][l];
            }
            nx[k] += fx * sim.dt;
            ny[k] += fy * sim.dt;
        }
        nx[1] += w.dw_x1 * amp;
        nx[2] += w.dw_x2 * amp;
        ny[1] += mi * w.dw_y1 * amp;
        ny[2] += mi * w.dw_y2 * amp;
        x = nx;
        y = ny;
        if n > burn && (n - burn) % stride == 0 {
            out[0].push((x[1] + x[2]) * r);
            out[1].push((x[1] - x[2]) * r);
            out[2].push((y[1] + y[2]) * r);
            out[3].push((y[1] - y[2]) * r);
        }
    }
    out
}
