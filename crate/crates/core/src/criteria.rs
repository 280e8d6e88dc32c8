//! Entanglement diagnostics built on output spectral matrices.
//!
//! Every criterion here is a function of the real 4×4 output spectral
//! matrix over `[x+, x−, y+, y−]` at one frequency (see
//! [`linear_spectra::output_matrix`]). The individual-mode spectra follow
//! from the basis change `x1,2 = (x+ ± x−)/√2`, `y1,2 = (y+ ± y−)/√2`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{pair_index, SimulatedSpectra};
use crate::linear_spectra::{self, coefficients, Spectrum};
use crate::model::{check_frequency_ratios, ScaledParams};
use crate::steady_state::{steady_state, SteadyState};

/// Relative band around a bound treated as equality.
pub const BOUNDARY: f64 = 1e-12;

/// Real symmetric output spectral matrix over `[x+, x−, y+, y−]`.
pub type SpectralMatrix = [[f64; 4]; 4];

/// Values with a per-point violation flag. Undefined points are `NaN` and
/// never flagged.
///
/// Values within [`BOUNDARY`] of a criterion's bound count as on the
/// boundary and are not flagged, so vacuum input never registers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Flagged {
    pub values: Vec<f64>,
    pub violated: Vec<bool>,
}

impl Flagged {
    fn new(values: Vec<f64>, test: impl Fn(f64) -> bool) -> Self {
        let violated = values.iter().map(|&v| !v.is_nan() && test(v)).collect();
        Self { values, violated }
    }

    pub fn violated_fraction(&self) -> f64 {
        if self.values.is_empty() {
            return 0.0;
        }
        self.violated.iter().filter(|&&v| v).count() as f64 / self.values.len() as f64
    }
}

pub fn duan_violated(sum: f64) -> bool {
    sum < 2.0 * (1.0 - BOUNDARY)
}

pub fn epr_violated(product: f64) -> bool {
    product < 1.0 - BOUNDARY
}

/// `S_x−(Ω) + S_y+(Ω)`, violated below 2.
pub fn duan_sum(s_xminus: &Spectrum, s_yplus: &Spectrum) -> Result<Flagged> {
    s_xminus.check_grid(s_yplus)?;
    let v = s_xminus
        .values
        .iter()
        .zip(&s_yplus.values)
        .map(|(a, b)| a + b)
        .collect();
    Ok(Flagged::new(v, duan_violated))
}

/// `V_x · V_y`, violated below 1.
pub fn epr_product(v_x: &[f64], v_y: &[f64]) -> Result<Flagged> {
    if v_x.len() != v_y.len() {
        return Err(Error::LengthMismatch {
            left: v_x.len(),
            right: v_y.len(),
        });
    }
    let v = v_x.iter().zip(v_y).map(|(a, b)| a * b).collect();
    Ok(Flagged::new(v, epr_violated))
}

/// `S_self − S_cross²/S_cond`; `NaN` when the conditioning spectrum is not
/// positive.
pub fn inferred_variance(s_self: f64, s_cross: f64, s_cond: f64) -> f64 {
    if s_cond > 0.0 {
        s_self - s_cross * s_cross / s_cond
    } else {
        f64::NAN
    }
}

/// Individual-mode spectral matrix over `[x1, x2, y1, y2]`. The change of
/// basis is an involution, so this also maps mode spectra back.
pub fn mode_matrix(m: &SpectralMatrix) -> SpectralMatrix {
    // Entry (i, j) is ½ Σ s_i(a) s_j(b) m[a][b] with signs (+, +) for the
    // first mode of each block and (+, −) for the second.
    let sign = [[1.0, 1.0], [1.0, -1.0]];
    let mut out = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            let (bi, bj) = (2 * (i / 2), 2 * (j / 2));
            let mut acc = 0.0;
            for a in 0..2 {
                for b in 0..2 {
                    acc += sign[i % 2][a] * sign[j % 2][b] * m[bi + a][bj + b];
                }
            }
            out[i][j] = 0.5 * acc;
        }
    }
    out
}

/// `K M Kᵀ`.
fn transform(k: &[[f64; 4]; 4], m: &SpectralMatrix) -> SpectralMatrix {
    let mut out = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            let mut acc = 0.0;
            for a in 0..4 {
                for b in 0..4 {
                    acc += k[i][a] * m[a][b] * k[j][b];
                }
            }
            out[i][j] = acc;
        }
    }
    out
}

/// Rotates signal and idler quadratures by `theta1` and `theta2`:
/// `X(θ) = X cos θ + Y sin θ`, `Y(θ) = −X sin θ + Y cos θ`.
pub fn rotate(m: &SpectralMatrix, theta1: f64, theta2: f64) -> SpectralMatrix {
    let (s1, c1) = theta1.sin_cos();
    let (s2, c2) = theta2.sin_cos();
    // In the mode basis [x1, x2, y1, y2].
    let rot = [
        [c1, 0.0, s1, 0.0],
        [0.0, c2, 0.0, s2],
        [-s1, 0.0, c1, 0.0],
        [0.0, -s2, 0.0, c2],
    ];
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let t = [
        [r, r, 0.0, 0.0],
        [r, -r, 0.0, 0.0],
        [0.0, 0.0, r, r],
        [0.0, 0.0, r, -r],
    ];
    // T is its own inverse, so the combined-basis rotation is T R T.
    let mut k = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            k[i][j] = (0..4)
                .flat_map(|a| (0..4).map(move |b| (a, b)))
                .map(|(a, b)| t[i][a] * rot[a][b] * t[b][j])
                .sum();
        }
    }
    transform(&k, m)
}

/// Inferred variances of all four quadratures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InferredVariances {
    pub x1: f64,
    pub x2: f64,
    pub y1: f64,
    pub y2: f64,
}

/// Inference from the individual-mode spectra.
pub fn inferred_from_modes(m: &SpectralMatrix) -> InferredVariances {
    let n = mode_matrix(m);
    InferredVariances {
        x1: inferred_variance(n[0][0], n[0][1], n[1][1]),
        x2: inferred_variance(n[1][1], n[0][1], n[0][0]),
        y1: inferred_variance(n[2][2], n[2][3], n[3][3]),
        y2: inferred_variance(n[3][3], n[2][3], n[2][2]),
    }
}

/// Inference written directly in the combined quadratures, with `p`, `m`
/// the self-spectra and `pm`, `mp` the two cross orderings.
pub fn inferred_from_combined(m: &SpectralMatrix) -> InferredVariances {
    let route = |p: f64, mm: f64, pm: f64, mp: f64| {
        let first = p + pm + mp + mm;
        let second = p - pm - mp + mm;
        let cross = p - pm + mp - mm;
        let v1 = if second > 0.0 {
            0.5 * (first - cross * cross / second)
        } else {
            f64::NAN
        };
        let v2 = if first > 0.0 {
            0.5 * (second - cross * cross / first)
        } else {
            f64::NAN
        };
        (v1, v2)
    };
    let (x1, x2) = route(m[0][0], m[1][1], m[0][1], m[1][0]);
    let (y1, y2) = route(m[2][2], m[3][3], m[2][3], m[3][2]);
    InferredVariances { x1, x2, y1, y2 }
}

/// Criteria over a frequency or angle axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriteriaResult {
    pub axis: Vec<f64>,
    pub duan: Flagged,
    pub v_inf: Vec<InferredVariances>,
    /// Product for mode 1, `V_x1·V_y1`.
    pub epr: Flagged,
    /// Product for mode 2, `V_x2·V_y2`.
    pub epr_mode2: Flagged,
    /// Jackknife standard errors of `duan` and `epr`, for simulated input.
    pub duan_std_err: Option<Vec<f64>>,
    pub epr_std_err: Option<Vec<f64>>,
    /// Linearised spectra used outside the region where they apply.
    pub extrapolated: bool,
}

pub fn criteria_from_matrices(axis: Vec<f64>, mats: &[SpectralMatrix]) -> CriteriaResult {
    let v_inf: Vec<InferredVariances> = mats.iter().map(inferred_from_modes).collect();
    let duan = mats.iter().map(|m| m[1][1] + m[2][2]).collect();
    let epr = v_inf.iter().map(|v| v.x1 * v.y1).collect();
    let epr2 = v_inf.iter().map(|v| v.x2 * v.y2).collect();
    CriteriaResult {
        axis,
        duan: Flagged::new(duan, duan_violated),
        v_inf,
        epr: Flagged::new(epr, epr_violated),
        epr_mode2: Flagged::new(epr2, epr_violated),
        duan_std_err: None,
        epr_std_err: None,
        extrapolated: false,
    }
}

/// Criteria from the linearised spectra over `grid`, with both modes
/// rotated by `theta`.
pub fn analytic_criteria(ss: &SteadyState, grid: &[f64], theta: f64) -> CriteriaResult {
    let co = coefficients(ss);
    let mats: Vec<SpectralMatrix> = grid
        .iter()
        .map(|&w| rotate(&linear_spectra::output_matrix(&co, ss.x0s, w), theta, theta))
        .collect();
    criteria_from_matrices(grid.to_vec(), &mats)
}

/// Output spectral matrix at bin `k` from intracavity pair means laid out
/// as `[pair * bins + bin]`.
pub fn simulated_matrix(means: &[f64], bins: usize, k: usize) -> SpectralMatrix {
    let mut m = [[0.0; 4]; 4];
    for a in 0..4 {
        for b in 0..4 {
            let v = 2.0 * means[pair_index(a, b, 4) * bins + k];
            m[a][b] = if a == b { 1.0 + v } else { v };
        }
    }
    m
}

/// Criteria from simulated spectra at every estimated frequency, with
/// jackknife errors over `blocks` groups of trajectories.
pub fn simulated_criteria(sim: &SimulatedSpectra, theta: f64, blocks: usize) -> CriteriaResult {
    let bins = sim.intracavity.bins();
    let evaluate = |means: &[f64]| -> CriteriaResult {
        let mats: Vec<SpectralMatrix> = (0..bins)
            .map(|k| rotate(&simulated_matrix(means, bins, k), theta, theta))
            .collect();
        criteria_from_matrices(sim.omega().to_vec(), &mats)
    };
    let mut result = evaluate(&sim.intracavity.mean);
    let (_, se) = sim.intracavity.jackknife(blocks, |means| {
        let r = evaluate(means);
        r.duan.values.into_iter().chain(r.epr.values).collect()
    });
    result.duan_std_err = Some(se[..bins].to_vec());
    result.epr_std_err = Some(se[bins..].to_vec());
    result
}

/// Criteria at one spectral matrix as a function of a common rotation
/// angle.
pub fn theta_sweep_matrix(m: &SpectralMatrix, thetas: &[f64]) -> CriteriaResult {
    let mats: Vec<SpectralMatrix> = thetas.iter().map(|&t| rotate(m, t, t)).collect();
    criteria_from_matrices(thetas.to_vec(), &mats)
}

/// Zero-frequency angle sweep from the linearised spectra. Above the
/// uninjected threshold the result is tagged as extrapolated.
pub fn theta_sweep_analytic(params: &ScaledParams, thetas: &[f64]) -> Result<CriteriaResult> {
    let ss = steady_state(params)?;
    let co = coefficients(&ss);
    let mut r = theta_sweep_matrix(&linear_spectra::output_matrix(&co, ss.x0s, 0.0), thetas);
    if params.mu0 > 1.0 {
        log::warn!(
            "linearised criteria above threshold (mu0 = {}) are extrapolated",
            params.mu0
        );
        r.extrapolated = true;
    }
    Ok(r)
}

/// Zero-frequency angle sweep from simulated spectra with jackknife errors.
pub fn theta_sweep_simulated(
    sim: &SimulatedSpectra,
    thetas: &[f64],
    blocks: usize,
) -> CriteriaResult {
    let bins = sim.intracavity.bins();
    let evaluate = |means: &[f64]| theta_sweep_matrix(&simulated_matrix(means, bins, 0), thetas);
    let mut result = evaluate(&sim.intracavity.mean);
    let (_, se) = sim.intracavity.jackknife(blocks, |means| {
        let r = evaluate(means);
        r.duan.values.into_iter().chain(r.epr.values).collect()
    });
    let n = thetas.len();
    result.duan_std_err = Some(se[..n].to_vec());
    result.epr_std_err = Some(se[n..].to_vec());
    result
}

/// Pump, injection and output powers in the unit of `p_th`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerBudget {
    pub p0: f64,
    pub p1: f64,
    pub p1_out: f64,
    pub p2_out: f64,
}

pub fn power_budget(
    p_th: f64,
    mu0: f64,
    mu1: f64,
    ss: &SteadyState,
    w1_over_w0: f64,
    w2_over_w0: f64,
) -> Result<PowerBudget> {
    check_frequency_ratios(w1_over_w0, w2_over_w0)?;
    Ok(PowerBudget {
        p0: mu0 * mu0 * p_th,
        p1: 2.0 * mu1 * mu1 * p_th * w1_over_w0,
        p1_out: 2.0 * ss.x1s * ss.x1s * p_th * w1_over_w0,
        p2_out: 2.0 * ss.x2s * ss.x2s * p_th * w2_over_w0,
    })
}
