//! Linear stability of classical steady states.
//!
//! Linearising the noise-free equations about a fixed point with vanishing y
//! quadratures splits the deviations into an x block and a y block, each a
//! 3×3 real system over (pump, signal, idler). Stability is decided by the
//! Hurwitz conditions on the two characteristic cubics, and independently by
//! computing the eigenvalues from the matrix entries.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::steady_state::SteadyState;

/// Half-width of the band around zero treated as marginal.
pub const MARGINAL_BAND: f64 = 1e-12;

pub type Matrix3 = [[f64; 3]; 3];

/// Outcome of a stability test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stability {
    Stable,
    Unstable,
    Marginal,
}

impl Stability {
    pub fn is_stable(self) -> bool {
        self == Stability::Stable
    }
}

/// Sign classification with the marginal band.
pub fn classify(value: f64) -> Stability {
    if value.abs() < MARGINAL_BAND {
        Stability::Marginal
    } else if value > 0.0 {
        Stability::Stable
    } else {
        Stability::Unstable
    }
}

/// Drift matrices of the x and y deviation blocks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftMatrices {
    pub mx: Matrix3,
    pub my: Matrix3,
}

pub fn drift_matrices(ss: &SteadyState, gamma_r: f64) -> DriftMatrices {
    let (x0, x1, x2) = (ss.x0s, ss.x1s, ss.x2s);
    let mx = [
        [-gamma_r, -gamma_r * x2, -gamma_r * x1],
        [0.5 * x2, -1.0, 0.5 * x0],
        [0.5 * x1, 0.5 * x0, -1.0],
    ];
    let mut my = mx;
    my[1][2] = -0.5 * x0;
    my[2][1] = -0.5 * x0;
    DriftMatrices { mx, my }
}

/// Coefficients of `λ³ + c1λ² + c2λ + c3` (x block) and the d analogues
/// (y block), with their Hurwitz determinants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HurwitzReport {
    pub c: [f64; 3],
    pub d: [f64; 3],
    pub h: [f64; 3],
    pub g: [f64; 3],
    pub stable: bool,
    pub marginal: bool,
    pub reduced_condition_value: f64,
}

pub fn hurwitz_report(ss: &SteadyState, gamma_r: f64) -> HurwitzReport {
    let (x0, x1, x2) = (ss.x0s, ss.x1s, ss.x2s);
    let u = 1.0 - 0.25 * x0 * x0;
    let sq = 0.5 * (x1 * x1 + x2 * x2);
    let cross = 0.5 * x0 * x1 * x2;

    let c1 = 2.0 + gamma_r;
    let c2 = u + 2.0 * gamma_r + gamma_r * sq;
    let c3 = gamma_r * (u + sq + cross);
    let d3 = gamma_r * (u + sq - cross);
    let (d1, d2) = (c1, c2);

    let h2 = c1 * c2 - c3;
    let g2 = d1 * d2 - d3;
    let h = [c1, h2, c3 * h2];
    let g = [d1, g2, d3 * g2];

    let reduced = reduced_condition(x0, ss.implied_mu1());
    let marginal = (x0.abs() - 2.0).abs() < MARGINAL_BAND || reduced.abs() < MARGINAL_BAND;
    let stable = !marginal
        && [c1, c2, c3, d1, d2, d3]
            .iter()
            .chain(h.iter())
            .chain(g.iter())
            .all(|&v| v > 0.0);
    HurwitzReport {
        c: [c1, c2, c3],
        d: [d1, d2, d3],
        h,
        g,
        stable,
        marginal,
        reduced_condition_value: reduced,
    }
}

/// `(1 − x0s²/4)[2μ1² + (1 − x0s²/4)²]`, positive exactly when an on-shell
/// steady state is stable. Returns 0 at |x0s| = 2.
pub fn reduced_condition(x0s: f64, mu1: f64) -> f64 {
    if (x0s.abs() - 2.0).abs() < MARGINAL_BAND {
        return 0.0;
    }
    let u = 1.0 - 0.25 * x0s * x0s;
    u * (2.0 * mu1 * mu1 + u * u)
}

/// Monic characteristic cubic `λ³ + a λ² + b λ + c` of a 3×3 matrix, built
/// from its trace, principal 2×2 minors and determinant.
pub fn characteristic_polynomial(m: &Matrix3) -> [f64; 3] {
    let trace = m[0][0] + m[1][1] + m[2][2];
    let minors = m[0][0] * m[1][1] - m[0][1] * m[1][0] + m[0][0] * m[2][2] - m[0][2] * m[2][0]
        + m[1][1] * m[2][2]
        - m[1][2] * m[2][1];
    [-trace, minors, -determinant(m)]
}

pub fn determinant(m: &Matrix3) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Roots of the monic cubic `λ³ + a λ² + b λ + c`.
///
/// Three real roots come from the trigonometric form; otherwise the real
/// root comes from Cardano's formula, is Newton-polished, and the remaining
/// conjugate pair from the deflated quadratic.
pub fn cubic_roots(a: f64, b: f64, c: f64) -> [Complex64; 3] {
    let shift = a / 3.0;
    let p = b - a * a / 3.0;
    let q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c;
    let disc = 0.25 * q * q + p * p * p / 27.0;
    let eval = |x: f64| ((x + a) * x + b) * x + c;
    let slope = |x: f64| (3.0 * x + 2.0 * a) * x + b;

    if disc <= 0.0 && p < 0.0 {
        let r = 2.0 * (-p / 3.0).sqrt();
        let arg = (3.0 * q / (p * r)).clamp(-1.0, 1.0);
        let phi = arg.acos() / 3.0;
        let mut roots = [0.0; 3];
        for (k, root) in roots.iter_mut().enumerate() {
            let t = r * (phi - 2.0 * std::f64::consts::PI * k as f64 / 3.0).cos();
            *root = polish(t - shift, eval, slope);
        }
        roots.sort_by(f64::total_cmp);
        return roots.map(|x| Complex64::new(x, 0.0));
    }

    let s = disc.max(0.0).sqrt();
    let t = (-0.5 * q + s).cbrt() + (-0.5 * q - s).cbrt();
    let r = polish(t - shift, eval, slope);
    // λ³ + aλ² + bλ + c = (λ − r)(λ² + (a + r)λ + (b + r(a + r)))
    let qb = a + r;
    let qc = b + r * qb;
    let half = -0.5 * qb;
    let dq = half * half - qc;
    let pair = if dq >= 0.0 {
        let root = dq.sqrt();
        [
            Complex64::new(half - root, 0.0),
            Complex64::new(half + root, 0.0),
        ]
    } else {
        let im = (-dq).sqrt();
        [Complex64::new(half, -im), Complex64::new(half, im)]
    };
    [Complex64::new(r, 0.0), pair[0], pair[1]]
}

fn polish(mut x: f64, f: impl Fn(f64) -> f64, df: impl Fn(f64) -> f64) -> f64 {
    for _ in 0..3 {
        let d = df(x);
        if d == 0.0 {
            break;
        }
        let next = x - f(x) / d;
        if f(next).abs() < f(x).abs() {
            x = next;
        } else {
            break;
        }
    }
    x
}

pub fn eigenvalues(m: &Matrix3) -> [Complex64; 3] {
    let [a, b, c] = characteristic_polynomial(m);
    cubic_roots(a, b, c)
}

/// Eigenvalue-based classification of both blocks; real parts within `tol`
/// of zero count as marginal.
pub fn eigen_stability(dm: &DriftMatrices, tol: f64) -> Stability {
    let max_re = eigenvalues(&dm.mx)
        .iter()
        .chain(eigenvalues(&dm.my).iter())
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max);
    if max_re.abs() <= tol {
        Stability::Marginal
    } else if max_re < 0.0 {
        Stability::Stable
    } else {
        Stability::Unstable
    }
}
