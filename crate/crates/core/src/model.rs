//! Parameter and state types shared by every other module.
//!
//! Quadratures follow the phase convention θ0 = 0, θ1 = φ, θ2 = −φ so that the
//! classical pump and signal amplitudes are real. All downstream computation
//! happens in scaled, dimensionless units: time in units of the signal/idler
//! damping γ, pump quadratures scaled by `g·sqrt(2γr)` and signal/idler
//! quadratures by `g`.

use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Raw cavity and drive constants, in arbitrary but consistent units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    /// Real pump drive amplitude E0.
    pub pump_drive: f64,
    /// Injected signal amplitude E1.
    pub injection: f64,
    /// Phase of the injected signal relative to the pump, radians.
    pub injection_phase: f64,
    /// Nonlinear coupling χ (1/time).
    pub chi: f64,
    pub gamma0: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub w1_over_w0: Option<f64>,
    pub w2_over_w0: Option<f64>,
}

impl PhysicalParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("gamma0", self.gamma0),
            ("gamma1", self.gamma1),
            ("gamma2", self.gamma2),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(name, format!("damping must be positive, got {v}")));
            }
        }
        for (name, v) in [
            ("chi", self.chi),
            ("pump_drive", self.pump_drive),
            ("injection", self.injection),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(invalid(name, format!("must be finite and >= 0, got {v}")));
            }
        }
        if let (Some(w1), Some(w2)) = (self.w1_over_w0, self.w2_over_w0) {
            check_frequency_ratios(w1, w2)?;
        }
        Ok(())
    }
}

/// Energy conservation ω0 = ω1 + ω2 expressed on the ratios.
pub fn check_frequency_ratios(w1_over_w0: f64, w2_over_w0: f64) -> Result<()> {
    if !(w1_over_w0 > 0.0 && w2_over_w0 > 0.0) {
        return Err(invalid("w1_over_w0", "frequency ratios must be positive"));
    }
    if (w1_over_w0 + w2_over_w0 - 1.0).abs() > 1e-9 {
        return Err(invalid(
            "w1_over_w0",
            format!("frequency ratios must sum to 1 (got {w1_over_w0} + {w2_over_w0})"),
        ));
    }
    Ok(())
}

/// Dimensionless parameters of the scaled quadrature equations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaledParams {
    /// Pump parameter; 1 is the uninjected oscillation threshold.
    pub mu0: f64,
    /// Injection parameter.
    pub mu1: f64,
    /// Pump to signal damping ratio γ0/γ.
    pub gamma_r: f64,
    /// Noise scale χ/(γ·sqrt(2γr)).
    pub g: f64,
    /// Injection phase, radians.
    pub phi: f64,
}

impl ScaledParams {
    pub fn new(mu0: f64, mu1: f64, gamma_r: f64, g: f64, phi: f64) -> Result<Self> {
        let p = Self {
            mu0,
            mu1,
            gamma_r,
            g,
            phi,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu0 >= 0.0 && self.mu0.is_finite()) {
            return Err(invalid("mu0", format!("must be >= 0, got {}", self.mu0)));
        }
        if !(self.mu1 >= 0.0 && self.mu1.is_finite()) {
            return Err(invalid("mu1", format!("must be >= 0, got {}", self.mu1)));
        }
        if !(self.gamma_r > 0.0 && self.gamma_r.is_finite()) {
            return Err(invalid(
                "gamma_r",
                format!("must be > 0, got {}", self.gamma_r),
            ));
        }
        if !(self.g >= 0.0 && self.g.is_finite()) {
            return Err(invalid("g", format!("must be >= 0, got {}", self.g)));
        }
        if !self.phi.is_finite() {
            return Err(invalid("phi", "must be finite"));
        }
        Ok(())
    }
}

/// Converts physical constants to the scaled parameter set.
///
/// With γ = γ1 = γ2: `γr = γ0/γ`, `g = χ/(γ·sqrt(2γr))`, `μ0 = E0·χ/(γ·γ0)` and
/// `μ1 = E1·χ/(γ·sqrt(2γ·γ0))`.
pub fn scale_params(p: &PhysicalParams) -> Result<ScaledParams> {
    p.validate()?;
    if p.gamma1 != p.gamma2 {
        return Err(Error::AsymmetricDamping {
            gamma1: p.gamma1,
            gamma2: p.gamma2,
        });
    }
    let gamma = p.gamma1;
    let gamma_r = p.gamma0 / gamma;
    ScaledParams::new(
        p.pump_drive * p.chi / (gamma * p.gamma0),
        p.injection * p.chi / (gamma * (2.0 * gamma * p.gamma0).sqrt()),
        gamma_r,
        p.chi / (gamma * (2.0 * gamma_r).sqrt()),
        p.injection_phase,
    )
}

/// Rotates a quadrature pair by `theta`:
/// `(x cosθ + y sinθ, −x sinθ + y cosθ)`.
pub fn rotate_quadrature<T>(x: T, y: T, theta: f64) -> (T, T)
where
    T: Copy + Add<Output = T> + Sub<Output = T> + Mul<f64, Output = T>,
{
    let (s, c) = theta.sin_cos();
    (x * c + y * s, y * c - x * s)
}

/// Unscaled quadratures of one mode from its positive-P amplitude pair.
///
/// `X = e^{−iθ}α + e^{iθ}α⁺`, `Y = (e^{−iθ}α − e^{iθ}α⁺)/i`.
pub fn mode_quadratures(
    alpha: Complex64,
    alpha_plus: Complex64,
    theta: f64,
) -> (Complex64, Complex64) {
    let a = Complex64::from_polar(1.0, -theta) * alpha;
    let b = Complex64::from_polar(1.0, theta) * alpha_plus;
    (a + b, (a - b) * Complex64::new(0.0, -1.0))
}

/// Inverse of [`mode_quadratures`].
pub fn mode_amplitudes(x: Complex64, y: Complex64, theta: f64) -> (Complex64, Complex64) {
    let i = Complex64::i();
    (
        Complex64::from_polar(0.5, theta) * (x + i * y),
        Complex64::from_polar(0.5, -theta) * (x - i * y),
    )
}

/// Positive-P amplitude pairs (α_k, α_k⁺) for pump, signal and idler.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeAmplitudes {
    pub alpha: [Complex64; 3],
    pub alpha_plus: [Complex64; 3],
}

/// Quadrature reference phases (θ0, θ1, θ2) = (0, φ, −φ).
pub fn reference_phases(phi: f64) -> [f64; 3] {
    [0.0, phi, -phi]
}

/// Per-mode factor converting unscaled to scaled quadratures.
pub fn quadrature_scale(g: f64, gamma_r: f64) -> [f64; 3] {
    [g * (2.0 * gamma_r).sqrt(), g, g]
}

/// Scaled quadratures from positive-P amplitudes.
pub fn quadratures_from_amplitudes(
    amps: &ModeAmplitudes,
    params: &ScaledParams,
) -> QuadratureState {
    let theta = reference_phases(params.phi);
    let scale = quadrature_scale(params.g, params.gamma_r);
    let mut out = [Complex64::new(0.0, 0.0); 6];
    for k in 0..3 {
        let (x, y) = mode_quadratures(amps.alpha[k], amps.alpha_plus[k], theta[k]);
        out[2 * k] = x * scale[k];
        out[2 * k + 1] = y * scale[k];
    }
    QuadratureState::from_array(out)
}

/// Inverse of [`quadratures_from_amplitudes`]; requires `g > 0`.
pub fn amplitudes_from_quadratures(
    state: &QuadratureState,
    params: &ScaledParams,
) -> Result<ModeAmplitudes> {
    if params.g <= 0.0 {
        return Err(invalid("g", "amplitude reconstruction needs g > 0"));
    }
    let theta = reference_phases(params.phi);
    let scale = quadrature_scale(params.g, params.gamma_r);
    let c = state.to_array();
    let zero = Complex64::new(0.0, 0.0);
    let mut amps = ModeAmplitudes {
        alpha: [zero; 3],
        alpha_plus: [zero; 3],
    };
    for k in 0..3 {
        let (a, ap) = mode_amplitudes(c[2 * k] / scale[k], c[2 * k + 1] / scale[k], theta[k]);
        amps.alpha[k] = a;
        amps.alpha_plus[k] = ap;
    }
    Ok(amps)
}

/// Scaled quadratures of pump (0), signal (1) and idler (2).
///
/// Positive-P phase-space variables are independent, so the components are
/// complex in general; classical noise-free trajectories stay real.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct QuadratureState {
    pub x0: Complex64,
    pub y0: Complex64,
    pub x1: Complex64,
    pub y1: Complex64,
    pub x2: Complex64,
    pub y2: Complex64,
}

impl QuadratureState {
    pub const LABELS: [&'static str; 6] = ["x0", "y0", "x1", "y1", "x2", "y2"];

    pub fn from_real(x0: f64, y0: f64, x1: f64, y1: f64, x2: f64, y2: f64) -> Self {
        Self::from_array([x0, y0, x1, y1, x2, y2].map(|v| Complex64::new(v, 0.0)))
    }

    /// Components ordered `[x0, y0, x1, y1, x2, y2]`.
    pub fn to_array(&self) -> [Complex64; 6] {
        [self.x0, self.y0, self.x1, self.y1, self.x2, self.y2]
    }

    pub fn from_array(c: [Complex64; 6]) -> Self {
        Self {
            x0: c[0],
            y0: c[1],
            x1: c[2],
            y1: c[3],
            x2: c[4],
            y2: c[5],
        }
    }

    /// Largest component modulus.
    pub fn max_norm(&self) -> f64 {
        self.to_array().iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.to_array()
            .iter()
            .all(|c| c.re.is_finite() && c.im.is_finite())
    }

    /// Combined signal/idler quadratures `(x+, x−, y+, y−)` with
    /// `x± = (x1 ± x2)/√2`, `y± = (y1 ± y2)/√2`.
    pub fn combined(&self) -> [Complex64; 4] {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        [
            (self.x1 + self.x2) * r,
            (self.x1 - self.x2) * r,
            (self.y1 + self.y2) * r,
            (self.y1 - self.y2) * r,
        ]
    }

    fn zip_with(self, other: Self, f: impl Fn(Complex64, Complex64) -> Complex64) -> Self {
        let a = self.to_array();
        let b = other.to_array();
        Self::from_array(std::array::from_fn(|i| f(a[i], b[i])))
    }
}

impl Add for QuadratureState {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        self.zip_with(rhs, |a, b| a + b)
    }
}

impl Sub for QuadratureState {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self.zip_with(rhs, |a, b| a - b)
    }
}

impl Mul<f64> for QuadratureState {
    type Output = Self;
    fn mul(self, rhs: f64) -> Self {
        Self::from_array(self.to_array().map(|c| c * rhs))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, SQRT_2};

    fn physical(e0: f64, chi: f64, gamma: f64, gamma0: f64) -> PhysicalParams {
        PhysicalParams {
            pump_drive: e0,
            injection: 0.0,
            injection_phase: 0.0,
            chi,
            gamma0,
            gamma1: gamma,
            gamma2: gamma,
            w1_over_w0: None,
            w2_over_w0: None,
        }
    }

    #[test]
    fn scaling_examples() {
        let s = scale_params(&physical(1.0, 0.02, 1.0, 2.0)).unwrap();
        assert!((s.g - 0.01).abs() < 1e-15);
        assert_eq!(s.gamma_r, 2.0);

        let s = scale_params(&physical(0.0, 0.3, 1.3, 0.7)).unwrap();
        assert_eq!(s.mu0, 0.0);

        let s = scale_params(&physical(100.0, 0.01, 1.0, 2.0)).unwrap();
        assert!((s.mu0 - 0.5).abs() < 1e-15);
    }

    #[test]
    fn injection_scaling_reading() {
        let mut p = physical(0.0, 0.05, 2.0, 3.0);
        p.injection = 7.0;
        let s = scale_params(&p).unwrap();
        let expected = 7.0 * 0.05 / (2.0 * (2.0f64 * 2.0 * 3.0).sqrt());
        assert!((s.mu1 - expected).abs() < 1e-15);
    }

    #[test]
    fn asymmetric_damping_rejected() {
        let mut p = physical(1.0, 0.1, 1.0, 1.0);
        p.gamma2 = 1.5;
        assert!(matches!(
            scale_params(&p),
            Err(Error::AsymmetricDamping { .. })
        ));
    }

    #[test]
    fn invalid_physical_params() {
        let mut p = physical(1.0, 0.1, 1.0, 1.0);
        p.gamma0 = 0.0;
        assert!(scale_params(&p).is_err());
        let mut p = physical(-1.0, 0.1, 1.0, 1.0);
        assert!(p.validate().is_err());
        p.pump_drive = 1.0;
        p.w1_over_w0 = Some(0.6);
        p.w2_over_w0 = Some(0.6);
        assert!(p.validate().is_err());
        p.w2_over_w0 = Some(0.4);
        assert!(p.validate().is_ok());
    }

    #[test]
    fn rotation_examples() {
        let (a, b) = rotate_quadrature(1.0, 0.0, 0.0);
        assert_eq!((a, b), (1.0, 0.0));
        let (a, b) = rotate_quadrature(1.0, 0.0, FRAC_PI_2);
        assert!(a.abs() < 1e-15 && (b + 1.0).abs() < 1e-15);
        let (a, b) = rotate_quadrature(1.0, 1.0, FRAC_PI_4);
        assert!((a - SQRT_2).abs() < 1e-15 && b.abs() < 1e-15);
    }

    #[test]
    fn amplitude_examples() {
        let one = Complex64::new(1.0, 0.0);
        let i = Complex64::i();
        let (x, y) = mode_quadratures(one, one, 0.0);
        assert_eq!((x, y), (Complex64::new(2.0, 0.0), Complex64::new(0.0, 0.0)));
        let (x, y) = mode_quadratures(i, -i, 0.0);
        assert!((x - 0.0).norm() < 1e-15 && (y - 2.0).norm() < 1e-15);
        let (x, y) = mode_quadratures(one, one, FRAC_PI_2);
        assert!(x.norm() < 1e-15 && (y + 2.0).norm() < 1e-15);
    }

    #[test]
    fn scaled_quadratures_use_mode_factors() {
        let params = ScaledParams::new(0.5, 0.1, 2.0, 0.05, 0.3).unwrap();
        let one = Complex64::new(1.0, 0.0);
        let amps = ModeAmplitudes {
            alpha: [one; 3],
            alpha_plus: [one; 3],
        };
        let q = quadratures_from_amplitudes(&amps, &params);
        assert!((q.x0.re - 2.0 * 0.05 * 2.0).abs() < 1e-15);
        assert!((q.x1.re - 2.0 * 0.05 * 0.3f64.cos()).abs() < 1e-15);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn rotation_round_trip(x in -1e3..1e3f64, y in -1e3..1e3f64, t in -10.0..10.0f64) {
                let (a, b) = rotate_quadrature(x, y, t);
                let (u, v) = rotate_quadrature(a, b, -t);
                prop_assert!((u - x).abs() < 1e-12 * (1.0 + x.abs() + y.abs()));
                prop_assert!((v - y).abs() < 1e-12 * (1.0 + x.abs() + y.abs()));
                let n0 = x * x + y * y;
                prop_assert!((a * a + b * b - n0).abs() <= 1e-12 * (1.0 + n0));
            }

            #[test]
            fn amplitude_round_trip(re in -5.0..5.0f64, im in -5.0..5.0f64, t in -4.0..4.0f64) {
                let a = Complex64::new(re, im);
                let (x, y) = mode_quadratures(a, a.conj(), t);
                prop_assert!(x.im.abs() < 1e-12 && y.im.abs() < 1e-12);
                let (b, bp) = mode_amplitudes(x, y, t);
                prop_assert!((b - a).norm() < 1e-12);
                prop_assert!((bp - a.conj()).norm() < 1e-12);
            }

            #[test]
            fn mu0_scale_consistent(e0 in 0.0..100.0f64, chi in 1e-3..1.0f64, k in 0.1..10.0f64) {
                let a = scale_params(&physical(e0, chi, 1.2, 0.8)).unwrap();
                let b = scale_params(&physical(e0 / k, chi * k, 1.2, 0.8)).unwrap();
                prop_assert!((a.mu0 - b.mu0).abs() <= 1e-12 * (1.0 + a.mu0));
            }
        }
    }
}
