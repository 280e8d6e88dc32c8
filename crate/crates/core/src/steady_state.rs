//! Classical steady states of the noise-free quadrature equations.
//!
//! With all y quadratures zero, the signal and idler amplitudes follow from
//! the pump quadrature, and the pump quadrature solves
//! `(2μ0 − x)(1 − x²/4)² − 2μ1²x = 0`. The exact solver expands this quintic
//! and isolates all of its real roots; three closed-form approximations cover
//! operation below, at and above the uninjected threshold.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{QuadratureState, ScaledParams};
use crate::polynomial::{Polynomial, RealRoot};
use crate::stability::{self, Stability};

/// Which computation produced a steady state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Exact,
    Below,
    AtThreshold,
    Above,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::Exact => "exact",
            Regime::Below => "below",
            Regime::AtThreshold => "at_threshold",
            Regime::Above => "above",
        }
    }
}

/// Classical fixed point; the y quadratures are identically zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteadyState {
    pub x0s: f64,
    pub x1s: f64,
    pub x2s: f64,
    pub regime: Regime,
    pub stable: bool,
    /// Set on the stability boundary, e.g. the uninjected oscillator at or
    /// above threshold where the signal/idler phase is free.
    pub marginal: bool,
}

impl SteadyState {
    /// Builds the on-shell state for a given pump quadrature, filling the
    /// signal and idler from [`signal_idler`] and classifying stability.
    pub fn on_shell(x0s: f64, mu1: f64, gamma_r: f64, regime: Regime) -> Result<Self> {
        let (x1s, x2s) = signal_idler(x0s, mu1)?;
        let mut ss = Self {
            x0s,
            x1s,
            x2s,
            regime,
            stable: false,
            marginal: false,
        };
        let report = stability::hurwitz_report(&ss, gamma_r);
        ss.stable = report.stable;
        ss.marginal = report.marginal;
        Ok(ss)
    }

    /// Uninjected oscillator at or above threshold: x0s clamps to 2 and the
    /// down-converted quadratures share the excess pump, x1s = x2s =
    /// sqrt(2(μ0 − 1)). The phase-diffusion direction makes it marginal.
    fn uninjected_above(mu0: f64, regime: Regime) -> Self {
        let amp = (2.0 * (mu0 - 1.0)).max(0.0).sqrt();
        Self {
            x0s: 2.0,
            x1s: amp,
            x2s: amp,
            regime,
            stable: false,
            marginal: true,
        }
    }

    pub fn y0s(&self) -> f64 {
        0.0
    }

    pub fn y1s(&self) -> f64 {
        0.0
    }

    pub fn y2s(&self) -> f64 {
        0.0
    }

    /// Injection parameter implied by the on-shell relation for x1s.
    pub fn implied_mu1(&self) -> f64 {
        0.5 * self.x1s * (1.0 - 0.25 * self.x0s * self.x0s)
    }

    /// Normalised intensities (x1s², x2s²).
    pub fn intensities(&self) -> (f64, f64) {
        (self.x1s * self.x1s, self.x2s * self.x2s)
    }

    pub fn as_state(&self) -> QuadratureState {
        QuadratureState::from_real(self.x0s, 0.0, self.x1s, 0.0, self.x2s, 0.0)
    }
}

/// The fixed-point quintic `(2μ0 − x)(1 − x²/4)² − 2μ1²x` in monomial form.
pub fn fixed_point_polynomial(mu0: f64, mu1: f64) -> Polynomial {
    Polynomial::new(vec![
        2.0 * mu0,
        -1.0 - 2.0 * mu1 * mu1,
        -mu0,
        0.5,
        mu0 / 8.0,
        -1.0 / 16.0,
    ])
}

/// All real roots of the fixed-point quintic, ascending.
///
/// Roots are searched inside the Cauchy bound of the polynomial (at most
/// `1 + 32·max(μ0, …)`), so large pump values that move the unstable
/// `x ≈ 2μ0` branch far out are still found. Double roots (the uninjected
/// `x = ±2` pair) are reported once with multiplicity 2.
pub fn pump_fixed_points(mu0: f64, mu1: f64) -> Vec<RealRoot> {
    fixed_point_polynomial(mu0, mu1).real_roots()
}

/// Linearised solution around x = 2μ0, valid well below threshold.
pub fn approx_below(mu0: f64, mu1: f64) -> f64 {
    if !(0.0..1.0).contains(&mu0) {
        log::warn!("below-threshold approximation used at mu0 = {mu0}");
    }
    let d = (1.0 - mu0 * mu0).powi(2);
    2.0 * mu0 * (1.0 - 2.0 * mu1 * mu1 / (d + 2.0 * mu1 * mu1))
}

/// Quartic approximation at μ0 = 1: `2 − (2μ1)^{2/3}`.
///
/// μ1 = 0 returns exactly 2, the degenerate uninjected threshold point.
pub fn approx_at_threshold(mu1: f64) -> f64 {
    if mu1 == 0.0 {
        log::warn!("threshold approximation at mu1 = 0 is the degenerate point x0s = 2");
        return 2.0;
    }
    2.0 - (2.0 * mu1).powf(2.0 / 3.0)
}

/// Quadratic (tangent parabola) approximation around x = 2 for μ0 > 1.
pub fn approx_above(mu0: f64, mu1: f64) -> Result<f64> {
    if mu0 <= 1.0 {
        return Err(Error::OutOfDomain(format!(
            "above-threshold approximation requires mu0 > 1, got {mu0}"
        )));
    }
    // μ1²/(2a)·(sqrt(1 + 8a/μ1²) − 1) rewritten as 4/(1 + sqrt(1 + 8a/μ1²)),
    // which stays finite as μ1 → 0.
    let a = mu0 - 1.0;
    let root = (1.0 + 8.0 * a / (mu1 * mu1)).sqrt();
    Ok(2.0 - 4.0 / (1.0 + root))
}

/// Signal and idler quadratures for a given pump quadrature:
/// `x1s = 8μ1/(4 − x0s²)`, `x2s = 4μ1·x0s/(4 − x0s²)`.
pub fn signal_idler(x0s: f64, mu1: f64) -> Result<(f64, f64)> {
    let den = 4.0 - x0s * x0s;
    if den == 0.0 {
        return Err(Error::SingularPump { x0s });
    }
    Ok((8.0 * mu1 / den, 4.0 * mu1 * x0s / den))
}

/// Exact stable steady state: the root of the quintic with 0 <= x0s < 2.
pub fn steady_state(params: &ScaledParams) -> Result<SteadyState> {
    params.validate()?;
    let (mu0, mu1) = (params.mu0, params.mu1);
    if mu1 == 0.0 && mu0 >= 1.0 {
        return Ok(SteadyState::uninjected_above(mu0, Regime::Exact));
    }
    let roots = pump_fixed_points(mu0, mu1);
    let candidates: Vec<f64> = roots
        .iter()
        .map(|r| r.value)
        .filter(|&x| (0.0..2.0).contains(&x))
        .collect();
    if candidates.len() > 1 {
        log::warn!(
            "{} fixed points in [0, 2) for mu0 = {mu0}, mu1 = {mu1}",
            candidates.len()
        );
    }
    let mut fallback = None;
    for x0s in candidates {
        let ss = SteadyState::on_shell(x0s, mu1, params.gamma_r, Regime::Exact)?;
        if ss.stable {
            return Ok(ss);
        }
        fallback.get_or_insert(ss);
    }
    fallback.ok_or(Error::NoPhysicalRoot { mu0, mu1 })
}

/// Regime-appropriate closed-form steady state.
///
/// `|μ0 − 1| < 0.05` uses the threshold formula, below that the linear one and
/// above it the quadratic one. The boundaries only affect reports; the exact
/// root from [`steady_state`] is what the spectra consume.
pub fn approximate_steady_state(params: &ScaledParams) -> Result<SteadyState> {
    params.validate()?;
    let (mu0, mu1) = (params.mu0, params.mu1);
    let (regime, x0s) = if (mu0 - 1.0).abs() < 0.05 {
        (Regime::AtThreshold, approx_at_threshold(mu1))
    } else if mu0 < 1.0 {
        (Regime::Below, approx_below(mu0, mu1))
    } else {
        (Regime::Above, approx_above(mu0, mu1)?)
    };
    if x0s == 2.0 {
        return Ok(SteadyState::uninjected_above(mu0.max(1.0), regime));
    }
    SteadyState::on_shell(x0s, mu1, params.gamma_r, regime)
}

/// Stability of an on-shell state from the reduced condition alone.
pub fn reduced_stability(x0s: f64, mu1: f64) -> Stability {
    stability::classify(stability::reduced_condition(x0s, mu1))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quintic(x: f64, mu0: f64, mu1: f64) -> f64 {
        (2.0 * mu0 - x) * (1.0 - x * x / 4.0).powi(2) - 2.0 * mu1 * mu1 * x
    }

    /// Independent oracle: bisection of the factored quintic on [lo, hi].
    fn bisect_oracle(mu0: f64, mu1: f64, mut lo: f64, mut hi: f64) -> f64 {
        let flo = quintic(lo, mu0, mu1);
        assert!(flo * quintic(hi, mu0, mu1) < 0.0);
        for _ in 0..200 {
            let m = 0.5 * (lo + hi);
            if (quintic(m, mu0, mu1) < 0.0) == (flo < 0.0) {
                lo = m;
            } else {
                hi = m;
            }
        }
        0.5 * (lo + hi)
    }

    fn params(mu0: f64, mu1: f64) -> ScaledParams {
        ScaledParams::new(mu0, mu1, 1.0, 0.01, 0.0).unwrap()
    }

    #[test]
    fn uninjected_roots() {
        let roots = pump_fixed_points(0.6, 0.0);
        assert_eq!(roots.len(), 3);
        assert!((roots[0].value + 2.0).abs() < 1e-7 && roots[0].multiplicity == 2);
        assert!((roots[1].value - 1.2).abs() < 1e-12 && roots[1].multiplicity == 1);
        assert!((roots[2].value - 2.0).abs() < 1e-7 && roots[2].multiplicity == 2);
    }

    #[test]
    fn injected_roots_match_bisection_oracle() {
        let roots = pump_fixed_points(0.6, 0.2);
        assert_eq!(roots.len(), 1);
        let oracle = bisect_oracle(0.6, 0.2, 0.0, 2.0);
        assert!((roots[0].value - oracle).abs() < 1e-12);
        assert!((oracle - 1.042_693_095).abs() < 1e-8);

        let roots = pump_fixed_points(2.0, 0.2);
        let stable = roots.iter().find(|r| r.value < 2.0).unwrap().value;
        let oracle = bisect_oracle(2.0, 0.2, 0.0, 2.0);
        assert!((stable - oracle).abs() < 1e-12);
        assert!((oracle - 1.734_894_370).abs() < 1e-8);
        // The quadratic approximation sits close by.
        let approx = 2.0 - 0.02 * (201f64.sqrt() - 1.0);
        assert!((stable - approx).abs() < 2e-3);
    }

    #[test]
    fn roots_have_small_residuals() {
        for &(mu0, mu1) in &[
            (0.0, 0.3),
            (0.6, 0.2),
            (1.0, 0.1),
            (2.0, 0.2),
            (3.0, 0.5),
            (3.0, 1.0),
        ] {
            let p = fixed_point_polynomial(mu0, mu1);
            let roots = p.real_roots();
            assert!((1..=5).contains(&roots.len()));
            for r in roots {
                assert!(p.eval(r.value).abs() < 1e-12, "residual at {r:?}");
            }
        }
    }

    #[test]
    fn far_root_beyond_three_is_found() {
        // For mu0 = 3 the unstable branch sits near x = 2·mu0 = 6.
        let roots = pump_fixed_points(3.0, 0.2);
        assert!(roots.iter().any(|r| r.value > 5.0));
    }

    #[test]
    fn approximation_examples() {
        assert!((approx_below(0.6, 0.0) - 1.2).abs() < 1e-15);
        assert!((approx_below(0.6, 0.2) - 1.003_92).abs() < 1e-5);
        assert!((approx_below(0.6, 0.1) - 1.144_14).abs() < 1e-5);
        assert!((approx_at_threshold(0.5) - 1.0).abs() < 1e-15);
        assert!((approx_at_threshold(0.2) - 1.457_1).abs() < 1e-4);
        assert_eq!(approx_at_threshold(0.0), 2.0);
        let quadratic = approx_above(2.0, 0.2).unwrap();
        assert!((quadratic - (2.0 - 0.02 * (201f64.sqrt() - 1.0))).abs() < 1e-14);
        assert!((quadratic - 1.7365).abs() < 1e-4);
        assert!(approx_above(1.0, 0.2).is_err());
        assert!(approx_above(0.5, 0.2).is_err());
        let far = approx_above(1e9, 0.2).unwrap();
        assert!(far < 2.0 && far > 2.0 - 1e-3);
        assert_eq!(approx_above(2.0, 0.0).unwrap(), 2.0);
    }

    #[test]
    fn approximations_against_exact_root() {
        let exact = steady_state(&params(1.0, 0.2)).unwrap().x0s;
        assert!((approx_at_threshold(0.2) - exact).abs() < 0.02);
        // The quadratic form is 0.018 below the exact root at mu0 = 1.5 and
        // closes in quickly further above threshold.
        let exact = steady_state(&params(1.5, 0.2)).unwrap().x0s;
        assert!((approx_above(1.5, 0.2).unwrap() - exact).abs() < 0.02);
        let exact = steady_state(&params(2.5, 0.2)).unwrap().x0s;
        assert!((approx_above(2.5, 0.2).unwrap() - exact).abs() < 5e-3);
    }

    #[test]
    fn approximation_accuracy_bands() {
        let rel = |a: f64, e: f64| ((a - e) / e).abs();
        for i in 1..=40 {
            let mu0 = 0.01 * i as f64;
            let e = steady_state(&params(mu0, 0.2)).unwrap().x0s;
            assert!(rel(approx_below(mu0, 0.2), e) < 0.01, "mu0 = {mu0}");
        }
        for i in 0..=145 {
            let mu0 = 1.55 + 0.01 * i as f64;
            let e = steady_state(&params(mu0, 0.2)).unwrap().x0s;
            assert!(
                rel(approx_above(mu0, 0.2).unwrap(), e) < 0.01,
                "mu0 = {mu0}"
            );
        }
        for j in 1..=25 {
            let mu1 = 0.01 * j as f64;
            let e = steady_state(&params(1.0, mu1)).unwrap().x0s;
            assert!((approx_at_threshold(mu1) - e).abs() < 0.05, "mu1 = {mu1}");
        }
    }

    #[test]
    fn signal_idler_examples() {
        let (x1, x2) = signal_idler(0.0, 0.3).unwrap();
        assert_eq!((x1, x2), (0.6, 0.0));
        let (x1, x2) = signal_idler(1.003_92, 0.2).unwrap();
        assert!((x1 - 0.534_73).abs() < 1e-5 && (x2 - 0.268_42).abs() < 1e-5);
        assert!((x1 * x1 - 0.286).abs() < 1e-3 && (x2 * x2 - 0.0720).abs() < 1e-4);
        let (x1, x2) = signal_idler(approx_below(0.6, 0.1), 0.1).unwrap();
        assert!((x1 * x1 - 0.0884).abs() < 1e-4 && (x2 * x2 - 0.0289).abs() < 1e-4);
        assert!(matches!(
            signal_idler(2.0, 0.1),
            Err(Error::SingularPump { .. })
        ));
        assert!(signal_idler(-2.0, 0.1).is_err());
    }

    #[test]
    fn steady_state_examples() {
        let ss = steady_state(&params(0.6, 0.2)).unwrap();
        assert!((ss.x0s - 1.043).abs() < 1e-3);
        assert!(ss.stable && !ss.marginal);
        assert_eq!(ss.regime, Regime::Exact);

        let ss = steady_state(&params(2.0, 0.0)).unwrap();
        assert_eq!(ss.x0s, 2.0);
        assert!(ss.marginal && !ss.stable);

        let ss = steady_state(&params(2.0, 0.2)).unwrap();
        assert!((ss.x0s - 1.7349).abs() < 1e-4);
        assert!(ss.stable);

        let ss = steady_state(&params(0.0, 0.2)).unwrap();
        assert!(ss.x0s.abs() < 1e-12 && (ss.x1s - 0.4).abs() < 1e-12);

        let ss = steady_state(&params(0.6, 0.0)).unwrap();
        assert!((ss.x0s - 1.2).abs() < 1e-12 && ss.stable);
    }

    #[test]
    fn approximate_regimes() {
        assert_eq!(
            approximate_steady_state(&params(0.3, 0.2)).unwrap().regime,
            Regime::Below
        );
        assert_eq!(
            approximate_steady_state(&params(1.02, 0.2)).unwrap().regime,
            Regime::AtThreshold
        );
        assert_eq!(
            approximate_steady_state(&params(2.0, 0.2)).unwrap().regime,
            Regime::Above
        );
        let ss = approximate_steady_state(&params(2.0, 0.0)).unwrap();
        assert!(ss.marginal);
    }

    #[test]
    fn grid_has_unique_stable_root_in_range() {
        for i in 0..=60 {
            let mu0 = 0.05 * i as f64;
            for j in 1..=25 {
                let mu1 = 0.02 * j as f64;
                let inside: Vec<_> = pump_fixed_points(mu0, mu1)
                    .into_iter()
                    .filter(|r| (0.0..2.0).contains(&r.value))
                    .collect();
                assert_eq!(inside.len(), 1, "mu0 = {mu0}, mu1 = {mu1}");
                assert!(stability::reduced_condition(inside[0].value, mu1) > 0.0);
            }
        }
    }

    #[test]
    fn signal_idler_satisfies_fixed_point_system() {
        for &(mu0, mu1) in &[(0.2, 0.1), (0.6, 0.2), (1.0, 0.25), (2.5, 0.4)] {
            let ss = steady_state(&params(mu0, mu1)).unwrap();
            let (x0, x1, x2) = (ss.x0s, ss.x1s, ss.x2s);
            let residuals = [
                x0 - 2.0 * mu0 + x1 * x2,
                -x1 + 2.0 * mu1 + 0.5 * x0 * x2,
                -x2 + 0.5 * x0 * x1,
            ];
            for r in residuals {
                assert!(r.abs() < 1e-10, "{r} at mu0 = {mu0}");
            }
        }
    }

    #[test]
    fn pump_quadrature_monotone_in_mu0() {
        for &mu1 in &[0.05, 0.2, 0.5] {
            let mut last = -1.0;
            for i in 0..=300 {
                let x = steady_state(&params(0.01 * i as f64, mu1)).unwrap().x0s;
                assert!(x >= last - 1e-12);
                assert!(x < 2.0);
                last = x;
            }
        }
    }
}
