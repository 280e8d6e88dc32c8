//! Real root isolation for low-degree real polynomials.
//!
//! Roots are isolated by derivative splitting: between consecutive real
//! critical points the polynomial is monotone, so each such interval holds
//! at most one simple root, found by bisection and polished with Newton
//! steps. Critical points where the polynomial itself vanishes are reported
//! as multiple roots.

/// Dense polynomial with coefficients in ascending order of power.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

/// A real root and its detected multiplicity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RealRoot {
    pub value: f64,
    pub multiplicity: usize,
}

impl Polynomial {
    /// Builds from ascending coefficients; trailing zeros are trimmed.
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        while coeffs.len() > 1 && coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
        Self { coeffs }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    /// Sum of |c_i|·|x|^i, the natural scale for residuals at `x`.
    pub fn magnitude(&self, x: f64) -> f64 {
        let ax = x.abs();
        self.coeffs
            .iter()
            .rev()
            .fold(0.0, |acc, &c| acc * ax + c.abs())
    }

    pub fn derivative(&self) -> Self {
        if self.coeffs.len() <= 1 {
            return Self::new(vec![0.0]);
        }
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, &c)| c * i as f64)
                .collect(),
        )
    }

    /// Cauchy bound: every root satisfies |x| <= 1 + max |c_i / c_n|.
    pub fn cauchy_bound(&self) -> f64 {
        let n = self.degree();
        let lead = self.coeffs[n];
        1.0 + self.coeffs[..n]
            .iter()
            .map(|c| (c / lead).abs())
            .fold(0.0, f64::max)
    }

    /// All real roots, ascending, with multiplicities.
    pub fn real_roots(&self) -> Vec<RealRoot> {
        if self.degree() == 0 {
            return Vec::new();
        }
        let b = self.cauchy_bound();
        self.real_roots_in(-b, b)
    }

    /// Real roots in the closed interval `[lo, hi]`, ascending.
    pub fn real_roots_in(&self, lo: f64, hi: f64) -> Vec<RealRoot> {
        match self.degree() {
            0 => Vec::new(),
            1 => {
                let x = -self.coeffs[0] / self.coeffs[1];
                if (lo..=hi).contains(&x) {
                    vec![RealRoot {
                        value: x,
                        multiplicity: 1,
                    }]
                } else {
                    Vec::new()
                }
            }
            _ => self.isolate(lo, hi),
        }
    }

    fn is_zero_at(&self, x: f64) -> bool {
        self.eval(x).abs() <= 64.0 * f64::EPSILON * self.magnitude(x)
    }

    fn isolate(&self, lo: f64, hi: f64) -> Vec<RealRoot> {
        let critical = self.derivative().real_roots_in(lo, hi);
        let mut roots: Vec<RealRoot> = Vec::new();

        // Critical points where p also vanishes are multiple roots.
        for c in &critical {
            if self.is_zero_at(c.value) {
                roots.push(RealRoot {
                    value: c.value,
                    multiplicity: c.multiplicity + 1,
                });
            }
        }

        let mut breaks = Vec::with_capacity(critical.len() + 2);
        breaks.push(lo);
        breaks.extend(critical.iter().map(|c| c.value));
        breaks.push(hi);

        for w in breaks.windows(2) {
            let (a, b) = (w[0], w[1]);
            if b <= a {
                continue;
            }
            let (fa, fb) = (self.eval(a), self.eval(b));
            if fa == 0.0 && !near_multiple(&roots, a) {
                push_unique(&mut roots, a);
            }
            if fb == 0.0 && !near_multiple(&roots, b) {
                push_unique(&mut roots, b);
            }
            if fa * fb < 0.0 {
                let x = self.bisect(a, b, fa);
                if !near_multiple(&roots, x) {
                    push_unique(&mut roots, x);
                }
            }
        }
        roots.sort_by(|a, b| a.value.total_cmp(&b.value));
        roots
    }

    fn bisect(&self, mut a: f64, mut b: f64, mut fa: f64) -> f64 {
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if m <= a || m >= b {
                break;
            }
            let fm = self.eval(m);
            if fm == 0.0 {
                return m;
            }
            if (fm < 0.0) == (fa < 0.0) {
                a = m;
                fa = fm;
            } else {
                b = m;
            }
        }
        let (fa, fb) = (self.eval(a).abs(), self.eval(b).abs());
        let mut x = if fa <= fb { a } else { b };
        // Newton polish, kept only while it lowers the residual.
        let d = self.derivative();
        for _ in 0..3 {
            let slope = d.eval(x);
            if slope == 0.0 {
                break;
            }
            let next = x - self.eval(x) / slope;
            if self.eval(next).abs() < self.eval(x).abs() {
                x = next;
            } else {
                break;
            }
        }
        x
    }
}

fn near_multiple(roots: &[RealRoot], x: f64) -> bool {
    roots
        .iter()
        .any(|r| r.multiplicity > 1 && (r.value - x).abs() <= 1e-7 * (1.0 + x.abs()))
}

fn push_unique(roots: &mut Vec<RealRoot>, x: f64) {
    if !roots.iter().any(|r| r.value == x) {
        roots.push(RealRoot {
            value: x,
            multiplicity: 1,
        });
    }
}
