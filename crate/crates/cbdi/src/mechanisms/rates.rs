//! State-dependent immigration rate functions and their regularity moduli.
//!
//! Rates come from a closed parametric family plus a small composition
//! language (affine and quadratic pieces combined with min/max), which covers
//! constant rates, proportional rates, and competition drifts.

use crate::mechanisms::levy::{LevyMeasure, ZKernel};

/// Scalar rate expression `x ↦ value`.
#[derive(Debug, Clone, PartialEq)]
pub enum RateExpr {
    Const(f64),
    /// `intercept + slope·x`.
    Affine { intercept: f64, slope: f64 },
    /// `c0 + c1·x + c2·x²`.
    Quadratic { c0: f64, c1: f64, c2: f64 },
    Min(Box<RateExpr>, Box<RateExpr>),
    Max(Box<RateExpr>, Box<RateExpr>),
}

impl RateExpr {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            RateExpr::Const(c) => *c,
            RateExpr::Affine { intercept, slope } => intercept + slope * x,
            RateExpr::Quadratic { c0, c1, c2 } => c0 + x * (c1 + c2 * x),
            RateExpr::Min(a, b) => a.eval(x).min(b.eval(x)),
            RateExpr::Max(a, b) => a.eval(x).max(b.eval(x)),
        }
    }

    pub fn zero() -> Self {
        RateExpr::Const(0.0)
    }

    /// `slope·x`.
    pub fn linear(slope: f64) -> Self {
        RateExpr::Affine { intercept: 0.0, slope }
    }

    /// Competition drift `β·x − min(β·x/2, γ·x²) = max(β·x/2, β·x − γ·x²)`,
    /// nondecreasing in `x` whenever β, γ ≥ 0 (the subtracted competition
    /// term is capped at half the linear growth, so the slope never turns
    /// negative).
    pub fn competition(beta: f64, gamma: f64) -> Self {
        RateExpr::Max(
            Box::new(RateExpr::linear(beta / 2.0)),
            Box::new(RateExpr::Quadratic { c0: 0.0, c1: beta, c2: -gamma }),
        )
    }
}

/// Separable jump rate `q(x, z) = state_factor(x) · kernel(z)`.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpRate {
    pub state_factor: RateExpr,
    pub kernel: ZKernel,
}

impl JumpRate {
    pub fn constant(level: f64) -> Self {
        JumpRate { state_factor: RateExpr::Const(level), kernel: ZKernel::One }
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    /// `q(x, z) = x` (the dependent-immigration rate that shifts the
    /// branching mechanism).
    pub fn proportional() -> Self {
        JumpRate { state_factor: RateExpr::linear(1.0), kernel: ZKernel::One }
    }

    pub fn eval(&self, x: f64, z: f64) -> f64 {
        self.state_factor.eval(x) * self.kernel.eval(z)
    }

    /// `sup_z q(x, z)` — the thinning bound the drivers must cover.
    pub fn sup_over_z(&self, x: f64) -> f64 {
        self.state_factor.eval(x) * self.kernel.sup()
    }

    /// `∫ q(x, z) z ν(dz)` over `z ∈ [a, b)`.
    pub fn weighted_mass(&self, nu: &LevyMeasure, x: f64, a: f64, b: f64) -> f64 {
        self.state_factor.eval(x) * nu.weighted_first_moment(&self.kernel, a, b)
    }
}

/// Concave modulus `r(u)` for the continuity condition; both families satisfy
/// `∫_{0+} r(u)^{-1} du = ∞`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Modulus {
    /// `r(u) = lipschitz · u`.
    Linear { lipschitz: f64 },
    /// `r(u) = scale · u(1 − ln u)` for u ≤ 1, constant `scale` beyond.
    LogLinear { scale: f64 },
}

impl Modulus {
    pub fn eval(&self, u: f64) -> f64 {
        debug_assert!(u >= 0.0);
        match self {
            Modulus::Linear { lipschitz } => lipschitz * u,
            Modulus::LogLinear { scale } => {
                if u >= 1.0 {
                    *scale
                } else if u == 0.0 {
                    0.0
                } else {
                    scale * u * (1.0 - u.ln())
                }
            }
        }
    }
}

/// Dependent immigration rates `(β, q)` with their declared growth constant
/// and continuity modulus.
#[derive(Debug, Clone, PartialEq)]
pub struct DependentRates {
    pub beta: RateExpr,
    pub q: JumpRate,
    pub growth_constant: f64,
    pub modulus: Modulus,
}

impl DependentRates {
    /// No immigration at all.
    pub fn none() -> Self {
        DependentRates {
            beta: RateExpr::zero(),
            q: JumpRate::zero(),
            growth_constant: 0.0,
            modulus: Modulus::Linear { lipschitz: 0.0 },
        }
    }

    /// Constant rates `β(x) ≡ β`, `q ≡ q_level`: the classical
    /// state-independent immigration.
    pub fn constant(beta: f64, q_level: f64, nu: &LevyMeasure) -> Self {
        let nu_mass = nu.weighted_first_moment(&ZKernel::One, 0.0, f64::INFINITY);
        DependentRates {
            beta: RateExpr::Const(beta),
            q: JumpRate::constant(q_level),
            growth_constant: beta + q_level * if nu_mass.is_finite() { nu_mass } else { 0.0 },
            modulus: Modulus::Linear { lipschitz: 0.0 },
        }
    }

    /// `β(x) = β·x`, `q(x,z) = x`: rewrites the branching mechanism.
    pub fn proportional(beta: f64, nu: &LevyMeasure) -> Self {
        let nu_mass = nu.first_moment();
        DependentRates {
            beta: RateExpr::linear(beta),
            q: JumpRate::proportional(),
            growth_constant: beta + nu_mass,
            modulus: Modulus::Linear { lipschitz: beta + nu_mass },
        }
    }

    /// `β(x) = β·x − min(β·x/2, γ·x²)`, `q ≡ 0`: branching with competition.
    pub fn competition(beta: f64, gamma: f64) -> Self {
        DependentRates {
            beta: RateExpr::competition(beta, gamma),
            q: JumpRate::zero(),
            growth_constant: beta,
            modulus: Modulus::Linear { lipschitz: beta },
        }
    }

    /// Capped copy `(β(·∧n), q(·∧n, z))` used by localization.
    pub fn capped(&self, level: f64) -> CappedRates<'_> {
        CappedRates { inner: self, level }
    }
}

/// View of a rate set with the state argument capped at a localization level.
#[derive(Debug, Clone, Copy)]
pub struct CappedRates<'a> {
    inner: &'a DependentRates,
    level: f64,
}

impl CappedRates<'_> {
    pub fn beta(&self, x: f64) -> f64 {
        self.inner.beta.eval(x.min(self.level))
    }

    pub fn q_state_factor(&self, x: f64) -> f64 {
        self.inner.q.state_factor.eval(x.min(self.level))
    }

    pub fn q_sup(&self, x: f64) -> f64 {
        self.inner.q.sup_over_z(x.min(self.level))
    }

    pub fn level(&self) -> f64 {
        self.level
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn competition_is_nondecreasing_and_dominated() {
        let beta = 0.6;
        let (g1, g2) = (0.8, 0.2);
        let strong = RateExpr::competition(beta, g1);
        let weak = RateExpr::competition(beta, g2);
        let mut prev_s = 0.0;
        let mut prev_w = 0.0;
        for i in 0..400 {
            let x = i as f64 * 0.05;
            let s = strong.eval(x);
            let w = weak.eval(x);
            assert!(s >= 0.0 && w >= 0.0);
            assert!(s <= w + 1e-15, "domination fails at x={x}: {s} > {w}");
            assert!(s + 1e-12 >= prev_s, "strong not monotone at x={x}");
            assert!(w + 1e-12 >= prev_w, "weak not monotone at x={x}");
            prev_s = s;
            prev_w = w;
        }
        // competition never exceeds the bare linear drift
        for i in 0..100 {
            let x = i as f64 * 0.2;
            assert!(strong.eval(x) <= beta * x + 1e-12);
        }
    }

    #[test]
    fn modulus_families_are_increasing_and_concave() {
        for m in [Modulus::Linear { lipschitz: 2.0 }, Modulus::LogLinear { scale: 1.5 }] {
            let mut prev = 0.0;
            let mut prev_slope = f64::INFINITY;
            for i in 1..200 {
                let u = i as f64 * 0.02;
                let v = m.eval(u);
                assert!(v >= prev - 1e-12);
                let slope = (v - prev) / 0.02;
                assert!(slope <= prev_slope + 1e-9, "slope increased at u={u}");
                prev = v;
                prev_slope = slope;
            }
        }
    }

    #[test]
    fn proportional_rates_match_shifted_mechanism_bookkeeping() {
        let nu = LevyMeasure::unit_atom(1.0);
        let r = DependentRates::proportional(0.5, &nu);
        assert_eq!(r.beta.eval(2.0), 1.0);
        assert_eq!(r.q.eval(2.0, 1.0), 2.0);
        assert!((r.modulus.eval(1.0) - 1.5).abs() < 1e-12);
    }
}
