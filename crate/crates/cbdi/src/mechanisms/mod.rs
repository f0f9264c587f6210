//! Branching and immigration mechanisms, dependent rate functions, and the
//! grid-based audits of the standing growth/continuity conditions.

pub mod levy;
pub mod rates;

pub use levy::{LevyMeasure, MeasureRole, ZKernel};
pub use rates::{CappedRates, DependentRates, JumpRate, Modulus, RateExpr};

use crate::error::{Error, Result};

/// Branching mechanism `φ(λ) = b·λ + c·λ² + ∫ (e^{-zλ} - 1 + zλ) m(dz)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchingMechanism {
    /// Linear drift coefficient `b` (any sign; positive is subcritical).
    pub drift: f64,
    /// Diffusion coefficient `c ≥ 0`.
    pub diffusion: f64,
    /// Branching jump measure `m` with ∫ (z ∧ z²) m(dz) < ∞.
    pub jumps: LevyMeasure,
}

/// The limit slope `δ = φ'(∞)`; finite exactly when `c = 0` and
/// `∫ z m(dz) < ∞`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SlopeAtInfinity {
    Finite(f64),
    Infinite,
}

impl SlopeAtInfinity {
    pub fn finite(&self) -> Option<f64> {
        match self {
            SlopeAtInfinity::Finite(d) => Some(*d),
            SlopeAtInfinity::Infinite => None,
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, SlopeAtInfinity::Finite(_))
    }
}

impl BranchingMechanism {
    pub fn new(drift: f64, diffusion: f64, jumps: LevyMeasure) -> Result<Self> {
        if !(diffusion >= 0.0) || !diffusion.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "diffusion coefficient must be nonnegative, got {diffusion}"
            )));
        }
        if !drift.is_finite() {
            return Err(Error::InvalidParameter("drift must be finite".into()));
        }
        jumps.validate(MeasureRole::Branching)?;
        Ok(BranchingMechanism { drift, diffusion, jumps })
    }

    /// Pure drift/diffusion mechanism (the CIR family when `diffusion > 0`).
    pub fn cir(drift: f64, diffusion: f64) -> Self {
        BranchingMechanism { drift, diffusion, jumps: LevyMeasure::Zero }
    }

    /// Evaluate `φ(λ)` for `λ ≥ 0`; exact for atomic jump measures, closed
    /// form for the kernel families.
    pub fn phi(&self, lambda: f64) -> f64 {
        debug_assert!(lambda >= 0.0);
        self.drift * lambda
            + self.diffusion * lambda * lambda
            + self.jumps.branching_integral(lambda)
    }

    /// `φ'(λ) = b + 2cλ + ∫ z(1 - e^{-zλ}) m(dz)`.
    pub fn phi_prime(&self, lambda: f64) -> f64 {
        let jump_part = match &self.jumps {
            LevyMeasure::Zero => 0.0,
            LevyMeasure::Atomic(atoms) => atoms
                .iter()
                .map(|&(z, w)| w * z * (-(-lambda * z).exp_m1()))
                .sum(),
            // d/dλ of the closed forms
            LevyMeasure::Exponential { mass, rate } => {
                mass * lambda * (lambda + 2.0 * rate)
                    / (rate * (rate + lambda) * (rate + lambda))
            }
            LevyMeasure::Stable { scale, index } => {
                scale * crate::numeric::gamma(2.0 - index) / (index - 1.0)
                    * lambda.powf(index - 1.0)
            }
        };
        self.drift + 2.0 * self.diffusion * lambda + jump_part
    }

    /// `δ = φ'(∞)`.
    pub fn slope_at_infinity(&self) -> SlopeAtInfinity {
        if self.diffusion > 0.0 {
            return SlopeAtInfinity::Infinite;
        }
        let m1 = self.jumps.first_moment();
        if m1.is_finite() {
            SlopeAtInfinity::Finite(self.drift + m1)
        } else {
            SlopeAtInfinity::Infinite
        }
    }

    /// Largest nonnegative root of `φ` (zero when `φ'(0) = b ≥ 0`); the flow
    /// of the cumulant equation is confined to `[0, max(λ, root)]`.
    pub fn largest_root(&self) -> f64 {
        if self.drift >= 0.0 {
            return 0.0;
        }
        // φ(0)=0, φ convex, φ'(0)=b<0: a single positive root exists as soon
        // as φ eventually turns positive; expand a bracket then bisect.
        let mut hi = 1.0;
        for _ in 0..200 {
            if self.phi(hi) > 0.0 {
                break;
            }
            hi *= 2.0;
        }
        if self.phi(hi) <= 0.0 {
            return f64::INFINITY; // non-conservative tail; callers treat as unbounded
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.phi(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

/// Immigration mechanism `ψ(λ) = β₀·λ + ∫ (1 - e^{-λz}) ν(dz)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImmigrationMechanism {
    /// Constant immigration drift `β₀ ≥ 0`.
    pub drift: f64,
    /// Immigration jump measure `ν` with ∫ (1 ∧ z) ν(dz) < ∞.
    pub jumps: LevyMeasure,
}

impl ImmigrationMechanism {
    pub fn new(drift: f64, jumps: LevyMeasure) -> Result<Self> {
        if !(drift >= 0.0) || !drift.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "immigration drift must be nonnegative, got {drift}"
            )));
        }
        jumps.validate(MeasureRole::Immigration)?;
        Ok(ImmigrationMechanism { drift, jumps })
    }

    pub fn none() -> Self {
        ImmigrationMechanism { drift: 0.0, jumps: LevyMeasure::Zero }
    }

    pub fn psi(&self, lambda: f64) -> f64 {
        debug_assert!(lambda >= 0.0);
        self.drift * lambda + self.jumps.immigration_integral(lambda)
    }
}

/// A full model: branching mechanism, immigration jump measure ν, and the
/// dependent rates `(β(x), q(x, z))` thinning the immigration noise.
#[derive(Debug, Clone, PartialEq)]
pub struct CbdiModel {
    pub branching: BranchingMechanism,
    pub immigration_jumps: LevyMeasure,
    pub rates: DependentRates,
}

impl CbdiModel {
    /// Pure branching process: no immigration of either kind.
    pub fn pure(branching: BranchingMechanism) -> Self {
        CbdiModel {
            branching,
            immigration_jumps: LevyMeasure::Zero,
            rates: DependentRates::none(),
        }
    }

    /// Classical immigration: constant drift rate and unit jump thinning.
    pub fn with_constant_immigration(
        branching: BranchingMechanism,
        imm: &ImmigrationMechanism,
    ) -> Self {
        let rates = DependentRates::constant(imm.drift, 1.0, &imm.jumps);
        CbdiModel { branching, immigration_jumps: imm.jumps.clone(), rates }
    }

    /// The immigration mechanism seen by the Laplace formulas when the rates
    /// are constant `(β, q ≡ q₀)` with trivial z-kernel: drift β and measure
    /// `q₀ · ν(dz)`.
    pub fn constant_rate_mechanism(&self) -> Option<ImmigrationMechanism> {
        if let (RateExpr::Const(beta), RateExpr::Const(q0)) =
            (&self.rates.beta, &self.rates.q.state_factor)
        {
            let kernel_trivial =
                self.rates.q.kernel == ZKernel::One || self.immigration_jumps.is_zero();
            if kernel_trivial {
                let jumps = scale_measure(&self.immigration_jumps, *q0);
                return Some(ImmigrationMechanism { drift: *beta, jumps });
            }
        }
        None
    }
}

fn scale_measure(m: &LevyMeasure, factor: f64) -> LevyMeasure {
    if factor == 0.0 {
        return LevyMeasure::Zero;
    }
    match m {
        LevyMeasure::Zero => LevyMeasure::Zero,
        LevyMeasure::Atomic(atoms) => {
            LevyMeasure::Atomic(atoms.iter().map(|&(z, w)| (z, w * factor)).collect())
        }
        LevyMeasure::Exponential { mass, rate } => {
            LevyMeasure::Exponential { mass: mass * factor, rate: *rate }
        }
        LevyMeasure::Stable { scale, index } => {
            LevyMeasure::Stable { scale: scale * factor, index: *index }
        }
    }
}

/// Outcome of auditing conditions on a grid of state values.
#[derive(Debug, Clone)]
pub struct ConditionReport {
    /// Worst margin of `β(x) + ∫ q(x,z) z ν(dz) - K(1+x)` over the grid
    /// (≤ 0 means the growth condition held everywhere).
    pub growth_margin: f64,
    /// Worst margin of the increment bound over all grid pairs
    /// (≤ 0 means the continuity condition held on the grid).
    pub continuity_margin: f64,
    /// Relative tolerance used for the pass decision.
    pub tolerance: f64,
    pub growth_pass: bool,
    pub continuity_pass: bool,
}

impl ConditionReport {
    pub fn pass(&self) -> bool {
        self.growth_pass && self.continuity_pass
    }
}

/// Default audit grid: 64 log-spaced points on (0, 10³] plus the origin.
pub fn default_audit_grid() -> Vec<f64> {
    let mut grid = vec![0.0];
    let n = 63;
    for i in 0..n {
        // from 1e-3 up to 1e3
        let t = i as f64 / (n - 1) as f64;
        grid.push(10f64.powf(-3.0 + 6.0 * t));
    }
    grid
}

/// Audit the growth and continuity conditions on a state grid.
///
/// This is a certification on the grid, not a proof: the conditions are
/// hypotheses of the underlying results and can only be spot-checked here.
pub fn check_conditions(
    rates: &DependentRates,
    nu: &LevyMeasure,
    grid: &[f64],
    tolerance: f64,
) -> ConditionReport {
    assert!(!grid.is_empty(), "condition audit needs a nonempty grid");
    let weighted = |x: f64| rates.q.weighted_mass(nu, x, 0.0, f64::INFINITY);

    let mut growth_margin = f64::NEG_INFINITY;
    for &x in grid {
        let lhs = rates.beta.eval(x) + weighted(x);
        let rhs = rates.growth_constant * (1.0 + x);
        let margin = (lhs - rhs) / (1.0 + rhs.abs());
        growth_margin = growth_margin.max(margin);
    }

    let kernel_mass = nu.weighted_first_moment(&rates.q.kernel, 0.0, f64::INFINITY);
    let mut continuity_margin = f64::NEG_INFINITY;
    for (i, &x) in grid.iter().enumerate() {
        for &y in &grid[i + 1..] {
            let lhs = (rates.beta.eval(x) - rates.beta.eval(y)).abs()
                + (rates.q.state_factor.eval(x) - rates.q.state_factor.eval(y)).abs()
                    * kernel_mass;
            let rhs = rates.modulus.eval((x - y).abs());
            let margin = (lhs - rhs) / (1.0 + rhs.abs());
            continuity_margin = continuity_margin.max(margin);
        }
    }

    ConditionReport {
        growth_margin,
        continuity_margin,
        tolerance,
        growth_pass: growth_margin <= tolerance,
        continuity_pass: continuity_margin <= tolerance,
    }
}
