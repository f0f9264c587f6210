//! The cumulant flow `v_t(λ)` solving `dv/dt = -φ(v)`, `v_0 = λ`, and the
//! Laplace-transform formulas built on it.
//!
//! The flow is the analytic backbone of the whole validation battery: every
//! Monte Carlo estimate is compared against a transform computed here. The
//! pure drift/diffusion family has a closed form; all other mechanisms go
//! through an adaptive Dormand--Prince integrator, with time integrals of
//! functionals of `v` carried as augmented state so they inherit the same
//! error control.

use dashmap::DashMap;

use crate::error::{Error, Result};
use crate::mechanisms::{
    BranchingMechanism, ImmigrationMechanism, LevyMeasure, SlopeAtInfinity, ZKernel,
};

/// Deterministic time-rate path `s ↦ ρ(s)` for inhomogeneous immigration.
#[derive(Debug, Clone, PartialEq)]
pub enum RatePath {
    Constant(f64),
    /// Piecewise constant: `values[i]` on `[cuts[i-1], cuts[i])` with
    /// `cuts[-1] = 0`; the last value extends beyond the last cut.
    Step { cuts: Vec<f64>, values: Vec<f64> },
    /// `intercept + slope·s`.
    Linear { intercept: f64, slope: f64 },
}

impl RatePath {
    pub fn eval(&self, s: f64) -> f64 {
        match self {
            RatePath::Constant(c) => *c,
            RatePath::Step { cuts, values } => {
                let idx = cuts.partition_point(|&c| c <= s);
                values[idx.min(values.len() - 1)]
            }
            RatePath::Linear { intercept, slope } => intercept + slope * s,
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            RatePath::Constant(c) => *c == 0.0,
            RatePath::Step { values, .. } => values.iter().all(|&v| v == 0.0),
            RatePath::Linear { intercept, slope } => *intercept == 0.0 && *slope == 0.0,
        }
    }

    /// Discontinuity locations inside the open interval (lo, hi).
    pub fn cuts_within(&self, lo: f64, hi: f64) -> Vec<f64> {
        match self {
            RatePath::Step { cuts, .. } => {
                cuts.iter().copied().filter(|&c| c > lo && c < hi).collect()
            }
            _ => Vec::new(),
        }
    }

    pub fn max_on(&self, lo: f64, hi: f64) -> f64 {
        match self {
            RatePath::Constant(c) => *c,
            RatePath::Step { cuts, values } => {
                let mut m = self.eval(lo).max(self.eval(hi));
                for (i, &c) in cuts.iter().enumerate() {
                    if c >= lo && c <= hi {
                        m = m.max(values[(i + 1).min(values.len() - 1)]);
                    }
                }
                m
            }
            RatePath::Linear { .. } => self.eval(lo).max(self.eval(hi)),
        }
    }
}

/// Deterministic jump-immigration kernel `g(s, z) = time_factor(s)·kernel(z)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DeterministicKernel {
    pub time_factor: RatePath,
    pub kernel: ZKernel,
}

impl DeterministicKernel {
    pub fn constant(level: f64) -> Self {
        DeterministicKernel { time_factor: RatePath::Constant(level), kernel: ZKernel::One }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CumulantMethod {
    /// Closed form, available when the jump measure vanishes.
    AnalyticCir,
    /// Adaptive Runge--Kutta on `dv/dt = -φ(v)`.
    AdaptiveOde,
}

/// Evaluator for the cumulant flow of one branching mechanism, with a
/// concurrent memo table on exact `(t, λ)` pairs.
#[derive(Debug)]
pub struct Cumulant {
    mech: BranchingMechanism,
    method: CumulantMethod,
    tol: f64,
    memo: DashMap<(u64, u64), f64>,
}

impl Cumulant {
    pub fn new(mech: BranchingMechanism) -> Self {
        let method = if mech.jumps.is_zero() {
            CumulantMethod::AnalyticCir
        } else {
            CumulantMethod::AdaptiveOde
        };
        Cumulant { mech, method, tol: 1e-12, memo: DashMap::new() }
    }

    pub fn with_method(mech: BranchingMechanism, method: CumulantMethod) -> Result<Self> {
        if method == CumulantMethod::AnalyticCir && !mech.jumps.is_zero() {
            return Err(Error::InvalidParameter(
                "closed-form cumulant requires a vanishing jump measure".into(),
            ));
        }
        Ok(Cumulant { mech, method, tol: 1e-12, memo: DashMap::new() })
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        assert!(tol > 0.0);
        self.tol = tol;
        self
    }

    pub fn mechanism(&self) -> &BranchingMechanism {
        &self.mech
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    /// `v_t(λ)`.
    pub fn v(&self, t: f64, lambda: f64) -> Result<f64> {
        debug_assert!(t >= 0.0 && lambda >= 0.0);
        if lambda == 0.0 {
            return Ok(0.0);
        }
        if t == 0.0 {
            return Ok(lambda);
        }
        let key = (t.to_bits(), lambda.to_bits());
        if let Some(hit) = self.memo.get(&key) {
            return Ok(*hit);
        }
        let value = match self.method {
            CumulantMethod::AnalyticCir => self.v_closed(t, lambda),
            CumulantMethod::AdaptiveOde => self.v_ode(t, lambda)?,
        };
        self.memo.insert(key, value);
        Ok(value)
    }

    /// Closed form for `φ(λ) = bλ + cλ²`.
    fn v_closed(&self, t: f64, lambda: f64) -> f64 {
        let b = self.mech.drift;
        let c = self.mech.diffusion;
        if c == 0.0 {
            return lambda * (-b * t).exp();
        }
        if b == 0.0 {
            return lambda / (1.0 + c * lambda * t);
        }
        let ebt = (-b * t).exp();
        let one_minus = -(-b * t).exp_m1(); // 1 - e^{-bt}, accurate near b t ~ 0
        b * lambda * ebt / (b + c * lambda * one_minus)
    }

    /// Force the adaptive-ODE route (used to cross-check the closed form).
    pub fn v_ode(&self, t: f64, lambda: f64) -> Result<f64> {
        if lambda == 0.0 || t == 0.0 {
            return Ok(if t == 0.0 { lambda } else { 0.0 });
        }
        let mech = &self.mech;
        let out = rk45(
            |_, y: &[f64; 1]| [-mech.phi(y[0].max(0.0))],
            0.0,
            t,
            [lambda],
            self.tol,
            self.tol.min(1e-13),
        )?;
        Ok(out[0].max(0.0))
    }

    /// Residual of the flow property `v_{r+t} = v_r ∘ v_t` at one triple.
    pub fn semigroup_residual(&self, r: f64, t: f64, lambda: f64) -> Result<f64> {
        let lhs = self.v(r + t, lambda)?;
        let rhs = self.v(r, self.v(t, lambda)?)?;
        Ok((lhs - rhs).abs())
    }

    /// `h_t`: the entrance weight of the flow; `e^{-δt}` when `δ = φ'(∞)` is
    /// finite, zero for positive times otherwise (`h_0 = 1` always).
    pub fn h(&self, t: f64) -> f64 {
        debug_assert!(t >= 0.0);
        match self.mech.slope_at_infinity() {
            SlopeAtInfinity::Finite(delta) => (-delta * t).exp(),
            SlopeAtInfinity::Infinite => {
                if t == 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Branching-only transition transform `E_x e^{-λ Y_t} = e^{-x v_t(λ)}`.
    pub fn laplace_cb(&self, x: f64, t: f64, lambda: f64) -> Result<f64> {
        debug_assert!(x >= 0.0);
        Ok((-x * self.v(t, lambda)?).exp())
    }

    /// Transform with constant-rate immigration:
    /// `exp{-x v_t(λ) - ∫₀ᵗ ψ(v_s(λ)) ds}`.
    pub fn laplace_cbi(
        &self,
        imm: &ImmigrationMechanism,
        x: f64,
        t: f64,
        lambda: f64,
    ) -> Result<f64> {
        debug_assert!(x >= 0.0);
        if lambda == 0.0 {
            return Ok(1.0);
        }
        if t == 0.0 {
            return Ok((-x * lambda).exp());
        }
        let mech = &self.mech;
        let out = rk45(
            |_, y: &[f64; 2]| {
                let v = y[0].max(0.0);
                [-mech.phi(v), imm.psi(v)]
            },
            0.0,
            t,
            [lambda, 0.0],
            self.tol,
            self.tol.min(1e-13),
        )?;
        Ok((-x * out[0].max(0.0) - out[1]).exp())
    }

    /// Inhomogeneous transform on the window [r, t] with deterministic rates:
    /// `exp{-x v_{t-r}(λ) - ∫ᵣᵗ v_{t-s}(λ) ρ(s) ds
    ///      - ∫ᵣᵗ ∫ (1-e^{-z v_{t-s}(λ)}) g(s,z) ν(dz) ds}`.
    pub fn laplace_inhomogeneous(
        &self,
        nu: &LevyMeasure,
        rho: &RatePath,
        g: Option<&DeterministicKernel>,
        r: f64,
        t: f64,
        x: f64,
        lambda: f64,
    ) -> Result<f64> {
        debug_assert!(t >= r && r >= 0.0 && x >= 0.0);
        if lambda == 0.0 {
            return Ok(1.0);
        }
        let span = t - r;
        if span == 0.0 {
            return Ok((-x * lambda).exp());
        }

        // Integrate over τ = t - s ∈ [0, span], splitting at rate
        // discontinuities mapped into τ.
        let mut breaks: Vec<f64> = rho
            .cuts_within(r, t)
            .into_iter()
            .chain(
                g.map(|k| k.time_factor.cuts_within(r, t)).unwrap_or_default(),
            )
            .map(|s| t - s)
            .collect();
        breaks.push(span);
        breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
        breaks.dedup();

        let mech = &self.mech;
        let mut state = [lambda, 0.0, 0.0];
        let mut lo = 0.0;
        for &hi in &breaks {
            if hi <= lo {
                continue;
            }
            state = rk45(
                |tau, y: &[f64; 3]| {
                    let v = y[0].max(0.0);
                    let s = t - tau;
                    let g_term = match g {
                        None => 0.0,
                        Some(kernel) => {
                            kernel.time_factor.eval(s)
                                * nu.immigration_integral_tilted(
                                    v,
                                    match kernel.kernel {
                                        ZKernel::One => 0.0,
                                        ZKernel::Exp { rate } => rate,
                                    },
                                )
                        }
                    };
                    [-mech.phi(v), v * rho.eval(s), g_term]
                },
                lo,
                hi,
                state,
                self.tol,
                self.tol.min(1e-13),
            )?;
            lo = hi;
        }
        Ok((-x * state[0].max(0.0) - state[1] - state[2]).exp())
    }

    /// First moment `E_x Y_t = x e^{-bt}` of the branching-only process.
    pub fn mean(&self, x: f64, t: f64) -> f64 {
        debug_assert!(x >= 0.0 && t >= 0.0);
        x * (-self.mech.drift * t).exp()
    }

    /// Relative residual of the identity `∂v_t/∂λ|₀ = e^{-bt}`, evaluated by
    /// a one-sided second-order finite difference at λ-scale 1e-6. This is
    /// the computable face of the entrance-rule mean identity
    /// `h_t + ∫ y l_t(dy) = e^{-bt}`.
    pub fn mean_slope_residual(&self, t: f64) -> Result<f64> {
        let h = 1e-6;
        let fd = (4.0 * self.v(t, h)? - self.v(t, 2.0 * h)?) / (2.0 * h);
        let exact = (-self.mech.drift * t).exp();
        Ok((fd - exact).abs() / exact)
    }
}

/// Dormand--Prince 5(4) with standard step-size control on a fixed-size
/// state. Integrates from `t0` to `t1 > t0` and returns the final state.
pub fn rk45<const D: usize, F>(
    f: F,
    t0: f64,
    t1: f64,
    y0: [f64; D],
    rtol: f64,
    atol: f64,
) -> Result<[f64; D]>
where
    F: Fn(f64, &[f64; D]) -> [f64; D],
{
    const A21: f64 = 1.0 / 5.0;
    const A31: f64 = 3.0 / 40.0;
    const A32: f64 = 9.0 / 40.0;
    const A41: f64 = 44.0 / 45.0;
    const A42: f64 = -56.0 / 15.0;
    const A43: f64 = 32.0 / 9.0;
    const A51: f64 = 19372.0 / 6561.0;
    const A52: f64 = -25360.0 / 2187.0;
    const A53: f64 = 64448.0 / 6561.0;
    const A54: f64 = -212.0 / 729.0;
    const A61: f64 = 9017.0 / 3168.0;
    const A62: f64 = -355.0 / 33.0;
    const A63: f64 = 46732.0 / 5247.0;
    const A64: f64 = 49.0 / 176.0;
    const A65: f64 = -5103.0 / 18656.0;
    const B1: f64 = 35.0 / 384.0;
    const B3: f64 = 500.0 / 1113.0;
    const B4: f64 = 125.0 / 192.0;
    const B5: f64 = -2187.0 / 6784.0;
    const B6: f64 = 11.0 / 84.0;
    const E1: f64 = 35.0 / 384.0 - 5179.0 / 57600.0;
    const E3: f64 = 500.0 / 1113.0 - 7571.0 / 16695.0;
    const E4: f64 = 125.0 / 192.0 - 393.0 / 640.0;
    const E5: f64 = -2187.0 / 6784.0 + 92097.0 / 339200.0;
    const E6: f64 = 11.0 / 84.0 - 187.0 / 2100.0;
    const E7: f64 = -1.0 / 40.0;

    debug_assert!(t1 > t0);
    let span = t1 - t0;
    let mut t = t0;
    let mut y = y0;
    let mut h = (span / 64.0).min(0.1).max(span * 1e-12);
    let mut steps = 0usize;
    const MAX_STEPS: usize = 2_000_000;

    let axpy = |y: &[f64; D], terms: &[(f64, &[f64; D])], h: f64| -> [f64; D] {
        let mut out = *y;
        for i in 0..D {
            let mut acc = 0.0;
            for (c, k) in terms {
                acc += c * k[i];
            }
            out[i] += h * acc;
        }
        out
    };

    while t < t1 {
        if steps > MAX_STEPS {
            return Err(Error::OdeSolver(format!(
                "step budget exhausted at t = {t:.6e} (span {span:.6e})"
            )));
        }
        steps += 1;
        h = h.min(t1 - t);

        let k1 = f(t, &y);
        let k2 = f(t + 0.2 * h, &axpy(&y, &[(A21, &k1)], h));
        let k3 = f(t + 0.3 * h, &axpy(&y, &[(A31, &k1), (A32, &k2)], h));
        let k4 = f(t + 0.8 * h, &axpy(&y, &[(A41, &k1), (A42, &k2), (A43, &k3)], h));
        let k5 = f(
            t + 8.0 / 9.0 * h,
            &axpy(&y, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)], h),
        );
        let k6 = f(
            t + h,
            &axpy(&y, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)], h),
        );
        let y5 = axpy(&y, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)], h);
        let k7 = f(t + h, &y5);

        let mut err_norm = 0.0f64;
        for i in 0..D {
            let e = h
                * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i]
                    + E7 * k7[i]);
            let scale = atol + rtol * y[i].abs().max(y5[i].abs());
            err_norm += (e / scale) * (e / scale);
        }
        err_norm = (err_norm / D as f64).sqrt();

        if err_norm <= 1.0 {
            t += h;
            y = y5;
        }
        let factor = if err_norm == 0.0 {
            5.0
        } else {
            (0.9 * err_norm.powf(-0.2)).clamp(0.2, 5.0)
        };
        h *= factor;
        if h < span * 1e-14 {
            return Err(Error::OdeSolver(format!(
                "step underflow at t = {t:.6e}; the field may be too stiff"
            )));
        }
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanisms::BranchingMechanism;

    fn cir(b: f64, c: f64) -> Cumulant {
        Cumulant::new(BranchingMechanism::cir(b, c))
    }

    #[test]
    fn closed_form_values() {
        // b=1, c=1: v_1(1) = e^{-1} / (2 - e^{-1})
        let cum = cir(1.0, 1.0);
        let expect = (-1f64).exp() / (2.0 - (-1f64).exp());
        assert!((cum.v(1.0, 1.0).unwrap() - expect).abs() < 1e-14);
        // b=0, c=1: v_{0.5}(2) = 2 / (1 + 2·0.5) = 1
        let cum = cir(0.0, 1.0);
        assert!((cum.v(0.5, 2.0).unwrap() - 1.0).abs() < 1e-14);
        // fixed points
        assert_eq!(cum.v(3.7, 0.0).unwrap(), 0.0);
        assert_eq!(cum.v(0.0, 2.5).unwrap(), 2.5);
    }

    #[test]
    fn ode_route_matches_closed_form() {
        for (b, c) in [(1.0, 1.0), (0.0, 1.0), (-0.5, 0.3), (2.0, 0.0)] {
            let cum = cir(b, c);
            for t in [0.1, 0.5, 1.0, 2.0] {
                for lam in [0.2, 1.0, 3.0] {
                    let closed = cum.v(t, lam).unwrap();
                    let ode = cum.v_ode(t, lam).unwrap();
                    assert!(
                        (closed - ode).abs() <= 1e-8 * closed.abs().max(1e-8),
                        "b={b} c={c} t={t} λ={lam}: {closed} vs {ode}"
                    );
                }
            }
        }
    }

    #[test]
    fn flow_property_residuals() {
        let atomic = Cumulant::new(
            BranchingMechanism::new(1.0, 0.0, LevyMeasure::unit_atom(1.0)).unwrap(),
        );
        let quad = cir(1.0, 1.0);
        for cum in [&atomic, &quad] {
            for r in [0.0, 0.3, 0.8] {
                for t in [0.2, 0.5] {
                    for lam in [0.0, 0.7, 2.0] {
                        let res = cum.semigroup_residual(r, t, lam).unwrap();
                        assert!(res <= 1e-8, "residual {res} at r={r} t={t} λ={lam}");
                    }
                }
            }
        }
    }

    #[test]
    fn entrance_weight_cases() {
        let quad = cir(1.0, 1.0);
        assert_eq!(quad.h(1.0), 0.0);
        assert_eq!(quad.h(0.0), 1.0);
        let atomic = Cumulant::new(
            BranchingMechanism::new(1.0, 0.0, LevyMeasure::unit_atom(1.0)).unwrap(),
        );
        assert_eq!(atomic.h(0.0), 1.0);
        assert!((atomic.h(1.0) - (-2f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn laplace_cb_values() {
        let cum = cir(0.0, 1.0);
        assert_eq!(cum.laplace_cb(0.0, 1.0, 1.0).unwrap(), 1.0);
        assert_eq!(cum.laplace_cb(1.0, 1.0, 0.0).unwrap(), 1.0);
        let got = cum.laplace_cb(1.0, 1.0, 1.0).unwrap();
        assert!((got - (-0.5f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn laplace_cbi_closed_case() {
        // b=0, c=1, β=1, ν=0: ∫₀¹ v_s(1) ds = ln 2, so the transform is
        // e^{-1/2} / 2 at x=1, t=1, λ=1.
        let cum = cir(0.0, 1.0);
        let imm = ImmigrationMechanism::new(1.0, LevyMeasure::Zero).unwrap();
        let got = cum.laplace_cbi(&imm, 1.0, 1.0, 1.0).unwrap();
        let expect = (-0.5f64).exp() / 2.0;
        assert!((got - expect).abs() < 1e-10, "{got} vs {expect}");
        // no immigration reduces to the CB transform
        let none = ImmigrationMechanism::none();
        let a = cum.laplace_cbi(&none, 1.0, 1.0, 1.0).unwrap();
        let b = cum.laplace_cb(1.0, 1.0, 1.0).unwrap();
        assert!((a - b).abs() < 1e-12);
        assert_eq!(cum.laplace_cbi(&imm, 1.0, 1.0, 0.0).unwrap(), 1.0);
    }

    #[test]
    fn laplace_inhomogeneous_closed_case() {
        // b=0, c=1, ρ(s)=s, g=0, r=0, t=1, λ=1, x=0:
        // ∫₀¹ s v_{1-s}(1) ds = ∫₀¹ s/(2-s) ds = 2 ln 2 - 1.
        let cum = cir(0.0, 1.0);
        let rho = RatePath::Linear { intercept: 0.0, slope: 1.0 };
        let got = cum
            .laplace_inhomogeneous(&LevyMeasure::Zero, &rho, None, 0.0, 1.0, 0.0, 1.0)
            .unwrap();
        let expect = (-(2.0 * 2f64.ln() - 1.0)).exp();
        assert!((got - expect).abs() < 1e-10, "{got} vs {expect}");
    }

    #[test]
    fn inhomogeneous_reduces_to_cbi_for_constant_rates() {
        let mech = BranchingMechanism::new(1.0, 0.0, LevyMeasure::unit_atom(1.0)).unwrap();
        let cum = Cumulant::new(mech);
        let nu = LevyMeasure::Atomic(vec![(1.0, 0.5)]);
        let imm = ImmigrationMechanism::new(0.7, nu.clone()).unwrap();
        let rho = RatePath::Constant(0.7);
        let g = DeterministicKernel::constant(1.0);
        let a = cum
            .laplace_inhomogeneous(&nu, &rho, Some(&g), 0.0, 1.2, 0.9, 1.4)
            .unwrap();
        let b = cum.laplace_cbi(&imm, 0.9, 1.2, 1.4).unwrap();
        assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        // dropping the kernel recovers the drift-only formula
        let only_rho = cum
            .laplace_inhomogeneous(&nu, &rho, None, 0.0, 1.2, 0.9, 1.4)
            .unwrap();
        let drift_only = ImmigrationMechanism::new(0.7, LevyMeasure::Zero).unwrap();
        let c = cum.laplace_cbi(&drift_only, 0.9, 1.2, 1.4).unwrap();
        assert!((only_rho - c).abs() < 1e-9);
    }

    #[test]
    fn mean_slope_identity() {
        for mech in [
            BranchingMechanism::cir(1.0, 1.0),
            BranchingMechanism::cir(0.0, 1.0),
            BranchingMechanism::new(1.0, 0.0, LevyMeasure::unit_atom(1.0)).unwrap(),
            BranchingMechanism::new(0.3, 0.2, LevyMeasure::Exponential { mass: 0.5, rate: 2.0 })
                .unwrap(),
        ] {
            let cum = Cumulant::new(mech);
            for t in [0.25, 1.0, 2.0] {
                let res = cum.mean_slope_residual(t).unwrap();
                assert!(res < 1e-5, "residual {res} at t={t}");
            }
        }
    }

    #[test]
    fn mean_formula() {
        let cum = cir(1.0, 0.4);
        assert!((cum.mean(2.0, 1.0) - 2.0 * (-1f64).exp()).abs() < 1e-15);
        assert_eq!(cum.mean(0.0, 5.0), 0.0);
        assert_eq!(cir(0.0, 1.0).mean(3.0, 2.0), 3.0);
    }

    #[test]
    fn flow_stays_in_envelope() {
        // supercritical: largest root bounds the flow together with λ
        let mech = BranchingMechanism::cir(-1.0, 1.0);
        let root = mech.largest_root();
        let cum = Cumulant::new(mech);
        for t in [0.1, 1.0, 4.0] {
            for lam in [0.1, 0.5, 1.0, 2.0, 5.0] {
                let v = cum.v(t, lam).unwrap();
                assert!(v >= 0.0 && v <= lam.max(root) + 1e-12, "v={v} λ={lam} t={t}");
            }
        }
    }

    #[test]
    fn step_rate_path_semantics() {
        let rho = RatePath::Step { cuts: vec![0.5], values: vec![0.5, 1.5] };
        assert_eq!(rho.eval(0.0), 0.5);
        assert_eq!(rho.eval(0.49), 0.5);
        assert_eq!(rho.eval(0.5), 1.5);
        assert_eq!(rho.eval(2.0), 1.5);
        assert_eq!(rho.max_on(0.0, 1.0), 1.5);
        assert_eq!(rho.cuts_within(0.0, 1.0), vec![0.5]);
    }
}
