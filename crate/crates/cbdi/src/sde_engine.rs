//! Euler-type simulation of the jump SDE, generator evaluation, and the
//! martingale-residual statistic.
//!
//! The scheme is an explicit Euler step with clamping at zero: compensated
//! branching jumps above the truncation level, uncompensated immigration
//! jumps thinned by the state-dependent rate, and left-limit reads for every
//! predictable integrand. Small branching jumps drop together with their
//! compensator (mean preserving); small immigration jumps have no
//! compensator in the equation, so their mean is optionally restored as a
//! deterministic drift.

use crate::error::{Error, Result};
use crate::mechanisms::{BranchingMechanism, CbdiModel, LevyMeasure, ZKernel};
use crate::random_drivers::{
    sample_atoms, stream, AtomKind, DriverAtoms, Grid, LayerBounds, Truncations,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JumpOrigin {
    Branching,
    Immigration,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpRecord {
    pub time: f64,
    pub size: f64,
    pub origin: JumpOrigin,
}

/// A nonnegative càdlàg path on a uniform grid; the value at `t_i` includes
/// jumps up to and including `t_i`.
#[derive(Debug, Clone)]
pub struct SamplePath {
    pub grid: Grid,
    pub values: Vec<f64>,
    pub jumps: Vec<JumpRecord>,
    /// Steps where the Euler increment was truncated at zero.
    pub clamped_steps: usize,
    pub seed: u64,
}

impl SamplePath {
    pub fn terminal(&self) -> f64 {
        *self.values.last().unwrap()
    }

    /// Piecewise-constant read `w(τ)`; zero before time zero.
    pub fn at_time(&self, tau: f64) -> f64 {
        if tau < 0.0 {
            return 0.0;
        }
        self.values[self.grid.floor_index(tau)]
    }

    pub fn sup(&self) -> f64 {
        self.values.iter().cloned().fold(0.0, f64::max)
    }

    pub fn value_at_index(&self, i: usize) -> f64 {
        self.values[i]
    }

    /// CSV export `t,value,jump_flag,origin` with a format tag line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("# cbdi-path v1\nt,value,jump_flag,origin\n");
        let mut ji = 0usize;
        for (i, v) in self.values.iter().enumerate() {
            let t = self.grid.time(i);
            let mut flag = 0;
            let mut origin = "";
            while ji < self.jumps.len() && self.jumps[ji].time <= t {
                flag = 1;
                origin = match self.jumps[ji].origin {
                    JumpOrigin::Branching => "branching",
                    JumpOrigin::Immigration => "immigration",
                };
                ji += 1;
            }
            out.push_str(&format!("{t},{v},{flag},{origin}\n"));
        }
        out
    }
}

/// Euler scheme knobs.
#[derive(Debug, Clone, Copy)]
pub struct SchemeConfig {
    /// Restore the mean of dropped small immigration jumps as drift.
    pub compensate_small_immigration: bool,
    /// Cap for automatic thinning-bound extension; exceeding it is a
    /// localization failure naming the hitting level.
    pub max_bound: f64,
}

impl Default for SchemeConfig {
    fn default() -> Self {
        SchemeConfig { compensate_small_immigration: true, max_bound: 1e6 }
    }
}

/// One Euler step of the branching-only dynamics: drift, diffusion,
/// compensated retained jumps. The thinning uses the pre-step value `y`.
/// Returns the new value and whether the step clamped at zero.
pub fn euler_step_cb(
    mech: &BranchingMechanism,
    y: f64,
    dt: f64,
    gaussian: f64,
    atoms_in_slice: &[crate::random_drivers::JumpAtom],
    branching_cutoff: f64,
) -> (f64, bool) {
    debug_assert!(y >= 0.0 && dt > 0.0);
    let compensator = mech.jumps.moment(1, branching_cutoff, f64::INFINITY);
    let mut incr = -mech.drift * y * dt;
    incr += (2.0 * mech.diffusion * y * dt).sqrt() * gaussian;
    incr -= y * dt * compensator;
    for a in atoms_in_slice {
        if a.mark <= y {
            incr += a.size;
        }
    }
    let next = y + incr;
    if next < 0.0 {
        (0.0, true)
    } else {
        (next, false)
    }
}

/// Simulate the dependent-immigration jump SDE on the driver's grid.
///
/// The driver is extended in place whenever the path outgrows a thinning
/// bound; extensions are deterministic supersets, so restarting the sweep
/// reproduces the prefix exactly.
pub fn simulate_cbdi_sde(
    model: &CbdiModel,
    y0: f64,
    driver: &mut DriverAtoms,
    cfg: &SchemeConfig,
) -> Result<SamplePath> {
    debug_assert!(y0 >= 0.0);
    let grid = driver.grid;
    let dt = grid.step;
    let mech = &model.branching;
    let rates = &model.rates;

    let branch_compensator =
        mech.jumps.moment(1, driver.truncations.branching, f64::INFINITY);
    let small_imm_mass = if cfg.compensate_small_immigration {
        model.immigration_jumps.weighted_first_moment(
            &rates.q.kernel,
            0.0,
            driver.truncations.immigration,
        )
    } else {
        0.0
    };

    'attempt: loop {
        let mut values = Vec::with_capacity(grid.n_points());
        let mut jumps = Vec::new();
        let mut clamped = 0usize;
        let mut y = y0;
        values.push(y);
        let mut bi = 0usize;
        let mut ii = 0usize;

        for cell in 0..grid.n_cells {
            // raise thinning bounds before the step if the state outgrew them
            if y > driver.bounds.branching {
                let need = (2.0 * y).max(2.0 * driver.bounds.branching);
                if need > cfg.max_bound {
                    return Err(Error::LocalizationOverflow { level: y, cap: cfg.max_bound });
                }
                *driver = driver.extend(AtomKind::Branching, need)?;
                continue 'attempt;
            }
            let q_sup = rates.q.sup_over_z(y);
            if q_sup > driver.bounds.immigration {
                let need = (2.0 * q_sup).max(2.0 * driver.bounds.immigration);
                if need > cfg.max_bound {
                    return Err(Error::LocalizationOverflow { level: q_sup, cap: cfg.max_bound });
                }
                *driver = driver.extend(AtomKind::Immigration, need)?;
                continue 'attempt;
            }

            let t_hi = grid.time(cell + 1);
            let mut incr = (rates.beta.eval(y) - mech.drift * y) * dt;
            incr += (2.0 * mech.diffusion * y * dt).sqrt() * driver.brownian[cell];
            incr -= y * dt * branch_compensator;
            incr += dt * rates.q.state_factor.eval(y) * small_imm_mass;

            while bi < driver.branching.len() && driver.branching[bi].time <= t_hi {
                let a = driver.branching[bi];
                bi += 1;
                if a.mark <= y {
                    incr += a.size;
                    jumps.push(JumpRecord {
                        time: a.time,
                        size: a.size,
                        origin: JumpOrigin::Branching,
                    });
                }
            }
            while ii < driver.immigration.len() && driver.immigration[ii].time <= t_hi {
                let a = driver.immigration[ii];
                ii += 1;
                if a.mark <= rates.q.eval(y, a.size) {
                    incr += a.size;
                    jumps.push(JumpRecord {
                        time: a.time,
                        size: a.size,
                        origin: JumpOrigin::Immigration,
                    });
                }
            }

            y += incr;
            if y < 0.0 {
                y = 0.0;
                clamped += 1;
            }
            values.push(y);
        }

        return Ok(SamplePath { grid, values, jumps, clamped_steps: clamped, seed: driver.seed });
    }
}

/// Simulate a branching-only path from its own substream (used for base
/// paths and for immigrant trajectories in the path-space construction).
pub fn simulate_cb_substream(
    mech: &BranchingMechanism,
    y0: f64,
    grid: Grid,
    seed: u64,
    tags: &[u64],
    truncations: Truncations,
    cfg: &SchemeConfig,
) -> Result<SamplePath> {
    let sub_seed = stream::derive(seed, tags);
    let bounds = LayerBounds {
        branching: (2.0 * y0).max(2.0),
        immigration: 1.0,
        excursion: 0.0,
    };
    let mut driver =
        sample_atoms(sub_seed, grid, mech, &LevyMeasure::Zero, bounds, truncations)?;
    let model = CbdiModel::pure(mech.clone());
    simulate_cbdi_sde(&model, y0, &mut driver, cfg)
}

/// Test functions with two derivatives for the generator and martingale
/// machinery: exponentials and polynomials damped by `e^{-x}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TestFunction {
    One,
    /// `e^{-λx}`.
    Exp { lambda: f64 },
    /// `x^k e^{-x}`.
    DampedPoly { degree: u32 },
}

impl TestFunction {
    pub fn eval(&self, x: f64) -> f64 {
        self.derivative(0, x)
    }

    pub fn d1(&self, x: f64) -> f64 {
        self.derivative(1, x)
    }

    pub fn d2(&self, x: f64) -> f64 {
        self.derivative(2, x)
    }

    /// n-th derivative; for the damped polynomials the polynomial factor
    /// follows the recurrence `p ← p' - p` under d/dx of `p(x) e^{-x}`.
    pub fn derivative(&self, order: u32, x: f64) -> f64 {
        match self {
            TestFunction::One => {
                if order == 0 {
                    1.0
                } else {
                    0.0
                }
            }
            TestFunction::Exp { lambda } => {
                (-lambda).powi(order as i32) * (-lambda * x).exp()
            }
            TestFunction::DampedPoly { degree } => {
                let coeffs = damped_poly_coeffs(*degree, order);
                let mut p = 0.0;
                for &c in coeffs.iter().rev() {
                    p = p * x + c;
                }
                p * (-x).exp()
            }
        }
    }

    fn sup_abs(&self, order: u32) -> f64 {
        let hi = match self {
            TestFunction::DampedPoly { degree } => *degree as f64 + order as f64 + 50.0,
            _ => 50.0,
        };
        let mut m: f64 = self.derivative(order, 0.0).abs();
        for i in 1..=2000 {
            m = m.max(self.derivative(order, hi * i as f64 / 2000.0).abs());
        }
        m
    }
}

/// Coefficients (ascending powers) of the polynomial factor of the `order`-th
/// derivative of `x^degree · e^{-x}`.
fn damped_poly_coeffs(degree: u32, order: u32) -> Vec<f64> {
    let mut p = vec![0.0; degree as usize + 1];
    p[degree as usize] = 1.0;
    for _ in 0..order {
        // p(x)e^{-x} differentiates to (p'(x) - p(x)) e^{-x}
        let mut next = vec![0.0; p.len()];
        for (k, &c) in p.iter().enumerate() {
            if k > 0 {
                next[k - 1] += k as f64 * c;
            }
            next[k] -= c;
        }
        p = next;
    }
    p
}

/// Evaluate the full generator at `x` by quadrature per measure family.
pub fn generator_apply(
    model: &CbdiModel,
    f: &TestFunction,
    x: f64,
    tol: f64,
) -> Result<f64> {
    debug_assert!(x >= 0.0);
    if matches!(f, TestFunction::One) {
        return Ok(0.0);
    }
    let mech = &model.branching;
    let rates = &model.rates;
    let mut acc = mech.diffusion * x * f.d2(x) - mech.drift * x * f.d1(x);
    acc += rates.beta.eval(x) * f.d1(x);
    acc += x * branching_jump_term(&mech.jumps, f, x, tol)?;
    let sf = rates.q.state_factor.eval(x);
    if sf != 0.0 && !model.immigration_jumps.is_zero() {
        acc += sf * immigration_jump_term(&model.immigration_jumps, &rates.q.kernel, f, x, tol)?;
    }
    Ok(acc)
}

/// Closed-form generator for `f(x) = e^{-λx}`:
/// `Lf(x) = e^{-λx} (x φ(λ) - β(x) λ - q_state(x) ∫ (1-e^{-λz}) κ(z) ν(dz))`.
pub fn generator_apply_exp(model: &CbdiModel, lambda: f64, x: f64) -> f64 {
    let theta = match model.rates.q.kernel {
        ZKernel::One => 0.0,
        ZKernel::Exp { rate } => rate,
    };
    let nu_term = model.immigration_jumps.immigration_integral_tilted(lambda, theta);
    (-lambda * x).exp()
        * (x * model.branching.phi(lambda)
            - model.rates.beta.eval(x) * lambda
            - model.rates.q.state_factor.eval(x) * nu_term)
}

fn branching_jump_term(
    m: &LevyMeasure,
    f: &TestFunction,
    x: f64,
    tol: f64,
) -> Result<f64> {
    let h = |z: f64| f.eval(x + z) - f.eval(x) - z * f.d1(x);
    match m {
        LevyMeasure::Zero => Ok(0.0),
        LevyMeasure::Atomic(atoms) => Ok(atoms.iter().map(|&(z, w)| w * h(z)).sum()),
        _ => {
            // Direct evaluation of h below z_switch drowns in rounding noise
            // once the density blows up, so the bottom uses the quadratic and
            // cubic Taylor terms with exact partial moments; the fourth-order
            // remainder is ≤ sup|f⁗|/24 · z · M₃(0, z).
            let k4 = f.sup_abs(4) / 24.0;
            let z_switch = increasing_cutoff(
                &|z| k4 * z * m.moment(3, 0.0, z),
                1e-6,
                1e-2,
                0.25 * tol,
            );
            let bottom = 0.5 * f.d2(x) * m.moment(2, 0.0, z_switch)
                + f.derivative(3, x) / 6.0 * m.moment(3, 0.0, z_switch);
            // beyond z_hi the f(x+z) term is negligible and the rest of the
            // integrand, -f(x) - z f'(x), integrates in closed form
            let z_hi = far_field_cutoff(f, x, m, tol);
            let window = m.integrate_window(&h, z_switch, z_hi, 0.25 * tol)?;
            let tail = -f.eval(x) * m.tail_mass(z_hi)
                - f.d1(x) * m.moment(1, z_hi, f64::INFINITY);
            Ok(bottom + window + tail)
        }
    }
}

fn immigration_jump_term(
    nu: &LevyMeasure,
    kernel: &ZKernel,
    f: &TestFunction,
    x: f64,
    tol: f64,
) -> Result<f64> {
    let h = |z: f64| (f.eval(x + z) - f.eval(x)) * kernel.eval(z);
    match nu {
        LevyMeasure::Zero => Ok(0.0),
        LevyMeasure::Atomic(atoms) => Ok(atoms.iter().map(|&(z, w)| w * h(z)).sum()),
        _ => {
            let theta = match kernel {
                ZKernel::One => 0.0,
                ZKernel::Exp { rate } => *rate,
            };
            // bottom: f'·zκ(z) exactly via the weighted moment, plus the
            // f''/2·z² term with κ ≈ 1; remainder ≤ K₃ · M₃(0, z)
            let k3 = f.sup_abs(3) / 6.0 + theta * f.sup_abs(2) / 2.0;
            let z_switch =
                increasing_cutoff(&|z| k3 * nu.moment(3, 0.0, z), 1e-6, 1e-2, 0.25 * tol);
            let bottom = f.d1(x) * nu.weighted_first_moment(kernel, 0.0, z_switch)
                + 0.5 * f.d2(x) * nu.moment(2, 0.0, z_switch);
            let z_hi = far_field_cutoff(f, x, nu, tol);
            let window = nu.integrate_window(&h, z_switch, z_hi, 0.25 * tol)?;
            // past z_hi only the -f(x)·κ(z) part of the integrand survives
            let tail = match kernel {
                ZKernel::One => -f.eval(x) * nu.tail_mass(z_hi),
                // bounded by e^{-θ z_hi}·T(z_hi), already under the budget
                ZKernel::Exp { .. } => 0.0,
            };
            Ok(bottom + window + tail)
        }
    }
}

/// Smallest `z` past the test function's peak where `|f(x+z)|` times the
/// remaining measure mass drops below the tolerance budget.
fn far_field_cutoff(f: &TestFunction, x: f64, m: &LevyMeasure, tol: f64) -> f64 {
    let peak = match f {
        TestFunction::DampedPoly { degree } => (*degree as f64 - x).max(0.0),
        _ => 0.0,
    };
    let lo = peak + 1.0;
    let budget = 0.25 * tol / m.tail_mass(lo).max(1e-12);
    crate::numeric::monotone_threshold(&|z| f.eval(x + z).abs(), lo, 1e9, budget)
}

/// Largest `z` in [lo, hi] with `g(z) ≤ target` for nondecreasing `g`.
fn increasing_cutoff<F: Fn(f64) -> f64>(g: &F, lo: f64, hi: f64, target: f64) -> f64 {
    if g(hi) <= target {
        return hi;
    }
    if g(lo) > target {
        return lo;
    }
    let (mut a, mut b) = (lo.ln(), hi.ln());
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if g(mid.exp()) <= target {
            a = mid;
        } else {
            b = mid;
        }
    }
    a.exp()
}

/// One checkpoint of the martingale-residual statistic.
#[derive(Debug, Clone, Copy)]
pub struct ResidualEntry {
    pub t: f64,
    pub mean: f64,
    pub std_error: f64,
    pub pass: bool,
}

#[derive(Debug, Clone)]
pub struct MartingaleReport {
    pub entries: Vec<ResidualEntry>,
}

impl MartingaleReport {
    pub fn pass(&self) -> bool {
        self.entries.iter().all(|e| e.pass)
    }
}

/// Mean over paths of `f(Y_t) - f(Y_0) - Σ_i Lf(Y_{t_i}) Δ` at each
/// checkpoint, with left-endpoint generator reads.
///
/// For the exponential family the generator evaluation is closed-form; other
/// test functions go through quadrature and are only meant for small runs.
pub fn martingale_residual(
    paths: &[SamplePath],
    f: &TestFunction,
    model: &CbdiModel,
    checkpoints: &[f64],
) -> Result<MartingaleReport> {
    assert!(!paths.is_empty());
    let grid = paths[0].grid;
    let dt = grid.step;
    let ckpt_idx: Vec<usize> = checkpoints
        .iter()
        .map(|&t| ((t / dt).round() as usize).min(grid.n_cells))
        .collect();

    let apply = |y: f64| -> Result<f64> {
        match f {
            TestFunction::Exp { lambda } => Ok(generator_apply_exp(model, *lambda, y)),
            TestFunction::One => Ok(0.0),
            other => generator_apply(model, other, y, 1e-9),
        }
    };

    let mut per_ckpt: Vec<Vec<f64>> = vec![Vec::with_capacity(paths.len()); ckpt_idx.len()];
    for path in paths {
        debug_assert_eq!(path.grid, grid, "martingale residual needs a common grid");
        let mut acc = 0.0;
        let mut next = 0usize;
        let mut order: Vec<usize> = (0..ckpt_idx.len()).collect();
        order.sort_by_key(|&k| ckpt_idx[k]);
        for i in 0..=grid.n_cells {
            while next < order.len() && ckpt_idx[order[next]] == i {
                per_ckpt[order[next]]
                    .push(f.eval(path.values[i]) - f.eval(path.values[0]) - acc);
                next += 1;
            }
            if i < grid.n_cells {
                acc += apply(path.values[i])? * dt;
            }
        }
    }

    let entries = ckpt_idx
        .iter()
        .zip(per_ckpt.iter())
        .map(|(&idx, samples)| {
            let (mean, se) = crate::stats::mean_se(samples);
            ResidualEntry { t: grid.time(idx), mean, std_error: se, pass: mean.abs() <= 3.0 * se }
        })
        .collect();
    Ok(MartingaleReport { entries })
}

/// Locally bounded constant `C(t)` with
/// `E[Y_t] ≤ C(t)(1 + E[X₀] + sqrt(E[X₀]))` for any rate set satisfying the
/// linear growth condition with constant `K`, assembled from the Gronwall
/// estimate behind the first-moment bound.
pub fn moment_growth_bound(mech: &BranchingMechanism, growth_k: f64, t: f64) -> f64 {
    let a = t * (mech.drift.abs() * t).exp();
    let m1_tail = mech.jumps.moment(1, 1.0, f64::INFINITY);
    let m2_low = mech.jumps.moment(2, 0.0, 1.0);
    let linear = 1.0 + (mech.drift.abs() + 2.0 * m1_tail) * a;
    let sqrt_part = 2.0 * ((2.0 * mech.diffusion).sqrt() + m2_low.sqrt()) * a.sqrt();
    let c0 = linear.max(sqrt_part).max(1.0);
    (c0 + growth_k * a) * (growth_k * a).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanisms::{DependentRates, ImmigrationMechanism};
    use crate::random_drivers::JumpAtom;

    fn grid() -> Grid {
        Grid::from_horizon(1.0, 1e-2)
    }

    #[test]
    fn absorption_at_zero() {
        let mech = BranchingMechanism::cir(1.0, 1.0);
        let (next, clamped) = euler_step_cb(&mech, 0.0, 0.1, 1.7, &[], 1e-3);
        assert_eq!(next, 0.0);
        assert!(!clamped);
    }

    #[test]
    fn pure_drift_step() {
        let mech = BranchingMechanism::cir(1.0, 0.0);
        let (next, _) = euler_step_cb(&mech, 1.0, 0.1, 0.3, &[], 1e-3);
        assert!((next - 0.9).abs() < 1e-15);
    }

    #[test]
    fn compensated_jump_step_is_mean_zero() {
        // b=0, c=0, m=δ₁: one atom in the slice with mark ≤ y adds +1,
        // the compensator subtracts yΔ per unit time.
        let mech = BranchingMechanism::new(0.0, 0.0, LevyMeasure::unit_atom(1.0)).unwrap();
        let y = 1.0;
        let dt = 0.1;
        let id = crate::random_drivers::AtomId { layer: 0, index: 0 };
        let with_jump = euler_step_cb(
            &mech,
            y,
            dt,
            0.0,
            &[JumpAtom { time: 0.05, size: 1.0, mark: 0.5, id }],
            1e-3,
        )
        .0;
        let without = euler_step_cb(&mech, y, dt, 0.0, &[], 1e-3).0;
        assert!((with_jump - (y - y * dt + 1.0)).abs() < 1e-15);
        assert!((without - (y - y * dt)).abs() < 1e-15);
    }

    #[test]
    fn cb_path_positivity_and_no_negative_jumps() {
        let mech = BranchingMechanism::new(0.5, 0.4, LevyMeasure::unit_atom(0.8)).unwrap();
        for seed in 0..20 {
            let p = simulate_cb_substream(
                &mech,
                1.3,
                grid(),
                seed,
                &[99],
                Truncations::default(),
                &SchemeConfig::default(),
            )
            .unwrap();
            assert!(p.values.iter().all(|&v| v >= 0.0));
            assert!(p.jumps.iter().all(|j| j.size > 0.0));
            assert_eq!(p.values.len(), grid().n_points());
        }
    }

    #[test]
    fn cb_monte_carlo_mean_matches_exponential_decay() {
        let mech = BranchingMechanism::new(1.0, 0.0, LevyMeasure::unit_atom(1.0)).unwrap();
        let n = 4_000u64;
        let vals: Vec<f64> = (0..n)
            .map(|s| {
                simulate_cb_substream(
                    &mech,
                    1.0,
                    grid(),
                    s,
                    &[1],
                    Truncations::default(),
                    &SchemeConfig::default(),
                )
                .unwrap()
                .terminal()
            })
            .collect();
        let (mean, se) = crate::stats::mean_se(&vals);
        let target = (-1f64).exp();
        assert!(
            (mean - target).abs() <= 3.0 * se + 5e-3,
            "mean {mean} target {target} se {se}"
        );
    }

    #[test]
    fn generator_closed_form_matches_quadrature() {
        let mech = BranchingMechanism::new(0.7, 0.3, LevyMeasure::unit_atom(1.0)).unwrap();
        let nu = LevyMeasure::Atomic(vec![(1.0, 0.5)]);
        let model = CbdiModel {
            branching: mech,
            immigration_jumps: nu.clone(),
            rates: DependentRates::constant(0.4, 1.0, &nu),
        };
        for x in [0.0, 0.5, 1.0, 3.0] {
            for lam in [0.5, 1.0, 2.0] {
                let fast = generator_apply_exp(&model, lam, x);
                let slow =
                    generator_apply(&model, &TestFunction::Exp { lambda: lam }, x, 1e-10)
                        .unwrap();
                assert!((fast - slow).abs() < 1e-8, "x={x} λ={lam}: {fast} vs {slow}");
            }
        }
        // f ≡ 1 annihilates
        assert_eq!(generator_apply(&model, &TestFunction::One, 1.0, 1e-10).unwrap(), 0.0);
    }

    #[test]
    fn generator_exp_structure_constant_rates() {
        // constant rates: Lf(x) = e^{-λx}(xφ(λ) - ψ(λ))
        let mech = BranchingMechanism::cir(1.0, 0.5);
        let nu = LevyMeasure::Atomic(vec![(2.0, 0.3)]);
        let imm = ImmigrationMechanism::new(0.6, nu.clone()).unwrap();
        let model = CbdiModel::with_constant_immigration(mech.clone(), &imm);
        for x in [0.0, 1.0, 2.5] {
            let lam = 1.3;
            let got = generator_apply_exp(&model, lam, x);
            let expect = (-lam * x).exp() * (x * mech.phi(lam) - imm.psi(lam));
            assert!((got - expect).abs() < 1e-12);
        }
        // at x = 0 only the immigration part survives
        let got = generator_apply_exp(&model, 1.3, 0.0);
        assert!((got + imm.psi(1.3)).abs() < 1e-12);
    }

    #[test]
    fn generator_quadrature_with_kernel_measures() {
        let mech =
            BranchingMechanism::new(0.2, 0.0, LevyMeasure::Exponential { mass: 0.8, rate: 2.0 })
                .unwrap();
        let model = CbdiModel::pure(mech.clone());
        let lam = 0.9;
        let x = 1.4;
        let fast = generator_apply_exp(&model, lam, x);
        let slow = generator_apply(&model, &TestFunction::Exp { lambda: lam }, x, 1e-10).unwrap();
        assert!((fast - slow).abs() < 1e-7, "{fast} vs {slow}");
        // damped polynomial against a direct window quadrature
        let f = TestFunction::DampedPoly { degree: 2 };
        let got = generator_apply(&model, &f, x, 1e-9).unwrap();
        let jump_direct = mech
            .jumps
            .integrate_window(
                &|z: f64| f.eval(x + z) - f.eval(x) - z * f.d1(x),
                1e-10,
                60.0,
                1e-12,
            )
            .unwrap();
        let expect = -mech.drift * x * f.d1(x) + x * jump_direct;
        assert!((got - expect).abs() < 1e-6, "{got} vs {expect}");
    }

    #[test]
    fn generator_quadrature_handles_heavy_stable_tail() {
        let mech =
            BranchingMechanism::new(0.0, 0.0, LevyMeasure::Stable { scale: 0.8, index: 1.5 })
                .unwrap();
        let model = CbdiModel::pure(mech);
        let (lam, x) = (1.3, 0.7);
        let fast = generator_apply_exp(&model, lam, x);
        let slow = generator_apply(&model, &TestFunction::Exp { lambda: lam }, x, 1e-9).unwrap();
        assert!((fast - slow).abs() < 1e-7 * fast.abs().max(1.0), "{fast} vs {slow}");
    }

    #[test]
    fn martingale_residual_centered_for_cb() {
        let mech = BranchingMechanism::new(1.0, 0.0, LevyMeasure::unit_atom(1.0)).unwrap();
        let model = CbdiModel::pure(mech.clone());
        let paths: Vec<SamplePath> = (0..1500)
            .map(|s| {
                simulate_cb_substream(
                    &mech,
                    1.0,
                    grid(),
                    s,
                    &[7],
                    Truncations::default(),
                    &SchemeConfig::default(),
                )
                .unwrap()
            })
            .collect();
        let rep = martingale_residual(
            &paths,
            &TestFunction::Exp { lambda: 1.0 },
            &model,
            &[0.5, 1.0],
        )
        .unwrap();
        for e in &rep.entries {
            assert!(
                e.mean.abs() <= 3.0 * e.std_error + 2e-3,
                "residual {} at t={} (se {})",
                e.mean,
                e.t,
                e.std_error
            );
        }
    }

    #[test]
    fn martingale_residual_deterministic_case_is_discretization_bias() {
        // c=0, m=0, ν=0, constant β: the path is an ODE and the residual is
        // pure O(Δ) bias.
        let mech = BranchingMechanism::cir(1.0, 0.0);
        let nu = LevyMeasure::Zero;
        let model = CbdiModel {
            branching: mech.clone(),
            immigration_jumps: nu.clone(),
            rates: DependentRates::constant(0.5, 0.0, &nu),
        };
        let mut driver = sample_atoms(
            1,
            grid(),
            &mech,
            &nu,
            LayerBounds { branching: 4.0, immigration: 1.0, excursion: 0.0 },
            Truncations::default(),
        )
        .unwrap();
        let path =
            simulate_cbdi_sde(&model, 1.0, &mut driver, &SchemeConfig::default()).unwrap();
        let rep = martingale_residual(
            &[path],
            &TestFunction::Exp { lambda: 1.0 },
            &model,
            &[1.0],
        )
        .unwrap();
        let r = rep.entries[0].mean.abs();
        assert!(r > 0.0 && r < 10.0 * grid().step, "bias {r}");
    }

    #[test]
    fn f_one_gives_exact_zero_residual() {
        let mech = BranchingMechanism::cir(0.5, 0.5);
        let model = CbdiModel::pure(mech.clone());
        let path = simulate_cb_substream(
            &mech,
            1.0,
            grid(),
            3,
            &[5],
            Truncations::default(),
            &SchemeConfig::default(),
        )
        .unwrap();
        let rep =
            martingale_residual(&[path], &TestFunction::One, &model, &[0.5, 1.0]).unwrap();
        for e in &rep.entries {
            assert_eq!(e.mean, 0.0);
        }
    }

    #[test]
    fn localization_cap_reported() {
        // exploding immigration drift forces the bound past the cap
        let mech = BranchingMechanism::cir(-2.0, 0.0);
        let nu = LevyMeasure::unit_atom(1.0);
        let model = CbdiModel {
            branching: mech.clone(),
            immigration_jumps: nu.clone(),
            rates: DependentRates {
                beta: crate::mechanisms::RateExpr::linear(6.0),
                q: crate::mechanisms::JumpRate::proportional(),
                growth_constant: 7.0,
                modulus: crate::mechanisms::Modulus::Linear { lipschitz: 7.0 },
            },
        };
        let mut driver = sample_atoms(
            5,
            grid(),
            &mech,
            &nu,
            LayerBounds { branching: 2.0, immigration: 2.0, excursion: 0.0 },
            Truncations::default(),
        )
        .unwrap();
        let cfg = SchemeConfig { compensate_small_immigration: true, max_bound: 32.0 };
        let err = simulate_cbdi_sde(&model, 8.0, &mut driver, &cfg).unwrap_err();
        assert!(matches!(err, Error::LocalizationOverflow { .. }), "got {err:?}");
    }
}
