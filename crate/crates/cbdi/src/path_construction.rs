//! Path-space construction of the dependent-immigration process: the field
//! of immigrant trajectories selected by Poisson atoms, solved by Picard
//! iteration with localization, plus the coupled comparison and uniqueness
//! machinery that rides on the same frozen noise.
//!
//! A replicate owns a base branching path, one driver realization, and a
//! lazily filled pool of immigrant trajectories keyed by atom id. Every
//! Picard iterate, the comparison coupling, and the uniqueness re-run reuse
//! those trajectories unchanged; only the thinning decisions move.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::cumulant::{DeterministicKernel, RatePath};
use crate::mechanisms::{
    BranchingMechanism, CbdiModel, DependentRates, SlopeAtInfinity, ZKernel,
};
use crate::random_drivers::{
    sample_atoms, stream, tilted_delay_mass, AtomId, AtomKind, DriverAtoms, ExcursionAtom,
    Grid, JumpAtom, LayerBounds, Truncations,
};
use crate::sde_engine::{
    simulate_cb_substream, simulate_cbdi_sde, JumpOrigin, JumpRecord, SamplePath, SchemeConfig,
};

const EXCURSION_KIND: u64 = 0;
const IMMIGRANT_KIND: u64 = 1;

/// Lazily simulated immigrant trajectories, one per atom, reused across
/// Picard iterates and coupled runs.
#[derive(Debug)]
pub struct TrajectoryPool {
    seed: u64,
    grid: Grid,
    mech: BranchingMechanism,
    truncations: Truncations,
    scheme: SchemeConfig,
    excursion: HashMap<AtomId, SamplePath>,
    immigrant: HashMap<AtomId, SamplePath>,
}

impl TrajectoryPool {
    pub fn new(
        seed: u64,
        grid: Grid,
        mech: BranchingMechanism,
        truncations: Truncations,
        scheme: SchemeConfig,
    ) -> Self {
        TrajectoryPool {
            seed,
            grid,
            mech,
            truncations,
            scheme,
            excursion: HashMap::new(),
            immigrant: HashMap::new(),
        }
    }

    fn ensure_excursion(&mut self, atom: &ExcursionAtom) -> Result<()> {
        if !self.excursion.contains_key(&atom.id) {
            let traj = simulate_cb_substream(
                &self.mech,
                atom.mass,
                self.grid,
                self.seed,
                &[stream::TRAJECTORY, EXCURSION_KIND, atom.id.layer as u64, atom.id.index as u64],
                self.truncations,
                &self.scheme,
            )?;
            self.excursion.insert(atom.id, traj);
        }
        Ok(())
    }

    fn ensure_immigrant(&mut self, atom: &JumpAtom) -> Result<()> {
        if !self.immigrant.contains_key(&atom.id) {
            let traj = simulate_cb_substream(
                &self.mech,
                atom.size,
                self.grid,
                self.seed,
                &[stream::TRAJECTORY, IMMIGRANT_KIND, atom.id.layer as u64, atom.id.index as u64],
                self.truncations,
                &self.scheme,
            )?;
            self.immigrant.insert(atom.id, traj);
        }
        Ok(())
    }
}

/// Picard iteration controls.
#[derive(Debug, Clone, Copy)]
pub struct PicardConfig {
    /// Convergence threshold scale: stop when the sup-difference falls below
    /// `tol · (1 + sup iterate)`.
    pub tol: f64,
    pub max_iter: usize,
    /// Starting localization level n₀; doubles whenever an iterate hits it.
    pub initial_level: f64,
    /// Hard cap on the localization level.
    pub max_level: f64,
}

impl Default for PicardConfig {
    fn default() -> Self {
        PicardConfig { tol: 1e-8, max_iter: 50, initial_level: 64.0, max_level: 1e6 }
    }
}

/// One frozen-noise replicate: base path, driver atoms, trajectory pool.
#[derive(Debug)]
pub struct Replicate {
    pub seed: u64,
    pub grid: Grid,
    pub driver: DriverAtoms,
    pub base: SamplePath,
    pub pool: TrajectoryPool,
}

impl Replicate {
    pub fn new(
        mech: &BranchingMechanism,
        nu: &crate::mechanisms::LevyMeasure,
        x0: f64,
        grid: Grid,
        seed: u64,
        truncations: Truncations,
        bounds: LayerBounds,
        scheme: SchemeConfig,
    ) -> Result<Self> {
        let mut driver = sample_atoms(seed, grid, mech, nu, bounds, truncations)?;
        let base = simulate_cbdi_sde(&CbdiModel::pure(mech.clone()), x0, &mut driver, &scheme)?;
        let pool = TrajectoryPool::new(seed, grid, mech.clone(), truncations, scheme);
        Ok(Replicate { seed, grid, driver, base, pool })
    }

    fn extend_for(&mut self, need_exc: f64, need_imm: f64, max_bound: f64) -> Result<()> {
        if need_exc > self.driver.bounds.excursion {
            if need_exc > max_bound {
                return Err(Error::LocalizationOverflow { level: need_exc, cap: max_bound });
            }
            self.driver = self.driver.extend(AtomKind::Excursion, need_exc)?;
        }
        if need_imm > self.driver.bounds.immigration {
            if need_imm > max_bound {
                return Err(Error::LocalizationOverflow { level: need_imm, cap: max_bound });
            }
            self.driver = self.driver.extend(AtomKind::Immigration, need_imm)?;
        }
        Ok(())
    }
}

/// Evaluate the immigration field on the whole grid for per-cell rate reads.
///
/// `rho_cells[i]` and `q_factor_cells[i]` are the drift rate and the jump-rate
/// state factor in force on cell `(t_i, t_{i+1}]` (left-limit convention).
/// Output index `j` is the field at `t_j`: base value, entrance-weighted
/// drift, excursion sum, and immigrant sum.
pub fn evaluate_field_grid(
    base: &SamplePath,
    driver: &DriverAtoms,
    pool: &mut TrajectoryPool,
    slope: SlopeAtInfinity,
    rho_cells: &[f64],
    q_factor_cells: &[f64],
    q_kernel: &ZKernel,
) -> Result<FieldDecomposition> {
    let grid = base.grid;
    debug_assert_eq!(rho_cells.len(), grid.n_cells);
    debug_assert_eq!(q_factor_cells.len(), grid.n_cells);

    let rho_active = rho_cells.iter().any(|&r| r > 0.0);
    let delta = match slope {
        SlopeAtInfinity::Finite(d) => d,
        SlopeAtInfinity::Infinite => {
            if rho_active {
                return Err(Error::UnsupportedRegime(
                    "the excursion construction requires φ'(∞) < ∞ when the \
                     drift rate is active; use the jump-SDE route"
                        .into(),
                ));
            }
            0.0 // unused: the drift term vanishes with ρ ≡ 0
        }
    };

    let n = grid.n_cells;
    let dt = grid.step;
    let mut drift = vec![0.0; n + 1];
    if rho_active {
        let decay = (-delta * dt).exp();
        let cell_weight = tilted_delay_mass(delta, dt);
        for j in 0..n {
            drift[j + 1] = decay * drift[j] + rho_cells[j] * cell_weight;
        }
    }

    // inclusion decisions, then trajectory materialization, then accumulation
    let mut exc_included: Vec<&ExcursionAtom> = Vec::new();
    for atom in &driver.excursion {
        let cell = grid.cell_containing(atom.time);
        if atom.mark <= rho_cells[cell] {
            exc_included.push(atom);
        }
    }
    let mut imm_included: Vec<&JumpAtom> = Vec::new();
    for atom in &driver.immigration {
        let cell = grid.cell_containing(atom.time);
        if atom.mark <= q_factor_cells[cell] * q_kernel.eval(atom.size) {
            imm_included.push(atom);
        }
    }
    for atom in &exc_included {
        pool.ensure_excursion(atom)?;
    }
    for atom in &imm_included {
        pool.ensure_immigrant(atom)?;
    }

    let mut excursion_sum = vec![0.0; n + 1];
    let mut arrivals = Vec::new();
    for atom in &exc_included {
        let traj = &pool.excursion[&atom.id];
        let first = grid.cell_containing(atom.time) + 1;
        for j in first..=n {
            excursion_sum[j] += traj.at_time(grid.time(j) - atom.time - atom.delay);
        }
        arrivals.push(JumpRecord {
            time: atom.time + atom.delay,
            size: atom.mass,
            origin: JumpOrigin::Immigration,
        });
    }
    let mut immigrant_sum = vec![0.0; n + 1];
    for atom in &imm_included {
        let traj = &pool.immigrant[&atom.id];
        let first = grid.cell_containing(atom.time) + 1;
        for j in first..=n {
            immigrant_sum[j] += traj.at_time(grid.time(j) - atom.time);
        }
        arrivals.push(JumpRecord {
            time: atom.time,
            size: atom.size,
            origin: JumpOrigin::Immigration,
        });
    }

    let values: Vec<f64> = (0..=n)
        .map(|j| base.values[j] + drift[j] + excursion_sum[j] + immigrant_sum[j])
        .collect();
    Ok(FieldDecomposition { values, drift, excursion_sum, immigrant_sum, arrivals })
}

/// Field values together with the terms that build them (for exports and
/// diagnostics).
#[derive(Debug, Clone)]
pub struct FieldDecomposition {
    pub values: Vec<f64>,
    pub drift: Vec<f64>,
    pub excursion_sum: Vec<f64>,
    pub immigrant_sum: Vec<f64>,
    pub arrivals: Vec<JumpRecord>,
}

impl FieldDecomposition {
    /// CSV export `t, X, continuous_drift_term, excursion_sum, immigrant_sum, Y`.
    pub fn to_csv(&self, base: &SamplePath) -> String {
        let mut out =
            String::from("# cbdi-field v1\nt,X,continuous_drift_term,excursion_sum,immigrant_sum,Y\n");
        for j in 0..self.values.len() {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                base.grid.time(j),
                base.values[j],
                self.drift[j],
                self.excursion_sum[j],
                self.immigrant_sum[j],
                self.values[j]
            ));
        }
        out
    }

    fn into_path(self, base: &SamplePath) -> SamplePath {
        let mut jumps = base.jumps.clone();
        jumps.extend(self.arrivals);
        jumps.sort_by(|a, b| a.time.partial_cmp(&b.time).unwrap());
        SamplePath {
            grid: base.grid,
            values: self.values,
            jumps,
            clamped_steps: base.clamped_steps,
            seed: base.seed,
        }
    }
}

/// Field with deterministic time-dependent rates (the inhomogeneous
/// immigration construction).
pub fn deterministic_field(
    rep: &mut Replicate,
    rho: &RatePath,
    g: Option<&DeterministicKernel>,
    max_bound: f64,
) -> Result<SamplePath> {
    let grid = rep.grid;
    let rho_cells: Vec<f64> = (0..grid.n_cells).map(|i| rho.eval(grid.time(i))).collect();
    let (q_cells, kernel) = match g {
        None => (vec![0.0; grid.n_cells], ZKernel::One),
        Some(k) => (
            (0..grid.n_cells).map(|i| k.time_factor.eval(grid.time(i))).collect(),
            k.kernel,
        ),
    };
    let need_exc = rho_cells.iter().cloned().fold(0.0, f64::max);
    let need_imm = q_cells.iter().cloned().fold(0.0, f64::max);
    rep.extend_for(need_exc, need_imm, max_bound)?;
    let slope = rep.pool.mech.slope_at_infinity();
    let field = evaluate_field_grid(
        &rep.base,
        &rep.driver,
        &mut rep.pool,
        slope,
        &rho_cells,
        &q_cells,
        &kernel,
    )?;
    Ok(field.into_path(&rep.base))
}

enum LevelRun {
    Converged { field: FieldDecomposition, sup_diffs: Vec<f64> },
    HitLevel,
}

fn max_rate_on_level(rates: &DependentRates, level: f64) -> (f64, f64) {
    let mut beta_max: f64 = 0.0;
    let mut q_max: f64 = 0.0;
    let samples = 512;
    for i in 0..=samples {
        let x = level * i as f64 / samples as f64;
        beta_max = beta_max.max(rates.beta.eval(x));
        q_max = q_max.max(rates.q.sup_over_z(x));
    }
    (beta_max, q_max)
}

fn picard_at_level(
    model: &CbdiModel,
    rep: &mut Replicate,
    initial: &[f64],
    level: f64,
    cfg: &PicardConfig,
) -> Result<LevelRun> {
    let grid = rep.grid;
    let capped = model.rates.capped(level);
    let slope = model.branching.slope_at_infinity();
    let mut prev: Vec<f64> = initial.to_vec();
    let mut sup_diffs = Vec::new();

    for _k in 1..=cfg.max_iter {
        let rho_cells: Vec<f64> = (0..grid.n_cells).map(|i| capped.beta(prev[i])).collect();
        let q_cells: Vec<f64> =
            (0..grid.n_cells).map(|i| capped.q_state_factor(prev[i])).collect();
        let next = evaluate_field_grid(
            &rep.base,
            &rep.driver,
            &mut rep.pool,
            slope,
            &rho_cells,
            &q_cells,
            &model.rates.q.kernel,
        )?;
        if next.values.iter().any(|&v| v >= level) {
            return Ok(LevelRun::HitLevel);
        }
        let diff = prev
            .iter()
            .zip(next.values.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        sup_diffs.push(diff);
        let scale = 1.0 + next.values.iter().cloned().fold(0.0, f64::max);
        if diff <= cfg.tol * scale {
            return Ok(LevelRun::Converged { field: next, sup_diffs });
        }
        prev = next.values;
    }
    Err(Error::PicardNonConvergence {
        iterations: cfg.max_iter,
        last_diff: *sup_diffs.last().unwrap_or(&f64::NAN),
        history: sup_diffs,
    })
}

#[derive(Debug, Clone)]
pub struct PicardOutcome {
    pub path: SamplePath,
    pub sup_diffs: Vec<f64>,
    pub level: f64,
}

impl PicardOutcome {
    pub fn iterations(&self) -> usize {
        self.sup_diffs.len()
    }
}

/// Solve the stochastic field equation by Picard iteration from the base
/// path, doubling the localization level whenever an iterate reaches it.
pub fn picard_solve(
    model: &CbdiModel,
    rep: &mut Replicate,
    cfg: &PicardConfig,
) -> Result<PicardOutcome> {
    picard_solve_from(model, rep, None, cfg)
}

/// Same as [`picard_solve`] but starting from a custom initial iterate
/// (the uniqueness check starts two runs apart on the same noise).
pub fn picard_solve_from(
    model: &CbdiModel,
    rep: &mut Replicate,
    initial: Option<Vec<f64>>,
    cfg: &PicardConfig,
) -> Result<PicardOutcome> {
    let base_values = rep.base.values.clone();
    let start = initial.unwrap_or_else(|| base_values.clone());
    let mut level = cfg.initial_level.max(start.iter().cloned().fold(0.0, f64::max) * 2.0);
    loop {
        let (beta_max, q_max) = max_rate_on_level(&model.rates, level);
        rep.extend_for(beta_max, q_max, cfg.max_level)?;
        match picard_at_level(model, rep, &start, level, cfg)? {
            LevelRun::Converged { field, sup_diffs } => {
                return Ok(PicardOutcome { path: field.into_path(&rep.base), sup_diffs, level })
            }
            LevelRun::HitLevel => {
                level *= 2.0;
                if level > cfg.max_level {
                    return Err(Error::LocalizationOverflow {
                        level,
                        cap: cfg.max_level,
                    });
                }
            }
        }
    }
}

/// Grid audit of the comparison hypotheses: domination and the required
/// monotonicity of one rate of each kind.
pub fn audit_comparison_hypotheses(
    lo: &DependentRates,
    hi: &DependentRates,
    x_max: f64,
) -> Result<()> {
    let samples = 256;
    let xs: Vec<f64> = (0..=samples).map(|i| x_max * i as f64 / samples as f64).collect();
    let zs = [0.1, 0.5, 1.0, 2.0, 5.0];
    let slack = 1e-12;

    for &x in &xs {
        if lo.beta.eval(x) > hi.beta.eval(x) + slack {
            return Err(Error::HypothesisViolation(format!(
                "drift rates are not ordered at x = {x}"
            )));
        }
        for &z in &zs {
            if lo.q.eval(x, z) > hi.q.eval(x, z) + slack {
                return Err(Error::HypothesisViolation(format!(
                    "jump rates are not ordered at (x, z) = ({x}, {z})"
                )));
            }
        }
    }

    let nondecreasing = |f: &dyn Fn(f64) -> f64| -> bool {
        xs.windows(2).all(|w| f(w[1]) + slack >= f(w[0]))
    };
    if !nondecreasing(&|x| lo.beta.eval(x)) && !nondecreasing(&|x| hi.beta.eval(x)) {
        return Err(Error::HypothesisViolation(
            "neither drift rate is monotone on the audit grid".into(),
        ));
    }
    for &z in &zs {
        if !nondecreasing(&|x| lo.q.eval(x, z)) && !nondecreasing(&|x| hi.q.eval(x, z)) {
            return Err(Error::HypothesisViolation(format!(
                "neither jump rate is monotone in the state at z = {z}"
            )));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy)]
pub struct CompareOutcome {
    /// Max over the grid of `(Y_lo - Y_hi)⁺`; exactly zero when the coupling
    /// preserves the ordering.
    pub positive_gap: f64,
    pub level: f64,
}

/// Run the dominated and dominating models on the same noise with a shared
/// localization level and report the worst ordering violation.
pub fn coupled_compare(
    lo: &CbdiModel,
    hi: &CbdiModel,
    rep: &mut Replicate,
    cfg: &PicardConfig,
) -> Result<CompareOutcome> {
    audit_comparison_hypotheses(&lo.rates, &hi.rates, 4.0 * cfg.initial_level)?;
    let base_values = rep.base.values.clone();
    let mut level = cfg.initial_level.max(base_values.iter().cloned().fold(0.0, f64::max) * 2.0);
    loop {
        let (beta_lo, q_lo) = max_rate_on_level(&lo.rates, level);
        let (beta_hi, q_hi) = max_rate_on_level(&hi.rates, level);
        rep.extend_for(beta_lo.max(beta_hi), q_lo.max(q_hi), cfg.max_level)?;
        let run_lo = picard_at_level(lo, rep, &base_values, level, cfg)?;
        let run_hi = picard_at_level(hi, rep, &base_values, level, cfg)?;
        match (run_lo, run_hi) {
            (
                LevelRun::Converged { field: f_lo, .. },
                LevelRun::Converged { field: f_hi, .. },
            ) => {
                let positive_gap = f_lo
                    .values
                    .iter()
                    .zip(f_hi.values.iter())
                    .map(|(a, b)| a - b)
                    .fold(0.0, f64::max);
                return Ok(CompareOutcome { positive_gap, level });
            }
            _ => {
                level *= 2.0;
                if level > cfg.max_level {
                    return Err(Error::LocalizationOverflow { level, cap: cfg.max_level });
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct UniquenessOutcome {
    /// Sup-norm gap between the two converged fixed points.
    pub sup_gap: f64,
    pub diffs_from_base: Vec<f64>,
    pub diffs_from_shifted: Vec<f64>,
}

/// Two Picard runs on identical noise from different initial iterates must
/// land on the same fixed point.
pub fn pathwise_uniqueness(
    model: &CbdiModel,
    rep: &mut Replicate,
    shift: f64,
    cfg: &PicardConfig,
) -> Result<UniquenessOutcome> {
    let from_base = picard_solve(model, rep, cfg)?;
    let shifted: Vec<f64> = rep.base.values.iter().map(|&v| v + shift).collect();
    let from_shifted = picard_solve_from(model, rep, Some(shifted), cfg)?;
    let sup_gap = from_base
        .path
        .values
        .iter()
        .zip(from_shifted.path.values.iter())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(UniquenessOutcome {
        sup_gap,
        diffs_from_base: from_base.sup_diffs,
        diffs_from_shifted: from_shifted.sup_diffs,
    })
}

/// Upper bound on the mean mass lost to the excursion and immigration
/// truncations over the horizon, from the first-moment formula:
/// `e^{|b|T} · T · (sup ρ · M₁^m(0, ε₀) · ∫₀ᵀ e^{-δa} da
///                  + sup q-factor · ∫_{(0,ε_ν)} κ(z) z ν(dz))`.
pub fn truncation_bias_bound(
    mech: &BranchingMechanism,
    nu: &crate::mechanisms::LevyMeasure,
    q_kernel: &ZKernel,
    sup_rho: f64,
    sup_q_factor: f64,
    truncations: Truncations,
    horizon: f64,
) -> f64 {
    let envelope = (mech.drift.abs() * horizon).exp() * horizon;
    let exc_part = match mech.slope_at_infinity() {
        SlopeAtInfinity::Finite(delta) if sup_rho > 0.0 => {
            sup_rho
                * mech.jumps.moment(1, 0.0, truncations.excursion)
                * tilted_delay_mass(delta, horizon)
        }
        _ => 0.0,
    };
    let imm_part =
        sup_q_factor * nu.weighted_first_moment(q_kernel, 0.0, truncations.immigration);
    envelope * (exc_part + imm_part)
}

#[derive(Debug, Clone)]
pub struct KuznetsovOutcome {
    pub estimate: f64,
    pub std_error: f64,
    pub analytic: f64,
    pub remainder_bound: f64,
    pub pass: bool,
}

/// Monte Carlo check of the entrance-marginal identity: the expected
/// excursion-sum functional `Σ (1 - e^{-λ w(t)})` over a unit-intensity atom
/// box equals `v_t(λ) - h_t λ` up to the small-mass remainder.
pub fn kuznetsov_marginal(
    cum: &crate::cumulant::Cumulant,
    t: f64,
    lambda: f64,
    replicates: usize,
    master_seed: u64,
    step: f64,
    truncations: Truncations,
    scheme: SchemeConfig,
) -> Result<KuznetsovOutcome> {
    use rand::Rng;
    use rand_distr::Distribution;

    let mech = cum.mechanism().clone();
    let delta = mech.slope_at_infinity().finite().ok_or_else(|| {
        Error::UnsupportedRegime(
            "the entrance-marginal check requires φ'(∞) < ∞".into(),
        )
    })?;
    let grid = Grid::from_horizon(t, step);

    // Atoms of the path measure replicated over a unit (time, mark) box:
    // only the delay (restricted to (0, t], beyond which the functional
    // vanishes) and the entrance mass matter.
    let mean_count = mech.jumps.tail_mass(truncations.excursion)
        * crate::random_drivers::tilted_delay_mass(delta, t);
    let samples = crate::stats::ensemble(replicates, master_seed, |seed, _| {
        let mut rng = stream::rng(seed, &[stream::EXCURSION]);
        let count = if mean_count > 0.0 {
            rand_distr::Poisson::new(mean_count)
                .map_err(|e| Error::InvalidParameter(format!("Poisson: {e}")))?
                .sample(&mut rng) as usize
        } else {
            0
        };
        let mut acc = 0.0;
        for index in 0..count {
            let u: f64 = rng.random();
            let alpha = crate::random_drivers::tilted_delay(delta, t, u);
            let mass = mech.jumps.sample_tail(truncations.excursion, &mut rng);
            let traj = simulate_cb_substream(
                &mech,
                mass,
                grid,
                seed,
                &[stream::TRAJECTORY, EXCURSION_KIND, index as u64],
                truncations,
                &scheme,
            )?;
            acc += -(-lambda * traj.at_time(t - alpha)).exp_m1();
        }
        Ok(acc)
    })?;
    let (estimate, std_error) = crate::stats::mean_se(&samples);

    let analytic = cum.v(t, lambda)? - cum.h(t) * lambda;
    // dropped masses below ε₀ contribute at most λ·E[w] per atom
    let remainder_bound = lambda
        * mech.jumps.moment(1, 0.0, truncations.excursion)
        * (-mech.drift * t).exp()
        * tilted_delay_mass(delta - mech.drift, t);
    let pass = (estimate - analytic).abs() <= 3.0 * std_error + remainder_bound;
    Ok(KuznetsovOutcome { estimate, std_error, analytic, remainder_bound, pass })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cumulant::Cumulant;
    use crate::mechanisms::LevyMeasure;

    fn mech_atomic() -> BranchingMechanism {
        BranchingMechanism::new(1.0, 0.0, LevyMeasure::unit_atom(1.0)).unwrap()
    }

    fn nu_atomic() -> LevyMeasure {
        LevyMeasure::Atomic(vec![(1.0, 0.5)])
    }

    fn make_rep(seed: u64) -> Replicate {
        Replicate::new(
            &mech_atomic(),
            &nu_atomic(),
            1.0,
            Grid::from_horizon(1.0, 0.01),
            seed,
            Truncations::default(),
            LayerBounds { branching: 4.0, immigration: 2.0, excursion: 2.0 },
            SchemeConfig::default(),
        )
        .unwrap()
    }

    #[test]
    fn no_rates_reproduce_base_path() {
        let mut rep = make_rep(3);
        let model = CbdiModel::pure(mech_atomic());
        let out = picard_solve(&model, &mut rep, &PicardConfig::default()).unwrap();
        assert_eq!(out.iterations(), 1);
        assert_eq!(out.path.values, rep.base.values);
    }

    #[test]
    fn constant_rates_converge_in_two_iterations() {
        let mut rep = make_rep(5);
        let model = CbdiModel {
            branching: mech_atomic(),
            immigration_jumps: nu_atomic(),
            rates: DependentRates::constant(0.5, 1.0, &nu_atomic()),
        };
        let out = picard_solve(&model, &mut rep, &PicardConfig::default()).unwrap();
        assert_eq!(out.iterations(), 2);
        assert_eq!(*out.sup_diffs.last().unwrap(), 0.0);
        // immigration only adds mass
        for (y, x) in out.path.values.iter().zip(rep.base.values.iter()) {
            assert!(y >= x);
        }
    }

    #[test]
    fn causality_of_forced_immigrant_atom() {
        // an atom at time s contributes nothing before s
        let mut rep = make_rep(11);
        let model = CbdiModel {
            branching: mech_atomic(),
            immigration_jumps: nu_atomic(),
            rates: DependentRates::constant(0.0, 1.0, &nu_atomic()),
        };
        let out = picard_solve(&model, &mut rep, &PicardConfig::default()).unwrap();
        let first_atom = rep.driver.immigration.iter().map(|a| a.time).fold(f64::MAX, f64::min);
        for j in 0..rep.grid.n_points() {
            if rep.grid.time(j) < first_atom.min(1.0) {
                // before any immigrant lands, only the drift term separates Y from X
                let gap = out.path.values[j] - rep.base.values[j];
                let drift_cap = 0.0; // β ≡ 0 here
                assert!(gap <= drift_cap + 1e-12, "gap {gap} at {}", rep.grid.time(j));
            }
        }
    }

    #[test]
    fn proportional_rates_contract_geometrically() {
        let nu = nu_atomic();
        let model = CbdiModel {
            branching: mech_atomic(),
            immigration_jumps: nu.clone(),
            rates: DependentRates::proportional(0.2, &nu),
        };
        let mut rep = make_rep(7);
        let out = picard_solve(&model, &mut rep, &PicardConfig::default()).unwrap();
        let diffs = &out.sup_diffs;
        assert!(diffs.len() >= 2);
        // successive sup-differences decay after the first iteration
        for w in diffs.windows(2).skip(1) {
            assert!(
                w[1] <= w[0] * 0.9 + 1e-12,
                "no contraction: {:?}",
                diffs
            );
        }
    }

    #[test]
    fn uniqueness_from_shifted_start() {
        let nu = nu_atomic();
        let model = CbdiModel {
            branching: mech_atomic(),
            immigration_jumps: nu.clone(),
            rates: DependentRates::proportional(0.2, &nu),
        };
        let mut rep = make_rep(13);
        let out = pathwise_uniqueness(&model, &mut rep, 0.5, &PicardConfig::default()).unwrap();
        assert!(out.sup_gap <= 1e-7, "gap {}", out.sup_gap);
    }

    #[test]
    fn comparison_ordering_holds_pathwise() {
        let nu = nu_atomic();
        let lo = CbdiModel::pure(mech_atomic());
        let hi = CbdiModel {
            branching: mech_atomic(),
            immigration_jumps: nu.clone(),
            rates: DependentRates::constant(0.5, 1.0, &nu),
        };
        for seed in 0..24 {
            let mut rep = make_rep(seed);
            let out = coupled_compare(&lo, &hi, &mut rep, &PicardConfig::default()).unwrap();
            assert_eq!(out.positive_gap, 0.0, "seed {seed}");
        }
    }

    #[test]
    fn comparison_refuses_reversed_rates() {
        let nu = nu_atomic();
        let small = CbdiModel {
            branching: mech_atomic(),
            immigration_jumps: nu.clone(),
            rates: DependentRates::constant(0.2, 1.0, &nu),
        };
        let big = CbdiModel {
            branching: mech_atomic(),
            immigration_jumps: nu.clone(),
            rates: DependentRates::constant(0.8, 1.0, &nu),
        };
        let mut rep = make_rep(1);
        let err = coupled_compare(&big, &small, &mut rep, &PicardConfig::default()).unwrap_err();
        assert!(matches!(err, Error::HypothesisViolation(_)));
    }

    #[test]
    fn field_rejects_active_drift_without_finite_slope() {
        let mech = BranchingMechanism::cir(0.0, 1.0);
        let mut rep = Replicate::new(
            &mech,
            &LevyMeasure::Zero,
            1.0,
            Grid::from_horizon(1.0, 0.01),
            2,
            Truncations::default(),
            LayerBounds { branching: 4.0, immigration: 1.0, excursion: 0.0 },
            SchemeConfig::default(),
        )
        .unwrap();
        let err = deterministic_field(&mut rep, &RatePath::Constant(1.0), None, 1e6)
            .map(|_| ())
            .unwrap_err();
        assert!(matches!(err, Error::UnsupportedRegime(_)));
    }

    #[test]
    fn kuznetsov_marginal_small_run() {
        let cum = Cumulant::new(mech_atomic());
        let out = kuznetsov_marginal(
            &cum,
            1.0,
            1.0,
            4000,
            17,
            0.01,
            Truncations::default(),
            SchemeConfig::default(),
        )
        .unwrap();
        assert!(out.pass, "estimate {} vs {} (se {})", out.estimate, out.analytic, out.std_error);
        // λ = 0 degenerates to zero on both sides
        let zero = kuznetsov_marginal(
            &cum,
            1.0,
            0.0,
            100,
            17,
            0.01,
            Truncations::default(),
            SchemeConfig::default(),
        )
        .unwrap();
        assert_eq!(zero.estimate, 0.0);
        assert_eq!(zero.analytic, 0.0);
    }
}
