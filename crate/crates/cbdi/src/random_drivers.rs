//! Frozen driving noise: Brownian increments and the layered Poisson atom
//! sets behind the branching, immigration, and excursion integrals.
//!
//! All randomness is drawn from counter-style substreams keyed by
//! `(seed, purpose, layer)`, so regenerating with the same seed is bit-exact,
//! replicates parallelize without shared state, and raising a thinning bound
//! only appends atoms in the new mark range — existing atoms never move.

use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

use crate::error::{Error, Result};
use crate::mechanisms::{BranchingMechanism, LevyMeasure, SlopeAtInfinity};

/// Substream derivation: one ChaCha key per master seed, one stream id per
/// tag tuple.
pub mod stream {
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    pub const BROWNIAN: u64 = 1;
    pub const BRANCHING: u64 = 2;
    pub const IMMIGRATION: u64 = 3;
    pub const EXCURSION: u64 = 4;
    pub const TRAJECTORY: u64 = 5;
    pub const REPLICATE: u64 = 6;

    fn splitmix64(mut x: u64) -> u64 {
        x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = x;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    /// Fold a tag tuple into a 64-bit stream id.
    pub fn derive(seed: u64, tags: &[u64]) -> u64 {
        let mut acc = splitmix64(seed ^ 0x5bf0_3635_dcb2_9e8c);
        for &t in tags {
            acc = splitmix64(acc ^ t.wrapping_mul(0x9e37_79b9_7f4a_7c15));
        }
        acc
    }

    /// Deterministic generator for the substream `(seed, tags...)`.
    pub fn rng(seed: u64, tags: &[u64]) -> ChaCha12Rng {
        let mut key = [0u8; 32];
        let mut word = splitmix64(seed);
        for chunk in key.chunks_mut(8) {
            chunk.copy_from_slice(&word.to_le_bytes());
            word = splitmix64(word);
        }
        let mut rng = ChaCha12Rng::from_seed(key);
        rng.set_stream(derive(seed, tags));
        rng
    }

    /// Seed for replicate `index` of a Monte Carlo run.
    pub fn replicate_seed(master: u64, index: u64) -> u64 {
        derive(master, &[REPLICATE, index])
    }
}

/// Uniform time grid `t_i = i·step`, `i = 0..=n_cells`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub step: f64,
    pub n_cells: usize,
}

impl Grid {
    pub fn new(step: f64, n_cells: usize) -> Self {
        assert!(step > 0.0 && n_cells > 0);
        Grid { step, n_cells }
    }

    pub fn from_horizon(horizon: f64, step: f64) -> Self {
        assert!(horizon > 0.0 && step > 0.0);
        let n = (horizon / step).round().max(1.0) as usize;
        Grid { step, n_cells: n }
    }

    pub fn horizon(&self) -> f64 {
        self.step * self.n_cells as f64
    }

    pub fn time(&self, i: usize) -> f64 {
        self.step * i as f64
    }

    pub fn n_points(&self) -> usize {
        self.n_cells + 1
    }

    /// Cell index `i` with `s ∈ (t_i, t_{i+1}]`, clamped to the grid.
    pub fn cell_containing(&self, s: f64) -> usize {
        let idx = (s / self.step).ceil() as isize - 1;
        idx.clamp(0, self.n_cells as isize - 1) as usize
    }

    /// Index of the grid point at or left of `tau` (piecewise-constant reads).
    pub fn floor_index(&self, tau: f64) -> usize {
        let idx = (tau / self.step).floor() as isize;
        idx.clamp(0, self.n_cells as isize) as usize
    }

    pub fn refined(&self) -> Grid {
        Grid { step: self.step / 2.0, n_cells: self.n_cells * 2 }
    }
}

/// Small-jump / small-mass truncation levels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Truncations {
    /// ε for branching jumps: atoms carry z ≥ ε.
    pub branching: f64,
    /// ε for immigration jumps.
    pub immigration: f64,
    /// ε for excursion initial masses.
    pub excursion: f64,
}

impl Default for Truncations {
    fn default() -> Self {
        Truncations { branching: 1e-3, immigration: 1e-3, excursion: 1e-3 }
    }
}

/// Current mark-coordinate coverage per atom kind; a zero excursion bound
/// means excursion atoms were not requested.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerBounds {
    pub branching: f64,
    pub immigration: f64,
    pub excursion: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AtomId {
    pub layer: u32,
    pub index: u32,
}

/// Point of a Poisson random measure on (time, size, mark) space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpAtom {
    pub time: f64,
    pub size: f64,
    pub mark: f64,
    pub id: AtomId,
}

/// Point of the path-valued immigration measure built on the entrance rule:
/// birth time, thinning mark, entrance delay, and initial mass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExcursionAtom {
    pub time: f64,
    pub mark: f64,
    pub delay: f64,
    pub mass: f64,
    pub id: AtomId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AtomKind {
    Branching,
    Immigration,
    Excursion,
}

/// One frozen realization of all driving noise on a grid.
#[derive(Debug, Clone)]
pub struct DriverAtoms {
    pub seed: u64,
    pub grid: Grid,
    /// One standard normal per grid cell.
    pub brownian: Vec<f64>,
    /// Branching atoms, sorted by time; sizes ≥ truncations.branching.
    pub branching: Vec<JumpAtom>,
    /// Immigration atoms, sorted by time; sizes ≥ truncations.immigration.
    pub immigration: Vec<JumpAtom>,
    /// Excursion atoms, sorted by time; masses ≥ truncations.excursion.
    pub excursion: Vec<ExcursionAtom>,
    pub bounds: LayerBounds,
    pub truncations: Truncations,
    base_width: f64,
    mech: BranchingMechanism,
    nu: LevyMeasure,
}

/// `∫₀ᵀ e^{-δ·a} da`.
pub fn tilted_delay_mass(delta: f64, horizon: f64) -> f64 {
    if delta == 0.0 {
        horizon
    } else {
        -(-delta * horizon).exp_m1() / delta
    }
}

/// Inverse CDF of the delay density `∝ e^{-δ·a}` on (0, horizon].
pub fn tilted_delay(delta: f64, horizon: f64, u: f64) -> f64 {
    if delta == 0.0 {
        u * horizon
    } else {
        // α = -ln(1 - u·(1 - e^{-δT})) / δ
        let q = -(-delta * horizon).exp_m1();
        -(-u * q).ln_1p() / delta
    }
}

/// Draw all atoms and Brownian increments for one replicate.
pub fn sample_atoms(
    seed: u64,
    grid: Grid,
    mech: &BranchingMechanism,
    nu: &LevyMeasure,
    bounds: LayerBounds,
    truncations: Truncations,
) -> Result<DriverAtoms> {
    if truncations.branching <= 0.0
        || truncations.immigration <= 0.0
        || truncations.excursion <= 0.0
    {
        return Err(Error::InvalidParameter("truncation levels must be positive".into()));
    }
    if bounds.branching <= 0.0 || bounds.immigration <= 0.0 || bounds.excursion < 0.0 {
        return Err(Error::InvalidParameter(
            "layer bounds must be positive (excursion may be zero when unused)".into(),
        ));
    }

    let mut driver = DriverAtoms {
        seed,
        grid,
        brownian: Vec::new(),
        branching: Vec::new(),
        immigration: Vec::new(),
        excursion: Vec::new(),
        bounds,
        truncations,
        base_width: 1.0,
        mech: mech.clone(),
        nu: nu.clone(),
    };

    let mut rng = stream::rng(seed, &[stream::BROWNIAN]);
    driver.brownian =
        (0..grid.n_cells).map(|_| StandardNormal.sample(&mut rng)).collect();

    driver.branching = driver.jump_layers(AtomKind::Branching, bounds.branching)?;
    driver.immigration = driver.jump_layers(AtomKind::Immigration, bounds.immigration)?;
    driver.excursion = driver.excursion_layers(bounds.excursion)?;
    Ok(driver)
}

impl DriverAtoms {
    /// Per-time intensity of retained atoms of one kind (mark dimension
    /// excluded).
    fn kind_intensity(&self, kind: AtomKind) -> Result<f64> {
        Ok(match kind {
            AtomKind::Branching => self.mech.jumps.tail_mass(self.truncations.branching),
            AtomKind::Immigration => self.nu.tail_mass(self.truncations.immigration),
            AtomKind::Excursion => {
                let delta = match self.mech.slope_at_infinity() {
                    SlopeAtInfinity::Finite(d) => d,
                    SlopeAtInfinity::Infinite => {
                        return Err(Error::UnsupportedRegime(
                            "excursion atoms require φ'(∞) < ∞; \
                             use the jump-SDE route for this mechanism"
                                .into(),
                        ))
                    }
                };
                self.mech.jumps.tail_mass(self.truncations.excursion)
                    * tilted_delay_mass(delta, self.grid.horizon())
            }
        })
    }

    /// Mark interval of layer `j`: (0, w] for j = 0, then doubling spans.
    fn layer_span(&self, layer: u32) -> (f64, f64) {
        let w = self.base_width;
        if layer == 0 {
            (0.0, w)
        } else {
            (w * 2f64.powi(layer as i32 - 1), w * 2f64.powi(layer as i32))
        }
    }

    fn jump_layers(&self, kind: AtomKind, bound: f64) -> Result<Vec<JumpAtom>> {
        let kind_tag = match kind {
            AtomKind::Branching => stream::BRANCHING,
            AtomKind::Immigration => stream::IMMIGRATION,
            AtomKind::Excursion => unreachable!(),
        };
        let eps = match kind {
            AtomKind::Branching => self.truncations.branching,
            _ => self.truncations.immigration,
        };
        let measure = match kind {
            AtomKind::Branching => &self.mech.jumps,
            _ => &self.nu,
        };
        let intensity = self.kind_intensity(kind)?;
        let horizon = self.grid.horizon();
        let mut atoms = Vec::new();
        if intensity <= 0.0 {
            return Ok(atoms);
        }

        let mut layer = 0u32;
        loop {
            let (lo, hi) = self.layer_span(layer);
            if lo >= bound {
                break;
            }
            let mut rng = stream::rng(self.seed, &[kind_tag, layer as u64]);
            let mean = horizon * intensity * (hi - lo);
            let count = poisson_count(&mut rng, mean)?;
            for index in 0..count {
                let time = horizon * (1.0 - rng.random::<f64>());
                let size = measure.sample_tail(eps, &mut rng);
                let mark = lo + (hi - lo) * (1.0 - rng.random::<f64>());
                if mark <= bound {
                    atoms.push(JumpAtom {
                        time,
                        size,
                        mark,
                        id: AtomId { layer, index: index as u32 },
                    });
                }
            }
            layer += 1;
        }
        sort_by_time(&mut atoms, |a| (a.time, a.id));
        Ok(atoms)
    }

    fn excursion_layers(&self, bound: f64) -> Result<Vec<ExcursionAtom>> {
        let mut atoms = Vec::new();
        if bound <= 0.0 {
            return Ok(atoms);
        }
        let delta = self
            .mech
            .slope_at_infinity()
            .finite()
            .ok_or_else(|| {
                Error::UnsupportedRegime(
                    "excursion atoms require φ'(∞) < ∞; \
                     use the jump-SDE route for this mechanism"
                        .into(),
                )
            })?;
        let intensity = self.kind_intensity(AtomKind::Excursion)?;
        if intensity <= 0.0 {
            return Ok(atoms);
        }
        let horizon = self.grid.horizon();
        let mut layer = 0u32;
        loop {
            let (lo, hi) = self.layer_span(layer);
            if lo >= bound {
                break;
            }
            let mut rng = stream::rng(self.seed, &[stream::EXCURSION, layer as u64]);
            let mean = horizon * intensity * (hi - lo);
            let count = poisson_count(&mut rng, mean)?;
            for index in 0..count {
                let time = horizon * (1.0 - rng.random::<f64>());
                let delay = tilted_delay(delta, horizon, rng.random::<f64>());
                let mass = self
                    .mech
                    .jumps
                    .sample_tail(self.truncations.excursion, &mut rng);
                let mark = lo + (hi - lo) * (1.0 - rng.random::<f64>());
                if mark <= bound {
                    atoms.push(ExcursionAtom {
                        time,
                        mark,
                        delay,
                        mass,
                        id: AtomId { layer, index: index as u32 },
                    });
                }
            }
            layer += 1;
        }
        sort_by_time(&mut atoms, |a| (a.time, a.id));
        Ok(atoms)
    }

    /// Superset driver with one kind's mark bound raised; existing atoms are
    /// unchanged because layers regenerate from their own substreams.
    pub fn extend(&self, kind: AtomKind, new_bound: f64) -> Result<DriverAtoms> {
        let current = match kind {
            AtomKind::Branching => self.bounds.branching,
            AtomKind::Immigration => self.bounds.immigration,
            AtomKind::Excursion => self.bounds.excursion,
        };
        if new_bound < current {
            return Err(Error::InvalidParameter(format!(
                "extension must not shrink the bound ({new_bound} < {current})"
            )));
        }
        let mut out = self.clone();
        match kind {
            AtomKind::Branching => {
                out.bounds.branching = new_bound;
                out.branching = out.jump_layers(AtomKind::Branching, new_bound)?;
            }
            AtomKind::Immigration => {
                out.bounds.immigration = new_bound;
                out.immigration = out.jump_layers(AtomKind::Immigration, new_bound)?;
            }
            AtomKind::Excursion => {
                out.bounds.excursion = new_bound;
                out.excursion = out.excursion_layers(new_bound)?;
            }
        }
        Ok(out)
    }

    /// Debug dump: `kind,s,z_or_x,u,alpha` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("# cbdi-atoms v1\nkind,s,z_or_x,u,alpha\n");
        for a in &self.branching {
            out.push_str(&format!("branching,{},{},{},\n", a.time, a.size, a.mark));
        }
        for a in &self.immigration {
            out.push_str(&format!("immigration,{},{},{},\n", a.time, a.size, a.mark));
        }
        for a in &self.excursion {
            out.push_str(&format!(
                "excursion,{},{},{},{}\n",
                a.time, a.mass, a.mark, a.delay
            ));
        }
        out
    }
}

fn poisson_count<R: Rng>(rng: &mut R, mean: f64) -> Result<usize> {
    if mean <= 0.0 {
        return Ok(0);
    }
    if mean > 5e6 {
        return Err(Error::InvalidParameter(format!(
            "atom layer intensity {mean:.3e} is too large; \
             check layer bounds and truncation levels"
        )));
    }
    let draw: f64 = Poisson::new(mean)
        .map_err(|e| Error::InvalidParameter(format!("Poisson({mean}): {e}")))?
        .sample(rng);
    Ok(draw as usize)
}

fn sort_by_time<T, K: PartialOrd, F: Fn(&T) -> (f64, K)>(atoms: &mut [T], key: F) {
    atoms.sort_by(|a, b| {
        let (ta, ka) = key(a);
        let (tb, kb) = key(b);
        ta.partial_cmp(&tb)
            .unwrap()
            .then(ka.partial_cmp(&kb).unwrap_or(std::cmp::Ordering::Equal))
    });
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanisms::BranchingMechanism;

    fn atomic_setup() -> (BranchingMechanism, LevyMeasure) {
        let mech = BranchingMechanism::new(1.0, 0.0, LevyMeasure::unit_atom(1.0)).unwrap();
        let nu = LevyMeasure::Atomic(vec![(1.0, 2.0)]);
        (mech, nu)
    }

    fn bounds() -> LayerBounds {
        LayerBounds { branching: 2.0, immigration: 1.0, excursion: 1.0 }
    }

    #[test]
    fn same_seed_reproduces_atoms_bit_exactly() {
        let (mech, nu) = atomic_setup();
        let grid = Grid::from_horizon(1.0, 0.01);
        let a = sample_atoms(7, grid, &mech, &nu, bounds(), Truncations::default()).unwrap();
        let b = sample_atoms(7, grid, &mech, &nu, bounds(), Truncations::default()).unwrap();
        assert_eq!(a.branching, b.branching);
        assert_eq!(a.immigration, b.immigration);
        assert_eq!(a.excursion, b.excursion);
        assert_eq!(a.brownian, b.brownian);
    }

    #[test]
    fn empty_tail_gives_no_atoms() {
        let mech = BranchingMechanism::cir(1.0, 1.0);
        let grid = Grid::from_horizon(1.0, 0.01);
        let d = sample_atoms(
            3,
            grid,
            &mech,
            &LevyMeasure::Zero,
            LayerBounds { branching: 2.0, immigration: 1.0, excursion: 0.0 },
            Truncations::default(),
        )
        .unwrap();
        assert!(d.branching.is_empty());
        assert!(d.immigration.is_empty());
        assert!(d.excursion.is_empty());
    }

    #[test]
    fn poisson_mean_matches_intensity() {
        // ν = 2·δ₁, T = 1, bound 1 → expected 2 atoms; check the mean over
        // seeds within 3 standard errors.
        let (mech, nu) = atomic_setup();
        let grid = Grid::from_horizon(1.0, 0.1);
        let seeds = 10_000u64;
        let mut total = 0usize;
        for seed in 0..seeds {
            let d =
                sample_atoms(seed, grid, &mech, &nu, bounds(), Truncations::default()).unwrap();
            total += d.immigration.len();
        }
        let mean = total as f64 / seeds as f64;
        let se = (2.0f64 / seeds as f64).sqrt();
        assert!(
            (mean - 2.0).abs() <= 3.0 * se,
            "mean {mean} vs 2.0 (3 se = {:.4})",
            3.0 * se
        );
    }

    #[test]
    fn extension_is_superset_and_schedule_independent() {
        let (mech, nu) = atomic_setup();
        let grid = Grid::from_horizon(1.0, 0.1);
        let d = sample_atoms(11, grid, &mech, &nu, bounds(), Truncations::default()).unwrap();

        let same = d.extend(AtomKind::Immigration, d.bounds.immigration).unwrap();
        assert_eq!(same.immigration, d.immigration);

        let two_step = d
            .extend(AtomKind::Immigration, 3.0)
            .unwrap()
            .extend(AtomKind::Immigration, 9.0)
            .unwrap();
        let one_step = d.extend(AtomKind::Immigration, 9.0).unwrap();
        assert_eq!(two_step.immigration, one_step.immigration);

        // old atoms unchanged, new atoms only in the new mark range
        for a in &d.immigration {
            assert!(one_step.immigration.contains(a));
        }
        for a in &one_step.immigration {
            if !d.immigration.contains(a) {
                assert!(a.mark > d.bounds.immigration);
            }
        }
    }

    #[test]
    fn doubling_bound_doubles_expected_count() {
        let (mech, nu) = atomic_setup();
        let grid = Grid::from_horizon(1.0, 0.1);
        let seeds = 4_000u64;
        let (mut n1, mut n2) = (0usize, 0usize);
        for seed in 0..seeds {
            let d =
                sample_atoms(seed, grid, &mech, &nu, bounds(), Truncations::default()).unwrap();
            n1 += d.immigration.len();
            n2 += d.extend(AtomKind::Immigration, 2.0).unwrap().immigration.len();
        }
        let ratio = n2 as f64 / n1 as f64;
        assert!((ratio - 2.0).abs() < 0.1, "ratio {ratio}");
    }

    #[test]
    fn excursions_need_finite_slope() {
        let mech = BranchingMechanism::cir(0.0, 1.0); // diffusion ⇒ δ = ∞
        let grid = Grid::from_horizon(1.0, 0.1);
        let err = sample_atoms(
            1,
            grid,
            &mech,
            &LevyMeasure::Zero,
            LayerBounds { branching: 1.0, immigration: 1.0, excursion: 1.0 },
            Truncations::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::UnsupportedRegime(_)));
    }

    #[test]
    fn excursion_delays_live_in_horizon_and_masses_in_tail() {
        let (mech, nu) = atomic_setup();
        let grid = Grid::from_horizon(2.0, 0.1);
        for seed in 0..50 {
            let d =
                sample_atoms(seed, grid, &mech, &nu, bounds(), Truncations::default()).unwrap();
            for a in &d.excursion {
                assert!(a.delay > 0.0 && a.delay <= 2.0);
                assert!(a.mass >= d.truncations.excursion);
                assert!(a.time > 0.0 && a.time <= 2.0);
            }
        }
    }

    #[test]
    fn thinning_marks_scale_counts() {
        // atoms with mark ≤ a form a Poisson sample with intensity scaled by a
        let (mech, nu) = atomic_setup();
        let grid = Grid::from_horizon(1.0, 0.1);
        let seeds = 4_000u64;
        let mut kept = 0usize;
        for seed in 0..seeds {
            let d =
                sample_atoms(seed, grid, &mech, &nu, bounds(), Truncations::default()).unwrap();
            kept += d.immigration.iter().filter(|a| a.mark <= 0.25).count();
        }
        let mean = kept as f64 / seeds as f64;
        let expect = 2.0 * 0.25;
        let se = (expect / seeds as f64).sqrt();
        assert!((mean - expect).abs() <= 4.0 * se, "mean {mean} vs {expect}");
    }
}
