//! Structured run configuration: TOML schema, preset resolution, and the
//! mapping onto core model types. Unknown keys are rejected so experiment
//! records stay trustworthy.

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

use cbdi::cumulant::RatePath;
use cbdi::mechanisms::{
    BranchingMechanism, CbdiModel, DependentRates, JumpRate, LevyMeasure, Modulus, RateExpr,
    ZKernel,
};
use cbdi::path_construction::PicardConfig;
use cbdi::random_drivers::{Grid, LayerBounds, Truncations};
use cbdi::sde_engine::SchemeConfig;

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub mechanism: Option<MechanismSection>,
    #[serde(default)]
    pub immigration: Option<ImmigrationSection>,
    #[serde(default)]
    pub rates: Option<RatesSection>,
    #[serde(default)]
    pub numeric: NumericSection,
    #[serde(default)]
    pub mc: McSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    /// Named preset supplying mechanism, immigration, and rates at once;
    /// explicit sections below override its components.
    pub preset: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MechanismSection {
    #[serde(default)]
    pub drift: f64,
    #[serde(default)]
    pub diffusion: f64,
    #[serde(default)]
    pub jumps: MeasureSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImmigrationSection {
    #[serde(default)]
    pub jumps: MeasureSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "kebab-case")]
pub enum MeasureSpec {
    #[default]
    Zero,
    Atomic {
        atoms: Vec<(f64, f64)>,
    },
    Exponential {
        mass: f64,
        rate: f64,
    },
    Stable {
        scale: f64,
        index: f64,
    },
}

impl MeasureSpec {
    pub fn build(&self) -> LevyMeasure {
        match self {
            MeasureSpec::Zero => LevyMeasure::Zero,
            MeasureSpec::Atomic { atoms } => LevyMeasure::Atomic(atoms.clone()),
            MeasureSpec::Exponential { mass, rate } => {
                LevyMeasure::Exponential { mass: *mass, rate: *rate }
            }
            MeasureSpec::Stable { scale, index } => {
                LevyMeasure::Stable { scale: *scale, index: *index }
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "kebab-case")]
pub enum RatesSection {
    None,
    /// β(x) ≡ beta, q ≡ q_level.
    Constant {
        beta: f64,
        #[serde(default = "one")]
        q_level: f64,
    },
    /// β(x) = beta·x, q(x,z) = x.
    Proportional { beta: f64 },
    /// β(x) = beta·x − min(beta·x/2, gamma·x²), q ≡ 0.
    Competition { beta: f64, gamma: f64 },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NumericSection {
    pub horizon: f64,
    pub step: f64,
    pub tol: f64,
    pub branching_cutoff: f64,
    pub immigration_cutoff: f64,
    pub excursion_cutoff: f64,
    pub branching_bound: f64,
    pub immigration_bound: f64,
    pub excursion_bound: f64,
    pub max_bound: f64,
    pub picard_tol: f64,
    pub max_iter: usize,
    pub compensate_small_immigration: bool,
}

impl Default for NumericSection {
    fn default() -> Self {
        NumericSection {
            horizon: 1.0,
            step: 1e-3,
            tol: 1e-10,
            branching_cutoff: 1e-3,
            immigration_cutoff: 1e-3,
            excursion_cutoff: 1e-3,
            branching_bound: 4.0,
            immigration_bound: 2.0,
            excursion_bound: 2.0,
            max_bound: 1e6,
            picard_tol: 1e-8,
            max_iter: 50,
            compensate_small_immigration: true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McSection {
    pub replicates: usize,
    pub seed: u64,
    pub x0: f64,
}

impl Default for McSection {
    fn default() -> Self {
        McSection { replicates: 1000, seed: 42, x0: 1.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub directory: String,
    /// Cap on per-replicate path files written by `simulate`.
    pub max_path_files: usize,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { directory: "out".into(), max_path_files: 8 }
    }
}

impl RunConfig {
    pub fn from_file(path: &std::path::Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        let cfg: RunConfig = toml::from_str(&text)
            .with_context(|| format!("invalid config {}", path.display()))?;
        cfg.validate_numeric()?;
        Ok(cfg)
    }

    fn validate_numeric(&self) -> anyhow::Result<()> {
        let n = &self.numeric;
        for (name, v) in [
            ("numeric.horizon", n.horizon),
            ("numeric.step", n.step),
            ("numeric.tol", n.tol),
            ("numeric.branching_cutoff", n.branching_cutoff),
            ("numeric.immigration_cutoff", n.immigration_cutoff),
            ("numeric.excursion_cutoff", n.excursion_cutoff),
            ("numeric.branching_bound", n.branching_bound),
            ("numeric.immigration_bound", n.immigration_bound),
            ("numeric.max_bound", n.max_bound),
            ("numeric.picard_tol", n.picard_tol),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                bail!("{name} must be positive and finite, got {v}");
            }
        }
        if self.numeric.excursion_bound < 0.0 {
            bail!("numeric.excursion_bound must be nonnegative");
        }
        if self.mc.replicates == 0 {
            bail!("mc.replicates must be positive");
        }
        if !(self.mc.x0 >= 0.0) {
            bail!("mc.x0 must be nonnegative");
        }
        Ok(())
    }

    /// Resolve the configured model: a preset, optionally overridden section
    /// by section.
    pub fn resolve_model(&self) -> anyhow::Result<CbdiModel> {
        let mut model = match &self.model.preset {
            Some(name) => cbdi::presets::preset(name)
                .with_context(|| {
                    format!(
                        "unknown preset '{name}'; known presets: {}",
                        cbdi::presets::preset_names().join(", ")
                    )
                })?
                .model,
            None => {
                if self.mechanism.is_none() {
                    bail!("either model.preset or an explicit [mechanism] section is required");
                }
                CbdiModel::pure(BranchingMechanism::cir(0.0, 1.0))
            }
        };
        if let Some(m) = &self.mechanism {
            model.branching = BranchingMechanism::new(m.drift, m.diffusion, m.jumps.build())?;
        }
        if let Some(imm) = &self.immigration {
            let nu = imm.jumps.build();
            nu.validate(cbdi::mechanisms::MeasureRole::Immigration)?;
            model.immigration_jumps = nu;
        }
        if let Some(r) = &self.rates {
            model.rates = match r {
                RatesSection::None => DependentRates::none(),
                RatesSection::Constant { beta, q_level } => {
                    let mut rates =
                        DependentRates::constant(*beta, *q_level, &model.immigration_jumps);
                    if !(*beta >= 0.0) || !(*q_level >= 0.0) {
                        bail!("constant rates must be nonnegative");
                    }
                    // keep the declared growth constant in sync with ν
                    rates.growth_constant = beta
                        + q_level
                            * model
                                .immigration_jumps
                                .weighted_first_moment(&ZKernel::One, 0.0, f64::INFINITY)
                                .min(1e12);
                    rates
                }
                RatesSection::Proportional { beta } => {
                    DependentRates::proportional(*beta, &model.immigration_jumps)
                }
                RatesSection::Competition { beta, gamma } => {
                    DependentRates::competition(*beta, *gamma)
                }
            };
        }
        Ok(model)
    }

    pub fn grid(&self) -> Grid {
        Grid::from_horizon(self.numeric.horizon, self.numeric.step)
    }

    pub fn truncations(&self) -> Truncations {
        Truncations {
            branching: self.numeric.branching_cutoff,
            immigration: self.numeric.immigration_cutoff,
            excursion: self.numeric.excursion_cutoff,
        }
    }

    pub fn bounds(&self) -> LayerBounds {
        LayerBounds {
            branching: self.numeric.branching_bound,
            immigration: self.numeric.immigration_bound,
            excursion: self.numeric.excursion_bound,
        }
    }

    pub fn scheme(&self) -> SchemeConfig {
        SchemeConfig {
            compensate_small_immigration: self.numeric.compensate_small_immigration,
            max_bound: self.numeric.max_bound,
        }
    }

    pub fn picard(&self) -> PicardConfig {
        PicardConfig {
            tol: self.numeric.picard_tol,
            max_iter: self.numeric.max_iter,
            initial_level: 64.0,
            max_level: self.numeric.max_bound,
        }
    }

    pub fn render(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}

/// A deterministic rate path for the inhomogeneous constructions, selectable
/// from the CLI.
pub fn parse_rate_path(spec: &str) -> anyhow::Result<RatePath> {
    // "0.7" | "step:0.5@0.5,1.5" (values 0.5 then 1.5, cut at 0.5)
    if let Ok(c) = spec.parse::<f64>() {
        return Ok(RatePath::Constant(c));
    }
    if let Some(rest) = spec.strip_prefix("step:") {
        let parts: Vec<&str> = rest.split('@').collect();
        if parts.len() == 2 {
            let values: Vec<f64> = parts[0]
                .split(',')
                .map(|v| v.parse::<f64>())
                .collect::<std::result::Result<_, _>>()?;
            let cuts: Vec<f64> = parts[1]
                .split(',')
                .map(|v| v.parse::<f64>())
                .collect::<std::result::Result<_, _>>()?;
            if values.len() == cuts.len() + 1 {
                return Ok(RatePath::Step { cuts, values });
            }
        }
    }
    bail!("cannot parse rate path '{spec}' (want a number or step:v0,v1,...@c1,...)")
}

/// Rate presets for `compare`: name → dependent rates.
pub fn rates_preset(name: &str, nu: &LevyMeasure) -> anyhow::Result<DependentRates> {
    let r = match name {
        "none" => DependentRates::none(),
        "constant-low" => DependentRates::constant(0.2, 1.0, nu),
        "constant-high" => DependentRates::constant(0.8, 1.0, nu),
        "proportional-low" => DependentRates::proportional(0.1, nu),
        "proportional-high" => DependentRates::proportional(0.25, nu),
        "competition-strong" => DependentRates::competition(0.6, 0.8),
        "competition-weak" => DependentRates::competition(0.6, 0.2),
        other => bail!(
            "unknown rates preset '{other}'; known: none, constant-low, constant-high, \
             proportional-low, proportional-high, competition-strong, competition-weak"
        ),
    };
    Ok(r)
}

/// Expose the rate-expression types so integration tests can build custom
/// configurations programmatically.
pub fn custom_rates(beta: RateExpr, q: JumpRate, growth: f64, modulus: Modulus) -> DependentRates {
    DependentRates { beta, q, growth_constant: growth, modulus }
}
