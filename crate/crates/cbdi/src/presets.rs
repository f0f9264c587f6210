//! Named model presets shared by the validation suite and the CLI.

use crate::mechanisms::{
    BranchingMechanism, CbdiModel, DependentRates, ImmigrationMechanism, LevyMeasure,
};

#[derive(Debug, Clone)]
pub struct Preset {
    pub name: &'static str,
    pub summary: &'static str,
    pub model: CbdiModel,
    pub x0: f64,
}

pub fn preset_names() -> Vec<&'static str> {
    vec![
        "cir",
        "cir-subcritical",
        "cir-imm",
        "atomic",
        "atomic-imm",
        "proportional",
        "competition",
        "competition-strong",
        "exp-imm",
        "stable",
    ]
}

pub fn preset(name: &str) -> Option<Preset> {
    let atomic_mech =
        || BranchingMechanism::new(1.0, 0.0, LevyMeasure::unit_atom(1.0)).unwrap();
    let nu_half = || LevyMeasure::Atomic(vec![(1.0, 0.5)]);
    let p = match name {
        "cir" => Preset {
            name: "cir",
            summary: "pure branching diffusion (b=0, c=1)",
            model: CbdiModel::pure(BranchingMechanism::cir(0.0, 1.0)),
            x0: 1.0,
        },
        "cir-subcritical" => Preset {
            name: "cir-subcritical",
            summary: "pure branching diffusion (b=1, c=1)",
            model: CbdiModel::pure(BranchingMechanism::cir(1.0, 1.0)),
            x0: 1.0,
        },
        "cir-imm" => Preset {
            name: "cir-imm",
            summary: "branching diffusion with constant drift immigration (β=1)",
            model: CbdiModel::with_constant_immigration(
                BranchingMechanism::cir(0.0, 1.0),
                &ImmigrationMechanism::new(1.0, LevyMeasure::Zero).unwrap(),
            ),
            x0: 1.0,
        },
        "atomic" => Preset {
            name: "atomic",
            summary: "pure branching with unit jumps (b=1, m=δ₁, φ'(∞)=2)",
            model: CbdiModel::pure(atomic_mech()),
            x0: 1.0,
        },
        "atomic-imm" => Preset {
            name: "atomic-imm",
            summary: "unit-jump branching with constant immigration (β=0.3, ν=0.5δ₁)",
            model: CbdiModel::with_constant_immigration(
                atomic_mech(),
                &ImmigrationMechanism::new(0.3, nu_half()).unwrap(),
            ),
            x0: 1.0,
        },
        "proportional" => Preset {
            name: "proportional",
            summary: "state-proportional rates β(x)=0.2x, q(x,z)=x (mechanism shift)",
            model: CbdiModel {
                branching: atomic_mech(),
                immigration_jumps: nu_half(),
                rates: DependentRates::proportional(0.2, &nu_half()),
            },
            x0: 1.0,
        },
        "competition" => Preset {
            name: "competition",
            summary: "competition drift β(x)=0.6x−min(0.3x,0.2x²), q=0",
            model: CbdiModel {
                branching: atomic_mech(),
                immigration_jumps: LevyMeasure::Zero,
                rates: DependentRates::competition(0.6, 0.2),
            },
            x0: 1.0,
        },
        "competition-strong" => Preset {
            name: "competition-strong",
            summary: "competition drift β(x)=0.6x−min(0.3x,0.8x²), q=0",
            model: CbdiModel {
                branching: atomic_mech(),
                immigration_jumps: LevyMeasure::Zero,
                rates: DependentRates::competition(0.6, 0.8),
            },
            x0: 1.0,
        },
        "exp-imm" => Preset {
            name: "exp-imm",
            summary: "branching diffusion with exponential-kernel immigration jumps",
            model: CbdiModel::with_constant_immigration(
                BranchingMechanism::cir(1.0, 0.5),
                &ImmigrationMechanism::new(
                    0.4,
                    LevyMeasure::Exponential { mass: 0.8, rate: 2.0 },
                )
                .unwrap(),
            ),
            x0: 1.0,
        },
        "stable" => Preset {
            name: "stable",
            summary: "stable branching jumps (index 1.5, φ'(∞)=∞): SDE route only",
            model: CbdiModel::pure(
                BranchingMechanism::new(
                    0.5,
                    0.0,
                    LevyMeasure::Stable { scale: 0.5, index: 1.5 },
                )
                .unwrap(),
            ),
            x0: 1.0,
        },
        _ => return None,
    };
    Some(p)
}
