//! Sample-path simulation of continuous-state branching processes with
//! dependent immigration, built two independent ways and validated against
//! the analytic transform, moment, martingale, and comparison structure of
//! the model.
//!
//! The two construction routes:
//! - [`sde_engine`]: an Euler scheme for the jump SDE driven by compensated
//!   branching noise and thinned immigration noise;
//! - [`path_construction`]: a Poisson field of immigrant trajectories over
//!   the entrance rule of the branching semigroup, solved by Picard
//!   iteration on frozen noise.
//!
//! [`cumulant`] supplies the analytic oracles, [`random_drivers`] the
//! reproducible noise, and [`validation`] the statistical acceptance
//! battery that ties the routes together.

pub mod cumulant;
pub mod error;
pub mod mechanisms;
pub mod numeric;
pub mod path_construction;
pub mod presets;
pub mod random_drivers;
pub mod sde_engine;
pub mod stats;
pub mod validation;

pub use error::{Error, Result};
