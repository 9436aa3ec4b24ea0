//! Marked point processes under continuous-time interventions.
//!
//! The crate simulates observed trajectories from predictable compensators,
//! couples them with their potential outcomes under interventions, builds
//! the compensator of the deviation time and the inverse probability weight
//! process, and estimates intervened means by IPW or by Monte Carlo
//! g-formula. Discrete scenarios can be solved exactly by enumeration.

pub mod cli;
pub mod compensator;
pub mod error;
pub mod estimate;
pub mod intervention;
pub mod oracle;
pub mod rng;
pub mod scenario;
pub mod simulate;
pub mod trajectory;
pub mod weights;

pub use error::{Error, Result};
pub use scenario::Scenario;
