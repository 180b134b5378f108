//! Preventive-maintenance timetabling with human-in-the-loop rescheduling.
//!
//! The crate is organised around a small set of value types ([`Instance`],
//! [`Schedule`], [`Score`]) and the engines that operate on them:
//!
//! - [`scoring`]: full and incremental evaluation of the six maintenance
//!   constraints as a lexicographic `(hard, medium, soft)` score.
//! - [`heuristics`]: the configurable construction-heuristic family.
//! - [`search`]: late-acceptance / hill-climbing improvement.
//! - [`generator`]: seeded instance generator with the nine named presets.
//! - [`disruption`]: staff arrival/absence and task addition/cancellation.
//! - [`recommend`]: repair options, explained suggestions, automatic repair.
//! - [`bench`]: the heuristic-configuration benchmark harness.

pub mod bench;
pub mod disruption;
pub mod error;
pub mod generator;
pub mod grid;
pub mod heuristics;
pub mod model;
pub mod recommend;
pub mod schedule;
pub mod score;
pub mod scoring;
pub mod search;

pub use error::{Error, Result};
pub use grid::TimeGrid;
pub use heuristics::HeuristicConfig;
pub use model::{Instance, Task, Technician};
pub use schedule::{Assignment, Placement, Schedule};
pub use score::Score;
pub use scoring::ConstraintWeights;
