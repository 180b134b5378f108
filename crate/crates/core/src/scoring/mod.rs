//! Constraint evaluation.
//!
//! Six constraints contribute to a three-level [`Score`]:
//!
//! | constraint           | level  | penalty unit                                  |
//! |----------------------|--------|-----------------------------------------------|
//! | opening hours        | hard   | task running past closing time                |
//! | staff unavailability | hard   | task touching an unavailable half-day block   |
//! | specialization       | medium | task on a technician of another specialization|
//! | deadline             | medium | slot of lateness                              |
//! | workload limit       | medium | slot above the daily or weekly limit          |
//! | workload balance     | soft   | slot between the most and least loaded staff  |
//!
//! [`evaluate_full`] recomputes everything from scratch and is the reference.
//! [`IncrementalScorer`] keeps load tables and answers single-task deltas.

mod full;
mod incremental;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::score::Score;

pub use full::evaluate_full;
pub use incremental::IncrementalScorer;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConstraintWeights {
    pub opening_hours: i64,
    pub staff_unavailability: i64,
    pub specialization: i64,
    pub deadline: i64,
    pub workload_limit: i64,
    pub workload_balance: i64,
}

impl Default for ConstraintWeights {
    fn default() -> Self {
        ConstraintWeights {
            opening_hours: 1,
            staff_unavailability: 1,
            specialization: 1,
            deadline: 1,
            workload_limit: 1,
            workload_balance: 1,
        }
    }
}

impl ConstraintWeights {
    pub fn validate(&self) -> Result<()> {
        for constraint in Constraint::ALL {
            if self.weight(constraint) < 1 {
                return Err(Error::validation(
                    format!("weights.{}", constraint.name()),
                    "weights must be at least 1",
                ));
            }
        }
        Ok(())
    }

    pub fn weight(&self, constraint: Constraint) -> i64 {
        match constraint {
            Constraint::OpeningHours => self.opening_hours,
            Constraint::StaffUnavailability => self.staff_unavailability,
            Constraint::Specialization => self.specialization,
            Constraint::Deadline => self.deadline,
            Constraint::WorkloadLimit => self.workload_limit,
            Constraint::WorkloadBalance => self.workload_balance,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Hard,
    Medium,
    Soft,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Constraint {
    OpeningHours,
    StaffUnavailability,
    Specialization,
    Deadline,
    WorkloadLimit,
    WorkloadBalance,
}

impl Constraint {
    pub const ALL: [Constraint; 6] = [
        Constraint::OpeningHours,
        Constraint::StaffUnavailability,
        Constraint::Specialization,
        Constraint::Deadline,
        Constraint::WorkloadLimit,
        Constraint::WorkloadBalance,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Constraint::OpeningHours => "opening_hours",
            Constraint::StaffUnavailability => "staff_unavailability",
            Constraint::Specialization => "specialization",
            Constraint::Deadline => "deadline",
            Constraint::WorkloadLimit => "workload_limit",
            Constraint::WorkloadBalance => "workload_balance",
        }
    }

    pub fn level(self) -> Level {
        match self {
            Constraint::OpeningHours | Constraint::StaffUnavailability => Level::Hard,
            Constraint::Specialization | Constraint::Deadline | Constraint::WorkloadLimit => Level::Medium,
            Constraint::WorkloadBalance => Level::Soft,
        }
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Unweighted penalty counts, one per constraint. All non-negative.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Penalties {
    pub opening_hours: i64,
    pub staff_unavailability: i64,
    pub specialization: i64,
    pub lateness: i64,
    pub workload_excess: i64,
    pub load_range: i64,
}

impl Penalties {
    pub fn get(&self, constraint: Constraint) -> i64 {
        match constraint {
            Constraint::OpeningHours => self.opening_hours,
            Constraint::StaffUnavailability => self.staff_unavailability,
            Constraint::Specialization => self.specialization,
            Constraint::Deadline => self.lateness,
            Constraint::WorkloadLimit => self.workload_excess,
            Constraint::WorkloadBalance => self.load_range,
        }
    }

    /// Weighted (negative) contribution of one constraint.
    pub fn contribution(&self, constraint: Constraint, weights: &ConstraintWeights) -> i64 {
        -weights.weight(constraint) * self.get(constraint)
    }

    pub fn score(&self, weights: &ConstraintWeights) -> Score {
        Score::of(
            -(weights.opening_hours * self.opening_hours + weights.staff_unavailability * self.staff_unavailability),
            -(weights.specialization * self.specialization
                + weights.deadline * self.lateness
                + weights.workload_limit * self.workload_excess),
            -(weights.workload_balance * self.load_range),
        )
    }
}

/// One constraint's contribution (or change in contribution) to a score.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintImpact {
    pub constraint: Constraint,
    pub level: Level,
    pub delta: i64,
    pub message: String,
}

/// Per-constraint explanation of a score or a score delta.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Breakdown {
    pub entries: Vec<ConstraintImpact>,
}

impl Breakdown {
    /// Sum of entries per level.
    pub fn total(&self) -> Score {
        self.entries
            .iter()
            .map(|e| match e.level {
                Level::Hard => Score::of(e.delta, 0, 0),
                Level::Medium => Score::of(0, e.delta, 0),
                Level::Soft => Score::of(0, 0, e.delta),
            })
            .sum()
    }

    pub fn get(&self, constraint: Constraint) -> Option<&ConstraintImpact> {
        self.entries.iter().find(|e| e.constraint == constraint)
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}
