//! Construction heuristics.
//!
//! A heuristic is described by five parameters, written in their usual
//! abbreviated form `STRATEGY/PICK/ENTITYSORT/VALUESORT`, optionally suffixed
//! with `+OD` for the only-down score behaviour:
//!
//! - strategy: `PO` (all entity-value combinations in a pool) or `EQ`
//!   (entities in a queue);
//! - pick-early type: `NE` never, `ND` first non-deteriorating score, `FF`
//!   first feasible score, `FN` first feasible or non-deteriorating hard;
//! - entity sort: `EN` input order or `ED` decreasing difficulty;
//! - value sort: `VN` input order, `VI` increasing or `VD` decreasing strength.

mod construct;
mod order;

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::model::{Task, Technician};

pub(crate) use construct::picks_early;
pub use construct::{construct, Construction, PlacementRecord};
pub use order::CandidateOrder;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strategy {
    /// `PO`
    Pool,
    /// `EQ`
    Queue,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScoreBehaviour {
    /// `AN`: initializing a variable may change the score in any direction.
    Any,
    /// `OD`: initializing a variable can only worsen the score, so a
    /// non-deteriorating candidate is a best candidate.
    OnlyDown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PickEarly {
    /// `NE`
    Never,
    /// `ND`
    FirstNonDeteriorating,
    /// `FF`
    FirstFeasible,
    /// `FN`
    FirstFeasibleOrNonDeterioratingHard,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EntitySort {
    /// `EN`
    None,
    /// `ED`
    DecreasingDifficulty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ValueSort {
    /// `VN`
    None,
    /// `VI`: weakest values first.
    IncreasingStrength,
    /// `VD`: strongest values first.
    DecreasingStrength,
}

macro_rules! codes {
    ($ty:ty { $($variant:ident => $code:literal),+ $(,)? }) => {
        impl $ty {
            pub fn code(self) -> &'static str {
                match self { $(Self::$variant => $code),+ }
            }

            fn from_code(code: &str) -> Option<Self> {
                match code { $($code => Some(Self::$variant),)+ _ => None }
            }
        }
    };
}

codes!(Strategy { Pool => "PO", Queue => "EQ" });
codes!(ScoreBehaviour { Any => "AN", OnlyDown => "OD" });
codes!(PickEarly {
    Never => "NE",
    FirstNonDeteriorating => "ND",
    FirstFeasible => "FF",
    FirstFeasibleOrNonDeterioratingHard => "FN",
});
codes!(EntitySort { None => "EN", DecreasingDifficulty => "ED" });
codes!(ValueSort { None => "VN", IncreasingStrength => "VI", DecreasingStrength => "VD" });

/// One point of the construction-heuristic parameter space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct HeuristicConfig {
    pub strategy: Strategy,
    pub score_behaviour: ScoreBehaviour,
    pub pick_early: PickEarly,
    pub entity_sort: EntitySort,
    pub value_sort: ValueSort,
}

impl HeuristicConfig {
    /// Builds a configuration; without an explicit pick-early type the
    /// behaviour's default is used (`NE` for `AN`, `ND` for `OD`).
    pub fn new(
        strategy: Strategy,
        score_behaviour: ScoreBehaviour,
        pick_early: Option<PickEarly>,
        entity_sort: EntitySort,
        value_sort: ValueSort,
    ) -> Self {
        let pick_early = pick_early.unwrap_or(match score_behaviour {
            ScoreBehaviour::Any => PickEarly::Never,
            ScoreBehaviour::OnlyDown => PickEarly::FirstNonDeteriorating,
        });
        HeuristicConfig {
            strategy,
            score_behaviour,
            pick_early,
            entity_sort,
            value_sort,
        }
    }

    /// `AN` configuration.
    pub fn any(strategy: Strategy, pick_early: PickEarly, entity_sort: EntitySort, value_sort: ValueSort) -> Self {
        HeuristicConfig::new(strategy, ScoreBehaviour::Any, Some(pick_early), entity_sort, value_sort)
    }
}

impl Default for HeuristicConfig {
    fn default() -> Self {
        HeuristicConfig::new(
            Strategy::Queue,
            ScoreBehaviour::Any,
            None,
            EntitySort::None,
            ValueSort::None,
        )
    }
}

impl fmt::Display for HeuristicConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}/{}/{}/{}",
            self.strategy.code(),
            self.pick_early.code(),
            self.entity_sort.code(),
            self.value_sort.code()
        )?;
        if self.score_behaviour == ScoreBehaviour::OnlyDown {
            f.write_str("+OD")?;
        }
        Ok(())
    }
}

impl FromStr for HeuristicConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |msg: &str| Error::Parameter(format!("heuristic `{s}`: {msg}"));
        let (body, behaviour) = match s.trim().split_once('+') {
            Some((body, suffix)) => (
                body,
                ScoreBehaviour::from_code(suffix).ok_or_else(|| bad("unknown score behaviour"))?,
            ),
            None => (s.trim(), ScoreBehaviour::Any),
        };
        let parts: Vec<&str> = body.split('/').collect();
        let [strategy, pick, entity, value] = parts.as_slice() else {
            return Err(bad("expected STRATEGY/PICK/ENTITYSORT/VALUESORT"));
        };
        if *strategy == "VQ" {
            return Err(bad("VQ cannot order two planning variables"));
        }
        Ok(HeuristicConfig {
            strategy: Strategy::from_code(strategy).ok_or_else(|| bad("unknown strategy"))?,
            score_behaviour: behaviour,
            pick_early: PickEarly::from_code(pick).ok_or_else(|| bad("unknown pick-early type"))?,
            entity_sort: EntitySort::from_code(entity).ok_or_else(|| bad("unknown entity sort"))?,
            value_sort: ValueSort::from_code(value).ok_or_else(|| bad("unknown value sort"))?,
        })
    }
}

impl Serialize for HeuristicConfig {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for HeuristicConfig {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        raw.parse().map_err(serde::de::Error::custom)
    }
}

/// `Greater` when `a` is more difficult to place than `b`: longer first,
/// then earlier deadline, with deadline-free tasks last.
pub fn compare_difficulty(a: &Task, b: &Task) -> Ordering {
    a.duration_slots
        .cmp(&b.duration_slots)
        .then_with(|| match (a.deadline, b.deadline) {
            (Some(x), Some(y)) => y.cmp(&x),
            (Some(_), None) => Ordering::Greater,
            (None, Some(_)) => Ordering::Less,
            (None, None) => Ordering::Equal,
        })
}

/// `Greater` when `a` is the stronger technician: fewer unavailable blocks.
pub fn compare_technician_strength(a: &Technician, b: &Technician) -> Ordering {
    b.unavailable_blocks.len().cmp(&a.unavailable_blocks.len())
}

/// `Greater` when slot `a` is stronger: earlier in its day, then earlier day.
pub fn compare_slot_strength(grid: &TimeGrid, a: u32, b: u32) -> Ordering {
    let key = |g: u32| (grid.within_day(g), grid.day_of(g));
    key(b).cmp(&key(a))
}
