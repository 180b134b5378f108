//! Repair options for a disturbed schedule.
//!
//! 1. full recovery: construct what is missing, then improve everything;
//! 2. manual assignment from a ranked, explained suggestion list;
//! 3. automatic assignment with a construction heuristic;
//! 4. dynamic rescheduling around pinned tasks.
//!
//! Options 2 and 3 apply while some task is unassigned, 4 once every task is
//! assigned again. Option 1 is always available.

use std::fmt;
use std::str::FromStr;
use std::sync::atomic::AtomicBool;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::heuristics::{construct, picks_early, CandidateOrder, HeuristicConfig};
use crate::schedule::{Assignment, Placement, Schedule};
use crate::score::Score;
use crate::scoring::{Breakdown, IncrementalScorer};
use crate::search::{improve_with_cancel, Improvement, SearchConfig, StepLog};

/// Suggestions returned when the caller does not ask for a count.
pub const DEFAULT_SUGGESTION_COUNT: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum RepairOption {
    FullRecovery = 1,
    ManualAssignment = 2,
    AutomaticAssignment = 3,
    DynamicRescheduling = 4,
}

impl RepairOption {
    pub fn name(self) -> &'static str {
        match self {
            RepairOption::FullRecovery => "full recovery",
            RepairOption::ManualAssignment => "manual assignment",
            RepairOption::AutomaticAssignment => "automatic assignment",
            RepairOption::DynamicRescheduling => "dynamic rescheduling",
        }
    }
}

impl From<RepairOption> for u8 {
    fn from(option: RepairOption) -> u8 {
        option as u8
    }
}

impl TryFrom<u8> for RepairOption {
    type Error = String;

    fn try_from(value: u8) -> Result<Self, String> {
        match value {
            1 => Ok(RepairOption::FullRecovery),
            2 => Ok(RepairOption::ManualAssignment),
            3 => Ok(RepairOption::AutomaticAssignment),
            4 => Ok(RepairOption::DynamicRescheduling),
            other => Err(format!("no repair option {other}")),
        }
    }
}

pub fn available_options(schedule: &Schedule) -> Vec<RepairOption> {
    if schedule.is_initialized() {
        vec![RepairOption::FullRecovery, RepairOption::DynamicRescheduling]
    } else {
        vec![
            RepairOption::FullRecovery,
            RepairOption::ManualAssignment,
            RepairOption::AutomaticAssignment,
        ]
    }
}

/// A named construction heuristic used for suggestions and automatic repair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepairProfile {
    pub name: String,
    pub heuristic: HeuristicConfig,
}

impl RepairProfile {
    pub fn quality() -> Self {
        RepairProfile {
            name: "quality".into(),
            heuristic: "EQ/ND/EN/VI".parse().expect("valid configuration"),
        }
    }

    pub fn fast() -> Self {
        RepairProfile {
            name: "fast".into(),
            heuristic: "EQ/FN/EN/VN".parse().expect("valid configuration"),
        }
    }
}

impl Default for RepairProfile {
    fn default() -> Self {
        RepairProfile::quality()
    }
}

/// Accepts `quality`, `fast` or any configuration string such as
/// `EQ/NE/ED/VD`.
impl FromStr for RepairProfile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quality" => Ok(RepairProfile::quality()),
            "fast" => Ok(RepairProfile::fast()),
            raw => Ok(RepairProfile {
                name: raw.to_string(),
                heuristic: raw.parse()?,
            }),
        }
    }
}

impl fmt::Display for RepairProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({})", self.name, self.heuristic)
    }
}

/// A candidate assignment for one unassigned task with its exact effect.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Suggestion {
    pub task: String,
    pub assignment: Assignment,
    pub delta: Score,
    pub breakdown: Breakdown,
    /// 1-based; descending delta, ties in the heuristic's iteration order.
    pub rank: usize,
    /// Whether the profile's heuristic would place the task here.
    pub heuristic_pick: bool,
    /// Revision of the schedule the suggestion was computed against.
    pub revision: u64,
}

/// Candidates of one task: `(delta, placement)` in iteration order, plus the
/// index of the candidate the heuristic picks.
fn candidates(
    scorer: &IncrementalScorer,
    order: &CandidateOrder,
    config: &HeuristicConfig,
    task: usize,
) -> (Vec<(Score, Placement)>, Option<usize>) {
    let before = scorer.score();
    let mut all = Vec::with_capacity(order.pair_count());
    let mut early = None;
    let mut best: Option<(usize, Score)> = None;
    for placement in order.pairs() {
        let delta = scorer.assign_delta(task, placement);
        let i = all.len();
        if early.is_none() && picks_early(config, before, before + delta) {
            early = Some(i);
        }
        if best.is_none_or(|(_, b)| delta > b) {
            best = Some((i, delta));
        }
        all.push((delta, placement));
    }
    (all, early.or(best.map(|(i, _)| i)))
}

/// Position of candidate `index` in the ranked list, 1-based.
fn rank_of(all: &[(Score, Placement)], index: usize) -> usize {
    let delta = all[index].0;
    1 + all
        .iter()
        .enumerate()
        .filter(|&(i, (d, _))| *d > delta || (*d == delta && i < index))
        .count()
}

/// Ranked suggestions for placing `task_id`; `k = 0` returns every pair.
pub fn suggest(schedule: &Schedule, task_id: &str, k: usize, profile: &RepairProfile) -> Result<Vec<Suggestion>> {
    let instance = schedule.instance();
    let task = instance.require_task(task_id)?;
    if schedule.placement(task).is_some() {
        return Err(Error::State(format!("task `{task_id}` is already assigned")));
    }
    let mut scorer = IncrementalScorer::new(schedule)?;
    let order = CandidateOrder::new(instance, &[task], &profile.heuristic);
    let (all, pick) = candidates(&scorer, &order, &profile.heuristic, task);

    let mut ranked: Vec<usize> = (0..all.len()).collect();
    // stable: ties stay in iteration order
    ranked.sort_by(|&a, &b| all[b].0.cmp(&all[a].0));
    if k > 0 {
        ranked.truncate(k);
    }
    Ok(ranked
        .into_iter()
        .enumerate()
        .map(|(position, i)| {
            let (delta, placement) = all[i];
            Suggestion {
                task: task_id.to_string(),
                assignment: Assignment {
                    technician: instance.technician(placement.tech).id.clone(),
                    start: placement.start,
                },
                delta,
                breakdown: scorer.explain(task, Some(placement)),
                rank: position + 1,
                heuristic_pick: pick == Some(i),
                revision: schedule.revision(),
            }
        })
        .collect())
}

/// Result of a manual assignment.
#[derive(Debug, Clone)]
pub struct Applied {
    pub schedule: Schedule,
    pub delta: Score,
    pub breakdown: Breakdown,
}

/// Assigns (or reassigns) `task_id`, failing with a staleness error when
/// `expected_revision` is not the schedule's current revision.
pub fn apply_assignment(
    schedule: &Schedule,
    task_id: &str,
    assignment: &Assignment,
    expected_revision: u64,
) -> Result<Applied> {
    if schedule.revision() != expected_revision {
        return Err(Error::Stale {
            expected: expected_revision,
            actual: schedule.revision(),
        });
    }
    let task = schedule.instance().require_task(task_id)?;
    let placement = schedule.resolve(assignment)?;
    let mut scorer = IncrementalScorer::new(schedule)?;
    let breakdown = scorer.explain(task, Some(placement));
    let delta = scorer.apply(task, Some(placement));
    let mut next = schedule.clone();
    next.assign(task, placement)?;
    next.set_cached_score(scorer.score());
    Ok(Applied {
        schedule: next,
        delta,
        breakdown,
    })
}

pub fn apply_suggestion(schedule: &Schedule, suggestion: &Suggestion) -> Result<Schedule> {
    let applied = apply_assignment(schedule, &suggestion.task, &suggestion.assignment, suggestion.revision)?;
    Ok(applied.schedule)
}

#[derive(Debug, Clone)]
pub struct AutoAssignment {
    pub schedule: Schedule,
    /// One entry per placement, in placement order.
    pub log: Vec<Suggestion>,
}

/// Places every unassigned task with the profile's heuristic.
pub fn auto_assign(schedule: &Schedule, profile: &RepairProfile) -> Result<AutoAssignment> {
    let built = construct(schedule, &profile.heuristic, None)?;
    let instance = schedule.instance();
    let order = CandidateOrder::new(instance, &[], &profile.heuristic);
    let mut scorer = IncrementalScorer::new(schedule)?;
    let mut log = Vec::with_capacity(built.trace.len());
    for record in &built.trace {
        let task = instance.require_task(&record.task)?;
        let placement = Placement::new(instance.require_technician(&record.technician)?, record.start);
        let (all, pick) = candidates(&scorer, &order, &profile.heuristic, task);
        let index = all
            .iter()
            .position(|&(_, p)| p == placement)
            .expect("placement comes from the candidate order");
        log.push(Suggestion {
            task: record.task.clone(),
            assignment: Assignment {
                technician: record.technician.clone(),
                start: record.start,
            },
            delta: all[index].0,
            breakdown: scorer.explain(task, Some(placement)),
            rank: rank_of(&all, index),
            heuristic_pick: pick == Some(index),
            revision: schedule.revision(),
        });
        scorer.apply(task, Some(placement));
    }
    Ok(AutoAssignment {
        schedule: built.schedule,
        log,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstructionSummary {
    pub placed: usize,
    pub pairs_evaluated: u64,
    pub budget_exceeded: bool,
}

#[derive(Debug, Clone)]
pub struct Recovery {
    pub schedule: Schedule,
    pub score: Score,
    pub construction: Option<ConstructionSummary>,
    pub search: Option<StepLog>,
}

/// Constructs the missing assignments with the quality profile, then runs
/// local search over the whole schedule. A time limit covers both phases.
pub fn full_recovery(schedule: &Schedule, search: &SearchConfig, cancel: &AtomicBool) -> Result<Recovery> {
    search.validate()?;
    let started = Instant::now();
    let mut current = schedule.clone();
    let mut construction = None;
    if !current.is_initialized() {
        let budget = search.time_limit_ms.map(Duration::from_millis);
        let built = construct(&current, &RepairProfile::quality().heuristic, budget)?;
        construction = Some(ConstructionSummary {
            placed: built.trace.len(),
            pairs_evaluated: built.pairs_evaluated,
            budget_exceeded: built.budget_exceeded,
        });
        current = built.schedule;
        if built.budget_exceeded {
            let score = current.score()?;
            return Ok(Recovery {
                schedule: current,
                score,
                construction,
                search: None,
            });
        }
    }
    let mut remaining = search.clone();
    if let Some(limit) = remaining.time_limit_ms {
        remaining.time_limit_ms = Some(limit.saturating_sub(started.elapsed().as_millis() as u64));
    }
    let improved = improve_with_cancel(&current, &remaining, cancel)?;
    Ok(Recovery {
        schedule: improved.schedule,
        score: improved.score,
        construction,
        search: Some(improved.log),
    })
}

/// Replaces the pin set with `pins` and improves the rest of the schedule.
pub fn dynamic_reschedule<S: AsRef<str>>(
    schedule: &Schedule,
    pins: &[S],
    search: &SearchConfig,
    cancel: &AtomicBool,
) -> Result<Improvement> {
    let mut pinned = schedule.clone();
    pinned.set_pins(pins)?;
    improve_with_cancel(&pinned, search, cancel)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::disruption::{apply_event, Event};
    use crate::generator::Preset;
    use crate::grid::TimeGrid;
    use crate::model::{Instance, Task, Technician};
    use crate::scoring::{evaluate_full, Constraint, ConstraintWeights};

    fn tiny(spec: &str) -> Schedule {
        let instance = Instance::new(
            TimeGrid::compact(10, 1).unwrap(),
            vec![Task::new("t", 2, spec)],
            vec![Technician::new("s1", "A").with_limits(10, 50)],
            vec!["A".into(), "B".into()],
            ConstraintWeights::default(),
            0,
        )
        .unwrap();
        Schedule::new(Arc::new(instance))
    }

    fn disturbed(seed: u64) -> Schedule {
        let instance = Arc::new(Preset::S1.generate(seed).unwrap());
        let built = construct(&Schedule::new(instance), &"EQ/NE/EN/VN".parse().unwrap(), None).unwrap();
        let id = built.schedule.instance().technician(0).id.clone();
        apply_event(
            &built.schedule,
            &Event::E2 {
                technician_id: id,
                effective_from: None,
            },
        )
        .unwrap()
        .0
    }

    #[test]
    fn options_follow_initialization() {
        let schedule = tiny("A");
        assert_eq!(
            available_options(&schedule),
            [
                RepairOption::FullRecovery,
                RepairOption::ManualAssignment,
                RepairOption::AutomaticAssignment
            ]
        );
        let mut done = schedule.clone();
        done.assign(0, Placement::new(0, 0)).unwrap();
        assert_eq!(
            available_options(&done),
            [RepairOption::FullRecovery, RepairOption::DynamicRescheduling]
        );
        let empty = Instance::new(
            TimeGrid::compact(10, 1).unwrap(),
            vec![],
            vec![],
            vec![],
            ConstraintWeights::default(),
            0,
        )
        .unwrap();
        assert_eq!(available_options(&Schedule::new(Arc::new(empty))).len(), 2);
        assert_eq!(serde_json::to_string(&available_options(&done)).unwrap(), "[1,4]");
    }

    #[test]
    fn tiny_suggestion_list() {
        let schedule = tiny("A");
        let all = suggest(&schedule, "t", 0, &RepairProfile::fast()).unwrap();
        assert_eq!(all.len(), 10);
        for s in &all[..9] {
            assert_eq!(s.delta, Score::ZERO);
            assert!(s.breakdown.is_empty());
        }
        assert_eq!(all[0].assignment.start, 0);
        assert_eq!(all[0].rank, 1);
        assert_eq!(all[9].assignment.start, 9);
        assert_eq!(all[9].delta, Score::of(-1, 0, 0));
        assert_eq!(all[9].breakdown.get(Constraint::OpeningHours).unwrap().delta, -1);
        // oracle: every delta from two full evaluations
        let base = evaluate_full(&schedule).unwrap().0;
        for s in &all {
            let mut after = schedule.clone();
            after.assign(0, schedule.resolve(&s.assignment).unwrap()).unwrap();
            assert_eq!(evaluate_full(&after).unwrap().0 - base, s.delta);
        }

        let top = suggest(&schedule, "t", 1, &RepairProfile::fast()).unwrap();
        assert_eq!(top, all[..1]);

        let applied = apply_suggestion(&schedule, &all[0]).unwrap();
        assert_eq!(applied.placement(0), Some(Placement::new(0, 0)));
        assert_eq!(evaluate_full(&applied).unwrap().0, Score::ZERO);
    }

    #[test]
    fn quality_profile_ranks_ties_in_reverse_slot_order() {
        let all = suggest(&tiny("A"), "t", 3, &RepairProfile::quality()).unwrap();
        let starts: Vec<u32> = all.iter().map(|s| s.assignment.start).collect();
        assert_eq!(starts, [8, 7, 6]);
    }

    #[test]
    fn wrong_specialization_is_explained_on_every_candidate() {
        let all = suggest(&tiny("B"), "t", 0, &RepairProfile::fast()).unwrap();
        for s in &all {
            let entry = s.breakdown.get(Constraint::Specialization).unwrap();
            assert_eq!(entry.delta, -1);
            assert!(entry.message.contains("does not hold"));
        }
    }

    #[test]
    fn suggest_errors() {
        let mut schedule = tiny("A");
        assert!(matches!(
            suggest(&schedule, "nope", 5, &RepairProfile::fast()),
            Err(Error::UnknownId { kind: "task", .. })
        ));
        schedule.assign(0, Placement::new(0, 0)).unwrap();
        assert!(matches!(
            suggest(&schedule, "t", 5, &RepairProfile::fast()),
            Err(Error::State(_))
        ));
    }

    #[test]
    fn stale_suggestions_are_refused() {
        let schedule = tiny("A");
        let first = suggest(&schedule, "t", 1, &RepairProfile::fast()).unwrap().remove(0);
        let mut moved = schedule.clone();
        moved.assign(0, Placement::new(0, 3)).unwrap();
        moved.unassign(0).unwrap();
        assert!(matches!(
            apply_suggestion(&moved, &first),
            Err(Error::Stale { expected: 0, actual: 2 })
        ));
    }

    #[test]
    fn single_task_auto_assign_matches_rank_one() {
        for profile in ["EQ/NE/EN/VN", "EQ/NE/ED/VD", "PO/NE/EN/VI", "fast"] {
            let profile: RepairProfile = profile.parse().unwrap();
            let schedule = tiny("A");
            let first = suggest(&schedule, "t", 1, &profile).unwrap().remove(0);
            let auto = auto_assign(&schedule, &profile).unwrap();
            assert_eq!(
                auto.schedule.placements(),
                apply_suggestion(&schedule, &first).unwrap().placements()
            );
            assert_eq!(auto.log[0].rank, 1);
            assert!(auto.log[0].heuristic_pick);
        }
    }

    #[test]
    fn heuristic_pick_marks_the_nondeteriorating_choice() {
        let schedule = disturbed(3);
        let task = schedule.unassigned_ids()[0].clone();
        let quality = RepairProfile::quality();
        let all = suggest(&schedule, &task, 0, &quality).unwrap();
        assert_eq!(all.iter().filter(|s| s.heuristic_pick).count(), 1);
        let auto = auto_assign(&schedule, &quality).unwrap();
        let picked = all.iter().find(|s| s.heuristic_pick).unwrap();
        assert_eq!(auto.log[0].assignment, picked.assignment);
        assert_eq!(auto.log[0].rank, picked.rank);
    }

    #[test]
    fn auto_assign_repairs_an_absence() {
        let schedule = disturbed(8);
        assert!(!schedule.unassigned().is_empty());
        let auto = auto_assign(&schedule, &RepairProfile::quality()).unwrap();
        assert!(auto.schedule.is_initialized());
        assert_eq!(auto.log.len(), schedule.unassigned().len());
        let (score, _) = evaluate_full(&auto.schedule).unwrap();
        assert_eq!(score.hard, 0);
        let total: Score = auto.log.iter().map(|s| s.delta).sum();
        assert_eq!(evaluate_full(&schedule).unwrap().0 + total, score);

        let noop = auto_assign(&auto.schedule, &RepairProfile::quality()).unwrap();
        assert!(noop.log.is_empty());
        assert_eq!(noop.schedule, auto.schedule);
    }

    #[test]
    fn recovery_is_never_worse_than_auto_assign() {
        let schedule = disturbed(21);
        let auto = auto_assign(&schedule, &RepairProfile::quality()).unwrap();
        let auto_score = evaluate_full(&auto.schedule).unwrap().0;
        let config = SearchConfig::step_limited(2_000, 1);
        let recovery = full_recovery(&schedule, &config, &AtomicBool::new(false)).unwrap();
        assert!(recovery.schedule.is_initialized());
        assert!(recovery.score >= auto_score);
        assert_eq!(evaluate_full(&recovery.schedule).unwrap().0, recovery.score);
        assert_eq!(recovery.construction.unwrap().placed, schedule.unassigned().len());
    }

    #[test]
    fn recovery_respects_the_time_limit() {
        let schedule = disturbed(2);
        let config = SearchConfig::time_limited(Duration::from_millis(200), 0);
        let started = Instant::now();
        full_recovery(&schedule, &config, &AtomicBool::new(false)).unwrap();
        assert!(started.elapsed() <= Duration::from_millis(220));
    }

    #[test]
    fn rescheduling_keeps_pins() {
        let schedule = disturbed(4);
        let repaired = auto_assign(&schedule, &RepairProfile::quality()).unwrap().schedule;
        let pins: Vec<String> = repaired
            .instance()
            .tasks()
            .iter()
            .step_by(3)
            .map(|t| t.id.clone())
            .collect();
        let config = SearchConfig::step_limited(1_000, 2);
        let out = dynamic_reschedule(&repaired, &pins, &config, &AtomicBool::new(false)).unwrap();
        for id in &pins {
            assert_eq!(
                out.schedule.assignment_by_id(id).unwrap(),
                repaired.assignment_by_id(id).unwrap()
            );
        }
        assert!(out.score >= evaluate_full(&repaired).unwrap().0);

        let all: Vec<String> = repaired.instance().tasks().iter().map(|t| t.id.clone()).collect();
        let frozen = dynamic_reschedule(&repaired, &all, &config, &AtomicBool::new(false)).unwrap();
        assert_eq!(frozen.schedule.placements(), repaired.placements());

        assert!(matches!(
            dynamic_reschedule(
                &schedule,
                &[schedule.unassigned_ids()[0].clone()],
                &config,
                &AtomicBool::new(false)
            ),
            Err(Error::State(_))
        ));
    }

    #[test]
    fn profiles_parse() {
        assert_eq!("quality".parse::<RepairProfile>().unwrap(), RepairProfile::quality());
        assert_eq!(
            "fast".parse::<RepairProfile>().unwrap().heuristic.to_string(),
            "EQ/FN/EN/VN"
        );
        assert!("EQ/XX/EN/VN".parse::<RepairProfile>().is_err());
    }
}
