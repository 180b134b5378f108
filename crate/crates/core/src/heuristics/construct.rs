use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{CandidateOrder, HeuristicConfig, PickEarly, ScoreBehaviour, Strategy};
use crate::error::{Error, Result};
use crate::schedule::{Placement, Schedule};
use crate::score::Score;
use crate::scoring::IncrementalScorer;

/// How often (in evaluated pairs) the wall-clock budget is checked.
const BUDGET_CHECK_INTERVAL: u64 = 1024;

/// One construction step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlacementRecord {
    pub task: String,
    pub pairs_evaluated: u64,
    pub technician: String,
    pub start: u32,
    pub score_after: Score,
    /// Set when an early-pick rule was active but no candidate qualified, so
    /// the best candidate seen was taken instead.
    pub fallback: bool,
}

#[derive(Debug, Clone)]
pub struct Construction {
    pub schedule: Schedule,
    pub trace: Vec<PlacementRecord>,
    pub pairs_evaluated: u64,
    pub budget_exceeded: bool,
}

/// Assigns every unassigned task of `schedule` using `config`.
///
/// Pinned and already-assigned tasks are left alone. When `budget` runs out
/// the partially constructed schedule is returned with `budget_exceeded`.
pub fn construct(schedule: &Schedule, config: &HeuristicConfig, budget: Option<Duration>) -> Result<Construction> {
    let unassigned = schedule.unassigned();
    let instance = schedule.instance().clone();
    if !unassigned.is_empty() && instance.technicians().is_empty() {
        return Err(Error::State("no technicians to assign tasks to".into()));
    }
    let order = CandidateOrder::new(&instance, &unassigned, config);
    let mut run = Run {
        scorer: IncrementalScorer::new(schedule)?,
        config: *config,
        order: &order,
        deadline: budget.map(|b| Instant::now() + b),
        evaluated: 0,
        exhausted: false,
        trace: Vec::new(),
    };
    match config.strategy {
        Strategy::Queue => run.queue(),
        Strategy::Pool => run.pool(),
    }

    let Run {
        scorer,
        trace,
        evaluated,
        exhausted,
        ..
    } = run;
    let mut out = schedule.clone();
    if !trace.is_empty() {
        out.replace_placements(scorer.placements().to_vec());
        out.set_cached_score(scorer.score());
    }
    Ok(Construction {
        schedule: out,
        trace,
        pairs_evaluated: evaluated,
        budget_exceeded: exhausted,
    })
}

struct Run<'a> {
    scorer: IncrementalScorer,
    config: HeuristicConfig,
    order: &'a CandidateOrder,
    deadline: Option<Instant>,
    evaluated: u64,
    exhausted: bool,
    trace: Vec<PlacementRecord>,
}

/// Outcome of scanning candidates for one placement.
struct Selection {
    task: usize,
    placement: Placement,
    score: Score,
    fallback: bool,
}

/// Whether `config` stops scanning at `candidate`, given the score before
/// the placement.
#[inline]
pub(crate) fn picks_early(config: &HeuristicConfig, before: Score, candidate: Score) -> bool {
    if config.score_behaviour == ScoreBehaviour::OnlyDown && candidate >= before {
        return true;
    }
    match config.pick_early {
        PickEarly::Never => false,
        PickEarly::FirstNonDeteriorating => candidate >= before,
        PickEarly::FirstFeasible => candidate.hard >= 0,
        PickEarly::FirstFeasibleOrNonDeterioratingHard => candidate.hard >= 0 || candidate.hard >= before.hard,
    }
}

/// Tracks the best candidate seen and decides early picks.
struct Picker {
    config: HeuristicConfig,
    before: Score,
    best: Option<(usize, Placement, Score)>,
}

impl Picker {
    fn new(config: HeuristicConfig, before: Score) -> Self {
        Picker {
            config,
            before,
            best: None,
        }
    }

    #[inline]
    fn picks_early(&self, candidate: Score) -> bool {
        picks_early(&self.config, self.before, candidate)
    }

    /// Returns a selection when `candidate` is picked early.
    #[inline]
    fn offer(&mut self, task: usize, placement: Placement, candidate: Score) -> Option<Selection> {
        if self.picks_early(candidate) {
            return Some(Selection {
                task,
                placement,
                score: candidate,
                fallback: false,
            });
        }
        if self.best.is_none_or(|(_, _, best)| candidate > best) {
            self.best = Some((task, placement, candidate));
        }
        None
    }

    fn finish(self) -> Option<Selection> {
        let early_rule =
            self.config.pick_early != PickEarly::Never || self.config.score_behaviour == ScoreBehaviour::OnlyDown;
        self.best.map(|(task, placement, score)| Selection {
            task,
            placement,
            score,
            fallback: early_rule,
        })
    }
}

impl Run<'_> {
    #[inline]
    fn tick(&mut self) -> bool {
        self.evaluated += 1;
        if self.evaluated.is_multiple_of(BUDGET_CHECK_INTERVAL) {
            if let Some(deadline) = self.deadline {
                if Instant::now() >= deadline {
                    self.exhausted = true;
                }
            }
        }
        self.exhausted
    }

    /// Scans the pairs of `task` into `picker`; returns an early selection or
    /// `None` when the scan completed (or the budget ran out).
    fn scan(&mut self, task: usize, picker: &mut Picker) -> Option<Selection> {
        let before = picker.before;
        for &tech in &self.order.technicians {
            for &start in &self.order.slots {
                let placement = Placement::new(tech, start);
                let candidate = before + self.scorer.assign_delta(task, placement);
                if let Some(selection) = picker.offer(task, placement, candidate) {
                    self.evaluated += 1;
                    return Some(selection);
                }
                if self.tick() {
                    return None;
                }
            }
        }
        None
    }

    fn place(&mut self, selection: Selection, pairs: u64) {
        self.scorer.apply(selection.task, Some(selection.placement));
        debug_assert_eq!(self.scorer.score(), selection.score);
        let instance = self.scorer.instance();
        self.trace.push(PlacementRecord {
            task: instance.task(selection.task).id.clone(),
            pairs_evaluated: pairs,
            technician: instance.technician(selection.placement.tech).id.clone(),
            start: selection.placement.start,
            score_after: selection.score,
            fallback: selection.fallback,
        });
    }

    fn queue(&mut self) {
        for &task in &self.order.entities {
            let start_count = self.evaluated;
            let mut picker = Picker::new(self.config, self.scorer.score());
            let selection = match self.scan(task, &mut picker) {
                Some(early) => early,
                None if self.exhausted => return,
                None => match picker.finish() {
                    Some(best) => best,
                    None => return,
                },
            };
            self.place(selection, self.evaluated - start_count);
        }
    }

    fn pool(&mut self) {
        let mut remaining = self.order.entities.clone();
        while !remaining.is_empty() {
            let start_count = self.evaluated;
            let mut picker = Picker::new(self.config, self.scorer.score());
            let mut early = None;
            for &task in &remaining {
                early = self.scan(task, &mut picker);
                if early.is_some() || self.exhausted {
                    break;
                }
            }
            if self.exhausted && early.is_none() {
                return;
            }
            let Some(selection) = early.or_else(|| picker.finish()) else {
                return;
            };
            remaining.retain(|&t| t != selection.task);
            self.place(selection, self.evaluated - start_count);
        }
    }
}
