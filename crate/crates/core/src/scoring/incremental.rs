use std::sync::Arc;

use super::{Breakdown, Constraint, ConstraintImpact, Penalties};
use crate::error::{Error, Result};
use crate::model::Instance;
use crate::schedule::{Placement, Schedule};
use crate::score::Score;

/// Per-task penalties that do not depend on any other task.
#[derive(Debug, Clone, Copy, Default)]
struct Local {
    opening_hours: i64,
    staff_unavailability: i64,
    specialization: i64,
    lateness: i64,
}

/// Incremental evaluator tied to one evolving assignment vector.
///
/// Keeps per-technician daily, weekly and total loads so that changing one
/// task costs O(1) for every constraint except workload balance, which is
/// O(technicians) on apply and O(1) for [`assign_delta`](Self::assign_delta).
#[derive(Debug, Clone)]
pub struct IncrementalScorer {
    instance: Arc<Instance>,
    placements: Vec<Option<Placement>>,
    days: usize,
    weeks: usize,
    daily: Vec<i64>,
    weekly: Vec<i64>,
    totals: Vec<i64>,
    penalties: Penalties,
    spread: Spread,
}

/// Top-two and bottom-two technician loads.
#[derive(Debug, Clone, Copy)]
struct Spread {
    max: i64,
    max_at: usize,
    second_max: i64,
    min: i64,
    min_at: usize,
    second_min: i64,
}

impl Spread {
    fn of(totals: &[i64]) -> Spread {
        let mut s = Spread {
            max: i64::MIN,
            max_at: usize::MAX,
            second_max: i64::MIN,
            min: i64::MAX,
            min_at: usize::MAX,
            second_min: i64::MAX,
        };
        for (i, &load) in totals.iter().enumerate() {
            if load > s.max {
                s.second_max = s.max;
                s.max = load;
                s.max_at = i;
            } else if load > s.second_max {
                s.second_max = load;
            }
            if load < s.min {
                s.second_min = s.min;
                s.min = load;
                s.min_at = i;
            } else if load < s.second_min {
                s.second_min = load;
            }
        }
        s
    }

    fn range(&self) -> i64 {
        if self.max_at == usize::MAX {
            0
        } else {
            self.max - self.min
        }
    }

    /// Range after technician `tech`'s load becomes `load`.
    #[inline]
    fn range_with(&self, tech: usize, load: i64) -> i64 {
        let max_other = if tech == self.max_at { self.second_max } else { self.max };
        let min_other = if tech == self.min_at { self.second_min } else { self.min };
        load.max(max_other) - load.min(min_other)
    }
}

#[inline]
fn excess(load: i64, limit: i64) -> i64 {
    (load - limit).max(0)
}

impl IncrementalScorer {
    pub fn new(schedule: &Schedule) -> Result<Self> {
        let instance = schedule.instance().clone();
        let grid = instance.grid();
        let n_tech = instance.technicians().len();
        let days = grid.horizon_days() as usize;
        let weeks = grid.weeks() as usize;
        let mut scorer = IncrementalScorer {
            placements: vec![None; instance.tasks().len()],
            daily: vec![0; n_tech * days],
            weekly: vec![0; n_tech * weeks],
            totals: vec![0; n_tech],
            penalties: Penalties::default(),
            spread: Spread::of(&vec![0; n_tech]),
            days,
            weeks,
            instance,
        };
        for (task, placement) in schedule.placements().iter().enumerate() {
            if let Some(p) = placement {
                scorer.check(*p)?;
                scorer.add(task, *p);
            }
        }
        scorer.spread = Spread::of(&scorer.totals);
        scorer.penalties.load_range = scorer.spread.range();
        Ok(scorer)
    }

    fn check(&self, p: Placement) -> Result<()> {
        if p.tech >= self.totals.len() {
            return Err(Error::Integrity(format!("technician index {} out of range", p.tech)));
        }
        if p.start >= self.instance.grid().total_slots() {
            return Err(Error::Integrity(format!("start {} outside horizon", p.start)));
        }
        Ok(())
    }

    pub fn instance(&self) -> &Arc<Instance> {
        &self.instance
    }

    pub fn placements(&self) -> &[Option<Placement>] {
        &self.placements
    }

    pub fn placement(&self, task: usize) -> Option<Placement> {
        self.placements[task]
    }

    pub fn penalties(&self) -> Penalties {
        self.penalties
    }

    pub fn score(&self) -> Score {
        self.penalties.score(self.instance.weights())
    }

    pub fn technician_load(&self, tech: usize) -> i64 {
        self.totals[tech]
    }

    #[inline]
    fn local(&self, task: usize, p: Placement) -> Local {
        let instance = &*self.instance;
        let grid = instance.grid();
        let t = instance.task(task);
        let within = grid.within_day(p.start);
        let mut local = Local::default();
        if within + t.duration_slots > grid.slots_per_day() {
            local.opening_hours = 1;
        }
        if instance.hits_unavailability(task, p.tech, p.start) {
            local.staff_unavailability = 1;
        }
        if !instance.specialization_matches(task, p.tech) {
            local.specialization = 1;
        }
        if let Some(deadline) = t.deadline {
            let last = p.start + t.duration_slots - 1;
            if last > deadline {
                local.lateness = i64::from(last - deadline);
            }
        }
        local
    }

    #[inline]
    fn cells(&self, p: Placement) -> (usize, usize) {
        let grid = self.instance.grid();
        let day = grid.day_of(p.start);
        let week = grid.week_of_day(day) as usize;
        (p.tech * self.days + day as usize, p.tech * self.weeks + week)
    }

    fn add(&mut self, task: usize, p: Placement) {
        self.shift(task, p, 1);
        self.placements[task] = Some(p);
    }

    fn remove(&mut self, task: usize, p: Placement) {
        self.shift(task, p, -1);
        self.placements[task] = None;
    }

    fn shift(&mut self, task: usize, p: Placement, sign: i64) {
        let local = self.local(task, p);
        self.penalties.opening_hours += sign * local.opening_hours;
        self.penalties.staff_unavailability += sign * local.staff_unavailability;
        self.penalties.specialization += sign * local.specialization;
        self.penalties.lateness += sign * local.lateness;

        let duration = i64::from(self.instance.task(task).duration_slots);
        let tech = self.instance.technician(p.tech);
        let (daily_limit, weekly_limit) = (i64::from(tech.daily_limit_slots), i64::from(tech.weekly_limit_slots));
        let (d, w) = self.cells(p);
        let before = excess(self.daily[d], daily_limit) + excess(self.weekly[w], weekly_limit);
        self.daily[d] += sign * duration;
        self.weekly[w] += sign * duration;
        let after = excess(self.daily[d], daily_limit) + excess(self.weekly[w], weekly_limit);
        self.penalties.workload_excess += after - before;
        self.totals[p.tech] += sign * duration;
    }

    /// Replaces the assignment of `task` and returns the score delta.
    pub fn apply(&mut self, task: usize, next: Option<Placement>) -> Score {
        let before = self.score();
        if let Some(old) = self.placements[task] {
            self.remove(task, old);
        }
        if let Some(p) = next {
            self.add(task, p);
        }
        self.spread = Spread::of(&self.totals);
        self.penalties.load_range = self.spread.range();
        self.score() - before
    }

    /// Delta of assigning the currently unassigned `task` to `p`, without
    /// mutating anything.
    #[inline]
    pub fn assign_delta(&self, task: usize, p: Placement) -> Score {
        debug_assert!(self.placements[task].is_none());
        let local = self.local(task, p);
        let duration = i64::from(self.instance.task(task).duration_slots);
        let tech = self.instance.technician(p.tech);
        let (d, w) = self.cells(p);
        let daily_limit = i64::from(tech.daily_limit_slots);
        let weekly_limit = i64::from(tech.weekly_limit_slots);
        let excess_delta = excess(self.daily[d] + duration, daily_limit) - excess(self.daily[d], daily_limit)
            + excess(self.weekly[w] + duration, weekly_limit)
            - excess(self.weekly[w], weekly_limit);
        let range_delta = self.spread.range_with(p.tech, self.totals[p.tech] + duration) - self.penalties.load_range;

        let weights = self.instance.weights();
        Score::of(
            -(weights.opening_hours * local.opening_hours + weights.staff_unavailability * local.staff_unavailability),
            -(weights.specialization * local.specialization
                + weights.deadline * local.lateness
                + weights.workload_limit * excess_delta),
            -(weights.workload_balance * range_delta),
        )
    }

    /// Delta of an arbitrary single-task change, leaving the state as found.
    pub fn peek(&mut self, task: usize, next: Option<Placement>) -> Score {
        let previous = self.placements[task];
        let delta = self.apply(task, next);
        self.apply(task, previous);
        delta
    }

    /// Per-constraint explanation of changing `task` to `next`; only
    /// constraints whose contribution changes are listed.
    pub fn explain(&mut self, task: usize, next: Option<Placement>) -> Breakdown {
        let previous = self.placements[task];
        let before = self.penalties;
        let range_before = (self.spread.max, self.spread.min);
        self.apply(task, next);
        let after = self.penalties;
        let range_after = (self.spread.max, self.spread.min);
        let local_after = next.map(|p| self.local(task, p)).unwrap_or_default();
        self.apply(task, previous);

        let instance = &*self.instance;
        let weights = instance.weights();
        let t = instance.task(task);
        let tech_name = |p: Option<Placement>| {
            p.map(|p| instance.technician(p.tech).id.clone())
                .unwrap_or_else(|| "nobody".to_string())
        };
        let mut entries = Vec::new();
        for constraint in Constraint::ALL {
            let delta = after.contribution(constraint, weights) - before.contribution(constraint, weights);
            if delta == 0 {
                continue;
            }
            let change = after.get(constraint) - before.get(constraint);
            let message = match constraint {
                Constraint::OpeningHours if change > 0 => {
                    format!("`{}` would run past closing time", t.id)
                }
                Constraint::OpeningHours => format!("`{}` no longer runs past closing time", t.id),
                Constraint::StaffUnavailability if change > 0 => {
                    format!("{} is unavailable during part of `{}`", tech_name(next), t.id)
                }
                Constraint::StaffUnavailability => {
                    format!("`{}` no longer overlaps staff unavailability", t.id)
                }
                Constraint::Specialization if change > 0 => format!(
                    "{} does not hold specialization {} required by `{}`",
                    tech_name(next),
                    t.required_specialization,
                    t.id
                ),
                Constraint::Specialization => {
                    format!("`{}` no longer assigned outside its specialization", t.id)
                }
                Constraint::Deadline if change > 0 => format!(
                    "`{}` would finish {} slot(s) after its deadline",
                    t.id, local_after.lateness
                ),
                Constraint::Deadline => {
                    format!("lateness of `{}` reduced by {} slot(s)", t.id, -change)
                }
                Constraint::WorkloadLimit if change > 0 => format!(
                    "{} would exceed workload limits by {} more slot(s)",
                    tech_name(next),
                    change
                ),
                Constraint::WorkloadLimit => {
                    format!("workload-limit excess reduced by {} slot(s)", -change)
                }
                Constraint::WorkloadBalance => format!(
                    "workload spread goes from {} to {} slot(s) (max {} → {}, min {} → {})",
                    before.load_range, after.load_range, range_before.0, range_after.0, range_before.1, range_after.1
                ),
            };
            entries.push(ConstraintImpact {
                constraint,
                level: constraint.level(),
                delta,
                message,
            });
        }
        Breakdown { entries }
    }
}
