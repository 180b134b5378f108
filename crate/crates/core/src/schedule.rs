//! Assignment state over an [`Instance`].

use std::sync::Arc;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Instance;
use crate::score::Score;
use crate::scoring;

/// Index-based assignment used by the engines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Placement {
    pub tech: usize,
    pub start: u32,
}

impl Placement {
    pub const fn new(tech: usize, start: u32) -> Self {
        Placement { tech, start }
    }
}

/// Id-based assignment, the interchange form of [`Placement`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub technician: String,
    pub start: u32,
}

/// Per-task assignments, pins and a revision counter.
///
/// The revision increases on every mutation and lets callers detect that a
/// suggestion or snapshot was computed against an older state.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "ScheduleData", into = "ScheduleData")]
pub struct Schedule {
    instance: Arc<Instance>,
    placements: Vec<Option<Placement>>,
    pinned: Vec<bool>,
    revision: u64,
    cached_score: Option<Score>,
}

#[derive(Serialize, Deserialize)]
struct ScheduleData {
    instance: Instance,
    assignments: IndexMap<String, Option<Assignment>>,
    #[serde(default)]
    pins: Vec<String>,
    #[serde(default)]
    cached_score: Option<Score>,
    #[serde(default)]
    revision: u64,
}

impl PartialEq for Schedule {
    fn eq(&self, other: &Self) -> bool {
        self.instance == other.instance
            && self.placements == other.placements
            && self.pinned == other.pinned
            && self.revision == other.revision
            && self.cached_score == other.cached_score
    }
}

impl From<Schedule> for ScheduleData {
    fn from(schedule: Schedule) -> Self {
        let assignments = (0..schedule.placements.len())
            .map(|i| (schedule.instance.task(i).id.clone(), schedule.assignment(i)))
            .collect();
        ScheduleData {
            pins: schedule.pinned_ids(),
            assignments,
            cached_score: schedule.cached_score,
            revision: schedule.revision,
            instance: Arc::unwrap_or_clone(schedule.instance),
        }
    }
}

impl TryFrom<ScheduleData> for Schedule {
    type Error = Error;

    fn try_from(data: ScheduleData) -> Result<Self> {
        let mut schedule = Schedule::new(Arc::new(data.instance));
        for (task_id, assignment) in &data.assignments {
            let task = schedule.instance.require_task(task_id)?;
            if let Some(assignment) = assignment {
                let placement = schedule.resolve(assignment)?;
                schedule.placements[task] = Some(placement);
            }
        }
        for id in &data.pins {
            let task = schedule.instance.require_task(id)?;
            schedule.pin(task)?;
        }
        if let Some(cached) = data.cached_score {
            let actual = scoring::evaluate_full(&schedule)?.0;
            if actual != cached {
                return Err(Error::validation(
                    "cached_score",
                    format!("stored {cached} but schedule evaluates to {actual}"),
                ));
            }
        }
        schedule.cached_score = data.cached_score;
        schedule.revision = data.revision;
        Ok(schedule)
    }
}

impl Schedule {
    /// Empty schedule: every task unassigned.
    pub fn new(instance: Arc<Instance>) -> Self {
        let n = instance.tasks().len();
        Schedule {
            instance,
            placements: vec![None; n],
            pinned: vec![false; n],
            revision: 0,
            cached_score: None,
        }
    }

    pub(crate) fn from_parts(
        instance: Arc<Instance>,
        placements: Vec<Option<Placement>>,
        pinned: Vec<bool>,
        revision: u64,
    ) -> Self {
        debug_assert_eq!(placements.len(), instance.tasks().len());
        debug_assert_eq!(pinned.len(), instance.tasks().len());
        Schedule {
            instance,
            placements,
            pinned,
            revision,
            cached_score: None,
        }
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

    pub fn assignment(&self, task: usize) -> Option<Assignment> {
        self.placements[task].map(|p| Assignment {
            technician: self.instance.technician(p.tech).id.clone(),
            start: p.start,
        })
    }

    pub fn assignment_by_id(&self, task_id: &str) -> Result<Option<Assignment>> {
        Ok(self.assignment(self.instance.require_task(task_id)?))
    }

    /// Converts an id-based assignment to a placement, checking both the
    /// technician and the start slot.
    pub fn resolve(&self, assignment: &Assignment) -> Result<Placement> {
        let tech = self.instance.require_technician(&assignment.technician)?;
        let total = self.instance.grid().total_slots();
        if assignment.start >= total {
            return Err(Error::Range(format!(
                "start {} outside horizon of {total} slots",
                assignment.start
            )));
        }
        Ok(Placement::new(tech, assignment.start))
    }

    /// True when every task has an assignment (vacuously true without tasks).
    pub fn is_initialized(&self) -> bool {
        self.placements.iter().all(Option::is_some)
    }

    pub fn unassigned(&self) -> Vec<usize> {
        (0..self.placements.len())
            .filter(|&i| self.placements[i].is_none())
            .collect()
    }

    pub fn unassigned_ids(&self) -> Vec<String> {
        self.unassigned()
            .into_iter()
            .map(|i| self.instance.task(i).id.clone())
            .collect()
    }

    pub fn is_pinned(&self, task: usize) -> bool {
        self.pinned[task]
    }

    pub fn pinned_ids(&self) -> Vec<String> {
        (0..self.pinned.len())
            .filter(|&i| self.pinned[i])
            .map(|i| self.instance.task(i).id.clone())
            .collect()
    }

    pub fn revision(&self) -> u64 {
        self.revision
    }

    pub fn cached_score(&self) -> Option<Score> {
        self.cached_score
    }

    pub(crate) fn set_cached_score(&mut self, score: Score) {
        self.cached_score = Some(score);
    }

    pub(crate) fn bump_revision(&mut self) {
        self.revision += 1;
        self.cached_score = None;
    }

    /// Sets or clears the assignment of `task`, refusing pinned tasks.
    pub fn set(&mut self, task: usize, placement: Option<Placement>) -> Result<()> {
        if task >= self.placements.len() {
            return Err(Error::Integrity(format!("task index {task} out of range")));
        }
        if self.pinned[task] {
            return Err(Error::PinViolation(self.instance.task(task).id.clone()));
        }
        if let Some(p) = placement {
            if p.tech >= self.instance.technicians().len() {
                return Err(Error::Integrity(format!("technician index {} out of range", p.tech)));
            }
            if p.start >= self.instance.grid().total_slots() {
                return Err(Error::Range(format!("start {} outside horizon", p.start)));
            }
        }
        self.placements[task] = placement;
        self.bump_revision();
        Ok(())
    }

    pub fn assign(&mut self, task: usize, placement: Placement) -> Result<()> {
        self.set(task, Some(placement))
    }

    pub fn unassign(&mut self, task: usize) -> Result<()> {
        self.set(task, None)
    }

    /// Writes placements found by an engine that already checked pins.
    pub(crate) fn replace_placements(&mut self, placements: Vec<Option<Placement>>) {
        debug_assert!(self
            .pinned
            .iter()
            .zip(placements.iter().zip(&self.placements))
            .all(|(&pinned, (new, old))| !pinned || new == old));
        self.placements = placements;
        self.bump_revision();
    }

    pub fn pin(&mut self, task: usize) -> Result<()> {
        if self.placements[task].is_none() {
            return Err(Error::State(format!(
                "cannot pin unassigned task `{}`",
                self.instance.task(task).id
            )));
        }
        if !self.pinned[task] {
            self.pinned[task] = true;
            self.revision += 1;
        }
        Ok(())
    }

    pub fn unpin(&mut self, task: usize) {
        if self.pinned[task] {
            self.pinned[task] = false;
            self.revision += 1;
        }
    }

    /// Replaces the whole pin set; every id must reference an assigned task.
    pub fn set_pins<S: AsRef<str>>(&mut self, task_ids: &[S]) -> Result<()> {
        let mut pinned = vec![false; self.pinned.len()];
        for id in task_ids {
            let task = self.instance.require_task(id.as_ref())?;
            if self.placements[task].is_none() {
                return Err(Error::State(format!("cannot pin unassigned task `{}`", id.as_ref())));
            }
            pinned[task] = true;
        }
        if pinned != self.pinned {
            self.pinned = pinned;
            self.revision += 1;
        }
        Ok(())
    }

    pub(crate) fn pinned_mask(&self) -> &[bool] {
        &self.pinned
    }

    /// Score by full evaluation, caching the result.
    pub fn score(&mut self) -> Result<Score> {
        if let Some(score) = self.cached_score {
            return Ok(score);
        }
        let score = scoring::evaluate_full(self)?.0;
        self.cached_score = Some(score);
        Ok(score)
    }
}
