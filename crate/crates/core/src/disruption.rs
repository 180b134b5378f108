//! Runtime disruptions: staff arrival (E1), staff absence (E2), urgent task
//! addition (E3) and task cancellation (E4).

use std::collections::{BTreeSet, HashSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Task, Technician};
use crate::schedule::{Placement, Schedule};
use crate::score::Score;
use crate::scoring::evaluate_full;

/// An unexpected event, tagged by `kind` in JSON:
/// `{"kind":"E4","task_ids":["task-0003"]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum Event {
    /// An additional technician becomes available.
    E1 { technician: Technician },
    /// A technician is absent. Without `effective_from` the technician is
    /// removed for the whole horizon; otherwise they stay on the roster and
    /// become unavailable from the half-day block containing that slot.
    E2 {
        technician_id: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        effective_from: Option<u32>,
    },
    /// Urgent tasks to add, unassigned.
    E3 { tasks: Vec<Task> },
    /// Tasks to cancel.
    E4 { task_ids: Vec<String> },
}

impl Event {
    pub fn kind(&self) -> &'static str {
        match self {
            Event::E1 { .. } => "E1",
            Event::E2 { .. } => "E2",
            Event::E3 { .. } => "E3",
            Event::E4 { .. } => "E4",
        }
    }
}

/// What an event did to the schedule.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImpactReport {
    pub kind: String,
    /// Tasks that lost their assignment.
    pub unassigned: Vec<String>,
    /// Tasks deleted from the instance.
    pub removed_tasks: Vec<String>,
    pub added_tasks: Vec<String>,
    pub added_technicians: Vec<String>,
    pub removed_technicians: Vec<String>,
    /// Pins released because their task is no longer assigned.
    pub dropped_pins: Vec<String>,
    /// Specializations left without any available technician.
    pub uncovered_specializations: Vec<String>,
    pub score_before: Score,
    pub score_after: Score,
    pub initialized: bool,
    pub revision: u64,
}

/// Applies `event` to `schedule`, returning the disturbed schedule and a
/// report. The input is left untouched.
pub fn apply_event(schedule: &Schedule, event: &Event) -> Result<(Schedule, ImpactReport)> {
    let score_before = evaluate_full(schedule)?.0;
    let instance = schedule.instance();
    let mut tasks = instance.tasks().to_vec();
    let mut technicians = instance.technicians().to_vec();
    let mut specializations = instance.specializations().to_vec();
    let mut placements = schedule.placements().to_vec();
    let mut pinned: Vec<bool> = schedule.pinned_mask().to_vec();
    let mut report = ImpactReport {
        kind: event.kind().to_string(),
        unassigned: Vec::new(),
        removed_tasks: Vec::new(),
        added_tasks: Vec::new(),
        added_technicians: Vec::new(),
        removed_technicians: Vec::new(),
        dropped_pins: Vec::new(),
        uncovered_specializations: Vec::new(),
        score_before,
        score_after: score_before,
        initialized: false,
        revision: 0,
    };

    match event {
        Event::E1 { technician } => {
            if instance.technician_index(&technician.id).is_some() {
                return Err(Error::Integrity(format!(
                    "technician `{}` already exists",
                    technician.id
                )));
            }
            add_specialization(&mut specializations, &technician.specialization);
            report.added_technicians.push(technician.id.clone());
            technicians.push(technician.clone());
        }
        Event::E2 {
            technician_id,
            effective_from,
        } => {
            let absent = instance.require_technician(technician_id)?;
            let cutoff = match effective_from {
                None => 0,
                Some(slot) => {
                    let grid = instance.grid();
                    if *slot >= grid.total_slots() {
                        return Err(Error::Range(format!("effective_from {slot} outside horizon")));
                    }
                    grid.block_slots(grid.block_of(*slot)).start
                }
            };
            for (task, placement) in placements.iter_mut().enumerate() {
                let Some(p) = *placement else { continue };
                if p.tech == absent && p.start + tasks[task].duration_slots > cutoff {
                    *placement = None;
                    report.unassigned.push(tasks[task].id.clone());
                    if std::mem::take(&mut pinned[task]) {
                        report.dropped_pins.push(tasks[task].id.clone());
                    }
                }
            }
            let spec = technicians[absent].specialization.clone();
            if effective_from.is_some() {
                let grid = instance.grid();
                let first = grid.block_of(cutoff);
                technicians[absent].unavailable_blocks.extend(first..grid.block_count());
            } else {
                technicians.remove(absent);
                for p in placements.iter_mut().flatten() {
                    if p.tech > absent {
                        *p = Placement::new(p.tech - 1, p.start);
                    }
                }
                report.removed_technicians.push(technician_id.clone());
            }
            let covered = technicians
                .iter()
                .enumerate()
                .any(|(i, t)| t.specialization == spec && (effective_from.is_none() || i != absent));
            if !covered {
                report.uncovered_specializations.push(spec);
            }
        }
        Event::E3 { tasks: new_tasks } => {
            let mut seen = HashSet::new();
            for task in new_tasks {
                if instance.task_index(&task.id).is_some() || !seen.insert(task.id.as_str()) {
                    return Err(Error::Integrity(format!("task `{}` already exists", task.id)));
                }
                add_specialization(&mut specializations, &task.required_specialization);
                report.added_tasks.push(task.id.clone());
            }
            tasks.extend(new_tasks.iter().cloned());
            placements.resize(tasks.len(), None);
            pinned.resize(tasks.len(), false);
        }
        Event::E4 { task_ids } => {
            let mut cancelled = BTreeSet::new();
            for id in task_ids {
                if !cancelled.insert(instance.require_task(id)?) {
                    return Err(Error::Integrity(format!("task `{id}` listed twice")));
                }
            }
            for &task in cancelled.iter().rev() {
                tasks.remove(task);
                placements.remove(task);
                pinned.remove(task);
            }
            report.removed_tasks = task_ids.clone();
        }
    }

    let next = Arc::new(instance.rebuild(tasks, technicians, specializations)?);
    let mut disturbed = Schedule::from_parts(next, placements, pinned, schedule.revision() + 1);
    report.score_after = disturbed.score()?;
    report.initialized = disturbed.is_initialized();
    report.revision = disturbed.revision();
    Ok((disturbed, report))
}

fn add_specialization(specializations: &mut Vec<String>, spec: &str) {
    if !specializations.iter().any(|s| s == spec) {
        specializations.push(spec.to_string());
    }
}
