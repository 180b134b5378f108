use std::collections::BTreeMap;

use super::{Breakdown, Constraint, ConstraintImpact, Penalties};
use crate::error::{Error, Result};
use crate::schedule::Schedule;
use crate::score::Score;

/// Scores a schedule from scratch. Unassigned tasks contribute nothing.
///
/// Shares none of the lookup tables of
/// [`IncrementalScorer`](super::IncrementalScorer); the two check each other.
pub fn evaluate_full(schedule: &Schedule) -> Result<(Score, Breakdown)> {
    let instance = schedule.instance();
    let grid = instance.grid();
    let per_day = grid.slots_per_day();

    let mut penalties = Penalties::default();
    let mut overflowing = Vec::new();
    let mut unavailable = Vec::new();
    let mut mismatched = Vec::new();
    let mut late = Vec::new();
    let mut daily: BTreeMap<(usize, u32), i64> = BTreeMap::new();
    let mut weekly: BTreeMap<(usize, u32), i64> = BTreeMap::new();
    let mut totals = vec![0i64; instance.technicians().len()];

    for (task_index, placement) in schedule.placements().iter().enumerate() {
        let Some(placement) = placement else { continue };
        let task = instance.task(task_index);
        let tech = instance.technicians().get(placement.tech).ok_or_else(|| {
            Error::Integrity(format!(
                "task `{}` references missing technician #{}",
                task.id, placement.tech
            ))
        })?;
        if placement.start >= grid.total_slots() {
            return Err(Error::Integrity(format!(
                "task `{}` starts outside the horizon",
                task.id
            )));
        }
        let day = placement.start / per_day;
        let within = placement.start % per_day;
        let duration = task.duration_slots;

        if within + duration > per_day {
            penalties.opening_hours += 1;
            overflowing.push(task.id.as_str());
        }

        let day_end = (day + 1) * per_day;
        let touches_unavailable = (placement.start..(placement.start + duration).min(day_end))
            .any(|slot| tech.unavailable_blocks.contains(&grid.block_of(slot)));
        if touches_unavailable {
            penalties.staff_unavailability += 1;
            unavailable.push(task.id.as_str());
        }

        if tech.specialization != task.required_specialization {
            penalties.specialization += 1;
            mismatched.push(task.id.as_str());
        }

        if let Some(deadline) = task.deadline {
            let last_slot = placement.start + duration - 1;
            if last_slot > deadline {
                penalties.lateness += i64::from(last_slot - deadline);
                late.push(task.id.as_str());
            }
        }

        *daily.entry((placement.tech, day)).or_default() += i64::from(duration);
        *weekly.entry((placement.tech, grid.week_of_day(day))).or_default() += i64::from(duration);
        totals[placement.tech] += i64::from(duration);
    }

    let mut over_limit = Vec::new();
    for (&(tech, day), &load) in &daily {
        let limit = i64::from(instance.technician(tech).daily_limit_slots);
        if load > limit {
            penalties.workload_excess += load - limit;
            over_limit.push(format!("{} day {day}", instance.technician(tech).id));
        }
    }
    for (&(tech, week), &load) in &weekly {
        let limit = i64::from(instance.technician(tech).weekly_limit_slots);
        if load > limit {
            penalties.workload_excess += load - limit;
            over_limit.push(format!("{} week {week}", instance.technician(tech).id));
        }
    }

    let max = totals.iter().copied().max().unwrap_or(0);
    let min = totals.iter().copied().min().unwrap_or(0);
    penalties.load_range = max - min;

    let weights = instance.weights();
    let messages = [
        format!(
            "{} task(s) run past closing time: {}",
            overflowing.len(),
            overflowing.join(", ")
        ),
        format!(
            "{} task(s) overlap staff unavailability: {}",
            unavailable.len(),
            unavailable.join(", ")
        ),
        format!(
            "{} task(s) on a technician of another specialization: {}",
            mismatched.len(),
            mismatched.join(", ")
        ),
        format!(
            "{} slot(s) of lateness over {} task(s): {}",
            penalties.lateness,
            late.len(),
            late.join(", ")
        ),
        format!(
            "{} slot(s) above workload limits: {}",
            penalties.workload_excess,
            over_limit.join(", ")
        ),
        format!("workload spread of {max} - {min} = {} slot(s) between staff", max - min),
    ];
    let entries = Constraint::ALL
        .iter()
        .zip(messages)
        .map(|(&constraint, message)| ConstraintImpact {
            constraint,
            level: constraint.level(),
            delta: penalties.contribution(constraint, weights),
            message,
        })
        .collect();
    Ok((penalties.score(weights), Breakdown { entries }))
}
