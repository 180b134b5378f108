//! Problem facts: tasks, technicians and the instance that binds them to a
//! time grid.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{BlockId, TimeGrid};
use crate::scoring::ConstraintWeights;

/// Default daily limit: 7 hours of 10-minute slots.
pub const DEFAULT_DAILY_LIMIT_SLOTS: u32 = 42;
/// Default weekly limit: 35 hours of 10-minute slots.
pub const DEFAULT_WEEKLY_LIMIT_SLOTS: u32 = 210;

/// A preventive-maintenance task.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Task {
    pub id: String,
    pub duration_slots: u32,
    pub required_specialization: String,
    /// Last global slot the task may occupy.
    #[serde(default)]
    pub deadline: Option<u32>,
    #[serde(default)]
    pub priority_hint: Option<i64>,
}

impl Task {
    pub fn new(id: impl Into<String>, duration_slots: u32, specialization: impl Into<String>) -> Self {
        Task {
            id: id.into(),
            duration_slots,
            required_specialization: specialization.into(),
            deadline: None,
            priority_hint: None,
        }
    }

    pub fn with_deadline(mut self, deadline: u32) -> Self {
        self.deadline = Some(deadline);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Technician {
    pub id: String,
    pub specialization: String,
    #[serde(default)]
    pub unavailable_blocks: BTreeSet<BlockId>,
    pub daily_limit_slots: u32,
    pub weekly_limit_slots: u32,
}

impl Technician {
    pub fn new(id: impl Into<String>, specialization: impl Into<String>) -> Self {
        Technician {
            id: id.into(),
            specialization: specialization.into(),
            unavailable_blocks: BTreeSet::new(),
            daily_limit_slots: DEFAULT_DAILY_LIMIT_SLOTS,
            weekly_limit_slots: DEFAULT_WEEKLY_LIMIT_SLOTS,
        }
    }

    pub fn with_limits(mut self, daily: u32, weekly: u32) -> Self {
        self.daily_limit_slots = daily;
        self.weekly_limit_slots = weekly;
        self
    }

    pub fn with_unavailable(mut self, blocks: impl IntoIterator<Item = BlockId>) -> Self {
        self.unavailable_blocks.extend(blocks);
        self
    }
}

/// Immutable problem facts.
///
/// Construction validates every cross reference and precomputes the lookup
/// tables used by the evaluators, so an `Instance` value is always
/// internally consistent.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "InstanceData", into = "InstanceData")]
pub struct Instance {
    data: InstanceData,
    task_index: HashMap<String, usize>,
    tech_index: HashMap<String, usize>,
    task_spec: Vec<u32>,
    tech_spec: Vec<u32>,
    /// Per technician, prefix counts of unavailable slots over the horizon.
    unavailable_prefix: Vec<Vec<u32>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct InstanceData {
    grid: TimeGrid,
    tasks: Vec<Task>,
    technicians: Vec<Technician>,
    specializations: Vec<String>,
    #[serde(default)]
    weights: ConstraintWeights,
    #[serde(default)]
    seed: u64,
}

impl PartialEq for Instance {
    fn eq(&self, other: &Self) -> bool {
        self.data == other.data
    }
}

impl TryFrom<InstanceData> for Instance {
    type Error = Error;

    fn try_from(data: InstanceData) -> Result<Self> {
        Instance::new(
            data.grid,
            data.tasks,
            data.technicians,
            data.specializations,
            data.weights,
            data.seed,
        )
    }
}

impl From<Instance> for InstanceData {
    fn from(instance: Instance) -> Self {
        instance.data
    }
}

impl Instance {
    pub fn new(
        grid: TimeGrid,
        tasks: Vec<Task>,
        technicians: Vec<Technician>,
        specializations: Vec<String>,
        weights: ConstraintWeights,
        seed: u64,
    ) -> Result<Self> {
        weights.validate()?;
        let spec_index: HashMap<&str, u32> = specializations
            .iter()
            .enumerate()
            .map(|(i, s)| (s.as_str(), i as u32))
            .collect();
        if spec_index.len() != specializations.len() {
            return Err(Error::validation("specializations", "duplicate specialization id"));
        }

        let mut task_index = HashMap::with_capacity(tasks.len());
        let mut task_spec = Vec::with_capacity(tasks.len());
        for (i, task) in tasks.iter().enumerate() {
            let field = |name: &str| format!("tasks[{i}].{name}");
            if task_index.insert(task.id.clone(), i).is_some() {
                return Err(Error::validation(
                    field("id"),
                    format!("duplicate task id `{}`", task.id),
                ));
            }
            if task.duration_slots == 0 || task.duration_slots > grid.slots_per_day() {
                return Err(Error::validation(
                    field("duration_slots"),
                    format!("must be in 1..={}", grid.slots_per_day()),
                ));
            }
            if let Some(deadline) = task.deadline {
                if deadline >= grid.total_slots() {
                    return Err(Error::validation(field("deadline"), "outside the horizon"));
                }
            }
            let spec = spec_index.get(task.required_specialization.as_str()).ok_or_else(|| {
                Error::validation(
                    field("required_specialization"),
                    format!("unknown specialization `{}`", task.required_specialization),
                )
            })?;
            task_spec.push(*spec);
        }

        let mut tech_index = HashMap::with_capacity(technicians.len());
        let mut tech_spec = Vec::with_capacity(technicians.len());
        let mut unavailable_prefix = Vec::with_capacity(technicians.len());
        for (i, tech) in technicians.iter().enumerate() {
            let field = |name: &str| format!("technicians[{i}].{name}");
            if tech_index.insert(tech.id.clone(), i).is_some() {
                return Err(Error::validation(
                    field("id"),
                    format!("duplicate technician id `{}`", tech.id),
                ));
            }
            let spec = spec_index.get(tech.specialization.as_str()).ok_or_else(|| {
                Error::validation(
                    field("specialization"),
                    format!("unknown specialization `{}`", tech.specialization),
                )
            })?;
            tech_spec.push(*spec);
            if tech.daily_limit_slots == 0 || tech.daily_limit_slots > grid.slots_per_day() {
                return Err(Error::validation(
                    field("daily_limit_slots"),
                    format!("must be in 1..={}", grid.slots_per_day()),
                ));
            }
            if tech.weekly_limit_slots == 0 {
                return Err(Error::validation(field("weekly_limit_slots"), "must be positive"));
            }
            if let Some(&block) = tech.unavailable_blocks.iter().find(|&&b| b >= grid.block_count()) {
                return Err(Error::validation(
                    field("unavailable_blocks"),
                    format!("block {block} outside the {} half-day blocks", grid.block_count()),
                ));
            }
            let mut prefix = Vec::with_capacity(grid.total_slots() as usize + 1);
            prefix.push(0);
            let mut count = 0;
            for g in 0..grid.total_slots() {
                if tech.unavailable_blocks.contains(&grid.block_of(g)) {
                    count += 1;
                }
                prefix.push(count);
            }
            unavailable_prefix.push(prefix);
        }

        Ok(Instance {
            data: InstanceData {
                grid,
                tasks,
                technicians,
                specializations,
                weights,
                seed,
            },
            task_index,
            tech_index,
            task_spec,
            tech_spec,
            unavailable_prefix,
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.data.grid
    }

    pub fn tasks(&self) -> &[Task] {
        &self.data.tasks
    }

    pub fn technicians(&self) -> &[Technician] {
        &self.data.technicians
    }

    pub fn specializations(&self) -> &[String] {
        &self.data.specializations
    }

    pub fn weights(&self) -> &ConstraintWeights {
        &self.data.weights
    }

    pub fn seed(&self) -> u64 {
        self.data.seed
    }

    pub fn task(&self, index: usize) -> &Task {
        &self.data.tasks[index]
    }

    pub fn technician(&self, index: usize) -> &Technician {
        &self.data.technicians[index]
    }

    pub fn task_index(&self, id: &str) -> Option<usize> {
        self.task_index.get(id).copied()
    }

    pub fn technician_index(&self, id: &str) -> Option<usize> {
        self.tech_index.get(id).copied()
    }

    pub(crate) fn require_task(&self, id: &str) -> Result<usize> {
        self.task_index(id).ok_or_else(|| Error::UnknownId {
            kind: "task",
            id: id.to_string(),
        })
    }

    pub(crate) fn require_technician(&self, id: &str) -> Result<usize> {
        self.technician_index(id).ok_or_else(|| Error::UnknownId {
            kind: "technician",
            id: id.to_string(),
        })
    }

    /// Same instance with replaced constraint weights.
    pub fn with_weights(&self, weights: ConstraintWeights) -> Result<Instance> {
        weights.validate()?;
        let mut next = self.clone();
        next.data.weights = weights;
        Ok(next)
    }

    /// Rebuilds an instance from modified parts of this one.
    pub(crate) fn rebuild(
        &self,
        tasks: Vec<Task>,
        technicians: Vec<Technician>,
        specializations: Vec<String>,
    ) -> Result<Instance> {
        Instance::new(
            self.data.grid.clone(),
            tasks,
            technicians,
            specializations,
            self.data.weights.clone(),
            self.data.seed,
        )
    }

    #[inline]
    pub(crate) fn specialization_matches(&self, task: usize, tech: usize) -> bool {
        self.task_spec[task] == self.tech_spec[tech]
    }

    /// Whether the task started at `start` on `tech` touches an unavailable
    /// block. Only the part inside the start day counts; overflow past
    /// closing time is an opening-hours matter.
    #[inline]
    pub(crate) fn hits_unavailability(&self, task: usize, tech: usize, start: u32) -> bool {
        let grid = &self.data.grid;
        let day_end = (grid.day_of(start) + 1) * grid.slots_per_day();
        let end = (start + self.data.tasks[task].duration_slots).min(day_end);
        let prefix = &self.unavailable_prefix[tech];
        prefix[end as usize] > prefix[start as usize]
    }

    /// Mean task duration in slots, or 0 without tasks.
    pub fn mean_duration(&self) -> f64 {
        if self.data.tasks.is_empty() {
            return 0.0;
        }
        let total: u64 = self.data.tasks.iter().map(|t| u64::from(t.duration_slots)).sum();
        total as f64 / self.data.tasks.len() as f64
    }

    pub fn total_task_slots(&self) -> u64 {
        self.data.tasks.iter().map(|t| u64::from(t.duration_slots)).sum()
    }

    /// Technician slots not covered by unavailable blocks.
    pub fn available_technician_slots(&self) -> u64 {
        let total = u64::from(self.data.grid.total_slots());
        self.unavailable_prefix
            .iter()
            .map(|prefix| total - u64::from(*prefix.last().unwrap_or(&0)))
            .sum()
    }

    /// Fraction of technician half-day blocks marked unavailable.
    pub fn unavailability_rate(&self) -> f64 {
        let blocks = self.data.grid.block_count() as usize * self.data.technicians.len();
        if blocks == 0 {
            return 0.0;
        }
        let unavailable: usize = self.data.technicians.iter().map(|t| t.unavailable_blocks.len()).sum();
        unavailable as f64 / blocks as f64
    }

    /// Required task slots divided by available technician slots.
    pub fn measured_occupancy(&self) -> f64 {
        let available = self.available_technician_slots();
        if available == 0 {
            return f64::INFINITY;
        }
        self.total_task_slots() as f64 / available as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> TimeGrid {
        TimeGrid::compact(10, 2).unwrap()
    }

    fn specs() -> Vec<String> {
        vec!["A".into(), "B".into()]
    }

    #[test]
    fn rejects_unknown_specialization() {
        let err = Instance::new(
            grid(),
            vec![Task::new("t1", 2, "C")],
            vec![Technician::new("s1", "A").with_limits(10, 50)],
            specs(),
            ConstraintWeights::default(),
            0,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Validation { ref field, .. } if field == "tasks[0].required_specialization"));
    }

    #[test]
    fn rejects_duration_longer_than_a_day() {
        let err = Instance::new(
            grid(),
            vec![Task::new("t1", 11, "A")],
            vec![Technician::new("s1", "A").with_limits(10, 50)],
            specs(),
            ConstraintWeights::default(),
            0,
        );
        assert!(err.is_err());
    }

    #[test]
    fn rejects_out_of_range_block() {
        let err = Instance::new(
            grid(),
            vec![],
            vec![Technician::new("s1", "A").with_limits(10, 50).with_unavailable([4])],
            specs(),
            ConstraintWeights::default(),
            0,
        );
        assert!(err.is_err());
    }

    #[test]
    fn unavailability_is_clipped_to_the_start_day() {
        // 10-slot days, morning = slots 0..5. Block 2 is day 1 morning.
        let instance = Instance::new(
            grid(),
            vec![Task::new("t1", 4, "A")],
            vec![Technician::new("s1", "A").with_limits(10, 50).with_unavailable([2])],
            specs(),
            ConstraintWeights::default(),
            0,
        )
        .unwrap();
        // starts at day 0 slot 8: overflows past closing, never enters day 1
        assert!(!instance.hits_unavailability(0, 0, 8));
        assert!(instance.hits_unavailability(0, 0, 10));
        assert!(instance.hits_unavailability(0, 0, 12));
        assert!(!instance.hits_unavailability(0, 0, 15));
        assert_eq!(instance.available_technician_slots(), 15);
    }

    #[test]
    fn json_round_trip_preserves_lookups() {
        let instance = Instance::new(
            grid(),
            vec![Task::new("t1", 2, "B").with_deadline(9)],
            vec![
                Technician::new("s1", "A").with_limits(10, 50),
                Technician::new("s2", "B").with_limits(10, 50),
            ],
            specs(),
            ConstraintWeights::default(),
            7,
        )
        .unwrap();
        let json = serde_json::to_string(&instance).unwrap();
        let back: Instance = serde_json::from_str(&json).unwrap();
        assert_eq!(back, instance);
        assert_eq!(back.technician_index("s2"), Some(1));
        assert!(back.specialization_matches(0, 1));
    }
}
