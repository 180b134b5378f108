//! Seeded instance generator and instance-size metrics.
//!
//! Parameters come in three levels: experiment (calendar, slot size, working
//! limits), scale (duration range, horizon, specializations, deadline and
//! unavailability rates) and problem (task and technician counts). The nine
//! named presets `S1`..`L3` cover three scales of three instances each.
//!
//! # Occupancy rate
//!
//! ```text
//! r_o = N_t * mean_duration / ((1 - r_U) * d_H * N_s)
//! ```
//!
//! The denominator is the number of technician slots left available after
//! removing the unavailable fraction `r_U`.

use std::fmt;
use std::str::FromStr;

use chrono::{NaiveDate, NaiveTime};
use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{default_first_day, TimeGrid};
use crate::model::{Instance, Task, Technician, DEFAULT_DAILY_LIMIT_SLOTS, DEFAULT_WEEKLY_LIMIT_SLOTS};
use crate::scoring::ConstraintWeights;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorParams {
    // experiment level
    #[serde(default = "default_first_day")]
    pub first_day: NaiveDate,
    #[serde(default = "default_day_start", with = "crate::grid::hhmm")]
    pub day_start: NaiveTime,
    #[serde(default = "default_day_end", with = "crate::grid::hhmm")]
    pub day_end: NaiveTime,
    #[serde(default = "default_slot_minutes")]
    pub slot_minutes: u32,
    #[serde(default = "default_daily_limit")]
    pub daily_limit_slots: u32,
    #[serde(default = "default_weekly_limit")]
    pub weekly_limit_slots: u32,
    // scale level
    /// Inclusive `[min, max]` task duration in slots.
    pub duration_range: [u32; 2],
    pub horizon_days: u32,
    pub n_specializations: u32,
    pub deadline_rate: f64,
    pub unavailability_rate: f64,
    // problem level
    pub n_tasks: u32,
    pub n_technicians: u32,
    #[serde(default)]
    pub seed: u64,
}

fn default_day_start() -> NaiveTime {
    NaiveTime::from_hms_opt(8, 0, 0).expect("valid time")
}

fn default_day_end() -> NaiveTime {
    NaiveTime::from_hms_opt(18, 0, 0).expect("valid time")
}

fn default_slot_minutes() -> u32 {
    10
}

fn default_daily_limit() -> u32 {
    DEFAULT_DAILY_LIMIT_SLOTS
}

fn default_weekly_limit() -> u32 {
    DEFAULT_WEEKLY_LIMIT_SLOTS
}

impl GeneratorParams {
    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::working_week(
            self.first_day,
            self.horizon_days,
            self.slot_minutes,
            self.day_start,
            self.day_end,
        )
    }

    pub fn validate(&self) -> Result<TimeGrid> {
        if self.horizon_days == 0 {
            return Err(Error::Parameter("horizon_days must be positive".into()));
        }
        let grid = self.grid()?;
        let [min, max] = self.duration_range;
        if min == 0 || min > max {
            return Err(Error::Parameter(format!("invalid duration range {min}-{max}")));
        }
        if max > grid.slots_per_day() {
            return Err(Error::Parameter(format!(
                "maximum duration {max} exceeds the {} slots of a day",
                grid.slots_per_day()
            )));
        }
        if self.n_specializations == 0 {
            return Err(Error::Parameter("at least one specialization is required".into()));
        }
        if self.n_technicians < self.n_specializations {
            return Err(Error::Parameter(format!(
                "{} technicians cannot cover {} specializations",
                self.n_technicians, self.n_specializations
            )));
        }
        if !(0.0..=1.0).contains(&self.deadline_rate) {
            return Err(Error::Parameter("deadline_rate must be in [0, 1]".into()));
        }
        if !(0.0..1.0).contains(&self.unavailability_rate) {
            return Err(Error::Parameter("unavailability_rate must be in [0, 1)".into()));
        }
        if self.daily_limit_slots == 0 || self.daily_limit_slots > grid.slots_per_day() {
            return Err(Error::Parameter("daily limit must be within one day".into()));
        }
        Ok(grid)
    }

    pub fn mean_duration(&self) -> f64 {
        f64::from(self.duration_range[0] + self.duration_range[1]) / 2.0
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// The nine named presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Preset {
    S1,
    S2,
    S3,
    M1,
    M2,
    M3,
    L1,
    L2,
    L3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Small,
    Medium,
    Large,
}

impl Preset {
    pub const ALL: [Preset; 9] = [
        Preset::S1,
        Preset::S2,
        Preset::S3,
        Preset::M1,
        Preset::M2,
        Preset::M3,
        Preset::L1,
        Preset::L2,
        Preset::L3,
    ];

    pub fn scale(self) -> Scale {
        match self {
            Preset::S1 | Preset::S2 | Preset::S3 => Scale::Small,
            Preset::M1 | Preset::M2 | Preset::M3 => Scale::Medium,
            Preset::L1 | Preset::L2 | Preset::L3 => Scale::Large,
        }
    }

    /// `(tasks, technicians)`
    pub fn size(self) -> (u32, u32) {
        match self {
            Preset::S1 => (50, 3),
            Preset::S2 => (100, 5),
            Preset::S3 => (150, 7),
            Preset::M1 => (200, 6),
            Preset::M2 => (300, 9),
            Preset::M3 => (400, 12),
            Preset::L1 => (600, 12),
            Preset::L2 => (1000, 20),
            Preset::L3 => (1200, 24),
        }
    }

    /// Occupancy rate printed for the preset, in percent.
    pub fn published_occupancy_percent(self) -> u32 {
        match self {
            Preset::S1 => 30,
            Preset::S2 => 37,
            Preset::S3 => 38,
            Preset::M1 | Preset::M2 | Preset::M3 => 56,
            Preset::L1 | Preset::L2 | Preset::L3 => 89,
        }
    }

    pub fn params(self, seed: u64) -> GeneratorParams {
        let (duration_range, horizon_days, n_specializations, rate) = match self.scale() {
            Scale::Small => ([1, 3], 2, 2, 0.1),
            Scale::Medium => ([2, 6], 5, 3, 0.2),
            Scale::Large => ([3, 12], 10, 4, 0.3),
        };
        let (n_tasks, n_technicians) = self.size();
        GeneratorParams {
            first_day: default_first_day(),
            day_start: default_day_start(),
            day_end: default_day_end(),
            slot_minutes: default_slot_minutes(),
            daily_limit_slots: DEFAULT_DAILY_LIMIT_SLOTS,
            weekly_limit_slots: DEFAULT_WEEKLY_LIMIT_SLOTS,
            duration_range,
            horizon_days,
            n_specializations,
            deadline_rate: rate,
            unavailability_rate: rate,
            n_tasks,
            n_technicians,
            seed,
        }
    }

    pub fn generate(self, seed: u64) -> Result<Instance> {
        generate(&self.params(seed))
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.to_string().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Parameter(format!("unknown preset `{s}` (expected S1..L3)")))
    }
}

/// Builds an instance from `params`; identical params give identical
/// instances.
///
/// Durations are drawn as a balanced sample: every value of the range
/// appears `n_tasks / k` times and the remainder values are drawn without
/// replacement, then the sequence is shuffled. Each task's duration is still
/// uniform over the range, while the total stays at its expectation.
///
/// Unavailability is drawn over all `(technician, half-day)` pairs at once:
/// `round(r_U * n_technicians * blocks)` distinct pairs are marked
/// unavailable, so the realised fraction matches `r_U` even when a single
/// technician's share would round to zero.
///
/// Tasks with a deadline must finish by the end of a day drawn uniformly
/// from the second half of the horizon.
pub fn generate(params: &GeneratorParams) -> Result<Instance> {
    let grid = params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

    let specializations: Vec<String> = (1..=params.n_specializations).map(|i| format!("spec-{i}")).collect();

    let [min, max] = params.duration_range;
    let span = (max - min + 1) as usize;
    let n_tasks = params.n_tasks as usize;
    let mut durations: Vec<u32> = Vec::with_capacity(n_tasks);
    for _ in 0..n_tasks / span {
        durations.extend(min..=max);
    }
    for i in index::sample(&mut rng, span, n_tasks % span) {
        durations.push(min + i as u32);
    }
    durations.shuffle(&mut rng);

    let mut tasks: Vec<Task> = durations
        .into_iter()
        .enumerate()
        .map(|(i, duration)| {
            let spec = rng.gen_range(0..specializations.len());
            Task::new(format!("task-{:04}", i + 1), duration, specializations[spec].clone())
        })
        .collect();

    let with_deadline = (params.deadline_rate * n_tasks as f64).round() as usize;
    let first_deadline_day = grid.horizon_days().div_ceil(2).min(grid.horizon_days() - 1);
    for i in index::sample(&mut rng, n_tasks, with_deadline.min(n_tasks)) {
        let day = rng.gen_range(first_deadline_day..grid.horizon_days());
        tasks[i].deadline = Some(grid.end_of_day(day));
    }

    let n_tech = params.n_technicians as usize;
    let mut technicians: Vec<Technician> = (0..n_tech)
        .map(|i| {
            Technician::new(
                format!("tech-{:02}", i + 1),
                specializations[i % specializations.len()].clone(),
            )
            .with_limits(params.daily_limit_slots, params.weekly_limit_slots)
        })
        .collect();

    let blocks = grid.block_count() as usize;
    let unavailable = (params.unavailability_rate * (n_tech * blocks) as f64).round() as usize;
    for i in index::sample(&mut rng, n_tech * blocks, unavailable) {
        technicians[i / blocks].unavailable_blocks.insert((i % blocks) as u32);
    }

    Instance::new(
        grid,
        tasks,
        technicians,
        specializations,
        ConstraintWeights::default(),
        params.seed,
    )
}

/// Expected occupancy of instances generated from `params`.
pub fn occupancy_rate(params: &GeneratorParams) -> Result<f64> {
    if params.unavailability_rate >= 1.0 {
        return Err(Error::Parameter("occupancy is undefined when r_U = 1".into()));
    }
    let grid = params.grid()?;
    let available =
        (1.0 - params.unavailability_rate) * f64::from(grid.total_slots()) * f64::from(params.n_technicians);
    if available <= 0.0 {
        return Err(Error::Parameter("no technician slots available".into()));
    }
    Ok(f64::from(params.n_tasks) * params.mean_duration() / available)
}

/// `log10((N_s * d_H) ^ N_t)`
pub fn problem_scale_log10(instance: &Instance) -> f64 {
    scale_log10(
        instance.tasks().len() as u64,
        instance.technicians().len() as u64,
        u64::from(instance.grid().total_slots()),
    )
}

pub fn scale_log10(n_tasks: u64, n_technicians: u64, horizon_slots: u64) -> f64 {
    if n_tasks == 0 {
        return 0.0;
    }
    n_tasks as f64 * ((n_technicians * horizon_slots) as f64).log10()
}
