//! Local-search improvement phase.
//!
//! Moves: change technician, change start, change both, swap two tasks'
//! assignments. Move type and operands are drawn uniformly with a seeded
//! RNG. Acceptance is either plain hill climbing (accept anything not worse
//! than the current score) or late acceptance (also accept anything not worse
//! than the score `L` steps ago).

use std::sync::atomic::{AtomicBool, Ordering};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schedule::{Placement, Schedule};
use crate::score::Score;
use crate::scoring::IncrementalScorer;

pub const DEFAULT_LATE_ACCEPTANCE_LENGTH: usize = 400;

/// Steps between wall-clock checks.
const CLOCK_INTERVAL: u64 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    HillClimb,
    LateAcceptance,
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hill_climb" | "hill-climb" | "hc" => Ok(Algorithm::HillClimb),
            "late_acceptance" | "late-acceptance" | "la" | "laa" => Ok(Algorithm::LateAcceptance),
            other => Err(Error::Parameter(format!("unknown search algorithm `{other}`"))),
        }
    }
}

/// Exactly one of `time_limit_ms` and `unimproved_limit` must be set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchConfig {
    #[serde(default = "default_algorithm")]
    pub algorithm: Algorithm,
    #[serde(default = "default_length")]
    pub late_acceptance_length: usize,
    #[serde(default)]
    pub time_limit_ms: Option<u64>,
    /// Stop after this many steps without a new best score.
    #[serde(default)]
    pub unimproved_limit: Option<u64>,
    #[serde(default)]
    pub seed: u64,
}

fn default_algorithm() -> Algorithm {
    Algorithm::LateAcceptance
}

fn default_length() -> usize {
    DEFAULT_LATE_ACCEPTANCE_LENGTH
}

impl SearchConfig {
    pub fn time_limited(limit: Duration, seed: u64) -> Self {
        SearchConfig {
            algorithm: Algorithm::LateAcceptance,
            late_acceptance_length: DEFAULT_LATE_ACCEPTANCE_LENGTH,
            time_limit_ms: Some(limit.as_millis() as u64),
            unimproved_limit: None,
            seed,
        }
    }

    pub fn step_limited(unimproved: u64, seed: u64) -> Self {
        SearchConfig {
            algorithm: Algorithm::LateAcceptance,
            late_acceptance_length: DEFAULT_LATE_ACCEPTANCE_LENGTH,
            time_limit_ms: None,
            unimproved_limit: Some(unimproved),
            seed,
        }
    }

    pub fn with_algorithm(mut self, algorithm: Algorithm) -> Self {
        self.algorithm = algorithm;
        self
    }

    pub fn validate(&self) -> Result<()> {
        match (self.time_limit_ms, self.unimproved_limit) {
            (Some(_), Some(_)) | (None, None) => Err(Error::validation(
                "search",
                "exactly one of time_limit_ms and unimproved_limit must be set",
            )),
            _ if self.late_acceptance_length == 0 => {
                Err(Error::validation("search.late_acceptance_length", "must be at least 1"))
            }
            _ => Ok(()),
        }
    }
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig::time_limited(Duration::from_secs(5), 0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogEntry {
    pub step: u64,
    pub elapsed_ms: u64,
    pub best: Score,
}

/// Summary of a search run; `improvements` holds each new best score.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepLog {
    pub steps: u64,
    pub accepted: u64,
    pub improvements: Vec<LogEntry>,
    pub elapsed_ms: u64,
    pub cancelled: bool,
}

#[derive(Debug, Clone)]
pub struct Improvement {
    pub schedule: Schedule,
    pub score: Score,
    pub log: StepLog,
}

pub fn improve(schedule: &Schedule, config: &SearchConfig) -> Result<Improvement> {
    improve_with_cancel(schedule, config, &AtomicBool::new(false))
}

/// Like [`improve`], stopping early once `cancel` is set. The flag is polled
/// every step.
pub fn improve_with_cancel(schedule: &Schedule, config: &SearchConfig, cancel: &AtomicBool) -> Result<Improvement> {
    config.validate()?;
    if !schedule.is_initialized() {
        return Err(Error::Uninitialized(schedule.unassigned_ids()));
    }
    let started = Instant::now();
    let mut scorer = IncrementalScorer::new(schedule)?;
    let initial = scorer.score();
    let movable: Vec<usize> = (0..schedule.placements().len())
        .filter(|&t| !schedule.is_pinned(t))
        .collect();
    let n_tech = schedule.instance().technicians().len();
    let horizon = schedule.instance().grid().total_slots();

    let mut log = StepLog::default();
    let unchanged = |mut log: StepLog| {
        let mut schedule = schedule.clone();
        if schedule.cached_score().is_none() {
            schedule.set_cached_score(initial);
        }
        log.elapsed_ms = started.elapsed().as_millis() as u64;
        Improvement {
            schedule,
            score: initial,
            log,
        }
    };
    if movable.is_empty() || n_tech == 0 || initial == Score::ZERO {
        return Ok(unchanged(log));
    }

    let time_limit = config.time_limit_ms.map(Duration::from_millis);
    let unimproved_limit = config.unimproved_limit;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut history = vec![initial; config.late_acceptance_length];
    let mut current = initial;
    let mut best = initial;
    let mut best_placements: Option<Vec<Option<Placement>>> = None;
    let mut since_best = 0u64;
    let mut changes: Vec<(usize, Option<Placement>)> = Vec::with_capacity(2);

    loop {
        if cancel.load(Ordering::Relaxed) {
            log.cancelled = true;
            break;
        }
        if let Some(limit) = time_limit {
            if log.steps % CLOCK_INTERVAL == 0 && started.elapsed() >= limit {
                break;
            }
        }
        if unimproved_limit.is_some_and(|limit| since_best >= limit) {
            break;
        }

        changes.clear();
        random_move(&scorer, &movable, n_tech, horizon, &mut rng, &mut changes);
        let mut undo = [(0usize, None); 2];
        let mut candidate = current;
        for (i, &(task, next)) in changes.iter().enumerate() {
            undo[i] = (task, scorer.placement(task));
            candidate += scorer.apply(task, next);
        }

        let late = &mut history[(log.steps % config.late_acceptance_length as u64) as usize];
        let accept = match config.algorithm {
            Algorithm::HillClimb => candidate >= current,
            Algorithm::LateAcceptance => candidate >= *late || candidate >= current,
        };
        if accept {
            current = candidate;
            log.accepted += 1;
            if current > best {
                best = current;
                best_placements = Some(scorer.placements().to_vec());
                since_best = 0;
                log.improvements.push(LogEntry {
                    step: log.steps,
                    elapsed_ms: started.elapsed().as_millis() as u64,
                    best,
                });
            } else {
                since_best += 1;
            }
        } else {
            for &(task, previous) in undo[..changes.len()].iter().rev() {
                scorer.apply(task, previous);
            }
            since_best += 1;
        }
        if config.algorithm == Algorithm::LateAcceptance {
            *late = current;
        }
        log.steps += 1;
        if best == Score::ZERO {
            break;
        }
    }

    let Some(placements) = best_placements else {
        return Ok(unchanged(log));
    };
    let mut out = schedule.clone();
    out.replace_placements(placements);
    out.set_cached_score(best);
    log.elapsed_ms = started.elapsed().as_millis() as u64;
    Ok(Improvement {
        schedule: out,
        score: best,
        log,
    })
}

fn random_move(
    scorer: &IncrementalScorer,
    movable: &[usize],
    n_tech: usize,
    horizon: u32,
    rng: &mut ChaCha8Rng,
    out: &mut Vec<(usize, Option<Placement>)>,
) {
    let kinds = if movable.len() >= 2 { 4 } else { 3 };
    let task = movable[rng.gen_range(0..movable.len())];
    let current = scorer.placement(task).expect("search runs on initialized schedules");
    match rng.gen_range(0..kinds) {
        0 => {
            let tech = if n_tech > 1 {
                // uniform over the other technicians
                let pick = rng.gen_range(0..n_tech - 1);
                if pick >= current.tech {
                    pick + 1
                } else {
                    pick
                }
            } else {
                current.tech
            };
            out.push((task, Some(Placement::new(tech, current.start))));
        }
        1 => {
            let start = rng.gen_range(0..horizon);
            out.push((task, Some(Placement::new(current.tech, start))));
        }
        2 => {
            let placement = Placement::new(rng.gen_range(0..n_tech), rng.gen_range(0..horizon));
            out.push((task, Some(placement)));
        }
        _ => {
            let mut other = movable[rng.gen_range(0..movable.len() - 1)];
            if other == task {
                other = movable[movable.len() - 1];
            }
            let theirs = scorer.placement(other);
            out.push((task, theirs));
            out.push((other, Some(current)));
        }
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::grid::TimeGrid;
    use crate::model::{Instance, Task, Technician};
    use crate::scoring::{evaluate_full, ConstraintWeights};

    fn instance() -> Arc<Instance> {
        Arc::new(
            Instance::new(
                TimeGrid::compact(10, 1).unwrap(),
                vec![
                    Task::new("t1", 2, "A"),
                    Task::new("t2", 3, "B"),
                    Task::new("t3", 4, "A"),
                ],
                vec![
                    Technician::new("s1", "A").with_limits(6, 30),
                    Technician::new("s2", "B").with_limits(6, 30),
                ],
                vec!["A".into(), "B".into()],
                ConstraintWeights::default(),
                0,
            )
            .unwrap(),
        )
    }

    fn bad_schedule() -> Schedule {
        let mut schedule = Schedule::new(instance());
        for t in 0..3 {
            schedule.assign(t, Placement::new(1, 9)).unwrap();
        }
        schedule
    }

    #[test]
    fn config_needs_exactly_one_termination() {
        let mut config = SearchConfig::step_limited(10, 0);
        assert!(config.validate().is_ok());
        config.time_limit_ms = Some(10);
        assert!(config.validate().is_err());
        config.time_limit_ms = None;
        config.unimproved_limit = None;
        assert!(config.validate().is_err());
        let mut config = SearchConfig::step_limited(10, 0);
        config.late_acceptance_length = 0;
        assert!(config.validate().is_err());
    }

    #[test]
    fn rejects_uninitialized_input() {
        let err = improve(&Schedule::new(instance()), &SearchConfig::step_limited(10, 0)).unwrap_err();
        assert!(matches!(err, Error::Uninitialized(ref ids) if ids.len() == 3));
    }

    #[test]
    fn never_worse_and_deterministic() {
        let schedule = bad_schedule();
        let before = evaluate_full(&schedule).unwrap().0;
        for algorithm in [Algorithm::HillClimb, Algorithm::LateAcceptance] {
            let config = SearchConfig::step_limited(5_000, 11).with_algorithm(algorithm);
            let a = improve(&schedule, &config).unwrap();
            let b = improve(&schedule, &config).unwrap();
            assert!(a.score >= before);
            assert_eq!(a.schedule.placements(), b.schedule.placements());
            assert_eq!(evaluate_full(&a.schedule).unwrap().0, a.score);
            let bests: Vec<_> = a.log.improvements.iter().map(|e| e.best).collect();
            assert!(bests.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn optimum_is_a_fixed_point() {
        let single = Arc::new(
            Instance::new(
                TimeGrid::compact(10, 1).unwrap(),
                vec![Task::new("t1", 2, "A")],
                vec![Technician::new("s1", "A").with_limits(6, 30)],
                vec!["A".into()],
                ConstraintWeights::default(),
                0,
            )
            .unwrap(),
        );
        let mut optimal = Schedule::new(single);
        optimal.assign(0, Placement::new(0, 3)).unwrap();
        let out = improve(&optimal, &SearchConfig::step_limited(1_000, 0)).unwrap();
        assert_eq!(out.score, Score::ZERO);
        assert_eq!(out.schedule.placements(), optimal.placements());
        assert_eq!(out.log.steps, 0);
    }

    #[test]
    fn all_pinned_is_identity() {
        let mut schedule = bad_schedule();
        for t in 0..3 {
            schedule.pin(t).unwrap();
        }
        let out = improve(&schedule, &SearchConfig::time_limited(Duration::from_millis(50), 1)).unwrap();
        assert_eq!(out.schedule.placements(), schedule.placements());
        assert_eq!(out.schedule.revision(), schedule.revision());
    }

    #[test]
    fn pinned_tasks_never_move() {
        let mut schedule = bad_schedule();
        schedule.pin(1).unwrap();
        let out = improve(&schedule, &SearchConfig::step_limited(5_000, 2)).unwrap();
        assert_eq!(out.schedule.placement(1), schedule.placement(1));
        assert!(out.schedule.is_pinned(1));
    }

    #[test]
    fn cancellation_stops_the_run() {
        let cancel = AtomicBool::new(true);
        let out = improve_with_cancel(
            &bad_schedule(),
            &SearchConfig::time_limited(Duration::from_secs(60), 0),
            &cancel,
        )
        .unwrap();
        assert!(out.log.cancelled);
        assert_eq!(out.log.steps, 0);
    }
}
