//! Benchmark harness for construction-heuristic configurations.
//!
//! A plan runs every configuration of a grid on generated preset instances,
//! several repetitions each, and records final scores and wall times.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generator::{problem_scale_log10, Preset, Scale};
use crate::heuristics::{construct, EntitySort, HeuristicConfig, PickEarly, Strategy, ValueSort};
use crate::model::Instance;
use crate::schedule::Schedule;

const STRATEGIES: [Strategy; 2] = [Strategy::Queue, Strategy::Pool];
const PICKS: [PickEarly; 3] = [
    PickEarly::Never,
    PickEarly::FirstNonDeteriorating,
    PickEarly::FirstFeasibleOrNonDeterioratingHard,
];
const ENTITY_SORTS: [EntitySort; 2] = [EntitySort::None, EntitySort::DecreasingDifficulty];
const VALUE_SORTS: [ValueSort; 3] = [
    ValueSort::None,
    ValueSort::IncreasingStrength,
    ValueSort::DecreasingStrength,
];

/// All 36 combinations of strategy, pick-early type and sorts.
pub fn full_grid() -> Vec<HeuristicConfig> {
    let mut grid = Vec::with_capacity(36);
    for strategy in STRATEGIES {
        for pick in PICKS {
            for entity in ENTITY_SORTS {
                for value in VALUE_SORTS {
                    grid.push(HeuristicConfig::any(strategy, pick, entity, value));
                }
            }
        }
    }
    grid
}

/// The 24-configuration grid: the full grid without pooled `NE`/`ND`, which
/// is far slower than the queue for the same scores.
pub fn default_grid() -> Vec<HeuristicConfig> {
    full_grid()
        .into_iter()
        .filter(|c| c.strategy == Strategy::Queue || c.pick_early == PickEarly::FirstFeasibleOrNonDeterioratingHard)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchPlan {
    pub presets: Vec<Preset>,
    /// Explicit configurations; when empty the default or full grid is used.
    pub configs: Vec<HeuristicConfig>,
    pub full_grid: bool,
    pub repetitions: u32,
    /// Generator seeds; each preset is instantiated once per seed.
    pub seeds: Vec<u64>,
    /// Include the large presets; they are skipped otherwise.
    pub large: bool,
    /// Per-run wall-clock budget.
    pub timeout_ms: Option<u64>,
    /// Run configurations on worker threads. Timings are then not comparable.
    pub parallel: bool,
}

impl Default for BenchPlan {
    fn default() -> Self {
        BenchPlan {
            presets: Preset::ALL.to_vec(),
            configs: Vec::new(),
            full_grid: false,
            repetitions: 10,
            seeds: vec![0],
            large: false,
            timeout_ms: Some(60_000),
            parallel: false,
        }
    }
}

impl BenchPlan {
    pub fn configs(&self) -> Vec<HeuristicConfig> {
        if !self.configs.is_empty() {
            self.configs.clone()
        } else if self.full_grid {
            full_grid()
        } else {
            default_grid()
        }
    }

    pub fn presets(&self) -> Vec<Preset> {
        self.presets
            .iter()
            .copied()
            .filter(|p| self.large || p.scale() != Scale::Large)
            .collect()
    }

    pub fn run_count(&self) -> usize {
        self.presets().len() * self.seeds.len() * self.configs().len() * self.repetitions as usize
    }

    fn instance_label(&self, preset: Preset, seed: u64) -> String {
        if self.seeds.len() == 1 {
            preset.to_string()
        } else {
            format!("{preset}-s{seed}")
        }
    }
}

/// One construction run. `timed_out` is not part of the CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub instance: String,
    pub config: String,
    pub rep: u32,
    pub hard: i64,
    pub medium: i64,
    pub soft: i64,
    pub millis: f64,
    pub pairs_evaluated: u64,
    pub scale_log10: f64,
    #[serde(skip)]
    pub timed_out: bool,
}

/// Runs `config` `repetitions` times on `instance`, sequentially.
pub fn run_config(
    label: &str,
    instance: &Arc<Instance>,
    config: &HeuristicConfig,
    repetitions: u32,
    timeout: Option<Duration>,
) -> Result<Vec<BenchRecord>> {
    let scale = problem_scale_log10(instance);
    let empty = Schedule::new(instance.clone());
    let mut records: Vec<BenchRecord> = Vec::with_capacity(repetitions as usize);
    for rep in 0..repetitions {
        let started = Instant::now();
        let mut built = construct(&empty, config, timeout)?;
        let millis = (started.elapsed().as_secs_f64() * 1000.0).max(1e-3);
        let score = built.schedule.score()?;
        let record = BenchRecord {
            instance: label.to_string(),
            config: config.to_string(),
            rep,
            hard: score.hard,
            medium: score.medium,
            soft: score.soft,
            millis,
            pairs_evaluated: built.pairs_evaluated,
            scale_log10: scale,
            timed_out: built.budget_exceeded,
        };
        if let Some(first) = records.iter().find(|r| !r.timed_out) {
            if !record.timed_out && (first.hard, first.medium, first.soft) != (score.hard, score.medium, score.soft) {
                return Err(Error::State(format!(
                    "{config} on {label} is not deterministic: rep {rep} scored {score}"
                )));
            }
        }
        tracing::debug!(instance = label, %config, rep, millis, "bench run");
        records.push(record);
    }
    Ok(records)
}

pub fn run_bench(plan: &BenchPlan) -> Result<Vec<BenchRecord>> {
    if plan.repetitions == 0 {
        return Err(Error::Parameter("repetitions must be positive".into()));
    }
    let timeout = plan.timeout_ms.map(Duration::from_millis);
    let configs = plan.configs();
    let mut jobs = Vec::new();
    for preset in plan.presets() {
        for &seed in &plan.seeds {
            let instance = Arc::new(preset.generate(seed)?);
            let label = plan.instance_label(preset, seed);
            for config in &configs {
                jobs.push((label.clone(), instance.clone(), *config));
            }
        }
    }
    let run = |(label, instance, config): &(String, Arc<Instance>, HeuristicConfig)| {
        run_config(label, instance, config, plan.repetitions, timeout)
    };
    let batches: Vec<Vec<BenchRecord>> = if plan.parallel {
        jobs.par_iter().map(run).collect::<Result<_>>()?
    } else {
        jobs.iter().map(run).collect::<Result<_>>()?
    };
    Ok(batches.into_iter().flatten().collect())
}

pub fn write_csv<W: Write>(writer: W, records: &[BenchRecord]) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    for record in records {
        out.serialize(record)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(reader: R) -> Result<Vec<BenchRecord>> {
    csv::Reader::from_reader(reader)
        .deserialize()
        .map(|row| row.map_err(Error::from))
        .collect()
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigSummary {
    pub instance: String,
    pub config: String,
    pub runs: usize,
    pub timed_out: usize,
    pub mean_millis: f64,
    pub std_millis: f64,
    pub hard: f64,
    pub medium: f64,
    pub soft: f64,
    pub mean_pairs: f64,
    pub scale_log10: f64,
}

/// Time of one (strategy, pick-early) family on one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupPoint {
    pub group: String,
    pub instance: String,
    pub scale_log10: f64,
    pub mean_millis: f64,
    pub std_millis: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    /// Per instance, configurations from best to worst medium, then soft.
    pub configs: Vec<ConfigSummary>,
    /// Per family, points ordered by problem scale.
    pub groups: Vec<GroupPoint>,
}

impl Summary {
    pub fn is_empty(&self) -> bool {
        self.configs.is_empty() && self.groups.is_empty()
    }

    pub fn for_instance<'a>(&'a self, instance: &'a str) -> impl Iterator<Item = &'a ConfigSummary> {
        self.configs.iter().filter(move |c| c.instance == instance)
    }

    pub fn config(&self, instance: &str, config: &str) -> Option<&ConfigSummary> {
        self.configs
            .iter()
            .find(|c| c.instance == instance && c.config == config)
    }

    pub fn group(&self, group: &str, instance: &str) -> Option<&GroupPoint> {
        self.groups.iter().find(|g| g.group == group && g.instance == instance)
    }
}

/// `STRATEGY/PICK` prefix of a configuration string.
fn family(config: &str) -> String {
    config.split('/').take(2).collect::<Vec<_>>().join("/")
}

pub fn summarize(records: &[BenchRecord]) -> Summary {
    let mut instances: Vec<&str> = Vec::new();
    let mut by_config: BTreeMap<(&str, &str), Vec<&BenchRecord>> = BTreeMap::new();
    let mut by_family: BTreeMap<(String, &str), Vec<f64>> = BTreeMap::new();
    for record in records {
        if !instances.contains(&record.instance.as_str()) {
            instances.push(&record.instance);
        }
        by_config
            .entry((&record.instance, &record.config))
            .or_default()
            .push(record);
        by_family
            .entry((family(&record.config), &record.instance))
            .or_default()
            .push(record.millis);
    }
    let scale_of = |instance: &str| {
        records
            .iter()
            .find(|r| r.instance == instance)
            .map_or(0.0, |r| r.scale_log10)
    };

    let mut configs = Vec::new();
    for instance in &instances {
        let mut rows: Vec<ConfigSummary> = by_config
            .iter()
            .filter(|((i, _), _)| i == instance)
            .map(|((_, config), runs)| {
                let mean = |f: fn(&BenchRecord) -> f64| mean_std(&runs.iter().map(|r| f(r)).collect::<Vec<_>>()).0;
                let millis: Vec<f64> = runs.iter().map(|r| r.millis).collect();
                let (mean_millis, std_millis) = mean_std(&millis);
                ConfigSummary {
                    instance: instance.to_string(),
                    config: config.to_string(),
                    runs: runs.len(),
                    timed_out: runs.iter().filter(|r| r.timed_out).count(),
                    mean_millis,
                    std_millis,
                    hard: mean(|r| r.hard as f64),
                    medium: mean(|r| r.medium as f64),
                    soft: mean(|r| r.soft as f64),
                    mean_pairs: mean(|r| r.pairs_evaluated as f64),
                    scale_log10: scale_of(instance),
                }
            })
            .collect();
        rows.sort_by(|a, b| b.medium.total_cmp(&a.medium).then(b.soft.total_cmp(&a.soft)));
        configs.extend(rows);
    }

    let mut groups: Vec<GroupPoint> = by_family
        .into_iter()
        .map(|((group, instance), millis)| {
            let (mean_millis, std_millis) = mean_std(&millis);
            GroupPoint {
                group,
                instance: instance.to_string(),
                scale_log10: scale_of(instance),
                mean_millis,
                std_millis,
            }
        })
        .collect();
    groups.sort_by(|a, b| a.group.cmp(&b.group).then(a.scale_log10.total_cmp(&b.scale_log10)));

    Summary { configs, groups }
}
