//! Brute-force reference for tiny instances.

use pmresched::{Instance, Score};

/// Scores `placements` (`(technician, start)` per task) from the instance
/// facts alone.
pub fn score(instance: &Instance, placements: &[(usize, u32)]) -> Score {
    let per_day = instance.grid().slots_per_day();
    let days = instance.grid().horizon_days() as usize;
    let techs = instance.technicians();
    let weights = instance.weights();
    let (mut hard, mut medium) = (0i64, 0i64);
    let mut daily = vec![vec![0i64; days]; techs.len()];
    let mut weekly = vec![vec![0i64; days.div_ceil(5)]; techs.len()];
    let mut total = vec![0i64; techs.len()];

    for (task, &(tech, start)) in instance.tasks().iter().zip(placements) {
        let t = &techs[tech];
        let day = start / per_day;
        let within = start % per_day;
        let end = (within + task.duration_slots).min(per_day);
        if within + task.duration_slots > per_day {
            hard += weights.opening_hours;
        }
        let blocked = (within..end).any(|s| {
            let half = u32::from(s >= per_day / 2);
            t.unavailable_blocks.contains(&(day * 2 + half))
        });
        if blocked {
            hard += weights.staff_unavailability;
        }
        if t.specialization != task.required_specialization {
            medium += weights.specialization;
        }
        if let Some(deadline) = task.deadline {
            let last = start + task.duration_slots - 1;
            medium += weights.deadline * i64::from(last.saturating_sub(deadline));
        }
        let d = i64::from(task.duration_slots);
        daily[tech][day as usize] += d;
        weekly[tech][day as usize / 5] += d;
        total[tech] += d;
    }
    for (tech, t) in techs.iter().enumerate() {
        let over = |load: i64, limit: u32| (load - i64::from(limit)).max(0);
        let excess: i64 = daily[tech].iter().map(|&l| over(l, t.daily_limit_slots)).sum::<i64>()
            + weekly[tech].iter().map(|&l| over(l, t.weekly_limit_slots)).sum::<i64>();
        medium += weights.workload_limit * excess;
    }
    let spread = total.iter().max().unwrap_or(&0) - total.iter().min().unwrap_or(&0);
    Score::of(-hard, -medium, -weights.workload_balance * spread)
}

/// Best score over every complete assignment, and the number of leaves.
pub fn optimum(instance: &Instance) -> (Score, u64) {
    let values: Vec<(usize, u32)> = (0..instance.technicians().len())
        .flat_map(|t| (0..instance.grid().total_slots()).map(move |s| (t, s)))
        .collect();
    let n = instance.tasks().len();
    let mut digits = vec![0usize; n];
    let mut current: Vec<(usize, u32)> = vec![values[0]; n];
    let mut best = score(instance, &current);
    let mut leaves = 1u64;
    loop {
        let mut i = 0;
        while i < n {
            digits[i] += 1;
            if digits[i] < values.len() {
                break;
            }
            digits[i] = 0;
            current[i] = values[0];
            i += 1;
        }
        if i == n {
            return (best, leaves);
        }
        current[i] = values[digits[i]];
        leaves += 1;
        best = best.max(score(instance, &current));
    }
}
