//! The discrete planning grid.
//!
//! The grid only contains opening-hours slots: day `d`, within-day slot `s`
//! maps to the global index `d * slots_per_day + s`. Each working day is split
//! into two half-day blocks (morning and afternoon) which are the unit of
//! technician unavailability.

use std::ops::Range;

use chrono::{Datelike, Duration, NaiveDate, NaiveTime, Weekday};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Working days per week; weekly workload limits are evaluated over
/// consecutive groups of this many working days.
pub const DAYS_PER_WEEK: u32 = 5;

/// Identifier of a half-day block: `day * 2` for the morning, `day * 2 + 1`
/// for the afternoon.
pub type BlockId = u32;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "GridData", into = "GridData")]
pub struct TimeGrid {
    slot_minutes: u32,
    day_start: NaiveTime,
    day_end: NaiveTime,
    working_days: Vec<NaiveDate>,
    slots_per_day: u32,
}

#[derive(Serialize, Deserialize)]
struct GridData {
    slot_minutes: u32,
    #[serde(with = "hhmm")]
    day_start: NaiveTime,
    #[serde(with = "hhmm")]
    day_end: NaiveTime,
    working_days: Vec<NaiveDate>,
    slots_per_day: u32,
    horizon_days: u32,
}

impl TryFrom<GridData> for TimeGrid {
    type Error = Error;

    fn try_from(data: GridData) -> Result<Self> {
        let grid = TimeGrid::new(data.slot_minutes, data.day_start, data.day_end, data.working_days)?;
        if grid.slots_per_day != data.slots_per_day {
            return Err(Error::validation(
                "grid.slots_per_day",
                format!(
                    "expected {} from opening hours, found {}",
                    grid.slots_per_day, data.slots_per_day
                ),
            ));
        }
        if grid.horizon_days() != data.horizon_days {
            return Err(Error::validation(
                "grid.horizon_days",
                format!(
                    "expected {} working days, found {}",
                    grid.horizon_days(),
                    data.horizon_days
                ),
            ));
        }
        Ok(grid)
    }
}

impl From<TimeGrid> for GridData {
    fn from(grid: TimeGrid) -> Self {
        GridData {
            slot_minutes: grid.slot_minutes,
            day_start: grid.day_start,
            day_end: grid.day_end,
            horizon_days: grid.horizon_days(),
            slots_per_day: grid.slots_per_day,
            working_days: grid.working_days,
        }
    }
}

impl TimeGrid {
    pub fn new(
        slot_minutes: u32,
        day_start: NaiveTime,
        day_end: NaiveTime,
        working_days: Vec<NaiveDate>,
    ) -> Result<Self> {
        if slot_minutes == 0 {
            return Err(Error::validation("grid.slot_minutes", "must be positive"));
        }
        if day_end <= day_start {
            return Err(Error::validation("grid.day_end", "must be after day_start"));
        }
        let open_minutes = (day_end - day_start).num_minutes() as u32;
        if !open_minutes.is_multiple_of(slot_minutes) {
            return Err(Error::validation(
                "grid.slot_minutes",
                format!("{open_minutes} opening minutes are not a multiple of {slot_minutes}"),
            ));
        }
        if working_days.is_empty() {
            return Err(Error::validation("grid.working_days", "must not be empty"));
        }
        for (i, day) in working_days.iter().enumerate() {
            if matches!(day.weekday(), Weekday::Sat | Weekday::Sun) {
                return Err(Error::validation(
                    format!("grid.working_days[{i}]"),
                    format!("{day} is not a weekday"),
                ));
            }
            if i > 0 && working_days[i - 1] >= *day {
                return Err(Error::validation(
                    format!("grid.working_days[{i}]"),
                    "working days must be strictly increasing",
                ));
            }
        }
        Ok(TimeGrid {
            slot_minutes,
            day_start,
            day_end,
            working_days,
            slots_per_day: open_minutes / slot_minutes,
        })
    }

    /// Consecutive Monday-to-Friday days starting at `first_day` (rolled
    /// forward to the next weekday if it falls on a weekend).
    pub fn working_week(
        first_day: NaiveDate,
        horizon_days: u32,
        slot_minutes: u32,
        day_start: NaiveTime,
        day_end: NaiveTime,
    ) -> Result<Self> {
        let mut days = Vec::with_capacity(horizon_days as usize);
        let mut day = first_day;
        while days.len() < horizon_days as usize {
            if !matches!(day.weekday(), Weekday::Sat | Weekday::Sun) {
                days.push(day);
            }
            day += Duration::days(1);
        }
        TimeGrid::new(slot_minutes, day_start, day_end, days)
    }

    /// A grid of `slots_per_day` ten-minute slots opening at 08:00, starting
    /// Monday 2025-01-06. Handy for small hand-built instances.
    pub fn compact(slots_per_day: u32, horizon_days: u32) -> Result<Self> {
        let start = NaiveTime::from_hms_opt(8, 0, 0).expect("valid time");
        let end = start + Duration::minutes(10 * i64::from(slots_per_day));
        if end <= start {
            return Err(Error::Range(format!(
                "{slots_per_day} ten-minute slots do not fit in one day"
            )));
        }
        TimeGrid::working_week(default_first_day(), horizon_days, 10, start, end)
    }

    pub fn slot_minutes(&self) -> u32 {
        self.slot_minutes
    }

    pub fn day_start(&self) -> NaiveTime {
        self.day_start
    }

    pub fn day_end(&self) -> NaiveTime {
        self.day_end
    }

    pub fn working_days(&self) -> &[NaiveDate] {
        &self.working_days
    }

    pub fn slots_per_day(&self) -> u32 {
        self.slots_per_day
    }

    pub fn horizon_days(&self) -> u32 {
        self.working_days.len() as u32
    }

    /// Total number of slots in the horizon (`d_H`).
    pub fn total_slots(&self) -> u32 {
        self.horizon_days() * self.slots_per_day
    }

    pub fn global_slot(&self, day: u32, slot: u32) -> Result<u32> {
        if day >= self.horizon_days() {
            return Err(Error::Range(format!(
                "day {day} outside horizon of {} days",
                self.horizon_days()
            )));
        }
        if slot >= self.slots_per_day {
            return Err(Error::Range(format!(
                "slot {slot} outside day of {} slots",
                self.slots_per_day
            )));
        }
        Ok(day * self.slots_per_day + slot)
    }

    /// Inverse of [`global_slot`](Self::global_slot): `(day, within-day slot)`.
    pub fn split(&self, global: u32) -> Result<(u32, u32)> {
        if global >= self.total_slots() {
            return Err(Error::Range(format!(
                "slot {global} outside horizon of {} slots",
                self.total_slots()
            )));
        }
        Ok((global / self.slots_per_day, global % self.slots_per_day))
    }

    #[inline]
    pub fn day_of(&self, global: u32) -> u32 {
        global / self.slots_per_day
    }

    #[inline]
    pub fn within_day(&self, global: u32) -> u32 {
        global % self.slots_per_day
    }

    #[inline]
    pub fn week_of_day(&self, day: u32) -> u32 {
        day / DAYS_PER_WEEK
    }

    pub fn weeks(&self) -> u32 {
        self.horizon_days().div_ceil(DAYS_PER_WEEK)
    }

    /// Length of the morning block; the afternoon gets the remainder.
    pub fn morning_slots(&self) -> u32 {
        self.slots_per_day / 2
    }

    pub fn block_count(&self) -> u32 {
        self.horizon_days() * 2
    }

    pub fn block_of(&self, global: u32) -> BlockId {
        let (day, slot) = (self.day_of(global), self.within_day(global));
        day * 2 + u32::from(slot >= self.morning_slots())
    }

    /// Global slots covered by a half-day block.
    pub fn block_slots(&self, block: BlockId) -> Range<u32> {
        let day_base = (block / 2) * self.slots_per_day;
        if block.is_multiple_of(2) {
            day_base..day_base + self.morning_slots()
        } else {
            day_base + self.morning_slots()..day_base + self.slots_per_day
        }
    }

    /// Last slot of `day`; generated deadlines snap here.
    pub fn end_of_day(&self, day: u32) -> u32 {
        day * self.slots_per_day + self.slots_per_day - 1
    }

    /// Wall-clock label of a global slot, e.g. `2025-01-06 08:30`.
    pub fn label(&self, global: u32) -> String {
        let (day, slot) = (self.day_of(global), self.within_day(global));
        let time = self.day_start + Duration::minutes(i64::from(slot * self.slot_minutes));
        match self.working_days.get(day as usize) {
            Some(date) => format!("{date} {}", time.format("%H:%M")),
            None => format!("day {day} {}", time.format("%H:%M")),
        }
    }
}

pub(crate) fn default_first_day() -> NaiveDate {
    NaiveDate::from_ymd_opt(2025, 1, 6).expect("valid date")
}

pub(crate) mod hhmm {
    use chrono::NaiveTime;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(time: &NaiveTime, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&time.format("%H:%M").to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<NaiveTime, D::Error> {
        let raw = String::deserialize(d)?;
        NaiveTime::parse_from_str(&raw, "%H:%M").map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn standard_week() -> TimeGrid {
        TimeGrid::working_week(
            default_first_day(),
            5,
            10,
            NaiveTime::from_hms_opt(8, 0, 0).unwrap(),
            NaiveTime::from_hms_opt(18, 0, 0).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn sixty_slots_per_day() {
        let grid = standard_week();
        assert_eq!(grid.slots_per_day(), 60);
        assert_eq!(grid.total_slots(), 300);
        assert_eq!(grid.morning_slots(), 30);
    }

    #[test]
    fn global_slot_examples() {
        let grid = standard_week();
        assert_eq!(grid.global_slot(0, 0).unwrap(), 0);
        assert_eq!(grid.global_slot(1, 0).unwrap(), 60);
        assert_eq!(grid.global_slot(4, 59).unwrap(), 299);
        assert!(matches!(grid.global_slot(5, 0), Err(Error::Range(_))));
        assert!(matches!(grid.global_slot(0, 60), Err(Error::Range(_))));
    }

    #[test]
    fn weekends_are_skipped() {
        // Friday start: next working day is Monday.
        let friday = NaiveDate::from_ymd_opt(2025, 1, 10).unwrap();
        let grid = TimeGrid::working_week(
            friday,
            2,
            10,
            NaiveTime::from_hms_opt(8, 0, 0).unwrap(),
            NaiveTime::from_hms_opt(18, 0, 0).unwrap(),
        )
        .unwrap();
        assert_eq!(grid.working_days()[1], NaiveDate::from_ymd_opt(2025, 1, 13).unwrap());
    }

    #[test]
    fn rejects_remainder_and_weekends() {
        let start = NaiveTime::from_hms_opt(8, 0, 0).unwrap();
        let end = NaiveTime::from_hms_opt(8, 25, 0).unwrap();
        assert!(TimeGrid::new(10, start, end, vec![default_first_day()]).is_err());
        let saturday = NaiveDate::from_ymd_opt(2025, 1, 11).unwrap();
        assert!(TimeGrid::new(10, start, end + Duration::minutes(5), vec![saturday]).is_err());
    }

    #[test]
    fn blocks_split_days_in_half() {
        let grid = standard_week();
        assert_eq!(grid.block_of(0), 0);
        assert_eq!(grid.block_of(29), 0);
        assert_eq!(grid.block_of(30), 1);
        assert_eq!(grid.block_of(60), 2);
        assert_eq!(grid.block_slots(3), 90..120);
        assert_eq!(grid.block_count(), 10);
    }

    #[test]
    fn json_uses_clock_strings() {
        let grid = TimeGrid::compact(10, 1).unwrap();
        let json = serde_json::to_value(&grid).unwrap();
        assert_eq!(json["day_start"], "08:00");
        assert_eq!(json["day_end"], "09:40");
        assert_eq!(json["working_days"][0], "2025-01-06");
        assert_eq!(json["horizon_days"], 1);
        let back: TimeGrid = serde_json::from_value(json).unwrap();
        assert_eq!(back, grid);
    }

    #[test]
    fn json_rejects_inconsistent_slot_count() {
        let grid = TimeGrid::compact(10, 1).unwrap();
        let mut json = serde_json::to_value(&grid).unwrap();
        json["slots_per_day"] = 11.into();
        assert!(serde_json::from_value::<TimeGrid>(json).is_err());
    }

    proptest! {
        #[test]
        fn global_slot_round_trips(days in 1u32..12, per_day in 1u32..80, pick in 0u32..10_000) {
            let grid = TimeGrid::compact(per_day, days).unwrap();
            let g = pick % grid.total_slots();
            let (d, s) = grid.split(g).unwrap();
            prop_assert_eq!(grid.global_slot(d, s).unwrap(), g);
        }
    }
}
