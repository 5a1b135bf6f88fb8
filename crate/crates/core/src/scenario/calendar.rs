//! Time grid and heating-season calendar.
//!
//! The simulation year is a fixed 365-day year: February 29 does not exist,
//! so a one-year grid at 15-minute resolution always has 35,040 steps.

use std::fmt;
use std::str::FromStr;

use chrono::{Datelike, NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};

use super::ScenarioError;

pub const SECONDS_PER_DAY: u64 = 86_400;
pub const DAYS_PER_YEAR: u32 = 365;

const MONTH_LENGTHS: [u32; 12] = [31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31];

/// Day of year (0-based) for a month/day on the fixed 365-day calendar.
fn ordinal0(month: u32, day: u32) -> u32 {
    MONTH_LENGTHS[..(month - 1) as usize].iter().sum::<u32>() + day - 1
}

fn month_day_from_ordinal0(mut ordinal: u32) -> (u32, u32) {
    for (i, len) in MONTH_LENGTHS.iter().enumerate() {
        if ordinal < *len {
            return (i as u32 + 1, ordinal + 1);
        }
        ordinal -= len;
    }
    unreachable!("ordinal outside a 365-day year")
}

/// Uniform time discretisation of the simulated horizon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub start: NaiveDateTime,
    pub step_seconds: u32,
    pub step_count: usize,
}

/// Where a timestep falls on the no-leap calendar.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CalendarPosition {
    /// 0-based day of year.
    pub day_of_year: u32,
    pub month: u32,
    pub day: u32,
    pub second_of_day: u32,
}

impl CalendarPosition {
    pub fn hour(&self) -> f64 {
        self.second_of_day as f64 / 3600.0
    }
}

impl TimeGrid {
    pub fn new(start: NaiveDateTime, step_seconds: u32, step_count: usize) -> Result<Self, ScenarioError> {
        if step_seconds == 0 {
            return Err(ScenarioError::invalid("time grid step length must be positive"));
        }
        if step_count == 0 {
            return Err(ScenarioError::invalid("time grid needs at least one step"));
        }
        Ok(Self { start, step_seconds, step_count })
    }

    /// One full year at 15-minute resolution starting Jan 1, 00:00.
    pub fn one_year_quarter_hourly(year: i32) -> Self {
        let start = chrono::NaiveDate::from_ymd_opt(year, 1, 1).and_then(|d| d.and_hms_opt(0, 0, 0)).expect("valid date");
        Self { start, step_seconds: 900, step_count: (DAYS_PER_YEAR as usize) * 96 }
    }

    pub fn step_hours(&self) -> f64 {
        self.step_seconds as f64 / 3600.0
    }

    pub fn step_seconds_f64(&self) -> f64 {
        self.step_seconds as f64
    }

    pub fn steps_per_day(&self) -> f64 {
        SECONDS_PER_DAY as f64 / self.step_seconds as f64
    }

    pub fn position(&self, t: usize) -> CalendarPosition {
        // Feb 29 starts are folded onto Feb 28.
        let (m, d) = (self.start.month(), self.start.day().min(MONTH_LENGTHS[self.start.month0() as usize]));
        let start_ordinal = ordinal0(m, d) as u64;
        let start_second = self.start.num_seconds_from_midnight() as u64;
        let elapsed = start_second + t as u64 * self.step_seconds as u64;
        let day_of_year = ((start_ordinal + elapsed / SECONDS_PER_DAY) % DAYS_PER_YEAR as u64) as u32;
        let (month, day) = month_day_from_ordinal0(day_of_year);
        CalendarPosition { day_of_year, month, day, second_of_day: (elapsed % SECONDS_PER_DAY) as u32 }
    }
}

/// A month/day pair on the no-leap calendar, written `MM-DD`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MonthDay {
    pub month: u8,
    pub day: u8,
}

impl MonthDay {
    pub fn new(month: u8, day: u8) -> Option<Self> {
        if !(1..=12).contains(&month) || day == 0 || day as u32 > MONTH_LENGTHS[month as usize - 1] {
            return None;
        }
        Some(Self { month, day })
    }

    pub fn ordinal0(&self) -> u32 {
        ordinal0(self.month as u32, self.day as u32)
    }
}

impl fmt::Display for MonthDay {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:02}-{:02}", self.month, self.day)
    }
}

impl FromStr for MonthDay {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (m, d) = s.split_once('-').ok_or_else(|| format!("expected MM-DD, got {s:?}"))?;
        let month = m.trim().parse::<u8>().map_err(|e| format!("{s:?}: {e}"))?;
        let day = d.trim().parse::<u8>().map_err(|e| format!("{s:?}: {e}"))?;
        MonthDay::new(month, day).ok_or_else(|| format!("{s:?} is not a day of a 365-day year"))
    }
}

impl Serialize for MonthDay {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for MonthDay {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Season {
    Heating,
    NonHeating,
}

impl Season {
    pub fn label(&self) -> &'static str {
        match self {
            Season::Heating => "heating",
            Season::NonHeating => "non_heating",
        }
    }
}

/// Heating-season intervals; both endpoints of each interval are heating days.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeasonCalendar {
    pub heating_intervals: Vec<(MonthDay, MonthDay)>,
}

impl Default for SeasonCalendar {
    /// Jan 1 – Apr 15 and Oct 15 – Dec 31.
    fn default() -> Self {
        Self {
            heating_intervals: vec![
                (MonthDay { month: 1, day: 1 }, MonthDay { month: 4, day: 15 }),
                (MonthDay { month: 10, day: 15 }, MonthDay { month: 12, day: 31 }),
            ],
        }
    }
}

impl SeasonCalendar {
    pub fn new(heating_intervals: Vec<(MonthDay, MonthDay)>) -> Result<Self, ScenarioError> {
        let mut sorted = heating_intervals.clone();
        sorted.sort();
        for (start, end) in &sorted {
            if start > end {
                return Err(ScenarioError::invalid(format!(
                    "heating interval {start}..{end} runs backwards (intervals may not wrap the year end)"
                )));
            }
        }
        for pair in sorted.windows(2) {
            if pair[1].0 <= pair[0].1 {
                return Err(ScenarioError::invalid(format!(
                    "heating intervals {}..{} and {}..{} overlap",
                    pair[0].0, pair[0].1, pair[1].0, pair[1].1
                )));
            }
        }
        Ok(Self { heating_intervals })
    }

    pub fn season_of_day(&self, day_of_year: u32) -> Season {
        let heating = self.heating_intervals.iter().any(|(s, e)| (s.ordinal0()..=e.ordinal0()).contains(&day_of_year));
        if heating {
            Season::Heating
        } else {
            Season::NonHeating
        }
    }

    /// Number of heating days in the 365-day year.
    pub fn heating_days(&self) -> u32 {
        (0..DAYS_PER_YEAR).filter(|d| self.season_of_day(*d) == Season::Heating).count() as u32
    }
}

/// Season of timestep `t` on `grid`.
pub fn season_of(grid: &TimeGrid, calendar: &SeasonCalendar, t: usize) -> Season {
    calendar.season_of_day(grid.position(t).day_of_year)
}
