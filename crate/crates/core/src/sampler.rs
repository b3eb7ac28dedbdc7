//! Picks one representative commit per yearly or monthly boundary.

use chrono::{DateTime, Datelike, NaiveDate, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::repo::CommitRef;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SampleError {
    #[error("no boundary date has a commit at or before it")]
    NoSamples,
    #[error("invalid sampling window {start}..={end}")]
    InvalidWindow { start: i32, end: i32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DateUnit {
    Year,
    Month,
}

impl std::fmt::Display for DateUnit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DateUnit::Year => "year",
            DateUnit::Month => "month",
        })
    }
}

/// Inclusive range of calendar years.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplingWindow {
    start_year: i32,
    end_year: i32,
}

impl SamplingWindow {
    pub fn new(start_year: i32, end_year: i32) -> Result<Self, SampleError> {
        let four_digits = 1000..=9999;
        if start_year > end_year
            || !four_digits.contains(&start_year)
            || !four_digits.contains(&end_year)
        {
            return Err(SampleError::InvalidWindow {
                start: start_year,
                end: end_year,
            });
        }
        Ok(SamplingWindow {
            start_year,
            end_year,
        })
    }

    pub fn start_year(&self) -> i32 {
        self.start_year
    }

    pub fn end_year(&self) -> i32 {
        self.end_year
    }
}

/// A boundary and the commit standing for the repository state on that day.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommitSample {
    pub boundary: NaiveDate,
    pub commit: CommitRef,
}

/// Jan 1 (or every month's 1st) of each year in the window, ascending.
pub fn boundary_dates(unit: DateUnit, window: SamplingWindow) -> Vec<NaiveDate> {
    let years = window.start_year..=window.end_year;
    match unit {
        DateUnit::Year => years
            .filter_map(|y| NaiveDate::from_ymd_opt(y, 1, 1))
            .collect(),
        DateUnit::Month => years
            .flat_map(|y| (1..=12).filter_map(move |m| NaiveDate::from_ymd_opt(y, m, 1)))
            .collect(),
    }
}

/// The last five calendar years, ending with the year of `today`.
pub fn default_window(today: NaiveDate) -> SamplingWindow {
    let end = today.year();
    SamplingWindow {
        start_year: end - 4,
        end_year: end,
    }
}

/// First instant after the boundary day, UTC. A commit belongs to the
/// boundary's snapshot iff its committer date is strictly before this.
fn day_after(boundary: NaiveDate) -> DateTime<Utc> {
    boundary
        .succ_opt()
        .unwrap_or(NaiveDate::MAX)
        .and_hms_opt(0, 0, 0)
        .expect("midnight is valid")
        .and_utc()
}

/// For each boundary, the last commit committed at or before the end of that
/// day (UTC). `commits` must be ascending by committer date, as returned by
/// `list_commits`. Boundaries before the first commit get no sample; quiet
/// periods repeat the previous commit.
pub fn sample(
    commits: &[CommitRef],
    boundaries: &[NaiveDate],
) -> Result<Vec<CommitSample>, SampleError> {
    debug_assert!(commits
        .windows(2)
        .all(|w| w[0].committer_utc() <= w[1].committer_utc()));
    let samples: Vec<CommitSample> = boundaries
        .iter()
        .filter_map(|&boundary| {
            let cutoff = day_after(boundary);
            let eligible = commits.partition_point(|c| c.committer_utc() < cutoff);
            eligible.checked_sub(1).map(|idx| CommitSample {
                boundary,
                commit: commits[idx].clone(),
            })
        })
        .collect();
    if samples.is_empty() {
        Err(SampleError::NoSamples)
    } else {
        Ok(samples)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    fn d(y: i32, m: u32, day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, day).unwrap()
    }

    fn commit_at(hash: &str, ts: DateTime<chrono::FixedOffset>) -> CommitRef {
        CommitRef {
            hash: hash.to_string(),
            committer_date: ts,
            author_date: ts,
        }
    }

    fn utc(y: i32, m: u32, day: u32) -> DateTime<chrono::FixedOffset> {
        Utc.with_ymd_and_hms(y, m, day, 12, 0, 0)
            .unwrap()
            .fixed_offset()
    }

    #[test]
    fn yearly_boundaries() {
        let w = SamplingWindow::new(2020, 2022).unwrap();
        assert_eq!(
            boundary_dates(DateUnit::Year, w),
            vec![d(2020, 1, 1), d(2021, 1, 1), d(2022, 1, 1)]
        );
        let single = SamplingWindow::new(2021, 2021).unwrap();
        assert_eq!(boundary_dates(DateUnit::Year, single), vec![d(2021, 1, 1)]);
    }

    #[test]
    fn monthly_boundaries() {
        let w = SamplingWindow::new(2024, 2024).unwrap();
        let b = boundary_dates(DateUnit::Month, w);
        assert_eq!(b.len(), 12);
        assert_eq!(b[0], d(2024, 1, 1));
        assert_eq!(b[11], d(2024, 12, 1));
        assert!(b.windows(2).all(|p| p[0] < p[1]));
    }

    #[test]
    fn window_validation() {
        assert!(SamplingWindow::new(2022, 2020).is_err());
        assert!(SamplingWindow::new(999, 2020).is_err());
        assert!(SamplingWindow::new(2020, 2020).is_ok());
    }

    #[test]
    fn default_window_is_last_five_years() {
        assert_eq!(
            default_window(d(2025, 6, 15)),
            SamplingWindow::new(2021, 2025).unwrap()
        );
        assert_eq!(
            default_window(d(2025, 1, 1)),
            SamplingWindow::new(2021, 2025).unwrap()
        );
        assert_eq!(
            default_window(d(2000, 12, 31)),
            SamplingWindow::new(1996, 2000).unwrap()
        );
        let years = boundary_dates(DateUnit::Year, default_window(d(2025, 6, 15)));
        assert_eq!(years.len(), 5);
        assert_eq!(years.last(), Some(&d(2025, 1, 1)));
    }

    #[test]
    fn at_or_before_rule() {
        let c1 = commit_at("a", utc(2020, 6, 1));
        let c2 = commit_at("b", utc(2021, 2, 1));
        let got = sample(&[c1.clone(), c2.clone()], &[d(2021, 1, 1), d(2022, 1, 1)]).unwrap();
        assert_eq!(got.len(), 2);
        assert_eq!(got[0].commit, c1);
        assert_eq!(got[1].commit, c2);
    }

    #[test]
    fn all_boundaries_before_history() {
        let c = commit_at("a", utc(2023, 5, 1));
        assert_eq!(
            sample(&[c], &[d(2021, 1, 1), d(2022, 1, 1)]),
            Err(SampleError::NoSamples)
        );
    }

    #[test]
    fn boundary_day_is_inclusive_in_utc() {
        // 23:30 on Jan 1 in UTC-5 is already Jan 2 in UTC.
        let tz = chrono::FixedOffset::west_opt(5 * 3600).unwrap();
        let late_local = commit_at("late", tz.with_ymd_and_hms(2021, 1, 1, 23, 30, 0).unwrap());
        let same_day = commit_at(
            "early",
            Utc.with_ymd_and_hms(2021, 1, 1, 23, 59, 59)
                .unwrap()
                .fixed_offset(),
        );
        let mut commits = vec![same_day.clone(), late_local];
        commits.sort_by_key(|c| c.committer_utc());
        let got = sample(&commits, &[d(2021, 1, 1)]).unwrap();
        assert_eq!(got[0].commit, same_day);
    }

    #[test]
    fn quiet_periods_repeat_the_commit() {
        let c = commit_at("a", utc(2019, 3, 1));
        let got = sample(
            std::slice::from_ref(&c),
            &[d(2020, 1, 1), d(2021, 1, 1), d(2022, 1, 1)],
        )
        .unwrap();
        assert_eq!(got.len(), 3);
        assert!(got.iter().all(|s| s.commit == c));
    }
}
