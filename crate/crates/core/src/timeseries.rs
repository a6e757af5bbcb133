//! Time-domain metrics over daily series.
//!
//! Gaps are never filled: window statistics use whichever days have data and
//! report how many contributed.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::Serialize;
use thiserror::Error;

use crate::ingest::{NetworkKind, ProbeStatusRecord, RankRecord, ShareSeriesRecord, TrafficSeries};
use crate::model::{CountryCode, DailySeries, EventWindow, IntradaySeries, ModelError, YearMonth};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowSide {
    Pre,
    Post,
    Range,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SeriesError {
    #[error("series is empty")]
    EmptySeries,
    #[error("series maximum {0} is not positive")]
    NonPositiveMax(f64),
    #[error("series share no dates with a positive denominator")]
    EmptyIntersection,
    #[error("no data in the {0:?} window")]
    InsufficientData(WindowSide),
    #[error("pre-event mean is zero; percent change undefined")]
    ZeroBaseline,
    #[error("no {kind} rank for {country} in {month}")]
    MissingMonth {
        country: CountryCode,
        kind: NetworkKind,
        month: YearMonth,
    },
    #[error("no records match {country}/{metric}/{key}")]
    NoMatch {
        country: CountryCode,
        metric: String,
        key: String,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Mean level before and after an event.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WindowChange {
    pub pre_mean: f64,
    pub post_mean: f64,
    /// `100 · (post_mean − pre_mean) / pre_mean`
    pub percent_change: f64,
    pub pre_count: usize,
    pub post_count: usize,
}

/// Maximum of each UTC calendar day's samples.
pub fn daily_peak(intraday: &IntradaySeries) -> Result<DailySeries, SeriesError> {
    if intraday.is_empty() {
        return Err(SeriesError::EmptySeries);
    }
    let mut peaks: Vec<(NaiveDate, f64)> = Vec::new();
    for &(t, v) in intraday.points() {
        match peaks.last_mut() {
            Some((d, peak)) if *d == t.date() => *peak = peak.max(v),
            _ => peaks.push((t.date(), v)),
        }
    }
    Ok(DailySeries::new(intraday.name(), "daily peak", peaks)?)
}

/// Daily view of a traffic export, taking daily peaks of intraday data.
pub fn to_daily(series: &TrafficSeries) -> Result<DailySeries, SeriesError> {
    match series {
        TrafficSeries::Daily(s) => Ok(s.clone()),
        TrafficSeries::Intraday(s) => daily_peak(s),
    }
}

/// Divides every value by the series maximum.
pub fn normalize_max(series: &DailySeries) -> Result<DailySeries, SeriesError> {
    let max = series
        .values()
        .reduce(f64::max)
        .ok_or(SeriesError::EmptySeries)?;
    if max <= 0.0 {
        return Err(SeriesError::NonPositiveMax(max));
    }
    Ok(series.map_values(|v| v / max)?)
}

/// `numerator / denominator` on the dates both carry, skipping dates where the
/// denominator is not positive.
pub fn ratio_series(
    numerator: &DailySeries,
    denominator: &DailySeries,
) -> Result<DailySeries, SeriesError> {
    let points: Vec<(NaiveDate, f64)> = numerator
        .points()
        .iter()
        .filter_map(|&(d, n)| match denominator.get(d) {
            Some(den) if den > 0.0 => Some((d, n / den)),
            _ => None,
        })
        .collect();
    if points.is_empty() {
        return Err(SeriesError::EmptyIntersection);
    }
    let name = format!("{}/{}", numerator.name(), denominator.name());
    Ok(DailySeries::new(name, "ratio", points)?)
}

fn mean(points: &[(NaiveDate, f64)]) -> Option<f64> {
    if points.is_empty() {
        return None;
    }
    Some(points.iter().map(|p| p.1).sum::<f64>() / points.len() as f64)
}

pub fn window_change(
    series: &DailySeries,
    window: &EventWindow,
) -> Result<WindowChange, SeriesError> {
    let (pre_start, pre_end) = window.pre_range();
    let (post_start, post_end) = window.post_range();
    let pre = series.range(pre_start, pre_end);
    let post = series.range(post_start, post_end);
    let pre_mean = mean(pre).ok_or(SeriesError::InsufficientData(WindowSide::Pre))?;
    let post_mean = mean(post).ok_or(SeriesError::InsufficientData(WindowSide::Post))?;
    if pre_mean == 0.0 {
        return Err(SeriesError::ZeroBaseline);
    }
    Ok(WindowChange {
        pre_mean,
        post_mean,
        percent_change: 100.0 * (post_mean - pre_mean) / pre_mean,
        pre_count: pre.len(),
        post_count: post.len(),
    })
}

/// Arithmetic mean over the closed interval `[start, end]`.
pub fn mean_over(
    series: &DailySeries,
    start: NaiveDate,
    end: NaiveDate,
) -> Result<f64, SeriesError> {
    mean(series.range(start, end)).ok_or(SeriesError::InsufficientData(WindowSide::Range))
}

/// Smallest value over the closed interval `[start, end]`.
pub fn min_over(
    series: &DailySeries,
    start: NaiveDate,
    end: NaiveDate,
) -> Result<f64, SeriesError> {
    series
        .range(start, end)
        .iter()
        .map(|p| p.1)
        .reduce(f64::min)
        .ok_or(SeriesError::InsufficientData(WindowSide::Range))
}

/// Number of connected probes per date.
pub fn count_connected(records: &[ProbeStatusRecord]) -> DailySeries {
    let mut counts: BTreeMap<NaiveDate, u64> = BTreeMap::new();
    for r in records {
        let c = counts.entry(r.date).or_default();
        if r.connected {
            *c += 1;
        }
    }
    let points = counts.into_iter().map(|(d, c)| (d, c as f64)).collect();
    DailySeries::new("connected probes", "probes", points).expect("BTreeMap keys are ordered")
}

/// Rank change from one month to another: positive means the country moved
/// down the table.
pub fn rank_delta(
    records: &[RankRecord],
    country: CountryCode,
    kind: NetworkKind,
    from: YearMonth,
    to: YearMonth,
) -> Result<i64, SeriesError> {
    let rank_in = |month: YearMonth| {
        records
            .iter()
            .find(|r| r.country == country && r.network_kind == kind && r.month == month)
            .map(|r| r.rank as i64)
            .ok_or(SeriesError::MissingMonth {
                country,
                kind,
                month,
            })
    };
    Ok(rank_in(to)? - rank_in(from)?)
}

/// [`rank_delta`] for every network kind the country has records for.
pub fn rank_deltas(
    records: &[RankRecord],
    country: CountryCode,
    from: YearMonth,
    to: YearMonth,
) -> Result<Vec<(NetworkKind, i64)>, SeriesError> {
    let mut kinds: Vec<NetworkKind> = records
        .iter()
        .filter(|r| r.country == country)
        .map(|r| r.network_kind)
        .collect();
    kinds.sort();
    kinds.dedup();
    if kinds.is_empty() {
        return Err(SeriesError::MissingMonth {
            country,
            kind: NetworkKind::Fixed,
            month: from,
        });
    }
    kinds
        .into_iter()
        .map(|k| Ok((k, rank_delta(records, country, k, from, to)?)))
        .collect()
}

/// Date-ordered values of one `(country, metric, key)` selection.
pub fn share_trend(
    records: &[ShareSeriesRecord],
    country: CountryCode,
    metric: &str,
    key: &str,
) -> Result<DailySeries, SeriesError> {
    let points: Vec<(NaiveDate, f64)> = records
        .iter()
        .filter(|r| r.country == country && r.metric == metric && r.key == key)
        .map(|r| (r.date, r.value))
        .collect();
    if points.is_empty() {
        return Err(SeriesError::NoMatch {
            country,
            metric: metric.to_string(),
            key: key.to_string(),
        });
    }
    let name = format!("{country}/{metric}/{key}");
    Ok(DailySeries::from_unsorted(name, "fraction", points)?)
}
