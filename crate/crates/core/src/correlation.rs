//! Alignment between border-crossing flows and measurement series.

use std::collections::BTreeMap;

use chrono::{Duration, NaiveDate};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::ingest::FlowRecord;
use crate::model::DailySeries;

/// Fewest common dates a correlation is computed over.
pub const MIN_OVERLAP: usize = 3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CorrelationError {
    #[error("only {0} common dates, need at least {MIN_OVERLAP}")]
    InsufficientOverlap(usize),
    #[error("series is constant over the common dates")]
    ConstantSeries,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CorrelationResult {
    pub r: f64,
    pub n: usize,
    pub lag_days: i64,
}

/// Pearson correlation between `a(t)` and `b(t + lag_days)`.
///
/// A positive lag pairs each day of `a` with a later day of `b`, so a peak in
/// `r` at lag `k > 0` means `b` trails `a` by `k` days.
pub fn pearson(
    a: &DailySeries,
    b: &DailySeries,
    lag_days: i64,
) -> Result<CorrelationResult, CorrelationError> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = a
        .points()
        .iter()
        .filter_map(|&(d, x)| b.get(d + Duration::days(lag_days)).map(|y| (x, y)))
        .unzip();
    let n = xs.len();
    if n < MIN_OVERLAP {
        return Err(CorrelationError::InsufficientOverlap(n));
    }
    let constant = |v: &[f64]| v.iter().all(|&x| x == v[0]);
    if constant(&xs) || constant(&ys) {
        return Err(CorrelationError::ConstantSeries);
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (mx, my) = (mean(&xs), mean(&ys));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(&ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(CorrelationError::ConstantSeries);
    }
    Ok(CorrelationResult {
        r: (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0),
        n,
        lag_days,
    })
}

/// [`pearson`] at every lag in `lags`, in order.
pub fn lag_sweep(
    a: &DailySeries,
    b: &DailySeries,
    lags: std::ops::RangeInclusive<i64>,
) -> Vec<(i64, Result<CorrelationResult, CorrelationError>)> {
    lags.into_par_iter()
        .map(|lag| (lag, pearson(a, b, lag)))
        .collect()
}

/// Total individuals per date over all destinations.
pub fn aggregate_flow(flows: &[FlowRecord]) -> DailySeries {
    let mut totals: BTreeMap<NaiveDate, u64> = BTreeMap::new();
    for f in flows {
        *totals.entry(f.date).or_default() += f.individuals;
    }
    let points = totals.into_iter().map(|(d, n)| (d, n as f64)).collect();
    DailySeries::new("individuals crossing", "persons", points).expect("BTreeMap keys are ordered")
}

/// Running sum in date order.
pub fn cumulative(series: &DailySeries) -> DailySeries {
    let mut acc = 0.0;
    let points = series
        .points()
        .iter()
        .map(|&(d, v)| {
            acc += v;
            (d, acc)
        })
        .collect();
    DailySeries::new(
        format!("cumulative {}", series.name()),
        series.unit(),
        points,
    )
    .expect("dates copied from a valid series")
}
