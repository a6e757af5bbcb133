//! Shared domain types.
//!
//! Every type here validates its invariants on construction and is immutable
//! afterwards. Fractions are always stored on the unit interval; percentages
//! are converted by the parsers before they reach these types.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use chrono::{NaiveDate, NaiveDateTime};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Tolerance used when checking that fractions sum to one.
pub const SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid country code {0:?}: expected two uppercase letters")]
    InvalidCountry(String),
    #[error("site lists differ at index {0}")]
    PairingMismatch(usize),
    #[error("invalid fraction {value} for site {site:?}: {reason}")]
    InvalidFraction {
        site: String,
        value: f64,
        reason: &'static str,
    },
    #[error("share matrix row {row} sums to {sum}, expected 1")]
    RowSum { row: usize, sum: f64 },
    #[error("shape error: {0}")]
    Shape(String),
    #[error("volume for site {site:?} must be strictly positive and finite, got {value}")]
    NonPositiveVolume { site: String, value: f64 },
    #[error("presence estimate sums to {0}, expected 1")]
    EstimateSum(f64),
    #[error("series {name:?}: {reason}")]
    Series { name: String, reason: String },
    #[error("event window lengths must be at least one day")]
    EmptyWindow,
}

/// ISO 3166-1 alpha-2 country code, or `ZZ` for the rest-of-world bucket.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CountryCode([u8; 2]);

impl CountryCode {
    /// Pseudo-country absorbing visit mass not attributed to a listed country.
    pub const REST: CountryCode = CountryCode(*b"ZZ");

    pub fn new(code: &str) -> Result<Self, ModelError> {
        match code.as_bytes() {
            [a, b] if a.is_ascii_uppercase() && b.is_ascii_uppercase() => Ok(CountryCode([*a, *b])),
            _ => Err(ModelError::InvalidCountry(code.to_string())),
        }
    }

    pub fn is_rest(&self) -> bool {
        *self == Self::REST
    }

    pub fn as_str(&self) -> &str {
        // Both bytes are ASCII uppercase by construction.
        std::str::from_utf8(&self.0).expect("ascii country code")
    }
}

impl FromStr for CountryCode {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        CountryCode::new(s)
    }
}

impl fmt::Display for CountryCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Debug for CountryCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CountryCode({})", self.as_str())
    }
}

impl Serialize for CountryCode {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for CountryCode {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        CountryCode::new(&s).map_err(serde::de::Error::custom)
    }
}

/// Per-site distribution of visits over countries.
///
/// Row `j` holds the share of site `j`'s visits that came from each country
/// column. Rows sum to one; the `ZZ` column carries whatever the source did
/// not attribute to a listed country.
#[derive(Debug, Clone, PartialEq)]
pub struct ShareMatrix {
    sites: Vec<String>,
    countries: Vec<CountryCode>,
    shares: Vec<Vec<f64>>,
}

impl ShareMatrix {
    pub fn new(
        sites: Vec<String>,
        countries: Vec<CountryCode>,
        shares: Vec<Vec<f64>>,
    ) -> Result<Self, ModelError> {
        if sites.is_empty() || countries.is_empty() {
            return Err(ModelError::Shape(
                "need at least one site and one country".into(),
            ));
        }
        if !countries.contains(&CountryCode::REST) {
            return Err(ModelError::Shape("country list must include ZZ".into()));
        }
        let distinct: BTreeSet<_> = countries.iter().collect();
        if distinct.len() != countries.len() {
            return Err(ModelError::Shape("duplicate country column".into()));
        }
        if shares.len() != sites.len() {
            return Err(ModelError::Shape(format!(
                "{} rows for {} sites",
                shares.len(),
                sites.len()
            )));
        }
        for (row_idx, (site, row)) in sites.iter().zip(&shares).enumerate() {
            if row.len() != countries.len() {
                return Err(ModelError::Shape(format!(
                    "row {row_idx} has {} entries for {} countries",
                    row.len(),
                    countries.len()
                )));
            }
            for &v in row {
                if !(0.0..=1.0).contains(&v) {
                    return Err(ModelError::InvalidFraction {
                        site: site.clone(),
                        value: v,
                        reason: "outside [0, 1]",
                    });
                }
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > SUM_TOLERANCE {
                return Err(ModelError::RowSum { row: row_idx, sum });
            }
        }
        Ok(ShareMatrix {
            sites,
            countries,
            shares,
        })
    }

    pub fn sites(&self) -> &[String] {
        &self.sites
    }

    pub fn countries(&self) -> &[CountryCode] {
        &self.countries
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.shares
    }

    pub fn row(&self, site: usize) -> &[f64] {
        &self.shares[site]
    }

    pub fn num_sites(&self) -> usize {
        self.sites.len()
    }

    pub fn num_countries(&self) -> usize {
        self.countries.len()
    }

    pub fn country_index(&self, country: CountryCode) -> Option<usize> {
        self.countries.iter().position(|&c| c == country)
    }

    /// Each row as a country → fraction map, the inverse of [`rebucket`].
    pub fn to_maps(&self) -> Vec<BTreeMap<CountryCode, f64>> {
        self.shares
            .iter()
            .map(|row| {
                self.countries
                    .iter()
                    .copied()
                    .zip(row.iter().copied())
                    .collect()
            })
            .collect()
    }
}

/// Monthly visit totals per site.
#[derive(Debug, Clone, PartialEq)]
pub struct VolumeVector {
    sites: Vec<String>,
    volumes: Vec<f64>,
}

impl VolumeVector {
    pub fn new(sites: Vec<String>, volumes: Vec<f64>) -> Result<Self, ModelError> {
        if sites.is_empty() {
            return Err(ModelError::Shape("need at least one site".into()));
        }
        if sites.len() != volumes.len() {
            return Err(ModelError::Shape(format!(
                "{} volumes for {} sites",
                volumes.len(),
                sites.len()
            )));
        }
        for (site, &v) in sites.iter().zip(&volumes) {
            if !(v.is_finite() && v > 0.0) {
                return Err(ModelError::NonPositiveVolume {
                    site: site.clone(),
                    value: v,
                });
            }
        }
        Ok(VolumeVector { sites, volumes })
    }

    pub fn sites(&self) -> &[String] {
        &self.sites
    }

    pub fn volumes(&self) -> &[f64] {
        &self.volumes
    }

    pub fn total(&self) -> f64 {
        self.volumes.iter().sum()
    }

    /// Same sites with every volume multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self, ModelError> {
        VolumeVector::new(
            self.sites.clone(),
            self.volumes.iter().map(|v| v * factor).collect(),
        )
    }
}

/// Checks that a share matrix and a volume vector describe the same sites in
/// the same order.
pub fn validate_pairing(shares: &ShareMatrix, volumes: &VolumeVector) -> Result<(), ModelError> {
    let (a, b) = (shares.sites(), volumes.sites());
    if let Some(idx) = a.iter().zip(b).position(|(x, y)| x != y) {
        return Err(ModelError::PairingMismatch(idx));
    }
    if a.len() != b.len() {
        return Err(ModelError::PairingMismatch(a.len().min(b.len())));
    }
    Ok(())
}

/// Builds a complete share matrix from per-site maps that may list only the
/// top countries.
///
/// Columns are the union of listed countries in code order, followed by `ZZ`.
/// Each site's unlisted remainder `1 - Σ listed` is added to its `ZZ` entry
/// (an explicit `ZZ` key in the input counts as listed).
pub fn rebucket(
    sites: Vec<String>,
    raw: &[BTreeMap<CountryCode, f64>],
) -> Result<ShareMatrix, ModelError> {
    if sites.len() != raw.len() {
        return Err(ModelError::Shape(format!(
            "{} share maps for {} sites",
            raw.len(),
            sites.len()
        )));
    }
    let mut columns: Vec<CountryCode> = raw
        .iter()
        .flat_map(|m| m.keys().copied())
        .filter(|c| !c.is_rest())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    columns.push(CountryCode::REST);
    let rest = columns.len() - 1;

    let mut rows = Vec::with_capacity(raw.len());
    for (site, map) in sites.iter().zip(raw) {
        let mut row = vec![0.0; columns.len()];
        let mut listed = 0.0;
        for (&country, &value) in map {
            if !(0.0..=1.0).contains(&value) {
                return Err(ModelError::InvalidFraction {
                    site: site.clone(),
                    value,
                    reason: "outside [0, 1]",
                });
            }
            let idx = if country.is_rest() {
                rest
            } else {
                columns.binary_search(&country).expect("column from union")
            };
            row[idx] += value;
            listed += value;
        }
        if listed > 1.0 + SUM_TOLERANCE {
            return Err(ModelError::InvalidFraction {
                site: site.clone(),
                value: listed,
                reason: "site shares sum above 1",
            });
        }
        row[rest] = (row[rest] + (1.0 - listed)).clamp(0.0, 1.0);
        rows.push(row);
    }
    ShareMatrix::new(sites, columns, rows)
}

/// Estimated proportion of the tracked population per country.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PresenceEstimate {
    countries: Vec<CountryCode>,
    p_hat: Vec<f64>,
    stdev: Vec<f64>,
    binomial_stderr: Vec<f64>,
    total_population: Option<f64>,
    absolute: Option<Vec<f64>>,
}

impl PresenceEstimate {
    pub fn new(
        countries: Vec<CountryCode>,
        p_hat: Vec<f64>,
        stdev: Vec<f64>,
        binomial_stderr: Vec<f64>,
    ) -> Result<Self, ModelError> {
        let n = countries.len();
        if n == 0 || p_hat.len() != n || stdev.len() != n || binomial_stderr.len() != n {
            return Err(ModelError::Shape(
                "estimate vectors must match the country list".into(),
            ));
        }
        if let Some(&bad) = p_hat.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(ModelError::EstimateSum(bad));
        }
        let sum: f64 = p_hat.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(ModelError::EstimateSum(sum));
        }
        if stdev
            .iter()
            .chain(&binomial_stderr)
            .any(|s| !(s.is_finite() && *s >= 0.0))
        {
            return Err(ModelError::Shape(
                "uncertainties must be nonnegative".into(),
            ));
        }
        Ok(PresenceEstimate {
            countries,
            p_hat,
            stdev,
            binomial_stderr,
            total_population: None,
            absolute: None,
        })
    }

    pub fn countries(&self) -> &[CountryCode] {
        &self.countries
    }

    pub fn p_hat(&self) -> &[f64] {
        &self.p_hat
    }

    /// Volume-weighted cross-site standard deviation.
    pub fn stdev(&self) -> &[f64] {
        &self.stdev
    }

    /// Classical multinomial standard error, a secondary diagnostic.
    pub fn binomial_stderr(&self) -> &[f64] {
        &self.binomial_stderr
    }

    pub fn total_population(&self) -> Option<f64> {
        self.total_population
    }

    pub fn absolute(&self) -> Option<&[f64]> {
        self.absolute.as_deref()
    }

    pub fn get(&self, country: CountryCode) -> Option<f64> {
        self.countries
            .iter()
            .position(|&c| c == country)
            .map(|i| self.p_hat[i])
    }

    pub(crate) fn with_population(mut self, total: f64) -> Self {
        self.absolute = Some(
            self.p_hat
                .iter()
                .map(|p| round_sig(p * total, 15))
                .collect(),
        );
        self.total_population = Some(total);
        self
    }
}

/// Rounds to `digits` significant decimal digits.
///
/// Products of decimal inputs such as `0.0203 * 5e7` land one ulp off the
/// decimal result; 15 digits is the precision every f64 round-trips through.
pub fn round_sig(value: f64, digits: usize) -> f64 {
    if value == 0.0 || !value.is_finite() {
        return value;
    }
    format!("{:.*e}", digits.saturating_sub(1), value)
        .parse()
        .unwrap_or(value)
}

/// Date-indexed scalar series. Dates are UTC calendar days, strictly
/// increasing; missing days are simply absent.
#[derive(Debug, Clone, PartialEq)]
pub struct DailySeries {
    name: String,
    unit: String,
    points: Vec<(NaiveDate, f64)>,
}

impl DailySeries {
    pub fn new(
        name: impl Into<String>,
        unit: impl Into<String>,
        points: Vec<(NaiveDate, f64)>,
    ) -> Result<Self, ModelError> {
        let name = name.into();
        for w in points.windows(2) {
            if w[0].0 >= w[1].0 {
                return Err(ModelError::Series {
                    name,
                    reason: format!("dates not strictly increasing at {}", w[1].0),
                });
            }
        }
        if let Some((d, v)) = points.iter().find(|(_, v)| !v.is_finite()) {
            return Err(ModelError::Series {
                name,
                reason: format!("non-finite value {v} on {d}"),
            });
        }
        Ok(DailySeries {
            name,
            unit: unit.into(),
            points,
        })
    }

    /// Sorts `points` by date before validating.
    pub fn from_unsorted(
        name: impl Into<String>,
        unit: impl Into<String>,
        mut points: Vec<(NaiveDate, f64)>,
    ) -> Result<Self, ModelError> {
        points.sort_by_key(|p| p.0);
        DailySeries::new(name, unit, points)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn unit(&self) -> &str {
        &self.unit
    }

    pub fn points(&self) -> &[(NaiveDate, f64)] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(|p| p.1)
    }

    pub fn get(&self, date: NaiveDate) -> Option<f64> {
        self.points
            .binary_search_by_key(&date, |p| p.0)
            .ok()
            .map(|i| self.points[i].1)
    }

    /// Points whose date falls in the closed interval `[start, end]`.
    pub fn range(&self, start: NaiveDate, end: NaiveDate) -> &[(NaiveDate, f64)] {
        let lo = self.points.partition_point(|p| p.0 < start);
        let hi = self.points.partition_point(|p| p.0 <= end);
        &self.points[lo..hi.max(lo)]
    }

    /// Applies `f` to every value, keeping dates, name and unit.
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> Result<Self, ModelError> {
        DailySeries::new(
            self.name.clone(),
            self.unit.clone(),
            self.points.iter().map(|&(d, v)| (d, f(v))).collect(),
        )
    }
}

/// Calendar month, written `YYYY-MM`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct YearMonth {
    year: i32,
    month: u32,
}

impl YearMonth {
    pub fn new(year: i32, month: u32) -> Result<Self, ModelError> {
        if !(1..=12).contains(&month) || !(0..=9999).contains(&year) {
            return Err(ModelError::Shape(format!("invalid month {year}-{month}")));
        }
        Ok(YearMonth { year, month })
    }

    pub fn year(&self) -> i32 {
        self.year
    }

    pub fn month(&self) -> u32 {
        self.month
    }
}

impl FromStr for YearMonth {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ModelError::Shape(format!("invalid month {s:?}, expected YYYY-MM"));
        let (y, m) = s.split_once('-').ok_or_else(bad)?;
        if y.len() != 4 || m.len() != 2 || !y.bytes().chain(m.bytes()).all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        YearMonth::new(y.parse().map_err(|_| bad())?, m.parse().map_err(|_| bad())?)
    }
}

impl fmt::Display for YearMonth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

/// Timestamped series with possibly several samples per day, timestamps in
/// UTC and strictly increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct IntradaySeries {
    name: String,
    points: Vec<(NaiveDateTime, f64)>,
}

impl IntradaySeries {
    pub fn new(
        name: impl Into<String>,
        mut points: Vec<(NaiveDateTime, f64)>,
    ) -> Result<Self, ModelError> {
        let name = name.into();
        points.sort_by_key(|p| p.0);
        if let Some(w) = points.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(ModelError::Series {
                name,
                reason: format!("duplicate timestamp {}", w[0].0),
            });
        }
        if let Some((t, v)) = points.iter().find(|(_, v)| !v.is_finite()) {
            return Err(ModelError::Series {
                name,
                reason: format!("non-finite value {v} at {t}"),
            });
        }
        Ok(IntradaySeries { name, points })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn points(&self) -> &[(NaiveDateTime, f64)] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Event date with the lengths of the comparison windows around it.
///
/// The pre window is `[event - pre_days, event - 1]`; the post window starts
/// on the event date itself: `[event, event + post_days - 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EventWindow {
    event_date: NaiveDate,
    pre_days: u32,
    post_days: u32,
}

impl EventWindow {
    pub fn new(event_date: NaiveDate, pre_days: u32, post_days: u32) -> Result<Self, ModelError> {
        if pre_days == 0 || post_days == 0 {
            return Err(ModelError::EmptyWindow);
        }
        Ok(EventWindow {
            event_date,
            pre_days,
            post_days,
        })
    }

    pub fn event_date(&self) -> NaiveDate {
        self.event_date
    }

    pub fn pre_days(&self) -> u32 {
        self.pre_days
    }

    pub fn post_days(&self) -> u32 {
        self.post_days
    }

    pub fn pre_range(&self) -> (NaiveDate, NaiveDate) {
        let d = self.event_date;
        (
            d - chrono::Duration::days(self.pre_days as i64),
            d - chrono::Duration::days(1),
        )
    }

    pub fn post_range(&self) -> (NaiveDate, NaiveDate) {
        let d = self.event_date;
        (d, d + chrono::Duration::days(self.post_days as i64 - 1))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cc(s: &str) -> CountryCode {
        s.parse().unwrap()
    }

    fn one_site(map: &[(&str, f64)]) -> Result<ShareMatrix, ModelError> {
        let m: BTreeMap<_, _> = map.iter().map(|&(c, v)| (cc(c), v)).collect();
        rebucket(vec!["s".into()], &[m])
    }

    #[test]
    fn country_codes() {
        assert!(CountryCode::new("PL").is_ok());
        assert!(CountryCode::new("ZZ").unwrap().is_rest());
        for bad in ["pl", "P", "POL", "P1", "", "ÜA"] {
            assert!(CountryCode::new(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn pairing() {
        let m = one_site(&[("PL", 0.5)]).unwrap();
        let ok = VolumeVector::new(vec!["s".into()], vec![1.0]).unwrap();
        assert!(validate_pairing(&m, &ok).is_ok());

        let ab = rebucket(
            vec!["a".into(), "b".into()],
            &[BTreeMap::new(), BTreeMap::new()],
        )
        .unwrap();
        let ba = VolumeVector::new(vec!["b".into(), "a".into()], vec![1.0, 1.0]).unwrap();
        assert_eq!(
            validate_pairing(&ab, &ba),
            Err(ModelError::PairingMismatch(0))
        );

        let abc =
            VolumeVector::new(vec!["a".into(), "b".into(), "c".into()], vec![1.0; 3]).unwrap();
        assert_eq!(
            validate_pairing(&ab, &abc),
            Err(ModelError::PairingMismatch(2))
        );
    }

    #[test]
    fn rebucket_residual_goes_to_rest() {
        let m = one_site(&[("DE", 0.0484)]).unwrap();
        assert_eq!(m.countries(), &[cc("DE"), CountryCode::REST]);
        assert_eq!(m.row(0)[0], 0.0484);
        assert!((m.row(0)[1] - 0.9516).abs() < 1e-15);

        let m = one_site(&[("PL", 1.0)]).unwrap();
        assert_eq!(m.row(0), &[1.0, 0.0]);
    }

    #[test]
    fn rebucket_rejects_bad_fractions() {
        assert!(matches!(
            one_site(&[("PL", 0.7), ("DE", 0.5)]),
            Err(ModelError::InvalidFraction { .. })
        ));
        assert!(matches!(
            one_site(&[("PL", -0.1)]),
            Err(ModelError::InvalidFraction { .. })
        ));
        assert!(matches!(
            one_site(&[("PL", f64::NAN)]),
            Err(ModelError::InvalidFraction { .. })
        ));
    }

    #[test]
    fn share_matrix_requires_rest_column() {
        let err = ShareMatrix::new(vec!["s".into()], vec![cc("PL")], vec![vec![1.0]]);
        assert!(matches!(err, Err(ModelError::Shape(_))));
    }

    #[test]
    fn estimate_must_sum_to_one() {
        let c = vec![cc("PL"), CountryCode::REST];
        assert!(
            PresenceEstimate::new(c.clone(), vec![0.3, 0.7], vec![0.0; 2], vec![0.0; 2]).is_ok()
        );
        assert!(matches!(
            PresenceEstimate::new(c, vec![0.3, 0.6], vec![0.0; 2], vec![0.0; 2]),
            Err(ModelError::EstimateSum(_))
        ));
    }

    #[test]
    fn series_validation() {
        let d = |s: &str| s.parse::<NaiveDate>().unwrap();
        assert!(DailySeries::new(
            "x",
            "",
            vec![(d("2022-01-02"), 1.0), (d("2022-01-01"), 1.0)]
        )
        .is_err());
        assert!(DailySeries::new(
            "x",
            "",
            vec![(d("2022-01-01"), 1.0), (d("2022-01-01"), 1.0)]
        )
        .is_err());
        assert!(DailySeries::new("x", "", vec![(d("2022-01-01"), f64::INFINITY)]).is_err());
        let s = DailySeries::from_unsorted(
            "x",
            "",
            vec![(d("2022-01-03"), 3.0), (d("2022-01-01"), 1.0)],
        )
        .unwrap();
        assert_eq!(
            s.range(d("2022-01-02"), d("2022-01-05")),
            &[(d("2022-01-03"), 3.0)]
        );
        assert!(s.range(d("2022-01-05"), d("2022-01-02")).is_empty());
    }

    #[test]
    fn year_month_parsing() {
        let m: YearMonth = "2022-03".parse().unwrap();
        assert_eq!((m.year(), m.month()), (2022, 3));
        assert_eq!(m.to_string(), "2022-03");
        for bad in [
            "2022-13",
            "2022-3",
            "22-03",
            "2022/03",
            "2022-00",
            "2022-03-01",
        ] {
            assert!(bad.parse::<YearMonth>().is_err(), "{bad}");
        }
        assert!("2022-02".parse::<YearMonth>().unwrap() < m);
    }

    #[test]
    fn event_window_ranges() {
        let d = |s: &str| s.parse::<NaiveDate>().unwrap();
        let w = EventWindow::new(d("2022-02-24"), 14, 14).unwrap();
        assert_eq!(w.pre_range(), (d("2022-02-10"), d("2022-02-23")));
        assert_eq!(w.post_range(), (d("2022-02-24"), d("2022-03-09")));
        assert_eq!(
            EventWindow::new(d("2022-02-24"), 0, 1),
            Err(ModelError::EmptyWindow)
        );
    }

    fn raw_maps() -> impl Strategy<Value = Vec<BTreeMap<CountryCode, f64>>> {
        let codes = ["DE", "PL", "US", "RU", "CZ", "FR", "NL", "UA"];
        let site = proptest::collection::btree_map(
            proptest::sample::select(codes.to_vec()).prop_map(cc),
            0.0f64..1.0,
            0..6,
        )
        .prop_map(|m| {
            let sum: f64 = m.values().sum();
            if sum > 1.0 {
                m.into_iter().map(|(k, v)| (k, v / sum)).collect()
            } else {
                m
            }
        });
        proptest::collection::vec(site, 1..6)
    }

    proptest! {
        #[test]
        fn rebucket_rows_sum_to_one(maps in raw_maps()) {
            let sites = (0..maps.len()).map(|i| format!("s{i}")).collect();
            let m = rebucket(sites, &maps).unwrap();
            for row in m.rows() {
                prop_assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
            }
        }

        #[test]
        fn rebucket_is_idempotent(maps in raw_maps()) {
            let sites: Vec<String> = (0..maps.len()).map(|i| format!("s{i}")).collect();
            let once = rebucket(sites.clone(), &maps).unwrap();
            let twice = rebucket(sites, &once.to_maps()).unwrap();
            prop_assert_eq!(once.countries(), twice.countries());
            for (a, b) in once.rows().iter().zip(twice.rows()) {
                for (x, y) in a.iter().zip(b) {
                    prop_assert!((x - y).abs() <= 1e-12);
                }
            }
        }
    }
}
