//! Parsers and writers for the on-disk exports of each data source.
//!
//! | file                  | header / shape                          |
//! |-----------------------|-----------------------------------------|
//! | `flows.csv`           | `date,country,individuals`              |
//! | `probes.csv`          | `probe_id,date,connected`               |
//! | `share_series.csv`    | `date,country,metric,key,value`         |
//! | `traffic.csv`         | `timestamp,value`                       |
//! | `ranks.csv`           | `country,month,kind,rank`               |
//! | `site_analytics.json` | `[{site, monthly_visits, shares}, ...]` |
//!
//! All parsers return records in a fixed order that does not depend on the
//! input row order, and report failures with the 1-based line (CSV) or
//! element index (JSON) where they occurred. Writers emit the same formats,
//! with decimals rounded to nine significant digits.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, NaiveDate, NaiveDateTime, NaiveTime};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    rebucket, round_sig, CountryCode, DailySeries, IntradaySeries, ModelError, ShareMatrix,
    VolumeVector, YearMonth,
};

/// Significant digits used for every decimal written to disk.
pub const OUTPUT_DIGITS: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Location {
    Line(usize),
    Element(usize),
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Location::Line(n) => write!(f, "line {n}"),
            Location::Element(n) => write!(f, "element {n}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IngestError {
    #[error("{location}: {reason}")]
    Parse { location: Location, reason: String },
    #[error("{location}: duplicate key {key}")]
    DuplicateKey { location: Location, key: String },
    #[error("{location}: value {value} outside [0, 1]")]
    OutOfRange { location: Location, value: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("every site was excluded")]
    EmptySelection,
}

impl IngestError {
    fn parse(location: Location, reason: impl Into<String>) -> Self {
        IngestError::Parse {
            location,
            reason: reason.into(),
        }
    }
}

/// Options applied while parsing.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ParseOptions {
    /// Incoming share values are percentages and are divided by 100.
    pub percent: bool,
}

impl ParseOptions {
    fn scale(&self, v: f64) -> f64 {
        if self.percent {
            v / 100.0
        } else {
            v
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowRecord {
    pub date: NaiveDate,
    pub destination: CountryCode,
    pub individuals: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProbeStatusRecord {
    pub probe_id: u64,
    pub date: NaiveDate,
    pub connected: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum NetworkKind {
    Fixed,
    Mobile,
}

impl NetworkKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            NetworkKind::Fixed => "fixed",
            NetworkKind::Mobile => "mobile",
        }
    }
}

impl FromStr for NetworkKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fixed" => Ok(NetworkKind::Fixed),
            "mobile" => Ok(NetworkKind::Mobile),
            other => Err(format!("unknown network kind {other:?}")),
        }
    }
}

impl fmt::Display for NetworkKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankRecord {
    pub country: CountryCode,
    pub month: YearMonth,
    pub network_kind: NetworkKind,
    pub rank: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShareSeriesRecord {
    pub date: NaiveDate,
    pub country: CountryCode,
    pub metric: String,
    pub key: String,
    pub value: f64,
}

/// One entry of a site-analytics export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteEntry {
    pub site: String,
    pub monthly_visits: f64,
    pub shares: BTreeMap<CountryCode, f64>,
}

/// Parsed `traffic.csv`: daily when every timestamp is a bare date.
#[derive(Debug, Clone, PartialEq)]
pub enum TrafficSeries {
    Daily(DailySeries),
    Intraday(IntradaySeries),
}

impl TrafficSeries {
    pub fn len(&self) -> usize {
        match self {
            TrafficSeries::Daily(s) => s.len(),
            TrafficSeries::Intraday(s) => s.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Decimal text with [`OUTPUT_DIGITS`] significant digits, shortest form.
pub fn format_value(v: f64) -> String {
    let r = round_sig(v, OUTPUT_DIGITS);
    if r == 0.0 {
        // Avoid "-0".
        "0".to_string()
    } else {
        r.to_string()
    }
}

struct Row {
    line: usize,
    fields: Vec<String>,
}

impl Row {
    fn loc(&self) -> Location {
        Location::Line(self.line)
    }

    fn field<T: FromStr>(&self, idx: usize, what: &str) -> Result<T, IngestError> {
        let raw = &self.fields[idx];
        raw.parse()
            .map_err(|_| IngestError::parse(self.loc(), format!("invalid {what} {raw:?}")))
    }

    fn date(&self, idx: usize) -> Result<NaiveDate, IngestError> {
        parse_date(&self.fields[idx]).ok_or_else(|| {
            IngestError::parse(self.loc(), format!("invalid date {:?}", self.fields[idx]))
        })
    }

    fn country(&self, idx: usize) -> Result<CountryCode, IngestError> {
        CountryCode::new(&self.fields[idx])
            .map_err(|e| IngestError::parse(self.loc(), e.to_string()))
    }

    fn number(&self, idx: usize) -> Result<f64, IngestError> {
        let v: f64 = self.field(idx, "number")?;
        if !v.is_finite() {
            return Err(IngestError::parse(self.loc(), "non-finite number"));
        }
        Ok(v)
    }
}

fn parse_date(s: &str) -> Option<NaiveDate> {
    // Exactly YYYY-MM-DD; chrono alone would also accept unpadded fields.
    if s.len() != 10 {
        return None;
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d").ok()
}

fn read_csv(bytes: &[u8], header: &[&str]) -> Result<Vec<Row>, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(bytes);
    let mut rows = Vec::new();
    let mut saw_header = false;
    for result in reader.records() {
        let record = result.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
            IngestError::parse(Location::Line(line), e.to_string())
        })?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        let fields: Vec<String> = record.iter().map(str::to_string).collect();
        if !saw_header {
            if fields != header {
                return Err(IngestError::parse(
                    Location::Line(line),
                    format!("expected header {:?}", header.join(",")),
                ));
            }
            saw_header = true;
            continue;
        }
        if fields.len() != header.len() {
            return Err(IngestError::parse(
                Location::Line(line),
                format!("expected {} fields, found {}", header.len(), fields.len()),
            ));
        }
        rows.push(Row { line, fields });
    }
    if !saw_header {
        return Err(IngestError::parse(Location::Line(1), "missing header"));
    }
    Ok(rows)
}

/// Sorts `(key, line, record)` triples by key and rejects repeated keys.
fn sort_unique<K: Ord + fmt::Debug, T>(
    mut keyed: Vec<(K, usize, T)>,
) -> Result<Vec<T>, IngestError> {
    keyed.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)));
    if let Some(w) = keyed.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(IngestError::DuplicateKey {
            location: Location::Line(w[1].1),
            key: format!("{:?}", w[1].0),
        });
    }
    Ok(keyed.into_iter().map(|(_, _, r)| r).collect())
}

pub fn parse_flows(bytes: &[u8]) -> Result<Vec<FlowRecord>, IngestError> {
    let rows = read_csv(bytes, &["date", "country", "individuals"])?;
    let mut keyed = Vec::with_capacity(rows.len());
    for row in rows {
        let record = FlowRecord {
            date: row.date(0)?,
            destination: row.country(1)?,
            individuals: row.field(2, "count of individuals")?,
        };
        keyed.push(((record.date, record.destination), row.line, record));
    }
    sort_unique(keyed)
}

pub fn parse_probe_status(bytes: &[u8]) -> Result<Vec<ProbeStatusRecord>, IngestError> {
    let rows = read_csv(bytes, &["probe_id", "date", "connected"])?;
    let mut keyed = Vec::with_capacity(rows.len());
    for row in rows {
        let probe_id: u64 = row.field(0, "probe id")?;
        if probe_id == 0 {
            return Err(IngestError::parse(row.loc(), "probe ids are positive"));
        }
        let connected = match row.fields[2].as_str() {
            "0" => false,
            "1" => true,
            other => {
                return Err(IngestError::parse(
                    row.loc(),
                    format!("connected must be 0 or 1, got {other:?}"),
                ))
            }
        };
        let record = ProbeStatusRecord {
            probe_id,
            date: row.date(1)?,
            connected,
        };
        keyed.push(((record.date, record.probe_id), row.line, record));
    }
    sort_unique(keyed)
}

pub fn parse_share_series(bytes: &[u8]) -> Result<Vec<ShareSeriesRecord>, IngestError> {
    parse_share_series_with(bytes, ParseOptions::default())
}

pub fn parse_share_series_with(
    bytes: &[u8],
    options: ParseOptions,
) -> Result<Vec<ShareSeriesRecord>, IngestError> {
    let rows = read_csv(bytes, &["date", "country", "metric", "key", "value"])?;
    let mut keyed = Vec::with_capacity(rows.len());
    for row in rows {
        let value = options.scale(row.number(4)?);
        if !(0.0..=1.0).contains(&value) {
            return Err(IngestError::OutOfRange {
                location: row.loc(),
                value,
            });
        }
        if row.fields[2].is_empty() || row.fields[3].is_empty() {
            return Err(IngestError::parse(
                row.loc(),
                "metric and key must be non-empty",
            ));
        }
        let record = ShareSeriesRecord {
            date: row.date(0)?,
            country: row.country(1)?,
            metric: row.fields[2].clone(),
            key: row.fields[3].clone(),
            value,
        };
        let key = (
            record.metric.clone(),
            record.country,
            record.key.clone(),
            record.date,
        );
        keyed.push((key, row.line, record));
    }
    sort_unique(keyed)
}

fn parse_timestamp(s: &str) -> Option<(NaiveDateTime, bool)> {
    if let Some(d) = parse_date(s) {
        return Some((d.and_time(NaiveTime::MIN), true));
    }
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some((dt.naive_utc(), false));
    }
    ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M"]
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
        .map(|t| (t, false))
}

/// Parses `traffic.csv`. Timestamps without a timezone are taken as UTC.
pub fn parse_traffic_series(bytes: &[u8], name: &str) -> Result<TrafficSeries, IngestError> {
    let rows = read_csv(bytes, &["timestamp", "value"])?;
    let mut points = Vec::with_capacity(rows.len());
    let mut all_dates = true;
    for row in rows {
        let (ts, bare) = parse_timestamp(&row.fields[0]).ok_or_else(|| {
            IngestError::parse(row.loc(), format!("invalid timestamp {:?}", row.fields[0]))
        })?;
        all_dates &= bare;
        points.push((ts, row.line, row.number(1)?));
    }
    let keyed = points
        .into_iter()
        .map(|(t, line, v)| (t, line, (t, v)))
        .collect();
    let points: Vec<(NaiveDateTime, f64)> = sort_unique(keyed)?;
    let series = if all_dates {
        let daily = points.into_iter().map(|(t, v)| (t.date(), v)).collect();
        TrafficSeries::Daily(DailySeries::new(name, "normalized rate", daily)?)
    } else {
        TrafficSeries::Intraday(IntradaySeries::new(name, points)?)
    };
    Ok(series)
}

pub fn parse_ranks(bytes: &[u8]) -> Result<Vec<RankRecord>, IngestError> {
    let rows = read_csv(bytes, &["country", "month", "kind", "rank"])?;
    let mut keyed = Vec::with_capacity(rows.len());
    for row in rows {
        let network_kind: NetworkKind = row.fields[2]
            .parse()
            .map_err(|e: String| IngestError::parse(row.loc(), e))?;
        let rank: u32 = row.field(3, "rank")?;
        if rank == 0 {
            return Err(IngestError::parse(row.loc(), "ranks start at 1"));
        }
        let record = RankRecord {
            country: row.country(0)?,
            month: row.field(1, "month")?,
            network_kind,
            rank,
        };
        keyed.push((
            (record.country, record.network_kind, record.month),
            row.line,
            record,
        ));
    }
    sort_unique(keyed)
}

#[derive(Deserialize)]
struct RawSite {
    site: String,
    monthly_visits: f64,
    #[serde(default)]
    shares: Option<BTreeMap<String, f64>>,
}

fn parse_raw_sites(bytes: &[u8]) -> Result<Vec<RawSite>, IngestError> {
    let raw: Vec<RawSite> = serde_json::from_slice(bytes)
        .map_err(|e| IngestError::parse(Location::Line(e.line()), format!("{e}")))?;
    let mut seen = BTreeSet::new();
    for (i, entry) in raw.iter().enumerate() {
        if entry.site.is_empty() {
            return Err(IngestError::parse(Location::Element(i), "empty site name"));
        }
        if !(entry.monthly_visits.is_finite() && entry.monthly_visits > 0.0) {
            return Err(IngestError::parse(
                Location::Element(i),
                format!(
                    "monthly_visits must be positive, got {}",
                    entry.monthly_visits
                ),
            ));
        }
        if !seen.insert(entry.site.as_str()) {
            return Err(IngestError::DuplicateKey {
                location: Location::Element(i),
                key: entry.site.clone(),
            });
        }
    }
    Ok(raw)
}

/// Parses the site-analytics export into entries, in file order.
pub fn parse_site_entries(
    bytes: &[u8],
    options: ParseOptions,
) -> Result<Vec<SiteEntry>, IngestError> {
    parse_raw_sites(bytes)?
        .into_iter()
        .enumerate()
        .map(|(i, raw)| {
            let shares = raw
                .shares
                .ok_or_else(|| IngestError::parse(Location::Element(i), "missing shares"))?
                .into_iter()
                .map(|(code, v)| {
                    let country = CountryCode::new(&code)
                        .map_err(|e| IngestError::parse(Location::Element(i), e.to_string()))?;
                    Ok((country, options.scale(v)))
                })
                .collect::<Result<_, IngestError>>()?;
            Ok(SiteEntry {
                site: raw.site,
                monthly_visits: raw.monthly_visits,
                shares,
            })
        })
        .collect()
}

/// Reads only the site names and volumes; `shares` may be absent.
pub fn parse_site_volumes(bytes: &[u8]) -> Result<VolumeVector, IngestError> {
    let raw = parse_raw_sites(bytes)?;
    if raw.is_empty() {
        return Err(IngestError::EmptySelection);
    }
    let (sites, volumes) = raw.into_iter().map(|r| (r.site, r.monthly_visits)).unzip();
    Ok(VolumeVector::new(sites, volumes)?)
}

/// Rebuckets the entries into a validated share matrix and volume vector.
pub fn site_pair(entries: &[SiteEntry]) -> Result<(ShareMatrix, VolumeVector), IngestError> {
    if entries.is_empty() {
        return Err(IngestError::EmptySelection);
    }
    let sites: Vec<String> = entries.iter().map(|e| e.site.clone()).collect();
    let maps: Vec<_> = entries.iter().map(|e| e.shares.clone()).collect();
    let shares = rebucket(sites.clone(), &maps)?;
    let volumes = VolumeVector::new(sites, entries.iter().map(|e| e.monthly_visits).collect())?;
    Ok((shares, volumes))
}

pub fn parse_site_analytics(bytes: &[u8]) -> Result<(ShareMatrix, VolumeVector), IngestError> {
    site_pair(&parse_site_entries(bytes, ParseOptions::default())?)
}

/// Drops entries whose site name exactly matches an exclusion.
pub fn filter_top_sites(
    entries: Vec<SiteEntry>,
    exclusions: &[String],
) -> Result<Vec<SiteEntry>, IngestError> {
    let excluded: BTreeSet<&str> = exclusions.iter().map(String::as_str).collect();
    let kept: Vec<SiteEntry> = entries
        .into_iter()
        .filter(|e| !excluded.contains(e.site.as_str()))
        .collect();
    if kept.is_empty() {
        return Err(IngestError::EmptySelection);
    }
    Ok(kept)
}

pub fn write_flows(records: &[FlowRecord]) -> String {
    let mut out = String::from("date,country,individuals\n");
    for r in records {
        out.push_str(&format!("{},{},{}\n", r.date, r.destination, r.individuals));
    }
    out
}

pub fn write_probe_status(records: &[ProbeStatusRecord]) -> String {
    let mut out = String::from("probe_id,date,connected\n");
    for r in records {
        out.push_str(&format!(
            "{},{},{}\n",
            r.probe_id,
            r.date,
            u8::from(r.connected)
        ));
    }
    out
}

pub fn write_share_series(records: &[ShareSeriesRecord]) -> String {
    let mut out = String::from("date,country,metric,key,value\n");
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.date,
            r.country,
            r.metric,
            r.key,
            format_value(r.value)
        ));
    }
    out
}

pub fn write_traffic_series(series: &TrafficSeries) -> String {
    let mut out = String::from("timestamp,value\n");
    match series {
        TrafficSeries::Daily(s) => {
            for (d, v) in s.points() {
                out.push_str(&format!("{d},{}\n", format_value(*v)));
            }
        }
        TrafficSeries::Intraday(s) => {
            for (t, v) in s.points() {
                out.push_str(&format!(
                    "{},{}\n",
                    t.format("%Y-%m-%dT%H:%M:%SZ"),
                    format_value(*v)
                ));
            }
        }
    }
    out
}

pub fn write_ranks(records: &[RankRecord]) -> String {
    let mut out = String::from("country,month,kind,rank\n");
    for r in records {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.country, r.month, r.network_kind, r.rank
        ));
    }
    out
}

pub fn write_site_entries(entries: &[SiteEntry]) -> String {
    let rounded: Vec<SiteEntry> = entries
        .iter()
        .map(|e| SiteEntry {
            site: e.site.clone(),
            // Visit counts are written exactly; only shares are rounded.
            monthly_visits: e.monthly_visits,
            shares: e
                .shares
                .iter()
                .map(|(&c, &v)| (c, round_sig(v, OUTPUT_DIGITS)))
                .collect(),
        })
        .collect();
    let mut out = serde_json::to_string_pretty(&rounded).expect("site entries serialize");
    out.push('\n');
    out
}
