#![allow(dead_code)]

use std::path::PathBuf;

use chrono::NaiveDate;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
}

pub fn read(name: &str) -> Vec<u8> {
    std::fs::read(fixture(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn d(s: &str) -> NaiveDate {
    s.parse().unwrap()
}

pub fn rel_close(actual: f64, expected: f64, rel: f64) -> bool {
    if expected == 0.0 {
        actual.abs() <= rel
    } else {
        ((actual - expected) / expected).abs() <= rel
    }
}

pub mod strategies {
    use std::collections::BTreeMap;

    use chrono::{Duration, NaiveDate, NaiveDateTime};
    use displace::ingest::{
        FlowRecord, NetworkKind, ProbeStatusRecord, RankRecord, ShareSeriesRecord, SiteEntry,
        TrafficSeries,
    };
    use displace::model::{
        round_sig, CountryCode, DailySeries, IntradaySeries, ShareMatrix, VolumeVector, YearMonth,
    };
    use proptest::prelude::*;

    const CODES: &[&str] = &["AT", "CZ", "DE", "FR", "MD", "PL", "RO", "SK", "UA", "US"];

    pub fn country() -> impl Strategy<Value = CountryCode> {
        prop::sample::select(CODES).prop_map(|c| c.parse().unwrap())
    }

    pub fn date() -> impl Strategy<Value = NaiveDate> {
        (0i64..1500).prop_map(|k| NaiveDate::from_ymd_opt(2019, 1, 1).unwrap() + Duration::days(k))
    }

    /// A value that survives the nine-digit text form unchanged.
    pub fn fraction() -> impl Strategy<Value = f64> {
        (0.0f64..=1.0).prop_map(|v| round_sig(v, 9))
    }

    /// Row-stochastic matrix with `k` sites over `n` listed countries plus `ZZ`.
    pub fn share_matrix(k: usize, n: usize) -> impl Strategy<Value = ShareMatrix> {
        prop::collection::vec(prop::collection::vec(0.0f64..1.0, n + 1), k).prop_map(move |raw| {
            let countries: Vec<CountryCode> = (0..n)
                .map(|i| {
                    let code = [b'A' + (i / 26) as u8, b'A' + (i % 26) as u8];
                    CountryCode::new(std::str::from_utf8(&code).unwrap()).unwrap()
                })
                .chain([CountryCode::REST])
                .collect();
            let rows = raw
                .into_iter()
                .map(|mut row| {
                    // Keep every row strictly positive somewhere.
                    row[n] += 1e-3;
                    let s: f64 = row.iter().sum();
                    row.iter_mut().for_each(|v| *v /= s);
                    row
                })
                .collect();
            ShareMatrix::new(
                (0..k).map(|j| format!("site{j}.ua")).collect(),
                countries,
                rows,
            )
            .unwrap()
        })
    }

    pub fn volumes(k: usize) -> impl Strategy<Value = VolumeVector> {
        prop::collection::vec(1.0f64..1e9, k).prop_map(move |v| {
            VolumeVector::new((0..k).map(|j| format!("site{j}.ua")).collect(), v).unwrap()
        })
    }

    /// Shares and volumes of matching shape with 1..=`max_k` sites and
    /// 1..=`max_n` listed countries.
    pub fn estimator_pair(
        max_k: usize,
        max_n: usize,
    ) -> impl Strategy<Value = (ShareMatrix, VolumeVector)> {
        (1..=max_k, 1..=max_n).prop_flat_map(|(k, n)| (share_matrix(k, n), volumes(k)))
    }

    /// Consecutive-day series with optional gaps and values in `lo..hi`.
    pub fn daily_series(
        len: std::ops::Range<usize>,
        lo: f64,
        hi: f64,
    ) -> impl Strategy<Value = DailySeries> {
        (date(), prop::collection::vec((lo..hi, 1i64..3), len)).prop_map(|(start, steps)| {
            let mut day = start;
            let points = steps
                .into_iter()
                .map(|(v, step)| {
                    day += Duration::days(step);
                    (day, v)
                })
                .collect();
            DailySeries::new("s", "", points).unwrap()
        })
    }

    pub fn flows() -> impl Strategy<Value = Vec<FlowRecord>> {
        prop::collection::btree_map((date(), country()), 0u64..5_000_000, 0..60).prop_map(|m| {
            m.into_iter()
                .map(|((date, destination), individuals)| FlowRecord {
                    date,
                    destination,
                    individuals,
                })
                .collect()
        })
    }

    pub fn probes() -> impl Strategy<Value = Vec<ProbeStatusRecord>> {
        prop::collection::btree_map((date(), 1u64..100_000), any::<bool>(), 0..60).prop_map(|m| {
            m.into_iter()
                .map(|((date, probe_id), connected)| ProbeStatusRecord {
                    probe_id,
                    date,
                    connected,
                })
                .collect()
        })
    }

    pub fn share_records() -> impl Strategy<Value = Vec<ShareSeriesRecord>> {
        let metric = prop::sample::select(&["mobile_vendor", "platform", "search_host"][..]);
        let key = "[A-Za-z][A-Za-z0-9._-]{0,11}";
        prop::collection::btree_map((metric, country(), key, date()), fraction(), 0..60).prop_map(
            |m| {
                m.into_iter()
                    .map(|((metric, country, key, date), value)| ShareSeriesRecord {
                        date,
                        country,
                        metric: metric.to_string(),
                        key,
                        value,
                    })
                    .collect()
            },
        )
    }

    pub fn ranks() -> impl Strategy<Value = Vec<RankRecord>> {
        let kind = prop_oneof![Just(NetworkKind::Fixed), Just(NetworkKind::Mobile)];
        let month = (2015i32..2030, 1u32..=12).prop_map(|(y, m)| YearMonth::new(y, m).unwrap());
        prop::collection::btree_map((country(), kind, month), 1u32..250, 0..60).prop_map(|m| {
            m.into_iter()
                .map(|((country, network_kind, month), rank)| RankRecord {
                    country,
                    month,
                    network_kind,
                    rank,
                })
                .collect()
        })
    }

    pub fn traffic() -> impl Strategy<Value = TrafficSeries> {
        let value = (0.0f64..10.0).prop_map(|v| round_sig(v, 9));
        let daily = prop::collection::btree_map(date(), value.clone(), 0..60).prop_map(|m| {
            TrafficSeries::Daily(
                DailySeries::new("t", "normalized rate", m.into_iter().collect()).unwrap(),
            )
        });
        let instant = (date(), 0u32..86_400).prop_map(|(d, s)| -> NaiveDateTime {
            d.and_hms_opt(s / 3600, s / 60 % 60, s % 60).unwrap()
        });
        let intraday = prop::collection::btree_map(instant, value, 1..60).prop_map(|m| {
            TrafficSeries::Intraday(IntradaySeries::new("t", m.into_iter().collect()).unwrap())
        });
        prop_oneof![daily, intraday]
    }

    pub fn site_entries() -> impl Strategy<Value = Vec<SiteEntry>> {
        let shares = prop::collection::btree_map(
            country(),
            (0.0f64..0.1).prop_map(|v| round_sig(v, 9)),
            0..CODES.len(),
        );
        let visits = (1u64..10_000_000_000).prop_map(|v| v as f64);
        prop::collection::btree_map("[a-z]{1,10}\\.(ua|com|org)", (visits, shares), 0..30).prop_map(
            |m| {
                m.into_iter()
                    .map(|(site, (monthly_visits, shares))| SiteEntry {
                        site,
                        monthly_visits,
                        shares: shares.into_iter().collect::<BTreeMap<_, _>>(),
                    })
                    .collect()
            },
        )
    }
}

pub mod cli {
    use std::path::Path;
    use std::process::{Command, Output};

    use super::fixture;

    pub fn displace(args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_displace"))
            .args(args)
            .output()
            .expect("binary runs")
    }

    pub fn fx(name: &str) -> String {
        fixture(name).display().to_string()
    }

    /// Arguments of one run of every command on the bundled fixtures, with
    /// `--out` placed under `dir`.
    pub fn every_command(dir: &Path) -> Vec<(&'static str, Vec<String>)> {
        let out = |sub: &str, file: &str| {
            let d = dir.join(sub);
            std::fs::create_dir_all(&d).unwrap();
            d.join(file).display().to_string()
        };
        let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>();
        vec![
            (
                "estimate",
                [
                    s(&[
                        "estimate",
                        "--sites",
                        &fx("site_analytics.json"),
                        "--exclude-file",
                        &fx("international_sites.txt"),
                    ]),
                    s(&["--out", &out("estimate", "estimate.csv")]),
                ]
                .concat(),
            ),
            (
                "trend",
                [
                    s(&[
                        "trend",
                        "--shares",
                        &fx("share_series.csv"),
                        "--country",
                        "UA",
                        "--metric",
                        "platform",
                    ]),
                    s(&[
                        "--key",
                        "mobile",
                        "--denominator-key",
                        "desktop",
                        "--out",
                        &out("trend", "trend.csv"),
                    ]),
                ]
                .concat(),
            ),
            (
                "change",
                s(&[
                    "change",
                    "--series",
                    &fx("ua_cloudflare.csv"),
                    "--event",
                    "2022-02-24",
                    "--pre",
                    "14",
                    "--post",
                    "14",
                    "--out",
                    &out("change", "change.json"),
                ]),
            ),
            (
                "correlate",
                s(&[
                    "correlate",
                    "--flows",
                    &fx("flows.csv"),
                    "--series",
                    &fx("ua_google_maps.csv"),
                    "--out",
                    &out("correlate", "correlate.csv"),
                ]),
            ),
            (
                "probes",
                [
                    s(&[
                        "probes",
                        "--probes",
                        &fx("probes.csv"),
                        "--baseline-start",
                        "2021-02-23",
                        "--baseline-end",
                        "2022-02-22",
                    ]),
                    s(&[
                        "--event",
                        "2022-02-24",
                        "--post",
                        "14",
                        "--out",
                        &out("probes", "probes.json"),
                    ]),
                ]
                .concat(),
            ),
            (
                "ranks",
                s(&[
                    "ranks",
                    "--ranks",
                    &fx("ranks.csv"),
                    "--country",
                    "PL",
                    "--from",
                    "2022-02",
                    "--to",
                    "2022-03",
                    "--out",
                    &out("ranks", "ranks.csv"),
                ]),
            ),
            (
                "synth-validate",
                s(&[
                    "synth-validate",
                    "--truth",
                    &fx("synth.json"),
                    "--sites",
                    &fx("volumes.json"),
                    "--trials",
                    "2",
                    "--out",
                    &out("synth", "synth.json"),
                ]),
            ),
        ]
    }
}
