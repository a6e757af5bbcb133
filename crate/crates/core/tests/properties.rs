//! Invariants of the estimator, series operations and correlation.

mod common;

use chrono::Duration;
use common::strategies::{self, daily_series, estimator_pair};
use displace::correlation::{aggregate_flow, cumulative, pearson};
use displace::estimator::{
    binomial_stderr, cross_site_stdev, estimate, presence_fractions, EstimatorInput,
};
use displace::ingest::{NetworkKind, RankRecord};
use displace::model::{DailySeries, IntradaySeries, ShareMatrix, VolumeVector, YearMonth};
use displace::timeseries::{count_connected, daily_peak, normalize_max, rank_delta, ratio_series};
use proptest::prelude::*;

fn input(shares: ShareMatrix, volumes: VolumeVector) -> EstimatorInput {
    EstimatorInput::new(shares, volumes).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn estimate_is_a_distribution((shares, volumes) in estimator_pair(12, 15)) {
        let est = estimate(&input(shares, volumes));
        prop_assert!((est.p_hat().iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        for &p in est.p_hat() {
            prop_assert!((0.0..=1.0).contains(&p));
        }
        prop_assert!(est.countries().last().unwrap().is_rest());
        let listed = &est.p_hat()[..est.p_hat().len() - 1];
        prop_assert!(listed.windows(2).all(|w| w[0] >= w[1]));
    }

    /// Equal to pooling raw counts `c_ij = x_ij * A_j` across sites.
    #[test]
    fn estimate_equals_pooled_counts((shares, volumes) in estimator_pair(8, 10)) {
        let p = presence_fractions(&input(shares.clone(), volumes.clone()));
        let total: f64 = volumes.volumes().iter().sum();
        for i in 0..shares.num_countries() {
            let pooled: f64 = shares.rows().iter().zip(volumes.volumes()).map(|(r, a)| r[i] * a).sum::<f64>() / total;
            prop_assert!((p[i] - pooled).abs() <= 1e-12 * pooled.abs().max(1e-300) + 1e-15);
        }
    }

    #[test]
    fn single_site_returns_its_row(shares in strategies::share_matrix(1, 6), v in 1.0f64..1e9) {
        let volumes = VolumeVector::new(vec!["site0.ua".into()], vec![v]).unwrap();
        let inp = input(shares.clone(), volumes);
        let p = presence_fractions(&inp);
        for (a, b) in p.iter().zip(shares.row(0)) {
            prop_assert!((a - b).abs() <= 2.0 * f64::EPSILON * b);
        }
        prop_assert!(cross_site_stdev(&inp, &p).iter().all(|&s| s <= 1e-15));
    }

    /// Raising the volume of a site whose share for a country exceeds the
    /// current estimate cannot lower that estimate.
    #[test]
    fn monotone_in_volume((shares, volumes) in estimator_pair(6, 5), site in 0usize..6, factor in 1.0f64..100.0) {
        let site = site % shares.num_sites();
        let before = presence_fractions(&input(shares.clone(), volumes.clone()));
        let mut v = volumes.volumes().to_vec();
        v[site] *= factor;
        let bumped = VolumeVector::new(volumes.sites().to_vec(), v).unwrap();
        let after = presence_fractions(&input(shares.clone(), bumped));
        for i in 0..shares.num_countries() {
            if shares.row(site)[i] > before[i] {
                prop_assert!(after[i] >= before[i] - 1e-12);
            }
        }
    }

    #[test]
    fn uncertainties_are_non_negative((shares, volumes) in estimator_pair(10, 10)) {
        let inp = input(shares, volumes);
        let p = presence_fractions(&inp);
        prop_assert!(cross_site_stdev(&inp, &p).iter().all(|&s| s >= 0.0 && s.is_finite()));
        prop_assert!(binomial_stderr(&p, inp.volumes().total()).iter().all(|&s| s >= 0.0 && s.is_finite()));
    }

    #[test]
    fn normalized_series_peaks_at_one(s in daily_series(1..80, 0.0, 1e6)) {
        prop_assume!(s.values().any(|v| v > 0.0));
        let n = normalize_max(&s).unwrap();
        prop_assert_eq!(n.values().fold(f64::MIN, f64::max), 1.0);
        prop_assert!(n.values().all(|v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn ratio_with_itself_is_one(s in daily_series(1..80, 1e-6, 1e6)) {
        let r = ratio_series(&s, &s).unwrap();
        prop_assert_eq!(r.len(), s.len());
        prop_assert!(r.values().all(|v| v == 1.0));
    }

    #[test]
    fn pearson_with_itself_is_one(s in daily_series(3..80, -1e3, 1e3)) {
        let spread = s.values().fold(f64::MIN, f64::max) - s.values().fold(f64::MAX, f64::min);
        prop_assume!(spread > 1e-6);
        prop_assert!((pearson(&s, &s, 0).unwrap().r - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn pearson_lag_mirrors(a in daily_series(3..60, -1e3, 1e3), b in daily_series(3..60, -1e3, 1e3), lag in -10i64..10) {
        // Shift b onto a's calendar so the two overlap.
        let offset = a.points()[0].0 - b.points()[0].0;
        let b = DailySeries::new("b", "", b.points().iter().map(|&(d, v)| (d + offset, v)).collect()).unwrap();
        match (pearson(&a, &b, lag), pearson(&b, &a, -lag)) {
            (Ok(x), Ok(y)) => {
                prop_assert!((x.r - y.r).abs() <= 1e-12);
                prop_assert_eq!(x.n, y.n);
            }
            (Err(x), Err(y)) => prop_assert_eq!(x, y),
            (x, y) => prop_assert!(false, "{x:?} vs {y:?}"),
        }
    }

    #[test]
    fn cumulative_is_monotone_and_ends_at_total(flows in strategies::flows()) {
        let agg = aggregate_flow(&flows);
        let cum = cumulative(&agg);
        prop_assert!(cum.points().windows(2).all(|w| w[1].1 >= w[0].1));
        let total: u64 = flows.iter().map(|f| f.individuals).sum();
        prop_assert_eq!(cum.points().last().map_or(0.0, |p| p.1), total as f64);
    }

    #[test]
    fn connected_counts_sum_to_true_flags(records in strategies::probes()) {
        let counts = count_connected(&records);
        let flags = records.iter().filter(|r| r.connected).count();
        prop_assert_eq!(counts.values().sum::<f64>(), flags as f64);
    }

    #[test]
    fn daily_peak_dominates_every_sample(
        samples in prop::collection::btree_map((0i64..10, 0u32..24), 0.0f64..100.0, 1..120)
    ) {
        let base = "2022-02-20".parse::<chrono::NaiveDate>().unwrap();
        let points = samples
            .iter()
            .map(|(&(d, h), &v)| ((base + Duration::days(d)).and_hms_opt(h, 0, 0).unwrap(), v))
            .collect();
        let series = IntradaySeries::new("i", points).unwrap();
        let peaks = daily_peak(&series).unwrap();
        for &(t, v) in series.points() {
            let peak = peaks.get(t.date()).unwrap();
            prop_assert!(peak >= v);
        }
        for &(d, peak) in peaks.points() {
            prop_assert!(series.points().iter().any(|&(t, v)| t.date() == d && v == peak));
        }
    }

    #[test]
    fn rank_delta_chains(r1 in 1u32..250, r2 in 1u32..250, r3 in 1u32..250) {
        let cc = "PL".parse().unwrap();
        let m = |k: u32| YearMonth::new(2022, k).unwrap();
        let recs: Vec<RankRecord> = [r1, r2, r3]
            .iter()
            .enumerate()
            .map(|(i, &rank)| RankRecord { country: cc, month: m(i as u32 + 1), network_kind: NetworkKind::Fixed, rank })
            .collect();
        let d = |a, b| rank_delta(&recs, cc, NetworkKind::Fixed, m(a), m(b)).unwrap();
        prop_assert_eq!(d(1, 3), d(1, 2) + d(2, 3));
        prop_assert_eq!(d(2, 2), 0);
    }
}
