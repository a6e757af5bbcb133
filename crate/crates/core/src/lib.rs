//! Estimate where a displaced population is located, and track its movement,
//! from per-country Internet measurement data.
//!
//! The crate has two halves:
//!
//! * [`estimator`] pools per-country visit shares of sites used mostly by the
//!   displaced population, weighted by each site's monthly volume, into a
//!   multinomial maximum-likelihood estimate of the population's distribution
//!   over countries.
//! * [`timeseries`] and [`correlation`] compute the daily metrics that track
//!   the flow itself: normalized trend series, pre/post event changes, probe
//!   connectivity counts, device-usage ratios and their correlation with
//!   border-crossing counts.
//!
//! [`ingest`] reads the file formats each source is exported to, [`synth`]
//! generates seeded multinomial data to check the estimator end to end, and
//! [`cli`] binds everything into the `displace` command.
//!
//! ```
//! use std::collections::BTreeMap;
//! use displace::estimator::{estimate, EstimatorInput};
//! use displace::model::{rebucket, CountryCode, VolumeVector};
//!
//! let pl: CountryCode = "PL".parse().unwrap();
//! let sites = vec!["a.ua".to_string(), "b.ua".to_string()];
//! let shares = rebucket(
//!     sites.clone(),
//!     &[BTreeMap::from([(pl, 0.1)]), BTreeMap::from([(pl, 0.5)])],
//! )
//! .unwrap();
//! let volumes = VolumeVector::new(sites, vec![100.0, 300.0]).unwrap();
//!
//! let est = estimate(&EstimatorInput::new(shares, volumes).unwrap());
//! assert!((est.get(pl).unwrap() - 0.4).abs() < 1e-12);
//! ```

pub mod cli;
pub mod correlation;
pub mod estimator;
pub mod ingest;
pub mod model;
pub mod synth;
pub mod timeseries;

// The guide's examples run as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/data-formats.md")]
    mod data_formats {}
    #[doc = include_str!("../../../book/src/estimator.md")]
    mod estimator {}
    #[doc = include_str!("../../../book/src/uncertainty.md")]
    mod uncertainty {}
    #[doc = include_str!("../../../book/src/time-series.md")]
    mod time_series {}
    #[doc = include_str!("../../../book/src/correlation.md")]
    mod correlation {}
    #[doc = include_str!("../../../book/src/synthetic-validation.md")]
    mod synthetic_validation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
