//! Synthetic multinomial visit data from a known presence vector.
//!
//! The generator is fully specified so the same fixtures can be reproduced
//! from any language:
//!
//! 1. Site `j` (0-based) gets its own xoshiro256++ stream: seed the state with
//!    SplitMix64 from `seed` (the reference `seed_from_u64` expansion, four
//!    successive SplitMix64 outputs), then apply the standard xoshiro256 jump
//!    `j` times. Streams are 2^128 draws apart.
//! 2. The site draws `n_j = max(1, floor(A_j + 0.5))` visits (round half up).
//! 3. Each visit takes one 64-bit output `x`, forms `u = (x >> 11) · 2^-53`,
//!    and picks the first country `i` with `u < c_i`, where
//!    `c_i = p_0 + … + p_i` is accumulated left to right in f64. If rounding
//!    leaves `u ≥ c_{N-1}` the last country with nonzero probability is used.
//! 4. Row `j` of the share matrix is `count_i / n_j`.
//!
//! Trial `t` of a validation run uses seed `seed + t` (wrapping).

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimator::{estimate, EstimatorInput};
use crate::model::{CountryCode, ModelError, PresenceEstimate, ShareMatrix, VolumeVector};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthError {
    #[error("invalid ground truth: {0}")]
    InvalidTruth(String),
    #[error("estimate countries do not match the ground truth")]
    CountryMismatch,
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Known presence vector plus the seed that drives sampling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTruth")]
pub struct GroundTruth {
    countries: Vec<CountryCode>,
    p_true: Vec<f64>,
    seed: u64,
}

#[derive(Deserialize)]
struct RawTruth {
    countries: Vec<CountryCode>,
    p_true: Vec<f64>,
    seed: u64,
}

impl TryFrom<RawTruth> for GroundTruth {
    type Error = SynthError;

    fn try_from(raw: RawTruth) -> Result<Self, Self::Error> {
        GroundTruth::new(raw.countries, raw.p_true, raw.seed)
    }
}

impl GroundTruth {
    pub fn new(
        countries: Vec<CountryCode>,
        p_true: Vec<f64>,
        seed: u64,
    ) -> Result<Self, SynthError> {
        let bad = |m: &str| Err(SynthError::InvalidTruth(m.to_string()));
        if countries.is_empty() || countries.len() != p_true.len() {
            return bad("countries and p_true must be non-empty and the same length");
        }
        if !countries.contains(&CountryCode::REST) {
            return bad("countries must include ZZ");
        }
        let mut sorted = countries.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != countries.len() {
            return bad("duplicate country");
        }
        if p_true.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return bad("probabilities must lie in [0, 1]");
        }
        let sum: f64 = p_true.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(SynthError::InvalidTruth(format!(
                "probabilities sum to {sum}"
            )));
        }
        Ok(GroundTruth {
            countries,
            p_true,
            seed,
        })
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self, SynthError> {
        serde_json::from_slice(bytes).map_err(|e| SynthError::InvalidTruth(e.to_string()))
    }

    pub fn countries(&self) -> &[CountryCode] {
        &self.countries
    }

    pub fn p_true(&self) -> &[f64] {
        &self.p_true
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        GroundTruth {
            seed,
            ..self.clone()
        }
    }
}

/// Independent generator for site `site` under `seed`.
pub fn site_rng(seed: u64, site: usize) -> Xoshiro256PlusPlus {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    for _ in 0..site {
        rng.jump();
    }
    rng
}

/// Uniform draw on `[0, 1)` from the top 53 bits of one output.
pub fn unit_uniform(rng: &mut impl RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Number of visits sampled for a site of volume `volume`.
pub fn trial_count(volume: f64) -> u64 {
    ((volume + 0.5).floor() as u64).max(1)
}

/// Categorical counts over `probs` from `n` draws.
pub fn sample_counts(probs: &[f64], n: u64, rng: &mut impl RngCore) -> Vec<u64> {
    let cumulative: Vec<f64> = probs
        .iter()
        .scan(0.0, |acc, &p| {
            *acc += p;
            Some(*acc)
        })
        .collect();
    let fallback = probs
        .iter()
        .rposition(|&p| p > 0.0)
        .unwrap_or(probs.len() - 1);
    let mut counts = vec![0u64; probs.len()];
    for _ in 0..n {
        let u = unit_uniform(rng);
        let idx = cumulative.partition_point(|&c| c <= u);
        counts[if idx < probs.len() { idx } else { fallback }] += 1;
    }
    counts
}

/// Empirical per-site shares from multinomial sampling, columns in the
/// ground truth's country order.
pub fn sample_shares(truth: &GroundTruth, volumes: &VolumeVector) -> ShareMatrix {
    let rows: Vec<Vec<f64>> = volumes
        .volumes()
        .par_iter()
        .enumerate()
        .map(|(j, &a)| {
            let n = trial_count(a);
            let counts = sample_counts(&truth.p_true, n, &mut site_rng(truth.seed, j));
            counts.into_iter().map(|c| c as f64 / n as f64).collect()
        })
        .collect();
    ShareMatrix::new(volumes.sites().to_vec(), truth.countries.clone(), rows)
        .expect("sampled frequencies form a valid share matrix")
}

/// L1 distance between estimated and true proportions, matched by country.
pub fn recovery_error(truth: &GroundTruth, estimate: &PresenceEstimate) -> Result<f64, SynthError> {
    if estimate.countries().len() != truth.countries.len() {
        return Err(SynthError::CountryMismatch);
    }
    truth
        .countries
        .iter()
        .zip(&truth.p_true)
        .map(|(&c, &p)| {
            estimate
                .get(c)
                .map(|q| (q - p).abs())
                .ok_or(SynthError::CountryMismatch)
        })
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialResult {
    pub seed: u64,
    pub l1_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub countries: usize,
    pub sites: usize,
    pub total_volume: f64,
    pub threshold: f64,
    pub trials: Vec<TrialResult>,
    pub max_l1_error: f64,
    pub mean_l1_error: f64,
    pub trials_below_threshold: usize,
}

/// Samples, estimates and scores `trials` independent replicates.
pub fn validate(
    truth: &GroundTruth,
    volumes: &VolumeVector,
    trials: u64,
    threshold: f64,
) -> Result<ValidationReport, SynthError> {
    let results: Vec<TrialResult> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let seeded = truth.with_seed(truth.seed.wrapping_add(t));
            let shares = sample_shares(&seeded, volumes);
            let est = estimate(&EstimatorInput::new(shares, volumes.clone())?);
            Ok(TrialResult {
                seed: seeded.seed,
                l1_error: recovery_error(&seeded, &est)?,
            })
        })
        .collect::<Result<_, SynthError>>()?;
    let errors = results.iter().map(|r| r.l1_error);
    Ok(ValidationReport {
        countries: truth.countries.len(),
        sites: volumes.sites().len(),
        total_volume: volumes.total(),
        threshold,
        max_l1_error: errors.clone().fold(0.0, f64::max),
        mean_l1_error: if results.is_empty() {
            0.0
        } else {
            errors.clone().sum::<f64>() / results.len() as f64
        },
        trials_below_threshold: errors.filter(|&e| e < threshold).count(),
        trials: results,
    })
}
