//! Multinomial maximum-likelihood presence estimation.
//!
//! Every visit to a tracked site is treated as an independent draw from the
//! population's country distribution `p`. Site `j` contributes `A_j` visits
//! of which a fraction `x_ij` came from country `i`, so the pooled visit count
//! for country `i` is `Σ_j x_ij A_j` and the maximum-likelihood estimate is
//!
//! ```text
//! p̂_i = Σ_j x_ij · A_j / Σ_j A_j
//! ```
//!
//! Two uncertainty figures accompany `p̂`. The headline one is the
//! volume-weighted standard deviation of the per-site shares around `p̂`,
//! which grows when sites disagree about a country. The classical multinomial
//! standard error `sqrt(p̂(1 - p̂)/A)` is reported alongside as a diagnostic;
//! with millions of visits it is tiny and says little about source bias.

use std::cmp::Ordering;

use crate::model::{
    validate_pairing, CountryCode, ModelError, PresenceEstimate, ShareMatrix, VolumeVector,
};

/// Population total used for absolute counts when none is given.
pub const DEFAULT_TOTAL_POPULATION: f64 = 50_000_000.0;

/// A share matrix paired with the volumes of the same sites.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorInput {
    shares: ShareMatrix,
    volumes: VolumeVector,
}

impl EstimatorInput {
    pub fn new(shares: ShareMatrix, volumes: VolumeVector) -> Result<Self, ModelError> {
        validate_pairing(&shares, &volumes)?;
        Ok(EstimatorInput { shares, volumes })
    }

    pub fn shares(&self) -> &ShareMatrix {
        &self.shares
    }

    pub fn volumes(&self) -> &VolumeVector {
        &self.volumes
    }

    fn weights(&self) -> Vec<f64> {
        let total = self.volumes.total();
        self.volumes.volumes().iter().map(|a| a / total).collect()
    }
}

/// Per-country ML estimate in the share matrix's column order.
pub fn presence_fractions(input: &EstimatorInput) -> Vec<f64> {
    let total = input.volumes.total();
    let mut pooled = vec![0.0; input.shares.num_countries()];
    for (row, &a) in input.shares.rows().iter().zip(input.volumes.volumes()) {
        for (acc, &x) in pooled.iter_mut().zip(row) {
            *acc += x * a;
        }
    }
    pooled.into_iter().map(|v| (v / total).min(1.0)).collect()
}

/// `sqrt(Σ_j w_j (x_ij - p̂_i)²)` with `w_j = A_j / Σ A`, in column order.
pub fn cross_site_stdev(input: &EstimatorInput, p_hat: &[f64]) -> Vec<f64> {
    let weights = input.weights();
    (0..input.shares.num_countries())
        .map(|i| {
            let var: f64 = input
                .shares
                .rows()
                .iter()
                .zip(&weights)
                .map(|(row, w)| w * (row[i] - p_hat[i]).powi(2))
                .sum();
            var.sqrt()
        })
        .collect()
}

pub fn binomial_stderr(p_hat: &[f64], total_visits: f64) -> Vec<f64> {
    p_hat
        .iter()
        .map(|&p| (p * (1.0 - p) / total_visits).max(0.0).sqrt())
        .collect()
}

/// Runs the estimator. Countries come back ordered by descending `p̂`, ties
/// by code, with `ZZ` last.
pub fn estimate(input: &EstimatorInput) -> PresenceEstimate {
    let p_hat = presence_fractions(input);
    let stdev = cross_site_stdev(input, &p_hat);
    let stderr = binomial_stderr(&p_hat, input.volumes.total());
    let countries = input.shares.countries();

    let mut order: Vec<usize> = (0..countries.len()).collect();
    order.sort_by(|&a, &b| report_order(countries[a], p_hat[a], countries[b], p_hat[b]));

    let pick = |v: &[f64]| order.iter().map(|&i| v[i]).collect::<Vec<_>>();
    PresenceEstimate::new(
        order.iter().map(|&i| countries[i]).collect(),
        pick(&p_hat),
        pick(&stdev),
        pick(&stderr),
    )
    .expect("valid input yields a normalized estimate")
}

fn report_order(ca: CountryCode, pa: f64, cb: CountryCode, pb: f64) -> Ordering {
    ca.is_rest()
        .cmp(&cb.is_rest())
        .then_with(|| pb.total_cmp(&pa))
        .then_with(|| ca.cmp(&cb))
}

/// Attaches absolute counts `p̂_i · total_population`.
pub fn to_absolute(
    estimate: PresenceEstimate,
    total_population: f64,
) -> Result<PresenceEstimate, ModelError> {
    if !(total_population.is_finite() && total_population > 0.0) {
        return Err(ModelError::Shape(format!(
            "total population must be positive, got {total_population}"
        )));
    }
    Ok(estimate.with_population(total_population))
}
