//! Model-averaged summaries of reversible-jump output.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::sampler::RjSample;
use super::ProbitError;

/// Estimate with a batch-means Monte Carlo standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelProbability {
    pub gamma: Vec<bool>,
    pub included: Vec<String>,
    pub probability: Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InclusionProbability {
    pub candidate: String,
    pub probability: Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BmaSummary {
    pub samples: usize,
    /// Descending by probability, ties by model index.
    pub models: Vec<ModelProbability>,
    pub inclusion: Vec<InclusionProbability>,
    /// Entry `k-1` is the combined mass of the top `k` models.
    pub top_k_mass: Vec<Estimate>,
}

impl BmaSummary {
    pub fn probability_of(&self, gamma: &[bool]) -> f64 {
        self.models
            .iter()
            .find(|m| m.gamma == gamma)
            .map(|m| m.probability.value)
            .unwrap_or(0.0)
    }
}

/// Mean of `xs` with a batch-means standard error (batches of about
/// sqrt(n) draws).
pub fn batch_means(xs: &[f64]) -> Estimate {
    let n = xs.len();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let size = (n as f64).sqrt().floor() as usize;
    let batches = n.checked_div(size).unwrap_or(0);
    if batches < 2 {
        return Estimate {
            value: mean,
            std_error: 0.0,
        };
    }
    let means: Vec<f64> = (0..batches)
        .map(|b| xs[b * size..(b + 1) * size].iter().sum::<f64>() / size as f64)
        .collect();
    let var = means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (batches - 1) as f64;
    Estimate {
        value: mean,
        std_error: (var / batches as f64).sqrt(),
    }
}

fn indicator(samples: &[RjSample], f: impl Fn(&RjSample) -> bool) -> Estimate {
    let xs: Vec<f64> = samples.iter().map(|s| f(s) as u8 as f64).collect();
    batch_means(&xs)
}

/// `names` labels the candidates; pass an empty slice for `x0, x1, ...`.
pub fn bma_summary(samples: &[RjSample], names: &[String]) -> Result<BmaSummary, ProbitError> {
    let first = samples.first().ok_or(ProbitError::EmptySamples)?;
    let k = first.gamma.len();
    let names: Vec<String> = if names.len() == k {
        names.to_vec()
    } else {
        (0..k).map(|j| format!("x{j}")).collect()
    };
    let mut counts: BTreeMap<&[bool], usize> = BTreeMap::new();
    for s in samples {
        if s.gamma.len() != k {
            return Err(ProbitError::DimensionMismatch {
                expected: k,
                found: s.gamma.len(),
            });
        }
        *counts.entry(&s.gamma).or_insert(0) += 1;
    }
    let mut order: Vec<(&[bool], usize)> = counts.into_iter().collect();
    let index = |g: &[bool]| -> u64 { g.iter().enumerate().filter(|(_, &b)| b).map(|(j, _)| 1u64 << j).sum() };
    order.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| index(a.0).cmp(&index(b.0))));

    let models = order
        .iter()
        .map(|(g, _)| ModelProbability {
            gamma: g.to_vec(),
            included: g
                .iter()
                .zip(&names)
                .filter(|(&b, _)| b)
                .map(|(_, n)| n.clone())
                .collect(),
            probability: indicator(samples, |s| s.gamma == *g),
        })
        .collect();
    let inclusion = (0..k)
        .map(|j| InclusionProbability {
            candidate: names[j].clone(),
            probability: indicator(samples, |s| s.gamma[j]),
        })
        .collect();
    let mut rank: BTreeMap<&[bool], usize> = BTreeMap::new();
    for (r, (g, _)) in order.iter().enumerate() {
        rank.insert(g, r);
    }
    let ranks: Vec<usize> = samples.iter().map(|s| rank[s.gamma.as_slice()]).collect();
    let top_k_mass = (1..=order.len())
        .map(|kk| batch_means(&ranks.iter().map(|&r| (r < kk) as u8 as f64).collect::<Vec<_>>()))
        .collect();
    Ok(BmaSummary {
        samples: samples.len(),
        models,
        inclusion,
        top_k_mass,
    })
}

/// Mean over samples of Phi(intercept + x_new' beta) on included columns.
pub fn bma_predict(samples: &[RjSample], x_new: &[f64]) -> Result<f64, ProbitError> {
    if samples.is_empty() {
        return Err(ProbitError::EmptySamples);
    }
    let std = Normal::standard();
    let mut total = 0.0;
    for s in samples {
        if s.gamma.len() != x_new.len() {
            return Err(ProbitError::DimensionMismatch {
                expected: s.gamma.len(),
                found: x_new.len(),
            });
        }
        let mut eta = s.beta[0];
        let mut b = 1;
        for (j, &g) in s.gamma.iter().enumerate() {
            if g {
                eta += s.beta[b] * x_new[j];
                b += 1;
            }
        }
        total += std.cdf(eta);
    }
    Ok(total / samples.len() as f64)
}
