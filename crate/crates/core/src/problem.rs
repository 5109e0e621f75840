//! The promise problem F and its k-fold XOR F^(k).

use serde::{Deserialize, Serialize};

use crate::dist::{ForrelationParams, Source};
use crate::error::{Error, Result};
use crate::report::ExperimentReport;
use crate::rng::{chunked, purpose_stream, DEFAULT_CHUNK};
use crate::wht::forr_with_scratch;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PromiseLabel {
    /// −1: forr ≥ ε/2.
    Yes,
    /// +1: forr ≤ ε/4.
    No,
    OutsidePromise,
}

impl PromiseLabel {
    pub fn value(self) -> Option<i8> {
        match self {
            PromiseLabel::Yes => Some(-1),
            PromiseLabel::No => Some(1),
            PromiseLabel::OutsidePromise => None,
        }
    }

    pub fn from_value(v: i8) -> Self {
        if v < 0 {
            PromiseLabel::Yes
        } else {
            PromiseLabel::No
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PromiseLabel::Yes => "yes",
            PromiseLabel::No => "no",
            PromiseLabel::OutsidePromise => "outside",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "yes" | "-1" => Ok(PromiseLabel::Yes),
            "no" | "1" | "+1" => Ok(PromiseLabel::No),
            other => Err(Error::InvalidParameter(format!("unknown label '{other}'"))),
        }
    }

    /// Product of labels; outside-promise absorbs.
    pub fn times(self, other: Self) -> Self {
        match (self.value(), other.value()) {
            (Some(a), Some(b)) => Self::from_value(a * b),
            _ => PromiseLabel::OutsidePromise,
        }
    }
}

/// Classifies a forr value against the thresholds of `params`.
pub fn label_of_forr(f: f64, params: &ForrelationParams) -> PromiseLabel {
    if f >= params.yes_threshold() {
        PromiseLabel::Yes
    } else if f <= params.no_threshold() {
        PromiseLabel::No
    } else {
        PromiseLabel::OutsidePromise
    }
}

fn copy_label(z: &[f64], params: &ForrelationParams, scratch: &mut Vec<f64>) -> Result<PromiseLabel> {
    let (x, y) = z.split_at(params.n);
    Ok(label_of_forr(forr_with_scratch(x, y, scratch)?, params))
}

/// F on a single copy of length 2N.
pub fn label(z: &[f64], params: &ForrelationParams) -> Result<PromiseLabel> {
    if z.len() != params.copy_len() {
        return Err(Error::InvalidDimension(format!(
            "expected {} coordinates, got {}",
            params.copy_len(),
            z.len()
        )));
    }
    copy_label(z, params, &mut Vec::with_capacity(params.n))
}

/// Per-copy labels of a 2kN input.
pub fn copy_labels(z: &[f64], params: &ForrelationParams) -> Result<Vec<PromiseLabel>> {
    if z.len() != params.total_len() {
        return Err(Error::InvalidDimension(format!(
            "expected {} coordinates, got {}",
            params.total_len(),
            z.len()
        )));
    }
    let mut scratch = Vec::with_capacity(params.n);
    z.chunks(params.copy_len()).map(|c| copy_label(c, params, &mut scratch)).collect()
}

/// F^(k): the product of the k copy labels.
pub fn label_k(z: &[f64], params: &ForrelationParams) -> Result<PromiseLabel> {
    Ok(copy_labels(z, params)?.into_iter().fold(PromiseLabel::No, PromiseLabel::times))
}

/// Fraction of draws from `source` on which F^(k) takes the expected label.
pub fn promise_statistics(
    params: &ForrelationParams,
    source: Source,
    n_samples: u64,
    seed: u64,
    workers: usize,
) -> Result<ExperimentReport> {
    if n_samples < 1000 {
        return Err(Error::InvalidParameter(format!(
            "need at least 1000 samples, got {n_samples}"
        )));
    }
    let expected = source.expected_label(params.k);
    let parts = chunked(seed, purpose_stream("promise-stats"), n_samples, DEFAULT_CHUNK, workers, |rng, count, _| {
        let mut z = vec![0.0; params.total_len()];
        let (mut hit, mut outside) = (0u64, 0u64);
        for _ in 0..count {
            source.fill(params, &mut z, rng);
            match label_k(&z, params).expect("buffer has the instance length") {
                l if l == expected => hit += 1,
                PromiseLabel::OutsidePromise => outside += 1,
                _ => {}
            }
        }
        (hit, outside)
    });
    let hit: u64 = parts.iter().map(|p| p.0).sum();
    let outside: u64 = parts.iter().map(|p| p.1).sum();
    let n = n_samples as f64;
    let frac = hit as f64 / n;
    Ok(ExperimentReport::new("promise-stats", params, seed, workers)
        .with_estimate(frac, (frac * (1.0 - frac) / n).sqrt(), n_samples)
        .detail("outside_fraction", outside as f64 / n)
        .detail("wrong_label_fraction", (n_samples - hit - outside) as f64 / n)
        .with_note(format!("{} expecting {}", source.name(), expected.name())))
}
