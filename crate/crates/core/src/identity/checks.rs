//! Statistical checks: the rounding law, Gaussian concentration of forr,
//! stability of forr under rounding, and the truncation gap.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dist::sampler::{fill_gaussian, round_coordinate, trnc};
use crate::dist::ForrelationParams;
use crate::error::{guard, Error, Result};
use crate::fourier::FourierTable;
use crate::report::ExperimentReport;
use crate::rng::{chunked_mean, purpose_stream, MeanAcc};
use crate::wht::{forr_split, forr_with_scratch};

pub const ROUNDING_LAW_MAX_ARITY: usize = 12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundingLawCheck {
    /// H(trnc(z)) from the multilinear extension.
    pub exact: f64,
    /// Mean of H over roundings of z.
    pub mean: f64,
    pub stderr: f64,
    pub n_samples: u64,
    pub pass: bool,
}

/// Mean of H(z̃) over `n_samples` roundings of z against H(trnc(z)); passes
/// within 4 standard errors.
pub fn check_rounding_law(table: &FourierTable, z: &[f64], n_samples: u64, seed: u64, workers: usize) -> Result<RoundingLawCheck> {
    let m = table.arity();
    guard("rounding-law arity", m, ROUNDING_LAW_MAX_ARITY)?;
    if z.len() != m {
        return Err(Error::InvalidDimension(format!("point has {} coordinates, arity is {m}", z.len())));
    }
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("rounding point"));
    }
    let truncated: Vec<f64> = z.iter().map(|&v| trnc(v)).collect();
    let exact = table.multilinear_eval(&truncated)?;
    let tt = table.truth_table();
    let acc = chunked_mean(seed, purpose_stream("rounding-law"), n_samples, workers, |rng, count, acc| {
        for _ in 0..count {
            let mask = z
                .iter()
                .enumerate()
                .fold(0usize, |m, (i, &v)| if round_coordinate(v, rng) < 0 { m | 1 << i } else { m });
            acc.push(tt[mask]);
        }
    });
    let (mean, stderr) = (acc.mean(), acc.stderr());
    let diff = (mean - exact).abs();
    let pass = diff <= (4.0 * stderr).max(1e-12);
    Ok(RoundingLawCheck { exact, mean, stderr, n_samples: acc.n, pass })
}

/// Tail fractions of forr under 𝒢 below 3ε/4 and above 5ε/4 against
/// 2e^{−N/128}. A pass/fail verdict is given only for N ≥ 256.
pub fn check_gaussian_concentration(params: &ForrelationParams, n_samples: u64, seed: u64, workers: usize) -> Result<ExperimentReport> {
    let (lo, hi) = (0.75 * params.eps, 1.25 * params.eps);
    let n = params.n;
    let parts = crate::rng::chunked(seed, purpose_stream("gaussian-concentration"), n_samples, 1 << 12, workers, |rng, count, _| {
        let mut z = vec![0.0; 2 * n];
        let mut scratch = Vec::with_capacity(n);
        let mut acc = MeanAcc::default();
        let (mut low, mut high) = (0u64, 0u64);
        for _ in 0..count {
            fill_gaussian(&mut z, params.eps, rng).expect("valid copy length");
            let (x, y) = z.split_at(n);
            let f = forr_with_scratch(x, y, &mut scratch).expect("matching halves");
            low += (f <= lo) as u64;
            high += (f >= hi) as u64;
            acc.push(f);
        }
        (acc, low, high)
    });
    let mut acc = MeanAcc::default();
    let (mut low, mut high) = (0u64, 0u64);
    for (a, l, h) in &parts {
        acc.merge(a);
        low += l;
        high += h;
    }
    let bound = 2.0 * (-(n as f64) / 128.0).exp();
    let total = n_samples as f64;
    let (low_frac, high_frac) = (low as f64 / total, high as f64 / total);
    let mut report = ExperimentReport::new("gaussian-concentration", params, seed, workers)
        .with_estimate(acc.mean(), acc.stderr(), acc.n)
        .detail("low_tail_count", low as f64)
        .detail("high_tail_count", high as f64)
        .detail("low_tail_fraction", low_frac)
        .detail("high_tail_fraction", high_frac)
        .detail("tail_bound", bound);
    if n >= 256 {
        report = report.with_pass(low_frac <= bound && high_frac <= bound);
    } else {
        report = report.with_note("bound is asymptotic; no verdict below N = 256");
    }
    Ok(report)
}

/// Where the rounded vector is centred.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StabilityCenter {
    /// A 𝒢 draw clamped into [−1/2, 1/2].
    ClampedGaussian,
    Zero,
    /// A uniform sign vector, which rounds to itself.
    Signs,
}

fn draw_center<R: Rng + ?Sized>(center: StabilityCenter, eps: f64, z0: &mut [f64], rng: &mut R) {
    match center {
        StabilityCenter::ClampedGaussian => {
            fill_gaussian(z0, eps, rng).expect("valid copy length");
            z0.iter_mut().for_each(|v| *v = v.clamp(-0.5, 0.5));
        }
        StabilityCenter::Zero => z0.iter_mut().for_each(|v| *v = 0.0),
        StabilityCenter::Signs => crate::dist::sampler::fill_uniform_signs(z0, rng),
    }
}

/// Fraction of pairs (z₀, z̃₀) with |forr(z̃₀) − forr(z₀)| ≥ ε/4.
pub fn check_rounding_stability(
    params: &ForrelationParams,
    center: StabilityCenter,
    n_samples: u64,
    seed: u64,
    workers: usize,
) -> Result<ExperimentReport> {
    if params.n < 1024 {
        return Err(Error::InvalidParameter(format!(
            "rounding stability needs N >= 1024 so that eps/4 clears the fluctuation scale, got {}",
            params.n
        )));
    }
    let n = params.n;
    let gap = params.eps / 4.0;
    let diffs = chunked_mean(seed, purpose_stream("rounding-stability"), n_samples, workers, |rng, count, acc| {
        let mut z0 = vec![0.0; 2 * n];
        let mut z = vec![0.0; 2 * n];
        for _ in 0..count {
            draw_center(center, params.eps, &mut z0, rng);
            for (o, &c) in z.iter_mut().zip(&z0) {
                *o = round_coordinate(c, rng) as f64;
            }
            let f0 = forr_split(&z0[..n], &z0[n..]).expect("valid halves");
            let f = forr_split(&z[..n], &z[n..]).expect("valid halves");
            acc.push(((f - f0).abs() >= gap) as u8 as f64);
        }
    });
    let frac = diffs.mean();
    let name = match center {
        StabilityCenter::ClampedGaussian => "clamped-gaussian",
        StabilityCenter::Zero => "zero",
        StabilityCenter::Signs => "signs",
    };
    Ok(ExperimentReport::new("rounding-stability", params, seed, workers)
        .with_estimate(frac, diffs.stderr(), diffs.n)
        .with_pass(frac <= 0.01)
        .with_note(format!("center={name}")))
}

/// E|H(trnc(z₀ + P·z)) − H(z₀ + P·z)| over z ∼ 𝒢^{(k)} for a function on the
/// 2kN coordinates of `params`. Reported only; the constant is not pinned.
pub fn measure_truncation_gap(
    table: &FourierTable,
    params: &ForrelationParams,
    z0: &[f64],
    scale: &[f64],
    n_samples: u64,
    seed: u64,
    workers: usize,
) -> Result<ExperimentReport> {
    let m = params.total_len();
    if table.arity() != m || z0.len() != m || scale.len() != m {
        return Err(Error::InvalidDimension(format!("expected {m} coordinates throughout")));
    }
    let acc = chunked_mean(seed, purpose_stream("truncation-gap"), n_samples, workers, |rng, count, acc| {
        let mut g = vec![0.0; m];
        let mut w = vec![0.0; m];
        for _ in 0..count {
            for copy in g.chunks_mut(params.copy_len()) {
                fill_gaussian(copy, params.eps, rng).expect("valid copy length");
            }
            for i in 0..m {
                w[i] = z0[i] + scale[i] * g[i];
            }
            let raw = table.multilinear_eval(&w).expect("arity checked");
            w.iter_mut().for_each(|v| *v = trnc(*v));
            let cut = table.multilinear_eval(&w).expect("arity checked");
            acc.push((cut - raw).abs());
        }
    });
    Ok(ExperimentReport::new("truncation-gap", params, seed, workers)
        .with_estimate(acc.mean(), acc.stderr(), acc.n)
        .with_note("measured gap; the asymptotic constant is not asserted"))
}
