//! The random walk with a k-dimensional time index: each copy j takes T
//! independent steps z_j^{(t)} ∼ p·𝒢 with p = 1/√T.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dist::sampler::fill_gaussian;
use crate::dist::ForrelationParams;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct WalkGrid {
    params: ForrelationParams,
    t: usize,
    /// steps[j][s] is step s+1 of copy j.
    steps: Vec<Vec<Vec<f64>>>,
}

impl WalkGrid {
    pub fn sample<R: Rng + ?Sized>(params: &ForrelationParams, t: usize, rng: &mut R) -> Result<Self> {
        if t == 0 {
            return Err(Error::InvalidParameter("T must be positive".into()));
        }
        let p = 1.0 / (t as f64).sqrt();
        let steps = (0..params.k)
            .map(|_| {
                (0..t)
                    .map(|_| {
                        let mut v = vec![0.0; params.copy_len()];
                        fill_gaussian(&mut v, params.eps, rng)?;
                        v.iter_mut().for_each(|x| *x *= p);
                        Ok(v)
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { params: *params, t, steps })
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn step_scale(&self) -> f64 {
        1.0 / (self.t as f64).sqrt()
    }

    /// z^{≤(a)}: copy j holds the sum of its first a_j steps.
    pub fn prefix(&self, a: &[usize]) -> Result<Vec<f64>> {
        if a.len() != self.params.k {
            return Err(Error::InvalidDimension(format!("need {} times, got {}", self.params.k, a.len())));
        }
        let len = self.params.copy_len();
        let mut out = vec![0.0; self.params.total_len()];
        for (j, &aj) in a.iter().enumerate() {
            if aj > self.t {
                return Err(Error::OutOfRange { index: aj, len: self.t + 1 });
            }
            let copy = &mut out[j * len..(j + 1) * len];
            for step in &self.steps[j][..aj] {
                copy.iter_mut().zip(step).for_each(|(o, s)| *o += s);
            }
        }
        Ok(out)
    }

    /// z^{≤(T·S)} for the copy set `mask`.
    pub fn corner(&self, mask: u32) -> Result<Vec<f64>> {
        let a: Vec<usize> = (0..self.params.k).map(|j| if mask >> j & 1 == 1 { self.t } else { 0 }).collect();
        self.prefix(&a)
    }
}

/// Target covariance of a corner point: ε[[I,H],[H,I]] within copies in S,
/// zero elsewhere.
pub fn corner_covariance(params: &ForrelationParams, mask: u32, a: usize, b: usize) -> f64 {
    let len = params.copy_len();
    let (ja, jb) = (a / len, b / len);
    if ja != jb || mask >> ja & 1 == 0 {
        return 0.0;
    }
    crate::dist::moments::gaussian_cov(a % len, b % len, params)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CovarianceCheck {
    pub entries: usize,
    /// Entries whose deviation exceeds 3 standard errors.
    pub beyond_3se: usize,
    pub max_z: f64,
    /// Chance count of 3σ exceedances allowed at the 99.9% level.
    pub allowed_beyond: usize,
    pub pass: bool,
}

/// Empirical covariance of z^{≤(T·S)} over `grids` walks against the target.
/// With many entries some 3σ exceedances are expected by chance, so the
/// check passes when their count is within the binomial 99.9% quantile and
/// no entry exceeds 5σ.
pub fn check_walk_covariance<R: Rng + ?Sized>(
    params: &ForrelationParams,
    t: usize,
    mask: u32,
    grids: usize,
    rng: &mut R,
) -> Result<CovarianceCheck> {
    let m = params.total_len();
    let mut sum = vec![0.0; m * m];
    let mut sum_sq = vec![0.0; m * m];
    for _ in 0..grids {
        let z = WalkGrid::sample(params, t, rng)?.corner(mask)?;
        for a in 0..m {
            for b in a..m {
                let v = z[a] * z[b];
                sum[a * m + b] += v;
                sum_sq[a * m + b] += v * v;
            }
        }
    }
    let n = grids as f64;
    let (mut entries, mut beyond, mut max_z) = (0usize, 0usize, 0.0f64);
    for a in 0..m {
        for b in a..m {
            let target = corner_covariance(params, mask, a, b);
            let mean = sum[a * m + b] / n;
            let var = (sum_sq[a * m + b] / n - mean * mean).max(0.0) * n / (n - 1.0);
            let se = (var / n).sqrt();
            if se == 0.0 {
                if (mean - target).abs() > 1e-15 {
                    max_z = f64::INFINITY;
                }
                continue;
            }
            entries += 1;
            let z = (mean - target).abs() / se;
            max_z = max_z.max(z);
            beyond += (z > 3.0) as usize;
        }
    }
    let allowed = binomial_upper_quantile(entries, 0.0027, 0.999);
    Ok(CovarianceCheck { entries, beyond_3se: beyond, max_z, allowed_beyond: allowed, pass: beyond <= allowed && max_z < 5.0 })
}

/// Smallest c with P[Bin(n, p) ≤ c] ≥ q.
fn binomial_upper_quantile(n: usize, p: f64, q: f64) -> usize {
    let mut pmf = (1.0 - p).powi(n as i32);
    let mut cdf = pmf;
    let mut c = 0;
    while cdf < q && c < n {
        pmf *= (n - c) as f64 / (c + 1) as f64 * p / (1.0 - p);
        cdf += pmf;
        c += 1;
    }
    c
}
