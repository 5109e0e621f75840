//! Exact Fourier analysis of small Boolean functions.
//!
//! A point of {−1,1}^M is stored as an M-bit mask with bit i set when
//! coordinate i is −1. Subsets S ⊆ [M] are masks too, so
//! χ_S(x) = (−1)^{popcount(S & x)} and pointwise products become XOR.

use serde::{Deserialize, Serialize};

use crate::error::{guard, Error, Result};
use crate::wht::fwht_in_place;

pub const MAX_ARITY: usize = 22;
pub const CONVOLUTION_MAX_ARITY: usize = 12;

#[derive(Clone, Debug, PartialEq)]
pub struct FourierTable {
    arity: usize,
    coeffs: Vec<f64>,
}

fn arity_of(len: usize) -> Result<usize> {
    if len == 0 || !len.is_power_of_two() {
        return Err(Error::InvalidDimension(format!("truth table length {len} is not a power of two")));
    }
    let m = len.trailing_zeros() as usize;
    guard("arity", m, MAX_ARITY)?;
    Ok(m)
}

/// All coefficients f̂(S) = E_x[f(x) χ_S(x)] from a truth table of length 2^M.
pub fn brute_fourier(truth_table: &[f64]) -> Result<FourierTable> {
    let arity = arity_of(truth_table.len())?;
    let mut coeffs = truth_table.to_vec();
    fwht_in_place(&mut coeffs)?;
    let scale = 1.0 / (truth_table.len() as f64).sqrt();
    coeffs.iter_mut().for_each(|c| *c *= scale);
    Ok(FourierTable { arity, coeffs })
}

impl FourierTable {
    pub fn from_coefficients(coeffs: Vec<f64>) -> Result<Self> {
        let arity = arity_of(coeffs.len())?;
        Ok(Self { arity, coeffs })
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coefficient(&self, set: usize) -> f64 {
        self.coeffs[set]
    }

    /// L_k(f) = Σ_{|S|=k} |f̂(S)|.
    pub fn level_mass(&self, k: usize) -> f64 {
        self.level_sum(k, f64::abs)
    }

    /// Σ_{|S|=k} f̂(S)².
    pub fn level_weight(&self, k: usize) -> f64 {
        self.level_sum(k, |c| c * c)
    }

    fn level_sum(&self, k: usize, f: impl Fn(f64) -> f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(s, _)| s.count_ones() as usize == k)
            .map(|(_, &c)| f(c))
            .sum()
    }

    /// L_0 … L_M in one pass.
    pub fn level_masses(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.arity + 1];
        for (s, c) in self.coeffs.iter().enumerate() {
            out[s.count_ones() as usize] += c.abs();
        }
        out
    }

    pub fn parseval_sum(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum()
    }

    /// Σ_S f̂(S) χ_S evaluated at every point.
    pub fn truth_table(&self) -> Vec<f64> {
        let mut out = self.coeffs.clone();
        fwht_in_place(&mut out).expect("power-of-two length");
        let scale = (self.coeffs.len() as f64).sqrt();
        out.iter_mut().for_each(|v| *v *= scale);
        out
    }

    /// Σ_S f̂(S) ∏_{i∈S} z_i, folding one coordinate at a time.
    pub fn multilinear_eval(&self, z: &[f64]) -> Result<f64> {
        if z.len() != self.arity {
            return Err(Error::InvalidDimension(format!(
                "point has {} coordinates, function has arity {}",
                z.len(),
                self.arity
            )));
        }
        let mut buf = self.coeffs.clone();
        for i in (0..self.arity).rev() {
            let half = 1 << i;
            let (lo, hi) = buf.split_at_mut(half);
            for (a, b) in lo.iter_mut().zip(&hi[..half]) {
                *a += z[i] * b;
            }
            buf.truncate(half);
        }
        Ok(buf[0])
    }

    pub fn degree(&self, tol: f64) -> usize {
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| c.abs() > tol)
            .map(|(s, _)| s.count_ones() as usize)
            .max()
            .unwrap_or(0)
    }
}

/// Converts a cube point given as ±1 values to its mask.
pub fn point_mask(x: &[f64]) -> usize {
    x.iter().enumerate().fold(0, |m, (i, &v)| if v < 0.0 { m | 1 << i } else { m })
}

/// (f*g)(x) = E_y[f(y) g(x·y)], computed from the definition.
pub fn convolve(f: &[f64], g: &[f64]) -> Result<Vec<f64>> {
    if f.len() != g.len() {
        return Err(Error::InvalidDimension("convolution of different arities".into()));
    }
    let m = arity_of(f.len())?;
    guard("convolution arity", m, CONVOLUTION_MAX_ARITY)?;
    let n = f.len();
    Ok((0..n)
        .map(|x| (0..n).map(|y| f[y] * g[x ^ y]).sum::<f64>() / n as f64)
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvolutionCheck {
    pub max_deviation: f64,
}

/// Compares the spectrum of f*g with the pointwise product of spectra.
pub fn check_convolution(f: &[f64], g: &[f64]) -> Result<ConvolutionCheck> {
    let conv = brute_fourier(&convolve(f, g)?)?;
    let (ff, gg) = (brute_fourier(f)?, brute_fourier(g)?);
    let max_deviation = conv
        .coefficients()
        .iter()
        .zip(ff.coefficients().iter().zip(gg.coefficients()))
        .map(|(c, (a, b))| (c - a * b).abs())
        .fold(0.0, f64::max);
    Ok(ConvolutionCheck { max_deviation })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckStatus {
    Pass,
    Fail,
    Inapplicable,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelKCheck {
    pub alpha: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub status: CheckStatus,
}

/// Level-k inequality for the indicator of A ⊆ {−1,1}^M, given as a
/// membership table of length 2^M:
/// Σ_{|S|=k} 1̂_A(S)² ≤ α²(2e/k · ln(1/α))^k with α = |A|/2^M,
/// applicable for 1 ≤ k ≤ 2 ln(1/α).
pub fn check_level_k_inequality(member: &[bool], k: usize) -> Result<LevelKCheck> {
    let tt: Vec<f64> = member.iter().map(|&b| b as u8 as f64).collect();
    let table = brute_fourier(&tt)?;
    let alpha = table.coefficient(0);
    let lhs = table.level_weight(k);
    let log_inv = if alpha > 0.0 { (1.0 / alpha).ln() } else { f64::INFINITY };
    let applicable = alpha > 0.0 && alpha < 1.0 && k >= 1 && (k as f64) <= 2.0 * log_inv;
    if !applicable {
        return Ok(LevelKCheck { alpha, lhs, rhs: f64::NAN, status: CheckStatus::Inapplicable });
    }
    let rhs = alpha * alpha * (2.0 * std::f64::consts::E / k as f64 * log_inv).powi(k as i32);
    let status = if lhs <= rhs * (1.0 + 1e-12) { CheckStatus::Pass } else { CheckStatus::Fail };
    Ok(LevelKCheck { alpha, lhs, rhs, status })
}

/// (e/k)^{2k} c^{2k}.
pub fn weight_bound(k: usize, cost: usize) -> f64 {
    let k = k as f64;
    (std::f64::consts::E / k * cost as f64).powf(2.0 * k)
}

/// ⌈2k log₂ e⌉, the minimum cost the weight bound asks of a protocol.
pub fn required_min_cost(k: usize) -> usize {
    (2.0 * k as f64 * std::f64::consts::LOG2_E).ceil() as usize
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightProbe {
    pub level: usize,
    pub mass: f64,
    pub bound: f64,
    /// mass / bound: the constant this instance needs.
    pub ratio: f64,
}

/// Exact L_{2k} of `table` against (e/k)^{2k} c^{2k}.
pub fn weight_bound_probe(table: &FourierTable, k: usize, cost: usize) -> WeightProbe {
    let mass = if 2 * k <= table.arity() { table.level_mass(2 * k) } else { 0.0 };
    let bound = weight_bound(k, cost);
    WeightProbe { level: 2 * k, mass, bound, ratio: mass / bound }
}

pub fn binomial(m: usize, j: usize) -> f64 {
    if j > m {
        return 0.0;
    }
    (0..j).fold(1.0, |acc, i| acc * (m - i) as f64 / (i + 1) as f64)
}
