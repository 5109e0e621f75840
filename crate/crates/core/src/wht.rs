//! Normalized fast Walsh–Hadamard transform and the Forrelation functional.
//!
//! Indices are read least-significant-bit first: entry `(a, b)` of the
//! normalized Hadamard matrix is `(-1)^{popcount(a & b)} / sqrt(N)`.

use std::f64::consts::FRAC_1_SQRT_2;

use crate::error::{Error, Result};

/// Largest length accepted by the quadratic reference transform.
pub const NAIVE_GUARD: usize = 1 << 12;

/// A row/column index of the Hadamard matrix of size `2^n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct HadamardIndex {
    value: usize,
    n: u32,
}

impl HadamardIndex {
    pub fn new(value: usize, n: u32) -> Result<Self> {
        if n >= usize::BITS || value >> n != 0 {
            return Err(Error::InvalidDimension(format!(
                "index {value} does not fit in {n} bits"
            )));
        }
        Ok(Self { value, n })
    }

    pub fn value(self) -> usize {
        self.value
    }

    /// Binary expansion, least significant bit first.
    pub fn bits(self) -> Vec<u8> {
        (0..self.n).map(|i| ((self.value >> i) & 1) as u8).collect()
    }
}

/// Mod-2 inner product of the bit expansions of `a` and `b`.
pub fn mod2_inner(a: HadamardIndex, b: HadamardIndex) -> u8 {
    parity(a.value & b.value)
}

#[inline]
pub fn parity(x: usize) -> u8 {
    (x.count_ones() & 1) as u8
}

/// `(-1)^{<a,b>_2}` as a float.
#[inline]
pub fn hadamard_sign(a: usize, b: usize) -> f64 {
    if parity(a & b) == 0 {
        1.0
    } else {
        -1.0
    }
}

pub fn check_power_of_two(len: usize) -> Result<()> {
    if len == 0 || !len.is_power_of_two() {
        return Err(Error::InvalidDimension(format!(
            "length {len} is not a power of two"
        )));
    }
    Ok(())
}

/// In-place normalized transform. Each butterfly stage scales by 1/sqrt(2),
/// so the result is `H_N v` with the orthonormal matrix.
pub fn fwht_in_place(v: &mut [f64]) -> Result<()> {
    check_power_of_two(v.len())?;
    let n = v.len();
    let mut h = 1;
    while h < n {
        for block in v.chunks_exact_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let s = *a + *b;
                let d = *a - *b;
                *a = s * FRAC_1_SQRT_2;
                *b = d * FRAC_1_SQRT_2;
            }
        }
        h *= 2;
    }
    Ok(())
}

pub fn fwht(v: &[f64]) -> Result<Vec<f64>> {
    let mut out = v.to_vec();
    fwht_in_place(&mut out)?;
    Ok(out)
}

/// Quadratic reference: multiplies by the explicit Hadamard matrix.
pub fn naive_hadamard_apply(v: &[f64]) -> Result<Vec<f64>> {
    check_power_of_two(v.len())?;
    crate::error::guard("naive transform length", v.len(), NAIVE_GUARD)?;
    let n = v.len();
    let scale = 1.0 / (n as f64).sqrt();
    Ok((0..n)
        .map(|a| {
            let s: f64 = v
                .iter()
                .enumerate()
                .map(|(b, &x)| hadamard_sign(a, b) * x)
                .sum();
            s * scale
        })
        .collect())
}

/// `forr(z) = <x, H_N y> / N` for `z = (x, y)`.
pub fn forr(z: &[f64]) -> Result<f64> {
    if z.len() < 2 || z.len() % 2 != 0 {
        return Err(Error::InvalidDimension(format!(
            "forr needs an even length 2N, got {}",
            z.len()
        )));
    }
    let (x, y) = z.split_at(z.len() / 2);
    forr_split(x, y)
}

pub fn forr_split(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::InvalidDimension(format!(
            "halves differ in length: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    let hy = fwht(y)?;
    Ok(dot(x, &hy) / x.len() as f64)
}

/// Like [`forr_split`] but reuses `scratch` for `H_N y`.
pub(crate) fn forr_with_scratch(x: &[f64], y: &[f64], scratch: &mut Vec<f64>) -> Result<f64> {
    scratch.clear();
    scratch.extend_from_slice(y);
    fwht_in_place(scratch)?;
    Ok(dot(x, scratch) / x.len() as f64)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
