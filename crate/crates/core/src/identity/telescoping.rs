//! The k-dimensional telescoping over the grid {0..T}^k.

use serde::{Deserialize, Serialize};

use crate::error::{guard, Error, Result};

pub const MAX_K: usize = 8;
pub const MAX_T: usize = 16;

fn check(k: usize, t: usize) -> Result<()> {
    guard("telescoping k", k, MAX_K)?;
    guard("telescoping T", t, MAX_T)?;
    if k == 0 || t == 0 {
        return Err(Error::InvalidParameter("k and T must be positive".into()));
    }
    Ok(())
}

/// Σ_{a∈[T]^k} Σ_{S⊆[k]} 1[a − 1 + S = b] (−1)^{|S|}. For each S the
/// indicator pins a_j = b_j + 1 − [j∈S], which must lie in [1, T].
pub fn telescoping_coefficient(b: &[usize], t: usize) -> Result<i64> {
    let k = b.len();
    check(k, t)?;
    if let Some(&v) = b.iter().find(|&&v| v > t) {
        return Err(Error::OutOfRange { index: v, len: t + 1 });
    }
    let mut total = 0i64;
    for s in 0u32..1 << k {
        let hit = b.iter().enumerate().all(|(j, &bj)| {
            let a = bj as i64 + 1 - (s >> j & 1) as i64;
            (1..=t as i64).contains(&a)
        });
        if hit {
            total += if s.count_ones() % 2 == 0 { 1 } else { -1 };
        }
    }
    Ok(total)
}

/// ∏_j (1[b_j = 0] − 1[b_j = T]).
pub fn closed_form_coefficient(b: &[usize], t: usize) -> i64 {
    b.iter().map(|&bj| (bj == 0) as i64 - (bj == t) as i64).product()
}

/// A real value at every point of {0..T}^k.
#[derive(Clone, Debug, PartialEq)]
pub struct GridLabeling {
    pub k: usize,
    pub t: usize,
    pub values: Vec<f64>,
}

impl GridLabeling {
    pub fn new(k: usize, t: usize, values: Vec<f64>) -> Result<Self> {
        check(k, t)?;
        let len = (t + 1).pow(k as u32);
        if values.len() != len {
            return Err(Error::InvalidDimension(format!("grid needs {len} values, got {}", values.len())));
        }
        Ok(Self { k, t, values })
    }

    pub fn from_fn(k: usize, t: usize, f: impl Fn(&[usize]) -> f64) -> Result<Self> {
        check(k, t)?;
        let len = (t + 1).pow(k as u32);
        let values = (0..len).map(|i| f(&Self::point(i, k, t))).collect();
        Ok(Self { k, t, values })
    }

    fn point(mut i: usize, k: usize, t: usize) -> Vec<usize> {
        (0..k)
            .map(|_| {
                let c = i % (t + 1);
                i /= t + 1;
                c
            })
            .collect()
    }

    pub fn index(&self, b: &[usize]) -> usize {
        b.iter().rev().fold(0, |acc, &c| acc * (self.t + 1) + c)
    }

    pub fn get(&self, b: &[usize]) -> f64 {
        self.values[self.index(b)]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TelescopingCheck {
    /// Σ_a Σ_S (−1)^{|S|} g(a − 1 + S).
    pub cell_sum: f64,
    /// Σ_B (−1)^{|B|} g(T·B).
    pub corner_sum: f64,
    pub deviation: f64,
}

pub fn check_telescoping_pathwise(g: &GridLabeling) -> Result<TelescopingCheck> {
    let (k, t) = (g.k, g.t);
    check(k, t)?;
    let mut cell_sum = 0.0;
    let mut a = vec![1usize; k];
    let mut p = vec![0usize; k];
    loop {
        for s in 0u32..1 << k {
            for j in 0..k {
                p[j] = a[j] - 1 + (s >> j & 1) as usize;
            }
            let v = g.get(&p);
            cell_sum += if s.count_ones() % 2 == 0 { v } else { -v };
        }
        let mut j = 0;
        while j < k && a[j] == t {
            a[j] = 1;
            j += 1;
        }
        if j == k {
            break;
        }
        a[j] += 1;
    }
    let mut corner_sum = 0.0;
    for s in 0u32..1 << k {
        let b: Vec<usize> = (0..k).map(|j| (s >> j & 1) as usize * t).collect();
        let v = g.get(&b);
        corner_sum += if s.count_ones() % 2 == 0 { v } else { -v };
    }
    Ok(TelescopingCheck { cell_sum, corner_sum, deviation: (cell_sum - corner_sum).abs() })
}
