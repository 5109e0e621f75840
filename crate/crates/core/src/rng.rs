//! Seeded random streams and deterministic chunked Monte Carlo.
//!
//! Every logical task draws from its own ChaCha stream addressed by
//! `(master seed, stream id)`. Work is cut into fixed-size chunks whose
//! stream ids do not depend on the worker count, and chunk results are
//! merged in chunk order, so results are bit-identical for any pool size.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub type LabRng = ChaCha8Rng;

/// Default number of samples handled by one chunk (one stream).
pub const DEFAULT_CHUNK: u64 = 1 << 16;

pub fn stream_rng(seed: u64, stream: u64) -> LabRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Stream namespace for a named purpose, so unrelated drivers sharing a
/// seed never reuse each other's streams.
pub fn purpose_stream(purpose: &str) -> u64 {
    // FNV-1a, shifted so that chunk indices can be added below it
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in purpose.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h << 24
}

/// Running sums for a sample mean with its standard error.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MeanAcc {
    pub n: u64,
    pub sum: f64,
    pub sum_sq: f64,
}

impl MeanAcc {
    pub fn push(&mut self, v: f64) {
        self.n += 1;
        self.sum += v;
        self.sum_sq += v * v;
    }

    pub fn merge(&mut self, other: &MeanAcc) {
        self.n += other.n;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
    }

    pub fn mean(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.sum / self.n as f64
        }
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let n = self.n as f64;
        let m = self.sum / n;
        ((self.sum_sq - n * m * m) / (n - 1.0)).max(0.0)
    }

    pub fn stderr(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            (self.variance() / self.n as f64).sqrt()
        }
    }
}

/// Splits `total` samples into chunks of `chunk` and runs `f(rng, count,
/// chunk_index)` on each with its own stream `stream_base + chunk_index`.
/// Results come back in chunk order regardless of `workers`.
pub fn chunked<T, F>(seed: u64, stream_base: u64, total: u64, chunk: u64, workers: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut LabRng, u64, u64) -> T + Sync + Send,
{
    let chunk = chunk.max(1);
    let n_chunks = total.div_ceil(chunk);
    let run = |c: u64| {
        let count = chunk.min(total - c * chunk);
        let mut rng = stream_rng(seed, stream_base.wrapping_add(c));
        f(&mut rng, count, c)
    };
    if workers <= 1 || n_chunks <= 1 {
        return (0..n_chunks).map(run).collect();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(|| (0..n_chunks).into_par_iter().map(run).collect()),
        Err(_) => (0..n_chunks).map(run).collect(),
    }
}

/// [`chunked`] specialised to mean accumulation, merged in chunk order.
pub fn chunked_mean<F>(seed: u64, stream_base: u64, total: u64, workers: usize, f: F) -> MeanAcc
where
    F: Fn(&mut LabRng, u64, &mut MeanAcc) + Sync + Send,
{
    let parts = chunked(seed, stream_base, total, DEFAULT_CHUNK, workers, |rng, count, _| {
        let mut acc = MeanAcc::default();
        f(rng, count, &mut acc);
        acc
    });
    let mut out = MeanAcc::default();
    for p in &parts {
        out.merge(p);
    }
    out
}
