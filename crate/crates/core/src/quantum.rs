//! Query-model simulation of the one-query Forrelation algorithm and its
//! amplified k-fold version.
//!
//! The circuit itself is not built: a query on copy z returns 1 with
//! probability (1 + forr(z))/2, which is all an observer can see.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dist::{ForrelationParams, SigmaSampler};
use crate::error::{Error, Result};
use crate::problem::PromiseLabel;
use crate::report::ExperimentReport;
use crate::rng::{chunked, purpose_stream};
use crate::wht::{forr, forr_with_scratch};

pub const DEFAULT_CONSTANT: f64 = 128.0;
pub const DEFAULT_THRESHOLD_FRACTION: f64 = 3.0 / 8.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AmplificationPlan {
    pub repetitions: u64,
    pub threshold: f64,
    pub per_copy_error_budget: f64,
}

impl AmplificationPlan {
    pub fn new(repetitions: u64, threshold: f64, per_copy_error_budget: f64, params: &ForrelationParams) -> Result<Self> {
        let lo = (1.0 + params.eps / 4.0) / 2.0;
        let hi = (1.0 + params.eps / 2.0) / 2.0;
        if repetitions == 0 {
            return Err(Error::InvalidParameter("repetitions must be positive".into()));
        }
        if !(threshold > lo && threshold < hi) {
            return Err(Error::InvalidParameter(format!(
                "threshold {threshold} must lie strictly inside ({lo}, {hi})"
            )));
        }
        Ok(Self { repetitions, threshold, per_copy_error_budget })
    }

    /// Hoeffding bound on the per-copy error, using the distance from the
    /// threshold to the nearer acceptance level.
    pub fn hoeffding_bound(&self, params: &ForrelationParams) -> f64 {
        let lo = (1.0 + params.eps / 4.0) / 2.0;
        let hi = (1.0 + params.eps / 2.0) / 2.0;
        let gap = (self.threshold - lo).min(hi - self.threshold);
        (-2.0 * self.repetitions as f64 * gap * gap).exp()
    }
}

pub fn make_plan(params: &ForrelationParams) -> AmplificationPlan {
    make_plan_with(params, DEFAULT_CONSTANT, DEFAULT_THRESHOLD_FRACTION)
        .expect("default constants give a valid plan")
}

/// r = ⌈(constant/ε²)·ln(10k)⌉ and τ = (1 + fraction·ε)/2.
pub fn make_plan_with(params: &ForrelationParams, constant: f64, threshold_fraction: f64) -> Result<AmplificationPlan> {
    if !(constant > 0.0) {
        return Err(Error::InvalidParameter(format!("constant must be positive, got {constant}")));
    }
    let k = params.k as f64;
    let r = (constant / (params.eps * params.eps) * (10.0 * k).ln()).ceil() as u64;
    let tau = (1.0 + threshold_fraction * params.eps) / 2.0;
    AmplificationPlan::new(r, tau, 1.0 / (10.0 * k), params)
}

/// Counts oracle calls.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct QueryLedger {
    pub queries: u64,
}

pub fn accept_prob_of_forr(f: f64) -> f64 {
    ((1.0 + f) / 2.0).clamp(0.0, 1.0)
}

/// (1 + forr(z))/2 for a single copy z of length 2N.
pub fn single_query_accept_prob(z: &[f64]) -> Result<f64> {
    Ok(accept_prob_of_forr(forr(z)?))
}

/// One copy behind a query interface; forr is computed once.
#[derive(Clone, Copy, Debug)]
pub struct QueryOracle {
    accept: f64,
}

impl QueryOracle {
    pub fn new(z: &[f64]) -> Result<Self> {
        Ok(Self { accept: single_query_accept_prob(z)? })
    }

    pub fn from_accept_prob(accept: f64) -> Self {
        Self { accept }
    }

    pub fn accept_prob(&self) -> f64 {
        self.accept
    }

    pub fn query<R: Rng + ?Sized>(&self, ledger: &mut QueryLedger, rng: &mut R) -> u8 {
        ledger.queries += 1;
        (rng.random::<f64>() < self.accept) as u8
    }
}

pub fn simulate_single_query<R: Rng + ?Sized>(z: &[f64], ledger: &mut QueryLedger, rng: &mut R) -> Result<u8> {
    Ok(QueryOracle::new(z)?.query(ledger, rng))
}

/// Decides one copy: −1 (Yes) when the empirical accept rate reaches τ.
pub fn decide_copy<R: Rng + ?Sized>(
    oracle: &QueryOracle,
    plan: &AmplificationPlan,
    ledger: &mut QueryLedger,
    rng: &mut R,
) -> i8 {
    let ones: u64 = (0..plan.repetitions).map(|_| oracle.query(ledger, rng) as u64).sum();
    if ones as f64 / plan.repetitions as f64 >= plan.threshold {
        -1
    } else {
        1
    }
}

/// Guesses F^(k)(z) as the product of the k amplified copy decisions.
pub fn solve_xor_k<R: Rng + ?Sized>(
    z: &[f64],
    params: &ForrelationParams,
    plan: &AmplificationPlan,
    ledger: &mut QueryLedger,
    rng: &mut R,
) -> Result<i8> {
    if z.len() != params.total_len() {
        return Err(Error::InvalidDimension(format!(
            "expected {} coordinates, got {}",
            params.total_len(),
            z.len()
        )));
    }
    let mut scratch = Vec::with_capacity(params.n);
    let mut guess = 1i8;
    for copy in z.chunks(params.copy_len()) {
        let (x, y) = copy.split_at(params.n);
        let oracle = QueryOracle::from_accept_prob(accept_prob_of_forr(forr_with_scratch(x, y, &mut scratch)?));
        guess *= decide_copy(&oracle, plan, ledger, rng);
    }
    Ok(guess)
}

/// Success rate of [`solve_xor_k`] on σ-sampled instances with uniformly
/// random labels.
pub fn quantum_success(
    params: &ForrelationParams,
    plan: &AmplificationPlan,
    trials: u64,
    max_rejects: u64,
    seed: u64,
    workers: usize,
) -> Result<ExperimentReport> {
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be positive".into()));
    }
    let parts = chunked(seed, purpose_stream("quantum-success"), trials, 64, workers, |rng, count, _| {
        let mut sampler = SigmaSampler::new(*params, max_rejects);
        let mut z = Vec::new();
        let mut ledger = QueryLedger::default();
        let mut wins = 0u64;
        for _ in 0..count {
            let label = if rng.random::<bool>() { PromiseLabel::Yes } else { PromiseLabel::No };
            sampler.sample_into(label, &mut z, rng)?;
            let guess = solve_xor_k(&z, params, plan, &mut ledger, rng)?;
            wins += (Some(guess) == label.value()) as u64;
        }
        Ok::<_, Error>((wins, ledger.queries, sampler.attempts(), sampler.rejects()))
    });
    let (mut wins, mut queries, mut attempts, mut rejects) = (0, 0, 0, 0);
    for p in parts {
        let (w, q, a, r) = p?;
        wins += w;
        queries += q;
        attempts += a;
        rejects += r;
    }
    let rate = wins as f64 / trials as f64;
    Ok(ExperimentReport::new("quantum-success", params, seed, workers)
        .with_estimate(rate, (rate * (1.0 - rate) / trials as f64).sqrt(), trials)
        .detail("repetitions", plan.repetitions as f64)
        .detail("threshold", plan.threshold)
        .detail("queries_per_trial", queries as f64 / trials as f64)
        .detail("sigma_rejection_rate", rejects as f64 / attempts.max(1) as f64)
        .detail("hoeffding_copy_error", plan.hoeffding_bound(params)))
}
