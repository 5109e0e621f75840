//! Experiment configuration and dispatch.
//!
//! A config is a flat TOML table; command-line overrides are applied on top
//! by the caller. [`run`] turns a config into reports in a fixed order.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::adversaries::protocol::{check_restriction_identity, lift_fourier_via_rectangles};
use crate::adversaries::{
    measure_tester_advantage, random_protocol, tree_advantage_scan, xor_lift_table, CorrelationTester,
    ProtocolMixture, Restriction, ScanBudget, TesterSource, TreeStrategy,
};
use crate::dist::moments::uniform_copy_moment;
use crate::dist::{estimate_moment, gaussian_moment_exact, mu_moment, mu_moment_difference, MomentIndex, Parity};
use crate::dist::{ForrelationParams, Source};
use crate::error::{Error, Result};
use crate::fourier::{brute_fourier, check_convolution, check_level_k_inequality, CheckStatus, FourierTable};
use crate::identity::{
    check_gaussian_concentration, check_rounding_law, check_rounding_stability, check_telescoping_pathwise,
    check_walk_covariance, GridLabeling, StabilityCenter,
};
use crate::problem::promise_statistics;
use crate::quantum::{make_plan, quantum_success};
use crate::report::{ExperimentReport, OutputFormat};
use crate::rng::{purpose_stream, stream_rng};
use crate::wht::{fwht, naive_hadamard_apply};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "FORRLAB_OUT_DIR";

pub const EXPERIMENTS: [&str; 8] = [
    "quantum-success",
    "tree-advantage",
    "estimate-moments",
    "promise-stats",
    "tester-advantage",
    "gaussian-concentration",
    "rounding-stability",
    "verify",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: String,
    pub n: usize,
    pub k: usize,
    /// Defaults to 1/(60k² ln N) when absent.
    pub eps: Option<f64>,
    pub samples: u64,
    pub trials: u64,
    pub depth: usize,
    pub strategy: String,
    pub source: String,
    pub tester_source: String,
    /// Global coordinates of a moment index.
    pub coords: Vec<usize>,
    pub max_rejects: u64,
    pub max_trees: u64,
    pub seed: u64,
    pub workers: usize,
    pub format: OutputFormat,
    pub timing: bool,
    pub output: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: "verify".into(),
            n: 64,
            k: 1,
            eps: None,
            samples: 100_000,
            trials: 1000,
            depth: 2,
            strategy: "greedy".into(),
            source: "gaussian".into(),
            tester_source: "read-coordinates".into(),
            coords: vec![0, 64],
            max_rejects: crate::dist::sampler::DEFAULT_MAX_REJECTS,
            max_trees: 1_000_000,
            seed: 0,
            workers: 1,
            format: OutputFormat::JsonLines,
            timing: false,
            output: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn params(&self) -> Result<ForrelationParams> {
        match self.eps {
            Some(eps) => ForrelationParams::with_eps(self.n, self.k, eps),
            None => ForrelationParams::new(self.n, self.k),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !EXPERIMENTS.contains(&self.experiment.as_str()) {
            return Err(Error::InvalidParameter(format!("unknown experiment '{}'", self.experiment)));
        }
        self.params()?;
        if self.samples == 0 || self.trials == 0 || self.max_rejects == 0 || self.max_trees == 0 {
            return Err(Error::InvalidParameter("budgets must be positive".into()));
        }
        if self.workers == 0 {
            return Err(Error::InvalidParameter("workers must be positive".into()));
        }
        Ok(())
    }

    /// Output file: an explicit relative path is placed under the output
    /// directory from the environment; with no path, the environment
    /// directory gets `<experiment>.<ext>`; otherwise stdout (`None`).
    pub fn output_path(&self, env_dir: Option<&Path>) -> Option<PathBuf> {
        let ext = match self.format {
            OutputFormat::JsonLines => "jsonl",
            OutputFormat::Csv => "csv",
        };
        match (&self.output, env_dir) {
            (Some(p), Some(dir)) if p.is_relative() => Some(dir.join(p)),
            (Some(p), _) => Some(p.clone()),
            (None, Some(dir)) => Some(dir.join(format!("{}.{ext}", self.experiment))),
            (None, None) => None,
        }
    }
}

/// Runs the configured experiment.
pub fn run(config: &ExperimentConfig) -> Result<Vec<ExperimentReport>> {
    config.validate()?;
    let params = config.params()?;
    let (seed, workers) = (config.seed, config.workers);
    let start = Instant::now();
    let mut reports = match config.experiment.as_str() {
        "quantum-success" => {
            let plan = make_plan(&params);
            vec![quantum_success(&params, &plan, config.trials, config.max_rejects, seed, workers)?]
        }
        "tree-advantage" => {
            let budget = ScanBudget { samples: config.samples, max_rejects: config.max_rejects, max_trees: config.max_trees };
            let strategy = TreeStrategy::parse(&config.strategy)?;
            vec![tree_advantage_scan(&params, config.depth, strategy, &budget, seed, workers)?]
        }
        "estimate-moments" => {
            let source = Source::parse(&config.source)?;
            let index = MomentIndex::from_global(&config.coords, &params)?;
            let exact = exact_moment(source, &index, &params)?;
            let r = estimate_moment(source, &index, &params, config.samples, seed, workers)?;
            let z = if r.stderr > 0.0 { (r.estimate - exact) / r.stderr } else { 0.0 };
            let pass = if r.stderr > 0.0 { z.abs() <= 5.0 } else { (r.estimate - exact).abs() <= 1e-12 };
            vec![r.detail("exact", exact).detail("z_score", z).with_pass(pass)]
        }
        "promise-stats" => {
            vec![promise_statistics(&params, Source::parse(&config.source)?, config.samples, seed, workers)?]
        }
        "tester-advantage" => {
            let tester = CorrelationTester::diagonal(params);
            let source = TesterSource::parse(&config.tester_source)?;
            vec![measure_tester_advantage(&tester, source, config.samples, config.max_rejects, seed, workers)?]
        }
        "gaussian-concentration" => vec![check_gaussian_concentration(&params, config.samples, seed, workers)?],
        "rounding-stability" => {
            vec![check_rounding_stability(&params, StabilityCenter::ClampedGaussian, config.samples, seed, workers)?]
        }
        "verify" => verify_suite(&params, seed, workers)?,
        other => return Err(Error::InvalidParameter(format!("unknown experiment '{other}'"))),
    };
    if config.timing {
        let ms = start.elapsed().as_millis() as u64;
        for r in &mut reports {
            r.wall_time_ms = Some(ms);
        }
    }
    Ok(reports)
}

/// Exact moment of the given source: the Isserlis value for 𝒢, the cube
/// value for the uniform source, and the mixture value for μ and μ̃, which
/// share multilinear moments.
pub fn exact_moment(source: Source, index: &MomentIndex, params: &ForrelationParams) -> Result<f64> {
    Ok(match source {
        Source::Gaussian => {
            if params.k != 1 {
                return Err(Error::InvalidParameter("the gaussian source is a single copy; use k = 1".into()));
            }
            let part = &index.parts()[0];
            let n = params.n;
            let s: Vec<usize> = part.iter().copied().filter(|&c| c < n).collect();
            let t: Vec<usize> = part.iter().copied().filter(|&c| c >= n).map(|c| c - n).collect();
            gaussian_moment_exact(&s, &t, params)?
        }
        Source::Uniform => index.parts().iter().map(|p| uniform_copy_moment(p)).product(),
        Source::Mu(p) | Source::MuTilde(p) => mu_moment(index, p, params)?,
    })
}

/// True when any report carries a failing verdict.
pub fn any_failed(reports: &[ExperimentReport]) -> bool {
    reports.iter().any(|r| r.pass == Some(false))
}

fn deviation_report(name: &str, params: &ForrelationParams, seed: u64, workers: usize, dev: f64, count: u64, tol: f64) -> ExperimentReport {
    ExperimentReport::new(name, params, seed, workers)
        .with_estimate(dev, 0.0, count)
        .with_pass(dev <= tol)
        .with_note("max deviation")
}

/// The deterministic identity suite plus two cheap Monte Carlo checks. Sizes
/// are fixed; `params` only labels the rows.
pub fn verify_suite(params: &ForrelationParams, seed: u64, workers: usize) -> Result<Vec<ExperimentReport>> {
    let mut rng = stream_rng(seed, purpose_stream("verify"));
    let mut out = Vec::new();

    let mut dev = 0.0f64;
    let mut count = 0;
    for log in 1..=10 {
        let v: Vec<f64> = (0..1usize << log).map(|_| rng.random_range(-1.0..1.0)).collect();
        let fast = fwht(&v)?;
        let slow = naive_hadamard_apply(&v)?;
        let back = fwht(&fast)?;
        for i in 0..v.len() {
            dev = dev.max((fast[i] - slow[i]).abs()).max((back[i] - v[i]).abs());
        }
        count += 1;
    }
    out.push(deviation_report("verify-wht", params, seed, workers, dev, count, 1e-9));

    let mut dev = 0.0f64;
    let mut count = 0;
    for &(n, k) in &[(2usize, 1usize), (4, 2), (4, 3), (8, 2)] {
        let p = ForrelationParams::with_eps(n, k, 0.3)?;
        for _ in 0..50 {
            let parts: Vec<Vec<usize>> = (0..k)
                .map(|_| {
                    let mut part: Vec<usize> = (0..2 * n).filter(|_| rng.random_bool(0.25)).collect();
                    part.truncate(8 / k);
                    part
                })
                .collect();
            let index = MomentIndex::new(parts, &p)?;
            let direct = mu_moment_difference(&index, &p)?;
            let mixture = mu_moment(&index, Parity::Even, &p)? - mu_moment(&index, Parity::Odd, &p)?;
            dev = dev.max((direct - mixture).abs());
            count += 1;
        }
    }
    out.push(deviation_report("verify-moment-routes", params, seed, workers, dev, count, 1e-12));

    let mut dev = 0.0f64;
    let mut count = 0;
    for k in 1..=3 {
        for t in 2..=4 {
            for _ in 0..100 {
                let size = (t + 1usize).pow(k as u32);
                let values: Vec<f64> = (0..size).map(|_| rng.random_range(-1.0..1.0)).collect();
                let c = check_telescoping_pathwise(&GridLabeling::new(k, t, values)?)?;
                dev = dev.max(c.deviation);
                count += 1;
            }
        }
    }
    out.push(deviation_report("verify-telescoping", params, seed, workers, dev, count, 1e-9));

    let walk_params = ForrelationParams::with_eps(8, 2, 0.2)?;
    let cov = check_walk_covariance(&walk_params, 3, 0b01, 20_000, &mut rng)?;
    out.push(
        ExperimentReport::new("verify-walk-covariance", params, seed, workers)
            .with_estimate(cov.max_z, 0.0, 20_000)
            .with_pass(cov.pass)
            .with_note("max z-score over covariance entries")
            .detail("entries", cov.entries as f64)
            .detail("beyond_3se", cov.beyond_3se as f64)
            .detail("allowed_beyond", cov.allowed_beyond as f64),
    );

    let mut dev = 0.0f64;
    let mut count = 0;
    for _ in 0..10 {
        let f: Vec<f64> = (0..64).map(|_| rng.random_range(-1.0..1.0)).collect();
        let g: Vec<f64> = (0..64).map(|_| rng.random_range(-1.0..1.0)).collect();
        dev = dev.max(check_convolution(&f, &g)?.max_deviation);
        count += 1;
    }
    out.push(deviation_report("verify-convolution", params, seed, workers, dev, count, 1e-12));

    let mut dev = 0.0f64;
    let mut count = 0;
    for _ in 0..10 {
        let depth = rng.random_range(1..=6);
        let c = random_protocol(3, depth, &mut rng)?;
        let direct = brute_fourier(&xor_lift_table(&c)?)?;
        let via = lift_fourier_via_rectangles(&c)?;
        for (a, b) in direct.coefficients().iter().zip(via.coefficients()) {
            dev = dev.max((a - b).abs());
        }
        count += 1;
    }
    out.push(deviation_report("verify-lift-spectrum", params, seed, workers, dev, count, 1e-12));

    let mut dev = 0.0f64;
    let mut count = 0;
    for _ in 0..20 {
        let depth = rng.random_range(1..=8);
        let mix = ProtocolMixture::single(random_protocol(6, depth, &mut rng)?);
        let v = Restriction::random(6, &mut rng);
        dev = dev.max(check_restriction_identity(&mix, &v, 1)?.max_deviation);
        count += 1;
    }
    out.push(deviation_report("verify-restriction", params, seed, workers, dev, count, 1e-12));

    let (mut applicable, mut failed) = (0u64, 0u64);
    for _ in 0..200 {
        let m = rng.random_range(4..=10);
        let density = rng.random_range(0.005..0.3);
        let member: Vec<bool> = (0..1usize << m).map(|_| rng.random_bool(density)).collect();
        let k = rng.random_range(1..=4);
        match check_level_k_inequality(&member, k)?.status {
            CheckStatus::Pass => applicable += 1,
            CheckStatus::Fail => {
                applicable += 1;
                failed += 1
            }
            CheckStatus::Inapplicable => {}
        }
    }
    out.push(
        ExperimentReport::new("verify-level-k", params, seed, workers)
            .with_estimate(failed as f64, 0.0, applicable)
            .with_pass(failed == 0)
            .with_note("failures among applicable sets"),
    );

    let mut coeffs = vec![0.0; 256];
    for (s, c) in coeffs.iter_mut().enumerate() {
        if (s as u32).count_ones() <= 3 {
            *c = rng.random_range(-1.0..1.0) / 16.0;
        }
    }
    let table = FourierTable::from_coefficients(coeffs)?;
    let z: Vec<f64> = (0..8).map(|_| rng.random_range(-1.5..1.5)).collect();
    let law = check_rounding_law(&table, &z, 200_000, seed, workers)?;
    out.push(
        ExperimentReport::new("verify-rounding-law", params, seed, workers)
            .with_estimate(law.mean, law.stderr, law.n_samples)
            .with_pass(law.pass)
            .detail("exact", law.exact),
    );
    Ok(out)
}
