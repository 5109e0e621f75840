//! The two-coordinate correlation tester: per copy, read x_i and y_j and
//! guess Yes when their product agrees in sign with E_𝒢[x_i y_j].

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::tree::DecisionTree;
use crate::dist::sampler::{fill_mu, round_coordinate};
use crate::dist::{CopyPattern, ForrelationParams, Parity, SigmaSampler};
use crate::error::{Error, Result};
use crate::problem::PromiseLabel;
use crate::report::ExperimentReport;
use crate::rng::{chunked, purpose_stream, DEFAULT_CHUNK};
use crate::wht::hadamard_sign;

#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationTester {
    params: ForrelationParams,
    pairs: Vec<(usize, usize)>,
}

impl CorrelationTester {
    /// `pairs[c] = (i, j)` reads x_i and y_j of copy c.
    pub fn new(params: ForrelationParams, pairs: Vec<(usize, usize)>) -> Result<Self> {
        if pairs.len() != params.k {
            return Err(Error::InvalidDimension(format!("need {} pairs, got {}", params.k, pairs.len())));
        }
        for &(i, j) in &pairs {
            if i >= params.n || j >= params.n {
                return Err(Error::OutOfRange { index: i.max(j), len: params.n });
            }
        }
        Ok(Self { params, pairs })
    }

    /// Reads (x₀, y₀) in every copy.
    pub fn diagonal(params: ForrelationParams) -> Self {
        Self { pairs: vec![(0, 0); params.k], params }
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    fn copy_guess(&self, c: usize, xi: f64, yj: f64) -> i8 {
        let (i, j) = self.pairs[c];
        let s = xi * yj * hadamard_sign(i, j);
        if s > 0.0 {
            -1
        } else {
            1
        }
    }

    pub fn decide(&self, z: &[f64]) -> Result<i8> {
        if z.len() != self.params.total_len() {
            return Err(Error::InvalidDimension(format!(
                "expected {} coordinates, got {}",
                self.params.total_len(),
                z.len()
            )));
        }
        let (n, len) = (self.params.n, self.params.copy_len());
        Ok(self
            .pairs
            .iter()
            .enumerate()
            .map(|(c, &(i, j))| self.copy_guess(c, z[c * len + i], z[c * len + n + j]))
            .product())
    }

    /// The same function as a depth-2k decision tree.
    pub fn as_tree(&self) -> DecisionTree {
        self.subtree(0, 1)
    }

    fn subtree(&self, c: usize, acc: i8) -> DecisionTree {
        if c == self.pairs.len() {
            return DecisionTree::Leaf(acc);
        }
        let (i, j) = self.pairs[c];
        let (n, len) = (self.params.n, self.params.copy_len());
        let branch = |xi: f64| {
            DecisionTree::node(
                c * len + n + j,
                self.subtree(c + 1, acc * self.copy_guess(c, xi, 1.0)),
                self.subtree(c + 1, acc * self.copy_guess(c, xi, -1.0)),
            )
        };
        DecisionTree::node(c * len + i, branch(1.0), branch(-1.0))
    }
}

/// How instances are produced when measuring the tester.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TesterSource {
    /// μ̃₀ vs μ̃₁, sampling only the two read coordinates of each copy from
    /// their exact joint law.
    ReadCoordinates,
    /// μ̃₀ vs μ̃₁ with full instances.
    FullInstance,
    /// σ₀ vs σ₁.
    Sigma,
    /// Uniform inputs on both sides.
    Uniform,
}

impl TesterSource {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "read-coordinates" => Ok(Self::ReadCoordinates),
            "full-instance" => Ok(Self::FullInstance),
            "sigma" => Ok(Self::Sigma),
            "uniform" => Ok(Self::Uniform),
            other => Err(Error::InvalidParameter(format!("unknown tester source '{other}'"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::ReadCoordinates => "read-coordinates",
            Self::FullInstance => "full-instance",
            Self::Sigma => "sigma",
            Self::Uniform => "uniform",
        }
    }
}

fn uniform_sign<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    if rng.random::<bool>() {
        1.0
    } else {
        -1.0
    }
}

/// One μ̃ draw restricted to the tester's coordinates. Within a 𝒢 copy,
/// (x_i, y_j) is bivariate normal with variance ε and correlation
/// h = (−1)^{⟨i,j⟩}/√N.
fn tester_output_marginal<R: Rng + ?Sized>(t: &CorrelationTester, parity: Parity, rng: &mut R) -> i8 {
    let p = &t.params;
    let pattern = CopyPattern::sample(p.k, parity, rng);
    let sd = p.eps.sqrt();
    let mut out = 1i8;
    for (c, &(i, j)) in t.pairs.iter().enumerate() {
        let (xi, yj) = if pattern.contains(c) {
            let h = hadamard_sign(i, j) / (p.n as f64).sqrt();
            let g1: f64 = rng.sample(StandardNormal);
            let g2: f64 = rng.sample(StandardNormal);
            let x = sd * g1;
            let y = sd * (h * g1 + (1.0 - h * h).sqrt() * g2);
            (round_coordinate(x, rng) as f64, round_coordinate(y, rng) as f64)
        } else {
            (uniform_sign(rng), uniform_sign(rng))
        };
        out *= t.copy_guess(c, xi, yj);
    }
    out
}

/// Advantage (E_No D − E_Yes D)/2 of the tester, with `n_samples` draws per
/// side. Both sides share stream ids.
pub fn measure_tester_advantage(
    tester: &CorrelationTester,
    source: TesterSource,
    n_samples: u64,
    max_rejects: u64,
    seed: u64,
    workers: usize,
) -> Result<ExperimentReport> {
    let p = tester.params;
    let base = purpose_stream("tester-advantage");
    let mut means = [0.0f64; 2];
    let mut rejection = 0.0;
    for (side, label) in [PromiseLabel::No, PromiseLabel::Yes].into_iter().enumerate() {
        let parity = Parity::for_label(label).expect("inside promise");
        let parts = chunked(seed, base, n_samples, DEFAULT_CHUNK, workers, |rng, count, _| {
            let mut sum = 0i64;
            let mut z = vec![0.0; p.total_len()];
            let mut sampler = SigmaSampler::new(p, max_rejects);
            for _ in 0..count {
                let d = match source {
                    TesterSource::ReadCoordinates => tester_output_marginal(tester, parity, rng),
                    TesterSource::FullInstance => {
                        fill_mu(&p, parity, true, &mut z, rng);
                        tester.decide(&z)?
                    }
                    TesterSource::Sigma => {
                        sampler.sample_into(label, &mut z, rng)?;
                        tester.decide(&z)?
                    }
                    TesterSource::Uniform => {
                        crate::dist::sampler::fill_uniform_signs(&mut z, rng);
                        tester.decide(&z)?
                    }
                };
                sum += d as i64;
            }
            Ok::<_, Error>((sum, sampler.attempts(), sampler.rejects()))
        });
        let (mut sum, mut att, mut rej) = (0i64, 0u64, 0u64);
        for part in parts {
            let (s, a, r) = part?;
            sum += s;
            att += a;
            rej += r;
        }
        means[side] = sum as f64 / n_samples as f64;
        if att > 0 {
            rejection = f64::max(rejection, rej as f64 / att as f64);
        }
    }
    let n = n_samples as f64;
    let gap = means[0] - means[1];
    let se = ((1.0 - means[0] * means[0]) / n + (1.0 - means[1] * means[1]) / n).max(0.0).sqrt();
    let mut report = ExperimentReport::new("tester-advantage", &p, seed, workers)
        .with_estimate(gap / 2.0, se / 2.0, n_samples)
        .detail("gap", gap)
        .detail("mean_no", means[0])
        .detail("mean_yes", means[1])
        .with_note(source.name());
    if source == TesterSource::Sigma {
        report = report.detail("sigma_rejection_rate", rejection);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;

    #[test]
    fn tree_form_agrees_with_decide() {
        let p = ForrelationParams::with_eps(4, 2, 0.2).unwrap();
        let t = CorrelationTester::new(p, vec![(1, 3), (2, 2)]).unwrap();
        let tree = t.as_tree();
        assert_eq!(tree.depth(), 4);
        let mut rng = stream_rng(1, 0);
        for _ in 0..500 {
            let z: Vec<f64> = (0..16).map(|_| uniform_sign(&mut rng)).collect();
            assert_eq!(tree.eval(&z).unwrap(), t.decide(&z).unwrap());
        }
    }

    #[test]
    fn guesses_yes_on_aligned_signs() {
        let p = ForrelationParams::with_eps(2, 1, 0.2).unwrap();
        let t = CorrelationTester::new(p, vec![(1, 1)]).unwrap();
        // ⟨1,1⟩ = 1, so x₁ = 1, y₁ = −1 is the aligned case
        assert_eq!(t.decide(&[1.0, 1.0, 1.0, -1.0]).unwrap(), -1);
        assert_eq!(t.decide(&[1.0, 1.0, 1.0, 1.0]).unwrap(), 1);
        assert!(CorrelationTester::new(p, vec![(2, 0)]).is_err());
    }

    #[test]
    fn marginal_sampling_matches_full_instances() {
        let p = ForrelationParams::with_eps(8, 1, 0.3).unwrap();
        let t = CorrelationTester::new(p, vec![(3, 5)]).unwrap();
        let a = measure_tester_advantage(&t, TesterSource::ReadCoordinates, 400_000, 1, 7, 1).unwrap();
        let b = measure_tester_advantage(&t, TesterSource::FullInstance, 400_000, 1, 8, 1).unwrap();
        let se = (a.stderr.powi(2) + b.stderr.powi(2)).sqrt();
        assert!((a.estimate - b.estimate).abs() < 4.0 * se, "{} vs {}", a.estimate, b.estimate);
        assert!(a.estimate > 0.0);
    }

    #[test]
    fn uniform_inputs_give_no_advantage() {
        let p = ForrelationParams::with_eps(16, 1, 0.2).unwrap();
        let t = CorrelationTester::diagonal(p);
        let r = measure_tester_advantage(&t, TesterSource::Uniform, 200_000, 1, 9, 1).unwrap();
        assert!(r.estimate.abs() < 3.0 * r.stderr);
    }

    #[test]
    fn sigma_source_runs() {
        let p = ForrelationParams::with_eps(256, 1, 0.3).unwrap();
        let t = CorrelationTester::diagonal(p);
        let r = measure_tester_advantage(&t, TesterSource::Sigma, 2000, 10_000, 10, 1).unwrap();
        assert!(r.details.contains_key("sigma_rejection_rate"));
    }
}
