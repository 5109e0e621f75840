//! Acceptance criteria 1–12. Prints one line per criterion and exits
//! nonzero if any fails.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::Rng;

use forrlab::adversaries::protocol::{check_restriction_identity, extend_protocol};
use forrlab::adversaries::{
    measure_tester_advantage, random_protocol, tree_advantage_scan, xor_lift_table, CorrelationTester,
    ProtocolMixture, Restriction, ScanBudget, TesterSource, TreeStrategy,
};
use forrlab::dist::{estimate_moments, gaussian_moment_exact, mu_moment_difference, MomentIndex};
use forrlab::fourier::{
    brute_fourier, check_level_k_inequality, required_min_cost, weight_bound_probe, CheckStatus,
};
use forrlab::identity::{
    check_gaussian_concentration, check_rounding_law, check_rounding_stability, check_telescoping_pathwise,
    closed_form_coefficient, telescoping_coefficient, GridLabeling, StabilityCenter,
};
use forrlab::quantum::{make_plan, quantum_success};
use forrlab::rng::stream_rng;
use forrlab::wht::{fwht, hadamard_sign, naive_hadamard_apply};
use forrlab::{ForrelationParams, Source};

type Outcome = Result<(bool, String), String>;

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn params(n: usize, k: usize, eps: f64) -> Result<ForrelationParams, String> {
    ForrelationParams::with_eps(n, k, eps).map_err(err)
}

fn wht_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = stream_rng(1, 1);
    let mut dev = 0.0f64;
    for log in 1..=10 {
        let v: Vec<f64> = (0..1usize << log).map(|_| rng.random_range(-1.0..1.0)).collect();
        let fast = fwht(&v).map_err(err)?;
        let slow = naive_hadamard_apply(&v).map_err(err)?;
        dev = fast.iter().zip(&slow).map(|(a, b)| (a - b).abs()).fold(dev, f64::max);
    }
    let big: Vec<f64> = (0..1usize << 20).map(|_| rng.random_range(-1.0..1.0)).collect();
    let back = fwht(&fwht(&big).map_err(err)?).map_err(err)?;
    let inv = big.iter().zip(&back).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let secs = start.elapsed().as_secs_f64();
    Ok((dev < 1e-10 && inv < 1e-10 && secs < 5.0, format!("oracle dev {dev:.2e}, involution dev {inv:.2e}, {secs:.2}s")))
}

fn subsets(len: usize, max: usize) -> Vec<Vec<usize>> {
    (0u32..1 << len)
        .filter(|m| m.count_ones() as usize <= max)
        .map(|m| (0..len).filter(|&i| m >> i & 1 == 1).collect())
        .collect()
}

fn moment_oracle() -> Outcome {
    let eps = 0.3;
    let mut ok = true;
    let mut checked = 0usize;
    for n in [2usize, 4, 8] {
        let p = params(n, 1, eps)?;
        for i in 0..n {
            for j in 0..n {
                let got = gaussian_moment_exact(&[i], &[j], &p).map_err(err)?;
                let want = eps / (n as f64).sqrt() * hadamard_sign(i, j);
                ok &= (got - want).abs() <= 1e-15;
                checked += 1;
            }
        }
        for s in subsets(n, 6) {
            for t in subsets(n, 6 - s.len()) {
                if s.len() == t.len() {
                    if s.len() == 2 {
                        let v = gaussian_moment_exact(&s, &t, &p).map_err(err)?;
                        ok &= v.abs() <= eps * eps * 2.0 / n as f64 + 1e-15;
                        checked += 1;
                    }
                    continue;
                }
                ok &= gaussian_moment_exact(&s, &t, &p).map_err(err)? == 0.0;
                checked += 1;
            }
        }
    }
    if !ok {
        return Ok((false, format!("exact values wrong among {checked} checks")));
    }
    let p = params(16, 1, 0.2)?;
    let mut rng = stream_rng(2, 2);
    let mut indices = Vec::new();
    let mut exact = Vec::new();
    while indices.len() < 20 {
        let size = rng.random_range(1..=2);
        let mut s: Vec<usize> = (0..16).collect();
        let mut t = s.clone();
        rand::seq::SliceRandom::shuffle(&mut s[..], &mut rng);
        rand::seq::SliceRandom::shuffle(&mut t[..], &mut rng);
        s.truncate(size);
        t.truncate(size);
        let coords: Vec<usize> = s.iter().copied().chain(t.iter().map(|&j| j + 16)).collect();
        exact.push(gaussian_moment_exact(&s, &t, &p).map_err(err)?);
        indices.push(MomentIndex::from_global(&coords, &p).map_err(err)?);
    }
    let accs = estimate_moments(Source::Gaussian, &indices, &p, 1_000_000, 3, 1).map_err(err)?;
    let worst = accs
        .iter()
        .zip(&exact)
        .map(|(a, e)| (a.mean() - e).abs() / a.stderr())
        .fold(0.0, f64::max);
    Ok((worst <= 3.0, format!("{checked} exact checks; worst Monte Carlo z-score {worst:.2} over 20 indices")))
}

fn mu_difference_suite() -> Outcome {
    let (k, n, eps) = (2usize, 2usize, 0.3);
    let p = params(n, k, eps)?;
    let (mut zeros, mut bounded, mut ok) = (0usize, 0usize, true);
    for coords in subsets(p.total_len(), 6) {
        let index = MomentIndex::from_global(&coords, &p).map_err(err)?;
        let d = mu_moment_difference(&index, &p).map_err(err)?;
        let parts = index.parts();
        let must_vanish =
            coords.len() < 2 * k || parts.iter().any(|q| q.is_empty()) || parts.iter().any(|q| q.len() % 2 == 1);
        if must_vanish {
            ok &= d == 0.0;
            zeros += 1;
        } else {
            let i = coords.len() / 2;
            let fact: f64 = (1..=i).map(|v| v as f64).product();
            let bound = 2f64.powi(1 - k as i32) * eps.powi(i as i32) * (n as f64).powf(-(i as f64) / 2.0) * fact;
            ok &= d.abs() <= bound * (1.0 + 1e-12);
            bounded += 1;
        }
    }
    Ok((ok, format!("{zeros} vanishing indices, {bounded} bounded indices")))
}

fn telescoping() -> Outcome {
    let start = Instant::now();
    let mut ok = true;
    let mut count = 0;
    for k in 1..=3usize {
        for t in 1..=4usize {
            let total = (t + 1).pow(k as u32);
            for idx in 0..total {
                let b: Vec<usize> = (0..k).map(|j| idx / (t + 1).pow(j as u32) % (t + 1)).collect();
                ok &= telescoping_coefficient(&b, t).map_err(err)? == closed_form_coefficient(&b, t);
                count += 1;
            }
        }
    }
    let mut rng = stream_rng(4, 4);
    let mut dev = 0.0f64;
    for (k, t) in [(2usize, 3usize), (3, 4)] {
        for _ in 0..100 {
            let values = (0..(t + 1).pow(k as u32)).map(|_| rng.random_range(-1.0..1.0)).collect();
            let g = GridLabeling::new(k, t, values).map_err(err)?;
            dev = dev.max(check_telescoping_pathwise(&g).map_err(err)?.deviation);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ok &= dev <= 1e-12 && secs < 1.0;
    Ok((ok, format!("{count} coefficients, pathwise dev {dev:.1e}, {secs:.3}s")))
}

fn rounding_law() -> Outcome {
    let mut rng = stream_rng(5, 5);
    let mut passed = 0;
    let mut worst = 0.0f64;
    for case in 0..50u64 {
        let tt: Vec<f64> = (0..256).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
        let table = brute_fourier(&tt).map_err(err)?;
        let z: Vec<f64> = (0..8).map(|_| rng.random_range(-1.5..1.5)).collect();
        let c = check_rounding_law(&table, &z, 1_000_000, 100 + case, 1).map_err(err)?;
        passed += c.pass as usize;
        if c.stderr > 0.0 {
            worst = worst.max((c.mean - c.exact).abs() / c.stderr);
        }
    }
    Ok((passed == 50, format!("{passed}/50 cases within 4 stderr, worst z {worst:.2}")))
}

fn quantum() -> Outcome {
    let p = params(4096, 2, 0.2)?;
    let plan = make_plan(&p);
    let r = quantum_success(&p, &plan, 1000, 10_000, 6, 1).map_err(err)?;
    let rej = r.details["sigma_rejection_rate"];
    Ok((
        r.estimate >= 0.85 && rej <= 0.05,
        format!("success {:.3} ± {:.3}, rejection rate {rej:.4}, r = {}", r.estimate, r.stderr, plan.repetitions),
    ))
}

fn tester_scaling() -> Outcome {
    let mut pts = Vec::new();
    let mut text = Vec::new();
    for n in [16usize, 64, 256, 1024] {
        let p = params(n, 1, 0.2)?;
        let r = measure_tester_advantage(&CorrelationTester::diagonal(p), TesterSource::ReadCoordinates, 10_000_000, 10_000, 7, 1)
            .map_err(err)?;
        if r.estimate <= 0.0 {
            return Ok((false, format!("non-positive advantage at N={n}")));
        }
        pts.push(((n as f64).ln(), r.estimate.ln()));
        text.push(format!("N={n}:{:.5}", r.estimate));
    }
    let m = pts.len() as f64;
    let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / m, pts.iter().map(|p| p.1).sum::<f64>() / m);
    let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    let a1 = (pts[0].1).exp();
    let p2 = params(16, 2, 0.2)?;
    let r2 = measure_tester_advantage(&CorrelationTester::diagonal(p2), TesterSource::ReadCoordinates, 100_000_000, 10_000, 8, 1)
        .map_err(err)?;
    let ratio = r2.estimate / (a1 * a1);
    let ok = (slope + 0.5).abs() <= 0.1 && (0.5..=2.0).contains(&ratio);
    Ok((ok, format!("{}; slope {slope:.3}; k=2 advantage {:.2e}, ratio to square {ratio:.3}", text.join(" "), r2.estimate)))
}

fn exhaustive_trees() -> Outcome {
    let p = params(4, 1, 0.3)?;
    let budget = ScanBudget { samples: 20_000, ..Default::default() };
    let d2 = tree_advantage_scan(&p, 2, TreeStrategy::Exhaustive, &budget, 9, 1).map_err(err)?;
    let again = tree_advantage_scan(&p, 2, TreeStrategy::Exhaustive, &budget, 9, 1).map_err(err)?;
    let d3 = tree_advantage_scan(&p, 3, TreeStrategy::Exhaustive, &budget, 9, 1).map_err(err)?;
    let same = d2.to_json_line().map_err(err)? == again.to_json_line().map_err(err)?;
    let ok = d2.estimate.is_finite() && same && d2.estimate < d3.estimate;
    Ok((ok, format!("depth 2: {:.4}, depth 3: {:.4}, reproducible: {same}", d2.estimate, d3.estimate)))
}

fn restriction_identity() -> Outcome {
    let mut rng = stream_rng(10, 10);
    let mut dev = 0.0f64;
    for _ in 0..20 {
        let depth = rng.random_range(1..=8);
        let mix = ProtocolMixture::single(random_protocol(6, depth, &mut rng).map_err(err)?);
        let v = Restriction::random(6, &mut rng);
        dev = dev.max(check_restriction_identity(&mix, &v, 1).map_err(err)?.max_deviation);
    }
    Ok((dev <= 1e-12, format!("max deviation {dev:.1e} over 20 restrictions")))
}

fn fourier_probes() -> Outcome {
    let mut rng = stream_rng(11, 11);
    let mut worst = 0.0f64;
    let mut lines = Vec::new();
    for i in 0..20 {
        let k = 1 + i % 2;
        let l = required_min_cost(k);
        let base_arity = if k == 1 { rng.random_range(3..=7) } else { 4 };
        let depth = rng.random_range(1..=8);
        let base = random_protocol(base_arity, depth, &mut rng).map_err(err)?;
        let ext = extend_protocol(&base, l).map_err(err)?;
        if ext.min_cost() < l || ext.arity > 10 {
            return Ok((false, format!("protocol {i} outside the probed range")));
        }
        let table = brute_fourier(&xor_lift_table(&ext).map_err(err)?).map_err(err)?;
        let probe = weight_bound_probe(&table, k, ext.cost);
        worst = worst.max(probe.ratio);
        if i < 2 {
            lines.push(format!("k={k} M={} c={} L={:.3e}", ext.arity, ext.cost, probe.mass));
        }
    }
    let mut applicable = 0;
    let mut failed = 0;
    while applicable < 200 {
        let m = rng.random_range(4..=10);
        let density: f64 = rng.random_range(0.002..0.4);
        let member: Vec<bool> = (0..1usize << m).map(|_| rng.random_bool(density)).collect();
        let k = rng.random_range(1..=6);
        match check_level_k_inequality(&member, k).map_err(err)?.status {
            CheckStatus::Pass => applicable += 1,
            CheckStatus::Fail => {
                applicable += 1;
                failed += 1;
            }
            CheckStatus::Inapplicable => {}
        }
    }
    let ok = worst <= 4.0 && failed == 0;
    Ok((ok, format!("max L_2k/bound {worst:.2e} ({}); level-k failures {failed}/200", lines.join(", "))))
}

fn concentration() -> Outcome {
    let p = params(4096, 1, 0.2)?;
    let g = check_gaussian_concentration(&p, 100_000, 12, 1).map_err(err)?;
    let low = g.details["low_tail_count"];
    let s = check_rounding_stability(&p, StabilityCenter::ClampedGaussian, 10_000, 13, 1).map_err(err)?;
    Ok((
        low == 0.0 && s.estimate <= 0.01,
        format!("low-tail count {low}, mean forr {:.4}, stability violations {:.4}", g.estimate, s.estimate),
    ))
}

fn cli(args: &[&str], dir: &Path) -> Result<(Vec<u8>, Option<i32>), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_forrlab"))
        .args(args)
        .current_dir(dir)
        .env_remove("FORRLAB_OUT_DIR")
        .output()
        .map_err(err)?;
    Ok((out.stdout, out.status.code()))
}

fn reproducibility() -> Outcome {
    let dir = tempfile::tempdir().map_err(err)?;
    let mut rng = stream_rng(14, 14);
    let protocol = random_protocol(3, 4, &mut rng).map_err(err)?;
    std::fs::write(dir.path().join("c.json"), protocol.to_json().map_err(err)?).map_err(err)?;
    let table: Vec<String> = (0..16).map(|i| format!("{}", if i % 3 == 0 { -1 } else { 1 })).collect();
    std::fs::write(dir.path().join("t.txt"), table.join(" ")).map_err(err)?;
    let cfg = "n = 16\nk = 2\neps = 0.2\ntrials = 50\nseed = 21\nworkers = 2\n";
    std::fs::write(dir.path().join("q.toml"), cfg).map_err(err)?;
    let runs: Vec<Vec<&str>> = vec![
        vec!["sample", "--n", "16", "--k", "2", "--eps", "0.2", "--label", "no", "--count", "20", "--seed", "3"],
        vec!["label", "inst.bin"],
        vec!["quantum-success", "--config", "q.toml"],
        vec!["quantum-success", "--n", "64", "--eps", "0.2", "--trials", "100", "--seed", "5", "--workers", "2", "--format", "csv"],
        vec!["tree-advantage", "--n", "4", "--eps", "0.3", "--strategy", "exhaustive", "--samples", "5000", "--seed", "1"],
        vec!["tree-advantage", "--n", "8", "--eps", "0.3", "--strategy", "greedy", "--depth", "3", "--samples", "4000", "--workers", "2"],
        vec!["estimate-moments", "--n", "8", "--k", "2", "--eps", "0.3", "--source", "mu1-tilde", "--coords", "0,8,16,24", "--samples", "50000", "--seed", "2", "--workers", "2"],
        vec!["lift-eval", "--protocol", "c.json"],
        vec!["lift-eval", "--protocol", "c.json", "--extend", "1", "--z", "5"],
        vec!["fourier-mass", "--protocol", "c.json"],
        vec!["fourier-mass", "--table", "t.txt"],
        vec!["verify", "--seed", "4"],
        vec!["run", "--experiment", "tester-advantage", "--n", "16", "--eps", "0.2", "--samples", "20000", "--workers", "2"],
    ];
    let sample_bytes = cli(&runs[0], dir.path())?.0;
    std::fs::write(dir.path().join("inst.bin"), &sample_bytes).map_err(err)?;
    let mut differing = Vec::new();
    for args in &runs {
        let a = cli(args, dir.path())?;
        let b = cli(args, dir.path())?;
        if a != b || a.0.is_empty() || a.1 != Some(0) {
            differing.push(format!("{} (exit {:?})", args[0], a.1));
        }
    }
    Ok((differing.is_empty(), format!("{} invocations compared; mismatched or failing: {:?}", runs.len(), differing)))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("WHT oracle equivalence", wht_oracle),
        ("Gaussian moment oracle", moment_oracle),
        ("mu moment difference", mu_difference_suite),
        ("telescoping identity", telescoping),
        ("rounding law", rounding_law),
        ("quantum success", quantum),
        ("classical baseline scaling", tester_scaling),
        ("exhaustive tree sanity", exhaustive_trees),
        ("restriction identity", restriction_identity),
        ("Fourier weight probes", fourier_probes),
        ("concentration", concentration),
        ("CLI reproducibility", reproducibility),
    ];
    let mut failures = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (ok, detail) = match f() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        failures += !ok as usize;
        println!(
            "criterion {:>2} {:<28} {} ({:.1}s) {detail}",
            i + 1,
            name,
            if ok { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures > 0 {
        std::process::exit(1);
    }
}
