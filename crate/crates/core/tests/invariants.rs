use proptest::prelude::*;
use rand::Rng;

use forrlab::adversaries::protocol::{extend_protocol, junk_averaged_lift};
use forrlab::adversaries::{random_protocol, xor_lift_table};
use forrlab::dist::{mu_moment_difference, MomentIndex};
use forrlab::fourier::brute_fourier;
use forrlab::identity::{check_telescoping_pathwise, check_walk_covariance, GridLabeling};
use forrlab::problem::{copy_labels, label_k, label_of_forr};
use forrlab::quantum::{make_plan_with, solve_xor_k, QueryLedger};
use forrlab::rng::stream_rng;
use forrlab::{ForrelationParams, PromiseLabel, Source};

fn params(n: usize, k: usize, eps: f64) -> ForrelationParams {
    ForrelationParams::with_eps(n, k, eps).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn telescoping_holds_for_any_labeling(k in 1usize..=3, t in 2usize..=4, seed in any::<u64>()) {
        let mut rng = stream_rng(seed, 0);
        let values = (0..(t + 1).pow(k as u32)).map(|_| rng.random_range(-10.0..10.0)).collect();
        let c = check_telescoping_pathwise(&GridLabeling::new(k, t, values).unwrap()).unwrap();
        prop_assert!(c.deviation < 1e-9);
    }

    #[test]
    fn thresholds_scale_with_eps(f in -1.0f64..1.0, c in 0.1f64..4.0) {
        let base = params(16, 1, 0.2);
        let scaled = params(16, 1, 0.2 * c);
        prop_assert_eq!(label_of_forr(f, &base), label_of_forr(f * c, &scaled));
    }

    #[test]
    fn label_k_is_product_inside_promise(seed in any::<u64>(), k in 1usize..=4) {
        let p = params(8, k, 0.3);
        let mut rng = stream_rng(seed, 1);
        let mut z = vec![0.0; p.total_len()];
        Source::Uniform.fill(&p, &mut z, &mut rng);
        let labels = copy_labels(&z, &p).unwrap();
        if labels.iter().all(|l| *l != PromiseLabel::OutsidePromise) {
            let prod: i8 = labels.iter().map(|l| l.value().unwrap()).product();
            prop_assert_eq!(label_k(&z, &p).unwrap().value(), Some(prod));
        } else {
            prop_assert_eq!(label_k(&z, &p).unwrap(), PromiseLabel::OutsidePromise);
        }
    }

    #[test]
    fn ledger_counts_k_times_r(seed in any::<u64>(), k in 1usize..=3) {
        let p = params(8, k, 0.3);
        let plan = make_plan_with(&p, 1.0, 0.375).unwrap();
        let mut rng = stream_rng(seed, 2);
        let mut z = vec![0.0; p.total_len()];
        Source::MuTilde(forrlab::Parity::Odd).fill(&p, &mut z, &mut rng);
        let mut ledger = QueryLedger::default();
        solve_xor_k(&z, &p, &plan, &mut ledger, &mut rng).unwrap();
        prop_assert_eq!(ledger.queries, k as u64 * plan.repetitions);
    }

    #[test]
    fn rounded_sources_are_signs(seed in any::<u64>(), which in 0usize..3) {
        let p = params(16, 2, 0.2);
        let source = [Source::Uniform, Source::MuTilde(forrlab::Parity::Even), Source::MuTilde(forrlab::Parity::Odd)][which];
        let mut z = vec![0.0; p.total_len()];
        source.fill(&p, &mut z, &mut stream_rng(seed, 3));
        prop_assert!(z.iter().all(|v| *v == 1.0 || *v == -1.0));
    }

    #[test]
    fn extension_keeps_lift_spectrum(seed in any::<u64>(), arity in 2usize..=5, depth in 1usize..=6, l in 1usize..=2) {
        let mut rng = stream_rng(seed, 4);
        let c = random_protocol(arity, depth, &mut rng).unwrap();
        let base = brute_fourier(&xor_lift_table(&c).unwrap()).unwrap();
        let ext = extend_protocol(&c, l).unwrap();
        let averaged = brute_fourier(&junk_averaged_lift(&ext, l).unwrap()).unwrap();
        let full = brute_fourier(&xor_lift_table(&ext).unwrap()).unwrap();
        for s in 0..1usize << arity {
            prop_assert!((base.coefficient(s) - averaged.coefficient(s)).abs() < 1e-12);
            prop_assert!((base.coefficient(s) - full.coefficient(s)).abs() < 1e-12);
        }
        for level in 0..=arity {
            prop_assert!((base.level_mass(level) - full.level_mass(level)).abs() < 1e-9);
        }
    }
}

fn subsets(len: usize, max: usize) -> impl Iterator<Item = Vec<usize>> {
    (0u32..1 << len)
        .filter(move |m| m.count_ones() as usize <= max)
        .map(move |m| (0..len).filter(|&i| m >> i & 1 == 1).collect())
}

#[test]
fn mu_difference_bound_up_to_degree_eight() {
    let eps = 0.4;
    for (n, k) in [(2usize, 1usize), (2, 2), (4, 1), (4, 2), (2, 3)] {
        let p = params(n, k, eps);
        for coords in subsets(p.total_len(), 8) {
            let index = MomentIndex::from_global(&coords, &p).unwrap();
            let d = mu_moment_difference(&index, &p).unwrap();
            if coords.len() % 2 == 1 || coords.len() < 2 * k {
                assert_eq!(d, 0.0);
                continue;
            }
            let i = coords.len() / 2;
            let fact: f64 = (1..=i).map(|v| v as f64).product();
            let bound = 2f64.powi(1 - k as i32) * eps.powi(i as i32) * (n as f64).powf(-(i as f64) / 2.0) * fact;
            assert!(d.abs() <= bound * (1.0 + 1e-12), "N={n} k={k} I={coords:?}: {d} > {bound}");
        }
    }
}

#[test]
fn partitions_tile_the_grid() {
    let mut rng = stream_rng(7, 7);
    for _ in 0..20 {
        let arity = rng.random_range(1..=6);
        let depth = rng.random_range(1..=10);
        let c = random_protocol(arity, depth, &mut rng).unwrap();
        let d = 1u32 << arity;
        for x in 0..d {
            for y in 0..d {
                assert_eq!(c.rectangles.iter().filter(|r| r.contains(x, y)).count(), 1);
            }
        }
    }
}

#[test]
fn walk_covariance_at_full_budget() {
    let p = params(8, 2, 0.2);
    let mut rng = stream_rng(8, 8);
    for mask in [0b01u32, 0b10, 0b11] {
        let c = check_walk_covariance(&p, 3, mask, 100_000, &mut rng).unwrap();
        assert!(c.pass, "mask {mask:#b}: {c:?}");
    }
}
