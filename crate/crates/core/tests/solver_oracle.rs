//! Cross-checks of the branch-and-bound solver against full enumeration,
//! the baselines, and structural optimality properties.

use edgemar_core::heuristics::{cfs, fact, rand_s, util, UTIL_THRESHOLD};
use edgemar_core::pipeline::avg_decision_delay;
use edgemar_core::placement::{expected_delay, DelayParams};
use edgemar_core::seqnet::{loss_and_gradients, Dropout, ModelParams, Sample};
use edgemar_core::solver::{solve_exhaustive, solve_optimal};
use edgemar_core::topology::Topology;
use edgemar_core::workload::generate_requests;

/// Small instances across feasibility regimes: both solvers must return the
/// same plans bit for bit, or fail with the same error.
#[test]
fn matches_exhaustive_enumeration_on_small_instances() {
    for seed in 0..100u64 {
        let active = 2 + (seed % 2) as u32;
        let capacity = [1, 2, 14][(seed % 3) as usize];
        let count = 1 + (seed % 4) as u32;
        let mut t = Topology::generate(seed, 20, active, 4).unwrap();
        t.set_uniform_capacity(capacity);
        let p = DelayParams::default();
        let rs = generate_requests(&t, count, seed.wrapping_mul(31)).unwrap();

        let fast = solve_optimal(&t, &p, &rs);
        let slow = solve_exhaustive(&t, &p, &rs);
        match (fast, slow) {
            (Ok(a), Ok(b)) => {
                assert_eq!(a.plans, b.plans, "seed {seed}");
                assert_eq!(a.objective_ms, b.objective_ms, "seed {seed}");
            }
            (Err(a), Err(b)) => assert_eq!(a, b, "seed {seed}"),
            (a, b) => panic!("seed {seed}: solvers disagree: {a:?} vs {b:?}"),
        }
    }
}

#[test]
fn no_baseline_beats_the_exact_objective() {
    let p = DelayParams::default();
    for seed in 0..30u64 {
        let mut t = Topology::generate(seed, 20, 6, 4).unwrap();
        t.set_uniform_capacity([10, 12, 14][(seed % 3) as usize]);
        let rs = generate_requests(&t, 30, seed ^ 0xabcd).unwrap();
        let n = rs.len() as f64;
        let optimal = solve_optimal(&t, &p, &rs).unwrap().objective_ms / n;

        for decisions in [
            cfs(&t, &p, &rs).unwrap(),
            util(&t, &p, &rs, UTIL_THRESHOLD).unwrap(),
            rand_s(&t, &p, &rs, seed).unwrap(),
        ] {
            let mean = avg_decision_delay(&t, &p, &rs, &decisions).unwrap();
            assert!(
                mean >= optimal - 1e-9,
                "seed {seed}: baseline mean {mean} under optimum {optimal}"
            );
        }

        // The mobility-blind plan, rescored against true mobility.
        let plans = fact(&t, &p, &rs).unwrap();
        let fact_total: f64 = rs
            .iter()
            .zip(&plans)
            .map(|(r, pl)| expected_delay(&t, &p, r, pl.assignment()).unwrap())
            .sum();
        assert!(fact_total / n >= optimal - 1e-9, "seed {seed}");
    }
}

#[test]
fn dropping_a_request_never_raises_the_optimum() {
    let p = DelayParams::default();
    for seed in 0..20u64 {
        let mut t = Topology::generate(seed, 20, 6, 4).unwrap();
        t.set_uniform_capacity(10);
        let rs = generate_requests(&t, 12, seed).unwrap();
        let full = solve_optimal(&t, &p, &rs).unwrap().objective_ms;
        let mut fewer = rs.clone();
        fewer.remove((seed % 12) as usize);
        let sub = solve_optimal(&t, &p, &fewer).unwrap().objective_ms;
        assert!(sub <= full + 1e-9, "seed {seed}: {sub} > {full}");
    }
}

/// An untrained network should be told apart from a lucky constant: its
/// cross-entropy has to sit near the uniform-guess level.
#[test]
fn fresh_model_loss_sits_near_the_uniform_level() {
    let uniform = (36.0f64).ln();
    for seed in 0..5u64 {
        let model = ModelParams::init(16, 80, 36, 0.05, seed).unwrap();
        let batch: Vec<Sample> = (0..16)
            .map(|i| {
                let mut a = vec![0.0; 16];
                let mut b = vec![0.0; 16];
                a[(i * 7 + seed as usize) % 16] = 1.0;
                b[(i * 3) % 16] = 1.0;
                Sample {
                    x: vec![a, b],
                    label: (i as u32 * 5) % 36 + 1,
                }
            })
            .collect();
        let (loss, _) = loss_and_gradients(&model, &batch, Dropout::Off).unwrap();
        assert!(
            (loss - uniform).abs() / uniform < 0.05,
            "seed {seed}: loss {loss} vs ln(36) {uniform}"
        );
    }
}
