use proptest::prelude::*;

use meshc::analysis::{depth_bound_analytic, tk_simulate, tk_step, transmission};
use meshc::circuit::{ChipLayout, Circuit};
use meshc::compiler::compile;
use meshc::coupled::{coupled_depth, dense_generic_isometry, greedy_coupled, greedy_longrange, row_labels};
use meshc::linalg::{haar_random_unitary, random_isometry, ComplexMatrix};
use meshc::networks::{partial_sorting_network, sorts_partially, sorts_partially_sampled};
use meshc::synthesis::{isometry_error, synth_boson_sampling, synth_clements, synth_reck};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tk_step_conserves_rows(t in prop::collection::vec(0u64..1000, 2..12)) {
        let next = tk_step(&t);
        prop_assert_eq!(next.iter().sum::<u64>(), t.iter().sum::<u64>());
        // finished rows never come back
        prop_assert!(next[t.len() - 1] >= t[t.len() - 1]);
    }

    #[test]
    fn transmission_is_increasing(a in 0.5f64..0.99, b in 0.5f64..0.99, d in 1usize..20, k in 2usize..40) {
        let (eta, _) = transmission(a, b, d, k, 1);
        prop_assert!(transmission(a + 0.005, b, d, k, 1).0 > eta);
        prop_assert!(transmission(a, b + 0.005, d, k, 1).0 > eta);
    }

    #[test]
    fn schemes_round_trip(seed in any::<u64>(), m in 1usize..=10) {
        let u = haar_random_unitary(m, seed).unwrap();
        for c in [synth_clements(&u).unwrap(), synth_reck(&u).unwrap()] {
            prop_assert!(c.evaluate().unwrap().matrix().distance(u.matrix()) < 1e-8);
            prop_assert_eq!(c.mzi_count(), m * (m - 1) / 2);
        }
    }

    #[test]
    fn partial_scheme_round_trip(seed in any::<u64>(), m in 1usize..=14, frac in 0.0f64..1.0) {
        let n = 1 + ((m - 1) as f64 * frac) as usize;
        let v = random_isometry(m, n, seed).unwrap();
        let c = synth_boson_sampling(&v).unwrap();
        prop_assert!(isometry_error(&c, &v).unwrap() < 1e-8);
        prop_assert!(c.mzi_depth() <= m);
    }

    #[test]
    fn coupled_reconstructs_and_progresses(seed in any::<u64>(), m in 2usize..=16, frac in 0.0f64..1.0, kfrac in 0.0f64..1.0) {
        let n = 1 + ((m - 1) as f64 * frac) as usize;
        let k = 2 + ((m - 2) as f64 * kfrac) as usize;
        let v = random_isometry(m, n, seed).unwrap();
        let cc = greedy_coupled(&v, k).unwrap();
        prop_assert!(cc.isometry_error(&v).unwrap() < 1e-8);
        for stage in &cc.stages {
            let mut modes: Vec<usize> = stage.blocks.iter().flat_map(|b| b.modes.clone()).collect();
            prop_assert!(stage.blocks.iter().all(|b| b.modes.len() <= k));
            let len = modes.len();
            modes.sort_unstable();
            modes.dedup();
            prop_assert_eq!(modes.len(), len);
        }
    }

    #[test]
    fn longrange_reconstructs(seed in any::<u64>(), m in 1usize..=24, frac in 0.0f64..1.0) {
        let n = 1 + ((m - 1) as f64 * frac) as usize;
        let v = random_isometry(m, n, seed).unwrap();
        let lr = greedy_longrange(&v).unwrap();
        prop_assert!(isometry_error(&lr.circuit, &v).unwrap() < 1e-8);
        prop_assert!(lr.layer_count() <= tk_simulate(m, n).0);
    }

    #[test]
    fn circuit_json_round_trips(seed in any::<u64>(), m in 2usize..=6) {
        let u = haar_random_unitary(m, seed).unwrap();
        let c = synth_clements(&u).unwrap();
        let text = serde_json::to_string(&c).unwrap();
        let back: Circuit = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(&back, &c);
        prop_assert_eq!(serde_json::to_string(&back).unwrap(), text);
        let mtext = serde_json::to_string(u.matrix()).unwrap();
        let mback: ComplexMatrix = serde_json::from_str(&mtext).unwrap();
        prop_assert_eq!(&mback, u.matrix());
    }
}

#[test]
fn partial_networks_sort_first_labels() {
    for m in 1..=8 {
        for n in 1..=m {
            let net = partial_sorting_network(m, n).unwrap();
            assert!(sorts_partially(&net, n), "m={m} n={n}");
        }
    }
    for (m, n) in [(16, 3), (24, 8), (40, 40)] {
        assert!(sorts_partially_sampled(&partial_sorting_network(m, n).unwrap(), n, 2000, 7));
    }
}

#[test]
fn coupled_depth_within_analytic_bound() {
    for n in [2usize, 4, 8] {
        for e in 2..=12 {
            let m = 1usize << e;
            if m < n.max(3) {
                continue;
            }
            let bound = depth_bound_analytic(m, n).unwrap();
            if !bound.regime_ok {
                continue;
            }
            let (v, _) = dense_generic_isometry(m, n, 0).unwrap();
            let d = coupled_depth(&v, 2).unwrap() as u64;
            assert!(d <= bound.k, "m={m} n={n}: {d} stages, bound {}", bound.k);
        }
    }
}

#[test]
fn longrange_matches_recurrence_on_many_instances() {
    for (m, n) in [(10, 4), (17, 3), (32, 8), (50, 1)] {
        let k = tk_simulate(m, n).0;
        for s in 0..100u64 {
            let (v, _) = dense_generic_isometry(m, n, 1 + 131 * s).unwrap();
            assert_eq!(greedy_longrange(&v).unwrap().layer_count(), k, "m={m} n={n} seed={s}");
        }
    }
}

#[test]
fn labels_mark_zero_rows() {
    let v = meshc::linalg::Isometry::embedding(5, 2).unwrap();
    let tol = v.matrix().zero_tolerance();
    assert_eq!(row_labels(v.matrix(), tol), vec![0, 1, 2, 2, 2]);
}

#[test]
fn brick_layout_compiles_haar() {
    let m = 7;
    let layers = (0..m).map(|t| (t % 2..m - 1).step_by(2).map(|j| [j, j + 1]).collect()).collect();
    let layout = ChipLayout::new(m, layers, true).unwrap();
    let u = haar_random_unitary(m, 9).unwrap();
    let a = compile(&u, &layout).unwrap().unwrap();
    assert!(a.to_circuit(&layout).unwrap().evaluate().unwrap().matrix().distance(u.matrix()) < 1e-8);
}
