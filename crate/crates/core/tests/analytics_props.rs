mod common;

use common::{neumann_alpha, rng};
use jackson_core::analytics::{contribution_matrix, solve_traffic, steady_state};
use jackson_core::generate::{random_model, random_routing, stable_model};
use jackson_core::linalg::Matrix;
use jackson_core::model::NetworkModel;
use proptest::prelude::*;
use rand::Rng;

/// Random model whose routing rows sum to at most `1 - margin`.
fn tight_model(seed: u64, m: usize, margin: f64) -> NetworkModel {
    let mut r = rng(seed);
    let density = r.random_range(0.2..0.8);
    let mut routing = random_routing(&mut r, m, density, |_, _| true);
    for row in &mut routing {
        let s: f64 = row.iter().sum();
        if s > 0.0 {
            let scale = (1.0 - margin) / s;
            row.iter_mut().for_each(|x| *x *= scale);
        }
    }
    stable_model(&mut r, routing)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lu_alpha_matches_neumann_series(seed in any::<u64>(), m in 1usize..=20, margin in 1e-3f64..0.5) {
        let model = tight_model(seed, m, margin);
        let alpha = contribution_matrix(&model).unwrap();
        let oracle = neumann_alpha(&model);
        let diff = alpha.as_matrix().sub(&oracle).max_abs();
        prop_assert!(diff <= 1e-8, "max diff {diff}");
    }

    #[test]
    fn exogenous_flow_equals_exit_flow(seed in any::<u64>(), m in 1usize..=30) {
        let model = random_model(&mut rng(seed), m);
        let lambda = solve_traffic(&model).unwrap();
        let exits: f64 = (0..m).map(|i| lambda[i] * model.routing().exit_probability(i)).sum();
        let entries: f64 = model.exo_rates().iter().sum();
        prop_assert!((exits - entries).abs() <= 1e-9 * entries.max(1.0));
    }

    #[test]
    fn alpha_is_nonnegative_with_unit_diagonal_floor(seed in any::<u64>(), m in 1usize..=25) {
        let model = random_model(&mut rng(seed), m);
        let alpha = contribution_matrix(&model).unwrap();
        for i in 0..m {
            prop_assert!(alpha.as_matrix()[(i, i)] >= 1.0 - 1e-12);
            for j in 0..m {
                prop_assert!(alpha.as_matrix()[(i, j)] >= -1e-12);
            }
        }
        prop_assert!(alpha.residual(&model) < 1e-10);
    }

    #[test]
    fn arrival_rates_grow_with_exogenous_rates(seed in any::<u64>(), m in 1usize..=20, bump in 0.01f64..3.0) {
        let mut r = rng(seed);
        let model = random_model(&mut r, m);
        let k = r.random_range(0..m);
        let mut exo = model.exo_rates().to_vec();
        exo[k] += bump;
        let before = solve_traffic(&model).unwrap();
        let after = solve_traffic(&model.with_exo_rates(exo).unwrap()).unwrap();
        for i in 0..m {
            prop_assert!(after[i] >= before[i] - 1e-12);
        }
    }

    #[test]
    fn metrics_are_finite_and_nonnegative(seed in any::<u64>(), m in 1usize..=20) {
        let model = random_model(&mut rng(seed), m);
        let ss = steady_state(&model).unwrap();
        for v in [&ss.queue_lengths, &ss.sojourn_times, &ss.delays, &ss.stay_times, &ss.utilizations] {
            prop_assert!(v.iter().all(|x| x.is_finite() && *x >= 0.0));
        }
        for i in 0..m {
            // Stay time includes at least the first visit.
            prop_assert!(ss.stay_times[i] >= ss.sojourn_times[i] - 1e-12);
        }
    }
}

#[test]
fn neumann_oracle_is_exact_on_nilpotent_routing() {
    let r = Matrix::from_rows(&[vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 0.5], vec![0.0, 0.0, 0.0]]);
    let sum = common::neumann_sum(&r, 3);
    let expected = Matrix::from_rows(&[vec![1.0, 1.0, 0.5], vec![0.0, 1.0, 0.5], vec![0.0, 0.0, 1.0]]);
    assert_eq!(sum, expected);
}

#[test]
fn tandem_stay_times() {
    let model = NetworkModel::new(vec![vec![0.0, 1.0], vec![0.0, 0.0]], vec![5.0, 0.0], vec![20.0, 20.0]).unwrap();
    let ss = steady_state(&model).unwrap();
    assert!((ss.stay_times[0] - 2.0 / 15.0).abs() < 1e-15);
    assert!((ss.stay_times[1] - 1.0 / 15.0).abs() < 1e-15);
}
