mod common;

use std::sync::Arc;

use nalgebra::DMatrix;
use peripheral::semigroup::{
    check_time_lyapunov, continuous_decomposition, propagation_check, transition,
    SubMarkovGenerator,
};
use peripheral::WeightedSpace;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const TOL: f64 = 1e-13;

fn seeded_generator(seed: u64) -> SubMarkovGenerator {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let l = common::random_generator(&mut rng);
    let n = l.nrows();
    SubMarkovGenerator::new(Arc::new(WeightedSpace::uniform(n)), l).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn semigroup_identity(seed in any::<u64>(), s in 0.0..3.0f64, t in 0.0..3.0f64) {
        let l = seeded_generator(seed);
        let lhs = transition(&l, s + t, TOL);
        let rhs = transition(&l, s, TOL).compose(&transition(&l, t, TOL)).unwrap();
        let diff = lhs.sub(&rhs).unwrap().operator_norm();
        prop_assert!(diff <= 10.0 * 1e-12, "‖P_(s+t) − P_s P_t‖ = {diff}");
    }

    #[test]
    fn transition_matches_dense_exponential(seed in any::<u64>(), t in 0.0..5.0f64) {
        let l = seeded_generator(seed);
        let p = transition(&l, t, TOL);
        let oracle = common::expm_oracle(&(l.rates() * t));
        prop_assert!((p.entries() - &oracle).abs().max() <= 1e-11);
        prop_assert!(p.entries().iter().all(|&v| v >= 0.0));
        prop_assert!(p.row_sums().iter().all(|&s| s <= 1.0 + 1e-12));
    }

    #[test]
    fn random_generators_decompose_aperiodically(seed in any::<u64>()) {
        let l = seeded_generator(seed);
        let report = continuous_decomposition(&l, 1.0, TOL).unwrap();
        prop_assert_eq!(report.decomposition.d, 1);
        prop_assert!(report.flow_ok, "flow residual {}", report.max_flow_residual);
        prop_assert!(report.rotation_free);
        let check = propagation_check(&l, 0.5, 1.7, TOL).unwrap();
        prop_assert!(check.consistent, "{check:?}");
    }
}

#[test]
fn two_state_exponential_closed_form() {
    let l = SubMarkovGenerator::from_rows(&[vec![-1.0, 1.0], vec![1.0, -1.0]]).unwrap();
    let p = transition(&l, 1.0, 1e-15);
    let e = (-2.0f64).exp();
    let exact = DMatrix::from_row_slice(
        2,
        2,
        &[
            0.5 * (1.0 + e),
            0.5 * (1.0 - e),
            0.5 * (1.0 - e),
            0.5 * (1.0 + e),
        ],
    );
    assert!((p.entries() - exact).abs().max() < 1e-10);
}

#[test]
fn irreducible_uniformizable_generator() {
    // L = Q − I with Q a strictly positive stochastic matrix, plus killing.
    let q = [[0.2, 0.5, 0.3], [0.4, 0.4, 0.2], [0.1, 0.1, 0.8]];
    let kill = [0.1, 0.3, 0.2];
    let rows: Vec<Vec<f64>> = (0..3)
        .map(|x| {
            (0..3)
                .map(|y| q[x][y] - if x == y { 1.0 + kill[x] } else { 0.0 })
                .collect()
        })
        .collect();
    let l = SubMarkovGenerator::from_rows(&rows).unwrap();
    let report = continuous_decomposition(&l, 1.0, TOL).unwrap();
    assert_eq!(report.decomposition.d, 1);
    assert_eq!(report.decomposition.items.len(), 1);
    assert!(report.flow_ok);
    let alphas: Vec<f64> = report.alpha_t.iter().map(|a| a.alpha).collect();
    assert!(alphas.windows(2).all(|w| w[1] <= w[0] + 1e-9));
    assert!(*alphas.last().unwrap() < 1e-3 * alphas[0]);
}

#[test]
fn equal_decay_blocks_give_two_items() {
    // Two disjoint conservative blocks killed at the same rate 0.4.
    let rows = vec![
        vec![-1.4, 1.0, 0.0, 0.0],
        vec![2.0, -2.4, 0.0, 0.0],
        vec![0.0, 0.0, -0.9, 0.5],
        vec![0.0, 0.0, 0.3, -0.7],
    ];
    let l = SubMarkovGenerator::from_rows(&rows).unwrap();
    let report = continuous_decomposition(&l, 1.0, TOL).unwrap();
    assert_eq!(report.decomposition.items.len(), 2);
    assert_eq!(report.decomposition.d, 1);
    assert!(report.max_flow_residual < 1e-8);
    assert!((report.r1 - (-0.4f64).exp()).abs() < 1e-12);
}

#[test]
fn alpha_t_is_eventually_monotone_across_periods() {
    for seed in 0..10 {
        let l = seeded_generator(seed);
        let report = continuous_decomposition(&l, 1.0, TOL).unwrap();
        // Points are spaced T/2 apart, so t + T is two entries ahead.
        let a: Vec<f64> = report.alpha_t.iter().map(|p| p.alpha).collect();
        for i in 20..a.len() - 2 {
            assert!(
                a[i + 2] <= a[i] + 1e-9,
                "seed {seed}, t = {}",
                report.alpha_t[i].t
            );
        }
    }
}

#[test]
fn killed_birth_death_lyapunov_constant() {
    // Birth rate 1, death rate 2, killing at 0; V(x) = 2^x. Since LV ≤ 0 off
    // the last state, P_t V ≤ V and C_T is attained at t = 0.
    let n = 8;
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|x| {
            (0..n)
                .map(|y| match y as isize - x as isize {
                    1 => 1.0,
                    -1 => 2.0,
                    0 => -3.0,
                    _ => 0.0,
                })
                .collect()
        })
        .collect();
    let space =
        Arc::new(WeightedSpace::with_weights((0..n).map(|x| 2f64.powi(x)).collect()).unwrap());
    let l = SubMarkovGenerator::new(space, peripheral_matrix(&rows)).unwrap();
    let coarse = check_time_lyapunov(&l, 2.0, None, TOL);
    let fine_grid: Vec<f64> = (0..=256).map(|i| 2.0 * i as f64 / 256.0).collect();
    let fine = check_time_lyapunov(&l, 2.0, Some(fine_grid), TOL);
    assert!((coarse.c_t - 1.0).abs() < 1e-12);
    assert!((fine.c_t - coarse.c_t).abs() < 1e-8);
}

fn peripheral_matrix(rows: &[Vec<f64>]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), rows.len(), |x, y| rows[x][y])
}
