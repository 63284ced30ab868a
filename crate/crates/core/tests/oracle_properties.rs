//! Property tests for the adherence-aware operator and its fixed point.

use adherence_core::envs::default_machine_replacement;
use adherence_core::mdp::{evaluate_policy_exact, DeterministicPolicy, FiniteMdp, QTable};
use adherence_core::oracle::{apply_operator, contraction_modulus, value_iteration, value_iteration_from};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_mdp(rng: &mut ChaCha8Rng, max_states: usize, max_actions: usize) -> (FiniteMdp, DeterministicPolicy) {
    let n = rng.random_range(1..=max_states);
    let m = rng.random_range(1..=max_actions);
    let transition = (0..n)
        .map(|_| {
            (0..m)
                .map(|_| {
                    // sparse-ish rows: zero out some entries
                    let mut w: Vec<f64> = (0..n)
                        .map(|_| if rng.random_bool(0.4) { 0.0 } else { rng.random::<f64>() })
                        .collect();
                    if w.iter().all(|&v| v == 0.0) {
                        w[rng.random_range(0..n)] = 1.0;
                    }
                    let s: f64 = w.iter().sum();
                    w.iter().map(|v| v / s).collect()
                })
                .collect()
        })
        .collect();
    let reward = (0..n)
        .map(|_| (0..m).map(|_| rng.random_range(-10.0..10.0)).collect())
        .collect();
    let discount = rng.random_range(0.5..0.95);
    let mdp = FiniteMdp::new(transition, reward, discount).unwrap();
    let baseline = DeterministicPolicy::new((0..n).map(|_| rng.random_range(0..m)).collect());
    (mdp, baseline)
}

fn random_q(rng: &mut ChaCha8Rng, mdp: &FiniteMdp, bound: f64) -> QTable {
    QTable::from_flat(
        mdp.n_states(),
        mdp.n_actions(),
        (0..mdp.n_states() * mdp.n_actions())
            .map(|_| rng.random_range(-bound..bound))
            .collect(),
    )
}

/// Textbook optimality value iteration, independent of the adherence code.
fn optimal_values(mdp: &FiniteMdp, tol: f64) -> Vec<f64> {
    let mut v = vec![0.0; mdp.n_states()];
    loop {
        let next: Vec<f64> = (0..mdp.n_states())
            .map(|x| {
                (0..mdp.n_actions())
                    .map(|u| mdp.reward(x, u) + mdp.discount() * mdp.expected_next(x, u, &v))
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect();
        let change = next.iter().zip(&v).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        v = next;
        if change < tol * (1.0 - mdp.discount()) {
            return v;
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn contraction_per_pair(seed in any::<u64>(), theta in 0.0f64..=1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mdp, g_b) = random_mdp(&mut rng, 8, 4);
        let q1 = random_q(&mut rng, &mdp, 100.0);
        let q2 = random_q(&mut rng, &mdp, 100.0);
        let j1 = apply_operator(&mdp, &g_b, theta, &q1).unwrap();
        let j2 = apply_operator(&mdp, &g_b, theta, &q2).unwrap();
        prop_assert!(j1.sup_distance(&j2) <= mdp.discount() * q1.sup_distance(&q2) + 1e-9);
    }

    #[test]
    fn monotone(seed in any::<u64>(), theta in 0.0f64..=1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mdp, g_b) = random_mdp(&mut rng, 8, 4);
        let q1 = random_q(&mut rng, &mdp, 50.0);
        let bump: Vec<f64> = q1.as_slice().iter().map(|v| v + rng.random_range(0.0..5.0)).collect();
        let q2 = QTable::from_flat(mdp.n_states(), mdp.n_actions(), bump);
        let j1 = apply_operator(&mdp, &g_b, theta, &q1).unwrap();
        let j2 = apply_operator(&mdp, &g_b, theta, &q2).unwrap();
        for (a, b) in j1.as_slice().iter().zip(j2.as_slice()) {
            prop_assert!(a <= b);
        }
    }

    #[test]
    fn constant_shift(seed in any::<u64>(), theta in 0.0f64..=1.0, c in -100.0f64..100.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mdp, g_b) = random_mdp(&mut rng, 8, 4);
        let q = random_q(&mut rng, &mdp, 50.0);
        let shifted = QTable::from_flat(mdp.n_states(), mdp.n_actions(), q.as_slice().iter().map(|v| v + c).collect());
        let a = apply_operator(&mdp, &g_b, theta, &q).unwrap();
        let b = apply_operator(&mdp, &g_b, theta, &shifted).unwrap();
        for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
            prop_assert!((y - x - mdp.discount() * c).abs() < 1e-9);
        }
    }

    #[test]
    fn fixed_point_unique(seed in any::<u64>(), theta in 0.0f64..=1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mdp, g_b) = random_mdp(&mut rng, 6, 3);
        let tol = 1e-7;
        let init = random_q(&mut rng, &mdp, 1000.0);
        let a = value_iteration(&mdp, &g_b, theta, tol, 100_000).unwrap();
        let b = value_iteration_from(&mdp, &g_b, theta, tol, 100_000, init).unwrap();
        prop_assert!(a.v_star.sup_distance(&b.v_star) <= 2.0 * tol);
        prop_assert!(a.q_star.sup_distance(&b.q_star) <= 2.0 * tol);
    }

    #[test]
    fn endpoints(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mdp, g_b) = random_mdp(&mut rng, 6, 3);
        let tol = 1e-8;
        let zero = value_iteration(&mdp, &g_b, 0.0, tol, 100_000).unwrap();
        let baseline = evaluate_policy_exact(&mdp, &g_b).unwrap();
        prop_assert!(zero.v_star.sup_distance(&baseline) <= 2.0 * tol);
        let one = value_iteration(&mdp, &g_b, 1.0, tol, 100_000).unwrap();
        let opt = optimal_values(&mdp, tol);
        for (a, b) in one.v_star.iter().zip(&opt) {
            prop_assert!((a - b).abs() <= 2.0 * tol);
        }
    }
}

#[test]
fn more_adherence_cannot_hurt_machine_replacement() {
    let (mdp, g_b) = default_machine_replacement();
    let full = value_iteration(&mdp, &g_b, 1.0, 1e-9, 100_000).unwrap();
    let none = value_iteration(&mdp, &g_b, 0.0, 1e-9, 100_000).unwrap();
    for x in 0..mdp.n_states() {
        assert!(full.v_star[x] >= none.v_star[x] - 1e-9);
    }
}

#[test]
fn machine_replacement_modulus() {
    let (mdp, g_b) = default_machine_replacement();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let modulus = contraction_modulus(&mdp, &g_b, 0.7, 200, &mut rng).unwrap();
    assert!(modulus <= 0.9 + 1e-9, "modulus {modulus}");
}

#[test]
fn machine_replacement_adherence_changes_the_optimal_recommendation() {
    let (mdp, g_b) = default_machine_replacement();
    let full = value_iteration(&mdp, &g_b, 1.0, 1e-9, 100_000).unwrap();
    let partial = value_iteration(&mdp, &g_b, 0.7, 1e-9, 100_000).unwrap();
    assert_ne!(full.g_r_star, partial.g_r_star);
}
