//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use adherence_core::envs::{build_inventory, default_machine_replacement, InventoryParams};
use adherence_core::mdp::{evaluate_policy_exact, FiniteMdp, QTable};
use adherence_core::oracle::{apply_operator, value_iteration, value_iteration_from};
use adherence_core::{
    run_episode, run_steps, AdherenceEstimate, AdherenceObservation, DeterministicPolicy, LearnerConfig, LearnerMode,
    LearnerState, SimulatedHdm,
};
use adherence_harness::{run_comparison, run_theta_sweep, Approach, ComparisonSummary, ExperimentConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Verdict {
    passed: bool,
    detail: String,
}

impl Verdict {
    fn new(passed: bool, detail: impl Into<String>) -> Self {
        Verdict {
            passed,
            detail: detail.into(),
        }
    }
}

fn check(name: &str, budget: Option<Duration>, body: impl FnOnce() -> Verdict) -> bool {
    let start = Instant::now();
    let verdict = body();
    let elapsed = start.elapsed();
    let in_time = budget.is_none_or(|b| elapsed <= b);
    let passed = verdict.passed && in_time;
    let budget_note = match budget {
        Some(b) if !in_time => format!(", over the {:.0} s budget", b.as_secs_f64()),
        _ => String::new(),
    };
    println!(
        "[{}] {name}: {} ({:.2} s{budget_note})",
        if passed { "PASS" } else { "FAIL" },
        verdict.detail,
        elapsed.as_secs_f64()
    );
    passed
}

fn random_mdp(rng: &mut ChaCha8Rng) -> (FiniteMdp, DeterministicPolicy) {
    let n = rng.random_range(1..=12);
    let m = rng.random_range(1..=4);
    let transition = (0..n)
        .map(|_| {
            (0..m)
                .map(|_| {
                    let w: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 1e-3).collect();
                    let s: f64 = w.iter().sum();
                    w.into_iter().map(|v| v / s).collect()
                })
                .collect()
        })
        .collect();
    let reward = (0..n)
        .map(|_| (0..m).map(|_| rng.random_range(-20.0..20.0)).collect())
        .collect();
    let discount = rng.random_range(0.05..0.99);
    let baseline = DeterministicPolicy::new((0..n).map(|_| rng.random_range(0..m)).collect());
    (FiniteMdp::new(transition, reward, discount).unwrap(), baseline)
}

fn random_table(rng: &mut ChaCha8Rng, n: usize, m: usize, bound: f64) -> QTable {
    QTable::from_flat(n, m, (0..n * m).map(|_| rng.random_range(-bound..bound)).collect())
}

fn contraction() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_601);
    let mut worst_excess = f64::NEG_INFINITY;
    let mut violations = 0;
    for _ in 0..500 {
        let (mdp, g_b) = random_mdp(&mut rng);
        let theta = rng.random_range(0.0..=1.0);
        let (n, m) = (mdp.n_states(), mdp.n_actions());
        let q1 = random_table(&mut rng, n, m, 1_000.0);
        let q2 = random_table(&mut rng, n, m, 1_000.0);
        let lhs = apply_operator(&mdp, &g_b, theta, &q1)
            .unwrap()
            .sup_distance(&apply_operator(&mdp, &g_b, theta, &q2).unwrap());
        let excess = lhs - mdp.discount() * q1.sup_distance(&q2);
        worst_excess = worst_excess.max(excess);
        if excess > 1e-9 {
            violations += 1;
        }
    }
    Verdict::new(
        violations == 0,
        format!("500 random MDPs, {violations} violations, max ‖Jq₁−Jq₂‖ − λ‖q₁−q₂‖ = {worst_excess:.3e}"),
    )
}

/// Standard optimality value iteration, written independently of the operator.
fn optimal_values(mdp: &FiniteMdp, tol: f64) -> Vec<f64> {
    let lambda = mdp.discount();
    let mut v = vec![0.0; mdp.n_states()];
    loop {
        let next: Vec<f64> = (0..mdp.n_states())
            .map(|x| {
                (0..mdp.n_actions())
                    .map(|u| {
                        let ev: f64 = mdp.row(x, u).iter().zip(&v).map(|(p, w)| p * w).sum();
                        mdp.reward(x, u) + lambda * ev
                    })
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect();
        let change = next.iter().zip(&v).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
        v = next;
        if change <= tol * (1.0 - lambda) / lambda {
            return v;
        }
    }
}

fn fixed_point() -> Verdict {
    let (mdp, g_b) = default_machine_replacement();
    let tol = 1e-6;
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let init = random_table(&mut rng, mdp.n_states(), mdp.n_actions(), 500.0);
    let from_zero = value_iteration(&mdp, &g_b, 0.7, tol, 1_000_000).unwrap();
    let from_random = value_iteration_from(&mdp, &g_b, 0.7, tol, 1_000_000, init).unwrap();
    let gap = from_zero.v_star.sup_distance(&from_random.v_star);

    let at_zero = value_iteration(&mdp, &g_b, 0.0, tol, 1_000_000).unwrap();
    let baseline = evaluate_policy_exact(&mdp, &g_b).unwrap();
    let zero_gap = at_zero.v_star.sup_distance(&baseline);

    let at_one = value_iteration(&mdp, &g_b, 1.0, tol, 1_000_000).unwrap();
    let optimal = optimal_values(&mdp, 1e-10);
    let one_gap = at_one
        .v_star
        .iter()
        .zip(&optimal)
        .fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));

    Verdict::new(
        gap <= 2e-6 && zero_gap <= 1e-6 && one_gap <= 1e-6,
        format!("zero vs random init {gap:.2e} (≤ 2e-6), θ=0 vs baseline {zero_gap:.2e}, θ=1 vs optimal {one_gap:.2e} (≤ 1e-6)"),
    )
}

fn estimator() -> Verdict {
    let mut worst: f64 = 0.0;
    let mut ratio_mismatches = 0;
    for seed in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut est = AdherenceEstimate::default();
        let mut adheres = 0u64;
        for n in 1..=10_000u64 {
            let obs = if rng.random::<f64>() < 0.7 {
                adheres += 1;
                AdherenceObservation::Adhered
            } else {
                AdherenceObservation::Deviated
            };
            est.record(obs);
            if est.theta_hat().to_bits() != (adheres as f64 / n as f64).to_bits() {
                ratio_mismatches += 1;
            }
        }
        worst = worst.max((est.theta_hat() - 0.7).abs());
    }
    Verdict::new(
        worst <= 0.02 && ratio_mismatches == 0,
        format!("50 × 10,000 draws, max |θ̂ − 0.7| = {worst:.4} (≤ 0.02), {ratio_mismatches} exact-ratio mismatches"),
    )
}

fn learning_convergence() -> Verdict {
    let (mdp, g_b) = default_machine_replacement();
    let oracle = value_iteration(&mdp, &g_b, 0.7, 1e-10, 1_000_000).unwrap();
    let config = LearnerConfig::new(LearnerMode::AdherenceAware, mdp.discount(), g_b);
    let mut state = LearnerState::new(&mdp, config).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut hdm = SimulatedHdm::new(0.7, ChaCha8Rng::seed_from_u64(1)).unwrap();
    run_steps(&mut state, &mdp, &mut hdm, 0, 200_000, &mut rng, |_, _| {}).unwrap();
    let rel = state.q().sup_distance(&oracle.q_star) / (oracle.q_star.sup_norm() + 1.0);
    let v0 = oracle.v_star[0];
    let initial = (state.mixed_value(0) - v0).abs() / v0.abs();
    Verdict::new(
        rel <= 0.05 && initial <= 0.05,
        format!("200,000 steps, relative Q error {rel:.4} (≤ 0.05), initial-state value error {initial:.4} (≤ 0.05)"),
    )
}

fn classical_reduction() -> Verdict {
    let (mdp, g_b) = default_machine_replacement();
    let mut pinned = LearnerConfig::new(LearnerMode::AdherenceAware, mdp.discount(), g_b.clone());
    pinned.pinned_theta = Some(1.0);
    let classical = LearnerConfig::new(LearnerMode::Classical, mdp.discount(), g_b);
    let run = |config: LearnerConfig| {
        let mut state = LearnerState::new(&mdp, config).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let mut hdm = SimulatedHdm::new(0.7, ChaCha8Rng::seed_from_u64(2025)).unwrap();
        let trajectory = run_episode(&mut state, &mdp, &mut hdm, 0, 10_000, &mut rng).unwrap();
        let bits: Vec<u64> = state.q().as_slice().iter().map(|v| v.to_bits()).collect();
        (trajectory, bits)
    };
    let (ta, qa) = run(pinned);
    let (tc, qc) = run(classical);
    let same_steps = ta.iter().zip(&tc).take_while(|(a, c)| a == c).count();
    Verdict::new(
        ta == tc && qa == qc,
        format!(
            "{same_steps}/10,000 identical transitions, Q tables bit-identical: {}",
            qa == qc
        ),
    )
}

fn ordering(summary: &ComparisonSummary) -> (bool, String) {
    let mean = |a| summary.stats(a).unwrap().mean_exact;
    let (aa, cq, bo) = (
        mean(Approach::AdherenceAware),
        mean(Approach::ClassicalQ),
        mean(Approach::BaselineOnly),
    );
    let vs_c = summary
        .difference(Approach::AdherenceAware, Approach::ClassicalQ)
        .unwrap()
        .interval;
    let vs_b = summary
        .difference(Approach::AdherenceAware, Approach::BaselineOnly)
        .unwrap()
        .interval;
    let ok = aa >= cq && aa >= bo && vs_c.lower >= 0.0 && vs_b.lower >= 0.0;
    (
        ok,
        format!(
            "{}: means aa {aa:.4} / classical {cq:.4} / baseline {bo:.4}, aa−classical CI [{:.4}, {:.4}], aa−baseline CI [{:.4}, {:.4}]",
            summary.env, vs_c.lower, vs_c.upper, vs_b.lower, vs_b.upper
        ),
    )
}

fn three_approach_ordering() -> Verdict {
    let base = ExperimentConfig {
        theta_true: 0.7,
        seeds: (0..20).collect(),
        episodes: 0,
        ..ExperimentConfig::default()
    };
    let mr = run_comparison(&ExperimentConfig {
        env: "machine_replacement".into(),
        steps: 200_000,
        ..base.clone()
    })
    .unwrap();
    let inv = run_comparison(&ExperimentConfig {
        env: "inventory_small".into(),
        steps: 1_000_000,
        ..base
    })
    .unwrap();
    let (ok_mr, d_mr) = ordering(&mr.summary);
    let (ok_inv, d_inv) = ordering(&inv.summary);
    Verdict::new(ok_mr && ok_inv, format!("{d_mr}; {d_inv}"))
}

fn sweep_endpoints() -> Verdict {
    let config = ExperimentConfig {
        env: "machine_replacement".into(),
        theta_grid: Some((0..=10).map(|i| i as f64 / 10.0).collect()),
        steps: 2_000_000,
        seeds: (0..5).collect(),
        episodes: 0,
        ..ExperimentConfig::default()
    };
    let out = run_theta_sweep(&config).unwrap();
    let first = &out.summary[0];
    let last = out.summary.last().unwrap();
    let zero_tie = first.theta_true == 0.0 && first.outcomes.iter().all(|o| o.exact_value == first.baseline_value);
    let optimum = last.unconstrained_value.unwrap();
    let worst_one = last
        .exact_values(Approach::AdherenceAware)
        .iter()
        .fold(0.0f64, |a, v| a.max((optimum - v).abs() / optimum.abs()));
    let mut dominated = 0;
    for s in &out.summary {
        for v in s.exact_values(Approach::AdherenceAware) {
            if v < s.baseline_value - 1e-9 {
                dominated += 1;
            }
        }
    }
    Verdict::new(
        zero_tie && worst_one <= 0.01 && dominated == 0,
        format!(
            "11-point grid, θ=0 tie exact: {zero_tie}, θ=1 gap to optimum {worst_one:.2e} (≤ 1%), {dominated} grid points below baseline"
        ),
    )
}

fn inventory_enumeration() -> Verdict {
    let params = InventoryParams::default();
    let mdp = build_inventory(&params).unwrap();
    let outcomes = (params.max_demand + 1) as f64;
    let mut worst_p: f64 = 0.0;
    let mut worst_r: f64 = 0.0;
    let mut pairs = 0;
    for x in 0..=params.capacity {
        for u in 0..=params.capacity - x {
            let mut row = vec![0.0; params.capacity + 1];
            let mut reward = 0.0;
            for d in 0..=params.max_demand {
                let level = x + u;
                row[level.saturating_sub(d)] += 1.0 / outcomes;
                reward += (params.price * level.min(d) as f64
                    - params.holding_cost * x.saturating_sub(u) as f64
                    - params.order_cost * u as f64)
                    / outcomes;
            }
            for (next, p) in row.iter().enumerate() {
                worst_p = worst_p.max((mdp.prob(x, u, next) - p).abs());
            }
            worst_r = worst_r.max((mdp.reward(x, u) - reward).abs());
            pairs += 1;
        }
    }
    Verdict::new(
        worst_p <= 1e-9 && worst_r <= 1e-9,
        format!("{pairs} (x,u) pairs at capacity 100, max |ΔP| {worst_p:.2e}, max |ΔR| {worst_r:.2e}"),
    )
}

fn cli_determinism() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let run = |sub: &str, tag: &str| -> Vec<u8> {
        let out = dir.path().join(tag);
        let status = Command::new(env!("CARGO_BIN_EXE_adherence"))
            .args([
                sub,
                "--env",
                "machine_replacement",
                "--steps",
                "5000",
                "--seeds",
                "4",
                "--episodes",
                "20",
            ])
            .arg("--out")
            .arg(&out)
            .output()
            .unwrap();
        assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
        std::fs::read(Path::new(&out).join("records.csv")).unwrap()
    };
    let mut identical = true;
    let mut rows = 0;
    for sub in ["converge", "compare"] {
        let a = run(sub, &format!("{sub}-a"));
        let b = run(sub, &format!("{sub}-b"));
        identical &= a == b && !a.is_empty();
        rows += a.iter().filter(|&&c| c == b'\n').count();
    }
    Verdict::new(
        identical,
        format!("converge and compare rerun byte-identical: {identical} ({rows} lines)"),
    )
}

fn main() {
    let secs = |s| Some(Duration::from_secs(s));
    let results = [
        check("contraction", secs(10), contraction),
        check("fixed-point uniqueness and optimality", None, fixed_point),
        check("estimator consistency", secs(5), estimator),
        check("learning convergence", secs(60), learning_convergence),
        check("classical reduction", None, classical_reduction),
        check("three-approach ordering", secs(300), three_approach_ordering),
        check("theta-sweep endpoints", None, sweep_endpoints),
        check("environment oracles", secs(30), inventory_enumeration),
        check("determinism", None, cli_determinism),
    ];
    let failed = results.iter().filter(|&&ok| !ok).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
