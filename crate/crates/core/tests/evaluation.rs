mod common;

use approx::assert_abs_diff_eq;
use common::{random_policy, rng, small_model};
use klc_opi::metrics::{compare_policies, monte_carlo_return, EvalSettings};
use klc_opi::staghare::{build_model, deterministic_baseline, manhattan, GridSpec};
use klc_opi::{exact_policy_evaluation, one_step_cost, JointPolicy};
use proptest::prelude::*;

fn default_setup() -> (GridSpec, klc_opi::Model, JointPolicy) {
    let spec = GridSpec::default();
    let model = build_model(&spec, 0.95).unwrap();
    let baseline = deterministic_baseline(&spec, &model).unwrap();
    (spec, model, baseline)
}

/// Walks a deterministic policy and sums its one-step costs.
fn enumerate(model: &klc_opi::Model, policy: &JointPolicy, start: usize, horizon: usize) -> f64 {
    let mut s = start;
    let mut total = 0.0;
    for _ in 0..horizon {
        total += one_step_cost(model, s, policy.row(s)).unwrap();
        s = policy.row(s).support()[0];
    }
    total
}

#[test]
fn baseline_return_next_to_stag() {
    let (_, model, baseline) = default_setup();
    let start = model.space().encode(&[11, 13]).unwrap();
    let settings = EvalSettings {
        n_episodes: 50,
        ..EvalSettings::default()
    };
    let stats = monte_carlo_return(&model, &baseline, start, &settings).unwrap();
    let expected = 2.0 * 40f64.ln() + 19.0 * (-10.0 + 2.0 * (1.0f64 / 0.9).ln());
    assert_abs_diff_eq!(stats.mean, expected, epsilon = 1e-9);
    assert_abs_diff_eq!(stats.mean, -178.618541, epsilon = 1e-6);
    assert_eq!(stats.std, 0.0);
}

#[test]
fn deterministic_returns_match_enumeration() {
    let (_, model, baseline) = default_setup();
    let settings = EvalSettings {
        n_episodes: 20,
        ..EvalSettings::default()
    };
    for tuple in [[20, 4], [5, 12], [18, 14], [0, 24], [12, 12]] {
        let start = model.space().encode(&tuple).unwrap();
        let stats = monte_carlo_return(&model, &baseline, start, &settings).unwrap();
        assert_eq!(stats.std, 0.0);
        assert_abs_diff_eq!(stats.mean, enumerate(&model, &baseline, start, 20), epsilon = 1e-9);
    }
}

#[test]
fn baseline_closes_distance_every_step() {
    let (spec, model, baseline) = default_setup();
    let stag = *spec.stag_cells.iter().next().unwrap();
    for s in 0..model.n_states() {
        let row = baseline.row(s);
        assert_eq!(row.len(), 1);
        let next = row.support()[0];
        assert!(model.joint_rows()[s].prob(next) > 0.0);
        let (from, to) = (model.space().decode(s).unwrap(), model.space().decode(next).unwrap());
        for (a, b) in from.iter().zip(&to) {
            let d = manhattan(&spec, *a, stag);
            assert_eq!(manhattan(&spec, *b, stag), d.saturating_sub(1));
        }
        let kl: f64 = (0..2).map(|i| -model.kernel_row(i, s).prob(to[i]).ln()).sum();
        assert_abs_diff_eq!(one_step_cost(&model, s, row).unwrap() - model.cost()[s], kl, epsilon = 1e-12);
    }
}

#[test]
fn staghare_rows_are_normalized() {
    let (_, model, _) = default_setup();
    for agent in 0..2 {
        for s in 0..model.n_states() {
            let total: f64 = model.kernel_row(agent, s).probs().iter().sum();
            assert!((total - 1.0).abs() <= 1e-12);
        }
    }
    for row in model.joint_rows() {
        assert!((row.probs().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }
}

#[test]
fn same_policy_compares_equal_within_noise() {
    let (_, model, _) = default_setup();
    let p0 = JointPolicy::uncontrolled(&model);
    let starts = vec![vec![20, 4], vec![5, 12], vec![18, 14], vec![11, 13]];
    let settings = EvalSettings {
        n_episodes: 2000,
        seed: 9,
        ..EvalSettings::default()
    };
    let rows = compare_policies(&model, ("a", &p0), ("b", &p0), &starts, &settings).unwrap();
    assert_eq!(rows.len(), 8);
    for pair in rows.chunks(2) {
        assert_eq!(pair[0].start_state, pair[1].start_state);
        let n = pair[0].n_episodes as f64;
        let se = ((pair[0].std_return.powi(2) + pair[1].std_return.powi(2)) / n).sqrt();
        assert!((pair[0].mean_return - pair[1].mean_return).abs() <= 4.0 * se);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, ..ProptestConfig::default() })]

    #[test]
    fn discounted_returns_approach_exact_values(seed in any::<u64>()) {
        let mut r = rng(seed);
        let model = small_model(&mut r);
        let policy = random_policy(&mut r, &model);
        let exact = exact_policy_evaluation(&model, &policy).unwrap();
        let g = model.gamma();
        let horizon = 400;
        let settings = EvalSettings { horizon, n_episodes: 4000, discounted: true, seed };
        let tail = model.q_max() * g.powi(horizon as i32) / (1.0 - g);
        for s in 0..model.n_states() {
            let stats = monte_carlo_return(&model, &policy, s, &settings).unwrap();
            let slack = tail + 5.0 * stats.std_error() + 1e-9;
            prop_assert!((stats.mean - exact[s]).abs() <= slack, "state {}: {} vs {}", s, stats.mean, exact[s]);
        }
    }
}
