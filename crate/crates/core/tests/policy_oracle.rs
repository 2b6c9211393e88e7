use coopd2d::channel::RatePair;
use coopd2d::policy::{
    apply_policy, dual_statistic, expected_cu_rate, expected_payoff, lp_oracle, random_discrete, solve_threshold,
    solve_threshold_bisection, RateDistribution,
};
use coopd2d::SeedStream;
use proptest::prelude::*;
use rand::Rng;

/// Optimal LP value by enumerating the vertices of
/// `{a ∈ [0,1]^K : Σ p_k c_k a_k ≤ budget}`: every 0/1 point inside, plus
/// every point with one fractional coordinate on the hyperplane.
fn vertex_oracle(dist: &RateDistribution, r_th: f64) -> Option<f64> {
    let states: Vec<(RatePair, f64)> = dist.weighted().collect();
    let budget = dist.mean_cu_rate() - r_th;
    if budget < 0.0 {
        return None;
    }
    let k = states.len();
    let mut best = f64::NEG_INFINITY;
    for mask in 0u32..(1 << k) {
        let (mut cost, mut gain) = (0.0, 0.0);
        for (i, (s, p)) in states.iter().enumerate() {
            if mask & (1 << i) != 0 {
                cost += p * s.r_cu;
                gain += p * s.r_d2d;
            }
        }
        if cost <= budget {
            best = best.max(gain);
            for (i, (s, p)) in states.iter().enumerate() {
                let c = p * s.r_cu;
                if mask & (1 << i) == 0 && c > 0.0 && cost + c > budget {
                    best = best.max(gain + p * s.r_d2d * (budget - cost) / c);
                }
            }
        }
    }
    Some(best)
}

fn instances(seed: u64, count: usize) -> Vec<(RateDistribution, f64)> {
    let mut rng = SeedStream::new(seed).rng();
    (0..count)
        .map(|_| {
            let dist = random_discrete(&mut rng, 10, 5.0);
            let r_th = rng.random_range(0.0..=1.0) * dist.mean_cu_rate();
            (dist, r_th)
        })
        .collect()
}

#[test]
fn threshold_policy_matches_both_lp_oracles() {
    for (dist, r_th) in instances(11, 100) {
        let policy = solve_threshold(&dist, r_th).unwrap();
        assert!(policy.feasible);
        let value = expected_payoff(&policy, &dist);
        let greedy = lp_oracle(&dist, r_th).unwrap();
        let vertex = vertex_oracle(&dist, r_th).unwrap();
        assert!((value - greedy).abs() <= 1e-9, "{value} vs greedy {greedy}");
        assert!((value - vertex).abs() <= 1e-9, "{value} vs vertices {vertex}");
    }
}

#[test]
fn constraint_holds_with_equality() {
    for (dist, r_th) in instances(12, 100) {
        let policy = solve_threshold(&dist, r_th).unwrap();
        let cu = expected_cu_rate(&policy, &dist);
        assert!((cu - r_th).abs() <= 1e-9, "E(1-pi)r_c = {cu}, r_th = {r_th}");
    }
}

#[test]
fn threshold_is_minimal_over_the_candidate_grid() {
    for (dist, r_th) in instances(13, 100) {
        let policy = solve_threshold(&dist, r_th).unwrap();
        assert!(dual_statistic(&dist, policy.lambda_star) >= r_th);
        for (s, _) in dist.weighted() {
            if s.r_cu > 0.0 {
                let ratio = s.r_d2d / s.r_cu;
                if ratio < policy.lambda_star {
                    assert!(dual_statistic(&dist, ratio) < r_th);
                }
            }
        }
    }
}

#[test]
fn infeasible_instances_agree() {
    let dist = RateDistribution::discrete(vec![(RatePair::new(1.0, 2.0), 0.5), (RatePair::new(2.0, 1.0), 0.5)]).unwrap();
    let policy = solve_threshold(&dist, 1.6).unwrap();
    assert!(!policy.feasible);
    assert_eq!(expected_payoff(&policy, &dist), -1.0);
    assert!(lp_oracle(&dist, 1.6).is_err());
    assert!(vertex_oracle(&dist, 1.6).is_none());
}

#[test]
fn bisection_lands_on_the_same_policy_value() {
    for (dist, r_th) in instances(14, 50) {
        let exact = solve_threshold(&dist, r_th).unwrap();
        let bisected = solve_threshold_bisection(&dist, r_th).unwrap();
        let (a, b) = (expected_payoff(&exact, &dist), expected_payoff(&bisected, &dist));
        assert!((a - b).abs() <= 1e-6, "{a} vs {b}");
    }
}

fn distribution() -> impl Strategy<Value = RateDistribution> {
    prop::collection::vec((0.0f64..5.0, 0.0f64..5.0, 0.05f64..1.0), 1..=10).prop_map(|states| {
        let total: f64 = states.iter().map(|s| s.2).sum();
        RateDistribution::Discrete(states.into_iter().map(|(c, d, w)| (RatePair::new(c, d), w / total)).collect())
    })
}

proptest! {
    #[test]
    fn dual_statistic_is_nondecreasing(dist in distribution(), a in 0.0f64..10.0, b in 0.0f64..10.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(dual_statistic(&dist, lo) <= dual_statistic(&dist, hi));
    }

    #[test]
    fn payoff_is_nonincreasing_in_the_requirement(dist in distribution(), u in 0.0f64..1.0, w in 0.0f64..1.0) {
        let mean = dist.mean_cu_rate();
        let (lo, hi) = if u <= w { (u * mean, w * mean) } else { (w * mean, u * mean) };
        let v_lo = expected_payoff(&solve_threshold(&dist, lo).unwrap(), &dist);
        let v_hi = expected_payoff(&solve_threshold(&dist, hi).unwrap(), &dist);
        prop_assert!(v_hi <= v_lo + 1e-12);
    }

    #[test]
    fn shares_have_threshold_structure(dist in distribution(), u in 0.0f64..1.0) {
        let policy = solve_threshold(&dist, u * dist.mean_cu_rate()).unwrap();
        for (s, _) in dist.weighted() {
            let a = apply_policy(&policy, &s).unwrap();
            prop_assert!(a == 0.0 || a == 1.0 || a == policy.alpha_boundary);
        }
    }
}
