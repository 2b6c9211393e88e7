use coopd2d::channel::{sample_fading, PlacementBounds};
use coopd2d::matching::{optimal_assignment, Matching};
use coopd2d::policy::{apply_policy, CooperationPolicy};
use coopd2d::runner::with_threads;
use coopd2d::sim::{
    generate_scenario, outage_percentage, pair_users, prepare_scenario, run_experiment, run_frame, run_frame_logged,
    run_scenario, Scheme, SimConfig, Summary,
};
use coopd2d::{Error, SeedStream};

fn small() -> SimConfig {
    SimConfig {
        n_cu: 4,
        n_d2d: 6,
        samples_per_pair: 2000,
        subframes: 300,
        n_scenarios: 6,
        ..SimConfig::default()
    }
}

#[test]
fn placement_respects_the_geometry() {
    let config = SimConfig { n_cu: 50, n_d2d: 200, ..SimConfig::default() };
    for seed in 0..5 {
        let g = generate_scenario(&config, &mut SeedStream::new(seed).rng());
        g.validate(&PlacementBounds::default()).unwrap();
        for cu in &g.cu_positions {
            assert!((cu.distance(&g.bs_position) - 500.0).abs() <= 1e-9);
        }
        for (dt, dr) in g.dt_positions.iter().zip(&g.dr_positions) {
            let r = dt.distance(&g.bs_position);
            assert!((200.0..=400.0).contains(&r));
            let d = dt.distance(dr);
            assert!((10.0 - 1e-9..=30.0 + 1e-9).contains(&d));
        }
    }
}

#[test]
fn transmitters_are_uniform_by_area() {
    let config = SimConfig { n_cu: 0, n_d2d: 100_000, ..SimConfig::default() };
    let g = generate_scenario(&config, &mut SeedStream::new(3).rng());
    let inside = g
        .dt_positions
        .iter()
        .filter(|p| p.distance(&g.bs_position) <= 300.0)
        .count();
    let p = inside as f64 / 1e5;
    assert!((p - 5.0 / 12.0).abs() <= 0.01, "P(r <= 300) = {p}");
}

#[test]
fn single_subframe_matches_hand_composition() {
    let config = SimConfig { subframes: 1, ..small() };
    let scenario = prepare_scenario(&config, 0).unwrap();
    let mut phi = Matching::empty(config.n_cu, config.n_d2d);
    phi.pair(1, 3, 0.0);
    let policy = CooperationPolicy { lambda_star: 0.8, alpha_boundary: 0.5, feasible: true };
    let mut policies = vec![None; config.n_cu];
    policies[1] = Some(policy);
    let frame = run_frame(&scenario, &phi, &policies, &config).unwrap();

    let b = &config.budget;
    let g = &scenario.geometry;
    let (cu, dt, dr, bs) = (g.cu_positions[1], g.dt_positions[3], g.dr_positions[3], g.bs_position);
    let mut rng = scenario.frame_stream(1, Some(3)).rng();
    let eta: Vec<f64> = (0..4).map(|_| sample_fading(&mut rng)).collect();
    let h = |d: f64, e: f64| e * d.powi(-4);
    let (h_mb, h_mn, h_nb, h_nn) = (
        h(cu.distance(&bs), eta[0]),
        h(cu.distance(&dt), eta[1]),
        h(dt.distance(&bs), eta[2]),
        h(dt.distance(&dr), eta[3]),
    );
    let direct = (1.0 + b.p_cu * h_mb / b.noise).ln();
    let relay = 0.5
        * (1.0 + b.p_cu * h_mn / b.noise)
            .ln()
            .min((1.0 + b.p_cu * h_mb / b.noise + b.p_dt * h_nb / b.noise).ln());
    let r_c = direct.max(relay);
    let r_d = (1.0 + b.p_dt * h_nn / b.noise).ln();
    let alpha = if 0.8 * r_c > r_d { 0.0 } else { 1.0 };
    assert_eq!(apply_policy(&policy, &coopd2d::RatePair::new(r_c, r_d)).unwrap(), alpha);
    assert!((frame.realized_cu_rate[1] - (1.0 - alpha) * r_c).abs() <= 1e-12);
    assert!((frame.realized_d2d_rate[3] - alpha * r_d).abs() <= 1e-12);
    assert_eq!(frame.realized_d2d_rate[0], 0.0);
}

#[test]
fn subframe_log_conserves_time_and_reproduces_frame_rates() {
    let config = small();
    let scenario = prepare_scenario(&config, 1).unwrap();
    let (phi, _) = optimal_assignment(&scenario.payoffs);
    let policies = scenario.policies_for(&phi);
    let mut log = Vec::new();
    let frame = run_frame_logged(&scenario, &phi, &policies, &config, &mut log).unwrap();
    assert_eq!(log.len(), config.n_cu * config.subframes);
    for m in 0..config.n_cu {
        let rows: Vec<_> = log.iter().filter(|r| r.cu == m).collect();
        for r in &rows {
            assert_eq!((1.0 - r.alpha) + r.alpha, 1.0);
            assert!((0.0..=1.0).contains(&r.alpha));
        }
        let cu: f64 = rows.iter().map(|r| (1.0 - r.alpha) * r.rates.r_cu).sum::<f64>() / config.subframes as f64;
        assert!((cu - frame.realized_cu_rate[m]).abs() <= 1e-12);
        if let Some(n) = phi.mu_cu[m] {
            let d2d: f64 = rows.iter().map(|r| r.alpha * r.rates.r_d2d).sum::<f64>() / config.subframes as f64;
            assert!((d2d - frame.realized_d2d_rate[n]).abs() <= 1e-12);
        }
    }
}

#[test]
fn matched_pair_without_policy_is_a_usage_error() {
    let config = small();
    let scenario = prepare_scenario(&config, 0).unwrap();
    let mut phi = Matching::empty(config.n_cu, config.n_d2d);
    phi.pair(0, 0, 0.0);
    let err = run_frame(&scenario, &phi, &vec![None; config.n_cu], &config).unwrap_err();
    assert!(matches!(err, Error::Usage(_)));
}

#[test]
fn experiments_are_reproducible_across_thread_counts() {
    let config = small();
    let a = run_experiment(&config, &Scheme::ALL).unwrap();
    let b = with_threads(Some(1), || run_experiment(&config, &Scheme::ALL)).unwrap().unwrap();
    let c = with_threads(Some(3), || run_experiment(&config, &Scheme::ALL)).unwrap().unwrap();
    assert_eq!(a, b);
    assert_eq!(a, c);
    let other = run_experiment(&SimConfig { master_seed: 2, ..config }, &Scheme::ALL).unwrap();
    assert_ne!(a.rows, other.rows);
}

#[test]
fn optimal_pairing_dominates_the_auction_per_scenario() {
    let config = small();
    for i in 0..config.n_scenarios {
        let scenario = prepare_scenario(&config, i).unwrap();
        let mut rng = SeedStream::new(i as u64).rng();
        let auction = pair_users(Scheme::Auction, &scenario.payoffs, config.epsilon, &mut rng).unwrap();
        let optimal = pair_users(Scheme::Optimal, &scenario.payoffs, config.epsilon, &mut rng).unwrap();
        assert!(optimal.total_payoff(&scenario.payoffs) + 1e-9 >= auction.total_payoff(&scenario.payoffs));
    }
}

#[test]
fn matched_cus_meet_the_requirement_on_fresh_fading() {
    let config = SimConfig { n_cu: 6, n_d2d: 10, subframes: 1000, ..small() };
    let mut rates = Vec::new();
    let mut frames = Vec::new();
    for i in 0..config.n_scenarios {
        let out = run_scenario(&config, i, &[Scheme::Auction]).unwrap().remove(0);
        rates.extend(out.frame.matching.pairs().map(|(m, _)| out.frame.realized_cu_rate[m]));
        frames.push(out.frame);
    }
    let s = Summary::of(&rates);
    assert!(rates.len() > 5);
    assert!(s.mean >= config.r_th - 3.0 * s.std_err, "{} vs {}", s.mean, config.r_th);
    let outage = outage_percentage(&frames, config.r_th);
    assert!((0.0..=1.0).contains(&outage));
}

#[test]
fn unmatched_edge_users_are_in_outage() {
    let config = small();
    let scenario = prepare_scenario(&config, 2).unwrap();
    let phi = Matching::empty(config.n_cu, config.n_d2d);
    let frame = run_frame(&scenario, &phi, &vec![None; config.n_cu], &config).unwrap();
    assert_eq!(outage_percentage(&[frame], config.r_th), 1.0);
    let planned = scenario.planned_cu_rates(&phi);
    assert!(planned.iter().all(|&r| r < config.r_th));
}
