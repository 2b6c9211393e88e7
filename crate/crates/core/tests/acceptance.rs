//! Acceptance criteria, one test each. Every test prints a single
//! `[PASS]`/`[FAIL]` line with the measured value; run with `--nocapture`
//! to see them. Checks are serialized so wall times are not inflated by
//! each other.

use std::sync::{Mutex, OnceLock};

use coopd2d::sim::SimConfig;
use coopd2d::verify::{self, CriterionReport, TrendSweep, MIN_TREND_SCENARIOS};

const SEED: u64 = 1;

static SERIAL: Mutex<()> = Mutex::new(());
static SWEEP: OnceLock<TrendSweep> = OnceLock::new();

fn sweep() -> &'static TrendSweep {
    SWEEP.get_or_init(|| TrendSweep::run(&SimConfig::default(), MIN_TREND_SCENARIOS).expect("sweep runs"))
}

fn check(run: impl FnOnce() -> CriterionReport) {
    let _guard = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let report = run();
    println!("{report}");
    assert!(report.passed, "{report}");
}

#[test]
fn criterion_1_policy_lp_equivalence() {
    check(|| verify::policy_lp_equivalence(SEED));
}

#[test]
fn criterion_2_constraint_equality() {
    check(|| verify::constraint_equality(SEED, &SimConfig::default()));
}

#[test]
fn criterion_3_stability_certification() {
    check(|| verify::stability_certification(SEED));
}

#[test]
fn criterion_4_near_optimality() {
    check(|| verify::near_optimality(SEED));
}

#[test]
fn criterion_5_utility_trend() {
    check(|| verify::utility_trend(sweep()));
}

#[test]
fn criterion_6_scheme_ordering() {
    check(|| {
        let report = verify::scheme_ordering(sweep());
        for (n, gap) in sweep().auction_gaps() {
            println!("auction gap to optimal at N={n}: {:.2}%", 100.0 * gap);
        }
        report
    });
}

#[test]
fn criterion_7_outage() {
    check(|| verify::outage_levels(sweep()));
}

#[test]
fn criterion_8_determinism() {
    check(|| verify::determinism(SEED));
}

#[test]
fn criterion_9_realized_rate_consistency() {
    check(|| verify::realized_rate_consistency(&SimConfig::default(), 10));
}

#[test]
fn certifier_catches_an_injected_price_fault() {
    let _guard = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let (caught, witness) = verify::fault_injection();
    println!("[{}] certifier fault injection: witness {witness:?}", if caught { "PASS" } else { "FAIL" });
    assert!(caught);
}
