//! Acceptance suite: every release-gating criterion as one test, each printing
//! a single PASS/FAIL line. Run with `cargo test --test acceptance`
//! (`-- --nocapture` to see the lines as they come).
//!
//! All criteria share one session so oracle tables built for one criterion are
//! reused by the rest.

use expconv_core::config::{Matrix, Tolerances};
use expconv_core::records::{summarize, BoundCheckRecord};
use expconv_core::suites::{run_suite, Session};
use std::sync::OnceLock;

fn session() -> &'static Session {
    static SESSION: OnceLock<Session> = OnceLock::new();
    SESSION.get_or_init(|| Session::new(Matrix::default_matrix(), Tolerances::default()))
}

fn report(id: &str, what: &str, records: &[BoundCheckRecord]) {
    let s = summarize(records);
    if s.failed == 0 {
        println!("ACCEPTANCE {id}: PASS ({} checks) - {what}", s.total);
    } else {
        println!("ACCEPTANCE {id}: FAIL ({}/{} checks failed) - {what}", s.failed, s.total);
        for r in records.iter().filter(|r| !r.pass).take(5) {
            println!(
                "    FAIL {} d={} m={} gamma={} n={:?} lambda={:?} x={:?}: lhs={:.9e} rhs={:.9e}",
                r.check_id, r.d, r.m, r.gamma, r.n, r.lambda, r.x, r.lhs, r.rhs
            );
        }
    }
    assert_eq!(s.failed, 0, "{id} failed: {what}");
}

fn records_for(suite: &str, prefix: &str) -> Vec<BoundCheckRecord> {
    run_suite(session(), suite)
        .unwrap()
        .into_iter()
        .filter(|r| r.check_id.starts_with(prefix))
        .collect()
}

#[test]
fn criterion_01_closed_form_oracle_anchor() {
    let recs = records_for("anchor", "anchor.twofold_closed_form");
    assert_eq!(recs.len(), 6);
    report("1", "f*f = e^{-x}(x+1) at rel err <= 1e-7 (d=1, m=1, gamma=0)", &recs);
}

#[test]
fn criterion_02_exact_1d_auxiliary_functions() {
    let recs = run_suite(session(), "gn1d").unwrap();
    assert_eq!(recs.len(), 9);
    report("2", "G_n tables match the exact 1-d formula within 1e-8 (gamma in {0, .25, .5}, n <= 4, r <= 80)", &recs);
}

#[test]
fn criterion_03_thm_1d_sandwich_and_limit() {
    let recs = run_suite(session(), "thm_1d").unwrap();
    report("3", "d=1 ratio sandwich at x in {10,50,100} and the 1.01 +- 1e-6 anchor at x=100", &recs);
}

#[test]
fn criterion_04_binomial_upper_and_lower_gen() {
    let recs = run_suite(session(), "thm1").unwrap();
    report("4", "binomial upper bound and g_n v M1^{n-1} lower bound over the default matrix, slack 1e-5", &recs);
}

#[test]
fn criterion_05_hn_le_majorant_gn_ge_minorant() {
    let mut recs = run_suite(session(), "thm2").unwrap();
    recs.extend(run_suite(session(), "thm4").unwrap());
    report("5", "h_n <= M3^{n-1} H_n and g_n >= M4^{n-1} G_n for d in {2,3}, n in {2,3}, x in {5,10,20,40}", &recs);
}

#[test]
fn criterion_06_beta_quotient() {
    let recs = run_suite(session(), "beta_quotient").unwrap();
    assert!(recs.len() >= 2000);
    report("6", "2 B_{1/r}(a,b) <= B(a,b) for a >= a0, 20 log-spaced r in [r0, 100 r0]", &recs);
}

#[test]
fn criterion_07_wright_function() {
    let recs = run_suite(session(), "wright").unwrap();
    report("7", "phi(1,0,1) anchor; series/asymptotic agreement 5% at t=400 and 1% at t=1e4 for rho in {0.5,1,2}", &recs);
}

#[test]
fn criterion_08_poisson_wright_sandwich() {
    let recs = run_suite(session(), "poisson_wright").unwrap();
    report("8", "Wright sandwich for p_lambda over the full matrix (x >= 1, lambda <= 4) with certificates < 1e-8", &recs);
}

#[test]
fn criterion_09_small_x_sandwich() {
    let recs = records_for("cor_poiss", "cor_poiss.small_x");
    report("9", "small-x sandwich lambda e^{-lambda||f||} f <= p <= e^{(M2-||f||)lambda} lambda f at x in {0.1,0.5,0.9}", &recs);
}

#[test]
fn criterion_10_dsp_regime() {
    let recs = run_suite(session(), "dsp").unwrap();
    report("10", "bounded-h2 regime (cutoff, d=1, gamma=2): geometric-in-n sandwich for n <= 3, x in {2,5,10,20}", &recs);
}

#[test]
fn criterion_11_sampler_cross_check() {
    let recs = run_suite(session(), "sampler").unwrap();
    report("11", "KS of 1e5 radial draws below the 1% critical value; atom fraction within 4 sigma", &recs);
}

#[test]
fn criterion_12_divergence_diagnostics() {
    let recs = run_suite(session(), "divergence").unwrap();
    report("12", "g_2 and f^{3*}/f^{2*} strictly increasing on x in {10,20,40,80} for in-range specs", &recs);
}
