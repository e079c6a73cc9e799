//! Pricers against independent reference solvers on random small chains.

use parisian::oracle::suites::*;

fn expect(check: Check) {
    match check {
        Ok(msg) => println!("{msg}"),
        Err(msg) => panic!("{msg}"),
    }
}

#[test]
fn lemke_matches_enumeration() {
    expect(lemke_vs_enumeration(200, 11));
}

#[test]
fn vanilla_perpetual_matches_value_iteration() {
    expect(vanilla_vs_value_iteration(50, 12));
}

#[test]
fn finite_downin_matches_joint_lattice() {
    expect(finite_downin_vs_lattice(20, 13));
}

#[test]
fn finite_downout_matches_age_chain() {
    expect(finite_downout_vs_dp(20, 14));
}

#[test]
fn parisian_transform_matches_simulation() {
    expect(transform_vs_monte_carlo(1_000_000, 3.0, 15));
}

#[test]
fn structural_invariants_hold() {
    expect(structural_invariants());
}

#[test]
fn suites_by_name() {
    let checks = run_suite("lcp", 0.1, 1).unwrap();
    assert_eq!(checks.len(), 2);
    assert!(checks.iter().all(|(_, c)| c.is_ok()));
    assert!(run_suite("nonsense", 1.0, 1).is_err());
}
