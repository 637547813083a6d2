//! Cross-route agreement at a capital size where the simulation and the
//! Brownian solver are the practical options: from a macroscopic start the
//! discrete-vs-continuum gap is far below the Monte Carlo error bars, so the
//! two independent routes must bracket each other.

use ruinlab::conformal::ConformalContext;
use ruinlab::exact;
use ruinlab::model::{to_wedge, StepSet};
use ruinlab::montecarlo::{estimate, McOptions};
use ruinlab::Quantity;

#[test]
fn simulation_brackets_the_brownian_value_at_large_n() {
    let n = 500i64;
    let start = (150i64, 150i64);
    let ctx = ConformalContext::new();
    let (x1, x2) = to_wedge(start.0 as f64, start.1 as f64);
    let bm = ctx.bm_third_first(x1, x2, n as f64).unwrap();
    assert!(bm > 0.05 && bm < 0.95, "macroscopic probability, got {bm}");

    let est = estimate(
        Quantity::ThirdFirst,
        n,
        start,
        &StepSet::standard(),
        &McOptions::new(5_000, 31),
    )
    .unwrap();
    assert!(
        est.brackets(bm, 3.0),
        "bm {bm} vs mc {} +- {}",
        est.mean,
        est.stderr
    );

    // the p321 weighting stays consistent between the routes too
    let bm_p = ctx.bm_p321(x1, x2, n as f64).unwrap();
    let est_p = estimate(
        Quantity::P321,
        n,
        start,
        &StepSet::standard(),
        &McOptions::new(5_000, 32),
    )
    .unwrap();
    assert!(
        est_p.brackets(bm_p, 3.0),
        "bm {bm_p} vs mc {} +- {}",
        est_p.mean,
        est_p.stderr
    );
}

#[test]
fn all_three_routes_meet_in_the_linear_solve_range() {
    // N small enough for the exact route, large enough for the asymptotic
    // regime: exact anchors, mc and bm must agree with it
    let n = 60i64;
    let start = (10i64, 14i64);
    let exact_v = exact::third_first_exact(n, start, 1e-12).unwrap();
    let (x1, x2) = to_wedge(start.0 as f64, start.1 as f64);
    let bm = ConformalContext::new()
        .bm_third_first(x1, x2, n as f64)
        .unwrap();
    assert!(
        (bm - exact_v).abs() / exact_v < 1e-3,
        "exact {exact_v} vs bm {bm}"
    );
    let est = estimate(
        Quantity::ThirdFirst,
        n,
        start,
        &StepSet::standard(),
        &McOptions::new(40_000, 78),
    )
    .unwrap();
    assert!(
        est.brackets(exact_v, 3.0),
        "exact {exact_v} vs mc {} +- {}",
        est.mean,
        est.stderr
    );
}
