//! Reproductions of the numeric narrative: convergence sweeps, the
//! rate-of-convergence fit, the Green-function scaling reports, the
//! harmonic-measure identity report, the truncation-error profile, and the
//! lazy-walk equivalence check.
//!
//! Every report is a deterministic function of its inputs and tolerances.
//! Records serialize to CSV (fixed header) and JSON (one object per record,
//! wrapped in a report carrying `schema_version`).

use crate::conformal::{ConformalContext, ConformalError};
use crate::exact::{
    self, exit_distribution_from_green, green_column, harmonic_solve, layer_mass, BoundaryData,
    ExactError, Quantity,
};
use crate::model::{
    to_wedge, v_original, BoundarySide, ModelError, StepSet, TriangleDomain, LAYER_GAP,
};
use crate::montecarlo::{estimate, McError, McOptions};
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::time::Instant;
use thiserror::Error;

pub const SCHEMA_VERSION: u32 = 1;

/// Ray fractions at which local Green values and exit-measure profiles are
/// sampled: position along the layer as a fraction of its length.
pub const RAY_FRACTIONS: [f64; 3] = [0.3, 0.5, 0.7];

#[derive(Debug, Error)]
pub enum StudiesError {
    #[error(transparent)]
    Exact(#[from] ExactError),
    #[error(transparent)]
    Conformal(#[from] ConformalError),
    #[error(transparent)]
    Mc(#[from] McError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("rate fit needs at least 5 capital sizes, got {0}")]
    TooFewSizes(usize),
    #[error("degenerate rate fit: {0}")]
    DegenerateFit(String),
    #[error("truncation profile needs N >= 60, got {0}")]
    ProfileTooSmall(i64),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

/// Computation route for a swept quantity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Exact,
    Mc,
    Bm,
    Asym,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Exact => "exact",
            Method::Mc => "mc",
            Method::Bm => "bm",
            Method::Asym => "asym",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "exact" => Ok(Method::Exact),
            "mc" => Ok(Method::Mc),
            "bm" => Ok(Method::Bm),
            "asym" => Ok(Method::Asym),
            other => Err(format!(
                "unknown method '{other}' (expected exact, mc, bm or asym)"
            )),
        }
    }
}

/// One computed value. `value` is empty when the route failed or does not
/// exist for the quantity (there is no closed Brownian or asymptotic form
/// for first-wins).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    #[serde(rename = "N")]
    pub n: i64,
    pub start_a: i64,
    pub start_b: i64,
    pub quantity: Quantity,
    pub method: Method,
    pub value: Option<f64>,
    pub stderr: Option<f64>,
    pub residual: Option<f64>,
    pub iterations: Option<u64>,
    pub seconds: f64,
}

/// Wrapper serialized to JSON; CSV carries the bare records under the fixed
/// header.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub schema_version: u32,
    pub records: Vec<SweepRecord>,
}

/// Knobs shared by the sweep routes.
#[derive(Debug, Clone, Copy)]
pub struct SweepConfig {
    pub tol: f64,
    pub trials: u64,
    pub seed: u64,
    pub workers: usize,
    pub quad_tol: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            tol: exact::DEFAULT_TOL,
            trials: 100_000,
            seed: 1,
            workers: 0,
            quad_tol: 1e-10,
        }
    }
}

/// Compute each requested quantity by each requested method. Cells run in
/// parallel across `(N, start)` with independent solver state; record order
/// and values are scheduling-independent. Per-record failures leave `value`
/// empty and the sweep continues.
pub fn sweep(
    quantities: &[Quantity],
    ns: &[i64],
    starts: &[(i64, i64)],
    methods: &[Method],
    cfg: &SweepConfig,
) -> Vec<SweepRecord> {
    use rayon::prelude::*;

    let ctx = ConformalContext::new().with_quad_tol(cfg.quad_tol);
    let cells: Vec<(i64, (i64, i64))> = ns
        .iter()
        .flat_map(|&n| starts.iter().map(move |&s| (n, s)))
        .collect();
    cells
        .par_iter()
        .map(|&(n, start)| sweep_cell(n, start, quantities, methods, cfg, &ctx))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect()
}

fn sweep_cell(
    n: i64,
    start: (i64, i64),
    quantities: &[Quantity],
    methods: &[Method],
    cfg: &SweepConfig,
    ctx: &ConformalContext,
) -> Vec<SweepRecord> {
    let mut records = Vec::with_capacity(quantities.len() * methods.len());
    for &q in quantities {
        for &method in methods {
            let clock = Instant::now();
            let mut stderr = None;
            let mut residual = None;
            let mut iterations = None;
            let value = match method {
                Method::Exact => {
                    match TriangleDomain::new(n)
                        .map_err(ExactError::from)
                        .and_then(|d| {
                            harmonic_solve(&d, &StepSet::standard(), &q.boundary_data(), cfg.tol)
                                .map(|r| (d, r))
                        }) {
                        Ok((d, report)) => {
                            residual = Some(report.relative_residual);
                            iterations = Some(report.iterations as u64);
                            d.index_of(start.0, start.1).map(|i| report.values[i])
                        }
                        Err(_) => None,
                    }
                }
                Method::Mc => {
                    let opts = McOptions {
                        trials: cfg.trials,
                        seed: cfg.seed,
                        workers: cfg.workers,
                        second_stage: Default::default(),
                    };
                    match estimate(q, n, start, &StepSet::standard(), &opts) {
                        Ok(est) => {
                            stderr = Some(est.stderr);
                            Some(est.mean)
                        }
                        Err(_) => None,
                    }
                }
                Method::Bm => {
                    let (x1, x2) = to_wedge(start.0 as f64, start.1 as f64);
                    match q {
                        Quantity::P321 => ctx.bm_p321(x1, x2, n as f64).ok(),
                        Quantity::ThirdFirst => ctx.bm_third_first(x1, x2, n as f64).ok(),
                        Quantity::FirstWins => None,
                    }
                }
                Method::Asym => {
                    let (a, b) = (start.0 as f64, start.1 as f64);
                    match q {
                        Quantity::P321 => Some(crate::asymptotics::predict_p321(a, b, n as f64)),
                        Quantity::ThirdFirst => {
                            Some(crate::asymptotics::predict_third_first(a, b, n as f64))
                        }
                        Quantity::FirstWins => None,
                    }
                }
            };
            records.push(SweepRecord {
                n,
                start_a: start.0,
                start_b: start.1,
                quantity: q,
                method,
                value,
                stderr,
                residual,
                iterations,
                seconds: clock.elapsed().as_secs_f64(),
            });
        }
    }
    records
}

/// Fit of `log |P - P_bm|` against `log N`.
///
/// `slope` is the decay order (sign flipped from the raw regression slope).
/// The proven bound guarantees order at least 3; whether the order is closer
/// to the conjectured 4 is reported, never asserted. Sizes below
/// `RATE_FIT_MIN_SIZE` still get their differences computed but are excluded
/// from the fit (pre-asymptotic transients pollute the slope).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RateReport {
    pub schema_version: u32,
    pub ns: Vec<i64>,
    pub deltas: Vec<f64>,
    pub fit_min_size: i64,
    pub slope: f64,
    pub slope_stderr: f64,
    pub intercept: f64,
    /// True when the fitted decay order is closer to 4 (the conjectured
    /// rate) than to 3 (the proven one). Informational only.
    pub suggests_conjectured_rate: bool,
}

/// Smallest capital size admitted to the rate fit.
pub const RATE_FIT_MIN_SIZE: i64 = 40;

/// Exact-vs-Brownian differences and their fitted decay order.
///
/// The exact solves run at a tolerance floor well below the differences
/// themselves; the Brownian values use quadrature scaled to the answer.
pub fn rate_report(ns: &[i64], start: (i64, i64)) -> Result<RateReport, StudiesError> {
    let fit_count = ns.iter().filter(|&&n| n >= RATE_FIT_MIN_SIZE).count();
    if fit_count < 5 {
        return Err(StudiesError::TooFewSizes(fit_count));
    }
    let ctx = ConformalContext::new().with_quad_tol(1e-13);
    let (x1, x2) = to_wedge(start.0 as f64, start.1 as f64);
    let mut deltas = Vec::with_capacity(ns.len());
    for &n in ns {
        let exact_p = exact::p321_exact(n, start, 1e-13)?;
        let bm_p = ctx.bm_p321(x1, x2, n as f64)?;
        deltas.push((exact_p - bm_p).abs());
    }
    // least squares on (log N, log delta) over the admitted window
    let m = fit_count as f64;
    let xs: Vec<f64> = ns
        .iter()
        .filter(|&&n| n >= RATE_FIT_MIN_SIZE)
        .map(|&n| (n as f64).ln())
        .collect();
    let ys: Vec<f64> = ns
        .iter()
        .zip(&deltas)
        .filter(|&(&n, _)| n >= RATE_FIT_MIN_SIZE)
        .map(|(_, &d)| {
            if d > 0.0 {
                Ok(d.ln())
            } else {
                Err(StudiesError::DegenerateFit(format!(
                    "difference underflowed to zero at one of the sizes {ns:?}"
                )))
            }
        })
        .collect::<Result<_, _>>()?;
    let x_mean = xs.iter().sum::<f64>() / m;
    let y_mean = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|&x| (x - x_mean) * (x - x_mean)).sum();
    if sxx == 0.0 {
        return Err(StudiesError::DegenerateFit(
            "all capital sizes equal".into(),
        ));
    }
    let sxy: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(&x, &y)| (x - x_mean) * (y - y_mean))
        .sum();
    let raw_slope = sxy / sxx;
    let intercept = y_mean - raw_slope * x_mean;
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(&x, &y)| {
            let r = y - (intercept + raw_slope * x);
            r * r
        })
        .sum();
    let slope_stderr = if fit_count > 2 {
        (ss_res / (m - 2.0) / sxx).sqrt()
    } else {
        f64::NAN
    };
    let slope = -raw_slope;
    Ok(RateReport {
        schema_version: SCHEMA_VERSION,
        ns: ns.to_vec(),
        deltas,
        fit_min_size: RATE_FIT_MIN_SIZE,
        slope,
        slope_stderr,
        intercept,
        suggests_conjectured_rate: (slope - 4.0).abs() < (slope - 3.0).abs(),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LayerMassRow {
    pub n: i64,
    pub j: i64,
    pub mass: f64,
    pub mass_per_j: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LocalRow {
    pub n: i64,
    pub j: i64,
    /// Position along the layer as a fraction of its length.
    pub theta: f64,
    pub state_a: i64,
    pub state_b: i64,
    /// `N^4 G(x, y) / (V(x) * gap * j)`: the empirical shape function, up to
    /// the model constant.
    pub normalized: f64,
}

/// Green-function scaling study: layer masses (linear in `j`), normalized
/// local values along fixed rays (the empirical shape profile), and the
/// integrated-shape constant recovered from the exit probability.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Theorem1Report {
    pub schema_version: u32,
    pub start: (i64, i64),
    pub rho: f64,
    pub rows: Vec<LayerMassRow>,
    pub locals: Vec<LocalRow>,
    /// Per `N`: `N^3 * third_first / (A B (A + B))`, the empirically
    /// integrated shape times 3, which converges to the limit constant.
    pub three_int_h: Vec<(i64, f64)>,
}

pub fn theorem1_report(
    ns: &[i64],
    start: (i64, i64),
    js: &[i64],
    rho: f64,
    tol: f64,
) -> Result<Theorem1Report, StudiesError> {
    let steps = StepSet::standard();
    let vx = v_original(start.0 as f64, start.1 as f64);
    let mut rows = Vec::new();
    let mut locals = Vec::new();
    let mut three_int_h = Vec::new();
    for &n in ns {
        let domain = TriangleDomain::new(n)?;
        let green = green_column(&domain, &steps, start, tol)?;
        for &j in js {
            let mass = layer_mass(&domain, &green, j, rho)?;
            rows.push(LayerMassRow {
                n,
                j,
                mass,
                mass_per_j: mass / j as f64,
            });
            for &theta in &RAY_FRACTIONS {
                let layer = n - j;
                let a = ((theta * layer as f64).round() as i64).clamp(1, layer - 1);
                let b = layer - a;
                let idx = domain.index_of(a, b).expect("layer state is interior");
                let normalized = green.g[idx] * (n as f64).powi(4) / (vx * LAYER_GAP * j as f64);
                locals.push(LocalRow {
                    n,
                    j,
                    theta,
                    state_a: a,
                    state_b: b,
                    normalized,
                });
            }
        }
        let third = exact::third_first_exact(n, start, tol)?;
        let denom = (start.0 * start.1 * (start.0 + start.1)) as f64;
        three_int_h.push((n, third * (n as f64).powi(3) / denom));
    }
    Ok(Theorem1Report {
        schema_version: SCHEMA_VERSION,
        start,
        rho,
        rows,
        locals,
        three_int_h,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Theorem2Report {
    pub schema_version: u32,
    pub n: i64,
    pub start: (i64, i64),
    /// Largest gap between the Green-route exit mass and an independent
    /// per-point Dirichlet solve, over the checked far-edge points.
    pub identity_max_abs_err: f64,
    pub identity_points_checked: usize,
    /// Exit mass of the far edge and the one-solve absorption probability;
    /// equal up to solver tolerance.
    pub sum_mu_b3: f64,
    pub third_first: f64,
    /// `(theta, N^4 mu(y) / V(x))` along the far edge.
    pub profile: Vec<(f64, f64)>,
}

/// Harmonic-measure report: verifies the two-preimage identity on the far
/// edge against independent Dirichlet solves and records the scaled exit
/// profile. `identity_checks` limits how many edge points get their own
/// Dirichlet solve (0 means all of them).
pub fn theorem2_report(
    n: i64,
    start: (i64, i64),
    identity_checks: usize,
    tol: f64,
) -> Result<Theorem2Report, StudiesError> {
    let domain = TriangleDomain::new(n)?;
    let steps = StepSet::standard();
    let start_idx = domain
        .index_of(start.0, start.1)
        .ok_or(ModelError::NotInterior(start.0, start.1))?;
    let green = green_column(&domain, &steps, start, tol)?;
    let mu = exit_distribution_from_green(&domain, &steps, &green);

    let count = (n - 1) as usize;
    let checks = if identity_checks == 0 {
        count
    } else {
        identity_checks.min(count)
    };
    let stride = count.div_ceil(checks).max(1);
    let mut identity_max_abs_err: f64 = 0.0;
    let mut checked = 0;
    for k in (0..count).step_by(stride) {
        let a = (k + 1) as i64;
        let y = (a, n - a);
        let dirichlet =
            harmonic_solve(&domain, &steps, &BoundaryData::PointMass(y), tol)?.values[start_idx];
        let via_green = mu.prob(&domain, BoundarySide::B3, y);
        identity_max_abs_err = identity_max_abs_err.max((dirichlet - via_green).abs());
        checked += 1;
    }

    let vx = v_original(start.0 as f64, start.1 as f64);
    let profile = RAY_FRACTIONS
        .iter()
        .map(|&theta| {
            let a = ((theta * n as f64).round() as i64).clamp(1, n - 1);
            let m = mu.prob(&domain, BoundarySide::B3, (a, n - a));
            (theta, m * (n as f64).powi(4) / vx)
        })
        .collect();

    Ok(Theorem2Report {
        schema_version: SCHEMA_VERSION,
        n,
        start,
        identity_max_abs_err,
        identity_points_checked: checked,
        sum_mu_b3: mu.side_mass(&domain, BoundarySide::B3),
        third_first: exact::third_first_exact(n, start, tol)?,
        profile,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TruncationRow {
    /// Ray step count: the lattice state is `(N - 2k, k)`.
    pub k: i64,
    /// Wedge distance to the nearest triangle vertex.
    pub delta: f64,
    /// One-step expectation defect of the smooth Dirichlet solution.
    pub f_n: f64,
    /// `|f_n| delta^6 / N`; bounded along the ray if the derivative bound
    /// holds.
    pub scaled: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TruncationProfile {
    pub schema_version: u32,
    pub n: i64,
    pub rows: Vec<TruncationRow>,
    pub max_scaled: f64,
    pub median_scaled: f64,
}

/// Truncation-error profile: evaluates the one-step expectation defect
/// `f_N(x) = E[v_N(x + X)] - v_N(x)` of the continuum solution at lattice
/// points along a ray from the vertex where the boundary data jumps (the
/// derivative bound is tight only where the solution is genuinely singular),
/// with the vertex distance ranging over roughly `[N/20, N/3]`.
pub fn truncation_profile(
    n: i64,
    ctx: &ConformalContext,
) -> Result<TruncationProfile, StudiesError> {
    if n < 60 {
        return Err(StudiesError::ProfileTooSmall(n));
    }
    let sqrt6 = crate::model::SQRT_6;
    let lo = (n as f64 / 20.0 / sqrt6).ceil() as i64;
    let hi = (n as f64 / 3.0 / sqrt6).floor() as i64;
    let vertices = [
        (0.0, 0.0),
        (std::f64::consts::SQRT_2 * n as f64, 0.0),
        to_wedge(0.0, n as f64),
    ];
    let value = |a: i64, b: i64| -> Result<f64, StudiesError> {
        let (x1, x2) = to_wedge(a as f64, b as f64);
        Ok(ctx.scaled_dirichlet_value(x1, x2, n as f64)?)
    };
    let mut rows = Vec::new();
    // ray (N - 2k, k) into the interior from the capital state (N, 0); the
    // linear far-edge weight is discontinuous at that corner
    for k in lo..=hi {
        let (a, b) = (n - 2 * k, k);
        let center = value(a, b)?;
        let mut mean = 0.0;
        for &(da, db) in crate::model::STANDARD_OFFSETS.iter() {
            mean += value(a + da, b + db)?;
        }
        mean /= 6.0;
        let f_n = mean - center;
        let (x1, x2) = to_wedge(a as f64, b as f64);
        let delta = vertices
            .iter()
            .map(|&(v1, v2)| ((x1 - v1).powi(2) + (x2 - v2).powi(2)).sqrt())
            .fold(f64::INFINITY, f64::min);
        rows.push(TruncationRow {
            k,
            delta,
            f_n,
            scaled: f_n.abs() * delta.powi(6) / n as f64,
        });
    }
    let mut scaled: Vec<f64> = rows.iter().map(|r| r.scaled).collect();
    scaled.sort_by(f64::total_cmp);
    let max_scaled = *scaled.last().expect("at least one ray point");
    let median_scaled = scaled[scaled.len() / 2];
    Ok(TruncationProfile {
        schema_version: SCHEMA_VERSION,
        n,
        rows,
        max_scaled,
        median_scaled,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LazyRow {
    pub n: i64,
    /// Largest pointwise gap between the standard and lazy exit laws.
    pub max_exit_diff: f64,
    /// Expected-path-length ratio lazy/standard; 4/3 exactly in the limit of
    /// solver tolerance.
    pub mean_len_ratio: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LazyReport {
    pub schema_version: u32,
    pub start: (i64, i64),
    pub rows: Vec<LazyRow>,
    pub pass: bool,
}

/// The lazy walk shares the standard walk's embedded jump chain, so its exit
/// law is identical and its clock runs 4/3 slower.
pub fn lazy_equivalence_report(ns: &[i64], tol: f64) -> Result<LazyReport, StudiesError> {
    let start = (1, 1);
    let mut rows = Vec::new();
    for &n in ns {
        let domain = TriangleDomain::new(n)?;
        let std_green = green_column(&domain, &StepSet::standard(), start, tol)?;
        let lazy_green = green_column(&domain, &StepSet::lazy(), start, tol)?;
        let std_mu = exit_distribution_from_green(&domain, &StepSet::standard(), &std_green);
        let lazy_mu = exit_distribution_from_green(&domain, &StepSet::lazy(), &lazy_green);
        let max_exit_diff = std_mu
            .probs
            .iter()
            .zip(&lazy_mu.probs)
            .map(|(&a, &b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        rows.push(LazyRow {
            n,
            max_exit_diff,
            mean_len_ratio: lazy_green.total_mass() / std_green.total_mass(),
        });
    }
    let pass = rows
        .iter()
        .all(|r| r.max_exit_diff <= 1e-9 && (r.mean_len_ratio - 4.0 / 3.0).abs() <= 1e-9);
    Ok(LazyReport {
        schema_version: SCHEMA_VERSION,
        start,
        rows,
        pass,
    })
}

/// Write records as CSV with the fixed header.
pub fn write_csv<W: Write>(records: &[SweepRecord], w: W) -> Result<(), StudiesError> {
    let mut writer = csv::Writer::from_writer(w);
    for record in records {
        writer.serialize(record)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(r: R) -> Result<Vec<SweepRecord>, StudiesError> {
    let mut reader = csv::Reader::from_reader(r);
    let mut out = Vec::new();
    for row in reader.deserialize() {
        out.push(row?);
    }
    Ok(out)
}

/// Write records as a JSON report with a schema version.
pub fn write_json<W: Write>(records: &[SweepRecord], mut w: W) -> Result<(), StudiesError> {
    let report = SweepReport {
        schema_version: SCHEMA_VERSION,
        records: records.to_vec(),
    };
    serde_json::to_writer_pretty(&mut w, &report)?;
    w.write_all(b"\n")?;
    Ok(())
}

pub fn read_json<R: Read>(r: R) -> Result<SweepReport, StudiesError> {
    Ok(serde_json::from_reader(r)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_runs_all_routes() {
        let cfg = SweepConfig {
            trials: 200_000,
            seed: 3,
            ..Default::default()
        };
        let records = sweep(
            &[Quantity::P321, Quantity::ThirdFirst],
            &[20, 30],
            &[(1, 1)],
            &[Method::Exact, Method::Mc, Method::Bm, Method::Asym],
            &cfg,
        );
        assert_eq!(records.len(), 2 * 2 * 4);
        for r in &records {
            assert!(r.value.is_some(), "{:?} {:?} failed", r.quantity, r.method);
        }
        // mc brackets exact within 3 stderr
        for q in [Quantity::P321, Quantity::ThirdFirst] {
            for n in [20i64, 30] {
                let find = |m: Method| {
                    records
                        .iter()
                        .find(|r| r.method == m && r.quantity == q && r.n == n)
                        .unwrap()
                };
                let e = find(Method::Exact).value.unwrap();
                let mc = find(Method::Mc);
                assert!(
                    (mc.value.unwrap() - e).abs() <= 3.0 * mc.stderr.unwrap(),
                    "{q:?} N={n}"
                );
            }
        }
    }

    #[test]
    fn sweep_records_failures_without_stopping() {
        let cfg = SweepConfig {
            trials: 10,
            seed: 1,
            ..Default::default()
        };
        let records = sweep(
            &[Quantity::FirstWins],
            &[12],
            &[(1, 1)],
            &[Method::Exact, Method::Bm, Method::Asym],
            &cfg,
        );
        assert_eq!(records.len(), 3);
        assert!(records[0].value.is_some());
        assert!(records[1].value.is_none()); // no closed Brownian form
        assert!(records[2].value.is_none()); // no closed asymptotic constant
    }

    #[test]
    fn exact_vs_asym_gap_closes() {
        let cfg = SweepConfig::default();
        let records = sweep(
            &[Quantity::P321],
            &[300],
            &[(1, 1)],
            &[Method::Exact, Method::Asym],
            &cfg,
        );
        let e = records[0].value.unwrap();
        let a = records[1].value.unwrap();
        assert!((e - a).abs() / a <= 1e-3);
    }

    #[test]
    fn rate_report_on_small_sizes() {
        let report = rate_report(&[40, 48, 56, 64, 72], (1, 1)).unwrap();
        assert_eq!(report.deltas.len(), 5);
        assert!(report.deltas.iter().all(|&d| d >= 0.0));
        assert!(report.slope > 2.7, "slope {}", report.slope);
        assert!(report.slope_stderr.is_finite());
        // sizes below the fit window don't count toward the minimum of five
        assert!(matches!(
            rate_report(&[20, 30, 40, 50, 60], (1, 1)),
            Err(StudiesError::TooFewSizes(3))
        ));
        assert!(rate_report(&[40, 50], (1, 1)).is_err());
    }

    #[test]
    fn theorem1_layer_masses_grow_linearly() {
        let report = theorem1_report(&[100], (1, 1), &[4, 8], exact::DEFAULT_RHO, 1e-12).unwrap();
        assert_eq!(report.rows.len(), 2);
        let ratio = report.rows[1].mass_per_j / report.rows[0].mass_per_j;
        assert!((ratio - 1.0).abs() < 0.15, "mass/j ratio {ratio}");
        // the recovered constant is in the right ballpark already at N=100
        let (_, c) = report.three_int_h[0];
        assert!((c - 4.56).abs() < 0.05, "constant {c}");
    }

    #[test]
    fn theorem2_identity_and_mass() {
        let report = theorem2_report(21, (2, 3), 0, 1e-12).unwrap();
        assert_eq!(report.identity_points_checked, 20);
        assert!(
            report.identity_max_abs_err < 1e-10,
            "err {}",
            report.identity_max_abs_err
        );
        assert!((report.sum_mu_b3 - report.third_first).abs() < 1e-10);
    }

    #[test]
    fn theorem2_profile_stabilizes_across_sizes() {
        // the scaled exit-measure shape at fixed ray fractions settles
        let small = theorem2_report(120, (1, 1), 1, 1e-12).unwrap();
        let large = theorem2_report(240, (1, 1), 1, 1e-12).unwrap();
        for (&(theta_a, va), &(theta_b, vb)) in small.profile.iter().zip(&large.profile) {
            assert_eq!(theta_a, theta_b);
            let drift = (vb / va - 1.0).abs();
            assert!(
                drift <= 0.15,
                "theta {theta_a}: {va} -> {vb} (drift {drift})"
            );
        }
    }

    #[test]
    fn truncation_profile_is_flat_in_scaled_units() {
        let ctx = ConformalContext::new().with_quad_tol(1e-12);
        let profile = truncation_profile(60, &ctx).unwrap();
        assert!(profile.rows.len() >= 3);
        assert!(
            profile.max_scaled <= 10.0 * profile.median_scaled,
            "max {} vs median {}",
            profile.max_scaled,
            profile.median_scaled
        );
        assert!(truncation_profile(40, &ctx).is_err());
    }

    #[test]
    fn discrete_solution_has_zero_defect() {
        // the defect functional applied to the exact discrete solution
        // vanishes by construction
        let n = 30;
        let domain = TriangleDomain::new(n).unwrap();
        let steps = StepSet::standard();
        let field = harmonic_solve(&domain, &steps, &BoundaryData::P321, 1e-13).unwrap();
        for &(a, b) in domain.states() {
            let mut mean = 0.0;
            for (site, p) in crate::model::neighbors(&domain, (a, b), &steps).unwrap() {
                mean += p * match site {
                    crate::model::Site::Interior(x, y) => {
                        field.values[domain.index_of(x, y).unwrap()]
                    }
                    crate::model::Site::Boundary(side, pt) => {
                        BoundaryData::P321.value(&domain, side, pt)
                    }
                };
            }
            let center = field.values[domain.index_of(a, b).unwrap()];
            assert!((mean - center).abs() < 1e-9, "state ({a}, {b})");
        }
    }

    #[test]
    fn lazy_equivalence() {
        let report = lazy_equivalence_report(&[3, 10, 30], 1e-12).unwrap();
        assert!(report.pass, "{:?}", report.rows);
        for row in &report.rows {
            assert!(row.max_exit_diff <= 1e-10);
            assert!((row.mean_len_ratio - 4.0 / 3.0).abs() < 1e-10);
        }
    }

    #[test]
    fn hold_probability_never_changes_the_exit_law() {
        let n = 15;
        let domain = TriangleDomain::new(n).unwrap();
        let base =
            crate::exact::exit_distribution(&domain, &StepSet::standard(), (2, 2), 1e-13).unwrap();
        for (num, den) in [(1u32, 4u32), (1, 2)] {
            let steps = StepSet::with_hold(num, den).unwrap();
            let mu = crate::exact::exit_distribution(&domain, &steps, (2, 2), 1e-13).unwrap();
            for (a, b) in base.probs.iter().zip(&mu.probs) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn csv_round_trip() {
        let cfg = SweepConfig {
            trials: 1_000,
            seed: 9,
            ..Default::default()
        };
        let records = sweep(
            &[Quantity::P321, Quantity::FirstWins],
            &[10],
            &[(1, 1), (2, 3)],
            &[Method::Exact, Method::Mc, Method::Bm],
            &cfg,
        );
        let mut buf = Vec::new();
        write_csv(&records, &mut buf).unwrap();
        let header = String::from_utf8_lossy(&buf);
        assert!(header.starts_with(
            "N,start_a,start_b,quantity,method,value,stderr,residual,iterations,seconds"
        ));
        let back = read_csv(&buf[..]).unwrap();
        assert_eq!(records, back);
    }

    #[test]
    fn json_round_trip() {
        let cfg = SweepConfig {
            trials: 1_000,
            seed: 9,
            ..Default::default()
        };
        let records = sweep(
            &[Quantity::ThirdFirst],
            &[8],
            &[(1, 1)],
            &[Method::Exact, Method::Asym],
            &cfg,
        );
        let mut buf = Vec::new();
        write_json(&records, &mut buf).unwrap();
        let report = read_json(&buf[..]).unwrap();
        assert_eq!(report.schema_version, SCHEMA_VERSION);
        assert_eq!(report.records, records);
    }
}
