//! Exact linear-algebra route: absorbing-chain solves for harmonic functions,
//! absorption probabilities, exit distributions, and Green functions.
//!
//! The interior-to-interior kernel `Q` of the walk is substochastic (mass
//! leaks to the boundary), so `I - Q` is symmetric positive definite and one
//! conjugate-gradient solve answers each question:
//!
//! * `(I - Q) v = boundary hit weights`  -> absorption functionals,
//! * `(I - Q) g = e_start`               -> the Green column `G_N(start, .)`.

use crate::model::{neighbors, BoundarySide, ModelError, Site, StepSet, TriangleDomain};
use thiserror::Error;

/// Default relative-residual tolerance for the conjugate-gradient solver.
pub const DEFAULT_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExactError {
    #[error("right-hand side has {got} entries, operator dimension is {want}")]
    DimensionMismatch { got: usize, want: usize },
    #[error("tolerance must be positive and finite, got {0}")]
    BadTolerance(f64),
    #[error(
        "conjugate gradient hit the iteration cap: best relative residual {best_residual:.3e} after {iterations} iterations"
    )]
    IterationCap {
        best_residual: f64,
        iterations: usize,
    },
    #[error("layer index {j} out of range: need 1 <= j <= N/2 = {max}")]
    BadLayer { j: i64, max: i64 },
    #[error("custom boundary data has {got} entries, domain has {want} boundary points")]
    BoundaryDataMismatch { got: usize, want: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Sparse symmetric representation of `I - Q` over the interior states.
///
/// Row `i` has the diagonal `1 - hold_prob` and `-prob(step)` for every step
/// leading to another interior state, so at most 7 nonzeros per row.
#[derive(Debug, Clone)]
pub struct InteriorOperator {
    dim: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    vals: Vec<f64>,
    diag: f64,
}

impl InteriorOperator {
    /// Assemble `I - Q` for the given domain and step set.
    pub fn assemble(domain: &TriangleDomain, steps: &StepSet) -> Self {
        let dim = domain.interior_count();
        let mut row_ptr = Vec::with_capacity(dim + 1);
        let mut col_idx = Vec::new();
        let mut vals = Vec::new();
        let diag = 1.0 - steps.hold_prob();
        row_ptr.push(0);
        for i in 0..dim {
            let (a, b) = domain.state_at(i);
            col_idx.push(i);
            vals.push(diag);
            for (k, &(da, db)) in steps.offsets().iter().enumerate() {
                if let Some(j) = domain.index_of(a + da, b + db) {
                    col_idx.push(j);
                    vals.push(-steps.prob(k));
                }
            }
            row_ptr.push(col_idx.len());
        }
        InteriorOperator {
            dim,
            row_ptr,
            col_idx,
            vals,
            diag,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Entry `(i, j)`, zero if absent. O(nnz per row); test helper.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        let lo = self.row_ptr[i];
        let hi = self.row_ptr[i + 1];
        for k in lo..hi {
            if self.col_idx[k] == j {
                return self.vals[k];
            }
        }
        0.0
    }

    pub fn max_nnz_per_row(&self) -> usize {
        (0..self.dim)
            .map(|i| self.row_ptr[i + 1] - self.row_ptr[i])
            .max()
            .unwrap_or(0)
    }

    /// `y = A x`.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.dim);
        debug_assert_eq!(y.len(), self.dim);
        for (i, out) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[k] * x[self.col_idx[k]];
            }
            *out = acc;
        }
    }

    fn residual(&self, x: &[f64], b: &[f64], r: &mut [f64]) {
        self.matvec(x, r);
        for (ri, bi) in r.iter_mut().zip(b) {
            *ri = bi - *ri;
        }
    }
}

/// Result of a linear solve: interior values plus convergence statistics.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub values: Vec<f64>,
    pub relative_residual: f64,
    pub iterations: usize,
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|&x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

/// Jacobi-preconditioned conjugate gradient on `A delta = r`, relative target
/// `target * ||r||`. Returns (delta, iterations); `delta` is best-effort if
/// the cap is hit.
fn cg_pass(a: &InteriorOperator, rhs: &[f64], target: f64, cap: usize) -> (Vec<f64>, usize) {
    let n = a.dim();
    let inv_diag = 1.0 / a.diag;
    let rhs_norm = norm2(rhs);
    let mut x = vec![0.0; n];
    if rhs_norm == 0.0 {
        return (x, 0);
    }
    let stop = target * rhs_norm;
    let mut r = rhs.to_vec();
    let mut z: Vec<f64> = r.iter().map(|&v| v * inv_diag).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    for iter in 0..cap {
        a.matvec(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            // numerically singular direction; stop with current iterate
            return (x, iter);
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if norm2(&r) <= stop {
            return (x, iter + 1);
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag;
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    (x, cap)
}

/// Solve `(I - Q) x = rhs` to the requested relative residual.
///
/// Conjugate gradient with Jacobi preconditioning; the iteration cap per pass
/// is `20 sqrt(dim)`. After the recurrence converges, the true residual is
/// recomputed and the solution polished with further CG passes on the defect
/// while they keep paying off, so the reported residual is the measured one,
/// not the recurrence estimate.
pub fn solve(op: &InteriorOperator, rhs: &[f64], tol: f64) -> Result<SolveReport, ExactError> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(ExactError::BadTolerance(tol));
    }
    if rhs.len() != op.dim() {
        return Err(ExactError::DimensionMismatch {
            got: rhs.len(),
            want: op.dim(),
        });
    }
    let n = op.dim();
    let b_norm = norm2(rhs);
    if b_norm == 0.0 {
        return Ok(SolveReport {
            values: vec![0.0; n],
            relative_residual: 0.0,
            iterations: 0,
        });
    }
    let cap = 20 * (n as f64).sqrt().ceil() as usize + 20;
    let mut x = vec![0.0; n];
    let mut r = rhs.to_vec();
    let mut rel = f64::INFINITY;
    let mut total_iters = 0;
    let mut polish = 0;
    // Each pass runs CG on the measured defect. Once tol is met, up to two
    // polish passes push the true residual toward the attainable floor.
    for pass in 0..6 {
        let prev_rel = rel;
        rel = norm2(&r) / b_norm;
        if rel == 0.0 {
            break;
        }
        if rel <= tol {
            let paying_off = rel < 0.2 * prev_rel;
            if polish >= 2 || !paying_off {
                break;
            }
            polish += 1;
        } else if pass > 0 && rel > 0.5 * prev_rel {
            // stalled above the requested tolerance
            return Err(ExactError::IterationCap {
                best_residual: rel,
                iterations: total_iters,
            });
        }
        let target = if rel <= tol {
            1e-2
        } else {
            (tol / rel).max(1e-14)
        };
        let (delta, iters) = cg_pass(op, &r, target, cap);
        total_iters += iters;
        for i in 0..n {
            x[i] += delta[i];
        }
        op.residual(&x, rhs, &mut r);
    }
    let rel = norm2(&r) / b_norm;
    if rel <= tol {
        Ok(SolveReport {
            values: x,
            relative_residual: rel,
            iterations: total_iters,
        })
    } else {
        Err(ExactError::IterationCap {
            best_residual: rel,
            iterations: total_iters,
        })
    }
}

/// Values assigned to the absorbing boundary points.
#[derive(Debug, Clone, PartialEq)]
pub enum BoundaryData {
    /// 1 on B3, 0 elsewhere: "third player broke first".
    ThirdFirst,
    /// `a/N` at `(a, N-a)` on B3, 0 elsewhere: third broke first, then the
    /// second loses the fair heads-up game.
    P321,
    /// `a/N` on B2 and B3, 0 on B1: player 1 wins the whole game.
    FirstWins,
    /// 1 at a single boundary point, 0 elsewhere.
    PointMass((i64, i64)),
    /// Arbitrary values in `boundary_index` order.
    Custom(Vec<f64>),
}

impl BoundaryData {
    /// Value at a boundary point.
    pub fn value(&self, domain: &TriangleDomain, side: BoundarySide, point: (i64, i64)) -> f64 {
        let n = domain.n() as f64;
        match self {
            BoundaryData::ThirdFirst => {
                if side == BoundarySide::B3 {
                    1.0
                } else {
                    0.0
                }
            }
            BoundaryData::P321 => {
                if side == BoundarySide::B3 {
                    point.0 as f64 / n
                } else {
                    0.0
                }
            }
            BoundaryData::FirstWins => match side {
                BoundarySide::B1 => 0.0,
                // after the exit, player 1 holds `a` of N in a fair heads-up game
                BoundarySide::B2 | BoundarySide::B3 => point.0 as f64 / n,
            },
            BoundaryData::PointMass(target) => {
                if point == *target {
                    1.0
                } else {
                    0.0
                }
            }
            BoundaryData::Custom(values) => values[domain.boundary_index(side, point)],
        }
    }

    fn check(&self, domain: &TriangleDomain) -> Result<(), ExactError> {
        if let BoundaryData::Custom(values) = self {
            if values.len() != domain.boundary_count() {
                return Err(ExactError::BoundaryDataMismatch {
                    got: values.len(),
                    want: domain.boundary_count(),
                });
            }
        }
        Ok(())
    }
}

/// Right-hand side of the Dirichlet problem: expected boundary value
/// collected in one step from each interior state.
pub fn boundary_rhs(
    domain: &TriangleDomain,
    steps: &StepSet,
    data: &BoundaryData,
) -> Result<Vec<f64>, ExactError> {
    data.check(domain)?;
    let mut rhs = vec![0.0; domain.interior_count()];
    for (i, &state) in domain.states().iter().enumerate() {
        for (site, p) in neighbors(domain, state, steps)? {
            if let Site::Boundary(side, point) = site {
                rhs[i] += p * data.value(domain, side, point);
            }
        }
    }
    Ok(rhs)
}

/// Solve the discrete Dirichlet problem: the returned field satisfies
/// `value(x) = sum_steps prob * value(x + step)` with boundary values
/// substituted, at every interior state, to solver tolerance.
pub fn harmonic_solve(
    domain: &TriangleDomain,
    steps: &StepSet,
    data: &BoundaryData,
    tol: f64,
) -> Result<SolveReport, ExactError> {
    let op = InteriorOperator::assemble(domain, steps);
    let rhs = boundary_rhs(domain, steps, data)?;
    solve(&op, &rhs, tol)
}

fn absorption_value(
    n: i64,
    start: (i64, i64),
    data: BoundaryData,
    tol: f64,
) -> Result<f64, ExactError> {
    let cfg = crate::model::GamblerConfig::new(n, start.0, start.1)?;
    let domain = TriangleDomain::new(cfg.n)?;
    let report = harmonic_solve(&domain, &StepSet::standard(), &data, tol)?;
    Ok(report.values[domain.index_of(start.0, start.1).expect("validated start")])
}

/// P(third player eliminated first, then the second): the first player wins
/// after the others go broke in order 3 then 2.
pub fn p321_exact(n: i64, start: (i64, i64), tol: f64) -> Result<f64, ExactError> {
    absorption_value(n, start, BoundaryData::P321, tol)
}

/// P(third player goes broke first).
pub fn third_first_exact(n: i64, start: (i64, i64), tol: f64) -> Result<f64, ExactError> {
    absorption_value(n, start, BoundaryData::ThirdFirst, tol)
}

/// P(first player ends up with all N units).
pub fn first_wins_exact(n: i64, start: (i64, i64), tol: f64) -> Result<f64, ExactError> {
    absorption_value(n, start, BoundaryData::FirstWins, tol)
}

/// One column of the Green function: `g(z) = G_N(start, z)` = expected visits
/// to `z` before absorption, starting from `start`. `Q` is symmetric, so this
/// is simultaneously `G_N(., start)`.
#[derive(Debug, Clone)]
pub struct GreenColumn {
    pub start: (i64, i64),
    pub g: Vec<f64>,
    pub relative_residual: f64,
    pub iterations: usize,
}

impl GreenColumn {
    /// Total expected visits, i.e. the expected exit time from `start`.
    pub fn total_mass(&self) -> f64 {
        self.g.iter().sum()
    }
}

/// Solve `(I - Q) g = e_start`.
pub fn green_column(
    domain: &TriangleDomain,
    steps: &StepSet,
    start: (i64, i64),
    tol: f64,
) -> Result<GreenColumn, ExactError> {
    let idx = domain
        .index_of(start.0, start.1)
        .ok_or(ModelError::NotInterior(start.0, start.1))?;
    let op = InteriorOperator::assemble(domain, steps);
    let mut rhs = vec![0.0; domain.interior_count()];
    rhs[idx] = 1.0;
    let report = solve(&op, &rhs, tol)?;
    Ok(GreenColumn {
        start,
        g: report.values,
        relative_residual: report.relative_residual,
        iterations: report.iterations,
    })
}

/// The walk's exit law: probability of being absorbed at each boundary point.
#[derive(Debug, Clone)]
pub struct ExitDistribution {
    pub n: i64,
    pub probs: Vec<f64>,
}

impl ExitDistribution {
    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    pub fn prob(&self, domain: &TriangleDomain, side: BoundarySide, point: (i64, i64)) -> f64 {
        self.probs[domain.boundary_index(side, point)]
    }

    /// Total mass on one edge.
    pub fn side_mass(&self, domain: &TriangleDomain, side: BoundarySide) -> f64 {
        domain
            .boundary_points()
            .iter()
            .filter(|&&(s, _)| s == side)
            .map(|&(s, pt)| self.prob(domain, s, pt))
            .sum()
    }
}

/// Exit distribution via the Green column:
/// `mu(y) = sum_z G(start, z) prob(z -> y)`.
pub fn exit_distribution(
    domain: &TriangleDomain,
    steps: &StepSet,
    start: (i64, i64),
    tol: f64,
) -> Result<ExitDistribution, ExactError> {
    let green = green_column(domain, steps, start, tol)?;
    Ok(exit_distribution_from_green(domain, steps, &green))
}

/// Exit distribution from an already computed Green column.
pub fn exit_distribution_from_green(
    domain: &TriangleDomain,
    steps: &StepSet,
    green: &GreenColumn,
) -> ExitDistribution {
    let mut probs = vec![0.0; domain.boundary_count()];
    for (i, &(a, b)) in domain.states().iter().enumerate() {
        let g = green.g[i];
        if g == 0.0 {
            continue;
        }
        for (k, &(da, db)) in steps.offsets().iter().enumerate() {
            if let Some(Site::Boundary(side, point)) = domain.classify(a + da, b + db) {
                probs[domain.boundary_index(side, point)] += g * steps.prob(k);
            }
        }
    }
    ExitDistribution {
        n: domain.n(),
        probs,
    }
}

/// Green mass of lattice layer `a + b = N - j`, restricted to the central
/// sub-cone `min(a, b) >= rho (a + b)`. `rho = 0` sums the whole layer.
pub fn layer_mass(
    domain: &TriangleDomain,
    green: &GreenColumn,
    j: i64,
    rho: f64,
) -> Result<f64, ExactError> {
    let n = domain.n();
    if j < 1 || 2 * j > n {
        return Err(ExactError::BadLayer { j, max: n / 2 });
    }
    let k = n - j;
    let mut mass = 0.0;
    for (i, &(a, b)) in domain.states().iter().enumerate() {
        if a + b == k && (a.min(b) as f64) >= rho * (a + b) as f64 {
            mass += green.g[i];
        }
    }
    Ok(mass)
}

/// Default central sub-cone parameter for layer masses.
pub const DEFAULT_RHO: f64 = 0.2;

/// Quantity selector shared by the exact, Monte Carlo, and asymptotic routes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Quantity {
    ThirdFirst,
    P321,
    FirstWins,
}

impl Quantity {
    pub fn boundary_data(self) -> BoundaryData {
        match self {
            Quantity::ThirdFirst => BoundaryData::ThirdFirst,
            Quantity::P321 => BoundaryData::P321,
            Quantity::FirstWins => BoundaryData::FirstWins,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Quantity::ThirdFirst => "third-first",
            Quantity::P321 => "p321",
            Quantity::FirstWins => "first-wins",
        }
    }
}

impl std::str::FromStr for Quantity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "third-first" | "third_first" => Ok(Quantity::ThirdFirst),
            "p321" => Ok(Quantity::P321),
            "first-wins" | "first_wins" => Ok(Quantity::FirstWins),
            other => Err(format!(
                "unknown quantity '{other}' (expected third-first, p321 or first-wins)"
            )),
        }
    }
}

/// Exact value of a quantity from one Dirichlet solve.
pub fn exact_value(q: Quantity, n: i64, start: (i64, i64), tol: f64) -> Result<f64, ExactError> {
    absorption_value(n, start, q.boundary_data(), tol)
}
