//! Random-walk model for the three-player gambler's ruin.
//!
//! The state `(a, b)` tracks the capitals of players 1 and 2; player 3 holds
//! `N - a - b`. Each round transfers one unit between a uniformly chosen pair,
//! so the walk jumps by one of six offsets with equal probability. The game
//! state space is the triangle `{a >= 1, b >= 1, a + b <= N - 1}` and the walk
//! is absorbed on the three boundary edges (one per eliminated player).
//!
//! Capitals are kept in integer coordinates; the wedge picture (the linear
//! image under `T` where the walk has identity covariance) is a derived view.

use thiserror::Error;

/// sqrt(6), the scale of the wedge's second coordinate.
pub const SQRT_6: f64 = 2.449489742783178;

/// Wedge distance between consecutive lattice layers `a + b = k` and `k + 1`.
pub const LAYER_GAP: f64 = SQRT_6 / 2.0;

/// The six capital-transfer offsets of the standard walk.
pub const STANDARD_OFFSETS: [(i64, i64); 6] = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, -1), (-1, 1)];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("total capital must be at least 3, got {0}")]
    CapitalTooSmall(i64),
    #[error("start ({0}, {1}) is not an interior state: need a >= 1, b >= 1, a + b <= N - 1")]
    NotInterior(i64, i64),
    #[error("hold probability {num}/{den} must satisfy 0 <= num < den")]
    BadHoldProbability { num: u32, den: u32 },
}

/// Jump law of the walk: six symmetric offsets plus an optional holding
/// probability. Probabilities are stored as integer weights over a common
/// denominator so that they sum to one exactly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepSet {
    offsets: Vec<(i64, i64)>,
    weights: Vec<u32>,
    hold_weight: u32,
    total_weight: u32,
}

impl StepSet {
    /// The standard walk: each of the six offsets with probability 1/6.
    pub fn standard() -> Self {
        Self::with_hold(0, 1).expect("0/1 is a valid hold probability")
    }

    /// The lazy variant arising from three non-colliding walks:
    /// holds with probability 1/4, each offset with probability 1/8.
    pub fn lazy() -> Self {
        Self::with_hold(1, 4).expect("1/4 is a valid hold probability")
    }

    /// Walk that holds with probability `num/den` and splits the rest
    /// uniformly over the six offsets.
    pub fn with_hold(num: u32, den: u32) -> Result<Self, ModelError> {
        if den == 0 || num >= den {
            return Err(ModelError::BadHoldProbability { num, den });
        }
        // Common denominator 6*den keeps every probability an exact ratio.
        let step_weight = den - num;
        Ok(StepSet {
            offsets: STANDARD_OFFSETS.to_vec(),
            weights: vec![step_weight; 6],
            hold_weight: 6 * num,
            total_weight: 6 * den,
        })
    }

    pub fn offsets(&self) -> &[(i64, i64)] {
        &self.offsets
    }

    pub fn prob(&self, i: usize) -> f64 {
        f64::from(self.weights[i]) / f64::from(self.total_weight)
    }

    pub fn hold_prob(&self) -> f64 {
        f64::from(self.hold_weight) / f64::from(self.total_weight)
    }

    /// Integer weight data `(weights, hold_weight, total_weight)`, for exact
    /// rational checks.
    pub fn weight_parts(&self) -> (&[u32], u32, u32) {
        (&self.weights, self.hold_weight, self.total_weight)
    }

    /// Offsets paired with their probabilities (holding not included).
    pub fn steps(&self) -> impl Iterator<Item = ((i64, i64), f64)> + '_ {
        self.offsets
            .iter()
            .enumerate()
            .map(|(i, &off)| (off, self.prob(i)))
    }

    /// Exact invariant check: weights sum to the total and the offset set is
    /// closed under negation with equal weights.
    pub fn validate(&self) -> bool {
        let sum: u64 = self.weights.iter().map(|&w| u64::from(w)).sum();
        if sum + u64::from(self.hold_weight) != u64::from(self.total_weight) {
            return false;
        }
        if self.weights.contains(&0) {
            return false;
        }
        self.offsets.iter().enumerate().all(|(i, &(dx, dy))| {
            self.offsets
                .iter()
                .position(|&o| o == (-dx, -dy))
                .map(|j| self.weights[i] == self.weights[j])
                .unwrap_or(false)
        })
    }
}

/// A valid game start: total capital `N` and the capitals of players 1 and 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GamblerConfig {
    pub n: i64,
    pub start: (i64, i64),
}

impl GamblerConfig {
    pub fn new(n: i64, a: i64, b: i64) -> Result<Self, ModelError> {
        if n < 3 {
            return Err(ModelError::CapitalTooSmall(n));
        }
        if a < 1 || b < 1 || a + b > n - 1 {
            return Err(ModelError::NotInterior(a, b));
        }
        Ok(GamblerConfig { n, start: (a, b) })
    }

    /// Implied capital of the third player.
    pub fn third_capital(&self) -> i64 {
        self.n - self.start.0 - self.start.1
    }
}

/// Which player went broke when the walk hits a boundary point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundarySide {
    /// `a = 0`: player 1 broke.
    B1,
    /// `b = 0`: player 2 broke.
    B2,
    /// `a + b = N`: player 3 broke.
    B3,
}

/// Where one step from an interior state can land.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Site {
    Interior(i64, i64),
    Boundary(BoundarySide, (i64, i64)),
}

/// Interior state enumeration of the truncated-cone chain at total capital
/// `N`, with a dense index and boundary classification.
///
/// Interior states are ordered by `a`, then `b`, so both directions of the
/// state <-> index bijection are O(1).
#[derive(Debug, Clone)]
pub struct TriangleDomain {
    n: i64,
    states: Vec<(i64, i64)>,
    row_start: Vec<usize>,
}

impl TriangleDomain {
    pub fn new(n: i64) -> Result<Self, ModelError> {
        if n < 3 {
            return Err(ModelError::CapitalTooSmall(n));
        }
        let mut states = Vec::with_capacity(((n - 1) * (n - 2) / 2) as usize);
        let mut row_start = Vec::with_capacity((n - 2) as usize);
        for a in 1..=(n - 2) {
            row_start.push(states.len());
            for b in 1..=(n - 1 - a) {
                states.push((a, b));
            }
        }
        Ok(TriangleDomain {
            n,
            states,
            row_start,
        })
    }

    pub fn n(&self) -> i64 {
        self.n
    }

    pub fn interior_count(&self) -> usize {
        self.states.len()
    }

    pub fn is_interior(&self, a: i64, b: i64) -> bool {
        a >= 1 && b >= 1 && a + b < self.n
    }

    pub fn index_of(&self, a: i64, b: i64) -> Option<usize> {
        if !self.is_interior(a, b) {
            return None;
        }
        Some(self.row_start[(a - 1) as usize] + (b - 1) as usize)
    }

    pub fn state_at(&self, index: usize) -> (i64, i64) {
        self.states[index]
    }

    pub fn states(&self) -> &[(i64, i64)] {
        &self.states
    }

    /// Classify a lattice point reachable in one step from an interior state.
    /// Returns `None` for points that are neither interior nor on one of the
    /// three open boundary edges (the vertices, or points further out).
    pub fn classify(&self, a: i64, b: i64) -> Option<Site> {
        let n = self.n;
        if self.is_interior(a, b) {
            Some(Site::Interior(a, b))
        } else if a == 0 && (1..=n - 1).contains(&b) {
            Some(Site::Boundary(BoundarySide::B1, (a, b)))
        } else if b == 0 && (1..=n - 1).contains(&a) {
            Some(Site::Boundary(BoundarySide::B2, (a, b)))
        } else if a + b == n && (1..=n - 1).contains(&a) {
            Some(Site::Boundary(BoundarySide::B3, (a, b)))
        } else {
            None
        }
    }

    /// Number of absorbing boundary points: `3 (N - 1)`.
    pub fn boundary_count(&self) -> usize {
        (3 * (self.n - 1)) as usize
    }

    /// Dense index of a boundary point: B1 first, then B2, then B3, each
    /// ordered by its free coordinate.
    pub fn boundary_index(&self, side: BoundarySide, point: (i64, i64)) -> usize {
        let n = self.n;
        let m = (n - 1) as usize;
        match side {
            BoundarySide::B1 => (point.1 - 1) as usize,
            BoundarySide::B2 => m + (point.0 - 1) as usize,
            BoundarySide::B3 => 2 * m + (point.0 - 1) as usize,
        }
    }

    /// All boundary points with their side, in `boundary_index` order.
    pub fn boundary_points(&self) -> Vec<(BoundarySide, (i64, i64))> {
        let n = self.n;
        let mut points = Vec::with_capacity(self.boundary_count());
        for b in 1..=n - 1 {
            points.push((BoundarySide::B1, (0, b)));
        }
        for a in 1..=n - 1 {
            points.push((BoundarySide::B2, (a, 0)));
        }
        for a in 1..=n - 1 {
            points.push((BoundarySide::B3, (a, n - a)));
        }
        points
    }
}

/// All points reachable in one step from `state`, with their probabilities.
/// Includes the self-loop when the step set holds with positive probability.
pub fn neighbors(
    domain: &TriangleDomain,
    state: (i64, i64),
    steps: &StepSet,
) -> Result<Vec<(Site, f64)>, ModelError> {
    let (a, b) = state;
    if !domain.is_interior(a, b) {
        return Err(ModelError::NotInterior(a, b));
    }
    let mut out = Vec::with_capacity(7);
    if steps.hold_prob() > 0.0 {
        out.push((Site::Interior(a, b), steps.hold_prob()));
    }
    for (i, &(da, db)) in steps.offsets().iter().enumerate() {
        let site = domain
            .classify(a + da, b + db)
            .expect("one step from an interior state stays in the closed triangle");
        out.push((site, steps.prob(i)));
    }
    Ok(out)
}

/// Parameters of the pi/3-wedge picture: the linear transform `T` that gives
/// the walk identity covariance, the homogeneity exponent of the wedge's
/// harmonic function, and the lattice layer spacing.
#[derive(Debug, Clone, Copy)]
pub struct WedgeParams {
    pub t: [[f64; 2]; 2],
    pub p: u32,
    pub d: u32,
    pub layer_gap: f64,
}

impl Default for WedgeParams {
    fn default() -> Self {
        WedgeParams {
            t: [
                [std::f64::consts::SQRT_2, std::f64::consts::SQRT_2 / 2.0],
                [0.0, SQRT_6 / 2.0],
            ],
            p: 3,
            d: 2,
            layer_gap: LAYER_GAP,
        }
    }
}

impl WedgeParams {
    /// Wedge distance from lattice layer `a + b = k` to the far edge at
    /// total capital `n`.
    pub fn layer_distance(&self, n: i64, k: i64) -> f64 {
        self.layer_gap * (n - k) as f64
    }
}

/// Map capitals `(a, b)` to wedge coordinates `T (a, b)`.
pub fn to_wedge(a: f64, b: f64) -> (f64, f64) {
    (
        std::f64::consts::SQRT_2 * a + std::f64::consts::SQRT_2 / 2.0 * b,
        SQRT_6 / 2.0 * b,
    )
}

/// The discrete harmonic function in original coordinates:
/// `V(A, B) = 3 sqrt(6) A B (A + B)`. Vanishes on B1 and B2 and equals
/// `u_wedge` of the wedge image of `(A, B)`.
pub fn v_original(a: f64, b: f64) -> f64 {
    3.0 * SQRT_6 * a * b * (a + b)
}

/// Integer core of `v_original`: `A B (A + B)`, exact for harmonicity checks.
pub fn v_core(a: i64, b: i64) -> i128 {
    let (a, b) = (a as i128, b as i128);
    a * b * (a + b)
}

/// The positive harmonic function of the pi/3 wedge: `3 x1^2 x2 - x2^3`.
pub fn u_wedge(x1: f64, x2: f64) -> f64 {
    3.0 * x1 * x1 * x2 - x2 * x2 * x2
}
