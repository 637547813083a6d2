//! Exact-arithmetic oracle for the smallest chains.
//!
//! The absorbing system is rebuilt here from scratch -- its own state
//! enumeration, one-step classification, and boundary weights -- and solved
//! by fraction-exact Gaussian elimination over big rationals. Nothing is
//! shared with the library's assembly or solver, so agreement is a real
//! two-route check, and the frozen hand-derived fractions pin both.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use ruinlab::exact::{self, exit_distribution, green_column};
use ruinlab::model::{StepSet, TriangleDomain};

type Q = BigRational;

fn q(num: i64, den: i64) -> Q {
    Q::new(BigInt::from(num), BigInt::from(den))
}

const STEPS: [(i64, i64); 6] = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, -1), (-1, 1)];

struct RationalChain {
    n: i64,
    states: Vec<(i64, i64)>,
}

/// Which player the exit point eliminates.
#[derive(Clone, Copy, PartialEq)]
enum Exit {
    First,
    Second,
    Third,
}

impl RationalChain {
    fn new(n: i64) -> Self {
        let mut states = Vec::new();
        for a in 1..n {
            for b in 1..n {
                if a + b < n {
                    states.push((a, b));
                }
            }
        }
        RationalChain { n, states }
    }

    fn index(&self, a: i64, b: i64) -> Option<usize> {
        self.states.iter().position(|&s| s == (a, b))
    }

    fn classify_exit(&self, x: i64, y: i64) -> Option<Exit> {
        if x >= 1 && y >= 1 && x + y < self.n {
            None
        } else if x == 0 {
            Some(Exit::First)
        } else if y == 0 {
            Some(Exit::Second)
        } else {
            assert_eq!(x + y, self.n, "one step lands on an edge, never beyond");
            Some(Exit::Third)
        }
    }

    /// Solve `(I - Q) v = rhs` by exact Gaussian elimination.
    fn eliminate(&self, mut a: Vec<Vec<Q>>, mut rhs: Vec<Q>) -> Vec<Q> {
        let m = rhs.len();
        for col in 0..m {
            let pivot = (col..m)
                .find(|&r| !a[r][col].is_zero())
                .expect("positive definite system has a pivot");
            a.swap(col, pivot);
            rhs.swap(col, pivot);
            let p = a[col][col].clone();
            for r in 0..m {
                if r == col || a[r][col].is_zero() {
                    continue;
                }
                let factor = &a[r][col] / &p;
                let pivot_row = a[col][col..].to_vec();
                for (c, pv) in (col..).zip(pivot_row) {
                    let sub = &factor * pv;
                    a[r][c] = &a[r][c] - sub;
                }
                let sub = &factor * &rhs[col];
                rhs[r] = &rhs[r] - sub;
            }
        }
        (0..m).map(|r| &rhs[r] / &a[r][r]).collect()
    }

    fn system(&self) -> Vec<Vec<Q>> {
        let m = self.states.len();
        let mut a = vec![vec![Q::zero(); m]; m];
        for (i, &(x, y)) in self.states.iter().enumerate() {
            a[i][i] = Q::one();
            for (dx, dy) in STEPS {
                if let Some(j) = self.index(x + dx, y + dy) {
                    let diff = &a[i][j] - q(1, 6);
                    a[i][j] = diff;
                }
            }
        }
        a
    }

    /// Absorption functional with a rational weight per boundary point.
    fn absorption(&self, weight: impl Fn(Exit, i64, i64) -> Q) -> Vec<Q> {
        let mut rhs = vec![Q::zero(); self.states.len()];
        for (i, &(x, y)) in self.states.iter().enumerate() {
            for (dx, dy) in STEPS {
                let (nx, ny) = (x + dx, y + dy);
                if let Some(exit) = self.classify_exit(nx, ny) {
                    let add = q(1, 6) * weight(exit, nx, ny);
                    rhs[i] = &rhs[i] + add;
                }
            }
        }
        self.eliminate(self.system(), rhs)
    }

    fn green(&self, start: (i64, i64)) -> Vec<Q> {
        let mut rhs = vec![Q::zero(); self.states.len()];
        rhs[self.index(start.0, start.1).unwrap()] = Q::one();
        self.eliminate(self.system(), rhs)
    }

    fn p321_weight(&self) -> impl Fn(Exit, i64, i64) -> Q + '_ {
        let n = self.n;
        move |exit, x, _| {
            if exit == Exit::Third {
                q(x, n)
            } else {
                Q::zero()
            }
        }
    }

    fn third_first_weight(&self) -> impl Fn(Exit, i64, i64) -> Q + '_ {
        move |exit, _, _| {
            if exit == Exit::Third {
                Q::one()
            } else {
                Q::zero()
            }
        }
    }

    fn first_wins_weight(&self) -> impl Fn(Exit, i64, i64) -> Q + '_ {
        let n = self.n;
        move |exit, x, _| match exit {
            Exit::First => Q::zero(),
            Exit::Second | Exit::Third => q(x, n),
        }
    }
}

fn close(a: f64, b: &Q, tol: f64) -> bool {
    (a - b.to_f64().unwrap()).abs() <= tol
}

#[test]
fn smallest_triangle_fractions() {
    let chain = RationalChain::new(3);
    assert_eq!(chain.states.len(), 1);
    let p321 = chain.absorption(chain.p321_weight());
    assert_eq!(p321[0], q(1, 6));
    let third = chain.absorption(chain.third_first_weight());
    assert_eq!(third[0], q(1, 3));
    let wins = chain.absorption(chain.first_wins_weight());
    assert_eq!(wins[0], q(1, 3));
    let g = chain.green((1, 1));
    assert_eq!(g[0], Q::one());
}

#[test]
fn four_capital_fractions_and_library_agreement() {
    let chain = RationalChain::new(4);
    assert_eq!(chain.states.len(), 3);
    let i11 = chain.index(1, 1).unwrap();

    // hand-derived by eliminating the 3x3 system
    let p321 = chain.absorption(chain.p321_weight());
    assert_eq!(p321[i11], q(1, 14));
    let wins = chain.absorption(chain.first_wins_weight());
    assert_eq!(wins[chain.index(2, 1).unwrap()], q(1, 2));
    let g = chain.green((1, 1));
    assert_eq!(g[i11], q(15, 14));
    assert_eq!(g[chain.index(1, 2).unwrap()], q(3, 14));
    assert_eq!(g[chain.index(2, 1).unwrap()], q(3, 14));

    // library route matches the fractions
    assert!(close(
        exact::p321_exact(4, (1, 1), 1e-13).unwrap(),
        &p321[i11],
        1e-14
    ));
    assert!(close(
        exact::first_wins_exact(4, (2, 1), 1e-13).unwrap(),
        &wins[chain.index(2, 1).unwrap()],
        1e-14
    ));
    let domain = TriangleDomain::new(4).unwrap();
    let lib_green = green_column(&domain, &StepSet::standard(), (1, 1), 1e-13).unwrap();
    for (i, &(a, b)) in chain.states.iter().enumerate() {
        let lib = lib_green.g[domain.index_of(a, b).unwrap()];
        assert!(close(lib, &g[i], 1e-13), "green at ({a}, {b})");
    }
}

#[test]
fn library_matches_the_oracle_on_small_chains() {
    for n in [5i64, 6, 7] {
        let chain = RationalChain::new(n);
        let p321 = chain.absorption(chain.p321_weight());
        let third = chain.absorption(chain.third_first_weight());
        let wins = chain.absorption(chain.first_wins_weight());
        for (i, &(a, b)) in chain.states.iter().enumerate() {
            assert!(
                close(
                    exact::p321_exact(n, (a, b), 1e-13).unwrap(),
                    &p321[i],
                    1e-13
                ),
                "p321 N={n} ({a},{b})"
            );
            assert!(
                close(
                    exact::third_first_exact(n, (a, b), 1e-13).unwrap(),
                    &third[i],
                    1e-13
                ),
                "third-first N={n} ({a},{b})"
            );
            assert!(
                close(
                    exact::first_wins_exact(n, (a, b), 1e-13).unwrap(),
                    &wins[i],
                    1e-13
                ),
                "first-wins N={n} ({a},{b})"
            );
            // winning share of a fair game is the capital share
            assert_eq!(wins[i], q(a, n));
        }
    }
}

#[test]
fn exit_distribution_matches_rational_sums() {
    let n = 6;
    let chain = RationalChain::new(n);
    let start = (2, 2);
    let g = chain.green(start);
    let domain = TriangleDomain::new(n).unwrap();
    let mu = exit_distribution(&domain, &StepSet::standard(), start, 1e-13).unwrap();
    let mut total = Q::zero();
    for (side, point) in domain.boundary_points() {
        // oracle mass: sum over interior preimages of (1/6) g(z)
        let mut mass = Q::zero();
        for (i, &(x, y)) in chain.states.iter().enumerate() {
            for (dx, dy) in STEPS {
                if (x + dx, y + dy) == point {
                    let add = q(1, 6) * &g[i];
                    mass = &mass + add;
                }
            }
        }
        assert!(
            close(mu.prob(&domain, side, point), &mass, 1e-13),
            "exit mass at {point:?}"
        );
        total = &total + &mass;
    }
    assert!((&total - Q::one()).abs() < q(1, 1_000_000_000));
}
