//! Brute-force moment oracle for the transformed step `X = T Y`, plus the
//! Taylor-cancellation check that makes the sixth derivative the first one
//! that matters in the diffusion error.
//!
//! With `Y` uniform on the six offsets, `X1 = (2 Y1 + Y2) / sqrt(2)` and
//! `X2 = sqrt(6) Y2 / 2`, every joint moment is an exact integer sum scaled
//! by a power of 2 and 6, so the table can be built without rounding.

use crate::model::STANDARD_OFFSETS;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MomentsError {
    #[error("joint_moment supports total degree up to 8, got {0}")]
    DegreeTooLarge(u32),
    #[error("test polynomial has degree {0}, cancellation holds only up to 5")]
    PolyDegreeTooLarge(u32),
    #[error("test polynomial is not harmonic: Laplacian coefficient {coeff} at x^{i} y^{j}")]
    NotHarmonic { i: u32, j: u32, coeff: f64 },
}

/// `E[X1^i X2^j]` by direct averaging over the six outcomes.
pub fn joint_moment(i: u32, j: u32) -> Result<f64, MomentsError> {
    if i + j > 8 {
        return Err(MomentsError::DegreeTooLarge(i + j));
    }
    let mut acc = 0.0;
    for &(y1, y2) in &STANDARD_OFFSETS {
        let x1 = std::f64::consts::SQRT_2 * y1 as f64 + std::f64::consts::SQRT_2 / 2.0 * y2 as f64;
        let x2 = crate::model::SQRT_6 / 2.0 * y2 as f64;
        acc += x1.powi(i as i32) * x2.powi(j as i32);
    }
    Ok(acc / 6.0)
}

/// Exact moments `E[X1^i X2^j]` for `i + j <= 6`.
///
/// Entries are assembled from the integer sums `M = sum (2 y1 + y2)^i y2^j`
/// and the scaling `2^{-(i + 2j)/2} 6^{j/2}`; every nonzero entry has both
/// exponents even, so the scale is an exact dyadic times a power of 6.
#[derive(Debug, Clone)]
pub struct MomentTable {
    entries: Vec<((u32, u32), f64)>,
}

impl MomentTable {
    pub fn build() -> Self {
        let mut entries = Vec::new();
        for total in 0..=6u32 {
            for i in 0..=total {
                let j = total - i;
                entries.push(((i, j), Self::exact_moment(i, j)));
            }
        }
        MomentTable { entries }
    }

    /// Exact value of `E[X1^i X2^j]`.
    pub fn exact_moment(i: u32, j: u32) -> f64 {
        // integer core: sum over outcomes of (2 y1 + y2)^i y2^j
        let m: i128 = STANDARD_OFFSETS
            .iter()
            .map(|&(y1, y2)| {
                let base = (2 * y1 + y2) as i128;
                base.pow(i) * (y2 as i128).pow(j)
            })
            .sum();
        if m == 0 {
            return 0.0;
        }
        // scale = 2^{-(i + 2 j)/2} * 6^{j/2}; nonzero sums only occur with
        // i and j both even, which keeps the exponents integral
        debug_assert!(
            i.is_multiple_of(2) && j.is_multiple_of(2),
            "odd-parity moment must vanish"
        );
        let scale = 6f64.powi((j / 2) as i32) / 2f64.powi(((i + 2 * j) / 2) as i32);
        m as f64 / 6.0 * scale
    }

    pub fn get(&self, i: u32, j: u32) -> Option<f64> {
        self.entries
            .iter()
            .find(|&&(k, _)| k == (i, j))
            .map(|&(_, v)| v)
    }

    pub fn entries(&self) -> &[((u32, u32), f64)] {
        &self.entries
    }
}

/// One verified identity in the moment report.
#[derive(Debug, Clone, serde::Serialize)]
pub struct MomentCheck {
    pub name: &'static str,
    pub expected: f64,
    pub got: f64,
    pub pass: bool,
}

/// Every moment identity the step law satisfies, checked to 1e-14.
#[derive(Debug, Clone, serde::Serialize)]
pub struct MomentReport {
    pub checks: Vec<MomentCheck>,
}

impl MomentReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

fn y_moment(i: u32, j: u32) -> f64 {
    let m: i128 = STANDARD_OFFSETS
        .iter()
        .map(|&(y1, y2)| (y1 as i128).pow(i) * (y2 as i128).pow(j))
        .sum();
    m as f64 / 6.0
}

/// Check all the moment identities of the step law: zero mean, unit
/// covariance, the fourth-order values, vanishing odd moments, and the
/// underlying `Y`-moment identities.
pub fn verify_moment_table() -> MomentReport {
    const TOL: f64 = 1e-14;
    let mut checks = Vec::new();
    let mut push = |name: &'static str, expected: f64, got: f64| {
        checks.push(MomentCheck {
            name,
            expected,
            got,
            pass: (expected - got).abs() <= TOL,
        });
    };

    push("E[X1] = 0", 0.0, joint_moment(1, 0).unwrap());
    push("E[X2] = 0", 0.0, joint_moment(0, 1).unwrap());
    push("E[X1^2] = 1", 1.0, joint_moment(2, 0).unwrap());
    push("E[X2^2] = 1", 1.0, joint_moment(0, 2).unwrap());
    push("E[X1 X2] = 0", 0.0, joint_moment(1, 1).unwrap());
    push("E[X1^4] = 3/2", 1.5, joint_moment(4, 0).unwrap());
    push("E[X2^4] = 3/2", 1.5, joint_moment(0, 4).unwrap());
    push("E[X1^2 X2^2] = 1/2", 0.5, joint_moment(2, 2).unwrap());
    push("E[X1^3 X2] = 0", 0.0, joint_moment(3, 1).unwrap());
    push("E[X1 X2^3] = 0", 0.0, joint_moment(1, 3).unwrap());
    push("E[X1^2 X2] = 0", 0.0, joint_moment(2, 1).unwrap());
    push("E[X1 X2^2] = 0", 0.0, joint_moment(1, 2).unwrap());
    // all odd total degrees vanish (negation symmetry)
    let mut worst_odd: f64 = 0.0;
    for total in [1u32, 3, 5, 7] {
        for i in 0..=total {
            worst_odd = worst_odd.max(joint_moment(i, total - i).unwrap().abs());
        }
    }
    push("all odd total degrees vanish", 0.0, worst_odd);
    // Y-moment identities behind the table
    push("E[Y1 Y2] = -1/3", -1.0 / 3.0, y_moment(1, 1));
    push("E[Y1^3 Y2] = -1/3", -1.0 / 3.0, y_moment(3, 1));
    push("E[Y1^3 Y2^3] = -1/3", -1.0 / 3.0, y_moment(3, 3));
    push("E[Y1^2 Y2^2] = 1/3", 1.0 / 3.0, y_moment(2, 2));
    push("E[Y1^4 Y2^2] = 1/3", 1.0 / 3.0, y_moment(4, 2));
    push("E[Y1^2] = 2/3", 2.0 / 3.0, y_moment(2, 0));
    push("E[Y2^4] = 2/3", 2.0 / 3.0, y_moment(0, 4));
    push("E[Y1^2 Y2] = 0", 0.0, y_moment(2, 1));

    MomentReport { checks }
}

/// A polynomial in two variables, stored as monomial coefficients.
#[derive(Debug, Clone, Default)]
pub struct Poly2 {
    /// `(i, j, c)` terms: `c * x1^i * x2^j`.
    pub terms: Vec<(u32, u32, f64)>,
}

impl Poly2 {
    pub fn new(terms: Vec<(u32, u32, f64)>) -> Self {
        Poly2 { terms }
    }

    pub fn degree(&self) -> u32 {
        self.terms
            .iter()
            .filter(|&&(_, _, c)| c != 0.0)
            .map(|&(i, j, _)| i + j)
            .max()
            .unwrap_or(0)
    }

    pub fn eval(&self, x1: f64, x2: f64) -> f64 {
        self.terms
            .iter()
            .map(|&(i, j, c)| c * x1.powi(i as i32) * x2.powi(j as i32))
            .sum()
    }

    /// Monomial coefficients of the Laplacian.
    pub fn laplacian(&self) -> Vec<(u32, u32, f64)> {
        let mut out: Vec<(u32, u32, f64)> = Vec::new();
        let mut add = |i: u32, j: u32, c: f64| {
            if c == 0.0 {
                return;
            }
            if let Some(entry) = out.iter_mut().find(|e| e.0 == i && e.1 == j) {
                entry.2 += c;
            } else {
                out.push((i, j, c));
            }
        };
        for &(i, j, c) in &self.terms {
            if i >= 2 {
                add(i - 2, j, c * (i * (i - 1)) as f64);
            }
            if j >= 2 {
                add(i, j - 2, c * (j * (j - 1)) as f64);
            }
        }
        out.retain(|&(_, _, c)| c != 0.0);
        out
    }
}

/// For a harmonic polynomial of degree at most 5, `E[p(x + X)] - p(x)`
/// vanishes identically: the second-order term is the Laplacian, the odd
/// terms die by symmetry, and the fourth-order term collapses to
/// `(3/2) p_{x^4} + 3 p_{x^2 y^2} + (3/2) p_{y^4} = (3/2) Delta(Delta p)`.
///
/// Checks the cancellation at 20 deterministic sample points and returns the
/// largest residual observed.
pub fn fourth_order_cancellation(poly: &Poly2) -> Result<f64, MomentsError> {
    let deg = poly.degree();
    if deg > 5 {
        return Err(MomentsError::PolyDegreeTooLarge(deg));
    }
    // coefficient arithmetic on small integers is exact in f64
    if let Some(&(i, j, coeff)) = poly.laplacian().first() {
        return Err(MomentsError::NotHarmonic { i, j, coeff });
    }
    let mut worst: f64 = 0.0;
    // fixed low-discrepancy point set in [-3, 3]^2
    for k in 0..20 {
        let t = k as f64;
        let x1 = -3.0 + 6.0 * ((t * 0.754_877_666_246_693) % 1.0);
        let x2 = -3.0 + 6.0 * ((t * 0.569_840_290_998_053_1) % 1.0);
        let mut mean = 0.0;
        for &(y1, y2) in &STANDARD_OFFSETS {
            let dx1 =
                std::f64::consts::SQRT_2 * y1 as f64 + std::f64::consts::SQRT_2 / 2.0 * y2 as f64;
            let dx2 = crate::model::SQRT_6 / 2.0 * y2 as f64;
            mean += poly.eval(x1 + dx1, x2 + dx2);
        }
        mean /= 6.0;
        worst = worst.max((mean - poly.eval(x1, x2)).abs());
    }
    Ok(worst)
}
