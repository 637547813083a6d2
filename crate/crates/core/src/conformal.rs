//! Brownian-motion Dirichlet solver on the equilateral triangle, via the
//! conformal map to the upper half plane and the Poisson kernel.
//!
//! The unit triangle has vertices `0`, `1`, `e^{i pi/3}`. The map
//!
//! ```text
//! w(z) = 1/2 + 27 / (2 B^3) * wp'(conj(z) e^{-i pi/3})
//! ```
//!
//! with `B = B(1/3, 1/3)` and `wp'` the derivative of the Weierstrass
//! function for invariants `g2 = 0`, `g3 = -B^6/27^2`, sends the interior to
//! the upper half plane: the `0 -> 1` edge to `[1, +inf)`, the
//! `0 -> e^{i pi/3}` edge to `(-inf, 0]`, and the far edge to `[0, 1]`. The
//! far edge is parametrized by the regularized incomplete beta function,
//! which is also the linear boundary weight in half-plane coordinates.

use crate::asymptotics::beta_fn;
use crate::model::u_wedge;
use num_complex::Complex64;
use thiserror::Error;

/// Complex scalar used throughout the solver. `re` and `im` are plain fields.
pub type ComplexValue = Complex64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConformalError {
    #[error("argument within {0:.1e} of a lattice pole")]
    PoleProximity(f64),
    #[error("triangle vertices are excluded from the map domain")]
    VertexInput,
    #[error("point ({0}, {1}) lies outside the closed triangle")]
    OutsideDomain(f64, f64),
    #[error("point ({0}, {1}) is not strictly interior")]
    NotInterior(f64, f64),
    #[error("boundary parameter {0} outside (0, 1)")]
    BadParameter(f64),
    #[error(
        "adaptive quadrature stalled: achieved error {achieved:.3e} > requested {requested:.3e}"
    )]
    QuadratureNonConvergence { achieved: f64, requested: f64 },
}

/// Arguments closer to the origin pole than this are rejected.
const POLE_THRESHOLD: f64 = 1e-8;

/// Nearest nonzero lattice point sits at distance sqrt(3); the Laurent
/// series is used below half that radius and duplication above.
const DUPLICATION_RADIUS: f64 = 0.866;

/// Number of Laurent coefficients `c_k` (k = 2..=K).
const SERIES_TERMS: usize = 40;

/// Weierstrass data for the lattice with `g2 = 0`, `g3 = -B(1/3,1/3)^6/729`.
#[derive(Debug, Clone)]
pub struct EquianharmonicLattice {
    pub g2: f64,
    pub g3: f64,
    /// Laurent coefficients `c_k`, `k = 2..=SERIES_TERMS`, of
    /// `wp(u) = u^-2 + sum c_k u^{2k-2}`.
    coeffs: Vec<f64>,
}

impl EquianharmonicLattice {
    pub fn new(beta_third: f64) -> Self {
        let g2 = 0.0;
        let g3 = -beta_third.powi(6) / 729.0;
        // c_2 = g2/20, c_3 = g3/28, then the standard recursion
        let mut c = vec![0.0; SERIES_TERMS + 1];
        c[2] = g2 / 20.0;
        c[3] = g3 / 28.0;
        for k in 4..=SERIES_TERMS {
            let mut s = 0.0;
            for m in 2..=(k - 2) {
                s += c[m] * c[k - m];
            }
            c[k] = 3.0 * s / (((2 * k + 1) * (k - 3)) as f64);
        }
        EquianharmonicLattice { g2, g3, coeffs: c }
    }

    fn series_pair(&self, u: ComplexValue) -> (ComplexValue, ComplexValue) {
        let v = u * u;
        // Horner over c_K..c_2 for wp and its derivative
        let mut p_tail = ComplexValue::new(0.0, 0.0);
        let mut dp_tail = ComplexValue::new(0.0, 0.0);
        for k in (2..=SERIES_TERMS).rev() {
            p_tail = p_tail * v + self.coeffs[k];
            dp_tail = dp_tail * v + (2 * k - 2) as f64 * self.coeffs[k];
        }
        let p = 1.0 / v + v * p_tail;
        let dp = -2.0 / (u * v) + u * dp_tail;
        (p, dp)
    }

    /// `wp(u)` and `wp'(u)` via the Laurent series, with duplication-formula
    /// argument reduction outside half the convergence radius.
    pub fn wp_pair(&self, u: ComplexValue) -> Result<(ComplexValue, ComplexValue), ConformalError> {
        if u.norm() < POLE_THRESHOLD {
            return Err(ConformalError::PoleProximity(POLE_THRESHOLD));
        }
        let mut v = u;
        let mut halvings = 0;
        while v.norm() > DUPLICATION_RADIUS && halvings < 60 {
            v /= 2.0;
            halvings += 1;
        }
        let (mut p, mut dp) = self.series_pair(v);
        for _ in 0..halvings {
            // wp'' = 6 wp^2 - g2/2; duplication for wp and its derivative
            let ddp = 6.0 * p * p - 0.5 * self.g2;
            let p2 = ddp * ddp / (4.0 * dp * dp) - 2.0 * p;
            let dp2 = 3.0 * p * ddp / dp - ddp * ddp * ddp / (4.0 * dp * dp * dp) - dp;
            p = p2;
            dp = dp2;
        }
        Ok((p, dp))
    }

    /// `wp'(u)`.
    pub fn wp_prime(&self, u: ComplexValue) -> Result<ComplexValue, ConformalError> {
        Ok(self.wp_pair(u)?.1)
    }

    /// Relative residual of `(wp')^2 = 4 wp^3 - g2 wp - g3`.
    pub fn ode_residual(&self, u: ComplexValue) -> Result<f64, ConformalError> {
        let (p, dp) = self.wp_pair(u)?;
        let lhs = dp * dp;
        let rhs = 4.0 * p * p * p - self.g2 * p - self.g3;
        let scale = lhs.norm().max(rhs.norm()).max(1.0);
        Ok((lhs - rhs).norm() / scale)
    }
}

/// Gauss-Legendre nodes and weights on [-1, 1].
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let legendre = |t: f64| -> (f64, f64) {
        let mut p0 = 1.0;
        let mut p1 = t;
        for k in 2..=n {
            let kf = k as f64;
            let pk = ((2.0 * kf - 1.0) * t * p1 - (kf - 1.0) * p0) / kf;
            p0 = p1;
            p1 = pk;
        }
        let dp = n as f64 * (t * p1 - p0) / (t * t - 1.0);
        (p1, dp)
    };
    for i in 0..n.div_ceil(2) {
        let mut t = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(t);
            let dt = p / dp;
            t -= dt;
            if dt.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre(t);
        let w = 2.0 / ((1.0 - t * t) * dp * dp);
        nodes[i] = -t.abs();
        nodes[n - 1 - i] = t.abs();
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// The endpoint-graded substitution `t = s^3 / (s^3 + (1-s)^3)` and its
/// derivative; it absorbs the `t^{-2/3} (1-t)^{-2/3}` singularities exactly.
fn graded(s: f64) -> (f64, f64) {
    let s3 = s * s * s;
    let r3 = (1.0 - s) * (1.0 - s) * (1.0 - s);
    let d = s3 + r3;
    let t = s3 / d;
    let dt = 3.0 * s * s * (1.0 - s) * (1.0 - s) / (d * d);
    (t, dt)
}

/// Quadrature rule on (0, 1) whose nodes and weights carry the graded
/// substitution, so integrands with `t^{-2/3}` endpoint singularities are
/// integrated at Gauss accuracy.
///
/// `complements[i]` holds `1 - nodes[i]` computed without cancellation;
/// singular integrands should take the endpoint distances from there.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub complements: Vec<f64>,
}

impl QuadratureRule {
    pub fn graded(n: usize) -> Self {
        let (x, w) = gauss_legendre(n);
        let mut nodes = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        let mut complements = Vec::with_capacity(n);
        for i in 0..n {
            let s = 0.5 * (x[i] + 1.0);
            let (t, dt) = graded(s);
            nodes.push(t);
            weights.push(0.5 * w[i] * dt);
            // 1 - t = (1-s)^3 / (s^3 + (1-s)^3) exactly, no subtraction of
            // nearly equal quantities
            let r = 1.0 - s;
            complements.push(r * r * r / (s * s * s + r * r * r));
        }
        QuadratureRule {
            nodes,
            weights,
            complements,
        }
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&t, &w)| w * f(t))
            .sum()
    }

    /// Integrate `f(t, 1 - t)` with the stable complement, for integrands
    /// singular at both endpoints.
    pub fn integrate_singular(&self, f: impl Fn(f64, f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.complements)
            .zip(&self.weights)
            .map(|((&t, &c), &w)| w * f(t, c))
            .sum()
    }
}

/// Precomputed state for the Brownian solver: the beta constant, the
/// Weierstrass lattice, Gauss rules, and the quadrature tolerance.
#[derive(Debug, Clone)]
pub struct ConformalContext {
    pub beta_third: f64,
    pub lattice: EquianharmonicLattice,
    pub rule: QuadratureRule,
    /// Plain Gauss-Legendre nodes/weights on [0, 1] for smooth integrands.
    gl_nodes: Vec<f64>,
    gl_weights: Vec<f64>,
    /// Embedded pair for the adaptive integrator.
    gl7: (Vec<f64>, Vec<f64>),
    gl15: (Vec<f64>, Vec<f64>),
    /// Absolute tolerance handed to `poisson_value`.
    pub quad_tol: f64,
}

const APEX_RE: f64 = 0.5;
const APEX_IM: f64 = 0.866_025_403_784_438_6; // sqrt(3)/2

impl ConformalContext {
    pub fn new() -> Self {
        let beta_third = beta_fn(1.0 / 3.0, 1.0 / 3.0).expect("positive arguments");
        let (gl_x, gl_w) = gauss_legendre(48);
        let gl_nodes = gl_x.iter().map(|&x| 0.5 * (x + 1.0)).collect();
        let gl_weights = gl_w.iter().map(|&w| 0.5 * w).collect();
        ConformalContext {
            beta_third,
            lattice: EquianharmonicLattice::new(beta_third),
            rule: QuadratureRule::graded(64),
            gl_nodes,
            gl_weights,
            gl7: gauss_legendre(7),
            gl15: gauss_legendre(15),
            quad_tol: 1e-10,
        }
    }

    pub fn with_quad_tol(mut self, tol: f64) -> Self {
        self.quad_tol = tol;
        self
    }

    fn in_closed_triangle(z: ComplexValue) -> bool {
        const EPS: f64 = 1e-9;
        let (x, y) = (z.re, z.im);
        let s3 = 3.0f64.sqrt();
        y >= -EPS && y <= s3 * x + EPS && y <= s3 * (1.0 - x) + EPS
    }

    fn near_vertex(z: ComplexValue) -> bool {
        const EPS: f64 = 1e-9;
        z.norm() < EPS
            || (z - ComplexValue::new(1.0, 0.0)).norm() < EPS
            || (z - ComplexValue::new(APEX_RE, APEX_IM)).norm() < EPS
    }

    /// Conformal map from the unit triangle to the upper half plane.
    pub fn forward_map(&self, z: ComplexValue) -> Result<ComplexValue, ConformalError> {
        if Self::near_vertex(z) {
            return Err(ConformalError::VertexInput);
        }
        if !Self::in_closed_triangle(z) {
            return Err(ConformalError::OutsideDomain(z.re, z.im));
        }
        let rot = ComplexValue::from_polar(1.0, -std::f64::consts::PI / 3.0);
        let u = z.conj() * rot;
        let dp = self.lattice.wp_prime(u)?;
        let b3 = self.beta_third.powi(3);
        Ok(ComplexValue::new(0.5, 0.0) + 27.0 / (2.0 * b3) * dp)
    }

    /// Regularized incomplete beta `I_t(1/3, 1/3)`: the fraction of the
    /// singular density on `[0, t]`. This is both the inverse-map integrand
    /// and the linear boundary weight seen from the half plane.
    pub fn reg_inc_beta(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        if t >= 1.0 {
            return 1.0;
        }
        // upper limit in graded coordinates: s/(1-s) = (t/(1-t))^{1/3}
        let r = (t / (1.0 - t)).cbrt();
        let s_up = r / (1.0 + r);
        // smooth integrand 3 (s^3 + (1-s)^3)^{-2/3} on [0, s_up]
        let mut acc = 0.0;
        for (&x, &w) in self.gl_nodes.iter().zip(&self.gl_weights) {
            let s = s_up * x;
            let d = s * s * s + (1.0 - s) * (1.0 - s) * (1.0 - s);
            acc += w * 3.0 / d.powf(2.0 / 3.0);
        }
        (acc * s_up / self.beta_third).clamp(0.0, 1.0)
    }

    /// Point on the far edge (from `e^{i pi/3}` down to `1`) hit by the
    /// inverse map at real parameter `t` in (0, 1).
    pub fn boundary_point(&self, t: f64) -> Result<ComplexValue, ConformalError> {
        if !(t > 0.0 && t < 1.0) {
            return Err(ConformalError::BadParameter(t));
        }
        let rot = ComplexValue::from_polar(1.0, -std::f64::consts::PI / 3.0);
        let apex = ComplexValue::new(APEX_RE, APEX_IM);
        Ok(apex + self.reg_inc_beta(t) * rot)
    }

    /// Adaptive integral of `f` over [0, 1] with an embedded GL7/GL15 pair:
    /// greedy bisection of the segment with the largest error estimate.
    fn adaptive_integral(
        &self,
        f: &dyn Fn(f64) -> f64,
        abs_tol: f64,
    ) -> Result<f64, ConformalError> {
        const MAX_SEGMENTS: usize = 4000;
        struct Seg {
            a: f64,
            b: f64,
            value: f64,
            err: f64,
        }
        let eval = |a: f64, b: f64| -> Seg {
            let mid = 0.5 * (a + b);
            let half = 0.5 * (b - a);
            let mut coarse = 0.0;
            for (&x, &w) in self.gl7.0.iter().zip(&self.gl7.1) {
                coarse += w * f(mid + half * x);
            }
            coarse *= half;
            let mut fine = 0.0;
            for (&x, &w) in self.gl15.0.iter().zip(&self.gl15.1) {
                fine += w * f(mid + half * x);
            }
            fine *= half;
            Seg {
                a,
                b,
                value: fine,
                err: (fine - coarse).abs(),
            }
        };
        let mut segs: Vec<Seg> = (0..8)
            .map(|i| eval(i as f64 / 8.0, (i + 1) as f64 / 8.0))
            .collect();
        loop {
            let total: f64 = segs.iter().map(|s| s.value).sum();
            let err: f64 = segs.iter().map(|s| s.err).sum();
            if err <= abs_tol || err <= 1e-13 * total.abs() {
                return Ok(total);
            }
            if segs.len() >= MAX_SEGMENTS {
                return Err(ConformalError::QuadratureNonConvergence {
                    achieved: err,
                    requested: abs_tol,
                });
            }
            let worst = segs
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.err.total_cmp(&b.1.err))
                .map(|(i, _)| i)
                .expect("nonempty");
            let Seg { a, b, .. } = segs.swap_remove(worst);
            let mid = 0.5 * (a + b);
            segs.push(eval(a, mid));
            segs.push(eval(mid, b));
        }
    }

    /// Integral of boundary data over the far edge's half-plane parameter,
    /// in the graded variable (endpoint-friendly).
    pub fn boundary_integral(
        &self,
        data: &dyn Fn(f64) -> f64,
        abs_tol: f64,
    ) -> Result<f64, ConformalError> {
        self.adaptive_integral(
            &|u: f64| {
                let (t, dt) = graded(u);
                if dt == 0.0 {
                    0.0
                } else {
                    data(t) * dt
                }
            },
            abs_tol,
        )
    }

    /// Harmonic extension at `z` of boundary data supported on the far edge
    /// (zero on the other two edges):
    ///
    /// `(1 / (pi sqrt 2)) * int_0^1 Im w(z) / |t - w(z)|^2 * data(t) dt`.
    ///
    /// This is the Dirichlet solution for the triangle of side `1/sqrt 2`
    /// scaling convention; `bm_p321`/`bm_third_first` apply the scaling chain.
    pub fn poisson_value(
        &self,
        z: ComplexValue,
        data: &dyn Fn(f64) -> f64,
        abs_tol: f64,
    ) -> Result<f64, ConformalError> {
        if Self::near_vertex(z) || !Self::in_closed_triangle(z) {
            return Err(ConformalError::NotInterior(z.re, z.im));
        }
        let w = self.forward_map(z)?;
        if w.im <= 0.0 {
            return Err(ConformalError::NotInterior(z.re, z.im));
        }
        let iw = w.im;
        let wr = w.re;
        let kernel_integral = self.adaptive_integral(
            &|u: f64| {
                let (t, dt) = graded(u);
                if dt == 0.0 {
                    return 0.0;
                }
                let dt_w = (t - wr) * (t - wr) + iw * iw;
                iw / dt_w * data(t) * dt
            },
            abs_tol,
        )?;
        Ok(kernel_integral / (std::f64::consts::PI * std::f64::consts::SQRT_2))
    }

    /// Brownian probability that the third player is eliminated first and
    /// the second player second, from wedge coordinates `(x1, x2)` in the
    /// triangle of side `sqrt(2) N`.
    pub fn bm_p321(&self, x1: f64, x2: f64, n: f64) -> Result<f64, ConformalError> {
        let z = ComplexValue::new(x1, x2) / (std::f64::consts::SQRT_2 * n);
        // boundary weight in half-plane coordinates is the regularized beta
        let tol = self.scaled_tol(z);
        let v = self.poisson_value(z, &|t| self.reg_inc_beta(t), tol)?;
        Ok(std::f64::consts::SQRT_2 * v)
    }

    /// Brownian probability that the third player is eliminated first.
    pub fn bm_third_first(&self, x1: f64, x2: f64, n: f64) -> Result<f64, ConformalError> {
        let z = ComplexValue::new(x1, x2) / (std::f64::consts::SQRT_2 * n);
        let tol = self.scaled_tol(z);
        let v = self.poisson_value(z, &|_| 1.0, tol)?;
        Ok(std::f64::consts::SQRT_2 * v)
    }

    /// Solution value of the size-`N` Dirichlet problem with the linear
    /// boundary data (the function whose one-step expectation defect the
    /// truncation study measures): `v_N(x) = N sqrt 2 v_{1/sqrt 2}(x / (sqrt 2 N))`.
    pub fn scaled_dirichlet_value(&self, x1: f64, x2: f64, n: f64) -> Result<f64, ConformalError> {
        Ok(n * self.bm_p321(x1, x2, n)?)
    }

    /// Quadrature tolerance proportional to the natural size of the answer,
    /// so accuracy is relative across scales: the value at `z` is of order
    /// `u_wedge(z)`.
    fn scaled_tol(&self, z: ComplexValue) -> f64 {
        self.quad_tol * u_wedge(z.re, z.im).abs().max(1e-12)
    }
}

impl Default for ConformalContext {
    fn default() -> Self {
        Self::new()
    }
}
