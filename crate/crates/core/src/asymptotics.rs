//! Closed-form constants and asymptotic predictions for the exit
//! probabilities, plus the gamma/beta machinery they need.

use crate::model::{u_wedge, SQRT_6};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AsymError {
    #[error("gamma function requires a positive argument, got {0}")]
    NonPositive(f64),
}

// Lanczos approximation, g = 7, 9 coefficients. Relative error on the
// positive real axis is a few 1e-15, comfortably below the 1e-13 contract.
const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

fn lanczos_sum(x: f64) -> f64 {
    // x >= 0.5; series evaluated at x - 1
    let z = x - 1.0;
    let mut acc = LANCZOS[0];
    for (k, &c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (z + k as f64);
    }
    acc
}

/// Gamma function for positive arguments, via Lanczos with reflection below
/// one half.
pub fn gamma_fn(x: f64) -> Result<f64, AsymError> {
    if x.is_nan() || x <= 0.0 {
        return Err(AsymError::NonPositive(x));
    }
    if x < 0.5 {
        // reflection: Gamma(x) Gamma(1-x) = pi / sin(pi x)
        let denom = (std::f64::consts::PI * x).sin() * gamma_positive(1.0 - x);
        return Ok(std::f64::consts::PI / denom);
    }
    Ok(gamma_positive(x))
}

fn gamma_positive(x: f64) -> f64 {
    let z = x - 1.0;
    let t = z + LANCZOS_G + 0.5;
    (2.0 * std::f64::consts::PI).sqrt() * t.powf(z + 0.5) * (-t).exp() * lanczos_sum(x)
}

/// Natural log of the gamma function for positive arguments.
pub fn ln_gamma(x: f64) -> Result<f64, AsymError> {
    if x.is_nan() || x <= 0.0 {
        return Err(AsymError::NonPositive(x));
    }
    if x < 0.5 {
        let refl = (std::f64::consts::PI / (std::f64::consts::PI * x).sin()).ln();
        return Ok(refl - ln_gamma(1.0 - x)?);
    }
    let z = x - 1.0;
    let t = z + LANCZOS_G + 0.5;
    Ok(0.5 * (2.0 * std::f64::consts::PI).ln() + (z + 0.5) * t.ln() - t + lanczos_sum(x).ln())
}

/// Beta function via log-gamma differences.
pub fn beta_fn(a: f64, b: f64) -> Result<f64, AsymError> {
    Ok((ln_gamma(a)? + ln_gamma(b)? - ln_gamma(a + b)?).exp())
}

/// The four limit constants of the problem.
///
/// `c_third_first` and `c_321` multiply `y1 y2 (y1 + y2) / N^3` in original
/// coordinates; `c_bm_third` and `c_bm_321` multiply `u(x) / N^3` in wedge
/// coordinates. The factor `u(x) = 3 sqrt(6) y1 y2 (y1 + y2)` links the pairs.
#[derive(Debug, Clone, Copy)]
pub struct AsymptoticConstants {
    pub c_third_first: f64,
    pub c_321: f64,
    pub c_bm_321: f64,
    pub c_bm_third: f64,
}

impl AsymptoticConstants {
    pub fn compute() -> Self {
        let g13 = gamma_fn(1.0 / 3.0).expect("1/3 > 0");
        let pi4 = std::f64::consts::PI.powi(4);
        let g9 = g13.powi(9);
        AsymptoticConstants {
            c_third_first: g9 / (16.0 * pi4),
            c_321: g9 / (32.0 * pi4),
            c_bm_321: g9 / (96.0 * SQRT_6 * pi4),
            c_bm_third: g9 / (48.0 * SQRT_6 * pi4),
        }
    }
}

impl Default for AsymptoticConstants {
    fn default() -> Self {
        Self::compute()
    }
}

/// Asymptotic P(third eliminated first, then second) from capitals
/// `(y1, y2)` of N: `c_321 y1 y2 (y1 + y2) / N^3`.
pub fn predict_p321(y1: f64, y2: f64, n: f64) -> f64 {
    AsymptoticConstants::compute().c_321 * y1 * y2 * (y1 + y2) / (n * n * n)
}

/// Asymptotic P(third eliminated first): exactly twice `predict_p321`.
pub fn predict_third_first(y1: f64, y2: f64, n: f64) -> f64 {
    AsymptoticConstants::compute().c_third_first * y1 * y2 * (y1 + y2) / (n * n * n)
}

/// Which Brownian exit functional to predict.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BmKind {
    P321,
    ThirdFirst,
}

/// Brownian-motion asymptotics in wedge coordinates:
/// `c_bm * u(x1, x2) / N^3`.
pub fn predict_bm(x1: f64, x2: f64, n: f64, kind: BmKind) -> f64 {
    let consts = AsymptoticConstants::compute();
    let c = match kind {
        BmKind::P321 => consts.c_bm_321,
        BmKind::ThirdFirst => consts.c_bm_third,
    };
    c * u_wedge(x1, x2) / (n * n * n)
}
