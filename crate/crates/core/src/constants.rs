//! Closed-form constants of Euclidean balls and spheres.

use statrs::function::gamma::ln_gamma;

use crate::error::{usage, Result};

/// Volume of the unit Euclidean ball in `R^n`, `pi^(n/2) / Gamma(n/2 + 1)`.
pub fn ball_volume(n: usize) -> f64 {
    ln_ball_volume(n).exp()
}

/// `ln |B_2^n|`, finite for all `n`.
pub fn ln_ball_volume(n: usize) -> f64 {
    let n = n as f64;
    0.5 * n * std::f64::consts::PI.ln() - ln_gamma(0.5 * n + 1.0)
}

/// Surface area of the unit sphere `S^(m-1)` in `R^m`. `m = 1` gives the two points `{-1, 1}`.
pub fn sphere_area(m: usize) -> f64 {
    if m == 0 {
        return 0.0;
    }
    m as f64 * ball_volume(m)
}

/// The slicing constant `c_n = |B_2^n|^((n-1)/n) / |B_2^(n-1)|`, strictly below one.
pub fn c_n(n: usize) -> Result<f64> {
    if n < 2 {
        return usage(format!("c_n requires n >= 2, got {n}"));
    }
    let nf = n as f64;
    let log = (nf - 1.0) / nf * ln_ball_volume(n) - ln_ball_volume(n - 1);
    Ok(log.exp())
}

/// Constant of the general-body inequality, `sqrt(n) * n/(n-1) * c_n`.
pub fn general_constant(n: usize) -> Result<f64> {
    let nf = n as f64;
    Ok(nf.sqrt() * nf / (nf - 1.0) * c_n(n)?)
}

/// Constant of the stability estimate, `n/(n-1) * c_n`.
pub fn stability_constant(n: usize) -> Result<f64> {
    let nf = n as f64;
    Ok(nf / (nf - 1.0) * c_n(n)?)
}

/// Constant of the unconditional inequality.
pub const UNCONDITIONAL_CONSTANT: f64 = std::f64::consts::E;

/// Large-dimension limit of the constants produced by the Lozanovskii argument, `sqrt(e)/2`.
pub fn half_sqrt_e() -> f64 {
    0.5 * std::f64::consts::E.sqrt()
}

/// Volume of the cross-polytope `B_1^n`, `2^n / n!`.
pub fn cross_polytope_volume(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * 2.0 / k as f64)
}
