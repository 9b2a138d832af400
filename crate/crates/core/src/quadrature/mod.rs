//! Integration of densities over star bodies and their central sections.
//!
//! Everything goes through the polar-coordinate reduction
//! `mu(L) = ∫_{S^{m-1}} ∫_0^{rho_L(θ)} r^{m-1} g(rθ) dr dθ`, where the sphere is
//! `S^{n-1}` for the body and the unit sphere of `xi^⊥` for a section. The
//! radial integral is Gauss–Legendre on `[0, rho]` (or the exact `rho^m / m` for
//! Lebesgue measure); the sphere integral is one of:
//!
//! * `deterministic`: tensor-product Gauss–Legendre on the faces of a box
//!   projected radially onto the sphere, for `m <= 4`;
//! * `monte_carlo`: uniform directions from normalized Gaussian vectors;
//! * `grid_oracle`: a midpoint Riemann sum on a cube grid, for cross-checks.

mod gauss;
mod grid;

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bodies::{check_unit, StarBody};
use crate::constants::sphere_area;
use crate::error::{check_dim, usage, Error, Result};
use crate::measures::Density;
use crate::num_fmt;
use crate::sphere;

pub use gauss::GlRule;
pub use grid::{grid_oracle_section, grid_oracle_volume};

/// Largest sphere dimension the deterministic engine accepts.
pub const MAX_DETERMINISTIC_SPHERE_DIM: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    Deterministic,
    MonteCarlo,
    GridOracle,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Deterministic,
    DeterministicAdaptive,
    MonteCarlo,
    GridOracle,
    ClosedForm,
    /// Arithmetic combination of other estimates.
    Combined,
}

/// A numerical value with an error indicator: a heuristic bound for the
/// deterministic rules, a standard error for Monte Carlo.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    #[serde(with = "num_fmt::sci")]
    pub value: f64,
    #[serde(with = "num_fmt::sci")]
    pub err: f64,
    pub method: Method,
    pub n_evals: u64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Self {
            value,
            err: 0.0,
            method: Method::ClosedForm,
            n_evals: 0,
        }
    }

    /// `err / |value|`; infinite for a zero value with nonzero error.
    pub fn rel_err(&self) -> f64 {
        if self.err == 0.0 {
            0.0
        } else {
            self.err / self.value.abs()
        }
    }

    pub fn plus(&self, other: &Estimate) -> Estimate {
        Estimate {
            value: self.value + other.value,
            err: self.err + other.err,
            method: Method::Combined,
            n_evals: self.n_evals + other.n_evals,
        }
    }

    pub fn minus(&self, other: &Estimate) -> Estimate {
        Estimate {
            value: self.value - other.value,
            ..self.plus(other)
        }
    }

    /// Product with relative errors added.
    pub fn times(&self, other: &Estimate) -> Estimate {
        let value = self.value * other.value;
        Estimate {
            value,
            err: value.abs() * (self.rel_err() + other.rel_err()),
            method: Method::Combined,
            n_evals: self.n_evals + other.n_evals,
        }
    }
}

/// Quadrature settings, config form `{engine, radial_nodes, sphere_nodes, mc_samples, seed, target_rel_err}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadScheme {
    pub engine: Engine,
    /// Gauss–Legendre nodes on each ray.
    pub radial_nodes: usize,
    /// Gauss–Legendre nodes per angular panel; `None` picks a default by dimension.
    pub sphere_nodes: Option<usize>,
    pub mc_samples: usize,
    pub seed: u64,
    /// Defaults to `1e-6` (deterministic) or `1e-3` (Monte Carlo).
    pub target_rel_err: Option<f64>,
    /// Adaptive panel bisection (deterministic) or sample doubling (Monte Carlo)
    /// until `target_rel_err` is met.
    pub adaptive: bool,
    pub grid_resolution: usize,
    #[serde(skip)]
    pub(crate) boost: u32,
}

impl Default for QuadScheme {
    fn default() -> Self {
        Self {
            engine: Engine::Deterministic,
            radial_nodes: 64,
            sphere_nodes: None,
            mc_samples: 20_000,
            seed: 0,
            target_rel_err: None,
            adaptive: false,
            grid_resolution: 256,
            boost: 0,
        }
    }
}

impl QuadScheme {
    pub fn deterministic() -> Self {
        Self::default()
    }

    pub fn monte_carlo(samples: usize, seed: u64) -> Self {
        Self {
            engine: Engine::MonteCarlo,
            mc_samples: samples,
            seed,
            ..Self::default()
        }
    }

    pub fn grid(resolution: usize) -> Self {
        Self {
            engine: Engine::GridOracle,
            grid_resolution: resolution,
            ..Self::default()
        }
    }

    pub fn target(&self) -> f64 {
        self.target_rel_err.unwrap_or(match self.engine {
            Engine::MonteCarlo => 1e-3,
            _ => 1e-6,
        })
    }

    pub fn sphere_nodes_for(&self, m: usize) -> usize {
        let base = self.sphere_nodes.unwrap_or(match m {
            0..=3 => 16,
            _ => 8,
        });
        base << self.boost
    }

    /// Same scheme with more effort: doubled node counts, or four times the samples.
    pub fn boosted(&self) -> Self {
        let mut s = self.clone();
        match self.engine {
            Engine::Deterministic => {
                s.radial_nodes *= 2;
                s.boost += 1;
            }
            Engine::MonteCarlo => s.mc_samples *= 4,
            Engine::GridOracle => s.grid_resolution *= 2,
        }
        s
    }

    /// Same scheme with a different seed.
    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.radial_nodes == 0 || self.mc_samples == 0 || self.sphere_nodes == Some(0) {
            return usage("quadrature node and sample counts must be at least 1");
        }
        if self.engine == Engine::GridOracle && self.grid_resolution < 16 {
            return usage("grid resolution must be at least 16");
        }
        if let Some(t) = self.target_rel_err {
            if !(t > 0.0) {
                return usage("target_rel_err must be positive");
            }
        }
        Ok(())
    }
}

/// Integrand along rays of a sphere embedded in `R^n`.
pub(crate) struct Rays<'a> {
    pub body: &'a StarBody,
    pub density: &'a Density,
    /// Orthonormal basis of the section hyperplane, or `None` for the full body.
    pub basis: Option<&'a [Vec<f64>]>,
}

impl Rays<'_> {
    /// Dimension of the integration domain.
    pub fn m(&self) -> usize {
        self.basis.map_or(self.body.dim(), |b| b.len())
    }

    pub fn embed(&self, u: &[f64]) -> Vec<f64> {
        match self.basis {
            None => u.to_vec(),
            Some(basis) => {
                let mut x = vec![0.0; self.body.dim()];
                for (uj, b) in u.iter().zip(basis) {
                    for (xi, bi) in x.iter_mut().zip(b) {
                        *xi += uj * bi;
                    }
                }
                x
            }
        }
    }

    /// `∫_0^{rho(θ)} r^{m-1} g(rθ) dr` for the direction `u` of the domain sphere.
    pub fn value(&self, u: &[f64], rule: &GlRule) -> f64 {
        let theta = self.embed(u);
        let rho = 1.0 / self.body.gauge(&theta);
        let m = self.m() as i32;
        if self.density.is_lebesgue() {
            return rho.powi(m) / m as f64;
        }
        let mut point = vec![0.0; theta.len()];
        rule.mapped(0.0, rho)
            .map(|(r, w)| {
                for (p, t) in point.iter_mut().zip(&theta) {
                    *p = r * t;
                }
                w * r.powi(m - 1) * self.density.value(&point)
            })
            .sum()
    }

    fn evals_per_ray(&self, rule: &GlRule) -> u64 {
        if self.density.is_lebesgue() {
            1
        } else {
            rule.len() as u64
        }
    }
}

/// Reference cube-face rule on `S^{m-1}`.
///
/// Directions are `y / |y|` with `y` on a face `{y_j = ±w_j}` of a box with
/// half-widths `w`; the solid-angle element is `w_j dy / |y|^m`. Each free
/// coordinate runs over `[-w_i, 0]` and `[0, w_i]` with the graded substitution
/// `y_i = ±w_i s^2`, so kinks on coordinate hyperplanes sit on panel edges and
/// the box itself is integrated exactly. Nodes are stored for `w = 1`.
struct SphereRule {
    m: usize,
    /// Face points `y` for unit half-widths, `m` entries each.
    points: Vec<f64>,
    /// Products of the one-dimensional weights (without the `w_j / |y|^m` factor).
    weights: Vec<f64>,
}

impl SphereRule {
    fn get(m: usize, k: usize) -> Arc<SphereRule> {
        static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<SphereRule>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(Default::default);
        if let Some(hit) = cache.lock().unwrap().get(&(m, k)) {
            return hit.clone();
        }
        let rule = Arc::new(Self::build(m, k));
        cache.lock().unwrap().insert((m, k), rule.clone());
        rule
    }

    fn build(m: usize, k: usize) -> SphereRule {
        let gl = GlRule::get(k);
        let mut line: Vec<(f64, f64)> = Vec::with_capacity(2 * k);
        for (s, w) in gl.mapped(0.0, 1.0) {
            line.push((s * s, 2.0 * s * w));
            line.push((-s * s, 2.0 * s * w));
        }
        let mut free: Vec<(Vec<f64>, f64)> = vec![(Vec::new(), 1.0)];
        for _ in 1..m {
            free = free
                .iter()
                .flat_map(|(pt, w)| {
                    line.iter().map(move |(y, wy)| {
                        let mut next = pt.clone();
                        next.push(*y);
                        (next, w * wy)
                    })
                })
                .collect();
        }
        let mut points = Vec::with_capacity(2 * m * free.len() * m);
        let mut weights = Vec::with_capacity(2 * m * free.len());
        for j in 0..m {
            for sign in [1.0, -1.0] {
                for (pt, w) in &free {
                    points.extend_from_slice(&pt[..j]);
                    points.push(sign);
                    points.extend_from_slice(&pt[j..]);
                    weights.push(*w);
                }
            }
        }
        SphereRule { m, points, weights }
    }

    fn len(&self) -> usize {
        self.weights.len()
    }

    /// `∫_{S^{m-1}} f` with face half-widths `w`.
    fn integrate(&self, w: &[f64], f: impl Fn(&[f64]) -> f64 + Sync) -> f64 {
        let m = self.m;
        let vol: f64 = w.iter().product();
        let terms: Vec<f64> = self
            .points
            .par_chunks(m)
            .zip(self.weights.par_iter())
            .map(|(p, wt)| {
                let y: Vec<f64> = p.iter().zip(w).map(|(a, b)| a * b).collect();
                let r = sphere::norm2(&y);
                let theta: Vec<f64> = y.iter().map(|v| v / r).collect();
                // w_j * prod_{i != j} w_i = prod w
                vol * wt / r.powi(m as i32) * f(&theta)
            })
            .collect();
        terms.iter().sum()
    }
}

/// Face half-widths for the cube-face rule: the radial function along the axes.
fn face_widths(rays: &Rays) -> Result<Vec<f64>> {
    let m = rays.m();
    (0..m)
        .map(|i| {
            let rho = 1.0 / rays.body.gauge(&rays.embed(&sphere::coordinate(m, i)));
            if rho.is_finite() && rho > 0.0 {
                Ok(rho)
            } else {
                Err(Error::Numeric(format!("radial function of {} is not positive and finite", rays.body.label())))
            }
        })
        .collect()
}

fn deterministic(rays: &Rays, scheme: &QuadScheme) -> Result<Estimate> {
    let m = rays.m();
    if m > MAX_DETERMINISTIC_SPHERE_DIM {
        return usage(format!(
            "deterministic sphere quadrature supports dimension <= {MAX_DETERMINISTIC_SPHERE_DIM} \
             (got {m}); use the monte_carlo engine"
        ));
    }
    if m == 1 {
        let radial = GlRule::get(scheme.radial_nodes);
        let value = rays.value(&[1.0], &radial) + rays.value(&[-1.0], &radial);
        check_finite(value, rays)?;
        let coarse = GlRule::get((scheme.radial_nodes / 2).max(1));
        let alt = rays.value(&[1.0], &coarse) + rays.value(&[-1.0], &coarse);
        return Ok(Estimate {
            value,
            err: (value - alt).abs().max(1e-14 * value.abs()),
            method: Method::Deterministic,
            n_evals: 2 * (rays.evals_per_ray(&radial) + rays.evals_per_ray(&coarse)),
        });
    }
    let w = face_widths(rays)?;
    let mut k = scheme.sphere_nodes_for(m);
    let mut radial_nodes = scheme.radial_nodes;
    let mut coarse = sphere_pass(rays, &w, (k / 2).max(1), (radial_nodes / 2).max(1));
    loop {
        let fine = sphere_pass(rays, &w, k, radial_nodes);
        let n_evals = fine.1 + coarse.1;
        let est = Estimate {
            value: fine.0,
            err: (fine.0 - coarse.0).abs().max(1e-14 * fine.0.abs()),
            method: if scheme.adaptive {
                Method::DeterministicAdaptive
            } else {
                Method::Deterministic
            },
            n_evals,
        };
        check_finite(est.value, rays)?;
        if !scheme.adaptive || est.rel_err() <= scheme.target() || k >= adaptive_cap(m) {
            return Ok(est);
        }
        coarse = (fine.0, n_evals);
        k *= 2;
        radial_nodes *= 2;
    }
}

/// One tensor-rule pass: (value, density evaluations).
fn sphere_pass(rays: &Rays, w: &[f64], k: usize, radial_nodes: usize) -> (f64, u64) {
    let rule = SphereRule::get(rays.m(), k);
    let radial = GlRule::get(radial_nodes);
    let value = rule.integrate(w, |u| rays.value(u, &radial));
    (value, rule.len() as u64 * rays.evals_per_ray(&radial))
}

/// Largest per-panel node count the adaptive doubling will try.
fn adaptive_cap(m: usize) -> usize {
    match m {
        0..=2 => 1024,
        3 => 128,
        _ => 32,
    }
}

fn monte_carlo(rays: &Rays, scheme: &QuadScheme) -> Result<Estimate> {
    let m = rays.m();
    let radial = GlRule::get(scheme.radial_nodes);
    let area = sphere_area(m);
    let mut samples = scheme.mc_samples;
    loop {
        let dirs = sphere::seeded_directions(scheme.seed, m, samples);
        let values: Vec<f64> = dirs.par_chunks(m).map(|u| rays.value(u, &radial)).collect();
        let mean = values.iter().sum::<f64>() / samples as f64;
        let var = if samples > 1 {
            values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (samples - 1) as f64
        } else {
            0.0
        };
        let est = Estimate {
            value: area * mean,
            err: area * (var / samples as f64).sqrt(),
            method: Method::MonteCarlo,
            n_evals: samples as u64 * rays.evals_per_ray(&radial),
        };
        check_finite(est.value, rays)?;
        if !scheme.adaptive || est.rel_err() <= scheme.target() || samples >= 64 * scheme.mc_samples {
            return Ok(est);
        }
        samples *= 2;
    }
}

fn check_finite(value: f64, rays: &Rays) -> Result<()> {
    if !value.is_finite() {
        return Err(Error::Numeric(format!(
            "integral over {} with {} is not finite",
            rays.body.label(),
            rays.density.label()
        )));
    }
    Ok(())
}

fn dispatch(rays: &Rays, scheme: &QuadScheme) -> Result<Estimate> {
    scheme.validate()?;
    match scheme.engine {
        Engine::Deterministic => deterministic(rays, scheme),
        Engine::MonteCarlo => monte_carlo(rays, scheme),
        Engine::GridOracle => grid::grid_estimate(rays, scheme.grid_resolution),
    }
}

/// `mu(L) = ∫_L g`.
pub fn integrate_body(body: &StarBody, density: &Density, scheme: &QuadScheme) -> Result<Estimate> {
    check_dim(body.dim(), density.dim())?;
    dispatch(
        &Rays {
            body,
            density,
            basis: None,
        },
        scheme,
    )
}

/// Lebesgue volume `|L|`.
pub fn volume(body: &StarBody, scheme: &QuadScheme) -> Result<Estimate> {
    integrate_body(body, &Density::lebesgue(body.dim()), scheme)
}

/// `mu(L ∩ xi^⊥)`, the `(n-1)`-dimensional integral of `g` over the central section.
pub fn integrate_section(body: &StarBody, density: &Density, xi: &[f64], scheme: &QuadScheme) -> Result<Estimate> {
    check_dim(body.dim(), density.dim())?;
    let basis = hyperplane_basis(xi)?;
    check_dim(body.dim(), xi.len())?;
    dispatch(
        &Rays {
            body,
            density,
            basis: Some(&basis),
        },
        scheme,
    )
}

/// Orthonormal basis of `xi^⊥`. `xi` and `-xi` give identical bases.
pub fn hyperplane_basis(xi: &[f64]) -> Result<Vec<Vec<f64>>> {
    if xi.len() < 2 {
        return usage("central sections need dimension n >= 2");
    }
    check_unit(xi)?;
    Ok(sphere::orthonormal_complement(xi))
}

#[cfg(test)]
mod tests;
