//! Midpoint-grid Riemann sums, used only to cross-check the main engines.

use rayon::prelude::*;

use super::{hyperplane_basis, Estimate, Method, Rays};
use crate::bodies::StarBody;
use crate::error::{check_dim, usage, Result};
use crate::measures::Density;
use crate::sphere::{self, CompassConfig};

const MAX_GRID_DIM: usize = 3;

/// `mu(L)` by a Riemann sum over a uniform grid on the bounding cube. `n <= 3`.
pub fn grid_oracle_volume(body: &StarBody, density: &Density, resolution: usize) -> Result<Estimate> {
    check_dim(body.dim(), density.dim())?;
    grid_estimate(
        &Rays {
            body,
            density,
            basis: None,
        },
        resolution,
    )
}

/// `mu(L ∩ xi^⊥)` by a Riemann sum over a grid in `xi^⊥`. `n <= 4`.
pub fn grid_oracle_section(body: &StarBody, density: &Density, xi: &[f64], resolution: usize) -> Result<Estimate> {
    check_dim(body.dim(), density.dim())?;
    check_dim(body.dim(), xi.len())?;
    let basis = hyperplane_basis(xi)?;
    grid_estimate(
        &Rays {
            body,
            density,
            basis: Some(&basis),
        },
        resolution,
    )
}

/// Largest radial value over coordinate, diagonal and random directions,
/// refined by compass ascent.
fn bounding_radius(rays: &Rays) -> f64 {
    let m = rays.m();
    let radial = |u: &[f64]| rays.body.radial_unchecked(&rays.embed(u));
    let mut starts: Vec<Vec<f64>> = (0..m).map(|i| sphere::coordinate(m, i)).collect();
    starts.extend(sphere::diagonal_directions(m, 128));
    let random = sphere::seeded_directions(0x0ac1e, m, 4096);
    starts.extend(random.chunks(m).map(|c| c.to_vec()));
    let mut scored: Vec<(f64, Vec<f64>)> = starts.into_iter().map(|s| (radial(&s), s)).collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    let cfg = CompassConfig {
        step_init: 0.1,
        step_min: 1e-7,
        max_iters: 200,
        rotations: 4,
    };
    scored
        .iter()
        .take(4)
        .map(|(v, s)| sphere::compass_ascent(s, *v, &cfg, false, radial).value)
        .fold(0.0, f64::max)
}

pub(super) fn grid_estimate(rays: &Rays, resolution: usize) -> Result<Estimate> {
    let m = rays.m();
    if m > MAX_GRID_DIM {
        return usage(format!("grid oracle is limited to dimension {MAX_GRID_DIM}, got {m}"));
    }
    if resolution < 16 {
        return usage(format!("grid resolution must be at least 16, got {resolution}"));
    }
    let r = 1.01 * bounding_radius(rays);
    if !r.is_finite() {
        return usage(format!("{} is unbounded", rays.body.label()));
    }
    let (fine, band) = grid_sum(rays, r, resolution);
    let (coarse, _) = grid_sum(rays, r, resolution / 2);
    Ok(Estimate {
        value: fine,
        err: band + (fine - coarse).abs(),
        method: Method::GridOracle,
        n_evals: (resolution.pow(m as u32) + (resolution / 2).pow(m as u32)) as u64,
    })
}

/// Returns the Riemann sum and the mass of cells that may straddle the boundary.
fn grid_sum(rays: &Rays, r: f64, res: usize) -> (f64, f64) {
    let m = rays.m();
    let h = 2.0 * r / res as f64;
    let cell = h.powi(m as i32);
    // A cell whose center has gauge outside [1 - eta, 1 + eta] lies entirely on one side.
    let eta = (0..1usize << m)
        .map(|mask| {
            let d: Vec<f64> = (0..m).map(|i| if mask >> i & 1 == 1 { 0.5 * h } else { -0.5 * h }).collect();
            rays.body.gauge(&rays.embed(&d))
        })
        .fold(0.0, f64::max);
    let center = |i: usize| -r + h * (i as f64 + 0.5);
    let slabs: Vec<(f64, f64)> = (0..res)
        .into_par_iter()
        .map(|i0| {
            let mut sum = 0.0;
            let mut band = 0.0;
            let inner = res.pow(m as u32 - 1);
            let mut y = vec![0.0; m];
            y[0] = center(i0);
            for idx in 0..inner {
                let mut rest = idx;
                for yj in y.iter_mut().skip(1) {
                    *yj = center(rest % res);
                    rest /= res;
                }
                let x = rays.embed(&y);
                let g = rays.body.gauge(&x);
                if g <= 1.0 + eta {
                    let w = rays.density.value(&x);
                    if g <= 1.0 {
                        sum += w;
                    }
                    if g >= 1.0 - eta {
                        band += w;
                    }
                }
            }
            (sum, band)
        })
        .collect();
    let (sum, band) = slabs.iter().fold((0.0, 0.0), |(a, b), (s, bd)| (a + s, b + bd));
    (sum * cell, band * cell)
}
