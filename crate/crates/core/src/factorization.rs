//! Diagonal factorizations of unconditional bodies: the Lozanovskii box,
//! inscribed diagonal ellipsoids, volume ratios and Mahler volumes.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bodies::{DiagonalMap, SearchConfig, StarBody};
use crate::constants::ball_volume;
use crate::error::{check_dim, usage, Error, Result};
use crate::num_fmt;
use crate::quadrature::{volume, Estimate, QuadScheme};
use crate::sphere::{self, CompassConfig};

/// Default tolerance of the coordinate-ascent solvers.
pub const DEFAULT_TOL: f64 = 1e-10;
/// Sweep limit of the coordinate-ascent solvers.
pub const MAX_SWEEPS: usize = 500;

/// Step used for central differences in log coordinates.
const FD_STEP: f64 = 1e-6;
const GOLDEN: f64 = 0.618_033_988_749_894_9;

/// Maximizer of `f` on `[a, b]` by golden-section search, assuming unimodality.
fn golden_max(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64, iters: usize) -> (f64, f64) {
    let mut c = b - GOLDEN * (b - a);
    let mut d = a + GOLDEN * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..iters {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - GOLDEN * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + GOLDEN * (b - a);
            fd = f(d);
        }
    }
    if fc >= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Step `s` maximizing the concave function `phi(s)`, found by bracketing and
/// bisection on the sign of a central difference, then polished by golden
/// section near the root (which handles kinks).
fn line_search(phi: &impl Fn(f64) -> f64, h: f64) -> Result<f64> {
    let slope = |s: f64| (phi(s + h) - phi(s - h)) / (2.0 * h);
    let d0 = slope(0.0);
    if d0 == 0.0 {
        return Ok(0.0);
    }
    let dir = d0.signum();
    let (mut lo, mut step) = (0.0, 0.5);
    let mut hi = dir * step;
    while slope(hi) * dir > 0.0 {
        lo = hi;
        step *= 2.0;
        if step > 1e3 {
            return Err(Error::Numeric("line search did not find a bracket; body may be unbounded".into()));
        }
        hi = dir * step;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi || (hi - lo).abs() < 1e-14 {
            break;
        }
        if slope(mid) * dir > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let root = 0.5 * (lo + hi);
    let at_root = phi(root);
    let (g, fg) = golden_max(phi, root - 4.0 * h, root + 4.0 * h, 80);
    let noise = 1e-15 * at_root.abs().max(1.0);
    Ok(if fg > at_root + noise { g } else { root })
}

/// Coordinate ascent on a concave `f` of `n` variables. Stops when a sweep
/// changes `f` by at most `tol` (relative) and moves no coordinate by more
/// than `step_tol`.
fn coordinate_ascent(
    mut u: Vec<f64>,
    f: &impl Fn(&[f64]) -> f64,
    line: impl Fn(&dyn Fn(f64) -> f64) -> Result<f64>,
    tol: f64,
    step_tol: f64,
) -> Result<(Vec<f64>, usize)> {
    let mut value = f(&u);
    for sweep in 1..=MAX_SWEEPS {
        let before = value;
        let mut moved: f64 = 0.0;
        for i in 0..u.len() {
            let phi = |s: f64| {
                let mut v = u.clone();
                v[i] += s;
                f(&v)
            };
            let s = line(&phi)?;
            let candidate = phi(s);
            if candidate >= value {
                u[i] += s;
                value = candidate;
                moved = moved.max(s.abs());
            }
        }
        if !value.is_finite() {
            return Err(Error::Numeric("coordinate ascent produced a non-finite objective".into()));
        }
        if (value - before).abs() <= tol * value.abs().max(1.0) && moved <= step_tol {
            return Ok((u, sweep));
        }
    }
    Ok((u, MAX_SWEEPS))
}

/// The diagonal map `T` of largest determinant with `T(B_inf^n) ⊂ L`, i.e. the
/// maximizer of `sum log t_i` subject to `||t||_L <= 1`.
///
/// Works in log coordinates on the scale-free objective
/// `F(u) = sum u_i - n log ||e^u||_L`, which is concave for unconditional convex
/// `L`, and returns `t = e^u / ||e^u||_L`. Starts from the axis radial values.
pub fn lozanovskii_box(body: &StarBody, tol: f64) -> Result<DiagonalMap> {
    body.require_unconditional_convex("lozanovskii_box")?;
    let n = body.dim();
    let start: Vec<f64> = (0..n).map(|i| body.radial_unchecked(&sphere::coordinate(n, i))).collect();
    if start.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
        return Err(Error::Numeric(format!("no interior starting box for {}", body.label())));
    }
    lozanovskii_box_from(body, &start, tol)
}

/// [`lozanovskii_box`] from a given positive starting corner.
pub fn lozanovskii_box_from(body: &StarBody, start: &[f64], tol: f64) -> Result<DiagonalMap> {
    body.require_unconditional_convex("lozanovskii_box")?;
    check_dim(body.dim(), start.len())?;
    if start.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
        return usage("starting corner must be positive");
    }
    if !(tol > 0.0) {
        return usage("tolerance must be positive");
    }
    let n = body.dim() as f64;
    let objective = |u: &[f64]| {
        let corner: Vec<f64> = u.iter().map(|v| v.exp()).collect();
        u.iter().sum::<f64>() - n * body.gauge(&corner).ln()
    };
    let u0: Vec<f64> = start.iter().map(|t| t.ln()).collect();
    let (u, _) = coordinate_ascent(u0, &objective, |phi| line_search(&phi, FD_STEP), tol, 10.0 * tol)?;
    normalized_corner(body, &u)
}

fn normalized_corner(body: &StarBody, u: &[f64]) -> Result<DiagonalMap> {
    let corner: Vec<f64> = u.iter().map(|v| v.exp()).collect();
    let g = body.gauge(&corner);
    DiagonalMap::new(corner.iter().map(|c| c / g).collect())
}

/// Numerical check of `T(B_inf^n) ⊂ L ⊂ n T(B_1^n)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SandwichReport {
    pub t: DiagonalMap,
    pub inner_ok: bool,
    /// `||t||_L`; the whole box is inside `L` when this is at most one.
    #[serde(with = "num_fmt::sci")]
    pub inner_margin: f64,
    /// Largest `sum |x_i| / t_i` found over boundary points `x` of `L`: a lower
    /// bound on the true maximum.
    #[serde(with = "num_fmt::sci")]
    pub outer_max: f64,
    #[serde(with = "num_fmt::sci_vec")]
    pub outer_argmax: Vec<f64>,
    pub outer_ok: bool,
    pub probes: usize,
}

impl SandwichReport {
    pub fn ok(&self) -> bool {
        self.inner_ok && self.outer_ok
    }
}

/// Checks the inner box by its corner and the outer cross-polytope by probing
/// `probes` boundary directions plus coordinate and diagonal ones, then
/// refining the eight best by compass search.
pub fn verify_sandwich(body: &StarBody, t: &DiagonalMap, probes: usize, seed: u64) -> Result<SandwichReport> {
    body.require_unconditional_convex("verify_sandwich")?;
    let n = body.dim();
    check_dim(n, t.dim())?;
    let inner_margin = body.gauge(t.diag());
    let outer = |theta: &[f64]| {
        let rho = body.radial_unchecked(theta);
        theta.iter().zip(t.diag()).map(|(x, ti)| rho * x.abs() / ti).sum::<f64>()
    };
    let mut dirs: Vec<Vec<f64>> = (0..n).map(|i| sphere::coordinate(n, i)).collect();
    dirs.push(vec![1.0 / (n as f64).sqrt(); n]);
    dirs.extend(
        sphere::seeded_directions(seed, n, probes)
            .chunks(n)
            .map(|u| u.iter().map(|v| v.abs()).collect::<Vec<f64>>()),
    );
    let scores: Vec<f64> = dirs.par_iter().map(|d| outer(d)).collect();
    let mut order: Vec<usize> = (0..dirs.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let cfg = CompassConfig {
        step_init: 0.1,
        step_min: 1e-10,
        max_iters: 400,
        rotations: 4,
    };
    let refined: Vec<(f64, Vec<f64>)> = order
        .iter()
        .take(8)
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&&i| {
            let a = sphere::compass_ascent(&dirs[i], scores[i], &cfg, true, outer);
            (a.value, a.point)
        })
        .collect();
    let (mut outer_max, mut best_dir) = (scores[order[0]], dirs[order[0]].clone());
    for (v, p) in refined {
        if v > outer_max {
            outer_max = v;
            best_dir = p;
        }
    }
    let rho = body.radial_unchecked(&best_dir);
    Ok(SandwichReport {
        t: t.clone(),
        inner_ok: inner_margin <= 1.0 + 1e-9,
        inner_margin,
        outer_max,
        outer_argmax: best_dir.iter().map(|v| rho * v).collect(),
        outer_ok: outer_max <= n as f64 * (1.0 + 1e-9),
        probes: dirs.len(),
    })
}

/// `max ||a ∘ theta||_L` over unit `theta` in the positive orthant, by a fixed
/// probe set refined with compass search. Used as the containment functional
/// of the diagonal ellipsoid `{sum (x_i / a_i)^2 <= 1}`.
struct Containment<'a> {
    body: &'a StarBody,
    probes: Vec<Vec<f64>>,
    cfg: CompassConfig,
}

impl<'a> Containment<'a> {
    fn new(body: &'a StarBody, probes: usize) -> Self {
        let n = body.dim();
        let mut dirs: Vec<Vec<f64>> = (0..n).map(|i| sphere::coordinate(n, i)).collect();
        dirs.push(vec![1.0 / (n as f64).sqrt(); n]);
        dirs.extend(
            sphere::seeded_directions(0xe111, n, probes)
                .chunks(n)
                .map(|u| u.iter().map(|v| v.abs()).collect::<Vec<f64>>()),
        );
        Self {
            body,
            probes: dirs,
            cfg: CompassConfig {
                step_init: 0.05,
                step_min: 1e-9,
                max_iters: 300,
                rotations: 4,
            },
        }
    }

    fn eval(&self, a: &[f64]) -> f64 {
        let f = |theta: &[f64]| {
            let x: Vec<f64> = theta.iter().zip(a).map(|(t, ai)| t * ai).collect();
            self.body.gauge(&x)
        };
        let mut scored: Vec<(f64, usize)> = self.probes.iter().enumerate().map(|(i, p)| (f(p), i)).collect();
        scored.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)));
        scored
            .iter()
            .take(3)
            .map(|&(v, i)| sphere::compass_ascent(&self.probes[i], v, &self.cfg, true, f).value)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Semi-axes of a large axis-parallel ellipsoid inscribed in an unconditional
/// convex body: the maximizer of `sum log a_i` subject to
/// `max_theta ||a ∘ theta||_L <= 1`. The result is feasible with respect to
/// the sampled containment check; maximality is heuristic.
pub fn john_diagonal_ellipsoid(body: &StarBody, tol: f64) -> Result<Vec<f64>> {
    body.require_unconditional_convex("john_diagonal_ellipsoid")?;
    if !(tol > 0.0) {
        return usage("tolerance must be positive");
    }
    let n = body.dim();
    let containment = Containment::new(body, 512);
    let objective = |v: &[f64]| {
        let a: Vec<f64> = v.iter().map(|x| x.exp()).collect();
        v.iter().sum::<f64>() - n as f64 * containment.eval(&a).ln()
    };
    let v0: Vec<f64> = (0..n).map(|i| body.radial_unchecked(&sphere::coordinate(n, i)).ln()).collect();
    if v0.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric(format!("no interior starting ellipsoid for {}", body.label())));
    }
    let line = |phi: &dyn Fn(f64) -> f64| -> Result<f64> {
        let (mut a, mut b) = (-1.0, 1.0);
        while phi(a) > phi(0.5 * a) && a > -60.0 {
            a *= 2.0;
        }
        while phi(b) > phi(0.5 * b) && b < 60.0 {
            b *= 2.0;
        }
        let (s, fs) = golden_max(&phi, a, b, 90);
        Ok(if fs > phi(0.0) { s } else { 0.0 })
    };
    let (v, _) = coordinate_ascent(v0, &objective, line, tol, 1e-6)?;
    let a: Vec<f64> = v.iter().map(|x| x.exp()).collect();
    let scale = containment.eval(&a);
    Ok(a.iter().map(|x| x / scale).collect())
}

/// `|K| |K°|` with the polar from `search_cfg`; relative errors add.
pub fn mahler_volume(body: &StarBody, scheme: &QuadScheme, search_cfg: &SearchConfig) -> Result<Estimate> {
    body.require_convex("mahler_volume")?;
    let polar = body.polar(search_cfg)?;
    Ok(volume(body, scheme)?.times(&volume(&polar, scheme)?))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VolumeRatioReport {
    #[serde(with = "num_fmt::sci_vec")]
    pub semi_axes: Vec<f64>,
    pub volume: Estimate,
    #[serde(with = "num_fmt::sci")]
    pub ellipsoid_volume: f64,
    /// `(|K| / |E|)^(1/n)`: an upper bound on the volume ratio.
    #[serde(with = "num_fmt::sci")]
    pub vr_upper: f64,
    pub mahler: Estimate,
    /// `|K||K°| / |B_2^n|^2`.
    #[serde(with = "num_fmt::sci")]
    pub santalo_ratio: f64,
    /// `n (|K||K°|)^(1/n)`, reported only.
    #[serde(with = "num_fmt::sci")]
    pub mahler_root_times_n: f64,
}

pub fn volume_ratio_report(body: &StarBody, scheme: &QuadScheme) -> Result<VolumeRatioReport> {
    body.require_unconditional_convex("volume_ratio_report")?;
    let n = body.dim();
    let semi_axes = john_diagonal_ellipsoid(body, DEFAULT_TOL)?;
    let ellipsoid_volume = ball_volume(n) * semi_axes.iter().product::<f64>();
    let vol = volume(body, scheme)?;
    let polar = body.polar(&SearchConfig::default())?;
    let mahler = vol.times(&volume(&polar, scheme)?);
    let nf = n as f64;
    Ok(VolumeRatioReport {
        vr_upper: (vol.value / ellipsoid_volume).powf(1.0 / nf),
        santalo_ratio: mahler.value / ball_volume(n).powi(2),
        mahler_root_times_n: nf * mahler.value.powf(1.0 / nf),
        semi_axes,
        volume: vol,
        ellipsoid_volume,
        mahler,
    })
}
