//! Maximal central sections, intersection bodies and the radial metric.

use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bodies::{BodyFlags, StarBody};
use crate::error::{check_dim, usage, Error, Result};
use crate::measures::Density;
use crate::num_fmt;
use crate::quadrature::{integrate_section, Engine, Estimate, QuadScheme};
use crate::sphere::{self, CompassConfig};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrthantRestrict {
    /// Restrict when the body is unconditional and the density sign-invariant.
    #[default]
    Auto,
    On,
    Off,
}

/// Settings of the multi-start search, config form
/// `{starts, ascents, max_iters, step_init, step_min, orthant_restrict}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptConfig {
    /// Number of starting directions; `8(n+1)` when absent.
    pub starts: Option<usize>,
    /// How many of the best starts are refined by compass search.
    pub ascents: usize,
    pub max_iters: usize,
    pub step_init: f64,
    pub step_min: f64,
    pub orthant_restrict: OrthantRestrict,
    pub seed: u64,
    /// Monte Carlo samples per objective evaluation during the search; the
    /// winner is re-evaluated with the full scheme. Defaults to
    /// `min(mc_samples, 4000)`.
    pub search_mc_samples: Option<usize>,
}

impl Default for OptConfig {
    fn default() -> Self {
        Self {
            starts: None,
            ascents: 4,
            max_iters: 200,
            step_init: 0.25,
            step_min: 1e-4,
            orthant_restrict: OrthantRestrict::Auto,
            seed: 0x0517,
            search_mc_samples: None,
        }
    }
}

impl OptConfig {
    pub fn starts_for(&self, n: usize) -> usize {
        self.starts.unwrap_or(8 * (n + 1))
    }

    pub fn validate(&self) -> Result<()> {
        if self.starts == Some(0) || self.ascents == 0 || self.max_iters == 0 || self.search_mc_samples == Some(0) {
            return usage("starts, ascents and max_iters must be at least 1");
        }
        if !(self.step_min > 0.0 && self.step_init >= self.step_min) {
            return usage("need 0 < step_min <= step_init");
        }
        Ok(())
    }

    fn compass(&self) -> CompassConfig {
        CompassConfig {
            step_init: self.step_init,
            step_min: self.step_min,
            max_iters: self.max_iters,
            rotations: 1,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MaxSectionResult {
    #[serde(with = "num_fmt::sci_vec")]
    pub xi_star: Vec<f64>,
    pub value: Estimate,
    pub starts: usize,
    /// Best value reached from each start, in start order.
    #[serde(with = "num_fmt::sci_vec")]
    pub trace: Vec<f64>,
    pub orthant_restricted: bool,
    /// Always true: the search certifies only a lower bound on the maximum.
    pub lower_bound: bool,
}

/// Sign-canonical representative of `±xi`: the first nonzero entry is positive.
fn canonical(mut xi: Vec<f64>) -> Vec<f64> {
    if xi.iter().find(|v| **v != 0.0).is_some_and(|v| *v < 0.0) {
        xi.iter_mut().for_each(|v| *v = -*v);
    }
    xi
}

fn start_directions(n: usize, count: usize, orthant: bool, seed: u64) -> Vec<Vec<f64>> {
    let mut starts: Vec<Vec<f64>> = (0..n).map(|i| sphere::coordinate(n, i)).collect();
    if orthant {
        starts.push(vec![1.0 / (n as f64).sqrt(); n]);
    } else {
        starts.extend(sphere::diagonal_directions(n, count.saturating_sub(n).div_ceil(2)));
    }
    let mut i = 0;
    while starts.len() < count {
        let mut u = sphere::random_unit(&mut sphere::stream_rng(seed, i), n);
        if orthant {
            u.iter_mut().for_each(|v| *v = v.abs());
        }
        starts.push(canonical(u));
        i += 1;
    }
    starts.truncate(count);
    starts
}

/// Best of `candidates` by value, ties going to the lexicographically smallest point.
fn best_of(candidates: &[(Vec<f64>, f64)]) -> usize {
    let mut best = 0;
    for (i, (x, v)) in candidates.iter().enumerate().skip(1) {
        let (bx, bv) = &candidates[best];
        if v > bv || (v == bv && sphere::lex_less(x, bx)) {
            best = i;
        }
    }
    best
}

/// Multi-start compass maximization of `f` over `S^{n-1}`.
///
/// Returns the best point, its value and the per-start trace. `f` may fail;
/// the first error aborts the search.
pub(crate) fn maximize_on_sphere<F>(n: usize, cfg: &OptConfig, orthant: bool, f: F) -> Result<(Vec<f64>, f64, Vec<f64>)>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    cfg.validate()?;
    let starts = start_directions(n, cfg.starts_for(n), orthant, cfg.seed);
    let initial: Vec<f64> = starts.iter().map(|s| f(s)).collect::<Result<_>>()?;
    let mut order: Vec<usize> = (0..starts.len()).collect();
    order.sort_by(|&a, &b| {
        initial[b]
            .total_cmp(&initial[a])
            .then_with(|| if sphere::lex_less(&starts[a], &starts[b]) { std::cmp::Ordering::Less } else { std::cmp::Ordering::Greater })
    });
    let chosen: Vec<usize> = order.into_iter().take(cfg.ascents).collect();
    let compass = cfg.compass();
    let ascended: Vec<Result<(usize, Vec<f64>, f64)>> = chosen
        .par_iter()
        .map(|&i| {
            let failure: RefCell<Option<Error>> = RefCell::new(None);
            let result = sphere::compass_ascent(&starts[i], initial[i], &compass, orthant, |x| {
                if failure.borrow().is_some() {
                    return f64::NEG_INFINITY;
                }
                f(x).unwrap_or_else(|e| {
                    *failure.borrow_mut() = Some(e);
                    f64::NEG_INFINITY
                })
            });
            match failure.into_inner() {
                Some(e) => Err(e),
                None => Ok((i, canonical(result.point), result.value)),
            }
        })
        .collect();
    let mut trace = initial;
    let mut candidates: Vec<(Vec<f64>, f64)> = starts.into_iter().map(canonical).zip(trace.iter().copied()).collect();
    for a in ascended {
        let (i, point, value) = a?;
        trace[i] = trace[i].max(value);
        if value >= candidates[i].1 {
            candidates[i] = (point, value);
        }
    }
    let best = best_of(&candidates);
    let (xi, value) = candidates.swap_remove(best);
    Ok((xi, value, trace))
}

/// Multi-start search for `max_xi mu(L ∩ xi^⊥)`.
///
/// The returned value is a lower bound on the true maximum. With the Monte
/// Carlo engine the search runs on a cheaper scheme (fewer samples, 16 radial
/// nodes) and the winning direction is re-evaluated with the full scheme and a
/// fresh seed, so the reported value is not biased upwards by the selection.
pub fn max_section(body: &StarBody, density: &Density, scheme: &QuadScheme, opt: &OptConfig) -> Result<MaxSectionResult> {
    let n = body.dim();
    if n < 2 {
        return usage("sections need dimension at least 2");
    }
    check_dim(n, density.dim())?;
    let orthant = use_orthant(opt, body.flags().is_unconditional, density.is_sign_invariant());
    max_objective(n, scheme, opt, orthant, |xi, s| integrate_section(body, density, xi, s))
}

pub(crate) fn use_orthant(opt: &OptConfig, unconditional: bool, sign_invariant: bool) -> bool {
    match opt.orthant_restrict {
        OrthantRestrict::On => true,
        OrthantRestrict::Off => false,
        OrthantRestrict::Auto => unconditional && sign_invariant,
    }
}

/// Multi-start maximization of a section-type objective `eval(xi, scheme)`,
/// with the Monte Carlo economies of [`max_section`].
pub(crate) fn max_objective<F>(n: usize, scheme: &QuadScheme, opt: &OptConfig, orthant: bool, eval: F) -> Result<MaxSectionResult>
where
    F: Fn(&[f64], &QuadScheme) -> Result<Estimate> + Sync,
{
    let search = match scheme.engine {
        Engine::MonteCarlo => QuadScheme {
            mc_samples: opt.search_mc_samples.unwrap_or(scheme.mc_samples.min(4000)),
            radial_nodes: scheme.radial_nodes.min(16),
            ..scheme.clone()
        },
        _ => scheme.clone(),
    };
    let (xi_star, _, trace) = maximize_on_sphere(n, opt, orthant, |xi| Ok(eval(xi, &search)?.value))?;
    let value = match scheme.engine {
        Engine::MonteCarlo => eval(&xi_star, &scheme.with_seed(scheme.seed ^ 0x9e37_79b9_7f4a_7c15))?,
        _ => eval(&xi_star, scheme)?,
    };
    Ok(MaxSectionResult {
        xi_star,
        value,
        starts: trace.len(),
        trace,
        orthant_restricted: orthant,
        lower_bound: true,
    })
}

type SectionCache = Mutex<HashMap<Vec<i64>, f64>>;

/// The intersection body `I L` with `rho_{IL}(theta) = |L ∩ theta^⊥|`.
///
/// Radial values are computed lazily with `scheme` and cached per direction.
/// Flags: intersection body, not known to be convex, unconditional when `L` is.
pub fn intersection_body_of(body: &StarBody, scheme: &QuadScheme) -> Result<StarBody> {
    let n = body.dim();
    if n < 2 {
        return usage("intersection bodies need dimension at least 2");
    }
    scheme.validate()?;
    let base = body.clone();
    let scheme = scheme.clone();
    let lebesgue = Density::lebesgue(n);
    let cache: Arc<SectionCache> = Arc::default();
    let flags = BodyFlags {
        is_convex: false,
        is_unconditional: body.flags().is_unconditional,
        is_intersection_body: true,
    };
    StarBody::custom(n, format!("I({})", body.label()), flags, move |x| {
        let r = sphere::norm2(x);
        if r == 0.0 {
            return 0.0;
        }
        let theta = canonical(x.iter().map(|v| v / r).collect());
        let key: Vec<i64> = theta.iter().map(|v| (v * 1e12).round() as i64).collect();
        if let Some(area) = cache.lock().unwrap().get(&key) {
            return r / area;
        }
        let area = integrate_section(&base, &lebesgue, &theta, &scheme).map_or(f64::NAN, |e| e.value);
        cache.lock().unwrap().insert(key, area);
        r / area
    })
}

/// Directions used by [`radial_distance`]: `random` seeded uniform directions
/// plus all coordinate directions and up to `diagonals` sign diagonals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DirectionSample {
    pub random: usize,
    pub diagonals: usize,
    pub seed: u64,
}

impl Default for DirectionSample {
    fn default() -> Self {
        Self {
            random: 4096,
            diagonals: 1024,
            seed: 0xd15,
        }
    }
}

impl DirectionSample {
    pub fn directions(&self, n: usize) -> Vec<Vec<f64>> {
        let mut dirs: Vec<Vec<f64>> = (0..n).map(|i| sphere::coordinate(n, i)).collect();
        dirs.extend(sphere::diagonal_directions(n, self.diagonals));
        dirs.extend(sphere::seeded_directions(self.seed, n, self.random).chunks(n).map(<[f64]>::to_vec));
        dirs
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RadialDistance {
    /// `max |rho_a - rho_b|` over the sample: a lower bound on the radial metric.
    #[serde(with = "num_fmt::sci")]
    pub value: f64,
    #[serde(with = "num_fmt::sci_vec")]
    pub argmax: Vec<f64>,
    pub directions: usize,
    pub lower_bound: bool,
}

pub fn radial_distance(a: &StarBody, b: &StarBody, sample: &DirectionSample) -> Result<RadialDistance> {
    check_dim(a.dim(), b.dim())?;
    let dirs = sample.directions(a.dim());
    let gaps: Vec<f64> = dirs
        .par_iter()
        .map(|u| (a.radial_unchecked(u) - b.radial_unchecked(u)).abs())
        .collect();
    if let Some(bad) = gaps.iter().position(|g| !g.is_finite()) {
        return Err(Error::Numeric(format!("radial functions are not finite at {:?}", dirs[bad])));
    }
    let mut best = 0;
    for (i, g) in gaps.iter().enumerate() {
        if *g > gaps[best] {
            best = i;
        }
    }
    Ok(RadialDistance {
        value: gaps[best],
        argmax: dirs[best].clone(),
        directions: dirs.len(),
        lower_bound: true,
    })
}
