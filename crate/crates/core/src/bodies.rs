//! Origin-symmetric star bodies described by their Minkowski functional.
//!
//! A [`StarBody`] carries an analytic gauge `x -> ||x||_K` together with
//! declared structural flags. The flags are never inferred; the witness
//! operations ([`StarBody::unconditionality_witness`], [`StarBody::invariant_report`])
//! exist to catch a wrong declaration.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, usage, Error, Result};
use crate::sphere::{self, CompassConfig};

pub type GaugeFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// Structural facts about a body, declared by whoever constructs it.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BodyFlags {
    pub is_convex: bool,
    pub is_unconditional: bool,
    pub is_intersection_body: bool,
}

/// Positive diagonal linear operator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagonalMap(#[serde(with = "crate::num_fmt::sci_vec")] Vec<f64>);

impl DiagonalMap {
    pub fn new(diag: Vec<f64>) -> Result<Self> {
        if diag.is_empty() {
            return usage("diagonal map needs at least one entry");
        }
        if diag.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return usage(format!("diagonal entries must be finite and positive: {diag:?}"));
        }
        Ok(Self(diag))
    }

    pub fn diag(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn determinant(&self) -> f64 {
        self.0.iter().product()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.0).map(|(a, t)| a * t).collect()
    }

    pub fn apply_inverse(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.0).map(|(a, t)| a / t).collect()
    }

    pub fn scaled(&self, s: f64) -> Result<Self> {
        Self::new(self.0.iter().map(|t| t * s).collect())
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&nalgebra::DVector::from_vec(self.0.clone()))
    }
}

/// Budget for support-function maximization in searched polars.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    pub starts: usize,
    pub ascents: usize,
    pub max_iters: usize,
    pub step_init: f64,
    pub step_min: f64,
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            starts: 64,
            ascents: 4,
            max_iters: 200,
            step_init: 0.25,
            step_min: 1e-9,
            seed: 0x5eed,
        }
    }
}

impl SearchConfig {
    pub(crate) fn compass(&self) -> CompassConfig {
        CompassConfig {
            step_init: self.step_init,
            step_min: self.step_min,
            max_iters: self.max_iters,
            rotations: 8,
        }
    }
}

/// Support function `h_K(x) = max_{y in K} <x, y>` evaluated by multi-start
/// compass ascent over `y = rho_K(theta) theta`.
struct SupportSearch {
    base: StarBody,
    cfg: SearchConfig,
    starts: Vec<Vec<f64>>,
}

impl SupportSearch {
    fn new(base: StarBody, cfg: SearchConfig) -> Self {
        let n = base.dim;
        let mut starts = Vec::with_capacity(cfg.starts.max(2 * n));
        for i in 0..n {
            let e = sphere::coordinate(n, i);
            starts.push(e.iter().map(|v| -v).collect());
            starts.push(e);
        }
        for d in sphere::diagonal_directions(n, cfg.starts / 4) {
            starts.push(d.iter().map(|v| -v).collect());
            starts.push(d);
        }
        let mut i = 0;
        while starts.len() < cfg.starts {
            starts.push(sphere::random_unit(&mut sphere::stream_rng(cfg.seed, i), n));
            i += 1;
        }
        Self { base, cfg, starts }
    }

    fn eval(&self, x: &[f64]) -> f64 {
        let Some(dir) = sphere::normalized(x) else { return 0.0 };
        let objective = |theta: &[f64]| self.base.radial_unchecked(theta) * sphere::dot(x, theta);
        let mut scored: Vec<(f64, &[f64])> = self
            .starts
            .iter()
            .map(|s| s.as_slice())
            .chain(std::iter::once(dir.as_slice()))
            .map(|s| (objective(s), s))
            .collect();
        scored.sort_by(|a, b| b.0.total_cmp(&a.0));
        let compass = self.cfg.compass();
        scored
            .iter()
            .take(self.cfg.ascents.max(1))
            .map(|(v, s)| sphere::compass_ascent(s, *v, &compass, false, objective).value)
            .fold(f64::NEG_INFINITY, f64::max)
            .max(0.0)
    }
}

#[derive(Clone)]
enum Gauge {
    /// Weighted `l_p` gauge `(sum |x_i / w_i|^p)^(1/p)`; stores `1/w_i`.
    Lp { p: f64, inv_weights: Vec<f64> },
    /// `||x||_{A B} = ||A^{-1} x||_B`.
    Image {
        matrix: DMatrix<f64>,
        inverse: DMatrix<f64>,
        base: Arc<StarBody>,
    },
    Support(Arc<SupportSearch>),
    Custom(Arc<GaugeFn>),
}

/// An origin-symmetric star body in `R^n`.
#[derive(Clone)]
pub struct StarBody {
    dim: usize,
    gauge: Gauge,
    flags: BodyFlags,
    label: String,
}

impl fmt::Debug for StarBody {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StarBody")
            .field("label", &self.label)
            .field("dim", &self.dim)
            .field("flags", &self.flags)
            .finish()
    }
}

fn fmt_num(x: f64) -> String {
    if x.is_infinite() {
        "inf".into()
    } else {
        format!("{x}")
    }
}

impl StarBody {
    /// Unit ball of `l_p^n`, optionally stretched by `weights` along the axes.
    ///
    /// `p = f64::INFINITY` gives the cube. Bodies with `p < 1` are star bodies
    /// but not convex.
    pub fn lp_ball(n: usize, p: f64, weights: Option<&[f64]>) -> Result<Self> {
        if n == 0 {
            return usage("dimension must be at least 1");
        }
        if !(p > 0.0) {
            return usage(format!("p must be positive or infinite, got {p}"));
        }
        let inv_weights = match weights {
            Some(w) => {
                check_dim(n, w.len())?;
                if w.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                    return usage(format!("weights must be finite and positive: {w:?}"));
                }
                w.iter().map(|v| 1.0 / v).collect()
            }
            None => vec![1.0; n],
        };
        let flags = BodyFlags {
            is_convex: p >= 1.0,
            is_unconditional: true,
            is_intersection_body: p == 1.0 || p == 2.0,
        };
        let mut label = format!("B_{}^{}", fmt_num(p), n);
        if let Some(w) = weights {
            if w.iter().any(|v| *v != 1.0) {
                let ws: Vec<String> = w.iter().map(|v| fmt_num(*v)).collect();
                label = format!("diag({})·{label}", ws.join(","));
            }
        }
        Ok(Self {
            dim: n,
            gauge: Gauge::Lp { p, inv_weights },
            flags,
            label,
        })
    }

    pub fn euclidean_ball(n: usize) -> Self {
        Self::lp_ball(n, 2.0, None).expect("n >= 1")
    }

    pub fn cross_polytope(n: usize) -> Self {
        Self::lp_ball(n, 1.0, None).expect("n >= 1")
    }

    pub fn cube(n: usize) -> Self {
        Self::lp_ball(n, f64::INFINITY, None).expect("n >= 1")
    }

    /// Axis-aligned box `[-h_1, h_1] x ... x [-h_n, h_n]`.
    pub fn aligned_box(half_widths: &[f64]) -> Result<Self> {
        Self::lp_ball(half_widths.len(), f64::INFINITY, Some(half_widths))
    }

    /// A body given by an arbitrary gauge. The gauge must be even, positive away
    /// from the origin, and 1-homogeneous; `flags` are taken on trust.
    pub fn custom<F>(n: usize, label: impl Into<String>, flags: BodyFlags, gauge: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        if n == 0 {
            return usage("dimension must be at least 1");
        }
        Ok(Self {
            dim: n,
            gauge: Gauge::Custom(Arc::new(gauge)),
            flags,
            label: label.into(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn flags(&self) -> BodyFlags {
        self.flags
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Overrides the intersection-body declaration.
    pub fn with_intersection_flag(mut self, flag: bool) -> Self {
        self.flags.is_intersection_body = flag;
        self
    }

    /// `(p, weights)` when the body is a weighted `l_p` ball.
    pub fn lp_parameters(&self) -> Option<(f64, Vec<f64>)> {
        match &self.gauge {
            Gauge::Lp { p, inv_weights } => Some((*p, inv_weights.iter().map(|v| 1.0 / v).collect())),
            _ => None,
        }
    }

    /// `||x||_K` without a dimension check.
    pub fn gauge(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        match &self.gauge {
            Gauge::Lp { p, inv_weights } => lp_norm(*p, inv_weights, x),
            Gauge::Image { inverse, base, .. } => {
                let y: Vec<f64> = (0..self.dim)
                    .map(|i| (0..self.dim).map(|j| inverse[(i, j)] * x[j]).sum())
                    .collect();
                base.gauge(&y)
            }
            Gauge::Support(s) => s.eval(x),
            Gauge::Custom(f) => f(x),
        }
    }

    /// Minkowski functional `||x||_K = min{a >= 0 : x in aK}`.
    pub fn minkowski(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim, x.len())?;
        Ok(self.gauge(x))
    }

    /// `rho_K(theta) = 1 / ||theta||_K` without checks.
    pub fn radial_unchecked(&self, theta: &[f64]) -> f64 {
        1.0 / self.gauge(theta)
    }

    /// Radial function at a unit vector.
    pub fn radial(&self, theta: &[f64]) -> Result<f64> {
        check_dim(self.dim, theta.len())?;
        check_unit(theta)?;
        let g = self.gauge(theta);
        if !(g > 0.0 && g.is_finite()) {
            return Err(Error::Numeric(format!("gauge of {} is {g} at {theta:?}", self.label)));
        }
        Ok(1.0 / g)
    }

    /// Image `A K` under an invertible matrix. Unconditionality survives only
    /// for diagonal `A`.
    pub fn linear_image(&self, matrix: &DMatrix<f64>) -> Result<Self> {
        let n = self.dim;
        if matrix.nrows() != n || matrix.ncols() != n {
            return usage(format!(
                "matrix is {}x{}, body dimension is {n}",
                matrix.nrows(),
                matrix.ncols()
            ));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return usage("matrix has non-finite entries");
        }
        let sv = matrix.clone().singular_values();
        let smax = sv.max();
        let smin = sv.min();
        if !(smax > 0.0) || smin / smax < 1e-12 {
            return usage(format!("matrix is numerically singular (singular values {smin:e}..{smax:e})"));
        }
        let inverse = matrix
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Usage("matrix is not invertible".into()))?;
        let diagonal = (0..n).all(|i| (0..n).all(|j| i == j || matrix[(i, j)] == 0.0));
        let flags = BodyFlags {
            is_unconditional: self.flags.is_unconditional && diagonal,
            ..self.flags
        };
        let label = if diagonal {
            let d: Vec<String> = (0..n).map(|i| fmt_num(matrix[(i, i)])).collect();
            format!("diag({})·{}", d.join(","), self.label)
        } else {
            format!("M·{}", self.label)
        };
        let gauge = match &self.gauge {
            Gauge::Image {
                matrix: inner,
                inverse: inner_inv,
                base,
            } => Gauge::Image {
                matrix: matrix * inner,
                inverse: inner_inv * &inverse,
                base: base.clone(),
            },
            _ => Gauge::Image {
                matrix: matrix.clone(),
                inverse,
                base: Arc::new(self.clone()),
            },
        };
        Ok(Self {
            dim: n,
            gauge,
            flags,
            label,
        })
    }

    /// Image under a positive diagonal map.
    pub fn diagonal_image(&self, map: &DiagonalMap) -> Result<Self> {
        check_dim(self.dim, map.dim())?;
        self.linear_image(&map.to_matrix())
    }

    /// Dilate by `s > 0`.
    pub fn scaled(&self, s: f64) -> Result<Self> {
        if !(s > 0.0 && s.is_finite()) {
            return usage(format!("scale must be positive, got {s}"));
        }
        let label = format!("{}·{}", fmt_num(s), self.label);
        Ok(self.diagonal_image(&DiagonalMap::new(vec![s; self.dim])?)?.with_label(label))
    }

    /// Polar body `K° = {x : <x, y> <= 1 for all y in K}`.
    ///
    /// Weighted `l_p` balls and their linear images get exact dual gauges;
    /// anything else falls back to [`StarBody::polar_by_search`].
    pub fn polar(&self, cfg: &SearchConfig) -> Result<Self> {
        self.require_convex("polar")?;
        match &self.gauge {
            Gauge::Lp { p, inv_weights } => {
                let q = conjugate_exponent(*p);
                let weights: Vec<f64> = inv_weights.clone();
                let body = Self::lp_ball(self.dim, q, Some(&weights))?;
                let flags = BodyFlags {
                    is_unconditional: self.flags.is_unconditional,
                    ..body.flags
                };
                Ok(Self {
                    flags,
                    label: format!("({})°", self.label),
                    ..body
                })
            }
            Gauge::Image { matrix, base, .. } => {
                let base_polar = base.polar(cfg)?;
                let inverse_t = matrix.transpose();
                let matrix_inv_t = inverse_t
                    .clone()
                    .try_inverse()
                    .ok_or_else(|| Error::Numeric("matrix inverse failed".into()))?;
                let flags = BodyFlags {
                    is_convex: true,
                    is_unconditional: self.flags.is_unconditional,
                    is_intersection_body: base_polar.flags.is_intersection_body,
                };
                Ok(Self {
                    dim: self.dim,
                    gauge: Gauge::Image {
                        matrix: matrix_inv_t,
                        inverse: inverse_t,
                        base: Arc::new(base_polar),
                    },
                    flags,
                    label: format!("({})°", self.label),
                })
            }
            Gauge::Support(s) => Ok(s.base.clone()),
            Gauge::Custom(_) => self.polar_by_search(cfg),
        }
    }

    /// Polar body whose gauge is the support function of `self`, evaluated by
    /// multi-start compass ascent. Approximate: the computed support value is a
    /// lower bound, so the returned body slightly contains the true polar.
    pub fn polar_by_search(&self, cfg: &SearchConfig) -> Result<Self> {
        self.require_convex("polar")?;
        if cfg.starts == 0 || cfg.ascents == 0 {
            return usage("polar search needs at least one start and one ascent");
        }
        Ok(Self {
            dim: self.dim,
            gauge: Gauge::Support(Arc::new(SupportSearch::new(self.clone(), cfg.clone()))),
            flags: BodyFlags {
                is_convex: true,
                is_unconditional: self.flags.is_unconditional,
                is_intersection_body: false,
            },
            label: format!("({})°~", self.label),
        })
    }

    pub(crate) fn require_convex(&self, op: &str) -> Result<()> {
        if !self.flags.is_convex {
            return usage(format!("{op} requires a convex body; {} is not declared convex", self.label));
        }
        Ok(())
    }

    pub(crate) fn require_unconditional_convex(&self, op: &str) -> Result<()> {
        self.require_convex(op)?;
        if !self.flags.is_unconditional {
            return usage(format!(
                "{op} requires an unconditional body; {} is not declared unconditional",
                self.label
            ));
        }
        Ok(())
    }

    /// Samples `sample_count` unit points and random sign patterns and reports the
    /// largest change of the gauge under a sign flip.
    pub fn unconditionality_witness(&self, sample_count: usize, seed: u64) -> WitnessReport {
        let n = self.dim;
        let mut rng = sphere::stream_rng(seed, 0);
        let mut report = WitnessReport {
            samples: sample_count,
            max_deviation: 0.0,
            worst_point: vec![0.0; n],
            worst_signs: vec![1.0; n],
        };
        for _ in 0..sample_count {
            let x = sphere::random_unit(&mut rng, n);
            let signs: Vec<f64> = (0..n).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
            let flipped: Vec<f64> = x.iter().zip(&signs).map(|(a, s)| a * s).collect();
            let dev = (self.gauge(&flipped) - self.gauge(&x)).abs();
            if dev > report.max_deviation {
                report.max_deviation = dev;
                report.worst_point = x;
                report.worst_signs = signs;
            }
        }
        report
    }

    /// Largest observed violations of the gauge axioms on `samples` random points.
    pub fn invariant_report(&self, samples: usize, seed: u64) -> InvariantReport {
        let n = self.dim;
        let mut rng = sphere::stream_rng(seed, 1);
        let mut r = InvariantReport::default();
        r.min_gauge = f64::INFINITY;
        for _ in 0..samples {
            let x: Vec<f64> = sphere::random_unit(&mut rng, n)
                .into_iter()
                .map(|v| v * rng.random_range(0.1..3.0))
                .collect();
            let y: Vec<f64> = sphere::random_unit(&mut rng, n)
                .into_iter()
                .map(|v| v * rng.random_range(0.1..3.0))
                .collect();
            let gx = self.gauge(&x);
            let gy = self.gauge(&y);
            r.min_gauge = r.min_gauge.min(gx);
            let lambda: f64 = rng.random_range(-5.0..5.0);
            let lx: Vec<f64> = x.iter().map(|v| v * lambda).collect();
            let homog = (self.gauge(&lx) - lambda.abs() * gx).abs() / (lambda.abs() * gx).max(f64::MIN_POSITIVE);
            r.homogeneity = r.homogeneity.max(homog);
            let neg: Vec<f64> = x.iter().map(|v| -v).collect();
            r.symmetry = r.symmetry.max((self.gauge(&neg) - gx).abs());
            if self.flags.is_convex {
                let sum: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a + b).collect();
                r.triangle = r.triangle.max(self.gauge(&sum) - gx - gy);
            }
            if self.flags.is_unconditional {
                let flipped: Vec<f64> = x
                    .iter()
                    .map(|v| if rng.random::<bool>() { *v } else { -v })
                    .collect();
                r.sign_flip = r.sign_flip.max((self.gauge(&flipped) - gx).abs());
            }
            let theta = sphere::normalized(&x).unwrap();
            let rad = self.radial_unchecked(&theta) * self.gauge(&theta);
            r.radial_product = r.radial_product.max((rad - 1.0).abs());
        }
        r
    }
}

/// Result of [`StarBody::unconditionality_witness`].
#[derive(Clone, Debug, Serialize)]
pub struct WitnessReport {
    pub samples: usize,
    pub max_deviation: f64,
    pub worst_point: Vec<f64>,
    pub worst_signs: Vec<f64>,
}

/// Result of [`StarBody::invariant_report`]. All fields are worst observed
/// violations, except `min_gauge`.
#[derive(Clone, Debug, Default, Serialize)]
pub struct InvariantReport {
    pub homogeneity: f64,
    pub symmetry: f64,
    pub triangle: f64,
    pub sign_flip: f64,
    pub radial_product: f64,
    pub min_gauge: f64,
}

pub(crate) fn check_unit(theta: &[f64]) -> Result<()> {
    let r = sphere::norm2(theta);
    if (r - 1.0).abs() > 1e-12 {
        return usage(format!("expected a unit vector, |theta| = {r}"));
    }
    Ok(())
}

fn conjugate_exponent(p: f64) -> f64 {
    if p == 1.0 {
        f64::INFINITY
    } else if p.is_infinite() {
        1.0
    } else {
        p / (p - 1.0)
    }
}

fn lp_norm(p: f64, inv_weights: &[f64], x: &[f64]) -> f64 {
    let scaled = x.iter().zip(inv_weights).map(|(a, w)| (a * w).abs());
    if p.is_infinite() {
        return scaled.fold(0.0, f64::max);
    }
    if p == 1.0 {
        return scaled.sum();
    }
    let m = scaled.clone().fold(0.0, f64::max);
    if m == 0.0 {
        return 0.0;
    }
    if p == 2.0 {
        return m * scaled.map(|v| (v / m) * (v / m)).sum::<f64>().sqrt();
    }
    m * scaled.map(|v| (v / m).powf(p)).sum::<f64>().powf(1.0 / p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::dmatrix;
    use proptest::prelude::*;

    fn test_bodies() -> Vec<StarBody> {
        let shear = dmatrix![1.0, 0.5, 0.0; 0.0, 1.0, 0.0; 0.2, 0.0, 1.0];
        vec![
            StarBody::cross_polytope(3),
            StarBody::euclidean_ball(3),
            StarBody::cube(3),
            StarBody::lp_ball(3, 1.5, Some(&[1.0, 2.0, 0.5])).unwrap(),
            StarBody::lp_ball(3, 3.0, None).unwrap(),
            StarBody::lp_ball(3, 0.5, None).unwrap(),
            StarBody::cross_polytope(3).linear_image(&shear).unwrap(),
        ]
    }

    #[test]
    fn minkowski_examples() {
        let b1 = StarBody::cross_polytope(3);
        assert_relative_eq!(b1.minkowski(&[1.0, -2.0, 0.5]).unwrap(), 3.5);
        let sq = StarBody::cube(2);
        assert_relative_eq!(sq.minkowski(&[0.3, -0.9]).unwrap(), 0.9);
        let b2 = StarBody::euclidean_ball(4);
        assert_relative_eq!(b2.minkowski(&[1.0; 4]).unwrap(), 2.0, max_relative = 1e-15);
        assert_eq!(b2.minkowski(&[0.0; 4]).unwrap(), 0.0);
        assert!(matches!(b2.minkowski(&[1.0; 3]), Err(Error::Usage(_))));
    }

    #[test]
    fn radial_examples() {
        let s = 0.5f64.sqrt();
        assert_relative_eq!(StarBody::euclidean_ball(2).radial(&[s, s]).unwrap(), 1.0, max_relative = 1e-15);
        assert_relative_eq!(StarBody::cross_polytope(2).radial(&[s, s]).unwrap(), s, max_relative = 1e-15);
        let d = 1.0 / 3f64.sqrt();
        assert_relative_eq!(StarBody::cube(3).radial(&[d, d, d]).unwrap(), 3f64.sqrt(), max_relative = 1e-15);
        assert!(matches!(StarBody::cube(2).radial(&[1.0, 1.0]), Err(Error::Usage(_))));
    }

    #[test]
    fn lp_constructor_validation_and_flags() {
        assert!(StarBody::lp_ball(2, 0.0, None).is_err());
        assert!(StarBody::lp_ball(2, -1.0, None).is_err());
        assert!(StarBody::lp_ball(2, 2.0, Some(&[1.0, 0.0])).is_err());
        assert!(StarBody::lp_ball(2, 2.0, Some(&[1.0])).is_err());
        assert!(StarBody::lp_ball(0, 2.0, None).is_err());
        let f = StarBody::lp_ball(3, 1.0, None).unwrap().flags();
        assert!(f.is_convex && f.is_unconditional && f.is_intersection_body);
        let f = StarBody::lp_ball(3, 0.5, None).unwrap().flags();
        assert!(!f.is_convex && f.is_unconditional && !f.is_intersection_body);
        assert!(!StarBody::cube(3).flags().is_intersection_body);
        assert!(StarBody::cube(3).with_intersection_flag(true).flags().is_intersection_body);
        let bx = StarBody::lp_ball(2, f64::INFINITY, Some(&[2.0, 3.0])).unwrap();
        assert_relative_eq!(bx.minkowski(&[2.0, 3.0]).unwrap(), 1.0);
        assert_relative_eq!(bx.minkowski(&[-1.0, 0.0]).unwrap(), 0.5);
    }

    #[test]
    fn linear_images() {
        let b = StarBody::lp_ball(3, 1.5, None).unwrap();
        let id = DMatrix::<f64>::identity(3, 3);
        let img = b.linear_image(&id).unwrap();
        let mut rng = sphere::stream_rng(1, 0);
        for _ in 0..100 {
            let x = sphere::random_unit(&mut rng, 3);
            assert_relative_eq!(img.gauge(&x), b.gauge(&x), max_relative = 1e-14);
        }
        let ellipse = StarBody::euclidean_ball(2).linear_image(&dmatrix![2.0, 0.0; 0.0, 1.0]).unwrap();
        assert_relative_eq!(ellipse.minkowski(&[2.0, 0.0]).unwrap(), 1.0, max_relative = 1e-15);
        assert!(ellipse.flags().is_unconditional && ellipse.flags().is_intersection_body);
        let sheared = StarBody::cross_polytope(2).linear_image(&dmatrix![1.0, 1.0; 0.0, 1.0]).unwrap();
        assert!(!sheared.flags().is_unconditional);
        assert!(sheared.flags().is_convex);
        assert!(matches!(
            b.linear_image(&dmatrix![1.0, 2.0, 3.0; 2.0, 4.0, 6.0; 0.0, 0.0, 1.0]),
            Err(Error::Usage(_))
        ));
        assert!(b.linear_image(&DMatrix::identity(2, 2)).is_err());
    }

    #[test]
    fn image_composition() {
        let b = StarBody::lp_ball(3, 3.0, None).unwrap();
        let t = dmatrix![1.0, 0.3, 0.0; 0.0, 2.0, 0.1; -0.4, 0.0, 1.0];
        let s = dmatrix![0.5, 0.0, 0.2; 0.1, 1.0, 0.0; 0.0, 0.0, 3.0];
        let twice = b.linear_image(&t).unwrap().linear_image(&s).unwrap();
        let once = b.linear_image(&(&s * &t)).unwrap();
        let mut rng = sphere::stream_rng(2, 0);
        for _ in 0..200 {
            let x = sphere::random_unit(&mut rng, 3);
            assert_relative_eq!(twice.gauge(&x), once.gauge(&x), max_relative = 1e-10);
        }
    }

    #[test]
    fn exact_polars() {
        let cfg = SearchConfig::default();
        let mut rng = sphere::stream_rng(3, 0);
        let b1 = StarBody::cross_polytope(4);
        let p = b1.polar(&cfg).unwrap();
        for _ in 0..50 {
            let x = sphere::random_unit(&mut rng, 4);
            let linf = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            assert_relative_eq!(p.gauge(&x), linf, max_relative = 1e-15);
        }
        let b2 = StarBody::euclidean_ball(3);
        let p2 = b2.polar(&cfg).unwrap();
        let x = [0.3, -1.2, 2.0];
        assert_relative_eq!(p2.gauge(&x), b2.gauge(&x), max_relative = 1e-15);
        assert!(p2.flags().is_intersection_body);
        assert!(!p.flags().is_intersection_body);
        let ellipse = StarBody::euclidean_ball(2).linear_image(&dmatrix![2.0, 0.0; 0.0, 1.0]).unwrap();
        let ep = ellipse.polar(&cfg).unwrap();
        assert_relative_eq!(ep.minkowski(&[1.0, 0.0]).unwrap(), 2.0, max_relative = 1e-14);
        assert_relative_eq!(ep.minkowski(&[0.0, 1.0]).unwrap(), 1.0, max_relative = 1e-14);
        assert!(StarBody::lp_ball(2, 0.5, None).unwrap().polar(&cfg).is_err());
    }

    #[test]
    fn searched_polar_matches_exact() {
        let cfg = SearchConfig::default();
        let ellipse = StarBody::euclidean_ball(2).linear_image(&dmatrix![2.0, 0.0; 0.0, 1.0]).unwrap();
        let searched = ellipse.polar_by_search(&cfg).unwrap();
        assert_relative_eq!(searched.minkowski(&[1.0, 0.0]).unwrap(), 2.0, max_relative = 1e-12);
        let exact = ellipse.polar(&cfg).unwrap();
        let shear = dmatrix![1.0, 0.4, 0.0; 0.0, 1.0, 0.0; 0.3, 0.0, 1.2];
        // Searched support values are lower bounds; on polytopes the compass
        // search can stop short of a vertex along an edge ridge.
        for (body, tol) in [
            (StarBody::cross_polytope(3).linear_image(&shear).unwrap(), 1e-2),
            (StarBody::lp_ball(3, 3.0, Some(&[1.0, 2.0, 0.7])).unwrap(), 1e-8),
        ] {
            let e = body.polar(&cfg).unwrap();
            let s = body.polar_by_search(&cfg).unwrap();
            let mut rng = sphere::stream_rng(4, 0);
            for _ in 0..100 {
                let x = sphere::random_unit(&mut rng, 3);
                let (hs, he) = (s.gauge(&x), e.gauge(&x));
                assert!(hs <= he * (1.0 + 1e-12), "{hs} > {he}");
                assert!(hs >= he * (1.0 - tol), "{hs} vs {he}");
            }
        }
        let mut rng = sphere::stream_rng(5, 0);
        for _ in 0..50 {
            let x = sphere::random_unit(&mut rng, 2);
            assert_relative_eq!(searched.gauge(&x), exact.gauge(&x), max_relative = 1e-10);
        }
    }

    #[test]
    fn bipolar() {
        let cfg = SearchConfig::default();
        let mut rng = sphere::stream_rng(6, 0);
        for body in test_bodies().into_iter().filter(|b| b.flags().is_convex) {
            let pp = body.polar(&cfg).unwrap().polar(&cfg).unwrap();
            for _ in 0..100 {
                let x = sphere::random_unit(&mut rng, 3);
                assert_relative_eq!(pp.gauge(&x), body.gauge(&x), max_relative = 1e-6);
            }
        }
        // searched route: polar of a custom convex body, then back by search
        let custom = StarBody::custom(
            2,
            "opaque ellipse",
            BodyFlags { is_convex: true, ..Default::default() },
            |x| ((x[0] / 2.0).powi(2) + x[1] * x[1]).sqrt(),
        )
        .unwrap();
        let p = custom.polar(&cfg).unwrap();
        let pp = p.polar_by_search(&cfg).unwrap();
        for _ in 0..100 {
            let x = sphere::random_unit(&mut rng, 2);
            assert_relative_eq!(pp.gauge(&x), custom.gauge(&x), max_relative = 1e-6);
        }
    }

    #[test]
    fn witness() {
        for body in [StarBody::cross_polytope(3), StarBody::cube(4), StarBody::lp_ball(2, 1.5, None).unwrap()] {
            assert_eq!(body.unconditionality_witness(500, 9).max_deviation, 0.0);
        }
        let d = StarBody::cross_polytope(3)
            .diagonal_image(&DiagonalMap::new(vec![1.0, 2.0, 3.0]).unwrap())
            .unwrap();
        assert!(d.unconditionality_witness(500, 9).max_deviation < 1e-15);
        let shear = StarBody::cross_polytope(2).linear_image(&dmatrix![1.0, 1.0; 0.0, 1.0]).unwrap();
        assert!(shear.unconditionality_witness(100, 9).max_deviation > 0.1);
        // direct evaluation at (1, 1): gauge 1, flipped (1, -1) has gauge 3
        assert_relative_eq!(shear.gauge(&[1.0, 1.0]), 1.0);
        assert_relative_eq!(shear.gauge(&[1.0, -1.0]), 3.0);
    }

    #[test]
    fn gauge_axioms_hold_on_test_bodies() {
        for body in test_bodies() {
            let r = body.invariant_report(1000, 11);
            assert!(r.homogeneity < 1e-10, "{}: {r:?}", body.label());
            assert_eq!(r.symmetry, 0.0, "{}", body.label());
            assert!(r.min_gauge > 0.0);
            assert!(r.triangle < 1e-12, "{}: {r:?}", body.label());
            assert!(r.sign_flip < 1e-15, "{}: {r:?}", body.label());
            assert!(r.radial_product < 1e-10);
        }
    }

    #[test]
    fn diagonal_map() {
        assert!(DiagonalMap::new(vec![1.0, 0.0]).is_err());
        assert!(DiagonalMap::new(vec![]).is_err());
        let t = DiagonalMap::new(vec![2.0, 3.0]).unwrap();
        assert_eq!(t.determinant(), 6.0);
        assert_eq!(t.apply_inverse(&t.apply(&[1.0, -1.0])), vec![1.0, -1.0]);
    }

    proptest! {
        #[test]
        fn radial_times_gauge_is_one(seed in 0u64..1000, p in prop_oneof![Just(1.0), Just(2.0), Just(f64::INFINITY), 0.5f64..6.0]) {
            let body = StarBody::lp_ball(4, p, Some(&[1.0, 0.5, 2.0, 1.5])).unwrap();
            let theta = sphere::random_unit(&mut sphere::stream_rng(seed, 0), 4);
            let r = body.radial(&theta).unwrap();
            prop_assert!((r * body.gauge(&theta) - 1.0).abs() < 1e-10);
            let boundary: Vec<f64> = theta.iter().map(|t| t * r).collect();
            prop_assert!((body.gauge(&boundary) - 1.0).abs() < 1e-9);
        }

        #[test]
        fn homogeneous_and_even(x in proptest::collection::vec(-10.0f64..10.0, 3), lambda in -20.0f64..20.0) {
            let body = StarBody::lp_ball(3, 1.5, None).unwrap()
                .linear_image(&dmatrix![1.0, 0.2, 0.0; 0.0, 1.0, -0.3; 0.1, 0.0, 2.0]).unwrap();
            let g = body.gauge(&x);
            let neg: Vec<f64> = x.iter().map(|v| -v).collect();
            prop_assert_eq!(body.gauge(&neg), g);
            let lx: Vec<f64> = x.iter().map(|v| v * lambda).collect();
            prop_assert!((body.gauge(&lx) - lambda.abs() * g).abs() <= 1e-10 * (lambda.abs() * g).max(1e-300));
        }
    }
}
