//! Even, non-negative densities `g` defining measures `mu(B) = ∫_B g`.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, usage, Result};
use crate::sphere;

pub type DensityFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

#[derive(Clone)]
enum Kind {
    Lebesgue,
    Gaussian { sigma: f64, norm: f64 },
    ExpL1,
    RadialPower { alpha: f64 },
    Bump { radius: f64 },
    Custom(Arc<DensityFn>),
}

/// A density on `R^n`. All densities are even; built-ins are also invariant
/// under coordinate sign flips.
#[derive(Clone)]
pub struct Density {
    dim: usize,
    kind: Kind,
    label: String,
    sign_invariant: bool,
}

impl fmt::Debug for Density {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Density")
            .field("label", &self.label)
            .field("dim", &self.dim)
            .finish()
    }
}

/// Config form of a built-in density: `{kind, sigma?, alpha?, radius?}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DensitySpec {
    Lebesgue,
    Gaussian {
        #[serde(default = "one", deserialize_with = "crate::num_fmt::lenient::f64")]
        sigma: f64,
    },
    ExpL1,
    RadialPower {
        #[serde(deserialize_with = "crate::num_fmt::lenient::f64")]
        alpha: f64,
    },
    Bump {
        #[serde(default = "one", alias = "sigma", deserialize_with = "crate::num_fmt::lenient::f64")]
        radius: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl Density {
    pub fn lebesgue(n: usize) -> Self {
        Self {
            dim: n,
            kind: Kind::Lebesgue,
            label: "lebesgue".into(),
            sign_invariant: true,
        }
    }

    /// Centered normal density with covariance `sigma^2 I`.
    pub fn gaussian(n: usize, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return usage(format!("gaussian sigma must be positive, got {sigma}"));
        }
        let norm = (2.0 * std::f64::consts::PI * sigma * sigma).powf(-(n as f64) / 2.0);
        Ok(Self {
            dim: n,
            kind: Kind::Gaussian { sigma, norm },
            label: format!("gaussian({sigma})"),
            sign_invariant: true,
        })
    }

    /// `exp(-|x|_1)`.
    pub fn exp_l1(n: usize) -> Self {
        Self {
            dim: n,
            kind: Kind::ExpL1,
            label: "exp_l1".into(),
            sign_invariant: true,
        }
    }

    /// `|x|_2^alpha` with `alpha >= 0`.
    pub fn radial_power(n: usize, alpha: f64) -> Result<Self> {
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return usage(format!("radial_power alpha must be >= 0, got {alpha}"));
        }
        Ok(Self {
            dim: n,
            kind: Kind::RadialPower { alpha },
            label: format!("radial_power({alpha})"),
            sign_invariant: true,
        })
    }

    /// Smooth radial bump `exp(1 - 1/(1 - |x|^2/R^2))` supported in the ball of radius `R`.
    pub fn bump(n: usize, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return usage(format!("bump radius must be positive, got {radius}"));
        }
        Ok(Self {
            dim: n,
            kind: Kind::Bump { radius },
            label: format!("bump({radius})"),
            sign_invariant: true,
        })
    }

    pub fn from_spec(spec: &DensitySpec, n: usize) -> Result<Self> {
        if n == 0 {
            return usage("density dimension must be at least 1");
        }
        match *spec {
            DensitySpec::Lebesgue => Ok(Self::lebesgue(n)),
            DensitySpec::Gaussian { sigma } => Self::gaussian(n, sigma),
            DensitySpec::ExpL1 => Ok(Self::exp_l1(n)),
            DensitySpec::RadialPower { alpha } => Self::radial_power(n, alpha),
            DensitySpec::Bump { radius } => Self::bump(n, radius),
        }
    }

    /// A user density. It is rejected unless it is even and non-negative on
    /// 1000 sampled points; `sign_invariant` is taken on trust.
    pub fn custom<F>(n: usize, label: impl Into<String>, sign_invariant: bool, f: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        let d = Self {
            dim: n,
            kind: Kind::Custom(Arc::new(f)),
            label: label.into(),
            sign_invariant,
        };
        let r = d.sample_check(1000, 0xd3);
        if r.max_odd_part > 0.0 {
            return usage(format!("density {} is not even (|g(x) - g(-x)| up to {:e})", d.label, r.max_odd_part));
        }
        if r.min_value < 0.0 || r.min_value.is_nan() {
            return usage(format!("density {} takes negative values ({})", d.label, r.min_value));
        }
        Ok(d)
    }

    /// `1 + g`, a density bounded below by one.
    pub fn one_plus(&self) -> Self {
        let inner = self.clone();
        Self {
            dim: self.dim,
            label: format!("1+{}", self.label),
            sign_invariant: self.sign_invariant,
            kind: Kind::Custom(Arc::new(move |x| 1.0 + inner.value(x))),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn is_even(&self) -> bool {
        true
    }

    pub fn is_lebesgue(&self) -> bool {
        matches!(self.kind, Kind::Lebesgue)
    }

    pub fn is_sign_invariant(&self) -> bool {
        self.sign_invariant
    }

    /// `g(x)` without a dimension check.
    pub fn value(&self, x: &[f64]) -> f64 {
        match &self.kind {
            Kind::Lebesgue => 1.0,
            Kind::Gaussian { sigma, norm } => {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                norm * (-r2 / (2.0 * sigma * sigma)).exp()
            }
            Kind::ExpL1 => (-x.iter().map(|v| v.abs()).sum::<f64>()).exp(),
            Kind::RadialPower { alpha } => {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                r2.powf(0.5 * alpha)
            }
            Kind::Bump { radius } => {
                let s = x.iter().map(|v| v * v).sum::<f64>() / (radius * radius);
                if s < 1.0 {
                    (1.0 - 1.0 / (1.0 - s)).exp()
                } else {
                    0.0
                }
            }
            Kind::Custom(f) => f(x),
        }
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim, x.len())?;
        Ok(self.value(x))
    }

    /// Worst evenness defect and smallest value over `samples` random points.
    pub fn sample_check(&self, samples: usize, seed: u64) -> DensityCheck {
        let mut rng = sphere::stream_rng(seed, 0);
        let mut out = DensityCheck {
            max_odd_part: 0.0,
            min_value: f64::INFINITY,
        };
        for _ in 0..samples {
            let r: f64 = rng.random_range(0.0..4.0);
            let x: Vec<f64> = sphere::random_unit(&mut rng, self.dim).into_iter().map(|v| v * r).collect();
            let neg: Vec<f64> = x.iter().map(|v| -v).collect();
            let gx = self.value(&x);
            let gn = self.value(&neg);
            out.max_odd_part = out.max_odd_part.max((gx - gn).abs());
            out.min_value = out.min_value.min(gx);
            if gx.is_nan() {
                out.min_value = f64::NAN;
                break;
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug)]
pub struct DensityCheck {
    pub max_odd_part: f64,
    pub min_value: f64,
}
