//! Inequality checks and experiment orchestration.
//!
//! Every check produces an [`InequalityReport`] of the form
//! `lhs <= rhs` with `ratio = lhs / rhs`; it passes when
//! `ratio <= 1 + error_budget`, where the budget is the sum of the relative
//! quadrature errors of all estimates involved plus `1e-3`. Maximal sections
//! are lower bounds, so the right-hand sides are underestimates and passes are
//! conservative. A failing check is re-run once at boosted quadrature effort
//! before it is reported.

mod config;

use std::collections::BTreeMap;
use std::f64::consts::E;

use serde::{Deserialize, Serialize};

use crate::bodies::{SearchConfig, StarBody};
use crate::constants::{c_n, general_constant, half_sqrt_e, stability_constant, UNCONDITIONAL_CONSTANT};
use crate::error::{check_dim, usage, Result};
use crate::factorization::{lozanovskii_box, volume_ratio_report, DEFAULT_TOL};
use crate::measures::Density;
use crate::num_fmt;
use crate::quadrature::{integrate_body, integrate_section, volume, Engine, Estimate, QuadScheme, MAX_DETERMINISTIC_SPHERE_DIM};
use crate::sections::{max_objective, max_section, use_orthant, MaxSectionResult, OptConfig};
use crate::sphere;

pub use config::{
    builtin_bodies, builtin_densities, parse_config, run_experiment, BodySpec, CheckKind, ExperimentConfig, MatrixSpec, RunOutcome,
    SkippedCell, SUMMARY_HEADER,
};

/// Slack added to every error budget.
pub const BUDGET_SLACK: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InequalityId {
    Eq2Unconditional,
    Eq3General,
    Prop1Stability,
    Thm2DualVr,
    Eq1Volume,
}

impl InequalityId {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Eq2Unconditional => "eq2_unconditional",
            Self::Eq3General => "eq3_general",
            Self::Prop1Stability => "prop1_stability",
            Self::Thm2DualVr => "thm2_dual_vr",
            Self::Eq1Volume => "eq1_volume",
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct Witnesses {
    #[serde(with = "num_fmt::sci_opt_vec", skip_serializing_if = "Option::is_none", default)]
    pub xi_star: Option<Vec<f64>>,
    /// Diagonal of the Lozanovskii map `T`.
    #[serde(with = "num_fmt::sci_opt_vec", skip_serializing_if = "Option::is_none", default)]
    pub t: Option<Vec<f64>>,
    /// Semi-axes of the inscribed diagonal ellipsoid.
    #[serde(with = "num_fmt::sci_opt_vec", skip_serializing_if = "Option::is_none", default)]
    pub ellipsoid: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Provenance {
    pub quad: QuadScheme,
    pub opt: OptConfig,
    /// Engine actually used for this cell.
    pub engine: Engine,
    pub seed: u64,
    /// True when the first attempt failed and this report comes from the boosted re-run.
    pub rerun_boosted: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub config: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InequalityReport {
    pub inequality_id: InequalityId,
    pub body: String,
    pub density: String,
    pub n: usize,
    pub lhs: Estimate,
    #[serde(with = "num_fmt::sci")]
    pub rhs: f64,
    /// Factors of the right-hand side; see [`InequalityReport::recompute_rhs`].
    #[serde(with = "num_fmt::sci_map")]
    pub rhs_components: BTreeMap<String, f64>,
    #[serde(with = "num_fmt::sci")]
    pub constant: f64,
    #[serde(with = "num_fmt::sci")]
    pub ratio: f64,
    pub pass: bool,
    #[serde(with = "num_fmt::sci")]
    pub error_budget: f64,
    /// Every estimate entering the check, with its method tag.
    pub estimates: BTreeMap<String, Estimate>,
    pub witnesses: Witnesses,
    /// Report-only quantities; nothing here is gated.
    #[serde(with = "num_fmt::sci_map")]
    pub notes: BTreeMap<String, f64>,
    pub provenance: Provenance,
}

impl InequalityReport {
    /// The right-hand side rebuilt from `rhs_components`.
    pub fn recompute_rhs(&self) -> f64 {
        let c = |k: &str| self.rhs_components.get(k).copied().unwrap_or(f64::NAN);
        match self.inequality_id {
            InequalityId::Prop1Stability => c("volume") + c("constant") * c("volume_root") * c("epsilon"),
            InequalityId::Thm2DualVr => c("constant") * c("vr_upper") * c("max_section") * c("volume_root"),
            _ => c("constant") * c("max_section") * c("volume_root"),
        }
    }

    /// `ratio == lhs / recompute_rhs()` to 1e-12 relative.
    pub fn is_consistent(&self) -> bool {
        let r = self.lhs.value / self.recompute_rhs();
        (r - self.ratio).abs() <= 1e-12 * self.ratio.abs().max(f64::MIN_POSITIVE)
    }
}

/// Scheme used for an `n`-dimensional cell: the deterministic engine cannot
/// integrate over `S^{n-1}` for `n > 4`, so those cells use Monte Carlo with the
/// same seed and sample count.
pub fn scheme_for(n: usize, scheme: &QuadScheme) -> QuadScheme {
    if scheme.engine == Engine::Deterministic && n > MAX_DETERMINISTIC_SPHERE_DIM {
        QuadScheme {
            engine: Engine::MonteCarlo,
            ..scheme.clone()
        }
    } else {
        scheme.clone()
    }
}

struct Draft {
    id: InequalityId,
    body: String,
    density: String,
    n: usize,
    lhs: Estimate,
    components: BTreeMap<String, f64>,
    constant: f64,
    /// Relative errors of the right-hand side, already divided by `n` for roots.
    rhs_rel_err: f64,
    estimates: BTreeMap<String, Estimate>,
    witnesses: Witnesses,
    notes: BTreeMap<String, f64>,
}

impl Draft {
    fn finish(self, scheme: &QuadScheme, opt: &OptConfig) -> InequalityReport {
        let mut report = InequalityReport {
            inequality_id: self.id,
            body: self.body,
            density: self.density,
            n: self.n,
            lhs: self.lhs,
            rhs: 0.0,
            rhs_components: self.components,
            constant: self.constant,
            ratio: 0.0,
            pass: false,
            error_budget: 0.0,
            estimates: self.estimates,
            witnesses: self.witnesses,
            notes: self.notes,
            provenance: Provenance {
                quad: scheme.clone(),
                opt: opt.clone(),
                engine: scheme.engine,
                seed: scheme.seed,
                rerun_boosted: false,
                config: None,
            },
        };
        report.rhs = report.recompute_rhs();
        report.ratio = report.lhs.value / report.rhs;
        report.error_budget = report.lhs.rel_err() + self.rhs_rel_err + BUDGET_SLACK;
        report.pass = report.ratio <= 1.0 + report.error_budget;
        report
    }
}

fn with_rerun(scheme: &QuadScheme, run: impl Fn(&QuadScheme) -> Result<InequalityReport>) -> Result<InequalityReport> {
    let first = run(scheme)?;
    if first.pass {
        return Ok(first);
    }
    let mut second = run(&scheme.boosted())?;
    second.provenance.rerun_boosted = true;
    Ok(second)
}

fn check_density(body: &StarBody, density: &Density) -> Result<()> {
    check_dim(body.dim(), density.dim())?;
    if body.dim() < 2 {
        return usage("hyperplane sections need dimension at least 2");
    }
    if !density.is_even() {
        return usage(format!("density {} is not even", density.label()));
    }
    Ok(())
}

/// Shared part of the product-form checks: `mu(L)`, the maximal section and `|L|`.
struct Sides {
    lhs: Estimate,
    section: MaxSectionResult,
    volume: Estimate,
}

fn sides(body: &StarBody, density: &Density, s: &QuadScheme, opt: &OptConfig) -> Result<Sides> {
    let lhs = integrate_body(body, density, s)?;
    let section = max_section(body, density, s, opt)?;
    let volume = if density.is_lebesgue() { lhs.clone() } else { volume(body, s)? };
    Ok(Sides { lhs, section, volume })
}

fn product_draft(id: InequalityId, body: &StarBody, density: &Density, constant: f64, sides: Sides) -> Draft {
    let n = body.dim();
    let nf = n as f64;
    let root = sides.volume.value.powf(1.0 / nf);
    let ms = sides.section.value.value;
    let mut estimates = BTreeMap::new();
    estimates.insert("lhs".to_string(), sides.lhs.clone());
    estimates.insert("max_section".to_string(), sides.section.value.clone());
    estimates.insert("volume".to_string(), sides.volume.clone());
    let mut notes = BTreeMap::new();
    notes.insert("c_emp".to_string(), sides.lhs.value / (ms * root));
    Draft {
        id,
        body: body.label().to_string(),
        density: density.label().to_string(),
        n,
        lhs: sides.lhs,
        components: BTreeMap::from([
            ("constant".to_string(), constant),
            ("max_section".to_string(), ms),
            ("volume_root".to_string(), root),
        ]),
        constant,
        rhs_rel_err: sides.section.value.rel_err() + sides.volume.rel_err() / nf,
        estimates,
        witnesses: Witnesses {
            xi_star: Some(sides.section.xi_star),
            ..Witnesses::default()
        },
        notes,
    }
}

/// `mu(L) <= e * max_xi mu(L ∩ xi^⊥) * |L|^(1/n)` for unconditional convex `L`.
///
/// Also records, report-only, the constant the factorization argument gives
/// for this body, `(n/(n-1)) c_n (|K|/|L|)^(1/n)` with `K = n T(B_1^n)`, its
/// a priori bound `(n/(n-1)) c_n e/2`, and the limit `sqrt(e)/2`.
pub fn check_hyperplane_unconditional(body: &StarBody, density: &Density, scheme: &QuadScheme, opt: &OptConfig) -> Result<InequalityReport> {
    body.require_unconditional_convex("check_hyperplane_unconditional")?;
    check_density(body, density)?;
    let n = body.dim();
    let scheme = scheme_for(n, scheme);
    with_rerun(&scheme, |s| {
        let sides = sides(body, density, s, opt)?;
        let t = lozanovskii_box(body, DEFAULT_TOL)?;
        let nf = n as f64;
        let vol_l = sides.volume.value;
        // |n T(B_1^n)| = n^n det(T) 2^n / n!
        let ln_k = nf * nf.ln() + t.diag().iter().map(|x| x.ln()).sum::<f64>() + nf * 2f64.ln() - statrs::function::gamma::ln_gamma(nf + 1.0);
        let base = stability_constant(n)?;
        let proof_constant = base * ((ln_k - vol_l.ln()) / nf).exp();
        let mut draft = product_draft(InequalityId::Eq2Unconditional, body, density, UNCONDITIONAL_CONSTANT, sides);
        let c_emp = draft.notes["c_emp"];
        draft.notes.insert("proof_constant".to_string(), proof_constant);
        draft.notes.insert("proof_constant_bound".to_string(), base * E / 2.0);
        draft.notes.insert("proof_ratio".to_string(), c_emp / proof_constant);
        draft.notes.insert("half_sqrt_e".to_string(), half_sqrt_e());
        draft.notes.insert("c_n".to_string(), c_n(n)?);
        draft.witnesses.t = Some(t.diag().to_vec());
        Ok(draft.finish(s, opt))
    })
}

/// `mu(K) <= sqrt(n) (n/(n-1)) c_n * max_xi mu(K ∩ xi^⊥) * |K|^(1/n)` for convex `K`.
pub fn check_hyperplane_general(body: &StarBody, density: &Density, scheme: &QuadScheme, opt: &OptConfig) -> Result<InequalityReport> {
    body.require_convex("check_hyperplane_general")?;
    check_density(body, density)?;
    let n = body.dim();
    let scheme = scheme_for(n, scheme);
    let constant = general_constant(n)?;
    with_rerun(&scheme, |s| {
        let sides = sides(body, density, s, opt)?;
        Ok(product_draft(InequalityId::Eq3General, body, density, constant, sides).finish(s, opt))
    })
}

/// The volume case `|K| <= C max_xi |K ∩ xi^⊥| |K|^(1/n)`, with `C = e` for
/// unconditional bodies and the general constant otherwise.
pub fn check_hyperplane_volume(body: &StarBody, scheme: &QuadScheme, opt: &OptConfig) -> Result<InequalityReport> {
    body.require_convex("check_hyperplane_volume")?;
    let n = body.dim();
    let lebesgue = Density::lebesgue(n);
    check_density(body, &lebesgue)?;
    let scheme = scheme_for(n, scheme);
    let constant = if body.flags().is_unconditional {
        UNCONDITIONAL_CONSTANT
    } else {
        general_constant(n)?
    };
    with_rerun(&scheme, |s| {
        let sides = sides(body, &lebesgue, s, opt)?;
        Ok(product_draft(InequalityId::Eq1Volume, body, &lebesgue, constant, sides).finish(s, opt))
    })
}

/// `mu(L) <= C vr(L°) max_xi mu(L ∩ xi^⊥) |L|^(1/n)`.
///
/// The absolute constant is not known explicitly, so the check gates on the
/// empirical constant `C_emp = mu(L) / (vr(L°) max mu(L ∩ xi^⊥) |L|^(1/n))`
/// staying below `e`; `vr(L°)` is bounded above with an inscribed diagonal
/// ellipsoid, which makes `C_emp` an overestimate.
pub fn check_dual_vr(body: &StarBody, density: &Density, scheme: &QuadScheme, opt: &OptConfig) -> Result<InequalityReport> {
    body.require_unconditional_convex("check_dual_vr")?;
    check_density(body, density)?;
    let n = body.dim();
    let scheme = scheme_for(n, scheme);
    let polar = body.polar(&SearchConfig::default())?;
    with_rerun(&scheme, |s| {
        let sides = sides(body, density, s, opt)?;
        let vr = volume_ratio_report(&polar, s)?;
        let mut draft = product_draft(InequalityId::Thm2DualVr, body, density, UNCONDITIONAL_CONSTANT, sides);
        draft.components.insert("vr_upper".to_string(), vr.vr_upper);
        draft.rhs_rel_err += vr.volume.rel_err() / n as f64;
        let c_emp = draft.notes["c_emp"] / vr.vr_upper;
        draft.notes.insert("c_emp".to_string(), c_emp);
        draft.notes.insert("polar_santalo_ratio".to_string(), vr.santalo_ratio);
        draft.notes.insert("mahler_root_times_n".to_string(), vr.mahler_root_times_n);
        draft.estimates.insert("polar_volume".to_string(), vr.volume.clone());
        draft.witnesses.ellipsoid = Some(vr.semi_axes);
        Ok(draft.finish(s, opt))
    })
}

/// How the function `f >= 1` on `K` is given.
#[derive(Clone, Debug)]
pub enum StabilityMode {
    /// `f` is a density with `f >= 1` on `K`.
    Direct { f: Density },
    /// `f = chi_K + g chi_L` for a body `L ⊂ K` and a density `g`.
    Composite { inner: StarBody, g: Density },
}

#[derive(Clone, Debug)]
pub struct StabilitySpec {
    pub body: StarBody,
    pub mode: StabilityMode,
}

impl StabilitySpec {
    /// Composite spec with `K = n T(B_1^n)`, `T` the Lozanovskii map of `inner`.
    pub fn lozanovskii_composite(inner: &StarBody, g: Density) -> Result<Self> {
        let n = inner.dim();
        let t = lozanovskii_box(inner, DEFAULT_TOL)?;
        let body = StarBody::cross_polytope(n)
            .diagonal_image(&t)?
            .scaled(n as f64)?
            .with_label(format!("{n}·T(B_1^{n}) of {}", inner.label()));
        Ok(Self {
            body,
            mode: StabilityMode::Composite { inner: inner.clone(), g },
        })
    }

    pub fn density_label(&self) -> String {
        match &self.mode {
            StabilityMode::Direct { f } => f.label().to_string(),
            StabilityMode::Composite { inner, g } => format!("chi_K+{}·chi_({})", g.label(), inner.label()),
        }
    }

    fn validate(&self) -> Result<()> {
        let k = &self.body;
        if !k.flags().is_intersection_body {
            return usage(format!("{} is not declared an intersection body", k.label()));
        }
        let n = k.dim();
        if n < 2 {
            return usage("hyperplane sections need dimension at least 2");
        }
        let mut rng = sphere::stream_rng(0x57ab, 0);
        match &self.mode {
            StabilityMode::Direct { f } => {
                check_dim(n, f.dim())?;
                for _ in 0..1000 {
                    let u = sphere::random_unit(&mut rng, n);
                    let r: f64 = rand::Rng::random_range(&mut rng, 0.0..=1.0);
                    let rho = k.radial_unchecked(&u);
                    let x: Vec<f64> = u.iter().map(|v| v * r * rho).collect();
                    let fx = f.value(&x);
                    if !(fx >= 1.0) {
                        return usage(format!("f = {} is below one on K at {x:?}: {fx}", f.label()));
                    }
                }
            }
            StabilityMode::Composite { inner, g } => {
                check_dim(n, inner.dim())?;
                check_dim(n, g.dim())?;
                for _ in 0..1000 {
                    let u = sphere::random_unit(&mut rng, n);
                    if k.gauge(&u) > inner.gauge(&u) * (1.0 + 1e-9) {
                        return usage(format!("{} is not contained in {} (direction {u:?})", inner.label(), k.label()));
                    }
                }
            }
        }
        Ok(())
    }
}

/// `∫_K f <= |K| + (n/(n-1)) c_n |K|^(1/n) eps` for an intersection body `K`,
/// where `eps = max_xi (∫_{K ∩ xi^⊥} f - |K ∩ xi^⊥|)`.
pub fn check_stability(spec: &StabilitySpec, scheme: &QuadScheme, opt: &OptConfig) -> Result<InequalityReport> {
    spec.validate()?;
    let k = &spec.body;
    let n = k.dim();
    let nf = n as f64;
    let scheme = scheme_for(n, scheme);
    let constant = stability_constant(n)?;
    with_rerun(&scheme, |s| {
        let vol = volume(k, s)?;
        let (lhs, eps) = match &spec.mode {
            StabilityMode::Direct { f } => {
                let lhs = integrate_body(k, f, s)?;
                let lebesgue = Density::lebesgue(n);
                let orthant = use_orthant(opt, k.flags().is_unconditional, f.is_sign_invariant());
                let eps = max_objective(n, s, opt, orthant, |xi, s| {
                    Ok(integrate_section(k, f, xi, s)?.minus(&integrate_section(k, &lebesgue, xi, s)?))
                })?;
                (lhs, eps)
            }
            StabilityMode::Composite { inner, g } => {
                let lhs = vol.plus(&integrate_body(inner, g, s)?);
                (lhs, max_section(inner, g, s, opt)?)
            }
        };
        let root = vol.value.powf(1.0 / nf);
        let eps_value = eps.value.value.max(0.0);
        let rhs = vol.value + constant * root * eps_value;
        let rhs_abs_err = vol.err + constant * root * (eps.value.err + eps_value * vol.rel_err() / nf);
        let mut estimates = BTreeMap::new();
        estimates.insert("lhs".to_string(), lhs.clone());
        estimates.insert("volume".to_string(), vol.clone());
        estimates.insert("epsilon".to_string(), eps.value.clone());
        let draft = Draft {
            id: InequalityId::Prop1Stability,
            body: k.label().to_string(),
            density: spec.density_label(),
            n,
            lhs,
            components: BTreeMap::from([
                ("volume".to_string(), vol.value),
                ("constant".to_string(), constant),
                ("volume_root".to_string(), root),
                ("epsilon".to_string(), eps_value),
            ]),
            constant,
            rhs_rel_err: rhs_abs_err / rhs,
            estimates,
            witnesses: Witnesses {
                xi_star: Some(eps.xi_star),
                ..Witnesses::default()
            },
            notes: BTreeMap::from([("c_n".to_string(), c_n(n)?)]),
        };
        Ok(draft.finish(s, opt))
    })
}

/// `c_n (n/(n-1)) (e/2) / e`: the ratio bound of the volume case relative to
/// the constant `e`; strictly below one for every `n >= 2`.
pub fn lebesgue_strictness(n: usize) -> Result<f64> {
    Ok(stability_constant(n)? / 2.0)
}
