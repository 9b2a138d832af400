//! Experiment configs and the batch runner.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    check_dual_vr, check_hyperplane_general, check_hyperplane_unconditional, check_hyperplane_volume, check_stability,
    InequalityReport, StabilityMode, StabilitySpec,
};
use crate::bodies::{DiagonalMap, SearchConfig, StarBody};
use crate::error::{usage, Error, Result};
use crate::measures::{Density, DensitySpec};
use crate::num_fmt::{lenient, sci_text, Lenient};
use crate::quadrature::QuadScheme;
use crate::sections::OptConfig;

pub const SUMMARY_HEADER: [&str; 10] = ["inequality_id", "body", "density", "n", "lhs", "rhs", "ratio", "constant", "pass", "seed"];

/// A matrix given row-major, either flat or as nested rows.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum MatrixSpec {
    Rows(Vec<Vec<f64>>),
    Flat(Vec<f64>),
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Entry {
    Row(Vec<Lenient>),
    Number(Lenient),
}

impl<'de> Deserialize<'de> for MatrixSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let entries = Vec::<Entry>::deserialize(d)?;
        let mut rows = Vec::new();
        let mut flat = Vec::new();
        for e in entries {
            match e {
                Entry::Row(r) => rows.push(r.into_iter().map(|x| x.0).collect()),
                Entry::Number(x) => flat.push(x.0),
            }
        }
        match (rows.is_empty(), flat.is_empty()) {
            (_, true) => Ok(Self::Rows(rows)),
            (true, false) => Ok(Self::Flat(flat)),
            _ => Err(serde::de::Error::custom("matrix mixes rows and numbers")),
        }
    }
}

impl MatrixSpec {
    pub fn to_matrix(&self, n: usize) -> Result<DMatrix<f64>> {
        let flat: Vec<f64> = match self {
            Self::Rows(rows) => {
                if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                    return usage(format!("matrix must be {n}x{n}"));
                }
                rows.concat()
            }
            Self::Flat(v) => v.clone(),
        };
        if flat.len() != n * n {
            return usage(format!("matrix must have {} entries, got {}", n * n, flat.len()));
        }
        Ok(DMatrix::from_row_slice(n, n, &flat))
    }
}

fn p_out<S: serde::Serializer>(p: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if p.is_infinite() {
        s.serialize_str("inf")
    } else {
        s.serialize_f64(*p)
    }
}

/// Config form of a body.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BodySpec {
    Lp {
        n: usize,
        /// A number, or `"inf"` for the cube.
        #[serde(deserialize_with = "lenient::f64", serialize_with = "p_out")]
        p: f64,
        #[serde(default, deserialize_with = "lenient::opt_vec")]
        weights: Option<Vec<f64>>,
        #[serde(default)]
        label: Option<String>,
        #[serde(default)]
        intersection_body: Option<bool>,
    },
    /// `matrix · base`.
    Image {
        base: Box<BodySpec>,
        matrix: MatrixSpec,
        #[serde(default)]
        label: Option<String>,
        #[serde(default)]
        intersection_body: Option<bool>,
    },
    Polar {
        base: Box<BodySpec>,
        #[serde(default)]
        label: Option<String>,
    },
}

impl BodySpec {
    pub fn build(&self) -> Result<StarBody> {
        let (body, label, flag) = match self {
            Self::Lp {
                n,
                p,
                weights,
                label,
                intersection_body,
            } => (StarBody::lp_ball(*n, *p, weights.as_deref())?, label, intersection_body),
            Self::Image {
                base,
                matrix,
                label,
                intersection_body,
            } => {
                let base = base.build()?;
                let m = matrix.to_matrix(base.dim())?;
                (base.linear_image(&m)?, label, intersection_body)
            }
            Self::Polar { base, label } => (base.build()?.polar(&SearchConfig::default())?, label, &None),
        };
        let mut body = body;
        if let Some(l) = label {
            body = body.with_label(l.clone());
        }
        if let Some(f) = flag {
            body = body.with_intersection_flag(*f);
        }
        Ok(body)
    }
}

/// Checks a config can request. `prop1` uses `f = 1 + g` on `K`;
/// `prop1_composite` uses `f = chi_K + g chi_L` with `K = n T(B_1^n)` built
/// from the Lozanovskii map of `L`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    #[serde(alias = "eq2_unconditional")]
    Eq2,
    #[serde(alias = "eq3_general")]
    Eq3,
    #[serde(alias = "prop1_stability")]
    Prop1,
    Prop1Composite,
    #[serde(alias = "thm2_dual_vr")]
    Thm2,
    #[serde(alias = "eq1_volume")]
    Eq1,
}

impl CheckKind {
    fn as_str(self) -> &'static str {
        match self {
            Self::Eq2 => "eq2",
            Self::Eq3 => "eq3",
            Self::Prop1 => "prop1",
            Self::Prop1Composite => "prop1_composite",
            Self::Thm2 => "thm2",
            Self::Eq1 => "eq1",
        }
    }

    /// `None` when the check applies to `body`, otherwise the reason it does not.
    fn skip_reason(self, body: &StarBody) -> Option<&'static str> {
        let f = body.flags();
        match self {
            Self::Eq3 | Self::Eq1 if !f.is_convex => Some("body is not convex"),
            Self::Eq2 | Self::Thm2 | Self::Prop1Composite if !(f.is_convex && f.is_unconditional) => {
                Some("body is not unconditional and convex")
            }
            Self::Prop1 if !f.is_intersection_body => Some("body is not declared an intersection body"),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub bodies: Vec<BodySpec>,
    #[serde(default = "default_densities")]
    pub densities: Vec<DensitySpec>,
    pub checks: Vec<CheckKind>,
    #[serde(default)]
    pub quad: QuadScheme,
    #[serde(default)]
    pub opt: OptConfig,
}

fn default_densities() -> Vec<DensitySpec> {
    vec![DensitySpec::Lebesgue]
}

/// Parses a config; errors carry the line and column.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let cfg: ExperimentConfig =
        serde_json::from_str(text).map_err(|e| Error::Usage(format!("config line {} column {}: {e}", e.line(), e.column())))?;
    cfg.quad.validate()?;
    cfg.opt.validate()?;
    Ok(cfg)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SkippedCell {
    pub check: String,
    pub body: String,
    pub density: String,
    pub reason: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunOutcome {
    pub reports: Vec<InequalityReport>,
    pub skipped: Vec<SkippedCell>,
    /// Cells whose computation failed, as `check body density: message`.
    pub errors: Vec<String>,
    pub all_pass: bool,
}

struct Cell {
    check: CheckKind,
    body: usize,
    density: Option<usize>,
}

/// SplitMix64 step, used to derive per-cell seeds.
fn mix(seed: u64, index: u64) -> u64 {
    let mut z = seed.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn slug(s: &str) -> String {
    let mut out = String::new();
    for c in s.chars() {
        if c.is_ascii_alphanumeric() || c == '.' {
            out.push(c);
        } else if !out.ends_with('_') {
            out.push('_');
        }
    }
    out.trim_matches('_').chars().take(48).collect()
}

fn run_cell(cell: &Cell, body: &StarBody, density: &Density, scheme: &QuadScheme, opt: &OptConfig) -> Result<InequalityReport> {
    match cell.check {
        CheckKind::Eq2 => check_hyperplane_unconditional(body, density, scheme, opt),
        CheckKind::Eq3 => check_hyperplane_general(body, density, scheme, opt),
        CheckKind::Eq1 => check_hyperplane_volume(body, scheme, opt),
        CheckKind::Thm2 => check_dual_vr(body, density, scheme, opt),
        CheckKind::Prop1 => check_stability(
            &StabilitySpec {
                body: body.clone(),
                mode: StabilityMode::Direct { f: density.one_plus() },
            },
            scheme,
            opt,
        ),
        CheckKind::Prop1Composite => check_stability(&StabilitySpec::lozanovskii_composite(body, density.clone())?, scheme, opt),
    }
}

/// Runs every applicable (body, density, check) cell of the config at
/// `config_path` and writes one JSON report per cell to `out_dir/reports/`,
/// `out_dir/summary.csv` and `out_dir/run.json`. Output depends only on the
/// config. `eq1` cells ignore the density list and run once per body.
pub fn run_experiment(config_path: &Path, out_dir: &Path) -> Result<RunOutcome> {
    let text = fs::read_to_string(config_path)?;
    let cfg = parse_config(&text)?;
    let bodies = cfg
        .bodies
        .iter()
        .enumerate()
        .map(|(i, spec)| {
            let b = spec.build().map_err(|e| Error::Usage(format!("body {i}: {e}")))?;
            if b.dim() < 2 {
                return usage(format!("body {i} ({}): hyperplane sections need dimension at least 2", b.label()));
            }
            Ok(b)
        })
        .collect::<Result<Vec<_>>>()?;
    let densities = bodies
        .iter()
        .map(|b| cfg.densities.iter().map(|d| Density::from_spec(d, b.dim())).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;

    let mut cells = Vec::new();
    let mut skipped = Vec::new();
    for (bi, body) in bodies.iter().enumerate() {
        for &check in &cfg.checks {
            let dens: Vec<Option<usize>> = if check == CheckKind::Eq1 {
                vec![None]
            } else {
                (0..cfg.densities.len()).map(Some).collect()
            };
            for di in dens {
                match check.skip_reason(body) {
                    Some(reason) => skipped.push(SkippedCell {
                        check: check.as_str().to_string(),
                        body: body.label().to_string(),
                        density: di.map_or("lebesgue".to_string(), |d| densities[bi][d].label().to_string()),
                        reason: reason.to_string(),
                    }),
                    None => cells.push(Cell { check, body: bi, density: di }),
                }
            }
        }
    }

    let results: Vec<Result<InequalityReport>> = cells
        .par_iter()
        .enumerate()
        .map(|(i, cell)| {
            let body = &bodies[cell.body];
            let density = match cell.density {
                Some(d) => densities[cell.body][d].clone(),
                None => Density::lebesgue(body.dim()),
            };
            let scheme = cfg.quad.with_seed(mix(cfg.quad.seed, i as u64));
            let mut r = run_cell(cell, body, &density, &scheme, &cfg.opt)?;
            r.provenance.config = Some(config_path.display().to_string());
            Ok(r)
        })
        .collect();

    let reports_dir = out_dir.join("reports");
    fs::create_dir_all(&reports_dir)?;
    let mut csv = csv::Writer::from_path(out_dir.join("summary.csv"))?;
    csv.write_record(SUMMARY_HEADER)?;
    let mut reports = Vec::new();
    let mut errors = Vec::new();
    for (i, (cell, res)) in cells.iter().zip(results).enumerate() {
        match res {
            Ok(r) => {
                let name = format!("{i:03}_{}_{}_{}.json", r.inequality_id.as_str(), slug(&r.body), slug(&r.density));
                fs::write(reports_dir.join(name), serde_json::to_string_pretty(&r)? + "\n")?;
                csv.write_record([
                    r.inequality_id.as_str().to_string(),
                    r.body.clone(),
                    r.density.clone(),
                    r.n.to_string(),
                    sci_text(r.lhs.value),
                    sci_text(r.rhs),
                    sci_text(r.ratio),
                    sci_text(r.constant),
                    r.pass.to_string(),
                    r.provenance.seed.to_string(),
                ])?;
                reports.push(r);
            }
            Err(e) => errors.push(format!("{} {}: {e}", cell.check.as_str(), bodies[cell.body].label())),
        }
    }
    csv.flush()?;
    let all_pass = errors.is_empty() && reports.iter().all(|r| r.pass);
    let outcome = RunOutcome {
        reports,
        skipped,
        errors,
        all_pass,
    };
    let run = serde_json::json!({
        "cells": outcome.reports.len() + outcome.errors.len(),
        "passed": outcome.reports.iter().filter(|r| r.pass).count(),
        "failed": outcome.reports.iter().filter(|r| !r.pass).count(),
        "errors": outcome.errors,
        "skipped": outcome.skipped,
        "all_pass": outcome.all_pass,
    });
    fs::write(out_dir.join("run.json"), serde_json::to_string_pretty(&run)? + "\n")?;
    Ok(outcome)
}

/// The standard test bodies in dimension `n`: `B_1`, `B_2`, `B_inf`, `B_1.5`,
/// `B_3`, a box with half-widths `1, 1/2, ..., 1/n`, and `diag(1, 1.5, ...)`
/// applied to `B_1.5`.
pub fn builtin_bodies(n: usize) -> Result<Vec<StarBody>> {
    let widths: Vec<f64> = (0..n).map(|i| 1.0 / (i + 1) as f64).collect();
    let stretch = DiagonalMap::new((0..n).map(|i| 1.0 + 0.5 * i as f64).collect())?;
    let base = StarBody::lp_ball(n, 1.5, None)?;
    Ok(vec![
        StarBody::cross_polytope(n),
        StarBody::euclidean_ball(n),
        StarBody::cube(n),
        base.clone(),
        StarBody::lp_ball(n, 3.0, None)?,
        StarBody::aligned_box(&widths)?,
        base.diagonal_image(&stretch)?.with_label(format!("T·B_1.5^{n}")),
    ])
}

/// The standard test densities: Lebesgue, `gaussian(1)`, `|x|^2` and `exp(-|x|_1)`.
pub fn builtin_densities(n: usize) -> Result<Vec<Density>> {
    Ok(vec![
        Density::lebesgue(n),
        Density::gaussian(n, 1.0)?,
        Density::radial_power(n, 2.0)?,
        Density::exp_l1(n),
    ])
}
