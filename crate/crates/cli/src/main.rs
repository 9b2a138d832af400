use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use hyperslice::harness::{BodySpec, StabilityMode, StabilitySpec};
use hyperslice::sphere::seeded_directions;
use hyperslice::{
    check_dual_vr, check_hyperplane_general, check_hyperplane_unconditional, check_hyperplane_volume, check_stability,
    integrate_section, intersection_body_of, john_diagonal_ellipsoid, lozanovskii_box, mahler_volume, max_section,
    run_experiment, verify_sandwich, volume, Density, DensitySpec, Error, OptConfig, QuadScheme, SearchConfig,
    StarBody,
};

/// Measures of star bodies, their central sections, and slicing inequality checks.
///
/// Bodies and densities are JSON specs, given inline or as `@path`:
///   {"kind":"lp","n":3,"p":1.5,"weights":[1,2,1]}
///   {"kind":"image","base":{"kind":"lp","n":2,"p":"inf"},"matrix":[[1,1],[0,1]]}
///   {"kind":"gaussian","sigma":0.5}
#[derive(Parser)]
#[command(name = "hyperslice", version, verbatim_doc_comment)]
struct Cli {
    /// Seed for Monte Carlo sampling.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[arg(long, global = true, value_enum, default_value_t = EngineArg::Deterministic)]
    engine: EngineArg,
    #[arg(long, global = true, default_value_t = 20_000)]
    mc_samples: usize,
    /// Write the result here instead of stdout (for `run`: the output directory).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum EngineArg {
    Deterministic,
    MonteCarlo,
    Grid,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum CheckArg {
    Eq1,
    Eq2,
    Eq3,
    Prop1,
    Thm2,
}

#[derive(Subcommand)]
enum Command {
    /// Volume of a body.
    Volume {
        #[arg(long)]
        body: String,
    },
    /// Measure of the central section orthogonal to --xi.
    Section {
        #[arg(long)]
        body: String,
        #[arg(long, default_value = r#"{"kind":"lebesgue"}"#)]
        density: String,
        /// Normal direction, comma separated; normalized before use.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        xi: Vec<f64>,
    },
    /// Largest central section found by multi-start search.
    MaxSection {
        #[arg(long)]
        body: String,
        #[arg(long, default_value = r#"{"kind":"lebesgue"}"#)]
        density: String,
    },
    /// Radial function of the intersection body along seeded directions.
    IntersectionBody {
        #[arg(long)]
        body: String,
        #[arg(long, default_value_t = 16)]
        dirs: usize,
    },
    /// Diagonal map T with T(B_inf^n) ⊂ L ⊂ n T(B_1^n), with a numerical check.
    Lozanovskii {
        #[arg(long)]
        body: String,
    },
    /// Semi-axes of a large inscribed diagonal ellipsoid.
    John {
        #[arg(long)]
        body: String,
    },
    /// Volume product |K| |K°|.
    Mahler {
        #[arg(long)]
        body: String,
    },
    /// Run one inequality check.
    Check {
        #[arg(value_enum)]
        which: CheckArg,
        #[arg(long)]
        body: String,
        #[arg(long, default_value = r#"{"kind":"lebesgue"}"#)]
        density: String,
        /// For prop1: check f = chi_K + g chi_L with K = n T(B_1^n) built from
        /// the body, instead of f = 1 + g on the body itself.
        #[arg(long)]
        composite: bool,
    },
    /// Run an experiment config; exits 0 only when every cell passes.
    Run { config: PathBuf },
}

fn read_arg(text: &str) -> Result<String, Error> {
    match text.strip_prefix('@') {
        Some(path) => Ok(fs::read_to_string(path)?),
        None => Ok(text.to_string()),
    }
}

fn parse_body(text: &str) -> Result<StarBody, Error> {
    let spec: BodySpec = serde_json::from_str(&read_arg(text)?).map_err(|e| Error::Usage(format!("body spec: {e}")))?;
    spec.build()
}

fn parse_density(text: &str, n: usize) -> Result<Density, Error> {
    let spec: DensitySpec = serde_json::from_str(&read_arg(text)?).map_err(|e| Error::Usage(format!("density spec: {e}")))?;
    Density::from_spec(&spec, n)
}

impl Cli {
    fn scheme(&self) -> QuadScheme {
        let mut s = match self.engine {
            EngineArg::Deterministic => QuadScheme::deterministic(),
            EngineArg::MonteCarlo => QuadScheme::monte_carlo(self.mc_samples, self.seed),
            EngineArg::Grid => QuadScheme::grid(256),
        };
        s.mc_samples = self.mc_samples;
        s.seed = self.seed;
        s
    }
}

fn csv_cell(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Array(items) => items.iter().map(csv_cell).collect::<Vec<_>>().join(";"),
        other => other.to_string(),
    }
}

/// Flattens nested objects into `a.b` keys.
fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    match v {
        Value::Object(map) => {
            for (k, x) in map {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, x, out);
            }
        }
        other => out.push((prefix.to_string(), csv_cell(other))),
    }
}

fn render(v: &Value, format: Format) -> String {
    match format {
        Format::Json => serde_json::to_string_pretty(v).expect("serializable") + "\n",
        Format::Csv => {
            let mut cells = Vec::new();
            flatten("", v, &mut cells);
            let quote = |s: &str| {
                if s.contains([',', '"', '\n']) {
                    format!("\"{}\"", s.replace('"', "\"\""))
                } else {
                    s.to_string()
                }
            };
            let header: Vec<String> = cells.iter().map(|(k, _)| quote(k)).collect();
            let row: Vec<String> = cells.iter().map(|(_, x)| quote(x)).collect();
            format!("{}\n{}\n", header.join(","), row.join(","))
        }
    }
}

fn emit(v: &Value, cli: &Cli) -> Result<(), Error> {
    let text = render(v, cli.format);
    match &cli.out {
        Some(path) => fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

/// Runs the command; `Ok(false)` means a check or experiment failed.
fn execute(cli: &Cli) -> Result<bool, Error> {
    let scheme = cli.scheme();
    let opt = OptConfig::default();
    let value = match &cli.command {
        Command::Volume { body } => {
            let k = parse_body(body)?;
            json!({"body": k.label(), "n": k.dim(), "volume": volume(&k, &scheme)?})
        }
        Command::Section { body, density, xi } => {
            let k = parse_body(body)?;
            let g = parse_density(density, k.dim())?;
            let norm = xi.iter().map(|x| x * x).sum::<f64>().sqrt();
            if !(norm > 0.0 && norm.is_finite()) {
                return Err(Error::Usage("--xi must be a nonzero vector".into()));
            }
            let unit: Vec<f64> = xi.iter().map(|x| x / norm).collect();
            let est = integrate_section(&k, &g, &unit, &scheme)?;
            json!({"body": k.label(), "density": g.label(), "xi": unit, "section": est})
        }
        Command::MaxSection { body, density } => {
            let k = parse_body(body)?;
            let g = parse_density(density, k.dim())?;
            let r = max_section(&k, &g, &scheme, &opt)?;
            json!({"body": k.label(), "density": g.label(), "result": r})
        }
        Command::IntersectionBody { body, dirs } => {
            let k = parse_body(body)?;
            let n = k.dim();
            let ik = intersection_body_of(&k, &scheme)?;
            let flat = seeded_directions(cli.seed, n, *dirs);
            let rows: Vec<Value> = flat
                .chunks(n)
                .map(|theta| Ok(json!({"theta": theta, "radial": ik.radial(theta)?})))
                .collect::<Result<_, Error>>()?;
            json!({"body": k.label(), "intersection_body": ik.label(), "samples": rows})
        }
        Command::Lozanovskii { body } => {
            let k = parse_body(body)?;
            let t = lozanovskii_box(&k, 1e-10)?;
            let check = verify_sandwich(&k, &t, 4096, cli.seed)?;
            json!({"body": k.label(), "t": t, "determinant": t.determinant(), "sandwich_ok": check.ok(), "sandwich": check})
        }
        Command::John { body } => {
            let k = parse_body(body)?;
            json!({"body": k.label(), "semi_axes": john_diagonal_ellipsoid(&k, 1e-10)?})
        }
        Command::Mahler { body } => {
            let k = parse_body(body)?;
            json!({"body": k.label(), "mahler_volume": mahler_volume(&k, &scheme, &SearchConfig::default())?})
        }
        Command::Check {
            which,
            body,
            density,
            composite,
        } => {
            let k = parse_body(body)?;
            let g = parse_density(density, k.dim())?;
            let report = match which {
                CheckArg::Eq1 => check_hyperplane_volume(&k, &scheme, &opt)?,
                CheckArg::Eq2 => check_hyperplane_unconditional(&k, &g, &scheme, &opt)?,
                CheckArg::Eq3 => check_hyperplane_general(&k, &g, &scheme, &opt)?,
                CheckArg::Thm2 => check_dual_vr(&k, &g, &scheme, &opt)?,
                CheckArg::Prop1 if *composite => check_stability(&StabilitySpec::lozanovskii_composite(&k, g)?, &scheme, &opt)?,
                CheckArg::Prop1 => check_stability(
                    &StabilitySpec {
                        body: k,
                        mode: StabilityMode::Direct { f: g.one_plus() },
                    },
                    &scheme,
                    &opt,
                )?,
            };
            let pass = report.pass;
            emit(&serde_json::to_value(&report)?, cli)?;
            return Ok(pass);
        }
        Command::Run { config } => {
            let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("hyperslice-out"));
            let outcome = run_experiment(Path::new(config), &out)?;
            for e in &outcome.errors {
                eprintln!("error: {e}");
            }
            let failed = outcome.reports.iter().filter(|r| !r.pass).count();
            eprintln!(
                "{} cells, {} failed, {} errors, {} skipped; results in {}",
                outcome.reports.len() + outcome.errors.len(),
                failed,
                outcome.errors.len(),
                outcome.skipped.len(),
                out.display()
            );
            return Ok(outcome.all_pass);
        }
    };
    emit(&value, cli)?;
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("hyperslice: {e}");
            ExitCode::from(if matches!(e, Error::Usage(_)) { 2 } else { 3 })
        }
    }
}
