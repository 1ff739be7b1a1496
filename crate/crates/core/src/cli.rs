//! Command-line driver. [`run`] does all the work and returns the exit code with the
//! text for stdout and stderr, so the binary is a thin wrapper.
//!
//! Exit codes: 0 all selected residuals below tolerance, 1 residual failure,
//! 2 schema or argument error, 3 domain or singularity abort.

use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use num_rational::BigRational;
use serde_json::{json, Value};

use crate::catalog::{catalog_entry, catalog_names, default_registries, phase_samples, run_registry, CatalogEntry, Registry, RunOptions};
use crate::dynamics::{integral_defect, poisson_bracket, SystemSpec, SystemSpecJson};
use crate::error::{Error, Result};
use crate::fields::{parse, ChartPoint, Gauss};
use crate::integrability::{GridOptions, ResidualReport, TauMode};
use crate::reconstruct::{
    integrate_killing, integrate_structure_proper_flat, potential_path_independence, precondition_warnings, ChartPath, IntegratorOptions,
    KillingSeed, PotentialSeed, PotentialState, StructureSeed,
};
use crate::sphere::{SpherePair, SymTensor3};
use crate::structure::StructureFunctions;

#[derive(Parser, Debug)]
#[command(name = "surfint", version, about = "Verify and reconstruct second-order superintegrable systems on surfaces")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evaluate residual registries of a system (catalog name or JSON file).
    Verify(VerifyArgs),
    /// Integrate a potential, Killing or flat proper structure seed along paths.
    Reconstruct(ReconstructArgs),
    /// Scan the sphere obstruction of a pair of trace-free tensors.
    Sphere(SphereArgs),
    /// Bracket defects `{F, H} − ρ(p)H` at random phase points.
    Bracket(BracketArgs),
    /// List catalog entries, or print one as JSON.
    Catalog { name: Option<String> },
}

#[derive(Args, Debug)]
struct Common {
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the chart grid.
    #[arg(long, num_args = 2, value_names = ["NX", "NY"])]
    grid: Option<Vec<usize>>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// Catalog name or path to a system JSON file.
    system: String,
    /// Comma-separated registries (default: the entry's expected set).
    #[arg(long, value_delimiter = ',')]
    registry: Vec<String>,
    #[arg(long, default_value_t = 1e-9)]
    tolerance: f64,
    /// Divide residuals by 1 + the largest term.
    #[arg(long)]
    relative: bool,
    /// Phase samples for the bracket registry.
    #[arg(long, default_value_t = 100)]
    samples: usize,
    /// Replace a field: `s=EXPR`, `t=EXPR`, `tz=EXPR` or `V=EXPR`.
    #[arg(long = "set", value_name = "KEY=EXPR")]
    set: Vec<String>,
    #[command(flatten)]
    common: Common,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Mode {
    Conformal,
    Proper,
}

#[derive(Args, Debug)]
struct ReconstructArgs {
    /// Catalog name or path to a system JSON file (not needed with --structure-seed).
    system: Option<String>,
    #[arg(long, num_args = 2, value_names = ["X", "Y"], allow_negative_numbers = true)]
    target: Vec<f64>,
    #[arg(long, num_args = 2, value_names = ["X", "Y"], allow_negative_numbers = true)]
    start: Option<Vec<f64>>,
    /// Potential seed `V, Re V_z, Im V_z, ΔV` at the start point.
    #[arg(long, num_args = 4, allow_negative_numbers = true, default_values_t = [1.0, 0.0, 0.0, 0.0])]
    seed: Vec<f64>,
    /// Conformal Killing seed `Re c₁, Im c₁, Re c₂, Im c₂` instead of a potential.
    #[arg(long, num_args = 4, allow_negative_numbers = true)]
    killing: Option<Vec<f64>>,
    /// Flat proper structure seed `Re s, Im s, Re ξ, Im ξ, Re t_z, Im t_z`.
    #[arg(long = "structure-seed", num_args = 6, allow_negative_numbers = true)]
    structure_seed: Option<Vec<f64>>,
    #[arg(long, default_value_t = 4)]
    paths: usize,
    #[arg(long, value_enum, default_value_t = Mode::Conformal)]
    mode: Mode,
    /// Integrator tolerance per unit length.
    #[arg(long, default_value_t = 1e-10)]
    tolerance: f64,
    /// Relative tolerance on the algebraic seed conditions.
    #[arg(long = "seed-tolerance", default_value_t = 1e-9)]
    seed_tolerance: f64,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct SphereArgs {
    /// First tensor `xx xy xz yy yz zz` (integers or fractions).
    #[arg(long, num_args = 6, allow_hyphen_values = true, required = true)]
    l1: Vec<String>,
    #[arg(long, num_args = 6, allow_hyphen_values = true, required = true)]
    l2: Vec<String>,
    /// Scan rectangle `x0 x1 y0 y1` (fractions allowed).
    #[arg(long, num_args = 4, allow_hyphen_values = true, default_values_t = ["-1".to_string(), "1".to_string(), "-1".to_string(), "1".to_string()])]
    domain: Vec<String>,
    /// Evaluate the cleared polynomial in exact rational arithmetic.
    #[arg(long)]
    exact: bool,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct BracketArgs {
    system: String,
    #[arg(long, default_value_t = 100)]
    samples: usize,
    #[arg(long = "rng-seed", default_value_t = 1)]
    rng_seed: u64,
    /// Also report `{F_α, F_β}` for two observables (0 is the Hamiltonian).
    #[arg(long, num_args = 2, value_names = ["ALPHA", "BETA"])]
    pair: Option<Vec<usize>>,
    #[arg(long, default_value_t = 1e-9)]
    tolerance: f64,
    #[command(flatten)]
    common: Common,
}

/// Result of one invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Parse(_) | Error::Schema(_) | Error::Invalid(_) | Error::NotReal(_) | Error::NotFlatGauge => 2,
        Error::NotProper { .. } => 1,
        Error::Domain(_)
        | Error::TooManyExclusions { .. }
        | Error::StepFailure { .. }
        | Error::DomainExit { .. }
        | Error::SeedObstruction { .. }
        | Error::NorthPole
        | Error::SingularDenominator => 3,
    }
}

fn error_json(e: &Error) -> Value {
    let kind = match e {
        Error::Domain(_) => "Domain",
        Error::Parse(_) => "Parse",
        Error::Schema(_) => "Schema",
        Error::Invalid(_) => "Invalid",
        Error::NotReal(_) => "NotReal",
        Error::NotProper { .. } => "NotProper",
        Error::NotFlatGauge => "NotFlatGauge",
        Error::TooManyExclusions { .. } => "TooManyExclusions",
        Error::StepFailure { .. } => "StepFailure",
        Error::DomainExit { .. } => "DomainExit",
        Error::SeedObstruction { .. } => "SeedObstruction",
        Error::NorthPole => "NorthPole",
        Error::SingularDenominator => "SingularDenominator",
    };
    let mut v = json!({ "error": kind, "message": e.to_string() });
    if let Error::SeedObstruction { remn, dremn } = e {
        v["remn"] = json!(remn);
        v["dremn"] = json!(dremn);
    }
    v
}

/// Round every float to 12 significant digits so reports are stable across platforms.
fn fixed(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().unwrap();
            format!("{:.11e}", x).parse::<f64>().ok().and_then(serde_json::Number::from_f64).map(Value::Number).unwrap_or(Value::Null)
        }
        Value::Array(a) => Value::Array(a.into_iter().map(fixed).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, fixed(v))).collect()),
        other => other,
    }
}

fn emit(common: &Common, report: Value, code: i32) -> Outcome {
    let text = serde_json::to_string_pretty(&fixed(report)).unwrap() + "\n";
    match &common.out {
        Some(path) => match std::fs::write(path, &text) {
            Ok(()) => Outcome { code, stdout: String::new(), stderr: String::new() },
            Err(e) => Outcome { code: 2, stdout: String::new(), stderr: format!("cannot write {}: {}\n", path.display(), e) },
        },
        None => Outcome { code, stdout: text, stderr: String::new() },
    }
}

fn fail(e: &Error) -> Outcome {
    Outcome { code: exit_code(e), stdout: String::new(), stderr: serde_json::to_string(&error_json(e)).unwrap() + "\n" }
}

fn load_system(name: &str) -> Result<CatalogEntry> {
    if let Some(e) = catalog_entry(name) {
        return Ok(e);
    }
    let text = std::fs::read_to_string(name).map_err(|e| Error::Schema(format!("cannot read `{}`: {}", name, e)))?;
    let js: SystemSpecJson = serde_json::from_str(&text).map_err(|e| Error::Schema(e.to_string()))?;
    let spec = SystemSpec::from_json(&js)?;
    let registries = default_registries(&spec);
    Ok(CatalogEntry { name: name.to_string(), spec, registries })
}

fn apply_grid(entry: &mut CatalogEntry, grid: &Option<Vec<usize>>) -> Result<()> {
    if let Some(g) = grid {
        let chart = entry.spec.chart.clone().with_domain(entry.spec.chart.domain, [g[0], g[1]])?;
        entry.spec.chart = chart.clone();
        if let Some(sf) = &entry.spec.structure {
            entry.spec.structure = Some(rebase(sf, chart)?);
        }
    }
    Ok(())
}

fn rebase(sf: &StructureFunctions, chart: crate::surface::ConformalChart) -> Result<StructureFunctions> {
    match sf.t() {
        Some(t) => StructureFunctions::new(chart, sf.s().clone(), t.clone(), sf.base()),
        None => Ok(StructureFunctions::from_gradient(chart, sf.s().clone(), sf.tz().clone(), sf.base())),
    }
}

fn apply_overrides(entry: &mut CatalogEntry, sets: &[String]) -> Result<()> {
    for item in sets {
        let (key, text) = item.split_once('=').ok_or_else(|| Error::Invalid(format!("expected KEY=EXPR, got `{}`", item)))?;
        let e = parse(text)?;
        if key == "V" {
            if !e.is_real_tree() {
                return Err(Error::NotReal(e.to_string()));
            }
            entry.spec.v = e;
            continue;
        }
        let chart = entry.spec.chart.clone();
        let old = entry.spec.structure.clone().unwrap_or_else(|| StructureFunctions::zero(chart.clone()));
        let sf = match key {
            "s" => match old.t() {
                Some(t) => StructureFunctions::new(chart, e, t.clone(), old.base())?,
                None => StructureFunctions::from_gradient(chart, e, old.tz().clone(), old.base()),
            },
            "t" => StructureFunctions::new(chart, old.s().clone(), e, old.base())?,
            "tz" => StructureFunctions::from_gradient(chart, old.s().clone(), e, old.base()),
            _ => return Err(Error::Invalid(format!("unknown field `{}`", key))),
        };
        entry.spec.structure = Some(sf);
    }
    Ok(())
}

fn report_json(r: &ResidualReport, tol: f64) -> Value {
    json!({
        "entries": serde_json::to_value(r).unwrap(),
        "excluded": r.excluded,
        "failing": r.failing(tol),
    })
}

fn cmd_verify(a: &VerifyArgs) -> Outcome {
    let run = || -> Result<(Value, bool)> {
        let mut entry = load_system(&a.system)?;
        apply_overrides(&mut entry, &a.set)?;
        apply_grid(&mut entry, &a.common.grid)?;
        let regs: Vec<Registry> = if a.registry.is_empty() {
            entry.registries.clone()
        } else {
            a.registry.iter().map(|s| s.trim().parse()).collect::<Result<_>>()?
        };
        let opts = RunOptions { grid: GridOptions { relative: a.relative, ..Default::default() }, phase_samples: a.samples, rng_seed: 1 };
        let mut out = BTreeMap::new();
        let mut pass = true;
        for r in regs {
            let rep = run_registry(&entry.spec, r, &opts)?;
            pass &= rep.passes(a.tolerance);
            out.insert(r.name().to_string(), report_json(&rep, a.tolerance));
        }
        Ok((json!({ "system": entry.name, "tolerance": a.tolerance, "pass": pass, "registries": out }), pass))
    };
    match run() {
        Ok((v, pass)) => emit(&a.common, v, if pass { 0 } else { 1 }),
        Err(e) => fail(&e),
    }
}

fn state_json(s: &PotentialState) -> Value {
    json!({ "V": [s.v.re, s.v.im], "Vz": [s.vz.re, s.vz.im], "Vzbar": [s.vw.re, s.vw.im], "Laplacian": [s.lap.re, s.lap.im] })
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn cmd_reconstruct(a: &ReconstructArgs) -> Outcome {
    let run = || -> Result<Value> {
        if a.target.len() != 2 {
            return Err(Error::Invalid("--target X Y is required".into()));
        }
        let target = ChartPoint::new(a.target[0], a.target[1]);
        let start = a.start.as_ref().map(|v| ChartPoint::new(v[0], v[1])).unwrap_or(ChartPoint::new(0.0, 0.0));
        let opts = IntegratorOptions { tol: a.tolerance, ..Default::default() };
        if let Some(v) = &a.structure_seed {
            let seed = StructureSeed { s: c(v[0], v[1]), xi: c(v[2], v[3]), tz: c(v[4], v[5]) };
            let samples = integrate_structure_proper_flat(&seed, &ChartPath::straight(start, target), &opts, a.seed_tolerance)?;
            let y = &samples.last().unwrap().state;
            let names = ["s", "sbar", "xi", "xibar", "t", "tz", "tzbar"];
            let end: BTreeMap<&str, [f64; 2]> = names.iter().zip(y).map(|(n, v)| (*n, [v.re, v.im])).collect();
            return Ok(json!({ "kind": "structure", "start": start, "target": target, "end": end, "steps": samples.len() - 1 }));
        }
        let name = a.system.as_ref().ok_or_else(|| Error::Invalid("a system is required".into()))?;
        let mut entry = load_system(name)?;
        apply_grid(&mut entry, &a.common.grid)?;
        let sf = entry.spec.structure.as_ref().ok_or_else(|| Error::Invalid("the system has no structure functions".into()))?;
        let sf = if sf.base() != start { rebase_at(sf, start)? } else { sf.clone() };
        if let Some(k) = &a.killing {
            let seed = KillingSeed { c1: c(k[0], k[1]), c2: c(k[2], k[3]) };
            let mut paths = vec![ChartPath::straight(start, target)];
            paths.extend(ChartPath::fan(start, target));
            paths.truncate(a.paths.max(1));
            let ends = paths.iter().map(|p| Ok(integrate_killing(&sf, &seed, p, &opts)?.pop().unwrap().state)).collect::<Result<Vec<_>>>()?;
            let mut worst: f64 = 0.0;
            for i in 0..ends.len() {
                for j in i + 1..ends.len() {
                    worst = worst.max(ends[i].iter().zip(&ends[j]).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max));
                }
            }
            let endpoints: Vec<Value> = ends.iter().map(|e| json!({ "c1": [e[0].re, e[0].im], "c2": [e[1].re, e[1].im] })).collect();
            return Ok(json!({ "kind": "killing", "start": start, "target": target, "endpoints": endpoints, "discrepancy": worst }));
        }
        let mode = match a.mode {
            Mode::Conformal => TauMode::Conformal,
            Mode::Proper => TauMode::Proper,
        };
        let seed = PotentialSeed::new(a.seed[0], c(a.seed[1], a.seed[2]), a.seed[3]);
        let (worst, ends) = potential_path_independence(&sf, mode, &seed, start, target, a.paths, &opts)?;
        let warnings = precondition_warnings(&sf, mode, 1e-8);
        Ok(json!({
            "kind": "potential",
            "start": start,
            "target": target,
            "endpoints": ends.iter().map(state_json).collect::<Vec<_>>(),
            "discrepancy": worst,
            "warnings": warnings,
        }))
    };
    match run() {
        Ok(v) => emit(&a.common, v, 0),
        Err(e) => fail(&e),
    }
}

fn rebase_at(sf: &StructureFunctions, base: ChartPoint) -> Result<StructureFunctions> {
    match sf.t() {
        Some(t) => StructureFunctions::new(sf.chart().clone(), sf.s().clone(), t.clone(), base),
        None => Ok(StructureFunctions::from_gradient(sf.chart().clone(), sf.s().clone(), sf.tz().clone(), base)),
    }
}

fn rational(s: &str) -> Result<BigRational> {
    Gauss::parse_rational(s.trim()).ok_or_else(|| Error::Schema(format!("bad rational `{}`", s)))
}

fn cmd_sphere(a: &SphereArgs) -> Outcome {
    let run = || -> Result<Value> {
        let l1 = SymTensor3::from_strs(&a.l1)?;
        let l2 = SymTensor3::from_strs(&a.l2)?;
        let pair = SpherePair::new(&l1, &l2)?;
        let dom: Vec<BigRational> = a.domain.iter().map(|s| rational(s)).collect::<Result<_>>()?;
        let (nx, ny) = match &a.common.grid {
            Some(g) => (g[0], g[1]),
            None => (11, 11),
        };
        if nx < 2 || ny < 2 {
            return Err(Error::Invalid("grid must be at least 2x2".into()));
        }
        let step = |lo: &BigRational, hi: &BigRational, k: usize, n: usize| lo + (hi - lo) * BigRational::new((k as i64).into(), ((n - 1) as i64).into());
        let mut points = Vec::new();
        let mut singular = 0usize;
        let mut max: f64 = 0.0;
        for j in 0..ny {
            let y = step(&dom[2], &dom[3], j, ny);
            for i in 0..nx {
                let x = step(&dom[0], &dom[1], i, nx);
                let z = Gauss::new(x.clone(), y.clone());
                if a.exact {
                    match pair.cleared_at(&z) {
                        Ok(v) => {
                            let (re, im) = (&v.re, &v.im);
                            points.push(json!({ "x": x.to_string(), "y": y.to_string(), "cleared": { "re": re.to_string(), "im": im.to_string() } }));
                        }
                        Err(Error::SingularDenominator) => {
                            singular += 1;
                            points.push(json!({ "x": x.to_string(), "y": y.to_string(), "cleared": null }));
                        }
                        Err(e) => return Err(e),
                    }
                } else {
                    let p = ChartPoint::from_z(z.to_c64());
                    match pair.residual_at(p) {
                        Ok(r) => {
                            max = max.max(r);
                            points.push(json!({ "x": p.x, "y": p.y, "residual": r }));
                        }
                        Err(Error::SingularDenominator) | Err(Error::Domain(_)) => {
                            singular += 1;
                            points.push(json!({ "x": p.x, "y": p.y, "residual": null }));
                        }
                        Err(e) => return Err(e),
                    }
                }
            }
        }
        let mut v = json!({ "mode": if a.exact { "exact" } else { "float" }, "grid": [nx, ny], "singular": singular, "points": points });
        if !a.exact {
            v["max"] = json!(max);
        }
        Ok(v)
    };
    match run() {
        Ok(v) => emit(&a.common, v, 0),
        Err(e) => fail(&e),
    }
}

fn cmd_bracket(a: &BracketArgs) -> Outcome {
    let run = || -> Result<(Value, bool)> {
        let mut entry = load_system(&a.system)?;
        apply_grid(&mut entry, &a.common.grid)?;
        let spec = &entry.spec;
        let pts = phase_samples(&spec.chart, a.samples, a.rng_seed);
        let mut integrals = Vec::new();
        let mut pass = true;
        for alpha in 1..spec.n_observables() {
            let (mut t, mut cu, mut li) = (0.0f64, 0.0f64, 0.0f64);
            for pp in &pts {
                let d = integral_defect(spec, alpha, pp)?;
                t = t.max(d.total);
                cu = cu.max(d.cubic);
                li = li.max(d.linear);
            }
            pass &= t < a.tolerance;
            integrals.push(json!({ "alpha": alpha, "defect": t, "cubic": cu, "linear": li }));
        }
        let mut v = json!({ "system": entry.name, "samples": a.samples, "integrals": integrals, "pass": pass });
        if let Some(p) = &a.pair {
            let f = spec.observable(p[0])?.poly(&spec.chart);
            let g = spec.observable(p[1])?.poly(&spec.chart);
            let b = poisson_bracket(&f, &g);
            let vals = pts.iter().map(|pp| b.eval(pp)).collect::<Result<Vec<_>>>()?;
            let max = vals.iter().map(|v| v.norm()).fold(0.0, f64::max);
            v["bracket"] = json!({ "alpha": p[0], "beta": p[1], "max_abs": max });
        }
        Ok((v, pass))
    };
    match run() {
        Ok((v, pass)) => emit(&a.common, v, if pass { 0 } else { 1 }),
        Err(e) => fail(&e),
    }
}

fn cmd_catalog(name: &Option<String>) -> Outcome {
    let v = match name {
        None => json!(catalog_names()),
        Some(n) => match catalog_entry(n) {
            Some(e) => json!({
                "name": e.name,
                "registries": e.registries.iter().map(|r| r.name()).collect::<Vec<_>>(),
                "system": serde_json::to_value(e.spec.to_json()).unwrap(),
            }),
            None => return fail(&Error::Invalid(format!("no catalog entry `{}`", n))),
        },
    };
    Outcome { code: 0, stdout: serde_json::to_string_pretty(&v).unwrap() + "\n", stderr: String::new() }
}

pub fn run<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            return if code == 0 {
                Outcome { code, stdout: text, stderr: String::new() }
            } else {
                Outcome { code, stdout: String::new(), stderr: text }
            };
        }
    };
    match &cli.cmd {
        Command::Verify(a) => cmd_verify(a),
        Command::Reconstruct(a) => cmd_reconstruct(a),
        Command::Sphere(a) => cmd_sphere(a),
        Command::Bracket(a) => cmd_bracket(a),
        Command::Catalog { name } => cmd_catalog(name),
    }
}
