//! Named systems with the registries each is expected to pass, plus the registry runner
//! shared by the CLI and the test suite.
//!
//! Only the oscillator is written down by hand; the other entries come out of the gauge,
//! flat-proper and sphere pipelines.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dynamics::{integral_defect, oscillator_integrals, oscillator_potential, Observable, PhasePoint, SystemSpec};
use crate::error::{Error, Result};
use crate::fields::{parse, ChartPoint, Expr};
use crate::flatspace::{proper_flat_system, FlatCorrespondence};
use crate::integrability::{
    bertrand_darboux_residual, conformal_residuals, evaluate, proper_residuals, wilczynski_residual, Equation, GridOptions, ResidualEntry,
    ResidualReport, TauMode,
};
use crate::reconstruct::find_admissible_seed;
use crate::sphere::{SpherePair, SymTensor3};
use crate::structure::StructureFunctions;
use crate::surface::ConformalChart;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Registry {
    Conformal,
    Proper,
    Flat,
    Wilczynski,
    BertrandDarboux,
    Bracket,
}

impl Registry {
    pub const ALL: [Registry; 6] =
        [Registry::Conformal, Registry::Proper, Registry::Flat, Registry::Wilczynski, Registry::BertrandDarboux, Registry::Bracket];

    pub fn name(self) -> &'static str {
        match self {
            Registry::Conformal => "conformal",
            Registry::Proper => "proper",
            Registry::Flat => "flat",
            Registry::Wilczynski => "wilczynski",
            Registry::BertrandDarboux => "bertrand-darboux",
            Registry::Bracket => "bracket",
        }
    }
}

impl fmt::Display for Registry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Registry {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Registry::ALL.into_iter().find(|r| r.name() == s).ok_or_else(|| Error::Invalid(format!("unknown registry `{}`", s)))
    }
}

/// Options for [`run_registry`].
#[derive(Clone, Debug)]
pub struct RunOptions {
    pub grid: GridOptions,
    /// Phase-space samples for the bracket registry.
    pub phase_samples: usize,
    pub rng_seed: u64,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { grid: GridOptions::default(), phase_samples: 100, rng_seed: 1 }
    }
}

fn structure(spec: &SystemSpec) -> Result<&StructureFunctions> {
    spec.structure.as_ref().ok_or_else(|| Error::Invalid("this registry needs structure functions".into()))
}

/// Random phase points over the chart domain, momenta in `[−1, 1]²`.
pub fn phase_samples(chart: &ConformalChart, n: usize, seed: u64) -> Vec<PhasePoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let [x0, x1, y0, y1] = chart.domain;
    (0..n).map(|_| PhasePoint::new(rng.gen_range(x0..=x1), rng.gen_range(y0..=y1), rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0))).collect()
}

fn bracket_report(spec: &SystemSpec, opts: &RunOptions) -> Result<ResidualReport> {
    let mut report = ResidualReport::default();
    let pts = phase_samples(&spec.chart, opts.phase_samples, opts.rng_seed);
    for alpha in 1..spec.n_observables() {
        for part in ["defect", "cubic", "linear"] {
            report.entries.insert(format!("{}[{}]", part, alpha), ResidualEntry { max_abs: 0.0, argmax: [f64::NAN, f64::NAN], samples: 0 });
        }
        for pp in &pts {
            let d = match integral_defect(spec, alpha, pp) {
                Ok(d) => d,
                Err(Error::Domain(_)) => {
                    report.excluded += 1;
                    continue;
                }
                Err(e) => return Err(e),
            };
            for (part, v) in [("defect", d.total), ("cubic", d.cubic), ("linear", d.linear)] {
                let e = report.entries.get_mut(&format!("{}[{}]", part, alpha)).unwrap();
                e.samples += 1;
                if v > e.max_abs || e.argmax[0].is_nan() {
                    e.max_abs = e.max_abs.max(v);
                    e.argmax = [pp.x, pp.y];
                }
            }
        }
    }
    Ok(report)
}

pub fn run_registry(spec: &SystemSpec, reg: Registry, opts: &RunOptions) -> Result<ResidualReport> {
    match reg {
        Registry::Conformal => conformal_residuals(structure(spec)?, &opts.grid),
        Registry::Proper => proper_residuals(structure(spec)?, &opts.grid),
        Registry::Flat => {
            let fc = FlatCorrespondence::from_fields(structure(spec)?)?;
            let mut eqs = fc.obstruction_equations();
            eqs.push(Equation::new("dz-beta", vec![vec![fc.beta.diff(crate::fields::Var::Z)]]));
            evaluate(&spec.chart, &eqs, &opts.grid)
        }
        Registry::Wilczynski => wilczynski_residual(structure(spec)?, &spec.v, TauMode::Conformal, &opts.grid),
        Registry::BertrandDarboux => {
            let eqs: Vec<Equation> = spec
                .integrals
                .iter()
                .enumerate()
                .map(|(k, o)| Equation::new(&format!("BD[{}]", k + 1), vec![vec![bertrand_darboux_residual(&spec.chart, &o.c, &spec.v)]]))
                .collect();
            evaluate(&spec.chart, &eqs, &opts.grid)
        }
        Registry::Bracket => bracket_report(spec, opts),
    }
}

#[derive(Clone, Debug)]
pub struct CatalogEntry {
    pub name: String,
    pub spec: SystemSpec,
    pub registries: Vec<Registry>,
}

pub const OSCILLATOR_ALPHA: [f64; 4] = [1.0, 1.0, 1.0, 0.0];

pub fn harmonic_oscillator(alpha: [f64; 4]) -> CatalogEntry {
    let chart = ConformalChart::flat();
    let sf = StructureFunctions::new(chart.clone(), Expr::zero(), Expr::zero(), ChartPoint::new(0.0, 0.0)).unwrap();
    CatalogEntry {
        name: "harmonic-oscillator".into(),
        spec: SystemSpec { chart, structure: Some(sf), v: oscillator_potential(alpha), integrals: oscillator_integrals(alpha) },
        registries: Registry::ALL.to_vec(),
    }
}

/// The oscillator after `g → e^{2Υ}g`, `V → e^{−2Υ}V`, with `Υ = zz̄/5 + (z+z̄)/7`.
pub fn rescaled_oscillator() -> CatalogEntry {
    let base = harmonic_oscillator(OSCILLATOR_ALPHA).spec;
    let ups = parse("z*zbar/5 + (z + zbar)/7").unwrap();
    let sf = base.structure.unwrap().gauge_transform(&ups).unwrap();
    let v = &base.v * &(&Expr::int(-2) * &ups).exp();
    let integrals = base.integrals.into_iter().map(|o| Observable::new(o.c.rescaled(&ups), o.w)).collect();
    CatalogEntry {
        name: "rescaled-oscillator".into(),
        spec: SystemSpec { chart: sf.chart().clone(), structure: Some(sf), v, integrals },
        registries: vec![Registry::Conformal, Registry::Wilczynski, Registry::BertrandDarboux, Registry::Bracket],
    }
}

/// Flat proper structure grown from the admissible seed with `s = 1`, `arg t_z = 1`.
pub fn flat_proper() -> CatalogEntry {
    let seed = find_admissible_seed(Complex64::new(1.0, 0.0), 1.0, 3.0).expect("admissible seed");
    let sf = proper_flat_system(&seed, ChartPoint::new(0.0, 0.0), [-0.3, 0.3, -0.3, 0.3], [11, 11]).unwrap();
    CatalogEntry {
        name: "flat-proper".into(),
        spec: SystemSpec { chart: sf.chart().clone(), structure: Some(sf), v: Expr::zero(), integrals: vec![] },
        registries: vec![Registry::Conformal, Registry::Proper, Registry::Flat],
    }
}

/// Sphere system spanned by `diag(1, −1, 0)` and `diag(0, 1, −1)`.
pub fn sphere_generic() -> CatalogEntry {
    let pair = SpherePair::new(&SymTensor3::from_ints([1, 0, 0, -1, 0, 0]), &SymTensor3::from_ints([0, 0, 0, 1, 0, -1])).unwrap();
    let chart = ConformalChart::sphere().with_domain([0.13, 0.61, 0.11, 0.53], [11, 11]).unwrap();
    let sf = StructureFunctions::from_gradient(chart.clone(), pair.structure.s().clone(), pair.structure.tz().clone(), ChartPoint::new(0.13, 0.11));
    CatalogEntry {
        name: "sphere-generic".into(),
        spec: SystemSpec { chart, structure: Some(sf), v: Expr::zero(), integrals: vec![] },
        registries: vec![Registry::Conformal, Registry::Proper],
    }
}

pub fn catalog_names() -> [&'static str; 4] {
    ["harmonic-oscillator", "rescaled-oscillator", "flat-proper", "sphere-generic"]
}

pub fn catalog_entry(name: &str) -> Option<CatalogEntry> {
    match name {
        "harmonic-oscillator" => Some(harmonic_oscillator(OSCILLATOR_ALPHA)),
        "rescaled-oscillator" => Some(rescaled_oscillator()),
        "flat-proper" => Some(flat_proper()),
        "sphere-generic" => Some(sphere_generic()),
        _ => None,
    }
}

/// Registries that apply to a system read from a file.
pub fn default_registries(spec: &SystemSpec) -> Vec<Registry> {
    let mut regs = Vec::new();
    if spec.structure.is_some() {
        regs.extend([Registry::Conformal, Registry::Wilczynski]);
    }
    if !spec.integrals.is_empty() {
        regs.extend([Registry::BertrandDarboux, Registry::Bracket]);
    }
    regs
}

/// Reports of every expected registry of an entry.
pub fn check_entry(entry: &CatalogEntry, opts: &RunOptions) -> Result<BTreeMap<Registry, ResidualReport>> {
    entry.registries.iter().map(|&r| Ok((r, run_registry(&entry.spec, r, opts)?))).collect()
}
