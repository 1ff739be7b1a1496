//! Named residual registries for the structural equations, evaluated over a chart grid.
//!
//! Every tensor equation is reduced to its one or two independent complex components
//! in isothermal coordinates. An [`Equation`] stores each component as a list of terms
//! whose sum is the residual, so the relative mode can normalize by term magnitude.

use std::collections::{BTreeMap, HashMap};

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::CTensor;
use crate::error::{Error, Result};
use crate::fields::{ChartPoint, Expr, Tape, Var};
use crate::reconstruct::SecondProlongationCoefficients;
use crate::structure::{Jet, StructureFunctions};
use crate::surface::ConformalChart;

/// Which τ enters the prolongation: the derived one, or `τ ≡ 0` for proper systems.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TauMode {
    Conformal,
    Proper,
}

#[derive(Clone, Debug)]
pub struct Equation {
    pub name: String,
    /// Each component is a sum of terms.
    pub components: Vec<Vec<Expr>>,
}

impl Equation {
    pub fn new(name: &str, components: Vec<Vec<Expr>>) -> Self {
        Equation { name: name.to_string(), components }
    }

    /// Residual fields, one per component.
    pub fn residuals(&self) -> Vec<Expr> {
        self.components.iter().map(|c| Expr::add_all(c.clone())).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualEntry {
    pub max_abs: f64,
    pub argmax: [f64; 2],
    pub samples: usize,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ResidualReport {
    pub entries: BTreeMap<String, ResidualEntry>,
    /// Grid points skipped because some field was singular there.
    pub excluded: usize,
}

impl Serialize for ResidualReport {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.entries.serialize(s)
    }
}

impl ResidualReport {
    pub fn get(&self, name: &str) -> Option<&ResidualEntry> {
        self.entries.get(name)
    }

    pub fn max(&self, name: &str) -> f64 {
        self.entries.get(name).map_or(f64::NAN, |e| e.max_abs)
    }

    /// Worst entry overall.
    pub fn worst(&self) -> Option<(&str, f64)> {
        self.entries
            .iter()
            .map(|(k, e)| (k.as_str(), e.max_abs))
            .fold(None, |acc: Option<(&str, f64)>, (k, v)| match acc {
                Some((_, w)) if !(v > w) => acc,
                _ => Some((k, v)),
            })
    }

    /// Names of entries whose maximum is not below `tol` (NaN counts as failing).
    pub fn failing(&self, tol: f64) -> Vec<String> {
        self.entries.iter().filter(|(_, e)| !(e.max_abs < tol)).map(|(k, _)| k.clone()).collect()
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.failing(tol).is_empty()
    }

    pub fn merge(&mut self, other: ResidualReport) {
        self.entries.extend(other.entries);
        self.excluded = self.excluded.max(other.excluded);
    }
}

#[derive(Clone, Copy, Debug)]
pub struct GridOptions {
    /// Divide by `1 + max |term|` at each point.
    pub relative: bool,
    /// Reports with more singular points than this fraction are an error.
    pub max_excluded_fraction: f64,
    /// Threshold on `max |τ|` for the proper registry gate.
    pub proper_gate: f64,
}

impl Default for GridOptions {
    fn default() -> Self {
        GridOptions { relative: false, max_excluded_fraction: 0.1, proper_gate: 1e-8 }
    }
}

/// Evaluate equations at the given points.
pub fn evaluate_at(points: &[ChartPoint], eqs: &[Equation], opts: &GridOptions) -> Result<ResidualReport> {
    let mut flat = Vec::new();
    let mut layout = Vec::new();
    for eq in eqs {
        let mut comps = Vec::new();
        for c in &eq.components {
            let start = flat.len();
            flat.extend(c.iter().cloned());
            comps.push(start..flat.len());
        }
        layout.push(comps);
    }
    let tape = Tape::compile(&flat);
    let mut best: Vec<Option<(f64, ChartPoint)>> = vec![None; eqs.len()];
    let mut excluded = 0;
    let mut samples = 0;
    for &p in points {
        let vals = match tape.eval(p) {
            Ok(v) => v,
            Err(_) => {
                excluded += 1;
                continue;
            }
        };
        samples += 1;
        for (k, comps) in layout.iter().enumerate() {
            let mut r = 0.0f64;
            for range in comps {
                let terms = &vals[range.clone()];
                let sum: Complex64 = terms.iter().sum();
                let mut v = sum.norm();
                if opts.relative {
                    let scale = terms.iter().map(|t| t.norm()).fold(0.0, f64::max);
                    v /= 1.0 + scale;
                }
                r = r.max(v);
            }
            match best[k] {
                Some((b, _)) if !(r > b) => {}
                _ => best[k] = Some((r, p)),
            }
        }
    }
    let total = points.len();
    if samples == 0 || excluded as f64 > opts.max_excluded_fraction * total as f64 {
        return Err(Error::TooManyExclusions { excluded, total });
    }
    let mut report = ResidualReport { entries: BTreeMap::new(), excluded };
    for (eq, b) in eqs.iter().zip(best) {
        let (m, p) = b.unwrap_or((0.0, ChartPoint::new(f64::NAN, f64::NAN)));
        report.entries.insert(eq.name.clone(), ResidualEntry { max_abs: m, argmax: [p.x, p.y], samples });
    }
    Ok(report)
}

/// Evaluate equations on the chart grid.
pub fn evaluate(chart: &ConformalChart, eqs: &[Equation], opts: &GridOptions) -> Result<ResidualReport> {
    evaluate_at(&chart.grid_points(), eqs, opts)
}

fn c(n: i64, d: i64) -> Expr {
    Expr::rat(n, d)
}

fn m(v: Vec<Expr>) -> Expr {
    Expr::mul_all(v)
}

/// General-gauge equations of the conformal prolongation.
pub fn conformal_equations(sf: &StructureFunctions) -> Vec<Equation> {
    let j = sf.jet();
    let Jet { s, sb, tz, tw, xi, xib, tau, taub, lz, lw, gz, phi, r, .. } = j.clone();
    let _ = (&sb, &taub);
    let phi2 = phi.powi(2);
    let rz = r.diff(Var::Z);
    let tau_coord = sf.tau_coordinate();
    let mut eqs = vec![
        Equation::new(
            "DS",
            vec![
                vec![s.diff(Var::Z), m(vec![c(-4, 3), tz.clone(), s.clone()]), m(vec![c(-4, 1), lz.clone(), s.clone()])],
                vec![
                    s.diff(Var::Zbar),
                    m(vec![c(2, 1), lw.clone(), s.clone()]),
                    m(vec![c(2, 3), s.clone(), tw.clone()]),
                    m(vec![c(-1, 2), xi.clone()]),
                ],
            ],
        ),
        Equation::new("DXi", dxi_components(&j)),
        Equation::new(
            "divTau",
            vec![vec![
                tau.diff(Var::Zbar),
                m(vec![c(-1, 4), phi2.clone(), rz.clone()]),
                m(vec![c(1, 2), phi2.clone(), r.clone(), tz.clone()]),
                m(vec![c(40, 9), s.clone(), sb.clone(), tz.clone()]),
                m(vec![c(2, 1), s.clone(), taub.clone()]),
                m(vec![c(8, 9), s.clone(), tw.powi(2)]),
                m(vec![c(-2, 1), s.clone(), xib.clone()]),
                m(vec![c(2, 3), tw.clone(), xi.clone()]),
            ]],
        ),
        Equation::new(
            "DDt",
            vec![vec![
                tz.diff(Var::Z),
                -(&gz * &tz),
                m(vec![c(-3, 2), tau_coord]),
                m(vec![c(-4, 3), tz.powi(2)]),
                m(vec![c(-2, 1), s.clone(), tw.clone()]),
                m(vec![c(1, 2), xi.clone()]),
            ]],
        ),
        Equation::new("Delta-t", vec![delta_t_terms(&j)]),
        Equation::new(
            "DS-sym",
            vec![vec![
                (&phi2 * &s).diff(Var::Z),
                m(vec![c(-3, 1), gz.clone(), phi2.clone(), s.clone()]),
                m(vec![c(-4, 3), phi2.clone(), s.clone(), tz.clone()]),
            ]],
        ),
    ];
    if sf.is_standard_gauge() {
        eqs.extend(standard_equations(&j));
    }
    if sf.is_flat_gauge() {
        eqs.extend(flat_equations(&j));
    }
    eqs
}

fn dxi_components(j: &Jet) -> Vec<Vec<Expr>> {
    vec![
        vec![
            j.xi.diff(Var::Z),
            m(vec![c(-16, 3), j.s.powi(2), j.sb.clone()]),
            m(vec![c(-4, 3), j.tz.clone(), j.xi.clone()]),
            m(vec![c(-4, 1), j.lz.clone(), j.xi.clone()]),
        ],
        vec![j.xi.diff(Var::Zbar), m(vec![c(-8, 3), j.s.clone(), j.xib.clone()])],
    ]
}

fn delta_t_terms(j: &Jet) -> Vec<Expr> {
    vec![
        j.tz.diff(Var::Zbar),
        m(vec![c(-4, 3), j.s.clone(), j.sb.clone()]),
        m(vec![c(-3, 8), j.phi.powi(2), j.r.clone()]),
    ]
}

/// Standard-gauge forms (`t ≡ 0`).
fn standard_equations(j: &Jet) -> Vec<Equation> {
    let (s, sb, xi, xib, lz, lw) = (&j.s, &j.sb, &j.xi, &j.xib, &j.lz, &j.lw);
    vec![
        Equation::new(
            "std:DS",
            vec![
                vec![s.diff(Var::Z), m(vec![c(-4, 1), lz.clone(), s.clone()])],
                vec![s.diff(Var::Zbar), m(vec![c(2, 1), lw.clone(), s.clone()]), m(vec![c(-1, 2), xi.clone()])],
            ],
        ),
        Equation::new(
            "std:DXi",
            vec![
                vec![xi.diff(Var::Z), m(vec![c(-4, 1), lz.clone(), xi.clone()]), m(vec![c(-16, 3), s.powi(2), sb.clone()])],
                vec![xi.diff(Var::Zbar), m(vec![c(-8, 3), s.clone(), xib.clone()])],
            ],
        ),
        Equation::new("std:Delta-t", vec![vec![j.r.clone(), m(vec![c(32, 9), s.clone(), sb.clone(), j.phi.powi(-2)])]]),
        Equation::new("std:tau", vec![vec![j.tau.clone(), m(vec![c(-1, 3), xi.clone()])]]),
    ]
}

/// Flat-gauge forms (`φ ≡ 1`).
fn flat_equations(j: &Jet) -> Vec<Equation> {
    let (s, sb, tz, tw, xi, xib, tau, taub) = (&j.s, &j.sb, &j.tz, &j.tw, &j.xi, &j.xib, &j.tau, &j.taub);
    vec![
        Equation::new("flat:Sz", vec![vec![s.diff(Var::Z), m(vec![c(-4, 3), tz.clone(), s.clone()])]]),
        Equation::new(
            "flat:Sw",
            vec![vec![s.diff(Var::Zbar), m(vec![c(-1, 2), xi.clone()]), m(vec![c(2, 3), tw.clone(), s.clone()])]],
        ),
        Equation::new(
            "flat:Xiz",
            vec![vec![xi.diff(Var::Z), m(vec![c(-16, 3), s.powi(2), sb.clone()]), m(vec![c(-4, 3), xi.clone(), tz.clone()])]],
        ),
        Equation::new("flat:Xiw", vec![vec![xi.diff(Var::Zbar), m(vec![c(-8, 3), s.clone(), xib.clone()])]]),
        Equation::new(
            "flat:hess-t",
            vec![vec![
                tz.diff(Var::Z),
                m(vec![c(-4, 3), tz.powi(2)]),
                m(vec![c(-2, 1), tw.clone(), s.clone()]),
                m(vec![c(-3, 2), tau.clone()]),
                m(vec![c(1, 2), xi.clone()]),
            ]],
        ),
        Equation::new("flat:Delta-t", vec![vec![tz.diff(Var::Zbar), m(vec![c(-4, 3), s.clone(), sb.clone()])]]),
        Equation::new(
            "flat:aleph-w",
            vec![vec![
                tau.diff(Var::Zbar),
                m(vec![c(40, 9), s.clone(), sb.clone(), tz.clone()]),
                m(vec![c(8, 9), s.clone(), tw.powi(2)]),
                m(vec![c(2, 3), xi.clone(), tw.clone()]),
                m(vec![c(-2, 1), s.clone(), xib.clone()]),
                m(vec![c(2, 1), s.clone(), taub.clone()]),
            ]],
        ),
    ]
}

pub fn conformal_residuals(sf: &StructureFunctions, opts: &GridOptions) -> Result<ResidualReport> {
    evaluate(sf.chart(), &conformal_equations(sf), opts)
}

/// Parameter names of the proper obstruction polynomial.
const PROPER_PARAMS: [&str; 6] = ["s", "sb", "xi", "xib", "tz", "tw"];

/// `Remn` as a polynomial in the structure jet with chart fields `φ`, `R` explicit.
pub fn remn_polynomial(chart: &ConformalChart) -> Expr {
    let p = |n: &str| Expr::param(n);
    let phi2 = chart.phi().powi(2);
    let r = chart.scalar_curvature();
    Expr::add_all(vec![
        m(vec![c(80, 9), p("s"), p("sb"), p("tz")]),
        m(vec![c(16, 9), p("s"), p("tw").powi(2)]),
        m(vec![c(-4, 1), p("s"), p("xib")]),
        m(vec![c(4, 3), p("xi"), p("tw")]),
        m(vec![c(-1, 2), phi2.clone(), r.diff(Var::Z)]),
        m(vec![phi2, r, p("tz")]),
    ])
}

/// Derivatives of the jet parameters along the proper closed system.
pub fn proper_rules(chart: &ConformalChart, var: Var) -> HashMap<&'static str, Expr> {
    let p = |n: &str| Expr::param(n);
    let (gz, gw) = chart.christoffel();
    let (lz, lw) = (chart.lz(), chart.lw());
    let phi2r = m(vec![c(3, 8), chart.phi().powi(2), chart.scalar_curvature()]);
    let mixed = &m(vec![c(4, 3), p("s"), p("sb")]) + &phi2r;
    let mut r = HashMap::new();
    match var {
        Var::Z => {
            r.insert("s", m(vec![p("s"), &p("tz").scale(4, 3) + &m(vec![c(4, 1), lz.clone()])]));
            r.insert(
                "sb",
                Expr::add_all(vec![p("xib").scale(1, 2), m(vec![c(-2, 3), p("tz"), p("sb")]), m(vec![c(-2, 1), lz.clone(), p("sb")])]),
            );
            r.insert(
                "xi",
                Expr::add_all(vec![
                    m(vec![c(16, 3), p("s").powi(2), p("sb")]),
                    m(vec![c(4, 3), p("tz"), p("xi")]),
                    m(vec![c(4, 1), lz, p("xi")]),
                ]),
            );
            r.insert("xib", m(vec![c(8, 3), p("sb"), p("xi")]));
            r.insert(
                "tz",
                Expr::add_all(vec![
                    m(vec![gz, p("tz")]),
                    m(vec![c(4, 3), p("tz").powi(2)]),
                    m(vec![c(2, 1), p("s"), p("tw")]),
                    m(vec![c(-1, 2), p("xi")]),
                ]),
            );
            r.insert("tw", mixed);
        }
        Var::Zbar => {
            r.insert(
                "s",
                Expr::add_all(vec![p("xi").scale(1, 2), m(vec![c(-2, 3), p("tw"), p("s")]), m(vec![c(-2, 1), lw.clone(), p("s")])]),
            );
            r.insert("sb", m(vec![p("sb"), &p("tw").scale(4, 3) + &m(vec![c(4, 1), lw.clone()])]));
            r.insert("xi", m(vec![c(8, 3), p("s"), p("xib")]));
            r.insert(
                "xib",
                Expr::add_all(vec![
                    m(vec![c(16, 3), p("sb").powi(2), p("s")]),
                    m(vec![c(4, 3), p("tw"), p("xib")]),
                    m(vec![c(4, 1), lw, p("xib")]),
                ]),
            );
            r.insert("tz", mixed);
            r.insert(
                "tw",
                Expr::add_all(vec![
                    m(vec![gw, p("tw")]),
                    m(vec![c(4, 3), p("tw").powi(2)]),
                    m(vec![c(2, 1), p("sb"), p("tz")]),
                    m(vec![c(-1, 2), p("xib")]),
                ]),
            );
        }
    }
    r
}

/// Total derivative of a jet polynomial along the proper closed system.
pub fn total_derivative(e: &Expr, chart: &ConformalChart, var: Var) -> Expr {
    let rules = proper_rules(chart, var);
    let mut terms = vec![e.diff(var)];
    for name in PROPER_PARAMS {
        let d = e.diff_param(name);
        if !d.is_zero() {
            terms.push(&d * &rules[name]);
        }
    }
    Expr::add_all(terms)
}

fn jet_substitution(j: &Jet) -> HashMap<String, Expr> {
    [("s", &j.s), ("sb", &j.sb), ("xi", &j.xi), ("xib", &j.xib), ("tz", &j.tz), ("tw", &j.tw)]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v.clone()))
        .collect()
}

/// Proper-gauge equations (`τ ≡ 0`).
pub fn proper_equations(sf: &StructureFunctions) -> Vec<Equation> {
    let j = sf.jet();
    let chart = sf.chart();
    let remn = remn_polynomial(chart);
    let sub = jet_substitution(&j);
    let dz = total_derivative(&remn, chart, Var::Z).subst(&sub);
    let dw = total_derivative(&remn, chart, Var::Zbar).subst(&sub);
    let remn_terms = match remn.subst(&sub).node() {
        crate::fields::Node::Add(v) => v.clone(),
        _ => vec![remn.subst(&sub)],
    };
    vec![
        Equation::new("P:Delta-t", vec![delta_t_terms(&j)]),
        Equation::new(
            "P:Hess-t",
            vec![vec![
                j.tz.diff(Var::Z),
                -(&j.gz * &j.tz),
                m(vec![c(-4, 3), j.tz.powi(2)]),
                m(vec![c(-2, 1), j.s.clone(), j.tw.clone()]),
                m(vec![c(1, 2), j.xi.clone()]),
            ]],
        ),
        Equation::new(
            "P:DS",
            vec![
                vec![j.s.diff(Var::Z), m(vec![c(-4, 3), j.tz.clone(), j.s.clone()]), m(vec![c(-4, 1), j.lz.clone(), j.s.clone()])],
                vec![
                    j.s.diff(Var::Zbar),
                    m(vec![c(2, 1), j.lw.clone(), j.s.clone()]),
                    m(vec![c(2, 3), j.s.clone(), j.tw.clone()]),
                    m(vec![c(-1, 2), j.xi.clone()]),
                ],
            ],
        ),
        Equation::new("P:DXi", dxi_components(&j)),
        Equation::new("P:Remn", vec![remn_terms]),
        Equation::new("P:DRemn", vec![vec![dz], vec![dw]]),
    ]
}

/// Proper registry; refuses systems whose τ does not vanish on the grid.
pub fn proper_residuals(sf: &StructureFunctions, opts: &GridOptions) -> Result<ResidualReport> {
    let gate = evaluate(sf.chart(), &[Equation::new("tau", vec![vec![sf.tau()]])], opts)?;
    let max_tau = gate.max("tau");
    if !(max_tau < opts.proper_gate) {
        return Err(Error::NotProper { max_tau });
    }
    evaluate(sf.chart(), &proper_equations(sf), opts)
}

/// Residual of the conformal Bertrand–Darboux condition `d(C dV + ½ρV) = 0`, as the
/// `dz∧dz̄` coefficient.
pub fn bertrand_darboux_residual(chart: &ConformalChart, ct: &CTensor, v: &Expr) -> Expr {
    let (az, aw) = ct.bd_one_form(chart, v);
    &aw.diff(Var::Z) - &az.diff(Var::Zbar)
}

/// Wilczynski equations for a potential `V`.
pub fn wilczynski_equations(sf: &StructureFunctions, v: &Expr, mode: TauMode) -> Vec<Equation> {
    let j = sf.jet();
    let (tau, taub) = match mode {
        TauMode::Conformal => (j.tau.clone(), j.taub.clone()),
        TauMode::Proper => (Expr::zero(), Expr::zero()),
    };
    let q = SecondProlongationCoefficients::new(sf, mode);
    let vz = v.diff(Var::Z);
    let vw = v.diff(Var::Zbar);
    let vzw = vz.diff(Var::Zbar);
    let vzz_cov = &vz.diff(Var::Z) - &(&j.gz * &vz);
    let vww_cov = &vw.diff(Var::Zbar) - &(&j.gw * &vw);
    let two = Expr::int(2);
    vec![
        Equation::new(
            "W1",
            vec![vec![
                vzz_cov.clone(),
                -m(vec![two.clone(), j.tz.clone(), vz.clone()]),
                -m(vec![two.clone(), j.s.clone(), vw.clone()]),
                -(&tau * v),
            ]],
        ),
        Equation::new(
            "W1c",
            vec![vec![
                vww_cov.clone(),
                -m(vec![two.clone(), j.tw.clone(), vw.clone()]),
                -m(vec![two, j.sb.clone(), vz.clone()]),
                -(&taub * v),
            ]],
        ),
        Equation::new(
            "W2",
            vec![vec![
                vzz_cov.diff(Var::Zbar).scale(1, 2),
                -(&q.q11 * &vz),
                -(&q.q12 * &vw),
                -(&q.gamma1 * v),
                -(&j.tz * &vzw),
            ]],
        ),
        Equation::new(
            "W2c",
            vec![vec![
                vww_cov.diff(Var::Z).scale(1, 2),
                -(&q.q11 * &vw),
                -(&q.q21 * &vz),
                -(&q.gamma2 * v),
                -(&j.tw * &vzw),
            ]],
        ),
    ]
}

pub fn wilczynski_residual(sf: &StructureFunctions, v: &Expr, mode: TauMode, opts: &GridOptions) -> Result<ResidualReport> {
    evaluate(sf.chart(), &wilczynski_equations(sf, v, mode), opts)
}

// ----- pointwise tensor identities in a real frame -----

type T2 = [[f64; 2]; 2];
type T3 = [[[f64; 2]; 2]; 2];

const E: [Complex64; 2] = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)];

/// Random inputs for the dimension-2 tensor identities.
#[derive(Clone, Debug)]
pub struct IdentitySeed {
    /// Conformal factor (real, positive near `point`).
    pub phi: Expr,
    /// Component of a trace-free symmetric field `Ξ = ξ dz² + c.c.`
    pub xi: Expr,
    /// Cubic-form component of `S` at the point.
    pub s: Complex64,
    /// Component of a trace-free symmetric `Z = ζ dz² + c.c.` at the point.
    pub zeta: Complex64,
    pub point: ChartPoint,
}

impl IdentitySeed {
    pub fn random<R: Rng>(rng: &mut R) -> Self {
        let mut cx = || Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let (a, b, k0, k1, k2, k3) = (cx(), cx(), cx(), cx(), cx(), cx());
        let s = cx();
        let zeta = cx();
        let p = cx();
        let z = Expr::z();
        let w = Expr::zbar();
        let lin = &(&Expr::from_c64(a) * &z) + &(&Expr::from_c64(a.conj()) * &w);
        let quad = m(vec![Expr::from_c64(Complex64::new(b.re, 0.0)), z.clone(), w.clone()]);
        let phi = (&lin + &quad).exp();
        let xi = Expr::add_all(vec![
            Expr::from_c64(k0),
            &Expr::from_c64(k1) * &z,
            &Expr::from_c64(k2) * &w.powi(2),
            m(vec![Expr::from_c64(k3), z.powi(2), w]),
        ]);
        IdentitySeed { phi, xi, s, zeta, point: ChartPoint::new(p.re, p.im) }
    }
}

fn sym2(v: Complex64) -> T2 {
    let mut t = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            t[i][j] = 2.0 * (v * E[i] * E[j]).re;
        }
    }
    t
}

fn sym3(v: Complex64) -> T3 {
    let mut t = [[[0.0; 2]; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                t[i][j][k] = 2.0 * (v * E[i] * E[j] * E[k]).re;
            }
        }
    }
    t
}

fn delta(i: usize, j: usize) -> f64 {
    (i == j) as u8 as f64
}

/// Residuals of the identities at one seed: `S·S`, `Z·Z`, the linear `g⊗Z` identity,
/// `S·Z`, the hook identity for `∇Ξ`, and the two norm translations
/// `|S|² = 16|s|²/φ²`, `|Z|² = 8|ζ|²/φ⁴`.
pub fn tensor_identities(seed: &IdentitySeed) -> Result<BTreeMap<&'static str, f64>> {
    let p = seed.point;
    let phi_v = seed.phi.eval(p)?.re;
    let p2 = phi_v * phi_v;
    let g = |i: usize, j: usize| p2 * delta(i, j);
    let gi = |i: usize, j: usize| delta(i, j) / p2;
    let s3 = sym3(seed.s);
    let mut sc = s3;
    for row in sc.iter_mut() {
        for col in row.iter_mut() {
            for v in col.iter_mut() {
                *v *= p2;
            }
        }
    }
    let zt = sym2(seed.zeta);
    let mut out = BTreeMap::new();

    // |S|² and S-identity
    let mut s_norm = 0.0;
    for a in 0..2 {
        for b in 0..2 {
            for c in 0..2 {
                s_norm += sc[a][b][c] * sc[a][b][c] / (p2 * p2 * p2);
            }
        }
    }
    let rel = |a: f64, b: f64| (a - b).abs() / (1.0 + b.abs());
    out.insert("S-norm", rel(s_norm, 16.0 * seed.s.norm_sqr() / p2));
    let mut r: f64 = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    let mut lhs = 0.0;
                    for a in 0..2 {
                        lhs += sc[i][j][a] * sc[k][l][a] / p2;
                    }
                    let rhs = 0.25 * s_norm * (g(i, k) * g(j, l) + g(i, l) * g(j, k) - g(i, j) * g(k, l));
                    r = r.max(rel(lhs, rhs));
                }
            }
        }
    }
    out.insert("S-identity", r);

    // |Z|², Z-identity, linear identity
    let mut z_norm = 0.0;
    for a in 0..2 {
        for b in 0..2 {
            z_norm += zt[a][b] * zt[a][b] / (p2 * p2);
        }
    }
    out.insert("Z-norm", rel(z_norm, 8.0 * seed.zeta.norm_sqr() / (p2 * p2)));
    let mut r: f64 = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            let mut lhs = 0.0;
            for a in 0..2 {
                lhs += zt[i][a] * zt[a][j] / p2;
            }
            r = r.max(rel(lhs, 0.5 * g(i, j) * z_norm));
        }
    }
    out.insert("Z-identity", r);
    let mut r: f64 = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    let v = g(i, j) * zt[k][l] - g(i, k) * zt[j][l] - g(j, l) * zt[i][k] + g(k, l) * zt[i][j];
                    r = r.max(v.abs());
                }
            }
        }
    }
    out.insert("Z-linear", r);

    // S_ija Z^a_k = ½ [sym_ij S_iab Z^ab g_jk]°
    let mut sz = [0.0; 2];
    for (i, v) in sz.iter_mut().enumerate() {
        for a in 0..2 {
            for b in 0..2 {
                *v += sc[i][a][b] * zt[a][b] / (p2 * p2);
            }
        }
    }
    let mut r: f64 = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                let mut lhs = 0.0;
                for a in 0..2 {
                    lhs += sc[i][j][a] * zt[a][k] / p2;
                }
                let sym = |i: usize, j: usize| sz[i] * g(j, k) + sz[j] * g(i, k);
                let tr = (sym(0, 0) + sym(1, 1)) / p2;
                let rhs = 0.5 * (sym(i, j) - 0.5 * g(i, j) * tr);
                r = r.max(rel(lhs, rhs));
            }
        }
    }
    out.insert("SZ", r);

    // ∇_kΞ_ij − ∇_jΞ_ik = g_ik ∇^aΞ_aj − g_ij ∇^aΞ_ak
    let tape = Tape::compile(&[
        seed.xi.clone(),
        seed.xi.diff(Var::Z),
        seed.xi.diff(Var::Zbar),
        &seed.phi.diff(Var::Z) / &seed.phi,
        &seed.phi.diff(Var::Zbar) / &seed.phi,
    ]);
    let v = tape.eval(p)?;
    let (xi, xz, xw, lz, lw) = (v[0], v[1], v[2], v[3], v[4]);
    let i1 = Complex64::new(0.0, 1.0);
    let dxi = [xz + xw, i1 * (xz - xw)];
    let l = [(lz + lw).re, (i1 * (lz - lw)).re];
    let xi_t = sym2(xi);
    let dxi_t = [sym2(dxi[0]), sym2(dxi[1])];
    let gamma = |k: usize, i: usize, j: usize| delta(k, i) * l[j] + delta(k, j) * l[i] - delta(i, j) * l[k];
    let mut nab = [[[0.0; 2]; 2]; 2]; // nab[k][i][j] = ∇_k Ξ_ij
    for k in 0..2 {
        for i in 0..2 {
            for j in 0..2 {
                let mut val = dxi_t[k][i][j];
                for a in 0..2 {
                    val -= gamma(a, k, i) * xi_t[a][j] + gamma(a, k, j) * xi_t[i][a];
                }
                nab[k][i][j] = val;
            }
        }
    }
    let mut div = [0.0; 2];
    for (j, d) in div.iter_mut().enumerate() {
        for a in 0..2 {
            for b in 0..2 {
                *d += gi(a, b) * nab[b][a][j];
            }
        }
    }
    let mut r: f64 = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                let lhs = nab[k][i][j] - nab[j][i][k];
                let rhs = g(i, k) * div[j] - g(i, j) * div[k];
                r = r.max(rel(lhs, rhs));
            }
        }
    }
    out.insert("hook-Z", r);
    Ok(out)
}

/// Maximum identity residuals over `draws` random seeds.
pub fn tensor_identity_check<R: Rng>(rng: &mut R, draws: usize) -> Result<ResidualReport> {
    let mut report = ResidualReport::default();
    for _ in 0..draws {
        let seed = IdentitySeed::random(rng);
        for (name, v) in tensor_identities(&seed)? {
            let e = report
                .entries
                .entry(name.to_string())
                .or_insert(ResidualEntry { max_abs: 0.0, argmax: [seed.point.x, seed.point.y], samples: 0 });
            e.samples += 1;
            if v > e.max_abs {
                e.max_abs = v;
                e.argmax = [seed.point.x, seed.point.y];
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::parse;
    use rand::SeedableRng;

    fn osc() -> StructureFunctions {
        StructureFunctions::zero(ConformalChart::flat())
    }

    #[test]
    fn oscillator_registries_vanish() {
        let opts = GridOptions::default();
        let r = conformal_residuals(&osc(), &opts).unwrap();
        assert_eq!(r.entries.len(), 6 + 4 + 7);
        assert!(r.passes(1e-15), "{:?}", r);
        let p = proper_residuals(&osc(), &opts).unwrap();
        assert_eq!(p.entries.len(), 6);
        assert!(p.passes(1e-15));
    }

    #[test]
    fn delta_t_example() {
        let sf = StructureFunctions::new(ConformalChart::flat(), Expr::zbar(), Expr::zero(), ChartPoint::new(0.0, 0.0)).unwrap();
        let eq = conformal_equations(&sf).into_iter().find(|e| e.name == "Delta-t").unwrap();
        let r = evaluate_at(&[ChartPoint::new(1.0, 0.0)], &[eq], &GridOptions::default()).unwrap();
        assert!((r.max("Delta-t") - 4.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn proper_constant_s() {
        let sf = StructureFunctions::new(ConformalChart::flat(), Expr::rat(1, 2), Expr::zero(), ChartPoint::new(0.0, 0.0)).unwrap();
        let r = proper_residuals(&sf, &GridOptions::default()).unwrap();
        assert!((r.max("P:Delta-t") - 4.0 / 3.0 * 0.25).abs() < 1e-14);
    }

    #[test]
    fn proper_gate() {
        let sf = StructureFunctions::new(ConformalChart::flat(), Expr::zbar(), Expr::zero(), ChartPoint::new(0.0, 0.0)).unwrap();
        assert!(matches!(proper_residuals(&sf, &GridOptions::default()), Err(Error::NotProper { .. })));
    }

    #[test]
    fn bertrand_darboux_examples() {
        let flat = ConformalChart::flat();
        let metric = CTensor::metric();
        let v = parse("z^3*zbar + exp(zbar)").unwrap();
        let p = ChartPoint::new(0.3, 0.2);
        assert!(bertrand_darboux_residual(&flat, &metric, &v).eval(p).unwrap().norm() < 1e-13);
        let sph = ConformalChart::sphere();
        assert!(bertrand_darboux_residual(&sph, &metric, &v).eval(p).unwrap().norm() < 1e-13);
        let dx2 = CTensor::new(Expr::rat(1, 4), Expr::rat(1, 4), Expr::rat(1, 2));
        let osc = parse("z*zbar").unwrap();
        assert!(bertrand_darboux_residual(&flat, &dx2, &osc).is_zero());
        let xy = parse("-i*(z^2 - zbar^2)/4").unwrap();
        assert!(bertrand_darboux_residual(&flat, &dx2, &xy).eval(p).unwrap().norm() > 0.1);
    }

    #[test]
    fn wilczynski_examples() {
        let v = parse("a0*z*zbar + a1*(z + zbar) + i*a2*(z - zbar) + a3").unwrap();
        let sf = osc();
        for eq in wilczynski_equations(&sf, &v, TauMode::Conformal) {
            for r in eq.residuals() {
                assert!(r.is_zero(), "{}: {}", eq.name, r);
            }
        }
        let r = wilczynski_residual(&sf, &parse("z^3 + zbar^3").unwrap(), TauMode::Conformal, &GridOptions::default()).unwrap();
        assert!(r.max("W1") > 1.0);
        let r = wilczynski_residual(&sf, &Expr::int(7), TauMode::Proper, &GridOptions::default()).unwrap();
        assert!(r.passes(1e-15));
    }

    #[test]
    fn identities_hold() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let r = tensor_identity_check(&mut rng, 50).unwrap();
        assert_eq!(r.entries.len(), 7);
        assert!(r.passes(1e-12), "{:?}", r);
    }

    #[test]
    fn exclusions() {
        let chart = ConformalChart::flat();
        let eq = Equation::new("pole", vec![vec![Expr::z().recip()]]);
        let r = evaluate(&chart, std::slice::from_ref(&eq), &GridOptions::default()).unwrap();
        assert_eq!(r.excluded, 1);
        let eq = Equation::new("bad", vec![vec![(&Expr::z() * &Expr::z() - &Expr::zbar() * &Expr::zbar()).recip()]]);
        assert!(matches!(evaluate(&chart, &[eq], &GridOptions::default()), Err(Error::TooManyExclusions { .. })));
    }

    #[test]
    fn relative_mode_divides_by_scale() {
        let eq = Equation::new("e", vec![vec![Expr::int(100), Expr::int(-99)]]);
        let opts = GridOptions { relative: true, ..Default::default() };
        let r = evaluate_at(&[ChartPoint::new(0.0, 0.0)], &[eq], &opts).unwrap();
        assert!((r.max("e") - 1.0 / 101.0).abs() < 1e-15);
    }
}
