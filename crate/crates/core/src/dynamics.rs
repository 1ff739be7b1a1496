//! Hamiltonians, momentum-quadratic observables, Poisson brackets and the
//! conformal-integral defect `{F, H} − ρ(p) H`.
//!
//! Observables are polynomials in `(p_x, p_y)` with field coefficients, so brackets are
//! exact up to the final evaluation. A quadratic tensor is stored through its invariant
//! components: `C_zz = φ⁴ c₁`, `C_z̄z̄ = φ⁴ c₂`, `C_zz̄ = k φ²/2`.

use std::collections::{BTreeMap, HashMap};

use nalgebra::{DMatrix, SVD};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{parse, ChartPoint, Expr, Tape, Var};
use crate::reconstruct::{integrate_path, ChartPath, IntegratorOptions, PathSystem};
use crate::structure::{StructureFunctions, StructureSpec};
use crate::surface::{ChartSpec, ConformalChart};

type C64 = Complex64;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub x: f64,
    pub y: f64,
    pub px: f64,
    pub py: f64,
}

impl PhasePoint {
    pub fn new(x: f64, y: f64, px: f64, py: f64) -> Self {
        PhasePoint { x, y, px, py }
    }

    pub fn position(&self) -> ChartPoint {
        ChartPoint::new(self.x, self.y)
    }
}

/// Symmetric 2-tensor through its invariant components.
#[derive(Clone, Debug)]
pub struct CTensor {
    pub c1: Expr,
    pub c2: Expr,
    pub k: Expr,
}

impl CTensor {
    pub fn new(c1: Expr, c2: Expr, k: Expr) -> Self {
        CTensor { c1, c2, k }
    }

    /// The metric itself.
    pub fn metric() -> Self {
        CTensor::new(Expr::zero(), Expr::zero(), Expr::one())
    }

    /// Trace-free tensor `φ⁴(c₁ dz² + c₂ dz̄²)`.
    pub fn trace_free(c1: Expr, c2: Expr) -> Self {
        CTensor::new(c1, c2, Expr::zero())
    }

    /// Real tensors have `c₂ = conj c₁` and real `k`.
    pub fn is_real(&self) -> bool {
        self.c2 == self.c1.conj() && self.k.is_real_tree()
    }

    /// `(C_zz, C_zz̄, C_z̄z̄)`
    pub fn components(&self, chart: &ConformalChart) -> (Expr, Expr, Expr) {
        let phi = chart.phi();
        (&phi.powi(4) * &self.c1, Expr::mul_all(vec![Expr::rat(1, 2), self.k.clone(), phi.powi(2)]), &phi.powi(4) * &self.c2)
    }

    /// `ρ_k = ½∇_k tr C + ∇^a C_ak` as `(ρ_z, ρ_z̄)`.
    pub fn rho(&self, chart: &ConformalChart) -> (Expr, Expr) {
        let phi = chart.phi();
        let g = &Expr::int(2) * &phi.powi(-2);
        let rz = &(&g * &(&phi.powi(4) * &self.c1).diff(Var::Zbar)) + &(&Expr::int(2) * &self.k.diff(Var::Z));
        let rw = &(&g * &(&phi.powi(4) * &self.c2).diff(Var::Z)) + &(&Expr::int(2) * &self.k.diff(Var::Zbar));
        (rz, rw)
    }

    /// The 1-form `C dV + ½ρV` whose closedness is the Bertrand–Darboux condition.
    pub fn bd_one_form(&self, chart: &ConformalChart, v: &Expr) -> (Expr, Expr) {
        let phi2 = chart.phi().powi(2);
        let (rz, rw) = self.rho(chart);
        let (vz, vw) = (v.diff(Var::Z), v.diff(Var::Zbar));
        let az = Expr::add_all(vec![&self.k * &vz, Expr::mul_all(vec![Expr::int(2), phi2.clone(), self.c1.clone(), vw.clone()]), (&rz * v).scale(1, 2)]);
        let aw = Expr::add_all(vec![&self.k * &vw, Expr::mul_all(vec![Expr::int(2), phi2, self.c2.clone(), vz]), (&rw * v).scale(1, 2)]);
        (az, aw)
    }

    /// Conformal rescaling by `e^Υ`: `c₁, c₂` are invariant and `k → e^{2Υ} k`.
    pub fn rescaled(&self, upsilon: &Expr) -> Self {
        CTensor::new(self.c1.clone(), self.c2.clone(), &self.k * &(&Expr::int(2) * upsilon).exp())
    }
}

/// Polynomial in `(p_x, p_y)` with field coefficients, keyed by exponents.
#[derive(Clone, Debug, Default)]
pub struct MomPoly {
    pub terms: BTreeMap<(u8, u8), Expr>,
}

impl MomPoly {
    pub fn constant(e: Expr) -> Self {
        let mut m = MomPoly::default();
        m.add_term((0, 0), e);
        m
    }

    pub fn add_term(&mut self, key: (u8, u8), e: Expr) {
        let v = match self.terms.remove(&key) {
            Some(old) => &old + &e,
            None => e,
        };
        if !v.is_zero() {
            self.terms.insert(key, v);
        }
    }

    pub fn add(&self, o: &MomPoly) -> MomPoly {
        let mut out = self.clone();
        for (k, v) in &o.terms {
            out.add_term(*k, v.clone());
        }
        out
    }

    pub fn scale(&self, e: &Expr) -> MomPoly {
        let mut out = MomPoly::default();
        for (k, v) in &self.terms {
            out.add_term(*k, v * e);
        }
        out
    }

    pub fn mul(&self, o: &MomPoly) -> MomPoly {
        let mut out = MomPoly::default();
        for (ka, a) in &self.terms {
            for (kb, b) in &o.terms {
                out.add_term((ka.0 + kb.0, ka.1 + kb.1), a * b);
            }
        }
        out
    }

    /// `∂/∂x` and `∂/∂y` of the coefficients.
    pub fn d_pos(&self, axis: usize) -> MomPoly {
        let mut out = MomPoly::default();
        for (k, v) in &self.terms {
            let d = match axis {
                0 => &v.diff(Var::Z) + &v.diff(Var::Zbar),
                _ => &Expr::i() * &(&v.diff(Var::Z) - &v.diff(Var::Zbar)),
            };
            out.add_term(*k, d);
        }
        out
    }

    /// `∂/∂p_x` (`axis = 0`) or `∂/∂p_y`.
    pub fn d_mom(&self, axis: usize) -> MomPoly {
        let mut out = MomPoly::default();
        for (&(a, b), v) in &self.terms {
            match axis {
                0 if a > 0 => out.add_term((a - 1, b), v * &Expr::int(a as i64)),
                1 if b > 0 => out.add_term((a, b - 1), v * &Expr::int(b as i64)),
                _ => {}
            }
        }
        out
    }

    /// Homogeneous part of the given degree.
    pub fn degree_part(&self, deg: u8) -> MomPoly {
        MomPoly { terms: self.terms.iter().filter(|(k, _)| k.0 + k.1 == deg).map(|(k, v)| (*k, v.clone())).collect() }
    }

    pub fn eval(&self, pp: &PhasePoint) -> Result<C64> {
        let keys: Vec<(u8, u8)> = self.terms.keys().copied().collect();
        let exprs: Vec<Expr> = self.terms.values().cloned().collect();
        let vals = Tape::compile(&exprs).eval(pp.position())?;
        Ok(keys.iter().zip(vals).map(|(&(a, b), v)| v * pp.px.powi(a as i32) * pp.py.powi(b as i32)).sum())
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }
}

/// Canonical bracket `{F, G} = Σ ∂_q F ∂_p G − ∂_p F ∂_q G`.
pub fn poisson_bracket(f: &MomPoly, g: &MomPoly) -> MomPoly {
    let mut out = MomPoly::default();
    for axis in 0..2 {
        out = out.add(&f.d_pos(axis).mul(&g.d_mom(axis)));
        out = out.add(&f.d_mom(axis).mul(&g.d_pos(axis)).scale(&Expr::int(-1)));
    }
    out
}

/// `F = C^{ij} p_i p_j + W`.
#[derive(Clone, Debug)]
pub struct Observable {
    pub c: CTensor,
    pub w: Expr,
}

impl Observable {
    pub fn new(c: CTensor, w: Expr) -> Self {
        Observable { c, w }
    }

    /// Momentum polynomial: with `C^{zz} = 4c₂`, `C^{z̄z̄} = 4c₁`, `C^{zz̄} = 2k/φ²`.
    pub fn poly(&self, chart: &ConformalChart) -> MomPoly {
        let kphi = &self.c.k * &chart.phi().powi(-2);
        let sum = &self.c.c1 + &self.c.c2;
        let mut m = MomPoly::default();
        m.add_term((2, 0), &sum + &kphi);
        m.add_term((0, 2), &kphi - &sum);
        m.add_term((1, 1), Expr::mul_all(vec![Expr::int(2), Expr::i(), &self.c.c1 - &self.c.c2]));
        m.add_term((0, 0), self.w.clone());
        m
    }
}

/// Hamiltonian `H = (p_x² + p_y²)/φ² + V` as an observable.
pub fn hamiltonian_observable(v: &Expr) -> Observable {
    Observable::new(CTensor::metric(), v.clone())
}

/// A Hamiltonian `H = |p|²/φ² + V` with its quadratic integrals and, optionally, structure functions.
#[derive(Clone, Debug)]
pub struct SystemSpec {
    pub chart: ConformalChart,
    pub structure: Option<StructureFunctions>,
    pub v: Expr,
    pub integrals: Vec<Observable>,
}

/// JSON form of [`SystemSpec`].
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpecJson {
    pub chart: ChartSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub structure: Option<StructureSpec>,
    #[serde(rename = "V")]
    pub v: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, f64>,
    #[serde(default)]
    pub integrals: Vec<IntegralJson>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegralJson {
    pub c1: String,
    pub c2: String,
    #[serde(default = "zero_str")]
    pub k: String,
    #[serde(rename = "W")]
    pub w: String,
}

fn zero_str() -> String {
    "0".into()
}

impl SystemSpec {
    pub fn from_json(js: &SystemSpecJson) -> Result<Self> {
        let params: HashMap<String, Expr> = js.params.iter().map(|(k, v)| (k.clone(), Expr::from_f64(*v))).collect();
        let p = |s: &str| -> Result<Expr> { Ok(parse(s)?.subst(&params)) };
        let chart = ConformalChart::from_spec(&js.chart)?;
        let structure = match &js.structure {
            Some(s) => Some(StructureFunctions::from_spec(chart.clone(), s)?),
            None => None,
        };
        let v = p(&js.v)?;
        if !v.is_real_tree() {
            return Err(Error::NotReal(v.to_string()));
        }
        let integrals = js
            .integrals
            .iter()
            .map(|i| Ok(Observable::new(CTensor::new(p(&i.c1)?, p(&i.c2)?, p(&i.k)?), p(&i.w)?)))
            .collect::<Result<Vec<_>>>()?;
        let unbound: Vec<String> = std::iter::once(&v)
            .chain(integrals.iter().flat_map(|o| [&o.c.c1, &o.c.c2, &o.c.k, &o.w]))
            .flat_map(|e| e.params())
            .collect();
        if let Some(name) = unbound.first() {
            return Err(Error::Schema(format!("unbound parameter `{}`", name)));
        }
        Ok(SystemSpec { chart, structure, v, integrals })
    }

    pub fn to_json(&self) -> SystemSpecJson {
        SystemSpecJson {
            chart: self.chart.to_spec(),
            structure: self.structure.as_ref().map(|s| s.to_spec()),
            v: self.v.to_string(),
            params: BTreeMap::new(),
            integrals: self
                .integrals
                .iter()
                .map(|o| IntegralJson { c1: o.c.c1.to_string(), c2: o.c.c2.to_string(), k: o.c.k.to_string(), w: o.w.to_string() })
                .collect(),
        }
    }

    /// `F^(α)`, with `F^(0) = H`.
    pub fn observable(&self, alpha: usize) -> Result<Observable> {
        if alpha == 0 {
            return Ok(hamiltonian_observable(&self.v));
        }
        self.integrals.get(alpha - 1).cloned().ok_or_else(|| Error::Invalid(format!("no integral with index {}", alpha)))
    }

    pub fn n_observables(&self) -> usize {
        1 + self.integrals.len()
    }
}

pub fn hamiltonian(spec: &SystemSpec, pp: &PhasePoint) -> Result<f64> {
    Ok(hamiltonian_observable(&spec.v).poly(&spec.chart).eval(pp)?.re)
}

pub fn poisson(f: &MomPoly, g: &MomPoly, pp: &PhasePoint) -> Result<f64> {
    Ok(poisson_bracket(f, g).eval(pp)?.re)
}

/// `ρ(p) = g^{ab} ρ_a p_b = (2/φ²)(ρ_z p_z̄ + ρ_z̄ p_z)`, `p_z = ½(p_x − i p_y)`.
pub fn rho_poly(chart: &ConformalChart, c: &CTensor) -> MomPoly {
    let (rz, rw) = c.rho(chart);
    let g = chart.phi().powi(-2);
    let mut m = MomPoly::default();
    m.add_term((1, 0), &g * &(&rz + &rw));
    m.add_term((0, 1), Expr::mul_all(vec![Expr::i(), g, &rz - &rw]));
    m
}

pub fn rho_from_c(chart: &ConformalChart, c: &CTensor) -> (Expr, Expr) {
    c.rho(chart)
}

/// Symbolic defect `{F, H} − ρ(p) H` as a momentum polynomial.
pub fn defect_poly(spec: &SystemSpec, alpha: usize) -> Result<MomPoly> {
    if alpha == 0 {
        return Ok(MomPoly::default());
    }
    let f = spec.observable(alpha)?;
    let h = hamiltonian_observable(&spec.v).poly(&spec.chart);
    let fp = f.poly(&spec.chart);
    let rho = rho_poly(&spec.chart, &f.c);
    Ok(poisson_bracket(&fp, &h).add(&rho.mul(&h).scale(&Expr::int(-1))))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Defect {
    pub total: f64,
    pub cubic: f64,
    pub linear: f64,
}

pub fn integral_defect(spec: &SystemSpec, alpha: usize, pp: &PhasePoint) -> Result<Defect> {
    let d = defect_poly(spec, alpha)?;
    Ok(Defect { total: d.eval(pp)?.norm(), cubic: d.degree_part(3).eval(pp)?.norm(), linear: d.degree_part(1).eval(pp)?.norm() })
}

/// Singular values of the Jacobian of `(F^(0), F^(1), …)` in `(x, y, p_x, p_y)`.
pub fn independence_singular_values(spec: &SystemSpec, pp: &PhasePoint) -> Result<Vec<f64>> {
    let n = spec.n_observables();
    let mut jac = DMatrix::zeros(n, 4);
    for a in 0..n {
        let f = spec.observable(a)?.poly(&spec.chart);
        let grads = [f.d_pos(0), f.d_pos(1), f.d_mom(0), f.d_mom(1)];
        for (k, g) in grads.iter().enumerate() {
            jac[(a, k)] = g.eval(pp)?.re;
        }
    }
    Ok(SVD::new(jac, false, false).singular_values.iter().copied().collect())
}

struct CompanionFlow {
    tape: Tape,
}

impl PathSystem for CompanionFlow {
    fn rhs(&self, p: ChartPoint, zdot: C64, _y: &[C64]) -> Result<Vec<C64>> {
        let a = self.tape.eval(p)?;
        Ok(vec![a[0] * zdot + a[1] * zdot.conj()])
    }
}

/// Integrate `dW = C dV + ½ρV` along a path from `W = 0` at its start.
pub fn recover_companion_potential(chart: &ConformalChart, c: &CTensor, v: &Expr, path: &ChartPath, opts: &IntegratorOptions) -> Result<Vec<(ChartPoint, C64)>> {
    let (az, aw) = c.bd_one_form(chart, v);
    let flow = CompanionFlow { tape: Tape::compile(&[az, aw]) };
    let out = integrate_path(&flow, path, vec![C64::new(0.0, 0.0)], opts)?;
    Ok(out.into_iter().map(|s| (s.point, s.state[0])).collect())
}

/// Oscillator potential `α₀ zz̄ + α₁(z+z̄) + iα₂(z−z̄) + α₃`.
pub fn oscillator_potential(a: [f64; 4]) -> Expr {
    let f = Expr::from_f64;
    let (z, w) = (Expr::z(), Expr::zbar());
    Expr::add_all(vec![
        Expr::mul_all(vec![f(a[0]), z.clone(), w.clone()]),
        &f(a[1]) * &(&z + &w),
        Expr::mul_all(vec![Expr::i(), f(a[2]), &z - &w]),
        f(a[3]),
    ])
}

/// Integrals of the oscillator from `dx²` and `dx dy`:
/// `p_x² + α₀x² + 2α₁x` and `p_x p_y + α₀xy − α₂x + α₁y`.
pub fn oscillator_integrals(a: [f64; 4]) -> Vec<Observable> {
    let f = Expr::from_f64;
    let x = (&Expr::z() + &Expr::zbar()).scale(1, 2);
    let y = &(&Expr::z() - &Expr::zbar()) * &Expr::constant(crate::fields::Gauss::i().conj()).scale(1, 2);
    let w1 = &Expr::mul_all(vec![f(a[0]), x.powi(2)]) + &Expr::mul_all(vec![f(2.0 * a[1]), x.clone()]);
    let w2 = Expr::add_all(vec![Expr::mul_all(vec![f(a[0]), x.clone(), y.clone()]), &f(-a[2]) * &x, &f(a[1]) * &y]);
    vec![
        Observable::new(CTensor::new(Expr::rat(1, 4), Expr::rat(1, 4), Expr::rat(1, 2)), w1),
        Observable::new(CTensor::new(&Expr::i() * &Expr::rat(-1, 4), &Expr::i() * &Expr::rat(1, 4), Expr::zero()), w2),
    ]
}
