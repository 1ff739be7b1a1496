//! Structure functions `(s, t)` of a system, the derived components `ξ`, `τ`, `Z`,
//! and conformal rescalings between realisations of one conformal class.
//!
//! Conventions: `S = φ²(s dz³ + s̄ dz̄³)`, `t` real with `t(base) = 0`,
//! `Ξ = ξ dz² + ξ̄ dz̄²`, `𝜏 = τ dz² + τ̄ dz̄²`, `Z = Z_zz dz² + c.c.` with `Z = ∇^a S_{ija}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{parse, ChartPoint, Expr, Var};
use crate::surface::ConformalChart;

#[derive(Clone, Debug)]
pub struct StructureFunctions {
    chart: ConformalChart,
    s: Expr,
    t: Option<Expr>,
    tz: Expr,
    tw: Expr,
    base: ChartPoint,
}

/// JSON form: `{"s": ..., "t": ..., "base": [x, y]}`. Either `t` or `tz` is given.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StructureSpec {
    pub s: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tz: Option<String>,
    #[serde(default)]
    pub base: [f64; 2],
}

/// All fields entering the structural equations, built once per system.
#[derive(Clone, Debug)]
pub struct Jet {
    pub phi: Expr,
    pub s: Expr,
    pub sb: Expr,
    pub tz: Expr,
    pub tw: Expr,
    pub xi: Expr,
    pub xib: Expr,
    pub tau: Expr,
    pub taub: Expr,
    /// `∂_z ln φ`, `∂_z̄ ln φ`
    pub lz: Expr,
    pub lw: Expr,
    /// `Γ^z_zz`, `Γ^z̄_z̄z̄`
    pub gz: Expr,
    pub gw: Expr,
    pub r: Expr,
}

impl StructureFunctions {
    /// System with potential `t` (real tree), normalized so that `t(base) = 0`.
    pub fn new(chart: ConformalChart, s: Expr, t: Expr, base: ChartPoint) -> Result<Self> {
        if !t.is_real_tree() {
            return Err(Error::NotReal(t.to_string()));
        }
        let t = normalize_at(&t, base)?;
        let tz = t.diff(Var::Z);
        let tw = t.diff(Var::Zbar);
        Ok(StructureFunctions { chart, s, t: Some(t), tz, tw, base })
    }

    /// System known only through the gradient component `t_z` (as on the sphere,
    /// where `t` is read off algebraically).
    pub fn from_gradient(chart: ConformalChart, s: Expr, tz: Expr, base: ChartPoint) -> Self {
        let tw = tz.conj();
        StructureFunctions { chart, s, t: None, tz, tw, base }
    }

    pub fn from_spec(chart: ConformalChart, spec: &StructureSpec) -> Result<Self> {
        let s = parse(&spec.s)?;
        let base = ChartPoint::new(spec.base[0], spec.base[1]);
        match (&spec.t, &spec.tz) {
            (Some(t), None) => StructureFunctions::new(chart, s, parse(t)?, base),
            (None, Some(tz)) => Ok(StructureFunctions::from_gradient(chart, s, parse(tz)?, base)),
            (None, None) => StructureFunctions::new(chart, s, Expr::zero(), base),
            (Some(_), Some(_)) => Err(Error::Schema("give either t or tz, not both".into())),
        }
    }

    pub fn to_spec(&self) -> StructureSpec {
        StructureSpec {
            s: self.s.to_string(),
            t: self.t.as_ref().map(|t| t.to_string()),
            tz: if self.t.is_none() { Some(self.tz.to_string()) } else { None },
            base: [self.base.x, self.base.y],
        }
    }

    /// Oscillator data: zero structure on the given chart.
    pub fn zero(chart: ConformalChart) -> Self {
        StructureFunctions::new(chart, Expr::zero(), Expr::zero(), ChartPoint::new(0.0, 0.0)).unwrap()
    }

    pub fn chart(&self) -> &ConformalChart {
        &self.chart
    }

    pub fn base(&self) -> ChartPoint {
        self.base
    }

    pub fn s(&self) -> &Expr {
        &self.s
    }

    pub fn sb(&self) -> Expr {
        self.s.conj()
    }

    pub fn t(&self) -> Option<&Expr> {
        self.t.as_ref()
    }

    pub fn tz(&self) -> &Expr {
        &self.tz
    }

    pub fn tw(&self) -> &Expr {
        &self.tw
    }

    /// True when the chart is flat as a tree (`φ ≡ 1`).
    pub fn is_flat_gauge(&self) -> bool {
        self.chart.is_flat()
    }

    /// True when `t ≡ 0` as a tree.
    pub fn is_standard_gauge(&self) -> bool {
        self.tz.is_zero()
    }

    /// `Z_zz = 2∂_z̄ s + 4 s ∂_z̄ ln φ`
    pub fn z_div(&self) -> Expr {
        let sw = self.s.diff(Var::Zbar);
        &Expr::int(2) * &sw + Expr::mul_all(vec![Expr::int(4), self.s.clone(), self.chart.lw()])
    }

    /// `ξ = Z_zz + (4/3) s t_z̄`
    pub fn xi(&self) -> Expr {
        self.z_div() + Expr::mul_all(vec![Expr::rat(4, 3), self.s.clone(), self.tw.clone()])
    }

    /// Tensorial route: `τ = (2/3) t_{,zz} − (8/9) s t_z̄ − (8/9) t_z² + (1/3) Z_zz`.
    pub fn tau(&self) -> Expr {
        let (gz, _) = self.chart.christoffel();
        let t_cov_zz = &self.tz.diff(Var::Z) - &(&gz * &self.tz);
        Expr::add_all(vec![
            t_cov_zz.scale(2, 3),
            Expr::mul_all(vec![Expr::rat(-8, 9), self.s.clone(), self.tw.clone()]),
            self.tz.powi(2).scale(-8, 9),
            self.z_div().scale(1, 3),
        ])
    }

    /// Coordinate route, term by term in partial derivatives of `s`, `t`, `φ`.
    pub fn tau_coordinate(&self) -> Expr {
        let phi = self.chart.phi();
        let inv = phi.recip();
        Expr::add_all(vec![
            self.tz.powi(2).scale(-8, 9),
            Expr::mul_all(vec![Expr::rat(-8, 9), self.tw.clone(), self.s.clone()]),
            self.s.diff(Var::Zbar).scale(2, 3),
            self.tz.diff(Var::Z).scale(2, 3),
            Expr::mul_all(vec![Expr::rat(-4, 3), self.tz.clone(), phi.diff(Var::Z), inv.clone()]),
            Expr::mul_all(vec![Expr::rat(4, 3), self.s.clone(), phi.diff(Var::Zbar), inv]),
        ])
    }

    pub fn jet(&self) -> Jet {
        let (gz, gw) = self.chart.christoffel();
        let xi = self.xi();
        let tau = self.tau();
        Jet {
            phi: self.chart.phi().clone(),
            s: self.s.clone(),
            sb: self.sb(),
            tz: self.tz.clone(),
            tw: self.tw.clone(),
            xib: xi.conj(),
            xi,
            taub: tau.conj(),
            tau,
            lz: self.chart.lz(),
            lw: self.chart.lw(),
            gz,
            gw,
            r: self.chart.scalar_curvature(),
        }
    }

    /// `u = ln φ + t/3`; invariant under rescaling up to a constant.
    pub fn invariant_u(&self) -> Result<Expr> {
        let t = self.t.as_ref().ok_or_else(|| Error::Invalid("t is only known through its gradient".into()))?;
        Ok(self.chart.log_phi() + t.scale(1, 3))
    }

    /// Rescale by `e^Υ`: `φ → e^Υ φ`, `s → s`, `t → t − 3Υ` (renormalized at base).
    pub fn gauge_transform(&self, upsilon: &Expr) -> Result<Self> {
        if !upsilon.is_real_tree() {
            return Err(Error::NotReal(upsilon.to_string()));
        }
        let phi = &upsilon.exp() * self.chart.phi();
        let chart = ConformalChart::new(phi, self.chart.domain, self.chart.grid)?;
        chart.check_positive()?;
        match &self.t {
            Some(t) => StructureFunctions::new(chart, self.s.clone(), t - &(&Expr::int(3) * upsilon), self.base),
            None => {
                let tz = &self.tz - &(&Expr::int(3) * &upsilon.diff(Var::Z));
                Ok(StructureFunctions::from_gradient(chart, self.s.clone(), tz, self.base))
            }
        }
    }

    /// Rescale with `Υ = t/3`, giving `t ≡ 0`.
    pub fn to_standard_gauge(&self) -> Result<Self> {
        let t = self.t.as_ref().ok_or_else(|| Error::Invalid("t is only known through its gradient".into()))?;
        self.gauge_transform(&t.scale(1, 3))
    }

    /// Rescale with `Υ = −ln φ`, giving `φ ≡ 1`.
    pub fn to_flat_gauge(&self) -> Result<Self> {
        self.gauge_transform(&-self.chart.log_phi())
    }
}

fn normalize_at(t: &Expr, base: ChartPoint) -> Result<Expr> {
    let v = t.eval(base)?;
    if v.re == 0.0 {
        return Ok(t.clone());
    }
    Ok(t - &Expr::from_f64(v.re))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::parse;

    fn pts() -> Vec<ChartPoint> {
        vec![ChartPoint::new(0.2, 0.1), ChartPoint::new(-0.5, 0.4), ChartPoint::new(0.6, -0.7)]
    }

    fn sample() -> StructureFunctions {
        let chart = ConformalChart::new(parse("1 + z*zbar/4").unwrap(), [-1.0, 1.0, -1.0, 1.0], [11, 11]).unwrap();
        StructureFunctions::new(chart, parse("z^2 + i*zbar").unwrap(), parse("z*zbar + z + zbar").unwrap(), ChartPoint::new(0.0, 0.0))
            .unwrap()
    }

    #[test]
    fn xi_examples() {
        let sf = StructureFunctions::zero(ConformalChart::sphere());
        assert!(sf.xi().is_zero());
        let sf = StructureFunctions::new(ConformalChart::flat(), Expr::zbar(), Expr::zero(), ChartPoint::new(0.0, 0.0)).unwrap();
        assert_eq!(sf.xi(), Expr::int(2));
    }

    #[test]
    fn tau_paths_agree() {
        let sf = sample();
        let (a, b) = (sf.tau(), sf.tau_coordinate());
        for p in pts() {
            assert!((a.eval(p).unwrap() - b.eval(p).unwrap()).norm() < 1e-12);
        }
    }

    #[test]
    fn standard_gauge_tau_is_plus_third_xi() {
        let std = sample().to_standard_gauge().unwrap();
        assert!(std.is_standard_gauge());
        let (tau, xi) = (std.tau(), std.xi());
        for p in pts() {
            let (t, x) = (tau.eval(p).unwrap(), xi.eval(p).unwrap());
            assert!((t - x / 3.0).norm() < 1e-12);
            assert!((t + x / 3.0).norm() > 1e-3);
        }
    }

    #[test]
    fn gauge_invariants() {
        let sf = sample();
        let ups = parse("(z + zbar)/3 - z*zbar/5").unwrap();
        let g = sf.gauge_transform(&ups).unwrap();
        assert_eq!(g.s(), sf.s());
        let (x0, x1) = (sf.xi(), g.xi());
        let (u0, u1) = (sf.invariant_u().unwrap(), g.invariant_u().unwrap());
        let c = u1.eval(sf.base()).unwrap() - u0.eval(sf.base()).unwrap();
        for p in pts() {
            assert!((x0.eval(p).unwrap() - x1.eval(p).unwrap()).norm() < 1e-12);
            assert!((u1.eval(p).unwrap() - u0.eval(p).unwrap() - c).norm() < 1e-12);
        }
    }

    #[test]
    fn gauge_examples() {
        let sf = sample();
        let id = sf.gauge_transform(&Expr::zero()).unwrap();
        assert_eq!(id.chart().phi(), sf.chart().phi());
        assert_eq!(id.t(), sf.t());
        assert!(sf.to_flat_gauge().unwrap().is_flat_gauge());
        assert!(sf.to_standard_gauge().unwrap().t().unwrap().is_zero());
    }

    #[test]
    fn t_is_normalized_and_real() {
        let sf = sample();
        let b = ChartPoint::new(0.5, 0.5);
        let sf2 = StructureFunctions::new(sf.chart().clone(), sf.s().clone(), sf.t().unwrap().clone(), b).unwrap();
        assert!(sf2.t().unwrap().eval(b).unwrap().norm() < 1e-15);
        assert!(StructureFunctions::new(ConformalChart::flat(), Expr::zero(), Expr::z(), b).is_err());
    }
}
