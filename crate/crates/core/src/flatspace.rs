//! Flat proper systems in terms of `D = exp(−4t/3)`, `β = Ds`, `A_z`, `B_z̄` and the
//! coefficients `C_ij` of `(2/3)∇²V`.
//!
//! On a proper flat system `β` is anti-holomorphic with `β_z̄ = (3/4)D_zz`, so `D` is a
//! polynomial of bi-degree at most (2, 2) without a `z²z̄²` term. That makes a flat proper
//! system computable in closed form from its seed at one point; see [`proper_flat_system`].

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fields::{ChartPoint, Expr, Var};
use crate::integrability::{evaluate, proper_residuals, total_derivative, Equation, GridOptions, ResidualReport};
use crate::reconstruct::StructureSeed;
use crate::structure::StructureFunctions;
use crate::surface::ConformalChart;

type C64 = Complex64;

#[derive(Clone, Debug)]
pub struct FlatCorrespondence {
    pub chart: ConformalChart,
    pub d: Expr,
    pub beta: Expr,
    pub az: Expr,
    pub bw: Expr,
    pub c11: Expr,
    pub c12: Expr,
    pub c21: Expr,
    pub c22: Expr,
}

impl FlatCorrespondence {
    /// Build the fields without checking properness.
    pub fn from_fields(sf: &StructureFunctions) -> Result<Self> {
        FlatCorrespondence::with_factor(sf, (4, 3))
    }

    /// As [`from_fields`](Self::from_fields) with `A_z = a·D s`, `B_z̄ = a·D s̄`.
    pub fn with_factor(sf: &StructureFunctions, a: (i64, i64)) -> Result<Self> {
        if !sf.chart().is_flat() {
            return Err(Error::NotFlatGauge);
        }
        let t = sf.t().ok_or_else(|| Error::Invalid("the correspondence needs t itself, not only its gradient".into()))?;
        let d = t.scale(-4, 3).exp();
        let beta = &d * sf.s();
        let r = |e: &Expr| e.scale(4, 3);
        Ok(FlatCorrespondence {
            chart: sf.chart().clone(),
            az: beta.scale(a.0, a.1),
            bw: (&d * &sf.sb()).scale(a.0, a.1),
            beta,
            d,
            c11: r(sf.tz()),
            c12: r(sf.s()),
            c21: r(&sf.sb()),
            c22: r(sf.tw()),
        })
    }

    /// `(2/3)∇²V − C·dV` as `zz` and `z̄z̄` components.
    pub fn hessian_check(&self, v: &Expr) -> [Expr; 2] {
        let (vz, vw) = (v.diff(Var::Z), v.diff(Var::Zbar));
        [
            Expr::add_all(vec![vz.diff(Var::Z).scale(2, 3), -(&self.c11 * &vz), -(&self.c12 * &vw)]),
            Expr::add_all(vec![vw.diff(Var::Zbar).scale(2, 3), -(&self.c21 * &vz), -(&self.c22 * &vw)]),
        ]
    }

    /// `(2/3)V_zz = −(D_z/D)V_z + (A_z/D)V_z̄`
    pub fn abcd_check(&self, v: &Expr) -> Expr {
        let (vz, vw) = (v.diff(Var::Z), v.diff(Var::Zbar));
        let dinv = self.d.recip();
        Expr::add_all(vec![vz.diff(Var::Z).scale(2, 3), Expr::mul_all(vec![self.d.diff(Var::Z), dinv.clone(), vz]), -(Expr::mul_all(vec![self.az.clone(), dinv, vw]))])
    }

    pub fn obstruction_equations(&self) -> Vec<Equation> {
        let (z, w) = (Var::Z, Var::Zbar);
        let d = &self.d;
        let one = |name: &str, e: Expr| Equation::new(name, vec![vec![e]]);
        vec![
            one("D3z", d.wirtinger(z, 3)),
            one("D3w", d.wirtinger(w, 3)),
            one("D2z2w", d.wirtinger(z, 2).wirtinger(w, 2)),
            one("Azz", self.az.diff(z)),
            Equation::new("Azw-Dzz", vec![vec![self.az.diff(w), -d.wirtinger(z, 2)]]),
            Equation::new("Bzw-Dww", vec![vec![self.bw.diff(z), -d.wirtinger(w, 2)]]),
            one("Bww", self.bw.diff(w)),
        ]
    }

    pub fn obstruction_residuals(&self, opts: &GridOptions) -> Result<ResidualReport> {
        evaluate(&self.chart, &self.obstruction_equations(), opts)
    }

    pub fn holomorphy_check(&self, opts: &GridOptions) -> Result<f64> {
        let r = evaluate(&self.chart, &[Equation::new("dz-beta", vec![vec![self.beta.diff(Var::Z)]])], opts)?;
        Ok(r.max("dz-beta"))
    }
}

/// Redundant cross-checks `C₁₂₂ = ∂_z̄C₁₂ = (2/3)ξ − (8/9)s t_z̄` and its conjugate.
pub fn c3_cross_checks(sf: &StructureFunctions, fc: &FlatCorrespondence) -> Vec<Equation> {
    let c122 = &Expr::mul_all(vec![Expr::rat(2, 3), sf.xi()]) - &Expr::mul_all(vec![Expr::rat(8, 9), sf.s().clone(), sf.tw().clone()]);
    let c211 = c122.conj();
    vec![
        Equation::new("C122", vec![vec![fc.c12.diff(Var::Zbar), -c122]]),
        Equation::new("C211", vec![vec![fc.c21.diff(Var::Z), -c211]]),
    ]
}

/// Checked constructor: flat chart and a proper system.
pub fn build_correspondence(sf: &StructureFunctions, opts: &GridOptions) -> Result<FlatCorrespondence> {
    if !sf.chart().is_flat() {
        return Err(Error::NotFlatGauge);
    }
    let report = proper_residuals(sf, opts)?;
    if let Some((_, worst)) = report.worst() {
        if worst > opts.proper_gate.max(1e-8) {
            return Err(Error::NotProper { max_tau: worst });
        }
    }
    FlatCorrespondence::from_fields(sf)
}

/// Coefficients `d_ab` of `D = Σ d_ab z^a z̄^b` (`a, b ≤ 2`) around the seed point, with
/// `d₂₂ = 0`. Index `3a + b`.
pub fn d_coefficients(seed: &StructureSeed) -> [C64; 9] {
    let chart = ConformalChart::flat();
    let p = Expr::param;
    let sub: std::collections::HashMap<String, Expr> = [
        ("s", seed.s),
        ("sb", seed.s.conj()),
        ("xi", seed.xi),
        ("xib", seed.xi.conj()),
        ("tz", seed.tz),
        ("tw", seed.tz.conj()),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), Expr::from_c64(v)))
    .collect();
    let tz_ = |e: &Expr| total_derivative(e, &chart, Var::Z);
    let tw_ = |e: &Expr| total_derivative(e, &chart, Var::Zbar);
    // logarithmic derivatives D_…/D as jet polynomials
    let dz = p("tz").scale(-4, 3);
    let dw = p("tw").scale(-4, 3);
    let dzz = &tz_(&dz) + &(&dz * &dz);
    let dzw = &tw_(&dz) + &(&dz * &dw);
    let dzzw = &tw_(&dzz) + &(&dzz * &dw);
    let val = |e: &Expr| e.subst(&sub).eval(ChartPoint::new(0.0, 0.0)).expect("constant jet value");
    let (d10, d11, d20, d21) = (val(&dz), val(&dzw), val(&dzz) / 2.0, val(&dzzw) / 2.0);
    let zero = C64::new(0.0, 0.0);
    [C64::new(1.0, 0.0), d10.conj(), d20.conj(), d10, d11, d21.conj(), d20, d21, zero]
}

/// Flat proper system from an admissible seed at `base`: `t = −(3/4)ln D` and `s = β/D`
/// with `β = s₀ + (3/2)d₂₀ z̄ + (3/4)d₂₁ z̄²` (coordinates centred at `base`).
pub fn proper_flat_system(seed: &StructureSeed, base: ChartPoint, domain: [f64; 4], grid: [usize; 2]) -> Result<StructureFunctions> {
    let d = d_coefficients(seed);
    let zc = &Expr::z() - &Expr::from_c64(base.z());
    let wc = &Expr::zbar() - &Expr::from_c64(base.z().conj());
    let mut terms = Vec::new();
    for a in 0..3 {
        for b in 0..3 {
            if d[3 * a + b] != C64::new(0.0, 0.0) {
                terms.push(Expr::mul_all(vec![real_if_real(d[3 * a + b]), zc.powi(a as i32), wc.powi(b as i32)]));
            }
        }
    }
    let dexpr = Expr::add_all(terms);
    let beta = Expr::add_all(vec![Expr::from_c64(seed.s), &Expr::from_c64(1.5 * d[6]) * &wc, &Expr::from_c64(0.75 * d[7]) * &wc.powi(2)]);
    let chart = ConformalChart::new(Expr::one(), domain, grid)?;
    let t = &dexpr.log() * &Expr::rat(-3, 4);
    let sf = StructureFunctions::new(chart, &beta * &dexpr.recip(), t, base)?;
    check_d_positive(&sf, &dexpr)?;
    Ok(sf)
}

fn real_if_real(c: C64) -> Expr {
    if c.im == 0.0 {
        Expr::from_f64(c.re)
    } else {
        Expr::from_c64(c)
    }
}

fn check_d_positive(sf: &StructureFunctions, d: &Expr) -> Result<()> {
    for p in sf.chart().grid_points() {
        let v = d.eval(p)?;
        if !(v.re > 0.0) {
            return Err(Error::Invalid(format!("D = {} is not positive at ({}, {})", v.re, p.x, p.y)));
        }
    }
    Ok(())
}

/// Least-squares fit of `Σ_{a,b≤2} c_ab z^a z̄^b` to samples.
#[derive(Clone, Debug, Serialize)]
pub struct BiquadraticFit {
    pub coefficients: Vec<C64>,
    pub max_residual: f64,
}

pub fn fit_biquadratic(samples: &[(ChartPoint, C64)]) -> Result<BiquadraticFit> {
    if samples.len() < 9 {
        return Err(Error::Invalid(format!("need at least 9 samples, got {}", samples.len())));
    }
    let basis = |p: ChartPoint| -> Vec<C64> {
        let (z, w) = (p.z(), p.zbar());
        (0..3).flat_map(|a| (0..3).map(move |b| z.powi(a) * w.powi(b))).collect()
    };
    let a = DMatrix::from_fn(samples.len(), 9, |i, j| basis(samples[i].0)[j]);
    let y = DVector::from_iterator(samples.len(), samples.iter().map(|s| s.1));
    let svd = a.clone().svd(true, true);
    let c = svd.solve(&y, 1e-13).map_err(|e| Error::Invalid(e.to_string()))?;
    let max_residual = (&a * &c - &y).iter().map(|v| v.norm()).fold(0.0, f64::max);
    Ok(BiquadraticFit { coefficients: c.iter().copied().collect(), max_residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::parse;
    use crate::reconstruct::{find_admissible_seed, integrate_structure_proper_flat, ChartPath, IntegratorOptions};

    fn admissible() -> StructureSeed {
        find_admissible_seed(C64::new(1.0, 0.0), 1.0, 3.0).unwrap()
    }

    fn system() -> StructureFunctions {
        proper_flat_system(&admissible(), ChartPoint::new(0.0, 0.0), [-0.3, 0.3, -0.3, 0.3], [9, 9]).unwrap()
    }

    #[test]
    fn oscillator_correspondence() {
        let sf = StructureFunctions::new(ConformalChart::flat(), Expr::zero(), Expr::zero(), ChartPoint::new(0.0, 0.0)).unwrap();
        let fc = build_correspondence(&sf, &GridOptions::default()).unwrap();
        assert!(fc.d.is_one() && fc.beta.is_zero());
        assert!([&fc.c11, &fc.c12, &fc.c21, &fc.c22].iter().all(|c| c.is_zero()));
        assert!(fc.obstruction_residuals(&GridOptions::default()).unwrap().passes(1e-15));
        assert_eq!(fc.holomorphy_check(&GridOptions::default()).unwrap(), 0.0);
    }

    #[test]
    fn toy_and_broken_data() {
        let sf = StructureFunctions::new(ConformalChart::flat(), Expr::zbar(), Expr::zero(), ChartPoint::new(0.0, 0.0)).unwrap();
        assert!(matches!(build_correspondence(&sf, &GridOptions::default()), Err(Error::NotProper { .. })));
        let fc = FlatCorrespondence::from_fields(&sf).unwrap();
        assert!(fc.d.is_one() && fc.beta == Expr::zbar());
        assert_eq!(fc.holomorphy_check(&GridOptions::default()).unwrap(), 0.0);
        let cube = StructureFunctions::new(ConformalChart::flat(), parse("zbar^3").unwrap(), Expr::zero(), ChartPoint::new(0.0, 0.0)).unwrap();
        assert_eq!(FlatCorrespondence::from_fields(&cube).unwrap().holomorphy_check(&GridOptions::default()).unwrap(), 0.0);
        let broken = StructureFunctions::new(ConformalChart::flat(), parse("z*zbar").unwrap(), Expr::zero(), ChartPoint::new(0.0, 0.0)).unwrap();
        assert!(FlatCorrespondence::from_fields(&broken).unwrap().holomorphy_check(&GridOptions::default()).unwrap() > 0.5);
        let curved = StructureFunctions::zero(ConformalChart::sphere());
        assert!(matches!(FlatCorrespondence::from_fields(&curved), Err(Error::NotFlatGauge)));
    }

    #[test]
    fn hand_built_d() {
        // D = (1 + zz̄)² means t = −(3/2) ln(1 + zz̄)
        let t = &parse("log(1 + z*zbar)").unwrap() * &Expr::rat(-3, 2);
        let sf = StructureFunctions::new(ConformalChart::flat(), Expr::zero(), t, ChartPoint::new(0.0, 0.0)).unwrap();
        let fc = FlatCorrespondence::from_fields(&sf).unwrap();
        let r = fc.obstruction_residuals(&GridOptions::default()).unwrap();
        assert!(r.max("D3z") < 1e-12);
        assert!((r.max("D2z2w") - 4.0).abs() < 1e-12);
    }

    #[test]
    fn jet_built_system_is_proper() {
        let sf = system();
        let opts = GridOptions { relative: true, ..Default::default() };
        let rep = proper_residuals(&sf, &opts).unwrap();
        assert!(rep.passes(1e-10), "{:?}", rep.worst());
        let fc = build_correspondence(&sf, &opts).unwrap();
        assert!(fc.obstruction_residuals(&opts).unwrap().passes(1e-12));
        assert!(fc.holomorphy_check(&opts).unwrap() < 1e-12);
        let cross = evaluate(sf.chart(), &c3_cross_checks(&sf, &fc), &opts).unwrap();
        assert!(cross.passes(1e-12), "{:?}", cross);
        assert!(sf.s().eval(ChartPoint::new(0.1, 0.2)).unwrap().norm() > 0.1);
    }

    #[test]
    fn correspondence_factor_is_four_thirds() {
        let sf = system();
        let opts = GridOptions::default();
        let good = FlatCorrespondence::with_factor(&sf, (4, 3)).unwrap().obstruction_residuals(&opts).unwrap();
        let printed = FlatCorrespondence::with_factor(&sf, (3, 2)).unwrap().obstruction_residuals(&opts).unwrap();
        assert!(good.max("Azw-Dzz") < 1e-12);
        assert!(printed.max("Azw-Dzz") > 1e-2);
        let osc = StructureFunctions::new(ConformalChart::flat(), Expr::zero(), Expr::zero(), ChartPoint::new(0.0, 0.0)).unwrap();
        for f in [(4, 3), (3, 2)] {
            assert!(FlatCorrespondence::with_factor(&osc, f).unwrap().obstruction_residuals(&opts).unwrap().passes(1e-15));
        }
    }

    #[test]
    fn propagated_structure_matches_jets() {
        let seed = admissible();
        let sf = system();
        let end = ChartPoint::new(0.25, -0.2);
        let samples = integrate_structure_proper_flat(&seed, &ChartPath::straight(ChartPoint::new(0.0, 0.0), end), &IntegratorOptions::default(), 1e-9).unwrap();
        let y = &samples.last().unwrap().state;
        let t = sf.t().unwrap().eval(end).unwrap();
        assert!((y[4] - t).norm() < 1e-9);
        assert!((y[0] - sf.s().eval(end).unwrap()).norm() < 1e-9);
        assert!((y[2] - sf.xi().eval(end).unwrap()).norm() < 1e-9);
        let fc = FlatCorrespondence::from_fields(&sf).unwrap();
        assert!(((-4.0 / 3.0 * y[4]).exp() - fc.d.eval(end).unwrap()).norm() < 1e-9);
    }

    #[test]
    fn propagated_d_is_biquadratic() {
        let seed = admissible();
        let opts = IntegratorOptions::default();
        let chart = ConformalChart::flat().with_domain([-0.3, 0.3, -0.3, 0.3], [5, 5]).unwrap();
        let mut samples = Vec::new();
        for p in chart.grid_points() {
            let out = integrate_structure_proper_flat(&seed, &ChartPath::straight(ChartPoint::new(0.0, 0.0), p), &opts, 1e-9).unwrap();
            let t = out.last().unwrap().state[4];
            samples.push((p, (-4.0 / 3.0 * t).exp()));
        }
        let fit = fit_biquadratic(&samples).unwrap();
        assert!(fit.max_residual < 1e-7, "{}", fit.max_residual);
        assert!(fit.coefficients[8].norm() < 1e-7);
    }

    #[test]
    fn hessian_consistency_on_catalog_potential() {
        let osc = StructureFunctions::new(ConformalChart::flat(), Expr::zero(), Expr::zero(), ChartPoint::new(0.0, 0.0)).unwrap();
        let fc = FlatCorrespondence::from_fields(&osc).unwrap();
        let v = parse("z*zbar + (z + zbar) + i*(z - zbar)").unwrap();
        assert!(fc.hessian_check(&v).iter().all(|e| e.is_zero()));
        assert!(fc.abcd_check(&v).is_zero());
    }
}
