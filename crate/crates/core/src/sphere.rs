//! Systems on the round 2-sphere from pairs of constant trace-free symmetric tensors on ℝ³.
//!
//! The stereographic embedding is `X = ((z+z̄), −i(z−z̄), zz̄−1)/(1+zz̄)`, so `z = 0` is the
//! south pole and the north pole is not covered. Each `L̂` restricts to a special Killing
//! tensor `L` with `λ = −L̂(·, X)`; the vector `l = (λ_z̄, L_z̄z̄, L_z̄z, L_zz, λ_z)` is indexed
//! by `−2..=2` and two of them give Plücker coordinates `p_{i,j} = l⁽¹⁾_i l⁽²⁾_j − l⁽²⁾_i l⁽¹⁾_j`.
//!
//! Everything is built as a symbolic rational function of `(z, z̄)` with exact constants, so
//! the same object evaluates in floating point or exactly. The obstruction clears with
//! `p_{1,−1}³ (1+zz̄)²⁰`; both exponents are minimal (checked along complexified lines).

use std::fmt;

use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fields::{ChartPoint, Expr, Gauss, Tape, Var};
use crate::integrability::remn_polynomial;
use crate::structure::StructureFunctions;
use crate::surface::ConformalChart;

type C64 = Complex64;

/// Exponent of `p_{1,−1}` in the clearing denominator.
pub const CLEAR_P_EXP: i32 = 3;
/// Exponent of `1 + zz̄` in the clearing denominator.
pub const CLEAR_MU_EXP: i32 = 20;

/// Symmetric 3×3 tensor with exact rational entries `(xx, xy, xz, yy, yz, zz)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SymTensor3 {
    pub entries: [BigRational; 6],
}

const IDX: [[usize; 3]; 3] = [[0, 1, 2], [1, 3, 4], [2, 4, 5]];

impl SymTensor3 {
    pub fn new(entries: [BigRational; 6]) -> Self {
        SymTensor3 { entries }
    }

    /// Exact image of the given doubles.
    pub fn from_f64(e: [f64; 6]) -> Result<Self> {
        let conv = |x: f64| BigRational::from_float(x).ok_or_else(|| Error::Invalid(format!("non-finite entry {}", x)));
        Ok(SymTensor3::new([conv(e[0])?, conv(e[1])?, conv(e[2])?, conv(e[3])?, conv(e[4])?, conv(e[5])?]))
    }

    pub fn from_ints(e: [i64; 6]) -> Self {
        SymTensor3::new(e.map(|v| BigRational::from_integer(v.into())))
    }

    /// Integer or fraction strings such as `"-3/7"`.
    pub fn from_strs(e: &[String]) -> Result<Self> {
        if e.len() != 6 {
            return Err(Error::Schema(format!("expected 6 entries, got {}", e.len())));
        }
        let mut out: [BigRational; 6] = Default::default();
        for (k, s) in e.iter().enumerate() {
            out[k] = Gauss::parse_rational(s.trim()).ok_or_else(|| Error::Schema(format!("bad rational `{}`", s)))?;
        }
        Ok(SymTensor3::new(out))
    }

    pub fn identity() -> Self {
        SymTensor3::from_ints([1, 0, 0, 1, 0, 1])
    }

    pub fn get(&self, i: usize, j: usize) -> &BigRational {
        &self.entries[IDX[i][j]]
    }

    pub fn trace(&self) -> BigRational {
        &self.entries[0] + &self.entries[3] + &self.entries[5]
    }

    pub fn is_trace_free(&self) -> bool {
        self.trace().is_zero()
    }

    pub fn scale(&self, c: &BigRational) -> Self {
        SymTensor3::new(self.entries.clone().map(|e| e * c))
    }

    /// `a·self + b·other`
    pub fn combine(&self, a: &BigRational, other: &SymTensor3, b: &BigRational) -> Self {
        let mut out = self.entries.clone();
        for k in 0..6 {
            out[k] = a * &self.entries[k] + b * &other.entries[k];
        }
        SymTensor3::new(out)
    }

    pub fn to_f64(&self) -> [[f64; 3]; 3] {
        let mut m = [[0.0; 3]; 3];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = to_f64(self.get(i, j));
            }
        }
        m
    }

    /// `Q L̂ Qᵀ` rounded to doubles and converted back exactly.
    pub fn rotated(&self, q: &[[f64; 3]; 3]) -> Result<Self> {
        let m = self.to_f64();
        let mut r = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                for a in 0..3 {
                    for b in 0..3 {
                        r[i][j] += q[i][a] * m[a][b] * q[j][b];
                    }
                }
            }
        }
        let mut out = SymTensor3::from_f64([r[0][0], r[0][1], r[0][2], r[1][1], r[1][2], r[2][2]])?;
        if self.is_trace_free() {
            out.entries[5] = -(&out.entries[0] + &out.entries[3]);
        }
        Ok(out)
    }
}

impl fmt::Display for SymTensor3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v: Vec<String> = self.entries.iter().map(|e| e.to_string()).collect();
        write!(f, "[{}]", v.join(", "))
    }
}

fn to_f64(r: &BigRational) -> f64 {
    Gauss::real(r.clone()).to_c64().re
}

fn rconst(r: &BigRational) -> Expr {
    Expr::constant(Gauss::real(r.clone()))
}

/// The embedding `X(z, z̄)` and its derivatives.
fn embedding() -> ([Expr; 3], [Expr; 3], [Expr; 3]) {
    let (z, w) = (Expr::z(), Expr::zbar());
    let mu_inv = (&Expr::one() + &(&z * &w)).recip();
    let x = [
        &(&z + &w) * &mu_inv,
        Expr::mul_all(vec![Expr::constant(Gauss::i().conj()), &z - &w, mu_inv.clone()]),
        &(&(&z * &w) - &Expr::one()) * &mu_inv,
    ];
    let xz = x.clone().map(|e| e.diff(Var::Z));
    let xw = x.clone().map(|e| e.diff(Var::Zbar));
    (x, xz, xw)
}

fn bilinear(l: &SymTensor3, a: &[Expr; 3], b: &[Expr; 3]) -> Expr {
    let mut terms = Vec::new();
    for i in 0..3 {
        for j in 0..3 {
            if !l.get(i, j).is_zero() {
                terms.push(Expr::mul_all(vec![rconst(l.get(i, j)), a[i].clone(), b[j].clone()]));
            }
        }
    }
    Expr::add_all(terms)
}

/// Chart point of a unit vector; fails at the north pole.
pub fn chart_point_of(x: [f64; 3]) -> Result<ChartPoint> {
    let n = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
    if (n - 1.0).abs() > 1e-12 {
        return Err(Error::Invalid(format!("|x| = {} is not 1", n)));
    }
    if 1.0 - x[2] < 1e-14 {
        return Err(Error::NorthPole);
    }
    Ok(ChartPoint::from_z(C64::new(x[0], x[1]) / (1.0 - x[2])))
}

/// Unit vector of a chart point.
pub fn embed(p: ChartPoint) -> [f64; 3] {
    let z = p.z();
    let mu = 1.0 + z.norm_sqr();
    [2.0 * z.re / mu, 2.0 * z.im / mu, (z.norm_sqr() - 1.0) / mu]
}

/// Symbolic chart data `(L_zz, L_zz̄, L_z̄z̄, λ_z, λ_z̄)` of the restriction of `L̂`.
#[derive(Clone, Debug)]
pub struct RestrictionFields {
    pub lzz: Expr,
    pub lzw: Expr,
    pub lww: Expr,
    pub lam_z: Expr,
    pub lam_w: Expr,
}

impl RestrictionFields {
    pub fn new(l: &SymTensor3) -> Self {
        let (x, xz, xw) = embedding();
        RestrictionFields {
            lzz: bilinear(l, &xz, &xz),
            lzw: bilinear(l, &xz, &xw),
            lww: bilinear(l, &xw, &xw),
            lam_z: &Expr::int(-1) * &bilinear(l, &xz, &x),
            lam_w: &Expr::int(-1) * &bilinear(l, &xw, &x),
        }
    }

    /// `l_k` for `k ∈ −2..=2`.
    pub fn l(&self, k: i32) -> &Expr {
        match k {
            -2 => &self.lam_w,
            -1 => &self.lww,
            0 => &self.lzw,
            1 => &self.lzz,
            2 => &self.lam_z,
            _ => panic!("l index {} out of range", k),
        }
    }

    /// Special Killing tensor `K = L − (tr L) g` as `(K_zz, K_zz̄, K_z̄z̄)`; `K_zz̄ = −L_zz̄`.
    pub fn killing(&self) -> (Expr, Expr, Expr) {
        (self.lzz.clone(), &Expr::int(-1) * &self.lzw, self.lww.clone())
    }

    /// `tr L = 4 L_zz̄/φ²`.
    pub fn trace(&self) -> Expr {
        &self.lzw * &(&Expr::int(4) * &ConformalChart::sphere().phi().powi(-2))
    }
}

/// Restriction evaluated at a point.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SphereRestriction {
    pub point: ChartPoint,
    pub lzz: C64,
    pub lzw: C64,
    pub lww: C64,
    pub lam_z: C64,
    pub lam_w: C64,
}

pub fn restrict_to_sphere(l: &SymTensor3, x: [f64; 3]) -> Result<SphereRestriction> {
    let p = chart_point_of(x)?;
    let r = RestrictionFields::new(l);
    let v = Tape::compile(&[r.lzz, r.lzw, r.lww, r.lam_z, r.lam_w]).eval(p)?;
    Ok(SphereRestriction { point: p, lzz: v[0], lzw: v[1], lww: v[2], lam_z: v[3], lam_w: v[4] })
}

/// `K = L − (tr L) g` at a point, as `(K_zz, K_zz̄, K_z̄z̄)`.
pub fn special_to_killing(r: &SphereRestriction) -> (C64, C64, C64) {
    (r.lzz, -r.lzw, r.lww)
}

/// Index order of the ten Plücker coordinates.
pub const PLUCKER_INDICES: [(i32, i32); 10] = [(0, 1), (0, -1), (0, 2), (0, -2), (1, 2), (-1, -2), (1, -2), (-1, 2), (1, -1), (2, -2)];

/// The ten coordinates `p_{i,j}` in the order of [`PLUCKER_INDICES`].
#[derive(Clone, Debug, PartialEq)]
pub struct PluckerPoint<T> {
    pub p: [T; 10],
}

impl<T: Clone + std::ops::Neg<Output = T>> PluckerPoint<T> {
    /// `p_{i,j}` for any `i ≠ j`, using antisymmetry.
    pub fn get(&self, i: i32, j: i32) -> T {
        for (k, &(a, b)) in PLUCKER_INDICES.iter().enumerate() {
            if (a, b) == (i, j) {
                return self.p[k].clone();
            }
            if (a, b) == (j, i) {
                return -self.p[k].clone();
            }
        }
        panic!("no Plücker coordinate p_({},{})", i, j)
    }
}

fn wedge(a: &RestrictionFields, b: &RestrictionFields, i: i32, j: i32) -> Expr {
    &(a.l(i) * b.l(j)) - &(b.l(i) * a.l(j))
}

/// Plücker coordinates as symbolic fields.
pub fn plucker_fields(l1: &SymTensor3, l2: &SymTensor3) -> PluckerPoint<Expr> {
    let (a, b) = (RestrictionFields::new(l1), RestrictionFields::new(l2));
    PluckerPoint { p: PLUCKER_INDICES.map(|(i, j)| wedge(&a, &b, i, j)) }
}

fn check_trace_free(l: &SymTensor3) -> Result<()> {
    if l.is_trace_free() {
        Ok(())
    } else {
        Err(Error::Invalid(format!("tensor {} is not trace-free", l)))
    }
}

pub fn plucker(l1: &SymTensor3, l2: &SymTensor3, x: [f64; 3]) -> Result<PluckerPoint<C64>> {
    check_trace_free(l1)?;
    check_trace_free(l2)?;
    let p = chart_point_of(x)?;
    let v = Tape::compile(&plucker_fields(l1, l2).p).eval(p)?;
    Ok(PluckerPoint { p: v.try_into().unwrap() })
}

pub fn plucker_exact(l1: &SymTensor3, l2: &SymTensor3, z: &Gauss) -> Result<PluckerPoint<Gauss>> {
    check_trace_free(l1)?;
    check_trace_free(l2)?;
    let v = Tape::compile(&plucker_fields(l1, l2).p).eval_exact(z)?;
    Ok(PluckerPoint { p: v.try_into().unwrap() })
}

/// The five quadratic relations `p_ij p_kl − p_ik p_jl + p_il p_jk` over `i<j<k<l` in `−2..=2`.
pub fn plucker_relations<T>(pp: &PluckerPoint<T>) -> Vec<T>
where
    T: Clone + std::ops::Neg<Output = T>,
    for<'a> &'a T: std::ops::Mul<&'a T, Output = T> + std::ops::Add<&'a T, Output = T> + std::ops::Sub<&'a T, Output = T>,
{
    let mut out = Vec::new();
    for skip in -2..=2 {
        let q: Vec<i32> = (-2..=2).filter(|&k| k != skip).collect();
        let (i, j, k, l) = (q[0], q[1], q[2], q[3]);
        let a = &pp.get(i, j) * &pp.get(k, l);
        let b = &pp.get(i, k) * &pp.get(j, l);
        let c = &pp.get(i, l) * &pp.get(j, k);
        out.push(&(&a - &b) + &c);
    }
    out
}

/// Symbolic sphere system from a pair of trace-free tensors.
#[derive(Clone, Debug)]
pub struct SpherePair {
    pub plucker: PluckerPoint<Expr>,
    /// Structure functions read off in the stereographic chart.
    pub structure: StructureFunctions,
    /// `Remn` with the chart's `R = 2`.
    pub remn: Expr,
    /// `p_{1,−1}³ (1+zz̄)²⁰ Remn`
    pub cleared: Expr,
}

impl SpherePair {
    pub fn new(l1: &SymTensor3, l2: &SymTensor3) -> Result<Self> {
        check_trace_free(l1)?;
        check_trace_free(l2)?;
        let chart = ConformalChart::sphere();
        let plucker = plucker_fields(l1, l2);
        let den = plucker.get(1, -1).recip();
        let phi2 = chart.phi().powi(2);
        let s = Expr::mul_all(vec![Expr::rat(3, 4), phi2.clone(), plucker.get(1, 2), den.clone()]);
        let tz = Expr::mul_all(vec![Expr::rat(3, 4), phi2, plucker.get(-2, 1), den]);
        let structure = StructureFunctions::from_gradient(chart.clone(), s, tz, ChartPoint::new(0.0, 0.0));
        let remn = structure_remn(&structure);
        let mu = &Expr::one() + &(&Expr::z() * &Expr::zbar());
        let cleared = Expr::mul_all(vec![plucker.get(1, -1).powi(CLEAR_P_EXP), mu.powi(CLEAR_MU_EXP), remn.clone()]);
        Ok(SpherePair { plucker, structure, remn, cleared })
    }

    /// `(t_z, s, ξ)` at a chart point.
    pub fn structure_at(&self, p: ChartPoint) -> Result<(C64, C64, C64)> {
        self.check_denominator(p)?;
        let sf = &self.structure;
        let v = Tape::compile(&[sf.tz().clone(), sf.s().clone(), sf.xi()]).eval(p)?;
        Ok((v[0], v[1], v[2]))
    }

    fn check_denominator(&self, p: ChartPoint) -> Result<()> {
        let d = self.plucker.get(1, -1).eval(p)?;
        if d.norm() < 1e-14 {
            return Err(Error::SingularDenominator);
        }
        Ok(())
    }

    /// Raw complex component of `Remn` at `p`.
    pub fn remn_at(&self, p: ChartPoint) -> Result<C64> {
        self.check_denominator(p)?;
        Ok(self.remn.eval(p)?)
    }

    /// Frame-invariant size `|Remn|/φ³`.
    pub fn residual_at(&self, p: ChartPoint) -> Result<f64> {
        let phi = 2.0 / (1.0 + p.z().norm_sqr());
        Ok(self.remn_at(p)?.norm() / phi.powi(3))
    }

    /// Cleared obstruction at an exact point.
    pub fn cleared_at(&self, z: &Gauss) -> Result<Gauss> {
        if self.plucker.get(1, -1).eval_exact(z)?.is_zero() {
            return Err(Error::SingularDenominator);
        }
        Ok(self.cleared.eval_exact(z)?)
    }

    /// Cleared obstruction with `z` and `z̄` independent.
    pub fn cleared_at_zw(&self, z: &Gauss, w: &Gauss) -> Result<Gauss> {
        Ok(Tape::compile(std::slice::from_ref(&self.cleared)).eval_exact_zw(z, w)?.remove(0))
    }

    /// Residual scan over a grid, `None` where the denominator vanishes.
    pub fn scan(&self, chart: &ConformalChart) -> Vec<(ChartPoint, Option<f64>)> {
        let tape = Tape::compile(&[self.remn.clone(), self.plucker.get(1, -1)]);
        chart
            .grid_points()
            .into_iter()
            .map(|p| {
                let r = tape.eval(p).ok().filter(|v| v[1].norm() > 1e-14).map(|v| {
                    let phi = 2.0 / (1.0 + p.z().norm_sqr());
                    v[0].norm() / phi.powi(3)
                });
                (p, r)
            })
            .collect()
    }
}

fn structure_remn(sf: &StructureFunctions) -> Expr {
    let jet = sf.jet();
    let map = [("s", jet.s), ("sb", jet.sb), ("xi", jet.xi), ("xib", jet.xib), ("tz", jet.tz), ("tw", jet.tw)]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
    remn_polynomial(sf.chart()).subst(&map)
}

pub fn sphere_structure_functions(l1: &SymTensor3, l2: &SymTensor3, p: ChartPoint) -> Result<(C64, C64, C64)> {
    SpherePair::new(l1, l2)?.structure_at(p)
}

pub fn sphere_constraint_residual(l1: &SymTensor3, l2: &SymTensor3, p: ChartPoint) -> Result<f64> {
    SpherePair::new(l1, l2)?.residual_at(p)
}

/// Cleared obstruction at the exact chart point of `x`.
pub fn cleared_polynomial(l1: &SymTensor3, l2: &SymTensor3, z: &Gauss) -> Result<Gauss> {
    SpherePair::new(l1, l2)?.cleared_at(z)
}

/// Exact chart coordinate of a rational unit vector.
pub fn exact_chart_point(x: [&BigRational; 3]) -> Result<Gauss> {
    let one = BigRational::from_integer(1.into());
    let n = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
    if n != one {
        return Err(Error::Invalid(format!("|x|² = {} is not 1", n)));
    }
    let d = &one - x[2];
    if d.is_zero() || d.is_negative() {
        return Err(Error::NorthPole);
    }
    Ok(Gauss::new(x[0] / &d, x[1] / &d))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::fd_probe_richardson;
    use crate::integrability::{proper_residuals, GridOptions};
    use rand::{Rng, SeedableRng};

    fn r(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    fn pair() -> (SymTensor3, SymTensor3) {
        (SymTensor3::from_ints([2, -1, 3, 1, 1, -3]), SymTensor3::from_ints([-1, 2, 0, 3, -2, -2]))
    }

    fn generic() -> (SymTensor3, SymTensor3) {
        (SymTensor3::from_ints([1, 0, 0, -1, 0, 0]), SymTensor3::from_ints([0, 0, 0, 1, 0, -1]))
    }

    #[test]
    fn embedding_is_isometric() {
        let (x, xz, xw) = embedding();
        let p = ChartPoint::new(0.3, -0.8);
        let e = |v: &[Expr; 3], u: &[Expr; 3]| -> C64 { (0..3).map(|k| v[k].eval(p).unwrap() * u[k].eval(p).unwrap()).sum() };
        assert!((e(&x, &x) - 1.0).norm() < 1e-14);
        assert!(e(&xz, &xz).norm() < 1e-14);
        let phi = 2.0 / (1.0 + p.z().norm_sqr());
        assert!((e(&xz, &xw) - phi * phi / 2.0).norm() < 1e-14);
        let c = chart_point_of(embed(p)).unwrap();
        assert!((c.z() - p.z()).norm() < 1e-14);
        assert!(matches!(chart_point_of([0.0, 0.0, 1.0]), Err(Error::NorthPole)));
    }

    #[test]
    fn restriction_examples() {
        let x = embed(ChartPoint::new(0.4, 0.7));
        let g = restrict_to_sphere(&SymTensor3::identity(), x).unwrap();
        let phi = 2.0 / (1.0 + 0.65);
        assert!((g.lzw - phi * phi / 2.0).norm() < 1e-14 && g.lzz.norm() < 1e-14);
        assert!(g.lam_z.norm() < 1e-14 && g.lam_w.norm() < 1e-14);

        let d = restrict_to_sphere(&SymTensor3::from_ints([1, 0, 0, 1, 0, -2]), [0.0, 0.0, -1.0]).unwrap();
        // tangent basis at z = 0: X_z = (1, −i, 0), X_z̄ = (1, i, 0)
        assert!(d.lzz.norm() < 1e-15 && (d.lzw - 2.0).norm() < 1e-15);
        assert!(d.lam_z.norm() < 1e-15 && d.lam_w.norm() < 1e-15);

        // λ(v) = −v₂ at x = e₁; tangent vectors from a finite-difference embedding
        let e12 = restrict_to_sphere(&SymTensor3::from_ints([0, 1, 0, 0, 0, 0]), [1.0, 0.0, 0.0]).unwrap();
        let h = 1e-6;
        let pz = |dz: C64| embed(ChartPoint::from_z(C64::new(1.0, 0.0) + dz));
        let dx = (pz(C64::new(h, 0.0))[1] - pz(C64::new(-h, 0.0))[1]) / (2.0 * h);
        let dy = (pz(C64::new(0.0, h))[1] - pz(C64::new(0.0, -h))[1]) / (2.0 * h);
        let xz2 = 0.5 * C64::new(dx, -dy);
        assert!((e12.lam_z + xz2).norm() < 1e-8);
    }

    #[test]
    fn sinyukov_and_killing() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let chart = ConformalChart::sphere();
        let (gz, _) = chart.christoffel();
        let phi2 = chart.phi().powi(2);
        for _ in 0..4 {
            let e: [i64; 5] = std::array::from_fn(|_| rng.gen_range(-5..=5));
            let l = SymTensor3::from_ints([e[0], e[1], e[2], e[3], e[4], -e[0] - e[3]]);
            let f = RestrictionFields::new(&l);
            let p = ChartPoint::new(rng.gen_range(-0.8..0.8), rng.gen_range(-0.8..0.8));
            let d = |e: &Expr, v: Var| fd_probe_richardson(e, p, v, 1e-3).unwrap();
            let at = |e: &Expr| e.eval(p).unwrap();
            let (gam, ph2) = (at(&gz), at(&phi2));
            // ∇_k L_ij = λ_i g_jk + λ_j g_ik
            assert!((d(&f.lzz, Var::Z) - 2.0 * gam * at(&f.lzz)).norm() < 1e-10);
            assert!((d(&f.lzz, Var::Zbar) - at(&f.lam_z) * ph2).norm() < 1e-10);
            assert!((d(&f.lzw, Var::Z) - gam * at(&f.lzw) - at(&f.lam_z) * ph2 / 2.0).norm() < 1e-10);
            // λ = ½ d tr L
            assert!((at(&f.lam_z) - 0.5 * d(&f.trace(), Var::Z)).norm() < 1e-9);
            // K = L − (tr L) g is Killing
            let (kzz, kzw, _) = f.killing();
            assert!((d(&kzz, Var::Z) - 2.0 * gam * at(&kzz)).norm() < 1e-10);
            assert!((d(&kzz, Var::Zbar) + 2.0 * (d(&kzw, Var::Z) - gam * at(&kzw))).norm() < 1e-9);
            // tr K = −tr L
            let trk = 4.0 * at(&kzw) / ph2;
            assert!((trk + at(&f.trace())).norm() < 1e-12);
        }
        let g = restrict_to_sphere(&SymTensor3::identity(), embed(ChartPoint::new(0.2, 0.1))).unwrap();
        let (_, kzw, _) = special_to_killing(&g);
        assert!((kzw + g.lzw).norm() < 1e-15);
    }

    #[test]
    fn plucker_examples() {
        let (a, b) = pair();
        let x = embed(ChartPoint::new(0.3, 0.5));
        let p = plucker(&a, &b, x).unwrap();
        let q = plucker(&b, &a, x).unwrap();
        for k in 0..10 {
            assert!((p.p[k] + q.p[k]).norm() < 1e-13);
        }
        let z = plucker(&a, &a.scale(&r(-3, 2)), x).unwrap();
        assert!(z.p.iter().all(|v| v.norm() < 1e-13));
        assert!(plucker_relations(&p).iter().all(|v| v.norm() < 1e-12));

        // brute-force minors at the south pole
        let l1 = SymTensor3::from_ints([1, 0, 0, -1, 0, 0]);
        let l2 = SymTensor3::from_ints([0, 1, 0, 0, 0, 0]);
        let xz = [C64::new(1.0, 0.0), C64::new(0.0, -1.0), C64::new(0.0, 0.0)];
        let xw = [C64::new(1.0, 0.0), C64::new(0.0, 1.0), C64::new(0.0, 0.0)];
        let xs = [0.0, 0.0, -1.0];
        let vec5 = |l: &SymTensor3| -> [C64; 5] {
            let m = l.to_f64();
            let bil = |u: &[C64; 3], v: &[C64; 3]| -> C64 { (0..3).flat_map(|i| (0..3).map(move |j| (i, j))).map(|(i, j)| u[i] * m[i][j] * v[j]).sum() };
            let lam = |u: &[C64; 3]| -> C64 { -(0..3).flat_map(|i| (0..3).map(move |j| (i, j))).map(|(i, j)| u[i] * m[i][j] * xs[j]).sum::<C64>() };
            [lam(&xw), bil(&xw, &xw), bil(&xw, &xz), bil(&xz, &xz), lam(&xz)]
        };
        let (u, v) = (vec5(&l1), vec5(&l2));
        let p = plucker(&l1, &l2, xs).unwrap();
        for (k, &(i, j)) in PLUCKER_INDICES.iter().enumerate() {
            let (i, j) = ((i + 2) as usize, (j + 2) as usize);
            assert!((p.p[k] - (u[i] * v[j] - v[i] * u[j])).norm() < 1e-14, "{:?}", PLUCKER_INDICES[k]);
        }
    }

    #[test]
    fn exact_plucker_relations() {
        let (a, b) = pair();
        let p = plucker_exact(&a, &b, &Gauss::new(r(1, 3), r(-2, 5))).unwrap();
        assert!(p.p.iter().any(|v| !v.is_zero()));
        assert!(plucker_relations(&p).iter().all(|v| v.is_zero()));
    }

    #[test]
    fn xi_matches_sphere_form() {
        let (a, b) = pair();
        let sp = SpherePair::new(&a, &b).unwrap();
        let sf = &sp.structure;
        let phi = sf.chart().phi();
        let alt = &Expr::int(2) * &(&(&sf.s().diff(Var::Zbar) - &Expr::mul_all(vec![phi.clone(), Expr::z(), sf.s().clone()])) + &Expr::mul_all(vec![Expr::rat(2, 3), sf.tw().clone(), sf.s().clone()]));
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let (t1, t2) = (Tape::compile(&[sf.xi()]), Tape::compile(&[alt]));
        for _ in 0..20 {
            let p = ChartPoint::new(rng.gen_range(-0.9..0.9), rng.gen_range(-0.9..0.9));
            let (u, v) = (t1.eval(p).unwrap()[0], t2.eval(p).unwrap()[0]);
            assert!((u - v).norm() < 1e-12 * (1.0 + u.norm()));
        }
    }

    #[test]
    fn structure_readoff_is_projective() {
        let (a, b) = pair();
        let p = ChartPoint::new(0.25, -0.4);
        let v = sphere_structure_functions(&a, &b, p).unwrap();
        let w = sphere_structure_functions(&a, &b.scale(&r(7, 3)), p).unwrap();
        // unit-determinant GL(2) mix
        let (a2, b2) = (a.combine(&r(2, 1), &b, &r(1, 1)), a.combine(&r(3, 1), &b, &r(2, 1)));
        let u = sphere_structure_functions(&a2, &b2, p).unwrap();
        for (x, y) in [(v.0, w.0), (v.1, w.1), (v.2, w.2), (v.0, u.0), (v.1, u.1), (v.2, u.2)] {
            assert!((x - y).norm() < 1e-12 * (1.0 + x.norm()));
        }
    }

    #[test]
    fn remn_vanishes_without_structure() {
        let sf = StructureFunctions::zero(ConformalChart::sphere());
        let r = structure_remn(&sf);
        for p in sf.chart().grid_points() {
            assert!(r.eval(p).unwrap().norm() < 1e-14);
        }
    }

    #[test]
    fn random_pair_regression() {
        let (a, b) = pair();
        let sp = SpherePair::new(&a, &b).unwrap();
        let p = ChartPoint::new(0.25, -0.4);
        let res = sp.residual_at(p).unwrap();
        assert!(res > 1e-3, "{}", res);
        let scan = sp.scan(&ConformalChart::sphere().with_domain([-1.0, 1.0, -1.0, 1.0], [21, 21]).unwrap());
        assert!(scan.iter().all(|(_, r)| r.map_or(true, |v| v.is_finite())));
    }

    #[test]
    fn generic_system_satisfies_the_obstruction() {
        let (a, b) = generic();
        let sp = SpherePair::new(&a, &b).unwrap();
        let chart = ConformalChart::sphere().with_domain([0.13, 0.61, 0.11, 0.53], [9, 9]).unwrap();
        let worst = sp.scan(&chart).iter().filter_map(|(_, r)| *r).fold(0.0, f64::max);
        assert!(worst < 1e-7, "{}", worst);
        let mut sf = sp.structure.clone();
        sf = StructureFunctions::from_gradient(chart, sf.s().clone(), sf.tz().clone(), sf.base());
        let rep = proper_residuals(&sf, &GridOptions { relative: true, ..Default::default() }).unwrap();
        assert!(rep.passes(1e-7), "{:?}", rep.worst());
        // every proper equation vanishes exactly at a rational point
        let z = Gauss::new(r(1, 3), r(1, 2));
        for eq in crate::integrability::proper_equations(&sp.structure) {
            for e in eq.residuals() {
                assert!(e.eval_exact(&z).unwrap().is_zero(), "{}", eq.name);
            }
        }
    }

    #[test]
    fn rotation_equivariance() {
        let (a, b) = pair();
        let sp = SpherePair::new(&a, &b).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let q = random_rotation(&mut rng);
        let (ra, rb) = (a.rotated(&q).unwrap(), b.rotated(&q).unwrap());
        let rp = SpherePair::new(&ra, &rb).unwrap();
        for _ in 0..5 {
            let p = ChartPoint::new(rng.gen_range(-0.7..0.7), rng.gen_range(-0.7..0.7));
            let x = embed(p);
            let qx: [f64; 3] = std::array::from_fn(|i| (0..3).map(|j| q[i][j] * x[j]).sum());
            let r0 = sp.residual_at(p).unwrap();
            let r1 = rp.residual_at(chart_point_of(qx).unwrap()).unwrap();
            assert!((r0 - r1).abs() < 1e-9 * (1.0 + r0), "{} {}", r0, r1);
        }
    }

    pub(crate) fn random_rotation<R: Rng>(rng: &mut R) -> [[f64; 3]; 3] {
        let q: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
        let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
        let [w, x, y, z] = q.map(|v| v / n);
        [
            [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
            [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
            [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
        ]
    }

    #[test]
    fn cleared_polynomial_matches_float() {
        let (a, b) = pair();
        let sp = SpherePair::new(&a, &b).unwrap();
        let z = Gauss::new(r(1, 4), r(-2, 5));
        let exact = sp.cleared_at(&z).unwrap();
        let c = z.to_c64();
        let p = ChartPoint::from_z(c);
        let den = sp.plucker.get(1, -1).eval(p).unwrap().powi(CLEAR_P_EXP) * (1.0 + c.norm_sqr()).powi(CLEAR_MU_EXP);
        let float = sp.remn_at(p).unwrap() * den;
        assert!(!exact.is_zero());
        assert!((exact.to_c64() - float).norm() < 1e-9 * float.norm());
        // homogeneity in (L̂₁, L̂₂)
        for k in [2, 3] {
            let c = r(k, 1);
            let scaled = SpherePair::new(&a.scale(&c), &b.scale(&c)).unwrap().cleared_at(&z).unwrap();
            let ratio = (&scaled * &exact.inv().unwrap()).to_c64();
            assert!((ratio.re.ln() / (k as f64).ln() - 6.0).abs() < 1e-12 && ratio.im == 0.0);
        }
        let g = SpherePair::new(&generic().0, &generic().1).unwrap();
        assert!(g.cleared_at(&z).unwrap().is_zero());
    }

    /// Values of `cleared · μ^{-dm} · p_{1,−1}^{-dp}` along `z = z₀ + λa`, `z̄ = w₀ + λb`, `λ = 0..n`.
    fn line_values(sp: &SpherePair, line: [(i64, i64); 4], n: i64, dm: i32, dp: i32) -> Vec<Gauss> {
        let q = |(a, b): (i64, i64)| Gauss::real(BigRational::new(a.into(), b.into()));
        let p11 = Tape::compile(&[sp.plucker.get(1, -1)]);
        (0..n)
            .map(|k| {
                let l = Gauss::int(k);
                let z = &q(line[0]) + &(&l * &q(line[1]));
                let w = &q(line[2]) + &(&l * &q(line[3]));
                let mu = &Gauss::one() + &(&z * &w);
                let p = p11.eval_exact_zw(&z, &w).unwrap().remove(0);
                let v = sp.cleared_at_zw(&z, &w).unwrap();
                &(&v * &mu.powi(-dm).unwrap()) * &p.powi(-dp).unwrap()
            })
            .collect()
    }

    /// Degree of the polynomial through the samples, if the differences vanish.
    fn difference_degree(mut v: Vec<Gauss>) -> Option<usize> {
        for ord in 0..v.len() - 2 {
            if v.iter().all(|x| x.is_zero()) {
                return Some(ord - 1);
            }
            v = v.windows(2).map(|w| &w[1] - &w[0]).collect();
        }
        None
    }

    #[test]
    fn clearing_exponents_are_minimal() {
        let (a, b) = pair();
        let c = SymTensor3::from_ints([0, 1, -2, -1, 3, 1]);
        let lines = [[(1, 3), (1, 7), (-2, 5), (2, 9)], [(-1, 2), (3, 11), (1, 4), (-1, 6)]];
        for sp in [SpherePair::new(&a, &b).unwrap(), SpherePair::new(&b, &c).unwrap()] {
            for line in lines {
                assert!(difference_degree(line_values(&sp, line, 16, 0, 0)).is_some());
                assert_eq!(difference_degree(line_values(&sp, line, 24, 1, 0)), None);
                assert_eq!(difference_degree(line_values(&sp, line, 24, 0, 1)), None);
            }
        }
    }
}
