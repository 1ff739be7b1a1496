//! Conformal chart geometry for `g = φ² dz dz̄`.
//!
//! In isothermal coordinates only `Γ^z_zz = 2∂_z ln φ` and its conjugate survive,
//! `R = −8 φ⁻² ∂_z∂_z̄ ln φ` and `Δf = 4 φ⁻² ∂_z∂_z̄ f`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{parse, ChartPoint, Expr, Var};

/// An isothermal chart with conformal factor `phi` over a sampled rectangle.
#[derive(Clone, Debug)]
pub struct ConformalChart {
    phi: Expr,
    /// `[x0, x1, y0, y1]`
    pub domain: [f64; 4],
    /// Grid resolution `[nx, ny]` used for residual reports.
    pub grid: [usize; 2],
}

/// JSON form of a chart.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChartSpec {
    pub phi: String,
    #[serde(default = "default_domain")]
    pub domain: [f64; 4],
    #[serde(default = "default_grid")]
    pub grid: [usize; 2],
}

fn default_domain() -> [f64; 4] {
    [-1.0, 1.0, -1.0, 1.0]
}

fn default_grid() -> [usize; 2] {
    [11, 11]
}

/// Components of the covariant Hessian `∇²f`.
#[derive(Clone, Debug)]
pub struct Hessian {
    pub zz: Expr,
    pub zw: Expr,
    pub ww: Expr,
}

impl ConformalChart {
    /// Chart with the given conformal factor; `phi` must be a real-valued tree.
    pub fn new(phi: Expr, domain: [f64; 4], grid: [usize; 2]) -> Result<Self> {
        if !phi.is_real_tree() {
            return Err(Error::NotReal(phi.to_string()));
        }
        if !(domain[0] < domain[1] && domain[2] < domain[3]) || domain.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid(format!("bad domain {:?}", domain)));
        }
        if grid[0] < 2 || grid[1] < 2 {
            return Err(Error::Invalid(format!("grid must be at least 2x2, got {:?}", grid)));
        }
        Ok(ConformalChart { phi, domain, grid })
    }

    pub fn flat() -> Self {
        ConformalChart::new(Expr::one(), default_domain(), default_grid()).unwrap()
    }

    /// Round sphere of radius 1 in stereographic coordinates, `φ = 2/(1+|z|²)`.
    pub fn sphere() -> Self {
        ConformalChart::new(parse("2/(1 + z*zbar)").unwrap(), default_domain(), default_grid()).unwrap()
    }

    pub fn from_spec(spec: &ChartSpec) -> Result<Self> {
        ConformalChart::new(parse(&spec.phi)?, spec.domain, spec.grid)
    }

    pub fn to_spec(&self) -> ChartSpec {
        ChartSpec { phi: self.phi.to_string(), domain: self.domain, grid: self.grid }
    }

    pub fn with_domain(mut self, domain: [f64; 4], grid: [usize; 2]) -> Result<Self> {
        self.domain = domain;
        self.grid = grid;
        ConformalChart::new(self.phi, self.domain, self.grid)
    }

    pub fn phi(&self) -> &Expr {
        &self.phi
    }

    pub fn is_flat(&self) -> bool {
        self.phi.is_one()
    }

    pub fn log_phi(&self) -> Expr {
        self.phi.log()
    }

    /// `∂_z ln φ`
    pub fn lz(&self) -> Expr {
        &self.phi.diff(Var::Z) / &self.phi
    }

    /// `∂_z̄ ln φ`
    pub fn lw(&self) -> Expr {
        &self.phi.diff(Var::Zbar) / &self.phi
    }

    /// `g_{zz̄} = φ²/2`
    pub fn g_zw(&self) -> Expr {
        self.phi.powi(2).scale(1, 2)
    }

    /// `g^{zz̄} = 2/φ²`
    pub fn g_inv_zw(&self) -> Expr {
        &Expr::int(2) * &self.phi.powi(-2)
    }

    /// `(Γ^z_zz, Γ^z̄_z̄z̄)`
    pub fn christoffel(&self) -> (Expr, Expr) {
        (&Expr::int(2) * &self.lz(), &Expr::int(2) * &self.lw())
    }

    pub fn scalar_curvature(&self) -> Expr {
        let lzw = self.lz().diff(Var::Zbar);
        Expr::mul_all(vec![Expr::int(-8), self.phi.powi(-2), lzw])
    }

    pub fn laplacian(&self, f: &Expr) -> Expr {
        Expr::mul_all(vec![Expr::int(4), self.phi.powi(-2), f.diff(Var::Z).diff(Var::Zbar)])
    }

    pub fn covariant_hessian(&self, f: &Expr) -> Hessian {
        let (gz, gw) = self.christoffel();
        let fz = f.diff(Var::Z);
        let fw = f.diff(Var::Zbar);
        Hessian { zz: &fz.diff(Var::Z) - &(&gz * &fz), zw: fz.diff(Var::Zbar), ww: &fw.diff(Var::Zbar) - &(&gw * &fw) }
    }

    /// Grid points in row-major order (y outer, x inner), endpoints included.
    pub fn grid_points(&self) -> Vec<ChartPoint> {
        let [x0, x1, y0, y1] = self.domain;
        let [nx, ny] = self.grid;
        let mut out = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            let y = y0 + (y1 - y0) * j as f64 / (ny - 1) as f64;
            for i in 0..nx {
                let x = x0 + (x1 - x0) * i as f64 / (nx - 1) as f64;
                out.push(ChartPoint::new(x, y));
            }
        }
        out
    }

    pub fn contains(&self, p: ChartPoint) -> bool {
        let [x0, x1, y0, y1] = self.domain;
        p.x >= x0 && p.x <= x1 && p.y >= y0 && p.y <= y1
    }

    /// Verify `φ > 0` at every grid point where it is defined; returns the number of
    /// singular points.
    pub fn check_positive(&self) -> Result<usize> {
        let mut singular = 0;
        for p in self.grid_points() {
            match self.phi.eval(p) {
                Ok(v) if v.re > 0.0 => {}
                Ok(v) => return Err(Error::Invalid(format!("phi = {} is not positive at ({}, {})", v, p.x, p.y))),
                Err(_) => singular += 1,
            }
        }
        Ok(singular)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn close(a: Complex64, b: f64, tol: f64) -> bool {
        (a - b).norm() < tol
    }

    #[test]
    fn curvature_examples() {
        let p = ChartPoint::new(0.3, -0.4);
        assert!(ConformalChart::flat().scalar_curvature().is_zero());
        assert!(close(ConformalChart::sphere().scalar_curvature().eval(p).unwrap(), 2.0, 1e-13));
        let disc = ConformalChart::new(parse("2/(1 - z*zbar)").unwrap(), [-0.5, 0.5, -0.5, 0.5], [11, 11]).unwrap();
        assert!(close(disc.scalar_curvature().eval(p).unwrap(), -2.0, 1e-13));
    }

    #[test]
    fn christoffel_examples() {
        let (g, gb) = ConformalChart::sphere().christoffel();
        let p = ChartPoint::new(0.7, 0.2);
        let want = parse("-2*zbar/(1 + z*zbar)").unwrap().eval(p).unwrap();
        assert!((g.eval(p).unwrap() - want).norm() < 1e-14);
        assert!((gb.eval(p).unwrap() - want.conj()).norm() < 1e-14);
        let c = ConformalChart::new(parse("exp((z + zbar)/2)").unwrap(), default_domain(), default_grid()).unwrap();
        assert_eq!(c.christoffel().0, Expr::one());
    }

    #[test]
    fn laplacian_and_hessian() {
        let flat = ConformalChart::flat();
        assert_eq!(flat.laplacian(&parse("z*zbar").unwrap()), Expr::int(4));
        assert!(flat.laplacian(&parse("z^2").unwrap()).is_zero());
        let s = ConformalChart::sphere();
        let v = s.laplacian(&parse("z*zbar").unwrap()).eval(ChartPoint::new(0.0, 0.0)).unwrap();
        assert!(close(v, 1.0, 1e-15));
        let h = s.covariant_hessian(&parse("z + zbar").unwrap());
        assert!(close(h.zz.eval(ChartPoint::new(1.0, 0.0)).unwrap(), 1.0, 1e-15));
        let h = flat.covariant_hessian(&parse("z^2").unwrap());
        assert_eq!(h.zz, Expr::int(2));
        assert!(h.zw.is_zero() && h.ww.is_zero());
    }

    #[test]
    fn constant_rescale_scales_curvature() {
        let s = ConformalChart::sphere();
        let s3 = ConformalChart::new(&Expr::int(3) * s.phi(), s.domain, s.grid).unwrap();
        let p = ChartPoint::new(0.1, 0.9);
        let r = s.scalar_curvature().eval(p).unwrap();
        assert!((s3.scalar_curvature().eval(p).unwrap() - r / 9.0).norm() < 1e-14);
    }

    #[test]
    fn rejects_complex_phi() {
        assert!(ConformalChart::new(Expr::z(), default_domain(), default_grid()).is_err());
    }

    #[test]
    fn grid_layout() {
        let c = ConformalChart::flat();
        let g = c.grid_points();
        assert_eq!(g.len(), 121);
        assert_eq!(g[0], ChartPoint::new(-1.0, -1.0));
        assert_eq!(g[120], ChartPoint::new(1.0, 1.0));
        assert_eq!(c.check_positive().unwrap(), 0);
    }
}
