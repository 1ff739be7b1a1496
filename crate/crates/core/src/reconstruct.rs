//! Integration of the closed prolongation systems along chart paths.
//!
//! The potential state is `Y = (V, V_z, V_z̄, V_zz̄)` in partial derivatives; covariant
//! Hessian components are converted with the two Christoffel symbols when the
//! connection matrices `∂_z Y = A_z Y`, `∂_z̄ Y = A_z̄ Y` are assembled.

use nalgebra::{DMatrix, SVD};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{ChartPoint, Expr, Tape, Var};
use crate::integrability::{self, GridOptions, TauMode};
use crate::structure::StructureFunctions;
use crate::surface::ConformalChart;

type C64 = Complex64;

/// Coefficients of the differentiated Wilczynski equation
/// `½∂_z̄ V_{,zz} = q11 V_z + q12 V_z̄ + γ1 V + t_z V_zz̄` and its conjugate.
#[derive(Clone, Debug)]
pub struct SecondProlongationCoefficients {
    pub q11: Expr,
    pub q12: Expr,
    pub q21: Expr,
    pub gamma1: Expr,
    pub gamma2: Expr,
}

impl SecondProlongationCoefficients {
    pub fn new(sf: &StructureFunctions, mode: TauMode) -> Self {
        let j = sf.jet();
        let (tau, taub) = match mode {
            TauMode::Conformal => (j.tau.clone(), j.taub.clone()),
            TauMode::Proper => (Expr::zero(), Expr::zero()),
        };
        let q11 = &Expr::mul_all(vec![Expr::rat(10, 3), j.s.clone(), j.sb.clone()])
            + &Expr::mul_all(vec![Expr::rat(3, 8), j.phi.powi(2), j.r.clone()]);
        let q12 = Expr::add_all(vec![
            j.s.diff(Var::Zbar),
            Expr::mul_all(vec![Expr::int(2), j.s.clone(), j.tw.clone()]),
            &j.s * &j.gw,
            tau.scale(1, 2),
        ]);
        let gamma1 = &tau.diff(Var::Zbar).scale(1, 2) + &(&j.s * &taub);
        SecondProlongationCoefficients { q21: q12.conj(), gamma2: gamma1.conj(), q11, q12, gamma1 }
    }
}

// ----- paths -----

/// Piecewise-linear path in the chart.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChartPath {
    pub vertices: Vec<ChartPoint>,
}

impl ChartPath {
    pub fn new(vertices: Vec<ChartPoint>) -> Result<Self> {
        if vertices.len() < 2 || vertices.iter().any(|p| !p.is_finite()) {
            return Err(Error::Invalid("a path needs at least two finite vertices".into()));
        }
        Ok(ChartPath { vertices })
    }

    pub fn straight(a: ChartPoint, b: ChartPoint) -> Self {
        ChartPath { vertices: vec![a, b] }
    }

    pub fn start(&self) -> ChartPoint {
        self.vertices[0]
    }

    pub fn end(&self) -> ChartPoint {
        *self.vertices.last().unwrap()
    }

    pub fn length(&self) -> f64 {
        self.vertices.windows(2).map(|w| (w[1].z() - w[0].z()).norm()).sum()
    }

    /// Four axis-parallel variants from `a` to `b`: x first, y first, and the two
    /// staircases that switch direction half-way.
    pub fn fan(a: ChartPoint, b: ChartPoint) -> Vec<ChartPath> {
        let (mx, my) = ((a.x + b.x) / 2.0, (a.y + b.y) / 2.0);
        let p = ChartPoint::new;
        let mk = |v: Vec<ChartPoint>| ChartPath { vertices: dedup(v) };
        vec![
            mk(vec![a, p(b.x, a.y), b]),
            mk(vec![a, p(a.x, b.y), b]),
            mk(vec![a, p(mx, a.y), p(mx, b.y), b]),
            mk(vec![a, p(a.x, my), p(b.x, my), b]),
        ]
    }

    /// Closed rectangular loop `a → (b.x, a.y) → b → (a.x, b.y) → a`.
    pub fn loop_through(a: ChartPoint, b: ChartPoint) -> Self {
        ChartPath { vertices: vec![a, ChartPoint::new(b.x, a.y), b, ChartPoint::new(a.x, b.y), a] }
    }

    fn check_domain(&self, chart: &ConformalChart) -> Result<()> {
        for v in &self.vertices {
            if !chart.contains(*v) {
                return Err(Error::DomainExit { x: v.x, y: v.y });
            }
        }
        Ok(())
    }
}

fn dedup(v: Vec<ChartPoint>) -> Vec<ChartPoint> {
    let mut out: Vec<ChartPoint> = Vec::with_capacity(v.len());
    for p in v {
        if out.last() != Some(&p) {
            out.push(p);
        }
    }
    if out.len() == 1 {
        out.push(out[0]);
    }
    out
}

// ----- integrator -----

#[derive(Clone, Copy, Debug)]
pub struct IntegratorOptions {
    /// Local error tolerance per unit path length.
    pub tol: f64,
    pub initial_step: f64,
    pub max_steps: usize,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        IntegratorOptions { tol: 1e-10, initial_step: 0.05, max_steps: 200_000 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Sample {
    pub sigma: f64,
    pub point: ChartPoint,
    pub state: Vec<C64>,
}

/// Right-hand side `dY/dσ = f(point, ż, Y)` along a path.
pub trait PathSystem {
    fn rhs(&self, p: ChartPoint, zdot: C64, y: &[C64]) -> Result<Vec<C64>>;
}

fn rk4<S: PathSystem + ?Sized>(sys: &S, a: C64, dir: C64, sigma: f64, h: f64, y: &[C64]) -> Result<Vec<C64>> {
    let at = |s: f64| ChartPoint::from_z(a + dir * s);
    let axpy = |y: &[C64], k: &[C64], c: f64| -> Vec<C64> { y.iter().zip(k).map(|(a, b)| a + b * c).collect() };
    let k1 = sys.rhs(at(sigma), dir, y)?;
    let k2 = sys.rhs(at(sigma + h / 2.0), dir, &axpy(y, &k1, h / 2.0))?;
    let k3 = sys.rhs(at(sigma + h / 2.0), dir, &axpy(y, &k2, h / 2.0))?;
    let k4 = sys.rhs(at(sigma + h), dir, &axpy(y, &k3, h))?;
    Ok((0..y.len()).map(|i| y[i] + (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) * (h / 6.0)).collect())
}

/// Adaptive RK4 with step doubling and Richardson extrapolation along each segment,
/// parametrized by arc length.
pub fn integrate_path<S: PathSystem + ?Sized>(sys: &S, path: &ChartPath, y0: Vec<C64>, opts: &IntegratorOptions) -> Result<Vec<Sample>> {
    let mut y = y0;
    let mut out = vec![Sample { sigma: 0.0, point: path.start(), state: y.clone() }];
    let mut offset = 0.0;
    let mut steps = 0;
    for seg in path.vertices.windows(2) {
        let a = seg[0].z();
        let d = seg[1].z() - a;
        let len = d.norm();
        if len == 0.0 {
            continue;
        }
        let dir = d / len;
        let mut sigma = 0.0;
        let mut h = opts.initial_step.min(len);
        while sigma < len {
            if steps >= opts.max_steps {
                return Err(Error::StepFailure { sigma: offset + sigma });
            }
            steps += 1;
            let last = sigma + h >= len;
            if last {
                h = len - sigma;
            }
            let full = rk4(sys, a, dir, sigma, h, &y)?;
            let half = rk4(sys, a, dir, sigma, h / 2.0, &y)?;
            let two = rk4(sys, a, dir, sigma + h / 2.0, h / 2.0, &half)?;
            let scale = y.iter().map(|v| v.norm()).fold(1.0, f64::max);
            let err = full.iter().zip(&two).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max) / 15.0;
            if !err.is_finite() {
                return Err(Error::StepFailure { sigma: offset + sigma });
            }
            let allowed = opts.tol * h * scale;
            if err <= allowed {
                y = two.iter().zip(&full).map(|(t, f)| t + (t - f) / 15.0).collect();
                sigma = if last { len } else { sigma + h };
                out.push(Sample { sigma: offset + sigma, point: ChartPoint::from_z(a + dir * sigma), state: y.clone() });
            }
            let factor = if err == 0.0 { 4.0 } else { (0.9 * (allowed / err).powf(0.2)).clamp(0.1, 4.0) };
            h *= factor;
            if h < 1e-12 * len.max(1.0) {
                return Err(Error::StepFailure { sigma: offset + sigma });
            }
        }
        offset += len;
    }
    Ok(out)
}

// ----- linear systems with symbolic connection matrices -----

/// `∂_z Y = A_z Y`, `∂_z̄ Y = A_z̄ Y` with entries compiled to one tape.
pub struct LinearConnection {
    n: usize,
    tape: Tape,
}

impl LinearConnection {
    pub fn new(az: &[Vec<Expr>], aw: &[Vec<Expr>]) -> Self {
        let n = az.len();
        let exprs: Vec<Expr> = az.iter().chain(aw.iter()).flat_map(|r| r.iter().cloned()).collect();
        LinearConnection { n, tape: Tape::compile(&exprs) }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// `(A_z, A_z̄)` at a point, row-major.
    pub fn matrices(&self, p: ChartPoint) -> Result<(Vec<C64>, Vec<C64>)> {
        let mut v = self.tape.eval(p)?;
        let aw = v.split_off(self.n * self.n);
        Ok((v, aw))
    }
}

impl PathSystem for LinearConnection {
    fn rhs(&self, p: ChartPoint, zdot: C64, y: &[C64]) -> Result<Vec<C64>> {
        let (az, aw) = self.matrices(p)?;
        let n = self.n;
        let zb = zdot.conj();
        Ok((0..n).map(|i| (0..n).map(|k| (zdot * az[i * n + k] + zb * aw[i * n + k]) * y[k]).sum()).collect())
    }
}

// ----- potentials -----

/// Values at the base point; `V_z̄ = conj(V_z)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PotentialSeed {
    pub v0: f64,
    pub vz0: C64,
    pub lap0: f64,
}

impl PotentialSeed {
    pub fn new(v0: f64, vz0: C64, lap0: f64) -> Self {
        PotentialSeed { v0, vz0, lap0 }
    }

    /// The four real basis seeds.
    pub fn basis() -> [PotentialSeed; 4] {
        let z = C64::new(0.0, 0.0);
        [
            PotentialSeed::new(1.0, z, 0.0),
            PotentialSeed::new(0.0, C64::new(1.0, 0.0), 0.0),
            PotentialSeed::new(0.0, C64::new(0.0, 1.0), 0.0),
            PotentialSeed::new(0.0, z, 1.0),
        ]
    }
}

/// State of the potential prolongation at one point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PotentialState {
    pub v: C64,
    pub vz: C64,
    pub vw: C64,
    pub lap: C64,
}

impl PotentialState {
    /// Real coordinates `(V, Re V_z, Im V_z, ΔV)`.
    pub fn real_coords(&self) -> [f64; 4] {
        [self.v.re, self.vz.re, self.vz.im, self.lap.re]
    }

    pub fn distance(&self, o: &PotentialState) -> f64 {
        [(self.v - o.v).norm(), (self.vz - o.vz).norm(), (self.vw - o.vw).norm(), (self.lap - o.lap).norm()]
            .into_iter()
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PotentialTrajectory {
    pub samples: Vec<(f64, ChartPoint, PotentialState)>,
    /// Set when the registry of the requested mode is not below threshold.
    pub warnings: Vec<String>,
}

impl PotentialTrajectory {
    pub fn end(&self) -> PotentialState {
        self.samples.last().unwrap().2
    }
}

/// Connection for `Y = (V, V_z, V_z̄, V_zz̄)`.
pub fn potential_connection(sf: &StructureFunctions, mode: TauMode) -> LinearConnection {
    let j = sf.jet();
    let (tau, taub) = match mode {
        TauMode::Conformal => (j.tau.clone(), j.taub.clone()),
        TauMode::Proper => (Expr::zero(), Expr::zero()),
    };
    let (o, one, two) = (Expr::zero(), Expr::one(), Expr::int(2));
    let row_pz = vec![tau, &(&two * &j.tz) + &j.gz, &two * &j.s, o.clone()];
    let row_qw = vec![taub, &two * &j.sb, &(&two * &j.tw) + &j.gw, o.clone()];
    let mut az = vec![
        vec![o.clone(), one.clone(), o.clone(), o.clone()],
        row_pz.clone(),
        vec![o.clone(), o.clone(), o.clone(), one.clone()],
        vec![],
    ];
    let mut aw = vec![
        vec![o.clone(), o.clone(), one.clone(), o.clone()],
        vec![o.clone(), o.clone(), o.clone(), one.clone()],
        row_qw.clone(),
        vec![],
    ];
    // ∂_z U = ∂_z̄(row_pz)·Y + row_pz·A_z̄ Y, and the conjugate for ∂_z̄ U
    az[3] = compose(&row_pz, &aw, Var::Zbar);
    aw[3] = compose(&row_qw, &az, Var::Z);
    LinearConnection::new(&az, &aw)
}

fn compose(row: &[Expr], other: &[Vec<Expr>], var: Var) -> Vec<Expr> {
    (0..4)
        .map(|k| {
            let mut terms = vec![row[k].diff(var)];
            for (i, r) in row.iter().enumerate() {
                if !r.is_zero() && !other[i].is_empty() && !other[i][k].is_zero() {
                    terms.push(r * &other[i][k]);
                }
            }
            Expr::add_all(terms)
        })
        .collect()
}

fn potential_state(chart: &ConformalChart, p: ChartPoint, y: &[C64]) -> Result<PotentialState> {
    let phi = chart.phi().eval(p)?;
    Ok(PotentialState { v: y[0], vz: y[1], vw: y[2], lap: 4.0 * y[3] / (phi * phi) })
}

/// Integrate the potential prolongation from `seed` at the path start.
pub fn integrate_potential(
    sf: &StructureFunctions,
    mode: TauMode,
    seed: &PotentialSeed,
    path: &ChartPath,
    opts: &IntegratorOptions,
) -> Result<PotentialTrajectory> {
    let conn = potential_connection(sf, mode);
    integrate_potential_with(&conn, sf.chart(), seed, path, opts)
}

/// Same as [`integrate_potential`] with a prebuilt connection.
pub fn integrate_potential_with(
    conn: &LinearConnection,
    chart: &ConformalChart,
    seed: &PotentialSeed,
    path: &ChartPath,
    opts: &IntegratorOptions,
) -> Result<PotentialTrajectory> {
    path.check_domain(chart)?;
    let p0 = path.start();
    let phi0 = chart.phi().eval(p0)?;
    let y0 = vec![C64::new(seed.v0, 0.0), seed.vz0, seed.vz0.conj(), phi0 * phi0 * seed.lap0 / 4.0];
    let raw = integrate_path(conn, path, y0, opts)?;
    let samples = raw
        .into_iter()
        .map(|s| Ok((s.sigma, s.point, potential_state(chart, s.point, &s.state)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(PotentialTrajectory { samples, warnings: Vec::new() })
}

/// Names of registry entries above `tol`, as warnings.
pub fn precondition_warnings(sf: &StructureFunctions, mode: TauMode, tol: f64) -> Vec<String> {
    let opts = GridOptions::default();
    let report = match mode {
        TauMode::Conformal => integrability::conformal_residuals(sf, &opts),
        TauMode::Proper => integrability::proper_residuals(sf, &opts),
    };
    match report {
        Ok(r) => r.failing(tol).into_iter().map(|n| format!("residual {} = {:e} above threshold", n, r.max(&n))).collect(),
        Err(e) => vec![e.to_string()],
    }
}

/// Maximum pairwise endpoint discrepancy over the first `n_paths` fan paths
/// (the straight segment is used first, then the L-shaped variants).
pub fn potential_path_independence(
    sf: &StructureFunctions,
    mode: TauMode,
    seed: &PotentialSeed,
    start: ChartPoint,
    target: ChartPoint,
    n_paths: usize,
    opts: &IntegratorOptions,
) -> Result<(f64, Vec<PotentialState>)> {
    let conn = potential_connection(sf, mode);
    let mut paths = vec![ChartPath::straight(start, target)];
    paths.extend(ChartPath::fan(start, target));
    paths.truncate(n_paths.max(1));
    let ends = paths
        .iter()
        .map(|p| integrate_potential_with(&conn, sf.chart(), seed, p, opts).map(|t| t.end()))
        .collect::<Result<Vec<_>>>()?;
    let mut worst: f64 = 0.0;
    for i in 0..ends.len() {
        for k in i + 1..ends.len() {
            worst = worst.max(ends[i].distance(&ends[k]));
        }
    }
    Ok((worst, ends))
}

/// Real 4×4 endpoint matrix of the seed-to-endpoint map and its singular values.
pub fn potential_endpoint_map(
    sf: &StructureFunctions,
    mode: TauMode,
    path: &ChartPath,
    opts: &IntegratorOptions,
) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let conn = potential_connection(sf, mode);
    let mut m = DMatrix::zeros(4, 4);
    for (k, seed) in PotentialSeed::basis().iter().enumerate() {
        let e = integrate_potential_with(&conn, sf.chart(), seed, path, opts)?.end().real_coords();
        for i in 0..4 {
            m[(i, k)] = e[i];
        }
    }
    let sv = SVD::new(m.clone(), false, false).singular_values.iter().copied().collect();
    Ok((m, sv))
}

// ----- conformal Killing components -----

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KillingSeed {
    pub c1: C64,
    pub c2: C64,
}

/// Connection for `(c₁, c₂)`: `∂_z c₁ = 0`, `∂_z̄ c₁ = (4/3)s c₂ − 4u_z̄ c₁`,
/// `∂_z c₂ = (4/3)s̄ c₁ − 4u_z c₂`, `∂_z̄ c₂ = 0`, with `u = t/3 + ln φ`.
pub fn killing_connection(sf: &StructureFunctions) -> LinearConnection {
    let j = sf.jet();
    let uz = &j.tz.scale(1, 3) + &j.lz;
    let uw = &j.tw.scale(1, 3) + &j.lw;
    let o = Expr::zero();
    let az = vec![vec![o.clone(), o.clone()], vec![j.sb.scale(4, 3), uz.scale(-4, 1)]];
    let aw = vec![vec![uw.scale(-4, 1), j.s.scale(4, 3)], vec![o.clone(), o]];
    LinearConnection::new(&az, &aw)
}

pub fn integrate_killing(sf: &StructureFunctions, seed: &KillingSeed, path: &ChartPath, opts: &IntegratorOptions) -> Result<Vec<Sample>> {
    path.check_domain(sf.chart())?;
    integrate_path(&killing_connection(sf), path, vec![seed.c1, seed.c2], opts)
}

/// Complex 2×2 endpoint matrix of the Killing seed map and its singular values.
pub fn killing_endpoint_map(sf: &StructureFunctions, path: &ChartPath, opts: &IntegratorOptions) -> Result<(DMatrix<C64>, Vec<f64>)> {
    let conn = killing_connection(sf);
    let mut m = DMatrix::zeros(2, 2);
    let one = C64::new(1.0, 0.0);
    let zero = C64::new(0.0, 0.0);
    for (k, y0) in [vec![one, zero], vec![zero, one]].into_iter().enumerate() {
        let end = integrate_path(&conn, path, y0, opts)?.pop().unwrap().state;
        m[(0, k)] = end[0];
        m[(1, k)] = end[1];
    }
    let sv = SVD::new(m.clone(), false, false).singular_values.iter().copied().collect();
    Ok((m, sv))
}

// ----- flat proper structure flow -----

/// Base values of a flat proper system (`t(base) = 0`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructureSeed {
    pub s: C64,
    pub xi: C64,
    pub tz: C64,
}

/// Closed flow of `(s, s̄, ξ, ξ̄, t, t_z, t_z̄)` on a flat chart with `τ ≡ 0`.
pub struct ProperFlatFlow;

impl ProperFlatFlow {
    /// `(∂_z, ∂_z̄)` of the state.
    pub fn derivatives(y: &[C64]) -> (Vec<C64>, Vec<C64>) {
        let (s, sb, xi, xib, tz, tw) = (y[0], y[1], y[2], y[3], y[5], y[6]);
        let c = |n: f64, d: f64| n / d;
        let mixed = c(4., 3.) * s * sb;
        let dz = vec![
            c(4., 3.) * tz * s,
            xib / 2.0 - c(2., 3.) * tz * sb,
            c(16., 3.) * s * s * sb + c(4., 3.) * tz * xi,
            c(8., 3.) * sb * xi,
            tz,
            c(4., 3.) * tz * tz + 2.0 * s * tw - xi / 2.0,
            mixed,
        ];
        let dw = vec![
            xi / 2.0 - c(2., 3.) * tw * s,
            c(4., 3.) * tw * sb,
            c(8., 3.) * s * xib,
            c(16., 3.) * sb * sb * s + c(4., 3.) * tw * xib,
            tw,
            mixed,
            c(4., 3.) * tw * tw + 2.0 * sb * tz - xib / 2.0,
        ];
        (dz, dw)
    }
}

impl PathSystem for ProperFlatFlow {
    fn rhs(&self, _p: ChartPoint, zdot: C64, y: &[C64]) -> Result<Vec<C64>> {
        let (dz, dw) = ProperFlatFlow::derivatives(y);
        let zb = zdot.conj();
        Ok(dz.iter().zip(&dw).map(|(a, b)| zdot * a + zb * b).collect())
    }
}

/// Values of `(Remn, D_z Remn, D_z̄ Remn)` for flat proper jet values.
pub fn flat_obstructions(s: C64, xi: C64, tz: C64) -> (C64, C64, C64) {
    let (sb, xib, tw) = (s.conj(), xi.conj(), tz.conj());
    let remn = 80.0 / 9.0 * s * sb * tz + 16.0 / 9.0 * s * tw * tw - 4.0 * s * xib + 4.0 / 3.0 * xi * tw;
    // partial derivatives in the jet order (s, s̄, ξ, ξ̄, t, t_z, t_z̄)
    let grad = [
        80.0 / 9.0 * sb * tz + 16.0 / 9.0 * tw * tw - 4.0 * xib,
        80.0 / 9.0 * s * tz,
        4.0 / 3.0 * tw,
        -4.0 * s,
        C64::new(0.0, 0.0),
        80.0 / 9.0 * s * sb,
        32.0 / 9.0 * s * tw + 4.0 / 3.0 * xi,
    ];
    let y = [s, sb, xi, xib, C64::new(0.0, 0.0), tz, tw];
    let (dz, dw) = ProperFlatFlow::derivatives(&y);
    let total = |d: &[C64]| -> C64 { grad.iter().zip(d).map(|(g, v)| g * v).sum() };
    (remn, total(&dz), total(&dw))
}

/// Integrate the flat proper structure flow; refuses seeds violating the algebraic
/// conditions (relative tolerance `seed_tol`).
pub fn integrate_structure_proper_flat(seed: &StructureSeed, path: &ChartPath, opts: &IntegratorOptions, seed_tol: f64) -> Result<Vec<Sample>> {
    let (e, dz, dw) = flat_obstructions(seed.s, seed.xi, seed.tz);
    let scale = 1.0 + [seed.s.norm(), seed.xi.norm(), seed.tz.norm()].into_iter().fold(0.0, f64::max).powi(3);
    let de = dz.norm().max(dw.norm());
    if e.norm() > seed_tol * scale || de > seed_tol * scale * scale {
        return Err(Error::SeedObstruction { remn: e.norm(), dremn: de });
    }
    let y0 = vec![seed.s, seed.s.conj(), seed.xi, seed.xi.conj(), C64::new(0.0, 0.0), seed.tz, seed.tz.conj()];
    integrate_path(&ProperFlatFlow, path, y0, opts)
}

/// Solve `Remn = 0` for `ξ` given `(s, t_z)` on a flat chart (it is linear in `ξ, ξ̄`).
pub fn xi_from_remn(s: C64, tz: C64) -> Option<C64> {
    let (sb, tw) = (s.conj(), tz.conj());
    let den = 3.0 * (9.0 * s * sb - tz * tw);
    if den.norm() < 1e-14 {
        return None;
    }
    Some(4.0 * s * (15.0 * s * sb * tw + 8.0 * sb * tz * tz + tw * tw * tz) / den)
}

/// Find an admissible flat proper seed with the given `s` and `arg t_z = θ`: `ξ` solves
/// `Remn = 0`, and `|t_z|` is a zero of `|D Remn|` located by a grid scan for local
/// minima followed by golden-section refinement.
pub fn find_admissible_seed(s: C64, theta: f64, r_max: f64) -> Option<StructureSeed> {
    let dir = C64::from_polar(1.0, theta);
    let seed_at = |r: f64| -> Option<StructureSeed> {
        let tz = dir * r;
        Some(StructureSeed { s, xi: xi_from_remn(s, tz)?, tz })
    };
    let g = |r: f64| -> f64 {
        match seed_at(r) {
            Some(sd) => {
                let (_, dz, dw) = flat_obstructions(sd.s, sd.xi, sd.tz);
                (dz.norm() + dw.norm()) / (1.0 + sd.xi.norm().powi(2))
            }
            None => f64::INFINITY,
        }
    };
    let n = 400;
    let rs: Vec<f64> = (1..=n).map(|k| r_max * k as f64 / n as f64).collect();
    let gs: Vec<f64> = rs.iter().map(|&r| g(r)).collect();
    for k in 1..n - 1 {
        if !(gs[k] <= gs[k - 1] && gs[k] <= gs[k + 1]) {
            continue;
        }
        let (mut a, mut b) = (rs[k - 1], rs[k + 1]);
        let phi = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..200 {
            let c = b - phi * (b - a);
            let d = a + phi * (b - a);
            if g(c) < g(d) {
                b = d;
            } else {
                a = c;
            }
        }
        let r = 0.5 * (a + b);
        if g(r) < 1e-12 {
            return seed_at(r);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::parse;

    fn osc() -> StructureFunctions {
        StructureFunctions::zero(ConformalChart::flat().with_domain([-2.0, 2.0, -2.0, 2.0], [11, 11]).unwrap())
    }

    #[test]
    fn oscillator_endpoint() {
        let (a0, a1, a2, a3) = (0.7, -0.3, 1.1, 0.25);
        let seed = PotentialSeed::new(a3, C64::new(a1, a2), 4.0 * a0);
        let path = ChartPath::straight(ChartPoint::new(0.0, 0.0), ChartPoint::new(1.0, 1.0));
        let t = integrate_potential(&osc(), TauMode::Conformal, &seed, &path, &IntegratorOptions::default()).unwrap();
        let want = 2.0 * a0 + 2.0 * a1 - 2.0 * a2 + a3;
        assert!((t.end().v - want).norm() < 1e-8);
        assert!(t.end().v.im.abs() < 1e-10 && t.end().lap.im.abs() < 1e-10);
    }

    #[test]
    fn constant_seed_is_preserved() {
        let seed = PotentialSeed::new(1.0, C64::new(0.0, 0.0), 0.0);
        let path = ChartPath::new(vec![ChartPoint::new(0.0, 0.0), ChartPoint::new(1.0, -0.5), ChartPoint::new(-0.3, 1.0)]).unwrap();
        let t = integrate_potential(&osc(), TauMode::Proper, &seed, &path, &IntegratorOptions::default()).unwrap();
        for (_, _, s) in &t.samples {
            assert!((s.v - 1.0).norm() < 1e-14);
        }
    }

    #[test]
    fn oscillator_paths_agree() {
        let seed = PotentialSeed::new(0.3, C64::new(0.2, -0.4), 1.5);
        let (d, _) = potential_path_independence(
            &osc(),
            TauMode::Conformal,
            &seed,
            ChartPoint::new(0.0, 0.0),
            ChartPoint::new(1.0, 1.0),
            5,
            &IntegratorOptions::default(),
        )
        .unwrap();
        assert!(d < 1e-8);
    }

    #[test]
    fn killing_oscillator() {
        let path = ChartPath::straight(ChartPoint::new(0.0, 0.0), ChartPoint::new(0.5, 1.0));
        let out = integrate_killing(&osc(), &KillingSeed { c1: C64::new(1.0, 0.0), c2: C64::new(0.0, 0.0) }, &path, &IntegratorOptions::default())
            .unwrap();
        let end = &out.last().unwrap().state;
        assert!((end[0] - 1.0).norm() < 1e-14 && end[1].norm() < 1e-14);
    }

    #[test]
    fn covariant_conversion_matches_hessian() {
        // On the sphere chart the potential state must track the closed form of a
        // solution of the proper system with s = t = 0 only if such a solution exists;
        // here we check the connection rows against the covariant Hessian directly.
        let sf = StructureFunctions::zero(ConformalChart::sphere());
        let conn = potential_connection(&sf, TauMode::Proper);
        let v = parse("z*zbar + z^2 - zbar").unwrap();
        let h = sf.chart().covariant_hessian(&v);
        let p = ChartPoint::new(0.3, 0.4);
        let (az, _) = conn.matrices(p).unwrap();
        let y: Vec<C64> = [v.clone(), v.diff(Var::Z), v.diff(Var::Zbar), v.diff(Var::Z).diff(Var::Zbar)]
            .iter()
            .map(|e| e.eval(p).unwrap())
            .collect();
        let vzz: C64 = (0..4).map(|k| az[4 + k] * y[k]).sum();
        let partial = v.diff(Var::Z).diff(Var::Z).eval(p).unwrap();
        let gz = sf.chart().christoffel().0.eval(p).unwrap();
        // with s = t = τ = 0 the row gives V_zz = Γ V_z, i.e. V_{,zz} = 0
        assert!((vzz - gz * y[1]).norm() < 1e-14);
        assert!((h.zz.eval(p).unwrap() - (partial - gz * y[1])).norm() < 1e-14);
    }

    #[test]
    fn admissible_seed() {
        let xi = xi_from_remn(C64::new(1.0, 0.0), C64::new(1.0, 0.0)).unwrap();
        assert!((xi - 4.0).norm() < 1e-14);
        let (e, dz, dw) = flat_obstructions(C64::new(1.0, 0.0), xi, C64::new(1.0, 0.0));
        assert!(e.norm() < 1e-13 && dz.norm() < 1e-12 && dw.norm() < 1e-12);
        let seed = StructureSeed { s: C64::new(1.0, 0.0), xi: C64::new(0.0, 0.0), tz: C64::new(0.0, 0.0) };
        let path = ChartPath::straight(ChartPoint::new(0.0, 0.0), ChartPoint::new(0.1, 0.0));
        assert!(matches!(
            integrate_structure_proper_flat(&seed, &path, &IntegratorOptions::default(), 1e-9),
            Err(Error::SeedObstruction { .. })
        ));
    }

    #[test]
    fn zero_structure_seed() {
        let z = C64::new(0.0, 0.0);
        let path = ChartPath::straight(ChartPoint::new(0.0, 0.0), ChartPoint::new(0.3, 0.2));
        let out = integrate_structure_proper_flat(&StructureSeed { s: z, xi: z, tz: z }, &path, &IntegratorOptions::default(), 1e-9).unwrap();
        assert!(out.last().unwrap().state.iter().all(|v| v.norm() == 0.0));
    }
}
