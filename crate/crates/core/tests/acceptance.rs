//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Criterion 6 is checked in its literal form (τ = −ξ/3) and in the form that actually
//! holds (τ = +ξ/3). The literal form is expected to fail on any system with ξ ≠ 0;
//! the run only counts as a failure if that changes or the corrected form fails.

use std::collections::HashMap;
use std::time::Instant;

use num_bigint::BigInt;
use num_complex::Complex64 as C64;
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use surfint::catalog::{catalog_entry, harmonic_oscillator, run_registry, Registry, RunOptions, OSCILLATOR_ALPHA};
use surfint::fields::{fd_probe, parse, ChartPoint, Expr, Gauss, Var};
use surfint::integrability::{conformal_residuals, tensor_identity_check, total_derivative, GridOptions, TauMode};
use surfint::reconstruct::{
    find_admissible_seed, integrate_structure_proper_flat, killing_endpoint_map, potential_endpoint_map, potential_path_independence,
    ChartPath, IntegratorOptions, PotentialSeed,
};
use surfint::flatspace::fit_biquadratic;
use surfint::sphere::{chart_point_of, embed, plucker_exact, plucker_relations, SpherePair, SymTensor3, CLEAR_MU_EXP, CLEAR_P_EXP};
use surfint::structure::StructureFunctions;
use surfint::surface::ConformalChart;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn origin() -> ChartPoint {
    ChartPoint::new(0.0, 0.0)
}

fn structure(name: &str) -> StructureFunctions {
    catalog_entry(name).unwrap().spec.structure.unwrap()
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let entry = harmonic_oscillator(OSCILLATOR_ALPHA);
    assert_eq!(entry.spec.chart.grid, [11, 11]);
    let opts = RunOptions { phase_samples: 100, ..Default::default() };
    let mut worst = 0.0f64;
    let mut failing = Vec::new();
    for reg in Registry::ALL {
        let rep = run_registry(&entry.spec, reg, &opts).unwrap();
        let (name, v) = rep.worst().unwrap();
        worst = worst.max(v);
        if !rep.passes(1e-9) {
            failing.push(format!("{}:{}", reg, name));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(failing.is_empty() && secs < 10.0, format!("max residual {:.2e} over 6 registries, {:.2} s, failing {:?}", worst, secs, failing))
}

fn random_upsilon(rng: &mut ChaCha8Rng) -> Expr {
    let mut q = || Expr::rat(rng.gen_range(-6..=6), rng.gen_range(5..=12));
    let (z, w) = (Expr::z(), Expr::zbar());
    Expr::add_all(vec![
        &q() * &(&z + &w),
        &(&q() * &Expr::i()) * &(&z - &w),
        &q() * &(&z * &w),
        &q() * &(&z.powi(2) + &w.powi(2)),
    ])
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let good = structure("flat-proper");
    let chart = ConformalChart::new(parse("1 + z*zbar/4").unwrap(), [-0.3, 0.3, -0.3, 0.3], [11, 11]).unwrap();
    let bad = StructureFunctions::new(chart, parse("z^2 + i*zbar").unwrap(), parse("z*zbar + z + zbar").unwrap(), origin()).unwrap();
    let opts = GridOptions::default();
    let (mut ds, mut dxi, mut du) = (0.0f64, 0.0f64, 0.0f64);
    let mut status_ok = true;
    for _ in 0..20 {
        let ups = random_upsilon(&mut rng);
        for (sf, verified) in [(&good, true), (&bad, false)] {
            let g = sf.gauge_transform(&ups).unwrap();
            let back = g.gauge_transform(&(&Expr::int(-1) * &ups)).unwrap();
            let (u0, u1) = (sf.invariant_u().unwrap(), g.invariant_u().unwrap());
            let c = u1.eval(sf.base()).unwrap() - u0.eval(sf.base()).unwrap();
            let (x0, x1) = (sf.xi(), g.xi());
            for p in sf.chart().grid_points() {
                ds = ds.max((sf.s().eval(p).unwrap() - g.s().eval(p).unwrap()).norm());
                dxi = dxi.max((x0.eval(p).unwrap() - x1.eval(p).unwrap()).norm());
                du = du.max((u1.eval(p).unwrap() - u0.eval(p).unwrap() - c).norm());
            }
            for h in [&g, &back] {
                status_ok &= conformal_residuals(h, &opts).unwrap().passes(1e-8) == verified;
            }
        }
    }
    outcome(
        ds < 1e-10 && dxi < 1e-10 && du < 1e-11 && status_ok,
        format!("20 rescalings: |Δs| {:.1e}, |Δξ| {:.1e}, |Δu − c| {:.1e}, status preserved {}", ds, dxi, du, status_ok),
    )
}

fn criterion_3() -> Outcome {
    let opts = IntegratorOptions::default();
    let seed = PotentialSeed::new(0.3, C64::new(0.2, -0.4), 1.5);
    let cases = [
        ("harmonic-oscillator", TauMode::Conformal, ChartPoint::new(1.0, 1.0)),
        ("rescaled-oscillator", TauMode::Conformal, ChartPoint::new(0.8, -0.6)),
        ("flat-proper", TauMode::Proper, ChartPoint::new(0.25, 0.2)),
    ];
    let mut worst_good = 0.0f64;
    for (name, mode, target) in cases {
        let sf = structure(name);
        let (d, _) = potential_path_independence(&sf, mode, &seed, origin(), target, 4, &opts).unwrap();
        worst_good = worst_good.max(d);
    }
    // Delta-t broken: s = z̄ on the flat oscillator chart.
    let broken = StructureFunctions::new(ConformalChart::flat(), Expr::zbar(), Expr::zero(), origin()).unwrap();
    let broken_rep = conformal_residuals(&broken, &GridOptions::default()).unwrap();
    let (d_bad, _) = potential_path_independence(&broken, TauMode::Conformal, &seed, origin(), ChartPoint::new(1.0, 1.0), 4, &opts).unwrap();
    outcome(
        worst_good < 1e-8 && d_bad > 1e-3,
        format!("verified max discrepancy {:.2e}; broken ({:?}) discrepancy {:.2e}", worst_good, broken_rep.failing(1e-9), d_bad),
    )
}

fn numerical_rank(sv: &[f64]) -> usize {
    let top = sv.iter().cloned().fold(0.0, f64::max);
    sv.iter().filter(|&&v| v > 1e-8 * top).count()
}

fn criterion_4() -> Outcome {
    let opts = IntegratorOptions::default();
    let mut ranks = Vec::new();
    for (name, mode, target) in [
        ("harmonic-oscillator", TauMode::Conformal, ChartPoint::new(0.7, 0.4)),
        ("rescaled-oscillator", TauMode::Conformal, ChartPoint::new(0.7, 0.4)),
        ("flat-proper", TauMode::Proper, ChartPoint::new(0.2, -0.25)),
    ] {
        let sf = structure(name);
        let path = ChartPath::straight(origin(), target);
        let (_, sv) = potential_endpoint_map(&sf, mode, &path, &opts).unwrap();
        let (_, ksv) = killing_endpoint_map(&sf, &path, &opts).unwrap();
        ranks.push((name, numerical_rank(&sv), numerical_rank(&ksv)));
    }
    let pass = ranks.iter().all(|&(_, p, k)| p == 4 && k == 2);
    outcome(pass, format!("(potential, Killing) ranks {:?}", ranks))
}

/// `∂^α D / D` as a jet polynomial, where `D = e^{−4t/3}`.
fn d_ratio(chart: &ConformalChart, vars: &[Var]) -> Expr {
    let mut p = Expr::one();
    for &v in vars {
        let tv = match v {
            Var::Z => Expr::param("tz"),
            Var::Zbar => Expr::param("tw"),
        };
        p = &total_derivative(&p, chart, v) + &(&p * &tv.scale(-4, 3));
    }
    p
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let seed = find_admissible_seed(C64::new(1.0, 0.0), 1.0, 3.0).expect("admissible seed");
    let chart = ConformalChart::flat();
    let checks: Vec<(&str, Expr)> = vec![
        ("D_zzz", d_ratio(&chart, &[Var::Z, Var::Z, Var::Z])),
        ("D_www", d_ratio(&chart, &[Var::Zbar, Var::Zbar, Var::Zbar])),
        ("D_zzww", d_ratio(&chart, &[Var::Z, Var::Z, Var::Zbar, Var::Zbar])),
    ];
    let grid = ConformalChart::flat().with_domain([-0.3, 0.3, -0.3, 0.3], [7, 7]).unwrap();
    let opts = IntegratorOptions::default();
    let mut worst = [0.0f64; 3];
    let mut samples = Vec::new();
    for p in grid.grid_points() {
        let out = integrate_structure_proper_flat(&seed, &ChartPath::straight(origin(), p), &opts, 1e-9).unwrap();
        let y = &out.last().unwrap().state;
        let d = (-4.0 / 3.0 * y[4]).exp();
        let sub: HashMap<String, Expr> = [("s", y[0]), ("sb", y[1]), ("xi", y[2]), ("xib", y[3]), ("tz", y[5]), ("tw", y[6])]
            .into_iter()
            .map(|(k, v)| (k.to_string(), Expr::from_c64(v)))
            .collect();
        for (k, (_, e)) in checks.iter().enumerate() {
            worst[k] = worst[k].max((e.subst(&sub).eval(p).unwrap() * d).norm());
        }
        samples.push((p, d));
    }
    let fit = fit_biquadratic(&samples).unwrap();
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst.iter().all(|&v| v < 1e-8) && fit.max_residual < 1e-7 && secs < 30.0,
        format!(
            "{} {:.1e}, {} {:.1e}, {} {:.1e}, bi-quadratic fit {:.1e}, {:.2} s",
            checks[0].0, worst[0], checks[1].0, worst[1], checks[2].0, worst[2], fit.max_residual, secs
        ),
    )
}

fn criterion_6() -> (Outcome, Outcome) {
    let mut literal = 0.0f64;
    let mut corrected = 0.0f64;
    let mut curvature = 0.0f64;
    for name in ["harmonic-oscillator", "flat-proper"] {
        let std = structure(name).to_standard_gauge().unwrap();
        assert!(std.is_standard_gauge());
        let (tau, xi) = (std.tau(), std.xi());
        for p in std.chart().grid_points() {
            let (t, x) = (tau.eval(p).unwrap(), xi.eval(p).unwrap());
            literal = literal.max((t + x / 3.0).norm());
        }
        let rep = conformal_residuals(&std, &GridOptions::default()).unwrap();
        corrected = corrected.max(rep.max("std:tau"));
        curvature = curvature.max(rep.max("std:Delta-t"));
    }
    (
        outcome(literal < 1e-9, format!("literal τ = −ξ/3: max |τ + ξ/3| {:.2e}", literal)),
        outcome(corrected < 1e-9 && curvature < 1e-9, format!("τ = +ξ/3: {:.2e}; R = −(2/9)|S|²: {:.2e}", corrected, curvature)),
    )
}

fn random_pair(rng: &mut ChaCha8Rng) -> (SymTensor3, SymTensor3) {
    let mut t = || {
        let v: [i64; 5] = std::array::from_fn(|_| rng.gen_range(-4..=4));
        SymTensor3::from_ints([v[0], v[1], v[2], v[3], v[4], -v[0] - v[3]])
    };
    (t(), t())
}

fn random_rotation(rng: &mut ChaCha8Rng) -> [[f64; 3]; 3] {
    let q: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
    let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
    let [w, x, y, z] = q.map(|v| v / n);
    [
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
        [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
        [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
    ]
}

fn small_rational(rng: &mut ChaCha8Rng) -> BigRational {
    BigRational::new(BigInt::from(rng.gen_range(-9..=9)), BigInt::from(rng.gen_range(10..=20)))
}

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (a, b) = random_pair(&mut rng);
    let sp = SpherePair::new(&a, &b).unwrap();

    let mut relations_exact = true;
    for _ in 0..10 {
        let z = Gauss::new(small_rational(&mut rng), small_rational(&mut rng));
        let pp = plucker_exact(&a, &b, &z).unwrap();
        relations_exact &= plucker_relations(&pp).iter().all(|r| r.is_zero());
    }

    let mut equivariance = 0.0f64;
    for _ in 0..10 {
        let q = random_rotation(&mut rng);
        let rp = SpherePair::new(&a.rotated(&q).unwrap(), &b.rotated(&q).unwrap()).unwrap();
        for _ in 0..3 {
            let p = ChartPoint::new(rng.gen_range(-0.7..0.7), rng.gen_range(-0.7..0.7));
            let x = embed(p);
            let qx: [f64; 3] = std::array::from_fn(|i| (0..3).map(|j| q[i][j] * x[j]).sum());
            let (r0, r1) = (sp.residual_at(p).unwrap(), rp.residual_at(chart_point_of(qx).unwrap()).unwrap());
            equivariance = equivariance.max((r0 - r1).abs() / (1.0 + r0));
        }
    }

    let mut dual = 0.0f64;
    for _ in 0..25 {
        let z = Gauss::new(small_rational(&mut rng), small_rational(&mut rng));
        let exact = sp.cleared_at(&z).unwrap().to_c64();
        let c = z.to_c64();
        let p = ChartPoint::from_z(c);
        let den = sp.plucker.get(1, -1).eval(p).unwrap().powi(CLEAR_P_EXP) * (1.0 + c.norm_sqr()).powi(CLEAR_MU_EXP);
        let float = sp.remn_at(p).unwrap() * den;
        dual = dual.max((exact - float).norm() / exact.norm());
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        relations_exact && equivariance < 1e-9 && dual < 1e-10 && secs < 60.0,
        format!("Plücker relations exact {}, equivariance {:.1e}, float vs exact {:.1e} (relative), {:.2} s", relations_exact, equivariance, dual, secs),
    )
}

fn criterion_8() -> Outcome {
    let opts = RunOptions { phase_samples: 100, ..Default::default() };
    let mut worst = HashMap::new();
    for name in ["harmonic-oscillator", "rescaled-oscillator"] {
        let rep = run_registry(&catalog_entry(name).unwrap().spec, Registry::Bracket, &opts).unwrap();
        for (k, e) in &rep.entries {
            let part = k.split('[').next().unwrap().to_string();
            let w: &mut f64 = worst.entry(part).or_insert(0.0);
            *w = w.max(e.max_abs);
        }
    }
    let parts = ["defect", "cubic", "linear"];
    let pass = parts.iter().all(|p| worst.get(*p).is_some_and(|&v| v < 1e-9));
    outcome(pass, format!("{}", parts.map(|p| format!("{} {:.1e}", p, worst.get(p).copied().unwrap_or(f64::NAN))).join(", ")))
}

fn random_field(rng: &mut ChaCha8Rng, depth: u32) -> Expr {
    if depth == 0 || rng.gen_bool(0.25) {
        return match rng.gen_range(0..3) {
            0 => Expr::z(),
            1 => Expr::zbar(),
            _ => Expr::from_c64(C64::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0))),
        };
    }
    let a = random_field(rng, depth - 1);
    match rng.gen_range(0..6) {
        0 => &a + &random_field(rng, depth - 1),
        1 => &a * &random_field(rng, depth - 1),
        2 => a.powi(rng.gen_range(2..=3)),
        3 => a.scale(1, 2).exp(),
        4 => (&Expr::int(3) + &(&Expr::z() * &Expr::zbar())).recip() * a,
        _ => (&Expr::int(2) + &(&a * &a.conj())).log(),
    }
}

fn criterion_9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut fd_worst = 0.0f64;
    // Depth 3: nested powers at depth 4 reach fields like 4e5·z̄^18, whose h = 1e-4
    // central difference is itself off by 1e-4.
    for _ in 0..200 {
        let f = random_field(&mut rng, 3);
        let p = ChartPoint::new(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5));
        for v in [Var::Z, Var::Zbar] {
            let sym = f.diff(v).eval(p).unwrap();
            let fd = fd_probe(&f, p, v, 1e-4).unwrap();
            fd_worst = fd_worst.max((sym - fd).norm() / (1.0 + sym.norm()));
        }
    }
    let ids = tensor_identity_check(&mut rng, 100).unwrap();
    let (name, id_worst) = ids.worst().unwrap();
    outcome(
        fd_worst < 1e-6 && id_worst < 1e-12,
        format!("fd vs symbolic {:.1e} over 200 fields, tensor identities {:.1e} ({}) over 100 draws", fd_worst, id_worst, name),
    )
}

fn main() {
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let line = |n: &str, o: &Outcome| println!("criterion {} {} {}", n, if o.pass { "PASS" } else { "FAIL" }, o.detail);
    let mut ok = true;
    let runs: [(&str, fn() -> Outcome); 5] = [("1", criterion_1), ("2", criterion_2), ("3", criterion_3), ("4", criterion_4), ("5", criterion_5)];
    for (n, f) in runs {
        let o = f();
        line(n, &o);
        ok &= o.pass;
    }
    let (literal, corrected) = criterion_6();
    line("6", &literal);
    line("6 (sign-corrected)", &corrected);
    // The literal identity cannot hold when ξ ≠ 0; a pass here would mean τ changed sign.
    ok &= !literal.pass && corrected.pass;
    let runs: [(&str, fn() -> Outcome); 3] = [("7", criterion_7), ("8", criterion_8), ("9", criterion_9)];
    for (n, f) in runs {
        let o = f();
        line(n, &o);
        ok &= o.pass;
    }
    if !ok {
        eprintln!("acceptance: unexpected result");
        std::process::exit(1);
    }
}
