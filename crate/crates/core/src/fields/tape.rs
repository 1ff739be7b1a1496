//! Flattened evaluation programs for one or more fields sharing subexpressions.

use std::collections::HashMap;
use std::sync::Arc;

use num_complex::Complex64;

use super::{ChartPoint, Expr, Gauss, Node};
use crate::error::{DomainError, DomainKind};

/// Numeric carrier for tape evaluation.
pub trait Scalar: Clone {
    fn from_const(exact: &Gauss, approx: Complex64) -> Self;
    fn zero() -> Self;
    fn one() -> Self;
    fn add(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn powi(&self, n: i32) -> Result<Self, DomainKind>;
    fn exp(&self) -> Result<Self, DomainKind>;
    fn log(&self) -> Result<Self, DomainKind>;
    fn check(&self) -> Result<(), DomainKind>;
}

impl Scalar for Complex64 {
    fn from_const(_: &Gauss, approx: Complex64) -> Self {
        approx
    }
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn one() -> Self {
        Complex64::new(1.0, 0.0)
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn powi(&self, n: i32) -> Result<Self, DomainKind> {
        if n < 0 && self.re == 0.0 && self.im == 0.0 {
            return Err(DomainKind::Pole);
        }
        Ok(Complex64::powi(self, n))
    }
    fn exp(&self) -> Result<Self, DomainKind> {
        Ok(Complex64::exp(*self))
    }
    fn log(&self) -> Result<Self, DomainKind> {
        if self.re == 0.0 && self.im == 0.0 {
            return Err(DomainKind::LogZero);
        }
        Ok(Complex64::ln(*self))
    }
    fn check(&self) -> Result<(), DomainKind> {
        if self.re.is_finite() && self.im.is_finite() {
            Ok(())
        } else {
            Err(DomainKind::NonFinite)
        }
    }
}

impl Scalar for Gauss {
    fn from_const(exact: &Gauss, _: Complex64) -> Self {
        exact.clone()
    }
    fn zero() -> Self {
        Gauss::zero()
    }
    fn one() -> Self {
        Gauss::one()
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn powi(&self, n: i32) -> Result<Self, DomainKind> {
        Gauss::powi(self, n).ok_or(DomainKind::Pole)
    }
    fn exp(&self) -> Result<Self, DomainKind> {
        if self.is_zero() {
            return Ok(Gauss::one());
        }
        Err(DomainKind::Transcendental)
    }
    fn log(&self) -> Result<Self, DomainKind> {
        if self.is_one() {
            return Ok(Gauss::zero());
        }
        if self.is_zero() {
            return Err(DomainKind::LogZero);
        }
        Err(DomainKind::Transcendental)
    }
    fn check(&self) -> Result<(), DomainKind> {
        Ok(())
    }
}

#[derive(Clone, Debug)]
enum Op {
    Const(usize),
    Z,
    Zbar,
    Param(usize),
    Add(Vec<usize>),
    Mul(Vec<usize>),
    Pow(usize, i32),
    Exp(usize),
    Log(usize),
}

/// A compiled multi-output evaluation program.
#[derive(Clone, Debug)]
pub struct Tape {
    ops: Vec<Op>,
    nodes: Vec<Expr>,
    consts: Vec<(Gauss, Complex64)>,
    params: Vec<Arc<str>>,
    outputs: Vec<usize>,
}

impl Tape {
    pub fn compile(exprs: &[Expr]) -> Tape {
        let mut t = Tape { ops: Vec::new(), nodes: Vec::new(), consts: Vec::new(), params: Vec::new(), outputs: Vec::new() };
        let mut memo: HashMap<usize, usize> = HashMap::new();
        for e in exprs {
            let k = t.emit(e, &mut memo);
            t.outputs.push(k);
        }
        t
    }

    fn emit(&mut self, e: &Expr, memo: &mut HashMap<usize, usize>) -> usize {
        if let Some(&k) = memo.get(&e.ptr()) {
            return k;
        }
        let op = match e.node() {
            Node::Const(c) => {
                self.consts.push((c.clone(), c.to_c64()));
                Op::Const(self.consts.len() - 1)
            }
            Node::Z => Op::Z,
            Node::Zbar => Op::Zbar,
            Node::Param(p) => {
                let k = match self.params.iter().position(|q| q == p) {
                    Some(k) => k,
                    None => {
                        self.params.push(p.clone());
                        self.params.len() - 1
                    }
                };
                Op::Param(k)
            }
            Node::Add(v) => Op::Add(v.iter().map(|a| self.emit(a, memo)).collect()),
            Node::Mul(v) => Op::Mul(v.iter().map(|a| self.emit(a, memo)).collect()),
            Node::Pow(b, n) => Op::Pow(self.emit(b, memo), *n),
            Node::Exp(a) => Op::Exp(self.emit(a, memo)),
            Node::Log(a) => Op::Log(self.emit(a, memo)),
        };
        self.ops.push(op);
        self.nodes.push(e.clone());
        let k = self.ops.len() - 1;
        memo.insert(e.ptr(), k);
        k
    }

    pub fn n_outputs(&self) -> usize {
        self.outputs.len()
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    /// Parameter names in binding order for [`Tape::eval_with`].
    pub fn param_names(&self) -> Vec<String> {
        self.params.iter().map(|p| p.to_string()).collect()
    }

    pub fn eval(&self, p: ChartPoint) -> Result<Vec<Complex64>, DomainError> {
        self.eval_with(p, &[])
    }

    pub fn eval_with(&self, p: ChartPoint, params: &[f64]) -> Result<Vec<Complex64>, DomainError> {
        let bound: Vec<Complex64> = params.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.run(p.z(), p.zbar(), &bound, (p.x, p.y))
    }

    /// Exact evaluation at `z` (with `zbar = conj z`).
    pub fn eval_exact(&self, z: &Gauss) -> Result<Vec<Gauss>, DomainError> {
        let c = z.to_c64();
        self.run(z.clone(), z.conj(), &[], (c.re, c.im))
    }

    /// Exact evaluation with `z` and `w` independent (used on complexified lines).
    pub fn eval_exact_zw(&self, z: &Gauss, w: &Gauss) -> Result<Vec<Gauss>, DomainError> {
        let c = z.to_c64();
        self.run(z.clone(), w.clone(), &[], (c.re, c.im))
    }

    fn run<S: Scalar>(&self, z: S, zbar: S, params: &[S], at: (f64, f64)) -> Result<Vec<S>, DomainError> {
        let mut vals: Vec<S> = Vec::with_capacity(self.ops.len());
        for (k, op) in self.ops.iter().enumerate() {
            let fail = |kind| DomainError::new(kind, &self.nodes[k], at.0, at.1);
            let v = match op {
                Op::Const(c) => S::from_const(&self.consts[*c].0, self.consts[*c].1),
                Op::Z => z.clone(),
                Op::Zbar => zbar.clone(),
                Op::Param(j) => match params.get(*j) {
                    Some(v) => v.clone(),
                    None => return Err(fail(DomainKind::UnboundParam)),
                },
                Op::Add(a) => {
                    let mut acc = vals[a[0]].clone();
                    for j in &a[1..] {
                        acc = acc.add(&vals[*j]);
                    }
                    acc
                }
                Op::Mul(a) => {
                    let mut acc = vals[a[0]].clone();
                    for j in &a[1..] {
                        acc = acc.mul(&vals[*j]);
                    }
                    acc
                }
                Op::Pow(b, n) => vals[*b].powi(*n).map_err(fail)?,
                Op::Exp(a) => vals[*a].exp().map_err(fail)?,
                Op::Log(a) => vals[*a].log().map_err(fail)?,
            };
            v.check().map_err(fail)?;
            vals.push(v);
        }
        Ok(self.outputs.iter().map(|&k| vals[k].clone()).collect())
    }
}
