//! Scalar fields on a 2D chart as normalized expression trees.
//!
//! A field is a DAG over the atoms `z`, `zbar`, exact complex-rational constants and
//! named real parameters, closed under Wirtinger differentiation. Construction goes
//! through smart constructors that flatten and sort sums and products, fold constants
//! and merge like terms, so structurally equal fields compare equal.
//!
//! `conj` is not a stored node kind: it is pushed to the leaves on construction
//! (`conj z = zbar`, constants are conjugated, parameters are real). Principal-branch
//! `log` commutes with conjugation away from its cut, which is the convention here.

mod exact;
mod parse;
mod tape;

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::Arc;

use num_complex::Complex64;
use num_traits::{Signed, Zero};

pub use exact::Gauss;
pub use parse::{parse, ParseError};
pub use tape::{Scalar, Tape};

use crate::error::DomainError;

/// A point of the real chart; `z = x + i y`, `zbar = x − i y`.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ChartPoint {
    pub x: f64,
    pub y: f64,
}

impl ChartPoint {
    pub fn new(x: f64, y: f64) -> Self {
        ChartPoint { x, y }
    }

    pub fn from_z(z: Complex64) -> Self {
        ChartPoint { x: z.re, y: z.im }
    }

    pub fn z(&self) -> Complex64 {
        Complex64::new(self.x, self.y)
    }

    pub fn zbar(&self) -> Complex64 {
        Complex64::new(self.x, -self.y)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// Wirtinger variable.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Var {
    Z,
    Zbar,
}

impl Var {
    pub fn conj(self) -> Var {
        match self {
            Var::Z => Var::Zbar,
            Var::Zbar => Var::Z,
        }
    }
}

#[derive(Clone, Debug)]
pub enum Node {
    Const(Gauss),
    Z,
    Zbar,
    Param(Arc<str>),
    Add(Vec<Expr>),
    Mul(Vec<Expr>),
    Pow(Expr, i32),
    Exp(Expr),
    Log(Expr),
}

#[derive(Debug)]
struct Inner {
    node: Node,
    hash: u64,
}

/// An immutable, shareable scalar field.
#[derive(Clone)]
pub struct Expr(Arc<Inner>);

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn mix(h: u64, v: u64) -> u64 {
    let mut h = h;
    for b in v.to_le_bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

fn mix_str(h: u64, s: &str) -> u64 {
    let mut h = h;
    for b in s.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    mix(h, s.len() as u64)
}

fn node_hash(node: &Node) -> u64 {
    let h = mix(FNV_OFFSET, rank(node) as u64);
    match node {
        Node::Const(c) => mix_str(h, &c.to_string()),
        Node::Z | Node::Zbar => h,
        Node::Param(p) => mix_str(h, p),
        Node::Add(v) | Node::Mul(v) => v.iter().fold(mix(h, v.len() as u64), |a, e| mix(a, e.hash())),
        Node::Pow(b, n) => mix(mix(h, b.hash()), *n as i64 as u64),
        Node::Exp(a) | Node::Log(a) => mix(h, a.hash()),
    }
}

fn rank(node: &Node) -> u8 {
    match node {
        Node::Const(_) => 0,
        Node::Z => 1,
        Node::Zbar => 2,
        Node::Param(_) => 3,
        Node::Pow(..) => 4,
        Node::Exp(_) => 5,
        Node::Log(_) => 6,
        Node::Add(_) => 7,
        Node::Mul(_) => 8,
    }
}

impl PartialEq for Expr {
    fn eq(&self, other: &Expr) -> bool {
        if Arc::ptr_eq(&self.0, &other.0) {
            return true;
        }
        if self.hash() != other.hash() {
            return false;
        }
        match (self.node(), other.node()) {
            (Node::Const(a), Node::Const(b)) => a == b,
            (Node::Z, Node::Z) | (Node::Zbar, Node::Zbar) => true,
            (Node::Param(a), Node::Param(b)) => a == b,
            (Node::Add(a), Node::Add(b)) | (Node::Mul(a), Node::Mul(b)) => a == b,
            (Node::Pow(a, m), Node::Pow(b, n)) => m == n && a == b,
            (Node::Exp(a), Node::Exp(b)) | (Node::Log(a), Node::Log(b)) => a == b,
            _ => false,
        }
    }
}

impl Eq for Expr {}

impl std::hash::Hash for Expr {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        state.write_u64(self.hash());
    }
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({})", self)
    }
}

fn sort_key(e: &Expr) -> (u8, u64) {
    (rank(e.node()), e.hash())
}

impl Expr {
    fn raw(node: Node) -> Expr {
        let hash = node_hash(&node);
        Expr(Arc::new(Inner { node, hash }))
    }

    pub fn node(&self) -> &Node {
        &self.0.node
    }

    pub fn hash(&self) -> u64 {
        self.0.hash
    }

    fn ptr(&self) -> usize {
        Arc::as_ptr(&self.0) as usize
    }

    // ----- atoms -----

    pub fn z() -> Expr {
        Expr::raw(Node::Z)
    }

    pub fn zbar() -> Expr {
        Expr::raw(Node::Zbar)
    }

    pub fn param(name: &str) -> Expr {
        Expr::raw(Node::Param(Arc::from(name)))
    }

    pub fn constant(c: Gauss) -> Expr {
        Expr::raw(Node::Const(c))
    }

    pub fn int(n: i64) -> Expr {
        Expr::constant(Gauss::int(n))
    }

    pub fn rat(n: i64, d: i64) -> Expr {
        Expr::constant(Gauss::ratio(n, d))
    }

    pub fn i() -> Expr {
        Expr::constant(Gauss::i())
    }

    pub fn zero() -> Expr {
        Expr::int(0)
    }

    pub fn one() -> Expr {
        Expr::int(1)
    }

    /// Exact constant equal to the given double.
    pub fn from_f64(x: f64) -> Expr {
        Expr::constant(Gauss::from_f64(x).expect("finite constant"))
    }

    /// Exact constant equal to the given complex double.
    pub fn from_c64(c: Complex64) -> Expr {
        let re = Gauss::from_f64(c.re).expect("finite constant");
        let im = Gauss::from_f64(c.im).expect("finite constant");
        Expr::constant(Gauss::new(re.re, im.re))
    }

    pub fn as_const(&self) -> Option<&Gauss> {
        match self.node() {
            Node::Const(c) => Some(c),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_const().is_some_and(Gauss::is_zero)
    }

    pub fn is_one(&self) -> bool {
        self.as_const().is_some_and(Gauss::is_one)
    }

    // ----- smart constructors -----

    pub fn add_all(mut terms: Vec<Expr>) -> Expr {
        if terms.len() == 1 {
            return terms.pop().unwrap();
        }
        let mut flat = Vec::with_capacity(terms.len());
        for t in terms {
            match t.node() {
                Node::Add(v) => flat.extend(v.iter().cloned()),
                Node::Mul(v) if v.len() == 2 && v[0].as_const().is_some() && matches!(v[1].node(), Node::Add(_)) => {
                    // c·(a + b) inside a sum is distributed so that terms can cancel
                    let Node::Add(inner) = v[1].node() else { unreachable!() };
                    flat.extend(inner.iter().map(|u| Expr::mul_all(vec![v[0].clone(), u.clone()])));
                }
                _ => flat.push(t),
            }
        }
        let mut constant = Gauss::zero();
        let mut order: Vec<(Expr, Gauss)> = Vec::new();
        let mut index: HashMap<u64, Vec<usize>> = HashMap::new();
        for t in flat {
            if let Some(c) = t.as_const() {
                constant = &constant + c;
                continue;
            }
            let (coef, rest) = t.split_coefficient();
            let slot = index.entry(rest.hash()).or_default();
            match slot.iter().find(|&&k| order[k].0 == rest) {
                Some(&k) => order[k].1 = &order[k].1 + &coef,
                None => {
                    slot.push(order.len());
                    order.push((rest, coef));
                }
            }
        }
        let mut out: Vec<Expr> = order
            .into_iter()
            .filter(|(_, c)| !c.is_zero())
            .map(|(rest, c)| Expr::mul_all(vec![Expr::constant(c), rest]))
            .collect();
        if !constant.is_zero() {
            out.push(Expr::constant(constant));
        }
        match out.len() {
            0 => Expr::zero(),
            1 => out.pop().unwrap(),
            _ => {
                out.sort_by_key(sort_key);
                Expr::raw(Node::Add(out))
            }
        }
    }

    /// Split `c·rest` into the constant coefficient and the remainder.
    fn split_coefficient(&self) -> (Gauss, Expr) {
        if let Node::Mul(fs) = self.node() {
            if let Some(c) = fs[0].as_const() {
                let rest: Vec<Expr> = fs[1..].to_vec();
                let rest = if rest.len() == 1 { rest.into_iter().next().unwrap() } else { Expr::raw(Node::Mul(rest)) };
                return (c.clone(), rest);
            }
        }
        (Gauss::one(), self.clone())
    }

    pub fn mul_all(factors: Vec<Expr>) -> Expr {
        let mut flat = Vec::with_capacity(factors.len());
        let mut exps = Vec::new();
        for f in factors {
            match f.node() {
                Node::Mul(v) => {
                    for g in v {
                        match g.node() {
                            Node::Exp(a) => exps.push(a.clone()),
                            _ => flat.push(g.clone()),
                        }
                    }
                }
                Node::Exp(a) => exps.push(a.clone()),
                _ => flat.push(f),
            }
        }
        // exp(a)·exp(b) = exp(a + b)
        match exps.len() {
            0 => {}
            1 => flat.push(Expr::raw(Node::Exp(exps.pop().unwrap()))),
            _ => {
                let e = Expr::add_all(exps).exp();
                match e.node() {
                    Node::Mul(v) => flat.extend(v.iter().cloned()),
                    _ => flat.push(e),
                }
            }
        }
        let mut constant = Gauss::one();
        let mut bases: Vec<(Expr, i32)> = Vec::new();
        let mut index: HashMap<u64, Vec<usize>> = HashMap::new();
        for f in flat {
            if let Some(c) = f.as_const() {
                constant = &constant * c;
                continue;
            }
            let (base, n) = match f.node() {
                Node::Pow(b, n) => (b.clone(), *n),
                _ => (f.clone(), 1),
            };
            let slot = index.entry(base.hash()).or_default();
            match slot.iter().find(|&&k| bases[k].0 == base) {
                Some(&k) => bases[k].1 += n,
                None => {
                    slot.push(bases.len());
                    bases.push((base, n));
                }
            }
        }
        if constant.is_zero() {
            return Expr::zero();
        }
        let mut out: Vec<Expr> = Vec::with_capacity(bases.len() + 1);
        for (b, n) in bases {
            if n == 0 {
                continue;
            }
            let p = Expr::pow_raw(b, n);
            match p.as_const() {
                Some(c) => constant = &constant * c,
                None => out.push(p),
            }
        }
        if out.is_empty() {
            return Expr::constant(constant);
        }
        if out.len() == 1 && constant.is_one() {
            return out.pop().unwrap();
        }
        if !constant.is_one() {
            out.push(Expr::constant(constant));
        }
        out.sort_by_key(sort_key);
        Expr::raw(Node::Mul(out))
    }

    fn pow_raw(base: Expr, n: i32) -> Expr {
        if n == 1 {
            return base;
        }
        if let Some(c) = base.as_const() {
            if let Some(v) = c.powi(n) {
                return Expr::constant(v);
            }
        }
        Expr::raw(Node::Pow(base, n))
    }

    pub fn powi(&self, n: i32) -> Expr {
        if n == 0 {
            return Expr::one();
        }
        if n == 1 {
            return self.clone();
        }
        match self.node() {
            Node::Const(c) => match c.powi(n) {
                Some(v) => Expr::constant(v),
                None => Expr::raw(Node::Pow(self.clone(), n)),
            },
            Node::Pow(b, m) => b.powi(m * n),
            Node::Mul(fs) => Expr::mul_all(fs.iter().map(|f| f.powi(n)).collect()),
            Node::Exp(a) => (a * &Expr::int(n as i64)).exp(),
            _ => Expr::raw(Node::Pow(self.clone(), n)),
        }
    }

    pub fn exp(&self) -> Expr {
        match self.node() {
            Node::Const(c) if c.is_zero() => Expr::one(),
            Node::Log(a) => a.clone(),
            Node::Mul(fs) if fs.len() == 2 => {
                // exp(n·log a) = a^n for integer n
                if let (Some(c), Node::Log(a)) = (fs[0].as_const(), fs[1].node()) {
                    if c.is_real() && c.re.is_integer() {
                        if let Ok(n) = i32::try_from(c.re.to_integer()) {
                            return a.powi(n);
                        }
                    }
                }
                Expr::raw(Node::Exp(self.clone()))
            }
            _ => Expr::raw(Node::Exp(self.clone())),
        }
    }

    pub fn log(&self) -> Expr {
        if self.is_one() {
            return Expr::zero();
        }
        Expr::raw(Node::Log(self.clone()))
    }

    pub fn recip(&self) -> Expr {
        self.powi(-1)
    }

    pub fn scale(&self, num: i64, den: i64) -> Expr {
        self * &Expr::rat(num, den)
    }

    // ----- structural operations -----

    /// Complex conjugate, pushed to the leaves.
    pub fn conj(&self) -> Expr {
        let mut memo = HashMap::new();
        self.conj_memo(&mut memo)
    }

    fn conj_memo(&self, memo: &mut HashMap<usize, Expr>) -> Expr {
        if let Some(e) = memo.get(&self.ptr()) {
            return e.clone();
        }
        let out = match self.node() {
            Node::Const(c) => Expr::constant(c.conj()),
            Node::Z => Expr::zbar(),
            Node::Zbar => Expr::z(),
            Node::Param(_) => self.clone(),
            Node::Add(v) => Expr::add_all(v.iter().map(|e| e.conj_memo(memo)).collect()),
            Node::Mul(v) => Expr::mul_all(v.iter().map(|e| e.conj_memo(memo)).collect()),
            Node::Pow(b, n) => b.conj_memo(memo).powi(*n),
            Node::Exp(a) => a.conj_memo(memo).exp(),
            Node::Log(a) => a.conj_memo(memo).log(),
        };
        memo.insert(self.ptr(), out.clone());
        out
    }

    /// True if the field equals its conjugate as a normalized tree.
    pub fn is_real_tree(&self) -> bool {
        self.conj() == *self
    }

    /// Exact Wirtinger derivative.
    pub fn diff(&self, var: Var) -> Expr {
        let mut memo = HashMap::new();
        self.diff_memo(&DiffTarget::Var(var), &mut memo)
    }

    /// Partial derivative with respect to a named parameter.
    pub fn diff_param(&self, name: &str) -> Expr {
        let mut memo = HashMap::new();
        self.diff_memo(&DiffTarget::Param(name), &mut memo)
    }

    fn diff_memo(&self, target: &DiffTarget<'_>, memo: &mut HashMap<usize, Expr>) -> Expr {
        if let Some(e) = memo.get(&self.ptr()) {
            return e.clone();
        }
        let out = match self.node() {
            Node::Const(_) => Expr::zero(),
            Node::Z => Expr::int(matches!(target, DiffTarget::Var(Var::Z)) as i64),
            Node::Zbar => Expr::int(matches!(target, DiffTarget::Var(Var::Zbar)) as i64),
            Node::Param(p) => Expr::int(matches!(target, DiffTarget::Param(q) if **p == **q) as i64),
            Node::Add(v) => Expr::add_all(v.iter().map(|e| e.diff_memo(target, memo)).collect()),
            Node::Mul(v) => {
                let mut terms = Vec::new();
                for (k, f) in v.iter().enumerate() {
                    let df = f.diff_memo(target, memo);
                    if df.is_zero() {
                        continue;
                    }
                    let mut fs: Vec<Expr> = v.clone();
                    fs[k] = df;
                    terms.push(Expr::mul_all(fs));
                }
                Expr::add_all(terms)
            }
            Node::Pow(b, n) => {
                let db = b.diff_memo(target, memo);
                if db.is_zero() {
                    Expr::zero()
                } else {
                    Expr::mul_all(vec![Expr::int(*n as i64), b.powi(n - 1), db])
                }
            }
            Node::Exp(a) => {
                let da = a.diff_memo(target, memo);
                if da.is_zero() {
                    Expr::zero()
                } else {
                    Expr::mul_all(vec![self.clone(), da])
                }
            }
            Node::Log(a) => {
                let da = a.diff_memo(target, memo);
                if da.is_zero() {
                    Expr::zero()
                } else {
                    Expr::mul_all(vec![da, a.powi(-1)])
                }
            }
        };
        memo.insert(self.ptr(), out.clone());
        out
    }

    /// Repeated Wirtinger derivative.
    pub fn wirtinger(&self, var: Var, order: u32) -> Expr {
        (0..order).fold(self.clone(), |e, _| e.diff(var))
    }

    /// Replace named parameters by fields.
    pub fn subst(&self, map: &HashMap<String, Expr>) -> Expr {
        let mut memo = HashMap::new();
        self.subst_memo(map, &mut memo)
    }

    fn subst_memo(&self, map: &HashMap<String, Expr>, memo: &mut HashMap<usize, Expr>) -> Expr {
        if let Some(e) = memo.get(&self.ptr()) {
            return e.clone();
        }
        let out = match self.node() {
            Node::Param(p) => map.get(&**p).cloned().unwrap_or_else(|| self.clone()),
            Node::Const(_) | Node::Z | Node::Zbar => self.clone(),
            Node::Add(v) => Expr::add_all(v.iter().map(|e| e.subst_memo(map, memo)).collect()),
            Node::Mul(v) => Expr::mul_all(v.iter().map(|e| e.subst_memo(map, memo)).collect()),
            Node::Pow(b, n) => b.subst_memo(map, memo).powi(*n),
            Node::Exp(a) => a.subst_memo(map, memo).exp(),
            Node::Log(a) => a.subst_memo(map, memo).log(),
        };
        memo.insert(self.ptr(), out.clone());
        out
    }

    /// Names of unbound parameters, sorted.
    pub fn params(&self) -> Vec<String> {
        let mut seen = std::collections::BTreeSet::new();
        let mut visited = std::collections::HashSet::new();
        let mut stack = vec![self.clone()];
        while let Some(e) = stack.pop() {
            if !visited.insert(e.ptr()) {
                continue;
            }
            match e.node() {
                Node::Param(p) => {
                    seen.insert(p.to_string());
                }
                Node::Add(v) | Node::Mul(v) => stack.extend(v.iter().cloned()),
                Node::Pow(b, _) | Node::Exp(b) | Node::Log(b) => stack.push(b.clone()),
                _ => {}
            }
        }
        seen.into_iter().collect()
    }

    /// Number of distinct nodes in the DAG.
    pub fn node_count(&self) -> usize {
        let mut visited = std::collections::HashSet::new();
        let mut stack = vec![self.clone()];
        while let Some(e) = stack.pop() {
            if !visited.insert(e.ptr()) {
                continue;
            }
            match e.node() {
                Node::Add(v) | Node::Mul(v) => stack.extend(v.iter().cloned()),
                Node::Pow(b, _) | Node::Exp(b) | Node::Log(b) => stack.push(b.clone()),
                _ => {}
            }
        }
        visited.len()
    }

    /// Evaluate at a chart point (compiles a one-off tape).
    pub fn eval(&self, p: ChartPoint) -> Result<Complex64, DomainError> {
        Tape::compile(std::slice::from_ref(self)).eval(p).map(|v| v[0])
    }

    /// Exact evaluation at a point with Gaussian-rational coordinates.
    pub fn eval_exact(&self, z: &Gauss) -> Result<Gauss, DomainError> {
        Tape::compile(std::slice::from_ref(self)).eval_exact(z).map(|mut v| v.swap_remove(0))
    }
}

enum DiffTarget<'a> {
    Var(Var),
    Param(&'a str),
}

/// Central-difference estimate of a Wirtinger derivative with step `h`.
pub fn fd_probe(f: &Expr, p: ChartPoint, var: Var, h: f64) -> Result<Complex64, DomainError> {
    let tape = Tape::compile(std::slice::from_ref(f));
    fd_probe_tape(&tape, 0, p, var, h)
}

/// Central differences on output `k` of a compiled tape.
pub fn fd_probe_tape(tape: &Tape, k: usize, p: ChartPoint, var: Var, h: f64) -> Result<Complex64, DomainError> {
    let at = |x: f64, y: f64| tape.eval(ChartPoint::new(x, y)).map(|v| v[k]);
    let fx = (at(p.x + h, p.y)? - at(p.x - h, p.y)?) / (2.0 * h);
    let fy = (at(p.x, p.y + h)? - at(p.x, p.y - h)?) / (2.0 * h);
    let i = Complex64::new(0.0, 1.0);
    Ok(match var {
        Var::Z => 0.5 * (fx - i * fy),
        Var::Zbar => 0.5 * (fx + i * fy),
    })
}

/// Richardson-extrapolated central difference (error O(h⁴)).
pub fn fd_probe_richardson(f: &Expr, p: ChartPoint, var: Var, h: f64) -> Result<Complex64, DomainError> {
    let tape = Tape::compile(std::slice::from_ref(f));
    let coarse = fd_probe_tape(&tape, 0, p, var, h)?;
    let fine = fd_probe_tape(&tape, 0, p, var, h / 2.0)?;
    Ok((4.0 * fine - coarse) / 3.0)
}

// ----- operators -----

impl Add for &Expr {
    type Output = Expr;
    fn add(self, o: &Expr) -> Expr {
        Expr::add_all(vec![self.clone(), o.clone()])
    }
}

impl Sub for &Expr {
    type Output = Expr;
    fn sub(self, o: &Expr) -> Expr {
        Expr::add_all(vec![self.clone(), -o])
    }
}

impl Mul for &Expr {
    type Output = Expr;
    fn mul(self, o: &Expr) -> Expr {
        Expr::mul_all(vec![self.clone(), o.clone()])
    }
}

impl Div for &Expr {
    type Output = Expr;
    fn div(self, o: &Expr) -> Expr {
        Expr::mul_all(vec![self.clone(), o.powi(-1)])
    }
}

impl Neg for &Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::mul_all(vec![Expr::int(-1), self.clone()])
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr for Expr {
            type Output = Expr;
            fn $m(self, o: Expr) -> Expr {
                (&self).$m(&o)
            }
        }
        impl $tr<&Expr> for Expr {
            type Output = Expr;
            fn $m(self, o: &Expr) -> Expr {
                (&self).$m(o)
            }
        }
        impl $tr<Expr> for &Expr {
            type Output = Expr;
            fn $m(self, o: Expr) -> Expr {
                self.$m(&o)
            }
        }
    };
}

forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);
forward_owned!(Div, div);

impl Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        -&self
    }
}

// ----- printing -----

const PREC_SUM: u8 = 1;
const PREC_PROD: u8 = 2;
const PREC_POW: u8 = 3;

fn const_prec(c: &Gauss) -> u8 {
    if !c.is_real() {
        if c.re.is_zero() {
            PREC_PROD
        } else {
            PREC_SUM
        }
    } else if c.re.is_integer() {
        if c.re.is_negative() {
            PREC_SUM
        } else {
            PREC_POW + 1
        }
    } else {
        PREC_PROD
    }
}

impl Expr {
    fn prec(&self) -> u8 {
        match self.node() {
            Node::Const(c) => const_prec(c),
            Node::Add(_) => PREC_SUM,
            Node::Mul(_) => PREC_PROD,
            Node::Pow(..) => PREC_POW,
            _ => PREC_POW + 1,
        }
    }

    fn write_at(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        let paren = self.prec() < min;
        if paren {
            write!(f, "(")?;
        }
        match self.node() {
            Node::Const(c) => write!(f, "{}", c)?,
            Node::Z => write!(f, "z")?,
            Node::Zbar => write!(f, "zbar")?,
            Node::Param(p) => write!(f, "{}", p)?,
            Node::Add(v) => {
                for (k, t) in v.iter().enumerate() {
                    if k > 0 {
                        write!(f, " + ")?;
                    }
                    t.write_at(f, PREC_SUM + 1)?;
                }
            }
            Node::Mul(v) => {
                for (k, t) in v.iter().enumerate() {
                    if k > 0 {
                        write!(f, "*")?;
                    }
                    t.write_at(f, PREC_PROD + 1)?;
                }
            }
            Node::Pow(b, n) => {
                b.write_at(f, PREC_POW + 1)?;
                if *n < 0 {
                    write!(f, "^({})", n)?;
                } else {
                    write!(f, "^{}", n)?;
                }
            }
            Node::Exp(a) => {
                write!(f, "exp(")?;
                a.write_at(f, 0)?;
                write!(f, ")")?;
            }
            Node::Log(a) => {
                write!(f, "log(")?;
                a.write_at(f, 0)?;
                write!(f, ")")?;
            }
        }
        if paren {
            write!(f, ")")?;
        }
        Ok(())
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write_at(f, 0)
    }
}
