//! Name resolution, static kind checking and evaluation of parsed expressions.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::field::GenericField;
use crate::jet::{Coord, Layout, LEVELS};
use crate::taylor::Scalar;

use super::parser::{BinOp, Expr, ExprKind};
use super::{ParseError, Pos};

const LEVEL_NAMES: [&str; LEVELS] = ["x", "v", "vp", "vpp"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Scalar,
    Vector(usize),
}

impl Kind {
    fn width(self) -> usize {
        match self {
            Kind::Scalar => 1,
            Kind::Vector(n) => n,
        }
    }
}

#[derive(Debug, Clone)]
enum Symbol {
    Coords(Vec<usize>, Kind),
    Constant(Vec<f64>, Kind),
}

/// Names visible to an expression: jet coordinates, model parameters (bound
/// to parameter slots of the layout) and fixed constants.
#[derive(Debug, Clone)]
pub struct Context {
    layout: Layout,
    names: Vec<(String, Symbol)>,
    param_names: Vec<String>,
}

impl Context {
    /// `params` lists parameter names with their widths, in slot order. A
    /// vector parameter `s` of width 3 also exposes `s1`, `s2`, `s3`.
    pub fn new(q: usize, params: &[(String, usize)]) -> Result<Self> {
        if q == 0 {
            return Err(Error::Schema("q must be at least 1".into()));
        }
        let num_params = params.iter().map(|(_, w)| w).sum();
        let layout = Layout::new(q, num_params);
        let mut ctx = Context {
            layout,
            names: Vec::new(),
            param_names: Vec::new(),
        };
        let mut slot = layout.jet_len();
        for (name, width) in params {
            let width = *width;
            if width == 0 {
                return Err(Error::Schema(format!("parameter `{name}` has no components")));
            }
            let slots: Vec<usize> = (slot..slot + width).collect();
            if width == 1 {
                ctx.declare(name, Symbol::Coords(slots, Kind::Scalar))?;
                ctx.param_names.push(name.clone());
            } else {
                ctx.declare(name, Symbol::Coords(slots.clone(), Kind::Vector(width)))?;
                for (i, s) in slots.into_iter().enumerate() {
                    let component = format!("{name}{}", i + 1);
                    ctx.declare(&component, Symbol::Coords(vec![s], Kind::Scalar))?;
                    ctx.param_names.push(component);
                }
            }
            slot += width;
        }
        Ok(ctx)
    }

    /// Adds a fixed named value (scalar if `values.len() == 1`).
    pub fn with_constant(mut self, name: &str, values: Vec<f64>) -> Result<Self> {
        let kind = if values.len() == 1 {
            Kind::Scalar
        } else {
            Kind::Vector(values.len())
        };
        self.declare(name, Symbol::Constant(values, kind))?;
        Ok(self)
    }

    fn declare(&mut self, name: &str, symbol: Symbol) -> Result<()> {
        let valid = name
            .chars()
            .next()
            .is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
            && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
        if !valid {
            return Err(Error::Schema(format!("`{name}` is not a valid identifier")));
        }
        if self.coordinate(name).is_some() || self.names.iter().any(|(n, _)| n == name) {
            return Err(Error::Schema(format!("name `{name}` is already taken")));
        }
        if super::parser::FUNCTIONS.contains(&name) {
            return Err(Error::Schema(format!("`{name}` is a function name")));
        }
        self.names.push((name.to_string(), symbol));
        Ok(())
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    /// Names of the parameter slots in order (vector components expanded).
    pub fn param_names(&self) -> &[String] {
        &self.param_names
    }

    /// Flat slots and kind of a declared parameter.
    pub fn param_slots(&self, name: &str) -> Option<(Vec<usize>, Kind)> {
        self.names.iter().find_map(|(n, s)| match s {
            Symbol::Coords(slots, kind) if n == name => Some((slots.clone(), *kind)),
            _ => None,
        })
    }

    /// Resolves a jet-coordinate name to (level, flat indices, kind).
    fn coordinate(&self, name: &str) -> Option<(Option<usize>, Vec<usize>, Kind)> {
        let q = self.layout.q;
        if name == "t" {
            return Some((None, vec![0], Kind::Scalar));
        }
        if let Some(level) = LEVEL_NAMES.iter().position(|&n| n == name) {
            return Some((Some(level), self.layout.level(level).collect(), Kind::Vector(q)));
        }
        let split = name.find(|c: char| c.is_ascii_digit())?;
        let (prefix, digits) = name.split_at(split);
        let level = LEVEL_NAMES.iter().position(|&n| n == prefix)?;
        if digits.starts_with('0') || !digits.chars().all(|c| c.is_ascii_digit()) {
            return None;
        }
        let index: usize = digits.parse().ok()?;
        if index == 0 || index > q {
            return None;
        }
        Some((Some(level), vec![Coord::Jet { level, index: index - 1 }.flat(q)], Kind::Scalar))
    }

    /// Checks names and kinds of `expr`, rejecting jet coordinates above
    /// `max_level`. `field` names the expression in diagnostics.
    pub fn compile(&self, expr: &Expr, max_level: usize, field: &str) -> Result<Compiled> {
        let mut vars = BTreeSet::new();
        let (node, kind) = self.node(expr, max_level, field, &mut vars)?;
        let jet_order = vars
            .iter()
            .filter_map(|&v| match Coord::from_flat(v, self.layout.q) {
                Coord::Jet { level, .. } => Some(level),
                _ => None,
            })
            .max()
            .unwrap_or(0);
        Ok(Compiled {
            node,
            kind,
            vars,
            jet_order,
            source: expr.to_string(),
        })
    }

    fn node(&self, e: &Expr, max_level: usize, field: &str, vars: &mut BTreeSet<usize>) -> Result<(Node, Kind)> {
        let kind_err = |pos: Pos, message: String| Error::Parse(ParseError::Kind { pos, message });
        match &e.kind {
            ExprKind::Num(x) => Ok((Node::Const(*x), Kind::Scalar)),
            ExprKind::Ident(name) => {
                if let Some((level, slots, kind)) = self.coordinate(name) {
                    if level.is_some_and(|l| l > max_level) {
                        return Err(Error::JetOrder {
                            field: field.to_string(),
                            ident: name.clone(),
                        });
                    }
                    vars.extend(slots.iter().copied());
                    return Ok((slots_node(slots, kind), kind));
                }
                match self.names.iter().find(|(n, _)| n == name) {
                    Some((_, Symbol::Coords(slots, kind))) => {
                        vars.extend(slots.iter().copied());
                        Ok((slots_node(slots.clone(), *kind), *kind))
                    }
                    Some((_, Symbol::Constant(values, kind))) => {
                        let node = match kind {
                            Kind::Scalar => Node::Const(values[0]),
                            Kind::Vector(_) => Node::Vector(values.iter().map(|&c| Node::Const(c)).collect()),
                        };
                        Ok((node, *kind))
                    }
                    None => Err(Error::Parse(ParseError::UnknownIdentifier {
                        pos: e.pos,
                        name: name.clone(),
                    })),
                }
            }
            ExprKind::Neg(inner) => {
                let (n, k) = self.node(inner, max_level, field, vars)?;
                Ok((Node::Neg(Box::new(n)), k))
            }
            ExprKind::Binary(op, a, b) => {
                let (na, ka) = self.node(a, max_level, field, vars)?;
                let (nb, kb) = self.node(b, max_level, field, vars)?;
                let (na, nb) = (Box::new(na), Box::new(nb));
                match op {
                    BinOp::Add | BinOp::Sub => {
                        if ka != kb {
                            return Err(kind_err(e.pos, format!("cannot combine {ka:?} and {kb:?} with `{}`", if *op == BinOp::Add { '+' } else { '-' })));
                        }
                        let node = if *op == BinOp::Add { Node::Add(na, nb) } else { Node::Sub(na, nb) };
                        Ok((node, ka))
                    }
                    BinOp::Mul => match (ka, kb) {
                        (Kind::Vector(_), Kind::Vector(_)) => Err(kind_err(
                            e.pos,
                            "product of two vectors; use dot or cross".into(),
                        )),
                        (Kind::Scalar, k) | (k, Kind::Scalar) => Ok((Node::Mul(na, nb), k)),
                    },
                    BinOp::Div => {
                        if kb != Kind::Scalar {
                            return Err(kind_err(e.pos, "division by a vector".into()));
                        }
                        Ok((Node::Div(na, nb), ka))
                    }
                    BinOp::Pow => {
                        if ka != Kind::Scalar || kb != Kind::Scalar {
                            return Err(kind_err(e.pos, "`^` needs scalar operands".into()));
                        }
                        let Some(exponent) = nb.constant() else {
                            return Err(kind_err(e.pos, "exponent must be a constant".into()));
                        };
                        if exponent.fract() == 0.0 && exponent.abs() <= i32::MAX as f64 {
                            Ok((Node::PowI(na, exponent as i32), Kind::Scalar))
                        } else {
                            Ok((Node::PowF(na, exponent), Kind::Scalar))
                        }
                    }
                }
            }
            ExprKind::Call(name, args) => {
                let mut nodes = Vec::with_capacity(args.len());
                let mut kinds = Vec::with_capacity(args.len());
                for a in args {
                    let (n, k) = self.node(a, max_level, field, vars)?;
                    nodes.push(n);
                    kinds.push(k);
                }
                let func = match name.as_str() {
                    "sqrt" => Func::Sqrt,
                    "abs" => Func::Abs,
                    "sin" => Func::Sin,
                    "cos" => Func::Cos,
                    "exp" => Func::Exp,
                    "dot" => Func::Dot,
                    "cross" => Func::Cross,
                    "norm2" => Func::Norm2,
                    _ => {
                        return Err(Error::Parse(ParseError::UnknownFunction {
                            pos: e.pos,
                            name: name.clone(),
                        }))
                    }
                };
                let arity = match func {
                    Func::Dot | Func::Cross => 2,
                    _ => 1,
                };
                if nodes.len() != arity {
                    return Err(kind_err(e.pos, format!("{name} takes {arity} argument(s), got {}", nodes.len())));
                }
                let kind = match func {
                    Func::Sqrt | Func::Abs | Func::Sin | Func::Cos | Func::Exp => {
                        if kinds[0] != Kind::Scalar {
                            return Err(kind_err(e.pos, format!("{name} needs a scalar argument")));
                        }
                        Kind::Scalar
                    }
                    Func::Norm2 => {
                        if kinds[0] == Kind::Scalar {
                            return Err(kind_err(e.pos, "norm2 needs a vector argument".into()));
                        }
                        Kind::Scalar
                    }
                    Func::Dot => match (kinds[0], kinds[1]) {
                        (Kind::Vector(m), Kind::Vector(n)) if m == n => Kind::Scalar,
                        _ => return Err(kind_err(e.pos, "dot needs two vectors of equal length".into())),
                    },
                    Func::Cross => {
                        if self.layout.q != 3 {
                            return Err(kind_err(e.pos, "cross is available only for q = 3".into()));
                        }
                        if kinds[0] != Kind::Vector(3) || kinds[1] != Kind::Vector(3) {
                            return Err(kind_err(e.pos, "cross needs two 3-vectors".into()));
                        }
                        Kind::Vector(3)
                    }
                };
                Ok((Node::Call(func, nodes), kind))
            }
            ExprKind::Vector(items) => {
                let mut nodes = Vec::with_capacity(items.len());
                for item in items {
                    let (n, k) = self.node(item, max_level, field, vars)?;
                    if k != Kind::Scalar {
                        return Err(kind_err(item.pos, "vector entries must be scalars".into()));
                    }
                    nodes.push(n);
                }
                Ok((Node::Vector(nodes), Kind::Vector(items.len())))
            }
        }
    }
}

fn slots_node(slots: Vec<usize>, kind: Kind) -> Node {
    match kind {
        Kind::Scalar => Node::Var(slots[0]),
        Kind::Vector(_) => Node::Vector(slots.into_iter().map(Node::Var).collect()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Func {
    Sqrt,
    Abs,
    Sin,
    Cos,
    Exp,
    Dot,
    Cross,
    Norm2,
}

#[derive(Debug, Clone)]
enum Node {
    Const(f64),
    Var(usize),
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    PowI(Box<Node>, i32),
    PowF(Box<Node>, f64),
    Call(Func, Vec<Node>),
    Vector(Vec<Node>),
}

enum Val<S> {
    S(S),
    V(Vec<S>),
}

impl<S: Scalar> Val<S> {
    fn scalar(self) -> S {
        match self {
            Val::S(s) => s,
            Val::V(_) => unreachable!("kind checked at compile time"),
        }
    }

    fn vector(self) -> Vec<S> {
        match self {
            Val::V(v) => v,
            Val::S(_) => unreachable!("kind checked at compile time"),
        }
    }

    fn map(self, f: impl Fn(S) -> S) -> Val<S> {
        match self {
            Val::S(s) => Val::S(f(s)),
            Val::V(v) => Val::V(v.into_iter().map(f).collect()),
        }
    }
}

fn dot<S: Scalar>(a: &[S], b: &[S], zero: &S) -> S {
    a.iter().zip(b).fold(zero.clone(), |acc, (x, y)| acc + x.clone() * y.clone())
}

impl Node {
    /// Value of a subtree that reads no coordinates.
    fn constant(&self) -> Option<f64> {
        if self.has_vars() {
            return None;
        }
        match self.eval::<f64>(&[0.0]) {
            Ok(Val::S(x)) => Some(x),
            _ => None,
        }
    }

    fn has_vars(&self) -> bool {
        match self {
            Node::Const(_) => false,
            Node::Var(_) => true,
            Node::Neg(a) | Node::PowI(a, _) | Node::PowF(a, _) => a.has_vars(),
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => a.has_vars() || b.has_vars(),
            Node::Call(_, items) | Node::Vector(items) => items.iter().any(Node::has_vars),
        }
    }

    /// Folds the smallest `|denominator|` (divisors and bases of negative
    /// powers) into `acc`.
    fn min_denominator(&self, c: &[f64], acc: &mut f64) -> Result<()> {
        match self {
            Node::Const(_) | Node::Var(_) => {}
            Node::Neg(a) => a.min_denominator(c, acc)?,
            Node::PowI(a, n) => {
                if *n < 0 {
                    *acc = acc.min(a.eval(c)?.scalar().abs());
                }
                a.min_denominator(c, acc)?;
            }
            Node::PowF(a, x) => {
                if *x < 0.0 {
                    *acc = acc.min(a.eval(c)?.scalar().abs());
                }
                a.min_denominator(c, acc)?;
            }
            Node::Div(a, b) => {
                *acc = acc.min(b.eval(c)?.scalar().abs());
                a.min_denominator(c, acc)?;
                b.min_denominator(c, acc)?;
            }
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) => {
                a.min_denominator(c, acc)?;
                b.min_denominator(c, acc)?;
            }
            Node::Call(_, items) | Node::Vector(items) => {
                for n in items {
                    n.min_denominator(c, acc)?;
                }
            }
        }
        Ok(())
    }

    fn eval<S: Scalar>(&self, c: &[S]) -> Result<Val<S>> {
        Ok(match self {
            Node::Const(x) => Val::S(
                c.first()
                    .ok_or_else(|| Error::Config("evaluation needs a coordinate vector".into()))?
                    .lift(*x),
            ),
            Node::Var(i) => Val::S(
                c.get(*i)
                    .cloned()
                    .ok_or_else(|| Error::Config(format!("coordinate {i} is not bound")))?,
            ),
            Node::Neg(a) => a.eval(c)?.map(|s| -s),
            Node::Add(a, b) => match (a.eval(c)?, b.eval(c)?) {
                (Val::S(x), Val::S(y)) => Val::S(x + y),
                (x, y) => Val::V(x.vector().into_iter().zip(y.vector()).map(|(p, q)| p + q).collect()),
            },
            Node::Sub(a, b) => match (a.eval(c)?, b.eval(c)?) {
                (Val::S(x), Val::S(y)) => Val::S(x - y),
                (x, y) => Val::V(x.vector().into_iter().zip(y.vector()).map(|(p, q)| p - q).collect()),
            },
            Node::Mul(a, b) => match (a.eval(c)?, b.eval(c)?) {
                (Val::S(x), Val::S(y)) => Val::S(x * y),
                (Val::S(x), v) | (v, Val::S(x)) => v.map(|s| x.clone() * s),
                (Val::V(_), Val::V(_)) => unreachable!("kind checked at compile time"),
            },
            Node::Div(a, b) => {
                let inv = b.eval(c)?.scalar().recip()?;
                a.eval(c)?.map(|s| s * inv.clone())
            }
            Node::PowI(a, n) => Val::S(a.eval(c)?.scalar().powi(*n)?),
            Node::PowF(a, x) => Val::S(a.eval(c)?.scalar().powf(*x)?),
            Node::Call(f, args) => {
                let mut vals = Vec::with_capacity(args.len());
                for a in args {
                    vals.push(a.eval(c)?);
                }
                let mut it = vals.into_iter();
                let first = it.next().unwrap();
                match f {
                    Func::Sqrt => Val::S(first.scalar().sqrt()?),
                    Func::Abs => Val::S(first.scalar().abs()?),
                    Func::Sin => Val::S(first.scalar().sin()),
                    Func::Cos => Val::S(first.scalar().cos()),
                    Func::Exp => Val::S(first.scalar().exp()),
                    Func::Norm2 => {
                        let v = first.vector();
                        let z = v[0].lift(0.0);
                        Val::S(dot(&v, &v, &z))
                    }
                    Func::Dot => {
                        let (a, b) = (first.vector(), it.next().unwrap().vector());
                        let z = a[0].lift(0.0);
                        Val::S(dot(&a, &b, &z))
                    }
                    Func::Cross => {
                        let (a, b) = (first.vector(), it.next().unwrap().vector());
                        let m = |i: usize, j: usize| a[i].clone() * b[j].clone() - a[j].clone() * b[i].clone();
                        Val::V(vec![m(1, 2), m(2, 0), m(0, 1)])
                    }
                }
            }
            Node::Vector(items) => {
                let mut out = Vec::with_capacity(items.len());
                for n in items {
                    out.push(n.eval(c)?.scalar());
                }
                Val::V(out)
            }
        })
    }
}

/// A resolved, kind-checked expression.
#[derive(Debug, Clone)]
pub struct Compiled {
    node: Node,
    kind: Kind,
    vars: BTreeSet<usize>,
    jet_order: usize,
    source: String,
}

impl Compiled {
    pub fn kind(&self) -> Kind {
        self.kind
    }

    /// Flat coordinates the expression reads.
    pub fn vars(&self) -> &BTreeSet<usize> {
        &self.vars
    }

    pub fn jet_order(&self) -> usize {
        self.jet_order
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Smallest `|denominator|` met while evaluating at `coords`, or
    /// `f64::INFINITY` when the expression divides by nothing.
    pub fn min_denominator(&self, coords: &[f64]) -> Result<f64> {
        let mut acc = f64::INFINITY;
        self.node.min_denominator(coords, &mut acc)?;
        Ok(acc)
    }

    /// Evaluates over a full coordinate vector; vectors come back flattened.
    pub fn eval<S: Scalar>(&self, coords: &[S]) -> Result<Vec<S>> {
        Ok(match self.node.eval(coords)? {
            Val::S(s) => vec![s],
            Val::V(v) => v,
        })
    }
}

/// A vector-valued field whose components are compiled expressions; vector
/// expressions contribute all of their components.
#[derive(Debug, Clone)]
pub struct ExprField {
    layout: Layout,
    parts: Vec<Compiled>,
    jet_order: usize,
    deps: Vec<bool>,
}

impl ExprField {
    /// `jet_order` is a lower bound on the declared order; the actual order
    /// is the larger of it and the highest level read.
    pub fn new(layout: Layout, parts: Vec<Compiled>, jet_order: usize) -> Self {
        let mut deps = vec![false; layout.len()];
        for p in &parts {
            for &v in p.vars() {
                deps[v] = true;
            }
        }
        let jet_order = parts.iter().map(Compiled::jet_order).fold(jet_order, usize::max);
        ExprField {
            layout,
            parts,
            jet_order,
            deps,
        }
    }

    pub fn parts(&self) -> &[Compiled] {
        &self.parts
    }
}

impl GenericField for ExprField {
    fn layout(&self) -> Layout {
        self.layout
    }
    fn dim(&self) -> usize {
        self.parts.iter().map(|p| p.kind.width()).sum()
    }
    fn jet_order(&self) -> usize {
        self.jet_order
    }
    fn reads_params(&self) -> bool {
        self.layout.params().any(|i| self.deps[i])
    }
    fn depends_on(&self, flat: usize) -> bool {
        self.deps.get(flat).copied().unwrap_or(false)
    }
    fn eval_with<S: Scalar>(&self, coords: &[S]) -> Result<Vec<S>> {
        let mut out = Vec::with_capacity(self.dim());
        for p in &self.parts {
            match p.node.eval(coords)? {
                Val::S(s) => out.push(s),
                Val::V(v) => out.extend(v),
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse;
    use crate::field::Field;
    use crate::jet::JetPoint;

    fn ctx3() -> Context {
        Context::new(3, &[("s0".into(), 1), ("s".into(), 3)]).unwrap()
    }

    fn eval_at(src: &str, p: &JetPoint) -> Result<Vec<f64>> {
        let c = ctx3().compile(&parse(src).unwrap(), 3, "test")?;
        c.eval(p.coords())
    }

    fn point() -> JetPoint {
        JetPoint::new(0.5, &[1.0, 0.0, 2.0], &[1.0, 2.0, 2.0], &[0.0, 4.0, 0.0], &[0.0; 3], &[2.0, 1.0, 0.0, 0.0]).unwrap()
    }

    #[test]
    fn evaluates_examples() {
        let p = point();
        let q = JetPoint::new(0.0, &[0.0; 3], &[3.0, 0.0, 0.0], &[0.0, 4.0, 0.0], &[0.0; 3], &[0.0; 4]).unwrap();
        assert_eq!(eval_at("v1*vp2 - 2", &q).unwrap(), vec![10.0]);
        assert_eq!(eval_at("dot(v,v)", &p).unwrap(), vec![9.0]);
        assert_eq!(eval_at("sqrt(1+dot(v,v))", &JetPoint::zeros(Layout::new(3, 4))).unwrap(), vec![1.0]);
        assert_eq!(eval_at("cross([1,0,0],[0,1,0])", &p).unwrap(), vec![0.0, 0.0, 1.0]);
        assert_eq!(eval_at("s0*s + [t, x3, norm2(s)]", &p).unwrap(), vec![2.5, 2.0, 1.0]);
        assert_eq!(eval_at("s1^2 + 2^-1", &p).unwrap(), vec![1.5]);
    }

    #[test]
    fn singular_denominator() {
        let p = point();
        assert!(matches!(eval_at("1/(x1-1)", &p), Err(Error::SingularDenominator { .. })));
        assert!(matches!(eval_at("sqrt(x1-3)", &p), Err(Error::Domain(_))));
    }

    #[test]
    fn static_errors() {
        let c = ctx3();
        let bad = |src: &str, level: usize| c.compile(&parse(src).unwrap(), level, "c[1]");
        assert!(matches!(bad("v*v", 3), Err(Error::Parse(ParseError::Kind { .. }))));
        assert!(matches!(bad("x + 1", 3), Err(Error::Parse(ParseError::Kind { .. }))));
        assert!(matches!(bad("x4", 3), Err(Error::Parse(ParseError::UnknownIdentifier { .. }))));
        assert!(matches!(bad("x1^x2", 3), Err(Error::Parse(ParseError::Kind { .. }))));
        assert!(matches!(bad("dot(v)", 3), Err(Error::Parse(ParseError::Kind { .. }))));
        match bad("vp1 + x1", 1) {
            Err(Error::JetOrder { field, ident }) => {
                assert_eq!(field, "c[1]");
                assert_eq!(ident, "vp1");
            }
            other => panic!("{other:?}"),
        }
        let c2 = Context::new(2, &[]).unwrap();
        assert!(c2.compile(&parse("cross(x, v)").unwrap(), 3, "f").is_err());
    }

    #[test]
    fn name_clashes() {
        assert!(Context::new(3, &[("x1".into(), 1)]).is_err());
        assert!(Context::new(3, &[("s".into(), 2), ("s1".into(), 1)]).is_err());
        assert!(Context::new(3, &[("dot".into(), 1)]).is_err());
        assert!(ctx3().with_constant("k", vec![0.0, 0.0, 1.0]).is_ok());
    }

    #[test]
    fn field_tracks_dependencies() {
        let c = ctx3();
        let parts = vec![c.compile(&parse("x1*v2 + s0").unwrap(), 3, "f").unwrap()];
        let f = ExprField::new(c.layout(), parts, 0);
        assert_eq!(Field::jet_order(&f), 1);
        assert!(Field::depends_on(&f, 1));
        assert!(!Field::depends_on(&f, 2));
        assert!(Field::reads_params(&f));
        assert_eq!(Field::eval(&f, &point()).unwrap(), vec![4.0]);
    }
}
