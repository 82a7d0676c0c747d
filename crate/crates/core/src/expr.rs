//! Expression trees for the scalar data of a family member.
//!
//! One tree type serves both the one-variable functions (`X` is the
//! variable) and the n-variable ones (`Coord(i)` projects onto `x_{i+1}`).
//! Derivatives are symbolic; the only non-closed nodes are tabulated
//! primitives (whose derivative is their integrand) and registered
//! callbacks carrying their own derivative.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::primitive::TabulatedPrimitive;

/// A user-registered one-variable function.
///
/// The derivative is optional; when absent it is approximated by central
/// differences of `value`.
#[derive(Clone)]
pub struct CustomFn {
    pub name: String,
    pub value: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub derivative: Option<Arc<CustomFn>>,
    pub inverse: Option<Arc<dyn Fn(f64) -> f64 + Send + Sync>>,
}

impl CustomFn {
    pub fn new(name: impl Into<String>, value: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        CustomFn {
            name: name.into(),
            value: Arc::new(value),
            derivative: None,
            inverse: None,
        }
    }

    pub fn with_derivative(mut self, derivative: CustomFn) -> Self {
        self.derivative = Some(Arc::new(derivative));
        self
    }

    pub fn with_inverse(mut self, inverse: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.inverse = Some(Arc::new(inverse));
        self
    }

    fn derivative_fn(&self) -> CustomFn {
        if let Some(d) = &self.derivative {
            return (**d).clone();
        }
        let f = Arc::clone(&self.value);
        CustomFn::new(format!("d{}", self.name), move |x| {
            let h = f64::EPSILON.cbrt() * x.abs().max(1.0);
            (f(x + h) - f(x - h)) / (2.0 * h)
        })
    }
}

impl fmt::Debug for CustomFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomFn")
            .field("name", &self.name)
            .finish_non_exhaustive()
    }
}

#[derive(Clone, Debug)]
pub enum Expr {
    Const(f64),
    /// The variable of a one-variable expression.
    X,
    /// Projection onto coordinate `i` (zero-based) of an n-variable expression.
    Coord(usize),
    Sum(Vec<Expr>),
    Product(Vec<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    /// Power with a real exponent. Non-integer exponents require a positive base.
    Pow(Box<Expr>, f64),
    Exp(Box<Expr>),
    Log(Box<Expr>),
    Primitive(Arc<TabulatedPrimitive>, Box<Expr>),
    Custom(Arc<CustomFn>, Box<Expr>),
}

fn is_integer(p: f64) -> bool {
    p.fract() == 0.0
}

impl Expr {
    pub fn constant(c: f64) -> Expr {
        Expr::Const(c)
    }

    pub fn x() -> Expr {
        Expr::X
    }

    pub fn coord(i: usize) -> Expr {
        Expr::Coord(i)
    }

    pub fn as_const(&self) -> Option<f64> {
        match self {
            Expr::Const(c) => Some(*c),
            _ => None,
        }
    }

    // Smart constructors with light constant folding. They keep derivative
    // trees small; they are not a simplifier.

    pub fn sum(terms: Vec<Expr>) -> Expr {
        let mut flat = Vec::with_capacity(terms.len());
        let mut c = 0.0;
        for t in terms {
            match t {
                Expr::Const(v) => c += v,
                Expr::Sum(inner) => {
                    for u in inner {
                        match u {
                            Expr::Const(v) => c += v,
                            other => flat.push(other),
                        }
                    }
                }
                other => flat.push(other),
            }
        }
        if c != 0.0 {
            flat.push(Expr::Const(c));
        }
        match flat.len() {
            0 => Expr::Const(0.0),
            1 => flat.pop().unwrap(),
            _ => Expr::Sum(flat),
        }
    }

    pub fn product(factors: Vec<Expr>) -> Expr {
        let mut flat = Vec::with_capacity(factors.len());
        let mut c = 1.0;
        for f in factors {
            match f {
                Expr::Const(v) => c *= v,
                Expr::Product(inner) => {
                    for u in inner {
                        match u {
                            Expr::Const(v) => c *= v,
                            other => flat.push(other),
                        }
                    }
                }
                other => flat.push(other),
            }
        }
        if c == 0.0 {
            return Expr::Const(0.0);
        }
        if c != 1.0 || flat.is_empty() {
            flat.insert(0, Expr::Const(c));
        }
        match flat.len() {
            1 => flat.pop().unwrap(),
            _ => Expr::Product(flat),
        }
    }

    pub fn add(self, rhs: Expr) -> Expr {
        Expr::sum(vec![self, rhs])
    }

    pub fn mul(self, rhs: Expr) -> Expr {
        Expr::product(vec![self, rhs])
    }

    pub fn sub(self, rhs: Expr) -> Expr {
        match (&self, &rhs) {
            (_, Expr::Const(z)) if *z == 0.0 => self,
            (Expr::Const(z), _) if *z == 0.0 => rhs.neg(),
            (Expr::Const(a), Expr::Const(b)) => Expr::Const(a - b),
            _ => Expr::Sub(Box::new(self), Box::new(rhs)),
        }
    }

    pub fn div(self, rhs: Expr) -> Expr {
        match (&self, &rhs) {
            (_, Expr::Const(one)) if *one == 1.0 => self,
            (Expr::Const(z), _) if *z == 0.0 => Expr::Const(0.0),
            (Expr::Const(a), Expr::Const(b)) if *b != 0.0 => Expr::Const(a / b),
            _ => Expr::Div(Box::new(self), Box::new(rhs)),
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn neg(self) -> Expr {
        match self {
            Expr::Const(c) => Expr::Const(-c),
            Expr::Neg(inner) => *inner,
            other => Expr::Neg(Box::new(other)),
        }
    }

    pub fn powf(self, p: f64) -> Expr {
        if p == 0.0 {
            return Expr::Const(1.0);
        }
        if p == 1.0 {
            return self;
        }
        match self {
            Expr::Const(c) if c > 0.0 || is_integer(p) => Expr::Const(c.powf(p)),
            other => Expr::Pow(Box::new(other), p),
        }
    }

    pub fn exp(self) -> Expr {
        match self {
            Expr::Const(c) => Expr::Const(c.exp()),
            other => Expr::Exp(Box::new(other)),
        }
    }

    pub fn ln(self) -> Expr {
        match self {
            Expr::Const(c) if c > 0.0 => Expr::Const(c.ln()),
            other => Expr::Log(Box::new(other)),
        }
    }

    pub fn custom(f: CustomFn, arg: Expr) -> Expr {
        Expr::Custom(Arc::new(f), Box::new(arg))
    }

    /// Evaluate a one-variable expression.
    pub fn eval1(&self, x: f64) -> Result<f64> {
        self.eval(&[x])
    }

    /// Evaluate with `vars[0]` bound to `X` and `vars[i]` to `Coord(i)`.
    pub fn eval(&self, vars: &[f64]) -> Result<f64> {
        let v = match self {
            Expr::Const(c) => *c,
            Expr::X => *vars.first().ok_or_else(|| Error::InvalidSpec("x is unbound".into()))?,
            Expr::Coord(i) => *vars
                .get(*i)
                .ok_or_else(|| Error::InvalidSpec(format!("coordinate x{} is out of range", i + 1)))?,
            Expr::Sum(ts) => {
                let mut s = 0.0;
                for t in ts {
                    s += t.eval(vars)?;
                }
                s
            }
            Expr::Product(fs) => {
                let mut p = 1.0;
                for f in fs {
                    p *= f.eval(vars)?;
                }
                p
            }
            Expr::Sub(a, b) => a.eval(vars)? - b.eval(vars)?,
            Expr::Div(a, b) => {
                let den = b.eval(vars)?;
                if den == 0.0 {
                    return Err(Error::ExprDomain {
                        primitive: "div",
                        argument: den,
                    });
                }
                a.eval(vars)? / den
            }
            Expr::Neg(a) => -a.eval(vars)?,
            Expr::Pow(base, p) => {
                let b = base.eval(vars)?;
                let ok = if is_integer(*p) { b != 0.0 || *p > 0.0 } else { b > 0.0 };
                if !ok {
                    return Err(Error::ExprDomain {
                        primitive: "pow",
                        argument: b,
                    });
                }
                if is_integer(*p) && p.abs() <= i32::MAX as f64 {
                    b.powi(*p as i32)
                } else {
                    b.powf(*p)
                }
            }
            Expr::Exp(a) => {
                let u = a.eval(vars)?;
                let r = u.exp();
                if !r.is_finite() {
                    return Err(Error::ExprDomain {
                        primitive: "exp",
                        argument: u,
                    });
                }
                r
            }
            Expr::Log(a) => {
                let u = a.eval(vars)?;
                if u <= 0.0 {
                    return Err(Error::ExprDomain {
                        primitive: "log",
                        argument: u,
                    });
                }
                u.ln()
            }
            Expr::Primitive(t, a) => t.eval(a.eval(vars)?),
            Expr::Custom(c, a) => {
                let u = a.eval(vars)?;
                let r = (c.value)(u);
                if !r.is_finite() {
                    return Err(Error::ExprDomain {
                        primitive: "custom",
                        argument: u,
                    });
                }
                r
            }
        };
        if v.is_nan() {
            return Err(Error::NonFinite {
                factor: self.head().to_string(),
            });
        }
        Ok(v)
    }

    fn head(&self) -> &'static str {
        match self {
            Expr::Const(_) => "const",
            Expr::X | Expr::Coord(_) => "var",
            Expr::Sum(_) => "add",
            Expr::Product(_) => "mul",
            Expr::Sub(..) => "sub",
            Expr::Div(..) => "div",
            Expr::Neg(_) => "neg",
            Expr::Pow(..) => "pow",
            Expr::Exp(_) => "exp",
            Expr::Log(_) => "log",
            Expr::Primitive(..) => "primitive",
            Expr::Custom(..) => "custom",
        }
    }

    /// True when the tree mentions variable `v` (`X` counts as variable 0).
    pub fn depends_on(&self, v: usize) -> bool {
        match self {
            Expr::Const(_) => false,
            Expr::X => v == 0,
            Expr::Coord(i) => *i == v,
            Expr::Sum(ts) | Expr::Product(ts) => ts.iter().any(|t| t.depends_on(v)),
            Expr::Sub(a, b) | Expr::Div(a, b) => a.depends_on(v) || b.depends_on(v),
            Expr::Neg(a)
            | Expr::Pow(a, _)
            | Expr::Exp(a)
            | Expr::Log(a)
            | Expr::Primitive(_, a)
            | Expr::Custom(_, a) => a.depends_on(v),
        }
    }

    fn is_constant(&self) -> bool {
        match self {
            Expr::Const(_) => true,
            Expr::X | Expr::Coord(_) => false,
            Expr::Sum(ts) | Expr::Product(ts) => ts.iter().all(Expr::is_constant),
            Expr::Sub(a, b) | Expr::Div(a, b) => a.is_constant() && b.is_constant(),
            Expr::Neg(a)
            | Expr::Pow(a, _)
            | Expr::Exp(a)
            | Expr::Log(a)
            | Expr::Primitive(_, a)
            | Expr::Custom(_, a) => a.is_constant(),
        }
    }

    /// Largest coordinate index referenced by `Coord` nodes.
    pub fn max_coord(&self) -> Option<usize> {
        match self {
            Expr::Const(_) | Expr::X => None,
            Expr::Coord(i) => Some(*i),
            Expr::Sum(ts) | Expr::Product(ts) => ts.iter().filter_map(Expr::max_coord).max(),
            Expr::Sub(a, b) | Expr::Div(a, b) => a.max_coord().max(b.max_coord()),
            Expr::Neg(a)
            | Expr::Pow(a, _)
            | Expr::Exp(a)
            | Expr::Log(a)
            | Expr::Primitive(_, a)
            | Expr::Custom(_, a) => a.max_coord(),
        }
    }

    pub fn uses_x(&self) -> bool {
        match self {
            Expr::X => true,
            Expr::Const(_) | Expr::Coord(_) => false,
            Expr::Sum(ts) | Expr::Product(ts) => ts.iter().any(Expr::uses_x),
            Expr::Sub(a, b) | Expr::Div(a, b) => a.uses_x() || b.uses_x(),
            Expr::Neg(a)
            | Expr::Pow(a, _)
            | Expr::Exp(a)
            | Expr::Log(a)
            | Expr::Primitive(_, a)
            | Expr::Custom(_, a) => a.uses_x(),
        }
    }

    /// Substitute `inner` for `X` (function composition `self ∘ inner`).
    pub fn compose(&self, inner: &Expr) -> Expr {
        match self {
            Expr::X => inner.clone(),
            Expr::Const(_) | Expr::Coord(_) => self.clone(),
            Expr::Sum(ts) => Expr::Sum(ts.iter().map(|t| t.compose(inner)).collect()),
            Expr::Product(ts) => Expr::Product(ts.iter().map(|t| t.compose(inner)).collect()),
            Expr::Sub(a, b) => Expr::Sub(Box::new(a.compose(inner)), Box::new(b.compose(inner))),
            Expr::Div(a, b) => Expr::Div(Box::new(a.compose(inner)), Box::new(b.compose(inner))),
            Expr::Neg(a) => Expr::Neg(Box::new(a.compose(inner))),
            Expr::Pow(a, p) => Expr::Pow(Box::new(a.compose(inner)), *p),
            Expr::Exp(a) => Expr::Exp(Box::new(a.compose(inner))),
            Expr::Log(a) => Expr::Log(Box::new(a.compose(inner))),
            Expr::Primitive(t, a) => Expr::Primitive(Arc::clone(t), Box::new(a.compose(inner))),
            Expr::Custom(c, a) => Expr::Custom(Arc::clone(c), Box::new(a.compose(inner))),
        }
    }

    /// d/dx of a one-variable expression.
    pub fn derivative(&self) -> Expr {
        self.partial(0)
    }

    /// Symbolic partial derivative with respect to variable `v`.
    pub fn partial(&self, v: usize) -> Expr {
        if !self.depends_on(v) {
            return Expr::Const(0.0);
        }
        match self {
            Expr::Const(_) => Expr::Const(0.0),
            Expr::X | Expr::Coord(_) => Expr::Const(1.0),
            Expr::Sum(ts) => Expr::sum(ts.iter().map(|t| t.partial(v)).collect()),
            Expr::Product(fs) => {
                let mut terms = Vec::new();
                for (i, f) in fs.iter().enumerate() {
                    if !f.depends_on(v) {
                        continue;
                    }
                    let mut factors: Vec<Expr> = Vec::with_capacity(fs.len());
                    factors.push(f.partial(v));
                    factors.extend(fs.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, g)| g.clone()));
                    terms.push(Expr::product(factors));
                }
                Expr::sum(terms)
            }
            Expr::Sub(a, b) => a.partial(v).sub(b.partial(v)),
            Expr::Div(a, b) => {
                if !b.depends_on(v) {
                    a.partial(v).div((**b).clone())
                } else {
                    let num = a.partial(v).mul((**b).clone()).sub((**a).clone().mul(b.partial(v)));
                    num.div((**b).clone().powf(2.0))
                }
            }
            Expr::Neg(a) => a.partial(v).neg(),
            Expr::Pow(a, p) => Expr::product(vec![Expr::Const(*p), (**a).clone().powf(p - 1.0), a.partial(v)]),
            Expr::Exp(a) => self.clone().mul(a.partial(v)),
            Expr::Log(a) => a.partial(v).mul((**a).clone().powf(-1.0)),
            Expr::Primitive(t, a) => t.integrand().compose(a).mul(a.partial(v)),
            Expr::Custom(c, a) => Expr::Custom(Arc::new(c.derivative_fn()), a.clone()).mul(a.partial(v)),
        }
    }

    /// Symbolic gradient over `n` coordinates.
    pub fn gradient(&self, n: usize) -> Vec<Expr> {
        (0..n).map(|v| self.partial(v)).collect()
    }

    /// Closed-form inverse of a one-variable expression whose dependence on
    /// `X` runs through a chain of invertible unary steps.
    ///
    /// Returns `None` when no closed form is known or `y` is outside the
    /// image of one of the steps. Even powers return the positive root.
    pub fn closed_inverse(&self, y: f64) -> Option<f64> {
        if !y.is_finite() {
            return None;
        }
        match self {
            Expr::X => Some(y),
            Expr::Sum(ts) => {
                let (dep, rest) = single_dependent(ts)?;
                let mut c = 0.0;
                for r in rest {
                    c += r.eval(&[]).ok()?;
                }
                dep.closed_inverse(y - c)
            }
            Expr::Product(fs) => {
                let (dep, rest) = single_dependent(fs)?;
                let mut c = 1.0;
                for r in rest {
                    c *= r.eval(&[]).ok()?;
                }
                if c == 0.0 {
                    return None;
                }
                dep.closed_inverse(y / c)
            }
            Expr::Neg(a) => a.closed_inverse(-y),
            Expr::Sub(a, b) => match (a.is_constant(), b.is_constant()) {
                (false, true) => a.closed_inverse(y + b.eval(&[]).ok()?),
                (true, false) => b.closed_inverse(a.eval(&[]).ok()? - y),
                _ => None,
            },
            Expr::Div(a, b) => match (a.is_constant(), b.is_constant()) {
                (false, true) => a.closed_inverse(y * b.eval(&[]).ok()?),
                (true, false) if y != 0.0 => b.closed_inverse(a.eval(&[]).ok()? / y),
                _ => None,
            },
            Expr::Pow(a, p) => {
                let r = if y >= 0.0 {
                    y.powf(1.0 / p)
                } else if is_integer(*p) && (*p as i64) % 2 != 0 {
                    -(-y).powf(1.0 / p)
                } else {
                    return None;
                };
                a.closed_inverse(r)
            }
            Expr::Exp(a) if y > 0.0 => a.closed_inverse(y.ln()),
            Expr::Log(a) => a.closed_inverse(y.exp()),
            Expr::Custom(c, a) => a.closed_inverse((c.inverse.as_ref()?)(y)),
            _ => None,
        }
    }

    /// Coefficients `(p, q)` when the one-variable expression is `p·x + q`.
    pub fn affine_coeffs(&self) -> Option<(f64, f64)> {
        match self {
            Expr::Const(c) => Some((0.0, *c)),
            Expr::X => Some((1.0, 0.0)),
            Expr::Sum(ts) => ts.iter().try_fold((0.0, 0.0), |(p, q), t| {
                let (a, b) = t.affine_coeffs()?;
                Some((p + a, q + b))
            }),
            Expr::Product(fs) => {
                let mut scale = 1.0;
                let mut lin: Option<(f64, f64)> = None;
                for f in fs {
                    let (a, b) = f.affine_coeffs()?;
                    if a == 0.0 {
                        scale *= b;
                    } else if lin.is_none() {
                        lin = Some((a, b));
                    } else {
                        return None;
                    }
                }
                let (a, b) = lin.unwrap_or((0.0, 1.0));
                Some((scale * a, scale * b))
            }
            Expr::Sub(x, y) => {
                let (a, b) = x.affine_coeffs()?;
                let (c, d) = y.affine_coeffs()?;
                Some((a - c, b - d))
            }
            Expr::Div(x, y) => {
                let (a, b) = x.affine_coeffs()?;
                let (c, d) = y.affine_coeffs()?;
                (c == 0.0 && d != 0.0).then(|| (a / d, b / d))
            }
            Expr::Neg(x) => x.affine_coeffs().map(|(a, b)| (-a, -b)),
            Expr::Pow(x, p) if *p == 1.0 => x.affine_coeffs(),
            _ => None,
        }
    }

    /// Coefficients `(k, m)` when the one-variable expression is `k·x^m`.
    pub fn monomial_coeffs(&self) -> Option<(f64, f64)> {
        match self {
            Expr::Const(c) => Some((*c, 0.0)),
            Expr::X => Some((1.0, 1.0)),
            Expr::Pow(x, p) => match x.monomial_coeffs()? {
                (k, m) if k > 0.0 || is_integer(*p) => Some((k.powf(*p), m * p)),
                _ => None,
            },
            Expr::Product(fs) => fs.iter().try_fold((1.0, 0.0), |(k, m), f| {
                let (a, b) = f.monomial_coeffs()?;
                Some((k * a, m + b))
            }),
            Expr::Div(x, y) => {
                let (a, b) = x.monomial_coeffs()?;
                let (c, d) = y.monomial_coeffs()?;
                (c != 0.0).then(|| (a / c, b - d))
            }
            Expr::Neg(x) => x.monomial_coeffs().map(|(k, m)| (-k, m)),
            _ => None,
        }
    }
}

fn single_dependent(ts: &[Expr]) -> Option<(&Expr, impl Iterator<Item = &Expr>)> {
    let mut dep = ts.iter().filter(|t| !t.is_constant());
    let d = dep.next()?;
    if dep.next().is_some() {
        return None;
    }
    Some((d, ts.iter().filter(|t| t.is_constant())))
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn list(f: &mut fmt::Formatter<'_>, op: &str, args: &[&Expr]) -> fmt::Result {
            write!(f, "({op}")?;
            for a in args {
                write!(f, " {a}")?;
            }
            write!(f, ")")
        }
        match self {
            Expr::Const(c) => write!(f, "{c}"),
            Expr::X => write!(f, "x"),
            Expr::Coord(i) => write!(f, "x{}", i + 1),
            Expr::Sum(ts) => list(f, "add", &ts.iter().collect::<Vec<_>>()),
            Expr::Product(ts) => list(f, "mul", &ts.iter().collect::<Vec<_>>()),
            Expr::Sub(a, b) => list(f, "sub", &[a, b]),
            Expr::Div(a, b) => list(f, "div", &[a, b]),
            Expr::Neg(a) => list(f, "neg", &[a]),
            Expr::Pow(a, p) => write!(f, "(pow {a} {p})"),
            Expr::Exp(a) => list(f, "exp", &[a]),
            Expr::Log(a) => list(f, "log", &[a]),
            Expr::Primitive(t, a) => write!(
                f,
                "(primitive {} {} {} {} {a})",
                t.integrand(),
                t.range().0,
                t.range().1,
                t.anchor()
            ),
            Expr::Custom(c, a) => write!(f, "(custom {} {a})", c.name),
        }
    }
}

impl std::str::FromStr for Expr {
    type Err = Error;

    fn from_str(s: &str) -> Result<Expr> {
        crate::expr_parse::parse(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd(f: &Expr, x: f64) -> f64 {
        let h = f64::EPSILON.cbrt() * x.abs().max(1.0);
        (f.eval1(x + h).unwrap() - f.eval1(x - h).unwrap()) / (2.0 * h)
    }

    #[test]
    fn eval_basic_primitives() {
        assert_eq!(Expr::X.eval1(2.0).unwrap(), 2.0);
        assert_eq!(Expr::X.powf(-1.0).eval1(4.0).unwrap(), 0.25);
        let e = Expr::product(vec![Expr::Const(1.0), Expr::X])
            .add(Expr::Const(0.0))
            .exp();
        assert_eq!(e.eval1(0.0).unwrap(), 1.0);
    }

    #[test]
    fn eval_names_offending_primitive() {
        match Expr::X.ln().eval1(-1.0) {
            Err(Error::ExprDomain { primitive, .. }) => assert_eq!(primitive, "log"),
            other => panic!("unexpected {other:?}"),
        }
        match Expr::X.powf(0.5).eval1(-2.0) {
            Err(Error::ExprDomain { primitive, .. }) => assert_eq!(primitive, "pow"),
            other => panic!("unexpected {other:?}"),
        }
        // integer exponents accept negative bases
        assert_eq!(Expr::X.powf(3.0).eval1(-2.0).unwrap(), -8.0);
        match Expr::Const(1.0).div(Expr::X).eval1(0.0) {
            Err(Error::ExprDomain { primitive, .. }) => assert_eq!(primitive, "div"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn derivative_examples() {
        let sq = Expr::X.powf(2.0);
        assert_eq!(sq.derivative().eval1(3.0).unwrap(), 6.0);
        let dlog = Expr::X.ln().derivative();
        assert!(matches!(dlog, Expr::Pow(_, p) if p == -1.0));
        assert_eq!(dlog.eval1(2.0).unwrap(), 0.5);
        let e = Expr::X.exp().derivative().eval1(1.0).unwrap();
        assert!((e - std::f64::consts::E).abs() < 1e-15);
    }

    #[test]
    fn derivative_of_quotient_and_composition() {
        // f = exp(2x) / (1 + x^2)
        let f = Expr::Const(2.0)
            .mul(Expr::X)
            .exp()
            .div(Expr::Const(1.0).add(Expr::X.powf(2.0)));
        for &x in &[-1.3, 0.2, 0.9, 2.5] {
            let d = f.derivative().eval1(x).unwrap();
            assert!((d - fd(&f, x)).abs() <= 1e-6 * d.abs().max(1.0), "x={x}");
        }
    }

    #[test]
    fn custom_functions_use_supplied_derivative() {
        let sin = CustomFn::new("sin", f64::sin).with_derivative(CustomFn::new("cos", f64::cos));
        let e = Expr::custom(sin, Expr::Const(3.0).mul(Expr::X));
        let d = e.derivative().eval1(0.4).unwrap();
        assert!((d - 3.0 * (1.2f64).cos()).abs() < 1e-14);
        // no derivative supplied: finite differences stand in
        let g = Expr::custom(CustomFn::new("cube", |x| x * x * x), Expr::X);
        assert!((g.derivative().eval1(2.0).unwrap() - 12.0).abs() < 1e-6);
    }

    #[test]
    fn partials_of_nd_expression() {
        // eta = x1 * x2^2 - log(x3)
        let e = Expr::coord(0).mul(Expr::coord(1).powf(2.0)).sub(Expr::coord(2).ln());
        let g: Vec<f64> = e
            .gradient(3)
            .iter()
            .map(|d| d.eval(&[1.0, 2.0, 4.0]).unwrap())
            .collect();
        assert_eq!(g, vec![4.0, 4.0, -0.25]);
    }

    #[test]
    fn closed_inverses() {
        let two_exp = Expr::Const(2.0).mul(Expr::X.exp());
        assert_eq!(two_exp.closed_inverse(2.0), Some(0.0));
        assert_eq!(Expr::X.powf(2.0).closed_inverse(9.0), Some(3.0));
        let aff = Expr::Const(3.0).mul(Expr::X).add(Expr::Const(1.0));
        assert_eq!(aff.closed_inverse(7.0), Some(2.0));
        assert!(Expr::X.ln().closed_inverse(0.0).unwrap() == 1.0);
        assert_eq!(Expr::X.mul(Expr::X.exp()).closed_inverse(1.0), None);
    }

    #[test]
    fn affine_and_monomial_recognition() {
        let e: Expr = "(div x 3)".parse().unwrap();
        assert_eq!(e.affine_coeffs(), Some((1.0 / 3.0, 0.0)));
        let e: Expr = "(add (mul 2 x) 1)".parse().unwrap();
        assert_eq!(e.affine_coeffs(), Some((2.0, 1.0)));
        let e: Expr = "(mul 3 (pow x 2))".parse().unwrap();
        assert_eq!(e.affine_coeffs(), None);
        assert_eq!(e.monomial_coeffs(), Some((3.0, 2.0)));
        let e: Expr = "(div 2 x)".parse().unwrap();
        assert_eq!(e.monomial_coeffs(), Some((2.0, -1.0)));
    }
}
