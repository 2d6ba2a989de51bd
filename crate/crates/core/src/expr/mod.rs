//! Scalar fields on extended phase space.
//!
//! An [`Expr`] is an immutable tree over the coordinates `(t, x1..xn)` of a
//! [`SpaceSpec`]. Variables carry their coordinate index (0 is always `t`)
//! together with the name they were declared under, so an expression can be
//! printed and evaluated without access to the space it came from.

mod diff;
mod eval;
mod parse;
mod print;

use std::fmt;
use std::sync::Arc;

pub use eval::{EvalError, EvalErrorKind, Program};
pub use parse::{parse_expression, ParseError};

/// Name of the reserved time coordinate.
pub const TIME: &str = "t";

/// Coordinate layout of an extended phase space `R x M`, `dim M = n`.
///
/// Index 0 is time; spatial coordinates occupy indices `1..=n`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpaceSpec {
    names: Arc<[String]>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SpaceError {
    #[error("phase space must have at least one coordinate")]
    Empty,
    #[error("coordinate name `t` is reserved for time")]
    ReservedName,
    #[error("duplicate coordinate name `{0}`")]
    Duplicate(String),
    #[error("invalid coordinate name `{0}`")]
    InvalidName(String),
}

impl SpaceSpec {
    pub fn new<S: AsRef<str>>(names: &[S]) -> Result<Self, SpaceError> {
        if names.is_empty() {
            return Err(SpaceError::Empty);
        }
        let mut out: Vec<String> = Vec::with_capacity(names.len());
        for name in names {
            let name = name.as_ref();
            if name == TIME {
                return Err(SpaceError::ReservedName);
            }
            if !is_identifier(name) || parse::is_reserved(name) {
                return Err(SpaceError::InvalidName(name.to_string()));
            }
            if out.iter().any(|n| n == name) {
                return Err(SpaceError::Duplicate(name.to_string()));
            }
            out.push(name.to_string());
        }
        Ok(Self { names: out.into() })
    }

    /// `x1..xn`, or `x, y, z` when `n == 3`.
    pub fn numbered(prefix: &str, n: usize) -> Result<Self, SpaceError> {
        let names: Vec<String> = (1..=n).map(|i| format!("{prefix}{i}")).collect();
        Self::new(&names)
    }

    /// Dimension of the phase space `M` (time excluded).
    pub fn n(&self) -> usize {
        self.names.len()
    }

    /// Dimension of the extended space, `n + 1`.
    pub fn extended_dim(&self) -> usize {
        self.names.len() + 1
    }

    pub fn spatial_names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, index: usize) -> &str {
        if index == 0 {
            TIME
        } else {
            &self.names[index - 1]
        }
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        if name == TIME {
            return Some(0);
        }
        self.names.iter().position(|n| n == name).map(|i| i + 1)
    }

    pub fn var(&self, name: &str) -> Option<Expr> {
        self.index_of(name)
            .map(|index| Expr::Var(Variable::new(index, name)))
    }

    /// Variable for coordinate `index` (0 = t).
    pub fn var_at(&self, index: usize) -> Expr {
        Expr::Var(Variable::new(index, self.name(index)))
    }
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// A coordinate reference inside an expression.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Variable {
    pub index: usize,
    pub name: Arc<str>,
}

impl Variable {
    pub fn new(index: usize, name: &str) -> Self {
        Self {
            index,
            name: name.into(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Ln,
    Sqrt,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sqrt => "sqrt",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "ln" => Func::Ln,
            "sqrt" => Func::Sqrt,
            _ => return None,
        })
    }
}

/// Expression tree. Exponents of `Pow` are constants.
#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(Variable),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, f64),
    Call(Func, Box<Expr>),
}

impl Default for Expr {
    fn default() -> Self {
        Expr::zero()
    }
}

// Smart constructors. They fold constants and apply the identities
// 0*x = 0, 1*x = x, x+0 = x, x^1 = x, x^0 = 1 and nothing else.
impl Expr {
    pub fn zero() -> Self {
        Expr::Const(0.0)
    }

    pub fn one() -> Self {
        Expr::Const(1.0)
    }

    pub fn constant(c: f64) -> Self {
        Expr::Const(c)
    }

    pub fn as_const(&self) -> Option<f64> {
        match self {
            Expr::Const(c) => Some(*c),
            _ => None,
        }
    }

    /// True only for a literal zero constant; no symbolic reasoning.
    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Const(c) if *c == 0.0)
    }

    pub fn is_one(&self) -> bool {
        matches!(self, Expr::Const(c) if *c == 1.0)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn neg(a: Expr) -> Expr {
        match a {
            Expr::Const(c) => Expr::Const(-c),
            Expr::Neg(inner) => *inner,
            a => Expr::Neg(Box::new(a)),
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn add(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Expr::Const(x + y),
            _ if a.is_zero() => b,
            _ if b.is_zero() => a,
            _ => Expr::Add(Box::new(a), Box::new(b)),
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn sub(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Expr::Const(x - y),
            _ if b.is_zero() => a,
            _ if a.is_zero() => Expr::neg(b),
            _ => Expr::Sub(Box::new(a), Box::new(b)),
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn mul(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Expr::Const(x * y),
            _ if a.is_zero() || b.is_zero() => Expr::zero(),
            _ if a.is_one() => b,
            _ if b.is_one() => a,
            (Some(-1.0), _) => Expr::neg(b),
            (_, Some(-1.0)) => Expr::neg(a),
            _ => Expr::Mul(Box::new(a), Box::new(b)),
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn div(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) if y != 0.0 => Expr::Const(x / y),
            _ if b.is_one() => a,
            _ if a.is_zero() && !b.is_zero() => Expr::zero(),
            _ => Expr::Div(Box::new(a), Box::new(b)),
        }
    }

    pub fn pow(base: Expr, exponent: f64) -> Expr {
        if exponent == 1.0 {
            return base;
        }
        if exponent == 0.0 {
            return Expr::one();
        }
        if let Some(b) = base.as_const() {
            if let Ok(v) = eval::apply_pow(b, exponent) {
                return Expr::Const(v);
            }
        }
        Expr::Pow(Box::new(base), exponent)
    }

    pub fn call(func: Func, arg: Expr) -> Expr {
        if let Some(c) = arg.as_const() {
            if let Ok(v) = eval::apply_func(func, c) {
                return Expr::Const(v);
            }
        }
        Expr::Call(func, Box::new(arg))
    }

    /// Largest coordinate index referenced, if any.
    pub fn max_var_index(&self) -> Option<usize> {
        match self {
            Expr::Const(_) => None,
            Expr::Var(v) => Some(v.index),
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Call(_, a) => a.max_var_index(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.max_var_index().max(b.max_var_index())
            }
        }
    }

    /// Whether coordinate `index` occurs anywhere in the tree.
    pub fn depends_on(&self, index: usize) -> bool {
        match self {
            Expr::Const(_) => false,
            Expr::Var(v) => v.index == index,
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Call(_, a) => a.depends_on(index),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.depends_on(index) || b.depends_on(index)
            }
        }
    }

    /// Number of nodes in the tree.
    pub fn size(&self) -> usize {
        match self {
            Expr::Const(_) | Expr::Var(_) => 1,
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Call(_, a) => 1 + a.size(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => 1 + a.size() + b.size(),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        print::write_expr(f, self, 0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn space_rejects_reserved_and_duplicate_names() {
        assert_eq!(SpaceSpec::new(&["t", "x"]), Err(SpaceError::ReservedName));
        assert_eq!(
            SpaceSpec::new(&["x", "x"]),
            Err(SpaceError::Duplicate("x".into()))
        );
        assert!(matches!(
            SpaceSpec::new(&["sin"]),
            Err(SpaceError::InvalidName(_))
        ));
        assert!(matches!(SpaceSpec::new(&["1x"]), Err(SpaceError::InvalidName(_))));
        assert_eq!(SpaceSpec::new::<&str>(&[]), Err(SpaceError::Empty));
    }

    #[test]
    fn space_indexing() {
        let s = SpaceSpec::new(&["q", "p"]).unwrap();
        assert_eq!(s.n(), 2);
        assert_eq!(s.index_of("t"), Some(0));
        assert_eq!(s.index_of("q"), Some(1));
        assert_eq!(s.index_of("p"), Some(2));
        assert_eq!(s.index_of("w"), None);
        assert_eq!(s.name(0), "t");
        assert_eq!(s.name(2), "p");
    }

    #[test]
    fn smart_constructors_fold() {
        let x = Expr::Var(Variable::new(1, "x"));
        assert_eq!(Expr::mul(Expr::zero(), x.clone()), Expr::zero());
        assert_eq!(Expr::add(x.clone(), Expr::zero()), x);
        assert_eq!(Expr::pow(x.clone(), 1.0), x);
        assert_eq!(Expr::pow(x.clone(), 0.0), Expr::one());
        assert_eq!(
            Expr::add(Expr::constant(2.0), Expr::constant(3.0)),
            Expr::Const(5.0)
        );
        assert_eq!(Expr::neg(Expr::neg(x.clone())), x);
        assert_eq!(Expr::call(Func::Sin, Expr::zero()), Expr::zero());
        // ln(-1) is not folded: the domain error must surface at evaluation
        assert!(matches!(
            Expr::call(Func::Ln, Expr::constant(-1.0)),
            Expr::Call(Func::Ln, _)
        ));
    }
}
