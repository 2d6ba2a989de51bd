use std::fmt;

use super::{Expr, Func};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalErrorKind {
    /// Argument outside the real domain of a function (ln, sqrt, fractional power).
    Domain,
    DivisionByZero,
    /// Point does not assign a value to a referenced coordinate.
    Unbound,
}

/// Numerical failure while evaluating an expression; carries the offending node.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalError {
    pub kind: EvalErrorKind,
    pub node: String,
    pub argument: f64,
}

impl fmt::Display for EvalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            EvalErrorKind::Domain => {
                write!(f, "domain error in `{}` (argument {})", self.node, self.argument)
            }
            EvalErrorKind::DivisionByZero => write!(f, "division by zero in `{}`", self.node),
            EvalErrorKind::Unbound => write!(f, "no value supplied for `{}`", self.node),
        }
    }
}

impl std::error::Error for EvalError {}

pub(crate) fn apply_func(func: Func, x: f64) -> Result<f64, EvalErrorKind> {
    match func {
        Func::Sin => Ok(x.sin()),
        Func::Cos => Ok(x.cos()),
        Func::Exp => Ok(x.exp()),
        Func::Ln if x > 0.0 => Ok(x.ln()),
        Func::Sqrt if x >= 0.0 => Ok(x.sqrt()),
        Func::Ln | Func::Sqrt => Err(EvalErrorKind::Domain),
    }
}

pub(crate) fn apply_pow(base: f64, exponent: f64) -> Result<f64, EvalErrorKind> {
    if base == 0.0 && exponent < 0.0 {
        return Err(EvalErrorKind::DivisionByZero);
    }
    if base < 0.0 && exponent.fract() != 0.0 {
        return Err(EvalErrorKind::Domain);
    }
    if exponent.fract() == 0.0 && exponent.abs() <= i32::MAX as f64 {
        Ok(base.powi(exponent as i32))
    } else {
        Ok(base.powf(exponent))
    }
}

fn apply_div(a: f64, b: f64) -> Result<f64, EvalErrorKind> {
    if b == 0.0 {
        Err(EvalErrorKind::DivisionByZero)
    } else {
        Ok(a / b)
    }
}

/// Value of a variable-free expression, if it has one.
pub(crate) fn fold_constant(e: &Expr) -> Option<f64> {
    if e.max_var_index().is_some() {
        return None;
    }
    e.evaluate(&[]).ok()
}

impl Expr {
    /// Evaluate at `point`, where `point[0]` is t and `point[i]` is the i-th
    /// spatial coordinate.
    pub fn evaluate(&self, point: &[f64]) -> Result<f64, EvalError> {
        let fail = |kind, argument| EvalError {
            kind,
            node: self.to_string(),
            argument,
        };
        match self {
            Expr::Const(c) => Ok(*c),
            Expr::Var(v) => point
                .get(v.index)
                .copied()
                .ok_or_else(|| fail(EvalErrorKind::Unbound, f64::NAN)),
            Expr::Neg(a) => Ok(-a.evaluate(point)?),
            Expr::Add(a, b) => Ok(a.evaluate(point)? + b.evaluate(point)?),
            Expr::Sub(a, b) => Ok(a.evaluate(point)? - b.evaluate(point)?),
            Expr::Mul(a, b) => Ok(a.evaluate(point)? * b.evaluate(point)?),
            Expr::Div(a, b) => {
                let (x, y) = (a.evaluate(point)?, b.evaluate(point)?);
                apply_div(x, y).map_err(|k| fail(k, y))
            }
            Expr::Pow(a, k) => {
                let x = a.evaluate(point)?;
                apply_pow(x, *k).map_err(|kind| fail(kind, x))
            }
            Expr::Call(func, a) => {
                let x = a.evaluate(point)?;
                apply_func(*func, x).map_err(|kind| fail(kind, x))
            }
        }
    }

    /// Evaluate with coordinates looked up by name; `t` is the time coordinate.
    pub fn evaluate_named(&self, space: &super::SpaceSpec, values: &[(&str, f64)]) -> Result<f64, EvalError> {
        let mut point = vec![f64::NAN; space.extended_dim()];
        let mut bound = vec![false; space.extended_dim()];
        for (name, value) in values {
            if let Some(i) = space.index_of(name) {
                point[i] = *value;
                bound[i] = true;
            }
        }
        if let Some(i) = (0..point.len()).find(|&i| !bound[i] && self.depends_on(i)) {
            return Err(EvalError {
                kind: EvalErrorKind::Unbound,
                node: space.name(i).to_string(),
                argument: f64::NAN,
            });
        }
        self.evaluate(&point)
    }

    pub fn compile(&self) -> Program {
        let mut ops = Vec::new();
        emit(self, &mut ops);
        let depth = max_depth(&ops);
        Program {
            ops,
            depth,
            source: self.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Op {
    Const(f64),
    Var(usize),
    Neg,
    Add,
    Sub,
    Mul,
    Div,
    Pow(f64),
    Call(Func),
}

fn emit(e: &Expr, ops: &mut Vec<Op>) {
    match e {
        Expr::Const(c) => ops.push(Op::Const(*c)),
        Expr::Var(v) => ops.push(Op::Var(v.index)),
        Expr::Neg(a) => {
            emit(a, ops);
            ops.push(Op::Neg);
        }
        Expr::Pow(a, k) => {
            emit(a, ops);
            ops.push(Op::Pow(*k));
        }
        Expr::Call(f, a) => {
            emit(a, ops);
            ops.push(Op::Call(*f));
        }
        Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
            emit(a, ops);
            emit(b, ops);
            ops.push(match e {
                Expr::Add(..) => Op::Add,
                Expr::Sub(..) => Op::Sub,
                Expr::Mul(..) => Op::Mul,
                _ => Op::Div,
            });
        }
    }
}

fn max_depth(ops: &[Op]) -> usize {
    let (mut depth, mut max) = (0usize, 0usize);
    for op in ops {
        match op {
            Op::Const(_) | Op::Var(_) => depth += 1,
            Op::Add | Op::Sub | Op::Mul | Op::Div => depth -= 1,
            _ => {}
        }
        max = max.max(depth);
    }
    max
}

/// Flat postfix program compiled from an expression. Evaluates to the
/// same value as the tree, without recursion or allocation per node.
#[derive(Debug, Clone)]
pub struct Program {
    ops: Vec<Op>,
    depth: usize,
    source: Expr,
}

impl Program {
    pub fn source(&self) -> &Expr {
        &self.source
    }

    pub fn eval(&self, point: &[f64]) -> Result<f64, EvalError> {
        let mut stack = Vec::with_capacity(self.depth);
        self.eval_with(point, &mut stack)
    }

    /// Evaluate using a caller-provided scratch stack.
    pub fn eval_with(&self, point: &[f64], stack: &mut Vec<f64>) -> Result<f64, EvalError> {
        stack.clear();
        for op in &self.ops {
            let ok = match *op {
                Op::Const(c) => {
                    stack.push(c);
                    true
                }
                Op::Var(i) => match point.get(i) {
                    Some(&v) => {
                        stack.push(v);
                        true
                    }
                    None => false,
                },
                Op::Neg => {
                    let a = stack.pop().unwrap_or_default();
                    stack.push(-a);
                    true
                }
                Op::Add | Op::Sub | Op::Mul | Op::Div => {
                    let b = stack.pop().unwrap_or_default();
                    let a = stack.pop().unwrap_or_default();
                    let r = match *op {
                        Op::Add => Ok(a + b),
                        Op::Sub => Ok(a - b),
                        Op::Mul => Ok(a * b),
                        _ => apply_div(a, b),
                    };
                    match r {
                        Ok(v) => {
                            stack.push(v);
                            true
                        }
                        Err(_) => false,
                    }
                }
                Op::Pow(k) => {
                    let a = stack.pop().unwrap_or_default();
                    match apply_pow(a, k) {
                        Ok(v) => {
                            stack.push(v);
                            true
                        }
                        Err(_) => false,
                    }
                }
                Op::Call(f) => {
                    let a = stack.pop().unwrap_or_default();
                    match apply_func(f, a) {
                        Ok(v) => {
                            stack.push(v);
                            true
                        }
                        Err(_) => false,
                    }
                }
            };
            if !ok {
                // re-run on the tree to recover the offending node
                return Err(self.source.evaluate(point).err().unwrap_or(EvalError {
                    kind: EvalErrorKind::Domain,
                    node: self.source.to_string(),
                    argument: f64::NAN,
                }));
            }
        }
        Ok(stack.pop().unwrap_or_default())
    }
}

#[cfg(test)]
mod tests {
    use super::super::{parse_expression, SpaceSpec};
    use super::*;

    #[test]
    fn identity() {
        let s = SpaceSpec::new(&["q"]).unwrap();
        let q = parse_expression("q", &s).unwrap();
        assert_eq!(q.evaluate(&[0.0, 2.0]).unwrap(), 2.0);
        assert_eq!(q.evaluate_named(&s, &[("q", 2.0)]).unwrap(), 2.0);
    }

    #[test]
    fn log_of_negative_is_domain_error() {
        let s = SpaceSpec::new(&["q"]).unwrap();
        let e = parse_expression("1 + ln(q)", &s).unwrap();
        let err = e.evaluate(&[0.0, -1.0]).unwrap_err();
        assert_eq!(err.kind, EvalErrorKind::Domain);
        assert_eq!(err.node, "ln(q)");
        assert_eq!(err.argument, -1.0);
        let err = e.compile().eval(&[0.0, -1.0]).unwrap_err();
        assert_eq!(err.node, "ln(q)");
    }

    #[test]
    fn other_numerical_failures() {
        let s = SpaceSpec::new(&["q"]).unwrap();
        let cases = [
            ("1/q", 0.0, EvalErrorKind::DivisionByZero),
            ("sqrt(q)", -4.0, EvalErrorKind::Domain),
            ("q^0.5", -4.0, EvalErrorKind::Domain),
            ("q^-2", 0.0, EvalErrorKind::DivisionByZero),
            ("ln(q)", 0.0, EvalErrorKind::Domain),
        ];
        for (text, q, kind) in cases {
            let e = parse_expression(text, &s).unwrap();
            assert_eq!(e.evaluate(&[0.0, q]).unwrap_err().kind, kind, "{text}");
            assert_eq!(e.compile().eval(&[0.0, q]).unwrap_err().kind, kind, "{text}");
        }
        assert_eq!(
            parse_expression("(-8)^3", &s).unwrap().evaluate(&[]).unwrap(),
            -512.0
        );
    }

    #[test]
    fn unbound_coordinate() {
        let s = SpaceSpec::new(&["q", "p"]).unwrap();
        let e = parse_expression("q*p", &s).unwrap();
        let err = e.evaluate_named(&s, &[("q", 1.0)]).unwrap_err();
        assert_eq!(err.kind, EvalErrorKind::Unbound);
        assert_eq!(err.node, "p");
        assert_eq!(e.evaluate(&[0.0, 1.0]).unwrap_err().kind, EvalErrorKind::Unbound);
    }

    #[test]
    fn compiled_matches_tree() {
        let s = SpaceSpec::new(&["x", "y"]).unwrap();
        let e = parse_expression("exp(-x^2)*cos(t*y) - sqrt(1+y^2)/(2+sin(x)) + x^2.5", &s).unwrap();
        let prog = e.compile();
        for &(t, x, y) in &[(0.0, 0.3, -0.7), (1.3, 2.0, 0.1), (-4.0, 0.01, 9.0)] {
            let p = [t, x, y];
            assert_eq!(prog.eval(&p).unwrap(), e.evaluate(&p).unwrap());
        }
    }
}
