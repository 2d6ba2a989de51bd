use std::fmt;

use super::Expr;

// Binding strength; an operand is parenthesized when its own level is
// below the minimum its position requires.
const SUM: u8 = 1;
const PRODUCT: u8 = 2;
const UNARY: u8 = 3;
const POWER: u8 = 4;
const ATOM: u8 = 5;

fn level(e: &Expr) -> u8 {
    match e {
        Expr::Add(..) | Expr::Sub(..) => SUM,
        Expr::Mul(..) | Expr::Div(..) => PRODUCT,
        Expr::Neg(_) => UNARY,
        Expr::Const(c) if c.is_sign_negative() => UNARY,
        Expr::Pow(..) => POWER,
        Expr::Const(_) | Expr::Var(_) | Expr::Call(..) => ATOM,
    }
}

pub(crate) fn format_number(c: f64) -> String {
    let a = c.abs();
    if a == 0.0 || (1e-4..1e15).contains(&a) {
        format!("{c}")
    } else {
        format!("{c:e}")
    }
}

pub(super) fn write_expr(f: &mut fmt::Formatter<'_>, e: &Expr, min: u8) -> fmt::Result {
    let parens = level(e) < min;
    if parens {
        f.write_str("(")?;
    }
    match e {
        Expr::Const(c) => f.write_str(&format_number(*c))?,
        Expr::Var(v) => f.write_str(&v.name)?,
        Expr::Neg(a) => {
            f.write_str("-")?;
            write_expr(f, a, UNARY)?;
        }
        Expr::Add(a, b) | Expr::Sub(a, b) => {
            write_expr(f, a, SUM)?;
            f.write_str(if matches!(e, Expr::Add(..)) { " + " } else { " - " })?;
            write_expr(f, b, PRODUCT)?;
        }
        Expr::Mul(a, b) | Expr::Div(a, b) => {
            write_expr(f, a, PRODUCT)?;
            f.write_str(if matches!(e, Expr::Mul(..)) { "*" } else { "/" })?;
            write_expr(f, b, UNARY)?;
        }
        Expr::Pow(a, k) => {
            write_expr(f, a, ATOM)?;
            f.write_str("^")?;
            f.write_str(&format_number(*k))?;
        }
        Expr::Call(func, a) => {
            f.write_str(func.name())?;
            f.write_str("(")?;
            write_expr(f, a, 0)?;
            f.write_str(")")?;
        }
    }
    if parens {
        f.write_str(")")?;
    }
    Ok(())
}
