use super::{Expr, Func};

impl Expr {
    /// Exact partial derivative with respect to coordinate `index` (0 = t).
    ///
    /// `d/dx x^a` is emitted as `a*x^(a-1)` for any real `a`; for
    /// non-integer `a` the result is only defined where `x > 0`, which is
    /// checked when it is evaluated.
    pub fn differentiate(&self, index: usize) -> Expr {
        match self {
            Expr::Const(_) => Expr::zero(),
            Expr::Var(v) => {
                if v.index == index {
                    Expr::one()
                } else {
                    Expr::zero()
                }
            }
            Expr::Neg(a) => Expr::neg(a.differentiate(index)),
            Expr::Add(a, b) => Expr::add(a.differentiate(index), b.differentiate(index)),
            Expr::Sub(a, b) => Expr::sub(a.differentiate(index), b.differentiate(index)),
            Expr::Mul(a, b) => Expr::add(
                Expr::mul(a.differentiate(index), (**b).clone()),
                Expr::mul((**a).clone(), b.differentiate(index)),
            ),
            Expr::Div(a, b) => {
                let da = a.differentiate(index);
                let db = b.differentiate(index);
                if db.is_zero() {
                    return Expr::div(da, (**b).clone());
                }
                Expr::div(
                    Expr::sub(Expr::mul(da, (**b).clone()), Expr::mul((**a).clone(), db)),
                    Expr::pow((**b).clone(), 2.0),
                )
            }
            Expr::Pow(a, k) => {
                let da = a.differentiate(index);
                if da.is_zero() {
                    return Expr::zero();
                }
                Expr::mul(
                    Expr::mul(Expr::constant(*k), Expr::pow((**a).clone(), k - 1.0)),
                    da,
                )
            }
            Expr::Call(func, a) => {
                let da = a.differentiate(index);
                if da.is_zero() {
                    return Expr::zero();
                }
                let arg = (**a).clone();
                let outer = match func {
                    Func::Sin => Expr::call(Func::Cos, arg),
                    Func::Cos => Expr::neg(Expr::call(Func::Sin, arg)),
                    Func::Exp => self.clone(),
                    Func::Ln => return Expr::div(da, arg),
                    Func::Sqrt => return Expr::div(da, Expr::mul(Expr::constant(2.0), self.clone())),
                };
                Expr::mul(outer, da)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::{parse_expression, SpaceSpec};

    fn space() -> SpaceSpec {
        SpaceSpec::new(&["q", "p"]).unwrap()
    }

    #[test]
    fn power_rule_on_oscillator() {
        let s = space();
        let h = parse_expression("p^2/2 + q^2/2", &s).unwrap();
        let dq = h.differentiate(1);
        assert_eq!(dq.to_string(), "2*q/2");
        assert_eq!(dq.evaluate(&[0.0, 1.7, -3.0]).unwrap(), 1.7);
    }

    #[test]
    fn no_time_dependence() {
        let s = space();
        let e = parse_expression("q*p", &s).unwrap();
        assert!(e.differentiate(0).is_zero());
    }

    #[test]
    fn linear_in_x() {
        let s = SpaceSpec::new(&["x"]).unwrap();
        let e = parse_expression("sin(t)*x", &s).unwrap();
        assert_eq!(e.differentiate(1).to_string(), "sin(t)");
    }

    #[test]
    fn power_rule_evaluates() {
        let s = space();
        let e = parse_expression("p^2/2", &s).unwrap();
        assert_eq!(e.differentiate(2).evaluate(&[0.0, 0.0, 5.0]).unwrap(), 5.0);
    }

    #[test]
    fn chain_rule_functions() {
        let s = space();
        let point = [0.3, 0.8, 1.9];
        let cases: [(&str, f64); 5] = [
            ("sin(q*p)", (0.8f64 * 1.9).cos() * 1.9),
            ("cos(q^2)", -(0.64f64).sin() * 1.6),
            ("exp(3*q)", 3.0 * (2.4f64).exp()),
            ("ln(q)", 1.0 / 0.8),
            ("sqrt(q)", 0.5 / 0.8f64.sqrt()),
        ];
        for (text, expected) in cases {
            let d = parse_expression(text, &s).unwrap().differentiate(1);
            let v = d.evaluate(&point).unwrap();
            assert!(
                (v - expected).abs() <= 1e-14 * expected.abs(),
                "{text}: {v} vs {expected}"
            );
        }
    }

    #[test]
    fn quotient_rule() {
        let s = space();
        let d = parse_expression("q/(1+q^2)", &s).unwrap().differentiate(1);
        let q: f64 = 0.7;
        let expected = (1.0 - q * q) / (1.0 + q * q).powi(2);
        assert!((d.evaluate(&[0.0, q, 0.0]).unwrap() - expected).abs() < 1e-15);
    }
}
