#![allow(dead_code)]

use std::collections::BTreeMap;

use proptest::prelude::*;
use vortexlines::expr::{Expr, Func, SpaceSpec};
use vortexlines::exterior::{increasing_tuples, Form};

pub fn space(n: usize) -> SpaceSpec {
    SpaceSpec::numbered("x", n).unwrap()
}

/// Smooth expressions in `t, x1..xn` built from polynomials, sin, cos and a
/// damped exp, so every point of a bounded box evaluates.
pub fn expr_strategy(n: usize) -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        (-2.0f64..2.0).prop_map(|c| Expr::constant((c * 8.0).round() / 8.0)),
        (0..=n).prop_map(move |i| space(n).var_at(i)),
    ];
    leaf.prop_recursive(3, 16, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::add(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::sub(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::mul(a, b)),
            (inner.clone(), 2u32..4).prop_map(|(a, k)| Expr::pow(a, k as f64)),
            inner.clone().prop_map(|a| Expr::call(Func::Sin, a)),
            inner.clone().prop_map(|a| Expr::call(Func::Cos, a)),
            inner.prop_map(|a| Expr::call(
                Func::Exp,
                Expr::mul(Expr::constant(0.25), Expr::call(Func::Sin, a))
            )),
        ]
    })
}

/// A form on `space(n)` of the given degree (dt allowed) with up to four terms.
pub fn form_strategy(n: usize, degree: usize) -> impl Strategy<Value = Form> {
    let keys = increasing_tuples(0, n, degree);
    let count = keys.len();
    proptest::collection::vec((0..count, expr_strategy(n)), 1..=4.min(count.max(1))).prop_map(move |terms| {
        let s = space(n);
        let mut f = Form::zero(&s, degree);
        for (i, e) in terms {
            f.add_term(&keys[i], e).unwrap();
        }
        f
    })
}

/// Spatial form (no dt) of the given degree.
pub fn spatial_form_strategy(n: usize, degree: usize) -> impl Strategy<Value = Form> {
    let keys = increasing_tuples(1, n, degree);
    let count = keys.len();
    proptest::collection::vec((0..count, expr_strategy(n)), 1..=4.min(count.max(1))).prop_map(move |terms| {
        let s = space(n);
        let mut f = Form::zero(&s, degree);
        for (i, e) in terms {
            f.add_term(&keys[i], e).unwrap();
        }
        f
    })
}

/// `(n, degree)` with `n <= 5` and `degree <= n + 1`.
pub fn dims() -> impl Strategy<Value = (usize, usize)> {
    (2usize..=5).prop_flat_map(|n| (Just(n), 0..=n + 1))
}

pub fn point_strategy(n: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-1.5f64..1.5, n + 1)
}

/// Largest coefficient difference between two forms at `point`, relative
/// to the largest coefficient of either.
pub fn relative_gap(a: &Form, b: &Form, point: &[f64]) -> f64 {
    let ea = a.evaluate(point).unwrap();
    let eb = b.evaluate(point).unwrap();
    let mut keys: Vec<&Vec<usize>> = ea.keys().chain(eb.keys()).collect();
    keys.sort();
    keys.dedup();
    let scale = ea.values().chain(eb.values()).fold(1.0f64, |m, v| m.max(v.abs()));
    keys.iter()
        .map(|k| (ea.get(*k).unwrap_or(&0.0) - eb.get(*k).unwrap_or(&0.0)).abs())
        .fold(0.0, f64::max)
        / scale
}

/// Evaluate a form with numeric coefficients on `vectors` (extended
/// coordinates) through the determinant formula.
pub fn eval_on_vectors(coeffs: &BTreeMap<Vec<usize>, f64>, vectors: &[Vec<f64>]) -> f64 {
    coeffs
        .iter()
        .map(|(key, c)| {
            let m: Vec<Vec<f64>> = vectors
                .iter()
                .map(|v| key.iter().map(|&i| v[i]).collect())
                .collect();
            c * det(&m)
        })
        .sum()
}

/// Leibniz-formula determinant; fine for the tiny sizes used here.
pub fn det(m: &[Vec<f64>]) -> f64 {
    let k = m.len();
    if k == 0 {
        return 1.0;
    }
    permutations(k)
        .into_iter()
        .map(|(perm, sign)| sign * (0..k).map(|i| m[i][perm[i]]).product::<f64>())
        .sum()
}

/// All permutations of `0..k` with their signs.
pub fn permutations(k: usize) -> Vec<(Vec<usize>, f64)> {
    fn rec(prefix: &mut Vec<usize>, left: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if left.is_empty() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..left.len() {
            let x = left.remove(i);
            prefix.push(x);
            rec(prefix, left, out);
            prefix.pop();
            left.insert(i, x);
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut (0..k).collect(), &mut out);
    out.into_iter()
        .map(|p| {
            let inversions = (0..k)
                .flat_map(|i| (i + 1..k).map(move |j| (i, j)))
                .filter(|&(i, j)| p[i] > p[j])
                .count();
            let sign = if inversions % 2 == 0 { 1.0 } else { -1.0 };
            (p, sign)
        })
        .collect()
}

/// Polynomial `sum c * t^e0 * x1^e1 ...` with an explicit gradient oracle.
#[derive(Debug, Clone)]
pub struct Poly {
    pub terms: Vec<(f64, Vec<u32>)>,
}

impl Poly {
    pub fn strategy(n: usize, with_time: bool) -> impl Strategy<Value = Poly> {
        let exps = proptest::collection::vec(0u32..=3, n + 1);
        proptest::collection::vec((-2i32..=2, exps), 1..=5).prop_map(move |raw| Poly {
            terms: raw
                .into_iter()
                .map(|(c, mut e)| {
                    if !with_time {
                        e[0] = 0;
                    }
                    (if c == 0 { 0.5 } else { c as f64 }, e)
                })
                .collect(),
        })
    }

    pub fn text(&self, space: &SpaceSpec) -> String {
        self.terms
            .iter()
            .map(|(c, e)| {
                let mut s = format!("({c})");
                for (i, &k) in e.iter().enumerate() {
                    if k > 0 {
                        s.push_str(&format!("*{}^{k}", space.name(i)));
                    }
                }
                s
            })
            .collect::<Vec<_>>()
            .join(" + ")
    }

    /// `dH/dx_i` at an extended point.
    pub fn partial(&self, i: usize, point: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(c, e)| {
                if e[i] == 0 {
                    return 0.0;
                }
                let mut v = c * e[i] as f64;
                for (j, &k) in e.iter().enumerate() {
                    let k = if j == i { k - 1 } else { k };
                    v *= point[j].powi(k as i32);
                }
                v
            })
            .sum()
    }

    pub fn value(&self, point: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(c, e)| {
                c * e
                    .iter()
                    .zip(point)
                    .map(|(&k, x)| x.powi(k as i32))
                    .product::<f64>()
            })
            .sum()
    }
}

pub fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}

/// Random `(form, point)` with `n <= 5` and `degree <= n + 1`.
pub fn form_and_point() -> impl Strategy<Value = (Form, Vec<f64>)> {
    dims().prop_flat_map(|(n, p)| (form_strategy(n, p), point_strategy(n)))
}

/// Two forms on the same space whose degrees add up to at most `n + 1`.
pub fn form_pair_and_point() -> impl Strategy<Value = (Form, Form, Vec<f64>)> {
    dims()
        .prop_flat_map(|(n, p)| (Just(n), Just(p), 0..=(n + 1 - p)))
        .prop_flat_map(|(n, p, q)| (form_strategy(n, p), form_strategy(n, q), point_strategy(n)))
}
