//! Builders for the canonical forms: Poincaré-Cartan (Hamiltonian),
//! n-dimensional Nambu, and the degenerate `(q, p, z)` fixture.

use crate::expr::{parse_expression, Expr, ParseError, SpaceError, SpaceSpec};
use crate::exterior::{compose, DerivativeMode, Form, FormError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SystemError {
    #[error("coordinate name collision: {0}")]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("expected {expected} Hamiltonians, found {found}")]
    HamiltonianCount { expected: usize, found: usize },
    #[error("{0}")]
    Invalid(String),
    #[error("expression refers to `{0}`, which is not a coordinate of this space")]
    ForeignVariable(String),
    #[error(transparent)]
    Form(#[from] FormError),
}

/// Check that every variable of `e` is a coordinate of `space` under the same index.
pub fn check_in_space(e: &Expr, space: &SpaceSpec) -> Result<(), SystemError> {
    match e {
        Expr::Const(_) => Ok(()),
        Expr::Var(v) => {
            if space.index_of(&v.name) == Some(v.index) {
                Ok(())
            } else {
                Err(SystemError::ForeignVariable(v.name.to_string()))
            }
        }
        Expr::Neg(a) | Expr::Pow(a, _) | Expr::Call(_, a) => check_in_space(a, space),
        Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
            check_in_space(a, space)?;
            check_in_space(b, space)
        }
    }
}

/// `m` degrees of freedom with coordinates `(q^1..q^m, p_1..p_m)` and a
/// Hamiltonian that may depend on `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianSpec {
    m: usize,
    space: SpaceSpec,
    hamiltonian: Expr,
}

impl HamiltonianSpec {
    pub fn new<S: AsRef<str>>(q_names: &[S], p_names: &[S], hamiltonian: Expr) -> Result<Self, SystemError> {
        if q_names.len() != p_names.len() || q_names.is_empty() {
            return Err(SystemError::Invalid(format!(
                "need equally many q and p names, got {} and {}",
                q_names.len(),
                p_names.len()
            )));
        }
        let names: Vec<&str> = q_names.iter().chain(p_names.iter()).map(|s| s.as_ref()).collect();
        let space = SpaceSpec::new(&names)?;
        check_in_space(&hamiltonian, &space)?;
        Ok(Self {
            m: q_names.len(),
            space,
            hamiltonian,
        })
    }

    /// Space `(q, p)` for one degree of freedom, `(q1..qm, p1..pm)` otherwise.
    pub fn standard_space(m: usize) -> Result<SpaceSpec, SystemError> {
        let (q, p) = Self::standard_names(m);
        let names: Vec<String> = q.into_iter().chain(p).collect();
        Ok(SpaceSpec::new(&names)?)
    }

    fn standard_names(m: usize) -> (Vec<String>, Vec<String>) {
        if m == 1 {
            (vec!["q".into()], vec!["p".into()])
        } else {
            (
                (1..=m).map(|i| format!("q{i}")).collect(),
                (1..=m).map(|i| format!("p{i}")).collect(),
            )
        }
    }

    /// Standard coordinate names with `H` given as text.
    pub fn parse(m: usize, hamiltonian: &str) -> Result<Self, SystemError> {
        if m == 0 {
            return Err(SystemError::Invalid("m must be at least 1".into()));
        }
        let space = Self::standard_space(m)?;
        let h = parse_expression(hamiltonian, &space)?;
        let (q, p) = Self::standard_names(m);
        Self::new(&q, &p, h)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn space(&self) -> &SpaceSpec {
        &self.space
    }

    pub fn hamiltonian(&self) -> &Expr {
        &self.hamiltonian
    }

    /// Coordinate index of `q^a` (a is 1-based).
    pub fn q_index(&self, a: usize) -> usize {
        a
    }

    /// Coordinate index of `p_a` (a is 1-based).
    pub fn p_index(&self, a: usize) -> usize {
        self.m + a
    }
}

/// `sigma = p_a dq^a - H dt`.
pub fn hamiltonian_sigma(spec: &HamiltonianSpec) -> Result<Form, SystemError> {
    let space = spec.space();
    let mut terms: Vec<(Vec<usize>, Expr)> = (1..=spec.m())
        .map(|a| (vec![spec.q_index(a)], space.var_at(spec.p_index(a))))
        .collect();
    terms.push((vec![0], Expr::neg(spec.hamiltonian().clone())));
    Ok(Form::from_terms(space, 1, terms)?)
}

/// Nambu system on `n >= 2` coordinates driven by `n - 1` Hamiltonians.
#[derive(Debug, Clone, PartialEq)]
pub struct NambuSpec {
    space: SpaceSpec,
    hamiltonians: Vec<Expr>,
}

impl NambuSpec {
    pub fn new(space: SpaceSpec, hamiltonians: Vec<Expr>) -> Result<Self, SystemError> {
        let n = space.n();
        if n < 2 {
            return Err(SystemError::Invalid(format!(
                "Nambu systems need n >= 2, got {n}"
            )));
        }
        if hamiltonians.len() != n - 1 {
            return Err(SystemError::HamiltonianCount {
                expected: n - 1,
                found: hamiltonians.len(),
            });
        }
        for h in &hamiltonians {
            check_in_space(h, &space)?;
        }
        Ok(Self { space, hamiltonians })
    }

    /// `(x, y, z)` for n = 3, `x1..xn` otherwise.
    pub fn standard_space(n: usize) -> Result<SpaceSpec, SystemError> {
        if n == 3 {
            Ok(SpaceSpec::new(&["x", "y", "z"])?)
        } else {
            Ok(SpaceSpec::numbered("x", n)?)
        }
    }

    pub fn parse<S: AsRef<str>>(n: usize, hamiltonians: &[S]) -> Result<Self, SystemError> {
        let space = Self::standard_space(n)?;
        let hs = hamiltonians
            .iter()
            .map(|h| parse_expression(h.as_ref(), &space))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(space, hs)
    }

    pub fn space(&self) -> &SpaceSpec {
        &self.space
    }

    pub fn hamiltonians(&self) -> &[Expr] {
        &self.hamiltonians
    }
}

/// `sigma = x^1 dx^2 ^ ... ^ dx^n + dt ^ (H_1 dH_2 ^ ... ^ dH_{n-1})`.
///
/// The time part is built from spatial differentials; inside a wedge with
/// `dt` the `dH/dt` pieces drop out. For odd `n` this is the same form as
/// `x^1 dx^2 ^ ... ^ dx^n - H_1 dH_2 ^ ... ^ dH_{n-1} ^ dt`; for even `n` that
/// ordering would flip the sign of the time part and reverse the flow.
pub fn nambu_sigma(spec: &NambuSpec) -> Result<Form, SystemError> {
    let space = spec.space();
    let n = space.n();
    let hs = spec.hamiltonians();
    let mut s_hat = Form::scalar(space, hs[0].clone());
    for h in &hs[1..] {
        let dh = Form::scalar(space, h.clone()).exterior_derivative(DerivativeMode::Spatial)?;
        s_hat = s_hat.wedge(&dh)?;
    }
    let r_indices: Vec<usize> = (2..=n).collect();
    let r_hat = Form::monomial(space, &r_indices, space.var_at(1))?;
    Ok(compose(&s_hat, &r_hat)?)
}

/// Coordinates `(q, p, z)` of the degenerate one-form fixture.
pub fn example4_space() -> SpaceSpec {
    SpaceSpec::new(&["q", "p", "z"]).expect("fixed names are valid")
}

/// `p dq - H dt` on the three-dimensional space `(q, p, z)` with
/// `H = q^2 + p^2 + z`.
pub fn example4_sigma() -> Form {
    let space = example4_space();
    let h = parse_expression("q^2 + p^2 + z", &space).expect("fixed expression parses");
    example4_sigma_with(h).expect("fixed expression lives on the fixture space")
}

/// `p dq - H dt` on `(q, p, z)` with a caller-supplied `H`.
pub fn example4_sigma_with(hamiltonian: Expr) -> Result<Form, SystemError> {
    let space = example4_space();
    check_in_space(&hamiltonian, &space)?;
    Ok(Form::from_terms(
        &space,
        1,
        [(vec![1], space.var_at(2)), (vec![0], Expr::neg(hamiltonian))],
    )?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exterior::decompose;

    #[test]
    fn oscillator_sigma() {
        let spec = HamiltonianSpec::parse(1, "(p^2+q^2)/2").unwrap();
        let sigma = hamiltonian_sigma(&spec).unwrap();
        assert_eq!(sigma.degree(), 1);
        assert_eq!(sigma.space().extended_dim(), 3);
        assert_eq!(sigma.coefficient(&[1]).unwrap().to_string(), "p");
        assert_eq!(sigma.coefficient(&[0]).unwrap().to_string(), "-((p^2 + q^2)/2)");
        assert_eq!(sigma.num_terms(), 2);
    }

    #[test]
    fn zero_hamiltonian_two_dof() {
        let spec = HamiltonianSpec::parse(2, "0").unwrap();
        let sigma = hamiltonian_sigma(&spec).unwrap();
        assert_eq!(sigma.num_terms(), 2);
        assert_eq!(sigma.coefficient(&[1]).unwrap().to_string(), "p1");
        assert_eq!(sigma.coefficient(&[2]).unwrap().to_string(), "p2");
        assert!(sigma.is_spatial());
    }

    #[test]
    fn hamiltonian_decomposes_to_minus_h() {
        let spec = HamiltonianSpec::parse(2, "q1*p2 + t*p1^2").unwrap();
        let dec = decompose(&hamiltonian_sigma(&spec).unwrap());
        assert_eq!(
            dec.s_hat,
            Form::scalar(spec.space(), Expr::neg(spec.hamiltonian().clone()))
        );
        assert_eq!(dec.r_hat.num_terms(), 2);
    }

    #[test]
    fn name_collisions_are_rejected() {
        let h = Expr::zero();
        assert!(matches!(
            HamiltonianSpec::new(&["q"], &["q"], h.clone()),
            Err(SystemError::Space(SpaceError::Duplicate(_)))
        ));
        assert!(matches!(
            HamiltonianSpec::new(&["t"], &["p"], h),
            Err(SystemError::Space(SpaceError::ReservedName))
        ));
    }

    #[test]
    fn foreign_variables_are_rejected() {
        let other = SpaceSpec::new(&["a", "b"]).unwrap();
        let h = parse_expression("a*b", &other).unwrap();
        assert_eq!(
            HamiltonianSpec::new(&["q"], &["p"], h),
            Err(SystemError::ForeignVariable("a".into()))
        );
    }

    #[test]
    fn nambu_three_dimensional() {
        let spec = NambuSpec::parse(3, &["x^2 + y", "z*x"]).unwrap();
        let sigma = nambu_sigma(&spec).unwrap();
        assert_eq!(sigma.degree(), 2);
        let dec = decompose(&sigma);
        assert_eq!(
            dec.r_hat,
            Form::monomial(spec.space(), &[2, 3], spec.space().var_at(1)).unwrap()
        );
        // s_hat = H1 dH2 = (x^2 + y)(z dx + x dz)
        let point = [0.0, 0.5, 2.0, 3.0];
        let vals = dec.s_hat.evaluate(&point).unwrap();
        let h1 = 0.25 + 2.0;
        assert_eq!(vals[&vec![1]], h1 * 3.0);
        assert_eq!(vals[&vec![3]], h1 * 0.5);
        // literal form x dy^dz - H1 dH2^dt for n = 3
        let dt = Form::differential(spec.space(), 0).unwrap();
        let dh2 = Form::scalar(spec.space(), spec.hamiltonians()[1].clone())
            .exterior_derivative(DerivativeMode::Spatial)
            .unwrap();
        let literal = dec
            .r_hat
            .sub(&dh2.scale(&spec.hamiltonians()[0]).wedge(&dt).unwrap())
            .unwrap();
        assert_eq!(sigma.sub(&literal).unwrap().max_abs_at(&point).unwrap(), 0.0);
    }

    #[test]
    fn nambu_count_is_checked() {
        assert_eq!(
            NambuSpec::parse(4, &["x1", "x2"]),
            Err(SystemError::HamiltonianCount {
                expected: 3,
                found: 2
            })
        );
        assert!(matches!(
            NambuSpec::parse(1, &[] as &[&str]),
            Err(SystemError::Invalid(_))
        ));
    }

    #[test]
    fn example4_fixture() {
        let sigma = example4_sigma();
        assert_eq!(sigma.degree(), 1);
        assert_eq!(sigma.space().extended_dim(), 4);
        let dec = decompose(&sigma);
        assert_eq!(dec.r_hat.coefficient(&[1]).unwrap().to_string(), "p");
    }
}
