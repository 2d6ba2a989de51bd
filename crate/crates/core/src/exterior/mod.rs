//! Sparse exterior algebra on `R x M`.
//!
//! A [`Form`] stores one coefficient [`Expr`] per strictly increasing index
//! tuple. Index 0 is `dt`, indices `1..=n` are the spatial differentials.
//! All permutation signs are resolved when a term is inserted, so the map
//! never contains an unsorted or repeated key.

mod calculus;
mod rank;

use std::collections::BTreeMap;
use std::fmt;

use crate::expr::{EvalError, Expr, SpaceSpec};

pub use calculus::{compose, decompose, Decomposition, DerivativeMode};
pub use rank::{contraction_matrix, form_rank_at};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FormError {
    #[error("forms live on different spaces")]
    SpaceMismatch,
    #[error("degree mismatch: expected {expected}, found {found}")]
    DegreeMismatch { expected: usize, found: usize },
    #[error("operation requires a spatial form (no dt factor)")]
    NotSpatial,
    #[error("index {index} out of range for a space with {n} spatial coordinates")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("vector has {found} components, space has dimension {expected}")]
    VectorLength { expected: usize, found: usize },
    #[error("interior product of a 0-form")]
    ZeroDegree,
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Sorts `indices` in place and returns the sign of the sorting
/// permutation, or `None` when an index repeats.
pub fn sort_with_sign(indices: &mut [usize]) -> Option<f64> {
    let mut sign = 1.0;
    // insertion sort; tuples are short
    for i in 1..indices.len() {
        let mut j = i;
        while j > 0 && indices[j - 1] > indices[j] {
            indices.swap(j - 1, j);
            sign = -sign;
            j -= 1;
        }
    }
    if indices.windows(2).any(|w| w[0] == w[1]) {
        None
    } else {
        Some(sign)
    }
}

/// All strictly increasing `k`-tuples drawn from `lo..=hi`, in lexicographic order.
pub fn increasing_tuples(lo: usize, hi: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, hi: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..=hi {
            if hi + 1 - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, hi, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if k == 0 {
        out.push(Vec::new());
    } else if hi >= lo {
        rec(lo, hi, k, &mut Vec::with_capacity(k), &mut out);
    }
    out
}

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

/// A differential form of fixed degree on an extended phase space.
#[derive(Clone, Debug, PartialEq)]
pub struct Form {
    space: SpaceSpec,
    degree: usize,
    terms: BTreeMap<Vec<usize>, Expr>,
}

impl Form {
    pub fn zero(space: &SpaceSpec, degree: usize) -> Self {
        Self {
            space: space.clone(),
            degree,
            terms: BTreeMap::new(),
        }
    }

    /// The 0-form `f`.
    pub fn scalar(space: &SpaceSpec, f: Expr) -> Self {
        let mut form = Self::zero(space, 0);
        form.add_term(&[], f).expect("empty tuple is always valid");
        form
    }

    /// `coeff * dx^{i1} ^ ... ^ dx^{ip}`, indices in any order.
    pub fn monomial(space: &SpaceSpec, indices: &[usize], coeff: Expr) -> Result<Self, FormError> {
        let mut form = Self::zero(space, indices.len());
        form.add_term(indices, coeff)?;
        Ok(form)
    }

    /// The coordinate differential `dx^index` (index 0 is `dt`).
    pub fn differential(space: &SpaceSpec, index: usize) -> Result<Self, FormError> {
        Self::monomial(space, &[index], Expr::one())
    }

    /// Build a form from `(indices, coefficient)` pairs; indices may be unsorted.
    pub fn from_terms<I>(space: &SpaceSpec, degree: usize, terms: I) -> Result<Self, FormError>
    where
        I: IntoIterator<Item = (Vec<usize>, Expr)>,
    {
        let mut form = Self::zero(space, degree);
        for (indices, coeff) in terms {
            form.add_term(&indices, coeff)?;
        }
        Ok(form)
    }

    /// Add `coeff * dx^I` to this form. Repeated indices contribute nothing.
    pub fn add_term(&mut self, indices: &[usize], coeff: Expr) -> Result<(), FormError> {
        if indices.len() != self.degree {
            return Err(FormError::DegreeMismatch {
                expected: self.degree,
                found: indices.len(),
            });
        }
        let n = self.space.n();
        if let Some(&index) = indices.iter().find(|&&i| i > n) {
            return Err(FormError::IndexOutOfRange { index, n });
        }
        let mut key = indices.to_vec();
        let Some(sign) = sort_with_sign(&mut key) else {
            return Ok(());
        };
        let coeff = if sign < 0.0 { Expr::neg(coeff) } else { coeff };
        self.accumulate(key, coeff);
        Ok(())
    }

    /// Add to an already sorted key.
    pub(crate) fn accumulate(&mut self, key: Vec<usize>, coeff: Expr) {
        if coeff.is_zero() {
            return;
        }
        match self.terms.remove(&key) {
            Some(existing) => {
                let sum = Expr::add(existing, coeff);
                if !sum.is_zero() {
                    self.terms.insert(key, sum);
                }
            }
            None => {
                self.terms.insert(key, coeff);
            }
        }
    }

    pub fn space(&self) -> &SpaceSpec {
        &self.space
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Stored terms, keyed by strictly increasing index tuples.
    pub fn terms(&self) -> impl Iterator<Item = (&[usize], &Expr)> {
        self.terms.iter().map(|(k, v)| (k.as_slice(), v))
    }

    pub fn coefficient(&self, indices: &[usize]) -> Option<&Expr> {
        self.terms.get(indices)
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    /// No stored terms. A form with terms may still vanish pointwise.
    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// True when no term carries a `dt` factor.
    pub fn is_spatial(&self) -> bool {
        self.terms.keys().all(|k| k.first() != Some(&0))
    }

    pub(crate) fn check_space(&self, other: &Form) -> Result<(), FormError> {
        if self.space == other.space {
            Ok(())
        } else {
            Err(FormError::SpaceMismatch)
        }
    }

    fn check_same_shape(&self, other: &Form) -> Result<(), FormError> {
        self.check_space(other)?;
        if self.degree != other.degree {
            return Err(FormError::DegreeMismatch {
                expected: self.degree,
                found: other.degree,
            });
        }
        Ok(())
    }

    pub fn add(&self, other: &Form) -> Result<Form, FormError> {
        self.check_same_shape(other)?;
        let mut out = self.clone();
        for (k, v) in &other.terms {
            out.accumulate(k.clone(), v.clone());
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Form) -> Result<Form, FormError> {
        self.add(&other.neg())
    }

    #[allow(clippy::should_implement_trait)]
    pub fn neg(&self) -> Form {
        self.map_coefficients(|c| Expr::neg(c.clone()))
    }

    /// Multiply every coefficient by the scalar field `f`.
    pub fn scale(&self, f: &Expr) -> Form {
        self.map_coefficients(|c| Expr::mul(f.clone(), c.clone()))
    }

    pub(crate) fn map_coefficients(&self, mut f: impl FnMut(&Expr) -> Expr) -> Form {
        let mut out = Form::zero(&self.space, self.degree);
        for (k, v) in &self.terms {
            out.accumulate(k.clone(), f(v));
        }
        out
    }

    /// Numerical coefficients at `point = [t, x1..xn]`.
    pub fn evaluate(&self, point: &[f64]) -> Result<BTreeMap<Vec<usize>, f64>, EvalError> {
        self.terms
            .iter()
            .map(|(k, v)| Ok((k.clone(), v.evaluate(point)?)))
            .collect()
    }

    /// Largest absolute coefficient at `point`.
    pub fn max_abs_at(&self, point: &[f64]) -> Result<f64, EvalError> {
        self.terms
            .values()
            .try_fold(0.0f64, |m, v| Ok(m.max(v.evaluate(point)?.abs())))
    }

    /// Precompile every coefficient for repeated evaluation.
    pub fn compile(&self) -> CompiledForm {
        CompiledForm {
            degree: self.degree,
            keys: self.terms.keys().cloned().collect(),
            programs: self.terms.values().map(Expr::compile).collect(),
        }
    }
}

impl fmt::Display for Form {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        for (i, (key, coeff)) in self.terms.iter().enumerate() {
            if i > 0 {
                f.write_str(" + ")?;
            }
            let basis: Vec<String> = key.iter().map(|&j| format!("d{}", self.space.name(j))).collect();
            if key.is_empty() {
                write!(f, "({coeff})")?;
            } else if coeff.is_one() {
                f.write_str(&basis.join("^"))?;
            } else {
                write!(f, "({coeff}) {}", basis.join("^"))?;
            }
        }
        Ok(())
    }
}

/// A form whose coefficients are compiled to flat programs.
#[derive(Debug, Clone)]
pub struct CompiledForm {
    degree: usize,
    keys: Vec<Vec<usize>>,
    programs: Vec<crate::expr::Program>,
}

impl CompiledForm {
    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn keys(&self) -> &[Vec<usize>] {
        &self.keys
    }

    /// Coefficients at `point`, aligned with [`keys`](Self::keys).
    pub fn eval_into(
        &self,
        point: &[f64],
        out: &mut Vec<f64>,
        stack: &mut Vec<f64>,
    ) -> Result<(), EvalError> {
        out.clear();
        for prog in &self.programs {
            out.push(prog.eval_with(point, stack)?);
        }
        Ok(())
    }
}

/// A vector tangent to `M` (no `d/dt` component).
#[derive(Clone, Debug, PartialEq)]
pub struct SpatialVector {
    space: SpaceSpec,
    components: Vec<Expr>,
}

impl SpatialVector {
    pub fn new(space: &SpaceSpec, components: Vec<Expr>) -> Result<Self, FormError> {
        if components.len() != space.n() {
            return Err(FormError::VectorLength {
                expected: space.n(),
                found: components.len(),
            });
        }
        Ok(Self {
            space: space.clone(),
            components,
        })
    }

    pub fn from_values(space: &SpaceSpec, values: &[f64]) -> Result<Self, FormError> {
        Self::new(space, values.iter().map(|&v| Expr::constant(v)).collect())
    }

    /// Unit vector along spatial coordinate `index` (1-based).
    pub fn basis(space: &SpaceSpec, index: usize) -> Result<Self, FormError> {
        if index == 0 || index > space.n() {
            return Err(FormError::IndexOutOfRange { index, n: space.n() });
        }
        let mut values = vec![0.0; space.n()];
        values[index - 1] = 1.0;
        Self::from_values(space, &values)
    }

    pub fn space(&self) -> &SpaceSpec {
        &self.space
    }

    /// Component along spatial coordinate `index` (1-based).
    pub fn component(&self, index: usize) -> &Expr {
        &self.components[index - 1]
    }

    pub fn components(&self) -> &[Expr] {
        &self.components
    }
}
