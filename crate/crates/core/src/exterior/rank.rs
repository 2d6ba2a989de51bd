use std::collections::BTreeMap;

use super::{increasing_tuples, Form, FormError};
use crate::linalg;

/// Matrix of `v -> i_v a` at `point`: column `j` holds `i_{e_{j+1}} a` in
/// the increasing-index basis of spatial `(p-1)`-forms. Returns the row
/// basis together with the matrix.
#[allow(clippy::type_complexity)]
pub fn contraction_matrix(a: &Form, point: &[f64]) -> Result<(Vec<Vec<usize>>, Vec<Vec<f64>>), FormError> {
    if !a.is_spatial() {
        return Err(FormError::NotSpatial);
    }
    if a.degree() == 0 {
        return Err(FormError::ZeroDegree);
    }
    let n = a.space().n();
    let rows = increasing_tuples(1, n, a.degree() - 1);
    let row_of: BTreeMap<&[usize], usize> = rows.iter().enumerate().map(|(i, k)| (k.as_slice(), i)).collect();
    let mut m = vec![vec![0.0; n]; rows.len()];
    for (key, coeff) in a.terms() {
        let c = coeff.evaluate(point)?;
        if c == 0.0 {
            continue;
        }
        for (r, &j) in key.iter().enumerate() {
            let mut rest = key.to_vec();
            rest.remove(r);
            let sign = if r % 2 == 1 { -1.0 } else { 1.0 };
            m[row_of[rest.as_slice()]][j - 1] += sign * c;
        }
    }
    Ok((rows, m))
}

/// Rank of the spatial form `a` at `point` (the rank of `v -> i_v a`).
pub fn form_rank_at(a: &Form, point: &[f64]) -> Result<usize, FormError> {
    let (_, m) = contraction_matrix(a, point)?;
    Ok(linalg::rank(&m, linalg::RANK_TOLERANCE))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{Expr, SpaceSpec};

    #[test]
    fn example4_symplectic_part_has_rank_two() {
        let s = SpaceSpec::new(&["q", "p", "z"]).unwrap();
        let r = Form::monomial(&s, &[2, 1], Expr::one()).unwrap();
        assert_eq!(form_rank_at(&r, &[0.0, 0.1, 0.2, 0.3]).unwrap(), 2);
    }

    #[test]
    fn top_form_has_full_rank() {
        let s = SpaceSpec::new(&["x", "y", "z"]).unwrap();
        let vol = Form::monomial(&s, &[1, 2, 3], Expr::one()).unwrap();
        assert_eq!(form_rank_at(&vol, &[0.0; 4]).unwrap(), 3);
    }

    #[test]
    fn zero_form_has_rank_zero() {
        let s = SpaceSpec::new(&["x", "y", "z"]).unwrap();
        assert_eq!(form_rank_at(&Form::zero(&s, 2), &[0.0; 4]).unwrap(), 0);
    }

    #[test]
    fn rank_rejects_dt() {
        let s = SpaceSpec::new(&["x"]).unwrap();
        let f = Form::monomial(&s, &[0, 1], Expr::one()).unwrap();
        assert_eq!(form_rank_at(&f, &[0.0; 2]), Err(FormError::NotSpatial));
    }

    #[test]
    fn rank_can_drop_pointwise() {
        // x dx^dy on (x, y): rank 2 except on x = 0
        let s = SpaceSpec::new(&["x", "y"]).unwrap();
        let f = Form::monomial(&s, &[1, 2], s.var("x").unwrap()).unwrap();
        assert_eq!(form_rank_at(&f, &[0.0, 0.5, 0.0]).unwrap(), 2);
        assert_eq!(form_rank_at(&f, &[0.0, 0.0, 0.5]).unwrap(), 0);
    }
}
