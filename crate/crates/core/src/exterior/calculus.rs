use super::{sort_with_sign, Form, FormError, SpatialVector};
use crate::expr::Expr;

/// Which part of the exterior derivative to take.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerivativeMode {
    /// `d` on the whole extended space.
    Full,
    /// `d-hat`: differentiate only along `x1..xn`, as if on `M` alone.
    Spatial,
    /// `dt-partial`: Lie derivative along `d/dt`; degree is preserved.
    Time,
}

impl Form {
    /// Exterior product `self ^ other`. Degrees above `n + 1` give the zero form.
    pub fn wedge(&self, other: &Form) -> Result<Form, FormError> {
        self.check_space(other)?;
        let mut out = Form::zero(&self.space, self.degree + other.degree);
        if out.degree > self.space.extended_dim() {
            return Ok(out);
        }
        for (ka, ca) in &self.terms {
            for (kb, cb) in &other.terms {
                let mut key: Vec<usize> = ka.iter().chain(kb.iter()).copied().collect();
                let Some(sign) = sort_with_sign(&mut key) else {
                    continue;
                };
                let mut c = Expr::mul(ca.clone(), cb.clone());
                if sign < 0.0 {
                    c = Expr::neg(c);
                }
                out.accumulate(key, c);
            }
        }
        Ok(out)
    }

    /// `d`, `d-hat` or `dt-partial` of this form.
    pub fn exterior_derivative(&self, mode: DerivativeMode) -> Result<Form, FormError> {
        if mode != DerivativeMode::Full && !self.is_spatial() {
            return Err(FormError::NotSpatial);
        }
        if mode == DerivativeMode::Time {
            return Ok(self.map_coefficients(|c| c.differentiate(0)));
        }
        let first = if mode == DerivativeMode::Full { 0 } else { 1 };
        let mut out = Form::zero(&self.space, self.degree + 1);
        for (key, coeff) in &self.terms {
            for j in first..=self.space.n() {
                if key.contains(&j) {
                    continue;
                }
                let dc = coeff.differentiate(j);
                if dc.is_zero() {
                    continue;
                }
                // dx^j moves past every index of the key smaller than j
                let pos = key.iter().take_while(|&&i| i < j).count();
                let mut new_key = key.clone();
                new_key.insert(pos, j);
                let c = if pos % 2 == 1 { Expr::neg(dc) } else { dc };
                out.accumulate(new_key, c);
            }
        }
        Ok(out)
    }

    pub fn d(&self) -> Form {
        self.exterior_derivative(DerivativeMode::Full)
            .expect("full derivative accepts any form")
    }

    /// Interior product `i_v self`, contracting the first slot.
    pub fn interior_product(&self, v: &SpatialVector) -> Result<Form, FormError> {
        if v.space() != &self.space {
            return Err(FormError::SpaceMismatch);
        }
        if self.degree == 0 {
            return Err(FormError::ZeroDegree);
        }
        let mut out = Form::zero(&self.space, self.degree - 1);
        for (key, coeff) in &self.terms {
            for (r, &j) in key.iter().enumerate() {
                if j == 0 {
                    continue;
                }
                let vj = v.component(j);
                if vj.is_zero() {
                    continue;
                }
                let mut rest = key.clone();
                rest.remove(r);
                let mut c = Expr::mul(vj.clone(), coeff.clone());
                if r % 2 == 1 {
                    c = Expr::neg(c);
                }
                out.accumulate(rest, c);
            }
        }
        Ok(out)
    }

    /// The part of this form without a `dt` factor.
    pub fn spatial_part(&self) -> Form {
        decompose(self).r_hat
    }
}

/// The unique split `sigma = dt ^ s_hat + r_hat` into spatial forms.
#[derive(Clone, Debug, PartialEq)]
pub struct Decomposition {
    pub s_hat: Form,
    pub r_hat: Form,
}

pub fn decompose(sigma: &Form) -> Decomposition {
    let degree = sigma.degree;
    let mut s_hat = Form::zero(&sigma.space, degree.saturating_sub(1));
    let mut r_hat = Form::zero(&sigma.space, degree);
    for (key, coeff) in &sigma.terms {
        if key.first() == Some(&0) {
            // dt is already in front
            s_hat.accumulate(key[1..].to_vec(), coeff.clone());
        } else {
            r_hat.accumulate(key.clone(), coeff.clone());
        }
    }
    Decomposition { s_hat, r_hat }
}

/// `dt ^ s_hat + r_hat`.
pub fn compose(s_hat: &Form, r_hat: &Form) -> Result<Form, FormError> {
    s_hat.check_space(r_hat)?;
    if !s_hat.is_spatial() || !r_hat.is_spatial() {
        return Err(FormError::NotSpatial);
    }
    if r_hat.degree != s_hat.degree + 1 {
        return Err(FormError::DegreeMismatch {
            expected: s_hat.degree + 1,
            found: r_hat.degree,
        });
    }
    let dt = Form::differential(&s_hat.space, 0)?;
    dt.wedge(s_hat)?.add(r_hat)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse_expression, SpaceSpec};

    fn qp() -> SpaceSpec {
        SpaceSpec::new(&["q", "p"]).unwrap()
    }

    fn expr(s: &SpaceSpec, text: &str) -> Expr {
        parse_expression(text, s).unwrap()
    }

    /// Pointwise comparison of two forms.
    fn assert_forms_close(a: &Form, b: &Form, point: &[f64], tol: f64) {
        assert_eq!(a.degree(), b.degree());
        let diff = a.sub(b).unwrap();
        let m = diff.max_abs_at(point).unwrap();
        assert!(m <= tol, "forms differ by {m}: {a} vs {b}");
    }

    #[test]
    fn wedge_antisymmetry() {
        let s = qp();
        let dq = Form::differential(&s, 1).unwrap();
        let dp = Form::differential(&s, 2).unwrap();
        assert!(dq.wedge(&dq).unwrap().is_zero());
        let a = dp.wedge(&dq).unwrap();
        let b = dq.wedge(&dp).unwrap();
        assert_eq!(a, b.neg());
    }

    #[test]
    fn wedge_overflow_is_zero() {
        let s = qp();
        let vol = Form::monomial(&s, &[0, 1, 2], Expr::one()).unwrap();
        let dq = Form::differential(&s, 1).unwrap();
        let w = vol.wedge(&dq).unwrap();
        assert!(w.is_zero());
        assert_eq!(w.degree(), 4);
    }

    #[test]
    fn poincare_cartan_derivative() {
        // d(p dq - H dt), H = (p^2+q^2)/2  ->  dp^dq - (q dq + p dp)^dt
        let s = qp();
        let h = expr(&s, "(p^2+q^2)/2");
        let sigma = Form::from_terms(&s, 1, [(vec![1], expr(&s, "p")), (vec![0], Expr::neg(h))]).unwrap();
        let dsigma = sigma.d();
        let dp_dq = Form::monomial(&s, &[2, 1], Expr::one()).unwrap();
        let q_dq_p_dp =
            Form::from_terms(&s, 1, [(vec![1], expr(&s, "q")), (vec![2], expr(&s, "p"))]).unwrap();
        let dt = Form::differential(&s, 0).unwrap();
        let expected = dp_dq.sub(&q_dq_p_dp.wedge(&dt).unwrap()).unwrap();
        for point in [[0.0, 0.3, -1.2], [2.0, -0.7, 0.4]] {
            assert_forms_close(&dsigma, &expected, &point, 1e-15);
        }
    }

    #[test]
    fn spatial_derivative_of_nambu_r_hat() {
        let s = SpaceSpec::new(&["x", "y", "z"]).unwrap();
        let r = Form::monomial(&s, &[2, 3], expr(&s, "x")).unwrap();
        let dr = r.exterior_derivative(DerivativeMode::Spatial).unwrap();
        assert_eq!(dr, Form::monomial(&s, &[1, 2, 3], Expr::one()).unwrap());
    }

    #[test]
    fn spatial_modes_reject_dt() {
        let s = qp();
        let dt = Form::differential(&s, 0).unwrap();
        assert_eq!(
            dt.exterior_derivative(DerivativeMode::Spatial),
            Err(FormError::NotSpatial)
        );
        assert_eq!(
            dt.exterior_derivative(DerivativeMode::Time),
            Err(FormError::NotSpatial)
        );
    }

    #[test]
    fn time_derivative_differentiates_coefficients() {
        let s = qp();
        let f = Form::monomial(&s, &[1], expr(&s, "sin(t)*p")).unwrap();
        let dtf = f.exterior_derivative(DerivativeMode::Time).unwrap();
        let v = dtf.evaluate(&[0.0, 0.0, 2.0]).unwrap();
        assert_eq!(v.get(&vec![1]), Some(&2.0));
    }

    #[test]
    fn contraction_of_volume() {
        // i_v(dx^dy^dz), v = (a,b,c)  ->  a dy^dz - b dx^dz + c dx^dy
        let s = SpaceSpec::new(&["x", "y", "z"]).unwrap();
        let vol = Form::monomial(&s, &[1, 2, 3], Expr::one()).unwrap();
        let v = SpatialVector::from_values(&s, &[2.0, 3.0, 5.0]).unwrap();
        let c = vol.interior_product(&v).unwrap();
        let vals = c.evaluate(&[0.0; 4]).unwrap();
        assert_eq!(vals[&vec![2, 3]], 2.0);
        assert_eq!(vals[&vec![1, 3]], -3.0);
        assert_eq!(vals[&vec![1, 2]], 5.0);
    }

    #[test]
    fn contraction_of_symplectic_form() {
        // i_v(dp^dq) with v = (qdot, pdot) on (q, p) is pdot dq - qdot dp
        let s = qp();
        let omega = Form::monomial(&s, &[2, 1], Expr::one()).unwrap();
        let v = SpatialVector::from_values(&s, &[7.0, 11.0]).unwrap();
        let c = omega.interior_product(&v).unwrap();
        let vals = c.evaluate(&[0.0; 3]).unwrap();
        assert_eq!(vals[&vec![1]], 11.0);
        assert_eq!(vals[&vec![2]], -7.0);
    }

    #[test]
    fn interior_product_of_scalar_fails() {
        let s = qp();
        let f = Form::scalar(&s, Expr::one());
        let v = SpatialVector::from_values(&s, &[1.0, 0.0]).unwrap();
        assert_eq!(f.interior_product(&v), Err(FormError::ZeroDegree));
    }

    #[test]
    fn decompose_hamiltonian() {
        let s = qp();
        let h = expr(&s, "(p^2+q^2)/2");
        let sigma =
            Form::from_terms(&s, 1, [(vec![1], expr(&s, "p")), (vec![0], Expr::neg(h.clone()))]).unwrap();
        let Decomposition { s_hat, r_hat } = decompose(&sigma);
        assert_eq!(s_hat, Form::scalar(&s, Expr::neg(h)));
        assert_eq!(r_hat, Form::monomial(&s, &[1], expr(&s, "p")).unwrap());
        assert_eq!(compose(&s_hat, &r_hat).unwrap(), sigma);
    }

    #[test]
    fn decompose_purely_spatial() {
        let s = qp();
        let sigma = Form::monomial(&s, &[1, 2], expr(&s, "q*p")).unwrap();
        let dec = decompose(&sigma);
        assert!(dec.s_hat.is_zero());
        assert_eq!(dec.s_hat.degree(), 1);
        assert_eq!(dec.r_hat, sigma);
        assert_eq!(compose(&dec.s_hat, &dec.r_hat).unwrap(), sigma);
    }

    #[test]
    fn compose_validates() {
        let s = qp();
        let a = Form::differential(&s, 1).unwrap();
        assert!(matches!(compose(&a, &a), Err(FormError::DegreeMismatch { .. })));
        let dt = Form::differential(&s, 0).unwrap();
        let r = Form::monomial(&s, &[1, 2], Expr::one()).unwrap();
        assert_eq!(compose(&dt, &r), Err(FormError::NotSpatial));
    }
}
