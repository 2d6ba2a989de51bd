//! Small dense linear algebra on row-major `Vec<Vec<f64>>` matrices.

/// Relative pivot tolerance used for numerical rank decisions.
pub const RANK_TOLERANCE: f64 = 1e-9;

/// Numerical rank by Gaussian elimination with full pivoting. A pivot
/// counts when it exceeds `rel_tol` times the largest entry of the matrix.
pub fn rank(matrix: &[Vec<f64>], rel_tol: f64) -> usize {
    let rows = matrix.len();
    if rows == 0 {
        return 0;
    }
    let cols = matrix[0].len();
    let mut a: Vec<Vec<f64>> = matrix.to_vec();
    let scale = a
        .iter()
        .flat_map(|r| r.iter())
        .fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 || !scale.is_finite() {
        return 0;
    }
    let threshold = rel_tol * scale;
    let mut rank = 0;
    for step in 0..rows.min(cols) {
        let (mut pr, mut pc, mut best) = (step, step, 0.0);
        for (r, row) in a.iter().enumerate().skip(step) {
            for (c, v) in row.iter().enumerate().skip(step) {
                if v.abs() > best {
                    best = v.abs();
                    pr = r;
                    pc = c;
                }
            }
        }
        if best <= threshold {
            break;
        }
        a.swap(step, pr);
        for row in a.iter_mut() {
            row.swap(step, pc);
        }
        let pivot_row = a[step].clone();
        for row in a.iter_mut().skip(step + 1) {
            let f = row[step] / pivot_row[step];
            if f != 0.0 {
                for (x, p) in row.iter_mut().zip(&pivot_row).skip(step) {
                    *x -= f * p;
                }
            }
        }
        rank += 1;
    }
    rank
}

/// LU factorization with partial pivoting of a square matrix.
#[derive(Debug, Clone)]
pub struct Lu {
    lu: Vec<Vec<f64>>,
    perm: Vec<usize>,
    sign: f64,
    singular: bool,
}

impl Lu {
    #[allow(clippy::needless_range_loop)]
    pub fn new(matrix: &[Vec<f64>]) -> Self {
        let n = matrix.len();
        let mut lu = matrix.to_vec();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;
        let mut singular = false;
        for k in 0..n {
            let p = (k..n)
                .max_by(|&i, &j| lu[i][k].abs().total_cmp(&lu[j][k].abs()))
                .unwrap_or(k);
            if lu[p][k] == 0.0 {
                singular = true;
                continue;
            }
            if p != k {
                lu.swap(p, k);
                perm.swap(p, k);
                sign = -sign;
            }
            let pivot = lu[k][k];
            for i in k + 1..n {
                let f = lu[i][k] / pivot;
                lu[i][k] = f;
                if f != 0.0 {
                    for j in k + 1..n {
                        lu[i][j] -= f * lu[k][j];
                    }
                }
            }
        }
        Self {
            lu,
            perm,
            sign,
            singular,
        }
    }

    pub fn is_singular(&self) -> bool {
        self.singular
    }

    pub fn determinant(&self) -> f64 {
        if self.singular {
            return 0.0;
        }
        self.lu
            .iter()
            .enumerate()
            .fold(self.sign, |d, (i, row)| d * row[i])
    }

    /// Solve `A x = b`. Returns `None` for an exactly singular matrix.
    pub fn solve(&self, b: &[f64]) -> Option<Vec<f64>> {
        if self.singular {
            return None;
        }
        let n = self.lu.len();
        let mut x: Vec<f64> = self.perm.iter().map(|&i| b[i]).collect();
        for i in 0..n {
            for j in 0..i {
                x[i] -= self.lu[i][j] * x[j];
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                x[i] -= self.lu[i][j] * x[j];
            }
            x[i] /= self.lu[i][i];
        }
        Some(x)
    }

    /// 1-norm condition number `|A|_1 |A^-1|_1`, computed from the explicit inverse.
    pub fn condition_1(&self, matrix: &[Vec<f64>]) -> f64 {
        if self.singular {
            return f64::INFINITY;
        }
        let n = matrix.len();
        let norm = |cols: &dyn Fn(usize) -> Vec<f64>| {
            (0..n)
                .map(|j| cols(j).iter().map(|v| v.abs()).sum::<f64>())
                .fold(0.0f64, f64::max)
        };
        let a_norm = norm(&|j| matrix.iter().map(|r| r[j]).collect());
        let inv_norm = norm(&|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            self.solve(&e).unwrap_or_else(|| vec![f64::INFINITY; n])
        });
        a_norm * inv_norm
    }
}

pub fn determinant(matrix: &[Vec<f64>]) -> f64 {
    Lu::new(matrix).determinant()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_of_simple_matrices() {
        assert_eq!(rank(&[vec![0.0, 0.0], vec![0.0, 0.0]], RANK_TOLERANCE), 0);
        assert_eq!(rank(&[vec![1.0, 2.0], vec![2.0, 4.0]], RANK_TOLERANCE), 1);
        assert_eq!(rank(&[vec![1.0, 2.0], vec![3.0, 4.0]], RANK_TOLERANCE), 2);
        let near = vec![vec![1.0, 2.0], vec![2.0, 4.0 + 1e-12]];
        assert_eq!(rank(&near, RANK_TOLERANCE), 1);
        let wide = vec![vec![1.0, 0.0, 0.0], vec![0.0, 0.0, 1.0]];
        assert_eq!(rank(&wide, RANK_TOLERANCE), 2);
    }

    #[test]
    fn lu_solve_and_determinant() {
        let a = vec![vec![0.0, 2.0, 1.0], vec![1.0, 1.0, 0.0], vec![3.0, 0.0, 1.0]];
        let lu = Lu::new(&a);
        let x = lu.solve(&[5.0, 3.0, 6.0]).unwrap();
        for (row, b) in a.iter().zip([5.0, 3.0, 6.0]) {
            let r: f64 = row.iter().zip(&x).map(|(a, x)| a * x).sum();
            assert!((r - b).abs() < 1e-14);
        }
        // expansion along the first row: 0 - 2*(1 - 0) + 1*(0 - 3)
        assert!((lu.determinant() - (-5.0)).abs() < 1e-14);
        let id = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        assert_eq!(Lu::new(&id).condition_1(&id), 1.0);
        let sing = vec![vec![1.0, 2.0], vec![2.0, 4.0]];
        assert!(Lu::new(&sing).solve(&[1.0, 1.0]).is_none());
        assert_eq!(determinant(&sing), 0.0);
    }
}
