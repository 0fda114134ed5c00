use super::{Matrix, NumericsError};

const SYMMETRY_TOL: f64 = 1e-9;
/// Pivots below this fraction of the largest diagonal entry count as zero.
const RELATIVE_PIVOT_TOL: f64 = 1e-12;

/// Lower-triangular Cholesky factor `L` with `A = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    n: usize,
    lower: Vec<f64>,
}

impl Cholesky {
    pub fn factor(a: &Matrix) -> Result<Self, NumericsError> {
        let (rows, cols) = a.shape();
        if rows != cols {
            return Err(NumericsError::DimensionMismatch(format!(
                "cholesky of non-square {rows}x{cols} matrix"
            )));
        }
        let n = rows;
        let scale = (0..n)
            .fold(0.0f64, |m, i| m.max(a.get(i, i).abs()))
            .max(1.0);
        for i in 0..n {
            for j in 0..i {
                let diff = (a.get(i, j) - a.get(j, i)).abs();
                if diff > SYMMETRY_TOL * scale {
                    return Err(NumericsError::NotSymmetric {
                        row: i,
                        col: j,
                        diff,
                    });
                }
            }
        }

        let mut lower = vec![0.0; n * n];
        for j in 0..n {
            let mut pivot = a.get(j, j);
            for k in 0..j {
                pivot -= lower[j * n + k] * lower[j * n + k];
            }
            // negated so that a NaN pivot is rejected too
            #[allow(clippy::neg_cmp_op_on_partial_ord)]
            if !(pivot > RELATIVE_PIVOT_TOL * scale) {
                return Err(NumericsError::NotPositiveDefinite { column: j, pivot });
            }
            let diag = pivot.sqrt();
            lower[j * n + j] = diag;
            for i in (j + 1)..n {
                let mut s = a.get(i, j);
                for k in 0..j {
                    s -= lower[i * n + k] * lower[j * n + k];
                }
                lower[i * n + j] = s / diag;
            }
        }
        Ok(Cholesky { n, lower })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves `L z = b` in place.
    pub fn forward_substitute(&self, b: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let mut s = b[i];
            for k in 0..i {
                s -= self.lower[i * n + k] * b[k];
            }
            b[i] = s / self.lower[i * n + i];
        }
    }

    /// Solves `Lᵀ x = z` in place.
    pub fn back_substitute(&self, z: &mut [f64]) {
        let n = self.n;
        for i in (0..n).rev() {
            let mut s = z[i];
            for k in (i + 1)..n {
                s -= self.lower[k * n + i] * z[k];
            }
            z[i] = s / self.lower[i * n + i];
        }
    }

    pub fn solve_vec(&self, b: &[f64]) -> Result<Vec<f64>, NumericsError> {
        if b.len() != self.n {
            return Err(NumericsError::DimensionMismatch(format!(
                "right-hand side of length {} for a {}x{} system",
                b.len(),
                self.n,
                self.n
            )));
        }
        let mut x = b.to_vec();
        self.forward_substitute(&mut x);
        self.back_substitute(&mut x);
        Ok(x)
    }

    pub fn solve(&self, b: &Matrix) -> Result<Matrix, NumericsError> {
        if b.rows() != self.n {
            return Err(NumericsError::DimensionMismatch(format!(
                "right-hand side with {} rows for a {}x{} system",
                b.rows(),
                self.n,
                self.n
            )));
        }
        let mut out = Matrix::zeros(self.n, b.cols());
        for c in 0..b.cols() {
            let x = self.solve_vec(&b.column_values(c))?;
            for (r, v) in x.into_iter().enumerate() {
                out.set(r, c, v);
            }
        }
        Ok(out)
    }

    /// `vᵀ A⁻¹ v` as `‖L⁻¹ v‖²`, which never goes negative.
    pub fn inverse_quadratic_form(&self, v: &[f64]) -> Result<f64, NumericsError> {
        if v.len() != self.n {
            return Err(NumericsError::DimensionMismatch(format!(
                "vector of length {} for a {}x{} form",
                v.len(),
                self.n,
                self.n
            )));
        }
        let mut z = v.to_vec();
        self.forward_substitute(&mut z);
        Ok(z.iter().map(|x| x * x).sum())
    }

    pub fn inverse(&self) -> Matrix {
        let mut inv = self
            .solve(&Matrix::identity(self.n))
            .expect("identity has matching dimensions");
        // symmetrize away rounding noise
        for i in 0..self.n {
            for j in 0..i {
                let avg = 0.5 * (inv.get(i, j) + inv.get(j, i));
                inv.set(i, j, avg);
                inv.set(j, i, avg);
            }
        }
        inv
    }
}

/// Solves `a · x = b` for a symmetric positive-definite `a`.
pub fn solve_spd(a: &Matrix, b: &Matrix) -> Result<Matrix, NumericsError> {
    if a.rows() != b.rows() {
        return Err(NumericsError::DimensionMismatch(format!(
            "{}x{} system with {}x{} right-hand side",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        )));
    }
    Cholesky::factor(a)?.solve(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RandomStream;
    use rand::Rng;

    fn random_spd(n: usize, rng: &mut RandomStream) -> Matrix {
        let m = Matrix::new(
            n,
            n,
            (0..n * n).map(|_| rng.random_range(-1.0..1.0)).collect(),
        )
        .unwrap();
        let mut a = m.gram();
        for i in 0..n {
            a.set(i, i, a.get(i, i) + 1.0);
        }
        a
    }

    fn residual_ok(a: &Matrix, x: &Matrix, b: &Matrix) -> bool {
        let r = a.matmul(x).unwrap().sub(b).unwrap();
        r.norm_inf() <= 1e-8 * (1.0 + b.norm_inf())
    }

    #[test]
    fn identity_system_returns_rhs() {
        let b = Matrix::column(&[3.0, -1.5, 7.25]).unwrap();
        assert_eq!(solve_spd(&Matrix::identity(3), &b).unwrap(), b);
    }

    #[test]
    fn diagonal_system() {
        let a = Matrix::from_rows(&[[4.0, 0.0], [0.0, 9.0]]).unwrap();
        let b = Matrix::column(&[8.0, 27.0]).unwrap();
        let x = solve_spd(&a, &b).unwrap();
        assert_eq!(x.data(), &[2.0, 3.0]);
    }

    #[test]
    fn random_five_by_five_residual() {
        let mut rng = RandomStream::new(11, 0);
        let a = random_spd(5, &mut rng);
        let b = Matrix::new(5, 1, (0..5).map(|_| rng.random_range(-3.0..3.0)).collect()).unwrap();
        let x = solve_spd(&a, &b).unwrap();
        assert!(residual_ok(&a, &x, &b));
    }

    #[test]
    fn random_systems_up_to_fifty() {
        let mut rng = RandomStream::new(12, 0);
        for n in [1, 2, 7, 20, 50] {
            let a = random_spd(n, &mut rng);
            let b = Matrix::new(
                n,
                2,
                (0..2 * n).map(|_| rng.random_range(-5.0..5.0)).collect(),
            )
            .unwrap();
            let x = solve_spd(&a, &b).unwrap();
            assert!(residual_ok(&a, &x, &b), "n = {n}");
        }
    }

    #[test]
    fn singular_matrix_is_rejected() {
        let a = Matrix::from_rows(&[[1.0, 2.0], [2.0, 4.0]]).unwrap();
        let err = solve_spd(&a, &Matrix::column(&[1.0, 1.0]).unwrap()).unwrap_err();
        assert!(matches!(
            err,
            NumericsError::NotPositiveDefinite { column: 1, .. }
        ));
    }

    #[test]
    fn asymmetric_matrix_is_rejected() {
        let a = Matrix::from_rows(&[[2.0, 1.0], [0.0, 2.0]]).unwrap();
        assert!(matches!(
            Cholesky::factor(&a),
            Err(NumericsError::NotSymmetric { .. })
        ));
    }

    #[test]
    fn quadratic_form_matches_inverse() {
        let mut rng = RandomStream::new(13, 0);
        let a = random_spd(4, &mut rng);
        let chol = Cholesky::factor(&a).unwrap();
        let v = [0.3, -1.2, 2.0, 0.7];
        let inv = chol.inverse();
        let direct: f64 = (0..4)
            .map(|i| (0..4).map(|j| v[i] * inv.get(i, j) * v[j]).sum::<f64>())
            .sum();
        let q = chol.inverse_quadratic_form(&v).unwrap();
        assert!((q - direct).abs() < 1e-10 * direct.abs().max(1.0));
    }
}
