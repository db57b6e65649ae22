//! Dense linear algebra for the Nystrom solver and the eigenvalue routines:
//! row-major square matrices, LU decomposition with partial pivoting, and a
//! Hager-style one-norm condition estimate.

use crate::error::{Error, Result};
use crate::scalar::{real, Real};

/// Dense square matrix in row-major storage.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Real> SquareMatrix<T> {
    /// Builds an `n x n` zero matrix.
    ///
    /// # Errors
    ///
    /// Returns [`Error::InvalidInput`] when `n` is zero.
    pub fn zeros(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("matrix dimension must be positive"));
        }
        Ok(Self { n, data: vec![T::zero(); n * n] })
    }

    /// Builds an `n x n` matrix with entries `f(row, col)`.
    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> T) -> Result<Self> {
        let mut m = Self::zeros(n)?;
        for i in 0..n {
            for j in 0..n {
                m.data[i * n + j] = f(i, j);
            }
        }
        Ok(m)
    }

    /// Dimension of the matrix.
    pub fn dim(&self) -> usize {
        self.n
    }

    /// Entry at `(row, col)`.
    pub fn at(&self, row: usize, col: usize) -> T {
        self.data[row * self.n + col]
    }

    /// Overwrites the entry at `(row, col)`.
    pub fn set(&mut self, row: usize, col: usize, value: T) {
        self.data[row * self.n + col] = value;
    }

    /// Matrix-vector product `A x`.
    ///
    /// # Errors
    ///
    /// Returns [`Error::InvalidInput`] on a length mismatch.
    pub fn matvec(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.n {
            return Err(Error::invalid(format!(
                "matvec got a vector of length {} for dimension {}",
                x.len(),
                self.n
            )));
        }
        let mut out = vec![T::zero(); self.n];
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.data[i * self.n..(i + 1) * self.n];
            *o = row.iter().zip(x).map(|(&a, &b)| a * b).sum();
        }
        Ok(out)
    }

    /// One-norm (maximum absolute column sum).
    pub fn norm_one(&self) -> T {
        let mut best = T::zero();
        for j in 0..self.n {
            let mut col = T::zero();
            for i in 0..self.n {
                col += self.data[i * self.n + j].abs();
            }
            best = best.max(col);
        }
        best
    }

    /// LU decomposition with partial pivoting.
    ///
    /// # Errors
    ///
    /// Returns [`Error::Numeric`] when the matrix is exactly singular.
    pub fn lu(&self) -> Result<LuDecomposition<T>> {
        let n = self.n;
        let mut lu = self.data.clone();
        let mut pivots = vec![0usize; n];
        let mut swap_sign = 1i8;
        for k in 0..n {
            let mut pivot_row = k;
            let mut pivot_mag = lu[k * n + k].abs();
            for i in (k + 1)..n {
                let mag = lu[i * n + k].abs();
                if mag > pivot_mag {
                    pivot_mag = mag;
                    pivot_row = i;
                }
            }
            if pivot_mag == T::zero() {
                return Err(Error::numeric(format!("matrix is singular at column {k}")));
            }
            if pivot_row != k {
                for j in 0..n {
                    lu.swap(k * n + j, pivot_row * n + j);
                }
                swap_sign = -swap_sign;
            }
            pivots[k] = pivot_row;
            let pivot = lu[k * n + k];
            for i in (k + 1)..n {
                let factor = lu[i * n + k] / pivot;
                lu[i * n + k] = factor;
                for j in (k + 1)..n {
                    let upper = lu[k * n + j];
                    lu[i * n + j] -= factor * upper;
                }
            }
        }
        Ok(LuDecomposition { n, lu, pivots, swap_sign })
    }
}

/// LU factors of a square matrix, `P A = L U` with unit-diagonal `L`.
#[derive(Debug, Clone)]
pub struct LuDecomposition<T> {
    n: usize,
    lu: Vec<T>,
    pivots: Vec<usize>,
    swap_sign: i8,
}

impl<T: Real> LuDecomposition<T> {
    /// Solves `A x = b`.
    ///
    /// # Errors
    ///
    /// Returns [`Error::InvalidInput`] on a length mismatch.
    pub fn solve(&self, b: &[T]) -> Result<Vec<T>> {
        if b.len() != self.n {
            return Err(Error::invalid(format!(
                "solve got a vector of length {} for dimension {}",
                b.len(),
                self.n
            )));
        }
        let n = self.n;
        let mut x = b.to_vec();
        for k in 0..n {
            x.swap(k, self.pivots[k]);
        }
        for i in 1..n {
            let mut acc = x[i];
            for j in 0..i {
                acc -= self.lu[i * n + j] * x[j];
            }
            x[i] = acc;
        }
        for i in (0..n).rev() {
            let mut acc = x[i];
            for j in (i + 1)..n {
                acc -= self.lu[i * n + j] * x[j];
            }
            x[i] = acc / self.lu[i * n + i];
        }
        Ok(x)
    }

    /// Solves the transposed system `A^T x = b`.
    ///
    /// # Errors
    ///
    /// Returns [`Error::InvalidInput`] on a length mismatch.
    pub fn solve_transpose(&self, b: &[T]) -> Result<Vec<T>> {
        if b.len() != self.n {
            return Err(Error::invalid(format!(
                "solve_transpose got a vector of length {} for dimension {}",
                b.len(),
                self.n
            )));
        }
        let n = self.n;
        let mut x = b.to_vec();
        for i in 0..n {
            let mut acc = x[i];
            for j in 0..i {
                acc -= self.lu[j * n + i] * x[j];
            }
            x[i] = acc / self.lu[i * n + i];
        }
        for i in (0..n).rev() {
            let mut acc = x[i];
            for j in (i + 1)..n {
                acc -= self.lu[j * n + i] * x[j];
            }
            x[i] = acc;
        }
        for k in (0..n).rev() {
            x.swap(k, self.pivots[k]);
        }
        Ok(x)
    }

    /// Sign of the determinant: `+1` or `-1`.
    ///
    /// The decomposition rejects exactly singular matrices, so a zero sign
    /// cannot occur here.
    pub fn determinant_sign(&self) -> i8 {
        let mut sign = self.swap_sign;
        for i in 0..self.n {
            if self.lu[i * self.n + i] < T::zero() {
                sign = -sign;
            }
        }
        sign
    }

    /// Hager-style estimate of the one-norm condition number, given the
    /// one-norm of the original matrix.
    pub fn condition_one_norm(&self, a_norm_one: T) -> T {
        let n = self.n;
        let mut x = vec![T::one() / real::<T>(n as f64); n];
        let mut inv_norm = T::zero();
        for _ in 0..5 {
            let y = self.solve(&x).expect("length matches decomposition dimension");
            inv_norm = y.iter().map(|v| v.abs()).sum();
            let xi: Vec<T> = y
                .iter()
                .map(|&v| if v >= T::zero() { T::one() } else { -T::one() })
                .collect();
            let z = self.solve_transpose(&xi).expect("length matches decomposition dimension");
            let (mut best_j, mut best_mag) = (0usize, T::zero());
            for (j, &v) in z.iter().enumerate() {
                if v.abs() > best_mag {
                    best_mag = v.abs();
                    best_j = j;
                }
            }
            let z_dot_x: T = z.iter().zip(&x).map(|(&a, &b)| a * b).sum();
            if best_mag <= z_dot_x {
                break;
            }
            x = vec![T::zero(); n];
            x[best_j] = T::one();
        }
        a_norm_one * inv_norm
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn assert_close(actual: f64, expected: f64, tol: f64, what: &str) {
        let delta = (actual - expected).abs();
        assert!(
            delta <= tol,
            "{what}: expected {expected}, got {actual} (delta={delta:e}, tol={tol:e})"
        );
    }

    #[test]
    fn solve_recovers_known_solution() {
        let a = SquareMatrix::from_fn(3, |i, j| match (i, j) {
            (0, 0) => 4.0,
            (0, 1) => -2.0,
            (0, 2) => 1.0,
            (1, 0) => -2.0,
            (1, 1) => 4.0,
            (1, 2) => -2.0,
            (2, 0) => 1.0,
            (2, 1) => -2.0,
            (2, 2) => 4.0,
            _ => unreachable!(),
        })
        .unwrap();
        let x_true = [1.0, -0.5, 2.0];
        let b = a.matvec(&x_true).unwrap();
        let lu = a.lu().unwrap();
        let x = lu.solve(&b).unwrap();
        for (i, (&xi, &ti)) in x.iter().zip(&x_true).enumerate() {
            assert_close(xi, ti, 1e-13, &format!("solution component {i}"));
        }
    }

    #[test]
    fn solve_transpose_matches_explicit_transpose() {
        let a = SquareMatrix::from_fn(4, |i, j| ((i * 7 + j * 3 + 1) % 11) as f64 + (i == j) as u64 as f64 * 12.0).unwrap();
        let at = SquareMatrix::from_fn(4, |i, j| a.at(j, i)).unwrap();
        let b = [1.0, 2.0, -3.0, 0.5];
        let via_transpose_solve = a.lu().unwrap().solve_transpose(&b).unwrap();
        let via_transposed_matrix = at.lu().unwrap().solve(&b).unwrap();
        for i in 0..4 {
            assert_close(
                via_transpose_solve[i],
                via_transposed_matrix[i],
                1e-12,
                "transpose solve agreement",
            );
        }
    }

    #[test]
    fn determinant_sign_tracks_row_swaps_and_diagonal() {
        let mut perm = SquareMatrix::<f64>::zeros(3).unwrap();
        perm.set(0, 1, 1.0);
        perm.set(1, 0, 1.0);
        perm.set(2, 2, 1.0);
        assert_eq!(perm.lu().unwrap().determinant_sign(), -1);

        let diag = SquareMatrix::from_fn(3, |i, j| {
            if i == j {
                [2.0, -3.0, 5.0][i]
            } else {
                0.0
            }
        })
        .unwrap();
        assert_eq!(diag.lu().unwrap().determinant_sign(), -1);
    }

    #[test]
    fn singular_matrix_is_rejected() {
        let a = SquareMatrix::from_fn(3, |i, _| (i + 1) as f64).unwrap();
        match a.lu() {
            Err(Error::Numeric(msg)) => assert!(msg.contains("singular"), "message: {msg}"),
            other => panic!("expected a numeric failure, got {other:?}"),
        }
    }

    #[test]
    fn condition_estimate_is_exact_for_diagonal_matrices() {
        let a = SquareMatrix::from_fn(4, |i, j| {
            if i == j {
                [1.0, 0.5, 1e-6, 2.0][i]
            } else {
                0.0
            }
        })
        .unwrap();
        let cond = a.lu().unwrap().condition_one_norm(a.norm_one());
        assert_close(cond, 2.0 * 1e6, 1.0, "diagonal condition number");

        let eye = SquareMatrix::from_fn(5, |i, j| if i == j { 1.0 } else { 0.0 }).unwrap();
        assert_close(eye.lu().unwrap().condition_one_norm(eye.norm_one()), 1.0, 1e-12, "identity condition");
    }

    proptest! {
        #[test]
        fn solve_residual_is_small_for_diagonally_dominant_matrices(seed in 0u64..500) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let n = 12usize;
            let mut a = SquareMatrix::<f64>::zeros(n).unwrap();
            for i in 0..n {
                let mut off_sum = 0.0;
                for j in 0..n {
                    if i != j {
                        let v = rng.gen_range(-1.0..1.0);
                        a.set(i, j, v);
                        off_sum += v.abs();
                    }
                }
                a.set(i, i, off_sum + rng.gen_range(0.5..2.0));
            }
            let x_true: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let b = a.matvec(&x_true).unwrap();
            let x = a.lu().unwrap().solve(&b).unwrap();
            let back = a.matvec(&x).unwrap();
            for i in 0..n {
                prop_assert!((back[i] - b[i]).abs() < 1e-9);
            }
        }
    }
}
