//! Small dense linear-algebra helpers shared by the Schur, solver and
//! certificate modules.

use nalgebra::{DMatrix, SymmetricEigen};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Determinant by LU with partial pivoting.
pub fn det_lu(rows: &[Vec<f64>]) -> f64 {
    let n = rows.len();
    if n == 0 {
        return 1.0;
    }
    let m = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
    m.lu().determinant()
}

/// Exact determinant by fraction-based Gaussian elimination.
pub fn det_exact(rows: &[Vec<BigRational>]) -> BigRational {
    let n = rows.len();
    let mut a: Vec<Vec<BigRational>> = rows.to_vec();
    let mut det = BigRational::one();
    for col in 0..n {
        let Some(piv) = (col..n).find(|&r| !a[r][col].is_zero()) else {
            return BigRational::zero();
        };
        if piv != col {
            a.swap(piv, col);
            det = -det;
        }
        let p = a[col][col].clone();
        det *= &p;
        for r in col + 1..n {
            if a[r][col].is_zero() {
                continue;
            }
            let factor = &a[r][col] / &p;
            for c in col..n {
                let sub = &factor * &a[col][c];
                a[r][c] -= sub;
            }
        }
    }
    det
}

/// Exact rational value of a finite double.
pub fn to_rational(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite float")
}

pub fn to_f64(x: &BigRational) -> f64 {
    x.to_f64().unwrap_or_else(|| {
        if x.is_negative() {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        }
    })
}

pub fn rational_pow(x: &BigRational, e: u32) -> BigRational {
    num_traits::pow(x.clone(), e as usize)
}

/// `m (m-1) ... (m-j+1)`, zero when `j > m`.
pub fn falling_factorial(m: u32, j: u32) -> BigInt {
    if j > m {
        return BigInt::zero();
    }
    (0..j).fold(BigInt::one(), |acc, i| acc * BigInt::from(m - i))
}

pub fn factorial(n: u32) -> BigInt {
    falling_factorial(n, n)
}

/// Eigenvalues (ascending) and matching eigenvectors (columns) of a
/// symmetric matrix.
pub fn sym_eigen(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m.clone());
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (vals, vecs)
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    if m.nrows() == 1 {
        return m[(0, 0)];
    }
    SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .fold(f64::INFINITY, |a, &b| a.min(b))
}

/// Projection onto the PSD cone by clipping negative eigenvalues.
pub fn psd_project(m: &DMatrix<f64>) -> DMatrix<f64> {
    let (vals, vecs) = sym_eigen(m);
    let mut out = DMatrix::zeros(m.nrows(), m.ncols());
    for (i, &v) in vals.iter().enumerate() {
        if v > 0.0 {
            let u = vecs.column(i);
            out += v * &u * u.transpose();
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_and_lu_agree_on_small_matrix() {
        let rows = vec![
            vec![9.0, 3.0, 1.0],
            vec![1.0, 1.0, 1.0],
            vec![2.0, 1.0, 0.0],
        ];
        let exact: Vec<Vec<BigRational>> = rows
            .iter()
            .map(|r| r.iter().map(|&x| to_rational(x)).collect())
            .collect();
        assert_eq!(to_f64(&det_exact(&exact)), -4.0);
        assert!((det_lu(&rows) + 4.0).abs() < 1e-12);
    }

    #[test]
    fn singular_matrix_has_zero_exact_det() {
        let rows = vec![
            vec![to_rational(1.0), to_rational(2.0)],
            vec![to_rational(2.0), to_rational(4.0)],
        ];
        assert!(det_exact(&rows).is_zero());
    }

    #[test]
    fn projection_clips_negative_part() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1e-9]);
        let p = psd_project(&m);
        assert!(min_eigenvalue(&p) >= 0.0);
        assert!((p[(0, 0)] - 1.0).abs() < 1e-15);
    }
}
