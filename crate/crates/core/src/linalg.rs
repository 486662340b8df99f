//! Thin dense helpers over faer.

use crate::error::{Error, Result};
use faer::linalg::solvers::Solve;
use faer::linalg::triangular_solve::{solve_lower_triangular_in_place, solve_upper_triangular_in_place};
use faer::{c64, Col, Mat, Par, Side};

pub type Matrix = Mat<f64>;

pub fn zeros(r: usize, c: usize) -> Matrix {
    Mat::zeros(r, c)
}

pub fn to_col(x: &[f64]) -> Col<f64> {
    Col::from_fn(x.len(), |i| x[i])
}

pub fn from_col(c: &Col<f64>) -> Vec<f64> {
    c.iter().copied().collect()
}

pub fn matvec(a: &Matrix, x: &[f64]) -> Vec<f64> {
    assert_eq!(a.ncols(), x.len());
    let mut y = vec![0.0; a.nrows()];
    for j in 0..a.ncols() {
        let xj = x[j];
        if xj == 0.0 {
            continue;
        }
        let col = a.col_as_slice(j);
        for (yi, aij) in y.iter_mut().zip(col) {
            *yi += aij * xj;
        }
    }
    y
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// x^T A x.
pub fn quad(a: &Matrix, x: &[f64]) -> f64 {
    dot(x, &matvec(a, x))
}

pub fn frobenius(a: &Matrix) -> f64 {
    a.norm_l2()
}

pub fn transpose(a: &Matrix) -> Matrix {
    a.transpose().to_owned()
}

/// (A + A^T)/2.
pub fn symmetrize(a: &Matrix) -> Matrix {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| 0.5 * (a[(i, j)] + a[(j, i)]))
}

pub fn add_outer(a: &mut Matrix, scale: f64, u: &[f64], v: &[f64]) {
    for j in 0..v.len() {
        let s = scale * v[j];
        if s == 0.0 {
            continue;
        }
        for i in 0..u.len() {
            a[(i, j)] += s * u[i];
        }
    }
}

/// Principal submatrix on the listed indices.
pub fn select(a: &Matrix, idx: &[usize]) -> Matrix {
    Mat::from_fn(idx.len(), idx.len(), |i, j| a[(idx[i], idx[j])])
}

/// Cholesky factor L with A = L L^T.
pub struct Cholesky {
    l: Matrix,
}

impl Cholesky {
    pub fn new(a: &Matrix, what: &str) -> Result<Self> {
        let llt = a
            .llt(Side::Lower)
            .map_err(|_| Error::Assembly(format!("{what} is not positive definite")))?;
        Ok(Self { l: llt.L().to_owned() })
    }

    pub fn l(&self) -> &Matrix {
        &self.l
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    /// L^{-1} B in place.
    pub fn solve_l_in_place(&self, b: &mut Matrix) {
        solve_lower_triangular_in_place(self.l.as_ref(), b.as_mut(), Par::Seq);
    }

    /// L^{-T} B in place.
    pub fn solve_lt_in_place(&self, b: &mut Matrix) {
        solve_upper_triangular_in_place(self.l.transpose(), b.as_mut(), Par::Seq);
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut m = Mat::from_fn(b.len(), 1, |i, _| b[i]);
        self.solve_l_in_place(&mut m);
        self.solve_lt_in_place(&mut m);
        m.col_as_slice(0).to_vec()
    }

    pub fn solve_mat(&self, b: &Matrix) -> Matrix {
        let mut m = b.clone();
        self.solve_l_in_place(&mut m);
        self.solve_lt_in_place(&mut m);
        m
    }
}

pub struct Lu {
    lu: faer::linalg::solvers::PartialPivLu<f64>,
}

impl Lu {
    pub fn new(a: &Matrix) -> Result<Self> {
        let lu = a.partial_piv_lu();
        let mut min_piv = f64::INFINITY;
        let u = lu.U();
        for i in 0..u.nrows() {
            min_piv = min_piv.min(u[(i, i)].abs());
        }
        if !(min_piv > 0.0) || !min_piv.is_finite() {
            return Err(Error::Numerical("singular matrix in LU factorization".into()));
        }
        Ok(Self { lu })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        from_col(&self.lu.solve(to_col(b)))
    }
}

pub fn sym_eigenvalues(a: &Matrix) -> Result<Vec<f64>> {
    a.self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Numerical(format!("symmetric eigensolver failed: {e:?}")))
}

/// Eigenvalues and eigenvectors (columns) of a symmetric matrix, ascending.
pub fn sym_eigen(a: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    let e = a
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numerical(format!("symmetric eigensolver failed: {e:?}")))?;
    let s = e.S();
    let vals = (0..a.nrows()).map(|i| s[i]).collect();
    Ok((vals, e.U().to_owned()))
}

pub fn eigenvalues(a: &Matrix) -> Result<Vec<c64>> {
    a.eigenvalues()
        .map_err(|e| Error::Numerical(format!("eigensolver did not converge: {e:?}")))
}

/// Eigenvalues and eigenvectors of a general real matrix.
pub fn eigen(a: &Matrix) -> Result<(Vec<c64>, Mat<c64>)> {
    let e = a.eigen().map_err(|e| Error::Numerical(format!("eigensolver did not converge: {e:?}")))?;
    let s = e.S();
    let vals = (0..a.nrows()).map(|i| s[i]).collect();
    Ok((vals, e.U().to_owned()))
}

pub fn singular_values(a: &Matrix) -> Result<Vec<f64>> {
    a.singular_values()
        .map_err(|e| Error::Numerical(format!("svd failed: {e:?}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_roundtrip() {
        let a = Mat::from_fn(3, 3, |i, j| if i == j { 4.0 } else { 1.0 });
        let ch = Cholesky::new(&a, "a").unwrap();
        let x = ch.solve(&[1.0, 2.0, 3.0]);
        let r = matvec(&a, &x);
        for (ri, bi) in r.iter().zip([1.0, 2.0, 3.0]) {
            assert!((ri - bi).abs() < 1e-14);
        }
    }

    #[test]
    fn indefinite_rejected() {
        let a = Mat::from_fn(2, 2, |i, j| if i == j { 1.0 } else { 2.0 });
        assert!(Cholesky::new(&a, "a").is_err());
    }

    #[test]
    fn lu_solves() {
        let a = Mat::from_fn(2, 2, |i, j| [[0.0, 1.0], [2.0, 0.0]][i][j]);
        let x = Lu::new(&a).unwrap().solve(&[3.0, 4.0]);
        assert_eq!(x, vec![2.0, 3.0]);
    }
}
