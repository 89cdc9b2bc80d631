//! Small dense matrices and a cyclic Jacobi symmetric eigensolver.

use std::fmt;
use std::ops::{Index, IndexMut};

const MAX_SWEEPS: usize = 100;
const OFF_DIAGONAL_TOL: f64 = 1e-12;
/// Relative asymmetry accepted by symmetric call sites.
pub const SYMMETRY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum LinalgError {
    NotSquare { rows: usize, cols: usize },
    Asymmetric { max_deviation: f64 },
    NonFinite,
    NoConvergence { sweeps: usize },
    Shape(String),
}

impl fmt::Display for LinalgError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LinalgError::NotSquare { rows, cols } => write!(f, "matrix is {rows}x{cols}, not square"),
            LinalgError::Asymmetric { max_deviation } => {
                write!(f, "matrix is not symmetric (max |M - Mᵀ| = {max_deviation:e})")
            }
            LinalgError::NonFinite => f.write_str("matrix has non-finite entries"),
            LinalgError::NoConvergence { sweeps } => write!(f, "Jacobi iteration did not converge in {sweeps} sweeps"),
            LinalgError::Shape(m) => f.write_str(m),
        }
    }
}

impl std::error::Error for LinalgError {}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let mut m = Matrix::zeros(values.len(), values.len());
        for (i, v) in values.iter().enumerate() {
            m[(i, i)] = *v;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, LinalgError> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(LinalgError::Shape("rows have different lengths".into()));
        }
        Ok(Matrix { rows: r, cols: c, data: rows.concat() })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)];
            }
        }
        out
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix, LinalgError> {
        if self.cols != other.rows {
            return Err(LinalgError::Shape(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        Ok(out)
    }

    pub fn add(&self, other: &Matrix) -> Result<Matrix, LinalgError> {
        if (self.rows, self.cols) != (other.rows, other.cols) {
            return Err(LinalgError::Shape("cannot add matrices of different shape".into()));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Ok(Matrix { rows: self.rows, cols: self.cols, data })
    }

    pub fn scale(&self, c: f64) -> Matrix {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|v| v * c).collect() }
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// max |M - Mᵀ|
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.rows {
            for j in (i + 1)..self.cols.min(self.rows) {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    /// Square, finite and symmetric within [`SYMMETRY_TOL`]·max|M|.
    pub fn validate_symmetric(&self) -> Result<(), LinalgError> {
        if self.rows != self.cols {
            return Err(LinalgError::NotSquare { rows: self.rows, cols: self.cols });
        }
        if !self.is_finite() {
            return Err(LinalgError::NonFinite);
        }
        let dev = self.asymmetry();
        if dev > SYMMETRY_TOL * self.max_abs() {
            return Err(LinalgError::Asymmetric { max_deviation: dev });
        }
        Ok(())
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        assert!(i < self.rows && j < self.cols, "index out of bounds");
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        assert!(i < self.rows && j < self.cols, "index out of bounds");
        &mut self.data[i * self.cols + j]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricEigen {
    /// Ascending.
    pub values: Vec<f64>,
    /// Column k is the unit eigenvector of `values[k]`.
    pub vectors: Matrix,
    pub sweeps: usize,
}

fn off_diagonal_norm(a: &Matrix) -> f64 {
    let n = a.rows;
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[(i, j)] * a[(i, j)];
            }
        }
    }
    s.sqrt()
}

/// Eigen-decomposition by cyclic Jacobi rotations.
///
/// The input is symmetrised as (M + Mᵀ)/2 after validation.
pub fn symmetric_eigen(m: &Matrix) -> Result<SymmetricEigen, LinalgError> {
    m.validate_symmetric()?;
    let n = m.rows;
    let mut a = m.add(&m.transpose())?.scale(0.5);
    let mut v = Matrix::identity(n);
    let target = OFF_DIAGONAL_TOL * a.frobenius_norm();
    let mut sweeps = 0;
    while off_diagonal_norm(&a) > target {
        if sweeps == MAX_SWEEPS {
            return Err(LinalgError::NoConvergence { sweeps });
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (col, &src) in order.iter().enumerate() {
        for k in 0..n {
            vectors[(k, col)] = v[(k, src)];
        }
    }
    Ok(SymmetricEigen { values, vectors, sweeps })
}

/// Eigenvalues in ascending order.
pub fn symmetric_eigenvalues(m: &Matrix) -> Result<Vec<f64>, LinalgError> {
    Ok(symmetric_eigen(m)?.values)
}

/// `(max eigenvalue < -tol, max eigenvalue)`. An empty matrix has max eigenvalue -∞.
pub fn is_negative_definite(m: &Matrix, tol: f64) -> Result<(bool, f64), LinalgError> {
    let values = symmetric_eigenvalues(m)?;
    let max = values.last().copied().unwrap_or(f64::NEG_INFINITY);
    Ok((max < -tol, max))
}
