use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Real symmetric matrix. Symmetry is exact: `m[(i, j)] == m[(j, i)]` bitwise.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

/// Eigen-decomposition with eigenvalues in descending order.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors, column `k` belongs to `values[k]`.
    pub vectors: DMatrix<f64>,
}

impl SymMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::InvalidInput(format!(
                "matrix is {}x{}, not square",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.nrows() == 0 {
            return Err(Error::InvalidInput("matrix dimension must be at least 1".into()));
        }
        let d = m.nrows();
        for i in 0..d {
            for j in (i + 1)..d {
                if m[(i, j)].to_bits() != m[(j, i)].to_bits() {
                    return Err(Error::InvalidInput(format!(
                        "matrix is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(SymMatrix(m))
    }

    pub fn from_row_slice(dim: usize, data: &[f64]) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                got: data.len(),
            });
        }
        Self::new(DMatrix::from_row_slice(dim, dim, data))
    }

    /// Builds a symmetric matrix from the entries `f(i, j)` with `i <= j`.
    pub fn from_upper_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(dim >= 1, "dimension must be at least 1");
        let mut m = DMatrix::zeros(dim, dim);
        for i in 0..dim {
            for j in i..dim {
                let v = f(i, j);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        SymMatrix(m)
    }

    /// Symmetrizes `(m + mᵀ) / 2`.
    pub fn symmetrize(m: &DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(Error::InvalidInput("cannot symmetrize a non-square matrix".into()));
        }
        Ok(Self::from_upper_fn(m.nrows(), |i, j| 0.5 * (m[(i, j)] + m[(j, i)])))
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "dimension must be at least 1");
        SymMatrix(DMatrix::zeros(dim, dim))
    }

    pub fn identity(dim: usize) -> Self {
        assert!(dim >= 1, "dimension must be at least 1");
        SymMatrix(DMatrix::identity(dim, dim))
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        Self::from_upper_fn(diag.len(), |i, j| if i == j { diag[i] } else { 0.0 })
    }

    pub(crate) fn from_matrix_unchecked(m: DMatrix<f64>) -> Self {
        debug_assert_eq!(m.nrows(), m.ncols());
        SymMatrix(m)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.0[(i, i)]).collect()
    }

    /// `self += weight * v vᵀ`, written to both triangles from one product.
    pub fn add_outer(&mut self, weight: f64, v: &[f64]) {
        let d = self.dim();
        assert_eq!(v.len(), d, "vector length must match dimension");
        for i in 0..d {
            let wi = weight * v[i];
            for j in i..d {
                let x = wi * v[j];
                self.0[(i, j)] += x;
                if i != j {
                    self.0[(j, i)] += x;
                }
            }
        }
    }

    /// `self + shift * I`.
    pub fn shifted(&self, shift: f64) -> Self {
        let mut m = self.0.clone();
        for i in 0..self.dim() {
            m[(i, i)] += shift;
        }
        SymMatrix(m)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }

    /// Principal submatrix on the given row/column indices.
    pub fn principal_submatrix(&self, idx: &[usize]) -> Self {
        Self::from_upper_fn(idx.len(), |a, b| self.0[(idx[a], idx[b])])
    }

    pub fn eigen(&self) -> Result<SymEigen> {
        eig_sym(self)
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        eigenvalues_desc(self)
    }
}

fn check_finite(m: &SymMatrix) -> Result<()> {
    if m.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput("matrix has non-finite entries".into()))
    }
}

/// Full symmetric eigen-decomposition, eigenvalues sorted descending.
pub fn eig_sym(m: &SymMatrix) -> Result<SymEigen> {
    check_finite(m)?;
    let eig = SymmetricEigen::new(m.0.clone());
    let d = m.dim();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = DMatrix::from_fn(d, d, |i, c| eig.eigenvectors[(i, order[c])]);
    Ok(SymEigen { values, vectors })
}

/// Eigenvalues only, sorted descending.
pub fn eigenvalues_desc(m: &SymMatrix) -> Result<Vec<f64>> {
    check_finite(m)?;
    Ok(eigenvalues_desc_raw(m.0.clone()))
}

/// Eigenvalues of a symmetric matrix given by value; no validation.
pub(crate) fn eigenvalues_desc_raw(m: DMatrix<f64>) -> Vec<f64> {
    let mut v: Vec<f64> = if m.nrows() == 1 {
        vec![m[(0, 0)]]
    } else {
        m.symmetric_eigenvalues().iter().copied().collect()
    };
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

/// Largest eigenvalue of a symmetric matrix given by value; no validation.
pub(crate) fn lambda_max_raw(m: DMatrix<f64>) -> f64 {
    if m.nrows() == 1 {
        return m[(0, 0)];
    }
    m.symmetric_eigenvalues().max()
}

impl SymEigen {
    /// `V diag(λ) Vᵀ`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let d = self.values.len();
        let scaled = DMatrix::from_fn(d, d, |i, c| self.vectors[(i, c)] * self.values[c]);
        &scaled * self.vectors.transpose()
    }
}
