//! Dense linear algebra with explicit tolerance contracts.
//!
//! Matrices are `nalgebra` dense matrices. Everything here is a pure function
//! of its inputs.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Relative singular-value cutoff used for rank decisions and pseudo-inverses.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// Entries within this relative distance of the largest magnitude count as tied
/// when fixing singular-vector signs.
const SIGN_TIE_TOL: f64 = 1e-8;

/// Singular value decomposition `input = left * diag(singular_values) * right^T`
/// with singular values sorted nonincreasing.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub left: Matrix,
    pub singular_values: Vector,
    pub right: Matrix,
}

impl SpectralDecomposition {
    pub fn len(&self) -> usize {
        self.singular_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.singular_values.is_empty()
    }

    /// Reassembles `left * diag(sigma) * right^T`.
    pub fn reconstruct(&self) -> Matrix {
        let mut scaled = self.left.clone();
        for (j, s) in self.singular_values.iter().enumerate() {
            scaled.column_mut(j).scale_mut(*s);
        }
        scaled * self.right.transpose()
    }

    /// First `k` left singular vectors.
    pub fn top_left(&self, k: usize) -> Matrix {
        self.left.columns(0, k).into_owned()
    }
}

/// SVD with a deterministic sign convention: the largest-magnitude entry of each
/// left singular vector is positive (ties go to the lowest row index), and the
/// matching right vector is flipped with it.
///
/// Rectangular inputs yield the thin decomposition with `min(rows, cols)`
/// components.
pub fn svd(matrix: &Matrix) -> Result<SpectralDecomposition> {
    ensure_finite(matrix, "svd input")?;
    let (rows, cols) = matrix.shape();
    let rank_cap = rows.min(cols);
    if rank_cap == 0 {
        return Ok(SpectralDecomposition {
            left: Matrix::zeros(rows, 0),
            singular_values: Vector::zeros(0),
            right: Matrix::zeros(cols, 0),
        });
    }
    let input = faer::Mat::<f64>::from_fn(rows, cols, |i, j| matrix[(i, j)]);
    let raw = input
        .thin_svd()
        .map_err(|e| Error::Numerical(format!("SVD did not converge: {e:?}")))?;
    let (u, v) = (raw.U(), raw.V());
    let diag = raw.S().column_vector();
    let sigma = Vector::from_fn(rank_cap, |i, _| diag[i]);

    let mut order: Vec<usize> = (0..sigma.len()).collect();
    // Stable sort keeps the solver's order among exact ties.
    order.sort_by(|&a, &b| sigma[b].total_cmp(&sigma[a]));

    let mut left = Matrix::zeros(rows, rank_cap);
    let mut right = Matrix::zeros(cols, rank_cap);
    let mut values = Vector::zeros(rank_cap);
    for (dst, &src) in order.iter().enumerate() {
        let mut l = Vector::from_fn(rows, |i, _| u[(i, src)]);
        let mut r = Vector::from_fn(cols, |i, _| v[(i, src)]);
        if sign_flip_needed(&l) {
            l.neg_mut();
            r.neg_mut();
        }
        left.set_column(dst, &l);
        right.set_column(dst, &r);
        values[dst] = sigma[src].max(0.0);
    }
    Ok(SpectralDecomposition {
        left,
        singular_values: values,
        right,
    })
}

fn sign_flip_needed(v: &Vector) -> bool {
    let max = v.amax();
    if max == 0.0 {
        return false;
    }
    let cutoff = max * (1.0 - SIGN_TIE_TOL);
    v.iter()
        .find(|x| x.abs() >= cutoff)
        .is_some_and(|x| *x < 0.0)
}

/// Matrix with orthonormal columns spanning some subspace of `R^S`.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthonormalBasis {
    q: Matrix,
}

impl OrthonormalBasis {
    /// Wraps a matrix that is already known to have orthonormal columns.
    pub fn from_orthonormal(q: Matrix) -> Self {
        debug_assert!(orthonormality_error(&q) < 1e-8);
        Self { q }
    }

    pub fn q(&self) -> &Matrix {
        &self.q
    }

    pub fn rank(&self) -> usize {
        self.q.ncols()
    }

    pub fn ambient_dim(&self) -> usize {
        self.q.nrows()
    }

    /// `P x = q (q^T x)` without forming the projector.
    pub fn project(&self, x: &Vector) -> Vector {
        if self.rank() == 0 {
            return Vector::zeros(x.len());
        }
        &self.q * (self.q.tr_mul(x))
    }

    /// `(I - P) x`.
    pub fn residual(&self, x: &Vector) -> Vector {
        x - self.project(x)
    }

    /// Materialized `S x S` projector `q q^T`.
    pub fn projector(&self) -> Matrix {
        &self.q * self.q.transpose()
    }

    /// Squared row norms of `q`, i.e. `||P e_i||^2` for every `i`.
    pub fn leverage_scores(&self) -> Vector {
        Vector::from_iterator(
            self.q.nrows(),
            self.q.row_iter().map(|row| row.norm_squared()),
        )
    }
}

/// Orthonormal basis of `range(phi)`, keeping singular directions above
/// `rank_tol * sigma_max`. A zero matrix gives a rank-0 basis.
pub fn column_space_basis(phi: &Matrix, rank_tol: f64) -> Result<OrthonormalBasis> {
    let rows = phi.nrows();
    if phi.ncols() > rows {
        return Err(Error::InvalidArgument(format!(
            "feature matrix has {} columns but only {rows} rows",
            phi.ncols()
        )));
    }
    let dec = svd(phi)?;
    let rank = rank_from_values(&dec.singular_values, rank_tol);
    Ok(OrthonormalBasis {
        q: dec.left.columns(0, rank).into_owned(),
    })
}

/// Number of singular values above `rank_tol * sigma_max`.
pub fn numerical_rank(matrix: &Matrix, rank_tol: f64) -> Result<usize> {
    let dec = svd(matrix)?;
    Ok(rank_from_values(&dec.singular_values, rank_tol))
}

fn rank_from_values(values: &Vector, rank_tol: f64) -> usize {
    let Some(&top) = values.iter().next() else {
        return 0;
    };
    if top <= 0.0 {
        return 0;
    }
    values.iter().filter(|&&s| s > rank_tol * top).count()
}

/// Minimum-norm minimizer of `||design w - targets||_2` via the pseudo-inverse
/// with cutoff `1e-10 * sigma_max`.
pub fn least_squares_minnorm(design: &Matrix, targets: &Vector) -> Result<Vector> {
    if design.nrows() != targets.len() {
        return Err(Error::InvalidArgument(format!(
            "design has {} rows but {} targets",
            design.nrows(),
            targets.len()
        )));
    }
    if design.nrows() == 0 {
        return Err(Error::InvalidArgument("least squares needs n >= 1".into()));
    }
    ensure_finite(design, "design matrix")?;
    let dec = svd(design)?;
    let rank = rank_from_values(&dec.singular_values, DEFAULT_RANK_TOL);
    let mut w = Vector::zeros(design.ncols());
    for j in 0..rank {
        let coeff = dec.left.column(j).dot(targets) / dec.singular_values[j];
        w.axpy(coeff, &dec.right.column(j), 1.0);
    }
    Ok(w)
}

/// `||q^T q - I||_max`.
pub fn orthonormality_error(q: &Matrix) -> f64 {
    let gram = q.tr_mul(q);
    let mut worst: f64 = 0.0;
    for i in 0..gram.nrows() {
        for j in 0..gram.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((gram[(i, j)] - target).abs());
        }
    }
    worst
}

/// `M^{-1/2}` for a symmetric positive definite `M`.
pub fn symmetric_inverse_sqrt(m: &Matrix) -> Result<Matrix> {
    if !m.is_square() {
        return Err(Error::InvalidArgument("inverse square root of non-square matrix".into()));
    }
    let eig = SymmetricEigen::new(m.clone());
    let top = eig.eigenvalues.amax();
    if eig.eigenvalues.iter().any(|&l| l <= DEFAULT_RANK_TOL * top) {
        return Err(Error::Numerical(
            "matrix is not positive definite; feature covariance is singular".into(),
        ));
    }
    let mut scaled = eig.eigenvectors.clone();
    for (j, l) in eig.eigenvalues.iter().enumerate() {
        scaled.column_mut(j).scale_mut(1.0 / l.sqrt());
    }
    Ok(scaled * eig.eigenvectors.transpose())
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn symmetric_eigenvalues(m: &Matrix) -> Vector {
    let mut vals: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    vals.sort_by(f64::total_cmp);
    Vector::from_vec(vals)
}

pub fn ensure_finite(m: &Matrix, what: &str) -> Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{what} has non-finite entries")))
    }
}

/// Largest absolute deviation from symmetry.
pub fn asymmetry(m: &Matrix) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}
