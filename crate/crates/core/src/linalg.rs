//! Thin helpers over nalgebra's symmetric eigensolver.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Eigen-decomposition with eigenvalues sorted ascending and eigenvectors
/// permuted to match (column `i` belongs to `values[i]`).
#[derive(Debug, Clone)]
pub struct SortedEigen {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

pub fn sym_eigen(m: &DMatrix<f64>) -> SortedEigen {
    let n = m.nrows();
    if n == 0 {
        return SortedEigen {
            values: vec![],
            vectors: DMatrix::zeros(0, 0),
        };
    }
    // symmetrize so round-off asymmetry never leaks into the solver
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    SortedEigen { values, vectors }
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

pub fn is_symmetric(m: &DMatrix<f64>, tol: f64) -> bool {
    let n = m.nrows();
    if m.ncols() != n {
        return false;
    }
    let scale = max_abs(m).max(1.0);
    (0..n).all(|i| (0..i).all(|j| (m[(i, j)] - m[(j, i)]).abs() <= tol * scale))
}

/// Symmetric PSD square root `V diag(sqrt(max(λ,0))) Vᵀ`; returns the root and
/// the total negative eigenvalue mass that was clipped.
pub fn psd_sqrt(m: &DMatrix<f64>) -> (DMatrix<f64>, f64) {
    let eig = sym_eigen(m);
    let n = m.nrows();
    let mut clipped = 0.0;
    let roots: Vec<f64> = eig
        .values
        .iter()
        .map(|&l| {
            if l < 0.0 {
                clipped += -l;
                0.0
            } else {
                l.sqrt()
            }
        })
        .collect();
    let d = DMatrix::from_diagonal(&DVector::from_vec(roots));
    let root = &eig.vectors * d * eig.vectors.transpose();
    debug_assert_eq!(root.nrows(), n);
    (root, clipped)
}

/// Orthonormal basis of the complement of the constant vector in ℝⁿ
/// (columns), built from Helmert contrasts.
pub fn mean_zero_basis(n: usize) -> DMatrix<f64> {
    let mut b = DMatrix::zeros(n, n.saturating_sub(1));
    for k in 1..n {
        let norm = ((k * (k + 1)) as f64).sqrt();
        for i in 0..k {
            b[(i, k - 1)] = 1.0 / norm;
        }
        b[(k, k - 1)] = -(k as f64) / norm;
    }
    b
}

pub fn largest_singular_value(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    let ata = m.transpose() * m;
    let eig = sym_eigen(&ata);
    eig.values.last().copied().unwrap_or(0.0).max(0.0).sqrt()
}
