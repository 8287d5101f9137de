use nalgebra::{DMatrix, SymmetricEigen};

use super::{validate_matrix, ScalingParams};
use crate::error::Result;
use crate::features::CountMatrix;

/// Standard Wordfish starting values.
///
/// `α_i = log(rowsum_i / rowsum_0)`, `ψ_j = log(colmean_j)`, and `(θ, β)`
/// from the leading singular pair of the doubly centred `log(y + 0.1)`.
/// θ is z-scored, with its scale carried by β.
pub fn initialize(matrix: &CountMatrix) -> Result<ScalingParams> {
    validate_matrix(matrix)?;
    let (n, m) = (matrix.n_docs(), matrix.n_features());
    let row_sums = matrix.row_sums();
    let col_sums = matrix.col_sums();
    let alpha: Vec<f64> = row_sums
        .iter()
        .map(|&s| (s as f64 / row_sums[0] as f64).ln())
        .collect();
    let psi: Vec<f64> = col_sums.iter().map(|&s| (s as f64 / n as f64).ln()).collect();

    let dense = matrix.to_dense();
    let mut z = DMatrix::from_fn(n, m, |i, j| (dense[i][j] as f64 + 0.1).ln());
    let row_means: Vec<f64> = (0..n).map(|i| z.row(i).mean()).collect();
    let col_means: Vec<f64> = (0..m).map(|j| z.column(j).mean()).collect();
    let grand = z.mean();
    for i in 0..n {
        for j in 0..m {
            z[(i, j)] += grand - row_means[i] - col_means[j];
        }
    }

    let (mut u, mut s, mut v) = leading_singular_pair(&z);
    if !(s > 1e-10) {
        // Rows (or columns) carry no contrast: spread θ by input order, β = 0.
        u = (0..n).map(|i| i as f64).collect();
        v = vec![0.0; m];
        s = 0.0;
    }
    let (mean_u, sd_u) = super::mean_sd(u.as_slice());
    let theta: Vec<f64> = u.iter().map(|x| (x - mean_u) / sd_u).collect();
    let beta: Vec<f64> = v.iter().map(|x| x * s * sd_u).collect();

    Ok(ScalingParams {
        alpha,
        psi,
        theta,
        beta,
    })
}

/// Leading singular triple via the eigendecomposition of the smaller Gram
/// matrix.
fn leading_singular_pair(z: &DMatrix<f64>) -> (Vec<f64>, f64, Vec<f64>) {
    let docs_side = z.nrows() <= z.ncols();
    let gram = if docs_side { z * z.transpose() } else { z.transpose() * z };
    let eig = SymmetricEigen::new(gram);
    let (top, &lambda) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty matrix");
    let s = lambda.max(0.0).sqrt();
    let first = eig.eigenvectors.column(top).into_owned();
    if s == 0.0 {
        return (vec![0.0; z.nrows()], 0.0, vec![0.0; z.ncols()]);
    }
    if docs_side {
        let v = z.transpose() * &first / s;
        (first.iter().copied().collect(), s, v.iter().copied().collect())
    } else {
        let u = z * &first / s;
        (u.iter().copied().collect(), s, first.iter().copied().collect())
    }
}
