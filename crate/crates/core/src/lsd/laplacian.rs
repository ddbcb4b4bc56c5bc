use nalgebra::DMatrix;
use ndarray::Array2;

use crate::error::{invalid, Result};

/// `L = I - D^{-1/2} A D^{-1/2}`; isolated vertices get an identity row.
pub fn normalized_laplacian(affinity: &Array2<f64>) -> Array2<f64> {
    let n = affinity.nrows();
    let inv_sqrt: Vec<f64> = affinity
        .rows()
        .into_iter()
        .map(|r| {
            let d: f64 = r.sum();
            if d > 0.0 {
                1.0 / d.sqrt()
            } else {
                0.0
            }
        })
        .collect();
    Array2::from_shape_fn((n, n), |(i, j)| {
        let id = if i == j { 1.0 } else { 0.0 };
        id - inv_sqrt[i] * affinity[[i, j]] * inv_sqrt[j]
    })
}

/// Eigenpairs of a symmetric matrix, ascending by eigenvalue. Each
/// eigenvector is sign-fixed so its largest-magnitude entry is positive.
pub fn symmetric_eigen(m: &Array2<f64>) -> (Vec<f64>, Array2<f64>) {
    let n = m.nrows();
    let mat = DMatrix::from_fn(n, n, |i, j| 0.5 * (m[[i, j]] + m[[j, i]]));
    let eig = mat.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]).then(a.cmp(&b)));

    let values = order.iter().map(|&c| eig.eigenvalues[c]).collect();
    let mut vectors = Array2::zeros((n, n));
    for (dst, &src) in order.iter().enumerate() {
        let col = eig.eigenvectors.column(src);
        let mut pivot = 0;
        for i in 1..n {
            if col[i].abs() > col[pivot].abs() {
                pivot = i;
            }
        }
        let sign = if col[pivot] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            vectors[[i, dst]] = sign * col[i];
        }
    }
    (values, vectors)
}

/// Rows of the `k` bottom eigenvectors of the normalized Laplacian, each row
/// scaled to unit norm (zero rows stay zero).
pub fn laplacian_embedding(affinity: &Array2<f64>, k: usize) -> Result<Array2<f64>> {
    let n = affinity.nrows();
    if affinity.ncols() != n {
        return invalid(format!("affinity must be square, got {:?}", affinity.dim()));
    }
    if k == 0 || k > n {
        return invalid(format!("cannot take {k} eigenvectors of a {n}-vertex graph"));
    }
    let (_, vectors) = symmetric_eigen(&normalized_laplacian(affinity));
    let mut emb = vectors.slice(ndarray::s![.., ..k]).to_owned();
    for mut row in emb.rows_mut() {
        let norm = row.dot(&row).sqrt();
        if norm > 0.0 {
            row /= norm;
        }
    }
    Ok(emb)
}
