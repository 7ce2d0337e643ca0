use serde::{Deserialize, Serialize};

use super::{MatrixError, SparseMatrix};

/// Structural summary of a sparsity pattern.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatrixStats {
    pub mean_row_nnz: f64,
    /// Row-degree imbalance in `[0, 1]`.
    pub gini: f64,
    /// Mean normalized distance of a nonzero from its row's mean column, in `[0, 0.5]`.
    pub bandwidth: f64,
    pub density: f64,
}

/// Gini coefficient of non-negative values via the sorted cumulative formula
/// `G = 2 Σ i·x_(i) / (n Σ x) − (n + 1) / n` with 1-based ranks.
pub fn gini(values: &[f64]) -> f64 {
    let n = values.len();
    let total: f64 = values.iter().sum();
    if n == 0 || total <= 0.0 {
        return 0.0;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let weighted: f64 = sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| (i + 1) as f64 * x)
        .sum();
    let nf = n as f64;
    (2.0 * weighted / (nf * total) - (nf + 1.0) / nf).clamp(0.0, 1.0)
}

pub fn compute_stats(m: &SparseMatrix) -> Result<MatrixStats, MatrixError> {
    let nnz = m.nnz();
    if nnz == 0 {
        return Err(MatrixError::InvalidArgument(
            "statistics need at least one nonzero".into(),
        ));
    }
    let degrees: Vec<f64> = m.row_degrees().map(|d| d as f64).collect();
    let mut spread = 0.0;
    for r in 0..m.rows() {
        let row = m.row(r);
        if row.is_empty() {
            continue;
        }
        let mean = row.iter().sum::<usize>() as f64 / row.len() as f64;
        spread += row.iter().map(|&c| (c as f64 - mean).abs()).sum::<f64>();
    }
    Ok(MatrixStats {
        mean_row_nnz: nnz as f64 / m.rows() as f64,
        gini: gini(&degrees),
        bandwidth: spread / nnz as f64 / m.cols() as f64,
        density: nnz as f64 / (m.rows() as f64 * m.cols() as f64),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_has_no_imbalance_or_spread() {
        let s = compute_stats(&SparseMatrix::identity("i", 4)).unwrap();
        assert_eq!(s.gini, 0.0);
        assert_eq!(s.bandwidth, 0.0);
        assert_eq!(s.mean_row_nnz, 1.0);
    }

    #[test]
    fn gini_of_single_heavy_row() {
        // Hand evaluation: sorted [0,0,0,4], 2·(4·4)/(4·4) − 5/4 = 0.75.
        assert!((gini(&[0.0, 0.0, 0.0, 4.0]) - 0.75).abs() < 1e-15);
        let m = SparseMatrix::from_coords("g", 4, 4, &[(3, 0), (3, 1), (3, 2), (3, 3)]).unwrap();
        assert!((compute_stats(&m).unwrap().gini - 0.75).abs() < 1e-15);
    }

    #[test]
    fn dense_density_is_one() {
        let m = SparseMatrix::from_coords("d", 2, 2, &[(0, 0), (0, 1), (1, 0), (1, 1)]).unwrap();
        assert_eq!(compute_stats(&m).unwrap().density, 1.0);
    }

    #[test]
    fn empty_matrix_rejected() {
        let m = SparseMatrix::from_csr("e", 2, 2, vec![0, 0, 0], vec![]).unwrap();
        assert!(compute_stats(&m).is_err());
    }

    #[test]
    fn gini_scale_free() {
        let a = [1.0, 5.0, 2.0, 9.0, 0.0];
        let b: Vec<f64> = a.iter().map(|x| x * 2.0).collect();
        assert!((gini(&a) - gini(&b)).abs() < 1e-12);
    }
}
