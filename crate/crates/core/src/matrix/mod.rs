//! Sparsity patterns: CSR storage, Matrix Market I/O, synthetic generators,
//! structural statistics and pooled density grids.

mod grid;
mod market;
mod stats;
mod synth;

pub use grid::{to_density_grid, DensityGrid};
pub use market::{parse_matrix_market, read_matrix_market_file, write_matrix_market, Symmetry};
pub use stats::{compute_stats, gini, MatrixStats};
pub use synth::{generate_synthetic_matrix, SyntheticKind};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MatrixError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid CSR structure: {0}")]
    Structure(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("i/o error: {0}")]
    Io(String),
}

/// Row bin thresholds (inclusive upper bounds) used to balance matrix
/// selection across sizes. Rows above the last threshold fall in bin 5.
pub const ROW_BIN_LIMITS: [usize; 4] = [8192, 32_768, 65_536, 131_072];

/// A sparsity pattern in compressed sparse row form. Values are not stored.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SparseMatrix {
    name: String,
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
}

impl SparseMatrix {
    /// Builds a matrix from raw CSR arrays, checking every structural invariant.
    pub fn from_csr(
        name: impl Into<String>,
        rows: usize,
        cols: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
    ) -> Result<Self, MatrixError> {
        let m = Self {
            name: name.into(),
            rows,
            cols,
            row_ptr,
            col_idx,
        };
        m.validate()?;
        Ok(m)
    }

    /// Builds a matrix from 0-based coordinates in any order. Duplicates are rejected.
    pub fn from_coords(
        name: impl Into<String>,
        rows: usize,
        cols: usize,
        coords: &[(usize, usize)],
    ) -> Result<Self, MatrixError> {
        let mut sorted = coords.to_vec();
        sorted.sort_unstable();
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(MatrixError::Structure(format!(
                "duplicate entry ({}, {})",
                w[0].0, w[0].1
            )));
        }
        Self::from_sorted_unique(name, rows, cols, &sorted)
    }

    pub(crate) fn from_sorted_unique(
        name: impl Into<String>,
        rows: usize,
        cols: usize,
        sorted: &[(usize, usize)],
    ) -> Result<Self, MatrixError> {
        let mut row_ptr = vec![0usize; rows + 1];
        let mut col_idx = Vec::with_capacity(sorted.len());
        for &(r, c) in sorted {
            if r >= rows || c >= cols {
                return Err(MatrixError::Structure(format!(
                    "entry ({r}, {c}) outside {rows}x{cols}"
                )));
            }
            row_ptr[r + 1] += 1;
            col_idx.push(c);
        }
        for r in 0..rows {
            row_ptr[r + 1] += row_ptr[r];
        }
        Self::from_csr(name, rows, cols, row_ptr, col_idx)
    }

    pub fn identity(name: impl Into<String>, n: usize) -> Self {
        Self {
            name: name.into(),
            rows: n,
            cols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
        }
    }

    fn validate(&self) -> Result<(), MatrixError> {
        let bad = |msg: String| Err(MatrixError::Structure(msg));
        if self.row_ptr.len() != self.rows + 1 {
            return bad(format!(
                "row_ptr has length {}, expected {}",
                self.row_ptr.len(),
                self.rows + 1
            ));
        }
        if self.row_ptr[0] != 0 || self.row_ptr[self.rows] != self.col_idx.len() {
            return bad("row_ptr must start at 0 and end at nnz".into());
        }
        for r in 0..self.rows {
            let (lo, hi) = (self.row_ptr[r], self.row_ptr[r + 1]);
            if lo > hi {
                return bad(format!("row_ptr decreases at row {r}"));
            }
            let row = &self.col_idx[lo..hi];
            for (k, &c) in row.iter().enumerate() {
                if c >= self.cols {
                    return bad(format!("column {c} out of range in row {r}"));
                }
                if k > 0 && row[k - 1] >= c {
                    return bad(format!("columns not strictly increasing in row {r}"));
                }
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    /// Column indices of row `r`.
    pub fn row(&self, r: usize) -> &[usize] {
        &self.col_idx[self.row_ptr[r]..self.row_ptr[r + 1]]
    }

    pub fn row_degrees(&self) -> impl Iterator<Item = usize> + '_ {
        self.row_ptr.windows(2).map(|w| w[1] - w[0])
    }

    /// All nonzero coordinates in row-major order.
    pub fn coords(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.rows).flat_map(move |r| self.row(r).iter().map(move |&c| (r, c)))
    }

    pub fn transpose(&self) -> Self {
        let mut coords: Vec<(usize, usize)> = self.coords().map(|(r, c)| (c, r)).collect();
        coords.sort_unstable();
        Self::from_sorted_unique(format!("{}_t", self.name), self.cols, self.rows, &coords)
            .expect("transpose of a valid matrix is valid")
    }
}

/// Returns the 1-based size bin for a row count.
pub fn row_bin(rows: usize) -> usize {
    ROW_BIN_LIMITS
        .iter()
        .position(|&limit| rows <= limit)
        .map_or(5, |i| i + 1)
}

/// Partitions items into the five row-count bins, preserving input order within each bin.
pub fn bin_matrices_by_rows<T, F>(items: impl IntoIterator<Item = T>, rows_of: F) -> [Vec<T>; 5]
where
    F: Fn(&T) -> usize,
{
    let mut bins: [Vec<T>; 5] = Default::default();
    for item in items {
        let b = row_bin(rows_of(&item));
        bins[b - 1].push(item);
    }
    bins
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bin_boundaries() {
        assert_eq!(row_bin(1), 1);
        assert_eq!(row_bin(8192), 1);
        assert_eq!(row_bin(8193), 2);
        assert_eq!(row_bin(32_768), 2);
        assert_eq!(row_bin(65_536), 3);
        assert_eq!(row_bin(131_072), 4);
        assert_eq!(row_bin(131_073), 5);
        assert_eq!(row_bin(200_000), 5);
    }

    #[test]
    fn binning_is_stable() {
        let rows = [10usize, 9000, 20, 200_000, 30];
        let bins = bin_matrices_by_rows(rows.iter().copied().enumerate(), |&(_, r)| r);
        assert_eq!(bins[0], vec![(0, 10), (2, 20), (4, 30)]);
        assert_eq!(bins[1], vec![(1, 9000)]);
        assert!(bins[2].is_empty() && bins[3].is_empty());
        assert_eq!(bins[4], vec![(3, 200_000)]);
    }

    #[test]
    fn rejects_bad_structure() {
        assert!(SparseMatrix::from_csr("x", 2, 2, vec![0, 1], vec![0]).is_err());
        assert!(SparseMatrix::from_csr("x", 1, 2, vec![0, 2], vec![1, 0]).is_err());
        assert!(SparseMatrix::from_csr("x", 1, 2, vec![0, 1], vec![2]).is_err());
        assert!(SparseMatrix::from_coords("x", 2, 2, &[(0, 1), (0, 1)]).is_err());
        assert!(SparseMatrix::from_coords("x", 2, 2, &[(1, 0), (0, 1)]).is_ok());
    }

    #[test]
    fn transpose_swaps_shape() {
        let m = SparseMatrix::from_coords("a", 2, 3, &[(0, 2), (1, 0)]).unwrap();
        let t = m.transpose();
        assert_eq!((t.rows(), t.cols()), (3, 2));
        assert_eq!(t.coords().collect::<Vec<_>>(), vec![(0, 1), (2, 0)]);
    }
}
