use serde::{Deserialize, Serialize};

use super::{MatrixError, SparseMatrix};

/// Fixed-resolution pooled density of a sparsity pattern.
///
/// Cell `(u, v)` holds the fraction of positions inside block `(u, v)` that
/// are nonzero. Blocks use real-valued boundaries, so a nonzero whose unit
/// square straddles a block edge contributes to each block by overlap area.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityGrid {
    resolution: usize,
    cells: Vec<f64>,
}

impl DensityGrid {
    pub fn resolution(&self) -> usize {
        self.resolution
    }

    /// Row-major cells, `resolution * resolution` long.
    pub fn cells(&self) -> &[f64] {
        &self.cells
    }

    pub fn get(&self, u: usize, v: usize) -> f64 {
        self.cells[u * self.resolution + v]
    }

    pub fn from_cells(resolution: usize, cells: Vec<f64>) -> Result<Self, MatrixError> {
        if resolution == 0 || cells.len() != resolution * resolution {
            return Err(MatrixError::InvalidArgument(format!(
                "grid needs {0}x{0} cells, got {1}",
                resolution,
                cells.len()
            )));
        }
        Ok(Self { resolution, cells })
    }

    pub fn transpose(&self) -> Self {
        let r = self.resolution;
        let mut cells = vec![0.0; r * r];
        for u in 0..r {
            for v in 0..r {
                cells[v * r + u] = self.cells[u * r + v];
            }
        }
        Self {
            resolution: r,
            cells,
        }
    }
}

/// Overlap of the unit interval `[i, i + 1)` with each block when `extent`
/// units are split into `res` equal blocks. Returns `(block, overlap)` pairs.
fn interval_overlaps(i: usize, extent: usize, res: usize) -> Vec<(usize, f64)> {
    let scale = res as f64 / extent as f64;
    let lo = i as f64 * scale;
    let hi = (i + 1) as f64 * scale;
    let first = (lo.floor() as usize).min(res - 1);
    let last = ((hi.ceil() as usize).max(first + 1)).min(res);
    let mut out = Vec::with_capacity(last - first);
    for b in first..last {
        let overlap = hi.min((b + 1) as f64) - lo.max(b as f64);
        if overlap > 0.0 {
            // Back to original units: the overlap length within [i, i+1).
            out.push((b, overlap / scale));
        }
    }
    out
}

pub fn to_density_grid(m: &SparseMatrix, resolution: usize) -> Result<DensityGrid, MatrixError> {
    if resolution == 0 {
        return Err(MatrixError::InvalidArgument("resolution must be positive".into()));
    }
    if m.rows() == 0 || m.cols() == 0 {
        return Err(MatrixError::InvalidArgument("matrix has an empty dimension".into()));
    }
    let res = resolution;
    let mut mass = vec![0.0; res * res];
    let col_overlaps: Vec<Vec<(usize, f64)>> = if m.cols() <= 4 * m.nnz() {
        (0..m.cols()).map(|c| interval_overlaps(c, m.cols(), res)).collect()
    } else {
        Vec::new()
    };
    for r in 0..m.rows() {
        let row = m.row(r);
        if row.is_empty() {
            continue;
        }
        let row_ov = interval_overlaps(r, m.rows(), res);
        for &c in row {
            let owned;
            let col_ov = if col_overlaps.is_empty() {
                owned = interval_overlaps(c, m.cols(), res);
                &owned
            } else {
                &col_overlaps[c]
            };
            for &(u, fu) in &row_ov {
                for &(v, fv) in col_ov {
                    mass[u * res + v] += fu * fv;
                }
            }
        }
    }
    let block_area = (m.rows() as f64 / res as f64) * (m.cols() as f64 / res as f64);
    let cells = mass
        .into_iter()
        .map(|x| (x / block_area).clamp(0.0, 1.0))
        .collect();
    Ok(DensityGrid {
        resolution: res,
        cells,
    })
}
