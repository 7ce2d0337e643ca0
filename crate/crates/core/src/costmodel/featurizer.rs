use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::matrix::{to_density_grid, DensityGrid, MatrixError, SparseMatrix};
use crate::nn::{Layer, Network, Tensor};

/// Width of the matrix embedding `s_M`.
pub const MATRIX_EMBEDDING: usize = 128;
/// Number of scalar shape features appended to the pooled conv output.
pub const SHAPE_FEATURES: usize = 3;

/// Featurizer architecture.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// Four blocks of two 3x3 convolutions, 8/16/32/64 channels.
    #[default]
    Desk,
    /// Twelve convolutions, 32 to 256 channels, three pooling stages.
    Paper,
}

impl Preset {
    pub fn as_str(self) -> &'static str {
        match self {
            Preset::Desk => "desk",
            Preset::Paper => "paper",
        }
    }

    /// Smallest grid that survives every pooling stage.
    pub fn min_resolution(self) -> usize {
        match self {
            Preset::Desk => 16,
            Preset::Paper => 8,
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "desk" => Ok(Preset::Desk),
            "paper" => Ok(Preset::Paper),
            other => Err(format!("unknown preset `{other}`")),
        }
    }
}

/// Convolutional trunk: `[1, 1, R, R]` to `[1, C]`.
pub(crate) fn build_trunk(preset: Preset, rng: &mut impl Rng) -> Network {
    let mut layers = Vec::new();
    match preset {
        Preset::Desk => {
            let mut c_in = 1;
            for c in [8, 16, 32, 64] {
                layers.push(Layer::conv2d(c_in, c, 3, rng));
                layers.push(Layer::Relu);
                layers.push(Layer::conv2d(c, c, 3, rng));
                layers.push(Layer::Relu);
                layers.push(Layer::MaxPool2d { size: 2 });
                c_in = c;
            }
        }
        Preset::Paper => {
            let plan: [(usize, usize, usize, bool); 12] = [
                (1, 32, 5, false),
                (32, 32, 3, false),
                (32, 64, 3, true),
                (64, 64, 3, false),
                (64, 64, 3, false),
                (64, 128, 3, true),
                (128, 128, 3, false),
                (128, 128, 3, false),
                (128, 256, 3, true),
                (256, 256, 3, false),
                (256, 256, 3, false),
                (256, 256, 3, false),
            ];
            for (c_in, c_out, k, pool) in plan {
                layers.push(Layer::conv2d(c_in, c_out, k, rng));
                layers.push(Layer::Relu);
                if pool {
                    layers.push(Layer::MaxPool2d { size: 2 });
                }
            }
        }
    }
    layers.push(Layer::GlobalAvgPool);
    Network::new(layers).expect("static layer plan")
}

pub(crate) fn trunk_width(preset: Preset) -> usize {
    match preset {
        Preset::Desk => 64,
        Preset::Paper => 256,
    }
}

/// Projection of pooled features plus shape scalars to `s_M`.
pub(crate) fn build_head(preset: Preset, rng: &mut impl Rng) -> Network {
    Network::new(vec![
        Layer::dense(trunk_width(preset) + SHAPE_FEATURES, MATRIX_EMBEDDING, rng),
        Layer::Relu,
    ])
    .expect("static layer plan")
}

/// Featurizer input for one matrix: the density grid scaled to a unit
/// maximum, and log-scaled shape scalars.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixFeatures {
    pub name: String,
    pub(crate) grid: Tensor,
    pub(crate) shape: [f64; SHAPE_FEATURES],
}

fn log_scalar(x: usize) -> f64 {
    (x.max(1) as f64).log2() / 24.0
}

impl MatrixFeatures {
    pub fn new(m: &SparseMatrix, resolution: usize) -> Result<Self, MatrixError> {
        let grid = to_density_grid(m, resolution)?;
        Ok(Self::from_grid(m.name(), &grid, m.rows(), m.cols(), m.nnz()))
    }

    pub fn from_grid(name: &str, grid: &DensityGrid, rows: usize, cols: usize, nnz: usize) -> Self {
        let r = grid.resolution();
        let max = grid.cells().iter().cloned().fold(0.0, f64::max);
        let scale = if max > 0.0 { 1.0 / max } else { 0.0 };
        let data = grid.cells().iter().map(|v| v * scale).collect();
        Self {
            name: name.to_string(),
            grid: Tensor::new(vec![1, 1, r, r], data).expect("square grid"),
            shape: [log_scalar(rows), log_scalar(cols), log_scalar(nnz)],
        }
    }

    pub fn resolution(&self) -> usize {
        self.grid.shape()[2]
    }
}
