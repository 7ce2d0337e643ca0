use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::config::{HeterogeneousParams, PlatformId};
use crate::nn::{Layer, Network, Tensor};

/// Width of the latent code `z`.
pub const LATENT_WIDTH: usize = 64;
const AE_HIDDEN: usize = 32;

/// How heterogeneous parameters are turned into a latent code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LatentKind {
    /// Encoder half of a trained autoencoder.
    Ae,
    /// Projection onto principal components of the enumerated space.
    Pca,
    /// Raw parameters, zero-padded.
    Fa,
}

impl LatentKind {
    pub const ALL: [LatentKind; 3] = [LatentKind::Ae, LatentKind::Pca, LatentKind::Fa];

    pub fn as_str(self) -> &'static str {
        match self {
            LatentKind::Ae => "ae",
            LatentKind::Pca => "pca",
            LatentKind::Fa => "fa",
        }
    }
}

impl fmt::Display for LatentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LatentKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        LatentKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown latent variant `{s}`"))
    }
}

/// A platform autoencoder: `in -> 32 -> 64 -> 32 -> in`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Autoencoder {
    pub platform: PlatformId,
    pub input_width: usize,
    pub encoder: Network,
    pub decoder: Network,
}

impl Autoencoder {
    pub fn new(platform: PlatformId, input_width: usize, rng: &mut impl Rng) -> Self {
        let encoder = Network::new(vec![
            Layer::dense(input_width, AE_HIDDEN, rng),
            Layer::Relu,
            Layer::dense(AE_HIDDEN, LATENT_WIDTH, rng),
            Layer::Tanh,
        ])
        .expect("static layer plan");
        let decoder = Network::new(vec![
            Layer::dense(LATENT_WIDTH, AE_HIDDEN, rng),
            Layer::Relu,
            Layer::dense(AE_HIDDEN, input_width, rng),
        ])
        .expect("static layer plan");
        Self {
            platform,
            input_width,
            encoder,
            decoder,
        }
    }

    pub fn reconstruct(&self, rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, ModelError> {
        let x = Tensor::from_rows(rows)?;
        let y = self.decoder.infer(&self.encoder.infer(&x)?)?;
        Ok((0..rows.len()).map(|i| y.row(i).to_vec()).collect())
    }

    pub fn latent_encoder(&self) -> LatentEncoder {
        LatentEncoder {
            kind: LatentKind::Ae,
            platform: self.platform,
            input_width: self.input_width,
            net: self.encoder.clone(),
        }
    }
}

/// The `LE` component of a cost model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentEncoder {
    pub kind: LatentKind,
    pub platform: PlatformId,
    pub input_width: usize,
    pub(crate) net: Network,
}

impl LatentEncoder {
    /// Fixed projection onto the principal axes of `space`, centred on its
    /// mean and ordered by decreasing variance.
    pub fn pca(platform: PlatformId, space: &[Vec<f64>]) -> Result<Self, ModelError> {
        let w = space.first().map_or(0, Vec::len);
        if w == 0 || w > LATENT_WIDTH {
            return Err(ModelError::Invalid(format!("cannot project width {w}")));
        }
        let n = space.len() as f64;
        let mean: Vec<f64> = (0..w).map(|j| space.iter().map(|r| r[j]).sum::<f64>() / n).collect();
        let centred = DMatrix::from_fn(space.len(), w, |i, j| space[i][j] - mean[j]);
        let cov = centred.transpose() * &centred / n;
        let eig = SymmetricEigen::new(cov);
        let mut order: Vec<usize> = (0..w).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let mut weight = vec![0.0; LATENT_WIDTH * w];
        let mut bias = vec![0.0; LATENT_WIDTH];
        for (row, &axis) in order.iter().enumerate() {
            for j in 0..w {
                let v = eig.eigenvectors[(j, axis)];
                weight[row * w + j] = v;
                bias[row] -= v * mean[j];
            }
        }
        Self::linear(LatentKind::Pca, platform, w, weight, bias)
    }

    /// Raw parameters copied into the first slots of the code.
    pub fn passthrough(platform: PlatformId, width: usize) -> Result<Self, ModelError> {
        if width == 0 || width > LATENT_WIDTH {
            return Err(ModelError::Invalid(format!("cannot pass through width {width}")));
        }
        let mut weight = vec![0.0; LATENT_WIDTH * width];
        for j in 0..width {
            weight[j * width + j] = 1.0;
        }
        Self::linear(LatentKind::Fa, platform, width, weight, vec![0.0; LATENT_WIDTH])
    }

    fn linear(
        kind: LatentKind,
        platform: PlatformId,
        width: usize,
        weight: Vec<f64>,
        bias: Vec<f64>,
    ) -> Result<Self, ModelError> {
        let net = Network::new(vec![Layer::Dense {
            inputs: width,
            outputs: LATENT_WIDTH,
            weight,
            bias,
        }])?;
        Ok(Self {
            kind,
            platform,
            input_width: width,
            net,
        })
    }

    /// Only autoencoder codes are refined during cost-model training.
    pub fn trainable(&self) -> bool {
        self.kind == LatentKind::Ae
    }

    pub fn encode(&self, h: &HeterogeneousParams) -> Result<Vec<f64>, ModelError> {
        if h.platform != self.platform {
            return Err(ModelError::Platform {
                expected: self.platform,
                got: h.platform,
            });
        }
        let x = Tensor::new(vec![1, h.values.len()], h.values.clone())?;
        Ok(self.net.infer(&x)?.into_data())
    }
}
