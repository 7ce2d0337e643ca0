use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::TrainError;
use crate::config::ConfigSpace;
use crate::costmodel::Autoencoder;
use crate::nn::{mse_loss, Adam, AdamConfig, Tensor};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AutoencoderParams {
    pub lr: f64,
    /// Full-batch passes over the enumerated heterogeneous space.
    pub epochs: usize,
    pub seed: u64,
}

impl Default for AutoencoderParams {
    fn default() -> Self {
        Self { lr: 1e-3, epochs: 1000, seed: 0 }
    }
}

#[derive(Debug, Clone)]
pub struct AeOutcome {
    pub autoencoder: Autoencoder,
    pub initial_mse: f64,
    pub final_mse: f64,
}

/// Trains an autoencoder on every heterogeneous vector of `space` with MSE.
pub fn train_autoencoder(space: &dyn ConfigSpace, params: &AutoencoderParams) -> Result<AeOutcome, TrainError> {
    let rows = space.heterogeneous_space();
    if rows.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let x = Tensor::from_rows(&rows)?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut ae = Autoencoder::new(space.platform(), space.heterogeneous_width(), &mut rng);
    let mut adam = Adam::new(AdamConfig { lr: params.lr, ..Default::default() });
    let mse = |ae: &Autoencoder| -> Result<f64, TrainError> {
        let y = ae.decoder.infer(&ae.encoder.infer(&x)?)?;
        Ok(mse_loss(y.data(), x.data())?.0)
    };
    let initial_mse = mse(&ae)?;
    for epoch in 1..=params.epochs {
        let (code, t_enc) = ae.encoder.forward(&x)?;
        let (y, t_dec) = ae.decoder.forward(&code)?;
        let (loss, grad) = mse_loss(y.data(), x.data())?;
        if !loss.is_finite() {
            return Err(TrainError::Diverged { epoch });
        }
        let gy = Tensor::new(y.shape().to_vec(), grad)?;
        let g_dec = ae.decoder.backward(&t_dec, &gy, true)?;
        let g_enc = ae.encoder.backward(&t_enc, g_dec.input.as_ref().expect("requested"), false)?;
        let grads: Vec<Vec<f64>> = g_enc.params.into_iter().chain(g_dec.params).collect();
        let mut params = ae.encoder.params_mut();
        params.extend(ae.decoder.params_mut());
        adam.step(&mut params, &grads).map_err(|_| TrainError::Diverged { epoch })?;
    }
    let final_mse = mse(&ae)?;
    Ok(AeOutcome { autoencoder: ae, initial_mse, final_mse })
}
