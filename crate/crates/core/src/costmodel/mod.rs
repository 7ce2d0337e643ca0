//! The four-part cost model: input featurizer (IFE), configuration mapper
//! (FM), latent encoder (LE) and predictor, plus ranking helpers.

mod featurizer;
mod latent;
mod rank;

pub use featurizer::{MatrixFeatures, Preset, MATRIX_EMBEDDING, SHAPE_FEATURES};
pub use latent::{Autoencoder, LatentEncoder, LatentKind, LATENT_WIDTH};
pub use rank::{rank_configs, top_k, OracleScorer, RandomScorer, Scorer};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{
    encode_homogeneous_vector, CanonicalLoopNest, ConfigError, ConfigSpace, HeterogeneousParams,
    PlatformId, ProgramConfig, PADDED_HOMOGENEOUS_WIDTH,
};
use crate::matrix::{MatrixError, SparseMatrix};
use crate::nn::{Gradients, Layer, Network, NnError, Tape, Tensor};
use crate::oracle::OracleError;

/// Width of the configuration embedding `p`.
pub const CONFIG_EMBEDDING: usize = 64;
/// Width of the predictor input `p ‖ s ‖ z`.
pub const PREDICTOR_INPUT: usize = CONFIG_EMBEDDING + MATRIX_EMBEDDING + LATENT_WIDTH;
/// Version of the serialised checkpoint layout.
pub const CHECKPOINT_FORMAT: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("model is for platform {expected}, got {got}")]
    Platform { expected: PlatformId, got: PlatformId },
    #[error("grid resolution {got} does not match model resolution {expected}")]
    Resolution { expected: usize, got: usize },
    #[error("empty configuration list")]
    Empty,
    #[error("invalid model: {0}")]
    Invalid(String),
}

/// Components whose outputs are replaced by zeros.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DropMask {
    pub ife: bool,
    pub fm: bool,
    pub le: bool,
}

/// How configurations reach the FM.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConfigEncoding {
    /// Canonical loop nest through the shared mapping, 53 wide.
    Mapped,
    /// Concatenated raw parameter vectors of every listed platform; slots of
    /// other platforms stay zero.
    Augmented { layout: Vec<(PlatformId, usize)> },
}

impl ConfigEncoding {
    pub fn augmented(spaces: &[&dyn ConfigSpace]) -> Self {
        ConfigEncoding::Augmented {
            layout: spaces.iter().map(|s| (s.platform(), s.raw_width())).collect(),
        }
    }

    pub fn width(&self) -> usize {
        match self {
            ConfigEncoding::Mapped => PADDED_HOMOGENEOUS_WIDTH,
            ConfigEncoding::Augmented { layout } => layout.iter().map(|(_, w)| w).sum(),
        }
    }
}

/// Architecture choices for a freshly initialised model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub preset: Preset,
    pub resolution: usize,
    pub seed: u64,
    pub encoding: ConfigEncoding,
}

impl Default for ModelSpec {
    fn default() -> Self {
        Self {
            preset: Preset::Desk,
            resolution: 64,
            seed: 0,
            encoding: ConfigEncoding::Mapped,
        }
    }
}

/// Named sub-networks, for inspection and weight surgery.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    IfeTrunk,
    IfeHead,
    Fm,
    Le,
    Predictor,
}

/// Configurations of one platform turned into network inputs.
#[derive(Debug, Clone)]
pub struct EncodedConfigs {
    homog: Tensor,
    het: Option<Tensor>,
}

impl EncodedConfigs {
    pub fn len(&self) -> usize {
        self.homog.shape()[0]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Rows `idx` in the given order.
    pub fn select(&self, idx: &[usize]) -> EncodedConfigs {
        let pick = |t: &Tensor| {
            let w = t.shape()[1];
            let mut data = Vec::with_capacity(idx.len() * w);
            for &i in idx {
                data.extend_from_slice(t.row(i));
            }
            Tensor::new(vec![idx.len(), w], data).expect("row selection")
        };
        EncodedConfigs {
            homog: pick(&self.homog),
            het: self.het.as_ref().map(pick),
        }
    }
}

/// Activations of one training forward pass.
#[derive(Debug)]
pub struct ModelTape {
    trunk: Option<Tape>,
    head: Option<Tape>,
    fm: Option<Tape>,
    le: Option<Tape>,
    predictor: Tape,
    n: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CostModel {
    pub format: u32,
    pub preset: Preset,
    pub resolution: usize,
    pub platform: PlatformId,
    /// Oracle version of the data the model was last trained on.
    pub oracle_version: String,
    pub encoding: ConfigEncoding,
    pub drop: DropMask,
    ife_trunk: Network,
    ife_head: Network,
    fm: Network,
    le: Option<LatentEncoder>,
    predictor: Network,
}

fn concat_columns(rows: usize, parts: &[(&[f64], usize, bool)]) -> Tensor {
    // (data, width, repeat row 0); empty data means a zero block
    let width: usize = parts.iter().map(|p| p.1).sum();
    let mut data = Vec::with_capacity(rows * width);
    for r in 0..rows {
        for &(src, w, broadcast) in parts {
            let row = if broadcast { 0 } else { r };
            if src.is_empty() {
                data.extend(std::iter::repeat_n(0.0, w));
            } else {
                data.extend_from_slice(&src[row * w..(row + 1) * w]);
            }
        }
    }
    Tensor::new(vec![rows, width], data).expect("concatenated width")
}

impl CostModel {
    /// A randomly initialised model. `le` is `None` for models without a
    /// latent encoder (feature augmentation), whose `z` is always zero.
    pub fn new(spec: &ModelSpec, platform: PlatformId, le: Option<LatentEncoder>) -> Result<Self, ModelError> {
        if spec.resolution < spec.preset.min_resolution() {
            return Err(ModelError::Invalid(format!(
                "resolution {} below {} for the {} preset",
                spec.resolution,
                spec.preset.min_resolution(),
                spec.preset
            )));
        }
        if let Some(le) = &le {
            if le.platform != platform {
                return Err(ModelError::Platform { expected: platform, got: le.platform });
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let ife_trunk = featurizer::build_trunk(spec.preset, &mut rng);
        let ife_head = featurizer::build_head(spec.preset, &mut rng);
        let fm = Network::new(vec![
            Layer::dense(spec.encoding.width(), CONFIG_EMBEDDING, &mut rng),
            Layer::Relu,
            Layer::dense(CONFIG_EMBEDDING, CONFIG_EMBEDDING, &mut rng),
            Layer::Relu,
        ])?;
        let predictor = Network::new(vec![
            Layer::dense(PREDICTOR_INPUT, 128, &mut rng),
            Layer::Relu,
            Layer::dense(128, 64, &mut rng),
            Layer::Relu,
            Layer::dense(64, 1, &mut rng),
        ])?;
        let model = Self {
            format: CHECKPOINT_FORMAT,
            preset: spec.preset,
            resolution: spec.resolution,
            platform,
            oracle_version: String::new(),
            encoding: spec.encoding.clone(),
            drop: DropMask::default(),
            ife_trunk,
            ife_head,
            fm,
            le,
            predictor,
        };
        model.validate()?;
        Ok(model)
    }

    /// Checks that every component composes with its neighbours.
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.format != CHECKPOINT_FORMAT {
            return Err(ModelError::Invalid(format!("unsupported checkpoint format {}", self.format)));
        }
        let expect = |net: &Network, input: Vec<usize>, output: Vec<usize>, what: &str| {
            net.validate()?;
            let got = net.output_shape(&input)?;
            if got != output {
                return Err(ModelError::Invalid(format!("{what} produces {got:?}, expected {output:?}")));
            }
            Ok::<(), ModelError>(())
        };
        let tw = featurizer::trunk_width(self.preset);
        expect(&self.ife_trunk, vec![1, 1, self.resolution, self.resolution], vec![1, tw], "featurizer trunk")?;
        expect(&self.ife_head, vec![1, tw + SHAPE_FEATURES], vec![1, MATRIX_EMBEDDING], "featurizer head")?;
        expect(&self.fm, vec![1, self.encoding.width()], vec![1, CONFIG_EMBEDDING], "configuration mapper")?;
        if let Some(le) = &self.le {
            if le.platform != self.platform {
                return Err(ModelError::Platform { expected: self.platform, got: le.platform });
            }
            expect(&le.net, vec![1, le.input_width], vec![1, LATENT_WIDTH], "latent encoder")?;
        }
        expect(&self.predictor, vec![1, PREDICTOR_INPUT], vec![1, 1], "predictor")?;
        Ok(())
    }

    pub fn latent(&self) -> Option<&LatentEncoder> {
        self.le.as_ref()
    }

    /// Replaces the latent encoder and retags the model for its platform.
    pub fn swap_latent(&mut self, le: Option<LatentEncoder>, platform: PlatformId) -> Result<(), ModelError> {
        if let Some(l) = &le {
            if l.platform != platform {
                return Err(ModelError::Platform { expected: platform, got: l.platform });
            }
        }
        if let ConfigEncoding::Augmented { layout } = &self.encoding {
            if !layout.iter().any(|(p, _)| *p == platform) {
                return Err(ModelError::Invalid(format!("augmented layout has no {platform} slots")));
            }
        }
        self.le = le;
        self.platform = platform;
        Ok(())
    }

    pub fn component(&self, c: Component) -> Option<&Network> {
        match c {
            Component::IfeTrunk => Some(&self.ife_trunk),
            Component::IfeHead => Some(&self.ife_head),
            Component::Fm => Some(&self.fm),
            Component::Le => self.le.as_ref().map(|l| &l.net),
            Component::Predictor => Some(&self.predictor),
        }
    }

    pub fn component_mut(&mut self, c: Component) -> Option<&mut Network> {
        match c {
            Component::IfeTrunk => Some(&mut self.ife_trunk),
            Component::IfeHead => Some(&mut self.ife_head),
            Component::Fm => Some(&mut self.fm),
            Component::Le => self.le.as_mut().map(|l| &mut l.net),
            Component::Predictor => Some(&mut self.predictor),
        }
    }

    pub fn features(&self, m: &SparseMatrix) -> Result<MatrixFeatures, ModelError> {
        Ok(MatrixFeatures::new(m, self.resolution)?)
    }

    fn check_features(&self, f: &MatrixFeatures) -> Result<(), ModelError> {
        if f.resolution() != self.resolution {
            return Err(ModelError::Resolution { expected: self.resolution, got: f.resolution() });
        }
        Ok(())
    }

    fn head_input(&self, pooled: &Tensor, f: &MatrixFeatures) -> Tensor {
        let mut v = pooled.data().to_vec();
        v.extend_from_slice(&f.shape);
        Tensor::new(vec![1, v.len()], v).expect("head input")
    }

    /// `s_M`, 128 wide.
    pub fn featurize_matrix(&self, f: &MatrixFeatures) -> Result<Vec<f64>, ModelError> {
        self.check_features(f)?;
        if self.drop.ife {
            return Ok(vec![0.0; MATRIX_EMBEDDING]);
        }
        let pooled = self.ife_trunk.infer(&f.grid)?;
        Ok(self.ife_head.infer(&self.head_input(&pooled, f))?.into_data())
    }

    /// `p`, 64 wide, for a canonical loop nest.
    pub fn embed_config(&self, nest: &CanonicalLoopNest) -> Result<Vec<f64>, ModelError> {
        if self.encoding != ConfigEncoding::Mapped {
            return Err(ModelError::Invalid("model does not use the mapped encoding".into()));
        }
        if self.drop.fm {
            return Ok(vec![0.0; CONFIG_EMBEDDING]);
        }
        let x = Tensor::new(vec![1, PADDED_HOMOGENEOUS_WIDTH], encode_homogeneous_vector(nest))?;
        Ok(self.fm.infer(&x)?.into_data())
    }

    /// `z`, 64 wide.
    pub fn latent_encode(&self, h: &HeterogeneousParams) -> Result<Vec<f64>, ModelError> {
        match &self.le {
            Some(le) if !self.drop.le => le.encode(h),
            _ => {
                if h.platform != self.platform {
                    return Err(ModelError::Platform { expected: self.platform, got: h.platform });
                }
                Ok(vec![0.0; LATENT_WIDTH])
            }
        }
    }

    pub fn encode_configs(&self, space: &dyn ConfigSpace, configs: &[ProgramConfig]) -> Result<EncodedConfigs, ModelError> {
        if space.platform() != self.platform {
            return Err(ModelError::Platform { expected: self.platform, got: space.platform() });
        }
        let n = configs.len();
        let width = self.encoding.width();
        let mut homog = Vec::with_capacity(n * width);
        let het_width = self.le.as_ref().map(|l| l.input_width);
        let mut het = Vec::with_capacity(n * het_width.unwrap_or(0));
        for c in configs {
            if c.platform() != self.platform {
                return Err(ModelError::Platform { expected: self.platform, got: c.platform() });
            }
            match &self.encoding {
                ConfigEncoding::Mapped => homog.extend(encode_homogeneous_vector(&space.canonical(c)?)),
                ConfigEncoding::Augmented { layout } => {
                    for &(p, w) in layout {
                        if p == self.platform {
                            let raw = space.raw_features(c)?;
                            if raw.len() != w {
                                return Err(ModelError::Invalid(format!("{p} raw width {} != {w}", raw.len())));
                            }
                            homog.extend(raw);
                        } else {
                            homog.extend(std::iter::repeat_n(0.0, w));
                        }
                    }
                }
            }
            if let Some(w) = het_width {
                let h = space.heterogeneous(c)?;
                if h.values.len() != w {
                    return Err(ModelError::Invalid(format!("heterogeneous width {} != {w}", h.values.len())));
                }
                het.extend(h.values);
            }
        }
        Ok(EncodedConfigs {
            homog: Tensor::new(vec![n, width], homog)?,
            het: match het_width {
                Some(w) => Some(Tensor::new(vec![n, w], het)?),
                None => None,
            },
        })
    }

    /// Predicted costs for encoded configurations of one matrix.
    pub fn predict_encoded(&self, f: &MatrixFeatures, enc: &EncodedConfigs) -> Result<Vec<f64>, ModelError> {
        let s = self.featurize_matrix(f)?;
        let n = enc.len();
        let p = if self.drop.fm { Vec::new() } else { self.fm.infer(&enc.homog)?.into_data() };
        let z = match (&self.le, &enc.het) {
            (Some(le), Some(h)) if !self.drop.le => le.net.infer(h)?.into_data(),
            _ => Vec::new(),
        };
        let x = concat_columns(
            n,
            &[(&p, CONFIG_EMBEDDING, false), (&s, MATRIX_EMBEDDING, true), (&z, LATENT_WIDTH, false)],
        );
        Ok(self.predictor.infer(&x)?.into_data())
    }

    /// Full pipeline for a single matrix and configuration.
    pub fn predict_cost(&self, space: &dyn ConfigSpace, m: &SparseMatrix, c: &ProgramConfig) -> Result<f64, ModelError> {
        let f = self.features(m)?;
        let enc = self.encode_configs(space, std::slice::from_ref(c))?;
        Ok(self.predict_encoded(&f, &enc)?[0])
    }

    /// Forward pass that records what [`CostModel::backward`] needs.
    pub fn forward(&self, f: &MatrixFeatures, enc: &EncodedConfigs) -> Result<(Vec<f64>, ModelTape), ModelError> {
        self.check_features(f)?;
        let n = enc.len();
        let (s, trunk, head) = if self.drop.ife {
            (vec![0.0; MATRIX_EMBEDDING], None, None)
        } else {
            let (pooled, t1) = self.ife_trunk.forward(&f.grid)?;
            let (s, t2) = self.ife_head.forward(&self.head_input(&pooled, f))?;
            (s.into_data(), Some(t1), Some(t2))
        };
        let (p, fm) = if self.drop.fm {
            (Vec::new(), None)
        } else {
            let (p, t) = self.fm.forward(&enc.homog)?;
            (p.into_data(), Some(t))
        };
        let (z, le) = match (&self.le, &enc.het) {
            (Some(le), Some(h)) if !self.drop.le => {
                let (z, t) = le.net.forward(h)?;
                (z.into_data(), Some(t))
            }
            _ => (Vec::new(), None),
        };
        let x = concat_columns(
            n,
            &[(&p, CONFIG_EMBEDDING, false), (&s, MATRIX_EMBEDDING, true), (&z, LATENT_WIDTH, false)],
        );
        let (r, predictor) = self.predictor.forward(&x)?;
        Ok((r.into_data(), ModelTape { trunk, head, fm, le, predictor, n }))
    }

    /// Gradients of a loss with `d loss / d score = dscores`, laid out like
    /// [`CostModel::params_mut`]. Frozen or dropped components get zeros.
    pub fn backward(&self, tape: &ModelTape, dscores: &[f64], freeze_ife: bool) -> Result<Vec<Vec<f64>>, ModelError> {
        if dscores.len() != tape.n {
            return Err(ModelError::Invalid(format!("{} score gradients for {} scores", dscores.len(), tape.n)));
        }
        let gy = Tensor::new(vec![tape.n, 1], dscores.to_vec())?;
        let pred = self.predictor.backward(&tape.predictor, &gy, true)?;
        let gx = pred.input.as_ref().expect("input gradient requested");
        let column_block = |start: usize, width: usize| {
            let mut data = Vec::with_capacity(tape.n * width);
            for r in 0..tape.n {
                data.extend_from_slice(&gx.row(r)[start..start + width]);
            }
            Tensor::new(vec![tape.n, width], data).expect("block width")
        };

        let fm = match &tape.fm {
            Some(t) => self.fm.backward(t, &column_block(0, CONFIG_EMBEDDING), false)?,
            None => self.fm.zero_grads(),
        };

        let (trunk, head) = match (&tape.trunk, &tape.head) {
            (Some(t1), Some(t2)) if !freeze_ife => {
                let mut ds = vec![0.0; MATRIX_EMBEDDING];
                for r in 0..tape.n {
                    for (acc, g) in ds.iter_mut().zip(&gx.row(r)[CONFIG_EMBEDDING..CONFIG_EMBEDDING + MATRIX_EMBEDDING]) {
                        *acc += g;
                    }
                }
                let head = self.ife_head.backward(t2, &Tensor::new(vec![1, MATRIX_EMBEDDING], ds)?, true)?;
                let gh = head.input.as_ref().expect("input gradient requested");
                let tw = featurizer::trunk_width(self.preset);
                let gpool = Tensor::new(vec![1, tw], gh.data()[..tw].to_vec())?;
                (self.ife_trunk.backward(t1, &gpool, false)?, head)
            }
            _ => (self.ife_trunk.zero_grads(), self.ife_head.zero_grads()),
        };

        let le = match (&self.le, &tape.le) {
            (Some(le), Some(t)) if le.trainable() => {
                Some(le.net.backward(t, &column_block(CONFIG_EMBEDDING + MATRIX_EMBEDDING, LATENT_WIDTH), false)?)
            }
            (Some(le), _) if le.trainable() => Some(le.net.zero_grads()),
            _ => None,
        };

        let mut out: Vec<Vec<f64>> = Vec::new();
        let mut push = |g: Gradients| out.extend(g.params);
        push(trunk);
        push(head);
        push(fm);
        if let Some(le) = le {
            push(le);
        }
        push(pred);
        Ok(out)
    }

    /// All trainable parameter vectors: featurizer, mapper, latent encoder
    /// (autoencoder kind only), predictor.
    pub fn params_mut(&mut self) -> Vec<&mut Vec<f64>> {
        let mut out = self.ife_trunk.params_mut();
        out.extend(self.ife_head.params_mut());
        out.extend(self.fm.params_mut());
        if let Some(le) = self.le.as_mut().filter(|l| l.trainable()) {
            out.extend(le.net.params_mut());
        }
        out.extend(self.predictor.params_mut());
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serialises")
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let m: CostModel = serde_json::from_str(text).map_err(|e| ModelError::Invalid(e.to_string()))?;
        m.validate()?;
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{CpuSpace, SpadeConfig, SpadeSpace};
    use crate::matrix::{generate_synthetic_matrix, DensityGrid, SyntheticKind};
    use crate::oracle::{brute_force_optimum, SpadeSurrogate, SurrogateConstants};

    fn spade_model(res: usize) -> CostModel {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let le = Autoencoder::new(PlatformId::Spade, 2, &mut rng).latent_encoder();
        let spec = ModelSpec { resolution: res, seed: 9, ..Default::default() };
        CostModel::new(&spec, PlatformId::Spade, Some(le)).unwrap()
    }

    fn spade(p_row: u64, p_col: u64, barrier: bool, bypass: bool, reorder: bool) -> ProgramConfig {
        ProgramConfig::Spade(SpadeConfig { p_row, p_col, s_split: 32, barrier, bypass, reorder })
    }

    #[test]
    fn component_widths() {
        for preset in [Preset::Desk, Preset::Paper] {
            let spec = ModelSpec { preset, resolution: 16, ..Default::default() };
            let model = CostModel::new(&spec, PlatformId::Cpu, None).unwrap();
            let f = MatrixFeatures::from_grid("z", &DensityGrid::from_cells(16, vec![0.5; 256]).unwrap(), 16, 16, 128);
            assert_eq!(model.featurize_matrix(&f).unwrap().len(), MATRIX_EMBEDDING);
        }
        let model = spade_model(16);
        let nest = SpadeSpace::default().canonical(&spade(32, 1024, false, false, false)).unwrap();
        assert_eq!(model.embed_config(&nest).unwrap().len(), CONFIG_EMBEDDING);
        let h = HeterogeneousParams { platform: PlatformId::Spade, values: vec![1.0, 0.0] };
        assert_eq!(model.latent_encode(&h).unwrap().len(), LATENT_WIDTH);
    }

    #[test]
    fn zero_grids_give_one_embedding() {
        let model = spade_model(16);
        let zero = DensityGrid::from_cells(16, vec![0.0; 256]).unwrap();
        let a = model.featurize_matrix(&MatrixFeatures::from_grid("a", &zero, 64, 64, 1)).unwrap();
        let b = model.featurize_matrix(&MatrixFeatures::from_grid("b", &zero, 64, 64, 1)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn resolution_mismatch_rejected() {
        let model = spade_model(16);
        let f = MatrixFeatures::from_grid("a", &DensityGrid::from_cells(32, vec![0.0; 1024]).unwrap(), 4, 4, 1);
        assert!(matches!(model.featurize_matrix(&f), Err(ModelError::Resolution { .. })));
    }

    #[test]
    fn transpose_symmetric_kernels_give_equal_embeddings() {
        let mut model = spade_model(16);
        let trunk = model.component_mut(Component::IfeTrunk).unwrap();
        let mut new_layers = trunk.layers().to_vec();
        for l in &mut new_layers {
            if let Layer::Conv2d { kernel, weight, .. } = l {
                let k = *kernel;
                for block in weight.chunks_mut(k * k) {
                    let orig = block.to_vec();
                    for i in 0..k {
                        for j in 0..k {
                            block[i * k + j] = 0.5 * (orig[i * k + j] + orig[j * k + i]);
                        }
                    }
                }
            }
        }
        *trunk = Network::new(new_layers).unwrap();
        let m = generate_synthetic_matrix(SyntheticKind::PowerLaw, 64, 64, 300, 5).unwrap();
        let t = m.transpose();
        let a = model.featurize_matrix(&model.features(&m).unwrap()).unwrap();
        let b = model.featurize_matrix(&model.features(&t).unwrap()).unwrap();
        assert_ne!(model.features(&m).unwrap().grid, model.features(&t).unwrap().grid);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn mapping_only_sees_homogeneous_part() {
        let model = spade_model(16);
        let space = SpadeSpace::default();
        let p = |c: ProgramConfig| model.embed_config(&space.canonical(&c).unwrap()).unwrap();
        assert_eq!(p(spade(32, 1024, true, false, false)), p(spade(32, 1024, true, true, true)));
        assert_ne!(p(spade(32, 1024, true, false, false)), p(spade(32, 1024, false, false, false)));
    }

    #[test]
    fn zeroed_predictor_returns_bias() {
        let mut model = spade_model(16);
        let net = model.component_mut(Component::Predictor).unwrap();
        for p in net.params_mut() {
            p.iter_mut().for_each(|v| *v = 0.0);
        }
        let last = net.params_mut().pop().unwrap();
        last[0] = 0.25;
        let m = generate_synthetic_matrix(SyntheticKind::Uniform, 40, 50, 200, 1).unwrap();
        let space = SpadeSpace::default();
        for c in space.enumerate(m.cols()).iter().take(8) {
            assert_eq!(model.predict_cost(&space, &m, c).unwrap(), 0.25);
        }
    }

    #[test]
    fn silenced_latent_input_ignores_flags() {
        let mut model = spade_model(16);
        let le = model.component_mut(Component::Le).unwrap();
        le.params_mut()[0].iter_mut().for_each(|v| *v = 0.0);
        let m = generate_synthetic_matrix(SyntheticKind::Banded, 64, 64, 300, 2).unwrap();
        let space = SpadeSpace::default();
        let base = model.predict_cost(&space, &m, &spade(256, 1024, true, false, false)).unwrap();
        for (bypass, reorder) in [(true, false), (false, true), (true, true)] {
            let r = model.predict_cost(&space, &m, &spade(256, 1024, true, bypass, reorder)).unwrap();
            assert_eq!(r, base);
        }
        let other = model.predict_cost(&space, &m, &spade(256, 1024, false, false, false)).unwrap();
        assert_ne!(other, base);
    }

    #[test]
    fn prediction_is_deterministic_and_platform_checked() {
        let model = spade_model(16);
        let m = generate_synthetic_matrix(SyntheticKind::Uniform, 30, 30, 90, 4).unwrap();
        let space = SpadeSpace::default();
        let c = spade(4, 1024, false, true, false);
        assert_eq!(
            model.predict_cost(&space, &m, &c).unwrap().to_bits(),
            model.predict_cost(&space, &m, &c).unwrap().to_bits()
        );
        let cpu = CpuSpace::default();
        let cc = cpu.default_config(30);
        assert!(matches!(model.predict_cost(&cpu, &m, &cc), Err(ModelError::Platform { .. })));
    }

    #[test]
    fn dropped_components_emit_zeros() {
        let mut model = spade_model(16);
        model.drop = DropMask { ife: true, fm: true, le: true };
        let m = generate_synthetic_matrix(SyntheticKind::Uniform, 30, 30, 90, 4).unwrap();
        let f = model.features(&m).unwrap();
        assert_eq!(model.featurize_matrix(&f).unwrap(), vec![0.0; MATRIX_EMBEDDING]);
        let space = SpadeSpace::default();
        let configs = space.enumerate(30);
        let enc = model.encode_configs(&space, &configs).unwrap();
        let r = model.predict_encoded(&f, &enc).unwrap();
        assert!(r.iter().all(|v| *v == r[0]));
    }

    #[test]
    fn whole_model_gradient_matches_finite_differences() {
        let mut model = spade_model(16);
        // Non-zero biases keep activations away from the ReLU kink on empty cells.
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for p in model.params_mut().into_iter().skip(1).step_by(2) {
            p.iter_mut().for_each(|v| *v = rand::Rng::random_range(&mut rng, -0.1..0.1));
        }
        let m = generate_synthetic_matrix(SyntheticKind::PowerLaw, 48, 48, 200, 8).unwrap();
        let space = SpadeSpace::default();
        let configs: Vec<_> = space.enumerate(48).into_iter().step_by(37).collect();
        let f = model.features(&m).unwrap();
        let enc = model.encode_configs(&space, &configs).unwrap();
        let probe: Vec<f64> = (0..configs.len()).map(|i| (i as f64 * 0.7).sin()).collect();
        let loss = |model: &CostModel| -> f64 {
            model.predict_encoded(&f, &enc).unwrap().iter().zip(&probe).map(|(a, b)| a * b).sum()
        };
        let (_, tape) = model.forward(&f, &enc).unwrap();
        let grads = model.backward(&tape, &probe, false).unwrap();
        let n = grads.len();
        assert_eq!(n, model.params_mut().len());
        let h = 1e-5;
        for p in 0..n {
            for idx in [0, grads[p].len() / 2, grads[p].len() - 1] {
                let orig = model.params_mut()[p][idx];
                model.params_mut()[p][idx] = orig + h;
                let up = loss(&model);
                model.params_mut()[p][idx] = orig - h;
                let down = loss(&model);
                model.params_mut()[p][idx] = orig;
                let numeric = (up - down) / (2.0 * h);
                let a = grads[p][idx];
                assert!((a - numeric).abs() <= 1e-5 * a.abs().max(numeric.abs()).max(1e-2), "param {p}[{idx}]: {a} vs {numeric}");
            }
        }
        assert!(model.backward(&tape, &probe, true).is_err());
        let (_, tape) = model.forward(&f, &enc).unwrap();
        let frozen = model.backward(&tape, &probe, true).unwrap();
        assert!(frozen[0].iter().all(|v| *v == 0.0));
    }

    #[test]
    fn checkpoint_round_trip() {
        let mut model = spade_model(16);
        model.oracle_version = "v".into();
        let back = CostModel::from_json(&model.to_json()).unwrap();
        assert_eq!(back, model);
        let mut broken: serde_json::Value = serde_json::from_str(&model.to_json()).unwrap();
        broken["resolution"] = serde_json::json!(8);
        assert!(CostModel::from_json(&broken.to_string()).is_err());
    }

    #[test]
    fn ranking_helpers() {
        let space = SpadeSpace::default();
        let oracle = SpadeSurrogate::new(SurrogateConstants::default());
        let scorer = OracleScorer { oracle: &oracle, kernel: crate::config::Kernel::Spmm };
        for seed in 0..4 {
            let m = generate_synthetic_matrix(SyntheticKind::ALL[seed as usize % 3], 300, 200, 2000, seed).unwrap();
            let configs = space.enumerate(m.cols());
            let top = top_k(&scorer, &space, &m, &configs, 1).unwrap();
            let profile = MatrixProfile::of(&m).unwrap();
            let (best, t) = brute_force_optimum(&space, &oracle, crate::config::Kernel::Spmm, &profile).unwrap();
            assert_eq!(top[0], (best, t));
            let all = rank_configs(&scorer, &space, &m, &configs).unwrap();
            assert_eq!(all.len(), configs.len());
            assert_eq!(&all[..5], top_k(&scorer, &space, &m, &configs, 5).unwrap().as_slice());
        }
        let m = generate_synthetic_matrix(SyntheticKind::Uniform, 10, 10, 20, 0).unwrap();
        assert!(matches!(rank_configs(&scorer, &space, &m, &[]), Err(ModelError::Empty)));
    }

    use crate::oracle::MatrixProfile;
}
