use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use super::layer::Cache;
use super::{Layer, NnError, Tensor};

static NEXT_ID: AtomicU64 = AtomicU64::new(1);

fn fresh_id() -> u64 {
    NEXT_ID.fetch_add(1, Ordering::Relaxed)
}

/// A sequential stack of layers.
///
/// Every mutable access to the parameters gives the network a new identity,
/// so a [`Tape`] recorded before an update is rejected by
/// [`Network::backward`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Network {
    layers: Vec<Layer>,
    #[serde(skip, default = "fresh_id")]
    id: u64,
}

impl PartialEq for Network {
    fn eq(&self, other: &Self) -> bool {
        self.layers == other.layers
    }
}

/// Activations recorded by [`Network::forward`] for one backward pass.
#[derive(Debug, Clone)]
pub struct Tape {
    id: u64,
    caches: Vec<Cache>,
    out_shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    /// One entry per parameter vector, in [`Network::params`] order.
    pub params: Vec<Vec<f64>>,
    pub input: Option<Tensor>,
}

impl Gradients {
    pub fn accumulate(&mut self, other: &Gradients) -> Result<(), NnError> {
        if self.params.len() != other.params.len() {
            return Err(NnError::Mismatch("gradient sets differ in length".into()));
        }
        for (a, b) in self.params.iter_mut().zip(&other.params) {
            if a.len() != b.len() {
                return Err(NnError::Mismatch("gradient vectors differ in length".into()));
            }
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        Ok(())
    }

    pub fn scale(&mut self, s: f64) {
        self.params.iter_mut().flatten().for_each(|g| *g *= s);
    }
}

impl Network {
    pub fn new(layers: Vec<Layer>) -> Result<Self, NnError> {
        for l in &layers {
            l.validate()?;
        }
        Ok(Self { layers, id: fresh_id() })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// Re-checks parameter sizes, e.g. after deserialisation.
    pub fn validate(&self) -> Result<(), NnError> {
        self.layers.iter().try_for_each(Layer::validate)
    }

    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>, NnError> {
        let mut shape = input.to_vec();
        for (i, l) in self.layers.iter().enumerate() {
            shape = l
                .output_shape(&shape)
                .map_err(|msg| NnError::Shape { layer: i, msg })?;
        }
        Ok(shape)
    }

    pub fn params(&self) -> Vec<&Vec<f64>> {
        self.layers.iter().flat_map(Layer::params).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Vec<f64>> {
        self.id = fresh_id();
        self.layers.iter_mut().flat_map(Layer::params_mut).collect()
    }

    pub fn num_parameters(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    pub fn zero_grads(&self) -> Gradients {
        Gradients {
            params: self.params().iter().map(|p| vec![0.0; p.len()]).collect(),
            input: None,
        }
    }

    fn run(&self, x: &Tensor, record: bool) -> Result<(Tensor, Vec<Cache>), NnError> {
        self.output_shape(x.shape())?;
        let mut caches = Vec::with_capacity(if record { self.layers.len() } else { 0 });
        let mut cur: Option<Tensor> = None;
        for l in &self.layers {
            let (y, c) = l.forward(cur.as_ref().unwrap_or(x), record);
            caches.extend(c);
            cur = Some(y);
        }
        Ok((cur.unwrap_or_else(|| x.clone()), caches))
    }

    pub fn forward(&self, x: &Tensor) -> Result<(Tensor, Tape), NnError> {
        let (y, caches) = self.run(x, true)?;
        let tape = Tape {
            id: self.id,
            caches,
            out_shape: y.shape().to_vec(),
        };
        Ok((y, tape))
    }

    /// Forward pass without recording activations.
    pub fn infer(&self, x: &Tensor) -> Result<Tensor, NnError> {
        Ok(self.run(x, false)?.0)
    }

    /// Back-propagates `gy` (gradient of the loss with respect to the
    /// output). The input gradient is only computed when `need_input` is set.
    pub fn backward(&self, tape: &Tape, gy: &Tensor, need_input: bool) -> Result<Gradients, NnError> {
        if tape.id != self.id || tape.caches.len() != self.layers.len() {
            return Err(NnError::StaleTape);
        }
        if gy.shape() != tape.out_shape.as_slice() {
            return Err(NnError::Shape {
                layer: self.layers.len(),
                msg: format!("output gradient {:?} vs output {:?}", gy.shape(), tape.out_shape),
            });
        }
        let mut grads = self.zero_grads();
        let mut slot = grads.params.len();
        let mut g = gy.clone();
        for (i, (l, c)) in self.layers.iter().zip(&tape.caches).enumerate().rev() {
            let n = l.param_count();
            slot -= n;
            let need = need_input || i > 0;
            match l.backward(c, &g, &mut grads.params[slot..slot + n], need) {
                Some(gx) => g = gx,
                None => {
                    debug_assert_eq!(i, 0);
                }
            }
        }
        grads.input = need_input.then_some(g);
        Ok(grads)
    }
}
