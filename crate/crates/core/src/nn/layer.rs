use ndarray::linalg::general_mat_mul;
use ndarray::{ArrayView2, ArrayViewMut2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{NnError, Tensor};

/// One stage of a [`Network`](super::Network).
///
/// Dense weights are stored `[outputs, inputs]`; convolution weights are
/// stored `[out_channels, in_channels * kernel * kernel]`. Convolutions use
/// stride 1 and zero padding; pooling windows do not overlap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Layer {
    Dense {
        inputs: usize,
        outputs: usize,
        weight: Vec<f64>,
        bias: Vec<f64>,
    },
    Conv2d {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        padding: usize,
        weight: Vec<f64>,
        bias: Vec<f64>,
    },
    MaxPool2d {
        size: usize,
    },
    Relu,
    Tanh,
    GlobalAvgPool,
}

#[derive(Debug, Clone)]
pub(crate) enum Cache {
    Dense { input: Tensor },
    Conv { cols: Vec<Vec<f64>>, in_shape: Vec<usize>, out_hw: (usize, usize) },
    Pool { argmax: Vec<usize>, in_shape: Vec<usize> },
    Relu { output: Tensor },
    Tanh { output: Tensor },
    Gap { in_shape: Vec<usize> },
}

fn glorot(rng: &mut impl Rng, fan_in: usize, fan_out: usize, n: usize) -> Vec<f64> {
    let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
    (0..n).map(|_| rng.random_range(-a..a)).collect()
}

fn matmul(a: ArrayView2<f64>, b: ArrayView2<f64>, beta: f64, c: &mut ArrayViewMut2<f64>) {
    general_mat_mul(1.0, &a, &b, beta, c);
}

fn view(shape: (usize, usize), data: &[f64]) -> ArrayView2<'_, f64> {
    ArrayView2::from_shape(shape, data).expect("shape checked by caller")
}

fn view_mut(shape: (usize, usize), data: &mut [f64]) -> ArrayViewMut2<'_, f64> {
    ArrayViewMut2::from_shape(shape, data).expect("shape checked by caller")
}

impl Layer {
    pub fn dense(inputs: usize, outputs: usize, rng: &mut impl Rng) -> Self {
        Layer::Dense {
            inputs,
            outputs,
            weight: glorot(rng, inputs, outputs, inputs * outputs),
            bias: vec![0.0; outputs],
        }
    }

    /// A "same"-padded convolution when `kernel` is odd.
    pub fn conv2d(in_channels: usize, out_channels: usize, kernel: usize, rng: &mut impl Rng) -> Self {
        let k2 = kernel * kernel;
        Layer::Conv2d {
            in_channels,
            out_channels,
            kernel,
            padding: kernel / 2,
            weight: glorot(rng, in_channels * k2, out_channels * k2, out_channels * in_channels * k2),
            bias: vec![0.0; out_channels],
        }
    }

    pub fn params(&self) -> Vec<&Vec<f64>> {
        match self {
            Layer::Dense { weight, bias, .. } | Layer::Conv2d { weight, bias, .. } => {
                vec![weight, bias]
            }
            _ => Vec::new(),
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Vec<f64>> {
        match self {
            Layer::Dense { weight, bias, .. } | Layer::Conv2d { weight, bias, .. } => {
                vec![weight, bias]
            }
            _ => Vec::new(),
        }
    }

    pub(crate) fn param_count(&self) -> usize {
        match self {
            Layer::Dense { .. } | Layer::Conv2d { .. } => 2,
            _ => 0,
        }
    }

    /// Checks that stored parameters agree with the declared sizes.
    pub fn validate(&self) -> Result<(), NnError> {
        let bad = |what: &str| Err(NnError::InvalidLayer(what.to_string()));
        match self {
            Layer::Dense { inputs, outputs, weight, bias } => {
                if *inputs == 0 || *outputs == 0 {
                    return bad("dense layer with zero width");
                }
                if weight.len() != inputs * outputs || bias.len() != *outputs {
                    return bad("dense parameter length mismatch");
                }
            }
            Layer::Conv2d { in_channels, out_channels, kernel, weight, bias, .. } => {
                if *in_channels == 0 || *out_channels == 0 || *kernel == 0 {
                    return bad("conv layer with zero extent");
                }
                if weight.len() != out_channels * in_channels * kernel * kernel
                    || bias.len() != *out_channels
                {
                    return bad("conv parameter length mismatch");
                }
            }
            Layer::MaxPool2d { size } if *size == 0 => return bad("pool size 0"),
            _ => {}
        }
        Ok(())
    }

    /// Shape produced for a given input shape, or a description of the mismatch.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>, String> {
        match self {
            Layer::Dense { inputs, outputs, .. } => match input {
                [b, n] if n == inputs => Ok(vec![*b, *outputs]),
                _ => Err(format!("dense expects [batch, {inputs}], got {input:?}")),
            },
            Layer::Conv2d { in_channels, out_channels, kernel, padding, .. } => match input {
                [b, c, h, w] if c == in_channels => {
                    let ho = (h + 2 * padding).checked_sub(kernel - 1).filter(|v| *v > 0);
                    let wo = (w + 2 * padding).checked_sub(kernel - 1).filter(|v| *v > 0);
                    match (ho, wo) {
                        (Some(ho), Some(wo)) => Ok(vec![*b, *out_channels, ho, wo]),
                        _ => Err(format!("conv kernel {kernel} larger than input {h}x{w}")),
                    }
                }
                _ => Err(format!("conv expects [batch, {in_channels}, h, w], got {input:?}")),
            },
            Layer::MaxPool2d { size } => match input {
                [b, c, h, w] if h / size > 0 && w / size > 0 => {
                    Ok(vec![*b, *c, h / size, w / size])
                }
                _ => Err(format!("pool {size} cannot reduce {input:?}")),
            },
            Layer::GlobalAvgPool => match input {
                [b, c, _, _] => Ok(vec![*b, *c]),
                _ => Err(format!("global pooling expects 4-D input, got {input:?}")),
            },
            Layer::Relu | Layer::Tanh => Ok(input.to_vec()),
        }
    }

    pub(crate) fn forward(&self, x: &Tensor, record: bool) -> (Tensor, Option<Cache>) {
        match self {
            Layer::Dense { inputs, outputs, weight, bias } => {
                let b = x.shape()[0];
                let mut y = Tensor::zeros(vec![b, *outputs]);
                for r in 0..b {
                    y.data_mut()[r * outputs..(r + 1) * outputs].copy_from_slice(bias);
                }
                let xv = view((b, *inputs), x.data());
                let wv = view((*outputs, *inputs), weight);
                matmul(xv, wv.t(), 1.0, &mut view_mut((b, *outputs), y.data_mut()));
                let cache = record.then(|| Cache::Dense { input: x.clone() });
                (y, cache)
            }
            Layer::Conv2d { in_channels, out_channels, kernel, padding, weight, bias } => {
                let s = x.shape();
                let (b, h, w) = (s[0], s[2], s[3]);
                let ho = h + 2 * padding + 1 - kernel;
                let wo = w + 2 * padding + 1 - kernel;
                let rows = in_channels * kernel * kernel;
                let plane = ho * wo;
                let mut y = Tensor::zeros(vec![b, *out_channels, ho, wo]);
                let wv = view((*out_channels, rows), weight);
                let mut cols_all = Vec::with_capacity(if record { b } else { 0 });
                let in_stride = in_channels * h * w;
                let out_stride = out_channels * plane;
                for n in 0..b {
                    let cols = im2col(
                        &x.data()[n * in_stride..(n + 1) * in_stride],
                        (*in_channels, h, w),
                        *kernel,
                        *padding,
                        (ho, wo),
                    );
                    let out = &mut y.data_mut()[n * out_stride..(n + 1) * out_stride];
                    for (o, chunk) in out.chunks_mut(plane).enumerate() {
                        chunk.fill(bias[o]);
                    }
                    matmul(wv, view((rows, plane), &cols), 1.0, &mut view_mut((*out_channels, plane), out));
                    if record {
                        cols_all.push(cols);
                    }
                }
                let cache = record.then(|| Cache::Conv {
                    cols: cols_all,
                    in_shape: s.to_vec(),
                    out_hw: (ho, wo),
                });
                (y, cache)
            }
            Layer::MaxPool2d { size } => {
                let s = x.shape();
                let (b, c, h, w) = (s[0], s[1], s[2], s[3]);
                let (ho, wo) = (h / size, w / size);
                let mut y = Tensor::zeros(vec![b, c, ho, wo]);
                let mut argmax = vec![0usize; b * c * ho * wo];
                let xd = x.data();
                for bc in 0..b * c {
                    let base = bc * h * w;
                    for oy in 0..ho {
                        for ox in 0..wo {
                            let mut best = usize::MAX;
                            let mut best_v = f64::NEG_INFINITY;
                            for dy in 0..*size {
                                for dx in 0..*size {
                                    let idx = base + (oy * size + dy) * w + ox * size + dx;
                                    if best == usize::MAX || xd[idx] > best_v {
                                        best = idx;
                                        best_v = xd[idx];
                                    }
                                }
                            }
                            let o = (bc * ho + oy) * wo + ox;
                            y.data_mut()[o] = best_v;
                            argmax[o] = best;
                        }
                    }
                }
                let cache = record.then(|| Cache::Pool { argmax, in_shape: s.to_vec() });
                (y, cache)
            }
            Layer::Relu => {
                let mut y = x.clone();
                y.data_mut().iter_mut().for_each(|v| *v = v.max(0.0));
                let cache = record.then(|| Cache::Relu { output: y.clone() });
                (y, cache)
            }
            Layer::Tanh => {
                let mut y = x.clone();
                y.data_mut().iter_mut().for_each(|v| *v = v.tanh());
                let cache = record.then(|| Cache::Tanh { output: y.clone() });
                (y, cache)
            }
            Layer::GlobalAvgPool => {
                let s = x.shape();
                let (b, c, plane) = (s[0], s[1], s[2] * s[3]);
                let data = x
                    .data()
                    .chunks(plane)
                    .map(|p| p.iter().sum::<f64>() / plane as f64)
                    .collect();
                let y = Tensor::new(vec![b, c], data).expect("pooled length");
                let cache = record.then(|| Cache::Gap { in_shape: s.to_vec() });
                (y, cache)
            }
        }
    }

    /// Accumulates parameter gradients into `grads` (one slot per
    /// parameter) and returns the gradient with respect to the input when
    /// `need_input` is set.
    pub(crate) fn backward(
        &self,
        cache: &Cache,
        gy: &Tensor,
        grads: &mut [Vec<f64>],
        need_input: bool,
    ) -> Option<Tensor> {
        match (self, cache) {
            (Layer::Dense { inputs, outputs, weight, .. }, Cache::Dense { input }) => {
                let b = input.shape()[0];
                let gyv = view((b, *outputs), gy.data());
                let (gw, gb) = grads.split_at_mut(1);
                matmul(gyv.t(), view((b, *inputs), input.data()), 1.0, &mut view_mut((*outputs, *inputs), &mut gw[0]));
                for r in 0..b {
                    for (acc, g) in gb[0].iter_mut().zip(gy.row(r)) {
                        *acc += g;
                    }
                }
                need_input.then(|| {
                    let mut gx = Tensor::zeros(vec![b, *inputs]);
                    matmul(gyv, view((*outputs, *inputs), weight), 0.0, &mut view_mut((b, *inputs), gx.data_mut()));
                    gx
                })
            }
            (
                Layer::Conv2d { in_channels, out_channels, kernel, padding, weight, .. },
                Cache::Conv { cols, in_shape, out_hw },
            ) => {
                let (b, h, w) = (in_shape[0], in_shape[2], in_shape[3]);
                let rows = in_channels * kernel * kernel;
                let plane = out_hw.0 * out_hw.1;
                let out_stride = out_channels * plane;
                let in_stride = in_channels * h * w;
                let wv = view((*out_channels, rows), weight);
                let mut gx = need_input.then(|| Tensor::zeros(in_shape.clone()));
                let mut dcols = vec![0.0; if need_input { rows * plane } else { 0 }];
                let (gw, gb) = grads.split_at_mut(1);
                for n in 0..b {
                    let gyn = &gy.data()[n * out_stride..(n + 1) * out_stride];
                    let gyv = view((*out_channels, plane), gyn);
                    matmul(gyv, view((rows, plane), &cols[n]).t(), 1.0, &mut view_mut((*out_channels, rows), &mut gw[0]));
                    for (o, chunk) in gyn.chunks(plane).enumerate() {
                        gb[0][o] += chunk.iter().sum::<f64>();
                    }
                    if let Some(gx) = gx.as_mut() {
                        matmul(wv.t(), gyv, 0.0, &mut view_mut((rows, plane), &mut dcols));
                        col2im(
                            &dcols,
                            &mut gx.data_mut()[n * in_stride..(n + 1) * in_stride],
                            (*in_channels, h, w),
                            *kernel,
                            *padding,
                            *out_hw,
                        );
                    }
                }
                gx
            }
            (Layer::MaxPool2d { .. }, Cache::Pool { argmax, in_shape }) => need_input.then(|| {
                let mut gx = Tensor::zeros(in_shape.clone());
                for (o, &src) in argmax.iter().enumerate() {
                    gx.data_mut()[src] += gy.data()[o];
                }
                gx
            }),
            (Layer::Relu, Cache::Relu { output }) => need_input.then(|| {
                let mut gx = gy.clone();
                for (g, y) in gx.data_mut().iter_mut().zip(output.data()) {
                    if *y <= 0.0 {
                        *g = 0.0;
                    }
                }
                gx
            }),
            (Layer::Tanh, Cache::Tanh { output }) => need_input.then(|| {
                let mut gx = gy.clone();
                for (g, y) in gx.data_mut().iter_mut().zip(output.data()) {
                    *g *= 1.0 - y * y;
                }
                gx
            }),
            (Layer::GlobalAvgPool, Cache::Gap { in_shape }) => need_input.then(|| {
                let plane = in_shape[2] * in_shape[3];
                let mut gx = Tensor::zeros(in_shape.clone());
                for (chunk, g) in gx.data_mut().chunks_mut(plane).zip(gy.data()) {
                    chunk.fill(g / plane as f64);
                }
                gx
            }),
            _ => unreachable!("cache kind always matches its layer"),
        }
    }
}

fn im2col(
    x: &[f64],
    (c, h, w): (usize, usize, usize),
    k: usize,
    pad: usize,
    (ho, wo): (usize, usize),
) -> Vec<f64> {
    let plane = ho * wo;
    let mut cols = vec![0.0; c * k * k * plane];
    for ch in 0..c {
        for ki in 0..k {
            for kj in 0..k {
                let row = (ch * k + ki) * k + kj;
                let dst = &mut cols[row * plane..(row + 1) * plane];
                for oy in 0..ho {
                    let iy = oy + ki;
                    if iy < pad || iy - pad >= h {
                        continue;
                    }
                    let src = &x[(ch * h + iy - pad) * w..(ch * h + iy - pad + 1) * w];
                    for ox in 0..wo {
                        let ix = ox + kj;
                        if ix >= pad && ix - pad < w {
                            dst[oy * wo + ox] = src[ix - pad];
                        }
                    }
                }
            }
        }
    }
    cols
}

fn col2im(
    cols: &[f64],
    gx: &mut [f64],
    (c, h, w): (usize, usize, usize),
    k: usize,
    pad: usize,
    (ho, wo): (usize, usize),
) {
    let plane = ho * wo;
    for ch in 0..c {
        for ki in 0..k {
            for kj in 0..k {
                let row = (ch * k + ki) * k + kj;
                let src = &cols[row * plane..(row + 1) * plane];
                for oy in 0..ho {
                    let iy = oy + ki;
                    if iy < pad || iy - pad >= h {
                        continue;
                    }
                    let base = (ch * h + iy - pad) * w;
                    for ox in 0..wo {
                        let ix = ox + kj;
                        if ix >= pad && ix - pad < w {
                            gx[base + ix - pad] += src[oy * wo + ox];
                        }
                    }
                }
            }
        }
    }
}
