//! Finite-difference gradient checking shared by test targets.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sparsetune::nn::{Layer, Network, Tensor};

pub const H: f64 = 1e-4;
pub const TOL: f64 = 1e-4;

pub fn random_tensor(rng: &mut ChaCha8Rng, shape: Vec<usize>) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

/// Loss = sum(output * probe), so d loss / d output = probe.
fn loss(net: &Network, x: &Tensor, probe: &Tensor) -> f64 {
    let y = net.infer(x).unwrap();
    y.data().iter().zip(probe.data()).map(|(a, b)| a * b).sum()
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-2)
}

/// Largest relative error between analytic and central-difference gradients
/// over (a sample of) parameters and inputs.
pub fn max_gradient_error(net: &mut Network, x: &Tensor, rng: &mut ChaCha8Rng) -> f64 {
    let out_shape = net.output_shape(x.shape()).unwrap();
    let probe = random_tensor(rng, out_shape);
    let (_, tape) = net.forward(x).unwrap();
    let grads = net.backward(&tape, &probe, true).unwrap();
    let mut worst: f64 = 0.0;

    for p in 0..net.params().len() {
        let len = net.params()[p].len();
        let picks: Vec<usize> = if len <= 24 {
            (0..len).collect()
        } else {
            (0..24).map(|_| rng.random_range(0..len)).collect()
        };
        for idx in picks {
            let orig = net.params()[p][idx];
            net.params_mut()[p][idx] = orig + H;
            let up = loss(net, x, &probe);
            net.params_mut()[p][idx] = orig - H;
            let down = loss(net, x, &probe);
            net.params_mut()[p][idx] = orig;
            worst = worst.max(rel_err(grads.params[p][idx], (up - down) / (2.0 * H)));
        }
    }

    let gx = grads.input.unwrap();
    for idx in 0..x.len().min(32) {
        let mut xp = x.clone();
        xp.data_mut()[idx] += H;
        let mut xm = x.clone();
        xm.data_mut()[idx] -= H;
        let numeric = (loss(net, &xp, &probe) - loss(net, &xm, &probe)) / (2.0 * H);
        worst = worst.max(rel_err(gx.data()[idx], numeric));
    }
    worst
}

pub fn check(net: &mut Network, x: &Tensor, rng: &mut ChaCha8Rng) {
    let err = max_gradient_error(net, x, rng);
    assert!(err < TOL, "max relative gradient error {err}");
}

/// Zero-initialised biases put every unit behind a dead ReLU exactly on the
/// kink, where central differences are meaningless; shift them off zero.
fn jitter_biases(net: &mut Network, rng: &mut ChaCha8Rng) {
    for p in net.params_mut().into_iter().skip(1).step_by(2) {
        for v in p.iter_mut() {
            *v = rng.random_range(-0.5..0.5);
        }
    }
}

/// Dense/activation stacks of random depth and width.
pub fn random_dense_net(rng: &mut ChaCha8Rng) -> (Network, Tensor) {
    let depth = rng.random_range(1..=6usize);
    let mut layers = Vec::new();
    let mut width = rng.random_range(2..6usize);
    let input = width;
    for d in 0..depth {
        if d % 2 == 1 {
            layers.push(if rng.random_bool(0.5) { Layer::Relu } else { Layer::Tanh });
        } else {
            let next = rng.random_range(2..6usize);
            layers.push(Layer::dense(width, next, rng));
            width = next;
        }
    }
    let mut net = Network::new(layers).unwrap();
    jitter_biases(&mut net, rng);
    let x = random_tensor(rng, vec![3, input]);
    (net, x)
}

/// conv → relu → pool → conv → global pool → dense.
pub fn random_conv_net(rng: &mut ChaCha8Rng) -> (Network, Tensor) {
    let c1 = rng.random_range(1..4usize);
    let c2 = rng.random_range(1..4usize);
    let mut net = Network::new(vec![
        Layer::conv2d(1, c1, 3, rng),
        Layer::Relu,
        Layer::MaxPool2d { size: 2 },
        Layer::conv2d(c1, c2, 3, rng),
        Layer::GlobalAvgPool,
        Layer::dense(c2, 2, rng),
    ])
    .unwrap();
    jitter_biases(&mut net, rng);
    let x = random_tensor(rng, vec![2, 1, 8, 8]);
    (net, x)
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
