//! Finite-difference checks of every layer's backward pass.

mod common;

use common::{check, random_conv_net, random_dense_net, random_tensor, seeded};
use sparsetune::nn::{Layer, Network};

#[test]
fn dense_gradients() {
    let mut rng = seeded(11);
    let mut net = Network::new(vec![Layer::dense(5, 3, &mut rng)]).unwrap();
    let x = random_tensor(&mut rng, vec![4, 5]);
    check(&mut net, &x, &mut rng);
}

#[test]
fn activation_gradients() {
    let mut rng = seeded(12);
    for act in [Layer::Relu, Layer::Tanh] {
        let mut net = Network::new(vec![Layer::dense(4, 6, &mut rng), act]).unwrap();
        let x = random_tensor(&mut rng, vec![3, 4]);
        check(&mut net, &x, &mut rng);
    }
}

#[test]
fn conv_gradients() {
    let mut rng = seeded(13);
    for kernel in [1, 3, 5] {
        let mut net = Network::new(vec![Layer::conv2d(2, 3, kernel, &mut rng)]).unwrap();
        let x = random_tensor(&mut rng, vec![2, 2, 6, 5]);
        check(&mut net, &x, &mut rng);
    }
}

#[test]
fn pool_and_global_pool_gradients() {
    let mut rng = seeded(14);
    let mut net = Network::new(vec![
        Layer::conv2d(1, 2, 3, &mut rng),
        Layer::MaxPool2d { size: 2 },
        Layer::GlobalAvgPool,
    ])
    .unwrap();
    let x = random_tensor(&mut rng, vec![2, 1, 8, 8]);
    check(&mut net, &x, &mut rng);
}

#[test]
fn random_composed_networks() {
    let mut rng = seeded(15);
    for _ in 0..16 {
        let (mut net, x) = random_dense_net(&mut rng);
        check(&mut net, &x, &mut rng);
    }
}

#[test]
fn random_composed_conv_networks() {
    let mut rng = seeded(16);
    for _ in 0..4 {
        let (mut net, x) = random_conv_net(&mut rng);
        check(&mut net, &x, &mut rng);
    }
}
