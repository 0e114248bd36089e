#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use trace_core::tensor::{Tensor, TensorError, Var};

pub mod oracles;

pub type OpFn = Box<dyn for<'t> Fn(&[Var<'t, f64>]) -> Result<Var<'t, f64>, TensorError>>;

pub struct OpCase {
    pub name: &'static str,
    pub inputs: Vec<Tensor<f64>>,
    pub op: OpFn,
}

fn randn(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| StandardNormal.sample(rng)).collect()).unwrap()
}

/// Values bounded away from zero so the ReLU kink is never straddled.
fn away_from_zero(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor<f64> {
    let n = shape.iter().product();
    let data = (0..n)
        .map(|_| {
            let m = rng.random_range(0.05..2.0);
            if rng.random::<bool>() { m } else { -m }
        })
        .collect();
    Tensor::new(shape, data).unwrap()
}

/// One random instance of every differentiable primitive.
pub fn op_cases(seed: u64) -> Vec<OpCase> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = &mut rng;
    let (m, k, n) = (r.random_range(1..4), r.random_range(1..5), r.random_range(1..4));
    let b = r.random_range(1..3);
    let axis3 = r.random_range(0..3);
    let ids: Vec<usize> = (0..6).map(|_| r.random_range(0..5)).collect();
    let mut targets: Vec<usize> = (0..4).map(|_| r.random_range(0..5)).collect();
    targets[r.random_range(0..4)] = 99;
    let drop_seed: u64 = r.random();
    let (s0, s1) = (r.random_range(0..2), r.random_range(2..4));
    let (t1, t2) = (r.random_range(0..3), r.random_range(0..3));

    let case = |name, inputs, op: OpFn| OpCase { name, inputs, op };
    vec![
        case("matmul", vec![randn(r, &[b, m, k]), randn(r, &[k, n])], Box::new(|x| x[0].matmul(&x[1]))),
        case("bmm", vec![randn(r, &[b, m, k]), randn(r, &[b, k, n])], Box::new(|x| x[0].bmm(&x[1]))),
        case("add", vec![randn(r, &[3, 4]), randn(r, &[4])], Box::new(|x| x[0].add(&x[1]))),
        case("mul", vec![randn(r, &[2, 3, 2]), randn(r, &[3, 2])], Box::new(|x| x[0].mul(&x[1]))),
        case("scale", vec![randn(r, &[5])], Box::new(|x| x[0].scale(-1.7))),
        case("relu", vec![away_from_zero(r, &[4, 3])], Box::new(|x| x[0].relu())),
        case("softmax", vec![randn(r, &[2, 3, 4])], Box::new(move |x| x[0].softmax(axis3))),
        case(
            "layer_norm",
            vec![randn(r, &[3, 5]), randn(r, &[5]), randn(r, &[5])],
            Box::new(|x| x[0].layer_norm(&x[1], &x[2], 1, 1e-5)),
        ),
        case(
            "embedding",
            vec![randn(r, &[5, 3])],
            Box::new(move |x| x[0].embedding(&ids, &[2, 3])),
        ),
        case(
            "concat",
            vec![randn(r, &[2, 3]), randn(r, &[2, 2])],
            Box::new(|x| Var::concat(&[x[0], x[1]], 1)),
        ),
        case("slice", vec![randn(r, &[3, 4])], Box::new(move |x| x[0].slice(1, s0, s1))),
        case("dropout", vec![randn(r, &[4, 4])], Box::new(move |x| x[0].dropout(0.3, drop_seed))),
        case(
            "cross_entropy",
            vec![randn(r, &[2, 2, 5])],
            Box::new(move |x| x[0].cross_entropy(&targets, 99)),
        ),
        case("sum", vec![randn(r, &[3, 2])], Box::new(|x| x[0].sum())),
        case("mean", vec![randn(r, &[3, 2])], Box::new(|x| x[0].mean())),
        case("transpose", vec![randn(r, &[2, 3, 4])], Box::new(move |x| x[0].transpose(t1, t2))),
        case("reshape", vec![randn(r, &[2, 6])], Box::new(|x| x[0].reshape(&[3, 4]))),
    ]
}
