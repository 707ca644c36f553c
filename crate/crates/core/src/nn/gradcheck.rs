//! Central finite-difference checks of the analytic backward passes.
//!
//! Each check builds a randomly initialised layer and input, reduces the layer
//! output to a scalar `sum(w * y)` with random weights `w`, and compares every
//! analytic partial derivative against `(L(x + h) - L(x - h)) / 2h`.

use ndarray::{Array1, Array2, Array3, ArrayView2, ArrayViewD};
use rand::Rng as _;

use super::layers::{maxpool_backward, maxpool_forward, sigmoid, Conv1d, Dense, Lstm};
use super::{backward, bce, bce_grad, forward, ConvSpec, ModelSpec, Network};
use crate::seed::{rng_for, Rng};
use crate::Result;

pub const STEP: f64 = 1e-5;
/// Denominator floor for the relative error, so that partials that are zero
/// up to rounding are compared absolutely.
pub const ERROR_FLOOR: f64 = 1e-6;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(ERROR_FLOOR)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    pub name: String,
    pub max_rel_error: f64,
    pub checked: usize,
}

impl GradCheck {
    fn new(name: impl Into<String>) -> Self {
        GradCheck { name: name.into(), max_rel_error: 0.0, checked: 0 }
    }

    fn record(&mut self, analytic: f64, numeric: f64) {
        self.max_rel_error = self.max_rel_error.max(relative_error(analytic, numeric));
        self.checked += 1;
    }

    fn absorb(&mut self, other: GradCheck) {
        self.max_rel_error = self.max_rel_error.max(other.max_rel_error);
        self.checked += other.checked;
    }
}

fn uniform(rng: &mut Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn array3(rng: &mut Rng, dim: (usize, usize, usize)) -> Array3<f64> {
    Array3::from_shape_vec(dim, uniform(rng, dim.0 * dim.1 * dim.2)).expect("sized")
}

fn array2(rng: &mut Rng, dim: (usize, usize)) -> Array2<f64> {
    Array2::from_shape_vec(dim, uniform(rng, dim.0 * dim.1)).expect("sized")
}

/// Compares `analytic` (flattened) with central differences of `loss` over
/// the slot selected by `slot`.
fn compare<T: Clone>(
    check: &mut GradCheck,
    base: &T,
    slot: fn(&mut T) -> &mut [f64],
    analytic: &[f64],
    loss: impl Fn(&T) -> f64,
) {
    let mut probe = base.clone();
    assert_eq!(slot(&mut probe).len(), analytic.len(), "gradient shape");
    for (i, &a) in analytic.iter().enumerate() {
        let orig = slot(&mut probe)[i];
        slot(&mut probe)[i] = orig + STEP;
        let up = loss(&probe);
        slot(&mut probe)[i] = orig - STEP;
        let down = loss(&probe);
        slot(&mut probe)[i] = orig;
        check.record(a, (up - down) / (2.0 * STEP));
    }
}

fn flat(a: ArrayViewD<f64>) -> Vec<f64> {
    a.iter().copied().collect()
}

pub fn check_conv(spec: ConvSpec, batch: usize, in_len: usize, seed: u64) -> GradCheck {
    let mut rng = rng_for(seed, &[]);
    let conv = Conv1d::init(spec, &mut rng);
    let x = array3(&mut rng, (batch, spec.in_channels, in_len));
    let (y, cache) = conv.forward(x.view());
    let w = array3(&mut rng, y.dim());
    let mut grad = Conv1d::zeros(spec);
    let dx = conv.backward(&cache, w.view(), &mut grad, true).expect("input gradient requested");

    let loss = |s: &(Conv1d, Array3<f64>)| (s.0.forward(s.1.view()).0 * &w).sum();
    let base = (conv, x);
    let mut check = GradCheck::new(format!(
        "conv K={} S={} P={} ({}->{})",
        spec.kernel, spec.stride, spec.pad, spec.in_channels, spec.out_channels
    ));
    compare(&mut check, &base, |s| s.0.weight.as_slice_mut().unwrap(), &flat(grad.weight.view().into_dyn()), loss);
    compare(&mut check, &base, |s| s.0.bias.as_slice_mut().unwrap(), &flat(grad.bias.view().into_dyn()), loss);
    compare(&mut check, &base, |s| s.1.as_slice_mut().unwrap(), &flat(dx.view().into_dyn()), loss);
    check
}

pub fn check_maxpool(batch: usize, channels: usize, len: usize, kernel: usize, stride: usize, seed: u64) -> GradCheck {
    let mut rng = rng_for(seed, &[]);
    let x = array3(&mut rng, (batch, channels, len));
    let (y, cache) = maxpool_forward(x.view(), kernel, stride);
    let w = array3(&mut rng, y.dim());
    let dx = maxpool_backward(&cache, w.view());
    let loss = |x: &Array3<f64>| (maxpool_forward(x.view(), kernel, stride).0 * &w).sum();
    let mut check = GradCheck::new(format!("max-pool k={kernel} s={stride}"));
    compare(&mut check, &x, |x| x.as_slice_mut().unwrap(), &flat(dx.view().into_dyn()), loss);
    check
}

pub fn check_lstm(input: usize, hidden: usize, steps: usize, batch: usize, seed: u64) -> GradCheck {
    let mut rng = rng_for(seed, &[]);
    let mut lstm = Lstm::init(input, hidden, &mut rng);
    // nonzero, non-default biases exercise every gate path
    lstm.bias = Array1::from(uniform(&mut rng, 4 * hidden));
    let x = array2(&mut rng, (steps * batch, input));
    let (y, cache) = lstm.forward(x.clone(), batch);
    let w = array2(&mut rng, y.dim());
    let mut grad = Lstm::zeros(input, hidden);
    let dx = lstm.backward(&cache, w.view(), &mut grad);

    let loss = |s: &(Lstm, Array2<f64>)| (s.0.forward(s.1.clone(), batch).0 * &w).sum();
    let base = (lstm, x);
    let mut check = GradCheck::new(format!("lstm {input}->{hidden} T={steps}"));
    compare(&mut check, &base, |s| s.0.w_ih.as_slice_mut().unwrap(), &flat(grad.w_ih.view().into_dyn()), loss);
    compare(&mut check, &base, |s| s.0.w_hh.as_slice_mut().unwrap(), &flat(grad.w_hh.view().into_dyn()), loss);
    compare(&mut check, &base, |s| s.0.bias.as_slice_mut().unwrap(), &flat(grad.bias.view().into_dyn()), loss);
    compare(&mut check, &base, |s| s.1.as_slice_mut().unwrap(), &flat(dx.view().into_dyn()), loss);
    check
}

pub fn check_dense(input: usize, output: usize, batch: usize, seed: u64) -> GradCheck {
    let mut rng = rng_for(seed, &[]);
    let mut dense = Dense::init(input, output, &mut rng);
    dense.bias = Array1::from(uniform(&mut rng, output));
    let x = array2(&mut rng, (batch, input));
    let y = dense.forward(x.view());
    let w = array2(&mut rng, y.dim());
    let mut grad = Dense::zeros(input, output);
    let dx = dense.backward(x.view(), w.view(), &mut grad);

    let loss = |s: &(Dense, Array2<f64>)| (s.0.forward(s.1.view()) * &w).sum();
    let base = (dense, x);
    let mut check = GradCheck::new(format!("dense {input}->{output}"));
    compare(&mut check, &base, |s| s.0.weight.as_slice_mut().unwrap(), &flat(grad.weight.view().into_dyn()), loss);
    compare(&mut check, &base, |s| s.0.bias.as_slice_mut().unwrap(), &flat(grad.bias.view().into_dyn()), loss);
    compare(&mut check, &base, |s| s.1.as_slice_mut().unwrap(), &flat(dx.view().into_dyn()), loss);
    check
}

/// `d bce(sigmoid(z), y) / dz` over logits spread across the unclamped range.
pub fn check_sigmoid_bce() -> GradCheck {
    let mut check = GradCheck::new("sigmoid + bce");
    for i in 0..=40 {
        let z = -8.0 + 0.4 * i as f64;
        for y in [0.0, 1.0] {
            let numeric = (bce(sigmoid(z + STEP), y) - bce(sigmoid(z - STEP), y)) / (2.0 * STEP);
            check.record(bce_grad(sigmoid(z), y), numeric);
        }
    }
    check
}

/// Every parameter of a whole network against the mean BCE over a random batch.
pub fn check_network(spec: &ModelSpec, batch: usize, seed: u64) -> Result<GradCheck> {
    let mut rng = rng_for(seed, &[1]);
    let net = Network::init(spec.clone(), seed)?;
    let inputs: Vec<Array2<f64>> =
        (0..batch).map(|_| array2(&mut rng, (spec.input_channels, spec.input_len))).collect();
    let targets: Vec<f64> = (0..batch).map(|n| (n % 2) as f64).collect();
    let views: Vec<ArrayView2<f64>> = inputs.iter().map(|x| x.view()).collect();
    let (_, grad) = backward(&net, &views, &targets)?;
    let loss = |net: &Network| -> f64 {
        let p = forward(net, &views).expect("shapes already checked");
        p.iter().zip(&targets).map(|(&p, &y)| bce(p, y)).sum::<f64>() / batch as f64
    };

    let mut check = GradCheck::new(format!("network {}", spec.descriptor()));
    let analytic: Vec<(String, Vec<f64>)> = grad.tensors().into_iter().map(|(n, t)| (n, flat(t))).collect();
    let mut probe = net.clone();
    for (k, (_, a)) in analytic.iter().enumerate() {
        let mut part = GradCheck::new("");
        for (i, &ai) in a.iter().enumerate() {
            let orig = nth(&mut probe, k, i, None);
            nth(&mut probe, k, i, Some(orig + STEP));
            let up = loss(&probe);
            nth(&mut probe, k, i, Some(orig - STEP));
            let down = loss(&probe);
            nth(&mut probe, k, i, Some(orig));
            part.record(ai, (up - down) / (2.0 * STEP));
        }
        check.absorb(part);
    }
    Ok(check)
}

fn nth(net: &mut Network, tensor: usize, index: usize, set: Option<f64>) -> f64 {
    let mut tensors = net.tensors_mut();
    let slot = tensors[tensor].1.as_slice_mut().expect("parameters are contiguous");
    if let Some(v) = set {
        slot[index] = v;
    }
    slot[index]
}
