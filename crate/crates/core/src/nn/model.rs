use ndarray::{s, Array2, Array3, ArrayView2, ArrayView3, ArrayViewD, ArrayViewMutD};

use super::layers::{
    maxpool_backward, maxpool_forward, relu_backward, relu_forward, sigmoid, Conv1d, ConvCache, Dense, Lstm, LstmCache,
    PoolCache,
};
use super::loss::{bce, bce_grad};
use super::ModelSpec;
use crate::dataset::Segment;
use crate::exec::Execution;
use crate::seed::{rng_for, stream};
use crate::{Error, Result};

/// Trainable weights of one model. Gradients and Adam moments reuse this type.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub spec: ModelSpec,
    pub convs: Vec<Conv1d>,
    pub lstms: Vec<Lstm>,
    pub head: Dense,
}

struct Cache {
    convs: Vec<ConvCache>,
    /// ReLU outputs after each convolution.
    activations: Vec<Array3<f64>>,
    pool: PoolCache,
    pooled_dim: (usize, usize, usize),
    lstms: Vec<LstmCache>,
    last_hidden: Array2<f64>,
    probs: Vec<f64>,
}

impl Network {
    /// Xavier-uniform weights, zero biases, forget-gate bias 1.
    pub fn init(spec: ModelSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = rng_for(seed, &[stream::INIT]);
        let convs = spec.convs.iter().map(|&c| Conv1d::init(c, &mut rng)).collect();
        let mut input = spec.convs.last().map_or(spec.input_channels, |c| c.out_channels);
        let mut lstms = Vec::with_capacity(spec.lstm_layers);
        for _ in 0..spec.lstm_layers {
            lstms.push(Lstm::init(input, spec.hidden, &mut rng));
            input = spec.hidden;
        }
        let head = Dense::init(spec.hidden, 1, &mut rng);
        Ok(Network { spec, convs, lstms, head })
    }

    pub fn zeros_like(&self) -> Self {
        Network {
            spec: self.spec.clone(),
            convs: self.convs.iter().map(|c| Conv1d::zeros(c.spec)).collect(),
            lstms: self.lstms.iter().map(|l| Lstm::zeros(l.input_size(), l.hidden_size())).collect(),
            head: Dense::zeros(self.head.weight.ncols(), self.head.weight.nrows()),
        }
    }

    pub fn tensors(&self) -> Vec<(String, ArrayViewD<'_, f64>)> {
        let mut out = Vec::new();
        for (i, c) in self.convs.iter().enumerate() {
            out.push((format!("conv{i}.weight"), c.weight.view().into_dyn()));
            out.push((format!("conv{i}.bias"), c.bias.view().into_dyn()));
        }
        for (i, l) in self.lstms.iter().enumerate() {
            out.push((format!("lstm{i}.w_ih"), l.w_ih.view().into_dyn()));
            out.push((format!("lstm{i}.w_hh"), l.w_hh.view().into_dyn()));
            out.push((format!("lstm{i}.bias"), l.bias.view().into_dyn()));
        }
        out.push(("head.weight".into(), self.head.weight.view().into_dyn()));
        out.push(("head.bias".into(), self.head.bias.view().into_dyn()));
        out
    }

    /// Same order and names as [`Network::tensors`].
    pub fn tensors_mut(&mut self) -> Vec<(String, ArrayViewMutD<'_, f64>)> {
        let mut out = Vec::new();
        for (i, c) in self.convs.iter_mut().enumerate() {
            out.push((format!("conv{i}.weight"), c.weight.view_mut().into_dyn()));
            out.push((format!("conv{i}.bias"), c.bias.view_mut().into_dyn()));
        }
        for (i, l) in self.lstms.iter_mut().enumerate() {
            out.push((format!("lstm{i}.w_ih"), l.w_ih.view_mut().into_dyn()));
            out.push((format!("lstm{i}.w_hh"), l.w_hh.view_mut().into_dyn()));
            out.push((format!("lstm{i}.bias"), l.bias.view_mut().into_dyn()));
        }
        out.push(("head.weight".into(), self.head.weight.view_mut().into_dyn()));
        out.push(("head.bias".into(), self.head.bias.view_mut().into_dyn()));
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    pub(crate) fn add_assign(&mut self, other: &Network) {
        for ((_, mut a), (_, b)) in self.tensors_mut().into_iter().zip(other.tensors()) {
            a += &b;
        }
    }

    fn stack(&self, inputs: &[ArrayView2<f64>]) -> Result<Array3<f64>> {
        let want = (self.spec.input_channels, self.spec.input_len);
        let mut x = Array3::<f64>::zeros((inputs.len(), want.0, want.1));
        for (n, seg) in inputs.iter().enumerate() {
            if seg.dim() != want {
                return Err(Error::Contract {
                    layer: "input",
                    message: format!("example {n} is {:?}, model expects {want:?}", seg.dim()),
                });
            }
            x.slice_mut(s![n, .., ..]).assign(seg);
        }
        Ok(x)
    }

    fn forward_cached(&self, x: ArrayView3<f64>) -> Cache {
        let b = x.dim().0;
        let mut conv_caches = Vec::with_capacity(self.convs.len());
        let mut activations: Vec<Array3<f64>> = Vec::with_capacity(self.convs.len());
        for conv in &self.convs {
            let input = activations.last().map_or(x.view(), |a| a.view());
            let (mut y, cache) = conv.forward(input);
            relu_forward(&mut y);
            conv_caches.push(cache);
            activations.push(y);
        }
        let last_act = activations.last().expect("at least one convolution");
        let (pooled, pool) = maxpool_forward(last_act.view(), self.spec.pool.kernel, self.spec.pool.stride);
        let pooled_dim = pooled.dim();
        let (_, c, t) = pooled_dim;
        // (batch, channels, time) -> rows ordered time-major
        let mut seq = pooled
            .permuted_axes([2, 0, 1])
            .as_standard_layout()
            .into_owned()
            .into_shape_with_order((t * b, c))
            .expect("contiguous after as_standard_layout");
        let mut lstm_caches = Vec::with_capacity(self.lstms.len());
        for lstm in &self.lstms {
            let (out, cache) = lstm.forward(seq, b);
            lstm_caches.push(cache);
            seq = out;
        }
        let last_hidden = seq.slice(s![(t - 1) * b..t * b, ..]).to_owned();
        let logits = self.head.forward(last_hidden.view());
        let probs = logits.column(0).iter().map(|&z| sigmoid(z)).collect();
        Cache { convs: conv_caches, activations, pool, pooled_dim, lstms: lstm_caches, last_hidden, probs }
    }

    /// Gradient of `scale * sum(bce)` over the examples. Returns the unscaled loss sum.
    fn loss_and_grad(&self, x: ArrayView3<f64>, targets: &[f64], scale: f64) -> (f64, Network) {
        let cache = self.forward_cached(x);
        let b = targets.len();
        let loss: f64 = cache.probs.iter().zip(targets).map(|(&p, &y)| bce(p, y)).sum();
        let dlogit = Array2::from_shape_fn((b, 1), |(n, _)| scale * bce_grad(cache.probs[n], targets[n]));

        let mut grad = self.zeros_like();
        let dlast = self.head.backward(cache.last_hidden.view(), dlogit.view(), &mut grad.head);
        let (_, c, t) = cache.pooled_dim;
        let mut dseq = Array2::<f64>::zeros((t * b, self.spec.hidden));
        dseq.slice_mut(s![(t - 1) * b..t * b, ..]).assign(&dlast);
        for (i, lstm) in self.lstms.iter().enumerate().rev() {
            dseq = lstm.backward(&cache.lstms[i], dseq.view(), &mut grad.lstms[i]);
        }
        let dpooled = dseq.into_shape_with_order((t, b, c)).expect("rows are time-major").permuted_axes([1, 2, 0]);
        let mut dact = maxpool_backward(&cache.pool, dpooled.view());
        for i in (0..self.convs.len()).rev() {
            relu_backward(&cache.activations[i], &mut dact);
            match self.convs[i].backward(&cache.convs[i], dact.view(), &mut grad.convs[i], i > 0) {
                Some(dx) => dact = dx,
                None => break,
            }
        }
        (loss, grad)
    }
}

/// Probabilities for a batch of `(channels, len)` inputs.
pub fn forward(net: &Network, inputs: &[ArrayView2<f64>]) -> Result<Vec<f64>> {
    if inputs.is_empty() {
        return Ok(Vec::new());
    }
    let x = net.stack(inputs)?;
    Ok(net.forward_cached(x.view()).probs)
}

/// Mean BCE over the batch and its gradient with respect to every parameter.
pub fn backward(net: &Network, inputs: &[ArrayView2<f64>], targets: &[f64]) -> Result<(f64, Network)> {
    if inputs.len() != targets.len() || inputs.is_empty() {
        return Err(Error::InvalidArgument(format!("{} inputs with {} targets", inputs.len(), targets.len())));
    }
    let x = net.stack(inputs)?;
    let n = targets.len() as f64;
    let (loss, grad) = net.loss_and_grad(x.view(), targets, 1.0 / n);
    Ok((loss / n, grad))
}

/// Mean-loss gradient over `segments`, computed in fixed-size chunks that may
/// run in parallel. Chunk results are summed in chunk order, so the result is
/// identical for every [`Execution`] mode.
pub fn batch_loss_and_grad(
    net: &Network,
    segments: &[&Segment],
    chunk: usize,
    exec: Execution,
) -> Result<(f64, Network)> {
    if segments.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    let n = segments.len() as f64;
    let chunks: Vec<&[&Segment]> = segments.chunks(chunk.max(1)).collect();
    let parts = exec.try_map(&chunks, |part| {
        let views: Vec<ArrayView2<f64>> = part.iter().map(|s| s.data.view()).collect();
        let targets: Vec<f64> = part.iter().map(|s| s.label.target()).collect();
        let x = net.stack(&views)?;
        Ok::<_, Error>(net.loss_and_grad(x.view(), &targets, 1.0 / n))
    })?;
    let mut iter = parts.into_iter();
    let (mut loss, mut grad) = iter.next().expect("non-empty");
    for (l, g) in iter {
        loss += l;
        grad.add_assign(&g);
    }
    Ok((loss / n, grad))
}
