//! Layer kernels with explicit forward caches and analytic backward passes.
//!
//! Sequences are batched as `(batch, channels, time)` for the convolutional
//! stage and as `time * batch` rows for the recurrent stage.

use ndarray::{s, Array1, Array2, Array3, ArrayView2, ArrayView3, Axis};

use super::ConvSpec;
use crate::seed::Rng;
use rand::Rng as _;

fn xavier(rng: &mut Rng, fan_in: usize, fan_out: usize, n: usize) -> Vec<f64> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    (0..n).map(|_| rng.random_range(-limit..limit)).collect()
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

// ---------------------------------------------------------------------------
// Conv1d

#[derive(Debug, Clone, PartialEq)]
pub struct Conv1d {
    pub spec: ConvSpec,
    /// `(out_channels, in_channels, kernel)`.
    pub weight: Array3<f64>,
    pub bias: Array1<f64>,
}

pub struct ConvCache {
    cols: Array2<f64>,
    batch: usize,
    in_len: usize,
    out_len: usize,
}

impl Conv1d {
    pub fn zeros(spec: ConvSpec) -> Self {
        Conv1d {
            spec,
            weight: Array3::zeros((spec.out_channels, spec.in_channels, spec.kernel)),
            bias: Array1::zeros(spec.out_channels),
        }
    }

    pub fn init(spec: ConvSpec, rng: &mut Rng) -> Self {
        let mut c = Self::zeros(spec);
        let w = xavier(rng, spec.in_channels * spec.kernel, spec.out_channels * spec.kernel, c.weight.len());
        c.weight = Array3::from_shape_vec(c.weight.dim(), w).expect("sized above");
        c
    }

    /// `x`: `(batch, in_channels, len)` -> `(batch, out_channels, out_len)`.
    pub fn forward(&self, x: ArrayView3<f64>) -> (Array3<f64>, ConvCache) {
        let ConvSpec { in_channels: cin, out_channels: cout, kernel: k, stride, pad } = self.spec;
        let (b, _, len) = x.dim();
        let out_len = (len + 2 * pad - k) / stride + 1;
        // im2col: row = c*K + tap, column = example*out_len + position
        let mut cols = Array2::<f64>::zeros((cin * k, b * out_len));
        for n in 0..b {
            for c in 0..cin {
                let xs = x.slice(s![n, c, ..]);
                for tap in 0..k {
                    let mut row = cols.slice_mut(s![c * k + tap, n * out_len..(n + 1) * out_len]);
                    for (l, v) in row.iter_mut().enumerate() {
                        let src = (l * stride + tap) as isize - pad as isize;
                        if src >= 0 && (src as usize) < len {
                            *v = xs[src as usize];
                        }
                    }
                }
            }
        }
        let w2 = self.weight.view().into_shape_with_order((cout, cin * k)).expect("contiguous weight");
        let y2 = w2.dot(&cols);
        let mut y = Array3::<f64>::zeros((b, cout, out_len));
        for n in 0..b {
            let mut yn = y.slice_mut(s![n, .., ..]);
            yn.assign(&y2.slice(s![.., n * out_len..(n + 1) * out_len]));
            yn += &self.bias.view().insert_axis(Axis(1));
        }
        (y, ConvCache { cols, batch: b, in_len: len, out_len })
    }

    /// Accumulates parameter gradients into `grad`; returns `dx` when requested.
    pub fn backward(
        &self,
        cache: &ConvCache,
        dy: ArrayView3<f64>,
        grad: &mut Conv1d,
        need_input_grad: bool,
    ) -> Option<Array3<f64>> {
        let ConvSpec { in_channels: cin, out_channels: cout, kernel: k, stride, pad } = self.spec;
        let (b, out_len) = (cache.batch, cache.out_len);
        let mut dy2 = Array2::<f64>::zeros((cout, b * out_len));
        for n in 0..b {
            dy2.slice_mut(s![.., n * out_len..(n + 1) * out_len]).assign(&dy.slice(s![n, .., ..]));
        }
        let dw = dy2.dot(&cache.cols.t());
        grad.weight += &dw.into_shape_with_order((cout, cin, k)).expect("sized");
        grad.bias += &dy2.sum_axis(Axis(1));
        if !need_input_grad {
            return None;
        }
        let w2 = self.weight.view().into_shape_with_order((cout, cin * k)).expect("contiguous weight");
        let dcols = w2.t().dot(&dy2);
        let len = cache.in_len;
        let mut dx = Array3::<f64>::zeros((b, cin, len));
        for n in 0..b {
            for c in 0..cin {
                for tap in 0..k {
                    let row = dcols.slice(s![c * k + tap, n * out_len..(n + 1) * out_len]);
                    for (l, &g) in row.iter().enumerate() {
                        let src = (l * stride + tap) as isize - pad as isize;
                        if src >= 0 && (src as usize) < len {
                            dx[[n, c, src as usize]] += g;
                        }
                    }
                }
            }
        }
        Some(dx)
    }
}

// ---------------------------------------------------------------------------
// ReLU

pub fn relu_forward(x: &mut Array3<f64>) {
    x.mapv_inplace(|v| v.max(0.0));
}

/// `y` is the ReLU output; gradient passes where it is positive.
pub fn relu_backward(y: &Array3<f64>, dy: &mut Array3<f64>) {
    ndarray::Zip::from(dy).and(y).for_each(|d, &v| {
        if v <= 0.0 {
            *d = 0.0;
        }
    });
}

// ---------------------------------------------------------------------------
// MaxPool1d

pub struct PoolCache {
    /// Flat argmax index into the input time axis per output cell.
    argmax: Array3<usize>,
    in_len: usize,
}

pub fn maxpool_forward(x: ArrayView3<f64>, kernel: usize, stride: usize) -> (Array3<f64>, PoolCache) {
    let (b, c, len) = x.dim();
    let out_len = (len - kernel) / stride + 1;
    let mut y = Array3::<f64>::zeros((b, c, out_len));
    let mut argmax = Array3::<usize>::zeros((b, c, out_len));
    for n in 0..b {
        for ch in 0..c {
            let row = x.slice(s![n, ch, ..]);
            for l in 0..out_len {
                let start = l * stride;
                let mut best = start;
                for t in start + 1..start + kernel {
                    if row[t] > row[best] {
                        best = t;
                    }
                }
                y[[n, ch, l]] = row[best];
                argmax[[n, ch, l]] = best;
            }
        }
    }
    (y, PoolCache { argmax, in_len: len })
}

pub fn maxpool_backward(cache: &PoolCache, dy: ArrayView3<f64>) -> Array3<f64> {
    let (b, c, _) = dy.dim();
    let mut dx = Array3::<f64>::zeros((b, c, cache.in_len));
    ndarray::Zip::indexed(dy).and(&cache.argmax).for_each(|(n, ch, _), &g, &t| {
        dx[[n, ch, t]] += g;
    });
    dx
}

// ---------------------------------------------------------------------------
// LSTM

/// Single LSTM layer; gate blocks ordered input, forget, cell, output.
#[derive(Debug, Clone, PartialEq)]
pub struct Lstm {
    /// `(4 * hidden, input)`.
    pub w_ih: Array2<f64>,
    /// `(4 * hidden, hidden)`.
    pub w_hh: Array2<f64>,
    pub bias: Array1<f64>,
}

pub struct LstmCache {
    /// `(time * batch, input)`.
    x: Array2<f64>,
    /// Gate activations per step, `(batch, 4 * hidden)`.
    gates: Vec<Array2<f64>>,
    /// Cell states `c_0 .. c_T`, each `(batch, hidden)`.
    cells: Vec<Array2<f64>>,
    /// Hidden states `h_0 .. h_T`.
    hidden: Vec<Array2<f64>>,
    batch: usize,
}

impl Lstm {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        Lstm {
            w_ih: Array2::zeros((4 * hidden, input)),
            w_hh: Array2::zeros((4 * hidden, hidden)),
            bias: Array1::zeros(4 * hidden),
        }
    }

    pub fn init(input: usize, hidden: usize, rng: &mut Rng) -> Self {
        let mut l = Self::zeros(input, hidden);
        l.w_ih = Array2::from_shape_vec(l.w_ih.dim(), xavier(rng, input, 4 * hidden, l.w_ih.len())).expect("sized");
        l.w_hh = Array2::from_shape_vec(l.w_hh.dim(), xavier(rng, hidden, 4 * hidden, l.w_hh.len())).expect("sized");
        l.bias.slice_mut(s![hidden..2 * hidden]).fill(1.0);
        l
    }

    pub fn hidden_size(&self) -> usize {
        self.w_hh.ncols()
    }

    pub fn input_size(&self) -> usize {
        self.w_ih.ncols()
    }

    /// `x`: `(time * batch, input)` with row `t * batch + n`.
    /// Returns all hidden states in the same layout.
    pub fn forward(&self, x: Array2<f64>, batch: usize) -> (Array2<f64>, LstmCache) {
        let h = self.hidden_size();
        let steps = x.nrows() / batch;
        let mut proj = x.dot(&self.w_ih.t());
        proj += &self.bias;
        let mut out = Array2::<f64>::zeros((steps * batch, h));
        let mut gates = Vec::with_capacity(steps);
        let mut cells = vec![Array2::<f64>::zeros((batch, h))];
        let mut hidden = vec![Array2::<f64>::zeros((batch, h))];
        for t in 0..steps {
            let mut z = proj.slice(s![t * batch..(t + 1) * batch, ..]).to_owned();
            z += &hidden[t].dot(&self.w_hh.t());
            z.slice_mut(s![.., 0..2 * h]).mapv_inplace(sigmoid);
            z.slice_mut(s![.., 2 * h..3 * h]).mapv_inplace(f64::tanh);
            z.slice_mut(s![.., 3 * h..4 * h]).mapv_inplace(sigmoid);
            let (i, f, g, o) = (
                z.slice(s![.., 0..h]),
                z.slice(s![.., h..2 * h]),
                z.slice(s![.., 2 * h..3 * h]),
                z.slice(s![.., 3 * h..4 * h]),
            );
            let c = &f * &cells[t] + &i * &g;
            let ht = &o * &c.mapv(f64::tanh);
            out.slice_mut(s![t * batch..(t + 1) * batch, ..]).assign(&ht);
            cells.push(c);
            hidden.push(ht);
            gates.push(z);
        }
        (out, LstmCache { x, gates, cells, hidden, batch })
    }

    /// `dout` has the layout of the forward output. Returns `dx`.
    pub fn backward(&self, cache: &LstmCache, dout: ArrayView2<f64>, grad: &mut Lstm) -> Array2<f64> {
        let h = self.hidden_size();
        let b = cache.batch;
        let steps = cache.gates.len();
        let mut dz_all = Array2::<f64>::zeros((steps * b, 4 * h));
        let mut dh_next = Array2::<f64>::zeros((b, h));
        let mut dc_next = Array2::<f64>::zeros((b, h));
        for t in (0..steps).rev() {
            let z = &cache.gates[t];
            let (i, f, g, o) = (
                z.slice(s![.., 0..h]),
                z.slice(s![.., h..2 * h]),
                z.slice(s![.., 2 * h..3 * h]),
                z.slice(s![.., 3 * h..4 * h]),
            );
            let c = &cache.cells[t + 1];
            let c_prev = &cache.cells[t];
            let tc = c.mapv(f64::tanh);
            let dh = &dout.slice(s![t * b..(t + 1) * b, ..]) + &dh_next;
            let d_o = &dh * &tc;
            let dc = &dc_next + &(&dh * &o * &tc.mapv(|v| 1.0 - v * v));
            let di = &dc * &g;
            let dg = &dc * &i;
            let df = &dc * c_prev;
            dc_next = &dc * &f;

            let mut dz = dz_all.slice_mut(s![t * b..(t + 1) * b, ..]);
            dz.slice_mut(s![.., 0..h]).assign(&(&di * &i * &i.mapv(|v| 1.0 - v)));
            dz.slice_mut(s![.., h..2 * h]).assign(&(&df * &f * &f.mapv(|v| 1.0 - v)));
            dz.slice_mut(s![.., 2 * h..3 * h]).assign(&(&dg * &g.mapv(|v| 1.0 - v * v)));
            dz.slice_mut(s![.., 3 * h..4 * h]).assign(&(&d_o * &o * &o.mapv(|v| 1.0 - v)));

            let dz = dz_all.slice(s![t * b..(t + 1) * b, ..]);
            grad.w_hh += &dz.t().dot(&cache.hidden[t]);
            dh_next = dz.dot(&self.w_hh);
        }
        grad.w_ih += &dz_all.t().dot(&cache.x);
        grad.bias += &dz_all.sum_axis(Axis(0));
        dz_all.dot(&self.w_ih)
    }
}

// ---------------------------------------------------------------------------
// Dense

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    /// `(out, in)`.
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    pub fn zeros(input: usize, output: usize) -> Self {
        Dense { weight: Array2::zeros((output, input)), bias: Array1::zeros(output) }
    }

    pub fn init(input: usize, output: usize, rng: &mut Rng) -> Self {
        let mut d = Self::zeros(input, output);
        d.weight = Array2::from_shape_vec(d.weight.dim(), xavier(rng, input, output, d.weight.len())).expect("sized");
        d
    }

    /// `x`: `(batch, in)` -> `(batch, out)`.
    pub fn forward(&self, x: ArrayView2<f64>) -> Array2<f64> {
        x.dot(&self.weight.t()) + &self.bias
    }

    pub fn backward(&self, x: ArrayView2<f64>, dy: ArrayView2<f64>, grad: &mut Dense) -> Array2<f64> {
        grad.weight += &dy.t().dot(&x);
        grad.bias += &dy.sum_axis(Axis(0));
        dy.dot(&self.weight)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_for;
    use ndarray::Array;

    fn random3(rng: &mut Rng, dim: (usize, usize, usize)) -> Array3<f64> {
        Array::from_shape_fn(dim, |_| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn conv_matches_direct_sum() {
        let mut rng = rng_for(1, &[]);
        let spec = ConvSpec { in_channels: 2, out_channels: 3, kernel: 4, stride: 2, pad: 1 };
        let conv = Conv1d::init(spec, &mut rng);
        let x = random3(&mut rng, (2, 2, 11));
        let (y, _) = conv.forward(x.view());
        let out_len = (11 + 2 - 4) / 2 + 1;
        assert_eq!(y.dim(), (2, 3, out_len));
        for n in 0..2 {
            for o in 0..3 {
                for l in 0..out_len {
                    let mut acc = conv.bias[o];
                    for c in 0..2 {
                        for k in 0..4 {
                            let src = (l * 2 + k) as isize - 1;
                            if (0..11).contains(&src) {
                                acc += conv.weight[[o, c, k]] * x[[n, c, src as usize]];
                            }
                        }
                    }
                    assert!((y[[n, o, l]] - acc).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn maxpool_routes_to_argmax() {
        let x = Array3::from_shape_vec((1, 1, 6), vec![1.0, 5.0, 2.0, 0.0, -1.0, 3.0]).unwrap();
        let (y, cache) = maxpool_forward(x.view(), 3, 3);
        assert_eq!(y.into_raw_vec_and_offset().0, vec![5.0, 3.0]);
        let dy = Array3::from_shape_vec((1, 1, 2), vec![0.7, -2.0]).unwrap();
        let dx = maxpool_backward(&cache, dy.view());
        assert_eq!(dx.into_raw_vec_and_offset().0, vec![0.0, 0.7, 0.0, 0.0, 0.0, -2.0]);
    }

    #[test]
    fn zero_lstm_outputs_zero() {
        let l = Lstm::zeros(3, 4);
        let mut rng = rng_for(2, &[]);
        let x = Array2::from_shape_fn((5 * 2, 3), |_| rng.random_range(-3.0..3.0));
        let (out, _) = l.forward(x, 2);
        assert!(out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn forget_bias_starts_at_one() {
        let l = Lstm::init(3, 4, &mut rng_for(3, &[]));
        assert_eq!(l.bias.slice(s![4..8]).to_vec(), vec![1.0; 4]);
        assert!(l.bias.slice(s![0..4]).iter().all(|&v| v == 0.0));
    }
}
