use std::fmt;

use rand::Rng;

use super::tensor::Tensor;
use crate::error::{Error, Result};

/// A trainable array and its accumulated gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub value: Vec<f64>,
    pub grad: Vec<f64>,
}

impl Param {
    pub fn new(value: Vec<f64>) -> Self {
        let grad = vec![0.0; value.len()];
        Param { value, grad }
    }

    /// Uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
    pub fn fan_in_uniform(len: usize, fan_in: usize, rng: &mut impl Rng) -> Self {
        let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
        Param::new((0..len).map(|_| rng.random_range(-bound..=bound)).collect())
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }

    pub fn zero_grad(&mut self) {
        self.grad.iter_mut().for_each(|g| *g = 0.0);
    }
}

/// Forward/backward contract shared by all layers. `backward` accumulates
/// parameter gradients and returns the input gradient when asked for it.
pub trait Layer: Send + Sync + fmt::Debug {
    fn kind(&self) -> &'static str;

    fn output_dims(&self, input: [usize; 4]) -> Result<[usize; 4]>;

    fn forward(&self, input: &Tensor) -> Result<Tensor>;

    fn backward(
        &mut self,
        input: &Tensor,
        grad_out: &Tensor,
        need_input_grad: bool,
    ) -> Result<Option<Tensor>>;

    fn params(&self) -> Vec<&Param> {
        Vec::new()
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        Vec::new()
    }

    /// Kernel and stride, for layers that have them.
    fn geometry(&self) -> Option<([usize; 2], [usize; 2])> {
        None
    }

    /// Points where the map is not differentiable; finite differences skip
    /// input elements for which this returns true.
    fn is_kink(&self, _input: &Tensor, _index: usize) -> bool {
        false
    }

    fn as_gate(&self) -> Option<&SeGate> {
        None
    }
}

fn expect_grad_dims(layer: &dyn Layer, input: &Tensor, grad_out: &Tensor) -> Result<()> {
    let want = layer.output_dims(input.dims())?;
    if grad_out.dims() != want {
        return Err(Error::Shape(format!(
            "{} gradient has dims {:?}, expected {want:?}",
            layer.kind(),
            grad_out.dims()
        )));
    }
    Ok(())
}

/// Valid (unpadded) 2-D cross-correlation over the time and spatial axes.
/// Weights are laid out `[kt][ks][c_in][c_out]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d {
    pub kernel: [usize; 2],
    pub stride: [usize; 2],
    pub c_in: usize,
    pub c_out: usize,
    pub weight: Param,
    pub bias: Param,
}

impl Conv2d {
    pub fn new(
        kernel: [usize; 2],
        stride: [usize; 2],
        c_in: usize,
        c_out: usize,
        rng: &mut impl Rng,
    ) -> Self {
        let fan_in = kernel[0] * kernel[1] * c_in;
        Conv2d {
            kernel,
            stride,
            c_in,
            c_out,
            weight: Param::fan_in_uniform(fan_in * c_out, fan_in, rng),
            bias: Param::fan_in_uniform(c_out, fan_in, rng),
        }
    }

    pub fn param_count(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    fn row_len(&self) -> usize {
        self.kernel[1] * self.c_in
    }

    /// Weights regrouped as `[c_out][kt][ks * c_in]` so each filter row is contiguous.
    fn transposed_weight(&self) -> Vec<f64> {
        let (kt, row_len, c_out) = (self.kernel[0], self.row_len(), self.c_out);
        let mut wt = vec![0.0; self.weight.len()];
        for ft in 0..kt {
            for k in 0..row_len {
                for co in 0..c_out {
                    wt[(co * kt + ft) * row_len + k] = self.weight.value[(ft * row_len + k) * c_out + co];
                }
            }
        }
        wt
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

impl Layer for Conv2d {
    fn kind(&self) -> &'static str {
        "conv2d"
    }

    fn output_dims(&self, [n, h, w, c]: [usize; 4]) -> Result<[usize; 4]> {
        let [kt, ks] = self.kernel;
        let [st, ss] = self.stride;
        if c != self.c_in {
            return Err(Error::Shape(format!(
                "conv2d expects {} input channels, got {c}",
                self.c_in
            )));
        }
        if st == 0 || ss == 0 || kt == 0 || ks == 0 {
            return Err(Error::Shape("conv2d kernel and stride must be positive".into()));
        }
        if kt > h || ks > w {
            return Err(Error::Shape(format!(
                "conv2d kernel {kt}x{ks} larger than input {h}x{w}"
            )));
        }
        Ok([n, (h - kt) / st + 1, (w - ks) / ss + 1, self.c_out])
    }

    fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let out_dims = self.output_dims(x.dims())?;
        let [n_b, h_out, w_out, c_out] = out_dims;
        let [kt, _] = self.kernel;
        let [st, ss] = self.stride;
        let row_len = self.row_len();
        let wt = self.transposed_weight();
        let mut out = Tensor::zeros(out_dims);
        let xd = x.data();
        let od = out.data_mut();
        let mut o_off = 0;
        for n in 0..n_b {
            for oh in 0..h_out {
                for ow in 0..w_out {
                    for (co, slot) in od[o_off..o_off + c_out].iter_mut().enumerate() {
                        let mut acc = self.bias.value[co];
                        for ft in 0..kt {
                            let start = x.offset(n, oh * st + ft, ow * ss, 0);
                            acc += dot(&xd[start..start + row_len], &wt[(co * kt + ft) * row_len..][..row_len]);
                        }
                        *slot = acc;
                    }
                    o_off += c_out;
                }
            }
        }
        Ok(out)
    }

    fn backward(
        &mut self,
        x: &Tensor,
        grad_out: &Tensor,
        need_input_grad: bool,
    ) -> Result<Option<Tensor>> {
        expect_grad_dims(self, x, grad_out)?;
        let [n_b, h_out, w_out, c_out] = grad_out.dims();
        let [kt, _] = self.kernel;
        let [st, ss] = self.stride;
        let row_len = self.row_len();
        let wt = self.transposed_weight();
        let mut gwt = vec![0.0; wt.len()];
        let mut grad_in = need_input_grad.then(|| Tensor::zeros(x.dims()));
        let xd = x.data();
        let gd = grad_out.data();
        let gb = &mut self.bias.grad;
        let mut g_off = 0;
        for n in 0..n_b {
            for oh in 0..h_out {
                for ow in 0..w_out {
                    let go = &gd[g_off..g_off + c_out];
                    g_off += c_out;
                    for (b, &g) in gb.iter_mut().zip(go) {
                        *b += g;
                    }
                    for ft in 0..kt {
                        let start = x.offset(n, oh * st + ft, ow * ss, 0);
                        let patch = &xd[start..start + row_len];
                        for (co, &g) in go.iter().enumerate() {
                            if g == 0.0 {
                                continue;
                            }
                            let at = (co * kt + ft) * row_len;
                            axpy(g, patch, &mut gwt[at..at + row_len]);
                            if let Some(gi) = grad_in.as_mut() {
                                axpy(g, &wt[at..at + row_len], &mut gi.data_mut()[start..start + row_len]);
                            }
                        }
                    }
                }
            }
        }
        // back to the [kt][ks][c_in][c_out] layout
        let gw = &mut self.weight.grad;
        for ft in 0..kt {
            for k in 0..row_len {
                for co in 0..c_out {
                    gw[(ft * row_len + k) * c_out + co] += gwt[(co * kt + ft) * row_len + k];
                }
            }
        }
        Ok(grad_in)
    }

    fn params(&self) -> Vec<&Param> {
        vec![&self.weight, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.weight, &mut self.bias]
    }

    fn geometry(&self) -> Option<([usize; 2], [usize; 2])> {
        Some((self.kernel, self.stride))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Relu;

/// Inputs closer than this to zero are treated as kinks by gradient checks.
pub const RELU_KINK: f64 = 1e-3;

impl Layer for Relu {
    fn kind(&self) -> &'static str {
        "relu"
    }

    fn output_dims(&self, input: [usize; 4]) -> Result<[usize; 4]> {
        Ok(input)
    }

    fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let data = x.data().iter().map(|&v| v.max(0.0)).collect();
        Tensor::from_vec(x.dims(), data)
    }

    fn backward(&mut self, x: &Tensor, grad_out: &Tensor, need: bool) -> Result<Option<Tensor>> {
        expect_grad_dims(self, x, grad_out)?;
        if !need {
            return Ok(None);
        }
        let data = x
            .data()
            .iter()
            .zip(grad_out.data())
            .map(|(&v, &g)| if v > 0.0 { g } else { 0.0 })
            .collect();
        Tensor::from_vec(x.dims(), data).map(Some)
    }

    fn is_kink(&self, input: &Tensor, index: usize) -> bool {
        input.data()[index].abs() < RELU_KINK
    }
}

/// Max pooling whose half-open windows `[floor(k*in/out), floor((k+1)*in/out))`
/// tile the time and spatial axes. Ties go to the lowest flat index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveMaxPool {
    pub out: [usize; 2],
}

impl AdaptiveMaxPool {
    pub fn new(out: [usize; 2]) -> Self {
        AdaptiveMaxPool { out }
    }

    fn window(k: usize, size_in: usize, size_out: usize) -> (usize, usize) {
        (k * size_in / size_out, (k + 1) * size_in / size_out)
    }

    /// Flat input offset of the winning cell for every output element.
    fn argmax(&self, x: &Tensor) -> Result<Vec<usize>> {
        let [n_b, h_o, w_o, c] = self.output_dims(x.dims())?;
        let [_, h, w, _] = x.dims();
        let xd = x.data();
        let mut idx = Vec::with_capacity(n_b * h_o * w_o * c);
        for n in 0..n_b {
            for oh in 0..h_o {
                let (h0, h1) = Self::window(oh, h, h_o);
                for ow in 0..w_o {
                    let (w0, w1) = Self::window(ow, w, w_o);
                    for ch in 0..c {
                        let mut best = x.offset(n, h0, w0, ch);
                        for hh in h0..h1 {
                            for ww in w0..w1 {
                                let o = x.offset(n, hh, ww, ch);
                                if xd[o] > xd[best] {
                                    best = o;
                                }
                            }
                        }
                        idx.push(best);
                    }
                }
            }
        }
        Ok(idx)
    }
}

impl Layer for AdaptiveMaxPool {
    fn kind(&self) -> &'static str {
        "adaptive_max_pool"
    }

    fn output_dims(&self, [n, h, w, c]: [usize; 4]) -> Result<[usize; 4]> {
        let [ho, wo] = self.out;
        if ho == 0 || wo == 0 || ho > h || wo > w {
            return Err(Error::Shape(format!(
                "adaptive pool output {ho}x{wo} invalid for input {h}x{w}"
            )));
        }
        Ok([n, ho, wo, c])
    }

    fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let dims = self.output_dims(x.dims())?;
        let data = self.argmax(x)?.into_iter().map(|o| x.data()[o]).collect();
        Tensor::from_vec(dims, data)
    }

    fn backward(&mut self, x: &Tensor, grad_out: &Tensor, need: bool) -> Result<Option<Tensor>> {
        expect_grad_dims(self, x, grad_out)?;
        if !need {
            return Ok(None);
        }
        let mut gi = Tensor::zeros(x.dims());
        for (o, &g) in self.argmax(x)?.into_iter().zip(grad_out.data()) {
            gi.data_mut()[o] += g;
        }
        Ok(Some(gi))
    }

    fn geometry(&self) -> Option<([usize; 2], [usize; 2])> {
        Some((self.out, self.out))
    }
}

/// Fully connected layer over each flattened batch item; output `(N, 1, 1, out)`.
/// Weight is row-major `out x in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub in_features: usize,
    pub out_features: usize,
    pub weight: Param,
    pub bias: Param,
}

impl Dense {
    pub fn new(in_features: usize, out_features: usize, rng: &mut impl Rng) -> Self {
        Dense {
            in_features,
            out_features,
            weight: Param::fan_in_uniform(in_features * out_features, in_features, rng),
            bias: Param::fan_in_uniform(out_features, in_features, rng),
        }
    }
}

impl Layer for Dense {
    fn kind(&self) -> &'static str {
        "dense"
    }

    fn output_dims(&self, [n, h, w, c]: [usize; 4]) -> Result<[usize; 4]> {
        if h * w * c != self.in_features {
            return Err(Error::Shape(format!(
                "dense expects {} features, got {}",
                self.in_features,
                h * w * c
            )));
        }
        Ok([n, 1, 1, self.out_features])
    }

    fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let dims = self.output_dims(x.dims())?;
        let mut out = Vec::with_capacity(dims[0] * self.out_features);
        for n in 0..x.batch() {
            let item = x.item(n);
            for (row, b) in self
                .weight
                .value
                .chunks_exact(self.in_features)
                .zip(&self.bias.value)
            {
                out.push(b + row.iter().zip(item).map(|(w, v)| w * v).sum::<f64>());
            }
        }
        Tensor::from_vec(dims, out)
    }

    fn backward(&mut self, x: &Tensor, grad_out: &Tensor, need: bool) -> Result<Option<Tensor>> {
        expect_grad_dims(self, x, grad_out)?;
        let mut gi = need.then(|| Tensor::zeros(x.dims()));
        let inf = self.in_features;
        for n in 0..x.batch() {
            let item = x.item(n);
            let go = grad_out.item(n);
            for (o, &g) in go.iter().enumerate() {
                self.bias.grad[o] += g;
                if g == 0.0 {
                    continue;
                }
                for (a, v) in self.weight.grad[o * inf..(o + 1) * inf].iter_mut().zip(item) {
                    *a += g * v;
                }
                if let Some(gi) = gi.as_mut() {
                    let row = &self.weight.value[o * inf..(o + 1) * inf];
                    let slot = &mut gi.data_mut()[n * inf..(n + 1) * inf];
                    for (s, w) in slot.iter_mut().zip(row) {
                        *s += g * w;
                    }
                }
            }
        }
        Ok(gi)
    }

    fn params(&self) -> Vec<&Param> {
        vec![&self.weight, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.weight, &mut self.bias]
    }
}

/// Squeeze-and-excitation gate over the spatial axis: one sigmoid gate per
/// spatial column, computed from the column means.
///
/// `s = mean_{h,c} x`, `g = sigmoid(W2 relu(W1 s + b1) + b2)`, `y = x * g`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeGate {
    pub width: usize,
    pub hidden: usize,
    pub squeeze: Param,
    pub squeeze_bias: Param,
    pub excite: Param,
    pub excite_bias: Param,
}

pub const SE_REDUCTION: usize = 4;

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

struct GateTrace {
    mean: Vec<f64>,
    pre: Vec<f64>,
    gate: Vec<f64>,
}

impl SeGate {
    pub fn new(width: usize, rng: &mut impl Rng) -> Self {
        let hidden = (width / SE_REDUCTION).max(1);
        SeGate {
            width,
            hidden,
            squeeze: Param::fan_in_uniform(hidden * width, width, rng),
            squeeze_bias: Param::fan_in_uniform(hidden, width, rng),
            excite: Param::fan_in_uniform(width * hidden, hidden, rng),
            excite_bias: Param::fan_in_uniform(width, hidden, rng),
        }
    }

    pub fn param_count(&self) -> usize {
        self.squeeze.len() + self.squeeze_bias.len() + self.excite.len() + self.excite_bias.len()
    }

    fn trace(&self, x: &Tensor) -> Result<GateTrace> {
        let [n_b, h, w, c] = x.dims();
        if w != self.width {
            return Err(Error::Shape(format!(
                "gate over {} columns applied to width {w}",
                self.width
            )));
        }
        let scale = 1.0 / (h * c) as f64;
        let mut mean = vec![0.0; n_b * w];
        for n in 0..n_b {
            for hh in 0..h {
                for ww in 0..w {
                    let o = x.offset(n, hh, ww, 0);
                    mean[n * w + ww] += x.data()[o..o + c].iter().sum::<f64>();
                }
            }
        }
        mean.iter_mut().for_each(|m| *m *= scale);
        let mut pre = vec![0.0; n_b * self.hidden];
        let mut gate = vec![0.0; n_b * w];
        for n in 0..n_b {
            let s = &mean[n * w..(n + 1) * w];
            for k in 0..self.hidden {
                let row = &self.squeeze.value[k * w..(k + 1) * w];
                pre[n * self.hidden + k] =
                    self.squeeze_bias.value[k] + row.iter().zip(s).map(|(a, b)| a * b).sum::<f64>();
            }
            let r: Vec<f64> = pre[n * self.hidden..(n + 1) * self.hidden]
                .iter()
                .map(|v| v.max(0.0))
                .collect();
            for ww in 0..w {
                let row = &self.excite.value[ww * self.hidden..(ww + 1) * self.hidden];
                let z = self.excite_bias.value[ww] + row.iter().zip(&r).map(|(a, b)| a * b).sum::<f64>();
                gate[n * w + ww] = sigmoid(z);
            }
        }
        Ok(GateTrace { mean, pre, gate })
    }

    /// Gate activations, `N x width`, in `[0, 1]`.
    pub fn gate_values(&self, x: &Tensor) -> Result<Vec<f64>> {
        Ok(self.trace(x)?.gate)
    }
}

impl Layer for SeGate {
    fn kind(&self) -> &'static str {
        "se_gate"
    }

    fn output_dims(&self, input: [usize; 4]) -> Result<[usize; 4]> {
        if input[2] != self.width {
            return Err(Error::Shape(format!(
                "gate over {} columns applied to width {}",
                self.width, input[2]
            )));
        }
        Ok(input)
    }

    fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let gate = self.trace(x)?.gate;
        let [_, h, w, c] = x.dims();
        let mut out = x.clone();
        for (cell, v) in out.data_mut().chunks_exact_mut(c).enumerate() {
            let n = cell / (h * w);
            let g = gate[n * w + cell % w];
            v.iter_mut().for_each(|e| *e *= g);
        }
        Ok(out)
    }

    fn backward(&mut self, x: &Tensor, grad_out: &Tensor, need: bool) -> Result<Option<Tensor>> {
        expect_grad_dims(self, x, grad_out)?;
        let GateTrace { mean, pre, gate } = self.trace(x)?;
        let [n_b, h, w, c] = x.dims();
        let hid = self.hidden;

        // d loss / d gate
        let mut g_gate = vec![0.0; n_b * w];
        for (cell, (xv, gv)) in x
            .data()
            .chunks_exact(c)
            .zip(grad_out.data().chunks_exact(c))
            .enumerate()
        {
            let n = cell / (h * w);
            g_gate[n * w + cell % w] += xv.iter().zip(gv).map(|(a, b)| a * b).sum::<f64>();
        }

        let mut g_mean = vec![0.0; n_b * w];
        for n in 0..n_b {
            let gz: Vec<f64> = (0..w)
                .map(|ww| {
                    let g = gate[n * w + ww];
                    g_gate[n * w + ww] * g * (1.0 - g)
                })
                .collect();
            let p = &pre[n * hid..(n + 1) * hid];
            let mut g_hidden = vec![0.0; hid];
            for ww in 0..w {
                self.excite_bias.grad[ww] += gz[ww];
                for k in 0..hid {
                    self.excite.grad[ww * hid + k] += gz[ww] * p[k].max(0.0);
                    g_hidden[k] += self.excite.value[ww * hid + k] * gz[ww];
                }
            }
            let s = &mean[n * w..(n + 1) * w];
            for k in 0..hid {
                if p[k] <= 0.0 {
                    continue;
                }
                let g = g_hidden[k];
                self.squeeze_bias.grad[k] += g;
                for ww in 0..w {
                    self.squeeze.grad[k * w + ww] += g * s[ww];
                    g_mean[n * w + ww] += self.squeeze.value[k * w + ww] * g;
                }
            }
        }

        if !need {
            return Ok(None);
        }
        let scale = 1.0 / (h * c) as f64;
        let mut gi = grad_out.clone();
        for (cell, v) in gi.data_mut().chunks_exact_mut(c).enumerate() {
            let n = cell / (h * w);
            let k = n * w + cell % w;
            let (g, gm) = (gate[k], g_mean[k] * scale);
            v.iter_mut().for_each(|e| *e = *e * g + gm);
        }
        Ok(Some(gi))
    }

    fn params(&self) -> Vec<&Param> {
        vec![&self.squeeze, &self.squeeze_bias, &self.excite, &self.excite_bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![
            &mut self.squeeze,
            &mut self.squeeze_bias,
            &mut self.excite,
            &mut self.excite_bias,
        ]
    }

    fn as_gate(&self) -> Option<&SeGate> {
        Some(self)
    }
}
