//! Small dense networks with hand-written reverse-mode gradients.
//!
//! Weights are stored row-major as `out × in`. Parameters flatten in layer
//! order as `[weights, bias]`.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DenseError {
    #[error("layer dimensions must be positive (got {n_in} -> {n_out})")]
    ZeroDimension { n_in: usize, n_out: usize },
    #[error("{what}: expected length {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("orthogonal gain must be positive, got {0}")]
    InvalidGain(f64),
    #[error("network needs at least one layer")]
    NoLayers,
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
}

pub type Result<T> = std::result::Result<T, DenseError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    Identity,
    Tanh,
}

impl Activation {
    #[inline]
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative expressed through the activation's output.
    #[inline]
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Tanh => 1.0 - y * y,
        }
    }
}

/// Default value for [`InitStrategy::Constant`].
pub const DEFAULT_CONSTANT_INIT: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InitStrategy {
    /// Uniform on `±√(6/(in+out))`.
    Xavier,
    /// (Semi-)orthogonal matrix scaled by `gain`.
    Orthogonal { gain: f64 },
    /// Every weight equal to `value`.
    Constant { value: f64 },
}

impl InitStrategy {
    pub fn validate(&self) -> Result<()> {
        match *self {
            InitStrategy::Orthogonal { gain } if !(gain > 0.0 && gain.is_finite()) => Err(DenseError::InvalidGain(gain)),
            InitStrategy::Constant { value } if !value.is_finite() => Err(DenseError::NonFinite("constant init")),
            _ => Ok(()),
        }
    }

    pub fn weights<R: Rng + ?Sized>(&self, n_in: usize, n_out: usize, rng: &mut R) -> Result<Vec<f64>> {
        self.validate()?;
        if n_in == 0 || n_out == 0 {
            return Err(DenseError::ZeroDimension { n_in, n_out });
        }
        Ok(match *self {
            InitStrategy::Xavier => {
                let a = (6.0 / (n_in + n_out) as f64).sqrt();
                (0..n_in * n_out).map(|_| rng.random_range(-a..=a)).collect()
            }
            InitStrategy::Orthogonal { gain } => orthogonal(n_in, n_out, gain, rng),
            InitStrategy::Constant { value } => vec![value; n_in * n_out],
        })
    }
}

/// Row-major `n_out × n_in` matrix with orthonormal rows (wide) or columns (tall), times `gain`.
fn orthogonal<R: Rng + ?Sized>(n_in: usize, n_out: usize, gain: f64, rng: &mut R) -> Vec<f64> {
    let rows = n_in.max(n_out);
    let cols = n_in.min(n_out);
    // Column-major gaussian: cols vectors of length rows.
    let mut q: Vec<Vec<f64>> = (0..cols)
        .map(|_| (0..rows).map(|_| StandardNormal.sample(rng)).collect())
        .collect();
    // Modified Gram-Schmidt, two passes for numerical orthogonality.
    for j in 0..cols {
        for _ in 0..2 {
            for k in 0..j {
                let dot: f64 = q[j].iter().zip(&q[k]).map(|(a, b)| a * b).sum();
                let (head, tail) = q.split_at_mut(j);
                for (x, y) in tail[0].iter_mut().zip(&head[k]) {
                    *x -= dot * y;
                }
            }
        }
        let norm = q[j].iter().map(|x| x * x).sum::<f64>().sqrt();
        for x in &mut q[j] {
            *x /= norm;
        }
    }
    let mut w = vec![0.0; n_out * n_in];
    for o in 0..n_out {
        for i in 0..n_in {
            // tall: W[o][i] = Q[o][i]; wide: W = Qᵀ so W[o][i] = Q[i][o]
            w[o * n_in + i] = gain * if n_out >= n_in { q[i][o] } else { q[o][i] };
        }
    }
    w
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearLayer {
    n_in: usize,
    n_out: usize,
    weights: Vec<f64>,
    bias: Option<Vec<f64>>,
    activation: Activation,
}

impl LinearLayer {
    pub fn init<R: Rng + ?Sized>(
        n_in: usize,
        n_out: usize,
        with_bias: bool,
        activation: Activation,
        strategy: InitStrategy,
        rng: &mut R,
    ) -> Result<Self> {
        let weights = strategy.weights(n_in, n_out, rng)?;
        Ok(Self {
            n_in,
            n_out,
            weights,
            bias: with_bias.then(|| vec![0.0; n_out]),
            activation,
        })
    }

    pub fn from_parts(
        n_in: usize,
        n_out: usize,
        weights: Vec<f64>,
        bias: Option<Vec<f64>>,
        activation: Activation,
    ) -> Result<Self> {
        if n_in == 0 || n_out == 0 {
            return Err(DenseError::ZeroDimension { n_in, n_out });
        }
        if weights.len() != n_in * n_out {
            return Err(DenseError::DimensionMismatch {
                what: "weights",
                expected: n_in * n_out,
                got: weights.len(),
            });
        }
        if let Some(b) = &bias {
            if b.len() != n_out {
                return Err(DenseError::DimensionMismatch {
                    what: "bias",
                    expected: n_out,
                    got: b.len(),
                });
            }
        }
        if weights.iter().chain(bias.iter().flatten()).any(|v| !v.is_finite()) {
            return Err(DenseError::NonFinite("layer parameters"));
        }
        Ok(Self {
            n_in,
            n_out,
            weights,
            bias,
            activation,
        })
    }

    pub fn n_in(&self) -> usize {
        self.n_in
    }

    pub fn n_out(&self) -> usize {
        self.n_out
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> Option<&[f64]> {
        self.bias.as_deref()
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn num_params(&self) -> usize {
        self.weights.len() + self.bias.as_ref().map_or(0, Vec::len)
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n_in {
            return Err(DenseError::DimensionMismatch {
                what: "layer input",
                expected: self.n_in,
                got: x.len(),
            });
        }
        Ok(())
    }

    /// `activation(W·x + b)` for one input row.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        Ok(self.forward_unchecked(x))
    }

    pub fn forward_batch(&self, xs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        xs.iter().map(|x| self.forward(x)).collect()
    }

    pub(crate) fn forward_unchecked(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .chunks_exact(self.n_in)
            .enumerate()
            .map(|(o, row)| {
                let mut acc: f64 = row.iter().zip(x).map(|(w, v)| w * v).sum();
                if let Some(b) = &self.bias {
                    acc += b[o];
                }
                self.activation.apply(acc)
            })
            .collect()
    }

    /// Accumulates parameter gradients into `grad` (this layer's flat slice)
    /// and returns `∂L/∂x`. `x` and `y` are the input and output of the
    /// forward pass, `d_y` the upstream gradient.
    pub fn backward(&self, x: &[f64], y: &[f64], d_y: &[f64], grad: &mut [f64]) -> Vec<f64> {
        let mut d_x = vec![0.0; self.n_in];
        let (g_w, g_b) = grad.split_at_mut(self.weights.len());
        for o in 0..self.n_out {
            let d_pre = d_y[o] * self.activation.derivative_from_output(y[o]);
            if d_pre == 0.0 {
                continue;
            }
            let row = &self.weights[o * self.n_in..(o + 1) * self.n_in];
            let g_row = &mut g_w[o * self.n_in..(o + 1) * self.n_in];
            for i in 0..self.n_in {
                g_row[i] += d_pre * x[i];
                d_x[i] += d_pre * row[i];
            }
            if self.bias.is_some() {
                g_b[o] += d_pre;
            }
        }
        d_x
    }

    pub fn write_params(&self, out: &mut Vec<f64>) {
        out.extend_from_slice(&self.weights);
        if let Some(b) = &self.bias {
            out.extend_from_slice(b);
        }
    }

    /// Reads this layer's parameters from the front of `src`, returning how many were consumed.
    pub fn read_params(&mut self, src: &[f64]) -> Result<usize> {
        let n = self.num_params();
        if src.len() < n {
            return Err(DenseError::DimensionMismatch {
                what: "flat parameters",
                expected: n,
                got: src.len(),
            });
        }
        let w = self.weights.len();
        self.weights.copy_from_slice(&src[..w]);
        if let Some(b) = &mut self.bias {
            b.copy_from_slice(&src[w..n]);
        }
        Ok(n)
    }
}

/// Stack of [`LinearLayer`]s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    layers: Vec<LinearLayer>,
}

/// Per-layer outputs of one forward pass (element 0 is the input).
#[derive(Debug, Clone, Default)]
pub struct MlpCache {
    pub activations: Vec<Vec<f64>>,
}

impl Mlp {
    pub fn from_layers(layers: Vec<LinearLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(DenseError::NoLayers);
        }
        for pair in layers.windows(2) {
            if pair[0].n_out != pair[1].n_in {
                return Err(DenseError::DimensionMismatch {
                    what: "consecutive layer widths",
                    expected: pair[0].n_out,
                    got: pair[1].n_in,
                });
            }
        }
        Ok(Self { layers })
    }

    /// Builds layers `dims[i] → dims[i+1]` with the given activations and inits.
    pub fn new<R: Rng + ?Sized>(
        dims: &[usize],
        activations: &[Activation],
        inits: &[InitStrategy],
        with_bias: bool,
        rng: &mut R,
    ) -> Result<Self> {
        if dims.len() < 2 {
            return Err(DenseError::NoLayers);
        }
        let n = dims.len() - 1;
        if activations.len() != n || inits.len() != n {
            return Err(DenseError::DimensionMismatch {
                what: "activations/inits per layer",
                expected: n,
                got: activations.len().min(inits.len()),
            });
        }
        let layers = (0..n)
            .map(|i| LinearLayer::init(dims[i], dims[i + 1], with_bias, activations[i], inits[i], rng))
            .collect::<Result<Vec<_>>>()?;
        Self::from_layers(layers)
    }

    /// Tanh MLP with biases, orthogonal init (`√2` hidden, `output_gain` last layer).
    pub fn tanh_mlp<R: Rng + ?Sized>(
        n_in: usize,
        hidden: &[usize],
        n_out: usize,
        output_gain: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let mut dims = vec![n_in];
        dims.extend_from_slice(hidden);
        dims.push(n_out);
        let n = dims.len() - 1;
        let mut acts = vec![Activation::Tanh; n];
        acts[n - 1] = Activation::Identity;
        let mut inits = vec![InitStrategy::Orthogonal { gain: 2f64.sqrt() }; n];
        inits[n - 1] = InitStrategy::Orthogonal { gain: output_gain };
        Self::new(&dims, &acts, &inits, true, rng)
    }

    pub fn layers(&self) -> &[LinearLayer] {
        &self.layers
    }

    pub fn n_in(&self) -> usize {
        self.layers[0].n_in
    }

    pub fn n_out(&self) -> usize {
        self.layers[self.layers.len() - 1].n_out
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(LinearLayer::num_params).sum()
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.layers[0].check_input(x)?;
        let mut h = x.to_vec();
        for layer in &self.layers {
            h = layer.forward_unchecked(&h);
        }
        Ok(h)
    }

    pub fn forward_batch(&self, xs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        xs.iter().map(|x| self.forward(x)).collect()
    }

    pub fn forward_cached(&self, x: &[f64]) -> Result<(Vec<f64>, MlpCache)> {
        self.layers[0].check_input(x)?;
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_vec());
        for layer in &self.layers {
            let next = layer.forward_unchecked(acts.last().expect("non-empty"));
            acts.push(next);
        }
        let out = acts.last().expect("non-empty").clone();
        Ok((out, MlpCache { activations: acts }))
    }

    /// Accumulates into `grad` (length [`Mlp::num_params`]) and returns `∂L/∂x`.
    pub fn backward(&self, cache: &MlpCache, d_out: &[f64], grad: &mut [f64]) -> Result<Vec<f64>> {
        if cache.activations.len() != self.layers.len() + 1 {
            return Err(DenseError::DimensionMismatch {
                what: "cached activations",
                expected: self.layers.len() + 1,
                got: cache.activations.len(),
            });
        }
        if d_out.len() != self.n_out() {
            return Err(DenseError::DimensionMismatch {
                what: "upstream gradient",
                expected: self.n_out(),
                got: d_out.len(),
            });
        }
        if grad.len() != self.num_params() {
            return Err(DenseError::DimensionMismatch {
                what: "gradient buffer",
                expected: self.num_params(),
                got: grad.len(),
            });
        }
        let mut offsets = Vec::with_capacity(self.layers.len());
        let mut off = 0;
        for l in &self.layers {
            offsets.push(off);
            off += l.num_params();
        }
        let mut d = d_out.to_vec();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let slice = &mut grad[offsets[i]..offsets[i] + layer.num_params()];
            d = layer.backward(&cache.activations[i], &cache.activations[i + 1], &d, slice);
        }
        Ok(d)
    }

    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for l in &self.layers {
            l.write_params(&mut out);
        }
        out
    }

    pub fn set_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.num_params() {
            return Err(DenseError::DimensionMismatch {
                what: "flat parameters",
                expected: self.num_params(),
                got: flat.len(),
            });
        }
        let mut pos = 0;
        for l in &mut self.layers {
            pos += l.read_params(&flat[pos..])?;
        }
        Ok(())
    }

    /// `("l{i}.weight", …)` and `("l{i}.bias", …)` arrays in flat order.
    pub fn named_params(&self) -> Vec<(String, Vec<f64>)> {
        let mut out = Vec::new();
        for (i, l) in self.layers.iter().enumerate() {
            out.push((format!("l{i}.weight"), l.weights.clone()));
            if let Some(b) = &l.bias {
                out.push((format!("l{i}.bias"), b.clone()));
            }
        }
        out
    }
}
