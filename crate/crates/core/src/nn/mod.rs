//! Small fully connected networks with hand-written backpropagation.
//!
//! Batches are matrices with one sample per row. `backward` returns the
//! gradient of `sum(grad_output * output)`, so a mean-reduced loss should
//! pass `dL/doutput` already divided by the batch size.

mod checkpoint;
mod rmsprop;

pub use rmsprop::{Rmsprop, StepOutcome, RMSPROP_EPSILON, RMSPROP_RHO};

use ndarray::{Array1, Array2, Axis};
use rand::Rng;

use crate::error::{Error, Result};

/// Negative slope of [`Activation::LeakyRelu`].
pub const LEAKY_SLOPE: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Relu,
    Tanh,
    LeakyRelu,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Identity => z,
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
            Activation::LeakyRelu => {
                if z > 0.0 {
                    z
                } else {
                    LEAKY_SLOPE * z
                }
            }
        }
    }

    /// Derivative expressed through the pre-activation `z`.
    #[inline]
    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
            Activation::LeakyRelu => {
                if z > 0.0 {
                    1.0
                } else {
                    LEAKY_SLOPE
                }
            }
        }
    }

    fn tag(self) -> u8 {
        match self {
            Activation::Identity => 0,
            Activation::Relu => 1,
            Activation::Tanh => 2,
            Activation::LeakyRelu => 3,
        }
    }

    fn from_tag(tag: u8) -> Option<Self> {
        Some(match tag {
            0 => Activation::Identity,
            1 => Activation::Relu,
            2 => Activation::Tanh,
            3 => Activation::LeakyRelu,
            _ => return None,
        })
    }
}

/// Affine map followed by an elementwise activation. `weights` is `out x in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
}

impl Dense {
    /// He-uniform for rectifiers, Glorot-uniform otherwise; zero bias.
    pub fn init(inputs: usize, outputs: usize, activation: Activation, rng: &mut impl Rng) -> Self {
        let limit = match activation {
            Activation::Relu | Activation::LeakyRelu => (6.0 / inputs as f64).sqrt(),
            Activation::Tanh | Activation::Identity => (6.0 / (inputs + outputs) as f64).sqrt(),
        };
        let weights = Array2::from_shape_fn((outputs, inputs), |_| rng.random_range(-limit..limit));
        Self {
            weights,
            bias: Array1::zeros(outputs),
            activation,
        }
    }

    pub fn inputs(&self) -> usize {
        self.weights.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.weights.nrows()
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

/// Multi-layer perceptron.
#[derive(Debug, Clone)]
pub struct Mlp {
    layers: Vec<Dense>,
    version: u64,
}

/// Equal parameters and activations; the cache version is ignored.
impl PartialEq for Mlp {
    fn eq(&self, other: &Self) -> bool {
        self.layers == other.layers
    }
}

/// Per-layer inputs and pre-activations from one forward pass.
#[derive(Debug, Clone)]
pub struct Cache {
    version: u64,
    inputs: Vec<Array2<f64>>,
    pre: Vec<Array2<f64>>,
}

/// Parameter gradients, one `(dW, db)` per layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<(Array2<f64>, Array1<f64>)>,
}

impl Gradients {
    pub fn zeros_like(net: &Mlp) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| (Array2::zeros(l.weights.dim()), Array1::zeros(l.bias.len())))
                .collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for ((w, b), (ow, ob)) in self.layers.iter_mut().zip(&other.layers) {
            *w += ow;
            *b += ob;
        }
    }

    pub fn scale(&mut self, s: f64) {
        for (w, b) in &mut self.layers {
            w.mapv_inplace(|v| v * s);
            b.mapv_inplace(|v| v * s);
        }
    }

    pub fn sq_norm(&self) -> f64 {
        self.layers
            .iter()
            .map(|(w, b)| w.iter().chain(b.iter()).map(|v| v * v).sum::<f64>())
            .sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|(w, b)| w.iter().chain(b.iter()).all(|v| v.is_finite()))
    }
}

impl Mlp {
    pub fn from_layers(layers: Vec<Dense>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Config("network needs at least one layer".into()));
        }
        for pair in layers.windows(2) {
            if pair[0].outputs() != pair[1].inputs() {
                return Err(Error::DimensionMismatch {
                    expected: pair[0].outputs(),
                    got: pair[1].inputs(),
                    context: "adjacent layer widths",
                });
            }
        }
        for l in &layers {
            if l.bias.len() != l.outputs() {
                return Err(Error::DimensionMismatch {
                    expected: l.outputs(),
                    got: l.bias.len(),
                    context: "bias length",
                });
            }
            if l.weights.iter().chain(l.bias.iter()).any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("layer parameter".into()));
            }
        }
        Ok(Self { layers, version: 0 })
    }

    /// `widths = [in, h1, ..., out]`, one activation per layer.
    pub fn new(widths: &[usize], activations: &[Activation], rng: &mut impl Rng) -> Self {
        assert_eq!(widths.len(), activations.len() + 1, "one activation per layer");
        let layers = widths
            .windows(2)
            .zip(activations)
            .map(|(w, &a)| Dense::init(w[0], w[1], a, rng))
            .collect();
        Self { layers, version: 0 }
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    /// Mutable access; invalidates outstanding caches.
    pub fn layers_mut(&mut self) -> &mut [Dense] {
        self.version += 1;
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Dense::param_count).sum()
    }

    fn check_input(&self, x: &Array2<f64>) -> Result<()> {
        if x.ncols() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: x.ncols(),
                context: "network input width",
            });
        }
        Ok(())
    }

    pub fn forward(&self, x: &Array2<f64>) -> Result<(Array2<f64>, Cache)> {
        self.check_input(x)?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut h = x.clone();
        for layer in &self.layers {
            let z = h.dot(&layer.weights.t()) + &layer.bias;
            let a = z.mapv(|v| layer.activation.apply(v));
            inputs.push(h);
            pre.push(z);
            h = a;
        }
        Ok((
            h,
            Cache {
                version: self.version,
                inputs,
                pre,
            },
        ))
    }

    /// Forward pass without keeping activations.
    pub fn predict(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        self.check_input(x)?;
        let mut h = x.clone();
        for layer in &self.layers {
            let mut z = h.dot(&layer.weights.t()) + &layer.bias;
            z.mapv_inplace(|v| layer.activation.apply(v));
            h = z;
        }
        Ok(h)
    }

    /// Single-sample convenience wrapper around [`Mlp::predict`].
    pub fn predict_one(&self, x: &[f64]) -> Result<Vec<f64>> {
        let m = Array2::from_shape_vec((1, x.len()), x.to_vec()).expect("row vector");
        Ok(self.predict(&m)?.into_raw_vec_and_offset().0)
    }

    /// Parameter gradients and `dL/dinput` for the cached forward pass.
    pub fn backward(&self, cache: &Cache, grad_output: &Array2<f64>) -> Result<(Gradients, Array2<f64>)> {
        if cache.version != self.version || cache.pre.len() != self.layers.len() {
            return Err(Error::StaleCache);
        }
        let last = &cache.pre[cache.pre.len() - 1];
        if grad_output.dim() != last.dim() {
            return Err(Error::DimensionMismatch {
                expected: last.ncols(),
                got: grad_output.ncols(),
                context: "output gradient shape",
            });
        }
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut g = grad_output.clone();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let mut dz = g;
            dz.zip_mut_with(&cache.pre[i], |d, &z| *d *= layer.activation.derivative(z));
            let dw = dz.t().dot(&cache.inputs[i]);
            let db = dz.sum_axis(Axis(0));
            g = dz.dot(&layer.weights);
            grads.push((dw, db));
        }
        grads.reverse();
        Ok((Gradients { layers: grads }, g))
    }
}
