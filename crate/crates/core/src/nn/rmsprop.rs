use ndarray::{Array1, Array2, Zip};

use super::{Activation, Dense, Gradients, Mlp};
use crate::error::{Error, Result};

pub const RMSPROP_RHO: f64 = 0.9;
pub const RMSPROP_EPSILON: f64 = 1e-7;

/// RMSprop without momentum:
/// `acc <- rho acc + (1 - rho) g^2`, `p <- p - lr g / sqrt(acc + eps)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Rmsprop {
    pub learning_rate: f64,
    pub rho: f64,
    pub epsilon: f64,
    acc: Vec<(Array2<f64>, Array1<f64>)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepOutcome {
    Applied,
    /// Gradients contained NaN or infinity; nothing was changed.
    SkippedNonFinite,
}

impl Rmsprop {
    pub fn new(net: &Mlp, learning_rate: f64) -> Self {
        Self {
            learning_rate,
            rho: RMSPROP_RHO,
            epsilon: RMSPROP_EPSILON,
            acc: Gradients::zeros_like(net).layers,
        }
    }

    /// Forget accumulated statistics.
    pub fn reset(&mut self) {
        for (w, b) in &mut self.acc {
            w.fill(0.0);
            b.fill(0.0);
        }
    }

    pub fn accumulators(&self) -> &[(Array2<f64>, Array1<f64>)] {
        &self.acc
    }

    /// Accumulators packed into an identity-activation [`Mlp`] so they can
    /// use the network file format.
    pub fn state_as_mlp(&self) -> Mlp {
        let layers = self
            .acc
            .iter()
            .map(|(w, b)| Dense {
                weights: w.clone(),
                bias: b.clone(),
                activation: Activation::Identity,
            })
            .collect();
        Mlp::from_layers(layers).expect("accumulators mirror a valid network")
    }

    /// Inverse of [`Rmsprop::state_as_mlp`]; shapes must match `net`.
    pub fn from_state(net: &Mlp, learning_rate: f64, state: &Mlp) -> Result<Self> {
        let mut opt = Self::new(net, learning_rate);
        let layers = state.layers();
        if layers.len() != opt.acc.len()
            || layers
                .iter()
                .zip(&opt.acc)
                .any(|(l, (w, _))| l.weights.dim() != w.dim())
        {
            return Err(Error::DimensionMismatch {
                expected: opt.acc.len(),
                got: layers.len(),
                context: "optimizer state vs network",
            });
        }
        for (l, (w, b)) in layers.iter().zip(opt.acc.iter_mut()) {
            w.assign(&l.weights);
            b.assign(&l.bias);
        }
        Ok(opt)
    }

    pub fn step(&mut self, net: &mut Mlp, grads: &Gradients) -> Result<StepOutcome> {
        if grads.layers.len() != self.acc.len()
            || grads
                .layers
                .iter()
                .zip(&self.acc)
                .any(|((gw, gb), (aw, ab))| gw.dim() != aw.dim() || gb.len() != ab.len())
        {
            return Err(Error::DimensionMismatch {
                expected: self.acc.len(),
                got: grads.layers.len(),
                context: "optimizer state vs gradients",
            });
        }
        if !grads.is_finite() {
            log::warn!("non-finite gradient; RMSprop step skipped");
            return Ok(StepOutcome::SkippedNonFinite);
        }
        let (lr, rho, eps) = (self.learning_rate, self.rho, self.epsilon);
        let update = |p: &mut f64, a: &mut f64, g: &f64| {
            *a = rho * *a + (1.0 - rho) * g * g;
            *p -= lr * g / (*a + eps).sqrt();
        };
        for (layer, ((gw, gb), (aw, ab))) in net
            .layers_mut()
            .iter_mut()
            .zip(grads.layers.iter().zip(self.acc.iter_mut()))
        {
            Zip::from(&mut layer.weights).and(aw).and(gw).for_each(update);
            Zip::from(&mut layer.bias).and(ab).and(gb).for_each(update);
        }
        Ok(StepOutcome::Applied)
    }
}
