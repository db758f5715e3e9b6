//! Permutation-invariant global descriptor for point clouds: a shared
//! per-point MLP followed by a coordinate-wise max over points.
//!
//! Stands in for a pretrained PointNet in the spatial-domain regularizer.
//! Features are not translation invariant; all clouds are expected in the
//! unit-ball frame produced by the sampler.

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::PointCloud;
use crate::nn::{Activation, Cache, Gradients, Mlp, Rmsprop};

pub const DEFAULT_FEATURE_DIM: usize = 128;

#[derive(Debug, Clone)]
pub struct FeatureExtractor {
    net: Mlp,
    frozen: bool,
}

/// Saved state of one [`FeatureExtractor::extract_with_tape`] call.
#[derive(Debug, Clone)]
pub struct FeatureTape {
    cache: Cache,
    /// per feature, the point index that attained the maximum
    argmax: Vec<usize>,
    points: usize,
}

/// Training summary from [`FeatureExtractor::pretrain`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PretrainReport {
    pub accuracy: f64,
    pub epochs: usize,
}

pub const PRETRAIN_TARGET_ACCURACY: f64 = 0.90;
pub const PRETRAIN_MIN_ACCURACY: f64 = 0.60;

impl FeatureExtractor {
    /// Per-point MLP `3 -> 64 -> 128 -> feature_dim`.
    pub fn new(feature_dim: usize, rng: &mut impl Rng) -> Self {
        let net = Mlp::new(
            &[3, 64, 128, feature_dim],
            &[Activation::Relu, Activation::Relu, Activation::Identity],
            rng,
        );
        Self { net, frozen: false }
    }

    pub fn from_net(net: Mlp, frozen: bool) -> Result<Self> {
        if net.input_dim() != 3 {
            return Err(Error::DimensionMismatch {
                expected: 3,
                got: net.input_dim(),
                context: "feature network input width",
            });
        }
        Ok(Self { net, frozen })
    }

    pub fn net(&self) -> &Mlp {
        &self.net
    }

    pub fn feature_dim(&self) -> usize {
        self.net.output_dim()
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn freeze(&mut self) {
        self.frozen = true;
    }

    fn points_matrix(cloud: &PointCloud) -> Result<Array2<f64>> {
        cloud.require_nonempty()?;
        let flat: Vec<f64> = cloud.points.iter().flatten().copied().collect();
        Ok(Array2::from_shape_vec((cloud.len(), 3), flat).expect("n x 3"))
    }

    pub fn extract(&self, cloud: &PointCloud) -> Result<Vec<f64>> {
        let per_point = self.net.predict(&Self::points_matrix(cloud)?)?;
        Ok(max_pool(&per_point).0)
    }

    pub fn extract_with_tape(&self, cloud: &PointCloud) -> Result<(Vec<f64>, FeatureTape)> {
        let (per_point, cache) = self.net.forward(&Self::points_matrix(cloud)?)?;
        let (feature, argmax) = max_pool(&per_point);
        Ok((
            feature,
            FeatureTape {
                cache,
                argmax,
                points: cloud.len(),
            },
        ))
    }

    /// `dL/dpoints` (one row per point) given `dL/dfeature`. Only the
    /// maximising point of each feature receives gradient.
    pub fn backward_points(&self, tape: &FeatureTape, grad_feature: &[f64]) -> Result<Array2<f64>> {
        Ok(self.backward(tape, grad_feature)?.1)
    }

    fn backward(&self, tape: &FeatureTape, grad_feature: &[f64]) -> Result<(Gradients, Array2<f64>)> {
        if grad_feature.len() != self.feature_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.feature_dim(),
                got: grad_feature.len(),
                context: "feature gradient length",
            });
        }
        let mut g = Array2::zeros((tape.points, self.feature_dim()));
        for (f, (&row, &v)) in tape.argmax.iter().zip(grad_feature).enumerate() {
            g[[row, f]] = v;
        }
        self.net.backward(&tape.cache, &g)
    }

    /// Trains the extractor with a temporary linear classification head on
    /// labelled clouds, then discards the head and freezes the extractor.
    ///
    /// Stops as soon as training accuracy reaches 90%; fails if it ends
    /// below 60%.
    pub fn pretrain(
        &mut self,
        clouds: &[(PointCloud, usize)],
        max_epochs: usize,
        seed: u64,
    ) -> Result<PretrainReport> {
        if self.frozen {
            return Err(Error::Frozen);
        }
        let classes = clouds.iter().map(|c| c.1).max().map_or(0, |m| m + 1);
        let distinct = {
            let mut seen = vec![false; classes];
            clouds.iter().for_each(|c| seen[c.1] = true);
            seen.iter().filter(|&&s| s).count()
        };
        if distinct < 2 {
            return Err(Error::Training("feature pretraining needs at least two classes".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut head = Mlp::new(&[self.feature_dim(), classes], &[Activation::Identity], &mut rng);
        let mut opt_net = Rmsprop::new(&self.net, 1e-3);
        let mut opt_head = Rmsprop::new(&head, 1e-3);
        let batch = 16;
        let mut order: Vec<usize> = (0..clouds.len()).collect();
        let mut accuracy = self.head_accuracy(&head, clouds)?;
        let mut epochs = 0;
        while epochs < max_epochs && accuracy < PRETRAIN_TARGET_ACCURACY {
            order.shuffle(&mut rng);
            for chunk in order.chunks(batch) {
                let mut g_net = Gradients::zeros_like(&self.net);
                let mut g_head = Gradients::zeros_like(&head);
                for &i in chunk {
                    let (cloud, label) = &clouds[i];
                    let (feat, tape) = self.extract_with_tape(cloud)?;
                    let x = Array2::from_shape_vec((1, feat.len()), feat).expect("row");
                    let (logits, hcache) = head.forward(&x)?;
                    let probs = softmax(logits.row(0).as_slice().expect("contiguous"));
                    let mut dlogits = Array2::from_shape_vec((1, classes), probs).expect("row");
                    dlogits[[0, *label]] -= 1.0;
                    dlogits /= chunk.len() as f64;
                    let (gh, dfeat) = head.backward(&hcache, &dlogits)?;
                    g_head.add_assign(&gh);
                    let (gn, _) = self.backward(&tape, dfeat.row(0).as_slice().expect("contiguous"))?;
                    g_net.add_assign(&gn);
                }
                opt_head.step(&mut head, &g_head)?;
                opt_net.step(&mut self.net, &g_net)?;
            }
            epochs += 1;
            accuracy = self.head_accuracy(&head, clouds)?;
            log::debug!("feature pretrain epoch {epochs}: accuracy {accuracy:.3}");
        }
        if accuracy < PRETRAIN_MIN_ACCURACY {
            return Err(Error::Training(format!(
                "feature pretraining reached only {:.1}% accuracy",
                100.0 * accuracy
            )));
        }
        self.frozen = true;
        Ok(PretrainReport { accuracy, epochs })
    }

    fn head_accuracy(&self, head: &Mlp, clouds: &[(PointCloud, usize)]) -> Result<f64> {
        let mut correct = 0;
        for (cloud, label) in clouds {
            let logits = head.predict_one(&self.extract(cloud)?)?;
            let pred = logits
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .map(|(i, _)| i)
                .unwrap_or(0);
            correct += usize::from(pred == *label);
        }
        Ok(correct as f64 / clouds.len() as f64)
    }

    /// Applies externally computed gradients; refused once frozen.
    pub fn apply_gradients(&mut self, opt: &mut Rmsprop, grads: &Gradients) -> Result<()> {
        if self.frozen {
            return Err(Error::Frozen);
        }
        opt.step(&mut self.net, grads)?;
        Ok(())
    }
}

/// Column-wise maximum; ties resolve to the first row.
fn max_pool(per_point: &Array2<f64>) -> (Vec<f64>, Vec<usize>) {
    per_point
        .axis_iter(Axis(1))
        .map(|col| {
            let mut best = (col[0], 0);
            for (i, &v) in col.iter().enumerate().skip(1) {
                if v > best.0 {
                    best = (v, i);
                }
            }
            best
        })
        .unzip()
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}
