//! Spatial-domain fine-tuning: synthesized SMVs are turned into point
//! clouds, embedded by a frozen feature extractor and pulled towards real
//! shape features. Gradients reach every generator through the radius
//! reconstruction and the conditioning links of the chain.

use ndarray::Array2;
use rand::Rng;

use super::{gaussian, CascadeGan, LossRecord, Phase, SynthesisMode};
use crate::error::{Error, Result};
use crate::feature::FeatureExtractor;
use crate::geometry::PointCloud;
use crate::nn::Gradients;
use crate::sh::dh_grid;
use crate::transform::BasisMatrix;

/// Global gradient norm above which fine-tuning updates are rescaled.
pub const GRADIENT_CLIP_NORM: f64 = 1e3;

/// A frozen extractor and the features of real shapes to match.
#[derive(Debug, Clone, Copy)]
pub struct SpatialRegularizer<'a> {
    pub features: &'a FeatureExtractor,
    pub targets: &'a [Vec<f64>],
}

impl SpatialRegularizer<'_> {
    fn validate(&self) -> Result<()> {
        if !self.features.is_frozen() {
            return Err(Error::Training("feature extractor must be frozen before fine-tuning".into()));
        }
        if self.targets.is_empty() {
            return Err(Error::Training("no real features to match".into()));
        }
        if let Some(t) = self.targets.iter().find(|t| t.len() != self.features.feature_dim()) {
            return Err(Error::DimensionMismatch {
                expected: self.features.feature_dim(),
                got: t.len(),
                context: "target feature length",
            });
        }
        Ok(())
    }
}

/// Random inputs of one fine-tuning step.
#[derive(Debug, Clone, PartialEq)]
pub struct RegularizerBatch {
    /// one `batch x noise_dim` latent per band
    pub noises: Vec<Array2<f64>>,
    /// index into the target features, per sample
    pub targets: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularizerReport {
    pub iterations: usize,
    pub final_loss: f64,
    pub clipped: usize,
    pub max_grad_norm: f64,
}

impl CascadeGan {
    /// Draws a batch from the training RNG.
    pub fn regularizer_batch(&mut self, target_count: usize, batch: usize) -> RegularizerBatch {
        let nd = self.config.noise_dim;
        let noises = (0..self.config.t_prime)
            .map(|_| gaussian(&mut self.rng, batch, nd))
            .collect();
        let targets = (0..batch).map(|_| self.rng.random_range(0..target_count)).collect();
        RegularizerBatch { noises, targets }
    }

    /// Mean of `||f_g - f_o||` over the batch and its gradient with respect
    /// to every generator's parameters.
    pub fn regularizer_gradients(
        &self,
        reg: &SpatialRegularizer<'_>,
        batch: &RegularizerBatch,
    ) -> Result<(f64, Vec<Gradients>)> {
        reg.validate()?;
        let t = self.generators.len();
        if batch.noises.len() != self.config.t_prime || batch.targets.len() != batch.noises[0].nrows() {
            return Err(Error::DimensionMismatch {
                expected: self.config.t_prime,
                got: batch.noises.len(),
                context: "regularizer batch",
            });
        }
        let b = batch.targets.len();

        let mut outputs: Vec<Array2<f64>> = Vec::with_capacity(t);
        let mut caches = Vec::with_capacity(t);
        for i in 0..t {
            let z = batch.noises[self.band_of(i)].clone();
            let input = self.generator_input(i, z, outputs.last());
            let (out, cache) = self.generators[i].forward(&input)?;
            outputs.push(out);
            caches.push(cache);
        }
        let mut coeffs = self.assemble(&outputs, SynthesisMode::Full);
        for mut row in coeffs.rows_mut() {
            row.zip_mut_with(&ndarray::ArrayView1::from(&self.scale), |c, s| *c *= s);
        }
        let basis = BasisMatrix::cached(self.config.bandlimit);
        let radii = basis.reconstruct_batch(&coeffs)?;
        let dirs = dh_grid(self.config.bandlimit).directions();

        let mut loss = 0.0;
        let mut grad_radii = Array2::zeros(radii.dim());
        for (s, &target) in batch.targets.iter().enumerate() {
            let cloud = PointCloud {
                points: dirs
                    .iter()
                    .zip(radii.row(s))
                    .map(|(u, &r)| [r * u[0], r * u[1], r * u[2]])
                    .collect(),
            };
            let (feature, tape) = reg.features.extract_with_tape(&cloud)?;
            let diff: Vec<f64> = feature.iter().zip(&reg.targets[target]).map(|(a, b)| a - b).collect();
            let dist = diff.iter().map(|d| d * d).sum::<f64>().sqrt();
            if !dist.is_finite() {
                return Err(Error::NonFinite(format!("regularizer feature distance {dist}")));
            }
            loss += dist / b as f64;
            if dist == 0.0 {
                continue;
            }
            let grad_feature: Vec<f64> = diff.iter().map(|d| d / (dist * b as f64)).collect();
            let grad_points = reg.features.backward_points(&tape, &grad_feature)?;
            for (n, u) in dirs.iter().enumerate() {
                grad_radii[[s, n]] =
                    grad_points[[n, 0]] * u[0] + grad_points[[n, 1]] * u[1] + grad_points[[n, 2]] * u[2];
            }
        }

        let mut grad_coeffs = basis.backprop_batch(&grad_radii)?;
        for mut row in grad_coeffs.rows_mut() {
            row.zip_mut_with(&ndarray::ArrayView1::from(&self.scale), |g, s| *g *= s);
        }
        let mut grad_out: Vec<Array2<f64>> = outputs.iter().map(|o| Array2::zeros(o.dim())).collect();
        for (band, src) in self.partition.bands().iter().zip(self.assembly_sources(SynthesisMode::Full)) {
            for (c, &idx) in band.indices.iter().enumerate() {
                grad_out[src].column_mut(c).assign(&grad_coeffs.column(idx));
            }
        }
        let nd = self.config.noise_dim;
        let mut grads = Vec::with_capacity(t);
        for i in (0..t).rev() {
            let (g, grad_input) = self.generators[i].backward(&caches[i], &grad_out[i])?;
            grads.push(g);
            if i > 0 {
                let prev = &mut grad_out[i - 1];
                for (k, &src) in self.cond_sources[i].iter().enumerate() {
                    let mut col = prev.column_mut(src);
                    col += &grad_input.column(nd + k);
                }
            }
        }
        grads.reverse();
        Ok((loss, grads))
    }

    /// `iters` fine-tuning updates of all generators. Updates whose global
    /// gradient norm exceeds [`GRADIENT_CLIP_NORM`] are rescaled to it.
    pub fn regularizer_finetune(&mut self, reg: &SpatialRegularizer<'_>, iters: usize) -> Result<RegularizerReport> {
        reg.validate()?;
        let mut report = RegularizerReport {
            iterations: iters,
            final_loss: f64::NAN,
            clipped: 0,
            max_grad_norm: 0.0,
        };
        for it in 0..iters {
            let batch = self.regularizer_batch(reg.targets.len(), self.config.reg_batch);
            let (loss, mut grads) = self.regularizer_gradients(reg, &batch)?;
            let norm = grads.iter().map(Gradients::sq_norm).sum::<f64>().sqrt();
            if !norm.is_finite() {
                return Err(Error::NonFinite(format!("regularizer iter {it}: gradient norm {norm}")));
            }
            report.max_grad_norm = report.max_grad_norm.max(norm);
            if norm > GRADIENT_CLIP_NORM {
                log::warn!("regularizer iter {it}: gradient norm {norm:.3e} clipped to {GRADIENT_CLIP_NORM:e}");
                report.clipped += 1;
                for g in &mut grads {
                    g.scale(GRADIENT_CLIP_NORM / norm);
                }
            }
            for ((net, opt), g) in self.generators.iter_mut().zip(&mut self.reg_opts).zip(&grads) {
                opt.step(net, g)?;
            }
            report.final_loss = loss;
            self.losses.push(LossRecord {
                phase: Phase::Regularizer,
                iter: it,
                net: "all".into(),
                loss,
            });
        }
        Ok(report)
    }
}
