//! Band-partitioned cascade of conditional GANs over normalized SMVs.
//!
//! Generators `0..T'` form the forward sweep, one per band from low to high
//! frequency. Generators `T'..2T'-1` refine bands `0..T'-1` again, each one
//! conditioned on its predecessor's output, so the whole stack is a single
//! chain `G_0 -> G_1 -> ... -> G_{T-1}`. The final SMV takes band `T'-1`
//! from `G_{T'-1}` and every lower band from its refining generator.

mod adversarial;
pub mod checkpoint;
mod config;
mod dataset;
mod partition;
mod regularizer;

use std::fmt;

use ndarray::{s, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::nn::{Activation, Mlp, Rmsprop};
use crate::sh::Smv;

use adversarial::{discriminator_step, generator_step};
pub use config::TrainConfig;
pub use dataset::{SmvDataset, SCALE_HEADROOM};
pub use partition::{condition_indices, condition_vector, partition_bands, Band, BandPartition};
pub use regularizer::{RegularizerBatch, RegularizerReport, SpatialRegularizer, GRADIENT_CLIP_NORM};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Forward,
    Backward,
    Regularizer,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Forward => "forward",
            Phase::Backward => "backward",
            Phase::Regularizer => "regularizer",
        })
    }
}

impl std::str::FromStr for Phase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "forward" => Ok(Phase::Forward),
            "backward" => Ok(Phase::Backward),
            "regularizer" => Ok(Phase::Regularizer),
            _ => Err(Error::format("loss log", format!("unknown phase {s:?}"))),
        }
    }
}

/// One row of the training log.
#[derive(Debug, Clone, PartialEq)]
pub struct LossRecord {
    pub phase: Phase,
    pub iter: usize,
    /// `G<k>` / `D<k>` (1-based) or `all` for the regularizer
    pub net: String,
    pub loss: f64,
}

/// Optimizer updates applied in adversarial phases.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepCounts {
    pub discriminator: usize,
    pub generator: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthesisMode {
    /// last forward band plus the refined lower bands
    Full,
    /// forward generators only, as before any refinement
    ForwardOnly,
}

/// Generator shapes for `config`: `input -> hidden -> hidden -> band`.
fn generator_widths(config: &TrainConfig, partition: &BandPartition) -> Vec<[usize; 4]> {
    (0..config.generator_count())
        .map(|i| {
            let input = config.noise_dim + if i > 0 { config.cond_dim } else { 0 };
            let band = partition.bands()[band_of(config.t_prime, i)].len();
            [input, config.hidden, config.hidden, band]
        })
        .collect()
}

fn band_of(t_prime: usize, generator: usize) -> usize {
    if generator < t_prime {
        generator
    } else {
        generator - t_prime
    }
}

/// Parameter count of every generator, computed from layer widths alone.
pub fn generator_parameter_counts(config: &TrainConfig) -> Result<Vec<usize>> {
    let partition = partition_bands(config.bandlimit, config.t_prime)?;
    Ok(generator_widths(config, &partition)
        .iter()
        .map(|w| w.windows(2).map(|p| p[0] * p[1] + p[1]).sum())
        .collect())
}

/// Freshly initialised generators for `config`, drawn from `rng` in order.
pub fn build_generators(config: &TrainConfig, rng: &mut impl Rng) -> Result<Vec<Mlp>> {
    config.validate()?;
    let partition = partition_bands(config.bandlimit, config.t_prime)?;
    Ok(generator_widths(config, &partition)
        .iter()
        .map(|w| Mlp::new(w, &[Activation::Relu, Activation::Relu, Activation::Tanh], rng))
        .collect())
}

pub(crate) fn gaussian(rng: &mut impl Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || StandardNormal.sample(rng))
}

fn sample_rows(rng: &mut impl Rng, rows: &Array2<f64>, count: usize) -> Array2<f64> {
    let picks: Vec<usize> = (0..count).map(|_| rng.random_range(0..rows.nrows())).collect();
    Array2::from_shape_fn((count, rows.ncols()), |(r, c)| rows[[picks[r], c]])
}

/// The generator/discriminator stack with its optimizer states and
/// training bookkeeping.
#[derive(Debug, Clone)]
pub struct CascadeGan {
    config: TrainConfig,
    partition: BandPartition,
    scale: Vec<f64>,
    generators: Vec<Mlp>,
    discriminators: Vec<Mlp>,
    gen_opts: Vec<Rmsprop>,
    disc_opts: Vec<Rmsprop>,
    reg_opts: Vec<Rmsprop>,
    /// for generator `i > 0`, positions of `G_{i-1}`'s output it reads
    cond_sources: Vec<Vec<usize>>,
    rng: ChaCha8Rng,
    losses: Vec<LossRecord>,
    steps: StepCounts,
    completed_outer: usize,
}

impl CascadeGan {
    /// Initialises every network from `config.seed`. `scale` holds the
    /// per-coefficient normalization of the training set.
    pub fn new(config: TrainConfig, scale: Vec<f64>) -> Result<Self> {
        config.validate()?;
        let partition = partition_bands(config.bandlimit, config.t_prime)?;
        if scale.len() != partition.coeff_count() {
            return Err(Error::DimensionMismatch {
                expected: partition.coeff_count(),
                got: scale.len(),
                context: "normalization scale length",
            });
        }
        if scale.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::Config("normalization scales must be finite and positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let generators = build_generators(&config, &mut rng)?;
        let discriminators: Vec<Mlp> = (0..config.generator_count())
            .map(|i| {
                let band = partition.bands()[band_of(config.t_prime, i)].len();
                Mlp::new(
                    &[band, config.disc_hidden, config.disc_hidden, 1],
                    &[Activation::LeakyRelu, Activation::LeakyRelu, Activation::Identity],
                    &mut rng,
                )
            })
            .collect();
        let gen_opts = generators
            .iter()
            .enumerate()
            .map(|(i, g)| Rmsprop::new(g, generator_learning_rate(&config, i)))
            .collect();
        let disc_opts = discriminators
            .iter()
            .map(|d| Rmsprop::new(d, config.lr_disc))
            .collect();
        let reg_opts = generators
            .iter()
            .map(|g| Rmsprop::new(g, config.lr_reg))
            .collect();
        let cond_sources = (0..config.generator_count())
            .map(|i| {
                if i == 0 {
                    Vec::new()
                } else {
                    condition_indices(generators[i - 1].output_dim(), config.cond_dim)
                }
            })
            .collect();
        Ok(Self {
            config,
            partition,
            scale,
            generators,
            discriminators,
            gen_opts,
            disc_opts,
            reg_opts,
            cond_sources,
            rng,
            losses: Vec::new(),
            steps: StepCounts::default(),
            completed_outer: 0,
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn partition(&self) -> &BandPartition {
        &self.partition
    }

    pub fn scale(&self) -> &[f64] {
        &self.scale
    }

    pub fn generators(&self) -> &[Mlp] {
        &self.generators
    }

    pub fn discriminators(&self) -> &[Mlp] {
        &self.discriminators
    }

    /// Mutable generator access for probing; optimizer states are kept.
    pub fn generator_mut(&mut self, i: usize) -> &mut Mlp {
        &mut self.generators[i]
    }

    pub fn losses(&self) -> &[LossRecord] {
        &self.losses
    }

    pub fn steps(&self) -> StepCounts {
        self.steps
    }

    /// Outer training iterations finished so far.
    pub fn completed_outer(&self) -> usize {
        self.completed_outer
    }

    pub fn generator_param_count(&self) -> usize {
        self.generators.iter().map(Mlp::param_count).sum()
    }

    /// Band index produced by generator `i`.
    pub fn band_of(&self, generator: usize) -> usize {
        band_of(self.config.t_prime, generator)
    }

    /// For each band, the generator whose output fills it.
    pub fn assembly_sources(&self, mode: SynthesisMode) -> Vec<usize> {
        let t = self.config.t_prime;
        (0..t)
            .map(|b| match mode {
                SynthesisMode::ForwardOnly => b,
                SynthesisMode::Full if b == t - 1 => b,
                SynthesisMode::Full => t + b,
            })
            .collect()
    }

    /// Generators that must run (as a chain prefix) for `mode`.
    pub fn chain_length(&self, mode: SynthesisMode) -> usize {
        self.assembly_sources(mode).into_iter().max().unwrap_or(0) + 1
    }

    /// `[noise | conditioning]` for generator `i`.
    fn generator_input(&self, i: usize, noise: Array2<f64>, prev: Option<&Array2<f64>>) -> Array2<f64> {
        if i == 0 {
            return noise;
        }
        let prev = prev.expect("conditioned generator needs its predecessor's output");
        let nd = self.config.noise_dim;
        let mut input = Array2::zeros((noise.nrows(), nd + self.config.cond_dim));
        input.slice_mut(s![.., ..nd]).assign(&noise);
        for (k, &src) in self.cond_sources[i].iter().enumerate() {
            input.column_mut(nd + k).assign(&prev.column(src));
        }
        input
    }

    /// Outputs of generators `0..count`. `noises` holds one matrix per band;
    /// a refining generator reuses the latent of the forward generator it
    /// was copied from.
    fn run_chain(&self, noises: &[Array2<f64>], count: usize) -> Result<Vec<Array2<f64>>> {
        let mut outputs: Vec<Array2<f64>> = Vec::with_capacity(count);
        for i in 0..count {
            let input = self.generator_input(i, noises[self.band_of(i)].clone(), outputs.last());
            outputs.push(self.generators[i].predict(&input)?);
        }
        Ok(outputs)
    }

    /// Normalized SMVs (one per row) from chain outputs.
    fn assemble(&self, outputs: &[Array2<f64>], mode: SynthesisMode) -> Array2<f64> {
        let rows = outputs[0].nrows();
        let mut smvs = Array2::zeros((rows, self.partition.coeff_count()));
        for (band, src) in self.partition.bands().iter().zip(self.assembly_sources(mode)) {
            for (c, &idx) in band.indices.iter().enumerate() {
                smvs.column_mut(idx).assign(&outputs[src].column(c));
            }
        }
        smvs
    }

    /// Per-sample noise so a sample depends only on `(seed, sample index)`.
    fn synthesis_noise(&self, count: usize, seed: u64) -> Vec<Array2<f64>> {
        let nd = self.config.noise_dim;
        let mut noises = vec![Array2::zeros((count, nd)); self.config.t_prime];
        for sample in 0..count {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(sample as u64);
            for z in &mut noises {
                for v in z.row_mut(sample) {
                    *v = StandardNormal.sample(&mut rng);
                }
            }
        }
        noises
    }

    /// `count` new SMVs in the original (denormalized) coefficient scale.
    pub fn synthesize(&self, count: usize, seed: u64, mode: SynthesisMode) -> Result<Vec<Smv>> {
        if count == 0 {
            return Ok(Vec::new());
        }
        let noises = self.synthesis_noise(count, seed);
        let normalized = self.assemble(&self.run_chain(&noises, self.chain_length(mode))?, mode);
        normalized
            .rows()
            .into_iter()
            .map(|r| dataset::denormalize(&self.scale, self.config.bandlimit, &r.to_vec()))
            .collect()
    }

    fn check_dataset(&self, dataset: &SmvDataset) -> Result<()> {
        if dataset.max_degree() != self.config.bandlimit {
            return Err(Error::BandlimitMismatch {
                expected: self.config.bandlimit,
                got: dataset.max_degree(),
            });
        }
        if dataset.scale() != self.scale.as_slice() {
            return Err(Error::Training(
                "dataset normalization differs from the model's".into(),
            ));
        }
        Ok(())
    }

    fn band_noise(&mut self) -> Vec<Array2<f64>> {
        let (batch, nd) = (self.config.batch, self.config.noise_dim);
        (0..self.config.t_prime).map(|_| gaussian(&mut self.rng, batch, nd)).collect()
    }

    /// Input batch for generator `i` during training: fresh latents, and
    /// conditioning from either the chain below `i` or real data.
    fn training_input(&mut self, i: usize, real_prev: Option<&Array2<f64>>) -> Result<Array2<f64>> {
        let noises = self.band_noise();
        let z = noises[self.band_of(i)].clone();
        if i == 0 {
            return Ok(z);
        }
        let cond = if self.config.real_conditioning {
            let rows = real_prev.expect("real conditioning rows");
            sample_rows(&mut self.rng, rows, self.config.batch)
        } else {
            self.run_chain(&noises, i)?.pop().expect("non-empty chain")
        };
        Ok(self.generator_input(i, z, Some(&cond)))
    }

    /// Adversarial training of generator `i` against its discriminator,
    /// `d_steps` discriminator updates per generator update.
    fn train_generator(
        &mut self,
        i: usize,
        real: &Array2<f64>,
        real_prev: Option<&Array2<f64>>,
        iters: usize,
        phase: Phase,
    ) -> Result<()> {
        let batch = self.config.batch;
        let context = |it: usize, e: Error| match e {
            Error::NonFinite(msg) => Error::NonFinite(format!("{phase} phase, G{} iter {it}: {msg}", i + 1)),
            other => other,
        };
        for it in 0..iters {
            let mut d_loss = 0.0;
            for _ in 0..self.config.d_steps {
                let real_batch = sample_rows(&mut self.rng, real, batch);
                let input = self.training_input(i, real_prev)?;
                let fake = self.generators[i].predict(&input)?;
                d_loss += discriminator_step(&mut self.discriminators[i], &mut self.disc_opts[i], &real_batch, &fake)
                    .map_err(|e| context(it, e))?;
                self.steps.discriminator += 1;
            }
            let input = self.training_input(i, real_prev)?;
            let g_loss = generator_step(&mut self.generators[i], &mut self.gen_opts[i], &self.discriminators[i], &input)
                .map_err(|e| context(it, e))?;
            self.steps.generator += 1;
            self.losses.push(LossRecord {
                phase,
                iter: it,
                net: format!("D{}", i + 1),
                loss: d_loss / self.config.d_steps as f64,
            });
            self.losses.push(LossRecord {
                phase,
                iter: it,
                net: format!("G{}", i + 1),
                loss: g_loss,
            });
        }
        Ok(())
    }

    fn train_range(&mut self, dataset: &SmvDataset, gens: std::ops::Range<usize>, iters: usize, phase: Phase) -> Result<()> {
        self.check_dataset(dataset)?;
        let rows = dataset.normalized();
        for i in gens {
            let bands = self.partition.bands();
            let real = bands[self.band_of(i)].gather(rows);
            let prev = (i > 0).then(|| bands[self.band_of(i - 1)].gather(rows));
            log::info!("{phase} phase: training G{} for {iters} iterations", i + 1);
            self.train_generator(i, &real, prev.as_ref(), iters, phase)?;
        }
        Ok(())
    }

    /// Trains the forward generators in order, each for `iters` updates.
    pub fn train_forward_pass(&mut self, dataset: &SmvDataset, iters: usize) -> Result<()> {
        self.train_range(dataset, 0..self.config.t_prime, iters, Phase::Forward)
    }

    /// Trains the refining generators in chain order.
    pub fn train_backward_pass(&mut self, dataset: &SmvDataset, iters: usize) -> Result<()> {
        let t = self.config.t_prime;
        self.train_range(dataset, t..2 * t - 1, iters, Phase::Backward)
    }

    /// Copies each forward generator `k < T'-1` into its refining generator
    /// `T'+k`, and its discriminator likewise. Input columns present in both
    /// are copied; extra conditioning columns start at zero, so the copy
    /// initially ignores its conditioning. The receiving optimizers restart.
    pub fn transfer_weights(&mut self) -> Result<()> {
        let t = self.config.t_prime;
        for k in 0..t - 1 {
            let (src, dst) = (k, t + k);
            if self.generators[src].output_dim() != self.generators[dst].output_dim() {
                return Err(Error::Training(format!(
                    "band mismatch between G{} and G{}",
                    src + 1,
                    dst + 1
                )));
            }
            let mut layers = self.generators[src].layers().to_vec();
            let dst_in = self.generators[dst].input_dim();
            let first = &mut layers[0];
            if first.inputs() != dst_in {
                let keep = first.inputs().min(dst_in);
                let mut w = Array2::zeros((first.outputs(), dst_in));
                w.slice_mut(s![.., ..keep]).assign(&first.weights.slice(s![.., ..keep]));
                first.weights = w;
            }
            self.generators[dst] = Mlp::from_layers(layers)?;
            self.discriminators[dst] = self.discriminators[src].clone();
            self.gen_opts[dst] = Rmsprop::new(&self.generators[dst], self.config.lr_backward);
            self.disc_opts[dst] = Rmsprop::new(&self.discriminators[dst], self.config.lr_disc);
            self.reg_opts[dst] = Rmsprop::new(&self.generators[dst], self.config.lr_reg);
        }
        Ok(())
    }

    /// Runs the remaining outer iterations: forward pass, transfer,
    /// backward pass, then (if given) spatial fine-tuning. `after_outer`
    /// sees the stack after every finished outer iteration.
    pub fn train(
        &mut self,
        dataset: &SmvDataset,
        regularizer: Option<&SpatialRegularizer<'_>>,
        mut after_outer: impl FnMut(&CascadeGan) -> Result<()>,
    ) -> Result<()> {
        self.check_dataset(dataset)?;
        while self.completed_outer < self.config.outer_iters {
            log::info!("outer iteration {}/{}", self.completed_outer + 1, self.config.outer_iters);
            self.train_forward_pass(dataset, self.config.forward_iters)?;
            self.transfer_weights()?;
            self.train_backward_pass(dataset, self.config.backward_iters)?;
            if let Some(reg) = regularizer {
                let report = self.regularizer_finetune(reg, self.config.reg_iters)?;
                log::info!(
                    "regularizer: final loss {:.5}, {} clipped steps",
                    report.final_loss,
                    report.clipped
                );
            }
            self.completed_outer += 1;
            after_outer(self)?;
        }
        Ok(())
    }
}

fn generator_learning_rate(config: &TrainConfig, i: usize) -> f64 {
    if i < config.t_prime {
        config.lr_forward
    } else {
        config.lr_backward
    }
}

#[cfg(test)]
mod tests;
