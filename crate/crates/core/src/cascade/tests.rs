use super::*;
use crate::feature::FeatureExtractor;
use crate::sampler::grid_to_pointcloud;
use crate::sh::{coeff_count, dh_grid, inverse_sht};
use ndarray::Array2;

fn tiny_config(bandlimit: usize, t_prime: usize) -> TrainConfig {
    TrainConfig {
        bandlimit,
        t_prime,
        noise_dim: 8,
        cond_dim: 6,
        hidden: 16,
        disc_hidden: 16,
        batch: 8,
        reg_batch: 3,
        seed: 11,
        forward_iters: 5,
        backward_iters: 5,
        reg_iters: 2,
        outer_iters: 2,
        lr_disc: 1e-3,
        lr_reg: 1e-3,
        ..TrainConfig::default()
    }
}

fn toy_dataset(bandlimit: usize, n: usize) -> SmvDataset {
    let smvs: Vec<Smv> = (0..n)
        .map(|k| {
            let mut s = Smv::zeros(bandlimit);
            for (i, c) in s.coeffs_mut().iter_mut().enumerate() {
                *c = if i == 0 { 2.0 + 0.1 * (k % 3) as f64 } else { 0.05 * ((i * 7 + k) % 5) as f64 - 0.1 };
            }
            s
        })
        .collect();
    SmvDataset::from_smvs(&smvs).unwrap()
}

fn gan(config: TrainConfig, data: &SmvDataset) -> CascadeGan {
    CascadeGan::new(config, data.scale().to_vec()).unwrap()
}

#[test]
fn architecture_matches_layer_formula() {
    let config = TrainConfig {
        bandlimit: 8,
        t_prime: 2,
        ..TrainConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let gens = build_generators(&config, &mut rng).unwrap();
    let sizes = [45, 36, 45];
    assert_eq!(gens.len(), 3);
    for (i, g) in gens.iter().enumerate() {
        let input = if i == 0 { 200 } else { 300 };
        let b = sizes[i];
        assert_eq!((g.input_dim(), g.output_dim()), (input, b));
        assert_eq!(g.layers().len(), 3);
        assert_eq!(g.layers()[2].activation, Activation::Tanh);
        assert_eq!(g.param_count(), input * 512 + 512 + 512 * 512 + 512 + 512 * b + b);
    }
    let counts = generator_parameter_counts(&config).unwrap();
    assert_eq!(counts, gens.iter().map(Mlp::param_count).collect::<Vec<_>>());
}

#[test]
fn parameters_grow_slower_than_outputs() {
    let count = |m| {
        let c = TrainConfig {
            bandlimit: m,
            ..TrainConfig::default()
        };
        generator_parameter_counts(&c).unwrap().iter().sum::<usize>() as f64
    };
    let ratio = count(100) / count(15);
    assert!(ratio < 5.0, "{ratio}");
}

#[test]
fn zero_iterations_leave_the_stack_unchanged() {
    let data = toy_dataset(4, 6);
    let mut g = gan(tiny_config(4, 2), &data);
    let before = (g.generators.clone(), g.discriminators.clone());
    g.train_forward_pass(&data, 0).unwrap();
    g.train_backward_pass(&data, 0).unwrap();
    assert_eq!(before, (g.generators.clone(), g.discriminators.clone()));
    assert_eq!(g.steps(), StepCounts::default());
}

#[test]
fn three_discriminator_updates_per_generator_update() {
    let data = toy_dataset(4, 6);
    for real_conditioning in [false, true] {
        let mut g = gan(
            TrainConfig {
                real_conditioning,
                ..tiny_config(4, 2)
            },
            &data,
        );
        g.train_forward_pass(&data, 4).unwrap();
        let s = g.steps();
        assert_eq!((s.generator, s.discriminator), (8, 24));
        assert_eq!(g.losses().len(), 16);
    }
}

#[test]
fn transfer_copies_matching_generators() {
    let data = toy_dataset(8, 6);
    let mut g = gan(tiny_config(8, 4), &data);
    g.train_forward_pass(&data, 2).unwrap();
    g.transfer_weights().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    // same input width: an exact copy
    for (src, dst) in [(1, 5), (2, 6)] {
        assert_eq!(g.generators[src], g.generators[dst]);
        assert_eq!(g.discriminators[src], g.discriminators[dst]);
        let x = gaussian(&mut rng, 4, 14);
        assert_eq!(g.generators[src].predict(&x).unwrap(), g.generators[dst].predict(&x).unwrap());
    }
    // the first generator has no conditioning input; its copy ignores it
    let z = gaussian(&mut rng, 4, 8);
    let cond = gaussian(&mut rng, 4, g.generators[3].output_dim());
    let widened = g.generator_input(4, z.clone(), Some(&cond));
    assert_eq!(g.generators[0].predict(&z).unwrap(), g.generators[4].predict(&widened).unwrap());

    let once = g.generators.clone();
    g.transfer_weights().unwrap();
    assert_eq!(once, g.generators);
}

#[test]
fn two_band_cascade_has_one_refining_generator() {
    let data = toy_dataset(4, 6);
    let mut g = gan(tiny_config(4, 2), &data);
    g.train_forward_pass(&data, 2).unwrap();
    g.transfer_weights().unwrap();
    assert_eq!(g.generators.len(), 3);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let z = gaussian(&mut rng, 3, 8);
    let cond = gaussian(&mut rng, 3, g.generators[1].output_dim());
    assert_eq!(
        g.generators[0].predict(&z).unwrap(),
        g.generators[2].predict(&g.generator_input(2, z.clone(), Some(&cond))).unwrap()
    );
}

#[test]
fn refinement_starts_from_the_forward_output() {
    let data = toy_dataset(8, 6);
    let mut g = gan(tiny_config(8, 4), &data);
    g.train_forward_pass(&data, 2).unwrap();
    g.transfer_weights().unwrap();
    // the copy of G1 shares its latent and ignores conditioning; copies of
    // G2, G3 see G1's and G2's outputs where the originals saw the band below
    let full = g.synthesize(4, 3, SynthesisMode::Full).unwrap();
    let fwd = g.synthesize(4, 3, SynthesisMode::ForwardOnly).unwrap();
    let band0 = &g.partition().bands()[0].indices;
    for (a, b) in full.iter().zip(&fwd) {
        for &i in band0 {
            assert_eq!(a.coeffs()[i], b.coeffs()[i]);
        }
    }
    let data2 = toy_dataset(4, 6);
    let mut g2 = gan(tiny_config(4, 2), &data2);
    g2.train_forward_pass(&data2, 2).unwrap();
    g2.transfer_weights().unwrap();
    assert_eq!(
        g2.synthesize(4, 3, SynthesisMode::Full).unwrap(),
        g2.synthesize(4, 3, SynthesisMode::ForwardOnly).unwrap()
    );
}

#[test]
fn zero_backward_rate_keeps_transferred_weights() {
    let data = toy_dataset(8, 6);
    let mut g = gan(
        TrainConfig {
            lr_backward: 0.0,
            ..tiny_config(8, 4)
        },
        &data,
    );
    g.train_forward_pass(&data, 2).unwrap();
    g.transfer_weights().unwrap();
    let transferred = g.generators.clone();
    g.train_backward_pass(&data, 3).unwrap();
    assert_eq!(transferred[4..], g.generators[4..]);
}

#[test]
fn synthesis_is_deterministic_and_covers_every_coefficient() {
    let data = toy_dataset(8, 6);
    let mut g = gan(tiny_config(8, 4), &data);
    g.train_forward_pass(&data, 2).unwrap();
    let a = g.synthesize(5, 99, SynthesisMode::Full).unwrap();
    let b = g.synthesize(5, 99, SynthesisMode::Full).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, g.synthesize(5, 100, SynthesisMode::Full).unwrap());
    assert!(g.synthesize(0, 1, SynthesisMode::Full).unwrap().is_empty());
    assert!(a.iter().all(|s| s.coeffs().len() == coeff_count(8)));

    for mode in [SynthesisMode::Full, SynthesisMode::ForwardOnly] {
        let sources = g.assembly_sources(mode);
        assert_eq!(sources.len(), 4);
        let mut written = vec![0usize; coeff_count(8)];
        for (band, _) in g.partition().bands().iter().zip(&sources) {
            for &i in &band.indices {
                written[i] += 1;
            }
        }
        assert!(written.iter().all(|&w| w == 1));
        for (b, &src) in sources.iter().enumerate() {
            assert_eq!(g.band_of(src), b);
        }
    }
    assert_eq!(g.assembly_sources(SynthesisMode::Full), vec![4, 5, 6, 3]);
    assert_eq!(g.chain_length(SynthesisMode::Full), 7);
    assert_eq!(g.chain_length(SynthesisMode::ForwardOnly), 4);

    // denormalized outputs stay within the training magnitude envelope
    for s in &a {
        for (c, scale) in s.coeffs().iter().zip(g.scale()) {
            assert!(c.abs() <= *scale);
        }
    }
}

#[test]
fn non_finite_training_is_reported() {
    let data = toy_dataset(4, 6);
    let mut g = gan(tiny_config(4, 2), &data);
    g.generator_mut(0).layers_mut()[2].bias[0] = f64::NAN;
    assert!(matches!(g.train_forward_pass(&data, 1), Err(Error::NonFinite(_))));
}

#[test]
fn mismatched_dataset_is_rejected() {
    let data = toy_dataset(4, 6);
    let other = toy_dataset(4, 2);
    let mut g = gan(tiny_config(4, 2), &data);
    assert!(g.train_forward_pass(&other, 1).is_err());
    assert!(g.train_forward_pass(&toy_dataset(5, 6), 1).is_err());
}

fn frozen_features(seed: u64) -> FeatureExtractor {
    let mut fe = FeatureExtractor::new(12, &mut ChaCha8Rng::seed_from_u64(seed));
    fe.freeze();
    fe
}

fn real_features(fe: &FeatureExtractor, data: &SmvDataset) -> Vec<Vec<f64>> {
    (0..data.len())
        .map(|r| {
            let smv = data.denormalize(&data.normalized().row(r).to_vec()).unwrap();
            let grid = inverse_sht(&smv, &dh_grid(smv.max_degree()));
            fe.extract(&grid_to_pointcloud(&grid)).unwrap()
        })
        .collect()
}

#[test]
fn regularizer_gradient_matches_finite_differences() {
    let data = toy_dataset(4, 6);
    let mut g = gan(tiny_config(4, 2), &data);
    g.train_forward_pass(&data, 3).unwrap();
    g.transfer_weights().unwrap();
    let fe = frozen_features(4);
    let targets = real_features(&fe, &data);
    let reg = SpatialRegularizer {
        features: &fe,
        targets: &targets,
    };
    let batch = g.regularizer_batch(targets.len(), 3);
    let (_, grads) = g.regularizer_gradients(&reg, &batch).unwrap();
    let h = 1e-6;
    // a probe in each generator's first and last layer
    for gen in 0..3 {
        for (layer, r, c) in [(0, 2, 1), (2, 1, 3)] {
            let probe = |delta: f64| {
                let mut shifted = g.clone();
                shifted.generator_mut(gen).layers_mut()[layer].weights[[r, c]] += delta;
                shifted.regularizer_gradients(&reg, &batch).unwrap().0
            };
            let fd = (probe(h) - probe(-h)) / (2.0 * h);
            let an = grads[gen].layers[layer].0[[r, c]];
            let rel = (fd - an).abs() / fd.abs().max(an.abs()).max(1e-8);
            assert!(rel < 1e-3, "G{} layer {layer}: fd {fd} analytic {an}", gen + 1);
        }
    }
}

#[test]
fn matched_features_give_zero_loss_and_no_update() {
    let data = toy_dataset(4, 6);
    let mut g = gan(tiny_config(4, 2), &data);
    let fe = frozen_features(5);
    let batch = g.regularizer_batch(1, 2);
    // targets equal to the batch's own features
    let outs = g.run_chain(&batch.noises, 3).unwrap();
    let mut coeffs = g.assemble(&outs, SynthesisMode::Full);
    for mut row in coeffs.rows_mut() {
        row.zip_mut_with(&ndarray::ArrayView1::from(g.scale()), |c, s| *c *= s);
    }
    let radii = crate::transform::BasisMatrix::cached(4).reconstruct_batch(&coeffs).unwrap();
    let dirs = dh_grid(4).directions();
    let targets: Vec<Vec<f64>> = radii
        .rows()
        .into_iter()
        .map(|row| {
            let pts = dirs.iter().zip(row).map(|(u, r)| [r * u[0], r * u[1], r * u[2]]).collect();
            fe.extract(&crate::geometry::PointCloud { points: pts }).unwrap()
        })
        .collect();
    let reg = SpatialRegularizer {
        features: &fe,
        targets: &targets,
    };
    let batch = RegularizerBatch {
        noises: batch.noises,
        targets: vec![0, 1],
    };
    let (loss, grads) = g.regularizer_gradients(&reg, &batch).unwrap();
    assert_eq!(loss, 0.0);
    assert!(grads.iter().all(|gr| gr.sq_norm() < 1e-20));
    let before = g.generators.clone();
    g.regularizer_finetune(&reg, 0).unwrap();
    assert_eq!(before, g.generators);
}

#[test]
fn regularizer_requires_frozen_extractor() {
    let data = toy_dataset(4, 6);
    let mut g = gan(tiny_config(4, 2), &data);
    let fe = FeatureExtractor::new(12, &mut ChaCha8Rng::seed_from_u64(0));
    let targets = vec![vec![0.0; 12]];
    let reg = SpatialRegularizer {
        features: &fe,
        targets: &targets,
    };
    assert!(g.regularizer_finetune(&reg, 1).is_err());
}

#[test]
fn regularizer_changes_every_generator() {
    let data = toy_dataset(4, 6);
    let mut g = gan(tiny_config(4, 2), &data);
    let fe = frozen_features(6);
    let targets = real_features(&fe, &data);
    let reg = SpatialRegularizer {
        features: &fe,
        targets: &targets,
    };
    let before = g.generators.clone();
    let report = g.regularizer_finetune(&reg, 2).unwrap();
    assert!(report.final_loss.is_finite() && report.final_loss > 0.0);
    for (a, b) in before.iter().zip(&g.generators) {
        assert_ne!(a, b);
    }
}

#[test]
fn checkpoint_round_trip_and_exact_resume() {
    let data = toy_dataset(4, 6);
    let fe = frozen_features(7);
    let targets = real_features(&fe, &data);
    let reg = SpatialRegularizer {
        features: &fe,
        targets: &targets,
    };
    let dir = tempfile::tempdir().unwrap();
    let mut full = gan(tiny_config(4, 2), &data);
    full.train(&data, Some(&reg), |s| {
        if s.completed_outer() == 1 {
            s.save(dir.path())?;
        }
        Ok(())
    })
    .unwrap();
    assert_eq!(full.completed_outer(), 2);

    let mut resumed = CascadeGan::load(dir.path()).unwrap();
    assert_eq!(resumed.completed_outer(), 1);
    resumed.train(&data, Some(&reg), |_| Ok(())).unwrap();
    assert_eq!(resumed.generators, full.generators);
    assert_eq!(resumed.discriminators, full.discriminators);
    assert_eq!(resumed.losses(), full.losses());
    assert_eq!(
        resumed.synthesize(3, 5, SynthesisMode::Full).unwrap(),
        full.synthesize(3, 5, SynthesisMode::Full).unwrap()
    );

    let dir2 = tempfile::tempdir().unwrap();
    full.save(dir2.path()).unwrap();
    let back = CascadeGan::load(dir2.path()).unwrap();
    assert_eq!(back.generators, full.generators);
    assert_eq!(back.scale(), full.scale());
    assert_eq!(back.steps(), full.steps());
}

#[test]
fn loading_an_empty_directory_fails() {
    let dir = tempfile::tempdir().unwrap();
    assert!(CascadeGan::load(dir.path()).is_err());
}

#[test]
fn loss_log_round_trip() {
    let records = vec![
        LossRecord {
            phase: Phase::Forward,
            iter: 0,
            net: "D1".into(),
            loss: 1.386,
        },
        LossRecord {
            phase: Phase::Regularizer,
            iter: 4,
            net: "all".into(),
            loss: 0.25,
        },
    ];
    let mut buf = Vec::new();
    checkpoint::write_loss_csv(&mut buf, &records).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("phase,iter,net,loss\nforward,0,D1,1.386\n"));
    assert_eq!(checkpoint::read_loss_csv(&text).unwrap(), records);
}

#[test]
fn band_matrix_gathers_canonical_columns() {
    let data = toy_dataset(4, 3);
    let p = partition_bands(4, 2).unwrap();
    let m: Array2<f64> = p.bands()[1].gather(data.normalized());
    assert_eq!(m.ncols(), p.bands()[1].len());
    assert_eq!(m[[2, 0]], data.normalized()[[2, p.bands()[1].indices[0]]]);
}
