//! Glue shared by the command-line tool and end-to-end tests: dataset
//! encoding, feature pretraining on procedural shapes, and baselines.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::codec::{decode, encode_mesh};
use crate::error::{Error, Result};
use crate::feature::{FeatureExtractor, PretrainReport};
use crate::geometry::{PointCloud, TriangleMesh};
use crate::sh::Smv;
use crate::synthetic::{boxes, ellipsoids};

/// Epoch cap for [`pretrain_on_synthetic`].
pub const PRETRAIN_MAX_EPOCHS: usize = 60;

/// Encodes meshes, refusing any whose ray cast misses too often.
pub fn encode_all(meshes: &[TriangleMesh], max_degree: usize) -> Result<Vec<Smv>> {
    meshes
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let enc = encode_mesh(m, max_degree)?;
            if enc.miss_fraction() > crate::sampler::MAX_MISS_FRACTION {
                return Err(Error::DegenerateMesh(format!(
                    "mesh {i}: {:.0}% of rays missed",
                    100.0 * enc.miss_fraction()
                )));
            }
            Ok(enc.smv)
        })
        .collect()
}

pub fn decode_all(smvs: &[Smv]) -> Vec<PointCloud> {
    smvs.iter().map(decode).collect()
}

/// Trains and freezes a feature extractor on decoded ellipsoids (label 0)
/// versus boxes (label 1), `per_class` shapes each, at `max_degree`.
pub fn pretrain_on_synthetic(
    max_degree: usize,
    per_class: usize,
    feature_dim: usize,
    seed: u64,
) -> Result<(FeatureExtractor, PretrainReport)> {
    let mut labelled = Vec::with_capacity(2 * per_class);
    for (label, meshes) in [ellipsoids(per_class, seed), boxes(per_class, seed.wrapping_add(1))]
        .into_iter()
        .enumerate()
    {
        for smv in encode_all(&meshes, max_degree)? {
            labelled.push((decode(&smv), label));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fe = FeatureExtractor::new(feature_dim, &mut rng);
    let report = fe.pretrain(&labelled, PRETRAIN_MAX_EPOCHS, seed)?;
    Ok((fe, report))
}

pub fn features_of(fe: &FeatureExtractor, clouds: &[PointCloud]) -> Result<Vec<Vec<f64>>> {
    clouds.iter().map(|c| fe.extract(c)).collect()
}

/// SMVs with every coefficient uniform in `[-scale_i, scale_i]`: what an
/// untrained generator with uniform outputs would produce.
pub fn random_smvs(scale: &[f64], max_degree: usize, count: usize, seed: u64) -> Result<Vec<Smv>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let coeffs = scale.iter().map(|&s| s * rng.random_range(-1.0..=1.0)).collect();
            Smv::new(max_degree, coeffs)
        })
        .collect()
}
