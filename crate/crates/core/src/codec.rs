//! Shape ↔ SMV conversion built from the sampler and the transforms.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::geometry::{cross, norm, sub, PointCloud, TriangleMesh};
use crate::metrics::chamfer_normalized;
use crate::sampler::{grid_to_pointcloud, normalize_mesh, pointcloud_to_grid, raycast_sample};
use crate::sh::{dh_grid, forward_sht, inverse_sht, Smv};

/// An encoded mesh together with its ray-casting statistics.
#[derive(Debug, Clone)]
pub struct EncodedMesh {
    pub smv: Smv,
    pub misses: usize,
    pub nodes: usize,
}

impl EncodedMesh {
    pub fn miss_fraction(&self) -> f64 {
        self.misses as f64 / self.nodes as f64
    }
}

/// normalize → ray cast → forward transform.
pub fn encode_mesh(mesh: &TriangleMesh, max_degree: usize) -> Result<EncodedMesh> {
    let normalized = normalize_mesh(mesh)?;
    let cast = raycast_sample(&normalized, max_degree);
    Ok(EncodedMesh {
        smv: forward_sht(&cast.grid)?,
        misses: cast.misses,
        nodes: cast.grid.node_count(),
    })
}

pub fn encode_cloud(cloud: &PointCloud, max_degree: usize) -> Result<Smv> {
    forward_sht(&pointcloud_to_grid(cloud, max_degree)?)
}

/// Radii on the SMV's own grid, as a point cloud (zero radii dropped).
pub fn decode(smv: &Smv) -> PointCloud {
    grid_to_pointcloud(&inverse_sht(smv, &dh_grid(smv.max_degree())))
}

/// Area-weighted random surface samples of a mesh.
pub fn sample_surface(mesh: &TriangleMesh, count: usize, seed: u64) -> PointCloud {
    let areas: Vec<f64> = mesh
        .faces
        .iter()
        .map(|f| {
            let (a, b, c) = (mesh.vertices[f[0]], mesh.vertices[f[1]], mesh.vertices[f[2]]);
            0.5 * norm(cross(sub(b, a), sub(c, a)))
        })
        .collect();
    let mut cumulative = Vec::with_capacity(areas.len());
    let mut acc = 0.0;
    for a in &areas {
        acc += a;
        cumulative.push(acc);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = (0..count)
        .map(|_| {
            let t = rng.random_range(0.0..acc);
            let fi = cumulative.partition_point(|&c| c < t).min(areas.len() - 1);
            let f = mesh.faces[fi];
            let (a, b, c) = (mesh.vertices[f[0]], mesh.vertices[f[1]], mesh.vertices[f[2]]);
            let (mut u, mut v) = (rng.random_range(0.0..1.0), rng.random_range(0.0..1.0));
            if u + v > 1.0 {
                u = 1.0 - u;
                v = 1.0 - v;
            }
            [0, 1, 2].map(|i| a[i] + u * (b[i] - a[i]) + v * (c[i] - a[i]))
        })
        .collect();
    PointCloud { points }
}

/// Input accepted by [`roundtrip_error`].
#[derive(Debug, Clone, Copy)]
pub enum Shape<'a> {
    Cloud(&'a PointCloud),
    Mesh(&'a TriangleMesh),
}

/// Surface samples per mesh used as the reference in [`roundtrip_error`].
pub const ROUNDTRIP_SURFACE_SAMPLES: usize = 4000;

/// Normalized Chamfer distance between a shape and its decoded SMV.
///
/// Clouds are compared with their own points; meshes (after normalization)
/// with seeded area-weighted surface samples.
pub fn roundtrip_error(shape: Shape<'_>, max_degree: usize) -> Result<f64> {
    match shape {
        Shape::Cloud(cloud) => {
            let smv = encode_cloud(cloud, max_degree)?;
            chamfer_normalized(cloud, &decode(&smv))
        }
        Shape::Mesh(mesh) => {
            let normalized = normalize_mesh(mesh)?;
            let smv = encode_mesh(&normalized, max_degree)?.smv;
            let reference = sample_surface(&normalized, ROUNDTRIP_SURFACE_SAMPLES, 0);
            chamfer_normalized(&reference, &decode(&smv))
        }
    }
}
