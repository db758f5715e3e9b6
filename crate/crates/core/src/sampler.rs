//! Conversions between meshes, point clouds and polar radius grids.
//!
//! Meshes are sampled by casting rays from the vertex centroid along every
//! grid direction. Even azimuth columns keep the first hit; odd columns,
//! which sit half a stage-one cell further round in azimuth, keep the last
//! hit. Interleaving the two stages gives one polar function that still
//! captures outer surfaces of shapes that are not star-shaped.

use ndarray::Array2;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{cross, dot, norm, sub, Point3, PointCloud, TriangleMesh};
use crate::kdtree::KdTree;
use crate::sh::{dh_grid, SphericalGrid};

/// Largest vertex distance from the origin after [`normalize_mesh`].
pub const NORMALIZED_RADIUS: f64 = 0.95;

/// Fraction of missed rays above which a shape is treated as non-polar.
pub const MAX_MISS_FRACTION: f64 = 0.30;

/// Fraction of grid nodes that may be left for interpolation in
/// [`pointcloud_to_grid`].
pub const MAX_UNFILLED_FRACTION: f64 = 0.20;

const BARY_EPS: f64 = 1e-9;
const HIT_EPS: f64 = 1e-9;

/// Centres the vertex centroid at the origin and scales uniformly so the
/// farthest vertex lies at [`NORMALIZED_RADIUS`].
pub fn normalize_mesh(mesh: &TriangleMesh) -> Result<TriangleMesh> {
    let c = mesh.vertex_centroid();
    let shifted: Vec<Point3> = mesh.vertices.iter().map(|&v| sub(v, c)).collect();
    let max = shifted.iter().map(|&v| norm(v)).fold(0.0, f64::max);
    if max <= f64::EPSILON * (1.0 + norm(c)) {
        return Err(Error::DegenerateMesh("all vertices coincide".into()));
    }
    let s = NORMALIZED_RADIUS / max;
    let vertices = shifted.into_iter().map(|v| v.map(|x| x * s)).collect();
    TriangleMesh::new(vertices, mesh.faces.clone())
}

/// Result of ray casting one mesh.
#[derive(Debug, Clone)]
pub struct RaycastOutcome {
    pub grid: SphericalGrid,
    /// Grid directions that hit no triangle (stored as `r = 0`).
    pub misses: usize,
}

impl RaycastOutcome {
    pub fn miss_fraction(&self) -> f64 {
        self.misses as f64 / self.grid.node_count() as f64
    }

    /// Whether the shape is usable for a dataset (miss fraction within bounds).
    pub fn is_polar(&self) -> bool {
        self.miss_fraction() <= MAX_MISS_FRACTION
    }
}

struct Tri {
    v0: Point3,
    e1: Point3,
    e2: Point3,
}

/// Möller–Trumbore intersection distance along `dir` from the origin.
#[inline]
fn intersect(tri: &Tri, dir: Point3) -> Option<f64> {
    let p = cross(dir, tri.e2);
    let det = dot(tri.e1, p);
    if det.abs() < 1e-15 {
        return None;
    }
    let inv = 1.0 / det;
    let s = [-tri.v0[0], -tri.v0[1], -tri.v0[2]];
    let u = dot(s, p) * inv;
    if !(-BARY_EPS..=1.0 + BARY_EPS).contains(&u) {
        return None;
    }
    let q = cross(s, tri.e1);
    let v = dot(dir, q) * inv;
    if v < -BARY_EPS || u + v > 1.0 + BARY_EPS {
        return None;
    }
    let t = dot(tri.e2, q) * inv;
    (t > HIT_EPS).then_some(t)
}

/// Ray-casts a normalized mesh on the degree-`max_degree` grid.
///
/// Always fills every node; directions without a hit get `r = 0` and are
/// counted in [`RaycastOutcome::misses`].
pub fn raycast_sample(mesh: &TriangleMesh, max_degree: usize) -> RaycastOutcome {
    let tris: Vec<Tri> = mesh
        .faces
        .iter()
        .map(|f| {
            let (a, b, c) = (mesh.vertices[f[0]], mesh.vertices[f[1]], mesh.vertices[f[2]]);
            Tri {
                v0: a,
                e1: sub(b, a),
                e2: sub(c, a),
            }
        })
        .collect();
    let template = dh_grid(max_degree);
    let n = template.size();

    let rows: Vec<Vec<Option<f64>>> = (0..n)
        .into_par_iter()
        .map(|j| {
            (0..n)
                .map(|k| {
                    let dir = template.direction(j, k);
                    let hits = tris.iter().filter_map(|t| intersect(t, dir));
                    if k % 2 == 0 {
                        hits.reduce(f64::min)
                    } else {
                        hits.reduce(f64::max)
                    }
                })
                .collect()
        })
        .collect();

    let mut radii = Array2::zeros((n, n));
    let mut misses = 0;
    for (j, row) in rows.into_iter().enumerate() {
        for (k, hit) in row.into_iter().enumerate() {
            match hit {
                Some(r) => radii[[j, k]] = r,
                None => misses += 1,
            }
        }
    }
    RaycastOutcome {
        grid: template.with_radii(radii),
        misses,
    }
}

/// Cartesian points `r * (sin t cos p, sin t sin p, cos t)` for every node with `r != 0`.
pub fn grid_to_pointcloud(grid: &SphericalGrid) -> PointCloud {
    let mut points = Vec::with_capacity(grid.node_count());
    for j in 0..grid.thetas.len() {
        for k in 0..grid.phis.len() {
            let r = grid.radii[[j, k]];
            if r != 0.0 {
                let d = grid.direction(j, k);
                points.push([r * d[0], r * d[1], r * d[2]]);
            }
        }
    }
    if points.is_empty() {
        log::warn!("grid has no nonzero radii; point cloud is empty");
    }
    PointCloud { points }
}

/// Resamples a point cloud onto the degree-`max_degree` grid.
///
/// Each node takes the radius of the angularly nearest point when that point
/// lies within one azimuth cell (`2 pi / n`); remaining nodes are filled by
/// repeatedly averaging their filled neighbours. The result does not depend
/// on the order of the input points.
pub fn pointcloud_to_grid(cloud: &PointCloud, max_degree: usize) -> Result<SphericalGrid> {
    cloud.require_nonempty()?;
    // canonical order makes index-based tie breaking order independent
    let mut pts: Vec<Point3> = cloud.points.iter().copied().filter(|&p| norm(p) > 0.0).collect();
    if pts.is_empty() {
        return Err(Error::EmptyCloud);
    }
    pts.sort_by(|a, b| {
        a[0].total_cmp(&b[0])
            .then(a[1].total_cmp(&b[1]))
            .then(a[2].total_cmp(&b[2]))
    });
    let radii: Vec<f64> = pts.iter().map(|&p| norm(p)).collect();
    let dirs: Vec<Point3> = pts
        .iter()
        .zip(&radii)
        .map(|(p, r)| [p[0] / r, p[1] / r, p[2] / r])
        .collect();
    let tree = KdTree::new(&dirs);

    let template = dh_grid(max_degree);
    let n = template.size();
    let max_angle = 2.0 * std::f64::consts::PI / n as f64;
    let max_chord2 = 2.0 - 2.0 * max_angle.cos();

    let mut values: Vec<Option<f64>> = (0..n * n)
        .into_par_iter()
        .map(|node| {
            let dir = template.direction(node / n, node % n);
            let (idx, d2) = tree.nearest(dir).expect("nonempty");
            (d2 <= max_chord2).then(|| radii[idx])
        })
        .collect();

    let unfilled = values.iter().filter(|v| v.is_none()).count();
    if unfilled as f64 > MAX_UNFILLED_FRACTION * (n * n) as f64 {
        return Err(Error::SparseCloud {
            bandlimit: max_degree,
            unfilled,
            total: n * n,
        });
    }
    fill_holes(&mut values, n);

    let radii = Array2::from_shape_vec((n, n), values.into_iter().map(|v| v.unwrap_or(0.0)).collect())
        .expect("n*n values");
    Ok(template.with_radii(radii))
}

/// Jacobi-style passes: each empty node takes the mean of its filled
/// 8-neighbours from the previous pass (azimuth wraps, polar rows clamp).
fn fill_holes(values: &mut [Option<f64>], n: usize) {
    loop {
        let snapshot = values.to_vec();
        let mut changed = false;
        let mut remaining = false;
        for j in 0..n {
            for k in 0..n {
                if snapshot[j * n + k].is_some() {
                    continue;
                }
                let (mut sum, mut count) = (0.0, 0);
                for dj in [-1i64, 0, 1] {
                    let jj = j as i64 + dj;
                    if jj < 0 || jj >= n as i64 {
                        continue;
                    }
                    for dk in [-1i64, 0, 1] {
                        let kk = (k as i64 + dk).rem_euclid(n as i64);
                        if let Some(v) = snapshot[jj as usize * n + kk as usize] {
                            sum += v;
                            count += 1;
                        }
                    }
                }
                if count > 0 {
                    values[j * n + k] = Some(sum / count as f64);
                    changed = true;
                } else {
                    remaining = true;
                }
            }
        }
        if !remaining || !changed {
            break;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes::{box_mesh, box_radius, icosphere, random_direction};
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn normalize_offset_cube() {
        let cube = box_mesh([0.5; 3], [5.0, 5.0, 5.0], 1);
        let n = normalize_mesh(&cube).unwrap();
        let c = n.vertex_centroid();
        assert!(c.iter().all(|x| x.abs() < 1e-12));
        for v in &n.vertices {
            let d = norm(*v);
            // box_mesh repeats corner and edge vertices, but every vertex of a
            // single-cell face is a corner
            assert!((d - NORMALIZED_RADIUS).abs() < 1e-12, "{d}");
        }
    }

    #[test]
    fn normalize_is_idempotent_and_rescales_sphere() {
        let mut sphere = icosphere(2);
        for v in &mut sphere.vertices {
            *v = v.map(|x| 2.0 * x);
        }
        let once = normalize_mesh(&sphere).unwrap();
        assert!(once.vertices.iter().all(|&v| (norm(v) - 0.95).abs() < 1e-12));
        let twice = normalize_mesh(&once).unwrap();
        for (a, b) in once.vertices.iter().zip(&twice.vertices) {
            assert!(norm(sub(*a, *b)) < 1e-12);
        }
    }

    #[test]
    fn normalize_rejects_collapsed_mesh() {
        let m = TriangleMesh::new(vec![[1.0, 1.0, 1.0]; 3], vec![[0, 1, 2]]).unwrap();
        assert!(normalize_mesh(&m).is_err());
    }

    #[test]
    fn raycast_sphere() {
        let mesh = normalize_mesh(&icosphere(3)).unwrap();
        let out = raycast_sample(&mesh, 8);
        assert_eq!(out.misses, 0);
        assert_eq!(out.grid.node_count(), 18 * 18);
        for &r in out.grid.radii.iter() {
            assert!((r - 0.95).abs() < 0.02, "{r}");
        }
    }

    #[test]
    fn raycast_box_matches_analytic_radius() {
        let half = [0.3, 0.5, 0.7];
        let mesh = normalize_mesh(&box_mesh(half, [0.0; 3], 2)).unwrap();
        let scale = NORMALIZED_RADIUS / norm(half);
        let scaled = half.map(|h| h * scale);
        let out = raycast_sample(&mesh, 8);
        assert_eq!(out.misses, 0);
        for j in 0..out.grid.size() {
            for k in 0..out.grid.size() {
                let expected = box_radius(scaled, out.grid.direction(j, k));
                assert!((out.grid.radii[[j, k]] - expected).abs() < 0.02);
            }
        }
    }

    #[test]
    fn stage_two_keeps_last_hit() {
        // two nested spheres: even columns see the inner one, odd columns the outer
        let inner = icosphere(3);
        let mut outer = icosphere(3);
        for v in &mut outer.vertices {
            *v = v.map(|x| 2.0 * x);
        }
        let offset = inner.vertices.len();
        let mut vertices = inner.vertices.clone();
        vertices.extend(outer.vertices);
        let mut faces = inner.faces.clone();
        faces.extend(outer.faces.iter().map(|f| f.map(|i| i + offset)));
        let mesh = normalize_mesh(&TriangleMesh::new(vertices, faces).unwrap()).unwrap();
        let out = raycast_sample(&mesh, 4);
        let r_out = out.grid.radii[[3, 1]];
        let r_in = out.grid.radii[[3, 0]];
        assert!(r_out > 1.8 * r_in, "{r_in} {r_out}");
    }

    #[test]
    fn open_mesh_reports_misses() {
        let tri = TriangleMesh::new(
            vec![[1.0, -1.0, -1.0], [1.0, 1.0, -1.0], [1.0, 0.0, 1.0], [-0.5, 0.0, 0.0]],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let out = raycast_sample(&normalize_mesh(&tri).unwrap(), 4);
        assert!(out.misses > 0);
        assert!(!out.is_polar());
        assert_eq!(out.grid.node_count(), 100);
    }

    #[test]
    fn grid_to_cloud_drops_zero_radii() {
        let g = dh_grid(8);
        let ones = g.with_radii(Array2::ones(g.radii.dim()));
        let cloud = grid_to_pointcloud(&ones);
        assert_eq!(cloud.len(), 324);
        assert!(cloud.points.iter().all(|&p| (norm(p) - 1.0).abs() < 1e-12));
        assert!(grid_to_pointcloud(&g).is_empty());
    }

    #[test]
    fn grid_aligned_cloud_is_recovered_exactly() {
        let g = dh_grid(6);
        let mut radii = Array2::zeros(g.radii.dim());
        for j in 0..g.size() {
            for k in 0..g.size() {
                radii[[j, k]] = 0.5 + 0.3 * (g.thetas[j] * 2.0).sin() * g.phis[k].cos();
            }
        }
        let src = g.with_radii(radii);
        // drop the polar row: all its nodes share one direction
        let mut cloud = grid_to_pointcloud(&src);
        cloud.points.drain(..g.size());
        let back = pointcloud_to_grid(&cloud, 6).unwrap();
        for j in 1..g.size() {
            for k in 0..g.size() {
                let (a, b) = (back.radii[[j, k]], src.radii[[j, k]]);
                assert!((a - b).abs() <= 1e-15, "{a} {b}");
            }
        }
    }

    #[test]
    fn dense_sphere_cloud() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let pts = (0..10_000).map(|_| random_direction(&mut rng).map(|x| 0.8 * x)).collect();
        let grid = pointcloud_to_grid(&PointCloud::new(pts).unwrap(), 8).unwrap();
        assert!(grid.radii.iter().all(|&r| (r - 0.8).abs() < 0.01));
    }

    #[test]
    fn sparse_cloud_is_rejected() {
        let cloud = PointCloud::new(vec![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]).unwrap();
        assert!(matches!(pointcloud_to_grid(&cloud, 16), Err(Error::SparseCloud { .. })));
        assert!(matches!(pointcloud_to_grid(&PointCloud::default(), 4), Err(Error::EmptyCloud)));
    }

    #[test]
    fn cloud_order_does_not_matter() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut pts: Vec<Point3> = (0..3000)
            .map(|_| {
                let d = random_direction(&mut rng);
                let r = 0.5 + 0.2 * d[0] * d[1];
                d.map(|x| r * x)
            })
            .collect();
        // exact duplicates in direction with different radii exercise tie breaking
        let dup = pts[10].map(|x| 1.1 * x);
        pts.push(dup);
        let base = pointcloud_to_grid(&PointCloud::new(pts.clone()).unwrap(), 8).unwrap();
        for _ in 0..5 {
            pts.shuffle(&mut rng);
            let g = pointcloud_to_grid(&PointCloud::new(pts.clone()).unwrap(), 8).unwrap();
            assert_eq!(g.radii, base.radii);
        }
    }
}
