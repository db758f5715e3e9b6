//! Synthetic shape families used for datasets, feature pretraining and tests.

use std::collections::HashMap;

use rand::Rng;

use crate::geometry::{norm, Point3, PointCloud, TriangleMesh};

/// Unit-radius icosphere with `subdivisions` rounds of 4-way splitting
/// (20 * 4^s faces).
pub fn icosphere(subdivisions: usize) -> TriangleMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut vertices: Vec<Point3> = [
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ]
    .iter()
    .map(|&v| unit(v))
    .collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut midpoints: HashMap<(usize, usize), usize> = HashMap::new();
        let mut mid = |a: usize, b: usize, verts: &mut Vec<Point3>| -> usize {
            let key = (a.min(b), a.max(b));
            *midpoints.entry(key).or_insert_with(|| {
                let (p, q) = (verts[a], verts[b]);
                verts.push(unit([(p[0] + q[0]) / 2.0, (p[1] + q[1]) / 2.0, (p[2] + q[2]) / 2.0]));
                verts.len() - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let ab = mid(a, b, &mut vertices);
            let bc = mid(b, c, &mut vertices);
            let ca = mid(c, a, &mut vertices);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    TriangleMesh::new(vertices, faces).expect("icosphere is valid")
}

fn unit(v: Point3) -> Point3 {
    let n = norm(v);
    [v[0] / n, v[1] / n, v[2] / n]
}

/// Icosphere scaled by the semi-axes `(a, b, c)` and translated to `center`.
pub fn ellipsoid_mesh(axes: [f64; 3], center: Point3, subdivisions: usize) -> TriangleMesh {
    let mut mesh = icosphere(subdivisions);
    for v in &mut mesh.vertices {
        for i in 0..3 {
            v[i] = v[i] * axes[i] + center[i];
        }
    }
    mesh
}

/// Axis-aligned box with the given half-extents, each face split into
/// `per_side^2` quads (two triangles each).
pub fn box_mesh(half: [f64; 3], center: Point3, per_side: usize) -> TriangleMesh {
    let n = per_side.max(1);
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    // (normal axis, sign)
    for axis in 0..3 {
        for sign in [-1.0, 1.0] {
            let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
            let base = vertices.len();
            for i in 0..=n {
                for j in 0..=n {
                    let mut p = [0.0; 3];
                    p[axis] = sign * half[axis];
                    p[u] = half[u] * (2.0 * i as f64 / n as f64 - 1.0);
                    p[v] = half[v] * (2.0 * j as f64 / n as f64 - 1.0);
                    vertices.push([p[0] + center[0], p[1] + center[1], p[2] + center[2]]);
                }
            }
            let at = |i: usize, j: usize| base + i * (n + 1) + j;
            for i in 0..n {
                for j in 0..n {
                    faces.push([at(i, j), at(i + 1, j), at(i + 1, j + 1)]);
                    faces.push([at(i, j), at(i + 1, j + 1), at(i, j + 1)]);
                }
            }
        }
    }
    TriangleMesh::new(vertices, faces).expect("box is valid")
}

/// Distance from the centre of an axis-aligned box to its surface along `dir`.
pub fn box_radius(half: [f64; 3], dir: Point3) -> f64 {
    (0..3)
        .filter(|&i| dir[i] != 0.0)
        .map(|i| half[i] / dir[i].abs())
        .fold(f64::INFINITY, f64::min)
}

/// Distance from the centre of an axis-aligned ellipsoid to its surface along `dir`.
pub fn ellipsoid_radius(axes: [f64; 3], dir: Point3) -> f64 {
    let s: f64 = (0..3).map(|i| (dir[i] / axes[i]).powi(2)).sum();
    1.0 / s.sqrt()
}

/// `n` near-uniform unit directions on a Fibonacci spiral.
pub fn fibonacci_directions(n: usize) -> Vec<Point3> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let r = (1.0 - z * z).sqrt();
            let a = golden * i as f64;
            [r * a.cos(), r * a.sin(), z]
        })
        .collect()
}

/// Points on a star-shaped surface given its radial function, one per direction.
pub fn radial_cloud(dirs: &[Point3], radius: impl Fn(Point3) -> f64) -> PointCloud {
    let points = dirs
        .iter()
        .map(|&d| {
            let r = radius(d);
            [d[0] * r, d[1] * r, d[2] * r]
        })
        .collect();
    PointCloud { points }
}

/// Uniform random unit direction.
pub fn random_direction(rng: &mut impl Rng) -> Point3 {
    loop {
        let v = [
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        ];
        let n = norm(v);
        if n > 1e-6 && n <= 1.0 {
            return [v[0] / n, v[1] / n, v[2] / n];
        }
    }
}
