//! Seeded procedural shape families for toy training and evaluation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::TriangleMesh;
use crate::shapes::{box_mesh, ellipsoid_mesh};

pub const ELLIPSOID_AXIS_RANGE: (f64, f64) = (0.4, 0.9);
pub const BOX_HALF_RANGE: (f64, f64) = (0.3, 0.8);

const ELLIPSOID_SUBDIVISIONS: usize = 3;
const BOX_FACE_DIVISIONS: usize = 4;

fn draw3(rng: &mut impl Rng, (lo, hi): (f64, f64)) -> [f64; 3] {
    [0; 3].map(|_| rng.random_range(lo..=hi))
}

/// Axis-aligned ellipsoids centred at the origin, semi-axes drawn
/// independently from [`ELLIPSOID_AXIS_RANGE`].
pub fn ellipsoids(count: usize, seed: u64) -> Vec<TriangleMesh> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| ellipsoid_mesh(draw3(&mut rng, ELLIPSOID_AXIS_RANGE), [0.0; 3], ELLIPSOID_SUBDIVISIONS))
        .collect()
}

/// Axis-aligned boxes centred at the origin, half-extents drawn from
/// [`BOX_HALF_RANGE`].
pub fn boxes(count: usize, seed: u64) -> Vec<TriangleMesh> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| box_mesh(draw3(&mut rng, BOX_HALF_RANGE), [0.0; 3], BOX_FACE_DIVISIONS))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::norm;

    #[test]
    fn families_are_seeded_and_in_range() {
        let a = ellipsoids(5, 1);
        assert_eq!(a.len(), 5);
        assert_eq!(a[3].vertices, ellipsoids(5, 1)[3].vertices);
        assert_ne!(a[0].vertices, ellipsoids(5, 2)[0].vertices);
        for m in &a {
            let r = m.vertices.iter().map(|&v| norm(v)).fold(0.0, f64::max);
            assert!((0.4..=0.9 + 1e-12).contains(&r));
        }
        for m in boxes(4, 3) {
            for v in &m.vertices {
                assert!(v.iter().all(|c| c.abs() <= 0.8));
            }
        }
    }
}
