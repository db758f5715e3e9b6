//! Differentiable map between SMVs and grid radii.
//!
//! Reconstruction is a matrix-vector product `r = B g` with
//! `B[node, lm] = Y_l^m(theta_node, phi_node)`, and the gradient of any loss
//! with respect to the moments is the transposed product
//! `dL/dg = B^T dL/dr`, an unweighted sum over grid nodes.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::sh::{coeff_count, dh_grid, LegendreTable, Smv};

/// Above this degree the basis is stored in `f32` (a degree-100 basis is
/// 40804 x 10201 entries). Reconstructions from an `f32` basis carry about
/// seven significant digits.
pub const F64_BASIS_MAX_DEGREE: usize = 32;

#[derive(Debug, Clone)]
enum Storage {
    F64(Array2<f64>),
    F32(Array2<f32>),
}

/// Real spherical harmonics sampled at every grid node, rows in the
/// row-major node order of [`crate::SphericalGrid::radii_vec`].
#[derive(Debug, Clone)]
pub struct BasisMatrix {
    max_degree: usize,
    storage: Storage,
}

impl BasisMatrix {
    pub fn new(max_degree: usize) -> Self {
        let grid = dh_grid(max_degree);
        let n = grid.size();
        let cols = coeff_count(max_degree);
        let rows: Vec<Vec<f64>> = grid
            .thetas
            .par_iter()
            .flat_map_iter(|&theta| {
                let table = LegendreTable::new(max_degree, theta.cos());
                grid.phis.iter().map(move |&phi| {
                    let mut row = vec![0.0; cols];
                    for l in 0..=max_degree {
                        let base = l * l + l;
                        row[base] = table.get(l, 0);
                        for m in 1..=l {
                            let p = std::f64::consts::SQRT_2 * table.get(l, m);
                            let (s, c) = (m as f64 * phi).sin_cos();
                            row[base + m] = p * c;
                            row[base - m] = p * s;
                        }
                    }
                    row
                })
                .collect::<Vec<_>>()
            })
            .collect();
        let flat: Vec<f64> = rows.into_iter().flatten().collect();
        let dense = Array2::from_shape_vec((n * n, cols), flat).expect("rows x cols");
        let storage = if max_degree > F64_BASIS_MAX_DEGREE {
            Storage::F32(dense.mapv(|v| v as f32))
        } else {
            Storage::F64(dense)
        };
        Self { max_degree, storage }
    }

    /// Shared instance for `max_degree`, built once per process.
    pub fn cached(max_degree: usize) -> Arc<BasisMatrix> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<BasisMatrix>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(Default::default);
        let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
        guard
            .entry(max_degree)
            .or_insert_with(|| Arc::new(BasisMatrix::new(max_degree)))
            .clone()
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    pub fn node_count(&self) -> usize {
        match &self.storage {
            Storage::F64(m) => m.nrows(),
            Storage::F32(m) => m.nrows(),
        }
    }

    pub fn coeff_count(&self) -> usize {
        coeff_count(self.max_degree)
    }

    #[inline]
    pub fn get(&self, node: usize, col: usize) -> f64 {
        match &self.storage {
            Storage::F64(m) => m[[node, col]],
            Storage::F32(m) => m[[node, col]] as f64,
        }
    }

    /// `f64` view of the matrix; `None` for the `f32`-backed high-degree basis.
    pub fn as_f64(&self) -> Option<ArrayView2<'_, f64>> {
        match &self.storage {
            Storage::F64(m) => Some(m.view()),
            Storage::F32(_) => None,
        }
    }

    /// Radii `B g` in row-major node order.
    pub fn reconstruct(&self, smv: &Smv) -> Result<Vec<f64>> {
        if smv.max_degree() != self.max_degree {
            return Err(Error::BandlimitMismatch {
                expected: self.max_degree,
                got: smv.max_degree(),
            });
        }
        let g = smv.coeffs();
        Ok((0..self.node_count())
            .into_par_iter()
            .map(|n| self.row_dot(n, g))
            .collect())
    }

    /// `dL/dg = B^T dL/dr`.
    pub fn backprop_to_smv(&self, grad_radii: &[f64]) -> Result<Vec<f64>> {
        if grad_radii.len() != self.node_count() {
            return Err(Error::DimensionMismatch {
                expected: self.node_count(),
                got: grad_radii.len(),
                context: "radius gradient length",
            });
        }
        Ok((0..self.coeff_count())
            .into_par_iter()
            .map(|c| {
                grad_radii
                    .iter()
                    .enumerate()
                    .map(|(n, &v)| self.get(n, c) * v)
                    .sum()
            })
            .collect())
    }

    /// Row-batched [`BasisMatrix::reconstruct`]: `(batch x coeffs) -> (batch x nodes)`.
    pub fn reconstruct_batch(&self, coeffs: &Array2<f64>) -> Result<Array2<f64>> {
        self.check_cols(coeffs.ncols(), "SMV batch width")?;
        Ok(match &self.storage {
            Storage::F64(m) => coeffs.dot(&m.t()),
            Storage::F32(m) => coeffs.dot(&m.mapv(f64::from).t()),
        })
    }

    /// Row-batched [`BasisMatrix::backprop_to_smv`]: `(batch x nodes) -> (batch x coeffs)`.
    pub fn backprop_batch(&self, grad_radii: &Array2<f64>) -> Result<Array2<f64>> {
        if grad_radii.ncols() != self.node_count() {
            return Err(Error::DimensionMismatch {
                expected: self.node_count(),
                got: grad_radii.ncols(),
                context: "radius gradient batch width",
            });
        }
        Ok(match &self.storage {
            Storage::F64(m) => grad_radii.dot(m),
            Storage::F32(m) => grad_radii.dot(&m.mapv(f64::from)),
        })
    }

    /// Per-row and per-column sums, for comparing bases across builds.
    pub fn checksums(&self) -> (Vec<f64>, Vec<f64>) {
        let rows = (0..self.node_count())
            .map(|n| (0..self.coeff_count()).map(|c| self.get(n, c)).sum())
            .collect();
        let cols = (0..self.coeff_count())
            .map(|c| (0..self.node_count()).map(|n| self.get(n, c)).sum())
            .collect();
        (rows, cols)
    }

    fn check_cols(&self, got: usize, context: &'static str) -> Result<()> {
        if got != self.coeff_count() {
            return Err(Error::DimensionMismatch {
                expected: self.coeff_count(),
                got,
                context,
            });
        }
        Ok(())
    }

    #[inline]
    fn row_dot(&self, n: usize, g: &[f64]) -> f64 {
        match &self.storage {
            Storage::F64(m) => m.row(n).iter().zip(g).map(|(a, b)| a * b).sum(),
            Storage::F32(m) => m.row(n).iter().zip(g).map(|(&a, b)| a as f64 * b).sum(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sh::inverse_sht;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_vec(n: usize, rng: &mut impl Rng) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn shapes_and_cache() {
        let b = BasisMatrix::cached(4);
        assert_eq!(b.node_count(), 100);
        assert_eq!(b.coeff_count(), 25);
        assert!(Arc::ptr_eq(&b, &BasisMatrix::cached(4)));
    }

    #[test]
    fn trivial_reconstructions() {
        let b = BasisMatrix::new(3);
        assert!(b.reconstruct(&Smv::zeros(3)).unwrap().iter().all(|&r| r == 0.0));
        let mut dc = Smv::zeros(3);
        dc.coeffs_mut()[0] = 1.7;
        let r = b.reconstruct(&dc).unwrap();
        assert!(r.iter().all(|&v| (v - r[0]).abs() < 1e-15));
        assert!(b.reconstruct(&Smv::zeros(4)).is_err());
    }

    #[test]
    fn matches_inverse_sht() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let smv = Smv::new(8, random_vec(81, &mut rng)).unwrap();
        let r = BasisMatrix::new(8).reconstruct(&smv).unwrap();
        let g = inverse_sht(&smv, &dh_grid(8)).radii_vec();
        for (a, b) in r.iter().zip(&g) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn one_hot_gradient_selects_row() {
        let b = BasisMatrix::new(4);
        let mut v = vec![0.0; b.node_count()];
        v[37] = 1.0;
        let g = b.backprop_to_smv(&v).unwrap();
        for (c, gc) in g.iter().enumerate() {
            assert_eq!(*gc, b.get(37, c));
        }
        assert!(b.backprop_to_smv(&v[1..]).is_err());
        assert!(b.backprop_to_smv(&vec![0.0; 100]).unwrap().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn adjoint_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let b = BasisMatrix::new(6);
        for _ in 0..10 {
            let g = random_vec(b.coeff_count(), &mut rng);
            let v = random_vec(b.node_count(), &mut rng);
            let bg = b.reconstruct(&Smv::new(6, g.clone()).unwrap()).unwrap();
            let btv = b.backprop_to_smv(&v).unwrap();
            let lhs: f64 = bg.iter().zip(&v).map(|(x, y)| x * y).sum();
            let rhs: f64 = g.iter().zip(&btv).map(|(x, y)| x * y).sum();
            assert!((lhs - rhs).abs() < 1e-10, "{lhs} {rhs}");
        }
    }

    #[test]
    fn backprop_is_linear() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let b = BasisMatrix::new(5);
        let u = random_vec(b.node_count(), &mut rng);
        let v = random_vec(b.node_count(), &mut rng);
        let (alpha, beta) = (0.7, -1.3);
        let mix: Vec<f64> = u.iter().zip(&v).map(|(x, y)| alpha * x + beta * y).collect();
        let (bu, bv, bm) = (
            b.backprop_to_smv(&u).unwrap(),
            b.backprop_to_smv(&v).unwrap(),
            b.backprop_to_smv(&mix).unwrap(),
        );
        for i in 0..bm.len() {
            assert!((alpha * bu[i] + beta * bv[i] - bm[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn half_norm_loss_matches_finite_differences() {
        // L = 0.5 |B g|^2, dL/dg = B^T B g
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let b = BasisMatrix::new(4);
        let g = random_vec(b.coeff_count(), &mut rng);
        let loss = |g: &[f64]| -> f64 {
            let r = b.reconstruct(&Smv::new(4, g.to_vec()).unwrap()).unwrap();
            0.5 * r.iter().map(|x| x * x).sum::<f64>()
        };
        let r = b.reconstruct(&Smv::new(4, g.clone()).unwrap()).unwrap();
        let analytic = b.backprop_to_smv(&r).unwrap();
        let h = 1e-5;
        for i in 0..g.len() {
            let mut gp = g.clone();
            let mut gm = g.clone();
            gp[i] += h;
            gm[i] -= h;
            let fd = (loss(&gp) - loss(&gm)) / (2.0 * h);
            let rel = (fd - analytic[i]).abs() / analytic[i].abs().max(1e-8);
            assert!(rel < 1e-6, "coeff {i}: fd {fd} analytic {}", analytic[i]);
        }
    }

    #[test]
    fn batch_paths_agree_with_vector_paths() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let b = BasisMatrix::new(3);
        let g = Array2::from_shape_vec((2, 16), random_vec(32, &mut rng)).unwrap();
        let r = b.reconstruct_batch(&g).unwrap();
        let single = b.reconstruct(&Smv::new(3, g.row(1).to_vec()).unwrap()).unwrap();
        for (a, c) in r.row(1).iter().zip(&single) {
            assert!((a - c).abs() < 1e-13);
        }
        let back = b.backprop_batch(&r).unwrap();
        let single_back = b.backprop_to_smv(&single).unwrap();
        for (a, c) in back.row(1).iter().zip(&single_back) {
            assert!((a - c).abs() < 1e-11);
        }
    }

    #[test]
    fn high_degree_uses_single_precision() {
        let b = BasisMatrix::new(33);
        assert!(b.as_f64().is_none());
        let mut dc = Smv::zeros(33);
        dc.coeffs_mut()[0] = 1.0;
        let r = b.reconstruct(&dc).unwrap();
        assert!(r.iter().all(|v| (v - 0.5 / std::f64::consts::PI.sqrt()).abs() < 1e-7));
    }
}
