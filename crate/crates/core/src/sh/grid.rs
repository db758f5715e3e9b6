use std::f64::consts::PI;

use ndarray::Array2;

/// Samples per axis of the equiangular grid for harmonics up to `max_degree`.
///
/// Exact quadrature of degree-`max_degree` products needs `2 (max_degree + 1)`
/// samples in each angle; with only `2 max_degree` the top azimuthal mode
/// `sin(max_degree phi)` vanishes on every node.
pub const fn grid_size(max_degree: usize) -> usize {
    2 * (max_degree + 1)
}

/// Radius samples `r(theta_j, phi_k)` on an equiangular polar grid.
///
/// Rows index the polar angle, columns the azimuth. `weights[j]` is the
/// quadrature weight of any node in row `j` and already includes both the
/// `sin(theta)` area element and the azimuthal spacing, so the weights of all
/// nodes sum to `4 pi`.
#[derive(Debug, Clone, PartialEq)]
pub struct SphericalGrid {
    pub bandlimit: usize,
    pub radii: Array2<f64>,
    pub thetas: Vec<f64>,
    pub phis: Vec<f64>,
    pub weights: Vec<f64>,
}

impl SphericalGrid {
    pub fn size(&self) -> usize {
        self.thetas.len()
    }

    pub fn node_count(&self) -> usize {
        self.thetas.len() * self.phis.len()
    }

    /// Same geometry, new radii.
    pub fn with_radii(&self, radii: Array2<f64>) -> Self {
        assert_eq!(radii.dim(), (self.thetas.len(), self.phis.len()));
        Self {
            radii,
            ..self.clone_geometry()
        }
    }

    /// Copy of the angles and weights with all radii zero.
    pub fn clone_geometry(&self) -> Self {
        Self {
            bandlimit: self.bandlimit,
            radii: Array2::zeros((self.thetas.len(), self.phis.len())),
            thetas: self.thetas.clone(),
            phis: self.phis.clone(),
            weights: self.weights.clone(),
        }
    }

    /// Unit direction of node `(j, k)`.
    #[inline]
    pub fn direction(&self, j: usize, k: usize) -> [f64; 3] {
        let (st, ct) = self.thetas[j].sin_cos();
        let (sp, cp) = self.phis[k].sin_cos();
        [st * cp, st * sp, ct]
    }

    /// Node directions in row-major order (row = polar index).
    pub fn directions(&self) -> Vec<[f64; 3]> {
        let mut out = Vec::with_capacity(self.node_count());
        for j in 0..self.thetas.len() {
            for k in 0..self.phis.len() {
                out.push(self.direction(j, k));
            }
        }
        out
    }

    /// Radii flattened row-major, matching [`SphericalGrid::directions`].
    pub fn radii_vec(&self) -> Vec<f64> {
        self.radii.iter().copied().collect()
    }
}

/// Driscoll–Healy equiangular grid for harmonics up to degree `max_degree`,
/// with `theta_j = pi j / n`, `phi_k = 2 pi k / n` and `n = grid_size(max_degree)`.
///
/// Radii are zero.
pub fn dh_grid(max_degree: usize) -> SphericalGrid {
    let n = grid_size(max_degree);
    let thetas: Vec<f64> = (0..n).map(|j| PI * j as f64 / n as f64).collect();
    let phis: Vec<f64> = (0..n).map(|k| 2.0 * PI * k as f64 / n as f64).collect();
    let dphi = 2.0 * PI / n as f64;
    let weights = thetas
        .iter()
        .map(|&t| {
            let series: f64 = (0..n / 2)
                .map(|k| {
                    let odd = (2 * k + 1) as f64;
                    (odd * t).sin() / odd
                })
                .sum();
            dphi * 4.0 / n as f64 * t.sin() * series
        })
        .collect();
    SphericalGrid {
        bandlimit: max_degree,
        radii: Array2::zeros((n, n)),
        thetas,
        phis,
        weights,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degree_one_geometry() {
        let g = dh_grid(1);
        assert_eq!(g.radii.dim(), (4, 4));
        assert_eq!(g.thetas, vec![0.0, PI / 4.0, PI / 2.0, 3.0 * PI / 4.0]);
        assert_eq!(g.phis, vec![0.0, PI / 2.0, PI, 3.0 * PI / 2.0]);
    }

    #[test]
    fn weights_integrate_constant() {
        let g = dh_grid(16);
        let total: f64 = g.weights.iter().sum::<f64>() * g.phis.len() as f64;
        assert!((total - 4.0 * PI).abs() < 1e-10, "{total}");
        assert!(g.weights.iter().all(|&w| w >= 0.0));
    }

    #[test]
    fn weights_integrate_cosine_modes_exactly() {
        // int_0^pi cos(p t) sin(t) dt = (1 + (-1)^p) / (1 - p^2), zero for p = 1
        let g = dh_grid(10);
        let n = g.size();
        let dphi = 2.0 * PI / n as f64;
        for p in 0..n {
            let quad: f64 = g
                .thetas
                .iter()
                .zip(&g.weights)
                .map(|(t, w)| w / dphi * (p as f64 * t).cos())
                .sum();
            let exact = if p == 1 {
                0.0
            } else {
                let sign = if p % 2 == 0 { 1.0 } else { -1.0 };
                (1.0 + sign) / (1.0 - (p * p) as f64)
            };
            assert!((quad - exact).abs() < 1e-12, "p={p}: {quad} vs {exact}");
        }
    }

    #[test]
    fn full_scale_node_count() {
        let g = dh_grid(100);
        assert_eq!(g.node_count(), 202 * 202);
    }
}
