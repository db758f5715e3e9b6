use std::f64::consts::SQRT_2;

use ndarray::Array2;
use rayon::prelude::*;

use super::{coeff_count, LegendreTable, Smv, SphericalGrid};
use crate::error::{Error, Result};

/// `cos(m phi_k)` and `sin(m phi_k)` for `m = 0..=max_degree`, flattened `m`-major.
fn trig_tables(max_degree: usize, phis: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = phis.len();
    let mut cos = vec![0.0; (max_degree + 1) * n];
    let mut sin = vec![0.0; (max_degree + 1) * n];
    for m in 0..=max_degree {
        for (k, &phi) in phis.iter().enumerate() {
            let (s, c) = (m as f64 * phi).sin_cos();
            cos[m * n + k] = c;
            sin[m * n + k] = s;
        }
    }
    (cos, sin)
}

/// Spherical-harmonic moments of the grid's radial function by quadrature:
/// `c_l^m = sum_j sum_k w_j r(theta_j, phi_k) Y_l^m(theta_j, phi_k)`.
///
/// Exact for radii that are band-limited to the grid's degree. Rows are
/// evaluated in parallel and reduced in row order, so the result does not
/// depend on the thread count.
pub fn forward_sht(grid: &SphericalGrid) -> Result<Smv> {
    let max_degree = grid.bandlimit;
    if grid.radii.iter().any(|r| !r.is_finite()) {
        return Err(Error::NonFinite("grid radius".into()));
    }
    let ncol = grid.phis.len();
    let (cos, sin) = trig_tables(max_degree, &grid.phis);

    let rows: Vec<Vec<f64>> = (0..grid.thetas.len())
        .into_par_iter()
        .map(|j| {
            let mut out = vec![0.0; coeff_count(max_degree)];
            let w = grid.weights[j];
            if w == 0.0 {
                return out;
            }
            let row = grid.radii.row(j);
            let table = LegendreTable::new(max_degree, grid.thetas[j].cos());
            for m in 0..=max_degree {
                let (mut a, mut b) = (0.0, 0.0);
                for (k, &r) in row.iter().enumerate() {
                    a += r * cos[m * ncol + k];
                    b += r * sin[m * ncol + k];
                }
                let (a, b) = if m == 0 { (w * a, 0.0) } else { (w * SQRT_2 * a, w * SQRT_2 * b) };
                for l in m..=max_degree {
                    let p = table.get(l, m);
                    let base = l * l + l;
                    out[base + m] += p * a;
                    if m > 0 {
                        out[base - m] += p * b;
                    }
                }
            }
            out
        })
        .collect();

    let mut coeffs = vec![0.0; coeff_count(max_degree)];
    for row in &rows {
        for (c, v) in coeffs.iter_mut().zip(row) {
            *c += v;
        }
    }
    Smv::new(max_degree, coeffs)
}

/// Evaluates `r(theta, phi) = sum_l sum_m c_l^m Y_l^m(theta, phi)` at every
/// node of `template`; the returned grid keeps the template's geometry.
pub fn inverse_sht(smv: &Smv, template: &SphericalGrid) -> SphericalGrid {
    let max_degree = smv.max_degree();
    let c = smv.coeffs();
    let ncol = template.phis.len();
    let (cos, sin) = trig_tables(max_degree, &template.phis);

    let rows: Vec<Vec<f64>> = template
        .thetas
        .par_iter()
        .map(|&theta| {
            let table = LegendreTable::new(max_degree, theta.cos());
            // per-order sums over degree
            let mut a = vec![0.0; max_degree + 1];
            let mut b = vec![0.0; max_degree + 1];
            for m in 0..=max_degree {
                for l in m..=max_degree {
                    let p = table.get(l, m);
                    let base = l * l + l;
                    a[m] += c[base + m] * p;
                    if m > 0 {
                        b[m] += c[base - m] * p;
                    }
                }
            }
            (0..ncol)
                .map(|k| {
                    let mut r = a[0];
                    for m in 1..=max_degree {
                        r += SQRT_2 * (a[m] * cos[m * ncol + k] + b[m] * sin[m * ncol + k]);
                    }
                    r
                })
                .collect()
        })
        .collect();

    let mut radii = Array2::zeros((template.thetas.len(), ncol));
    for (j, row) in rows.into_iter().enumerate() {
        for (k, r) in row.into_iter().enumerate() {
            radii[[j, k]] = r;
        }
    }
    template.with_radii(radii)
}
