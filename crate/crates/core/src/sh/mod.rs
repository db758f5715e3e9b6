//! Real spherical harmonics on equiangular Driscoll–Healy grids.
//!
//! Angles follow the physics convention throughout the crate: `theta` is the
//! polar angle in `[0, pi]` measured from +z and `phi` is the azimuth in
//! `[0, 2pi)` measured from +x towards +y.

mod grid;
mod legendre;
mod smv;
mod transform;

pub use grid::{dh_grid, grid_size, SphericalGrid};
pub use legendre::{assoc_legendre, normalized_legendre, LegendreTable};
pub use smv::Smv;
pub use transform::{forward_sht, inverse_sht};

use std::f64::consts::SQRT_2;

use crate::error::{Error, Result};

/// Number of real coefficients for harmonics up to and including degree `max_degree`.
pub const fn coeff_count(max_degree: usize) -> usize {
    (max_degree + 1) * (max_degree + 1)
}

/// A harmonic degree/order pair with `|m| <= l`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Degree {
    l: usize,
    m: i64,
}

impl Degree {
    pub fn new(l: usize, m: i64) -> Result<Self> {
        if m.unsigned_abs() as usize > l {
            return Err(Error::InvalidDegree { l, m });
        }
        Ok(Self { l, m })
    }

    pub fn l(self) -> usize {
        self.l
    }

    pub fn m(self) -> i64 {
        self.m
    }

    /// Position in the canonical l-major, m-ascending linearization: `l^2 + l + m`.
    pub fn index(self) -> usize {
        self.l * self.l + (self.l as i64 + self.m) as usize
    }

    /// Inverse of [`Degree::index`].
    pub fn from_index(index: usize) -> Self {
        let l = (index as f64).sqrt() as usize;
        // guard against sqrt rounding at perfect squares
        let l = if (l + 1) * (l + 1) <= index {
            l + 1
        } else if l * l > index {
            l - 1
        } else {
            l
        };
        let m = index as i64 - (l * l + l) as i64;
        Self { l, m }
    }

    /// Iterates every degree with `l <= max_degree` in canonical order.
    pub fn all(max_degree: usize) -> impl Iterator<Item = Degree> {
        (0..=max_degree).flat_map(|l| (-(l as i64)..=l as i64).map(move |m| Degree { l, m }))
    }
}

/// Real orthonormal spherical harmonic `Y_l^m(theta, phi)`.
///
/// For `m > 0` this is `sqrt(2) N P_l^m(cos theta) cos(m phi)`, for `m < 0`
/// the `sin(|m| phi)` counterpart, and for `m = 0` the zonal function. The
/// Condon–Shortley factor carried by the normalization cancels the one
/// carried by `P_l^m`, so the combined product has no sign alternation.
pub fn real_sph_harm(l: usize, m: i64, theta: f64, phi: f64) -> Result<f64> {
    let deg = Degree::new(l, m)?;
    if !(0.0..=std::f64::consts::PI).contains(&theta) {
        return Err(Error::Domain(format!("polar angle {theta} outside [0, pi]")));
    }
    if !phi.is_finite() {
        return Err(Error::Domain(format!("azimuth {phi} is not finite")));
    }
    let am = deg.m.unsigned_abs() as usize;
    let p = normalized_legendre(l, am, theta.cos())?;
    Ok(match deg.m {
        0 => p,
        m if m > 0 => SQRT_2 * p * (m as f64 * phi).cos(),
        _ => SQRT_2 * p * (am as f64 * phi).sin(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn degree_rejects_large_order() {
        assert!(Degree::new(2, 3).is_err());
        assert!(Degree::new(2, -3).is_err());
        assert!(Degree::new(0, 0).is_ok());
    }

    #[test]
    fn canonical_index_round_trips() {
        for (i, d) in Degree::all(12).enumerate() {
            assert_eq!(d.index(), i);
            assert_eq!(d.index() as i64, (d.l * d.l + d.l) as i64 + d.m);
            assert_eq!(Degree::from_index(i), d);
        }
        assert_eq!(Degree::all(12).count(), coeff_count(12));
    }

    #[test]
    fn constant_harmonic() {
        let expected = 0.5 / PI.sqrt();
        for &(t, p) in &[(0.0, 0.0), (1.0, 2.0), (PI, 5.0)] {
            let y = real_sph_harm(0, 0, t, p).unwrap();
            assert!((y - expected).abs() < 1e-15);
        }
        assert!((expected - 0.2820948).abs() < 1e-7);
    }

    #[test]
    fn zonal_degree_one_at_pole() {
        let y = real_sph_harm(1, 0, 0.0, 0.0).unwrap();
        assert!((y - (3.0 / (4.0 * PI)).sqrt()).abs() < 1e-15);
        assert!((y - 0.4886025).abs() < 1e-7);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(real_sph_harm(1, 2, 0.1, 0.1).is_err());
        assert!(real_sph_harm(1, 0, -0.1, 0.1).is_err());
        assert!(real_sph_harm(1, 0, 0.1, f64::NAN).is_err());
    }
}
