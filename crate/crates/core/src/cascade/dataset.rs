use ndarray::Array2;

use crate::error::{Error, Result};
use crate::sh::{coeff_count, Smv};

/// Headroom between the largest training magnitude and the tanh bound.
pub const SCALE_HEADROOM: f64 = 1.1;

/// Training SMVs scaled per coefficient into the open interval (-1, 1).
#[derive(Debug, Clone, PartialEq)]
pub struct SmvDataset {
    max_degree: usize,
    scale: Vec<f64>,
    /// one normalized SMV per row
    rows: Array2<f64>,
}

impl SmvDataset {
    /// `scale[i] = 1.1 * max |c_i|` over the set, or 1 for an all-zero
    /// coefficient.
    pub fn from_smvs(smvs: &[Smv]) -> Result<Self> {
        let first = smvs
            .first()
            .ok_or_else(|| Error::Training("empty SMV dataset".into()))?;
        let max_degree = first.max_degree();
        let n = coeff_count(max_degree);
        let mut scale = vec![0.0f64; n];
        for s in smvs {
            if s.max_degree() != max_degree {
                return Err(Error::BandlimitMismatch {
                    expected: max_degree,
                    got: s.max_degree(),
                });
            }
            for (m, c) in scale.iter_mut().zip(s.coeffs()) {
                *m = m.max(c.abs());
            }
        }
        for s in &mut scale {
            *s = if *s > 0.0 { SCALE_HEADROOM * *s } else { 1.0 };
        }
        let rows = Array2::from_shape_fn((smvs.len(), n), |(r, c)| smvs[r].coeffs()[c] / scale[c]);
        Ok(Self {
            max_degree,
            scale,
            rows,
        })
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    pub fn len(&self) -> usize {
        self.rows.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.nrows() == 0
    }

    pub fn scale(&self) -> &[f64] {
        &self.scale
    }

    pub fn normalized(&self) -> &Array2<f64> {
        &self.rows
    }

    pub fn denormalize(&self, normalized: &[f64]) -> Result<Smv> {
        denormalize(&self.scale, self.max_degree, normalized)
    }
}

pub(crate) fn denormalize(scale: &[f64], max_degree: usize, normalized: &[f64]) -> Result<Smv> {
    if normalized.len() != scale.len() {
        return Err(Error::DimensionMismatch {
            expected: scale.len(),
            got: normalized.len(),
            context: "normalized SMV length",
        });
    }
    Smv::new(
        max_degree,
        normalized.iter().zip(scale).map(|(v, s)| v * s).collect(),
    )
}
