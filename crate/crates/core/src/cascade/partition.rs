use std::fmt;
use std::str::FromStr;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::sh::{coeff_count, Degree};

/// One frequency band: degrees `lmin..=lmax` with either `m <= 0` or `m > 0`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Band {
    pub lmin: usize,
    pub lmax: usize,
    pub positive_orders: bool,
    /// canonical SMV positions, ascending
    pub indices: Vec<usize>,
}

impl Band {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Columns of `rows` (one SMV per row) belonging to this band.
    pub fn gather(&self, rows: &Array2<f64>) -> Array2<f64> {
        Array2::from_shape_fn((rows.nrows(), self.len()), |(r, c)| rows[[r, self.indices[c]]])
    }
}

/// Disjoint cover of all `(l, m)` with `l <= M` by `T'` bands.
///
/// The degree range is cut into `T'/2` contiguous blocks and each block is
/// split by the sign of `m`, giving bands ordered
/// `(block 0, m<=0), (block 0, m>0), (block 1, m<=0), ...`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BandPartition {
    max_degree: usize,
    bands: Vec<Band>,
}

/// Builds the band partition for bandlimit `max_degree` and `t_prime` bands.
pub fn partition_bands(max_degree: usize, t_prime: usize) -> Result<BandPartition> {
    if max_degree == 0 {
        return Err(Error::Config("band partition needs bandlimit >= 1".into()));
    }
    if t_prime < 2 || t_prime % 2 != 0 {
        return Err(Error::Config(format!(
            "t_prime={t_prime}: must be a positive even number (degree blocks x order sign)"
        )));
    }
    let blocks = t_prime / 2;
    let cut = |k: usize| max_degree * k / blocks;
    let mut bands = Vec::with_capacity(t_prime);
    for k in 0..blocks {
        let lmin = if k == 0 { 0 } else { cut(k) + 1 };
        let lmax = cut(k + 1);
        for positive_orders in [false, true] {
            let indices: Vec<usize> = Degree::all(max_degree)
                .filter(|d| d.l() >= lmin && d.l() <= lmax && (d.m() > 0) == positive_orders)
                .map(Degree::index)
                .collect();
            if indices.is_empty() {
                return Err(Error::Config(format!(
                    "t_prime={t_prime} leaves an empty band at bandlimit {max_degree}"
                )));
            }
            bands.push(Band {
                lmin,
                lmax,
                positive_orders,
                indices,
            });
        }
    }
    Ok(BandPartition { max_degree, bands })
}

impl BandPartition {
    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    pub fn bands(&self) -> &[Band] {
        &self.bands
    }

    pub fn len(&self) -> usize {
        self.bands.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bands.is_empty()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.bands.iter().map(Band::len).collect()
    }

    pub fn coeff_count(&self) -> usize {
        coeff_count(self.max_degree)
    }
}

/// `bandlimit=..`, `t_prime=..`, then one descriptive line per band.
impl fmt::Display for BandPartition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "bandlimit={}", self.max_degree)?;
        writeln!(f, "t_prime={}", self.bands.len())?;
        for (i, b) in self.bands.iter().enumerate() {
            let orders = if b.positive_orders { "m>0" } else { "m<=0" };
            writeln!(f, "band {i}: l={}..={} {orders} size={}", b.lmin, b.lmax, b.len())?;
        }
        Ok(())
    }
}

impl FromStr for BandPartition {
    type Err = Error;

    /// Rebuilds the partition from its header and checks the listed sizes.
    fn from_str(s: &str) -> Result<Self> {
        let mut max_degree = None;
        let mut t_prime = None;
        let mut sizes = Vec::new();
        for line in s.lines().map(str::trim).filter(|l| !l.is_empty()) {
            if let Some(v) = line.strip_prefix("bandlimit=") {
                max_degree = v.parse::<usize>().ok();
            } else if let Some(v) = line.strip_prefix("t_prime=") {
                t_prime = v.parse::<usize>().ok();
            } else if let Some(v) = line.rsplit_once("size=") {
                sizes.push(
                    v.1.parse::<usize>()
                        .map_err(|_| Error::format("partition", format!("bad line {line:?}")))?,
                );
            } else {
                return Err(Error::format("partition", format!("unexpected line {line:?}")));
            }
        }
        let (Some(m), Some(t)) = (max_degree, t_prime) else {
            return Err(Error::format("partition", "missing bandlimit or t_prime"));
        };
        let partition = partition_bands(m, t)?;
        if partition.sizes() != sizes {
            return Err(Error::format(
                "partition",
                format!("listed sizes {sizes:?} disagree with {:?}", partition.sizes()),
            ));
        }
        Ok(partition)
    }
}

/// Positions read from a vector of length `len` to build a conditioning
/// vector of length `dim`: evenly spaced with floor rounding, or cyclic
/// repetition when `len < dim`.
pub fn condition_indices(len: usize, dim: usize) -> Vec<usize> {
    assert!(len > 0, "conditioning source must be non-empty");
    if len >= dim {
        (0..dim).map(|k| k * len / dim).collect()
    } else {
        (0..dim).map(|k| k % len).collect()
    }
}

pub fn condition_vector(prev_output: &[f64], dim: usize) -> Vec<f64> {
    condition_indices(prev_output.len(), dim)
        .into_iter()
        .map(|i| prev_output[i])
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_size(lmin: usize, lmax: usize, positive: bool) -> usize {
        let mut n = 0;
        for l in lmin..=lmax {
            for m in -(l as i64)..=(l as i64) {
                if (m > 0) == positive {
                    n += 1;
                }
            }
        }
        n
    }

    #[test]
    fn large_configuration_sizes() {
        let p = partition_bands(100, 4).unwrap();
        assert_eq!(p.sizes(), vec![1326, 1275, 3825, 3775]);
        assert_eq!(p.sizes(), vec![
            brute_size(0, 50, false),
            brute_size(0, 50, true),
            brute_size(51, 100, false),
            brute_size(51, 100, true)
        ]);
        assert_eq!(p.sizes().iter().sum::<usize>(), 10201);
    }

    #[test]
    fn smallest_partition_is_listed_exactly() {
        let p = partition_bands(1, 2).unwrap();
        let as_pairs = |b: &Band| {
            b.indices
                .iter()
                .map(|&i| {
                    let d = Degree::from_index(i);
                    (d.l(), d.m())
                })
                .collect::<Vec<_>>()
        };
        assert_eq!(as_pairs(&p.bands()[0]), vec![(0, 0), (1, -1), (1, 0)]);
        assert_eq!(as_pairs(&p.bands()[1]), vec![(1, 1)]);
    }

    #[test]
    fn infeasible_splits_are_rejected() {
        assert!(partition_bands(8, 3).is_err());
        assert!(partition_bands(8, 0).is_err());
        assert!(partition_bands(0, 2).is_err());
        // a block holding only l = 0 has no m > 0 orders
        assert!(partition_bands(1, 4).is_err());
    }

    #[test]
    fn text_round_trip() {
        let p = partition_bands(8, 4).unwrap();
        let back: BandPartition = p.to_string().parse().unwrap();
        assert_eq!(back, p);
        let tampered = p.to_string().replace("size=", "size=1");
        assert!(tampered.parse::<BandPartition>().is_err());
    }

    #[test]
    fn condition_selection_rules() {
        assert_eq!(condition_indices(100, 100), (0..100).collect::<Vec<_>>());
        let idx = condition_indices(1326, 100);
        for (k, &i) in idx.iter().enumerate() {
            assert_eq!(i, k * 1326 / 100);
        }
        let v: Vec<f64> = (0..40).map(f64::from).collect();
        let c = condition_vector(&v, 100);
        assert_eq!(c.len(), 100);
        assert_eq!(&c[..40], &v[..]);
        assert_eq!(&c[40..80], &v[..]);
        assert_eq!(&c[80..], &v[..20]);
    }

    proptest! {
        #[test]
        fn partition_is_a_disjoint_cover(m in 1usize..40, blocks in 1usize..6) {
            let p = partition_bands(m, 2 * blocks);
            // every degree block must reach past l = 0
            prop_assert_eq!(p.is_ok(), blocks <= m);
            if let Ok(p) = p {
                let mut all: Vec<usize> = p.bands().iter().flat_map(|b| b.indices.clone()).collect();
                all.sort_unstable();
                prop_assert_eq!(all, (0..coeff_count(m)).collect::<Vec<_>>());
            }
        }
    }
}
