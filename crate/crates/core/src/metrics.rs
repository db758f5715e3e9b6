//! Chamfer distance, earth mover's distance and minimum matching distance.

use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::assignment::{auction, hungarian};
use crate::error::{Error, Result};
use crate::geometry::{dist2, Point3, PointCloud};
use crate::kdtree::KdTree;

/// Point count below which EMD is solved exactly.
pub const EXACT_EMD_MAX_POINTS: usize = 64;

/// Relative suboptimality allowed for the auction EMD solver.
pub const EMD_RELATIVE_TOLERANCE: f64 = 0.01;

/// Per-point squared distance from each `a` to its nearest `b`, via k-d tree.
fn nearest_sq_dists(a: &[Point3], b: &[Point3]) -> Vec<f64> {
    let tree = KdTree::new(b);
    a.par_iter()
        .map(|&p| tree.nearest(p).expect("nonempty").1)
        .collect()
}

fn nearest_sq_dists_brute(a: &[Point3], b: &[Point3]) -> Vec<f64> {
    a.iter()
        .map(|&p| b.iter().map(|&q| dist2(p, q)).fold(f64::INFINITY, f64::min))
        .collect()
}

fn check(s1: &PointCloud, s2: &PointCloud) -> Result<()> {
    s1.require_nonempty()?;
    s2.require_nonempty()
}

/// Sum of squared nearest-neighbour distances in both directions, unnormalized.
pub fn chamfer(s1: &PointCloud, s2: &PointCloud) -> Result<f64> {
    check(s1, s2)?;
    let a: f64 = nearest_sq_dists(&s1.points, &s2.points).iter().sum();
    let b: f64 = nearest_sq_dists(&s2.points, &s1.points).iter().sum();
    Ok(a + b)
}

/// Reference O(n m) Chamfer distance; agrees with [`chamfer`] bit for bit.
pub fn chamfer_brute(s1: &PointCloud, s2: &PointCloud) -> Result<f64> {
    check(s1, s2)?;
    let a: f64 = nearest_sq_dists_brute(&s1.points, &s2.points).iter().sum();
    let b: f64 = nearest_sq_dists_brute(&s2.points, &s1.points).iter().sum();
    Ok(a + b)
}

/// Chamfer distance with each direction averaged over its source points,
/// comparable across resolutions.
pub fn chamfer_normalized(s1: &PointCloud, s2: &PointCloud) -> Result<f64> {
    check(s1, s2)?;
    let a: f64 = nearest_sq_dists(&s1.points, &s2.points).iter().sum();
    let b: f64 = nearest_sq_dists(&s2.points, &s1.points).iter().sum();
    Ok(a / s1.len() as f64 + b / s2.len() as f64)
}

fn subsample(points: &[Point3], count: usize, rng: &mut ChaCha8Rng) -> Vec<Point3> {
    if points.len() == count {
        return points.to_vec();
    }
    let mut idx = sample(rng, points.len(), count).into_vec();
    idx.sort_unstable();
    idx.into_iter().map(|i| points[i]).collect()
}

/// Mean Euclidean matching cost of a minimum-cost perfect matching.
///
/// The larger cloud is subsampled without replacement (seeded) to the
/// smaller size. Below [`EXACT_EMD_MAX_POINTS`] the matching is exact,
/// otherwise an auction solver keeps it within 1% of optimal.
pub fn emd(s1: &PointCloud, s2: &PointCloud, seed: u64) -> Result<f64> {
    check(s1, s2)?;
    if s1 == s2 {
        return Ok(0.0);
    }
    let n = s1.len().min(s2.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = subsample(&s1.points, n, &mut rng);
    let b = subsample(&s2.points, n, &mut rng);
    let cost = cost_matrix(&a, &b);
    let total = if n < EXACT_EMD_MAX_POINTS {
        hungarian(&cost).1
    } else {
        auction(&cost, auction_epsilon(&cost)).1
    };
    Ok(total / n as f64)
}

/// Auction-only EMD on equal-size clouds, exposed for validation.
pub fn emd_auction(s1: &PointCloud, s2: &PointCloud) -> Result<f64> {
    emd_equal_size(s1, s2, |c| auction(c, auction_epsilon(c)).1)
}

/// Exact EMD on equal-size clouds.
pub fn emd_exact(s1: &PointCloud, s2: &PointCloud) -> Result<f64> {
    emd_equal_size(s1, s2, |c| hungarian(c).1)
}

fn emd_equal_size(s1: &PointCloud, s2: &PointCloud, solve: impl Fn(&[Vec<f64>]) -> f64) -> Result<f64> {
    check(s1, s2)?;
    if s1.len() != s2.len() {
        return Err(Error::DimensionMismatch {
            expected: s1.len(),
            got: s2.len(),
            context: "EMD point counts",
        });
    }
    Ok(solve(&cost_matrix(&s1.points, &s2.points)) / s1.len() as f64)
}

fn cost_matrix(a: &[Point3], b: &[Point3]) -> Vec<Vec<f64>> {
    a.iter()
        .map(|&p| b.iter().map(|&q| dist2(p, q).sqrt()).collect())
        .collect()
}

/// `n * eps` stays under 1% of a lower bound on the optimal cost (the larger
/// of the row-minimum and column-minimum sums).
fn auction_epsilon(cost: &[Vec<f64>]) -> f64 {
    let n = cost.len();
    let rows: f64 = cost.iter().map(|r| r.iter().copied().fold(f64::INFINITY, f64::min)).sum();
    let cols: f64 = (0..n)
        .map(|j| cost.iter().map(|r| r[j]).fold(f64::INFINITY, f64::min))
        .sum();
    EMD_RELATIVE_TOLERANCE * rows.max(cols) / n as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaseDistance {
    Chamfer,
    Emd,
}

/// Minimum matching distance: mean over reference clouds of the smallest
/// distance to any generated cloud. Chamfer uses the normalized variant.
pub fn mmd(generated: &[PointCloud], reference: &[PointCloud], base: BaseDistance, seed: u64) -> Result<f64> {
    if generated.is_empty() || reference.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let pairs: Vec<(usize, usize)> = (0..reference.len())
        .flat_map(|r| (0..generated.len()).map(move |g| (r, g)))
        .collect();
    let dists: Vec<f64> = pairs
        .par_iter()
        .map(|&(r, g)| match base {
            BaseDistance::Chamfer => chamfer_normalized(&reference[r], &generated[g]),
            BaseDistance::Emd => emd(&reference[r], &generated[g], seed ^ ((r as u64) << 32 | g as u64)),
        })
        .collect::<Result<_>>()?;
    let per_ref: Vec<f64> = dists
        .chunks(generated.len())
        .map(|row| row.iter().copied().fold(f64::INFINITY, f64::min))
        .collect();
    Ok(per_ref.iter().sum::<f64>() / reference.len() as f64)
}

/// MMD-CD and MMD-EMD with the sample counts that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub mmd_cd: f64,
    pub mmd_emd: f64,
    pub generated: usize,
    pub reference: usize,
}

impl MetricReport {
    pub fn compute(generated: &[PointCloud], reference: &[PointCloud], seed: u64) -> Result<Self> {
        Ok(Self {
            mmd_cd: mmd(generated, reference, BaseDistance::Chamfer, seed)?,
            mmd_emd: mmd(generated, reference, BaseDistance::Emd, seed)?,
            generated: generated.len(),
            reference: reference.len(),
        })
    }
}

impl fmt::Display for MetricReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "mmd_cd: {:e}", self.mmd_cd)?;
        writeln!(f, "mmd_emd: {:e}", self.mmd_emd)?;
        writeln!(f, "generated_count: {}", self.generated)?;
        writeln!(f, "reference_count: {}", self.reference)
    }
}

impl FromStr for MetricReport {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut cd = None;
        let mut emd = None;
        let mut gen = None;
        let mut reference = None;
        for line in s.lines().filter(|l| !l.trim().is_empty()) {
            let (key, value) = line
                .split_once(':')
                .ok_or_else(|| Error::format("metric report", format!("no ':' in {line:?}")))?;
            let value = value.trim();
            let bad = |_| Error::format("metric report", format!("bad value for {key}: {value:?}"));
            match key.trim() {
                "mmd_cd" => cd = Some(value.parse::<f64>().map_err(bad)?),
                "mmd_emd" => emd = Some(value.parse::<f64>().map_err(bad)?),
                "generated_count" => gen = Some(value.parse::<usize>().map_err(|_| Error::format("metric report", "bad count"))?),
                "reference_count" => reference = Some(value.parse::<usize>().map_err(|_| Error::format("metric report", "bad count"))?),
                other => return Err(Error::format("metric report", format!("unknown key {other:?}"))),
            }
        }
        let missing = |k: &str| Error::format("metric report", format!("missing {k}"));
        Ok(Self {
            mmd_cd: cd.ok_or_else(|| missing("mmd_cd"))?,
            mmd_emd: emd.ok_or_else(|| missing("mmd_emd"))?,
            generated: gen.ok_or_else(|| missing("generated_count"))?,
            reference: reference.ok_or_else(|| missing("reference_count"))?,
        })
    }
}
