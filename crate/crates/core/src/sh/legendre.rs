use std::f64::consts::PI;

use crate::error::{Error, Result};

fn check_args(l: usize, m: usize, x: f64) -> Result<()> {
    if m > l {
        return Err(Error::Domain(format!("order m={m} exceeds degree l={l}")));
    }
    if !(-1.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!("argument {x} outside [-1, 1]")));
    }
    Ok(())
}

/// Associated Legendre function `P_l^m(x)` including the Condon–Shortley
/// phase `(-1)^m`, evaluated by upward recurrence in `l`.
///
/// The unnormalized values grow factorially with `m`; use
/// [`normalized_legendre`] for high degrees.
pub fn assoc_legendre(l: usize, m: usize, x: f64) -> Result<f64> {
    check_args(l, m, x)?;
    let s = ((1.0 - x) * (1.0 + x)).sqrt();
    // P_m^m = (-1)^m (2m-1)!! s^m
    let mut pmm = 1.0;
    for k in 1..=m {
        pmm *= -((2 * k - 1) as f64) * s;
    }
    if l == m {
        return Ok(pmm);
    }
    let mut prev = pmm;
    let mut cur = x * (2 * m + 1) as f64 * pmm;
    for ll in (m + 2)..=l {
        let next = ((2 * ll - 1) as f64 * x * cur - (ll + m - 1) as f64 * prev) / (ll - m) as f64;
        prev = cur;
        cur = next;
    }
    Ok(cur)
}

/// Fully normalized `|N_l^m| P_l^m(x)` without sign alternation, so that
/// `2 pi` times its square integrates to one over `[-1, 1]` (times 2 for m>0).
///
/// Stays finite for degrees in the hundreds.
pub fn normalized_legendre(l: usize, m: usize, x: f64) -> Result<f64> {
    check_args(l, m, x)?;
    let s = ((1.0 - x) * (1.0 + x)).sqrt();
    let mut pmm = 0.5 / PI.sqrt();
    for k in 1..=m {
        pmm *= ((2 * k + 1) as f64 / (2 * k) as f64).sqrt() * s;
    }
    if l == m {
        return Ok(pmm);
    }
    let mut prev = pmm;
    let mut cur = ((2 * m + 3) as f64).sqrt() * x * pmm;
    for ll in (m + 2)..=l {
        let (a, b) = recurrence_coeffs(ll, m);
        let next = a * (x * cur - b * prev);
        prev = cur;
        cur = next;
    }
    Ok(cur)
}

#[inline]
fn recurrence_coeffs(l: usize, m: usize) -> (f64, f64) {
    let (lf, mf) = (l as f64, m as f64);
    let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
    let lp = lf - 1.0;
    let b = ((lp * lp - mf * mf) / (4.0 * lp * lp - 1.0)).sqrt();
    (a, b)
}

/// All normalized Legendre values up to `max_degree` at one argument,
/// stored triangularly (`l(l+1)/2 + m`, `0 <= m <= l`).
#[derive(Debug, Clone)]
pub struct LegendreTable {
    max_degree: usize,
    values: Vec<f64>,
}

impl LegendreTable {
    pub fn new(max_degree: usize, x: f64) -> Self {
        let n = max_degree + 1;
        let mut values = vec![0.0; n * (n + 1) / 2];
        let s = ((1.0 - x) * (1.0 + x)).max(0.0).sqrt();
        let idx = |l: usize, m: usize| l * (l + 1) / 2 + m;
        let mut pmm = 0.5 / PI.sqrt();
        for m in 0..=max_degree {
            if m > 0 {
                pmm *= ((2 * m + 1) as f64 / (2 * m) as f64).sqrt() * s;
            }
            values[idx(m, m)] = pmm;
            if m == max_degree {
                break;
            }
            let mut prev = pmm;
            let mut cur = ((2 * m + 3) as f64).sqrt() * x * pmm;
            values[idx(m + 1, m)] = cur;
            for l in (m + 2)..=max_degree {
                let (a, b) = recurrence_coeffs(l, m);
                let next = a * (x * cur - b * prev);
                values[idx(l, m)] = next;
                prev = cur;
                cur = next;
            }
        }
        Self { max_degree, values }
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    #[inline]
    pub fn get(&self, l: usize, m: usize) -> f64 {
        debug_assert!(m <= l && l <= self.max_degree);
        self.values[l * (l + 1) / 2 + m]
    }
}
