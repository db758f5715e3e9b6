use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use super::{coeff_count, Degree};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"SMV1";

/// Spherical-harmonic moment vector: real coefficients `c_l^m` for
/// `l <= max_degree`, stored at canonical index `l^2 + l + m`.
#[derive(Debug, Clone, PartialEq)]
pub struct Smv {
    max_degree: usize,
    coeffs: Vec<f64>,
}

impl Smv {
    pub fn new(max_degree: usize, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != coeff_count(max_degree) {
            return Err(Error::DimensionMismatch {
                expected: coeff_count(max_degree),
                got: coeffs.len(),
                context: "SMV coefficient count",
            });
        }
        if let Some(i) = coeffs.iter().position(|c| !c.is_finite()) {
            return Err(Error::NonFinite(format!("SMV coefficient {i}")));
        }
        Ok(Self { max_degree, coeffs })
    }

    pub fn zeros(max_degree: usize) -> Self {
        Self {
            max_degree,
            coeffs: vec![0.0; coeff_count(max_degree)],
        }
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn get(&self, deg: Degree) -> f64 {
        self.coeffs[deg.index()]
    }

    pub fn max_abs_diff(&self, other: &Smv) -> f64 {
        assert_eq!(self.max_degree, other.max_degree);
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// `SMV1`, little-endian `u32` degree, then little-endian `f64` coefficients.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&(self.max_degree as u32).to_le_bytes())?;
        for c in &self.coeffs {
            w.write_all(&c.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::format("SMV", "bad magic"));
        }
        let mut word = [0u8; 4];
        r.read_exact(&mut word)?;
        let max_degree = u32::from_le_bytes(word) as usize;
        let mut buf = vec![0u8; coeff_count(max_degree) * 8];
        r.read_exact(&mut buf)
            .map_err(|_| Error::format("SMV", "truncated coefficient block"))?;
        let coeffs = buf
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Smv::new(max_degree, coeffs)
    }

    /// `M=<degree>` header then one coefficient per line.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "M={}", self.max_degree)?;
        for c in &self.coeffs {
            writeln!(w, "{c:e}")?;
        }
        Ok(())
    }

    pub fn read_text<R: Read>(r: R) -> Result<Self> {
        let mut lines = BufReader::new(r).lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::format("SMV text", "empty input"))??;
        let max_degree = header
            .trim()
            .strip_prefix("M=")
            .and_then(|v| v.parse::<usize>().ok())
            .ok_or_else(|| Error::format("SMV text", format!("bad header {header:?}")))?;
        let mut coeffs = Vec::with_capacity(coeff_count(max_degree));
        for line in lines {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            coeffs.push(
                line.parse::<f64>()
                    .map_err(|e| Error::format("SMV text", format!("{line:?}: {e}")))?,
            );
        }
        Smv::new(max_degree, coeffs)
    }

    /// Binary unless the extension is `.txt`.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut buf = Vec::new();
        if is_text(path) {
            self.write_text(&mut buf)?;
        } else {
            self.write_binary(&mut buf)?;
        }
        fs::write(path, buf)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path)?;
        if is_text(path) {
            Self::read_text(bytes.as_slice())
        } else {
            Self::read_binary(bytes.as_slice())
        }
    }
}

fn is_text(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "txt")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_wrong_length_and_nan() {
        assert!(Smv::new(2, vec![0.0; 8]).is_err());
        assert!(Smv::new(1, vec![0.0, f64::NAN, 0.0, 0.0]).is_err());
    }

    #[test]
    fn binary_layout() {
        let s = Smv::new(1, vec![1.0, -2.0, 0.5, 3.25]).unwrap();
        let mut buf = Vec::new();
        s.write_binary(&mut buf).unwrap();
        assert_eq!(&buf[..4], b"SMV1");
        assert_eq!(&buf[4..8], &[1, 0, 0, 0]);
        assert_eq!(buf.len(), 8 + 4 * 8);
        assert_eq!(&buf[16..24], &(-2.0f64).to_le_bytes());
    }

    #[test]
    fn truncated_and_bad_magic() {
        assert!(Smv::read_binary(&b"SMV2\x00\x00\x00\x00"[..]).is_err());
        assert!(Smv::read_binary(&b"SMV1\x01\x00\x00\x00\x00"[..]).is_err());
        assert!(Smv::read_text("M=1\n1\n2\n".as_bytes()).is_err());
        assert!(Smv::read_text("N=1\n1\n2\n3\n4\n".as_bytes()).is_err());
    }

    proptest! {
        #[test]
        fn formats_round_trip(deg in 0usize..6, seed in any::<u64>()) {
            let n = coeff_count(deg);
            let coeffs: Vec<f64> = (0..n)
                .map(|i| ((seed.wrapping_mul(i as u64 + 1) % 10007) as f64 - 5000.0) / 37.0)
                .collect();
            let s = Smv::new(deg, coeffs).unwrap();
            let mut bin = Vec::new();
            s.write_binary(&mut bin).unwrap();
            prop_assert_eq!(&Smv::read_binary(bin.as_slice()).unwrap(), &s);
            let mut txt = Vec::new();
            s.write_text(&mut txt).unwrap();
            prop_assert_eq!(&Smv::read_text(txt.as_slice()).unwrap(), &s);
        }
    }
}
