//! `NNW1` parameter files: magic, `u32` layer count, then per layer
//! `u32` inputs, `u32` outputs, `u8` activation tag, row-major `f64`
//! weights and `f64` biases. All integers and floats are little-endian.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};

use super::{Activation, Dense, Mlp};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"NNW1";

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64s<R: Read>(r: &mut R, n: usize) -> Result<Vec<f64>> {
    let mut buf = vec![0u8; n * 8];
    r.read_exact(&mut buf)
        .map_err(|_| Error::format("NNW", "truncated parameter block"))?;
    Ok(buf
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

impl Mlp {
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&(self.layers.len() as u32).to_le_bytes())?;
        for l in &self.layers {
            w.write_all(&(l.inputs() as u32).to_le_bytes())?;
            w.write_all(&(l.outputs() as u32).to_le_bytes())?;
            w.write_all(&[l.activation.tag()])?;
            for v in l.weights.iter() {
                w.write_all(&v.to_le_bytes())?;
            }
            for v in l.bias.iter() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::format("NNW", "bad magic"));
        }
        let count = read_u32(&mut r)? as usize;
        let mut layers = Vec::with_capacity(count);
        for _ in 0..count {
            let inputs = read_u32(&mut r)? as usize;
            let outputs = read_u32(&mut r)? as usize;
            let mut tag = [0u8; 1];
            r.read_exact(&mut tag)?;
            let activation = Activation::from_tag(tag[0])
                .ok_or_else(|| Error::format("NNW", format!("unknown activation tag {}", tag[0])))?;
            let weights = Array2::from_shape_vec((outputs, inputs), read_f64s(&mut r, inputs * outputs)?)
                .expect("sized buffer");
            let bias = Array1::from(read_f64s(&mut r, outputs)?);
            layers.push(Dense {
                weights,
                bias,
                activation,
            });
        }
        Mlp::from_layers(layers)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        fs::write(path, buf)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(fs::read(path)?.as_slice())
    }
}
