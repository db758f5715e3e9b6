use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

use super::partition::partition_bands;

/// Hyper-parameters of the cascade and its training schedule.
///
/// Stored as `key = value` lines; `#` starts a comment.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub bandlimit: usize,
    pub t_prime: usize,
    pub noise_dim: usize,
    pub cond_dim: usize,
    pub hidden: usize,
    pub disc_hidden: usize,
    pub lr_forward: f64,
    pub lr_backward: f64,
    pub lr_disc: f64,
    pub lr_reg: f64,
    pub d_steps: usize,
    pub batch: usize,
    pub reg_batch: usize,
    pub seed: u64,
    pub outer_iters: usize,
    pub forward_iters: usize,
    pub backward_iters: usize,
    pub reg_iters: usize,
    /// condition on ground-truth previous bands instead of the previous
    /// generator's output while training
    pub real_conditioning: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            bandlimit: 100,
            t_prime: 4,
            noise_dim: 200,
            cond_dim: 100,
            hidden: 512,
            disc_hidden: 512,
            lr_forward: 1e-3,
            lr_backward: 1e-4,
            lr_disc: 1e-5,
            lr_reg: 1e-5,
            d_steps: 3,
            batch: 32,
            reg_batch: 8,
            seed: 0,
            outer_iters: 3,
            forward_iters: 2000,
            backward_iters: 2000,
            reg_iters: 500,
            real_conditioning: false,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
}

impl TrainConfig {
    /// Number of generators in the cascade, `2 T' - 1`.
    pub fn generator_count(&self) -> usize {
        2 * self.t_prime - 1
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "bandlimit" => self.bandlimit = parse(key, value)?,
            "t_prime" => self.t_prime = parse(key, value)?,
            "noise_dim" => self.noise_dim = parse(key, value)?,
            "cond_dim" => self.cond_dim = parse(key, value)?,
            "hidden" => self.hidden = parse(key, value)?,
            "disc_hidden" => self.disc_hidden = parse(key, value)?,
            "lr_forward" => self.lr_forward = parse(key, value)?,
            "lr_backward" => self.lr_backward = parse(key, value)?,
            "lr_disc" => self.lr_disc = parse(key, value)?,
            "lr_reg" => self.lr_reg = parse(key, value)?,
            "d_steps" => self.d_steps = parse(key, value)?,
            "batch" => self.batch = parse(key, value)?,
            "reg_batch" => self.reg_batch = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "outer_iters" => self.outer_iters = parse(key, value)?,
            "forward_iters" => self.forward_iters = parse(key, value)?,
            "backward_iters" => self.backward_iters = parse(key, value)?,
            "reg_iters" => self.reg_iters = parse(key, value)?,
            "real_conditioning" => self.real_conditioning = parse(key, value)?,
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("noise_dim", self.noise_dim),
            ("cond_dim", self.cond_dim),
            ("hidden", self.hidden),
            ("disc_hidden", self.disc_hidden),
            ("d_steps", self.d_steps),
            ("batch", self.batch),
            ("reg_batch", self.reg_batch),
        ];
        if let Some((k, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{k} must be positive")));
        }
        for (k, v) in [
            ("lr_forward", self.lr_forward),
            ("lr_backward", self.lr_backward),
            ("lr_disc", self.lr_disc),
            ("lr_reg", self.lr_reg),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("{k}={v} must be finite and non-negative")));
            }
        }
        partition_bands(self.bandlimit, self.t_prime).map(|_| ())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        text.parse()
    }

    /// Applies the file's settings on top of `self`.
    pub fn merge_str(&mut self, s: &str) -> Result<()> {
        for (n, raw) in s.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }
}

impl FromStr for TrainConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut c = Self::default();
        c.merge_str(s)?;
        c.validate()?;
        Ok(c)
    }
}

impl fmt::Display for TrainConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "bandlimit = {}", self.bandlimit)?;
        writeln!(f, "t_prime = {}", self.t_prime)?;
        writeln!(f, "noise_dim = {}", self.noise_dim)?;
        writeln!(f, "cond_dim = {}", self.cond_dim)?;
        writeln!(f, "hidden = {}", self.hidden)?;
        writeln!(f, "disc_hidden = {}", self.disc_hidden)?;
        writeln!(f, "lr_forward = {:e}", self.lr_forward)?;
        writeln!(f, "lr_backward = {:e}", self.lr_backward)?;
        writeln!(f, "lr_disc = {:e}", self.lr_disc)?;
        writeln!(f, "lr_reg = {:e}", self.lr_reg)?;
        writeln!(f, "d_steps = {}", self.d_steps)?;
        writeln!(f, "batch = {}", self.batch)?;
        writeln!(f, "reg_batch = {}", self.reg_batch)?;
        writeln!(f, "seed = {}", self.seed)?;
        writeln!(f, "outer_iters = {}", self.outer_iters)?;
        writeln!(f, "forward_iters = {}", self.forward_iters)?;
        writeln!(f, "backward_iters = {}", self.backward_iters)?;
        writeln!(f, "reg_iters = {}", self.reg_iters)?;
        writeln!(f, "real_conditioning = {}", self.real_conditioning)
    }
}
