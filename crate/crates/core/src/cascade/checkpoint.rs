//! Checkpoint directories.
//!
//! Layout: `config.txt`, `partition.txt`, `norm.txt` (scales in SMV text
//! form), `gen_<i>.nnw` / `disc_<i>.nnw` (1-based), optimizer accumulators
//! in `*_rmsprop.nnw`, `losses.csv` and `progress.txt`. `progress.txt` is
//! written last and records the RNG position, so a run resumed from a
//! checkpoint continues exactly as the uninterrupted run would.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::{CascadeGan, LossRecord, StepCounts, TrainConfig};
use crate::error::{Error, Result};
use crate::nn::{Mlp, Rmsprop};
use crate::sh::Smv;

pub const PROGRESS_FILE: &str = "progress.txt";
pub const LOSS_FILE: &str = "losses.csv";

fn progress_value<'a>(text: &'a str, key: &str) -> Result<&'a str> {
    text.lines()
        .filter_map(|l| l.split_once('='))
        .find(|(k, _)| k.trim() == key)
        .map(|(_, v)| v.trim())
        .ok_or_else(|| Error::format("progress", format!("missing {key}")))
}

fn parse_progress<T: std::str::FromStr>(text: &str, key: &str) -> Result<T> {
    progress_value(text, key)?
        .parse()
        .map_err(|_| Error::format("progress", format!("bad {key}")))
}

/// Writes the training log as `phase,iter,net,loss` CSV.
pub fn write_loss_csv<W: Write>(mut w: W, records: &[LossRecord]) -> Result<()> {
    writeln!(w, "phase,iter,net,loss")?;
    for r in records {
        writeln!(w, "{},{},{},{}", r.phase, r.iter, r.net, r.loss)?;
    }
    Ok(())
}

pub fn read_loss_csv(text: &str) -> Result<Vec<LossRecord>> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("phase,iter,net,loss") {
        return Err(Error::format("loss log", "missing header"));
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let f: Vec<&str> = l.trim().split(',').collect();
            let bad = || Error::format("loss log", format!("bad row {l:?}"));
            if f.len() != 4 {
                return Err(bad());
            }
            Ok(LossRecord {
                phase: f[0].parse()?,
                iter: f[1].parse().map_err(|_| bad())?,
                net: f[2].to_string(),
                loss: f[3].parse().map_err(|_| bad())?,
            })
        })
        .collect()
}

impl CascadeGan {
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        fs::write(dir.join("config.txt"), self.config.to_string())?;
        fs::write(dir.join("partition.txt"), self.partition.to_string())?;
        Smv::new(self.config.bandlimit, self.scale.clone())?.save(dir.join("norm.txt"))?;
        for i in 0..self.generators.len() {
            let k = i + 1;
            self.generators[i].save(dir.join(format!("gen_{k}.nnw")))?;
            self.discriminators[i].save(dir.join(format!("disc_{k}.nnw")))?;
            self.gen_opts[i].state_as_mlp().save(dir.join(format!("gen_{k}_rmsprop.nnw")))?;
            self.disc_opts[i].state_as_mlp().save(dir.join(format!("disc_{k}_rmsprop.nnw")))?;
            self.reg_opts[i].state_as_mlp().save(dir.join(format!("gen_{k}_reg_rmsprop.nnw")))?;
        }
        let mut log = Vec::new();
        write_loss_csv(&mut log, &self.losses)?;
        fs::write(dir.join(LOSS_FILE), log)?;
        let progress = format!(
            "completed_outer = {}\nrng_word_pos = {}\ndisc_steps = {}\ngen_steps = {}\n",
            self.completed_outer,
            self.rng.get_word_pos(),
            self.steps.discriminator,
            self.steps.generator
        );
        fs::write(dir.join(PROGRESS_FILE), progress)?;
        Ok(())
    }

    /// Restores a stack written by [`CascadeGan::save`].
    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        if !dir.join(PROGRESS_FILE).is_file() {
            return Err(Error::format(
                "checkpoint",
                format!("{} has no {PROGRESS_FILE}", dir.display()),
            ));
        }
        let config = TrainConfig::load(dir.join("config.txt"))?;
        let partition = fs::read_to_string(dir.join("partition.txt"))?.parse()?;
        let scale = Smv::load(dir.join("norm.txt"))?;
        if scale.max_degree() != config.bandlimit {
            return Err(Error::BandlimitMismatch {
                expected: config.bandlimit,
                got: scale.max_degree(),
            });
        }
        let mut gan = CascadeGan::new(config, scale.into_coeffs())?;
        if gan.partition != partition {
            return Err(Error::format("checkpoint", "partition does not match config"));
        }
        let same_shape = |a: &Mlp, b: &Mlp| {
            a.layers().len() == b.layers().len()
                && a.layers()
                    .iter()
                    .zip(b.layers())
                    .all(|(x, y)| x.weights.dim() == y.weights.dim() && x.activation == y.activation)
        };
        for i in 0..gan.generators.len() {
            let k = i + 1;
            let g = Mlp::load(dir.join(format!("gen_{k}.nnw")))?;
            let d = Mlp::load(dir.join(format!("disc_{k}.nnw")))?;
            if !same_shape(&g, &gan.generators[i]) || !same_shape(&d, &gan.discriminators[i]) {
                return Err(Error::format("checkpoint", format!("network {k} has the wrong shape")));
            }
            let load_opt = |name: String, net: &Mlp, lr: f64| -> Result<Rmsprop> {
                Rmsprop::from_state(net, lr, &Mlp::load(dir.join(name))?)
            };
            gan.gen_opts[i] = load_opt(format!("gen_{k}_rmsprop.nnw"), &g, gan.gen_opts[i].learning_rate)?;
            gan.disc_opts[i] = load_opt(format!("disc_{k}_rmsprop.nnw"), &d, gan.config.lr_disc)?;
            gan.reg_opts[i] = load_opt(format!("gen_{k}_reg_rmsprop.nnw"), &g, gan.config.lr_reg)?;
            gan.generators[i] = g;
            gan.discriminators[i] = d;
        }
        gan.losses = read_loss_csv(&fs::read_to_string(dir.join(LOSS_FILE))?)?;
        let progress = fs::read_to_string(dir.join(PROGRESS_FILE))?;
        gan.completed_outer = parse_progress(&progress, "completed_outer")?;
        gan.rng.set_word_pos(parse_progress(&progress, "rng_word_pos")?);
        gan.steps = StepCounts {
            discriminator: parse_progress(&progress, "disc_steps")?,
            generator: parse_progress(&progress, "gen_steps")?,
        };
        Ok(gan)
    }
}
