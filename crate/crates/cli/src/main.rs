//! `sgan`: encode meshes to SMVs, train the cascade, synthesize and score.

mod commands;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "sgan", version, about = "Spherical-harmonic shape encoding and cascaded spectral GANs")]
struct Cli {
    /// Master seed; overrides the config file where one is read.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CloudFormat {
    Ply,
    Xyz,
}

impl CloudFormat {
    pub fn extension(self) -> &'static str {
        match self {
            CloudFormat::Ply => "ply",
            CloudFormat::Xyz => "xyz",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Family {
    Ellipsoid,
    Box,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write procedural meshes (OBJ) for experiments.
    Synth {
        #[arg(long, value_enum, default_value = "ellipsoid")]
        family: Family,
        #[arg(long, default_value_t = 200)]
        count: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Encode every OBJ/OFF mesh in a directory as an SMV.
    Encode {
        mesh_dir: PathBuf,
        #[arg(long)]
        bandlimit: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Decode one SMV file or a directory of them into point clouds.
    Decode {
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "ply")]
        format: CloudFormat,
    },
    /// Train the cascade on a directory of SMVs.
    Train {
        #[arg(long)]
        data: PathBuf,
        /// Key-value config file; flags take precedence over it.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        bandlimit: Option<usize>,
        /// Checkpoint directory.
        #[arg(long)]
        out: PathBuf,
        /// Continue from the checkpoint in --out.
        #[arg(long)]
        resume: bool,
        /// Shapes per class for feature-extractor pretraining.
        #[arg(long, default_value_t = 100)]
        pretrain_shapes: usize,
    },
    /// Synthesize SMVs and their point clouds from a checkpoint.
    Generate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 10)]
        count: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "ply")]
        format: CloudFormat,
        /// Use only the forward generators.
        #[arg(long)]
        forward_only: bool,
    },
    /// MMD-CD / MMD-EMD between two directories of SMVs or point clouds.
    Eval {
        generated: PathBuf,
        reference: PathBuf,
        /// Also write the report here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "info",
        1 => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    let seed = cli.seed;
    let result = match cli.command {
        Command::Synth { family, count, out } => commands::synth(family, count, &out, seed),
        Command::Encode {
            mesh_dir,
            bandlimit,
            out,
        } => commands::encode(&mesh_dir, bandlimit, &out),
        Command::Decode { input, out, format } => commands::decode(&input, &out, format),
        Command::Train {
            data,
            config,
            bandlimit,
            out,
            resume,
            pretrain_shapes,
        } => commands::train(commands::TrainArgs {
            data: &data,
            config: config.as_deref(),
            bandlimit,
            seed,
            out: &out,
            resume,
            pretrain_shapes,
        }),
        Command::Generate {
            checkpoint,
            count,
            out,
            format,
            forward_only,
        } => commands::generate(&checkpoint, count, seed.unwrap_or(0), &out, format, forward_only),
        Command::Eval {
            generated,
            reference,
            out,
        } => commands::eval(&generated, &reference, out.as_deref(), seed.unwrap_or(0)),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
