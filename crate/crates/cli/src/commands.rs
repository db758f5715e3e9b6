use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use sgan_core::cascade::{CascadeGan, SmvDataset, SpatialRegularizer, SynthesisMode, TrainConfig};
use sgan_core::codec::{decode as decode_smv, encode_mesh};
use sgan_core::feature::{FeatureExtractor, DEFAULT_FEATURE_DIM};
use sgan_core::io::{read_cloud, read_mesh, write_obj, write_ply, write_xyz};
use sgan_core::metrics::MetricReport;
use sgan_core::nn::Mlp;
use sgan_core::pipeline::{decode_all, features_of, pretrain_on_synthetic};
use sgan_core::sampler::MAX_MISS_FRACTION;
use sgan_core::synthetic::{boxes, ellipsoids};
use sgan_core::{PointCloud, Smv};

use crate::error::{CliError, CliResult};
use crate::{CloudFormat, Family};

const FEATURE_FILE: &str = "feature.nnw";

/// Files in `dir` whose extension is one of `exts`, sorted by name.
fn list_files(dir: &Path, exts: &[&str]) -> CliResult<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry?.path();
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase);
        if path.is_file() && ext.is_some_and(|e| exts.contains(&e.as_str())) {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "shape".into())
}

fn write_cloud(cloud: &PointCloud, path: &Path, format: CloudFormat) -> CliResult {
    let w = BufWriter::new(fs::File::create(path)?);
    match format {
        CloudFormat::Ply => write_ply(cloud, w)?,
        CloudFormat::Xyz => write_xyz(cloud, w)?,
    }
    Ok(())
}

pub fn synth(family: Family, count: usize, out: &Path, seed: Option<u64>) -> CliResult {
    fs::create_dir_all(out)?;
    let seed = seed.unwrap_or(0);
    let (meshes, prefix) = match family {
        Family::Ellipsoid => (ellipsoids(count, seed), "ellipsoid"),
        Family::Box => (boxes(count, seed), "box"),
    };
    for (i, mesh) in meshes.iter().enumerate() {
        let f = fs::File::create(out.join(format!("{prefix}_{i:04}.obj")))?;
        write_obj(mesh, BufWriter::new(f))?;
    }
    log::info!("wrote {count} {prefix} meshes to {}", out.display());
    Ok(())
}

pub fn encode(mesh_dir: &Path, bandlimit: usize, out: &Path) -> CliResult {
    if bandlimit == 0 {
        return Err(CliError::Config("--bandlimit must be at least 1".into()));
    }
    let meshes = list_files(mesh_dir, &["obj", "off"])?;
    if meshes.is_empty() {
        return Err(CliError::Data(format!("no OBJ/OFF meshes in {}", mesh_dir.display())));
    }
    fs::create_dir_all(out)?;
    let mut written = 0;
    for path in &meshes {
        let encoded = match read_mesh(path).and_then(|m| encode_mesh(&m, bandlimit)) {
            Ok(e) => e,
            Err(e) => {
                log::warn!("skipping {}: {e}", path.display());
                continue;
            }
        };
        let rate = encoded.miss_fraction();
        if rate > MAX_MISS_FRACTION {
            log::warn!("skipping {}: {:.1}% of rays missed (not polar)", path.display(), 100.0 * rate);
            continue;
        }
        if encoded.misses > 0 {
            log::info!("{}: {:.1}% of rays missed", path.display(), 100.0 * rate);
        }
        encoded.smv.save(out.join(format!("{}.smv", stem(path))))?;
        written += 1;
    }
    log::info!("encoded {written} of {} meshes at bandlimit {bandlimit}", meshes.len());
    if written == 0 {
        return Err(CliError::Data("no mesh could be encoded".into()));
    }
    Ok(())
}

pub fn decode(input: &Path, out: &Path, format: CloudFormat) -> CliResult {
    let files = if input.is_dir() {
        list_files(input, &["smv", "txt"])?
    } else if input.is_file() {
        vec![input.to_path_buf()]
    } else {
        return Err(CliError::Data(format!("{} does not exist", input.display())));
    };
    fs::create_dir_all(out)?;
    for path in &files {
        let smv = Smv::load(path)?;
        let target = out.join(format!("{}.{}", stem(path), format.extension()));
        write_cloud(&decode_smv(&smv), &target, format)?;
    }
    log::info!("decoded {} SMVs into {}", files.len(), out.display());
    Ok(())
}

fn load_smvs(dir: &Path) -> CliResult<Vec<Smv>> {
    if !dir.is_dir() {
        return Err(CliError::Data(format!("dataset directory {} does not exist", dir.display())));
    }
    let files = list_files(dir, &["smv"])?;
    if files.is_empty() {
        return Err(CliError::Data(format!("no .smv files in {}", dir.display())));
    }
    files.iter().map(|p| Smv::load(p).map_err(CliError::from)).collect()
}

pub struct TrainArgs<'a> {
    pub data: &'a Path,
    pub config: Option<&'a Path>,
    pub bandlimit: Option<usize>,
    pub seed: Option<u64>,
    pub out: &'a Path,
    pub resume: bool,
    pub pretrain_shapes: usize,
}

pub fn train(args: TrainArgs<'_>) -> CliResult {
    let mut config = TrainConfig::default();
    if let Some(path) = args.config {
        let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        config.merge_str(&text)?;
    }
    if let Some(m) = args.bandlimit {
        config.bandlimit = m;
    }
    if let Some(s) = args.seed {
        config.seed = s;
    }
    config.validate()?;

    let smvs = load_smvs(args.data)?;
    let dataset = SmvDataset::from_smvs(&smvs)?;
    if dataset.max_degree() != config.bandlimit {
        return Err(CliError::Config(format!(
            "dataset bandlimit {} differs from configured bandlimit {}",
            dataset.max_degree(),
            config.bandlimit
        )));
    }

    let feature_path = args.out.join(FEATURE_FILE);
    let resuming = args.resume && args.out.join(sgan_core::cascade::checkpoint::PROGRESS_FILE).is_file();
    let mut gan = if resuming {
        let gan = CascadeGan::load(args.out)?;
        if gan.config() != &config {
            log::warn!("resuming with the checkpoint's own configuration");
        }
        log::info!("resuming after {} outer iterations", gan.completed_outer());
        gan
    } else {
        if args.resume {
            log::warn!("no checkpoint in {}; starting fresh", args.out.display());
        }
        CascadeGan::new(config, dataset.scale().to_vec())?
    };
    let seed = gan.config().seed;

    let features = if resuming && feature_path.is_file() {
        FeatureExtractor::from_net(Mlp::load(&feature_path)?, true)?
    } else {
        let (fe, report) = pretrain_on_synthetic(dataset.max_degree(), args.pretrain_shapes, DEFAULT_FEATURE_DIM, seed)?;
        log::info!(
            "feature extractor pretrained: {:.1}% accuracy after {} epochs",
            100.0 * report.accuracy,
            report.epochs
        );
        fs::create_dir_all(args.out)?;
        fe.net().save(&feature_path)?;
        fe
    };
    let targets = features_of(&features, &decode_all(&smvs))?;
    let regularizer = SpatialRegularizer {
        features: &features,
        targets: &targets,
    };
    gan.save(args.out)?;
    gan.train(&dataset, Some(&regularizer), |g| {
        log::info!("checkpoint after outer iteration {}", g.completed_outer());
        g.save(args.out)
    })?;
    gan.save(args.out)?;
    log::info!("training finished; checkpoint in {}", args.out.display());
    Ok(())
}

pub fn generate(
    checkpoint: &Path,
    count: usize,
    seed: u64,
    out: &Path,
    format: CloudFormat,
    forward_only: bool,
) -> CliResult {
    let gan = CascadeGan::load(checkpoint)?;
    let mode = if forward_only {
        SynthesisMode::ForwardOnly
    } else {
        SynthesisMode::Full
    };
    let smvs = gan.synthesize(count, seed, mode)?;
    if count == 0 {
        return Ok(());
    }
    fs::create_dir_all(out)?;
    for (i, smv) in smvs.iter().enumerate() {
        let cloud = decode_smv(smv);
        if cloud.points.iter().flatten().any(|v| !v.is_finite()) {
            return Err(CliError::Numerical(format!("sample {i} decodes to non-finite radii")));
        }
        smv.save(out.join(format!("sample_{i:04}.smv")))?;
        write_cloud(&cloud, &out.join(format!("sample_{i:04}.{}", format.extension())), format)?;
    }
    log::info!("wrote {count} samples to {}", out.display());
    Ok(())
}

/// SMVs are decoded; point-cloud files are read as they are.
fn load_clouds(dir: &Path) -> CliResult<Vec<PointCloud>> {
    if !dir.is_dir() {
        return Err(CliError::Data(format!("{} is not a directory", dir.display())));
    }
    let smvs = list_files(dir, &["smv"])?;
    let clouds = if smvs.is_empty() {
        list_files(dir, &["ply", "xyz"])?
            .iter()
            .map(|p| read_cloud(p).map_err(CliError::from))
            .collect::<CliResult<Vec<_>>>()?
    } else {
        smvs.iter()
            .map(|p| Smv::load(p).map(|s| decode_smv(&s)).map_err(CliError::from))
            .collect::<CliResult<Vec<_>>>()?
    };
    if clouds.is_empty() {
        return Err(CliError::Data(format!("no SMVs or point clouds in {}", dir.display())));
    }
    Ok(clouds)
}

pub fn eval(generated: &Path, reference: &Path, out: Option<&Path>, seed: u64) -> CliResult {
    let report = MetricReport::compute(&load_clouds(generated)?, &load_clouds(reference)?, seed)?;
    print!("{report}");
    if let Some(path) = out {
        fs::write(path, report.to_string())?;
    }
    Ok(())
}
