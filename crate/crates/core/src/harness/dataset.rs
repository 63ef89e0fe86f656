//! Dataset records, the on-disk dataset format, and the build pipeline.
//!
//! A dataset directory holds `manifest.json` (versioned metadata plus the
//! full config that produced it) and `records.bin` (fixed-stride
//! little-endian records: u32 header ids, the float32 feature block, two u16
//! label indices, and the f64 objective gain). Fixed stride keeps records
//! seekable without an index.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{
    extract_lidar_feature, extract_panoramic, PanoramicFeature, VoxelGridSpec,
};
use crate::features::simulate_lidar_scan;
use crate::geometry::Vec3;
use crate::neuralnet::TrainingSet;
use crate::phy::{beam_pair_objective, build_codebook, optimal_pair, Codebook};
use crate::raytrace::{trace_paths, Path as RayPath};
use crate::scene::{
    building_catalog, generate_environment, ms_positions, synthesize_point_cloud, Environment,
    PointCloud,
};

use super::config::{FeatureKind, RunConfig};

pub const RECORDS_FILE: &str = "records.bin";
pub const MANIFEST_FILE: &str = "manifest.json";
const RECORDS_MAGIC: &[u8; 8] = b"PBRECS01";
const FORMAT_VERSION: u32 = 1;

/// One labeled sample.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetRecord {
    pub env_id: u32,
    pub ms_index: u32,
    /// Paths the tracer returned for this link.
    pub path_count: u32,
    /// Optimal transmit beam (0-based codebook index).
    pub t_opt: u16,
    /// Optimal receive beam (0-based codebook index).
    pub r_opt: u16,
    /// Maximized beam-pair objective.
    pub objective_gain: f64,
    /// Feature tensor, row-major (a, b, c, 3), stored single-precision.
    pub feature: Vec<f32>,
}

/// Dataset metadata; serialized as `manifest.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub feature_kind: FeatureKind,
    pub codebook_n: usize,
    pub grid: VoxelGridSpec<f64>,
    pub feature_len: usize,
    pub n_records: usize,
    /// Shadowed receiver positions (no usable path) excluded from records.
    pub n_dropped: usize,
    pub train_envs: u32,
    pub test_envs: u32,
    /// Observational distance used when `feature_kind` is lidar.
    pub lidar_range_m: Option<f64>,
    pub config: RunConfig,
}

/// An in-memory dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub manifest: Manifest,
    pub records: Vec<DatasetRecord>,
}

/// Deterministic per-stream seed derivation (splitmix64 finalizer).
pub fn derive_seed(master: u64, stream: u64, salt: u64) -> u64 {
    let mut z = master
        ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ salt.wrapping_mul(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const STREAM_ENV: u64 = 1;
const STREAM_CLOUD: u64 = 2;

/// Generates environment `env_id` of the run.
pub fn build_env(cfg: &RunConfig, env_id: u32) -> Result<Environment<f64>> {
    let layout = cfg.scene_layout();
    let catalog = building_catalog();
    generate_environment(&layout, &catalog, derive_seed(cfg.seed, STREAM_ENV, env_id as u64))
}

/// Synthesizes the panoramic cloud of environment `env_id`.
pub fn build_cloud(cfg: &RunConfig, env: &Environment<f64>, env_id: u32) -> Result<PointCloud<f64>> {
    synthesize_point_cloud(
        env,
        cfg.cloud.density,
        cfg.cloud.noise_sigma,
        derive_seed(cfg.seed, STREAM_CLOUD, env_id as u64),
    )
}

/// Traced multipath per receiver position (empty set = shadowed).
pub fn trace_env(
    cfg: &RunConfig,
    env: &Environment<f64>,
) -> Result<Vec<(u32, Vec<RayPath<f64>>)>> {
    let positions = ms_positions(&env.layout)?;
    let bs = env.layout.bs_position;
    positions
        .iter()
        .enumerate()
        .map(|(idx, &ms)| Ok((idx as u32, trace_paths(env, bs, ms, &cfg.trace)?)))
        .collect()
}

/// Codebooks for both link ends.
pub fn codebooks(cfg: &RunConfig) -> Result<(Codebook<f64>, Codebook<f64>)> {
    let elevation = cfg.codebook.elevation_rad();
    Ok((
        build_codebook(cfg.arrays.bs, cfg.codebook.n_beams, elevation)?,
        build_codebook(cfg.arrays.ms, cfg.codebook.n_beams, elevation)?,
    ))
}

/// Labels one link; None when the link carries no usable path.
pub fn label_link(
    paths: &[RayPath<f64>],
    cb_tx: &Codebook<f64>,
    cb_rx: &Codebook<f64>,
) -> Result<Option<(u16, u16, f64)>> {
    if paths.is_empty() {
        return Ok(None);
    }
    let objective = beam_pair_objective(paths, cb_tx, cb_rx)?;
    match optimal_pair(&objective) {
        Ok(label) => Ok(Some((label.t_opt as u16, label.r_opt as u16, label.gain))),
        Err(Error::NoLink) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Extracts the configured feature for one receiver position.
pub fn sample_feature(
    cfg: &RunConfig,
    env: &Environment<f64>,
    cloud: Option<&PointCloud<f64>>,
    ms: Vec3<f64>,
    lidar_range_m: f64,
) -> Result<PanoramicFeature<f64>> {
    let bs = env.layout.bs_position;
    match cfg.feature_kind {
        FeatureKind::Panoramic => {
            let cloud = cloud.ok_or_else(|| {
                Error::Config("panoramic features need the synthesized cloud".into())
            })?;
            extract_panoramic(cloud, ms - bs, &cfg.grid)
        }
        FeatureKind::Lidar => {
            let scan = simulate_lidar_scan(env, ms, &cfg.lidar.scan_config(lidar_range_m))?;
            extract_lidar_feature(&scan, bs - ms, &cfg.lidar.grid)
        }
    }
}

struct EnvBatch {
    records: Vec<DatasetRecord>,
    dropped: usize,
}

fn build_env_records(cfg: &RunConfig, env_id: u32) -> Result<EnvBatch> {
    let env = build_env(cfg, env_id)?;
    let cloud = match cfg.feature_kind {
        FeatureKind::Panoramic => Some(build_cloud(cfg, &env, env_id)?),
        FeatureKind::Lidar => None,
    };
    let (cb_tx, cb_rx) = codebooks(cfg)?;
    let positions = ms_positions(&env.layout)?;
    let traces = trace_env(cfg, &env)?;

    let mut records = Vec::with_capacity(traces.len());
    let mut dropped = 0usize;
    for (ms_index, paths) in traces {
        let Some((t_opt, r_opt, gain)) = label_link(&paths, &cb_tx, &cb_rx)? else {
            dropped += 1;
            continue;
        };
        let ms = positions[ms_index as usize];
        let feature = sample_feature(cfg, &env, cloud.as_ref(), ms, cfg.lidar.range_m)?;
        records.push(DatasetRecord {
            env_id,
            ms_index,
            path_count: paths.len() as u32,
            t_opt,
            r_opt,
            objective_gain: gain,
            feature: feature.as_slice().iter().map(|v| *v as f32).collect(),
        });
    }
    Ok(EnvBatch { records, dropped })
}

/// Builds the full dataset for the config: every environment, every receiver
/// position, traced, labeled, and encoded. Environments are processed in a
/// worker pool; records come out sorted by (env_id, ms_index) regardless of
/// scheduling.
pub fn build_dataset(cfg: &RunConfig) -> Result<Dataset> {
    cfg.validate()?;
    let env_ids: Vec<u32> = (0..cfg.total_envs()).collect();
    let batches: Result<Vec<EnvBatch>> = env_ids
        .par_iter()
        .map(|&env_id| build_env_records(cfg, env_id))
        .collect();
    let batches = batches?;

    let mut records = Vec::new();
    let mut dropped = 0usize;
    for batch in batches {
        dropped += batch.dropped;
        records.extend(batch.records);
    }

    let grid = *cfg.feature_grid();
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        feature_kind: cfg.feature_kind,
        codebook_n: cfg.codebook.n_beams,
        grid,
        feature_len: grid.feature_len(),
        n_records: records.len(),
        n_dropped: dropped,
        train_envs: cfg.train_envs,
        test_envs: cfg.test_envs,
        lidar_range_m: match cfg.feature_kind {
            FeatureKind::Lidar => Some(cfg.lidar.range_m),
            FeatureKind::Panoramic => None,
        },
        config: cfg.clone(),
    };
    Ok(Dataset { manifest, records })
}

/// Splits records strictly by environment id: environments `0..train_envs`
/// train, the rest test, so evaluation measures generalization to unseen
/// environments. Aborts if any record's environment falls outside the
/// configured split.
pub fn split_by_environment<'a>(
    records: &'a [DatasetRecord],
    manifest: &Manifest,
) -> Result<(Vec<&'a DatasetRecord>, Vec<&'a DatasetRecord>)> {
    let mut train = Vec::new();
    let mut test = Vec::new();
    for record in records {
        if record.env_id < manifest.train_envs {
            train.push(record);
        } else if record.env_id < manifest.train_envs + manifest.test_envs {
            test.push(record);
        } else {
            return Err(Error::Config(format!(
                "record from environment {} outside the {}+{} split",
                record.env_id, manifest.train_envs, manifest.test_envs
            )));
        }
    }
    let leak = train
        .iter()
        .any(|tr| test.iter().any(|te| te.env_id == tr.env_id));
    if leak {
        return Err(Error::Config("environment appears on both split sides".into()));
    }
    Ok((train, test))
}

/// Training-set adapter over borrowed records (features widen f32 -> f64).
pub struct RecordSet<'a> {
    pub records: Vec<&'a DatasetRecord>,
}

impl TrainingSet<f64> for RecordSet<'_> {
    fn len(&self) -> usize {
        self.records.len()
    }
    fn write_feature(&self, idx: usize, out: &mut [f64]) {
        for (dst, &src) in out.iter_mut().zip(&self.records[idx].feature) {
            *dst = src as f64;
        }
    }
    fn label(&self, idx: usize) -> (usize, usize) {
        let r = self.records[idx];
        (r.t_opt as usize, r.r_opt as usize)
    }
}

/// Writes `manifest.json` and `records.bin` into `dir` (created if needed).
pub fn write_dataset(dir: &Path, dataset: &Dataset) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let manifest_bytes = serde_json::to_vec_pretty(&dataset.manifest)?;
    std::fs::write(dir.join(MANIFEST_FILE), manifest_bytes)?;

    let mut out = BufWriter::new(File::create(dir.join(RECORDS_FILE))?);
    out.write_all(RECORDS_MAGIC)?;
    out.write_all(&FORMAT_VERSION.to_le_bytes())?;
    out.write_all(&(dataset.records.len() as u32).to_le_bytes())?;
    out.write_all(&(dataset.manifest.feature_len as u32).to_le_bytes())?;
    for record in &dataset.records {
        if record.feature.len() != dataset.manifest.feature_len {
            return Err(Error::ShapeMismatch(format!(
                "record ({}, {}) feature length {} != manifest {}",
                record.env_id,
                record.ms_index,
                record.feature.len(),
                dataset.manifest.feature_len
            )));
        }
        out.write_all(&record.env_id.to_le_bytes())?;
        out.write_all(&record.ms_index.to_le_bytes())?;
        out.write_all(&record.path_count.to_le_bytes())?;
        for v in &record.feature {
            out.write_all(&v.to_le_bytes())?;
        }
        out.write_all(&record.t_opt.to_le_bytes())?;
        out.write_all(&record.r_opt.to_le_bytes())?;
        out.write_all(&record.objective_gain.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a dataset directory written by [`write_dataset`].
pub fn read_dataset(dir: &Path) -> Result<Dataset> {
    let manifest_text = std::fs::read(dir.join(MANIFEST_FILE))?;
    let manifest: Manifest = serde_json::from_slice(&manifest_text)?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "unsupported dataset version {}",
            manifest.format_version
        )));
    }

    let mut input = BufReader::new(File::open(dir.join(RECORDS_FILE))?);
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != RECORDS_MAGIC {
        return Err(Error::Format("records.bin has a bad magic".into()));
    }
    let mut word = [0u8; 4];
    input.read_exact(&mut word)?;
    if u32::from_le_bytes(word) != FORMAT_VERSION {
        return Err(Error::Format("records.bin version mismatch".into()));
    }
    input.read_exact(&mut word)?;
    let n_records = u32::from_le_bytes(word) as usize;
    input.read_exact(&mut word)?;
    let feature_len = u32::from_le_bytes(word) as usize;
    if n_records != manifest.n_records || feature_len != manifest.feature_len {
        return Err(Error::Format(
            "records.bin header disagrees with manifest.json".into(),
        ));
    }

    let mut records = Vec::with_capacity(n_records);
    let mut half = [0u8; 2];
    let mut wide = [0u8; 8];
    for _ in 0..n_records {
        input.read_exact(&mut word)?;
        let env_id = u32::from_le_bytes(word);
        input.read_exact(&mut word)?;
        let ms_index = u32::from_le_bytes(word);
        input.read_exact(&mut word)?;
        let path_count = u32::from_le_bytes(word);
        let mut feature = vec![0f32; feature_len];
        for v in feature.iter_mut() {
            input.read_exact(&mut word)?;
            *v = f32::from_le_bytes(word);
        }
        input.read_exact(&mut half)?;
        let t_opt = u16::from_le_bytes(half);
        input.read_exact(&mut half)?;
        let r_opt = u16::from_le_bytes(half);
        input.read_exact(&mut wide)?;
        let objective_gain = f64::from_le_bytes(wide);
        records.push(DatasetRecord {
            env_id,
            ms_index,
            path_count,
            t_opt,
            r_opt,
            objective_gain,
            feature,
        });
    }
    Ok(Dataset { manifest, records })
}
