//! Stage artifacts for the step-by-step CLI flow.
//!
//! `gen` writes `environments.json` and `clouds.bin`; `trace` reads the
//! environments and writes `paths.bin` (full multipath, little-endian f64
//! records) and `labels.bin`; `features` combines environments, clouds, and
//! labels into the final dataset directory. Running the stages produces
//! byte-identical records to the one-shot dataset build.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::raytrace::{Path as RayPath, SphericalAngles};
use crate::scene::{ms_positions, Environment, PointCloud};

use super::config::{FeatureKind, RunConfig};
use super::dataset::{
    build_cloud, build_env, codebooks, label_link, sample_feature, trace_env, write_dataset,
    Dataset, DatasetRecord, Manifest,
};

pub const ENVIRONMENTS_FILE: &str = "environments.json";
pub const CLOUDS_FILE: &str = "clouds.bin";
pub const PATHS_FILE: &str = "paths.bin";
pub const LABELS_FILE: &str = "labels.bin";

const CLOUDS_MAGIC: &[u8; 8] = b"PBCLDS01";
const PATHS_MAGIC: &[u8; 8] = b"PBPATH01";
const LABELS_MAGIC: &[u8; 8] = b"PBLABL01";
const STAGE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvEntry {
    pub env_id: u32,
    pub environment: Environment<f64>,
}

/// One labeled link as stored in `labels.bin`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabelEntry {
    pub env_id: u32,
    pub ms_index: u32,
    pub path_count: u32,
    pub t_opt: u16,
    pub r_opt: u16,
    pub objective_gain: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GenSummary {
    pub environments: usize,
    pub total_points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceSummary {
    pub samples: usize,
    pub total_paths: usize,
    pub labeled: usize,
    pub dropped: usize,
}

fn open_artifact(dir: &Path, name: &str) -> Result<BufReader<File>> {
    let path = dir.join(name);
    File::open(&path)
        .map(BufReader::new)
        .map_err(|e| Error::Config(format!("cannot open {}: {e}", path.display())))
}

fn check_magic(input: &mut impl Read, magic: &[u8; 8], what: &str) -> Result<()> {
    let mut buf = [0u8; 8];
    input.read_exact(&mut buf)?;
    if &buf != magic {
        return Err(Error::Format(format!("{what}: bad magic")));
    }
    let mut word = [0u8; 4];
    input.read_exact(&mut word)?;
    if u32::from_le_bytes(word) != STAGE_VERSION {
        return Err(Error::Format(format!("{what}: unsupported version")));
    }
    Ok(())
}

fn read_u32(input: &mut impl Read) -> Result<u32> {
    let mut word = [0u8; 4];
    input.read_exact(&mut word)?;
    Ok(u32::from_le_bytes(word))
}

fn read_u64(input: &mut impl Read) -> Result<u64> {
    let mut word = [0u8; 8];
    input.read_exact(&mut word)?;
    Ok(u64::from_le_bytes(word))
}

fn read_f64(input: &mut impl Read) -> Result<f64> {
    let mut word = [0u8; 8];
    input.read_exact(&mut word)?;
    Ok(f64::from_le_bytes(word))
}

/// Generates every environment plus its panoramic cloud and writes both
/// artifacts.
pub fn run_gen_stage(cfg: &RunConfig, dir: &Path) -> Result<GenSummary> {
    cfg.validate()?;
    std::fs::create_dir_all(dir)?;
    let env_ids: Vec<u32> = (0..cfg.total_envs()).collect();
    let built: Result<Vec<(EnvEntry, PointCloud<f64>)>> = env_ids
        .par_iter()
        .map(|&env_id| {
            let environment = build_env(cfg, env_id)?;
            let cloud = build_cloud(cfg, &environment, env_id)?;
            Ok((
                EnvEntry {
                    env_id,
                    environment,
                },
                cloud,
            ))
        })
        .collect();
    let built = built?;

    let entries: Vec<&EnvEntry> = built.iter().map(|(e, _)| e).collect();
    let json = serde_json::to_vec_pretty(&entries)?;
    std::fs::write(dir.join(ENVIRONMENTS_FILE), json)?;

    let mut out = BufWriter::new(File::create(dir.join(CLOUDS_FILE))?);
    out.write_all(CLOUDS_MAGIC)?;
    out.write_all(&STAGE_VERSION.to_le_bytes())?;
    out.write_all(&(built.len() as u32).to_le_bytes())?;
    let mut total_points = 0usize;
    for (entry, cloud) in &built {
        out.write_all(&entry.env_id.to_le_bytes())?;
        out.write_all(&(cloud.len() as u64).to_le_bytes())?;
        for p in &cloud.points {
            out.write_all(&p.x.to_le_bytes())?;
            out.write_all(&p.y.to_le_bytes())?;
            out.write_all(&p.z.to_le_bytes())?;
        }
        total_points += cloud.len();
    }
    out.flush()?;
    Ok(GenSummary {
        environments: built.len(),
        total_points,
    })
}

pub fn read_environments(dir: &Path) -> Result<Vec<EnvEntry>> {
    let path = dir.join(ENVIRONMENTS_FILE);
    let bytes = std::fs::read(&path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    Ok(serde_json::from_slice(&bytes)?)
}

pub fn read_clouds(dir: &Path) -> Result<Vec<(u32, PointCloud<f64>)>> {
    let mut input = open_artifact(dir, CLOUDS_FILE)?;
    check_magic(&mut input, CLOUDS_MAGIC, CLOUDS_FILE)?;
    let count = read_u32(&mut input)? as usize;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let env_id = read_u32(&mut input)?;
        let n = read_u64(&mut input)? as usize;
        let mut points = Vec::with_capacity(n);
        for _ in 0..n {
            let x = read_f64(&mut input)?;
            let y = read_f64(&mut input)?;
            let z = read_f64(&mut input)?;
            points.push(Vec3::new(x, y, z));
        }
        out.push((env_id, PointCloud { points }));
    }
    Ok(out)
}

/// Traces every link, labels it, and writes `paths.bin` and `labels.bin`.
pub fn run_trace_stage(cfg: &RunConfig, dir: &Path) -> Result<TraceSummary> {
    cfg.validate()?;
    let entries = read_environments(dir)?;
    let (cb_tx, cb_rx) = codebooks(cfg)?;

    type EnvTraces = (u32, Vec<(u32, Vec<RayPath<f64>>)>);
    let traced: Result<Vec<EnvTraces>> = entries
        .par_iter()
        .map(|entry| Ok((entry.env_id, trace_env(cfg, &entry.environment)?)))
        .collect();
    let traced = traced?;

    let mut paths_out = BufWriter::new(File::create(dir.join(PATHS_FILE))?);
    paths_out.write_all(PATHS_MAGIC)?;
    paths_out.write_all(&STAGE_VERSION.to_le_bytes())?;
    let n_samples: usize = traced.iter().map(|(_, t)| t.len()).sum();
    paths_out.write_all(&(n_samples as u32).to_le_bytes())?;

    let mut labels = Vec::new();
    let mut dropped = 0usize;
    let mut total_paths = 0usize;
    for (env_id, samples) in &traced {
        for (ms_index, paths) in samples {
            paths_out.write_all(&env_id.to_le_bytes())?;
            paths_out.write_all(&ms_index.to_le_bytes())?;
            paths_out.write_all(&(paths.len() as u32).to_le_bytes())?;
            for p in paths {
                for v in [
                    p.gain.re,
                    p.gain.im,
                    p.aod.elevation,
                    p.aod.azimuth,
                    p.aoa.elevation,
                    p.aoa.azimuth,
                    p.length_m,
                    p.bounces as f64,
                ] {
                    paths_out.write_all(&v.to_le_bytes())?;
                }
            }
            total_paths += paths.len();
            match label_link(paths, &cb_tx, &cb_rx)? {
                Some((t_opt, r_opt, objective_gain)) => labels.push(LabelEntry {
                    env_id: *env_id,
                    ms_index: *ms_index,
                    path_count: paths.len() as u32,
                    t_opt,
                    r_opt,
                    objective_gain,
                }),
                None => dropped += 1,
            }
        }
    }
    paths_out.flush()?;

    let mut labels_out = BufWriter::new(File::create(dir.join(LABELS_FILE))?);
    labels_out.write_all(LABELS_MAGIC)?;
    labels_out.write_all(&STAGE_VERSION.to_le_bytes())?;
    labels_out.write_all(&(labels.len() as u32).to_le_bytes())?;
    labels_out.write_all(&(dropped as u32).to_le_bytes())?;
    for label in &labels {
        labels_out.write_all(&label.env_id.to_le_bytes())?;
        labels_out.write_all(&label.ms_index.to_le_bytes())?;
        labels_out.write_all(&label.path_count.to_le_bytes())?;
        labels_out.write_all(&label.t_opt.to_le_bytes())?;
        labels_out.write_all(&label.r_opt.to_le_bytes())?;
        labels_out.write_all(&label.objective_gain.to_le_bytes())?;
    }
    labels_out.flush()?;

    Ok(TraceSummary {
        samples: n_samples,
        total_paths,
        labeled: labels.len(),
        dropped,
    })
}

pub fn read_labels(dir: &Path) -> Result<(Vec<LabelEntry>, usize)> {
    let mut input = open_artifact(dir, LABELS_FILE)?;
    check_magic(&mut input, LABELS_MAGIC, LABELS_FILE)?;
    let count = read_u32(&mut input)? as usize;
    let dropped = read_u32(&mut input)? as usize;
    let mut out = Vec::with_capacity(count);
    let mut half = [0u8; 2];
    for _ in 0..count {
        let env_id = read_u32(&mut input)?;
        let ms_index = read_u32(&mut input)?;
        let path_count = read_u32(&mut input)?;
        input.read_exact(&mut half)?;
        let t_opt = u16::from_le_bytes(half);
        input.read_exact(&mut half)?;
        let r_opt = u16::from_le_bytes(half);
        let objective_gain = read_f64(&mut input)?;
        out.push(LabelEntry {
            env_id,
            ms_index,
            path_count,
            t_opt,
            r_opt,
            objective_gain,
        });
    }
    Ok((out, dropped))
}

/// Reads traced paths back (used by inspection and tests).
pub fn read_paths(dir: &Path) -> Result<Vec<(u32, u32, Vec<RayPath<f64>>)>> {
    let mut input = open_artifact(dir, PATHS_FILE)?;
    check_magic(&mut input, PATHS_MAGIC, PATHS_FILE)?;
    let n_samples = read_u32(&mut input)? as usize;
    let mut out = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let env_id = read_u32(&mut input)?;
        let ms_index = read_u32(&mut input)?;
        let n_paths = read_u32(&mut input)? as usize;
        let mut paths = Vec::with_capacity(n_paths);
        for _ in 0..n_paths {
            let re = read_f64(&mut input)?;
            let im = read_f64(&mut input)?;
            let aod_el = read_f64(&mut input)?;
            let aod_az = read_f64(&mut input)?;
            let aoa_el = read_f64(&mut input)?;
            let aoa_az = read_f64(&mut input)?;
            let length_m = read_f64(&mut input)?;
            let bounces = read_f64(&mut input)? as u32;
            paths.push(RayPath {
                gain: Complex::new(re, im),
                aod: SphericalAngles {
                    elevation: aod_el,
                    azimuth: aod_az,
                },
                aoa: SphericalAngles {
                    elevation: aoa_el,
                    azimuth: aoa_az,
                },
                length_m,
                bounces,
                // Vertex geometry is not persisted; angles, length, and
                // bounce count fully determine the channel contribution.
                vertices: vec![],
            });
        }
        out.push((env_id, ms_index, paths));
    }
    Ok(out)
}

/// Builds `records.bin` + `manifest.json` from the staged artifacts.
pub fn run_features_stage(cfg: &RunConfig, dir: &Path) -> Result<Manifest> {
    cfg.validate()?;
    let entries = read_environments(dir)?;
    let (labels, dropped) = read_labels(dir)?;
    let clouds = match cfg.feature_kind {
        FeatureKind::Panoramic => read_clouds(dir)?,
        FeatureKind::Lidar => Vec::new(),
    };

    let records: Result<Vec<Vec<DatasetRecord>>> = entries
        .par_iter()
        .map(|entry| {
            let env = &entry.environment;
            let positions = ms_positions(&env.layout)?;
            let cloud = clouds
                .iter()
                .find(|(id, _)| *id == entry.env_id)
                .map(|(_, c)| c);
            if cfg.feature_kind == FeatureKind::Panoramic && cloud.is_none() {
                return Err(Error::Config(format!(
                    "no cloud stored for environment {}",
                    entry.env_id
                )));
            }
            labels
                .iter()
                .filter(|l| l.env_id == entry.env_id)
                .map(|label| {
                    let ms = positions[label.ms_index as usize];
                    let feature =
                        sample_feature(cfg, env, cloud, ms, cfg.lidar.range_m)?;
                    Ok(DatasetRecord {
                        env_id: label.env_id,
                        ms_index: label.ms_index,
                        path_count: label.path_count,
                        t_opt: label.t_opt,
                        r_opt: label.r_opt,
                        objective_gain: label.objective_gain,
                        feature: feature.as_slice().iter().map(|v| *v as f32).collect(),
                    })
                })
                .collect()
        })
        .collect();
    let records: Vec<DatasetRecord> = records?.into_iter().flatten().collect();

    let grid = *cfg.feature_grid();
    let manifest = Manifest {
        format_version: 1,
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
    let dataset = Dataset {
        manifest: manifest.clone(),
        records,
    };
    write_dataset(dir, &dataset)?;
    Ok(manifest)
}
