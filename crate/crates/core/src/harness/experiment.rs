//! Accuracy-trend experiments: top-5 accuracy versus training-set size, and
//! panoramic features versus the LIDAR-local baseline across observational
//! distances.

use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::neuralnet::{BeamSelectionNet, ModelConfig};

use super::config::{FeatureKind, RunConfig};
use super::dataset::{
    build_dataset, derive_seed, split_by_environment, write_dataset, Dataset, RecordSet,
};
use super::eval::{evaluate_top_m, format_full, Metrics};

const STREAM_SUBSET: u64 = 3;

/// One row of the accuracy-versus-training-size report.
#[derive(Debug, Clone, PartialEq)]
pub struct Fig5Row {
    pub fraction: f64,
    pub n_samples: usize,
    pub top5_accuracy: f64,
}

/// One row of the baseline-comparison report.
#[derive(Debug, Clone, PartialEq)]
pub struct Fig6Row {
    pub m: usize,
    pub lidar_range_m: f64,
    pub panoramic_accuracy: f64,
    pub lidar_accuracy: f64,
}

fn train_and_eval(
    cfg: &RunConfig,
    train: &RecordSet<'_>,
    test: &[&super::dataset::DatasetRecord],
    m_values: &[usize],
    out_dir: &Path,
    loss_csv: &str,
) -> Result<Metrics> {
    let mut net = BeamSelectionNet::<f64>::new(
        ModelConfig::default_for(cfg.codebook.n_beams),
        cfg.model.seed,
    )?;
    let mut cache = net.zeroed_state();
    let curve = net.train(train, &cfg.model.schedule(), &cfg.model.optimizer(), &mut cache)?;
    write_loss_csv(&out_dir.join(loss_csv), &curve)?;
    evaluate_top_m(&net, test, m_values)
}

/// Writes `epoch,mean_loss` rows.
pub fn write_loss_csv(path: &Path, curve: &[f64]) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "epoch,mean_loss")?;
    for (epoch, loss) in curve.iter().enumerate() {
        writeln!(out, "{epoch},{}", format_full(*loss))?;
    }
    Ok(())
}

fn persist(cfg: &RunConfig, dataset: &Dataset, out_dir: &Path, name: &str) -> Result<()> {
    if cfg.experiment.persist_datasets {
        write_dataset(&out_dir.join(name), dataset)?;
    }
    Ok(())
}

/// Sweeps training-set fractions on the panoramic dataset and reports top-5
/// accuracy on the held-out environments. Subsets are nested prefixes of one
/// deterministic shuffle, so larger fractions strictly add samples.
pub fn run_fig5(cfg: &RunConfig, out_dir: &Path) -> Result<Vec<Fig5Row>> {
    cfg.validate()?;
    std::fs::create_dir_all(out_dir)?;
    let mut pano_cfg = cfg.clone();
    pano_cfg.feature_kind = FeatureKind::Panoramic;
    let dataset = build_dataset(&pano_cfg)?;
    persist(cfg, &dataset, out_dir, "dataset_panoramic")?;

    let (train, test) = split_by_environment(&dataset.records, &dataset.manifest)?;
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, STREAM_SUBSET, 0));
    for i in (1..order.len()).rev() {
        let j = rng.random_range(0..=i);
        order.swap(i, j);
    }

    let mut fractions = cfg.experiment.fractions.clone();
    fractions.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut rows = Vec::new();
    for (idx, &fraction) in fractions.iter().enumerate() {
        let k = ((train.len() as f64) * fraction).round().max(1.0) as usize;
        let k = k.min(train.len());
        let subset = RecordSet {
            records: order[..k].iter().map(|&i| train[i]).collect(),
        };
        let metrics = train_and_eval(
            cfg,
            &subset,
            &test,
            &[5],
            out_dir,
            &format!("loss_fraction_{idx}.csv"),
        )?;
        rows.push(Fig5Row {
            fraction,
            n_samples: k,
            top5_accuracy: metrics.top_m[&5],
        });
    }

    let mut out = std::io::BufWriter::new(std::fs::File::create(out_dir.join("fig5.csv"))?);
    writeln!(out, "fraction,n_samples,top5_accuracy")?;
    for row in &rows {
        writeln!(
            out,
            "{},{},{}",
            format_full(row.fraction),
            row.n_samples,
            format_full(row.top5_accuracy)
        )?;
    }
    Ok(rows)
}

/// Trains twin networks (identical architecture, seed, and budget) on
/// panoramic features and on LIDAR-local features at each observational
/// distance, then reports paired top-M accuracies on the held-out
/// environments.
pub fn run_fig6(cfg: &RunConfig, out_dir: &Path) -> Result<Vec<Fig6Row>> {
    cfg.validate()?;
    std::fs::create_dir_all(out_dir)?;
    let m_values = cfg.eval.m_values.clone();

    let mut pano_cfg = cfg.clone();
    pano_cfg.feature_kind = FeatureKind::Panoramic;
    let pano_ds = build_dataset(&pano_cfg)?;
    persist(cfg, &pano_ds, out_dir, "dataset_panoramic")?;
    let (pano_train, pano_test) = split_by_environment(&pano_ds.records, &pano_ds.manifest)?;
    let pano_metrics = train_and_eval(
        cfg,
        &RecordSet {
            records: pano_train.clone(),
        },
        &pano_test,
        &m_values,
        out_dir,
        "loss_panoramic.csv",
    )?;

    let mut rows = Vec::new();
    for (s_idx, &range_m) in cfg.experiment.lidar_ranges_m.iter().enumerate() {
        let mut lidar_cfg = cfg.clone();
        lidar_cfg.feature_kind = FeatureKind::Lidar;
        lidar_cfg.lidar.range_m = range_m;
        let lidar_ds = build_dataset(&lidar_cfg)?;
        persist(
            cfg,
            &lidar_ds,
            out_dir,
            &format!("dataset_lidar_s{}", range_m.round() as i64),
        )?;
        let (lidar_train, lidar_test) =
            split_by_environment(&lidar_ds.records, &lidar_ds.manifest)?;
        let lidar_metrics = train_and_eval(
            cfg,
            &RecordSet {
                records: lidar_train,
            },
            &lidar_test,
            &m_values,
            out_dir,
            &format!("loss_lidar_{s_idx}.csv"),
        )?;
        for &m in &m_values {
            rows.push(Fig6Row {
                m,
                lidar_range_m: range_m,
                panoramic_accuracy: pano_metrics.top_m[&m],
                lidar_accuracy: lidar_metrics.top_m[&m],
            });
        }
    }

    let mut out = std::io::BufWriter::new(std::fs::File::create(out_dir.join("fig6.csv"))?);
    writeln!(out, "m,lidar_range_m,panoramic_accuracy,lidar_accuracy")?;
    for row in &rows {
        writeln!(
            out,
            "{},{},{},{}",
            row.m,
            format_full(row.lidar_range_m),
            format_full(row.panoramic_accuracy),
            format_full(row.lidar_accuracy)
        )?;
    }
    Ok(rows)
}
