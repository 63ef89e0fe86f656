//! Orchestration: configuration, dataset builds, environment-level splits,
//! top-M evaluation, and the accuracy-trend experiments.

pub mod artifacts;
pub mod config;
pub mod dataset;
pub mod eval;
pub mod experiment;

pub use artifacts::{
    read_clouds, read_environments, read_labels, read_paths, run_features_stage, run_gen_stage,
    run_trace_stage, EnvEntry, GenSummary, LabelEntry, TraceSummary,
};
pub use config::{FeatureKind, RunConfig};
pub use dataset::{
    build_dataset, derive_seed, read_dataset, split_by_environment, write_dataset, Dataset,
    DatasetRecord, Manifest, RecordSet, MANIFEST_FILE, RECORDS_FILE,
};
pub use eval::{evaluate_top_m, format_full, pair_rank, write_metrics_csv, write_per_env_csv, Metrics};
pub use experiment::{run_fig5, run_fig6, write_loss_csv, Fig5Row, Fig6Row};

/// Human-readable dump of one dataset record.
pub fn describe_record(manifest: &Manifest, record: &DatasetRecord) -> String {
    let nonzero_rows = record
        .feature
        .chunks(3)
        .filter(|row| row.iter().any(|v| *v != 0.0))
        .count();
    let marker_rows = record
        .feature
        .chunks(3)
        .filter(|row| row.iter().all(|v| *v < 0.0))
        .count();
    let (mut lo, mut hi) = (f32::INFINITY, f32::NEG_INFINITY);
    for &v in &record.feature {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    format!(
        "environment {} / receiver index {}\n\
         feature kind: {:?}, grid {:?} ({} values)\n\
         paths traced: {}\n\
         optimal beam pair: transmit {}, receive {} (objective {:.6e})\n\
         occupied feature rows: {} of {} ({} marker row)\n\
         feature value range: [{:.4}, {:.4}]",
        record.env_id,
        record.ms_index,
        manifest.feature_kind,
        manifest.grid.divisions,
        manifest.feature_len,
        record.path_count,
        record.t_opt,
        record.r_opt,
        record.objective_gain,
        nonzero_rows,
        manifest.feature_len / 3,
        marker_rows,
        lo,
        hi,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn describe_record_mentions_the_label() {
        let mut cfg = RunConfig::default();
        cfg.train_envs = 1;
        cfg.test_envs = 1;
        let manifest = Manifest {
            format_version: 1,
            feature_kind: FeatureKind::Panoramic,
            codebook_n: 30,
            grid: crate::features::VoxelGridSpec::default_panoramic(),
            feature_len: 23_040,
            n_records: 1,
            n_dropped: 0,
            train_envs: 1,
            test_envs: 1,
            lidar_range_m: None,
            config: cfg,
        };
        let record = DatasetRecord {
            env_id: 3,
            ms_index: 42,
            path_count: 7,
            t_opt: 11,
            r_opt: 23,
            objective_gain: 1.5e-9,
            feature: vec![0.0; 23_040],
        };
        let text = describe_record(&manifest, &record);
        assert!(text.contains("transmit 11"));
        assert!(text.contains("receive 23"));
        assert!(text.contains("environment 3"));
    }
}
