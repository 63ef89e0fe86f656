//! Top-M beam-pair accuracy evaluation.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::neuralnet::{softmax, BeamSelectionNet};
use crate::tensor::Tensor;

use super::dataset::DatasetRecord;

/// Forward batching width used during evaluation.
const EVAL_BATCH: usize = 64;

/// Accuracy per requested M, overall and per held-out environment.
#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub top_m: BTreeMap<usize, f64>,
    pub per_env: BTreeMap<u32, BTreeMap<usize, f64>>,
    pub n_records: usize,
}

/// Rank (0-based) of the labeled pair under the product-of-probabilities
/// scoring with lexicographic tie-breaks: the number of pairs strictly
/// better than the label, plus equal-scored pairs that precede it
/// lexicographically.
pub fn pair_rank(logits_t: &[f64], logits_r: &[f64], label: (usize, usize)) -> usize {
    let p_t = softmax(logits_t);
    let p_r = softmax(logits_r);
    let true_score = p_t[label.0] * p_r[label.1];
    let mut rank = 0usize;
    for (t, &pt) in p_t.iter().enumerate() {
        for (r, &pr) in p_r.iter().enumerate() {
            if (t, r) == label {
                continue;
            }
            let s = pt * pr;
            if s > true_score || (s == true_score && (t, r) < label) {
                rank += 1;
            }
        }
    }
    rank
}

/// Fraction of records whose labeled pair appears in the model's top-M list,
/// for each M in `m_values`.
pub fn evaluate_top_m(
    net: &BeamSelectionNet<f64>,
    records: &[&DatasetRecord],
    m_values: &[usize],
) -> Result<Metrics> {
    if records.is_empty() {
        return Err(Error::Config("no records to evaluate".into()));
    }
    let n = net.config.n_beams;
    if m_values.is_empty() || m_values.iter().any(|&m| m == 0 || m > n * n) {
        return Err(Error::OutOfRange(format!(
            "m_values must lie in 1..={}",
            n * n
        )));
    }
    let feature_len = net.config.feature_len();
    let shape = net.config.input_shape;

    let mut hits: BTreeMap<usize, usize> = m_values.iter().map(|&m| (m, 0)).collect();
    let mut env_hits: BTreeMap<u32, (BTreeMap<usize, usize>, usize)> = BTreeMap::new();

    for chunk in records.chunks(EVAL_BATCH) {
        let b = chunk.len();
        let mut buf = vec![0f64; b * feature_len];
        for (row, record) in chunk.iter().enumerate() {
            if record.feature.len() != feature_len {
                return Err(Error::ShapeMismatch(format!(
                    "record ({}, {}) feature length {} != model input {}",
                    record.env_id,
                    record.ms_index,
                    record.feature.len(),
                    feature_len
                )));
            }
            for (dst, &src) in buf[row * feature_len..(row + 1) * feature_len]
                .iter_mut()
                .zip(&record.feature)
            {
                *dst = src as f64;
            }
        }
        let x = Tensor::from_vec(&[b, shape[0], shape[1], shape[2], shape[3]], buf)?;
        let (logits_t, logits_r) = net.forward_batch(&x)?;
        for (row, record) in chunk.iter().enumerate() {
            let label = (record.t_opt as usize, record.r_opt as usize);
            if label.0 >= n || label.1 >= n {
                return Err(Error::OutOfRange(format!(
                    "label {:?} outside the {n}-beam codebook",
                    label
                )));
            }
            let rank = pair_rank(
                &logits_t[row * n..(row + 1) * n],
                &logits_r[row * n..(row + 1) * n],
                label,
            );
            let env_entry = env_hits
                .entry(record.env_id)
                .or_insert_with(|| (m_values.iter().map(|&m| (m, 0)).collect(), 0));
            env_entry.1 += 1;
            for (&m, count) in hits.iter_mut() {
                if rank < m {
                    *count += 1;
                    *env_entry.0.get_mut(&m).unwrap() += 1;
                }
            }
        }
    }

    let total = records.len() as f64;
    let top_m = hits
        .into_iter()
        .map(|(m, h)| (m, h as f64 / total))
        .collect();
    let per_env = env_hits
        .into_iter()
        .map(|(env, (counts, n_env))| {
            (
                env,
                counts
                    .into_iter()
                    .map(|(m, h)| (m, h as f64 / n_env as f64))
                    .collect(),
            )
        })
        .collect();
    Ok(Metrics {
        top_m,
        per_env,
        n_records: records.len(),
    })
}

/// Full-precision float formatting for reproducible reports.
pub fn format_full(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes `m,accuracy` rows.
pub fn write_metrics_csv(path: &Path, metrics: &Metrics) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "m,accuracy")?;
    for (m, acc) in &metrics.top_m {
        writeln!(out, "{m},{}", format_full(*acc))?;
    }
    Ok(())
}

/// Writes `env_id,m,accuracy` rows.
pub fn write_per_env_csv(path: &Path, metrics: &Metrics) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "env_id,m,accuracy")?;
    for (env, rows) in &metrics.per_env {
        for (m, acc) in rows {
            writeln!(out, "{env},{m},{}", format_full(*acc))?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    #[test]
    fn rank_zero_hits_every_m() {
        // A dominant correct pair ranks first.
        let mut logits_t = vec![0.0; 8];
        let mut logits_r = vec![0.0; 8];
        logits_t[3] = 30.0;
        logits_r[5] = 30.0;
        assert_eq!(pair_rank(&logits_t, &logits_r, (3, 5)), 0);
        // And the worst pair ranks last.
        assert_eq!(pair_rank(&logits_t, &logits_r, (7, 7)) < 64, true);
    }

    #[test]
    fn rank_is_exhaustive_at_full_m() {
        let mut rng = StdRng::seed_from_u64(3);
        let logits_t: Vec<f64> = (0..30).map(|_| rng.random_range(-2.0..2.0)).collect();
        let logits_r: Vec<f64> = (0..30).map(|_| rng.random_range(-2.0..2.0)).collect();
        for _ in 0..50 {
            let label = (rng.random_range(0..30), rng.random_range(0..30));
            assert!(pair_rank(&logits_t, &logits_r, label) < 900);
        }
    }

    #[test]
    fn random_scorer_matches_combinatorial_baseline() {
        // With scores independent of the label, the label's rank is uniform
        // over the 900 pairs, so top-5 accuracy concentrates on 5/900.
        let mut rng = StdRng::seed_from_u64(7);
        let trials = 20_000usize;
        let mut hits = 0usize;
        for _ in 0..trials {
            let logits_t: Vec<f64> = (0..30).map(|_| rng.random_range(-1.0..1.0)).collect();
            let logits_r: Vec<f64> = (0..30).map(|_| rng.random_range(-1.0..1.0)).collect();
            let label = (rng.random_range(0..30), rng.random_range(0..30));
            if pair_rank(&logits_t, &logits_r, label) < 5 {
                hits += 1;
            }
        }
        let freq = hits as f64 / trials as f64;
        let p = 5.0 / 900.0;
        let sigma = (p * (1.0 - p) / trials as f64).sqrt();
        assert!(
            (freq - p).abs() <= 3.0 * sigma,
            "freq {freq:.5} vs {p:.5} (3 sigma {:.5})",
            3.0 * sigma
        );
    }

    #[test]
    fn metrics_are_monotone_and_exhaustive_at_full_m() {
        use crate::harness::dataset::DatasetRecord;
        use crate::neuralnet::{predict_top_m, BeamSelectionNet, ModelConfig};

        let net = BeamSelectionNet::<f64>::new(ModelConfig::default_for(30), 3).unwrap();
        let mut rng = StdRng::seed_from_u64(21);
        let feature_len = net.config.feature_len();
        let mut records: Vec<DatasetRecord> = (0..12)
            .map(|i| DatasetRecord {
                env_id: i / 4,
                ms_index: i,
                path_count: 1,
                t_opt: rng.random_range(0..30) as u16,
                r_opt: rng.random_range(0..30) as u16,
                objective_gain: 1.0,
                feature: (0..feature_len)
                    .map(|_| rng.random_range(-1.0f32..1.0))
                    .collect(),
            })
            .collect();

        let refs: Vec<&DatasetRecord> = records.iter().collect();
        let metrics = evaluate_top_m(&net, &refs, &[1, 5, 10, 900]).unwrap();
        assert_eq!(metrics.n_records, 12);
        let accs: Vec<f64> = metrics.top_m.values().copied().collect();
        for pair in accs.windows(2) {
            assert!(pair[0] <= pair[1], "accuracy not monotone in M: {accs:?}");
        }
        for acc in &accs {
            assert!((0.0..=1.0).contains(acc));
        }
        // The full pair grid always contains the label.
        assert_eq!(metrics.top_m[&900], 1.0);

        // A perfect predictor scores 1.0 at every M: relabel each record
        // with the model's own top choice.
        for record in records.iter_mut() {
            let (lt, lr) = net
                .forward(
                    &record
                        .feature
                        .iter()
                        .map(|v| *v as f64)
                        .collect::<Vec<f64>>(),
                )
                .unwrap();
            let top = predict_top_m(&lt, &lr, 1).unwrap()[0];
            record.t_opt = top.0 as u16;
            record.r_opt = top.1 as u16;
        }
        let refs: Vec<&DatasetRecord> = records.iter().collect();
        let perfect = evaluate_top_m(&net, &refs, &[1, 5, 10]).unwrap();
        for (m, acc) in &perfect.top_m {
            assert_eq!(*acc, 1.0, "perfect predictor below 1.0 at M={m}");
        }
    }

    #[test]
    fn rank_agrees_with_predict_top_m_ordering() {
        use crate::neuralnet::predict_top_m;
        let mut rng = StdRng::seed_from_u64(11);
        let logits_t: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
        let logits_r: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
        let order = predict_top_m(&logits_t, &logits_r, 36).unwrap();
        for (pos, pair) in order.iter().enumerate() {
            assert_eq!(pair_rank(&logits_t, &logits_r, *pair), pos);
        }
    }
}
