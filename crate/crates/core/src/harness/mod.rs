//! The experiment protocol: sentence-level k-fold cross-validation,
//! metrics and clipping, the official score, random hyperparameter
//! search, ablation reporting and the stepwise linear baseline.

mod linear;
mod search;

pub use linear::{augment_log_features, stepwise_linreg, LinearModel};
pub use search::{default_search_space, random_search, SearchSpace, Trial, TuneReport};

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::corpus::SentenceSet;
use crate::error::{Error, Result};
use crate::features::{drop_groups, FeatureGroup, FeatureMatrix};
use crate::gbdt::{fit, TrainConfig};

/// Assignment of sentences to cross-validation folds.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct CvSplit {
    pub k: usize,
    fold_of: BTreeMap<u32, usize>,
}

impl CvSplit {
    pub fn fold_of(&self, sentence_id: u32) -> Option<usize> {
        self.fold_of.get(&sentence_id).copied()
    }

    pub fn n_sentences(&self) -> usize {
        self.fold_of.len()
    }

    /// Sentence count per fold.
    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0usize; self.k];
        for &f in self.fold_of.values() {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Shuffle sentence ids by seed, then deal them round-robin so fold
/// sizes differ by at most one. All tokens of a sentence share its fold.
pub fn kfold_by_sentence(set: &SentenceSet, k: usize, seed: u64) -> Result<CvSplit> {
    kfold_ids(&set.sentence_ids(), k, seed)
}

pub fn kfold_ids(sentence_ids: &[u32], k: usize, seed: u64) -> Result<CvSplit> {
    if k < 2 {
        return Err(Error::Config(format!("k = {k}, need k >= 2")));
    }
    if k > sentence_ids.len() {
        return Err(Error::Config(format!(
            "k = {k} exceeds sentence count {}",
            sentence_ids.len()
        )));
    }
    let mut shuffled = sentence_ids.to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    shuffled.shuffle(&mut rng);
    let fold_of = shuffled
        .into_iter()
        .enumerate()
        .map(|(i, id)| (id, i % k))
        .collect();
    Ok(CvSplit { k, fold_of })
}

pub fn mae(pred: &[f64], y: &[f64]) -> Result<f64> {
    check_paired(pred, y)?;
    Ok(pred
        .iter()
        .zip(y)
        .map(|(p, t)| (p - t).abs())
        .sum::<f64>()
        / y.len() as f64)
}

pub fn rmse(pred: &[f64], y: &[f64]) -> Result<f64> {
    check_paired(pred, y)?;
    Ok((pred
        .iter()
        .zip(y)
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / y.len() as f64)
        .sqrt())
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    check_paired(x, y)?;
    let n = x.len() as f64;
    let mean_x = x.iter().sum::<f64>() / n;
    let mean_y = y.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        sxx += (a - mean_x) * (a - mean_x);
        syy += (b - mean_y) * (b - mean_y);
        sxy += (a - mean_x) * (b - mean_y);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::PearsonUndefined(
            "zero variance in at least one vector".into(),
        ));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

fn check_paired(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::Contract(format!(
            "paired vectors of lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(Error::Contract("empty vectors".into()));
    }
    Ok(())
}

/// Element-wise clamp; idempotent.
pub fn clip_predictions(pred: &[f64], lo: f64, hi: f64) -> Vec<f64> {
    pred.iter().map(|p| p.clamp(lo, hi)).collect()
}

/// The challenge ranking criterion: arithmetic mean of the five per-DV
/// MAEs.
pub fn official_score(per_dv_mae: &[f64; 5]) -> f64 {
    per_dv_mae.iter().sum::<f64>() / 5.0
}

/// Percent deviation of `value` from `reference`: negative when worse.
pub fn pct_deviation(reference: f64, value: f64) -> f64 {
    (reference - value) / reference * 100.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IterPolicy {
    FourthHighest,
}

/// Choose the final iteration count from per-fold best iterations; the
/// fourth-highest rule needs at least four folds.
pub fn pick_n_iter(fold_best_iters: &[usize], policy: IterPolicy) -> Result<usize> {
    match policy {
        IterPolicy::FourthHighest => {
            if fold_best_iters.len() < 4 {
                return Err(Error::Policy(format!(
                    "fourth-highest rule needs >= 4 folds, got {}",
                    fold_best_iters.len()
                )));
            }
            let mut sorted = fold_best_iters.to_vec();
            sorted.sort_unstable_by(|a, b| b.cmp(a));
            Ok(sorted[3])
        }
    }
}

/// Cross-validation outcome for one DV.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DvCvResult {
    pub dv: String,
    pub fold_mae: Vec<f64>,
    pub mean_mae: f64,
    pub best_iterations: Vec<usize>,
    /// Fourth-highest best iteration, when the fold count permits.
    pub picked_n_iter: Option<usize>,
}

/// Run k-fold CV for one target vector: each fold trains on the other
/// k-1 folds with the held-out fold as the early-stopping validation
/// set, predictions are clipped to [0, 100] before the MAE.
pub fn cross_validate_dv(
    m: &FeatureMatrix,
    targets: &[f64],
    config: &TrainConfig,
    split: &CvSplit,
) -> Result<(Vec<f64>, f64, Vec<usize>)> {
    if targets.len() != m.n_rows() {
        return Err(Error::Contract(format!(
            "{} targets for {} rows",
            targets.len(),
            m.n_rows()
        )));
    }
    let mut rows_by_fold: Vec<Vec<usize>> = vec![Vec::new(); split.k];
    for (row, &(sid, _)) in m.row_keys().iter().enumerate() {
        let fold = split.fold_of(sid).ok_or_else(|| {
            Error::Config(format!("split does not cover sentence {sid}"))
        })?;
        rows_by_fold[fold].push(row);
    }

    let fold_results: Vec<Result<(f64, usize)>> = (0..split.k)
        .into_par_iter()
        .map(|fold| {
            let valid_rows = &rows_by_fold[fold];
            if valid_rows.is_empty() {
                return Err(Error::Config(format!("fold {fold} holds no rows")));
            }
            let train_rows: Vec<usize> = (0..split.k)
                .filter(|&f| f != fold)
                .flat_map(|f| rows_by_fold[f].iter().copied())
                .collect();
            let train_m = m.select_rows(&train_rows);
            let valid_m = m.select_rows(valid_rows);
            let train_y: Vec<f64> = train_rows.iter().map(|&r| targets[r]).collect();
            let valid_y: Vec<f64> = valid_rows.iter().map(|&r| targets[r]).collect();
            let (ensemble, report) = fit(&train_m, &train_y, Some((&valid_m, &valid_y)), config)?;
            let best = report
                .best_iteration
                .unwrap_or(report.trained_iterations());
            let preds = ensemble.predict_first_n(&valid_m, best)?;
            let clipped = clip_predictions(&preds, 0.0, 100.0);
            Ok((mae(&clipped, &valid_y)?, best))
        })
        .collect();

    let mut fold_mae = Vec::with_capacity(split.k);
    let mut best_iterations = Vec::with_capacity(split.k);
    for r in fold_results {
        let (m, b) = r?;
        fold_mae.push(m);
        best_iterations.push(b);
    }
    let mean_mae = fold_mae.iter().sum::<f64>() / fold_mae.len() as f64;
    Ok((fold_mae, mean_mae, best_iterations))
}

/// Cross-validate several DVs against one shared config or one config
/// per DV.
pub fn cross_validate(
    m: &FeatureMatrix,
    targets: &[(String, Vec<f64>)],
    configs: &[TrainConfig],
    split: &CvSplit,
) -> Result<Vec<DvCvResult>> {
    if configs.len() != 1 && configs.len() != targets.len() {
        return Err(Error::Config(format!(
            "{} configs for {} DVs; pass one shared config or one per DV",
            configs.len(),
            targets.len()
        )));
    }
    targets
        .iter()
        .enumerate()
        .map(|(i, (dv, y))| {
            let config = if configs.len() == 1 { &configs[0] } else { &configs[i] };
            let (fold_mae, mean_mae, best_iterations) =
                cross_validate_dv(m, y, config, split)?;
            let picked_n_iter = if best_iterations.len() >= 4 {
                Some(pick_n_iter(&best_iterations, IterPolicy::FourthHighest)?)
            } else {
                None
            };
            Ok(DvCvResult {
                dv: dv.clone(),
                fold_mae,
                mean_mae,
                best_iterations,
                picked_n_iter,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AblationRow {
    pub dropped: Vec<FeatureGroup>,
    pub mean_mae: f64,
    pub per_dv_mae: Vec<(String, f64)>,
    /// Percent deviation of the mean MAE from the reference row.
    pub pct_mean: f64,
    pub per_dv_pct: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AblationReport {
    pub reference_mean_mae: f64,
    pub rows: Vec<AblationRow>,
}

/// Retrain via CV once per drop set and report raw MAEs together with
/// percent deviations from the reference (empty drop set) row, which
/// must be included.
pub fn ablation(
    m: &FeatureMatrix,
    targets: &[(String, Vec<f64>)],
    configs: &[TrainConfig],
    split: &CvSplit,
    group_sets: &[BTreeSet<FeatureGroup>],
) -> Result<AblationReport> {
    let reference_idx = group_sets
        .iter()
        .position(|s| s.is_empty())
        .ok_or_else(|| Error::Config("ablation group sets must include the empty reference set".into()))?;

    struct RawRow {
        dropped: Vec<FeatureGroup>,
        mean_mae: f64,
        per_dv_mae: Vec<(String, f64)>,
    }
    let mut raw_rows = Vec::with_capacity(group_sets.len());
    for set in group_sets {
        let matrix = drop_groups(m, set)?;
        let results = cross_validate(&matrix, targets, configs, split)?;
        let per_dv_mae: Vec<(String, f64)> = results
            .iter()
            .map(|r| (r.dv.clone(), r.mean_mae))
            .collect();
        let mean_mae =
            per_dv_mae.iter().map(|(_, v)| v).sum::<f64>() / per_dv_mae.len() as f64;
        raw_rows.push(RawRow {
            dropped: set.iter().copied().collect(),
            mean_mae,
            per_dv_mae,
        });
    }

    let reference_mean = raw_rows[reference_idx].mean_mae;
    let reference_per_dv: Vec<f64> = raw_rows[reference_idx]
        .per_dv_mae
        .iter()
        .map(|(_, v)| *v)
        .collect();
    let rows = raw_rows
        .into_iter()
        .map(|r| {
            let per_dv_pct = r
                .per_dv_mae
                .iter()
                .zip(&reference_per_dv)
                .map(|((_, v), &ref_v)| pct_deviation(ref_v, *v))
                .collect();
            AblationRow {
                pct_mean: pct_deviation(reference_mean, r.mean_mae),
                dropped: r.dropped,
                mean_mae: r.mean_mae,
                per_dv_mae: r.per_dv_mae,
                per_dv_pct,
            }
        })
        .collect();
    Ok(AblationReport {
        reference_mean_mae: reference_mean,
        rows,
    })
}

impl AblationReport {
    pub fn to_text_table(&self) -> String {
        let mut out = String::new();
        let dv_names: Vec<&str> = self
            .rows
            .first()
            .map(|r| r.per_dv_mae.iter().map(|(n, _)| n.as_str()).collect())
            .unwrap_or_default();
        out.push_str(&format!("{:<32} {:>9} {:>8}", "Dropped groups", "MAE", "%MAE"));
        for n in &dv_names {
            out.push_str(&format!(" {:>9}", format!("%{n}")));
        }
        out.push('\n');
        for row in &self.rows {
            let label = if row.dropped.is_empty() {
                "(reference)".to_string()
            } else {
                row.dropped
                    .iter()
                    .map(|g| g.name())
                    .collect::<Vec<_>>()
                    .join("+")
            };
            out.push_str(&format!(
                "{:<32} {:>9.4} {:>8.2}",
                label, row.mean_mae, row.pct_mean
            ));
            for pct in &row.per_dv_pct {
                out.push_str(&format!(" {:>9.2}", pct));
            }
            out.push('\n');
        }
        out
    }
}

/// Per-DV MAEs plus the official score.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ScoreReport {
    pub per_dv_mae: Vec<(String, f64)>,
    pub official_score: f64,
}

impl ScoreReport {
    pub fn new(per_dv_mae: Vec<(String, f64)>) -> ScoreReport {
        let official_score =
            per_dv_mae.iter().map(|(_, v)| v).sum::<f64>() / per_dv_mae.len() as f64;
        ScoreReport {
            per_dv_mae,
            official_score,
        }
    }

    pub fn to_text_table(&self) -> String {
        let mut out = String::new();
        for (dv, v) in &self.per_dv_mae {
            out.push_str(&format!("{dv:<10} {v:>9.4}\n"));
        }
        out.push_str(&format!("{:<10} {:>9.4}\n", "mean", self.official_score));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{Column, ColumnKind, FeatureMatrix};
    use crate::gbdt::Objective;

    #[test]
    fn kfold_balance_and_coverage() {
        let ids: Vec<u32> = (0..11).collect();
        let split = kfold_ids(&ids, 5, 7).unwrap();
        let mut sizes = split.fold_sizes();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![2, 2, 2, 2, 3]);
        for id in ids {
            assert!(split.fold_of(id).is_some());
        }

        let ids: Vec<u32> = (0..10).collect();
        let split = kfold_ids(&ids, 5, 1).unwrap();
        assert_eq!(split.fold_sizes(), vec![2; 5]);

        assert!(kfold_ids(&ids, 1, 0).is_err());
        assert!(kfold_ids(&ids, 11, 0).is_err());
    }

    #[test]
    fn metric_definitions() {
        assert_eq!(mae(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 0.0);
        assert_eq!(rmse(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 0.0);
        assert!((pearson(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(mae(&[0.0, 0.0], &[3.0, -3.0]).unwrap(), 3.0);
        assert_eq!(rmse(&[0.0, 0.0], &[3.0, -3.0]).unwrap(), 3.0);

        // Affine invariance with positive slope.
        let x = [1.0, 4.0, 2.0, 8.0];
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v + 11.0).collect();
        assert!((pearson(&x, &y).unwrap() - 1.0).abs() < 1e-12);

        assert!(matches!(
            pearson(&[1.0, 1.0], &[1.0, 2.0]),
            Err(Error::PearsonUndefined(_))
        ));
        assert!(mae(&[1.0], &[1.0, 2.0]).is_err());
        assert!(mae(&[], &[]).is_err());
    }

    #[test]
    fn clip_bounds() {
        let clipped = clip_predictions(&[103.2, -2.5, 57.0], 0.0, 100.0);
        assert_eq!(clipped, vec![100.0, 0.0, 57.0]);
        assert_eq!(clip_predictions(&clipped, 0.0, 100.0), clipped);
    }

    #[test]
    fn official_score_table_rows() {
        let score = official_score(&[3.879, 0.655, 2.197, 1.524, 10.812]);
        assert!((score - 3.8134).abs() < 1e-12);
        let score = official_score(&[3.761, 0.662, 2.180, 1.486, 11.076]);
        assert!((score - 3.8328).abs() < 0.0005);
        assert_eq!(official_score(&[1.0; 5]), 1.0);
    }

    #[test]
    fn deviation_convention() {
        assert!((pct_deviation(3.8134, 4.095) - (-7.3845)).abs() < 0.001);
        assert!((pct_deviation(3.8134, 4.268) - (-11.922)).abs() < 0.001);
        assert_eq!(pct_deviation(2.0, 2.0), 0.0);
    }

    #[test]
    fn full_size_fold_counts() {
        let ids: Vec<u32> = (1..=800).collect();
        let split = kfold_ids(&ids, 5, 0).unwrap();
        assert_eq!(split.fold_sizes(), vec![160; 5]);
    }

    #[test]
    fn per_dv_iteration_counts_are_representable() {
        // The fourth-highest iteration counts of a five-DV run fit the
        // report schema and survive serialization.
        let per_dv: Vec<DvCvResult> = [
            ("nFix", 3740usize),
            ("TRT", 3829),
            ("GPT", 2861),
            ("FFD", 3497),
            ("fixProp", 3305),
        ]
        .into_iter()
        .map(|(dv, picked)| DvCvResult {
            dv: dv.to_string(),
            fold_mae: vec![1.0; 5],
            mean_mae: 1.0,
            best_iterations: vec![picked + 10, picked + 5, picked + 2, picked, picked - 9],
            picked_n_iter: Some(picked),
        })
        .collect();
        let json = serde_json::to_string(&per_dv).unwrap();
        let back: Vec<DvCvResult> = serde_json::from_str(&json).unwrap();
        assert_eq!(back, per_dv);
        assert_eq!(back[0].picked_n_iter, Some(3740));
    }

    #[test]
    fn fourth_highest_rule() {
        assert_eq!(
            pick_n_iter(&[100, 200, 300, 400, 500], IterPolicy::FourthHighest).unwrap(),
            200
        );
        assert_eq!(
            pick_n_iter(&[3740; 5], IterPolicy::FourthHighest).unwrap(),
            3740
        );
        assert!(pick_n_iter(&[1, 2, 3], IterPolicy::FourthHighest).is_err());
    }

    fn sentence_matrix(n_sentences: usize, tokens_per: usize) -> (FeatureMatrix, Vec<f64>) {
        let mut values = Vec::new();
        let mut keys = Vec::new();
        let mut targets = Vec::new();
        for s in 0..n_sentences {
            for t in 0..tokens_per {
                let x = (s * tokens_per + t) as f64;
                values.push(Some(x % 17.0));
                keys.push((s as u32, t as u32 + 1));
                targets.push((x % 17.0) * 2.0 + 10.0);
            }
        }
        let col = Column {
            name: "x".into(),
            kind: ColumnKind::Numeric,
            group: FeatureGroup::Length,
            values,
            dict: None,
        };
        (
            FeatureMatrix::from_columns(vec![col], keys).unwrap(),
            targets,
        )
    }

    fn quick_config() -> TrainConfig {
        TrainConfig {
            objective: Objective::Mae,
            learning_rate: 0.3,
            num_leaves: 8,
            min_data_in_leaf: 1,
            min_data_in_bin: 1,
            max_bin: 32,
            n_iter: 40,
            early_stopping_rounds: 10,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn cv_constant_targets_scores_zero() {
        let (m, _) = sentence_matrix(10, 4);
        let targets = vec![7.0; m.n_rows()];
        let split = kfold_ids(&(0..10).collect::<Vec<_>>(), 5, 3).unwrap();
        let (fold_mae, mean, best) =
            cross_validate_dv(&m, &targets, &quick_config(), &split).unwrap();
        assert_eq!(fold_mae.len(), 5);
        assert_eq!(best.len(), 5);
        assert!(mean.abs() < 1e-12);
    }

    #[test]
    fn cv_learns_noiseless_function() {
        let (m, targets) = sentence_matrix(30, 5);
        let split = kfold_ids(&(0..30).collect::<Vec<_>>(), 5, 3).unwrap();
        let (_, mean, _) = cross_validate_dv(&m, &targets, &quick_config(), &split).unwrap();
        assert!(mean < 1.0, "mean CV MAE {mean}");
    }

    #[test]
    fn cv_rejects_uncovered_sentences() {
        let (m, targets) = sentence_matrix(10, 4);
        let split = kfold_ids(&(0..8).collect::<Vec<_>>(), 4, 3).unwrap();
        let err = cross_validate_dv(&m, &targets, &quick_config(), &split).unwrap_err();
        assert!(matches!(err, Error::Config(_)), "{err}");
    }

    #[test]
    fn ablation_reference_row_is_zero() {
        let (m, targets) = sentence_matrix(12, 4);
        let split = kfold_ids(&(0..12).collect::<Vec<_>>(), 4, 3).unwrap();
        let dvs = vec![("y".to_string(), targets)];
        let sets = vec![BTreeSet::new(), [FeatureGroup::Length].into_iter().collect()];
        let report = ablation(&m, &dvs, &[quick_config()], &split, &sets).unwrap();
        assert_eq!(report.rows[0].pct_mean, 0.0);
        assert!(report.rows[1].mean_mae >= report.rows[0].mean_mae);
        // Dropping the only feature group leaves the base-score model.
        assert!(report.rows[1].pct_mean <= 0.0);

        let err = ablation(&m, &dvs, &[quick_config()], &split, &sets[1..]);
        assert!(err.is_err());
    }
}
