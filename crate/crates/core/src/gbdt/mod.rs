//! Histogram gradient-boosted regression trees with leaf-wise growth,
//! L1/L2 objectives, subsampling, missing-value default directions,
//! categorical splits and early stopping.

mod binning;
mod tree;

pub use binning::{bin_features, BinKind, BinnedColumn, BinnedDataset, MISSING_BIN};
pub use tree::{
    build_histograms, find_best_split, grow_tree, BinStats, GrowParams, GrownTree, Histogram,
    SplitInfo, SplitTest, Tree, TreeNode,
};

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::features::{FeatureMatrix, MatrixSchema};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    Mae,
    Rmse,
}

impl Objective {
    pub fn parse(s: &str) -> Result<Objective> {
        match s {
            "mae" => Ok(Objective::Mae),
            "rmse" => Ok(Objective::Rmse),
            _ => Err(Error::Config(format!("unknown objective {s:?}"))),
        }
    }
}

/// Full hyperparameter record of one training run.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub objective: Objective,
    pub learning_rate: f64,
    pub num_leaves: usize,
    /// Maximum tree depth; -1 means unlimited.
    pub max_depth: i32,
    pub max_bin: usize,
    pub min_data_in_bin: usize,
    pub min_data_in_leaf: usize,
    pub feature_fraction: f64,
    pub bagging_fraction: f64,
    pub bagging_freq: usize,
    pub n_iter: usize,
    /// 0 disables early stopping.
    pub early_stopping_rounds: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            objective: Objective::Mae,
            learning_rate: 0.1,
            num_leaves: 31,
            max_depth: -1,
            max_bin: 255,
            min_data_in_bin: 3,
            min_data_in_leaf: 20,
            feature_fraction: 1.0,
            bagging_fraction: 1.0,
            bagging_freq: 0,
            n_iter: 100,
            early_stopping_rounds: 200,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, msg: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::Config(msg.to_string()))
            }
        };
        check(self.learning_rate > 0.0, "learning_rate must be positive")?;
        check(self.num_leaves >= 2, "num_leaves must be >= 2")?;
        check(
            self.max_depth == -1 || self.max_depth >= 1,
            "max_depth must be >= 1 or -1 for unlimited",
        )?;
        check(self.max_bin >= 2, "max_bin must be >= 2")?;
        check(self.min_data_in_bin >= 1, "min_data_in_bin must be >= 1")?;
        check(self.min_data_in_leaf >= 1, "min_data_in_leaf must be >= 1")?;
        check(
            self.feature_fraction > 0.0 && self.feature_fraction <= 1.0,
            "feature_fraction must be in (0, 1]",
        )?;
        check(
            self.bagging_fraction > 0.0 && self.bagging_fraction <= 1.0,
            "bagging_fraction must be in (0, 1]",
        )?;
        check(self.n_iter >= 1, "n_iter must be >= 1")?;
        Ok(())
    }

    pub fn depth_limit(&self) -> Option<u32> {
        (self.max_depth >= 0).then_some(self.max_depth as u32)
    }
}

/// Per-example gradients and hessians of the objective at the current
/// predictions. MAE uses the sign of the residual (0 at equality) with
/// unit hessians; RMSE uses the residual itself.
pub fn compute_gradients(
    objective: Objective,
    predictions: &[f64],
    targets: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    if predictions.len() != targets.len() {
        return Err(Error::Contract(format!(
            "{} predictions for {} targets",
            predictions.len(),
            targets.len()
        )));
    }
    let grad = predictions
        .iter()
        .zip(targets)
        .map(|(&p, &y)| match objective {
            Objective::Mae => {
                if p > y {
                    1.0
                } else if p < y {
                    -1.0
                } else {
                    0.0
                }
            }
            Objective::Rmse => p - y,
        })
        .collect();
    let hess = vec![1.0; targets.len()];
    Ok((grad, hess))
}

pub(crate) fn training_loss(objective: Objective, predictions: &[f64], targets: &[f64]) -> f64 {
    let n = targets.len() as f64;
    match objective {
        Objective::Mae => {
            predictions
                .iter()
                .zip(targets)
                .map(|(p, y)| (p - y).abs())
                .sum::<f64>()
                / n
        }
        Objective::Rmse => (predictions
            .iter()
            .zip(targets)
            .map(|(p, y)| (p - y) * (p - y))
            .sum::<f64>()
            / n)
            .sqrt(),
    }
}

/// Exact median; an even count averages the two central values.
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "median of empty slice");
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        (sorted[mid - 1] + sorted[mid]) / 2.0
    }
}

/// Replace each leaf value by the median residual of the rows it was
/// grown on — the exact L1 optimum for that leaf.
pub fn refine_leaves_mae(grown: &mut GrownTree, residuals: &[f64]) {
    for (node_idx, rows) in &grown.leaf_rows {
        let leaf_residuals: Vec<f64> = rows.iter().map(|&r| residuals[r as usize]).collect();
        let value = median(&leaf_residuals);
        grown.tree.nodes[*node_idx] = TreeNode::Leaf { value };
    }
}

/// Tracks the best validation loss; signals a stop once it has not
/// improved for `rounds` consecutive iterations.
#[derive(Debug, Clone)]
pub struct EarlyStopper {
    rounds: usize,
    best: Option<(usize, f64)>,
}

impl EarlyStopper {
    pub fn new(rounds: usize) -> EarlyStopper {
        EarlyStopper { rounds, best: None }
    }

    /// Feed the loss of a finished iteration (1-based); true means halt.
    pub fn observe(&mut self, iteration: usize, loss: f64) -> bool {
        match self.best {
            Some((_, best_loss)) if loss >= best_loss => {}
            _ => self.best = Some((iteration, loss)),
        }
        self.rounds > 0 && iteration - self.best.unwrap().0 >= self.rounds
    }

    pub fn best_iteration(&self) -> Option<usize> {
        self.best.map(|(i, _)| i)
    }
}

/// Losses recorded during a fit. Iterations are numbered from 1;
/// `train_loss[i]` is the loss after iteration i+1.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FitReport {
    pub train_loss: Vec<f64>,
    pub valid_loss: Option<Vec<f64>>,
    /// 1-based iteration minimizing the validation loss.
    pub best_iteration: Option<usize>,
    pub stopped_early: bool,
}

impl FitReport {
    pub fn trained_iterations(&self) -> usize {
        self.train_loss.len()
    }
}

/// Trained model: a base score plus trees whose leaf values are already
/// scaled by the learning rate.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Ensemble {
    pub base_score: f64,
    pub trees: Vec<Tree>,
    pub schema: MatrixSchema,
    pub config: TrainConfig,
}

#[derive(serde::Serialize, serde::Deserialize)]
struct ModelDoc {
    format_version: u32,
    #[serde(flatten)]
    ensemble: Ensemble,
}

const MODEL_FORMAT_VERSION: u32 = 1;

impl Ensemble {
    pub fn predict(&self, m: &FeatureMatrix) -> Result<Vec<f64>> {
        self.predict_first_n(m, self.trees.len())
    }

    /// Predict with only the first `n_trees` trees, the tail dropped —
    /// how a best-iteration model is evaluated without retraining.
    pub fn predict_first_n(&self, m: &FeatureMatrix, n_trees: usize) -> Result<Vec<f64>> {
        if m.schema() != self.schema {
            return Err(Error::Contract(
                "feature matrix does not match the model's column manifest".into(),
            ));
        }
        let n_trees = n_trees.min(self.trees.len());
        Ok((0..m.n_rows())
            .map(|row| {
                self.base_score
                    + self.trees[..n_trees]
                        .iter()
                        .map(|t| t.predict_row(m, row))
                        .sum::<f64>()
            })
            .collect())
    }

    /// Total split gain per column, in schema order.
    pub fn feature_importance(&self) -> Vec<(String, f64)> {
        let mut gains = vec![0.0; self.schema.columns.len()];
        for tree in &self.trees {
            for node in &tree.nodes {
                if let TreeNode::Split { column, gain, .. } = node {
                    gains[*column as usize] += gain;
                }
            }
        }
        self.schema
            .columns
            .iter()
            .map(|c| c.name.clone())
            .zip(gains)
            .collect()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        serde_json::to_writer_pretty(
            BufWriter::new(file),
            &ModelDoc {
                format_version: MODEL_FORMAT_VERSION,
                ensemble: self.clone(),
            },
        )?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Ensemble> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let doc: ModelDoc = serde_json::from_reader(BufReader::new(file))?;
        if doc.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Schema(format!(
                "{}: unsupported model format version {}",
                path.display(),
                doc.format_version
            )));
        }
        Ok(doc.ensemble)
    }
}

// Counter-based stream so subsample draws depend only on (seed,
// iteration), never on execution order.
fn stream_rng(seed: u64, iteration: u64, tag: u64) -> ChaCha8Rng {
    let mut s = [0u8; 32];
    s[0..8].copy_from_slice(&seed.to_le_bytes());
    s[8..16].copy_from_slice(&iteration.to_le_bytes());
    s[16..24].copy_from_slice(&tag.to_le_bytes());
    ChaCha8Rng::from_seed(s)
}

const TAG_BAGGING: u64 = 1;
const TAG_FEATURES: u64 = 2;

fn sample_indices(n: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut picked = rand::seq::index::sample(rng, n, k).into_vec();
    picked.sort_unstable();
    picked
}

/// Fit an ensemble.
///
/// The base score is the target median (MAE) or mean (RMSE). Each
/// iteration computes gradients at the current predictions, draws the
/// bagging and feature subsets from the seeded stream, grows one tree,
/// refines leaves to median residuals under MAE, scales by the learning
/// rate and updates the running predictions. Training stops at `n_iter`,
/// when the validation loss has not improved for
/// `early_stopping_rounds` iterations, or when no positive-gain split
/// exists anywhere.
pub fn fit(
    train: &FeatureMatrix,
    targets: &[f64],
    valid: Option<(&FeatureMatrix, &[f64])>,
    config: &TrainConfig,
) -> Result<(Ensemble, FitReport)> {
    config.validate()?;
    if targets.len() != train.n_rows() {
        return Err(Error::Contract(format!(
            "{} targets for {} rows",
            targets.len(),
            train.n_rows()
        )));
    }
    if train.n_rows() == 0 {
        return Err(Error::Contract("empty training matrix".into()));
    }
    if targets.iter().any(|v| !v.is_finite()) {
        return Err(Error::Validation("non-finite training target".into()));
    }
    if config.early_stopping_rounds > 0 && valid.is_none() {
        return Err(Error::Config(
            "early stopping requested without a validation set".into(),
        ));
    }
    if let Some((vm, vy)) = valid {
        if vy.len() != vm.n_rows() {
            return Err(Error::Contract(format!(
                "{} validation targets for {} rows",
                vy.len(),
                vm.n_rows()
            )));
        }
        if vm.schema() != train.schema() {
            return Err(Error::Contract(
                "validation matrix schema differs from training schema".into(),
            ));
        }
    }

    let base_score = match config.objective {
        Objective::Mae => median(targets),
        Objective::Rmse => targets.iter().sum::<f64>() / targets.len() as f64,
    };

    let binned = bin_features(train, config.max_bin, config.min_data_in_bin)?;
    let n_rows = train.n_rows();
    let n_cols = train.n_cols();

    let mut predictions = vec![base_score; n_rows];
    let mut valid_predictions = valid.map(|(vm, _)| vec![base_score; vm.n_rows()]);

    let bagging_on = config.bagging_fraction < 1.0 && config.bagging_freq > 0;
    let feature_sampling_on = config.feature_fraction < 1.0 && n_cols > 1;
    let all_rows: Vec<u32> = (0..n_rows as u32).collect();
    let all_cols: Vec<usize> = (0..n_cols).collect();
    let mut bag: Vec<u32> = all_rows.clone();

    let grow_params = GrowParams {
        num_leaves: config.num_leaves,
        max_depth: config.depth_limit(),
        min_data_in_leaf: config.min_data_in_leaf,
    };

    let mut trees: Vec<Tree> = Vec::new();
    let mut train_losses: Vec<f64> = Vec::new();
    let mut valid_losses: Vec<f64> = valid.map(|_| Vec::new()).unwrap_or_default();
    let mut stopper = EarlyStopper::new(config.early_stopping_rounds);
    let mut stopped_early = false;

    for iteration in 1..=config.n_iter {
        let (grad, hess) = compute_gradients(config.objective, &predictions, targets)?;

        if bagging_on && (iteration - 1) % config.bagging_freq == 0 {
            let k = ((n_rows as f64 * config.bagging_fraction) as usize).max(1);
            let mut rng = stream_rng(config.seed, iteration as u64, TAG_BAGGING);
            bag = sample_indices(n_rows, k, &mut rng)
                .into_iter()
                .map(|i| i as u32)
                .collect();
        } else if !bagging_on {
            bag.clone_from(&all_rows);
        }

        let cols: Vec<usize> = if feature_sampling_on {
            let k = ((n_cols as f64 * config.feature_fraction) as usize).max(1);
            let mut rng = stream_rng(config.seed, iteration as u64, TAG_FEATURES);
            sample_indices(n_cols, k, &mut rng)
        } else {
            all_cols.clone()
        };

        let mut grown = grow_tree(&binned, &grad, &hess, bag.clone(), &cols, &grow_params);
        if grown.tree.nodes.len() == 1 {
            // No leaf admits a positive-gain split; further boosting
            // cannot change the model.
            break;
        }

        if config.objective == Objective::Mae {
            let residuals: Vec<f64> = targets
                .iter()
                .zip(&predictions)
                .map(|(y, p)| y - p)
                .collect();
            refine_leaves_mae(&mut grown, &residuals);
        }
        grown.tree.scale_leaves(config.learning_rate);
        let tree = grown.tree;

        for (row, p) in predictions.iter_mut().enumerate() {
            *p += tree.predict_row(train, row);
        }
        train_losses.push(training_loss(config.objective, &predictions, targets));

        if let (Some((vm, vy)), Some(vp)) = (valid, valid_predictions.as_mut()) {
            for (row, p) in vp.iter_mut().enumerate() {
                *p += tree.predict_row(vm, row);
            }
            let loss = training_loss(config.objective, vp, vy);
            valid_losses.push(loss);
            trees.push(tree);
            if stopper.observe(iteration, loss) {
                stopped_early = true;
                break;
            }
        } else {
            trees.push(tree);
        }
    }

    let best_iteration = if valid.is_some() && !valid_losses.is_empty() {
        let best = valid_losses
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i + 1);
        best
    } else {
        None
    };

    let report = FitReport {
        train_loss: train_losses,
        valid_loss: valid.map(|_| valid_losses),
        best_iteration,
        stopped_early,
    };
    let ensemble = Ensemble {
        base_score,
        trees,
        schema: train.schema(),
        config: config.clone(),
    };
    Ok((ensemble, report))
}
