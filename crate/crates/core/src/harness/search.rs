//! Random hyperparameter search over finite candidate lists.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::gbdt::TrainConfig;

/// Finite candidate lists keyed by config field name.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(transparent)]
pub struct SearchSpace {
    pub params: BTreeMap<String, Vec<f64>>,
}

const SAMPLABLE_FIELDS: [&str; 12] = [
    "learning_rate",
    "num_leaves",
    "max_depth",
    "max_bin",
    "min_data_in_bin",
    "min_data_in_leaf",
    "feature_fraction",
    "bagging_fraction",
    "bagging_freq",
    "n_iter",
    "early_stopping_rounds",
    "seed",
];

impl SearchSpace {
    pub fn validate(&self) -> Result<()> {
        for (name, candidates) in &self.params {
            if !SAMPLABLE_FIELDS.contains(&name.as_str()) {
                return Err(Error::Config(format!(
                    "search space names unknown parameter {name:?}"
                )));
            }
            if candidates.is_empty() {
                return Err(Error::Config(format!(
                    "empty candidate list for parameter {name:?}"
                )));
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<SearchSpace> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let space: SearchSpace = serde_json::from_reader(BufReader::new(file))?;
        space.validate()?;
        Ok(space)
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> BTreeMap<String, f64> {
        self.params
            .iter()
            .map(|(name, candidates)| {
                let idx = rng.gen_range(0..candidates.len());
                (name.clone(), candidates[idx])
            })
            .collect()
    }

    /// Overlay one sampled point on a base config.
    pub fn apply(base: &TrainConfig, sample: &BTreeMap<String, f64>) -> Result<TrainConfig> {
        let mut config = base.clone();
        for (name, &value) in sample {
            let as_usize = || value.round() as usize;
            match name.as_str() {
                "learning_rate" => config.learning_rate = value,
                "num_leaves" => config.num_leaves = as_usize(),
                "max_depth" => config.max_depth = value.round() as i32,
                "max_bin" => config.max_bin = as_usize(),
                "min_data_in_bin" => config.min_data_in_bin = as_usize(),
                "min_data_in_leaf" => config.min_data_in_leaf = as_usize(),
                "feature_fraction" => config.feature_fraction = value,
                "bagging_fraction" => config.bagging_fraction = value,
                "bagging_freq" => config.bagging_freq = as_usize(),
                "n_iter" => config.n_iter = as_usize(),
                "early_stopping_rounds" => config.early_stopping_rounds = as_usize(),
                "seed" => config.seed = value.round() as u64,
                _ => {
                    return Err(Error::Config(format!(
                        "search space names unknown parameter {name:?}"
                    )))
                }
            }
        }
        config.validate()?;
        Ok(config)
    }
}

/// The default search grid.
pub fn default_search_space() -> SearchSpace {
    let mut params = BTreeMap::new();
    params.insert(
        "max_bin".to_string(),
        vec![16.0, 32.0, 48.0, 64.0, 80.0, 96.0, 112.0, 128.0, 160.0, 192.0, 224.0, 256.0],
    );
    params.insert(
        "min_data_in_bin".to_string(),
        vec![2.0, 3.0, 4.0, 5.0, 6.0, 8.0, 10.0, 12.0, 15.0, 20.0],
    );
    params.insert(
        "num_leaves".to_string(),
        vec![
            4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0, 11.0, 12.0, 13.0, 15.0, 18.0, 21.0, 25.0, 30.0,
        ],
    );
    params.insert(
        "learning_rate".to_string(),
        vec![0.005, 0.007, 0.009, 0.011, 0.014, 0.018, 0.022, 0.026, 0.03, 0.035, 0.05],
    );
    params.insert(
        "min_data_in_leaf".to_string(),
        vec![
            2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0, 11.0, 12.0, 13.0, 15.0, 18.0, 21.0,
            25.0, 30.0,
        ],
    );
    params.insert(
        "max_depth".to_string(),
        vec![3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0, 11.0, 12.0, 13.0, -1.0],
    );
    // 91 evenly spaced points over [0.01, 0.90].
    params.insert(
        "feature_fraction".to_string(),
        (0..91).map(|i| 0.01 + i as f64 * (0.89 / 90.0)).collect(),
    );
    params.insert("bagging_freq".to_string(), vec![3.0, 4.0, 5.0, 6.0]);
    // 9 evenly spaced points over [0.50, 0.90].
    params.insert(
        "bagging_fraction".to_string(),
        (0..9).map(|i| 0.50 + i as f64 * 0.05).collect(),
    );
    SearchSpace { params }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Trial {
    pub sampled: BTreeMap<String, f64>,
    pub config: TrainConfig,
    pub fold_mae: Vec<f64>,
    pub mean_mae: f64,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TuneReport {
    pub trials: Vec<Trial>,
    /// Index of the trial minimizing mean MAE.
    pub best_trial: usize,
}

impl TuneReport {
    pub fn best(&self) -> &Trial {
        &self.trials[self.best_trial]
    }

    pub fn to_text_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("{:<6} {:>10}  sampled\n", "trial", "mean MAE"));
        for (i, t) in self.trials.iter().enumerate() {
            let marker = if i == self.best_trial { "*" } else { " " };
            let sampled = t
                .sampled
                .iter()
                .map(|(k, v)| format!("{k}={v}"))
                .collect::<Vec<_>>()
                .join(" ");
            out.push_str(&format!("{marker}{i:<5} {:>10.4}  {sampled}\n", t.mean_mae));
        }
        out
    }
}

const DUPLICATE_RETRIES: usize = 16;

/// Sample `trials` configs uniformly and independently from each
/// candidate list and evaluate them. Duplicate draws are retried a
/// bounded number of times, then accepted. The evaluator returns
/// (per-fold MAE, mean MAE); the best trial minimizes the mean.
pub fn random_search<F>(
    space: &SearchSpace,
    base: &TrainConfig,
    trials: usize,
    seed: u64,
    evaluator: F,
) -> Result<TuneReport>
where
    F: Fn(&TrainConfig) -> Result<(Vec<f64>, f64)> + Sync,
{
    if trials < 1 {
        return Err(Error::Config("trials must be >= 1".into()));
    }
    space.validate()?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples: Vec<BTreeMap<String, f64>> = Vec::with_capacity(trials);
    for _ in 0..trials {
        let mut sample = space.sample(&mut rng);
        for _ in 0..DUPLICATE_RETRIES {
            if !samples.contains(&sample) {
                break;
            }
            sample = space.sample(&mut rng);
        }
        samples.push(sample);
    }

    let mut report_trials = Vec::with_capacity(trials);
    for sample in samples {
        let config = SearchSpace::apply(base, &sample)?;
        let (fold_mae, mean_mae) = evaluator(&config)?;
        report_trials.push(Trial {
            sampled: sample,
            config,
            fold_mae,
            mean_mae,
        });
    }

    let best_trial = report_trials
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.mean_mae.total_cmp(&b.1.mean_mae))
        .map(|(i, _)| i)
        .expect("at least one trial");
    Ok(TuneReport {
        trials: report_trials,
        best_trial,
    })
}
