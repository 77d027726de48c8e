//! The run manifest: one JSON file naming every input of a pipeline run.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use gazeboost::corpus::{
    attach_annotations, load_bigram_counts, load_lexicon, load_lexicon_auto, load_task_csv, Dv,
    SentenceSet,
};
use gazeboost::error::{Error, Result};
use gazeboost::features::{FeatureGroup, FeatureGroupSpec};
use gazeboost::gbdt::TrainConfig;
use gazeboost::{BigramTable, Lexicon};

#[derive(Debug, Clone, serde::Deserialize)]
pub struct LexiconSpec {
    pub path: PathBuf,
    pub name: String,
    pub group: String,
    #[serde(default)]
    pub columns: Option<Vec<String>>,
}

fn default_trials() -> usize {
    100
}

fn default_folds() -> usize {
    5
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, serde::Deserialize)]
pub struct RunManifest {
    pub train_csv: PathBuf,
    #[serde(default)]
    pub test_csv: Option<PathBuf>,
    #[serde(default)]
    pub annotations: Option<PathBuf>,
    #[serde(default)]
    pub test_annotations: Option<PathBuf>,
    #[serde(default)]
    pub lexicons: Vec<LexiconSpec>,
    #[serde(default)]
    pub bigrams: Option<PathBuf>,
    /// Enabled feature groups; omitted means all eight.
    #[serde(default)]
    pub feature_groups: Option<Vec<String>>,
    /// One shared config, or one per DV under `train_configs`.
    #[serde(default)]
    pub train_config: Option<TrainConfig>,
    #[serde(default)]
    pub train_configs: Option<BTreeMap<String, TrainConfig>>,
    #[serde(default)]
    pub search_space: Option<PathBuf>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_folds")]
    pub cv_folds: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out_dir: PathBuf,
}

impl RunManifest {
    /// Load and validate. Relative paths are resolved against the
    /// manifest's directory.
    pub fn load(path: &Path) -> Result<RunManifest> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut manifest: RunManifest = serde_json::from_reader(BufReader::new(file))
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;

        let base = path.parent().unwrap_or_else(|| Path::new("."));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut manifest.train_csv);
        if let Some(p) = manifest.test_csv.as_mut() {
            resolve(p);
        }
        if let Some(p) = manifest.annotations.as_mut() {
            resolve(p);
        }
        if let Some(p) = manifest.test_annotations.as_mut() {
            resolve(p);
        }
        for lex in &mut manifest.lexicons {
            resolve(&mut lex.path);
        }
        if let Some(p) = manifest.bigrams.as_mut() {
            resolve(p);
        }
        if let Some(p) = manifest.search_space.as_mut() {
            resolve(p);
        }
        resolve(&mut manifest.out_dir);

        manifest.validate()?;
        Ok(manifest)
    }

    fn validate(&self) -> Result<()> {
        let mut required: Vec<&PathBuf> = vec![&self.train_csv];
        required.extend(self.test_csv.iter());
        required.extend(self.annotations.iter());
        required.extend(self.test_annotations.iter());
        required.extend(self.lexicons.iter().map(|l| &l.path));
        required.extend(self.bigrams.iter());
        required.extend(self.search_space.iter());
        for p in required {
            if !p.exists() {
                return Err(Error::Config(format!(
                    "referenced path does not exist: {}",
                    p.display()
                )));
            }
        }
        if self.train_config.is_some() && self.train_configs.is_some() {
            return Err(Error::Config(
                "declare train_config or train_configs, not both".into(),
            ));
        }
        if let Some(configs) = &self.train_configs {
            for dv in Dv::ALL {
                if !configs.contains_key(dv.name()) {
                    return Err(Error::Config(format!(
                        "train_configs missing DV {}",
                        dv.name()
                    )));
                }
            }
            for config in configs.values() {
                config.validate()?;
            }
        }
        if let Some(config) = &self.train_config {
            config.validate()?;
        }
        if let Some(groups) = &self.feature_groups {
            for g in groups {
                FeatureGroup::parse(g)?;
            }
        }
        Ok(())
    }

    pub fn group_spec(&self) -> Result<FeatureGroupSpec> {
        match &self.feature_groups {
            None => Ok(FeatureGroupSpec::all()),
            Some(names) => {
                let groups: Result<Vec<FeatureGroup>> =
                    names.iter().map(|n| FeatureGroup::parse(n)).collect();
                Ok(FeatureGroupSpec::only(groups?))
            }
        }
    }

    pub fn config_for(&self, dv: Dv) -> TrainConfig {
        if let Some(configs) = &self.train_configs {
            if let Some(c) = configs.get(dv.name()) {
                return c.clone();
            }
        }
        self.train_config.clone().unwrap_or_default()
    }

    /// Load the train or test sentence set with annotations attached.
    pub fn load_set(&self, split: DataSplit) -> Result<SentenceSet> {
        let (path, expect_targets, annotations) = match split {
            DataSplit::Train => (&self.train_csv, true, &self.annotations),
            DataSplit::Test => {
                let p = self.test_csv.as_ref().ok_or_else(|| {
                    Error::Config("manifest declares no test_csv".into())
                })?;
                (p, false, &self.test_annotations)
            }
        };
        let set = load_task_csv(path, expect_targets)?;
        match annotations {
            Some(ann) => attach_annotations(&set, ann),
            None => Ok(set),
        }
    }

    pub fn load_lexicons(&self) -> Result<Vec<(Lexicon, FeatureGroup)>> {
        self.lexicons
            .iter()
            .map(|spec| {
                let group = FeatureGroup::parse(&spec.group)?;
                let lexicon = match &spec.columns {
                    Some(cols) => load_lexicon(&spec.path, &spec.name, cols)?,
                    None => load_lexicon_auto(&spec.path, &spec.name)?,
                };
                Ok((lexicon, group))
            })
            .collect()
    }

    pub fn load_bigrams(&self) -> Result<Option<BigramTable>> {
        self.bigrams
            .as_deref()
            .map(load_bigram_counts)
            .transpose()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataSplit {
    Train,
    Test,
}
