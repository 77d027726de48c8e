//! Subcommand implementations, each writing deterministic artifacts into
//! the output directory.

use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use gazeboost::corpus::{load_task_csv, Dv, SentenceSet};
use gazeboost::error::{Error, Result};
use gazeboost::features::{build_matrix, write_matrix, FeatureGroup, FeatureMatrix};
use gazeboost::gbdt::{fit, Ensemble, TrainConfig};
use gazeboost::harness::{
    ablation, augment_log_features, clip_predictions, cross_validate, cross_validate_dv,
    default_search_space, kfold_by_sentence, mae, random_search, stepwise_linreg, CvSplit,
    DvCvResult, ScoreReport, SearchSpace,
};

use crate::manifest::{DataSplit, RunManifest};

pub struct Ctx {
    pub manifest: RunManifest,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub dvs: Vec<Dv>,
}

impl Ctx {
    fn ensure_out_dir(&self) -> Result<()> {
        std::fs::create_dir_all(&self.out_dir).map_err(|e| Error::io(&self.out_dir, e))
    }

    fn out(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    fn build_matrix_for(&self, split: DataSplit) -> Result<(SentenceSet, FeatureMatrix)> {
        let set = self.manifest.load_set(split)?;
        let lexicons = self.manifest.load_lexicons()?;
        let spec = self.manifest.group_spec()?;
        let bigrams = if spec.contains(FeatureGroup::BigramAm) {
            self.manifest.load_bigrams()?
        } else {
            None
        };
        let matrix = build_matrix(&set, &lexicons, bigrams.as_ref(), &spec)?;
        Ok((set, matrix))
    }

    fn split_for(&self, set: &SentenceSet) -> Result<CvSplit> {
        kfold_by_sentence(set, self.manifest.cv_folds, self.seed)
    }

    fn dv_targets(&self, set: &SentenceSet) -> Result<Vec<(String, Vec<f64>)>> {
        self.dvs
            .iter()
            .map(|&dv| {
                let y = set.targets_for(dv).ok_or_else(|| {
                    Error::Contract("training data carries no targets".into())
                })?;
                Ok((dv.name().to_string(), y))
            })
            .collect()
    }

    fn dv_configs(&self) -> Vec<TrainConfig> {
        self.dvs.iter().map(|&dv| self.manifest.config_for(dv)).collect()
    }
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn cmd_features(ctx: &Ctx, split: DataSplit) -> Result<()> {
    ctx.ensure_out_dir()?;
    let (_, matrix) = ctx.build_matrix_for(split)?;
    let suffix = match split {
        DataSplit::Train => "features",
        DataSplit::Test => "features_test",
    };
    let csv = ctx.out(&format!("{suffix}.csv"));
    let manifest = ctx.out(&format!("{suffix}.manifest.json"));
    write_matrix(&matrix, &csv, &manifest)?;
    println!(
        "wrote {} ({} rows x {} columns)",
        csv.display(),
        matrix.n_rows(),
        matrix.n_cols()
    );
    Ok(())
}

#[derive(serde::Serialize, serde::Deserialize)]
pub struct CvReportDoc {
    pub folds: usize,
    pub seed: u64,
    pub per_dv: Vec<DvCvResult>,
}

pub fn cmd_cv(ctx: &Ctx) -> Result<()> {
    ctx.ensure_out_dir()?;
    let (set, matrix) = ctx.build_matrix_for(DataSplit::Train)?;
    let split = ctx.split_for(&set)?;
    let targets = ctx.dv_targets(&set)?;
    let configs = ctx.dv_configs();
    let per_dv = cross_validate(&matrix, &targets, &configs, &split)?;

    println!(
        "{:<10} {:>10} {:>8}  fold MAE",
        "DV", "mean MAE", "n_iter"
    );
    for r in &per_dv {
        let folds = r
            .fold_mae
            .iter()
            .map(|v| format!("{v:.4}"))
            .collect::<Vec<_>>()
            .join(" ");
        let picked = r
            .picked_n_iter
            .map(|v| v.to_string())
            .unwrap_or_else(|| "-".to_string());
        println!("{:<10} {:>10.4} {:>8}  {}", r.dv, r.mean_mae, picked, folds);
    }
    let mean = per_dv.iter().map(|r| r.mean_mae).sum::<f64>() / per_dv.len() as f64;
    println!("{:<10} {:>10.4}", "mean", mean);

    write_json(
        &ctx.out("cv_report.json"),
        &CvReportDoc {
            folds: split.k,
            seed: ctx.seed,
            per_dv,
        },
    )
}

pub fn cmd_train(ctx: &Ctx, iters_from: Option<&Path>) -> Result<()> {
    ctx.ensure_out_dir()?;
    let picked: Option<HashMap<String, usize>> = match iters_from {
        Some(path) => {
            let file = File::open(path).map_err(|e| Error::io(path, e))?;
            let doc: CvReportDoc = serde_json::from_reader(BufReader::new(file))?;
            let mut map = HashMap::new();
            for r in doc.per_dv {
                let n = r.picked_n_iter.ok_or_else(|| {
                    Error::Policy(format!(
                        "{}: no picked n_iter for {} (needs >= 4 folds)",
                        path.display(),
                        r.dv
                    ))
                })?;
                map.insert(r.dv, n);
            }
            Some(map)
        }
        None => None,
    };

    let (set, matrix) = ctx.build_matrix_for(DataSplit::Train)?;
    for &dv in &ctx.dvs {
        let mut config = ctx.manifest.config_for(dv);
        // Final-model protocol: fixed iteration count, no early stopping.
        config.early_stopping_rounds = 0;
        if let Some(map) = &picked {
            config.n_iter = *map.get(dv.name()).ok_or_else(|| {
                Error::Policy(format!("iteration report lacks DV {}", dv.name()))
            })?;
        }
        let y = set
            .targets_for(dv)
            .ok_or_else(|| Error::Contract("training data carries no targets".into()))?;
        let (ensemble, report) = fit(&matrix, &y, None, &config)?;
        let model_path = ctx.out(&format!("model_{}.json", dv.name()));
        ensemble.save(&model_path)?;
        write_json(&ctx.out(&format!("fit_{}.json", dv.name())), &report)?;
        println!(
            "{}: trained {} trees (final train loss {:.4}), wrote {}",
            dv.name(),
            report.trained_iterations(),
            report.train_loss.last().copied().unwrap_or(f64::NAN),
            model_path.display()
        );
    }
    Ok(())
}

pub fn cmd_predict(ctx: &Ctx) -> Result<()> {
    ctx.ensure_out_dir()?;
    let (set, mut matrix) = ctx.build_matrix_for(DataSplit::Test)?;

    let mut per_dv: Vec<(Dv, Vec<f64>)> = Vec::new();
    let mut aligned = false;
    for &dv in &ctx.dvs {
        let model_path = ctx.out(&format!("model_{}.json", dv.name()));
        let ensemble = Ensemble::load(&model_path)?;
        if !aligned {
            // All five models share one feature schema.
            matrix.reindex_categories(&ensemble.schema)?;
            aligned = true;
        }
        let raw = ensemble.predict(&matrix)?;
        per_dv.push((dv, clip_predictions(&raw, 0.0, 100.0)));
    }

    let path = ctx.out("predictions.csv");
    let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
    let mut w = BufWriter::new(file);
    let mut header = String::from("sentence_id,word_id");
    for (dv, _) in &per_dv {
        header.push(',');
        header.push_str(dv.name());
    }
    writeln!(w, "{header}").map_err(|e| Error::io(&path, e))?;
    for (row, token) in set.tokens().enumerate() {
        let mut line = format!("{},{}", token.sentence_id, token.rank);
        for (_, preds) in &per_dv {
            line.push_str(&format!(",{}", preds[row]));
        }
        writeln!(w, "{line}").map_err(|e| Error::io(&path, e))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    println!("wrote {} ({} rows)", path.display(), set.n_tokens());
    Ok(())
}

pub fn cmd_tune(ctx: &Ctx, trials: Option<usize>) -> Result<()> {
    ctx.ensure_out_dir()?;
    let (set, matrix) = ctx.build_matrix_for(DataSplit::Train)?;
    let split = ctx.split_for(&set)?;
    let space = match &ctx.manifest.search_space {
        Some(path) => SearchSpace::load(path)?,
        None => default_search_space(),
    };
    let trials = trials.unwrap_or(ctx.manifest.trials);

    for &dv in &ctx.dvs {
        let y = set
            .targets_for(dv)
            .ok_or_else(|| Error::Contract("training data carries no targets".into()))?;
        let base = ctx.manifest.config_for(dv);
        let report = random_search(&space, &base, trials, ctx.seed, |config| {
            let (fold_mae, mean, _) = cross_validate_dv(&matrix, &y, config, &split)?;
            Ok((fold_mae, mean))
        })?;
        println!("=== {} ===", dv.name());
        print!("{}", report.to_text_table());
        write_json(&ctx.out(&format!("tune_{}.json", dv.name())), &report)?;
    }
    Ok(())
}

pub fn cmd_ablate(ctx: &Ctx) -> Result<()> {
    ctx.ensure_out_dir()?;
    let (set, matrix) = ctx.build_matrix_for(DataSplit::Train)?;
    let split = ctx.split_for(&set)?;
    let targets = ctx.dv_targets(&set)?;
    let configs = ctx.dv_configs();

    let mut group_sets: Vec<BTreeSet<FeatureGroup>> = vec![BTreeSet::new()];
    for group in matrix.groups_present() {
        group_sets.push([group].into_iter().collect());
    }
    let report = ablation(&matrix, &targets, &configs, &split, &group_sets)?;
    print!("{}", report.to_text_table());
    write_json(&ctx.out("ablation_report.json"), &report)
}

#[derive(serde::Serialize)]
struct BaselineDvResult {
    dv: String,
    fold_mae: Vec<f64>,
    mean_mae: f64,
    selected_terms: Vec<usize>,
}

#[derive(serde::Serialize)]
struct BaselineReportDoc {
    folds: usize,
    seed: u64,
    per_dv: Vec<BaselineDvResult>,
    mean_mae: f64,
}

/// Stepwise-regression CV under the same folds and clipping as the
/// boosted model, for a like-for-like baseline row.
pub fn cmd_baseline(ctx: &Ctx) -> Result<()> {
    ctx.ensure_out_dir()?;
    let (set, matrix) = ctx.build_matrix_for(DataSplit::Train)?;
    let split = ctx.split_for(&set)?;
    let augmented = augment_log_features(&matrix);

    let mut rows_by_fold: Vec<Vec<usize>> = vec![Vec::new(); split.k];
    for (row, &(sid, _)) in augmented.row_keys().iter().enumerate() {
        let fold = split
            .fold_of(sid)
            .ok_or_else(|| Error::Config(format!("split does not cover sentence {sid}")))?;
        rows_by_fold[fold].push(row);
    }

    let mut per_dv = Vec::new();
    for &dv in &ctx.dvs {
        let y = set
            .targets_for(dv)
            .ok_or_else(|| Error::Contract("training data carries no targets".into()))?;
        let fold_results: Vec<Result<(f64, usize)>> = (0..split.k)
            .into_par_iter()
            .map(|fold| {
                let valid_rows = &rows_by_fold[fold];
                let train_rows: Vec<usize> = (0..split.k)
                    .filter(|&f| f != fold)
                    .flat_map(|f| rows_by_fold[f].iter().copied())
                    .collect();
                let train_m = augmented.select_rows(&train_rows);
                let valid_m = augmented.select_rows(valid_rows);
                let train_y: Vec<f64> = train_rows.iter().map(|&r| y[r]).collect();
                let valid_y: Vec<f64> = valid_rows.iter().map(|&r| y[r]).collect();
                let model = stepwise_linreg(&train_m, &train_y, 0.01, 0.05)?;
                let preds = clip_predictions(&model.predict(&valid_m)?, 0.0, 100.0);
                Ok((mae(&preds, &valid_y)?, model.terms.len()))
            })
            .collect();
        let mut fold_mae = Vec::new();
        let mut selected_terms = Vec::new();
        for r in fold_results {
            let (m, t) = r?;
            fold_mae.push(m);
            selected_terms.push(t);
        }
        let mean_mae = fold_mae.iter().sum::<f64>() / fold_mae.len() as f64;
        println!("{:<10} {:>10.4}  terms per fold: {:?}", dv.name(), mean_mae, selected_terms);
        per_dv.push(BaselineDvResult {
            dv: dv.name().to_string(),
            fold_mae,
            mean_mae,
            selected_terms,
        });
    }
    let mean_mae = per_dv.iter().map(|r| r.mean_mae).sum::<f64>() / per_dv.len() as f64;
    println!("{:<10} {:>10.4}", "mean", mean_mae);
    write_json(
        &ctx.out("baseline_report.json"),
        &BaselineReportDoc {
            folds: split.k,
            seed: ctx.seed,
            per_dv,
            mean_mae,
        },
    )
}

fn read_predictions(path: &Path) -> Result<HashMap<(u32, u32), [f64; 5]>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(BufReader::new(file));
    let headers = reader
        .headers()
        .map_err(|e| Error::parse(path, 1, e.to_string()))?
        .clone();
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("{}: missing column {name}", path.display())))
    };
    let sid_col = col("sentence_id")?;
    let wid_col = col("word_id")?;
    let dv_cols: Vec<usize> = Dv::ALL
        .iter()
        .map(|dv| col(dv.name()))
        .collect::<Result<_>>()?;

    let mut out = HashMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or_default();
            Error::parse(path, line, e.to_string())
        })?;
        let line = record
            .position()
            .map(|p| p.line() as usize)
            .unwrap_or_default();
        let parse = |i: usize| -> Result<f64> {
            record[i]
                .parse()
                .map_err(|_| Error::parse(path, line, format!("bad value {:?}", &record[i])))
        };
        let sid = record[sid_col]
            .parse::<u32>()
            .map_err(|_| Error::parse(path, line, "bad sentence_id"))?;
        let wid = record[wid_col]
            .parse::<u32>()
            .map_err(|_| Error::parse(path, line, "bad word_id"))?;
        let mut vals = [0.0f64; 5];
        for (slot, &c) in vals.iter_mut().zip(&dv_cols) {
            *slot = parse(c)?;
        }
        out.insert((sid, wid), vals);
    }
    Ok(out)
}

/// Score predictions against gold, or average five given MAEs.
pub fn cmd_score(
    pred: Option<&Path>,
    gold: Option<&Path>,
    maes: Option<&str>,
    json_out: Option<&Path>,
) -> Result<()> {
    let report = match (pred, gold, maes) {
        (_, _, Some(list)) => {
            let values: Vec<f64> = list
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Config(format!("bad MAE value {s:?}")))
                })
                .collect::<Result<_>>()?;
            if values.len() != 5 {
                return Err(Error::Config(format!(
                    "--maes takes exactly five values, got {}",
                    values.len()
                )));
            }
            ScoreReport::new(
                Dv::ALL
                    .iter()
                    .zip(values)
                    .map(|(dv, v)| (dv.name().to_string(), v))
                    .collect(),
            )
        }
        (Some(pred), Some(gold), None) => {
            let predictions = read_predictions(pred)?;
            let gold_set = load_task_csv(gold, true)?;
            let mut per_dv_pred: Vec<Vec<f64>> = vec![Vec::new(); 5];
            let mut per_dv_gold: Vec<Vec<f64>> = vec![Vec::new(); 5];
            for token in gold_set.tokens() {
                let key = (token.sentence_id, token.rank);
                let preds = predictions.get(&key).ok_or_else(|| {
                    Error::Contract(format!(
                        "{}: no prediction for sentence {} word {}",
                        pred.display(),
                        key.0,
                        key.1
                    ))
                })?;
                let targets = token.targets.expect("gold set has targets");
                for (i, dv) in Dv::ALL.into_iter().enumerate() {
                    per_dv_pred[i].push(preds[i]);
                    per_dv_gold[i].push(targets.get(dv));
                }
            }
            let per_dv_mae = Dv::ALL
                .iter()
                .enumerate()
                .map(|(i, dv)| Ok((dv.name().to_string(), mae(&per_dv_pred[i], &per_dv_gold[i])?)))
                .collect::<Result<Vec<_>>>()?;
            ScoreReport::new(per_dv_mae)
        }
        _ => {
            return Err(Error::Config(
                "score needs --pred and --gold, or --maes v1,v2,v3,v4,v5".into(),
            ))
        }
    };

    print!("{}", report.to_text_table());
    if let Some(path) = json_out {
        write_json(path, &report)?;
    }
    Ok(())
}
