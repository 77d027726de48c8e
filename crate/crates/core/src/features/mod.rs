//! Feature matrix construction: lengths, positions, categorical POS/lemma
//! columns, resource lookups and bigram association measures, with
//! explicit missing cells and named feature groups for ablation.

mod assoc;
mod matrix_io;

pub use assoc::{am_scores, contingency, AmScores, ContingencyTable};
pub use matrix_io::{read_matrix, write_matrix};

use std::collections::{BTreeSet, HashMap, HashSet};

use crate::corpus::{BigramTable, Lexicon, SentenceSet, Token};
use crate::error::{Error, Result};

/// The eight feature groups.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum FeatureGroup {
    Length,
    Position,
    PostagLemma,
    Frequency,
    Norms,
    ElpCharacteristics,
    ElpBehavioral,
    BigramAm,
}

impl FeatureGroup {
    pub const ALL: [FeatureGroup; 8] = [
        FeatureGroup::Length,
        FeatureGroup::Position,
        FeatureGroup::PostagLemma,
        FeatureGroup::Frequency,
        FeatureGroup::Norms,
        FeatureGroup::ElpCharacteristics,
        FeatureGroup::ElpBehavioral,
        FeatureGroup::BigramAm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FeatureGroup::Length => "length",
            FeatureGroup::Position => "position",
            FeatureGroup::PostagLemma => "postag_lemma",
            FeatureGroup::Frequency => "frequency",
            FeatureGroup::Norms => "norms",
            FeatureGroup::ElpCharacteristics => "elp_characteristics",
            FeatureGroup::ElpBehavioral => "elp_behavioral",
            FeatureGroup::BigramAm => "bigram_am",
        }
    }

    pub fn parse(s: &str) -> Result<FeatureGroup> {
        FeatureGroup::ALL
            .into_iter()
            .find(|g| g.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown feature group {s:?}")))
    }

    /// Groups a lexicon may be tagged with.
    pub fn is_resource_group(self) -> bool {
        matches!(
            self,
            FeatureGroup::Frequency
                | FeatureGroup::Norms
                | FeatureGroup::ElpCharacteristics
                | FeatureGroup::ElpBehavioral
        )
    }
}

impl std::fmt::Display for FeatureGroup {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Which groups to build.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureGroupSpec {
    pub enabled: BTreeSet<FeatureGroup>,
}

impl FeatureGroupSpec {
    pub fn all() -> Self {
        FeatureGroupSpec {
            enabled: FeatureGroup::ALL.into_iter().collect(),
        }
    }

    pub fn only(groups: impl IntoIterator<Item = FeatureGroup>) -> Self {
        FeatureGroupSpec {
            enabled: groups.into_iter().collect(),
        }
    }

    pub fn contains(&self, g: FeatureGroup) -> bool {
        self.enabled.contains(&g)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Numeric,
    Categorical,
}

/// String-to-id dictionary for one categorical column. Ids start at 1 in
/// first-seen order; id 0 is reserved for categories unseen at build time.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CategoryDict {
    names: Vec<String>,
    index: HashMap<String, u32>,
}

impl CategoryDict {
    pub const UNKNOWN: u32 = 0;

    pub fn from_names(names: Vec<String>) -> CategoryDict {
        let index = names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i as u32 + 1))
            .collect();
        CategoryDict { names, index }
    }

    pub fn intern(&mut self, name: &str) -> u32 {
        if let Some(&id) = self.index.get(name) {
            return id;
        }
        self.names.push(name.to_string());
        let id = self.names.len() as u32;
        self.index.insert(name.to_string(), id);
        id
    }

    pub fn id_of(&self, name: &str) -> u32 {
        self.index.get(name).copied().unwrap_or(Self::UNKNOWN)
    }

    pub fn name_of(&self, id: u32) -> Option<&str> {
        if id == Self::UNKNOWN {
            None
        } else {
            self.names.get(id as usize - 1).map(String::as_str)
        }
    }

    /// Number of named categories (the unknown id is extra).
    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

/// One feature column. Categorical cells store dictionary ids as reals.
#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    pub kind: ColumnKind,
    pub group: FeatureGroup,
    pub values: Vec<Option<f64>>,
    pub dict: Option<CategoryDict>,
}

/// Serializable description of a column, used by the matrix manifest and
/// echoed into trained models for predict-time schema checks.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ColumnMeta {
    pub name: String,
    pub kind: ColumnKind,
    pub group: FeatureGroup,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub categories: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MatrixSchema {
    pub columns: Vec<ColumnMeta>,
}

/// Feature rows keyed by (sentence_id, rank), one row per token in
/// corpus order.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    columns: Vec<Column>,
    row_keys: Vec<(u32, u32)>,
}

impl FeatureMatrix {
    pub fn from_columns(columns: Vec<Column>, row_keys: Vec<(u32, u32)>) -> Result<FeatureMatrix> {
        let mut names = HashSet::new();
        for c in &columns {
            if c.values.len() != row_keys.len() {
                return Err(Error::Contract(format!(
                    "column {} has {} cells for {} rows",
                    c.name,
                    c.values.len(),
                    row_keys.len()
                )));
            }
            if !names.insert(c.name.clone()) {
                return Err(Error::Config(format!("duplicate column name {:?}", c.name)));
            }
        }
        Ok(FeatureMatrix { columns, row_keys })
    }

    pub fn n_rows(&self) -> usize {
        self.row_keys.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column(&self, idx: usize) -> &Column {
        &self.columns[idx]
    }

    pub fn column_by_name(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn row_keys(&self) -> &[(u32, u32)] {
        &self.row_keys
    }

    pub fn value(&self, row: usize, col: usize) -> Option<f64> {
        self.columns[col].values[row]
    }

    pub fn column_names(&self) -> Vec<&str> {
        self.columns.iter().map(|c| c.name.as_str()).collect()
    }

    pub fn groups_present(&self) -> BTreeSet<FeatureGroup> {
        self.columns.iter().map(|c| c.group).collect()
    }

    pub fn schema(&self) -> MatrixSchema {
        MatrixSchema {
            columns: self
                .columns
                .iter()
                .map(|c| ColumnMeta {
                    name: c.name.clone(),
                    kind: c.kind,
                    group: c.group,
                    categories: c.dict.as_ref().map(|d| d.names().to_vec()),
                })
                .collect(),
        }
    }

    /// New matrix holding the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> FeatureMatrix {
        let columns = self
            .columns
            .iter()
            .map(|c| Column {
                name: c.name.clone(),
                kind: c.kind,
                group: c.group,
                values: rows.iter().map(|&r| c.values[r]).collect(),
                dict: c.dict.clone(),
            })
            .collect();
        let row_keys = rows.iter().map(|&r| self.row_keys[r]).collect();
        FeatureMatrix {
            columns,
            row_keys,
        }
    }

    /// Remap categorical ids onto a reference schema's dictionaries, so a
    /// matrix built from new data can be fed to a model trained under
    /// that schema. Categories absent from the reference dictionary map
    /// to the reserved unknown id.
    pub fn reindex_categories(&mut self, schema: &MatrixSchema) -> Result<()> {
        if schema.columns.len() != self.columns.len() {
            return Err(Error::Schema(format!(
                "schema has {} columns, matrix has {}",
                schema.columns.len(),
                self.columns.len()
            )));
        }
        for (col, meta) in self.columns.iter_mut().zip(&schema.columns) {
            if col.name != meta.name || col.kind != meta.kind || col.group != meta.group {
                return Err(Error::Schema(format!(
                    "column mismatch: matrix has {:?}, schema has {:?}",
                    col.name, meta.name
                )));
            }
            match (&mut col.dict, &meta.categories) {
                (None, None) => {}
                (Some(dict), Some(names)) => {
                    let reference = CategoryDict::from_names(names.clone());
                    for v in col.values.iter_mut().flatten() {
                        let old_id = *v as u32;
                        let new_id = dict
                            .name_of(old_id)
                            .map(|n| reference.id_of(n))
                            .unwrap_or(CategoryDict::UNKNOWN);
                        *v = new_id as f64;
                    }
                    *dict = reference;
                }
                _ => {
                    return Err(Error::Schema(format!(
                        "column {:?}: categorical/numeric mismatch with schema",
                        col.name
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Character lengths of the normalized previous, current and next word.
/// The previous length is missing for the first token of a sentence, the
/// next length for the last.
pub fn length_features(sentence: &[Token], i: usize) -> (Option<u32>, u32, Option<u32>) {
    let len = |t: &Token| t.normalized.chars().count() as u32;
    let prev = (i > 0).then(|| len(&sentence[i - 1]));
    let next = (i + 1 < sentence.len()).then(|| len(&sentence[i + 1]));
    (prev, len(&sentence[i]), next)
}

/// Word position as (1-based rank, rank / sentence length).
pub fn position_features(sentence_len: u32, rank: u32) -> (u32, f64) {
    (rank, rank as f64 / sentence_len as f64)
}

struct ColumnBuilder {
    name: String,
    kind: ColumnKind,
    group: FeatureGroup,
    values: Vec<Option<f64>>,
    dict: Option<CategoryDict>,
}

impl ColumnBuilder {
    fn numeric(name: impl Into<String>, group: FeatureGroup, n_rows: usize) -> Self {
        ColumnBuilder {
            name: name.into(),
            kind: ColumnKind::Numeric,
            group,
            values: Vec::with_capacity(n_rows),
            dict: None,
        }
    }

    fn categorical(name: impl Into<String>, group: FeatureGroup, n_rows: usize) -> Self {
        ColumnBuilder {
            name: name.into(),
            kind: ColumnKind::Categorical,
            group,
            values: Vec::with_capacity(n_rows),
            dict: Some(CategoryDict::default()),
        }
    }

    fn push_category(&mut self, value: Option<&str>) {
        let dict = self.dict.as_mut().expect("categorical column");
        self.values
            .push(value.map(|v| dict.intern(v) as f64));
    }

    fn finish(self) -> Column {
        Column {
            name: self.name,
            kind: self.kind,
            group: self.group,
            values: self.values,
            dict: self.dict,
        }
    }
}

/// Build the feature matrix for a sentence set.
///
/// `lexicons` must be tagged with one of the four resource groups;
/// `bigrams` is required when the `bigram_am` group is enabled. Columns
/// of disabled groups are omitted entirely. Association measures are
/// computed on (preceding word, target word) and are missing for
/// sentence-initial tokens.
pub fn build_matrix(
    set: &SentenceSet,
    lexicons: &[(Lexicon, FeatureGroup)],
    bigrams: Option<&BigramTable>,
    spec: &FeatureGroupSpec,
) -> Result<FeatureMatrix> {
    for (lexicon, group) in lexicons {
        if !group.is_resource_group() {
            return Err(Error::Config(format!(
                "lexicon {:?} tagged with non-resource group {group}",
                lexicon.name
            )));
        }
    }
    if spec.contains(FeatureGroup::BigramAm) && bigrams.is_none() {
        return Err(Error::Config(
            "bigram_am group enabled but no bigram table given".into(),
        ));
    }

    let n_rows = set.n_tokens();
    let row_keys: Vec<(u32, u32)> = set.tokens().map(|t| (t.sentence_id, t.rank)).collect();

    let mut length_cols = if spec.contains(FeatureGroup::Length) {
        vec![
            ColumnBuilder::numeric("prev_len", FeatureGroup::Length, n_rows),
            ColumnBuilder::numeric("word_len", FeatureGroup::Length, n_rows),
            ColumnBuilder::numeric("next_len", FeatureGroup::Length, n_rows),
        ]
    } else {
        Vec::new()
    };
    let mut position_cols = if spec.contains(FeatureGroup::Position) {
        vec![
            ColumnBuilder::numeric("rank", FeatureGroup::Position, n_rows),
            ColumnBuilder::numeric("rank_ratio", FeatureGroup::Position, n_rows),
        ]
    } else {
        Vec::new()
    };
    let mut categorical_cols = if spec.contains(FeatureGroup::PostagLemma) {
        vec![
            ColumnBuilder::categorical("pos", FeatureGroup::PostagLemma, n_rows),
            ColumnBuilder::categorical("lemma", FeatureGroup::PostagLemma, n_rows),
            ColumnBuilder::categorical("prev_pos", FeatureGroup::PostagLemma, n_rows),
            ColumnBuilder::categorical("prev_lemma", FeatureGroup::PostagLemma, n_rows),
        ]
    } else {
        Vec::new()
    };
    let active_lexicons: Vec<&(Lexicon, FeatureGroup)> = lexicons
        .iter()
        .filter(|(_, g)| spec.contains(*g))
        .collect();
    let mut lexicon_cols: Vec<Vec<ColumnBuilder>> = active_lexicons
        .iter()
        .map(|(lexicon, group)| {
            lexicon
                .columns
                .iter()
                .map(|col| {
                    ColumnBuilder::numeric(format!("{}_{col}", lexicon.name), *group, n_rows)
                })
                .collect()
        })
        .collect();
    let mut am_cols = if spec.contains(FeatureGroup::BigramAm) {
        AmScores::NAMES
            .iter()
            .map(|n| ColumnBuilder::numeric(format!("am_{n}"), FeatureGroup::BigramAm, n_rows))
            .collect()
    } else {
        Vec::new()
    };

    for sentence in &set.sentences {
        let sentence_len = sentence.len() as u32;
        for (i, token) in sentence.iter().enumerate() {
            let prev = (i > 0).then(|| &sentence[i - 1]);

            if !length_cols.is_empty() {
                let (prev_len, len, next_len) = length_features(sentence, i);
                length_cols[0].values.push(prev_len.map(f64::from));
                length_cols[1].values.push(Some(f64::from(len)));
                length_cols[2].values.push(next_len.map(f64::from));
            }
            if !position_cols.is_empty() {
                let (rank, ratio) = position_features(sentence_len, token.rank);
                position_cols[0].values.push(Some(f64::from(rank)));
                position_cols[1].values.push(Some(ratio));
            }
            if !categorical_cols.is_empty() {
                categorical_cols[0].push_category(token.pos.as_deref());
                categorical_cols[1].push_category(token.lemma.as_deref());
                categorical_cols[2].push_category(prev.and_then(|p| p.pos.as_deref()));
                categorical_cols[3].push_category(prev.and_then(|p| p.lemma.as_deref()));
            }
            for ((lexicon, _), cols) in active_lexicons.iter().zip(lexicon_cols.iter_mut()) {
                match lexicon.lookup_entry(token) {
                    Some(values) => {
                        for (col, v) in cols.iter_mut().zip(values) {
                            col.values.push(*v);
                        }
                    }
                    None => {
                        for col in cols.iter_mut() {
                            col.values.push(None);
                        }
                    }
                }
            }
            if !am_cols.is_empty() {
                let scores = prev
                    .and_then(|p| {
                        contingency(bigrams.unwrap(), &p.normalized, &token.normalized)
                    })
                    .map(|t| am_scores(&t))
                    .unwrap_or_default();
                for (col, v) in am_cols.iter_mut().zip(scores.as_array()) {
                    col.values.push(v);
                }
            }
        }
    }

    let mut columns = Vec::new();
    columns.extend(length_cols.into_iter().map(ColumnBuilder::finish));
    columns.extend(position_cols.into_iter().map(ColumnBuilder::finish));
    columns.extend(categorical_cols.into_iter().map(ColumnBuilder::finish));
    columns.extend(lexicon_cols.into_iter().flatten().map(ColumnBuilder::finish));
    columns.extend(am_cols.into_iter().map(ColumnBuilder::finish));
    FeatureMatrix::from_columns(columns, row_keys)
}

/// Remove all columns belonging to the named groups. Every named group
/// must be present in the matrix.
pub fn drop_groups(m: &FeatureMatrix, groups: &BTreeSet<FeatureGroup>) -> Result<FeatureMatrix> {
    let present = m.groups_present();
    for g in groups {
        if !present.contains(g) {
            return Err(Error::Config(format!("group {g} not present in matrix")));
        }
    }
    let columns = m
        .columns
        .iter()
        .filter(|c| !groups.contains(&c.group))
        .cloned()
        .collect();
    FeatureMatrix::from_columns(columns, m.row_keys.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{load_task_csv, BigramTable, Lexicon};
    use std::io::Write as _;

    fn toy_set() -> SentenceSet {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(
            b"sentence_id,word_id,word\n\
              1,1,The\n1,2,cat\n1,3,sat.\n\
              2,1,(Reuters)\n2,2,reported\n",
        )
        .unwrap();
        let mut set = load_task_csv(f.path(), false).unwrap();
        set.sentences[0][1].lemma = Some("cat".into());
        set.sentences[0][1].pos = Some("NN".into());
        set.sentences[0][2].lemma = Some("sit".into());
        set.sentences[0][2].pos = Some("VBD".into());
        set
    }

    fn lexicon(name: &str, n_cols: usize, group: FeatureGroup) -> (Lexicon, FeatureGroup) {
        let cols = (0..n_cols).map(|i| format!("v{i}")).collect();
        let mut lex = Lexicon::new(name, cols);
        lex.insert("the", vec![Some(1.0); n_cols]);
        lex.insert("cat", vec![Some(2.0); n_cols]);
        (lex, group)
    }

    fn toy_bigrams() -> BigramTable {
        BigramTable::from_token_sequences(&[vec![
            "the", "cat", "sat", "the", "cat", "ran", "the", "dog",
        ]])
    }

    #[test]
    fn length_features_boundaries() {
        let set = toy_set();
        let s = &set.sentences[0];
        assert_eq!(length_features(s, 1), (Some(3), 3, Some(3)));
        assert_eq!(length_features(s, 0), (None, 3, Some(3)));
        assert_eq!(length_features(s, 2), (Some(3), 3, None));
        // "(Reuters)" counts 7 chars after normalization.
        assert_eq!(length_features(&set.sentences[1], 0).1, 7);
    }

    #[test]
    fn position_feature_values() {
        assert_eq!(position_features(10, 3), (3, 0.3));
        assert_eq!(position_features(7, 7), (7, 1.0));
        assert_eq!(position_features(1, 1), (1, 1.0));
    }

    #[test]
    fn full_configuration_column_ledger() {
        // 7 frequency + 2 norms + 15 + 8 ELP columns alongside the fixed
        // groups: 3 + 2 + 4 + 7 + 2 + 23 + 8 = 49.
        let set = toy_set();
        let lexicons = vec![
            lexicon("freq", 7, FeatureGroup::Frequency),
            lexicon("glasgow", 2, FeatureGroup::Norms),
            lexicon("elp_char", 15, FeatureGroup::ElpCharacteristics),
            lexicon("elp_behav", 8, FeatureGroup::ElpBehavioral),
        ];
        let bigrams = toy_bigrams();
        let m = build_matrix(&set, &lexicons, Some(&bigrams), &FeatureGroupSpec::all()).unwrap();
        assert_eq!(m.n_cols(), 49);
        assert_eq!(m.n_rows(), 5);

        let dropped = drop_groups(&m, &[FeatureGroup::BigramAm].into_iter().collect()).unwrap();
        assert_eq!(dropped.n_cols(), 41);
    }

    #[test]
    fn length_position_only() {
        let set = toy_set();
        let m = build_matrix(
            &set,
            &[],
            None,
            &FeatureGroupSpec::only([FeatureGroup::Length, FeatureGroup::Position]),
        )
        .unwrap();
        assert_eq!(m.n_cols(), 5);
        // Only boundary lengths are missing.
        for col in m.columns() {
            for (row, v) in col.values.iter().enumerate() {
                let (_, rank) = m.row_keys()[row];
                let boundary = (col.name == "prev_len" && rank == 1)
                    || (col.name == "next_len" && (row == 2 || row == 4));
                assert_eq!(v.is_none(), boundary, "{} row {row}", col.name);
            }
        }
    }

    #[test]
    fn unlisted_token_keeps_length_and_position() {
        let set = toy_set();
        let lexicons = vec![lexicon("freq", 1, FeatureGroup::Frequency)];
        let bigrams = toy_bigrams();
        let m = build_matrix(&set, &lexicons, Some(&bigrams), &FeatureGroupSpec::all()).unwrap();
        // "reported" is in no resource and its predecessor is unknown to
        // the bigram table.
        let row = 4;
        assert_eq!(m.column_by_name("freq_v0").unwrap().values[row], None);
        for am in AmScores::NAMES {
            assert_eq!(
                m.column_by_name(&format!("am_{am}")).unwrap().values[row],
                None
            );
        }
        assert!(m.column_by_name("word_len").unwrap().values[row].is_some());
        assert!(m.column_by_name("rank_ratio").unwrap().values[row].is_some());
    }

    #[test]
    fn sentence_initial_tokens_have_missing_prev_features() {
        let set = toy_set();
        let bigrams = toy_bigrams();
        let m = build_matrix(&set, &[], Some(&bigrams), &FeatureGroupSpec::all()).unwrap();
        for row in [0, 3] {
            assert_eq!(m.column_by_name("am_pmi").unwrap().values[row], None);
            assert_eq!(m.column_by_name("prev_pos").unwrap().values[row], None);
            assert_eq!(m.column_by_name("prev_lemma").unwrap().values[row], None);
        }
        // "cat" follows "the": a known bigram.
        assert!(m.column_by_name("am_pmi").unwrap().values[1].is_some());
    }

    #[test]
    fn category_ids_are_first_seen() {
        let set = toy_set();
        let m = build_matrix(
            &set,
            &[],
            None,
            &FeatureGroupSpec::only([FeatureGroup::PostagLemma]),
        )
        .unwrap();
        let pos = m.column_by_name("pos").unwrap();
        let dict = pos.dict.as_ref().unwrap();
        assert_eq!(dict.names(), &["NN".to_string(), "VBD".to_string()]);
        assert_eq!(pos.values[0], None);
        assert_eq!(pos.values[1], Some(1.0));
        assert_eq!(pos.values[2], Some(2.0));
        assert_eq!(dict.id_of("JJ"), CategoryDict::UNKNOWN);
    }

    #[test]
    fn drop_groups_identity_and_total() {
        let set = toy_set();
        let bigrams = toy_bigrams();
        let lexicons = vec![
            lexicon("freq", 1, FeatureGroup::Frequency),
            lexicon("norms", 1, FeatureGroup::Norms),
            lexicon("elp_c", 1, FeatureGroup::ElpCharacteristics),
            lexicon("elp_b", 1, FeatureGroup::ElpBehavioral),
        ];
        let m = build_matrix(&set, &lexicons, Some(&bigrams), &FeatureGroupSpec::all()).unwrap();

        let same = drop_groups(&m, &BTreeSet::new()).unwrap();
        assert_eq!(same, m);

        let all: BTreeSet<_> = FeatureGroup::ALL.into_iter().collect();
        let empty = drop_groups(&m, &all).unwrap();
        assert_eq!(empty.n_cols(), 0);
        assert_eq!(empty.n_rows(), m.n_rows());

        let err = drop_groups(&empty, &[FeatureGroup::Length].into_iter().collect());
        assert!(err.is_err());
    }

    #[test]
    fn reindex_maps_unseen_to_unknown() {
        let set = toy_set();
        let spec = FeatureGroupSpec::only([FeatureGroup::PostagLemma]);
        let m = build_matrix(&set, &[], None, &spec).unwrap();

        let mut other_set = toy_set();
        other_set.sentences[0][0].pos = Some("DT".into());
        let mut other = build_matrix(&other_set, &[], None, &spec).unwrap();
        other.reindex_categories(&m.schema()).unwrap();

        let pos = other.column_by_name("pos").unwrap();
        // "DT" was never seen by the reference schema.
        assert_eq!(pos.values[0], Some(f64::from(CategoryDict::UNKNOWN)));
        // "NN" keeps the reference id.
        assert_eq!(pos.values[1], Some(1.0));
    }
}
