//! Task data, token annotations and external lexical resources.
//!
//! Everything loaded here is immutable after construction and safe to
//! share across threads.

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use unicode_properties::{GeneralCategoryGroup, UnicodeGeneralCategory};

use crate::error::{Error, Result};

/// The five dependent variables, in the order used by all reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Dv {
    #[serde(rename = "nFix")]
    NFix,
    #[serde(rename = "FFD")]
    Ffd,
    #[serde(rename = "GPT")]
    Gpt,
    #[serde(rename = "TRT")]
    Trt,
    #[serde(rename = "fixProp")]
    FixProp,
}

impl Dv {
    pub const ALL: [Dv; 5] = [Dv::NFix, Dv::Ffd, Dv::Gpt, Dv::Trt, Dv::FixProp];

    pub fn name(self) -> &'static str {
        match self {
            Dv::NFix => "nFix",
            Dv::Ffd => "FFD",
            Dv::Gpt => "GPT",
            Dv::Trt => "TRT",
            Dv::FixProp => "fixProp",
        }
    }

    pub fn parse(s: &str) -> Option<Dv> {
        Dv::ALL.into_iter().find(|d| d.name() == s)
    }
}

impl fmt::Display for Dv {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Word-level gaze measures, averaged over readers and scaled to [0, 100].
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Targets {
    pub n_fix: f64,
    pub ffd: f64,
    pub gpt: f64,
    pub trt: f64,
    pub fix_prop: f64,
}

impl Targets {
    pub fn get(&self, dv: Dv) -> f64 {
        match dv {
            Dv::NFix => self.n_fix,
            Dv::Ffd => self.ffd,
            Dv::Gpt => self.gpt,
            Dv::Trt => self.trt,
            Dv::FixProp => self.fix_prop,
        }
    }
}

/// One word of a sentence, with its lookup key and optional annotations.
#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub sentence_id: u32,
    /// 1-based position in the sentence.
    pub rank: u32,
    pub surface: String,
    /// Surface with leading/trailing punctuation and symbols stripped;
    /// the key used for every resource lookup.
    pub normalized: String,
    pub lemma: Option<String>,
    pub pos: Option<String>,
    pub targets: Option<Targets>,
}

/// Ordered sentences of ordered tokens.
#[derive(Debug, Clone, PartialEq)]
pub struct SentenceSet {
    pub sentences: Vec<Vec<Token>>,
    pub has_targets: bool,
}

impl SentenceSet {
    pub fn n_sentences(&self) -> usize {
        self.sentences.len()
    }

    pub fn n_tokens(&self) -> usize {
        self.sentences.iter().map(|s| s.len()).sum()
    }

    pub fn tokens(&self) -> impl Iterator<Item = &Token> {
        self.sentences.iter().flatten()
    }

    pub fn sentence_ids(&self) -> Vec<u32> {
        self.sentences
            .iter()
            .map(|s| s[0].sentence_id)
            .collect()
    }

    /// Target vector for one DV, in token order. None when the set
    /// carries no targets.
    pub fn targets_for(&self, dv: Dv) -> Option<Vec<f64>> {
        if !self.has_targets {
            return None;
        }
        Some(
            self.tokens()
                .map(|t| t.targets.expect("has_targets set").get(dv))
                .collect(),
        )
    }
}

/// Strip leading and trailing punctuation/symbol characters (Unicode
/// general categories P* and S*). Interior characters are kept and case
/// is preserved; an all-punctuation input yields the empty string.
pub fn normalize_token(surface: &str) -> String {
    fn is_punct_or_symbol(c: char) -> bool {
        matches!(
            c.general_category_group(),
            GeneralCategoryGroup::Punctuation | GeneralCategoryGroup::Symbol
        )
    }
    surface
        .trim_start_matches(is_punct_or_symbol)
        .trim_end_matches(is_punct_or_symbol)
        .to_string()
}

fn case_fold(s: &str) -> String {
    s.to_lowercase()
}

const TARGET_COLUMNS: [&str; 5] = ["nFix", "FFD", "GPT", "TRT", "fixProp"];

/// Load task data from a comma-separated file with header
/// `sentence_id,word_id,word[,nFix,FFD,GPT,TRT,fixProp]`.
///
/// Tokens are grouped by `sentence_id` in file order; `word_id` must run
/// 1, 2, 3, ... within each sentence. Targets, when expected, must lie in
/// [0, 100].
pub fn load_task_csv(path: &Path, expect_targets: bool) -> Result<SentenceSet> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(BufReader::new(file));

    let headers = reader
        .headers()
        .map_err(|e| Error::parse(path, 1, e.to_string()))?
        .clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let sid_col = col("sentence_id")
        .ok_or_else(|| Error::Schema(format!("{}: missing column sentence_id", path.display())))?;
    let wid_col = col("word_id")
        .ok_or_else(|| Error::Schema(format!("{}: missing column word_id", path.display())))?;
    let word_col = col("word")
        .ok_or_else(|| Error::Schema(format!("{}: missing column word", path.display())))?;
    let target_cols: Option<Vec<usize>> = if expect_targets {
        let mut cols = Vec::with_capacity(5);
        for name in TARGET_COLUMNS {
            cols.push(col(name).ok_or_else(|| {
                Error::Schema(format!("{}: missing column {name}", path.display()))
            })?);
        }
        Some(cols)
    } else {
        None
    };

    let mut sentences: Vec<Vec<Token>> = Vec::new();
    let mut seen_ids: HashMap<u32, usize> = HashMap::new();

    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e
                .position()
                .map(|p| p.line() as usize)
                .unwrap_or_default();
            Error::parse(path, line, e.to_string())
        })?;
        let line = record
            .position()
            .map(|p| p.line() as usize)
            .unwrap_or_default();
        let field = |idx: usize| -> Result<&str> {
            record
                .get(idx)
                .ok_or_else(|| Error::parse(path, line, format!("missing field {idx}")))
        };

        let sentence_id: u32 = field(sid_col)?
            .trim()
            .parse()
            .map_err(|_| Error::parse(path, line, format!("bad sentence_id {:?}", field(sid_col).unwrap())))?;
        let word_id: u32 = field(wid_col)?
            .trim()
            .parse()
            .map_err(|_| Error::parse(path, line, format!("bad word_id {:?}", field(wid_col).unwrap())))?;
        let surface = field(word_col)?.to_string();

        let targets = match &target_cols {
            Some(cols) => {
                let mut vals = [0.0f64; 5];
                for (slot, (&c, name)) in vals.iter_mut().zip(cols.iter().zip(TARGET_COLUMNS)) {
                    let raw = field(c)?;
                    let v: f64 = raw.trim().parse().map_err(|_| {
                        Error::parse(path, line, format!("bad {name} value {raw:?}"))
                    })?;
                    if !(0.0..=100.0).contains(&v) {
                        return Err(Error::Validation(format!(
                            "{}:{line}: {name} = {v} outside [0, 100]",
                            path.display()
                        )));
                    }
                    *slot = v;
                }
                Some(Targets {
                    n_fix: vals[0],
                    ffd: vals[1],
                    gpt: vals[2],
                    trt: vals[3],
                    fix_prop: vals[4],
                })
            }
            None => None,
        };

        let token = Token {
            sentence_id,
            rank: word_id,
            normalized: normalize_token(&surface),
            surface,
            lemma: None,
            pos: None,
            targets,
        };

        let is_continuation = sentences
            .last()
            .is_some_and(|s: &Vec<Token>| s[0].sentence_id == sentence_id);
        if is_continuation {
            let sentence = sentences.last_mut().unwrap();
            let expected = sentence.last().unwrap().rank + 1;
            if word_id != expected {
                return Err(Error::Structure(format!(
                    "{}:{line}: sentence {sentence_id}: word_id {word_id}, expected {expected}",
                    path.display()
                )));
            }
            sentence.push(token);
        } else {
            if seen_ids.contains_key(&sentence_id) {
                return Err(Error::Structure(format!(
                    "{}:{line}: sentence_id {sentence_id} appears in two separate blocks",
                    path.display()
                )));
            }
            if word_id != 1 {
                return Err(Error::Structure(format!(
                    "{}:{line}: sentence {sentence_id} starts at word_id {word_id}, expected 1",
                    path.display()
                )));
            }
            seen_ids.insert(sentence_id, sentences.len());
            sentences.push(vec![token]);
        }
    }

    Ok(SentenceSet {
        sentences,
        has_targets: expect_targets,
    })
}

/// Inverse of [`load_task_csv`]: write the set back out in the same
/// column layout.
pub fn write_task_csv(set: &SentenceSet, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    let mut header = vec!["sentence_id", "word_id", "word"];
    if set.has_targets {
        header.extend(TARGET_COLUMNS);
    }
    w.write_record(&header).map_err(|e| Error::parse(path, 0, e.to_string()))?;
    for token in set.tokens() {
        let mut rec = vec![
            token.sentence_id.to_string(),
            token.rank.to_string(),
            token.surface.clone(),
        ];
        if set.has_targets {
            let t = token.targets.expect("has_targets set");
            for dv in Dv::ALL {
                rec.push(t.get(dv).to_string());
            }
        }
        w.write_record(&rec).map_err(|e| Error::parse(path, 0, e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Attach lemma/POS annotations from a headerless TSV with rows
/// `sentence_id<TAB>word_id<TAB>lemma<TAB>pos`, joined on
/// (sentence_id, word_id).
pub fn attach_annotations(set: &SentenceSet, path: &Path) -> Result<SentenceSet> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = set.clone();
    let index: HashMap<u32, usize> = out
        .sentences
        .iter()
        .enumerate()
        .map(|(i, s)| (s[0].sentence_id, i))
        .collect();

    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 {
            return Err(Error::parse(
                path,
                lineno + 1,
                format!("expected 4 tab-separated fields, found {}", fields.len()),
            ));
        }
        let sid: u32 = fields[0].trim().parse().map_err(|_| {
            Error::parse(path, lineno + 1, format!("bad sentence_id {:?}", fields[0]))
        })?;
        let wid: u32 = fields[1].trim().parse().map_err(|_| {
            Error::parse(path, lineno + 1, format!("bad word_id {:?}", fields[1]))
        })?;
        let sentence_idx = *index.get(&sid).ok_or_else(|| {
            Error::Alignment(format!(
                "{}:{}: annotation for unknown sentence_id {sid}",
                path.display(),
                lineno + 1
            ))
        })?;
        let sentence = &mut out.sentences[sentence_idx];
        if wid == 0 || wid as usize > sentence.len() {
            return Err(Error::Alignment(format!(
                "{}:{}: annotation for unknown word_id {wid} in sentence {sid}",
                path.display(),
                lineno + 1
            )));
        }
        let token = &mut sentence[wid as usize - 1];
        if !fields[2].is_empty() {
            token.lemma = Some(fields[2].to_string());
        }
        if !fields[3].is_empty() {
            token.pos = Some(fields[3].to_string());
        }
    }
    Ok(out)
}

/// A named lookup table mapping case-folded keys to numeric records.
#[derive(Debug, Clone, PartialEq)]
pub struct Lexicon {
    pub name: String,
    pub columns: Vec<String>,
    entries: HashMap<String, Vec<Option<f64>>>,
}

impl Lexicon {
    pub fn new(name: impl Into<String>, columns: Vec<String>) -> Self {
        Lexicon {
            name: name.into(),
            columns,
            entries: HashMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Insert with the duplicate policy: when two rows share a
    /// case-folded key, the one with the larger first numeric value wins
    /// (frequency lists put frequent forms first).
    pub fn insert(&mut self, key: &str, values: Vec<Option<f64>>) {
        assert_eq!(values.len(), self.columns.len(), "column arity");
        let folded = case_fold(key);
        match self.entries.get(&folded) {
            Some(existing) => {
                let old = existing.first().copied().flatten().unwrap_or(f64::NEG_INFINITY);
                let new = values.first().copied().flatten().unwrap_or(f64::NEG_INFINITY);
                if new > old {
                    self.entries.insert(folded, values);
                }
            }
            None => {
                self.entries.insert(folded, values);
            }
        }
    }

    pub fn get(&self, key: &str) -> Option<&[Option<f64>]> {
        self.entries.get(&case_fold(key)).map(|v| v.as_slice())
    }

    /// Resource values for a token: by spelling form first, by lemma if
    /// the spelling is not listed, all-missing otherwise.
    pub fn lookup(&self, token: &Token) -> Vec<Option<f64>> {
        self.lookup_entry(token)
            .map(<[Option<f64>]>::to_vec)
            .unwrap_or_else(|| vec![None; self.columns.len()])
    }

    pub(crate) fn lookup_entry(&self, token: &Token) -> Option<&[Option<f64>]> {
        if !token.normalized.is_empty() {
            if let Some(values) = self.get(&token.normalized) {
                return Some(values);
            }
        }
        token.lemma.as_deref().and_then(|lemma| self.get(lemma))
    }
}

/// Load a lexicon from a TSV whose header row is `key<TAB>v1...<TAB>vk`.
/// The declared `columns` must match the header's value-column count;
/// empty cells become missing values.
pub fn load_lexicon(path: &Path, name: &str, columns: &[String]) -> Result<Lexicon> {
    let lex = load_lexicon_impl(path, name, Some(columns))?;
    Ok(lex)
}

/// Like [`load_lexicon`] but the value-column names are taken from the
/// file header.
pub fn load_lexicon_auto(path: &Path, name: &str) -> Result<Lexicon> {
    load_lexicon_impl(path, name, None)
}

fn load_lexicon_impl(path: &Path, name: &str, declared: Option<&[String]>) -> Result<Lexicon> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines().enumerate();

    let header = match lines.next() {
        Some((_, line)) => line.map_err(|e| Error::io(path, e))?,
        None => return Err(Error::Schema(format!("{}: empty lexicon file", path.display()))),
    };
    let header_fields: Vec<&str> = header.split('\t').collect();
    if header_fields.len() < 2 {
        return Err(Error::Schema(format!(
            "{}: header must name a key column and at least one value column",
            path.display()
        )));
    }
    let columns: Vec<String> = match declared {
        Some(cols) => {
            if cols.len() != header_fields.len() - 1 {
                return Err(Error::Schema(format!(
                    "{}: {} value columns declared but header has {}",
                    path.display(),
                    cols.len(),
                    header_fields.len() - 1
                )));
            }
            cols.to_vec()
        }
        None => header_fields[1..].iter().map(|s| s.to_string()).collect(),
    };

    let mut lexicon = Lexicon::new(name, columns);
    for (lineno, line) in lines {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != lexicon.columns.len() + 1 {
            return Err(Error::Schema(format!(
                "{}:{}: expected {} fields, found {}",
                path.display(),
                lineno + 1,
                lexicon.columns.len() + 1,
                fields.len()
            )));
        }
        let mut values = Vec::with_capacity(lexicon.columns.len());
        for cell in &fields[1..] {
            if cell.is_empty() {
                values.push(None);
            } else {
                let v: f64 = cell.trim().parse().map_err(|_| {
                    Error::parse(path, lineno + 1, format!("non-numeric cell {cell:?}"))
                })?;
                values.push(Some(v));
            }
        }
        lexicon.insert(fields[0], values);
    }
    Ok(lexicon)
}

/// Unigram and bigram counts from a reference corpus.
///
/// Keys are case-folded; counts of case-variant spellings are summed.
#[derive(Debug, Clone, PartialEq)]
pub struct BigramTable {
    bigram_counts: HashMap<(String, String), u64>,
    unigram_counts: HashMap<String, u64>,
    pub corpus_size: u64,
}

impl BigramTable {
    /// Count a tokenized corpus: unigrams per token, bigrams per adjacent
    /// pair within each sequence (pairs never cross sequence boundaries).
    pub fn from_token_sequences<S: AsRef<str>>(sequences: &[Vec<S>]) -> BigramTable {
        let mut unigram_counts: HashMap<String, u64> = HashMap::new();
        let mut bigram_counts: HashMap<(String, String), u64> = HashMap::new();
        let mut corpus_size = 0u64;
        for seq in sequences {
            for window in seq.windows(2) {
                let w1 = case_fold(window[0].as_ref());
                let w2 = case_fold(window[1].as_ref());
                *bigram_counts.entry((w1, w2)).or_insert(0) += 1;
            }
            for w in seq {
                *unigram_counts.entry(case_fold(w.as_ref())).or_insert(0) += 1;
                corpus_size += 1;
            }
        }
        BigramTable {
            bigram_counts,
            unigram_counts,
            corpus_size,
        }
    }

    pub fn unigram(&self, w: &str) -> u64 {
        self.unigram_counts.get(&case_fold(w)).copied().unwrap_or(0)
    }

    pub fn bigram(&self, w1: &str, w2: &str) -> u64 {
        self.bigram_counts
            .get(&(case_fold(w1), case_fold(w2)))
            .copied()
            .unwrap_or(0)
    }

    pub fn n_unigrams(&self) -> usize {
        self.unigram_counts.len()
    }

    pub fn n_bigrams(&self) -> usize {
        self.bigram_counts.len()
    }

    pub fn unigram_total(&self) -> u64 {
        self.unigram_counts.values().sum()
    }

    fn validate(&self) -> Result<()> {
        for (w, &c) in &self.unigram_counts {
            if c > self.corpus_size {
                return Err(Error::Consistency(format!(
                    "unigram count of {w:?} ({c}) exceeds corpus size {}",
                    self.corpus_size
                )));
            }
        }
        for ((w1, w2), &c) in &self.bigram_counts {
            for w in [w1, w2] {
                let u = self.unigram_counts.get(w).copied().unwrap_or(0);
                if c > u {
                    return Err(Error::Consistency(format!(
                        "bigram ({w1:?}, {w2:?}) count {c} exceeds unigram count {u} of {w:?}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Load a bigram table. The file starts with `#N<TAB><total>`, followed
/// by `1<TAB>word<TAB>count` unigram lines and `2<TAB>w1<TAB>w2<TAB>count`
/// bigram lines in any order after the size line.
pub fn load_bigram_counts(path: &Path) -> Result<BigramTable> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut corpus_size: Option<u64> = None;
    let mut unigram_counts: HashMap<String, u64> = HashMap::new();
    let mut bigram_counts: HashMap<(String, String), u64> = HashMap::new();

    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let parse_count = |raw: &str| -> Result<u64> {
            raw.trim()
                .parse()
                .map_err(|_| Error::parse(path, lineno + 1, format!("bad count {raw:?}")))
        };
        match fields[0] {
            "#N" => {
                if fields.len() != 2 {
                    return Err(Error::parse(path, lineno + 1, "expected #N<TAB><int>"));
                }
                if corpus_size.is_some() {
                    return Err(Error::parse(path, lineno + 1, "duplicate #N line"));
                }
                corpus_size = Some(parse_count(fields[1])?);
            }
            "1" => {
                if fields.len() != 3 {
                    return Err(Error::parse(path, lineno + 1, "expected 1<TAB>word<TAB>count"));
                }
                *unigram_counts.entry(case_fold(fields[1])).or_insert(0) +=
                    parse_count(fields[2])?;
            }
            "2" => {
                if fields.len() != 4 {
                    return Err(Error::parse(
                        path,
                        lineno + 1,
                        "expected 2<TAB>w1<TAB>w2<TAB>count",
                    ));
                }
                *bigram_counts
                    .entry((case_fold(fields[1]), case_fold(fields[2])))
                    .or_insert(0) += parse_count(fields[3])?;
            }
            tag => {
                return Err(Error::parse(path, lineno + 1, format!("unknown line tag {tag:?}")));
            }
        }
    }

    let corpus_size = corpus_size
        .ok_or_else(|| Error::Schema(format!("{}: missing #N line", path.display())))?;
    if corpus_size == 0 {
        return Err(Error::Schema(format!("{}: corpus size must be positive", path.display())));
    }
    let table = BigramTable {
        bigram_counts,
        unigram_counts,
        corpus_size,
    };
    table.validate()?;
    Ok(table)
}

/// Write a bigram table in the format read by [`load_bigram_counts`],
/// with entries sorted for reproducible output.
pub fn write_bigram_counts(table: &BigramTable, path: &Path) -> Result<()> {
    let mut file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = String::new();
    out.push_str(&format!("#N\t{}\n", table.corpus_size));
    let mut unigrams: Vec<_> = table.unigram_counts.iter().collect();
    unigrams.sort();
    for (w, c) in unigrams {
        out.push_str(&format!("1\t{w}\t{c}\n"));
    }
    let mut bigrams: Vec<_> = table.bigram_counts.iter().collect();
    bigrams.sort();
    for ((w1, w2), c) in bigrams {
        out.push_str(&format!("2\t{w1}\t{w2}\t{c}\n"));
    }
    file.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))?;
    Ok(())
}
