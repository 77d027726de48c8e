//! Quantile binning of feature columns into histogram-ready integer bins.

use crate::error::{Error, Result};
use crate::features::{ColumnKind, FeatureMatrix};

/// Per-row marker for a missing cell.
pub const MISSING_BIN: u32 = u32::MAX;

#[derive(Debug, Clone, PartialEq)]
pub enum BinKind {
    /// Ascending upper bounds, one per bin; a value belongs to the first
    /// bin whose bound is >= the value. The last bound is +inf.
    Numeric { upper_bounds: Vec<f64> },
    /// Category-id bins: the bin of a cell is its dictionary id.
    Categorical { n_bins: u32 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinnedColumn {
    pub kind: BinKind,
    /// Bin index per row; `MISSING_BIN` marks missing cells.
    pub bins: Vec<u32>,
}

impl BinnedColumn {
    pub fn n_bins(&self) -> u32 {
        match &self.kind {
            BinKind::Numeric { upper_bounds } => upper_bounds.len() as u32,
            BinKind::Categorical { n_bins } => *n_bins,
        }
    }

    pub fn is_categorical(&self) -> bool {
        matches!(self.kind, BinKind::Categorical { .. })
    }

    /// Raw threshold a numeric split at `bin` materializes to.
    pub fn threshold_of(&self, bin: u32) -> f64 {
        match &self.kind {
            BinKind::Numeric { upper_bounds } => upper_bounds[bin as usize],
            BinKind::Categorical { .. } => unreachable!("categorical split has no threshold"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinnedDataset {
    pub columns: Vec<BinnedColumn>,
    pub n_rows: usize,
}

/// Bin every column of the matrix. Numeric bins sit at quantile
/// boundaries of the non-missing values; adjacent bins holding fewer
/// than `min_data_in_bin` rows are merged rightward. Categorical columns
/// are binned by dictionary id.
pub fn bin_features(
    m: &FeatureMatrix,
    max_bin: usize,
    min_data_in_bin: usize,
) -> Result<BinnedDataset> {
    if max_bin < 2 {
        return Err(Error::Config(format!("max_bin = {max_bin}, must be >= 2")));
    }
    if min_data_in_bin < 1 {
        return Err(Error::Config(format!(
            "min_data_in_bin = {min_data_in_bin}, must be >= 1"
        )));
    }
    let columns = m
        .columns()
        .iter()
        .map(|col| match col.kind {
            ColumnKind::Numeric => bin_numeric(&col.values, max_bin, min_data_in_bin),
            ColumnKind::Categorical => {
                let n_bins = col.dict.as_ref().map(|d| d.len() as u32 + 1).unwrap_or(1);
                let bins = col
                    .values
                    .iter()
                    .map(|v| v.map(|v| v as u32).unwrap_or(MISSING_BIN))
                    .collect();
                BinnedColumn {
                    kind: BinKind::Categorical { n_bins },
                    bins,
                }
            }
        })
        .collect();
    Ok(BinnedDataset {
        columns,
        n_rows: m.n_rows(),
    })
}

fn bin_numeric(values: &[Option<f64>], max_bin: usize, min_data_in_bin: usize) -> BinnedColumn {
    let mut present: Vec<f64> = values.iter().filter_map(|v| *v).collect();
    present.sort_by(f64::total_cmp);
    let total = present.len();
    if total == 0 {
        return BinnedColumn {
            kind: BinKind::Numeric {
                upper_bounds: Vec::new(),
            },
            bins: vec![MISSING_BIN; values.len()],
        };
    }

    // Distinct values with multiplicities.
    let mut distinct: Vec<(f64, usize)> = Vec::new();
    for &v in &present {
        match distinct.last_mut() {
            Some((last, count)) if *last == v => *count += 1,
            _ => distinct.push((v, 1)),
        }
    }

    // Group distinct values into at most max_bin quantile bins: close a
    // group once its cumulative count reaches the next equal-mass target.
    let mut group_ends: Vec<usize> = Vec::new();
    if distinct.len() <= max_bin {
        group_ends.extend(0..distinct.len());
    } else {
        let mut cum = 0usize;
        let mut next_group = 1usize;
        for (i, &(_, count)) in distinct.iter().enumerate() {
            cum += count;
            let target = (total * next_group).div_ceil(max_bin);
            if cum >= target || i + 1 == distinct.len() {
                group_ends.push(i);
                while (total * next_group).div_ceil(max_bin) <= cum {
                    next_group += 1;
                }
            }
        }
    }

    // Merge undersized bins rightward; a trailing remainder folds into
    // the previous bin.
    let group_count = |start: usize, end: usize| -> usize {
        distinct[start..=end].iter().map(|&(_, c)| c).sum()
    };
    let mut merged_ends: Vec<usize> = Vec::new();
    let mut start = 0usize;
    let mut acc = 0usize;
    for &end in &group_ends {
        acc += group_count(start, end);
        start = end + 1;
        if acc >= min_data_in_bin {
            merged_ends.push(end);
            acc = 0;
        }
    }
    if acc > 0 {
        match merged_ends.last_mut() {
            Some(last) => *last = *group_ends.last().unwrap(),
            None => merged_ends.push(*group_ends.last().unwrap()),
        }
    }

    // Upper bound of a bin is the midpoint between its last distinct
    // value and the next one; the final bin is unbounded.
    let upper_bounds: Vec<f64> = merged_ends
        .iter()
        .map(|&end| {
            if end + 1 == distinct.len() {
                f64::INFINITY
            } else {
                (distinct[end].0 + distinct[end + 1].0) / 2.0
            }
        })
        .collect();

    let bins = values
        .iter()
        .map(|v| match v {
            None => MISSING_BIN,
            Some(v) if v.is_nan() => MISSING_BIN,
            Some(v) => upper_bounds.partition_point(|ub| ub < v) as u32,
        })
        .collect();
    BinnedColumn {
        kind: BinKind::Numeric { upper_bounds },
        bins,
    }
}
