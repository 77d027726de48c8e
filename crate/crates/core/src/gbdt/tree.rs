//! Histogram split search and leaf-wise (best-first) tree growth.

use std::collections::{BinaryHeap, HashMap};

use rayon::prelude::*;

use crate::features::FeatureMatrix;
use crate::gbdt::binning::{BinKind, BinnedColumn, BinnedDataset, MISSING_BIN};

/// Gradient/hessian/count sums for one bin.
#[derive(Debug, Clone, Copy, Default)]
pub struct BinStats {
    pub grad: f64,
    pub hess: f64,
    pub count: usize,
}

impl BinStats {
    fn add(&mut self, g: f64, h: f64) {
        self.grad += g;
        self.hess += h;
        self.count += 1;
    }
}

/// Histogram of one column over the rows of a node.
#[derive(Debug, Clone)]
pub struct Histogram {
    pub bins: Vec<BinStats>,
    pub missing: BinStats,
}

/// Histograms for the given columns over one node's rows.
pub fn build_histograms(
    binned: &BinnedDataset,
    rows: &[u32],
    grad: &[f64],
    hess: &[f64],
    columns: &[usize],
) -> Vec<(usize, Histogram)> {
    columns
        .iter()
        .map(|&c| (c, build_histogram(&binned.columns[c], rows, grad, hess)))
        .collect()
}

fn build_histogram(column: &BinnedColumn, rows: &[u32], grad: &[f64], hess: &[f64]) -> Histogram {
    let mut hist = Histogram {
        bins: vec![BinStats::default(); column.n_bins() as usize],
        missing: BinStats::default(),
    };
    for &r in rows {
        let r = r as usize;
        match column.bins[r] {
            MISSING_BIN => hist.missing.add(grad[r], hess[r]),
            b => hist.bins[b as usize].add(grad[r], hess[r]),
        }
    }
    hist
}

/// The winning split of a node.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitInfo {
    pub column: usize,
    /// Numeric: the last bin routed left. Categorical: the category bins
    /// routed left, sorted.
    pub threshold_bin: Option<u32>,
    pub left_cats: Option<Vec<u32>>,
    pub default_left: bool,
    pub gain: f64,
}

fn leaf_score(g: f64, h: f64) -> f64 {
    g * g / h
}

struct SideStats {
    grad: f64,
    hess: f64,
    count: usize,
}

/// Gain of a (left, right) partition against the parent score, with the
/// missing-bin stats attached to one side. None when a child would fall
/// under `min_data_in_leaf`.
#[allow(clippy::too_many_arguments)]
fn split_gain(
    left: &SideStats,
    right: &SideStats,
    missing: &BinStats,
    missing_left: bool,
    parent_score: f64,
    min_data_in_leaf: usize,
) -> Option<f64> {
    let (mut gl, mut hl, mut nl) = (left.grad, left.hess, left.count);
    let (mut gr, mut hr, mut nr) = (right.grad, right.hess, right.count);
    if missing_left {
        gl += missing.grad;
        hl += missing.hess;
        nl += missing.count;
    } else {
        gr += missing.grad;
        hr += missing.hess;
        nr += missing.count;
    }
    if nl < min_data_in_leaf || nr < min_data_in_leaf {
        return None;
    }
    Some(leaf_score(gl, hl) + leaf_score(gr, hr) - parent_score)
}

/// Resolve the default direction for a candidate partition.
///
/// With missing rows present, both assignments were scored and the
/// better one wins (ties go left). With no missing rows the choice is
/// gain-neutral and the side with more training rows becomes the
/// default, ties again going left.
fn pick_missing_side(
    left: &SideStats,
    right: &SideStats,
    missing: &BinStats,
    parent_score: f64,
    min_data_in_leaf: usize,
) -> Option<(f64, bool)> {
    if missing.count == 0 {
        let gain = split_gain(left, right, missing, true, parent_score, min_data_in_leaf)?;
        return Some((gain, left.count >= right.count));
    }
    let gain_left = split_gain(left, right, missing, true, parent_score, min_data_in_leaf);
    let gain_right = split_gain(left, right, missing, false, parent_score, min_data_in_leaf);
    match (gain_left, gain_right) {
        (Some(l), Some(r)) if l >= r => Some((l, true)),
        (Some(_), Some(r)) => Some((r, false)),
        (Some(l), None) => Some((l, true)),
        (None, Some(r)) => Some((r, false)),
        (None, None) => None,
    }
}

/// Best positive-gain split over the active columns, or None.
///
/// Ties break toward the lowest column index, then the lowest threshold
/// bin (shortest category prefix for categorical columns).
pub fn find_best_split(
    histograms: &[(usize, Histogram)],
    columns: &[BinnedColumn],
    parent: &BinStats,
    min_data_in_leaf: usize,
) -> Option<SplitInfo> {
    let parent_score = leaf_score(parent.grad, parent.hess);
    let mut best: Option<SplitInfo> = None;
    let mut consider = |gain: f64, info: SplitInfo| {
        if gain > 0.0 && best.as_ref().is_none_or(|b| gain > b.gain) {
            best = Some(info);
        }
    };

    for (col_idx, hist) in histograms {
        let column = &columns[*col_idx];
        match &column.kind {
            BinKind::Numeric { .. } => {
                let mut left = SideStats {
                    grad: 0.0,
                    hess: 0.0,
                    count: 0,
                };
                let present: BinStats = {
                    let mut acc = BinStats::default();
                    for b in &hist.bins {
                        acc.grad += b.grad;
                        acc.hess += b.hess;
                        acc.count += b.count;
                    }
                    acc
                };
                let n_bins = hist.bins.len();
                for t in 0..n_bins.saturating_sub(1) {
                    let b = &hist.bins[t];
                    left.grad += b.grad;
                    left.hess += b.hess;
                    left.count += b.count;
                    let right = SideStats {
                        grad: present.grad - left.grad,
                        hess: present.hess - left.hess,
                        count: present.count - left.count,
                    };
                    if let Some((gain, default_left)) = pick_missing_side(
                        &left,
                        &right,
                        &hist.missing,
                        parent_score,
                        min_data_in_leaf,
                    ) {
                        consider(
                            gain,
                            SplitInfo {
                                column: *col_idx,
                                threshold_bin: Some(t as u32),
                                left_cats: None,
                                default_left,
                                gain,
                            },
                        );
                    }
                }
            }
            BinKind::Categorical { .. } => {
                // Order occupied category bins by G/H, then scan prefixes
                // of that ordering.
                let mut cats: Vec<(u32, BinStats)> = hist
                    .bins
                    .iter()
                    .enumerate()
                    .filter(|(_, b)| b.count > 0)
                    .map(|(i, b)| (i as u32, *b))
                    .collect();
                if cats.len() < 2 {
                    continue;
                }
                cats.sort_by(|a, b| {
                    let ra = a.1.grad / a.1.hess;
                    let rb = b.1.grad / b.1.hess;
                    ra.total_cmp(&rb).then(a.0.cmp(&b.0))
                });
                let present: BinStats = {
                    let mut acc = BinStats::default();
                    for (_, b) in &cats {
                        acc.grad += b.grad;
                        acc.hess += b.hess;
                        acc.count += b.count;
                    }
                    acc
                };
                let mut left = SideStats {
                    grad: 0.0,
                    hess: 0.0,
                    count: 0,
                };
                for j in 0..cats.len() - 1 {
                    let (_, b) = &cats[j];
                    left.grad += b.grad;
                    left.hess += b.hess;
                    left.count += b.count;
                    let right = SideStats {
                        grad: present.grad - left.grad,
                        hess: present.hess - left.hess,
                        count: present.count - left.count,
                    };
                    if let Some((gain, default_left)) = pick_missing_side(
                        &left,
                        &right,
                        &hist.missing,
                        parent_score,
                        min_data_in_leaf,
                    ) {
                        let mut left_cats: Vec<u32> =
                            cats[..=j].iter().map(|(id, _)| *id).collect();
                        left_cats.sort_unstable();
                        consider(
                            gain,
                            SplitInfo {
                                column: *col_idx,
                                threshold_bin: None,
                                left_cats: Some(left_cats),
                                default_left,
                                gain,
                            },
                        );
                    }
                }
            }
        }
    }
    best
}

/// The routing test of an internal node, on raw feature values.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(untagged)]
pub enum SplitTest {
    Numeric { threshold: f64 },
    Categorical { left_cats: Vec<u32> },
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TreeNode {
    Split {
        column: u32,
        test: SplitTest,
        default_left: bool,
        left: u32,
        right: u32,
        gain: f64,
    },
    Leaf {
        value: f64,
    },
}

/// One regression tree. Node 0 is the root.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
}

impl Tree {
    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, TreeNode::Leaf { .. }))
            .count()
    }

    pub fn depth(&self) -> u32 {
        fn walk(nodes: &[TreeNode], idx: u32) -> u32 {
            match &nodes[idx as usize] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => {
                    1 + walk(nodes, *left).max(walk(nodes, *right))
                }
            }
        }
        walk(&self.nodes, 0)
    }

    /// Route one matrix row to its leaf value. Missing cells follow the
    /// node's default direction; category ids outside a split's left set
    /// (including the unknown id) go right.
    pub fn predict_row(&self, m: &FeatureMatrix, row: usize) -> f64 {
        let mut idx = 0u32;
        loop {
            match &self.nodes[idx as usize] {
                TreeNode::Leaf { value } => return *value,
                TreeNode::Split {
                    column,
                    test,
                    default_left,
                    left,
                    right,
                    ..
                } => {
                    let go_left = match m.value(row, *column as usize) {
                        None => *default_left,
                        Some(v) if v.is_nan() => *default_left,
                        Some(v) => match test {
                            SplitTest::Numeric { threshold } => v <= *threshold,
                            SplitTest::Categorical { left_cats } => {
                                left_cats.binary_search(&(v as u32)).is_ok()
                            }
                        },
                    };
                    idx = if go_left { *left } else { *right };
                }
            }
        }
    }

    pub fn scale_leaves(&mut self, factor: f64) {
        for node in &mut self.nodes {
            if let TreeNode::Leaf { value } = node {
                *value *= factor;
            }
        }
    }
}

/// A grown tree plus the rows each leaf was fit on, for leaf refinement.
pub struct GrownTree {
    pub tree: Tree,
    pub leaf_rows: Vec<(usize, Vec<u32>)>,
}

struct LeafState {
    rows: Vec<u32>,
    depth: u32,
    stats: BinStats,
    split: Option<SplitInfo>,
}

struct HeapEntry {
    gain: f64,
    node: usize,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == std::cmp::Ordering::Equal
    }
}
impl Eq for HeapEntry {}
impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        // Highest gain first; earliest-created node on ties.
        self.gain
            .total_cmp(&other.gain)
            .then(other.node.cmp(&self.node))
    }
}

const PARALLEL_HIST_ROWS: usize = 4096;

pub struct GrowParams {
    pub num_leaves: usize,
    pub max_depth: Option<u32>,
    pub min_data_in_leaf: usize,
}

/// Grow a tree leaf-wise: repeatedly split whichever leaf offers the
/// largest gain until `num_leaves` is reached, the depth limit binds, or
/// no leaf has a positive-gain split. Raw leaf values are -G/H.
pub fn grow_tree(
    binned: &BinnedDataset,
    grad: &[f64],
    hess: &[f64],
    rows: Vec<u32>,
    active_cols: &[usize],
    params: &GrowParams,
) -> GrownTree {
    let node_stats = |rows: &[u32]| -> BinStats {
        let mut s = BinStats::default();
        for &r in rows {
            s.grad += grad[r as usize];
            s.hess += hess[r as usize];
            s.count += 1;
        }
        s
    };
    let eval = |rows: &[u32], depth: u32, stats: &BinStats| -> Option<SplitInfo> {
        if params.max_depth.is_some_and(|limit| depth >= limit) {
            return None;
        }
        if rows.len() < 2 * params.min_data_in_leaf {
            return None;
        }
        let histograms: Vec<(usize, Histogram)> = if rows.len() >= PARALLEL_HIST_ROWS {
            active_cols
                .par_iter()
                .map(|&c| (c, build_histogram(&binned.columns[c], rows, grad, hess)))
                .collect()
        } else {
            active_cols
                .iter()
                .map(|&c| (c, build_histogram(&binned.columns[c], rows, grad, hess)))
                .collect()
        };
        find_best_split(&histograms, &binned.columns, stats, params.min_data_in_leaf)
    };

    let mut nodes: Vec<TreeNode> = Vec::new();
    let mut leaves: HashMap<usize, LeafState> = HashMap::new();
    let mut heap: BinaryHeap<HeapEntry> = BinaryHeap::new();

    let root_stats = node_stats(&rows);
    let root_split = eval(&rows, 0, &root_stats);
    nodes.push(TreeNode::Leaf { value: 0.0 });
    if let Some(split) = &root_split {
        heap.push(HeapEntry {
            gain: split.gain,
            node: 0,
        });
    }
    leaves.insert(
        0,
        LeafState {
            rows,
            depth: 0,
            stats: root_stats,
            split: root_split,
        },
    );

    let mut n_leaves = 1;
    while n_leaves < params.num_leaves {
        let Some(entry) = heap.pop() else { break };
        let state = leaves.remove(&entry.node).expect("leaf still present");
        let split = state.split.expect("heap entries have splits");

        let column = &binned.columns[split.column];
        let mut left_rows = Vec::new();
        let mut right_rows = Vec::new();
        for &r in &state.rows {
            let bin = column.bins[r as usize];
            let go_left = match bin {
                MISSING_BIN => split.default_left,
                b => match (&split.threshold_bin, &split.left_cats) {
                    (Some(t), None) => b <= *t,
                    (None, Some(cats)) => cats.binary_search(&b).is_ok(),
                    _ => unreachable!("split carries exactly one test"),
                },
            };
            if go_left {
                left_rows.push(r);
            } else {
                right_rows.push(r);
            }
        }

        let left_idx = nodes.len();
        nodes.push(TreeNode::Leaf { value: 0.0 });
        let right_idx = nodes.len();
        nodes.push(TreeNode::Leaf { value: 0.0 });
        let test = match (&split.threshold_bin, &split.left_cats) {
            (Some(t), None) => SplitTest::Numeric {
                threshold: column.threshold_of(*t),
            },
            (None, Some(cats)) => SplitTest::Categorical {
                left_cats: cats.clone(),
            },
            _ => unreachable!(),
        };
        nodes[entry.node] = TreeNode::Split {
            column: split.column as u32,
            test,
            default_left: split.default_left,
            left: left_idx as u32,
            right: right_idx as u32,
            gain: split.gain,
        };
        n_leaves += 1;

        for (idx, child_rows) in [(left_idx, left_rows), (right_idx, right_rows)] {
            let stats = node_stats(&child_rows);
            let child_split = eval(&child_rows, state.depth + 1, &stats);
            if let Some(s) = &child_split {
                heap.push(HeapEntry {
                    gain: s.gain,
                    node: idx,
                });
            }
            leaves.insert(
                idx,
                LeafState {
                    rows: child_rows,
                    depth: state.depth + 1,
                    stats,
                    split: child_split,
                },
            );
        }
    }

    let mut leaf_rows: Vec<(usize, Vec<u32>)> = Vec::with_capacity(leaves.len());
    for (idx, state) in leaves {
        let value = -state.stats.grad / state.stats.hess;
        nodes[idx] = TreeNode::Leaf { value };
        leaf_rows.push((idx, state.rows));
    }
    leaf_rows.sort_by_key(|(idx, _)| *idx);

    GrownTree {
        tree: Tree { nodes },
        leaf_rows,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{Column, ColumnKind, FeatureGroup, FeatureMatrix};
    use crate::gbdt::binning::bin_features;

    fn matrix_of(cols: Vec<(&str, Vec<Option<f64>>)>) -> FeatureMatrix {
        let n = cols[0].1.len();
        let columns = cols
            .into_iter()
            .map(|(name, values)| Column {
                name: name.into(),
                kind: ColumnKind::Numeric,
                group: FeatureGroup::Length,
                values,
                dict: None,
            })
            .collect();
        FeatureMatrix::from_columns(columns, (0..n).map(|i| (0, i as u32 + 1)).collect())
            .unwrap()
    }

    fn hists(
        binned: &BinnedDataset,
        rows: &[u32],
        grad: &[f64],
        hess: &[f64],
    ) -> Vec<(usize, Histogram)> {
        (0..binned.columns.len())
            .map(|c| (c, build_histogram(&binned.columns[c], rows, grad, hess)))
            .collect()
    }

    fn totals(grad: &[f64], hess: &[f64]) -> BinStats {
        BinStats {
            grad: grad.iter().sum(),
            hess: hess.iter().sum(),
            count: grad.len(),
        }
    }

    #[test]
    fn no_positive_gain_when_gradients_equal() {
        let m = matrix_of(vec![("x", (0..8).map(|v| Some(v as f64)).collect())]);
        let binned = bin_features(&m, 64, 1).unwrap();
        let grad = vec![1.0; 8];
        let hess = vec![1.0; 8];
        let rows: Vec<u32> = (0..8).collect();
        let h = hists(&binned, &rows, &grad, &hess);
        let split = find_best_split(&h, &binned.columns, &totals(&grad, &hess), 1);
        assert!(split.is_none());
    }

    #[test]
    fn obvious_split_is_found() {
        let m = matrix_of(vec![("x", (0..8).map(|v| Some(v as f64)).collect())]);
        let binned = bin_features(&m, 64, 1).unwrap();
        // Step change between x=3 and x=4.
        let grad = vec![-1.0, -1.0, -1.0, -1.0, 1.0, 1.0, 1.0, 1.0];
        let hess = vec![1.0; 8];
        let rows: Vec<u32> = (0..8).collect();
        let h = hists(&binned, &rows, &grad, &hess);
        let split = find_best_split(&h, &binned.columns, &totals(&grad, &hess), 1).unwrap();
        assert_eq!(split.column, 0);
        assert_eq!(split.threshold_bin, Some(3));
        // 16/4 + 16/4 - 0
        assert_eq!(split.gain, 8.0);
        // No missing rows: equal child sizes default left.
        assert!(split.default_left);
    }

    #[test]
    fn min_data_in_leaf_restricts_thresholds() {
        let m = matrix_of(vec![("x", (0..8).map(|v| Some(v as f64)).collect())]);
        let binned = bin_features(&m, 64, 1).unwrap();
        let grad = vec![-9.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0];
        let hess = vec![1.0; 8];
        let rows: Vec<u32> = (0..8).collect();
        let h = hists(&binned, &rows, &grad, &hess);
        // Unrestricted, the best cut isolates the outlier row.
        let free = find_best_split(&h, &binned.columns, &totals(&grad, &hess), 1).unwrap();
        assert_eq!(free.threshold_bin, Some(0));
        // With min_data_in_leaf = 3 that cut is out of reach.
        let bound = find_best_split(&h, &binned.columns, &totals(&grad, &hess), 3).unwrap();
        assert_eq!(bound.threshold_bin, Some(2));
    }

    #[test]
    fn missing_rows_pick_better_default() {
        let m = matrix_of(vec![(
            "x",
            vec![
                Some(0.0),
                Some(1.0),
                Some(2.0),
                Some(3.0),
                None,
                None,
            ],
        )]);
        let binned = bin_features(&m, 64, 1).unwrap();
        // Missing rows carry positive gradients like the high-x rows.
        let grad = vec![-1.0, -1.0, 1.0, 1.0, 1.0, 1.0];
        let hess = vec![1.0; 6];
        let rows: Vec<u32> = (0..6).collect();
        let h = hists(&binned, &rows, &grad, &hess);
        let split = find_best_split(&h, &binned.columns, &totals(&grad, &hess), 1).unwrap();
        assert_eq!(split.threshold_bin, Some(1));
        assert!(!split.default_left);
    }

    #[test]
    fn stump_growth_matches_best_split() {
        let m = matrix_of(vec![("x", (0..8).map(|v| Some(v as f64)).collect())]);
        let binned = bin_features(&m, 64, 1).unwrap();
        let grad = vec![-1.0, -1.0, -1.0, -1.0, 1.0, 1.0, 1.0, 1.0];
        let hess = vec![1.0; 8];
        let grown = grow_tree(
            &binned,
            &grad,
            &hess,
            (0..8).collect(),
            &[0],
            &GrowParams {
                num_leaves: 2,
                max_depth: None,
                min_data_in_leaf: 1,
            },
        );
        assert_eq!(grown.tree.n_leaves(), 2);
        assert_eq!(grown.tree.depth(), 1);
        // Leaf values are -G/H of each side.
        let left = grown.tree.predict_row(&m, 0);
        let right = grown.tree.predict_row(&m, 7);
        assert_eq!(left, 1.0);
        assert_eq!(right, -1.0);
    }

    #[test]
    fn depth_limit_binds() {
        let values: Vec<Option<f64>> = (0..64).map(|v| Some(v as f64)).collect();
        let grad: Vec<f64> = (0..64).map(|v| ((v % 7) as f64) - 3.0).collect();
        let hess = vec![1.0; 64];
        let m = matrix_of(vec![("x", values)]);
        let binned = bin_features(&m, 64, 1).unwrap();
        let grown = grow_tree(
            &binned,
            &grad,
            &hess,
            (0..64).collect(),
            &[0],
            &GrowParams {
                num_leaves: 31,
                max_depth: Some(2),
                min_data_in_leaf: 1,
            },
        );
        assert!(grown.tree.depth() <= 2);
        assert!(grown.tree.n_leaves() <= 4);
    }

    #[test]
    fn children_respect_min_data_in_leaf() {
        let values: Vec<Option<f64>> = (0..40).map(|v| Some((v % 13) as f64)).collect();
        let grad: Vec<f64> = (0..40).map(|v| ((v * 7 % 11) as f64) - 5.0).collect();
        let hess = vec![1.0; 40];
        let m = matrix_of(vec![("x", values)]);
        let binned = bin_features(&m, 64, 1).unwrap();
        let grown = grow_tree(
            &binned,
            &grad,
            &hess,
            (0..40).collect(),
            &[0],
            &GrowParams {
                num_leaves: 16,
                max_depth: None,
                min_data_in_leaf: 4,
            },
        );
        for (_, rows) in &grown.leaf_rows {
            assert!(rows.len() >= 4);
        }
        for node in &grown.tree.nodes {
            if let TreeNode::Split { gain, .. } = node {
                assert!(*gain > 0.0);
            }
        }
    }

    #[test]
    fn tree_json_round_trip() {
        let tree = Tree {
            nodes: vec![
                TreeNode::Split {
                    column: 0,
                    test: SplitTest::Numeric { threshold: 1.5 },
                    default_left: true,
                    left: 1,
                    right: 2,
                    gain: 4.0,
                },
                TreeNode::Leaf { value: -0.5 },
                TreeNode::Split {
                    column: 1,
                    test: SplitTest::Categorical {
                        left_cats: vec![1, 3],
                    },
                    default_left: false,
                    left: 3,
                    right: 4,
                    gain: 2.0,
                },
                TreeNode::Leaf { value: 0.25 },
                TreeNode::Leaf { value: 1.0 },
            ],
        };
        let json = serde_json::to_string(&tree).unwrap();
        let back: Tree = serde_json::from_str(&json).unwrap();
        assert_eq!(back, tree);
    }
}
