//! Temporally cohesive splitting: date buckets, fold graphs, held-out test
//! edges and frozen evaluation negatives.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::sampling::sample_negatives_with;
use crate::error::{Error, Result};
use crate::graph::{HeteroGraph, IndexMap, NodeTypeId, RelationId};
use crate::model::LinkBatch;
use crate::seed::{self, stream};

/// A relation named by its type and relation names.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationName {
    pub src: String,
    pub name: String,
    pub dst: String,
}

impl RelationName {
    pub fn new(src: &str, name: &str, dst: &str) -> Self {
        Self {
            src: src.into(),
            name: name.into(),
            dst: dst.into(),
        }
    }

    pub fn resolve(&self, g: &HeteroGraph) -> Result<RelationId> {
        g.relation_id(&self.src, &self.name, &self.dst)
    }

    pub fn label(&self) -> String {
        format!("{}.{}.{}", self.src, self.name, self.dst)
    }
}

pub fn case_citations() -> RelationName {
    RelationName::new("case", "cites_case", "case")
}

pub fn law_citations() -> RelationName {
    RelationName::new("case", "cites_law", "law")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitConfig {
    pub n_folds: usize,
    pub cumulative_train: bool,
    pub cumulative_test: bool,
    pub test_ratio: f64,
    pub n_test_splits: usize,
    pub seed: u64,
    /// The dated node type that is split over time; all others are static.
    pub dynamic_type: String,
    /// Relations whose links are predicted.
    pub targets: Vec<RelationName>,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            n_folds: 5,
            cumulative_train: true,
            cumulative_test: true,
            test_ratio: 0.9,
            n_test_splits: 5,
            seed: 0,
            dynamic_type: "case".into(),
            targets: vec![case_citations(), law_citations()],
        }
    }
}

impl SplitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_folds < 2 {
            return Err(Error::Config(format!("n_folds must be at least 2, got {}", self.n_folds)));
        }
        if !(0.0..=1.0).contains(&self.test_ratio) {
            return Err(Error::Config(format!("test_ratio {} not in [0, 1]", self.test_ratio)));
        }
        if self.n_test_splits == 0 {
            return Err(Error::Config("n_test_splits must be positive".into()));
        }
        if self.targets.is_empty() {
            return Err(Error::Config("no target relations".into()));
        }
        Ok(())
    }

    /// Folds that have both a training and a test bucket: `1..n_folds`.
    pub fn fold_indices(&self) -> std::ops::Range<usize> {
        1..self.n_folds
    }
}

/// Start of a date bucket: its first node in (date, index) order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cutoff {
    pub date: i64,
    pub node: usize,
}

fn sorted_by_date(dates: &[i64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..dates.len()).collect();
    order.sort_by_key(|&i| (dates[i], i));
    order
}

/// Bucket index of every node: nodes sorted by (date, index) are cut into
/// `n_folds` runs whose sizes differ by at most one.
pub fn date_buckets(dates: &[i64], n_folds: usize) -> Result<Vec<usize>> {
    if n_folds < 2 {
        return Err(Error::Config(format!("n_folds must be at least 2, got {n_folds}")));
    }
    let mut distinct = dates.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < n_folds {
        return Err(Error::Data(format!(
            "{} distinct dates cannot form {n_folds} buckets",
            distinct.len()
        )));
    }
    let n = dates.len();
    let mut buckets = vec![0; n];
    for (pos, i) in sorted_by_date(dates).into_iter().enumerate() {
        buckets[i] = pos * n_folds / n;
    }
    Ok(buckets)
}

/// The `k/n_folds` quantile boundaries, `k = 1..n_folds`.
pub fn time_cutoffs(dates: &[i64], n_folds: usize) -> Result<Vec<Cutoff>> {
    let buckets = date_buckets(dates, n_folds)?;
    let order = sorted_by_date(dates);
    let mut cutoffs = Vec::with_capacity(n_folds - 1);
    for pair in order.windows(2) {
        if buckets[pair[1]] != buckets[pair[0]] {
            cutoffs.push(Cutoff {
                date: dates[pair[1]],
                node: pair[1],
            });
        }
    }
    Ok(cutoffs)
}

/// Training graph, evaluation graph and test edges of one temporal fold.
///
/// The evaluation graph holds the training and test nodes with every edge
/// among them; per-split inference graphs are derived from it by removing
/// held-out edges.
#[derive(Clone, Debug, PartialEq)]
pub struct FoldPlan {
    pub fold: usize,
    pub cutoff: Cutoff,
    pub config: SplitConfig,
    pub dynamic_type: NodeTypeId,
    pub train_graph: HeteroGraph,
    pub train_index: Vec<IndexMap>,
    pub eval_graph: HeteroGraph,
    pub eval_index: Vec<IndexMap>,
    /// Per dynamic node of the evaluation graph: is it a test node?
    pub is_test: Vec<bool>,
    pub targets: Vec<RelationId>,
    /// Per target, edges of the evaluation graph whose source is a test node.
    pub test_edges: Vec<Vec<(usize, usize)>>,
}

impl FoldPlan {
    pub fn target_labels(&self) -> Vec<String> {
        self.targets.iter().map(|t| self.eval_graph.relation_label(t)).collect()
    }

    pub fn num_train_nodes(&self) -> usize {
        self.train_graph.node_count(self.dynamic_type)
    }

    pub fn num_test_nodes(&self) -> usize {
        self.is_test.iter().filter(|&&t| t).count()
    }

    /// Base-graph index of a node in the evaluation graph.
    pub fn eval_to_base(&self, t: NodeTypeId, i: usize) -> usize {
        self.eval_index[t.0].new_to_old[i]
    }
}

/// Builds fold `k` (`1 <= k < n_folds`): cumulative training uses every
/// bucket before `k`, otherwise only bucket `k-1`; cumulative testing uses
/// every bucket from `k` on, otherwise only bucket `k`.
pub fn build_fold(g: &HeteroGraph, k: usize, cfg: &SplitConfig) -> Result<FoldPlan> {
    cfg.validate()?;
    if !cfg.fold_indices().contains(&k) {
        return Err(Error::Fold(format!("fold {k} outside 1..{}", cfg.n_folds)));
    }
    let dynamic = g.type_id(&cfg.dynamic_type)?;
    let dates = g
        .dates(dynamic)
        .ok_or_else(|| Error::Data(format!("node type `{}` has no dates", cfg.dynamic_type)))?;
    let buckets = date_buckets(dates, cfg.n_folds)?;
    let cutoff = time_cutoffs(dates, cfg.n_folds)?[k - 1];

    let in_train = |b: usize| if cfg.cumulative_train { b < k } else { b + 1 == k };
    let in_test = |b: usize| if cfg.cumulative_test { b >= k } else { b == k };
    let mask_for = |pred: &dyn Fn(usize) -> bool| -> Vec<Vec<bool>> {
        g.node_type_ids()
            .map(|t| {
                if t == dynamic {
                    buckets.iter().map(|&b| pred(b)).collect()
                } else {
                    vec![true; g.node_count(t)]
                }
            })
            .collect()
    };
    let train_mask = mask_for(&in_train);
    let eval_mask = mask_for(&|b| in_train(b) || in_test(b));
    let n_train = train_mask[dynamic.0].iter().filter(|&&m| m).count();
    let n_test = buckets.iter().filter(|&&b| in_test(b)).count();
    if n_train == 0 || n_test == 0 {
        return Err(Error::Fold(format!("fold {k} has {n_train} training and {n_test} test nodes")));
    }

    let (train_graph, train_index) = g.induce_node_subset(&train_mask)?;
    let (eval_graph, eval_index) = g.induce_node_subset(&eval_mask)?;
    let is_test: Vec<bool> = eval_index[dynamic.0]
        .new_to_old
        .iter()
        .map(|&old| in_test(buckets[old]))
        .collect();
    let targets = cfg
        .targets
        .iter()
        .map(|t| t.resolve(g))
        .collect::<Result<Vec<_>>>()?;
    let test_edges = targets
        .iter()
        .map(|t| {
            let edges = eval_graph.edge_list(t)?;
            Ok(if t.src == dynamic {
                edges.into_iter().filter(|&(u, _)| is_test[u]).collect()
            } else {
                Vec::new()
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FoldPlan {
        fold: k,
        cutoff,
        config: cfg.clone(),
        dynamic_type: dynamic,
        train_graph,
        train_index,
        eval_graph,
        eval_index,
        is_test,
        targets,
        test_edges,
    })
}

/// Per target: test edges kept in the inference graph, and held-out indicator edges.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EdgeSubsample {
    pub kept: Vec<Vec<(usize, usize)>>,
    pub held: Vec<Vec<(usize, usize)>>,
}

/// Holds out `ceil(test_ratio * deg)` uniformly chosen outgoing test edges of
/// every test node, per target relation.
pub fn subsample_test_edges(fold: &FoldPlan, test_ratio: f64, split_seed: u64) -> Result<EdgeSubsample> {
    if !(0.0..=1.0).contains(&test_ratio) {
        return Err(Error::Config(format!("test_ratio {test_ratio} not in [0, 1]")));
    }
    let mut rng = seed::rng_from(split_seed, &[]);
    let mut kept = Vec::with_capacity(fold.targets.len());
    let mut held = Vec::with_capacity(fold.targets.len());
    for edges in &fold.test_edges {
        let mut k = Vec::new();
        let mut h = Vec::new();
        // edges are sorted by source, so each source's row is contiguous
        for row in edges.chunk_by(|a, b| a.0 == b.0) {
            let deg = row.len();
            let n_held = ((test_ratio * deg as f64) - 1e-9).ceil().max(0.0) as usize;
            let mut idx: Vec<usize> = (0..deg).collect();
            idx.shuffle(&mut rng);
            let mut take = vec![false; deg];
            for &i in &idx[..n_held.min(deg)] {
                take[i] = true;
            }
            for (e, t) in row.iter().zip(take) {
                if t {
                    h.push(*e);
                } else {
                    k.push(*e);
                }
            }
        }
        kept.push(k);
        held.push(h);
    }
    Ok(EdgeSubsample { kept, held })
}

/// One test split of a fold: inference graph plus scored indicator pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct TestSplit {
    pub split: usize,
    pub edge_seed: u64,
    pub negative_seed: u64,
    pub test_ratio: f64,
    pub inference_graph: HeteroGraph,
    /// Per target: held-out positives and their frozen per-source negatives.
    pub indicators: Vec<LinkBatch>,
}

/// Derives test split `split` of `fold` with the fold's configured ratio.
pub fn build_test_split(fold: &FoldPlan, split: usize) -> Result<TestSplit> {
    build_test_split_with_ratio(fold, split, fold.config.test_ratio)
}

pub fn build_test_split_with_ratio(fold: &FoldPlan, split: usize, test_ratio: f64) -> Result<TestSplit> {
    let cfg = &fold.config;
    let edge_seed = seed::derive_seed(cfg.seed, &[fold.fold as u64, split as u64, stream::TEST_EDGES]);
    let negative_seed = seed::derive_seed(cfg.seed, &[fold.fold as u64, split as u64, stream::TEST_NEGATIVES]);
    let sub = subsample_test_edges(fold, test_ratio, edge_seed)?;
    if sub.held.iter().all(Vec::is_empty) {
        return Err(Error::Config(format!(
            "test ratio {test_ratio} holds out no edges in fold {}; nothing to evaluate",
            fold.fold
        )));
    }
    let mut inference_graph = fold.eval_graph.clone();
    for (t, held) in fold.targets.iter().zip(&sub.held) {
        inference_graph = inference_graph.without_edges(t, held)?;
    }
    let mut rng = seed::rng_from(negative_seed, &[]);
    let mut indicators = Vec::with_capacity(fold.targets.len());
    for (t, held) in fold.targets.iter().zip(&sub.held) {
        // negatives are checked against every known edge, held-out ones included
        let adj = &fold.eval_graph.relation(t)?.adjacency;
        let s = sample_negatives_with(held, fold.eval_graph.node_count(t.dst), |u, v| adj.contains(u, v), &mut rng);
        indicators.push(LinkBatch {
            positives: s.positives,
            negatives: s.negatives,
        });
    }
    Ok(TestSplit {
        split,
        edge_seed,
        negative_seed,
        test_ratio,
        inference_graph,
        indicators,
    })
}
