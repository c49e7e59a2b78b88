//! Full-batch training and evaluation of one model on one fold.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::enrichment::{enrich, EnrichmentSpec, MetaFeature};
use crate::error::{Error, Result};
use crate::evaluation::{aggregate, sample_negatives_with, FoldPlan, MetricReport, ScoredRelation, TestSplit};
use crate::graph::HeteroGraph;
use crate::model::{encode, init_params, joint_loss, score_target, EncoderConfig, LinkBatch, ModelParams, PreparedGraph};
use crate::numerics::AdamState;
use crate::seed::{self, stream};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    /// Overrides the encoder's dropout probability.
    pub dropout_p: f64,
    /// One model for all targets; otherwise one model per target.
    pub joint: bool,
    pub seed: u64,
    pub encoder: EncoderConfig,
    pub enrichment: EnrichmentSpec,
    /// Fraction of target-relation edges hidden from message passing in each
    /// epoch (they stay in the loss), so training sees neighbourhoods as
    /// sparse as those of test nodes. Zero propagates over the full graph.
    pub message_dropout: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            learning_rate: 1e-4,
            dropout_p: 0.2,
            joint: true,
            seed: 0,
            encoder: EncoderConfig::default(),
            enrichment: default_enrichment(),
            message_dropout: 0.0,
        }
    }
}

/// Reverse edges, self-loops, and courts and law books exposed as nodes.
pub fn default_enrichment() -> EnrichmentSpec {
    EnrichmentSpec::full(vec![MetaFeature::new("case", "court"), MetaFeature::new("law", "law_book")])
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning rate {} must be positive", self.learning_rate)));
        }
        if !(0.0..1.0).contains(&self.message_dropout) {
            return Err(Error::Config(format!("message_dropout {} not in [0, 1)", self.message_dropout)));
        }
        self.effective_encoder().validate()
    }

    pub fn effective_encoder(&self) -> EncoderConfig {
        EncoderConfig {
            dropout_p: self.dropout_p,
            ..self.encoder.clone()
        }
    }
}

/// Drops exposed features whose column the graph does not carry.
fn applicable_enrichment(g: &HeteroGraph, spec: &EnrichmentSpec) -> EnrichmentSpec {
    let mut out = spec.clone();
    out.meta_features.retain(|mf| {
        let present = g
            .type_id(&mf.source_type)
            .map(|t| g.meta(t, &mf.column).is_some())
            .unwrap_or(false);
        if !present {
            log::warn!("no meta column `{}` on `{}`; not exposed", mf.column, mf.source_type);
        }
        present
    });
    out
}

/// A model trained on a subset of the fold's targets.
#[derive(Clone, Debug)]
pub struct TrainOutput {
    pub params: ModelParams<f32>,
    /// Per fold target: was it part of the loss?
    pub included: Vec<bool>,
    pub loss_history: Vec<f64>,
    pub seconds: f64,
}

/// Trains one model on the targets flagged in `include`.
///
/// Every epoch draws fresh per-source negatives for all training positives
/// and takes one optimizer step on the full graph.
pub fn train_model(fold: &FoldPlan, cfg: &TrainConfig, include: &[bool]) -> Result<TrainOutput> {
    cfg.validate()?;
    if include.len() != fold.targets.len() {
        return Err(Error::Config(format!(
            "{} inclusion flags for {} targets",
            include.len(),
            fold.targets.len()
        )));
    }
    let start = Instant::now();
    let enc = cfg.effective_encoder();
    let spec = applicable_enrichment(&fold.train_graph, &cfg.enrichment);
    let full_pg = PreparedGraph::<f32>::new(&enrich(&fold.train_graph, &spec)?, &enc, &fold.targets)?;
    let fold_tag = fold.fold as u64;
    let mut params = init_params(&enc, &full_pg.schema(), &mut seed::rng_from(cfg.seed, &[stream::INIT, fold_tag]))?;
    let mut dropout_rng = seed::rng_from(cfg.seed, &[stream::DROPOUT, fold_tag]);

    let mut included = include.to_vec();
    let mut positives = Vec::with_capacity(fold.targets.len());
    for (k, t) in fold.targets.iter().enumerate() {
        let edges = fold.train_graph.edge_list(t)?;
        if included[k] && edges.is_empty() {
            log::warn!("no training edges for `{}` in fold {}", full_pg.targets()[k].label, fold.fold);
            included[k] = false;
        }
        positives.push(edges);
    }
    if !included.iter().any(|&i| i) {
        return Err(Error::Batch(format!("fold {} has no training edges for any included target", fold.fold)));
    }

    let mut adam = AdamState::new(cfg.learning_rate);
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let mut rng = seed::rng_from(cfg.seed, &[stream::TRAIN_NEGATIVES, fold_tag, epoch as u64]);
        let mut batches = Vec::with_capacity(fold.targets.len());
        for (k, t) in fold.targets.iter().enumerate() {
            if !included[k] {
                batches.push(None);
                continue;
            }
            let adj = &fold.train_graph.relation(t)?.adjacency;
            let n_dst = fold.train_graph.node_count(t.dst);
            let s = sample_negatives_with(&positives[k], n_dst, |u, v| adj.contains(u, v), &mut rng);
            batches.push((!s.positives.is_empty()).then_some(LinkBatch {
                positives: s.positives,
                negatives: s.negatives,
            }));
        }
        let sparse_pg;
        let pg = if cfg.message_dropout > 0.0 {
            let mut g = fold.train_graph.clone();
            let mut rng = seed::rng_from(cfg.seed, &[stream::MESSAGE_DROPOUT, fold_tag, epoch as u64]);
            for (t, edges) in fold.targets.iter().zip(&positives) {
                let hidden: Vec<(usize, usize)> =
                    edges.iter().copied().filter(|_| rng.gen_bool(cfg.message_dropout)).collect();
                g = g.without_edges(t, &hidden)?;
            }
            sparse_pg = PreparedGraph::<f32>::new(&enrich(&g, &spec)?, &enc, &fold.targets)?;
            &sparse_pg
        } else {
            &full_pg
        };
        let out = joint_loss(pg, &params, &enc, &batches, true, &mut dropout_rng)?;
        let loss = f64::from(out.loss);
        if !loss.is_finite() || !out.grads.is_finite() {
            return Err(Error::Divergence { epoch, loss });
        }
        history.push(loss);
        adam.step(params.tensors_mut(), out.grads.tensors())?;
    }
    Ok(TrainOutput {
        params,
        included,
        loss_history: history,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Joint mode trains one model on every target; separate mode trains one
/// model per target.
pub fn train(fold: &FoldPlan, cfg: &TrainConfig) -> Result<Vec<TrainOutput>> {
    let n = fold.targets.len();
    if cfg.joint {
        Ok(vec![train_model(fold, cfg, &vec![true; n])?])
    } else {
        (0..n)
            .map(|k| {
                let include: Vec<bool> = (0..n).map(|j| j == k).collect();
                train_model(fold, cfg, &include)
            })
            .collect()
    }
}

/// Scores the indicator pairs of `targets` on the split's inference graph.
pub fn score_split(
    params: &ModelParams<f32>,
    fold: &FoldPlan,
    split: &TestSplit,
    cfg: &TrainConfig,
    targets: &[bool],
) -> Result<Vec<ScoredRelation>> {
    let enc = cfg.effective_encoder();
    let spec = applicable_enrichment(&fold.train_graph, &cfg.enrichment);
    let g = enrich(&split.inference_graph, &spec)?;
    let pg = PreparedGraph::<f32>::new(&g, &enc, &fold.targets)?;
    // inference mode consumes no randomness
    let z = encode(&pg, params, &enc, false, &mut seed::rng_from(0, &[]))?;
    let mut out = Vec::new();
    for (k, batch) in split.indicators.iter().enumerate() {
        if !targets[k] || batch.positives.is_empty() {
            continue;
        }
        // a fixed shuffle keeps tied scores from ranking by label
        let mut labelled: Vec<((usize, usize), bool)> = batch
            .positives
            .iter()
            .map(|&p| (p, true))
            .chain(batch.negatives.iter().map(|&n| (n, false)))
            .collect();
        labelled.shuffle(&mut seed::rng_from(split.negative_seed, &[k as u64]));
        let pairs: Vec<(usize, usize)> = labelled.iter().map(|&(p, _)| p).collect();
        let logits = score_target(&pg, &z, params, k, &pairs)?;
        out.push(ScoredRelation {
            relation: pg.targets()[k].label.clone(),
            scores: logits.into_iter().map(f64::from).collect(),
            labels: labelled.iter().map(|&(_, l)| l).collect(),
        });
    }
    Ok(out)
}

/// Metrics of one model on one test split, with inference time recorded.
pub fn evaluate(params: &ModelParams<f32>, fold: &FoldPlan, split: &TestSplit, cfg: &TrainConfig) -> Result<MetricReport> {
    let start = Instant::now();
    let scored = score_split(params, fold, split, cfg, &vec![true; fold.targets.len()])?;
    let mut report = aggregate(&scored)?;
    report.test_seconds = start.elapsed().as_secs_f64();
    Ok(report)
}

/// Metrics of the models returned by [`train`]: each target is scored by the
/// first model trained on it.
pub fn evaluate_models(models: &[TrainOutput], fold: &FoldPlan, split: &TestSplit, cfg: &TrainConfig) -> Result<MetricReport> {
    let start = Instant::now();
    let n = fold.targets.len();
    let mut by_target: Vec<Option<ScoredRelation>> = vec![None; n];
    for m in models {
        let todo: Vec<bool> = (0..n).map(|k| m.included[k] && by_target[k].is_none()).collect();
        if !todo.iter().any(|&t| t) {
            continue;
        }
        for s in score_split(&m.params, fold, split, cfg, &todo)? {
            let k = fold
                .target_labels()
                .iter()
                .position(|l| *l == s.relation)
                .expect("scored relation is a fold target");
            by_target[k] = Some(s);
        }
    }
    let scored: Vec<ScoredRelation> = by_target.into_iter().flatten().collect();
    let mut report = aggregate(&scored)?;
    report.test_seconds = start.elapsed().as_secs_f64();
    report.train_seconds = models.iter().map(|m| m.seconds).sum();
    Ok(report)
}
