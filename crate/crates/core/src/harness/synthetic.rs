//! Planted synthetic citation data with preferential attachment, topic and
//! category homophily, and noisy topic features.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dataset::{format_date, parse_date, DatasetBundle, EdgeRecord, NodeRecord, CASE, COURT_COLUMN, LAW};
use crate::error::{Error, Result};
use crate::numerics::DenseMatrix;
use crate::seed::{self, stream};

pub const LAW_BOOK_COLUMN: &str = "law_book";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub n_cases: usize,
    pub n_laws: usize,
    /// Distinct courts (cases) and law books (laws).
    pub n_categories: usize,
    pub n_topics: usize,
    pub feature_dim: usize,
    /// Mean number of case citations per case.
    pub cases_cited: usize,
    /// Mean number of law citations per case.
    pub laws_cited: usize,
    /// Log-odds boost for a case citing a case of the same topic.
    pub cc_topic_homophily: f64,
    /// Log-odds boost for a case citing a case of the same court.
    pub cc_category_homophily: f64,
    /// Log-odds boost for a case citing a law of the same topic.
    pub cl_topic_homophily: f64,
    /// Log-odds boost for a case citing a law whose book matches its court.
    pub cl_category_homophily: f64,
    /// Weight of a target's current in-degree (preferential attachment).
    pub popularity: f64,
    /// Scale of the category component of node features.
    pub category_signal: f64,
    /// Standard deviation of feature noise.
    pub feature_noise: f64,
    pub start_date: String,
    pub span_days: i64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n_cases: 5000,
            n_laws: 500,
            n_categories: 10,
            n_topics: 10,
            feature_dim: 32,
            cases_cited: 5,
            laws_cited: 12,
            cc_topic_homophily: 5.0,
            cc_category_homophily: 1.0,
            cl_topic_homophily: 1.0,
            cl_category_homophily: 5.0,
            popularity: 1.0,
            category_signal: 0.3,
            feature_noise: 1.0,
            start_date: "2000-01-01".into(),
            span_days: 3650,
            seed: 0,
        }
    }
}

impl SyntheticConfig {
    /// All planted signal switched off: targets are uniform.
    pub fn null(self) -> Self {
        Self {
            cc_topic_homophily: 0.0,
            cc_category_homophily: 0.0,
            cl_topic_homophily: 0.0,
            cl_category_homophily: 0.0,
            popularity: 0.0,
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, msg: &str| if ok { Ok(()) } else { Err(Error::Parameter(msg.to_string())) };
        check(self.n_cases >= 2, "need at least 2 cases")?;
        check(self.n_laws >= 1, "need at least 1 law")?;
        check(self.n_categories >= 1, "need at least 1 category")?;
        check(self.n_topics >= 1, "need at least 1 topic")?;
        check(self.feature_dim >= 1, "feature_dim must be positive")?;
        check(self.cases_cited >= 1 && self.laws_cited >= 1, "citation counts must be positive")?;
        check(self.laws_cited <= self.n_laws, "cannot cite more laws than exist")?;
        check(self.span_days >= 0, "span_days must be non-negative")?;
        for (name, v) in [
            ("cc_topic_homophily", self.cc_topic_homophily),
            ("cc_category_homophily", self.cc_category_homophily),
            ("cl_topic_homophily", self.cl_topic_homophily),
            ("cl_category_homophily", self.cl_category_homophily),
            ("popularity", self.popularity),
            ("category_signal", self.category_signal),
            ("feature_noise", self.feature_noise),
        ] {
            check(v.is_finite() && v >= 0.0, &format!("{name} must be finite and non-negative"))?;
        }
        check(parse_date(&self.start_date).is_some(), "start_date must be YYYY-MM-DD")
    }
}

/// Draws `m` distinct indices with probability proportional to `weights`.
fn weighted_distinct(weights: &[f64], m: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let m = m.min(weights.iter().filter(|&&w| w > 0.0).count());
    let mut w = weights.to_vec();
    let mut out = Vec::with_capacity(m);
    let mut total: f64 = w.iter().sum();
    for _ in 0..m {
        let mut x = rng.gen::<f64>() * total;
        let mut pick = w.len() - 1;
        for (i, &wi) in w.iter().enumerate() {
            if x < wi {
                pick = i;
                break;
            }
            x -= wi;
        }
        // guard against rounding landing on an exhausted slot
        while w[pick] == 0.0 {
            pick = (pick + w.len() - 1) % w.len();
        }
        out.push(pick);
        total -= w[pick];
        w[pick] = 0.0;
    }
    out
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

fn prototypes(n: usize, dim: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..dim).map(|_| gaussian(rng)).collect()).collect()
}

/// Time-ordered cases citing earlier cases and laws. Each citation target is
/// drawn with weight `(popularity · in_degree + 1) · exp(topic · same_topic)
/// · exp(category · same_category)`, with per-relation strengths.
pub fn generate_synthetic(cfg: &SyntheticConfig) -> Result<DatasetBundle> {
    cfg.validate()?;
    let mut rng = seed::rng_from(cfg.seed, &[stream::SYNTH]);
    let (n, l, d) = (cfg.n_cases, cfg.n_laws, cfg.feature_dim);
    let case_topic: Vec<usize> = (0..n).map(|_| rng.gen_range(0..cfg.n_topics)).collect();
    let case_cat: Vec<usize> = (0..n).map(|_| rng.gen_range(0..cfg.n_categories)).collect();
    let law_topic: Vec<usize> = (0..l).map(|_| rng.gen_range(0..cfg.n_topics)).collect();
    let law_cat: Vec<usize> = (0..l).map(|_| rng.gen_range(0..cfg.n_categories)).collect();
    let topic_proto = prototypes(cfg.n_topics, d, &mut rng);
    let cat_proto = prototypes(cfg.n_categories, d, &mut rng);

    let mut feature_rng = seed::rng_from(cfg.seed, &[stream::SYNTH, 1]);
    // rows are scaled to unit length, like normalized text embeddings
    let mut features_for = |topics: &[usize], cats: &[usize]| {
        let mut m = DenseMatrix::zeros(topics.len(), d);
        for i in 0..topics.len() {
            let row: Vec<f64> = (0..d)
                .map(|k| {
                    topic_proto[topics[i]][k]
                        + cfg.category_signal * cat_proto[cats[i]][k]
                        + cfg.feature_noise * gaussian(&mut feature_rng)
                })
                .collect();
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
            for (dst, v) in m.row_mut(i).iter_mut().zip(row) {
                *dst = (v / norm) as f32;
            }
        }
        m
    };
    let case_features = features_for(&case_topic, &case_cat);
    let law_features = features_for(&law_topic, &law_cat);

    let affinity = |topic: f64, category: f64| {
        let (t, c) = (topic.exp(), category.exp());
        move |t_same: bool, c_same: bool| (if t_same { t } else { 1.0 }) * (if c_same { c } else { 1.0 })
    };
    let cc_affinity = affinity(cfg.cc_topic_homophily, cfg.cc_category_homophily);
    let cl_affinity = affinity(cfg.cl_topic_homophily, cfg.cl_category_homophily);
    let mut case_indeg = vec![0usize; n];
    let mut law_indeg = vec![0usize; l];
    let mut edges = Vec::new();
    let mut weights = Vec::with_capacity(n.max(l));
    for i in 0..n {
        if i > 0 {
            weights.clear();
            weights.extend((0..i).map(|j| {
                (cfg.popularity * case_indeg[j] as f64 + 1.0)
                    * cc_affinity(case_topic[i] == case_topic[j], case_cat[i] == case_cat[j])
            }));
            let m = rng.gen_range(1..=2 * cfg.cases_cited - 1);
            for j in weighted_distinct(&weights, m, &mut rng) {
                case_indeg[j] += 1;
                edges.push(EdgeRecord {
                    src_id: i as u64,
                    dst_id: j as u64,
                    relation: "CC".into(),
                });
            }
        }
        weights.clear();
        weights.extend((0..l).map(|j| {
            (cfg.popularity * law_indeg[j] as f64 + 1.0) * cl_affinity(case_topic[i] == law_topic[j], case_cat[i] == law_cat[j])
        }));
        let m = rng.gen_range(1..=(2 * cfg.laws_cited - 1).min(l));
        for j in weighted_distinct(&weights, m, &mut rng) {
            law_indeg[j] += 1;
            edges.push(EdgeRecord {
                src_id: i as u64,
                dst_id: (n + j) as u64,
                relation: "CL".into(),
            });
        }
    }

    let start = parse_date(&cfg.start_date).expect("validated");
    let mut nodes = Vec::with_capacity(n + l);
    for i in 0..n {
        let offset = (i as i64 * cfg.span_days) / n as i64;
        nodes.push(NodeRecord {
            id: i as u64,
            node_type: CASE.into(),
            date: Some(format_date(start + offset)),
            meta: BTreeMap::from([(COURT_COLUMN.to_string(), format!("court{}", case_cat[i]))]),
        });
    }
    for j in 0..l {
        nodes.push(NodeRecord {
            id: (n + j) as u64,
            node_type: LAW.into(),
            date: None,
            meta: BTreeMap::from([(LAW_BOOK_COLUMN.to_string(), format!("book{}", law_cat[j]))]),
        });
    }
    Ok(DatasetBundle {
        nodes,
        edges,
        features: BTreeMap::from([(CASE.to_string(), case_features), (LAW.to_string(), law_features)]),
    })
}
