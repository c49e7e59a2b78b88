use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check_classes(scores: &[f64], labels: &[bool]) -> Result<(usize, usize)> {
    if scores.len() != labels.len() {
        return Err(Error::Metric(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Metric("NaN score".into()));
    }
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Metric(format!(
            "need both classes, got {pos} positives and {neg} negatives"
        )));
    }
    Ok((pos, neg))
}

/// Step-wise area under the precision-recall curve over the descending-score
/// ranking; equal scores keep their input order.
pub fn average_precision(scores: &[f64], labels: &[bool]) -> Result<f64> {
    let (pos, _) = check_classes(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (k, &i) in order.iter().enumerate() {
        if labels[i] {
            hits += 1;
            sum += hits as f64 / (k + 1) as f64;
        }
    }
    Ok(sum / pos as f64)
}

/// Mann-Whitney form of the ROC area: P(s⁺ > s⁻) + ½ P(s⁺ = s⁻).
pub fn auc_roc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    let (pos, neg) = check_classes(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Count, for each positive, negatives strictly below plus half the tied ones.
    let mut wins = 0.0f64;
    let mut negatives_below = 0usize;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        let (mut p, mut n) = (0usize, 0usize);
        for &k in &order[i..j] {
            if labels[k] {
                p += 1;
            } else {
                n += 1;
            }
        }
        wins += p as f64 * (negatives_below as f64 + 0.5 * n as f64);
        negatives_below += n;
        i = j;
    }
    Ok(wins / (pos as f64 * neg as f64))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub ap: f64,
    pub auc_roc: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelationScores {
    pub relation: String,
    pub ap: f64,
    pub auc_roc: f64,
    pub positives: usize,
    pub negatives: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub relations: Vec<RelationScores>,
    pub micro: Scores,
    #[serde(rename = "macro")]
    pub macro_: Scores,
    pub train_seconds: f64,
    pub test_seconds: f64,
}

impl MetricReport {
    pub fn relation(&self, name: &str) -> Option<&RelationScores> {
        self.relations.iter().find(|r| r.relation == name)
    }
}

/// Scored predictions of one relation.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ScoredRelation {
    pub relation: String,
    pub scores: Vec<f64>,
    pub labels: Vec<bool>,
}

/// Per-relation metrics, their unweighted mean (macro) and the metrics of
/// the pooled predictions (micro).
pub fn aggregate(sets: &[ScoredRelation]) -> Result<MetricReport> {
    if sets.is_empty() {
        return Err(Error::Metric("no relations to aggregate".into()));
    }
    let mut relations = Vec::with_capacity(sets.len());
    let mut pooled_scores = Vec::new();
    let mut pooled_labels = Vec::new();
    for s in sets {
        let positives = s.labels.iter().filter(|&&l| l).count();
        relations.push(RelationScores {
            relation: s.relation.clone(),
            ap: average_precision(&s.scores, &s.labels)?,
            auc_roc: auc_roc(&s.scores, &s.labels)?,
            positives,
            negatives: s.labels.len() - positives,
        });
        pooled_scores.extend_from_slice(&s.scores);
        pooled_labels.extend_from_slice(&s.labels);
    }
    let n = relations.len() as f64;
    let macro_ = Scores {
        ap: relations.iter().map(|r| r.ap).sum::<f64>() / n,
        auc_roc: relations.iter().map(|r| r.auc_roc).sum::<f64>() / n,
    };
    let micro = Scores {
        ap: average_precision(&pooled_scores, &pooled_labels)?,
        auc_roc: auc_roc(&pooled_scores, &pooled_labels)?,
    };
    Ok(MetricReport {
        relations,
        micro,
        macro_,
        train_seconds: 0.0,
        test_seconds: 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_ranking() {
        assert_eq!(average_precision(&[0.9, 0.1], &[true, false]).unwrap(), 1.0);
        assert_eq!(auc_roc(&[0.9, 0.1], &[true, false]).unwrap(), 1.0);
    }

    #[test]
    fn hand_enumerated_instance() {
        let s = [0.9, 0.8, 0.7];
        let l = [true, false, true];
        assert!((average_precision(&s, &l).unwrap() - (1.0 + 2.0 / 3.0) / 2.0).abs() < 1e-15);
        assert_eq!(auc_roc(&s, &l).unwrap(), 0.5);
    }

    #[test]
    fn all_tied_scores() {
        assert_eq!(auc_roc(&[0.3; 6], &[true, false, true, false, false, true]).unwrap(), 0.5);
    }

    #[test]
    fn single_class_rejected() {
        assert!(matches!(average_precision(&[0.1, 0.2], &[true, true]), Err(Error::Metric(_))));
        assert!(matches!(auc_roc(&[0.1, 0.2], &[false, false]), Err(Error::Metric(_))));
    }

    #[test]
    fn single_relation_micro_equals_macro() {
        let r = aggregate(&[ScoredRelation {
            relation: "cc".into(),
            scores: vec![0.2, 0.9, 0.4, 0.5],
            labels: vec![false, true, true, false],
        }])
        .unwrap();
        assert_eq!(r.micro, r.macro_);
        assert_eq!(r.macro_.ap, r.relations[0].ap);
    }

    #[test]
    fn macro_is_unweighted_mean() {
        // AP values of 0.782 and 0.980 average to 0.881
        let mean = (0.782 + 0.980) / 2.0;
        assert!((mean - 0.881f64).abs() < 1e-12);
        let a = ScoredRelation {
            relation: "a".into(),
            scores: vec![0.9, 0.8, 0.7],
            labels: vec![true, false, true],
        };
        let b = ScoredRelation {
            relation: "b".into(),
            scores: vec![0.9, 0.1],
            labels: vec![true, false],
        };
        let r = aggregate(&[a, b]).unwrap();
        assert!((r.macro_.ap - (5.0 / 6.0 + 1.0) / 2.0).abs() < 1e-15);
        assert!((r.macro_.auc_roc - 0.75).abs() < 1e-15);
    }
}
