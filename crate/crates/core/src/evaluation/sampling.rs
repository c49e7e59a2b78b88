use rand::Rng;

use crate::error::Result;
use crate::graph::{HeteroGraph, RelationId};
use crate::seed;

const MAX_REJECTIONS: usize = 100;

/// Negatives paired with the positives they were drawn for; positives whose
/// source already links to every candidate are dropped from both lists.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct NegativeSample {
    pub positives: Vec<(usize, usize)>,
    pub negatives: Vec<(usize, usize)>,
    /// Positives skipped because no valid negative exists for their source.
    pub unsatisfiable: usize,
}

/// One negative `(u, v')` per positive `(u, v)` with `v'` uniform over
/// `0..n_dst` subject to `!is_edge(u, v')`. Rejection sampling is tried
/// first; after 100 misses the complement is enumerated explicitly.
pub fn sample_negatives_with<R, F>(positives: &[(usize, usize)], n_dst: usize, is_edge: F, rng: &mut R) -> NegativeSample
where
    R: Rng + ?Sized,
    F: Fn(usize, usize) -> bool,
{
    let mut out = NegativeSample {
        positives: Vec::with_capacity(positives.len()),
        negatives: Vec::with_capacity(positives.len()),
        unsatisfiable: 0,
    };
    if n_dst == 0 {
        out.unsatisfiable = positives.len();
        return out;
    }
    for &(u, v) in positives {
        let mut found = None;
        for _ in 0..MAX_REJECTIONS {
            let cand = rng.gen_range(0..n_dst);
            if !is_edge(u, cand) {
                found = Some(cand);
                break;
            }
        }
        if found.is_none() {
            let complement: Vec<usize> = (0..n_dst).filter(|&c| !is_edge(u, c)).collect();
            if !complement.is_empty() {
                found = Some(complement[rng.gen_range(0..complement.len())]);
            }
        }
        match found {
            Some(c) => {
                out.positives.push((u, v));
                out.negatives.push((u, c));
            }
            None => out.unsatisfiable += 1,
        }
    }
    if out.unsatisfiable > 0 {
        log::warn!(
            "{} positives skipped: their source already links to every candidate",
            out.unsatisfiable
        );
    }
    out
}

/// Per-source negatives for `positives` of `relation`, checked against every
/// edge of that relation in `g`.
pub fn sample_negatives_per_source(
    positives: &[(usize, usize)],
    g: &HeteroGraph,
    relation: &RelationId,
    seed: u64,
) -> Result<NegativeSample> {
    let adj = &g.relation(relation)?.adjacency;
    let mut rng = seed::rng_from(seed, &[]);
    Ok(sample_negatives_with(
        positives,
        g.node_count(relation.dst),
        |u, v| adj.contains(u, v),
        &mut rng,
    ))
}
