mod common;

use std::collections::HashSet;

use hge_core::evaluation::{
    auc_roc, average_precision, build_fold, build_test_split, read_fold_manifest, read_pairs, subsample_test_edges,
    write_fold_manifest, write_pairs, SplitConfig,
};
use hge_core::graph::HeteroGraph;
use hge_core::Error;
use proptest::prelude::*;

fn scored() -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
    (2usize..80).prop_flat_map(|n| {
        (
            prop::collection::vec((0u32..20).prop_map(|v| v as f64 / 20.0), n),
            prop::collection::vec(any::<bool>(), n),
        )
            .prop_filter("both classes", |(_, l)| l.iter().any(|&x| x) && l.iter().any(|&x| !x))
    })
}

proptest! {
    #[test]
    fn auc_flips_with_labels((scores, labels) in scored()) {
        let flipped: Vec<bool> = labels.iter().map(|l| !l).collect();
        let a = auc_roc(&scores, &labels).unwrap();
        let b = auc_roc(&scores, &flipped).unwrap();
        prop_assert!((a + b - 1.0).abs() < 1e-12);
    }

    #[test]
    fn metrics_are_invariant_to_monotone_rescaling((scores, labels) in scored()) {
        let rescaled: Vec<f64> = scores.iter().map(|s| 3.0 * s - 7.0).collect();
        prop_assert_eq!(auc_roc(&scores, &labels).unwrap(), auc_roc(&rescaled, &labels).unwrap());
        prop_assert_eq!(average_precision(&scores, &labels).unwrap(), average_precision(&rescaled, &labels).unwrap());
    }

    #[test]
    fn ap_lies_between_worst_and_perfect_ranking((scores, labels) in scored()) {
        let ap = average_precision(&scores, &labels).unwrap();
        let pos = labels.iter().filter(|&&l| l).count();
        let neg = labels.len() - pos;
        // every positive ranked below every negative
        let worst = (1..=pos).map(|i| i as f64 / (neg + i) as f64).sum::<f64>() / pos as f64;
        prop_assert!(ap <= 1.0 + 1e-12);
        prop_assert!(ap >= worst - 1e-12);
    }

    #[test]
    fn ceil_rule_holds_out_per_source(ratio in 0.0f64..=1.0, seed in 0u64..50) {
        let g = graph(seed);
        let fold = build_fold(&g, 2, &SplitConfig { n_folds: 3, ..SplitConfig::default() }).unwrap();
        let sub = subsample_test_edges(&fold, ratio, seed).unwrap();
        for (k, edges) in fold.test_edges.iter().enumerate() {
            for src in edges.iter().map(|e| e.0).collect::<HashSet<_>>() {
                let deg = edges.iter().filter(|e| e.0 == src).count();
                let held = sub.held[k].iter().filter(|e| e.0 == src).count();
                prop_assert_eq!(held, ((ratio * deg as f64) - 1e-9).ceil().max(0.0) as usize);
            }
        }
    }
}

fn graph(seed: u64) -> HeteroGraph {
    common::random_case_law_graph(40, 8, 3, 4, 0.15, &mut common::rng(seed))
}

#[test]
fn misranked_examples() {
    // one negative above both positives
    let s = [0.9, 0.8, 0.7];
    let l = [false, true, true];
    assert!((average_precision(&s, &l).unwrap() - (0.5 + 2.0 / 3.0) / 2.0).abs() < 1e-15);
    assert_eq!(auc_roc(&s, &l).unwrap(), 0.0);
    assert!(matches!(auc_roc(&[f64::NAN, 0.1], &[true, false]), Err(Error::Metric(_))));
    assert!(matches!(auc_roc(&[0.1], &[true, false]), Err(Error::Metric(_))));
}

#[test]
fn default_folds_cover_later_buckets() {
    let g = graph(1);
    let cfg = SplitConfig::default();
    let folds: Vec<_> = cfg.fold_indices().map(|k| build_fold(&g, k, &cfg).unwrap()).collect();
    assert_eq!(folds.len(), 4);
    for w in folds.windows(2) {
        assert!(w[0].num_train_nodes() < w[1].num_train_nodes());
        assert!(w[0].cutoff.date < w[1].cutoff.date);
    }
    // cumulative test sets hold every case from the cutoff on
    for f in &folds {
        assert_eq!(f.num_train_nodes() + f.num_test_nodes(), 40);
    }
}

#[test]
fn non_cumulative_test_uses_one_bucket() {
    let g = graph(2);
    let cfg = SplitConfig {
        cumulative_test: false,
        ..SplitConfig::default()
    };
    let f = build_fold(&g, 1, &cfg).unwrap();
    assert_eq!(f.num_test_nodes(), 8);
}

#[test]
fn invalid_configs_are_rejected() {
    let g = graph(3);
    let cfg = SplitConfig::default();
    assert!(matches!(build_fold(&g, 0, &cfg), Err(Error::Fold(_) | Error::Config(_))));
    assert!(matches!(build_fold(&g, 5, &cfg), Err(Error::Fold(_) | Error::Config(_))));
    let ratio = SplitConfig {
        test_ratio: 1.5,
        ..SplitConfig::default()
    };
    assert!(matches!(ratio.validate(), Err(Error::Config(_))));
    let zero = SplitConfig {
        test_ratio: 0.0,
        ..SplitConfig::default()
    };
    let f = build_fold(&g, 2, &zero).unwrap();
    assert!(matches!(build_test_split(&f, 0), Err(Error::Config(_))));
}

#[test]
fn test_splits_are_reproducible_and_distinct() {
    let g = graph(4);
    let cfg = SplitConfig {
        test_ratio: 0.5,
        ..SplitConfig::default()
    };
    let f = build_fold(&g, 3, &cfg).unwrap();
    let a = build_test_split(&f, 0).unwrap();
    assert_eq!(a, build_test_split(&f, 0).unwrap());
    let b = build_test_split(&f, 1).unwrap();
    assert_ne!(a.edge_seed, b.edge_seed);
    assert_ne!(a.indicators, b.indicators);
}

#[test]
fn manifest_round_trip_in_base_indices() {
    let g = graph(5);
    let cfg = SplitConfig::default();
    let f = build_fold(&g, 2, &cfg).unwrap();
    let splits: Vec<_> = (0..cfg.n_test_splits).map(|s| build_test_split(&f, s).unwrap()).collect();
    let dir = tempfile::tempdir().unwrap();
    let path = write_fold_manifest(dir.path(), &f, &splits).unwrap();
    let m = read_fold_manifest(&path).unwrap();
    assert_eq!(m.fold, 2);
    assert_eq!(m.splits.len(), 5);
    assert_eq!(m.test_nodes, f.num_test_nodes());
    let cc = &f.targets[0];
    let base_edges: HashSet<(u64, u64)> =
        g.edge_list(cc).unwrap().into_iter().map(|(u, v)| (u as u64, v as u64)).collect();
    for (record, split) in m.splits.iter().zip(&splits) {
        assert_eq!(record.edge_seed, split.edge_seed);
        let pos = &record.pairs[0];
        assert_eq!((pos.kind.as_str(), pos.count), ("positives", split.indicators[0].positives.len()));
        for p in read_pairs(&dir.path().join(&pos.file)).unwrap() {
            assert!(base_edges.contains(&p));
        }
        for p in read_pairs(&dir.path().join(&record.pairs[1].file)).unwrap() {
            assert!(!base_edges.contains(&p));
        }
    }
}

#[test]
fn truncated_pair_file_is_a_load_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.bin");
    write_pairs(&path, &[(1, 2), (3, 4)]).unwrap();
    assert_eq!(read_pairs(&path).unwrap(), vec![(1, 2), (3, 4)]);
    let bytes = std::fs::read(&path).unwrap();
    std::fs::write(&path, &bytes[..20]).unwrap();
    assert!(matches!(read_pairs(&path), Err(Error::Load { .. })));
}
