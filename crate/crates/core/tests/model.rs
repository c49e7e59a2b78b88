mod common;

use common::{dense_layer, random_case_law_graph, rng};
use hge_core::enrichment::{enrich, EnrichmentSpec, MetaFeature};
use hge_core::graph::{GraphBuilder, HeteroGraph, RelationId};
use hge_core::model::{
    encode, hge_layer, init_params, joint_loss, rgcn_layer, score_target, EncoderConfig, LinkBatch,
    ModelParams, PreparedGraph,
};
use hge_core::numerics::{grad_check, DenseMatrix};
use rand::Rng;

fn targets(g: &HeteroGraph) -> Vec<RelationId> {
    vec![
        g.relation_id("case", "cites_case", "case").unwrap(),
        g.relation_id("case", "cites_law", "law").unwrap(),
    ]
}

fn enriched(seed: u64, n_cases: usize, n_laws: usize) -> HeteroGraph {
    let mut r = rng(seed);
    let g = random_case_law_graph(n_cases, n_laws, 3, 4, 0.3, &mut r);
    enrich(&g, &EnrichmentSpec::full(vec![MetaFeature::new("case", "court")])).unwrap()
}

fn random_inputs(g: &HeteroGraph, width: usize, seed: u64) -> Vec<DenseMatrix<f64>> {
    let mut r = rng(seed);
    g.node_type_ids()
        .map(|t| DenseMatrix::from_fn(g.node_count(t), width, |_, _| r.gen_range(-2.0..2.0)))
        .collect()
}

#[test]
fn hge_layer_matches_dense_oracle() {
    for seed in 0..20 {
        let g = enriched(seed, 9, 4);
        let cfg = EncoderConfig::hge(vec![5]);
        let pg = PreparedGraph::<f64>::new(&g, &cfg, &targets(&g)).unwrap();
        let params: ModelParams<f64> = init_params(&cfg, &pg.schema(), &mut rng(seed + 100)).unwrap();
        let input = random_inputs(&g, 5, seed + 200);
        let got = hge_layer(&pg, &input, &params.layers[0]).unwrap();
        let want = dense_layer(&g, &input, &params.layers[0], true);
        for (a, b) in got.iter().zip(&want) {
            assert!(a.max_abs_diff(b).unwrap() < 1e-10, "seed {seed}");
        }
    }
}

#[test]
fn rgcn_layer_matches_dense_oracle() {
    for seed in 0..20 {
        let g = enriched(seed, 9, 4);
        let cfg = EncoderConfig::rgcn(vec![5]);
        let pg = PreparedGraph::<f64>::new(&g, &cfg, &targets(&g)).unwrap();
        let params: ModelParams<f64> = init_params(&cfg, &pg.schema(), &mut rng(seed + 100)).unwrap();
        let input = random_inputs(&g, 5, seed + 300);
        let got = rgcn_layer(&pg, &input, &params.layers[0]).unwrap();
        let want = dense_layer(&g, &input, &params.layers[0], false);
        for (a, b) in got.iter().zip(&want) {
            assert!(a.max_abs_diff(b).unwrap() < 1e-10, "seed {seed}");
        }
    }
}

fn no_edge_graph() -> HeteroGraph {
    GraphBuilder::new()
        .node_type("case", 3)
        .node_type("law", 2)
        .relation("case", "cites_case", "case", vec![])
        .relation("case", "cites_law", "law", vec![])
        .build()
        .unwrap()
        .0
}

#[test]
fn empty_neighbourhood_is_pure_residual() {
    let g = no_edge_graph();
    let cfg = EncoderConfig::hge(vec![3]);
    let pg = PreparedGraph::<f32>::new(&g, &cfg, &targets(&g)).unwrap();
    let params: ModelParams = init_params(&cfg, &pg.schema(), &mut rng(1)).unwrap();
    let input: Vec<DenseMatrix<f32>> = vec![
        DenseMatrix::from_fn(3, 3, |i, j| i as f32 - j as f32),
        DenseMatrix::from_fn(2, 3, |i, j| j as f32 - i as f32 - 0.5),
    ];
    let out = hge_layer(&pg, &input, &params.layers[0]).unwrap();
    for (o, h) in out.iter().zip(&input) {
        assert_eq!(o, &h.map(|v| v.max(0.0)));
    }
}

#[test]
fn rgcn_with_zero_self_weight_collapses() {
    let g = no_edge_graph();
    let cfg = EncoderConfig::rgcn(vec![3]);
    let pg = PreparedGraph::<f32>::new(&g, &cfg, &targets(&g)).unwrap();
    let mut params: ModelParams = init_params(&cfg, &pg.schema(), &mut rng(1)).unwrap();
    let input = vec![DenseMatrix::from_fn(3, 3, |i, j| (i + j) as f32 + 1.0), DenseMatrix::from_fn(2, 3, |_, _| 1.0)];

    params.layers[0].self_weight = Some(DenseMatrix::zeros(3, 3));
    let out = rgcn_layer(&pg, &input, &params.layers[0]).unwrap();
    assert!(out.iter().all(|m| m.data().iter().all(|&v| v == 0.0)));

    params.layers[0].self_weight = Some(DenseMatrix::identity(3));
    let out = rgcn_layer(&pg, &input, &params.layers[0]).unwrap();
    assert_eq!(out[0], input[0]);
}

#[test]
fn identity_self_relation_doubles() {
    let (g, _) = GraphBuilder::new()
        .node_type("case", 2)
        .node_type("law", 1)
        .relation("case", "cites_case", "case", vec![])
        .relation("case", "cites_law", "law", vec![])
        .relation("case", "self", "case", vec![(0, 0), (1, 1)])
        .build()
        .unwrap();
    let cfg = EncoderConfig::hge(vec![2]);
    let pg = PreparedGraph::<f32>::new(&g, &cfg, &targets(&g)).unwrap();
    let mut params: ModelParams = init_params(&cfg, &pg.schema(), &mut rng(1)).unwrap();
    for (label, w) in &mut params.layers[0].relations {
        *w = if label == "case.self.case" { DenseMatrix::identity(2) } else { DenseMatrix::zeros(2, 2) };
    }
    let h = DenseMatrix::from_rows(&[vec![1.0, -2.0], vec![0.5, 3.0]]).unwrap();
    let out = hge_layer(&pg, &[h.clone(), DenseMatrix::zeros(1, 2)], &params.layers[0]).unwrap();
    assert_eq!(out[0], h.map(|v| (2.0 * v).max(0.0)));
}

#[test]
fn isolated_node_single_layer_is_relu_of_projection() {
    let (g, _) = GraphBuilder::new()
        .node_type("case", 2)
        .node_type("law", 1)
        .relation("case", "cites_case", "case", vec![])
        .relation("case", "cites_law", "law", vec![(0, 0)])
        .features("case", DenseMatrix::from_fn(2, 3, |i, j| (i * 3 + j) as f32 - 2.0))
        .features("law", DenseMatrix::from_fn(1, 3, |_, j| j as f32))
        .build()
        .unwrap();
    let cfg = EncoderConfig::hge(vec![4]);
    let pg = PreparedGraph::<f32>::new(&g, &cfg, &targets(&g)).unwrap();
    let params: ModelParams = init_params(&cfg, &pg.schema(), &mut rng(4)).unwrap();
    let z = encode(&pg, &params, &cfg, false, &mut rng(0)).unwrap();
    let case = g.type_id("case").unwrap();
    let x = g.features(case).unwrap();
    let expected = x.matmul(params.projection("case").unwrap()).unwrap().map(|v| v.max(0.0));
    assert_eq!(z.row(case, 1), expected.row(1));
}

#[test]
fn inference_encoding_is_deterministic() {
    let g = enriched(3, 12, 5);
    let cfg = EncoderConfig::hge(vec![6, 6]);
    let pg = PreparedGraph::<f32>::new(&g, &cfg, &targets(&g)).unwrap();
    let params: ModelParams = init_params(&cfg, &pg.schema(), &mut rng(5)).unwrap();
    let a = encode(&pg, &params, &cfg, false, &mut rng(1)).unwrap();
    let b = encode(&pg, &params, &cfg, false, &mut rng(2)).unwrap();
    assert_eq!(a, b);
    assert!(a.is_finite());
}

#[test]
fn zero_weights_keep_projected_features() {
    let g = enriched(8, 10, 4);
    let cfg = EncoderConfig {
        dropout_p: 0.0,
        ..EncoderConfig::hge(vec![4, 4, 4])
    };
    let pg = PreparedGraph::<f64>::new(&g, &cfg, &targets(&g)).unwrap();
    let mut params: ModelParams<f64> = init_params(&cfg, &pg.schema(), &mut rng(5)).unwrap();
    for layer in &mut params.layers {
        for (_, w) in &mut layer.relations {
            w.fill(0.0);
        }
    }
    let z = encode(&pg, &params, &cfg, false, &mut rng(0)).unwrap();
    let case = g.type_id("case").unwrap();
    let projected = g.features(case).unwrap().cast::<f64>().matmul(params.projection("case").unwrap()).unwrap();
    assert!(z.of_type(case).max_abs_diff(&projected.map(|v| v.max(0.0))).unwrap() < 1e-12);
}

fn batches_for(g: &HeteroGraph, seed: u64) -> Vec<Option<LinkBatch>> {
    let mut r = rng(seed);
    targets(g)
        .iter()
        .map(|id| {
            let positives = g.edge_list(id).unwrap();
            let n_dst = g.node_count(id.dst);
            let negatives = positives.iter().map(|&(u, _)| (u, r.gen_range(0..n_dst))).collect();
            Some(LinkBatch { positives, negatives })
        })
        .collect()
}

#[test]
fn zero_logits_give_two_ln2() {
    let g = enriched(2, 8, 3);
    let cfg = EncoderConfig::hge(vec![4]);
    let pg = PreparedGraph::<f64>::new(&g, &cfg, &targets(&g)).unwrap();
    let mut params: ModelParams<f64> = init_params(&cfg, &pg.schema(), &mut rng(1)).unwrap();
    for (_, w) in &mut params.decoders {
        w.fill(0.0);
    }
    let out = joint_loss(&pg, &params, &cfg, &batches_for(&g, 3), false, &mut rng(0)).unwrap();
    assert!((out.loss - 2.0 * std::f64::consts::LN_2).abs() < 1e-12);
}

#[test]
fn separate_mode_leaves_other_decoder_untouched() {
    let g = enriched(2, 8, 3);
    let cfg = EncoderConfig::hge(vec![4]);
    let pg = PreparedGraph::<f64>::new(&g, &cfg, &targets(&g)).unwrap();
    let params: ModelParams<f64> = init_params(&cfg, &pg.schema(), &mut rng(1)).unwrap();
    let mut batches = batches_for(&g, 3);
    let cl_only = batches[1].clone();
    batches[1] = None;
    let out = joint_loss(&pg, &params, &cfg, &batches, false, &mut rng(0)).unwrap();
    let cl_grad = out.grads.decoder("case.cites_law.law").unwrap();
    assert!(cl_grad.data().iter().all(|&v| v == 0.0));
    assert!(out.per_target[1].is_none());

    // the joint sum decomposes into the two single-target losses
    let single_cc = out.loss;
    let single_cl = joint_loss(&pg, &params, &cfg, &[None, cl_only], false, &mut rng(0)).unwrap().loss;
    let joint = joint_loss(&pg, &params, &cfg, &batches_for(&g, 3), false, &mut rng(0)).unwrap().loss;
    assert!((joint - single_cc - single_cl).abs() < 1e-12);
}

#[test]
fn batch_errors() {
    let g = enriched(2, 8, 3);
    let cfg = EncoderConfig::hge(vec![4]);
    let pg = PreparedGraph::<f64>::new(&g, &cfg, &targets(&g)).unwrap();
    let params: ModelParams<f64> = init_params(&cfg, &pg.schema(), &mut rng(1)).unwrap();
    let empty = vec![Some(LinkBatch::default()), None];
    assert!(joint_loss(&pg, &params, &cfg, &empty, false, &mut rng(0)).is_err());
    let mut unbalanced = batches_for(&g, 3);
    unbalanced[0].as_mut().unwrap().negatives.pop();
    assert!(joint_loss(&pg, &params, &cfg, &unbalanced, false, &mut rng(0)).is_err());
}

fn check_gradients(g: &HeteroGraph, cfg: &EncoderConfig, training: bool) -> f64 {
    let pg = PreparedGraph::<f64>::new(g, cfg, &targets(g)).unwrap();
    let params: ModelParams<f64> = init_params::<f32, _>(cfg, &pg.schema(), &mut rng(11)).unwrap().cast();
    let batches = batches_for(g, 12);
    let analytic = joint_loss(&pg, &params, cfg, &batches, training, &mut rng(13)).unwrap();
    let mut probe = params.clone();
    let f = |flat: &[f64]| {
        probe.set_flat(flat).unwrap();
        joint_loss(&pg, &probe, cfg, &batches, training, &mut rng(13)).unwrap().loss
    };
    let report = grad_check(f, &params.to_flat(), &analytic.grads.to_flat(), 1e-5, 1e-6);
    assert!(report.checked > report.skipped * 10, "{report:?}");
    report.max_rel_error
}

#[test]
fn gradients_match_finite_differences_for_every_variant() {
    let g = enriched(21, 7, 3);
    let variants = [
        EncoderConfig::hge(vec![4, 4, 4]),
        EncoderConfig::rgcn(vec![4, 3]),
        EncoderConfig::gcn(vec![4, 3]),
        EncoderConfig {
            homogenize: true,
            ..EncoderConfig::hge(vec![3, 3])
        },
        EncoderConfig {
            use_residual: false,
            ..EncoderConfig::hge(vec![4, 3])
        },
    ];
    for cfg in &variants {
        let err = check_gradients(&g, cfg, true);
        assert!(err < 1e-4, "{cfg:?}: max rel err {err}");
    }
}

#[test]
fn relabeling_nodes_permutes_representations() {
    let mut r = rng(31);
    let base = random_case_law_graph(9, 4, 2, 3, 0.3, &mut r);
    let perm: Vec<usize> = {
        let mut p: Vec<usize> = (0..9).collect();
        for i in (1..9).rev() {
            p.swap(i, r.gen_range(0..=i));
        }
        p
    };
    // node i of the base graph becomes node perm[i]
    let case = base.type_id("case").unwrap();
    let cc = base.relation_id("case", "cites_case", "case").unwrap();
    let cl = base.relation_id("case", "cites_law", "law").unwrap();
    let x = base.features(case).unwrap();
    let mut xp = DenseMatrix::zeros(9, x.cols());
    for i in 0..9 {
        xp.row_mut(perm[i]).copy_from_slice(x.row(i));
    }
    let courts = base.meta(case, "court").unwrap();
    let mut courts_p = vec![None; 9];
    for i in 0..9 {
        courts_p[perm[i]] = courts[i].clone();
    }
    let law = base.type_id("law").unwrap();
    let (permuted, _) = GraphBuilder::new()
        .node_type("case", 9)
        .node_type("law", 4)
        .relation("case", "cites_case", "case", base.edge_list(&cc).unwrap().iter().map(|&(a, b)| (perm[a], perm[b])).collect())
        .relation("case", "cites_law", "law", base.edge_list(&cl).unwrap().iter().map(|&(a, b)| (perm[a], b)).collect())
        .features("case", xp)
        .features("law", base.features(law).unwrap().clone())
        .meta("case", "court", courts_p)
        .build()
        .unwrap();

    let spec = EnrichmentSpec::full(vec![MetaFeature::new("case", "court")]);
    let (ga, gb) = (enrich(&base, &spec).unwrap(), enrich(&permuted, &spec).unwrap());
    let cfg = EncoderConfig::hge(vec![4, 4]);
    let pa = PreparedGraph::<f64>::new(&ga, &cfg, &targets(&ga)).unwrap();
    let pb = PreparedGraph::<f64>::new(&gb, &cfg, &targets(&gb)).unwrap();
    let params: ModelParams<f64> = init_params(&cfg, &pa.schema(), &mut rng(3)).unwrap();
    let za = encode(&pa, &params, &cfg, false, &mut rng(0)).unwrap();
    let zb = encode(&pb, &params, &cfg, false, &mut rng(0)).unwrap();
    for i in 0..9 {
        for (a, b) in za.row(case, i).iter().zip(zb.row(case, perm[i])) {
            assert!((a - b).abs() < 1e-12);
        }
    }
    let pairs: Vec<(usize, usize)> = (0..9).map(|i| (i, (i + 1) % 9)).collect();
    let pairs_p: Vec<(usize, usize)> = pairs.iter().map(|&(a, b)| (perm[a], perm[b])).collect();
    let la = score_target(&pa, &za, &params, 0, &pairs).unwrap();
    let lb = score_target(&pb, &zb, &params, 0, &pairs_p).unwrap();
    for (a, b) in la.iter().zip(&lb) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn batch_decode_equals_single_decodes() {
    use hge_core::model::{decode, decode_pairs};
    let mut r = rng(17);
    let zs = DenseMatrix::<f64>::from_fn(10, 5, |_, _| r.gen_range(-1.0..1.0));
    let zd = DenseMatrix::<f64>::from_fn(12, 5, |_, _| r.gen_range(-1.0..1.0));
    let w = DenseMatrix::<f64>::from_fn(5, 5, |_, _| r.gen_range(-1.0..1.0));
    let pairs: Vec<(usize, usize)> = (0..100).map(|_| (r.gen_range(0..10), r.gen_range(0..12))).collect();
    let batch = decode_pairs(&zs, &zd, &w, &pairs).unwrap();
    for (&(u, v), b) in pairs.iter().zip(batch) {
        assert!((decode(zs.row(u), zd.row(v), &w).unwrap() - b).abs() < 1e-12);
    }
}
