#![allow(dead_code)]

use hge_core::graph::{GraphBuilder, HeteroGraph};
use hge_core::model::LayerParams;
use hge_core::numerics::DenseMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_features(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DenseMatrix<f32> {
    DenseMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-2.0..2.0))
}

/// Random case/law graph with a `court` meta column; every case has at least
/// one citation so aggregation paths are exercised.
pub fn random_case_law_graph(
    n_cases: usize,
    n_laws: usize,
    n_courts: usize,
    feature_dim: usize,
    density: f64,
    rng: &mut ChaCha8Rng,
) -> HeteroGraph {
    let mut cc = Vec::new();
    let mut cl = Vec::new();
    for i in 0..n_cases {
        for j in 0..i {
            if rng.gen_bool(density) {
                cc.push((i, j));
            }
        }
        for j in 0..n_laws {
            if rng.gen_bool(density) {
                cl.push((i, j));
            }
        }
        cl.push((i, rng.gen_range(0..n_laws)));
    }
    // the first n_courts cases cover every court, the rest are random
    let courts = (0..n_cases)
        .map(|i| {
            let c = if i < n_courts { i } else { rng.gen_range(0..n_courts) };
            Some(format!("court{c}"))
        })
        .collect();
    let dates = (0..n_cases as i64).map(|i| 1000 + i).collect();
    GraphBuilder::new()
        .node_type("case", n_cases)
        .node_type("law", n_laws)
        .relation("case", "cites_case", "case", cc)
        .relation("case", "cites_law", "law", cl)
        .features("case", random_features(n_cases, feature_dim, rng))
        .features("law", random_features(n_laws, feature_dim, rng))
        .dates("case", dates)
        .meta("case", "court", courts)
        .build()
        .unwrap()
        .0
}

/// Dense re-implementation of one convolution: for every type t,
/// pre_t = [H_t] + Σ_{r: src(r)=t} D_r⁻¹ A_r H_dst(r) W_r + [H_t W_0].
pub fn dense_layer(
    g: &HeteroGraph,
    input: &[DenseMatrix<f64>],
    layer: &LayerParams<f64>,
    residual: bool,
) -> Vec<DenseMatrix<f64>> {
    let dout = layer.relations[0].1.cols();
    let mut out: Vec<Vec<Vec<f64>>> = input
        .iter()
        .map(|h| {
            (0..h.rows())
                .map(|i| if residual { h.row(i).to_vec() } else { vec![0.0; dout] })
                .collect()
        })
        .collect();
    for rel in g.relations() {
        let w = layer.weight(&g.relation_label(&rel.id)).unwrap();
        let (s, d) = (rel.id.src.0, rel.id.dst.0);
        let ns = g.node_count(rel.id.src);
        let nd = g.node_count(rel.id.dst);
        let mut adj = vec![vec![0.0; nd]; ns];
        for (i, j) in g.edge_list(&rel.id).unwrap() {
            adj[i][j] = 1.0;
        }
        for i in 0..ns {
            let deg: f64 = adj[i].iter().sum();
            if deg == 0.0 {
                continue;
            }
            for c in 0..dout {
                let mut acc = 0.0;
                for j in 0..nd {
                    if adj[i][j] == 0.0 {
                        continue;
                    }
                    for k in 0..w.rows() {
                        acc += input[d].get(j, k) * w.get(k, c);
                    }
                }
                out[s][i][c] += acc / deg;
            }
        }
    }
    if let Some(w0) = &layer.self_weight {
        for (t, h) in input.iter().enumerate() {
            for i in 0..h.rows() {
                for c in 0..dout {
                    out[t][i][c] += (0..w0.rows()).map(|k| h.get(i, k) * w0.get(k, c)).sum::<f64>();
                }
            }
        }
    }
    out.into_iter()
        .map(|rows| DenseMatrix::from_rows(&rows).unwrap().map(|v| v.max(0.0)))
        .collect()
}
