//! Relational message passing: input projection followed by stacked
//! convolutions, with a hand-derived backward pass.
//!
//! Node `i` of type `src(r)` averages the representations of its CSR row
//! neighbours under every relation `r`, transforms each relation's mean by
//! `W_r` and sums. The HGE variant adds the previous representation
//! unchanged (general residual); RGCN adds `W_0 h_i` instead; GCN runs on a
//! single homogenized relation.

use rand::Rng;

use super::config::{DropoutPlacement, EncoderConfig};
use super::params::{LayerParams, ModelParams, ModelSchema};
use crate::error::{Error, Result};
use crate::graph::{HeteroGraph, NodeTypeId, RelationId};
use crate::numerics::{dropout, gemm_into, relu, relu_backward, Csr, DenseMatrix, NormalizedAdjacency, Scalar};

pub const HOMOGENEOUS_RELATION: &str = "homogeneous";

struct MessageRelation {
    label: String,
    /// Block whose rows aggregate (relation source type).
    out_block: usize,
    /// Block being aggregated over (relation destination type).
    in_block: usize,
    adjacency: NormalizedAdjacency,
}

impl MessageRelation {
    /// Transform the smaller side: `A (H W)` when it has fewer rows than `(A H) W`.
    fn transform_first(&self) -> bool {
        self.adjacency.n_cols() < self.adjacency.n_rows()
    }
}

/// A decoder target resolved against a graph.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Target {
    pub label: String,
    pub src_type: NodeTypeId,
    pub dst_type: NodeTypeId,
}

/// Graph structure and features laid out for the encoder.
///
/// Heterogeneous mode uses one block per node type; homogeneous mode stacks
/// all types into a single block in type order.
pub struct PreparedGraph<T: Scalar = f32> {
    type_names: Vec<String>,
    type_counts: Vec<usize>,
    features: Vec<Option<DenseMatrix<T>>>,
    /// (block, row offset) of each node type.
    placement: Vec<(usize, usize)>,
    blocks: Vec<usize>,
    relations: Vec<MessageRelation>,
    targets: Vec<Target>,
}

impl<T: Scalar> PreparedGraph<T> {
    pub fn new(g: &HeteroGraph, cfg: &EncoderConfig, targets: &[RelationId]) -> Result<Self> {
        let types: Vec<NodeTypeId> = g.node_type_ids().collect();
        let type_names = types.iter().map(|&t| g.type_name(t).to_string()).collect();
        let type_counts: Vec<usize> = types.iter().map(|&t| g.node_count(t)).collect();
        let features = types.iter().map(|&t| g.features(t).map(DenseMatrix::cast)).collect();
        let targets = targets
            .iter()
            .map(|id| {
                g.relation_index(id)?;
                Ok(Target {
                    label: g.relation_label(id),
                    src_type: id.src,
                    dst_type: id.dst,
                })
            })
            .collect::<Result<Vec<_>>>()?;

        let (placement, blocks, relations) = if cfg.is_homogeneous() {
            let mut offsets = Vec::with_capacity(type_counts.len());
            let mut total = 0;
            for &c in &type_counts {
                offsets.push(total);
                total += c;
            }
            let mut edges = Vec::with_capacity(2 * g.total_edges() + total);
            for rel in g.relations() {
                let (os, od) = (offsets[rel.id.src.0], offsets[rel.id.dst.0]);
                for (s, d) in rel.adjacency.edges() {
                    edges.push((os + s, od + d));
                    edges.push((od + d, os + s));
                }
            }
            if cfg.variant == super::config::EncoderVariant::Gcn {
                edges.extend((0..total).map(|i| (i, i)));
            }
            let (csr, _) = Csr::from_edges(total, total, &edges);
            let rel = MessageRelation {
                label: HOMOGENEOUS_RELATION.to_string(),
                out_block: 0,
                in_block: 0,
                adjacency: NormalizedAdjacency::new(&csr),
            };
            (offsets.into_iter().map(|o| (0, o)).collect(), vec![total], vec![rel])
        } else {
            let relations = g
                .relations()
                .iter()
                .map(|rel| MessageRelation {
                    label: g.relation_label(&rel.id),
                    out_block: rel.id.src.0,
                    in_block: rel.id.dst.0,
                    adjacency: NormalizedAdjacency::new(&rel.adjacency),
                })
                .collect();
            (
                (0..types.len()).map(|t| (t, 0)).collect(),
                type_counts.clone(),
                relations,
            )
        };
        Ok(Self {
            type_names,
            type_counts,
            features,
            placement,
            blocks,
            relations,
            targets,
        })
    }

    pub fn schema(&self) -> ModelSchema {
        ModelSchema {
            node_types: self
                .type_names
                .iter()
                .zip(&self.features)
                .map(|(n, f)| (n.clone(), f.as_ref().map(DenseMatrix::cols)))
                .collect(),
            relations: self.relations.iter().map(|r| r.label.clone()).collect(),
            targets: self.targets.iter().map(|t| t.label.clone()).collect(),
        }
    }

    pub fn targets(&self) -> &[Target] {
        &self.targets
    }

    pub fn type_count(&self, t: NodeTypeId) -> usize {
        self.type_counts[t.0]
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    /// Block and row offset holding node type `t`.
    pub fn placement(&self, t: NodeTypeId) -> (usize, usize) {
        self.placement[t.0]
    }

    fn resolve_layer<'p>(&self, layer: &'p LayerParams<T>) -> Result<Vec<&'p DenseMatrix<T>>> {
        self.relations
            .iter()
            .map(|r| {
                layer.weight(&r.label).ok_or_else(|| {
                    Error::Schema(format!("no layer weight for relation `{}`", r.label))
                })
            })
            .collect()
    }
}

/// Final node representations, laid out in the blocks of a [`PreparedGraph`].
#[derive(Clone, Debug, PartialEq)]
pub struct NodeRepresentations<T: Scalar = f32> {
    pub blocks: Vec<DenseMatrix<T>>,
    placement: Vec<(usize, usize)>,
    counts: Vec<usize>,
}

impl<T: Scalar> NodeRepresentations<T> {
    pub fn row(&self, t: NodeTypeId, i: usize) -> &[T] {
        let (b, off) = self.placement[t.0];
        self.blocks[b].row(off + i)
    }

    /// Copy of the representations of one node type.
    pub fn of_type(&self, t: NodeTypeId) -> DenseMatrix<T> {
        let (b, off) = self.placement[t.0];
        self.blocks[b].slice_rows(off, self.counts[t.0])
    }

    pub fn is_finite(&self) -> bool {
        self.blocks.iter().all(DenseMatrix::is_finite)
    }
}

struct LayerCache<T: Scalar> {
    input: Vec<DenseMatrix<T>>,
    /// `A_r H` per relation when aggregating first; `None` when transforming first.
    aggregated: Vec<Option<DenseMatrix<T>>>,
    pre: Vec<DenseMatrix<T>>,
    masks: Vec<Option<DenseMatrix<T>>>,
}

pub(crate) struct ForwardPass<T: Scalar> {
    pub output: Vec<DenseMatrix<T>>,
    layers: Vec<LayerCache<T>>,
}

#[derive(Clone, Copy)]
struct LayerKind {
    residual: bool,
    self_weight: bool,
}

fn project_inputs<T: Scalar>(pg: &PreparedGraph<T>, params: &ModelParams<T>, d0: usize) -> Result<Vec<DenseMatrix<T>>> {
    let mut blocks: Vec<DenseMatrix<T>> = pg.blocks.iter().map(|&n| DenseMatrix::zeros(n, d0)).collect();
    for (t, name) in pg.type_names.iter().enumerate() {
        let Some(x) = &pg.features[t] else { continue };
        let p = params
            .projection(name)
            .ok_or_else(|| Error::Schema(format!("no input projection for node type `{name}`")))?;
        if p.cols() != d0 || p.rows() != x.cols() {
            return Err(Error::Dimension(format!(
                "projection for `{name}` is {}x{}, expected {}x{d0}",
                p.rows(),
                p.cols(),
                x.cols()
            )));
        }
        let (b, off) = pg.placement[t];
        if pg.blocks[b] == x.rows() && off == 0 {
            blocks[b] = x.matmul(p)?;
        } else {
            let h = x.matmul(p)?;
            for i in 0..h.rows() {
                blocks[b].row_mut(off + i).copy_from_slice(h.row(i));
            }
        }
    }
    Ok(blocks)
}

fn layer_forward<T: Scalar>(
    pg: &PreparedGraph<T>,
    input: &[DenseMatrix<T>],
    layer: &LayerParams<T>,
    kind: LayerKind,
) -> Result<(Vec<DenseMatrix<T>>, Vec<Option<DenseMatrix<T>>>)> {
    if input.len() != pg.blocks.len() {
        return Err(Error::Dimension(format!(
            "{} input blocks for {} node blocks",
            input.len(),
            pg.blocks.len()
        )));
    }
    let weights = pg.resolve_layer(layer)?;
    let dout = weights
        .first()
        .map(|w| w.cols())
        .or_else(|| layer.self_weight.as_ref().map(DenseMatrix::cols))
        .unwrap_or_else(|| input.first().map_or(0, DenseMatrix::cols));
    let mut pre: Vec<DenseMatrix<T>> = input
        .iter()
        .map(|h| {
            if kind.residual {
                if h.cols() != dout {
                    return Err(Error::Dimension(format!(
                        "residual needs equal widths, got {} -> {dout}",
                        h.cols()
                    )));
                }
                Ok(h.clone())
            } else {
                Ok(DenseMatrix::zeros(h.rows(), dout))
            }
        })
        .collect::<Result<_>>()?;
    let mut aggregated = Vec::with_capacity(pg.relations.len());
    for (rel, w) in pg.relations.iter().zip(weights) {
        let x = &input[rel.in_block];
        if rel.transform_first() {
            let t = x.matmul(w)?;
            let c = rel.adjacency.spmm(&t)?;
            pre[rel.out_block].add_assign(&c)?;
            aggregated.push(None);
        } else {
            let m = rel.adjacency.spmm(x)?;
            gemm_into(&mut pre[rel.out_block], &m, false, w, false, T::one())?;
            aggregated.push(Some(m));
        }
    }
    if kind.self_weight {
        let w0 = layer
            .self_weight
            .as_ref()
            .ok_or_else(|| Error::Schema("RGCN layer without self weight".into()))?;
        for (p, h) in pre.iter_mut().zip(input) {
            gemm_into(p, h, false, w0, false, T::one())?;
        }
    }
    Ok((pre, aggregated))
}

/// One HGE layer: `relu(H + Σ_r mean_r(H) W_r)` per node type.
pub fn hge_layer<T: Scalar>(
    pg: &PreparedGraph<T>,
    input: &[DenseMatrix<T>],
    layer: &LayerParams<T>,
) -> Result<Vec<DenseMatrix<T>>> {
    let kind = LayerKind {
        residual: true,
        self_weight: false,
    };
    let (pre, _) = layer_forward(pg, input, layer, kind)?;
    Ok(pre.iter().map(relu).collect())
}

/// One RGCN layer: `relu(Σ_r mean_r(H) W_r + H W_0)` per node type.
pub fn rgcn_layer<T: Scalar>(
    pg: &PreparedGraph<T>,
    input: &[DenseMatrix<T>],
    layer: &LayerParams<T>,
) -> Result<Vec<DenseMatrix<T>>> {
    let kind = LayerKind {
        residual: false,
        self_weight: true,
    };
    let (pre, _) = layer_forward(pg, input, layer, kind)?;
    Ok(pre.iter().map(relu).collect())
}

pub(crate) fn forward<T: Scalar, R: Rng + ?Sized>(
    pg: &PreparedGraph<T>,
    params: &ModelParams<T>,
    cfg: &EncoderConfig,
    training: bool,
    rng: &mut R,
) -> Result<ForwardPass<T>> {
    cfg.validate()?;
    if params.layers.len() != cfg.layer_sizes.len() {
        return Err(Error::Schema(format!(
            "{} parameter layers for {} configured layers",
            params.layers.len(),
            cfg.layer_sizes.len()
        )));
    }
    let kind = LayerKind {
        residual: cfg.residual(),
        self_weight: cfg.self_weight(),
    };
    let n_layers = params.layers.len();
    let mut h = project_inputs(pg, params, cfg.layer_sizes[0])?;
    let mut caches = Vec::with_capacity(n_layers);
    for (l, layer) in params.layers.iter().enumerate() {
        let (pre, aggregated) = layer_forward(pg, &h, layer, kind)?;
        let apply_dropout = match cfg.dropout_placement {
            DropoutPlacement::EveryLayer => true,
            DropoutPlacement::FinalOnly => l + 1 == n_layers,
        };
        let mut out = Vec::with_capacity(pre.len());
        let mut masks = Vec::with_capacity(pre.len());
        for p in &pre {
            let act = relu(p);
            if apply_dropout {
                let (o, m) = dropout(&act, cfg.dropout_p, training, rng)?;
                out.push(o);
                masks.push(m);
            } else {
                out.push(act);
                masks.push(None);
            }
        }
        caches.push(LayerCache {
            input: std::mem::replace(&mut h, out),
            aggregated,
            pre,
            masks,
        });
    }
    Ok(ForwardPass {
        output: h,
        layers: caches,
    })
}

/// Computes node representations. With `training` off the result is
/// deterministic and does not consume randomness.
pub fn encode<T: Scalar, R: Rng + ?Sized>(
    pg: &PreparedGraph<T>,
    params: &ModelParams<T>,
    cfg: &EncoderConfig,
    training: bool,
    rng: &mut R,
) -> Result<NodeRepresentations<T>> {
    let pass = forward(pg, params, cfg, training, rng)?;
    Ok(NodeRepresentations {
        blocks: pass.output,
        placement: pg.placement.clone(),
        counts: pg.type_counts.clone(),
    })
}

/// Back-propagates `grad_out` (gradient w.r.t. the final blocks) into `grads`.
pub(crate) fn backward<T: Scalar>(
    pg: &PreparedGraph<T>,
    params: &ModelParams<T>,
    cfg: &EncoderConfig,
    pass: &ForwardPass<T>,
    mut grad_out: Vec<DenseMatrix<T>>,
    grads: &mut ModelParams<T>,
) -> Result<()> {
    let residual = cfg.residual();
    for l in (0..params.layers.len()).rev() {
        let cache = &pass.layers[l];
        let layer = &params.layers[l];
        let weights = pg.resolve_layer(layer)?;
        let mut dpre = grad_out;
        for ((d, mask), pre) in dpre.iter_mut().zip(&cache.masks).zip(&cache.pre) {
            if let Some(m) = mask {
                for (g, &k) in d.data_mut().iter_mut().zip(m.data()) {
                    *g = *g * k;
                }
            }
            relu_backward(d, pre);
        }
        let din = cfg.layer_input(l);
        let mut dinput: Vec<DenseMatrix<T>> = if residual {
            dpre.clone()
        } else {
            pg.blocks.iter().map(|&n| DenseMatrix::zeros(n, din)).collect()
        };
        if let Some(w0) = &layer.self_weight {
            let gw0 = grads.layers[l]
                .self_weight
                .as_mut()
                .ok_or_else(|| Error::Schema("gradient missing self weight".into()))?;
            for ((dp, h), di) in dpre.iter().zip(&cache.input).zip(dinput.iter_mut()) {
                gemm_into(gw0, h, true, dp, false, T::one())?;
                gemm_into(di, dp, false, w0, true, T::one())?;
            }
        }
        for (k, (rel, w)) in pg.relations.iter().zip(weights).enumerate() {
            let gw = grads.layers[l]
                .relations
                .iter_mut()
                .find(|(label, _)| *label == rel.label)
                .map(|(_, m)| m)
                .ok_or_else(|| Error::Schema(format!("gradient missing `{}`", rel.label)))?;
            let dp = &dpre[rel.out_block];
            let x = &cache.input[rel.in_block];
            match &cache.aggregated[k] {
                None => {
                    let dt = rel.adjacency.spmm_transposed(dp)?;
                    gemm_into(gw, x, true, &dt, false, T::one())?;
                    gemm_into(&mut dinput[rel.in_block], &dt, false, w, true, T::one())?;
                }
                Some(m) => {
                    gemm_into(gw, m, true, dp, false, T::one())?;
                    let dm = dp.matmul_nt(w)?;
                    let back = rel.adjacency.spmm_transposed(&dm)?;
                    dinput[rel.in_block].add_assign(&back)?;
                }
            }
        }
        grad_out = dinput;
    }

    // input projections
    for (t, name) in pg.type_names.iter().enumerate() {
        let Some(x) = &pg.features[t] else { continue };
        let (b, off) = pg.placement[t];
        let gp = grads
            .projections
            .iter_mut()
            .find(|(n, _)| n == name)
            .map(|(_, m)| m)
            .ok_or_else(|| Error::Schema(format!("gradient missing projection `{name}`")))?;
        let dh = if off == 0 && grad_out[b].rows() == x.rows() {
            std::borrow::Cow::Borrowed(&grad_out[b])
        } else {
            std::borrow::Cow::Owned(grad_out[b].slice_rows(off, x.rows()))
        };
        gemm_into(gp, x, true, &dh, false, T::one())?;
    }
    Ok(())
}
