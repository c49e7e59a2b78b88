use rand::Rng;

use super::config::EncoderConfig;
use super::encoder::{backward, forward, NodeRepresentations, PreparedGraph};
use super::params::ModelParams;
use crate::error::{Error, Result};
use crate::numerics::{bce_with_logits, DenseMatrix, Scalar};

/// Asymmetric bilinear score `z_srcᵀ W z_dst`.
pub fn decode<T: Scalar>(z_src: &[T], z_dst: &[T], w: &DenseMatrix<T>) -> Result<T> {
    if w.rows() != z_src.len() || w.cols() != z_dst.len() {
        return Err(Error::Dimension(format!(
            "decoder form {}x{} for vectors of length {} and {}",
            w.rows(),
            w.cols(),
            z_src.len(),
            z_dst.len()
        )));
    }
    let mut acc = T::zero();
    for (i, &a) in z_src.iter().enumerate() {
        let row_dot: T = w.row(i).iter().zip(z_dst).map(|(&x, &y)| x * y).sum();
        acc = acc + a * row_dot;
    }
    Ok(acc)
}

/// Scores many pairs at once: `(Z_src W)[u] · Z_dst[v]`.
pub fn decode_pairs<T: Scalar>(
    z_src: &DenseMatrix<T>,
    z_dst: &DenseMatrix<T>,
    w: &DenseMatrix<T>,
    pairs: &[(usize, usize)],
) -> Result<Vec<T>> {
    let q = z_src.matmul(w)?;
    if z_dst.cols() != q.cols() {
        return Err(Error::Dimension("decoder output width mismatch".into()));
    }
    pairs
        .iter()
        .map(|&(u, v)| {
            if u >= q.rows() || v >= z_dst.rows() {
                return Err(Error::Dimension(format!("pair ({u}, {v}) out of range")));
            }
            Ok(q.row(u).iter().zip(z_dst.row(v)).map(|(&a, &b)| a * b).sum())
        })
        .collect()
}

/// Logits for `pairs` of one decoder target.
pub fn score_target<T: Scalar>(
    pg: &PreparedGraph<T>,
    z: &NodeRepresentations<T>,
    params: &ModelParams<T>,
    target: usize,
    pairs: &[(usize, usize)],
) -> Result<Vec<T>> {
    let t = pg
        .targets()
        .get(target)
        .ok_or_else(|| Error::Schema(format!("no decoder target {target}")))?;
    let w = params
        .decoder(&t.label)
        .ok_or_else(|| Error::Schema(format!("no decoder form for `{}`", t.label)))?;
    decode_pairs(&z.of_type(t.src_type), &z.of_type(t.dst_type), w, pairs)
}

/// Balanced positives and negatives for one target relation.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LinkBatch {
    pub positives: Vec<(usize, usize)>,
    pub negatives: Vec<(usize, usize)>,
}

impl LinkBatch {
    fn pairs_and_labels<T: Scalar>(&self) -> (Vec<(usize, usize)>, Vec<T>) {
        let pairs = self.positives.iter().chain(&self.negatives).copied().collect();
        let labels = std::iter::repeat_n(T::one(), self.positives.len())
            .chain(std::iter::repeat_n(T::zero(), self.negatives.len()))
            .collect();
        (pairs, labels)
    }
}

#[derive(Clone, Debug)]
pub struct LossOutput<T: Scalar> {
    pub loss: T,
    /// Loss of each target; `None` where the target was excluded.
    pub per_target: Vec<Option<T>>,
    pub grads: ModelParams<T>,
}

/// Sum over the included targets of the mean binary cross-entropy of their
/// batch, plus gradients for every parameter.
///
/// `batches[k]` belongs to `pg.targets()[k]`; `None` excludes that target
/// (separate training), which leaves its decoder gradient exactly zero.
pub fn joint_loss<T: Scalar, R: Rng + ?Sized>(
    pg: &PreparedGraph<T>,
    params: &ModelParams<T>,
    cfg: &EncoderConfig,
    batches: &[Option<LinkBatch>],
    training: bool,
    rng: &mut R,
) -> Result<LossOutput<T>> {
    if batches.len() != pg.targets().len() {
        return Err(Error::Batch(format!(
            "{} batches for {} targets",
            batches.len(),
            pg.targets().len()
        )));
    }
    if batches.iter().all(Option::is_none) {
        return Err(Error::Batch("no target relation included".into()));
    }
    for (t, b) in pg.targets().iter().zip(batches) {
        if let Some(b) = b {
            if b.positives.is_empty() {
                return Err(Error::Batch(format!("empty batch for `{}`", t.label)));
            }
            if b.positives.len() != b.negatives.len() {
                return Err(Error::Batch(format!(
                    "unbalanced batch for `{}`: {} positives, {} negatives",
                    t.label,
                    b.positives.len(),
                    b.negatives.len()
                )));
            }
        }
    }

    let pass = forward(pg, params, cfg, training, rng)?;
    let z = &pass.output;
    let mut grads = params.zeros_like();
    let mut dz: Vec<DenseMatrix<T>> = z.iter().map(|m| DenseMatrix::zeros(m.rows(), m.cols())).collect();
    let mut total = T::zero();
    let mut per_target = Vec::with_capacity(batches.len());

    for (target, batch) in pg.targets().iter().zip(batches) {
        let Some(batch) = batch else {
            per_target.push(None);
            continue;
        };
        let w = params
            .decoder(&target.label)
            .ok_or_else(|| Error::Schema(format!("no decoder form for `{}`", target.label)))?;
        let (bs, os) = pg.placement(target.src_type);
        let (bd, od) = pg.placement(target.dst_type);
        let ns = pg.type_count(target.src_type);
        let nd = pg.type_count(target.dst_type);
        let zs = z[bs].slice_rows(os, ns);
        let zd = z[bd].slice_rows(od, nd);

        let (pairs, labels) = batch.pairs_and_labels::<T>();
        let logits = decode_pairs(&zs, &zd, w, &pairs)?;
        let (loss, dlogits) = bce_with_logits(&logits, &labels)?;
        total = total + loss;
        per_target.push(Some(loss));

        let q = zs.matmul(w)?;
        let mut dq = DenseMatrix::zeros(ns, q.cols());
        for (&(u, v), &g) in pairs.iter().zip(&dlogits) {
            for (a, &b) in dq.row_mut(u).iter_mut().zip(zd.row(v)) {
                *a = *a + g * b;
            }
            let dst_row = dz[bd].row_mut(od + v);
            for (a, &b) in dst_row.iter_mut().zip(q.row(u)) {
                *a = *a + g * b;
            }
        }
        let gw = grads
            .decoders
            .iter_mut()
            .find(|(n, _)| *n == target.label)
            .map(|(_, m)| m)
            .expect("zeros_like keeps decoder names");
        *gw = zs.matmul_tn(&dq)?;
        let dzs = dq.matmul_nt(w)?;
        for i in 0..ns {
            for (a, &b) in dz[bs].row_mut(os + i).iter_mut().zip(dzs.row(i)) {
                *a = *a + b;
            }
        }
    }

    backward(pg, params, cfg, &pass, dz, &mut grads)?;
    Ok(LossOutput {
        loss: total,
        per_target,
        grads,
    })
}
