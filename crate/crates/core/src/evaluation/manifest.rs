//! On-disk record of a fold: cutoffs, seeds and the exact held-out and
//! negative pairs, stored in base-graph indices.

use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::split::{Cutoff, FoldPlan, SplitConfig, TestSplit};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairFile {
    pub relation: String,
    pub kind: String,
    pub file: String,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitRecord {
    pub split: usize,
    pub test_ratio: f64,
    pub edge_seed: u64,
    pub negative_seed: u64,
    pub pairs: Vec<PairFile>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldManifest {
    pub fold: usize,
    pub cutoff: Cutoff,
    pub config: SplitConfig,
    pub train_nodes: usize,
    pub test_nodes: usize,
    pub splits: Vec<SplitRecord>,
}

/// Writes little-endian `u64` pairs.
pub fn write_pairs(path: &Path, pairs: &[(u64, u64)]) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for &(a, b) in pairs {
        w.write_all(&a.to_le_bytes())?;
        w.write_all(&b.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_pairs(path: &Path) -> Result<Vec<(u64, u64)>> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() % 16 != 0 {
        return Err(Error::Load {
            file: path.display().to_string(),
            location: format!("byte {}", bytes.len() - bytes.len() % 16),
            message: "truncated pair record".into(),
        });
    }
    Ok(bytes
        .chunks_exact(16)
        .map(|c| {
            let a = u64::from_le_bytes(c[..8].try_into().expect("8 bytes"));
            let b = u64::from_le_bytes(c[8..].try_into().expect("8 bytes"));
            (a, b)
        })
        .collect())
}

/// Writes `fold_{k}.json` plus one pair file per split, target and kind into
/// `dir`; returns the manifest path.
pub fn write_fold_manifest(dir: &Path, fold: &FoldPlan, splits: &[TestSplit]) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let labels = fold.target_labels();
    let mut records = Vec::with_capacity(splits.len());
    for s in splits {
        let mut pairs = Vec::new();
        for ((t, label), batch) in fold.targets.iter().zip(&labels).zip(&s.indicators) {
            let to_base = |&(u, v): &(usize, usize)| {
                (fold.eval_to_base(t.src, u) as u64, fold.eval_to_base(t.dst, v) as u64)
            };
            for (kind, list) in [("positives", &batch.positives), ("negatives", &batch.negatives)] {
                let file = format!("fold{}_split{}_{}_{}.bin", fold.fold, s.split, label, kind);
                let base: Vec<(u64, u64)> = list.iter().map(to_base).collect();
                write_pairs(&dir.join(&file), &base)?;
                pairs.push(PairFile {
                    relation: label.clone(),
                    kind: kind.into(),
                    file,
                    count: base.len(),
                });
            }
        }
        records.push(SplitRecord {
            split: s.split,
            test_ratio: s.test_ratio,
            edge_seed: s.edge_seed,
            negative_seed: s.negative_seed,
            pairs,
        });
    }
    let manifest = FoldManifest {
        fold: fold.fold,
        cutoff: fold.cutoff,
        config: fold.config.clone(),
        train_nodes: fold.num_train_nodes(),
        test_nodes: fold.num_test_nodes(),
        splits: records,
    };
    let path = dir.join(format!("fold_{}.json", fold.fold));
    fs::write(&path, serde_json::to_string_pretty(&manifest)?)?;
    Ok(path)
}

pub fn read_fold_manifest(path: &Path) -> Result<FoldManifest> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}
