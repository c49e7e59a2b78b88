//! Dataset bundles on disk: JSON-lines nodes, CSV edges, binary feature
//! matrices and a checksummed manifest.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::graph::{GraphBuilder, HeteroGraph, MetaColumn};
use crate::numerics::DenseMatrix;

pub const NODES_FILE: &str = "nodes.jsonl";
pub const EDGES_FILE: &str = "edges.csv";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const FEATURE_MAGIC: &[u8; 4] = b"HGEF";
pub const FEATURE_VERSION: u32 = 1;
const FEATURE_HEADER: usize = 4 + 4 + 8 + 8;

pub const CASE: &str = "case";
pub const LAW: &str = "law";
pub const CITES_CASE: &str = "cites_case";
pub const CITES_LAW: &str = "cites_law";
/// Meta column filled from case-court edges.
pub const COURT_COLUMN: &str = "court";

pub fn features_file(node_type: &str) -> String {
    format!("features_{node_type}.bin")
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub id: u64,
    #[serde(rename = "type")]
    pub node_type: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub date: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub meta: BTreeMap<String, String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub src_id: u64,
    pub dst_id: u64,
    pub relation: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    pub name: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub nodes: FileEntry,
    pub edges: FileEntry,
    pub features: BTreeMap<String, FileEntry>,
    pub feature_dims: BTreeMap<String, usize>,
    pub node_counts: BTreeMap<String, usize>,
    pub edge_counts: BTreeMap<String, usize>,
    pub date_range: Option<(String, String)>,
}

/// A dataset in file-level form: node and edge records plus one feature
/// matrix per node type, rows in node-record order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DatasetBundle {
    pub nodes: Vec<NodeRecord>,
    pub edges: Vec<EdgeRecord>,
    pub features: BTreeMap<String, DenseMatrix<f32>>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn entry(dir: &Path, name: &str) -> Result<FileEntry> {
    let bytes = fs::read(dir.join(name))?;
    Ok(FileEntry {
        name: name.to_string(),
        sha256: sha256_hex(&bytes),
        bytes: bytes.len() as u64,
    })
}

fn epoch() -> NaiveDate {
    NaiveDate::from_ymd_opt(1970, 1, 1).expect("valid date")
}

/// Days since 1970-01-01 of a `YYYY-MM-DD` date.
pub fn parse_date(s: &str) -> Option<i64> {
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .ok()
        .map(|d| (d - epoch()).num_days())
}

pub fn format_date(days: i64) -> String {
    (epoch() + chrono::Duration::days(days)).format("%Y-%m-%d").to_string()
}

pub fn write_features<W: Write>(m: &DenseMatrix<f32>, mut w: W) -> Result<()> {
    w.write_all(FEATURE_MAGIC)?;
    w.write_all(&FEATURE_VERSION.to_le_bytes())?;
    w.write_all(&(m.rows() as u64).to_le_bytes())?;
    w.write_all(&(m.cols() as u64).to_le_bytes())?;
    for v in m.data() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_features(bytes: &[u8], file: &str) -> Result<DenseMatrix<f32>> {
    let err = |location: String, message: String| Error::Load {
        file: file.to_string(),
        location,
        message,
    };
    if bytes.len() < FEATURE_HEADER {
        return Err(err(
            "byte 0".into(),
            format!("header needs {FEATURE_HEADER} bytes, file has {}", bytes.len()),
        ));
    }
    if &bytes[..4] != FEATURE_MAGIC {
        return Err(err("byte 0".into(), "bad magic, expected HGEF".into()));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != FEATURE_VERSION {
        return Err(err("byte 4".into(), format!("unsupported version {version}")));
    }
    let rows = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    let cols = u64::from_le_bytes(bytes[16..24].try_into().expect("8 bytes")) as usize;
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(4))
        .and_then(|n| n.checked_add(FEATURE_HEADER))
        .ok_or_else(|| err("byte 8".into(), format!("shape {rows}x{cols} overflows")))?;
    if bytes.len() != expected {
        return Err(err(
            format!("byte {}", bytes.len().min(expected)),
            format!("expected {expected} bytes for {rows}x{cols} floats, found {}", bytes.len()),
        ));
    }
    let data = bytes[FEATURE_HEADER..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect();
    DenseMatrix::from_vec(rows, cols, data)
}

impl DatasetBundle {
    /// Writes all files and the manifest into `dir`.
    pub fn save(&self, dir: &Path) -> Result<DatasetManifest> {
        fs::create_dir_all(dir)?;
        {
            let mut w = BufWriter::new(fs::File::create(dir.join(NODES_FILE))?);
            for n in &self.nodes {
                serde_json::to_writer(&mut w, n)?;
                w.write_all(b"\n")?;
            }
            w.flush()?;
        }
        {
            let mut w = csv::Writer::from_path(dir.join(EDGES_FILE))?;
            w.write_record(["src_id", "dst_id", "relation"])?;
            for e in &self.edges {
                w.write_record([e.src_id.to_string(), e.dst_id.to_string(), e.relation.clone()])?;
            }
            w.flush()?;
        }
        let mut features = BTreeMap::new();
        let mut feature_dims = BTreeMap::new();
        for (t, m) in &self.features {
            let name = features_file(t);
            let mut w = BufWriter::new(fs::File::create(dir.join(&name))?);
            write_features(m, &mut w)?;
            w.flush()?;
            drop(w);
            features.insert(t.clone(), entry(dir, &name)?);
            feature_dims.insert(t.clone(), m.cols());
        }
        let mut node_counts = BTreeMap::new();
        for n in &self.nodes {
            *node_counts.entry(n.node_type.clone()).or_insert(0) += 1;
        }
        let mut edge_counts = BTreeMap::new();
        for e in &self.edges {
            *edge_counts.entry(e.relation.clone()).or_insert(0) += 1;
        }
        let dates: Vec<i64> = self.nodes.iter().filter_map(|n| n.date.as_deref().and_then(parse_date)).collect();
        let date_range = match (dates.iter().min(), dates.iter().max()) {
            (Some(&lo), Some(&hi)) => Some((format_date(lo), format_date(hi))),
            _ => None,
        };
        let manifest = DatasetManifest {
            nodes: entry(dir, NODES_FILE)?,
            edges: entry(dir, EDGES_FILE)?,
            features,
            feature_dims,
            node_counts,
            edge_counts,
            date_range,
        };
        fs::write(dir.join(MANIFEST_FILE), serde_json::to_string_pretty(&manifest)? + "\n")?;
        Ok(manifest)
    }

    /// Reads a bundle and verifies every file against the manifest.
    pub fn load(dir: &Path) -> Result<(Self, DatasetManifest)> {
        let manifest_path = dir.join(MANIFEST_FILE);
        let manifest: DatasetManifest =
            serde_json::from_str(&fs::read_to_string(&manifest_path)?).map_err(|e| Error::Load {
                file: MANIFEST_FILE.into(),
                location: format!("line {}", e.line()),
                message: e.to_string(),
            })?;

        let nodes_bytes = fs::read(dir.join(&manifest.nodes.name))?;
        let mut nodes = Vec::new();
        for (i, line) in BufReader::new(nodes_bytes.as_slice()).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            nodes.push(serde_json::from_str::<NodeRecord>(&line).map_err(|e| Error::Load {
                file: manifest.nodes.name.clone(),
                location: format!("line {}", i + 1),
                message: e.to_string(),
            })?);
        }

        let edges_bytes = fs::read(dir.join(&manifest.edges.name))?;
        let mut edges = Vec::new();
        let mut rdr = csv::Reader::from_reader(edges_bytes.as_slice());
        for rec in rdr.deserialize::<EdgeRecord>() {
            edges.push(rec.map_err(|e| Error::Load {
                file: manifest.edges.name.clone(),
                location: e
                    .position()
                    .map_or_else(|| "unknown".into(), |p| format!("line {}", p.line())),
                message: e.to_string(),
            })?);
        }

        let mut features = BTreeMap::new();
        let mut feature_bytes = Vec::new();
        for (t, fe) in &manifest.features {
            let bytes = fs::read(dir.join(&fe.name))?;
            let m = read_features(&bytes, &fe.name)?;
            if manifest.feature_dims.get(t) != Some(&m.cols()) {
                return Err(Error::Load {
                    file: fe.name.clone(),
                    location: "byte 16".into(),
                    message: format!("manifest dimension {:?}, file has {}", manifest.feature_dims.get(t), m.cols()),
                });
            }
            features.insert(t.clone(), m);
            feature_bytes.push((fe, bytes));
        }

        let mut checks = vec![(&manifest.nodes, nodes_bytes.as_slice()), (&manifest.edges, edges_bytes.as_slice())];
        checks.extend(feature_bytes.iter().map(|(fe, b)| (*fe, b.as_slice())));
        for (fe, bytes) in checks {
            let actual = sha256_hex(bytes);
            if actual != fe.sha256 {
                return Err(Error::Load {
                    file: fe.name.clone(),
                    location: format!("{} bytes", bytes.len()),
                    message: format!("checksum mismatch: manifest {}, file {actual}", fe.sha256),
                });
            }
        }
        Ok((Self { nodes, edges, features }, manifest))
    }

    /// Builds the citation graph. Cases need dates; `CC` and `CL` edges
    /// become `cites_case` and `cites_law`, `CCo` edges fill the case
    /// `court` column with the destination id.
    pub fn to_graph(&self) -> Result<HeteroGraph> {
        let mut index: HashMap<u64, (bool, usize)> = HashMap::new();
        let mut cases = Vec::new();
        let mut laws = Vec::new();
        for (line, n) in self.nodes.iter().enumerate() {
            let is_case = match n.node_type.as_str() {
                CASE => true,
                LAW => false,
                other => {
                    return Err(Error::Load {
                        file: NODES_FILE.into(),
                        location: format!("line {}", line + 1),
                        message: format!("unknown node type `{other}`"),
                    })
                }
            };
            let list = if is_case { &mut cases } else { &mut laws };
            if index.insert(n.id, (is_case, list.len())).is_some() {
                return Err(Error::Load {
                    file: NODES_FILE.into(),
                    location: format!("line {}", line + 1),
                    message: format!("duplicate node id {}", n.id),
                });
            }
            list.push(n);
        }

        let mut dates = Vec::with_capacity(cases.len());
        for n in &cases {
            let d = n
                .date
                .as_deref()
                .ok_or_else(|| Error::Data(format!("case {} has no date", n.id)))?;
            dates.push(parse_date(d).ok_or_else(|| Error::Data(format!("case {}: bad date `{d}`", n.id)))?);
        }

        let meta_of = |list: &[&NodeRecord]| -> BTreeMap<String, MetaColumn> {
            let keys: BTreeSet<&String> = list.iter().flat_map(|n| n.meta.keys()).collect();
            keys.into_iter()
                .map(|k| (k.clone(), list.iter().map(|n| n.meta.get(k).cloned()).collect()))
                .collect()
        };
        let mut case_meta = meta_of(&cases);
        let law_meta = meta_of(&laws);

        let mut cc = Vec::new();
        let mut cl = Vec::new();
        for (line, e) in self.edges.iter().enumerate() {
            let bad = |message: String| Error::Load {
                file: EDGES_FILE.into(),
                location: format!("line {}", line + 2),
                message,
            };
            let lookup = |id: u64, want_case: bool| match index.get(&id) {
                Some(&(is_case, i)) if is_case == want_case => Ok(i),
                Some(_) => Err(bad(format!("node {id} has the wrong type for `{}`", e.relation))),
                None => Err(bad(format!("unknown node id {id}"))),
            };
            match e.relation.as_str() {
                "CC" => cc.push((lookup(e.src_id, true)?, lookup(e.dst_id, true)?)),
                "CL" => cl.push((lookup(e.src_id, true)?, lookup(e.dst_id, false)?)),
                "CCo" => {
                    let u = lookup(e.src_id, true)?;
                    let col = case_meta
                        .entry(COURT_COLUMN.into())
                        .or_insert_with(|| vec![None; cases.len()]);
                    let court = e.dst_id.to_string();
                    match &col[u] {
                        Some(existing) if *existing != court => {
                            return Err(bad(format!(
                                "case {} assigned to court {court} but already has `{existing}`",
                                e.src_id
                            )))
                        }
                        _ => col[u] = Some(court),
                    }
                }
                other => return Err(bad(format!("unknown relation `{other}`"))),
            }
        }

        let mut b = GraphBuilder::new()
            .node_type(CASE, cases.len())
            .node_type(LAW, laws.len())
            .relation(CASE, CITES_CASE, CASE, cc)
            .relation(CASE, CITES_LAW, LAW, cl)
            .dates(CASE, dates);
        for (t, m) in &self.features {
            b = b.features(t, m.clone());
        }
        for (k, col) in case_meta {
            b = b.meta(CASE, &k, col);
        }
        for (k, col) in law_meta {
            b = b.meta(LAW, &k, col);
        }
        let (g, stats) = b.build()?;
        if stats.total_duplicates() > 0 {
            log::warn!("{} duplicate edges dropped", stats.total_duplicates());
        }
        Ok(g)
    }

    /// File-level form of a case/law graph; node ids are cases first, then
    /// laws. Exposed or enrichment relations are not representable.
    pub fn from_graph(g: &HeteroGraph) -> Result<Self> {
        let case = g.type_id(CASE)?;
        let law = g.type_id(LAW)?;
        let n_cases = g.node_count(case);
        let dates = g
            .dates(case)
            .ok_or_else(|| Error::Data("cases have no dates".into()))?;
        let row_meta = |t, i: usize| -> BTreeMap<String, String> {
            g.meta_columns(t)
                .filter_map(|k| Some((k.to_string(), g.meta(t, k)?[i].clone()?)))
                .collect()
        };
        let mut nodes = Vec::with_capacity(g.total_nodes());
        for i in 0..n_cases {
            nodes.push(NodeRecord {
                id: i as u64,
                node_type: CASE.into(),
                date: Some(format_date(dates[i])),
                meta: row_meta(case, i),
            });
        }
        for j in 0..g.node_count(law) {
            nodes.push(NodeRecord {
                id: (n_cases + j) as u64,
                node_type: LAW.into(),
                date: None,
                meta: row_meta(law, j),
            });
        }
        let mut edges = Vec::new();
        for rel in g.relations() {
            let (code, dst_offset) = match (rel.id.src, rel.id.name.as_str(), rel.id.dst) {
                (s, CITES_CASE, d) if s == case && d == case => ("CC", 0),
                (s, CITES_LAW, d) if s == case && d == law => ("CL", n_cases),
                _ => {
                    return Err(Error::Schema(format!(
                        "relation `{}` has no file representation",
                        g.relation_label(&rel.id)
                    )))
                }
            };
            for (u, v) in rel.adjacency.edges() {
                edges.push(EdgeRecord {
                    src_id: u as u64,
                    dst_id: (v + dst_offset) as u64,
                    relation: code.into(),
                });
            }
        }
        let mut features = BTreeMap::new();
        for t in [case, law] {
            if let Some(m) = g.features(t) {
                features.insert(g.type_name(t).to_string(), m.clone());
            }
        }
        Ok(Self { nodes, edges, features })
    }
}

/// Loads and verifies a bundle directory into a graph.
pub fn load_dataset(dir: &Path) -> Result<HeteroGraph> {
    DatasetBundle::load(dir)?.0.to_graph()
}
