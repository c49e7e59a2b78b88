//! Immutable heterogeneous graph: typed node sets, directed typed relations
//! stored as per-relation CSR, and per-type features, dates and categorical
//! metadata.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{Csr, DenseMatrix};

/// Dense index of a node type within one graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeTypeId(pub usize);

/// A directed relation `(src_type, name, dst_type)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RelationId {
    pub src: NodeTypeId,
    pub name: String,
    pub dst: NodeTypeId,
}

/// One categorical column; `None` marks a missing value.
pub type MetaColumn = Vec<Option<String>>;

#[derive(Clone, Debug, PartialEq)]
pub struct Relation {
    pub id: RelationId,
    pub adjacency: Csr,
}

#[derive(Clone, Debug, PartialEq, Default)]
struct NodeSet {
    name: String,
    count: usize,
    features: Option<DenseMatrix<f32>>,
    dates: Option<Vec<i64>>,
    meta: BTreeMap<String, MetaColumn>,
}

/// A sealed heterogeneous graph. Every transform returns a new graph.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct HeteroGraph {
    node_sets: Vec<NodeSet>,
    relations: Vec<Relation>,
}

/// Per-type mapping between the indices of a graph and one of its induced subgraphs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IndexMap {
    pub old_to_new: Vec<Option<usize>>,
    pub new_to_old: Vec<usize>,
}

impl IndexMap {
    pub fn identity(n: usize) -> Self {
        Self {
            old_to_new: (0..n).map(Some).collect(),
            new_to_old: (0..n).collect(),
        }
    }

    fn from_mask(mask: &[bool]) -> Self {
        let mut old_to_new = vec![None; mask.len()];
        let mut new_to_old = Vec::new();
        for (i, &keep) in mask.iter().enumerate() {
            if keep {
                old_to_new[i] = Some(new_to_old.len());
                new_to_old.push(i);
            }
        }
        Self {
            old_to_new,
            new_to_old,
        }
    }
}

/// What happened during construction.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BuildStats {
    /// Duplicate edges dropped, per relation in declaration order.
    pub duplicates: Vec<(String, usize)>,
}

impl BuildStats {
    pub fn total_duplicates(&self) -> usize {
        self.duplicates.iter().map(|(_, n)| n).sum()
    }
}

/// Collects node sets, edge lists and node data, then validates and seals them.
#[derive(Clone, Debug, Default)]
pub struct GraphBuilder {
    node_sets: Vec<NodeSet>,
    edges: Vec<(String, String, String, Vec<(usize, usize)>)>,
    pending_features: Vec<(String, DenseMatrix<f32>)>,
    pending_dates: Vec<(String, Vec<i64>)>,
    pending_meta: Vec<(String, String, MetaColumn)>,
}

impl GraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn node_type(mut self, name: &str, count: usize) -> Self {
        self.node_sets.push(NodeSet {
            name: name.to_string(),
            count,
            ..NodeSet::default()
        });
        self
    }

    pub fn relation(mut self, src: &str, name: &str, dst: &str, edges: Vec<(usize, usize)>) -> Self {
        self.edges
            .push((src.to_string(), name.to_string(), dst.to_string(), edges));
        self
    }

    pub fn features(mut self, node_type: &str, features: DenseMatrix<f32>) -> Self {
        self.pending_features.push((node_type.to_string(), features));
        self
    }

    pub fn dates(mut self, node_type: &str, dates: Vec<i64>) -> Self {
        self.pending_dates.push((node_type.to_string(), dates));
        self
    }

    pub fn meta(mut self, node_type: &str, column: &str, values: MetaColumn) -> Self {
        self.pending_meta
            .push((node_type.to_string(), column.to_string(), values));
        self
    }

    pub fn build(self) -> Result<(HeteroGraph, BuildStats)> {
        let mut graph = HeteroGraph {
            node_sets: Vec::new(),
            relations: Vec::new(),
        };
        for set in self.node_sets {
            if graph.type_id(&set.name).is_ok() {
                return Err(Error::Schema(format!("duplicate node type `{}`", set.name)));
            }
            graph.node_sets.push(set);
        }
        for (ty, features) in self.pending_features {
            let t = graph.type_id(&ty)?;
            graph.set_features(t, features)?;
        }
        for (ty, dates) in self.pending_dates {
            let t = graph.type_id(&ty)?;
            graph.set_dates(t, dates)?;
        }
        for (ty, column, values) in self.pending_meta {
            let t = graph.type_id(&ty)?;
            graph.set_meta(t, &column, values)?;
        }
        let mut stats = BuildStats::default();
        for (src, name, dst, edges) in self.edges {
            let id = RelationId {
                src: graph.type_id(&src)?,
                name,
                dst: graph.type_id(&dst)?,
            };
            let label = graph.relation_label(&id);
            let dropped = graph.push_relation_edges(id, &edges)?;
            stats.duplicates.push((label, dropped));
        }
        Ok((graph, stats))
    }
}

impl HeteroGraph {
    pub fn num_node_types(&self) -> usize {
        self.node_sets.len()
    }

    pub fn node_type_ids(&self) -> impl Iterator<Item = NodeTypeId> {
        (0..self.node_sets.len()).map(NodeTypeId)
    }

    pub fn type_name(&self, t: NodeTypeId) -> &str {
        &self.node_sets[t.0].name
    }

    pub fn type_id(&self, name: &str) -> Result<NodeTypeId> {
        self.node_sets
            .iter()
            .position(|s| s.name == name)
            .map(NodeTypeId)
            .ok_or_else(|| Error::UnknownNodeType(name.to_string()))
    }

    pub fn node_count(&self, t: NodeTypeId) -> usize {
        self.node_sets[t.0].count
    }

    pub fn node_counts(&self) -> BTreeMap<String, usize> {
        self.node_sets
            .iter()
            .map(|s| (s.name.clone(), s.count))
            .collect()
    }

    pub fn total_nodes(&self) -> usize {
        self.node_sets.iter().map(|s| s.count).sum()
    }

    pub fn relations(&self) -> &[Relation] {
        &self.relations
    }

    pub fn num_relations(&self) -> usize {
        self.relations.len()
    }

    pub fn total_edges(&self) -> usize {
        self.relations.iter().map(|r| r.adjacency.nnz()).sum()
    }

    /// Looks up a relation by type and relation names.
    pub fn relation_id(&self, src: &str, name: &str, dst: &str) -> Result<RelationId> {
        let id = RelationId {
            src: self.type_id(src)?,
            name: name.to_string(),
            dst: self.type_id(dst)?,
        };
        self.relation_index(&id)?;
        Ok(id)
    }

    pub fn relation_index(&self, id: &RelationId) -> Result<usize> {
        self.relations
            .iter()
            .position(|r| &r.id == id)
            .ok_or_else(|| Error::UnknownRelation(format!("{id:?}")))
    }

    pub fn relation(&self, id: &RelationId) -> Result<&Relation> {
        Ok(&self.relations[self.relation_index(id)?])
    }

    pub fn has_relation(&self, id: &RelationId) -> bool {
        self.relations.iter().any(|r| &r.id == id)
    }

    /// `src_type.name.dst_type`, used for display and tensor names.
    pub fn relation_label(&self, id: &RelationId) -> String {
        format!(
            "{}.{}.{}",
            self.type_name(id.src),
            id.name,
            self.type_name(id.dst)
        )
    }

    /// Sorted destinations of `src` under relation `id`.
    pub fn neighbors(&self, id: &RelationId, src: usize) -> Result<&[usize]> {
        let rel = self.relation(id)?;
        self.check_node(id.src, src)?;
        Ok(rel.adjacency.row(src))
    }

    pub fn degree(&self, id: &RelationId, src: usize) -> Result<usize> {
        Ok(self.neighbors(id, src)?.len())
    }

    pub fn edge_list(&self, id: &RelationId) -> Result<Vec<(usize, usize)>> {
        Ok(self.relation(id)?.adjacency.edges().collect())
    }

    pub fn features(&self, t: NodeTypeId) -> Option<&DenseMatrix<f32>> {
        self.node_sets[t.0].features.as_ref()
    }

    pub fn dates(&self, t: NodeTypeId) -> Option<&[i64]> {
        self.node_sets[t.0].dates.as_deref()
    }

    pub fn meta(&self, t: NodeTypeId, column: &str) -> Option<&MetaColumn> {
        self.node_sets[t.0].meta.get(column)
    }

    pub fn meta_columns(&self, t: NodeTypeId) -> impl Iterator<Item = &str> {
        self.node_sets[t.0].meta.keys().map(String::as_str)
    }

    fn check_node(&self, t: NodeTypeId, index: usize) -> Result<()> {
        let count = self.node_count(t);
        if index >= count {
            return Err(Error::NodeOutOfRange {
                node_type: self.type_name(t).to_string(),
                index,
                count,
            });
        }
        Ok(())
    }

    /// Keeps the nodes whose mask entry is true. Edges survive only when both
    /// endpoints survive; features, dates and metadata rows follow their nodes.
    pub fn induce_node_subset(&self, keep: &[Vec<bool>]) -> Result<(HeteroGraph, Vec<IndexMap>)> {
        if keep.len() != self.node_sets.len() {
            return Err(Error::Dimension(format!(
                "{} masks for {} node types",
                keep.len(),
                self.node_sets.len()
            )));
        }
        for (set, mask) in self.node_sets.iter().zip(keep) {
            if mask.len() != set.count {
                return Err(Error::Dimension(format!(
                    "mask for `{}` has {} entries, expected {}",
                    set.name,
                    mask.len(),
                    set.count
                )));
            }
        }
        let maps: Vec<IndexMap> = keep.iter().map(|m| IndexMap::from_mask(m)).collect();
        let node_sets = self
            .node_sets
            .iter()
            .zip(&maps)
            .map(|(set, map)| {
                let idx = &map.new_to_old;
                NodeSet {
                    name: set.name.clone(),
                    count: idx.len(),
                    features: set.features.as_ref().map(|f| f.gather_rows(idx)),
                    dates: set.dates.as_ref().map(|d| idx.iter().map(|&i| d[i]).collect()),
                    meta: set
                        .meta
                        .iter()
                        .map(|(k, col)| (k.clone(), idx.iter().map(|&i| col[i].clone()).collect()))
                        .collect(),
                }
            })
            .collect();
        let relations = self
            .relations
            .iter()
            .map(|rel| {
                let src_map = &maps[rel.id.src.0];
                let dst_map = &maps[rel.id.dst.0];
                let edges: Vec<(usize, usize)> = rel
                    .adjacency
                    .edges()
                    .filter_map(|(s, d)| Some((src_map.old_to_new[s]?, dst_map.old_to_new[d]?)))
                    .collect();
                let (adjacency, _) = Csr::from_edges(
                    src_map.new_to_old.len(),
                    dst_map.new_to_old.len(),
                    &edges,
                );
                Relation {
                    id: rel.id.clone(),
                    adjacency,
                }
            })
            .collect();
        Ok((
            HeteroGraph {
                node_sets,
                relations,
            },
            maps,
        ))
    }

    /// Returns a copy of the graph with the listed edges of one relation removed.
    pub fn without_edges(&self, id: &RelationId, removed: &[(usize, usize)]) -> Result<HeteroGraph> {
        let r = self.relation_index(id)?;
        let mut drop: Vec<(usize, usize)> = removed.to_vec();
        drop.sort_unstable();
        let kept: Vec<(usize, usize)> = self.relations[r]
            .adjacency
            .edges()
            .filter(|e| drop.binary_search(e).is_err())
            .collect();
        let mut out = self.clone();
        let adj = &self.relations[r].adjacency;
        out.relations[r].adjacency = Csr::from_edges(adj.n_rows(), adj.n_cols(), &kept).0;
        Ok(out)
    }

    // -- construction helpers shared with the enrichment transforms --

    pub(crate) fn push_node_type(&mut self, name: &str, count: usize) -> Result<NodeTypeId> {
        if self.type_id(name).is_ok() {
            return Err(Error::Schema(format!("node type `{name}` already exists")));
        }
        self.node_sets.push(NodeSet {
            name: name.to_string(),
            count,
            ..NodeSet::default()
        });
        Ok(NodeTypeId(self.node_sets.len() - 1))
    }

    /// Validates bounds, deduplicates and appends a relation.
    pub(crate) fn push_relation_edges(&mut self, id: RelationId, edges: &[(usize, usize)]) -> Result<usize> {
        if self.has_relation(&id) {
            return Err(Error::Schema(format!(
                "relation `{}` already exists",
                self.relation_label(&id)
            )));
        }
        let n_src = self.node_count(id.src);
        let n_dst = self.node_count(id.dst);
        if let Some(&(src, dst)) = edges.iter().find(|&&(s, d)| s >= n_src || d >= n_dst) {
            return Err(Error::EdgeOutOfRange {
                relation: self.relation_label(&id),
                src,
                dst,
                n_src,
                n_dst,
            });
        }
        let (adjacency, dropped) = Csr::from_edges(n_src, n_dst, edges);
        self.relations.push(Relation { id, adjacency });
        Ok(dropped)
    }

    pub(crate) fn push_relation_csr(&mut self, id: RelationId, adjacency: Csr) -> Result<()> {
        if self.has_relation(&id) {
            return Err(Error::Schema(format!(
                "relation `{}` already exists",
                self.relation_label(&id)
            )));
        }
        if adjacency.n_rows() != self.node_count(id.src) || adjacency.n_cols() != self.node_count(id.dst) {
            return Err(Error::Dimension(format!(
                "adjacency for `{}` has shape {}x{}",
                self.relation_label(&id),
                adjacency.n_rows(),
                adjacency.n_cols()
            )));
        }
        self.relations.push(Relation { id, adjacency });
        Ok(())
    }

    fn set_features(&mut self, t: NodeTypeId, features: DenseMatrix<f32>) -> Result<()> {
        let set = &mut self.node_sets[t.0];
        if features.rows() != set.count {
            return Err(Error::Dimension(format!(
                "features for `{}` have {} rows, expected {}",
                set.name,
                features.rows(),
                set.count
            )));
        }
        if !features.is_finite() {
            return Err(Error::Data(format!("features for `{}` contain non-finite values", set.name)));
        }
        set.features = Some(features);
        Ok(())
    }

    fn set_dates(&mut self, t: NodeTypeId, dates: Vec<i64>) -> Result<()> {
        let set = &mut self.node_sets[t.0];
        if dates.len() != set.count {
            return Err(Error::Dimension(format!(
                "dates for `{}` have {} entries, expected {}",
                set.name,
                dates.len(),
                set.count
            )));
        }
        set.dates = Some(dates);
        Ok(())
    }

    fn set_meta(&mut self, t: NodeTypeId, column: &str, values: MetaColumn) -> Result<()> {
        let set = &mut self.node_sets[t.0];
        if values.len() != set.count {
            return Err(Error::Dimension(format!(
                "meta column `{column}` for `{}` has {} entries, expected {}",
                set.name,
                values.len(),
                set.count
            )));
        }
        set.meta.insert(column.to_string(), values);
        Ok(())
    }
}

impl fmt::Display for HeteroGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for set in &self.node_sets {
            writeln!(f, "{}: {} nodes", set.name, set.count)?;
        }
        for rel in &self.relations {
            writeln!(f, "{}: {} edges", self.relation_label(&rel.id), rel.adjacency.nnz())?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> HeteroGraph {
        GraphBuilder::new()
            .node_type("case", 2)
            .node_type("law", 1)
            .relation("case", "cites_law", "law", vec![(0, 0), (1, 0)])
            .build()
            .unwrap()
            .0
    }

    #[test]
    fn direct_construction() {
        let g = small();
        assert_eq!(g.node_counts(), [("case".to_string(), 2), ("law".to_string(), 1)].into());
        let r = g.relation_id("case", "cites_law", "law").unwrap();
        let total: usize = (0..2).map(|i| g.degree(&r, i).unwrap()).sum();
        assert_eq!(total, 2);
    }

    #[test]
    fn out_of_range_edge_names_relation_and_pair() {
        let err = GraphBuilder::new()
            .node_type("case", 2)
            .relation("case", "cites_case", "case", vec![(5, 0)])
            .build()
            .unwrap_err();
        match err {
            Error::EdgeOutOfRange { relation, src, dst, .. } => {
                assert_eq!(relation, "case.cites_case.case");
                assert_eq!((src, dst), (5, 0));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn feature_row_mismatch() {
        let err = GraphBuilder::new()
            .node_type("case", 2)
            .features("case", DenseMatrix::zeros(3, 4))
            .build()
            .unwrap_err();
        assert!(matches!(err, Error::Dimension(_)));
    }

    #[test]
    fn neighbors_readback_and_dedup() {
        let (g, stats) = GraphBuilder::new()
            .node_type("case", 2)
            .node_type("law", 2)
            .relation("case", "cites_law", "law", vec![(0, 1), (0, 0), (0, 1)])
            .build()
            .unwrap();
        let r = g.relation_id("case", "cites_law", "law").unwrap();
        assert_eq!(g.neighbors(&r, 0).unwrap(), &[0, 1]);
        assert_eq!(g.neighbors(&r, 1).unwrap(), &[] as &[usize]);
        assert_eq!(g.degree(&r, 1).unwrap(), 0);
        assert_eq!(stats.total_duplicates(), 1);
    }

    #[test]
    fn unknown_relation_lookup() {
        let g = small();
        assert!(matches!(
            g.relation_id("case", "cites_case", "case"),
            Err(Error::UnknownRelation(_))
        ));
        let bogus = RelationId {
            src: NodeTypeId(0),
            name: "nope".into(),
            dst: NodeTypeId(0),
        };
        assert!(g.neighbors(&bogus, 0).is_err());
    }

    #[test]
    fn star_degree() {
        let (g, _) = GraphBuilder::new()
            .node_type("case", 1)
            .node_type("law", 5)
            .relation("case", "cites_law", "law", (0..5).map(|j| (0, j)).collect())
            .build()
            .unwrap();
        let r = g.relation_id("case", "cites_law", "law").unwrap();
        assert_eq!(g.degree(&r, 0).unwrap(), 5);
    }

    #[test]
    fn induce_identity_and_drop_endpoint() {
        let g = small();
        let (same, maps) = g.induce_node_subset(&[vec![true, true], vec![true]]).unwrap();
        assert_eq!(same, g);
        assert_eq!(maps[0], IndexMap::identity(2));

        let (g, _) = GraphBuilder::new()
            .node_type("case", 2)
            .relation("case", "cites_case", "case", vec![(1, 0)])
            .build()
            .unwrap();
        let (sub, _) = g.induce_node_subset(&[vec![false, true]]).unwrap();
        assert_eq!(sub.total_edges(), 0);
        assert_eq!(sub.node_count(NodeTypeId(0)), 1);
    }

    #[test]
    fn induce_filters_node_data() {
        let (g, _) = GraphBuilder::new()
            .node_type("case", 3)
            .features("case", DenseMatrix::from_fn(3, 2, |i, j| (i * 2 + j) as f32))
            .dates("case", vec![10, 20, 30])
            .meta("case", "court", vec![Some("a".into()), None, Some("c".into())])
            .build()
            .unwrap();
        let (sub, _) = g.induce_node_subset(&[vec![true, false, true]]).unwrap();
        let t = NodeTypeId(0);
        assert_eq!(sub.features(t).unwrap().row(1), &[4.0, 5.0]);
        assert_eq!(sub.dates(t).unwrap(), &[10, 30]);
        assert_eq!(sub.meta(t, "court").unwrap()[1].as_deref(), Some("c"));
    }

    #[test]
    fn without_edges_removes_only_listed() {
        let g = small();
        let r = g.relation_id("case", "cites_law", "law").unwrap();
        let h = g.without_edges(&r, &[(1, 0)]).unwrap();
        assert_eq!(h.edge_list(&r).unwrap(), vec![(0, 0)]);
        assert_eq!(g.edge_list(&r).unwrap().len(), 2);
    }
}
