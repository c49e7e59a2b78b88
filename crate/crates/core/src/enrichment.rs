//! Graph enrichment: categorical metadata exposed as nodes, reverse
//! relations and self-loop relations.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{HeteroGraph, RelationId};
use crate::numerics::Csr;

pub const REVERSE_SUFFIX: &str = "_rev";
pub const SELF_RELATION: &str = "self";
pub const FEATURE_PREFIX: &str = "has_";

/// A categorical column to materialize as a node type.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetaFeature {
    pub source_type: String,
    pub column: String,
    pub new_type_name: String,
}

impl MetaFeature {
    pub fn new(source_type: &str, column: &str) -> Self {
        Self {
            source_type: source_type.to_string(),
            column: column.to_string(),
            new_type_name: column.to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EnrichmentSpec {
    #[serde(default)]
    pub meta_features: Vec<MetaFeature>,
    #[serde(default)]
    pub add_reverse: bool,
    #[serde(default)]
    pub add_self_loops: bool,
}

impl EnrichmentSpec {
    /// No enrichment at all.
    pub fn none() -> Self {
        Self::default()
    }

    /// Reverse edges, self-loops and the given exposed features.
    pub fn full(meta_features: Vec<MetaFeature>) -> Self {
        Self {
            meta_features,
            add_reverse: true,
            add_self_loops: true,
        }
    }
}

/// Category string to node index of the exposed type, in lexicographic order.
pub type CategoryIndex = BTreeMap<String, usize>;

/// Adds one node per expressed category of `mf.column` and an edge from every
/// node carrying a value to its category node. Missing values emit nothing.
pub fn expose_meta_feature(g: &HeteroGraph, mf: &MetaFeature) -> Result<(HeteroGraph, CategoryIndex)> {
    let src = g.type_id(&mf.source_type)?;
    let column = g.meta(src, &mf.column).ok_or_else(|| {
        Error::Schema(format!(
            "node type `{}` has no meta column `{}`",
            mf.source_type, mf.column
        ))
    })?;
    let categories: BTreeSet<&str> = column.iter().flatten().map(String::as_str).collect();
    let index: CategoryIndex = categories
        .into_iter()
        .enumerate()
        .map(|(i, c)| (c.to_string(), i))
        .collect();
    let edges: Vec<(usize, usize)> = column
        .iter()
        .enumerate()
        .filter_map(|(u, v)| Some((u, index[v.as_deref()?])))
        .collect();

    let mut out = g.clone();
    let new_type = out.push_node_type(&mf.new_type_name, index.len())?;
    let id = RelationId {
        src,
        name: format!("{FEATURE_PREFIX}{}", mf.column),
        dst: new_type,
    };
    out.push_relation_edges(id, &edges)?;
    Ok((out, index))
}

/// Adds `(dst, name_rev, src)` with the transposed adjacency for every relation.
pub fn add_reverse_relations(g: &HeteroGraph) -> Result<HeteroGraph> {
    let mut out = g.clone();
    for rel in g.relations() {
        let id = RelationId {
            src: rel.id.dst,
            name: format!("{}{REVERSE_SUFFIX}", rel.id.name),
            dst: rel.id.src,
        };
        out.push_relation_csr(id, rel.adjacency.transpose())?;
    }
    Ok(out)
}

/// Adds `(t, self, t)` with edge `(i, i)` for every node of every type.
pub fn add_self_loops(g: &HeteroGraph) -> Result<HeteroGraph> {
    let mut out = g.clone();
    for t in g.node_type_ids() {
        let id = RelationId {
            src: t,
            name: SELF_RELATION.to_string(),
            dst: t,
        };
        out.push_relation_csr(id, Csr::identity(g.node_count(t)))?;
    }
    Ok(out)
}

/// Exposes features in spec order, then reverses every relation (feature
/// edges included), then adds self-loops.
pub fn enrich(g: &HeteroGraph, spec: &EnrichmentSpec) -> Result<HeteroGraph> {
    for mf in &spec.meta_features {
        if g.type_id(&mf.new_type_name).is_ok() {
            return Err(Error::Schema(format!(
                "exposed type name `{}` collides with an existing node type",
                mf.new_type_name
            )));
        }
    }
    let mut out = g.clone();
    for mf in &spec.meta_features {
        out = expose_meta_feature(&out, mf)?.0;
    }
    if spec.add_reverse {
        out = add_reverse_relations(&out)?;
    }
    if spec.add_self_loops {
        out = add_self_loops(&out)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{GraphBuilder, NodeTypeId};

    fn cases_with_courts(courts: &[Option<&str>]) -> HeteroGraph {
        GraphBuilder::new()
            .node_type("case", courts.len())
            .node_type("law", 2)
            .relation("case", "cites_law", "law", (0..courts.len()).map(|i| (i, 0)).collect())
            .meta("case", "court_type", courts.iter().map(|c| c.map(String::from)).collect())
            .build()
            .unwrap()
            .0
    }

    #[test]
    fn exposes_distinct_categories() {
        let g = cases_with_courts(&[Some("A"), Some("A"), Some("B")]);
        let (e, index) = expose_meta_feature(&g, &MetaFeature::new("case", "court_type")).unwrap();
        let t = e.type_id("court_type").unwrap();
        assert_eq!(e.node_count(t), 2);
        let r = e.relation_id("case", "has_court_type", "court_type").unwrap();
        assert_eq!(e.edge_list(&r).unwrap(), vec![(0, 0), (1, 0), (2, 1)]);
        assert_eq!(index.keys().collect::<Vec<_>>(), ["A", "B"]);
    }

    #[test]
    fn missing_values_emit_nothing() {
        let g = cases_with_courts(&[Some("A"), None, Some("B")]);
        let (e, _) = expose_meta_feature(&g, &MetaFeature::new("case", "court_type")).unwrap();
        assert_eq!(e.node_count(e.type_id("court_type").unwrap()), 2);
        let r = e.relation_id("case", "has_court_type", "court_type").unwrap();
        assert_eq!(e.edge_list(&r).unwrap().len(), 2);
    }

    #[test]
    fn categories_are_lexicographic() {
        let g = cases_with_courts(&[Some("zeta"), Some("alpha"), Some("mid")]);
        let (_, index) = expose_meta_feature(&g, &MetaFeature::new("case", "court_type")).unwrap();
        assert_eq!(index["alpha"], 0);
        assert_eq!(index["mid"], 1);
        assert_eq!(index["zeta"], 2);
    }

    #[test]
    fn absent_column_is_schema_error() {
        let g = cases_with_courts(&[Some("A")]);
        let err = expose_meta_feature(&g, &MetaFeature::new("case", "state")).unwrap_err();
        assert!(matches!(err, Error::Schema(_)));
    }

    #[test]
    fn reverse_transposes() {
        let (g, _) = GraphBuilder::new()
            .node_type("case", 2)
            .node_type("law", 1)
            .relation("case", "cites_law", "law", vec![(0, 0), (1, 0)])
            .relation("case", "cites_case", "case", vec![(0, 1)])
            .build()
            .unwrap();
        let r = add_reverse_relations(&g).unwrap();
        let lc = r.relation_id("law", "cites_law_rev", "case").unwrap();
        assert_eq!(r.edge_list(&lc).unwrap(), vec![(0, 0), (0, 1)]);
        let cc = r.relation_id("case", "cites_case_rev", "case").unwrap();
        assert_eq!(r.edge_list(&cc).unwrap(), vec![(1, 0)]);
        assert_eq!(r.total_edges(), 2 * g.total_edges());
        assert!(matches!(add_reverse_relations(&r), Err(Error::Schema(_))));
    }

    #[test]
    fn self_loops_cover_every_node() {
        let g = cases_with_courts(&[Some("A"), Some("B")]);
        let e = add_self_loops(&g).unwrap();
        let r = e.relation_id("case", "self", "case").unwrap();
        assert_eq!(e.edge_list(&r).unwrap(), vec![(0, 0), (1, 1)]);

        let (x, _) = expose_meta_feature(&g, &MetaFeature::new("case", "court_type")).unwrap();
        let x = add_self_loops(&x).unwrap();
        let r = x.relation_id("court_type", "self", "court_type").unwrap();
        assert_eq!(x.edge_list(&r).unwrap().len(), 2);
        let self_edges: usize = x
            .relations()
            .iter()
            .filter(|r| r.id.name == SELF_RELATION)
            .map(|r| r.adjacency.nnz())
            .sum();
        assert_eq!(self_edges, x.total_nodes());
    }

    #[test]
    fn empty_spec_is_identity() {
        let g = cases_with_courts(&[Some("A"), Some("B")]);
        assert_eq!(enrich(&g, &EnrichmentSpec::none()).unwrap(), g);
    }

    #[test]
    fn fully_enriched_figure_scenario() {
        let (g, _) = GraphBuilder::new()
            .node_type("case", 3)
            .node_type("law", 2)
            .relation("case", "cites_law", "law", vec![(0, 0), (1, 1), (2, 1)])
            .relation("case", "cites_case", "case", vec![(1, 0), (2, 1)])
            .meta("case", "court_state", vec![Some("BY".into()), Some("NW".into()), None])
            .meta("law", "law_book", vec![Some("BGB".into()), Some("StGB".into())])
            .build()
            .unwrap();
        let spec = EnrichmentSpec::full(vec![
            MetaFeature::new("law", "law_book"),
            MetaFeature::new("case", "court_state"),
        ]);
        let e = enrich(&g, &spec).unwrap();
        let names: Vec<&str> = e.node_type_ids().map(|t| e.type_name(t)).collect();
        assert_eq!(names, ["case", "law", "law_book", "court_state"]);
        // 2 original + 2 feature relations, doubled, plus one self relation per type
        assert_eq!(e.num_relations(), (2 + 2) * 2 + 4);
        // collect-then-propagate: feature nodes also send messages back
        assert!(e.relation_id("law_book", "has_law_book_rev", "law").is_ok());
        assert_eq!(e.node_count(NodeTypeId(3)), 2);
    }

    #[test]
    fn colliding_type_name_rejected() {
        let g = cases_with_courts(&[Some("A")]);
        let mut mf = MetaFeature::new("case", "court_type");
        mf.new_type_name = "law".into();
        assert!(matches!(
            enrich(&g, &EnrichmentSpec::full(vec![mf])),
            Err(Error::Schema(_))
        ));
    }
}
