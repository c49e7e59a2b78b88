mod common;

use hge_core::enrichment::{enrich, expose_meta_feature, EnrichmentSpec, MetaFeature};
use hge_core::graph::GraphBuilder;
use proptest::prelude::*;

fn court_spec() -> EnrichmentSpec {
    EnrichmentSpec::full(vec![MetaFeature::new("case", "court")])
}

#[test]
fn no_enrichment_is_identity() {
    let g = common::random_case_law_graph(15, 5, 3, 4, 0.2, &mut common::rng(1));
    assert_eq!(enrich(&g, &EnrichmentSpec::none()).unwrap(), g);
}

#[test]
fn full_enrichment_relation_inventory() {
    let g = common::random_case_law_graph(15, 5, 3, 4, 0.2, &mut common::rng(2));
    let e = enrich(&g, &court_spec()).unwrap();
    let mut labels: Vec<String> = e.relations().iter().map(|r| e.relation_label(&r.id)).collect();
    labels.sort();
    // two citation relations and one exposure relation, each reversed, plus one self relation per type
    assert_eq!(e.num_relations(), 3 * 2 + 3);
    assert!(labels.iter().any(|l| l.contains("has_court")));
    assert_eq!(e.node_counts()["court"], 3);
    assert_eq!(e.total_nodes(), g.total_nodes() + 3);
}

#[test]
fn categories_are_indexed_lexicographically() {
    let (g, _) = GraphBuilder::new()
        .node_type("case", 4)
        .meta("case", "court", vec![Some("b".into()), None, Some("a".into()), Some("b".into())])
        .build()
        .unwrap();
    let (e, index) = expose_meta_feature(&g, &MetaFeature::new("case", "court")).unwrap();
    assert_eq!(index.keys().collect::<Vec<_>>(), vec!["a", "b"]);
    let rel = e.relation_id("case", "has_court", "court").unwrap();
    assert_eq!(e.edge_list(&rel).unwrap(), vec![(0, 1), (2, 0), (3, 1)]);
}

#[test]
fn missing_column_is_an_error() {
    let g = common::random_case_law_graph(5, 2, 1, 2, 0.2, &mut common::rng(3));
    assert!(expose_meta_feature(&g, &MetaFeature::new("law", "law_book")).is_err());
}

#[test]
fn enrichment_does_not_touch_original_relations() {
    let g = common::random_case_law_graph(25, 6, 4, 4, 0.2, &mut common::rng(4));
    let e = enrich(&g, &court_spec()).unwrap();
    for rel in g.relations() {
        let id = e.relation_id(
            g.type_name(rel.id.src),
            &rel.id.name,
            g.type_name(rel.id.dst),
        );
        assert_eq!(e.edge_list(&id.unwrap()).unwrap(), g.edge_list(&rel.id).unwrap());
    }
    let case = e.type_id("case").unwrap();
    assert_eq!(e.features(case), g.features(g.type_id("case").unwrap()));
}

proptest! {
    #[test]
    fn enrichment_is_deterministic(seed in 0u64..100) {
        let g = common::random_case_law_graph(12, 4, 2, 3, 0.3, &mut common::rng(seed));
        prop_assert_eq!(enrich(&g, &court_spec()).unwrap(), enrich(&g, &court_spec()).unwrap());
    }
}
