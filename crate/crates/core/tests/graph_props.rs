mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;
use xgrag_core::error::GraphError;
use xgrag_core::graph::{
    connected_components, degree_centrality, pagerank, Entity, Provenance, Relation, Subgraph, DEFAULT_DAMPING,
};

use common::oracle;

fn edges_strategy() -> impl Strategy<Value = (usize, Vec<(usize, usize)>)> {
    (1usize..12).prop_flat_map(|n| (Just(n), prop::collection::vec((0..n, 0..n), 0..20)))
}

fn build(n: usize, pairs: &[(usize, usize)]) -> Subgraph {
    let entities = (0..n)
        .map(|i| Entity::new(format!("v{i:02}"), format!("V{i}"), "T", ""))
        .collect();
    let mut seen = BTreeSet::new();
    let relations = pairs
        .iter()
        .filter(|(a, b)| a != b && seen.insert((*a, *b)))
        .map(|(a, b)| Relation::new(format!("v{a:02}"), "r", format!("v{b:02}"), ""))
        .collect();
    Subgraph::new(entities, relations, Provenance::Global).unwrap()
}

proptest! {
    #[test]
    fn components_match_transitive_closure((n, pairs) in edges_strategy()) {
        let vertices: Vec<String> = (0..n).map(|i| format!("v{i:02}")).collect();
        let edges: Vec<(String, String)> = pairs.iter().map(|(a, b)| (vertices[*a].clone(), vertices[*b].clone())).collect();
        let got = connected_components(&vertices, &edges);
        let as_sets: BTreeSet<BTreeSet<String>> = got.iter().map(|c| c.iter().cloned().collect()).collect();
        prop_assert_eq!(as_sets, oracle::components(&vertices, &edges));
        for c in &got {
            prop_assert!(c.windows(2).all(|w| w[0] < w[1]));
        }
        prop_assert!(got.windows(2).all(|w| w[0][0] < w[1][0]));
    }

    #[test]
    fn degree_matches_incidence_count((n, pairs) in edges_strategy()) {
        let g = build(n, &pairs);
        let deg = degree_centrality(&g);
        let expected = oracle::degrees(&g);
        for (id, d) in &expected {
            prop_assert_eq!(deg.scores.iter().find(|(k, _)| k.as_str() == id).map(|(_, v)| *v), Some(*d as f64));
        }
        let total: f64 = deg.scores.values().sum();
        prop_assert_eq!(total, 2.0 * g.relation_count() as f64);
    }

    #[test]
    fn pagerank_is_a_distribution((n, pairs) in edges_strategy()) {
        let g = build(n, &pairs);
        let pr = pagerank(&g, DEFAULT_DAMPING, 1e-12, 1000).unwrap();
        let sum: f64 = pr.scores.values().sum();
        prop_assert!((sum - 1.0).abs() < 1e-9);
        prop_assert!(pr.scores.values().all(|v| *v > 0.0));
    }

    #[test]
    fn json_round_trip((n, pairs) in edges_strategy()) {
        let g = build(n, &pairs);
        let back = Subgraph::from_json(&g.to_json().unwrap(), Provenance::Global).unwrap();
        prop_assert_eq!(back.fingerprint(), g.fingerprint());
        prop_assert_eq!(back, g);
    }
}

#[test]
fn save_and_load() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g.json");
    let g = common::appendix_sized_graph();
    g.save(&path).unwrap();
    let back = Subgraph::load(&path).unwrap();
    assert_eq!(back.fingerprint(), g.fingerprint());
}

#[test]
fn fingerprint_ignores_construction_order() {
    let a = Entity::new("a", "A", "T", "");
    let b = Entity::new("b", "B", "T", "");
    let r1 = Relation::new("a", "x", "b", "");
    let r2 = Relation::new("b", "y", "a", "");
    let g1 = Subgraph::new(
        vec![a.clone(), b.clone()],
        vec![r1.clone(), r2.clone()],
        Provenance::Global,
    )
    .unwrap();
    let g2 = Subgraph::new(vec![b, a], vec![r2, r1], Provenance::Global).unwrap();
    assert_eq!(g1.fingerprint(), g2.fingerprint());
    assert!(g1.fingerprint().starts_with("sha256:"));
}

#[test]
fn construction_rejects_malformed_graphs() {
    let e = |id: &str| Entity::new(id, id.to_uppercase(), "T", "");
    let check = |entities: Vec<Entity>, relations: Vec<Relation>| {
        Subgraph::new(entities, relations, Provenance::Global).unwrap_err()
    };
    assert!(matches!(
        check(vec![e("a"), e("a")], vec![]),
        GraphError::DuplicateEntity(_)
    ));
    assert!(matches!(
        check(vec![Entity::new("a", " ", "T", "")], vec![]),
        GraphError::EmptyName(_)
    ));
    assert!(matches!(
        check(vec![e("a")], vec![Relation::new("a", "r", "a", "")]),
        GraphError::SelfLoop(_)
    ));
    assert!(matches!(
        check(vec![e("a")], vec![Relation::new("a", "r", "zz", "")]),
        GraphError::DanglingEndpoint { .. }
    ));
    assert!(matches!(
        check(
            vec![e("a"), e("b")],
            vec![Relation::new("a", "r", "b", "x"), Relation::new("a", "r", "b", "y")]
        ),
        GraphError::DuplicateRelation(_)
    ));
}

#[test]
fn pagerank_rejects_bad_input() {
    let g = common::appendix_sized_graph();
    for d in [0.0, 1.0, -0.1, 1.5] {
        assert!(matches!(
            pagerank(&g, d, 1e-10, 200),
            Err(GraphError::InvalidDamping(_))
        ));
    }
    assert!(matches!(
        pagerank(&Subgraph::empty(Provenance::Global), 0.85, 1e-10, 200),
        Err(GraphError::EmptyGraph)
    ));
    assert!(matches!(
        pagerank(&g, 0.85, 0.0, 3),
        Err(GraphError::NonConvergence { .. })
    ));
}

#[test]
fn pagerank_favors_the_hub() {
    let entities = (0..5)
        .map(|i| Entity::new(format!("s{i}"), format!("S{i}"), "T", ""))
        .collect();
    let relations = (1..5).map(|i| Relation::new(format!("s{i}"), "to", "s0", "")).collect();
    let g = Subgraph::new(entities, relations, Provenance::Global).unwrap();
    let pr = pagerank(&g, DEFAULT_DAMPING, 1e-12, 1000).unwrap();
    let exact = oracle::pagerank_linear(&g, DEFAULT_DAMPING);
    for (id, v) in &pr.scores {
        assert!((v - exact[id.as_str()]).abs() < 1e-9);
    }
    assert!(pr.scores.values().cloned().fold(0.0, f64::max) == pr.get(&"s0".into()).unwrap());
}
