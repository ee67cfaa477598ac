mod common;

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use xgrag_core::backend::mock::MockEmbedder;
use xgrag_core::error::IngestError;
use xgrag_core::graph::{Entity, Provenance, Relation, Subgraph};
use xgrag_core::retrieval::{retrieve_subgraph, RetrievalConfig};

use common::{oracle, EMBED_SEED};

const QUERY: &str = "gift watch hair";

fn cosine(a: &str, b: &str) -> f64 {
    let (x, y) = (oracle::mock_counts(a), oracle::mock_counts(b));
    let dot: f64 = x.iter().map(|(k, v)| v * y.get(k).copied().unwrap_or(0.0)).sum();
    let norm = |m: &BTreeMap<usize, f64>| m.values().map(|v| v * v).sum::<f64>().sqrt();
    dot / (norm(&x) * norm(&y))
}

fn text(e: &Entity) -> String {
    if e.description.trim().is_empty() {
        e.name.clone()
    } else {
        format!("{}: {}", e.name, e.description)
    }
}

fn query_graph(seed: u64, n: usize, edge_p: f64) -> Subgraph {
    let mut rng = common::rng(seed);
    let words: Vec<&str> = QUERY.split_whitespace().collect();
    let entities = (0..n)
        .map(|i| {
            let mut desc = vec![format!("filler{i}")];
            for w in &words {
                for _ in 0..rng.gen_range(0..3) {
                    desc.push(w.to_string());
                }
            }
            Entity::new(format!("n{i:02}"), format!("Node{i}"), "T", desc.join(" "))
        })
        .collect();
    let mut relations = Vec::new();
    for a in 0..n {
        for b in 0..n {
            if a != b && rng.gen_bool(edge_p) {
                relations.push(Relation::new(format!("n{a:02}"), "r", format!("n{b:02}"), ""));
            }
        }
    }
    Subgraph::new(entities, relations, Provenance::Global).unwrap()
}

/// Ids sorted by descending similarity then ascending id, or `None` when two
/// distinct scores are too close to order reliably.
fn ranked(g: &Subgraph) -> Option<Vec<(String, f64)>> {
    let mut r: Vec<(String, f64)> = g
        .entities()
        .map(|e| (e.id.to_string(), cosine(QUERY, &text(e))))
        .collect();
    r.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
    let close = r.windows(2).any(|w| w[0].1 != w[1].1 && (w[0].1 - w[1].1).abs() < 1e-9);
    (!close).then_some(r)
}

fn hop_distances(g: &Subgraph) -> BTreeMap<(String, String), usize> {
    let ids: Vec<String> = g.entity_ids().map(|i| i.to_string()).collect();
    let inf = usize::MAX / 4;
    let mut d = vec![vec![inf; ids.len()]; ids.len()];
    let at = |id: &str| ids.iter().position(|x| x == id).unwrap();
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0;
    }
    for r in g.relations() {
        let (a, b) = (at(r.source.as_str()), at(r.target.as_str()));
        d[a][b] = 1;
        d[b][a] = 1;
    }
    for k in 0..ids.len() {
        for i in 0..ids.len() {
            for j in 0..ids.len() {
                if d[i][k] + d[k][j] < d[i][j] {
                    d[i][j] = d[i][k] + d[k][j];
                }
            }
        }
    }
    let mut out = BTreeMap::new();
    for (i, a) in ids.iter().enumerate() {
        for (j, b) in ids.iter().enumerate() {
            out.insert((a.clone(), b.clone()), d[i][j]);
        }
    }
    out
}

fn expected_ids(g: &Subgraph, cfg: &RetrievalConfig) -> Option<BTreeSet<String>> {
    let order = ranked(g)?;
    let dist = hop_distances(g);
    let seeds: Vec<&String> = order.iter().take(cfg.seed_count).map(|(id, _)| id).collect();
    let reached: Vec<&String> = order
        .iter()
        .map(|(id, _)| id)
        .filter(|v| {
            seeds
                .iter()
                .any(|s| dist[&((*s).clone(), (*v).clone())] <= cfg.hop_radius)
        })
        .collect();
    Some(reached.into_iter().take(cfg.max_entities).cloned().collect())
}

fn assert_induced(sub: &Subgraph, g: &Subgraph) {
    for e in sub.entities() {
        assert_eq!(g.entity(&e.id), Some(e));
    }
    let expected: Vec<&Relation> = g
        .relations()
        .iter()
        .filter(|r| sub.contains_entity(&r.source) && sub.contains_entity(&r.target))
        .collect();
    assert_eq!(sub.relations().iter().collect::<Vec<_>>(), expected);
}

#[test]
fn retrieval_matches_bfs_oracle() {
    let embedder = MockEmbedder::new(EMBED_SEED);
    let configs = [
        RetrievalConfig {
            seed_count: 3,
            hop_radius: 1,
            max_entities: 64,
        },
        RetrievalConfig {
            seed_count: 2,
            hop_radius: 2,
            max_entities: 64,
        },
        RetrievalConfig {
            seed_count: 3,
            hop_radius: 2,
            max_entities: 6,
        },
    ];
    let mut checked = 0;
    for seed in 0..40 {
        let g = query_graph(seed, 20, 0.08);
        for cfg in &configs {
            let Some(expected) = expected_ids(&g, cfg) else {
                continue;
            };
            let sub = retrieve_subgraph(&g, QUERY, cfg, &embedder, 2).unwrap();
            let got: BTreeSet<String> = sub.entity_ids().map(|i| i.to_string()).collect();
            assert_eq!(got, expected, "seed {seed}, {cfg:?}");
            assert_induced(&sub, &g);
            assert_eq!(sub.provenance(), Provenance::Retrieved);
            checked += 1;
        }
    }
    assert!(checked >= 90, "only {checked} instances were unambiguous");
}

#[test]
fn single_seed_without_hops_is_the_best_match() {
    let g = query_graph(7, 20, 0.2);
    let order = ranked(&g).expect("fixture ranks unambiguously");
    let cfg = RetrievalConfig {
        seed_count: 1,
        hop_radius: 0,
        max_entities: 1,
    };
    let sub = retrieve_subgraph(&g, QUERY, &cfg, &MockEmbedder::new(EMBED_SEED), 1).unwrap();
    assert_eq!(sub.entity_count(), 1);
    assert_eq!(sub.entity_ids().next().unwrap().as_str(), order[0].0);
    assert_eq!(sub.relation_count(), 0);
}

#[test]
fn seeding_every_entity_returns_the_whole_graph() {
    let g = query_graph(3, 15, 0.15);
    let cfg = RetrievalConfig {
        seed_count: 15,
        hop_radius: 0,
        max_entities: 15,
    };
    let sub = retrieve_subgraph(&g, QUERY, &cfg, &MockEmbedder::new(EMBED_SEED), 3).unwrap();
    assert_eq!(sub.fingerprint(), g.fingerprint());
}

#[test]
fn retrieval_is_deterministic_across_worker_counts() {
    let g = query_graph(11, 20, 0.1);
    let cfg = RetrievalConfig {
        seed_count: 4,
        hop_radius: 1,
        max_entities: 10,
    };
    let e = MockEmbedder::new(EMBED_SEED);
    let one = retrieve_subgraph(&g, QUERY, &cfg, &e, 1).unwrap();
    let many = retrieve_subgraph(&g, QUERY, &cfg, &e, 8).unwrap();
    assert_eq!(one, many);
}

#[test]
fn invalid_requests_are_rejected() {
    let e = MockEmbedder::new(EMBED_SEED);
    let g = query_graph(1, 5, 0.3);
    let zero = RetrievalConfig {
        seed_count: 0,
        ..RetrievalConfig::default()
    };
    assert!(matches!(
        retrieve_subgraph(&g, QUERY, &zero, &e, 1),
        Err(IngestError::InvalidConfig(_))
    ));
    let small = RetrievalConfig {
        seed_count: 5,
        hop_radius: 1,
        max_entities: 4,
    };
    assert!(matches!(
        retrieve_subgraph(&g, QUERY, &small, &e, 1),
        Err(IngestError::InvalidConfig(_))
    ));
    assert!(matches!(
        retrieve_subgraph(
            &Subgraph::empty(Provenance::Global),
            QUERY,
            &RetrievalConfig::default(),
            &e,
            1
        ),
        Err(IngestError::EmptyGraph)
    ));
    assert!(retrieve_subgraph(&g, "   ", &RetrievalConfig::default(), &e, 1).is_err());
}
