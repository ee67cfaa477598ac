//! Fixture builders and brute-force reference implementations shared by the
//! integration tests.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use xgrag_core::backend::mock::{token_coordinate, tokens};
use xgrag_core::graph::{Entity, Provenance, Relation, Subgraph};

pub const EMBED_SEED: u64 = 0;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn fixture_path(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

/// Compare `actual` with a committed golden file. `XGRAG_BLESS=1` rewrites it.
pub fn assert_golden(name: &str, actual: &str) {
    let path = fixture_path(name);
    if std::env::var("XGRAG_BLESS").as_deref() == Ok("1") {
        std::fs::write(&path, actual).unwrap();
    }
    let expected =
        std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("missing golden file {}: {e}", path.display()));
    assert!(expected == actual, "{} differs from the golden file", path.display());
}

/// Hands out tokens whose mock-embedding coordinates avoid a reserved set.
pub struct TokenFactory {
    seed: u64,
    reserved: HashSet<usize>,
    counter: usize,
    tag: String,
}

impl TokenFactory {
    pub fn new(tag: impl Into<String>) -> Self {
        Self {
            seed: EMBED_SEED,
            reserved: HashSet::new(),
            counter: 0,
            tag: tag.into(),
        }
    }

    /// Reserve the coordinate of a fixed token; false if already taken.
    pub fn reserve(&mut self, token: &str) -> bool {
        self.reserved.insert(token_coordinate(self.seed, token))
    }

    fn next(&mut self, prefix: &str) -> String {
        self.counter += 1;
        format!("{prefix}{}{}", self.tag, self.counter)
    }

    /// A token on a fresh coordinate, which is then reserved.
    pub fn exclusive(&mut self, prefix: &str) -> String {
        loop {
            let t = self.next(prefix);
            if self.reserve(&t) {
                return t;
            }
        }
    }

    /// A token that stays off every reserved coordinate without reserving.
    pub fn outside(&mut self, prefix: &str) -> String {
        loop {
            let t = self.next(prefix);
            if !self.reserved.contains(&token_coordinate(self.seed, &t)) {
                return t;
            }
        }
    }
}

/// A connected random graph on `ids`: a random spanning tree plus `extra`
/// further relations, each with a fresh label.
pub fn connected_relations(rng: &mut ChaCha8Rng, ids: &[String], extra: usize) -> Vec<Relation> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    let mut push = |a: &str, b: &str, out: &mut Vec<Relation>| {
        if a != b && seen.insert((a.to_string(), b.to_string())) {
            let label = format!("link{}", out.len());
            out.push(Relation::new(a, label, b, ""));
        }
    };
    for i in 1..ids.len() {
        let j = rng.gen_range(0..i);
        if rng.gen_bool(0.5) {
            push(&ids[i], &ids[j], &mut out);
        } else {
            push(&ids[j], &ids[i], &mut out);
        }
    }
    for _ in 0..extra {
        let a = rng.gen_range(0..ids.len());
        let b = rng.gen_range(0..ids.len());
        push(&ids[a], &ids[b], &mut out);
    }
    out
}

pub struct OracleFixture {
    pub graph: Subgraph,
    /// Answer-set names, primary first.
    pub answer: Vec<String>,
    pub answer_ids: Vec<String>,
    pub query: String,
}

/// A connected 15-30 node graph with a planted 2-4 entity answer set.
///
/// Answer entities share two evidence tokens and carry private ones (four
/// for the primary, six for the others); every other token avoids the
/// answer vocabulary's embedding coordinates, so fillers are exactly
/// irrelevant to the answer.
pub fn oracle_fixture(seed: u64) -> OracleFixture {
    let mut rng = rng(seed);
    let n = rng.gen_range(15..=30);
    let k = rng.gen_range(2..=4);
    let mut tf = TokenFactory::new(format!("s{seed}x"));
    assert!(tf.reserve("Answer"));
    assert!(tf.reserve("PERSON"));
    assert!(tf.reserve("ITEM"));

    let shared: Vec<String> = (0..2).map(|_| tf.exclusive("ev")).collect();
    let mut answer_entities = Vec::new();
    for i in 0..k {
        let name = format!("{} {}", tf.exclusive("Ana"), tf.exclusive("Anb"));
        let private = if i == 0 { 4 } else { 6 };
        let mut desc = shared.clone();
        desc.extend((0..private).map(|_| tf.exclusive("pv")));
        answer_entities.push((name, desc.join(" ")));
    }

    let mut ids: Vec<String> = (0..n).map(|i| format!("e{i:02}")).collect();
    ids.shuffle(&mut rng);
    let mut entities = Vec::new();
    let mut answer = Vec::new();
    let mut answer_ids = Vec::new();
    for (i, id) in ids.iter().enumerate() {
        if let Some((name, desc)) = answer_entities.get(i) {
            entities.push(Entity::new(id.as_str(), name.as_str(), "PERSON", desc.as_str()));
            answer.push(name.clone());
            answer_ids.push(id.clone());
        } else {
            let name = format!("{} {}", tf.outside("Fa"), tf.outside("Fb"));
            let desc = format!("{} {}", tf.outside("fd"), tf.outside("fd"));
            entities.push(Entity::new(id.as_str(), name, "ITEM", desc));
        }
    }
    ids.sort();
    let relations = connected_relations(&mut rng, &ids, n / 3);
    let graph = Subgraph::new(entities, relations, Provenance::Global).unwrap();
    OracleFixture {
        graph,
        query: format!("Who holds {}?", shared[0]),
        answer,
        answer_ids,
    }
}

/// 21 entities and 15 relations: a few small stories plus isolated nodes.
pub fn appendix_sized_graph() -> Subgraph {
    let entities: Vec<Entity> = (0..21)
        .map(|i| {
            Entity::new(
                format!("v{i:02}"),
                format!("Node {i}"),
                "THING",
                format!("item number {i}"),
            )
        })
        .collect();
    let pairs = [
        (0, 1),
        (1, 2),
        (2, 3),
        (3, 0),
        (0, 4),
        (4, 5),
        (5, 6),
        (6, 7),
        (8, 9),
        (9, 10),
        (10, 8),
        (11, 12),
        (12, 13),
        (14, 15),
        (15, 16),
    ];
    let relations = pairs
        .iter()
        .map(|&(a, b)| Relation::new(format!("v{a:02}"), "relates to", format!("v{b:02}"), "a connection"))
        .collect();
    Subgraph::new(entities, relations, Provenance::Deduplicated).unwrap()
}

/// Twelve entities with varied degrees. Every relation label is a single
/// token on its own embedding coordinate, so under the relation-digest mock
/// a node's removal shift depends on its degree alone.
pub fn degree_fixture() -> Subgraph {
    let mut tf = TokenFactory::new("deg");
    assert!(tf.reserve("Relations"));
    let entities: Vec<Entity> = (0..12)
        .map(|i| Entity::new(format!("n{i:02}"), format!("Station {i}"), "PLACE", ""))
        .collect();
    let pairs = [
        (0, 1),
        (0, 2),
        (0, 3),
        (0, 4),
        (0, 5),
        (0, 6),
        (1, 2),
        (1, 3),
        (1, 4),
        (1, 7),
        (2, 8),
        (3, 9),
        (7, 10),
        (8, 11),
        (9, 10),
    ];
    let relations = pairs
        .iter()
        .map(|&(a, b)| Relation::new(format!("n{a:02}"), tf.exclusive("via"), format!("n{b:02}"), ""))
        .collect();
    Subgraph::new(entities, relations, Provenance::Deduplicated).unwrap()
}

/// Random graph over typed entities with random names drawn from a small
/// vocabulary, so that similar names occur.
pub fn random_typed_graph(rng: &mut ChaCha8Rng, n: usize, edge_p: f64) -> Subgraph {
    const WORDS: [&str; 8] = ["gold", "watch", "comb", "Della", "Jim", "hair", "chain", "shop"];
    const TYPES: [&str; 2] = ["PERSON", "OBJECT"];
    let entities: Vec<Entity> = (0..n)
        .map(|i| {
            let len = rng.gen_range(1..=3);
            let name: Vec<&str> = (0..len).map(|_| *WORDS.choose(rng).unwrap()).collect();
            Entity::new(
                format!("r{i:02}"),
                name.join(" "),
                *TYPES.choose(rng).unwrap(),
                if rng.gen_bool(0.5) {
                    format!("about {i}")
                } else {
                    String::new()
                },
            )
        })
        .collect();
    let mut relations = Vec::new();
    for a in 0..n {
        for b in 0..n {
            if a != b && rng.gen_bool(edge_p) {
                let label = if rng.gen_bool(0.5) { "knows" } else { "near" };
                relations.push(Relation::new(
                    format!("r{a:02}"),
                    label,
                    format!("r{b:02}"),
                    format!("{a}-{b}"),
                ));
            }
        }
    }
    Subgraph::new(entities, relations, Provenance::Retrieved).unwrap()
}

/// Random directed graph with plain ids; some nodes are left dangling.
pub fn random_digraph(rng: &mut ChaCha8Rng, n: usize, edge_p: f64) -> Subgraph {
    let entities: Vec<Entity> = (0..n)
        .map(|i| Entity::new(format!("p{i:02}"), format!("P{i}"), "T", ""))
        .collect();
    let mut relations = Vec::new();
    for a in 0..n {
        for b in 0..n {
            if a != b && rng.gen_bool(edge_p) {
                relations.push(Relation::new(format!("p{a:02}"), "to", format!("p{b:02}"), ""));
            }
        }
    }
    Subgraph::new(entities, relations, Provenance::Deduplicated).unwrap()
}

pub mod oracle {
    //! Straightforward reference computations, written independently of
    //! the library code they check.

    use super::*;

    /// Undirected degree by scanning the relation list per node.
    pub fn degrees(g: &Subgraph) -> BTreeMap<String, usize> {
        g.entity_ids()
            .map(|id| {
                let d = g
                    .relations()
                    .iter()
                    .map(|r| usize::from(r.source == *id) + usize::from(r.target == *id))
                    .sum();
                (id.to_string(), d)
            })
            .collect()
    }

    /// Connected components by transitive closure of the adjacency matrix.
    pub fn components(vertices: &[String], edges: &[(String, String)]) -> BTreeSet<BTreeSet<String>> {
        let n = vertices.len();
        let idx = |v: &String| vertices.iter().position(|x| x == v).unwrap();
        let mut reach = vec![vec![false; n]; n];
        for (i, row) in reach.iter_mut().enumerate() {
            row[i] = true;
        }
        for (a, b) in edges {
            let (i, j) = (idx(a), idx(b));
            reach[i][j] = true;
            reach[j][i] = true;
        }
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    if reach[i][k] && reach[k][j] {
                        reach[i][j] = true;
                    }
                }
            }
        }
        (0..n)
            .map(|i| (0..n).filter(|&j| reach[i][j]).map(|j| vertices[j].clone()).collect())
            .collect()
    }

    /// PageRank by solving `(I - d M) x = (1 - d)/n * 1` with Gaussian
    /// elimination, where dangling columns spread uniformly.
    pub fn pagerank_linear(g: &Subgraph, d: f64) -> BTreeMap<String, f64> {
        let ids: Vec<String> = g.entity_ids().map(|i| i.to_string()).collect();
        let n = ids.len();
        let idx = |v: &str| ids.iter().position(|x| x == v).unwrap();
        let mut out = vec![0usize; n];
        for r in g.relations() {
            out[idx(r.source.as_str())] += 1;
        }
        let mut m = vec![vec![0.0f64; n]; n];
        for r in g.relations() {
            let (s, t) = (idx(r.source.as_str()), idx(r.target.as_str()));
            m[t][s] += 1.0 / out[s] as f64;
        }
        for (s, &o) in out.iter().enumerate() {
            if o == 0 {
                for row in m.iter_mut() {
                    row[s] = 1.0 / n as f64;
                }
            }
        }
        let mut a: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let mut row: Vec<f64> = (0..n).map(|j| -d * m[i][j]).collect();
                row[i] += 1.0;
                row.push((1.0 - d) / n as f64);
                row
            })
            .collect();
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))
                .unwrap();
            a.swap(col, pivot);
            let pivot_row = a[col].clone();
            for (r, row) in a.iter_mut().enumerate() {
                if r != col {
                    let f = row[col] / pivot_row[col];
                    for (x, p) in row[col..].iter_mut().zip(&pivot_row[col..]) {
                        *x -= f * p;
                    }
                }
            }
        }
        ids.into_iter()
            .enumerate()
            .map(|(i, id)| (id, a[i][n] / a[i][i]))
            .collect()
    }

    /// Doubled average ranks as integers: rank r becomes 2r, so ties that
    /// average to a half stay exact.
    fn doubled_ranks(x: &[f64]) -> Vec<i128> {
        x.iter()
            .map(|&v| {
                let less = x.iter().filter(|&&u| u < v).count() as i128;
                let equal = x.iter().filter(|&&u| u == v).count() as i128;
                // Average of positions less+1 ..= less+equal, doubled.
                2 * less + equal + 1
            })
            .collect()
    }

    /// Spearman's rho from integer rank arithmetic.
    pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
        let (rx, ry) = (doubled_ranks(x), doubled_ranks(y));
        let n = rx.len() as i128;
        let sx: i128 = rx.iter().sum();
        let sy: i128 = ry.iter().sum();
        let sxy: i128 = rx.iter().zip(&ry).map(|(a, b)| a * b).sum();
        let sxx: i128 = rx.iter().map(|a| a * a).sum();
        let syy: i128 = ry.iter().map(|b| b * b).sum();
        let cov = n * sxy - sx * sy;
        let vx = n * sxx - sx * sx;
        let vy = n * syy - sy * sy;
        cov as f64 / ((vx as f64).sqrt() * (vy as f64).sqrt())
    }

    pub struct Counts {
        pub tp: usize,
        pub fp: usize,
        pub fn_: usize,
        pub tn: usize,
    }

    pub fn confusion(pred: &[bool], truth: &[bool]) -> Counts {
        let pairs: Vec<(bool, bool)> = pred.iter().copied().zip(truth.iter().copied()).collect();
        let count = |p: bool, t: bool| pairs.iter().filter(|&&x| x == (p, t)).count();
        Counts {
            tp: count(true, true),
            fp: count(true, false),
            fn_: count(false, true),
            tn: count(false, false),
        }
    }

    pub fn f1(pred: &[bool], truth: &[bool]) -> f64 {
        let c = confusion(pred, truth);
        if c.tp == 0 {
            return 0.0;
        }
        let p = c.tp as f64 / (c.tp + c.fp) as f64;
        let r = c.tp as f64 / (c.tp + c.fn_) as f64;
        2.0 * p * r / (p + r)
    }

    /// Repeatedly pick the best remaining item: descending score, then
    /// ascending key.
    pub fn order<K: Ord + Clone>(items: &[(K, f64)]) -> Vec<K> {
        let mut left: Vec<(K, f64)> = items.to_vec();
        let mut out = Vec::new();
        while !left.is_empty() {
            let mut best = 0;
            for i in 1..left.len() {
                let (a, b) = (&left[i], &left[best]);
                if a.1 > b.1 || (a.1 == b.1 && a.0 < b.0) {
                    best = i;
                }
            }
            out.push(left.remove(best).0);
        }
        out
    }

    pub fn reciprocal_rank<K: Ord + Clone>(items: &[(K, f64)], target: &K) -> f64 {
        let ordered = order(items);
        for (i, k) in ordered.iter().enumerate() {
            if k == target {
                return 1.0 / (i + 1) as f64;
            }
        }
        panic!("target not ranked");
    }

    pub fn precision_at_k<K: Ord + Clone>(predicted: &[K], truth: &[K], k: u32) -> f64 {
        let n = truth.len();
        let nk = ((k as f64 * n as f64) / 100.0).ceil() as usize;
        let a: BTreeSet<&K> = predicted[..nk].iter().collect();
        let b: BTreeSet<&K> = truth[..nk].iter().collect();
        a.intersection(&b).count() as f64 / nk as f64
    }

    /// Exact-name, same-type merge: clusters of entities whose names are
    /// byte-identical.
    pub fn exact_name_clusters(g: &Subgraph) -> BTreeSet<BTreeSet<String>> {
        let mut groups: BTreeMap<(String, String), BTreeSet<String>> = BTreeMap::new();
        for e in g.entities() {
            groups
                .entry((e.type_label.clone(), e.name.clone()))
                .or_default()
                .insert(e.id.to_string());
        }
        groups.into_values().collect()
    }

    /// Mock embedding computed from token counts without the library.
    pub fn mock_counts(text: &str) -> BTreeMap<usize, f64> {
        let mut v = BTreeMap::new();
        for t in tokens(text) {
            *v.entry(token_coordinate(EMBED_SEED, t)).or_insert(0.0) += 1.0;
        }
        v
    }
}
