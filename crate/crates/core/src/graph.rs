//! Undirected simple graphs and the nonlinear preferential-attachment generator.
//!
//! Node ids are dense integers `0..n` in arrival order. Every undirected edge
//! `{u, v}` gives rise to two directed dyads, `(u, v)` and `(v, u)`.

use std::collections::BTreeSet;
use std::io::{Read, Write};

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An ordered ego/alter pair drawn from an undirected edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DirectedDyad {
    pub ego: usize,
    pub alter: usize,
}

impl DirectedDyad {
    pub fn new(ego: usize, alter: usize) -> Self {
        Self { ego, alter }
    }

    pub fn reversed(self) -> Self {
        Self { ego: self.alter, alter: self.ego }
    }

    /// The undirected edge this dyad orients, as `(min, max)`.
    pub fn edge(self) -> (usize, usize) {
        if self.ego < self.alter {
            (self.ego, self.alter)
        } else {
            (self.alter, self.ego)
        }
    }
}

/// Immutable undirected simple graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    node_count: usize,
    /// Canonical `(u, v)` with `u < v`, sorted.
    edges: Vec<(usize, usize)>,
    /// Sorted neighbour lists.
    adjacency: Vec<Vec<usize>>,
    /// `offsets[i]` is the index of node i's first dyad in `directed_dyads()`.
    offsets: Vec<usize>,
}

impl Graph {
    /// Builds a graph from undirected edges. Orientation of the input pairs is
    /// irrelevant; self-loops, duplicates and out-of-range ids are rejected.
    pub fn from_edges<I>(node_count: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut canon = BTreeSet::new();
        for (u, v) in edges {
            if u >= node_count || v >= node_count {
                return Err(Error::InvalidParameter(format!(
                    "edge ({u}, {v}) references a node outside 0..{node_count}"
                )));
            }
            if u == v {
                return Err(Error::InvalidParameter(format!("self-loop on node {u}")));
            }
            let e = (u.min(v), u.max(v));
            if !canon.insert(e) {
                return Err(Error::InvalidParameter(format!("duplicate edge ({}, {})", e.0, e.1)));
            }
        }
        let edges: Vec<_> = canon.into_iter().collect();
        let mut adjacency = vec![Vec::new(); node_count];
        for &(u, v) in &edges {
            adjacency[u].push(v);
            adjacency[v].push(u);
        }
        for nbrs in &mut adjacency {
            nbrs.sort_unstable();
        }
        let mut offsets = Vec::with_capacity(node_count + 1);
        offsets.push(0);
        for nbrs in &adjacency {
            offsets.push(offsets.last().unwrap() + nbrs.len());
        }
        Ok(Self { node_count, edges, adjacency, offsets })
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.adjacency[node]
    }

    pub fn degree(&self, node: usize) -> usize {
        self.adjacency[node].len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.adjacency.iter().map(Vec::len).collect()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        u < self.node_count && self.adjacency[u].binary_search(&v).is_ok()
    }

    pub fn dyad_count(&self) -> usize {
        2 * self.edges.len()
    }

    /// Position of `(ego, alter)` within `directed_dyads()`.
    pub fn dyad_index(&self, ego: usize, alter: usize) -> Option<usize> {
        if ego >= self.node_count {
            return None;
        }
        self.adjacency[ego].binary_search(&alter).ok().map(|pos| self.offsets[ego] + pos)
    }

    /// Every edge in both orientations, sorted by ego then alter.
    pub fn directed_dyads(&self) -> Vec<DirectedDyad> {
        let mut out = Vec::with_capacity(2 * self.edges.len());
        for (ego, nbrs) in self.adjacency.iter().enumerate() {
            out.extend(nbrs.iter().map(|&alter| DirectedDyad { ego, alter }));
        }
        out
    }

    /// Writes `src,dst` rows, one per undirected edge with `src < dst`.
    pub fn write_edge_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
        w.write_record(["src", "dst"])?;
        for &(u, v) in &self.edges {
            w.write_record([u.to_string(), v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a `src,dst` edge list with integer ids. The node count is one
    /// past the largest id unless `node_count` is given.
    pub fn read_edge_csv<R: Read>(reader: R, node_count: Option<usize>) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.len() != 2 || &headers[0] != "src" || &headers[1] != "dst" {
            return Err(Error::Schema(format!(
                "expected header `src,dst`, found `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut edges = Vec::new();
        let mut max_id = None::<usize>;
        for rec in rdr.records() {
            let rec = rec?;
            let parse =
                |s: &str| s.trim().parse::<usize>().map_err(|_| Error::Schema(format!("non-integer node id `{s}`")));
            let (u, v) = (parse(&rec[0])?, parse(&rec[1])?);
            max_id = Some(max_id.map_or(u.max(v), |m| m.max(u).max(v)));
            edges.push((u, v));
        }
        let n = node_count.unwrap_or(max_id.map_or(0, |m| m + 1));
        Self::from_edges(n, edges)
    }
}

/// Nonlinear preferential attachment.
///
/// Starts from a complete graph on `m + 1` nodes. Each later node attaches to
/// `m` distinct existing nodes drawn without replacement with probability
/// proportional to `D_v^k`, using degrees frozen at the node's arrival.
pub fn generate_pa_graph<R: Rng + ?Sized>(n: usize, m: usize, k: f64, rng: &mut R) -> Result<Graph> {
    if m < 1 {
        return Err(Error::InvalidParameter("links per node m must be at least 1".into()));
    }
    if n <= m {
        return Err(Error::InvalidParameter(format!("node count {n} must exceed links per node {m}")));
    }
    if !(k >= 0.0 && k.is_finite()) {
        return Err(Error::InvalidParameter(format!("attachment exponent {k} must be finite and >= 0")));
    }

    let seed = m + 1;
    let mut edges = Vec::with_capacity(seed * m / 2 + (n - seed) * m);
    let mut degree = vec![0usize; n];
    for u in 0..seed {
        for v in (u + 1)..seed {
            edges.push((u, v));
        }
    }
    degree[..seed].fill(m);

    let mut weights = Vec::with_capacity(n);
    weights.extend((0..seed).map(|v| (degree[v] as f64).powf(k)));
    for node in seed..n {
        let chosen = index::sample_weighted(rng, node, |v| weights[v], m)
            .map_err(|e| Error::Numerical(format!("attachment sampling failed: {e}")))?;
        for target in chosen.iter() {
            edges.push((target, node));
            degree[target] += 1;
            weights[target] = (degree[target] as f64).powf(k);
        }
        degree[node] = m;
        weights.push((m as f64).powf(k));
    }
    Graph::from_edges(n, edges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(matches!(generate_pa_graph(5, 5, 0.8, &mut rng(0)), Err(Error::InvalidParameter(_))));
        assert!(matches!(generate_pa_graph(3, 5, 0.8, &mut rng(0)), Err(Error::InvalidParameter(_))));
        assert!(matches!(generate_pa_graph(10, 0, 0.8, &mut rng(0)), Err(Error::InvalidParameter(_))));
        assert!(generate_pa_graph(10, 2, -1.0, &mut rng(0)).is_err());
    }

    #[test]
    fn seed_only_graph_is_complete() {
        for k in [0.0, 0.8, 2.0] {
            let g = generate_pa_graph(6, 5, k, &mut rng(1)).unwrap();
            assert_eq!(g.node_count(), 6);
            assert_eq!(g.edge_count(), 15);
            for u in 0..6 {
                for v in 0..6 {
                    assert_eq!(g.has_edge(u, v), u != v);
                }
            }
        }
    }

    #[test]
    fn edge_count_matches_enumeration() {
        // complete seed on 3 nodes has 3 edges, then 2 per each of the other 97 nodes
        let seed_edges = (0..3).flat_map(|u| (u + 1..3).map(move |v| (u, v))).count();
        let expected = seed_edges + 2 * (100 - 3);
        assert_eq!(expected, 197);
        let g = generate_pa_graph(100, 2, 1.0, &mut rng(2)).unwrap();
        assert_eq!(g.edge_count(), expected);
    }

    #[test]
    fn full_scale_node_count() {
        let g = generate_pa_graph(4000, 5, 0.8, &mut rng(3)).unwrap();
        assert_eq!(g.node_count(), 4000);
        assert_eq!(g.edge_count(), 15 + 5 * (4000 - 6));
    }

    #[test]
    fn each_arrival_brings_m_distinct_links_to_older_nodes() {
        let g = generate_pa_graph(300, 4, 0.8, &mut rng(4)).unwrap();
        for node in 5..300 {
            let older: Vec<_> = g.neighbors(node).iter().filter(|&&v| v < node).collect();
            assert_eq!(older.len(), 4, "node {node}");
        }
    }

    #[test]
    fn generated_graph_is_connected() {
        let g = generate_pa_graph(500, 1, 0.8, &mut rng(5)).unwrap();
        let mut seen = vec![false; g.node_count()];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(u) = stack.pop() {
            for &v in g.neighbors(u) {
                if !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn deterministic_given_seed() {
        let a = generate_pa_graph(400, 5, 0.8, &mut rng(9)).unwrap();
        let b = generate_pa_graph(400, 5, 0.8, &mut rng(9)).unwrap();
        let c = generate_pa_graph(400, 5, 0.8, &mut rng(10)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.edges(), c.edges());
    }

    #[test]
    fn heavy_tailed_degrees() {
        let mut hits = 0;
        for s in 0..100 {
            let g = generate_pa_graph(1000, 5, 0.8, &mut rng(100 + s)).unwrap();
            let mut d = g.degrees();
            d.sort_unstable();
            let median = d[d.len() / 2];
            if *d.last().unwrap() > 5 * median {
                hits += 1;
            }
        }
        assert_eq!(hits, 100);
    }

    #[test]
    fn directed_dyads_small_cases() {
        let single = Graph::from_edges(3, [(2, 1)]).unwrap();
        assert_eq!(single.directed_dyads(), vec![DirectedDyad::new(1, 2), DirectedDyad::new(2, 1)]);
        assert!(Graph::from_edges(0, []).unwrap().directed_dyads().is_empty());
        let tri = Graph::from_edges(3, [(0, 1), (1, 2), (0, 2)]).unwrap();
        let d = tri.directed_dyads();
        assert_eq!(d.len(), 6);
        assert!(d.windows(2).all(|w| w[0] < w[1]));
        for (idx, dy) in d.iter().enumerate() {
            assert_eq!(tri.dyad_index(dy.ego, dy.alter), Some(idx));
        }
        assert_eq!(single.dyad_index(0, 1), None);
    }

    #[test]
    fn from_edges_validates() {
        assert!(Graph::from_edges(3, [(0, 0)]).is_err());
        assert!(Graph::from_edges(3, [(0, 1), (1, 0)]).is_err());
        assert!(Graph::from_edges(3, [(0, 3)]).is_err());
    }

    #[test]
    fn edge_csv_round_trip() {
        let g = generate_pa_graph(50, 3, 0.8, &mut rng(7)).unwrap();
        let mut buf = Vec::new();
        g.write_edge_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("src,dst\n"));
        let back = Graph::read_edge_csv(&buf[..], Some(50)).unwrap();
        assert_eq!(g, back);
        assert!(Graph::read_edge_csv("a,b\n0,1\n".as_bytes(), None).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]
            #[test]
            fn degree_sum_and_dyads(n in 3usize..120, m in 1usize..4, k in 0.0f64..2.0, seed in any::<u64>()) {
                prop_assume!(n > m);
                let g = generate_pa_graph(n, m, k, &mut rng(seed)).unwrap();
                let dsum: usize = g.degrees().iter().sum();
                prop_assert_eq!(dsum, 2 * g.edge_count());
                prop_assert_eq!(g.directed_dyads().len(), dsum);
                for &(u, v) in g.edges() {
                    prop_assert!(u < v && v < n);
                }
            }
        }
    }
}
