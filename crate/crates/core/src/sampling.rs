//! Ground-truth selection: random and covariate-biased designs over nodes or edges.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::simgen::{inv_logit, NodeTable};

/// Degree and feature coefficients of the biased inclusion logits.
pub const BIAS_DEGREE_COEF: f64 = 0.05;
pub const BIAS_FEATURE_COEF: f64 = 0.2;

const ALPHA_BRACKET: (f64, f64) = (-50.0, 50.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingLevel {
    Node,
    Edge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMode {
    Random,
    Biased,
}

/// One of the four ground-truth designs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SamplingScheme {
    pub level: SamplingLevel,
    pub mode: SamplingMode,
}

impl SamplingLevel {
    pub fn as_str(self) -> &'static str {
        match self {
            SamplingLevel::Node => "node",
            SamplingLevel::Edge => "edge",
        }
    }
}

impl FromStr for SamplingLevel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "node" => Ok(SamplingLevel::Node),
            "edge" => Ok(SamplingLevel::Edge),
            _ => Err(Error::InvalidParameter(format!("unknown sampling level `{s}`"))),
        }
    }
}

impl SamplingScheme {
    pub const fn new(level: SamplingLevel, mode: SamplingMode) -> Self {
        Self { level, mode }
    }

    pub fn as_str(self) -> &'static str {
        match (self.level, self.mode) {
            (SamplingLevel::Node, SamplingMode::Random) => "node_random",
            (SamplingLevel::Edge, SamplingMode::Random) => "edge_random",
            (SamplingLevel::Node, SamplingMode::Biased) => "node_biased",
            (SamplingLevel::Edge, SamplingMode::Biased) => "edge_biased",
        }
    }
}

impl fmt::Display for SamplingScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SamplingScheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        use SamplingLevel::*;
        use SamplingMode::*;
        [(Node, Random), (Edge, Random), (Node, Biased), (Edge, Biased)]
            .into_iter()
            .map(|(l, m)| SamplingScheme::new(l, m))
            .find(|sc| sc.as_str() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown sampling scheme `{s}`")))
    }
}

/// Parameters of a sampling draw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplePlan {
    pub scheme: SamplingScheme,
    /// Fraction of nodes (node level) or undirected edges (edge level).
    pub target_fraction: f64,
    /// Calibrated intercept of the inclusion logit, biased modes only.
    pub alpha: Option<f64>,
}

/// Which nodes and directed dyads have observed categories.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthMask {
    pub level: SamplingLevel,
    nodes: Vec<bool>,
    /// Aligned with `Graph::directed_dyads()`.
    dyads: Vec<bool>,
    pub alpha: Option<f64>,
}

impl GroundTruthMask {
    /// Node-level mask: dyads are labeled when both endpoints are.
    pub fn from_nodes(g: &Graph, labeled: Vec<bool>) -> Result<Self> {
        if labeled.len() != g.node_count() {
            return Err(Error::InvalidParameter("node mask length differs from node count".into()));
        }
        let dyads = g.directed_dyads().iter().map(|d| labeled[d.ego] && labeled[d.alter]).collect();
        Ok(Self { level: SamplingLevel::Node, nodes: labeled, dyads, alpha: None })
    }

    /// Edge-level mask: both orientations of each sampled edge are labeled and
    /// so are its endpoints.
    pub fn from_edges(g: &Graph, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut nodes = vec![false; g.node_count()];
        let mut dyads = vec![false; g.dyad_count()];
        for (u, v) in edges {
            let (a, b) = (
                g.dyad_index(u, v).ok_or_else(|| Error::InvalidParameter(format!("({u}, {v}) is not an edge")))?,
                g.dyad_index(v, u).expect("undirected adjacency"),
            );
            dyads[a] = true;
            dyads[b] = true;
            nodes[u] = true;
            nodes[v] = true;
        }
        Ok(Self { level: SamplingLevel::Edge, nodes, dyads, alpha: None })
    }

    /// A mask in which every node and dyad is labeled.
    pub fn full(g: &Graph) -> Self {
        Self {
            level: SamplingLevel::Node,
            nodes: vec![true; g.node_count()],
            dyads: vec![true; g.dyad_count()],
            alpha: None,
        }
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = Some(alpha);
        self
    }

    pub fn node_labeled(&self, node: usize) -> bool {
        self.nodes[node]
    }

    pub fn dyad_labeled(&self, dyad_index: usize) -> bool {
        self.dyads[dyad_index]
    }

    pub fn nodes(&self) -> &[bool] {
        &self.nodes
    }

    pub fn dyads(&self) -> &[bool] {
        &self.dyads
    }

    pub fn labeled_node_count(&self) -> usize {
        self.nodes.iter().filter(|&&b| b).count()
    }

    pub fn labeled_dyad_count(&self) -> usize {
        self.dyads.iter().filter(|&&b| b).count()
    }

    /// Checks the structural invariant for this mask's level.
    pub fn is_consistent(&self, g: &Graph) -> bool {
        g.directed_dyads().iter().enumerate().all(|(idx, d)| {
            let both = self.nodes[d.ego] && self.nodes[d.alter];
            let mirror = self.dyads[g.dyad_index(d.alter, d.ego).unwrap()];
            match self.level {
                SamplingLevel::Node => self.dyads[idx] == both,
                SamplingLevel::Edge => !self.dyads[idx] || (both && mirror),
            }
        })
    }

    /// Writes a single-column `node_id` list of labeled nodes.
    pub fn write_nodes_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
        w.write_record(["node_id"])?;
        for (i, _) in self.nodes.iter().enumerate().filter(|(_, &b)| b) {
            w.write_record([i.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes `src,dst` for every labeled directed dyad.
    pub fn write_dyads_csv<W: Write>(&self, g: &Graph, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
        w.write_record(["src", "dst"])?;
        for (d, _) in g.directed_dyads().iter().zip(&self.dyads).filter(|(_, &b)| b) {
            w.write_record([d.ego.to_string(), d.alter.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn sample_size(fraction: f64, population: usize) -> Result<usize> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidParameter(format!("sampling fraction {fraction} must lie in (0, 1)")));
    }
    let count = (fraction * population as f64).round() as usize;
    if count == 0 {
        return Err(Error::InvalidParameter(format!(
            "fraction {fraction} of {population} units rounds to an empty sample"
        )));
    }
    Ok(count.min(population))
}

/// Simple random sample of `round(fraction * n)` nodes.
pub fn random_node_sample<R: Rng + ?Sized>(g: &Graph, fraction: f64, rng: &mut R) -> Result<GroundTruthMask> {
    let count = sample_size(fraction, g.node_count())?;
    let mut labeled = vec![false; g.node_count()];
    for i in index::sample(rng, g.node_count(), count) {
        labeled[i] = true;
    }
    GroundTruthMask::from_nodes(g, labeled)
}

/// Simple random sample of `round(fraction * |E|)` undirected edges.
pub fn random_edge_sample<R: Rng + ?Sized>(g: &Graph, fraction: f64, rng: &mut R) -> Result<GroundTruthMask> {
    let count = sample_size(fraction, g.edge_count())?;
    let edges = g.edges();
    GroundTruthMask::from_edges(g, index::sample(rng, edges.len(), count).into_iter().map(|e| edges[e]))
}

fn expected_count(scores: &[f64], alpha: f64) -> f64 {
    scores.iter().map(|&s| inv_logit(alpha + s)).sum()
}

/// Intercept `alpha` with `sum(inv_logit(alpha + score)) = target_count`.
pub fn calibrate_alpha(scores: &[f64], target_count: usize) -> Result<f64> {
    if target_count == 0 || target_count >= scores.len() {
        return Err(Error::Calibration(format!(
            "target {target_count} must lie strictly between 0 and {}",
            scores.len()
        )));
    }
    let target = target_count as f64;
    let (mut lo, mut hi) = ALPHA_BRACKET;
    if expected_count(scores, lo) > target || expected_count(scores, hi) < target {
        return Err(Error::Calibration(format!("target {target_count} unreachable for alpha in [{lo}, {hi}]")));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if expected_count(scores, mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 {
            break;
        }
    }
    let alpha = 0.5 * (lo + hi);
    let achieved = expected_count(scores, alpha);
    if (achieved - target).abs() > 0.5 {
        return Err(Error::Calibration(format!("bisection stalled at expected count {achieved}")));
    }
    Ok(alpha)
}

/// Linear inclusion scores `0.05 D_i + 0.2 X_i` for every node.
pub fn node_inclusion_scores(g: &Graph, nt: &NodeTable) -> Vec<f64> {
    (0..g.node_count()).map(|i| BIAS_DEGREE_COEF * g.degree(i) as f64 + BIAS_FEATURE_COEF * nt.x[i]).collect()
}

/// Linear inclusion scores `0.05 (D_i + D_j) + 0.2 (X_i + X_j)` per undirected edge.
pub fn edge_inclusion_scores(g: &Graph, nt: &NodeTable) -> Vec<f64> {
    g.edges()
        .iter()
        .map(|&(u, v)| BIAS_DEGREE_COEF * (g.degree(u) + g.degree(v)) as f64 + BIAS_FEATURE_COEF * (nt.x[u] + nt.x[v]))
        .collect()
}

fn bernoulli_include<R: Rng + ?Sized>(scores: &[f64], alpha: f64, rng: &mut R) -> Vec<bool> {
    scores.iter().map(|&s| rng.random::<f64>() < inv_logit(alpha + s)).collect()
}

/// Independent inclusion with probability `inv_logit(alpha + 0.05 D_i + 0.2 X_i)`.
pub fn biased_node_sample<R: Rng + ?Sized>(
    g: &Graph,
    nt: &NodeTable,
    target_count: usize,
    rng: &mut R,
) -> Result<GroundTruthMask> {
    let scores = node_inclusion_scores(g, nt);
    let alpha = calibrate_alpha(&scores, target_count)?;
    let labeled = bernoulli_include(&scores, alpha, rng);
    Ok(GroundTruthMask::from_nodes(g, labeled)?.with_alpha(alpha))
}

/// Independent per-edge inclusion with the symmetric edge logit.
pub fn biased_edge_sample<R: Rng + ?Sized>(
    g: &Graph,
    nt: &NodeTable,
    target_count: usize,
    rng: &mut R,
) -> Result<GroundTruthMask> {
    let scores = edge_inclusion_scores(g, nt);
    let alpha = calibrate_alpha(&scores, target_count)?;
    let include = bernoulli_include(&scores, alpha, rng);
    let edges = g.edges();
    let chosen = include.iter().zip(edges).filter(|(&b, _)| b).map(|(_, &e)| e);
    Ok(GroundTruthMask::from_edges(g, chosen)?.with_alpha(alpha))
}

/// Draws a mask for `plan`. Biased plans calibrate to the count implied by
/// `target_fraction`.
pub fn draw_mask<R: Rng + ?Sized>(
    g: &Graph,
    nt: &NodeTable,
    plan: &SamplePlan,
    rng: &mut R,
) -> Result<GroundTruthMask> {
    match (plan.scheme.level, plan.scheme.mode) {
        (SamplingLevel::Node, SamplingMode::Random) => random_node_sample(g, plan.target_fraction, rng),
        (SamplingLevel::Edge, SamplingMode::Random) => random_edge_sample(g, plan.target_fraction, rng),
        (SamplingLevel::Node, SamplingMode::Biased) => {
            biased_node_sample(g, nt, sample_size(plan.target_fraction, g.node_count())?, rng)
        }
        (SamplingLevel::Edge, SamplingMode::Biased) => {
            biased_edge_sample(g, nt, sample_size(plan.target_fraction, g.edge_count())?, rng)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use crate::graph::generate_pa_graph;
    use crate::simgen::{gen_features, DgpKind, ZTransform};

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn path(n: usize) -> Graph {
        Graph::from_edges(n, (0..n - 1).map(|i| (i, i + 1))).unwrap()
    }

    fn full_scale_graph(seed: u64) -> (Graph, NodeTable) {
        let mut r = rng(seed);
        let g = generate_pa_graph(4000, 5, 0.8, &mut r).unwrap();
        let nt = gen_features(&g, DgpKind::Main, ZTransform::Zscore, &mut r).unwrap();
        (g, nt)
    }

    #[test]
    fn scheme_names_round_trip() {
        for s in ["node_random", "edge_random", "node_biased", "edge_biased"] {
            assert_eq!(s.parse::<SamplingScheme>().unwrap().as_str(), s);
        }
        assert!("node".parse::<SamplingScheme>().is_err());
    }

    #[test]
    fn random_node_sample_sizes() {
        let (g, _) = full_scale_graph(1);
        let m = random_node_sample(&g, 0.2, &mut rng(2)).unwrap();
        assert_eq!(m.labeled_node_count(), 800);
        assert!(m.is_consistent(&g));

        let p = path(10);
        let one = random_node_sample(&p, 0.1, &mut rng(3)).unwrap();
        assert_eq!(one.labeled_node_count(), 1);
        assert_eq!(one.labeled_dyad_count(), 0);

        let most = random_node_sample(&p, 0.94, &mut rng(4)).unwrap();
        assert_eq!(most.labeled_node_count(), 9);
        let excluded = (0..10).find(|&i| !most.node_labeled(i)).unwrap();
        for (idx, d) in p.directed_dyads().iter().enumerate() {
            assert_eq!(most.dyad_labeled(idx), d.ego != excluded && d.alter != excluded);
        }

        assert!(random_node_sample(&p, 0.01, &mut rng(5)).is_err());
        assert!(random_node_sample(&p, 1.0, &mut rng(5)).is_err());
    }

    #[test]
    fn random_edge_sample_sizes() {
        let (g, _) = full_scale_graph(6);
        let m = random_edge_sample(&g, 0.025, &mut rng(7)).unwrap();
        assert_eq!(m.labeled_dyad_count(), 2 * (0.025 * g.edge_count() as f64).round() as usize);
        let nodes = m.labeled_node_count() as f64;
        assert!((nodes - 800.0).abs() <= 0.15 * 800.0, "{nodes}");
        assert!(m.is_consistent(&g));

        let p = path(5);
        let one = random_edge_sample(&p, 0.2, &mut rng(8)).unwrap();
        assert_eq!(one.labeled_node_count(), 2);
        assert_eq!(one.labeled_dyad_count(), 2);

        let all = GroundTruthMask::from_edges(&p, p.edges().to_vec()).unwrap();
        assert!(all.dyads().iter().all(|&b| b));
    }

    #[test]
    fn calibrate_closed_forms() {
        let zeros = vec![0.0; 400];
        assert_abs_diff_eq!(calibrate_alpha(&zeros, 200).unwrap(), 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(calibrate_alpha(&zeros, 100).unwrap(), (1.0f64 / 3.0).ln(), epsilon = 1e-9);
        assert!(calibrate_alpha(&zeros, 0).is_err());
        assert!(calibrate_alpha(&zeros, 400).is_err());
        // with scores of +100 even alpha = -50 includes every unit
        assert!(matches!(calibrate_alpha(&[100.0; 10], 5), Err(Error::Calibration(_))));
    }

    #[test]
    fn constant_covariates_reduce_to_constant_probability() {
        // cycle: every degree is 2
        let g = Graph::from_edges(200, (0..200).map(|i| (i, (i + 1) % 200))).unwrap();
        let nt = NodeTable { x: vec![0.4; 200], z: vec![0.0; 200], ..Default::default() };
        let scores = node_inclusion_scores(&g, &nt);
        let alpha = calibrate_alpha(&scores, 50).unwrap();
        assert_abs_diff_eq!(inv_logit(alpha + scores[0]), 0.25, epsilon = 1e-9);
        let escores = edge_inclusion_scores(&g, &nt);
        let ealpha = calibrate_alpha(&escores, 20).unwrap();
        assert_abs_diff_eq!(inv_logit(ealpha + escores[7]), 0.1, epsilon = 1e-9);
    }

    #[test]
    fn biased_samples_oversample_high_degree() {
        let (g, nt) = full_scale_graph(9);
        let degrees = g.degrees();
        let pop_mean = degrees.iter().sum::<usize>() as f64 / degrees.len() as f64;
        let mut node_hits = 0;
        let mut edge_hits = 0;
        for r in 0..100 {
            let m = biased_node_sample(&g, &nt, 800, &mut rng(100 + r)).unwrap();
            let sampled: Vec<f64> =
                (0..g.node_count()).filter(|&i| m.node_labeled(i)).map(|i| degrees[i] as f64).collect();
            if sampled.iter().sum::<f64>() / sampled.len() as f64 > pop_mean {
                node_hits += 1;
            }
            let e = biased_edge_sample(&g, &nt, 500, &mut rng(500 + r)).unwrap();
            assert!(e.is_consistent(&g));
            let sampled: Vec<f64> =
                (0..g.node_count()).filter(|&i| e.node_labeled(i)).map(|i| degrees[i] as f64).collect();
            if sampled.iter().sum::<f64>() / sampled.len() as f64 > pop_mean {
                edge_hits += 1;
            }
        }
        assert_eq!(node_hits, 100);
        assert_eq!(edge_hits, 100);
    }

    // Realized counts are Poisson-binomial with variance sum p(1-p), so the
    // share of draws inside +-5% of target is fixed by that variance rather
    // than by the calibration. Check the calibrated mean and the coverage
    // against the normal approximation.
    #[test]
    fn biased_counts_track_target() {
        let (g, nt) = full_scale_graph(10);
        let reps = 200;
        for (level, target) in [(SamplingLevel::Node, 800usize), (SamplingLevel::Edge, 500)] {
            let scores = match level {
                SamplingLevel::Node => node_inclusion_scores(&g, &nt),
                SamplingLevel::Edge => edge_inclusion_scores(&g, &nt),
            };
            let alpha = calibrate_alpha(&scores, target).unwrap();
            assert!((expected_count(&scores, alpha) - target as f64).abs() <= 0.5);
            let sd = scores.iter().map(|&s| inv_logit(alpha + s) * (1.0 - inv_logit(alpha + s))).sum::<f64>().sqrt();
            let band = 0.05 * target as f64;
            let z = (band + 0.5) / sd;
            let expected_cover = statrs::function::erf::erf(z / std::f64::consts::SQRT_2);

            let mut within = 0usize;
            let mut total = 0.0;
            for r in 0..reps {
                let count = match level {
                    SamplingLevel::Node => {
                        biased_node_sample(&g, &nt, target, &mut rng(1000 + r)).unwrap().labeled_node_count()
                    }
                    SamplingLevel::Edge => {
                        biased_edge_sample(&g, &nt, target, &mut rng(2000 + r)).unwrap().labeled_dyad_count() / 2
                    }
                };
                total += count as f64;
                within += usize::from((count as f64 - target as f64).abs() <= band);
            }
            let mean = total / reps as f64;
            assert!((mean - target as f64).abs() <= band, "{level:?} mean {mean}");
            assert!((mean - target as f64).abs() <= 4.0 * sd / (reps as f64).sqrt(), "{level:?} mean {mean}");
            let cover = within as f64 / reps as f64;
            let se = (expected_cover * (1.0 - expected_cover) / reps as f64).sqrt();
            assert!((cover - expected_cover).abs() <= 3.0 * se, "{level:?} coverage {cover} vs {expected_cover}");
        }
    }

    #[test]
    fn random_node_inclusion_is_uniform() {
        let g = path(20);
        let reps = 1000;
        let mut counts = [0usize; 20];
        for r in 0..reps {
            let m = random_node_sample(&g, 0.25, &mut rng(r)).unwrap();
            for (i, c) in counts.iter_mut().enumerate() {
                *c += usize::from(m.node_labeled(i));
            }
        }
        let p = 5.0 / 20.0;
        let se = (reps as f64 * p * (1.0 - p)).sqrt();
        for c in counts {
            assert!((c as f64 - reps as f64 * p).abs() < 3.0 * se + 1.0, "{c}");
        }
    }

    #[test]
    fn random_edge_inclusion_is_uniform() {
        let g = path(21);
        let reps = 1000;
        let mut counts = [0usize; 20];
        for r in 0..reps {
            let m = random_edge_sample(&g, 0.25, &mut rng(r + 7)).unwrap();
            for (e, c) in g.edges().iter().zip(counts.iter_mut()) {
                *c += usize::from(m.dyad_labeled(g.dyad_index(e.0, e.1).unwrap()));
            }
        }
        let p = 5.0 / 20.0;
        let se = (reps as f64 * p * (1.0 - p)).sqrt();
        for c in counts {
            assert!((c as f64 - reps as f64 * p).abs() < 3.0 * se + 1.0, "{c}");
        }
    }

    #[test]
    fn mask_csv_exports() {
        let g = path(3);
        let m = GroundTruthMask::from_edges(&g, [(1, 2)]).unwrap();
        let mut nodes = Vec::new();
        m.write_nodes_csv(&mut nodes).unwrap();
        assert_eq!(String::from_utf8(nodes).unwrap(), "node_id\n1\n2\n");
        let mut dyads = Vec::new();
        m.write_dyads_csv(&g, &mut dyads).unwrap();
        assert_eq!(String::from_utf8(dyads).unwrap(), "src,dst\n1,2\n2,1\n");
    }
}
