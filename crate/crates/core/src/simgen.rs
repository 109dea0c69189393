//! Node features and binary outcomes under the five data-generating processes.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Bernoulli, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::graph::Graph;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DgpKind {
    /// Outcome depends on the node's own feature only.
    Independent,
    /// Network feature is the neighbour mean of X.
    Degree,
    /// Network feature is the neighbour max of X.
    Main,
    /// Network feature is the neighbour max of an unobserved latent variable.
    Unobserved,
    /// Main's outcome process under biased ground-truth sampling.
    Sampled,
}

impl DgpKind {
    pub const ALL: [DgpKind; 5] =
        [DgpKind::Independent, DgpKind::Degree, DgpKind::Unobserved, DgpKind::Main, DgpKind::Sampled];

    pub fn as_str(self) -> &'static str {
        match self {
            DgpKind::Independent => "independent",
            DgpKind::Degree => "degree",
            DgpKind::Main => "main",
            DgpKind::Unobserved => "unobserved",
            DgpKind::Sampled => "sampled",
        }
    }

    /// Whether ground truth for this process is drawn with the biased designs.
    pub fn biased_sampling(self) -> bool {
        self == DgpKind::Sampled
    }
}

impl fmt::Display for DgpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DgpKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        DgpKind::ALL
            .into_iter()
            .find(|d| d.as_str() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown dgp `{s}`")))
    }
}

/// How the raw network feature is mapped onto a standard-normal scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZTransform {
    #[default]
    Zscore,
    /// Rank-based normal scores, then z-scored.
    QuantileNormal,
}

/// Linear-predictor coefficients of the outcome model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutcomeCoefficients {
    pub x: f64,
    pub z: f64,
}

impl Default for OutcomeCoefficients {
    fn default() -> Self {
        Self { x: 2.0, z: 1.0 }
    }
}

/// Per-node simulation state.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NodeTable {
    pub x: Vec<f64>,
    /// Standardized network feature; all zeros for the independent process.
    pub z: Vec<f64>,
    /// Latent neighbour variable of the unobserved process.
    pub z_latent: Option<Vec<f64>>,
    /// Probability of membership in group a. Empty until outcomes are drawn.
    pub p: Vec<f64>,
    /// Group-a membership. Empty until outcomes are drawn.
    pub y: Vec<bool>,
}

impl NodeTable {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn has_outcomes(&self) -> bool {
        !self.y.is_empty()
    }

    /// Writes `node_id,x,z,p,y,is_ground_truth`.
    pub fn write_csv<W: Write>(&self, writer: W, ground_truth: Option<&[bool]>) -> Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
        w.write_record(["node_id", "x", "z", "p", "y", "is_ground_truth"])?;
        for i in 0..self.len() {
            let p = self.p.get(i).map_or(String::new(), |v| v.to_string());
            let y = self.y.get(i).map_or(String::new(), |&v| u8::from(v).to_string());
            let gt = ground_truth.map_or(0, |m| u8::from(m[i]));
            w.write_record([i.to_string(), self.x[i].to_string(), self.z[i].to_string(), p, y, gt.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn inv_logit(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Z-score with the population (divide-by-n) standard deviation.
pub fn standardize(v: &[f64]) -> Result<Vec<f64>> {
    if v.len() < 2 {
        return Err(Error::DegenerateInput("standardize needs at least two values".into()));
    }
    let (mean, sd) = mean_sd(v);
    if !sd.is_finite() || sd <= 1e-12 * mean.abs().max(1.0) {
        return Err(Error::DegenerateInput("cannot standardize a zero-variance vector".into()));
    }
    Ok(v.iter().map(|x| (x - mean) / sd).collect())
}

/// Rank-based inverse-normal scores (ties share their average rank), z-scored.
pub fn quantile_normalize(v: &[f64]) -> Result<Vec<f64>> {
    if v.len() < 2 {
        return Err(Error::DegenerateInput("quantile transform needs at least two values".into()));
    }
    let n = v.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; n];
    let mut start = 0;
    while start < n {
        let mut end = start;
        while end + 1 < n && v[order[end + 1]] == v[order[start]] {
            end += 1;
        }
        let avg = (start + end) as f64 / 2.0 + 1.0;
        for &idx in &order[start..=end] {
            ranks[idx] = avg;
        }
        start = end + 1;
    }
    let normal = Normal::standard();
    let scores: Vec<f64> = ranks.iter().map(|r| normal.inverse_cdf((r - 0.5) / n as f64)).collect();
    standardize(&scores)
}

fn neighbor_reduce(g: &Graph, reduce: impl Fn(&[usize]) -> f64) -> Result<Vec<f64>> {
    (0..g.node_count())
        .map(|i| {
            let nbrs = g.neighbors(i);
            if nbrs.is_empty() {
                Err(Error::DegenerateInput(format!("node {i} has no neighbours")))
            } else {
                Ok(reduce(nbrs))
            }
        })
        .collect()
}

fn neighbor_max(g: &Graph, values: &[f64]) -> Result<Vec<f64>> {
    neighbor_reduce(g, |nbrs| nbrs.iter().map(|&j| values[j]).fold(f64::NEG_INFINITY, f64::max))
}

fn neighbor_mean(g: &Graph, values: &[f64]) -> Result<Vec<f64>> {
    neighbor_reduce(g, |nbrs| nbrs.iter().map(|&j| values[j]).sum::<f64>() / nbrs.len() as f64)
}

/// Raw (pre-standardization) network feature for a given X and latent draw.
pub fn raw_network_feature(g: &Graph, dgp: DgpKind, x: &[f64], latent: Option<&[f64]>) -> Result<Vec<f64>> {
    match dgp {
        DgpKind::Independent => Ok(vec![0.0; g.node_count()]),
        DgpKind::Main | DgpKind::Sampled => neighbor_max(g, x),
        DgpKind::Degree => neighbor_mean(g, x),
        DgpKind::Unobserved => {
            let latent =
                latent.ok_or_else(|| Error::InvalidParameter("unobserved process needs a latent draw".into()))?;
            neighbor_max(g, latent)
        }
    }
}

/// Draws X (and the latent variable when needed) and builds the network feature.
pub fn gen_features<R: Rng + ?Sized>(g: &Graph, dgp: DgpKind, transform: ZTransform, rng: &mut R) -> Result<NodeTable> {
    let n = g.node_count();
    let x: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let z_latent =
        (dgp == DgpKind::Unobserved).then(|| (0..n).map(|_| rng.sample(StandardNormal)).collect::<Vec<f64>>());
    let raw = raw_network_feature(g, dgp, &x, z_latent.as_deref())?;
    let z = match (dgp, transform) {
        (DgpKind::Independent, _) => raw,
        (_, ZTransform::Zscore) => standardize(&raw)?,
        (_, ZTransform::QuantileNormal) => quantile_normalize(&raw)?,
    };
    Ok(NodeTable { x, z, z_latent, p: Vec::new(), y: Vec::new() })
}

/// Fills `p` with the logistic outcome probabilities and draws `y`.
pub fn gen_outcomes<R: Rng + ?Sized>(
    mut nt: NodeTable,
    dgp: DgpKind,
    coefs: OutcomeCoefficients,
    rng: &mut R,
) -> Result<NodeTable> {
    let z_coef = if dgp == DgpKind::Independent { 0.0 } else { coefs.z };
    nt.p = nt.x.iter().zip(&nt.z).map(|(&x, &z)| inv_logit(coefs.x * x + z_coef * z)).collect();
    nt.y =
        nt.p.iter()
            .map(|&p| Bernoulli::new(p).map(|b| b.sample(rng)))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Numerical(format!("invalid outcome probability: {e}")))?;
    Ok(nt)
}
