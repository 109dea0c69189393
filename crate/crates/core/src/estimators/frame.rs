//! Per-dyad data and the design matrices of each modelling strategy.

use crate::error::{Error, Result};
use crate::glm::{DesignMatrix, RowKey};
use crate::graph::{DirectedDyad, Graph};
use crate::sampling::GroundTruthMask;

use super::measures::action_weights;

pub const INTERCEPT: &str = "intercept";

/// One row per directed dyad, in `Graph::directed_dyads()` order.
#[derive(Debug, Clone, PartialEq)]
pub struct DyadFrame {
    pub dyads: Vec<DirectedDyad>,
    pub deg_ego: Vec<f64>,
    pub deg_alter: Vec<f64>,
    pub x_ego: Vec<f64>,
    pub x_alter: Vec<f64>,
    /// `A_alter / D_ego`; `1 / D_ego` when no actions are supplied.
    pub weight: Vec<f64>,
    /// `1 / D_ego` regardless of actions.
    pub inv_deg_ego: Vec<f64>,
    pub ego_labeled: Vec<bool>,
    pub alter_labeled: Vec<bool>,
    pub dyad_labeled: Vec<bool>,
    /// Categories as supplied; only entries covered by the label flags are
    /// meaningful unless the caller holds the full truth.
    pub y_ego: Vec<bool>,
    pub y_alter: Vec<bool>,
    pub has_actions: bool,
    /// False when no node covariates were supplied; designs then omit `x`.
    pub has_features: bool,
}

impl DyadFrame {
    pub fn build(
        g: &Graph,
        x: Option<&[f64]>,
        y: &[bool],
        mask: &GroundTruthMask,
        actions: Option<&[f64]>,
    ) -> Result<Self> {
        if x.is_some_and(|x| x.len() != g.node_count()) || y.len() != g.node_count() {
            return Err(Error::InvalidParameter("features and labels must cover every node".into()));
        }
        let dyads = g.directed_dyads();
        let weight = action_weights(g, actions)?;
        let deg = |i: usize| g.degree(i) as f64;
        Ok(Self {
            deg_ego: dyads.iter().map(|d| deg(d.ego)).collect(),
            deg_alter: dyads.iter().map(|d| deg(d.alter)).collect(),
            x_ego: x.map_or_else(Vec::new, |x| dyads.iter().map(|d| x[d.ego]).collect()),
            x_alter: x.map_or_else(Vec::new, |x| dyads.iter().map(|d| x[d.alter]).collect()),
            inv_deg_ego: dyads.iter().map(|d| 1.0 / deg(d.ego)).collect(),
            weight,
            ego_labeled: dyads.iter().map(|d| mask.node_labeled(d.ego)).collect(),
            alter_labeled: dyads.iter().map(|d| mask.node_labeled(d.alter)).collect(),
            dyad_labeled: mask.dyads().to_vec(),
            y_ego: dyads.iter().map(|d| y[d.ego]).collect(),
            y_alter: dyads.iter().map(|d| y[d.alter]).collect(),
            has_actions: actions.is_some(),
            has_features: x.is_some(),
            dyads,
        })
    }

    pub fn len(&self) -> usize {
        self.dyads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dyads.is_empty()
    }

    /// Both endpoints in group a.
    pub fn y_dyad(&self, row: usize) -> bool {
        self.y_ego[row] && self.y_alter[row]
    }

    pub fn labeled_dyad_rows(&self) -> Vec<usize> {
        (0..self.len()).filter(|&r| self.dyad_labeled[r]).collect()
    }

    pub fn labeled_ego_rows(&self) -> Vec<usize> {
        (0..self.len()).filter(|&r| self.ego_labeled[r]).collect()
    }

    pub fn labeled_alter_rows(&self) -> Vec<usize> {
        (0..self.len()).filter(|&r| self.alter_labeled[r]).collect()
    }

    fn weight_name(&self) -> &'static str {
        if self.has_actions {
            "action_over_deg_ego"
        } else {
            "inv_deg_ego"
        }
    }
}

/// Which node-level feature set to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeFeatures {
    /// `[1, X_i]`
    NoNetwork,
    /// `[1, X_i, 1/D_i, D_i]`
    Network,
}

/// Node design over all nodes.
///
/// With actions the inverse-degree column becomes the ego's mean of
/// `A_j / D_i` over its dyads, which reduces to `1/D_i` when every action is 1.
pub fn node_design(
    g: &Graph,
    x: Option<&[f64]>,
    features: NodeFeatures,
    actions: Option<&[f64]>,
) -> Result<DesignMatrix> {
    let mut names: Vec<String> = vec![INTERCEPT.into()];
    if x.is_some() {
        names.push("x".into());
    }
    if features == NodeFeatures::Network {
        names.push(if actions.is_some() { "mean_action_over_deg" } else { "inv_deg" }.into());
        names.push("deg".into());
    }
    let mut d = DesignMatrix::with_capacity(names, g.node_count());
    let mut row = Vec::with_capacity(4);
    for i in 0..g.node_count() {
        row.clear();
        row.push(1.0);
        if let Some(x) = x {
            row.push(x[i]);
        }
        if features == NodeFeatures::Network {
            let deg = g.degree(i) as f64;
            if deg == 0.0 {
                return Err(Error::DegenerateInput(format!("node {i} has no neighbours")));
            }
            row.push(match actions {
                Some(a) => g.neighbors(i).iter().map(|&j| a[j]).sum::<f64>() / (deg * deg),
                None => 1.0 / deg,
            });
            row.push(deg);
        }
        d.push_row(RowKey::Node(i), &row)?;
    }
    Ok(d)
}

/// Dyad design `[1, X_ego, X_alter, w, D_ego, D_alter]` over every dyad, where
/// `w` is `1/D_ego` or `A_alter/D_ego`.
pub fn dyad_design(frame: &DyadFrame) -> Result<DesignMatrix> {
    build_dyad_design(frame, true)
}

/// Dyad design without any degree information: `[1, X_ego, X_alter]`.
pub fn dyad_design_no_network(frame: &DyadFrame) -> Result<DesignMatrix> {
    build_dyad_design(frame, false)
}

fn build_dyad_design(frame: &DyadFrame, network: bool) -> Result<DesignMatrix> {
    let mut names: Vec<String> = vec![INTERCEPT.into()];
    if frame.has_features {
        names.extend(["x_ego".into(), "x_alter".into()]);
    }
    if network {
        names.extend([frame.weight_name().into(), "deg_ego".into(), "deg_alter".into()]);
    }
    let mut d = DesignMatrix::with_capacity(names, frame.len());
    let mut row = Vec::with_capacity(6);
    for r in 0..frame.len() {
        row.clear();
        row.push(1.0);
        if frame.has_features {
            row.extend([frame.x_ego[r], frame.x_alter[r]]);
        }
        if network {
            row.extend([frame.weight[r], frame.deg_ego[r], frame.deg_alter[r]]);
        }
        let dy = frame.dyads[r];
        d.push_row(RowKey::Dyad { ego: dy.ego, alter: dy.alter }, &row)?;
    }
    Ok(d)
}
