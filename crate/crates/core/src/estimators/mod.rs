//! Homophily estimators built on node, dyad and ego-alter logistic models.
//!
//! Every strategy ends in the same place: a predicted probability that each
//! directed dyad joins two group-a nodes. The estimate is the `1/D_ego`
//! weighted sum of those predictions divided by the size of group a, taken
//! either as known (oracle) or as predicted by the model (plug-in).

mod frame;
mod measures;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::glm::{fit_logistic, predict, DesignMatrix, FittedModel};
use crate::graph::Graph;
use crate::metrics::node_level_metrics;
use crate::sampling::GroundTruthMask;

pub use frame::{dyad_design, dyad_design_no_network, node_design, DyadFrame, NodeFeatures, INTERCEPT};
pub use measures::{
    action_weights, bias_decomposition, bias_decomposition_weighted, coleman_index, coleman_numerator, coleman_stats,
    dyad_sum, egonet_average, extended_true_homophily, group_size, true_homophily, ColemanStats,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// Ratio over fully observed ground-truth dyads.
    NoModel,
    /// Node model on `X_i` only.
    NodeNoNetwork,
    /// Node model on `X_i, 1/D_i, D_i`.
    Node,
    /// Single logistic model for `Y_ego * Y_alter`.
    Dyad,
    /// Separate ego and alter models on dyad features.
    EgoAlter,
    /// Ego-alter with the ego prediction fed to the alter model.
    EgoAlterAugmented,
}

impl ModelKind {
    pub const ALL: [ModelKind; 6] = [
        ModelKind::NoModel,
        ModelKind::NodeNoNetwork,
        ModelKind::Node,
        ModelKind::Dyad,
        ModelKind::EgoAlter,
        ModelKind::EgoAlterAugmented,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::NoModel => "no_model",
            ModelKind::NodeNoNetwork => "node_no_network",
            ModelKind::Node => "node",
            ModelKind::Dyad => "dyad",
            ModelKind::EgoAlter => "ego_alter",
            ModelKind::EgoAlterAugmented => "ego_alter_augmented",
        }
    }

    /// Kinds that yield one category probability per node.
    pub fn is_node_producing(self) -> bool {
        matches!(self, ModelKind::NodeNoNetwork | ModelKind::Node | ModelKind::EgoAlter | ModelKind::EgoAlterAugmented)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown model kind `{s}`")))
    }
}

/// How the group-a size in the denominator is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DenominatorMode {
    /// True group size; simulations only.
    Oracle,
    /// Group size estimated from the same model.
    PlugIn,
}

impl DenominatorMode {
    pub const ALL: [DenominatorMode; 2] = [DenominatorMode::Oracle, DenominatorMode::PlugIn];

    pub fn as_str(self) -> &'static str {
        match self {
            DenominatorMode::Oracle => "oracle",
            DenominatorMode::PlugIn => "plug_in",
        }
    }
}

impl fmt::Display for DenominatorMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DenominatorMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        DenominatorMode::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown denominator mode `{s}`")))
    }
}

/// Marks fits that left the unpenalized maximum-likelihood path.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct FitFlags {
    pub ridge: bool,
    pub fallback: bool,
}

impl FitFlags {
    pub fn any(self) -> bool {
        self.ridge || self.fallback
    }

    fn merge(&mut self, other: FitFlags) {
        self.ridge |= other.ridge;
        self.fallback |= other.fallback;
    }
}

impl fmt::Display for FitFlags {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match (self.ridge, self.fallback) {
            (false, false) => "none",
            (true, false) => "ridge",
            (false, true) => "fallback",
            (true, true) => "ridge+fallback",
        })
    }
}

/// Everything an estimator may look at.
#[derive(Debug, Clone, Copy)]
pub struct Problem<'a> {
    pub graph: &'a Graph,
    /// Node covariate; `None` fits network-only designs.
    pub x: Option<&'a [f64]>,
    /// Group-a membership. Entries for nodes outside the mask are read only
    /// when `truth` is set.
    pub y: &'a [bool],
    pub mask: &'a GroundTruthMask,
    /// Whether `y` is the complete truth (simulation).
    pub truth: bool,
    pub actions: Option<&'a [f64]>,
}

impl Problem<'_> {
    fn true_value(&self) -> Result<f64> {
        match self.actions {
            Some(a) => extended_true_homophily(self.graph, self.y, a),
            None => true_homophily(self.graph, self.y),
        }
    }
}

/// Frame and designs shared by every strategy on one problem.
pub struct Prepared<'a> {
    pub problem: Problem<'a>,
    pub frame: DyadFrame,
    pub dyad_design: DesignMatrix,
}

impl<'a> Prepared<'a> {
    pub fn new(problem: Problem<'a>) -> Result<Self> {
        let frame = DyadFrame::build(problem.graph, problem.x, problem.y, problem.mask, problem.actions)?;
        let dyad_design = dyad_design(&frame)?;
        Ok(Self { problem, frame, dyad_design })
    }
}

/// Per-dyad predictions of one fitted strategy.
#[derive(Debug, Clone)]
pub struct DyadScores {
    pub kind: ModelKind,
    /// Predicted probability that the dyad is within group a.
    pub pair: Vec<f64>,
    /// Ego and alter membership predictions for product strategies.
    pub ego: Option<Vec<f64>>,
    pub alter: Option<Vec<f64>>,
    /// One probability per node for node-producing strategies.
    pub node_probs: Option<Vec<f64>>,
    /// Model-based group-a size.
    pub plugin_denominator: f64,
    pub flags: FitFlags,
    pub models: Vec<(&'static str, FittedModel)>,
}

struct Fitted {
    model: FittedModel,
    predictions: Vec<f64>,
    flags: FitFlags,
}

/// Fits on `rows` of `design` and predicts every row. Single-class training
/// labels fall back to a constant model at the observed rate.
fn fit_rows(design: &DesignMatrix, rows: &[usize], target: impl Fn(usize) -> bool, what: &str) -> Result<Fitted> {
    if rows.is_empty() {
        return Err(Error::EmptyTrainingSet(what.into()));
    }
    let train = design.select_rows(rows);
    let labels: Vec<bool> = rows.iter().map(|&r| target(r)).collect();
    let (model, flags) = match fit_logistic(&train, &labels) {
        Ok(m) => {
            let ridge = m.ridge_used();
            (m, FitFlags { ridge, fallback: false })
        }
        Err(Error::DegenerateLabels(_)) => {
            (FittedModel::constant(design.col_names().to_vec(), &labels), FitFlags { ridge: false, fallback: true })
        }
        Err(e) => return Err(e),
    };
    let predictions = predict(&model, design)?;
    Ok(Fitted { model, predictions, flags })
}

/// Degree-average of per-dyad ego predictions for each node.
fn ego_average(g: &Graph, frame: &DyadFrame, ego_preds: &[f64]) -> Vec<f64> {
    let mut sums = vec![0.0; g.node_count()];
    for (r, d) in frame.dyads.iter().enumerate() {
        sums[d.ego] += ego_preds[r];
    }
    sums.iter().enumerate().map(|(i, s)| if g.degree(i) > 0 { s / g.degree(i) as f64 } else { 0.0 }).collect()
}

/// Fits the strategy's models on the labeled rows and scores every dyad.
pub fn score_dyads(kind: ModelKind, prep: &Prepared<'_>) -> Result<DyadScores> {
    let p = &prep.problem;
    let g = p.graph;
    let frame = &prep.frame;
    let y = p.y;
    match kind {
        ModelKind::NoModel => Err(Error::InvalidParameter("no_model has no fitted scores".into())),
        ModelKind::NodeNoNetwork | ModelKind::Node => {
            let features = if kind == ModelKind::Node { NodeFeatures::Network } else { NodeFeatures::NoNetwork };
            let design = node_design(g, p.x, features, p.actions)?;
            let rows: Vec<usize> = (0..g.node_count()).filter(|&i| p.mask.node_labeled(i)).collect();
            let fit = fit_rows(&design, &rows, |i| y[i], "node model")?;
            let probs = fit.predictions;
            let ego: Vec<f64> = frame.dyads.iter().map(|d| probs[d.ego]).collect();
            let alter: Vec<f64> = frame.dyads.iter().map(|d| probs[d.alter]).collect();
            Ok(DyadScores {
                kind,
                pair: ego.iter().zip(&alter).map(|(a, b)| a * b).collect(),
                ego: Some(ego),
                alter: Some(alter),
                plugin_denominator: probs.iter().sum(),
                node_probs: Some(probs),
                flags: fit.flags,
                models: vec![("node", fit.model)],
            })
        }
        ModelKind::Dyad => {
            let rows = frame.labeled_dyad_rows();
            let pair = fit_rows(&prep.dyad_design, &rows, |r| frame.y_dyad(r), "dyad model")?;
            let margin = fit_rows(&prep.dyad_design, &rows, |r| frame.y_ego[r], "ego-margin model")?;
            let mut flags = pair.flags;
            flags.merge(margin.flags);
            let plugin_denominator = margin.predictions.iter().zip(&frame.inv_deg_ego).map(|(p, w)| p * w).sum();
            Ok(DyadScores {
                kind,
                pair: pair.predictions,
                ego: None,
                alter: None,
                node_probs: None,
                plugin_denominator,
                flags,
                models: vec![("dyad", pair.model), ("ego_margin", margin.model)],
            })
        }
        ModelKind::EgoAlter | ModelKind::EgoAlterAugmented => {
            let ego_rows = frame.labeled_ego_rows();
            let alter_rows = frame.labeled_alter_rows();
            let ego = fit_rows(&prep.dyad_design, &ego_rows, |r| frame.y_ego[r], "ego model")?;
            let alter = if kind == ModelKind::EgoAlterAugmented {
                let augmented = prep.dyad_design.with_column("ego_pred", &ego.predictions)?;
                fit_rows(&augmented, &alter_rows, |r| frame.y_alter[r], "alter model")?
            } else {
                fit_rows(&prep.dyad_design, &alter_rows, |r| frame.y_alter[r], "alter model")?
            };
            let mut flags = ego.flags;
            flags.merge(alter.flags);
            let node_probs = ego_average(g, frame, &ego.predictions);
            Ok(DyadScores {
                kind,
                pair: ego.predictions.iter().zip(&alter.predictions).map(|(a, b)| a * b).collect(),
                plugin_denominator: node_probs.iter().sum(),
                node_probs: Some(node_probs),
                ego: Some(ego.predictions),
                alter: Some(alter.predictions),
                flags,
                models: vec![("ego", ego.model), ("alter", alter.model)],
            })
        }
    }
}

/// One estimate with its diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateRecord {
    pub model: ModelKind,
    pub denominator_mode: DenominatorMode,
    pub h_true: Option<f64>,
    pub h_hat: f64,
    pub numerator: f64,
    pub denominator: f64,
    /// `(h_hat - h_true) / h_true`.
    pub relative_error: Option<f64>,
    pub r1: Option<f64>,
    pub r2: Option<f64>,
    pub node_auc: Option<f64>,
    pub node_accuracy: Option<f64>,
    pub flags: FitFlags,
    pub n_labeled_nodes: usize,
    pub n_labeled_dyads: usize,
}

fn finish(
    p: &Problem<'_>,
    model: ModelKind,
    mode: DenominatorMode,
    numerator: f64,
    denominator: f64,
    h_hat: Option<f64>,
) -> Result<EstimateRecord> {
    let h_hat = match h_hat {
        Some(h) => h,
        None if denominator > 0.0 => numerator / denominator,
        None => return Err(Error::UndefinedEstimand(format!("{model} {mode} denominator is zero"))),
    };
    let h_true = if p.truth { Some(p.true_value()?) } else { None };
    Ok(EstimateRecord {
        model,
        denominator_mode: mode,
        h_true,
        h_hat,
        numerator,
        denominator,
        relative_error: h_true.map(|h| (h_hat - h) / h),
        r1: None,
        r2: None,
        node_auc: None,
        node_accuracy: None,
        flags: FitFlags::default(),
        n_labeled_nodes: p.mask.labeled_node_count(),
        n_labeled_dyads: p.mask.labeled_dyad_count(),
    })
}

fn oracle_size(p: &Problem<'_>) -> Result<f64> {
    if !p.truth {
        return Err(Error::MissingOracle);
    }
    Ok(group_size(p.y) as f64)
}

/// Model-free estimates from fully labeled dyads.
///
/// Plug-in: ratio of the weighted within-group sum to the weighted group-a ego
/// sum over labeled dyads. Oracle: the labeled sum expanded by the inverse of
/// the labeled-dyad share, over the true group size.
fn no_model(prep: &Prepared<'_>, mode: DenominatorMode) -> Result<EstimateRecord> {
    let p = &prep.problem;
    let frame = &prep.frame;
    let rows = frame.labeled_dyad_rows();
    if rows.is_empty() {
        return Err(Error::EmptyTrainingSet("no labeled dyads".into()));
    }
    let within: f64 = rows.iter().filter(|&&r| frame.y_dyad(r)).map(|&r| frame.weight[r]).sum();
    match mode {
        DenominatorMode::PlugIn => {
            let ego_a: f64 = rows.iter().filter(|&&r| frame.y_ego[r]).map(|&r| frame.inv_deg_ego[r]).sum();
            finish(p, ModelKind::NoModel, mode, within, ego_a, None)
        }
        DenominatorMode::Oracle => {
            let expanded = within * frame.len() as f64 / rows.len() as f64;
            finish(p, ModelKind::NoModel, mode, expanded, oracle_size(p)?, None)
        }
    }
}

/// Turns fitted scores into an estimate under `mode`.
pub fn estimate_from_scores(prep: &Prepared<'_>, scores: &DyadScores, mode: DenominatorMode) -> Result<EstimateRecord> {
    let p = &prep.problem;
    let frame = &prep.frame;
    let numerator: f64 = scores.pair.iter().zip(&frame.weight).map(|(s, w)| s * w).sum();
    let denominator = match mode {
        DenominatorMode::Oracle => oracle_size(p)?,
        DenominatorMode::PlugIn => scores.plugin_denominator,
    };
    let mut rec = finish(p, scores.kind, mode, numerator, denominator, None)?;
    rec.flags = scores.flags;
    if p.truth {
        if let (Some(ego), Some(alter)) = (&scores.ego, &scores.alter) {
            let (r1, r2) = bias_decomposition_weighted(p.graph, p.y, &frame.weight, ego, alter)?;
            rec.r1 = Some(r1);
            rec.r2 = Some(r2);
        }
        if let Some(probs) = &scores.node_probs {
            if let Some((auc, acc)) = out_of_sample_metrics(p, probs) {
                rec.node_auc = Some(auc);
                rec.node_accuracy = Some(acc);
            }
        }
    }
    Ok(rec)
}

/// AUC and accuracy over unlabeled nodes (all nodes when every node is labeled).
fn out_of_sample_metrics(p: &Problem<'_>, probs: &[f64]) -> Option<(f64, f64)> {
    let mut nodes: Vec<usize> = (0..probs.len()).filter(|&i| !p.mask.node_labeled(i)).collect();
    if nodes.is_empty() {
        nodes = (0..probs.len()).collect();
    }
    let scores: Vec<f64> = nodes.iter().map(|&i| probs[i]).collect();
    let labels: Vec<bool> = nodes.iter().map(|&i| p.y[i]).collect();
    node_level_metrics(&scores, &labels).ok()
}

/// Estimates under every requested denominator mode from a single fit.
pub fn estimate_modes(kind: ModelKind, prep: &Prepared<'_>, modes: &[DenominatorMode]) -> Result<Vec<EstimateRecord>> {
    if kind == ModelKind::NoModel {
        return modes.iter().map(|&m| no_model(prep, m)).collect();
    }
    let scores = score_dyads(kind, prep)?;
    modes.iter().map(|&m| estimate_from_scores(prep, &scores, m)).collect()
}

/// Estimates homophily for group a with one strategy and denominator mode.
pub fn estimate_homophily(kind: ModelKind, problem: Problem<'_>, mode: DenominatorMode) -> Result<EstimateRecord> {
    let prep = Prepared::new(problem)?;
    Ok(estimate_modes(kind, &prep, &[mode])?.remove(0))
}

/// Action-weighted estimate: dyad weights and the inverse-degree feature both
/// become `A_alter / D_ego`.
pub fn extended_homophily(
    kind: ModelKind,
    problem: Problem<'_>,
    actions: &[f64],
    mode: DenominatorMode,
) -> Result<EstimateRecord> {
    estimate_homophily(kind, Problem { actions: Some(actions), ..problem }, mode)
}
