//! Evaluation: bias and absolute error, node-level classification metrics,
//! the cross-validated residual diagnostic, and battery summaries.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{dyad_design, dyad_design_no_network, DenominatorMode, EstimateRecord, ModelKind, Prepared};
use crate::glm::{fit_logistic, predict};
use crate::simgen::DgpKind;

pub const DEFAULT_FOLDS: usize = 5;
pub const DEFAULT_PERMUTATIONS: usize = 200;

/// Mean relative error and mean absolute relative error.
pub fn bias_and_mae_from(relative_errors: &[f64]) -> Result<(f64, f64)> {
    if relative_errors.is_empty() {
        return Err(Error::InvalidParameter("no records to summarize".into()));
    }
    let n = relative_errors.len() as f64;
    let bias = relative_errors.iter().sum::<f64>() / n;
    let mae = relative_errors.iter().map(|e| e.abs()).sum::<f64>() / n;
    Ok((bias, mae))
}

pub fn bias_and_mae(records: &[EstimateRecord]) -> Result<(f64, f64)> {
    let rel = records.iter().map(|r| r.relative_error.ok_or(Error::MissingOracle)).collect::<Result<Vec<_>>>()?;
    bias_and_mae_from(&rel)
}

/// Rank-statistic AUC; tied scores count one half.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::InvalidParameter("scores and labels differ in length".into()));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Numerical("NaN score".into()));
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::DegenerateLabels("evaluation set has one class".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut pos_rank_sum = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        // ranks start..end (1-based start+1..=end) share their average
        let avg = (start + 1 + end) as f64 / 2.0;
        pos_rank_sum += avg * order[start..end].iter().filter(|&&i| labels[i]).count() as f64;
        start = end;
    }
    let (p, q) = (n_pos as f64, n_neg as f64);
    Ok((pos_rank_sum - p * (p + 1.0) / 2.0) / (p * q))
}

/// Share of nodes whose thresholded probability matches the label.
pub fn accuracy(probs: &[f64], labels: &[bool], threshold: f64) -> Result<f64> {
    if probs.len() != labels.len() || probs.is_empty() {
        return Err(Error::InvalidParameter("probabilities and labels must be nonempty and aligned".into()));
    }
    let hits = probs.iter().zip(labels).filter(|(&p, &l)| (p >= threshold) == l).count();
    Ok(hits as f64 / probs.len() as f64)
}

/// AUC and accuracy at 0.5.
pub fn node_level_metrics(node_probs: &[f64], node_labels: &[bool]) -> Result<(f64, f64)> {
    Ok((auc(node_probs, node_labels)?, accuracy(node_probs, node_labels, 0.5)?))
}

/// Out-of-fold weighted residual sums with a permutation reference interval.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticReport {
    pub model: ModelKind,
    pub folds: usize,
    /// `sum e_ij / D_i` over each fold's dyads.
    pub fold_sums: Vec<f64>,
    pub total: f64,
    pub null_low: f64,
    pub null_high: f64,
    pub n_dyads: usize,
}

impl DiagnosticReport {
    /// True when the total lies outside the central 95% null interval.
    pub fn flagged(&self) -> bool {
        self.total < self.null_low || self.total > self.null_high
    }
}

/// Fold of each labeled dyad: undirected edges are dealt round-robin in edge
/// order so both orientations land in the same fold.
pub fn assign_folds(prep: &Prepared<'_>, rows: &[usize], folds: usize) -> Vec<usize> {
    let g = prep.problem.graph;
    let mut edge_fold = BTreeMap::new();
    let mut labeled_edges: Vec<(usize, usize)> = rows.iter().map(|&r| prep.frame.dyads[r].edge()).collect();
    labeled_edges.sort_unstable();
    labeled_edges.dedup();
    for (i, e) in labeled_edges.into_iter().enumerate() {
        edge_fold.insert(e, i % folds);
    }
    debug_assert!(rows.iter().all(|&r| g.has_edge(prep.frame.dyads[r].ego, prep.frame.dyads[r].alter)));
    rows.iter().map(|&r| edge_fold[&prep.frame.dyads[r].edge()]).collect()
}

/// Sums `weights * residuals` per fold and compares the total against sums
/// of residuals re-paired to random dyads.
pub fn residual_report<R: Rng + ?Sized>(
    model: ModelKind,
    residuals: &[f64],
    weights: &[f64],
    fold_of: &[usize],
    folds: usize,
    permutations: usize,
    rng: &mut R,
) -> Result<DiagnosticReport> {
    if residuals.len() != weights.len() || residuals.len() != fold_of.len() {
        return Err(Error::InvalidParameter("residuals, weights and folds must be aligned".into()));
    }
    if permutations == 0 {
        return Err(Error::InvalidParameter("permutations must be positive".into()));
    }
    let mut fold_sums = vec![0.0; folds];
    for ((e, w), &f) in residuals.iter().zip(weights).zip(fold_of) {
        fold_sums[f] += e * w;
    }
    let total = fold_sums.iter().sum();
    let mut shuffled = residuals.to_vec();
    let mut null: Vec<f64> = (0..permutations)
        .map(|_| {
            shuffled.shuffle(rng);
            shuffled.iter().zip(weights).map(|(e, w)| e * w).sum()
        })
        .collect();
    null.sort_by(f64::total_cmp);
    Ok(DiagnosticReport {
        model,
        folds,
        fold_sums,
        total,
        null_low: quantile_sorted(&null, 0.025),
        null_high: quantile_sorted(&null, 0.975),
        n_dyads: residuals.len(),
    })
}

// Linear interpolation between order statistics.
fn quantile_sorted(v: &[f64], q: f64) -> f64 {
    let h = (v.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

/// K-fold diagnostic on the labeled dyads with a dyad-target model.
///
/// `NodeNoNetwork` withholds all degree information (`[1, X_ego, X_alter]`);
/// every other kind uses the full dyad features.
pub fn cv_residual_diagnostic<R: Rng + ?Sized>(
    prep: &Prepared<'_>,
    kind: ModelKind,
    folds: usize,
    permutations: usize,
    rng: &mut R,
) -> Result<DiagnosticReport> {
    if folds < 2 {
        return Err(Error::InvalidParameter("at least two folds are required".into()));
    }
    let frame = &prep.frame;
    let rows = frame.labeled_dyad_rows();
    let n_edges = rows.len() / 2;
    if n_edges < folds {
        return Err(Error::EmptyTrainingSet(format!("{} labeled dyads for {folds} folds", rows.len())));
    }
    let design = if kind == ModelKind::NodeNoNetwork { dyad_design_no_network(frame)? } else { dyad_design(frame)? };
    let design = design.select_rows(&rows);
    let labels: Vec<bool> = rows.iter().map(|&r| frame.y_dyad(r)).collect();
    let fold_of = assign_folds(prep, &rows, folds);

    let mut residuals = vec![0.0; rows.len()];
    for k in 0..folds {
        let train: Vec<usize> = (0..rows.len()).filter(|&i| fold_of[i] != k).collect();
        let test: Vec<usize> = (0..rows.len()).filter(|&i| fold_of[i] == k).collect();
        let train_labels: Vec<bool> = train.iter().map(|&i| labels[i]).collect();
        let model = fit_logistic(&design.select_rows(&train), &train_labels)?;
        let probs = predict(&model, &design.select_rows(&test))?;
        for (&i, p) in test.iter().zip(probs) {
            residuals[i] = f64::from(u8::from(labels[i])) - p;
        }
    }
    let weights: Vec<f64> = rows.iter().map(|&r| frame.inv_deg_ego[r]).collect();
    residual_report(kind, &residuals, &weights, &fold_of, folds, permutations, rng)
}

/// One line of the results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub rep: u64,
    pub dgp: String,
    pub sampling: String,
    pub model: String,
    pub denominator_mode: String,
    #[serde(rename = "H_true")]
    pub h_true: Option<f64>,
    #[serde(rename = "H_hat")]
    pub h_hat: Option<f64>,
    pub rel_bias: Option<f64>,
    pub node_auc: Option<f64>,
    pub node_accuracy: Option<f64>,
    pub n_labeled_nodes: usize,
    pub n_labeled_dyads: usize,
    /// `none`, `ridge`, `fallback`, `ridge+fallback` or `error:<code>`.
    pub flag: String,
}

pub const RESULTS_HEADER: [&str; 13] = [
    "rep",
    "dgp",
    "sampling",
    "model",
    "denominator_mode",
    "H_true",
    "H_hat",
    "rel_bias",
    "node_auc",
    "node_accuracy",
    "n_labeled_nodes",
    "n_labeled_dyads",
    "flag",
];

impl ResultRow {
    pub fn from_record(rep: u64, dgp: &str, sampling: &str, rec: &EstimateRecord) -> Self {
        Self {
            rep,
            dgp: dgp.into(),
            sampling: sampling.into(),
            model: rec.model.as_str().into(),
            denominator_mode: rec.denominator_mode.as_str().into(),
            h_true: rec.h_true,
            h_hat: Some(rec.h_hat),
            rel_bias: rec.relative_error,
            node_auc: rec.node_auc,
            node_accuracy: rec.node_accuracy,
            n_labeled_nodes: rec.n_labeled_nodes,
            n_labeled_dyads: rec.n_labeled_dyads,
            flag: rec.flags.to_string(),
        }
    }

    pub fn is_error(&self) -> bool {
        self.flag.starts_with("error")
    }

    pub fn is_flagged(&self) -> bool {
        !self.is_error() && self.flag != "none"
    }
}

pub fn write_results_csv<W: Write>(rows: &[ResultRow], writer: W) -> Result<()> {
    let mut w =
        csv::WriterBuilder::new().has_headers(false).terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
    w.write_record(RESULTS_HEADER)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a results table, rejecting files whose header differs from the schema.
pub fn read_results_csv<R: Read>(reader: R) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_reader(reader);
    let header = r.headers().map_err(|e| Error::Schema(e.to_string()))?.clone();
    if header.iter().ne(RESULTS_HEADER) {
        return Err(Error::Schema(format!("expected header `{}`", RESULTS_HEADER.join(","))));
    }
    let rows = r
        .deserialize()
        .collect::<std::result::Result<Vec<ResultRow>, _>>()
        .map_err(|e| Error::Schema(e.to_string()))?;
    if rows.is_empty() {
        return Err(Error::Schema("results table has no rows".into()));
    }
    Ok(rows)
}

/// Summary of one (sampling, dgp, model, denominator mode) cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellSummary {
    pub sampling: String,
    pub dgp: String,
    pub model: String,
    pub denominator_mode: String,
    pub replications: usize,
    /// Replications dropped from the cell's comparison set after a hard error.
    pub excluded: usize,
    pub bias: Option<f64>,
    pub mae: Option<f64>,
    pub mean_auc: Option<f64>,
    pub mean_accuracy: Option<f64>,
    pub flagged_fraction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BatterySummary {
    pub cells: Vec<CellSummary>,
}

fn rank_of<T: PartialEq + Copy>(all: &[T], v: Option<T>) -> usize {
    v.and_then(|v| all.iter().position(|&a| a == v)).unwrap_or(all.len())
}

fn sampling_rank(s: &str) -> usize {
    match s {
        "node" | "node_random" | "node_biased" => 0,
        "edge" | "edge_random" | "edge_biased" => 1,
        _ => 2,
    }
}

fn dgp_rank(s: &str) -> usize {
    rank_of(&DgpKind::ALL, s.parse().ok())
}

fn model_rank(s: &str) -> usize {
    rank_of(&ModelKind::ALL, s.parse().ok())
}

fn mode_rank(s: &str) -> usize {
    rank_of(&DenominatorMode::ALL, s.parse().ok())
}

/// Sort key placing known names in their natural order.
pub fn canonical_key(row: &ResultRow) -> (usize, usize, String, String, u64, usize, String, usize, String) {
    (
        sampling_rank(&row.sampling),
        dgp_rank(&row.dgp),
        row.dgp.clone(),
        row.sampling.clone(),
        row.rep,
        model_rank(&row.model),
        row.model.clone(),
        mode_rank(&row.denominator_mode),
        row.denominator_mode.clone(),
    )
}

fn mean(v: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| s / n as f64)
}

impl BatterySummary {
    /// Averages each cell over the replications in which every model of the
    /// same (sampling, dgp, denominator mode) group succeeded.
    pub fn from_rows(rows: &[ResultRow]) -> Self {
        type Group = (String, String, String);
        let mut failed: BTreeMap<Group, BTreeSet<u64>> = BTreeMap::new();
        let mut cells: BTreeMap<(Group, String), Vec<&ResultRow>> = BTreeMap::new();
        for r in rows {
            let g = (r.sampling.clone(), r.dgp.clone(), r.denominator_mode.clone());
            if r.is_error() || r.rel_bias.is_none() {
                failed.entry(g.clone()).or_default().insert(r.rep);
            }
            cells.entry((g, r.model.clone())).or_default().push(r);
        }
        let empty = BTreeSet::new();
        let mut out: Vec<CellSummary> = cells
            .into_iter()
            .map(|((g, model), cell_rows)| {
                let bad = failed.get(&g).unwrap_or(&empty);
                let kept: Vec<&ResultRow> = cell_rows.into_iter().filter(|r| !bad.contains(&r.rep)).collect();
                let rel: Vec<f64> = kept.iter().filter_map(|r| r.rel_bias).collect();
                let (bias, mae) = bias_and_mae_from(&rel).map_or((None, None), |(b, m)| (Some(b), Some(m)));
                CellSummary {
                    sampling: g.0,
                    dgp: g.1,
                    denominator_mode: g.2,
                    model,
                    replications: kept.len(),
                    excluded: bad.len(),
                    bias,
                    mae,
                    mean_auc: mean(kept.iter().filter_map(|r| r.node_auc)),
                    mean_accuracy: mean(kept.iter().filter_map(|r| r.node_accuracy)),
                    flagged_fraction: mean(kept.iter().map(|r| f64::from(u8::from(r.is_flagged())))),
                }
            })
            .collect();
        out.sort_by_key(|c| {
            (
                sampling_rank(&c.sampling),
                dgp_rank(&c.dgp),
                c.dgp.clone(),
                c.sampling.clone(),
                mode_rank(&c.denominator_mode),
                model_rank(&c.model),
                c.model.clone(),
            )
        });
        Self { cells: out }
    }

    pub fn cell(&self, sampling: &str, dgp: &str, model: &str, mode: &str) -> Option<&CellSummary> {
        self.cells
            .iter()
            .find(|c| c.sampling == sampling && c.dgp == dgp && c.model == model && c.denominator_mode == mode)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
        for c in &self.cells {
            w.serialize(c)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Pivot for one denominator mode: rows are (sampling, dgp), columns are
    /// models. The best cell of each row (smallest `|value|`) gets a `*`.
    pub fn write_table<W: Write>(&self, metric: TableMetric, mode: &str, writer: W) -> Result<()> {
        let cells: Vec<&CellSummary> = self.cells.iter().filter(|c| c.denominator_mode == mode).collect();
        let mut models: Vec<&str> = cells.iter().map(|c| c.model.as_str()).collect();
        models.sort_by_key(|m| (model_rank(m), m.to_string()));
        models.dedup();
        let mut row_keys: Vec<(&str, &str)> = cells.iter().map(|c| (c.sampling.as_str(), c.dgp.as_str())).collect();
        row_keys.sort_by_key(|(s, d)| (sampling_rank(s), dgp_rank(d), d.to_string(), s.to_string()));
        row_keys.dedup();

        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
        let mut header = vec!["sampling", "dgp"];
        header.extend(&models);
        w.write_record(&header)?;
        for (s, d) in row_keys {
            let values: Vec<Option<f64>> = models
                .iter()
                .map(|m| {
                    cells.iter().find(|c| c.sampling == s && c.dgp == d && c.model == *m).and_then(|c| metric.value(c))
                })
                .collect();
            let best = best_index(&values);
            let mut record = vec![s.to_string(), d.to_string()];
            for (i, v) in values.iter().enumerate() {
                record.push(match v {
                    Some(v) if Some(i) == best => format!("{v:.3}*"),
                    Some(v) => format!("{v:.3}"),
                    None => String::new(),
                });
            }
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Node-level AUC and accuracy next to bias for node-producing models.
    pub fn write_auc_vs_bias<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
        w.write_record(["sampling", "dgp", "model", "denominator_mode", "mean_auc", "mean_accuracy", "bias", "mae"])?;
        let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
        for c in self.cells.iter().filter(|c| c.mean_auc.is_some()) {
            w.write_record([
                c.sampling.clone(),
                c.dgp.clone(),
                c.model.clone(),
                c.denominator_mode.clone(),
                opt(c.mean_auc),
                opt(c.mean_accuracy),
                opt(c.bias),
                opt(c.mae),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Index of the smallest `|value|`, ties going to the first.
pub fn best_index(values: &[Option<f64>]) -> Option<usize> {
    values
        .iter()
        .enumerate()
        .filter_map(|(i, v)| v.map(|v| (i, v.abs())))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(i, _)| i)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableMetric {
    Bias,
    Mae,
}

impl TableMetric {
    fn value(self, c: &CellSummary) -> Option<f64> {
        match self {
            TableMetric::Bias => c.bias,
            TableMetric::Mae => c.mae,
        }
    }
}
