//! Monte-Carlo batteries over data-generating processes, sampling levels,
//! models and denominator modes.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{estimate_modes, true_homophily, DenominatorMode, ModelKind, Prepared, Problem};
use crate::graph::{generate_pa_graph, Graph};
use crate::metrics::{canonical_key, write_results_csv, BatterySummary, ResultRow, TableMetric};
use crate::rng::stream;
use crate::sampling::{
    biased_edge_sample, biased_node_sample, random_edge_sample, random_node_sample, GroundTruthMask, SamplingLevel,
    SamplingMode, SamplingScheme,
};
use crate::simgen::{gen_features, gen_outcomes, DgpKind, NodeTable, OutcomeCoefficients, ZTransform};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n_nodes: usize,
    pub m: usize,
    pub k: f64,
    pub node_fraction: f64,
    pub edge_fraction: f64,
    /// Expected labeled-node count for biased node sampling; defaults to
    /// `node_fraction * n_nodes`.
    pub biased_node_target: Option<usize>,
    /// Expected labeled-edge count for biased edge sampling; defaults to
    /// `edge_fraction * edges`.
    pub biased_edge_target: Option<usize>,
    pub replications: usize,
    pub base_seed: u64,
    pub dgps: Vec<DgpKind>,
    pub samplings: Vec<SamplingLevel>,
    pub models: Vec<ModelKind>,
    pub denominator_modes: Vec<DenominatorMode>,
    /// Worker threads; 0 uses every available core.
    pub workers: usize,
    pub z_transform: ZTransform,
    pub outcome: OutcomeCoefficients,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n_nodes: 4000,
            m: 5,
            k: 0.8,
            node_fraction: 0.20,
            edge_fraction: 0.025,
            biased_node_target: None,
            biased_edge_target: None,
            replications: 500,
            base_seed: 1,
            dgps: DgpKind::ALL.to_vec(),
            samplings: vec![SamplingLevel::Node, SamplingLevel::Edge],
            models: ModelKind::ALL.to_vec(),
            denominator_modes: DenominatorMode::ALL.to_vec(),
            workers: 0,
            z_transform: ZTransform::Zscore,
            outcome: OutcomeCoefficients::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, why: &str| Err(Error::Config(format!("`{key}` {why}")));
        if self.replications == 0 {
            return bad("replications", "must be at least 1");
        }
        if !(self.node_fraction > 0.0 && self.node_fraction < 1.0) {
            return bad("node_fraction", "must lie in (0, 1)");
        }
        if !(self.edge_fraction > 0.0 && self.edge_fraction < 1.0) {
            return bad("edge_fraction", "must lie in (0, 1)");
        }
        if self.m == 0 || self.n_nodes <= self.m + 1 {
            return bad("n_nodes", "must exceed m + 1 with m >= 1");
        }
        if !self.k.is_finite() {
            return bad("k", "must be finite");
        }
        for (key, empty) in [
            ("dgps", self.dgps.is_empty()),
            ("samplings", self.samplings.is_empty()),
            ("models", self.models.is_empty()),
            ("denominator_modes", self.denominator_modes.is_empty()),
        ] {
            if empty {
                return bad(key, "must not be empty");
            }
        }
        Ok(())
    }

    /// Random sampling for every process except the one that defines biased
    /// ground truth.
    pub fn scheme(&self, dgp: DgpKind, level: SamplingLevel) -> SamplingScheme {
        let mode = if dgp.biased_sampling() { SamplingMode::Biased } else { SamplingMode::Random };
        SamplingScheme { level, mode }
    }
}

/// Graph for one replication, shared by every process and model.
pub fn replication_graph(cfg: &ExperimentConfig, rep: u64) -> Result<Graph> {
    generate_pa_graph(cfg.n_nodes, cfg.m, cfg.k, &mut stream(cfg.base_seed, rep, "graph"))
}

/// Features and outcomes of one process on the replication graph.
pub fn replication_nodes(cfg: &ExperimentConfig, rep: u64, g: &Graph, dgp: DgpKind) -> Result<NodeTable> {
    let mut rng = stream(cfg.base_seed, rep, &format!("nodes/{dgp}"));
    let nt = gen_features(g, dgp, cfg.z_transform, &mut rng)?;
    gen_outcomes(nt, dgp, cfg.outcome, &mut rng)
}

/// Ground-truth mask of one (process, level) pair.
pub fn replication_mask(
    cfg: &ExperimentConfig,
    rep: u64,
    g: &Graph,
    nt: &NodeTable,
    dgp: DgpKind,
    level: SamplingLevel,
) -> Result<GroundTruthMask> {
    let scheme = cfg.scheme(dgp, level);
    let mut rng = stream(cfg.base_seed, rep, &format!("sample/{dgp}/{}", scheme.as_str()));
    let target = |explicit: Option<usize>, fraction: f64, units: usize| {
        explicit.unwrap_or_else(|| (fraction * units as f64).round() as usize)
    };
    match (level, scheme.mode) {
        (SamplingLevel::Node, SamplingMode::Random) => random_node_sample(g, cfg.node_fraction, &mut rng),
        (SamplingLevel::Edge, SamplingMode::Random) => random_edge_sample(g, cfg.edge_fraction, &mut rng),
        (SamplingLevel::Node, SamplingMode::Biased) => {
            let t = target(cfg.biased_node_target, cfg.node_fraction, g.node_count());
            biased_node_sample(g, nt, t, &mut rng)
        }
        (SamplingLevel::Edge, SamplingMode::Biased) => {
            let t = target(cfg.biased_edge_target, cfg.edge_fraction, g.edge_count());
            biased_edge_sample(g, nt, t, &mut rng)
        }
    }
}

fn error_row(
    rep: u64,
    dgp: DgpKind,
    scheme: &str,
    model: ModelKind,
    mode: DenominatorMode,
    h: Option<f64>,
    e: &Error,
) -> ResultRow {
    ResultRow {
        rep,
        dgp: dgp.as_str().into(),
        sampling: scheme.into(),
        model: model.as_str().into(),
        denominator_mode: mode.as_str().into(),
        h_true: h,
        h_hat: None,
        rel_bias: None,
        node_auc: None,
        node_accuracy: None,
        n_labeled_nodes: 0,
        n_labeled_dyads: 0,
        flag: format!("error:{}", e.code()),
    }
}

fn run_cell(
    cfg: &ExperimentConfig,
    rep: u64,
    g: &Graph,
    nt: &NodeTable,
    dgp: DgpKind,
    level: SamplingLevel,
) -> Vec<ResultRow> {
    let scheme = cfg.scheme(dgp, level).as_str();
    let h = true_homophily(g, &nt.y).ok();
    let fail_all = |e: &Error| {
        cfg.models
            .iter()
            .flat_map(|&m| cfg.denominator_modes.iter().map(move |&d| (m, d)))
            .map(|(m, d)| error_row(rep, dgp, scheme, m, d, h, e))
            .collect::<Vec<_>>()
    };
    let mask = match replication_mask(cfg, rep, g, nt, dgp, level) {
        Ok(mask) => mask,
        Err(e) => return fail_all(&e),
    };
    let problem = Problem { graph: g, x: Some(&nt.x), y: &nt.y, mask: &mask, truth: true, actions: None };
    let prep = match Prepared::new(problem) {
        Ok(p) => p,
        Err(e) => return fail_all(&e),
    };
    let mut rows = Vec::new();
    for &model in &cfg.models {
        match estimate_modes(model, &prep, &cfg.denominator_modes) {
            Ok(recs) => rows.extend(recs.iter().map(|r| ResultRow::from_record(rep, dgp.as_str(), scheme, r))),
            Err(e) => rows.extend(cfg.denominator_modes.iter().map(|&d| {
                let mut row = error_row(rep, dgp, scheme, model, d, h, &e);
                row.n_labeled_nodes = mask.labeled_node_count();
                row.n_labeled_dyads = mask.labeled_dyad_count();
                row
            })),
        }
    }
    rows
}

/// Every row of one replication.
pub fn run_replication(cfg: &ExperimentConfig, rep: u64) -> Vec<ResultRow> {
    let g = replication_graph(cfg, rep);
    let mut rows = Vec::new();
    for &dgp in &cfg.dgps {
        let nodes = g.as_ref().map_err(clone_err).and_then(|g| replication_nodes(cfg, rep, g, dgp).map(|nt| (g, nt)));
        for &level in &cfg.samplings {
            match &nodes {
                Ok((g, nt)) => rows.extend(run_cell(cfg, rep, g, nt, dgp, level)),
                Err(e) => {
                    let scheme = cfg.scheme(dgp, level).as_str();
                    for &m in &cfg.models {
                        rows.extend(cfg.denominator_modes.iter().map(|&d| error_row(rep, dgp, scheme, m, d, None, e)));
                    }
                }
            }
        }
    }
    rows
}

// Errors are not `Clone` because of the IO variants; keep the code and message.
fn clone_err(e: &Error) -> Error {
    match e {
        Error::InvalidParameter(s) => Error::InvalidParameter(s.clone()),
        Error::DegenerateInput(s) => Error::DegenerateInput(s.clone()),
        other => Error::Numerical(other.to_string()),
    }
}

/// Results table plus its summary.
#[derive(Debug, Clone, PartialEq)]
pub struct Battery {
    pub rows: Vec<ResultRow>,
    pub summary: BatterySummary,
}

impl Battery {
    pub fn excluded_rows(&self) -> usize {
        self.rows.iter().filter(|r| r.is_error()).count()
    }
}

/// Runs every replication in parallel and returns canonically sorted rows.
pub fn run_battery(cfg: &ExperimentConfig) -> Result<Battery> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::Config(format!("`workers`: {e}")))?;
    let mut rows: Vec<ResultRow> = pool.install(|| {
        (0..cfg.replications as u64).into_par_iter().flat_map_iter(|rep| run_replication(cfg, rep)).collect()
    });
    rows.sort_by_cached_key(canonical_key);
    let summary = BatterySummary::from_rows(&rows);
    Ok(Battery { rows, summary })
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

/// Writes the long summary, bias and MAE tables per denominator mode, and the
/// AUC-vs-bias data into `dir`.
pub fn write_report(summary: &BatterySummary, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    summary.write_csv(create(dir, "summary.csv")?)?;
    let mut modes: Vec<&str> = summary.cells.iter().map(|c| c.denominator_mode.as_str()).collect();
    modes.sort_unstable();
    modes.dedup();
    for mode in modes {
        summary.write_table(TableMetric::Bias, mode, create(dir, &format!("bias_{mode}.csv"))?)?;
        summary.write_table(TableMetric::Mae, mode, create(dir, &format!("mae_{mode}.csv"))?)?;
    }
    summary.write_auc_vs_bias(create(dir, "auc_vs_bias.csv")?)?;
    Ok(())
}

/// Writes `results.csv` and the report files.
pub fn write_battery(battery: &Battery, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_results_csv(&battery.rows, create(dir, "results.csv")?)?;
    write_report(&battery.summary, dir)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ExperimentConfig {
        ExperimentConfig { n_nodes: 120, replications: 2, edge_fraction: 0.1, node_fraction: 0.3, ..Default::default() }
    }

    #[test]
    fn default_config_round_trips_through_toml() {
        let cfg = ExperimentConfig::default();
        assert_eq!(ExperimentConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap(), cfg);
        let partial = ExperimentConfig::from_toml_str("replications = 3\ndgps = [\"main\"]\n").unwrap();
        assert_eq!(partial.replications, 3);
        assert_eq!(partial.dgps, vec![DgpKind::Main]);
        assert_eq!(partial.n_nodes, 4000);
    }

    #[test]
    fn unknown_and_invalid_keys_are_rejected() {
        let err = ExperimentConfig::from_toml_str("replicates = 3\n").unwrap_err();
        assert!(matches!(&err, Error::Config(m) if m.contains("replicates")), "{err}");
        let err = ExperimentConfig::from_toml_str("node_fraction = 1.5\n").unwrap_err();
        assert!(matches!(&err, Error::Config(m) if m.contains("node_fraction")));
        assert!(ExperimentConfig::from_toml_str("replications = 0\n").is_err());
    }

    #[test]
    fn one_record_per_cell_and_rerun_is_identical() {
        let cfg = ExperimentConfig { n_nodes: 50, replications: 1, edge_fraction: 0.2, node_fraction: 0.4, ..tiny() };
        let a = run_battery(&cfg).unwrap();
        let cells = cfg.dgps.len() * cfg.samplings.len() * cfg.models.len() * cfg.denominator_modes.len();
        assert_eq!(a.rows.len(), cells);
        let b = run_battery(&cfg).unwrap();
        let (mut x, mut y) = (Vec::new(), Vec::new());
        write_results_csv(&a.rows, &mut x).unwrap();
        write_results_csv(&b.rows, &mut y).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let one = run_battery(&ExperimentConfig { workers: 1, replications: 4, ..tiny() }).unwrap();
        let four = run_battery(&ExperimentConfig { workers: 4, replications: 4, ..tiny() }).unwrap();
        assert_eq!(one, four);
    }

    #[test]
    fn truth_is_shared_across_models_within_a_replication() {
        let b = run_battery(&tiny()).unwrap();
        for r in &b.rows {
            let twin = b.rows.iter().find(|o| o.rep == r.rep && o.dgp == r.dgp && o.model == "no_model").unwrap();
            assert_eq!(r.h_true, twin.h_true);
        }
        assert!(b.rows.iter().any(|r| r.sampling == "node_biased" && r.dgp == "sampled"));
        assert!(b.rows.iter().all(|r| r.dgp == "sampled" || !r.sampling.ends_with("biased")));
    }

    #[test]
    fn adding_models_does_not_perturb_other_rows() {
        let all = run_battery(&tiny()).unwrap();
        let some = run_battery(&ExperimentConfig { models: vec![ModelKind::Node], ..tiny() }).unwrap();
        for r in &some.rows {
            assert!(all.rows.contains(r));
        }
    }

    #[test]
    fn report_files_are_written() {
        let dir = tempfile::tempdir().unwrap();
        let b = run_battery(&ExperimentConfig { replications: 1, ..tiny() }).unwrap();
        write_battery(&b, dir.path()).unwrap();
        for f in ["results.csv", "summary.csv", "bias_oracle.csv", "mae_plug_in.csv", "auc_vs_bias.csv"] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
    }
}
