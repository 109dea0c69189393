mod input;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use homophily::estimators::{
    coleman_stats, estimate_from_scores, estimate_modes, score_dyads, DenominatorMode, EstimateRecord, ModelKind,
    Prepared, Problem,
};
use homophily::metrics::{
    cv_residual_diagnostic, read_results_csv, BatterySummary, DEFAULT_FOLDS, DEFAULT_PERMUTATIONS,
};
use homophily::rng::stream;
use homophily::runner::{run_battery, write_battery, write_report, ExperimentConfig};

use input::{load, Loaded, Sources};

#[derive(Parser)]
#[command(name = "homophily", version, about = "Estimate network homophily from predicted node categories")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte-Carlo battery and write results and summaries.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides `base_seed` from the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Estimate homophily for one labeled network.
    Estimate {
        #[command(flatten)]
        data: DataArgs,
        /// A model kind, or `both` for node and augmented ego-alter.
        #[arg(long, default_value = "both")]
        model: String,
        /// Node-level actions `node_id,a` for the action-weighted estimand.
        #[arg(long)]
        actions: Option<PathBuf>,
    },
    /// Cross-validated weighted residual diagnostic.
    Diagnose {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value = "node")]
        model: String,
        #[arg(long, default_value_t = DEFAULT_FOLDS)]
        folds: usize,
        #[arg(long, default_value_t = DEFAULT_PERMUTATIONS)]
        permutations: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Rebuild summary tables from a results CSV.
    Report {
        #[arg(long)]
        results: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct DataArgs {
    /// Edge list with header `src,dst`.
    #[arg(long)]
    edges: PathBuf,
    /// Ground-truth labels with header `node_id,label`.
    #[arg(long)]
    labels: PathBuf,
    /// Label value that plays group a.
    #[arg(long)]
    group: String,
    /// Node covariate with header `node_id,x`.
    #[arg(long)]
    features: Option<PathBuf>,
    /// Labeled edges `src,dst` when ground truth was sampled by edge.
    #[arg(long)]
    dyads: Option<PathBuf>,
    /// Writes the `node_id,internal_id` mapping here.
    #[arg(long)]
    mapping: Option<PathBuf>,
}

impl DataArgs {
    fn load(&self, actions: Option<&Path>) -> Result<Loaded> {
        let loaded = load(&Sources {
            edges: &self.edges,
            labels: &self.labels,
            group: &self.group,
            features: self.features.as_deref(),
            actions,
            dyads: self.dyads.as_deref(),
        })?;
        if let Some(path) = &self.mapping {
            loaded.index.write_csv(BufWriter::new(File::create(path)?))?;
        }
        Ok(loaded)
    }
}

fn parse_models(spec: &str) -> Result<Vec<ModelKind>> {
    if spec == "both" {
        return Ok(vec![ModelKind::Node, ModelKind::EgoAlterAugmented]);
    }
    Ok(vec![spec.parse()?])
}

type RowFormat = Box<dyn Fn(&Column) -> String>;

struct Column {
    model: ModelKind,
    record: EstimateRecord,
    coleman: Option<homophily::estimators::ColemanStats>,
}

fn estimate_one(prep: &Prepared<'_>, model: ModelKind, fully_labeled: bool) -> Result<Column> {
    let p = &prep.problem;
    let labels = || p.y.iter().map(|&b| f64::from(u8::from(b))).collect::<Vec<_>>();
    if model.is_node_producing() {
        let scores = score_dyads(model, prep)?;
        let record = estimate_from_scores(prep, &scores, DenominatorMode::PlugIn)?;
        let probs = scores.node_probs.as_deref().context("node-producing model without node probabilities")?;
        return Ok(Column { model, record, coleman: Some(coleman_stats(p.graph, probs)?) });
    }
    let record = estimate_modes(model, prep, &[DenominatorMode::PlugIn])?.remove(0);
    let coleman = if fully_labeled { Some(coleman_stats(p.graph, &labels())?) } else { None };
    Ok(Column { model, record, coleman })
}

fn estimate(data: &DataArgs, model: &str, actions: Option<&Path>) -> Result<()> {
    let models = parse_models(model)?;
    let loaded = data.load(actions)?;
    let problem = Problem {
        graph: &loaded.graph,
        x: loaded.x.as_deref(),
        y: &loaded.y,
        mask: &loaded.mask,
        truth: false,
        actions: loaded.actions.as_deref(),
    };
    let prep = Prepared::new(problem)?;
    let fully_labeled = loaded.mask.labeled_node_count() == loaded.graph.node_count();
    let columns = models.iter().map(|&m| estimate_one(&prep, m, fully_labeled)).collect::<Result<Vec<_>>>()?;

    let opt = |v: Option<f64>| v.map_or_else(|| "n/a".to_owned(), |v| v.to_string());
    let rows: [(&str, RowFormat); 10] = [
        ("model", Box::new(|c| c.model.to_string())),
        ("H_hat", Box::new(|c| c.record.h_hat.to_string())),
        ("numerator", Box::new(|c| c.record.numerator.to_string())),
        ("denominator", Box::new(|c| c.record.denominator.to_string())),
        ("coleman_numerator", Box::new(move |c| opt(c.coleman.map(|s| s.numerator)))),
        ("coleman_proportion", Box::new(move |c| opt(c.coleman.map(|s| s.proportion)))),
        ("coleman_index", Box::new(move |c| opt(c.coleman.map(|s| s.index)))),
        ("labeled_nodes", Box::new(|c| c.record.n_labeled_nodes.to_string())),
        ("labeled_dyads", Box::new(|c| c.record.n_labeled_dyads.to_string())),
        ("flags", Box::new(|c| c.record.flags.to_string())),
    ];
    let mut out = std::io::stdout().lock();
    writeln!(out, "estimand: {}", if loaded.actions.is_some() { "action_weighted" } else { "egonet" })?;
    writeln!(out, "denominator: {}", DenominatorMode::PlugIn)?;
    for (name, f) in &rows {
        write!(out, "{name:<20}")?;
        for c in &columns {
            write!(out, " {:>24}", f(c))?;
        }
        writeln!(out)?;
    }
    Ok(())
}

fn diagnose(data: &DataArgs, model: &str, folds: usize, permutations: usize, seed: u64) -> Result<()> {
    let kind: ModelKind = model.parse()?;
    let loaded = data.load(None)?;
    let problem = Problem {
        graph: &loaded.graph,
        x: loaded.x.as_deref(),
        y: &loaded.y,
        mask: &loaded.mask,
        truth: false,
        actions: None,
    };
    let prep = Prepared::new(problem)?;
    let report = cv_residual_diagnostic(&prep, kind, folds, permutations, &mut stream(seed, 0, "diagnose"))?;
    let mut out = std::io::stdout().lock();
    writeln!(out, "model {}", report.model)?;
    writeln!(out, "labeled_dyads {}", report.n_dyads)?;
    for (k, s) in report.fold_sums.iter().enumerate() {
        writeln!(out, "fold_{} {s}", k + 1)?;
    }
    writeln!(out, "total {}", report.total)?;
    writeln!(out, "null_95 {} {}", report.null_low, report.null_high)?;
    writeln!(out, "flagged {}", if report.flagged() { "yes" } else { "no" })?;
    Ok(())
}

fn simulate(config: &Path, out: &Path, seed: Option<u64>) -> Result<()> {
    let mut cfg = ExperimentConfig::from_path(config)?;
    if let Some(seed) = seed {
        cfg.base_seed = seed;
    }
    let battery = run_battery(&cfg)?;
    write_battery(&battery, out)?;
    std::fs::write(out.join("config.toml"), cfg.to_toml_string()?)?;
    println!("wrote {} rows ({} excluded) to {}", battery.rows.len(), battery.excluded_rows(), out.display());
    Ok(())
}

fn report(results: &Path, out: &Path) -> Result<()> {
    let rows = read_results_csv(File::open(results).with_context(|| format!("opening {}", results.display()))?)?;
    write_report(&BatterySummary::from_rows(&rows), out)?;
    println!("summarized {} rows into {}", rows.len(), out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate { config, out, seed } => simulate(config, out, *seed),
        Command::Estimate { data, model, actions } => estimate(data, model, actions.as_deref()),
        Command::Diagnose { data, model, folds, permutations, seed } => {
            diagnose(data, model, *folds, *permutations, *seed)
        }
        Command::Report { results, out } => report(results, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            match e.downcast_ref::<homophily::Error>() {
                Some(homophily::Error::Config(_)) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
