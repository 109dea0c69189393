//! Reading external edge, label, feature and action files.

use std::collections::HashMap;
use std::fs::File;
use std::io::Write;
use std::path::Path;

use homophily::graph::Graph;
use homophily::sampling::GroundTruthMask;
use homophily::{Error, Result};

/// Dense ids for arbitrary string node ids. Integer ids keep numeric order,
/// anything else is ordered lexicographically.
#[derive(Debug, Clone)]
pub struct NodeIndex {
    ids: Vec<String>,
    map: HashMap<String, usize>,
}

impl NodeIndex {
    pub fn new<'a>(ids: impl IntoIterator<Item = &'a str>) -> Self {
        let mut ids: Vec<String> = ids.into_iter().map(str::to_owned).collect();
        ids.sort_unstable();
        ids.dedup();
        if ids.iter().all(|s| s.parse::<u64>().is_ok()) {
            ids.sort_by_key(|s| s.parse::<u64>().unwrap_or(u64::MAX));
        }
        let map = ids.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        Self { ids, map }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn get(&self, id: &str) -> Result<usize> {
        self.map.get(id).copied().ok_or_else(|| Error::UnknownNode(id.to_owned()))
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
        w.write_record(["node_id", "internal_id"])?;
        for (i, id) in self.ids.iter().enumerate() {
            w.write_record([id.as_str(), &i.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Two-column CSV with the given header.
pub fn read_pairs(path: &Path, header: [&str; 2]) -> Result<Vec<(String, String)>> {
    let mut r = csv::Reader::from_reader(File::open(path)?);
    let found = r.headers()?.clone();
    if found.len() != 2 || found.get(0) != Some(header[0]) || found.get(1) != Some(header[1]) {
        return Err(Error::Schema(format!("{} must have header `{}`", path.display(), header.join(","))));
    }
    r.records()
        .map(|rec| {
            let rec = rec?;
            Ok((rec[0].trim().to_owned(), rec[1].trim().to_owned()))
        })
        .collect()
}

fn parse_number(path: &Path, id: &str, value: &str) -> Result<f64> {
    value
        .parse::<f64>()
        .map_err(|_| Error::Schema(format!("{}: value `{value}` for node `{id}` is not a number", path.display())))
}

/// Per-node numeric column; every node must be covered.
fn read_node_values(path: &Path, header: [&str; 2], index: &NodeIndex) -> Result<Vec<f64>> {
    let mut out = vec![None; index.len()];
    for (id, value) in read_pairs(path, header)? {
        out[index.get(&id)?] = Some(parse_number(path, &id, &value)?);
    }
    out.into_iter()
        .enumerate()
        .map(|(i, v)| {
            v.ok_or_else(|| Error::Schema(format!("{} has no value for node {}", path.display(), index.ids[i])))
        })
        .collect()
}

/// Everything loaded for `estimate` and `diagnose`.
pub struct Loaded {
    pub index: NodeIndex,
    pub graph: Graph,
    pub y: Vec<bool>,
    pub mask: GroundTruthMask,
    pub x: Option<Vec<f64>>,
    pub actions: Option<Vec<f64>>,
}

pub struct Sources<'a> {
    pub edges: &'a Path,
    pub labels: &'a Path,
    pub group: &'a str,
    pub features: Option<&'a Path>,
    pub actions: Option<&'a Path>,
    pub dyads: Option<&'a Path>,
}

pub fn load(src: &Sources<'_>) -> Result<Loaded> {
    let edges = read_pairs(src.edges, ["src", "dst"])?;
    let index = NodeIndex::new(edges.iter().flat_map(|(a, b)| [a.as_str(), b.as_str()]));
    let dense = edges.iter().map(|(a, b)| Ok((index.get(a)?, index.get(b)?))).collect::<Result<Vec<_>>>()?;
    let graph = Graph::from_edges(index.len(), dense)?;

    let n = index.len();
    let mut y = vec![false; n];
    let mut labeled = vec![false; n];
    for (id, label) in read_pairs(src.labels, ["node_id", "label"])? {
        let i = index.get(&id)?;
        labeled[i] = true;
        y[i] = label == src.group;
    }
    if !y.iter().any(|&b| b) {
        return Err(Error::UndefinedEstimand(format!("no labeled node is in group `{}`", src.group)));
    }

    let mask = match src.dyads {
        None => GroundTruthMask::from_nodes(&graph, labeled)?,
        Some(path) => {
            let pairs = read_pairs(path, ["src", "dst"])?;
            let dense = pairs.iter().map(|(a, b)| Ok((index.get(a)?, index.get(b)?))).collect::<Result<Vec<_>>>()?;
            if let Some(&(u, v)) = dense.iter().find(|&&(u, v)| !labeled[u] || !labeled[v]) {
                return Err(Error::Schema(format!(
                    "labeled dyad {},{} has an endpoint without a label",
                    index.ids[u], index.ids[v]
                )));
            }
            GroundTruthMask::from_edges(&graph, dense)?
        }
    };
    let x = src.features.map(|p| read_node_values(p, ["node_id", "x"], &index)).transpose()?;
    let actions = src.actions.map(|p| read_node_values(p, ["node_id", "a"], &index)).transpose()?;
    Ok(Loaded { index, graph, y, mask, x, actions })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numeric_ids_sort_numerically() {
        let idx = NodeIndex::new(["10", "2", "1", "2"]);
        assert_eq!(idx.get("1").unwrap(), 0);
        assert_eq!(idx.get("2").unwrap(), 1);
        assert_eq!(idx.get("10").unwrap(), 2);
        assert!(matches!(idx.get("3"), Err(Error::UnknownNode(_))));
    }

    #[test]
    fn string_ids_sort_lexicographically() {
        let idx = NodeIndex::new(["bob", "alice", "10"]);
        assert_eq!(idx.get("10").unwrap(), 0);
        assert_eq!(idx.get("alice").unwrap(), 1);
    }
}
