//! Exact estimands: average egonet composition, its action-weighted variant,
//! Coleman quantities, and the residual decomposition of product estimators.

use crate::error::{Error, Result};
use crate::graph::Graph;

fn check_len(g: &Graph, len: usize, what: &str) -> Result<()> {
    if len != g.node_count() {
        return Err(Error::InvalidParameter(format!("{what} has {len} entries for {} nodes", g.node_count())));
    }
    Ok(())
}

fn ind(b: bool) -> f64 {
    f64::from(u8::from(b))
}

/// Size of group a.
pub fn group_size(y: &[bool]) -> usize {
    y.iter().filter(|&&b| b).count()
}

/// Average share of group-a alters in group-a ego networks, as an average
/// over egos.
pub fn egonet_average(g: &Graph, y: &[bool]) -> Result<f64> {
    check_len(g, y.len(), "labels")?;
    let t = group_size(y);
    if t == 0 {
        return Err(Error::UndefinedEstimand("group a is empty".into()));
    }
    let mut total = 0.0;
    for i in (0..g.node_count()).filter(|&i| y[i]) {
        let nbrs = g.neighbors(i);
        if nbrs.is_empty() {
            continue;
        }
        total += nbrs.iter().filter(|&&j| y[j]).count() as f64 / nbrs.len() as f64;
    }
    Ok(total / t as f64)
}

/// The same quantity as a sum over directed dyads weighted by `1/D_ego`.
pub fn dyad_sum(g: &Graph, y: &[bool]) -> Result<f64> {
    check_len(g, y.len(), "labels")?;
    let t = group_size(y);
    if t == 0 {
        return Err(Error::UndefinedEstimand("group a is empty".into()));
    }
    let s: f64 = g.directed_dyads().iter().map(|d| ind(y[d.ego] && y[d.alter]) / g.degree(d.ego) as f64).sum();
    Ok(s / t as f64)
}

/// True homophily `H^aa`, computed both ways and cross-checked.
pub fn true_homophily(g: &Graph, y: &[bool]) -> Result<f64> {
    let by_ego = egonet_average(g, y)?;
    let by_dyad = dyad_sum(g, y)?;
    if (by_ego - by_dyad).abs() > 1e-12 {
        return Err(Error::Numerical(format!("egonet average {by_ego} and dyad sum {by_dyad} disagree")));
    }
    Ok(by_dyad)
}

/// Per-dyad weights `A_alter / D_ego` aligned with `g.directed_dyads()`.
pub fn action_weights(g: &Graph, actions: Option<&[f64]>) -> Result<Vec<f64>> {
    if let Some(a) = actions {
        check_len(g, a.len(), "actions")?;
        if let Some(bad) = a.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidParameter(format!("actions must be finite and nonnegative, found {bad}")));
        }
    }
    Ok(g.directed_dyads().iter().map(|d| actions.map_or(1.0, |a| a[d.alter]) / g.degree(d.ego) as f64).collect())
}

/// Action-weighted estimand: share of alter actions seen by group-a egos that
/// come from group-a alters.
pub fn extended_true_homophily(g: &Graph, y: &[bool], actions: &[f64]) -> Result<f64> {
    check_len(g, y.len(), "labels")?;
    let w = action_weights(g, Some(actions))?;
    let t = group_size(y);
    if t == 0 {
        return Err(Error::UndefinedEstimand("group a is empty".into()));
    }
    let s: f64 = g.directed_dyads().iter().zip(&w).map(|(d, w)| w * ind(y[d.ego] && y[d.alter])).sum();
    Ok(s / t as f64)
}

/// Coleman-style quantities for group a. `values` are 0/1 labels or
/// membership probabilities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColemanStats {
    /// Within-group dyads per group-a node.
    pub numerator: f64,
    /// Share of group-a egos' dyads that land in group a.
    pub proportion: f64,
    /// Group a's share of the node population.
    pub chance_share: f64,
    pub index: f64,
}

pub fn coleman_numerator(g: &Graph, values: &[f64]) -> Result<f64> {
    Ok(coleman_stats(g, values)?.numerator)
}

pub fn coleman_index(g: &Graph, values: &[f64]) -> Result<f64> {
    Ok(coleman_stats(g, values)?.index)
}

pub fn coleman_stats(g: &Graph, values: &[f64]) -> Result<ColemanStats> {
    check_len(g, values.len(), "values")?;
    let t: f64 = values.iter().sum();
    if t <= 0.0 {
        return Err(Error::UndefinedEstimand("group a is empty".into()));
    }
    let dyads = g.directed_dyads();
    let within: f64 = dyads.iter().map(|d| values[d.ego] * values[d.alter]).sum();
    let ego_slots: f64 = dyads.iter().map(|d| values[d.ego]).sum();
    let numerator = within / t;
    let proportion = within / ego_slots;
    let chance_share = t / values.len() as f64;
    let index = if chance_share >= 1.0 {
        1.0
    } else if proportion >= chance_share {
        (proportion - chance_share) / (1.0 - chance_share)
    } else {
        (proportion - chance_share) / chance_share
    };
    Ok(ColemanStats { numerator, proportion, chance_share, index })
}

/// Residual terms of a product estimator: `H_hat = H - R1 - R2` where
/// `R1 = T^-1 sum w (Y_ego - p_ego) Y_alter` and
/// `R2 = T^-1 sum w p_ego (Y_alter - p_alter)`.
pub fn bias_decomposition_weighted(
    g: &Graph,
    y: &[bool],
    weights: &[f64],
    ego_preds: &[f64],
    alter_preds: &[f64],
) -> Result<(f64, f64)> {
    check_len(g, y.len(), "labels")?;
    let n = g.dyad_count();
    if weights.len() != n || ego_preds.len() != n || alter_preds.len() != n {
        return Err(Error::InvalidParameter("per-dyad vectors must cover every directed dyad".into()));
    }
    let t = group_size(y);
    if t == 0 {
        return Err(Error::UndefinedEstimand("group a is empty".into()));
    }
    let (mut r1, mut r2) = (0.0, 0.0);
    for (k, d) in g.directed_dyads().iter().enumerate() {
        let e_ego = ind(y[d.ego]) - ego_preds[k];
        let e_alter = ind(y[d.alter]) - alter_preds[k];
        r1 += weights[k] * e_ego * ind(y[d.alter]);
        r2 += weights[k] * ego_preds[k] * e_alter;
    }
    Ok((r1 / t as f64, r2 / t as f64))
}

/// [`bias_decomposition_weighted`] with the plain `1/D_ego` weights.
pub fn bias_decomposition(g: &Graph, y: &[bool], ego_preds: &[f64], alter_preds: &[f64]) -> Result<(f64, f64)> {
    let w = action_weights(g, None)?;
    bias_decomposition_weighted(g, y, &w, ego_preds, alter_preds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    // path a - a - b as nodes 0, 1, 2
    fn aab() -> (Graph, Vec<bool>) {
        (Graph::from_edges(3, [(0, 1), (1, 2)]).unwrap(), vec![true, true, false])
    }

    fn random_graph(rng: &mut ChaCha8Rng, n: usize) -> Graph {
        let p = rng.random_range(0.1..0.7);
        let mut edges = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                if rng.random::<f64>() < p {
                    edges.push((u, v));
                }
            }
        }
        Graph::from_edges(n, edges).unwrap()
    }

    #[test]
    fn path_example() {
        let (g, y) = aab();
        assert_abs_diff_eq!(true_homophily(&g, &y).unwrap(), 0.75, epsilon = 1e-15);
    }

    #[test]
    fn all_a_graph() {
        let g = Graph::from_edges(4, [(0, 1), (1, 2), (2, 3), (0, 3)]).unwrap();
        assert_eq!(true_homophily(&g, &[true; 4]).unwrap(), 1.0);
        let c = coleman_stats(&g, &[1.0; 4]).unwrap();
        assert_eq!(c.proportion, 1.0);
        assert_eq!(c.index, 1.0);
    }

    #[test]
    fn empty_group_is_undefined() {
        let (g, _) = aab();
        assert!(matches!(true_homophily(&g, &[false; 3]), Err(Error::UndefinedEstimand(_))));
        assert!(coleman_stats(&g, &[0.0; 3]).is_err());
    }

    #[test]
    fn egonet_and_dyad_forms_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut checked = 0;
        while checked < 1000 {
            let n = rng.random_range(2..15);
            let g = random_graph(&mut rng, n);
            let y: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
            if group_size(&y) == 0 {
                continue;
            }
            let a = egonet_average(&g, &y).unwrap();
            let b = dyad_sum(&g, &y).unwrap();
            assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
            checked += 1;
        }
    }

    #[test]
    fn coleman_path_example() {
        let (g, y) = aab();
        let v: Vec<f64> = y.iter().map(|&b| ind(b)).collect();
        let c = coleman_stats(&g, &v).unwrap();
        assert_abs_diff_eq!(c.numerator, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(c.proportion, 2.0 / 3.0, epsilon = 1e-15);
        // two of three nodes in group a: the within share equals chance
        assert_abs_diff_eq!(c.chance_share, 2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(c.index, 0.0, epsilon = 1e-15);
        assert_eq!(coleman_numerator(&g, &v).unwrap(), c.numerator);
        assert_eq!(coleman_index(&g, &v).unwrap(), c.index);
    }

    #[test]
    fn extended_estimand_examples() {
        let (g, y) = aab();
        assert_abs_diff_eq!(extended_true_homophily(&g, &y, &[0.0, 1.0, 3.0]).unwrap(), 0.5, epsilon = 1e-15);
        assert_eq!(extended_true_homophily(&g, &y, &[1.0; 3]).unwrap(), true_homophily(&g, &y).unwrap());
        assert_eq!(extended_true_homophily(&g, &y, &[0.0; 3]).unwrap(), 0.0);
        assert!(extended_true_homophily(&g, &y, &[1.0, -1.0, 1.0]).is_err());
    }

    // Brute-force expansion of the product estimator into truth and residual terms.
    #[test]
    fn decomposition_identity_on_random_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..500 {
            let g = random_graph(&mut rng, 10);
            let y: Vec<bool> = (0..10).map(|_| rng.random_bool(0.5)).collect();
            if group_size(&y) == 0 || g.edge_count() == 0 {
                continue;
            }
            let m = g.dyad_count();
            let pe: Vec<f64> = (0..m).map(|_| rng.random()).collect();
            let pa: Vec<f64> = (0..m).map(|_| rng.random()).collect();
            let t = group_size(&y) as f64;
            let mut h_hat = 0.0;
            for (k, d) in g.directed_dyads().iter().enumerate() {
                h_hat += pe[k] * pa[k] / g.degree(d.ego) as f64;
            }
            h_hat /= t;
            let h = true_homophily(&g, &y).unwrap();
            let (r1, r2) = bias_decomposition(&g, &y, &pe, &pa).unwrap();
            assert!((h_hat - (h - r1 - r2)).abs() <= 1e-10);
        }
    }

    #[test]
    fn zero_residuals_give_zero_terms() {
        let (g, y) = aab();
        let preds: Vec<f64> = g.directed_dyads().iter().map(|d| ind(y[d.ego])).collect();
        let alter: Vec<f64> = g.directed_dyads().iter().map(|d| ind(y[d.alter])).collect();
        assert_eq!(bias_decomposition(&g, &y, &preds, &alter).unwrap(), (0.0, 0.0));
    }
}
