//! Binary logistic regression fitted by iteratively reweighted least squares.
//!
//! The unpenalized fit satisfies the score equations `X' (y - p) = 0`, which
//! is what makes weighted residual sums vanish for any feature included in the
//! design. A tiny ridge penalty is used only as a flagged fallback when the
//! unpenalized fit separates or fails to converge.

use std::io::Write;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::simgen::inv_logit;

pub const MAX_ITERATIONS: usize = 100;
pub const TOLERANCE: f64 = 1e-8;
pub const RIDGE_LAMBDA: f64 = 1e-4;
/// Coefficients beyond this magnitude are treated as separation.
pub const SEPARATION_BOUND: f64 = 30.0;
const MAX_HALVINGS: usize = 20;

/// Identifies the unit a design row describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKey {
    Node(usize),
    Dyad { ego: usize, alter: usize },
}

/// Row-major design with a leading intercept column.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    values: Vec<f64>,
    col_names: Vec<String>,
    row_keys: Vec<RowKey>,
}

impl DesignMatrix {
    pub fn new(col_names: Vec<String>) -> Self {
        Self { values: Vec::new(), col_names, row_keys: Vec::new() }
    }

    pub fn with_capacity(col_names: Vec<String>, rows: usize) -> Self {
        let width = col_names.len();
        Self { values: Vec::with_capacity(rows * width), col_names, row_keys: Vec::with_capacity(rows) }
    }

    /// Appends a row; `row` must have one entry per column, intercept included.
    pub fn push_row(&mut self, key: RowKey, row: &[f64]) -> Result<()> {
        if row.len() != self.ncols() {
            return Err(Error::ColumnMismatch { expected: self.ncols(), found: row.len() });
        }
        if let Some(bad) = row.iter().find(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("non-finite design entry {bad}")));
        }
        self.values.extend_from_slice(row);
        self.row_keys.push(key);
        Ok(())
    }

    pub fn nrows(&self) -> usize {
        self.row_keys.len()
    }

    pub fn ncols(&self) -> usize {
        self.col_names.len()
    }

    pub fn col_names(&self) -> &[String] {
        &self.col_names
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let w = self.ncols();
        &self.values[r * w..(r + 1) * w]
    }

    pub fn row_key(&self, r: usize) -> RowKey {
        self.row_keys[r]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.ncols().max(1))
    }

    /// A new design holding the selected rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let mut out = Self::with_capacity(self.col_names.clone(), rows.len());
        for &r in rows {
            out.values.extend_from_slice(self.row(r));
            out.row_keys.push(self.row_keys[r]);
        }
        out
    }

    /// Appends a column with the given values.
    pub fn with_column(&self, name: &str, column: &[f64]) -> Result<Self> {
        if column.len() != self.nrows() {
            return Err(Error::InvalidParameter(format!(
                "column `{name}` has {} values for {} rows",
                column.len(),
                self.nrows()
            )));
        }
        let mut names = self.col_names.clone();
        names.push(name.to_string());
        let mut out = Self::with_capacity(names, self.nrows());
        for (r, &extra) in column.iter().enumerate() {
            out.values.extend_from_slice(self.row(r));
            out.values.push(extra);
            out.row_keys.push(self.row_keys[r]);
        }
        Ok(out)
    }

    fn linear_predictor(&self, beta: &[f64]) -> Vec<f64> {
        self.rows().take(self.nrows()).map(|row| row.iter().zip(beta).map(|(x, b)| x * b).sum()).collect()
    }
}

/// Result of a logistic fit on a training design.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedModel {
    pub col_names: Vec<String>,
    pub beta: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// Ridge penalty used by the accepted fit, if any.
    pub ridge_lambda: Option<f64>,
    /// Fitted probabilities on the training rows.
    pub fitted: Vec<f64>,
    /// `label - fitted` on the training rows.
    pub residual: Vec<f64>,
    /// Penalized log-likelihood after each accepted iteration.
    pub loglik_trace: Vec<f64>,
    /// Set when the model is a constant-probability stand-in.
    pub constant_rate: Option<f64>,
}

impl FittedModel {
    pub fn ridge_used(&self) -> bool {
        self.ridge_lambda.is_some()
    }

    /// A model that predicts `rate` everywhere, used when the training labels
    /// hold a single class.
    pub fn constant(col_names: Vec<String>, labels: &[bool]) -> Self {
        let n = labels.len();
        let rate = labels.iter().filter(|&&y| y).count() as f64 / n.max(1) as f64;
        Self {
            beta: vec![0.0; col_names.len()],
            col_names,
            converged: false,
            iterations: 0,
            ridge_lambda: None,
            fitted: vec![rate; n],
            residual: labels.iter().map(|&y| f64::from(u8::from(y)) - rate).collect(),
            loglik_trace: Vec::new(),
            constant_rate: Some(rate),
        }
    }

    /// Writes `feature,beta` rows.
    pub fn write_coefficients_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
        w.write_record(["feature", "beta"])?;
        for (name, b) in self.col_names.iter().zip(&self.beta) {
            w.write_record([name.as_str(), &b.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

fn penalized_loglik(eta: &[f64], y: &[f64], beta: &[f64], lambda: f64) -> f64 {
    let ll: f64 = eta.iter().zip(y).map(|(&e, &yi)| -yi * softplus(-e) - (1.0 - yi) * softplus(e)).sum();
    ll - 0.5 * lambda * beta.iter().skip(1).map(|b| b * b).sum::<f64>()
}

struct IrlsOutcome {
    beta: Vec<f64>,
    converged: bool,
    iterations: usize,
    trace: Vec<f64>,
}

fn solve_newton(h: DMatrix<f64>, g: DVector<f64>) -> Option<DVector<f64>> {
    if let Some(ch) = h.clone().cholesky() {
        return Some(ch.solve(&g));
    }
    h.lu().solve(&g)
}

fn irls(x: &DesignMatrix, y: &[f64], lambda: f64) -> Result<IrlsOutcome> {
    let p = x.ncols();
    let mut beta = vec![0.0; p];
    let mut eta = vec![0.0; x.nrows()];
    let mut ll = penalized_loglik(&eta, y, &beta, lambda);
    let mut trace = vec![ll];

    for iter in 1..=MAX_ITERATIONS {
        let mut grad = DVector::zeros(p);
        let mut hess = DMatrix::zeros(p, p);
        for (r, row) in x.rows().enumerate() {
            let mu = inv_logit(eta[r]);
            let w = mu * (1.0 - mu);
            let resid = y[r] - mu;
            for a in 0..p {
                grad[a] += row[a] * resid;
                let wa = w * row[a];
                for b in a..p {
                    hess[(a, b)] += wa * row[b];
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                hess[(a, b)] = hess[(b, a)];
            }
        }
        for c in 1..p {
            grad[c] -= lambda * beta[c];
            hess[(c, c)] += lambda;
        }

        let step = solve_newton(hess, grad)
            .filter(|s| s.iter().all(|v| v.is_finite()))
            .ok_or_else(|| Error::Numerical("singular weighted normal equations".into()))?;

        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let candidate: Vec<f64> = beta.iter().zip(step.iter()).map(|(b, s)| b + scale * s).collect();
            let cand_eta = x.linear_predictor(&candidate);
            let cand_ll = penalized_loglik(&cand_eta, y, &candidate, lambda);
            if cand_ll.is_finite() && cand_ll >= ll - 1e-12 * ll.abs().max(1.0) {
                accepted = Some((candidate, cand_eta, cand_ll));
                break;
            }
            scale *= 0.5;
        }
        let Some((next, next_eta, next_ll)) = accepted else {
            return Ok(IrlsOutcome { beta, converged: false, iterations: iter, trace });
        };
        let max_change = next.iter().zip(&beta).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        beta = next;
        eta = next_eta;
        // Log-likelihood is nondecreasing up to rounding.
        ll = next_ll.max(ll);
        trace.push(ll);

        if beta.iter().any(|b| b.abs() > SEPARATION_BOUND) && lambda == 0.0 {
            return Ok(IrlsOutcome { beta, converged: false, iterations: iter, trace });
        }
        if max_change < TOLERANCE {
            return Ok(IrlsOutcome { beta, converged: true, iterations: iter, trace });
        }
    }
    Ok(IrlsOutcome { beta, converged: false, iterations: MAX_ITERATIONS, trace })
}

/// Maximum-likelihood logistic regression.
///
/// Falls back to a ridge fit (`lambda = 1e-4`, intercept unpenalized) when the
/// unpenalized fit does not converge within 100 iterations or a coefficient
/// exceeds 30 in magnitude.
pub fn fit_logistic(x: &DesignMatrix, labels: &[bool]) -> Result<FittedModel> {
    if labels.len() != x.nrows() {
        return Err(Error::InvalidParameter(format!("{} labels for {} design rows", labels.len(), x.nrows())));
    }
    if x.nrows() == 0 {
        return Err(Error::EmptyTrainingSet("logistic fit".into()));
    }
    let positives = labels.iter().filter(|&&y| y).count();
    if positives == 0 || positives == labels.len() {
        return Err(Error::DegenerateLabels(format!("{positives} positives in {} rows", labels.len())));
    }
    if x.nrows() < x.ncols() {
        return Err(Error::InvalidParameter(format!("{} rows for {} columns", x.nrows(), x.ncols())));
    }
    let y: Vec<f64> = labels.iter().map(|&b| f64::from(u8::from(b))).collect();

    let plain = irls(x, &y, 0.0);
    let separated = |o: &IrlsOutcome| o.beta.iter().any(|b| b.abs() > SEPARATION_BOUND);
    let (outcome, ridge_lambda) = match plain {
        Ok(o) if o.converged && !separated(&o) => (o, None),
        _ => (irls(x, &y, RIDGE_LAMBDA)?, Some(RIDGE_LAMBDA)),
    };

    let fitted: Vec<f64> = x.linear_predictor(&outcome.beta).into_iter().map(inv_logit).collect();
    let residual = y.iter().zip(&fitted).map(|(y, p)| y - p).collect();
    Ok(FittedModel {
        col_names: x.col_names().to_vec(),
        beta: outcome.beta,
        converged: outcome.converged,
        iterations: outcome.iterations,
        ridge_lambda,
        fitted,
        residual,
        loglik_trace: outcome.trace,
        constant_rate: None,
    })
}

/// Inverse-logit of the linear predictor for every row of `x`.
pub fn predict(model: &FittedModel, x: &DesignMatrix) -> Result<Vec<f64>> {
    if x.ncols() != model.beta.len() {
        return Err(Error::ColumnMismatch { expected: model.beta.len(), found: x.ncols() });
    }
    if let Some(rate) = model.constant_rate {
        return Ok(vec![rate; x.nrows()]);
    }
    Ok(x.linear_predictor(&model.beta).into_iter().map(inv_logit).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn design(cols: &[&str], rows: &[Vec<f64>]) -> DesignMatrix {
        let mut d = DesignMatrix::new(cols.iter().map(|s| s.to_string()).collect());
        for (i, r) in rows.iter().enumerate() {
            d.push_row(RowKey::Node(i), r).unwrap();
        }
        d
    }

    fn simulate(n: usize, beta: &[f64], seed: u64) -> (DesignMatrix, Vec<bool>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let mut row = vec![1.0];
            row.extend((1..beta.len()).map(|_| rng.sample::<f64, _>(StandardNormal)));
            let eta: f64 = row.iter().zip(beta).map(|(a, b)| a * b).sum();
            labels.push(rng.random::<f64>() < inv_logit(eta));
            rows.push(row);
        }
        let names: Vec<String> = (0..beta.len()).map(|c| format!("x{c}")).collect();
        let names: Vec<&str> = names.iter().map(String::as_str).collect();
        (design(&names, &rows), labels)
    }

    fn assert_score_equations(x: &DesignMatrix, m: &FittedModel) {
        for c in 0..x.ncols() {
            let score: f64 = x.rows().zip(&m.residual).map(|(row, e)| row[c] * e).sum();
            assert!(score.abs() <= 1e-6 * x.nrows() as f64, "column {c}: {score}");
        }
    }

    #[test]
    fn intercept_only_is_log_odds() {
        let labels: Vec<bool> = (0..40).map(|i| i % 4 == 0).collect();
        let x = design(&["intercept"], &vec![vec![1.0]; 40]);
        let m = fit_logistic(&x, &labels).unwrap();
        assert!(m.converged && !m.ridge_used());
        assert_abs_diff_eq!(m.beta[0], (0.25f64 / 0.75).ln(), epsilon = 1e-9);
    }

    #[test]
    fn symmetric_data_has_zero_intercept() {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (xv, yv) in [(0.3, true), (1.2, true), (-0.5, false), (2.0, false), (0.1, true)] {
            rows.push(vec![1.0, xv]);
            labels.push(yv);
            rows.push(vec![1.0, -xv]);
            labels.push(!yv);
        }
        let m = fit_logistic(&design(&["intercept", "x"], &rows), &labels).unwrap();
        assert_abs_diff_eq!(m.beta[0], 0.0, epsilon = 1e-6);
    }

    #[test]
    fn recovers_generating_coefficients() {
        let (x, y) = simulate(10_000, &[0.0, 2.0], 3);
        let m = fit_logistic(&x, &y).unwrap();
        assert!(m.converged && !m.ridge_used());
        assert!((m.beta[0] - 0.0).abs() < 0.1 && (m.beta[1] - 2.0).abs() < 0.1, "{:?}", m.beta);
        assert_score_equations(&x, &m);
    }

    #[test]
    fn score_equations_and_monotone_likelihood() {
        for seed in 0..20 {
            let (x, y) = simulate(500, &[-0.5, 1.0, -0.7, 0.3], seed);
            let m = fit_logistic(&x, &y).unwrap();
            assert!(m.converged);
            assert_score_equations(&x, &m);
            assert!(m.loglik_trace.windows(2).all(|w| w[1] >= w[0]));
            assert!(m.fitted.iter().all(|&p| p > 0.0 && p < 1.0));
        }
    }

    #[test]
    fn inverse_feature_weighted_residuals_vanish() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for _ in 0..800 {
            let d = rng.random_range(1..40) as f64;
            let x: f64 = rng.sample(StandardNormal);
            labels.push(rng.random::<f64>() < inv_logit(x + 0.02 * d));
            rows.push(vec![1.0, x, 1.0 / d, d]);
        }
        let x = design(&["intercept", "x", "inv_degree", "degree"], &rows);
        let m = fit_logistic(&x, &labels).unwrap();
        let weighted: f64 = rows.iter().zip(&m.residual).map(|(r, e)| r[2] * e).sum();
        assert!(weighted.abs() < 1e-6 * rows.len() as f64);
    }

    #[test]
    fn separation_triggers_ridge() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![1.0, i as f64 - 9.5]).collect();
        let labels: Vec<bool> = (0..20).map(|i| i >= 10).collect();
        let m = fit_logistic(&design(&["intercept", "x"], &rows), &labels).unwrap();
        assert_eq!(m.ridge_lambda, Some(RIDGE_LAMBDA));
        // extreme rows saturate in f64; the rows nearest the boundary do not
        assert!(m.fitted.iter().all(|&p| (0.0..=1.0).contains(&p)));
        assert!(m.fitted[9] > 0.0 && m.fitted[10] < 1.0 && m.fitted[9] < m.fitted[10]);
    }

    #[test]
    fn degenerate_inputs() {
        let x = design(&["intercept"], &[vec![1.0], vec![1.0]]);
        assert!(matches!(fit_logistic(&x, &[true, true]), Err(Error::DegenerateLabels(_))));
        let empty = DesignMatrix::new(vec!["intercept".into()]);
        assert!(matches!(fit_logistic(&empty, &[]), Err(Error::EmptyTrainingSet(_))));
        let collinear = design(
            &["intercept", "a", "b"],
            &[vec![1.0, 1.0, 2.0], vec![1.0, 2.0, 4.0], vec![1.0, 3.0, 6.0], vec![1.0, 4.0, 8.0]],
        );
        let r = fit_logistic(&collinear, &[true, false, true, false]);
        // singular even after the ridge rescue is reported as numerical trouble, never a panic
        if let Err(e) = r {
            assert!(matches!(e, Error::Numerical(_)));
        }
    }

    #[test]
    fn prediction_contracts() {
        let x = design(&["intercept", "x"], &[vec![1.0, 1.0], vec![1.0, -3.0]]);
        let zero =
            FittedModel { beta: vec![0.0, 0.0], ..FittedModel::constant(x.col_names().to_vec(), &[true, false]) };
        let zero = FittedModel { constant_rate: None, ..zero };
        assert_eq!(predict(&zero, &x).unwrap(), vec![0.5, 0.5]);
        let two = FittedModel { beta: vec![0.0, 2.0], ..zero.clone() };
        assert_abs_diff_eq!(predict(&two, &x).unwrap()[0], 0.8808, epsilon = 1e-4);
        let narrow = design(&["intercept"], &[vec![1.0]]);
        assert!(matches!(predict(&two, &narrow), Err(Error::ColumnMismatch { .. })));

        let (tx, ty) = simulate(300, &[0.2, -1.0], 8);
        let m = fit_logistic(&tx, &ty).unwrap();
        let again = predict(&m, &tx).unwrap();
        for (a, b) in again.iter().zip(&m.fitted) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
        assert_eq!(fit_logistic(&tx, &ty).unwrap(), m);
    }

    #[test]
    fn constant_model_predicts_rate() {
        let m = FittedModel::constant(vec!["intercept".into()], &[false, false, false]);
        let x = design(&["intercept"], &vec![vec![1.0]; 4]);
        assert_eq!(predict(&m, &x).unwrap(), vec![0.0; 4]);
    }

    #[test]
    fn coefficient_csv() {
        let m = FittedModel {
            beta: vec![0.5, -1.0],
            ..FittedModel::constant(vec!["intercept".into(), "x".into()], &[true])
        };
        let mut buf = Vec::new();
        m.write_coefficients_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "feature,beta\nintercept,0.5\nx,-1\n");
    }
}
