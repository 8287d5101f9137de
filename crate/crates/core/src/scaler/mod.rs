//! One-dimensional Poisson scaling (Wordfish):
//! `y_ij ~ Poisson(λ_ij)`, `log λ_ij = α_i + ψ_j + θ_i β_j`.
//!
//! Estimation alternates conditional Newton maximizations over the document
//! blocks `(α_i, θ_i)` and the feature blocks `(ψ_j, β_j)`. After every round
//! the parameters are mapped back onto the identified scale: `α_0 = 0`, θ has
//! mean 0 and sample standard deviation 1. Both maps leave every linear
//! predictor unchanged, so the log-likelihood trace is non-decreasing.

mod block;
mod init;
mod uncertainty;

use std::collections::BTreeMap;
use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::CountMatrix;
use block::{rate, PairProblem};

pub use init::initialize;
pub use uncertainty::{
    analytic_se, bootstrap, feature_standard_errors, joint_standard_errors, percentile, JointStandardErrors,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingParams {
    /// Document fixed effects.
    pub alpha: Vec<f64>,
    /// Feature fixed effects.
    pub psi: Vec<f64>,
    /// Document positions.
    pub theta: Vec<f64>,
    /// Feature discrimination.
    pub beta: Vec<f64>,
}

impl ScalingParams {
    pub fn zeros(n_docs: usize, n_features: usize) -> Self {
        ScalingParams {
            alpha: vec![0.0; n_docs],
            psi: vec![0.0; n_features],
            theta: vec![0.0; n_docs],
            beta: vec![0.0; n_features],
        }
    }

    #[inline]
    pub fn eta(&self, doc: usize, feature: usize) -> f64 {
        self.alpha[doc] + self.psi[feature] + self.theta[doc] * self.beta[feature]
    }

    fn check(&self, n_docs: usize, n_features: usize) -> Result<()> {
        if self.alpha.len() != n_docs
            || self.theta.len() != n_docs
            || self.psi.len() != n_features
            || self.beta.len() != n_features
        {
            return Err(Error::Dimension(format!(
                "parameters sized for {}×{}, matrix is {n_docs}×{n_features}",
                self.alpha.len(),
                self.psi.len()
            )));
        }
        for (name, v) in [("alpha", &self.alpha), ("psi", &self.psi), ("theta", &self.theta), ("beta", &self.beta)] {
            if let Some(k) = v.iter().position(|x| !x.is_finite()) {
                return Err(Error::NonFinite(format!("{name}[{k}] = {}", v[k])));
            }
        }
        Ok(())
    }

    /// Maps the parameters onto the identified scale without changing any
    /// linear predictor: θ z-scored (location into ψ, scale into β), β
    /// centred (`β_j + b` is matched by `α_i − b(θ_i − θ_0)` and `ψ_j − bθ_0`),
    /// then `α_0 := 0` with the shift moved into ψ.
    fn identify(&mut self) -> Result<()> {
        let (mean, sd) = mean_sd(&self.theta);
        if !(sd.is_finite() && sd > 1e-300) {
            return Err(Error::Degenerate("document positions have zero variance".into()));
        }
        for t in &mut self.theta {
            *t = (*t - mean) / sd;
        }
        for (p, b) in self.psi.iter_mut().zip(self.beta.iter_mut()) {
            *p += mean * *b;
            *b *= sd;
        }

        let b = -self.beta.iter().sum::<f64>() / self.beta.len() as f64;
        let t0 = self.theta[0];
        for (a, t) in self.alpha.iter_mut().zip(&self.theta) {
            *a -= b * (t - t0);
        }
        for (p, beta) in self.psi.iter_mut().zip(self.beta.iter_mut()) {
            *beta += b;
            *p -= b * t0;
        }

        let shift = self.alpha[0];
        for a in &mut self.alpha {
            *a -= shift;
        }
        for p in &mut self.psi {
            *p += shift;
        }
        Ok(())
    }

    fn flip(&mut self) {
        for t in &mut self.theta {
            *t = -*t;
        }
        for b in &mut self.beta {
            *b = -*b;
        }
    }
}

/// Mean and sample (n − 1) standard deviation.
pub(crate) fn mean_sd(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    /// Relative log-likelihood change below which the fit has converged.
    pub tol: f64,
    /// Maximum number of alternation rounds.
    pub max_iter: usize,
    /// Document expected at the low end of the scale (default: first document).
    pub anchor_low: Option<String>,
    /// Document expected at the high end (default: last document).
    pub anchor_high: Option<String>,
    /// Bound on |α_i + ψ_j + θ_i β_j| inside exponentials.
    pub linear_predictor_clamp: f64,
    pub seed: u64,
    /// Fail when the log-likelihood ever decreases by more than 1e-9.
    pub debug_check: bool,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            tol: 1e-8,
            max_iter: 500,
            anchor_low: None,
            anchor_high: None,
            linear_predictor_clamp: 30.0,
            seed: 0,
            debug_check: false,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::Config(format!("tol must be > 0, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("max_iter must be ≥ 1".into()));
        }
        if !(self.linear_predictor_clamp > 0.0) {
            return Err(Error::Config("linear_predictor_clamp must be > 0".into()));
        }
        Ok(())
    }

    /// Resolves the anchor pair to row indices of `matrix`.
    pub fn anchors(&self, matrix: &CountMatrix) -> Result<(usize, usize)> {
        let find = |id: &str| {
            matrix
                .doc_ids()
                .iter()
                .position(|d| d == id)
                .ok_or_else(|| Error::UnknownAnchor(id.to_string()))
        };
        let low = match &self.anchor_low {
            Some(id) => find(id)?,
            None => 0,
        };
        let high = match &self.anchor_high {
            Some(id) => find(id)?,
            None => matrix.n_docs().saturating_sub(1),
        };
        if low == high {
            return Err(Error::Config(format!(
                "anchor documents must differ (both `{}`)",
                matrix.doc_ids()[low]
            )));
        }
        Ok((low, high))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UncertaintyMethod {
    Bootstrap,
    Analytic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyInfo {
    pub method: UncertaintyMethod,
    /// Replicates requested (bootstrap only).
    pub replicates: usize,
    /// Replicates that failed to refit and were skipped.
    pub failures: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingResult {
    pub doc_ids: Vec<String>,
    pub feature_labels: Vec<String>,
    pub params: ScalingParams,
    /// Log-likelihood after initialization and after every round.
    pub loglik_trace: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// Cells whose linear predictor exceeds the clamp at the solution.
    pub clamped_cells: usize,
    /// Pearson χ² / residual degrees of freedom.
    pub dispersion: f64,
    pub theta_se: Option<Vec<f64>>,
    pub theta_ci_low: Option<Vec<f64>>,
    pub theta_ci_high: Option<Vec<f64>>,
    pub uncertainty: Option<UncertaintyInfo>,
    pub config: FitConfig,
    pub runtime_secs: f64,
}

impl ScalingResult {
    pub fn final_loglik(&self) -> f64 {
        *self.loglik_trace.last().expect("trace is never empty")
    }

    /// `doc_id,theta,se,ci_low,ci_high,alpha` followed by one column per
    /// metadata key. Missing uncertainty leaves the cells empty.
    pub fn write_positions<W: Write>(
        &self,
        out: W,
        metadata: &BTreeMap<String, BTreeMap<String, String>>,
        keys: &[String],
    ) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        let mut header: Vec<String> = ["doc_id", "theta", "se", "ci_low", "ci_high", "alpha"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        header.extend(keys.iter().cloned());
        wtr.write_record(&header)?;
        let opt = |v: &Option<Vec<f64>>, i: usize| v.as_ref().map(|v| v[i].to_string()).unwrap_or_default();
        for (i, id) in self.doc_ids.iter().enumerate() {
            let mut rec = vec![
                id.clone(),
                self.params.theta[i].to_string(),
                opt(&self.theta_se, i),
                opt(&self.theta_ci_low, i),
                opt(&self.theta_ci_high, i),
                self.params.alpha[i].to_string(),
            ];
            let meta = metadata.get(id);
            rec.extend(
                keys.iter()
                    .map(|k| meta.and_then(|m| m.get(k)).cloned().unwrap_or_default()),
            );
            wtr.write_record(&rec)?;
        }
        wtr.flush().map_err(|e| Error::io("<positions>", e))?;
        Ok(())
    }

    /// `feature,beta,psi`.
    pub fn write_features<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["feature", "beta", "psi"])?;
        for (j, label) in self.feature_labels.iter().enumerate() {
            wtr.write_record([
                label.as_str(),
                self.params.beta[j].to_string().as_str(),
                self.params.psi[j].to_string().as_str(),
            ])?;
        }
        wtr.flush().map_err(|e| Error::io("<features>", e))?;
        Ok(())
    }
}

/// Dense row-major copy of the counts.
pub(crate) struct Dense {
    pub n: usize,
    pub m: usize,
    pub y: Vec<f64>,
}

impl Dense {
    pub fn new(matrix: &CountMatrix) -> Self {
        let (n, m) = (matrix.n_docs(), matrix.n_features());
        let mut y = vec![0.0; n * m];
        for i in 0..n {
            for &(j, c) in matrix.row(i) {
                y[i * m + j] = c as f64;
            }
        }
        Dense { n, m, y }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.y[i * self.m..(i + 1) * self.m]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n).map(|i| self.y[i * self.m + j]).collect()
    }

    pub fn loglik(&self, params: &ScalingParams, clamp: f64) -> f64 {
        (0..self.n)
            .into_par_iter()
            .map(|i| {
                let row = self.row(i);
                let mut s = 0.0;
                for (j, &y) in row.iter().enumerate() {
                    let eta = params.eta(i, j);
                    s += y * eta - rate(eta, clamp);
                }
                s
            })
            .collect::<Vec<f64>>()
            .iter()
            .sum()
    }

    fn doc_problem<'a>(&'a self, params: &'a ScalingParams, i: usize, clamp: f64) -> PairProblem<'a> {
        PairProblem {
            counts: self.row(i),
            offset: &params.psi,
            slope: &params.beta,
            clamp,
        }
    }
}

fn validate_matrix(matrix: &CountMatrix) -> Result<()> {
    if matrix.n_docs() < 2 {
        return Err(Error::TooFewDocuments);
    }
    if matrix.n_features() < 2 {
        return Err(Error::TooFewFeatures);
    }
    if let Some(i) = matrix.row_sums().iter().position(|&s| s == 0) {
        return Err(Error::Degenerate(format!("document `{}` has no counts", matrix.doc_ids()[i])));
    }
    if let Some(j) = matrix.col_sums().iter().position(|&s| s == 0) {
        return Err(Error::Degenerate(format!(
            "feature `{}` has no counts",
            matrix.feature_labels()[j]
        )));
    }
    Ok(())
}

/// `Σ_ij [y_ij η_ij − exp(η_ij)]`. The `log y_ij!` term is constant in the
/// parameters and omitted.
pub fn log_likelihood(matrix: &CountMatrix, params: &ScalingParams) -> Result<f64> {
    params.check(matrix.n_docs(), matrix.n_features())?;
    Ok(Dense::new(matrix).loglik(params, f64::INFINITY))
}

/// `∂LL/∂α_i` and `∂LL/∂θ_i`.
pub fn document_gradient(matrix: &CountMatrix, params: &ScalingParams, doc: usize) -> Result<[f64; 2]> {
    params.check(matrix.n_docs(), matrix.n_features())?;
    let dense = Dense::new(matrix);
    let d = dense.doc_problem(params, doc, f64::INFINITY).derivatives(params.alpha[doc], params.theta[doc]);
    Ok(d.gradient)
}

/// `∂LL/∂ψ_j` and `∂LL/∂β_j`.
pub fn feature_gradient(matrix: &CountMatrix, params: &ScalingParams, feature: usize) -> Result<[f64; 2]> {
    params.check(matrix.n_docs(), matrix.n_features())?;
    let dense = Dense::new(matrix);
    let column = dense.column(feature);
    let prob = PairProblem {
        counts: &column,
        offset: &params.alpha,
        slope: &params.theta,
        clamp: f64::INFINITY,
    };
    Ok(prob.derivatives(params.psi[feature], params.beta[feature]).gradient)
}

/// Fits the model from the default starting values.
pub fn fit(matrix: &CountMatrix, config: &FitConfig) -> Result<ScalingResult> {
    let start = initialize(matrix)?;
    fit_from(matrix, config, start)
}

/// Fits the model from explicit starting values (used for warm starts).
pub fn fit_from(matrix: &CountMatrix, config: &FitConfig, start: ScalingParams) -> Result<ScalingResult> {
    let started = Instant::now();
    config.validate()?;
    validate_matrix(matrix)?;
    start.check(matrix.n_docs(), matrix.n_features())?;
    let (anchor_low, anchor_high) = config.anchors(matrix)?;
    let dense = Dense::new(matrix);
    let clamp = config.linear_predictor_clamp;

    let mut params = start;
    params.identify()?;
    let mut trace = vec![dense.loglik(&params, clamp)];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < config.max_iter {
        iterations += 1;

        let doc_updates: Vec<(f64, f64)> = (0..dense.n)
            .into_par_iter()
            .map(|i| dense.doc_problem(&params, i, clamp).maximize((params.alpha[i], params.theta[i])))
            .collect();
        for (i, (a, t)) in doc_updates.into_iter().enumerate() {
            params.alpha[i] = a;
            params.theta[i] = t;
        }

        let feature_updates: Vec<(f64, f64)> = (0..dense.m)
            .into_par_iter()
            .map(|j| {
                let column = dense.column(j);
                PairProblem {
                    counts: &column,
                    offset: &params.alpha,
                    slope: &params.theta,
                    clamp,
                }
                .maximize((params.psi[j], params.beta[j]))
            })
            .collect();
        for (j, (p, b)) in feature_updates.into_iter().enumerate() {
            params.psi[j] = p;
            params.beta[j] = b;
        }

        params.identify()?;
        let ll = dense.loglik(&params, clamp);
        if !ll.is_finite() {
            return Err(Error::NonFinite(format!("log-likelihood {ll} at round {iterations}")));
        }
        let prev = *trace.last().unwrap();
        if config.debug_check && ll < prev - 1e-9 * prev.abs().max(1.0) {
            return Err(Error::Internal(format!(
                "log-likelihood decreased from {prev} to {ll} at round {iterations}"
            )));
        }
        trace.push(ll);
        if (ll - prev).abs() / prev.abs().max(f64::MIN_POSITIVE) < config.tol {
            converged = true;
            break;
        }
    }

    if params.theta[anchor_low] > params.theta[anchor_high] {
        params.flip();
    }

    let clamped_cells = (0..dense.n)
        .flat_map(|i| (0..dense.m).map(move |j| (i, j)))
        .filter(|&(i, j)| params.eta(i, j).abs() > clamp)
        .count();
    if clamped_cells > 0 {
        log::warn!("linear predictor clamped at ±{clamp} in {clamped_cells} cell(s)");
    }
    if !converged {
        log::warn!("scaling did not converge within {} rounds", config.max_iter);
    }

    Ok(ScalingResult {
        doc_ids: matrix.doc_ids().to_vec(),
        feature_labels: matrix.feature_labels().to_vec(),
        dispersion: dispersion(&dense, &params, clamp),
        params,
        loglik_trace: trace,
        converged,
        iterations,
        clamped_cells,
        theta_se: None,
        theta_ci_low: None,
        theta_ci_high: None,
        uncertainty: None,
        config: config.clone(),
        runtime_secs: started.elapsed().as_secs_f64(),
    })
}

/// Pearson χ² over residual degrees of freedom `nm − (2n + 2m − 4)`.
fn dispersion(dense: &Dense, params: &ScalingParams, clamp: f64) -> f64 {
    let mut chi2 = 0.0;
    for i in 0..dense.n {
        for (j, &y) in dense.row(i).iter().enumerate() {
            let lambda = rate(params.eta(i, j), clamp);
            chi2 += (y - lambda).powi(2) / lambda;
        }
    }
    let df = (dense.n * dense.m) as f64 - (2 * dense.n + 2 * dense.m) as f64 + 4.0;
    if df > 0.0 {
        chi2 / df
    } else {
        f64::NAN
    }
}
