use nalgebra::DMatrix;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;

use super::block::rate;
use super::{fit_from, mean_sd, Dense, ScalingParams, ScalingResult, UncertaintyInfo, UncertaintyMethod};
use crate::error::{Error, Result};
use crate::features::CountMatrix;

/// Replicates may fail up to this share before the bootstrap gives up.
const MAX_FAILURE_RATIO: f64 = 0.2;

/// Empirical quantile with linear interpolation between order statistics.
/// `sorted` must be ascending and non-empty.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let (ma, _) = mean_sd(a);
    let (mb, _) = mean_sd(b);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    sab / (saa * sbb).sqrt()
}

/// Parametric bootstrap of the document positions.
///
/// Each replicate draws `y*_ij ~ Poisson(exp(η̂_ij))` from its own ChaCha
/// stream (`seed`, replicate index), so results do not depend on scheduling.
/// Features that come out all-zero in a replicate are left out of that
/// refit; a replicate with an all-zero document, or whose refit errors,
/// counts as a failure. Refits are warm-started from `result`, and each
/// replicate's θ* is sign-aligned to θ̂ before computing the standard
/// deviation and the 2.5/97.5 percentiles per document.
pub fn bootstrap(
    matrix: &CountMatrix,
    result: &ScalingResult,
    replicates: usize,
    seed: u64,
) -> Result<ScalingResult> {
    if replicates == 0 {
        return Err(Error::Config("bootstrap needs at least one replicate".into()));
    }
    if matrix.doc_ids() != result.doc_ids.as_slice() || matrix.feature_labels() != result.feature_labels.as_slice() {
        return Err(Error::Dimension("result was fitted on a different matrix".into()));
    }
    let (n, m) = (matrix.n_docs(), matrix.n_features());
    let clamp = result.config.linear_predictor_clamp;
    let fitted = &result.params;
    let rates: Vec<f64> = (0..n)
        .flat_map(|i| (0..m).map(move |j| rate(fitted.eta(i, j), clamp)))
        .collect();

    let draws: Vec<Option<Vec<f64>>> = (0..replicates)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b as u64);
            let counts: Vec<u64> = rates
                .iter()
                .map(|&lambda| Poisson::new(lambda).map(|d| d.sample(&mut rng) as u64).unwrap_or(0))
                .collect();
            refit_replicate(matrix, result, &counts).ok()
        })
        .collect();

    let failures = draws.iter().filter(|d| d.is_none()).count();
    if failures as f64 > MAX_FAILURE_RATIO * replicates as f64 {
        return Err(Error::BootstrapFailures {
            failed: failures,
            total: replicates,
        });
    }
    if failures > 0 {
        log::warn!("bootstrap: {failures} of {replicates} replicates failed and were skipped");
    }
    let thetas: Vec<Vec<f64>> = draws.into_iter().flatten().collect();

    let mut se = Vec::with_capacity(n);
    let mut low = Vec::with_capacity(n);
    let mut high = Vec::with_capacity(n);
    for i in 0..n {
        let mut values: Vec<f64> = thetas.iter().map(|t| t[i]).collect();
        se.push(if values.len() > 1 { mean_sd(&values).1 } else { 0.0 });
        values.sort_by(f64::total_cmp);
        low.push(percentile(&values, 0.025));
        high.push(percentile(&values, 0.975));
    }

    let mut out = result.clone();
    out.theta_se = Some(se);
    out.theta_ci_low = Some(low);
    out.theta_ci_high = Some(high);
    out.uncertainty = Some(UncertaintyInfo {
        method: UncertaintyMethod::Bootstrap,
        replicates,
        failures,
        seed,
    });
    Ok(out)
}

fn refit_replicate(matrix: &CountMatrix, result: &ScalingResult, counts: &[u64]) -> Result<Vec<f64>> {
    let (n, m) = (matrix.n_docs(), matrix.n_features());
    let mut col_sums = vec![0u64; m];
    let mut rows = Vec::with_capacity(n);
    for i in 0..n {
        let row: Vec<(usize, u64)> = (0..m)
            .map(|j| (j, counts[i * m + j]))
            .filter(|&(_, c)| c > 0)
            .collect();
        if row.is_empty() {
            return Err(Error::Degenerate(format!("replicate document `{}` is empty", matrix.doc_ids()[i])));
        }
        for &(j, c) in &row {
            col_sums[j] += c;
        }
        rows.push(row);
    }
    let keep: Vec<usize> = (0..m).filter(|&j| col_sums[j] > 0).collect();
    let simulated = CountMatrix::new(matrix.doc_ids().to_vec(), matrix.feature_labels().to_vec(), rows)?
        .select_columns(&keep);
    let start = ScalingParams {
        alpha: result.params.alpha.clone(),
        theta: result.params.theta.clone(),
        psi: keep.iter().map(|&j| result.params.psi[j]).collect(),
        beta: keep.iter().map(|&j| result.params.beta[j]).collect(),
    };
    let refit = fit_from(&simulated, &result.config, start)?;
    let mut theta = refit.params.theta;
    if pearson(&theta, &result.params.theta) < 0.0 {
        for t in &mut theta {
            *t = -*t;
        }
    }
    Ok(theta)
}

/// Per-document standard errors from the observed information of the
/// `(α_i, θ_i)` block, holding `(ψ, β)` fixed. Intervals are θ ± 1.96·se.
pub fn analytic_se(matrix: &CountMatrix, result: &ScalingResult) -> Result<ScalingResult> {
    result.params.check(matrix.n_docs(), matrix.n_features())?;
    let clamp = result.config.linear_predictor_clamp;
    let p = &result.params;
    let se: Vec<f64> = (0..matrix.n_docs())
        .map(|i| {
            let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
            for j in 0..matrix.n_features() {
                let lambda = rate(p.eta(i, j), clamp);
                a += lambda;
                b += lambda * p.beta[j];
                c += lambda * p.beta[j] * p.beta[j];
            }
            (a / (a * c - b * b)).sqrt()
        })
        .collect();
    let mut out = result.clone();
    out.theta_ci_low = Some(p.theta.iter().zip(&se).map(|(t, s)| t - 1.96 * s).collect());
    out.theta_ci_high = Some(p.theta.iter().zip(&se).map(|(t, s)| t + 1.96 * s).collect());
    out.theta_se = Some(se);
    out.uncertainty = Some(UncertaintyInfo {
        method: UncertaintyMethod::Analytic,
        replicates: 0,
        failures: 0,
        seed: 0,
    });
    Ok(out)
}

/// `(se(ψ_j), se(β_j))` from the observed information of each feature block,
/// holding `(α, θ)` fixed.
pub fn feature_standard_errors(matrix: &CountMatrix, params: &ScalingParams, clamp: f64) -> Result<Vec<(f64, f64)>> {
    params.check(matrix.n_docs(), matrix.n_features())?;
    let dense = Dense::new(matrix);
    Ok((0..dense.m)
        .map(|j| {
            let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
            for i in 0..dense.n {
                let lambda = rate(params.eta(i, j), clamp);
                a += lambda;
                b += lambda * params.theta[i];
                c += lambda * params.theta[i] * params.theta[i];
            }
            let det = a * c - b * b;
            ((c / det).sqrt(), (a / det).sqrt())
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointStandardErrors {
    pub alpha: Vec<f64>,
    pub psi: Vec<f64>,
    pub theta: Vec<f64>,
    pub beta: Vec<f64>,
}

/// Standard errors of every parameter from the full observed information,
/// bordered by the identification constraints (`α_0 = 0`, `Σθ = 0`,
/// `Σθ² = n − 1`, `Σβ = 0`). Unlike [`feature_standard_errors`] these account
/// for θ being estimated. Cost is cubic in `2n + 2m`.
pub fn joint_standard_errors(matrix: &CountMatrix, params: &ScalingParams, clamp: f64) -> Result<JointStandardErrors> {
    params.check(matrix.n_docs(), matrix.n_features())?;
    let dense = Dense::new(matrix);
    let (n, m) = (dense.n, dense.m);
    let d = 2 * n + 2 * m;
    let (psi_at, theta_at, beta_at) = (n, n + m, 2 * n + m);
    let mut h = DMatrix::<f64>::zeros(d + 4, d + 4);
    let mut add = |a: usize, b: usize, v: f64| {
        h[(a, b)] += v;
        if a != b {
            h[(b, a)] += v;
        }
    };
    for i in 0..n {
        for (j, &y) in dense.row(i).iter().enumerate() {
            let lambda = rate(params.eta(i, j), clamp);
            let (t, b) = (params.theta[i], params.beta[j]);
            let (ai, pj, ti, bj) = (i, psi_at + j, theta_at + i, beta_at + j);
            add(ai, ai, lambda);
            add(ai, pj, lambda);
            add(ai, ti, lambda * b);
            add(ai, bj, lambda * t);
            add(pj, pj, lambda);
            add(pj, ti, lambda * b);
            add(pj, bj, lambda * t);
            add(ti, ti, lambda * b * b);
            add(ti, bj, lambda * t * b - (y - lambda));
            add(bj, bj, lambda * t * t);
        }
    }
    let mut border = |row: usize, col: usize, v: f64| {
        h[(d + row, col)] = v;
        h[(col, d + row)] = v;
    };
    border(0, 0, 1.0);
    for i in 0..n {
        border(1, theta_at + i, 1.0);
        border(2, theta_at + i, params.theta[i]);
    }
    for j in 0..m {
        border(3, beta_at + j, 1.0);
    }
    let cov = h
        .try_inverse()
        .ok_or_else(|| Error::Degenerate("observed information is singular".into()))?;
    let se = |k: usize| cov[(k, k)].max(0.0).sqrt();
    Ok(JointStandardErrors {
        alpha: (0..n).map(se).collect(),
        psi: (0..m).map(|j| se(psi_at + j)).collect(),
        theta: (0..n).map(|i| se(theta_at + i)).collect(),
        beta: (0..m).map(|j| se(beta_at + j)).collect(),
    })
}
