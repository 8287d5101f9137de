#![allow(dead_code)]

use argmin::core::{CostFunction, Executor, Gradient};
use argmin::solver::linesearch::MoreThuenteLineSearch;
use argmin::solver::quasinewton::LBFGS;
use communityfish::features::CountMatrix;
use communityfish::graph::WordGraph;
use communityfish::scaler::ScalingParams;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Dense-matrix modularity: (1/2m) Σ_ij [A_ij − k_i k_j / 2m] δ(c_i, c_j).
pub fn naive_modularity(n: usize, edges: &[(usize, usize, f64)], labels: &[usize]) -> f64 {
    let mut a = vec![vec![0.0; n]; n];
    for &(i, j, w) in edges {
        a[i][j] += w;
        a[j][i] += w;
    }
    let k: Vec<f64> = a.iter().map(|row| row.iter().sum()).collect();
    let two_m: f64 = k.iter().sum();
    let mut q = 0.0;
    for i in 0..n {
        for j in 0..n {
            if labels[i] == labels[j] {
                q += a[i][j] - k[i] * k[j] / two_m;
            }
        }
    }
    q / two_m
}

pub fn graph(n: usize, edges: &[(usize, usize, f64)]) -> WordGraph {
    WordGraph::from_edges((0..n).map(|i| format!("w{i}")).collect(), edges).unwrap()
}

/// Disjoint cliques with unit weights.
pub fn cliques(sizes: &[usize]) -> (usize, Vec<(usize, usize, f64)>) {
    let mut edges = Vec::new();
    let mut offset = 0;
    for &s in sizes {
        for a in 0..s {
            for b in a + 1..s {
                edges.push((offset + a, offset + b, 1.0));
            }
        }
        offset += s;
    }
    (offset, edges)
}

/// Erdős–Rényi-style graph with random weights, always at least one edge.
pub fn random_graph(n: usize, p: f64, seed: u64) -> Vec<(usize, usize, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            if rng.random_bool(p) {
                edges.push((a, b, rng.random_range(1..=5) as f64));
            }
        }
    }
    if edges.is_empty() {
        edges.push((0, 1, 1.0));
    }
    edges
}

pub fn dense_f64(m: &CountMatrix) -> Vec<Vec<f64>> {
    m.to_dense()
        .iter()
        .map(|r| r.iter().map(|&c| c as f64).collect())
        .collect()
}

/// Σ_ij y_ij η_ij − exp(η_ij), written out directly.
pub fn direct_loglik(y: &[Vec<f64>], p: &ScalingParams) -> f64 {
    let mut ll = 0.0;
    for (i, row) in y.iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            let eta = p.alpha[i] + p.psi[j] + p.theta[i] * p.beta[j];
            ll += c * eta - eta.exp();
        }
    }
    ll
}

/// Central finite difference of `f` at `x` along coordinate `k`.
pub fn central_difference(f: impl Fn(&[f64]) -> f64, x: &[f64], k: usize, h: f64) -> f64 {
    let mut up = x.to_vec();
    let mut down = x.to_vec();
    up[k] += h;
    down[k] -= h;
    (f(&up) - f(&down)) / (2.0 * h)
}

/// Negative Poisson log-likelihood over all parameters with α_0 pinned to 0.
/// Layout: `[α_1..α_{n-1}, ψ_0..ψ_{m-1}, θ_0..θ_{n-1}, β_0..β_{m-1}]`.
struct FullProblem {
    y: Vec<Vec<f64>>,
}

impl FullProblem {
    fn split(&self, x: &[f64]) -> ScalingParams {
        let (n, m) = (self.y.len(), self.y[0].len());
        let mut alpha = vec![0.0];
        alpha.extend_from_slice(&x[..n - 1]);
        ScalingParams {
            alpha,
            psi: x[n - 1..n - 1 + m].to_vec(),
            theta: x[n - 1 + m..2 * n - 1 + m].to_vec(),
            beta: x[2 * n - 1 + m..].to_vec(),
        }
    }
}

impl CostFunction for FullProblem {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, x: &Vec<f64>) -> Result<f64, argmin::core::Error> {
        Ok(-direct_loglik(&self.y, &self.split(x)))
    }
}

impl Gradient for FullProblem {
    type Param = Vec<f64>;
    type Gradient = Vec<f64>;

    fn gradient(&self, x: &Vec<f64>) -> Result<Vec<f64>, argmin::core::Error> {
        let (n, m) = (self.y.len(), self.y[0].len());
        let p = self.split(x);
        let mut g = vec![0.0; x.len()];
        for i in 0..n {
            for j in 0..m {
                let r = self.y[i][j] - (p.alpha[i] + p.psi[j] + p.theta[i] * p.beta[j]).exp();
                if i > 0 {
                    g[i - 1] -= r;
                }
                g[n - 1 + j] -= r;
                g[n - 1 + m + i] -= r * p.beta[j];
                g[2 * n - 1 + m + j] -= r * p.theta[i];
            }
        }
        Ok(g)
    }
}

/// Best log-likelihood found by L-BFGS from several deterministic random
/// starts. The likelihood is invariant to the affine maps used for
/// identification, so the unconstrained optimum is also the constrained one.
pub fn lbfgs_best_loglik(y: &[Vec<f64>], starts: usize, seed: u64) -> f64 {
    let (n, m) = (y.len(), y[0].len());
    let dim = 2 * n - 1 + 2 * m;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = f64::NEG_INFINITY;
    for _ in 0..starts {
        let x0: Vec<f64> = (0..dim).map(|_| rng.random_range(-0.5..0.5)).collect();
        let solver = LBFGS::new(MoreThuenteLineSearch::new(), 10)
            .with_tolerance_grad(1e-10)
            .unwrap()
            .with_tolerance_cost(1e-15)
            .unwrap();
        let problem = FullProblem { y: y.to_vec() };
        if let Ok(res) = Executor::new(problem, solver)
            .configure(|state| state.param(x0).max_iters(10_000))
            .run()
        {
            best = best.max(-res.state.best_cost);
        }
    }
    best
}

pub fn mean_sd(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
