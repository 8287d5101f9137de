mod common;

use communityfish::features::{unigram_dtm, CountMatrix};
use communityfish::graph::{leiden, louvain, modularity, ClusterConfig, Partition};
use communityfish::corpus::{Corpus, Document};
use communityfish::scaler::{
    document_gradient, feature_gradient, fit, joint_standard_errors, log_likelihood, FitConfig, ScalingParams,
};
use communityfish::synth::{generate_matrix, spearman, SyntheticSpec};
use common::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn edges_strategy() -> impl Strategy<Value = (usize, Vec<(usize, usize, f64)>)> {
    (3usize..12).prop_flat_map(|n| {
        let pairs = proptest::collection::vec((0..n, 0..n, 1u32..6), 1..30);
        (Just(n), pairs)
    })
    .prop_filter_map("needs a non-loop edge", |(n, raw)| {
        let edges: Vec<(usize, usize, f64)> = raw
            .into_iter()
            .filter(|&(a, b, _)| a != b)
            .map(|(a, b, w)| (a, b, w as f64))
            .collect();
        (!edges.is_empty()).then_some((n, edges))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn modularity_matches_dense_formula((n, edges) in edges_strategy(), labels in proptest::collection::vec(0usize..4, 12)) {
        let g = graph(n, &edges);
        let labels = &labels[..n];
        let q = modularity(&g, &Partition::from_assignment(labels)).unwrap();
        prop_assert!((q - naive_modularity(n, &edges, labels)).abs() < 1e-12);
    }

    #[test]
    fn singleton_modularity_is_minus_sum_of_squared_shares((n, edges) in edges_strategy()) {
        let g = graph(n, &edges);
        let two_m: f64 = 2.0 * edges.iter().map(|e| e.2).sum::<f64>();
        let mut k = vec![0.0; n];
        for &(a, b, w) in &edges {
            k[a] += w;
            k[b] += w;
        }
        let expected: f64 = -k.iter().map(|x| (x / two_m).powi(2)).sum::<f64>();
        let q = modularity(&g, &Partition::singletons(n)).unwrap();
        prop_assert!((q - expected).abs() < 1e-12);
    }

    #[test]
    fn louvain_improves_on_singletons_and_tracks_q((n, edges) in edges_strategy(), seed in 0u64..1000) {
        let g = graph(n, &edges);
        let c = louvain(&g, ClusterConfig::seeded(seed)).unwrap();
        let singles = modularity(&g, &Partition::singletons(n)).unwrap();
        prop_assert!(c.modularity >= singles - 1e-12);
        prop_assert!((c.modularity - c.tracked_modularity).abs() < 1e-10);
        prop_assert!((c.modularity - naive_modularity(n, &edges, c.partition.assignment())).abs() < 1e-10);
        prop_assert!(c.move_gains.iter().all(|&d| d > 0.0));
    }

    #[test]
    fn louvain_is_seed_deterministic((n, edges) in edges_strategy(), seed in 0u64..1000) {
        let g = graph(n, &edges);
        let a = louvain(&g, ClusterConfig::seeded(seed)).unwrap();
        let b = louvain(&g, ClusterConfig::seeded(seed)).unwrap();
        prop_assert_eq!(a.partition, b.partition);
        prop_assert_eq!(a.modularity.to_bits(), b.modularity.to_bits());
    }

    #[test]
    fn louvain_debug_mode_agrees((n, edges) in edges_strategy(), seed in 0u64..100) {
        let g = graph(n, &edges);
        let plain = louvain(&g, ClusterConfig::seeded(seed)).unwrap();
        let checked = louvain(&g, ClusterConfig { seed, debug_check: true }).unwrap();
        prop_assert_eq!(plain.partition, checked.partition);
    }

    #[test]
    fn leiden_communities_are_connected((n, edges) in edges_strategy(), seed in 0u64..1000) {
        let g = graph(n, &edges);
        let c = leiden(&g, ClusterConfig::seeded(seed)).unwrap();
        prop_assert!((c.modularity - naive_modularity(n, &edges, c.partition.assignment())).abs() < 1e-10);
        for members in c.partition.member_nodes() {
            // breadth-first search restricted to the community
            let inside: std::collections::HashSet<usize> = members.iter().copied().collect();
            let mut seen = vec![members[0]];
            let mut k = 0;
            while k < seen.len() {
                let v = seen[k];
                for &(u, _) in g.neighbors(v) {
                    if inside.contains(&u) && !seen.contains(&u) {
                        seen.push(u);
                    }
                }
                k += 1;
            }
            prop_assert_eq!(seen.len(), members.len());
        }
    }
}

fn random_params(n: usize, m: usize, rng: &mut ChaCha8Rng) -> ScalingParams {
    let mut draw = |k: usize, s: f64| (0..k).map(|_| rng.random_range(-s..s)).collect::<Vec<f64>>();
    ScalingParams {
        alpha: draw(n, 0.5),
        psi: draw(m, 1.0),
        theta: draw(n, 1.5),
        beta: draw(m, 0.8),
    }
}

fn random_matrix(n: usize, m: usize, rng: &mut ChaCha8Rng) -> CountMatrix {
    let dense: Vec<Vec<u64>> = (0..n).map(|_| (0..m).map(|_| rng.random_range(1..15)).collect()).collect();
    CountMatrix::from_dense_unlabelled(&dense).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn gradients_match_finite_differences(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (n, m) = (rng.random_range(2..6), rng.random_range(2..7));
        let matrix = random_matrix(n, m, &mut rng);
        let params = random_params(n, m, &mut rng);
        let y = dense_f64(&matrix);
        let h = 1e-5;
        for i in 0..n {
            let g = document_gradient(&matrix, &params, i).unwrap();
            let at = |x: &[f64]| {
                let mut p = params.clone();
                p.alpha[i] = x[0];
                p.theta[i] = x[1];
                direct_loglik(&y, &p)
            };
            let x = [params.alpha[i], params.theta[i]];
            for k in 0..2 {
                let fd = central_difference(at, &x, k, h);
                prop_assert!((g[k] - fd).abs() <= 1e-4 * fd.abs().max(1.0), "doc {} coord {}: {} vs {}", i, k, g[k], fd);
            }
        }
        for j in 0..m {
            let g = feature_gradient(&matrix, &params, j).unwrap();
            let at = |x: &[f64]| {
                let mut p = params.clone();
                p.psi[j] = x[0];
                p.beta[j] = x[1];
                direct_loglik(&y, &p)
            };
            let x = [params.psi[j], params.beta[j]];
            for k in 0..2 {
                let fd = central_difference(at, &x, k, h);
                prop_assert!((g[k] - fd).abs() <= 1e-4 * fd.abs().max(1.0), "feature {} coord {}: {} vs {}", j, k, g[k], fd);
            }
        }
        prop_assert!((log_likelihood(&matrix, &params).unwrap() - direct_loglik(&y, &params)).abs() < 1e-9 * direct_loglik(&y, &params).abs().max(1.0));
    }

    #[test]
    fn column_permutation_permutes_features(seed in 0u64..10_000) {
        let spec = SyntheticSpec::draw(8, 7, 80, 0.6, 0.5, seed).unwrap();
        let matrix = generate_matrix(&spec).unwrap();
        let mut order: Vec<usize> = (0..7).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for k in (1..order.len()).rev() {
            order.swap(k, rng.random_range(0..=k));
        }
        let permuted = matrix.select_columns(&order);
        let config = FitConfig::default();
        let a = fit(&matrix, &config).unwrap();
        let b = fit(&permuted, &config).unwrap();
        for i in 0..8 {
            prop_assert!((a.params.theta[i] - b.params.theta[i]).abs() < 1e-8, "θ {}: {} vs {}", i, a.params.theta[i], b.params.theta[i]);
        }
        for (k, &j) in order.iter().enumerate() {
            prop_assert!((a.params.beta[j] - b.params.beta[k]).abs() < 1e-8);
            prop_assert!((a.params.psi[j] - b.params.psi[k]).abs() < 1e-8);
        }
    }

    #[test]
    fn scaling_counts_is_absorbed(seed in 0u64..10_000, factor in 2u64..6) {
        let spec = SyntheticSpec::draw(10, 8, 100, 0.6, 0.5, seed).unwrap();
        let matrix = generate_matrix(&spec).unwrap();
        let scaled: Vec<Vec<u64>> = matrix.to_dense().iter().map(|r| r.iter().map(|c| c * factor).collect()).collect();
        let scaled = CountMatrix::from_dense(matrix.doc_ids().to_vec(), matrix.feature_labels().to_vec(), &scaled).unwrap();
        let a = fit(&matrix, &FitConfig::default()).unwrap();
        let b = fit(&scaled, &FitConfig::default()).unwrap();
        prop_assert_eq!(spearman(&a.params.theta, &b.params.theta), 1.0);

        let tight = FitConfig { tol: 1e-14, max_iter: 5000, ..FitConfig::default() };
        let a = fit(&matrix, &tight).unwrap();
        let b = fit(&scaled, &tight).unwrap();
        let shift = (factor as f64).ln();
        for i in 0..10 {
            prop_assert!((a.params.theta[i] - b.params.theta[i]).abs() < 1e-5);
            for j in 0..8 {
                prop_assert!((b.params.eta(i, j) - a.params.eta(i, j) - shift).abs() < 1e-4);
            }
        }
    }
}

#[test]
fn identical_rows_get_identical_positions() {
    let m = CountMatrix::from_dense_unlabelled(&[
        vec![12, 3, 8, 1, 5, 9],
        vec![2, 11, 3, 9, 4, 2],
        vec![2, 11, 3, 9, 4, 2],
        vec![9, 4, 7, 2, 6, 8],
        vec![1, 14, 2, 12, 3, 1],
    ])
    .unwrap();
    let r = fit(&m, &FitConfig::default()).unwrap();
    assert!((r.params.theta[1] - r.params.theta[2]).abs() < 1e-6);
}

#[test]
fn trace_never_decreases() {
    for seed in 0..10 {
        let spec = SyntheticSpec::draw(15, 20, 200, 0.6, 1.0, seed).unwrap();
        let m = generate_matrix(&spec).unwrap();
        let config = FitConfig { debug_check: true, ..FitConfig::default() };
        let r = fit(&m, &config).unwrap();
        assert!(r.loglik_trace.windows(2).all(|w| w[1] >= w[0] - 1e-9));
    }
}

#[test]
fn converged_fit_beats_its_start() {
    let spec = SyntheticSpec::draw(12, 15, 150, 0.6, 1.0, 9).unwrap();
    let m = generate_matrix(&spec).unwrap();
    let start = communityfish::scaler::initialize(&m).unwrap();
    let r = fit(&m, &FitConfig::default()).unwrap();
    assert!(log_likelihood(&m, &r.params).unwrap() >= log_likelihood(&m, &start).unwrap());
}

fn beta_within_three_se(matrix: &CountMatrix) -> f64 {
    let r = fit(matrix, &FitConfig::default()).unwrap();
    let se = joint_standard_errors(matrix, &r.params, 30.0).unwrap().beta;
    let inside = r.params.beta.iter().zip(&se).filter(|(b, s)| b.abs() < 3.0 * **s).count();
    inside as f64 / r.params.beta.len() as f64
}

#[test]
fn null_discrimination_is_indistinguishable_from_zero() {
    let mut spec = SyntheticSpec::draw(25, 40, 500, 0.5, 1.0, 77).unwrap();
    spec.beta_star = vec![0.0; 40];
    spec.calibrate_alpha();
    let share = beta_within_three_se(&generate_matrix(&spec).unwrap());
    assert!(share >= 0.9, "only {share} of β̂ within 3·SE");
}

#[test]
fn negative_control_iid_tokens() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let vocab: Vec<String> = (0..30).map(|k| format!("word{}", (b'a' + k as u8) as char)).collect();
    for rep in 0..5 {
        let docs: Vec<Document> = (0..25)
            .map(|i| {
                let tokens: Vec<&str> = (0..600).map(|_| vocab[rng.random_range(0..vocab.len())].as_str()).collect();
                Document::from_tokens(format!("d{rep}_{i}"), &tokens)
            })
            .collect();
        let corpus = Corpus::new(docs).unwrap();
        let (matrix, _) = unigram_dtm(&corpus, 1).unwrap();
        let share = beta_within_three_se(&matrix);
        assert!(share >= 0.9, "replicate {rep}: only {share} of β̂ within 3·SE");
    }
}

#[test]
fn iterations_respect_max_iter() {
    let spec = SyntheticSpec::draw(10, 12, 100, 0.6, 1.0, 5).unwrap();
    let m = generate_matrix(&spec).unwrap();
    let r = fit(&m, &FitConfig { max_iter: 1, tol: 1e-300, ..FitConfig::default() }).unwrap();
    assert_eq!(r.iterations, 1);
    assert!(!r.converged);
}

#[test]
fn whole_and_singleton_partitions_on_cliques() {
    let (n, edges) = cliques(&[3, 4]);
    let g = graph(n, &edges);
    assert!(modularity(&g, &Partition::whole(n)).unwrap().abs() < 1e-12);
    let best = louvain(&g, ClusterConfig::seeded(1)).unwrap();
    assert_eq!(best.partition.num_communities(), 2);
    assert!((best.modularity - naive_modularity(n, &edges, &[0, 0, 0, 1, 1, 1, 1])).abs() < 1e-12);
}
