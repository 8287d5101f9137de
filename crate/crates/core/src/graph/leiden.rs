use std::collections::VecDeque;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::level::{relabel, LevelGraph, NeighborWeights};
use super::louvain::MIN_MOVE_GAIN;
use super::{modularity, ClusterConfig, Clustering, Partition, WordGraph};
use crate::error::{Error, Result};

/// Louvain with a refinement step: communities found by local moving are
/// split into well-connected sub-communities before aggregation, and the
/// aggregate starts from the unrefined communities. Any community that still
/// ends up disconnected is split into its components, so every returned
/// community is internally connected.
///
/// Refinement merges greedily (largest non-negative ΔQ) instead of sampling,
/// which keeps the result a pure function of the seed.
pub fn leiden(graph: &WordGraph, config: ClusterConfig) -> Result<Clustering> {
    if graph.node_count() == 0 {
        return Err(Error::EmptyGraph);
    }
    if graph.total_weight() <= 0.0 {
        return Err(Error::ZeroWeight);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut level = LevelGraph::from_graph(graph);
    let mut membership: Vec<usize> = (0..graph.node_count()).collect();
    let mut comm: Vec<usize> = (0..level.len()).collect();
    let mut move_gains = Vec::new();
    let mut levels = 0;

    loop {
        fast_local_moves(&level, &mut comm, &mut rng, &mut move_gains, config.debug_check)?;
        let k = relabel(&mut comm);
        levels += 1;
        if k == level.len() {
            break;
        }
        let mut refined = refine(&level, &comm, k, &mut rng);
        let kr = relabel(&mut refined);
        if kr == level.len() {
            // Refinement merged nothing; aggregating would not shrink the graph.
            break;
        }
        let mut next_comm = vec![0; kr];
        for (node, &r) in refined.iter().enumerate() {
            next_comm[r] = comm[node];
        }
        for m in membership.iter_mut() {
            *m = refined[*m];
        }
        level = level.aggregate(&refined, kr);
        comm = next_comm;
    }

    let tracked_modularity = level.modularity(&comm);
    let labels: Vec<usize> = membership.iter().map(|&m| comm[m]).collect();
    let partition = Partition::from_assignment(&split_disconnected(graph, &labels));
    let modularity = modularity(graph, &partition)?;
    Ok(Clustering {
        partition,
        modularity,
        tracked_modularity,
        move_gains,
        levels,
    })
}

/// Queue-based local moving. Only neighbors of a moved node are revisited.
/// A node may also leave for an empty community when that raises Q.
fn fast_local_moves(
    level: &LevelGraph,
    comm: &mut [usize],
    rng: &mut ChaCha8Rng,
    gains: &mut Vec<f64>,
    debug_check: bool,
) -> Result<()> {
    let n = level.len();
    let two_m = level.two_m;
    let mut tot = vec![0.0; n];
    let mut size = vec![0usize; n];
    for (node, &c) in comm.iter().enumerate() {
        tot[c] += level.strength[node];
        size[c] += 1;
    }
    let mut empty: Vec<usize> = (0..n).filter(|&c| size[c] == 0).rev().collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut queue: VecDeque<usize> = order.into_iter().collect();
    let mut queued = vec![true; n];
    let mut nw = NeighborWeights::new(n);

    while let Some(node) = queue.pop_front() {
        queued[node] = false;
        let k = level.strength[node];
        let own = comm[node];
        nw.collect(level, node, comm, |_| true);
        tot[own] -= k;
        size[own] -= 1;
        let score = |c: usize| nw.weight(c) - tot[c] * k / two_m;
        let stay = score(own);
        let mut best = own;
        let mut best_score = stay;
        for &c in nw.candidates() {
            if c != own {
                let s = score(c);
                if s > best_score {
                    best = c;
                    best_score = s;
                }
            }
        }
        // An empty community scores 0.
        if size[own] > 0 && best_score < 0.0 {
            if let Some(&e) = empty.last() {
                best = e;
                best_score = 0.0;
            }
        }
        let delta_q = 2.0 * (best_score - stay) / two_m;
        if best != own && delta_q > MIN_MOVE_GAIN {
            let before = debug_check.then(|| level.modularity(comm));
            if size[best] == 0 {
                empty.pop();
            }
            comm[node] = best;
            tot[best] += k;
            size[best] += 1;
            if size[own] == 0 {
                empty.push(own);
            }
            if let Some(before) = before {
                let after = level.modularity(comm);
                if ((after - before) - delta_q).abs() > 1e-9 {
                    return Err(Error::Internal(format!(
                        "incremental ΔQ {delta_q} disagrees with recomputed {}",
                        after - before
                    )));
                }
            }
            gains.push(delta_q);
            for &(nb, _) in &level.adj[node] {
                if !queued[nb] && comm[nb] != best {
                    queued[nb] = true;
                    queue.push_back(nb);
                }
            }
        } else {
            tot[own] += k;
            size[own] += 1;
        }
    }
    Ok(())
}

/// Splits each community into well-connected sub-communities, starting from
/// singletons and merging only along edges inside the community.
fn refine(level: &LevelGraph, comm: &[usize], k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = level.len();
    let two_m = level.two_m;
    let mut refined: Vec<usize> = (0..n).collect();
    let mut rtot = level.strength.clone();
    let mut singleton = vec![true; n];
    let mut stot = vec![0.0; k];
    for (node, &c) in comm.iter().enumerate() {
        stot[c] += level.strength[node];
    }
    // Weight from each refined community to the rest of its parent community.
    let mut external: Vec<f64> = (0..n)
        .map(|v| {
            level.adj[v]
                .iter()
                .filter(|&&(u, _)| comm[u] == comm[v])
                .map(|&(_, w)| w)
                .sum()
        })
        .collect();

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut nw = NeighborWeights::new(n);
    for &v in &order {
        if !singleton[v] {
            continue;
        }
        let s = comm[v];
        let kv = level.strength[v];
        if external[v] < kv * (stot[s] - kv) / two_m {
            continue;
        }
        nw.collect(level, v, &refined, |u| comm[u] == s);
        let mut best: Option<(usize, f64)> = None;
        for &c in nw.candidates() {
            if c == refined[v] {
                continue;
            }
            if external[c] < rtot[c] * (stot[s] - rtot[c]) / two_m {
                continue;
            }
            let score = nw.weight(c) - rtot[c] * kv / two_m;
            if score >= 0.0 && best.is_none_or(|(_, b)| score > b) {
                best = Some((c, score));
            }
        }
        if let Some((c, _)) = best {
            let w = nw.weight(c);
            external[c] += external[v] - 2.0 * w;
            rtot[c] += kv;
            rtot[v] -= kv;
            refined[v] = c;
            singleton[v] = false;
            singleton[c] = false;
        }
    }
    refined
}

/// Relabels so that every community is a connected component of the
/// subgraph induced by its members.
fn split_disconnected(graph: &WordGraph, labels: &[usize]) -> Vec<usize> {
    let n = graph.node_count();
    let mut out = vec![usize::MAX; n];
    let mut next = 0;
    let mut stack = Vec::new();
    for start in 0..n {
        if out[start] != usize::MAX {
            continue;
        }
        out[start] = next;
        stack.push(start);
        while let Some(v) = stack.pop() {
            for &(u, _) in graph.neighbors(v) {
                if out[u] == usize::MAX && labels[u] == labels[start] {
                    out[u] = next;
                    stack.push(u);
                }
            }
        }
        next += 1;
    }
    out
}
