use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::level::{relabel, LevelGraph, NeighborWeights};
use super::{modularity, ClusterConfig, Clustering, Partition, WordGraph};
use crate::error::{Error, Result};

/// Stop aggregating once a level improves Q by less than this.
pub(crate) const MIN_LEVEL_GAIN: f64 = 1e-12;
/// Smallest ΔQ accepted for a single node move.
pub(crate) const MIN_MOVE_GAIN: f64 = 1e-13;

/// Greedy two-phase modularity maximization.
///
/// Phase one moves single nodes to the neighboring community with the
/// largest positive ΔQ (ties go to the lowest community id) until a full
/// sweep makes no move; phase two collapses communities into nodes. Nodes
/// are visited in a seeded shuffled order, so a seed fixes the result.
pub fn louvain(graph: &WordGraph, config: ClusterConfig) -> Result<Clustering> {
    if graph.node_count() == 0 {
        return Err(Error::EmptyGraph);
    }
    if graph.total_weight() <= 0.0 {
        return Err(Error::ZeroWeight);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut level = LevelGraph::from_graph(graph);
    let mut membership: Vec<usize> = (0..graph.node_count()).collect();
    let identity: Vec<usize> = (0..level.len()).collect();
    let mut q = level.modularity(&identity);
    let mut move_gains = Vec::new();
    let mut levels = 0;

    loop {
        let mut comm: Vec<usize> = (0..level.len()).collect();
        let moved = local_moves(&level, &mut comm, &mut rng, &mut move_gains, config.debug_check)?;
        if !moved {
            break;
        }
        let k = relabel(&mut comm);
        let new_q = level.modularity(&comm);
        for m in membership.iter_mut() {
            *m = comm[*m];
        }
        levels += 1;
        let gain = new_q - q;
        q = new_q;
        if gain < MIN_LEVEL_GAIN || k == level.len() {
            break;
        }
        level = level.aggregate(&comm, k);
    }

    let partition = Partition::from_assignment(&membership);
    let modularity = modularity(graph, &partition)?;
    Ok(Clustering {
        partition,
        modularity,
        tracked_modularity: q,
        move_gains,
        levels,
    })
}

/// Phase one on a single level. Returns whether any node moved.
fn local_moves(
    level: &LevelGraph,
    comm: &mut [usize],
    rng: &mut ChaCha8Rng,
    gains: &mut Vec<f64>,
    debug_check: bool,
) -> Result<bool> {
    let n = level.len();
    let two_m = level.two_m;
    let mut tot = level.strength.clone();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut nw = NeighborWeights::new(n);
    let mut any = false;

    loop {
        let mut moved = false;
        for &node in &order {
            let k = level.strength[node];
            let own = comm[node];
            nw.collect(level, node, comm, |_| true);
            tot[own] -= k;
            // ΔQ of inserting the isolated node into c is 2·score(c)/2m.
            let score = |c: usize| nw.weight(c) - tot[c] * k / two_m;
            let stay = score(own);
            let mut best = own;
            let mut best_score = stay;
            for &c in nw.candidates() {
                if c == own {
                    continue;
                }
                let s = score(c);
                if s > best_score {
                    best = c;
                    best_score = s;
                }
            }
            let delta_q = 2.0 * (best_score - stay) / two_m;
            if best != own && delta_q > MIN_MOVE_GAIN {
                let before = debug_check.then(|| level.modularity(comm));
                comm[node] = best;
                tot[best] += k;
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
                moved = true;
            } else {
                tot[own] += k;
            }
        }
        if !moved {
            break;
        }
        any = true;
    }
    Ok(any)
}
