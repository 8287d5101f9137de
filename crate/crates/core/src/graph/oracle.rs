use super::{modularity, Partition, WordGraph};
use crate::error::{Error, Result};

/// Bell(10) = 115 975 partitions is still instant.
pub const BRUTE_FORCE_MAX_NODES: usize = 10;

/// Exhaustive search over all set partitions (restricted growth strings).
///
/// Ties within 1e-12 go to the partition with fewer communities, then to the
/// lexicographically smallest assignment.
pub fn brute_force_best_partition(graph: &WordGraph) -> Result<(Partition, f64)> {
    let n = graph.node_count();
    if n == 0 {
        return Err(Error::EmptyGraph);
    }
    if n > BRUTE_FORCE_MAX_NODES {
        return Err(Error::TooManyNodes {
            nodes: n,
            max: BRUTE_FORCE_MAX_NODES,
        });
    }
    if graph.total_weight() <= 0.0 {
        return Err(Error::ZeroWeight);
    }

    let mut rgs = vec![0usize; n];
    let mut best: Option<(Partition, f64)> = None;
    loop {
        let p = Partition::from_assignment(&rgs);
        let q = modularity(graph, &p)?;
        let better = match &best {
            None => true,
            Some((bp, bq)) => {
                q > bq + 1e-12 || ((q - bq).abs() <= 1e-12 && p.num_communities() < bp.num_communities())
            }
        };
        if better {
            best = Some((p, q));
        }
        if !next_rgs(&mut rgs) {
            break;
        }
    }
    Ok(best.expect("at least one partition"))
}

/// Advances to the next restricted growth string in lexicographic order.
fn next_rgs(rgs: &mut [usize]) -> bool {
    let n = rgs.len();
    for i in (1..n).rev() {
        let prefix_max = rgs[..i].iter().copied().max().unwrap_or(0);
        if rgs[i] <= prefix_max {
            rgs[i] += 1;
            for r in &mut rgs[i + 1..] {
                *r = 0;
            }
            return true;
        }
    }
    false
}
