use super::WordGraph;

/// Working graph for one aggregation level. `loops[i]` is the adjacency
/// entry A_ii, i.e. the summed internal weight of everything merged into i
/// counted in both directions.
#[derive(Debug, Clone)]
pub(crate) struct LevelGraph {
    pub adj: Vec<Vec<(usize, f64)>>,
    pub loops: Vec<f64>,
    pub strength: Vec<f64>,
    pub two_m: f64,
}

impl LevelGraph {
    pub fn from_graph(graph: &WordGraph) -> Self {
        let n = graph.node_count();
        LevelGraph {
            adj: (0..n).map(|i| graph.neighbors(i).to_vec()).collect(),
            loops: vec![0.0; n],
            strength: (0..n).map(|i| graph.strength(i)).collect(),
            two_m: 2.0 * graph.total_weight(),
        }
    }

    pub fn len(&self) -> usize {
        self.adj.len()
    }

    pub fn modularity(&self, comm: &[usize]) -> f64 {
        let n = self.len();
        let mut internal = vec![0.0; n];
        let mut total = vec![0.0; n];
        for i in 0..n {
            let c = comm[i];
            total[c] += self.strength[i];
            internal[c] += self.loops[i];
            for &(j, w) in &self.adj[i] {
                if comm[j] == c {
                    internal[c] += w;
                }
            }
        }
        internal
            .iter()
            .zip(&total)
            .map(|(&inside, &tot)| inside / self.two_m - (tot / self.two_m).powi(2))
            .sum()
    }

    /// Collapses each community (labels `0..k`) into a single node.
    pub fn aggregate(&self, comm: &[usize], k: usize) -> LevelGraph {
        let mut loops = vec![0.0; k];
        let mut strength = vec![0.0; k];
        let mut rows: Vec<std::collections::BTreeMap<usize, f64>> = vec![Default::default(); k];
        for i in 0..self.len() {
            let c = comm[i];
            loops[c] += self.loops[i];
            strength[c] += self.strength[i];
            for &(j, w) in &self.adj[i] {
                let d = comm[j];
                if d == c {
                    loops[c] += w;
                } else {
                    *rows[c].entry(d).or_default() += w;
                }
            }
        }
        LevelGraph {
            adj: rows.into_iter().map(|r| r.into_iter().collect()).collect(),
            loops,
            strength,
            two_m: self.two_m,
        }
    }
}

/// Renumbers labels contiguously by first appearance; returns the count.
pub(crate) fn relabel(comm: &mut [usize]) -> usize {
    let mut map = vec![usize::MAX; comm.len().max(comm.iter().copied().max().map_or(0, |m| m + 1))];
    let mut next = 0;
    for c in comm.iter_mut() {
        if map[*c] == usize::MAX {
            map[*c] = next;
            next += 1;
        }
        *c = map[*c];
    }
    next
}

/// Scratch buffer collecting edge weight from one node to each neighboring
/// community.
pub(crate) struct NeighborWeights {
    weight: Vec<f64>,
    seen: Vec<bool>,
    touched: Vec<usize>,
}

impl NeighborWeights {
    pub fn new(n: usize) -> Self {
        NeighborWeights {
            weight: vec![0.0; n],
            seen: vec![false; n],
            touched: Vec::new(),
        }
    }

    /// Gathers weights from `node` to the communities in `comm`, optionally
    /// restricted to neighbors accepted by `keep`.
    pub fn collect(
        &mut self,
        level: &LevelGraph,
        node: usize,
        comm: &[usize],
        keep: impl Fn(usize) -> bool,
    ) {
        for &c in &self.touched {
            self.weight[c] = 0.0;
            self.seen[c] = false;
        }
        self.touched.clear();
        for &(j, w) in &level.adj[node] {
            if !keep(j) {
                continue;
            }
            let c = comm[j];
            if !self.seen[c] {
                self.seen[c] = true;
                self.touched.push(c);
            }
            self.weight[c] += w;
        }
        self.touched.sort_unstable();
    }

    /// Communities reached by the last `collect`, ascending.
    pub fn candidates(&self) -> &[usize] {
        &self.touched
    }

    pub fn weight(&self, community: usize) -> f64 {
        if self.seen[community] {
            self.weight[community]
        } else {
            0.0
        }
    }
}
