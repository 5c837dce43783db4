use serde::{Deserialize, Serialize};

use crate::model::{ChannelState, SystemConfig};
use crate::{Error, Result};

/// Undirected RU interference graph.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterferenceGraph {
    /// `G_m[n] = ‖H_{n,m}‖²_F`.
    pub gains: Vec<Vec<f64>>,
    pub threshold: f64,
    /// Edges `(m, m')` with `m < m'`, in lexicographic order.
    pub edges: Vec<(usize, usize)>,
}

impl InterferenceGraph {
    /// Graph from explicit gain vectors: `(m, m')` is an edge iff
    /// `G_m · G_m' > g(α)`, where `g(α)` is the `⌊α M(M−1)/2⌋`-th smallest
    /// pairwise product and `g = −1` when that rank is zero.
    pub fn from_gains(gains: Vec<Vec<f64>>, alpha: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::config(format!("alpha must lie in [0, 1], got {alpha}")));
        }
        let m = gains.len();
        let dot = |a: usize, b: usize| gains[a].iter().zip(&gains[b]).map(|(x, y)| x * y).sum::<f64>();
        let mut pairs = Vec::new();
        for a in 0..m {
            for b in a + 1..m {
                pairs.push((a, b, dot(a, b)));
            }
        }
        let mut sorted: Vec<f64> = pairs.iter().map(|p| p.2).collect();
        sorted.sort_by(f64::total_cmp);
        let rank = (alpha * sorted.len() as f64 + 1e-9).floor() as usize;
        let threshold = if rank == 0 { -1.0 } else { sorted[rank.min(sorted.len()) - 1] };
        let edges = pairs.iter().filter(|p| p.2 > threshold).map(|p| (p.0, p.1)).collect();
        Ok(InterferenceGraph { gains, threshold, edges })
    }

    pub fn num_nodes(&self) -> usize {
        self.gains.len()
    }

    pub fn adjacency(&self) -> Vec<Vec<bool>> {
        let m = self.num_nodes();
        let mut adj = vec![vec![false; m]; m];
        for &(a, b) in &self.edges {
            adj[a][b] = true;
            adj[b][a] = true;
        }
        adj
    }
}

/// Builds the graph from the channel's per-block squared Frobenius norms.
pub fn build_interference_graph(cfg: &SystemConfig, channel: &ChannelState, alpha: f64) -> Result<InterferenceGraph> {
    let gains = (0..cfg.num_rus())
        .map(|m| (0..cfg.num_ues()).map(|n| channel.block(cfg, m, n).norm_squared()).collect())
        .collect();
    InterferenceGraph::from_gains(gains, alpha)
}

/// Ordered independent sets of the interference graph.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuantizationSchedule {
    pub sets: Vec<Vec<usize>>,
}

impl QuantizationSchedule {
    /// Every RU in its own set, in index order.
    pub fn singletons(m: usize) -> Self {
        QuantizationSchedule { sets: (0..m).map(|i| vec![i]).collect() }
    }

    /// Set used at 1-based iteration `t`.
    pub fn set_at(&self, t: usize) -> &[usize] {
        &self.sets[(t - 1) % self.sets.len()]
    }
}

/// Recursive-largest-first coloring. Each class is seeded with the uncolored
/// vertex of largest degree in the uncolored subgraph, then grown by the
/// candidate with most neighbors among excluded vertices (ties: fewest
/// neighbors among candidates, then lowest index).
pub fn rlf_independent_sets(graph: &InterferenceGraph) -> QuantizationSchedule {
    let m = graph.num_nodes();
    let adj = graph.adjacency();
    let mut uncolored: Vec<bool> = vec![true; m];
    let mut sets = Vec::new();
    while uncolored.iter().any(|&u| u) {
        let mut cand = uncolored.clone();
        let mut excluded = vec![false; m];
        let count = |v: usize, mask: &[bool]| (0..m).filter(|&w| mask[w] && adj[v][w]).count();
        let mut seed = None;
        for v in (0..m).filter(|&v| cand[v]) {
            let d = count(v, &cand);
            if seed.is_none_or(|(_, bd)| d > bd) {
                seed = Some((v, d));
            }
        }
        let mut class = Vec::new();
        let mut next = seed.map(|s| s.0);
        while let Some(v) = next {
            class.push(v);
            cand[v] = false;
            uncolored[v] = false;
            for w in 0..m {
                if cand[w] && adj[v][w] {
                    cand[w] = false;
                    excluded[w] = true;
                }
            }
            next = None;
            let mut best: Option<(usize, usize, usize)> = None;
            for u in (0..m).filter(|&u| cand[u]) {
                let (in_x, in_c) = (count(u, &excluded), count(u, &cand));
                let better = match best {
                    None => true,
                    Some((_, bx, bc)) => in_x > bx || (in_x == bx && in_c < bc),
                };
                if better {
                    best = Some((u, in_x, in_c));
                }
            }
            if let Some((u, _, _)) = best {
                next = Some(u);
            }
        }
        class.sort_unstable();
        sets.push(class);
    }
    QuantizationSchedule { sets }
}
