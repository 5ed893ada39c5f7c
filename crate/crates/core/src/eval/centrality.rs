//! Classical centralities on an unweighted directed graph.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::ngc::NgcGraph;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CentralityKind {
    Betweenness,
    Closeness,
    Degree,
    Eigen,
}

impl CentralityKind {
    pub const ALL: [CentralityKind; 4] = [
        CentralityKind::Betweenness,
        CentralityKind::Closeness,
        CentralityKind::Degree,
        CentralityKind::Eigen,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CentralityKind::Betweenness => "Between",
            CentralityKind::Closeness => "Closeness",
            CentralityKind::Degree => "Degree",
            CentralityKind::Eigen => "Eigen",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Centralities {
    pub in_degree: Vec<f64>,
    pub out_degree: Vec<f64>,
    /// Left (in-edge) eigenvector centrality, unit Euclidean norm.
    pub eigen: Vec<f64>,
    /// Unnormalized count of shortest paths through each node.
    pub betweenness: Vec<f64>,
    /// Incoming-distance closeness with the Wasserman-Faust correction.
    pub closeness: Vec<f64>,
    pub degenerate: bool,
}

impl Centralities {
    /// Score used to rank sources (`sink = false`) or sinks. Degree is
    /// directional; the other measures rank both ends with one score.
    pub fn score(&self, kind: CentralityKind, sink: bool) -> &[f64] {
        match (kind, sink) {
            (CentralityKind::Degree, false) => &self.out_degree,
            (CentralityKind::Degree, true) => &self.in_degree,
            (CentralityKind::Betweenness, _) => &self.betweenness,
            (CentralityKind::Closeness, _) => &self.closeness,
            (CentralityKind::Eigen, _) => &self.eigen,
        }
    }
}

fn successors(adj: &[Vec<bool>]) -> Vec<Vec<usize>> {
    adj.iter()
        .map(|row| row.iter().enumerate().filter(|(_, &e)| e).map(|(j, _)| j).collect())
        .collect()
}

fn predecessors(adj: &[Vec<bool>]) -> Vec<Vec<usize>> {
    let d = adj.len();
    (0..d).map(|t| (0..d).filter(|&s| adj[s][t]).collect()).collect()
}

/// Brandes' accumulation over BFS shortest-path DAGs.
pub fn betweenness(adj: &[Vec<bool>]) -> Vec<f64> {
    let d = adj.len();
    let succ = successors(adj);
    let mut cb = vec![0.0; d];
    for s in 0..d {
        let mut stack = Vec::with_capacity(d);
        let mut preds: Vec<Vec<usize>> = vec![Vec::new(); d];
        let mut sigma = vec![0.0f64; d];
        let mut dist = vec![-1i64; d];
        sigma[s] = 1.0;
        dist[s] = 0;
        let mut queue = VecDeque::from([s]);
        while let Some(v) = queue.pop_front() {
            stack.push(v);
            for &w in &succ[v] {
                if dist[w] < 0 {
                    dist[w] = dist[v] + 1;
                    queue.push_back(w);
                }
                if dist[w] == dist[v] + 1 {
                    sigma[w] += sigma[v];
                    preds[w].push(v);
                }
            }
        }
        let mut delta = vec![0.0; d];
        while let Some(w) = stack.pop() {
            for &v in &preds[w] {
                delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
            }
            if w != s {
                cb[w] += delta[w];
            }
        }
    }
    cb
}

/// Hop distances from `start` following `next`; `None` where unreachable.
fn bfs(next: &[Vec<usize>], start: usize) -> Vec<Option<usize>> {
    let mut dist = vec![None; next.len()];
    dist[start] = Some(0);
    let mut queue = VecDeque::from([start]);
    while let Some(v) = queue.pop_front() {
        let dv = dist[v].expect("queued nodes are reached");
        for &w in &next[v] {
            if dist[w].is_none() {
                dist[w] = Some(dv + 1);
                queue.push_back(w);
            }
        }
    }
    dist
}

pub fn closeness(adj: &[Vec<bool>]) -> Vec<f64> {
    let d = adj.len();
    let pred = predecessors(adj);
    (0..d)
        .map(|u| {
            // distances *to* u: walk edges backwards
            let dist = bfs(&pred, u);
            let reached: Vec<usize> = dist.iter().flatten().copied().filter(|&x| x > 0).collect();
            let total: usize = reached.iter().sum();
            if total == 0 || d < 2 {
                return 0.0;
            }
            let r = reached.len() as f64;
            (r / total as f64) * (r / (d - 1) as f64)
        })
        .collect()
}

/// Power iteration on `A' + I`, at most 100 steps.
pub fn eigenvector(adj: &[Vec<bool>]) -> Vec<f64> {
    let d = adj.len();
    let pred = predecessors(adj);
    let mut x = vec![1.0 / d as f64; d];
    for _ in 0..100 {
        let mut next: Vec<f64> = (0..d).map(|j| x[j] + pred[j].iter().map(|&k| x[k]).sum::<f64>()).collect();
        let norm = next.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return vec![0.0; d];
        }
        next.iter_mut().for_each(|v| *v /= norm);
        let change: f64 = next.iter().zip(&x).map(|(a, b)| (a - b).abs()).sum();
        x = next;
        if change < d as f64 * 1e-6 {
            break;
        }
    }
    x
}

pub fn centralities(g: &NgcGraph) -> Centralities {
    let d = g.dim();
    if g.is_degenerate() {
        return Centralities {
            in_degree: vec![0.0; d],
            out_degree: vec![0.0; d],
            eigen: vec![0.0; d],
            betweenness: vec![0.0; d],
            closeness: vec![0.0; d],
            degenerate: true,
        };
    }
    let adj = &g.adjacency;
    Centralities {
        in_degree: (0..d).map(|t| (0..d).filter(|&s| adj[s][t]).count() as f64).collect(),
        out_degree: adj.iter().map(|row| row.iter().filter(|&&e| e).count() as f64).collect(),
        eigen: eigenvector(adj),
        betweenness: betweenness(adj),
        closeness: closeness(adj),
        degenerate: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(d: usize, edges: &[(usize, usize)]) -> Vec<Vec<bool>> {
        let mut adj = vec![vec![false; d]; d];
        for &(s, t) in edges {
            adj[s][t] = true;
        }
        adj
    }

    #[test]
    fn path_betweenness() {
        let adj = graph(3, &[(0, 1), (1, 2)]);
        assert_eq!(betweenness(&adj), vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn star_hub() {
        let adj = graph(4, &[(0, 1), (0, 2), (0, 3)]);
        let c = centralities(&NgcGraph::from_adjacency(adj, crate::mts::default_labels(4)));
        assert_eq!(c.out_degree, vec![3.0, 0.0, 0.0, 0.0]);
        assert_eq!(c.betweenness, vec![0.0; 4]);
        // leaves are reached from the hub in one hop: (1/1) * (1/3)
        assert_eq!(c.closeness, vec![0.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]);
    }

    #[test]
    fn split_paths_share_credit() {
        // 0 -> {1, 2} -> 3: two shortest paths, each middle node gets 1/2
        let adj = graph(4, &[(0, 1), (0, 2), (1, 3), (2, 3)]);
        assert_eq!(betweenness(&adj), vec![0.0, 0.5, 0.5, 0.0]);
    }

    #[test]
    fn eigen_favours_targets_of_targets() {
        let adj = graph(3, &[(0, 1), (1, 2)]);
        let e = eigenvector(&adj);
        assert!(e[2] > e[1] && e[1] > e[0]);
    }

    #[test]
    fn degenerate_graph_is_all_zero() {
        let c = centralities(&NgcGraph::from_adjacency(graph(3, &[]), crate::mts::default_labels(3)));
        assert!(c.degenerate);
        assert!(c.eigen.iter().chain(&c.closeness).all(|v| *v == 0.0));
    }
}
