//! Hop-count geodesics on small graphs.

use std::collections::VecDeque;

use ndarray::Array2;

use crate::error::{FsFgwError, Result};

/// Adjacency lists of the subgraph induced by `nodes`; node `k` of the result
/// is `nodes[k]`. Edges touching other nodes are dropped.
pub fn induced_adjacency(edges: &[(usize, usize)], nodes: &[usize]) -> Vec<Vec<usize>> {
    let max = nodes.iter().copied().max().map_or(0, |m| m + 1);
    let mut local = vec![usize::MAX; max];
    for (k, &v) in nodes.iter().enumerate() {
        local[v] = k;
    }
    let lookup = |v: usize| local.get(v).copied().filter(|&k| k != usize::MAX);
    let mut adj = vec![Vec::new(); nodes.len()];
    for &(u, v) in edges {
        if let (Some(a), Some(b)) = (lookup(u), lookup(v)) {
            if a != b && !adj[a].contains(&b) {
                adj[a].push(b);
                adj[b].push(a);
            }
        }
    }
    for list in &mut adj {
        list.sort_unstable();
    }
    adj
}

/// Hop distance from `source` to every node; `None` when unreachable.
pub fn bfs_hops(adj: &[Vec<usize>], source: usize) -> Vec<Option<usize>> {
    let mut dist = vec![None; adj.len()];
    dist[source] = Some(0);
    let mut queue = VecDeque::from([source]);
    while let Some(u) = queue.pop_front() {
        let du = dist[u].unwrap_or(0);
        for &v in &adj[u] {
            if dist[v].is_none() {
                dist[v] = Some(du + 1);
                queue.push_back(v);
            }
        }
    }
    dist
}

/// Nodes in BFS visiting order starting at `source`.
pub fn bfs_order(adj: &[Vec<usize>], source: usize) -> Vec<usize> {
    let mut seen = vec![false; adj.len()];
    seen[source] = true;
    let mut order = vec![source];
    let mut head = 0;
    while head < order.len() {
        let u = order[head];
        head += 1;
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                order.push(v);
            }
        }
    }
    order
}

/// Connected components, each sorted, ordered by smallest member.
pub fn connected_components(adj: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let mut seen = vec![false; adj.len()];
    let mut out = Vec::new();
    for s in 0..adj.len() {
        if seen[s] {
            continue;
        }
        let mut comp = bfs_order(adj, s);
        for &v in &comp {
            seen[v] = true;
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

/// All-pairs hop distances divided by their maximum. Fails with
/// `DisconnectedDistrict` (components in local indices) when the graph is
/// not connected.
pub fn geodesic_matrix(adj: &[Vec<usize>]) -> Result<Array2<f64>> {
    let n = adj.len();
    if n == 0 {
        return Err(FsFgwError::EmptySet("graph has no nodes".into()));
    }
    let mut c = Array2::zeros((n, n));
    let mut max = 0usize;
    for s in 0..n {
        let hops = bfs_hops(adj, s);
        for (t, h) in hops.into_iter().enumerate() {
            let Some(h) = h else {
                let components = connected_components(adj)
                    .into_iter()
                    .map(|comp| comp.into_iter().map(|v| v.to_string()).collect())
                    .collect();
                return Err(FsFgwError::DisconnectedDistrict {
                    district: String::new(),
                    components,
                });
            };
            c[[s, t]] = h as f64;
            max = max.max(h);
        }
    }
    if max > 0 {
        c.mapv_inplace(|v| v / max as f64);
    }
    Ok(c)
}

/// Normalized geodesic matrix of the subgraph induced by `nodes`.
pub fn geodesic_structure(edges: &[(usize, usize)], nodes: &[usize]) -> Result<Array2<f64>> {
    geodesic_matrix(&induced_adjacency(edges, nodes)).map_err(|e| match e {
        FsFgwError::DisconnectedDistrict { district, components } => {
            let components = components
                .into_iter()
                .map(|comp| {
                    comp.into_iter()
                        .map(|k| nodes[k.parse::<usize>().unwrap_or(0)].to_string())
                        .collect()
                })
                .collect();
            FsFgwError::DisconnectedDistrict { district, components }
        }
        other => other,
    })
}
