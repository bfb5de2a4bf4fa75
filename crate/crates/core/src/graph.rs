//! Social graph representation, centralities, and the network scores.
//!
//! Graphs are undirected and simple; self-loops and duplicate edges are
//! dropped at construction and reported. Fixed-point solvers (PageRank,
//! eigenvector, network-aware propagation) use power iteration with a
//! max-norm stopping rule and deterministic uniform initialization.

use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::matrix::{ModelKind, ScoreVector, UserRegistry};

/// Undirected simple graph over the user registry.
#[derive(Debug, Clone)]
pub struct SocialGraph {
    registry: Arc<UserRegistry>,
    neighbors: Vec<Vec<u32>>,
    edge_count: usize,
}

/// What edge cleanup dropped during construction.
#[derive(Debug, Clone, Default)]
pub struct EdgeReport {
    pub self_loops_dropped: usize,
    pub duplicates_dropped: usize,
}

impl SocialGraph {
    /// Builds the graph, dropping self-loops and duplicate edges (both
    /// orientations count as the same edge).
    pub fn from_edges<I>(registry: Arc<UserRegistry>, edges: I) -> Result<(Self, EdgeReport)>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let n = registry.len();
        let mut report = EdgeReport::default();
        let mut neighbors: Vec<Vec<u32>> = vec![Vec::new(); n];
        for (a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::IndexOutOfRange {
                    kind: "user",
                    index: a.max(b),
                    len: n,
                });
            }
            if a == b {
                report.self_loops_dropped += 1;
                continue;
            }
            neighbors[a].push(b as u32);
            neighbors[b].push(a as u32);
        }
        let mut edge_count = 0usize;
        let mut half_dupes = 0usize;
        for list in neighbors.iter_mut() {
            let before = list.len();
            list.sort_unstable();
            list.dedup();
            half_dupes += before - list.len();
            edge_count += list.len();
        }
        report.duplicates_dropped = half_dupes / 2;
        edge_count /= 2;
        Ok((
            Self {
                registry,
                neighbors,
                edge_count,
            },
            report,
        ))
    }

    pub fn registry(&self) -> &UserRegistry {
        &self.registry
    }

    pub fn registry_arc(&self) -> Arc<UserRegistry> {
        Arc::clone(&self.registry)
    }

    pub fn node_count(&self) -> usize {
        self.neighbors.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn degree(&self, j: usize) -> usize {
        self.neighbors[j].len()
    }

    pub fn neighbors(&self, j: usize) -> &[u32] {
        &self.neighbors[j]
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.neighbors.iter().map(Vec::len).collect()
    }

    /// Edges as (smaller, larger) index pairs, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.edge_count);
        for (a, list) in self.neighbors.iter().enumerate() {
            for &b in list {
                let b = b as usize;
                if a < b {
                    out.push((a, b));
                }
            }
        }
        out
    }

    /// Connected components as sorted node lists, ordered by smallest node.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.node_count();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        let mut queue = std::collections::VecDeque::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            seen[start] = true;
            queue.push_back(start);
            let mut component = vec![start];
            while let Some(v) = queue.pop_front() {
                for &w in &self.neighbors[v] {
                    let w = w as usize;
                    if !seen[w] {
                        seen[w] = true;
                        component.push(w);
                        queue.push_back(w);
                    }
                }
            }
            component.sort_unstable();
            out.push(component);
        }
        out
    }

    /// Largest connected component; ties go to the one containing the
    /// smallest node index.
    pub fn largest_component(&self) -> Vec<usize> {
        self.components()
            .into_iter()
            .max_by(|a, b| a.len().cmp(&b.len()).then(b[0].cmp(&a[0])))
            .unwrap_or_default()
    }

    /// Breadth-first distances from `source`; unreachable nodes get
    /// `usize::MAX`.
    pub fn bfs_distances(&self, source: usize) -> Vec<usize> {
        let mut dist = vec![usize::MAX; self.node_count()];
        dist[source] = 0;
        let mut queue = std::collections::VecDeque::new();
        queue.push_back(source);
        while let Some(v) = queue.pop_front() {
            for &w in &self.neighbors[v] {
                let w = w as usize;
                if dist[w] == usize::MAX {
                    dist[w] = dist[v] + 1;
                    queue.push_back(w);
                }
            }
        }
        dist
    }
}

/// A converged (or not) fixed-point vector.
#[derive(Debug, Clone)]
pub struct FixedPoint {
    pub values: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Random-walk rank fixed point: each node splits its mass equally among
/// its neighbors, isolated nodes spread theirs uniformly, and `1 - damping`
/// of the mass restarts uniformly. The result sums to one.
pub fn pagerank(g: &SocialGraph, damping: f64, tol: f64, max_iter: usize) -> Result<FixedPoint> {
    if !(0.0..1.0).contains(&damping) {
        return Err(Error::BadDamping(damping));
    }
    let n = g.node_count();
    if n == 0 {
        return Err(Error::EmptyInput { what: "graph" });
    }
    let uniform = 1.0 / n as f64;
    let mut rank = vec![uniform; n];
    let mut next = vec![0.0f64; n];
    for iter in 0..max_iter {
        let dangling: f64 = (0..n)
            .filter(|&v| g.degree(v) == 0)
            .map(|v| rank[v])
            .sum();
        let base = (1.0 - damping) * uniform + damping * dangling * uniform;
        for slot in next.iter_mut() {
            *slot = base;
        }
        for v in 0..n {
            let deg = g.degree(v);
            if deg == 0 {
                continue;
            }
            let share = damping * rank[v] / deg as f64;
            for &w in g.neighbors(v) {
                next[w as usize] += share;
            }
        }
        let delta = rank
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        std::mem::swap(&mut rank, &mut next);
        if delta < tol {
            return Ok(FixedPoint {
                values: rank,
                iterations: iter + 1,
                converged: true,
            });
        }
    }
    Ok(FixedPoint {
        values: rank,
        iterations: max_iter,
        converged: false,
    })
}

/// Principal eigenvector of the adjacency matrix on the largest connected
/// component, non-negative and normalized to unit Euclidean norm; all other
/// nodes score zero. Iterates on A + I so bipartite structures cannot
/// oscillate.
pub fn eigenvector_centrality(g: &SocialGraph) -> Result<FixedPoint> {
    if g.edge_count() == 0 {
        return Err(Error::EmptyInput {
            what: "graph edges",
        });
    }
    let component = g.largest_component();
    let n = g.node_count();
    let tol = 1e-10;
    let max_iter = 100_000;
    let start = 1.0 / (component.len() as f64).sqrt();
    let mut vector = vec![0.0f64; n];
    for &v in &component {
        vector[v] = start;
    }
    let mut next = vec![0.0f64; n];
    for iter in 0..max_iter {
        for &v in &component {
            let mut acc = vector[v]; // the +I shift
            for &w in g.neighbors(v) {
                acc += vector[w as usize];
            }
            next[v] = acc;
        }
        let norm: f64 = component
            .iter()
            .map(|&v| next[v] * next[v])
            .sum::<f64>()
            .sqrt();
        for &v in &component {
            next[v] /= norm;
        }
        let delta = component
            .iter()
            .map(|&v| (vector[v] - next[v]).abs())
            .fold(0.0f64, f64::max);
        for &v in &component {
            vector[v] = next[v];
        }
        if delta < tol {
            return Ok(FixedPoint {
                values: vector,
                iterations: iter + 1,
                converged: true,
            });
        }
    }
    Ok(FixedPoint {
        values: vector,
        iterations: max_iter,
        converged: false,
    })
}

/// Component-local closeness: (|C| - 1) divided by the sum of distances to
/// the other nodes of the component. Isolated nodes score zero.
pub fn closeness_centrality(g: &SocialGraph) -> Vec<f64> {
    let n = g.node_count();
    let mut out = vec![0.0f64; n];
    for component in g.components() {
        if component.len() < 2 {
            continue;
        }
        let size = component.len() as f64;
        for &v in &component {
            let dist = g.bfs_distances(v);
            let total: usize = component.iter().map(|&w| dist[w]).sum();
            out[v] = (size - 1.0) / total as f64;
        }
    }
    out
}

/// Shortest-path betweenness over unordered node pairs, unnormalized:
/// per-source breadth-first search with dependency accumulation over the
/// shortest-path DAG.
pub fn betweenness_centrality(g: &SocialGraph) -> Vec<f64> {
    let n = g.node_count();
    let mut centrality = vec![0.0f64; n];
    let mut stack: Vec<usize> = Vec::with_capacity(n);
    let mut preds: Vec<Vec<u32>> = vec![Vec::new(); n];
    let mut sigma = vec![0.0f64; n];
    let mut dist = vec![-1i64; n];
    let mut delta = vec![0.0f64; n];
    let mut queue = std::collections::VecDeque::new();

    for s in 0..n {
        stack.clear();
        queue.clear();
        for v in 0..n {
            preds[v].clear();
            sigma[v] = 0.0;
            dist[v] = -1;
            delta[v] = 0.0;
        }
        sigma[s] = 1.0;
        dist[s] = 0;
        queue.push_back(s);
        while let Some(v) = queue.pop_front() {
            stack.push(v);
            for &w in g.neighbors(v) {
                let w = w as usize;
                if dist[w] < 0 {
                    dist[w] = dist[v] + 1;
                    queue.push_back(w);
                }
                if dist[w] == dist[v] + 1 {
                    sigma[w] += sigma[v];
                    preds[w].push(v as u32);
                }
            }
        }
        while let Some(w) = stack.pop() {
            for &v in &preds[w] {
                let v = v as usize;
                delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
            }
            if w != s {
                centrality[w] += delta[w];
            }
        }
    }
    // Each unordered pair was accumulated from both endpoints.
    for c in centrality.iter_mut() {
        *c /= 2.0;
    }
    centrality
}

/// Betweenness rescaled by the unordered pair count (n-1)(n-2)/2.
pub fn betweenness_centrality_normalized(g: &SocialGraph) -> Vec<f64> {
    let n = g.node_count();
    let mut values = betweenness_centrality(g);
    if n > 2 {
        let pairs = ((n - 1) * (n - 2)) as f64 / 2.0;
        for v in values.iter_mut() {
            *v /= pairs;
        }
    }
    values
}

/// Which centrality backs a PSC score.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Centrality {
    PageRank,
    Eigenvector,
    Closeness,
    Betweenness,
}

impl Centrality {
    pub const ALL: [Centrality; 4] = [
        Centrality::PageRank,
        Centrality::Eigenvector,
        Centrality::Closeness,
        Centrality::Betweenness,
    ];

    pub fn model_kind(&self) -> ModelKind {
        match self {
            Centrality::PageRank => ModelKind::PscPrc,
            Centrality::Eigenvector => ModelKind::PscEvc,
            Centrality::Closeness => ModelKind::PscCc,
            Centrality::Betweenness => ModelKind::PscBc,
        }
    }
}

impl FromStr for Centrality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "prc" | "pagerank" => Ok(Centrality::PageRank),
            "evc" | "eigenvector" => Ok(Centrality::Eigenvector),
            "cc" | "closeness" => Ok(Centrality::Closeness),
            "bc" | "betweenness" => Ok(Centrality::Betweenness),
            other => Err(Error::UnknownModel(format!("centrality {other}"))),
        }
    }
}

/// The chosen centrality vector labeled as a privacy score.
pub fn score_psc(g: &SocialGraph, method: Centrality, damping: f64) -> Result<ScoreVector> {
    let values = match method {
        Centrality::PageRank => pagerank(g, damping, 1e-10, 10_000)?.values,
        Centrality::Eigenvector => eigenvector_centrality(g)?.values,
        Centrality::Closeness => closeness_centrality(g),
        Centrality::Betweenness => betweenness_centrality(g),
    };
    ScoreVector::new(g.registry_arc(), method.model_kind(), values)
}

/// Network-aware propagation of an intrinsic score vector: the fixed point
/// of a damped random walk seeded by the normalized intrinsic mass, then
/// rescaled so the output range matches the intrinsic range.
pub fn score_psna(
    g: &SocialGraph,
    rho: &ScoreVector,
    damping: f64,
    tol: f64,
    max_iter: usize,
) -> Result<(ScoreVector, bool)> {
    if !(0.0..1.0).contains(&damping) {
        return Err(Error::BadDamping(damping));
    }
    let n = g.node_count();
    if rho.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: rho.len(),
        });
    }
    let values = rho.values();
    if values.iter().any(|&v| v < 0.0) {
        return Err(Error::Config(
            "intrinsic scores must be non-negative for propagation".into(),
        ));
    }
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let rho_range = hi - lo;
    if rho_range <= 0.0 {
        return Err(Error::DegenerateRange);
    }
    let mass: f64 = values.iter().sum();
    let inject: Vec<f64> = values.iter().map(|&v| (1.0 - damping) * v / mass).collect();

    let mut p = vec![1.0 / n as f64; n];
    let mut next = vec![0.0f64; n];
    let mut converged = false;
    for _ in 0..max_iter {
        let dangling: f64 = (0..n).filter(|&v| g.degree(v) == 0).map(|v| p[v]).sum();
        let dangling_share = damping * dangling / n as f64;
        for (slot, &inj) in next.iter_mut().zip(&inject) {
            *slot = inj + dangling_share;
        }
        for v in 0..n {
            let deg = g.degree(v);
            if deg == 0 {
                continue;
            }
            let share = damping * p[v] / deg as f64;
            for &w in g.neighbors(v) {
                next[w as usize] += share;
            }
        }
        let delta = p
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        std::mem::swap(&mut p, &mut next);
        if delta < tol {
            converged = true;
            break;
        }
    }

    let p_lo = p.iter().cloned().fold(f64::INFINITY, f64::min);
    let p_hi = p.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let p_range = p_hi - p_lo;
    if p_range <= 0.0 {
        return Err(Error::DegenerateRange);
    }
    let scale = rho_range / p_range;
    let rescaled: Vec<f64> = p.iter().map(|&v| v * scale).collect();
    Ok((
        ScoreVector::new(g.registry_arc(), ModelKind::Psna, rescaled)?,
        converged,
    ))
}

/// Whole-graph descriptive metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphStats {
    pub nodes: usize,
    pub edges: usize,
    /// Mean local clustering coefficient over all nodes (degree < 2 counts
    /// as zero).
    pub avg_clustering: f64,
    /// Largest distance within the largest connected component.
    pub diameter: usize,
    /// Mean distance over unordered pairs of the largest component.
    pub avg_path_length: f64,
}

pub fn graph_stats(g: &SocialGraph) -> GraphStats {
    let n = g.node_count();
    if n == 0 || g.edge_count() == 0 {
        return GraphStats {
            nodes: n,
            edges: 0,
            avg_clustering: 0.0,
            diameter: 0,
            avg_path_length: 0.0,
        };
    }

    // Local clustering: fraction of closed wedges around each node.
    let mut is_neighbor = vec![false; n];
    let mut clustering_sum = 0.0f64;
    for v in 0..n {
        let deg = g.degree(v);
        if deg < 2 {
            continue;
        }
        for &w in g.neighbors(v) {
            is_neighbor[w as usize] = true;
        }
        let mut links = 0usize;
        for &w in g.neighbors(v) {
            for &x in g.neighbors(w as usize) {
                if x > w && is_neighbor[x as usize] {
                    links += 1;
                }
            }
        }
        for &w in g.neighbors(v) {
            is_neighbor[w as usize] = false;
        }
        clustering_sum += 2.0 * links as f64 / (deg * (deg - 1)) as f64;
    }

    // Diameter and mean distance on the largest component via all-pairs BFS.
    let component = g.largest_component();
    let mut diameter = 0usize;
    let mut total_distance: u64 = 0;
    for &v in &component {
        let dist = g.bfs_distances(v);
        for &w in &component {
            if w > v {
                diameter = diameter.max(dist[w]);
                total_distance += dist[w] as u64;
            }
        }
    }
    let pairs = component.len() as u64 * (component.len() as u64 - 1) / 2;
    GraphStats {
        nodes: n,
        edges: g.edge_count(),
        avg_clustering: clustering_sum / n as f64,
        diameter,
        avg_path_length: if pairs > 0 {
            total_distance as f64 / pairs as f64
        } else {
            0.0
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::UserRegistry;
    use proptest::prelude::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn registry(n: usize) -> Arc<UserRegistry> {
        Arc::new(UserRegistry::new((0..n).map(|j| format!("u{j:03}")).collect()).unwrap())
    }

    fn graph(n: usize, edges: &[(usize, usize)]) -> SocialGraph {
        SocialGraph::from_edges(registry(n), edges.iter().copied())
            .unwrap()
            .0
    }

    fn cycle(n: usize) -> SocialGraph {
        let edges: Vec<(usize, usize)> = (0..n).map(|v| (v, (v + 1) % n)).collect();
        graph(n, &edges)
    }

    fn path(n: usize) -> SocialGraph {
        let edges: Vec<(usize, usize)> = (0..n - 1).map(|v| (v, v + 1)).collect();
        graph(n, &edges)
    }

    fn complete(n: usize) -> SocialGraph {
        let mut edges = Vec::new();
        for a in 0..n {
            for b in (a + 1)..n {
                edges.push((a, b));
            }
        }
        graph(n, &edges)
    }

    /// Direct dense solve of the PageRank fixed-point system by Gaussian
    /// elimination, dangling mass folded into the coefficient matrix.
    fn pagerank_dense_solve(g: &SocialGraph, d: f64) -> Vec<f64> {
        let n = g.node_count();
        let mut a = vec![0.0f64; n * n];
        let mut b = vec![(1.0 - d) / n as f64; n];
        for r in 0..n {
            a[r * n + r] = 1.0;
        }
        for c in 0..n {
            let deg = g.degree(c);
            if deg == 0 {
                for r in 0..n {
                    a[r * n + c] -= d / n as f64;
                }
            } else {
                for &r in g.neighbors(c) {
                    a[(r as usize) * n + c] -= d / deg as f64;
                }
            }
        }
        for col in 0..n {
            let mut pivot = col;
            for row in (col + 1)..n {
                if a[row * n + col].abs() > a[pivot * n + col].abs() {
                    pivot = row;
                }
            }
            for k in 0..n {
                a.swap(col * n + k, pivot * n + k);
            }
            b.swap(col, pivot);
            let diag = a[col * n + col];
            for row in (col + 1)..n {
                let f = a[row * n + col] / diag;
                for k in col..n {
                    a[row * n + k] -= f * a[col * n + k];
                }
                b[row] -= f * b[col];
            }
        }
        let mut x = vec![0.0f64; n];
        for row in (0..n).rev() {
            let mut acc = b[row];
            for k in (row + 1)..n {
                acc -= a[row * n + k] * x[k];
            }
            x[row] = acc / a[row * n + row];
        }
        x
    }

    /// Exhaustive betweenness: enumerate every shortest path of every pair
    /// by depth-first search bounded by the BFS distance layering.
    fn betweenness_brute_force(g: &SocialGraph) -> Vec<f64> {
        let n = g.node_count();
        let mut out = vec![0.0f64; n];
        for s in 0..n {
            let dist = g.bfs_distances(s);
            for t in (s + 1)..n {
                if dist[t] == usize::MAX {
                    continue;
                }
                let mut paths: Vec<Vec<usize>> = Vec::new();
                let mut current = vec![s];
                enumerate_paths(g, &dist, t, &mut current, &mut paths);
                let total = paths.len() as f64;
                let mut through = vec![0usize; n];
                for p in &paths {
                    for &v in &p[1..p.len() - 1] {
                        through[v] += 1;
                    }
                }
                for v in 0..n {
                    if v != s && v != t && through[v] > 0 {
                        out[v] += through[v] as f64 / total;
                    }
                }
            }
        }
        out
    }

    fn enumerate_paths(
        g: &SocialGraph,
        dist: &[usize],
        target: usize,
        current: &mut Vec<usize>,
        paths: &mut Vec<Vec<usize>>,
    ) {
        let last = *current.last().unwrap();
        if last == target {
            paths.push(current.clone());
            return;
        }
        for &w in g.neighbors(last) {
            let w = w as usize;
            if dist[w] == dist[last] + 1 && dist[w] <= dist[target] {
                current.push(w);
                enumerate_paths(g, dist, target, current, paths);
                current.pop();
            }
        }
    }

    fn random_graph(n: usize, p: f64, rng: &mut ChaCha8Rng) -> SocialGraph {
        let mut edges = Vec::new();
        for a in 0..n {
            for b in (a + 1)..n {
                if rng.random::<f64>() < p {
                    edges.push((a, b));
                }
            }
        }
        graph(n, &edges)
    }

    #[test]
    fn construction_dedups_and_drops_self_loops() {
        let (g, report) =
            SocialGraph::from_edges(registry(3), vec![(0, 1), (1, 0), (0, 1), (2, 2), (1, 2)])
                .unwrap();
        assert_eq!(g.edge_count(), 2);
        assert_eq!(report.self_loops_dropped, 1);
        assert_eq!(report.duplicates_dropped, 2);
        assert_eq!(g.degree(1), 2);
        assert_eq!(g.edges(), vec![(0, 1), (1, 2)]);
    }

    #[test]
    fn pagerank_uniform_on_cycle() {
        let g = cycle(6);
        let pr = pagerank(&g, 0.85, 1e-12, 10_000).unwrap();
        assert!(pr.converged);
        for &v in &pr.values {
            assert!((v - 1.0 / 6.0).abs() < 1e-10);
        }
        let total: f64 = pr.values.iter().sum();
        assert!((total - 1.0).abs() < 1e-10);
    }

    #[test]
    fn pagerank_star_matches_linear_solve() {
        let g = graph(4, &[(0, 1), (0, 2), (0, 3)]);
        let pr = pagerank(&g, 0.85, 1e-14, 100_000).unwrap();
        let exact = pagerank_dense_solve(&g, 0.85);
        for (a, b) in pr.values.iter().zip(&exact) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
        assert!(pr.values[0] > pr.values[1]);
    }

    #[test]
    fn pagerank_zero_damping_is_uniform() {
        let g = graph(5, &[(0, 1), (1, 2), (0, 2), (3, 4)]);
        let pr = pagerank(&g, 0.0, 1e-12, 100).unwrap();
        for &v in &pr.values {
            assert!((v - 0.2).abs() < 1e-12);
        }
    }

    #[test]
    fn pagerank_rejects_bad_damping() {
        let g = cycle(3);
        assert!(matches!(
            pagerank(&g, 1.0, 1e-10, 10),
            Err(Error::BadDamping(_))
        ));
    }

    #[test]
    fn eigenvector_complete_graph_is_uniform() {
        let g = complete(4);
        let ev = eigenvector_centrality(&g).unwrap();
        for &v in &ev.values {
            assert!((v - 0.5).abs() < 1e-9);
        }
    }

    #[test]
    fn eigenvector_path_center_dominates() {
        let g = path(3);
        let ev = eigenvector_centrality(&g).unwrap();
        assert!(ev.values[1] > ev.values[0]);
        assert!((ev.values[0] - ev.values[2]).abs() < 1e-9);
    }

    #[test]
    fn eigenvector_matches_dense_eigensolve() {
        let g = graph(
            6,
            &[(0, 1), (0, 2), (1, 2), (2, 3), (3, 4), (3, 5), (4, 5), (1, 4)],
        );
        let ev = eigenvector_centrality(&g).unwrap();
        let mut dense = nalgebra::DMatrix::<f64>::zeros(6, 6);
        for (a, b) in g.edges() {
            dense[(a, b)] = 1.0;
            dense[(b, a)] = 1.0;
        }
        let eigen = nalgebra::SymmetricEigen::new(dense);
        let mut top = 0;
        for k in 1..6 {
            if eigen.eigenvalues[k] > eigen.eigenvalues[top] {
                top = k;
            }
        }
        let mut reference: Vec<f64> = eigen.eigenvectors.column(top).iter().copied().collect();
        if reference[0] < 0.0 {
            for r in reference.iter_mut() {
                *r = -*r;
            }
        }
        for (a, b) in ev.values.iter().zip(&reference) {
            assert!((a - b).abs() < 1e-7, "{a} vs {b}");
        }
    }

    #[test]
    fn eigenvector_handles_bipartite_graphs() {
        // A 4-cycle is bipartite; plain power iteration on A oscillates.
        let g = cycle(4);
        let ev = eigenvector_centrality(&g).unwrap();
        assert!(ev.converged);
        for &v in &ev.values {
            assert!((v - 0.5).abs() < 1e-9);
        }
    }

    #[test]
    fn closeness_hand_values() {
        let g = complete(5);
        for v in closeness_centrality(&g) {
            assert!((v - 1.0).abs() < 1e-12);
        }
        let g = path(3);
        let cc = closeness_centrality(&g);
        assert!((cc[1] - 1.0).abs() < 1e-12);
        assert!((cc[0] - 2.0 / 3.0).abs() < 1e-12);
        let g = graph(5, &[(0, 1), (0, 2), (0, 3), (0, 4)]);
        assert!((closeness_centrality(&g)[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn closeness_is_component_local() {
        // Two disjoint edges plus an isolated node.
        let g = graph(5, &[(0, 1), (2, 3)]);
        let cc = closeness_centrality(&g);
        assert!((cc[0] - 1.0).abs() < 1e-12);
        assert!((cc[2] - 1.0).abs() < 1e-12);
        assert_eq!(cc[4], 0.0);
    }

    #[test]
    fn betweenness_hand_values() {
        let g = complete(5);
        assert!(betweenness_centrality(&g).iter().all(|&v| v == 0.0));
        let g = path(5);
        let bc = betweenness_centrality(&g);
        assert!((bc[2] - 4.0).abs() < 1e-12);
        assert!(bc[0].abs() < 1e-12);
        assert!((bc[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn betweenness_matches_exhaustive_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for _ in 0..40 {
            let n = rng.random_range(2..=10);
            let p = rng.random_range(0.15..0.8);
            let g = random_graph(n, p, &mut rng);
            let fast = betweenness_centrality(&g);
            let slow = betweenness_brute_force(&g);
            for (a, b) in fast.iter().zip(&slow) {
                assert!((a - b).abs() < 1e-9, "n={n}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn normalized_betweenness_scales_pairs() {
        let g = path(5);
        let normalized = betweenness_centrality_normalized(&g);
        assert!((normalized[2] - 4.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn psc_labels_models() {
        let g = cycle(5);
        let s = score_psc(&g, Centrality::PageRank, 0.85).unwrap();
        assert_eq!(s.model(), ModelKind::PscPrc);
        let s = score_psc(&g, Centrality::Betweenness, 0.85).unwrap();
        assert_eq!(s.model(), ModelKind::PscBc);
    }

    #[test]
    fn psna_zero_damping_returns_intrinsic() {
        let g = graph(4, &[(0, 1), (1, 2), (2, 3)]);
        let rho =
            ScoreVector::new(g.registry_arc(), ModelKind::Psi, vec![3.0, 0.5, 2.0, 0.0]).unwrap();
        let (psna, converged) = score_psna(&g, &rho, 0.0, 1e-12, 1000).unwrap();
        assert!(converged);
        for (a, b) in psna.values().iter().zip(rho.values()) {
            assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn psna_two_node_matches_hand_solve() {
        let g = graph(2, &[(0, 1)]);
        let rho = ScoreVector::new(g.registry_arc(), ModelKind::Psi, vec![1.0, 0.0]).unwrap();
        let (psna, _) = score_psna(&g, &rho, 0.5, 1e-15, 100_000).unwrap();
        // Fixed point: p0 = 2/3, p1 = 1/3; range rescale restores span 1.
        assert!((psna.values()[0] - 2.0).abs() < 1e-12);
        assert!((psna.values()[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn psna_rejects_flat_intrinsic() {
        let g = graph(2, &[(0, 1)]);
        let rho = ScoreVector::new(g.registry_arc(), ModelKind::Psi, vec![1.0, 1.0]).unwrap();
        assert!(matches!(
            score_psna(&g, &rho, 0.5, 1e-12, 100),
            Err(Error::DegenerateRange)
        ));
    }

    #[test]
    fn psna_respects_graph_symmetry() {
        // Rotation by two nodes is an automorphism of the cycle that
        // preserves this alternating intrinsic pattern.
        let g = cycle(6);
        let rho = ScoreVector::new(
            g.registry_arc(),
            ModelKind::Psi,
            vec![1.0, 2.0, 1.0, 2.0, 1.0, 2.0],
        )
        .unwrap();
        let (psna, _) = score_psna(&g, &rho, 0.5, 1e-14, 100_000).unwrap();
        for j in 0..6 {
            let r = (j + 2) % 6;
            assert!((psna.values()[j] - psna.values()[r]).abs() < 1e-10);
        }
    }

    /// Fixed point of the raw propagation operator x -> dTx + (1-d)rho,
    /// without the mass normalization; this operator is monotone in rho.
    fn psna_pre_normalization(g: &SocialGraph, rho: &[f64], d: f64) -> Vec<f64> {
        let n = g.node_count();
        let mut p = vec![1.0 / n as f64; n];
        for _ in 0..200_000 {
            let mut next: Vec<f64> = rho.iter().map(|&v| (1.0 - d) * v).collect();
            for v in 0..n {
                let deg = g.degree(v);
                if deg == 0 {
                    continue;
                }
                let share = d * p[v] / deg as f64;
                for &w in g.neighbors(v) {
                    next[w as usize] += share;
                }
            }
            let delta = p
                .iter()
                .zip(&next)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            p = next;
            if delta < 1e-15 {
                break;
            }
        }
        p
    }

    #[test]
    fn psna_monotone_in_neighbor_score() {
        let g = graph(6, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 0), (1, 4)]);
        let base = vec![1.0, 0.2, 0.4, 0.9, 0.1, 0.3];
        for bump in [0.1, 0.5, 1.0] {
            let before = psna_pre_normalization(&g, &base, 0.5);
            let mut raised = base.clone();
            raised[1] += bump;
            let after = psna_pre_normalization(&g, &raised, 0.5);
            assert!(after[0] >= before[0] - 1e-12);
        }
    }

    #[test]
    fn stats_triangle_and_path() {
        let g = complete(3);
        let stats = graph_stats(&g);
        assert!((stats.avg_clustering - 1.0).abs() < 1e-12);
        assert_eq!(stats.diameter, 1);
        assert!((stats.avg_path_length - 1.0).abs() < 1e-12);

        let g = path(4);
        let stats = graph_stats(&g);
        assert_eq!(stats.avg_clustering, 0.0);
        assert_eq!(stats.diameter, 3);
        assert!((stats.avg_path_length - 5.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn stats_empty_graph_is_zeroed() {
        let g = graph(3, &[]);
        let stats = graph_stats(&g);
        assert_eq!(stats.edges, 0);
        assert_eq!(stats.diameter, 0);
    }

    proptest! {
        // Pagerank sums to one and stays positive for damping < 1.
        #[test]
        fn pagerank_is_a_distribution(
            seed in 0u64..500,
            n in 2usize..12,
            p in 0.1f64..0.9,
            d in 0.0f64..0.95,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = random_graph(n, p, &mut rng);
            let pr = pagerank(&g, d, 1e-12, 100_000).unwrap();
            let total: f64 = pr.values.iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-10);
            for &v in &pr.values {
                prop_assert!(v > 0.0);
            }
        }

        // Centralities are equivariant under node relabeling.
        #[test]
        fn centralities_are_isomorphism_equivariant(
            seed in 0u64..200,
            n in 3usize..10,
            p in 0.2f64..0.8,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = random_graph(n, p, &mut rng);
            let relabeled: Vec<(usize, usize)> =
                g.edges().iter().map(|&(a, b)| (n - 1 - a, n - 1 - b)).collect();
            let h = graph(n, &relabeled);
            let bc_g = betweenness_centrality(&g);
            let bc_h = betweenness_centrality(&h);
            let cc_g = closeness_centrality(&g);
            let cc_h = closeness_centrality(&h);
            let pr_g = pagerank(&g, 0.85, 1e-13, 100_000).unwrap().values;
            let pr_h = pagerank(&h, 0.85, 1e-13, 100_000).unwrap().values;
            for v in 0..n {
                prop_assert!((bc_g[v] - bc_h[n - 1 - v]).abs() < 1e-9);
                prop_assert!((cc_g[v] - cc_h[n - 1 - v]).abs() < 1e-12);
                prop_assert!((pr_g[v] - pr_h[n - 1 - v]).abs() < 1e-9);
            }
        }
    }
}
