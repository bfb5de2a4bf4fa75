//! Byte-count granularity measurement and discrete level assignment.
//!
//! Shared data is measured as the UTF-8 byte length of its normalized text.
//! Per item, the nonzero byte counts are split into up to `l` levels with an
//! exact dynamic-programming solution of the one-dimensional k-means problem
//! (minimum within-cluster sum of squared deviations over contiguous
//! clusters of the sorted values). Zero bytes is never clustered: it is the
//! reserved no-share level 0.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::matrix::{GranularityLevelMatrix, GranularityMatrix};

/// Separator inserted between list entries when an item holds several
/// (e.g. multiple education records), counted as one byte.
pub const ENTRY_SEPARATOR: char = ';';

/// Byte length of the UTF-8 encoding of `entry` after collapsing whitespace
/// runs to single spaces and trimming the ends. Empty or whitespace-only
/// entries measure 0 (no share).
pub fn measure_bytes(entry: &str) -> u64 {
    let mut bytes = 0u64;
    let mut pending_space = false;
    for token in entry.split_whitespace() {
        if pending_space {
            bytes += 1;
        }
        bytes += token.len() as u64;
        pending_space = true;
    }
    bytes
}

/// Byte count of several list entries joined by [`ENTRY_SEPARATOR`].
/// Entries that normalize to empty are skipped entirely.
pub fn measure_joined_bytes<'a, I>(entries: I) -> u64
where
    I: IntoIterator<Item = &'a str>,
{
    let mut total = 0u64;
    let mut seen = false;
    for entry in entries {
        let b = measure_bytes(entry);
        if b == 0 {
            continue;
        }
        if seen {
            total += ENTRY_SEPARATOR.len_utf8() as u64;
        }
        total += b;
        seen = true;
    }
    total
}

/// Optimal partition of a value multiset into contiguous clusters.
#[derive(Debug, Clone)]
pub struct Clustering {
    /// Cluster id (0-based, ascending in value) per input element, in the
    /// original input order.
    pub assignments: Vec<usize>,
    /// Mean of each cluster, ascending.
    pub means: Vec<f64>,
    /// Element count of each cluster.
    pub sizes: Vec<usize>,
    /// Total within-cluster sum of squared deviations.
    pub within_ss: f64,
    /// Cluster count that was asked for.
    pub k_requested: usize,
    /// Cluster count actually produced (reduced when the input has fewer
    /// distinct values than requested clusters).
    pub k_effective: usize,
}

impl Clustering {
    /// True when `k_requested` exceeded the distinct-value count.
    pub fn reduced(&self) -> bool {
        self.k_effective < self.k_requested
    }
}

/// Exact 1-D k-means via dynamic programming over the sorted distinct
/// values, weighted by multiplicity. Equal values always land in the same
/// cluster, and the result minimizes the within-cluster sum of squared
/// deviations over all contiguous partitions.
pub fn ckmeans_1d(values: &[f64], k: usize) -> Result<Clustering> {
    if values.is_empty() {
        return Err(Error::EmptyInput { what: "values" });
    }
    if k == 0 {
        return Err(Error::ZeroClusters);
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteValue);
    }

    // Sort indices so assignments can be reported in input order.
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());

    // Distinct values with multiplicities.
    let mut distinct: Vec<(f64, usize)> = Vec::new();
    for &idx in &order {
        let v = values[idx];
        match distinct.last_mut() {
            Some((last, count)) if *last == v => *count += 1,
            _ => distinct.push((v, 1)),
        }
    }
    let m = distinct.len();
    let k_eff = k.min(m);

    // Shift by the median distinct value to keep the prefix sums well
    // conditioned, then build weighted prefix sums.
    let shift = distinct[m / 2].0;
    let mut w_pre = vec![0.0; m + 1];
    let mut s_pre = vec![0.0; m + 1];
    let mut q_pre = vec![0.0; m + 1];
    for (t, &(v, c)) in distinct.iter().enumerate() {
        let x = v - shift;
        let w = c as f64;
        w_pre[t + 1] = w_pre[t] + w;
        s_pre[t + 1] = s_pre[t] + w * x;
        q_pre[t + 1] = q_pre[t] + w * x * x;
    }
    // Within-cluster SSE of distinct values a..=b (inclusive).
    let cost = |a: usize, b: usize| -> f64 {
        let w = w_pre[b + 1] - w_pre[a];
        let s = s_pre[b + 1] - s_pre[a];
        let q = q_pre[b + 1] - q_pre[a];
        (q - s * s / w).max(0.0)
    };

    // dp[c][t]: minimal SSE of clustering distinct values 0..=t into c+1
    // clusters; cut[c][t]: first distinct index of the last cluster.
    let mut dp = vec![vec![0.0f64; m]; k_eff];
    let mut cut = vec![vec![0usize; m]; k_eff];
    for t in 0..m {
        dp[0][t] = cost(0, t);
    }
    for c in 1..k_eff {
        for t in c..m {
            let mut best = f64::INFINITY;
            let mut best_s = c;
            for s in c..=t {
                let candidate = dp[c - 1][s - 1] + cost(s, t);
                if candidate < best {
                    best = candidate;
                    best_s = s;
                }
            }
            dp[c][t] = best;
            cut[c][t] = best_s;
        }
    }

    // Backtrack cluster boundaries over distinct indices.
    let mut starts = vec![0usize; k_eff];
    let mut end = m - 1;
    for c in (0..k_eff).rev() {
        let s = if c == 0 { 0 } else { cut[c][end] };
        starts[c] = s;
        if c > 0 {
            end = s - 1;
        }
    }

    // Cluster id per distinct value, then per input element.
    let mut cluster_of_distinct = vec![0usize; m];
    for c in 0..k_eff {
        let hi = if c + 1 < k_eff { starts[c + 1] } else { m };
        for item in cluster_of_distinct.iter_mut().take(hi).skip(starts[c]) {
            *item = c;
        }
    }
    let mut means = vec![0.0f64; k_eff];
    let mut sizes = vec![0usize; k_eff];
    for c in 0..k_eff {
        let lo = starts[c];
        let hi = if c + 1 < k_eff { starts[c + 1] } else { m };
        let w = w_pre[hi] - w_pre[lo];
        means[c] = (s_pre[hi] - s_pre[lo]) / w + shift;
        sizes[c] = w as usize;
    }

    let mut assignments = vec![0usize; values.len()];
    let mut pos = 0usize;
    for (t, &(_, count)) in distinct.iter().enumerate() {
        for _ in 0..count {
            assignments[order[pos]] = cluster_of_distinct[t];
            pos += 1;
        }
    }

    Ok(Clustering {
        assignments,
        means,
        sizes,
        within_ss: dp[k_eff - 1][m - 1],
        k_requested: k,
        k_effective: k_eff,
    })
}

/// Per-item byte thresholds separating the nonzero levels of one item.
#[derive(Debug, Clone)]
pub struct LevelAssignment {
    /// Item index the assignment belongs to.
    pub item: usize,
    /// Smallest byte count of each level above 1; strictly increasing.
    /// A cell with `bytes >= boundaries[t]` is at least at level `t + 2`.
    pub boundaries: Vec<u64>,
    /// Mean byte count per nonzero level, ascending.
    pub cluster_means: Vec<f64>,
}

/// Assigns discrete granularity levels per item: zero-byte cells stay at
/// level 0, and the nonzero byte counts of each item row are clustered into
/// at most `max_level` levels, numbered 1.. in increasing byte order.
pub fn build_level_matrix(
    gm: &GranularityMatrix,
    max_level: u8,
) -> Result<(GranularityLevelMatrix, Vec<LevelAssignment>)> {
    if max_level < 1 {
        return Err(Error::Config("max level must be at least 1".into()));
    }
    let n_items = gm.item_count();
    let n_users = gm.user_count();
    let mut cells = vec![0u8; n_items * n_users];
    let mut assignments = Vec::with_capacity(n_items);

    for i in 0..n_items {
        let row = gm.row(i);
        let nonzero: Vec<f64> = row.iter().filter(|&&b| b > 0).map(|&b| b as f64).collect();
        if nonzero.is_empty() {
            assignments.push(LevelAssignment {
                item: i,
                boundaries: Vec::new(),
                cluster_means: Vec::new(),
            });
            continue;
        }
        let clustering = ckmeans_1d(&nonzero, max_level as usize)?;

        // Boundary of level c+1 = smallest byte value assigned to cluster c.
        let mut level_min = vec![u64::MAX; clustering.k_effective];
        let mut pos = 0usize;
        for (j, &bytes) in row.iter().enumerate() {
            if bytes == 0 {
                continue;
            }
            let c = clustering.assignments[pos];
            pos += 1;
            cells[i * n_users + j] = (c + 1) as u8;
            level_min[c] = level_min[c].min(bytes);
        }
        assignments.push(LevelAssignment {
            item: i,
            boundaries: level_min[1..].to_vec(),
            cluster_means: clustering.means.clone(),
        });
    }

    let glm = GranularityLevelMatrix::new(gm.catalog_arc(), gm.registry_arc(), cells, max_level)?;
    Ok((glm, assignments))
}

/// Builds a granularity matrix by measuring normalized text payloads.
/// `entries(i, j)` yields the raw text of item `i` for user `j`.
pub fn measure_matrix<F>(
    catalog: Arc<crate::matrix::ItemCatalog>,
    registry: Arc<crate::matrix::UserRegistry>,
    mut entries: F,
) -> Result<GranularityMatrix>
where
    F: FnMut(usize, usize) -> String,
{
    let n_items = catalog.len();
    let n_users = registry.len();
    let mut cells = Vec::with_capacity(n_items * n_users);
    for i in 0..n_items {
        for j in 0..n_users {
            cells.push(measure_bytes(&entries(i, j)));
        }
    }
    GranularityMatrix::new(catalog, registry, cells)
}
