//! Frequency-based sensitivities, visibilities, and the PSN / PSGN scores.
//!
//! Everything here is a pure function of a response or level matrix. Sums
//! accumulate left-to-right in index order so results are reproducible.

use crate::error::Result;
use crate::matrix::{GranularityLevelMatrix, ModelKind, ResponseMatrix, ScoreVector};

/// Which denominators the visibility product uses.
///
/// The standard form divides the item share count by the number of users and
/// the user share count by the number of items, so both factors are
/// probabilities. The legacy form swaps the two denominators and is kept
/// only for comparison runs; its factors can exceed 1 when `n != N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VisibilityForm {
    #[default]
    Standard,
    LegacySwapped,
}

/// Frequency-derived sensitivity and visibility probabilities.
#[derive(Debug, Clone)]
pub struct NaiveItemStats {
    /// Per-item sensitivity: fraction of users hiding the item.
    pub sensitivity: Vec<f64>,
    /// Per-item visibility probability |R_i| / N.
    pub item_visibility: Vec<f64>,
    /// Per-user visibility probability |R^j| / n.
    pub user_visibility: Vec<f64>,
}

pub fn naive_item_stats(r: &ResponseMatrix) -> NaiveItemStats {
    let n_items = r.item_count() as f64;
    let n_users = r.user_count() as f64;
    let sensitivity = r
        .row_share_counts()
        .iter()
        .map(|&c| (n_users - c as f64) / n_users)
        .collect();
    let item_visibility = r
        .row_share_counts()
        .iter()
        .map(|&c| c as f64 / n_users)
        .collect();
    let user_visibility = r
        .column_share_counts()
        .iter()
        .map(|&c| c as f64 / n_items)
        .collect();
    NaiveItemStats {
        sensitivity,
        item_visibility,
        user_visibility,
    }
}

/// Per-item sensitivity (N - |R_i|) / N.
pub fn naive_sensitivity(r: &ResponseMatrix) -> Vec<f64> {
    naive_item_stats(r).sensitivity
}

/// Per-cell visibility, row-major n×N.
pub fn naive_visibility(r: &ResponseMatrix) -> Vec<f64> {
    naive_visibility_with(r, VisibilityForm::Standard)
}

pub fn naive_visibility_with(r: &ResponseMatrix, form: VisibilityForm) -> Vec<f64> {
    let n_items = r.item_count() as f64;
    let n_users = r.user_count() as f64;
    let row_counts = r.row_share_counts();
    let col_counts = r.column_share_counts();
    let (item_div, user_div) = match form {
        VisibilityForm::Standard => (n_users, n_items),
        VisibilityForm::LegacySwapped => (n_items, n_users),
    };
    let mut cells = Vec::with_capacity(r.item_count() * r.user_count());
    for &ri in &row_counts {
        let p_item = ri as f64 / item_div;
        for &cj in &col_counts {
            cells.push(p_item * (cj as f64 / user_div));
        }
    }
    cells
}

/// Policy-based naive score: per user, the sensitivity-weighted sum of
/// visibilities over all items.
pub fn score_psn(r: &ResponseMatrix) -> ScoreVector {
    score_psn_with(r, VisibilityForm::Standard)
}

pub fn score_psn_with(r: &ResponseMatrix, form: VisibilityForm) -> ScoreVector {
    let stats = naive_item_stats(r);
    let visibility = naive_visibility_with(r, form);
    let n_users = r.user_count();
    let mut values = vec![0.0f64; n_users];
    for i in 0..r.item_count() {
        let beta = stats.sensitivity[i];
        let row = &visibility[i * n_users..(i + 1) * n_users];
        for (j, &v) in row.iter().enumerate() {
            values[j] += beta * v;
        }
    }
    ScoreVector::new(r.registry_arc(), ModelKind::Psn, values)
        .expect("naive scores are finite by construction")
}

/// Frequency-derived per-level sensitivities and share probabilities.
#[derive(Debug, Clone)]
pub struct NaiveGradedStats {
    /// Per-(item, level) sensitivity, row-major n×(l+1); non-decreasing in
    /// the level for each item.
    pub sensitivity: Vec<f64>,
    /// Per-(item, user, level) share probability, ((i * N) + j) * (l+1) + k.
    pub probability: Vec<f64>,
    pub max_level: u8,
}

pub fn naive_graded_stats(glm: &GranularityLevelMatrix) -> NaiveGradedStats {
    NaiveGradedStats {
        sensitivity: naive_graded_sensitivity(glm),
        probability: naive_graded_probability(glm),
        max_level: glm.max_level(),
    }
}

/// Per-(item, level) sensitivity, row-major n×(l+1). Level 0 is always 0;
/// level k counts the users below level k.
pub fn naive_graded_sensitivity(glm: &GranularityLevelMatrix) -> Vec<f64> {
    let n_users = glm.user_count() as f64;
    let levels = glm.max_level() as usize;
    let mut out = vec![0.0f64; glm.item_count() * (levels + 1)];
    for i in 0..glm.item_count() {
        let row = glm.row(i);
        for k in 1..=levels {
            let at_least = row.iter().filter(|&&c| c as usize >= k).count();
            out[i * (levels + 1) + k] = (n_users - at_least as f64) / n_users;
        }
    }
    out
}

/// Per-(item, user, level) share probability under the independence
/// assumption, flattened as ((i * N) + j) * (l+1) + k.
pub fn naive_graded_probability(glm: &GranularityLevelMatrix) -> Vec<f64> {
    let n_items = glm.item_count();
    let n_users = glm.user_count();
    let levels = glm.max_level() as usize;

    // Fraction of users at level k for item i, and of items at level k for
    // user j.
    let mut item_frac = vec![0.0f64; n_items * (levels + 1)];
    let mut user_frac = vec![0.0f64; n_users * (levels + 1)];
    for i in 0..n_items {
        for (j, &c) in glm.row(i).iter().enumerate() {
            item_frac[i * (levels + 1) + c as usize] += 1.0;
            user_frac[j * (levels + 1) + c as usize] += 1.0;
        }
    }
    for v in item_frac.iter_mut() {
        *v /= n_users as f64;
    }
    for v in user_frac.iter_mut() {
        *v /= n_items as f64;
    }

    let mut out = vec![0.0f64; n_items * n_users * (levels + 1)];
    for i in 0..n_items {
        for j in 0..n_users {
            for k in 0..=levels {
                out[(i * n_users + j) * (levels + 1) + k] =
                    item_frac[i * (levels + 1) + k] * user_frac[j * (levels + 1) + k];
            }
        }
    }
    out
}

/// Granularity-based naive score: expected level weighted by per-level
/// sensitivity, summed over items. The zero level contributes nothing.
pub fn score_psgn(glm: &GranularityLevelMatrix) -> Result<ScoreVector> {
    let n_items = glm.item_count();
    let n_users = glm.user_count();
    let levels = glm.max_level() as usize;
    let stats = naive_graded_stats(glm);

    let mut values = vec![0.0f64; n_users];
    for i in 0..n_items {
        for (j, value) in values.iter_mut().enumerate() {
            for k in 1..=levels {
                let b = stats.sensitivity[i * (levels + 1) + k];
                let p = stats.probability[(i * n_users + j) * (levels + 1) + k];
                *value += b * p * k as f64;
            }
        }
    }
    ScoreVector::new(glm.registry_arc(), ModelKind::Psgn, values)
}
