//! Latent-trait scoring: the two-parameter logistic model for share/hide
//! responses (PSI) and the graded response model for granularity levels
//! (PSGI).
//!
//! Both models are fitted by marginal maximum likelihood over a
//! standard-normal attitude prior; user attitudes are expected-a-posteriori
//! estimates. The latent scale is identified by the prior alone — no
//! post-hoc normalization of the attitudes is applied. Item sensitivities
//! may legitimately come out negative (widely shared items), so PSI and
//! PSGI scores can be negative too.

mod em;
mod quadrature;

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::matrix::{
    GranularityLevelMatrix, ModelKind, ResponseMatrix, ScoreVector, UserRegistry,
};
use em::{fit_ordinal_em, sigmoid, OrdinalData};

pub use quadrature::gauss_hermite_normal;

/// Smallest user count the marginal fits accept.
pub const MIN_FIT_USERS: usize = 30;

/// Knobs for the marginal maximum likelihood fits.
#[derive(Debug, Clone)]
pub struct FitConfig {
    /// Gauss–Hermite node count for the latent prior.
    pub quad_points: usize,
    /// Convergence threshold on the largest parameter change per iteration.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub alpha_min: f64,
    pub alpha_max: f64,
    /// Perturbs the starting discriminations; identical items always get
    /// identical starts regardless of the seed.
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            quad_points: 21,
            tolerance: 1e-4,
            max_iterations: 500,
            alpha_min: 0.05,
            alpha_max: 10.0,
            seed: 0,
        }
    }
}

/// An item left out of the likelihood, with the reason.
#[derive(Debug, Clone)]
pub struct ExcludedItem {
    pub item: usize,
    pub reason: String,
}

/// Fitted discrimination and sensitivity per dichotomous item. Entries of
/// excluded items hold zeros and are skipped by every consumer here.
#[derive(Debug, Clone)]
pub struct ItemParams {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub excluded: Vec<ExcludedItem>,
}

impl ItemParams {
    pub fn item_count(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_fitted(&self, item: usize) -> bool {
        !self.excluded.iter().any(|e| e.item == item)
    }
}

/// One fitted cumulative threshold: the attitude at which sharing item data
/// at `level` or above becomes the even-odds choice.
#[derive(Debug, Clone, Copy)]
pub struct LevelThreshold {
    pub level: u8,
    pub beta: f64,
}

/// Fitted graded response parameters: one discrimination per item and one
/// strictly increasing threshold per observed nonzero level.
#[derive(Debug, Clone)]
pub struct GradedItemParams {
    pub alpha: Vec<f64>,
    pub thresholds: Vec<Vec<LevelThreshold>>,
    pub excluded: Vec<ExcludedItem>,
    pub max_level: u8,
}

impl GradedItemParams {
    pub fn item_count(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_fitted(&self, item: usize) -> bool {
        !self.thresholds[item].is_empty()
    }
}

/// Estimated per-user attitudes.
#[derive(Debug, Clone)]
pub struct AbilityVector {
    registry: Arc<UserRegistry>,
    values: Vec<f64>,
    method: &'static str,
}

impl AbilityVector {
    pub fn new(registry: Arc<UserRegistry>, values: Vec<f64>, method: &'static str) -> Self {
        Self {
            registry,
            values,
            method,
        }
    }

    pub fn registry(&self) -> &UserRegistry {
        &self.registry
    }

    pub fn registry_arc(&self) -> Arc<UserRegistry> {
        Arc::clone(&self.registry)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn method(&self) -> &'static str {
        self.method
    }
}

/// Everything a fit produces besides the parameters themselves.
#[derive(Debug, Clone)]
pub struct FitReport {
    pub log_likelihood: f64,
    /// Marginal log likelihood after each iteration, non-decreasing.
    pub ll_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct Fit2pl {
    pub params: ItemParams,
    pub abilities: AbilityVector,
    pub report: FitReport,
}

#[derive(Debug, Clone)]
pub struct FitGrm {
    pub params: GradedItemParams,
    pub abilities: AbilityVector,
    pub report: FitReport,
}

fn check_user_count(n_users: usize) -> Result<()> {
    if n_users < MIN_FIT_USERS {
        return Err(Error::TooFewUsers {
            required: MIN_FIT_USERS,
            actual: n_users,
        });
    }
    Ok(())
}

/// Fits the two-parameter logistic model to a share/hide matrix. Items with
/// constant responses are excluded from the likelihood and reported.
pub fn fit_2pl(r: &ResponseMatrix, config: &FitConfig) -> Result<Fit2pl> {
    check_user_count(r.user_count())?;
    let n_items = r.item_count();
    let n_users = r.user_count();

    let mut excluded = Vec::new();
    let mut fitted_items = Vec::new();
    for i in 0..n_items {
        let ones = r.row(i).iter().filter(|&&c| c == 1).count();
        if ones == 0 {
            excluded.push(ExcludedItem {
                item: i,
                reason: "all responses hidden".into(),
            });
        } else if ones == n_users {
            excluded.push(ExcludedItem {
                item: i,
                reason: "all responses shared".into(),
            });
        } else {
            fitted_items.push(i);
        }
    }
    if fitted_items.is_empty() {
        return Err(Error::Config(
            "no items left to fit: every item has constant responses".into(),
        ));
    }

    let mut cats = Vec::with_capacity(fitted_items.len() * n_users);
    for &i in &fitted_items {
        cats.extend_from_slice(r.row(i));
    }
    let data = OrdinalData {
        n_users,
        cats,
        n_cats: vec![2; fitted_items.len()],
    };
    let outcome = fit_ordinal_em(&data, config);

    let mut alpha = vec![0.0; n_items];
    let mut beta = vec![0.0; n_items];
    for (pos, &i) in fitted_items.iter().enumerate() {
        alpha[i] = outcome.alpha[pos];
        beta[i] = outcome.thresholds[pos][0];
    }

    Ok(Fit2pl {
        params: ItemParams {
            alpha,
            beta,
            excluded,
        },
        abilities: AbilityVector::new(r.registry_arc(), outcome.theta, "EAP"),
        report: FitReport {
            log_likelihood: outcome.log_likelihood,
            ll_history: outcome.ll_history,
            iterations: outcome.iterations,
            converged: outcome.converged,
        },
    })
}

/// Fits the graded response model to a level matrix. Items observed at a
/// single level are excluded; items observed at a strict subset of levels
/// collapse to that subset (e.g. levels {0, 3} fit one threshold).
pub fn fit_grm(glm: &GranularityLevelMatrix, config: &FitConfig) -> Result<FitGrm> {
    check_user_count(glm.user_count())?;
    let n_items = glm.item_count();
    let n_users = glm.user_count();

    let mut excluded = Vec::new();
    let mut fitted_items = Vec::new();
    let mut observed_levels: Vec<Vec<u8>> = Vec::new();
    for i in 0..n_items {
        let mut seen = [false; 256];
        for &c in glm.row(i) {
            seen[c as usize] = true;
        }
        let levels: Vec<u8> = (0..=glm.max_level()).filter(|&k| seen[k as usize]).collect();
        if levels.len() < 2 {
            excluded.push(ExcludedItem {
                item: i,
                reason: format!("single observed level {}", levels[0]),
            });
        } else {
            fitted_items.push(i);
            observed_levels.push(levels);
        }
    }
    if fitted_items.is_empty() {
        return Err(Error::Config(
            "no items left to fit: every item has a single observed level".into(),
        ));
    }

    let mut cats = Vec::with_capacity(fitted_items.len() * n_users);
    let mut n_cats = Vec::with_capacity(fitted_items.len());
    for (pos, &i) in fitted_items.iter().enumerate() {
        let levels = &observed_levels[pos];
        n_cats.push(levels.len());
        for &c in glm.row(i) {
            let rank = levels.iter().position(|&l| l == c).unwrap();
            cats.push(rank as u8);
        }
    }
    let data = OrdinalData {
        n_users,
        cats,
        n_cats,
    };
    let outcome = fit_ordinal_em(&data, config);

    let mut alpha = vec![0.0; n_items];
    let mut thresholds = vec![Vec::new(); n_items];
    for (pos, &i) in fitted_items.iter().enumerate() {
        alpha[i] = outcome.alpha[pos];
        thresholds[i] = outcome.thresholds[pos]
            .iter()
            .enumerate()
            .map(|(t, &beta)| LevelThreshold {
                level: observed_levels[pos][t + 1],
                beta,
            })
            .collect();
    }

    Ok(FitGrm {
        params: GradedItemParams {
            alpha,
            thresholds,
            excluded,
            max_level: glm.max_level(),
        },
        abilities: AbilityVector::new(glm.registry_arc(), outcome.theta, "EAP"),
        report: FitReport {
            log_likelihood: outcome.log_likelihood,
            ll_history: outcome.ll_history,
            iterations: outcome.iterations,
            converged: outcome.converged,
        },
    })
}

/// Logistic share probability of one item for one attitude.
pub fn logistic_visibility(alpha: f64, beta: f64, theta: f64) -> f64 {
    sigmoid(alpha * (theta - beta))
}

/// Model-implied visibility per cell, row-major n×N. Excluded items get 0.
pub fn irt_visibility(params: &ItemParams, theta: &AbilityVector) -> Vec<f64> {
    let n_users = theta.values().len();
    let mut cells = vec![0.0; params.item_count() * n_users];
    for i in 0..params.item_count() {
        if !params.is_fitted(i) {
            continue;
        }
        for (j, &t) in theta.values().iter().enumerate() {
            cells[i * n_users + j] = logistic_visibility(params.alpha[i], params.beta[i], t);
        }
    }
    cells
}

/// Policy-based latent-trait score: sensitivity-weighted visibility summed
/// over the fitted items.
pub fn score_psi(params: &ItemParams, theta: &AbilityVector) -> Result<ScoreVector> {
    let n_users = theta.values().len();
    let visibility = irt_visibility(params, theta);
    let mut values = vec![0.0; n_users];
    for i in 0..params.item_count() {
        if !params.is_fitted(i) {
            continue;
        }
        let beta = params.beta[i];
        for (j, value) in values.iter_mut().enumerate() {
            *value += beta * visibility[i * n_users + j];
        }
    }
    ScoreVector::new(theta.registry_arc(), ModelKind::Psi, values)
}

/// Per-(item, user, level) category probabilities under the graded model,
/// flattened as ((i * N) + j) * (l+1) + k. Levels an item never exhibited
/// get probability zero; each fitted (item, user) row sums to one.
pub fn grm_level_probability(params: &GradedItemParams, theta: &AbilityVector) -> Vec<f64> {
    let n_users = theta.values().len();
    let stride = params.max_level as usize + 1;
    let mut out = vec![0.0; params.item_count() * n_users * stride];
    for i in 0..params.item_count() {
        let ths = &params.thresholds[i];
        if ths.is_empty() {
            continue;
        }
        for (j, &t) in theta.values().iter().enumerate() {
            let base = (i * n_users + j) * stride;
            // Cumulative curves at this attitude, then successive
            // differences; the first observed level absorbs the remainder.
            let mut prev = 1.0;
            let mut prev_level = 0usize;
            for th in ths {
                let cum = logistic_visibility(params.alpha[i], th.beta, t);
                out[base + prev_level] = prev - cum;
                prev = cum;
                prev_level = th.level as usize;
            }
            out[base + prev_level] = prev;
        }
    }
    out
}

/// Granularity-based latent-trait score: expected level weighted by the
/// per-level sensitivities, summed over fitted items.
pub fn score_psgi(params: &GradedItemParams, theta: &AbilityVector) -> Result<ScoreVector> {
    let n_users = theta.values().len();
    let stride = params.max_level as usize + 1;
    let probs = grm_level_probability(params, theta);
    let mut values = vec![0.0; n_users];
    for i in 0..params.item_count() {
        for th in &params.thresholds[i] {
            let k = th.level as usize;
            for (j, value) in values.iter_mut().enumerate() {
                let p = probs[(i * n_users + j) * stride + k];
                *value += th.beta * p * k as f64;
            }
        }
    }
    ScoreVector::new(theta.registry_arc(), ModelKind::Psgi, values)
}

/// Category probabilities from cumulative curves with one discrimination
/// per level, differenced in level order.
///
/// This is a non-default reading kept for comparison: with distinct slopes
/// the cumulative curves cross for extreme attitudes, and the differenced
/// "probabilities" then come out negative. The fitted model always uses
/// one discrimination per item, which keeps the curves ordered.
pub fn per_level_category_probabilities(curves: &[(f64, f64)], theta: f64) -> Vec<f64> {
    let mut cumulative = Vec::with_capacity(curves.len() + 2);
    cumulative.push(1.0);
    for &(alpha, beta) in curves {
        cumulative.push(sigmoid(alpha * (theta - beta)));
    }
    cumulative.push(0.0);
    cumulative.windows(2).map(|w| w[0] - w[1]).collect()
}

/// Cumulative item characteristic curve P(level >= k | theta) sampled over
/// an attitude grid. The (item, level) pair must have a fitted threshold.
pub fn item_characteristic_curve(
    params: &GradedItemParams,
    item: usize,
    level: u8,
    theta_grid: &[f64],
) -> Result<Vec<f64>> {
    if item >= params.item_count() {
        return Err(Error::UnknownItem(item));
    }
    let threshold = params.thresholds[item]
        .iter()
        .find(|th| th.level == level)
        .ok_or(Error::UnknownLevel { item, level })?;
    Ok(theta_grid
        .iter()
        .map(|&t| logistic_visibility(params.alpha[item], threshold.beta, t))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{GranularityLevelMatrix, ItemCatalog, ResponseMatrix};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn registry(n: usize) -> Arc<UserRegistry> {
        Arc::new(UserRegistry::new((0..n).map(|j| format!("u{j:04}")).collect()).unwrap())
    }

    fn catalog(n: usize) -> Arc<ItemCatalog> {
        Arc::new(ItemCatalog::new((0..n).map(|i| format!("item{i}")).collect()).unwrap())
    }

    fn abilities(values: Vec<f64>) -> AbilityVector {
        AbilityVector::new(registry(values.len()), values, "fixed")
    }

    /// Dichotomous response sample from known 2PL parameters.
    fn simulate_2pl(
        alpha: &[f64],
        beta: &[f64],
        theta: &[f64],
        rng: &mut ChaCha8Rng,
    ) -> ResponseMatrix {
        let n_items = alpha.len();
        let n_users = theta.len();
        let mut cells = Vec::with_capacity(n_items * n_users);
        for i in 0..n_items {
            for &t in theta {
                let p = logistic_visibility(alpha[i], beta[i], t);
                cells.push(u8::from(rng.random::<f64>() < p));
            }
        }
        ResponseMatrix::new(catalog(n_items), registry(n_users), cells).unwrap()
    }

    #[test]
    fn visibility_closed_forms() {
        assert!((logistic_visibility(2.0, 0.7, 0.7) - 0.5).abs() < 1e-15);
        let v = logistic_visibility(1.0, 0.0, 3.0f64.ln());
        assert!((v - 0.75).abs() < 1e-12);
        assert!(logistic_visibility(1.5, 0.0, -60.0) < 1e-30);
    }

    #[test]
    fn psi_closed_form() {
        let params = ItemParams {
            alpha: vec![1.0, 1.0],
            beta: vec![1.0, -1.0],
            excluded: vec![],
        };
        let theta = abilities(vec![0.0]);
        let psi = score_psi(&params, &theta).unwrap();
        let e = std::f64::consts::E;
        let expected = 1.0 / (1.0 + e) - 1.0 / (1.0 + 1.0 / e);
        assert!((psi.values()[0] - expected).abs() < 1e-12);
    }

    #[test]
    fn psi_zero_when_sensitivity_zero() {
        let params = ItemParams {
            alpha: vec![2.0],
            beta: vec![0.0],
            excluded: vec![],
        };
        let theta = abilities(vec![-1.0, 0.3, 2.0]);
        let psi = score_psi(&params, &theta).unwrap();
        assert!(psi.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn grm_probabilities_closed_form() {
        let params = GradedItemParams {
            alpha: vec![1.0],
            thresholds: vec![vec![
                LevelThreshold {
                    level: 1,
                    beta: -1.0,
                },
                LevelThreshold { level: 2, beta: 0.0 },
                LevelThreshold { level: 3, beta: 1.0 },
            ]],
            excluded: vec![],
            max_level: 3,
        };
        let theta = abilities(vec![0.0]);
        let p = grm_level_probability(&params, &theta);
        // P(level = 1) = sigmoid(1) - 1/2 at theta = 0.
        let expected = 1.0 / (1.0 + (-1.0f64).exp()) - 0.5;
        assert!((p[1] - expected).abs() < 1e-12);
        let total: f64 = p[..4].iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        // Midpoint of the level-2 curve.
        assert!((logistic_visibility(params.alpha[0], 0.0, 0.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn grm_probability_rows_sum_to_one() {
        let params = GradedItemParams {
            alpha: vec![1.7, 0.6],
            thresholds: vec![
                vec![
                    LevelThreshold {
                        level: 1,
                        beta: -0.8,
                    },
                    LevelThreshold {
                        level: 3,
                        beta: 0.9,
                    },
                ],
                vec![LevelThreshold { level: 2, beta: 0.1 }],
            ],
            excluded: vec![],
            max_level: 3,
        };
        let theta = abilities(vec![-2.5, -0.4, 0.0, 1.3, 4.0]);
        let p = grm_level_probability(&params, &theta);
        for i in 0..2 {
            for j in 0..5 {
                let base = (i * 5 + j) * 4;
                let total: f64 = p[base..base + 4].iter().sum();
                assert!((total - 1.0).abs() < 1e-12, "row sum {total}");
                // Level 2 is unobserved for item 0, level 1 and 3 for item 1.
                if i == 0 {
                    assert_eq!(p[base + 2], 0.0);
                } else {
                    assert_eq!(p[base + 1], 0.0);
                    assert_eq!(p[base + 3], 0.0);
                }
            }
        }
    }

    #[test]
    fn psgi_closed_form_single_item() {
        let params = GradedItemParams {
            alpha: vec![1.0],
            thresholds: vec![vec![LevelThreshold { level: 1, beta: 1.0 }]],
            excluded: vec![],
            max_level: 3,
        };
        let theta = abilities(vec![1.0]);
        let psgi = score_psgi(&params, &theta).unwrap();
        assert!((psgi.values()[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn icc_midpoint_and_ordering() {
        let params = GradedItemParams {
            alpha: vec![2.0],
            thresholds: vec![vec![
                LevelThreshold {
                    level: 1,
                    beta: -1.0,
                },
                LevelThreshold { level: 2, beta: 0.5 },
                LevelThreshold { level: 3, beta: 2.0 },
            ]],
            excluded: vec![],
            max_level: 3,
        };
        let curve = item_characteristic_curve(&params, 0, 2, &[0.5]).unwrap();
        assert!((curve[0] - 0.5).abs() < 1e-12);
        // Higher levels are everywhere harder.
        let grid: Vec<f64> = (-40..=40).map(|t| t as f64 / 10.0).collect();
        let c1 = item_characteristic_curve(&params, 0, 1, &grid).unwrap();
        let c2 = item_characteristic_curve(&params, 0, 2, &grid).unwrap();
        let c3 = item_characteristic_curve(&params, 0, 3, &grid).unwrap();
        for q in 0..grid.len() {
            assert!(c1[q] >= c2[q] && c2[q] >= c3[q]);
        }
        // Monotone in theta.
        for w in c2.windows(2) {
            assert!(w[0] <= w[1]);
        }
        assert!(matches!(
            item_characteristic_curve(&params, 1, 1, &grid),
            Err(Error::UnknownItem(1))
        ));
        assert!(matches!(
            item_characteristic_curve(&params, 0, 0, &grid),
            Err(Error::UnknownLevel { .. })
        ));
    }

    #[test]
    fn icc_slope_scales_with_discrimination() {
        let slope = |alpha: f64| {
            let h = 1e-6;
            (logistic_visibility(alpha, 0.0, h) - logistic_visibility(alpha, 0.0, -h)) / (2.0 * h)
        };
        assert!((slope(1.0) - 0.25).abs() < 1e-6);
        assert!((slope(2.4) - 0.6).abs() < 1e-6);
    }

    #[test]
    fn per_level_discriminations_can_cross() {
        // Shared slope: a proper distribution at any attitude.
        let shared = per_level_category_probabilities(&[(1.2, -1.0), (1.2, 0.5)], -3.0);
        assert!((shared.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(shared.iter().all(|&p| p >= 0.0));
        // Distinct slopes: the steeper upper curve overtakes the lower one
        // far from the thresholds, so a differenced category goes negative.
        let crossed = per_level_category_probabilities(&[(3.0, -1.0), (0.4, 0.5)], -4.0);
        assert!(crossed.iter().any(|&p| p < 0.0));
    }

    #[test]
    fn psi_preserves_attitude_order_under_positive_sensitivities() {
        let params = ItemParams {
            alpha: vec![1.3, 0.7, 2.1],
            beta: vec![0.4, 1.5, 0.1],
            excluded: vec![],
        };
        let theta = abilities(vec![-2.0, -0.5, 0.0, 0.3, 1.7]);
        let psi = score_psi(&params, &theta).unwrap();
        for pair in psi.values().windows(2) {
            assert!(pair[0] < pair[1]);
        }
    }

    #[test]
    fn share_rates_track_model_visibility() {
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        let alpha = [1.2, 0.8, 1.7, 1.0, 1.5, 0.9, 1.1, 1.9];
        let beta = [-1.8, -1.0, -0.4, -0.1, 0.3, 0.8, 1.2, 1.9];
        let theta: Vec<f64> = (0..1200)
            .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
            .collect();
        let r = simulate_2pl(&alpha, &beta, &theta, &mut rng);
        let fit = fit_2pl(&r, &FitConfig::default()).unwrap();
        let visibility = irt_visibility(&fit.params, &fit.abilities);
        let n_users = r.user_count();
        let share_rates: Vec<f64> = (0..8)
            .map(|i| r.row_share_count(i).unwrap() as f64 / n_users as f64)
            .collect();
        let mean_visibility: Vec<f64> = (0..8)
            .map(|i| visibility[i * n_users..(i + 1) * n_users].iter().sum::<f64>() / n_users as f64)
            .collect();
        let r = crate::eval::pearson(&share_rates, &mean_visibility).unwrap();
        assert!(r > 0.9, "share rate vs visibility correlation {r}");
    }

    #[test]
    fn frequency_and_latent_sensitivities_rank_similarly_but_differ() {
        let mut rng = ChaCha8Rng::seed_from_u64(71);
        let alpha = [0.6, 1.9, 1.1, 0.7, 1.5, 0.9, 1.3, 1.8, 0.8, 1.2];
        let beta = [-1.9, -1.2, -0.8, -0.4, 0.0, 0.3, 0.7, 1.1, 1.5, 1.9];
        let theta: Vec<f64> = (0..1500)
            .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
            .collect();
        let r = simulate_2pl(&alpha, &beta, &theta, &mut rng);
        let fit = fit_2pl(&r, &FitConfig::default()).unwrap();
        let naive = crate::naive::naive_sensitivity(&r);
        let latent: Vec<f64> = fit.params.beta.clone();
        let rank_r = crate::eval::spearman(&naive, &latent).unwrap();
        assert!(rank_r > 0.5, "rank correlation {rank_r}");
        // The two scales measure different things; agreement is loose.
        assert!(rank_r < 1.0 - 1e-9 || {
            let linear = crate::eval::pearson(&naive, &latent).unwrap();
            linear < 1.0 - 1e-6
        });
    }

    #[test]
    fn fit_rejects_tiny_samples() {
        let r = ResponseMatrix::new(catalog(2), registry(10), vec![1; 20]).unwrap();
        assert!(matches!(
            fit_2pl(&r, &FitConfig::default()),
            Err(Error::TooFewUsers { .. })
        ));
    }

    #[test]
    fn fit_2pl_recovers_signal_and_reports_monotone_ll() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let alpha = [1.4, 0.8, 2.0, 1.0, 1.6, 0.6];
        let beta = [-1.5, -0.6, 0.0, 0.4, 1.0, 1.8];
        let theta: Vec<f64> = (0..900)
            .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
            .collect();
        let r = simulate_2pl(&alpha, &beta, &theta, &mut rng);
        let fit = fit_2pl(&r, &FitConfig::default()).unwrap();
        assert!(fit.report.converged);
        for w in fit.report.ll_history.windows(2) {
            assert!(
                w[1] >= w[0] - 1e-7 * (1.0 + w[0].abs()),
                "log likelihood decreased: {} -> {}",
                w[0],
                w[1]
            );
        }
        // Coarse recovery at this modest sample size.
        for i in 0..6 {
            assert!(
                (fit.params.beta[i] - beta[i]).abs() < 0.45,
                "beta[{i}] {} vs {}",
                fit.params.beta[i],
                beta[i]
            );
        }
        // Attitude scale centered by the prior.
        let mean: f64 =
            fit.abilities.values().iter().sum::<f64>() / fit.abilities.values().len() as f64;
        assert!(mean.abs() <= 0.1);
        assert_eq!(fit.abilities.method(), "EAP");
    }

    #[test]
    fn identical_items_get_identical_parameters() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let theta: Vec<f64> = (0..300)
            .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
            .collect();
        let single = simulate_2pl(&[1.2], &[0.3], &theta, &mut rng);
        let mut cells = single.row(0).to_vec();
        cells.extend_from_slice(single.row(0));
        let r = ResponseMatrix::new(catalog(2), registry(300), cells).unwrap();
        let fit = fit_2pl(&r, &FitConfig::default()).unwrap();
        assert!((fit.params.alpha[0] - fit.params.alpha[1]).abs() < 1e-6);
        assert!((fit.params.beta[0] - fit.params.beta[1]).abs() < 1e-6);
    }

    #[test]
    fn mirrored_item_lands_on_the_other_side() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let theta: Vec<f64> = (0..600)
            .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
            .collect();
        let base = simulate_2pl(&[1.5, 1.0], &[0.6, -0.2], &theta, &mut rng);
        let mut cells = base.row(0).to_vec();
        let inverted: Vec<u8> = base.row(0).iter().map(|&c| 1 - c).collect();
        cells.extend_from_slice(&inverted);
        cells.extend_from_slice(base.row(1));
        let r = ResponseMatrix::new(catalog(3), registry(600), cells).unwrap();
        let fit = fit_2pl(&r, &FitConfig::default()).unwrap();
        assert!(fit.params.beta[0] > 0.0);
        assert!(fit.params.beta[1] < 0.0);
    }

    #[test]
    fn degenerate_items_are_excluded_not_fatal() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let theta: Vec<f64> = (0..200)
            .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
            .collect();
        let base = simulate_2pl(&[1.0], &[0.0], &theta, &mut rng);
        let mut cells = base.row(0).to_vec();
        cells.extend_from_slice(&[1u8; 200]);
        cells.extend_from_slice(&[0u8; 200]);
        let r = ResponseMatrix::new(catalog(3), registry(200), cells).unwrap();
        let fit = fit_2pl(&r, &FitConfig::default()).unwrap();
        assert_eq!(fit.params.excluded.len(), 2);
        assert!(fit.params.is_fitted(0));
        assert!(!fit.params.is_fitted(1));
        assert!(!fit.params.is_fitted(2));
        let psi = score_psi(&fit.params, &fit.abilities).unwrap();
        assert!(psi.values().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn fit_invariant_to_user_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let theta: Vec<f64> = (0..240)
            .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
            .collect();
        let r = simulate_2pl(&[1.3, 0.9, 1.8], &[-0.7, 0.2, 0.9], &theta, &mut rng);
        let fit = fit_2pl(&r, &FitConfig::default()).unwrap();

        let n_users = r.user_count();
        let mut cells = Vec::with_capacity(3 * n_users);
        for i in 0..3 {
            let mut row = r.row(i).to_vec();
            row.reverse();
            cells.extend_from_slice(&row);
        }
        let reversed = ResponseMatrix::new(catalog(3), registry(n_users), cells).unwrap();
        let fit_rev = fit_2pl(&reversed, &FitConfig::default()).unwrap();

        for i in 0..3 {
            assert!(
                (fit.params.alpha[i] - fit_rev.params.alpha[i]).abs() < 1e-8,
                "alpha[{i}]: {} vs {} (diff {:e})",
                fit.params.alpha[i],
                fit_rev.params.alpha[i],
                (fit.params.alpha[i] - fit_rev.params.alpha[i]).abs()
            );
            assert!((fit.params.beta[i] - fit_rev.params.beta[i]).abs() < 1e-8);
        }
        for j in 0..n_users {
            let a = fit.abilities.values()[j];
            let b = fit_rev.abilities.values()[n_users - 1 - j];
            assert!((a - b).abs() < 1e-8);
        }
    }

    /// Graded sample from known GRM parameters.
    fn simulate_grm_levels(
        alpha: &[f64],
        thresholds: &[Vec<f64>],
        levels: &[Vec<u8>],
        theta: &[f64],
        max_level: u8,
        rng: &mut ChaCha8Rng,
    ) -> GranularityLevelMatrix {
        let n_items = alpha.len();
        let n_users = theta.len();
        let mut cells = Vec::with_capacity(n_items * n_users);
        for i in 0..n_items {
            let m = thresholds[i].len() + 1;
            for &t in theta {
                let mut cum = vec![1.0; m + 1];
                cum[m] = 0.0;
                for (pos, &b) in thresholds[i].iter().enumerate() {
                    cum[pos + 1] = logistic_visibility(alpha[i], b, t);
                }
                let u = rng.random::<f64>();
                let mut acc = 0.0;
                let mut chosen = m - 1;
                for c in 0..m {
                    acc += cum[c] - cum[c + 1];
                    if u < acc {
                        chosen = c;
                        break;
                    }
                }
                cells.push(levels[i][chosen]);
            }
        }
        GranularityLevelMatrix::new(catalog(n_items), registry(n_users), cells, max_level).unwrap()
    }

    #[test]
    fn fit_grm_recovers_ordered_thresholds() {
        let mut rng = ChaCha8Rng::seed_from_u64(97);
        let alpha = [1.5, 0.9, 1.2, 1.8];
        let thresholds = vec![
            vec![-1.2, 0.0, 1.1],
            vec![-0.5, 0.6, 1.5],
            vec![-1.5, -0.3, 0.8],
            vec![0.2, 1.0, 1.9],
        ];
        let levels: Vec<Vec<u8>> = vec![vec![0, 1, 2, 3]; 4];
        let theta: Vec<f64> = (0..1200)
            .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
            .collect();
        let glm = simulate_grm_levels(&alpha, &thresholds, &levels, &theta, 3, &mut rng);
        let fit = fit_grm(&glm, &FitConfig::default()).unwrap();
        assert!(fit.report.converged);
        for i in 0..4 {
            let fitted = &fit.params.thresholds[i];
            assert_eq!(fitted.len(), 3);
            for w in fitted.windows(2) {
                assert!(w[0].beta < w[1].beta, "thresholds out of order");
            }
            for (t, th) in fitted.iter().enumerate() {
                assert!(
                    (th.beta - thresholds[i][t]).abs() < 0.4,
                    "item {i} threshold {t}: {} vs {}",
                    th.beta,
                    thresholds[i][t]
                );
            }
        }
        for w in fit.report.ll_history.windows(2) {
            assert!(w[1] >= w[0] - 1e-7 * (1.0 + w[0].abs()));
        }
    }

    #[test]
    fn sparse_level_item_collapses_to_two_categories() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let theta: Vec<f64> = (0..400)
            .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
            .collect();
        // Item 0 only ever shows levels 0 and 3; item 1 is a full scale.
        let glm = simulate_grm_levels(
            &[1.1, 1.4],
            &[vec![0.4], vec![-1.0, 0.1, 1.2]],
            &[vec![0, 3], vec![0, 1, 2, 3]],
            &theta,
            3,
            &mut rng,
        );
        let fit = fit_grm(&glm, &FitConfig::default()).unwrap();
        assert_eq!(fit.params.thresholds[0].len(), 1);
        assert_eq!(fit.params.thresholds[0][0].level, 3);
        assert_eq!(fit.params.thresholds[1].len(), 3);
    }

    #[test]
    fn constant_level_item_is_excluded() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let theta: Vec<f64> = (0..150)
            .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
            .collect();
        let base = simulate_grm_levels(
            &[1.0],
            &[vec![-0.5, 0.5, 1.5]],
            &[vec![0, 1, 2, 3]],
            &theta,
            3,
            &mut rng,
        );
        let mut cells = base.row(0).to_vec();
        cells.extend_from_slice(&[2u8; 150]);
        let glm = GranularityLevelMatrix::new(catalog(2), registry(150), cells, 3).unwrap();
        let fit = fit_grm(&glm, &FitConfig::default()).unwrap();
        assert_eq!(fit.params.excluded.len(), 1);
        assert_eq!(fit.params.excluded[0].item, 1);
        assert!(fit.params.is_fitted(0));
        assert!(!fit.params.is_fitted(1));
    }
}
