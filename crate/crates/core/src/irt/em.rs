//! Marginal maximum likelihood for ordered-category logistic items.
//!
//! One engine serves both the dichotomous and the graded model: a binary
//! item is an ordered item with two categories. The latent attitude has a
//! standard-normal prior handled by fixed-node Gauss–Hermite quadrature;
//! expectation steps factorize over users, maximization steps over items.
//! Item updates run damped Newton on a transformed parameter vector
//! `(ln alpha, beta_1, ln gap_2, ..)` so discriminations stay positive and
//! thresholds stay strictly increasing by construction.

use super::quadrature::gauss_hermite_normal;
use super::FitConfig;

/// Compacted ordinal responses: `cats[i * n_users + j]` is the 0-based
/// category of user `j` on item `i`, each item having `n_cats[i] >= 2`
/// observed categories.
pub(super) struct OrdinalData {
    pub n_users: usize,
    pub cats: Vec<u8>,
    pub n_cats: Vec<usize>,
}

pub(super) struct EmOutcome {
    pub alpha: Vec<f64>,
    /// Per item, `n_cats[i] - 1` strictly increasing thresholds.
    pub thresholds: Vec<Vec<f64>>,
    /// Expected-a-posteriori attitude per user.
    pub theta: Vec<f64>,
    pub log_likelihood: f64,
    pub ll_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Numerically stable logistic.
pub(super) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

const PROB_FLOOR: f64 = 1e-12;

/// Cumulative curves evaluated at one node: out[0] = 1, out[m] = 0,
/// out[t] = sigmoid(alpha * (theta - beta_t)) in between.
fn cumulative(alpha: f64, betas: &[f64], theta: f64, out: &mut [f64]) {
    let m = betas.len() + 1;
    out[0] = 1.0;
    out[m] = 0.0;
    for (t, &b) in betas.iter().enumerate() {
        out[t + 1] = sigmoid(alpha * (theta - b));
    }
}

fn category_probs(alpha: f64, betas: &[f64], theta: f64, pstar: &mut [f64], probs: &mut [f64]) {
    cumulative(alpha, betas, theta, pstar);
    let m = betas.len() + 1;
    for c in 0..m {
        probs[c] = (pstar[c] - pstar[c + 1]).max(PROB_FLOOR);
    }
}

/// Transformed item parameters: u[0] = ln alpha, u[1] = first threshold,
/// u[t] = ln(beta_t - beta_{t-1}) for t >= 2.
fn pack(alpha: f64, betas: &[f64]) -> Vec<f64> {
    let mut u = Vec::with_capacity(betas.len() + 1);
    u.push(alpha.ln());
    u.push(betas[0]);
    for w in betas.windows(2) {
        u.push((w[1] - w[0]).ln());
    }
    u
}

fn unpack(u: &[f64]) -> (f64, Vec<f64>) {
    let alpha = u[0].exp();
    let mut betas = Vec::with_capacity(u.len() - 1);
    let mut b = u[1];
    betas.push(b);
    for &g in &u[2..] {
        b += g.exp();
        betas.push(b);
    }
    (alpha, betas)
}

fn clamp_packed(u: &mut [f64], config: &FitConfig) {
    u[0] = u[0].clamp(config.alpha_min.ln(), config.alpha_max.ln());
    u[1] = u[1].clamp(-35.0, 35.0);
    for g in u.iter_mut().skip(2) {
        *g = g.clamp(1e-6f64.ln(), 1e3f64.ln());
    }
}

/// Expected complete-data log likelihood terms for one item: `counts` is a
/// Q x m matrix of expected response counts per node and category.
struct ItemObjective<'a> {
    nodes: &'a [f64],
    counts: &'a [f64],
    m: usize,
}

impl ItemObjective<'_> {
    fn value(&self, u: &[f64]) -> f64 {
        let (alpha, betas) = unpack(u);
        let mut pstar = vec![0.0; self.m + 1];
        let mut probs = vec![0.0; self.m];
        let mut total = 0.0;
        for (q, &theta) in self.nodes.iter().enumerate() {
            category_probs(alpha, &betas, theta, &mut pstar, &mut probs);
            let row = &self.counts[q * self.m..(q + 1) * self.m];
            for c in 0..self.m {
                if row[c] > 0.0 {
                    total += row[c] * probs[c].ln();
                }
            }
        }
        total
    }

    /// Analytic gradient in the transformed space.
    fn gradient(&self, u: &[f64], out: &mut [f64]) {
        let (alpha, betas) = unpack(u);
        let m = self.m;
        let mut pstar = vec![0.0; m + 1];
        let mut probs = vec![0.0; m];
        let mut g_alpha = 0.0;
        let mut g_beta = vec![0.0; m - 1];
        for (q, &theta) in self.nodes.iter().enumerate() {
            category_probs(alpha, &betas, theta, &mut pstar, &mut probs);
            let row = &self.counts[q * self.m..(q + 1) * self.m];
            // Threshold t separates categories t-1 and t; moving it up
            // grows the lower category at the upper one's expense.
            for t in 1..m {
                let w = pstar[t] * (1.0 - pstar[t]);
                let lower = row[t - 1] / probs[t - 1];
                let upper = row[t] / probs[t];
                g_beta[t - 1] += alpha * w * (lower - upper);
            }
            // Category c sits between cumulative curves c and c+1; only the
            // interior curves move with alpha.
            for c in 0..m {
                let w_lo = if c == 0 {
                    0.0
                } else {
                    pstar[c] * (1.0 - pstar[c]) * (theta - betas[c - 1])
                };
                let w_hi = if c == m - 1 {
                    0.0
                } else {
                    pstar[c + 1] * (1.0 - pstar[c + 1]) * (theta - betas[c])
                };
                g_alpha += row[c] / probs[c] * (w_lo - w_hi);
            }
        }

        out[0] = alpha * g_alpha;
        // beta_1 shifts every threshold; gap t moves thresholds t and above.
        let mut suffix = vec![0.0; m];
        for t in (0..m - 1).rev() {
            suffix[t] = suffix[t + 1] + g_beta[t];
        }
        out[1] = suffix[0];
        for t in 2..=m - 1 {
            out[t] = u[t].exp() * suffix[t - 1];
        }
    }
}

/// Symmetric finite-difference Hessian of the analytic gradient.
fn fd_hessian(obj: &ItemObjective, u: &[f64]) -> Vec<f64> {
    let np = u.len();
    let mut h = vec![0.0; np * np];
    let mut gp = vec![0.0; np];
    let mut gm = vec![0.0; np];
    let mut up = u.to_vec();
    for p in 0..np {
        let step = 1e-5 * (1.0 + u[p].abs());
        up[p] = u[p] + step;
        obj.gradient(&up, &mut gp);
        up[p] = u[p] - step;
        obj.gradient(&up, &mut gm);
        up[p] = u[p];
        for r in 0..np {
            h[r * np + p] = (gp[r] - gm[r]) / (2.0 * step);
        }
    }
    for r in 0..np {
        for c in (r + 1)..np {
            let avg = 0.5 * (h[r * np + c] + h[c * np + r]);
            h[r * np + c] = avg;
            h[c * np + r] = avg;
        }
    }
    h
}

/// Gaussian elimination with partial pivoting for the tiny Newton systems.
fn solve_linear(matrix: &[f64], rhs: &[f64]) -> Option<Vec<f64>> {
    let n = rhs.len();
    let mut a = matrix.to_vec();
    let mut b = rhs.to_vec();
    for col in 0..n {
        let mut pivot = col;
        for row in (col + 1)..n {
            if a[row * n + col].abs() > a[pivot * n + col].abs() {
                pivot = row;
            }
        }
        if a[pivot * n + col].abs() < 1e-300 {
            return None;
        }
        if pivot != col {
            for k in 0..n {
                a.swap(col * n + k, pivot * n + k);
            }
            b.swap(col, pivot);
        }
        let diag = a[col * n + col];
        for row in (col + 1)..n {
            let factor = a[row * n + col] / diag;
            if factor == 0.0 {
                continue;
            }
            for k in col..n {
                a[row * n + k] -= factor * a[col * n + k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in (row + 1)..n {
            acc -= a[row * n + k] * x[k];
        }
        x[row] = acc / a[row * n + row];
    }
    Some(x)
}

/// Damped Newton ascent of one item's expected log likelihood. Guarantees
/// the objective never decreases, which keeps the outer EM monotone.
fn maximize_item(obj: &ItemObjective, u: &mut Vec<f64>, config: &FitConfig) {
    let np = u.len();
    let mut grad = vec![0.0; np];
    for _ in 0..10 {
        let current = obj.value(u);
        obj.gradient(u, &mut grad);
        let gmax = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        if gmax < 1e-10 {
            break;
        }
        let hess = fd_hessian(obj, u);
        let neg_grad: Vec<f64> = grad.iter().map(|g| -g).collect();
        let mut direction = match solve_linear(&hess, &neg_grad) {
            Some(d) => d,
            None => grad.clone(),
        };
        let slope: f64 = direction.iter().zip(&grad).map(|(d, g)| d * g).sum();
        if !slope.is_finite() || slope <= 0.0 {
            direction = grad.clone();
        }
        let mut step = 1.0;
        let mut improved = false;
        for _ in 0..40 {
            let mut candidate: Vec<f64> = u
                .iter()
                .zip(&direction)
                .map(|(v, d)| v + step * d)
                .collect();
            clamp_packed(&mut candidate, config);
            let value = obj.value(&candidate);
            if value.is_finite() && value > current {
                *u = candidate;
                improved = true;
                break;
            }
            step *= 0.5;
            if step < 1e-14 {
                break;
            }
        }
        if !improved {
            break;
        }
    }
}

struct EStep {
    log_likelihood: f64,
    /// N x Q normalized posterior node weights.
    posterior: Vec<f64>,
    /// Per item, Q x m expected category counts.
    counts: Vec<Vec<f64>>,
}

/// User indices sorted by response pattern. Accumulating the expected
/// counts in this order makes the fit bitwise invariant to user relabeling:
/// users tied in the ordering have identical patterns and therefore
/// contribute identical summands.
fn canonical_user_order(data: &OrdinalData) -> Vec<usize> {
    let n_items = data.n_cats.len();
    let n_users = data.n_users;
    let mut order: Vec<usize> = (0..n_users).collect();
    order.sort_unstable_by(|&a, &b| {
        for i in 0..n_items {
            let row = i * n_users;
            match data.cats[row + a].cmp(&data.cats[row + b]) {
                std::cmp::Ordering::Equal => continue,
                other => return other,
            }
        }
        std::cmp::Ordering::Equal
    });
    order
}

fn e_step(
    data: &OrdinalData,
    order: &[usize],
    nodes: &[f64],
    weights: &[f64],
    alpha: &[f64],
    thresholds: &[Vec<f64>],
) -> EStep {
    let n_items = data.n_cats.len();
    let n_users = data.n_users;
    let n_q = nodes.len();

    // Log category probabilities per item, node, category.
    let mut log_probs: Vec<Vec<f64>> = Vec::with_capacity(n_items);
    for i in 0..n_items {
        let m = data.n_cats[i];
        let mut table = vec![0.0; n_q * m];
        let mut pstar = vec![0.0; m + 1];
        let mut probs = vec![0.0; m];
        for (q, &theta) in nodes.iter().enumerate() {
            category_probs(alpha[i], &thresholds[i], theta, &mut pstar, &mut probs);
            for c in 0..m {
                table[q * m + c] = probs[c].ln();
            }
        }
        log_probs.push(table);
    }

    let log_weights: Vec<f64> = weights.iter().map(|w| w.ln()).collect();
    let mut posterior = vec![0.0; n_users * n_q];
    let mut counts: Vec<Vec<f64>> = (0..n_items)
        .map(|i| vec![0.0; n_q * data.n_cats[i]])
        .collect();
    let mut log_likelihood = 0.0;
    let mut acc = vec![0.0f64; n_q];

    for &j in order {
        acc.copy_from_slice(&log_weights);
        for i in 0..n_items {
            let m = data.n_cats[i];
            let c = data.cats[i * n_users + j] as usize;
            let table = &log_probs[i];
            for (q, a) in acc.iter_mut().enumerate() {
                *a += table[q * m + c];
            }
        }
        let max = acc.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut norm = 0.0;
        for q in 0..n_q {
            let e = (acc[q] - max).exp();
            posterior[j * n_q + q] = e;
            norm += e;
        }
        log_likelihood += max + norm.ln();
        for q in 0..n_q {
            posterior[j * n_q + q] /= norm;
        }
        for i in 0..n_items {
            let m = data.n_cats[i];
            let c = data.cats[i * n_users + j] as usize;
            let target = &mut counts[i];
            for q in 0..n_q {
                target[q * m + c] += posterior[j * n_q + q];
            }
        }
    }

    EStep {
        log_likelihood,
        posterior,
        counts,
    }
}

/// Marginal frequency starting values: unit slope and inverse-logistic
/// thresholds from the cumulative share of each category, optionally
/// perturbed by a per-item seed-derived jitter so random restarts stay
/// reproducible and identical items stay identical.
fn initial_params(data: &OrdinalData, config: &FitConfig) -> (Vec<f64>, Vec<Vec<f64>>) {
    use std::hash::{DefaultHasher, Hash, Hasher};

    let n_users = data.n_users as f64;
    let mut alpha = Vec::with_capacity(data.n_cats.len());
    let mut thresholds = Vec::with_capacity(data.n_cats.len());
    for (i, &m) in data.n_cats.iter().enumerate() {
        let row = &data.cats[i * data.n_users..(i + 1) * data.n_users];
        let mut betas = Vec::with_capacity(m - 1);
        let mut last = f64::NEG_INFINITY;
        for t in 1..m {
            let at_least = row.iter().filter(|&&c| c as usize >= t).count() as f64;
            let p = (at_least / n_users).clamp(1.0 / (n_users + 1.0), n_users / (n_users + 1.0));
            let mut b = ((1.0 - p) / p).ln();
            if b <= last {
                b = last + 1e-3;
            }
            last = b;
            betas.push(b);
        }
        // Item jitter keyed by the category histogram: invariant to user
        // order, identical for identical items.
        let mut histogram = vec![0usize; m];
        for &c in row {
            histogram[c as usize] += 1;
        }
        let mut hasher = DefaultHasher::new();
        config.seed.hash(&mut hasher);
        histogram.hash(&mut hasher);
        let unit = (hasher.finish() >> 11) as f64 / (1u64 << 53) as f64;
        let a = (1.0 + 0.1 * (2.0 * unit - 1.0)).clamp(config.alpha_min, config.alpha_max);
        alpha.push(a);
        thresholds.push(betas);
    }
    (alpha, thresholds)
}

pub(super) fn fit_ordinal_em(data: &OrdinalData, config: &FitConfig) -> EmOutcome {
    let (nodes, weights) = gauss_hermite_normal(config.quad_points);
    let (mut alpha, mut thresholds) = initial_params(data, config);
    let n_items = data.n_cats.len();
    let order = canonical_user_order(data);

    let mut e = e_step(data, &order, &nodes, &weights, &alpha, &thresholds);
    let mut ll_history = vec![e.log_likelihood];
    let mut converged = false;
    let mut iterations = 0;

    for _ in 0..config.max_iterations {
        iterations += 1;
        let mut delta = 0.0f64;
        for i in 0..n_items {
            let obj = ItemObjective {
                nodes: &nodes,
                counts: &e.counts[i],
                m: data.n_cats[i],
            };
            let mut packed = pack(alpha[i], &thresholds[i]);
            clamp_packed(&mut packed, config);
            maximize_item(&obj, &mut packed, config);
            let (new_alpha, new_betas) = unpack(&packed);
            delta = delta.max((new_alpha - alpha[i]).abs());
            for (old, new) in thresholds[i].iter().zip(&new_betas) {
                delta = delta.max((old - new).abs());
            }
            alpha[i] = new_alpha;
            thresholds[i] = new_betas;
        }
        e = e_step(data, &order, &nodes, &weights, &alpha, &thresholds);
        ll_history.push(e.log_likelihood);
        if delta < config.tolerance {
            converged = true;
            break;
        }
    }

    // Expected-a-posteriori attitudes from the final posterior.
    let n_q = nodes.len();
    let theta = (0..data.n_users)
        .map(|j| {
            nodes
                .iter()
                .enumerate()
                .map(|(q, &x)| x * e.posterior[j * n_q + q])
                .sum()
        })
        .collect();

    EmOutcome {
        alpha,
        thresholds,
        theta,
        log_likelihood: e.log_likelihood,
        ll_history,
        iterations,
        converged,
    }
}
