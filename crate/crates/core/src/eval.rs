//! Statistical comparison of scoring models: attitude grouping, per-item
//! chi-square goodness of fit, and correlation matrices.

use crate::error::{Error, Result};
use crate::matrix::ResponseMatrix;

/// Equal-frequency split of users by an attitude ordering.
#[derive(Debug, Clone)]
pub struct GroupPartition {
    /// Group index in 0..k per user.
    pub assignments: Vec<usize>,
    /// Users per group; sizes differ by at most one.
    pub sizes: Vec<usize>,
}

impl GroupPartition {
    pub fn group_count(&self) -> usize {
        self.sizes.len()
    }
}

/// Sorts users by attitude ascending (ties broken by user index) and cuts
/// the order into `k` contiguous groups of near-equal size, the leading
/// groups taking the remainder.
pub fn partition_by_attitude(attitude: &[f64], k: usize) -> Result<GroupPartition> {
    let n = attitude.len();
    if k < 2 || k > n {
        return Err(Error::BadGroupCount { k, users: n });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        attitude[a]
            .partial_cmp(&attitude[b])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let base = n / k;
    let remainder = n % k;
    let mut assignments = vec![0usize; n];
    let mut sizes = Vec::with_capacity(k);
    let mut cursor = 0usize;
    for g in 0..k {
        let size = base + usize::from(g < remainder);
        for &user in &order[cursor..cursor + size] {
            assignments[user] = g;
        }
        sizes.push(size);
        cursor += size;
    }
    Ok(GroupPartition { assignments, sizes })
}

/// Source of the expected group share probabilities for one item.
pub enum ExpectedShareModel<'a> {
    /// Group-independent expectation |R_i| / N; k - 1 degrees of freedom.
    Naive,
    /// Mean fitted visibility over the group members, from a row-major n×N
    /// visibility table; k - 2 degrees of freedom.
    Irt { visibility: &'a [f64] },
}

impl ExpectedShareModel<'_> {
    fn degrees_of_freedom(&self, k: usize) -> usize {
        match self {
            ExpectedShareModel::Naive => k - 1,
            ExpectedShareModel::Irt { .. } => k - 2,
        }
    }
}

/// Chi-square test outcome for one item.
#[derive(Debug, Clone)]
pub struct GofResult {
    pub item: usize,
    pub chi_square: f64,
    pub degrees_of_freedom: usize,
    pub p_value: f64,
    pub accepted: bool,
    /// Set when an expected count fell below the guard threshold and its
    /// denominator was clamped.
    pub guarded: bool,
}

const EXPECTED_COUNT_GUARD: f64 = 1e-9;

/// Per-item chi-square comparison of observed group share rates against the
/// model-expected rates, both orientations (shared and hidden) included.
pub fn goodness_of_fit(
    r: &ResponseMatrix,
    model: &ExpectedShareModel,
    partition: &GroupPartition,
    alpha: f64,
) -> Result<Vec<GofResult>> {
    let n_users = r.user_count();
    let k = partition.group_count();
    if partition.assignments.len() != n_users {
        return Err(Error::DimensionMismatch {
            expected: n_users,
            actual: partition.assignments.len(),
        });
    }
    let df = model.degrees_of_freedom(k);
    if df == 0 {
        return Err(Error::BadGroupCount { k, users: n_users });
    }

    let mut results = Vec::with_capacity(r.item_count());
    for i in 0..r.item_count() {
        let row = r.row(i);
        let mut observed = vec![0.0f64; k];
        let mut expected = vec![0.0f64; k];
        for (j, &cell) in row.iter().enumerate() {
            let g = partition.assignments[j];
            observed[g] += f64::from(cell);
            match model {
                ExpectedShareModel::Naive => {}
                ExpectedShareModel::Irt { visibility } => {
                    expected[g] += visibility[i * n_users + j];
                }
            }
        }
        if let ExpectedShareModel::Naive = model {
            let overall: f64 = observed.iter().sum::<f64>() / n_users as f64;
            for (g, slot) in expected.iter_mut().enumerate() {
                *slot = overall * partition.sizes[g] as f64;
            }
        }

        let mut chi_square = 0.0f64;
        let mut guarded = false;
        for g in 0..k {
            let f_g = partition.sizes[g] as f64;
            let o_share = observed[g];
            let e_share = expected[g];
            let o_hide = f_g - o_share;
            let e_hide = f_g - e_share;
            let mut denominator_share = e_share;
            let mut denominator_hide = e_hide;
            if denominator_share < EXPECTED_COUNT_GUARD {
                denominator_share = EXPECTED_COUNT_GUARD;
                guarded = true;
            }
            if denominator_hide < EXPECTED_COUNT_GUARD {
                denominator_hide = EXPECTED_COUNT_GUARD;
                guarded = true;
            }
            let d_share = o_share - e_share;
            let d_hide = o_hide - e_hide;
            chi_square += d_share * d_share / denominator_share;
            chi_square += d_hide * d_hide / denominator_hide;
        }
        let p_value = chi_square_survival(chi_square, df as f64);
        results.push(GofResult {
            item: i,
            chi_square,
            degrees_of_freedom: df,
            p_value,
            accepted: p_value >= alpha,
            guarded,
        });
    }
    Ok(results)
}

/// Sample Pearson correlation coefficient.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            actual: y.len(),
        });
    }
    let n = x.len() as f64;
    if x.is_empty() {
        return Err(Error::EmptyInput { what: "scores" });
    }
    let mean_x = x.iter().sum::<f64>() / n;
    let mean_y = y.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_x = 0.0;
    let mut var_y = 0.0;
    for (a, b) in x.iter().zip(y) {
        let dx = a - mean_x;
        let dy = b - mean_y;
        cov += dx * dy;
        var_x += dx * dx;
        var_y += dy * dy;
    }
    if var_x == 0.0 {
        return Err(Error::ZeroVariance { what: "x".into() });
    }
    if var_y == 0.0 {
        return Err(Error::ZeroVariance { what: "y".into() });
    }
    Ok((cov / (var_x.sqrt() * var_y.sqrt())).clamp(-1.0, 1.0))
}

/// Average ranks, ties sharing the mean rank.
fn ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        values[a]
            .partial_cmp(&values[b])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut out = vec![0.0f64; n];
    let mut pos = 0usize;
    while pos < n {
        let mut end = pos + 1;
        while end < n && values[order[end]] == values[order[pos]] {
            end += 1;
        }
        let mean_rank = (pos + end - 1) as f64 / 2.0 + 1.0;
        for &idx in &order[pos..end] {
            out[idx] = mean_rank;
        }
        pos = end;
    }
    out
}

/// Spearman rank correlation: Pearson over average ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    pearson(&ranks(x), &ranks(y))
}

/// Correlation flavor for the pairwise matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CorrelationMethod {
    #[default]
    Pearson,
    Spearman,
}

/// Labeled symmetric correlation matrix; a cell is `None` when one of the
/// inputs had zero variance.
#[derive(Debug, Clone)]
pub struct CorrelationMatrix {
    pub labels: Vec<String>,
    pub method: CorrelationMethod,
    cells: Vec<Option<f64>>,
}

impl CorrelationMatrix {
    pub fn cell(&self, row: usize, col: usize) -> Option<f64> {
        self.cells[row * self.labels.len() + col]
    }

    pub fn size(&self) -> usize {
        self.labels.len()
    }
}

/// Pairwise correlations between labeled score vectors over one registry.
pub fn correlation_matrix(
    labeled: &[(String, &[f64])],
    method: CorrelationMethod,
) -> Result<CorrelationMatrix> {
    if labeled.is_empty() {
        return Err(Error::EmptyInput { what: "scores" });
    }
    let len = labeled[0].1.len();
    for (_, values) in labeled {
        if values.len() != len {
            return Err(Error::DimensionMismatch {
                expected: len,
                actual: values.len(),
            });
        }
    }
    let m = labeled.len();
    let mut cells = vec![None; m * m];
    for a in 0..m {
        cells[a * m + a] = Some(1.0);
        for b in (a + 1)..m {
            let r = match method {
                CorrelationMethod::Pearson => pearson(labeled[a].1, labeled[b].1),
                CorrelationMethod::Spearman => spearman(labeled[a].1, labeled[b].1),
            };
            let value = match r {
                Ok(v) => Some(v),
                Err(Error::ZeroVariance { .. }) => None,
                Err(e) => return Err(e),
            };
            cells[a * m + b] = value;
            cells[b * m + a] = value;
        }
    }
    Ok(CorrelationMatrix {
        labels: labeled.iter().map(|(l, _)| l.clone()).collect(),
        method,
        cells,
    })
}

/// Survival function of the chi-square distribution: P(X > x) at `df`
/// degrees of freedom, via the regularized incomplete gamma function.
pub fn chi_square_survival(x: f64, df: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    regularized_gamma_upper(df / 2.0, x / 2.0)
}

/// Lanczos approximation of ln Gamma(x) for x > 0.
pub fn ln_gamma(x: f64) -> f64 {
    const COEFFICIENTS: [f64; 6] = [
        76.180_091_729_471_46,
        -86.505_320_329_416_77,
        24.014_098_240_830_91,
        -1.231_739_572_450_155,
        0.120_865_097_386_617_7e-2,
        -0.539_523_938_495_3e-5,
    ];
    let mut y = x;
    let tmp = x + 5.5;
    let tmp = tmp - (x + 0.5) * tmp.ln();
    let mut series = 1.000_000_000_190_015;
    for c in COEFFICIENTS {
        y += 1.0;
        series += c / y;
    }
    -tmp + (2.506_628_274_631_000_5 * series / x).ln()
}

/// Regularized upper incomplete gamma Q(a, x): series expansion below the
/// a + 1 knee, Lentz continued fraction above it.
pub fn regularized_gamma_upper(a: f64, x: f64) -> f64 {
    if x < 0.0 || a <= 0.0 {
        return f64::NAN;
    }
    if x == 0.0 {
        return 1.0;
    }
    if x < a + 1.0 {
        1.0 - lower_gamma_series(a, x)
    } else {
        upper_gamma_continued_fraction(a, x)
    }
}

/// P(a, x) by the power series, valid for x < a + 1.
fn lower_gamma_series(a: f64, x: f64) -> f64 {
    let mut ap = a;
    let mut sum = 1.0 / a;
    let mut del = sum;
    for _ in 0..500 {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if del.abs() < sum.abs() * 1e-16 {
            break;
        }
    }
    sum * (-x + a * x.ln() - ln_gamma(a)).exp()
}

/// Q(a, x) by the Lentz continued fraction, valid for x >= a + 1.
fn upper_gamma_continued_fraction(a: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..500 {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    h * (-x + a * x.ln() - ln_gamma(a)).exp()
}
