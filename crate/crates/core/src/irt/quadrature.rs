//! Gauss–Hermite quadrature against a standard-normal weight.

/// Nodes and weights such that `sum(w_q * f(x_q))` approximates the
/// expectation of `f` under N(0, 1). Weights are normalized to sum to 1;
/// nodes come out in ascending order.
pub fn gauss_hermite_normal(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "need at least one quadrature node");
    let (mut nodes, mut weights) = gauss_hermite_physicists(n);
    // Physicists' rule integrates against exp(-x^2); substitute x = t/sqrt(2)
    // to get the N(0,1) weight and fold in the 1/sqrt(pi) normalizer.
    let root_pi = std::f64::consts::PI.sqrt();
    for x in nodes.iter_mut() {
        *x *= std::f64::consts::SQRT_2;
    }
    let mut total = 0.0;
    for w in weights.iter_mut() {
        *w /= root_pi;
        total += *w;
    }
    for w in weights.iter_mut() {
        *w /= total;
    }
    (nodes, weights)
}

/// Classic Hermite rule for integrals against exp(-x^2): Newton iteration on
/// the orthonormal recurrence, exploiting the symmetry of the roots.
fn gauss_hermite_physicists(n: usize) -> (Vec<f64>, Vec<f64>) {
    const PIM4: f64 = 0.751_125_544_464_942_5; // pi^{-1/4}
    let mut x = vec![0.0f64; n];
    let mut w = vec![0.0f64; n];
    let half = n.div_ceil(2);
    let nf = n as f64;
    let mut z = 0.0f64;

    for i in 0..half {
        // Initial root guesses, largest root first.
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0f64;
        for _ in 0..200 {
            let mut p1 = PIM4;
            let mut p2 = 0.0f64;
            for j in 1..=n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let dz = p1 / pp;
            z -= dz;
            if dz.abs() <= 1e-15 {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    // Ascending node order.
    x.reverse();
    w.reverse();
    (x, w)
}
