//! Derivative-free local minimization (Nelder–Mead).
//!
//! Band functions are Lipschitz but only piecewise analytic (crossings break
//! smoothness), so the refinement step after a grid scan uses a simplex
//! method rather than anything gradient-based. Functions on the torus are
//! minimized in unconstrained coordinates; callers canonicalize the
//! quasimomentum at evaluation time, which makes the objective periodic and
//! removes any need for bounds.

/// Result of a [`nelder_mead`] run.
#[derive(Debug, Clone)]
pub struct MinResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    /// True when the simplex spread reached the tolerance before the
    /// iteration cap.
    pub converged: bool,
}

/// Minimizes `f` starting from `x0` with an axis-aligned initial simplex of
/// the given `step`. Terminates when the spread of function values over the
/// simplex drops below `tol` or after `max_iter` iterations.
pub fn nelder_mead<F>(f: F, x0: &[f64], step: f64, tol: f64, max_iter: usize) -> MinResult
where
    F: Fn(&[f64]) -> f64,
{
    let n = x0.len();
    assert!(n >= 1, "dimension must be positive");

    // Standard coefficients: reflection, expansion, contraction, shrink.
    let alpha = 1.0;
    let gamma = 2.0;
    let rho = 0.5;
    let sigma = 0.5;

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    for i in 0..n {
        let mut p = x0.to_vec();
        p[i] += step;
        simplex.push(p);
    }
    let mut values: Vec<f64> = simplex.iter().map(|p| f(p)).collect();

    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        iterations += 1;

        // Order: best first. Ties broken by position for determinism.
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
        let best = order[0];
        let worst = order[n];
        let second_worst = order[n - 1];

        if (values[worst] - values[best]).abs() <= tol {
            converged = true;
            let x = simplex.swap_remove(best);
            return MinResult {
                x,
                value: values[best],
                iterations,
                converged,
            };
        }

        // Centroid of all points but the worst.
        let mut centroid = vec![0.0; n];
        for (i, p) in simplex.iter().enumerate() {
            if i == worst {
                continue;
            }
            for (c, &pi) in centroid.iter_mut().zip(p) {
                *c += pi;
            }
        }
        for c in &mut centroid {
            *c /= n as f64;
        }

        let lerp = |from: &[f64], towards: &[f64], t: f64| -> Vec<f64> {
            from.iter()
                .zip(towards)
                .map(|(&a, &b)| a + t * (b - a))
                .collect()
        };

        // Reflection.
        let reflected = lerp(&centroid, &simplex[worst], -alpha);
        let fr = f(&reflected);
        if fr < values[second_worst] && fr >= values[best] {
            simplex[worst] = reflected;
            values[worst] = fr;
            continue;
        }
        if fr < values[best] {
            // Expansion.
            let expanded = lerp(&centroid, &simplex[worst], -gamma);
            let fe = f(&expanded);
            if fe < fr {
                simplex[worst] = expanded;
                values[worst] = fe;
            } else {
                simplex[worst] = reflected;
                values[worst] = fr;
            }
            continue;
        }
        // Contraction (outside if the reflection improved on the worst).
        let (candidate, fc) = if fr < values[worst] {
            let c = lerp(&centroid, &reflected, rho);
            let v = f(&c);
            (c, v)
        } else {
            let c = lerp(&centroid, &simplex[worst], rho);
            let v = f(&c);
            (c, v)
        };
        if fc < values[worst].min(fr) {
            simplex[worst] = candidate;
            values[worst] = fc;
            continue;
        }
        // Shrink towards the best point.
        let best_point = simplex[best].clone();
        for (i, p) in simplex.iter_mut().enumerate() {
            if i == best {
                continue;
            }
            for (pi, &bi) in p.iter_mut().zip(&best_point) {
                *pi = bi + sigma * (*pi - bi);
            }
            values[i] = f(p);
        }
    }

    let mut best = 0;
    for i in 1..=n {
        if values[i] < values[best] {
            best = i;
        }
    }
    let value = values[best];
    MinResult {
        x: simplex.swap_remove(best),
        value,
        iterations,
        converged,
    }
}

/// Central-difference gradient with step `h`.
pub fn fd_gradient<F>(f: F, x: &[f64], h: f64) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64,
{
    let n = x.len();
    let mut g = vec![0.0; n];
    let mut p = x.to_vec();
    for i in 0..n {
        p[i] = x[i] + h;
        let fp = f(&p);
        p[i] = x[i] - h;
        let fm = f(&p);
        p[i] = x[i];
        g[i] = (fp - fm) / (2.0 * h);
    }
    g
}

/// Central-difference Hessian: 3-point stencils on the diagonal, 4-point on
/// the mixed entries. Symmetric by construction.
pub fn fd_hessian<F>(f: F, x: &[f64], h: f64) -> Vec<Vec<f64>>
where
    F: Fn(&[f64]) -> f64,
{
    let n = x.len();
    let f0 = f(x);
    let mut hess = vec![vec![0.0; n]; n];
    let mut p = x.to_vec();
    for i in 0..n {
        p[i] = x[i] + h;
        let fp = f(&p);
        p[i] = x[i] - h;
        let fm = f(&p);
        p[i] = x[i];
        hess[i][i] = (fp - 2.0 * f0 + fm) / (h * h);
    }
    for i in 0..n {
        for j in i + 1..n {
            p[i] = x[i] + h;
            p[j] = x[j] + h;
            let fpp = f(&p);
            p[j] = x[j] - h;
            let fpm = f(&p);
            p[i] = x[i] - h;
            let fmm = f(&p);
            p[j] = x[j] + h;
            let fmp = f(&p);
            p[i] = x[i];
            p[j] = x[j];
            let v = (fpp - fpm - fmp + fmm) / (4.0 * h * h);
            hess[i][j] = v;
            hess[j][i] = v;
        }
    }
    hess
}

/// Solves `a x = b` by LU factorization with partial pivoting. Returns
/// `None` when the matrix is numerically singular.
#[allow(clippy::needless_range_loop)]
pub fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    assert_eq!(a.len(), n);
    for col in 0..n {
        let pivot_row = (col..n).max_by(|&r, &s| a[r][col].abs().total_cmp(&a[s][col].abs()))?;
        if a[pivot_row][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot_row);
        b.swap(col, pivot_row);
        for r in col + 1..n {
            let factor = a[r][col] / a[col][col];
            if factor == 0.0 {
                continue;
            }
            for c in col..n {
                a[r][c] -= factor * a[col][c];
            }
            b[r] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for c in row + 1..n {
            acc -= a[row][c] * x[c];
        }
        x[row] = acc / a[row][row];
        if !x[row].is_finite() {
            return None;
        }
    }
    Some(x)
}
