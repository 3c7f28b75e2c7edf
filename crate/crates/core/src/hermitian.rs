//! Dense Hermitian eigendecomposition for small fiber matrices.
//!
//! The solver embeds the ν×ν complex Hermitian matrix `H = A + iB` into the
//! real symmetric `2ν×2ν` matrix `[[A, −B], [B, A]]`, tridiagonalizes it with
//! Householder reflections and runs implicitly shifted QL iteration. Every
//! eigenvalue of `H` shows up twice in the embedding; eigenvalues are read
//! off every other sorted entry, and eigenvectors are recovered by mapping
//! embedded vectors `(x, y) ↦ x + iy` and discarding the duplicates (the
//! twin of `z` maps to `i·z`) with a greedy orthogonalization pass.
//!
//! Everything here is deterministic: same input bits, same output bits.

// Index loops mirror the textbook formulation of the reductions.
#![allow(clippy::needless_range_loop)]

use num_complex::Complex64;

use crate::{Error, Result};

/// Relative tolerance for the Hermiticity check in [`HermitianMatrix::new`].
const HERMITICITY_TOL: f64 = 1e-14;

/// A validated ν×ν complex Hermitian matrix, row-major.
///
/// Construction symmetrizes the input exactly: off-diagonal pairs are
/// averaged with their conjugates and diagonal imaginary parts are dropped,
/// so `entry(i, j) == conj(entry(j, i))` holds bitwise afterwards.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix {
    n: usize,
    data: Vec<Complex64>,
}

/// Sorted eigenvalues with optional orthonormal eigenvectors.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    /// Eigenvalues in non-decreasing order.
    pub eigenvalues: Vec<f64>,
    /// `eigenvectors[j]` is a unit eigenvector for `eigenvalues[j]`.
    pub eigenvectors: Vec<Vec<Complex64>>,
}

impl HermitianMatrix {
    /// Validates and symmetrizes a row-major entry list of length `n²`.
    pub fn new(n: usize, mut data: Vec<Complex64>) -> Result<Self> {
        assert_eq!(data.len(), n * n, "entry count must be n^2");
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("matrix entry"));
        }
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                let a = data[i * n + j];
                let b = data[j * n + i];
                let dev = (a - b.conj()).norm();
                let scale = a.norm().max(b.norm());
                if dev > HERMITICITY_TOL * scale.max(f64::MIN_POSITIVE) {
                    worst = worst.max(if scale > 0.0 { dev / scale } else { dev });
                }
            }
        }
        if worst > 0.0 {
            return Err(Error::NonHermitian(worst));
        }
        for i in 0..n {
            data[i * n + i] = Complex64::new(data[i * n + i].re, 0.0);
            for j in i + 1..n {
                let m = (data[i * n + j] + data[j * n + i].conj()) * 0.5;
                data[i * n + j] = m;
                data[j * n + i] = m.conj();
            }
        }
        Ok(HermitianMatrix { n, data })
    }

    /// Order ν of the matrix.
    pub fn order(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.n + j]
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.data
    }

    /// Trace (real, since the diagonal is real after construction).
    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i).re).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest entry magnitude.
    pub fn max_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `H x` for a complex vector `x`.
    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        let n = self.n;
        let mut y = vec![Complex64::new(0.0, 0.0); n];
        for i in 0..n {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..n {
                acc += self.get(i, j) * x[j];
            }
            y[i] = acc;
        }
        y
    }

    /// All ν eigenvalues in non-decreasing order.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        if self.n == 1 {
            return Ok(vec![self.get(0, 0).re]);
        }
        let mut m = self.embed();
        let (mut d, mut e) = tred2(&mut m, false);
        tql2(&mut d, &mut e, &mut m, false)?;
        d.sort_by(f64::total_cmp);
        Ok(d.into_iter().step_by(2).collect())
    }

    /// Eigenvalues plus an orthonormal set of eigenvectors.
    pub fn eigenpairs(&self) -> Result<EigenDecomposition> {
        let n = self.n;
        if n == 1 {
            return Ok(EigenDecomposition {
                eigenvalues: vec![self.get(0, 0).re],
                eigenvectors: vec![vec![Complex64::new(1.0, 0.0)]],
            });
        }
        let mut m = self.embed();
        let (mut d, mut e) = tred2(&mut m, true);
        tql2(&mut d, &mut e, &mut m, true)?;

        // Sort embedded eigenpairs by value (stable on the original column).
        let mut order: Vec<usize> = (0..2 * n).collect();
        order.sort_by(|&a, &b| d[a].total_cmp(&d[b]).then(a.cmp(&b)));

        let mut eigenvalues = Vec::with_capacity(n);
        let mut eigenvectors: Vec<Vec<Complex64>> = Vec::with_capacity(n);
        for &col in &order {
            if eigenvectors.len() == n {
                break;
            }
            // Embedded column (x, y) corresponds to the complex vector x + iy.
            let mut z: Vec<Complex64> = (0..n)
                .map(|i| Complex64::new(m[i][col], m[n + i][col]))
                .collect();
            // Project out everything accepted so far; the duplicate partner
            // of an accepted vector collapses to ~0 here.
            for w in &eigenvectors {
                let overlap: Complex64 = w.iter().zip(&z).map(|(wi, zi)| wi.conj() * zi).sum();
                for (zi, wi) in z.iter_mut().zip(w) {
                    *zi -= overlap * wi;
                }
            }
            let norm_sqr: f64 = z.iter().map(|zi| zi.norm_sqr()).sum();
            if norm_sqr > 0.5 {
                let inv = 1.0 / norm_sqr.sqrt();
                for zi in &mut z {
                    *zi *= inv;
                }
                eigenvalues.push(d[col]);
                eigenvectors.push(z);
            }
        }
        if eigenvectors.len() != n {
            return Err(Error::NoConvergence(format!(
                "eigenvector extraction found {} of {} vectors",
                eigenvectors.len(),
                n
            )));
        }
        Ok(EigenDecomposition {
            eigenvalues,
            eigenvectors,
        })
    }

    /// Real symmetric embedding `[[Re, −Im], [Im, Re]]`.
    fn embed(&self) -> Vec<Vec<f64>> {
        let n = self.n;
        let mut m = vec![vec![0.0; 2 * n]; 2 * n];
        for i in 0..n {
            for j in 0..n {
                let z = self.get(i, j);
                m[i][j] = z.re;
                m[n + i][n + j] = z.re;
                m[i][n + j] = -z.im;
                m[n + i][j] = z.im;
            }
        }
        m
    }
}

/// Householder reduction of a real symmetric matrix to tridiagonal form.
///
/// Returns `(d, e)` with the diagonal in `d` and the subdiagonal in
/// `e[1..]`. When `vectors` is set, `a` is overwritten with the accumulated
/// orthogonal transformation; otherwise its contents become scratch.
fn tred2(a: &mut [Vec<f64>], vectors: bool) -> (Vec<f64>, Vec<f64>) {
    let n = a.len();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];

    for i in (1..n).rev() {
        let l = i - 1;
        let mut h = 0.0;
        if l > 0 {
            let scale: f64 = (0..=l).map(|k| a[i][k].abs()).sum();
            if scale == 0.0 {
                e[i] = a[i][l];
            } else {
                for k in 0..=l {
                    a[i][k] /= scale;
                    h += a[i][k] * a[i][k];
                }
                let mut f = a[i][l];
                let g = if f >= 0.0 { -h.sqrt() } else { h.sqrt() };
                e[i] = scale * g;
                h -= f * g;
                a[i][l] = f - g;
                f = 0.0;
                for j in 0..=l {
                    if vectors {
                        a[j][i] = a[i][j] / h;
                    }
                    let mut g = 0.0;
                    for k in 0..=j {
                        g += a[j][k] * a[i][k];
                    }
                    for k in j + 1..=l {
                        g += a[k][j] * a[i][k];
                    }
                    e[j] = g / h;
                    f += e[j] * a[i][j];
                }
                let hh = f / (h + h);
                for j in 0..=l {
                    let f = a[i][j];
                    let g = e[j] - hh * f;
                    e[j] = g;
                    for k in 0..=j {
                        a[j][k] -= f * e[k] + g * a[i][k];
                    }
                }
            }
        } else {
            e[i] = a[i][l];
        }
        d[i] = h;
    }

    if vectors {
        d[0] = 0.0;
    }
    e[0] = 0.0;
    for i in 0..n {
        if vectors {
            if d[i] != 0.0 {
                for j in 0..i {
                    let mut g = 0.0;
                    for k in 0..i {
                        g += a[i][k] * a[k][j];
                    }
                    for k in 0..i {
                        a[k][j] -= g * a[k][i];
                    }
                }
            }
            d[i] = a[i][i];
            a[i][i] = 1.0;
            for j in 0..i {
                a[j][i] = 0.0;
                a[i][j] = 0.0;
            }
        } else {
            d[i] = a[i][i];
        }
    }
    (d, e)
}

/// Implicitly shifted QL iteration on a tridiagonal matrix.
///
/// Eigenvalues land in `d` (unsorted); when `vectors` is set the columns of
/// `z` are rotated along, so column `j` ends as an eigenvector of `d[j]`.
fn tql2(d: &mut [f64], e: &mut [f64], z: &mut [Vec<f64>], vectors: bool) -> Result<()> {
    let n = d.len();
    if n == 0 {
        return Ok(());
    }
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;

    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 50 {
                return Err(Error::NoConvergence(format!(
                    "QL iteration stalled at index {l}"
                )));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(if g >= 0.0 { 1.0 } else { -1.0 }));
            let mut s = 1.0;
            let mut c = 1.0;
            let mut p = 0.0;
            let mut underflow = false;
            for i in (l..m).rev() {
                let mut f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                if vectors {
                    for zk in z.iter_mut() {
                        f = zk[i + 1];
                        zk[i + 1] = s * zk[i] + c * f;
                        zk[i] = c * zk[i] - s * f;
                    }
                }
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}
