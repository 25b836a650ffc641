//! Internal numerical routines: unimodal search, adaptive quadrature,
//! Gauss–Hermite nodes, and small symmetric linear solves.

const GOLDEN: f64 = 0.618_033_988_749_894_9; // (sqrt(5) - 1) / 2

/// Maximizes a unimodal function on `[lo, hi]` by golden-section search.
///
/// Non-finite objective values are treated as `-inf` (excluded from the
/// search), which is how ξ = +∞ near a finite domain endpoint is handled.
/// Returns `(argmax, max)`. `tol` is an absolute tolerance on the argument.
pub fn golden_max(f: impl Fn(f64) -> f64, lo: f64, hi: f64, tol: f64) -> (f64, f64) {
    let clean = |x: f64| {
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::NEG_INFINITY
        }
    };
    let (mut a, mut b) = (lo, hi);
    let mut x1 = b - GOLDEN * (b - a);
    let mut x2 = a + GOLDEN * (b - a);
    let mut f1 = clean(x1);
    let mut f2 = clean(x2);
    let mut iter = 0;
    while b - a > tol && iter < 400 {
        iter += 1;
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + GOLDEN * (b - a);
            f2 = clean(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - GOLDEN * (b - a);
            f1 = clean(x1);
        }
    }
    let xm = 0.5 * (a + b);
    let fm = clean(xm);
    // Return the best point actually evaluated.
    let mut best = (xm, fm);
    for (x, v) in [(x1, f1), (x2, f2), (lo, clean(lo))] {
        if v > best.1 {
            best = (x, v);
        }
    }
    best
}

/// Expands `hi = 1, 2, 4, ...` until the unimodal `f` has started decreasing,
/// then golden-sections on the bracket. Used for suprema over `[0, ∞)`.
pub fn golden_max_unbounded(f: impl Fn(f64) -> f64, tol: f64) -> (f64, f64) {
    let mut hi = 1.0_f64;
    let mut prev = f(0.0);
    // Expand while the function keeps growing along the doubling sequence.
    for _ in 0..1100 {
        let v = f(hi);
        if !(v.is_finite() && v >= prev) {
            break;
        }
        prev = v;
        hi *= 2.0;
    }
    golden_max(f, 0.0, hi, tol.max(hi * 4e-16))
}

/// Adaptive Simpson quadrature with absolute tolerance `tol`.
///
/// Non-finite integrand values are replaced by 0; callers are expected to keep
/// singularities outside (or on the boundary of) the integration interval.
pub fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64, max_depth: u32) -> f64 {
    if a >= b {
        return 0.0;
    }
    let eval = |x: f64| {
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &impl Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
                + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
        }
    }
    let fa = eval(a);
    let fb = eval(b);
    let m = 0.5 * (a + b);
    let fm = eval(m);
    let whole = simpson(fa, fm, fb, a, b);
    recurse(&eval, a, b, fa, fm, fb, whole, tol, max_depth)
}

/// Nodes and weights for `n`-point Gauss–Hermite quadrature with weight
/// `exp(-x^2)`: `∫ f(x) e^{-x²} dx ≈ Σ w_i f(x_i)`.
///
/// Standard Golub–Welsch-free construction: initial guesses refined by Newton
/// iteration on the Hermite recurrence.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = (n + 1) / 2;
    let nf = n as f64;
    let mut z = 0.0_f64;
    for i in 0..m {
        // Initial guesses (Numerical Recipes §4.6).
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * nodes[0],
            3 => 1.91 * z - 0.91 * nodes[1],
            _ => 2.0 * z - nodes[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..200 {
            // Evaluate the orthonormal Hermite polynomial and its derivative.
            let mut p1 = std::f64::consts::PI.powf(-0.25);
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let dz = p1 / pp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = z;
        nodes[n - 1 - i] = -z;
        weights[i] = 2.0 / (pp * pp);
        weights[n - 1 - i] = weights[i];
    }
    (nodes, weights)
}

/// Expectation of `f` under the standard normal on ℝ via Gauss–Hermite.
pub fn gauss_hermite_normal_1d(f: impl Fn(f64) -> f64, order: usize) -> f64 {
    let (x, w) = gauss_hermite(order);
    let c = 1.0 / std::f64::consts::PI.sqrt();
    let s2 = std::f64::consts::SQRT_2;
    x.iter().zip(&w).map(|(&xi, &wi)| wi * f(s2 * xi)).sum::<f64>() * c
}

/// Solves the symmetric positive semi-definite system `a x = b` in place via
/// Gaussian elimination with partial pivoting. Returns `None` when a pivot is
/// numerically zero (rank-deficient system).
pub fn solve_sym(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = a.iter().cloned().collect();
    let mut rhs = b.to_vec();
    let scale: f64 = m
        .iter()
        .flat_map(|r| r.iter().map(|v| v.abs()))
        .fold(0.0, f64::max)
        .max(1.0);
    for col in 0..n {
        let (piv, pval) = (col..n)
            .map(|r| (r, m[r][col].abs()))
            .fold((col, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if pval <= scale * 1e-13 {
            return None;
        }
        m.swap(col, piv);
        rhs.swap(col, piv);
        for r in col + 1..n {
            let factor = m[r][col] / m[col][col];
            for c in col..n {
                m[r][c] -= factor * m[col][c];
            }
            rhs[r] -= factor * rhs[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let mut s = rhs[r];
        for c in r + 1..n {
            s -= m[r][c] * x[c];
        }
        x[r] = s / m[r][r];
    }
    Some(x)
}

/// Minimum-norm solution of a symmetric PSD system via Jacobi eigendecomposition,
/// used as the rank-deficient fallback for normal equations.
pub fn solve_sym_min_norm(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = a.iter().cloned().collect();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                off += m[i][j] * m[i][j];
            }
        }
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if m[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[k][p], m[k][q]);
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[p][k], m[q][k]);
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[k][p], v[k][q]);
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let eigmax = (0..n).map(|i| m[i][i].abs()).fold(0.0, f64::max);
    let cutoff = eigmax * 1e-12;
    // x = V diag(1/λ restricted to λ > cutoff) Vᵀ b
    let mut x = vec![0.0; n];
    for k in 0..n {
        let lam = m[k][k];
        if lam.abs() <= cutoff {
            continue;
        }
        let proj: f64 = (0..n).map(|i| v[i][k] * b[i]).sum();
        for (i, xi) in x.iter_mut().enumerate() {
            *xi += v[i][k] * proj / lam;
        }
    }
    x
}

/// Euclidean norm of a slice.
pub fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Euclidean distance between two points.
pub fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}
