use nalgebra::{Complex, DMatrix, DVector};

/// Largest block dimension handled by the dense Schur eigensolver; bigger
/// irreducible blocks fall back to shifted power iteration.
pub const DENSE_LIMIT: usize = 2000;

const POWER_TOL: f64 = 1e-14;
const POWER_MAX_ITER: usize = 200_000;
const INVERSE_TOL: f64 = 1e-15;
const BISECT_TOL: f64 = 2e-16;
const INVERSE_MAX_SHIFTS: usize = 200;

/// All eigenvalues of a square matrix (empty for a 0×0 matrix).
pub fn eigenvalues(m: &DMatrix<f64>) -> Vec<Complex<f64>> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    if m.nrows() == 1 {
        return vec![Complex::new(m[(0, 0)], 0.0)];
    }
    // nalgebra's Schur iteration stalls on exactly repeated eigenvalues (e.g.
    // `0.3 I + 0.01 J`), so the listing goes through faer.
    let (balanced, _) = balance(m);
    let n = balanced.nrows();
    faer::Mat::<f64>::from_fn(n, n, |i, j| balanced[(i, j)])
        .eigenvalues()
        .expect("eigenvalue iteration converges for finite input")
        .into_iter()
        .map(|z| Complex::new(z.re, z.im))
        .collect()
}

/// Diagonal similarity `D⁻¹ M D` (powers of two) equalizing row and column
/// norms, as in Parlett–Reinsch. Returns the balanced matrix and the diagonal
/// of `D`.
pub fn balance(m: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>) {
    const RADIX: f64 = 2.0;
    let n = m.nrows();
    let mut a = m.clone();
    let mut d = DVector::from_element(n, 1.0);
    for _ in 0..10_000 {
        let mut converged = true;
        for i in 0..n {
            let (mut c, mut r) = (0.0, 0.0);
            for j in (0..n).filter(|&j| j != i) {
                c += a[(j, i)].abs();
                r += a[(i, j)].abs();
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let total = c + r;
            let mut f = 1.0;
            while c < r / RADIX {
                f *= RADIX;
                c *= RADIX * RADIX;
            }
            while c >= r * RADIX {
                f /= RADIX;
                c /= RADIX * RADIX;
            }
            if (c + r) / f < 0.95 * total {
                converged = false;
                d[i] *= f;
                a.row_mut(i).unscale_mut(f);
                a.column_mut(i).scale_mut(f);
            }
        }
        if converged {
            break;
        }
    }
    (a, d)
}

/// Spectral radius of a nonnegative block assumed irreducible (or 1×1).
pub fn block_spectral_radius(block: &DMatrix<f64>) -> f64 {
    let n = block.nrows();
    if n == 0 || block.iter().all(|&v| v == 0.0) {
        return 0.0;
    }
    perron_pair(block).0
}

/// Perron root and a strictly positive right eigenvector (max-normalized) of an
/// irreducible nonnegative block.
pub fn perron_pair(block: &DMatrix<f64>) -> (f64, DVector<f64>) {
    let n = block.nrows();
    if n == 1 {
        return (block[(0, 0)], DVector::from_element(1, 1.0));
    }
    if n > DENSE_LIMIT {
        return power_perron(block);
    }
    let (estimate, u) = inverse_perron(block);
    (bisect_perron(block, estimate), u)
}

/// Whether `σI − B` is a nonsingular M-matrix, i.e. `σ > r(B)` for irreducible
/// `B ≥ 0`: Gaussian elimination without pivoting keeps every pivot positive.
/// Zero multipliers are skipped, so banded blocks cost `O(n²)`.
fn exceeds_perron_root(block: &DMatrix<f64>, sigma: f64) -> bool {
    let n = block.nrows();
    let mut a = -block.clone();
    for i in 0..n {
        a[(i, i)] += sigma;
    }
    for k in 0..n {
        let pivot = a[(k, k)];
        if !(pivot > 0.0) {
            return false;
        }
        for i in k + 1..n {
            let l = a[(i, k)] / pivot;
            if l == 0.0 {
                continue;
            }
            for j in k + 1..n {
                let akj = a[(k, j)];
                if akj != 0.0 {
                    a[(i, j)] -= l * akj;
                }
            }
        }
    }
    true
}

/// Bisection on the M-matrix test, started from a tight bracket around
/// `estimate` when it is accurate and from the row-sum bracket otherwise.
fn bisect_perron(block: &DMatrix<f64>, estimate: f64) -> f64 {
    let sums = block.column_sum();
    let (mut lo, mut hi) = (sums.min(), sums.max());
    if hi - lo <= f64::EPSILON * hi {
        return hi;
    }
    for delta in [1e-13, 1e-9, 1e-5] {
        let (a, b) = (estimate * (1.0 - delta), estimate * (1.0 + delta));
        if a > lo && b < hi && exceeds_perron_root(block, b) && !exceeds_perron_root(block, a) {
            (lo, hi) = (a, b);
            break;
        }
    }
    while hi - lo > BISECT_TOL * hi {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if exceeds_perron_root(block, mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `(min, max)` of `y/x` over the entries; `None` unless `x > 0`.
fn ratio_bounds(x: &DVector<f64>, y: &DVector<f64>) -> Option<(f64, f64)> {
    let mut bounds = (f64::INFINITY, 0.0f64);
    for (xi, yi) in x.iter().zip(y.iter()) {
        if !(*xi > 0.0) {
            return None;
        }
        bounds = (bounds.0.min(yi / xi), bounds.1.max(yi / xi));
    }
    Some(bounds)
}

/// Shifted inverse iteration with Collatz–Wielandt brackets.
///
/// For real `σ > r` the eigenvalue nearest `σ` is `r` itself and
/// `(σI − B)^{-1}` is positive, so `min y/x ≤ 1/(σ − r) ≤ max y/x` for
/// `y = (σI − B)^{-1} x`. The shift follows the running upper bound. Unlike a
/// Schur decomposition this stays accurate on strongly non-normal blocks
/// (e.g. a killed drifting walk, whose symmetrizer grows like `3^{x/2}`).
fn inverse_perron(block: &DMatrix<f64>) -> (f64, DVector<f64>) {
    let n = block.nrows();
    let mut x = DVector::from_element(n, 1.0);
    let (mut lower, mut upper) = ratio_bounds(&x, &(block * &x)).expect("positive start");
    for _ in 0..INVERSE_MAX_SHIFTS {
        if upper - lower <= INVERSE_TOL * upper {
            break;
        }
        let width = upper - lower;
        let sigma = upper + (1e-13 * upper).max(1e-300);
        let lu = (DMatrix::identity(n, n) * sigma - block).lu();
        let mut improved = false;
        for _ in 0..3 {
            let Some(y) = lu.solve(&x) else {
                return (sigma, x);
            };
            let Some((lo, hi)) = ratio_bounds(&x, &y) else {
                break;
            };
            if !(lo > 0.0) {
                break;
            }
            lower = lower.max(sigma - 1.0 / lo);
            upper = upper.min(sigma - 1.0 / hi);
            x = &y / y.max();
            if let Some((lo, hi)) = ratio_bounds(&x, &(block * &x)) {
                lower = lower.max(lo);
                upper = upper.min(hi);
            }
            improved |= upper - lower < width;
        }
        if !improved {
            break;
        }
    }
    (0.5 * (lower + upper), x)
}

/// Right singular vector for the smallest singular value: the (approximate)
/// null direction of `m`.
pub fn null_vector(m: &DMatrix<f64>) -> DVector<f64> {
    let n = m.ncols();
    if n == 1 {
        return DVector::from_element(1, 1.0);
    }
    let svd = m.clone().svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let (idx, _) =
        svd.singular_values
            .iter()
            .enumerate()
            .fold(
                (0, f64::INFINITY),
                |(bi, bv), (i, &s)| {
                    if s < bv {
                        (i, s)
                    } else {
                        (bi, bv)
                    }
                },
            );
    v_t.row(idx).transpose()
}

/// Power iteration on `I + B`, which is primitive for irreducible `B`, with the
/// Collatz–Wielandt bracket `min (Mx)/x ≤ r(M) ≤ max (Mx)/x` as stopping rule.
fn power_perron(block: &DMatrix<f64>) -> (f64, DVector<f64>) {
    let n = block.nrows();
    let mut x = DVector::from_element(n, 1.0);
    let mut estimate = 0.0;
    for _ in 0..POWER_MAX_ITER {
        let y = block * &x + &x;
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for i in 0..n {
            let ratio = y[i] / x[i];
            lo = lo.min(ratio);
            hi = hi.max(ratio);
        }
        estimate = 0.5 * (lo + hi);
        x = &y / y.max();
        if hi - lo <= POWER_TOL * hi {
            break;
        }
    }
    (estimate - 1.0, x)
}
