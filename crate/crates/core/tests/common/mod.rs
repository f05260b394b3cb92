//! Random instance generators and independent oracles shared by the
//! integration and acceptance tests.
#![allow(dead_code)]

use std::sync::Arc;

use nalgebra::DMatrix;
use peripheral::kernel::eigenvalues;
use peripheral::{Kernel, WeightedSpace};
use rand::seq::SliceRandom as _;
use rand::Rng;

pub fn kernel(rows: &[&[f64]]) -> Kernel {
    Kernel::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
}

/// Irreducible block whose support is cyclic with the given period: states are
/// split into `period` nonempty groups (state `g < period` heads group `g`) and
/// edges go from group `g` to `g + 1`.
fn cyclic_block<R: Rng>(rng: &mut R, size: usize, period: usize) -> DMatrix<f64> {
    assert!(size >= period);
    let groups: Vec<usize> = (0..size)
        .map(|i| {
            if i < period {
                i
            } else {
                rng.random_range(0..period)
            }
        })
        .collect();
    let next = |g: usize| (g + 1) % period;
    let mut b = DMatrix::from_fn(size, size, |x, y| {
        if groups[y] == next(groups[x]) && rng.random_bool(0.8) {
            rng.random_range(0.05..1.0)
        } else {
            0.0
        }
    });
    // Every state reaches the next group's head and is reached from the
    // previous one; the heads form a cycle of length `period`.
    for x in 0..size {
        let g = groups[x];
        let (to, from) = (next(g), (g + period - 1) % period);
        if b[(x, to)] == 0.0 {
            b[(x, to)] = rng.random_range(0.05..1.0);
        }
        if b[(from, x)] == 0.0 {
            b[(from, x)] = rng.random_range(0.05..1.0);
        }
    }
    b
}

fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    eigenvalues(m).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Largest modulus among non-peripheral eigenvalues divided by `r`.
pub fn second_modulus_ratio(p: &Kernel) -> f64 {
    let eig = eigenvalues(p.entries());
    let r = eig.iter().map(|z| z.norm()).fold(0.0, f64::max);
    eig.iter()
        .map(|z| z.norm())
        .filter(|&m| m < r * (1.0 - 1e-7))
        .fold(0.0, f64::max)
        / r
}

/// Random reducible matrix of dimension ≤ 10 with basic classes of period
/// `period` (or 1), transient classes above and below them, no two basic
/// classes on a common chain, and random weights `V`.
pub fn random_reducible<R: Rng>(rng: &mut R, period: usize) -> Kernel {
    loop {
        let mut blocks: Vec<(DMatrix<f64>, u8)> = Vec::new(); // 0 top, 1 basic, 2 bottom
        let n_top = rng.random_range(0..=2);
        let n_basic = rng.random_range(1..=2);
        let n_bottom = rng.random_range(0..=1);
        for _ in 0..n_top {
            let s = rng.random_range(1..=2);
            blocks.push((DMatrix::from_fn(s, s, |_, _| rng.random_range(0.0..1.0)), 0));
        }
        for b in 0..n_basic {
            let p = if b == 0 {
                period
            } else {
                if rng.random_bool(0.5) {
                    1
                } else {
                    period
                }
            };
            let s = p * rng.random_range(1..=2) + rng.random_range(0..p.max(1));
            let s = s.max(p);
            blocks.push((cyclic_block(rng, s, p), 1));
        }
        for _ in 0..n_bottom {
            let s = rng.random_range(1..=2);
            blocks.push((DMatrix::from_fn(s, s, |_, _| rng.random_range(0.0..1.0)), 2));
        }
        let n: usize = blocks.iter().map(|b| b.0.nrows()).sum();
        if n > 10 {
            continue;
        }
        let mut m = DMatrix::zeros(n, n);
        let mut offsets = Vec::new();
        let mut o = 0;
        for (b, kind) in &blocks {
            let rho = spectral_radius(b);
            let target = if *kind == 1 {
                1.0
            } else {
                rng.random_range(0.1..0.5)
            };
            let scale = if rho > 0.0 { target / rho } else { 1.0 };
            let s = b.nrows();
            m.view_mut((o, o), (s, s)).copy_from(&(b * scale));
            offsets.push((o, s, *kind));
            o += s;
        }
        for (a, &(oa, sa, ka)) in offsets.iter().enumerate() {
            for &(ob, sb, kb) in offsets.iter().skip(a + 1) {
                let allowed = ka == 0 || (ka == 1 && kb == 2) || (ka == 2 && kb == 2);
                if !allowed || rng.random_bool(0.4) {
                    continue;
                }
                for x in oa..oa + sa {
                    for y in ob..ob + sb {
                        if rng.random_bool(0.5) {
                            m[(x, y)] = rng.random_range(0.0..0.5);
                        }
                    }
                }
            }
        }
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(rng);
        let permuted = DMatrix::from_fn(n, n, |x, y| m[(perm[x], perm[y])]);
        let weights = (0..n).map(|_| rng.random_range(0.5..3.0)).collect();
        let space = Arc::new(WeightedSpace::with_weights(weights).unwrap());
        let scale = rng.random_range(0.3..2.0);
        let k = Kernel::new(space, permuted * scale).unwrap();
        if second_modulus_ratio(&k) <= 0.8 {
            return k;
        }
    }
}

/// Upper-bidiagonal chain of `len` basic singleton classes with radius `rho`.
pub fn triangular_chain(len: usize, rho: f64) -> Kernel {
    let rows: Vec<Vec<f64>> = (0..len)
        .map(|x| {
            (0..len)
                .map(|y| if y == x || y == x + 1 { rho } else { 0.0 })
                .collect()
        })
        .collect();
    Kernel::from_rows(&rows).unwrap()
}

/// Dense matrix power by repeated multiplication (independent of `Kernel::pow`).
pub fn naive_power(m: &DMatrix<f64>, n: usize) -> DMatrix<f64> {
    let mut out = DMatrix::identity(m.nrows(), m.ncols());
    for _ in 0..n {
        out = &out * m;
    }
    out
}

/// Least-squares slope of `ys` against `xs`.
pub fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Dense nonnegative matrix of dimension `n` with about `density` of its
/// entries positive, on random weights in `[0.5, 3)`.
pub fn random_kernel<R: Rng>(rng: &mut R, n: usize, density: f64) -> Kernel {
    let m = DMatrix::from_fn(n, n, |_, _| {
        if rng.random_bool(density) {
            rng.random_range(0.0..1.0)
        } else {
            0.0
        }
    });
    let weights = (0..n).map(|_| rng.random_range(0.5..3.0)).collect();
    Kernel::new(Arc::new(WeightedSpace::with_weights(weights).unwrap()), m).unwrap()
}

/// Sums of the words in `{D, M}^n` with exactly 0, 1 and 2 letters `D`, by
/// enumerating all `2^n` words.
pub fn word_expansion_groups(d: &DMatrix<f64>, m: &DMatrix<f64>, n: u32) -> [DMatrix<f64>; 3] {
    let dim = d.nrows();
    let mut groups = [
        DMatrix::zeros(dim, dim),
        DMatrix::zeros(dim, dim),
        DMatrix::zeros(dim, dim),
    ];
    for word in 0u32..(1 << n) {
        let count = word.count_ones() as usize;
        if count > 2 {
            continue;
        }
        let mut product = DMatrix::identity(dim, dim);
        for letter in 0..n {
            product = if word >> letter & 1 == 1 {
                &product * d
            } else {
                &product * m
            };
        }
        groups[count] += product;
    }
    groups
}

/// Random sub-Markov generator of dimension ≤ 8 made of 1–3 irreducible blocks
/// in upper block-triangular position. Each block is a conservative irreducible
/// generator minus `κ I`, so its decay rate is exactly `κ`; rates leaving a
/// block are paid out of its `κ`. Decay rates are drawn from a small set so that
/// equal-decay (several basic classes, chains) occur often.
pub fn random_generator<R: Rng>(rng: &mut R) -> DMatrix<f64> {
    let n_blocks = rng.random_range(1..=3);
    let sizes: Vec<usize> = (0..n_blocks).map(|_| rng.random_range(1..=3)).collect();
    let n: usize = sizes.iter().sum();
    let mut l = DMatrix::zeros(n, n);
    let mut offsets = Vec::new();
    let mut o = 0;
    for &s in &sizes {
        offsets.push((o, s));
        o += s;
    }
    for (b, &(ob, sb)) in offsets.iter().enumerate() {
        let kappa = [0.2, 0.5, rng.random_range(0.0..1.0)][rng.random_range(0..3)];
        for x in ob..ob + sb {
            for y in ob..ob + sb {
                if x != y && rng.random_bool(0.6) {
                    l[(x, y)] = rng.random_range(0.1..2.0);
                }
            }
            if sb > 1 {
                let next = ob + (x - ob + 1) % sb;
                if l[(x, next)] == 0.0 {
                    l[(x, next)] = rng.random_range(0.1..2.0);
                }
            }
            // Spend part of the killing budget on later blocks.
            let mut budget = kappa * rng.random_range(0.0..1.0);
            for &(oc, sc) in offsets.iter().skip(b + 1) {
                if rng.random_bool(0.5) {
                    let y = oc + rng.random_range(0..sc);
                    let rate = budget * rng.random_range(0.0..1.0);
                    l[(x, y)] += rate;
                    budget -= rate;
                }
            }
        }
        for x in ob..ob + sb {
            let within: f64 = (ob..ob + sb).filter(|&y| y != x).map(|y| l[(x, y)]).sum();
            l[(x, x)] = -within - kappa;
        }
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    DMatrix::from_fn(n, n, |x, y| l[(perm[x], perm[y])])
}

/// `exp(A)` by scaling and squaring a degree-30 Taylor polynomial.
pub fn expm_oracle(a: &DMatrix<f64>) -> DMatrix<f64> {
    let norm = a.abs().row_sum().max();
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as u32
    } else {
        0
    };
    let scaled = a / f64::from(1u32 << squarings);
    let n = a.nrows();
    let mut term = DMatrix::identity(n, n);
    let mut sum = term.clone();
    for k in 1..=30 {
        term = &term * &scaled / k as f64;
        sum += &term;
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}
