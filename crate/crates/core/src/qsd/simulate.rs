use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::QsdError;
use crate::kernel::Kernel;

const DEFAULT_CHECKPOINTS: [usize; 7] = [1, 2, 5, 10, 20, 30, 50];

/// `{1, 2, 5, 10, 20, 30, 50}` capped at the horizon (the horizon itself is
/// always included).
pub fn default_checkpoints(horizon: usize) -> Vec<usize> {
    let mut out: Vec<usize> = DEFAULT_CHECKPOINTS
        .iter()
        .copied()
        .filter(|&n| n <= horizon)
        .collect();
    if horizon > 0 && out.last() != Some(&horizon) {
        out.push(horizon);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub n: usize,
    pub survivors: u64,
    pub survival: f64,
    /// Empirical law of the survivors; absent when none survive.
    pub law: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Simulation {
    pub paths: u64,
    pub seed: u64,
    pub start: usize,
    pub checkpoints: Vec<Checkpoint>,
    /// Surviving fraction at each step `0..=horizon`.
    pub survival_curve: Vec<f64>,
    /// Every path was absorbed before the first checkpoint.
    pub extinct: bool,
}

struct Tally {
    alive: Vec<u64>,
    counts: Vec<Vec<u64>>,
}

impl Tally {
    fn new(horizon: usize, checkpoints: usize, dim: usize) -> Self {
        Self {
            alive: vec![0; horizon + 1],
            counts: vec![vec![0; dim]; checkpoints],
        }
    }

    fn merge(mut self, other: Tally) -> Tally {
        for (a, b) in self.alive.iter_mut().zip(other.alive) {
            *a += b;
        }
        for (row, other_row) in self.counts.iter_mut().zip(other.counts) {
            for (a, b) in row.iter_mut().zip(other_row) {
                *a += b;
            }
        }
        self
    }
}

/// Monte Carlo paths of the chain killed at rate `1 − Σ_y P(x, y)`.
///
/// Path `i` draws from a ChaCha8 stream `i` keyed by `seed`, and tallies are
/// integer counts merged associatively, so results do not depend on the
/// number of threads.
pub fn simulate_absorbed(
    p: &Kernel,
    start: usize,
    horizon: usize,
    paths: u64,
    seed: u64,
    checkpoints: Option<Vec<usize>>,
) -> Result<Simulation, QsdError> {
    let dim = p.dim();
    if start >= dim {
        return Err(QsdError::StateOutOfRange { state: start, dim });
    }
    if paths == 0 {
        return Err(crate::error::CertifyError::InvalidParameter {
            name: "paths",
            reason: "at least one path is required".into(),
        }
        .into());
    }
    let mut checkpoints = checkpoints.unwrap_or_else(|| default_checkpoints(horizon));
    checkpoints.retain(|&n| n <= horizon);
    checkpoints.sort_unstable();
    checkpoints.dedup();
    let mut slot = vec![None; horizon + 1];
    for (i, &n) in checkpoints.iter().enumerate() {
        slot[n] = Some(i);
    }
    let cumulative: Vec<Vec<(usize, f64)>> = (0..dim)
        .map(|x| {
            let mut acc = 0.0;
            (0..dim)
                .filter(|&y| p.get(x, y) > 0.0)
                .map(|y| {
                    acc += p.get(x, y);
                    (y, acc)
                })
                .collect()
        })
        .collect();

    let tally = (0..paths)
        .into_par_iter()
        .fold(
            || Tally::new(horizon, checkpoints.len(), dim),
            |mut tally, path| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(path);
                let mut x = start;
                tally.alive[0] += 1;
                if let Some(i) = slot[0] {
                    tally.counts[i][x] += 1;
                }
                for (n, &checkpoint) in slot.iter().enumerate().skip(1) {
                    let u: f64 = rng.random();
                    let row = &cumulative[x];
                    let idx = row.partition_point(|&(_, c)| c <= u);
                    match row.get(idx) {
                        Some(&(y, _)) => x = y,
                        None => break,
                    }
                    tally.alive[n] += 1;
                    if let Some(i) = checkpoint {
                        tally.counts[i][x] += 1;
                    }
                }
                tally
            },
        )
        .reduce(|| Tally::new(horizon, checkpoints.len(), dim), Tally::merge);

    let total = paths as f64;
    let survival_curve: Vec<f64> = tally.alive.iter().map(|&a| a as f64 / total).collect();
    let checkpoints: Vec<Checkpoint> = checkpoints
        .iter()
        .zip(&tally.counts)
        .map(|(&n, counts)| {
            let survivors = tally.alive[n];
            let law = (survivors > 0).then(|| {
                counts
                    .iter()
                    .map(|&c| c as f64 / survivors as f64)
                    .collect()
            });
            Checkpoint {
                n,
                survivors,
                survival: survivors as f64 / total,
                law,
            }
        })
        .collect();
    let extinct = checkpoints.first().is_some_and(|c| c.survivors == 0);
    Ok(Simulation {
        paths,
        seed,
        start,
        checkpoints,
        survival_curve,
        extinct,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kernel(rows: &[&[f64]]) -> Kernel {
        Kernel::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn full_absorption_kills_everything_at_step_one() {
        let p = kernel(&[&[0.0, 0.0], &[0.0, 0.0]]);
        let sim = simulate_absorbed(&p, 0, 5, 100, 1, None).unwrap();
        assert_eq!(sim.survival_curve, vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert!(sim.extinct);
        assert!(sim.checkpoints.iter().all(|c| c.law.is_none()));
    }

    #[test]
    fn markov_chain_always_survives() {
        let p = kernel(&[&[0.3, 0.7], &[0.6, 0.4]]);
        let sim = simulate_absorbed(&p, 1, 20, 500, 3, None).unwrap();
        assert!(sim.survival_curve.iter().all(|&s| s == 1.0));
        assert_eq!(
            sim.checkpoints.iter().map(|c| c.n).collect::<Vec<_>>(),
            vec![1, 2, 5, 10, 20]
        );
    }

    #[test]
    fn seeded_runs_are_reproducible() {
        let p = kernel(&[&[0.3, 0.5], &[0.2, 0.4]]);
        let a = simulate_absorbed(&p, 0, 10, 1000, 42, None).unwrap();
        let b = simulate_absorbed(&p, 0, 10, 1000, 42, None).unwrap();
        assert_eq!(a, b);
        let c = simulate_absorbed(&p, 0, 10, 1000, 43, None).unwrap();
        assert_ne!(a.survival_curve, c.survival_curve);
    }

    #[test]
    fn default_checkpoints_capped() {
        assert_eq!(default_checkpoints(30), vec![1, 2, 5, 10, 20, 30]);
        assert_eq!(default_checkpoints(7), vec![1, 2, 5, 7]);
    }
}
