use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::QsdError;
use crate::kernel::{matrix_from_rows, Kernel, WeightedSpace, REL_TOL};

/// Per-state mixture `ρ_R(x) R(x,·) + ρ_δ(x) δ_x + ρ_∂(x) δ_∂`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LazyChain {
    pub r: Vec<Vec<f64>>,
    pub rho_r: Vec<f64>,
    pub rho_delta: Vec<f64>,
    pub rho_absorb: Vec<f64>,
}

impl LazyChain {
    /// Homogeneous chain with `R` uniform on `n` states.
    pub fn uniform(n: usize, rho_delta: f64, rho_absorb: f64) -> Self {
        Self {
            r: vec![vec![1.0 / n as f64; n]; n],
            rho_r: vec![1.0 - rho_delta - rho_absorb; n],
            rho_delta: vec![rho_delta; n],
            rho_absorb: vec![rho_absorb; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.r.len()
    }

    pub fn validate(&self) -> Result<(), QsdError> {
        let n = self.dim();
        for (field, v) in [
            ("rho_r", &self.rho_r),
            ("rho_delta", &self.rho_delta),
            ("rho_absorb", &self.rho_absorb),
        ] {
            if v.len() != n {
                return Err(QsdError::Shape {
                    field,
                    expected: n,
                    actual: v.len(),
                });
            }
            if let Some((state, &value)) = v.iter().enumerate().find(|(_, &p)| !(p >= 0.0)) {
                return Err(QsdError::NegativeProbability {
                    state,
                    field,
                    value,
                });
            }
        }
        for state in 0..n {
            let sum = self.rho_r[state] + self.rho_delta[state] + self.rho_absorb[state];
            if (sum - 1.0).abs() > REL_TOL {
                return Err(QsdError::ProbabilitySum { state, sum });
            }
            let row = &self.r[state];
            if row.len() != n {
                return Err(QsdError::Shape {
                    field: "r",
                    expected: n,
                    actual: row.len(),
                });
            }
            if let Some(&value) = row.iter().find(|&&p| !(p >= 0.0)) {
                return Err(QsdError::NegativeProbability {
                    state,
                    field: "r",
                    value,
                });
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > REL_TOL * n as f64 {
                return Err(QsdError::NotStochastic { state, sum });
            }
        }
        Ok(())
    }

    pub fn max_rho_delta(&self) -> f64 {
        self.rho_delta.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_rho_absorb(&self) -> f64 {
        self.rho_absorb.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum ModelVariant {
    Explicit {
        rows: Vec<Vec<f64>>,
    },
    LazyChain(LazyChain),
    /// Nearest-neighbour chain on `0..n`; a down-step from 0 or an up-step from
    /// `n − 1` is absorbed, as is the `kill` mass.
    BirthDeath {
        up: Vec<f64>,
        down: Vec<f64>,
        kill: Vec<f64>,
    },
    /// `P(x, y) = p(x, y) ν({y})`.
    Density {
        density: Vec<Vec<f64>>,
        masses: Vec<f64>,
    },
}

/// Declarative absorbed-chain model; `weights` defaults to `V ≡ 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbsorbedModel {
    #[serde(flatten)]
    pub variant: ModelVariant,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

impl AbsorbedModel {
    pub fn new(variant: ModelVariant) -> Self {
        Self {
            variant,
            weights: None,
        }
    }

    pub fn with_weights(mut self, weights: Vec<f64>) -> Self {
        self.weights = Some(weights);
        self
    }

    pub fn dim(&self) -> usize {
        match &self.variant {
            ModelVariant::Explicit { rows } => rows.len(),
            ModelVariant::LazyChain(chain) => chain.dim(),
            ModelVariant::BirthDeath { up, .. } => up.len(),
            ModelVariant::Density { masses, .. } => masses.len(),
        }
    }

    pub fn space(&self) -> Result<Arc<WeightedSpace>, QsdError> {
        let n = self.dim();
        let space = match &self.weights {
            Some(w) if w.len() != n => {
                return Err(QsdError::Shape {
                    field: "weights",
                    expected: n,
                    actual: w.len(),
                })
            }
            Some(w) => WeightedSpace::with_weights(w.clone())?,
            None => WeightedSpace::uniform(n),
        };
        Ok(Arc::new(space))
    }

    /// Sub-Markov kernel of the chain killed at absorption.
    pub fn compile(&self) -> Result<Kernel, QsdError> {
        let n = self.dim();
        let entries = match &self.variant {
            ModelVariant::Explicit { rows } => matrix_from_rows(rows)?,
            ModelVariant::LazyChain(chain) => {
                chain.validate()?;
                DMatrix::from_fn(n, n, |x, y| {
                    let lazy = if x == y { chain.rho_delta[x] } else { 0.0 };
                    chain.rho_r[x] * chain.r[x][y] + lazy
                })
            }
            ModelVariant::BirthDeath { up, down, kill } => {
                for (field, v) in [("down", down), ("kill", kill)] {
                    if v.len() != n {
                        return Err(QsdError::Shape {
                            field,
                            expected: n,
                            actual: v.len(),
                        });
                    }
                }
                let mut m = DMatrix::zeros(n, n);
                for x in 0..n {
                    for (field, value) in [("up", up[x]), ("down", down[x]), ("kill", kill[x])] {
                        if !(value >= 0.0) {
                            return Err(QsdError::NegativeProbability {
                                state: x,
                                field,
                                value,
                            });
                        }
                    }
                    let stay = 1.0 - up[x] - down[x] - kill[x];
                    if stay < -REL_TOL {
                        return Err(QsdError::ProbabilitySum {
                            state: x,
                            sum: 1.0 - stay,
                        });
                    }
                    // Rounding residue would create a spurious self-loop and change the period.
                    m[(x, x)] = if stay <= REL_TOL { 0.0 } else { stay };
                    if x + 1 < n {
                        m[(x, x + 1)] = up[x];
                    }
                    if x > 0 {
                        m[(x, x - 1)] = down[x];
                    }
                }
                m
            }
            ModelVariant::Density { density, masses } => {
                let p = matrix_from_rows(density)?;
                if masses.len() != p.ncols() {
                    return Err(QsdError::Shape {
                        field: "masses",
                        expected: p.ncols(),
                        actual: masses.len(),
                    });
                }
                DMatrix::from_fn(n, n, |x, y| p[(x, y)] * masses[y])
            }
        };
        let kernel = Kernel::new(self.space()?, entries)?;
        for (state, &sum) in kernel.row_sums().iter().enumerate() {
            if !crate::kernel::approx_le(sum, 1.0) {
                return Err(QsdError::NotSubMarkov { state, sum });
            }
        }
        Ok(kernel)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lazy_chain_without_laziness_is_r() {
        let chain = LazyChain {
            r: vec![vec![0.3, 0.7], vec![0.5, 0.5]],
            rho_r: vec![1.0, 1.0],
            rho_delta: vec![0.0, 0.0],
            rho_absorb: vec![0.0, 0.0],
        };
        let k = AbsorbedModel::new(ModelVariant::LazyChain(chain.clone()))
            .compile()
            .unwrap();
        assert_eq!(k.rows(), chain.r);
    }

    #[test]
    fn lazy_chain_without_moves_is_diagonal() {
        let chain = LazyChain {
            r: vec![vec![0.3, 0.7], vec![0.5, 0.5]],
            rho_r: vec![0.0, 0.0],
            rho_delta: vec![0.4, 0.9],
            rho_absorb: vec![0.6, 0.1],
        };
        let k = AbsorbedModel::new(ModelVariant::LazyChain(chain))
            .compile()
            .unwrap();
        assert_eq!(k.rows(), vec![vec![0.4, 0.0], vec![0.0, 0.9]]);
    }

    #[test]
    fn lazy_chain_row_sums_are_survival() {
        let chain = LazyChain::uniform(50, 0.3, 0.2);
        let k = AbsorbedModel::new(ModelVariant::LazyChain(chain))
            .compile()
            .unwrap();
        for s in k.row_sums().iter() {
            assert!((s - 0.8).abs() < 1e-15);
        }
    }

    #[test]
    fn lazy_chain_sum_violation_names_state() {
        let mut chain = LazyChain::uniform(3, 0.3, 0.2);
        chain.rho_absorb[2] = 0.3;
        let err = AbsorbedModel::new(ModelVariant::LazyChain(chain))
            .compile()
            .unwrap_err();
        assert!(matches!(err, QsdError::ProbabilitySum { state: 2, .. }));
    }

    #[test]
    fn birth_death_tridiagonal() {
        let model = AbsorbedModel::new(ModelVariant::BirthDeath {
            up: vec![0.2; 5],
            down: vec![0.6; 5],
            kill: vec![0.2; 5],
        });
        let k = model.compile().unwrap();
        let expected: Vec<Vec<f64>> = (0..5)
            .map(|x| {
                (0..5)
                    .map(|y| match y as isize - x as isize {
                        1 => 0.2,
                        -1 => 0.6,
                        _ => 0.0,
                    })
                    .collect()
            })
            .collect();
        assert_eq!(k.rows(), expected);
    }

    #[test]
    fn serde_round_trip() {
        let model = AbsorbedModel::new(ModelVariant::LazyChain(LazyChain::uniform(3, 0.3, 0.2)))
            .with_weights(vec![1.0, 2.0, 3.0]);
        let json = serde_json::to_string(&model).unwrap();
        assert!(json.contains("\"variant\":\"lazy_chain\""));
        let back: AbsorbedModel = serde_json::from_str(&json).unwrap();
        assert_eq!(back, model);
    }
}
