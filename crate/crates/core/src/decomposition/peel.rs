use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::classes::{class_structure, growth_exponent, ClassStructure};
use crate::error::DecompositionError;
use crate::kernel::{
    perron_pair, principal_block, FunctionV, Kernel, MeasureV, SupportGraph, WeightedSpace,
};

/// Residual allowed in `Pη = rη`, relative to `r · max η`.
pub const EIGEN_TOL: f64 = 1e-8;

/// One peeling round: a top-most remaining basic class `C`, its Perron
/// eigenfunction extended to the states above it, and the invariant law of the
/// η-transform on `C`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeelRound {
    pub class: usize,
    /// `{η > 0}`: the class together with every remaining state reaching it.
    pub support: Vec<usize>,
    pub eta: Vec<f64>,
    pub period: usize,
    pub cyclic_classes: Vec<Vec<usize>>,
    /// Invariant probability of the η-transform, carried by the class.
    pub stationary: Vec<f64>,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeripheralItem {
    pub class: usize,
    pub cyclic_class: usize,
    pub eta: Vec<f64>,
    pub nu: Vec<f64>,
    pub e_set: Vec<usize>,
    pub f_set: Vec<usize>,
    /// `ν P^k` for `k = 0, …, d − 1`.
    pub nu_k: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeripheralDecomposition {
    pub r: f64,
    pub d: usize,
    pub j: Vec<usize>,
    pub items: Vec<PeripheralItem>,
    pub rounds: Vec<PeelRound>,
    pub structure: ClassStructure,
    pub weights: Vec<f64>,
}

impl PeripheralDecomposition {
    pub fn dim(&self) -> usize {
        self.j.len()
    }

    pub fn space(&self) -> Arc<WeightedSpace> {
        Arc::new(
            WeightedSpace::with_weights(self.weights.clone())
                .expect("weights validated at construction"),
        )
    }

    pub fn eta(&self, i: usize) -> FunctionV {
        FunctionV::new(self.space(), self.items[i].eta.clone()).expect("shape fixed")
    }

    pub fn nu(&self, i: usize) -> MeasureV {
        MeasureV::new(self.space(), self.items[i].nu.clone()).expect("nonnegative masses")
    }

    /// `η_{i,k} = r^{-k} η_i`.
    pub fn eta_k(&self, i: usize, k: usize) -> Vec<f64> {
        let scale = self.r.powi(-(k as i32));
        self.items[i].eta.iter().map(|e| e * scale).collect()
    }

    /// `Σ_i η_{i,k} ⊗ ν_{i,k}`: the limit of `r^{-nd-k} (nd+k)^{-j(x)} P^{nd+k}`.
    pub fn limit(&self, k: usize) -> DMatrix<f64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for (i, item) in self.items.iter().enumerate() {
            let eta = DVector::from_vec(self.eta_k(i, k));
            let nu = DVector::from_column_slice(&item.nu_k[k]);
            m += eta * nu.transpose();
        }
        m
    }
}

/// Peripheral decomposition by peeling basic classes top-down, followed by an
/// assembly of the limit of `r^{-nd} P^{nd} / (nd)^{j}` bottom-up.
pub fn peel_decomposition(p: &Kernel) -> Result<PeripheralDecomposition, DecompositionError> {
    let cs = class_structure(p);
    let r = cs.r;
    if !(r > 0.0) {
        return Err(DecompositionError::ZeroSpectralRadius);
    }
    let n = p.dim();
    let graph = p.support_graph();
    let rounds = peel_rounds(p, &cs)?;
    let d = cs.lcm_period();
    let j = growth_exponent(&cs);
    let lambda = cs.chain_length();

    let q = p.pow(d as u32).entries() / r.powi(d as i32);
    let q_graph = power_support(&graph, d);

    // Items: cyclic classes of the bottom basic classes.
    let round_of_class = |c: usize| {
        rounds
            .iter()
            .find(|rd| rd.class == c)
            .expect("every basic class is peeled")
    };
    let mut item_keys: Vec<(usize, usize)> = Vec::new();
    for c in cs.basic_classes() {
        if lambda[c] == 1 {
            for delta in 0..cs.period[c] {
                item_keys.push((c, delta));
            }
        }
    }
    let m = item_keys.len();
    let weights = p.space().weights();
    let v_at_least_one = p.space().weights_at_least_one();

    // Invariant measures of Q for each item and the matching scale of η.
    let mut nus: Vec<DVector<f64>> = Vec::with_capacity(m);
    let mut scales = Vec::with_capacity(m);
    for &(c, delta) in &item_keys {
        let round = round_of_class(c);
        let states = &round.cyclic_classes[delta];
        let mut nu = DVector::zeros(n);
        for &x in states {
            nu[x] = cs.period[c] as f64 * round.stationary[x] / round.eta[x];
        }
        let reach = q_graph.reachable_from(states);
        let below: Vec<usize> = (0..n)
            .filter(|&y| reach[y] && !states.contains(&y))
            .collect();
        if !below.is_empty() {
            let q_dd = principal_block(&q, &below);
            let rhs = DVector::from_fn(below.len(), |b, _| {
                states
                    .iter()
                    .map(|&x| nu[x] * q[(x, below[b])])
                    .sum::<f64>()
            });
            let a = (DMatrix::identity(below.len(), below.len()) - q_dd).transpose();
            let sol = a.lu().solve(&rhs).ok_or(DecompositionError::Singular(c))?;
            for (b, &y) in below.iter().enumerate() {
                nu[y] = sol[b].max(0.0);
            }
        }
        let s = if v_at_least_one {
            nu.sum()
        } else {
            nu.iter().zip(weights).map(|(a, v)| a * v).sum()
        };
        nus.push(nu / s);
        scales.push(s);
    }

    // Coefficients c(x, i) with Q^n(x, ·) / n^{j(x)} → Σ_i c(x, i) ν_i.
    let mut coef = DMatrix::<f64>::zeros(n, m);
    for c in (0..cs.len()).rev() {
        let states = &cs.classes[c];
        if lambda[c] == 0 {
            continue;
        }
        if cs.basic[c] && lambda[c] == 1 {
            let round = round_of_class(c);
            for (i, &(ci, delta)) in item_keys.iter().enumerate() {
                if ci == c {
                    for &x in &round.cyclic_classes[delta] {
                        coef[(x, i)] = round.eta[x] * scales[i];
                    }
                }
            }
            continue;
        }
        let target = if cs.basic[c] {
            lambda[c] - 1
        } else {
            lambda[c]
        };
        // β(x, i) = Σ_{y ∉ C, λ(y) = target} Q(x, y) c(y, i)
        let mut beta = DMatrix::<f64>::zeros(states.len(), m);
        for (a, &x) in states.iter().enumerate() {
            for y in 0..n {
                let cy = cs.class_of[y];
                if cy != c && lambda[cy] == target && q[(x, y)] > 0.0 {
                    for i in 0..m {
                        beta[(a, i)] += q[(x, y)] * coef[(y, i)];
                    }
                }
            }
        }
        let block = if cs.basic[c] {
            // Π_C β / J with Π_C = Σ_δ η|_δ ⊗ w_δ the limit of Q_CC^n.
            let round = round_of_class(c);
            let mut proj = DMatrix::<f64>::zeros(states.len(), states.len());
            for cyc in &round.cyclic_classes {
                for &x in cyc {
                    for &y in cyc {
                        let (a, b) = (local(states, x), local(states, y));
                        proj[(a, b)] =
                            round.eta[x] * cs.period[c] as f64 * round.stationary[y] / round.eta[y];
                    }
                }
            }
            proj * beta / (lambda[c] - 1) as f64
        } else {
            let q_cc = principal_block(&q, states);
            let a = DMatrix::identity(states.len(), states.len()) - q_cc;
            a.lu().solve(&beta).ok_or(DecompositionError::Singular(c))?
        };
        for (a, &x) in states.iter().enumerate() {
            for i in 0..m {
                coef[(x, i)] = block[(a, i)].max(0.0);
            }
        }
    }

    // E_i: states with j = 0 reaching exactly the i-th cyclic class under P^d.
    let reverse_q = reverse(&q_graph);
    let reached_by: Vec<Vec<bool>> = item_keys
        .iter()
        .map(|&(c, delta)| reverse_q.reachable_from(&cs.cyclic_class(c, delta)))
        .collect();
    let mut items = Vec::with_capacity(m);
    for (i, &(c, delta)) in item_keys.iter().enumerate() {
        let e_set: Vec<usize> = (0..n)
            .filter(|&x| {
                lambda[cs.class_of[x]] == 1
                    && reached_by[i][x]
                    && (0..m).all(|i2| i2 == i || !reached_by[i2][x])
            })
            .collect();
        let closure = q_graph.reachable_from(&e_set);
        let f_set: Vec<usize> = (0..n).filter(|&x| closure[x]).collect();
        let eta: Vec<f64> = (0..n)
            .map(|x| coef[(x, i)] / (d as f64).powi(j[x] as i32))
            .collect();
        let nu: Vec<f64> = nus[i].iter().copied().collect();
        let mut nu_k = Vec::with_capacity(d);
        let mut current = nus[i].clone();
        for _ in 0..d {
            nu_k.push(current.iter().copied().collect());
            current = (current.transpose() * p.entries()).transpose();
        }
        items.push(PeripheralItem {
            class: c,
            cyclic_class: delta,
            eta,
            nu,
            e_set,
            f_set,
            nu_k,
        });
    }

    Ok(PeripheralDecomposition {
        r,
        d,
        j,
        items,
        rounds,
        structure: cs,
        weights: weights.to_vec(),
    })
}

fn local(states: &[usize], x: usize) -> usize {
    states.binary_search(&x).expect("state in class")
}

fn peel_rounds(p: &Kernel, cs: &ClassStructure) -> Result<Vec<PeelRound>, DecompositionError> {
    let n = p.dim();
    let r = cs.r;
    let mut remaining = vec![true; n];
    let mut rounds = Vec::new();
    // Topological order makes the first remaining basic class top-most.
    for c in 0..cs.len() {
        if !cs.basic[c] || !remaining[cs.classes[c][0]] {
            continue;
        }
        let class = &cs.classes[c];
        let (_, u) = perron_pair(&principal_block(p.entries(), class));
        let mut eta = vec![0.0; n];
        for (a, &x) in class.iter().enumerate() {
            eta[x] = u[a];
        }
        // Remaining states above C, i.e. reaching it.
        let above: Vec<usize> = (0..n)
            .filter(|&x| remaining[x] && cs.class_of[x] != c && cs.class_reaches(cs.class_of[x], c))
            .collect();
        if !above.is_empty() {
            let p_uu = principal_block(p.entries(), &above);
            let rhs = DVector::from_fn(above.len(), |a, _| {
                class
                    .iter()
                    .map(|&y| p.get(above[a], y) * eta[y])
                    .sum::<f64>()
            });
            let a = DMatrix::identity(above.len(), above.len()) * r - p_uu;
            let sol = a.lu().solve(&rhs).ok_or(DecompositionError::Singular(c))?;
            for (a, &x) in above.iter().enumerate() {
                eta[x] = sol[a].max(0.0);
            }
        }
        let mut support: Vec<usize> = class.iter().chain(&above).copied().collect();
        support.sort_unstable();

        let eta_max = eta.iter().copied().fold(0.0, f64::max);
        let p_eta = p.entries() * DVector::from_column_slice(&eta);
        let residual = support
            .iter()
            .map(|&x| (p_eta[x] - r * eta[x]).abs())
            .fold(0.0, f64::max)
            / eta_max;
        let tolerance = EIGEN_TOL * r;
        if residual > tolerance {
            return Err(DecompositionError::Residual {
                class: c,
                residual,
                tolerance,
            });
        }
        let eta_fn = FunctionV::new(p.space().clone(), eta.clone())?;
        let doob = p.doob_transform_with_tol(&eta_fn, r, EIGEN_TOL)?;
        let class_local: Vec<usize> = class
            .iter()
            .map(|x| doob.support.binary_search(x).expect("class inside support"))
            .collect();
        let t_cc = principal_block(doob.kernel.entries(), &class_local);
        let (_, m_local) = perron_pair(&t_cc.transpose());
        let total = m_local.sum();
        let mut stationary = vec![0.0; n];
        for (a, &x) in class.iter().enumerate() {
            stationary[x] = m_local[a] / total;
        }
        let period = cs.period[c];
        let cyclic_classes = (0..period).map(|delta| cs.cyclic_class(c, delta)).collect();

        for &x in &support {
            remaining[x] = false;
        }
        rounds.push(PeelRound {
            class: c,
            support,
            eta,
            period,
            cyclic_classes,
            stationary,
            residual,
        });
    }
    Ok(rounds)
}

/// Support graph of `P^d`: `x → y` iff some path of length exactly `d` joins them.
pub fn power_support(graph: &SupportGraph, d: usize) -> SupportGraph {
    let n = graph.len();
    let succ = (0..n)
        .map(|x| {
            let mut frontier = vec![false; n];
            frontier[x] = true;
            for _ in 0..d {
                let mut next = vec![false; n];
                for (u, &on) in frontier.iter().enumerate() {
                    if on {
                        for &v in graph.successors(u) {
                            next[v] = true;
                        }
                    }
                }
                frontier = next;
            }
            (0..n).filter(|&y| frontier[y]).collect()
        })
        .collect();
    SupportGraph::from_adjacency(succ)
}

fn reverse(graph: &SupportGraph) -> SupportGraph {
    let n = graph.len();
    let mut pred = vec![Vec::new(); n];
    for x in 0..n {
        for &y in graph.successors(x) {
            pred[y].push(x);
        }
    }
    SupportGraph::from_adjacency(pred)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn kernel(rows: &[&[f64]]) -> Kernel {
        Kernel::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn identity_splits_into_point_masses() {
        let dec = peel_decomposition(&kernel(&[&[1.0, 0.0], &[0.0, 1.0]])).unwrap();
        assert_eq!(dec.d, 1);
        assert_eq!(dec.j, vec![0, 0]);
        assert_eq!(dec.items.len(), 2);
        for (i, item) in dec.items.iter().enumerate() {
            let mut unit = vec![0.0; 2];
            unit[i] = 1.0;
            assert_eq!(item.eta, unit);
            assert_eq!(item.nu, unit);
            assert_eq!(item.e_set, vec![i]);
        }
    }

    #[test]
    fn two_cycle_items_are_cyclic_classes() {
        let dec = peel_decomposition(&kernel(&[&[0.0, 0.9], &[0.9, 0.0]])).unwrap();
        assert_eq!(dec.d, 2);
        assert_relative_eq!(dec.r, 0.9, epsilon = 1e-14);
        assert_eq!(dec.rounds.len(), 1);
        assert_eq!(dec.rounds[0].support, vec![0, 1]);
        let total_eta: Vec<f64> = (0..2)
            .map(|x| dec.items.iter().map(|it| it.eta[x]).sum())
            .collect();
        assert!(total_eta.iter().all(|&e| e > 0.0));
        let limit = dec.limit(0);
        assert_relative_eq!(limit[(0, 0)], 1.0, epsilon = 1e-12);
        assert_relative_eq!(limit[(0, 1)], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn triangular_chain_limit() {
        let dec = peel_decomposition(&kernel(&[&[0.5, 0.5], &[0.0, 0.5]])).unwrap();
        assert_relative_eq!(dec.r, 0.5);
        assert_eq!(dec.j, vec![1, 0]);
        assert_eq!(dec.items.len(), 1);
        let item = &dec.items[0];
        assert_relative_eq!(item.nu[0], 0.0);
        assert_relative_eq!(item.nu[1], 1.0);
        // (P/r)^n = [[1, n], [0, 1]] so the normalized limit row is (0, 1).
        assert_relative_eq!(item.eta[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(item.eta[1], 1.0, epsilon = 1e-12);
        assert_eq!(item.e_set, vec![1]);
    }

    #[test]
    fn zero_radius_rejected() {
        let err = peel_decomposition(&kernel(&[&[0.0, 1.0], &[0.0, 0.0]])).unwrap_err();
        assert_eq!(err, DecompositionError::ZeroSpectralRadius);
    }

    #[test]
    fn power_support_respects_lengths() {
        let g = SupportGraph::from_adjacency(vec![vec![1], vec![0]]);
        assert_eq!(power_support(&g, 2).successors(0), &[0]);
        assert_eq!(power_support(&g, 3).successors(0), &[1]);
    }
}
