use std::collections::VecDeque;

use num_integer::Integer;
use serde::{Deserialize, Serialize};

use crate::kernel::{
    block_spectral_radius, principal_block, strongly_connected_classes, Kernel, SupportGraph,
};

/// Relative tolerance for deciding that a class radius equals `r(P)`.
pub const BASIC_TOL: f64 = 1e-9;

/// Block structure of a nonnegative matrix: its strongly connected classes in
/// topological order, their radii, and the cyclic structure of each class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassStructure {
    pub r: f64,
    pub classes: Vec<Vec<usize>>,
    pub class_of: Vec<usize>,
    /// Direct successor classes (sorted, without the class itself).
    pub successors: Vec<Vec<usize>>,
    pub class_rho: Vec<f64>,
    pub basic: Vec<bool>,
    /// gcd of closed-walk lengths; 0 for a class with no closed walk.
    pub period: Vec<usize>,
    /// Breadth-first level within the class, reduced modulo the period.
    pub cyclic_index: Vec<usize>,
}

impl ClassStructure {
    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn basic_classes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(|&c| self.basic[c])
    }

    /// States of class `c` in cyclic class `delta`.
    pub fn cyclic_class(&self, c: usize, delta: usize) -> Vec<usize> {
        self.classes[c]
            .iter()
            .copied()
            .filter(|&x| self.cyclic_index[x] == delta)
            .collect()
    }

    /// lcm of the periods of the basic classes (1 when there are none).
    pub fn lcm_period(&self) -> usize {
        self.basic_classes()
            .map(|c| self.period[c].max(1))
            .fold(1, |a, b| a.lcm(&b))
    }

    /// Number of basic classes on the longest chain of accessible classes
    /// starting at each class.
    pub fn chain_length(&self) -> Vec<usize> {
        let mut lambda = vec![0; self.len()];
        for c in (0..self.len()).rev() {
            let below = self.successors[c]
                .iter()
                .map(|&s| lambda[s])
                .max()
                .unwrap_or(0);
            lambda[c] = below + usize::from(self.basic[c]);
        }
        lambda
    }

    /// True when class `a` reaches class `b` (a class reaches itself).
    pub fn class_reaches(&self, a: usize, b: usize) -> bool {
        let mut seen = vec![false; self.len()];
        let mut stack = vec![a];
        seen[a] = true;
        while let Some(c) = stack.pop() {
            if c == b {
                return true;
            }
            for &s in &self.successors[c] {
                if !seen[s] {
                    seen[s] = true;
                    stack.push(s);
                }
            }
        }
        false
    }
}

pub fn class_structure(p: &Kernel) -> ClassStructure {
    let graph = p.support_graph();
    let classes = strongly_connected_classes(&graph);
    let n = p.dim();
    let mut class_of = vec![0; n];
    for (c, states) in classes.iter().enumerate() {
        for &x in states {
            class_of[x] = c;
        }
    }
    let successors = classes
        .iter()
        .enumerate()
        .map(|(c, states)| {
            let mut succ: Vec<usize> = states
                .iter()
                .flat_map(|&x| graph.successors(x).iter().map(|&y| class_of[y]))
                .filter(|&s| s != c)
                .collect();
            succ.sort_unstable();
            succ.dedup();
            succ
        })
        .collect();
    let class_rho: Vec<f64> = classes
        .iter()
        .map(|states| block_spectral_radius(&principal_block(p.entries(), states)))
        .collect();
    let r = class_rho.iter().copied().fold(0.0, f64::max);
    let basic = class_rho
        .iter()
        .map(|&rho| r > 0.0 && (rho - r).abs() <= BASIC_TOL * r)
        .collect();
    let mut period = vec![0; classes.len()];
    let mut cyclic_index = vec![0; n];
    for (c, states) in classes.iter().enumerate() {
        let (d, levels) = class_period(&graph, states, &class_of, c);
        period[c] = d;
        for (&x, &level) in states.iter().zip(&levels) {
            cyclic_index[x] = if d > 0 { level % d } else { 0 };
        }
    }
    ClassStructure {
        r,
        classes,
        class_of,
        successors,
        class_rho,
        basic,
        period,
        cyclic_index,
    }
}

/// Period of one class and the breadth-first level of each of its states,
/// measured from the smallest state along intra-class edges.
fn class_period(
    graph: &SupportGraph,
    states: &[usize],
    class_of: &[usize],
    c: usize,
) -> (usize, Vec<usize>) {
    let local = |x: usize| states.binary_search(&x).expect("state belongs to class");
    let mut level = vec![usize::MAX; states.len()];
    level[0] = 0;
    let mut queue = VecDeque::from([states[0]]);
    while let Some(x) = queue.pop_front() {
        let lx = level[local(x)];
        for &y in graph.successors(x) {
            if class_of[y] == c && level[local(y)] == usize::MAX {
                level[local(y)] = lx + 1;
                queue.push_back(y);
            }
        }
    }
    let mut d = 0usize;
    for &x in states {
        for &y in graph.successors(x) {
            if class_of[y] == c {
                let diff = (level[local(x)] + 1).abs_diff(level[local(y)]);
                d = d.gcd(&diff);
            }
        }
    }
    (d, level)
}

/// Growth exponent `j(x)`: one less than the number of basic classes on the
/// longest accessible chain from the class of `x`, floored at zero.
pub fn growth_exponent(cs: &ClassStructure) -> Vec<usize> {
    let lambda = cs.chain_length();
    cs.class_of
        .iter()
        .map(|&c| lambda[c].saturating_sub(1))
        .collect()
}

/// Total irreducibility on an atomic space: every state reaches, in at least
/// one step, every state reached in at least one step from anywhere.
pub fn is_totally_irreducible(p: &Kernel) -> bool {
    let graph = p.support_graph();
    let n = graph.len();
    let reach_plus: Vec<Vec<bool>> = (0..n)
        .map(|x| graph.reachable_from(graph.successors(x)))
        .collect();
    let union: Vec<bool> = (0..n).map(|y| reach_plus.iter().any(|r| r[y])).collect();
    reach_plus
        .iter()
        .all(|r| r.iter().zip(&union).all(|(&a, &u)| a || !u))
}
