use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};

use nalgebra::DMatrix;
use petgraph::algo::tarjan_scc;
use petgraph::graph::{DiGraph, NodeIndex};

/// Directed graph `x → y ⇔ P(x, y) > 0`. Zero patterns are exact, so every
/// structural statement derived from it is exact as well.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SupportGraph {
    succ: Vec<Vec<usize>>,
}

impl SupportGraph {
    pub fn from_matrix(m: &DMatrix<f64>) -> Self {
        let succ = (0..m.nrows())
            .map(|x| (0..m.ncols()).filter(|&y| m[(x, y)] > 0.0).collect())
            .collect();
        Self { succ }
    }

    pub fn from_adjacency(succ: Vec<Vec<usize>>) -> Self {
        Self { succ }
    }

    pub fn len(&self) -> usize {
        self.succ.len()
    }

    pub fn is_empty(&self) -> bool {
        self.succ.is_empty()
    }

    pub fn successors(&self, x: usize) -> &[usize] {
        &self.succ[x]
    }

    /// States reachable from `sources` by paths of length ≥ 0.
    pub fn reachable_from(&self, sources: &[usize]) -> Vec<bool> {
        let mut seen = vec![false; self.len()];
        let mut queue: VecDeque<usize> = VecDeque::new();
        for &s in sources {
            if !seen[s] {
                seen[s] = true;
                queue.push_back(s);
            }
        }
        while let Some(x) = queue.pop_front() {
            for &y in &self.succ[x] {
                if !seen[y] {
                    seen[y] = true;
                    queue.push_back(y);
                }
            }
        }
        seen
    }
}

/// Strongly connected classes in a deterministic topological order (a class
/// precedes every class it reaches); ties go to the class with the smallest
/// state index. States within a class are sorted.
pub fn strongly_connected_classes(graph: &SupportGraph) -> Vec<Vec<usize>> {
    let n = graph.len();
    let mut g: DiGraph<(), ()> = DiGraph::with_capacity(n, 0);
    let nodes: Vec<NodeIndex> = (0..n).map(|_| g.add_node(())).collect();
    for x in 0..n {
        for &y in graph.successors(x) {
            g.add_edge(nodes[x], nodes[y], ());
        }
    }
    let mut sccs: Vec<Vec<usize>> = tarjan_scc(&g)
        .into_iter()
        .map(|c| {
            let mut states: Vec<usize> = c.into_iter().map(|v| v.index()).collect();
            states.sort_unstable();
            states
        })
        .collect();
    sccs.sort_by_key(|c| c[0]);

    let mut class_of = vec![0; n];
    for (c, states) in sccs.iter().enumerate() {
        for &x in states {
            class_of[x] = c;
        }
    }
    let m = sccs.len();
    let mut indegree = vec![0usize; m];
    let mut out: Vec<Vec<usize>> = vec![Vec::new(); m];
    for x in 0..n {
        for &y in graph.successors(x) {
            let (a, b) = (class_of[x], class_of[y]);
            if a != b {
                out[a].push(b);
                indegree[b] += 1;
            }
        }
    }
    // Classes are indexed by their smallest state, so a min-heap on the class
    // index realises the smallest-state tie-break.
    let mut heap: BinaryHeap<Reverse<usize>> =
        (0..m).filter(|&c| indegree[c] == 0).map(Reverse).collect();
    let mut order = Vec::with_capacity(m);
    while let Some(Reverse(c)) = heap.pop() {
        order.push(c);
        for &b in &out[c] {
            indegree[b] -= 1;
            if indegree[b] == 0 {
                heap.push(Reverse(b));
            }
        }
    }
    let mut slots: Vec<Option<Vec<usize>>> = sccs.into_iter().map(Some).collect();
    order
        .into_iter()
        .map(|c| slots[c].take().expect("each class emitted once"))
        .collect()
}

/// `reach[x][y]` is true iff `y` is reachable from `x` (paths of length ≥ 0).
pub fn reachable_sets(graph: &SupportGraph) -> Vec<Vec<bool>> {
    (0..graph.len())
        .map(|x| graph.reachable_from(&[x]))
        .collect()
}
