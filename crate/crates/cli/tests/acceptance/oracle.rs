//! Exhaustive reference values for the four storage fields on small graphs.
//!
//! Everything here is computed from the walk semantics directly: transitive
//! reachability by saturation, negative simple cycles by exhaustive DFS, and
//! bounded-horizon optima by value iteration over exactly n rounds. No code
//! is shared with the solver under test.

use cyclo_core::{ExtendedReal, TransitionGraph};
use ExtendedReal::{Finite, NegInf, PosInf};

pub struct Oracle {
    n: usize,
    /// reach[a][b]: a walk (possibly empty) from a to b exists.
    reach: Vec<Vec<bool>>,
    /// neg_member[v]: v lies on some simple cycle of negative total weight.
    neg_member: Vec<bool>,
}

impl Oracle {
    pub fn build(graph: &TransitionGraph) -> Self {
        let n = graph.n_nodes();
        let mut reach = vec![vec![false; n]; n];
        for v in 0..n {
            reach[v][v] = true;
        }
        for e in &graph.edges {
            reach[e.src][e.dst] = true;
        }
        // Saturate instead of Floyd-Warshall: repeat until no change.
        loop {
            let mut changed = false;
            for a in 0..n {
                for b in 0..n {
                    if reach[a][b] {
                        continue;
                    }
                    if (0..n).any(|m| reach[a][m] && reach[m][b]) {
                        reach[a][b] = true;
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }

        let mut neg_member = vec![false; n];
        let adj = adjacency(graph, n);
        let mut on_path = vec![false; n];
        let mut stack = Vec::new();
        for start in 0..n {
            // Cycles are enumerated once each, rooted at their least node.
            cycle_dfs(
                start,
                start,
                0.0,
                &adj,
                &mut on_path,
                &mut stack,
                &mut neg_member,
            );
        }

        Oracle { n, reach, neg_member }
    }

    /// Bounded shortest walks over exactly n synchronous updates, +inf
    /// absorbing. A forward round pushes values across each edge src -> dst
    /// (so a node accumulates walks arriving at it from the initialized
    /// set); a reverse round pushes dst -> src (walks leaving the node).
    fn value_iter(&self, graph: &TransitionGraph, init: Vec<f64>, forward: bool) -> Vec<f64> {
        let mut cur = init;
        for _ in 0..self.n {
            let mut next = cur.clone();
            for e in &graph.edges {
                let (from, to) = if forward { (e.src, e.dst) } else { (e.dst, e.src) };
                let cand = cur[from] + e.weight;
                if cand < next[to] {
                    next[to] = cand;
                }
            }
            cur = next;
        }
        cur
    }

    /// The four fields for the given ground, in the order
    /// (available, required, constrained available, constrained required).
    pub fn fields(&self, graph: &TransitionGraph, ground: usize) -> [Vec<ExtendedReal>; 4] {
        let n = self.n;
        let zeros = vec![0.0; n];
        let mut single = vec![f64::INFINITY; n];
        single[ground] = 0.0;

        // min over walks leaving v / arriving at v, any endpoint.
        let m_out = self.value_iter(graph, zeros.clone(), false);
        let m_in = self.value_iter(graph, zeros, true);
        // min over walks v -> ground / ground -> v.
        let d_to_g = self.value_iter(graph, single.clone(), false);
        let d_from_g = self.value_iter(graph, single, true);

        let mut s_a = Vec::with_capacity(n);
        let mut s_r = Vec::with_capacity(n);
        let mut s_ac = Vec::with_capacity(n);
        let mut s_rc = Vec::with_capacity(n);
        for v in 0..n {
            // v can feed a negative cycle: walks out of v are unbounded below.
            let cyc_out = (0..n).any(|c| self.neg_member[c] && self.reach[v][c]);
            // a negative cycle can feed v.
            let cyc_in = (0..n).any(|c| self.neg_member[c] && self.reach[c][v]);

            s_a.push(if cyc_out { PosInf } else { Finite(-m_out[v]) });
            s_r.push(if cyc_in { NegInf } else { Finite(m_in[v]) });

            // Constrained available: walks v -> ground. Poisoned when some
            // negative cycle sits on such a walk, i.e. v -> c and c -> ground.
            let cyc_via_out = (0..n)
                .any(|c| self.neg_member[c] && self.reach[v][c] && self.reach[c][ground]);
            s_ac.push(if cyc_via_out {
                PosInf
            } else if d_to_g[v].is_infinite() {
                NegInf
            } else {
                Finite(-d_to_g[v])
            });

            let cyc_via_in = (0..n)
                .any(|c| self.neg_member[c] && self.reach[ground][c] && self.reach[c][v]);
            s_rc.push(if cyc_via_in {
                NegInf
            } else if d_from_g[v].is_infinite() {
                PosInf
            } else {
                Finite(d_from_g[v])
            });
        }
        [s_a, s_r, s_ac, s_rc]
    }
}

fn adjacency(graph: &TransitionGraph, n: usize) -> Vec<Vec<(usize, f64)>> {
    let mut adj = vec![Vec::new(); n];
    for e in &graph.edges {
        adj[e.src].push((e.dst, e.weight));
    }
    adj
}

/// Walk all simple cycles whose least node is `start`; mark members of any
/// cycle with strictly negative total weight.
fn cycle_dfs(
    start: usize,
    at: usize,
    acc: f64,
    adj: &[Vec<(usize, f64)>],
    on_path: &mut [bool],
    stack: &mut Vec<usize>,
    neg_member: &mut [bool],
) {
    on_path[at] = true;
    stack.push(at);
    for &(dst, w) in &adj[at] {
        if dst == start {
            if acc + w < 0.0 {
                for &v in stack.iter() {
                    neg_member[v] = true;
                }
            }
        } else if dst > start && !on_path[dst] {
            cycle_dfs(start, dst, acc + w, adj, on_path, stack, neg_member);
        }
    }
    stack.pop();
    on_path[at] = false;
}

/// Deterministic synthetic graph: per (src, input) slot an edge is emitted
/// with probability `density`, destination uniform, weight `gen_w()`.
pub fn random_graph<R: rand::Rng>(
    rng: &mut R,
    n: usize,
    n_inputs: usize,
    density: f64,
    mut gen_w: impl FnMut(&mut R) -> f64,
) -> TransitionGraph {
    let mut edges = Vec::new();
    for src in 0..n {
        for input in 0..n_inputs {
            if rng.gen::<f64>() < density {
                let dst = rng.gen_range(0..n);
                edges.push((src, input, dst, gen_w(rng)));
            }
        }
    }
    TransitionGraph::synthetic(n, n_inputs, &edges).expect("slots are unique by construction")
}
