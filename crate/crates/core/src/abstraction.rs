//! Finite abstraction of a continuous system: grid the analysis box, sample
//! inputs, integrate one step per (node, input) with RK4 while accumulating
//! the supply integral as the edge weight.

use std::collections::hash_map::DefaultHasher;
use std::collections::VecDeque;
use std::fmt::Write as _;
use std::hash::{Hash, Hasher};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{eval_supply, SupplyRate, SystemModel};

/// Uniform rectangular grid over the analysis box. Index order is row-major
/// with the first dimension slowest. A one-node axis sits at the interval
/// midpoint; otherwise endpoints are exact nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub bounds: Vec<[f64; 2]>,
    pub counts: Vec<usize>,
    coords: Vec<Vec<f64>>,
    spacing: Vec<f64>,
    strides: Vec<usize>,
    n_nodes: usize,
}

impl Grid {
    pub fn new(bounds: Vec<[f64; 2]>, counts: Vec<usize>) -> Result<Grid> {
        if bounds.is_empty() || bounds.len() != counts.len() {
            return Err(Error::Validation(
                "grid bounds and counts must be non-empty and agree in length".into(),
            ));
        }
        for (d, b) in bounds.iter().enumerate() {
            if !b[0].is_finite() || !b[1].is_finite() || b[1] <= b[0] {
                return Err(Error::Validation(format!(
                    "grid bounds[{d}] = [{}, {}] must have positive finite width",
                    b[0], b[1]
                )));
            }
            if counts[d] == 0 {
                return Err(Error::Validation(format!("grid counts[{d}] must be >= 1")));
            }
        }
        let coords: Vec<Vec<f64>> = bounds
            .iter()
            .zip(&counts)
            .map(|(b, &n)| crate::model::linspace(b[0], b[1], n))
            .collect();
        let spacing = bounds
            .iter()
            .zip(&counts)
            .map(|(b, &n)| {
                if n == 1 {
                    b[1] - b[0]
                } else {
                    (b[1] - b[0]) / (n - 1) as f64
                }
            })
            .collect();
        let mut strides = vec![1usize; counts.len()];
        for d in (0..counts.len().saturating_sub(1)).rev() {
            strides[d] = strides[d + 1] * counts[d + 1];
        }
        let n_nodes = counts.iter().product();
        Ok(Grid {
            bounds,
            counts,
            coords,
            spacing,
            strides,
            n_nodes,
        })
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn min_spacing(&self) -> f64 {
        self.spacing.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Half the grid cell diagonal; the worst-case snap displacement.
    pub fn half_diagonal(&self) -> f64 {
        0.5 * self
            .spacing
            .iter()
            .map(|s| s * s)
            .sum::<f64>()
            .sqrt()
    }

    pub fn multi_index(&self, node: usize) -> Vec<usize> {
        assert!(node < self.n_nodes);
        let mut rem = node;
        self.strides
            .iter()
            .map(|&s| {
                let i = rem / s;
                rem %= s;
                i
            })
            .collect()
    }

    pub fn node_index(&self, multi: &[usize]) -> usize {
        multi
            .iter()
            .zip(&self.strides)
            .map(|(&i, &s)| i * s)
            .sum()
    }

    pub fn node_coords(&self, node: usize) -> Vec<f64> {
        self.multi_index(node)
            .iter()
            .zip(&self.coords)
            .map(|(&i, axis)| axis[i])
            .collect()
    }

    /// True when x lies in the box, with a relative slack so that endpoints
    /// landing on the boundary up to rounding are kept.
    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().zip(&self.bounds).all(|(&v, b)| {
            let slack = 1e-9 * (b[1] - b[0]);
            v >= b[0] - slack && v <= b[1] + slack
        })
    }

    /// Nearest node with a deterministic tie rule: the higher index wins only
    /// when it is strictly closer by more than a relative epsilon, so points
    /// at (or within rounding of) a cell midpoint snap to the lower index.
    pub fn nearest_node(&self, x: &[f64]) -> usize {
        let mut multi = Vec::with_capacity(self.dim());
        for d in 0..self.dim() {
            let axis = &self.coords[d];
            let n = axis.len();
            if n == 1 {
                multi.push(0);
                continue;
            }
            let t = (x[d] - self.bounds[d][0]) / self.spacing[d];
            let lo = (t.floor() as isize).clamp(0, n as isize - 2) as usize;
            let d_lo = (x[d] - axis[lo]).abs();
            let d_hi = (axis[lo + 1] - x[d]).abs();
            let eps = self.spacing[d] * 1e-9;
            multi.push(if d_hi < d_lo - eps { lo + 1 } else { lo });
        }
        self.node_index(&multi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub src: usize,
    pub input: usize,
    pub dst: usize,
    pub weight: f64,
}

/// Weighted digraph abstraction. Edges are sorted by (src, input); forward
/// and reverse adjacency are precomputed for the walk solvers.
#[derive(Debug, Clone)]
pub struct TransitionGraph {
    pub grid: Grid,
    pub input_levels: Vec<Vec<f64>>,
    pub edges: Vec<Edge>,
    pub step_h: f64,
    pub substeps: usize,
    pub out_of_box_count: usize,
    pub max_abs_weight: f64,
    fwd_offsets: Vec<usize>,
    rev_offsets: Vec<usize>,
    rev_edge_ids: Vec<usize>,
}

impl TransitionGraph {
    fn assemble(
        grid: Grid,
        input_levels: Vec<Vec<f64>>,
        edges: Vec<Edge>,
        step_h: f64,
        substeps: usize,
        out_of_box_count: usize,
    ) -> TransitionGraph {
        let n = grid.n_nodes();
        let mut fwd_offsets = vec![0usize; n + 1];
        for e in &edges {
            fwd_offsets[e.src + 1] += 1;
        }
        for i in 0..n {
            fwd_offsets[i + 1] += fwd_offsets[i];
        }
        let mut rev_counts = vec![0usize; n + 1];
        for e in &edges {
            rev_counts[e.dst + 1] += 1;
        }
        let mut rev_offsets = rev_counts.clone();
        for i in 0..n {
            rev_offsets[i + 1] += rev_offsets[i];
        }
        let mut cursor = rev_offsets.clone();
        let mut rev_edge_ids = vec![0usize; edges.len()];
        for (id, e) in edges.iter().enumerate() {
            rev_edge_ids[cursor[e.dst]] = id;
            cursor[e.dst] += 1;
        }
        let max_abs_weight = edges.iter().fold(0.0f64, |m, e| m.max(e.weight.abs()));
        TransitionGraph {
            grid,
            input_levels,
            edges,
            step_h,
            substeps,
            out_of_box_count,
            max_abs_weight,
            fwd_offsets,
            rev_offsets,
            rev_edge_ids,
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.grid.n_nodes()
    }

    /// Edge ids leaving `node`.
    pub fn out_edges(&self, node: usize) -> std::ops::Range<usize> {
        self.fwd_offsets[node]..self.fwd_offsets[node + 1]
    }

    /// Edge ids entering `node`.
    pub fn in_edges(&self, node: usize) -> &[usize] {
        &self.rev_edge_ids[self.rev_offsets[node]..self.rev_offsets[node + 1]]
    }

    /// Hand-built graph for tests and oracles: nodes are abstract points on
    /// a line, inputs are labeled by index.
    pub fn synthetic(
        n_nodes: usize,
        n_inputs: usize,
        edge_list: &[(usize, usize, usize, f64)],
    ) -> Result<TransitionGraph> {
        if n_nodes == 0 || n_inputs == 0 {
            return Err(Error::Graph("synthetic graph needs nodes and inputs".into()));
        }
        let hi = if n_nodes == 1 { 1.0 } else { (n_nodes - 1) as f64 };
        let grid = Grid::new(vec![[0.0, hi]], vec![n_nodes])?;
        let mut edges = Vec::with_capacity(edge_list.len());
        for &(src, input, dst, weight) in edge_list {
            if src >= n_nodes || dst >= n_nodes {
                return Err(Error::Graph(format!("edge ({src},{input},{dst}) out of range")));
            }
            if input >= n_inputs {
                return Err(Error::Graph(format!("input {input} out of range")));
            }
            if !weight.is_finite() {
                return Err(Error::Graph(format!("edge ({src},{input},{dst}) weight not finite")));
            }
            edges.push(Edge { src, input, dst, weight });
        }
        edges.sort_by_key(|e| (e.src, e.input));
        if edges.windows(2).any(|w| w[0].src == w[1].src && w[0].input == w[1].input) {
            return Err(Error::Graph("duplicate (src, input) pair".into()));
        }
        let input_levels = (0..n_inputs).map(|i| vec![i as f64]).collect();
        Ok(TransitionGraph::assemble(grid, input_levels, edges, 1.0, 1, 0))
    }

    /// Threshold separating genuine negative cycles from quadrature noise on
    /// lossless loops: cycles of weight in [-band, 0) are treated as zero.
    pub fn zero_band(&self) -> f64 {
        self.n_nodes() as f64 * 1e-12 * self.max_abs_weight.max(1.0)
    }

    /// Same topology with every weight negated. A storage candidate S for
    /// supply s corresponds to -S for -s under the reversed inequality, so
    /// duality tests pair this with negated candidates.
    pub fn negated(&self) -> TransitionGraph {
        let mut g = self.clone();
        for e in &mut g.edges {
            e.weight = -e.weight;
        }
        g
    }

    /// Structural hash binding storage fields to the graph they came from.
    pub fn fingerprint(&self) -> u64 {
        let mut h = DefaultHasher::new();
        for b in &self.grid.bounds {
            b[0].to_bits().hash(&mut h);
            b[1].to_bits().hash(&mut h);
        }
        self.grid.counts.hash(&mut h);
        for u in &self.input_levels {
            for v in u {
                v.to_bits().hash(&mut h);
            }
        }
        self.step_h.to_bits().hash(&mut h);
        self.substeps.hash(&mut h);
        for e in &self.edges {
            e.src.hash(&mut h);
            e.input.hash(&mut h);
            e.dst.hash(&mut h);
            e.weight.to_bits().hash(&mut h);
        }
        h.finish()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("src,input,dst,weight\n");
        for e in &self.edges {
            writeln!(out, "{},{},{},{}", e.src, e.input, e.dst, e.weight).unwrap();
        }
        out
    }
}

/// One abstraction step: RK4 flow of the state jointly with the running
/// supply integral, under constant input, split into `substeps` equal
/// sub-intervals. Returns the endpoint and the integrated supply.
pub fn step(
    model: &SystemModel,
    supply: &SupplyRate,
    x: &[f64],
    u: &[f64],
    h: f64,
    substeps: usize,
) -> Result<(Vec<f64>, f64)> {
    if h <= 0.0 || !h.is_finite() {
        return Err(Error::Validation("step size must be positive".into()));
    }
    if substeps == 0 {
        return Err(Error::Validation("substeps must be >= 1".into()));
    }
    let n = model.state_dim;
    let hs = h / substeps as f64;
    let mut state = x.to_vec();
    let mut integral = 0.0f64;

    // augmented right-hand side (f(x,u), s(u, h(x,u)))
    let rhs = |x: &[f64], sub: usize| -> Result<(Vec<f64>, f64)> {
        if !model.guard_ok(x) {
            return Err(Error::Integration(format!(
                "state guard violated at substep {sub}, x={x:?}"
            )));
        }
        let dx = model.eval_dynamics(x, u);
        if dx.iter().any(|v| !v.is_finite()) {
            return Err(Error::Integration(format!(
                "dynamics non-finite at substep {sub}, x={x:?}"
            )));
        }
        let s = eval_supply(supply, model, x, u)
            .map_err(|e| Error::Integration(format!("substep {sub}: {e}")))?;
        Ok((dx, s))
    };

    for sub in 0..substeps {
        let (k1, s1) = rhs(&state, sub)?;
        let x2: Vec<f64> = (0..n).map(|i| state[i] + 0.5 * hs * k1[i]).collect();
        let (k2, s2) = rhs(&x2, sub)?;
        let x3: Vec<f64> = (0..n).map(|i| state[i] + 0.5 * hs * k2[i]).collect();
        let (k3, s3) = rhs(&x3, sub)?;
        let x4: Vec<f64> = (0..n).map(|i| state[i] + hs * k3[i]).collect();
        let (k4, s4) = rhs(&x4, sub)?;
        for i in 0..n {
            state[i] += hs / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        integral += hs / 6.0 * (s1 + 2.0 * s2 + 2.0 * s3 + s4);
        if state.iter().any(|v| !v.is_finite()) || !integral.is_finite() {
            return Err(Error::Integration(format!(
                "state non-finite after substep {sub}"
            )));
        }
    }
    Ok((state, integral))
}

/// CFL-like default step: smallest grid spacing over the largest dynamics
/// magnitude seen at box corners and input levels.
pub fn default_step(model: &SystemModel, grid: &Grid) -> Result<f64> {
    let levels = model.input_set.levels(model.input_dim)?;
    let mut max_f = 0.0f64;
    for x in model.probe_states() {
        if !model.guard_ok(&x) {
            continue;
        }
        for u in &levels {
            let dx = model.eval_dynamics(&x, u);
            for v in dx {
                max_f = max_f.max(v.abs());
            }
        }
    }
    let h = if max_f > 1e-12 {
        grid.min_spacing() / max_f
    } else {
        grid.min_spacing()
    };
    Ok(h)
}

/// Build the weighted digraph: one candidate edge per (node, input), endpoint
/// snapped to the nearest node, out-of-box transitions discarded and counted.
pub fn build_graph(
    model: &SystemModel,
    supply: &SupplyRate,
    grid: &Grid,
    h: f64,
    substeps: usize,
) -> Result<TransitionGraph> {
    if grid.bounds != model.state_bounds {
        return Err(Error::Validation(
            "grid must be built over the model's state_bounds".into(),
        ));
    }
    let levels = model.input_set.levels(model.input_dim)?;
    let snap_budget = grid.half_diagonal() * (1.0 + 1e-9) + 1e-12;

    let per_node: Vec<(Vec<Edge>, usize)> = (0..grid.n_nodes())
        .into_par_iter()
        .map(|node| -> Result<(Vec<Edge>, usize)> {
            let x = grid.node_coords(node);
            let mut edges = Vec::with_capacity(levels.len());
            let mut discarded = 0usize;
            for (ui, u) in levels.iter().enumerate() {
                let (endpoint, w) = step(model, supply, &x, u, h, substeps)
                    .map_err(|e| Error::Integration(format!("node {node}, input {ui}: {e}")))?;
                if !grid.contains(&endpoint) {
                    discarded += 1;
                    continue;
                }
                let dst = grid.nearest_node(&endpoint);
                let snapped = grid.node_coords(dst);
                let gap: f64 = snapped
                    .iter()
                    .zip(&endpoint)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                if gap > snap_budget {
                    return Err(Error::Internal(format!(
                        "snap displacement {gap} exceeds half diagonal at node {node}, input {ui}"
                    )));
                }
                edges.push(Edge {
                    src: node,
                    input: ui,
                    dst,
                    weight: w,
                });
            }
            Ok((edges, discarded))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut edges = Vec::new();
    let mut out_of_box = 0usize;
    for (mut e, d) in per_node {
        edges.append(&mut e);
        out_of_box += d;
    }
    Ok(TransitionGraph::assemble(
        grid.clone(),
        levels,
        edges,
        h,
        substeps,
        out_of_box,
    ))
}

/// Node set abstraction for reachability queries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeMask {
    bits: Vec<bool>,
}

impl NodeMask {
    pub fn new(n: usize) -> NodeMask {
        NodeMask { bits: vec![false; n] }
    }

    pub fn get(&self, node: usize) -> bool {
        self.bits[node]
    }

    pub fn set(&mut self, node: usize) {
        self.bits[node] = true;
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("node,bit\n");
        for (i, b) in self.bits.iter().enumerate() {
            writeln!(out, "{},{}", i, u8::from(*b)).unwrap();
        }
        out
    }
}

fn bfs(graph: &TransitionGraph, start: usize, forward: bool) -> NodeMask {
    let mut mask = NodeMask::new(graph.n_nodes());
    mask.set(start);
    let mut queue = VecDeque::from([start]);
    while let Some(v) = queue.pop_front() {
        let next: Vec<usize> = if forward {
            graph.out_edges(v).map(|id| graph.edges[id].dst).collect()
        } else {
            graph.in_edges(v).iter().map(|&id| graph.edges[id].src).collect()
        };
        for t in next {
            if !mask.get(t) {
                mask.set(t);
                queue.push_back(t);
            }
        }
    }
    mask
}

/// Forward closure from the ground node (edges ignored for weight).
pub fn reachable_set(graph: &TransitionGraph, ground: usize) -> Result<NodeMask> {
    if ground >= graph.n_nodes() {
        return Err(Error::Graph(format!("ground node {ground} out of range")));
    }
    Ok(bfs(graph, ground, true))
}

/// Closure over reversed edges: nodes that can be steered into the ground.
pub fn controllable_set(graph: &TransitionGraph, ground: usize) -> Result<NodeMask> {
    if ground >= graph.n_nodes() {
        return Err(Error::Graph(format!("ground node {ground} out of range")));
    }
    Ok(bfs(graph, ground, false))
}
