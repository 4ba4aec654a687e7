//! Storage fields over the transition graph and the ground-relative
//! verdict.
//!
//! All four fields are walk extremizations. With m(x) denoting an infimum
//! of walk weights:
//!   s_a(x)  = -m(x),  m over walks leaving x        (reverse, all sources)
//!   s_r(x)  =  m(x),  m over walks arriving at x    (forward, all sources)
//!   s_ac(x) = -m(x),  m over walks x -> ground      (reverse, ground source)
//!   s_rc(x) =  m(x),  m over walks ground -> x      (forward, ground source)
//!
//! The verdict is computed twice from independent routes (closed walks
//! through the ground vs the pointwise field comparison) and the two must
//! agree; a mismatch is an internal error, never silently resolved.

pub mod extended;
pub mod walks;

use std::cmp::Ordering;
use std::fmt::Write as _;

use crate::abstraction::{Grid, TransitionGraph};
use crate::error::{Error, Result};
use extended::{ExtendedReal, Finite, NegInf, PosInf};
use walks::{shortest_walks, Cycle, Direction, WalkDistances, WalkSource};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StorageKind {
    Available,
    RequiredSupply,
    ConstrainedAvailable,
    ConstrainedRequired,
}

impl StorageKind {
    pub fn label(&self) -> &'static str {
        match self {
            StorageKind::Available => "s_a",
            StorageKind::RequiredSupply => "s_r",
            StorageKind::ConstrainedAvailable => "s_ac",
            StorageKind::ConstrainedRequired => "s_rc",
        }
    }
}

/// One storage field sampled on the grid nodes. `fingerprint` ties the
/// field to the graph it was computed from.
#[derive(Debug, Clone)]
pub struct StorageField {
    pub kind: StorageKind,
    pub values: Vec<ExtendedReal>,
    pub ground: Option<usize>,
    pub fingerprint: u64,
}

impl StorageField {
    pub fn n_nodes(&self) -> usize {
        self.values.len()
    }

    pub fn value(&self, node: usize) -> ExtendedReal {
        self.values[node]
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn min(&self) -> ExtendedReal {
        self.values
            .iter()
            .copied()
            .reduce(|a, b| a.min(b))
            .expect("field over nonempty grid")
    }

    pub fn max(&self) -> ExtendedReal {
        self.values
            .iter()
            .copied()
            .reduce(|a, b| a.max(b))
            .expect("field over nonempty grid")
    }

    /// Rows `node,x1..xn,value,tag` with tag in {-inf, fin, +inf}.
    pub fn to_csv(&self, grid: &Grid) -> String {
        assert_eq!(grid.n_nodes(), self.values.len(), "field/grid size mismatch");
        let mut s = String::from("node");
        for d in 0..grid.dim() {
            let _ = write!(s, ",x{}", d + 1);
        }
        s.push_str(",value,tag\n");
        for (node, v) in self.values.iter().enumerate() {
            let _ = write!(s, "{node}");
            for c in grid.node_coords(node) {
                let _ = write!(s, ",{c}");
            }
            let tag = match v {
                NegInf => "-inf",
                Finite(_) => "fin",
                PosInf => "+inf",
            };
            let _ = writeln!(s, ",{v},{tag}");
        }
        s
    }
}

/// Closed walk witnessing falsification: traversing `nodes[i]` under input
/// level `inputs[i]` reaches `nodes[i+1]` (cyclically).
#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub nodes: Vec<usize>,
    pub inputs: Vec<usize>,
    pub total_weight: f64,
    pub passes_through_ground: bool,
}

impl Certificate {
    fn from_cycle(graph: &TransitionGraph, cycle: &Cycle, ground: usize) -> Self {
        let inputs = cycle
            .edge_ids
            .iter()
            .map(|&id| graph.edges[id].input)
            .collect();
        Certificate {
            nodes: cycle.nodes.clone(),
            inputs,
            total_weight: cycle.total_weight,
            passes_through_ground: cycle.nodes.contains(&ground),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// First line `total_weight=<w>`, then one `node,input` row per edge.
    pub fn to_csv(&self) -> String {
        let mut s = format!("total_weight={}\n", self.total_weight);
        for (node, input) in self.nodes.iter().zip(&self.inputs) {
            let _ = writeln!(s, "{node},{input}");
        }
        s
    }
}

#[derive(Debug, Clone)]
pub struct Verdict {
    /// No genuine negative cycle anywhere in the graph.
    pub cyclo_dissipative: bool,
    /// No genuine negative closed walk through the ground node.
    pub cyclo_dissipative_wrt_ground: bool,
    /// Available storage finite at every node.
    pub dissipative: bool,
    pub ground: usize,
    /// Infimum weight of closed walks through the ground (route A value).
    pub ground_closed_walk_min: ExtendedReal,
    pub certificate: Option<Certificate>,
    pub s_a: StorageField,
    pub s_r: StorageField,
    pub s_ac: StorageField,
    pub s_rc: StorageField,
}

impl Verdict {
    pub fn fields(&self) -> [&StorageField; 4] {
        [&self.s_a, &self.s_r, &self.s_ac, &self.s_rc]
    }
}

fn field_from(
    kind: StorageKind,
    wd: &WalkDistances,
    negate: bool,
    ground: Option<usize>,
    graph: &TransitionGraph,
) -> StorageField {
    let values = wd
        .dist
        .iter()
        .map(|&d| if negate { d.neg() } else { d })
        .collect();
    StorageField {
        kind,
        values,
        ground,
        fingerprint: graph.fingerprint(),
    }
}

/// Maximal supply extractable from each node along admissible walks.
/// Nonnegative; +inf where a genuine negative cycle is reachable.
pub fn available_storage(graph: &TransitionGraph) -> StorageField {
    let wd = shortest_walks(graph, WalkSource::AllNodes, Direction::Reverse);
    field_from(StorageKind::Available, &wd, true, None, graph)
}

/// Minimal supply needed to arrive at each node from anywhere.
/// Nonpositive; -inf on nodes fed by a genuine negative cycle.
pub fn required_supply(graph: &TransitionGraph) -> StorageField {
    let wd = shortest_walks(graph, WalkSource::AllNodes, Direction::Forward);
    field_from(StorageKind::RequiredSupply, &wd, false, None, graph)
}

fn check_ground(graph: &TransitionGraph, ground: usize) -> Result<()> {
    if ground >= graph.n_nodes() {
        return Err(Error::Graph(format!(
            "ground node {ground} out of range for {} nodes",
            graph.n_nodes()
        )));
    }
    Ok(())
}

/// Extractable supply along walks constrained to end at the ground.
/// -inf where the ground cannot be reached at all.
pub fn constrained_available(graph: &TransitionGraph, ground: usize) -> Result<StorageField> {
    check_ground(graph, ground)?;
    let wd = shortest_walks(graph, WalkSource::Node(ground), Direction::Reverse);
    Ok(field_from(
        StorageKind::ConstrainedAvailable,
        &wd,
        true,
        Some(ground),
        graph,
    ))
}

/// Minimal supply to reach each node starting from the ground.
/// +inf where the ground does not steer.
pub fn constrained_required(graph: &TransitionGraph, ground: usize) -> Result<StorageField> {
    check_ground(graph, ground)?;
    let wd = shortest_walks(graph, WalkSource::Node(ground), Direction::Forward);
    Ok(field_from(
        StorageKind::ConstrainedRequired,
        &wd,
        false,
        Some(ground),
        graph,
    ))
}

/// Full analysis: four sweeps, two independent verdict routes, certificate
/// when falsified. Errors if the routes disagree or the ground is invalid.
pub fn verdict(graph: &TransitionGraph, ground: usize) -> Result<Verdict> {
    check_ground(graph, ground)?;
    let band = graph.zero_band();

    let fwd_all = shortest_walks(graph, WalkSource::AllNodes, Direction::Forward);
    let rev_all = shortest_walks(graph, WalkSource::AllNodes, Direction::Reverse);
    let rev_g = shortest_walks(graph, WalkSource::Node(ground), Direction::Reverse);
    let fwd_g = shortest_walks(graph, WalkSource::Node(ground), Direction::Forward);

    // a genuine negative cycle is direction independent; both all-source
    // sweeps must see the same answer
    if fwd_all.has_negative_cycle() != rev_all.has_negative_cycle() {
        return Err(Error::Internal(
            "negative cycle seen by one sweep direction only".into(),
        ));
    }
    let cyclo_dissipative = !fwd_all.has_negative_cycle();

    let s_a = field_from(StorageKind::Available, &rev_all, true, None, graph);
    let s_r = field_from(StorageKind::RequiredSupply, &fwd_all, false, None, graph);
    let s_ac = field_from(
        StorageKind::ConstrainedAvailable,
        &rev_g,
        true,
        Some(ground),
        graph,
    );
    let s_rc = field_from(
        StorageKind::ConstrainedRequired,
        &fwd_g,
        false,
        Some(ground),
        graph,
    );

    let dissipative = s_a.all_finite();

    // route A: best closed walk through the ground, one edge out of the
    // ground then the best walk back
    let mut value_a = Finite(0.0);
    for id in graph.out_edges(ground) {
        let e = &graph.edges[id];
        let cand = rev_g.dist[e.dst].add_finite(e.weight);
        value_a = value_a.min(cand);
    }
    let wrt_a = value_a.cmp_total(&Finite(-band)) != Ordering::Less;

    // route B: extractable-at never exceeds required-from, up to the band
    let wrt_b = (0..graph.n_nodes()).all(|x| {
        let lhs = s_ac.values[x];
        let rhs = s_rc.values[x].add_finite(band);
        lhs.cmp_total(&rhs) != Ordering::Greater
    });

    if wrt_a != wrt_b {
        return Err(Error::Internal(format!(
            "ground verdict routes disagree (closed-walk {wrt_a}, field comparison {wrt_b})"
        )));
    }

    let certificate = fwd_all
        .negative_cycle
        .as_ref()
        .map(|c| Certificate::from_cycle(graph, c, ground));

    Ok(Verdict {
        cyclo_dissipative,
        cyclo_dissipative_wrt_ground: wrt_a,
        dissipative,
        ground,
        ground_closed_walk_min: value_a,
        certificate,
        s_a,
        s_r,
        s_ac,
        s_rc,
    })
}
