//! Numerical checkers for the dissipation-inequality claims: edgewise and
//! differential forms, the two-sided bound between constrained fields,
//! extremal characterizations, convex combination closure, the cross-ground
//! sums, and the external (supply-only) characterization.
//!
//! Margins are signed worst values of (lhs - rhs); tolerances are 1e-9 for
//! graph-exact quantities, 1e-7 for sampled differential margins, and a
//! discretization budget for continuous candidates compared against graph
//! fields. The budget is L_est * half_diagonal + 1e-9 where L_est is the
//! candidate's steepest chord slope between adjacent nodes: endpoint
//! snapping can move an evaluation point by at most half a cell diagonal.

use crate::abstraction::TransitionGraph;
use crate::error::{Error, Result};
use crate::model::{CandidateStorage, SupplyRate, SystemModel};
use crate::report::{CheckReport, Witness};
use crate::storage::extended::{ExtendedReal, Finite, NegInf, PosInf};
use crate::storage::walks::{shortest_walks, Direction, WalkSource};
use crate::storage::{constrained_available, constrained_required, StorageField};

pub const FIELD_EDGE_TOL: f64 = 1e-9;
pub const DIFFERENTIAL_TOL: f64 = 1e-7;
pub const GRAPH_SUM_TOL: f64 = 1e-9;
pub const FD_STEP: f64 = 1e-5;

/// What a dissipation-inequality edge scan runs on: a computed field
/// (graph-exact, tight tolerance) or a continuous candidate evaluated at
/// node coordinates (discretization budget).
#[derive(Clone, Copy)]
pub enum DieSubject<'a> {
    Field(&'a StorageField),
    Candidate(&'a CandidateStorage),
}

/// Standard checks assert S(dst) - S(src) <= w; the reversed sense covers
/// the mirrored inequality from optimal control by negating both the
/// candidate and the supply, which maps one form onto the other exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckSense {
    Standard,
    Reversed,
}

fn candidate_node_values(candidate: &CandidateStorage, graph: &TransitionGraph) -> Vec<f64> {
    (0..graph.n_nodes())
        .map(|n| candidate.eval(&graph.grid.node_coords(n)))
        .collect()
}

/// Steepest chord between axis-adjacent nodes; the Lipschitz estimate
/// behind the snapping budget.
fn chord_slope(values: &[f64], graph: &TransitionGraph) -> f64 {
    let grid = &graph.grid;
    let mut l: f64 = 0.0;
    for node in 0..grid.n_nodes() {
        let mi = grid.multi_index(node);
        for d in 0..grid.dim() {
            if mi[d] + 1 < grid.counts[d] {
                let mut up = mi.clone();
                up[d] += 1;
                let nb = grid.node_index(&up);
                let slope = (values[nb] - values[node]).abs() / grid.spacing()[d];
                if slope.is_finite() {
                    l = l.max(slope);
                }
            }
        }
    }
    l
}

fn candidate_budget(values: &[f64], graph: &TransitionGraph) -> f64 {
    chord_slope(values, graph) * graph.grid.half_diagonal() + 1e-9
}

fn resolve_subject(
    subject: DieSubject<'_>,
    graph: &TransitionGraph,
) -> (Vec<ExtendedReal>, f64) {
    match subject {
        DieSubject::Field(f) => {
            debug_assert_eq!(f.fingerprint, graph.fingerprint(), "field from another graph");
            (f.values.clone(), FIELD_EDGE_TOL)
        }
        DieSubject::Candidate(c) => {
            let raw = candidate_node_values(c, graph);
            let tol = candidate_budget(&raw, graph);
            (raw.into_iter().map(ExtendedReal::new).collect(), tol)
        }
    }
}

fn die_scan(
    name: &'static str,
    graph: &TransitionGraph,
    values: &[ExtendedReal],
    tol: f64,
) -> CheckReport {
    let mut worst = f64::NEG_INFINITY;
    let mut wit = Witness::None;
    for e in &graph.edges {
        // extended-value rules: -inf at the tail forces -inf at the head,
        // +inf at the head forces +inf at the tail; otherwise only
        // finite-finite edges constrain
        let viol = match (values[e.src], values[e.dst]) {
            (Finite(a), Finite(b)) => Some(b - a - e.weight),
            (Finite(_), PosInf) => Some(f64::INFINITY),
            (Finite(_), NegInf) => None,
            (NegInf, NegInf) => None,
            (NegInf, _) => Some(f64::INFINITY),
            (PosInf, _) => None,
        };
        if let Some(v) = viol {
            if v > worst {
                worst = v;
                wit = Witness::Edge {
                    src: e.src,
                    input: e.input,
                    dst: e.dst,
                };
            }
        }
    }
    CheckReport::from_margin(name, worst, tol, wit)
}

/// Edgewise dissipation inequality S(dst) <= S(src) + weight.
pub fn check_die_edges(subject: DieSubject<'_>, graph: &TransitionGraph) -> CheckReport {
    let (values, tol) = resolve_subject(subject, graph);
    die_scan("die_edges", graph, &values, tol)
}

fn central_fd(candidate: &CandidateStorage, x: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    let mut probe = x.to_vec();
    for d in 0..x.len() {
        probe[d] = x[d] + FD_STEP;
        let hi = candidate.eval(&probe);
        probe[d] = x[d] - FD_STEP;
        let lo = candidate.eval(&probe);
        probe[d] = x[d];
        g[d] = (hi - lo) / (2.0 * FD_STEP);
    }
    g
}

fn halton(mut i: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

const PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

/// Differential dissipation inequality grad(S) . f(x,u) <= s(u, y(x,u)) on
/// low-discrepancy samples of box x input hull. The seed offsets the
/// sample sequence. Gradient: analytic when the candidate has one, central
/// differences otherwise.
pub fn check_die_differential(
    model: &SystemModel,
    supply: &SupplyRate,
    candidate: &CandidateStorage,
    n_samples: usize,
    seed: u64,
    sense: CheckSense,
) -> CheckReport {
    if sense == CheckSense::Reversed {
        let s2 = supply.negated();
        let c2 = candidate.negated();
        return check_die_differential(model, &s2, &c2, n_samples, seed, CheckSense::Standard);
    }
    let n = model.state_dim;
    let m = model.input_dim;
    assert!(n + m <= PRIMES.len(), "sample dimension too high");
    let hull = match model.input_set.hull(m) {
        Ok(h) => h,
        Err(_) => {
            return CheckReport::vacuous("die_differential", DIFFERENTIAL_TOL, "empty-input-set")
                .with_seed(seed)
        }
    };

    let mut worst = f64::NEG_INFINITY;
    let mut wit = Witness::None;
    let mut used = 0usize;
    let mut i = 0u64;
    let cap = (n_samples as u64).saturating_mul(10);
    while used < n_samples && i < cap {
        let idx = seed.wrapping_add(i).wrapping_add(1);
        i += 1;
        let x: Vec<f64> = (0..n)
            .map(|d| {
                let t = halton(idx, PRIMES[d]);
                model.state_bounds[d][0]
                    + t * (model.state_bounds[d][1] - model.state_bounds[d][0])
            })
            .collect();
        let u: Vec<f64> = (0..m)
            .map(|e| {
                let t = halton(idx, PRIMES[n + e]);
                hull[e][0] + t * (hull[e][1] - hull[e][0])
            })
            .collect();
        if !model.guard_ok(&x) {
            continue;
        }
        used += 1;
        let f = model.eval_dynamics(&x, &u);
        let y = model.eval_output(&x, &u);
        let s = supply.eval(&u, &y);
        let g = candidate
            .gradient(&x)
            .unwrap_or_else(|| central_fd(candidate, &x));
        let margin: f64 = g.iter().zip(&f).map(|(gi, fi)| gi * fi).sum::<f64>() - s;
        if margin > worst {
            worst = margin;
            wit = Witness::Sample { x, u };
        }
    }
    if used == 0 {
        return CheckReport::vacuous("die_differential", DIFFERENTIAL_TOL, "no-admissible-samples")
            .with_seed(seed);
    }
    CheckReport::from_margin("die_differential", worst, DIFFERENTIAL_TOL, wit).with_seed(seed)
}

/// Two-sided bound s_ac(x) <= S(x) - S(x*) <= s_rc(x) on nodes where the
/// bounding field is finite.
pub fn check_sandwich(
    s_ac: &StorageField,
    s_rc: &StorageField,
    candidate: &CandidateStorage,
    ground: usize,
    graph: &TransitionGraph,
) -> CheckReport {
    debug_assert_eq!(s_ac.ground, Some(ground));
    debug_assert_eq!(s_rc.ground, Some(ground));
    let vals = candidate_node_values(candidate, graph);
    let tol = candidate_budget(&vals, graph);
    let s_star = vals[ground];
    let mut worst = f64::NEG_INFINITY;
    let mut wit = Witness::None;
    for node in 0..graph.n_nodes() {
        let diff = vals[node] - s_star;
        if let Finite(lo) = s_ac.values[node] {
            let v = lo - diff;
            if v > worst {
                worst = v;
                wit = Witness::Node(node);
            }
        }
        if let Finite(hi) = s_rc.values[node] {
            let v = diff - hi;
            if v > worst {
                worst = v;
                wit = Witness::Node(node);
            }
        }
    }
    CheckReport::from_margin("sandwich", worst, tol, wit)
}

/// Extremal characterizations: the unconstrained fields bound any
/// shift-normalized storage candidate, the constrained fields bound the
/// ground-normalized one. All four are shift invariant, so no sign
/// assumption on the candidate is needed.
pub fn check_extremality(
    s_a: &StorageField,
    s_r: &StorageField,
    s_ac: &StorageField,
    s_rc: &StorageField,
    candidate: &CandidateStorage,
    ground: usize,
    graph: &TransitionGraph,
) -> CheckReport {
    let vals = candidate_node_values(candidate, graph);
    let tol = candidate_budget(&vals, graph);
    let s_star = vals[ground];
    let min_s = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let max_s = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut worst = f64::NEG_INFINITY;
    let mut wit = Witness::None;
    let track = |v: f64, node: usize, worst: &mut f64, wit: &mut Witness| {
        if v > *worst {
            *worst = v;
            *wit = Witness::Node(node);
        }
    };
    for node in 0..graph.n_nodes() {
        let v = vals[node];
        if let Finite(a) = s_a.values[node] {
            track(a - (v - min_s), node, &mut worst, &mut wit);
        }
        if let Finite(rc) = s_rc.values[node] {
            track((v - s_star) - rc, node, &mut worst, &mut wit);
        }
        if let Finite(r) = s_r.values[node] {
            track((v - max_s) - r, node, &mut worst, &mut wit);
        }
        if let Finite(ac) = s_ac.values[node] {
            track(ac - (v - s_star), node, &mut worst, &mut wit);
        }
    }
    CheckReport::from_margin("extremality", worst, tol, wit)
}

fn ext_add(a: ExtendedReal, b: ExtendedReal) -> Option<ExtendedReal> {
    match (a, b) {
        (Finite(x), Finite(y)) => Some(Finite(x + y)),
        (PosInf, NegInf) | (NegInf, PosInf) => None,
        (PosInf, _) | (_, PosInf) => Some(PosInf),
        (NegInf, _) | (_, NegInf) => Some(NegInf),
    }
}

/// Cross-ground sums: extractable-to-b from a plus extractable-to-a from b
/// is nonpositive; the required counterparts sum to something nonnegative.
pub fn check_cross_ground(
    graph: &TransitionGraph,
    ground_a: usize,
    ground_b: usize,
) -> Result<CheckReport> {
    let a_ac = constrained_available(graph, ground_a)?;
    let b_ac = constrained_available(graph, ground_b)?;
    let a_rc = constrained_required(graph, ground_a)?;
    let b_rc = constrained_required(graph, ground_b)?;

    let sum_ac = ext_add(a_ac.values[ground_b], b_ac.values[ground_a]);
    let sum_rc = ext_add(a_rc.values[ground_b], b_rc.values[ground_a]);
    let (Some(sum_ac), Some(sum_rc)) = (sum_ac, sum_rc) else {
        return Ok(CheckReport::vacuous(
            "cross_ground",
            GRAPH_SUM_TOL,
            "mixed-infinite-sum",
        ));
    };
    let m_ac = sum_ac.to_f64();
    let m_rc = -sum_rc.to_f64();
    let (margin, wit) = if m_ac >= m_rc {
        (m_ac, Witness::Node(ground_b))
    } else {
        (m_rc, Witness::Node(ground_a))
    };
    Ok(CheckReport::from_margin(
        "cross_ground",
        margin,
        GRAPH_SUM_TOL,
        wit,
    ))
}

/// Convex combination of two edge-inequality-passing subjects passes with
/// the blended tolerance. lambda 0 or 1 reduces to the pure subject.
pub fn check_convexity(
    s1: DieSubject<'_>,
    s2: DieSubject<'_>,
    lambda: f64,
    graph: &TransitionGraph,
) -> CheckReport {
    assert!((0.0..=1.0).contains(&lambda), "lambda outside [0,1]");
    let (v1, t1) = resolve_subject(s1, graph);
    let (v2, t2) = resolve_subject(s2, graph);
    let r1 = die_scan("convexity", graph, &v1, t1);
    if !r1.passed {
        return CheckReport::from_margin(
            "convexity",
            r1.margin,
            r1.tolerance,
            Witness::Precondition("first-input-fails-edge-inequality".into()),
        );
    }
    let r2 = die_scan("convexity", graph, &v2, t2);
    if !r2.passed {
        return CheckReport::from_margin(
            "convexity",
            r2.margin,
            r2.tolerance,
            Witness::Precondition("second-input-fails-edge-inequality".into()),
        );
    }
    if lambda == 0.0 {
        return r2;
    }
    if lambda == 1.0 {
        return r1;
    }
    let combined: Vec<ExtendedReal> = v1
        .iter()
        .zip(&v2)
        .map(|(&a, &b)| match (a, b) {
            (Finite(x), Finite(y)) => Finite(lambda * x + (1.0 - lambda) * y),
            (PosInf, _) | (_, PosInf) => PosInf,
            _ => NegInf,
        })
        .collect();
    let tol = lambda * t1 + (1.0 - lambda) * t2;
    die_scan("convexity", graph, &combined, tol)
}

/// External characterization at a minimal-energy ground: every walk out of
/// the ground costs nonnegative supply. Reported three ways: definite
/// failure when a negative cycle is reachable (extraction unbounded),
/// vacuous when the ground holds extractable energy (the claim assumes it
/// does not), pass otherwise.
pub fn check_external(graph: &TransitionGraph, ground: usize) -> Result<CheckReport> {
    if ground >= graph.n_nodes() {
        return Err(Error::Graph(format!(
            "ground node {ground} out of range for {} nodes",
            graph.n_nodes()
        )));
    }
    let fwd = shortest_walks(graph, WalkSource::Node(ground), Direction::Forward);
    if let Some(cycle) = &fwd.negative_cycle {
        return Ok(CheckReport::broken(
            "external",
            GRAPH_SUM_TOL,
            Witness::Node(cycle.nodes[0]),
        ));
    }
    let mut m = 0.0f64;
    let mut arg = ground;
    for (node, d) in fwd.dist.iter().enumerate() {
        if let Finite(v) = d {
            if *v < m {
                m = *v;
                arg = node;
            }
        }
    }
    let margin = -m;
    if margin <= GRAPH_SUM_TOL {
        Ok(CheckReport::from_margin(
            "external",
            margin,
            GRAPH_SUM_TOL,
            Witness::Node(arg),
        ))
    } else {
        // ground is not a minimal-energy state on this abstraction; the
        // claim is conditional on zero available storage at the ground
        Ok(CheckReport::vacuous(
            "external",
            GRAPH_SUM_TOL,
            "ground-not-minimal-energy",
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::abstraction::{build_graph, Grid};
    use crate::expr::Expr;
    use crate::model::registry;
    use crate::storage::{available_storage, required_supply};

    fn exp_graph() -> (TransitionGraph, crate::model::ModelRegistryEntry) {
        let entry = registry("integrator-exp").unwrap();
        let grid = Grid::new(entry.model.state_bounds.clone(), vec![41]).unwrap();
        let spacing = grid.spacing()[0];
        let g = build_graph(&entry.model, &entry.supply, &grid, spacing, 4).unwrap();
        (g, entry)
    }

    fn candidate(expr: &str, grad: Option<&str>) -> CandidateStorage {
        CandidateStorage::from_exprs(
            expr.to_string(),
            Expr::parse(expr).unwrap(),
            grad.map(|g| vec![Expr::parse(g).unwrap()]),
        )
    }

    #[test]
    fn computed_fields_pass_die_edges() {
        let (g, _) = exp_graph();
        let s_a = available_storage(&g);
        let s_r = required_supply(&g);
        let s_rc = constrained_required(&g, 20).unwrap();
        for f in [&s_a, &s_r, &s_rc] {
            let r = check_die_edges(DieSubject::Field(f), &g);
            assert!(r.passed, "{r}");
            assert_eq!(r.tolerance, FIELD_EDGE_TOL);
        }
    }

    #[test]
    fn candidate_die_edges_pass_and_fail() {
        let (g, _) = exp_graph();
        let good = candidate("exp(x1)-1", Some("exp(x1)"));
        let r = check_die_edges(DieSubject::Candidate(&good), &g);
        assert!(r.passed, "{r}");

        let bad = candidate("-exp(x1)", Some("-exp(x1)"));
        let r = check_die_edges(DieSubject::Candidate(&bad), &g);
        assert!(!r.passed);
        assert!(r.margin > r.tolerance);
        assert!(matches!(r.witness, Witness::Edge { .. }), "{r}");
    }

    #[test]
    fn differential_margins() {
        let entry = registry("integrator-exp").unwrap();
        let lossless = candidate("exp(x1)", Some("exp(x1)"));
        let r = check_die_differential(
            &entry.model,
            &entry.supply,
            &lossless,
            500,
            7,
            CheckSense::Standard,
        );
        assert!(r.passed, "{r}");
        assert!(r.margin.abs() <= 1e-12, "{r}");

        let doubled = candidate("2*exp(x1)", Some("2*exp(x1)"));
        let r = check_die_differential(
            &entry.model,
            &entry.supply,
            &doubled,
            500,
            7,
            CheckSense::Standard,
        );
        assert!(!r.passed);
        assert!(matches!(r.witness, Witness::Sample { .. }));
    }

    #[test]
    fn reversed_sense_equals_negated_run() {
        let entry = registry("integrator-exp").unwrap();
        let c = candidate("exp(x1)-1", Some("exp(x1)"));
        let rev = check_die_differential(
            &entry.model,
            &entry.supply,
            &c,
            300,
            11,
            CheckSense::Reversed,
        );
        let neg = check_die_differential(
            &entry.model,
            &entry.supply.negated(),
            &c.negated(),
            300,
            11,
            CheckSense::Standard,
        );
        assert_eq!(rev.margin.to_bits(), neg.margin.to_bits());
        assert_eq!(rev.passed, neg.passed);
        assert_eq!(rev.witness, neg.witness);
    }

    #[test]
    fn fd_gradient_matches_analytic_on_registry() {
        for key in ["integrator-exp", "heat-body", "cap-mic"] {
            let entry = registry(key).unwrap();
            let Some(known) = entry.known_storage else {
                continue;
            };
            assert!(known.has_gradient(), "{key}");
            for x in entry.model.probe_states() {
                if !entry.model.guard_ok(&x) {
                    continue;
                }
                let a = known.gradient(&x).unwrap();
                let f = central_fd(&known, &x);
                for (ai, fi) in a.iter().zip(&f) {
                    let scale = ai.abs().max(1.0);
                    assert!(
                        (ai - fi).abs() / scale < 1e-6,
                        "{key}: analytic {ai} vs fd {fi} at {x:?}"
                    );
                }
            }
        }
    }

    #[test]
    fn sandwich_field_as_its_own_candidate() {
        let (g, _) = exp_graph();
        let ground = 20;
        let s_ac = constrained_available(&g, ground).unwrap();
        let s_rc = constrained_required(&g, ground).unwrap();
        // candidate that reproduces s_ac exactly at node coordinates
        let vals: Vec<f64> = s_ac.values.iter().map(|v| v.as_finite().unwrap()).collect();
        let grid = g.grid.clone();
        let c = CandidateStorage::new("s_ac-resampled", move |x: &[f64]| {
            vals[grid.nearest_node(x)]
        });
        let r = check_sandwich(&s_ac, &s_rc, &c, ground, &g);
        assert!(r.passed, "{r}");
    }

    #[test]
    fn extremality_zero_candidate_on_zero_supply() {
        let g = TransitionGraph::synthetic(
            3,
            1,
            &[(0, 0, 1, 0.0), (1, 0, 2, 0.0), (2, 0, 0, 0.0)],
        )
        .unwrap();
        let s_a = available_storage(&g);
        let s_r = required_supply(&g);
        let s_ac = constrained_available(&g, 0).unwrap();
        let s_rc = constrained_required(&g, 0).unwrap();
        let zero = candidate("0", Some("0"));
        let r = check_extremality(&s_a, &s_r, &s_ac, &s_rc, &zero, 0, &g);
        assert!(r.passed, "{r}");
        assert_eq!(r.margin, 0.0);
    }

    #[test]
    fn convexity_endpoints_reduce_to_pure_subjects() {
        let (g, _) = exp_graph();
        let s_ac = constrained_available(&g, 20).unwrap();
        let c = candidate("exp(x1)-1", Some("exp(x1)"));
        let pure = check_die_edges(DieSubject::Candidate(&c), &g);
        let at0 = check_convexity(DieSubject::Field(&s_ac), DieSubject::Candidate(&c), 0.0, &g);
        assert_eq!(at0.margin.to_bits(), pure.margin.to_bits());
        assert_eq!(at0.tolerance, pure.tolerance);
        let mid = check_convexity(DieSubject::Field(&s_ac), DieSubject::Candidate(&c), 0.5, &g);
        assert!(mid.passed, "{mid}");
    }

    #[test]
    fn convexity_rejects_failing_input() {
        let (g, _) = exp_graph();
        let bad = candidate("-exp(x1)", None);
        let good = candidate("exp(x1)-1", None);
        let r = check_convexity(
            DieSubject::Candidate(&bad),
            DieSubject::Candidate(&good),
            0.5,
            &g,
        );
        assert!(!r.passed);
        assert!(matches!(r.witness, Witness::Precondition(_)));
    }

    #[test]
    fn cross_ground_same_ground_is_zero() {
        let (g, _) = exp_graph();
        let r = check_cross_ground(&g, 20, 20).unwrap();
        assert!(r.passed, "{r}");
        assert!(r.margin.abs() <= 1e-12);
    }

    #[test]
    fn external_three_outcomes() {
        // pass: all weights nonnegative from ground
        let g = TransitionGraph::synthetic(2, 1, &[(0, 0, 1, 0.5), (1, 0, 1, 0.0)]).unwrap();
        let r = check_external(&g, 0).unwrap();
        assert!(r.passed);
        assert_eq!(r.margin, 0.0);

        // vacuous: negative walk out of ground but no cycle
        let g = TransitionGraph::synthetic(2, 1, &[(0, 0, 1, -0.5)]).unwrap();
        let r = check_external(&g, 0).unwrap();
        assert!(r.passed);
        assert!(matches!(r.witness, Witness::Precondition(_)));

        // fail: reachable negative cycle
        let g = TransitionGraph::synthetic(
            3,
            1,
            &[(0, 0, 1, 1.0), (1, 0, 2, 1.0), (2, 0, 1, -2.0)],
        )
        .unwrap();
        let r = check_external(&g, 0).unwrap();
        assert!(!r.passed);
        assert!(r.margin.is_infinite());
    }

    #[test]
    fn die_edges_duality_under_negation() {
        let (g, _) = exp_graph();
        let c = candidate("exp(x1)-1", Some("exp(x1)"));
        let neg_g = g.negated();
        let neg_c = c.negated();
        // -S on the negated graph scans the reversed inequality of (S, g):
        // margins are the respective worst values, both must pass for the
        // storage of a lossless supply
        let fwd = check_die_edges(DieSubject::Candidate(&c), &g);
        let rev = check_die_edges(DieSubject::Candidate(&neg_c), &neg_g);
        assert!(fwd.passed, "{fwd}");
        assert!(rev.passed, "{rev}");
    }

    #[test]
    fn chord_slope_estimates_steepest_segment() {
        let (g, _) = exp_graph();
        let c = candidate("exp(x1)", None);
        let vals = candidate_node_values(&c, &g);
        let l = chord_slope(&vals, &g);
        let h = g.grid.spacing()[0];
        let expect = (2.0f64.exp() - (2.0 - h).exp()) / h;
        assert!((l - expect).abs() < 1e-9);
    }
}
