//! System models, supply rates, and candidate storage functions.
//!
//! A model is dynamics f(x,u), output map h(x,u), an analysis box, and a
//! finite input sample set. Built-in study systems live in `registry`;
//! user systems load from a JSON config via `load_model`.

use std::sync::Arc;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::expr::Expr;

pub type DynFn = Arc<dyn Fn(&[f64], &[f64], &mut [f64]) + Send + Sync>;
pub type GuardFn = Arc<dyn Fn(&[f64]) -> bool + Send + Sync>;

/// Finite input sample description. `Grid` is expanded to the cartesian
/// product of per-dimension uniform levels.
#[derive(Clone)]
pub enum InputSet {
    List(Vec<Vec<f64>>),
    Grid {
        lo: Vec<f64>,
        hi: Vec<f64>,
        samples: Vec<usize>,
    },
}

impl InputSet {
    /// Expand to an explicit list of input vectors, deterministic order
    /// (last dimension varies fastest).
    pub fn levels(&self, input_dim: usize) -> Result<Vec<Vec<f64>>> {
        match self {
            InputSet::List(list) => {
                if list.is_empty() {
                    return Err(Error::Validation("input_set is empty".into()));
                }
                for (i, v) in list.iter().enumerate() {
                    if v.len() != input_dim {
                        return Err(Error::Validation(format!(
                            "input vector {i} has length {}, expected {input_dim}",
                            v.len()
                        )));
                    }
                }
                Ok(list.clone())
            }
            InputSet::Grid { lo, hi, samples } => {
                if lo.len() != input_dim || hi.len() != input_dim || samples.len() != input_dim {
                    return Err(Error::Validation(
                        "input_grid lo/hi/samples must all have input_dim entries".into(),
                    ));
                }
                if samples.iter().any(|&s| s == 0) {
                    return Err(Error::Validation("input_grid samples must be >= 1".into()));
                }
                let axes: Vec<Vec<f64>> = (0..input_dim)
                    .map(|d| linspace(lo[d], hi[d], samples[d]))
                    .collect();
                let mut out = vec![Vec::with_capacity(input_dim)];
                for axis in &axes {
                    let mut next = Vec::with_capacity(out.len() * axis.len());
                    for prefix in &out {
                        for &v in axis {
                            let mut p = prefix.clone();
                            p.push(v);
                            next.push(p);
                        }
                    }
                    out = next;
                }
                Ok(out)
            }
        }
    }

    /// Componentwise [min, max] hull of the sample set.
    pub fn hull(&self, input_dim: usize) -> Result<Vec<[f64; 2]>> {
        let levels = self.levels(input_dim)?;
        let mut hull = vec![[f64::INFINITY, f64::NEG_INFINITY]; input_dim];
        for v in &levels {
            for d in 0..input_dim {
                hull[d][0] = hull[d][0].min(v[d]);
                hull[d][1] = hull[d][1].max(v[d]);
            }
        }
        Ok(hull)
    }
}

/// Uniform levels, endpoints exact. A single sample sits at the midpoint.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(n >= 1);
    if n == 1 {
        return vec![0.5 * (lo + hi)];
    }
    let spacing = (hi - lo) / (n - 1) as f64;
    (0..n)
        .map(|i| if i == n - 1 { hi } else { lo + i as f64 * spacing })
        .collect()
}

#[derive(Clone)]
pub struct SystemModel {
    pub state_dim: usize,
    pub input_dim: usize,
    pub output_dim: usize,
    pub dynamics: DynFn,
    pub output: DynFn,
    pub state_bounds: Vec<[f64; 2]>,
    pub input_set: InputSet,
    /// Domain restriction inside the box (e.g. positivity of a capacitance
    /// law); integration aborts where it fails.
    pub state_guard: Option<GuardFn>,
}

impl SystemModel {
    pub fn eval_dynamics(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        let mut dx = vec![0.0; self.state_dim];
        (self.dynamics)(x, u, &mut dx);
        dx
    }

    pub fn eval_output(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.output_dim];
        (self.output)(x, u, &mut y);
        y
    }

    pub fn guard_ok(&self, x: &[f64]) -> bool {
        self.state_guard.as_ref().map_or(true, |g| g(x))
    }

    /// Eagerly probe dynamics, output, and supply at box corners, the box
    /// center, and every input level; any non-finite value is rejected with
    /// the offending probe point named.
    pub fn validate(&self, supply: &SupplyRate) -> Result<()> {
        if self.state_dim == 0 || self.input_dim == 0 || self.output_dim == 0 {
            return Err(Error::Validation(
                "state_dim, input_dim, output_dim must be positive".into(),
            ));
        }
        if self.state_bounds.len() != self.state_dim {
            return Err(Error::Validation(format!(
                "state_bounds has {} entries, expected {}",
                self.state_bounds.len(),
                self.state_dim
            )));
        }
        for (d, b) in self.state_bounds.iter().enumerate() {
            if !(b[1] - b[0]).is_finite() || b[1] <= b[0] {
                return Err(Error::Validation(format!(
                    "state_bounds[{d}] = [{}, {}] must have positive finite width",
                    b[0], b[1]
                )));
            }
        }
        let levels = self.input_set.levels(self.input_dim)?;
        let probes = self.probe_states();
        for x in &probes {
            if !self.guard_ok(x) {
                continue;
            }
            for u in &levels {
                let dx = self.eval_dynamics(x, u);
                let y = self.eval_output(x, u);
                if dx.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Validation(format!(
                        "dynamics non-finite at x={x:?}, u={u:?}"
                    )));
                }
                if y.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Validation(format!(
                        "output non-finite at x={x:?}, u={u:?}"
                    )));
                }
                let s = supply.eval(u, &y);
                if !s.is_finite() {
                    return Err(Error::Validation(format!(
                        "supply non-finite at x={x:?}, u={u:?}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Box corners plus the center.
    pub fn probe_states(&self) -> Vec<Vec<f64>> {
        let n = self.state_dim;
        let mut probes = Vec::with_capacity((1 << n) + 1);
        for mask in 0u32..(1 << n) {
            let x: Vec<f64> = (0..n)
                .map(|d| self.state_bounds[d][((mask >> d) & 1) as usize])
                .collect();
            probes.push(x);
        }
        probes.push(
            (0..n)
                .map(|d| 0.5 * (self.state_bounds[d][0] + self.state_bounds[d][1]))
                .collect(),
        );
        probes
    }
}

/// Scalar power-like function s(u, y).
#[derive(Clone)]
pub struct SupplyRate {
    pub name: String,
    eval_fn: Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>,
}

impl SupplyRate {
    pub fn new(
        name: impl Into<String>,
        f: impl Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        SupplyRate {
            name: name.into(),
            eval_fn: Arc::new(f),
        }
    }

    pub fn from_expr(name: impl Into<String>, expr: Expr) -> Self {
        SupplyRate::new(name, move |u, y| expr.eval(&[], u, y))
    }

    pub fn eval(&self, u: &[f64], y: &[f64]) -> f64 {
        (self.eval_fn)(u, y)
    }

    /// Same supply with the sign flipped; used by the reversed-inequality
    /// checking mode.
    pub fn negated(&self) -> SupplyRate {
        let inner = self.eval_fn.clone();
        SupplyRate {
            name: format!("neg-{}", self.name),
            eval_fn: Arc::new(move |u, y| -inner(u, y)),
        }
    }
}

/// s(u, h(x, u)); exactly the composition of the output map and the supply.
pub fn eval_supply(supply: &SupplyRate, model: &SystemModel, x: &[f64], u: &[f64]) -> Result<f64> {
    let y = model.eval_output(x, u);
    let s = supply.eval(u, &y);
    if !s.is_finite() {
        return Err(Error::Eval(format!(
            "supply non-finite at x={x:?}, u={u:?}"
        )));
    }
    Ok(s)
}

/// Candidate storage function: plain (non-extended) values on the box,
/// optional analytic gradient.
#[derive(Clone)]
pub struct CandidateStorage {
    pub name: String,
    eval_fn: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
    grad_fn: Option<Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>>,
}

impl CandidateStorage {
    pub fn new(
        name: impl Into<String>,
        f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        CandidateStorage {
            name: name.into(),
            eval_fn: Arc::new(f),
            grad_fn: None,
        }
    }

    pub fn with_gradient(
        mut self,
        g: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        self.grad_fn = Some(Arc::new(g));
        self
    }

    pub fn from_exprs(name: impl Into<String>, expr: Expr, grad: Option<Vec<Expr>>) -> Self {
        let mut c = CandidateStorage::new(name, move |x| expr.eval(x, &[], &[]));
        if let Some(gs) = grad {
            c.grad_fn = Some(Arc::new(move |x| {
                gs.iter().map(|g| g.eval(x, &[], &[])).collect()
            }));
        }
        c
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.eval_fn)(x)
    }

    pub fn gradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        self.grad_fn.as_ref().map(|g| g(x))
    }

    pub fn has_gradient(&self) -> bool {
        self.grad_fn.is_some()
    }

    /// -S with -grad, for the reversed-inequality checking mode.
    pub fn negated(&self) -> CandidateStorage {
        let f = self.eval_fn.clone();
        let g = self.grad_fn.clone();
        CandidateStorage {
            name: format!("neg-{}", self.name),
            eval_fn: Arc::new(move |x| -f(x)),
            grad_fn: g.map(|g| {
                Arc::new(move |x: &[f64]| g(x).into_iter().map(|v| -v).collect())
                    as Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>
            }),
        }
    }
}

pub struct ModelRegistryEntry {
    pub key: &'static str,
    pub model: SystemModel,
    pub supply: SupplyRate,
    pub known_storage: Option<CandidateStorage>,
    /// Per-port supply decomposition where one exists; the terms sum to the
    /// total supply.
    pub ports: Vec<(String, SupplyRate)>,
    pub notes: &'static str,
}

pub const REGISTRY_KEYS: [&str; 5] = [
    "integrator-exp",
    "integrator-exp-damped",
    "cap-mic",
    "heat-body",
    "integrator-leaky-supply",
];

/// Built-in study systems.
pub fn registry(key: &str) -> Result<ModelRegistryEntry> {
    match key {
        "integrator-exp" => {
            let model = SystemModel {
                state_dim: 1,
                input_dim: 1,
                output_dim: 1,
                dynamics: Arc::new(|_x, u, dx| dx[0] = u[0]),
                output: Arc::new(|x, _u, y| y[0] = x[0].exp()),
                state_bounds: vec![[-2.0, 2.0]],
                input_set: InputSet::List(vec![vec![-1.0], vec![0.0], vec![1.0]]),
                state_guard: None,
            };
            let supply = SupplyRate::new("passivity", |u, y| u[0] * y[0]);
            let known = CandidateStorage::new("exp-shifted", |x| x[0].exp() - 1.0)
                .with_gradient(|x| vec![x[0].exp()]);
            Ok(ModelRegistryEntry {
                key: "integrator-exp",
                model,
                supply,
                known_storage: Some(known),
                ports: vec![],
                notes: "single integrator with exponential output; lossless under s = u*y",
            })
        }
        "integrator-exp-damped" => {
            let model = SystemModel {
                state_dim: 1,
                input_dim: 1,
                output_dim: 1,
                dynamics: Arc::new(|x, u, dx| dx[0] = -x[0] * x[0] + u[0]),
                output: Arc::new(|x, _u, y| y[0] = x[0].exp()),
                state_bounds: vec![[-2.0, 2.0]],
                input_set: InputSet::List(vec![vec![-1.0], vec![0.0], vec![1.0]]),
                state_guard: None,
            };
            let supply = SupplyRate::new("passivity", |u, y| u[0] * y[0]);
            // still a storage function: (e^x)' * (-x^2 + u) = u e^x - x^2 e^x <= u e^x
            let known = CandidateStorage::new("exp-shifted", |x| x[0].exp() - 1.0)
                .with_gradient(|x| vec![x[0].exp()]);
            Ok(ModelRegistryEntry {
                key: "integrator-exp-damped",
                model,
                supply,
                known_storage: Some(known),
                ports: vec![],
                notes: "quadratically damped integrator, strictly dissipative under s = u*y",
            })
        }
        "cap-mic" => Ok(capmic_entry(CapMicParams::default())),
        "heat-body" => {
            // single heat capacity C = 1; state x = C*T, input q = heat flow
            let c = HEAT_CAPACITY;
            let model = SystemModel {
                state_dim: 1,
                input_dim: 1,
                output_dim: 1,
                dynamics: Arc::new(|_x, u, dx| dx[0] = u[0]),
                output: Arc::new(move |x, _u, y| y[0] = x[0] / c),
                state_bounds: vec![[0.2 * c, 5.0 * c]],
                input_set: InputSet::List(vec![vec![-1.0], vec![0.0], vec![1.0]]),
                state_guard: Some(Arc::new(|x| x[0] > 0.0)),
            };
            let supply = SupplyRate::new("negative-entropy-flow", |u, y| -u[0] / y[0]);
            // negated entropy, normalized to vanish at T = 1
            let known = CandidateStorage::new("neg-entropy", move |x| -c * (x[0] / c).ln())
                .with_gradient(move |x| vec![-c / x[0]]);
            Ok(ModelRegistryEntry {
                key: "heat-body",
                model,
                supply,
                known_storage: Some(known),
                ports: vec![],
                notes: "heat capacity with s = -q/T; reversible, so the inequality is tight",
            })
        }
        "integrator-leaky-supply" => {
            let model = SystemModel {
                state_dim: 1,
                input_dim: 1,
                output_dim: 1,
                dynamics: Arc::new(|_x, u, dx| dx[0] = u[0]),
                output: Arc::new(|x, _u, y| y[0] = x[0]),
                state_bounds: vec![[-1.0, 1.0]],
                input_set: InputSet::List(vec![vec![-1.0], vec![1.0]]),
                state_guard: None,
            };
            let supply = SupplyRate::new("leaky", |u, y| u[0] * y[0] - y[0] * y[0]);
            Ok(ModelRegistryEntry {
                key: "integrator-leaky-supply",
                model,
                supply,
                known_storage: None,
                ports: vec![],
                notes: "designed falsification instance: admits negative supply cycles",
            })
        }
        other => Err(Error::Validation(format!("unknown registry key '{other}'"))),
    }
}

pub const HEAT_CAPACITY: f64 = 1.0;

/// Capacitor-microphone parameters. Capacitance law C(q) = 1/(c1 + c2*q).
#[derive(Debug, Clone, Copy)]
pub struct CapMicParams {
    pub m: f64,
    pub k: f64,
    pub d: f64,
    pub r: f64,
    pub c1: f64,
    pub c2: f64,
    pub ibar: f64,
}

impl Default for CapMicParams {
    fn default() -> Self {
        CapMicParams {
            m: 1.0,
            k: 1.0,
            d: 0.1,
            r: 1.0,
            c1: 1.0,
            c2: 1.0,
            ibar: 1.0,
        }
    }
}

impl CapMicParams {
    pub fn validate(&self) -> Result<()> {
        if self.m <= 0.0 || self.k <= 0.0 || self.r <= 0.0 {
            return Err(Error::Validation("cap-mic requires m, k, R > 0".into()));
        }
        if self.d < 0.0 || self.c1 < 0.0 || self.c2 < 0.0 {
            return Err(Error::Validation("cap-mic requires d, c1, c2 >= 0".into()));
        }
        Ok(())
    }

    /// 1/C(q); positive wherever the capacitance law is valid.
    pub fn inv_c(&self, q: f64) -> f64 {
        self.c1 + self.c2 * q
    }
}

/// Two-port electromechanical model. State (q, p, Q), inputs (F, E),
/// outputs (v, I):
///   q' = p/m
///   p' = -k q - (c2/2) Q^2 - (d/m) p + F
///   Q' = (E - (c1 + c2 q) Q) / R
///   v = p/m,  I = (c1 + c2 q) Q / R
pub fn capmic_entry(params: CapMicParams) -> ModelRegistryEntry {
    let pr = params;
    let model = SystemModel {
        state_dim: 3,
        input_dim: 2,
        output_dim: 2,
        dynamics: Arc::new(move |x, u, dx| {
            let (q, p, qc) = (x[0], x[1], x[2]);
            dx[0] = p / pr.m;
            dx[1] = -pr.k * q - 0.5 * pr.c2 * qc * qc - (pr.d / pr.m) * p + u[0];
            dx[2] = (u[1] - pr.inv_c(q) * qc) / pr.r;
        }),
        output: Arc::new(move |x, _u, y| {
            y[0] = x[1] / pr.m;
            y[1] = pr.inv_c(x[0]) * x[2] / pr.r;
        }),
        state_bounds: vec![[-0.5, 0.5], [-1.0, 1.0], [-1.0, 1.0]],
        input_set: InputSet::Grid {
            lo: vec![-1.0, -1.0],
            hi: vec![1.0, 1.0],
            samples: vec![3, 3],
        },
        state_guard: Some(Arc::new(move |x| pr.inv_c(x[0]) > 0.0)),
    };
    let supply = SupplyRate::new("two-port-passivity", |u, y| u[0] * y[0] + u[1] * y[1]);
    let known = CandidateStorage::new("hamiltonian", move |x| {
        crate::simulate::capmic_hamiltonian(&pr, x[0], x[1], x[2])
    })
    .with_gradient(move |x| {
        let (q, p, qc) = (x[0], x[1], x[2]);
        vec![
            pr.k * q + 0.5 * pr.c2 * qc * qc,
            p / pr.m,
            pr.inv_c(q) * qc,
        ]
    });
    ModelRegistryEntry {
        key: "cap-mic",
        model,
        supply,
        known_storage: Some(known),
        ports: vec![
            (
                "mechanical".into(),
                SupplyRate::new("mechanical-power", |u, y| u[0] * y[0]),
            ),
            (
                "electrical".into(),
                SupplyRate::new("electrical-power", |u, y| u[1] * y[1]),
            ),
        ],
        notes: "RC circuit with displacement-dependent capacitance; passive two-port",
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigDoc {
    state_dim: usize,
    input_dim: usize,
    dynamics: Vec<String>,
    output: Vec<String>,
    supply: String,
    state_bounds: Vec<[f64; 2]>,
    input_grid: InputGridDoc,
    #[serde(default)]
    storage: Option<StorageDoc>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum InputGridDoc {
    List { list: Vec<Vec<f64>> },
    Grid { lo: Vec<f64>, hi: Vec<f64>, samples: Vec<usize> },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct StorageDoc {
    expr: String,
    #[serde(default)]
    grad: Option<Vec<String>>,
}

/// Parse and validate a JSON model config. See docs/model-config.md for the
/// schema.
pub fn load_model(
    config_text: &str,
) -> Result<(SystemModel, SupplyRate, Option<CandidateStorage>)> {
    let doc: ConfigDoc = serde_json::from_str(config_text)
        .map_err(|e| Error::Schema(format!("model config: {e}")))?;
    let n = doc.state_dim;
    let m = doc.input_dim;
    if doc.dynamics.len() != n {
        return Err(Error::Schema(format!(
            "dynamics has {} expressions, expected state_dim = {n}",
            doc.dynamics.len()
        )));
    }
    if doc.output.is_empty() {
        return Err(Error::Schema("output must have at least one expression".into()));
    }
    let p = doc.output.len();

    let parse_all = |field: &str, srcs: &[String], nx: usize, nu: usize, ny: usize| {
        srcs.iter()
            .map(|s| {
                let e = Expr::parse(s)
                    .map_err(|err| Error::Schema(format!("{field}: {err}")))?;
                e.validate(nx, nu, ny)
                    .map_err(|err| Error::Schema(format!("{field}: {err}")))?;
                Ok(e)
            })
            .collect::<Result<Vec<Expr>>>()
    };

    let dyn_exprs = parse_all("dynamics", &doc.dynamics, n, m, 0)?;
    let out_exprs = parse_all("output", &doc.output, n, m, 0)?;
    let supply_expr = parse_all("supply", std::slice::from_ref(&doc.supply), 0, m, p)?
        .pop()
        .unwrap();

    let input_set = match doc.input_grid {
        InputGridDoc::List { list } => InputSet::List(list),
        InputGridDoc::Grid { lo, hi, samples } => InputSet::Grid { lo, hi, samples },
    };

    let model = SystemModel {
        state_dim: n,
        input_dim: m,
        output_dim: p,
        dynamics: Arc::new(move |x, u, dx| {
            for (i, e) in dyn_exprs.iter().enumerate() {
                dx[i] = e.eval(x, u, &[]);
            }
        }),
        output: Arc::new(move |x, u, y| {
            for (i, e) in out_exprs.iter().enumerate() {
                y[i] = e.eval(x, u, &[]);
            }
        }),
        state_bounds: doc.state_bounds,
        input_set,
        state_guard: None,
    };
    let supply = SupplyRate::from_expr("config-supply", supply_expr);
    model.validate(&supply)?;

    let storage = match doc.storage {
        None => None,
        Some(sd) => {
            let expr = parse_all("storage.expr", std::slice::from_ref(&sd.expr), n, 0, 0)?
                .pop()
                .unwrap();
            let grad = match sd.grad {
                None => None,
                Some(gs) => {
                    if gs.len() != n {
                        return Err(Error::Schema(format!(
                            "storage.grad has {} expressions, expected {n}",
                            gs.len()
                        )));
                    }
                    Some(parse_all("storage.grad", &gs, n, 0, 0)?)
                }
            };
            Some(CandidateStorage::from_exprs("config-storage", expr, grad))
        }
    };
    Ok((model, supply, storage))
}
