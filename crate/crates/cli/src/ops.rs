//! Command implementations. Every command computes all of its artifacts
//! first and only then writes them, each through a temp file and rename,
//! so a failure never leaves partial output behind.

use std::fmt::Write as _;
use std::path::Path;

use cyclo_core::abstraction::{controllable_set, reachable_set};
use cyclo_core::expr::Expr;
use cyclo_core::model::{capmic_entry, registry};
use cyclo_core::report::render_reports;
use cyclo_core::simulate::{
    capmic_energy_balance, capmic_legendre_table, capmic_mech_model, capmic_mech_scenario,
    capmic_two_port_scenario, BalanceKind,
};
use cyclo_core::verify::{
    check_convexity, check_cross_ground, check_die_differential, check_die_edges,
    check_external, check_extremality, check_sandwich, CheckSense, DieSubject,
};
use cyclo_core::{
    build_graph, default_step, simulate, verdict, CandidateStorage, CapMicParams, CheckReport,
    Error, Grid, InputSet, Result, SupplyRate, SystemModel, TransitionGraph,
};

use crate::{AnalyzeArgs, ModelArgs, SimulateArgs, VerifyArgs};

fn parse_list<T: std::str::FromStr>(text: &str, what: &str) -> Result<Vec<T>> {
    text.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<T>()
                .map_err(|_| Error::Validation(format!("bad {what} entry '{tok}'")))
        })
        .collect()
}

struct Prepared {
    model: SystemModel,
    supply: SupplyRate,
    graph: TransitionGraph,
    ground: usize,
}

fn prepare(margs: &ModelArgs, ground: &str) -> Result<Prepared> {
    let (mut model, supply) = match (&margs.model, &margs.config) {
        (Some(key), None) => {
            let e = registry(key)?;
            (e.model.clone(), e.supply.clone())
        }
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path)?;
            let (m, s, _) = cyclo_core::load_model(&text)?;
            (m, s)
        }
        _ => {
            return Err(Error::Validation(
                "give exactly one of --model or --config".into(),
            ))
        }
    };

    if let Some(spec) = &margs.inputs {
        let samples: Vec<usize> = parse_list(spec, "--inputs")?;
        if samples.len() != model.input_dim {
            return Err(Error::Validation(format!(
                "--inputs has {} entries, model has {} inputs",
                samples.len(),
                model.input_dim
            )));
        }
        let hull = model.input_set.hull(model.input_dim)?;
        model.input_set = InputSet::Grid {
            lo: hull.iter().map(|b| b[0]).collect(),
            hi: hull.iter().map(|b| b[1]).collect(),
            samples,
        };
    }

    let counts: Vec<usize> = match &margs.grid {
        Some(spec) => parse_list(spec, "--grid")?,
        None => vec![41; model.state_dim],
    };
    if counts.len() != model.state_dim {
        return Err(Error::Validation(format!(
            "--grid has {} entries, model has {} state dimensions",
            counts.len(),
            model.state_dim
        )));
    }
    if counts.iter().any(|&c| c < 2) {
        return Err(Error::Validation("grid needs at least 2 nodes per dimension".into()));
    }
    let grid = Grid::new(model.state_bounds.clone(), counts)?;

    let h = match margs.step {
        Some(h) => h,
        None => default_step(&model, &grid)?,
    };
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::Validation(format!("step must be positive, got {h}")));
    }
    if margs.substeps == 0 {
        return Err(Error::Validation("substeps must be at least 1".into()));
    }

    let coords: Vec<f64> = parse_list(ground, "--ground")?;
    if coords.len() != model.state_dim {
        return Err(Error::Validation(format!(
            "--ground has {} coordinates, model has {} state dimensions",
            coords.len(),
            model.state_dim
        )));
    }
    if !grid.contains(&coords) {
        return Err(Error::Validation(format!("ground {coords:?} is outside the box")));
    }
    let ground = grid.nearest_node(&coords);

    let graph = build_graph(&model, &supply, &grid, h, margs.substeps)?;
    Ok(Prepared {
        model,
        supply,
        graph,
        ground,
    })
}

fn write_all(dir: &Path, files: &[(String, String)]) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for (name, contents) in files {
        let tmp = dir.join(format!(".{name}.tmp"));
        std::fs::write(&tmp, contents)?;
        std::fs::rename(&tmp, dir.join(name))?;
    }
    Ok(())
}

pub fn cmd_analyze(args: AnalyzeArgs) -> Result<u8> {
    let p = prepare(&args.model, &args.ground)?;
    let v = verdict(&p.graph, p.ground)?;
    let reach = reachable_set(&p.graph, p.ground)?;
    let ctrl = controllable_set(&p.graph, p.ground)?;

    let mut summary = String::new();
    let _ = writeln!(summary, "cyclo_dissipative={}", v.cyclo_dissipative);
    let _ = writeln!(
        summary,
        "cyclo_dissipative_wrt_ground={}",
        v.cyclo_dissipative_wrt_ground
    );
    let _ = writeln!(summary, "dissipative={}", v.dissipative);
    let _ = writeln!(summary, "ground_node={}", v.ground);
    let _ = writeln!(summary, "ground_closed_walk_min={}", v.ground_closed_walk_min);
    let _ = writeln!(summary, "graph_fingerprint={:016x}", p.graph.fingerprint());
    let _ = writeln!(
        summary,
        "certificate={}",
        if v.certificate.is_some() { "certificate.csv" } else { "none" }
    );

    let mut files = vec![
        ("verdict.txt".into(), summary.clone()),
        ("graph.csv".into(), p.graph.to_csv()),
        ("s_a.csv".into(), v.s_a.to_csv(&p.graph.grid)),
        ("s_r.csv".into(), v.s_r.to_csv(&p.graph.grid)),
        ("s_ac.csv".into(), v.s_ac.to_csv(&p.graph.grid)),
        ("s_rc.csv".into(), v.s_rc.to_csv(&p.graph.grid)),
        ("mask_reachable.csv".into(), reach.to_csv()),
        ("mask_controllable.csv".into(), ctrl.to_csv()),
    ];
    if let Some(cert) = &v.certificate {
        files.push(("certificate.csv".into(), cert.to_csv()));
    }
    write_all(&args.out.out, &files)?;
    print!("{summary}");
    Ok(if v.cyclo_dissipative_wrt_ground { 0 } else { 3 })
}

fn parse_candidate(expr: &str, grad: Option<&str>, state_dim: usize) -> Result<CandidateStorage> {
    let body = Expr::parse(expr)?;
    body.validate(state_dim, 0, 0)?;
    let grads = match grad {
        Some(spec) => {
            let parts: Vec<Expr> = spec
                .split(',')
                .map(|s| {
                    let e = Expr::parse(s)?;
                    e.validate(state_dim, 0, 0)?;
                    Ok(e)
                })
                .collect::<Result<_>>()?;
            if parts.len() != state_dim {
                return Err(Error::Validation(format!(
                    "--storage-grad has {} expressions, model has {} state dimensions",
                    parts.len(),
                    state_dim
                )));
            }
            Some(parts)
        }
        None => None,
    };
    Ok(CandidateStorage::from_exprs("candidate", body, grads))
}

pub fn cmd_verify(args: VerifyArgs) -> Result<u8> {
    let p = prepare(&args.model, &args.ground)?;
    let candidate = parse_candidate(
        &args.storage_expr,
        args.storage_grad.as_deref(),
        p.model.state_dim,
    )?;
    let v = verdict(&p.graph, p.ground)?;

    let mut reports: Vec<CheckReport> = Vec::new();
    reports.push(check_die_edges(DieSubject::Candidate(&candidate), &p.graph));
    if candidate.has_gradient() {
        reports.push(check_die_differential(
            &p.model,
            &p.supply,
            &candidate,
            256,
            args.out.seed,
            CheckSense::Standard,
        ));
    }
    reports.push(check_sandwich(&v.s_ac, &v.s_rc, &candidate, p.ground, &p.graph));
    reports.push(check_extremality(
        &v.s_a, &v.s_r, &v.s_ac, &v.s_rc, &candidate, p.ground, &p.graph,
    ));
    reports.push(check_convexity(
        DieSubject::Candidate(&candidate),
        DieSubject::Field(&v.s_ac),
        0.5,
        &p.graph,
    ));
    if let Some(g2) = &args.ground2 {
        let coords: Vec<f64> = parse_list(g2, "--ground2")?;
        if !p.graph.grid.contains(&coords) {
            return Err(Error::Validation(format!(
                "second ground {coords:?} is outside the box"
            )));
        }
        let node2 = p.graph.grid.nearest_node(&coords);
        reports.push(check_cross_ground(&p.graph, p.ground, node2)?);
    }
    reports.push(check_external(&p.graph, p.ground)?);

    let rendered = render_reports(&reports);
    write_all(&args.out.out, &[("reports.txt".into(), rendered.clone())])?;
    print!("{rendered}");
    Ok(if reports.iter().all(|r| r.passed) { 0 } else { 3 })
}

pub fn cmd_simulate(args: SimulateArgs) -> Result<u8> {
    let params = CapMicParams {
        c1: args.c1,
        ..CapMicParams::default()
    };
    params.validate()?;
    let h_sim = args.step.unwrap_or(1e-3);

    let (traj, report, mut files) = match args.scenario.as_str() {
        "capmic-two-port" => {
            let entry = capmic_entry(params);
            let (x0, schedule) = capmic_two_port_scenario(args.out.seed, 0);
            let traj = simulate(
                &entry.model,
                &entry.supply,
                &entry.ports,
                &x0,
                &schedule,
                10.0,
                h_sim,
            )?;
            let report = capmic_energy_balance(&traj, &params, BalanceKind::TwoPort);
            (traj, report, Vec::new())
        }
        "capmic-mech-port" => {
            let (model, supply) = capmic_mech_model(&params)?;
            let (x0, schedule) = capmic_mech_scenario(&params, args.out.seed, 0);
            let traj = simulate(&model, &supply, &[], &x0, &schedule, 0.4, h_sim)?;
            let report = capmic_energy_balance(&traj, &params, BalanceKind::MechPort);
            // tabulate H*(q, 0) across the admissible gap range; with c1 = 0
            // the left end shows the unbounded drop toward the singularity
            let q_lo = if params.c1 == 0.0 { 0.1 } else { -0.899 };
            let table = capmic_legendre_table(&params, q_lo, 5.0, 200)?;
            let mut csv = String::from("q,hstar\n");
            for (q, h) in table {
                let _ = writeln!(csv, "{q},{h}");
            }
            (traj, report, vec![("hstar_table.csv".to_string(), csv)])
        }
        other => {
            return Err(Error::Validation(format!(
                "unknown scenario '{other}'; expected capmic-two-port or capmic-mech-port"
            )))
        }
    };

    let line = format!("{report}\n");
    files.push(("trajectory.csv".into(), traj.to_csv()));
    files.push(("balance.txt".into(), line.clone()));
    write_all(&args.out.out, &files)?;
    print!("{line}");
    Ok(if report.passed { 0 } else { 3 })
}
