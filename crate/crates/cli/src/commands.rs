use bgwscale_core::control::{barrier_gap, barrier_value, optimal_value, verify_bellman};
use bgwscale_core::model::classify;
use bgwscale_core::passage::{
    atmin_law, certain_extinction, conditioned_generator, lt_explosion_before, lt_first_passage,
    lt_joint_avalanche, mean_explosion, mean_first_passage, prob_explosion_before, prob_passage,
    tilted_model,
};
use bgwscale_core::sim::{self, simulate_controlled};
use bgwscale_core::{ControlProblem, ModelSpec, Policy, Result as CoreResult, Scale, SimConfig};
use serde_json::{json, Value};

use crate::args::*;
use crate::{row, verify, Body, CliError, CliResult, Ctx, Report};

pub(crate) fn dispatch(cli: &Cli, ctx: &mut Ctx) -> CliResult<Report> {
    match &cli.command {
        Command::Model { action } => model(action, ctx),
        Command::Scale(a) => scale(a, ctx),
        Command::Passage { action } => passage(action, ctx),
        Command::Control { action } => control(action, ctx),
        Command::Simulate(a) => simulate(a, ctx),
        Command::Verify(a) => verify::run(a, ctx),
    }
}

fn quad_diag(ctx: &Ctx) -> Value {
    json!({ "quad": ctx.quad })
}

fn need(value: Option<f64>, flag: &str) -> CliResult<f64> {
    value.ok_or_else(|| CliError::Usage(format!("--{flag} is required here")))
}

fn parse_model_doc(spec: &ModelSpec) -> Value {
    serde_json::from_str(&spec.to_json()).expect("model JSON parses")
}

fn model(action: &ModelAction, ctx: &mut Ctx) -> CliResult<Report> {
    match action {
        ModelAction::Check(m) => {
            let spec = ctx.load(&m.model)?;
            let body = json!({
                "valid": true,
                "normalized": parse_model_doc(&spec),
                "input_lambda": spec.input_lambda(),
            });
            Ok(Report::new(json!({}), Body::Doc(body), json!({})))
        }
        ModelAction::Classify(m) => {
            let spec = ctx.load(&m.model)?;
            let mut body = serde_json::to_value(classify(&spec)).expect("report serializes");
            body["certain_extinction"] = certain_extinction(&spec, &ctx.quad).map_or(Value::Null, |b| json!(b));
            Ok(Report::new(json!({}), Body::Doc(body), quad_diag(ctx)))
        }
    }
}

fn scale(a: &ScaleArgs, ctx: &mut Ctx) -> CliResult<Report> {
    let spec = ctx.load(&a.model)?;
    let (s, key) = match a.kind {
        ScaleKind::Phi => (Scale::phi_q(&spec, need(a.q, "q")?, &ctx.quad)?, "phi_q"),
        ScaleKind::Psi => (Scale::psi_q(&spec, need(a.q, "q")?, &ctx.quad)?, "psi_q"),
        ScaleKind::Phi0 => (Scale::phi_0(&spec, &ctx.quad)?, "phi_0"),
        ScaleKind::Phiqq => (
            Scale::phi_q_qbar(&spec, need(a.q, "q")?, need(a.qbar, "qbar")?, &ctx.quad)?,
            "phi_q_qbar",
        ),
    };
    let mut rows = Vec::new();
    for &x in &a.x.0 {
        let v = s.value(x)?;
        rows.push(if a.x.is_range() { row(json!({"x": x, key: v})) } else { row(json!({ key: v })) });
    }
    let query = json!({"q": a.q, "qbar": a.qbar, "x": a.x.0});
    Ok(Report::new(query, Body::Rows(rows), quad_diag(ctx)))
}

/// Evaluates `f(x, a)` over the grid product; point queries give `{"value": v}`.
fn grid(p: &PointArgs, mut f: impl FnMut(u64, u64) -> CoreResult<f64>) -> CliResult<Body> {
    let ranged = p.x.is_range() || p.a.is_range();
    let mut rows = Vec::new();
    for &x in &p.x.0 {
        for &a in &p.a.0 {
            let v = f(x, a)?;
            rows.push(if ranged { row(json!({"x": x, "a": a, "value": v})) } else { row(json!({"value": v})) });
        }
    }
    Ok(Body::Rows(rows))
}

fn point_query(p: &PointArgs) -> Value {
    json!({"q": p.q, "x": p.x.0, "a": p.a.0})
}

fn passage(action: &PassageAction, ctx: &mut Ctx) -> CliResult<Report> {
    let quad = ctx.quad;
    match action {
        PassageAction::Lt(p) => {
            let spec = ctx.load(&p.model)?;
            let q = need(p.q, "q")?;
            let body = grid(p, |x, a| lt_first_passage(&spec, q, x, a, &quad))?;
            Ok(Report::new(point_query(p), body, quad_diag(ctx)))
        }
        PassageAction::Prob(p) => {
            let spec = ctx.load(&p.model)?;
            let body = grid(p, |x, a| prob_passage(&spec, x, a, &quad))?;
            Ok(Report::new(point_query(p), body, quad_diag(ctx)))
        }
        PassageAction::Mean(p) => {
            let spec = ctx.load(&p.model)?;
            let body = grid(p, |x, a| mean_first_passage(&spec, x, a, &quad))?;
            Ok(Report::new(point_query(p), body, quad_diag(ctx)))
        }
        PassageAction::Explosion { point: p, mean } => {
            let spec = ctx.load(&p.model)?;
            let body = match (mean, p.q) {
                (true, Some(_)) => return Err(CliError::Usage("--mean takes no --q".into())),
                (true, None) => grid(p, |x, _| mean_explosion(&spec, x, &quad))?,
                (false, Some(q)) => grid(p, |x, a| lt_explosion_before(&spec, q, x, a, &quad))?,
                (false, None) => grid(p, |x, a| prob_explosion_before(&spec, x, a, &quad))?,
            };
            let mut query = point_query(p);
            query["mean"] = json!(mean);
            Ok(Report::new(query, body, quad_diag(ctx)))
        }
        PassageAction::Atmin { model, q, x, alpha, k } => {
            let spec = ctx.load(model)?;
            let law = atmin_law(&spec, *q, *x, &quad)?;
            let query = json!({"q": q, "x": x, "alpha": alpha, "k": k});
            match (alpha, k) {
                (Some(alpha), Some(k)) => {
                    let body = json!({
                        "pmf": law.pmf[*k.min(x) as usize],
                        "lt_g": law.lt_g(&spec, *alpha, *k, &quad)?,
                        "lt_residual": if *q > 0.0 {
                            json!(law.lt_residual(&spec, *alpha, *k, &quad)?)
                        } else {
                            Value::Null
                        },
                    });
                    Ok(Report::new(query, Body::Doc(body), quad_diag(ctx)))
                }
                (None, None) => {
                    let rows = law.pmf.iter().enumerate().map(|(k, p)| row(json!({"k": k, "pmf": p}))).collect();
                    Ok(Report::new(query, Body::Rows(rows), quad_diag(ctx)))
                }
                _ => Err(CliError::Usage("--alpha and --k go together".into())),
            }
        }
        PassageAction::Condition { model, q, x } => {
            let spec = ctx.load(model)?;
            let g = conditioned_generator(&spec, *q, *x, &quad)?;
            let mut rows = Vec::new();
            for r in &g.rows {
                for &(to, p) in &r.jumps {
                    rows.push(row(json!({
                        "state": r.state, "to": to, "prob": p, "leave_rate": r.leave_rate,
                        "kill_prob": r.kill_prob, "tail_prob": r.tail_prob,
                    })));
                }
            }
            // JSON keeps the full document; CSV gets one row per transition.
            let body = if ctx.out == OutFormat::Csv {
                Body::Rows(rows)
            } else {
                Body::Doc(serde_json::to_value(&g).expect("generator serializes"))
            };
            Ok(Report::new(json!({"q": q, "x": x}), body, quad_diag(ctx)))
        }
        PassageAction::Tilt { model, qbar } => {
            let spec = ctx.load(model)?;
            let t = tilted_model(&spec, *qbar, &quad)?;
            let body = json!({
                "model": parse_model_doc(&t),
                "offspring_mean": t.offspring_mean(),
                "culling_rate": t.mu() * t.immigration().culling(),
            });
            Ok(Report::new(json!({"qbar": qbar}), Body::Doc(body), quad_diag(ctx)))
        }
        PassageAction::Avalanche { point: p, qbar } => {
            let spec = ctx.load(&p.model)?;
            let q = need(p.q, "q")?;
            let body = grid(p, |x, a| lt_joint_avalanche(&spec, q, *qbar, x, a, &quad))?;
            let mut query = point_query(p);
            query["qbar"] = json!(qbar);
            Ok(Report::new(query, body, quad_diag(ctx)))
        }
    }
}

fn control(action: &ControlAction, ctx: &mut Ctx) -> CliResult<Report> {
    let args = match action {
        ControlAction::Value { problem, .. }
        | ControlAction::Gap { problem, .. }
        | ControlAction::Bellman { problem, .. }
        | ControlAction::Simulate { problem, .. } => problem,
    };
    let spec = ctx.load(&args.model)?;
    let problem = ControlProblem::new(&spec, args.floor, args.q, &ctx.quad)?;
    let base = json!({"q": args.q, "floor": args.floor});
    match action {
        ControlAction::Value { x, a, .. } => {
            let mut rows = Vec::new();
            let ranged = x.is_range() || a.as_ref().is_some_and(Grid::is_range);
            for &x in &x.0 {
                match a {
                    Some(a) => {
                        for &a in &a.0 {
                            let v = barrier_value(&problem, a, x)?;
                            rows.push(if ranged { row(json!({"x": x, "a": a, "value": v})) } else { row(json!({"value": v})) });
                        }
                    }
                    None => {
                        let v = optimal_value(&problem, x)?;
                        rows.push(if ranged { row(json!({"x": x, "value": v})) } else { row(json!({"value": v})) });
                    }
                }
            }
            let mut query = base;
            query["x"] = json!(x.0);
            query["a"] = json!(a.as_ref().map(|g| g.0.clone()));
            Ok(Report::new(query, Body::Rows(rows), quad_diag(ctx)))
        }
        ControlAction::Gap { a, .. } => {
            let mut rows = Vec::new();
            for &a_i in &a.0 {
                let v = barrier_gap(&problem, a_i)?;
                rows.push(if a.is_range() { row(json!({"a": a_i, "value": v})) } else { row(json!({"value": v})) });
            }
            let mut query = base;
            query["a"] = json!(a.0);
            Ok(Report::new(query, Body::Rows(rows), quad_diag(ctx)))
        }
        ControlAction::Bellman { x_max, f_max, .. } => {
            let r = verify_bellman(&problem, *x_max, *f_max)?;
            let mut query = base;
            query["x_max"] = json!(x_max);
            query["f_max"] = json!(f_max);
            let body = serde_json::to_value(&r).expect("report serializes");
            Ok(Report::new(query, Body::Doc(body), quad_diag(ctx)))
        }
        ControlAction::Simulate { policy, x, sim, .. } => {
            let cfg = sim_config(sim, args.q);
            let p = match policy {
                PolicyArg::Barrier(a) => Policy::Barrier(*a),
                PolicyArg::TopUp(m) => Policy::TopUp(*m),
            };
            let e = simulate_controlled(&problem, &p, *x, &cfg)?;
            let mut query = base;
            query["x"] = json!(x);
            query["policy"] = json!(format!("{policy:?}").to_lowercase());
            let body = serde_json::to_value(e).expect("estimate serializes");
            Ok(Report::new(query, Body::Doc(body), json!({ "sim": cfg })))
        }
    }
}

pub(crate) fn sim_config(flags: &SimFlags, q: f64) -> SimConfig {
    SimConfig {
        seed: flags.seed,
        n_paths: flags.paths,
        max_jumps: flags.max_jumps,
        explosion_threshold: flags.threshold,
        q,
        ..SimConfig::default()
    }
}

fn simulate(a: &SimulateArgs, ctx: &mut Ctx) -> CliResult<Report> {
    let spec = ctx.load(&a.model)?;
    let cfg = sim_config(&a.sim, a.q);
    let est = |e: sim::Estimate| serde_json::to_value(e).expect("estimate serializes");
    let body = match a.estimator {
        Estimator::Lt => Body::Doc(est(sim::estimate_lt_passage(&spec, a.q, a.x, a.a, &cfg)?)),
        Estimator::Avalanche => Body::Doc(est(sim::estimate_joint_avalanche(&spec, a.q, a.qbar, a.x, a.a, &cfg)?)),
        Estimator::Mean => Body::Doc(est(sim::estimate_mean_passage(&spec, a.x, a.a, &cfg)?)),
        Estimator::Clock => Body::Doc(est(sim::estimate_clock_passage(&spec, a.q, a.x, a.a, &cfg)?)),
        Estimator::Explosion => {
            Body::Doc(serde_json::to_value(sim::estimate_explosion(&spec, a.q, a.x, a.a, &cfg)?).expect("serializes"))
        }
        Estimator::MeanExplosion => {
            Body::Doc(serde_json::to_value(sim::estimate_mean_explosion(&spec, a.x, &cfg)?).expect("serializes"))
        }
        Estimator::Atmin => {
            let cells = sim::estimate_atmin_law(&spec, a.q, a.x, &cfg)?;
            Body::Rows(
                cells
                    .into_iter()
                    .enumerate()
                    .map(|(k, e)| {
                        let mut r = row(est(e));
                        r.insert("k".into(), json!(k));
                        r
                    })
                    .collect(),
            )
        }
        Estimator::AtminLt => {
            let (g, r) = sim::estimate_atmin_transforms(&spec, a.q, a.alpha, a.x, a.k, &cfg)?;
            Body::Doc(json!({"lt_g": est(g), "lt_residual": est(r)}))
        }
    };
    let query = json!({"q": a.q, "qbar": a.qbar, "alpha": a.alpha, "x": a.x, "a": a.a, "k": a.k});
    Ok(Report::new(query, body, json!({ "sim": cfg })))
}
