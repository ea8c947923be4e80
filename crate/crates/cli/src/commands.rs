//! One runner per subcommand. Runners are pure: they return the result JSON and
//! the artifact files, and the caller decides where to write them.

use rayon::prelude::*;
use serde_json::{json, Value};

use onephase::cases;
use onephase::fbcheck::{self, Band, CheckReport, Sense, Window};
use onephase::field::{sample, GridSpec, Point, ScalarField, VectorFieldSpec};
use onephase::interface::{extract_interface, InterfaceCurve};
use onephase::io::push_row;
use onephase::ode1d;
use onephase::potentials::{self, ReactionTerm};
use onephase::solver::{self, SolveConfig};
use onephase::variations;
use onephase::Error;

use crate::args::*;
use crate::fields::{build_field, build_term, load_vector_field, random_vector_fields, square_grid};
use crate::output::{config_hash, envelope, pretty, read_text, Artifact, CliError, CliResult, Outcome};

const THREADS_VAR: &str = "ONEPHASE_THREADS";

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Op(Error::InvalidArgument(msg.into()))
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("result serializes")
}

pub fn run(config: &ExperimentConfig) -> CliResult<Outcome> {
    let seed = config.seed;
    match &config.command {
        Command::Potential(a) => potential(a),
        Command::Profile(a) => profile(a),
        Command::Solve(a) => solve(a),
        Command::Vary(a) => vary(a, seed),
        Command::Check(a) => check(&build_term(&a.term)?, &a.field, a.eps, &a.params),
        Command::Cone(a) => cone(a, seed),
        Command::Sweep(a) => sweep(config, a),
    }
}

fn potential(a: &PotentialArgs) -> CliResult<Outcome> {
    let term = build_term(&a.term)?;
    let validation = potentials::validate(&term, a.samples)?;
    if a.table == 0 {
        return Err(invalid("table needs at least one interval"));
    }
    let mut csv = String::from("s,f,F\n");
    for [s, f] in term.tabulate(a.table) {
        push_row(&mut csv, &[s, f, term.potential(s)]);
    }
    let result = json!({
        "term": term,
        "support": term.support(),
        "tau": term.tau(),
        "c0": term.c0(),
        "validation": validation,
    });
    Ok(Outcome { result, artifacts: vec![Artifact::new("potential.csv", csv)] })
}

fn profile(a: &ProfileArgs) -> CliResult<Outcome> {
    let term = build_term(&a.term)?;
    let slope = match (a.s, a.s2) {
        (Some(s), _) => Some(s),
        (None, Some(s2)) if s2 >= 0.0 => Some(s2.sqrt()),
        (None, Some(s2)) => return Err(invalid(format!("s2 must be nonnegative, got {s2}"))),
        (None, None) => None,
    };
    let (p, v0_first_integral) = if a.wedge {
        let s = slope.ok_or_else(|| invalid("wedge profile needs --s or --s2"))?;
        (ode1d::solve_wedge(&term, a.eps, s, a.t_max, a.h)?, Some(ode1d::wedge_initial_value(&term, a.eps, s)))
    } else {
        (ode1d::solve_monotone_eps(&term, a.eps, a.t_min, a.t_max, a.h)?, None)
    };
    let p = match a.rescale {
        Some(e) => ode1d::rescale(&p, e)?,
        None => p,
    };
    let k0 = p.origin_index();
    let n = p.len() - 1;
    let result = json!({
        "kind": p.kind,
        "eps": p.eps,
        "h": p.h,
        "samples": p.len(),
        "V0": p.v[k0],
        "Vp0": p.vp[k0],
        "V0_first_integral": v0_first_integral,
        "first_integral_residual": ode1d::first_integral_residual(&p, &term),
        "t_end": p.t[n],
        "V_end": p.v[n],
        "slope_end": p.vp[n],
    });
    let meta = serde_json::to_string_pretty(&p.meta()).expect("meta serializes") + "\n";
    Ok(Outcome { result, artifacts: vec![Artifact::new("profile.csv", p.to_csv()), Artifact::new("profile.meta.json", meta)] })
}

fn solve(a: &SolveArgs) -> CliResult<Outcome> {
    let term = build_term(&a.term)?;
    let cfg = match &a.solve_config {
        Some(path) => SolveConfig::from_json(&read_text(path)?)?,
        None => SolveConfig { tol_residual: a.tol, ..SolveConfig::new(a.eps).with_method(a.method.into()).with_max_iter(a.max_iter) },
    };
    cfg.validate()?;
    let grid = square_grid(a.dim, a.lo, a.hi, a.h)?;
    let exact = cases::profile_field(&term, cfg.eps, &grid)?;
    let init = match a.init {
        InitKind::Profile => exact.clone(),
        InitKind::Zero => ScalarField::zeros(grid.clone()),
        InitKind::Linear => {
            let (bottom, top) = (exact.values()[0], exact.values()[grid.len() - 1]);
            let axis = grid.dim() - 1;
            let (lo, hi) = (grid.origin()[axis], grid.upper()[axis]);
            ScalarField::from_fn(grid.clone(), |x| bottom + (top - bottom) * (x[axis] - lo) / (hi - lo))
        }
    };
    let (u, report) = solver::minimize(&exact, &init, &term, &cfg)?;
    let column_spread = if grid.dim() == 2 {
        let mut worst = 0.0_f64;
        for j in 0..grid.ny() {
            for i in 1..grid.nx() {
                worst = worst.max((u.at(i, j) - u.at(0, j)).abs());
            }
        }
        Some(worst)
    } else {
        None
    };
    let result = json!({
        "solve_config": cfg,
        "grid": grid,
        "iterations": report.iterations,
        "converged": report.converged,
        "final_residual": report.final_residual,
        "trace_monotone": report.energy_trace.windows(2).all(|w| w[1] <= w[0]),
        "energy_trace": report.energy_trace,
        "sup_error_vs_profile": u.sup_distance(&exact)?,
        "column_spread": column_spread,
        "energy": solver::energy(&u, &term, cfg.eps)?,
        "discrete_energy": solver::discrete_energy(&u, &term, cfg.eps)?,
    });
    Ok(Outcome { result, artifacts: vec![Artifact::new("field.csv", u.to_csv()), Artifact::new("grid.json", grid.to_json() + "\n")] })
}

fn domain_center(grid: &GridSpec) -> (Point, f64) {
    let (lo, hi) = (grid.origin(), grid.upper());
    let half = if grid.dim() == 1 { hi[0] - lo[0] } else { (hi[0] - lo[0]).min(hi[1] - lo[1]) } * 0.5;
    ([0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1])], half)
}

fn vary(a: &VaryArgs, seed: u64) -> CliResult<Outcome> {
    let term = build_term(&a.term)?;
    let u = build_field(&a.field, &term, a.eps)?;
    let grid = u.grid();
    let xs = match &a.x {
        Some(path) => vec![load_vector_field(path)?],
        None => {
            let (center, half) = domain_center(grid);
            random_vector_fields(seed, grid.dim(), center, 0.5 * half, a.amplitude, a.count)?
        }
    };
    let curve = (a.eps == 0.0 && grid.dim() == 2).then(|| extract_interface(&u, 0.0));
    let entries = xs
        .iter()
        .map(|x| {
            let report = variations::evaluate(&u, x, &term, a.eps, a.dt, curve.as_ref())?;
            let (sup, c1) = x.norms(64);
            Ok(json!({ "x": x, "sup_norm": sup, "c1_norm": c1, "report": report }))
        })
        .collect::<CliResult<Vec<Value>>>()?;
    Ok(Outcome { result: json!({ "eps": a.eps, "fields": entries }), artifacts: vec![] })
}

fn parse_window(w: &Option<Vec<f64>>) -> CliResult<Option<Window>> {
    match w.as_deref() {
        None => Ok(None),
        Some(&[x0, y0, x1, y1]) => Ok(Some(Window::new([x0, y0], [x1, y1])?)),
        Some(_) => Err(invalid("window takes four numbers x0,y0,x1,y1")),
    }
}

/// First point along the last axis (other coordinates at the domain center) where
/// the sampled field reaches `level`.
fn level_crossing(u: &ScalarField, level: f64) -> CliResult<Point> {
    let grid = u.grid();
    let axis = grid.dim() - 1;
    let (center, _) = domain_center(grid);
    let n = grid.shape()[axis];
    let at = |s: f64| {
        let mut p = center;
        p[axis] = s;
        p
    };
    let coord = |k: usize| grid.origin()[axis] + grid.h() * k as f64;
    let first = (0..n)
        .find(|&k| sample(u, at(coord(k))).is_ok_and(|v| v >= level))
        .ok_or_else(|| invalid(format!("field never reaches {level} along the last axis")))?;
    if first == 0 {
        return Ok(at(coord(0)));
    }
    let (mut lo, mut hi) = (coord(first - 1), coord(first));
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if sample(u, at(mid))? >= level {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(at(hi))
}

fn single(check: &str, sense: Sense, eps: f64, value: Option<f64>, extra: &[(&str, f64)]) -> CheckReport {
    let mut p = std::collections::BTreeMap::new();
    p.insert("eps".to_string(), eps);
    for &(k, v) in extra {
        p.insert(k.to_string(), v);
    }
    CheckReport::new(check, sense, vec![p], vec![value])
}

pub fn check(term: &ReactionTerm, field: &FieldArgs, eps: f64, c: &CheckParams) -> CliResult<Outcome> {
    let u = build_field(field, term, eps)?;
    let grid = u.grid().clone();
    let window = parse_window(&c.window)?;
    let tau = term.tau();
    let mut artifacts = Vec::new();
    let report = match c.check {
        CheckKind::Nondeg => fbcheck::nondegeneracy_scan(&u, eps, c.theta.unwrap_or(tau), &c.radii, window.as_ref())?,
        CheckKind::Density => {
            if c.emit_sets {
                let layer = fbcheck::level_region(&u, term, eps, Band::Transition(tau))?;
                let zero = fbcheck::level_region(&u, term, eps, Band::Zero(tau / 4.0))?;
                artifacts.push(Artifact::new("layer.csv", layer.to_csv(&grid)));
                artifacts.push(Artifact::new("zero_band.csv", zero.to_csv(&grid)));
            }
            fbcheck::density_scan(&u, term, eps, c.l, &c.radii)?
        }
        CheckKind::ZeroDensity => {
            if c.emit_sets {
                artifacts.push(Artifact::new("free_boundary.csv", fbcheck::node_set_csv(&grid, &fbcheck::free_boundary_nodes(&u))));
            }
            fbcheck::zero_phase_density(&u, &c.radii)?
        }
        CheckKind::Lipschitz => single("lipschitz", Sense::AtMost, eps, Some(fbcheck::lipschitz_constant(&u, window.as_ref())), &[]),
        CheckKind::L1 => {
            let gap = fbcheck::l1_gap(&u, &cases::half_plane(&grid), term, eps)?;
            single("l1", Sense::AtMost, eps, Some(gap), &[])
        }
        CheckKind::Hausdorff => {
            let theta = c.theta.unwrap_or(tau);
            let layer = fbcheck::level_region(&u, term, eps, Band::Transition(theta))?;
            let f0 = fbcheck::free_boundary_nodes(&cases::half_plane(&grid));
            if c.emit_sets {
                artifacts.push(Artifact::new("layer.csv", layer.to_csv(&grid)));
                artifacts.push(Artifact::new("free_boundary.csv", fbcheck::node_set_csv(&grid, &f0)));
            }
            let d = fbcheck::hausdorff_distance(&grid, &layer.nodes, &f0)?;
            single("hausdorff", Sense::AtMost, eps, Some(d), &[("theta", theta), ("h", grid.h())])
        }
        CheckKind::Exit => {
            let theta = c.theta.unwrap_or(tau / 4.0);
            let p = match c.point.as_deref() {
                Some(&[x]) => [x, 0.0],
                Some(&[x, y]) => [x, y],
                Some(_) => return Err(invalid("point takes one or two coordinates")),
                None => level_crossing(&u, theta * eps)?,
            };
            let r = fbcheck::exit_radius(&u, term, eps, theta, p)?;
            let value = r.reached.then_some(r.radius);
            single("exit-radius", Sense::AtMost, eps, value, &[("theta", theta), ("reached", r.reached as u8 as f64)])
        }
        CheckKind::Poincare => {
            let region = match window {
                Some(w) => w,
                None => Window::new(grid.origin(), grid.upper())?,
            };
            let r = fbcheck::poincare_ratio(&u, &region)?;
            single("poincare", Sense::AtMost, eps, Some(r.ratio), &[("zero_fraction", r.zero_fraction)])
        }
    };
    let report = match c.threshold {
        Some(t) => report.with_threshold(t),
        None => report,
    };
    artifacts.push(Artifact::new("report.csv", fbcheck::report_csv(&report)));
    Ok(Outcome { result: to_value(&report), artifacts })
}

fn bump(grid: &GridSpec, center: Point, radius: f64) -> ScalarField {
    ScalarField::from_fn(grid.clone(), |x| {
        let q = 1.0 - ((x[0] - center[0]).powi(2) + (x[1] - center[1]).powi(2)) / (radius * radius);
        if q > 0.0 {
            q.powi(4)
        } else {
            0.0
        }
    })
}

fn curve_stats(curve: &InterfaceCurve) -> Value {
    let regular: Vec<_> = curve.vertices().filter(|v| !v.singular).collect();
    let max_abs_h = regular.iter().map(|v| v.curvature.abs()).fold(0.0, f64::max);
    let mean_h = regular.iter().map(|v| v.curvature).sum::<f64>() / regular.len().max(1) as f64;
    let grad_dev = regular.iter().map(|v| (v.grad[0].hypot(v.grad[1]) - 1.0).abs()).fold(0.0, f64::max);
    json!({
        "components": curve.components.len(),
        "vertices": curve.vertex_count(),
        "singular_vertices": curve.vertex_count() - regular.len(),
        "length": curve.length(),
        "max_abs_curvature": max_abs_h,
        "mean_curvature": mean_h,
        "max_gradient_deviation": grad_dev,
    })
}

fn cone(a: &ConeArgs, seed: u64) -> CliResult<Outcome> {
    let term = build_term(&a.term)?;
    let grid = square_grid(2, a.lo, a.hi, a.h)?;
    let (u, anchor) = match a.kind {
        ConeKind::Halfplane => (cases::half_plane(&grid), [0.0, 0.0]),
        ConeKind::Radial => (cases::radial(&grid, a.radius), [a.radius, 0.0]),
    };
    let curve = extract_interface(&u, 0.0);
    if curve.is_empty() {
        return Err(invalid("the free boundary does not meet the grid"));
    }
    let x: VectorFieldSpec = match &a.x {
        Some(path) => load_vector_field(path)?,
        None => random_vector_fields(seed, 2, anchor, 0.35, 0.3, 1)?.remove(0),
    };
    let phi = bump(&grid, anchor, 0.35);
    let result = json!({
        "kind": a.kind,
        "grid": grid,
        "energy": solver::energy(&u, &term, 0.0)?,
        "interface": curve_stats(&curve),
        "x": x,
        "first_variation": variations::first_inner_variation(&u, &x, &term, 0.0)?,
        "second_variation_volume": variations::second_inner_variation(&u, &x, &term, 0.0)?,
        "second_variation_surface": variations::surface_second_variation(&u, &x, &curve)?,
        "cjk_form": variations::cjk_form(&u, &phi, &curve)?,
    });
    let artifacts = if a.emit_interface { vec![Artifact::new("interface.csv", curve.to_csv())] } else { vec![] };
    Ok(Outcome { result, artifacts })
}

fn with_eps(cmd: &Command, eps: f64) -> CliResult<Command> {
    let mut cmd = cmd.clone();
    match &mut cmd {
        Command::Profile(a) => a.eps = eps,
        Command::Solve(a) => a.eps = eps,
        Command::Vary(a) => a.eps = eps,
        Command::Check(a) => a.eps = eps,
        other => return Err(invalid(format!("{} has no eps to sweep", other.name()))),
    }
    Ok(cmd)
}

fn thread_pool() -> CliResult<rayon::ThreadPool> {
    let threads = match std::env::var(THREADS_VAR) {
        Ok(v) => v.trim().parse::<usize>().map_err(|_| invalid(format!("{THREADS_VAR} must be a nonnegative integer, got {v:?}")))?,
        Err(_) => 0,
    };
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().map_err(|e| invalid(e.to_string()))
}

fn sweep(config: &ExperimentConfig, a: &SweepArgs) -> CliResult<Outcome> {
    if a.eps.is_empty() {
        return Err(invalid("sweep needs at least one eps"));
    }
    let entries = a
        .eps
        .iter()
        .enumerate()
        .map(|(k, &eps)| {
            let command = match &a.base {
                Some(base) => with_eps(base, eps)?,
                None => Command::Check(CheckArgs { term: a.term.clone(), field: a.field.clone(), eps, params: a.params.clone() }),
            };
            let dir = format!("eps-{k}");
            Ok((dir.clone(), ExperimentConfig { out: config.out.join(&dir), seed: config.seed, command }))
        })
        .collect::<CliResult<Vec<_>>>()?;
    let outcomes: Vec<CliResult<Outcome>> = thread_pool()?.install(|| entries.par_iter().map(|(_, cfg)| run(cfg)).collect());

    let mut summary = Vec::new();
    let mut values = Vec::new();
    let mut artifacts = Vec::new();
    for ((dir, cfg), outcome) in entries.iter().zip(outcomes) {
        let outcome = outcome?;
        let value = outcome.result.get("worst").and_then(Value::as_f64);
        values.push(value);
        let doc = envelope(cfg, outcome.result.clone());
        artifacts.push(Artifact::new(format!("{dir}/result.json"), pretty(&doc)));
        for art in outcome.artifacts {
            artifacts.push(Artifact::new(format!("{dir}/{}", art.name), art.contents));
        }
        summary.push(json!({ "dir": dir, "config_hash": config_hash(cfg), "result": outcome.result }));
    }
    let ratios: Vec<Option<f64>> = values.windows(2).map(|w| Some(w[1]? / w[0]?)).collect();
    let decreasing = values.windows(2).all(|w| matches!((w[0], w[1]), (Some(x), Some(y)) if y < x));
    let result = json!({
        "eps": a.eps,
        "values": values,
        "ratios": ratios,
        "monotone_decreasing": decreasing,
        "entries": summary,
    });
    Ok(Outcome { result, artifacts })
}
