use andersen_core::andersen::simulate_andersen;
use andersen_core::coupling::CouplingKind;
use andersen_core::harness::{
    estimate_rho_curve, fit_decay_rate, sweep as run_sweep, CouplingSpec, Experiment, GammaSpec,
};
use andersen_core::metrics::{torus_params, wah_rate};
use andersen_core::rng::replica_rng;
use andersen_core::selftest::run_all;
use anyhow::anyhow;
use serde_json::{json, Value};

use crate::config::{self, RunConfig};
use crate::output::{write_csv, write_json, Cell};
use crate::{CheckArgs, RunArgs};

pub struct Failure {
    pub code: u8,
    pub inner: anyhow::Error,
}

type Outcome = Result<u8, Failure>;

fn usage(inner: anyhow::Error) -> Failure {
    Failure { code: 1, inner }
}

fn runtime(inner: anyhow::Error) -> Failure {
    Failure { code: 2, inner }
}

/// Sorts a library error into a configuration or a runtime failure.
fn classify(e: andersen_core::Error) -> Failure {
    let code = if e.is_config() { 1 } else { 2 };
    Failure {
        code,
        inner: e.into(),
    }
}

pub fn configure_threads() -> anyhow::Result<()> {
    let Ok(raw) = std::env::var("ANDERSEN_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| anyhow!("ANDERSEN_THREADS must be a positive integer, got {raw:?}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| anyhow!("cannot size the thread pool: {e}"))
}

fn load(args: &RunArgs, simulate: bool) -> Result<RunConfig, Failure> {
    let mut tree = config::load_tree(&args.config).map_err(usage)?;
    if simulate {
        // Keys that only matter for coupled runs.
        config::set_default(&mut tree, "experiment", "replicas", json!(1));
        config::set_default(&mut tree, "experiment", "distance", json!("rho_simple"));
        config::set_default(&mut tree, "experiment", "initial", json!("identical"));
    }
    for o in &args.overrides {
        config::apply_override(&mut tree, o).map_err(usage)?;
    }
    if let Some(seed) = args.seed {
        config::apply_override(&mut tree, &format!("experiment.seed={seed}")).map_err(usage)?;
    }
    if let Some(r) = args.replicas {
        config::apply_override(&mut tree, &format!("experiment.replicas={r}")).map_err(usage)?;
    }
    let mut cfg = config::parse(tree).map_err(usage)?;
    if let Some(p) = &args.out {
        cfg.output.path = Some(p.clone());
    }
    if let Some(p) = &args.meta {
        cfg.output.meta = Some(p.clone());
    }
    Ok(cfg)
}

fn emit_meta(cfg: &RunConfig, meta: Value) -> Result<(), Failure> {
    match cfg.output.meta_path() {
        Some(path) => write_json(&path, &meta).map_err(runtime),
        None => Ok(()),
    }
}

pub fn simulate(args: &RunArgs, replica: u64) -> Outcome {
    let cfg = load(args, true)?;
    let experiment = Experiment {
        space: cfg.space.clone(),
        potential: cfg.potential.clone(),
        dynamics: cfg.dynamics.clone(),
        coupling: cfg.coupling.clone().unwrap_or(CouplingSpec {
            kind: CouplingKind::Synchronous,
            gamma: GammaSpec::Fixed(0.0),
        }),
        experiment: cfg.experiment.clone(),
    };
    let prepared = experiment.prepare().map_err(classify)?;
    let mut rng = replica_rng(cfg.experiment.seed, replica);
    let start = prepared.initial_state(&mut rng).map_err(classify)?.first();
    let trajectory = simulate_andersen(
        &start,
        &prepared.potential,
        &cfg.space,
        &prepared.coupling.dynamics,
        &mut rng,
    )
    .map_err(classify)?;

    let dim = cfg.space.dim();
    let names: Vec<String> = std::iter::once("t".to_string())
        .chain((1..=dim).map(|k| format!("x{k}")))
        .chain((1..=dim).map(|k| format!("v{k}")))
        .collect();
    let header: Vec<&str> = names.iter().map(String::as_str).collect();
    let rows: Vec<Vec<Cell>> = trajectory
        .times
        .iter()
        .zip(&trajectory.states)
        .map(|(&t, s)| {
            std::iter::once(t)
                .chain(s.x.iter().copied())
                .chain(s.v.iter().copied())
                .map(Cell::Real)
                .collect()
        })
        .collect();
    write_csv(cfg.output.path.as_deref(), &header, &rows).map_err(runtime)?;
    emit_meta(
        &cfg,
        json!({
            "config": cfg.without_output(),
            "seed": cfg.experiment.seed,
            "replica": replica,
            "lambda": prepared.coupling.dynamics.lambda,
        }),
    )?;
    Ok(0)
}

pub fn couple(args: &RunArgs) -> Outcome {
    let cfg = load(args, false)?;
    let experiment = cfg.coupled_experiment().map_err(usage)?;
    experiment.validate().map_err(classify)?;
    let series = estimate_rho_curve(&experiment).map_err(classify)?;
    let rows: Vec<Vec<Cell>> = (0..series.times.len())
        .map(|k| {
            vec![
                Cell::Real(series.times[k]),
                Cell::Real(series.mean[k]),
                Cell::Real(series.stderr[k]),
                Cell::Count(series.count),
            ]
        })
        .collect();
    write_csv(cfg.output.path.as_deref(), &["t", "mean", "stderr", "count"], &rows)
        .map_err(runtime)?;

    let mut meta = series.meta.clone();
    meta["config"] = serde_json::to_value(cfg.without_output()).map_err(|e| runtime(e.into()))?;
    meta["count"] = json!(series.count);
    meta["aborted"] = json!(series.aborted);
    meta["fit"] = match fit_decay_rate(&series, experiment.fit_window()) {
        Ok(fit) => json!(fit),
        Err(_) => Value::Null,
    };
    emit_meta(&cfg, meta)?;
    Ok(0)
}

pub fn sweep(args: &RunArgs) -> Outcome {
    let cfg = load(args, false)?;
    let spec = cfg
        .sweep
        .clone()
        .ok_or_else(|| usage(anyhow!("missing [sweep] section")))?;
    if spec.values.is_empty() {
        return Err(usage(anyhow!("sweep.values is empty")));
    }
    let experiment = cfg.coupled_experiment().map_err(usage)?;
    experiment.validate().map_err(classify)?;
    let rows = run_sweep(&experiment, spec.axis, &spec.values, spec.target).map_err(classify)?;

    let axis = serde_json::to_value(spec.axis)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_else(|| "value".into());
    let table: Vec<Vec<Cell>> = rows
        .iter()
        .map(|r| {
            vec![
                Cell::Real(r.value),
                Cell::Real(r.estimate),
                r.stderr.map_or(Cell::Empty, Cell::Real),
                r.r_squared.map_or(Cell::Empty, Cell::Real),
                Cell::Count(r.count),
            ]
        })
        .collect();
    write_csv(
        cfg.output.path.as_deref(),
        &[axis.as_str(), "estimate", "stderr", "r_squared", "count"],
        &table,
    )
    .map_err(runtime)?;
    emit_meta(
        &cfg,
        json!({
            "config": cfg.without_output(),
            "seed": cfg.experiment.seed,
            "rows": rows,
        }),
    )?;
    Ok(0)
}

pub fn check(args: &CheckArgs) -> Outcome {
    let lambda = match (args.lambda, args.lambda_per_m) {
        (Some(l), _) => l,
        (None, Some(r)) => r * args.m,
        (None, None) => return Err(usage(anyhow!("give --lambda or --lambda-per-m"))),
    };
    let report = match (args.ell, args.sigma_max) {
        (Some(ell), _) => {
            let params =
                torus_params(args.beta, lambda, args.m, ell, args.l, args.j).map_err(classify)?;
            json!({ "space": "torus", "params": params })
        }
        (None, Some(sigma)) => {
            for (name, v) in [("lambda", lambda), ("m", args.m), ("sigma-max", sigma)] {
                if !(v.is_finite() && v > 0.0) {
                    return Err(usage(anyhow!("--{name} must be positive, got {v}")));
                }
            }
            if !(args.lg.is_finite() && args.lg >= 0.0) {
                return Err(usage(anyhow!("--lg must be nonnegative, got {}", args.lg)));
            }
            let rate = wah_rate(lambda, args.m, sigma, args.lg);
            json!({
                "space": "euclidean",
                "lambda": lambda,
                "m": args.m,
                "sigma_max": sigma,
                "L_G": args.lg,
                "c": rate.c,
                "condition_ok": rate.condition_ok,
            })
        }
        (None, None) => return Err(usage(anyhow!("give --ell (torus) or --sigma-max (Euclidean)"))),
    };
    let text = serde_json::to_string_pretty(&report).map_err(|e| runtime(e.into()))?;
    println!("{text}");
    Ok(0)
}

pub fn selftest(seed: u64) -> Outcome {
    let results = run_all(seed);
    for r in &results {
        println!(
            "{} {}: {}",
            if r.passed { "PASS" } else { "FAIL" },
            r.name,
            r.detail
        );
    }
    Ok(if results.iter().all(|r| r.passed) { 0 } else { 3 })
}
