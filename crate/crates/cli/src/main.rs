#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod args;
mod check;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::process::ExitCode;

use clap::Parser;
use hkdyn_core::diagnostics::{attach_reports, clusters, write_report_csv, ReportOptions};
use hkdyn_core::experiments::{
    aggregate, run_demo, run_sweep, write_aggregate_csv, write_results_csv, DemoKind, GraphModel,
    InitRange, SweepSpec, DEFAULT_BUDGET,
};
use hkdyn_core::io::{write_provenance, write_trajectory_jsonl};
use hkdyn_core::spectral::spectral_report;
use hkdyn_core::{
    run, Configuration, GraphSchedule, HkError, Model, NoiseMode, NoiseSource, RunOptions,
    StopReason, StopRule, Trajectory,
};
use serde_json::json;

use args::{
    Cli, Command, DemoArgs, GraphModelArg, NetworkArgs, NoiseArg, SimulateArgs, SpectralArgs,
    SweepArgs,
};

/// Failures and their exit codes.
enum Failure {
    Usage(String),
    Violations,
}

impl From<HkError> for Failure {
    fn from(e: HkError) -> Self {
        Failure::Usage(e.to_string())
    }
}

type CliResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Sweep(a) => sweep(a),
        Command::Check(a) => check::check(a),
        Command::Demo(a) => demo(a),
        Command::SpectralReport(a) => spectral(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Violations) => ExitCode::from(2),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display())))
}

/// Writes the sidecar that records how an output file was produced.
fn provenance(path: &Path, params: serde_json::Value) -> CliResult {
    let args: Vec<String> = std::env::args().collect();
    let mut meta = json!({ "argv": args });
    if let (Some(m), serde_json::Value::Object(p)) = (meta.as_object_mut(), params) {
        m.extend(p);
    }
    write_provenance(path, &meta)?;
    Ok(())
}

fn schedule(net: &NetworkArgs, n: usize) -> Result<Option<GraphSchedule>, Failure> {
    let schedule = match (&net.graph, &net.schedule) {
        (Some(spec), None) => Some(GraphSchedule::fixed(spec.build(net.seed)?)),
        (None, Some(path)) => Some(GraphSchedule::load(path)?),
        (None, None) => None,
        (Some(_), Some(_)) => {
            return Err(Failure::Usage(
                "--graph and --schedule are mutually exclusive".into(),
            ))
        }
    };
    if let Some(s) = &schedule {
        if s.n() != n {
            return Err(Failure::Usage(format!(
                "network has {} agents but the initial configuration has {n}",
                s.n()
            )));
        }
    }
    Ok(schedule)
}

fn noise_source(a: &SimulateArgs, model: Model, n: usize) -> Result<Option<NoiseSource>, Failure> {
    let Some(mode) = model.noise_mode() else {
        if a.noise.is_some() || a.eps.is_some() {
            return Err(Failure::Usage(format!(
                "--noise and --eps apply only to nd models, not {model}"
            )));
        }
        return Ok(None);
    };
    let eps = a.eps.map(|e| e.resolve(n));
    let source = match a.noise.as_ref() {
        None => return Err(Failure::Usage(format!("model {model} needs --noise"))),
        Some(NoiseArg::Zero) => NoiseSource::zero(mode),
        Some(NoiseArg::Uniform(seed)) => {
            let eps = eps.ok_or_else(|| Failure::Usage("uniform noise needs --eps".into()))?;
            NoiseSource::uniform(eps, mode, *seed)?
        }
        Some(NoiseArg::File(path)) => {
            let source = NoiseSource::load(path)?;
            if eps.is_some_and(|e| e != source.bound()) {
                return Err(Failure::Usage(format!(
                    "--eps disagrees with the bound {} declared in {}",
                    source.bound(),
                    path.display()
                )));
            }
            source
        }
    };
    if source.mode() != mode {
        return Err(Failure::Usage(format!(
            "model {model} needs {} noise",
            if mode == NoiseMode::PerPair {
                "per-pair"
            } else {
                "per-agent"
            }
        )));
    }
    Ok(Some(source))
}

fn stop_rule(steps: usize, threshold: Option<f64>, rho: Option<f64>) -> Result<StopRule, Failure> {
    let mut stop = StopRule::steps(steps);
    if let Some(t) = threshold {
        if !(t > 0.0) {
            return Err(Failure::Usage(format!(
                "--threshold must be positive, got {t}"
            )));
        }
        stop = stop.movement(t);
    }
    if let Some(r) = rho {
        if !(r >= 0.0) {
            return Err(Failure::Usage(format!(
                "--rho must be non-negative, got {r}"
            )));
        }
        stop = stop.clustered(r);
    }
    Ok(stop)
}

fn stop_text(traj: &Trajectory) -> String {
    match traj.stop {
        StopReason::MaxSteps => format!("step cap reached after {} steps", traj.steps()),
        StopReason::Movement { t } => format!("movement below threshold at t={t}"),
        StopReason::Clustered { t } => format!("clustered at t={t}"),
    }
}

fn simulate(a: SimulateArgs) -> CliResult {
    let model: Model = a.model.into();
    let x0 = a.init.load()?;
    let n = x0.n();
    let schedule = schedule(&a.network, n)?;
    if model == Model::Social && schedule.is_none() {
        return Err(Failure::Usage(
            "model social needs --graph or --schedule".into(),
        ));
    }
    if model != Model::Social && schedule.is_some() {
        return Err(Failure::Usage(format!(
            "--graph/--schedule do not apply to model {model}"
        )));
    }
    let noise = noise_source(&a, model, n)?;
    if a.report.is_none() && a.spectral {
        return Err(Failure::Usage("--spectral needs --report <csv>".into()));
    }
    let stop = stop_rule(a.steps, a.threshold, a.rho)?;
    let options = RunOptions {
        allow_unfriendly: a.allow_unfriendly,
        reports: a.report.as_ref().map(|_| ReportOptions {
            spectral: a.spectral,
            allow_large: a.force,
            ..Default::default()
        }),
    };
    let traj = run(
        model,
        x0,
        schedule.as_ref(),
        noise.as_ref(),
        &stop,
        &options,
    )?;

    let last = traj.last();
    let groups = clusters(last, a.rho.unwrap_or(0.0));
    println!("model {model}, n={n}, d={}", last.dim());
    println!("{}", stop_text(&traj));
    println!(
        "final: {} separated groups, widest spans {:e}",
        groups.groups.len(),
        groups.max_extent
    );
    for (t, pairs) in &traj.friendliness_violations {
        let pairs: Vec<(usize, usize)> = pairs.iter().map(|&(i, j)| (i + 1, j + 1)).collect();
        println!("unfriendly transition at t={t}: lost edges {pairs:?}");
    }
    let params = json!({
        "model": model.to_string(),
        "n": n,
        "steps": a.steps,
        "threshold": a.threshold,
        "rho": a.rho,
        "eps": noise.as_ref().map(NoiseSource::bound),
        "seed": a.network.seed,
        "spectral": a.spectral,
    });
    if let Some(path) = &a.out {
        write_trajectory_jsonl(create(path)?, &traj)?;
        provenance(path, params.clone())?;
    }
    if let Some(path) = &a.report {
        write_report_csv(create(path)?, traj.reports.as_deref().unwrap_or_default())?;
        provenance(path, params)?;
    }
    Ok(())
}

fn sweep(a: SweepArgs) -> CliResult {
    let spec = match &a.spec {
        Some(path) => SweepSpec::load(path)?,
        None => SweepSpec {
            n_list: a.n.clone(),
            p_grid: a.p_grid.0.clone(),
            m_list: a.m_list.clone(),
            trials: a.trials,
            master_seed: a.seed,
            init: InitRange::default(),
            threshold: a.threshold,
            max_steps: a.steps,
            graph_model: match a.graph_model {
                GraphModelArg::Gnp => GraphModel::Gnp,
                GraphModelArg::Ba => GraphModel::Ba,
            },
        },
    };
    let result = run_sweep(&spec, DEFAULT_BUDGET, a.force)?;
    let agg = aggregate(&result);
    let params = serde_json::to_value(&spec).map_err(HkError::from)?;
    match &a.out {
        Some(path) => {
            write_results_csv(create(path)?, &result)?;
            provenance(path, params.clone())?;
        }
        None if a.report.is_none() => write_aggregate_csv(io::stdout().lock(), &agg)?,
        None => {}
    }
    if let Some(path) = &a.report {
        write_aggregate_csv(create(path)?, &agg)?;
        provenance(path, params)?;
    }
    if let Some(best) = agg
        .iter()
        .max_by(|x, y| x.mean_time.total_cmp(&y.mean_time))
    {
        eprintln!(
            "{} runs; slowest cell n={} p={} with mean time {:.2}",
            result.rows.len(),
            best.n,
            best.p,
            best.mean_time
        );
    }
    Ok(())
}

fn demo(a: DemoArgs) -> CliResult {
    let mut kind = a.kind.clone();
    match &mut kind {
        DemoKind::NonDeterministic { eps } => {
            if let Some(e) = a.eps {
                *eps = e;
            }
        }
        DemoKind::InitDependence { deltas } => {
            if !a.delta.is_empty() {
                *deltas = a.delta.clone();
            }
        }
        DemoKind::NoFreeze { steps } => {
            if let Some(s) = a.steps {
                *steps = s;
            }
        }
        DemoKind::NoOrder { .. } => {}
    }
    let outcome = run_demo(&kind)?;
    println!("demo {kind}");
    for line in &outcome.summary {
        println!("  {line}");
    }
    if let Some(path) = &a.out {
        write_trajectory_jsonl(create(path)?, &outcome.trajectory)?;
        provenance(
            path,
            json!({ "demo": kind.to_string(), "eps": a.eps, "delta": a.delta, "steps": a.steps }),
        )?;
    }
    if outcome.verified {
        println!("verified");
        Ok(())
    } else {
        println!("NOT verified");
        Err(Failure::Violations)
    }
}

fn spectral(a: SpectralArgs) -> CliResult {
    let x0: Configuration = a.init.load()?;
    let schedule = schedule(&a.network, x0.n())?;
    if a.steps == 0 {
        let graph = schedule.as_ref().map(GraphSchedule::initial);
        let report = spectral_report(&x0, graph)?;
        let text = serde_json::to_string_pretty(&report).map_err(HkError::from)?;
        match &a.out {
            Some(path) => {
                let mut w = create(path)?;
                writeln!(w, "{text}").map_err(|e| Failure::Usage(e.to_string()))?;
                provenance(path, json!({ "n": x0.n(), "seed": a.network.seed }))?;
            }
            None => println!("{text}"),
        }
        return Ok(());
    }
    let model = if schedule.is_some() {
        Model::Social
    } else {
        Model::Classical
    };
    let stop = stop_rule(a.steps, a.threshold, None)?;
    let mut traj = run(
        model,
        x0,
        schedule.as_ref(),
        None,
        &stop,
        &RunOptions::default(),
    )?;
    attach_reports(
        &mut traj,
        &ReportOptions {
            spectral: true,
            allow_large: a.force,
            ..Default::default()
        },
    )?;
    let rows = traj.reports.as_deref().unwrap_or_default();
    match &a.out {
        Some(path) => {
            write_report_csv(create(path)?, rows)?;
            provenance(
                path,
                json!({ "model": model.to_string(), "steps": a.steps, "threshold": a.threshold, "seed": a.network.seed }),
            )?;
        }
        None => write_report_csv(io::stdout().lock(), rows)?,
    }
    Ok(())
}
