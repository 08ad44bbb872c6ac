//! `hkdyn check`: randomized runs of the theorem-backed invariants.

use std::collections::BTreeMap;

use clap::ValueEnum;
use hkdyn_core::config::communication_graph;
use hkdyn_core::diagnostics::{check_nd_lemmas, LemmaReport, ReportOptions};
use hkdyn_core::experiments::uniform_line;
use hkdyn_core::graphs::{gnp, GraphSchedule};
use hkdyn_core::seed::{mix, unit_closed};
use hkdyn_core::spectral::{gap_bound, second_eigenvalue, DECREMENT_TOLERANCE};
use hkdyn_core::{run, HkError, Model, NoiseSource, RunOptions, StopRule};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::args::{CheckArgs, Suite};
use crate::{create, provenance, CliResult, Failure};

/// Outcome of one suite: instance counts per check and violation records.
#[derive(Default)]
struct Tally {
    evaluated: BTreeMap<String, usize>,
    violations: Vec<Value>,
    notes: Vec<String>,
    cases: BTreeMap<String, usize>,
}

impl Tally {
    fn count(&mut self, check: &str, k: usize) {
        *self.evaluated.entry(check.to_string()).or_default() += k;
    }

    fn merge(mut self, other: Tally) -> Tally {
        for (k, v) in other.evaluated {
            *self.evaluated.entry(k).or_default() += v;
        }
        self.violations.extend(other.violations);
        self.notes.extend(other.notes);
        for (k, v) in other.cases {
            *self.cases.entry(k).or_default() += v;
        }
        self
    }
}

fn start(n: usize, seed: u64) -> Result<hkdyn_core::Configuration, HkError> {
    uniform_line(n, 0.0, n as f64 * 0.5 + 0.5, seed)
}

fn edge_probability(seed: u64) -> f64 {
    0.05 + 0.95 * unit_closed(seed)
}

fn nd_trial(a: &CheckArgs, eps: f64, trial: u64) -> Result<LemmaReport, HkError> {
    let seed = mix(&[a.seed, trial]);
    let model: Model = a.model.into();
    let mode = model.noise_mode().ok_or_else(|| {
        HkError::Inconsistent(format!("suite nd-lemmas needs an nd model, got {model}"))
    })?;
    let noise = NoiseSource::uniform(eps, mode, mix(&[seed, 2]))?;
    let traj = run(
        model,
        start(a.n, mix(&[seed, 1]))?,
        None,
        Some(&noise),
        &StopRule::steps(a.steps),
        &RunOptions::default(),
    )?;
    check_nd_lemmas(&traj, eps)
}

fn energy_trial(a: &CheckArgs, trial: u64) -> Result<Tally, HkError> {
    let seed = mix(&[a.seed, trial]);
    let graph = gnp(a.n, edge_probability(mix(&[seed, 3])), mix(&[seed, 2]))?;
    let opts = RunOptions {
        reports: Some(ReportOptions::spectral()),
        ..Default::default()
    };
    let traj = run(
        Model::Social,
        start(a.n, mix(&[seed, 1]))?,
        Some(&GraphSchedule::fixed(graph)),
        None,
        &StopRule::steps(a.steps),
        &opts,
    )?;
    let mut tally = Tally::default();
    for r in traj.reports.as_deref().unwrap_or_default() {
        let decrement = r.decrement.unwrap_or(0.0);
        let guaranteed = r.guaranteed_decrement.unwrap_or(0.0);
        if decrement < -DECREMENT_TOLERANCE {
            tally.violations.push(
                json!({"trial": trial, "t": r.t, "check": "monotonicity", "margin": decrement}),
            );
        }
        if decrement < guaranteed - DECREMENT_TOLERANCE {
            tally
                .violations
                .push(json!({"trial": trial, "t": r.t, "check": "decrement", "margin": decrement - guaranteed}));
        }
    }
    tally.count("monotonicity", traj.steps());
    tally.count("decrement", traj.steps());
    Ok(tally)
}

fn gap_trial(a: &CheckArgs, trial: u64) -> Result<Tally, HkError> {
    let seed = mix(&[a.seed, trial]);
    let graph = gnp(a.n, edge_probability(mix(&[seed, 3])), mix(&[seed, 2]))?;
    let cg = communication_graph(&start(a.n, mix(&[seed, 1]))?, Some(&graph))?;
    let (lambda, bound) = (second_eigenvalue(&cg), gap_bound(&cg));
    let mut tally = Tally::default();
    tally.count("gap", 1);
    if lambda > bound + 1e-9 {
        tally
            .violations
            .push(json!({"trial": trial, "check": "gap", "lambda": lambda, "bound": bound}));
    }
    Ok(tally)
}

fn lemma_tally(report: LemmaReport, trial: u64) -> Tally {
    let mut tally = Tally::default();
    for (check, k) in &report.evaluated {
        tally.count(check.name(), *k);
    }
    for (check, why) in &report.skipped {
        tally.notes.push(format!("{} skipped: {why}", check.name()));
    }
    for (tag, k) in report.case_histogram() {
        *tally.cases.entry(format!("{tag:?}")).or_default() += k;
    }
    for v in &report.violations {
        tally
            .violations
            .push(json!({"trial": trial, "t": v.t, "check": v.check.name(), "margin": v.margin}));
    }
    tally
}

pub fn check(a: CheckArgs) -> CliResult {
    if a.trials == 0 || a.n == 0 {
        return Err(Failure::Usage("--trials and --n must be positive".into()));
    }
    let eps = a.eps.resolve(a.n);
    let trials: Vec<u64> = (0..a.trials as u64).collect();
    let tallies: Vec<Tally> = trials
        .par_iter()
        .map(|&trial| match a.suite {
            Suite::NdLemmas => nd_trial(&a, eps, trial).map(|r| lemma_tally(r, trial)),
            Suite::Energy => energy_trial(&a, trial),
            Suite::Gap => gap_trial(&a, trial),
        })
        .collect::<Result<_, _>>()?;
    let mut total = tallies.into_iter().fold(Tally::default(), Tally::merge);
    total.notes.sort();
    total.notes.dedup();

    let suite = a
        .suite
        .to_possible_value()
        .map(|v| v.get_name().to_string())
        .unwrap_or_default();
    println!(
        "suite {suite}: n={}, trials={}, steps={}, seed={}, eps={eps:e}",
        a.n, a.trials, a.steps, a.seed
    );
    for (check, k) in &total.evaluated {
        let bad = total
            .violations
            .iter()
            .filter(|v| v["check"] == check.as_str())
            .count();
        println!("  {check}: {k} instances, {bad} violations");
    }
    if !total.cases.is_empty() {
        let cases: Vec<String> = total
            .cases
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect();
        println!("  case tags: {}", cases.join(", "));
    }
    for note in &total.notes {
        println!("  {note}");
    }
    if let Some(path) = &a.out {
        let mut record = json!({
            "suite": suite,
            "checked": total.evaluated.keys().collect::<Vec<_>>(),
            "evaluated": total.evaluated,
            "violations": total.violations,
        });
        if !total.cases.is_empty() {
            record["case_histogram"] = json!(total.cases);
        }
        serde_json::to_writer_pretty(create(path)?, &record).map_err(HkError::from)?;
        provenance(
            path,
            json!({"n": a.n, "eps": eps, "trials": a.trials, "steps": a.steps, "seed": a.seed}),
        )?;
    }
    if total.violations.is_empty() {
        println!("no violations");
        Ok(())
    } else {
        println!("{} violations", total.violations.len());
        Err(Failure::Violations)
    }
}
