//! Convergence-time sweeps of social dynamics over random networks.
//!
//! Each cell `(n, parameter, trial)` draws a network and an initial
//! configuration from seeds derived with [`crate::seed::mix`] from
//! `(master_seed, n, parameter bits, trial)`; cells are independent and rows
//! are sorted before they are written, so output does not depend on the
//! scheduling of the worker pool.

use std::io::Write;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::Configuration;
use crate::diagnostics::DEFAULT_THRESHOLD;
use crate::error::{HkError, Result};
use crate::graphs::{barabasi_albert, gnp, SocialGraph};
use crate::seed;

pub const RESULTS_HEADER: &str = "n,p,trial,seed,convergence_time,converged";
pub const AGGREGATE_HEADER: &str = "n,p,mean_time,std_time,num_converged,num_capped";

/// Default work budget, in neighbor visits, for [`run_sweep`].
pub const DEFAULT_BUDGET: f64 = 2e11;
/// Steps assumed per run when estimating work.
const ASSUMED_STEPS: f64 = 500.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphModel {
    Gnp,
    Ba,
}

/// Initial positions are uniform on `[lo, hi)`; missing ends default to
/// `[1, n]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct InitRange {
    #[serde(default)]
    pub lo: Option<f64>,
    #[serde(default)]
    pub hi: Option<f64>,
}

impl InitRange {
    pub fn bounds(&self, n: usize) -> (f64, f64) {
        (self.lo.unwrap_or(1.0), self.hi.unwrap_or(n as f64))
    }
}

fn default_threshold() -> f64 {
    DEFAULT_THRESHOLD
}

fn default_max_steps() -> usize {
    100_000
}

fn default_graph_model() -> GraphModel {
    GraphModel::Gnp
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub n_list: Vec<usize>,
    /// Edge probabilities for `gnp`.
    #[serde(default)]
    pub p_grid: Vec<f64>,
    /// Attachment counts for `ba`.
    #[serde(default)]
    pub m_list: Vec<usize>,
    pub trials: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub init: InitRange,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
    #[serde(default = "default_graph_model")]
    pub graph_model: GraphModel,
}

impl SweepSpec {
    /// Sweep over `G(n, p)` with the default threshold and step cap.
    pub fn gnp(n_list: Vec<usize>, p_grid: Vec<f64>, trials: usize, master_seed: u64) -> Self {
        SweepSpec {
            n_list,
            p_grid,
            m_list: Vec::new(),
            trials,
            master_seed,
            init: InitRange::default(),
            threshold: DEFAULT_THRESHOLD,
            max_steps: default_max_steps(),
            graph_model: GraphModel::Gnp,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HkError::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Grid values as written in the `p` column.
    pub fn grid(&self) -> Vec<f64> {
        match self.graph_model {
            GraphModel::Gnp => self.p_grid.clone(),
            GraphModel::Ba => self.m_list.iter().map(|&m| m as f64).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(HkError::InvalidParameter(msg));
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.n_list.is_empty() || self.n_list.contains(&0) {
            return bad("n_list must be non-empty with positive entries".into());
        }
        if self.grid().is_empty() {
            return bad(format!("empty parameter grid for {:?}", self.graph_model));
        }
        if let Some(p) = self.p_grid.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return bad(format!("edge probability {p} outside [0, 1]"));
        }
        if self.graph_model == GraphModel::Ba {
            for &n in &self.n_list {
                if let Some(m) = self.m_list.iter().find(|&&m| m == 0 || m >= n) {
                    return bad(format!("attachment count {m} invalid for n={n}"));
                }
            }
        }
        for &n in &self.n_list {
            let (lo, hi) = self.init.bounds(n);
            if !(lo < hi) {
                return bad(format!("initial range [{lo}, {hi}) is empty for n={n}"));
            }
        }
        if !(self.threshold > 0.0) {
            return bad(format!(
                "threshold must be positive, got {}",
                self.threshold
            ));
        }
        Ok(())
    }

    pub fn cell_count(&self) -> usize {
        self.n_list.len() * self.grid().len() * self.trials
    }

    /// Rough neighbor-visit count, assuming a few hundred steps per run.
    pub fn estimated_work(&self) -> f64 {
        let grid = self.grid();
        let per_trial: f64 = self
            .n_list
            .iter()
            .flat_map(|&n| grid.iter().map(move |&g| (n as f64, g)))
            .map(|(n, g)| {
                let mean_degree = match self.graph_model {
                    GraphModel::Gnp => g * (n - 1.0),
                    GraphModel::Ba => 2.0 * g,
                };
                n * (1.0 + mean_degree)
            })
            .sum();
        per_trial * self.trials as f64 * ASSUMED_STEPS.min(self.max_steps as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: usize,
    pub p: f64,
    pub trial: usize,
    pub seed: u64,
    /// Capped runs carry `max_steps` here and `converged = false`.
    pub convergence_time: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub n: usize,
    pub p: f64,
    pub mean_time: f64,
    pub std_time: f64,
    pub num_converged: usize,
    pub num_capped: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

/// Per-cell seed.
pub fn cell_seed(master_seed: u64, n: usize, param: f64, trial: usize) -> u64 {
    seed::mix(&[master_seed, n as u64, param.to_bits(), trial as u64])
}

/// Uniform initial positions on `[lo, hi)`.
pub fn uniform_line(n: usize, lo: f64, hi: f64, seed: u64) -> Result<Configuration> {
    if !(lo < hi) {
        return Err(HkError::InvalidParameter(format!(
            "empty range [{lo}, {hi})"
        )));
    }
    let mut rng = seed::rng(seed);
    let xs: Vec<f64> = (0..n).map(|_| rng.random_range(lo..hi)).collect();
    Configuration::line(&xs)
}

/// Least `t` with total movement from `x_t` to `x_{t+1}` below `threshold`
/// under social dynamics on a line, or `None` within `max_steps` steps.
///
/// Allocation-free after setup; equivalent to running
/// [`crate::dynamics::step_social`] and summing displacements.
pub fn social_convergence_time(
    x0: &[f64],
    graph: &SocialGraph,
    confidence: f64,
    threshold: f64,
    max_steps: usize,
) -> Option<usize> {
    let n = x0.len();
    let mut cur = x0.to_vec();
    let mut next = vec![0.0; n];
    for t in 0..max_steps {
        let mut moved = 0.0;
        for i in 0..n {
            let xi = cur[i];
            // same anchored summation as the generic step: offsets from the
            // lowest-index neighbor, the agent itself included in order
            let mut anchor = f64::NAN;
            let mut sum = 0.0;
            let mut k = 0usize;
            let mut visit = |xj: f64| {
                if k == 0 {
                    anchor = xj;
                }
                sum += xj - anchor;
                k += 1;
            };
            let mut self_done = false;
            for &j in graph.neighbors(i) {
                if !self_done && j > i {
                    visit(xi);
                    self_done = true;
                }
                let xj = cur[j];
                if (xi - xj).abs() <= confidence {
                    visit(xj);
                }
            }
            if !self_done {
                visit(xi);
            }
            let v = anchor + sum / k as f64;
            moved += (v - xi).abs();
            next[i] = v;
        }
        if moved < threshold {
            return Some(t);
        }
        std::mem::swap(&mut cur, &mut next);
    }
    None
}

fn run_cell(spec: &SweepSpec, n: usize, param: f64, trial: usize) -> Result<SweepRow> {
    let seed = cell_seed(spec.master_seed, n, param, trial);
    let graph = match spec.graph_model {
        GraphModel::Gnp => gnp(n, param, seed::mix(&[seed, 1]))?,
        GraphModel::Ba => barabasi_albert(n, param as usize, seed::mix(&[seed, 1]))?,
    };
    let (lo, hi) = spec.init.bounds(n);
    let x0 = uniform_line(n, lo, hi, seed::mix(&[seed, 2]))?;
    let time = social_convergence_time(
        x0.coords(),
        &graph,
        x0.confidence(),
        spec.threshold,
        spec.max_steps,
    );
    Ok(SweepRow {
        n,
        p: param,
        trial,
        seed,
        convergence_time: time.unwrap_or(spec.max_steps),
        converged: time.is_some(),
    })
}

/// Runs every cell of the sweep. Refuses when the work estimate exceeds
/// `budget` unless `force` is set.
pub fn run_sweep(spec: &SweepSpec, budget: f64, force: bool) -> Result<SweepResult> {
    spec.validate()?;
    let estimate = spec.estimated_work();
    if estimate > budget && !force {
        return Err(HkError::Budget { estimate, budget });
    }
    let grid = spec.grid();
    let cells: Vec<(usize, f64, usize)> = spec
        .n_list
        .iter()
        .flat_map(|&n| {
            grid.iter()
                .flat_map(move |&g| (0..spec.trials).map(move |trial| (n, g, trial)))
        })
        .collect();
    let mut rows = cells
        .into_par_iter()
        .map(|(n, g, trial)| run_cell(spec, n, g, trial))
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| {
        a.n.cmp(&b.n)
            .then(a.p.total_cmp(&b.p))
            .then(a.trial.cmp(&b.trial))
    });
    Ok(SweepResult { rows })
}

/// Mean and population standard deviation of convergence times per
/// `(n, p)`, capped runs counted at the cap.
pub fn aggregate(result: &SweepResult) -> Vec<AggregateRow> {
    let mut out: Vec<AggregateRow> = Vec::new();
    let mut start = 0;
    let rows = &result.rows;
    while start < rows.len() {
        let key = (rows[start].n, rows[start].p);
        let end = start
            + rows[start..]
                .iter()
                .take_while(|r| (r.n, r.p) == key)
                .count();
        let cell = &rows[start..end];
        let k = cell.len() as f64;
        let mean = cell.iter().map(|r| r.convergence_time as f64).sum::<f64>() / k;
        let var = cell
            .iter()
            .map(|r| (r.convergence_time as f64 - mean).powi(2))
            .sum::<f64>()
            / k;
        let converged = cell.iter().filter(|r| r.converged).count();
        out.push(AggregateRow {
            n: key.0,
            p: key.1,
            mean_time: mean,
            std_time: var.sqrt(),
            num_converged: converged,
            num_capped: cell.len() - converged,
        });
        start = end;
    }
    out
}

pub fn write_results_csv<W: Write>(out: W, result: &SweepResult) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RESULTS_HEADER.split(','))?;
    for r in &result.rows {
        w.write_record([
            r.n.to_string(),
            r.p.to_string(),
            r.trial.to_string(),
            r.seed.to_string(),
            r.convergence_time.to_string(),
            r.converged.to_string(),
        ])?;
    }
    w.flush().map_err(|e| HkError::io("<results>", e))?;
    Ok(())
}

pub fn write_aggregate_csv<W: Write>(out: W, rows: &[AggregateRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(AGGREGATE_HEADER.split(','))?;
    for r in rows {
        w.write_record([
            r.n.to_string(),
            r.p.to_string(),
            r.mean_time.to_string(),
            r.std_time.to_string(),
            r.num_converged.to_string(),
            r.num_capped.to_string(),
        ])?;
    }
    w.flush().map_err(|e| HkError::io("<aggregate>", e))?;
    Ok(())
}

/// `start, start + step, ...` up to `stop` inclusive, snapped to nine decimals.
pub fn linear_grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || stop < start {
        return Err(HkError::InvalidParameter(format!(
            "grid {start}:{stop}:{step} is empty"
        )));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..count)
        .map(|k| ((start + k as f64 * step) * 1e9).round() / 1e9)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{run, Model, RunOptions, StopReason, StopRule};
    use crate::graphs::GraphSchedule;

    #[test]
    fn row_count_and_p_zero() {
        let spec = SweepSpec::gnp(vec![5], vec![0.0, 1.0], 2, 1);
        let result = run_sweep(&spec, DEFAULT_BUDGET, false).unwrap();
        assert_eq!(result.rows.len(), 4);
        for r in result.rows.iter().filter(|r| r.p == 0.0) {
            assert_eq!(r.convergence_time, 0);
            assert!(r.converged);
        }
    }

    #[test]
    fn same_seed_same_csv() {
        let spec = SweepSpec::gnp(vec![8, 12], vec![0.1, 0.5, 1.0], 3, 42);
        let mut a = Vec::new();
        let mut b = Vec::new();
        write_results_csv(&mut a, &run_sweep(&spec, DEFAULT_BUDGET, false).unwrap()).unwrap();
        write_results_csv(&mut b, &run_sweep(&spec, DEFAULT_BUDGET, false).unwrap()).unwrap();
        assert_eq!(a, b);
        let text = String::from_utf8(a).unwrap();
        assert!(text.starts_with(RESULTS_HEADER));
        assert_eq!(text.lines().count(), 1 + 2 * 3 * 3);
    }

    #[test]
    fn fast_kernel_matches_generic_runner() {
        for seed in 0..20u64 {
            let n = 5 + (seed as usize % 20);
            let g = gnp(n, 0.3, seed).unwrap();
            let x0 = uniform_line(n, 1.0, n as f64, seed + 7).unwrap();
            let fast = social_convergence_time(x0.coords(), &g, 1.0, 1e-6, 5000);
            let traj = run(
                Model::Social,
                x0,
                Some(&GraphSchedule::fixed(g)),
                None,
                &StopRule::steps(5000).movement(1e-6),
                &RunOptions::default(),
            )
            .unwrap();
            let slow = match traj.stop {
                StopReason::Movement { t } => Some(t),
                _ => None,
            };
            assert_eq!(fast, slow, "seed {seed}");
        }
    }

    #[test]
    fn aggregate_examples() {
        let row = |trial, time| SweepRow {
            n: 3,
            p: 0.5,
            trial,
            seed: 0,
            convergence_time: time,
            converged: true,
        };
        let one = aggregate(&SweepResult {
            rows: vec![row(0, 7)],
        });
        assert_eq!((one[0].mean_time, one[0].std_time), (7.0, 0.0));
        let two = aggregate(&SweepResult {
            rows: vec![row(0, 10), row(1, 20)],
        });
        assert_eq!(two[0].mean_time, 15.0);
        assert_eq!(two[0].num_converged, 2);
    }

    #[test]
    fn capped_runs_are_flagged() {
        let mut spec = SweepSpec::gnp(vec![30], vec![0.3], 2, 3);
        spec.max_steps = 1;
        let result = run_sweep(&spec, DEFAULT_BUDGET, false).unwrap();
        let agg = aggregate(&result);
        assert_eq!(agg[0].num_capped + agg[0].num_converged, 2);
        for r in &result.rows {
            if !r.converged {
                assert_eq!(r.convergence_time, 1);
            }
        }
    }

    #[test]
    fn budget_guard() {
        let spec = SweepSpec::gnp(vec![10_000], vec![1.0], 1000, 0);
        assert!(matches!(
            run_sweep(&spec, DEFAULT_BUDGET, false),
            Err(HkError::Budget { .. })
        ));
    }

    #[test]
    fn validation() {
        assert!(SweepSpec::gnp(vec![5], vec![], 1, 0).validate().is_err());
        assert!(SweepSpec::gnp(vec![5], vec![1.2], 1, 0).validate().is_err());
        assert!(SweepSpec::gnp(vec![5], vec![0.5], 0, 0).validate().is_err());
        let mut ba = SweepSpec::gnp(vec![5], vec![], 1, 0);
        ba.graph_model = GraphModel::Ba;
        ba.m_list = vec![5];
        assert!(ba.validate().is_err());
        ba.m_list = vec![2];
        assert!(run_sweep(&ba, DEFAULT_BUDGET, false).is_ok());
    }

    #[test]
    fn spec_json_defaults() {
        let spec: SweepSpec =
            serde_json::from_str(r#"{"n_list": [50], "p_grid": [0.1, 0.2], "trials": 2}"#).unwrap();
        assert_eq!(spec.threshold, 1e-6);
        assert_eq!(spec.max_steps, 100_000);
        assert_eq!(spec.graph_model, GraphModel::Gnp);
        assert_eq!(spec.init.bounds(50), (1.0, 50.0));
    }

    #[test]
    fn grid_values_print_cleanly() {
        let g = linear_grid(0.02, 1.0, 0.02).unwrap();
        assert_eq!(g.len(), 50);
        assert_eq!(g[2].to_string(), "0.06");
        assert_eq!(*g.last().unwrap(), 1.0);
    }
}
