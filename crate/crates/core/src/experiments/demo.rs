//! Small hand-made instances that exhibit qualitative behaviors of the
//! dynamics, each with a built-in check that the behavior actually occurs.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::config::Configuration;
use crate::diagnostics::DEFAULT_THRESHOLD;
use crate::dynamics::{
    run, step_classical, step_nd, step_social, Model, NoiseKind, NoiseMode, NoiseSource,
    RunOptions, StopReason, StopRule, Trajectory,
};
use crate::error::{HkError, Result};
use crate::graphs::{named_graph, GraphKind, GraphSchedule, SocialGraph};

pub const DEFAULT_DELTAS: [f64; 3] = [1e-1, 1e-2, 1e-3];
pub const DEFAULT_ND_EPS: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub enum DemoKind {
    /// Agents on a path approach consensus without ever reaching it.
    NoFreeze { steps: usize },
    /// Convergence time grows as an initial gap shrinks.
    InitDependence { deltas: Vec<f64> },
    /// Social dynamics need not preserve the order of agents.
    NoOrder { max_agents: usize },
    /// Noisy updates can swap two agents that classical dynamics would merge.
    NonDeterministic { eps: f64 },
}

impl DemoKind {
    pub fn name(&self) -> &'static str {
        match self {
            DemoKind::NoFreeze { .. } => "nofrz",
            DemoKind::InitDependence { .. } => "initdep",
            DemoKind::NoOrder { .. } => "noorder",
            DemoKind::NonDeterministic { .. } => "nondet",
        }
    }
}

impl fmt::Display for DemoKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DemoKind {
    type Err = HkError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nofrz" => Ok(DemoKind::NoFreeze { steps: 50 }),
            "initdep" => Ok(DemoKind::InitDependence {
                deltas: DEFAULT_DELTAS.to_vec(),
            }),
            "noorder" => Ok(DemoKind::NoOrder { max_agents: 5 }),
            "nondet" => Ok(DemoKind::NonDeterministic {
                eps: DEFAULT_ND_EPS,
            }),
            other => Err(HkError::Parse(format!(
                "unknown demo '{other}' (expected nofrz, initdep, noorder or nondet)"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct DemoOutcome {
    pub kind: DemoKind,
    /// A representative run of the instance.
    pub trajectory: Trajectory,
    pub summary: Vec<String>,
    pub verified: bool,
}

pub fn run_demo(kind: &DemoKind) -> Result<DemoOutcome> {
    match kind {
        DemoKind::NoFreeze { steps } => {
            let d = no_freeze(*steps)?;
            let mut summary = vec![
                "path 1-2-3 at (-0.5, 0, 0.5): the ends move halfway to the centre each step"
                    .to_string(),
            ];
            for (t, m) in d.movements.iter().enumerate().take(8) {
                summary.push(format!("t={t} total movement {m:e}"));
            }
            summary.push(format!(
                "movement halves every step and stays positive for all {} steps; below {DEFAULT_THRESHOLD:e} from t={:?}",
                d.movements.len(),
                d.convergence_time
            ));
            Ok(DemoOutcome {
                kind: kind.clone(),
                trajectory: d.trajectory,
                summary,
                verified: d.verified,
            })
        }
        DemoKind::InitDependence { deltas } => {
            let rows = init_dependence(deltas)?;
            let verified = init_dependence_verified(&rows);
            let mut summary = vec![
                "path 1-2-3 at (0, 1, 2) plus agent 4 at 2 - delta, linked only to agent 1"
                    .to_string(),
            ];
            for r in &rows {
                summary.push(format!(
                    "delta={:e} first contact t={} convergence time {}",
                    r.delta, r.first_contact, r.convergence_time
                ));
            }
            let last = deltas.last().copied().unwrap_or(DEFAULT_DELTAS[2]);
            Ok(DemoOutcome {
                kind: kind.clone(),
                trajectory: init_dependence_run(last)?,
                summary,
                verified,
            })
        }
        DemoKind::NoOrder { max_agents } => {
            let d = no_order(*max_agents)?;
            let (i, j) = d.swapped;
            let summary = vec![
                format!(
                    "positions {:?} with edges {:?} (1-based)",
                    d.before.coords(),
                    one_based(&d.graph)
                ),
                format!("after one step {:?}", d.after.coords()),
                format!(
                    "agents {} and {} change order: {} < {} became {} > {}",
                    i + 1,
                    j + 1,
                    d.before.coords()[i],
                    d.before.coords()[j],
                    d.after.coords()[i],
                    d.after.coords()[j]
                ),
                format!(
                    "classical step keeps the order: {:?}",
                    d.classical_after.coords()
                ),
            ];
            let trajectory = run(
                Model::Social,
                d.before.clone(),
                Some(&GraphSchedule::fixed(d.graph.clone())),
                None,
                &StopRule::steps(1),
                &RunOptions::default(),
            )?;
            Ok(DemoOutcome {
                kind: kind.clone(),
                trajectory,
                summary,
                verified: d.verified,
            })
        }
        DemoKind::NonDeterministic { eps } => {
            let d = nondeterministic(*eps)?;
            let summary = vec![
                format!(
                    "two agents at {:?}, both with noise +{eps}",
                    d.before.coords()
                ),
                format!("classical step: {:?}", d.classical_after.coords()),
                format!("noisy step: {:?} (agents swap sides)", d.after.coords()),
            ];
            Ok(DemoOutcome {
                kind: kind.clone(),
                trajectory: d.trajectory,
                summary,
                verified: d.verified,
            })
        }
    }
}

fn one_based(g: &SocialGraph) -> Vec<(usize, usize)> {
    g.edges().map(|(i, j)| (i + 1, j + 1)).collect()
}

fn stop_time(traj: &Trajectory) -> Option<usize> {
    match traj.stop {
        StopReason::Movement { t } => Some(t),
        _ => None,
    }
}

#[derive(Debug, Clone)]
pub struct NoFreezeDemo {
    pub trajectory: Trajectory,
    pub movements: Vec<f64>,
    pub convergence_time: Option<usize>,
    pub verified: bool,
}

pub fn no_freeze(steps: usize) -> Result<NoFreezeDemo> {
    let x0 = Configuration::line(&[-0.5, 0.0, 0.5])?;
    let path = GraphSchedule::fixed(named_graph(GraphKind::Path, 3)?);
    let trajectory = run(
        Model::Social,
        x0,
        Some(&path),
        None,
        &StopRule::steps(steps),
        &RunOptions::default(),
    )?;
    let movements: Vec<f64> = (0..trajectory.steps())
        .map(|t| trajectory.movement(t))
        .collect();
    let convergence_time = movements.iter().position(|&m| m < DEFAULT_THRESHOLD);
    let halving = movements.windows(2).all(|w| w[1] == w[0] / 2.0);
    let never_agrees = trajectory
        .configs
        .iter()
        .all(|c| c.coords()[0] != c.coords()[1]);
    Ok(NoFreezeDemo {
        verified: halving && never_agrees && movements.iter().all(|&m| m > 0.0),
        trajectory,
        movements,
        convergence_time,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitDepRow {
    pub delta: f64,
    /// First `t` at which agents 1 and 4 are within range.
    pub first_contact: usize,
    pub convergence_time: usize,
}

fn init_dependence_instance(delta: f64) -> Result<(Configuration, SocialGraph)> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(HkError::InvalidParameter(format!(
            "delta must lie in (0, 1), got {delta}"
        )));
    }
    let x0 = Configuration::line(&[0.0, 1.0, 2.0, 2.0 - delta])?;
    let g = SocialGraph::from_edges(4, [(0, 1), (1, 2), (0, 3)])?;
    Ok((x0, g))
}

fn init_dependence_run(delta: f64) -> Result<Trajectory> {
    let (x0, g) = init_dependence_instance(delta)?;
    run(
        Model::Social,
        x0,
        Some(&GraphSchedule::fixed(g)),
        None,
        &StopRule::steps(100_000).movement(DEFAULT_THRESHOLD),
        &RunOptions::default(),
    )
}

pub fn init_dependence(deltas: &[f64]) -> Result<Vec<InitDepRow>> {
    deltas
        .iter()
        .map(|&delta| {
            let traj = init_dependence_run(delta)?;
            let convergence_time = stop_time(&traj).ok_or_else(|| {
                HkError::SearchFailed(format!("no convergence for delta={delta}"))
            })?;
            let first_contact = traj
                .configs
                .iter()
                .position(|c| c.in_range(0, 3))
                .ok_or_else(|| {
                    HkError::SearchFailed(format!("agents never met for delta={delta}"))
                })?;
            Ok(InitDepRow {
                delta,
                first_contact,
                convergence_time,
            })
        })
        .collect()
}

/// Convergence time strictly increases as delta decreases.
pub fn init_dependence_verified(rows: &[InitDepRow]) -> bool {
    let mut sorted = rows.to_vec();
    sorted.sort_by(|a, b| b.delta.total_cmp(&a.delta));
    sorted
        .windows(2)
        .all(|w| w[1].convergence_time > w[0].convergence_time)
}

#[derive(Debug, Clone)]
pub struct NoOrderDemo {
    pub before: Configuration,
    pub graph: SocialGraph,
    pub after: Configuration,
    pub classical_after: Configuration,
    /// `(i, j)` with `x_i < x_j` before and `x_i > x_j` after.
    pub swapped: (usize, usize),
    pub verified: bool,
}

fn find_swap(before: &Configuration, after: &Configuration) -> Option<(usize, usize)> {
    let (x, y) = (before.coords(), after.coords());
    (0..x.len())
        .flat_map(|i| (0..x.len()).map(move |j| (i, j)))
        .find(|&(i, j)| x[i] < x[j] && y[i] > y[j])
}

/// Exhaustive search over increasing positions on a half-unit grid in
/// `[0, 2]` and all social graphs, smallest population first.
pub fn no_order(max_agents: usize) -> Result<NoOrderDemo> {
    let grid = [0.0, 0.5, 1.0, 1.5, 2.0];
    for n in 2..=max_agents.min(grid.len()) {
        let pairs: Vec<(usize, usize)> = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .collect();
        for picks in combinations(grid.len(), n) {
            let xs: Vec<f64> = picks.iter().map(|&k| grid[k]).collect();
            let before = Configuration::line(&xs)?;
            for mask in 0u32..(1 << pairs.len()) {
                let edges = pairs
                    .iter()
                    .enumerate()
                    .filter(|(b, _)| mask >> b & 1 == 1)
                    .map(|(_, &e)| e);
                let graph = SocialGraph::from_edges(n, edges)?;
                let after = step_social(&before, &graph)?;
                if let Some(swapped) = find_swap(&before, &after) {
                    let classical_after = step_classical(&before);
                    let verified = find_swap(&before, &classical_after).is_none();
                    return Ok(NoOrderDemo {
                        before,
                        graph,
                        after,
                        classical_after,
                        swapped,
                        verified,
                    });
                }
            }
        }
    }
    Err(HkError::SearchFailed(format!(
        "no order-breaking instance with at most {max_agents} agents"
    )))
}

fn combinations(k: usize, n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(n);
    fn rec(start: usize, k: usize, n: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == n {
            out.push(cur.clone());
            return;
        }
        for v in start..k {
            cur.push(v);
            rec(v + 1, k, n, cur, out);
            cur.pop();
        }
    }
    rec(0, k, n, &mut cur, &mut out);
    out
}

#[derive(Debug, Clone)]
pub struct NonDetDemo {
    pub before: Configuration,
    pub after: Configuration,
    pub classical_after: Configuration,
    pub trajectory: Trajectory,
    pub verified: bool,
}

pub fn nondeterministic(eps: f64) -> Result<NonDetDemo> {
    if !(eps > 0.0) {
        return Err(HkError::InvalidParameter(format!(
            "eps must be positive, got {eps}"
        )));
    }
    let before = Configuration::line(&[0.0, 0.9])?;
    let table: HashMap<_, _> = [((0, 0, None), eps), ((0, 1, None), eps)]
        .into_iter()
        .collect();
    let noise = NoiseSource::new(eps, NoiseMode::PerAgent, NoiseKind::Table(table))?;
    let after = step_nd(&before, &noise, 0)?;
    let classical_after = step_classical(&before);
    let trajectory = run(
        Model::Nd,
        before.clone(),
        None,
        Some(&noise),
        &StopRule::steps(1),
        &RunOptions::default(),
    )?;
    let verified = after.coords()[0] > after.coords()[1]
        && classical_after.coords()[0] == classical_after.coords()[1];
    Ok(NonDetDemo {
        before,
        after,
        classical_after,
        trajectory,
        verified,
    })
}
