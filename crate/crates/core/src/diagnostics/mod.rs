//! Step accounting, convergence and cluster detection, the leftmost-agent
//! partition and runtime checks of the non-deterministic convergence lemmas.

mod nd;
mod reports;

pub use nd::{
    check_nd_lemmas, clustering_step_envelope, nd_partition, partition_within, CaseTag, LemmaCheck,
    LemmaReport, NdPartition, Violation, LEMMA_TOLERANCE,
};
pub use reports::{attach_reports, write_report_csv, ReportOptions, StepReport, REPORT_HEADER};

use serde::{Deserialize, Serialize};

use crate::config::{communication_graph_unchecked, components, Configuration};
use crate::dynamics::Trajectory;
use crate::error::{HkError, Result};
use crate::graphs::SocialGraph;

/// Default movement threshold for convergence detection.
pub const DEFAULT_THRESHOLD: f64 = 1e-6;

/// Whether some interacting pair `i != j` is at distance at least `eps`.
pub fn is_nontrivial(
    config: &Configuration,
    graph: Option<&SocialGraph>,
    eps: f64,
) -> Result<bool> {
    if !(eps > 0.0) {
        return Err(HkError::InvalidParameter(format!(
            "eps must be positive, got {eps}"
        )));
    }
    config.check_graph(graph)?;
    Ok(nontrivial_unchecked(config, graph, eps))
}

pub(super) fn nontrivial_unchecked(
    config: &Configuration,
    graph: Option<&SocialGraph>,
    eps: f64,
) -> bool {
    let interacting = |i: usize, j: usize| {
        let d = config.dist(i, j);
        d <= config.confidence() && d >= eps
    };
    match graph {
        Some(g) => g.edges().any(|(i, j)| interacting(i, j)),
        None => (0..config.n()).any(|i| (i + 1..config.n()).any(|j| interacting(i, j))),
    }
}

/// Number of configurations along the trajectory that are `eps`-non-trivial.
pub fn count_nontrivial(traj: &Trajectory, eps: f64) -> Result<usize> {
    if !(eps > 0.0) {
        return Err(HkError::InvalidParameter(format!(
            "eps must be positive, got {eps}"
        )));
    }
    Ok((0..traj.configs.len())
        .filter(|&t| nontrivial_unchecked(&traj.configs[t], traj.graph_at(t), eps))
        .count())
}

/// Least `t` whose step `x_t -> x_{t+1}` moves all agents by less than
/// `threshold` in total.
pub fn detect_convergence(traj: &Trajectory, threshold: f64) -> Option<usize> {
    (0..traj.steps()).find(|&t| traj.movement(t) < threshold)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterReport {
    /// Groups of mutually reachable agents, each sorted, ordered by smallest member.
    pub groups: Vec<Vec<usize>>,
    /// Spread of each group (interval length in one dimension, diameter otherwise).
    pub extents: Vec<f64>,
    pub max_extent: f64,
    pub all_within: bool,
}

/// Splits agents into separated subsystems and measures their spread.
///
/// In one dimension a new group starts wherever consecutive sorted positions
/// are more than the confidence bound apart.
pub fn clusters(config: &Configuration, rho: f64) -> ClusterReport {
    let groups = if config.dim() == 1 {
        separated_groups_1d(config)
    } else {
        components(&communication_graph_unchecked(config, None))
    };
    let extents: Vec<f64> = groups.iter().map(|g| spread(config, g)).collect();
    let max_extent = extents.iter().copied().fold(0.0, f64::max);
    ClusterReport {
        all_within: max_extent <= rho,
        groups,
        extents,
        max_extent,
    }
}

pub(crate) fn separated_groups_1d(config: &Configuration) -> Vec<Vec<usize>> {
    let x = config.coords();
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]).then(a.cmp(&b)));
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut prev = f64::NEG_INFINITY;
    for &i in &order {
        if groups.is_empty() || x[i] - prev > config.confidence() {
            groups.push(Vec::new());
        }
        groups.last_mut().unwrap().push(i);
        prev = x[i];
    }
    for g in &mut groups {
        g.sort_unstable();
    }
    groups.sort_by_key(|g| g[0]);
    groups
}

fn spread(config: &Configuration, members: &[usize]) -> f64 {
    if config.dim() == 1 {
        let (lo, hi) = members
            .iter()
            .map(|&i| config.coords()[i])
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| {
                (lo.min(x), hi.max(x))
            });
        hi - lo
    } else {
        members
            .iter()
            .flat_map(|&i| members.iter().map(move |&j| (i, j)))
            .map(|(i, j)| config.dist(i, j))
            .fold(0.0, f64::max)
    }
}
