//! The four synchronous update rules and the trajectory runner.
//!
//! Every rule reads only the previous configuration. The non-deterministic
//! rules are evaluated as `a(i) + e * b(i)`, with `a(i)` the neighborhood
//! mean (computed exactly as in the classical rule) and `b(i)` the mean
//! displacement. Zero noise therefore reproduces the classical step bit for
//! bit.

mod noise;
mod run;

pub use noise::{Adversary, NoiseFile, NoiseKey, NoiseKind, NoiseMode, NoiseQuery, NoiseSource};
pub use run::{run, GraphTrace, RunOptions, StopReason, StopRule, Trajectory};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::config::{visit_neighbors, Configuration};
use crate::error::{HkError, Result};
use crate::graphs::SocialGraph;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Model {
    Classical,
    Social,
    Nd,
    NdPairwise,
}

impl Model {
    pub fn is_nondeterministic(self) -> bool {
        matches!(self, Model::Nd | Model::NdPairwise)
    }

    pub fn noise_mode(self) -> Option<NoiseMode> {
        match self {
            Model::Nd => Some(NoiseMode::PerAgent),
            Model::NdPairwise => Some(NoiseMode::PerPair),
            _ => None,
        }
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Model::Classical => "classical",
            Model::Social => "social",
            Model::Nd => "nd",
            Model::NdPairwise => "nd-pairwise",
        })
    }
}

impl FromStr for Model {
    type Err = HkError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "classical" => Ok(Model::Classical),
            "social" => Ok(Model::Social),
            "nd" => Ok(Model::Nd),
            "nd-pairwise" => Ok(Model::NdPairwise),
            other => Err(HkError::Parse(format!("unknown model '{other}'"))),
        }
    }
}

/// Writes the mean of agent `i`'s neighborhood into `out` and returns the
/// neighborhood size.
///
/// The mean is taken as `x(j0) + mean_j (x(j) - x(j0))` with `j0` the
/// lowest-index neighbor: a consensus is then an exact fixed point, and
/// agents with the same neighborhood land on bitwise the same point.
#[inline]
fn neighborhood_mean(
    config: &Configuration,
    graph: Option<&SocialGraph>,
    i: usize,
    out: &mut [f64],
) -> usize {
    out.fill(0.0);
    let mut k = 0usize;
    let mut anchor = None;
    visit_neighbors(config, graph, i, |j| {
        k += 1;
        let base = *anchor.get_or_insert(j);
        for ((o, c), b) in out.iter_mut().zip(config.point(j)).zip(config.point(base)) {
            *o += c - b;
        }
    });
    let kf = k as f64;
    let base = config.point(anchor.expect("an agent always sees itself"));
    for (o, b) in out.iter_mut().zip(base) {
        *o = b + *o / kf;
    }
    k
}

fn averaging_step(config: &Configuration, graph: Option<&SocialGraph>) -> Configuration {
    let d = config.dim();
    let mut coords = vec![0.0; config.coords().len()];
    for (i, out) in coords.chunks_exact_mut(d).enumerate() {
        neighborhood_mean(config, graph, i, out);
    }
    config.with_coords(coords)
}

/// Every agent moves to the mean of all agents within the confidence bound.
pub fn step_classical(config: &Configuration) -> Configuration {
    averaging_step(config, None)
}

/// Every agent moves to the mean of its in-range social neighbors.
pub fn step_social(config: &Configuration, graph: &SocialGraph) -> Result<Configuration> {
    config.check_graph(Some(graph))?;
    Ok(averaging_step(config, Some(graph)))
}

fn require_line(config: &Configuration) -> Result<()> {
    if config.dim() == 1 {
        Ok(())
    } else {
        Err(HkError::DimensionNotOne(config.dim()))
    }
}

fn require_mode(noise: &NoiseSource, mode: NoiseMode) -> Result<()> {
    if noise.mode() == mode {
        Ok(())
    } else {
        Err(HkError::Inconsistent(format!(
            "rule needs {mode:?} noise, got {:?}",
            noise.mode()
        )))
    }
}

/// `x'(i) = x(i) + (1 + e(t, i)) * mean_{j in N(i)} (x(j) - x(i))`.
///
/// Evaluated as the classical mean plus `e` times the mean displacement, so
/// zero noise reproduces [`step_classical`] bit for bit.
pub fn step_nd(config: &Configuration, noise: &NoiseSource, t: usize) -> Result<Configuration> {
    require_line(config)?;
    require_mode(noise, NoiseMode::PerAgent)?;
    let x = config.coords();
    let mut next = Vec::with_capacity(x.len());
    let mut mean = [0.0];
    for i in 0..x.len() {
        let k = neighborhood_mean(config, None, i, &mut mean);
        let e = noise.value(&NoiseQuery {
            t,
            agent: i,
            pair: None,
            state: config,
        })?;
        if e == 0.0 {
            next.push(mean[0]);
        } else {
            let mut disp = 0.0;
            visit_neighbors(config, None, i, |j| disp += x[j] - x[i]);
            next.push(mean[0] + e * (disp / k as f64));
        }
    }
    Ok(config.with_coords(next))
}

/// `x'(i) = x(i) + (1/|N(i)|) * sum_{j in N(i)} (1 + e(t, i, j)) * (x(j) - x(i))`.
pub fn step_nd_pairwise(
    config: &Configuration,
    noise: &NoiseSource,
    t: usize,
) -> Result<Configuration> {
    require_line(config)?;
    require_mode(noise, NoiseMode::PerPair)?;
    let x = config.coords();
    let mut next = Vec::with_capacity(x.len());
    let mut mean = [0.0];
    let mut hood = Vec::new();
    for i in 0..x.len() {
        let k = neighborhood_mean(config, None, i, &mut mean);
        hood.clear();
        visit_neighbors(config, None, i, |j| hood.push(j));
        let mut extra = 0.0;
        let mut any = false;
        for &j in hood.iter().filter(|&&j| j != i) {
            let e = noise.value(&NoiseQuery {
                t,
                agent: i,
                pair: Some(j),
                state: config,
            })?;
            if e != 0.0 {
                any = true;
                extra += e * (x[j] - x[i]);
            }
        }
        next.push(if any {
            mean[0] + extra / k as f64
        } else {
            mean[0]
        });
    }
    Ok(config.with_coords(next))
}
