//! Bounded perturbations for the non-deterministic update rules.
//!
//! A noise value is addressed by `(t, i)` in per-agent mode and by
//! `(t, i, j)` in per-pair mode. Seeded random noise hashes those coordinates
//! instead of consuming a shared stream, so values do not depend on the order
//! in which agents are updated.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::config::Configuration;
use crate::error::{HkError, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseMode {
    PerAgent,
    PerPair,
}

impl FromStr for NoiseMode {
    type Err = HkError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per-agent" => Ok(NoiseMode::PerAgent),
            "per-pair" => Ok(NoiseMode::PerPair),
            other => Err(HkError::Parse(format!("unknown noise mode '{other}'"))),
        }
    }
}

/// A noise value request. `pair` is `Some(j)` in per-pair mode.
#[derive(Debug, Clone, Copy)]
pub struct NoiseQuery<'a> {
    pub t: usize,
    pub agent: usize,
    pub pair: Option<usize>,
    pub state: &'a Configuration,
}

/// Noise chosen with full knowledge of the current configuration.
pub trait Adversary: Send + Sync {
    fn choose(&self, query: &NoiseQuery<'_>) -> f64;
}

impl<F> Adversary for F
where
    F: Fn(&NoiseQuery<'_>) -> f64 + Send + Sync,
{
    fn choose(&self, query: &NoiseQuery<'_>) -> f64 {
        self(query)
    }
}

/// Key of a tabulated noise value: `(t, i, j)` with `j` absent per agent.
pub type NoiseKey = (usize, usize, Option<usize>);

#[derive(Clone)]
pub enum NoiseKind {
    Zero,
    /// Uniform on `[-eps, eps]`, keyed on `(seed, t, i[, j])`.
    Uniform {
        seed: u64,
    },
    /// Missing entries are zero.
    Table(HashMap<NoiseKey, f64>),
    Adversarial(Arc<dyn Adversary>),
}

impl fmt::Debug for NoiseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NoiseKind::Zero => f.write_str("Zero"),
            NoiseKind::Uniform { seed } => f.debug_struct("Uniform").field("seed", seed).finish(),
            NoiseKind::Table(t) => f.debug_tuple("Table").field(&t.len()).finish(),
            NoiseKind::Adversarial(_) => f.write_str("Adversarial"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct NoiseSource {
    bound: f64,
    mode: NoiseMode,
    kind: NoiseKind,
}

impl NoiseSource {
    pub fn new(bound: f64, mode: NoiseMode, kind: NoiseKind) -> Result<Self> {
        if !(bound.is_finite() && bound >= 0.0) {
            return Err(HkError::InvalidParameter(format!(
                "noise bound must be finite and non-negative, got {bound}"
            )));
        }
        if let NoiseKind::Table(table) = &kind {
            for (&(t, i, j), &v) in table {
                if !(v.abs() <= bound) {
                    return Err(HkError::NoiseOutOfRange {
                        value: v,
                        bound,
                        t,
                        agent: i,
                    });
                }
                if j.is_some() != (mode == NoiseMode::PerPair) {
                    return Err(HkError::Inconsistent(format!(
                        "noise entry for t={t} agent {} does not match mode {mode:?}",
                        i + 1
                    )));
                }
            }
        }
        Ok(NoiseSource { bound, mode, kind })
    }

    pub fn zero(mode: NoiseMode) -> Self {
        NoiseSource {
            bound: 0.0,
            mode,
            kind: NoiseKind::Zero,
        }
    }

    pub fn uniform(bound: f64, mode: NoiseMode, seed: u64) -> Result<Self> {
        Self::new(bound, mode, NoiseKind::Uniform { seed })
    }

    pub fn adversarial(
        bound: f64,
        mode: NoiseMode,
        adversary: impl Adversary + 'static,
    ) -> Result<Self> {
        Self::new(bound, mode, NoiseKind::Adversarial(Arc::new(adversary)))
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn mode(&self) -> NoiseMode {
        self.mode
    }

    pub fn kind(&self) -> &NoiseKind {
        &self.kind
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, NoiseKind::Zero)
    }

    /// Value for the given query, validated against the bound.
    pub fn value(&self, query: &NoiseQuery<'_>) -> Result<f64> {
        let v = match &self.kind {
            NoiseKind::Zero => return Ok(0.0),
            NoiseKind::Uniform { seed } => {
                let words = match query.pair {
                    None => [*seed, query.t as u64, query.agent as u64, u64::MAX],
                    Some(j) => [*seed, query.t as u64, query.agent as u64, j as u64],
                };
                let u = seed::unit_closed(seed::mix(&words));
                // 2u - 1 stays inside [-1, 1] for u in [0, 1]
                return Ok(self.bound * (2.0 * u - 1.0));
            }
            NoiseKind::Table(table) => {
                return Ok(table
                    .get(&(query.t, query.agent, query.pair))
                    .copied()
                    .unwrap_or(0.0))
            }
            NoiseKind::Adversarial(adv) => adv.choose(query),
        };
        if v.abs() <= self.bound {
            Ok(v)
        } else {
            Err(HkError::NoiseOutOfRange {
                value: v,
                bound: self.bound,
                t: query.t,
                agent: query.agent,
            })
        }
    }

    /// Noise file: `{"eps": e, "mode": "per-agent"|"per-pair", "values": {"t,i": v}}`
    /// or `"t,i,j"` keys per pair; `t` counts from 0, agents from 1.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HkError::io(path, e))?;
        let file: NoiseFile = serde_json::from_str(&text)?;
        file.try_into()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NoiseFile {
    pub eps: f64,
    pub mode: NoiseMode,
    #[serde(default)]
    pub values: HashMap<String, f64>,
}

fn parse_key(key: &str, mode: NoiseMode) -> Result<NoiseKey> {
    let parts = key
        .split(',')
        .map(|p| {
            p.trim()
                .parse::<usize>()
                .map_err(|_| HkError::Parse(format!("bad noise key '{key}'")))
        })
        .collect::<Result<Vec<_>>>()?;
    let agent = |a: usize| {
        a.checked_sub(1)
            .ok_or_else(|| HkError::Parse(format!("noise key '{key}': agents are 1-based")))
    };
    match (mode, parts.as_slice()) {
        (NoiseMode::PerAgent, &[t, i]) => Ok((t, agent(i)?, None)),
        (NoiseMode::PerPair, &[t, i, j]) => Ok((t, agent(i)?, Some(agent(j)?))),
        _ => Err(HkError::Parse(format!(
            "noise key '{key}' does not match mode {mode:?}"
        ))),
    }
}

impl TryFrom<NoiseFile> for NoiseSource {
    type Error = HkError;

    fn try_from(f: NoiseFile) -> Result<Self> {
        let table = f
            .values
            .iter()
            .map(|(k, &v)| Ok((parse_key(k, f.mode)?, v)))
            .collect::<Result<HashMap<_, _>>>()?;
        NoiseSource::new(f.eps, f.mode, NoiseKind::Table(table))
    }
}
