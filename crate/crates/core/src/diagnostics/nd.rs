//! The leftmost-agent partition and runtime checks of the convergence
//! lemmas for non-deterministic dynamics on the line.
//!
//! Writing `l` for the leftmost agent and `N(i)` for the agents within the
//! confidence bound of `i`:
//!
//! * `L = { i in N(l) : N(i) = N(l) }`, `S = N(l) \ L`,
//! * `T` = agents outside `N(l)`, and `M = S ∪ T`.
//!
//! Checks evaluated on each transition `t -> t + 1` (tolerance
//! [`LEMMA_TOLERANCE`]):
//!
//! * `min-max`: for `eps < 1/(n-1)` the minimum never decreases and the
//!   maximum never increases.
//! * `m-drift`: every agent of `M(t)` lands at or beyond
//!   `x_t(l) + 1/n - eps` (`- 2 eps` under per-pair noise).
//! * `contraction`: inside every separated subsystem whose `S` is empty, the
//!   spread shrinks by at least a factor `2 eps` (for `eps < 1/(n-1)`).
//! * `trichotomy`: `S(t+1)` is empty, or `|L(t+1)| < |L(t)|`, or `M(t)`
//!   meets `N_{t+1}(l)`.
//! * `s3-drift`: for `eps < 1/(4 n^2)`, whenever `M(t)` meets `N_{t+1}(l)`
//!   every agent at `t + 2` lies at or beyond `x_t(l) + 1/(4 n^2)`.
//! * `s2-run`: no more than `n` consecutive steps are tagged S2.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::separated_groups_1d;
use crate::config::Configuration;
use crate::dynamics::{Model, Trajectory};
use crate::error::{HkError, Result};

pub const LEMMA_TOLERANCE: f64 = 1e-12;

/// Leftmost-agent partition of a (sub)system. Indices are 0-based.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NdPartition {
    pub leftmost: usize,
    pub rightmost: usize,
    pub l: Vec<usize>,
    pub s: Vec<usize>,
    pub t: Vec<usize>,
    pub m: Vec<usize>,
}

impl NdPartition {
    /// `N(leftmost)`, i.e. `L ∪ S`, sorted.
    pub fn leftmost_neighborhood(&self) -> Vec<usize> {
        let mut out: Vec<usize> = self.l.iter().chain(&self.s).copied().collect();
        out.sort_unstable();
        out
    }
}

fn line_neighbors(x: &[f64], r: f64, i: usize, members: &[usize]) -> Vec<usize> {
    members
        .iter()
        .copied()
        .filter(|&j| (x[j] - x[i]).abs() <= r)
        .collect()
}

/// Partition of the agents in `members` (sorted), treating them as a system
/// of their own. Ties for leftmost and rightmost go to the lowest index.
pub fn partition_within(config: &Configuration, members: &[usize]) -> Result<NdPartition> {
    if config.dim() != 1 {
        return Err(HkError::DimensionNotOne(config.dim()));
    }
    if members.is_empty() {
        return Err(HkError::InvalidParameter(
            "partition of an empty set".into(),
        ));
    }
    let x = config.coords();
    let r = config.confidence();
    let pick = |better: fn(f64, f64) -> bool| {
        members.iter().copied().fold(
            members[0],
            |best, i| if better(x[i], x[best]) { i } else { best },
        )
    };
    let leftmost = pick(|a, b| a < b);
    let rightmost = pick(|a, b| a > b);
    let hood = line_neighbors(x, r, leftmost, members);
    let (mut l, mut s) = (Vec::new(), Vec::new());
    for &i in &hood {
        if line_neighbors(x, r, i, members) == hood {
            l.push(i);
        } else {
            s.push(i);
        }
    }
    let t: Vec<usize> = members
        .iter()
        .copied()
        .filter(|i| hood.binary_search(i).is_err())
        .collect();
    let mut m: Vec<usize> = s.iter().chain(&t).copied().collect();
    m.sort_unstable();
    Ok(NdPartition {
        leftmost,
        rightmost,
        l,
        s,
        t,
        m,
    })
}

pub fn nd_partition(config: &Configuration) -> Result<NdPartition> {
    let all: Vec<usize> = (0..config.n()).collect();
    partition_within(config, &all)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CaseTag {
    S1,
    S2,
    S3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LemmaCheck {
    MinMax,
    MDrift,
    Contraction,
    Trichotomy,
    S3Drift,
    S2Run,
}

impl LemmaCheck {
    pub const ALL: [LemmaCheck; 6] = [
        LemmaCheck::MinMax,
        LemmaCheck::MDrift,
        LemmaCheck::Contraction,
        LemmaCheck::Trichotomy,
        LemmaCheck::S3Drift,
        LemmaCheck::S2Run,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LemmaCheck::MinMax => "min-max",
            LemmaCheck::MDrift => "m-drift",
            LemmaCheck::Contraction => "contraction",
            LemmaCheck::Trichotomy => "trichotomy",
            LemmaCheck::S3Drift => "s3-drift",
            LemmaCheck::S2Run => "s2-run",
        }
    }
}

impl fmt::Display for LemmaCheck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub t: usize,
    pub check: LemmaCheck,
    /// Signed slack; negative means the inequality failed.
    pub margin: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LemmaReport {
    /// Checks that were evaluated, with the number of instances of each.
    pub evaluated: BTreeMap<LemmaCheck, usize>,
    /// Checks skipped because `eps` is outside their precondition.
    pub skipped: Vec<(LemmaCheck, String)>,
    pub violations: Vec<Violation>,
    /// One tag per transition, chosen in the order S1, S3, S2.
    pub case_tags: Vec<CaseTag>,
    pub max_s2_run: usize,
}

impl LemmaReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn case_histogram(&self) -> BTreeMap<CaseTag, usize> {
        let mut h = BTreeMap::from([(CaseTag::S1, 0), (CaseTag::S2, 0), (CaseTag::S3, 0)]);
        for tag in &self.case_tags {
            *h.entry(*tag).or_default() += 1;
        }
        h
    }

    /// Folds another report in, shifting nothing (used to pool many runs).
    pub fn merge(&mut self, other: LemmaReport) {
        for (k, v) in other.evaluated {
            *self.evaluated.entry(k).or_default() += v;
        }
        for s in other.skipped {
            if !self.skipped.iter().any(|(c, _)| *c == s.0) {
                self.skipped.push(s);
            }
        }
        self.violations.extend(other.violations);
        self.case_tags.extend(other.case_tags);
        self.max_s2_run = self.max_s2_run.max(other.max_s2_run);
    }
}

struct Checker {
    report: LemmaReport,
}

impl Checker {
    fn record(&mut self, t: usize, check: LemmaCheck, margin: f64) {
        *self.report.evaluated.entry(check).or_default() += 1;
        if margin < -LEMMA_TOLERANCE {
            self.report.violations.push(Violation { t, check, margin });
        }
    }

    fn skip(&mut self, check: LemmaCheck, reason: String) {
        if !self.report.skipped.iter().any(|(c, _)| *c == check) {
            self.report.skipped.push((check, reason));
        }
    }
}

fn spread_of(x: &[f64], members: &[usize]) -> f64 {
    let (lo, hi) = members
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
            (lo.min(x[i]), hi.max(x[i]))
        });
    hi - lo
}

/// Steps allowed by the clustering bound `n^4 + ln(1/rho)/ln(n)`, before any
/// constant factor.
pub fn clustering_step_envelope(n: usize, rho: f64) -> f64 {
    let nf = n as f64;
    let tail = if n > 1 {
        (1.0 / rho).ln() / nf.ln()
    } else {
        0.0
    };
    nf.powi(4) + tail
}

/// Evaluates every lemma check along a non-deterministic trajectory whose
/// noise is bounded by `eps`.
pub fn check_nd_lemmas(traj: &Trajectory, eps: f64) -> Result<LemmaReport> {
    let pairwise = match traj.model {
        Model::Nd | Model::Classical => false,
        Model::NdPairwise => true,
        Model::Social => {
            return Err(HkError::Inconsistent(
                "lemma checks apply to non-deterministic trajectories".into(),
            ))
        }
    };
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(HkError::InvalidParameter(format!(
            "noise bound {eps} is not valid"
        )));
    }
    if let Some(bound) = traj.noise_bound {
        if bound > eps {
            return Err(HkError::Inconsistent(format!(
                "trajectory noise bound {bound} exceeds the checked bound {eps}"
            )));
        }
    }
    let x0 = traj.initial();
    if x0.dim() != 1 {
        return Err(HkError::DimensionNotOne(x0.dim()));
    }
    let n = x0.n();
    let nf = n as f64;
    let lemma1_ok = n < 2 || eps < 1.0 / (nf - 1.0);
    let drift_ok = eps < 1.0 / (4.0 * nf * nf);
    let drift_eps = if pairwise { 2.0 * eps } else { eps };

    let mut ck = Checker {
        report: LemmaReport::default(),
    };
    if !lemma1_ok {
        ck.skip(
            LemmaCheck::MinMax,
            format!("eps={eps} is not below 1/(n-1)"),
        );
        ck.skip(
            LemmaCheck::Contraction,
            format!("eps={eps} is not below 1/(n-1)"),
        );
    }
    if !drift_ok {
        ck.skip(
            LemmaCheck::S3Drift,
            format!("eps={eps} is not below 1/(4n^2)"),
        );
    }

    let parts = traj
        .configs
        .iter()
        .map(nd_partition)
        .collect::<Result<Vec<_>>>()?;
    let mut s2_run = 0usize;

    for t in 0..traj.steps() {
        let x = traj.configs[t].coords();
        let y = traj.configs[t + 1].coords();
        let p = &parts[t];
        let q = &parts[t + 1];
        let x_left = x[p.leftmost];

        if lemma1_ok {
            let (lo_x, hi_x) = traj.configs[t].hull_1d();
            let (lo_y, hi_y) = traj.configs[t + 1].hull_1d();
            ck.record(t, LemmaCheck::MinMax, (lo_y - lo_x).min(hi_x - hi_y));
        }

        let floor = x_left + 1.0 / nf - drift_eps;
        for &i in &p.m {
            ck.record(t, LemmaCheck::MDrift, y[i] - floor);
        }

        if lemma1_ok {
            for group in separated_groups_1d(&traj.configs[t]) {
                let sub = partition_within(&traj.configs[t], &group)?;
                if sub.s.is_empty() {
                    let before = spread_of(x, &sub.l);
                    let after = spread_of(y, &sub.l);
                    ck.record(t, LemmaCheck::Contraction, 2.0 * eps * before - after);
                }
            }
        }

        let s3 = q
            .leftmost_neighborhood()
            .iter()
            .any(|i| p.m.binary_search(i).is_ok());
        let tag = if q.s.is_empty() {
            Some(CaseTag::S1)
        } else if s3 {
            Some(CaseTag::S3)
        } else if q.l.len() < p.l.len() {
            Some(CaseTag::S2)
        } else {
            None
        };
        match tag {
            Some(tag) => {
                ck.record(t, LemmaCheck::Trichotomy, 0.0);
                ck.report.case_tags.push(tag);
                s2_run = if tag == CaseTag::S2 { s2_run + 1 } else { 0 };
                ck.report.max_s2_run = ck.report.max_s2_run.max(s2_run);
                ck.record(t, LemmaCheck::S2Run, nf - s2_run as f64);
            }
            None => ck.record(t, LemmaCheck::Trichotomy, -1.0),
        }

        if drift_ok && s3 && t + 2 < traj.configs.len() {
            let (lo, _) = traj.configs[t + 2].hull_1d();
            ck.record(
                t,
                LemmaCheck::S3Drift,
                lo - (x_left + 1.0 / (4.0 * nf * nf)),
            );
        }
    }
    Ok(ck.report)
}
