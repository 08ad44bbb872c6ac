//! Social networks: deterministic and random constructions, time-varying
//! schedules and the friendliness condition on schedule transitions.
//!
//! Random generators draw from `ChaCha8Rng` seeded with the caller's seed, so
//! an edge set is a pure function of `(n, parameter, seed)` on every platform.

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::Configuration;
use crate::error::{HkError, Result};
use crate::seed;

/// Undirected simple graph on `n` agents. Self-pairs are never stored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SocialGraph {
    adjacency: Vec<Vec<usize>>,
}

impl SocialGraph {
    pub fn empty(n: usize) -> Self {
        SocialGraph {
            adjacency: vec![Vec::new(); n],
        }
    }

    pub fn complete(n: usize) -> Self {
        SocialGraph {
            adjacency: (0..n)
                .map(|i| (0..n).filter(|&j| j != i).collect())
                .collect(),
        }
    }

    /// Builds from 0-based unordered pairs. Duplicates are merged.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut g = SocialGraph::empty(n);
        for (i, j) in edges {
            if i >= n || j >= n {
                return Err(HkError::InvalidGraph(format!(
                    "edge ({}, {}) has an endpoint outside 1..={n}",
                    i + 1,
                    j + 1
                )));
            }
            if i == j {
                return Err(HkError::InvalidGraph(format!(
                    "self-pair ({0}, {0})",
                    i + 1
                )));
            }
            g.add_edge(i, j);
        }
        Ok(g)
    }

    pub fn n(&self) -> usize {
        self.adjacency.len()
    }

    /// Sorted social neighbors of `i` (excluding `i`).
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adjacency[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adjacency[i].binary_search(&j).is_ok()
    }

    /// Inserts `{i, j}`; returns false if it was already present.
    pub fn add_edge(&mut self, i: usize, j: usize) -> bool {
        assert!(i != j, "self-pairs are not social edges");
        match self.adjacency[i].binary_search(&j) {
            Ok(_) => false,
            Err(pos) => {
                self.adjacency[i].insert(pos, j);
                let pos = self.adjacency[j].binary_search(&i).unwrap_err();
                self.adjacency[j].insert(pos, i);
                true
            }
        }
    }

    pub fn remove_edge(&mut self, i: usize, j: usize) -> bool {
        match self.adjacency[i].binary_search(&j) {
            Ok(pos) => {
                self.adjacency[i].remove(pos);
                let pos = self.adjacency[j].binary_search(&i).unwrap();
                self.adjacency[j].remove(pos);
                true
            }
            Err(_) => false,
        }
    }

    /// Unordered pairs `i < j`, lexicographic.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(i, ns)| ns.iter().filter(move |&&j| j > i).map(move |&j| (i, j)))
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn is_superset_of(&self, other: &SocialGraph) -> bool {
        other.edges().all(|(i, j)| self.has_edge(i, j))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HkError::io(path, e))?;
        let file: GraphFile = serde_json::from_str(&text)?;
        file.try_into()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(&GraphFile::from(self))?;
        std::fs::write(path, text).map_err(|e| HkError::io(path, e))
    }
}

/// On-disk graph: `{"n": n, "edges": [[i, j], ...]}` with 1-based endpoints.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraphFile {
    pub n: usize,
    pub edges: Vec<[usize; 2]>,
}

impl From<&SocialGraph> for GraphFile {
    fn from(g: &SocialGraph) -> Self {
        GraphFile {
            n: g.n(),
            edges: g.edges().map(|(i, j)| [i + 1, j + 1]).collect(),
        }
    }
}

impl TryFrom<GraphFile> for SocialGraph {
    type Error = HkError;

    fn try_from(f: GraphFile) -> Result<Self> {
        let mut pairs = Vec::with_capacity(f.edges.len());
        for [i, j] in f.edges {
            if i == 0 || j == 0 {
                return Err(HkError::InvalidGraph(
                    "graph files use 1-based agent indices".into(),
                ));
            }
            pairs.push((i - 1, j - 1));
        }
        SocialGraph::from_edges(f.n, pairs)
    }
}

/// Erdős–Rényi `G(n, p)`: pairs `(i, j)`, `i < j`, are visited in
/// lexicographic order and kept when a uniform draw in `[0, 1)` is below `p`.
pub fn gnp(n: usize, p: f64, seed: u64) -> Result<SocialGraph> {
    if !(0.0..=1.0).contains(&p) {
        return Err(HkError::InvalidParameter(format!(
            "edge probability {p} outside [0, 1]"
        )));
    }
    let mut rng = seed::rng(seed);
    let mut adjacency = vec![Vec::new(); n];
    for i in 0..n {
        for j in i + 1..n {
            if rng.random::<f64>() < p {
                adjacency[i].push(j);
                adjacency[j].push(i);
            }
        }
    }
    // Pushes happen in increasing j for row i, and increasing i for row j.
    Ok(SocialGraph { adjacency })
}

/// Barabási–Albert preferential attachment seeded from a clique on `m + 1`
/// agents. Each later agent attaches to `m` distinct earlier agents, drawn
/// with probability proportional to their current degree.
pub fn barabasi_albert(n: usize, m: usize, seed: u64) -> Result<SocialGraph> {
    if m == 0 || m >= n {
        return Err(HkError::InvalidParameter(format!(
            "attachment count m={m} must satisfy 1 <= m < n={n}"
        )));
    }
    let mut rng = seed::rng(seed);
    let mut g = SocialGraph::empty(n);
    // Every edge endpoint appears once here, so a uniform pick is degree-weighted.
    let mut endpoints = Vec::with_capacity(2 * (m * (m + 1) / 2 + (n - m - 1) * m));
    for i in 0..=m {
        for j in i + 1..=m {
            g.add_edge(i, j);
            endpoints.extend([i, j]);
        }
    }
    let mut targets = Vec::with_capacity(m);
    for v in m + 1..n {
        targets.clear();
        while targets.len() < m {
            let u = endpoints[rng.random_range(0..endpoints.len())];
            if !targets.contains(&u) {
                targets.push(u);
            }
        }
        for &u in &targets {
            g.add_edge(u, v);
            endpoints.extend([u, v]);
        }
    }
    Ok(g)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphKind {
    Complete,
    Path,
    Empty,
}

impl FromStr for GraphKind {
    type Err = HkError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "complete" => Ok(GraphKind::Complete),
            "path" => Ok(GraphKind::Path),
            "empty" => Ok(GraphKind::Empty),
            other => Err(HkError::Parse(format!("unknown graph kind '{other}'"))),
        }
    }
}

pub fn named_graph(kind: GraphKind, n: usize) -> Result<SocialGraph> {
    if n == 0 {
        return Err(HkError::InvalidParameter(
            "graphs need at least one agent".into(),
        ));
    }
    Ok(match kind {
        GraphKind::Complete => SocialGraph::complete(n),
        GraphKind::Empty => SocialGraph::empty(n),
        GraphKind::Path => SocialGraph::from_edges(n, (1..n).map(|i| (i - 1, i)))?,
    })
}

/// Outcome of a friendliness check on one schedule transition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FriendlinessReport {
    pub friendly: bool,
    /// Pairs `i < j` that interacted at `t`, are still in range at `t + 1`,
    /// yet lost their social edge.
    pub violations: Vec<(usize, usize)>,
}

pub fn is_friendly_transition(
    g_t: &SocialGraph,
    g_next: &SocialGraph,
    x_t: &Configuration,
    x_next: &Configuration,
) -> Result<FriendlinessReport> {
    let n = x_t.n();
    for found in [g_t.n(), g_next.n(), x_next.n()] {
        if found != n {
            return Err(HkError::SizeMismatch { expected: n, found });
        }
    }
    let violations: Vec<_> = g_t
        .edges()
        .filter(|&(i, j)| !g_next.has_edge(i, j) && x_t.in_range(i, j) && x_next.in_range(i, j))
        .collect();
    Ok(FriendlinessReport {
        friendly: violations.is_empty(),
        violations,
    })
}

/// Rule producing the next social network from the current one and the
/// configurations on either side of the step just taken.
pub trait GraphPolicy: Send + Sync {
    fn next_graph(
        &self,
        t: usize,
        current: &SocialGraph,
        x_t: &Configuration,
        x_next: &Configuration,
    ) -> SocialGraph;
}

impl<F> GraphPolicy for F
where
    F: Fn(usize, &SocialGraph, &Configuration, &Configuration) -> SocialGraph + Send + Sync,
{
    fn next_graph(
        &self,
        t: usize,
        current: &SocialGraph,
        x_t: &Configuration,
        x_next: &Configuration,
    ) -> SocialGraph {
        self(t, current, x_t, x_next)
    }
}

/// Adds each missing pair with probability `p_add` at every step. Draws are
/// keyed on `(seed, t, i, j)`, so the schedule never deletes an edge and is
/// therefore friendly.
#[derive(Debug, Clone, Copy)]
pub struct EdgeAddition {
    pub p_add: f64,
    pub seed: u64,
}

impl GraphPolicy for EdgeAddition {
    fn next_graph(
        &self,
        t: usize,
        current: &SocialGraph,
        _x_t: &Configuration,
        _x_next: &Configuration,
    ) -> SocialGraph {
        let mut g = current.clone();
        let n = g.n();
        for i in 0..n {
            for j in i + 1..n {
                if !current.has_edge(i, j)
                    && seed::unit_closed(seed::mix(&[self.seed, t as u64, i as u64, j as u64]))
                        < self.p_add
                {
                    g.add_edge(i, j);
                }
            }
        }
        g
    }
}

#[derive(Clone)]
pub enum ScheduleMode {
    Static(SocialGraph),
    /// `G_t` is the `t`-th entry; the last entry persists once exhausted.
    Sequence(Vec<SocialGraph>),
    Policy {
        initial: SocialGraph,
        rule: Arc<dyn GraphPolicy>,
    },
}

impl fmt::Debug for ScheduleMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScheduleMode::Static(g) => f.debug_tuple("Static").field(&g.edge_count()).finish(),
            ScheduleMode::Sequence(gs) => f.debug_tuple("Sequence").field(&gs.len()).finish(),
            ScheduleMode::Policy { .. } => f.write_str("Policy"),
        }
    }
}

/// Social network over time. When `declared_friendly` is set, the runner
/// verifies every transition.
#[derive(Debug, Clone)]
pub struct GraphSchedule {
    pub mode: ScheduleMode,
    pub declared_friendly: bool,
}

impl GraphSchedule {
    pub fn fixed(g: SocialGraph) -> Self {
        GraphSchedule {
            mode: ScheduleMode::Static(g),
            declared_friendly: false,
        }
    }

    pub fn sequence(graphs: Vec<SocialGraph>) -> Result<Self> {
        let n = graphs
            .first()
            .ok_or_else(|| HkError::InvalidGraph("empty graph sequence".into()))?
            .n();
        if let Some(g) = graphs.iter().find(|g| g.n() != n) {
            return Err(HkError::SizeMismatch {
                expected: n,
                found: g.n(),
            });
        }
        Ok(GraphSchedule {
            mode: ScheduleMode::Sequence(graphs),
            declared_friendly: false,
        })
    }

    pub fn policy(initial: SocialGraph, rule: impl GraphPolicy + 'static) -> Self {
        GraphSchedule {
            mode: ScheduleMode::Policy {
                initial,
                rule: Arc::new(rule),
            },
            declared_friendly: false,
        }
    }

    pub fn friendly(mut self, declared: bool) -> Self {
        self.declared_friendly = declared;
        self
    }

    pub fn initial(&self) -> &SocialGraph {
        match &self.mode {
            ScheduleMode::Static(g) => g,
            ScheduleMode::Sequence(gs) => &gs[0],
            ScheduleMode::Policy { initial, .. } => initial,
        }
    }

    pub fn n(&self) -> usize {
        self.initial().n()
    }

    pub fn is_static(&self) -> bool {
        matches!(self.mode, ScheduleMode::Static(_))
    }

    /// `G_{t+1}`, or `None` when it equals `current`.
    pub fn advance(
        &self,
        t: usize,
        current: &SocialGraph,
        x_t: &Configuration,
        x_next: &Configuration,
    ) -> Result<Option<SocialGraph>> {
        let next = match &self.mode {
            ScheduleMode::Static(_) => None,
            ScheduleMode::Sequence(gs) => gs.get(t + 1).cloned(),
            ScheduleMode::Policy { rule, .. } => Some(rule.next_graph(t, current, x_t, x_next)),
        };
        if let Some(g) = &next {
            if g.n() != current.n() {
                return Err(HkError::SizeMismatch {
                    expected: current.n(),
                    found: g.n(),
                });
            }
        }
        Ok(next)
    }

    /// Schedule file: `{"friendly": bool, "graphs": [{"n": n, "edges": [...]}, ...]}`.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HkError::io(path, e))?;
        let file: ScheduleFile = serde_json::from_str(&text)?;
        let graphs = file
            .graphs
            .into_iter()
            .map(SocialGraph::try_from)
            .collect::<Result<Vec<_>>>()?;
        Ok(GraphSchedule::sequence(graphs)?.friendly(file.friendly))
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ScheduleFile {
    #[serde(default)]
    pub friendly: bool,
    pub graphs: Vec<GraphFile>,
}

/// Graph description used on the command line.
#[derive(Debug, Clone, PartialEq)]
pub enum GraphSpec {
    Gnp { n: usize, p: f64 },
    BarabasiAlbert { n: usize, m: usize },
    Named { kind: GraphKind, n: usize },
    File(std::path::PathBuf),
}

impl GraphSpec {
    pub fn build(&self, seed: u64) -> Result<SocialGraph> {
        match self {
            GraphSpec::Gnp { n, p } => gnp(*n, *p, seed),
            GraphSpec::BarabasiAlbert { n, m } => barabasi_albert(*n, *m, seed),
            GraphSpec::Named { kind, n } => named_graph(*kind, *n),
            GraphSpec::File(path) => SocialGraph::load(path),
        }
    }
}

fn parse_num<T: FromStr>(s: &str, what: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| HkError::Parse(format!("cannot parse {what} from '{s}'")))
}

impl FromStr for GraphSpec {
    type Err = HkError;

    /// `gnp:n,p`, `ba:n,m`, `complete:n`, `path:n`, `empty:n`, `file:<path>`.
    fn from_str(s: &str) -> Result<Self> {
        let (kind, rest) = s
            .split_once(':')
            .ok_or_else(|| HkError::Parse(format!("graph spec '{s}' lacks a ':'")))?;
        let two = |rest: &str| -> Result<(String, String)> {
            rest.split_once(',')
                .map(|(a, b)| (a.to_string(), b.to_string()))
                .ok_or_else(|| HkError::Parse(format!("graph spec '{s}' expects two parameters")))
        };
        match kind {
            "gnp" => {
                let (n, p) = two(rest)?;
                Ok(GraphSpec::Gnp {
                    n: parse_num(&n, "n")?,
                    p: parse_num(&p, "p")?,
                })
            }
            "ba" => {
                let (n, m) = two(rest)?;
                Ok(GraphSpec::BarabasiAlbert {
                    n: parse_num(&n, "n")?,
                    m: parse_num(&m, "m")?,
                })
            }
            "file" => Ok(GraphSpec::File(rest.into())),
            other => Ok(GraphSpec::Named {
                kind: other.parse()?,
                n: parse_num(rest, "n")?,
            }),
        }
    }
}
