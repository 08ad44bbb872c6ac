//! Agent configurations, neighborhoods and the communication graph.
//!
//! Agent indices are 0-based throughout the library; file formats use 1-based
//! indices and convert at the boundary.

use serde::{Deserialize, Serialize};

use crate::error::{HkError, Result};
use crate::graphs::SocialGraph;

pub const DEFAULT_CONFIDENCE: f64 = 1.0;

/// Positions of `n` agents in `R^d` together with the confidence bound.
///
/// Positions are stored row-major in a flat buffer of length `n * d`.
#[derive(Debug, Clone, PartialEq)]
pub struct Configuration {
    coords: Vec<f64>,
    dim: usize,
    confidence: f64,
}

impl Configuration {
    pub fn new(points: Vec<Vec<f64>>, confidence: f64) -> Result<Self> {
        let dim = points
            .first()
            .map(Vec::len)
            .ok_or_else(|| HkError::InvalidConfiguration("no agents".into()))?;
        if let Some((i, p)) = points.iter().enumerate().find(|(_, p)| p.len() != dim) {
            return Err(HkError::InvalidConfiguration(format!(
                "agent {} has {} coordinates, expected {dim}",
                i + 1,
                p.len()
            )));
        }
        Self::from_flat(points.into_iter().flatten().collect(), dim, confidence)
    }

    /// One-dimensional configuration with the default confidence bound.
    pub fn line(xs: &[f64]) -> Result<Self> {
        Self::from_flat(xs.to_vec(), 1, DEFAULT_CONFIDENCE)
    }

    pub fn from_flat(coords: Vec<f64>, dim: usize, confidence: f64) -> Result<Self> {
        if dim == 0 {
            return Err(HkError::InvalidConfiguration(
                "dimension must be at least 1".into(),
            ));
        }
        if coords.is_empty() || !coords.len().is_multiple_of(dim) {
            return Err(HkError::InvalidConfiguration(format!(
                "{} coordinates do not form points of dimension {dim}",
                coords.len()
            )));
        }
        if !(confidence.is_finite() && confidence > 0.0) {
            return Err(HkError::InvalidConfiguration(format!(
                "confidence bound must be finite and positive, got {confidence}"
            )));
        }
        if let Some(bad) = coords.iter().position(|c| !c.is_finite()) {
            return Err(HkError::InvalidConfiguration(format!(
                "agent {} has a non-finite coordinate",
                bad / dim + 1
            )));
        }
        Ok(Configuration {
            coords,
            dim,
            confidence,
        })
    }

    /// Same shape and confidence bound, new coordinates. Used by the step
    /// functions, whose output is finite whenever their input is.
    pub(crate) fn with_coords(&self, coords: Vec<f64>) -> Self {
        debug_assert_eq!(coords.len(), self.coords.len());
        Configuration {
            coords,
            dim: self.dim,
            confidence: self.confidence,
        }
    }

    pub fn n(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn confidence(&self) -> f64 {
        self.confidence
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }

    pub fn dist_sq(&self, i: usize, j: usize) -> f64 {
        self.point(i)
            .iter()
            .zip(self.point(j))
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }

    pub fn dist(&self, i: usize, j: usize) -> f64 {
        if self.dim == 1 {
            (self.coords[i] - self.coords[j]).abs()
        } else {
            self.dist_sq(i, j).sqrt()
        }
    }

    /// Whether agents `i` and `j` are within the confidence bound (inclusive).
    pub fn in_range(&self, i: usize, j: usize) -> bool {
        self.dist(i, j) <= self.confidence
    }

    pub(crate) fn check_index(&self, i: usize) -> Result<()> {
        if i < self.n() {
            Ok(())
        } else {
            Err(HkError::IndexOutOfRange {
                index: i,
                n: self.n(),
            })
        }
    }

    pub(crate) fn check_graph(&self, graph: Option<&SocialGraph>) -> Result<()> {
        match graph {
            Some(g) if g.n() != self.n() => Err(HkError::SizeMismatch {
                expected: self.n(),
                found: g.n(),
            }),
            _ => Ok(()),
        }
    }

    pub(crate) fn check_same_shape(&self, other: &Configuration) -> Result<()> {
        if other.n() != self.n() {
            return Err(HkError::SizeMismatch {
                expected: self.n(),
                found: other.n(),
            });
        }
        if other.dim != self.dim {
            return Err(HkError::InvalidConfiguration(format!(
                "dimension mismatch: {} vs {}",
                self.dim, other.dim
            )));
        }
        Ok(())
    }

    /// Sum over agents of the Euclidean displacement between two configurations.
    pub fn movement_to(&self, next: &Configuration) -> f64 {
        if self.dim == 1 {
            self.coords
                .iter()
                .zip(&next.coords)
                .map(|(a, b)| (b - a).abs())
                .sum()
        } else {
            self.points()
                .zip(next.points())
                .map(|(a, b)| {
                    a.iter()
                        .zip(b)
                        .map(|(u, v)| (v - u) * (v - u))
                        .sum::<f64>()
                        .sqrt()
                })
                .sum()
        }
    }

    /// Smallest and largest coordinate of a one-dimensional configuration.
    pub fn hull_1d(&self) -> (f64, f64) {
        self.coords
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
                (lo.min(x), hi.max(x))
            })
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum PositionsJson {
    Line(Vec<f64>),
    Points(Vec<Vec<f64>>),
}

#[derive(Serialize, Deserialize)]
struct ConfigurationJson {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dimension: Option<usize>,
    #[serde(default = "default_confidence")]
    confidence: f64,
    positions: PositionsJson,
}

fn default_confidence() -> f64 {
    DEFAULT_CONFIDENCE
}

impl Serialize for Configuration {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let positions = if self.dim == 1 {
            PositionsJson::Line(self.coords.clone())
        } else {
            PositionsJson::Points(self.points().map(<[f64]>::to_vec).collect())
        };
        ConfigurationJson {
            dimension: Some(self.dim),
            confidence: self.confidence,
            positions,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Configuration {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error;
        let raw = ConfigurationJson::deserialize(d)?;
        let config = match raw.positions {
            PositionsJson::Line(xs) => Configuration::from_flat(xs, 1, raw.confidence),
            PositionsJson::Points(ps) => Configuration::new(ps, raw.confidence),
        }
        .map_err(D::Error::custom)?;
        match raw.dimension {
            Some(d) if d != config.dim => Err(D::Error::custom(format!(
                "declared dimension {d} but positions have dimension {}",
                config.dim
            ))),
            _ => Ok(config),
        }
    }
}

/// Interaction graph of a configuration: social edge and within range.
/// Every vertex is adjacent to itself.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommunicationGraph {
    adjacency: Vec<Vec<usize>>,
}

impl CommunicationGraph {
    /// Builds from sorted adjacency lists that already contain the self-loop.
    pub(crate) fn from_adjacency(adjacency: Vec<Vec<usize>>) -> Self {
        CommunicationGraph { adjacency }
    }

    pub fn n(&self) -> usize {
        self.adjacency.len()
    }

    /// Sorted neighbors of `i`, including `i` itself.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adjacency[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    pub fn is_adjacent(&self, i: usize, j: usize) -> bool {
        self.adjacency[i].binary_search(&j).is_ok()
    }

    /// Unordered pairs `i < j` that interact.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(i, ns)| ns.iter().filter(move |&&j| j > i).map(move |&j| (i, j)))
    }

    pub fn edge_count(&self) -> usize {
        self.edges().count()
    }
}

/// Calls `f(j)` for every neighbor `j` of agent `i` in increasing index
/// order, `i` included.
#[inline]
pub(crate) fn visit_neighbors(
    config: &Configuration,
    graph: Option<&SocialGraph>,
    i: usize,
    mut f: impl FnMut(usize),
) {
    match graph {
        None => {
            for j in 0..config.n() {
                if j == i || config.in_range(i, j) {
                    f(j);
                }
            }
        }
        Some(g) => {
            let mut self_done = false;
            for &j in g.neighbors(i) {
                if !self_done && j > i {
                    f(i);
                    self_done = true;
                }
                if config.in_range(i, j) {
                    f(j);
                }
            }
            if !self_done {
                f(i);
            }
        }
    }
}

/// Agents `i` interacts with: itself plus every social neighbor (everyone when
/// `graph` is `None`) within the confidence bound. Sorted ascending.
pub fn neighbors(
    config: &Configuration,
    graph: Option<&SocialGraph>,
    i: usize,
) -> Result<Vec<usize>> {
    config.check_index(i)?;
    config.check_graph(graph)?;
    let mut out = Vec::new();
    visit_neighbors(config, graph, i, |j| out.push(j));
    Ok(out)
}

pub fn communication_graph(
    config: &Configuration,
    graph: Option<&SocialGraph>,
) -> Result<CommunicationGraph> {
    config.check_graph(graph)?;
    Ok(communication_graph_unchecked(config, graph))
}

pub(crate) fn communication_graph_unchecked(
    config: &Configuration,
    graph: Option<&SocialGraph>,
) -> CommunicationGraph {
    let adjacency = (0..config.n())
        .map(|i| {
            let mut ns = Vec::new();
            visit_neighbors(config, graph, i, |j| ns.push(j));
            ns
        })
        .collect();
    CommunicationGraph::from_adjacency(adjacency)
}

/// Connected components, each sorted, ordered by smallest member.
pub fn components(cg: &CommunicationGraph) -> Vec<Vec<usize>> {
    let n = cg.n();
    let mut label = vec![usize::MAX; n];
    let mut out = Vec::new();
    let mut stack = Vec::new();
    for root in 0..n {
        if label[root] != usize::MAX {
            continue;
        }
        let id = out.len();
        let mut members = vec![root];
        label[root] = id;
        stack.push(root);
        while let Some(u) = stack.pop() {
            for &v in cg.neighbors(u) {
                if label[v] == usize::MAX {
                    label[v] = id;
                    members.push(v);
                    stack.push(v);
                }
            }
        }
        members.sort_unstable();
        out.push(members);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::{named_graph, GraphKind};

    #[test]
    fn neighbors_without_graph() {
        let c = Configuration::line(&[0.0, 0.5, 2.0]).unwrap();
        assert_eq!(neighbors(&c, None, 0).unwrap(), vec![0, 1]);
        assert_eq!(neighbors(&c, None, 2).unwrap(), vec![2]);
    }

    #[test]
    fn neighbors_single_agent() {
        let c = Configuration::line(&[3.0]).unwrap();
        assert_eq!(neighbors(&c, None, 0).unwrap(), vec![0]);
    }

    #[test]
    fn neighbors_respect_social_edges() {
        let c = Configuration::line(&[0.0, 0.5, 1.0]).unwrap();
        let path = named_graph(GraphKind::Path, 3).unwrap();
        assert_eq!(neighbors(&c, Some(&path), 0).unwrap(), vec![0, 1]);
        assert_eq!(neighbors(&c, Some(&path), 1).unwrap(), vec![0, 1, 2]);
    }

    #[test]
    fn boundary_distance_is_inclusive() {
        let c = Configuration::line(&[0.0, 1.0]).unwrap();
        assert_eq!(neighbors(&c, None, 0).unwrap(), vec![0, 1]);
    }

    #[test]
    fn neighbors_errors() {
        let c = Configuration::line(&[0.0, 1.0]).unwrap();
        assert!(matches!(
            neighbors(&c, None, 2),
            Err(HkError::IndexOutOfRange { index: 2, n: 2 })
        ));
        let g = named_graph(GraphKind::Complete, 3).unwrap();
        assert!(matches!(
            neighbors(&c, Some(&g), 0),
            Err(HkError::SizeMismatch { .. })
        ));
    }

    #[test]
    fn communication_graph_examples() {
        let close = Configuration::line(&[0.0, 0.5]).unwrap();
        let cg = communication_graph(&close, None).unwrap();
        assert_eq!(cg.neighbors(0), &[0, 1]);
        assert_eq!(cg.neighbors(1), &[0, 1]);

        let far = Configuration::line(&[0.0, 3.0]).unwrap();
        let cg = communication_graph(&far, None).unwrap();
        assert_eq!(cg.neighbors(0), &[0]);
        assert_eq!(cg.neighbors(1), &[1]);

        let empty = named_graph(GraphKind::Empty, 2).unwrap();
        let cg = communication_graph(&close, Some(&empty)).unwrap();
        assert_eq!(cg.edge_count(), 0);
        assert!(cg.is_adjacent(0, 0) && cg.is_adjacent(1, 1));
    }

    #[test]
    fn components_examples() {
        let far = Configuration::line(&[0.0, 3.0]).unwrap();
        let cg = communication_graph(&far, None).unwrap();
        assert_eq!(components(&cg), vec![vec![0], vec![1]]);

        let close = Configuration::line(&[0.0, 0.1, 0.2]).unwrap();
        let cg = communication_graph(&close, None).unwrap();
        assert_eq!(components(&cg), vec![vec![0, 1, 2]]);

        let two = Configuration::line(&[0.0, 0.5, 4.0, 4.2]).unwrap();
        let cg = communication_graph(&two, None).unwrap();
        assert_eq!(components(&cg), vec![vec![0, 1], vec![2, 3]]);
    }

    #[test]
    fn json_shorthand_and_full_form() {
        let c: Configuration = serde_json::from_str(r#"{"positions": [0, 0.5, 2]}"#).unwrap();
        assert_eq!(c.n(), 3);
        assert_eq!(c.dim(), 1);
        assert_eq!(c.confidence(), 1.0);

        let c: Configuration = serde_json::from_str(
            r#"{"dimension": 2, "confidence": 0.5, "positions": [[0, 1], [2, 3]]}"#,
        )
        .unwrap();
        assert_eq!(c.point(1), &[2.0, 3.0]);
        assert_eq!(c.confidence(), 0.5);

        let back: Configuration =
            serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);

        assert!(serde_json::from_str::<Configuration>(
            r#"{"dimension": 3, "positions": [[0, 1]]}"#
        )
        .is_err());
        assert!(serde_json::from_str::<Configuration>(r#"{"positions": [[0, 1], [2]]}"#).is_err());
        assert!(serde_json::from_str::<Configuration>(r#"{"positions": []}"#).is_err());
    }

    #[test]
    fn rejects_bad_confidence() {
        assert!(Configuration::from_flat(vec![0.0], 1, 0.0).is_err());
        assert!(Configuration::from_flat(vec![f64::NAN], 1, 1.0).is_err());
    }
}
