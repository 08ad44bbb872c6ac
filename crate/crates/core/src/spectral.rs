//! Energy of a configuration and the spectrum of its averaging matrix.
//!
//! Pair sums run over ordered pairs: each unordered pair is counted twice and
//! self-pairs contribute nothing, so the energy lies in `[0, n^2 - n]` and
//! the interacting part equals `2 tr(x^T (D - A) x)`.
//!
//! The averaging matrix `P = D^-1 A` is similar to the symmetric
//! `B = D^-1/2 A D^-1/2`, whose spectrum is computed per connected component.
//! Each connected component contributes exactly one unit eigenvalue.

use std::collections::VecDeque;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::config::{communication_graph_unchecked, components, CommunicationGraph, Configuration};
use crate::error::Result;
use crate::graphs::SocialGraph;

/// Slack used when comparing the two sides of the decrement inequality.
pub const DECREMENT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    pub energy: f64,
    pub active_energy: f64,
    pub lambda: f64,
    pub gap_bound: f64,
    pub diameter: usize,
    pub component_count: usize,
}

/// Energy of positions `x` when pairs are classified by `cg`: squared
/// distance for interacting pairs, one for every other ordered pair.
pub fn classified_energy(x: &Configuration, cg: &CommunicationGraph) -> f64 {
    let n = x.n();
    let mut active = 0.0;
    let mut edges = 0usize;
    for (i, j) in cg.edges() {
        active += x.dist_sq(i, j);
        edges += 1;
    }
    let pairs = n * (n - 1) / 2;
    2.0 * active + 2.0 * (pairs - edges) as f64
}

/// Squared distances summed over ordered interacting pairs of `cg`.
pub fn classified_active_energy(x: &Configuration, cg: &CommunicationGraph) -> f64 {
    2.0 * cg.edges().map(|(i, j)| x.dist_sq(i, j)).sum::<f64>()
}

pub fn energy(config: &Configuration, graph: Option<&SocialGraph>) -> Result<f64> {
    config.check_graph(graph)?;
    Ok(classified_energy(
        config,
        &communication_graph_unchecked(config, graph),
    ))
}

pub fn active_energy(config: &Configuration, graph: Option<&SocialGraph>) -> Result<f64> {
    config.check_graph(graph)?;
    Ok(classified_active_energy(
        config,
        &communication_graph_unchecked(config, graph),
    ))
}

/// Eigenvalues of `D^-1/2 A D^-1/2` restricted to one component, ascending.
fn component_spectrum(cg: &CommunicationGraph, members: &[usize]) -> Vec<f64> {
    let k = members.len();
    let inv_sqrt: Vec<f64> = members
        .iter()
        .map(|&u| 1.0 / (cg.degree(u) as f64).sqrt())
        .collect();
    let mut b = DMatrix::<f64>::zeros(k, k);
    for (a, &u) in members.iter().enumerate() {
        for &v in cg.neighbors(u) {
            let c = members
                .binary_search(&v)
                .expect("neighbor in same component");
            b[(a, c)] = inv_sqrt[a] * inv_sqrt[c];
        }
    }
    let mut eig = b.symmetric_eigenvalues().as_slice().to_vec();
    eig.sort_by(f64::total_cmp);
    eig
}

/// Largest eigenvalue modulus of `P` once the unit eigenvalue of every
/// component is removed; zero when nothing remains.
pub fn second_eigenvalue(cg: &CommunicationGraph) -> f64 {
    components(cg)
        .iter()
        .filter(|c| c.len() > 1)
        .map(|c| {
            let mut eig = component_spectrum(cg, c);
            // the Perron eigenvalue of a connected component is its largest, and equals 1
            let top = eig.pop().expect("component has at least two vertices");
            debug_assert!((top - 1.0).abs() <= 1e-9, "top eigenvalue {top}");
            eig.iter().fold(0.0f64, |m, l| m.max(l.abs()))
        })
        .fold(0.0, f64::max)
}

fn eccentricity(
    cg: &CommunicationGraph,
    src: usize,
    dist: &mut [usize],
    queue: &mut VecDeque<usize>,
) -> usize {
    dist.fill(usize::MAX);
    dist[src] = 0;
    queue.clear();
    queue.push_back(src);
    let mut far = 0;
    while let Some(u) = queue.pop_front() {
        for &v in cg.neighbors(u) {
            if dist[v] == usize::MAX {
                dist[v] = dist[u] + 1;
                far = far.max(dist[v]);
                queue.push_back(v);
            }
        }
    }
    far
}

/// Largest hop diameter over the connected components.
pub fn diameter(cg: &CommunicationGraph) -> usize {
    let mut dist = vec![usize::MAX; cg.n()];
    let mut queue = VecDeque::new();
    (0..cg.n())
        .map(|s| eccentricity(cg, s, &mut dist, &mut queue))
        .max()
        .unwrap_or(0)
}

/// `1 - 1/(n^2 diam)`, or zero when every component is a single agent.
pub fn gap_bound(cg: &CommunicationGraph) -> f64 {
    bound_from_diameter(cg.n(), diameter(cg))
}

fn bound_from_diameter(n: usize, diam: usize) -> f64 {
    if diam == 0 {
        0.0
    } else {
        let n = n as f64;
        1.0 - 1.0 / (n * n * diam as f64)
    }
}

pub fn spectral_report(
    config: &Configuration,
    graph: Option<&SocialGraph>,
) -> Result<SpectralReport> {
    config.check_graph(graph)?;
    let cg = communication_graph_unchecked(config, graph);
    let diam = diameter(&cg);
    Ok(SpectralReport {
        energy: classified_energy(config, &cg),
        active_energy: classified_active_energy(config, &cg),
        lambda: second_eigenvalue(&cg),
        gap_bound: bound_from_diameter(cg.n(), diam),
        diameter: diam,
        component_count: components(&cg).len(),
    })
}

/// Both sides of `E(x_t) - E(x_{t+1}) >= (1 - lambda_t^2) E_act(x_t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecrementCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub lambda: f64,
    pub holds: bool,
}

/// Decrement check for a step on a fixed network. `x_next` must be the
/// social (or classical, with `graph = None`) successor of `x_t`.
pub fn check_decrement(
    x_t: &Configuration,
    x_next: &Configuration,
    graph: Option<&SocialGraph>,
) -> Result<DecrementCheck> {
    check_decrement_varying(x_t, graph, x_next, graph)
}

/// As [`check_decrement`], with the energy at `t + 1` taken on `g_next`.
pub fn check_decrement_varying(
    x_t: &Configuration,
    g_t: Option<&SocialGraph>,
    x_next: &Configuration,
    g_next: Option<&SocialGraph>,
) -> Result<DecrementCheck> {
    x_t.check_same_shape(x_next)?;
    x_t.check_graph(g_t)?;
    x_next.check_graph(g_next)?;
    let cg_t = communication_graph_unchecked(x_t, g_t);
    let cg_next = communication_graph_unchecked(x_next, g_next);
    let lambda = second_eigenvalue(&cg_t);
    let lhs = classified_energy(x_t, &cg_t) - classified_energy(x_next, &cg_next);
    let rhs = (1.0 - lambda * lambda) * classified_active_energy(x_t, &cg_t);
    Ok(DecrementCheck {
        lhs,
        rhs,
        lambda,
        holds: lhs >= rhs - DECREMENT_TOLERANCE,
    })
}
