use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{step_classical, step_nd, step_nd_pairwise, Model, NoiseSource};
use crate::config::Configuration;
use crate::diagnostics::{attach_reports, clusters, ReportOptions, StepReport};
use crate::error::{HkError, Result};
use crate::graphs::{is_friendly_transition, GraphSchedule, SocialGraph};

/// When to stop iterating. The first condition to fire wins.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StopRule {
    pub max_steps: usize,
    /// Stop once the total movement of a step drops below this value.
    pub movement_threshold: Option<f64>,
    /// Stop once every cluster fits in an interval of this length.
    pub cluster_rho: Option<f64>,
}

impl StopRule {
    pub fn steps(max_steps: usize) -> Self {
        StopRule {
            max_steps,
            movement_threshold: None,
            cluster_rho: None,
        }
    }

    pub fn movement(mut self, threshold: f64) -> Self {
        self.movement_threshold = Some(threshold);
        self
    }

    pub fn clustered(mut self, rho: f64) -> Self {
        self.cluster_rho = Some(rho);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "kebab-case")]
pub enum StopReason {
    MaxSteps,
    /// Total movement from `x_t` to `x_{t+1}` fell below the threshold.
    Movement {
        t: usize,
    },
    /// `x_t` satisfied the cluster criterion.
    Clustered {
        t: usize,
    },
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Record friendliness violations instead of aborting.
    pub allow_unfriendly: bool,
    pub reports: Option<ReportOptions>,
}

/// Social network in force at each time, stored as change points.
#[derive(Debug, Clone, Default)]
pub struct GraphTrace {
    changes: Vec<(usize, Arc<SocialGraph>)>,
}

impl GraphTrace {
    pub fn none() -> Self {
        GraphTrace::default()
    }

    pub fn fixed(g: SocialGraph) -> Self {
        GraphTrace {
            changes: vec![(0, Arc::new(g))],
        }
    }

    pub(crate) fn push(&mut self, t: usize, g: SocialGraph) {
        self.changes.push((t, Arc::new(g)));
    }

    pub fn is_empty(&self) -> bool {
        self.changes.is_empty()
    }

    /// `G_t`, or `None` for models without a social network.
    pub fn at(&self, t: usize) -> Option<&SocialGraph> {
        let idx = self.changes.partition_point(|(start, _)| *start <= t);
        idx.checked_sub(1).map(|k| self.changes[k].1.as_ref())
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub model: Model,
    /// `x_0, ..., x_T`.
    pub configs: Vec<Configuration>,
    pub graphs: GraphTrace,
    pub noise_bound: Option<f64>,
    pub stop: StopReason,
    /// `(t, pairs)` for every unfriendly transition `t -> t + 1` that was let through.
    pub friendliness_violations: Vec<(usize, Vec<(usize, usize)>)>,
    pub reports: Option<Vec<StepReport>>,
}

impl Trajectory {
    /// A trajectory assembled from externally produced configurations.
    pub fn from_configs(
        model: Model,
        configs: Vec<Configuration>,
        graphs: GraphTrace,
        noise_bound: Option<f64>,
    ) -> Result<Self> {
        let first = configs.first().ok_or_else(|| {
            HkError::Inconsistent("trajectory needs at least one configuration".into())
        })?;
        for c in &configs[1..] {
            first.check_same_shape(c)?;
            if c.confidence() != first.confidence() {
                return Err(HkError::Inconsistent(
                    "confidence bound changes along the trajectory".into(),
                ));
            }
        }
        Ok(Trajectory {
            model,
            configs,
            graphs,
            noise_bound,
            stop: StopReason::MaxSteps,
            friendliness_violations: Vec::new(),
            reports: None,
        })
    }

    /// Number of transitions recorded.
    pub fn steps(&self) -> usize {
        self.configs.len() - 1
    }

    pub fn initial(&self) -> &Configuration {
        &self.configs[0]
    }

    pub fn last(&self) -> &Configuration {
        self.configs.last().expect("non-empty trajectory")
    }

    /// Total movement between `x_t` and `x_{t+1}`.
    pub fn movement(&self, t: usize) -> f64 {
        self.configs[t].movement_to(&self.configs[t + 1])
    }

    pub fn graph_at(&self, t: usize) -> Option<&SocialGraph> {
        self.graphs.at(t)
    }
}

fn validate(
    model: Model,
    x0: &Configuration,
    schedule: Option<&GraphSchedule>,
    noise: Option<&NoiseSource>,
) -> Result<()> {
    match model {
        Model::Social => {
            let s = schedule
                .ok_or_else(|| HkError::Inconsistent("the social model needs a graph".into()))?;
            if s.n() != x0.n() {
                return Err(HkError::SizeMismatch {
                    expected: x0.n(),
                    found: s.n(),
                });
            }
        }
        _ if schedule.is_some() => {
            return Err(HkError::Inconsistent(format!(
                "model {model} does not take a graph"
            )));
        }
        _ => {}
    }
    match (model.noise_mode(), noise) {
        (Some(mode), Some(src)) if src.mode() != mode => Err(HkError::Inconsistent(format!(
            "model {model} needs {mode:?} noise, got {:?}",
            src.mode()
        ))),
        (Some(_), None) => Err(HkError::Inconsistent(format!(
            "model {model} needs a noise source"
        ))),
        (Some(_), Some(_)) if x0.dim() != 1 => Err(HkError::DimensionNotOne(x0.dim())),
        (None, Some(_)) => Err(HkError::Inconsistent(format!(
            "model {model} does not take noise"
        ))),
        _ => Ok(()),
    }
}

fn is_clustered(x: &Configuration, rho: f64) -> bool {
    clusters(x, rho).all_within
}

/// Iterates `model` from `x0` until a stop condition fires.
pub fn run(
    model: Model,
    x0: Configuration,
    schedule: Option<&GraphSchedule>,
    noise: Option<&NoiseSource>,
    stop: &StopRule,
    options: &RunOptions,
) -> Result<Trajectory> {
    validate(model, &x0, schedule, noise)?;

    let mut graphs = GraphTrace::none();
    let mut current: Option<SocialGraph> = schedule.map(|s| s.initial().clone());
    if let Some(g) = &current {
        graphs.push(0, g.clone());
    }
    let mut configs = vec![x0];
    let mut violations = Vec::new();
    let mut reason = StopReason::MaxSteps;

    if stop
        .cluster_rho
        .is_some_and(|rho| is_clustered(&configs[0], rho))
    {
        reason = StopReason::Clustered { t: 0 };
    } else {
        for t in 0..stop.max_steps {
            let x_t = &configs[t];
            let next = match model {
                Model::Classical => step_classical(x_t),
                Model::Social => super::averaging_step(x_t, current.as_ref()),
                Model::Nd => step_nd(x_t, noise.expect("validated"), t)?,
                Model::NdPairwise => step_nd_pairwise(x_t, noise.expect("validated"), t)?,
            };

            if let (Some(s), Some(g_t)) = (schedule, current.as_ref()) {
                if let Some(g_next) = s.advance(t, g_t, x_t, &next)? {
                    if s.declared_friendly {
                        let report = is_friendly_transition(g_t, &g_next, x_t, &next)?;
                        if !report.friendly {
                            if !options.allow_unfriendly {
                                return Err(HkError::FriendlinessViolation {
                                    t,
                                    pairs: report.violations,
                                });
                            }
                            violations.push((t, report.violations));
                        }
                    }
                    if &g_next != g_t {
                        graphs.push(t + 1, g_next.clone());
                    }
                    current = Some(g_next);
                }
            }

            let moved = x_t.movement_to(&next);
            configs.push(next);
            if stop.movement_threshold.is_some_and(|thr| moved < thr) {
                reason = StopReason::Movement { t };
                break;
            }
            if stop
                .cluster_rho
                .is_some_and(|rho| is_clustered(&configs[t + 1], rho))
            {
                reason = StopReason::Clustered { t: t + 1 };
                break;
            }
        }
    }

    let mut traj = Trajectory {
        model,
        configs,
        graphs,
        noise_bound: noise.map(NoiseSource::bound),
        stop: reason,
        friendliness_violations: violations,
        reports: None,
    };
    if let Some(opts) = &options.reports {
        attach_reports(&mut traj, opts)?;
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::NoiseMode;
    use crate::graphs::{named_graph, GraphKind};

    fn line(xs: &[f64]) -> Configuration {
        Configuration::line(xs).unwrap()
    }

    #[test]
    fn classical_single_step_consensus() {
        let traj = run(
            Model::Classical,
            line(&[0.0, 0.5, 1.0]),
            None,
            None,
            &StopRule::steps(5).movement(1e-6),
            &RunOptions::default(),
        )
        .unwrap();
        assert_eq!(traj.stop, StopReason::Movement { t: 1 });
        assert!(traj
            .last()
            .coords()
            .iter()
            .all(|&x| (x - 0.5).abs() < 1e-15));
    }

    #[test]
    fn path_graph_never_freezes_but_stops_at_19() {
        let path = GraphSchedule::fixed(named_graph(GraphKind::Path, 3).unwrap());
        let traj = run(
            Model::Social,
            line(&[-0.5, 0.0, 0.5]),
            Some(&path),
            None,
            &StopRule::steps(1000).movement(1e-6),
            &RunOptions::default(),
        )
        .unwrap();
        assert_eq!(traj.stop, StopReason::Movement { t: 19 });
        for t in 0..traj.steps() {
            assert!(traj.movement(t) > 0.0);
        }
    }

    #[test]
    fn nd_zero_noise_matches_classical_trajectory() {
        let x0 = line(&[0.0, 0.4, 1.1, 1.9, 2.5, 4.0]);
        let stop = StopRule::steps(30);
        let a = run(
            Model::Classical,
            x0.clone(),
            None,
            None,
            &stop,
            &RunOptions::default(),
        )
        .unwrap();
        let zero = NoiseSource::zero(NoiseMode::PerAgent);
        let b = run(
            Model::Nd,
            x0,
            None,
            Some(&zero),
            &stop,
            &RunOptions::default(),
        )
        .unwrap();
        assert_eq!(a.configs, b.configs);
    }

    #[test]
    fn inconsistent_arguments() {
        let x0 = line(&[0.0, 0.5]);
        let stop = StopRule::steps(1);
        let opts = RunOptions::default();
        let g = GraphSchedule::fixed(SocialGraph::complete(2));
        let agent = NoiseSource::zero(NoiseMode::PerAgent);
        let pair = NoiseSource::zero(NoiseMode::PerPair);
        assert!(run(Model::Social, x0.clone(), None, None, &stop, &opts).is_err());
        assert!(run(Model::Classical, x0.clone(), Some(&g), None, &stop, &opts).is_err());
        assert!(run(Model::Nd, x0.clone(), None, None, &stop, &opts).is_err());
        assert!(run(Model::Nd, x0.clone(), None, Some(&pair), &stop, &opts).is_err());
        assert!(run(
            Model::Classical,
            x0.clone(),
            None,
            Some(&agent),
            &stop,
            &opts
        )
        .is_err());
        let wrong = GraphSchedule::fixed(SocialGraph::complete(3));
        assert!(run(Model::Social, x0, Some(&wrong), None, &stop, &opts).is_err());
        let plane = Configuration::new(vec![vec![0.0, 0.0]], 1.0).unwrap();
        assert!(matches!(
            run(Model::Nd, plane, None, Some(&agent), &stop, &opts),
            Err(HkError::DimensionNotOne(2))
        ));
    }

    #[test]
    fn unfriendly_schedule_aborts_or_records() {
        let x0 = line(&[0.0, 0.5]);
        let g0 = SocialGraph::complete(2);
        let schedule = GraphSchedule::sequence(vec![g0, SocialGraph::empty(2)])
            .unwrap()
            .friendly(true);
        let stop = StopRule::steps(3);
        let err = run(
            Model::Social,
            x0.clone(),
            Some(&schedule),
            None,
            &stop,
            &RunOptions::default(),
        );
        assert!(matches!(
            err,
            Err(HkError::FriendlinessViolation { t: 0, .. })
        ));

        let opts = RunOptions {
            allow_unfriendly: true,
            ..RunOptions::default()
        };
        let traj = run(Model::Social, x0, Some(&schedule), None, &stop, &opts).unwrap();
        assert_eq!(traj.friendliness_violations, vec![(0, vec![(0, 1)])]);
        assert_eq!(traj.graph_at(0).unwrap().edge_count(), 1);
        assert_eq!(traj.graph_at(1).unwrap().edge_count(), 0);
        assert_eq!(traj.graph_at(7).unwrap().edge_count(), 0);
    }

    #[test]
    fn cluster_stop_can_fire_at_zero() {
        let traj = run(
            Model::Classical,
            line(&[0.0, 0.0, 5.0]),
            None,
            None,
            &StopRule::steps(10).clustered(1e-6),
            &RunOptions::default(),
        )
        .unwrap();
        assert_eq!(traj.stop, StopReason::Clustered { t: 0 });
        assert_eq!(traj.steps(), 0);
    }
}
